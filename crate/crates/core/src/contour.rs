//! The single-pair update: exact tracing of the `E + ε` level of the
//! interpolated Hamiltonian through the unit-cell grid.
//!
//! On every unit cell the interpolated `H` is the bilinear interpolation of its
//! four integer corner values, so the level set is a marching-squares polyline
//! whose topology is fixed by corner signs and, in the two ambiguous sign
//! patterns, by the in-cell saddle value. Because the level is `E + ε`, a corner
//! is never on the level: corners with `H ≤ E` are *below*, corners with
//! `H > E` are *above*.
//!
//! A crossing lives on a lattice edge joining a below site `b` to an above
//! neighbour. Its parameter along the edge is `(E + ε − H(b)) / (H(a) − H(b))`,
//! whose standard part is zero exactly when `H(b) = E`; such a crossing
//! *touches* `b`. A cell with a single above corner `D` whose other three
//! corners all equal `E` carries a hyperbolic arc passing infinitesimally close
//! to the corner opposite `D`; that arc also touches the opposite corner.
//!
//! Orientation: contours run with the `H > E + ε` region on the left, which is
//! the direction of `(∂H/∂p, −∂H/∂q)`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::DualRational;
use crate::hamiltonian::{ModelError, SeparableHamiltonian1D};

pub type Site = (i64, i64);

/// East, north, west, south in the `(Q, P)` plane.
const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
/// Cell corners in counter-clockwise order from the lower-left one.
const CORNERS: [(i64, i64); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteClass {
    Regular,
    Saddle,
    Extremum,
    OffContour,
}

impl SiteClass {
    pub fn is_stationary(self) -> bool {
        !matches!(self, SiteClass::Regular)
    }
}

impl fmt::Display for SiteClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SiteClass::Regular => "regular",
            SiteClass::Saddle => "saddle",
            SiteClass::Extremum => "extremum",
            SiteClass::OffContour => "off-contour",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContourError {
    #[error("window exceeded: {0}")]
    WindowExceeded(#[from] ModelError),
    #[error("level {energy}+ε leaves the window near {near:?} before closing")]
    UnboundedContour { energy: i64, near: Site },
    #[error("site {site:?} has energy {actual}, not {energy}")]
    OffShell { site: Site, energy: i64, actual: i64 },
}

/// A level crossing on the lattice edge from `below` to `below + DIRS[dir]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Crossing {
    below: Site,
    dir: u8,
}

impl Crossing {
    fn above(&self) -> Site {
        let (dq, dp) = DIRS[self.dir as usize];
        (self.below.0 + dq, self.below.1 + dp)
    }

    fn between(below: Site, above: Site) -> Self {
        let delta = (above.0 - below.0, above.1 - below.1);
        let dir = DIRS.iter().position(|&d| d == delta).expect("adjacent sites") as u8;
        Crossing { below, dir }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pairing {
    /// Exactly two crossings in the cell.
    Single,
    /// Ambiguous cell whose below corners are cut off (above region connected).
    BelowCut,
    /// Ambiguous cell whose above corners are cut off (below region connected).
    AboveCut,
}

struct Cell {
    origin: Site,
    values: [i64; 4],
    above: [bool; 4],
}

impl Cell {
    fn corner(&self, i: usize) -> Site {
        let (dq, dp) = CORNERS[i % 4];
        (self.origin.0 + dq, self.origin.1 + dp)
    }

    fn has_crossing(&self, edge: usize) -> bool {
        self.above[edge % 4] != self.above[(edge + 1) % 4]
    }

    /// Crossing on an edge oriented counter-clockwise from above to below:
    /// the contour enters the cell there.
    fn is_entry(&self, edge: usize) -> bool {
        self.above[edge % 4] && !self.above[(edge + 1) % 4]
    }

    fn crossing_on(&self, edge: usize) -> Crossing {
        let (a, b) = (self.corner(edge), self.corner(edge + 1));
        if self.above[edge % 4] {
            Crossing::between(b, a)
        } else {
            Crossing::between(a, b)
        }
    }

    fn edge_of(&self, x: &Crossing) -> usize {
        let ends = (x.below, x.above());
        (0..4)
            .find(|&i| {
                let (a, b) = (self.corner(i), self.corner(i + 1));
                (a, b) == ends || (b, a) == ends
            })
            .expect("crossing lies on a cell edge")
    }

    fn crossing_count(&self) -> usize {
        (0..4).filter(|&i| self.has_crossing(i)).count()
    }

    fn pairing(&self, energy: i64) -> Pairing {
        if self.crossing_count() == 2 {
            return Pairing::Single;
        }
        debug_assert_eq!(self.crossing_count(), 4);
        // In-cell bilinear saddle value (c00·c11 − c10·c01)/(c00 + c11 − c10 − c01)
        // against E + ε. The denominator is nonzero for both diagonal patterns.
        let [c00, c10, c11, c01] = self.values.map(|v| v as i128);
        let num = DualRational::standard((c00 * c11 - c10 * c01).into());
        let den = DualRational::standard((c00 + c11 - c10 - c01).into());
        let saddle = num
            .checked_div(&den)
            .expect("diagonal sign pattern has a nondegenerate saddle");
        if saddle > DualRational::level(energy) {
            Pairing::BelowCut
        } else {
            Pairing::AboveCut
        }
    }

    /// The corner passed at infinitesimal distance by the cell's single arc, if
    /// any.
    fn passage(&self, energy: i64) -> Option<Site> {
        let mut ups = (0..4).filter(|&i| self.above[i]);
        let d = ups.next()?;
        if ups.next().is_some() {
            return None;
        }
        let (o, l, r) = ((d + 2) % 4, (d + 1) % 4, (d + 3) % 4);
        (self.values[o] == energy && self.values[l] == energy && self.values[r] == energy)
            .then(|| self.corner(o))
    }
}

/// Local structure of the ε-level around an on-shell site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    /// Consecutive edge crossings near the site joined by corner-cutting arcs.
    Chain { first: Crossing, last: Crossing },
    /// A hyperbolic arc from `from` to `to` passing the site.
    Passage { from: Crossing, to: Crossing },
}

impl Branch {
    fn forward_anchor(&self) -> Crossing {
        match *self {
            Branch::Chain { last, .. } => last,
            Branch::Passage { from, .. } => from,
        }
    }

    fn backward_anchor(&self) -> Crossing {
        match *self {
            Branch::Chain { first, .. } => first,
            Branch::Passage { to, .. } => to,
        }
    }
}

struct Local {
    class: SiteClass,
    branches: Vec<Branch>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Exact tracer for one energy level of one Hamiltonian.
struct Tracer<'h> {
    h: &'h SeparableHamiltonian1D,
    energy: i64,
    max_steps: usize,
}

impl<'h> Tracer<'h> {
    fn new(h: &'h SeparableHamiltonian1D, energy: i64) -> Self {
        let (qlo, qhi) = h.q_window();
        let (plo, phi) = h.p_window();
        let edges = 2 * ((qhi - qlo + 1) as usize) * ((phi - plo + 1) as usize);
        Self {
            h,
            energy,
            max_steps: edges + 8,
        }
    }

    fn unbounded(&self, near: Site) -> ContourError {
        ContourError::UnboundedContour {
            energy: self.energy,
            near,
        }
    }

    fn cell(&self, origin: Site) -> Result<Cell, ModelError> {
        let mut values = [0; 4];
        for (i, v) in values.iter_mut().enumerate() {
            let (dq, dp) = CORNERS[i];
            *v = self.h.eval_integer(origin.0 + dq, origin.1 + dp)?;
        }
        let above = values.map(|v| v > self.energy);
        Ok(Cell {
            origin,
            values,
            above,
        })
    }

    fn cell_while_tracing(&self, origin: Site) -> Result<Cell, ContourError> {
        self.cell(origin).map_err(|_| self.unbounded(origin))
    }

    /// The cell the contour moves into after crossing `x` (or, backward, the
    /// one it came from).
    fn cell_origin(x: &Crossing, direction: Direction) -> Site {
        let g = DIRS[x.dir as usize];
        let mut d = (g.1, -g.0);
        if direction == Direction::Backward {
            d = (-d.0, -d.1);
        }
        (
            x.below.0 + g.0.min(0) + d.0.min(0),
            x.below.1 + g.1.min(0) + d.1.min(0),
        )
    }

    /// Follows the arc through one cell. Returns the crossing at the other end
    /// and the site passed in between, if any.
    fn step(
        &self,
        x: Crossing,
        direction: Direction,
        cell: &Cell,
    ) -> (Crossing, Option<Site>) {
        let edge = cell.edge_of(&x);
        debug_assert_eq!(cell.is_entry(edge), direction == Direction::Forward);
        let partner = match cell.pairing(self.energy) {
            Pairing::Single => (1..4)
                .map(|k| (edge + k) % 4)
                .find(|&e| cell.has_crossing(e))
                .expect("two crossings"),
            Pairing::BelowCut => match direction {
                Direction::Forward => (edge + 1) % 4,
                Direction::Backward => (edge + 3) % 4,
            },
            Pairing::AboveCut => match direction {
                Direction::Forward => (edge + 3) % 4,
                Direction::Backward => (edge + 1) % 4,
            },
        };
        (cell.crossing_on(partner), cell.passage(self.energy))
    }

    fn advance(&self, x: Crossing, direction: Direction) -> Result<(Crossing, Option<Site>), ContourError> {
        let cell = self.cell_while_tracing(Self::cell_origin(&x, direction))?;
        Ok(self.step(x, direction, &cell))
    }

    fn touch(&self, x: &Crossing) -> Option<Site> {
        (self.h.eval_integer(x.below.0, x.below.1).ok()? == self.energy).then_some(x.below)
    }

    /// Branch structure at `site`; the site and its eight neighbours must be in
    /// the window.
    fn local(&self, site: Site) -> Result<Local, ModelError> {
        let value = self.h.eval_integer(site.0, site.1)?;
        if value != self.energy {
            return Ok(Local {
                class: SiteClass::OffContour,
                branches: Vec::new(),
            });
        }
        let mut incident = Vec::with_capacity(4);
        for origin in [
            (site.0, site.1),
            (site.0 - 1, site.1),
            (site.0 - 1, site.1 - 1),
            (site.0, site.1 - 1),
        ] {
            incident.push(self.cell(origin)?);
        }
        let find_cell = |origin: Site| incident.iter().find(|c| c.origin == origin).expect("incident");

        let mut near = Vec::with_capacity(4);
        for (dir, (dq, dp)) in DIRS.iter().enumerate() {
            let n = (site.0 + dq, site.1 + dp);
            if self.h.eval_integer(n.0, n.1)? > self.energy {
                near.push(Crossing {
                    below: site,
                    dir: dir as u8,
                });
            }
        }
        // successor of each near crossing, when it stays near the site
        let succ: Vec<Option<usize>> = near
            .iter()
            .map(|x| {
                let cell = find_cell(Self::cell_origin(x, Direction::Forward));
                let (y, _) = self.step(*x, Direction::Forward, cell);
                near.iter().position(|z| *z == y)
            })
            .collect();

        let mut branches = Vec::new();
        for (i, s) in succ.iter().enumerate() {
            if s.is_some() {
                continue;
            }
            let mut first = i;
            while let Some(j) = succ.iter().position(|&t| t == Some(first)) {
                first = j;
            }
            branches.push(Branch::Chain {
                first: near[first],
                last: near[i],
            });
        }
        let closed_loop = !near.is_empty() && branches.is_empty();

        for cell in &incident {
            if cell.passage(self.energy) == Some(site) {
                let from = (0..4).find(|&e| cell.is_entry(e)).expect("entry edge");
                let to = (0..4)
                    .find(|&e| cell.has_crossing(e) && !cell.is_entry(e))
                    .expect("exit edge");
                branches.push(Branch::Passage {
                    from: cell.crossing_on(from),
                    to: cell.crossing_on(to),
                });
            }
        }

        let class = if closed_loop || branches.is_empty() {
            SiteClass::Extremum
        } else if branches.len() == 1 {
            SiteClass::Regular
        } else {
            SiteClass::Saddle
        };
        Ok(Local { class, branches })
    }

    fn class_while_tracing(
        &self,
        site: Site,
        cache: &mut HashMap<Site, SiteClass>,
    ) -> Result<SiteClass, ContourError> {
        if let Some(c) = cache.get(&site) {
            return Ok(*c);
        }
        let c = self.local(site).map_err(|_| self.unbounded(site))?.class;
        cache.insert(site, c);
        Ok(c)
    }

    /// Walks the whole component starting just after `anchor`, reporting every
    /// touched site in order, until the walk returns to `anchor`.
    fn walk(
        &self,
        anchor: Crossing,
        direction: Direction,
        mut visit: impl FnMut(Site) -> Result<(), ContourError>,
    ) -> Result<(), ContourError> {
        let mut cursor = anchor;
        for _ in 0..self.max_steps {
            let (next, passed) = self.advance(cursor, direction)?;
            if let Some(s) = passed {
                visit(s)?;
            }
            cursor = next;
            if cursor == anchor {
                return Ok(());
            }
            if let Some(s) = self.touch(&cursor) {
                visit(s)?;
            }
        }
        Err(self.unbounded(anchor.below))
    }

    fn neighbor(&self, site: Site, direction: Direction) -> Result<Site, ContourError> {
        let local = self.local(site)?;
        if local.class != SiteClass::Regular {
            return Ok(site);
        }
        let branch = local.branches[0];
        let anchor = match direction {
            Direction::Forward => branch.forward_anchor(),
            Direction::Backward => branch.backward_anchor(),
        };
        let mut cache = HashMap::new();
        let mut found = None;
        self.walk(anchor, direction, |t| {
            if t != site && found.is_none() && self.class_while_tracing(t, &mut cache)? == SiteClass::Regular {
                found = Some(t);
            }
            Ok(())
        })?;
        Ok(found.unwrap_or(site))
    }
}

pub fn classify_site(
    h: &SeparableHamiltonian1D,
    q: i64,
    p: i64,
    energy: i64,
) -> Result<SiteClass, ContourError> {
    Ok(Tracer::new(h, energy).local((q, p))?.class)
}

/// The next lattice site on the site's own contour, in the direction of the
/// Hamiltonian flow. Saddles and extrema stand still; contours passing them
/// skip them. The whole component is traced, so a level that leaves the window
/// is reported even when the next site lies inside it.
pub fn next_site(h: &SeparableHamiltonian1D, q: i64, p: i64) -> Result<Site, ContourError> {
    let e = h.eval_integer(q, p)?;
    Tracer::new(h, e).neighbor((q, p), Direction::Forward)
}

/// Exact inverse of [`next_site`].
pub fn prev_site(h: &SeparableHamiltonian1D, q: i64, p: i64) -> Result<Site, ContourError> {
    let e = h.eval_integer(q, p)?;
    Tracer::new(h, e).neighbor((q, p), Direction::Backward)
}

pub fn enumerate_shell(h: &SeparableHamiltonian1D, energy: i64) -> Vec<Site> {
    h.enumerate_shell(energy)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TracedSite {
    pub site: Site,
    pub class: SiteClass,
}

/// One connected component of the `E + ε` level, as the cyclic sequence of
/// lattice sites it touches, starting at the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContourTrace {
    pub energy: i64,
    pub sites: Vec<TracedSite>,
    pub closed: bool,
}

impl ContourTrace {
    /// The touched sites that actually move, in orbit order.
    pub fn regular_orbit(&self) -> Vec<Site> {
        let mut out: Vec<Site> = Vec::new();
        for s in &self.sites {
            if s.class == SiteClass::Regular && !out.contains(&s.site) {
                out.push(s.site);
            }
        }
        out
    }
}

pub fn trace_component(
    h: &SeparableHamiltonian1D,
    energy: i64,
    seed: Site,
) -> Result<ContourTrace, ContourError> {
    let actual = h.eval_integer(seed.0, seed.1)?;
    if actual != energy {
        return Err(ContourError::OffShell {
            site: seed,
            energy,
            actual,
        });
    }
    let tracer = Tracer::new(h, energy);
    let local = tracer.local(seed)?;
    if local.class == SiteClass::Extremum {
        return Ok(ContourTrace {
            energy,
            sites: vec![TracedSite {
                site: seed,
                class: local.class,
            }],
            closed: true,
        });
    }
    let branch = local.branches[0];
    let anchor = branch.forward_anchor();
    let mut events = Vec::new();
    tracer.walk(anchor, Direction::Forward, |s| {
        events.push(s);
        Ok(())
    })?;
    if let Some(s) = tracer.touch(&anchor) {
        events.push(s);
    }
    // put the seed's own run first
    if let Branch::Chain { .. } = branch {
        let tail = events.iter().rev().take_while(|&&s| s == seed).count();
        events.rotate_right(tail);
    }
    events.dedup();
    if events.len() > 1 && events.first() == events.last() {
        events.pop();
    }
    let mut cache = HashMap::new();
    cache.insert(seed, local.class);
    let mut sites = Vec::with_capacity(events.len());
    for s in events {
        let class = tracer.class_while_tracing(s, &mut cache)?;
        sites.push(TracedSite { site: s, class });
    }
    Ok(ContourTrace {
        energy,
        sites,
        closed: true,
    })
}

/// A point on the traced level, `(Q + t_q, P + t_p)` with exact
/// infinitesimal parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelPoint {
    pub q: DualRational,
    pub p: DualRational,
}

/// One arc of the level inside one cell, oriented along the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSegment {
    pub cell: Site,
    pub from: LevelPoint,
    pub to: LevelPoint,
}

/// The oriented polyline of the component through `seed`, one segment per
/// cell visit, with exact crossing positions.
pub fn trace_segments(
    h: &SeparableHamiltonian1D,
    energy: i64,
    seed: Site,
) -> Result<Vec<LevelSegment>, ContourError> {
    let tracer = Tracer::new(h, energy);
    let local = tracer.local(seed)?;
    let Some(branch) = local.branches.first() else {
        return Ok(Vec::new());
    };
    let anchor = branch.forward_anchor();
    let point = |x: &Crossing| -> LevelPoint {
        let lo = h.eval_integer(x.below.0, x.below.1).expect("in window");
        let up = x.above();
        let hi = h.eval_integer(up.0, up.1).expect("in window");
        let t = (DualRational::level(energy) - DualRational::from_int(lo))
            / DualRational::from_int(hi - lo);
        let (dq, dp) = DIRS[x.dir as usize];
        LevelPoint {
            q: DualRational::from_int(x.below.0) + t * DualRational::from_int(dq),
            p: DualRational::from_int(x.below.1) + t * DualRational::from_int(dp),
        }
    };
    let mut out = Vec::new();
    let mut cursor = anchor;
    for _ in 0..tracer.max_steps {
        let origin = Tracer::cell_origin(&cursor, Direction::Forward);
        let (next, _) = tracer.advance(cursor, Direction::Forward)?;
        out.push(LevelSegment {
            cell: origin,
            from: point(&cursor),
            to: point(&next),
        });
        cursor = next;
        if cursor == anchor {
            return Ok(out);
        }
    }
    Err(tracer.unbounded(seed))
}

/// Next/previous maps for every site of one energy shell inside a region,
/// computed with one trace per component.
#[derive(Debug, Clone)]
pub struct ShellDynamics {
    pub energy: i64,
    next: HashMap<Site, Site>,
    prev: HashMap<Site, Site>,
    classes: HashMap<Site, SiteClass>,
}

impl ShellDynamics {
    pub fn build(
        h: &SeparableHamiltonian1D,
        energy: i64,
        sites: &[Site],
    ) -> Result<Self, ContourError> {
        let tracer = Tracer::new(h, energy);
        let mut classes = HashMap::new();
        let mut next = HashMap::new();
        let mut prev = HashMap::new();
        for &s in sites {
            if next.contains_key(&s) {
                continue;
            }
            let local = tracer.local(s)?;
            classes.insert(s, local.class);
            if local.class != SiteClass::Regular {
                next.insert(s, s);
                prev.insert(s, s);
                continue;
            }
            let mut orbit = vec![s];
            tracer.walk(local.branches[0].forward_anchor(), Direction::Forward, |t| {
                if !orbit.contains(&t)
                    && tracer.class_while_tracing(t, &mut classes)? == SiteClass::Regular
                {
                    orbit.push(t);
                }
                Ok(())
            })?;
            for (i, &a) in orbit.iter().enumerate() {
                let b = orbit[(i + 1) % orbit.len()];
                next.insert(a, b);
                prev.insert(b, a);
            }
        }
        Ok(Self {
            energy,
            next,
            prev,
            classes,
        })
    }

    pub fn next(&self, s: Site) -> Option<Site> {
        self.next.get(&s).copied()
    }

    pub fn prev(&self, s: Site) -> Option<Site> {
        self.prev.get(&s).copied()
    }

    pub fn class(&self, s: Site) -> Option<SiteClass> {
        self.classes.get(&s).copied()
    }
}
