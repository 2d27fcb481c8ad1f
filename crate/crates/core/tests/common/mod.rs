//! Shared fixtures for the integration and acceptance tests: random
//! Hamiltonian generators and an independent floating-point contour tracer.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use intham::{IntegerFunction1D, SeparableHamiltonian1D, Site};
use rand::Rng;

/// Random `F` with `F(0) = 0`, `F(±1) = 0`, increments in `[−j/2, j]` for
/// `2 ≤ |j| ≤ inner` and `2|j| − 2` beyond, so that the smoothness bound
/// holds and contours stay well inside `[−window, window]`.
pub fn smooth_function(rng: &mut impl Rng, inner: i64, window: i64) -> IntegerFunction1D {
    loop {
        let mut pos = vec![0i64];
        let mut neg = vec![0i64];
        for side in [&mut pos, &mut neg] {
            for j in 1..=window {
                let d = if j == 1 {
                    0
                } else if j <= inner {
                    rng.gen_range(-(j / 2)..=j)
                } else {
                    2 * j - 2
                };
                let last = *side.last().unwrap();
                side.push(last + d);
            }
        }
        let f = IntegerFunction1D::from_fn(-window, window, |x| {
            if x >= 0 {
                pos[x as usize]
            } else {
                neg[(-x) as usize]
            }
        })
        .unwrap();
        if f.validate_smoothness().pass {
            return f;
        }
    }
}

/// Values in `{−1, 0, 1}` with `F(−1) = F(0) = F(1)`.
pub fn small_function(rng: &mut impl Rng, window: i64) -> IntegerFunction1D {
    let centre = rng.gen_range(-1..=1);
    IntegerFunction1D::from_fn(-window, window, |x| {
        if x.abs() <= 1 {
            centre
        } else {
            rng.gen_range(-1..=1)
        }
    })
    .unwrap()
}

pub fn random_hamiltonian(rng: &mut impl Rng, inner: i64, window: i64) -> SeparableHamiltonian1D {
    let t = smooth_function(rng, inner, window);
    let v = smooth_function(rng, inner, window);
    if rng.gen_bool(0.5) {
        let a = small_function(rng, window);
        let b = small_function(rng, window);
        SeparableHamiltonian1D::new(t, v, a, b).unwrap()
    } else {
        SeparableHamiltonian1D::without_product(t, v)
    }
}

pub fn all_smooth(h: &SeparableHamiltonian1D) -> bool {
    [h.kinetic(), h.potential(), h.a(), h.b()]
        .iter()
        .all(|f| f.validate_smoothness().pass)
}

/// What the floating-point tracer predicts for one on-shell site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Next(Site),
    Fixed,
    Ambiguous,
}

/// A crossing of the shifted level with a lattice edge.
#[derive(Debug, Clone, Copy)]
struct Crossing {
    /// Endpoint with `h ≤ E`.
    below: Site,
    /// Distance from `below` along the edge.
    t: f64,
}

#[derive(Debug, Clone)]
struct Cycle {
    /// Touched site per crossing, in flow order.
    touches: Vec<Option<Site>>,
    ambiguous: bool,
    closed: bool,
}

/// The level `h = E + ε` of the bilinear interpolant, traced cell by cell in
/// `f64` and oriented by the numerical gradient.
pub struct NumericLevel {
    cycles: Vec<Cycle>,
    runs: HashMap<Site, Vec<(usize, usize)>>,
    ambiguous_sites: HashSet<Site>,
}

const NEAR: f64 = 1e-5;
const BAND: f64 = 5e-3;

type EdgeKey = (i64, i64, u8);

fn edge_key(a: Site, b: Site) -> EdgeKey {
    let lo = a.min(b);
    (lo.0, lo.1, if a.1 == b.1 { 0 } else { 1 })
}

impl NumericLevel {
    pub fn trace(h: &SeparableHamiltonian1D, energy: i64, eps: f64) -> Self {
        let level = energy as f64 + eps;
        let (qlo, qhi) = h.q_window();
        let (plo, phi) = h.p_window();
        let val = |s: Site| h.eval_integer(s.0, s.1).unwrap();
        let corners = [(0, 0), (1, 0), (1, 1), (0, 1)];
        let mut crossings: HashMap<EdgeKey, Crossing> = HashMap::new();
        let mut outgoing: HashMap<EdgeKey, (EdgeKey, (i64, i64))> = HashMap::new();
        let mut degenerate_cells: HashSet<Site> = HashSet::new();
        let mut ambiguous_sites = HashSet::new();
        let mut conflict = false;
        for q in qlo..qhi {
            for p in plo..phi {
                let pts: Vec<Site> = corners.iter().map(|&(dq, dp)| (q + dq, p + dp)).collect();
                let hv: Vec<i64> = pts.iter().map(|&s| val(s)).collect();
                let c: Vec<f64> = hv.iter().map(|&v| v as f64 - level).collect();
                let above: Vec<bool> = c.iter().map(|&x| x > 0.0).collect();
                let n_above = above.iter().filter(|&&a| a).count();
                if n_above == 0 || n_above == 4 {
                    continue;
                }
                // edge k joins corner k to corner k+1
                let mut cross = [None; 4];
                for k in 0..4 {
                    let k1 = (k + 1) % 4;
                    if above[k] != above[k1] {
                        let (b, a) = if above[k] { (k1, k) } else { (k, k1) };
                        let t = -c[b] / (c[a] - c[b]);
                        let key = edge_key(pts[k], pts[k1]);
                        crossings.insert(key, Crossing { below: pts[b], t });
                        cross[k] = Some(key);
                    }
                }
                for k in 0..4 {
                    let n1 = hv[(k + 1) % 4];
                    let n3 = hv[(k + 3) % 4];
                    if hv[k] == energy && n1 == energy && n3 == energy {
                        degenerate_cells.insert((q, p));
                        ambiguous_sites.insert(pts[k]);
                    }
                }
                let mut pairs: Vec<(usize, usize)> = Vec::new();
                let edges: Vec<usize> = (0..4).filter(|&k| cross[k].is_some()).collect();
                if edges.len() == 2 {
                    pairs.push((edges[0], edges[1]));
                } else {
                    let denom = c[0] + c[2] - c[1] - c[3];
                    let saddle = (c[0] * c[2] - c[1] * c[3]) / denom;
                    // isolate the corners on the minority side of the saddle
                    let isolate_below = saddle > 0.0;
                    for (k, &up) in above.iter().enumerate() {
                        if up != isolate_below {
                            pairs.push(((k + 3) % 4, k));
                        }
                    }
                }
                for (e0, e1) in pairs {
                    let pos = |k: usize| -> (f64, f64) {
                        let key = cross[k].unwrap();
                        let x = crossings[&key];
                        let (a, b) = (pts[k], pts[(k + 1) % 4]);
                        let other = if x.below == a { b } else { a };
                        let (bx, by) = ((x.below.0 - q) as f64, (x.below.1 - p) as f64);
                        let (ox, oy) = ((other.0 - q) as f64, (other.1 - p) as f64);
                        (bx + x.t * (ox - bx), by + x.t * (oy - by))
                    };
                    let (p0, p1) = (pos(e0), pos(e1));
                    let (mx, my) = ((p0.0 + p1.0) / 2.0, (p0.1 + p1.1) / 2.0);
                    let dq = (1.0 - my) * (c[1] - c[0]) + my * (c[2] - c[3]);
                    let dp = (1.0 - mx) * (c[3] - c[0]) + mx * (c[2] - c[1]);
                    let dot = (p1.0 - p0.0) * dp - (p1.1 - p0.1) * dq;
                    if dot.abs() < 1e-12 {
                        degenerate_cells.insert((q, p));
                    }
                    let (from, to) = if dot >= 0.0 { (e0, e1) } else { (e1, e0) };
                    let (fk, tk) = (cross[from].unwrap(), cross[to].unwrap());
                    if outgoing.insert(fk, (tk, (q, p))).is_some() {
                        conflict = true;
                    }
                }
            }
        }
        let mut visited: HashSet<EdgeKey> = HashSet::new();
        let mut cycles = Vec::new();
        let mut starts: Vec<EdgeKey> = outgoing.keys().copied().collect();
        starts.sort();
        // open chains are walked from their first crossing
        let targets: HashSet<EdgeKey> = outgoing.values().map(|(t, _)| *t).collect();
        starts.sort_by_key(|k| targets.contains(k));
        for start in starts {
            if visited.contains(&start) {
                continue;
            }
            let mut touches = Vec::new();
            let mut ambiguous = conflict;
            let mut key = start;
            let closed = loop {
                visited.insert(key);
                let x = crossings[&key];
                let touch = if x.t < NEAR {
                    Some(x.below)
                } else {
                    if x.t < BAND || 1.0 - x.t < BAND {
                        ambiguous = true;
                    }
                    None
                };
                touches.push(touch);
                match outgoing.get(&key) {
                    None => break false,
                    Some(&(next, cell)) => {
                        ambiguous |= degenerate_cells.contains(&cell);
                        if next == start {
                            break true;
                        }
                        if visited.contains(&next) {
                            ambiguous = true;
                            break false;
                        }
                        key = next;
                    }
                }
            };
            cycles.push(Cycle {
                touches,
                ambiguous,
                closed,
            });
        }
        let mut runs: HashMap<Site, Vec<(usize, usize)>> = HashMap::new();
        for (ci, cyc) in cycles.iter().enumerate() {
            for (ri, site) in run_sites(cyc).into_iter().enumerate() {
                if let Some(s) = site {
                    runs.entry(s).or_default().push((ci, ri));
                }
            }
        }
        Self {
            cycles,
            runs,
            ambiguous_sites,
        }
    }

    fn is_regular(&self, s: Site) -> bool {
        self.runs.get(&s).map_or(0, Vec::len) == 1
    }

    pub fn verdict(&self, s: Site) -> Verdict {
        if self.ambiguous_sites.contains(&s) {
            return Verdict::Ambiguous;
        }
        let Some(r) = self.runs.get(&s) else {
            return Verdict::Fixed;
        };
        if r.iter().any(|&(c, _)| self.cycles[c].ambiguous || !self.cycles[c].closed) {
            return Verdict::Ambiguous;
        }
        if r.len() > 1 {
            return Verdict::Fixed;
        }
        let (ci, ri) = r[0];
        let seq = run_sites(&self.cycles[ci]);
        let n = seq.len();
        for step in 1..=n {
            if let Some(t) = seq[(ri + step) % n] {
                if self.ambiguous_sites.contains(&t) {
                    return Verdict::Ambiguous;
                }
                if t != s && self.is_regular(t) {
                    return Verdict::Next(t);
                }
            }
        }
        Verdict::Fixed
    }
}

/// Collapses consecutive equal touches into runs; for closed cycles the last
/// and first run merge when they touch the same site.
fn run_sites(cyc: &Cycle) -> Vec<Option<Site>> {
    let mut out: Vec<Option<Site>> = Vec::new();
    for &t in &cyc.touches {
        if out.last() != Some(&t) || t.is_none() {
            out.push(t);
        }
    }
    if cyc.closed && out.len() > 1 && out[0].is_some() && out.first() == out.last() {
        out.pop();
    }
    out
}

impl NumericLevel {
    pub fn debug_cycle(&self, s: Site) -> Vec<Option<Site>> {
        let (ci, _) = self.runs[&s][0];
        run_sites(&self.cycles[ci])
    }
}
