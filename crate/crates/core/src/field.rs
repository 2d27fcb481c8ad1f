//! Integer field automaton on a periodic `D`-dimensional lattice.
//!
//! Each site `x` carries `K` field components `Φ_k(x)` and momenta `P_k(x)`.
//! The energy density is
//!
//! ```text
//! ℋ(x) = ⌊ρ/2 · Σ_k (Σ_a (Φ_k(x+e_a) − Φ_k(x))² + m_k² Φ_k(x)²)⌋ + ⌊ρ/2 · Σ_k P_k(x)²⌋
//! ```
//!
//! and a step updates every `(x, k)` pair with the contour map of its
//! restricted one-pair Hamiltonian, even sites first, then odd sites.
//!
//! Storage is site-major: pair `(x, k)` lives at index `x·K + k`.

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{next_site, prev_site, ContourError};
use crate::evolver::{PhaseState, RestrictedHamiltonianProvider};
use crate::hamiltonian::{IntegerFunction1D, ModelError, SeparableHamiltonian1D};

type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("invalid lattice: {0}")]
    InvalidShape(String),
    #[error("invalid field parameters: {0}")]
    InvalidSpec(String),
    #[error("state does not match the system: {0}")]
    StateMismatch(String),
    #[error("site {site}, component {component}: {source}")]
    Contour {
        site: usize,
        component: usize,
        #[source]
        source: ContourError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Periodic lattice with even extent along every axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LatticeShape {
    sizes: Vec<usize>,
    #[serde(skip)]
    forward: Vec<usize>,
    #[serde(skip)]
    backward: Vec<usize>,
}

impl TryFrom<Vec<usize>> for LatticeShape {
    type Error = FieldError;
    fn try_from(sizes: Vec<usize>) -> Result<Self, FieldError> {
        Self::new(sizes)
    }
}

impl From<LatticeShape> for Vec<usize> {
    fn from(s: LatticeShape) -> Self {
        s.sizes
    }
}

impl LatticeShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self, FieldError> {
        if sizes.is_empty() {
            return Err(FieldError::InvalidShape("dimension must be positive".into()));
        }
        if let Some(s) = sizes.iter().find(|&&s| s == 0 || s % 2 != 0) {
            return Err(FieldError::InvalidShape(format!(
                "extent {s} is not a positive even integer"
            )));
        }
        let mut shape = Self {
            sizes,
            forward: Vec::new(),
            backward: Vec::new(),
        };
        let (n, d) = (shape.volume(), shape.dim());
        shape.forward = vec![0; n * d];
        shape.backward = vec![0; n * d];
        for x in 0..n {
            let c = shape.coords(x);
            for a in 0..d {
                let mut up = c.clone();
                up[a] = (c[a] + 1) % shape.sizes[a];
                let mut down = c.clone();
                down[a] = (c[a] + shape.sizes[a] - 1) % shape.sizes[a];
                shape.forward[x * d + a] = shape.index(&up);
                shape.backward[x * d + a] = shape.index(&down);
            }
        }
        Ok(shape)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn volume(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Row-major coordinates, first axis slowest.
    pub fn coords(&self, mut x: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            c[a] = x % self.sizes[a];
            x /= self.sizes[a];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&c, &s)| acc * s + c % s)
    }

    /// `x + e_a`
    #[inline]
    pub fn forward(&self, x: usize, a: usize) -> usize {
        self.forward[x * self.dim() + a]
    }

    /// `x − e_a`
    #[inline]
    pub fn backward(&self, x: usize, a: usize) -> usize {
        self.backward[x * self.dim() + a]
    }

    pub fn parity(&self, x: usize) -> Parity {
        if self.coords(x).iter().sum::<usize>() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sites_of(&self, parity: Parity) -> Vec<usize> {
        (0..self.volume())
            .filter(|&x| self.parity(x) == parity)
            .collect()
    }

    /// Periodic L1 distance.
    pub fn distance(&self, x: usize, y: usize) -> usize {
        self.coords(x)
            .iter()
            .zip(self.coords(y))
            .zip(&self.sizes)
            .map(|((&a, b), &s)| {
                let d = a.abs_diff(b);
                d.min(s - d)
            })
            .sum()
    }

    /// The site reached from `x` by adding `shift` (mod the extents).
    pub fn translate(&self, x: usize, shift: &[i64]) -> usize {
        let c: Vec<usize> = self
            .coords(x)
            .iter()
            .zip(shift)
            .zip(&self.sizes)
            .map(|((&c, &d), &s)| (c as i64 + d).rem_euclid(s as i64) as usize)
            .collect();
        self.index(&c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldHamiltonianSpec {
    pub components: usize,
    pub masses: Vec<Ratio<i64>>,
    pub rho: Ratio<i64>,
    /// Inclusive `Φ_k` window per component.
    pub field_windows: Vec<(i64, i64)>,
}

impl FieldHamiltonianSpec {
    /// Massless single component with a symmetric field window.
    pub fn massless(rho: Ratio<i64>, field_bound: i64) -> Self {
        Self {
            components: 1,
            masses: vec![Ratio::zero()],
            rho,
            field_windows: vec![(-field_bound, field_bound)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldState {
    pub phi: Vec<i64>,
    pub p: Vec<i64>,
    pub t: i64,
}

impl FieldState {
    pub fn new(phi: Vec<i64>, p: Vec<i64>) -> Self {
        Self { phi, p, t: 0 }
    }

    pub fn same_point(&self, other: &Self) -> bool {
        self.phi == other.phi && self.p == other.p
    }
}

/// Sites whose field or momentum differs between two states.
pub fn changed_sites(a: &FieldState, b: &FieldState, components: usize) -> Vec<usize> {
    let n = a.phi.len() / components;
    (0..n)
        .filter(|&x| {
            let r = x * components..(x + 1) * components;
            a.phi[r.clone()] != b.phi[r.clone()] || a.p[r.clone()] != b.p[r]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSystem {
    shape: LatticeShape,
    spec: FieldHamiltonianSpec,
    #[serde(skip)]
    half_rho: Q,
    #[serde(skip)]
    mass_sq: Vec<Q>,
}

impl FieldSystem {
    pub fn new(shape: LatticeShape, spec: FieldHamiltonianSpec) -> Result<Self, FieldError> {
        let k = spec.components;
        if k == 0 {
            return Err(FieldError::InvalidSpec("need at least one component".into()));
        }
        if spec.masses.len() != k || spec.field_windows.len() != k {
            return Err(FieldError::InvalidSpec(format!(
                "{k} components but {} masses and {} field windows",
                spec.masses.len(),
                spec.field_windows.len()
            )));
        }
        if spec.masses.iter().any(|m| m.is_negative()) {
            return Err(FieldError::InvalidSpec("masses must be non-negative".into()));
        }
        if !spec.rho.is_positive() {
            return Err(FieldError::InvalidSpec("rho must be positive".into()));
        }
        if spec.rho * shape.dim() as i64 > Ratio::from_integer(1) {
            return Err(FieldError::InvalidSpec(format!(
                "rho = {} exceeds 1/D for D = {}",
                spec.rho,
                shape.dim()
            )));
        }
        if let Some(w) = spec.field_windows.iter().find(|(lo, hi)| lo > hi) {
            return Err(FieldError::InvalidSpec(format!("empty field window {w:?}")));
        }
        let widen = |r: Ratio<i64>| Q::new(*r.numer() as i128, *r.denom() as i128);
        let half_rho = widen(spec.rho) / 2;
        let mass_sq = spec.masses.iter().map(|&m| widen(m * m)).collect();
        Ok(Self {
            shape,
            spec,
            half_rho,
            mass_sq,
        })
    }

    pub fn shape(&self) -> &LatticeShape {
        &self.shape
    }

    pub fn spec(&self) -> &FieldHamiltonianSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.spec.components
    }

    pub fn vacuum(&self) -> FieldState {
        let n = self.shape.volume() * self.components();
        FieldState::new(vec![0; n], vec![0; n])
    }

    pub fn check_state(&self, state: &FieldState) -> Result<(), FieldError> {
        let n = self.shape.volume() * self.components();
        if state.phi.len() != n || state.p.len() != n {
            return Err(FieldError::StateMismatch(format!(
                "expected {n} entries, got {} and {}",
                state.phi.len(),
                state.p.len()
            )));
        }
        for (i, &v) in state.phi.iter().enumerate() {
            let (lo, hi) = self.spec.field_windows[i % self.components()];
            if v < lo || v > hi {
                return Err(FieldError::Model(ModelError::WindowExceeded { arg: v, lo, hi }));
            }
        }
        Ok(())
    }

    fn floor_half_rho(&self, sum: Q) -> i64 {
        (self.half_rho * sum).floor().to_integer() as i64
    }

    fn potential_density(&self, phi: impl Fn(usize) -> i64, x: usize) -> i64 {
        let kk = self.components();
        let mut sum = Q::zero();
        for k in 0..kk {
            let here = phi(x * kk + k) as i128;
            let mut grad = 0i128;
            for a in 0..self.shape.dim() {
                let d = phi(self.shape.forward(x, a) * kk + k) as i128 - here;
                grad += d * d;
            }
            sum += Q::from_integer(grad) + self.mass_sq[k] * (here * here);
        }
        self.floor_half_rho(sum)
    }

    fn kinetic_density(&self, p: impl Fn(usize) -> i64, x: usize) -> i64 {
        let kk = self.components();
        let sum: i128 = (0..kk).map(|k| (p(x * kk + k) as i128).pow(2)).sum();
        self.floor_half_rho(Q::from_integer(sum))
    }

    pub fn site_energy(&self, state: &FieldState, x: usize) -> i64 {
        self.potential_density(|i| state.phi[i], x) + self.kinetic_density(|i| state.p[i], x)
    }

    pub fn total_energy(&self, state: &FieldState) -> i64 {
        (0..self.shape.volume())
            .map(|x| self.site_energy(state, x))
            .sum()
    }

    /// Momentum bound for a restricted energy `e`:
    /// `ceil(sqrt(2(e+1)/ρ)) + 2`.
    fn momentum_bound(&self, e: i64) -> i64 {
        let rho = self.spec.rho.to_f64().unwrap_or(1.0);
        (2.0 * (e.max(0) + 1) as f64 / rho).sqrt().ceil() as i64 + 2
    }

    fn restrict_with(
        &self,
        phi: impl Fn(usize) -> i64,
        p: impl Fn(usize) -> i64,
        x: usize,
        k: usize,
    ) -> Result<SeparableHamiltonian1D, ModelError> {
        let i = x * self.components() + k;
        let (lo, hi) = self.spec.field_windows[k];
        let v = IntegerFunction1D::from_fn(lo, hi, |val| {
            let with = |j: usize| if j == i { val } else { phi(j) };
            let mut e = self.potential_density(with, x);
            for a in 0..self.shape.dim() {
                e += self.potential_density(with, self.shape.backward(x, a));
            }
            e
        })?;
        let kinetic = |val: i64| self.kinetic_density(|j| if j == i { val } else { p(j) }, x);
        let current = v.get(phi(i))? + kinetic(p(i));
        let bound = self.momentum_bound(current).max(p(i).abs() + 2);
        let t = IntegerFunction1D::from_fn(-bound, bound, kinetic)?;
        Ok(SeparableHamiltonian1D::without_product(t, v))
    }

    /// The one-pair Hamiltonian of `(Φ_k(x), P_k(x))` with everything else
    /// frozen. `V` collects the potential terms of `ℋ(x)` and every
    /// `ℋ(x − e_a)`; `T` is the kinetic term of `ℋ(x)`.
    pub fn restricted_hamiltonian(
        &self,
        state: &FieldState,
        x: usize,
        k: usize,
    ) -> Result<SeparableHamiltonian1D, ModelError> {
        self.restrict_with(|j| state.phi[j], |j| state.p[j], x, k)
    }

    /// New `(Φ(x), P(x))` after updating every component of site `x`,
    /// ascending `k` forward and descending `k` backward.
    fn site_update(
        &self,
        phi: &[i64],
        p: &[i64],
        x: usize,
        forward: bool,
    ) -> Result<(Vec<i64>, Vec<i64>), FieldError> {
        let kk = self.components();
        let base = x * kk;
        let mut lphi = phi[base..base + kk].to_vec();
        let mut lp = p[base..base + kk].to_vec();
        let ks: Vec<usize> = if forward {
            (0..kk).collect()
        } else {
            (0..kk).rev().collect()
        };
        for k in ks {
            let h = {
                let fphi = |j: usize| if j / kk == x { lphi[j % kk] } else { phi[j] };
                let fp = |j: usize| if j / kk == x { lp[j % kk] } else { p[j] };
                self.restrict_with(fphi, fp, x, k)?
            };
            let moved = if forward {
                next_site(&h, lphi[k], lp[k])
            } else {
                prev_site(&h, lphi[k], lp[k])
            };
            let (q, pk) = moved.map_err(|source| FieldError::Contour {
                site: x,
                component: k,
                source,
            })?;
            lphi[k] = q;
            lp[k] = pk;
        }
        Ok((lphi, lp))
    }

    /// Updates the given sites one after another, in the order listed.
    pub fn sweep(
        &self,
        state: &FieldState,
        sites: &[usize],
        forward: bool,
    ) -> Result<FieldState, FieldError> {
        self.check_state(state)?;
        let kk = self.components();
        let mut s = state.clone();
        for &x in sites {
            let (lphi, lp) = self.site_update(&s.phi, &s.p, x, forward)?;
            s.phi[x * kk..(x + 1) * kk].copy_from_slice(&lphi);
            s.p[x * kk..(x + 1) * kk].copy_from_slice(&lp);
        }
        Ok(s)
    }

    /// Updates all sites of one parity class from the same input state on
    /// the rayon pool. Identical to [`FieldSystem::sweep`] when no floored
    /// density contains two sites of the class, which holds for `D = 1`.
    pub fn sweep_concurrent(
        &self,
        state: &FieldState,
        parity: Parity,
        forward: bool,
    ) -> Result<FieldState, FieldError> {
        self.check_state(state)?;
        let kk = self.components();
        let sites = self.shape.sites_of(parity);
        let updates: Vec<(usize, Vec<i64>, Vec<i64>)> = sites
            .par_iter()
            .map(|&x| {
                self.site_update(&state.phi, &state.p, x, forward)
                    .map(|(a, b)| (x, a, b))
            })
            .collect::<Result<_, _>>()?;
        let mut s = state.clone();
        for (x, lphi, lp) in updates {
            s.phi[x * kk..(x + 1) * kk].copy_from_slice(&lphi);
            s.p[x * kk..(x + 1) * kk].copy_from_slice(&lp);
        }
        Ok(s)
    }

    pub fn step(&self, state: &FieldState) -> Result<FieldState, FieldError> {
        let mut s = self.sweep(state, &self.shape.sites_of(Parity::Even), true)?;
        s = self.sweep(&s, &self.shape.sites_of(Parity::Odd), true)?;
        s.t += 1;
        Ok(s)
    }

    pub fn step_inverse(&self, state: &FieldState) -> Result<FieldState, FieldError> {
        let mut odd = self.shape.sites_of(Parity::Odd);
        odd.reverse();
        let mut even = self.shape.sites_of(Parity::Even);
        even.reverse();
        let mut s = self.sweep(state, &odd, false)?;
        s = self.sweep(&s, &even, false)?;
        s.t -= 1;
        Ok(s)
    }

    /// [`FieldSystem::step`] with each parity class updated concurrently.
    /// For `D > 1` two same-parity sites can appear in one floored gradient
    /// sum, so the sequential sweep is used there.
    pub fn step_concurrent(&self, state: &FieldState) -> Result<FieldState, FieldError> {
        if self.shape.dim() != 1 {
            return self.step(state);
        }
        let mut s = self.sweep_concurrent(state, Parity::Even, true)?;
        s = self.sweep_concurrent(&s, Parity::Odd, true)?;
        s.t += 1;
        Ok(s)
    }

    pub fn to_phase_state(&self, state: &FieldState) -> PhaseState {
        let mut ps = PhaseState::new(state.phi.clone(), state.p.clone());
        ps.t = state.t;
        ps
    }

    pub fn from_phase_state(&self, state: &PhaseState) -> FieldState {
        FieldState {
            phi: state.q.clone(),
            p: state.p.clone(),
            t: state.t,
        }
    }

    /// Pair indices in checkerboard order, for use with the generic evolver.
    pub fn checkerboard_order(&self) -> Vec<usize> {
        let kk = self.components();
        self.shape
            .sites_of(Parity::Even)
            .into_iter()
            .chain(self.shape.sites_of(Parity::Odd))
            .flat_map(|x| (0..kk).map(move |k| x * kk + k))
            .collect()
    }
}

impl RestrictedHamiltonianProvider for FieldSystem {
    fn pairs(&self) -> usize {
        self.shape.volume() * self.components()
    }

    fn restrict(&self, state: &PhaseState, i: usize) -> Result<SeparableHamiltonian1D, ModelError> {
        let kk = self.components();
        self.restrict_with(|j| state.q[j], |j| state.p[j], i / kk, i % kk)
    }

    fn total_energy(&self, state: &PhaseState) -> Result<i64, ModelError> {
        Ok(FieldSystem::total_energy(self, &self.from_phase_state(state)))
    }
}
