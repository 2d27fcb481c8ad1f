//! Full time steps `U = U_n ⋯ U_1` built from single-pair contour updates over
//! an explicit cyclic ordering, and the exact inverse `U⁻¹ = U_1⁻¹ ⋯ U_n⁻¹`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{next_site, prev_site, ContourError};
use crate::hamiltonian::{IntegerFunction1D, ModelError, SeparableHamiltonian1D};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<i64>,
    pub p: Vec<i64>,
    pub t: i64,
}

impl PhaseState {
    pub fn new(q: Vec<i64>, p: Vec<i64>) -> Self {
        assert_eq!(q.len(), p.len(), "Q and P must have equal length");
        Self { q, p, t: 0 }
    }

    pub fn pairs(&self) -> usize {
        self.q.len()
    }

    /// The configuration without its time stamp.
    pub fn same_point(&self, other: &Self) -> bool {
        self.q == other.q && self.p == other.p
    }
}

impl fmt::Display for PhaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} Q={:?} P={:?}", self.t, self.q, self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvolveError {
    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: ContourError,
    },
    #[error("pair {index}: {source}")]
    Restriction {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error("order is not a permutation of 0..{0}")]
    BadOrder(usize),
    #[error("state has {state} pairs, system has {system}")]
    SizeMismatch { state: usize, system: usize },
}

/// A strict cyclic order on the pair indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIndexOrder(Vec<usize>);

impl PairIndexOrder {
    pub fn new(order: Vec<usize>) -> Result<Self, EvolveError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(EvolveError::BadOrder(n));
            }
            seen[i] = true;
        }
        Ok(Self(order))
    }

    pub fn ascending(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Produces the one-pair Hamiltonian seen by pair `i` with every other pair
/// frozen. Implementations must return integer tables of the separable form.
pub trait RestrictedHamiltonianProvider {
    fn pairs(&self) -> usize;

    fn restrict(&self, state: &PhaseState, i: usize) -> Result<SeparableHamiltonian1D, ModelError>;

    fn total_energy(&self, state: &PhaseState) -> Result<i64, ModelError>;
}

fn check_size<H: RestrictedHamiltonianProvider + ?Sized>(
    state: &PhaseState,
    provider: &H,
    order: &PairIndexOrder,
) -> Result<(), EvolveError> {
    if state.pairs() != provider.pairs() || order.len() != provider.pairs() {
        return Err(EvolveError::SizeMismatch {
            state: state.pairs(),
            system: provider.pairs(),
        });
    }
    Ok(())
}

fn update<H: RestrictedHamiltonianProvider + ?Sized>(
    state: &mut PhaseState,
    provider: &H,
    i: usize,
    forward: bool,
) -> Result<(), EvolveError> {
    let h = provider
        .restrict(state, i)
        .map_err(|source| EvolveError::Restriction { index: i, source })?;
    let moved = if forward {
        next_site(&h, state.q[i], state.p[i])
    } else {
        prev_site(&h, state.q[i], state.p[i])
    };
    let (q, p) = moved.map_err(|source| EvolveError::Pair { index: i, source })?;
    state.q[i] = q;
    state.p[i] = p;
    Ok(())
}

/// A single pair update `U_i` (or `U_i⁻¹` when `forward` is false).
pub fn apply_pair<H: RestrictedHamiltonianProvider + ?Sized>(
    state: &PhaseState,
    provider: &H,
    i: usize,
    forward: bool,
) -> Result<PhaseState, EvolveError> {
    if state.pairs() != provider.pairs() {
        return Err(EvolveError::SizeMismatch {
            state: state.pairs(),
            system: provider.pairs(),
        });
    }
    let mut s = state.clone();
    update(&mut s, provider, i, forward)?;
    Ok(s)
}

/// One time step: pairs are updated in the given order, first index first.
pub fn step<H: RestrictedHamiltonianProvider + ?Sized>(
    state: &PhaseState,
    provider: &H,
    order: &PairIndexOrder,
) -> Result<PhaseState, EvolveError> {
    check_size(state, provider, order)?;
    let mut s = state.clone();
    for &i in order.as_slice() {
        update(&mut s, provider, i, true)?;
    }
    s.t += 1;
    Ok(s)
}

/// Exact inverse of [`step`] with the same order object.
pub fn step_inverse<H: RestrictedHamiltonianProvider + ?Sized>(
    state: &PhaseState,
    provider: &H,
    order: &PairIndexOrder,
) -> Result<PhaseState, EvolveError> {
    check_size(state, provider, order)?;
    let mut s = state.clone();
    for &i in order.as_slice().iter().rev() {
        update(&mut s, provider, i, false)?;
    }
    s.t -= 1;
    Ok(s)
}

pub fn total_energy<H: RestrictedHamiltonianProvider + ?Sized>(
    state: &PhaseState,
    provider: &H,
) -> Result<i64, ModelError> {
    provider.total_energy(state)
}

type VectorFn = Box<dyn Fn(&[i64]) -> i64 + Send + Sync>;

/// `H(Q⃗, P⃗) = T(P⃗) + V(Q⃗) + A(Q⃗)·B(P⃗)` with integer-valued component
/// functions and one coordinate window shared by every pair.
pub struct VectorHamiltonian {
    n: usize,
    q_window: (i64, i64),
    p_window: (i64, i64),
    t: VectorFn,
    v: VectorFn,
    a: Option<(VectorFn, VectorFn)>,
}

impl VectorHamiltonian {
    pub fn new(
        n: usize,
        q_window: (i64, i64),
        p_window: (i64, i64),
        t: impl Fn(&[i64]) -> i64 + Send + Sync + 'static,
        v: impl Fn(&[i64]) -> i64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            q_window,
            p_window,
            t: Box::new(t),
            v: Box::new(v),
            a: None,
        }
    }

    pub fn with_product(
        mut self,
        a: impl Fn(&[i64]) -> i64 + Send + Sync + 'static,
        b: impl Fn(&[i64]) -> i64 + Send + Sync + 'static,
    ) -> Self {
        self.a = Some((Box::new(a), Box::new(b)));
        self
    }

    pub fn q_window(&self) -> (i64, i64) {
        self.q_window
    }

    pub fn p_window(&self) -> (i64, i64) {
        self.p_window
    }

    fn check_window(&self, state: &PhaseState) -> Result<(), ModelError> {
        let check = |x: i64, (lo, hi): (i64, i64)| {
            if x < lo || x > hi {
                Err(ModelError::WindowExceeded { arg: x, lo, hi })
            } else {
                Ok(())
            }
        };
        for i in 0..state.pairs() {
            check(state.q[i], self.q_window)?;
            check(state.p[i], self.p_window)?;
        }
        Ok(())
    }
}

impl RestrictedHamiltonianProvider for VectorHamiltonian {
    fn pairs(&self) -> usize {
        self.n
    }

    fn restrict(&self, state: &PhaseState, i: usize) -> Result<SeparableHamiltonian1D, ModelError> {
        self.check_window(state)?;
        let (qlo, qhi) = self.q_window;
        let (plo, phi) = self.p_window;
        let mut q = state.q.clone();
        let mut p = state.p.clone();
        let along_q = |f: &VectorFn, q: &mut Vec<i64>| {
            IntegerFunction1D::from_fn(qlo, qhi, |x| {
                q[i] = x;
                f(q)
            })
        };
        let v = along_q(&self.v, &mut q)?;
        let t = IntegerFunction1D::from_fn(plo, phi, |x| {
            p[i] = x;
            (self.t)(&p)
        })?;
        match &self.a {
            None => Ok(SeparableHamiltonian1D::without_product(t, v)),
            Some((a, b)) => {
                let a = along_q(a, &mut q)?;
                let b = IntegerFunction1D::from_fn(plo, phi, |x| {
                    p[i] = x;
                    b(&p)
                })?;
                SeparableHamiltonian1D::new(t, v, a, b)
            }
        }
    }

    fn total_energy(&self, state: &PhaseState) -> Result<i64, ModelError> {
        self.check_window(state)?;
        let product = self
            .a
            .as_ref()
            .map_or(0, |(a, b)| a(&state.q) * b(&state.p));
        Ok((self.t)(&state.p) + (self.v)(&state.q) + product)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled() -> VectorHamiltonian {
        VectorHamiltonian::new(
            2,
            (-20, 20),
            (-20, 20),
            |p| p.iter().map(|x| x.abs()).sum(),
            |q| q.iter().map(|x| x.abs()).sum(),
        )
    }

    fn coupled() -> VectorHamiltonian {
        VectorHamiltonian::new(
            2,
            (-30, 30),
            (-30, 30),
            |p| p[0].abs() + p[1].abs(),
            |q| q[0].abs() + q[1].abs() + (q[0] - q[1]).abs(),
        )
    }

    #[test]
    fn order_validation() {
        assert!(PairIndexOrder::new(vec![1, 0, 2]).is_ok());
        assert_eq!(PairIndexOrder::new(vec![0, 0]), Err(EvolveError::BadOrder(2)));
        assert_eq!(PairIndexOrder::new(vec![0, 2]), Err(EvolveError::BadOrder(2)));
        assert_eq!(PairIndexOrder::ascending(3).reversed().as_slice(), &[2, 1, 0]);
    }

    #[test]
    fn decoupled_step_factorizes() {
        let h = decoupled();
        let order = PairIndexOrder::ascending(2);
        let s = PhaseState::new(vec![0, 1], vec![1, 0]);
        let next = step(&s, &h, &order).unwrap();
        assert_eq!(next.t, 1);
        // each pair follows its own diamond orbit
        let one = h.restrict(&s, 0).unwrap();
        assert_eq!(next_site(&one, 0, 1).unwrap(), (next.q[0], next.p[0]));
        assert_eq!((next.q[0], next.p[0]), (1, 0));
        assert_eq!((next.q[1], next.p[1]), (0, -1));
        assert_eq!(total_energy(&next, &h).unwrap(), total_energy(&s, &h).unwrap());
        assert_eq!(step_inverse(&next, &h, &order).unwrap(), s);
    }

    #[test]
    fn decoupled_order_is_irrelevant() {
        let h = decoupled();
        let fwd = PairIndexOrder::ascending(2);
        let rev = fwd.reversed();
        for q0 in -3..=3 {
            for p1 in -3..=3 {
                let s = PhaseState::new(vec![q0, 2], vec![1, p1]);
                assert_eq!(step(&s, &h, &fwd).unwrap(), step(&s, &h, &rev).unwrap());
            }
        }
    }

    #[test]
    fn vacuum_is_fixed() {
        let h = coupled();
        let s = PhaseState::new(vec![0, 0], vec![0, 0]);
        assert_eq!(total_energy(&s, &h).unwrap(), 0);
        let next = step(&s, &h, &PairIndexOrder::ascending(2)).unwrap();
        assert!(next.same_point(&s));
    }

    #[test]
    fn coupled_round_trip() {
        let h = coupled();
        let order = PairIndexOrder::ascending(2);
        for q0 in -3..=3 {
            for p0 in -3..=3 {
                let s = PhaseState::new(vec![q0, 1], vec![p0, -2]);
                let f = step(&s, &h, &order).unwrap();
                assert_eq!(total_energy(&f, &h).unwrap(), total_energy(&s, &h).unwrap());
                assert_eq!(step_inverse(&f, &h, &order).unwrap(), s);
                assert_eq!(step(&step_inverse(&s, &h, &order).unwrap(), &h, &order).unwrap(), s);
            }
        }
    }

    #[test]
    fn errors_carry_pair_index() {
        let h = VectorHamiltonian::new(2, (-3, 3), (-3, 3), |p| p[0].abs() + p[1].abs(), |q| q[0].abs() + q[1].abs());
        let s = PhaseState::new(vec![0, 0], vec![0, 3]);
        let err = step(&s, &h, &PairIndexOrder::ascending(2)).unwrap_err();
        assert!(matches!(err, EvolveError::Pair { index: 1, .. }), "{err}");
    }

    #[test]
    fn size_mismatch() {
        let h = decoupled();
        let s = PhaseState::new(vec![0], vec![0]);
        assert!(matches!(
            step(&s, &h, &PairIndexOrder::ascending(2)),
            Err(EvolveError::SizeMismatch { .. })
        ));
    }
}
