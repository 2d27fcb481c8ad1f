//! Second-order reversible baseline: `Φ(t+1) = Φ(t−1) + F(Φ(t))`.
//!
//! Exactly invertible for any integer rule `F`, but with no conserved
//! energy in general. Arithmetic wraps modulo 2⁶⁴, which keeps the map
//! bijective even when the field grows without bound.

use serde::{Deserialize, Serialize};

use crate::field::{FieldState, FieldSystem, LatticeShape};

/// Two consecutive time layers of a single-component field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MargolusState {
    pub prev: Vec<i64>,
    pub cur: Vec<i64>,
    pub t: i64,
}

impl MargolusState {
    pub fn new(prev: Vec<i64>, cur: Vec<i64>) -> Self {
        assert_eq!(prev.len(), cur.len());
        Self { prev, cur, t: 0 }
    }

    /// Field `Φ = cur` with momentum `P = cur − prev`.
    pub fn as_field_state(&self) -> FieldState {
        let p = self.cur.iter().zip(&self.prev).map(|(c, p)| c - p).collect();
        let mut s = FieldState::new(self.cur.clone(), p);
        s.t = self.t;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MargolusRule {
    Zero,
    /// `c · Σ_a (Φ(x+e_a) + Φ(x−e_a) − 2Φ(x))`
    Laplacian { coupling: i64 },
}

impl MargolusRule {
    pub fn apply(&self, shape: &LatticeShape, phi: &[i64], x: usize) -> i64 {
        match *self {
            MargolusRule::Zero => 0,
            MargolusRule::Laplacian { coupling } => {
                let lap: i64 = (0..shape.dim())
                    .map(|a| {
                        phi[shape.forward(x, a)]
                            .wrapping_add(phi[shape.backward(x, a)])
                            .wrapping_sub(phi[x].wrapping_mul(2))
                    })
                    .fold(0, i64::wrapping_add);
                coupling.wrapping_mul(lap)
            }
        }
    }
}

pub fn margolus_step(state: &MargolusState, shape: &LatticeShape, rule: &MargolusRule) -> MargolusState {
    let next = (0..state.cur.len())
        .map(|x| state.prev[x].wrapping_add(rule.apply(shape, &state.cur, x)))
        .collect();
    MargolusState {
        prev: state.cur.clone(),
        cur: next,
        t: state.t + 1,
    }
}

pub fn margolus_unstep(state: &MargolusState, shape: &LatticeShape, rule: &MargolusRule) -> MargolusState {
    let earlier = (0..state.cur.len())
        .map(|x| state.cur[x].wrapping_sub(rule.apply(shape, &state.prev, x)))
        .collect();
    MargolusState {
        prev: earlier,
        cur: state.prev.clone(),
        t: state.t - 1,
    }
}

/// Largest entry magnitude for which [`margolus_energy`] is evaluated.
pub const ENERGY_RANGE: i64 = 1 << 24;

/// Field energy of the state read as `(Φ, P) = (cur, cur − prev)`; `None`
/// once any entry leaves `±ENERGY_RANGE`.
pub fn margolus_energy(state: &MargolusState, system: &FieldSystem) -> Option<i64> {
    let small = |v: &i64| v.abs() <= ENERGY_RANGE;
    if !(state.prev.iter().all(small) && state.cur.iter().all(small)) {
        return None;
    }
    Some(system.total_energy(&state.as_field_state()))
}

/// First state, in lexicographic order over `values^(2N)`, whose energy
/// changes under one step. Returns the state and the energies before and
/// after.
pub fn find_non_conserving(
    system: &FieldSystem,
    rule: &MargolusRule,
    values: &[i64],
) -> Option<(MargolusState, i64, i64)> {
    let n = system.shape().volume();
    let base = values.len();
    let total = base.checked_pow(2 * n as u32)?;
    (0..total).find_map(|mut code| {
        let mut digits = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            digits.push(values[code % base]);
            code /= base;
        }
        let state = MargolusState::new(digits[..n].to_vec(), digits[n..].to_vec());
        let before = margolus_energy(&state, system)?;
        let after = margolus_energy(&margolus_step(&state, system.shape(), rule), system)?;
        (before != after).then_some((state, before, after))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldHamiltonianSpec;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn system(n: usize) -> FieldSystem {
        FieldSystem::new(
            LatticeShape::new(vec![n]).unwrap(),
            FieldHamiltonianSpec::massless(Ratio::from_integer(1), 100),
        )
        .unwrap()
    }

    #[test]
    fn zero_rule_has_period_two() {
        let shape = LatticeShape::new(vec![4]).unwrap();
        let s = MargolusState::new(vec![1, 2, 3, 4], vec![-1, 0, 5, 2]);
        let s1 = margolus_step(&s, &shape, &MargolusRule::Zero);
        assert_eq!(s1.cur, s.prev);
        let s2 = margolus_step(&s1, &shape, &MargolusRule::Zero);
        assert_eq!((s2.prev, s2.cur), (s.prev, s.cur));
    }

    #[test]
    fn laplacian_rule_by_hand() {
        let shape = LatticeShape::new(vec![4]).unwrap();
        let s = MargolusState::new(vec![0; 4], vec![0, 1, 0, 0]);
        let s1 = margolus_step(&s, &shape, &MargolusRule::Laplacian { coupling: 1 });
        assert_eq!(s1.cur, vec![1, -2, 1, 0]);
    }

    #[test]
    fn search_finds_energy_change() {
        let sys = system(4);
        let rule = MargolusRule::Laplacian { coupling: 1 };
        let (s, before, after) = find_non_conserving(&sys, &rule, &[-1, 0, 1]).unwrap();
        assert_eq!(s, MargolusState::new(vec![1, -1, -1, -1], vec![-1; 4]));
        assert_eq!((before, after), (2, 6));
        let shape = sys.shape();
        assert_eq!(margolus_energy(&margolus_step(&s, shape, &rule), &sys), Some(6));
    }

    proptest! {
        #[test]
        fn unstep_inverts_step(
            prev in prop::collection::vec(-50i64..50, 6),
            cur in prop::collection::vec(-50i64..50, 6),
            c in -3i64..=3,
            steps in 1usize..30,
        ) {
            let shape = LatticeShape::new(vec![6]).unwrap();
            let rule = MargolusRule::Laplacian { coupling: c };
            let start = MargolusState::new(prev, cur);
            let mut s = start.clone();
            for _ in 0..steps {
                s = margolus_step(&s, &shape, &rule);
            }
            for _ in 0..steps {
                s = margolus_unstep(&s, &shape, &rule);
            }
            prop_assert_eq!(s, start);
        }
    }
}
