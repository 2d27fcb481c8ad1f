//! JSON model descriptions.
//!
//! Rationals are written as integers (`2`) or strings (`"1/2"`, `"3"`).
//!
//! ```json
//! {"kind": "separable", "q_window": [-20, 20], "p_window": [-20, 20],
//!  "t": {"potential": {"gamma": 1, "scale": 1}},
//!  "v": {"polynomial": [0, 0, 2]}}
//! ```

use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::evolver::VectorHamiltonian;
use crate::field::{FieldError, FieldHamiltonianSpec, FieldSystem, LatticeShape};
use crate::hamiltonian::{IntegerFunction1D, ModelError, PowerLawFamily, SeparableHamiltonian1D};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelSpecError {
    #[error("bad rational {0:?}")]
    BadRational(String),
    #[error("table starting at {lo} with {len} entries does not cover window {window:?}")]
    TableWindow {
        lo: i64,
        len: usize,
        window: (i64, i64),
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A rational read from an integer or a `"n/d"` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub struct RationalValue(pub Ratio<i64>);

impl From<RationalValue> for String {
    fn from(r: RationalValue) -> Self {
        r.0.to_string()
    }
}

impl FromStr for RationalValue {
    type Err = ModelSpecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelSpecError::BadRational(s.to_string());
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1i64),
        };
        if d == 0 {
            return Err(bad());
        }
        Ok(Self(Ratio::new(n, d)))
    }
}

impl<'de> Deserialize<'de> for RationalValue {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(i) => Ok(Self(Ratio::from_integer(i))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// An integer function of one integer argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// Explicit values starting at `lo`.
    Table { lo: i64, values: Vec<i64> },
    /// `c₀ + c₁x + c₂x² + ⋯`
    Polynomial(Vec<i64>),
    /// `⌊|x|^κ / 2m⌋`
    Kinetic { kappa: RationalValue, mass: RationalValue },
    /// `⌊λ|x|^γ⌋`
    Potential { gamma: RationalValue, scale: RationalValue },
}

impl FunctionSpec {
    pub fn tabulate(&self, (lo, hi): (i64, i64)) -> Result<IntegerFunction1D, ModelSpecError> {
        match self {
            FunctionSpec::Table { lo: tlo, values } => {
                let table = IntegerFunction1D::new(*tlo, values.clone())?;
                if !table.contains(lo) || !table.contains(hi) {
                    return Err(ModelSpecError::TableWindow {
                        lo: *tlo,
                        len: values.len(),
                        window: (lo, hi),
                    });
                }
                Ok(IntegerFunction1D::from_fn(lo, hi, |x| table.get(x).expect("covered"))?)
            }
            FunctionSpec::Polynomial(c) => Ok(IntegerFunction1D::from_fn(lo, hi, |x| {
                c.iter().rev().fold(0, |acc, &ci| acc * x + ci)
            })?),
            FunctionSpec::Kinetic { kappa, mass } => {
                Ok(PowerLawFamily::kinetic(kappa.0, mass.0)?.materialize(lo, hi)?)
            }
            FunctionSpec::Potential { gamma, scale } => {
                Ok(PowerLawFamily::potential(gamma.0, scale.0)?.materialize(lo, hi)?)
            }
        }
    }

    pub fn power_family(&self) -> Option<PowerLawFamily> {
        match self {
            FunctionSpec::Kinetic { kappa, mass } => PowerLawFamily::kinetic(kappa.0, mass.0).ok(),
            FunctionSpec::Potential { gamma, scale } => {
                PowerLawFamily::potential(gamma.0, scale.0).ok()
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// One pair, `H = T(P) + V(Q) + A(Q)·B(P)`.
    Separable {
        q_window: (i64, i64),
        p_window: (i64, i64),
        t: FunctionSpec,
        v: FunctionSpec,
        #[serde(default)]
        a: Option<FunctionSpec>,
        #[serde(default)]
        b: Option<FunctionSpec>,
    },
    /// `n` pairs, `H = Σ T(P_i) + Σ V(Q_i) + g·Σ (Q_{i+1} − Q_i)²` on an open
    /// chain.
    Chain {
        pairs: usize,
        q_window: (i64, i64),
        p_window: (i64, i64),
        t: FunctionSpec,
        v: FunctionSpec,
        #[serde(default)]
        coupling: i64,
    },
    Field {
        sizes: Vec<usize>,
        #[serde(default = "one")]
        components: usize,
        masses: Vec<RationalValue>,
        rho: RationalValue,
        field_windows: Vec<(i64, i64)>,
    },
}

fn one() -> usize {
    1
}

pub enum BuiltModel {
    Separable(SeparableHamiltonian1D),
    Chain(VectorHamiltonian),
    Field(FieldSystem),
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel, ModelSpecError> {
        match self {
            ModelSpec::Separable {
                q_window,
                p_window,
                t,
                v,
                a,
                b,
            } => {
                let t = t.tabulate(*p_window)?;
                let v = v.tabulate(*q_window)?;
                let h = match (a, b) {
                    (Some(a), Some(b)) => {
                        SeparableHamiltonian1D::new(t, v, a.tabulate(*q_window)?, b.tabulate(*p_window)?)?
                    }
                    _ => SeparableHamiltonian1D::without_product(t, v),
                };
                Ok(BuiltModel::Separable(h))
            }
            ModelSpec::Chain {
                pairs,
                q_window,
                p_window,
                t,
                v,
                coupling,
            } => {
                let t = t.tabulate(*p_window)?;
                let v = v.tabulate(*q_window)?;
                let g = *coupling;
                let h = VectorHamiltonian::new(
                    *pairs,
                    *q_window,
                    *p_window,
                    move |p| p.iter().map(|&x| t.get(x).expect("window checked")).sum(),
                    move |q| {
                        let on_site: i64 = q.iter().map(|&x| v.get(x).expect("window checked")).sum();
                        let bonds: i64 = q.windows(2).map(|w| (w[1] - w[0]).pow(2)).sum();
                        on_site + g * bonds
                    },
                );
                Ok(BuiltModel::Chain(h))
            }
            ModelSpec::Field {
                sizes,
                components,
                masses,
                rho,
                field_windows,
            } => {
                let shape = LatticeShape::new(sizes.clone())?;
                let spec = FieldHamiltonianSpec {
                    components: *components,
                    masses: masses.iter().map(|m| m.0).collect(),
                    rho: rho.0,
                    field_windows: field_windows.clone(),
                };
                Ok(BuiltModel::Field(FieldSystem::new(shape, spec)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_from_ints_and_strings() {
        let v: Vec<RationalValue> = serde_json::from_str(r#"[2, "1/2", " -3 / 4 ", "5"]"#).unwrap();
        let want = [Ratio::from_integer(2), Ratio::new(1, 2), Ratio::new(-3, 4), Ratio::from_integer(5)];
        assert_eq!(v.iter().map(|r| r.0).collect::<Vec<_>>(), want);
        assert!(serde_json::from_str::<RationalValue>(r#""1/0""#).is_err());
        assert!(serde_json::from_str::<RationalValue>(r#""x""#).is_err());
    }

    #[test]
    fn separable_model_builds() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"kind": "separable", "q_window": [-3, 3], "p_window": [-4, 4],
                "t": {"kinetic": {"kappa": 2, "mass": "1/2"}},
                "v": {"polynomial": [1, 0, 2]}}"#,
        )
        .unwrap();
        let BuiltModel::Separable(h) = spec.build().unwrap() else {
            panic!("wrong model kind")
        };
        assert_eq!(h.eval_integer(2, 3).unwrap(), 9 + 9);
        assert_eq!(h.p_window(), (-4, 4));
    }

    #[test]
    fn table_must_cover_window() {
        let f = FunctionSpec::Table {
            lo: -1,
            values: vec![1, 0, 1],
        };
        assert!(f.tabulate((-1, 1)).is_ok());
        assert!(matches!(f.tabulate((-2, 1)), Err(ModelSpecError::TableWindow { .. })));
    }

    #[test]
    fn field_model_validates() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"kind": "field", "sizes": [16], "masses": [0], "rho": 1, "field_windows": [[-9, 9]]}"#,
        )
        .unwrap();
        assert!(matches!(spec.build(), Ok(BuiltModel::Field(_))));
        let spec: ModelSpec = serde_json::from_str(
            r#"{"kind": "field", "sizes": [4, 4], "masses": [0], "rho": 1, "field_windows": [[-9, 9]]}"#,
        )
        .unwrap();
        assert!(matches!(spec.build(), Err(ModelSpecError::Field(FieldError::InvalidSpec(_)))));
    }

    #[test]
    fn chain_model_energy() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"kind": "chain", "pairs": 3, "q_window": [-9, 9], "p_window": [-9, 9],
                "t": {"potential": {"gamma": 1, "scale": 1}}, "v": {"polynomial": [0, 0, 1]},
                "coupling": 2}"#,
        )
        .unwrap();
        let BuiltModel::Chain(h) = spec.build().unwrap() else {
            panic!("wrong model kind")
        };
        use crate::evolver::{PhaseState, RestrictedHamiltonianProvider};
        let s = PhaseState::new(vec![1, 0, -1], vec![2, 0, 1]);
        assert_eq!(h.total_energy(&s).unwrap(), 3 + 2 + 2 * 2);
    }
}
