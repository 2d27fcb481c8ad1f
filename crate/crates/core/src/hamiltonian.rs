//! Integer-valued separable Hamiltonians `H(Q,P) = T(P) + V(Q) + A(Q)·B(P)`
//! and their piecewise-multilinear extension to real arguments.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::{DualRational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("argument {arg} outside window [{lo}, {hi}]")]
    WindowExceeded { arg: i64, lo: i64, hi: i64 },
    #[error("empty window")]
    EmptyWindow,
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("invalid power-law family: {0}")]
    InvalidFamily(String),
    #[error("fractional coordinate {0} outside [0, 1]")]
    FractionOutOfRange(String),
}

/// An integer-valued function of one integer argument, tabulated on the
/// inclusive window `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntegerFunction1D {
    lo: i64,
    values: Vec<i64>,
}

impl IntegerFunction1D {
    pub fn new(lo: i64, values: Vec<i64>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyWindow);
        }
        Ok(Self { lo, values })
    }

    pub fn from_fn(lo: i64, hi: i64, f: impl FnMut(i64) -> i64) -> Result<Self, ModelError> {
        if hi < lo {
            return Err(ModelError::EmptyWindow);
        }
        Self::new(lo, (lo..=hi).map(f).collect())
    }

    pub fn zero(lo: i64, hi: i64) -> Result<Self, ModelError> {
        Self::from_fn(lo, hi, |_| 0)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi())
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    #[inline]
    pub fn get(&self, x: i64) -> Result<i64, ModelError> {
        if self.contains(x) {
            Ok(self.values[(x - self.lo) as usize])
        } else {
            Err(ModelError::WindowExceeded {
                arg: x,
                lo: self.lo,
                hi: self.hi(),
            })
        }
    }

    /// Linear interpolation `(1−α)F(X) + αF(X+1)`; `F(X+1)` is only read when
    /// `α ≠ 0`.
    pub fn interpolate(&self, x: i64, frac: &DualRational) -> Result<DualRational, ModelError> {
        let f0 = DualRational::from_int(self.get(x)?);
        if frac.is_zero() {
            return Ok(f0);
        }
        let f1 = DualRational::from_int(self.get(x + 1)?);
        Ok(f0 + *frac * (f1 - f0))
    }

    /// Checks `|F(X₁)−F(X₂)| < |X₁−X₂|·(|X₁|+|X₂|)` over all window pairs.
    /// Advisory only.
    pub fn validate_smoothness(&self) -> SmoothnessReport {
        let (lo, hi) = self.window();
        let mut violations = Vec::new();
        for x1 in lo..=hi {
            for x2 in (x1 + 1)..=hi {
                let lhs = (self.values[(x1 - lo) as usize] as i128
                    - self.values[(x2 - lo) as usize] as i128)
                    .abs();
                let rhs = (x1 as i128 - x2 as i128).abs() * (x1.abs() as i128 + x2.abs() as i128);
                if lhs >= rhs {
                    violations.push((x1, x2));
                }
            }
        }
        SmoothnessReport {
            pass: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmoothnessReport {
    pub pass: bool,
    pub violations: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerKind {
    /// `int(|X|^κ / 2m)`
    Kinetic { mass: Ratio<i64> },
    /// `int(λ·|X|^γ)`
    Potential { scale: Ratio<i64> },
}

/// `int(λ|X|^γ)` or `int(|X|^κ/2m)`, evaluated exactly (floor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerLawFamily {
    pub kind: PowerKind,
    pub exponent: Ratio<i64>,
}

impl PowerLawFamily {
    pub fn kinetic(kappa: Ratio<i64>, mass: Ratio<i64>) -> Result<Self, ModelError> {
        let f = Self {
            kind: PowerKind::Kinetic { mass },
            exponent: kappa,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn potential(gamma: Ratio<i64>, scale: Ratio<i64>) -> Result<Self, ModelError> {
        let f = Self {
            kind: PowerKind::Potential { scale },
            exponent: gamma,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !self.exponent.is_positive() {
            return Err(ModelError::InvalidFamily(format!(
                "exponent {} must be positive",
                self.exponent
            )));
        }
        let c = match self.kind {
            PowerKind::Kinetic { mass } => mass,
            PowerKind::Potential { scale } => scale,
        };
        if !c.is_positive() {
            return Err(ModelError::InvalidFamily(format!(
                "coefficient {c} must be positive"
            )));
        }
        Ok(())
    }

    /// Overall coefficient: `λ` or `1/(2m)`.
    pub fn coefficient(&self) -> Ratio<i64> {
        match self.kind {
            PowerKind::Kinetic { mass } => (mass * 2).recip(),
            PowerKind::Potential { scale } => scale,
        }
    }

    /// `floor(c·|x|^(a/b))`, exact.
    pub fn value(&self, x: i64) -> i64 {
        let c = self.coefficient();
        let (cn, cd) = (BigInt::from(*c.numer()), BigInt::from(*c.denom()));
        let (a, b) = (*self.exponent.numer() as u32, *self.exponent.denom() as u32);
        let ax = BigInt::from(x.unsigned_abs());
        // n ≤ c·|x|^(a/b)  ⇔  (n·cd)^b ≤ cn^b · |x|^a   (n ≥ 0)
        let rhs = cn.pow(b) * ax.pow(a);
        let fits = |n: i64| -> bool { (BigInt::from(n) * &cd).pow(b) <= rhs };
        let approx = c.to_f64().unwrap_or(0.0)
            * (x.unsigned_abs() as f64).powf(a as f64 / b as f64);
        let mut n = approx.floor().max(0.0) as i64;
        while n > 0 && !fits(n) {
            n -= 1;
        }
        while fits(n + 1) {
            n += 1;
        }
        n
    }

    pub fn materialize(&self, lo: i64, hi: i64) -> Result<IntegerFunction1D, ModelError> {
        IntegerFunction1D::from_fn(lo, hi, |x| self.value(x))
    }
}

/// A point `(q, p) = (Q + α, P + β)` with `0 ≤ α, β ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpolatedPoint {
    pub q: i64,
    pub p: i64,
    pub alpha: DualRational,
    pub beta: DualRational,
}

impl InterpolatedPoint {
    pub fn new(q: i64, p: i64, alpha: DualRational, beta: DualRational) -> Result<Self, ModelError> {
        let zero = DualRational::from_int(0);
        let one = DualRational::from_int(1);
        for f in [&alpha, &beta] {
            if *f < zero || *f > one {
                return Err(ModelError::FractionOutOfRange(f.to_string()));
            }
        }
        Ok(Self { q, p, alpha, beta })
    }

    pub fn lattice(q: i64, p: i64) -> Self {
        let zero = DualRational::from_int(0);
        Self {
            q,
            p,
            alpha: zero,
            beta: zero,
        }
    }

    pub fn from_rationals(q: Rational, p: Rational) -> Self {
        let qf = q.floor();
        let pf = p.floor();
        Self {
            q: qf.to_integer() as i64,
            p: pf.to_integer() as i64,
            alpha: DualRational::standard(q - qf),
            beta: DualRational::standard(p - pf),
        }
    }
}

/// `H(Q,P) = T(P) + V(Q) + A(Q)·B(P)`. `V` and `A` share the Q window, `T` and
/// `B` share the P window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeparableHamiltonian1D {
    t: IntegerFunction1D,
    v: IntegerFunction1D,
    a: IntegerFunction1D,
    b: IntegerFunction1D,
}

impl SeparableHamiltonian1D {
    pub fn new(
        t: IntegerFunction1D,
        v: IntegerFunction1D,
        a: IntegerFunction1D,
        b: IntegerFunction1D,
    ) -> Result<Self, ModelError> {
        if v.window() != a.window() {
            return Err(ModelError::WindowMismatch(format!(
                "V window {:?} != A window {:?}",
                v.window(),
                a.window()
            )));
        }
        if t.window() != b.window() {
            return Err(ModelError::WindowMismatch(format!(
                "T window {:?} != B window {:?}",
                t.window(),
                b.window()
            )));
        }
        Ok(Self { t, v, a, b })
    }

    /// `H = T(P) + V(Q)` with the product term disregarded.
    pub fn without_product(t: IntegerFunction1D, v: IntegerFunction1D) -> Self {
        let (qlo, qhi) = v.window();
        let (plo, phi) = t.window();
        let a = IntegerFunction1D::zero(qlo, qhi).expect("non-empty window");
        let b = IntegerFunction1D::zero(plo, phi).expect("non-empty window");
        Self { t, v, a, b }
    }

    pub fn kinetic(&self) -> &IntegerFunction1D {
        &self.t
    }

    pub fn potential(&self) -> &IntegerFunction1D {
        &self.v
    }

    pub fn a(&self) -> &IntegerFunction1D {
        &self.a
    }

    pub fn b(&self) -> &IntegerFunction1D {
        &self.b
    }

    pub fn q_window(&self) -> (i64, i64) {
        self.v.window()
    }

    pub fn p_window(&self) -> (i64, i64) {
        self.t.window()
    }

    pub fn contains(&self, q: i64, p: i64) -> bool {
        self.v.contains(q) && self.t.contains(p)
    }

    pub fn has_product_term(&self) -> bool {
        !(self.a.is_zero() || self.b.is_zero())
    }

    #[inline]
    pub fn eval_integer(&self, q: i64, p: i64) -> Result<i64, ModelError> {
        Ok(self.t.get(p)? + self.v.get(q)? + self.a.get(q)? * self.b.get(p)?)
    }

    /// Each factor is interpolated linearly in its own argument, so on a unit
    /// cell the result is the bilinear interpolation of the four corner values.
    pub fn eval_interpolated(&self, pt: &InterpolatedPoint) -> Result<DualRational, ModelError> {
        let t = self.t.interpolate(pt.p, &pt.beta)?;
        let v = self.v.interpolate(pt.q, &pt.alpha)?;
        let a = self.a.interpolate(pt.q, &pt.alpha)?;
        let b = self.b.interpolate(pt.p, &pt.beta)?;
        Ok(t + v + a * b)
    }

    /// Every lattice point of the window product with `H = E`.
    pub fn enumerate_shell(&self, energy: i64) -> Vec<(i64, i64)> {
        let (qlo, qhi) = self.q_window();
        let (plo, phi) = self.p_window();
        let mut out = Vec::new();
        for q in qlo..=qhi {
            for p in plo..=phi {
                if self.eval_integer(q, p).expect("in window") == energy {
                    out.push((q, p));
                }
            }
        }
        out
    }

    /// Gradient `(∂H/∂q, ∂H/∂p)` of the interpolated Hamiltonian at a real
    /// point, using the cell to the upper right on grid lines.
    pub fn gradient_f64(&self, q: f64, p: f64) -> Option<(f64, f64)> {
        let qi = q.floor() as i64;
        let pi = p.floor() as i64;
        let (al, be) = (q - qi as f64, p - pi as f64);
        let get = |f: &IntegerFunction1D, x: i64| f.get(x).ok().map(|v| v as f64);
        let (v0, v1) = (get(&self.v, qi)?, get(&self.v, qi + 1)?);
        let (a0, a1) = (get(&self.a, qi)?, get(&self.a, qi + 1)?);
        let (t0, t1) = (get(&self.t, pi)?, get(&self.t, pi + 1)?);
        let (b0, b1) = (get(&self.b, pi)?, get(&self.b, pi + 1)?);
        let a = a0 + al * (a1 - a0);
        let b = b0 + be * (b1 - b0);
        Some(((v1 - v0) + (a1 - a0) * b, (t1 - t0) + a * (b1 - b0)))
    }

    /// Interpolated value at a real point.
    pub fn eval_f64(&self, q: f64, p: f64) -> Option<f64> {
        let qi = q.floor() as i64;
        let pi = p.floor() as i64;
        let (al, be) = (q - qi as f64, p - pi as f64);
        let lerp = |f: &IntegerFunction1D, x: i64, w: f64| -> Option<f64> {
            let f0 = f.get(x).ok()? as f64;
            if w == 0.0 {
                return Some(f0);
            }
            Some(f0 + w * (f.get(x + 1).ok()? as f64 - f0))
        };
        Some(
            lerp(&self.t, pi, be)?
                + lerp(&self.v, qi, al)?
                + lerp(&self.a, qi, al)? * lerp(&self.b, pi, be)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use num_traits::One;

    fn abs_fn(lo: i64, hi: i64) -> IntegerFunction1D {
        IntegerFunction1D::from_fn(lo, hi, |x| x.abs()).unwrap()
    }

    fn sq_fn(lo: i64, hi: i64, c: i64) -> IntegerFunction1D {
        IntegerFunction1D::from_fn(lo, hi, |x| c * x * x).unwrap()
    }

    fn rat(n: i128, d: i128) -> DualRational {
        DualRational::standard(Rational::new(n, d))
    }

    #[test]
    fn eval_integer_examples() {
        let diamond = SeparableHamiltonian1D::without_product(abs_fn(-5, 5), abs_fn(-5, 5));
        assert_eq!(diamond.eval_integer(0, 1).unwrap(), 1);

        let ellipse = SeparableHamiltonian1D::without_product(sq_fn(-5, 5, 1), sq_fn(-5, 5, 2));
        assert_eq!(ellipse.eval_integer(0, -1).unwrap(), 1);

        let qp = SeparableHamiltonian1D::new(
            IntegerFunction1D::zero(-5, 5).unwrap(),
            IntegerFunction1D::zero(-5, 5).unwrap(),
            IntegerFunction1D::from_fn(-5, 5, |q| q).unwrap(),
            IntegerFunction1D::from_fn(-5, 5, |p| p).unwrap(),
        )
        .unwrap();
        assert_eq!(qp.eval_integer(3, -2).unwrap(), -6);
    }

    #[test]
    fn out_of_window_is_an_error() {
        let h = SeparableHamiltonian1D::without_product(abs_fn(-2, 2), abs_fn(-2, 2));
        assert_eq!(
            h.eval_integer(3, 0),
            Err(ModelError::WindowExceeded { arg: 3, lo: -2, hi: 2 })
        );
        let pt = InterpolatedPoint::new(2, 0, rat(1, 2), rat(0, 1)).unwrap();
        assert!(h.eval_interpolated(&pt).is_err());
    }

    #[test]
    fn mismatched_windows_rejected() {
        let err = SeparableHamiltonian1D::new(
            abs_fn(-2, 2),
            abs_fn(-2, 2),
            IntegerFunction1D::zero(-3, 2).unwrap(),
            IntegerFunction1D::zero(-2, 2).unwrap(),
        );
        assert!(matches!(err, Err(ModelError::WindowMismatch(_))));
    }

    #[test]
    fn eval_interpolated_examples() {
        let diamond = SeparableHamiltonian1D::without_product(abs_fn(-5, 5), abs_fn(-5, 5));
        let pt = InterpolatedPoint::new(0, 0, rat(1, 2), rat(1, 2)).unwrap();
        assert_eq!(diamond.eval_interpolated(&pt).unwrap(), DualRational::from_int(1));

        let bowl = SeparableHamiltonian1D::without_product(sq_fn(-5, 5, 1), sq_fn(-5, 5, 1));
        let pt = InterpolatedPoint::new(1, 0, rat(1, 2), rat(0, 1)).unwrap();
        assert_eq!(bowl.eval_interpolated(&pt).unwrap(), rat(5, 2));

        let pt = InterpolatedPoint::lattice(2, 3);
        assert_eq!(bowl.eval_interpolated(&pt).unwrap(), DualRational::from_int(13));
    }

    #[test]
    fn smoothness_examples() {
        let quarter = IntegerFunction1D::from_fn(-4, 4, |q| (q * q).div_euclid(4)).unwrap();
        assert!(quarter.validate_smoothness().pass);

        let square = sq_fn(-4, 4, 1);
        let report = square.validate_smoothness();
        assert!(!report.pass);
        assert!(report.violations.contains(&(1, 2)));

        let zero = IntegerFunction1D::zero(-4, 4).unwrap();
        let report = zero.validate_smoothness();
        assert!(report.pass);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn power_law_values() {
        let one = Ratio::from_integer(1);
        let lin = PowerLawFamily::potential(one, one).unwrap();
        assert_eq!(lin.value(-7), 7);

        // int(|P|^(3/2) / 2m) with 2m = 1: 8^(3/2) = 22.627..
        let k = PowerLawFamily::kinetic(Ratio::new(3, 2), Ratio::new(1, 2)).unwrap();
        assert_eq!(k.value(8), 22);
        assert_eq!(k.value(-4), 8);

        // int(λ Q²) with λ = 1/4
        let v = PowerLawFamily::potential(Ratio::from_integer(2), Ratio::new(1, 4)).unwrap();
        assert_eq!(v.value(3), 2);
        assert_eq!(v.value(0), 0);

        assert!(PowerLawFamily::potential(Ratio::from_integer(0), one).is_err());
    }

    #[test]
    fn power_law_matches_exact_rational_for_integer_exponents() {
        let v = PowerLawFamily::potential(Ratio::from_integer(3), Ratio::new(2, 7)).unwrap();
        for x in -30i64..=30 {
            let exact = Ratio::new(2 * x.abs().pow(3), 7).floor().to_integer();
            assert_eq!(v.value(x), exact);
        }
    }

    proptest! {
        #[test]
        fn power_law_monotone_in_abs(num in 1i64..9, den in 1i64..5, sn in 1i64..9, sd in 1i64..9) {
            let f = PowerLawFamily::potential(Ratio::new(num, den), Ratio::new(sn, sd)).unwrap();
            let mut prev = f.value(0);
            for x in 1..60 {
                let cur = f.value(x);
                prop_assert!(cur >= prev);
                prop_assert_eq!(cur, f.value(-x));
                prev = cur;
            }
        }

        #[test]
        fn interpolation_is_bilinear_in_cell(
            tv in proptest::collection::vec(-20i64..20, 4),
            vv in proptest::collection::vec(-20i64..20, 4),
            av in proptest::collection::vec(-3i64..3, 4),
            bv in proptest::collection::vec(-3i64..3, 4),
            cell_q in -2i64..1, cell_p in -2i64..1,
            an in 0i128..=16, bn in 0i128..=16,
        ) {
            let h = SeparableHamiltonian1D::new(
                IntegerFunction1D::new(-2, tv).unwrap(),
                IntegerFunction1D::new(-2, vv).unwrap(),
                IntegerFunction1D::new(-2, av).unwrap(),
                IntegerFunction1D::new(-2, bv).unwrap(),
            ).unwrap();
            let (al, be) = (Rational::new(an, 16), Rational::new(bn, 16));
            let pt = InterpolatedPoint::new(cell_q, cell_p, al.into(), be.into()).unwrap();
            let got = h.eval_interpolated(&pt).unwrap();
            let c = |dq, dp| Rational::from_integer(h.eval_integer(cell_q + dq, cell_p + dp).unwrap() as i128);
            let one = Rational::one();
            let expected = c(0, 0) * (one - al) * (one - be)
                + c(1, 0) * al * (one - be)
                + c(0, 1) * (one - al) * be
                + c(1, 1) * al * be;
            prop_assert_eq!(got, DualRational::standard(expected));
        }

        #[test]
        fn interpolation_continuous_at_cell_boundaries(
            tv in proptest::collection::vec(-20i64..20, 5),
            vv in proptest::collection::vec(-20i64..20, 5),
            q in -2i64..1, p in -2i64..1, bn in 0i128..=8,
        ) {
            let h = SeparableHamiltonian1D::without_product(
                IntegerFunction1D::new(-2, tv).unwrap(),
                IntegerFunction1D::new(-2, vv).unwrap(),
            );
            let be: DualRational = Rational::new(bn, 8).into();
            // (Q, α=1) and (Q+1, α=0) name the same real point
            let left = InterpolatedPoint::new(q, p, DualRational::from_int(1), be).unwrap();
            let right = InterpolatedPoint::new(q + 1, p, DualRational::from_int(0), be).unwrap();
            prop_assert_eq!(h.eval_interpolated(&left).unwrap(), h.eval_interpolated(&right).unwrap());
        }
    }
}
