//! Shell census for power-law Hamiltonians `T = ⌊|P|^κ/2m⌋`, `V = ⌊λ|Q|^γ⌋`:
//! lattice sites per energy `n(E)` against the continuum period `τ(E)` of
//! the interpolated Hamiltonian.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hamiltonian::{ModelError, PowerKind, PowerLawFamily, SeparableHamiltonian1D};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CensusError {
    #[error("1/kappa + 1/gamma = {sum} is not above 1 (degenerate quadratic: {degenerate_quadratic})")]
    RegimeViolation {
        sum: Ratio<i64>,
        degenerate_quadratic: bool,
    },
    #[error("kinetic family must be kinetic and potential family potential")]
    FamilyKind,
    #[error("energy range is empty or negative")]
    EmptyRange,
    #[error("period integration failed at E = {energy}: {reason}")]
    Period { energy: i64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRow {
    pub energy: i64,
    pub sites: usize,
    pub period: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub rows: Vec<CensusRow>,
    pub fit_min_energy: i64,
    pub fitted_exponent: f64,
    pub fitted_prefactor: f64,
    pub predicted_exponent: f64,
    /// Least-squares `C` in `τ(E) ≈ C·n(E)`.
    pub fitted_c: f64,
    pub window: i64,
}

/// `T = ⌊|P|^κ/2m⌋`, `V = ⌊λ|Q|^γ⌋` on the square window `[−w, w]²`, with
/// `w` the smallest bound where both exceed `e_max` (plus a margin of 2).
pub fn power_law_hamiltonian(
    kinetic: &PowerLawFamily,
    potential: &PowerLawFamily,
    e_max: i64,
) -> Result<(SeparableHamiltonian1D, i64), CensusError> {
    let mut w = 1;
    while kinetic.value(w) <= e_max || potential.value(w) <= e_max {
        w += 1;
    }
    w += 2;
    let t = kinetic.materialize(-w, w)?;
    let v = potential.materialize(-w, w)?;
    Ok((SeparableHamiltonian1D::without_product(t, v), w))
}

pub fn check_regime(kinetic: &PowerLawFamily, potential: &PowerLawFamily) -> Result<(), CensusError> {
    if !matches!(kinetic.kind, PowerKind::Kinetic { .. })
        || !matches!(potential.kind, PowerKind::Potential { .. })
    {
        return Err(CensusError::FamilyKind);
    }
    let sum = kinetic.exponent.recip() + potential.exponent.recip();
    if sum <= Ratio::from_integer(1) {
        let two = Ratio::from_integer(2);
        return Err(CensusError::RegimeViolation {
            sum,
            degenerate_quadratic: kinetic.exponent == two && potential.exponent == two,
        });
    }
    Ok(())
}

/// Site counts `n(E)` for `E` in `0..=e_max` from one pass over the window.
pub fn shell_histogram(h: &SeparableHamiltonian1D, e_max: i64) -> Vec<usize> {
    let mut counts = vec![0usize; e_max.max(0) as usize + 1];
    let (qlo, qhi) = h.q_window();
    let (plo, phi) = h.p_window();
    for q in qlo..=qhi {
        for p in plo..=phi {
            let e = h.eval_integer(q, p).expect("in window");
            if (0..=e_max).contains(&e) {
                counts[e as usize] += 1;
            }
        }
    }
    counts
}

type Vec2 = (f64, f64);

fn flow(h: &SeparableHamiltonian1D, (q, p): Vec2) -> Option<Vec2> {
    let (hq, hp) = h.gradient_f64(q, p)?;
    Some((hp, -hq))
}

fn rk4(h: &SeparableHamiltonian1D, y: Vec2, dt: f64) -> Option<Vec2> {
    let add = |a: Vec2, b: Vec2, s: f64| (a.0 + s * b.0, a.1 + s * b.1);
    let k1 = flow(h, y)?;
    let k2 = flow(h, add(y, k1, dt / 2.0))?;
    let k3 = flow(h, add(y, k2, dt / 2.0))?;
    let k4 = flow(h, add(y, k3, dt))?;
    Some((
        y.0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ))
}

/// Period of the orbit of `dq/dt = ∂H/∂p`, `dp/dt = −∂H/∂q` through
/// `(0, p₀)`, `p₀ > 0`, `H(0, p₀) = E`. Adaptive RK4 with step doubling.
pub fn continuum_period(h: &SeparableHamiltonian1D, energy: i64) -> Result<f64, String> {
    let target = energy as f64;
    let (_, p_hi) = h.p_window();
    let at = |p: f64| h.eval_f64(0.0, p).ok_or("outside window");
    let (mut lo, mut hi) = (0.0, p_hi as f64 - 1.0);
    if at(lo)? > target || at(hi)? < target {
        return Err("no positive momentum on the level at q = 0".into());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = (0.0, 0.5 * (lo + hi));
    let (tol, min_dt) = (1e-10, 1e-12);
    let mut dt = 1e-3;
    let mut t = 0.0;
    let mut left = false;
    for _ in 0..50_000_000u64 {
        let full = rk4(h, y, dt).ok_or("orbit left the window")?;
        let half = rk4(h, y, dt / 2.0).and_then(|m| rk4(h, m, dt / 2.0));
        let half = half.ok_or("orbit left the window")?;
        let err = (full.0 - half.0).abs().max((full.1 - half.1).abs());
        if err > tol && dt > min_dt {
            dt = (dt / 2.0).max(min_dt);
            continue;
        }
        if left && y.0 < 0.0 && half.0 >= 0.0 && half.1 > 0.0 {
            let frac = -y.0 / (half.0 - y.0);
            return Ok(t + frac * dt);
        }
        left |= half.0 < 0.0;
        y = half;
        t += dt;
        if err < tol / 64.0 {
            dt = (dt * 2.0).min(0.5);
        }
    }
    Err("step budget exhausted".into())
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Census over `energies`; the log-log fit uses rows with `E ≥ fit_min`.
pub fn census(
    kinetic: &PowerLawFamily,
    potential: &PowerLawFamily,
    energies: &[i64],
    fit_min: i64,
) -> Result<CensusReport, CensusError> {
    check_regime(kinetic, potential)?;
    let e_max = *energies.iter().max().ok_or(CensusError::EmptyRange)?;
    if energies.iter().any(|&e| e < 0) {
        return Err(CensusError::EmptyRange);
    }
    let (h, window) = power_law_hamiltonian(kinetic, potential, e_max)?;
    let counts = shell_histogram(&h, e_max);
    let rows: Vec<CensusRow> = energies
        .par_iter()
        .map(|&e| {
            let period = continuum_period(&h, e)
                .map_err(|reason| CensusError::Period { energy: e, reason })?;
            let sites = counts[e as usize];
            Ok(CensusRow {
                energy: e,
                sites,
                period,
                ratio: period / sites as f64,
            })
        })
        .collect::<Result<_, CensusError>>()?;
    let fit: Vec<&CensusRow> = rows
        .iter()
        .filter(|r| r.energy >= fit_min && r.energy > 0 && r.sites > 0)
        .collect();
    let xs: Vec<f64> = fit.iter().map(|r| (r.energy as f64).ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|r| (r.sites as f64).ln()).collect();
    let (fitted_exponent, intercept) = least_squares(&xs, &ys);
    let tn: f64 = rows.iter().map(|r| r.period * r.sites as f64).sum();
    let nn: f64 = rows.iter().map(|r| (r.sites as f64).powi(2)).sum();
    let predicted = kinetic.exponent.recip() + potential.exponent.recip() - 1;
    Ok(CensusReport {
        rows,
        fit_min_energy: fit_min,
        fitted_exponent,
        fitted_prefactor: intercept.exp(),
        predicted_exponent: predicted.to_f64().unwrap_or(f64::NAN),
        fitted_c: tn / nn,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::enumerate_shell;

    fn r(n: i64) -> Ratio<i64> {
        Ratio::from_integer(n)
    }

    fn linear_pair() -> (PowerLawFamily, PowerLawFamily) {
        (
            PowerLawFamily::kinetic(r(1), Ratio::new(1, 2)).unwrap(),
            PowerLawFamily::potential(r(1), r(1)).unwrap(),
        )
    }

    #[test]
    fn diamond_counts_are_four_e() {
        let (k, v) = linear_pair();
        let (h, _) = power_law_hamiltonian(&k, &v, 30).unwrap();
        let counts = shell_histogram(&h, 30);
        assert_eq!(counts[0], 1);
        for (e, &n) in counts.iter().enumerate().skip(1) {
            assert_eq!(n, 4 * e);
            assert_eq!(enumerate_shell(&h, e as i64).len(), n);
        }
    }

    #[test]
    fn diamond_period_matches_count() {
        let (k, v) = linear_pair();
        let (h, _) = power_law_hamiltonian(&k, &v, 12).unwrap();
        for e in [1, 5, 12] {
            let tau = continuum_period(&h, e).unwrap();
            assert!((tau - 4.0 * e as f64).abs() < 1e-6, "E={e}: {tau}");
        }
    }

    #[test]
    fn linear_census_fit() {
        let (k, v) = linear_pair();
        let energies: Vec<i64> = (10..=40).collect();
        let rep = census(&k, &v, &energies, 10).unwrap();
        assert!((rep.fitted_exponent - 1.0).abs() < 1e-9);
        assert!((rep.fitted_prefactor - 4.0).abs() < 1e-6);
        assert!((rep.fitted_c - 1.0).abs() < 1e-6);
        assert_eq!(rep.predicted_exponent, 1.0);
    }

    #[test]
    fn quadratic_potential_exponent() {
        let k = PowerLawFamily::kinetic(r(1), Ratio::new(1, 2)).unwrap();
        let v = PowerLawFamily::potential(r(2), r(1)).unwrap();
        let energies: Vec<i64> = (25..=100).step_by(5).collect();
        let rep = census(&k, &v, &energies, 10).unwrap();
        assert!((rep.fitted_exponent - 0.5).abs() < 0.1, "{}", rep.fitted_exponent);
        assert_eq!(rep.predicted_exponent, 0.5);
    }

    #[test]
    fn harmonic_regime_is_rejected() {
        let k = PowerLawFamily::kinetic(r(2), Ratio::new(1, 2)).unwrap();
        let v = PowerLawFamily::potential(r(2), r(1)).unwrap();
        assert_eq!(
            check_regime(&k, &v),
            Err(CensusError::RegimeViolation {
                sum: r(1),
                degenerate_quadratic: true
            })
        );
        let v3 = PowerLawFamily::potential(r(3), r(1)).unwrap();
        assert!(matches!(
            census(&k, &v3, &[10], 10),
            Err(CensusError::RegimeViolation {
                degenerate_quadratic: false,
                ..
            })
        ));
        assert_eq!(check_regime(&v3, &k), Err(CensusError::FamilyKind));
    }
}
