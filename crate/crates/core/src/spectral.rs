//! Spectral view of the one-step evolution on a finite energy shell.
//!
//! On a `k`-cycle `c_0 → c_1 → ⋯ → c_{k−1} → c_0` the Fourier mode
//! `v_m = Σ_j e^{iωj} c_j` with `ω = 2πm/k` satisfies `U v_m = e^{−iω} v_m`,
//! so every eigenphase is known exactly without a matrix eigensolver.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::Hash;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::contour::{enumerate_shell, next_site, ContourError, Site};
use crate::hamiltonian::SeparableHamiltonian1D;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("step maps shell state {index} outside the shell")]
    ShellNotClosed { index: usize },
    #[error("step is not injective on the shell (state {index} hit twice)")]
    NotBijective { index: usize },
    #[error("shell of {size} states exceeds the dense cap {cap}")]
    ShellTooLarge { size: usize, cap: usize },
    #[error("step failed on shell state {index}: {message}")]
    Step { index: usize, message: String },
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error(transparent)]
    Contour(#[from] ContourError),
}

/// One time step restricted to a shell, as a permutation with its cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShellPermutation<S> {
    pub energy: i64,
    pub basis: Vec<S>,
    /// `map[j]` is the basis index of `step(basis[j])`.
    pub map: Vec<usize>,
    /// Each cycle lists basis indices in the order visited by `step`,
    /// starting from its smallest index.
    pub cycles: Vec<Vec<usize>>,
}

impl<S> ShellPermutation<S> {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Inverse map: `inverse()[map[j]] == j`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.map.len()];
        for (j, &i) in self.map.iter().enumerate() {
            inv[i] = j;
        }
        inv
    }

    pub fn cycle_lengths(&self) -> Vec<usize> {
        self.cycles.iter().map(Vec::len).collect()
    }
}

pub fn build_shell_permutation<S, E, F>(
    energy: i64,
    shell: Vec<S>,
    mut step: F,
) -> Result<ShellPermutation<S>, SpectralError>
where
    S: Clone + Eq + Hash,
    E: std::fmt::Display,
    F: FnMut(&S) -> Result<S, E>,
{
    let index: HashMap<&S, usize> = shell.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut map = Vec::with_capacity(shell.len());
    let mut hit = vec![false; shell.len()];
    for (j, s) in shell.iter().enumerate() {
        let image = step(s).map_err(|e| SpectralError::Step {
            index: j,
            message: e.to_string(),
        })?;
        let &i = index
            .get(&image)
            .ok_or(SpectralError::ShellNotClosed { index: j })?;
        if std::mem::replace(&mut hit[i], true) {
            return Err(SpectralError::NotBijective { index: i });
        }
        map.push(i);
    }
    let mut seen = vec![false; shell.len()];
    let mut cycles = Vec::new();
    for start in 0..shell.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            cycle.push(j);
            j = map[j];
        }
        cycles.push(cycle);
    }
    Ok(ShellPermutation {
        energy,
        basis: shell,
        map,
        cycles,
    })
}

/// The shell `H = E` of a one-pair Hamiltonian under `next_site`.
pub fn pair_shell_permutation(
    h: &SeparableHamiltonian1D,
    energy: i64,
) -> Result<ShellPermutation<Site>, SpectralError> {
    let shell = enumerate_shell(h, energy);
    build_shell_permutation(energy, shell, |&(q, p)| next_site(h, q, p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub cycle: usize,
    pub k: usize,
    pub m: usize,
    pub omega: f64,
    pub h_fract: f64,
    pub h_int: i64,
    pub h_total: f64,
    /// `ω = π`, outside the open interval of `H_fract`.
    pub boundary: bool,
}

/// `H_fract` assigned to the boundary phase `ω = π`: the largest double
/// below `π`.
pub fn boundary_hfract() -> f64 {
    f64::from_bits(PI.to_bits() - 1)
}

/// `ω = 2πm/k` reduced to `(−π, π]`, with a boundary flag for `ω = π`.
pub fn reduced_phase(m: usize, k: usize) -> (f64, bool) {
    if 2 * m == k {
        (PI, true)
    } else if 2 * m > k {
        (-2.0 * PI * (k - m) as f64 / k as f64, false)
    } else {
        (2.0 * PI * m as f64 / k as f64, false)
    }
}

pub fn total_hamiltonian(h_int: i64, h_fract: f64) -> f64 {
    2.0 * PI * h_int as f64 + h_fract + PI
}

pub fn eigenphases<S>(perm: &ShellPermutation<S>) -> Vec<SpectrumEntry> {
    let mut out = Vec::with_capacity(perm.len());
    for (c, cycle) in perm.cycles.iter().enumerate() {
        let k = cycle.len();
        for m in 0..k {
            let (omega, boundary) = reduced_phase(m, k);
            let h_fract = if boundary { boundary_hfract() } else { omega };
            out.push(SpectrumEntry {
                cycle: c,
                k,
                m,
                omega,
                h_fract,
                h_int: perm.energy,
                h_total: total_hamiltonian(perm.energy, h_fract),
                boundary,
            });
        }
    }
    out
}

pub fn total_spectrum(entries: &[SpectrumEntry]) -> Vec<f64> {
    entries
        .iter()
        .map(|e| total_hamiltonian(e.h_int, e.h_fract))
        .collect()
}

/// The Fourier mode `v_m` on one cycle, as a dense vector over the basis.
pub fn cycle_mode<S>(perm: &ShellPermutation<S>, cycle: usize, m: usize) -> Vec<Complex64> {
    let c = &perm.cycles[cycle];
    let omega = 2.0 * PI * m as f64 / c.len() as f64;
    let mut v = vec![Complex64::new(0.0, 0.0); perm.len()];
    for (j, &i) in c.iter().enumerate() {
        v[i] = Complex64::from_polar(1.0, omega * j as f64);
    }
    v
}

/// Damping radius `R` and term count `N` of the truncated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationConfig {
    pub radius: f64,
    pub terms: usize,
}

impl TruncationConfig {
    pub fn new(radius: f64, terms: usize) -> Result<Self, SpectralError> {
        if !radius.is_finite() || radius < 1.0 {
            return Err(SpectralError::InvalidTruncation(format!(
                "radius {radius} must be a finite number ≥ 1"
            )));
        }
        if terms == 0 {
            return Err(SpectralError::InvalidTruncation("need at least one term".into()));
        }
        Ok(Self { radius, terms })
    }

    /// `N = ⌈50R⌉`, leaving a tail below `e^{−50}`.
    pub fn for_radius(radius: f64) -> Result<Self, SpectralError> {
        Self::new(radius, (50.0 * radius).ceil() as usize)
    }
}

/// `2 Σ_{n=1}^{N} (−1)^{n−1} sin(nω)/n`, each term optionally damped by
/// `e^{−n/R}`.
pub fn series_omega(omega: f64, terms: usize, radius: Option<f64>) -> f64 {
    let mut sum = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let damp = radius.map_or(1.0, |r| (-nf / r).exp());
        sum += sign * (nf * omega).sin() / nf * damp;
    }
    2.0 * sum
}

/// `2·atan(sin ω / (e^{1/R} + cos ω))`, the `N → ∞` limit of the damped
/// series.
pub fn damped_closed_form(omega: f64, radius: f64) -> f64 {
    2.0 * (omega.sin() / ((1.0 / radius).exp() + omega.cos())).atan()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResidual {
    pub cycle: usize,
    pub k: usize,
    pub m: usize,
    pub omega: f64,
    pub expected: f64,
    pub residual: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorCheck {
    pub modes: Vec<ModeResidual>,
    pub max_residual: f64,
}

/// Builds `H = Σ_n ((−1)^{n−1}/(n·i)) e^{−n/R} (U^{−n} − U^{n})` as a dense
/// matrix and applies it to every cycle mode. Each mode should come back
/// scaled by the damped closed form at its `ω` (by `0` at `ω = π`).
pub fn hfract_operator_check<S>(
    perm: &ShellPermutation<S>,
    cfg: &TruncationConfig,
    cap: usize,
) -> Result<OperatorCheck, SpectralError> {
    let n = perm.len();
    if n > cap {
        return Err(SpectralError::ShellTooLarge { size: n, cap });
    }
    let inv = perm.inverse();
    let zero = Complex64::new(0.0, 0.0);
    let mut h = vec![vec![zero; n]; n];
    let mut fwd: Vec<usize> = (0..n).collect();
    let mut bwd: Vec<usize> = (0..n).collect();
    for t in 1..=cfg.terms {
        for c in 0..n {
            fwd[c] = perm.map[fwd[c]];
            bwd[c] = inv[bwd[c]];
        }
        let tf = t as f64;
        let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
        // 1/i = −i
        let coef = Complex64::new(0.0, -sign * (-tf / cfg.radius).exp() / tf);
        for c in 0..n {
            h[bwd[c]][c] += coef;
            h[fwd[c]][c] -= coef;
        }
    }
    let mut modes = Vec::with_capacity(n);
    for (ci, cycle) in perm.cycles.iter().enumerate() {
        let k = cycle.len();
        for m in 0..k {
            let v = cycle_mode(perm, ci, m);
            let (omega, boundary) = reduced_phase(m, k);
            let expected = if boundary {
                0.0
            } else {
                damped_closed_form(omega, cfg.radius)
            };
            let residual = (0..n)
                .map(|r| {
                    let hv: Complex64 = (0..n).map(|c| h[r][c] * v[c]).sum();
                    (hv - v[r] * expected).norm()
                })
                .fold(0.0, f64::max);
            modes.push(ModeResidual {
                cycle: ci,
                k,
                m,
                omega,
                expected,
                residual,
                boundary,
            });
        }
    }
    let max_residual = modes.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(OperatorCheck {
        modes,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffRow {
    pub radius: f64,
    /// `closed_form(α − π, R) − (α − π)`
    pub correction: f64,
    /// `2/(Rα)`
    pub asymptotic: f64,
    pub ratio: f64,
    /// `cot(α/2)/R`, the exact first-order term in `1/R`.
    pub first_order: f64,
    pub first_order_ratio: f64,
}

/// Shift of the damped phase just above `−π`, compared with `2/(Rα)`.
/// Meaningful for `Rα² ≫ 1`.
pub fn cutoff_correction_check(alpha: f64, radii: &[f64]) -> Vec<CutoffRow> {
    radii
        .iter()
        .map(|&r| {
            let omega = alpha - PI;
            let correction = damped_closed_form(omega, r) - omega;
            let asymptotic = 2.0 / (r * alpha);
            let first_order = 1.0 / ((alpha / 2.0).tan() * r);
            CutoffRow {
                radius: r,
                correction,
                asymptotic,
                ratio: correction / asymptotic,
                first_order,
                first_order_ratio: correction / first_order,
            }
        })
        .collect()
}

/// Eigenvalue check `U v = e^{−iω} v` by direct application of the map.
pub fn mode_eigen_residual<S>(perm: &ShellPermutation<S>, cycle: usize, m: usize) -> f64 {
    let v = cycle_mode(perm, cycle, m);
    let k = perm.cycles[cycle].len();
    let lambda = Complex64::from_polar(1.0, -2.0 * PI * m as f64 / k as f64);
    let mut uv = vec![Complex64::new(0.0, 0.0); perm.len()];
    for (c, &r) in perm.map.iter().enumerate() {
        uv[r] += v[c];
    }
    uv.iter()
        .zip(&v)
        .map(|(a, b)| (a - b * lambda).norm())
        .fold(0.0, f64::max)
}
