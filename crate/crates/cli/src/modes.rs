use std::fs;
use std::path::Path;

use intham::census::{census, CensusReport};
use intham::field::{changed_sites, FieldHamiltonianSpec, FieldState, FieldSystem, LatticeShape, Parity};
use intham::margolus::{find_non_conserving, margolus_energy, margolus_step, margolus_unstep, MargolusState};
use intham::spectral::{
    cutoff_correction_check, eigenphases, hfract_operator_check, pair_shell_permutation, CutoffRow,
};
use intham::{
    classify_site, next_site, prev_site, step, step_inverse, BuiltModel, ModelSpec, PairIndexOrder,
    PhaseState, RestrictedHamiltonianProvider, SeparableHamiltonian1D, TruncationConfig,
    VectorHamiltonian,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{Mode, Resolved, StartSpec};
use crate::error::RunError;

enum System {
    Separable(SeparableHamiltonian1D),
    Chain(VectorHamiltonian, PairIndexOrder),
    Field(FieldSystem),
}

fn model_err(e: impl std::fmt::Display) -> RunError {
    RunError::Model(e.to_string())
}

impl System {
    fn build(spec: &ModelSpec) -> Result<Self, RunError> {
        let built = spec.build().map_err(|e| RunError::Config(format!("model: {e}")))?;
        Ok(match built {
            BuiltModel::Separable(h) => System::Separable(h),
            BuiltModel::Chain(h) => {
                let order = PairIndexOrder::ascending(h.pairs());
                System::Chain(h, order)
            }
            BuiltModel::Field(f) => System::Field(f),
        })
    }

    fn pairs(&self) -> usize {
        match self {
            System::Separable(_) => 1,
            System::Chain(h, _) => h.pairs(),
            System::Field(f) => f.pairs(),
        }
    }

    fn windows(&self, i: usize) -> ((i64, i64), (i64, i64)) {
        match self {
            System::Separable(h) => (h.q_window(), h.p_window()),
            System::Chain(h, _) => (h.q_window(), h.p_window()),
            System::Field(f) => {
                let w = f.spec().field_windows[i % f.components()];
                (w, (i64::MIN / 2, i64::MAX / 2))
            }
        }
    }

    fn advance(&self, s: &PhaseState, forward: bool) -> Result<PhaseState, RunError> {
        match self {
            System::Separable(h) => {
                let (q, p) = if forward {
                    next_site(h, s.q[0], s.p[0])
                } else {
                    prev_site(h, s.q[0], s.p[0])
                }
                .map_err(|e| RunError::Model(format!("pair 0: {e}")))?;
                let mut n = PhaseState::new(vec![q], vec![p]);
                n.t = s.t + if forward { 1 } else { -1 };
                Ok(n)
            }
            System::Chain(h, order) => if forward {
                step(s, h, order)
            } else {
                step_inverse(s, h, order)
            }
            .map_err(model_err),
            System::Field(f) => {
                let fs = f.from_phase_state(s);
                let next = if forward { f.step(&fs) } else { f.step_inverse(&fs) };
                Ok(f.to_phase_state(&next.map_err(model_err)?))
            }
        }
    }

    fn energy(&self, s: &PhaseState) -> Result<i64, RunError> {
        match self {
            System::Separable(h) => h.eval_integer(s.q[0], s.p[0]).map_err(model_err),
            System::Chain(h, _) => h.total_energy(s).map_err(model_err),
            System::Field(f) => Ok(f.total_energy(&f.from_phase_state(s))),
        }
    }

    fn start(&self, start: &StartSpec, rng: &mut ChaCha8Rng) -> Result<PhaseState, RunError> {
        let n = self.pairs();
        let state = match (&start.q, &start.p, start.random_amplitude) {
            (Some(q), Some(p), _) => PhaseState::new(q.clone(), p.clone()),
            (None, None, Some(a)) if a >= 0 => {
                let mut q = Vec::with_capacity(n);
                let mut p = Vec::with_capacity(n);
                for i in 0..n {
                    let ((qlo, qhi), (plo, phi)) = self.windows(i);
                    q.push(rng.gen_range(-a..=a).clamp(qlo, qhi));
                    p.push(rng.gen_range(-a..=a).clamp(plo, phi));
                }
                PhaseState::new(q, p)
            }
            _ => {
                return Err(RunError::Config(
                    "start needs both q and p, or a non-negative random_amplitude".into(),
                ))
            }
        };
        if state.q.len() != n || state.p.len() != n {
            return Err(RunError::Config(format!(
                "start has {} / {} entries, model has {n} pairs",
                state.q.len(),
                state.p.len()
            )));
        }
        for i in 0..n {
            let ((qlo, qhi), (plo, phi)) = self.windows(i);
            if !(qlo..=qhi).contains(&state.q[i]) || !(plo..=phi).contains(&state.p[i]) {
                return Err(RunError::Config(format!("start entry {i} outside the model window")));
            }
        }
        Ok(state)
    }
}

fn write_json(out: &Path, name: &str, value: &impl Serialize) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(out.join(name), text)?;
    Ok(())
}

fn csv_writer(out: &Path, name: &str) -> Result<csv::Writer<fs::File>, RunError> {
    Ok(csv::Writer::from_path(out.join(name))?)
}

pub fn run(r: &Resolved) -> Result<(), RunError> {
    fs::create_dir_all(&r.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    match r.mode {
        Mode::Trajectory => trajectory(r, &mut rng),
        Mode::Invert => invert(r, &mut rng),
        Mode::Shell => shell(r),
        Mode::Spectral => spectral(r),
        Mode::Census => census_mode(r),
        Mode::MargolusContrast => margolus_contrast(r, &mut rng),
        Mode::Lightcone => lightcone(r, &mut rng),
    }
}

fn system_and_start(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<(System, PhaseState), RunError> {
    let model = r.config.model.as_ref().expect("validated");
    let sys = System::build(model)?;
    let start = sys.start(r.config.start.as_ref().expect("validated"), rng)?;
    Ok((sys, start))
}

fn state_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..n).map(|i| format!("q{i}")));
    h.extend((0..n).map(|i| format!("p{i}")));
    h.push("energy".into());
    h
}

fn state_record(s: &PhaseState, e: i64) -> Vec<String> {
    let mut row = vec![s.t.to_string()];
    row.extend(s.q.iter().chain(&s.p).map(i64::to_string));
    row.push(e.to_string());
    row
}

fn trajectory(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<(), RunError> {
    let (sys, mut s) = system_and_start(r, rng)?;
    let e0 = sys.energy(&s)?;
    let mut w = csv_writer(&r.out, "trajectory.csv")?;
    w.write_record(state_header(sys.pairs()))?;
    w.write_record(state_record(&s, e0))?;
    let mut failure = None;
    for _ in 0..r.steps {
        match sys.advance(&s, true) {
            Ok(n) => s = n,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        let e = sys.energy(&s)?;
        w.write_record(state_record(&s, e))?;
        if e != e0 {
            failure = Some(RunError::Model(format!("energy changed from {e0} to {e} at t={}", s.t)));
            break;
        }
    }
    w.flush()?;
    write_json(&r.out, "final_state.json", &s)?;
    failure.map_or(Ok(()), Err)
}

fn invert(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<(), RunError> {
    let (sys, start) = system_and_start(r, rng)?;
    let mut s = start.clone();
    for _ in 0..r.steps {
        s = sys.advance(&s, true)?;
    }
    let forward_energy = sys.energy(&s)?;
    for _ in 0..r.steps {
        s = sys.advance(&s, false)?;
    }
    let restored = s == start;
    write_json(
        &r.out,
        "invert.json",
        &json!({
            "steps": r.steps,
            "initial": start,
            "final": s,
            "energy_initial": sys.energy(&start)?,
            "energy_after_forward": forward_energy,
            "restored": restored,
        }),
    )?;
    if restored {
        Ok(())
    } else {
        Err(RunError::Model("inverse steps did not restore the initial state".into()))
    }
}

fn separable(r: &Resolved) -> Result<SeparableHamiltonian1D, RunError> {
    match System::build(r.config.model.as_ref().expect("validated"))? {
        System::Separable(h) => Ok(h),
        _ => unreachable!("validated as separable"),
    }
}

fn energies(r: &Resolved) -> Vec<i64> {
    r.config
        .energies
        .clone()
        .unwrap_or_else(|| r.config.energy.into_iter().collect())
}

fn shell(r: &Resolved) -> Result<(), RunError> {
    let h = separable(r)?;
    let mut w = csv_writer(&r.out, "shell.csv")?;
    w.write_record(["energy", "q", "p", "class", "next_q", "next_p", "cycle", "cycle_length"])?;
    let mut summary = Vec::new();
    for e in energies(r) {
        let perm = pair_shell_permutation(&h, e).map_err(model_err)?;
        let mut cycle_of = vec![(0, 0); perm.len()];
        for (c, cyc) in perm.cycles.iter().enumerate() {
            for &j in cyc {
                cycle_of[j] = (c, cyc.len());
            }
        }
        for (j, &(q, p)) in perm.basis.iter().enumerate() {
            let class = classify_site(&h, q, p, e).map_err(model_err)?;
            let (nq, np) = perm.basis[perm.map[j]];
            w.write_record([
                e.to_string(),
                q.to_string(),
                p.to_string(),
                class.to_string(),
                nq.to_string(),
                np.to_string(),
                cycle_of[j].0.to_string(),
                cycle_of[j].1.to_string(),
            ])?;
        }
        summary.push(json!({"energy": e, "size": perm.len(), "cycle_lengths": perm.cycle_lengths()}));
    }
    w.flush()?;
    write_json(&r.out, "shell.json", &summary)
}

fn spectral(r: &Resolved) -> Result<(), RunError> {
    let h = separable(r)?;
    let opts = r.config.spectral.clone().unwrap_or_default();
    let cfg = match opts.terms {
        Some(n) => TruncationConfig::new(opts.radius, n),
        None => TruncationConfig::for_radius(opts.radius),
    }
    .map_err(|e| RunError::Config(e.to_string()))?;
    let mut w = csv_writer(&r.out, "spectrum.csv")?;
    w.write_record(["energy", "cycle", "k", "m", "omega", "h_fract", "h_int", "h_total", "boundary"])?;
    let mut shells = Vec::new();
    let mut min_total = f64::INFINITY;
    for e in energies(r) {
        let perm = pair_shell_permutation(&h, e).map_err(model_err)?;
        for s in eigenphases(&perm) {
            min_total = min_total.min(s.h_total);
            w.write_record([
                e.to_string(),
                s.cycle.to_string(),
                s.k.to_string(),
                s.m.to_string(),
                s.omega.to_string(),
                s.h_fract.to_string(),
                s.h_int.to_string(),
                s.h_total.to_string(),
                s.boundary.to_string(),
            ])?;
        }
        let residual = (perm.len() <= opts.cap)
            .then(|| hfract_operator_check(&perm, &cfg, opts.cap).map(|c| c.max_residual))
            .transpose()
            .map_err(model_err)?;
        shells.push(json!({
            "energy": e,
            "size": perm.len(),
            "cycle_lengths": perm.cycle_lengths(),
            "operator_max_residual": residual,
        }));
    }
    w.flush()?;
    let cutoff: Vec<CutoffRow> = cutoff_correction_check(opts.alpha, &opts.radii);
    let mut cw = csv_writer(&r.out, "cutoff.csv")?;
    for row in &cutoff {
        cw.serialize(row)?;
    }
    cw.flush()?;
    write_json(
        &r.out,
        "spectral.json",
        &json!({
            "radius": cfg.radius,
            "terms": cfg.terms,
            "alpha": opts.alpha,
            "shells": shells,
            "min_h_total": if min_total.is_finite() { Some(min_total) } else { None },
            "cutoff": cutoff,
        }),
    )
}

fn census_mode(r: &Resolved) -> Result<(), RunError> {
    let opts = r.config.census.as_ref().expect("validated");
    let family = |f: &intham::FunctionSpec, what: &str| {
        f.power_family()
            .ok_or_else(|| RunError::Config(format!("census {what} must be a valid power-law family")))
    };
    let kinetic = family(&opts.kinetic, "kinetic")?;
    let potential = family(&opts.potential, "potential")?;
    let energies: Vec<i64> = (opts.e_min..=opts.e_max).step_by(opts.e_step as usize).collect();
    let report: CensusReport = census(&kinetic, &potential, &energies, opts.fit_min).map_err(model_err)?;
    let mut w = csv_writer(&r.out, "census.csv")?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_json(&r.out, "census.json", &report)
}

fn single_component(r: &Resolved) -> Result<FieldSystem, RunError> {
    match System::build(r.config.model.as_ref().expect("validated"))? {
        System::Field(f) if f.components() == 1 => Ok(f),
        System::Field(_) => Err(RunError::Config("this mode needs a single field component".into())),
        _ => unreachable!("validated as field"),
    }
}

fn margolus_contrast(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<(), RunError> {
    let sys = single_component(r)?;
    let opts = r.config.margolus.as_ref().expect("validated");
    let start = System::Field(sys.clone()).start(r.config.start.as_ref().expect("validated"), rng)?;
    let prev: Vec<i64> = start.q.iter().zip(&start.p).map(|(q, p)| q - p).collect();
    let initial = MargolusState::new(prev, start.q.clone());
    let mut w = csv_writer(&r.out, "margolus.csv")?;
    w.write_record(["t", "energy"])?;
    let mut s = initial.clone();
    let mut energies = Vec::new();
    for _ in 0..=r.steps {
        let e = margolus_energy(&s, &sys);
        energies.push(e);
        w.write_record([s.t.to_string(), e.map_or(String::new(), |e| e.to_string())])?;
        if s.t < r.steps as i64 {
            s = margolus_step(&s, sys.shape(), &opts.rule);
        }
    }
    w.flush()?;
    for _ in 0..r.steps {
        s = margolus_unstep(&s, sys.shape(), &opts.rule);
    }
    let reversible = s == initial;
    let search_shape = LatticeShape::new(vec![opts.search_size])
        .map_err(|e| RunError::Config(format!("margolus search: {e}")))?;
    let search_spec = FieldHamiltonianSpec {
        components: 1,
        masses: sys.spec().masses.clone(),
        rho: sys.spec().rho,
        field_windows: sys.spec().field_windows.clone(),
    };
    let search_sys = FieldSystem::new(search_shape, search_spec)
        .map_err(|e| RunError::Config(format!("margolus search: {e}")))?;
    let witness = find_non_conserving(&search_sys, &opts.rule, &opts.search_values)
        .map(|(state, before, after)| json!({"state": state, "energy_before": before, "energy_after": after}));
    let known: Vec<i64> = energies.iter().flatten().copied().collect();
    write_json(
        &r.out,
        "margolus.json",
        &json!({
            "steps": r.steps,
            "reversible": reversible,
            "energy_min": known.iter().min(),
            "energy_max": known.iter().max(),
            "energy_conserved_on_run": known.windows(2).all(|p| p[0] == p[1]) && known.len() == energies.len(),
            "witness": witness,
        }),
    )?;
    if reversible {
        Ok(())
    } else {
        Err(RunError::Model("margolus unstep did not restore the initial state".into()))
    }
}

fn lightcone(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<(), RunError> {
    let model = r.config.model.as_ref().expect("validated");
    let System::Field(sys) = System::build(model)? else {
        unreachable!("validated as field")
    };
    let opts = r.config.lightcone.as_ref().expect("validated");
    let start = System::Field(sys.clone()).start(r.config.start.as_ref().expect("validated"), rng)?;
    let shape = sys.shape().clone();
    if opts.site >= shape.volume() {
        return Err(RunError::Config(format!("lightcone site {} is off the lattice", opts.site)));
    }
    let kk = sys.components();
    let mut a: FieldState = sys.from_phase_state(&start);
    let mut b = a.clone();
    b.phi[opts.site * kk] += opts.delta;
    sys.check_state(&b).map_err(|e| RunError::Config(format!("perturbed start: {e}")))?;
    let even = shape.sites_of(Parity::Even);
    let odd = shape.sites_of(Parity::Odd);
    let mut w = csv_writer(&r.out, "lightcone.csv")?;
    w.write_record(["substep", "parity", "changed", "radius", "bound"])?;
    let mut violation = None;
    let mut substep = 0u64;
    for _ in 0..r.steps {
        for (parity, sites) in [("even", &even), ("odd", &odd)] {
            a = sys.sweep(&a, sites, true).map_err(model_err)?;
            b = sys.sweep(&b, sites, true).map_err(model_err)?;
            substep += 1;
            let changed = changed_sites(&a, &b, kk);
            let radius = changed.iter().map(|&x| shape.distance(x, opts.site)).max();
            w.write_record([
                substep.to_string(),
                parity.to_string(),
                changed.len().to_string(),
                radius.map_or(String::new(), |r| r.to_string()),
                substep.to_string(),
            ])?;
            if radius.is_some_and(|rad| rad as u64 > substep) && violation.is_none() {
                violation = Some(substep);
            }
        }
    }
    w.flush()?;
    match violation {
        None => Ok(()),
        Some(s) => Err(RunError::Model(format!("perturbation outran the light cone at sub-step {s}"))),
    }
}
