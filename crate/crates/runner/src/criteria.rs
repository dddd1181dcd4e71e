//! The twelve acceptance criteria, each a self-contained experiment with a
//! pinned seed that returns an [`Outcome`].

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use lvwf_core::analytics::{gamma_identity_residual, invasion_criterion, StationaryModel, CDF_GRID};
use lvwf_core::diagnostics::{
    deviation_statistic, ks_distance, lyapunov_dissipation, lyapunov_value, moment_monitor,
    monotone_moment_check_band, MomentKind, Trend,
};
use lvwf_core::limit::{
    coupling_experiment, frozen_theta_model, lipschitz_constant, meanfield_model, wf_spatial_model, CouplingConfig,
    InitialLaw, WfParams,
};
use lvwf_core::micro::{hfp_model, rescaled_frequency_run, HfpState, ScalingSchedule};
use lvwf_core::sde::{integrate_observed, run_replicas, sample_initial, Moments, Observable, SdeModel};
use lvwf_core::{
    build_deme_graph, EcologyParams, Equilibrium, Error, GraphKind, IntegratorConfig, Result, RngStream, ScalingParams,
};

/// Full or reduced run. Fast mode divides replica counts by 10 and doubles
/// statistical tolerances. `dt_divisor` refines every time step while
/// keeping the recorded times fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mode {
    pub fast: bool,
    pub dt_divisor: u32,
}

impl Default for Mode {
    fn default() -> Self {
        Self::FULL
    }
}

impl Mode {
    pub const FULL: Mode = Mode { fast: false, dt_divisor: 1 };
    pub const FAST: Mode = Mode { fast: true, dt_divisor: 1 };

    pub fn with_dt_divisor(self, dt_divisor: u32) -> Self {
        Self { dt_divisor, ..self }
    }

    /// Integrator for step `dt / dt_divisor` recording every `record_every`
    /// time units.
    fn integrator(self, dt: f64, t_end: f64, record_every: f64) -> IntegratorConfig {
        let dt = dt / f64::from(self.dt_divisor);
        let stride = ((record_every / dt).round() as u64).max(1);
        IntegratorConfig::new(dt, t_end).with_stride(stride)
    }

    pub fn replicas(self, full: usize) -> usize {
        if self.fast {
            (full / 10).max(1)
        } else {
            full
        }
    }

    pub fn widen(self, tol: f64) -> f64 {
        if self.fast {
            2.0 * tol
        } else {
            tol
        }
    }
}

/// Result of one criterion, with the data files it produced.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub details: serde_json::Value,
    #[serde(skip)]
    pub files: Vec<(String, Vec<u8>)>,
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Wall-clock budget of a full run.
    pub budget_secs: f64,
    pub run: fn(Mode) -> Result<Outcome>,
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "equilibrium identities", budget_secs: 5.0, run: equilibrium_identities },
    Criterion { id: 2, name: "deterministic attractor", budget_secs: 10.0, run: deterministic_attractor },
    Criterion { id: 3, name: "Lyapunov dissipation", budget_secs: 10.0, run: lyapunov_dissipation_check },
    Criterion { id: 4, name: "Gamma identity", budget_secs: 5.0, run: gamma_identity },
    Criterion { id: 5, name: "moment trichotomy", budget_secs: 10.0, run: moment_trichotomy },
    Criterion { id: 6, name: "invasion criterion", budget_secs: 5.0, run: invasion },
    Criterion { id: 7, name: "fixation dynamics", budget_secs: 900.0, run: fixation },
    Criterion { id: 8, name: "stationary density", budget_secs: 300.0, run: stationary_density },
    Criterion { id: 9, name: "monotone moment", budget_secs: 600.0, run: monotone_moment },
    Criterion { id: 10, name: "propagation of chaos", budget_secs: 900.0, run: propagation_of_chaos },
    Criterion { id: 11, name: "micro-to-limit convergence", budget_secs: 1800.0, run: micro_to_limit },
    Criterion { id: 12, name: "algebraic equivalences", budget_secs: 10.0, run: algebraic_equivalences },
];

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

/// Outcome of a criterion together with its wall-clock time.
#[derive(Debug, Clone, Serialize)]
pub struct Timed {
    pub outcome: Outcome,
    pub seconds: f64,
    pub budget_secs: f64,
}

impl Timed {
    pub fn within_budget(&self) -> bool {
        self.seconds <= self.budget_secs
    }

    pub fn line(&self) -> String {
        let o = &self.outcome;
        format!(
            "[{}] criterion {:>2} {:<28} {:>8.2}s / {:>5.0}s  {}",
            if o.passed && self.within_budget() { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            self.seconds,
            self.budget_secs,
            o.summary
        )
    }
}

pub fn run_timed(c: &Criterion, mode: Mode) -> Result<Timed> {
    let start = Instant::now();
    let outcome = (c.run)(mode)?;
    Ok(Timed {
        outcome,
        seconds: start.elapsed().as_secs_f64(),
        budget_secs: c.budget_secs,
    })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn wp(kappa: f64, alpha: f64, beta: f64, a: f64) -> WfParams {
    WfParams { kappa, alpha, beta, a }
}

fn random_ecology(rng: &mut ChaCha8Rng) -> Equilibrium {
    loop {
        let lambda = rng.gen_range(0.5..5.0);
        let k = rng.gen_range(0.5..10.0);
        let delta = rng.gen_range(0.1..3.0);
        let nu = rng.gen_range(0.05..lambda);
        let gamma = rng.gen_range(2.0 * delta..2.0 * delta + 3.0);
        let eta = rng.gen_range(0.2..5.0);
        let rho = rng.gen_range(0.0..eta);
        if let Ok(eq) = EcologyParams::new(lambda, k, delta, nu, gamma, eta, rho).and_then(Equilibrium::new) {
            return eq;
        }
    }
}

fn random_wf(rng: &mut ChaCha8Rng) -> WfParams {
    wp(
        rng.gen_range(0.2..3.0),
        rng.gen_range(0.1..3.0),
        rng.gen_range(0.2..3.0),
        rng.gen_range(1.2..5.0),
    )
}

pub fn equilibrium_identities(_: Mode) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_host: f64 = 0.0;
    let mut worst_para: f64 = 0.0;
    for _ in 0..1000 {
        let eq = random_ecology(&mut rng);
        let e = eq.eco;
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            let (h, p) = eq.pair(x);
            worst_host = worst_host.max((e.delta * p + e.lambda / e.k * h - e.lambda).abs());
            worst_para = worst_para.max((e.nu + e.gamma * p - (e.eta - e.rho * x) * h).abs());
        }
    }
    let passed = worst_host < 1e-12 && worst_para < 1e-12;
    Ok(Outcome {
        id: 1,
        name: "equilibrium identities",
        passed,
        summary: format!("max residuals {worst_host:.2e}, {worst_para:.2e} (< 1e-12)"),
        details: json!({"parameter_sets": 1000, "grid": 101, "host_residual": worst_host, "parasite_residual": worst_para}),
        files: Vec::new(),
    })
}

/// Noise-free single-deme run with frozen `f`, returning `(t, H, P)`.
fn attractor_path(eq: &Equilibrium, f: f64, mode: Mode) -> Result<Vec<(f64, f64, f64)>> {
    let g = build_deme_graph(GraphKind::Single, 1.0)?;
    let model = hfp_model(eq.eco, ScalingParams::zero(), &g)?;
    let cfg = mode.integrator(1e-3, 200.0, 0.0);
    let mut out = Vec::with_capacity(cfg.steps() as usize + 1);
    integrate_observed(&model, &[1.0, f, 2.0], &cfg, &RngStream::new(2, 0), |_, t, x| {
        debug_assert_eq!(x[1], f);
        out.push((t, x[0], x[2]));
    })?;
    Ok(out)
}

const FROZEN_F: [f64; 3] = [0.0, 0.5, 1.0];

pub fn deterministic_attractor(mode: Mode) -> Result<Outcome> {
    let eq = Equilibrium::new(EcologyParams::reference())?;
    let mut rows = Vec::new();
    let mut passed = true;
    let mut worst: f64 = 0.0;
    for f in FROZEN_F {
        let path = attractor_path(&eq, f, mode)?;
        let &(_, h, p) = path.last().expect("nonempty");
        let (he, pe) = eq.pair(f);
        let dist = (h - he).abs().max((p - pe).abs());
        worst = worst.max(dist);
        passed &= dist < 1e-6;
        rows.push(json!({"F": f, "H": h, "P": p, "h_eq": he, "p_eq": pe, "distance": dist}));
    }
    Ok(Outcome {
        id: 2,
        name: "deterministic attractor",
        passed,
        summary: format!("max |(H,P) - (h,p)| at t=200 is {worst:.2e} (< 1e-6)"),
        details: json!({"t": 200.0, "dt": 1e-3 / f64::from(mode.dt_divisor), "runs": rows}),
        files: Vec::new(),
    })
}

pub fn lyapunov_dissipation_check(mode: Mode) -> Result<Outcome> {
    const TRANSIENT: f64 = 1.0;
    const U_MIN: f64 = 1e-10;
    let eq = Equilibrium::new(EcologyParams::reference())?;
    let dt = 1e-3 / f64::from(mode.dt_divisor);
    let mut passed = true;
    let mut runs = Vec::new();
    let mut files = Vec::new();
    for f in FROZEN_F {
        let path = attractor_path(&eq, f, mode)?;
        let u: Vec<f64> = path
            .iter()
            .map(|&(_, h, p)| lyapunov_value(&eq, h, p, f))
            .collect::<Result<_>>()?;
        let mut max_increase = f64::NEG_INFINITY;
        let mut max_rel = 0.0f64;
        let mut checked = 0usize;
        for n in 0..path.len() - 1 {
            max_increase = max_increase.max(u[n + 1] - u[n]);
            let (t, h, p) = path[n];
            if t >= TRANSIENT && u[n] >= U_MIN {
                let rate = lyapunov_dissipation(&eq, h, p, f);
                let decrement = (u[n] - u[n + 1]) / dt;
                max_rel = max_rel.max((decrement - rate).abs() / rate);
                checked += 1;
            }
        }
        let ok = max_increase <= 1e-9 && max_rel < 0.01 && checked > 0;
        passed &= ok;
        runs.push(json!({
            "F": f, "max_increase": max_increase, "max_relative_error": max_rel,
            "checked_steps": checked, "passed": ok,
        }));
        let stride = 100 * mode.dt_divisor as usize;
        let times: Vec<f64> = path.iter().step_by(stride).map(|r| r.0).collect();
        let vals: Vec<f64> = u.iter().step_by(stride).copied().collect();
        files.push((
            format!("lyapunov_F{f}.csv"),
            csv_bytes(|w| lvwf_core::diagnostics::write_series_csv(w, &times, &vals, None))?,
        ));
    }
    let worst = runs.iter().map(|r| r["max_relative_error"].as_f64().unwrap()).fold(0.0, f64::max);
    Ok(Outcome {
        id: 3,
        name: "Lyapunov dissipation",
        passed,
        summary: format!("u non-increasing; max relative rate error {worst:.2e} (< 1e-2)"),
        details: json!({"transient": TRANSIENT, "u_min": U_MIN, "runs": runs}),
        files,
    })
}

pub fn gamma_identity(_: Mode) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_wf(&mut rng);
        let (lo, hi) = p.theta_bounds();
        for k in 1..=50 {
            let theta = lo + (hi - lo) * k as f64 / 51.0;
            worst = worst.max(gamma_identity_residual(&p, theta)?.abs());
        }
    }
    let anchor = gamma_identity_residual(&wp(1.0, 1.0, 1.0, 2.0), 0.75)?;
    let passed = worst < 1e-10 && anchor.abs() < 1e-10;
    Ok(Outcome {
        id: 4,
        name: "Gamma identity",
        passed,
        summary: format!("max |residual| {worst:.2e} over 20x50, anchor {anchor:.2e}"),
        details: json!({"max_residual": worst, "anchor_residual": anchor}),
        files: Vec::new(),
    })
}

pub fn moment_trichotomy(_: Mode) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut sign_failures = 0;
    let mut worst_equal: f64 = 0.0;
    for k in 0..200 {
        let mut p = random_wf(&mut rng);
        if k % 4 == 0 {
            p.alpha = p.beta;
        }
        let (lo, hi) = p.theta_bounds();
        let theta = lo + (hi - lo) * rng.gen_range(0.02..0.98);
        let sm = StationaryModel::new(p, theta)?;
        let diff = sm.stationary_moment(|z| 1.0 / (p.a - z))? - theta;
        if p.alpha == p.beta {
            worst_equal = worst_equal.max(diff.abs());
        } else if diff.signum() != (p.beta - p.alpha).signum() {
            sign_failures += 1;
        }
    }
    let anchor = StationaryModel::new(wp(1.0, 1.0, 1.0, 2.0), 0.75)?.stationary_moment(|z| 1.0 / (2.0 - z))?;
    let passed = sign_failures == 0 && worst_equal < 1e-8 && (anchor - 0.75).abs() < 1e-10;
    Ok(Outcome {
        id: 5,
        name: "moment trichotomy",
        passed,
        summary: format!("{sign_failures} sign failures / 150, |moment - theta| at alpha=beta {worst_equal:.1e}, anchor {anchor}"),
        details: json!({"sign_failures": sign_failures, "max_equal_case_error": worst_equal, "anchor": anchor}),
        files: Vec::new(),
    })
}

pub fn invasion(_: Mode) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst_unit: f64 = 0.0;
    for _ in 0..20 {
        let mut p = random_wf(&mut rng);
        p.alpha = p.beta;
        worst_unit = worst_unit.max((invasion_criterion(&p)?.integral - 1.0).abs());
    }
    let anchor = invasion_criterion(&wp(1.0, 2.0, 1.0, 2.0))?;
    let mut grid_failures = 0;
    let beta = 1.3;
    for k in 0..41 {
        let alpha = beta * (0.5 + k as f64 / 40.0);
        let r = invasion_criterion(&wp(0.8, alpha, beta, 2.5))?;
        if r.dies_out != (alpha >= beta) {
            grid_failures += 1;
        }
    }
    let passed = worst_unit < 1e-10 && (anchor.integral - 7.0 / 12.0).abs() < 1e-10 && anchor.dies_out && grid_failures == 0;
    Ok(Outcome {
        id: 6,
        name: "invasion criterion",
        passed,
        summary: format!(
            "|I - 1| at alpha=beta {worst_unit:.1e}, anchor {:.12} (7/12), {grid_failures} grid failures",
            anchor.integral
        ),
        details: json!({"max_unit_error": worst_unit, "anchor": anchor, "grid_failures": grid_failures}),
        files: Vec::new(),
    })
}

const INIT: InitialLaw = InitialLaw::Uniform { lo: 0.3, hi: 0.7 };

fn meanfield_init(model: &dyn SdeModel, stream: &RngStream) -> Vec<f64> {
    sample_initial(model, stream, |_, g| INIT.draw(g))
}

pub fn fixation(mode: Mode) -> Result<Outcome> {
    let d = 500;
    let replicas = mode.replicas(10);
    let need = (0.9 * replicas as f64).ceil() as usize;
    let margin = mode.widen(0.05);
    let cfg = mode.integrator(1e-3, 300.0, 300.0);
    let mut passed = true;
    let mut runs = Vec::new();
    for (alpha, seed) in [(0.5, 701), (2.0, 702)] {
        let model = meanfield_model(wp(1.0, alpha, 1.0, 2.0), d)?;
        let obs = [Observable::mean_of("mean", 0..d)];
        let series = run_replicas(&model, |s| meanfield_init(&model, s), &cfg, seed, replicas, &obs)?;
        let finals: Vec<f64> = series.iter().map(|s| *s.values[0].last().expect("recorded")).collect();
        let hits = finals
            .iter()
            .filter(|&&m| if alpha < 1.0 { m >= 1.0 - margin } else { m <= margin })
            .count();
        passed &= hits >= need;
        runs.push(json!({"alpha": alpha, "final_means": finals, "hits": hits, "required": need}));
    }
    Ok(Outcome {
        id: 7,
        name: "fixation dynamics",
        passed,
        summary: format!(
            "alpha=0.5: {}/{replicas} >= {}, alpha=2: {}/{replicas} <= {margin}",
            runs[0]["hits"],
            1.0 - margin,
            runs[1]["hits"]
        ),
        details: json!({"D": d, "t": 300.0, "dt": cfg.dt, "replicas": replicas, "runs": runs}),
        files: Vec::new(),
    })
}

pub fn stationary_density(mode: Mode) -> Result<Outcome> {
    let p = wp(1.0, 1.0, 1.0, 2.0);
    let theta = 0.75;
    let model = frozen_theta_model(p, theta)?;
    let cfg = mode.integrator(1e-3, 2100.0, 0.02);
    let mut samples = Vec::with_capacity(100_000);
    integrate_observed(&model, &[0.5], &cfg, &RngStream::new(801, 0), |_, t, x| {
        if t > 100.0 + 1e-9 {
            samples.push(x[0]);
        }
    })?;
    let sm = StationaryModel::new(p, theta)?;
    let table = sm.cdf_table(CDF_GRID)?;
    let ks = ks_distance(&samples, &table)?;
    let tol = mode.widen(0.05);
    Ok(Outcome {
        id: 8,
        name: "stationary density",
        passed: ks < tol,
        summary: format!("KS distance {ks:.4} over {} points (< {tol})", samples.len()),
        details: json!({"ks": ks, "points": samples.len(), "theta": theta, "c_theta": sm.c_theta}),
        files: vec![("cdf.csv".into(), csv_bytes(|w| table.write_csv(w))?)],
    })
}

pub fn monotone_moment(mode: Mode) -> Result<Outcome> {
    let d = 1000;
    let replicas = mode.replicas(20);
    let band = mode.widen(3.0);
    let cfg = mode.integrator(1e-3, 20.0, 0.1);
    let mut passed = true;
    let mut runs = Vec::new();
    for (alpha, seed) in [(2.0, 901), (0.5, 902), (1.0, 903)] {
        let p = wp(1.0, alpha, 1.0, 2.0);
        let model = meanfield_model(p, d)?;
        let obs = [Observable::new("psi_mean", move |x: &[f64]| {
            x.iter().map(|&z| p.psi(z)).sum::<f64>() / x.len() as f64
        })];
        let series = run_replicas(&model, |s| meanfield_init(&model, s), &cfg, seed, replicas, &obs)?;
        let ys: Vec<Vec<f64>> = series.iter().map(|s| s.values[0].clone()).collect();
        let report = monotone_moment_check_band(&series[0].times, &ys, &p, band);
        let expected = if alpha > 1.0 {
            Trend::NonIncreasing
        } else if alpha < 1.0 {
            Trend::NonDecreasing
        } else {
            Trend::Constant
        };
        match report {
            Ok(r) => {
                let ok = r.passed && r.verdict == expected;
                passed &= ok;
                runs.push(json!({"alpha": alpha, "report": r, "passed": ok}));
            }
            Err(Error::InsufficientReplicas(msg)) => {
                passed = false;
                runs.push(json!({"alpha": alpha, "error": msg, "passed": false}));
            }
            Err(e) => return Err(e),
        }
    }
    let describe = |r: &serde_json::Value| match r.get("report") {
        Some(rep) => format!(
            "{:+.2e}±{:.1e}",
            rep["slope"].as_f64().unwrap_or(f64::NAN),
            rep["slope_stderr"].as_f64().unwrap_or(f64::NAN)
        ),
        None => "unresolved".into(),
    };
    Ok(Outcome {
        id: 9,
        name: "monotone moment",
        passed,
        summary: format!(
            "slopes alpha=2: {}, alpha=0.5: {}, alpha=1: {} (band {band} se)",
            describe(&runs[0]),
            describe(&runs[1]),
            describe(&runs[2])
        ),
        details: json!({"D": d, "replicas": replicas, "t": 20.0, "runs": runs}),
        files: Vec::new(),
    })
}

pub fn propagation_of_chaos(mode: Mode) -> Result<Outcome> {
    let cfg = CouplingConfig {
        d_list: vec![16, 64, 256],
        d_ref: 2048,
        t_end: 1.0,
        dt: 1e-3 / f64::from(mode.dt_divisor),
        records: 1,
        replicas: mode.replicas(200),
        seed: 1001,
        init: INIT,
    };
    let table = coupling_experiment(&wp(1.0, 1.0, 1.0, 2.0), &cfg)?;
    let scaled: Vec<f64> = cfg
        .d_list
        .iter()
        .map(|&d| table.at(d, 1.0).map(|r| r.sqrt_d_error).ok_or_else(|| Error::Config("missing row".into())))
        .collect::<Result<_>>()?;
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    let bound = 1.0 + mode.widen(1.0);
    Ok(Outcome {
        id: 10,
        name: "propagation of chaos",
        passed: ratio <= bound && min > 0.0,
        summary: format!("sqrt(D) error {scaled:.4?}, max/min {ratio:.3} (<= {bound})"),
        details: json!({"config": cfg, "table": table, "ratio": ratio}),
        files: vec![("coupling.csv".into(), csv_bytes(|w| table.write_csv(w))?)],
    })
}

/// Sample mean and variance of `xs` with standard errors.
fn mean_var(xs: &[f64]) -> (f64, f64, f64, f64) {
    let m = Moments::from_slice(xs);
    let var = m.variance();
    let sq: Vec<f64> = xs.iter().map(|x| (x - m.mean).powi(2)).collect();
    let var_se = Moments::from_slice(&sq).stderr();
    (m.mean, m.stderr(), var, var_se)
}

struct MicroSummary {
    deviation: Vec<f64>,
    final_f: Vec<Vec<f64>>,
    monitor_ratio: f64,
}

#[allow(clippy::too_many_arguments)]
fn micro_ensemble(
    eq: &Equilibrium,
    sched: &ScalingSchedule,
    graph: &lvwf_core::DemeGraph,
    n: f64,
    f0: &[f64],
    replicas: usize,
    seed: u64,
    mode: Mode,
) -> Result<MicroSummary> {
    let x0 = HfpState::at_equilibrium(eq, f0);
    // Record every 0.1 units of fast time; the horizon is set by the run.
    let cfg = mode.integrator(1e-3, 1.0, 0.1);
    let d = graph.len();
    let per: Vec<(f64, Vec<f64>, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(seed, r as u64);
            let path = rescaled_frequency_run(eq, sched, graph, n, 1.0, &x0, &cfg, &stream)?;
            let dev = deviation_statistic(&path, eq, graph, n)?;
            let mut ratio: f64 = 0.0;
            for kind in MomentKind::ALL {
                let s = moment_monitor(&path, &eq.eco, graph, kind)?;
                let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ratio = ratio.max(max / s[0]);
            }
            Ok((dev.final_integral(), path.last()[d..2 * d].to_vec(), ratio))
        })
        .collect::<Result<_>>()?;
    Ok(MicroSummary {
        deviation: per.iter().map(|p| p.0).collect(),
        final_f: (0..d).map(|i| per.iter().map(|p| p.1[i]).collect()).collect(),
        monitor_ratio: per.iter().map(|p| p.2).fold(0.0, f64::max),
    })
}

pub fn micro_to_limit(mode: Mode) -> Result<Outcome> {
    let ns = [50.0, 200.0, 800.0];
    let replicas = mode.replicas(50);
    let dev_tol = mode.widen(1.0);
    let moment_tol = mode.widen(3.0);
    let eq = Equilibrium::new(EcologyParams::reference())?;
    let sched = ScalingSchedule::new(1.0, 1.0, 1.0);
    let graph = build_deme_graph(GraphKind::CompleteUniform { demes: 4 }, 1.0)?;
    let d = graph.len();
    let f0 = [0.2, 0.4, 0.6, 0.8];

    let limit = wf_spatial_model(wp(sched.kappa, sched.alpha, sched.beta, eq.lc.a), &graph)?;
    let cfg = mode.integrator(1e-3, 1.0, 1.0);
    let obs: Vec<Observable> = (0..d).map(|i| Observable::component(format!("X[{i}]"), i)).collect();
    let wf = run_replicas(&limit, |_| f0.to_vec(), &cfg, 1100, replicas, &obs)?;
    let wf_final: Vec<Vec<f64>> = (0..d)
        .map(|i| wf.iter().map(|s| *s.values[i].last().expect("recorded")).collect())
        .collect();

    let mut levels = Vec::new();
    let mut moment_failures = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (k, &n) in ns.iter().enumerate() {
        let micro = micro_ensemble(&eq, &sched, &graph, n, &f0, replicas, 1101 + k as u64, mode)?;
        let dev = Moments::from_slice(&micro.deviation);
        let mut demes = Vec::new();
        for (i, (micro_f, limit_f)) in micro.final_f.iter().zip(&wf_final).enumerate() {
            let (mm, mse, mv, mvse) = mean_var(micro_f);
            let (lm, lse, lv, lvse) = mean_var(limit_f);
            let z_mean = (mm - lm).abs() / mse.hypot(lse);
            let z_var = (mv - lv).abs() / mvse.hypot(lvse);
            worst_z = worst_z.max(z_mean).max(z_var);
            if !(z_mean <= moment_tol && z_var <= moment_tol) {
                moment_failures.push(json!({"N": n, "deme": i}));
            }
            demes.push(json!({
                "deme": i, "micro_mean": mm, "micro_mean_se": mse, "limit_mean": lm, "limit_mean_se": lse,
                "micro_var": mv, "micro_var_se": mvse, "limit_var": lv, "limit_var_se": lvse,
                "z_mean": z_mean, "z_var": z_var,
            }));
        }
        levels.push(json!({
            "N": n, "deviation_integral": dev.mean, "deviation_stderr": dev.stderr(),
            "max_monitor_ratio": micro.monitor_ratio, "demes": demes,
        }));
    }
    let dev_at = |k: usize| {
        (
            levels[k]["deviation_integral"].as_f64().unwrap(),
            levels[k]["deviation_stderr"].as_f64().unwrap(),
        )
    };
    let mut monotone = true;
    for k in 0..ns.len() - 1 {
        let (a, sa) = dev_at(k);
        let (b, sb) = dev_at(k + 1);
        monotone &= b <= a + dev_tol * sa.hypot(sb);
    }
    let passed = monotone && moment_failures.is_empty();
    let devs: Vec<String> = (0..ns.len()).map(|k| format!("{:.4}±{:.4}", dev_at(k).0, dev_at(k).1)).collect();
    let mut rows = Vec::new();
    for (k, n) in ns.iter().enumerate() {
        rows.push(format!("{},{},{}", n, dev_at(k).0, dev_at(k).1));
    }
    let csv = format!("N,deviation_integral,stderr\n{}\n", rows.join("\n"));
    Ok(Outcome {
        id: 11,
        name: "micro-to-limit convergence",
        passed,
        summary: format!(
            "deviation integrals {} ({}), max moment z {worst_z:.2} (<= {moment_tol})",
            devs.join(" / "),
            if monotone { "non-increasing" } else { "INCREASING" }
        ),
        details: json!({
            "replicas": replicas, "slow_horizon": 1.0, "F0": f0, "levels": levels,
            "deviation_non_increasing": monotone, "moment_failures": moment_failures,
            "note": "finite N only shows non-explosion of the N-scaled deviation; the supremum over N is not verifiable",
        }),
        files: vec![("deviation.csv".into(), csv.into_bytes())],
    })
}

pub fn algebraic_equivalences(_: Mode) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1201);
    let mut worst_drift: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_wf(&mut rng);
        let d = rng.gen_range(1..12);
        let g = build_deme_graph(GraphKind::CompleteUniform { demes: d }, 1.0)?;
        let wf = wf_spatial_model(p, &g)?;
        let mf = meanfield_model(p, d)?;
        let x: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
        let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
        wf.drift(&x, 1e-9, &mut a);
        mf.drift(&x, 1e-9, &mut b);
        for (u, v) in a.iter().zip(&b) {
            worst_drift = worst_drift.max((u - v).abs());
        }
    }
    let mut violations = 0;
    for _ in 0..100_000 {
        let p = wp(
            rng.gen_range(0.01..5.0),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.01..5.0),
            rng.gen_range(1.05..6.0),
        );
        let l = lipschitz_constant(&p);
        let (u, v) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let (x, y): (f64, f64) = (rng.gen(), rng.gen());
        let (x, y) = if x >= y { (x, y) } else { (y, x) };
        let one_sided = p.xi(u, x) - p.xi(v, y);
        let bound = l * (u - v).max(0.0) + l * (x - y);
        let ok = one_sided <= bound + 1e-12 * (1.0 + bound.abs())
            && (p.psi(x) - p.psi(y)).abs() <= l * (x - y) + 1e-15
            && p.noise(x).powi(2) <= l * (x + x * x) + 1e-15;
        if !ok {
            violations += 1;
        }
    }
    let passed = worst_drift < 1e-12 && violations == 0;
    Ok(Outcome {
        id: 12,
        name: "algebraic equivalences",
        passed,
        summary: format!("drift identity {worst_drift:.1e}, {violations} Lipschitz violations / 1e5"),
        details: json!({"max_drift_difference": worst_drift, "lipschitz_violations": violations}),
        files: Vec::new(),
    })
}
