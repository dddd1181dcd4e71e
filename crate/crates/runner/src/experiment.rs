//! JSON experiment specifications and their execution.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use lvwf_core::analytics::{fixation_classify, invasion_criterion, InvasionModel, StationaryModel};
use lvwf_core::diagnostics::{
    deviation_statistic, ensemble_deviation, ks_distance, lyapunov_value, moment_monitor, monotone_moment_check,
    MomentKind, SeriesEstimate, Verdict,
};
use lvwf_core::limit::{
    coupling_experiment, frozen_theta_model, mckean_vlasov_model, meanfield_model, single_colony_model,
    wf_spatial_model, CouplingConfig, InitialLaw, ParticleAverage, WfParams,
};
use lvwf_core::micro::{rescaled_frequency_run, HfpState, ScalingSchedule};
use lvwf_core::sde::{integrate, sample_initial, write_atomic, EnsembleStats, ObservedSeries};
use lvwf_core::{
    build_deme_graph, DemeGraph, EcologyParams, Equilibrium, Error, GraphKind, IntegratorConfig, Path, Result,
    RngStream, SdeModel,
};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "LVWF_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Micro,
    Wf,
    Meanfield,
    MckeanVlasov,
    FrozenTheta,
    SingleColony,
    AnalyticsOnly,
}

impl ModelKind {
    fn is_limit(self) -> bool {
        !matches!(self, ModelKind::Micro | ModelKind::AnalyticsOnly)
    }
}

/// Rates of the limit dynamics. For the micro model they are the targets of
/// the scaling schedule and `N` is the system size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Taken from the ecology block when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iota_floor: Option<f64>,
    /// Frozen mean for `frozen_theta` and the stationary analytics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub topology: GraphKind,
    #[serde(default = "unit")]
    pub weight_decay: f64,
}

fn unit() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Law of every frequency, drawn independently per deme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<InitialLaw>,
    /// Explicit frequencies, one per deme or particle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Micro model: initial host and parasite sizes in every deme. Each
    /// defaults to the equilibrium at the deme's frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hosts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parasites: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnosticSpec {
    Invasion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_dies_out: Option<bool>,
    },
    Stationary {
        #[serde(default = "default_cdf_points")]
        cdf_points: usize,
    },
    GammaIdentity {
        theta: f64,
    },
    Fixation {
        mean_z0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    ScaleFunction {
        #[serde(default = "default_scale_points")]
        points: usize,
    },
    Ensemble {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        histogram_bins: Option<usize>,
    },
    Paths {
        #[serde(default = "one")]
        count: usize,
    },
    Deviation,
    MomentMonitor {
        #[serde(default = "all_moments")]
        which: Vec<MomentKind>,
        #[serde(default = "default_max_ratio")]
        max_ratio: f64,
    },
    Lyapunov,
    MonotoneMoment,
    KsStationary {
        #[serde(default)]
        burn_in: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_distance: Option<f64>,
    },
    Coupling {
        d_list: Vec<usize>,
        #[serde(default = "default_d_ref")]
        d_ref: usize,
        #[serde(default = "one_u64")]
        records: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_ratio: Option<f64>,
    },
}

fn default_cdf_points() -> usize {
    lvwf_core::analytics::CDF_GRID
}

fn default_scale_points() -> usize {
    100
}

fn all_moments() -> Vec<MomentKind> {
    MomentKind::ALL.to_vec()
}

fn default_max_ratio() -> f64 {
    10.0
}

fn default_d_ref() -> usize {
    2048
}

fn one_u64() -> u64 {
    1
}

impl DiagnosticSpec {
    fn name(&self) -> &'static str {
        match self {
            DiagnosticSpec::Invasion { .. } => "invasion",
            DiagnosticSpec::Stationary { .. } => "stationary",
            DiagnosticSpec::GammaIdentity { .. } => "gamma_identity",
            DiagnosticSpec::Fixation { .. } => "fixation",
            DiagnosticSpec::ScaleFunction { .. } => "scale_function",
            DiagnosticSpec::Ensemble { .. } => "ensemble",
            DiagnosticSpec::Paths { .. } => "paths",
            DiagnosticSpec::Deviation => "deviation",
            DiagnosticSpec::MomentMonitor { .. } => "moment_monitor",
            DiagnosticSpec::Lyapunov => "lyapunov",
            DiagnosticSpec::MonotoneMoment => "monotone_moment",
            DiagnosticSpec::KsStationary { .. } => "ks_stationary",
            DiagnosticSpec::Coupling { .. } => "coupling",
        }
    }

    fn needs_paths(&self) -> bool {
        matches!(
            self,
            DiagnosticSpec::Ensemble { .. }
                | DiagnosticSpec::Paths { .. }
                | DiagnosticSpec::Deviation
                | DiagnosticSpec::MomentMonitor { .. }
                | DiagnosticSpec::Lyapunov
                | DiagnosticSpec::MonotoneMoment
                | DiagnosticSpec::KsStationary { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: ModelKind,
    /// Required: experiments never fall back to entropy or the clock.
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecology: Option<EcologyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticSpec>,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| config(format!("invalid experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that every block the model and diagnostics refer to exists.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config(format!("experiment name {:?} must be a plain file name", self.name)));
        }
        if self.replicas == 0 {
            return Err(config("replicas must be >= 1"));
        }
        if let Some(e) = &self.ecology {
            e.validate()?;
        }
        if let Some(cfg) = &self.integrator {
            cfg.validate()?;
        }
        let simulates = self.model != ModelKind::AnalyticsOnly;
        if simulates && self.integrator.is_none() {
            return Err(config(format!("model {:?} needs an integrator block", self.model)));
        }
        if self.model == ModelKind::Micro {
            if self.ecology.is_none() || self.scaling.is_none() || self.graph.is_none() {
                return Err(config("micro model needs ecology, scaling and graph blocks"));
            }
        } else if self.model != ModelKind::AnalyticsOnly || !self.diagnostics.is_empty() {
            self.wf_params()?;
        }
        if matches!(self.model, ModelKind::Wf | ModelKind::Meanfield) && self.graph.is_none() {
            return Err(config(format!("model {:?} needs a graph block", self.model)));
        }
        if self.model == ModelKind::FrozenTheta && self.scaling.and_then(|s| s.theta).is_none() {
            return Err(config("frozen_theta model needs scaling.theta"));
        }
        if let Some(init) = &self.initial {
            if let Some(law) = &init.law {
                law.validate()?;
            }
            if init.values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(config("initial values must lie in [0, 1]"));
            }
        }
        for d in &self.diagnostics {
            self.check_diagnostic(d)?;
        }
        Ok(())
    }

    fn check_diagnostic(&self, d: &DiagnosticSpec) -> Result<()> {
        let m = self.model;
        let ok = match d {
            DiagnosticSpec::Invasion { .. }
            | DiagnosticSpec::GammaIdentity { .. }
            | DiagnosticSpec::Fixation { .. }
            | DiagnosticSpec::ScaleFunction { .. } => m != ModelKind::Micro,
            DiagnosticSpec::Stationary { .. } => m != ModelKind::Micro && self.scaling.and_then(|s| s.theta).is_some(),
            DiagnosticSpec::Ensemble { .. } | DiagnosticSpec::Paths { .. } => m != ModelKind::AnalyticsOnly,
            DiagnosticSpec::Deviation | DiagnosticSpec::MomentMonitor { .. } | DiagnosticSpec::Lyapunov => {
                m == ModelKind::Micro
            }
            DiagnosticSpec::MonotoneMoment => {
                matches!(m, ModelKind::Wf | ModelKind::Meanfield | ModelKind::MckeanVlasov) && self.replicas >= 2
            }
            DiagnosticSpec::KsStationary { .. } => m == ModelKind::FrozenTheta,
            DiagnosticSpec::Coupling { .. } => matches!(m, ModelKind::Meanfield | ModelKind::MckeanVlasov),
        };
        if ok {
            Ok(())
        } else {
            Err(config(format!(
                "diagnostic `{}` does not apply to model {:?} with this configuration",
                d.name(),
                m
            )))
        }
    }

    pub fn wf_params(&self) -> Result<WfParams> {
        let s = self.scaling.ok_or_else(|| config("missing scaling block"))?;
        let a = match (s.a, &self.ecology) {
            (Some(a), None) => a,
            (None, Some(e)) => lvwf_core::derive_limit_constants(e)?.a,
            (Some(_), Some(_)) => return Err(config("give `a` either in scaling or through ecology, not both")),
            (None, None) => return Err(config("limit models need scaling.a or an ecology block")),
        };
        WfParams::new(s.kappa, s.alpha, s.beta, a)
    }

    fn graph(&self) -> Result<Option<DemeGraph>> {
        self.graph
            .map(|g| build_deme_graph(g.topology, g.weight_decay))
            .transpose()
    }

    /// Output directory: explicit override, then the spec, then the
    /// environment root, then `./lvwf-output`.
    pub fn output_dir(&self, out: Option<&FsPath>) -> PathBuf {
        if let Some(o) = out {
            return o.to_path_buf();
        }
        if let Some(o) = &self.output_dir {
            return o.clone();
        }
        default_root().join(&self.name)
    }
}

pub fn default_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("lvwf-output"))
}

/// Files produced by a run, in creation order.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
    pub verdicts: Vec<Verdict>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn add_csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.keys().cloned().collect()
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Writes every file atomically into `dir`.
    pub fn write(&self, dir: &FsPath) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), |f| {
                use std::io::Write;
                f.write_all(bytes)?;
                Ok(())
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    code_version: &'static str,
    seed: u64,
    spec: &'a ExperimentSpec,
    outputs: Vec<String>,
}

/// Outcome of [`run`].
#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub artifacts: Artifacts,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.artifacts.passed()
    }
}

/// Runs the experiment and writes manifest, outputs and verdicts to
/// `out` (or the spec's default directory).
pub fn run(spec: &ExperimentSpec, out: Option<&FsPath>) -> Result<RunReport> {
    spec.validate()?;
    let mut art = Artifacts::default();
    let paths = if spec.diagnostics.iter().any(DiagnosticSpec::needs_paths) {
        simulate(spec)?
    } else {
        Vec::new()
    };
    for d in &spec.diagnostics {
        apply(spec, d, &paths, &mut art)?;
    }
    art.add_json(
        "verdicts.json",
        &json!({"passed": art.passed(), "verdicts": &art.verdicts}),
    )?;
    let mut outputs = art.names();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        name: &spec.name,
        code_version: env!("CARGO_PKG_VERSION"),
        seed: spec.seed,
        spec,
        outputs,
    };
    art.add_json("manifest.json", &manifest)?;
    let dir = spec.output_dir(out);
    art.write(&dir)?;
    Ok(RunReport { dir, artifacts: art })
}

fn initial_frequencies(spec: &ExperimentSpec, model: &dyn SdeModel, stream: &RngStream, block: std::ops::Range<usize>) -> Result<Vec<f64>> {
    let init = spec.initial.as_ref().ok_or_else(|| config("simulation needs an initial block"))?;
    match (&init.values, &init.law) {
        (Some(v), None) => {
            if v.len() != block.len() {
                return Err(config(format!("{} initial values for {} demes", v.len(), block.len())));
            }
            Ok(v.clone())
        }
        (None, Some(law)) => {
            let all = sample_initial(model, stream, |_, g| law.draw(g));
            Ok(all[block].to_vec())
        }
        _ => Err(config("initial block needs exactly one of `law` and `values`")),
    }
}

fn limit_model<'g>(spec: &ExperimentSpec, graph: Option<&'g DemeGraph>) -> Result<Box<dyn SdeModel + 'g>> {
    let wp = spec.wf_params()?;
    let theta = spec.scaling.and_then(|s| s.theta);
    Ok(match spec.model {
        ModelKind::Wf => Box::new(wf_spatial_model(wp, graph.expect("validated"))?),
        ModelKind::Meanfield => Box::new(meanfield_model(wp, graph.expect("validated").len())?),
        ModelKind::MckeanVlasov => {
            let particles = graph.map_or(default_d_ref(), DemeGraph::len);
            Box::new(mckean_vlasov_model(wp, particles, ParticleAverage)?)
        }
        ModelKind::FrozenTheta => Box::new(frozen_theta_model(wp, theta.expect("validated"))?),
        ModelKind::SingleColony => Box::new(single_colony_model(wp)?),
        ModelKind::Micro | ModelKind::AnalyticsOnly => unreachable!("not a limit model"),
    })
}

/// One path per replica, in replica order.
pub fn simulate(spec: &ExperimentSpec) -> Result<Vec<Path>> {
    let cfg = spec.integrator.expect("validated");
    let graph = spec.graph()?;
    if spec.model == ModelKind::Micro {
        let eco = spec.ecology.expect("validated");
        let s = spec.scaling.expect("validated");
        let eq = Equilibrium::new(eco)?;
        let mut sched = ScalingSchedule::new(s.kappa, s.alpha, s.beta);
        if let Some(f) = s.iota_floor {
            sched.iota_floor = f;
        }
        let graph = graph.expect("validated");
        let n = s.n.unwrap_or(1.0);
        let d = graph.len();
        let probe = lvwf_core::micro::hfp_model(eco, sched.params(n, &eq), &graph)?;
        let init = spec.initial.clone().unwrap_or(InitialSpec {
            law: None,
            values: None,
            hosts: None,
            parasites: None,
        });
        return (0..spec.replicas)
            .into_par_iter()
            .map(|r| {
                let stream = RngStream::new(spec.seed, r as u64);
                let f = initial_frequencies(spec, &probe, &stream, d..2 * d)?;
                let mut x0 = HfpState::at_equilibrium(&eq, &f);
                if let Some(h) = init.hosts {
                    x0.h = vec![h; d];
                }
                if let Some(p) = init.parasites {
                    x0.p = vec![p; d];
                }
                rescaled_frequency_run(&eq, &sched, &graph, n, cfg.t_end, &x0, &cfg, &stream)
            })
            .collect();
    }
    let model = limit_model(spec, graph.as_ref())?;
    let dim = model.dim();
    (0..spec.replicas)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(spec.seed, r as u64);
            let x0 = initial_frequencies(spec, model.as_ref(), &stream, 0..dim)?;
            integrate(model.as_ref(), &x0, &cfg, &stream).map_err(|e| match e {
                Error::NonFiniteState { step, component, .. } => Error::NonFiniteState {
                    step,
                    component,
                    replica: Some(r),
                },
                other => other,
            })
        })
        .collect()
}

fn series_of(paths: &[Path], f: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<Vec<Vec<f64>>> {
    paths
        .par_iter()
        .map(|p| p.states.iter().map(|x| f(x)).collect())
        .collect()
}

fn apply(spec: &ExperimentSpec, d: &DiagnosticSpec, paths: &[Path], art: &mut Artifacts) -> Result<()> {
    match d {
        DiagnosticSpec::Invasion { expect_dies_out } => {
            let report = invasion_criterion(&spec.wf_params()?)?;
            art.add_json("invasion.json", &report)?;
            if let Some(expect) = expect_dies_out {
                art.verdicts.push(Verdict::new(
                    "invasion",
                    report.dies_out == *expect,
                    json!({"dies_out": report.dies_out, "expected": expect, "integral": report.integral}),
                ));
            }
        }
        DiagnosticSpec::Stationary { cdf_points } => {
            let theta = spec.scaling.and_then(|s| s.theta).expect("validated");
            let sm = StationaryModel::new(spec.wf_params()?, theta)?;
            let psi_moment = sm.stationary_moment(|z| 1.0 / (sm.wp.a - z))?;
            art.add_json(
                "stationary.json",
                &json!({"theta": theta, "u": sm.u, "v": sm.v, "c_theta": sm.c_theta, "moment_psi": psi_moment}),
            )?;
            let table = sm.cdf_table(*cdf_points)?;
            art.add_csv("stationary_cdf.csv", |w| table.write_csv(w))?;
        }
        DiagnosticSpec::GammaIdentity { theta } => {
            let residual = lvwf_core::analytics::gamma_identity_residual(&spec.wf_params()?, *theta)?;
            art.add_json("gamma_identity.json", &json!({"theta": theta, "residual": residual}))?;
            art.verdicts.push(Verdict::new(
                "gamma_identity",
                residual.abs() < 1e-10,
                json!({"residual": residual, "tolerance": 1e-10}),
            ));
        }
        DiagnosticSpec::Fixation { mean_z0, theta } => {
            let class = fixation_classify(&spec.wf_params()?, *mean_z0, *theta)?;
            art.add_json("fixation.json", &class)?;
        }
        DiagnosticSpec::ScaleFunction { points } => {
            let m = InvasionModel::new(spec.wf_params()?)?;
            let mut buf = String::from("z,s,S\n");
            for k in 0..*points {
                let z = k as f64 / *points as f64;
                let (s, big) = m.scale_function(z)?;
                buf.push_str(&format!("{z},{s},{big}\n"));
            }
            art.add("scale_function.csv", buf.into_bytes());
        }
        DiagnosticSpec::Ensemble { histogram_bins } => {
            let first = &paths[0];
            let mut names = first.names.clone();
            let limit = spec.model.is_limit();
            if limit {
                names.push("mean".into());
            }
            let series: Vec<ObservedSeries> = paths
                .iter()
                .map(|p| {
                    let dim = p.names.len();
                    let mut values: Vec<Vec<f64>> = (0..dim).map(|i| p.component(i)).collect();
                    if limit {
                        values.push(p.states.iter().map(|x| x.iter().sum::<f64>() / dim as f64).collect());
                    }
                    ObservedSeries {
                        times: p.times.clone(),
                        values,
                    }
                })
                .collect();
            let stats = EnsembleStats::reduce(&series, &names, *histogram_bins)?;
            art.add_csv("ensemble.csv", |w| stats.write_csv(w))?;
            if histogram_bins.is_some() {
                art.add_json("ensemble.json", &stats)?;
            }
        }
        DiagnosticSpec::Paths { count } => {
            for (r, p) in paths.iter().take(*count).enumerate() {
                art.add_csv(&format!("path_{r:04}.csv"), |w| p.write_csv(w))?;
            }
        }
        DiagnosticSpec::Deviation => {
            let (eq, graph, n) = micro_context(spec)?;
            let devs: Vec<_> = paths
                .par_iter()
                .map(|p| deviation_statistic(p, &eq, &graph, n))
                .collect::<Result<_>>()?;
            let est = ensemble_deviation(&devs)?;
            art.add_csv("deviation.csv", |w| est.write_csv(w))?;
        }
        DiagnosticSpec::MomentMonitor { which, max_ratio } => {
            let (eq, graph, _) = micro_context(spec)?;
            let mut details = Vec::new();
            let mut passed = true;
            for &kind in which {
                let per: Vec<Vec<f64>> = paths
                    .par_iter()
                    .map(|p| moment_monitor(p, &eq.eco, &graph, kind))
                    .collect::<Result<_>>()?;
                let est = SeriesEstimate::from_replicas(&paths[0].times, &per)?;
                let ratio = est.value.iter().copied().fold(f64::NEG_INFINITY, f64::max) / est.value[0];
                passed &= ratio <= *max_ratio;
                details.push(json!({"monitor": kind.name(), "max_over_initial": ratio}));
                art.add_csv(&format!("moment_{}.csv", kind.name()), |w| est.write_csv(w))?;
            }
            art.verdicts.push(Verdict::new(
                "moment_monitor",
                passed,
                json!({"max_ratio": max_ratio, "monitors": details}),
            ));
        }
        DiagnosticSpec::Lyapunov => {
            let (eq, graph, _) = micro_context(spec)?;
            let dd = graph.len();
            let sigma = graph.sigma().to_vec();
            let per = series_of(paths, |x| {
                (0..dd).try_fold(0.0, |acc, i| Ok(acc + sigma[i] * lyapunov_value(&eq, x[i], x[2 * dd + i], x[dd + i])?))
            })?;
            let est = SeriesEstimate::from_replicas(&paths[0].times, &per)?;
            art.add_csv("lyapunov.csv", |w| est.write_csv(w))?;
        }
        DiagnosticSpec::MonotoneMoment => {
            let wp = spec.wf_params()?;
            let per = series_of(paths, |x| Ok(x.iter().map(|&z| wp.psi(z)).sum::<f64>() / x.len() as f64))?;
            let est = SeriesEstimate::from_replicas(&paths[0].times, &per)?;
            art.add_csv("psi_mean.csv", |w| est.write_csv(w))?;
            let report = monotone_moment_check(&paths[0].times, &per, &wp)?;
            art.add_json("monotone_moment.json", &report)?;
            art.verdicts.push(Verdict::new("monotone_moment", report.passed, serde_json::to_value(report)?));
        }
        DiagnosticSpec::KsStationary { burn_in, max_distance } => {
            let theta = spec.scaling.and_then(|s| s.theta).expect("validated");
            let sm = StationaryModel::new(spec.wf_params()?, theta)?;
            let table = sm.cdf_table(lvwf_core::analytics::CDF_GRID)?;
            let samples: Vec<f64> = paths
                .iter()
                .flat_map(|p| p.times.iter().zip(&p.states).filter(|(t, _)| **t > *burn_in).map(|(_, x)| x[0]))
                .collect();
            let ks = ks_distance(&samples, &table)?;
            art.add_json("ks_stationary.json", &json!({"ks": ks, "samples": samples.len(), "theta": theta}))?;
            if let Some(max) = max_distance {
                art.verdicts.push(Verdict::new("ks_stationary", ks < *max, json!({"ks": ks, "max_distance": max})));
            }
        }
        DiagnosticSpec::Coupling { d_list, d_ref, records, max_ratio } => {
            let cfg = spec.integrator.expect("validated");
            let init = spec
                .initial
                .as_ref()
                .and_then(|i| i.law)
                .ok_or_else(|| config("coupling needs initial.law"))?;
            let cc = CouplingConfig {
                d_list: d_list.clone(),
                d_ref: *d_ref,
                t_end: cfg.t_end,
                dt: cfg.dt,
                records: *records,
                replicas: spec.replicas,
                seed: spec.seed,
                init,
            };
            let table = coupling_experiment(&spec.wf_params()?, &cc)?;
            art.add_csv("coupling.csv", |w| table.write_csv(w))?;
            if let Some(max) = max_ratio {
                let at_end: Vec<f64> = d_list
                    .iter()
                    .filter_map(|&dd| table.at(dd, cfg.t_end).map(|r| r.sqrt_d_error))
                    .collect();
                let hi = at_end.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = at_end.iter().copied().fold(f64::INFINITY, f64::min);
                art.verdicts.push(Verdict::new(
                    "coupling",
                    hi / lo <= *max,
                    json!({"sqrtD_error": at_end, "ratio": hi / lo, "max_ratio": max}),
                ));
            }
        }
    }
    Ok(())
}

fn micro_context(spec: &ExperimentSpec) -> Result<(Equilibrium, DemeGraph, f64)> {
    let eq = Equilibrium::new(spec.ecology.expect("validated"))?;
    let graph = spec.graph()?.expect("validated");
    Ok((eq, graph, spec.scaling.and_then(|s| s.n).unwrap_or(1.0)))
}

/// Process exit status of a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}
