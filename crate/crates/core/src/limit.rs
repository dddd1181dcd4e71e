//! Limit dynamics of the altruist frequency: the spatial Wright-Fisher SDE
//! with frequency-dependent migration, its finite mean-field version, the
//! McKean-Vlasov particle system, the frozen-θ equation, the single-colony
//! SDE, and the synchronous-coupling experiment for propagation of chaos.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DemeGraph;
use crate::sde::{
    integrate_observed, sample_initial, Domain, IntegratorConfig, Moments, NoiseLabel, Relabeled, RngStream,
    SdeModel,
};

/// Constants of the limit models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WfParams {
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
}

impl WfParams {
    /// Rates may be zero (neutral or migration-free runs); `a` must exceed 1.
    pub fn new(kappa: f64, alpha: f64, beta: f64, a: f64) -> Result<Self> {
        let wp = Self { kappa, alpha, beta, a };
        wp.validate()?;
        Ok(wp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("must be > 1, got {}", self.a),
            });
        }
        Ok(())
    }

    /// Strict positivity of `kappa`, `alpha`, `beta`, needed by the analytics.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        for (name, v) in [("kappa", self.kappa), ("alpha", self.alpha), ("beta", self.beta)] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// `sqrt(beta (a - x) x (1 - x))`
    #[inline]
    pub fn noise(&self, x: f64) -> f64 {
        (self.beta * (self.a - x) * x * (1.0 - x)).max(0.0).sqrt()
    }

    /// Mean-field drift `kappa (a-x)((a-x) theta - 1) - alpha x (1-x)`.
    #[inline]
    pub fn xi(&self, theta: f64, x: f64) -> f64 {
        let d = self.a - x;
        self.kappa * d * (d * theta - 1.0) - self.alpha * x * (1.0 - x)
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        1.0 / (self.a - x)
    }

    /// The open interval of admissible `theta = E[1/(a - Z)]`.
    pub fn theta_bounds(&self) -> (f64, f64) {
        (1.0 / self.a, 1.0 / (self.a - 1.0))
    }
}

fn unit_names(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}[{i}]")).collect()
}

/// Spatial Wright-Fisher diffusion on a deme graph.
#[derive(Debug, Clone)]
pub struct WfSpatialModel<'g> {
    pub wp: WfParams,
    pub graph: &'g DemeGraph,
}

pub fn wf_spatial_model(wp: WfParams, graph: &DemeGraph) -> Result<WfSpatialModel<'_>> {
    wp.validate()?;
    Ok(WfSpatialModel { wp, graph })
}

impl SdeModel for WfSpatialModel<'_> {
    fn dim(&self) -> usize {
        self.graph.len()
    }

    fn domain(&self, _: usize) -> Domain {
        Domain::Unit
    }

    fn drift(&self, x: &[f64], _: f64, out: &mut [f64]) {
        let WfParams { kappa, alpha, a, .. } = self.wp;
        for (i, o) in out.iter_mut().enumerate() {
            let mig: f64 = self
                .graph
                .row(i)
                .iter()
                .map(|&(j, w)| w * (a - x[i]) / (a - x[j]) * (x[j] - x[i]))
                .sum();
            *o = kappa * mig - alpha * x[i] * (1.0 - x[i]);
        }
    }

    fn diffusion(&self, x: &[f64], _: f64, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.wp.noise(v);
        }
    }

    fn component_names(&self) -> Vec<String> {
        unit_names("X", self.graph.len())
    }
}

/// Source of the self-consistent mean `E[1/(a - Z_t)]`.
pub trait ThetaProvider: Sync {
    fn theta(&self, wp: &WfParams, particles: &[f64]) -> f64;
}

/// Empirical average of `1/(a - x)` over the particles.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParticleAverage;

impl ThetaProvider for ParticleAverage {
    #[inline]
    fn theta(&self, wp: &WfParams, particles: &[f64]) -> f64 {
        particles.iter().map(|&x| wp.psi(x)).sum::<f64>() / particles.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrozenTheta(pub f64);

impl ThetaProvider for FrozenTheta {
    #[inline]
    fn theta(&self, _: &WfParams, _: &[f64]) -> f64 {
        self.0
    }
}

/// `D` exchangeable particles driven by `xi(theta_t, x)` with `theta_t`
/// supplied by the provider.
#[derive(Debug, Clone)]
pub struct McKeanVlasovModel<P> {
    pub wp: WfParams,
    pub particles: usize,
    pub provider: P,
}

pub fn mckean_vlasov_model<P: ThetaProvider>(
    wp: WfParams,
    particles: usize,
    provider: P,
) -> Result<McKeanVlasovModel<P>> {
    wp.validate()?;
    if particles == 0 {
        return Err(Error::InvalidSize(0));
    }
    Ok(McKeanVlasovModel {
        wp,
        particles,
        provider,
    })
}

impl<P: ThetaProvider> SdeModel for McKeanVlasovModel<P> {
    fn dim(&self) -> usize {
        self.particles
    }

    fn domain(&self, _: usize) -> Domain {
        Domain::Unit
    }

    fn drift(&self, x: &[f64], _: f64, out: &mut [f64]) {
        let theta = self.provider.theta(&self.wp, x);
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.wp.xi(theta, v);
        }
    }

    fn diffusion(&self, x: &[f64], _: f64, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.wp.noise(v);
        }
    }

    fn component_names(&self) -> Vec<String> {
        unit_names("Z", self.particles)
    }
}

/// Finite mean-field system: every deme sees the uniform average over all
/// `D` demes, itself included.
pub type MeanFieldModel = McKeanVlasovModel<ParticleAverage>;

pub fn meanfield_model(wp: WfParams, demes: usize) -> Result<MeanFieldModel> {
    mckean_vlasov_model(wp, demes, ParticleAverage)
}

/// Scalar SDE with the mean frozen at `theta`.
#[derive(Debug, Clone, Copy)]
pub struct FrozenThetaModel {
    pub wp: WfParams,
    pub theta: f64,
}

pub fn frozen_theta_model(wp: WfParams, theta: f64) -> Result<FrozenThetaModel> {
    wp.validate()?;
    let (lo, hi) = wp.theta_bounds();
    if !(theta > lo && theta < hi) {
        return Err(Error::ThetaOutOfRange { theta, lo, hi });
    }
    Ok(FrozenThetaModel { wp, theta })
}

impl SdeModel for FrozenThetaModel {
    fn dim(&self) -> usize {
        1
    }

    fn domain(&self, _: usize) -> Domain {
        Domain::Unit
    }

    fn drift(&self, x: &[f64], _: f64, out: &mut [f64]) {
        out[0] = self.wp.xi(self.theta, x[0]);
    }

    fn diffusion(&self, x: &[f64], _: f64, out: &mut [f64]) {
        out[0] = self.wp.noise(x[0]);
    }

    fn component_names(&self) -> Vec<String> {
        vec!["Z".into()]
    }
}

/// Frequency in a freshly colonised deme while the rest of the system is
/// empty; 0 is absorbing.
#[derive(Debug, Clone, Copy)]
pub struct SingleColonyModel {
    pub wp: WfParams,
}

pub fn single_colony_model(wp: WfParams) -> Result<SingleColonyModel> {
    wp.validate()?;
    Ok(SingleColonyModel { wp })
}

impl SingleColonyModel {
    #[inline]
    pub fn drift_at(&self, y: f64) -> f64 {
        let WfParams { kappa, alpha, a, .. } = self.wp;
        -(kappa / a) * y * (a - y) - alpha * y * (1.0 - y)
    }
}

impl SdeModel for SingleColonyModel {
    fn dim(&self) -> usize {
        1
    }

    fn domain(&self, _: usize) -> Domain {
        Domain::Unit
    }

    fn drift(&self, x: &[f64], _: f64, out: &mut [f64]) {
        out[0] = self.drift_at(x[0]);
    }

    fn diffusion(&self, x: &[f64], _: f64, out: &mut [f64]) {
        out[0] = self.wp.noise(x[0]);
    }

    fn component_names(&self) -> Vec<String> {
        vec!["Y".into()]
    }
}

/// Growth/Lipschitz constant `max{beta a, kappa a^2, kappa + alpha, 1/(a-1)^2}`.
pub fn lipschitz_constant(wp: &WfParams) -> f64 {
    let a = wp.a;
    [
        wp.beta * a,
        wp.kappa * a * a,
        wp.kappa + wp.alpha,
        1.0 / ((a - 1.0) * (a - 1.0)),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Initial law of every particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl InitialLaw {
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            InitialLaw::Constant { value } => value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::Uniform { lo, hi } => (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi,
            InitialLaw::Constant { value } => (0.0..=1.0).contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("initial law {self:?} not inside [0, 1]")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub d_list: Vec<usize>,
    #[serde(default = "default_d_ref")]
    pub d_ref: usize,
    pub t_end: f64,
    #[serde(default = "default_coupling_dt")]
    pub dt: f64,
    /// Number of equal intervals of `[0, t_end]` at which errors are reported.
    #[serde(default = "default_records")]
    pub records: u64,
    pub replicas: usize,
    pub seed: u64,
    pub init: InitialLaw,
}

fn default_d_ref() -> usize {
    2048
}

fn default_coupling_dt() -> f64 {
    1e-3
}

fn default_records() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    #[serde(rename = "D")]
    pub d: usize,
    pub t: f64,
    pub error: f64,
    #[serde(rename = "sqrtD_error")]
    pub sqrt_d_error: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub rows: Vec<CouplingRow>,
}

impl CouplingTable {
    pub fn at(&self, d: usize, t: f64) -> Option<&CouplingRow> {
        self.rows
            .iter()
            .find(|r| r.d == d && (r.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Noise labels of a coupled system of `d` particles. Particle 0 always
/// shares the reference particle's stream; the others share the reference
/// streams only when `d == d_ref`, and are otherwise moved to a block no
/// other system uses.
fn coupled_labels(d: usize, d_ref: usize, block: u64) -> Vec<NoiseLabel> {
    (0..d)
        .map(|i| {
            let deme = if i == 0 || d == d_ref {
                i as u64
            } else {
                block * d_ref as u64 + i as u64
            };
            NoiseLabel { deme, channel: 0 }
        })
        .collect()
}

/// Mean-field particle systems of each size in `d_list`, synchronously
/// coupled through particle 0 to a reference system of size `d_ref`, which
/// stands in for the McKean-Vlasov limit. Reports the Monte Carlo estimate
/// of `E|X^D_t(0) - M_t|` and `sqrt(D)` times it.
pub fn coupling_experiment(wp: &WfParams, cfg: &CouplingConfig) -> Result<CouplingTable> {
    wp.validate()?;
    cfg.init.validate()?;
    if cfg.replicas == 0 || cfg.records == 0 {
        return Err(Error::Config("replicas and records must be >= 1".into()));
    }
    if cfg.d_list.iter().any(|&d| d == 0 || d > cfg.d_ref) {
        return Err(Error::Config(format!(
            "every D must lie in [1, d_ref = {}], got {:?}",
            cfg.d_ref, cfg.d_list
        )));
    }
    let steps = (cfg.t_end / cfg.dt).round() as u64;
    let stride = (steps / cfg.records).max(1);
    let icfg = IntegratorConfig::new(cfg.dt, cfg.t_end).with_stride(stride);

    let first_particle = |model: &dyn SdeModel, stream: &RngStream| -> Result<(Vec<f64>, Vec<f64>)> {
        let x0 = sample_initial(model, stream, |_, g| cfg.init.draw(g));
        let mut times = Vec::new();
        let mut vals = Vec::new();
        integrate_observed(model, &x0, &icfg, stream, |_, t, x| {
            times.push(t);
            vals.push(x[0]);
        })?;
        Ok((times, vals))
    };

    // per replica: times, and |X^D(0) - M| for each D and record
    let per_replica: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(cfg.seed, r as u64);
            let reference = Relabeled {
                inner: meanfield_model(*wp, cfg.d_ref)?,
                labels: coupled_labels(cfg.d_ref, cfg.d_ref, 0),
            };
            let (times, m) = first_particle(&reference, &stream)?;
            let mut errs = Vec::with_capacity(cfg.d_list.len());
            for (k, &d) in cfg.d_list.iter().enumerate() {
                let sys = Relabeled {
                    inner: meanfield_model(*wp, d)?,
                    labels: coupled_labels(d, cfg.d_ref, k as u64 + 1),
                };
                let (_, x) = first_particle(&sys, &stream)?;
                errs.push(x.iter().zip(&m).map(|(a, b)| (a - b).abs()).collect());
            }
            Ok((times, errs))
        })
        .collect::<Result<_>>()?;

    let times = per_replica[0].0.clone();
    let mut rows = Vec::new();
    for (k, &d) in cfg.d_list.iter().enumerate() {
        for (ti, &t) in times.iter().enumerate() {
            let mut mo = Moments::default();
            for (_, errs) in &per_replica {
                mo.push(errs[k][ti]);
            }
            let sd = (d as f64).sqrt();
            rows.push(CouplingRow {
                d,
                t,
                error: mo.mean,
                sqrt_d_error: sd * mo.mean,
                mc_stderr: mo.stderr(),
            });
        }
    }
    Ok(CouplingTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_deme_graph, GraphKind};
    use crate::sde::{integrate, RngStream};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn drift_of<M: SdeModel>(m: &M, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        m.drift(x, 1e-9, &mut out);
        out
    }

    #[test]
    fn wf_constant_profile_has_no_migration_drift() {
        let wp = WfParams::new(1.3, 0.7, 0.9, 2.5).unwrap();
        let g = build_deme_graph(GraphKind::Torus1d { demes: 5 }, 0.5).unwrap();
        let m = wf_spatial_model(wp, &g).unwrap();
        let b = drift_of(&m, &[0.4; 5]);
        for v in b {
            assert!((v - (-0.7 * 0.4 * 0.6)).abs() < 1e-15);
        }
    }

    #[test]
    fn wf_boundaries_absorb() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let g = build_deme_graph(GraphKind::CompleteUniform { demes: 3 }, 1.0).unwrap();
        let m = wf_spatial_model(wp, &g).unwrap();
        for v in [0.0, 1.0] {
            let x = [v; 3];
            assert!(drift_of(&m, &x).iter().all(|&b| b == 0.0));
            let mut s = [1.0; 3];
            m.diffusion(&x, 1e-9, &mut s);
            assert!(s.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn wf_two_deme_hand_value() {
        let wp = WfParams::new(1.0, 0.0, 1.0, 2.0).unwrap();
        let g = build_deme_graph(GraphKind::CompleteUniform { demes: 2 }, 1.0).unwrap();
        let m = wf_spatial_model(wp, &g).unwrap();
        let b = drift_of(&m, &[0.2, 0.8]);
        assert!((b[0] - 0.45).abs() < 1e-14, "{}", b[0]);
        let mf = meanfield_model(wp, 2).unwrap();
        let b2 = drift_of(&mf, &[0.2, 0.8]);
        assert!((b2[0] - 0.45).abs() < 1e-14, "{}", b2[0]);
    }

    #[test]
    fn meanfield_reductions() {
        let wp = WfParams::new(1.5, 0.8, 1.0, 2.0).unwrap();
        let m = meanfield_model(wp, 4).unwrap();
        let b = drift_of(&m, &[0.3; 4]);
        for v in b {
            assert!((v + 0.8 * 0.3 * 0.7).abs() < 1e-15);
        }
        let m1 = meanfield_model(wp, 1).unwrap();
        let b = drift_of(&m1, &[0.6]);
        assert!((b[0] + 0.8 * 0.6 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn meanfield_equals_uniform_wf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wp = WfParams::new(1.7, 0.4, 1.1, 1.8).unwrap();
        let g = build_deme_graph(GraphKind::CompleteUniform { demes: 6 }, 1.0).unwrap();
        let wf = wf_spatial_model(wp, &g).unwrap();
        let mf = meanfield_model(wp, 6).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
            for (a, b) in drift_of(&wf, &x).iter().zip(drift_of(&mf, &x)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frozen_theta_hand_values() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let m = frozen_theta_model(wp, 0.75).unwrap();
        let b = drift_of(&m, &[0.5]);
        assert!((b[0] + 0.0625).abs() < 1e-15);
        // theta at the lower end makes 0 a fixed point of the drift
        assert_eq!(wp.xi(1.0 / wp.a, 0.0), 0.0);
        assert!(matches!(
            frozen_theta_model(wp, 0.5),
            Err(Error::ThetaOutOfRange { .. })
        ));
        assert!(frozen_theta_model(wp, 1.0).is_err());
    }

    #[test]
    fn frozen_provider_matches_frozen_model() {
        let wp = WfParams::new(1.0, 0.5, 1.0, 2.0).unwrap();
        let mv = mckean_vlasov_model(wp, 3, FrozenTheta(0.7)).unwrap();
        let fz = frozen_theta_model(wp, 0.7).unwrap();
        let x = [0.1, 0.5, 0.9];
        let b = drift_of(&mv, &x);
        for (i, &v) in x.iter().enumerate() {
            assert_eq!(b[i], drift_of(&fz, &[v])[0]);
        }
    }

    #[test]
    fn mckean_vlasov_boundary_laws() {
        let wp = WfParams::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let m = meanfield_model(wp, 8).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 5.0).with_stride(500);
        for v in [0.0, 1.0] {
            let p = integrate(&m, &[v; 8], &cfg, &RngStream::new(3, 0)).unwrap();
            assert!(p.states.iter().all(|s| s.iter().all(|&z| z == v)));
        }
    }

    #[test]
    fn single_colony_values() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let m = single_colony_model(wp).unwrap();
        assert_eq!(m.drift_at(0.0), 0.0);
        assert_eq!(wp.noise(0.0), 0.0);
        assert!((m.drift_at(0.5) + 0.625).abs() < 1e-15);
        for k in 1..1000 {
            assert!(m.drift_at(k as f64 / 1000.0) < 0.0);
        }
    }

    #[test]
    fn lipschitz_values() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(lipschitz_constant(&wp), 4.0);
        let wp = WfParams::new(10.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(lipschitz_constant(&wp), 40.0);
        let near = WfParams::new(1.0, 1.0, 1.0, 1.0 + 1e-4).unwrap();
        assert!(lipschitz_constant(&near) > 1e7);
    }

    proptest! {
        #[test]
        fn lipschitz_inequalities(
            kappa in 0.01f64..5.0, alpha in 0.0f64..5.0, beta in 0.01f64..5.0, a in 1.05f64..6.0,
            u in 0.0f64..3.0, v in 0.0f64..3.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0,
        ) {
            let wp = WfParams::new(kappa, alpha, beta, a).unwrap();
            let l = lipschitz_constant(&wp);
            let (x, y) = if x >= y { (x, y) } else { (y, x) };
            let lhs = wp.xi(u, x) - wp.xi(v, y);
            let rhs = l * (u - v).max(0.0) + l * (x - y).max(0.0);
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
            prop_assert!((wp.psi(x) - wp.psi(y)).abs() <= l * (x - y).abs() + 1e-15);
            let s2 = beta * (a - x) * x * (1.0 - x);
            prop_assert!(s2 <= l * (x + x * x) + 1e-15);
        }
    }

    #[test]
    fn coupling_identical_reference_has_zero_error() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let cfg = CouplingConfig {
            d_list: vec![4, 16],
            d_ref: 16,
            t_end: 0.5,
            dt: 1e-2,
            records: 5,
            replicas: 8,
            seed: 1,
            init: InitialLaw::Uniform { lo: 0.3, hi: 0.7 },
        };
        let table = coupling_experiment(&wp, &cfg).unwrap();
        for r in &table.rows {
            if r.d == 16 {
                assert_eq!(r.error, 0.0);
            }
            if r.t == 0.0 {
                assert_eq!(r.error, 0.0);
            }
        }
        assert!(table.at(4, 0.5).unwrap().error > 0.0);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "D,t,error,sqrtD_error,mc_stderr");
    }

    #[test]
    fn coupling_rejects_oversized_systems() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let cfg = CouplingConfig {
            d_list: vec![32],
            d_ref: 16,
            t_end: 0.1,
            dt: 1e-2,
            records: 1,
            replicas: 1,
            seed: 1,
            init: InitialLaw::Constant { value: 0.5 },
        };
        assert!(coupling_experiment(&wp, &cfg).is_err());
    }
}
