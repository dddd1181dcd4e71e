//! Fixed-step Euler-Maruyama integration of diagonal-noise SDE systems with
//! boundary handling for square-root diffusions, seeded per-component noise
//! streams and order-independent ensemble reduction.

use std::io::Write;
use std::path::Path as FsPath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State space of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Frequencies, `[0, 1]`.
    Unit,
    /// Populations, `[0, inf)`.
    NonNegative,
    Real,
}

impl Domain {
    #[inline]
    pub fn clamp(self, x: f64) -> f64 {
        match self {
            Domain::Unit => x.clamp(0.0, 1.0),
            Domain::NonNegative => x.max(0.0),
            Domain::Real => x,
        }
    }

    #[inline]
    fn reflect(self, x: f64) -> f64 {
        match self {
            Domain::Unit => {
                let r = if x < 0.0 {
                    -x
                } else if x > 1.0 {
                    2.0 - x
                } else {
                    x
                };
                r.clamp(0.0, 1.0)
            }
            Domain::NonNegative => x.abs(),
            Domain::Real => x,
        }
    }

    pub fn contains(self, x: f64) -> bool {
        match self {
            Domain::Unit => (0.0..=1.0).contains(&x),
            Domain::NonNegative => x >= 0.0,
            Domain::Real => x.is_finite(),
        }
    }
}

/// Identifies the Brownian motion driving one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseLabel {
    pub deme: u64,
    pub channel: u16,
}

/// Channel reserved for drawing initial conditions.
pub const INIT_CHANNEL: u16 = u16::MAX;

/// A diagonal-noise SDE `dx_i = b_i(x) dt + s_i(x) dW_i`.
pub trait SdeModel: Sync {
    fn dim(&self) -> usize;

    fn domain(&self, component: usize) -> Domain;

    /// Writes `b(x)`. `floor` is the lower bound for denominators.
    fn drift(&self, x: &[f64], floor: f64, out: &mut [f64]);

    /// Writes `s(x)`. `x` has already been truncated into the domain.
    fn diffusion(&self, x: &[f64], floor: f64, out: &mut [f64]);

    fn noise_label(&self, component: usize) -> NoiseLabel {
        NoiseLabel {
            deme: component as u64,
            channel: 0,
        }
    }

    fn component_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x[{i}]")).collect()
    }
}

impl<M: SdeModel + ?Sized> SdeModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self, component: usize) -> Domain {
        (**self).domain(component)
    }
    fn drift(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        (**self).drift(x, floor, out)
    }
    fn diffusion(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        (**self).diffusion(x, floor, out)
    }
    fn noise_label(&self, component: usize) -> NoiseLabel {
        (**self).noise_label(component)
    }
    fn component_names(&self) -> Vec<String> {
        (**self).component_names()
    }
}

/// Wraps a model and overrides which noise stream drives each component.
pub struct Relabeled<M> {
    pub inner: M,
    pub labels: Vec<NoiseLabel>,
}

impl<M: SdeModel> SdeModel for Relabeled<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn domain(&self, component: usize) -> Domain {
        self.inner.domain(component)
    }
    fn drift(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        self.inner.drift(x, floor, out)
    }
    fn diffusion(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        self.inner.diffusion(x, floor, out)
    }
    fn noise_label(&self, component: usize) -> NoiseLabel {
        self.labels[component]
    }
    fn component_names(&self) -> Vec<String> {
        self.inner.component_names()
    }
}

/// Draws each component's initial value from its own init stream, so the
/// same label always receives the same value.
pub fn sample_initial<M, F>(model: &M, stream: &RngStream, mut draw: F) -> Vec<f64>
where
    M: SdeModel + ?Sized,
    F: FnMut(usize, &mut ChaCha8Rng) -> f64,
{
    (0..model.dim())
        .map(|i| {
            let label = model.noise_label(i);
            let mut g = stream.generator(NoiseLabel {
                deme: label.deme,
                channel: INIT_CHANNEL - label.channel,
            });
            draw(i, &mut g)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Diffusion evaluated at the truncated state; state clamped after each step.
    #[default]
    FullTruncation,
    /// Overshoots are mirrored back across the boundary, then clamped.
    ReflectClamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default)]
    pub boundary_policy: BoundaryPolicy,
    #[serde(default = "default_floor")]
    pub floor_eps: f64,
}

fn default_stride() -> u64 {
    1
}

fn default_floor() -> f64 {
    1e-9
}

pub const DEFAULT_DT: f64 = 1e-3;

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            record_stride: 1,
            boundary_policy: BoundaryPolicy::FullTruncation,
            floor_eps: default_floor(),
        }
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.boundary_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be >= 1".into()));
        }
        if !(self.floor_eps > 0.0 && self.floor_eps <= 1e-3) {
            return Err(Error::Config(format!(
                "floor_eps must lie in (0, 1e-3], got {}",
                self.floor_eps
            )));
        }
        Ok(())
    }

    /// Number of Euler steps to reach `t_end`.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Seed plus replica index. Each `(deme, channel)` label yields its own
/// generator, so relabelling or resizing a system never reshuffles the noise
/// of the components that remain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub replica: u64,
}

impl RngStream {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self { seed, replica }
    }

    pub fn generator(&self, label: NoiseLabel) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        key[16..24].copy_from_slice(&label.deme.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(label.channel as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub config: IntegratorConfig,
    pub stream: RngStream,
}

/// Recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub meta: PathMeta,
}

impl Path {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Column `component` over time.
    pub fn component(&self, component: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[component]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut rec = vec![t.to_string()];
            rec.extend(s.iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &FsPath) -> Result<()> {
        write_atomic(path, |f| self.write_csv(f))
    }
}

/// Writes through a temporary sibling file, then renames it into place.
pub fn write_atomic<F>(path: &FsPath, write: F) -> Result<()>
where
    F: FnOnce(&mut std::fs::File) -> Result<()>,
{
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        write(&mut f)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Integrates `model` from `x0`, calling `observe(step, t, x)` at every
/// recorded step (step 0 included).
pub fn integrate_observed<M, F>(
    model: &M,
    x0: &[f64],
    cfg: &IntegratorConfig,
    stream: &RngStream,
    mut observe: F,
) -> Result<()>
where
    M: SdeModel + ?Sized,
    F: FnMut(u64, f64, &[f64]),
{
    cfg.validate()?;
    let dim = model.dim();
    if x0.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "initial state has {} components, model has {dim}",
            x0.len()
        )));
    }
    let domains: Vec<Domain> = (0..dim).map(|i| model.domain(i)).collect();
    for (i, (&v, d)) in x0.iter().zip(&domains).enumerate() {
        if !d.contains(v) {
            return Err(Error::DomainError(format!(
                "initial component {i} = {v} outside {d:?}"
            )));
        }
    }
    let mut gens: Vec<ChaCha8Rng> = (0..dim)
        .map(|i| stream.generator(model.noise_label(i)))
        .collect();

    let steps = cfg.steps();
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let floor = cfg.floor_eps;
    let mut x = x0.to_vec();
    let mut trunc = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut s = vec![0.0; dim];

    observe(0, 0.0, &x);
    for step in 1..=steps {
        model.drift(&x, floor, &mut b);
        for i in 0..dim {
            trunc[i] = domains[i].clamp(x[i]);
        }
        model.diffusion(&trunc, floor, &mut s);
        for i in 0..dim {
            // Always draw, so the stream position depends only on the step.
            let xi: f64 = StandardNormal.sample(&mut gens[i]);
            let next = x[i] + b[i] * dt + s[i] * sqrt_dt * xi;
            if !next.is_finite() {
                return Err(Error::NonFiniteState {
                    step,
                    component: i,
                    replica: None,
                });
            }
            x[i] = match cfg.boundary_policy {
                BoundaryPolicy::FullTruncation => domains[i].clamp(next),
                BoundaryPolicy::ReflectClamp => domains[i].reflect(next),
            };
        }
        if step % cfg.record_stride == 0 {
            observe(step, step as f64 * dt, &x);
        }
    }
    Ok(())
}

pub fn integrate<M: SdeModel + ?Sized>(
    model: &M,
    x0: &[f64],
    cfg: &IntegratorConfig,
    stream: &RngStream,
) -> Result<Path> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate_observed(model, x0, cfg, stream, |_, t, x| {
        times.push(t);
        states.push(x.to_vec());
    })?;
    Ok(Path {
        times,
        states,
        names: model.component_names(),
        meta: PathMeta {
            config: *cfg,
            stream: *stream,
        },
    })
}

type StateFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

/// Scalar functional of the state recorded along each replica.
pub struct Observable<'a> {
    pub name: String,
    f: Box<StateFn<'a>>,
}

impl<'a> Observable<'a> {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Sync + 'a) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }

    pub fn component(name: impl Into<String>, i: usize) -> Self {
        Self::new(name, move |x: &[f64]| x[i])
    }

    /// Arithmetic mean over a range of components.
    pub fn mean_of(name: impl Into<String>, range: std::ops::Range<usize>) -> Self {
        Self::new(name, move |x: &[f64]| {
            let s = &x[range.clone()];
            s.iter().sum::<f64>() / s.len() as f64
        })
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Observable values of one replica, `values[observable][record]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Runs `replicas` independent copies and records the observables. The
/// result is ordered by replica index whatever the thread schedule.
pub fn run_replicas<M, S>(
    model: &M,
    x0_sampler: S,
    cfg: &IntegratorConfig,
    base_seed: u64,
    replicas: usize,
    observables: &[Observable<'_>],
) -> Result<Vec<ObservedSeries>>
where
    M: SdeModel + ?Sized,
    S: Fn(&RngStream) -> Vec<f64> + Sync,
{
    if replicas == 0 {
        return Err(Error::Config("replica count must be >= 1".into()));
    }
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(base_seed, r as u64);
            let x0 = x0_sampler(&stream);
            let mut times = Vec::new();
            let mut values = vec![Vec::new(); observables.len()];
            integrate_observed(model, &x0, cfg, &stream, |_, t, x| {
                times.push(t);
                for (o, v) in observables.iter().zip(values.iter_mut()) {
                    v.push(o.eval(x));
                }
            })
            .map_err(|e| match e {
                Error::NonFiniteState {
                    step, component, ..
                } => Error::NonFiniteState {
                    step,
                    component,
                    replica: Some(r),
                },
                other => other,
            })?;
            Ok(ObservedSeries { times, values })
        })
        .collect()
}

/// Streaming mean/variance accumulator with an associative merge.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }
}

/// Equal-width histogram on `[0, 1]`; values outside are clamped to the end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bins: usize) -> Self {
        Self {
            edges: (0..=bins).map(|k| k as f64 / bins as f64).collect(),
            counts: vec![0; bins],
        }
    }

    pub fn push(&mut self, x: f64) {
        let bins = self.counts.len();
        let k = ((x * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        self.counts[k] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableStats {
    pub name: String,
    pub moments: Vec<Moments>,
    /// Histogram per recorded time, when requested.
    pub histograms: Option<Vec<Histogram>>,
}

impl ObservableStats {
    pub fn mean(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.mean).collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.moments.iter().map(Moments::variance).collect()
    }

    pub fn stderr(&self) -> Vec<f64> {
        self.moments.iter().map(Moments::stderr).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub replicas: usize,
    pub observables: Vec<ObservableStats>,
}

impl EnsembleStats {
    /// Reduces per-replica series in replica order.
    pub fn reduce(series: &[ObservedSeries], names: &[String], bins: Option<usize>) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::Config("no replicas to reduce".into()))?;
        let n_t = first.times.len();
        let mut observables: Vec<ObservableStats> = names
            .iter()
            .map(|name| ObservableStats {
                name: name.clone(),
                moments: vec![Moments::default(); n_t],
                histograms: bins.map(|b| vec![Histogram::new(b); n_t]),
            })
            .collect();
        for s in series {
            if s.times.len() != n_t || s.values.len() != names.len() {
                return Err(Error::ShapeMismatch("replica series differ in shape".into()));
            }
            for (stats, vals) in observables.iter_mut().zip(&s.values) {
                for (m, &v) in stats.moments.iter_mut().zip(vals) {
                    m.push(v);
                }
                if let Some(h) = stats.histograms.as_mut() {
                    for (hist, &v) in h.iter_mut().zip(vals) {
                        hist.push(v);
                    }
                }
            }
        }
        Ok(Self {
            times: first.times.clone(),
            replicas: series.len(),
            observables,
        })
    }

    pub fn get(&self, name: &str) -> Option<&ObservableStats> {
        self.observables.iter().find(|o| o.name == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for o in &self.observables {
            header.push(format!("{}_mean", o.name));
            header.push(format!("{}_var", o.name));
            header.push(format!("{}_stderr", o.name));
        }
        wr.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            for o in &self.observables {
                let m = &o.moments[k];
                rec.push(m.mean.to_string());
                rec.push(m.variance().to_string());
                rec.push(m.stderr().to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs the replicas and reduces them to per-time mean, variance and
/// (optionally) `[0,1]` histograms of every observable.
pub fn ensemble<M, S>(
    model: &M,
    x0_sampler: S,
    cfg: &IntegratorConfig,
    base_seed: u64,
    replicas: usize,
    observables: &[Observable<'_>],
    histogram_bins: Option<usize>,
) -> Result<EnsembleStats>
where
    M: SdeModel + ?Sized,
    S: Fn(&RngStream) -> Vec<f64> + Sync,
{
    let series = run_replicas(model, x0_sampler, cfg, base_seed, replicas, observables)?;
    let names: Vec<String> = observables.iter().map(|o| o.name.clone()).collect();
    EnsembleStats::reduce(&series, &names, histogram_bins)
}
