//! Spatial stochastic Lotka-Volterra host/parasite system with altruist (A)
//! and cheater (C) hosts, in population form `(A, C, P)` and in
//! total/frequency form `(H, F, P)`.
//!
//! Flat state layouts are deme-major blocks: `[A.., C.., P..]` and
//! `[H.., F.., P..]`. Noise channels are 0, 1, 2 for the three blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DemeGraph;
use crate::params::{EcologyParams, Equilibrium, ScalingParams};
use crate::sde::{integrate_observed, Domain, IntegratorConfig, NoiseLabel, Path, PathMeta, RngStream, SdeModel};

#[derive(Debug, Clone, PartialEq)]
pub struct AcpState {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HfpState {
    pub h: Vec<f64>,
    pub f: Vec<f64>,
    pub p: Vec<f64>,
}

impl AcpState {
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.a[..], &self.c[..], &self.p[..]].concat()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let d = x.len() / 3;
        Self {
            a: x[..d].to_vec(),
            c: x[d..2 * d].to_vec(),
            p: x[2 * d..].to_vec(),
        }
    }

    pub fn to_hfp(&self, floor: f64) -> HfpState {
        let h: Vec<f64> = self.a.iter().zip(&self.c).map(|(a, c)| a + c).collect();
        let f = self
            .a
            .iter()
            .zip(&h)
            .map(|(a, h)| (a / h.max(floor)).clamp(0.0, 1.0))
            .collect();
        HfpState {
            h,
            f,
            p: self.p.clone(),
        }
    }
}

impl HfpState {
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.h[..], &self.f[..], &self.p[..]].concat()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let d = x.len() / 3;
        Self {
            h: x[..d].to_vec(),
            f: x[d..2 * d].to_vec(),
            p: x[2 * d..].to_vec(),
        }
    }

    /// Hosts and parasites at their equilibria for the given frequencies.
    pub fn at_equilibrium(eq: &Equilibrium, f: &[f64]) -> Self {
        Self {
            h: f.iter().map(|&x| eq.h(x)).collect(),
            f: f.to_vec(),
            p: f.iter().map(|&x| eq.p(x)).collect(),
        }
    }

    pub fn to_acp(&self) -> AcpState {
        AcpState {
            a: self.h.iter().zip(&self.f).map(|(h, f)| h * f).collect(),
            c: self.h.iter().zip(&self.f).map(|(h, f)| h * (1.0 - f)).collect(),
            p: self.p.clone(),
        }
    }
}

fn block_names(d: usize, blocks: [&str; 3]) -> Vec<String> {
    blocks
        .iter()
        .flat_map(|b| (0..d).map(move |i| format!("{b}[{i}]")))
        .collect()
}

fn block_label(d: usize, component: usize) -> NoiseLabel {
    NoiseLabel {
        deme: (component % d) as u64,
        channel: (component / d) as u16,
    }
}

/// `sum_j m(i,j) (v_j - v_i)`
#[inline]
fn migration(g: &DemeGraph, v: &[f64], i: usize) -> f64 {
    g.row(i).iter().map(|&(j, w)| w * (v[j] - v[i])).sum()
}

/// Population form.
#[derive(Debug, Clone)]
pub struct AcpModel<'g> {
    pub eco: EcologyParams,
    pub sp: ScalingParams,
    pub graph: &'g DemeGraph,
}

pub fn acp_model<'g>(eco: EcologyParams, sp: ScalingParams, graph: &'g DemeGraph) -> Result<AcpModel<'g>> {
    eco.validate()?;
    sp.validate()?;
    Ok(AcpModel { eco, sp, graph })
}

impl SdeModel for AcpModel<'_> {
    fn dim(&self) -> usize {
        3 * self.graph.len()
    }

    fn domain(&self, _: usize) -> Domain {
        Domain::NonNegative
    }

    fn drift(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        let d = self.graph.len();
        let (a, rest) = x.split_at(d);
        let (c, p) = rest.split_at(d);
        let e = &self.eco;
        let sp = &self.sp;
        for i in 0..d {
            let h = a[i] + c[i];
            let growth = e.lambda * (1.0 - h / e.k) - e.delta * p[i];
            let hf = h.max(floor);
            out[i] = sp.kappa_h * migration(self.graph, a, i) + a[i] * (growth - sp.alpha) + sp.iota_h * a[i] / hf;
            out[d + i] = sp.kappa_h * migration(self.graph, c, i) + c[i] * growth + sp.iota_h * c[i] / hf;
            out[2 * d + i] = sp.kappa_p * migration(self.graph, p, i)
                + p[i] * (-e.nu - e.gamma * p[i] + e.eta * c[i] + (e.eta - e.rho) * a[i])
                + sp.iota_p;
        }
    }

    fn diffusion(&self, x: &[f64], _: f64, out: &mut [f64]) {
        let d = self.graph.len();
        for (k, (o, v)) in out.iter_mut().zip(x).enumerate() {
            let beta = if k < 2 * d { self.sp.beta_h } else { self.sp.beta_p };
            *o = (beta * v).sqrt();
        }
    }

    fn noise_label(&self, component: usize) -> NoiseLabel {
        block_label(self.graph.len(), component)
    }

    fn component_names(&self) -> Vec<String> {
        block_names(self.graph.len(), ["A", "C", "P"])
    }
}

/// Total-host / altruist-frequency form.
#[derive(Debug, Clone)]
pub struct HfpModel<'g> {
    pub eco: EcologyParams,
    pub sp: ScalingParams,
    pub graph: &'g DemeGraph,
}

pub fn hfp_model<'g>(eco: EcologyParams, sp: ScalingParams, graph: &'g DemeGraph) -> Result<HfpModel<'g>> {
    eco.validate()?;
    sp.validate()?;
    Ok(HfpModel { eco, sp, graph })
}

impl SdeModel for HfpModel<'_> {
    fn dim(&self) -> usize {
        3 * self.graph.len()
    }

    fn domain(&self, component: usize) -> Domain {
        if component / self.graph.len() == 1 {
            Domain::Unit
        } else {
            Domain::NonNegative
        }
    }

    fn drift(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        let d = self.graph.len();
        let (h, rest) = x.split_at(d);
        let (f, p) = rest.split_at(d);
        let e = &self.eco;
        let sp = &self.sp;
        let max_ratio = 1.0 / floor;
        for i in 0..d {
            let mut host_in = 0.0;
            let mut para_in = 0.0;
            let mut freq_mig = 0.0;
            let hi = h[i].max(floor);
            for &(j, w) in self.graph.row(i) {
                host_in += w * h[j];
                para_in += w * p[j];
                freq_mig += w * (f[j] - f[i]) * (h[j] / hi).clamp(0.0, max_ratio);
            }
            out[i] = sp.kappa_h * host_in + (e.lambda - sp.kappa_h - sp.alpha * f[i]) * h[i]
                - e.lambda / e.k * h[i] * h[i]
                - e.delta * p[i] * h[i]
                + sp.iota_h;
            out[d + i] = sp.kappa_h * freq_mig - sp.alpha * f[i] * (1.0 - f[i]);
            out[2 * d + i] = sp.kappa_p * para_in - (sp.kappa_p + e.nu) * p[i] - e.gamma * p[i] * p[i]
                + (e.eta - e.rho * f[i]) * p[i] * h[i]
                + sp.iota_p;
        }
    }

    fn diffusion(&self, x: &[f64], floor: f64, out: &mut [f64]) {
        let d = self.graph.len();
        let sp = &self.sp;
        for i in 0..d {
            let (h, f, p) = (x[i], x[d + i], x[2 * d + i]);
            out[i] = (sp.beta_h * h).sqrt();
            out[d + i] = (sp.beta_h * f * (1.0 - f) / h.max(floor)).sqrt();
            out[2 * d + i] = (sp.beta_p * p).sqrt();
        }
    }

    fn noise_label(&self, component: usize) -> NoiseLabel {
        block_label(self.graph.len(), component)
    }

    fn component_names(&self) -> Vec<String> {
        block_names(self.graph.len(), ["H", "F", "P"])
    }
}

/// Maps a system-size index N to rates whose N-rescaled limits are
/// `(kappa, alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSchedule {
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_iota_floor")]
    pub iota_floor: f64,
}

fn default_iota_floor() -> f64 {
    0.05
}

impl ScalingSchedule {
    pub fn new(kappa: f64, alpha: f64, beta: f64) -> Self {
        Self {
            kappa,
            alpha,
            beta,
            iota_floor: default_iota_floor(),
        }
    }

    /// Rates at level `n`. Host immigration covers the full lower bound of
    /// the standing assumptions, including the parasite-migration term.
    pub fn params(&self, n: f64, eq: &Equilibrium) -> ScalingParams {
        let e = &eq.eco;
        let beta_h = self.beta / (n * eq.lc.b);
        let kappa_p = self.kappa / n;
        let iota_h_min = 4.0 * e.delta * kappa_p / (3.0 * (e.nu + e.lambda)) + 1.5 * beta_h;
        ScalingParams {
            n,
            kappa_h: self.kappa / n,
            kappa_p,
            alpha: self.alpha / n,
            beta_h,
            beta_p: beta_h,
            iota_h: iota_h_min.max(self.iota_floor / n),
            iota_p: beta_h.max(self.iota_floor / n),
        }
    }
}

/// Integrates the `(H, F, P)` system for fast time `t_end_slow * n` and
/// records on the slow clock `u = t / n`. `cfg.t_end` is ignored;
/// `cfg.dt` and `cfg.record_stride` refer to fast time.
#[allow(clippy::too_many_arguments)]
pub fn rescaled_frequency_run(
    eq: &Equilibrium,
    sched: &ScalingSchedule,
    graph: &DemeGraph,
    n: f64,
    t_end_slow: f64,
    x0: &HfpState,
    cfg: &IntegratorConfig,
    stream: &RngStream,
) -> Result<Path> {
    if !(n >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: format!("must be >= 1, got {n}"),
        });
    }
    let sp = sched.params(n, eq);
    let model = hfp_model(eq.eco, sp, graph)?;
    let mut fast = *cfg;
    fast.t_end = t_end_slow * n;
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate_observed(&model, &x0.to_flat(), &fast, stream, |_, t, x| {
        times.push(t / n);
        states.push(x.to_vec());
    })?;
    Ok(Path {
        times,
        states,
        names: model.component_names(),
        meta: PathMeta {
            config: fast,
            stream: *stream,
        },
    })
}
