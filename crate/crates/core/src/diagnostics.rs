//! Post-processing that connects simulated paths to the theory: the
//! Lyapunov functional of the host-parasite system, the N-scaled deviation
//! of `(H, P)` from the equilibrium manifold, moment monitors, the sign test
//! for `E[1/(a - Z_t)]`, and a Kolmogorov-Smirnov distance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytics::CdfTable;
use crate::error::{Error, Result};
use crate::graph::DemeGraph;
use crate::limit::WfParams;
use crate::params::{EcologyParams, Equilibrium};
use crate::sde::{Moments, Path};

/// `r - 1 - ln r`, accurate near `r = 1`.
fn relative_entropy_term(r: f64) -> f64 {
    let d = r - 1.0;
    if d.abs() < 1e-3 {
        // d^2/2 - d^3/3 + d^4/4 - ...
        let mut term = d * d;
        let mut sum = 0.0;
        for k in 2..12 {
            sum += if k % 2 == 0 { term / k as f64 } else { -term / k as f64 };
            term *= d;
        }
        sum
    } else {
        d - d.ln_1p()
    }
}

/// `u(x, y, z) = (eta - rho z) h (x/h - 1 - ln(x/h)) + delta p (y/p - 1 - ln(y/p))`
/// with `(h, p)` the equilibrium at `z`.
pub fn lyapunov_value(eq: &Equilibrium, x: f64, y: f64, z: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::DomainError(format!("Lyapunov function needs x, y > 0, got ({x}, {y})")));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::DomainError(format!("frequency {z} outside [0, 1]")));
    }
    let (h, p) = eq.pair(z);
    let e = &eq.eco;
    Ok((e.eta - e.rho * z) * h * relative_entropy_term(x / h) + e.delta * p * relative_entropy_term(y / p))
}

/// `(eta - rho z)(lambda/K)(x - h)^2 + delta gamma (y - p)^2`, the rate at
/// which `u` decreases along the noise-free single-deme flow at frozen `z`.
pub fn lyapunov_dissipation(eq: &Equilibrium, x: f64, y: f64, z: f64) -> f64 {
    let (h, p) = eq.pair(z);
    let e = &eq.eco;
    (e.eta - e.rho * z) * e.lambda / e.k * (x - h).powi(2) + e.delta * e.gamma * (y - p).powi(2)
}

/// Weighted squared distance of `(H, P)` from `(h(F), p(F))` over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSeries {
    pub n: f64,
    pub times: Vec<f64>,
    /// `sum_i sigma_i (H_i - h(F_i))^2`
    pub host: Vec<f64>,
    /// `sum_i sigma_i (P_i - p(F_i))^2`
    pub parasite: Vec<f64>,
    /// `N ∫_0^t host`, trapezoidal.
    pub host_integral: Vec<f64>,
    pub parasite_integral: Vec<f64>,
}

impl DeviationSeries {
    /// `N ∫_0^t (host + parasite)` at each recorded time.
    pub fn total_integral(&self) -> Vec<f64> {
        self.host_integral.iter().zip(&self.parasite_integral).map(|(h, p)| h + p).collect()
    }

    pub fn final_integral(&self) -> f64 {
        self.total_integral().last().copied().unwrap_or(0.0)
    }
}

fn running_trapezoid(times: &[f64], ys: &[f64], scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ys.len());
    let mut acc = 0.0;
    for k in 0..ys.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (ys[k] + ys[k - 1]);
        }
        out.push(scale * acc);
    }
    out
}

/// The deviation statistic from flat `[H.., F.., P..]` states on the slow
/// clock.
pub fn deviation_from_states(
    times: &[f64],
    states: &[Vec<f64>],
    eq: &Equilibrium,
    graph: &DemeGraph,
    n: f64,
) -> Result<DeviationSeries> {
    let d = graph.len();
    if times.len() != states.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} times for {} states",
            times.len(),
            states.len()
        )));
    }
    if let Some(bad) = states.iter().find(|s| s.len() != 3 * d) {
        return Err(Error::ShapeMismatch(format!(
            "state of length {} for {d} demes (expected {})",
            bad.len(),
            3 * d
        )));
    }
    let sigma = graph.sigma();
    let mut host = Vec::with_capacity(states.len());
    let mut parasite = Vec::with_capacity(states.len());
    for s in states {
        let (mut sh, mut sp) = (0.0, 0.0);
        for i in 0..d {
            let (h, p) = eq.pair(s[d + i]);
            sh += sigma[i] * (s[i] - h).powi(2);
            sp += sigma[i] * (s[2 * d + i] - p).powi(2);
        }
        host.push(sh);
        parasite.push(sp);
    }
    Ok(DeviationSeries {
        n,
        times: times.to_vec(),
        host_integral: running_trapezoid(times, &host, n),
        parasite_integral: running_trapezoid(times, &parasite, n),
        host,
        parasite,
    })
}

/// The deviation statistic of a rescaled `(H, F, P)` path.
pub fn deviation_statistic(path: &Path, eq: &Equilibrium, graph: &DemeGraph, n: f64) -> Result<DeviationSeries> {
    deviation_from_states(&path.times, &path.states, eq, graph, n)
}

/// Replica mean and standard error of a time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub times: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SeriesEstimate {
    /// Pointwise average of equally gridded replica series.
    pub fn from_replicas(times: &[f64], replicas: &[Vec<f64>]) -> Result<Self> {
        if replicas.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = replicas.iter().find(|r| r.len() != times.len()) {
            return Err(Error::ShapeMismatch(format!(
                "replica series of length {} on a grid of {}",
                bad.len(),
                times.len()
            )));
        }
        let mut value = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let m = Moments::from_slice(&replicas.iter().map(|r| r[k]).collect::<Vec<_>>());
            value.push(m.mean);
            stderr.push(if m.count > 1 { m.stderr() } else { f64::NAN });
        }
        Ok(Self {
            times: times.to_vec(),
            value,
            stderr,
        })
    }

    pub fn last(&self) -> (f64, f64) {
        (
            self.value.last().copied().unwrap_or(f64::NAN),
            self.stderr.last().copied().unwrap_or(f64::NAN),
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_series_csv(w, &self.times, &self.value, Some(&self.stderr))
    }
}

/// Replica average of the running deviation integral.
pub fn ensemble_deviation(series: &[DeviationSeries]) -> Result<SeriesEstimate> {
    let first = series.first().ok_or(Error::EmptySample)?;
    let totals: Vec<Vec<f64>> = series.iter().map(DeviationSeries::total_integral).collect();
    SeriesEstimate::from_replicas(&first.times, &totals)
}

/// Writes `t,value,stderr` rows; a missing stderr column is written empty.
pub fn write_series_csv<W: Write>(w: W, times: &[f64], values: &[f64], stderr: Option<&[f64]>) -> Result<()> {
    if times.len() != values.len() || stderr.is_some_and(|s| s.len() != times.len()) {
        return Err(Error::ShapeMismatch("series columns differ in length".into()));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "value", "stderr"])?;
    for k in 0..times.len() {
        let se = stderr.map(|s| s[k].to_string()).unwrap_or_default();
        wr.write_record([times[k].to_string(), values[k].to_string(), se])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `(2 eta H + delta P)^4`
    CombinedP4,
    /// `1/H^2`
    InvH2,
    /// `P/H^2`
    POverH2,
    /// `1/P`
    InvP,
    /// `1/(P H)`
    InvPh,
}

impl MomentKind {
    pub const ALL: [MomentKind; 5] = [
        MomentKind::CombinedP4,
        MomentKind::InvH2,
        MomentKind::POverH2,
        MomentKind::InvP,
        MomentKind::InvPh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MomentKind::CombinedP4 => "combined_p4",
            MomentKind::InvH2 => "inv_H2",
            MomentKind::POverH2 => "P_over_H2",
            MomentKind::InvP => "inv_P",
            MomentKind::InvPh => "inv_PH",
        }
    }

    pub fn eval(self, eco: &EcologyParams, h: f64, p: f64) -> Result<f64> {
        let need = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::DomainError(format!("{} needs positive inputs, got H={h}, P={p}", self.name())))
            }
        };
        match self {
            MomentKind::CombinedP4 => Ok((2.0 * eco.eta * h + eco.delta * p).powi(4)),
            MomentKind::InvH2 => {
                need(h > 0.0)?;
                Ok(1.0 / (h * h))
            }
            MomentKind::POverH2 => {
                need(h > 0.0)?;
                Ok(p / (h * h))
            }
            MomentKind::InvP => {
                need(p > 0.0)?;
                Ok(1.0 / p)
            }
            MomentKind::InvPh => {
                need(h > 0.0 && p > 0.0)?;
                Ok(1.0 / (p * h))
            }
        }
    }
}

/// `t -> sum_i sigma_i g(H_i, P_i)` on flat `[H.., F.., P..]` states.
pub fn moment_series(states: &[Vec<f64>], eco: &EcologyParams, graph: &DemeGraph, which: MomentKind) -> Result<Vec<f64>> {
    let d = graph.len();
    let sigma = graph.sigma();
    states
        .iter()
        .map(|s| {
            if s.len() != 3 * d {
                return Err(Error::ShapeMismatch(format!("state of length {} for {d} demes", s.len())));
            }
            (0..d).try_fold(0.0, |acc, i| Ok(acc + sigma[i] * which.eval(eco, s[i], s[2 * d + i])?))
        })
        .collect()
}

pub fn moment_monitor(path: &Path, eco: &EcologyParams, graph: &DemeGraph, which: MomentKind) -> Result<Vec<f64>> {
    moment_series(&path.states, eco, graph, which)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    NonIncreasing,
    NonDecreasing,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub verdict: Trend,
    pub expected: Trend,
    pub slope: f64,
    pub slope_stderr: f64,
    pub replicas: usize,
    pub passed: bool,
}

fn ols_slope(times: &[f64], ys: &[f64]) -> f64 {
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in times.iter().zip(ys) {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm) * (t - tm);
    }
    sxy / sxx
}

/// Sign test on the drift of `E[1/(a - Z_t)]`. `series[r][k]` is the
/// particle average of `1/(a - Z)` in replica `r` at `times[k]`. Each
/// replica contributes one least-squares slope; the trend is resolved when
/// the mean slope leaves the band of 3 standard errors around 0.
pub fn monotone_moment_check(times: &[f64], series: &[Vec<f64>], wp: &WfParams) -> Result<MonotoneReport> {
    monotone_moment_check_band(times, series, wp, 3.0)
}

/// [`monotone_moment_check`] with a band of `band` standard errors.
pub fn monotone_moment_check_band(
    times: &[f64],
    series: &[Vec<f64>],
    wp: &WfParams,
    band: f64,
) -> Result<MonotoneReport> {
    if series.len() < 2 {
        return Err(Error::InsufficientReplicas(format!("{} replica(s), need at least 2", series.len())));
    }
    if times.len() < 2 {
        return Err(Error::ShapeMismatch("need at least two time points".into()));
    }
    if let Some(bad) = series.iter().find(|s| s.len() != times.len()) {
        return Err(Error::ShapeMismatch(format!(
            "series of length {} on a grid of {}",
            bad.len(),
            times.len()
        )));
    }
    let slopes: Vec<f64> = series.iter().map(|s| ols_slope(times, s)).collect();
    let m = Moments::from_slice(&slopes);
    let (slope, se) = (m.mean, m.stderr());
    let expected = if wp.alpha > wp.beta {
        Trend::NonIncreasing
    } else if wp.alpha < wp.beta {
        Trend::NonDecreasing
    } else {
        Trend::Constant
    };
    let verdict = if slope.abs() <= band * se {
        if expected != Trend::Constant && se > 0.0 {
            return Err(Error::InsufficientReplicas(format!(
                "slope {slope:e} within {band} stderr ({se:e}) of 0 with {} replicas",
                series.len()
            )));
        }
        Trend::Constant
    } else if slope < 0.0 {
        Trend::NonIncreasing
    } else {
        Trend::NonDecreasing
    };
    // A frozen ensemble (e.g. fixed at a boundary) has zero slope in every
    // replica and is constant whatever the sign of beta - alpha.
    let passed = verdict == expected || (verdict == Trend::Constant && se == 0.0);
    Ok(MonotoneReport {
        verdict,
        expected,
        slope,
        slope_stderr: se,
        replicas: series.len(),
        passed,
    })
}

/// `sup_z |F_n(z) - F(z)|` between the empirical CDF of `samples` and the
/// tabulated CDF.
pub fn ks_distance(samples: &[f64], table: &CdfTable) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::DomainError("NaN sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = table.eval(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Machine-readable pass/fail outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub details: serde_json::Value,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, details: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            passed,
            details,
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::StationaryModel;
    use crate::graph::{build_deme_graph, GraphKind};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pset() -> Equilibrium {
        Equilibrium::new(EcologyParams::reference()).unwrap()
    }

    #[test]
    fn lyapunov_zero_at_equilibrium() {
        let eq = pset();
        for k in 0..=10 {
            let z = k as f64 / 10.0;
            let (h, p) = eq.pair(z);
            assert_eq!(lyapunov_value(&eq, h, p, z).unwrap(), 0.0);
        }
    }

    #[test]
    fn lyapunov_hand_value() {
        let eq = pset();
        let (h, p) = eq.pair(0.0);
        let u = lyapunov_value(&eq, 2.0 * h, p, 0.0).unwrap();
        assert_relative_eq!(u, 2.0 * (5.0 / 3.0) * (1.0 - 2f64.ln()), epsilon = 1e-14);
        assert!((u - 1.0228).abs() < 1e-4);
    }

    #[test]
    fn lyapunov_domain() {
        let eq = pset();
        assert!(matches!(lyapunov_value(&eq, 0.0, 1.0, 0.5), Err(Error::DomainError(_))));
        assert!(matches!(lyapunov_value(&eq, 1.0, -1.0, 0.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn lyapunov_nonnegative_on_random_points() {
        let eq = pset();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1_000_000 {
            let x = 10f64.powf(rng.gen_range(-4.0..2.0));
            let y = 10f64.powf(rng.gen_range(-4.0..2.0));
            let z = rng.gen::<f64>();
            assert!(lyapunov_value(&eq, x, y, z).unwrap() >= 0.0);
        }
    }

    #[test]
    fn lyapunov_positive_off_minimiser() {
        let eq = pset();
        let (h, p) = eq.pair(0.3);
        assert!(lyapunov_value(&eq, h * (1.0 + 1e-6), p, 0.3).unwrap() > 0.0);
        assert!(lyapunov_value(&eq, h, p * (1.0 - 1e-6), 0.3).unwrap() > 0.0);
    }

    #[test]
    fn relative_entropy_branches_agree() {
        for &r in &[1.0 - 1.1e-3, 1.0 - 0.9e-3, 1.0 + 0.9e-3, 1.0 + 1.1e-3] {
            let d: f64 = r - 1.0;
            let series = d * d / 2.0 - d.powi(3) / 3.0 + d.powi(4) / 4.0 - d.powi(5) / 5.0;
            assert!((relative_entropy_term(r) - series).abs() < 1e-16);
        }
    }

    fn single() -> DemeGraph {
        build_deme_graph(GraphKind::Single, 1.0).unwrap()
    }

    #[test]
    fn deviation_zero_on_manifold() {
        let eq = pset();
        let g = build_deme_graph(GraphKind::CompleteUniform { demes: 3 }, 1.0).unwrap();
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let states: Vec<Vec<f64>> = times
            .iter()
            .map(|t| {
                let f = [0.1 + t * 0.5, 0.4, 0.9 - t * 0.3];
                let mut s: Vec<f64> = f.iter().map(|&z| eq.h(z)).collect();
                s.extend(f);
                s.extend(f.iter().map(|&z| eq.p(z)));
                s
            })
            .collect();
        let dev = deviation_from_states(&times, &states, &eq, &g, 100.0).unwrap();
        assert!(dev.total_integral().iter().all(|&v| v.abs() < 1e-24));
    }

    #[test]
    fn deviation_constant_offset() {
        let eq = pset();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let states: Vec<Vec<f64>> = times.iter().map(|_| vec![eq.h(0.4) + 1.0, 0.4, eq.p(0.4)]).collect();
        let dev = deviation_from_states(&times, &states, &eq, &single(), 1.0).unwrap();
        assert_relative_eq!(dev.final_integral(), 2.0, epsilon = 1e-12);
        assert!(dev.parasite_integral.iter().all(|&v| v.abs() < 1e-28));
        assert!(dev.host_integral.windows(2).all(|w| w[1] >= w[0]));
        let dev = deviation_from_states(&times, &states, &eq, &single(), 7.0).unwrap();
        assert_relative_eq!(dev.final_integral(), 14.0, epsilon = 1e-12);
    }

    #[test]
    fn deviation_shape_errors() {
        let eq = pset();
        assert!(matches!(
            deviation_from_states(&[0.0], &[vec![1.0, 0.5]], &eq, &single(), 1.0),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            deviation_from_states(&[0.0, 1.0], &[vec![1.0, 0.5, 1.0]], &eq, &single(), 1.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn deviation_permutation_equivariant() {
        let eq = pset();
        let g = build_deme_graph(GraphKind::Torus1d { demes: 5 }, 0.6).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let pg = g.permuted(&perm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let times: Vec<f64> = (0..30).map(|k| k as f64 * 0.05).collect();
        let states: Vec<Vec<f64>> = times
            .iter()
            .map(|_| {
                (0..15)
                    .map(|i| if (5..10).contains(&i) { rng.gen() } else { rng.gen_range(0.05..3.0) })
                    .collect()
            })
            .collect();
        let permuted: Vec<Vec<f64>> = states
            .iter()
            .map(|s| (0..3).flat_map(|b| perm.iter().map(move |&k| s[5 * b + k])).collect())
            .collect();
        let a = deviation_from_states(&times, &states, &eq, &g, 10.0).unwrap();
        let b = deviation_from_states(&times, &permuted, &eq, &pg, 10.0).unwrap();
        for (x, y) in a.total_integral().iter().zip(b.total_integral()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn ensemble_deviation_stats() {
        let eq = pset();
        let times = vec![0.0, 1.0];
        let mk = |off: f64| deviation_from_states(&times, &vec![vec![eq.h(0.0) + off, 0.0, eq.p(0.0)]; 2], &eq, &single(), 1.0).unwrap();
        let est = ensemble_deviation(&[mk(1.0), mk(3.0)]).unwrap();
        assert_relative_eq!(est.last().0, 5.0, epsilon = 1e-12);
        assert_relative_eq!(est.last().1, 4.0, epsilon = 1e-12);
        assert!(matches!(ensemble_deviation(&[]), Err(Error::EmptySample)));
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,value,stderr\n"));
    }

    #[test]
    fn moment_monitor_values() {
        let eco = EcologyParams::reference();
        let g = single();
        let v = moment_series(&[vec![1.0, 0.5, 1.0]], &eco, &g, MomentKind::CombinedP4).unwrap();
        assert_eq!(v, vec![625.0]);
        let states = vec![vec![2.0, 0.5, 4.0]; 5];
        for kind in MomentKind::ALL {
            let s = moment_series(&states, &eco, &g, kind).unwrap();
            assert!(s.iter().all(|&x| x == s[0]), "{}", kind.name());
        }
        assert_eq!(moment_series(&states, &eco, &g, MomentKind::POverH2).unwrap()[0], 1.0);
        assert_eq!(moment_series(&states, &eco, &g, MomentKind::InvPh).unwrap()[0], 0.125);
        assert!(matches!(
            moment_series(&[vec![0.0, 0.5, 1.0]], &eco, &g, MomentKind::InvH2),
            Err(Error::DomainError(_))
        ));
        assert!(moment_series(&[vec![0.0, 0.5, 1.0]], &eco, &g, MomentKind::CombinedP4).is_ok());
    }

    #[test]
    fn monotone_verdicts() {
        let times: Vec<f64> = (0..21).map(f64::from).collect();
        let wp = |alpha| WfParams::new(1.0, alpha, 1.0, 2.0).unwrap();
        let down: Vec<Vec<f64>> = (0..5).map(|r| times.iter().map(|t| 1.0 - 0.01 * t + 1e-3 * r as f64 * t).collect()).collect();
        let r = monotone_moment_check(&times, &down, &wp(2.0)).unwrap();
        assert_eq!(r.verdict, Trend::NonIncreasing);
        assert!(r.passed);
        let r = monotone_moment_check(&times, &down, &wp(0.5)).unwrap();
        assert!(!r.passed);
        let frozen = vec![vec![1.0; 21]; 4];
        let r = monotone_moment_check(&times, &frozen, &wp(2.0)).unwrap();
        assert_eq!(r.verdict, Trend::Constant);
        assert!(r.passed);
        let noisy: Vec<Vec<f64>> = (0..4)
            .map(|r| times.iter().map(|t| 1.0 + if r % 2 == 0 { 0.01 } else { -0.01 } * t).collect())
            .collect();
        assert_eq!(monotone_moment_check(&times, &noisy, &wp(1.0)).unwrap().verdict, Trend::Constant);
        assert!(matches!(
            monotone_moment_check(&times, &noisy, &wp(2.0)),
            Err(Error::InsufficientReplicas(_))
        ));
        assert!(matches!(
            monotone_moment_check(&times, &down[..1], &wp(2.0)),
            Err(Error::InsufficientReplicas(_))
        ));
    }

    #[test]
    fn ks_trivial_cases() {
        let u = CdfTable::uniform();
        assert_eq!(ks_distance(&[0.5], &u).unwrap(), 0.5);
        assert_eq!(ks_distance(&[0.0; 10], &u).unwrap(), 1.0);
        assert!(matches!(ks_distance(&[], &u), Err(Error::EmptySample)));
    }

    #[test]
    fn ks_of_own_samples() {
        let sm = StationaryModel::new(WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap(), 0.75).unwrap();
        let table = sm.cdf_table(crate::analytics::CDF_GRID).unwrap();
        let xs = sm.sample(100_000, 9).unwrap();
        assert!(ks_distance(&xs, &table).unwrap() < 0.01);
        assert_eq!(ks_distance(&[table.quantile(0.5)], &table).unwrap(), 0.5);
    }

    #[test]
    fn verdict_json() {
        let v = Verdict::new("x", true, serde_json::json!({"a": 1}));
        let mut buf = Vec::new();
        v.write_json(&mut buf).unwrap();
        let back: Verdict = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, v);
    }
}
