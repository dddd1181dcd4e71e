//! Closed-form and quadrature-backed theory of the limit dynamics: the
//! speed density and equilibrium family of the frozen-θ diffusion, the
//! Beta-integral identity behind the moment trichotomy, the long-run
//! classification of the McKean-Vlasov frequency, and the invasion
//! criterion built from the single-colony scale function.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::WfParams;
use crate::quadrature::{beta, integrate, integrate_beta_weighted, Tolerance};
use crate::sde::{NoiseLabel, RngStream};

/// Default resolution of tabulated CDFs.
pub const CDF_GRID: usize = 10_000;

/// Speed density, normaliser and Beta exponents of the frozen-θ diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryModel {
    pub wp: WfParams,
    pub theta: f64,
    pub u: f64,
    pub v: f64,
    pub c_theta: f64,
}

fn check_theta(wp: &WfParams, theta: f64) -> Result<()> {
    let (lo, hi) = wp.theta_bounds();
    if theta > lo && theta < hi {
        Ok(())
    } else {
        Err(Error::ThetaOutOfRange { theta, lo, hi })
    }
}

/// Exponents `(u, v)` of the Beta weight at `theta`.
pub fn beta_exponents(wp: &WfParams, theta: f64) -> (f64, f64) {
    let r = 2.0 * wp.kappa / wp.beta;
    (r * (wp.a * theta - 1.0), r * (1.0 - theta * (wp.a - 1.0)))
}

impl StationaryModel {
    pub fn new(wp: WfParams, theta: f64) -> Result<Self> {
        wp.validate_strict()?;
        check_theta(&wp, theta)?;
        let (u, v) = beta_exponents(&wp, theta);
        let e = Self::a_exponent_of(&wp);
        let a = wp.a;
        let q = integrate_beta_weighted(u, v, |z| (a - z).powf(e), 0.0, 1.0, Tolerance::default())?;
        if !(q.value.is_finite() && q.value > 0.0) {
            return Err(Error::QuadratureFailure {
                estimate: q.error,
                tolerance: 0.0,
            });
        }
        Ok(Self {
            wp,
            theta,
            u,
            v,
            c_theta: q.value,
        })
    }

    fn a_exponent_of(wp: &WfParams) -> f64 {
        2.0 * wp.alpha / wp.beta - 1.0
    }

    /// Exponent of the `(a - z)` factor.
    pub fn a_exponent(&self) -> f64 {
        Self::a_exponent_of(&self.wp)
    }

    pub fn log_speed_density(&self, z: f64) -> f64 {
        (self.u - 1.0) * z.ln() + (self.v - 1.0) * (-z).ln_1p() + self.a_exponent() * (self.wp.a - z).ln()
    }

    /// `z^(u-1) (1-z)^(v-1) (a-z)^(2 alpha/beta - 1)` for `z` in `(0, 1)`.
    pub fn speed_density(&self, z: f64) -> f64 {
        self.log_speed_density(z).exp()
    }

    /// `∫ f dPsi_theta` with absolute tolerance 1e-10.
    pub fn stationary_moment<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let e = self.a_exponent();
        let a = self.wp.a;
        let tol = Tolerance {
            abs: 1e-10 * self.c_theta * 1e-2,
            rel: 1e-13,
            ..Tolerance::default()
        };
        let q = integrate_beta_weighted(self.u, self.v, |z| f(z) * (a - z).powf(e), 0.0, 1.0, tol)?;
        Ok(q.value / self.c_theta)
    }

    /// `c_theta` again through Beta functions, valid when `alpha = beta`
    /// (linear `(a - z)` factor).
    pub fn c_theta_closed_form(&self) -> Option<f64> {
        ((self.a_exponent() - 1.0).abs() < 1e-15)
            .then(|| self.wp.a * beta(self.u, self.v) - beta(self.u + 1.0, self.v))
    }

    /// CDF of `Psi_theta` on `n + 1` nodes `z_k = sin^2(pi k / (2n))`, which
    /// cluster at both endpoints where the density may be singular.
    pub fn cdf_table(&self, n: usize) -> Result<CdfTable> {
        if n < 2 {
            return Err(Error::Config(format!("CDF grid needs >= 2 cells, got {n}")));
        }
        let e = self.a_exponent();
        let a = self.wp.a;
        let z: Vec<f64> = (0..=n)
            .map(|k| {
                if k == n {
                    1.0
                } else {
                    (std::f64::consts::FRAC_PI_2 * k as f64 / n as f64).sin().powi(2)
                }
            })
            .collect();
        let tol = Tolerance {
            abs: 1e-15,
            rel: 1e-12,
            ..Tolerance::default()
        };
        let mut cum = vec![0.0; n + 1];
        for k in 0..n {
            let q = integrate_beta_weighted(self.u, self.v, |x| (a - x).powf(e), z[k], z[k + 1], tol)?;
            cum[k + 1] = cum[k] + q.value;
        }
        let total = cum[n];
        let cdf = cum.iter().map(|c| c / total).collect();
        let density = z
            .iter()
            .map(|&x| {
                if x > 0.0 && x < 1.0 {
                    self.speed_density(x) / self.c_theta
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(CdfTable { z, cdf, density })
    }

    /// `n` draws from `Psi_theta` by inverting the tabulated CDF.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let table = self.cdf_table(CDF_GRID)?;
        let mut rng = RngStream::new(seed, 0).generator(NoiseLabel { deme: 0, channel: 0 });
        Ok((0..n).map(|_| table.quantile(rng.gen::<f64>())).collect())
    }
}

pub fn speed_density(sm: &StationaryModel, z: f64) -> f64 {
    sm.speed_density(z)
}

pub fn stationary_moment<F: Fn(f64) -> f64>(sm: &StationaryModel, f: F) -> Result<f64> {
    sm.stationary_moment(f)
}

pub fn sample_stationary(sm: &StationaryModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    sm.sample(n, seed)
}

/// Monotone CDF tabulated on `[0, 1]`, interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    pub z: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Normalised density at the nodes (NaN at the endpoints).
    pub density: Vec<f64>,
}

impl CdfTable {
    pub fn from_points(z: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if z.len() != cdf.len() || z.len() < 2 {
            return Err(Error::ShapeMismatch("CDF table needs matching grids of length >= 2".into()));
        }
        if z.windows(2).any(|w| w[1] <= w[0]) || cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::DomainError("CDF table must be increasing".into()));
        }
        let density = vec![f64::NAN; z.len()];
        Ok(Self { z, cdf, density })
    }

    pub fn uniform() -> Self {
        Self::from_points(vec![0.0, 1.0], vec![0.0, 1.0]).expect("valid")
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.z[0] {
            return if x < self.z[0] { 0.0 } else { self.cdf[0] };
        }
        let n = self.z.len();
        if x >= self.z[n - 1] {
            return 1.0;
        }
        let k = self.z.partition_point(|&zk| zk <= x) - 1;
        let w = (x - self.z[k]) / (self.z[k + 1] - self.z[k]);
        self.cdf[k] + w * (self.cdf[k + 1] - self.cdf[k])
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.z.len();
        if p <= self.cdf[0] {
            return self.z[0];
        }
        if p >= self.cdf[n - 1] {
            return self.z[n - 1];
        }
        let k = (self.cdf.partition_point(|&c| c <= p) - 1).min(n - 2);
        let span = self.cdf[k + 1] - self.cdf[k];
        if span <= 0.0 {
            return self.z[k];
        }
        self.z[k] + (p - self.cdf[k]) / span * (self.z[k + 1] - self.z[k])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["z", "m_theta", "cdf"])?;
        for ((z, m), c) in self.z.iter().zip(&self.density).zip(&self.cdf) {
            wr.write_record([z.to_string(), m.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `∫_0^1 z^(u-1) (1-z)^(v-1) (a-z) (1/(a-z) - theta) dz`, which vanishes
/// for every admissible `theta`.
pub fn gamma_identity_residual(wp: &WfParams, theta: f64) -> Result<f64> {
    wp.validate_strict()?;
    check_theta(wp, theta)?;
    let (u, v) = beta_exponents(wp, theta);
    let a = wp.a;
    let tol = Tolerance {
        abs: 1e-13,
        rel: 0.0,
        ..Tolerance::default()
    };
    Ok(integrate_beta_weighted(u, v, |z| 1.0 - theta * (a - z), 0.0, 1.0, tol)?.value)
}

/// The same residual assembled from Beta functions.
pub fn gamma_identity_closed_form(wp: &WfParams, theta: f64) -> f64 {
    let (u, v) = beta_exponents(wp, theta);
    (1.0 - wp.a * theta) * beta(u, v) + theta * beta(u + 1.0, v)
}

/// Long-run behaviour of the McKean-Vlasov frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fixation {
    AllZero,
    AllOne,
    ConvergesTo0,
    ConvergesTo1,
    StationaryDensity { theta: f64, model: StationaryModel },
}

/// Classifies by initial mean and the sign of `alpha - beta`. The
/// stationary branch (`alpha = beta`) needs `theta = E[1/(a - Z_0)]`.
pub fn fixation_classify(wp: &WfParams, mean_z0: f64, theta: Option<f64>) -> Result<Fixation> {
    wp.validate_strict()?;
    if !(0.0..=1.0).contains(&mean_z0) {
        return Err(Error::DomainError(format!("E[Z_0] = {mean_z0} outside [0, 1]")));
    }
    if mean_z0 == 1.0 {
        return Ok(Fixation::AllOne);
    }
    if mean_z0 == 0.0 {
        return Ok(Fixation::AllZero);
    }
    if wp.alpha > wp.beta {
        Ok(Fixation::ConvergesTo0)
    } else if wp.alpha < wp.beta {
        Ok(Fixation::ConvergesTo1)
    } else {
        let theta = theta.ok_or(Error::InvalidParameter {
            name: "theta",
            reason: "required when alpha = beta".into(),
        })?;
        Ok(Fixation::StationaryDensity {
            theta,
            model: StationaryModel::new(*wp, theta)?,
        })
    }
}

/// Scale function of the single-colony diffusion and its integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvasionModel {
    pub wp: WfParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvasionReport {
    pub integral: f64,
    pub dies_out: bool,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub a: f64,
}

impl InvasionModel {
    pub fn new(wp: WfParams) -> Result<Self> {
        wp.validate_strict()?;
        Ok(Self { wp })
    }

    fn scale_exponent(&self) -> f64 {
        2.0 * self.wp.kappa / (self.wp.a * self.wp.beta)
    }

    /// `s(z) = (1-z)^(-2 kappa/(a beta)) ((a-z)/a)^(-2 alpha/beta)`
    pub fn s(&self, z: f64) -> f64 {
        let WfParams { alpha, beta, a, .. } = self.wp;
        (-self.scale_exponent() * (-z).ln_1p() - 2.0 * alpha / beta * ((a - z) / a).ln()).exp()
    }

    /// `(s(z), S(z))` with `S(z) = ∫_0^z s`.
    pub fn scale_function(&self, z: f64) -> Result<(f64, f64)> {
        if !(0.0..1.0).contains(&z) {
            return Err(Error::DomainError(format!("scale function needs z in [0, 1), got {z}")));
        }
        let s = self.s(z);
        let big_s = integrate(|x| self.s(x), 0.0, z, Tolerance::default())?.value;
        debug_assert!(big_s <= z * s * (1.0 + 1e-12));
        Ok((s, big_s))
    }

    /// `kappa a min(x,1)/(a - min(x,1)) + (x - 1)^+`
    pub fn colonization_rate(&self, x: f64) -> f64 {
        let m = x.min(1.0);
        self.wp.kappa * self.wp.a * m / (self.wp.a - m) + (x - 1.0).max(0.0)
    }

    /// Expected total colonisation over one excursion, reduced to
    /// `(2 kappa/(a beta)) ∫_0^1 (1-y)^(2 kappa/(a beta) - 1) ((a-y)/a)^(2 alpha/beta - 2) dy`.
    /// The invading allele dies out iff this is at most 1.
    pub fn invasion_criterion(&self) -> Result<InvasionReport> {
        let WfParams { kappa, alpha, beta: b, a } = self.wp;
        let r = self.scale_exponent();
        let e = 2.0 * alpha / b - 2.0;
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-14,
            ..Tolerance::default()
        };
        let q = integrate_beta_weighted(1.0, r, |y| (e * ((a - y) / a).ln()).exp(), 0.0, 1.0, tol)?;
        let integral = r * q.value;
        Ok(InvasionReport {
            integral,
            dies_out: integral <= 1.0 + 1e-12,
            alpha,
            beta: b,
            kappa,
            a,
        })
    }
}

pub fn scale_function(wp: &WfParams, z: f64) -> Result<(f64, f64)> {
    InvasionModel::new(*wp)?.scale_function(z)
}

pub fn colonization_rate(wp: &WfParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::DomainError(format!("colonization rate needs x >= 0, got {x}")));
    }
    Ok(InvasionModel::new(*wp)?.colonization_rate(x))
}

pub fn invasion_criterion(wp: &WfParams) -> Result<InvasionReport> {
    InvasionModel::new(*wp)?.invasion_criterion()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn example() -> StationaryModel {
        StationaryModel::new(WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap(), 0.75).unwrap()
    }

    #[test]
    fn speed_density_example() {
        let sm = example();
        assert_relative_eq!(sm.u, 1.0, epsilon = 1e-15);
        assert_relative_eq!(sm.v, 0.5, epsilon = 1e-15);
        assert_relative_eq!(sm.speed_density(0.5), 2f64.sqrt() * 1.5, epsilon = 1e-14);
        // ∫ (1-z)^(-1/2) (2 - z) dz = 2 + 2/3
        assert_relative_eq!(sm.c_theta, 8.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(sm.c_theta_closed_form().unwrap(), 8.0 / 3.0, epsilon = 1e-12);
        assert_eq!(sm.a_exponent(), 1.0);
    }

    #[test]
    fn moments_example() {
        let sm = example();
        assert!((sm.stationary_moment(|_| 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((sm.stationary_moment(|z| 1.0 / (2.0 - z)).unwrap() - 0.75).abs() < 1e-10);
        let selfish = StationaryModel::new(WfParams::new(1.0, 2.0, 1.0, 2.0).unwrap(), 0.75).unwrap();
        assert!(selfish.stationary_moment(|z| 1.0 / (2.0 - z)).unwrap() < 0.75);
    }

    #[test]
    fn theta_range_enforced() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(matches!(StationaryModel::new(wp, 0.5), Err(Error::ThetaOutOfRange { .. })));
        assert!(matches!(gamma_identity_residual(&wp, 1.0), Err(Error::ThetaOutOfRange { .. })));
    }

    #[test]
    fn gamma_identity_anchor() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        // antiderivative oracle: ∫(1-z)^(-1/2) dz - 0.75 ∫(1-z)^(-1/2)(2-z) dz = 2 - 0.75 * 8/3
        assert_eq!(2.0 - 0.75 * (8.0 / 3.0), 0.0);
        assert!(gamma_identity_residual(&wp, 0.75).unwrap().abs() < 1e-10);
        let wp3 = WfParams::new(1.3, 0.4, 0.8, 3.0).unwrap();
        let mid = 0.5 * (1.0 / 3.0 + 0.5);
        assert!(gamma_identity_residual(&wp3, mid).unwrap().abs() < 1e-10);
        assert!(gamma_identity_closed_form(&wp3, mid).abs() < 1e-10);
    }

    #[test]
    fn fixation_statements() {
        let f = |alpha, beta, m| fixation_classify(&WfParams::new(1.0, alpha, beta, 2.0).unwrap(), m, Some(0.7));
        assert_eq!(f(2.0, 1.0, 0.5).unwrap(), Fixation::ConvergesTo0);
        assert_eq!(f(1.0, 2.0, 0.5).unwrap(), Fixation::ConvergesTo1);
        assert_eq!(f(1.0, 2.0, 1.0).unwrap(), Fixation::AllOne);
        assert_eq!(f(2.0, 1.0, 1.0).unwrap(), Fixation::AllOne);
        assert_eq!(f(1.0, 2.0, 0.0).unwrap(), Fixation::AllZero);
        assert!(matches!(f(1.0, 1.0, 0.5).unwrap(), Fixation::StationaryDensity { theta, .. } if theta == 0.7));
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(fixation_classify(&wp, 0.5, None).is_err());
    }

    #[test]
    fn scale_function_values() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let (s0, big0) = scale_function(&wp, 0.0).unwrap();
        assert_eq!(s0, 1.0);
        assert_eq!(big0, 0.0);
        let (s, _) = scale_function(&wp, 0.5).unwrap();
        assert_relative_eq!(s, 32.0 / 9.0, epsilon = 1e-13);
        assert!(scale_function(&wp, 1.0).is_err());
    }

    #[test]
    fn colonization_values() {
        let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(colonization_rate(&wp, 0.0).unwrap(), 0.0);
        assert_relative_eq!(colonization_rate(&wp, 1.0).unwrap(), 2.0);
        assert_relative_eq!(colonization_rate(&wp, 1.5).unwrap(), 2.5);
        assert!(colonization_rate(&wp, -0.1).is_err());
    }

    #[test]
    fn invasion_examples() {
        let r = invasion_criterion(&WfParams::new(1.0, 2.0, 1.0, 2.0).unwrap()).unwrap();
        assert!((r.integral - 7.0 / 12.0).abs() < 1e-10);
        assert!(r.dies_out);
        let r = invasion_criterion(&WfParams::new(1.0, 0.5, 1.0, 2.0).unwrap()).unwrap();
        assert!(r.integral > 1.0 && !r.dies_out);
        let r = invasion_criterion(&WfParams::new(0.3, 1.7, 1.7, 4.0).unwrap()).unwrap();
        assert!((r.integral - 1.0).abs() < 1e-10 && r.dies_out);
    }

    #[test]
    fn sampler_edge_cases() {
        let sm = example();
        assert!(sm.sample(0, 1).unwrap().is_empty());
        let a = sm.sample(1000, 5).unwrap();
        assert_eq!(a, sm.sample(1000, 5).unwrap());
        assert!(a.iter().all(|z| (0.0..=1.0).contains(z)));
    }

    #[test]
    fn cdf_table_consistent_with_moments() {
        let sm = example();
        let t = sm.cdf_table(2000).unwrap();
        assert_eq!(t.cdf[0], 0.0);
        assert_eq!(*t.cdf.last().unwrap(), 1.0);
        // P[Z <= 1/2] = (1/c) ∫_0^(1/2) (1-z)^(-1/2)(2-z) dz
        let anti = |z: f64| -2.0 * (1.0 - z).sqrt() - (2.0 / 3.0) * (1.0 - z).powf(1.5);
        let exact = (anti(0.5) - anti(0.0)) / (8.0 / 3.0);
        assert!((t.eval(0.5) - exact).abs() < 1e-6, "{} vs {exact}", t.eval(0.5));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("z,m_theta,cdf"));
    }

    #[test]
    fn cdf_quantile_inverts_eval() {
        let t = example().cdf_table(500).unwrap();
        for k in 1..100 {
            let p = k as f64 / 100.0;
            assert!((t.eval(t.quantile(p)) - p).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn scale_integral_bounded(kappa in 0.1f64..3.0, alpha in 0.1f64..3.0, beta in 0.1f64..3.0, a in 1.2f64..5.0, z in 0.0f64..0.99) {
            let m = InvasionModel::new(WfParams::new(kappa, alpha, beta, a).unwrap()).unwrap();
            let (s, big) = m.scale_function(z).unwrap();
            prop_assert!(big <= z * s * (1.0 + 1e-12));
            prop_assert!(m.s(z + 0.005) > s);
        }

        #[test]
        fn stationary_normalised(kappa in 0.2f64..3.0, alpha in 0.1f64..3.0, beta in 0.2f64..3.0, a in 1.2f64..5.0, w in 0.02f64..0.98) {
            let wp = WfParams::new(kappa, alpha, beta, a).unwrap();
            let (lo, hi) = wp.theta_bounds();
            let sm = StationaryModel::new(wp, lo + w * (hi - lo)).unwrap();
            prop_assert!((sm.stationary_moment(|_| 1.0).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}
