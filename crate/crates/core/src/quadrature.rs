//! Globally adaptive Gauss-Kronrod (7/15) quadrature, plus a wrapper for
//! Beta-type integrands `z^(u-1) (1-z)^(v-1) g(z)` that removes the endpoint
//! power singularities by the substitutions `z = t^(1/u)` and
//! `1 - z = t^(1/v)`.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self {
            abs,
            rel: 0.0,
            ..Self::default()
        }
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Integrates `f` over `[lo, hi]`, bisecting the interval with the largest
/// error estimate until the total estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Quadrature> {
    if lo == hi {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = kronrod(&f, lo, hi);
    let mut intervals = vec![(lo, hi, v, e)];
    let mut value = v;
    let mut error = e;
    let mut evaluations = 15;
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if !value.is_finite() {
            return Err(Error::QuadratureFailure {
                estimate: f64::INFINITY,
                tolerance: target,
            });
        }
        if error <= target {
            break;
        }
        if intervals.len() >= tol.max_intervals {
            return Err(Error::QuadratureFailure {
                estimate: error,
                tolerance: target,
            });
        }
        let (k, _) = intervals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty");
        let (a, b, v0, e0) = intervals.swap_remove(k);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval below floating-point resolution.
            return Err(Error::QuadratureFailure {
                estimate: error,
                tolerance: target,
            });
        }
        let (v1, e1) = kronrod(&f, a, mid);
        let (v2, e2) = kronrod(&f, mid, b);
        evaluations += 30;
        value += v1 + v2 - v0;
        error += e1 + e2 - e0;
        intervals.push((a, mid, v1, e1));
        intervals.push((mid, b, v2, e2));
    }
    // Re-sum to shed the drift of the incremental updates.
    let value = intervals.iter().map(|i| i.2).sum();
    let error = intervals.iter().map(|i| i.3).sum();
    Ok(Quadrature {
        value,
        error,
        evaluations,
    })
}

/// `∫_lo^hi z^(u-1) (1-z)^(v-1) g(z) dz` for `0 <= lo < hi <= 1`, with the
/// power factors folded into the substitution wherever an exponent is below 1
/// at an included endpoint.
pub fn integrate_beta_weighted<G: Fn(f64) -> f64>(
    u: f64,
    v: f64,
    g: G,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<Quadrature> {
    if !(u > 0.0 && v > 0.0) {
        return Err(Error::DomainError(format!("exponents must be > 0, got u={u}, v={v}")));
    }
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::DomainError(format!("interval [{lo}, {hi}] not inside [0, 1]")));
    }
    let weight = |z: f64| ((u - 1.0) * z.ln() + (v - 1.0) * (-z).ln_1p()).exp();
    let plain = |a: f64, b: f64| integrate(|z| weight(z) * g(z), a, b, tol);
    // ∫_0^b z^(u-1) h(z) dz = (1/u) ∫_0^(b^u) h(t^(1/u)) dt
    let left = |b: f64| {
        let inv = 1.0 / u;
        integrate(
            |t| {
                let z = t.powf(inv);
                ((v - 1.0) * (-z).ln_1p()).exp() * g(z) * inv
            },
            0.0,
            b.powf(u),
            tol,
        )
    };
    // ∫_a^1 (1-z)^(v-1) h(z) dz = (1/v) ∫_0^((1-a)^v) h(1 - w^(1/v)) dw
    let right = |a: f64| {
        let inv = 1.0 / v;
        integrate(
            |w| {
                let r = w.powf(inv);
                let z = 1.0 - r;
                ((u - 1.0) * z.ln()).exp() * g(z) * inv
            },
            0.0,
            (1.0 - a).powf(v),
            tol,
        )
    };
    let sing_lo = lo == 0.0 && u < 1.0;
    let sing_hi = hi == 1.0 && v < 1.0;
    let mut parts = Vec::with_capacity(3);
    match (sing_lo, sing_hi) {
        (false, false) => parts.push(plain(lo, hi)?),
        (true, false) => {
            if hi <= 0.5 {
                parts.push(left(hi)?);
            } else {
                parts.push(left(0.5)?);
                parts.push(plain(0.5, hi)?);
            }
        }
        (false, true) => {
            if lo >= 0.5 {
                parts.push(right(lo)?);
            } else {
                parts.push(plain(lo, 0.5)?);
                parts.push(right(0.5)?);
            }
        }
        (true, true) => {
            parts.push(left(0.5)?);
            parts.push(right(0.5)?);
        }
    }
    Ok(parts.into_iter().fold(
        Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        },
        |acc, q| Quadrature {
            value: acc.value + q.value,
            error: acc.error + q.error,
            evaluations: acc.evaluations + q.evaluations,
        },
    ))
}

/// `ln B(x, y)` through log-Gamma.
pub fn ln_beta(x: f64, y: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

pub fn beta(x: f64, y: f64) -> f64 {
    ln_beta(x, y).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_polynomials() {
        // K15 integrates degree <= 22 exactly on one interval.
        for deg in 0..=22 {
            let (v, _) = kronrod(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-15, "degree {deg}");
        }
        // The embedded 7-point Gauss rule is exact to degree 13.
        let (_, e) = kronrod(&|x: f64| x.powi(13), -1.0, 1.0);
        assert!(e < 1e-14);
    }

    #[test]
    fn smooth_integrals() {
        let q = integrate(f64::sin, 0.0, std::f64::consts::PI, Tolerance::default()).unwrap();
        assert!((q.value - 2.0).abs() < 1e-13);
        let q = integrate(|x| (-x * x).exp(), -6.0, 6.0, Tolerance::default()).unwrap();
        assert!((q.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn beta_weighted_matches_closed_form() {
        for &(u, v) in &[(0.05, 0.3), (0.5, 0.5), (1.0, 0.5), (2.5, 0.1), (3.0, 4.0), (0.2, 7.0)] {
            let q = integrate_beta_weighted(u, v, |_| 1.0, 0.0, 1.0, Tolerance::default()).unwrap();
            let exact = beta(u, v);
            assert!(((q.value - exact) / exact).abs() < 1e-11, "u={u} v={v}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn beta_weighted_partial_intervals_add_up() {
        let (u, v) = (0.3, 0.6);
        let g = |z: f64| 2.0 - z;
        let whole = integrate_beta_weighted(u, v, g, 0.0, 1.0, Tolerance::default()).unwrap().value;
        let cuts = [0.0, 1e-6, 0.2, 0.5, 0.7, 1.0 - 1e-9, 1.0];
        let sum: f64 = cuts
            .windows(2)
            .map(|w| integrate_beta_weighted(u, v, g, w[0], w[1], Tolerance::default()).unwrap().value)
            .sum();
        assert!((whole - sum).abs() < 1e-11 * whole);
        let exact = 2.0 * beta(u, v) - beta(u + 1.0, v);
        assert!((whole - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(integrate_beta_weighted(0.0, 1.0, |_| 1.0, 0.0, 1.0, Tolerance::default()).is_err());
        assert!(integrate_beta_weighted(1.0, 1.0, |_| 1.0, -0.1, 1.0, Tolerance::default()).is_err());
        let tight = Tolerance {
            abs: 0.0,
            rel: 0.0,
            max_intervals: 10,
        };
        assert!(matches!(
            integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, tight),
            Err(Error::QuadratureFailure { .. })
        ));
    }
}
