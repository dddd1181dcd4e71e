//! Ecological rates, per-level scaling rates, the derived limit constants and
//! the host/parasite equilibrium maps `h_inf`, `p_inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven Lotka-Volterra rates shared by every level of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcologyParams {
    /// Host growth rate.
    pub lambda: f64,
    /// Host carrying capacity.
    #[serde(rename = "K")]
    pub k: f64,
    /// Predation pressure per parasite.
    pub delta: f64,
    /// Parasite death rate.
    pub nu: f64,
    /// Parasite self-competition.
    pub gamma: f64,
    /// Parasite growth per cheater host.
    pub eta: f64,
    /// Reduction of parasite growth per altruist host.
    pub rho: f64,
}

impl EcologyParams {
    pub fn new(lambda: f64, k: f64, delta: f64, nu: f64, gamma: f64, eta: f64, rho: f64) -> Result<Self> {
        let p = Self {
            lambda,
            k,
            delta,
            nu,
            gamma,
            eta,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    /// Positivity and `rho < eta`. The equilibrium condition is checked by
    /// [`derive_limit_constants`].
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("K", self.k),
            ("delta", self.delta),
            ("nu", self.nu),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("rho", self.rho),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if self.rho >= self.eta {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("must be < eta = {}, got {}", self.eta, self.rho),
            });
        }
        Ok(())
    }

    /// Reference parameter set used throughout the tests and suites.
    pub fn reference() -> Self {
        Self {
            lambda: 2.0,
            k: 4.0,
            delta: 1.0,
            nu: 1.0,
            gamma: 2.0,
            eta: 2.0,
            rho: 1.0,
        }
    }
}

/// Migration, selection, noise and immigration rates at system-size level N.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    #[serde(rename = "N")]
    pub n: f64,
    pub kappa_h: f64,
    pub kappa_p: f64,
    pub alpha: f64,
    pub beta_h: f64,
    pub beta_p: f64,
    pub iota_h: f64,
    pub iota_p: f64,
}

impl ScalingParams {
    /// All rates zero: the noise-free, migration-free, selection-free system.
    pub fn zero() -> Self {
        Self {
            n: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: format!("must be >= 1, got {}", self.n),
            });
        }
        let fields = [
            ("kappa_h", self.kappa_h),
            ("kappa_p", self.kappa_p),
            ("alpha", self.alpha),
            ("beta_h", self.beta_h),
            ("beta_p", self.beta_p),
            ("iota_h", self.iota_h),
            ("iota_p", self.iota_p),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Shifted frequency scale `a` and inverse population scale `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub a: f64,
    pub b: f64,
}

pub fn derive_limit_constants(p: &EcologyParams) -> Result<LimitConstants> {
    p.validate()?;
    let lhs = p.k * (p.eta - p.rho);
    if lhs <= p.nu {
        return Err(Error::DegenerateEquilibrium { lhs, nu: p.nu });
    }
    let a = (p.lambda * p.gamma + p.delta * p.k * p.eta) / (p.delta * p.k * p.rho);
    let b = p.delta * p.rho / (p.delta * p.nu + p.lambda * p.gamma);
    Ok(LimitConstants { a, b })
}

/// Host and parasite equilibria as functions of the local altruist frequency.
///
/// Holds both the ecological rates and the derived constants; the `a`,`b`
/// form is what the simulation loops call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub eco: EcologyParams,
    pub lc: LimitConstants,
}

impl Equilibrium {
    /// Derives the limit constants and cross-checks both closed forms of
    /// `h_inf`, `p_inf` at x = 0, 1/2, 1.
    pub fn new(eco: EcologyParams) -> Result<Self> {
        let lc = derive_limit_constants(&eco)?;
        let eq = Self { eco, lc };
        for x in [0.0, 0.5, 1.0] {
            let (h, p) = eq.pair(x);
            let (hr, pr) = eq.pair_rational(x);
            let scale = 1.0 + h.abs().max(p.abs());
            if (h - hr).abs() > 1e-12 * scale || (p - pr).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter {
                    name: "ecology",
                    reason: format!(
                        "closed forms of the equilibrium disagree at x={x}: ({h}, {p}) vs ({hr}, {pr})"
                    ),
                });
            }
        }
        Ok(eq)
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        1.0 / (self.lc.b * (self.lc.a - x))
    }

    #[inline]
    pub fn p(&self, x: f64) -> f64 {
        self.eco.lambda / self.eco.delta * (1.0 - 1.0 / (self.eco.k * self.lc.b * (self.lc.a - x)))
    }

    /// `(h_inf(x), p_inf(x))` in the `a`,`b` form.
    pub fn pair(&self, x: f64) -> (f64, f64) {
        (self.h(x), self.p(x))
    }

    /// `(h_inf(x), p_inf(x))` written directly in the ecological rates.
    pub fn pair_rational(&self, x: f64) -> (f64, f64) {
        let e = &self.eco;
        let denom = e.lambda * e.gamma + e.delta * e.k * (e.eta - e.rho * x);
        let h = e.k * (e.delta * e.nu + e.gamma * e.lambda) / denom;
        let p = (e.lambda * e.k * (e.eta - e.rho * x) - e.lambda * e.nu) / denom;
        (h, p)
    }

    /// First and second derivatives `(h', h'', p', p'')` at `x`.
    pub fn derivatives(&self, x: f64) -> (f64, f64, f64, f64) {
        let LimitConstants { a, b } = self.lc;
        let e = &self.eco;
        let d = a - x;
        let h1 = 1.0 / (b * d * d);
        let h2 = 2.0 / (b * d * d * d);
        let p1 = -e.lambda / (e.delta * e.k * b * d * d);
        let p2 = -2.0 * e.lambda / (e.delta * e.k * b * d * d * d);
        (h1, h2, p1, p2)
    }
}

pub fn equilibrium_pair(eq: &Equilibrium, x: f64) -> (f64, f64) {
    eq.pair(x)
}

pub fn equilibrium_derivatives(eq: &Equilibrium, x: f64) -> (f64, f64, f64, f64) {
    eq.derivatives(x)
}

/// One parameter-only inequality of the standing assumptions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub overall: bool,
    pub not_checkable: Vec<&'static str>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn check_assumptions(p: &EcologyParams, sp: &ScalingParams) -> AssumptionReport {
    let mut checks = Vec::new();
    let mut push = |name, lhs: f64, rhs: f64, strict: bool| {
        let holds = if strict { lhs > rhs } else { lhs >= rhs };
        checks.push(AssumptionCheck {
            name,
            holds,
            lhs,
            rhs,
        });
    };
    // Stored as lhs (>|>=) rhs.
    push("lambda > nu", p.lambda, p.nu, true);
    push("eta - rho > lambda/K", p.eta - p.rho, p.lambda / p.k, true);
    push("gamma >= 2 delta", p.gamma, 2.0 * p.delta, false);
    push("alpha + kappa_H <= lambda/4", p.lambda / 4.0, sp.alpha + sp.kappa_h, false);
    push(
        "iota_P <= lambda(nu+lambda)/(8 delta)",
        p.lambda * (p.nu + p.lambda) / (8.0 * p.delta),
        sp.iota_p,
        false,
    );
    push(
        "kappa_P + kappa_H + alpha <= (lambda-nu)/2",
        (p.lambda - p.nu) / 2.0,
        sp.kappa_p + sp.kappa_h + sp.alpha,
        false,
    );
    push(
        "iota_H >= 4 delta kappa_P/(3(nu+lambda)) + 3/2 beta_H",
        sp.iota_h,
        4.0 * p.delta * sp.kappa_p / (3.0 * (p.nu + p.lambda)) + 1.5 * sp.beta_h,
        false,
    );
    push("iota_P >= beta_P", sp.iota_p, sp.beta_p, false);
    let overall = checks.iter().all(|c| c.holds);
    AssumptionReport {
        checks,
        overall,
        not_checkable: vec![
            "summable initial host mass",
            "uniform fourth and inverse moments of the initial configuration",
        ],
    }
}
