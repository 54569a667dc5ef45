//! Exponent arithmetic for the critical damped wave problem.
//!
//! Everything here is closed-form: critical powers `1 + 4/(d + 2γ)`, the
//! upper admissibility root of `2γ² + dγ − 2d = 0`, the dual Lebesgue index
//! `1/m = 1/2 + γ/n`, and the admissibility windows of the global existence
//! results in the Euclidean and Heisenberg settings. `d` is the homogeneous
//! dimension: `n` on `R^n`, `Q = 2n + 2` on the Heisenberg group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric setting of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Euclidean(u32),
    Heisenberg(u32),
}

impl Setting {
    pub fn euclidean(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("spatial dimension must be at least 1".into()));
        }
        Ok(Setting::Euclidean(n))
    }

    pub fn heisenberg(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Heisenberg index must be at least 1".into()));
        }
        Ok(Setting::Heisenberg(n))
    }

    /// Underlying index `n` (space dimension, or Heisenberg group index).
    pub fn index(&self) -> u32 {
        match *self {
            Setting::Euclidean(n) | Setting::Heisenberg(n) => n,
        }
    }

    /// Homogeneous dimension: `n` for `R^n`, `2n + 2` for the Heisenberg group.
    pub fn dim_h(&self) -> u32 {
        match *self {
            Setting::Euclidean(n) => n,
            Setting::Heisenberg(n) => 2 * n + 2,
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Setting::Euclidean(n) => write!(f, "R^{n}"),
            Setting::Heisenberg(n) => write!(f, "H^{n} (Q = {})", self.dim_h()),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

/// Critical power `1 + 4/(d + 2γ)`.
pub fn critical_exponent(setting: Setting, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 + 4.0 / (setting.dim_h() as f64 + 2.0 * gamma))
}

/// Positive root of `2γ² + dγ − 2d = 0`.
///
/// Evaluated as `4d / (d + sqrt(d² + 16d))`, which is algebraically equal to
/// `(−d + sqrt(d² + 16d)) / 4` but free of cancellation. In the Euclidean
/// setting the root only bounds γ for `n ≥ 3`; it is still returned for
/// `n = 1, 2`.
pub fn gamma_tilde(setting: Setting) -> f64 {
    let d = setting.dim_h() as f64;
    4.0 * d / (d + (d * d + 16.0 * d).sqrt())
}

/// Residual of the defining quadratic at `g`.
pub fn gamma_tilde_residual(setting: Setting, g: f64) -> f64 {
    let d = setting.dim_h() as f64;
    2.0 * g * g + d * g - 2.0 * d
}

/// Dual Lebesgue index `m` with `1/m = 1/2 + γ/n`.
pub fn lebesgue_index(n: u32, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if n == 0 {
        return Err(Error::Domain("spatial dimension must be at least 1".into()));
    }
    let nf = n as f64;
    if gamma >= nf / 2.0 {
        return Err(Error::Domain(format!(
            "gamma = {gamma} must be below n/2 = {} (m would reach 1)",
            nf / 2.0
        )));
    }
    let m = 1.0 / (0.5 + gamma / nf);
    let p = 1.0 + 4.0 / (nf + 2.0 * gamma);
    let via_m = 1.0 + 2.0 * m / nf;
    if (p - via_m).abs() > 1e-12 * p {
        return Err(Error::Numerical(format!(
            "critical exponent identity broken: {p} vs {via_m}"
        )));
    }
    Ok(m)
}

/// Decay exponents `(γ/2, (γ+1)/2)` of `(1+t)^{-·}` for the L² norm and the
/// gradient L² norm.
pub fn expected_decay_rates(gamma: f64) -> Result<(f64, f64)> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Domain(format!("gamma must be non-negative, got {gamma}")));
    }
    Ok((gamma / 2.0, (gamma + 1.0) / 2.0))
}

/// Whether the global existence results say anything about the setting at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Covered,
    OutsideTheoremScope,
}

/// One failed constraint of an admissibility window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub bound: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityVerdict {
    pub setting: Setting,
    pub gamma: f64,
    pub scope: Scope,
    pub admissible: bool,
    pub violated_conditions: Vec<Violation>,
}

impl AdmissibilityVerdict {
    pub fn is_out_of_scope(&self) -> bool {
        self.scope == Scope::OutsideTheoremScope
    }
}

#[derive(Clone, Copy)]
enum Endpoint {
    Open(f64),
    Closed(f64),
}

fn interval_violations(gamma: f64, lower: Endpoint, upper: (f64, &str)) -> Vec<Violation> {
    let mut out = Vec::new();
    match lower {
        Endpoint::Open(b) if gamma <= b => out.push(Violation {
            condition: format!("gamma > {b}"),
            bound: b,
            value: gamma,
        }),
        Endpoint::Closed(b) if gamma < b => out.push(Violation {
            condition: format!("gamma >= {b}"),
            bound: b,
            value: gamma,
        }),
        _ => {}
    }
    let (ub, label) = upper;
    if !(gamma < ub) {
        out.push(Violation {
            condition: format!("gamma < {label} = {ub}"),
            bound: ub,
            value: gamma,
        });
    }
    out
}

/// Endpoints `(lower, upper)` of the admissible window, or `None` outside theorem scope.
pub fn admissible_window(setting: Setting) -> Option<(f64, f64)> {
    let gt = gamma_tilde(setting);
    match setting {
        Setting::Euclidean(n @ (1 | 2)) => Some((0.0, n as f64 / 2.0)),
        Setting::Euclidean(3 | 4) | Setting::Heisenberg(1) => Some((0.0, gt)),
        Setting::Euclidean(n @ (5 | 6)) => Some((n as f64 / 2.0 - 2.0, gt)),
        Setting::Heisenberg(2) => Some((1.0, gt)),
        _ => None,
    }
}

/// Admissibility of `γ` for the given setting.
///
/// Euclidean: `n = 1, 2`: `(0, n/2)`; `n = 3, 4`: `(0, γ̃)`; `n = 5, 6`:
/// `((n/2) − 2, γ̃)`. Heisenberg: `n = 1`: `(0, γ̃)`; `n = 2`: `[1, γ̃)`.
/// Anything else is reported as outside theorem scope.
pub fn check_admissibility(setting: Setting, gamma: f64) -> AdmissibilityVerdict {
    let gt = gamma_tilde(setting);
    let window = match setting {
        Setting::Euclidean(n @ (1 | 2)) => Some((Endpoint::Open(0.0), (n as f64 / 2.0, "n/2"))),
        Setting::Euclidean(3 | 4) => Some((Endpoint::Open(0.0), (gt, "gamma_tilde"))),
        Setting::Euclidean(n @ (5 | 6)) => {
            Some((Endpoint::Open(n as f64 / 2.0 - 2.0), (gt, "gamma_tilde")))
        }
        Setting::Heisenberg(1) => Some((Endpoint::Open(0.0), (gt, "gamma_tilde"))),
        Setting::Heisenberg(2) => Some((Endpoint::Closed(1.0), (gt, "gamma_tilde"))),
        _ => None,
    };
    match window {
        Some((lower, upper)) => {
            let violated = if gamma.is_nan() {
                vec![Violation { condition: "gamma is a number".into(), bound: f64::NAN, value: gamma }]
            } else {
                interval_violations(gamma, lower, upper)
            };
            AdmissibilityVerdict {
                setting,
                gamma,
                scope: Scope::Covered,
                admissible: violated.is_empty(),
                violated_conditions: violated,
            }
        }
        None => AdmissibilityVerdict {
            setting,
            gamma,
            scope: Scope::OutsideTheoremScope,
            admissible: false,
            violated_conditions: Vec::new(),
        },
    }
}

/// Analytic parameter bundle of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub setting: Setting,
    pub gamma: f64,
    pub p: f64,
    /// Dual Lebesgue index; `None` where `1/m = 1/2 + γ/n` has no solution in `(1, 2]`
    /// or the setting is not Euclidean.
    pub m: Option<f64>,
    pub gamma_tilde: f64,
    pub verdict: AdmissibilityVerdict,
}

impl ProblemParams {
    /// Parameters at the critical power.
    pub fn critical(setting: Setting, gamma: f64) -> Result<Self> {
        let p = critical_exponent(setting, gamma)?;
        Self::with_power(setting, gamma, p)
    }

    /// Parameters with an explicit nonlinearity power (sub- or supercritical runs).
    pub fn with_power(setting: Setting, gamma: f64, p: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("power must exceed 1, got {p}")));
        }
        let m = match setting {
            Setting::Euclidean(n) => lebesgue_index(n, gamma).ok(),
            Setting::Heisenberg(_) => None,
        };
        Ok(ProblemParams {
            setting,
            gamma,
            p,
            m,
            gamma_tilde: gamma_tilde(setting),
            verdict: check_admissibility(setting, gamma),
        })
    }

    pub fn critical_p(&self) -> f64 {
        1.0 + 4.0 / (self.setting.dim_h() as f64 + 2.0 * self.gamma)
    }

    /// True when `p` equals the critical power to rounding.
    pub fn is_critical(&self) -> bool {
        (self.p - self.critical_p()).abs() <= 1e-12 * self.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: u32) -> Setting {
        Setting::euclidean(n).unwrap()
    }

    #[test]
    fn critical_exponent_examples() {
        assert!((critical_exponent(e(1), 0.25).unwrap() - 11.0 / 3.0).abs() < 1e-15);
        assert!((critical_exponent(e(2), 0.5).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        let h1 = Setting::heisenberg(1).unwrap();
        assert!((critical_exponent(h1, 1.0).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(critical_exponent(e(1), 0.0).is_err());
        assert!(critical_exponent(e(1), -1.0).is_err());
    }

    #[test]
    fn gamma_tilde_examples() {
        // quadratic formula by hand
        let g3 = (-3.0 + (9.0f64 + 48.0).sqrt()) / 4.0;
        assert!((gamma_tilde(e(3)) - g3).abs() < 1e-15);
        assert!((gamma_tilde(e(3)) - 1.1374586).abs() < 1e-7);
        assert!((gamma_tilde(e(4)) - (5.0f64.sqrt() - 1.0)).abs() < 1e-15);
        let h1 = Setting::heisenberg(1).unwrap();
        assert!((gamma_tilde(h1) - (5.0f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_index_examples() {
        assert!((lebesgue_index(2, 0.5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let m = lebesgue_index(1, 0.25).unwrap();
        assert!((m - 4.0 / 3.0).abs() < 1e-15);
        assert!((1.0 + 2.0 * m - 11.0 / 3.0).abs() < 1e-14);
        assert!((lebesgue_index(1, 1e-12).unwrap() - 2.0).abs() < 1e-10);
        assert!(lebesgue_index(2, 1.0).is_err());
        assert!(lebesgue_index(2, 1.5).is_err());
    }

    #[test]
    fn admissibility_examples() {
        let v = check_admissibility(e(5), 0.4);
        assert!(!v.admissible);
        assert_eq!(v.violated_conditions.len(), 1);
        assert_eq!(v.violated_conditions[0].bound, 0.5);

        assert!(check_admissibility(e(1), 0.49).admissible);

        let v = check_admissibility(e(3), 1.2);
        assert!(!v.admissible);
        assert!((v.violated_conditions[0].bound - 1.1374586).abs() < 1e-7);
    }

    #[test]
    fn admissibility_endpoints() {
        let h2 = Setting::heisenberg(2).unwrap();
        assert!(check_admissibility(h2, 1.0).admissible);
        assert!(!check_admissibility(h2, 0.9).admissible);
        assert!(!check_admissibility(e(2), 1.0).admissible);
        assert!(!check_admissibility(e(1), 0.5).admissible);
        assert!(!check_admissibility(e(5), 0.5).admissible);
        assert!(check_admissibility(e(5), 0.5 + 1e-9).admissible);
    }

    #[test]
    fn outside_scope_is_distinct() {
        let v = check_admissibility(e(7), 0.5);
        assert_eq!(v.scope, Scope::OutsideTheoremScope);
        assert!(!v.admissible);
        assert!(v.violated_conditions.is_empty());
        let h3 = Setting::heisenberg(3).unwrap();
        assert!(check_admissibility(h3, 0.5).is_out_of_scope());
    }

    #[test]
    fn decay_rates() {
        assert_eq!(expected_decay_rates(0.25).unwrap(), (0.125, 0.625));
        assert_eq!(expected_decay_rates(1.0).unwrap(), (0.5, 1.0));
        let (a, b) = expected_decay_rates(1e-300).unwrap();
        assert!(a < 1e-299 && (b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn remark_chain_holds() {
        for n in 3..=6 {
            let g = gamma_tilde(e(n));
            assert!(n as f64 / 2.0 - 2.0 < g && g < n as f64 / 2.0, "n = {n}");
        }
    }

    #[test]
    fn params_bundle() {
        let p = ProblemParams::critical(e(1), 0.25).unwrap();
        assert!(p.is_critical());
        assert!(p.verdict.admissible);
        assert!((p.m.unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let sub = ProblemParams::with_power(e(1), 0.25, 2.0).unwrap();
        assert!(!sub.is_critical());
        assert!(ProblemParams::with_power(e(1), 0.25, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quadratic_residual_vanishes(n in 1u32..=6, heis in any::<bool>()) {
                let s = if heis { Setting::Heisenberg(n.min(2)) } else { Setting::Euclidean(n) };
                let g = gamma_tilde(s);
                prop_assert!(g > 0.0);
                prop_assert!(gamma_tilde_residual(s, g).abs() < 1e-12);
            }

            #[test]
            fn identity_with_lebesgue_index(n in 1u32..=6, frac in 0.001f64..0.999) {
                let gamma = frac * n as f64 / 2.0;
                let m = lebesgue_index(n, gamma).unwrap();
                let p = critical_exponent(Setting::Euclidean(n), gamma).unwrap();
                prop_assert!((p - (1.0 + 2.0 * m / n as f64)).abs() < 1e-12);
                prop_assert!(m > 1.0 && m <= 2.0);
            }

            #[test]
            fn critical_exponent_monotone(n in 1u32..=6, g in 0.01f64..3.0, dg in 0.001f64..1.0) {
                let s = Setting::Euclidean(n);
                let s2 = Setting::Euclidean(n + 1);
                prop_assert!(critical_exponent(s, g + dg).unwrap() < critical_exponent(s, g).unwrap());
                prop_assert!(critical_exponent(s2, g).unwrap() < critical_exponent(s, g).unwrap());
            }

            #[test]
            fn verdict_consistency(n in 1u32..=8, g in -0.5f64..4.0) {
                let v = check_admissibility(Setting::Euclidean(n), g);
                if v.scope == Scope::Covered {
                    prop_assert_eq!(v.admissible, v.violated_conditions.is_empty());
                }
            }
        }
    }
}
