//! Initial data with prescribed low-frequency behaviour.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::norms::data_norm;
use crate::spectral::{Grid, SpectralField};

/// Shape of the data profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `exp(−|x − c|² / (2 w²))`.
    GaussianBump {
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Defined in frequency space: `û(ξ) = |ξ|^σ e^{−|ξ|²}`.
    PowerLaw { sigma: f64 },
    /// `(1 + |x|²)^{−μ/2}`, positive with slow spatial decay.
    SlowDecayPositive { mu: f64 },
}

/// Which component of the pair carries the profile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// `u₀ = 0`, `u₁ = profile`.
    #[default]
    Velocity,
    /// `u₀ = profile`, `u₁ = 0`.
    Displacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub profile: Profile,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Rescale so that `‖u₀‖_{H¹∩Ḣ^{-γ}} + ‖u₁‖_{L²∩Ḣ^{-γ}}` equals this.
    #[serde(default)]
    pub target_eps: Option<f64>,
    #[serde(default)]
    pub placement: Placement,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: SpectralField,
    pub u1: SpectralField,
    /// Composite data norm of the returned pair.
    pub eps: f64,
    /// The profile does not fit in the box and was cut at its edges.
    pub truncated: bool,
}

const TRUNCATION_BUDGET: f64 = 1e-8;

/// Builds `(u₀, u₁)` on `grid`; `gamma` is the negative order the data norm uses.
pub fn synthesize(spec: &DataSpec, grid: &Arc<Grid>, gamma: f64) -> Result<InitialData> {
    if !spec.amplitude.is_finite() {
        return Err(Error::Data(format!("amplitude must be finite, got {}", spec.amplitude)));
    }
    let n = grid.dim();
    let mut truncated = false;
    let profile = match &spec.profile {
        Profile::GaussianBump { width, center } => {
            if !(*width > 0.0) {
                return Err(Error::Data(format!("gaussian width must be positive, got {width}")));
            }
            let c = padded_center(center, n)?;
            let outside = gaussian_mass_outside(*width, &c[..n], grid.half_width());
            if outside > TRUNCATION_BUDGET {
                return Err(Error::Data(format!(
                    "gaussian bump loses a fraction {outside:.3e} of its mass outside the box (budget {TRUNCATION_BUDGET:e})"
                )));
            }
            let samples: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    let r2: f64 = (0..n).map(|a| (x[a] - c[a]).powi(2)).sum();
                    spec.amplitude * (-r2 / (2.0 * width * width)).exp()
                })
                .collect();
            grid.transform_forward(&samples)?
        }
        Profile::PowerLaw { sigma } => {
            let sigma = *sigma;
            if !(sigma > gamma - n as f64 / 2.0) {
                return Err(Error::Data(format!(
                    "power-law exponent {sigma} leaves the profile outside the negative space of order {gamma}: need sigma > {}",
                    gamma - n as f64 / 2.0
                )));
            }
            let kmax = grid.k_max();
            let edge = kmax.powf(sigma) * (-kmax * kmax + 1.0).exp();
            if edge > TRUNCATION_BUDGET {
                return Err(Error::Data(format!(
                    "power-law spectrum is not resolved: relative amplitude {edge:.3e} at the Nyquist wavenumber"
                )));
            }
            let amp = spec.amplitude;
            SpectralField::from_transform(grid, move |k| {
                let r = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                if r == 0.0 {
                    return if sigma == 0.0 { amp } else { 0.0 };
                }
                amp * r.powf(sigma) * (-r * r).exp()
            })
        }
        Profile::SlowDecayPositive { mu } => {
            if !(*mu > 0.0) {
                return Err(Error::Data(format!("decay exponent must be positive, got {mu}")));
            }
            truncated = true;
            let samples: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    spec.amplitude * (1.0 + r2).powf(-mu / 2.0)
                })
                .collect();
            grid.transform_forward(&samples)?
        }
    };
    let zero = SpectralField::zeros(grid);
    let (mut u0, mut u1) = match spec.placement {
        Placement::Velocity => (zero, profile),
        Placement::Displacement => (profile, zero),
    };
    let mut eps = data_norm(&u0, &u1, gamma)?;
    if let Some(target) = spec.target_eps {
        if !(target > 0.0) {
            return Err(Error::Data(format!("target size must be positive, got {target}")));
        }
        if eps == 0.0 {
            return Err(Error::Data("cannot rescale data of zero size".into()));
        }
        let factor = target / eps;
        u0 = u0.scaled(factor);
        u1 = u1.scaled(factor);
        eps = data_norm(&u0, &u1, gamma)?;
    }
    Ok(InitialData { u0, u1, eps, truncated })
}

fn padded_center(center: &[f64], n: usize) -> Result<[f64; 3]> {
    let mut c = [0.0; 3];
    match center.len() {
        0 => {}
        len if len == n => c[..n].copy_from_slice(center),
        len => return Err(Error::Data(format!("center has {len} coordinates, grid has {n} dimensions"))),
    }
    Ok(c)
}

/// Fraction of the L¹ mass of a Gaussian bump lying outside `[−L, L)^n`.
fn gaussian_mass_outside(width: f64, center: &[f64], half_width: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 * width;
    let log_inside: f64 = center
        .iter()
        .map(|c| (-(0.5 * erfc((half_width - c) / s) + 0.5 * erfc((half_width + c) / s))).ln_1p())
        .sum();
    -log_inside.exp_m1()
}

/// Low-frequency exponent whose free evolution decays at `γ/2 + margin/2` in L².
pub fn sharp_rate_sigma(n: usize, gamma: f64, margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::Domain(format!("margin must be positive, got {margin}")));
    }
    let half = n as f64 / 2.0;
    if !(gamma > 0.0 && gamma < half) {
        return Err(Error::Domain(format!("gamma must lie in (0, {half}), got {gamma}")));
    }
    Ok(gamma - half + margin)
}
