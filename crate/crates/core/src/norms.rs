//! Norm functionals on grid fields.
//!
//! Spectral norms are modal sums with weight `dx^n` (see [`crate::spectral`]
//! for the normalization). The homogeneous negative norm `Ḣ^{-γ}` leaves out
//! the `k = 0` mode: a torus has no canonical discrete analogue of
//! `∫_{|ξ|<Δ/2} |ξ|^{-2γ} |û|² dξ`. [`hneg_zero_cell_correction`] estimates
//! that missing cell for callers comparing against continuum values; it is
//! never added silently.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Lq(f64),
    H1dot,
    Hneg(f64),
    /// `‖(⟨ξ⟩^s + |ξ|^{-γ}) û‖_{L²}`, the `H^s ∩ Ḣ^{-γ}` norm. `s = 1` for
    /// displacement data, `s = 0` for velocity data.
    DataNorm { gamma: f64, s: f64 },
    Linf,
}

fn check_kind(kind: NormKind) -> Result<()> {
    match kind {
        NormKind::Lq(q) if !(q >= 1.0) => Err(Error::Domain(format!("L^q needs q >= 1, got {q}"))),
        NormKind::Hneg(g) | NormKind::DataNorm { gamma: g, .. } if !(g > 0.0) => {
            Err(Error::Domain(format!("negative order must be positive, got {g}")))
        }
        _ => Ok(()),
    }
}

/// Norm of a spectral field.
pub fn norm(field: &SpectralField, kind: NormKind) -> Result<f64> {
    check_kind(kind)?;
    if !field.is_finite() {
        return Err(Error::Numerical("field has non-finite modes".into()));
    }
    let value = match kind {
        NormKind::L2 => field.weighted_energy(|_| 1.0).sqrt(),
        NormKind::H1dot => field.weighted_energy(|k2| k2).sqrt(),
        NormKind::Hneg(g) => field.weighted_energy(|k2| if k2 == 0.0 { 0.0 } else { k2.powf(-g) }).sqrt(),
        NormKind::DataNorm { gamma, s } => field
            .weighted_energy(|k2| {
                let bracket = (1.0 + k2).powf(s / 2.0);
                let neg = if k2 == 0.0 { 0.0 } else { k2.powf(-gamma / 2.0) };
                (bracket + neg).powi(2)
            })
            .sqrt(),
        NormKind::Lq(_) | NormKind::Linf => {
            let samples = field.to_samples();
            return norm_samples(&samples, field.grid(), kind);
        }
    };
    Ok(value)
}

/// Norm of physical samples by grid quadrature. Derivative-based kinds are
/// routed through the forward transform.
pub fn norm_samples(samples: &[f64], grid: &std::sync::Arc<Grid>, kind: NormKind) -> Result<f64> {
    check_kind(kind)?;
    if samples.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), actual: samples.len() });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite samples".into()));
    }
    let vol = grid.cell_volume();
    match kind {
        NormKind::L2 => Ok((vol * samples.iter().map(|v| v * v).sum::<f64>()).sqrt()),
        NormKind::Lq(q) if q.is_infinite() => Ok(max_abs(samples)),
        NormKind::Lq(q) => {
            // scale first so |u|^q cannot overflow
            let m = max_abs(samples);
            if m == 0.0 {
                return Ok(0.0);
            }
            let s: f64 = samples.iter().map(|v| (v.abs() / m).powf(q)).sum();
            Ok(m * (vol * s).powf(1.0 / q))
        }
        NormKind::Linf => Ok(max_abs(samples)),
        _ => norm(&grid.transform_forward(samples)?, kind),
    }
}

fn max_abs(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Composite size of a data pair: `‖u₀‖_{H¹∩Ḣ^{-γ}} + ‖u₁‖_{L²∩Ḣ^{-γ}}`.
pub fn data_norm(u0: &SpectralField, u1: &SpectralField, gamma: f64) -> Result<f64> {
    Ok(norm(u0, NormKind::DataNorm { gamma, s: 1.0 })? + norm(u1, NormKind::DataNorm { gamma, s: 0.0 })?)
}

/// Continuum contribution of the cell around `k = 0` that the discrete
/// `Ḣ^{-γ}` norm omits, squared: `(2π)^{-n} |û(0)|² ∫_{cell} |ξ|^{-2γ} dξ`
/// with the cell taken as the ball of the same volume `(π/L)^n`.
pub fn hneg_zero_cell_correction(field: &SpectralField, gamma: f64) -> Result<f64> {
    let grid = field.grid();
    let n = grid.dim() as f64;
    if !(2.0 * gamma < n) {
        return Err(Error::Domain(format!("|ξ|^(-2γ) is not integrable at 0 for γ = {gamma}, n = {n}")));
    }
    let u0: Complex64 = field.transform_at(0);
    let cell = (std::f64::consts::PI / grid.half_width()).powf(n);
    // ball volume ω_n r^n = cell, ∫_{|ξ|<r} |ξ|^{-2γ} = n ω_n r^{n-2γ} / (n - 2γ)
    let omega = match grid.dim() {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 / 3.0 * std::f64::consts::PI,
    };
    let r = (cell / omega).powf(1.0 / n);
    let integral = n * omega * r.powf(n - 2.0 * gamma) / (n - 2.0 * gamma);
    Ok(u0.norm_sqr() * integral / (2.0 * std::f64::consts::PI).powf(n))
}

/// Supremum of the time-weighted solution norm over samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XNormResult {
    pub value: f64,
    pub attained_at: f64,
}

/// One time sample of the two norms entering the solution norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub l2: f64,
    pub grad: f64,
}

/// `sup_t (1+t)^{γ/2} (‖u‖_{L²} + (1+t)^{1/2} ‖∇u‖_{L²})`.
pub fn x_norm(samples: &[NormSample], gamma: f64) -> Result<XNormResult> {
    let first = samples.first().ok_or_else(|| Error::Domain("x-norm of an empty series".into()))?;
    if first.t != 0.0 {
        return Err(Error::Domain(format!("series must start at t = 0, starts at {}", first.t)));
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Domain("sample times must be strictly increasing".into()));
    }
    let mut best = XNormResult { value: f64::NEG_INFINITY, attained_at: 0.0 };
    for s in samples {
        let w = 1.0 + s.t;
        let v = w.powf(gamma / 2.0) * (s.l2 + w.sqrt() * s.grad);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite x-norm weight at t = {}", s.t)));
        }
        if v > best.value {
            best = XNormResult { value: v, attained_at: s.t };
        }
    }
    Ok(best)
}

/// Admissible Lebesgue exponents for the interpolation bound in dimension `n`.
pub fn gn_exponent_range(n: usize) -> (f64, f64, bool) {
    match n {
        1 => (2.0, f64::INFINITY, true),
        2 => (2.0, f64::INFINITY, false),
        _ => (2.0, 2.0 * n as f64 / (n as f64 - 2.0), true),
    }
}

/// `‖u‖_{L^q} / (‖u‖_{L²}^{1−θ} ‖∇u‖_{L²}^θ)` with `θ = n(1/2 − 1/q)`.
pub fn gn_ratio(field: &SpectralField, q: f64, n: usize) -> Result<f64> {
    let (lo, hi, closed) = gn_exponent_range(n);
    let ok = q >= lo && if closed { q <= hi } else { q < hi };
    if !ok {
        return Err(Error::Domain(format!("q = {q} outside the admissible range for n = {n}")));
    }
    let theta = if q.is_infinite() { n as f64 / 2.0 } else { n as f64 * (0.5 - 1.0 / q) };
    let l2 = norm(field, NormKind::L2)?;
    let grad = norm(field, NormKind::H1dot)?;
    if l2 == 0.0 || (theta > 0.0 && grad == 0.0) {
        return Err(Error::Domain("interpolation ratio needs non-zero L² and gradient norms".into()));
    }
    let lq = norm(field, NormKind::Lq(q))?;
    Ok(lq / (l2.powf(1.0 - theta) * grad.powf(theta)))
}
