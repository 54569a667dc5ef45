//! Periodic grids, discrete Fourier transforms and the exact linear flow of
//! the damped wave operator.
//!
//! The torus `[-L, L)^n` stands in for `R^n`. Modes are stored in FFT order
//! (index `j < N/2` is wavenumber `πj/L`, index `j ≥ N/2` is `π(j − N)/L`),
//! flattened row-major with the last axis contiguous. The transform pair is
//! unitary: `modes = DFT(samples) / N^{n/2}`, so
//!
//! ```text
//! ‖u‖²_{L²} ≈ dx^n Σ_j |u_j|² = dx^n Σ_k |modes_k|²
//! ```
//!
//! holds exactly on the grid. A mode relates to the continuous transform
//! `û(ξ) = ∫ u(x) e^{-ixξ} dx` by `modes_k = N^{n/2} (2L)^{-n} (−1)^{Σm} û(k)`,
//! the sign coming from the grid origin sitting at `x = −L`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        make_grid(self.dim, self.points, self.half_width)
    }
}

pub struct Grid {
    spec: GridSpec,
    dx: f64,
    wavenumbers: Vec<f64>,
    k2: Vec<f64>,
    k2_unique: Vec<f64>,
    k2_slot: Vec<u32>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).field("dx", &self.dx).finish()
    }
}

/// Builds a grid of `points^dim` nodes on `[-half_width, half_width)^dim`.
pub fn make_grid(dim: usize, points: usize, half_width: f64) -> Result<Arc<Grid>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Grid(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if points < 8 || !points.is_power_of_two() {
        return Err(Error::Grid(format!("points per dimension must be a power of two >= 8, got {points}")));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::Grid(format!("half width must be positive, got {half_width}")));
    }
    let n = points;
    let wavenumbers: Vec<f64> = (0..n).map(|j| signed_index(j, n) as f64 * std::f64::consts::PI / half_width).collect();
    let total = n.pow(dim as u32);
    let mut k2 = vec![0.0; total];
    for (flat, slot) in k2.iter_mut().enumerate() {
        let mut rest = flat;
        let mut acc = 0.0;
        for _ in 0..dim {
            let k = wavenumbers[rest % n];
            acc += k * k;
            rest /= n;
        }
        *slot = acc;
    }
    let mut k2_unique = k2.clone();
    k2_unique.sort_by(|a, b| a.partial_cmp(b).unwrap());
    k2_unique.dedup();
    let k2_slot = k2
        .iter()
        .map(|v| k2_unique.binary_search_by(|u| u.partial_cmp(v).unwrap()).unwrap() as u32)
        .collect();

    let mut planner = FftPlanner::new();
    Ok(Arc::new(Grid {
        spec: GridSpec { dim, points, half_width },
        dx: 2.0 * half_width / n as f64,
        wavenumbers,
        k2,
        k2_unique,
        k2_slot,
        fwd: planner.plan_fft_forward(n),
        inv: planner.plan_fft_inverse(n),
        fwd_pad: planner.plan_fft_forward(2 * n),
        inv_pad: planner.plan_fft_inverse(2 * n),
    }))
}

/// Signed frequency index of FFT slot `j` on an `n`-point axis.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl Grid {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn dim(&self) -> usize {
        self.spec.dim
    }
    pub fn points(&self) -> usize {
        self.spec.points
    }
    pub fn half_width(&self) -> f64 {
        self.spec.half_width
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    /// Quadrature weight `dx^n`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.spec.dim as i32)
    }
    pub fn len(&self) -> usize {
        self.k2.len()
    }
    pub fn is_empty(&self) -> bool {
        self.k2.is_empty()
    }
    /// Per-axis wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI * (self.spec.points / 2) as f64 / self.spec.half_width
    }
    /// `|k|²` per mode, flat order.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }
    pub fn distinct_k2(&self) -> &[f64] {
        &self.k2_unique
    }
    pub(crate) fn k2_slots(&self) -> &[u32] {
        &self.k2_slot
    }
    /// Node coordinates along one axis: `x_j = −L + j dx`.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.spec.points).map(|j| -self.spec.half_width + j as f64 * self.dx).collect()
    }
    /// Per-axis slot indices of a flat index, most significant axis first.
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let n = self.spec.points;
        let mut out = [0usize; 3];
        let mut rest = flat;
        for a in (0..self.spec.dim).rev() {
            out[a] = rest % n;
            rest /= n;
        }
        out
    }
    /// Physical position of a flat node index (unused axes are zero).
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for a in 0..self.spec.dim {
            x[a] = -self.spec.half_width + idx[a] as f64 * self.dx;
        }
        x
    }
    /// Wave vector of a flat mode index.
    pub fn wave_vector(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut k = [0.0; 3];
        for a in 0..self.spec.dim {
            k[a] = self.wavenumbers[idx[a]];
        }
        k
    }
    /// Largest `|m|/(N/2)` over the axes of a mode, in `[0, 1]`.
    pub fn relative_axis_frequency(&self, flat: usize) -> f64 {
        let idx = self.unflatten(flat);
        let half = (self.spec.points / 2) as f64;
        (0..self.spec.dim)
            .map(|a| signed_index(idx[a], self.spec.points).unsigned_abs() as f64 / half)
            .fold(0.0, f64::max)
    }

    fn parity(&self, flat: usize) -> f64 {
        let idx = self.unflatten(flat);
        let s: i64 = (0..self.spec.dim).map(|a| signed_index(idx[a], self.spec.points)).sum();
        if s.rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Factor `c` with `modes_k = c · û(k)`.
    pub fn transform_scale(&self, flat: usize) -> f64 {
        let n = self.spec.points as f64;
        let d = self.spec.dim as i32;
        self.parity(flat) * n.powf(d as f64 / 2.0) / (2.0 * self.spec.half_width).powi(d)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape { expected: self.len(), actual: len });
        }
        Ok(())
    }

    /// Forward transform of real samples.
    pub fn transform_forward(self: &Arc<Self>, samples: &[f64]) -> Result<SpectralField> {
        self.check_len(samples.len())?;
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, self.spec.points, self.spec.dim, self.fwd.as_ref());
        let scale = 1.0 / (self.len() as f64).sqrt();
        buf.iter_mut().for_each(|c| *c *= scale);
        Ok(SpectralField { grid: Arc::clone(self), modes: buf })
    }

    /// Inverse transform, returning the real part.
    pub fn transform_inverse(&self, field: &SpectralField) -> Result<Vec<f64>> {
        self.check_len(field.modes.len())?;
        let mut buf = field.modes.clone();
        fft_nd(&mut buf, self.spec.points, self.spec.dim, self.inv.as_ref());
        let scale = 1.0 / (self.len() as f64).sqrt();
        Ok(buf.iter().map(|c| c.re * scale).collect())
    }

    /// Applies a pointwise map in physical space on the 2× zero-padded grid and
    /// returns the truncated modes of the result. The Nyquist modes are dropped
    /// on both the way in and the way out.
    pub fn padded_pointwise(&self, modes: &[Complex64], f: impl Fn(f64) -> f64) -> Result<Vec<Complex64>> {
        self.check_len(modes.len())?;
        let n = self.spec.points;
        let d = self.spec.dim;
        let np = 2 * n;
        let total_pad = np.pow(d as u32);
        let gain = 2f64.powf(d as f64 / 2.0);
        let mut pad = vec![Complex64::new(0.0, 0.0); total_pad];
        for (flat, &c) in modes.iter().enumerate() {
            if let Some(pflat) = self.padded_slot(flat) {
                pad[pflat] = c * gain;
            }
        }
        fft_nd(&mut pad, np, d, self.inv_pad.as_ref());
        let inv_scale = 1.0 / (total_pad as f64).sqrt();
        for c in pad.iter_mut() {
            *c = Complex64::new(f(c.re * inv_scale), 0.0);
        }
        fft_nd(&mut pad, np, d, self.fwd_pad.as_ref());
        let out_scale = inv_scale / gain;
        let mut out = vec![Complex64::new(0.0, 0.0); modes.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            if let Some(pflat) = self.padded_slot(flat) {
                *slot = pad[pflat] * out_scale;
            }
        }
        Ok(out)
    }

    fn padded_slot(&self, flat: usize) -> Option<usize> {
        let n = self.spec.points;
        let np = 2 * n;
        let idx = self.unflatten(flat);
        let mut pflat = 0usize;
        for a in 0..self.spec.dim {
            if idx[a] == n / 2 {
                return None;
            }
            let m = signed_index(idx[a], n);
            pflat = pflat * np + m.rem_euclid(np as i64) as usize;
        }
        Some(pflat)
    }
}

/// In-place unnormalized n-dimensional FFT on a cubic row-major array.
fn fft_nd(buf: &mut [Complex64], n: usize, dim: usize, plan: &dyn Fft<f64>) {
    // last axis is contiguous: the plan processes every row in one call
    plan.process(buf);
    if dim == 1 {
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let outer = buf.len() / (stride * n);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * n + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + j * stride];
                }
                plan.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    buf[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Modal coefficients of a field on a grid.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    modes: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField { grid: Arc::clone(grid), modes: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_modes(grid: &Arc<Grid>, modes: Vec<Complex64>) -> Result<Self> {
        grid.check_len(modes.len())?;
        Ok(SpectralField { grid: Arc::clone(grid), modes })
    }

    /// Field whose continuous Fourier transform at each grid wave vector is
    /// `transform(k)`.
    pub fn from_transform(grid: &Arc<Grid>, transform: impl Fn([f64; 3]) -> f64) -> Self {
        let modes = (0..grid.len())
            .map(|flat| Complex64::new(grid.transform_scale(flat) * transform(grid.wave_vector(flat)), 0.0))
            .collect();
        SpectralField { grid: Arc::clone(grid), modes }
    }

    /// Approximate continuous transform `û(k)` at a flat mode index.
    pub fn transform_at(&self, flat: usize) -> Complex64 {
        self.modes[flat] / self.grid.transform_scale(flat)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }
    pub fn modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    pub fn to_samples(&self) -> Vec<f64> {
        // lengths match by construction
        self.grid.transform_inverse(self).expect("field length matches its grid")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SpectralField { grid: Arc::clone(&self.grid), modes: self.modes.iter().map(|c| c * factor).collect() }
    }

    pub fn same_grid(&self, other: &SpectralField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec() == other.grid.spec()
    }

    pub fn add_scaled(&mut self, other: &SpectralField, factor: f64) {
        for (a, b) in self.modes.iter_mut().zip(&other.modes) {
            *a += b * factor;
        }
    }

    pub fn difference(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Weighted modal sum `dx^n Σ w(|k|²) |modes|²`.
    pub fn weighted_energy(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let vol = self.grid.cell_volume();
        vol * self
            .modes
            .iter()
            .zip(self.grid.k2())
            .map(|(c, &k2)| weight(k2) * c.norm_sqr())
            .sum::<f64>()
    }
}

/// Modal coefficients of `(u, u_t)` at a time.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub u_hat: SpectralField,
    pub v_hat: SpectralField,
    pub time: f64,
}

impl EvolutionState {
    pub fn new(u_hat: SpectralField, v_hat: SpectralField, time: f64) -> Result<Self> {
        if !u_hat.same_grid(&v_hat) {
            return Err(Error::Grid("u and u_t live on different grids".into()));
        }
        Ok(EvolutionState { u_hat, v_hat, time })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u_hat.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u_hat.is_finite() && self.v_hat.is_finite()
    }
}

/// Entries of the solution matrix of `w'' + w' + k² w = 0`:
/// `w(t) = A w(0) + B w'(0)`, `w'(t) = A_t w(0) + B_t w'(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorEntries {
    pub a: f64,
    pub b: f64,
    pub a_t: f64,
    pub b_t: f64,
}

const SERIES_THRESHOLD: f64 = 1e-8;

/// Exact propagator of one Fourier mode over time `t`.
///
/// With `δ² = 1/4 − k²` the entries are `e^{-t/2}` times combinations of
/// `cosh(δt)` and `sinh(δt)/δ`, continued to `cos`/`sin` for `k² > 1/4` and
/// to a Taylor series in `(δt)²` near the double root `k² = 1/4`. For large
/// `δt` the hyperbolic branch is rewritten through `e^{(δ−1/2)t}` with
/// `δ − 1/2 = −2k²/(1 + 2δ)` so nothing overflows and the slow mode stays
/// accurate.
pub fn propagator_entries(t: f64, k2: f64) -> Result<PropagatorEntries> {
    if t.is_nan() || k2.is_nan() || t < 0.0 || k2 < 0.0 || !t.is_finite() || !k2.is_finite() {
        return Err(Error::Domain(format!("propagator needs finite t >= 0, k2 >= 0; got t = {t}, k2 = {k2}")));
    }
    let d2 = 0.25 - k2;
    let z = d2 * t * t;
    let (cosh_part, sinch_part) = if z.abs() < SERIES_THRESHOLD {
        let c = 1.0 + z / 2.0 + z * z / 24.0;
        let s = t * (1.0 + z / 6.0 + z * z / 120.0);
        let decay = (-0.5 * t).exp();
        (decay * c, decay * s)
    } else if d2 > 0.0 {
        let delta = d2.sqrt();
        let dt = delta * t;
        if dt < 1.0 {
            let decay = (-0.5 * t).exp();
            (decay * dt.cosh(), decay * dt.sinh() / delta)
        } else {
            let two_delta = 2.0 * delta;
            let slow = (-2.0 * k2 * t / (1.0 + two_delta)).exp();
            let em = (-two_delta * t).exp();
            let s = slow * (-(-two_delta * t).exp_m1()) / two_delta;
            let a = slow * ((1.0 + two_delta) - em * 4.0 * k2 / (1.0 + two_delta)) / (4.0 * delta);
            let bt = slow * (em * (1.0 + two_delta) - 4.0 * k2 / (1.0 + two_delta)) / (4.0 * delta);
            return Ok(PropagatorEntries { a, b: s, a_t: -k2 * s, b_t: bt });
        }
    } else {
        let omega = (-d2).sqrt();
        let decay = (-0.5 * t).exp();
        let wt = omega * t;
        (decay * wt.cos(), decay * wt.sin() / omega)
    };
    Ok(PropagatorEntries {
        a: cosh_part + 0.5 * sinch_part,
        b: sinch_part,
        a_t: -k2 * sinch_part,
        b_t: cosh_part - 0.5 * sinch_part,
    })
}

/// Propagator entries for every distinct `|k|²` of a grid at a fixed step.
#[derive(Debug, Clone)]
pub struct PropagatorTable {
    dt: f64,
    entries: Vec<PropagatorEntries>,
}

impl PropagatorTable {
    pub fn new(grid: &Grid, dt: f64) -> Result<Self> {
        let entries = grid.distinct_k2().iter().map(|&k2| propagator_entries(dt, k2)).collect::<Result<_>>()?;
        Ok(PropagatorTable { dt, entries })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, state: &mut EvolutionState) {
        let slots = state.u_hat.grid.k2_slots();
        let (u, v) = (&mut state.u_hat.modes, &mut state.v_hat.modes);
        for ((uu, vv), &slot) in u.iter_mut().zip(v.iter_mut()).zip(slots) {
            let e = &self.entries[slot as usize];
            let nu = *uu * e.a + *vv * e.b;
            let nv = *uu * e.a_t + *vv * e.b_t;
            *uu = nu;
            *vv = nv;
        }
        state.time += self.dt;
    }

    /// Adds `B(dt)·forcing` to `u` and `B_t(dt)·forcing` to `u_t`: the flow of
    /// the state `(0, forcing)`.
    pub fn apply_to_impulse(&self, forcing: &SpectralField, state: &mut EvolutionState, weight: f64) {
        let slots = forcing.grid.k2_slots();
        for (((uu, vv), f), &slot) in state
            .u_hat
            .modes
            .iter_mut()
            .zip(state.v_hat.modes.iter_mut())
            .zip(&forcing.modes)
            .zip(slots)
        {
            let e = &self.entries[slot as usize];
            *uu += f * (e.b * weight);
            *vv += f * (e.b_t * weight);
        }
    }
}

/// Exact linear flow of the damped wave equation over `dt`.
pub fn apply_linear_flow(state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("flow time must be non-negative, got {dt}")));
    }
    let table = PropagatorTable::new(state.grid(), dt)?;
    let mut out = state.clone();
    table.apply(&mut out);
    Ok(out)
}

/// Treatment of the `k = 0` mode by [`apply_multiplier`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroMode {
    /// Multiply the zero mode by this value.
    Value(f64),
    /// Leave the zero mode untouched.
    Skip,
}

/// Multiplies every mode by `symbol(|k|)`.
pub fn apply_multiplier(field: &SpectralField, symbol: impl Fn(f64) -> f64, zero: ZeroMode) -> Result<SpectralField> {
    let mut out = field.clone();
    for (flat, (c, &k2)) in out.modes.iter_mut().zip(field.grid.k2()).enumerate() {
        let s = if k2 == 0.0 {
            match zero {
                ZeroMode::Skip => continue,
                ZeroMode::Value(v) => v,
            }
        } else {
            symbol(k2.sqrt())
        };
        if !s.is_finite() {
            return Err(Error::Domain(format!("multiplier is not finite at mode {flat} (|k|² = {k2})")));
        }
        *c *= s;
    }
    Ok(out)
}
