//! Time integration of `u_tt − Δu + u_t = f(u)`.
//!
//! [`step`] is a Strang splitting: half a step of the exact linear flow, a
//! full nonlinear kick `u_t += dt·f(u)` evaluated on the 2× padded grid, and
//! another half step of the linear flow. [`simulate`] wraps it in a
//! step-doubling controller with blow-up bracketing. [`picard_iterate`]
//! builds the fixed-point iterates `u⁽ᵏ⁺¹⁾ = u_lin + N u⁽ᵏ⁾` directly, with the
//! Duhamel integral evaluated by trapezoidal quadrature in `τ` and the exact
//! kernel applied per mode.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::digest::content_hash;
use crate::error::{Error, Result};
use crate::exponents::{ProblemParams, Setting};
use crate::initdata::{synthesize, DataSpec, InitialData, Profile};
use crate::norms::{norm, x_norm, NormKind, NormSample, XNormResult};
use crate::spectral::{EvolutionState, Grid, GridSpec, PropagatorTable, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `|u|^p`
    AbsPower,
    /// `|u|^{p−1} u`
    SignedPower,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub p: f64,
}

impl Nonlinearity {
    pub fn new(kind: NonlinearityKind, p: f64) -> Result<Self> {
        if kind != NonlinearityKind::Zero && !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("nonlinearity power must exceed 1, got {p}")));
        }
        Ok(Nonlinearity { kind, p })
    }

    pub fn zero() -> Self {
        Nonlinearity { kind: NonlinearityKind::Zero, p: 2.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == NonlinearityKind::Zero
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::AbsPower => u.abs().powf(self.p),
            NonlinearityKind::SignedPower => u.abs().powf(self.p - 1.0) * u,
            NonlinearityKind::Zero => 0.0,
        }
    }
}

/// Step-size control for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub dt_init: f64,
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub rel_tol: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
}

fn default_dt_max() -> f64 {
    0.5
}
fn default_threshold() -> f64 {
    1e6
}

impl Default for StepController {
    fn default() -> Self {
        StepController { dt_init: 1e-2, dt_min: 1e-10, dt_max: default_dt_max(), rel_tol: 1e-7, blowup_threshold: default_threshold() }
    }
}

impl StepController {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Config(format!(
                "need 0 < dt_min < dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.rel_tol > 1e-12 && self.rel_tol < 1e-2) {
            return Err(Error::Config(format!("rel_tol must lie in (1e-12, 1e-2), got {}", self.rel_tol)));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::Config("blow-up threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Geometric output times `first·ratio^j`, preceded by `t = 0` and closed by the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub first: f64,
    pub ratio: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { first: 0.1, ratio: 1.1 }
    }
}

pub fn sample_times(horizon: f64, sampling: Sampling) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    if !(sampling.first > 0.0 && sampling.ratio > 1.0) {
        return Err(Error::Config("sampling needs first > 0 and ratio > 1".into()));
    }
    let mut out = vec![0.0];
    let mut t = sampling.first;
    while t < horizon * (1.0 - 1e-9) {
        out.push(t);
        t *= sampling.ratio;
    }
    out.push(horizon);
    Ok(out)
}

/// Problem description as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dimension: u32,
    pub gamma: f64,
    pub nonlinearity: NonlinearityKind,
    /// Power of the nonlinearity; the critical power when absent.
    #[serde(default)]
    pub power: Option<f64>,
    /// Run even when γ is inadmissible or the power is subcritical (blow-up experiments).
    #[serde(default)]
    pub allow_inadmissible: bool,
}

impl ProblemSpec {
    pub fn params(&self) -> Result<ProblemParams> {
        let setting = Setting::euclidean(self.dimension)?;
        match self.power {
            Some(p) => ProblemParams::with_power(setting, self.gamma, p),
            None => ProblemParams::critical(setting, self.gamma),
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let p = self.params()?.p;
        Nonlinearity::new(self.nonlinearity, p)
    }

    /// Whether a blow-up would contradict the global existence regime.
    pub fn expects_global_existence(&self) -> Result<bool> {
        let params = self.params()?;
        Ok(self.nonlinearity == NonlinearityKind::Zero
            || (params.verdict.admissible && params.p >= params.critical_p() * (1.0 - 1e-12)))
    }
}

/// Everything [`simulate`] needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    pub problem: ProblemSpec,
    pub grid: GridSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub controller: StepController,
    pub horizon: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub l2: f64,
    pub h1dot: f64,
    pub linf: f64,
    pub hneg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    ReachedHorizon { horizon: f64 },
    /// Threshold crossed inside `[bracket_lo, bracket_hi]`; `t_life` is the midpoint.
    BlowUp { t_life: f64, bracket_lo: f64, bracket_hi: f64 },
}

impl TrajectoryStatus {
    pub fn is_blow_up(&self) -> bool {
        matches!(self, TrajectoryStatus::BlowUp { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub status: TrajectoryStatus,
    pub config_hash: String,
    /// Largest fraction of spectral energy seen in the top third of the band.
    pub max_tail_fraction: f64,
    pub under_resolved: bool,
    pub data_eps: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn norm_samples(&self) -> Vec<NormSample> {
        self.samples.iter().map(|s| NormSample { t: s.t, l2: s.l2, grad: s.h1dot }).collect()
    }
}

const TAIL_LIMIT: f64 = 1e-6;
const WRAP_PAD: f64 = 10.0;

/// Wrap-around warnings for a run on the torus: the box should contain the
/// data support plus the distance travelled at unit speed plus a pad.
pub fn domain_warnings(grid: &GridSpec, data: &DataSpec, horizon: f64) -> Vec<String> {
    let support = match &data.profile {
        Profile::GaussianBump { width, center } => {
            Some(center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + 6.0 * width)
        }
        Profile::PowerLaw { .. } | Profile::SlowDecayPositive { .. } => None,
    };
    match support {
        Some(s) if grid.half_width < s + horizon + WRAP_PAD => vec![format!(
            "half width {} is below support {s:.2} + horizon {horizon} + pad {WRAP_PAD}; wrap-around may pollute the run",
            grid.half_width
        )],
        Some(_) => Vec::new(),
        None => vec!["profile has unbounded support; the torus periodizes its tails".to_string()],
    }
}

fn state_norm(s: &EvolutionState) -> f64 {
    s.u_hat.weighted_energy(|_| 1.0).sqrt() + s.v_hat.weighted_energy(|_| 1.0).sqrt()
}

fn tail_fraction(s: &EvolutionState) -> f64 {
    let grid = s.grid();
    let mut top = 0.0;
    let mut total = 0.0;
    for (i, (u, v)) in s.u_hat.modes().iter().zip(s.v_hat.modes()).enumerate() {
        let e = u.norm_sqr() + v.norm_sqr();
        total += e;
        if grid.relative_axis_frequency(i) > 2.0 / 3.0 {
            top += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

/// Splitting integrator with a small cache of propagator tables.
struct Splitter {
    grid: Arc<Grid>,
    f: Nonlinearity,
    cache: Vec<PropagatorTable>,
}

impl Splitter {
    fn new(grid: &Arc<Grid>, f: Nonlinearity) -> Self {
        Splitter { grid: Arc::clone(grid), f, cache: Vec::new() }
    }

    fn table(&mut self, dt: f64) -> Result<&PropagatorTable> {
        if let Some(pos) = self.cache.iter().position(|t| t.dt() == dt) {
            return Ok(&self.cache[pos]);
        }
        if self.cache.len() >= 8 {
            self.cache.remove(0);
        }
        self.cache.push(PropagatorTable::new(&self.grid, dt)?);
        Ok(self.cache.last().expect("just pushed"))
    }

    fn step(&mut self, state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
        let f = self.f;
        let grid = Arc::clone(&self.grid);
        let half = self.table(0.5 * dt)?.clone();
        let mut s = state.clone();
        half.apply(&mut s);
        if !f.is_zero() {
            let kick = grid.padded_pointwise(s.u_hat.modes(), |u| f.eval(u))?;
            for (v, w) in s.v_hat.modes_mut().iter_mut().zip(kick) {
                *v += w * dt;
            }
        }
        half.apply(&mut s);
        // keep the clock exact
        s.time = state.time + dt;
        Ok(s)
    }
}

/// One Strang step of size `dt`.
pub fn step(state: &EvolutionState, dt: f64, f: Nonlinearity) -> Result<EvolutionState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    if !state.is_finite() {
        return Err(Error::Numerical("state is not finite".into()));
    }
    let out = Splitter::new(state.grid(), f).step(state, dt)?;
    if !out.is_finite() {
        return Err(Error::Numerical(format!("non-finite state after a step of {dt} at t = {}", state.time)));
    }
    Ok(out)
}

fn record(state: &EvolutionState, gamma: f64) -> Result<TrajectorySample> {
    Ok(TrajectorySample {
        t: state.time,
        l2: norm(&state.u_hat, NormKind::L2)?,
        h1dot: norm(&state.u_hat, NormKind::H1dot)?,
        linf: norm(&state.u_hat, NormKind::Linf)?,
        hneg: norm(&state.u_hat, NormKind::Hneg(gamma))?,
    })
}

/// Validates a setup and builds its grid and data.
pub fn prepare(setup: &SimulationSetup) -> Result<(Arc<Grid>, ProblemParams, Nonlinearity, InitialData)> {
    let params = setup.problem.params()?;
    if setup.grid.dim as u32 != setup.problem.dimension {
        return Err(Error::Config(format!(
            "grid dimension {} differs from problem dimension {}",
            setup.grid.dim, setup.problem.dimension
        )));
    }
    if !setup.problem.allow_inadmissible {
        if !params.verdict.admissible {
            return Err(Error::Refused(format!(
                "gamma = {} is not admissible for {} (set allow_inadmissible for blow-up runs)",
                params.gamma, params.setting
            )));
        }
        if setup.problem.nonlinearity != NonlinearityKind::Zero && params.p < params.critical_p() * (1.0 - 1e-12) {
            return Err(Error::Refused(format!(
                "power {} is below the critical power {} (set allow_inadmissible for blow-up runs)",
                params.p,
                params.critical_p()
            )));
        }
    }
    setup.controller.validate()?;
    let f = setup.problem.nonlinearity()?;
    let grid = setup.grid.build()?;
    let data = synthesize(&setup.data, &grid, params.gamma)?;
    Ok((grid, params, f, data))
}

/// Runs one simulation to the horizon or to blow-up.
pub fn simulate(setup: &SimulationSetup) -> Result<Trajectory> {
    let (grid, params, f, data) = prepare(setup)?;
    let gamma = params.gamma;
    let ctrl = setup.controller;
    let times = sample_times(setup.horizon, setup.sampling)?;
    let mut warnings = domain_warnings(&setup.grid, &setup.data, setup.horizon);
    if data.truncated {
        warnings.push("initial profile truncated at the box edges".into());
    }

    let mut state = EvolutionState::new(data.u0.clone(), data.u1.clone(), 0.0)?;
    let mut samples = vec![record(&state, gamma)?];
    let mut max_tail = tail_fraction(&state);
    let mut splitter = Splitter::new(&grid, f);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut dt = ctrl.dt_init;
    let mut dt_cap = ctrl.dt_max;
    let mut status = TrajectoryStatus::ReachedHorizon { horizon: setup.horizon };

    'outer: for &target in &times[1..] {
        if f.is_zero() {
            let table = PropagatorTable::new(&grid, target - state.time)?;
            table.apply(&mut state);
            state.time = target;
            accepted += 1;
        } else {
            while state.time < target {
                let remaining = target - state.time;
                let h = dt.min(dt_cap).min(remaining);
                let last = h >= remaining;
                let full = splitter.step(&state, h)?;
                let mid = splitter.step(&state, 0.5 * h)?;
                let mut fine = splitter.step(&mid, 0.5 * h)?;
                let crossed = !fine.is_finite()
                    || !full.is_finite()
                    || norm(&fine.u_hat, NormKind::Linf).map_or(true, |m| m > ctrl.blowup_threshold);
                if crossed {
                    rejected += 1;
                    if h <= ctrl.dt_min {
                        status = TrajectoryStatus::BlowUp {
                            t_life: state.time + 0.5 * h,
                            bracket_lo: state.time,
                            bracket_hi: state.time + h,
                        };
                        break 'outer;
                    }
                    dt = 0.5 * h;
                    dt_cap = dt;
                    continue;
                }
                let mut diff = fine.clone();
                diff.u_hat.add_scaled(&full.u_hat, -1.0);
                diff.v_hat.add_scaled(&full.v_hat, -1.0);
                let err = state_norm(&diff) / state_norm(&fine).max(f64::MIN_POSITIVE);
                let factor = if err == 0.0 { 2.0 } else { (0.9 * (ctrl.rel_tol / err).powf(1.0 / 3.0)).min(2.0) };
                if err > ctrl.rel_tol {
                    rejected += 1;
                    dt = h * factor.max(0.2);
                    if dt < ctrl.dt_min {
                        let linf = norm(&state.u_hat, NormKind::Linf).unwrap_or(f64::NAN);
                        return Err(Error::Numerical(format!(
                            "step controller exhausted at t = {:.6} (dt {dt:.3e} < dt_min {:.3e}) with L∞ = {linf:.3e} below the blow-up threshold {:.1e}",
                            state.time, ctrl.dt_min, ctrl.blowup_threshold
                        )));
                    }
                    continue;
                }
                accepted += 1;
                if last {
                    fine.time = target;
                }
                state = fine;
                if !last {
                    dt = (h * factor).max(ctrl.dt_min);
                }
            }
        }
        samples.push(record(&state, gamma)?);
        max_tail = max_tail.max(tail_fraction(&state));
    }

    let under_resolved = !status.is_blow_up() && max_tail > TAIL_LIMIT;
    if under_resolved {
        warnings.push(format!("spectral tail fraction {max_tail:.3e} exceeds {TAIL_LIMIT:e}; run is under-resolved"));
    }
    Ok(Trajectory {
        samples,
        status,
        config_hash: content_hash(setup),
        max_tail_fraction: max_tail,
        under_resolved,
        data_eps: data.eps,
        accepted_steps: accepted,
        rejected_steps: rejected,
        warnings,
    })
}

/// Norm series and solution norm of one Picard iterate.
#[derive(Debug, Clone)]
pub struct PicardIterate {
    pub series: Vec<NormSample>,
    pub x_norm: XNormResult,
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    /// `u⁽⁰⁾ = u_lin, …, u⁽ᴷ⁾`.
    pub iterates: Vec<PicardIterate>,
    /// `δ_k = ‖u⁽ᵏ⁺¹⁾ − u⁽ᵏ⁾‖_X` for `k = 0..K`.
    pub deltas: Vec<XNormResult>,
    /// `δ_{k+1} / δ_k`; `None` where `δ_k = 0`.
    pub ratios: Vec<Option<f64>>,
    pub tau_points: usize,
}

/// Picard iteration of `Λu = u_lin + Nu` on `[0, horizon]`.
///
/// All iterates advance together on a uniform `τ` grid: iterate `k + 1`
/// only needs `f(u⁽ᵏ⁾)` up to the current time, so nothing is stored
/// beyond one accumulator per iterate. The Duhamel accumulator obeys
/// `W(t+h) = S(h)[W(t) + (h/2)(0, f(t))] + (h/2)(0, f(t+h))`, which is the
/// composite trapezoidal rule for `∫₀ᵗ S(t−τ)(0, f(τ)) dτ`.
pub fn picard_iterate(
    u0: &SpectralField,
    u1: &SpectralField,
    f: Nonlinearity,
    gamma: f64,
    horizon: f64,
    iterations: usize,
    tau_step: f64,
) -> Result<PicardReport> {
    if iterations < 3 {
        return Err(Error::Config(format!("need at least 3 Picard iterations, got {iterations}")));
    }
    if !(horizon > 0.0 && tau_step > 0.0 && tau_step <= horizon) {
        return Err(Error::Config(format!("need 0 < tau_step <= horizon, got {tau_step} / {horizon}")));
    }
    let grid = Arc::clone(u0.grid());
    let k_max = iterations;
    let zero_state = || EvolutionState::new(SpectralField::zeros(&grid), SpectralField::zeros(&grid), 0.0);
    let mut lin = EvolutionState::new(u0.clone(), u1.clone(), 0.0)?;
    let mut acc: Vec<EvolutionState> = (0..k_max).map(|_| zero_state()).collect::<Result<_>>()?;

    let forcing = |u: &SpectralField| -> Result<SpectralField> {
        if f.is_zero() {
            return Ok(SpectralField::zeros(&grid));
        }
        SpectralField::from_modes(&grid, grid.padded_pointwise(u.modes(), |v| f.eval(v))?)
    };

    let mut series: Vec<Vec<NormSample>> = vec![Vec::new(); k_max + 1];
    let mut diff_series: Vec<Vec<NormSample>> = vec![Vec::new(); k_max];

    let observe = |t: f64, lin: &EvolutionState, acc: &[EvolutionState], series: &mut [Vec<NormSample>], diffs: &mut [Vec<NormSample>]| {
        for k in 0..=k_max {
            let mut u = lin.u_hat.clone();
            if k > 0 {
                u.add_scaled(&acc[k - 1].u_hat, 1.0);
            }
            series[k].push(NormSample { t, l2: u.weighted_energy(|_| 1.0).sqrt(), grad: u.weighted_energy(|k2| k2).sqrt() });
        }
        for k in 0..k_max {
            let mut d = acc[k].u_hat.clone();
            if k > 0 {
                d.add_scaled(&acc[k - 1].u_hat, -1.0);
            }
            diffs[k].push(NormSample { t, l2: d.weighted_energy(|_| 1.0).sqrt(), grad: d.weighted_energy(|k2| k2).sqrt() });
        }
    };

    // forcing of every iterate at the current time
    let mut prev: Vec<SpectralField> = Vec::with_capacity(k_max);
    {
        let f0 = forcing(&lin.u_hat)?;
        for _ in 0..k_max {
            prev.push(f0.clone());
        }
    }
    observe(0.0, &lin, &acc, &mut series, &mut diff_series);

    let steps = (horizon / tau_step).ceil() as usize;
    let mut table = PropagatorTable::new(&grid, tau_step)?;
    let mut t = 0.0;
    for i in 0..steps {
        let t_next = if i + 1 == steps { horizon } else { (i + 1) as f64 * tau_step };
        let h = t_next - t;
        if (h - table.dt()).abs() > 1e-14 * h {
            table = PropagatorTable::new(&grid, h)?;
        }
        table.apply(&mut lin);
        for k in 0..k_max {
            table.apply(&mut acc[k]);
            table.apply_to_impulse(&prev[k], &mut acc[k], 0.5 * h);
        }
        for k in 0..k_max {
            let mut u = lin.u_hat.clone();
            if k > 0 {
                u.add_scaled(&acc[k - 1].u_hat, 1.0);
            }
            let fk = forcing(&u)?;
            acc[k].v_hat.add_scaled(&fk, 0.5 * h);
            if !acc[k].is_finite() {
                return Err(Error::Numerical(format!("Picard iterate {} is not finite at t = {t_next}", k + 1)));
            }
            prev[k] = fk;
        }
        t = t_next;
        observe(t, &lin, &acc, &mut series, &mut diff_series);
    }

    let iterates = series
        .into_iter()
        .map(|s| Ok(PicardIterate { x_norm: x_norm(&s, gamma)?, series: s }))
        .collect::<Result<Vec<_>>>()?;
    let deltas = diff_series.iter().map(|s| x_norm(s, gamma)).collect::<Result<Vec<_>>>()?;
    let ratios = deltas
        .windows(2)
        .map(|w| if w[0].value > 0.0 { Some(w[1].value / w[0].value) } else { None })
        .collect();
    Ok(PicardReport { iterates, deltas, ratios, tau_points: steps + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::Placement;
    use crate::spectral::{apply_linear_flow, make_grid};
    use rustfft::num_complex::Complex64;

    fn gaussian_state(grid: &Arc<Grid>, amp: f64) -> EvolutionState {
        let s: Vec<f64> = grid.axis_coords().iter().map(|x| amp * (-x * x / 2.0).exp()).collect();
        let u = grid.transform_forward(&s).unwrap();
        let v = u.scaled(0.3);
        EvolutionState::new(u, v, 0.0).unwrap()
    }

    fn max_mode_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.modes().iter().zip(b.modes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_nonlinearity_step_is_linear_flow() {
        let g = make_grid(1, 128, 20.0).unwrap();
        let st = gaussian_state(&g, 1.0);
        let a = step(&st, 0.37, Nonlinearity::zero()).unwrap();
        let b = apply_linear_flow(&st, 0.37).unwrap();
        assert!(max_mode_diff(&a.u_hat, &b.u_hat) < 1e-12);
        assert!(max_mode_diff(&a.v_hat, &b.v_hat) < 1e-12);
    }

    /// RK4 for `w'' + w' = w^p`.
    fn scalar_oracle(w0: f64, v0: f64, p: f64, t: f64) -> f64 {
        let n = 20000;
        let h = t / n as f64;
        let rhs = |w: f64, v: f64| (v, -v + w.abs().powf(p));
        let (mut w, mut v) = (w0, v0);
        for _ in 0..n {
            let (a1, b1) = rhs(w, v);
            let (a2, b2) = rhs(w + 0.5 * h * a1, v + 0.5 * h * b1);
            let (a3, b3) = rhs(w + 0.5 * h * a2, v + 0.5 * h * b2);
            let (a4, b4) = rhs(w + h * a3, v + h * b3);
            w += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        w
    }

    #[test]
    fn constant_state_matches_scalar_ode() {
        let g = make_grid(1, 16, 3.0).unwrap();
        let c = 0.8;
        let f = Nonlinearity::new(NonlinearityKind::AbsPower, 3.0).unwrap();
        let u = g.transform_forward(&vec![c; 16]).unwrap();
        let st = EvolutionState::new(u, SpectralField::zeros(&g), 0.0).unwrap();
        let mut errs = Vec::new();
        for dt in [0.1, 0.05] {
            let out = step(&st, dt, f).unwrap();
            let w = out.u_hat.to_samples()[0];
            errs.push((w - scalar_oracle(c, 0.0, 3.0, dt)).abs());
        }
        // local error O(dt³)
        assert!(errs[0] < 1e-3);
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 2.6, "local order {order}");
    }

    #[test]
    fn step_doubling_is_consistent() {
        let g = make_grid(1, 256, 25.0).unwrap();
        let st = gaussian_state(&g, 0.8);
        let f = Nonlinearity::new(NonlinearityKind::SignedPower, 3.0).unwrap();
        let mut diffs = Vec::new();
        for dt in [0.2, 0.1] {
            let one = step(&st, dt, f).unwrap();
            let two = step(&step(&st, dt / 2.0, f).unwrap(), dt / 2.0, f).unwrap();
            diffs.push(max_mode_diff(&one.u_hat, &two.u_hat) + max_mode_diff(&one.v_hat, &two.v_hat));
        }
        let order = (diffs[0] / diffs[1]).log2();
        assert!(order > 2.6 && order < 3.4, "order {order}");
    }

    fn march(st: &EvolutionState, dt: f64, steps: usize, f: Nonlinearity) -> EvolutionState {
        (0..steps).fold(st.clone(), |s, _| step(&s, dt, f).unwrap())
    }

    #[test]
    fn splitting_is_second_order_globally() {
        let g = make_grid(1, 256, 25.0).unwrap();
        let st = gaussian_state(&g, 0.8);
        let f = Nonlinearity::new(NonlinearityKind::AbsPower, 3.0).unwrap();
        let horizon = 4.0;
        let reference = march(&st, 0.1 / 8.0, 320, f);
        let err = |dt: f64| {
            let s = march(&st, dt, (horizon / dt).round() as usize, f);
            s.u_hat.difference(&reference.u_hat).weighted_energy(|_| 1.0).sqrt()
        };
        let order = (err(0.2) / err(0.1)).log2();
        assert!((1.7..=2.3).contains(&order), "order {order}");
    }

    fn linear_setup(horizon: f64) -> SimulationSetup {
        SimulationSetup {
            problem: ProblemSpec {
                dimension: 1,
                gamma: 0.25,
                nonlinearity: NonlinearityKind::Zero,
                power: None,
                allow_inadmissible: false,
            },
            grid: GridSpec { dim: 1, points: 1024, half_width: 128.0 },
            data: DataSpec {
                profile: Profile::GaussianBump { width: 1.0, center: vec![] },
                amplitude: 1.0,
                target_eps: None,
                placement: Placement::Displacement,
            },
            controller: StepController::default(),
            horizon,
            sampling: Sampling::default(),
        }
    }

    #[test]
    fn linear_simulation_is_exact() {
        let setup = linear_setup(50.0);
        let traj = simulate(&setup).unwrap();
        assert!(matches!(traj.status, TrajectoryStatus::ReachedHorizon { .. }));
        let (grid, _, _, data) = prepare(&setup).unwrap();
        let _ = grid;
        let st = EvolutionState::new(data.u0, data.u1, 0.0).unwrap();
        let jump = apply_linear_flow(&st, 50.0).unwrap();
        let direct = norm(&jump.u_hat, NormKind::L2).unwrap();
        let last = traj.samples.last().unwrap();
        assert_eq!(last.t, 50.0);
        assert!((last.l2 - direct).abs() < 1e-10);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert!(traj.samples.windows(2).skip(5).all(|w| w[1].l2 < w[0].l2));
        assert!(!traj.under_resolved);
    }

    #[test]
    fn refuses_inadmissible_without_override() {
        let mut setup = linear_setup(10.0);
        setup.problem.gamma = 0.6;
        assert!(matches!(simulate(&setup), Err(Error::Refused(_))));
        setup.problem.gamma = 0.25;
        setup.problem.nonlinearity = NonlinearityKind::AbsPower;
        setup.problem.power = Some(2.0);
        assert!(matches!(simulate(&setup), Err(Error::Refused(_))));
    }

    #[test]
    fn subcritical_large_data_blows_up() {
        let mut setup = linear_setup(60.0);
        setup.problem.nonlinearity = NonlinearityKind::AbsPower;
        setup.problem.power = Some(2.0);
        setup.problem.allow_inadmissible = true;
        setup.grid = GridSpec { dim: 1, points: 512, half_width: 64.0 };
        setup.data.placement = Placement::Velocity;
        setup.data.amplitude = 1.0;
        let traj = simulate(&setup).unwrap();
        match traj.status {
            TrajectoryStatus::BlowUp { t_life, bracket_lo, bracket_hi } => {
                assert!(t_life > 0.0 && t_life < 60.0);
                assert!(bracket_hi - bracket_lo <= setup.controller.dt_min);
            }
            s => panic!("expected blow-up, got {s:?}"),
        }
    }

    #[test]
    fn lifespan_shrinks_with_amplitude() {
        let mut lives = Vec::new();
        for amp in [0.6, 0.8, 1.0, 1.2] {
            let mut setup = linear_setup(200.0);
            setup.problem.nonlinearity = NonlinearityKind::SignedPower;
            setup.problem.power = Some(2.0);
            setup.problem.allow_inadmissible = true;
            setup.grid = GridSpec { dim: 1, points: 512, half_width: 64.0 };
            setup.data.placement = Placement::Velocity;
            setup.data.amplitude = amp;
            match simulate(&setup).unwrap().status {
                TrajectoryStatus::BlowUp { t_life, .. } => lives.push(t_life),
                s => panic!("amplitude {amp}: {s:?}"),
            }
        }
        assert!(lives.windows(2).all(|w| w[1] <= w[0]), "{lives:?}");
    }

    #[test]
    fn sample_times_geometric() {
        let ts = sample_times(10.0, Sampling { first: 1.0, ratio: 2.0 }).unwrap();
        assert_eq!(ts, vec![0.0, 1.0, 2.0, 4.0, 8.0, 10.0]);
        assert!(sample_times(0.0, Sampling::default()).is_err());
    }

    fn picard_data(eps: f64) -> (SpectralField, SpectralField) {
        let g = make_grid(1, 512, 64.0).unwrap();
        let spec = DataSpec {
            profile: Profile::GaussianBump { width: 1.0, center: vec![] },
            amplitude: 1.0,
            target_eps: Some(eps),
            placement: Placement::Velocity,
        };
        let d = synthesize(&spec, &g, 0.25).unwrap();
        (d.u0, d.u1)
    }

    #[test]
    fn picard_zero_nonlinearity() {
        let (u0, u1) = picard_data(0.01);
        let r = picard_iterate(&u0, &u1, Nonlinearity::zero(), 0.25, 5.0, 3, 0.1).unwrap();
        assert_eq!(r.deltas[0].value, 0.0);
        assert_eq!(r.iterates[1].x_norm, r.iterates[0].x_norm);
        assert!(r.ratios.iter().all(|x| x.is_none()));
    }

    #[test]
    fn picard_contracts_and_converges_in_tau() {
        let f = Nonlinearity::new(NonlinearityKind::AbsPower, 11.0 / 3.0).unwrap();
        let (u0, u1) = picard_data(0.5);
        let a = picard_iterate(&u0, &u1, f, 0.25, 20.0, 4, 0.1).unwrap();
        let b = picard_iterate(&u0, &u1, f, 0.25, 20.0, 4, 0.05).unwrap();
        for r in &a.ratios {
            assert!(r.unwrap() < 0.5);
        }
        let (xa, xb) = (a.iterates[4].x_norm.value, b.iterates[4].x_norm.value);
        assert!((xa - xb).abs() / xb < 0.01);
        let (da, db) = (a.deltas[0].value, b.deltas[0].value);
        assert!((da - db).abs() / db < 0.01, "{da} vs {db}");
    }

    #[test]
    fn picard_first_correction_scales_like_eps_to_p() {
        let p = 3.0;
        let f = Nonlinearity::new(NonlinearityKind::AbsPower, p).unwrap();
        let (u0, u1) = picard_data(0.01);
        let (w0, w1) = picard_data(0.02);
        let a = picard_iterate(&u0, &u1, f, 0.25, 20.0, 3, 0.1).unwrap();
        let b = picard_iterate(&w0, &w1, f, 0.25, 20.0, 3, 0.1).unwrap();
        let ratio = b.deltas[0].value / a.deltas[0].value;
        assert!((ratio / 2f64.powf(p) - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn nonlinearity_values() {
        let a = Nonlinearity::new(NonlinearityKind::AbsPower, 2.5).unwrap();
        let s = Nonlinearity::new(NonlinearityKind::SignedPower, 2.5).unwrap();
        assert_eq!(a.eval(0.0), 0.0);
        assert!((a.eval(-2.0) - 2f64.powf(2.5)).abs() < 1e-14);
        assert!((s.eval(-2.0) + 2f64.powf(2.5)).abs() < 1e-14);
        assert!(Nonlinearity::new(NonlinearityKind::AbsPower, 1.0).is_err());
        let _ = Complex64::new(0.0, 0.0);
    }
}
