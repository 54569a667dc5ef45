//! Post-processing of trajectories: power-law decay fits, weighted bound
//! checks, lifespan sweeps, and a quadrature oracle for the two time
//! integrals that drive the contraction estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{simulate, SimulationSetup, TrajectorySample, TrajectoryStatus};

/// Column of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    L2,
    H1dot,
    Linf,
    Hneg,
}

impl Column {
    pub fn get(&self, s: &TrajectorySample) -> f64 {
        match self {
            Column::L2 => s.l2,
            Column::H1dot => s.h1dot,
            Column::Linf => s.linf,
            Column::Hneg => s.hneg,
        }
    }

    pub fn header(&self) -> &'static str {
        match self {
            Column::L2 => "L2",
            Column::H1dot => "H1dot",
            Column::Linf => "Linf",
            Column::Hneg => "Hneg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_lo: f64,
    pub t_hi: f64,
}

impl FitWindow {
    /// `[T/10, T]`, clamped below at 1.
    pub fn last_decade(horizon: f64) -> Self {
        FitWindow { t_lo: (horizon / 10.0).max(1.0), t_hi: horizon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: FitWindow,
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Least-squares fit of `log y` against `log(1+t)` over the window.
pub fn fit_power_law(t: &[f64], y: &[f64], window: FitWindow) -> Result<DecayFit> {
    if t.len() != y.len() {
        return Err(Error::Shape { expected: t.len(), actual: y.len() });
    }
    if !(window.t_lo >= 1.0 && window.t_hi > window.t_lo) {
        return Err(Error::Domain(format!(
            "fit window must satisfy 1 <= t_lo < t_hi, got [{}, {}]",
            window.t_lo, window.t_hi
        )));
    }
    let tol = 1e-9 * window.t_hi;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&ti, &yi) in t.iter().zip(y) {
        if ti < window.t_lo - tol || ti > window.t_hi + tol {
            continue;
        }
        if !(yi > 0.0 && yi.is_finite()) {
            return Err(Error::Data(format!("non-positive or non-finite value {yi} at t = {ti}")));
        }
        xs.push(ti.ln_1p());
        ys.push(yi.ln());
    }
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::Data(format!("{n} samples in the fit window, need at least {MIN_FIT_POINTS}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(DecayFit { slope, intercept, stderr, window, n_points: n })
}

pub fn fit_decay(samples: &[TrajectorySample], column: Column, window: FitWindow) -> Result<DecayFit> {
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let y: Vec<f64> = samples.iter().map(|s| column.get(s)).collect();
    fit_power_law(&t, &y, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Bounded,
    Growing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `sup (1+t)^{γ/2} ‖u‖₂`
    pub sup_l2: f64,
    /// `sup (1+t)^{(γ+1)/2} ‖∇u‖₂`
    pub sup_grad: f64,
    pub trend: Trend,
}

const GROWTH_MARGIN: f64 = 1.05;

/// Weighted sups of the two decay rates and whether they level off.
///
/// A weighted series is `Bounded` when its maximum over the last decade
/// `[T/10, T]` exceeds its maximum over `[0, T/10)` by less than 5%.
pub fn bound_check(samples: &[TrajectorySample], status: &TrajectoryStatus, gamma: f64) -> Result<BoundReport> {
    if status.is_blow_up() {
        return Err(Error::Refused("bound check needs a trajectory that reached its horizon".into()));
    }
    if samples.len() < 2 {
        return Err(Error::Data("bound check needs at least two samples".into()));
    }
    let horizon = samples.last().map(|s| s.t).unwrap_or(0.0);
    let split = horizon / 10.0;
    let mut early = [0.0f64; 2];
    let mut late = [0.0f64; 2];
    for s in samples {
        let w = (1.0 + s.t).powf(gamma / 2.0);
        let vals = [w * s.l2, w * (1.0 + s.t).sqrt() * s.h1dot];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite norm at t = {}", s.t)));
        }
        let slot = if s.t < split { &mut early } else { &mut late };
        for (m, v) in slot.iter_mut().zip(vals) {
            *m = m.max(v);
        }
    }
    let growing = (0..2).any(|i| late[i] > GROWTH_MARGIN * early[i]);
    Ok(BoundReport {
        sup_l2: early[0].max(late[0]),
        sup_grad: early[1].max(late[1]),
        trend: if growing { Trend::Growing } else { Trend::Bounded },
    })
}

/// Which estimate of the far-field integral is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `m = 1`, used when `p ≥ 2`.
    M1,
    /// `m = 2/p`, used when `p ≤ 2`.
    M2OverP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "which", rename_all = "snake_case")]
pub enum IntegralCase {
    /// `∫_{t/2}^{t} (1+t−τ)^{−j/2} (1+τ)^{−1−γ/2} dτ`
    NearField { j: u32, gamma: f64 },
    /// `∫_0^{t/2} (1+t−τ)^{−a} (1+τ)^{−b} dτ`
    FarField { n: u32, j: u32, gamma: f64, p: f64, branch: Branch },
}

impl IntegralCase {
    pub fn gamma(&self) -> f64 {
        match *self {
            IntegralCase::NearField { gamma, .. } | IntegralCase::FarField { gamma, .. } => gamma,
        }
    }

    pub fn j(&self) -> u32 {
        match *self {
            IntegralCase::NearField { j, .. } | IntegralCase::FarField { j, .. } => j,
        }
    }

    /// The decay rate claimed on the right-hand side: `(γ+j)/2`.
    pub fn claimed_rate(&self) -> f64 {
        (self.gamma() + self.j() as f64) / 2.0
    }

    /// `(a, b)` of the integrand `(1+t−τ)^{−a}(1+τ)^{−b}`.
    pub fn exponents(&self) -> (f64, f64) {
        match *self {
            IntegralCase::NearField { j, gamma } => (j as f64 / 2.0, 1.0 + gamma / 2.0),
            IntegralCase::FarField { n, j, gamma, p, branch } => {
                let (n, j) = (n as f64, j as f64);
                match branch {
                    Branch::M2OverP => (n * (p - 1.0) / 4.0 + j / 2.0, gamma * p / 2.0),
                    Branch::M1 => (n / 4.0 + j / 2.0, -(n / 4.0 - 1.0 - gamma / 2.0)),
                }
            }
        }
    }

    /// The condition under which the claimed rate follows, or the name of the one that fails.
    pub fn check(&self) -> std::result::Result<(), String> {
        let g = self.gamma();
        if !(g > 0.0 && g.is_finite()) {
            return Err(format!("gamma > 0 violated (gamma = {g})"));
        }
        if self.j() > 1 {
            return Err(format!("j in {{0, 1}} violated (j = {})", self.j()));
        }
        match *self {
            IntegralCase::NearField { .. } => Ok(()),
            IntegralCase::FarField { n, p, branch, .. } => {
                if n == 0 || !(p > 1.0) {
                    return Err(format!("n >= 1 and p > 1 violated (n = {n}, p = {p})"));
                }
                match branch {
                    Branch::M2OverP if g * p / 2.0 >= 1.0 => {
                        Err(format!("γp/2 < 1 violated (γp/2 = {:.6})", g * p / 2.0))
                    }
                    Branch::M1 if g >= n as f64 / 2.0 => Err(format!("γ < n/2 violated (γ = {g}, n/2 = {})", n as f64 / 2.0)),
                    _ => Ok(()),
                }
            }
        }
    }

    /// Whether the proof uses this branch at the case's power (`p ≥ 2` for `m = 1`, `p ≤ 2` for `m = 2/p`).
    pub fn branch_applies(&self) -> bool {
        match *self {
            IntegralCase::NearField { .. } => true,
            IntegralCase::FarField { p, branch: Branch::M1, .. } => p >= 2.0,
            IntegralCase::FarField { p, branch: Branch::M2OverP, .. } => p <= 2.0,
        }
    }

    pub fn integral(&self, t: f64) -> Result<f64> {
        let (a, b) = self.exponents();
        let f = |tau: f64| (1.0 + t - tau).powf(-a) * (1.0 + tau).powf(-b);
        match self {
            IntegralCase::NearField { .. } => integrate(f, 0.5 * t, t, ORACLE_RTOL),
            IntegralCase::FarField { .. } => integrate(f, 0.0, 0.5 * t, ORACLE_RTOL),
        }
    }
}

pub const ORACLE_RTOL: f64 = 1e-10;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for GK_NODES[1], [3], [5], [7]
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for (i, (&x, &w)) in GK_NODES.iter().zip(&GK_WEIGHTS).enumerate() {
        let fx = if x == 0.0 { f(c) } else { f(c - h * x) + f(c + h * x) };
        k += w * fx;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * fx;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature to relative tolerance `rtol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut parts = vec![{
        let (v, e) = gauss_kronrod(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Numerical(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= rtol * total.abs() || err < f64::MIN_POSITIVE {
            return Ok(total);
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        for (l, h) in [(lo, mid), (mid, hi)] {
            let (v, e) = gauss_kronrod(&f, l, h);
            parts.push((l, h, v, e));
        }
    }
    Err(Error::Numerical(format!("quadrature on [{a}, {b}] did not reach rtol {rtol:e}")))
}

/// `points_per_decade` geometric points from 1 to `t_max` inclusive.
pub fn geometric_grid(t_max: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(t_max > 1.0) || points_per_decade == 0 {
        return Err(Error::Domain(format!("need t_max > 1 and a positive density, got {t_max}")));
    }
    let steps = (t_max.log10() * points_per_decade as f64).ceil() as usize;
    let h = t_max.ln() / steps as f64;
    Ok((0..=steps).map(|i| if i == steps { t_max } else { (h * i as f64).exp() }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case: IntegralCase,
    pub claimed_rate: f64,
    /// `sup_t I(t)·(1+t)^{claimed_rate}` over the grid.
    pub sup_ratio: f64,
    pub argmax_t: f64,
    pub t_max: f64,
    pub branch_applies: bool,
}

/// Numerical certification of `I(t) ≤ C (1+t)^{−(γ+j)/2}` on a finite grid.
pub fn integral_oracle(case: IntegralCase, t_grid: &[f64]) -> Result<OracleReport> {
    case.check().map_err(Error::Refused)?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 1.0 && t.is_finite())) {
        return Err(Error::Domain("oracle grid must be non-empty with every t >= 1".into()));
    }
    let rate = case.claimed_rate();
    let mut sup = f64::NEG_INFINITY;
    let mut arg = t_grid[0];
    for &t in t_grid {
        let r = case.integral(t)? * (1.0 + t).powf(rate);
        if r > sup {
            sup = r;
            arg = t;
        }
    }
    Ok(OracleReport {
        case,
        claimed_rate: rate,
        sup_ratio: sup,
        argmax_t: arg,
        t_max: t_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        branch_applies: case.branch_applies(),
    })
}

/// Relative change of the sup ratio when the grid is extended from `[1, t_short]` to `[1, t_long]`.
pub fn oracle_drift(case: IntegralCase, t_short: f64, t_long: f64, points_per_decade: usize) -> Result<f64> {
    let a = integral_oracle(case, &geometric_grid(t_short, points_per_decade)?)?;
    let b = integral_oracle(case, &geometric_grid(t_long, points_per_decade)?)?;
    Ok((b.sup_ratio - a.sup_ratio).abs() / a.sup_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanPoint {
    pub eps: f64,
    pub t_life: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanFit {
    pub pairs: Vec<LifespanPoint>,
    /// Ladder values whose run reached the horizon.
    pub global: Vec<f64>,
    /// `d log T_life / d log ε`; absent with fewer than two blow-ups.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// `T_life` strictly increases as `ε` decreases.
    pub monotone: bool,
}

/// Fits `log T_life` against `log ε`.
pub fn fit_lifespan(pairs: Vec<LifespanPoint>, global: Vec<f64>) -> LifespanFit {
    let monotone = pairs.windows(2).all(|w| (w[1].eps < w[0].eps) == (w[1].t_life > w[0].t_life));
    let (slope, intercept) = if pairs.len() >= 2 {
        let xs: Vec<f64> = pairs.iter().map(|p| p.eps.ln()).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.t_life.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let s = sxy / sxx;
        (Some(s), Some(my - s * mx))
    } else {
        (None, None)
    };
    LifespanFit { pairs, global, slope, intercept, monotone }
}

/// Checks the ladder shape: at least four values, each half the previous.
pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 4 {
        return Err(Error::Config(format!("lifespan ladder needs at least 4 values, got {}", ladder.len())));
    }
    if ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Config("ladder values must be positive".into()));
    }
    for w in ladder.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::Config(format!("consecutive ladder values must halve, got {} then {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Runs `base` once per ladder value with the data amplitude set to `ε` and fits the lifespans.
///
/// Runs are independent and execute in parallel; results are collected in
/// ladder order so the output does not depend on scheduling.
pub fn lifespan_sweep(base: &SimulationSetup, ladder: &[f64]) -> Result<LifespanFit> {
    validate_ladder(ladder)?;
    let outcomes: Vec<Result<(f64, TrajectoryStatus)>> = ladder
        .par_iter()
        .map(|&eps| {
            let mut setup = base.clone();
            setup.data.amplitude = eps;
            setup.data.target_eps = None;
            simulate(&setup).map(|t| (eps, t.status))
        })
        .collect();
    let mut pairs = Vec::new();
    let mut global = Vec::new();
    for outcome in outcomes {
        let (eps, status) = outcome?;
        match status {
            TrajectoryStatus::BlowUp { t_life, bracket_lo, bracket_hi } => {
                pairs.push(LifespanPoint { eps, t_life, bracket_lo, bracket_hi })
            }
            TrajectoryStatus::ReachedHorizon { .. } => global.push(eps),
        }
    }
    Ok(fit_lifespan(pairs, global))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, horizon: f64) -> Vec<TrajectorySample> {
        let mut t = vec![0.0];
        let mut x = 0.1;
        while x < horizon {
            t.push(x);
            x *= 1.1;
        }
        t.push(horizon);
        t.into_iter().map(|t| TrajectorySample { t, l2: f(t), h1dot: f(t) / (1.0 + t).sqrt(), linf: f(t), hneg: f(t) }).collect()
    }

    #[test]
    fn exact_power_law() {
        let s = series(|t| (1.0 + t).powf(-0.5), 1000.0);
        let fit = fit_decay(&s, Column::L2, FitWindow { t_lo: 1.0, t_hi: 1000.0 }).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        let c = series(|_| 3.0, 100.0);
        let fit = fit_decay(&c, Column::L2, FitWindow::last_decade(100.0)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        let s = series(|t| (1.0 + t).powf(-0.5), 10.0);
        assert!(fit_decay(&s, Column::L2, FitWindow { t_lo: 0.5, t_hi: 10.0 }).is_err());
        assert!(fit_decay(&s, Column::L2, FitWindow { t_lo: 9.0, t_hi: 10.0 }).is_err());
        let z = series(|t| if t > 5.0 { 0.0 } else { 1.0 }, 100.0);
        assert!(matches!(fit_decay(&z, Column::L2, FitWindow { t_lo: 1.0, t_hi: 100.0 }), Err(Error::Data(_))));
    }

    #[test]
    fn oscillation_shifts_slope_little() {
        // bounded factor 1 + 0.1 sin(log t) over four decades
        let s = series(|t| (1.0 + t).powf(-0.5) * (1.0 + 0.1 * t.ln().sin()), 1e4);
        let fit = fit_decay(&s, Column::L2, FitWindow { t_lo: 1.0, t_hi: 1e4 }).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.02, "{}", fit.slope);
    }

    #[test]
    fn bound_check_examples() {
        let g = 0.25;
        let st = TrajectoryStatus::ReachedHorizon { horizon: 400.0 };
        let flat = series(|t| (1.0 + t).powf(-g / 2.0), 400.0);
        let r = bound_check(&flat, &st, g).unwrap();
        assert!((r.sup_l2 - 1.0).abs() < 1e-12);
        assert_eq!(r.trend, Trend::Bounded);
        let grow = series(|t| (1.0 + t).powf(-g / 2.0) * (1.0 + t).ln(), 400.0);
        assert_eq!(bound_check(&grow, &st, g).unwrap().trend, Trend::Growing);
        let blow = TrajectoryStatus::BlowUp { t_life: 1.0, bracket_lo: 0.9, bracket_hi: 1.1 };
        assert!(matches!(bound_check(&flat, &blow, g), Err(Error::Refused(_))));
    }

    #[test]
    fn gauss_kronrod_rules() {
        assert!((GK_WEIGHTS.iter().sum::<f64>() * 2.0 - GK_WEIGHTS[7] - 2.0).abs() < 1e-15);
        assert!((G_WEIGHTS.iter().sum::<f64>() * 2.0 - G_WEIGHTS[3] - 2.0).abs() < 1e-15);
        // K15 integrates degree 22 exactly
        let (v, _) = gauss_kronrod(&|x: f64| x.powi(22), 0.0, 1.0);
        assert!((v - 1.0 / 23.0).abs() < 1e-15);
        let v = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn near_field_matches_closed_form() {
        for g in [0.1, 0.25, 0.9] {
            let case = IntegralCase::NearField { j: 0, gamma: g };
            for t in [1.0f64, 37.0, 1e4] {
                let s = g / 2.0;
                let exact = ((1.0 + t / 2.0).powf(-s) - (1.0 + t).powf(-s)) / s;
                let got = case.integral(t).unwrap();
                assert!((got - exact).abs() < 1e-10 * exact, "{got} vs {exact}");
            }
        }
        let r = integral_oracle(IntegralCase::NearField { j: 0, gamma: 0.25 }, &[1.0]).unwrap();
        let direct = (1.5f64.powf(-0.125) - 2f64.powf(-0.125)) / 0.125 * 2f64.powf(0.125);
        assert!((r.sup_ratio - direct).abs() < 1e-10);
    }

    #[test]
    fn far_field_refusals() {
        let p = 1.0 + 4.0 / (3.0 + 2.4);
        let case = IntegralCase::FarField { n: 3, j: 0, gamma: 1.2, p, branch: Branch::M2OverP };
        match integral_oracle(case, &[1.0, 10.0]) {
            Err(Error::Refused(msg)) => assert!(msg.contains("γp/2 < 1 violated"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let m1 = IntegralCase::FarField { n: 1, j: 0, gamma: 0.6, p: 3.0, branch: Branch::M1 };
        assert!(matches!(integral_oracle(m1, &[1.0]), Err(Error::Refused(_))));
    }

    #[test]
    fn far_field_exponents_at_critical_power() {
        // the far-field integral grows like t^{1-a-b}, which at the critical power is the claimed rate
        for (n, g) in [(1u32, 0.25), (2, 0.5), (3, 0.8)] {
            let p = 1.0 + 4.0 / (n as f64 + 2.0 * g);
            let case = IntegralCase::FarField { n, j: 0, gamma: g, p, branch: Branch::M2OverP };
            let (a, b) = case.exponents();
            assert!((1.0 - a - b + case.claimed_rate()).abs() < 1e-12);
            let m1 = IntegralCase::FarField { n, j: 1, gamma: g, p, branch: Branch::M1 };
            let (a, b) = m1.exponents();
            assert!((1.0 - a - b + m1.claimed_rate()).abs() < 1e-12);
        }
    }

    #[test]
    fn near_field_is_stable() {
        for j in [0, 1] {
            let d = oracle_drift(IntegralCase::NearField { j, gamma: 0.25 }, 1e3, 1e4, 20).unwrap();
            assert!(d < 0.1, "j = {j}: drift {d}");
        }
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e3, 10).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 1e3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ladder_rules() {
        assert!(validate_ladder(&[0.4, 0.2, 0.1, 0.05]).is_ok());
        assert!(validate_ladder(&[0.4, 0.2, 0.1]).is_err());
        assert!(validate_ladder(&[0.4, 0.2, 0.1, 0.06]).is_err());
    }

    #[test]
    fn lifespan_fit_degenerate_and_exact() {
        let f = fit_lifespan(vec![], vec![0.4, 0.2, 0.1, 0.05]);
        assert!(f.slope.is_none() && f.pairs.is_empty() && f.global.len() == 4);
        let pairs: Vec<_> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&e: &f64| LifespanPoint { eps: e, t_life: 3.0 * e.powf(-1.5), bracket_lo: 0.0, bracket_hi: 0.0 })
            .collect();
        let f = fit_lifespan(pairs, vec![]);
        assert!((f.slope.unwrap() + 1.5).abs() < 1e-12);
        assert!(f.monotone);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn recovers_synthetic_slopes(rate in -3.0f64..1.0, c in 0.01f64..100.0) {
                let s = series(|t| c * (1.0 + t).powf(rate), 500.0);
                let fit = fit_decay(&s, Column::L2, FitWindow { t_lo: 1.0, t_hi: 500.0 }).unwrap();
                prop_assert!((fit.slope - rate).abs() < 1e-10);
            }

            #[test]
            fn bound_check_is_homogeneous(lambda in 1e-3f64..1e3, g in 0.05f64..1.0) {
                let st = TrajectoryStatus::ReachedHorizon { horizon: 200.0 };
                let s = series(|t| (1.0 + t).powf(-g / 2.0) * (2.0 + (t / 7.0).sin()), 200.0);
                let scaled: Vec<_> = s.iter().map(|x| TrajectorySample { l2: lambda * x.l2, h1dot: lambda * x.h1dot, ..*x }).collect();
                let a = bound_check(&s, &st, g).unwrap();
                let b = bound_check(&scaled, &st, g).unwrap();
                prop_assert!((b.sup_l2 - lambda * a.sup_l2).abs() <= 1e-12 * b.sup_l2);
                prop_assert!((b.sup_grad - lambda * a.sup_grad).abs() <= 1e-12 * b.sup_grad);
                prop_assert_eq!(a.trend, b.trend);
            }

            #[test]
            fn lifespan_slope_ignores_time_units(unit in 1e-3f64..1e3, k in -4.0f64..-0.5) {
                let ladder = [0.4, 0.2, 0.1, 0.05];
                let mk = |u: f64| ladder.iter().map(|&e: &f64| LifespanPoint {
                    eps: e, t_life: u * e.powf(k) * (1.0 + 0.05 * e), bracket_lo: 0.0, bracket_hi: 0.0,
                }).collect::<Vec<_>>();
                let a = fit_lifespan(mk(1.0), vec![]);
                let b = fit_lifespan(mk(unit), vec![]);
                prop_assert!((a.slope.unwrap() - b.slope.unwrap()).abs() < 1e-10);
                prop_assert_eq!(a.monotone, b.monotone);
            }
        }
    }
}
