//! Lock detection, averaging discrepancy, ideal-filter error, Poincaré return
//! maps and limit cycles, and a pull-in probe.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{
    integrate, integrate_to_section, Direction, IntegratorConfig, Section, SectionOutcome, Trajectory,
};
use crate::models::{pd_characteristic, LoopParams, ModelKind, StateVector};

/// Thresholds for calling a run locked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockCriterion {
    /// Bound on the tail mean of `|ω₁ − ω₂|`, rad/s.
    pub freq_tol: f64,
    /// Bound on the tail excursion of the ripple-free phase difference, rad.
    pub phase_drift_tol: f64,
    /// Trailing fraction of the run that is inspected.
    pub tail_fraction: f64,
}

impl Default for LockCriterion {
    fn default() -> Self {
        LockCriterion {
            freq_tol: 1.0,
            phase_drift_tol: 0.01,
            tail_fraction: 0.2,
        }
    }
}

impl LockCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq_tol > 0.0) {
            return Err(Error::param("freq_tol", "must be positive"));
        }
        if !(self.phase_drift_tol > 0.0) {
            return Err(Error::param("phase_drift_tol", "must be positive"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::param("tail_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockReport {
    pub locked: bool,
    /// `|mean(ω₁ − ω₂)|` over the tail, rad/s.
    pub tail_mean_freq_error: f64,
    /// Excursion of the window-averaged phase difference over the tail, rad.
    pub tail_phase_span: f64,
    pub steady_theta_delta: Option<f64>,
    pub steady_g: Option<f64>,
}

/// Number of averaging windows the tail is cut into.
const LOCK_WINDOWS: usize = 10;
const MIN_SAMPLES: usize = 10;

/// Judges lock on the trailing part of a trajectory.
///
/// The tail is cut into equal-count windows and `θ_Δ` is time-averaged over
/// each, which removes the double-carrier ripple of the signal-space models.
/// The frequency error is the slope between the first and last window means,
/// i.e. the mean of `θ̇_Δ = ω₁ − ω₂`; the phase span is the spread of the
/// window means. Sampling must resolve the slow dynamics (≥ 10 samples per
/// slow time constant); windows must span many carrier periods.
pub fn detect_lock(traj: &Trajectory, crit: &LockCriterion) -> Result<LockReport> {
    crit.validate()?;
    let n = traj.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: n,
            need: MIN_SAMPLES,
        });
    }
    let times = traj.times();
    let theta = traj.theta_delta();
    let g = traj.g();
    let t_cut = times[n - 1] - crit.tail_fraction * (times[n - 1] - times[0]);
    let start = times
        .partition_point(|&t| t < t_cut)
        .min(n - 2 * LOCK_WINDOWS.min(n / 2));
    let tail = n - start;
    let windows = LOCK_WINDOWS.min(tail / 2).max(2);

    let mut centers = Vec::with_capacity(windows);
    let mut theta_means = Vec::with_capacity(windows);
    let mut g_last = 0.0;
    for w in 0..windows {
        let lo = start + w * tail / windows;
        let hi = start + (w + 1) * tail / windows;
        let (tc, th) = window_mean(&times[lo..hi], &theta[lo..hi]);
        centers.push(tc);
        theta_means.push(th);
        if w + 1 == windows {
            g_last = window_mean(&times[lo..hi], &g[lo..hi]).1;
        }
    }
    let dt = centers[windows - 1] - centers[0];
    let freq = if dt > 0.0 {
        ((theta_means[windows - 1] - theta_means[0]) / dt).abs()
    } else {
        f64::INFINITY
    };
    let span = theta_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - theta_means.iter().cloned().fold(f64::INFINITY, f64::min);
    let locked = freq < crit.freq_tol && span < crit.phase_drift_tol;
    Ok(LockReport {
        locked,
        tail_mean_freq_error: freq,
        tail_phase_span: span,
        steady_theta_delta: locked.then_some(theta_means[windows - 1]),
        steady_g: locked.then_some(g_last),
    })
}

/// Time-weighted (trapezoidal) mean and its time center.
fn window_mean(t: &[f64], v: &[f64]) -> (f64, f64) {
    if t.len() < 2 || t[t.len() - 1] <= t[0] {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        return (t.iter().sum::<f64>() / t.len() as f64, m);
    }
    let mut area = 0.0;
    for i in 1..t.len() {
        area += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    }
    let span = t[t.len() - 1] - t[0];
    (0.5 * (t[0] + t[t.len() - 1]), area / span)
}

/// Which original/averaged pair an averaging check compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingPair {
    /// Modified loop against the classic characteristic model.
    ModifiedVsClassic,
    /// Simplified signal-space model against the averaged phase-space model.
    SimplifiedVsPhaseSpace,
}

impl AveragingPair {
    pub fn kinds(self) -> (ModelKind, ModelKind) {
        match self {
            AveragingPair::ModifiedVsClassic => (ModelKind::ModifiedSignalSpace, ModelKind::ClassicPhaseSpace),
            AveragingPair::SimplifiedVsPhaseSpace => (ModelKind::SimplifiedSignalSpace, ModelKind::PhaseSpace),
        }
    }
}

/// Initial data shared by both members of an averaging pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingStart {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x: Vec<f64>,
    pub theta_delta: f64,
}

impl AveragingStart {
    pub fn at_rest(p: &LoopParams, theta_delta: f64) -> Self {
        AveragingStart {
            x1: vec![0.0; p.lpf1.order()],
            x2: vec![0.0; p.lpf2.order()],
            x: vec![0.0; p.loop_filter.order()],
            theta_delta,
        }
    }

    fn state(&self, kind: ModelKind, p: &LoopParams) -> Result<StateVector> {
        let mut s = StateVector::zeros(kind, p).with_x(&self.x)?;
        if kind.has_arm_filters() {
            s = s.with_x1(&self.x1)?.with_x2(&self.x2)?;
        }
        Ok(s.with_initial_theta_delta(self.theta_delta, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingRow {
    pub omega1: f64,
    /// Sup over the samples of the Euclidean distance of `(filter states, θ_Δ)`.
    pub sup_error: f64,
    /// Sup over the samples of `|θ_Δ^orig − θ_Δ^avg|`, rad.
    pub sup_theta_error: f64,
    /// `|ω_Δ^free| / ω₁`.
    pub detuning_ratio: f64,
}

/// Detuning ratio above which the averaging regime is flagged as violated.
pub const DETUNING_FLAG_RATIO: f64 = 0.1;

impl AveragingRow {
    pub fn condition_violated(&self) -> bool {
        self.detuning_ratio > DETUNING_FLAG_RATIO
    }
}

/// Integrates the original and averaged members of `pair` for each carrier
/// frequency (keeping `ω_Δ^free` fixed) from identical initial data and
/// reports the sup distance over the shared sample grid.
///
/// `step_for` maps a carrier frequency to the integrator configuration used
/// for both members, so the two trajectories share their sample times.
pub fn averaging_discrepancy<F>(
    p: &LoopParams,
    pair: AveragingPair,
    start: &AveragingStart,
    omega1_list: &[f64],
    step_for: F,
) -> Result<Vec<AveragingRow>>
where
    F: Fn(f64) -> IntegratorConfig + Sync,
{
    let (orig_kind, avg_kind) = pair.kinds();
    omega1_list
        .par_iter()
        .map(|&omega1| {
            let q = p.clone().with_omega1(omega1);
            let cfg = step_for(omega1);
            let tag = |e: Error| match e {
                Error::Divergence { last_good_t } => Error::Parameter {
                    name: "omega1",
                    reason: format!("integration diverged after t = {last_good_t:e} s at omega1 = {omega1}"),
                },
                other => other,
            };
            let a = integrate(orig_kind, &q, &start.state(orig_kind, &q)?, &cfg).map_err(tag)?;
            let b = integrate(avg_kind, &q, &start.state(avg_kind, &q)?, &cfg).map_err(tag)?;
            let (sup, sup_theta) = sup_distance(&a, &b);
            Ok(AveragingRow {
                omega1,
                sup_error: sup,
                sup_theta_error: sup_theta,
                detuning_ratio: q.omega_delta_free().abs() / omega1,
            })
        })
        .collect()
}

/// Sup distance of two trajectories with matching filter blocks, comparing
/// `b` linearly interpolated at the sample times of `a`.
fn sup_distance(a: &Trajectory, b: &Trajectory) -> (f64, f64) {
    let la = a.layout();
    let lb = b.layout();
    let theta_a = a.theta_delta();
    let theta_b = b.theta_delta();
    let tb = b.times();
    let mut sup = 0.0f64;
    let mut sup_theta = 0.0f64;
    for (i, &t) in a.times().iter().enumerate() {
        let j = tb.partition_point(|&s| s < t).min(tb.len() - 1);
        let (w, j0) = if j > 0 && tb[j] != t {
            let j0 = j - 1;
            ((t - tb[j0]) / (tb[j] - tb[j0]), j0)
        } else {
            (0.0, j)
        };
        let j1 = (j0 + 1).min(tb.len() - 1);
        let lerp = |k: usize| {
            let v0 = b.state(j0)[k];
            let v1 = b.state(j1)[k];
            v0 + w * (v1 - v0)
        };
        let th_b = theta_b[j0] + w * (theta_b[j1] - theta_b[j0]);
        let dth = (theta_a[i] - th_b).abs();
        let mut acc = dth * dth;
        let sa = a.state(i);
        for (ra, rb) in [
            (la.x1.clone(), lb.x1.clone()),
            (la.x2.clone(), lb.x2.clone()),
            (la.x.clone(), lb.x.clone()),
        ] {
            for (ka, kb) in ra.zip(rb) {
                let d = sa[ka] - lerp(kb);
                acc += d * d;
            }
        }
        sup = sup.max(acc.sqrt());
        sup_theta = sup_theta.max(dth);
    }
    (sup, sup_theta)
}

/// Least-squares slope of `ln(sup_theta_error)` against `ln(omega1)`.
pub fn loglog_slope(rows: &[AveragingRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega1.ln(), r.sup_theta_error.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Max over the tail of `|c₁·x₁ − cos(θ_Δ)/2|` and `|c₂·x₂ − sin(θ_Δ)/2|`.
pub fn ideal_lpf_error(traj: &Trajectory, tail_fraction: f64) -> Result<(f64, f64)> {
    if !traj.kind.has_arm_filters() {
        return Err(Error::Layout(format!("{} has no arm filters", traj.kind)));
    }
    let times = traj.times();
    let n = traj.len();
    let t_cut = times[n - 1] - tail_fraction * (times[n - 1] - times[0]);
    let start = times.partition_point(|&t| t < t_cut).min(n - 1);
    let mut e1 = 0.0f64;
    let mut e2 = 0.0f64;
    for i in start..n {
        let d = traj.derived(i);
        let (g1, g2) = (d.g1.unwrap_or(0.0), d.g2.unwrap_or(0.0));
        e1 = e1.max((g1 - 0.5 * d.theta_delta.cos()).abs());
        e2 = e2.max((g2 - 0.5 * d.theta_delta.sin()).abs());
    }
    Ok((e1, e2))
}

/// Outcome of one application of the return map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnOutcome {
    /// Loop-filter state at the next section crossing, and the return time.
    Returned { x_out: f64, period: f64 },
    /// No crossing before the horizon: the trajectory was captured.
    Captured,
}

impl ReturnOutcome {
    pub fn x_out(self) -> Option<f64> {
        match self {
            ReturnOutcome::Returned { x_out, .. } => Some(x_out),
            ReturnOutcome::Captured => None,
        }
    }
}

/// Direction in which rotational solutions advance for this detuning.
pub fn rotation_direction(p: &LoopParams) -> Direction {
    if p.omega_delta_free() >= 0.0 {
        Direction::Increasing
    } else {
        Direction::Decreasing
    }
}

/// Poincaré return map of the classic model on the section `θ_Δ = theta_start`.
///
/// Starts at `(x_in, theta_start)` and integrates until `θ_Δ` has advanced by
/// `π` (one period of the characteristic) in the rotation direction.
pub fn return_map(p: &LoopParams, x_in: f64, theta_start: f64, cfg: &IntegratorConfig) -> Result<ReturnOutcome> {
    if p.loop_filter.order() != 1 {
        return Err(Error::Dimension {
            what: "loop filter order for the return map",
            expected: 1,
            got: p.loop_filter.order(),
        });
    }
    let kind = ModelKind::ClassicPhaseSpace;
    let direction = rotation_direction(p);
    let target = match direction {
        Direction::Increasing => theta_start + std::f64::consts::PI,
        Direction::Decreasing => theta_start - std::f64::consts::PI,
    };
    let s0 = StateVector::zeros(kind, p).with_x(&[x_in])?.with_angle(theta_start);
    match integrate_to_section(
        kind,
        p,
        &s0,
        cfg,
        Section {
            angle: target,
            direction,
        },
    )? {
        SectionOutcome::Crossed { state, t } => Ok(ReturnOutcome::Returned {
            x_out: state.x()[0],
            period: t,
        }),
        SectionOutcome::NoCrossing { .. } => Ok(ReturnOutcome::Captured),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    /// Loop-filter state where the cycle pierces the section.
    pub fixed_point_x: f64,
    /// Derivative of the return map at the fixed point.
    pub multiplier: f64,
    pub stability: Stability,
    /// `|P(x) − x|` at the reported point.
    pub residual: f64,
    /// Return time, i.e. the period of the rotational solution.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub cycles: Vec<Cycle>,
    pub section_angle: f64,
}

impl CycleReport {
    pub fn stable(&self) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(|c| c.stability == Stability::Stable)
    }

    pub fn unstable(&self) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(|c| c.stability == Stability::Unstable)
    }

    /// True when at least one stable and one unstable cycle were found.
    pub fn has_bistable_pair(&self) -> bool {
        self.stable().next().is_some() && self.unstable().next().is_some()
    }
}

/// Settings of the scan-and-bisect search for return-map fixed points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSearch {
    pub grid_points: usize,
    pub residual_tol: f64,
    pub max_bisections: usize,
    /// Relative step of the central difference for the multiplier.
    pub fd_rel_step: f64,
}

impl Default for CycleSearch {
    fn default() -> Self {
        CycleSearch {
            grid_points: 64,
            residual_tol: 1e-10,
            max_bisections: 200,
            fd_rel_step: 1e-6,
        }
    }
}

/// Locates fixed points of the return map inside `x_bracket`.
///
/// Scans a uniform grid for sign changes of `P(x) − x` between neighbouring
/// points where the map is defined, then bisects each sub-bracket. A bracket
/// without any sign change yields an empty report.
pub fn find_limit_cycles(
    p: &LoopParams,
    x_bracket: (f64, f64),
    theta_start: f64,
    cfg: &IntegratorConfig,
    search: &CycleSearch,
) -> Result<CycleReport> {
    let (lo, hi) = if x_bracket.0 <= x_bracket.1 {
        x_bracket
    } else {
        (x_bracket.1, x_bracket.0)
    };
    let n = search.grid_points.max(64);
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let values: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&x| return_map(p, x, theta_start, cfg).map(|r| r.x_out().map(|y| y - x)))
        .collect::<Result<_>>()?;

    let brackets: Vec<(f64, f64, f64, f64)> = (1..n)
        .filter_map(|i| match (values[i - 1], values[i]) {
            (Some(a), Some(b)) if a == 0.0 || a.signum() != b.signum() => Some((grid[i - 1], a, grid[i], b)),
            _ => None,
        })
        .collect();

    let cycles: Vec<Cycle> = brackets
        .par_iter()
        .map(|&(a, fa, b, fb)| refine_cycle(p, theta_start, cfg, search, a, fa, b, fb))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(CycleReport {
        cycles,
        section_angle: theta_start,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine_cycle(
    p: &LoopParams,
    theta_start: f64,
    cfg: &IntegratorConfig,
    search: &CycleSearch,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    fb: f64,
) -> Result<Option<Cycle>> {
    let d = |x: f64| -> Result<Option<(f64, f64)>> {
        Ok(match return_map(p, x, theta_start, cfg)? {
            ReturnOutcome::Returned { x_out, period } => Some((x_out - x, period)),
            ReturnOutcome::Captured => None,
        })
    };
    let (mut best_x, mut best_f) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    let mut best_period = 0.0;
    for _ in 0..search.max_bisections {
        if best_f.abs() < search.residual_tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let Some((fm, period)) = d(m)? else {
            // capture inside a bracket whose ends both return: no clean root here
            return Ok(None);
        };
        if fm.abs() < best_f.abs() || best_period == 0.0 {
            best_x = m;
            best_f = fm;
            best_period = period;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    if best_period == 0.0 {
        if let Some((f, period)) = d(best_x)? {
            best_f = f;
            best_period = period;
        }
    }
    let h = search.fd_rel_step * best_x.abs().max(1e-12);
    let plus = return_map(p, best_x + h, theta_start, cfg)?.x_out();
    let minus = return_map(p, best_x - h, theta_start, cfg)?.x_out();
    let multiplier = match (plus, minus) {
        (Some(u), Some(v)) => (u - v) / (2.0 * h),
        // one side is captured: the cycle repels toward the equilibrium
        _ => f64::INFINITY,
    };
    Ok(Some(Cycle {
        fixed_point_x: best_x,
        multiplier,
        stability: if multiplier.abs() < 1.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        },
        residual: best_f.abs(),
        period: best_period,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PullInVerdict {
    AllLock,
    SomeEscape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullInRow {
    pub omega_delta: f64,
    pub verdict: PullInVerdict,
    pub escapes: usize,
    pub runs: usize,
    /// Whether some equilibrium is locally stable; `None` when not computable.
    pub hold_in: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullInReport {
    pub rows: Vec<PullInRow>,
}

impl PullInReport {
    pub fn largest_all_lock(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.verdict == PullInVerdict::AllLock)
            .map(|r| r.omega_delta.abs())
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    pub fn smallest_some_escape(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.verdict == PullInVerdict::SomeEscape)
            .map(|r| r.omega_delta.abs())
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    }

    /// Whether every all-lock detuning lies below every escaping one.
    pub fn is_monotone(&self) -> bool {
        match (self.largest_all_lock(), self.smallest_some_escape()) {
            (Some(a), Some(e)) => a < e,
            _ => true,
        }
    }
}

/// Initial condition of the classic model for the pull-in probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicStart {
    pub x: f64,
    pub theta_delta: f64,
}

/// Simulates every initial condition of the classic model at every detuning;
/// a detuning is all-lock iff every run locks. Divergence counts as escape.
pub fn pullin_probe(
    p_base: &LoopParams,
    omega_delta_grid: &[f64],
    ic_grid: &[ClassicStart],
    cfg: &IntegratorConfig,
    crit: &LockCriterion,
) -> Result<PullInReport> {
    if p_base.loop_filter.order() != 1 {
        return Err(Error::Dimension {
            what: "loop filter order for the pull-in probe",
            expected: 1,
            got: p_base.loop_filter.order(),
        });
    }
    let kind = ModelKind::ClassicPhaseSpace;
    let rows = omega_delta_grid
        .par_iter()
        .map(|&wd| {
            let p = p_base.clone().with_omega_delta_free(wd);
            let escapes = ic_grid
                .par_iter()
                .map(|ic| {
                    let s0 = StateVector::zeros(kind, &p).with_x(&[ic.x])?.with_angle(ic.theta_delta);
                    Ok(match integrate(kind, &p, &s0, cfg) {
                        Ok(tr) => !detect_lock(&tr, crit)?.locked,
                        Err(Error::Divergence { .. }) | Err(Error::StepUnderflow { .. }) => true,
                        Err(e) => return Err(e),
                    })
                })
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&e| e)
                .count();
            Ok(PullInRow {
                omega_delta: wd,
                verdict: if escapes == 0 {
                    PullInVerdict::AllLock
                } else {
                    PullInVerdict::SomeEscape
                },
                escapes,
                runs: ic_grid.len(),
                hold_in: hold_in(&p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PullInReport { rows })
}

/// Equilibria of the classic model within one period of the characteristic,
/// as `(x*, θ*)`. Requires a first-order loop filter.
pub fn classic_equilibria(p: &LoopParams) -> Vec<(f64, f64)> {
    let f = &p.loop_filter;
    if f.order() != 1 {
        return Vec::new();
    }
    let (a, b, c, h) = (f.a()[0], f.b()[0], f.c()[0], f.h());
    let l = p.vco_gain;
    let wd = p.omega_delta_free();
    if a != 0.0 {
        // x* = -b φ*/a and ω_Δ = L (h - c b / a) φ*
        let gain = h - c * b / a;
        if gain == 0.0 {
            return Vec::new();
        }
        let phi = wd / (l * gain);
        if phi.abs() > 0.125 {
            return Vec::new();
        }
        let th = 0.5 * (8.0 * phi).asin();
        [th, std::f64::consts::FRAC_PI_2 - th]
            .into_iter()
            .map(|t| (-b * pd_characteristic(t) / a, t))
            .collect()
    } else {
        // integrator: φ(θ*) = 0 and L c x* = ω_Δ
        if c == 0.0 {
            return Vec::new();
        }
        let x = wd / (l * c);
        vec![(x, 0.0), (x, std::f64::consts::FRAC_PI_2)]
    }
}

/// Local stability of the classic model at an equilibrium, by the
/// eigenvalues of its Jacobian.
pub fn classic_equilibrium_is_stable(p: &LoopParams, theta: f64) -> bool {
    let f = &p.loop_filter;
    let (a, b, c, h) = (f.a()[0], f.b()[0], f.c()[0], f.h());
    let l = p.vco_gain;
    let dphi = 0.25 * (2.0 * theta).cos();
    let j = DMatrix::from_row_slice(2, 2, &[a, b * dphi, -l * c, -l * h * dphi]);
    j.complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

/// Whether the detuning lies in the hold-in range (some equilibrium of the
/// classic model is locally stable).
pub fn hold_in(p: &LoopParams) -> Option<bool> {
    if p.loop_filter.order() != 1 {
        return None;
    }
    Some(
        classic_equilibria(p)
            .iter()
            .any(|&(_, th)| classic_equilibrium_is_stable(p, th)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterSs;
    use crate::integrators::Solution;

    fn synthetic(theta: impl Fn(f64) -> f64, n: usize, t_end: f64) -> Trajectory {
        let p = LoopParams::reference();
        let mut times = Vec::new();
        let mut states = Vec::new();
        for i in 0..n {
            let t = t_end * i as f64 / (n - 1) as f64;
            times.push(t);
            states.extend_from_slice(&[0.0, theta(t)]);
        }
        Trajectory {
            kind: ModelKind::ClassicPhaseSpace,
            params: p,
            solution: Solution {
                dim: 2,
                times,
                states,
                stats: Default::default(),
            },
        }
    }

    #[test]
    fn constant_phase_is_locked() {
        let tr = synthetic(|_| 0.37, 200, 1.0);
        let r = detect_lock(&tr, &LockCriterion::default()).unwrap();
        assert!(r.locked);
        assert!((r.steady_theta_delta.unwrap() - 0.37).abs() < 1e-15);
        assert_eq!(r.tail_mean_freq_error, 0.0);
    }

    #[test]
    fn drifting_phase_is_not_locked() {
        let tr = synthetic(|t| 5.0 * t, 200, 1.0);
        let r = detect_lock(&tr, &LockCriterion::default()).unwrap();
        assert!(!r.locked);
        assert!((r.tail_mean_freq_error - 5.0).abs() < 1e-9);
        assert!(r.steady_theta_delta.is_none());
    }

    #[test]
    fn ripple_is_averaged_out() {
        // fast ripple of 0.05 rad, far above the span tolerance, around a fixed phase
        let tr = synthetic(
            |t| 1.0 + 0.05 * (2.0 * std::f64::consts::PI * 1000.0 * t).sin(),
            200_001,
            1.0,
        );
        let r = detect_lock(&tr, &LockCriterion::default()).unwrap();
        assert!(r.locked, "{r:?}");
    }

    #[test]
    fn too_short_trajectory() {
        let tr = synthetic(|_| 0.0, 5, 1.0);
        assert!(matches!(
            detect_lock(&tr, &LockCriterion::default()),
            Err(Error::InsufficientData { got: 5, need: 10 })
        ));
    }

    #[test]
    fn loosening_tolerances_never_unlocks() {
        for slope in [0.0, 0.3, 0.9, 2.0, 40.0] {
            let tr = synthetic(|t| slope * t + 0.001 * t.sin(), 500, 1.0);
            let tight = LockCriterion::default();
            let r1 = detect_lock(&tr, &tight).unwrap();
            for k in 1..5 {
                let loose = LockCriterion {
                    freq_tol: tight.freq_tol * (1 + k) as f64,
                    phase_drift_tol: tight.phase_drift_tol * (1 + 3 * k) as f64,
                    ..tight
                };
                let r2 = detect_lock(&tr, &loose).unwrap();
                assert!(!r1.locked || r2.locked);
            }
        }
    }

    #[test]
    fn loglog_slope_of_inverse_law() {
        let rows: Vec<AveragingRow> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&w| AveragingRow {
                omega1: w,
                sup_error: 3.0 / w,
                sup_theta_error: 3.0 / w,
                detuning_ratio: 0.0,
            })
            .collect();
        assert!((loglog_slope(&rows).unwrap() + 1.0).abs() < 1e-12);
        assert!(loglog_slope(&rows[..1]).is_none());
    }

    #[test]
    fn pi_filter_equilibria() {
        let p = LoopParams::reference()
            .with_vco_gain(1000.0)
            .with_omega_delta_free(89.45);
        let eq = classic_equilibria(&p);
        assert_eq!(eq.len(), 2);
        let (x, th) = eq[0];
        assert!((1000.0 * 5e4 * x - 89.45).abs() < 1e-9);
        assert_eq!(th, 0.0);
        assert!(classic_equilibrium_is_stable(&p, 0.0));
        assert!(!classic_equilibrium_is_stable(&p, std::f64::consts::FRAC_PI_2));
        assert_eq!(hold_in(&p), Some(true));
    }

    #[test]
    fn lead_lag_hold_in_edge() {
        let f = FilterSs::lead_lag(0.05, 0.01).unwrap();
        let base = LoopParams::reference().with_vco_gain(1000.0).with_loop_filter(f);
        // unit DC gain: equilibria exist iff |ω_Δ| ≤ L/8
        assert_eq!(hold_in(&base.clone().with_omega_delta_free(124.0)), Some(true));
        assert_eq!(hold_in(&base.clone().with_omega_delta_free(126.0)), Some(false));
        for (x, th) in classic_equilibria(&base.clone().with_omega_delta_free(89.45)) {
            let p = base.clone().with_omega_delta_free(89.45);
            let s = StateVector::zeros(ModelKind::ClassicPhaseSpace, &p)
                .with_x(&[x])
                .unwrap()
                .with_angle(th);
            let mut d = [0.0; 2];
            crate::models::rhs(ModelKind::ClassicPhaseSpace, 0.0, &s, &p, &mut d).unwrap();
            assert!(d[0].abs() < 1e-9 && d[1].abs() < 1e-9, "{d:?}");
        }
    }
}
