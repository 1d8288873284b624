//! Explicit Runge–Kutta integration: classic fixed-step RK4 and Dormand–Prince
//! 5(4) with embedded error control.
//!
//! Both schemes shorten a step so that it ends exactly on every breakpoint the
//! system reports (data-signal sign changes) and on `t_end`. Discontinuous
//! inputs are sampled at a time strictly inside the step, so no step ever
//! straddles a sign change.

use crate::error::{Error, Result};
use crate::models::{theta_delta_of, CostasSystem, Derived, Layout, LoopParams, ModelKind, StateVector};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// Writes `f(t, y)` into `dy`. `piece` is a time strictly inside the current
    /// step; inputs that are piecewise constant between breakpoints are sampled
    /// there rather than at `t`.
    fn rhs(&self, t: f64, piece: f64, y: &[f64], dy: &mut [f64]);

    /// First discontinuity of the right-hand side strictly after `t`.
    fn next_breakpoint(&self, _t: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    FixedRk4 {
        dt: f64,
    },
    AdaptiveDp45 {
        rel_tol: f64,
        abs_tol: f64,
        /// `f64::INFINITY` for unbounded.
        max_step: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Keep every n-th accepted step.
    Stride(usize),
    /// Keep the first accepted step at or after each multiple of the interval.
    Interval(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Initial time, 0 unless a run is being continued.
    pub t_start: f64,
    pub t_end: f64,
    pub sampling: Sampling,
}

impl IntegratorConfig {
    pub fn fixed(dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::FixedRk4 { dt },
            t_start: 0.0,
            t_end,
            sampling: Sampling::Stride(1),
        }
    }

    pub fn adaptive(rel_tol: f64, abs_tol: f64, max_step: f64, t_end: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::AdaptiveDp45 {
                rel_tol,
                abs_tol,
                max_step,
            },
            t_start: 0.0,
            t_end,
            sampling: Sampling::Stride(1),
        }
    }

    pub fn with_sample_dt(mut self, sample_dt: f64) -> Self {
        self.sampling = Sampling::Interval(sample_dt);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sampling = Sampling::Stride(stride);
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_t_start(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            Scheme::FixedRk4 { dt } => {
                if !(dt > 0.0) || !dt.is_finite() {
                    return Err(Error::param("dt", format!("must be positive, got {dt}")));
                }
            }
            Scheme::AdaptiveDp45 {
                rel_tol,
                abs_tol,
                max_step,
            } => {
                if !(rel_tol > 0.0) {
                    return Err(Error::param("rel_tol", format!("must be positive, got {rel_tol}")));
                }
                if !(abs_tol > 0.0) {
                    return Err(Error::param("abs_tol", format!("must be positive, got {abs_tol}")));
                }
                if !(max_step > 0.0) {
                    return Err(Error::param("max_step", format!("must be positive, got {max_step}")));
                }
            }
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::param("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if !(self.t_start >= 0.0 && self.t_start < self.t_end) {
            return Err(Error::param(
                "t_start",
                format!("must lie in [0, t_end), got {}", self.t_start),
            ));
        }
        match self.sampling {
            Sampling::Stride(0) => return Err(Error::param("sample_stride", "must be at least 1")),
            Sampling::Interval(dt) if !(dt > 0.0) => {
                return Err(Error::param("sample_dt", format!("must be positive, got {dt}")))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

impl Stats {
    fn record(&mut self, h: f64) {
        if self.accepted == 0 {
            self.min_step = h;
            self.max_step = h;
        } else {
            self.min_step = self.min_step.min(h);
            self.max_step = self.max_step.max(h);
        }
        self.accepted += 1;
    }
}

/// Result of a raw integration: sampled times and flattened states.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub stats: Stats,
}

impl Solution {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Work buffers and step-size memory for one integration run.
pub(crate) struct Stepper {
    scheme: Scheme,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    err: Vec<f64>,
    /// Proposed next step for the adaptive scheme.
    h: Option<f64>,
    min_step: f64,
    pub(crate) stats: Stats,
}

impl Stepper {
    pub(crate) fn new(scheme: Scheme, dim: usize, t_end: f64) -> Self {
        Stepper {
            scheme,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            err: vec![0.0; dim],
            h: None,
            min_step: 1e-15 * t_end,
            stats: Stats::default(),
        }
    }

    /// One RK4 step of size `h` from `(t, y)` into `out`.
    fn rk4<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], h: f64, out: &mut [f64]) {
        let piece = t + 0.5 * h;
        let [k1, k2, k3, k4, ..] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.rhs(t, piece, y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        sys.rhs(t + 0.5 * h, piece, tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        sys.rhs(t + 0.5 * h, piece, tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(t + h, piece, tmp, k4);
        for i in 0..y.len() {
            out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.stats.rhs_evals += 4;
    }

    /// One Dormand–Prince step of size `h`; the 5th-order solution goes into
    /// `out`, the embedded error estimate into `self.err`.
    fn dp45<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], h: f64, out: &mut [f64]) {
        let piece = t + 0.5 * h;
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.rhs(t, piece, y, k1);
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, piece, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, piece, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, piece, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, piece, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, piece, tmp, k6);
        for i in 0..n {
            out[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        sys.rhs(t + h, piece, out, k7);
        for i in 0..n {
            self.err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        self.stats.rhs_evals += 7;
    }

    /// A single step of exactly `h` without error control. Used to localize
    /// events inside an already accepted step.
    pub(crate) fn raw_step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], h: f64, out: &mut [f64]) {
        match self.scheme {
            Scheme::FixedRk4 { .. } => self.rk4(sys, t, y, h, out),
            Scheme::AdaptiveDp45 { .. } => self.dp45(sys, t, y, h, out),
        }
    }

    /// Advances `(t, y)` by one accepted step that does not pass `t_limit`.
    /// Returns the new time; the new state is written into `out`.
    pub(crate) fn step<S: OdeSystem>(
        &mut self,
        sys: &S,
        t: f64,
        y: &[f64],
        t_limit: f64,
        out: &mut [f64],
    ) -> Result<f64> {
        match self.scheme {
            Scheme::FixedRk4 { dt } => {
                let remaining = t_limit - t;
                // absorb slivers left by floating-point accumulation
                let (h, t_new) = if remaining <= dt * (1.0 + 1e-9) {
                    (remaining, t_limit)
                } else {
                    (dt, t + dt)
                };
                self.rk4(sys, t, y, h, out);
                check_finite(out, t)?;
                self.stats.record(h);
                Ok(t_new)
            }
            Scheme::AdaptiveDp45 {
                rel_tol,
                abs_tol,
                max_step,
            } => {
                let mut h = match self.h {
                    Some(h) => h,
                    None => self.initial_step(sys, t, y, t_limit, rel_tol, abs_tol, max_step),
                };
                loop {
                    h = h.min(max_step);
                    let remaining = t_limit - t;
                    let clipped = h >= remaining * (1.0 - 1e-12);
                    let h_try = if clipped { remaining } else { h };
                    self.dp45(sys, t, y, h_try, out);
                    let mut acc = 0.0;
                    for i in 0..y.len() {
                        let sc = abs_tol + rel_tol * y[i].abs().max(out[i].abs());
                        let r = self.err[i] / sc;
                        acc += r * r;
                    }
                    let err = (acc / y.len() as f64).sqrt();
                    if err.is_finite() && err <= 1.0 {
                        let factor = if err == 0.0 {
                            5.0
                        } else {
                            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        // a step clipped to a breakpoint says nothing about the next step size
                        let proposal = if clipped { h.max(h_try * factor) } else { h_try * factor };
                        self.h = Some(proposal.min(max_step));
                        self.stats.record(h_try);
                        let t_new = if clipped { t_limit } else { t + h_try };
                        return Ok(t_new);
                    }
                    self.stats.rejected += 1;
                    let factor = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
                    } else {
                        0.1
                    };
                    h = h_try * factor;
                    if h < self.min_step {
                        return Err(Error::StepUnderflow { t, step: h });
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<S: OdeSystem>(
        &mut self,
        sys: &S,
        t: f64,
        y: &[f64],
        t_limit: f64,
        rel_tol: f64,
        abs_tol: f64,
        max_step: f64,
    ) -> f64 {
        // Hairer–Nørsett–Wanner starting step heuristic
        let span = (t_limit - t).max(f64::MIN_POSITIVE);
        let n = y.len() as f64;
        let [k1, k2, ..] = &mut self.k;
        sys.rhs(t, t + 0.5 * span.min(max_step), y, k1);
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..y.len() {
            let sc = abs_tol + rel_tol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span).min(max_step);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h0 * k1[i];
        }
        sys.rhs(t + h0, t + 0.5 * h0, &self.tmp, k2);
        let mut d2 = 0.0;
        for i in 0..y.len() {
            let sc = abs_tol + rel_tol * y[i].abs();
            d2 += ((k2[i] - k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        self.stats.rhs_evals += 2;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(max_step)
    }
}

fn check_finite(y: &[f64], last_good_t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { last_good_t })
    }
}

/// Flow control returned by step observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

/// Steps from `cfg.t_start` to `cfg.t_end`, handing every accepted step
/// `(t0, y0, t1, y1)` to `observe`. Returns the final time and state.
pub(crate) fn drive<S, F>(
    sys: &S,
    y0: &[f64],
    cfg: &IntegratorConfig,
    stepper: &mut Stepper,
    mut observe: F,
) -> Result<(f64, Vec<f64>)>
where
    S: OdeSystem,
    F: FnMut(&mut Stepper, f64, &[f64], f64, &[f64]) -> Flow,
{
    cfg.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::Dimension {
            what: "initial state",
            expected: sys.dim(),
            got: y0.len(),
        });
    }
    check_finite(y0, cfg.t_start)?;
    let mut t = cfg.t_start;
    let mut y = y0.to_vec();
    let mut next = vec![0.0; y.len()];
    while t < cfg.t_end {
        let t_limit = match sys.next_breakpoint(t) {
            Some(b) if b < cfg.t_end => b,
            _ => cfg.t_end,
        };
        let t_new = stepper.step(sys, t, &y, t_limit, &mut next)?;
        let flow = observe(stepper, t, &y, t_new, &next);
        std::mem::swap(&mut y, &mut next);
        t = t_new;
        if flow == Flow::Stop {
            break;
        }
    }
    Ok((t, y))
}

/// Integrates a generic system over `[cfg.t_start, cfg.t_end]`, keeping samples per
/// `cfg.sampling`. The initial and final states are always kept.
pub fn solve<S: OdeSystem>(sys: &S, y0: &[f64], cfg: &IntegratorConfig) -> Result<Solution> {
    let dim = sys.dim();
    let mut times = vec![cfg.t_start];
    let mut states = y0.to_vec();
    let mut step_count = 0usize;
    let mut sample_index = 1u64;
    let mut stepper = Stepper::new(cfg.scheme, dim, cfg.t_end);
    let sampling = cfg.sampling;
    let (t_final, y_final) = drive(sys, y0, cfg, &mut stepper, |_, _, _, t1, y1| {
        step_count += 1;
        let keep = match sampling {
            Sampling::Stride(n) => step_count.is_multiple_of(n),
            Sampling::Interval(dt) => {
                let t0 = cfg.t_start;
                let due = t0 + sample_index as f64 * dt;
                if t1 >= due - 1e-12 * due.abs() {
                    while t0 + sample_index as f64 * dt <= t1 + 1e-12 * t1.abs() {
                        sample_index += 1;
                    }
                    true
                } else {
                    false
                }
            }
        };
        if keep {
            times.push(t1);
            states.extend_from_slice(y1);
        }
        Flow::Continue
    })?;
    if *times.last().unwrap() < t_final {
        times.push(t_final);
        states.extend_from_slice(&y_final);
    }
    Ok(Solution {
        dim,
        times,
        states,
        stats: stepper.stats,
    })
}

/// Sampled trajectory of one Costas-loop model. Derived signals are computed
/// from the stored states and parameters on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: ModelKind,
    pub params: LoopParams,
    pub solution: Solution,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.solution.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.solution.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        self.solution.state(i)
    }

    pub fn state_vector(&self, i: usize) -> StateVector {
        StateVector::from_values(self.kind, &self.params, self.state(i).to_vec()).expect("stored layout")
    }

    pub fn final_state(&self) -> StateVector {
        self.state_vector(self.len() - 1)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.kind, &self.params)
    }

    pub fn derived(&self, i: usize) -> Derived {
        CostasSystem::new(self.kind, &self.params).derived(self.solution.times[i], self.state(i))
    }

    pub fn derived_all(&self) -> Vec<Derived> {
        let sys = CostasSystem::new(self.kind, &self.params);
        (0..self.len())
            .map(|i| sys.derived(self.solution.times[i], self.state(i)))
            .collect()
    }

    pub fn theta_delta(&self) -> Vec<f64> {
        let layout = self.layout();
        (0..self.len())
            .map(|i| theta_delta_of(&layout, self.solution.times[i], self.state(i), &self.params))
            .collect()
    }

    pub fn g(&self) -> Vec<f64> {
        self.derived_all().into_iter().map(|d| d.g).collect()
    }

    pub fn omega2(&self) -> Vec<f64> {
        self.derived_all().into_iter().map(|d| d.omega2).collect()
    }

    pub fn stats(&self) -> Stats {
        self.solution.stats
    }

    /// Continues the run to `t_end` from its final state with the same scheme
    /// and sampling, appending the new samples.
    pub fn extend_to(&mut self, cfg: &IntegratorConfig, t_end: f64) -> Result<()> {
        let t_last = *self.times().last().expect("non-empty trajectory");
        if t_end <= t_last {
            return Ok(());
        }
        let cont = cfg.with_t_start(t_last).with_t_end(t_end);
        let more = integrate(self.kind, &self.params, &self.final_state(), &cont)?;
        let s = &mut self.solution;
        s.times.extend_from_slice(&more.solution.times[1..]);
        s.states.extend_from_slice(&more.solution.states[s.dim..]);
        let (a, b) = (s.stats, more.solution.stats);
        s.stats = Stats {
            accepted: a.accepted + b.accepted,
            rejected: a.rejected + b.rejected,
            rhs_evals: a.rhs_evals + b.rhs_evals,
            min_step: a.min_step.min(b.min_step),
            max_step: a.max_step.max(b.max_step),
        };
        Ok(())
    }
}

/// Integrates one model from `s0` over `[cfg.t_start, cfg.t_end]`.
pub fn integrate(kind: ModelKind, p: &LoopParams, s0: &StateVector, cfg: &IntegratorConfig) -> Result<Trajectory> {
    p.validate()?;
    check_layout(kind, p, s0)?;
    let sys = CostasSystem::new(kind, p);
    let solution = solve(&sys, s0.values(), cfg)?;
    Ok(Trajectory {
        kind,
        params: p.clone(),
        solution,
    })
}

pub(crate) fn check_layout(kind: ModelKind, p: &LoopParams, s0: &StateVector) -> Result<()> {
    if s0.kind() != kind || s0.layout() != &Layout::new(kind, p) {
        return Err(Error::Layout(format!(
            "initial state built for {} does not fit {} with these filters",
            s0.kind(),
            kind
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Poincaré section `θ_Δ = angle`, crossed in `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub angle: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SectionOutcome {
    Crossed {
        state: StateVector,
        t: f64,
    },
    /// No crossing before `t_end`; carries the final state.
    NoCrossing {
        state: StateVector,
        t: f64,
    },
}

const SECTION_TOL: f64 = 1e-10;
const SECTION_MAX_BISECTIONS: usize = 60;

/// Integrates until `θ_Δ` crosses the section. The crossing is localized by
/// bisection on the size of the last step to `|θ_Δ − angle| < 1e-10`.
pub fn integrate_to_section(
    kind: ModelKind,
    p: &LoopParams,
    s0: &StateVector,
    cfg: &IntegratorConfig,
    section: Section,
) -> Result<SectionOutcome> {
    p.validate()?;
    check_layout(kind, p, s0)?;
    let sys = CostasSystem::new(kind, p);
    let layout = sys.layout.clone();
    let target = section.angle;
    let signed = |theta: f64| match section.direction {
        Direction::Increasing => theta - target,
        Direction::Decreasing => target - theta,
    };
    let mut stepper = Stepper::new(cfg.scheme, sys.dim(), cfg.t_end);
    let mut hit: Option<(f64, Vec<f64>)> = None;
    let (t_final, y_final) = drive(&sys, s0.values(), cfg, &mut stepper, |st, t0, y0, t1, y1| {
        let f0 = signed(theta_delta_of(&layout, t0, y0, p));
        let f1 = signed(theta_delta_of(&layout, t1, y1, p));
        if !(f0 < 0.0 && f1 >= 0.0) {
            return Flow::Continue;
        }
        if f1.abs() < SECTION_TOL {
            hit = Some((t1, y1.to_vec()));
            return Flow::Stop;
        }
        let mut lo = 0.0;
        let mut hi = t1 - t0;
        let mut best = (t1, y1.to_vec(), f1);
        let mut trial = vec![0.0; y0.len()];
        for _ in 0..SECTION_MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            st.raw_step(&sys, t0, y0, mid, &mut trial);
            let fm = signed(theta_delta_of(&layout, t0 + mid, &trial, p));
            if fm.abs() < best.2.abs() {
                best = (t0 + mid, trial.clone(), fm);
            }
            if fm.abs() < SECTION_TOL {
                break;
            }
            if fm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hit = Some((best.0, best.1));
        Flow::Stop
    })?;
    Ok(match hit {
        Some((t, y)) => SectionOutcome::Crossed {
            state: StateVector::from_values(kind, p, y)?,
            t,
        },
        None => SectionOutcome::NoCrossing {
            state: StateVector::from_values(kind, p, y_final)?,
            t: t_final,
        },
    })
}
