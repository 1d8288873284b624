//! Right-hand sides of the five Costas-loop models.
//!
//! | kind                      | state                  | carrier terms |
//! |---------------------------|------------------------|---------------|
//! | `SignalSpace`             | `(x1, x2, x, theta2)`  | explicit, data `m(t)` |
//! | `SimplifiedSignalSpace`   | `(x1, x2, x, theta_d)` | explicit, `m = 1` |
//! | `PhaseSpace`              | `(x1, x2, x, theta_d)` | averaged |
//! | `ClassicPhaseSpace`       | `(x, theta_d)`         | averaged, ideal low-pass filters |
//! | `ModifiedSignalSpace`     | `(x, theta2)`          | explicit, data-free |
//!
//! `x1`, `x2` are the states of the two arm low-pass filters, `x` the loop
//! filter state. Phases are unwrapped reals; `theta_d = theta1 - theta2`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filters::FilterSs;
use crate::integrators::OdeSystem;

/// Averaged phase-detector characteristic `sin(2θ)/8`.
#[inline]
pub fn pd_characteristic(theta_delta: f64) -> f64 {
    (2.0 * theta_delta).sin() / 8.0
}

/// Arm filter outputs of an ideal low-pass filter: `(m cos(θ)/2, m sin(θ)/2)`.
pub fn ideal_lpf_outputs(theta_delta: f64, m: f64) -> (f64, f64) {
    (0.5 * m * theta_delta.cos(), 0.5 * m * theta_delta.sin())
}

/// Reduces an unwrapped phase into `[-π/2, π/2)`, the fundamental domain of the
/// phase-detector characteristic.
pub fn wrap_half_period(theta: f64) -> f64 {
    (theta + PI / 2.0).rem_euclid(PI) - PI / 2.0
}

/// Reduces an unwrapped phase into `[-π, π)`.
pub fn wrap_full_period(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataSignal {
    /// `m(t) = 1`
    ConstantOne,
    /// `m(t) = sign(sin(omega_m t))`, with `sign(0) = +1`.
    PeriodicSquare { omega_m: f64 },
}

impl DataSignal {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DataSignal::ConstantOne => 1.0,
            DataSignal::PeriodicSquare { omega_m } => {
                let k = (t * omega_m / PI).floor();
                if k.rem_euclid(2.0) == 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// First sign change strictly after `t`. Transitions sit at `kπ/omega_m`.
    pub fn next_transition(&self, t: f64) -> Option<f64> {
        match *self {
            DataSignal::ConstantOne => None,
            DataSignal::PeriodicSquare { omega_m } => {
                let half = PI / omega_m;
                let k = (t / half).floor() + 1.0;
                let tk = k * half;
                Some(if tk > t { tk } else { (k + 1.0) * half })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    SignalSpace,
    SimplifiedSignalSpace,
    PhaseSpace,
    ClassicPhaseSpace,
    ModifiedSignalSpace,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::SignalSpace,
        ModelKind::SimplifiedSignalSpace,
        ModelKind::PhaseSpace,
        ModelKind::ClassicPhaseSpace,
        ModelKind::ModifiedSignalSpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SignalSpace => "signal_space",
            ModelKind::SimplifiedSignalSpace => "simplified_signal_space",
            ModelKind::PhaseSpace => "phase_space",
            ModelKind::ClassicPhaseSpace => "classic_phase_space",
            ModelKind::ModifiedSignalSpace => "modified_signal_space",
        }
    }

    /// Whether the state carries the two arm low-pass filters.
    pub fn has_arm_filters(self) -> bool {
        matches!(
            self,
            ModelKind::SignalSpace | ModelKind::SimplifiedSignalSpace | ModelKind::PhaseSpace
        )
    }

    /// Whether the angle component is the VCO phase rather than the phase difference.
    pub fn angle_is_vco_phase(self) -> bool {
        matches!(self, ModelKind::SignalSpace | ModelKind::ModifiedSignalSpace)
    }

    pub fn is_autonomous(self) -> bool {
        matches!(self, ModelKind::PhaseSpace | ModelKind::ClassicPhaseSpace)
    }

    /// Whether the right-hand side consults the data signal.
    pub fn uses_data(self) -> bool {
        self == ModelKind::SignalSpace
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("model", format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopParams {
    pub lpf1: FilterSs,
    pub lpf2: FilterSs,
    pub loop_filter: FilterSs,
    /// VCO gain `L`, rad/(s·V).
    pub vco_gain: f64,
    /// VCO free-running frequency, rad/s.
    pub omega2_free: f64,
    /// Carrier frequency, rad/s.
    pub omega1: f64,
    /// Carrier initial phase, rad.
    pub theta1_0: f64,
    pub data: DataSignal,
}

impl LoopParams {
    /// Arm filter cutoff of the reference loop, rad/s.
    pub const REF_OMEGA3: f64 = 1.2566e6;
    pub const REF_TAU1: f64 = 2e-5;
    pub const REF_TAU2: f64 = 3.9789e-6;
    pub const REF_OMEGA1: f64 = 2.0 * PI * 400_000.0;
    pub const REF_VCO_GAIN: f64 = 4.8e6;

    /// Reference loop: unit-gain first-order arm filters at 1.2566e6 rad/s, PI
    /// loop filter (τ₁ = 2e-5 s, τ₂ = 3.9789e-6 s), 400 kHz carrier, L = 4.8e6,
    /// VCO tuned to the carrier, no data.
    pub fn reference() -> Self {
        Self::reference_with_lpf_gain(1.0)
    }

    /// As [`LoopParams::reference`] with a chosen arm-filter DC gain.
    pub fn reference_with_lpf_gain(dc_gain: f64) -> Self {
        let lpf = FilterSs::first_order_lowpass(Self::REF_OMEGA3, dc_gain).expect("valid reference filter");
        LoopParams {
            lpf1: lpf.clone(),
            lpf2: lpf,
            loop_filter: FilterSs::pi_loop_filter(Self::REF_TAU1, Self::REF_TAU2).expect("valid reference filter"),
            vco_gain: Self::REF_VCO_GAIN,
            omega2_free: Self::REF_OMEGA1,
            omega1: Self::REF_OMEGA1,
            theta1_0: 0.0,
            data: DataSignal::ConstantOne,
        }
    }

    /// `omega1 - omega2_free`.
    pub fn omega_delta_free(&self) -> f64 {
        self.omega1 - self.omega2_free
    }

    pub fn with_omega_delta_free(mut self, omega_delta: f64) -> Self {
        self.omega2_free = self.omega1 - omega_delta;
        self
    }

    pub fn with_omega2_free(mut self, omega2_free: f64) -> Self {
        self.omega2_free = omega2_free;
        self
    }

    /// Changes the carrier frequency keeping the free-running frequency deviation.
    pub fn with_omega1(mut self, omega1: f64) -> Self {
        let d = self.omega_delta_free();
        self.omega1 = omega1;
        self.omega2_free = omega1 - d;
        self
    }

    pub fn with_vco_gain(mut self, vco_gain: f64) -> Self {
        self.vco_gain = vco_gain;
        self
    }

    pub fn with_loop_filter(mut self, f: FilterSs) -> Self {
        self.loop_filter = f;
        self
    }

    pub fn with_data(mut self, data: DataSignal) -> Self {
        self.data = data;
        self
    }

    #[inline]
    pub fn carrier_phase(&self, t: f64) -> f64 {
        self.omega1 * t + self.theta1_0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 > 0.0) || !self.omega1.is_finite() {
            return Err(Error::param("omega1", format!("must be positive, got {}", self.omega1)));
        }
        if !(self.vco_gain > 0.0) || !self.vco_gain.is_finite() {
            return Err(Error::param(
                "vco_gain",
                format!("must be positive, got {}", self.vco_gain),
            ));
        }
        if !self.omega2_free.is_finite() || !self.theta1_0.is_finite() {
            return Err(Error::param("omega2_free", "must be finite"));
        }
        if let DataSignal::PeriodicSquare { omega_m } = self.data {
            if !(omega_m > 0.0) || !omega_m.is_finite() {
                return Err(Error::param("omega_m", format!("must be positive, got {omega_m}")));
            }
        }
        Ok(())
    }
}

/// Index ranges of the state components for one kind and filter set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub kind: ModelKind,
    pub x1: Range<usize>,
    pub x2: Range<usize>,
    pub x: Range<usize>,
    pub angle: usize,
}

impl Layout {
    pub fn new(kind: ModelKind, p: &LoopParams) -> Self {
        let n = p.loop_filter.order();
        if kind.has_arm_filters() {
            let n1 = p.lpf1.order();
            let n2 = p.lpf2.order();
            Layout {
                kind,
                x1: 0..n1,
                x2: n1..n1 + n2,
                x: n1 + n2..n1 + n2 + n,
                angle: n1 + n2 + n,
            }
        } else {
            Layout {
                kind,
                x1: 0..0,
                x2: 0..0,
                x: 0..n,
                angle: n,
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.angle + 1
    }
}

/// Flat model state with named views.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: Layout,
    values: Vec<f64>,
}

impl StateVector {
    pub fn zeros(kind: ModelKind, p: &LoopParams) -> Self {
        let layout = Layout::new(kind, p);
        let values = vec![0.0; layout.dim()];
        StateVector { layout, values }
    }

    pub fn from_values(kind: ModelKind, p: &LoopParams, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(kind, p);
        if values.len() != layout.dim() {
            return Err(Error::Dimension {
                what: "state vector",
                expected: layout.dim(),
                got: values.len(),
            });
        }
        Ok(StateVector { layout, values })
    }

    /// Initial state with all filter states zero and `θ₂(0) = 0` (hence
    /// `θ_Δ(0) = θ₁(0)`).
    pub fn initial(kind: ModelKind, p: &LoopParams) -> Self {
        let mut s = Self::zeros(kind, p);
        if !kind.angle_is_vco_phase() {
            s.values[s.layout.angle] = p.theta1_0;
        }
        s
    }

    pub fn with_x1(mut self, v: &[f64]) -> Result<Self> {
        let r = self.layout.x1.clone();
        self.set_block("x1", r, v)?;
        Ok(self)
    }

    pub fn with_x2(mut self, v: &[f64]) -> Result<Self> {
        let r = self.layout.x2.clone();
        self.set_block("x2", r, v)?;
        Ok(self)
    }

    pub fn with_x(mut self, v: &[f64]) -> Result<Self> {
        let r = self.layout.x.clone();
        self.set_block("x", r, v)?;
        Ok(self)
    }

    /// Sets the angle component (θ₂ or θ_Δ depending on the kind).
    pub fn with_angle(mut self, v: f64) -> Self {
        self.values[self.layout.angle] = v;
        self
    }

    /// Sets `θ_Δ(0)`, converting to `θ₂(0) = θ₁(0) − θ_Δ(0)` for VCO-phase layouts.
    pub fn with_initial_theta_delta(mut self, theta_delta: f64, p: &LoopParams) -> Self {
        self.values[self.layout.angle] = if self.layout.kind.angle_is_vco_phase() {
            p.theta1_0 - theta_delta
        } else {
            theta_delta
        };
        self
    }

    fn set_block(&mut self, name: &'static str, r: Range<usize>, v: &[f64]) -> Result<()> {
        if r.len() != v.len() {
            return Err(Error::Dimension {
                what: name,
                expected: r.len(),
                got: v.len(),
            });
        }
        self.values[r].copy_from_slice(v);
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.layout.kind
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn x1(&self) -> &[f64] {
        &self.values[self.layout.x1.clone()]
    }

    pub fn x2(&self) -> &[f64] {
        &self.values[self.layout.x2.clone()]
    }

    pub fn x(&self) -> &[f64] {
        &self.values[self.layout.x.clone()]
    }

    pub fn angle(&self) -> f64 {
        self.values[self.layout.angle]
    }

    /// Phase difference at time `t`.
    pub fn theta_delta(&self, t: f64, p: &LoopParams) -> f64 {
        theta_delta_of(&self.layout, t, &self.values, p)
    }
}

#[inline]
pub(crate) fn theta_delta_of(layout: &Layout, t: f64, y: &[f64], p: &LoopParams) -> f64 {
    let a = y[layout.angle];
    if layout.kind.angle_is_vco_phase() {
        p.carrier_phase(t) - a
    } else {
        a
    }
}

/// Signals derived from one state sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    /// Loop filter input.
    pub phi: f64,
    /// Loop filter output.
    pub g: f64,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub theta_delta: f64,
    /// VCO instantaneous frequency.
    pub omega2: f64,
}

/// A Costas-loop model bound to its parameters; implements [`OdeSystem`].
#[derive(Debug, Clone)]
pub struct CostasSystem<'a> {
    pub params: &'a LoopParams,
    pub layout: Layout,
}

impl<'a> CostasSystem<'a> {
    pub fn new(kind: ModelKind, params: &'a LoopParams) -> Self {
        CostasSystem {
            params,
            layout: Layout::new(kind, params),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.layout.kind
    }

    /// Loop filter input at `(t, y)`, plus the arm filter outputs when present.
    #[inline]
    fn loop_filter_input(&self, t: f64, y: &[f64]) -> (f64, Option<(f64, f64)>) {
        let p = self.params;
        let l = &self.layout;
        match l.kind {
            ModelKind::SignalSpace | ModelKind::SimplifiedSignalSpace | ModelKind::PhaseSpace => {
                let g1 = p.lpf1.state_output(&y[l.x1.clone()]);
                let g2 = p.lpf2.state_output(&y[l.x2.clone()]);
                (g1 * g2, Some((g1, g2)))
            }
            ModelKind::ClassicPhaseSpace => (pd_characteristic(y[l.angle]), None),
            ModelKind::ModifiedSignalSpace => {
                let s1 = p.carrier_phase(t).sin();
                let (s2, c2) = y[l.angle].sin_cos();
                (s1 * s1 * s2 * c2, None)
            }
        }
    }

    /// Derived signals at a sample.
    pub fn derived(&self, t: f64, y: &[f64]) -> Derived {
        let p = self.params;
        let (phi, arms) = self.loop_filter_input(t, y);
        let g = p.loop_filter.output_of(&y[self.layout.x.clone()], phi);
        Derived {
            phi,
            g,
            g1: arms.map(|a| a.0),
            g2: arms.map(|a| a.1),
            theta_delta: theta_delta_of(&self.layout, t, y, p),
            omega2: p.omega2_free + p.vco_gain * g,
        }
    }

    fn check(&self, y: &[f64], dy: &[f64]) {
        assert_eq!(
            y.len(),
            self.layout.dim(),
            "state layout mismatch for {}",
            self.layout.kind
        );
        assert_eq!(
            dy.len(),
            self.layout.dim(),
            "derivative layout mismatch for {}",
            self.layout.kind
        );
    }
}

impl OdeSystem for CostasSystem<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn rhs(&self, t: f64, piece: f64, y: &[f64], dy: &mut [f64]) {
        self.check(y, dy);
        let p = self.params;
        let l = &self.layout;
        let angle = y[l.angle];

        let (phi, _) = self.loop_filter_input(t, y);

        if l.kind.has_arm_filters() {
            let (u1, u2) = match l.kind {
                ModelKind::SignalSpace => {
                    let m = p.data.value(piece);
                    let s1 = p.carrier_phase(t).sin();
                    let (s2, c2) = angle.sin_cos();
                    (m * s1 * s2, m * s1 * c2)
                }
                ModelKind::SimplifiedSignalSpace => {
                    let th1 = p.carrier_phase(t);
                    let (s2, c2) = (th1 - angle).sin_cos();
                    let s1 = th1.sin();
                    (s1 * s2, s1 * c2)
                }
                _ => {
                    let (s, c) = angle.sin_cos();
                    (0.5 * c, 0.5 * s)
                }
            };
            let (x1, rest) = dy.split_at_mut(l.x2.start);
            p.lpf1.derivative(&y[l.x1.clone()], u1, x1);
            p.lpf2.derivative(&y[l.x2.clone()], u2, &mut rest[..l.x2.len()]);
        }

        let x = &y[l.x.clone()];
        p.loop_filter.derivative(x, phi, &mut dy[l.x.clone()]);
        let g = p.loop_filter.output_of(x, phi);
        dy[l.angle] = if l.kind.angle_is_vco_phase() {
            p.omega2_free + p.vco_gain * g
        } else {
            p.omega_delta_free() - p.vco_gain * g
        };
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        if self.layout.kind.uses_data() {
            self.params.data.next_transition(t)
        } else {
            None
        }
    }
}

/// Evaluates one model's right-hand side into `out`.
pub fn rhs(kind: ModelKind, t: f64, s: &StateVector, p: &LoopParams, out: &mut [f64]) -> Result<()> {
    if s.kind() != kind || s.layout() != &Layout::new(kind, p) {
        return Err(Error::Layout(format!(
            "state built for {} does not fit {}",
            s.kind(),
            kind
        )));
    }
    if out.len() != s.values.len() {
        return Err(Error::Dimension {
            what: "derivative buffer",
            expected: s.values.len(),
            got: out.len(),
        });
    }
    CostasSystem::new(kind, p).rhs(t, t, &s.values, out);
    Ok(())
}

/// Initial frequency difference `θ̇_Δ(0) = ω_Δ^free − L c·x(0) − L h φ(0)`, with
/// `φ(0)` the loop filter input at `t = 0`: the product of the arm filter
/// outputs, `φ(θ_Δ(0))` for the classic model, the instantaneous mixer product
/// for the modified loop.
pub fn initial_frequency_difference(p: &LoopParams, s0: &StateVector) -> f64 {
    let sys = CostasSystem::new(s0.kind(), p);
    let d = sys.derived(0.0, s0.values());
    p.omega1 - d.omega2
}
