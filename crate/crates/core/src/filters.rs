//! Linear SISO filters in state-space form
//!
//! ```text
//! x' = A x + b u,    y = c·x + h u
//! ```
//!
//! `A` is stored row-major. The first-order constructors cover every filter
//! used by the canned scenarios; arbitrary orders go through [`FilterSs::new`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSs {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    h: f64,
    requires_stable: bool,
}

/// Internal state of one filter instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterState(pub Vec<f64>);

impl FilterState {
    pub fn zeros(n: usize) -> Self {
        FilterState(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FilterState {
    fn from(v: Vec<f64>) -> Self {
        FilterState(v)
    }
}

impl FilterSs {
    /// Builds a filter from its quadruple. With `requires_stable` set, every
    /// eigenvalue of `A` must have a strictly negative real part.
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, h: f64, requires_stable: bool) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n {
            return Err(Error::Dimension {
                what: "filter matrix A",
                expected: n * n,
                got: a.len(),
            });
        }
        if c.len() != n {
            return Err(Error::Dimension {
                what: "filter output vector c",
                expected: n,
                got: c.len(),
            });
        }
        if a.iter()
            .chain(&b)
            .chain(&c)
            .chain(std::iter::once(&h))
            .any(|v| !v.is_finite())
        {
            return Err(Error::param("filter", "coefficients must be finite"));
        }
        let f = FilterSs {
            n,
            a,
            b,
            c,
            h,
            requires_stable,
        };
        if requires_stable {
            let abscissa = f.spectral_abscissa();
            if !(abscissa < 0.0) {
                return Err(Error::param(
                    "A",
                    format!("filter must be stable, max eigenvalue real part is {abscissa}"),
                ));
            }
        }
        Ok(f)
    }

    /// First-order lag `dc_gain / (s/omega3 + 1)`: `A = -omega3, b = 1, c = dc_gain*omega3, h = 0`.
    pub fn first_order_lowpass(omega3: f64, dc_gain: f64) -> Result<Self> {
        if !(omega3 > 0.0) || !omega3.is_finite() {
            return Err(Error::param("omega3", format!("must be positive, got {omega3}")));
        }
        if !(dc_gain > 0.0) || !dc_gain.is_finite() {
            return Err(Error::param("dc_gain", format!("must be positive, got {dc_gain}")));
        }
        Self::new(vec![-omega3], vec![1.0], vec![dc_gain * omega3], 0.0, true)
    }

    /// Proportional-integral filter `(tau2 s + 1) / (tau1 s)`. `A = 0`, so it is
    /// marginally stable and not flagged as requiring stability.
    pub fn pi_loop_filter(tau1: f64, tau2: f64) -> Result<Self> {
        if !(tau1 > 0.0) || !tau1.is_finite() {
            return Err(Error::param("tau1", format!("must be positive, got {tau1}")));
        }
        if !(tau2 >= 0.0) || !tau2.is_finite() {
            return Err(Error::param("tau2", format!("must be non-negative, got {tau2}")));
        }
        Self::new(vec![0.0], vec![1.0], vec![1.0 / tau1], tau2 / tau1, false)
    }

    /// Lead-lag filter `(tau2 s + 1) / (tau1 s + 1)` with unit DC gain.
    pub fn lead_lag(tau1: f64, tau2: f64) -> Result<Self> {
        if !(tau1 > 0.0) || !tau1.is_finite() {
            return Err(Error::param("tau1", format!("must be positive, got {tau1}")));
        }
        if !(tau2 >= 0.0) || !tau2.is_finite() {
            return Err(Error::param("tau2", format!("must be non-negative, got {tau2}")));
        }
        Self::new(
            vec![-1.0 / tau1],
            vec![1.0],
            vec![(1.0 - tau2 / tau1) / tau1],
            tau2 / tau1,
            true,
        )
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn requires_stable(&self) -> bool {
        self.requires_stable
    }

    /// Largest real part among the eigenvalues of `A` (`-inf` for `n = 0`).
    pub fn spectral_abscissa(&self) -> f64 {
        match self.n {
            0 => f64::NEG_INFINITY,
            1 => self.a[0],
            _ => self
                .a_matrix()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `h - c·A⁻¹·b`, or `None` when `A` is singular (integrating filters).
    pub fn dc_gain(&self) -> Option<f64> {
        if self.n == 0 {
            return Some(self.h);
        }
        let a = self.a_matrix();
        let b = nalgebra::DVector::from_column_slice(&self.b);
        let sol = a.lu().solve(&b)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(self.h - self.c.iter().zip(sol.iter()).map(|(c, s)| c * s).sum::<f64>())
    }

    /// `c·x + h·u`.
    pub fn output(&self, state: &FilterState, u: f64) -> Result<f64> {
        self.check_state(state.as_slice())?;
        Ok(self.output_of(state.as_slice(), u))
    }

    /// `c·exp(A t)·x0`.
    pub fn zero_input_response(&self, x0: &FilterState, t: f64) -> Result<f64> {
        self.check_state(x0.as_slice())?;
        Ok(match self.n {
            0 => 0.0,
            1 => self.c[0] * (self.a[0] * t).exp() * x0.0[0],
            _ => {
                let e = self.exp_at(t);
                let v = e * nalgebra::DVector::from_column_slice(&x0.0);
                dot(&self.c, v.as_slice())
            }
        })
    }

    /// `c·exp(A t)·b`; the feedthrough `h` is not part of it.
    pub fn impulse_response(&self, t: f64) -> f64 {
        match self.n {
            0 => 0.0,
            1 => self.c[0] * (self.a[0] * t).exp() * self.b[0],
            _ => {
                let e = self.exp_at(t);
                let v = e * nalgebra::DVector::from_column_slice(&self.b);
                dot(&self.c, v.as_slice())
            }
        }
    }

    /// Unit-step response from rest, `h + c·∫₀ᵗ exp(Aτ) dτ·b`.
    ///
    /// Evaluated through the exponential of the augmented matrix `[[A, b], [0, 0]]`,
    /// whose upper-right block is the integral term.
    pub fn step_response(&self, t: f64) -> f64 {
        let n = self.n;
        if n == 0 {
            return self.h;
        }
        if n == 1 {
            let a = self.a[0];
            let integral = if (a * t).abs() < 1e-8 {
                // series of (e^{at} - 1)/a
                t * (1.0 + a * t / 2.0 + (a * t).powi(2) / 6.0)
            } else {
                (a * t).exp_m1() / a
            };
            return self.h + self.c[0] * integral * self.b[0];
        }
        let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.a[i * n + j] * t;
            }
            m[(i, n)] = self.b[i] * t;
        }
        let e = m.exp();
        self.h + (0..n).map(|i| self.c[i] * e[(i, n)]).sum::<f64>()
    }

    /// `exp(A t)` via scaling and squaring with a Padé approximant.
    pub fn exp_at(&self, t: f64) -> DMatrix<f64> {
        (self.a_matrix() * t).exp()
    }

    fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.a)
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                what: "filter state",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn state_output(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    #[inline]
    pub(crate) fn output_of(&self, x: &[f64], u: f64) -> f64 {
        dot(&self.c, x) + self.h * u
    }

    /// Writes `A x + b u` into `dx`.
    #[inline]
    pub(crate) fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let n = self.n;
        if n == 1 {
            dx[0] = self.a[0] * x[0] + self.b[0] * u;
            return;
        }
        for (i, d) in dx.iter_mut().enumerate().take(n) {
            *d = dot(&self.a[i * n..(i + 1) * n], x) + self.b[i] * u;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const OMEGA3: f64 = 1.2566e6;

    #[test]
    fn lowpass_quadruple() {
        let f = FilterSs::first_order_lowpass(OMEGA3, 1.0).unwrap();
        assert_eq!(f.a(), &[-OMEGA3]);
        assert_eq!(f.b(), &[1.0]);
        assert_eq!(f.c(), &[OMEGA3]);
        assert_eq!(f.h(), 0.0);
        assert_relative_eq!(f.dc_gain().unwrap(), 1.0, max_relative = 1e-15);
        let f2 = FilterSs::first_order_lowpass(OMEGA3, 2.0).unwrap();
        assert_relative_eq!(f2.dc_gain().unwrap(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn lowpass_rejects_bad_parameters() {
        assert!(matches!(
            FilterSs::first_order_lowpass(0.0, 1.0),
            Err(Error::Parameter { name: "omega3", .. })
        ));
        assert!(matches!(
            FilterSs::first_order_lowpass(1.0, -1.0),
            Err(Error::Parameter { name: "dc_gain", .. })
        ));
    }

    #[test]
    fn pi_filter_quadruple() {
        let f = FilterSs::pi_loop_filter(2e-5, 3.9789e-6).unwrap();
        assert_eq!(f.a(), &[0.0]);
        assert_eq!(f.b(), &[1.0]);
        assert_relative_eq!(f.c()[0], 5e4, max_relative = 1e-12);
        assert_relative_eq!(f.h(), 0.198945, max_relative = 1e-12);
        assert!(f.dc_gain().is_none());
        assert!(FilterSs::pi_loop_filter(0.0, 1.0).is_err());
        assert!(FilterSs::pi_loop_filter(1.0, -1.0).is_err());
    }

    #[test]
    fn pi_step_response_is_proportional_plus_ramp() {
        let f = FilterSs::pi_loop_filter(2e-5, 3.9789e-6).unwrap();
        assert_relative_eq!(f.step_response(1e-5), 0.198945 + 0.5, max_relative = 1e-12);
        let integ = FilterSs::pi_loop_filter(1.0, 0.0).unwrap();
        assert_relative_eq!(integ.step_response(3.0), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn output_values() {
        let pi = FilterSs::pi_loop_filter(2e-5, 3.9789e-6).unwrap();
        assert_relative_eq!(
            pi.output(&FilterState(vec![0.0]), 1.0).unwrap(),
            0.198945,
            max_relative = 1e-12
        );
        assert_eq!(pi.output(&FilterState(vec![0.0]), 0.0).unwrap(), 0.0);
        let lpf = FilterSs::first_order_lowpass(OMEGA3, 1.0).unwrap();
        assert_relative_eq!(
            lpf.output(&FilterState(vec![0.02]), 0.0).unwrap(),
            25132.0,
            max_relative = 1e-12
        );
        assert!(matches!(
            lpf.output(&FilterState(vec![0.0, 1.0]), 0.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_input_response_values() {
        let lpf = FilterSs::first_order_lowpass(OMEGA3, 1.0).unwrap();
        let x0 = FilterState(vec![0.02]);
        assert_relative_eq!(
            lpf.zero_input_response(&x0, 0.0).unwrap(),
            25132.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            lpf.zero_input_response(&x0, 5.0 / OMEGA3).unwrap(),
            25132.0 * (-5.0f64).exp(),
            max_relative = 1e-12
        );
        assert!((lpf.zero_input_response(&x0, 5.0 / OMEGA3).unwrap() - 169.3).abs() < 0.1);
        assert_eq!(lpf.zero_input_response(&FilterState(vec![0.0]), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn impulse_response_values() {
        let lpf = FilterSs::first_order_lowpass(OMEGA3, 1.0).unwrap();
        assert_relative_eq!(lpf.impulse_response(0.0), OMEGA3, max_relative = 1e-15);
        assert_relative_eq!(
            lpf.impulse_response(1.0 / OMEGA3),
            OMEGA3 * (-1.0f64).exp(),
            max_relative = 1e-14
        );
        let pi = FilterSs::pi_loop_filter(2e-5, 3.9789e-6).unwrap();
        for t in [0.0, 1e-6, 1.0] {
            assert_relative_eq!(pi.impulse_response(t), 5e4, max_relative = 1e-12);
        }
        let unit = FilterSs::first_order_lowpass(1.0, 1.0).unwrap();
        assert_relative_eq!(unit.impulse_response(2.0), (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn impulse_response_matches_exponential_over_ten_time_constants() {
        let lpf = FilterSs::first_order_lowpass(OMEGA3, 1.0).unwrap();
        for k in 0..=1000 {
            let t = 10.0 / OMEGA3 * k as f64 / 1000.0;
            let expected = OMEGA3 * (-OMEGA3 * t).exp();
            assert_relative_eq!(lpf.impulse_response(t), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn stability_is_checked_for_higher_orders() {
        // two real poles at -1, -2
        let stable = FilterSs::new(vec![0.0, 1.0, -2.0, -3.0], vec![0.0, 1.0], vec![2.0, 0.0], 0.0, true);
        assert!(stable.is_ok());
        assert_relative_eq!(stable.unwrap().spectral_abscissa(), -1.0, max_relative = 1e-12);
        // poles at +1, -2
        let unstable = FilterSs::new(vec![0.0, 1.0, 2.0, -1.0], vec![0.0, 1.0], vec![1.0, 0.0], 0.0, true);
        assert!(matches!(unstable, Err(Error::Parameter { name: "A", .. })));
        assert!(FilterSs::new(vec![0.0; 3], vec![1.0, 1.0], vec![1.0, 1.0], 0.0, false).is_err());
    }

    #[test]
    fn second_order_responses_match_closed_form() {
        // H(s) = 2 / ((s+1)(s+2)) realized in companion form
        let f = FilterSs::new(vec![0.0, 1.0, -2.0, -3.0], vec![0.0, 1.0], vec![2.0, 0.0], 0.0, true).unwrap();
        for t in [0.0f64, 0.1, 0.7, 2.5, 6.0] {
            let imp = 2.0 * ((-t).exp() - (-2.0 * t).exp());
            assert!((f.impulse_response(t) - imp).abs() < 1e-12);
            let step = 1.0 - 2.0 * (-t).exp() + (-2.0 * t).exp();
            assert!((f.step_response(t) - step).abs() < 1e-12);
        }
        assert_relative_eq!(f.dc_gain().unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn lead_lag_has_unit_dc_gain() {
        let f = FilterSs::lead_lag(0.05, 0.01).unwrap();
        assert_relative_eq!(f.dc_gain().unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(f.step_response(0.0), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn zero_input_response_decays_at_spectral_rate() {
        let lpf = FilterSs::first_order_lowpass(OMEGA3, 1.0).unwrap();
        let x0 = FilterState(vec![0.3]);
        let sigma = -lpf.spectral_abscissa();
        let mut prev = lpf.zero_input_response(&x0, 0.0).unwrap().abs();
        let dt = 0.1 / OMEGA3;
        for k in 1..100 {
            let cur = lpf.zero_input_response(&x0, k as f64 * dt).unwrap().abs();
            assert!(cur <= prev * (-sigma * dt).exp() * (1.0 + 1e-12));
            prev = cur;
        }
    }
}
