//! Classical 4th-order stepping for planar autonomous fields, with the step
//! size controlled by the drift of a conserved quantity.
//!
//! A step is accepted only if it moves the invariant by less than
//! `tol * scale * dt`, so the accumulated drift over any stretch of time is
//! bounded by `tol * scale` per unit time by construction. Rejected steps
//! retry at half the size; steps far below budget double the next
//! suggestion. Accepted steps expose cubic Hermite dense output for grid
//! sampling and event probes.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Planar autonomous vector field with a first integral.
pub trait ConservativeField {
    fn rhs(&self, y: [f64; 2]) -> [f64; 2];
    fn invariant(&self, y: [f64; 2]) -> f64;
}

/// Step-size policy. `tol_rel` is the allowed invariant drift per unit time,
/// relative to the invariant scale frozen at segment start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub tol_rel: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tol_rel: 1e-8,
            dt_init: 1e-2,
            dt_min: 1e-13,
            dt_max: 0.25,
        }
    }
}

/// One accepted step with enough data for cubic Hermite interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; 2],
    pub y1: [f64; 2],
    pub f0: [f64; 2],
    pub f1: [f64; 2],
}

impl DenseStep {
    /// Cubic Hermite evaluation at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; 2] {
        let dt = self.t1 - self.t0;
        if dt == 0.0 {
            return self.y1;
        }
        let s = (t - self.t0) / dt;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = h00 * self.y0[i]
                + h10 * dt * self.f0[i]
                + h01 * self.y1[i]
                + h11 * dt * self.f1[i];
        }
        out
    }
}

/// Single classical Runge-Kutta step of size `dt` from `y`, reusing a
/// precomputed `f(y)`.
pub fn rk4_step<F: ConservativeField>(field: &F, y: [f64; 2], f0: [f64; 2], dt: f64) -> [f64; 2] {
    let half = 0.5 * dt;
    let k2 = field.rhs([y[0] + half * f0[0], y[1] + half * f0[1]]);
    let k3 = field.rhs([y[0] + half * k2[0], y[1] + half * k2[1]]);
    let k4 = field.rhs([y[0] + dt * k3[0], y[1] + dt * k3[1]]);
    [
        y[0] + dt / 6.0 * (f0[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (f0[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Outcome of [`advance_step`]: the accepted dense step, its invariant
/// drift, the invariant at the step end, and the suggested size for the
/// next step. `drift_excess` is the drift beyond the ulp quantization floor,
/// the part the per-unit-time guarantee accounts for.
pub struct Advance {
    pub dense: DenseStep,
    pub drift: f64,
    pub drift_excess: f64,
    pub inv1: f64,
    pub dt_next: f64,
}

/// Takes one accepted step from `(t, y)`, no longer than `dt_cap`, halving
/// on budget violations. `inv_scale` is the invariant scale of the current
/// segment.
pub fn advance_step<F: ConservativeField>(
    field: &F,
    t: f64,
    y: [f64; 2],
    f0: [f64; 2],
    inv0: f64,
    dt_suggest: f64,
    dt_cap: f64,
    inv_scale: f64,
    ctrl: &StepControl,
) -> Result<Advance, SimError> {
    let mut dt = dt_suggest.min(dt_cap).min(ctrl.dt_max);
    // The drift measurement is quantized at the ulp of the invariant, so the
    // budget carries an absolute floor; otherwise steps much shorter than
    // tol * dt could never be accepted.
    let floor = 4.0 * f64::EPSILON * inv_scale;
    loop {
        let y1 = rk4_step(field, y, f0, dt);
        let inv1 = field.invariant(y1);
        let drift = (inv1 - inv0).abs();
        let budget = ctrl.tol_rel * inv_scale * dt + floor;
        if drift <= budget && y1[0].is_finite() && y1[1].is_finite() {
            let f1 = field.rhs(y1);
            let dt_next = if drift < budget / 64.0 { 2.0 * dt } else { dt };
            return Ok(Advance {
                dense: DenseStep {
                    t0: t,
                    t1: t + dt,
                    y0: y,
                    y1,
                    f0,
                    f1,
                },
                drift,
                drift_excess: (drift - floor).max(0.0),
                inv1,
                dt_next,
            });
        }
        dt *= 0.5;
        if dt < ctrl.dt_min {
            return Err(SimError::StepUnderflow { time: t, dt });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Harmonic oscillator with its energy, independent of the crate's
    /// dynamics modules.
    struct Oscillator {
        omega_sq: f64,
    }

    impl ConservativeField for Oscillator {
        fn rhs(&self, y: [f64; 2]) -> [f64; 2] {
            [y[1], -self.omega_sq * y[0]]
        }

        fn invariant(&self, y: [f64; 2]) -> f64 {
            0.5 * (y[1] * y[1] + self.omega_sq * y[0] * y[0])
        }
    }

    fn integrate(field: &Oscillator, mut y: [f64; 2], horizon: f64, ctrl: &StepControl) -> ([f64; 2], f64) {
        let mut t = 0.0;
        let mut dt = ctrl.dt_init;
        let inv0 = field.invariant(y);
        let scale = inv0.abs().max(1.0);
        let mut total_drift = 0.0;
        while t < horizon {
            let f0 = field.rhs(y);
            let adv = advance_step(field, t, y, f0, field.invariant(y), dt, horizon - t, scale, ctrl)
                .unwrap();
            total_drift += adv.drift_excess;
            y = adv.dense.y1;
            t = adv.dense.t1;
            dt = adv.dt_next;
        }
        (y, total_drift)
    }

    #[test]
    fn energy_drift_stays_within_budget() {
        let field = Oscillator { omega_sq: 4.0 };
        let ctrl = StepControl::default();
        let y0 = [1.0, 0.0];
        let horizon = 50.0;
        let (_, drift) = integrate(&field, y0, horizon, &ctrl);
        let scale = field.invariant(y0).abs().max(1.0);
        assert!(drift <= ctrl.tol_rel * scale * horizon * 1.0000001, "drift {drift}");
    }

    #[test]
    fn oscillator_period_closure() {
        let field = Oscillator { omega_sq: 4.0 };
        let ctrl = StepControl::default();
        let period = core::f64::consts::PI; // 2 pi / omega with omega = 2
        let (y, _) = integrate(&field, [1.0, 0.0], period, &ctrl);
        assert!((y[0] - 1.0).abs() < 1e-6, "{y:?}");
        assert!(y[1].abs() < 1e-6, "{y:?}");
    }

    #[test]
    fn dense_output_interpolates_endpoints_exactly_and_midpoint_accurately() {
        let field = Oscillator { omega_sq: 1.0 };
        let y0 = [1.0, 0.0];
        let f0 = field.rhs(y0);
        let dt = 0.05;
        let y1 = rk4_step(&field, y0, f0, dt);
        let dense = DenseStep {
            t0: 0.0,
            t1: dt,
            y0,
            y1,
            f0,
            f1: field.rhs(y1),
        };
        assert_eq!(dense.eval(0.0), y0);
        assert_eq!(dense.eval(dt), y1);
        let mid = dense.eval(0.5 * dt);
        let exact = [(0.5 * dt).cos(), -(0.5 * dt).sin()];
        // Hermite cubic interior error is O(dt^4 / 384).
        assert!((mid[0] - exact[0]).abs() < 1e-7);
        assert!((mid[1] - exact[1]).abs() < 1e-7);
    }

    #[test]
    fn underflow_is_reported_for_impossible_tolerance() {
        let field = Oscillator { omega_sq: 1.0 };
        let ctrl = StepControl {
            tol_rel: 1e-30,
            dt_init: 1e-2,
            dt_min: 1e-2,
            dt_max: 0.25,
        };
        let y = [1.0, 0.0];
        let f0 = field.rhs(y);
        let r = advance_step(&field, 0.0, y, f0, field.invariant(y), 1e-2, 1.0, 1.0, &ctrl);
        assert!(matches!(r, Err(SimError::StepUnderflow { .. })));
    }
}
