//! The linear PDMP `dY/dt = A_{I_t} Y` in log-polar coordinates.
//!
//! Between switches the flow is applied exactly through the closed-form
//! matrix exponential: the direction `Theta_t` lives on the unit circle and
//! the radius is carried as `log rho_t`, so trajectories with growth rate
//! `lambda` stay representable over horizons where `lambda t` would overflow
//! a linear-scale radius. The angle is reduced mod 2*pi after every segment
//! and the unit vector is recomputed from it, never accumulated.

use alloc::vec::Vec;

use num_traits::Float;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::linalg2::{expm_with_omega, omega, TraceZeroMatrix2};
use crate::rng::unit_open;

const TWO_PI: f64 = core::f64::consts::TAU;

/// Pair of trace-zero matrices with switching rates `k0, k1 > 0`.
///
/// The spectral condition `a^2 + bc < 0` is not demanded at construction;
/// operations that rely on it (the exact flow, the growth-rate estimators)
/// check it when they run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchedLinearSystem {
    a0: TraceZeroMatrix2,
    a1: TraceZeroMatrix2,
    k0: f64,
    k1: f64,
}

impl SwitchedLinearSystem {
    pub fn new(
        a0: TraceZeroMatrix2,
        a1: TraceZeroMatrix2,
        k0: f64,
        k1: f64,
    ) -> Result<Self, SimError> {
        if !(k0 > 0.0 && k1 > 0.0 && k0.is_finite() && k1.is_finite()) {
            return Err(SimError::NonpositiveRate);
        }
        Ok(Self { a0, a1, k0, k1 })
    }

    pub fn matrix(&self, mode: u8) -> &TraceZeroMatrix2 {
        if mode == 0 {
            &self.a0
        } else {
            &self.a1
        }
    }

    pub fn rate(&self, mode: u8) -> f64 {
        if mode == 0 {
            self.k0
        } else {
            self.k1
        }
    }

    pub fn rates(&self) -> (f64, f64) {
        (self.k0, self.k1)
    }

    /// Both angular frequencies; errors if either matrix has a real
    /// eigenvalue.
    pub fn omegas(&self) -> Result<[f64; 2], SimError> {
        Ok([omega(&self.a0)?.value(), omega(&self.a1)?.value()])
    }

    /// Stationary law of the mode chain: `P(mode 0) = k1/(k0+k1)`.
    pub fn stationary_mode_weights(&self) -> (f64, f64) {
        let s = self.k0 + self.k1;
        (self.k1 / s, self.k0 / s)
    }
}

/// State of the polar process: angle in `[0, 2*pi)`, log radius, active mode
/// and elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPolarState {
    pub theta: f64,
    pub log_r: f64,
    pub mode: u8,
    pub time: f64,
}

impl LogPolarState {
    pub fn new(theta: f64, log_r: f64, mode: u8, time: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            log_r,
            mode,
            time,
        }
    }

    /// Unit direction vector `(cos theta, sin theta)`.
    pub fn unit(&self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c, s]
    }

    /// Reconstructed point `e^{log_r} (cos theta, sin theta)`.
    pub fn position(&self) -> [f64; 2] {
        let r = self.log_r.exp();
        let u = self.unit();
        [r * u[0], r * u[1]]
    }
}

/// Mode switch record: the state immediately after the jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub state: LogPolarState,
}

/// Piecewise record of one switched-linear trajectory: jump events plus the
/// states sampled on the requested output grid. Samples taken exactly at a
/// jump time carry the pre-jump mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPolarTrajectory {
    pub initial: LogPolarState,
    pub jumps: Vec<JumpEvent>,
    pub samples: Vec<LogPolarState>,
    pub final_state: LogPolarState,
}

impl LogPolarTrajectory {
    /// Visits every constant-mode segment as `(mode, start state, duration)`.
    pub fn for_each_segment(&self, mut f: impl FnMut(u8, &LogPolarState, f64)) {
        let mut start = self.initial;
        for jump in &self.jumps {
            f(start.mode, &start, jump.time - start.time);
            start = jump.state;
        }
        if self.final_state.time > start.time {
            f(start.mode, &start, self.final_state.time - start.time);
        }
    }
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % TWO_PI;
    if t < 0.0 {
        t += TWO_PI;
    }
    if t >= TWO_PI {
        t = 0.0;
    }
    t
}

/// Inverse CDF of the exponential distribution: `-ln(1 - u) / rate`.
pub fn exponential_inverse_cdf(rate: f64, u: f64) -> f64 {
    -(1.0 - u).ln() / rate
}

/// Draws an exponential holding time with the given rate via inverse CDF on
/// a uniform deviate from the open unit interval; the result is strictly
/// positive.
pub fn sample_holding_time<R: RngCore + ?Sized>(rate: f64, rng: &mut R) -> Result<f64, SimError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SimError::NonpositiveRate);
    }
    Ok(exponential_inverse_cdf(rate, unit_open(rng)))
}

/// Angular speed `d theta/dt = <A u(theta), u_perp(theta)>` under mode `A`.
pub fn angular_velocity(m: &TraceZeroMatrix2, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let au = [m.a() * c + m.b() * s, m.c() * c - m.a() * s];
    -au[0] * s + au[1] * c
}

/// Radial growth rate `d log rho/dt = <A u(theta), u(theta)>` under mode `A`.
pub fn radial_rate(m: &TraceZeroMatrix2, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let au = [m.a() * c + m.b() * s, m.c() * c - m.a() * s];
    au[0] * c + au[1] * s
}

/// Flows the state for time `t >= 0` under the single matrix `A`, exactly:
/// `v = e^{tA} u(theta)`, new angle `atan2(v)`, log radius incremented by
/// `log |v|`. No truncation error beyond floating point.
pub fn flow_linear(
    m: &TraceZeroMatrix2,
    t: f64,
    state: &LogPolarState,
) -> Result<LogPolarState, SimError> {
    let w = omega(m)?.value();
    Ok(flow_with_omega(m, w, t, state))
}

pub(crate) fn flow_with_omega(
    m: &TraceZeroMatrix2,
    w: f64,
    t: f64,
    state: &LogPolarState,
) -> LogPolarState {
    debug_assert!(t >= 0.0);
    // The radius dynamics is pi-periodic in the angle (the process descends
    // to the projective line), so the flow is computed on the projective
    // representative in [0, pi) and the half-turn parity is carried
    // separately: exactly antipodal starts share every radial increment.
    let (rep, flipped) = projective_angle(wrap_angle(state.theta));
    let (new_rep, rep_flip, log_inc) = flow_projective(m, w, t, rep);
    let theta = if flipped ^ rep_flip {
        wrap_angle(new_rep + core::f64::consts::PI)
    } else {
        new_rep
    };
    LogPolarState {
        theta,
        log_r: state.log_r + log_inc,
        mode: state.mode,
        time: state.time + t,
    }
}

/// Flow on the projective line: advances a representative angle in
/// `[0, pi)`, returning the new representative, whether the half-turn parity
/// flips, and the log-radius increment. Growth-rate estimators work entirely
/// through this function, so starts that differ by exactly pi are
/// bit-identical all the way down.
pub(crate) fn flow_projective(m: &TraceZeroMatrix2, w: f64, t: f64, rep: f64) -> (f64, bool, f64) {
    const PI: f64 = core::f64::consts::PI;
    let e = expm_with_omega(m, w, t);
    let (s, c) = rep.sin_cos();
    let v = e.mul_vec([c, s]);
    let norm_sq = v[0] * v[0] + v[1] * v[1];
    let raw = v[1].atan2(v[0]);
    let (mut new_rep, mut flip) = if raw < 0.0 { (raw + PI, true) } else { (raw, false) };
    if new_rep >= PI {
        // atan2 returned pi, or the fold rounded up onto it.
        new_rep = 0.0;
        flip = !flip;
    }
    (new_rep, flip, 0.5 * norm_sq.ln())
}

/// Folds an angle in `[0, 2*pi)` onto `[0, pi)` plus a half-turn parity.
/// The subtraction is exact (Sterbenz), so exactly antipodal angles share
/// the representative bit for bit.
pub(crate) fn projective_angle(theta: f64) -> (f64, bool) {
    if theta >= core::f64::consts::PI {
        (theta - core::f64::consts::PI, true)
    } else {
        (theta, false)
    }
}

/// Simulates the switched system up to `horizon`, alternating exact flows
/// with mode flips at exponential holding times. The trajectory is a
/// deterministic function of `(system, initial, rng state, grid)`.
///
/// Grid times must be nondecreasing and lie in `[0, horizon]`. A jump
/// scheduled exactly at the horizon is not applied; the last segment is
/// truncated there. The initial state's clock is reset to zero.
pub fn simulate<R: RngCore + ?Sized>(
    system: &SwitchedLinearSystem,
    initial: &LogPolarState,
    horizon: f64,
    output_grid: &[f64],
    rng: &mut R,
) -> Result<LogPolarTrajectory, SimError> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(SimError::InvalidHorizon);
    }
    check_grid(output_grid, horizon)?;
    let omegas = system.omegas()?;

    let initial = LogPolarState::new(initial.theta, initial.log_r, initial.mode & 1, 0.0);
    let mut jumps = Vec::new();
    let mut samples = Vec::with_capacity(output_grid.len());
    let mut seg_start = initial;
    let mut gi = 0;

    loop {
        let mode = seg_start.mode;
        let m = system.matrix(mode);
        let w = omegas[usize::from(mode)];
        let hold = sample_holding_time(system.rate(mode), rng)?;
        let mut t_jump = seg_start.time + hold;
        if t_jump <= seg_start.time {
            // A subnormal holding time rounded away; keep jump times strictly
            // increasing.
            t_jump = f64::from_bits(seg_start.time.to_bits() + 1);
        }
        let seg_end = if t_jump >= horizon { horizon } else { t_jump };

        while gi < output_grid.len() && output_grid[gi] <= seg_end {
            samples.push(flow_with_omega(m, w, output_grid[gi] - seg_start.time, &seg_start));
            gi += 1;
        }

        let end_state = flow_with_omega(m, w, seg_end - seg_start.time, &seg_start);
        if t_jump >= horizon {
            return Ok(LogPolarTrajectory {
                initial,
                jumps,
                samples,
                final_state: end_state,
            });
        }
        let mut post = end_state;
        post.mode ^= 1;
        jumps.push(JumpEvent {
            time: post.time,
            state: post,
        });
        seg_start = post;
    }
}

pub(crate) fn check_grid(grid: &[f64], horizon: f64) -> Result<(), SimError> {
    let mut prev = 0.0f64;
    for &t in grid {
        if !(t >= prev && t <= horizon) {
            return Err(SimError::GridOutOfRange);
        }
        prev = t;
    }
    Ok(())
}
