//! Switched planar Lotka-Volterra dynamics.
//!
//! Each regime `dx/dt = x(a - b y)`, `dy/dt = y(-c + d x)` is integrated in
//! log-density coordinates, where the right-hand side `(a - b e^v, -c + d e^u)`
//! is exact and positivity is structural. Step sizes are controlled by the
//! drift of the regime's first integral `H = d x - c ln x + b y - a ln y`,
//! which is constant along unswitched flow. Switching happens at exponential
//! holding times, or at thinned event times when the rates depend on the
//! state.

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Float;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::linalg2::TraceZeroMatrix2;
use crate::ode::{advance_step, rk4_step, ConservativeField, DenseStep, StepControl};
use crate::rng::unit_open;
use crate::switched_linear::{check_grid, sample_holding_time};

/// One Lotka-Volterra regime; all coefficients strictly positive.
/// `a`: prey growth, `b`: predation, `c`: predator death, `d`: conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LVRegime {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl LVRegime {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, SimError> {
        for (value, field) in [(a, "a"), (b, "b"), (c, "c"), (d, "d")] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::InvalidRegime { field });
            }
        }
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn scale(&self, gamma: f64) -> Result<Self, SimError> {
        Self::new(self.a * gamma, self.b * gamma, self.c * gamma, self.d * gamma)
    }
}

/// Positive equilibrium `(p, q) = (c/d, a/b)` of a regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub p: f64,
    pub q: f64,
}

/// State in log-density coordinates; `x, y > 0` is automatic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LVState {
    pub log_x: f64,
    pub log_y: f64,
    pub mode: u8,
    pub time: f64,
}

impl LVState {
    pub fn from_densities(x: f64, y: f64, mode: u8, time: f64) -> Result<Self, SimError> {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(SimError::InvalidState);
        }
        Ok(Self {
            log_x: x.ln(),
            log_y: y.ln(),
            mode,
            time,
        })
    }

    pub fn x(&self) -> f64 {
        self.log_x.exp()
    }

    pub fn y(&self) -> f64 {
        self.log_y.exp()
    }
}

/// Switching specification: constant rates or bounded state-dependent rate
/// functions sampled by thinning.
#[derive(Clone)]
pub enum SwitchingRates {
    Constant { k0: f64, k1: f64 },
    StateDependent { rate0: RateFn, rate1: RateFn, bound: f64 },
}

/// State-dependent switching intensity; must be pure.
pub type RateFn = Arc<dyn Fn(&LVState) -> f64 + Send + Sync>;

impl core::fmt::Debug for SwitchingRates {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SwitchingRates::Constant { k0, k1 } => {
                write!(f, "Constant {{ k0: {k0}, k1: {k1} }}")
            }
            SwitchingRates::StateDependent { bound, .. } => {
                write!(f, "StateDependent {{ bound: {bound} }}")
            }
        }
    }
}

/// The switched pair of regimes with its switching mechanism.
#[derive(Debug, Clone)]
pub struct SwitchedLVSystem {
    regime0: LVRegime,
    regime1: LVRegime,
    rates: SwitchingRates,
}

impl SwitchedLVSystem {
    pub fn with_constant_rates(
        regime0: LVRegime,
        regime1: LVRegime,
        k0: f64,
        k1: f64,
    ) -> Result<Self, SimError> {
        if !(k0 > 0.0 && k1 > 0.0 && k0.is_finite() && k1.is_finite()) {
            return Err(SimError::NonpositiveRate);
        }
        Ok(Self {
            regime0,
            regime1,
            rates: SwitchingRates::Constant { k0, k1 },
        })
    }

    pub fn with_state_dependent_rates(
        regime0: LVRegime,
        regime1: LVRegime,
        rate0: RateFn,
        rate1: RateFn,
        bound: f64,
    ) -> Result<Self, SimError> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(SimError::NonpositiveRate);
        }
        Ok(Self {
            regime0,
            regime1,
            rates: SwitchingRates::StateDependent { rate0, rate1, bound },
        })
    }

    pub fn regime(&self, mode: u8) -> &LVRegime {
        if mode == 0 {
            &self.regime0
        } else {
            &self.regime1
        }
    }

    pub fn rates(&self) -> &SwitchingRates {
        &self.rates
    }

    /// Constant rates, if that is the switching mechanism.
    pub fn constant_rates(&self) -> Option<(f64, f64)> {
        match self.rates {
            SwitchingRates::Constant { k0, k1 } => Some((k0, k1)),
            SwitchingRates::StateDependent { .. } => None,
        }
    }

    /// Shared equilibrium of the two regimes, if the relative mismatch of
    /// both coordinates is within `tol`.
    pub fn common_equilibrium(&self, tol: f64) -> Option<Equilibrium> {
        if has_common_equilibrium(&self.regime0, &self.regime1, tol) {
            let e0 = equilibrium(&self.regime0);
            let e1 = equilibrium(&self.regime1);
            Some(Equilibrium {
                p: 0.5 * (e0.p + e1.p),
                q: 0.5 * (e0.q + e1.q),
            })
        } else {
            None
        }
    }
}

/// `(p, q) = (c/d, a/b)`.
pub fn equilibrium(r: &LVRegime) -> Equilibrium {
    Equilibrium {
        p: r.c / r.d,
        q: r.a / r.b,
    }
}

/// Relative comparison of both equilibrium coordinates within `tol`.
pub fn has_common_equilibrium(r0: &LVRegime, r1: &LVRegime, tol: f64) -> bool {
    let e0 = equilibrium(r0);
    let e1 = equilibrium(r1);
    let close = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs());
    close(e0.p, e1.p) && close(e0.q, e1.q)
}

/// First integral `H = d x - c ln x + b y - a ln y` of a single regime,
/// evaluated in log coordinates. Constant along the regime's flow and
/// strictly minimized at its equilibrium.
pub fn first_integral(r: &LVRegime, state: &LVState) -> f64 {
    r.d * state.log_x.exp() - r.c * state.log_x + r.b * state.log_y.exp() - r.a * state.log_y
}

/// Value of the first integral at the regime's own equilibrium (its global
/// minimum).
pub fn first_integral_min(r: &LVRegime) -> f64 {
    let e = equilibrium(r);
    r.d * e.p - r.c * e.p.ln() + r.b * e.q - r.a * e.q.ln()
}

/// Jacobian of the regime's vector field at the common equilibrium:
/// `[[0, -b p], [d q, 0]]`. Satisfies the spectral condition automatically.
pub fn linearize(r: &LVRegime, eq: &Equilibrium) -> TraceZeroMatrix2 {
    TraceZeroMatrix2::new(0.0, -r.b * eq.p, r.d * eq.q)
}

/// True iff `b1 d0 != b0 d1` (scale-invariant comparison): for regimes with
/// a common equilibrium this is equivalent to the vector fields not being
/// collinear. Errors when the equilibria differ.
pub fn check_noncollinear(r0: &LVRegime, r1: &LVRegime, tol: f64) -> Result<bool, SimError> {
    if !has_common_equilibrium(r0, r1, tol) {
        return Err(SimError::NoCommonEquilibrium);
    }
    let lhs = r1.b * r0.d;
    let rhs = r0.b * r1.d;
    Ok((lhs - rhs).abs() > tol * lhs.abs().max(rhs.abs()))
}

/// Log-coordinate Lotka-Volterra field with its first integral.
struct LogLvField<'a> {
    regime: &'a LVRegime,
}

impl ConservativeField for LogLvField<'_> {
    fn rhs(&self, y: [f64; 2]) -> [f64; 2] {
        let r = self.regime;
        [r.a - r.b * y[1].exp(), -r.c + r.d * y[0].exp()]
    }

    fn invariant(&self, y: [f64; 2]) -> f64 {
        let r = self.regime;
        r.d * y[0].exp() - r.c * y[0] + r.b * y[1].exp() - r.a * y[1]
    }
}

/// Exit event: stop when the state leaves the open ball of given radius
/// around `center` (in raw densities, Euclidean norm). The reported state
/// satisfies `dist in [radius, radius + loc_tol]`.
#[derive(Debug, Clone, Copy)]
pub struct ExitBall {
    pub center: [f64; 2],
    pub radius: f64,
    pub loc_tol: f64,
}

impl ExitBall {
    fn gap(&self, y: [f64; 2]) -> f64 {
        let dx = y[0].exp() - self.center[0];
        let dy = y[1].exp() - self.center[1];
        dx.hypot(dy) - self.radius
    }
}

/// Observer of the integration: sees every accepted step (with dense output)
/// and every jump.
pub trait LvObserver {
    fn on_step(&mut self, dense: &DenseStep, mode: u8, regime: &LVRegime);
    fn on_jump(&mut self, _state: &LVState) {}
}

/// Observer that records nothing.
pub struct NullObserver;

impl LvObserver for NullObserver {
    fn on_step(&mut self, _: &DenseStep, _: u8, _: &LVRegime) {}
}

/// How a drive ended: at the horizon, or by exiting the ball at the located
/// crossing time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveOutcome {
    Horizon(LVState),
    Exited { time: f64, state: LVState },
}

/// Integrator audit accumulated over a drive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveStats {
    /// Largest per-segment cumulative invariant drift per unit time,
    /// relative to the segment's invariant scale.
    pub max_h_drift_rate: f64,
    pub steps: u64,
    pub jumps: u64,
}

/// Drives the switched system from `initial` (clock reset to zero) until the
/// horizon or until the exit event fires. Deterministic in the rng state.
pub fn drive_switched_lv<R: RngCore + ?Sized, O: LvObserver>(
    system: &SwitchedLVSystem,
    initial: &LVState,
    horizon: f64,
    rng: &mut R,
    ctrl: &StepControl,
    exit: Option<&ExitBall>,
    obs: &mut O,
) -> Result<(DriveOutcome, DriveStats), SimError> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(SimError::InvalidHorizon);
    }
    if !(initial.log_x.is_finite() && initial.log_y.is_finite()) {
        return Err(SimError::InvalidState);
    }
    let mut state = LVState {
        mode: initial.mode & 1,
        time: 0.0,
        ..*initial
    };
    let mut stats = DriveStats::default();
    if let Some(ball) = exit {
        if ball.gap([state.log_x, state.log_y]) >= 0.0 {
            return Ok((DriveOutcome::Exited { time: 0.0, state }, stats));
        }
    }

    loop {
        match &system.rates {
            SwitchingRates::Constant { k0, k1 } => {
                let k = if state.mode == 0 { *k0 } else { *k1 };
                let hold = sample_holding_time(k, rng)?;
                let t_jump = state.time + hold;
                let target = t_jump.min(horizon);
                if let Some(hit) =
                    integrate_segment(system, &mut state, target, ctrl, exit, obs, &mut stats)?
                {
                    return Ok((hit, stats));
                }
                if t_jump >= horizon {
                    return Ok((DriveOutcome::Horizon(state), stats));
                }
                state.mode ^= 1;
                stats.jumps += 1;
                obs.on_jump(&state);
            }
            SwitchingRates::StateDependent { rate0, rate1, bound } => {
                // Thinning: propose candidates at the bounding rate, accept
                // with probability rate(X)/bound, flowing between proposals.
                let candidate = sample_holding_time(*bound, rng)?;
                let t_cand = state.time + candidate;
                let target = t_cand.min(horizon);
                if let Some(hit) =
                    integrate_segment(system, &mut state, target, ctrl, exit, obs, &mut stats)?
                {
                    return Ok((hit, stats));
                }
                if t_cand >= horizon {
                    return Ok((DriveOutcome::Horizon(state), stats));
                }
                let rate_fn = if state.mode == 0 { rate0 } else { rate1 };
                let rate = rate_fn(&state);
                if !(rate > 0.0) || rate > *bound * (1.0 + 1e-12) {
                    return Err(SimError::RateOutOfBounds { rate, bound: *bound });
                }
                if unit_open(rng) * *bound <= rate {
                    state.mode ^= 1;
                    stats.jumps += 1;
                    obs.on_jump(&state);
                }
            }
        }
    }
}

/// Integrates the current mode from `state.time` to `target`, reporting an
/// exit crossing if the event fires on the way.
fn integrate_segment<O: LvObserver>(
    system: &SwitchedLVSystem,
    state: &mut LVState,
    target: f64,
    ctrl: &StepControl,
    exit: Option<&ExitBall>,
    obs: &mut O,
    stats: &mut DriveStats,
) -> Result<Option<DriveOutcome>, SimError> {
    let mode = state.mode;
    let regime = *system.regime(mode);
    let field = LogLvField { regime: &regime };
    let seg_t0 = state.time;
    let mut y = [state.log_x, state.log_y];
    let mut inv = field.invariant(y);
    let inv_scale = inv.abs().max(1.0);
    let mut cum_drift = 0.0;
    let mut f0 = field.rhs(y);
    let mut dt = ctrl.dt_init;

    while state.time < target {
        let adv = advance_step(
            &field,
            state.time,
            y,
            f0,
            inv,
            dt,
            target - state.time,
            inv_scale,
            ctrl,
        )?;
        stats.steps += 1;
        cum_drift += adv.drift_excess;
        obs.on_step(&adv.dense, mode, &regime);

        if let Some(ball) = exit {
            let crossing = if ball.gap(adv.dense.y1) >= 0.0 {
                Some(adv.dense.t1)
            } else {
                // A tangential excursion can cross and return within one
                // step; probe the midpoint through the dense output.
                let mid = 0.5 * (adv.dense.t0 + adv.dense.t1);
                if ball.gap(adv.dense.eval(mid)) >= 0.0 {
                    Some(mid)
                } else {
                    None
                }
            };
            if let Some(hi) = crossing {
                let (t_hit, y_hit) = locate_exit(&field, &adv.dense, ball, hi);
                let elapsed = (t_hit - seg_t0).max(f64::MIN_POSITIVE);
                stats.max_h_drift_rate =
                    stats.max_h_drift_rate.max(cum_drift / (inv_scale * elapsed));
                let hit_state = LVState {
                    log_x: y_hit[0],
                    log_y: y_hit[1],
                    mode,
                    time: t_hit,
                };
                return Ok(Some(DriveOutcome::Exited {
                    time: t_hit,
                    state: hit_state,
                }));
            }
        }

        y = adv.dense.y1;
        f0 = adv.dense.f1;
        inv = adv.inv1;
        state.time = adv.dense.t1;
        dt = adv.dt_next;
    }

    let elapsed = target - seg_t0;
    if elapsed > 0.0 {
        stats.max_h_drift_rate = stats.max_h_drift_rate.max(cum_drift / (inv_scale * elapsed));
    }
    state.log_x = y[0];
    state.log_y = y[1];
    Ok(None)
}

/// Bisection for the first time in `(t0, hi]` where the gap is nonnegative;
/// candidate states are probed by a single RK4 step from the accepted step's
/// start, which is sharper than interpolation. Returns a state with
/// `gap in [0, loc_tol]`.
fn locate_exit(
    field: &LogLvField<'_>,
    dense: &DenseStep,
    ball: &ExitBall,
    hi_init: f64,
) -> (f64, [f64; 2]) {
    let probe = |t: f64| -> [f64; 2] {
        if t <= dense.t0 {
            dense.y0
        } else {
            rk4_step(field, dense.y0, dense.f0, t - dense.t0)
        }
    };
    let mut lo = dense.t0;
    let mut hi = hi_init;
    let mut y_hi = probe(hi);
    if ball.gap(dense.y0) >= 0.0 {
        return (dense.t0, dense.y0);
    }
    for _ in 0..200 {
        if ball.gap(y_hi) <= ball.loc_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let y_mid = probe(mid);
        if ball.gap(y_mid) >= 0.0 {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    (hi, y_hi)
}

/// Integrates a single regime for `duration` with the conservative step
/// control; the first integral drifts by at most `tol_rel * scale` per unit
/// time.
pub fn flow_lv(
    r: &LVRegime,
    state: &LVState,
    duration: f64,
    ctrl: &StepControl,
) -> Result<LVState, SimError> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(SimError::InvalidHorizon);
    }
    let field = LogLvField { regime: r };
    let target = state.time + duration;
    let mut t = state.time;
    let mut y = [state.log_x, state.log_y];
    let mut inv = field.invariant(y);
    let inv_scale = inv.abs().max(1.0);
    let mut f0 = field.rhs(y);
    let mut dt = ctrl.dt_init;
    while t < target {
        let adv = advance_step(&field, t, y, f0, inv, dt, target - t, inv_scale, ctrl)?;
        y = adv.dense.y1;
        f0 = adv.dense.f1;
        inv = adv.inv1;
        t = adv.dense.t1;
        dt = adv.dt_next;
    }
    Ok(LVState {
        log_x: y[0],
        log_y: y[1],
        mode: state.mode,
        time: target,
    })
}

/// Thinning sampler for one state-dependent jump: proposes exponential
/// candidates at the bounding rate, advances the deterministic flow through
/// the supplied handle, and accepts with probability `rate/bound`. Returns
/// the accepted jump time. Fatal if the rate leaves `(0, bound]` at any
/// visited state.
pub fn sample_jump_state_dependent<R: RngCore + ?Sized>(
    rate_fn: &dyn Fn(&LVState) -> f64,
    bound: f64,
    mut advance: impl FnMut(f64) -> Result<LVState, SimError>,
    rng: &mut R,
) -> Result<f64, SimError> {
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(SimError::NonpositiveRate);
    }
    let mut elapsed = 0.0;
    loop {
        let wait = sample_holding_time(bound, rng)?;
        let state = advance(wait)?;
        elapsed += wait;
        let rate = rate_fn(&state);
        if !(rate > 0.0) || rate > bound * (1.0 + 1e-12) {
            return Err(SimError::RateOutOfBounds { rate, bound });
        }
        if unit_open(rng) * bound <= rate {
            return Ok(elapsed);
        }
    }
}

/// Per-sample record on the output grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LVSample {
    pub time: f64,
    pub log_x: f64,
    pub log_y: f64,
    pub mode: u8,
    /// First integral of the regime active at this sample.
    pub h_active: f64,
}

/// Jump record: state immediately after the mode flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LVJump {
    pub time: f64,
    pub state: LVState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LVTrajectory {
    pub initial: LVState,
    pub jumps: Vec<LVJump>,
    pub samples: Vec<LVSample>,
    pub final_state: LVState,
    pub stats: DriveStats,
}

struct GridRecorder<'a> {
    grid: &'a [f64],
    next: usize,
    samples: Vec<LVSample>,
    jumps: Vec<LVJump>,
}

impl LvObserver for GridRecorder<'_> {
    fn on_step(&mut self, dense: &DenseStep, mode: u8, regime: &LVRegime) {
        while self.next < self.grid.len() && self.grid[self.next] <= dense.t1 {
            let t = self.grid[self.next];
            let y = dense.eval(t);
            let state = LVState {
                log_x: y[0],
                log_y: y[1],
                mode,
                time: t,
            };
            self.samples.push(LVSample {
                time: t,
                log_x: y[0],
                log_y: y[1],
                mode,
                h_active: first_integral(regime, &state),
            });
            self.next += 1;
        }
    }

    fn on_jump(&mut self, state: &LVState) {
        self.jumps.push(LVJump {
            time: state.time,
            state: *state,
        });
    }
}

/// Simulates the switched system, sampling the output grid by dense
/// interpolation; samples falling exactly on a jump carry the pre-jump mode.
pub fn simulate_lv<R: RngCore + ?Sized>(
    system: &SwitchedLVSystem,
    initial: &LVState,
    horizon: f64,
    output_grid: &[f64],
    rng: &mut R,
    ctrl: &StepControl,
) -> Result<LVTrajectory, SimError> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(SimError::InvalidHorizon);
    }
    check_grid(output_grid, horizon)?;
    let mut recorder = GridRecorder {
        grid: output_grid,
        next: 0,
        samples: Vec::with_capacity(output_grid.len()),
        jumps: Vec::new(),
    };
    let initial = LVState {
        mode: initial.mode & 1,
        time: 0.0,
        ..*initial
    };
    // Grid points at t = 0 precede the first accepted step.
    while recorder.next < output_grid.len() && output_grid[recorder.next] == 0.0 {
        let regime = system.regime(initial.mode);
        recorder.samples.push(LVSample {
            time: 0.0,
            log_x: initial.log_x,
            log_y: initial.log_y,
            mode: initial.mode,
            h_active: first_integral(regime, &initial),
        });
        recorder.next += 1;
    }
    let (outcome, stats) =
        drive_switched_lv(system, &initial, horizon, rng, ctrl, None, &mut recorder)?;
    let final_state = match outcome {
        DriveOutcome::Horizon(s) => s,
        DriveOutcome::Exited { state, .. } => state,
    };
    Ok(LVTrajectory {
        initial,
        jumps: recorder.jumps,
        samples: recorder.samples,
        final_state,
        stats,
    })
}

/// Period of the closed single-regime orbit through `state0`, located by a
/// return-map crossing of the section `x = x(0)` in the starting phase, and
/// the closure error `|X(T) - X(0)|` at that return. A measure of integrator
/// quality: the orbit is exactly periodic.
pub fn single_regime_period(
    r: &LVRegime,
    state0: &LVState,
    ctrl: &StepControl,
) -> Result<(f64, f64), SimError> {
    let u0 = state0.log_x;
    let field = LogLvField { regime: r };
    let sign0 = field.rhs([state0.log_x, state0.log_y])[0];
    if sign0 == 0.0 {
        return Err(SimError::InvalidState);
    }
    // March in chunks; the section is u = u0 crossed with du/dt of the same
    // sign as at the start.
    let mut state = LVState { time: 0.0, ..*state0 };
    let chunk = 0.05;
    let mut prev = state;
    let mut left_section = false;
    for _ in 0..200_000 {
        let next = flow_lv(r, &prev, chunk, ctrl)?;
        let du_prev = prev.log_x - u0;
        let du_next = next.log_x - u0;
        if left_section && du_prev * du_next <= 0.0 && du_prev != 0.0 {
            // Crossing inside (prev, next]: check direction by sign of du/dt.
            let dudt = field.rhs([next.log_x, next.log_y])[0];
            if dudt * sign0 > 0.0 {
                // Bisect the crossing time.
                let (mut lo, mut hi) = (0.0, chunk);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let s = flow_lv(r, &prev, mid, ctrl)?;
                    if (s.log_x - u0) * du_prev > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let hit = flow_lv(r, &prev, 0.5 * (lo + hi), ctrl)?;
                let period = hit.time;
                let closure = (hit.x() - state0.x()).hypot(hit.y() - state0.y());
                return Ok((period, closure));
            }
        }
        if (prev.log_x - u0).abs() > 1e-3 {
            left_section = true;
        }
        state = next;
        prev = state;
    }
    Err(SimError::InvalidHorizon)
}

/// Extremes `((x_min, x_max), (y_min, y_max))` of the closed orbit of regime
/// `r` at first-integral level `h`, located by bisection on each side of the
/// equilibrium.
pub fn orbit_extents(r: &LVRegime, h: f64) -> Result<([f64; 2], [f64; 2]), SimError> {
    let e = equilibrium(r);
    let phi = |x: f64| r.d * x - r.c * x.ln();
    let psi = |y: f64| r.b * y - r.a * y.ln();
    if h < phi(e.p) + psi(e.q) {
        return Err(SimError::InvalidState);
    }
    let x_target = h - psi(e.q);
    let y_target = h - phi(e.p);
    let solve = |f: &dyn Fn(f64) -> f64, target: f64, center: f64, upper: bool| -> f64 {
        let mut far = center;
        for _ in 0..2000 {
            far = if upper { far * 2.0 } else { far * 0.5 };
            if f(far) >= target {
                break;
            }
        }
        let (mut inside, mut outside) = (center, far);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if f(mid) >= target {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let x_min = solve(&phi, x_target, e.p, false);
    let x_max = solve(&phi, x_target, e.p, true);
    let y_min = solve(&psi, y_target, e.q, false);
    let y_max = solve(&psi, y_target, e.q, true);
    Ok(([x_min, x_max], [y_min, y_max]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{groups, trajectory_rng};

    fn regime(a: f64, b: f64, c: f64, d: f64) -> LVRegime {
        LVRegime::new(a, b, c, d).unwrap()
    }

    #[test]
    fn equilibrium_values() {
        assert_eq!(equilibrium(&regime(1.0, 1.0, 1.0, 1.0)), Equilibrium { p: 1.0, q: 1.0 });
        assert_eq!(equilibrium(&regime(2.0, 1.0, 3.0, 1.0)), Equilibrium { p: 3.0, q: 2.0 });
        assert_eq!(equilibrium(&regime(1.0, 2.0, 1.0, 2.0)), Equilibrium { p: 0.5, q: 0.5 });
    }

    #[test]
    fn regime_positivity_is_enforced() {
        assert_eq!(
            LVRegime::new(1.0, 0.0, 1.0, 1.0),
            Err(SimError::InvalidRegime { field: "b" })
        );
        assert_eq!(
            LVRegime::new(1.0, 1.0, -2.0, 1.0),
            Err(SimError::InvalidRegime { field: "c" })
        );
    }

    #[test]
    fn common_equilibrium_cases() {
        let base = regime(1.0, 1.0, 1.0, 1.0);
        assert!(has_common_equilibrium(&base, &regime(2.0, 2.0, 2.0, 2.0), 1e-12));
        assert!(has_common_equilibrium(&base, &regime(2.0, 2.0, 1.0, 1.0), 1e-12));
        assert!(!has_common_equilibrium(&base, &regime(1.0, 1.0, 2.0, 1.0), 1e-12));
    }

    #[test]
    fn first_integral_reference_values() {
        let r = regime(1.0, 1.0, 1.0, 1.0);
        let at = |x: f64, y: f64| {
            first_integral(&r, &LVState::from_densities(x, y, 0, 0.0).unwrap())
        };
        assert_eq!(at(1.0, 1.0), 2.0);
        let e = core::f64::consts::E;
        assert!((at(e, 1.0) - e).abs() < 1e-15);
    }

    #[test]
    fn linearize_reference_values() {
        let eq = Equilibrium { p: 1.0, q: 1.0 };
        let a0 = linearize(&regime(1.0, 1.0, 1.0, 1.0), &eq);
        assert_eq!((a0.a(), a0.b(), a0.c()), (0.0, -1.0, 1.0));
        let a1 = linearize(&regime(2.0, 2.0, 1.0, 1.0), &eq);
        assert_eq!((a1.a(), a1.b(), a1.c()), (0.0, -2.0, 1.0));
        assert!(crate::linalg2::omega(&a1).unwrap().value() > 0.0);
    }

    #[test]
    fn noncollinearity_cases() {
        let base = regime(1.0, 1.0, 1.0, 1.0);
        assert!(!check_noncollinear(&base, &regime(2.0, 2.0, 2.0, 2.0), 1e-9).unwrap());
        assert!(check_noncollinear(&base, &regime(2.0, 2.0, 1.0, 1.0), 1e-9).unwrap());
        assert!(!check_noncollinear(&base, &base, 1e-9).unwrap());
        assert_eq!(
            check_noncollinear(&base, &regime(1.0, 1.0, 2.0, 1.0), 1e-9),
            Err(SimError::NoCommonEquilibrium)
        );
    }

    #[test]
    fn flow_zero_duration_is_identity() {
        let r = regime(1.0, 1.0, 1.0, 1.0);
        let s = LVState::from_densities(1.0, 2.0, 0, 0.0).unwrap();
        assert_eq!(flow_lv(&r, &s, 0.0, &StepControl::default()).unwrap(), s);
    }

    #[test]
    fn flow_fixes_the_equilibrium() {
        // At (1, 1) the log-coordinate right-hand side is exactly zero.
        let r = regime(1.0, 1.0, 1.0, 1.0);
        let s = LVState::from_densities(1.0, 1.0, 0, 0.0).unwrap();
        let out = flow_lv(&r, &s, 10.0, &StepControl::default()).unwrap();
        assert_eq!(out.log_x, 0.0);
        assert_eq!(out.log_y, 0.0);
    }

    #[test]
    fn single_regime_orbit_closes() {
        let r = regime(1.0, 1.0, 1.0, 1.0);
        let s = LVState::from_densities(1.0, 2.0, 0, 0.0).unwrap();
        let (period, closure) = single_regime_period(&r, &s, &StepControl::default()).unwrap();
        assert!(period > 1.0 && period < 20.0, "period {period}");
        assert!(closure < 1e-6, "closure {closure}");
    }

    #[test]
    fn h_conservation_along_a_switched_run() {
        let sys = SwitchedLVSystem::with_constant_rates(
            regime(1.0, 1.0, 1.0, 1.0),
            regime(2.0, 2.0, 1.0, 1.0),
            1.0,
            1.0,
        )
        .unwrap();
        let mut rng = trajectory_rng(3, groups::LV_SIM, 0);
        let initial = LVState::from_densities(1.2, 0.8, 0, 0.0).unwrap();
        let ctrl = StepControl::default();
        let traj = simulate_lv(&sys, &initial, 50.0, &[], &mut rng, &ctrl).unwrap();
        assert!(traj.stats.max_h_drift_rate <= ctrl.tol_rel * 1.0000001);
        assert!(traj.stats.jumps > 10);
    }

    #[test]
    fn simulate_is_deterministic_and_seed_sensitive() {
        let sys = SwitchedLVSystem::with_constant_rates(
            regime(1.0, 1.0, 1.0, 1.0),
            regime(2.0, 2.0, 1.0, 1.0),
            1.0,
            1.0,
        )
        .unwrap();
        let initial = LVState::from_densities(1.2, 0.8, 0, 0.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let run = |seed: u64| {
            let mut rng = trajectory_rng(seed, groups::LV_SIM, 1);
            simulate_lv(&sys, &initial, 10.0, &grid, &mut rng, &StepControl::default()).unwrap()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(
            run(4).final_state.log_x.to_bits(),
            run(5).final_state.log_x.to_bits()
        );
    }

    #[test]
    fn identical_regimes_match_single_flow_regardless_of_jumps() {
        let r = regime(1.0, 1.0, 1.0, 1.0);
        let sys = SwitchedLVSystem::with_constant_rates(r, r, 2.0, 2.0).unwrap();
        let initial = LVState::from_densities(1.0, 2.0, 0, 0.0).unwrap();
        let mut rng = trajectory_rng(9, groups::LV_SIM, 2);
        let ctrl = StepControl::default();
        let traj = simulate_lv(&sys, &initial, 8.0, &[], &mut rng, &ctrl).unwrap();
        let plain = flow_lv(&r, &initial, 8.0, &ctrl).unwrap();
        // Same field either side of every jump; only step boundaries differ.
        assert!((traj.final_state.log_x - plain.log_x).abs() < 1e-7);
        assert!((traj.final_state.log_y - plain.log_y).abs() < 1e-7);
    }

    #[test]
    fn thinning_constant_rate_reduces_to_exponential() {
        // rate == bound accepts the first candidate, so the jump time is a
        // plain exponential draw.
        let mut rng = trajectory_rng(13, groups::LV_SIM, 3);
        let state = LVState::from_densities(1.0, 1.0, 0, 0.0).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = sample_jump_state_dependent(&|_s| 2.0, 2.0, |_| Ok(state), &mut rng).unwrap();
            sum += t;
        }
        let mean = sum / n as f64;
        let se = 0.5 / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn thinning_half_rate_doubles_the_mean() {
        let mut rng = trajectory_rng(17, groups::LV_SIM, 4);
        let state = LVState::from_densities(1.0, 1.0, 0, 0.0).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = sample_jump_state_dependent(&|_s| 1.0, 2.0, |_| Ok(state), &mut rng).unwrap();
            sum += t;
        }
        let mean = sum / n as f64;
        let se = 1.0 / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn thinning_rejects_rates_above_the_bound() {
        let mut rng = trajectory_rng(19, groups::LV_SIM, 5);
        let state = LVState::from_densities(1.0, 1.0, 0, 0.0).unwrap();
        let r = sample_jump_state_dependent(&|_s| 3.0, 2.0, |_| Ok(state), &mut rng);
        assert_eq!(r, Err(SimError::RateOutOfBounds { rate: 3.0, bound: 2.0 }));
    }

    #[test]
    fn orbit_extents_bracket_the_equilibrium() {
        let r = regime(1.0, 1.0, 1.0, 1.0);
        let s = LVState::from_densities(1.0, 2.0, 0, 0.0).unwrap();
        let h = first_integral(&r, &s);
        let ([x_min, x_max], [y_min, y_max]) = orbit_extents(&r, h).unwrap();
        assert!(x_min < 1.0 && 1.0 < x_max);
        assert!(y_min < 1.0 && 2.0 <= y_max + 1e-9);
        // The starting point (1, 2) sits at the top of the orbit: y_max = 2.
        assert!((y_max - 2.0).abs() < 1e-9, "y_max {y_max}");
    }
}
