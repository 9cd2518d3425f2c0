//! Monte Carlo experiment kernels and their deterministic aggregation.
//!
//! Every kernel is a pure function of `(system, params, root_seed, index)`,
//! so the batch drivers here (sequential) and any parallel executor built on
//! top of them produce identical aggregates: results are folded in
//! trajectory-index order, never in completion order.

use alloc::vec::Vec;

use num_traits::Float;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, SimError};
use crate::lotka_volterra::{
    check_noncollinear, drive_switched_lv, DriveOutcome, Equilibrium, ExitBall, LVRegime, LVState,
    LvObserver, SwitchedLVSystem,
};
use crate::ode::{DenseStep, StepControl};
use crate::rng::{groups, trajectory_rng, unit_open};

const TWO_PI: f64 = core::f64::consts::TAU;

/// Reproducible batch description: trajectory `i` draws from the stream
/// derived injectively from `(root_seed, i)`, so aggregates are independent
/// of worker count and scheduling order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub root_seed: u64,
    pub n_trajectories: u32,
    pub workers: usize,
}

/// Runs `n` indexed kernels sequentially, aborting on the first failure
/// (reported with its trajectory index and the number of completed runs).
pub fn run_batch_seq<T>(
    n: u32,
    f: impl Fn(u32) -> Result<T, SimError>,
) -> Result<Vec<T>, ExperimentError> {
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        out.push(f(i).map_err(|source| ExperimentError::Trajectory { index: i, source })?);
    }
    Ok(out)
}

/// Checks that the system has constant rates, a common equilibrium, and
/// non-collinear vector fields, returning the equilibrium.
pub fn require_noncollinear_case_one(
    system: &SwitchedLVSystem,
    tol: f64,
) -> Result<Equilibrium, ExperimentError> {
    if system.constant_rates().is_none() {
        return Err(ExperimentError::Precondition(
            "experiment requires constant switching rates",
        ));
    }
    let eq = system.common_equilibrium(tol).ok_or(ExperimentError::Precondition(
        "regimes do not share a common equilibrium (not a Case I system)",
    ))?;
    match check_noncollinear(system.regime(0), system.regime(1), tol) {
        Ok(true) => Ok(eq),
        Ok(false) => Err(ExperimentError::Precondition(
            "vector fields are collinear; the exit-time bound does not apply",
        )),
        Err(_) => Err(ExperimentError::Precondition(
            "regimes do not share a common equilibrium (not a Case I system)",
        )),
    }
}

// ---------------------------------------------------------------------------
// Exit times
// ---------------------------------------------------------------------------

/// Exit-time experiment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitParams {
    /// Ball radius around the common equilibrium.
    pub epsilon: f64,
    /// Initial distance from the equilibrium.
    pub start_distance: f64,
    pub n: u32,
    /// Censoring cap on the exit time.
    pub horizon_cap: f64,
    /// Event localization tolerance, relative to epsilon.
    pub loc_tol_rel: f64,
    /// Relative tolerance for the common-equilibrium check.
    pub eq_tol: f64,
    pub step: StepControl,
}

impl Default for ExitParams {
    fn default() -> Self {
        ExitParams {
            epsilon: 0.1,
            start_distance: 1e-3,
            n: 1000,
            horizon_cap: 1e3,
            loc_tol_rel: 1e-6,
            eq_tol: 1e-9,
            step: StepControl::default(),
        }
    }
}

/// One exit observation: the (possibly censored) exit time and, for exits,
/// the overshoot of the located crossing beyond the ball radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub tau: f64,
    pub censored: bool,
    pub gap: f64,
}

/// One entry of the exponential-moment diagnostic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BGridEntry {
    pub b: f64,
    pub mean_b_tau: f64,
    /// Share of the empirical mean carried by its largest single term; a
    /// mean dominated by one trajectory has not stabilized.
    pub max_term_share: f64,
    pub diverged: bool,
}

/// Aggregated exit-time statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeReport {
    pub epsilon: f64,
    pub start_distance: f64,
    pub n: u32,
    pub censored: u32,
    pub taus: Vec<f64>,
    pub mean_tau: f64,
    pub median_tau: f64,
    /// Slope of the log survival curve on the fit window (positive rate).
    pub fitted_tail_rate: f64,
    pub fit_r_squared: f64,
    pub fit_points: usize,
    /// False when censoring exceeds one half or the window is too thin.
    pub fit_valid: bool,
    pub b_grid: Vec<BGridEntry>,
    /// Largest localization overshoot among exits, in units of epsilon.
    pub max_gap_rel: f64,
}

/// Single exit-time trajectory: uniform random initial direction at the
/// start distance, initial mode drawn from the stationary law of the chain.
pub fn exit_time_single(
    system: &SwitchedLVSystem,
    eq: &Equilibrium,
    params: &ExitParams,
    root_seed: u64,
    group: u32,
    index: u32,
) -> Result<ExitSample, SimError> {
    let (k0, k1) = system.constant_rates().ok_or(SimError::NonpositiveRate)?;
    let mut rng = trajectory_rng(root_seed, group, index);
    let phi = TWO_PI * unit_open(&mut rng);
    let mode = if unit_open(&mut rng) < k1 / (k0 + k1) { 0 } else { 1 };
    let (s, c) = phi.sin_cos();
    let initial = LVState::from_densities(
        eq.p + params.start_distance * c,
        eq.q + params.start_distance * s,
        mode,
        0.0,
    )?;
    let ball = ExitBall {
        center: [eq.p, eq.q],
        radius: params.epsilon,
        loc_tol: params.loc_tol_rel * params.epsilon,
    };
    let mut obs = crate::lotka_volterra::NullObserver;
    let (outcome, _) = drive_switched_lv(
        system,
        &initial,
        params.horizon_cap,
        &mut rng,
        &params.step,
        Some(&ball),
        &mut obs,
    )?;
    Ok(match outcome {
        DriveOutcome::Exited { time, state } => {
            let dx = state.x() - eq.p;
            let dy = state.y() - eq.q;
            ExitSample {
                tau: time,
                censored: false,
                gap: dx.hypot(dy) - params.epsilon,
            }
        }
        DriveOutcome::Horizon(_) => ExitSample {
            tau: params.horizon_cap,
            censored: true,
            gap: 0.0,
        },
    })
}

/// Product-limit (Kaplan-Meier) survival curve over event times; with zero
/// censoring it reduces to the empirical survival function.
pub fn product_limit(samples: &[ExitSample]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&ExitSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(a.censored.cmp(&b.censored)));
    let mut at_risk = sorted.len() as f64;
    let mut s = 1.0;
    let mut curve = Vec::new();
    for e in sorted {
        if !e.censored {
            s *= (at_risk - 1.0) / at_risk;
            curve.push((e.tau, s));
        }
        at_risk -= 1.0;
    }
    curve
}

/// Least-squares fit of `ln S` against `t` on the tail window: event times
/// beyond the median with survival at least `s_floor` (the product-limit
/// estimate has controlled variance there). Returns `(rate, r_squared, n)`.
fn fit_log_survival_tail(
    curve: &[(f64, f64)],
    median: f64,
    s_floor: f64,
) -> Option<(f64, f64, usize)> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(t, s)| *t > median && *s >= s_floor && *s > 0.0)
        .map(|(t, s)| (*t, s.ln()))
        .collect();
    let n = pts.len();
    if n < 10 {
        return None;
    }
    let nf = n as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_l = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (t, l) in &pts {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (l - mean_l);
        syy += (l - mean_l) * (l - mean_l);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    Some((-slope, r2, n))
}

/// Folds exit samples into the report: survival tail fit plus the
/// exponential-moment grid `b = exp(f * rate)` for fractions
/// `f in {0.25, 0.5, 0.75, 1, 1.25}` of the fitted rate.
pub fn aggregate_exit_report(params: &ExitParams, samples: &[ExitSample]) -> ExitTimeReport {
    let n = samples.len() as u32;
    let censored = samples.iter().filter(|s| s.censored).count() as u32;
    let taus: Vec<f64> = samples.iter().map(|s| s.tau).collect();
    let mean_tau = if taus.is_empty() {
        0.0
    } else {
        taus.iter().sum::<f64>() / taus.len() as f64
    };
    let median_tau = quantile(&taus, 0.5);
    let max_gap_rel = samples
        .iter()
        .filter(|s| !s.censored)
        .fold(0.0f64, |m, s| m.max(s.gap / params.epsilon));

    let curve = product_limit(samples);
    let fit = fit_log_survival_tail(&curve, median_tau, 0.05);
    let censoring_ok = f64::from(censored) <= 0.5 * f64::from(n.max(1));
    let (fitted_tail_rate, fit_r_squared, fit_points) = fit.unwrap_or((0.0, 0.0, 0));
    let fit_valid = censoring_ok && fit.is_some() && fitted_tail_rate > 0.0;

    let mut b_grid = Vec::new();
    if fit_valid {
        for frac in [0.25, 0.5, 0.75, 1.0, 1.25] {
            let b: f64 = (frac * fitted_tail_rate).exp();
            let mut sum = 0.0f64;
            let mut largest = 0.0f64;
            for s in samples {
                let term = b.powf(s.tau);
                sum += term;
                largest = largest.max(term);
            }
            let mean = sum / taus.len().max(1) as f64;
            let share = if sum > 0.0 { largest / sum } else { 1.0 };
            b_grid.push(BGridEntry {
                b,
                mean_b_tau: mean,
                max_term_share: share,
                diverged: !mean.is_finite() || share > 0.5,
            });
        }
    }

    ExitTimeReport {
        epsilon: params.epsilon,
        start_distance: params.start_distance,
        n,
        censored,
        taus,
        mean_tau,
        median_tau,
        fitted_tail_rate,
        fit_r_squared,
        fit_points,
        fit_valid,
        b_grid,
        max_gap_rel,
    }
}

fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Sequential exit-time experiment. Requires 0 < start_distance < min(p, q)
/// on a non-collinear Case I system; starts at or beyond the radius exit
/// immediately with tau = 0.
pub fn exit_time_mc(
    system: &SwitchedLVSystem,
    params: &ExitParams,
    root_seed: u64,
) -> Result<ExitTimeReport, ExperimentError> {
    let eq = validate_exit_setup(system, params)?;
    let samples = run_batch_seq(params.n, |i| {
        exit_time_single(system, &eq, params, root_seed, groups::EXIT, i)
    })?;
    Ok(aggregate_exit_report(params, &samples))
}

/// Shared validation for exit experiments; returns the common equilibrium.
pub fn validate_exit_setup(
    system: &SwitchedLVSystem,
    params: &ExitParams,
) -> Result<Equilibrium, ExperimentError> {
    let eq = require_noncollinear_case_one(system, params.eq_tol)?;
    if !(params.epsilon > 0.0 && params.start_distance > 0.0) {
        return Err(ExperimentError::Precondition(
            "epsilon and start distance must be positive",
        ));
    }
    if params.start_distance >= eq.p.min(eq.q) {
        return Err(ExperimentError::Precondition(
            "start distance must stay inside the positive quadrant around the equilibrium",
        ));
    }
    Ok(eq)
}

/// Exit statistics across a list of start distances (each with its own
/// stream group, so distances can be re-run independently).
pub fn start_distance_sweep(
    system: &SwitchedLVSystem,
    base: &ExitParams,
    distances: &[f64],
    root_seed: u64,
) -> Result<Vec<(f64, ExitTimeReport)>, ExperimentError> {
    if distances.is_empty() {
        return Err(ExperimentError::Precondition("empty distance list"));
    }
    if distances.iter().any(|&d| !(d > 0.0 && d < base.epsilon)) {
        return Err(ExperimentError::Precondition(
            "sweep distances must lie strictly between 0 and epsilon",
        ));
    }
    let mut out = Vec::with_capacity(distances.len());
    for (di, &distance) in distances.iter().enumerate() {
        let params = ExitParams {
            start_distance: distance,
            ..*base
        };
        let eq = validate_exit_setup(system, &params)?;
        let group = groups::SWEEP_BASE + di as u32;
        let samples = run_batch_seq(params.n, |i| {
            exit_time_single(system, &eq, &params, root_seed, group, i)
        })?;
        out.push((distance, aggregate_exit_report(&params, &samples)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Oscillation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationParams {
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub step: StepControl,
}

/// Running extrema of both densities, snapshot at each checkpoint. Extrema
/// are tracked at accepted-step resolution (plus every checkpoint
/// evaluation), so they bound any sampled value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub checkpoints: Vec<f64>,
    pub max_x: Vec<f64>,
    pub min_x: Vec<f64>,
    pub max_y: Vec<f64>,
    pub min_y: Vec<f64>,
    pub decades_spanned_x: f64,
    pub decades_spanned_y: f64,
}

struct ExtremaTracker {
    checkpoints: Vec<f64>,
    next: usize,
    max_u: f64,
    min_u: f64,
    max_v: f64,
    min_v: f64,
    snaps: Vec<[f64; 4]>,
}

impl ExtremaTracker {
    fn update(&mut self, y: [f64; 2]) {
        self.max_u = self.max_u.max(y[0]);
        self.min_u = self.min_u.min(y[0]);
        self.max_v = self.max_v.max(y[1]);
        self.min_v = self.min_v.min(y[1]);
    }
}

impl LvObserver for ExtremaTracker {
    fn on_step(&mut self, dense: &DenseStep, _mode: u8, _regime: &LVRegime) {
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] <= dense.t1 {
            let y = dense.eval(self.checkpoints[self.next]);
            self.update(y);
            self.snaps.push([self.max_u, self.min_u, self.max_v, self.min_v]);
            self.next += 1;
        }
        self.update(dense.y1);
    }
}

/// One oscillation trajectory: running max/min of `x` and `y` with
/// checkpoint snapshots and the total decades spanned.
pub fn oscillation_run<R: RngCore + ?Sized>(
    system: &SwitchedLVSystem,
    initial: &LVState,
    params: &OscillationParams,
    rng: &mut R,
) -> Result<OscillationReport, SimError> {
    crate::switched_linear::check_grid(&params.checkpoints, params.horizon)?;
    let mut tracker = ExtremaTracker {
        checkpoints: params.checkpoints.clone(),
        next: 0,
        max_u: initial.log_x,
        min_u: initial.log_x,
        max_v: initial.log_y,
        min_v: initial.log_y,
        snaps: Vec::with_capacity(params.checkpoints.len()),
    };
    drive_switched_lv(
        system,
        initial,
        params.horizon,
        rng,
        &params.step,
        None,
        &mut tracker,
    )?;
    // Checkpoints exactly at the horizon are flushed by the last step; any
    // remaining ones (possible only for horizon zero) snapshot final extrema.
    while tracker.next < tracker.checkpoints.len() {
        tracker.snaps.push([tracker.max_u, tracker.min_u, tracker.max_v, tracker.min_v]);
        tracker.next += 1;
    }
    let ln10 = core::f64::consts::LN_10;
    Ok(OscillationReport {
        checkpoints: params.checkpoints.clone(),
        max_x: tracker.snaps.iter().map(|s| s[0].exp()).collect(),
        min_x: tracker.snaps.iter().map(|s| s[1].exp()).collect(),
        max_y: tracker.snaps.iter().map(|s| s[2].exp()).collect(),
        min_y: tracker.snaps.iter().map(|s| s[3].exp()).collect(),
        decades_spanned_x: (tracker.max_u - tracker.min_u) / ln10,
        decades_spanned_y: (tracker.max_v - tracker.min_v) / ln10,
    })
}

/// Indexed oscillation run following the batch stream convention.
pub fn oscillation_run_indexed(
    system: &SwitchedLVSystem,
    initial: &LVState,
    params: &OscillationParams,
    root_seed: u64,
    index: u32,
) -> Result<OscillationReport, SimError> {
    let mut rng = trajectory_rng(root_seed, groups::OSCILLATION, index);
    oscillation_run(system, initial, params, &mut rng)
}

// ---------------------------------------------------------------------------
// Transience diagnostic
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceParams {
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub n: u32,
    pub step: StepControl,
}

/// Evidence record for the transience conjecture: the diagnostic
/// `V = x + y + 1/x + 1/y` per checkpoint, carried as `ln V` because the
/// densities of a strongly oscillating run span thousands of decades and V
/// itself saturates an f64. Exploratory output, not a verification; the
/// conjecture is open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceReport {
    pub checkpoints: Vec<f64>,
    /// Median of ln V across trajectories at each checkpoint.
    pub median_log_v: Vec<f64>,
    /// Terminal ln V of each trajectory, in trajectory-index order.
    pub terminal_log_v: Vec<f64>,
    pub median_terminal_log_v: f64,
    /// Fraction of trajectories whose ln V trends upward over the last
    /// half of the horizon.
    pub upward_fraction: f64,
}

/// `ln(x + y + 1/x + 1/y)` from log densities, by log-sum-exp.
fn log_v_diagnostic(y: [f64; 2]) -> f64 {
    let terms = [y[0], -y[0], y[1], -y[1]];
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

struct VTracker {
    checkpoints: Vec<f64>,
    next: usize,
    values: Vec<f64>,
}

impl LvObserver for VTracker {
    fn on_step(&mut self, dense: &DenseStep, _mode: u8, _regime: &LVRegime) {
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] <= dense.t1 {
            self.values.push(log_v_diagnostic(dense.eval(self.checkpoints[self.next])));
            self.next += 1;
        }
    }
}

/// ln V series of one trajectory plus its terminal value.
pub fn transience_single(
    system: &SwitchedLVSystem,
    initial: &LVState,
    params: &TransienceParams,
    root_seed: u64,
    index: u32,
) -> Result<(Vec<f64>, f64), SimError> {
    crate::switched_linear::check_grid(&params.checkpoints, params.horizon)?;
    let mut rng = trajectory_rng(root_seed, groups::TRANSIENCE, index);
    let mut tracker = VTracker {
        checkpoints: params.checkpoints.clone(),
        next: 0,
        values: Vec::with_capacity(params.checkpoints.len()),
    };
    let (outcome, _) = drive_switched_lv(
        system,
        initial,
        params.horizon,
        &mut rng,
        &params.step,
        None,
        &mut tracker,
    )?;
    let final_state = match outcome {
        DriveOutcome::Horizon(s) | DriveOutcome::Exited { state: s, .. } => s,
    };
    while tracker.next < tracker.checkpoints.len() {
        tracker.values.push(log_v_diagnostic([final_state.log_x, final_state.log_y]));
        tracker.next += 1;
    }
    Ok((tracker.values, log_v_diagnostic([final_state.log_x, final_state.log_y])))
}

/// Runs `n` transience trajectories and folds the per-checkpoint medians,
/// terminal values, and the upward-trend fraction.
pub fn transience_mc(
    system: &SwitchedLVSystem,
    initial: &LVState,
    params: &TransienceParams,
    root_seed: u64,
) -> Result<TransienceReport, ExperimentError> {
    if params.n == 0 {
        return Ok(TransienceReport {
            checkpoints: params.checkpoints.clone(),
            median_log_v: Vec::new(),
            terminal_log_v: Vec::new(),
            median_terminal_log_v: 0.0,
            upward_fraction: 0.0,
        });
    }
    let series = run_batch_seq(params.n, |i| {
        transience_single(system, initial, params, root_seed, i)
    })?;
    Ok(aggregate_transience(params, &series))
}

/// Deterministic fold of per-trajectory V series.
pub fn aggregate_transience(
    params: &TransienceParams,
    series: &[(Vec<f64>, f64)],
) -> TransienceReport {
    let ncp = params.checkpoints.len();
    let mut median_log_v = Vec::with_capacity(ncp);
    for cp in 0..ncp {
        let column: Vec<f64> = series.iter().map(|(vs, _)| vs[cp]).collect();
        median_log_v.push(quantile(&column, 0.5));
    }
    let terminal_log_v: Vec<f64> = series.iter().map(|(_, t)| *t).collect();
    let median_terminal_log_v = quantile(&terminal_log_v, 0.5);
    let half = params.horizon * 0.5;
    let mut upward = 0usize;
    for (vs, _) in series {
        let pts: Vec<(f64, f64)> = params
            .checkpoints
            .iter()
            .zip(vs)
            .filter(|(t, _)| **t >= half)
            .map(|(t, v)| (*t, *v))
            .collect();
        if slope(&pts) > 0.0 {
            upward += 1;
        }
    }
    TransienceReport {
        checkpoints: params.checkpoints.clone(),
        median_log_v,
        terminal_log_v,
        median_terminal_log_v,
        upward_fraction: upward as f64 / series.len().max(1) as f64,
    }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, v) in pts {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (v - mean_v);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
