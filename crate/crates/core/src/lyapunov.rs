//! Growth-rate estimation for the switched linear system, by two
//! independent routes.
//!
//! The Monte Carlo route time-averages `log rho` over exact trajectories.
//! The quadrature route solves the stationary angular transport system on
//! the circle (see [`crate::stationary`]) and integrates the radial rate
//! against the stationary density by the composite trapezoid rule; the
//! reported value is Richardson-extrapolated over the base grid and its two
//! dyadic refinements, while the returned densities are the plain
//! central-difference solution on the base grid so the discrete balance
//! equations hold to roundoff. The two estimates must agree.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, QuadratureError, SimError};
use crate::linalg2::omega;
use crate::rng::{groups, trajectory_rng};
use crate::stationary::solve_stationary;
use crate::switched_linear::{
    angular_velocity, flow_projective, flow_with_omega, projective_angle, sample_holding_time,
    wrap_angle, LogPolarState, LogPolarTrajectory, SwitchedLinearSystem,
};

const TWO_PI: f64 = core::f64::consts::TAU;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;
/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

/// Provenance of a growth-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    TimeAverage {
        horizon: f64,
        burn_in: f64,
        replicates: u32,
    },
    Quadrature {
        grid_size: usize,
    },
}

/// Point estimate of the growth rate with a 95% confidence interval.
/// Quadrature estimates carry zero standard error and a degenerate interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRateEstimate {
    pub lambda_hat: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: EstimateMethod,
}

impl GrowthRateEstimate {
    pub fn ci99(&self) -> (f64, f64) {
        (
            self.lambda_hat - Z99 * self.stderr,
            self.lambda_hat + Z99 * self.stderr,
        )
    }

    pub fn ci_overlaps(&self, other: &GrowthRateEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Mode densities of the angular process with respect to angle measure, on
/// equally spaced nodes of `[0, 2*pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularDensityPair {
    pub thetas: Vec<f64>,
    pub rho0: Vec<f64>,
    pub rho1: Vec<f64>,
}

impl AngularDensityPair {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn step(&self) -> f64 {
        TWO_PI / self.len() as f64
    }

    /// Trapezoid mass of `rho0 + rho1` over the circle (equals the plain node
    /// sum times the step on a periodic grid).
    pub fn total_mass(&self) -> f64 {
        (self.rho0.iter().sum::<f64>() + self.rho1.iter().sum::<f64>()) * self.step()
    }

    /// Aggregates node densities into per-bin probability masses; the grid
    /// size must be a multiple of the bin count.
    pub fn bin_masses(&self, bins: usize) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
        let n = self.len();
        if bins == 0 || n % bins != 0 {
            return Err(ExperimentError::Precondition(
                "grid size must be a positive multiple of the bin count",
            ));
        }
        let per = n / bins;
        let h = self.step();
        let fold = |rho: &[f64]| -> Vec<f64> {
            (0..bins)
                .map(|b| rho[b * per..(b + 1) * per].iter().sum::<f64>() * h)
                .collect()
        };
        Ok((fold(&self.rho0), fold(&self.rho1)))
    }

    /// Largest violation of `rho_i(theta) = rho_i(theta + pi)`, in absolute
    /// density units. Only defined on even grids.
    pub fn pi_periodicity_defect(&self) -> Option<f64> {
        let n = self.len();
        if n % 2 != 0 {
            return None;
        }
        let half = n / 2;
        let mut worst = 0.0f64;
        for rho in [&self.rho0, &self.rho1] {
            for j in 0..half {
                worst = worst.max((rho[j] - rho[j + half]).abs());
            }
        }
        Some(worst)
    }
}

/// Total variation distance between two angular laws after aggregating both
/// onto `bins` equal arcs.
pub fn total_variation_distance(
    a: &AngularDensityPair,
    b: &AngularDensityPair,
    bins: usize,
) -> Result<f64, ExperimentError> {
    let (a0, a1) = a.bin_masses(bins)?;
    let (b0, b1) = b.bin_masses(bins)?;
    let mut tv = 0.0;
    for i in 0..bins {
        tv += (a0[i] - b0[i]).abs() + (a1[i] - b1[i]).abs();
    }
    Ok(0.5 * tv)
}

/// One replicate of the time-average estimator: the slope of `log rho`
/// between the burn-in time and the horizon along an exact trajectory.
///
/// The walk lives entirely on the projective representative of the angle,
/// so replicates started from exactly antipodal directions are bit-for-bit
/// identical.
pub fn growth_replicate<R: RngCore + ?Sized>(
    system: &SwitchedLinearSystem,
    theta0: f64,
    mode0: u8,
    horizon: f64,
    burn_in: f64,
    rng: &mut R,
) -> Result<f64, SimError> {
    if !(horizon.is_finite() && burn_in >= 0.0 && horizon > burn_in) {
        return Err(SimError::InvalidEstimatorSetup);
    }
    let omegas = system.omegas()?;
    let (mut rep, _) = projective_angle(wrap_angle(theta0));
    let mut mode = mode0 & 1;
    let mut time = 0.0f64;
    let mut log_r = 0.0f64;
    let mut log_r_burn = if burn_in == 0.0 { Some(0.0) } else { None };
    loop {
        let m = system.matrix(mode);
        let w = omegas[usize::from(mode)];
        let hold = sample_holding_time(system.rate(mode), rng)?;
        let mut t_end = time + hold;
        if t_end <= time {
            t_end = f64::from_bits(time.to_bits() + 1);
        }
        if log_r_burn.is_none() && burn_in <= t_end {
            let (_, _, inc) = flow_projective(m, w, burn_in - time, rep);
            log_r_burn = Some(log_r + inc);
        }
        if t_end >= horizon {
            let (_, _, inc) = flow_projective(m, w, horizon - time, rep);
            let lb = log_r_burn.expect("burn-in within horizon");
            return Ok((log_r + inc - lb) / (horizon - burn_in));
        }
        let (new_rep, _, inc) = flow_projective(m, w, t_end - time, rep);
        rep = new_rep;
        log_r += inc;
        time = t_end;
        mode ^= 1;
    }
}

/// Replicate with the stream convention used by the batch runners:
/// replicate `index` draws from stream `(root_seed, LINEAR_MC, index)`.
pub fn growth_replicate_indexed(
    system: &SwitchedLinearSystem,
    theta0: f64,
    mode0: u8,
    horizon: f64,
    burn_in: f64,
    root_seed: u64,
    index: u32,
) -> Result<f64, SimError> {
    let mut rng = trajectory_rng(root_seed, groups::LINEAR_MC, index);
    growth_replicate(system, theta0, mode0, horizon, burn_in, &mut rng)
}

/// Mean and replicate standard error of a set of per-replicate slopes.
pub fn aggregate_replicates(
    lambdas: &[f64],
    horizon: f64,
    burn_in: f64,
) -> Result<GrowthRateEstimate, SimError> {
    let n = lambdas.len();
    if n < 2 {
        return Err(SimError::InvalidEstimatorSetup);
    }
    let mean = lambdas.iter().sum::<f64>() / n as f64;
    let var = lambdas.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1) as f64;
    let stderr = (var / n as f64).sqrt();
    Ok(GrowthRateEstimate {
        lambda_hat: mean,
        stderr,
        ci_low: mean - Z95 * stderr,
        ci_high: mean + Z95 * stderr,
        method: EstimateMethod::TimeAverage {
            horizon,
            burn_in,
            replicates: n as u32,
        },
    })
}

/// Monte Carlo estimate of the growth rate: `n_reps` independent exact
/// trajectories, each contributing `(log rho_T - log rho_burn)/(T - burn)`.
/// Deterministic in the root seed.
pub fn estimate_lambda_mc(
    system: &SwitchedLinearSystem,
    theta0: f64,
    mode0: u8,
    horizon: f64,
    burn_in: f64,
    n_reps: u32,
    root_seed: u64,
) -> Result<GrowthRateEstimate, SimError> {
    if n_reps < 2 {
        return Err(SimError::InvalidEstimatorSetup);
    }
    let mut lambdas = Vec::with_capacity(n_reps as usize);
    for rep in 0..n_reps {
        lambdas.push(growth_replicate_indexed(
            system, theta0, mode0, horizon, burn_in, root_seed, rep,
        )?);
    }
    aggregate_replicates(&lambdas, horizon, burn_in)
}

/// Quadrature estimate: stationary densities on `n_grid` nodes and the
/// growth functional integrated against them. The reported value is
/// Richardson-extrapolated over grids `n, 2n, 4n` (the trapezoid functional
/// of the central-difference solution has an even error expansion in the
/// step, so two extrapolation levels leave an O(h^6) error); the densities
/// are the base-grid solution.
pub fn estimate_lambda_quadrature(
    system: &SwitchedLinearSystem,
    n_grid: usize,
) -> Result<(AngularDensityPair, GrowthRateEstimate), QuadratureError> {
    let base = solve_stationary(system, n_grid)?;
    let mid = solve_stationary(system, 2 * n_grid)?;
    let fine = solve_stationary(system, 4 * n_grid)?;
    let first = (4.0 * mid.lambda - base.lambda) / 3.0;
    let second = (4.0 * fine.lambda - mid.lambda) / 3.0;
    let lambda = (16.0 * second - first) / 15.0;
    let densities = AngularDensityPair {
        thetas: base.thetas,
        rho0: base.rho0,
        rho1: base.rho1,
    };
    let estimate = GrowthRateEstimate {
        lambda_hat: lambda,
        stderr: 0.0,
        ci_low: lambda,
        ci_high: lambda,
        method: EstimateMethod::Quadrature { grid_size: n_grid },
    };
    Ok((densities, estimate))
}

/// Central-difference residual of the stationary balance equations at the
/// given densities: `max_j |d/dtheta[v_i rho_i] - (k_{1-i} rho_{1-i} - k_i rho_i)|`.
pub fn stationary_balance_residual(
    system: &SwitchedLinearSystem,
    densities: &AngularDensityPair,
) -> f64 {
    let n = densities.len();
    let h = densities.step();
    let mut worst = 0.0f64;
    for j in 0..n {
        let jp = (j + 1) % n;
        let jm = (j + n - 1) % n;
        for (i, (rho, other)) in [
            (&densities.rho0, &densities.rho1),
            (&densities.rho1, &densities.rho0),
        ]
        .into_iter()
        .enumerate()
        {
            let m = system.matrix(i as u8);
            let flux = (angular_velocity(m, densities.thetas[jp]) * rho[jp]
                - angular_velocity(m, densities.thetas[jm]) * rho[jm])
                / (2.0 * h);
            let reaction = system.rate(1 - i as u8) * other[j] - system.rate(i as u8) * rho[j];
            worst = worst.max((flux - reaction).abs());
        }
    }
    worst
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.18343464249564980,
    0.52553240991632899,
    0.79666647741362674,
    0.96028985649753623,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.36268378337836198,
    0.31370664587788729,
    0.22238103445337447,
    0.10122853629037626,
];

fn gauss8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..4 {
        s += GL8_WEIGHTS[i] * (f(mid - half * GL8_NODES[i]) + f(mid + half * GL8_NODES[i]));
    }
    s * half
}

/// Time-weighted angular occupancy accumulator.
///
/// Within a constant-mode segment the angle moves monotonically (the angular
/// velocity never vanishes under the spectral condition), so occupation time
/// has density `1/|v_i(theta)|` with respect to angle: a full revolution
/// deposits the fixed per-bin profile `W_i`, and the remainder arc is
/// integrated bin by bin. No sampling grid is involved.
pub struct OccupancyHistogram {
    system: SwitchedLinearSystem,
    omegas: [f64; 2],
    bins: usize,
    bin_width: f64,
    direction: [f64; 2],
    max_speed: [f64; 2],
    full_turn_bin: [Vec<f64>; 2],
    full_turn_time: [f64; 2],
    full_turns: [f64; 2],
    mass: [Vec<f64>; 2],
    total_time: f64,
}

impl OccupancyHistogram {
    pub fn new(system: &SwitchedLinearSystem, bins: usize) -> Result<Self, QuadratureError> {
        if bins == 0 {
            return Err(QuadratureError::GridTooSmall);
        }
        for mode in 0..2u8 {
            omega(system.matrix(mode)).map_err(|_| QuadratureError::VanishingAngularVelocity)?;
        }
        let bin_width = TWO_PI / bins as f64;
        let mut direction = [0.0; 2];
        let mut max_speed = [0.0f64; 2];
        let mut full_turn_bin: [Vec<f64>; 2] = [vec![0.0; bins], vec![0.0; bins]];
        let mut full_turn_time = [0.0; 2];
        for mode in 0..2usize {
            let m = *system.matrix(mode as u8);
            direction[mode] = angular_velocity(&m, 0.0).signum();
            for k in 0..1024 {
                let speed = angular_velocity(&m, TWO_PI * k as f64 / 1024.0).abs();
                max_speed[mode] = max_speed[mode].max(speed);
            }
            for b in 0..bins {
                let lo = b as f64 * bin_width;
                let hi = (b + 1) as f64 * bin_width;
                let w = gauss8(lo, hi, |t| 1.0 / angular_velocity(&m, t).abs());
                full_turn_bin[mode][b] = w;
                full_turn_time[mode] += w;
            }
        }
        Ok(Self {
            system: *system,
            omegas: system.omegas().map_err(|_| QuadratureError::VanishingAngularVelocity)?,
            bins,
            bin_width,
            direction,
            max_speed,
            full_turn_bin,
            full_turn_time,
            full_turns: [0.0; 2],
            mass: [vec![0.0; bins], vec![0.0; bins]],
            total_time: 0.0,
        })
    }

    /// Deposits the occupation of one constant-mode segment.
    pub fn add_segment(&mut self, mode: u8, theta_start: f64, duration: f64) {
        if !(duration > 0.0) {
            return;
        }
        let mode_ix = usize::from(mode & 1);
        self.total_time += duration;
        let t_full = self.full_turn_time[mode_ix];
        let turns = (duration / t_full).floor();
        self.full_turns[mode_ix] += turns;
        let rem = duration - turns * t_full;
        if rem <= 0.0 {
            return;
        }
        // End angle of the remainder arc, from the exact flow.
        let m = self.system.matrix(mode);
        let w = self.omegas[mode_ix];
        let start = LogPolarState::new(theta_start, 0.0, mode, 0.0);
        let end = flow_with_omega(m, w, rem, &start);
        let dir = self.direction[mode_ix];
        let arc = wrap_angle((end.theta - start.theta) * dir);
        // A remainder too short to sweep the wrapped arc means roundoff
        // pushed a near-zero arc across the 2*pi boundary; skip it.
        if rem < 0.5 * arc / self.max_speed[mode_ix] {
            return;
        }
        // Unwrapped interval [alpha, beta] swept by the angle.
        let (alpha, beta) = if dir > 0.0 {
            (start.theta, start.theta + arc)
        } else {
            (start.theta - arc, start.theta)
        };
        self.deposit(mode_ix, alpha, beta);
    }

    /// Integrates `1/|v|` over `[alpha, beta]` (unwrapped angles, length at
    /// most one revolution), split at global bin edges.
    fn deposit(&mut self, mode_ix: usize, alpha: f64, beta: f64) {
        if beta <= alpha {
            return;
        }
        let w = self.bin_width;
        let m = *self.system.matrix(mode_ix as u8);
        let m_start = (alpha / w).ceil() as i64;
        let m_end = (beta / w).floor() as i64;
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        if m_start > m_end {
            pieces.push((alpha, beta));
        } else {
            if alpha < m_start as f64 * w {
                pieces.push((alpha, m_start as f64 * w));
            }
            for k in m_start..m_end {
                pieces.push((k as f64 * w, (k + 1) as f64 * w));
            }
            if m_end as f64 * w < beta {
                pieces.push((m_end as f64 * w, beta));
            }
        }
        for (lo, hi) in pieces {
            if hi <= lo {
                continue;
            }
            let midpoint = 0.5 * (lo + hi);
            let bin = (wrap_angle(midpoint) / w) as usize % self.bins;
            self.mass[mode_ix][bin] += gauss8(lo, hi, |t| 1.0 / angular_velocity(&m, t).abs());
        }
    }

    pub fn total_occupation(&self) -> f64 {
        self.total_time
    }

    /// Normalized per-bin densities (bin centers as grid nodes).
    pub fn finalize(self) -> Result<AngularDensityPair, ExperimentError> {
        let mut mass0 = self.mass[0].clone();
        let mut mass1 = self.mass[1].clone();
        for b in 0..self.bins {
            mass0[b] += self.full_turns[0] * self.full_turn_bin[0][b];
            mass1[b] += self.full_turns[1] * self.full_turn_bin[1][b];
        }
        let total: f64 = mass0.iter().sum::<f64>() + mass1.iter().sum::<f64>();
        if !(total > 0.0) {
            return Err(ExperimentError::InsufficientData);
        }
        let scale = 1.0 / (total * self.bin_width);
        let thetas = (0..self.bins).map(|b| (b as f64 + 0.5) * self.bin_width).collect();
        Ok(AngularDensityPair {
            thetas,
            rho0: mass0.iter().map(|x| x * scale).collect(),
            rho1: mass1.iter().map(|x| x * scale).collect(),
        })
    }
}

/// Time-weighted histogram of `(theta mod 2*pi, mode)` over a trajectory
/// set, after discarding the burn-in prefix of each trajectory. Fails if the
/// total occupation time is below `min_occupation`.
pub fn empirical_angular_histogram(
    system: &SwitchedLinearSystem,
    trajectories: &[LogPolarTrajectory],
    bins: usize,
    burn_in: f64,
    min_occupation: f64,
) -> Result<AngularDensityPair, ExperimentError> {
    let mut hist = OccupancyHistogram::new(system, bins)
        .map_err(|_| ExperimentError::Precondition("system or bin count invalid for histogram"))?;
    let omegas = system
        .omegas()
        .map_err(|_| ExperimentError::Precondition("spectral condition violated"))?;
    for traj in trajectories {
        traj.for_each_segment(|mode, start, duration| {
            let end_time = start.time + duration;
            if end_time <= burn_in {
                return;
            }
            if start.time >= burn_in {
                hist.add_segment(mode, start.theta, duration);
            } else {
                let m = system.matrix(mode);
                let w = omegas[usize::from(mode)];
                let clipped = flow_with_omega(m, w, burn_in - start.time, start);
                hist.add_segment(mode, clipped.theta, end_time - burn_in);
            }
        });
    }
    if hist.total_occupation() < min_occupation {
        return Err(ExperimentError::InsufficientData);
    }
    hist.finalize()
}

/// Growth-rate estimates from several initial directions, sharing replicate
/// streams so that antipodal starts are bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSweep {
    pub estimates: Vec<(f64, GrowthRateEstimate)>,
    pub max_discrepancy: f64,
    pub all_cis_overlap: bool,
}

/// Runs [`estimate_lambda_mc`] from each initial angle and reports the
/// pairwise maximum discrepancy of the point estimates.
pub fn initial_direction_sweep(
    system: &SwitchedLinearSystem,
    directions: &[f64],
    mode0: u8,
    horizon: f64,
    burn_in: f64,
    n_reps: u32,
    root_seed: u64,
) -> Result<DirectionSweep, SimError> {
    if directions.len() < 2 {
        return Err(SimError::InvalidEstimatorSetup);
    }
    let mut estimates = Vec::with_capacity(directions.len());
    for &theta0 in directions {
        let est = estimate_lambda_mc(system, theta0, mode0, horizon, burn_in, n_reps, root_seed)?;
        estimates.push((theta0, est));
    }
    let mut max_discrepancy = 0.0f64;
    let mut all_cis_overlap = true;
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let (a, b) = (&estimates[i].1, &estimates[j].1);
            max_discrepancy = max_discrepancy.max((a.lambda_hat - b.lambda_hat).abs());
            all_cis_overlap &= a.ci_overlaps(b);
        }
    }
    Ok(DirectionSweep {
        estimates,
        max_discrepancy,
        all_cis_overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg2::TraceZeroMatrix2;
    use crate::switched_linear::simulate;

    fn rotation(w: f64) -> TraceZeroMatrix2 {
        TraceZeroMatrix2::new(0.0, -w, w)
    }

    fn demo_pair() -> SwitchedLinearSystem {
        SwitchedLinearSystem::new(rotation(1.0), TraceZeroMatrix2::new(0.0, -2.0, 1.0), 1.0, 1.0)
            .unwrap()
    }

    #[test]
    fn mc_estimate_is_zero_for_identical_rotations() {
        let sys = SwitchedLinearSystem::new(rotation(1.0), rotation(1.0), 1.0, 1.0).unwrap();
        let est = estimate_lambda_mc(&sys, 0.3, 0, 200.0, 20.0, 8, 5).unwrap();
        assert!(est.lambda_hat.abs() < 1e-12, "{}", est.lambda_hat);
    }

    #[test]
    fn mc_estimate_is_zero_for_rotation_pair() {
        // Two rotation generators are proportional; the norm never moves.
        let sys = SwitchedLinearSystem::new(rotation(1.0), rotation(2.0), 1.0, 1.0).unwrap();
        let est = estimate_lambda_mc(&sys, 1.0, 1, 200.0, 20.0, 8, 6).unwrap();
        assert!(est.lambda_hat.abs() < 1e-12, "{}", est.lambda_hat);
    }

    #[test]
    fn mc_setup_validation() {
        let sys = demo_pair();
        assert!(estimate_lambda_mc(&sys, 0.0, 0, 10.0, 10.0, 4, 1).is_err());
        assert!(estimate_lambda_mc(&sys, 0.0, 0, 10.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn quadrature_flat_law_for_symmetric_rotations() {
        let sys = SwitchedLinearSystem::new(rotation(1.0), rotation(1.0), 2.0, 2.0).unwrap();
        let (densities, est) = estimate_lambda_quadrature(&sys, 128).unwrap();
        let flat = 1.0 / (4.0 * core::f64::consts::PI);
        for j in 0..densities.len() {
            assert!((densities.rho0[j] - flat).abs() < 1e-14);
            assert!((densities.rho1[j] - flat).abs() < 1e-14);
        }
        assert!(est.lambda_hat.abs() < 1e-13);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn quadrature_positive_for_demo_pair_and_grid_converged() {
        let sys = demo_pair();
        let (densities, est) = estimate_lambda_quadrature(&sys, 128).unwrap();
        assert!(est.lambda_hat > 0.0);
        assert!((densities.total_mass() - 1.0).abs() < 1e-10);
        assert!(densities.pi_periodicity_defect().unwrap() < 1e-8);

        let (_, est2) = estimate_lambda_quadrature(&sys, 256).unwrap();
        assert!(
            (est.lambda_hat - est2.lambda_hat).abs() < 1e-8,
            "{} vs {}",
            est.lambda_hat,
            est2.lambda_hat
        );
    }

    #[test]
    fn quadrature_balance_residual_is_roundoff() {
        let sys = demo_pair();
        let (densities, _) = estimate_lambda_quadrature(&sys, 128).unwrap();
        assert!(stationary_balance_residual(&sys, &densities) < 1e-10);
    }

    #[test]
    fn mc_agrees_with_quadrature_on_demo_pair() {
        let sys = demo_pair();
        let (_, quad) = estimate_lambda_quadrature(&sys, 128).unwrap();
        let mc = estimate_lambda_mc(&sys, 0.0, 0, 2000.0, 200.0, 16, 7).unwrap();
        assert!(
            (mc.lambda_hat - quad.lambda_hat).abs() < 3.0 * mc.stderr,
            "mc {} +- {} vs quad {}",
            mc.lambda_hat,
            mc.stderr,
            quad.lambda_hat
        );
    }

    #[test]
    fn histogram_matches_quadrature_on_demo_pair() {
        let sys = demo_pair();
        let horizon = 4000.0;
        let mut trajectories = Vec::new();
        for i in 0..4 {
            let mut rng = trajectory_rng(11, groups::HISTOGRAM, i);
            let init = LogPolarState::new(0.7, 0.0, 0, 0.0);
            trajectories.push(simulate(&sys, &init, horizon, &[], &mut rng).unwrap());
        }
        let hist = empirical_angular_histogram(&sys, &trajectories, 64, 100.0, 1000.0).unwrap();
        assert!((hist.total_mass() - 1.0).abs() < 1e-9);
        let (quad, _) = estimate_lambda_quadrature(&sys, 256).unwrap();
        let tv = total_variation_distance(&hist, &quad, 64).unwrap();
        assert!(tv < 0.05, "tv = {tv}");
    }

    #[test]
    fn histogram_rejects_empty_input() {
        let sys = demo_pair();
        assert_eq!(
            empirical_angular_histogram(&sys, &[], 64, 0.0, 1.0).unwrap_err(),
            ExperimentError::InsufficientData
        );
    }

    #[test]
    fn sweep_antipodal_estimates_are_bit_identical() {
        let sys = demo_pair();
        // 0 and pi are exactly antipodal as floats.
        let sweep = initial_direction_sweep(
            &sys,
            &[0.0, core::f64::consts::PI],
            0,
            300.0,
            30.0,
            6,
            9,
        )
        .unwrap();
        let a = sweep.estimates[0].1;
        let b = sweep.estimates[1].1;
        assert_eq!(a.lambda_hat.to_bits(), b.lambda_hat.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(sweep.max_discrepancy, 0.0);
        assert!(sweep.all_cis_overlap);
    }

    #[test]
    fn sweep_needs_two_directions() {
        let sys = demo_pair();
        assert!(initial_direction_sweep(&sys, &[0.0], 0, 10.0, 1.0, 4, 1).is_err());
    }
}
