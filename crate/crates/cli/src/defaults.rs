//! Every default in one place. The resolved values are echoed into each
//! output's metadata block, so every run is reproducible from its own
//! artifacts.
//!
//! | Parameter                | Default | Used by                         |
//! |--------------------------|---------|---------------------------------|
//! | `horizon` (lyapunov)     | 1e4     | lyapunov                        |
//! | `burn_in`                | horizon/10 | lyapunov, histogram          |
//! | `replicates`             | 64      | lyapunov                        |
//! | `n_grid`                 | 512     | lyapunov, density, sweep        |
//! | `theta0` / `mode0`       | 0.0 / 0 | lyapunov, simulate (linear)     |
//! | `horizon` (simulate)     | 100     | simulate                        |
//! | `samples`                | 256     | simulate, oscillation, transience |
//! | `epsilon`                | 0.1     | exit-times, sweep               |
//! | `start_distance`         | 1e-3    | exit-times                      |
//! | `n` (exit trajectories)  | 1000    | exit-times                      |
//! | `horizon_cap`            | 1e3     | exit-times, sweep               |
//! | `loc_tol_rel`            | 1e-6    | exit-times (event localization) |
//! | `horizon` (oscillation)  | 1e4     | oscillation, transience         |
//! | `n_runs`                 | 100     | oscillation, transience         |
//! | `decades_threshold`      | 2.0     | oscillation (pilot-calibrated)  |
//! | `min_fraction`           | 0.95    | oscillation                     |
//! | `reference_time`         | 1e2     | transience evidence ratio       |
//! | `ratio_threshold`        | 10.0    | transience evidence ratio       |
//! | `tol_h_rel`              | 1e-8    | LV integrator drift per unit time |
//! | `eq_tol`                 | 1e-9    | common-equilibrium comparisons  |
//! | proportionality tol      | 1e-9    | check (scale-invariant metric)  |
//! | agreement width          | 3 sigma | lyapunov MC vs quadrature       |

pub fn lyapunov_horizon() -> f64 {
    1e4
}

pub fn replicates() -> u32 {
    64
}

pub fn n_grid() -> usize {
    512
}

pub fn theta0() -> f64 {
    0.0
}

pub fn mode0() -> u8 {
    0
}

pub fn simulate_horizon() -> f64 {
    100.0
}

pub fn samples() -> u32 {
    256
}

pub fn epsilon() -> f64 {
    0.1
}

pub fn start_distance() -> f64 {
    1e-3
}

pub fn exit_n() -> u32 {
    1000
}

pub fn horizon_cap() -> f64 {
    1e3
}

pub fn experiment_horizon() -> f64 {
    1e4
}

pub fn n_runs() -> u32 {
    100
}

pub fn decades_threshold() -> f64 {
    2.0
}

pub fn min_fraction() -> f64 {
    0.95
}

pub fn reference_time() -> f64 {
    1e2
}

pub fn ratio_threshold() -> f64 {
    10.0
}

pub fn eq_tol() -> f64 {
    1e-9
}

pub fn false_flag() -> bool {
    false
}

/// Agreement window between the two growth-rate estimators, in replicate
/// standard errors.
pub const AGREEMENT_SIGMA: f64 = 3.0;
