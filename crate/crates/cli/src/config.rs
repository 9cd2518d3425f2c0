//! Strict run configuration: unknown keys are fatal, the schema is
//! versioned, and the fully resolved config is echoed into every output.

use std::path::Path;

use pdmp_core::linalg2::TraceZeroMatrix2;
use pdmp_core::lotka_volterra::{LVRegime, SwitchedLVSystem};
use pdmp_core::switched_linear::SwitchedLinearSystem;
use serde::{Deserialize, Serialize};

use crate::{defaults, AppError, CommandName};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub system: SystemSpec,
    pub experiment: ExperimentSpec,
}

impl RunConfig {
    /// Applies the seed override and derived defaults, and checks that the
    /// experiment section matches the subcommand.
    pub fn resolve(&mut self, seed_flag: Option<u64>, command: CommandName) -> Result<(), AppError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(AppError::usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.seed = Some(seed_flag.or(self.seed).unwrap_or(0));
        let expected = self.experiment.command_name();
        if expected != command.as_str() {
            return Err(AppError::usage(format!(
                "config experiment `{expected}` does not match subcommand `{}`",
                command.as_str()
            )));
        }
        self.system.validate()?;
        if let ExperimentSpec::Lyapunov(p) = &mut self.experiment {
            if p.burn_in.is_none() {
                p.burn_in = Some(p.horizon * 0.1);
            }
        }
        Ok(())
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

pub fn load(path: &Path) -> Result<RunConfig, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::usage(format!("invalid config {}: {e}", path.display())))
}

/// System under study: a trace-zero matrix pair or a Lotka-Volterra pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SystemSpec {
    Linear(LinearSpec),
    Lv(LvSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    /// Row-major [a, b, c, -a]; the trace is validated on input.
    pub a0: TraceZeroMatrix2,
    pub a1: TraceZeroMatrix2,
    pub k0: f64,
    pub k1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RegimeSpec {
    pub fn to_regime(&self) -> Result<LVRegime, AppError> {
        LVRegime::new(self.a, self.b, self.c, self.d).map_err(AppError::usage)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvSpec {
    pub regime0: RegimeSpec,
    pub regime1: RegimeSpec,
    pub k0: f64,
    pub k1: f64,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), AppError> {
        match self {
            SystemSpec::Linear(spec) => {
                SwitchedLinearSystem::new(spec.a0, spec.a1, spec.k0, spec.k1)
                    .map_err(AppError::usage)?;
            }
            SystemSpec::Lv(spec) => {
                spec.to_lv_system()?;
            }
        }
        Ok(())
    }

    /// The switched linear system: directly for linear specs, through the
    /// Jacobians at the common equilibrium for LV specs.
    pub fn to_linear_system(&self) -> Result<SwitchedLinearSystem, AppError> {
        match self {
            SystemSpec::Linear(spec) => {
                SwitchedLinearSystem::new(spec.a0, spec.a1, spec.k0, spec.k1)
                    .map_err(AppError::usage)
            }
            SystemSpec::Lv(spec) => {
                let sys = spec.to_lv_system()?;
                let eq = sys.common_equilibrium(defaults::eq_tol()).ok_or_else(|| {
                    AppError::usage(
                        "LV regimes do not share a common equilibrium; cannot linearize",
                    )
                })?;
                let a0 = pdmp_core::lotka_volterra::linearize(sys.regime(0), &eq);
                let a1 = pdmp_core::lotka_volterra::linearize(sys.regime(1), &eq);
                SwitchedLinearSystem::new(a0, a1, spec.k0, spec.k1).map_err(AppError::usage)
            }
        }
    }

    pub fn as_lv(&self) -> Result<&LvSpec, AppError> {
        match self {
            SystemSpec::Lv(spec) => Ok(spec),
            SystemSpec::Linear(_) => Err(AppError::usage(
                "this experiment needs an LV system (config key `system.lv`)",
            )),
        }
    }
}

impl LvSpec {
    pub fn to_lv_system(&self) -> Result<SwitchedLVSystem, AppError> {
        SwitchedLVSystem::with_constant_rates(
            self.regime0.to_regime()?,
            self.regime1.to_regime()?,
            self.k0,
            self.k1,
        )
        .map_err(AppError::usage)
    }
}

/// Experiment selector; the variant must match the subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ExperimentSpec {
    Check(CheckConfig),
    Lyapunov(LyapunovConfig),
    Density(DensityConfig),
    Simulate(SimulateConfig),
    ExitTimes(ExitTimesConfig),
    Oscillation(OscillationConfig),
    Transience(TransienceConfig),
    Sweep(SweepConfig),
}

impl ExperimentSpec {
    pub fn command_name(&self) -> &'static str {
        match self {
            ExperimentSpec::Check(_) => "check",
            ExperimentSpec::Lyapunov(_) => "lyapunov",
            ExperimentSpec::Density(_) => "density",
            ExperimentSpec::Simulate(_) => "simulate",
            ExperimentSpec::ExitTimes(_) => "exit-times",
            ExperimentSpec::Oscillation(_) => "oscillation",
            ExperimentSpec::Transience(_) => "transience",
            ExperimentSpec::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default = "defaults::lyapunov_horizon")]
    pub horizon: f64,
    /// Defaults to a tenth of the horizon.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default = "defaults::replicates")]
    pub replicates: u32,
    #[serde(default = "defaults::n_grid")]
    pub n_grid: usize,
    #[serde(default = "defaults::theta0")]
    pub theta0: f64,
    #[serde(default = "defaults::mode0")]
    pub mode0: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    #[serde(default = "defaults::n_grid")]
    pub n_grid: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialSpec {
    /// Initial condition for linear systems.
    LogPolar { theta: f64, log_r: f64 },
    /// Initial densities for LV systems.
    Densities { x: f64, y: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "defaults::simulate_horizon")]
    pub horizon: f64,
    /// Number of grid intervals; horizon 0 emits a header-only trajectory.
    #[serde(default = "defaults::samples")]
    pub samples: u32,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default = "defaults::mode0")]
    pub mode0: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitTimesConfig {
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::start_distance")]
    pub start_distance: f64,
    #[serde(default = "defaults::exit_n")]
    pub n: u32,
    #[serde(default = "defaults::horizon_cap")]
    pub horizon_cap: f64,
    /// Emit per-trajectory CSV detail.
    #[serde(default = "defaults::false_flag")]
    pub per_trajectory: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationConfig {
    #[serde(default = "defaults::experiment_horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::n_runs")]
    pub n_runs: u32,
    #[serde(default = "defaults::samples")]
    pub checkpoints: u32,
    /// Decades of density range each coordinate must span for a run to
    /// count; pilot-calibrated, recorded in the summary.
    #[serde(default = "defaults::decades_threshold")]
    pub decades_threshold: f64,
    #[serde(default = "defaults::min_fraction")]
    pub min_fraction: f64,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default = "defaults::mode0")]
    pub mode0: u8,
    #[serde(default = "defaults::false_flag")]
    pub per_trajectory: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransienceConfig {
    #[serde(default = "defaults::experiment_horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::n_runs")]
    pub n: u32,
    #[serde(default = "defaults::samples")]
    pub checkpoints: u32,
    /// Early reference time for the growth-ratio evidence.
    #[serde(default = "defaults::reference_time")]
    pub reference_time: f64,
    #[serde(default = "defaults::ratio_threshold")]
    pub ratio_threshold: f64,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default = "defaults::mode0")]
    pub mode0: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SweepConfig {
    /// Quadrature growth rate over a list of symmetric switching rates.
    Rates {
        values: Vec<f64>,
        #[serde(default = "defaults::n_grid")]
        n_grid: usize,
    },
    /// Exit statistics over a list of start distances.
    StartDistance {
        distances: Vec<f64>,
        #[serde(default = "defaults::epsilon")]
        epsilon: f64,
        #[serde(default = "defaults::exit_n")]
        n: u32,
        #[serde(default = "defaults::horizon_cap")]
        horizon_cap: f64,
    },
}
