//! Reproducible sweeps behind the three result tables: channel-estimation
//! MSE against pilot power, data MSE against data power, and the
//! distribution of high-SNR data-MSE floors over channel realizations.
//!
//! Every run is a pure function of its spec. Sweeps hold one channel
//! realization (index 0 of the base seed) fixed across all powers and
//! evaluate operator 1. Noise for sweep point `i` comes from streams keyed
//! by `i`, so all modes at one point see identical noise.

mod csv_io;
mod settings;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use csv_io::{read_csv, write_csv, write_csv_to, CsvRow};
pub use settings::{CdfSettings, RunConfig, SweepSettings};

use crate::config::ConfigPair;
use crate::data::{high_pilot_snr_limit, DataPhaseResult, Mode};
use crate::error::{Error, Result};
use crate::model::{draw_channels, Operator, SystemParams};
use crate::pilot::{bias_closed_form, cov_trace_closed_form, empirical_mse, PilotNoise};

/// Default trials per sweep point.
pub const DEFAULT_TRIALS: usize = 10_000;

/// An empirical column may sit this many standard errors from its oracle.
pub const ORACLE_SIGMAS: f64 = 5.0;

/// The operator whose link every sweep evaluates.
pub const SWEEP_OPERATOR: Operator = Operator::First;

/// `-30, -25, ..., 40` dBm.
pub fn default_data_powers() -> Vec<f64> {
    power_grid(-30, 40)
}

/// `-30, -25, ..., 60` dBm; the pilot sweep extends past 40 dBm so the
/// identical-sequence floor is clearly visible.
pub fn default_pilot_powers() -> Vec<f64> {
    power_grid(-30, 60)
}

fn power_grid(from: i32, to: i32) -> Vec<f64> {
    (from..=to).step_by(5).map(f64::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PilotPowerDbm,
    DataPowerDbm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    /// Powers in dBm.
    pub values: Vec<f64>,
    pub modes: Vec<Mode>,
    pub n_noise_trials: usize,
    /// Data sweeps only: also run the symbol-level Monte Carlo.
    pub empirical: bool,
    pub base: SystemParams,
}

impl SweepSpec {
    pub fn pilot(base: SystemParams) -> Self {
        Self {
            variable: SweepVariable::PilotPowerDbm,
            values: default_pilot_powers(),
            modes: vec![Mode::Identical, Mode::Orthogonal],
            n_noise_trials: DEFAULT_TRIALS,
            empirical: true,
            base,
        }
    }

    pub fn data(base: SystemParams) -> Self {
        Self {
            variable: SweepVariable::DataPowerDbm,
            values: default_data_powers(),
            modes: Mode::ALL.to_vec(),
            n_noise_trials: DEFAULT_TRIALS,
            empirical: true,
            base,
        }
    }

    fn validate(&self, expected: SweepVariable) -> Result<()> {
        if self.variable != expected {
            return Err(Error::Config(format!(
                "sweep variable is {:?}, this run needs {:?}",
                self.variable, expected
            )));
        }
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one power value".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sweep power {v} is not finite")));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("sweep needs at least one mode".into()));
        }
        if self.n_noise_trials == 0 {
            return Err(Error::Config("n_noise_trials must be at least 1".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSpec {
    pub n_elements: usize,
    pub n_realizations: usize,
    pub base: SystemParams,
}

impl CdfSpec {
    pub fn new(base: SystemParams) -> Self {
        Self {
            n_elements: 32,
            n_realizations: 10_000,
            base,
        }
    }
}

/// One empirical value compared against its closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub label: String,
    pub empirical: f64,
    pub closed_form: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(label: String, empirical: f64, closed_form: f64, std_error: f64) -> Self {
        let tolerance = ORACLE_SIGMAS * std_error + 1e-9 * closed_form.abs();
        Self {
            passed: (empirical - closed_form).abs() <= tolerance,
            label,
            empirical,
            closed_form,
            std_error,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotRow {
    pub power_dbm: f64,
    pub mode: Mode,
    pub mse_empirical: f64,
    pub mse_closed_form: f64,
    pub floor_closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub power_dbm: f64,
    pub mode: Mode,
    pub mse_high_pilot_snr: f64,
    /// `inf` when the floor is unbounded.
    pub floor: f64,
    pub mse_empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub realization: u64,
    pub floor_identical: f64,
    pub floor_orthogonal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput<R> {
    pub rows: Vec<R>,
    pub checks: Vec<OracleCheck>,
}

impl<R> SweepOutput<R> {
    pub fn failed_checks(&self) -> impl Iterator<Item = &OracleCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl SweepOutput<PilotRow> {
    pub fn row(&self, power_dbm: f64, mode: Mode) -> Option<&PilotRow> {
        self.rows
            .iter()
            .find(|r| r.power_dbm == power_dbm && r.mode == mode)
    }
}

impl SweepOutput<DataRow> {
    pub fn row(&self, power_dbm: f64, mode: Mode) -> Option<&DataRow> {
        self.rows
            .iter()
            .find(|r| r.power_dbm == power_dbm && r.mode == mode)
    }
}

/// Channel-estimation MSE of the misspecified estimator versus pilot power.
pub fn run_pilot_sweep(spec: &SweepSpec) -> Result<SweepOutput<PilotRow>> {
    spec.validate(SweepVariable::PilotPowerDbm)?;
    let base = &spec.base;
    let ch = draw_channels(base, 0)?;
    let pairs = spec
        .modes
        .iter()
        .map(|&mode| {
            let scheme = mode
                .pilot_scheme()
                .ok_or_else(|| Error::Config(format!("mode {mode} has no pilot phase to sweep")))?;
            Ok((
                mode,
                ConfigPair::build(scheme, base.n_pilots, base.n_elements)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = SweepOutput {
        rows: Vec::new(),
        checks: Vec::new(),
    };
    for (point, &power) in spec.values.iter().enumerate() {
        let params = SystemParams {
            pilot_power_dbm: power,
            ..base.clone()
        };
        for (mode, pair) in &pairs {
            let noise = PilotNoise::Awgn {
                point: point as u64,
            };
            let est = empirical_mse(
                &params,
                &ch,
                pair,
                SWEEP_OPERATOR,
                spec.n_noise_trials,
                noise,
            )?;
            let closed = cov_trace_closed_form(&params, &ch, pair.scheme, SWEEP_OPERATOR)?;
            let floor = bias_closed_form(&ch, pair.scheme, SWEEP_OPERATOR)?.norm_squared();
            out.checks.push(OracleCheck::new(
                format!("pilot {power} dBm {mode}"),
                est.mse,
                closed,
                est.mse_std_error,
            ));
            out.rows.push(PilotRow {
                power_dbm: power,
                mode: *mode,
                mse_empirical: est.mse,
                mse_closed_form: closed,
                floor_closed_form: floor,
            });
        }
    }
    Ok(out)
}

/// Data MSE at infinite pilot SNR versus data power.
pub fn run_data_sweep(spec: &SweepSpec) -> Result<SweepOutput<DataRow>> {
    spec.validate(SweepVariable::DataPowerDbm)?;
    let ch = draw_channels(&spec.base, 0)?;
    let mut out = SweepOutput {
        rows: Vec::new(),
        checks: Vec::new(),
    };
    for (point, &power) in spec.values.iter().enumerate() {
        let params = SystemParams {
            data_power_dbm: power,
            ..spec.base.clone()
        };
        for &mode in &spec.modes {
            let limit = high_pilot_snr_limit(&params, &ch, mode, SWEEP_OPERATOR)?;
            let mse = limit.mse(params.noise_power());
            let floor = limit.floor().value();
            let mse_empirical = if spec.empirical {
                let result = DataPhaseResult::evaluate(
                    &params,
                    limit.channels,
                    spec.n_noise_trials,
                    point as u64,
                )?;
                out.checks.push(OracleCheck::new(
                    format!("data {power} dBm {mode}"),
                    result.mse_empirical.mean,
                    result.mse_closed_form,
                    result.mse_empirical.std_error,
                ));
                Some(result.mse_empirical.mean)
            } else {
                None
            };
            out.rows.push(DataRow {
                power_dbm: power,
                mode,
                mse_high_pilot_snr: mse,
                floor,
                mse_empirical,
            });
        }
    }
    Ok(out)
}

/// High-SNR data-MSE floors of both pilot schemes, one row per
/// realization, in realization order.
pub fn run_cdf_floors(spec: &CdfSpec) -> Result<CdfFloors> {
    if spec.n_elements == 0 || spec.n_realizations == 0 {
        return Err(Error::Config(
            "cdf run needs n_elements >= 1 and n_realizations >= 1".into(),
        ));
    }
    let params = SystemParams {
        n_elements: spec.n_elements,
        ..spec.base.clone()
    };
    params.validate()?;
    let rows = (0..spec.n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            let ch = draw_channels(&params, i)?;
            let floor = |mode| -> Result<f64> {
                Ok(high_pilot_snr_limit(&params, &ch, mode, SWEEP_OPERATOR)?
                    .floor()
                    .value())
            };
            Ok(CdfRow {
                realization: i,
                floor_identical: floor(Mode::Identical)?,
                floor_orthogonal: floor(Mode::Orthogonal)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CdfFloors { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfFloors {
    pub rows: Vec<CdfRow>,
}

impl CdfFloors {
    /// Ascending floors of one scheme, ready for an empirical CDF.
    pub fn sorted(&self, mode: Mode) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .rows
            .iter()
            .map(|r| match mode {
                Mode::Orthogonal => r.floor_orthogonal,
                _ => r.floor_identical,
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn median(&self, mode: Mode) -> f64 {
        let v = self.sorted(mode);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// Fraction of realizations where orthogonal sequences do no better.
    pub fn violation_fraction(&self) -> f64 {
        let bad = self
            .rows
            .iter()
            .filter(|r| r.floor_orthogonal >= r.floor_identical)
            .count();
        bad as f64 / self.rows.len() as f64
    }
}
