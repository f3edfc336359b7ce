//! Run configuration files.
//!
//! TOML with three optional tables. `[system]` mirrors [`SystemParams`]
//! field for field; missing keys keep the reference-scenario defaults.
//! `[sweep]` and `[cdf]` override the sweep and CDF defaults. Unknown keys
//! are rejected.
//!
//! ```toml
//! [system]
//! n_elements = 64
//! n_pilots = 130
//! noise_power_dbm = -90.0
//! seed = 7
//!
//! [sweep]
//! values = [-30.0, -20.0, -10.0, 0.0]
//! modes = ["identical", "orthogonal"]
//! n_noise_trials = 10000
//! empirical = true
//!
//! [cdf]
//! n_elements = 32
//! n_realizations = 10000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CdfSpec, SweepSpec};
use crate::data::Mode;
use crate::error::{Error, Result};
use crate::model::SystemParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub values: Option<Vec<f64>>,
    pub modes: Option<Vec<Mode>>,
    pub n_noise_trials: Option<usize>,
    pub empirical: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CdfSettings {
    pub n_elements: Option<usize>,
    pub n_realizations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemParams,
    pub sweep: SweepSettings,
    pub cdf: CdfSettings,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn apply(&self, mut spec: SweepSpec) -> SweepSpec {
        let s = &self.sweep;
        if let Some(values) = &s.values {
            spec.values = values.clone();
        }
        if let Some(modes) = &s.modes {
            spec.modes = modes.clone();
        }
        if let Some(trials) = s.n_noise_trials {
            spec.n_noise_trials = trials;
        }
        if let Some(empirical) = s.empirical {
            spec.empirical = empirical;
        }
        spec
    }

    pub fn pilot_sweep(&self) -> SweepSpec {
        self.apply(SweepSpec::pilot(self.system.clone()))
    }

    pub fn data_sweep(&self) -> SweepSpec {
        self.apply(SweepSpec::data(self.system.clone()))
    }

    pub fn cdf(&self) -> CdfSpec {
        let mut spec = CdfSpec::new(self.system.clone());
        if let Some(n) = self.cdf.n_elements {
            spec.n_elements = n;
        }
        if let Some(n) = self.cdf.n_realizations {
            spec.n_realizations = n;
        }
        spec
    }
}
