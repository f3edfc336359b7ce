use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_contam::config::{verify_sequences, ConfigPair, GRAM_TOL};
use ris_contam::experiments::{
    run_cdf_floors, run_data_sweep, run_pilot_sweep, write_csv, write_csv_to, CsvRow, OracleCheck,
    RunConfig, SweepSpec,
};
use ris_contam::{Error, Mode};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ORACLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ris-contam",
    version,
    about = "Inter-operator RIS pilot contamination experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-estimation MSE versus pilot power.
    SweepPilot(Common),
    /// Data MSE at high pilot SNR versus data power.
    SweepData(Common),
    /// High-SNR data-MSE floors over many channel realizations.
    CdfFloors {
        #[command(flatten)]
        common: Common,
        /// Number of channel realizations.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Build the pilot configuration sequences and check their invariants.
    ValidateConfig(Common),
}

#[derive(Args)]
struct Common {
    /// RIS elements per surface.
    #[arg(long = "n")]
    n_elements: Option<usize>,
    /// Pilot time instances.
    #[arg(long = "l")]
    n_pilots: Option<usize>,
    /// Comma-separated modes: identical, orthogonal, perfect_csi.
    #[arg(long, value_delimiter = ',')]
    mode: Vec<Mode>,
    /// Noise trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated sweep powers in dBm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    powers: Vec<f64>,
    /// Output CSV (stdout when omitted). For validate-config, a prefix for
    /// `<prefix>_first.csv` and `<prefix>_second.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.params {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.n_elements {
            cfg.system.n_elements = n;
            cfg.cdf.n_elements = Some(n);
        }
        if let Some(l) = self.n_pilots {
            cfg.system.n_pilots = l;
        }
        if let Some(seed) = self.seed {
            cfg.system.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.sweep.n_noise_trials = Some(trials);
        }
        if !self.mode.is_empty() {
            cfg.sweep.modes = Some(self.mode.clone());
        }
        if !self.powers.is_empty() {
            cfg.sweep.values = Some(self.powers.clone());
        }
        cfg.system.validate()?;
        Ok(cfg)
    }
}

fn emit<R: CsvRow>(rows: &[R], out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => write_csv(rows, path),
        None => write_csv_to(rows, io::stdout().lock()).map_err(|source| Error::Csv {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn report(checks: &[OracleCheck]) -> u8 {
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    for c in &failed {
        eprintln!(
            "oracle mismatch: {}: empirical {:e} vs closed form {:e} (tolerance {:e})",
            c.label, c.empirical, c.closed_form, c.tolerance
        );
    }
    eprintln!(
        "{} of {} oracle checks passed",
        checks.len() - failed.len(),
        checks.len()
    );
    if failed.is_empty() {
        0
    } else {
        EXIT_ORACLE
    }
}

fn sweep(spec: SweepSpec, pilot: bool, out: Option<&Path>) -> Result<u8, Error> {
    if pilot {
        let result = run_pilot_sweep(&spec)?;
        emit(&result.rows, out)?;
        Ok(report(&result.checks))
    } else {
        let result = run_data_sweep(&spec)?;
        emit(&result.rows, out)?;
        Ok(report(&result.checks))
    }
}

fn validate_config(common: &Common) -> Result<u8, Error> {
    let cfg = common.run_config()?;
    let (n, l) = (cfg.system.n_elements, cfg.system.n_pilots);
    let modes = if common.mode.is_empty() {
        vec![Mode::Identical, Mode::Orthogonal]
    } else {
        common.mode.clone()
    };
    if common.out.is_some() && modes.len() != 1 {
        return Err(Error::Config("--out needs exactly one --mode".into()));
    }
    let mut code = 0;
    for mode in modes {
        let scheme = mode
            .pilot_scheme()
            .ok_or_else(|| Error::Config(format!("mode {mode} has no pilot configuration")))?;
        let pair = ConfigPair::build(scheme, l, n)?;
        let rep = verify_sequences(&pair.first, &pair.second, GRAM_TOL)?;
        println!("{mode} sequences, L = {l}, N = {n}, tolerance {GRAM_TOL:e}\n{rep}\n");
        if !rep.valid_for(scheme) {
            code = EXIT_ORACLE;
        }
        if let Some(prefix) = &common.out {
            let with_suffix = |s: &str| {
                let mut name = prefix.as_os_str().to_owned();
                name.push(s);
                PathBuf::from(name)
            };
            pair.first.write_csv(&with_suffix("_first.csv"))?;
            pair.second.write_csv(&with_suffix("_second.csv"))?;
        }
    }
    Ok(code)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::SweepPilot(common) => {
            let spec = common.run_config()?.pilot_sweep();
            sweep(spec, true, common.out.as_deref())
        }
        Command::SweepData(common) => {
            let spec = common.run_config()?.data_sweep();
            sweep(spec, false, common.out.as_deref())
        }
        Command::CdfFloors {
            common,
            realizations,
        } => {
            let mut spec = common.run_config()?.cdf();
            if let Some(r) = realizations {
                spec.n_realizations = r;
            }
            let table = run_cdf_floors(&spec)?;
            emit(&table.rows, common.out.as_deref())?;
            eprintln!(
                "median floor: identical {:e}, orthogonal {:e}; orthogonal no better in {:.4} of {} realizations",
                table.median(Mode::Identical),
                table.median(Mode::Orthogonal),
                table.violation_fraction(),
                table.rows.len()
            );
            Ok(0)
        }
        Command::ValidateConfig(common) => validate_config(&common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_)
                | Error::InvalidParams(_)
                | Error::InvalidArgument(_)
                | Error::InsufficientPilots { .. } => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            };
            ExitCode::from(code)
        }
    }
}
