use ris_contam::experiments::{
    read_csv, run_cdf_floors, run_data_sweep, run_pilot_sweep, write_csv, write_csv_to, CdfRow,
    CdfSpec, DataRow, PilotRow, RunConfig, SweepSpec,
};
use ris_contam::{Error, Mode, SystemParams};

fn base() -> SystemParams {
    SystemParams {
        n_elements: 16,
        n_pilots: 34,
        seed: 5,
        ..Default::default()
    }
}

fn pilot_spec() -> SweepSpec {
    SweepSpec {
        values: vec![-30.0, -20.0, -10.0, 0.0, 40.0],
        n_noise_trials: 2_000,
        ..SweepSpec::pilot(base())
    }
}

fn csv_bytes<R: ris_contam::experiments::CsvRow>(rows: &[R]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_to(rows, &mut buf).unwrap();
    buf
}

#[test]
fn pilot_sweep_is_reproducible_across_thread_counts() {
    let spec = pilot_spec();
    let a = csv_bytes(&run_pilot_sweep(&spec).unwrap().rows);
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| csv_bytes(&run_pilot_sweep(&spec).unwrap().rows));
    assert_eq!(a, b);
}

#[test]
fn pilot_sweep_passes_its_oracles() {
    let out = run_pilot_sweep(&pilot_spec()).unwrap();
    assert_eq!(out.rows.len(), 10);
    assert_eq!(out.failed_checks().count(), 0);
}

#[test]
fn pilot_modes_share_noise() {
    let out = run_pilot_sweep(&pilot_spec()).unwrap();
    let ident = out.row(-30.0, Mode::Identical).unwrap();
    let orth = out.row(-30.0, Mode::Orthogonal).unwrap();
    // with common noise the difference of the empirical columns tracks
    // ‖b‖² far more closely than either column tracks its closed form
    let diff = ident.mse_empirical - orth.mse_empirical;
    let column_error = (orth.mse_empirical - orth.mse_closed_form).abs();
    assert!(
        (diff - ident.floor_closed_form).abs()
            < 0.2 * column_error.max(1e-3 * orth.mse_closed_form)
    );
}

#[test]
fn orthogonal_mse_falls_one_decade_per_ten_db() {
    let spec = SweepSpec {
        values: (-30..=10).step_by(5).map(f64::from).collect(),
        modes: vec![Mode::Orthogonal],
        n_noise_trials: 4_000,
        ..SweepSpec::pilot(base())
    };
    let out = run_pilot_sweep(&spec).unwrap();
    let xs: Vec<f64> = out.rows.iter().map(|r| r.power_dbm / 10.0).collect();
    let ys: Vec<f64> = out.rows.iter().map(|r| r.mse_empirical.log10()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    assert!((sxy / sxx + 1.0).abs() < 0.05, "slope {}", sxy / sxx);
}

#[test]
fn pilot_sweep_rejects_perfect_csi() {
    let spec = SweepSpec {
        modes: vec![Mode::PerfectCsi],
        ..pilot_spec()
    };
    assert!(matches!(run_pilot_sweep(&spec), Err(Error::Config(_))));
}

#[test]
fn data_sweep_round_trips_through_csv() {
    let spec = SweepSpec {
        values: vec![-30.0, 0.0, 40.0],
        n_noise_trials: 2_000,
        ..SweepSpec::data(base())
    };
    let out = run_data_sweep(&spec).unwrap();
    assert_eq!(out.rows.len(), 9);
    assert_eq!(out.failed_checks().count(), 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_csv(&out.rows, &path).unwrap();
    assert_eq!(read_csv::<DataRow>(&path).unwrap(), out.rows);
    assert_eq!(out.row(40.0, Mode::PerfectCsi).unwrap().floor, 0.0);
}

#[test]
fn data_sweep_without_monte_carlo_leaves_column_empty() {
    let spec = SweepSpec {
        values: vec![10.0],
        empirical: false,
        ..SweepSpec::data(base())
    };
    let out = run_data_sweep(&spec).unwrap();
    assert!(out.rows.iter().all(|r| r.mse_empirical.is_none()));
    assert!(out.checks.is_empty());
}

#[test]
fn cdf_floors_are_reproducible() {
    let spec = CdfSpec {
        n_realizations: 500,
        ..CdfSpec::new(base())
    };
    let a = run_cdf_floors(&spec).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(2)
        .build()
        .unwrap()
        .install(|| run_cdf_floors(&spec).unwrap());
    assert_eq!(csv_bytes(&a.rows), csv_bytes(&b.rows));
    assert!(a
        .rows
        .iter()
        .enumerate()
        .all(|(i, r)| r.realization == i as u64));
    let sorted = a.sorted(Mode::Orthogonal);
    assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    assert!(a.median(Mode::Orthogonal) < a.median(Mode::Identical));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cdf.csv");
    write_csv(&a.rows, &path).unwrap();
    assert_eq!(read_csv::<CdfRow>(&path).unwrap(), a.rows);
}

#[test]
fn config_file_drives_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[system]\nn_elements = 4\nn_pilots = 8\nseed = 3\n\n[sweep]\nvalues = [0.0, 5.0]\nmodes = [\"orthogonal\"]\nn_noise_trials = 100\n",
    )
    .unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    let out = run_pilot_sweep(&cfg.pilot_sweep()).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert!(out
        .rows
        .iter()
        .all(|r: &PilotRow| r.mode == Mode::Orthogonal));

    std::fs::write(&path, "[system]\nn_element = 4\n").unwrap();
    let err = RunConfig::load(&path).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("run.toml"));
}
