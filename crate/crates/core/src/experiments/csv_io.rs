use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{CdfRow, DataRow, PilotRow};
use crate::error::{Error, Result};

/// A row type with a fixed CSV header. Floats are written in their
/// shortest round-trip decimal form; `None` becomes an empty field.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for PilotRow {
    const HEADER: &'static [&'static str] = &[
        "power_dbm",
        "mode",
        "mse_empirical",
        "mse_closed_form",
        "floor_closed_form",
    ];
}

impl CsvRow for DataRow {
    const HEADER: &'static [&'static str] = &[
        "power_dbm",
        "mode",
        "mse_high_pilot_snr",
        "floor",
        "mse_empirical",
    ];
}

impl CsvRow for CdfRow {
    const HEADER: &'static [&'static str] = &["realization", "floor_identical", "floor_orthogonal"];
}

pub fn write_csv_to<R: CsvRow, W: Write>(rows: &[R], sink: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(sink);
    writer.write_record(R::HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv<R: CsvRow>(rows: &[R], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(rows, file).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file written by [`write_csv`], checking the header.
pub fn read_csv<R: CsvRow + DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "{}: header {:?} does not match expected {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>(),
            R::HEADER
        )));
    }
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}
