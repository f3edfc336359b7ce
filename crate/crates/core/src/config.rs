//! RIS configuration sequences for the pilot phase.
//!
//! Both builders take columns of the L-point DFT basis,
//! `B[t, n] = exp(-j 2π t n / L)`. Any set of distinct columns is
//! unit-modulus and mutually orthogonal, for every `L`, odd or even.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Operator;

/// Unit-modulus tolerance for builder outputs.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;
/// Absolute per-entry tolerance for Gram identities.
pub const GRAM_TOL: f64 = 1e-9;

/// How the two operators' pilot configuration sequences relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotScheme {
    /// `B1 = B2`, the uncoordinated default.
    Identical,
    /// `B1^H B2 = 0`, requires `L >= 2N`.
    Orthogonal,
}

impl PilotScheme {
    pub fn name(self) -> &'static str {
        match self {
            PilotScheme::Identical => "identical",
            PilotScheme::Orthogonal => "orthogonal",
        }
    }
}

impl fmt::Display for PilotScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceRole {
    Identical,
    OrthogonalFirst,
    OrthogonalSecond,
}

/// An `L x N` matrix whose row `t` holds the reflection coefficients every
/// element applies at pilot instance `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSequence {
    matrix: DMatrix<Complex64>,
    role: SequenceRole,
}

impl ConfigSequence {
    /// Wraps an arbitrary matrix. No invariants are checked here; use
    /// [`verify_sequences`] for that.
    pub fn from_matrix(matrix: DMatrix<Complex64>, role: SequenceRole) -> Self {
        Self { matrix, role }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn role(&self) -> SequenceRole {
        self.role
    }

    pub fn n_pilots(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.matrix.ncols()
    }

    /// `B^H v` for a length-L vector.
    pub fn adjoint_apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.matrix.ad_mul(v)
    }

    /// Writes one row per pilot instance, one `"re,im"` cell per element.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        let header: Vec<String> = (0..self.n_elements())
            .map(|n| format!("element_{n}"))
            .collect();
        writer.write_record(&header).map_err(csv_err)?;
        for row in self.matrix.row_iter() {
            writer
                .write_record(row.iter().map(|z| format!("{},{}", z.re, z.im)))
                .map_err(csv_err)?;
        }
        writer.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// The pair of sequences used by the two RISs during one pilot phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPair {
    pub scheme: PilotScheme,
    pub first: ConfigSequence,
    pub second: ConfigSequence,
}

impl ConfigPair {
    pub fn build(scheme: PilotScheme, n_pilots: usize, n_elements: usize) -> Result<Self> {
        let (first, second) = match scheme {
            PilotScheme::Identical => build_identical(n_pilots, n_elements)?,
            PilotScheme::Orthogonal => build_orthogonal(n_pilots, n_elements)?,
        };
        Ok(Self {
            scheme,
            first,
            second,
        })
    }

    /// Sequence of the RIS owned by operator `k`.
    pub fn serving(&self, k: Operator) -> &ConfigSequence {
        match k {
            Operator::First => &self.first,
            Operator::Second => &self.second,
        }
    }

    /// Sequence of the other operator's RIS, which carries `k`'s cross path.
    pub fn interfering(&self, k: Operator) -> &ConfigSequence {
        self.serving(k.other())
    }
}

fn dft_columns(n_pilots: usize, columns: std::ops::Range<usize>) -> DMatrix<Complex64> {
    let first = columns.start;
    DMatrix::from_fn(n_pilots, columns.len(), |t, c| {
        // reduce the exponent modulo L before scaling to keep the phase exact
        let k = (t * (first + c)) % n_pilots;
        Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n_pilots as f64)
    })
}

/// `B1 = B2 = ` the first `n_elements` DFT columns. Needs `L >= N`.
pub fn build_identical(
    n_pilots: usize,
    n_elements: usize,
) -> Result<(ConfigSequence, ConfigSequence)> {
    check_dims(n_pilots, n_elements)?;
    if n_pilots < n_elements {
        return Err(Error::InsufficientPilots {
            scheme: "identical",
            n_elements,
            n_pilots,
            required: n_elements,
        });
    }
    let seq = ConfigSequence::from_matrix(
        dft_columns(n_pilots, 0..n_elements),
        SequenceRole::Identical,
    );
    Ok((seq.clone(), seq))
}

/// `B1` = DFT columns `0..N`, `B2` = columns `N..2N`. Needs `L >= 2N`;
/// columns beyond `2N` stay unused.
pub fn build_orthogonal(
    n_pilots: usize,
    n_elements: usize,
) -> Result<(ConfigSequence, ConfigSequence)> {
    check_dims(n_pilots, n_elements)?;
    if n_pilots < 2 * n_elements {
        return Err(Error::InsufficientPilots {
            scheme: "orthogonal",
            n_elements,
            n_pilots,
            required: 2 * n_elements,
        });
    }
    let first = dft_columns(n_pilots, 0..n_elements);
    let second = dft_columns(n_pilots, n_elements..2 * n_elements);
    Ok((
        ConfigSequence::from_matrix(first, SequenceRole::OrthogonalFirst),
        ConfigSequence::from_matrix(second, SequenceRole::OrthogonalSecond),
    ))
}

fn check_dims(n_pilots: usize, n_elements: usize) -> Result<()> {
    if n_pilots == 0 || n_elements == 0 {
        return Err(Error::InvalidArgument(format!(
            "need L >= 1 and N >= 1, got L = {n_pilots}, N = {n_elements}"
        )));
    }
    Ok(())
}

/// Measured deviations of a sequence pair from the pilot-design invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub tolerance: f64,
    /// `max | |B_k[t,n]| - 1 |` over both sequences.
    pub max_unit_modulus_dev: f64,
    /// `max |B_k^H B_k - L I|` over entries of both Gram matrices.
    pub max_gram_dev: f64,
    /// `max |B_1^H B_2|` over entries.
    pub max_cross_gram: f64,
    pub unit_modulus_ok: bool,
    pub gram_ok: bool,
    pub orthogonal: bool,
}

impl SequenceReport {
    /// Whether the pair is fit for `scheme`: identical pairs need not be
    /// cross-orthogonal.
    pub fn valid_for(&self, scheme: PilotScheme) -> bool {
        self.unit_modulus_ok
            && self.gram_ok
            && (scheme == PilotScheme::Identical || self.orthogonal)
    }
}

impl fmt::Display for SequenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(
            f,
            "unit modulus   max dev {:.3e}  [{}]",
            self.max_unit_modulus_dev,
            verdict(self.unit_modulus_ok)
        )?;
        writeln!(
            f,
            "B_k^H B_k = LI max dev {:.3e}  [{}]",
            self.max_gram_dev,
            verdict(self.gram_ok)
        )?;
        write!(
            f,
            "B_1^H B_2 = 0  max |entry| {:.3e}  [{}]",
            self.max_cross_gram,
            if self.orthogonal {
                "pass"
            } else {
                "non-orthogonal"
            }
        )
    }
}

pub fn verify_sequences(
    b1: &ConfigSequence,
    b2: &ConfigSequence,
    tol: f64,
) -> Result<SequenceReport> {
    if b1.n_pilots() != b2.n_pilots() {
        return Err(Error::ShapeMismatch {
            what: "pilot instances of second sequence",
            expected: b1.n_pilots(),
            found: b2.n_pilots(),
        });
    }
    if b1.n_elements() != b2.n_elements() {
        return Err(Error::ShapeMismatch {
            what: "elements of second sequence",
            expected: b1.n_elements(),
            found: b2.n_elements(),
        });
    }
    let l = b1.n_pilots() as f64;
    let max_abs = |m: &DMatrix<Complex64>| m.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let max_unit_modulus_dev = b1
        .matrix
        .iter()
        .chain(b2.matrix.iter())
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);

    let identity =
        DMatrix::<Complex64>::identity(b1.n_elements(), b1.n_elements()) * Complex64::from(l);
    let max_gram_dev = [b1, b2]
        .iter()
        .map(|b| max_abs(&(b.matrix.ad_mul(&b.matrix) - &identity)))
        .fold(0.0, f64::max);
    let max_cross_gram = max_abs(&b1.matrix.ad_mul(&b2.matrix));

    Ok(SequenceReport {
        tolerance: tol,
        max_unit_modulus_dev,
        max_gram_dev,
        max_cross_gram,
        unit_modulus_ok: max_unit_modulus_dev <= tol,
        gram_ok: max_gram_dev <= tol,
        orthogonal: max_cross_gram <= tol,
    })
}
