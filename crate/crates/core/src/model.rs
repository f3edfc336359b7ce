//! Scenario parameters, unit conversion and random channel generation.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian_vector, Domain, StreamKey};

/// Smallest |h| the estimators will divide by: below this, `1/|h|^2`
/// overflows double precision.
pub const MIN_CHANNEL_MAGNITUDE: f64 = 1e-150;

/// Converts a decibel quantity to linear scale. dBm inputs come out in
/// milliwatts, dB inputs as a dimensionless gain.
pub fn db_to_linear(value_db: f64) -> Result<f64> {
    if !value_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "decibel value must be finite, got {value_db}"
        )));
    }
    Ok(10f64.powf(value_db / 10.0))
}

/// All scalars of one scenario. Powers are stored as entered (dBm / dB) and
/// converted on access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// RIS elements per surface.
    pub n_elements: usize,
    /// Pilot time instances.
    pub n_pilots: usize,
    pub pilot_power_dbm: f64,
    pub data_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Applied to `g` and to the cross link `p`.
    pub pathloss_ue_ris_db: f64,
    /// Applied to `h` and to the cross link `q`.
    pub pathloss_ris_bs_db: f64,
    pub seed: u64,
}

impl Default for SystemParams {
    /// The reference scenario: N = 256, L = 513, -90 dBm noise, -80 dB
    /// UE-RIS and -60 dB RIS-BS path loss, 0 dBm transmit powers.
    fn default() -> Self {
        Self {
            n_elements: 256,
            n_pilots: 513,
            pilot_power_dbm: 0.0,
            data_power_dbm: 0.0,
            noise_power_dbm: -90.0,
            pathloss_ue_ris_db: -80.0,
            pathloss_ris_bs_db: -60.0,
            seed: 0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_elements == 0 {
            return Err(Error::InvalidParams("n_elements must be at least 1".into()));
        }
        if self.n_pilots == 0 {
            return Err(Error::InvalidParams("n_pilots must be at least 1".into()));
        }
        let fields = [
            ("pilot_power_dbm", self.pilot_power_dbm),
            ("data_power_dbm", self.data_power_dbm),
            ("noise_power_dbm", self.noise_power_dbm),
            ("pathloss_ue_ris_db", self.pathloss_ue_ris_db),
            ("pathloss_ris_bs_db", self.pathloss_ris_bs_db),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Pilot power in mW.
    pub fn pilot_power(&self) -> f64 {
        linear(self.pilot_power_dbm)
    }

    /// Data power in mW.
    pub fn data_power(&self) -> f64 {
        linear(self.data_power_dbm)
    }

    /// Noise power in mW.
    pub fn noise_power(&self) -> f64 {
        linear(self.noise_power_dbm)
    }

    pub fn gain_ue_ris(&self) -> f64 {
        linear(self.pathloss_ue_ris_db)
    }

    pub fn gain_ris_bs(&self) -> f64 {
        linear(self.pathloss_ris_bs_db)
    }
}

// Only called on validated fields; non-finite input yields NaN/inf rather
// than a panic.
fn linear(value_db: f64) -> f64 {
    10f64.powf(value_db / 10.0)
}

/// One of the two operators. Each owns one RIS, one BS and one subscribed UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    First,
    Second,
}

impl Operator {
    pub const BOTH: [Operator; 2] = [Operator::First, Operator::Second];

    /// 1-based index.
    pub fn index(self) -> usize {
        match self {
            Operator::First => 1,
            Operator::Second => 2,
        }
    }

    pub fn other(self) -> Operator {
        match self {
            Operator::First => Operator::Second,
            Operator::Second => Operator::First,
        }
    }

    pub fn from_index(index: usize) -> Result<Operator> {
        match index {
            1 => Ok(Operator::First),
            2 => Ok(Operator::Second),
            _ => Err(Error::InvalidArgument(format!(
                "operator index must be 1 or 2, got {index}"
            ))),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// The channels seen by one operator's BS.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorChannels {
    h: DVector<Complex64>,
    g: DVector<Complex64>,
    q: DVector<Complex64>,
    p: DVector<Complex64>,
    r: DVector<Complex64>,
}

impl OperatorChannels {
    /// `h`: serving RIS to BS (known), `g`: UE to serving RIS (estimated),
    /// `q`: other RIS to BS, `p`: UE to other RIS. The cascaded cross channel
    /// `r = q ∘ p` is derived.
    pub fn new(
        h: DVector<Complex64>,
        g: DVector<Complex64>,
        q: DVector<Complex64>,
        p: DVector<Complex64>,
    ) -> Result<Self> {
        let n = h.len();
        for (what, v) in [("g", &g), ("q", &q), ("p", &p)] {
            if v.len() != n {
                return Err(Error::ShapeMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let r = q.component_mul(&p);
        Ok(Self { h, g, q, p, r })
    }

    pub fn h(&self) -> &DVector<Complex64> {
        &self.h
    }

    pub fn g(&self) -> &DVector<Complex64> {
        &self.g
    }

    pub fn q(&self) -> &DVector<Complex64> {
        &self.q
    }

    pub fn p(&self) -> &DVector<Complex64> {
        &self.p
    }

    pub fn r(&self) -> &DVector<Complex64> {
        &self.r
    }

    pub fn n_elements(&self) -> usize {
        self.h.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    operators: [OperatorChannels; 2],
}

impl ChannelRealization {
    pub fn new(first: OperatorChannels, second: OperatorChannels) -> Result<Self> {
        if first.n_elements() != second.n_elements() {
            return Err(Error::ShapeMismatch {
                what: "second operator channels",
                expected: first.n_elements(),
                found: second.n_elements(),
            });
        }
        Ok(Self {
            operators: [first, second],
        })
    }

    pub fn operator(&self, k: Operator) -> &OperatorChannels {
        &self.operators[k.index() - 1]
    }

    pub fn n_elements(&self) -> usize {
        self.operators[0].n_elements()
    }
}

/// Draws realization `realization_index` of the scenario. Entries are
/// i.i.d. circularly symmetric Gaussian with per-element variance equal to
/// the linear path loss of their hop. The result depends only on
/// `(params.seed, realization_index)`.
pub fn draw_channels(params: &SystemParams, realization_index: u64) -> Result<ChannelRealization> {
    params.validate()?;
    let n = params.n_elements;
    let (ue_ris, ris_bs) = (params.gain_ue_ris(), params.gain_ris_bs());
    let mut rng = StreamKey::new(params.seed, Domain::Channels, realization_index, 0).rng();
    let mut draw_operator = || {
        let h = complex_gaussian_vector(&mut rng, n, ris_bs);
        let g = complex_gaussian_vector(&mut rng, n, ue_ris);
        let q = complex_gaussian_vector(&mut rng, n, ris_bs);
        let p = complex_gaussian_vector(&mut rng, n, ue_ris);
        OperatorChannels::new(h, g, q, p)
    };
    let first = draw_operator()?;
    let second = draw_operator()?;
    ChannelRealization::new(first, second)
}

/// Fails with [`Error::NearSingularChannel`] if any `|h[n]| < eps`.
pub fn check_invertible(h: &DVector<Complex64>, operator: Operator, eps: f64) -> Result<()> {
    match h.iter().position(|z| !(z.norm() >= eps)) {
        None => Ok(()),
        Some(element) => Err(Error::NearSingularChannel {
            operator: operator.index(),
            element,
            magnitude: h[element].norm(),
            threshold: eps,
        }),
    }
}

/// Checks that every known channel `h_k` can be inverted elementwise.
pub fn validate_realization(ch: &ChannelRealization, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Operator::BOTH
        .iter()
        .try_for_each(|&k| check_invertible(ch.operator(k).h(), k, eps))
}
