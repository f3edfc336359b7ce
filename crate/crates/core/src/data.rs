//! Data transmission after channel estimation.
//!
//! Each RIS is phase-matched to its own operator's channel estimate. The
//! BS then sees the scalar channel `m_k` but believes it is `m̂_k`, which
//! omits the path through the other RIS, and equalizes with the MMSE
//! weight built from `m̂_k`. The mismatch `ε_k = m_k - m̂_k` sets a floor on
//! the symbol MSE that no amount of data power removes.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PilotScheme;
use crate::error::{Error, Result};
use crate::model::{ChannelRealization, Operator, SystemParams};
use crate::pilot::{bias_closed_form, CHUNK};
use crate::rng::{complex_gaussian, Domain, StreamKey};

/// RIS phases `φ_n`; element `n` reflects with coefficient `exp(-j φ_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub phases: Vec<f64>,
}

impl PhaseConfig {
    pub fn reflection(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.phases.len(),
            self.phases
                .iter()
                .map(|&phi| Complex64::from_polar(1.0, -phi)),
        )
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

fn arg(z: Complex64) -> f64 {
    // arg(0) := 0
    if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// Co-phases the cascaded channel: `φ_n = arg(h_n) + arg(ĝ_n)`, so that
/// `h_n exp(-j φ_n) ĝ_n = |h_n| |ĝ_n|`.
pub fn phase_match(h: &DVector<Complex64>, g_hat: &DVector<Complex64>) -> Result<PhaseConfig> {
    if h.len() != g_hat.len() {
        return Err(Error::ShapeMismatch {
            what: "channel estimate",
            expected: h.len(),
            found: g_hat.len(),
        });
    }
    Ok(PhaseConfig {
        phases: h
            .iter()
            .zip(g_hat.iter())
            .map(|(&a, &b)| arg(a) + arg(b))
            .collect(),
    })
}

/// `aᵀ diag(φ) b`.
fn reflect(a: &DVector<Complex64>, phi: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter()
        .zip(phi.iter())
        .zip(b.iter())
        .map(|((a, f), b)| a * f * b)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannels {
    /// True end-to-end gain, including the path through the other RIS.
    pub m: Complex64,
    /// Gain the BS assumes from its channel estimate.
    pub m_hat: Complex64,
    pub epsilon: Complex64,
}

/// Scalar channels of `operator` during data transmission when RIS 1 and
/// RIS 2 use `first` and `second`, and the BS holds estimate `g_hat`.
pub fn effective_channels(
    params: &SystemParams,
    ch: &ChannelRealization,
    first: &PhaseConfig,
    second: &PhaseConfig,
    g_hat: &DVector<Complex64>,
    operator: Operator,
) -> Result<EffectiveChannels> {
    let n = ch.n_elements();
    for (what, len) in [
        ("first RIS phases", first.len()),
        ("second RIS phases", second.len()),
        ("channel estimate", g_hat.len()),
    ] {
        if len != n {
            return Err(Error::ShapeMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let (own, other) = match operator {
        Operator::First => (first.reflection(), second.reflection()),
        Operator::Second => (second.reflection(), first.reflection()),
    };
    let op = ch.operator(operator);
    let amplitude = Complex64::from(params.data_power().sqrt());
    let m = amplitude * (reflect(op.h(), &own, op.g()) + reflect(op.q(), &other, op.p()));
    let m_hat = amplitude * reflect(op.h(), &own, g_hat);
    Ok(EffectiveChannels {
        m,
        m_hat,
        epsilon: m - m_hat,
    })
}

/// `x̂ = conj(m̂) y / (|m̂|² + σ²)`. `noise_power` must be positive.
pub fn mmse_symbol_estimate(m_hat: Complex64, y: Complex64, noise_power: f64) -> Complex64 {
    debug_assert!(noise_power > 0.0);
    m_hat.conj() * y / (m_hat.norm_sqr() + noise_power)
}

/// Symbol MSE of the mismatched MMSE equalizer for `x ~ CN(0, 1)`:
///
/// ```text
/// (|ε|² + 2σ²) / (|m-ε|² + σ²)  -  σ² (|m|² + σ²) / (|m-ε|² + σ²)²
/// ```
pub fn data_mse_closed_form(m: Complex64, epsilon: Complex64, noise_power: f64) -> f64 {
    let assumed = (m - epsilon).norm_sqr() + noise_power;
    let mse = (epsilon.norm_sqr() + 2.0 * noise_power) / assumed
        - noise_power * (m.norm_sqr() + noise_power) / (assumed * assumed);
    mse.max(0.0)
}

/// σ² → 0 limit of the data MSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataFloor {
    Finite(f64),
    /// `m̄ = ε̄`: the assumed channel is zero and the floor is unbounded.
    Unbounded,
}

impl DataFloor {
    /// `f64::INFINITY` for [`DataFloor::Unbounded`].
    pub fn value(self) -> f64 {
        match self {
            DataFloor::Finite(v) => v,
            DataFloor::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for DataFloor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataFloor::Finite(v) => write!(f, "{v}"),
            DataFloor::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// `|ε̄|² / |m̄ - ε̄|²`.
pub fn floor_high_snr(m_bar: Complex64, epsilon_bar: Complex64) -> DataFloor {
    let assumed = (m_bar - epsilon_bar).norm_sqr();
    if assumed == 0.0 {
        DataFloor::Unbounded
    } else {
        DataFloor::Finite(epsilon_bar.norm_sqr() / assumed)
    }
}

/// Channel knowledge the BS works with during data transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Estimate from identical pilot sequences, at infinite pilot SNR.
    Identical,
    /// Estimate from orthogonal pilot sequences, at infinite pilot SNR.
    Orthogonal,
    /// All channels known. Each RIS is still matched to its own UE only.
    PerfectCsi,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Identical, Mode::Orthogonal, Mode::PerfectCsi];

    pub fn pilot_scheme(self) -> Option<PilotScheme> {
        match self {
            Mode::Identical => Some(PilotScheme::Identical),
            Mode::Orthogonal => Some(PilotScheme::Orthogonal),
            Mode::PerfectCsi => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Identical => "identical",
            Mode::Orthogonal => "orthogonal",
            Mode::PerfectCsi => "perfect_csi",
        }
    }
}

impl From<PilotScheme> for Mode {
    fn from(scheme: PilotScheme) -> Self {
        match scheme {
            PilotScheme::Identical => Mode::Identical,
            PilotScheme::Orthogonal => Mode::Orthogonal,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown mode {s:?} (expected identical, orthogonal or perfect_csi)"
                ))
            })
    }
}

/// Effective channels at infinite pilot SNR: `ĝ = g + b` for both
/// operators, RISs phase-matched to those estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPoint {
    pub mode: Mode,
    pub phases: [PhaseConfig; 2],
    pub channels: EffectiveChannels,
}

impl LimitPoint {
    pub fn mse(&self, noise_power: f64) -> f64 {
        data_mse_closed_form(self.channels.m, self.channels.epsilon, noise_power)
    }

    pub fn floor(&self) -> DataFloor {
        floor_high_snr(self.channels.m, self.channels.epsilon)
    }
}

pub fn high_pilot_snr_limit(
    params: &SystemParams,
    ch: &ChannelRealization,
    mode: Mode,
    operator: Operator,
) -> Result<LimitPoint> {
    let estimate = |k: Operator| -> Result<DVector<Complex64>> {
        let g = ch.operator(k).g();
        Ok(match mode.pilot_scheme() {
            Some(scheme) => g + bias_closed_form(ch, scheme, k)?,
            None => g.clone(),
        })
    };
    let estimates = [estimate(Operator::First)?, estimate(Operator::Second)?];
    let phases = [
        phase_match(ch.operator(Operator::First).h(), &estimates[0])?,
        phase_match(ch.operator(Operator::Second).h(), &estimates[1])?,
    ];
    let mut channels = effective_channels(
        params,
        ch,
        &phases[0],
        &phases[1],
        &estimates[operator.index() - 1],
        operator,
    )?;
    if mode == Mode::PerfectCsi {
        channels.m_hat = channels.m;
        channels.epsilon = Complex64::new(0.0, 0.0);
    }
    Ok(LimitPoint {
        mode,
        phases,
        channels,
    })
}

/// Data MSE when the channel was estimated at infinite pilot SNR.
pub fn data_mse_high_pilot_snr(
    params: &SystemParams,
    ch: &ChannelRealization,
    mode: Mode,
    operator: Operator,
) -> Result<f64> {
    Ok(high_pilot_snr_limit(params, ch, mode, operator)?.mse(params.noise_power()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: usize,
}

/// Monte Carlo mean of `|x - x̂|²` with `y = m x + w` and `x̂` the MMSE
/// estimate built from `m_hat`. Trial `t` uses the stream
/// `(seed, DataNoise, point, t)`.
pub fn empirical_data_mse(
    params: &SystemParams,
    m: Complex64,
    m_hat: Complex64,
    n_trials: usize,
    point: u64,
) -> Result<ScalarEstimate> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    params.validate()?;
    let noise_power = params.noise_power();
    let sums: Vec<(f64, f64)> = (0..n_trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = (0.0, 0.0);
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                let mut rng = StreamKey::new(params.seed, Domain::DataNoise, point, t as u64).rng();
                let x = complex_gaussian(&mut rng, 1.0);
                let w = complex_gaussian(&mut rng, noise_power);
                let err = (x - mmse_symbol_estimate(m_hat, m * x + w, noise_power)).norm_sqr();
                acc.0 += err;
                acc.1 += err * err;
            }
            acc
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let count = n_trials as f64;
    let mean = sum / count;
    let std_error = if n_trials > 1 {
        ((sum_sq / count - mean * mean).max(0.0) / (count - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ScalarEstimate {
        mean,
        std_error,
        n_trials,
    })
}

/// Everything known about one operator's data phase at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPhaseResult {
    pub m: Complex64,
    pub m_hat: Complex64,
    pub epsilon: Complex64,
    pub mse_empirical: ScalarEstimate,
    pub mse_closed_form: f64,
    pub floor_high_snr: DataFloor,
}

impl DataPhaseResult {
    pub fn evaluate(
        params: &SystemParams,
        channels: EffectiveChannels,
        n_trials: usize,
        point: u64,
    ) -> Result<Self> {
        let EffectiveChannels { m, m_hat, epsilon } = channels;
        Ok(Self {
            m,
            m_hat,
            epsilon,
            mse_empirical: empirical_data_mse(params, m, m_hat, n_trials, point)?,
            mse_closed_form: data_mse_closed_form(m, epsilon, params.noise_power()),
            floor_high_snr: floor_high_snr(m, epsilon),
        })
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use super::*;
    use crate::model::OperatorChannels;

    fn cv(x: &[Complex64]) -> DVector<Complex64> {
        DVector::from_vec(x.to_vec())
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn phase_match_quarter_turns() {
        let z = Complex64::from_polar(1.0, FRAC_PI_4);
        let cfg = phase_match(&cv(&[z]), &cv(&[z])).unwrap();
        assert!((cfg.phases[0] - FRAC_PI_2).abs() < 1e-15);
        let product = z * cfg.reflection()[0] * z;
        assert!((product - re(1.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_match_real_positive_is_identity() {
        let cfg = phase_match(&cv(&[re(0.3), re(2.0)]), &cv(&[re(1.0), re(5.0)])).unwrap();
        assert_eq!(cfg.phases, vec![0.0, 0.0]);
    }

    #[test]
    fn phase_match_zero_entry() {
        let cfg = phase_match(&cv(&[re(0.0), re(-1.0)]), &cv(&[re(1.0), re(0.0)])).unwrap();
        assert_eq!(cfg.phases[0], 0.0);
        assert!((cfg.phases[1] - std::f64::consts::PI).abs() < 1e-15);
        assert!(phase_match(&cv(&[re(1.0)]), &cv(&[re(1.0), re(1.0)])).is_err());
    }

    #[test]
    fn mmse_estimator_cases() {
        assert!((mmse_symbol_estimate(re(1.0), re(1.0), 1.0) - re(0.5)).norm() < 1e-15);
        assert_eq!(
            mmse_symbol_estimate(re(0.0), Complex64::new(3.0, -2.0), 1.0),
            re(0.0)
        );
        let m = Complex64::new(600.0, 800.0); // |m|² = 1e6
        let x = Complex64::new(0.3, -0.7);
        assert!((mmse_symbol_estimate(m, m * x, 1.0) - x).norm() <= 1e-5);
    }

    #[test]
    fn data_mse_matched_model() {
        // ε = 0 reduces to σ²/(|m|²+σ²)
        assert!((data_mse_closed_form(re(1.0), re(0.0), 1.0) - 0.5).abs() < 1e-15);
        assert!((data_mse_closed_form(re(0.0), re(0.0), 1.0) - 1.0).abs() < 1e-15);
        let m = Complex64::new(0.3, -1.2);
        let s2 = 0.07;
        let expected = s2 / (m.norm_sqr() + s2);
        assert!((data_mse_closed_form(m, re(0.0), s2) - expected).abs() < 1e-15);
    }

    #[test]
    fn data_mse_bounds() {
        let cases = [
            (Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1), 0.3),
            (Complex64::new(0.0, 0.1), Complex64::new(0.2, 0.0), 1.0),
            (Complex64::new(-3.0, 1.0), Complex64::new(-3.0, 1.0), 1e-3),
        ];
        for (m, eps, s2) in cases {
            let mse = data_mse_closed_form(m, eps, s2);
            let upper = (eps.norm_sqr() + 2.0 * s2) / ((m - eps).norm_sqr() + s2);
            assert!(mse >= 0.0 && mse <= upper, "{mse} {upper}");
        }
    }

    #[test]
    fn floors() {
        let m = Complex64::new(0.4, -1.1);
        assert_eq!(floor_high_snr(m, re(0.0)), DataFloor::Finite(0.0));
        match floor_high_snr(m, m / 2.0) {
            DataFloor::Finite(v) => assert!((v - 1.0).abs() < 1e-15),
            DataFloor::Unbounded => panic!(),
        }
        assert_eq!(floor_high_snr(m, m), DataFloor::Unbounded);
        assert_eq!(DataFloor::Unbounded.value(), f64::INFINITY);
    }

    #[test]
    fn exact_model_has_no_mismatch() {
        let params = SystemParams::default();
        let h = cv(&[Complex64::new(0.1, 0.2), Complex64::new(-0.3, 0.05)]);
        let g = cv(&[Complex64::new(1.0, -1.0), Complex64::new(0.5, 0.5)]);
        let zero = DVector::zeros(2);
        let op = OperatorChannels::new(h.clone(), g.clone(), zero.clone(), g.clone()).unwrap();
        let ch = ChannelRealization::new(op.clone(), op).unwrap();
        let phase = phase_match(&h, &g).unwrap();
        let eff = effective_channels(&params, &ch, &phase, &phase, &g, Operator::First).unwrap();
        assert_eq!(eff.epsilon, re(0.0));
        assert_eq!(eff.m, eff.m_hat);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("perfect_csi".parse::<Mode>().unwrap(), Mode::PerfectCsi);
        assert!("orth".parse::<Mode>().is_err());
        assert_eq!(Mode::from(PilotScheme::Orthogonal), Mode::Orthogonal);
    }

    #[test]
    fn blind_equalizer_learns_nothing() {
        let params = SystemParams {
            noise_power_dbm: 0.0,
            ..Default::default()
        };
        let est = empirical_data_mse(&params, re(1.0), re(0.0), 100_000, 0).unwrap();
        assert!((est.mean - 1.0).abs() < 0.02, "{}", est.mean);
        assert!(empirical_data_mse(&params, re(1.0), re(1.0), 0, 0).is_err());
    }
}
