//! Pilot reception and channel estimation.
//!
//! BS `k` receives the stacked pilots
//!
//! ```text
//! y_k = sqrt(Pp) (B_k D(h_k) g_k + B_j r_k) + w_k,   r_k = q_k ∘ p_k
//! ```
//!
//! but, unaware of the second RIS path, estimates `g_k` with the
//! misspecified ML estimator `ĝ_k = D(h_k)^-1 B_k^H y_k / (L sqrt(Pp))`.
//! With `B_1 = B_2` that estimate carries the bias `r_k / h_k`; with
//! `B_1^H B_2 = 0` the bias vanishes and the estimate coincides with the
//! full-model ML estimate returned by [`joint_ml_estimate`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ConfigPair, ConfigSequence, PilotScheme};
use crate::error::{Error, Result};
use crate::model::{
    check_invertible, ChannelRealization, Operator, SystemParams, MIN_CHANNEL_MAGNITUDE,
};
use crate::rng::{complex_gaussian_vector, Domain, StreamKey};

/// The joint model is declared singular above this condition estimate.
pub const MAX_CONDITION: f64 = 1e12;

/// Trials are reduced in fixed-size chunks so that results do not depend
/// on the thread count.
pub(crate) const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y: DVector<Complex64>,
    pub operator: Operator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub g_hat: DVector<Complex64>,
    /// Cross-channel estimate, only produced by the joint estimator.
    pub r_hat: Option<DVector<Complex64>>,
    pub bias_closed_form: Option<DVector<Complex64>>,
    pub cov_trace_closed_form: Option<f64>,
}

impl EstimationResult {
    fn estimate(g_hat: DVector<Complex64>, r_hat: Option<DVector<Complex64>>) -> Self {
        Self {
            g_hat,
            r_hat,
            bias_closed_form: None,
            cov_trace_closed_form: None,
        }
    }

    /// Attaches the analytic bias and error-covariance trace for `scheme`.
    pub fn with_closed_forms(
        mut self,
        params: &SystemParams,
        ch: &ChannelRealization,
        scheme: PilotScheme,
        operator: Operator,
    ) -> Result<Self> {
        self.bias_closed_form = Some(bias_closed_form(ch, scheme, operator)?);
        self.cov_trace_closed_form = Some(cov_trace_closed_form(params, ch, scheme, operator)?);
        Ok(self)
    }
}

fn expect_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_pair(ch: &ChannelRealization, pair: &ConfigPair) -> Result<()> {
    expect_len(
        "elements of first sequence",
        ch.n_elements(),
        pair.first.n_elements(),
    )?;
    expect_len(
        "elements of second sequence",
        ch.n_elements(),
        pair.second.n_elements(),
    )?;
    expect_len(
        "pilot instances of second sequence",
        pair.first.n_pilots(),
        pair.second.n_pilots(),
    )
}

/// `sqrt(Pp) (B_k D(h_k) g_k + B_j r_k)`.
fn noiseless_pilots(
    params: &SystemParams,
    ch: &ChannelRealization,
    pair: &ConfigPair,
    operator: Operator,
) -> DVector<Complex64> {
    let op = ch.operator(operator);
    let direct = pair.serving(operator).matrix() * op.h().component_mul(op.g());
    let cross = pair.interfering(operator).matrix() * op.r();
    (direct + cross) * Complex64::from(params.pilot_power().sqrt())
}

/// Stacked pilot observation of `operator` with the caller's noise draw.
pub fn simulate_pilot_rx(
    params: &SystemParams,
    ch: &ChannelRealization,
    pair: &ConfigPair,
    operator: Operator,
    noise: &DVector<Complex64>,
) -> Result<PilotObservation> {
    check_pair(ch, pair)?;
    expect_len("noise draw", pair.first.n_pilots(), noise.len())?;
    Ok(PilotObservation {
        y: noiseless_pilots(params, ch, pair, operator) + noise,
        operator,
    })
}

/// Misspecified ML estimate `D(h)^-1 B^H y / (L sqrt(Pp))`. Assumes
/// `B^H B = L I`; no regularization.
pub fn mml_estimate(
    params: &SystemParams,
    obs: &PilotObservation,
    serving: &ConfigSequence,
    h: &DVector<Complex64>,
) -> Result<EstimationResult> {
    expect_len("pilot observation", serving.n_pilots(), obs.y.len())?;
    expect_len("known channel h", serving.n_elements(), h.len())?;
    check_invertible(h, obs.operator, MIN_CHANNEL_MAGNITUDE)?;
    let scale = 1.0 / (serving.n_pilots() as f64 * params.pilot_power().sqrt());
    let mut g_hat = serving.adjoint_apply(&obs.y);
    for (g, h) in g_hat.iter_mut().zip(h.iter()) {
        *g *= scale / h;
    }
    Ok(EstimationResult::estimate(g_hat, None))
}

/// Full-model ML estimate of `(g_k, r_k)` from
/// `y = sqrt(Pp) [B_k D(h) , B_j] [g; r] + w`.
///
/// The `2N x 2N` normal equations are Jacobi-equilibrated (scaled to unit
/// diagonal) before the condition check and the Cholesky solve, so the
/// disparity between `|h|` and 1 does not count against the condition
/// number.
pub fn joint_ml_estimate(
    params: &SystemParams,
    obs: &PilotObservation,
    pair: &ConfigPair,
    h: &DVector<Complex64>,
) -> Result<EstimationResult> {
    let serving = pair.serving(obs.operator).matrix();
    let interfering = pair.interfering(obs.operator).matrix();
    let (l, n) = serving.shape();
    expect_len("pilot observation", l, obs.y.len())?;
    expect_len("known channel h", n, h.len())?;
    expect_len("pilot instances of second sequence", l, interfering.nrows())?;
    expect_len("elements of second sequence", n, interfering.ncols())?;
    check_invertible(h, obs.operator, MIN_CHANNEL_MAGNITUDE)?;
    if l < 2 * n {
        return Err(Error::SingularModel {
            condition: f64::INFINITY,
        });
    }

    let mut design = DMatrix::<Complex64>::zeros(l, 2 * n);
    for c in 0..n {
        design.set_column(c, &(serving.column(c) * h[c]));
        design.set_column(n + c, &interfering.column(c));
    }
    let gram = design.ad_mul(&design);
    let rhs = design.ad_mul(&obs.y);

    let scale = DVector::from_iterator(2 * n, (0..2 * n).map(|i| 1.0 / gram[(i, i)].re.sqrt()));
    let equilibrated = DMatrix::from_fn(2 * n, 2 * n, |i, j| gram[(i, j)] * (scale[i] * scale[j]));
    let eigenvalues = equilibrated.clone().symmetric_eigenvalues();
    let (lo, hi) = eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularModel { condition });
    }

    let scaled_rhs =
        DVector::from_iterator(2 * n, rhs.iter().zip(scale.iter()).map(|(r, s)| r * *s));
    let solution = equilibrated
        .cholesky()
        .ok_or(Error::SingularModel { condition })?
        .solve(&scaled_rhs);
    let amplitude = params.pilot_power().sqrt();
    let params_hat = DVector::from_iterator(
        2 * n,
        solution
            .iter()
            .zip(scale.iter())
            .map(|(z, s)| z * (*s / amplitude)),
    );
    Ok(EstimationResult::estimate(
        params_hat.rows(0, n).into_owned(),
        Some(params_hat.rows(n, n).into_owned()),
    ))
}

/// Mean of `ĝ_k - g_k`: `r_k / h_k` for identical sequences, zero for
/// orthogonal ones.
pub fn bias_closed_form(
    ch: &ChannelRealization,
    scheme: PilotScheme,
    operator: Operator,
) -> Result<DVector<Complex64>> {
    let op = ch.operator(operator);
    check_invertible(op.h(), operator, MIN_CHANNEL_MAGNITUDE)?;
    Ok(match scheme {
        PilotScheme::Identical => op.r().component_div(op.h()),
        PilotScheme::Orthogonal => DVector::zeros(op.n_elements()),
    })
}

/// Per-entry estimation error variance `σ² / (L Pp |h_n|²)`, the diagonal
/// of the error covariance without the bias term. Identical for both schemes.
pub fn error_variance_closed_form(params: &SystemParams, h: &DVector<Complex64>) -> DVector<f64> {
    let scale = params.noise_power() / (params.n_pilots as f64 * params.pilot_power());
    h.map(|z| scale / z.norm_sqr())
}

/// Trace of the estimation error covariance, `‖b‖² + σ²/(L Pp) Σ 1/|h_n|²`.
pub fn cov_trace_closed_form(
    params: &SystemParams,
    ch: &ChannelRealization,
    scheme: PilotScheme,
    operator: Operator,
) -> Result<f64> {
    let bias = bias_closed_form(ch, scheme, operator)?;
    let noise_part: f64 = error_variance_closed_form(params, ch.operator(operator).h()).sum();
    Ok(bias.norm_squared() + noise_part)
}

/// Noise fed to the Monte Carlo pilot trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotNoise {
    /// No receiver noise; every trial is the same noiseless estimate.
    Silent,
    /// AWGN at the scenario noise power. Trial `t` draws from the stream
    /// keyed by `(seed, point, t)`, so two schemes evaluated at the same
    /// point see identical noise.
    Awgn { point: u64 },
}

/// Monte Carlo statistics of the estimation error `ĝ - g` for one fixed
/// channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct MseEstimate {
    pub n_trials: usize,
    /// Mean of `‖ĝ - g‖²`.
    pub mse: f64,
    /// Standard error of `mse`.
    pub mse_std_error: f64,
    pub mean_error: DVector<Complex64>,
    /// Per-entry sample variance `E|e_n - ē_n|²`.
    pub error_variance: DVector<f64>,
}

#[derive(Clone)]
struct Moments {
    count: usize,
    sum: DVector<Complex64>,
    sum_abs2: DVector<f64>,
    sum_norm2: f64,
    sum_norm4: f64,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            sum: DVector::zeros(n),
            sum_abs2: DVector::zeros(n),
            sum_norm2: 0.0,
            sum_norm4: 0.0,
        }
    }

    fn push(&mut self, err: &DVector<Complex64>) {
        let norm2 = err.norm_squared();
        self.count += 1;
        self.sum += err;
        self.sum_abs2 += err.map(|z| z.norm_sqr());
        self.sum_norm2 += norm2;
        self.sum_norm4 += norm2 * norm2;
    }

    fn merge(mut self, other: &Moments) -> Self {
        self.count += other.count;
        self.sum += &other.sum;
        self.sum_abs2 += &other.sum_abs2;
        self.sum_norm2 += other.sum_norm2;
        self.sum_norm4 += other.sum_norm4;
        self
    }

    fn finish(self) -> MseEstimate {
        let count = self.count as f64;
        let mean_error = self.sum / Complex64::from(count);
        let error_variance = DVector::from_iterator(
            mean_error.len(),
            self.sum_abs2
                .iter()
                .zip(mean_error.iter())
                .map(|(s, m)| (s / count - m.norm_sqr()).max(0.0)),
        );
        let mse = self.sum_norm2 / count;
        let spread = if self.count > 1 {
            ((self.sum_norm4 / count - mse * mse).max(0.0) * count / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        MseEstimate {
            n_trials: self.count,
            mse,
            mse_std_error: spread / count.sqrt(),
            mean_error,
            error_variance,
        }
    }
}

/// Averages `‖ĝ_k - g_k‖²` of the misspecified estimator over `n_trials`
/// noise draws for the fixed realization `ch`.
pub fn empirical_mse(
    params: &SystemParams,
    ch: &ChannelRealization,
    pair: &ConfigPair,
    operator: Operator,
    n_trials: usize,
    noise: PilotNoise,
) -> Result<MseEstimate> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    params.validate()?;
    check_pair(ch, pair)?;
    let op = ch.operator(operator);
    let serving = pair.serving(operator);
    let clean = noiseless_pilots(params, ch, pair, operator);
    let n_pilots = serving.n_pilots();
    let noise_power = params.noise_power();

    let trial = |t: usize| -> Result<DVector<Complex64>> {
        let y = match noise {
            PilotNoise::Silent => clean.clone(),
            PilotNoise::Awgn { point } => {
                let mut rng =
                    StreamKey::new(params.seed, Domain::PilotNoise, point, t as u64).rng();
                &clean + complex_gaussian_vector(&mut rng, n_pilots, noise_power)
            }
        };
        let obs = PilotObservation { y, operator };
        Ok(mml_estimate(params, &obs, serving, op.h())?.g_hat - op.g())
    };

    let n = ch.n_elements();
    let chunks: Vec<Moments> = (0..n_trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(n);
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                acc.push(&trial(t)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(chunks
        .iter()
        .fold(Moments::new(n), |acc, c| acc.merge(c))
        .finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build_identical, SequenceRole};
    use crate::model::OperatorChannels;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn vec(x: &[f64]) -> DVector<Complex64> {
        DVector::from_iterator(x.len(), x.iter().map(|&a| c(a)))
    }

    fn unit_params() -> SystemParams {
        SystemParams {
            n_elements: 1,
            n_pilots: 1,
            pilot_power_dbm: 0.0,
            data_power_dbm: 0.0,
            noise_power_dbm: 0.0,
            pathloss_ue_ris_db: 0.0,
            pathloss_ris_bs_db: 0.0,
            seed: 0,
        }
    }

    /// N = L = 1, h = 1, g = 0.5, q = 1, p = 0.2.
    fn scalar_case() -> (ChannelRealization, ConfigPair) {
        let op = OperatorChannels::new(vec(&[1.0]), vec(&[0.5]), vec(&[1.0]), vec(&[0.2])).unwrap();
        let ch = ChannelRealization::new(op.clone(), op).unwrap();
        let one = ConfigSequence::from_matrix(
            DMatrix::from_element(1, 1, c(1.0)),
            SequenceRole::Identical,
        );
        let pair = ConfigPair {
            scheme: PilotScheme::Identical,
            first: one.clone(),
            second: one,
        };
        (ch, pair)
    }

    #[test]
    fn scalar_pilot_and_estimate() {
        let params = unit_params();
        let (ch, pair) = scalar_case();
        let obs = simulate_pilot_rx(&params, &ch, &pair, Operator::First, &vec(&[0.0])).unwrap();
        assert!((obs.y[0] - c(0.7)).norm() < 1e-15);
        let est =
            mml_estimate(&params, &obs, &pair.first, ch.operator(Operator::First).h()).unwrap();
        assert!((est.g_hat[0] - c(0.7)).norm() < 1e-15);
        let bias = bias_closed_form(&ch, PilotScheme::Identical, Operator::First).unwrap();
        assert!((bias[0] - c(0.2)).norm() < 1e-15);
    }

    #[test]
    fn scalar_cov_trace() {
        let params = unit_params();
        let (ch, _) = scalar_case();
        let unbiased =
            cov_trace_closed_form(&params, &ch, PilotScheme::Orthogonal, Operator::First).unwrap();
        let biased =
            cov_trace_closed_form(&params, &ch, PilotScheme::Identical, Operator::First).unwrap();
        assert!((unbiased - 1.0).abs() < 1e-15);
        assert!((biased - 1.04).abs() < 1e-15);
    }

    #[test]
    fn no_cross_path_means_exact_model() {
        let params = unit_params();
        let op = OperatorChannels::new(
            vec(&[2.0, 1.0]),
            vec(&[0.3, -0.1]),
            vec(&[1.0, 1.0]),
            vec(&[0.0, 0.0]),
        )
        .unwrap();
        let ch = ChannelRealization::new(op.clone(), op).unwrap();
        let (b, _) = build_identical(2, 2).unwrap();
        let pair = ConfigPair {
            scheme: PilotScheme::Identical,
            first: b.clone(),
            second: b.clone(),
        };
        let obs =
            simulate_pilot_rx(&params, &ch, &pair, Operator::First, &DVector::zeros(2)).unwrap();
        let expected = b.matrix()
            * ch.operator(Operator::First)
                .h()
                .component_mul(ch.operator(Operator::First).g());
        assert!((obs.y.clone() - expected).norm() < 1e-15);
        let est = mml_estimate(&params, &obs, &b, ch.operator(Operator::First).h()).unwrap();
        assert!((est.g_hat - ch.operator(Operator::First).g()).norm() < 1e-15);
    }

    #[test]
    fn pure_noise_passes_through() {
        let params = unit_params();
        let zero = OperatorChannels::new(
            vec(&[1.0, 1.0]),
            vec(&[0.0, 0.0]),
            vec(&[1.0, 1.0]),
            vec(&[0.0, 0.0]),
        )
        .unwrap();
        let ch = ChannelRealization::new(zero.clone(), zero).unwrap();
        let pair = ConfigPair::build(PilotScheme::Identical, 3, 2).unwrap();
        let w = DVector::from_vec(vec![
            Complex64::new(0.1, -0.2),
            c(0.3),
            Complex64::new(0.0, 1.0),
        ]);
        let obs = simulate_pilot_rx(&params, &ch, &pair, Operator::Second, &w).unwrap();
        assert_eq!(obs.y, w);
        assert_eq!(obs.operator, Operator::Second);
    }

    #[test]
    fn zero_observation_zero_estimate() {
        let params = unit_params();
        let (b, _) = build_identical(4, 3).unwrap();
        let obs = PilotObservation {
            y: DVector::zeros(4),
            operator: Operator::First,
        };
        let est = mml_estimate(&params, &obs, &b, &vec(&[1.0, 2.0, 3.0])).unwrap();
        assert!(est.g_hat.iter().all(|z| *z == c(0.0)));
    }

    #[test]
    fn singular_h_rejected() {
        let params = unit_params();
        let (b, _) = build_identical(2, 2).unwrap();
        let obs = PilotObservation {
            y: DVector::zeros(2),
            operator: Operator::Second,
        };
        match mml_estimate(&params, &obs, &b, &vec(&[1.0, 0.0])) {
            Err(Error::NearSingularChannel {
                operator: 2,
                element: 1,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        let params = unit_params();
        let (ch, pair) = scalar_case();
        assert!(matches!(
            simulate_pilot_rx(&params, &ch, &pair, Operator::First, &DVector::zeros(2)),
            Err(Error::ShapeMismatch { .. })
        ));
        let obs = PilotObservation {
            y: DVector::zeros(3),
            operator: Operator::First,
        };
        assert!(mml_estimate(&params, &obs, &pair.first, &vec(&[1.0])).is_err());
    }

    #[test]
    fn orthogonal_bias_is_zero_and_no_cross_path_bias_is_zero() {
        let (ch, _) = scalar_case();
        let b = bias_closed_form(&ch, PilotScheme::Orthogonal, Operator::First).unwrap();
        assert_eq!(b[0], c(0.0));
        let op = OperatorChannels::new(vec(&[1.0]), vec(&[0.5]), vec(&[0.0]), vec(&[0.2])).unwrap();
        let ch = ChannelRealization::new(op.clone(), op).unwrap();
        let b = bias_closed_form(&ch, PilotScheme::Identical, Operator::First).unwrap();
        assert_eq!(b[0].norm(), 0.0);
    }

    #[test]
    fn silent_trials_reproduce_bias_energy() {
        let params = SystemParams {
            n_elements: 4,
            n_pilots: 8,
            ..Default::default()
        };
        let ch = crate::model::draw_channels(&params, 5).unwrap();
        let pair = ConfigPair::build(PilotScheme::Identical, 8, 4).unwrap();
        let est =
            empirical_mse(&params, &ch, &pair, Operator::First, 3, PilotNoise::Silent).unwrap();
        let floor = bias_closed_form(&ch, PilotScheme::Identical, Operator::First)
            .unwrap()
            .norm_squared();
        assert!(
            (est.mse / floor - 1.0).abs() < 1e-10,
            "{} vs {floor}",
            est.mse
        );
        assert_eq!(est.mse_std_error, 0.0);
        assert!(
            empirical_mse(&params, &ch, &pair, Operator::First, 0, PilotNoise::Silent).is_err()
        );
    }

    #[test]
    fn identical_sequences_make_joint_model_singular() {
        let params = unit_params();
        let (ch, pair) = {
            let p = SystemParams {
                n_elements: 3,
                n_pilots: 8,
                ..Default::default()
            };
            (
                crate::model::draw_channels(&p, 0).unwrap(),
                ConfigPair::build(PilotScheme::Identical, 8, 3).unwrap(),
            )
        };
        let obs =
            simulate_pilot_rx(&params, &ch, &pair, Operator::First, &DVector::zeros(8)).unwrap();
        assert!(matches!(
            joint_ml_estimate(&params, &obs, &pair, ch.operator(Operator::First).h()),
            Err(Error::SingularModel { .. })
        ));
    }
}
