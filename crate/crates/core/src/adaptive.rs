//! Runtime subband adaptive filters.
//!
//! [`NsafFilter`] is the fixed step-size NSAF:
//!
//! ```text
//! e_i(k) = d_i(k) − u_iᵀ(k)·w(k−1)
//! w(k)   = w(k−1) + μ·Σ_i e_i(k)·u_i(k) / (δ + ‖u_i(k)‖²)
//! ```
//!
//! [`JosrFilter`] replaces `μ/(δ + ‖u_i‖²)` with a per-subband gain chosen to
//! minimize the propagated mean-square deviation:
//!
//! ```text
//! g(k)    = MSD(k−1) + M·σ̂_q²(k−1)
//! π_i(k)  = g(k) / ((M+2)·σ̂_i²(k)·g(k) + M·σ_ηi²)
//! w(k)    = w(k−1) + Σ_i π_i(k)·e_i(k)·u_i(k)
//! MSD(k)  = [1 − Σ_i π_i(k)·σ̂_i²(k)]·g(k)
//! M·σ̂_q²(k) = ‖w(k) − w(k−1)‖²
//! ```
//!
//! Fed with one-subband frames from the identity bank these are exactly NLMS
//! and JO-NLMS.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filterbank::SubbandFrame;

#[derive(Debug, Error, PartialEq)]
pub enum AdaptError {
    #[error("frame has {got_subbands} subbands of {got_taps} taps, filter expects {subbands} x {taps}")]
    FrameShape {
        subbands: usize,
        taps: usize,
        got_subbands: usize,
        got_taps: usize,
    },
    #[error("subband {subband}: zero regressor energy with zero regularization")]
    ZeroRegressorEnergy { subband: usize },
    #[error("weight vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("step size must be finite and positive, got {0}")]
    BadStepSize(f64),
    #[error("regularization must be finite and non-negative, got {0}")]
    BadRegularization(f64),
    #[error("noise variance must be finite and non-negative, got {0}")]
    BadNoiseVariance(f64),
    #[error("filter needs at least one tap and one subband")]
    Empty,
}

/// Tap-weight vector `w(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(taps: usize) -> Self {
        Self(vec![0.0; taps])
    }

    pub fn from_vec(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// One float per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for w in &self.0 {
            writeln!(out, "{w:e}")?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, std::num::ParseFloatError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `σ̂_u_i² = u_iᵀu_i / M`.
pub fn estimate_subband_variance(regressor: &[f64]) -> f64 {
    if regressor.is_empty() {
        return 0.0;
    }
    dot(regressor, regressor) / regressor.len() as f64
}

/// `σ̂_q² = ‖w_now − w_prev‖² / M`.
pub fn estimate_sigma_q(w_now: &[f64], w_prev: &[f64]) -> Result<f64, AdaptError> {
    if w_now.len() != w_prev.len() {
        return Err(AdaptError::LengthMismatch(w_now.len(), w_prev.len()));
    }
    if w_now.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = w_now.iter().zip(w_prev).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / w_now.len() as f64)
}

/// What one adaptation step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Decimated a priori errors `e_i(k)`.
    pub errors: Vec<f64>,
    /// Per-subband gains: `π_i(k)` for JOSR, `μ/(δ + ‖u_i‖²)` for NSAF.
    pub gains: Vec<f64>,
    /// `g(k)` (JOSR only).
    pub g: Option<f64>,
    /// Updated internal `MSD(k)` (JOSR only).
    pub msd: Option<f64>,
    /// `Σ_i π_i(k)·σ̂_i²(k)`, so that the MSD contraction factor is
    /// `β̂(k) = 1 − shrink` (JOSR only). Kept separately because `1 − shrink`
    /// rounds to 1 when the sum is below machine epsilon.
    pub shrink: Option<f64>,
    /// Subbands whose gain denominator vanished and were skipped.
    pub skipped: Vec<usize>,
}

impl StepReport {
    pub fn beta(&self) -> Option<f64> {
        self.shrink.map(|s| 1.0 - s)
    }
}

/// Common stepping interface of the subband filters.
pub trait AdaptiveFilter {
    fn step(&mut self, frame: &SubbandFrame) -> Result<StepReport, AdaptError>;
    fn weights(&self) -> &WeightVector;
    fn subbands(&self) -> usize;
    fn taps(&self) -> usize {
        self.weights().len()
    }
}

fn check_frame(frame: &SubbandFrame, subbands: usize, taps: usize) -> Result<(), AdaptError> {
    let ok = frame.desired.len() == subbands
        && frame.regressors.len() == subbands
        && frame.regressors.iter().all(|r| r.len() == taps);
    if ok {
        Ok(())
    } else {
        Err(AdaptError::FrameShape {
            subbands,
            taps,
            got_subbands: frame.desired.len(),
            got_taps: frame.taps(),
        })
    }
}

fn errors(frame: &SubbandFrame, w: &[f64]) -> Vec<f64> {
    frame
        .regressors
        .iter()
        .zip(&frame.desired)
        .map(|(u, d)| d - dot(u, w))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsafConfig {
    pub mu: f64,
    pub delta: f64,
}

impl NsafConfig {
    pub fn new(mu: f64, delta: f64) -> Result<Self, AdaptError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(AdaptError::BadStepSize(mu));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(AdaptError::BadRegularization(delta));
        }
        Ok(Self { mu, delta })
    }
}

/// Fixed step-size normalized subband adaptive filter.
#[derive(Debug, Clone)]
pub struct NsafFilter {
    weights: WeightVector,
    config: NsafConfig,
    subbands: usize,
}

impl NsafFilter {
    pub fn new(taps: usize, subbands: usize, config: NsafConfig) -> Result<Self, AdaptError> {
        if taps == 0 || subbands == 0 {
            return Err(AdaptError::Empty);
        }
        let config = NsafConfig::new(config.mu, config.delta)?;
        Ok(Self {
            weights: WeightVector::zeros(taps),
            config,
            subbands,
        })
    }

    pub fn config(&self) -> NsafConfig {
        self.config
    }
}

impl AdaptiveFilter for NsafFilter {
    fn step(&mut self, frame: &SubbandFrame) -> Result<StepReport, AdaptError> {
        check_frame(frame, self.subbands, self.weights.len())?;
        let errors = errors(frame, &self.weights.0);
        let mut gains = Vec::with_capacity(self.subbands);
        for (i, u) in frame.regressors.iter().enumerate() {
            let denom = self.config.delta + dot(u, u);
            if denom == 0.0 {
                return Err(AdaptError::ZeroRegressorEnergy { subband: i });
            }
            gains.push(self.config.mu / denom);
        }
        for ((u, e), gain) in frame.regressors.iter().zip(&errors).zip(&gains) {
            let scale = gain * e;
            for (w, x) in self.weights.0.iter_mut().zip(u) {
                *w += scale * x;
            }
        }
        Ok(StepReport {
            errors,
            gains,
            g: None,
            msd: None,
            shrink: None,
            skipped: Vec::new(),
        })
    }

    fn weights(&self) -> &WeightVector {
        &self.weights
    }

    fn subbands(&self) -> usize {
        self.subbands
    }
}

/// How the full-band noise variance enters the JOSR gain denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// `σ_ηi² = σ_η²/N`, the per-subband noise variance.
    #[default]
    PerSubband,
    /// `σ_η²` used unscaled in every subband.
    FullBand,
}

impl NoiseScaling {
    pub fn subband_variance(self, noise_variance: f64, subbands: usize) -> f64 {
        match self {
            Self::PerSubband => noise_variance / subbands as f64,
            Self::FullBand => noise_variance,
        }
    }
}

/// NSAF with jointly optimized step size and regularization.
#[derive(Debug, Clone)]
pub struct JosrFilter {
    weights: WeightVector,
    msd: f64,
    m_sigma_q2: f64,
    noise_variance_subband: f64,
    subbands: usize,
    delta_w: Vec<f64>,
}

impl JosrFilter {
    /// Cold start: `w(0) = 0`, `MSD(0) = 1`, `M·σ̂_q²(0) = 0`.
    pub fn new(
        taps: usize,
        subbands: usize,
        noise_variance: f64,
        scaling: NoiseScaling,
    ) -> Result<Self, AdaptError> {
        if taps == 0 || subbands == 0 {
            return Err(AdaptError::Empty);
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(AdaptError::BadNoiseVariance(noise_variance));
        }
        Ok(Self {
            weights: WeightVector::zeros(taps),
            msd: 1.0,
            m_sigma_q2: 0.0,
            noise_variance_subband: scaling.subband_variance(noise_variance, subbands),
            subbands,
            delta_w: vec![0.0; taps],
        })
    }

    pub fn msd(&self) -> f64 {
        self.msd
    }

    /// `M·σ̂_q²` from the most recent step.
    pub fn m_sigma_q2(&self) -> f64 {
        self.m_sigma_q2
    }

    pub fn noise_variance_subband(&self) -> f64 {
        self.noise_variance_subband
    }

    /// Overrides the internal state; mostly for tests and warm starts.
    pub fn set_state(&mut self, msd: f64, m_sigma_q2: f64) {
        self.msd = msd.max(0.0);
        self.m_sigma_q2 = m_sigma_q2.max(0.0);
    }
}

impl AdaptiveFilter for JosrFilter {
    fn step(&mut self, frame: &SubbandFrame) -> Result<StepReport, AdaptError> {
        let taps = self.weights.len();
        check_frame(frame, self.subbands, taps)?;
        let errors = errors(frame, &self.weights.0);
        let g = self.msd + self.m_sigma_q2;
        let m = taps as f64;

        let mut gains = Vec::with_capacity(self.subbands);
        let mut skipped = Vec::new();
        let mut shrink = 0.0;
        for (i, u) in frame.regressors.iter().enumerate() {
            let var = estimate_subband_variance(u);
            let denom = (m + 2.0) * var * g + m * self.noise_variance_subband;
            let gain = if denom > 0.0 {
                g / denom
            } else {
                skipped.push(i);
                0.0
            };
            shrink += gain * var;
            gains.push(gain);
        }

        self.delta_w.iter_mut().for_each(|x| *x = 0.0);
        for ((u, e), gain) in frame.regressors.iter().zip(&errors).zip(&gains) {
            let scale = gain * e;
            for (dw, x) in self.delta_w.iter_mut().zip(u) {
                *dw += scale * x;
            }
        }
        for (w, dw) in self.weights.0.iter_mut().zip(&self.delta_w) {
            *w += dw;
        }

        self.msd = ((1.0 - shrink) * g).max(0.0);
        self.m_sigma_q2 = dot(&self.delta_w, &self.delta_w);
        Ok(StepReport {
            errors,
            gains,
            g: Some(g),
            msd: Some(self.msd),
            shrink: Some(shrink),
            skipped,
        })
    }

    fn weights(&self) -> &WeightVector {
        &self.weights
    }

    fn subbands(&self) -> usize {
        self.subbands
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(regressors: Vec<Vec<f64>>, desired: Vec<f64>) -> SubbandFrame {
        SubbandFrame { k: 1, regressors, desired }
    }

    #[test]
    fn variance_estimator() {
        assert_eq!(estimate_subband_variance(&[0.0; 8]), 0.0);
        assert_eq!(estimate_subband_variance(&[1.0; 4]), 1.0);
    }

    #[test]
    fn sigma_q_estimator() {
        let w = [0.5, -1.0, 2.0, 3.0];
        assert_eq!(estimate_sigma_q(&w, &w).unwrap(), 0.0);
        let shifted: Vec<f64> = w.iter().map(|x| x + 1.0).collect();
        assert_eq!(estimate_sigma_q(&shifted, &w).unwrap(), 1.0);
        assert_eq!(estimate_sigma_q(&w[..2], &w), Err(AdaptError::LengthMismatch(2, 4)));
    }

    #[test]
    fn nsaf_hand_example() {
        let mut f = NsafFilter::new(2, 1, NsafConfig::new(1.0, 0.0).unwrap()).unwrap();
        let r = f.step(&frame(vec![vec![1.0, 0.0]], vec![1.0])).unwrap();
        assert_eq!(r.errors, vec![1.0]);
        assert_eq!(f.weights().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn nsaf_zero_error_leaves_weights() {
        let mut f = NsafFilter::new(3, 2, NsafConfig::new(0.5, 0.1).unwrap()).unwrap();
        f.step(&frame(vec![vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]], vec![0.0, 0.0])).unwrap();
        assert_eq!(f.weights().as_slice(), &[0.0; 3]);
    }

    #[test]
    fn nsaf_zero_energy_hazard_names_subband() {
        let mut f = NsafFilter::new(2, 2, NsafConfig::new(1.0, 0.0).unwrap()).unwrap();
        let err = f.step(&frame(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]));
        assert_eq!(err, Err(AdaptError::ZeroRegressorEnergy { subband: 1 }));
    }

    #[test]
    fn config_validation() {
        assert!(NsafConfig::new(0.0, 0.0).is_err());
        assert!(NsafConfig::new(1.0, -1.0).is_err());
        assert!(JosrFilter::new(4, 2, -1.0, NoiseScaling::PerSubband).is_err());
        let mut f = NsafFilter::new(2, 1, NsafConfig::new(1.0, 0.0).unwrap()).unwrap();
        assert!(matches!(
            f.step(&frame(vec![vec![1.0, 0.0, 0.0]], vec![1.0])),
            Err(AdaptError::FrameShape { .. })
        ));
    }

    #[test]
    fn josr_with_vanishing_g_does_nothing() {
        let mut f = JosrFilter::new(3, 2, 0.1, NoiseScaling::PerSubband).unwrap();
        f.set_state(0.0, 0.0);
        let r = f.step(&frame(vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]], vec![5.0, -5.0])).unwrap();
        assert_eq!(r.gains, vec![0.0, 0.0]);
        assert_eq!(r.msd, Some(0.0));
        assert!(r.skipped.is_empty());
        assert_eq!(f.weights().as_slice(), &[0.0; 3]);
    }

    #[test]
    fn josr_noiseless_zero_g_is_skipped_not_fatal() {
        let mut f = JosrFilter::new(2, 1, 0.0, NoiseScaling::PerSubband).unwrap();
        f.set_state(0.0, 0.0);
        let r = f.step(&frame(vec![vec![1.0, 1.0]], vec![1.0])).unwrap();
        assert_eq!(r.skipped, vec![0]);
        assert_eq!(r.gains, vec![0.0]);
    }

    #[test]
    fn josr_first_step_by_hand() {
        // M = 2, N = 1, σ_η² = 0.5, u = (1, 1), d = 2.
        let mut f = JosrFilter::new(2, 1, 0.5, NoiseScaling::PerSubband).unwrap();
        let r = f.step(&frame(vec![vec![1.0, 1.0]], vec![2.0])).unwrap();
        // g = 1, σ̂² = 1, π = 1 / (4·1·1 + 2·0.5) = 0.2
        assert_eq!(r.g, Some(1.0));
        assert!((r.gains[0] - 0.2).abs() < 1e-15);
        assert!((f.weights().as_slice()[0] - 0.4).abs() < 1e-15);
        assert!((f.msd() - 0.8).abs() < 1e-15);
        assert!((f.m_sigma_q2() - 0.32).abs() < 1e-15);
    }

    #[test]
    fn noise_scaling_switch() {
        let a = JosrFilter::new(4, 8, 0.8, NoiseScaling::PerSubband).unwrap();
        let b = JosrFilter::new(4, 8, 0.8, NoiseScaling::FullBand).unwrap();
        assert_eq!(a.noise_variance_subband(), 0.1);
        assert_eq!(b.noise_variance_subband(), 0.8);
    }

    #[test]
    fn weight_text_round_trip() {
        let w = WeightVector::from_vec(vec![1.5, -2.25e-9, 0.0]);
        let mut buf = Vec::new();
        w.write_text(&mut buf).unwrap();
        assert_eq!(WeightVector::from_text(std::str::from_utf8(&buf).unwrap()).unwrap(), w);
    }

    fn arb_frame(subbands: usize, taps: usize) -> impl Strategy<Value = SubbandFrame> {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, taps), subbands),
            prop::collection::vec(-3.0f64..3.0, subbands),
        )
            .prop_map(|(regressors, desired)| SubbandFrame { k: 1, regressors, desired })
    }

    proptest! {
        #[test]
        fn josr_gain_and_bracket_invariants(
            f in arb_frame(4, 6),
            msd in 0.0f64..2.0,
            q in 0.0f64..1.0,
            noise in 0.0f64..1.0,
        ) {
            prop_assume!(f.regressors.iter().all(|u| estimate_subband_variance(u) > 1e-6));
            let mut josr = JosrFilter::new(6, 4, noise, NoiseScaling::PerSubband).unwrap();
            josr.set_state(msd, q);
            let r = josr.step(&f).unwrap();
            let g = msd + q;
            for &p in &r.gains {
                prop_assert!(p >= 0.0);
                prop_assert_eq!(p == 0.0, g == 0.0);
            }
            if g > 0.0 {
                let beta = r.beta().unwrap();
                prop_assert!((0.0..1.0).contains(&beta), "beta {}", beta);
                prop_assert!(r.shrink.unwrap() <= 4.0 / 8.0 + 1e-12);
            }
            prop_assert!(josr.msd() >= 0.0);
        }

        #[test]
        fn josr_gains_fall_with_noise(f in arb_frame(3, 5), noise in 0.01f64..1.0, bump in 0.01f64..1.0) {
            prop_assume!(f.regressors.iter().all(|u| estimate_subband_variance(u) > 1e-6));
            let mut lo = JosrFilter::new(5, 3, noise, NoiseScaling::PerSubband).unwrap();
            let mut hi = JosrFilter::new(5, 3, noise + bump, NoiseScaling::PerSubband).unwrap();
            let a = lo.step(&f).unwrap();
            let b = hi.step(&f).unwrap();
            for (x, y) in a.gains.iter().zip(&b.gains) {
                prop_assert!(y < x);
            }
        }

        #[test]
        fn steps_are_deterministic(f in arb_frame(2, 4)) {
            let mut a = JosrFilter::new(4, 2, 0.1, NoiseScaling::PerSubband).unwrap();
            let mut b = a.clone();
            prop_assert_eq!(a.step(&f).unwrap(), b.step(&f).unwrap());
            let mut c = NsafFilter::new(4, 2, NsafConfig::new(0.7, 0.01).unwrap()).unwrap();
            let mut d = c.clone();
            prop_assert_eq!(c.step(&f).unwrap(), d.step(&f).unwrap());
        }
    }
}
