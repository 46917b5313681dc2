//! Closed-form mean-square-deviation model of the NSAF under a random-walk
//! system model `w_o(k) = w_o(k−1) + q(k)`, `E[qqᵀ] = σ_q²·I`.
//!
//! With `A = Σσ_i²/(δ+Mσ_i²)`, `B = Σ(M+2)σ_i⁴/(δ+Mσ_i²)²` and
//! `C = Σ Mσ_i²σ_ηi²/(δ+Mσ_i²)²` the fixed step-size NSAF obeys
//!
//! ```text
//! MSD(k) = ħ(μ,δ)·MSD(k−1) + φ(μ,δ)
//! ħ = 1 − 2μA + μ²B
//! φ = ħ·Mσ_q² + μ²C
//! ```
//!
//! from which the optimal and stability-limiting step sizes follow. The JOSR
//! recursion and its contraction factor `β(k)` are evaluated here as well.

use std::f64::consts::PI;

use thiserror::Error;

use crate::filterbank::AnalysisBank;
use crate::signal::EchoPath;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("no subbands")]
    NoSubbands,
    #[error("subband {subband}: δ + M·σ_u² vanishes")]
    ZeroDenominator { subband: usize },
    #[error("variances must be finite and non-negative")]
    BadVariance,
    #[error("both σ_q² and the noise variance are zero; every step size gives φ = 0")]
    FlatMisadjustment,
    #[error("β_max must lie in [0, 1), got {0}")]
    BadBetaMax(f64),
    #[error("β(k) must lie in (0, 1], got {0}")]
    BadBeta(f64),
    #[error("iteration index must be at least 1")]
    ZeroIteration,
}

/// Second-order statistics feeding every closed-form expression.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandStats {
    /// `σ_u_i²` per subband.
    pub sigma_u2: Vec<f64>,
    /// `σ_ηi²`, the noise variance seen by each subband.
    pub sigma_eta2_subband: f64,
    /// Random-walk variance `σ_q²` per tap.
    pub sigma_q2: f64,
    /// Adaptive filter length `M`.
    pub taps: usize,
}

impl SubbandStats {
    pub fn subbands(&self) -> usize {
        self.sigma_u2.len()
    }

    fn validate(&self) -> Result<(), TheoryError> {
        if self.sigma_u2.is_empty() {
            return Err(TheoryError::NoSubbands);
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.sigma_u2.iter().all(|&v| ok(v)) && ok(self.sigma_eta2_subband) && ok(self.sigma_q2)) {
            return Err(TheoryError::BadVariance);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub mu: f64,
    pub delta: f64,
}

impl StepParams {
    pub fn new(mu: f64, delta: f64) -> Self {
        Self { mu, delta }
    }
}

/// `MSD(k)` for `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdTrajectory {
    pub values: Vec<f64>,
}

impl MsdTrajectory {
    /// `10·log10(MSD/‖w_o‖²)` per entry.
    pub fn nmsd_db(&self, reference_energy: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| 10.0 * (v / reference_energy).max(1e-30).log10())
            .collect()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("trajectory holds MSD(0)")
    }
}

struct Moments {
    a: f64,
    b: f64,
    c: f64,
}

fn moments(stats: &SubbandStats, delta: f64) -> Result<Moments, TheoryError> {
    stats.validate()?;
    let m = stats.taps as f64;
    let mut out = Moments { a: 0.0, b: 0.0, c: 0.0 };
    for (i, &s) in stats.sigma_u2.iter().enumerate() {
        let den = delta + m * s;
        if den == 0.0 {
            return Err(TheoryError::ZeroDenominator { subband: i });
        }
        out.a += s / den;
        out.b += (m + 2.0) * s * s / (den * den);
        out.c += m * s * stats.sigma_eta2_subband / (den * den);
    }
    Ok(out)
}

/// Convergence factor `ħ(μ, δ)`.
pub fn hbar(stats: &SubbandStats, params: StepParams) -> Result<f64, TheoryError> {
    let mo = moments(stats, params.delta)?;
    let mu = params.mu;
    Ok(1.0 - 2.0 * mu * mo.a + mu * mu * mo.b)
}

/// Misadjustment term `φ(μ, δ)`.
pub fn phi(stats: &SubbandStats, params: StepParams) -> Result<f64, TheoryError> {
    let h = hbar(stats, params)?;
    let mo = moments(stats, params.delta)?;
    Ok(h * stats.taps as f64 * stats.sigma_q2 + params.mu * params.mu * mo.c)
}

/// Iterates `MSD(k) = ħ·MSD(k−1) + φ` with frozen statistics.
pub fn msd_recursion(
    stats: &SubbandStats,
    params: StepParams,
    msd0: f64,
    steps: usize,
) -> Result<MsdTrajectory, TheoryError> {
    let h = hbar(stats, params)?;
    let p = phi(stats, params)?;
    let mut values = Vec::with_capacity(steps + 1);
    let mut msd = msd0;
    values.push(msd);
    for _ in 0..steps {
        msd = h * msd + p;
        values.push(msd);
    }
    Ok(MsdTrajectory { values })
}

/// Step size minimizing `ħ`, i.e. the fastest mean-square convergence: `A/B`.
pub fn optimal_step_convergence(stats: &SubbandStats, delta: f64) -> Result<f64, TheoryError> {
    let mo = moments(stats, delta)?;
    Ok(mo.a / mo.b)
}

/// The open interval of step sizes with `|ħ| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRange {
    pub upper: f64,
}

impl StabilityRange {
    pub fn contains(&self, mu: f64) -> bool {
        mu > 0.0 && mu < self.upper
    }
}

pub fn stability_range(stats: &SubbandStats, delta: f64) -> Result<StabilityRange, TheoryError> {
    Ok(StabilityRange {
        upper: 2.0 * optimal_step_convergence(stats, delta)?,
    })
}

/// Step size minimizing `φ`:
/// `σ_q²·A / Σ[(M+2)σ_q²σ_i⁴ + σ_i²σ_ηi²]/(δ+Mσ_i²)²`.
pub fn optimal_step_misadjustment(stats: &SubbandStats, delta: f64) -> Result<f64, TheoryError> {
    let mo = moments(stats, delta)?;
    let m = stats.taps as f64;
    let den = stats.sigma_q2 * mo.b + mo.c / m;
    if den == 0.0 {
        return Err(TheoryError::FlatMisadjustment);
    }
    Ok(stats.sigma_q2 * mo.a / den)
}

/// JOSR contraction factor `β(k)`, substituting `E[e_a,i²(k)] = MSD(k−1)·σ_u_i²`.
pub fn beta(stats: &SubbandStats, msd_prev: f64) -> Result<f64, TheoryError> {
    stats.validate()?;
    let m = stats.taps as f64;
    let mut sum = 0.0;
    for (i, &s) in stats.sigma_u2.iter().enumerate() {
        let num = msd_prev * s + m * stats.sigma_q2 * s;
        let den = (m + 2.0) * num + m * stats.sigma_eta2_subband;
        if den == 0.0 {
            return Err(TheoryError::ZeroDenominator { subband: i });
        }
        sum += num / den;
    }
    Ok(1.0 - sum)
}

/// Closed-form propagation of the JOSR MSD:
/// `MSD(k) = β(k)·[MSD(k−1) + Mσ_q²]`.
pub fn josr_msd_recursion(
    stats: &SubbandStats,
    msd0: f64,
    steps: usize,
) -> Result<MsdTrajectory, TheoryError> {
    let m_q = stats.taps as f64 * stats.sigma_q2;
    let mut values = Vec::with_capacity(steps + 1);
    let mut msd = msd0;
    values.push(msd);
    for _ in 0..steps {
        msd = beta(stats, msd)? * (msd + m_q);
        values.push(msd);
    }
    Ok(MsdTrajectory { values })
}

/// Right-hand side of the σ_q² stability condition at iteration `k`:
/// `(1 − β(k))/(M·β(k)) · β_max^{k−1} · MSD(0)`.
pub fn sigma_q_stability_bound(
    taps: usize,
    beta_k: f64,
    beta_max: f64,
    msd0: f64,
    k: u32,
) -> Result<f64, TheoryError> {
    if k == 0 {
        return Err(TheoryError::ZeroIteration);
    }
    if !(beta_k > 0.0 && beta_k <= 1.0) {
        return Err(TheoryError::BadBeta(beta_k));
    }
    if !(0.0..1.0).contains(&beta_max) {
        return Err(TheoryError::BadBetaMax(beta_max));
    }
    Ok((1.0 - beta_k) / (taps as f64 * beta_k) * beta_max.powi(k as i32 - 1) * msd0)
}

/// Steady-state MSD bound `M·σ_q²·β_max/(1 − β_max)`.
pub fn steady_state_bound(sigma_q2: f64, taps: usize, beta_max: f64) -> Result<f64, TheoryError> {
    if !(0.0..1.0).contains(&beta_max) {
        return Err(TheoryError::BadBetaMax(beta_max));
    }
    Ok(taps as f64 * sigma_q2 * beta_max / (1.0 - beta_max))
}

/// Power spectral density of a full-band input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSpectrum {
    White { variance: f64 },
    Ar1 { pole: f64, innovation_variance: f64 },
}

impl InputSpectrum {
    pub fn psd(&self, omega: f64) -> f64 {
        match *self {
            Self::White { variance } => variance,
            Self::Ar1 { pole, innovation_variance } => {
                innovation_variance / (1.0 + pole * pole - 2.0 * pole * omega.cos())
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::White { variance } => variance,
            Self::Ar1 { pole, innovation_variance } => innovation_variance / (1.0 - pole * pole),
        }
    }

    /// `(1/π)∫_0^π |G(e^{jω})|² S(ω) dω` for a real FIR `g`, trapezoid rule.
    pub fn filtered_power(&self, taps: &[f64], grid: usize) -> f64 {
        if let Self::White { variance } = *self {
            return variance * taps.iter().map(|x| x * x).sum::<f64>();
        }
        let grid = grid.max(2);
        let mut total = 0.0;
        for j in 0..=grid {
            let omega = PI * j as f64 / grid as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, c) in taps.iter().enumerate() {
                re += c * (omega * n as f64).cos();
                im -= c * (omega * n as f64).sin();
            }
            let weight = if j == 0 || j == grid { 0.5 } else { 1.0 };
            total += weight * (re * re + im * im) * self.psd(omega);
        }
        total / grid as f64
    }
}

/// Stationary predictor inputs for a bank driven by `spectrum`, with the
/// noise variance implied by `snr_db` against the echo through `path`.
pub fn stats_for(
    bank: &AnalysisBank,
    spectrum: InputSpectrum,
    path: &EchoPath,
    snr_db: f64,
    noise_per_subband: impl Fn(f64, usize) -> f64,
    taps: usize,
) -> SubbandStats {
    const GRID: usize = 4096;
    let sigma_u2 = bank
        .filters()
        .iter()
        .map(|h| spectrum.filtered_power(h, GRID))
        .collect();
    let echo_power = spectrum.filtered_power(path.taps(), GRID);
    let noise = echo_power * 10f64.powf(-snr_db / 10.0);
    SubbandStats {
        sigma_u2,
        sigma_eta2_subband: noise_per_subband(noise, bank.subbands()),
        sigma_q2: 0.0,
        taps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_band(m: usize, noise: f64, q: f64) -> SubbandStats {
        SubbandStats { sigma_u2: vec![1.0], sigma_eta2_subband: noise, sigma_q2: q, taps: m }
    }

    #[test]
    fn hbar_at_zero_step_is_one() {
        let s = SubbandStats { sigma_u2: vec![0.3, 2.0], sigma_eta2_subband: 0.1, sigma_q2: 0.01, taps: 16 };
        assert_eq!(hbar(&s, StepParams::new(0.0, 0.5)).unwrap(), 1.0);
    }

    #[test]
    fn hbar_hand_case() {
        // N = 1, σ² = 1, δ = 0, M = 2: ħ = 1 − μ + μ².
        let s = one_band(2, 0.0, 0.0);
        for mu in [0.0, 0.25, 0.5, 1.3] {
            let h = hbar(&s, StepParams::new(mu, 0.0)).unwrap();
            assert!((h - (1.0 - mu + mu * mu)).abs() < 1e-15);
        }
        assert!((optimal_step_convergence(&s, 0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phi_hand_case() {
        let s = one_band(2, 1.0, 0.0);
        for mu in [0.0, 0.5, 2.0] {
            let p = phi(&s, StepParams::new(mu, 0.0)).unwrap();
            assert!((p - mu * mu / 2.0).abs() < 1e-15);
        }
        assert_eq!(phi(&one_band(8, 0.0, 0.0), StepParams::new(0.7, 0.0)).unwrap(), 0.0);
        assert_eq!(phi(&one_band(8, 0.5, 0.0), StepParams::new(0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_denominator_is_reported() {
        let s = SubbandStats { sigma_u2: vec![1.0, 0.0], sigma_eta2_subband: 0.0, sigma_q2: 0.0, taps: 4 };
        assert_eq!(hbar(&s, StepParams::new(1.0, 0.0)), Err(TheoryError::ZeroDenominator { subband: 1 }));
    }

    #[test]
    fn recursion_limits() {
        let s = one_band(8, 0.2, 0.001);
        let flat = msd_recursion(&one_band(8, 0.2, 0.0), StepParams::new(0.0, 0.0), 0.7, 50).unwrap();
        assert!(flat.values.iter().all(|&v| v == 0.7));

        let params = StepParams::new(0.6, 0.1);
        let h = hbar(&s, params).unwrap();
        let p = phi(&s, params).unwrap();
        let traj = msd_recursion(&s, params, 1.0, 2000).unwrap();
        assert_eq!(traj.values.len(), 2001);
        assert!((traj.last() - p / (1.0 - h)).abs() < 1e-9);
    }

    #[test]
    fn optimal_steps_closed_forms() {
        for n in [1, 2, 8] {
            let s = SubbandStats { sigma_u2: vec![0.4; n], sigma_eta2_subband: 0.1, sigma_q2: 0.0, taps: 30 };
            let mu = optimal_step_convergence(&s, 0.0).unwrap();
            assert!((mu - 30.0 / 32.0).abs() < 1e-12);
            assert_eq!(optimal_step_misadjustment(&s, 0.0).unwrap(), 0.0);
        }
        let big = SubbandStats { sigma_u2: vec![1.0; 8], sigma_eta2_subband: 0.0, sigma_q2: 0.0, taps: 4096 };
        assert!((optimal_step_convergence(&big, 0.0).unwrap() - 1.0).abs() < 1e-3);
        assert!((stability_range(&big, 0.0).unwrap().upper - 2.0).abs() < 2e-3);
        let small = SubbandStats { taps: 2, ..big.clone() };
        assert!((stability_range(&small, 0.0).unwrap().upper - 1.0).abs() < 1e-15);
    }

    #[test]
    fn misadjustment_optimum_without_noise_is_convergence_optimum() {
        let s = SubbandStats { sigma_u2: vec![0.2, 1.5, 0.7], sigma_eta2_subband: 0.0, sigma_q2: 1e-4, taps: 20 };
        let a = optimal_step_misadjustment(&s, 0.3).unwrap();
        let b = optimal_step_convergence(&s, 0.3).unwrap();
        assert!((a - b).abs() < 1e-12);
        let flat = SubbandStats { sigma_q2: 0.0, ..s };
        assert_eq!(optimal_step_misadjustment(&flat, 0.3), Err(TheoryError::FlatMisadjustment));
    }

    #[test]
    fn beta_cases() {
        let noiseless = SubbandStats { sigma_u2: vec![0.5, 2.0, 1.0], sigma_eta2_subband: 0.0, sigma_q2: 0.01, taps: 10 };
        for msd in [0.01, 1.0, 5.0] {
            assert!((beta(&noiseless, msd).unwrap() - (1.0 - 3.0 / 12.0)).abs() < 1e-15);
        }
        let loud = SubbandStats { sigma_eta2_subband: 1e12, ..noiseless.clone() };
        let b = beta(&loud, 1.0).unwrap();
        assert!(b < 1.0 && b > 1.0 - 1e-9);

        let echo = SubbandStats { sigma_u2: vec![0.3, 0.9, 0.1, 1.2, 0.5, 0.8, 0.2, 1.0], sigma_eta2_subband: 1e-3, sigma_q2: 1e-6, taps: 512 };
        let b = beta(&echo, 0.2).unwrap();
        assert!((1.0 - 8.0 / 514.0..1.0).contains(&b));
    }

    #[test]
    fn stability_bound_shape() {
        let b = sigma_q_stability_bound(4, 0.9, 0.9, 2.0, 1).unwrap();
        assert!((b - 0.1 / (4.0 * 0.9) * 2.0).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            let v = sigma_q_stability_bound(4, 0.9, 0.95, 1.0, k).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for beta_k in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let v = sigma_q_stability_bound(16, beta_k, 0.5, 1.0, 3).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(sigma_q_stability_bound(4, 0.9, 1.0, 1.0, 1).is_err());
        assert!(sigma_q_stability_bound(4, 0.9, 0.9, 1.0, 0).is_err());
    }

    #[test]
    fn steady_state_bound_cases() {
        assert_eq!(steady_state_bound(0.0, 512, 0.9).unwrap(), 0.0);
        assert_eq!(steady_state_bound(1.0, 2, 0.5).unwrap(), 2.0);
        assert_eq!(steady_state_bound(1.0, 2, 1.0), Err(TheoryError::BadBetaMax(1.0)));
    }

    #[test]
    fn josr_recursion_is_monotone_when_stationary() {
        let s = SubbandStats { sigma_u2: vec![1.0, 0.5, 0.25, 0.1], sigma_eta2_subband: 1e-3, sigma_q2: 0.0, taps: 64 };
        let t = josr_msd_recursion(&s, 1.0, 500).unwrap();
        assert!(t.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ar1_spectrum_integrates_to_variance() {
        let s = InputSpectrum::Ar1 { pole: 0.9, innovation_variance: 1.0 };
        let p = s.filtered_power(&[1.0], 20000);
        assert!((p / s.variance() - 1.0).abs() < 1e-6, "{p}");
        let w = InputSpectrum::White { variance: 2.0 };
        assert_eq!(w.filtered_power(&[1.0, 1.0], 10), 4.0);
    }
}
