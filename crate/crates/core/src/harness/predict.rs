//! Closed-form predictions for an experiment configuration, laid out like
//! the simulated curves so both can be overlaid.

use super::config::{AlgorithmSpec, InputKind};
use super::run::{CurveSet, Experiment};
use super::HarnessError;
use crate::filterbank::AnalysisBank;
use crate::theory::{self, InputSpectrum, StepParams, SubbandStats};

fn variance(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

fn filtered(h: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let reach = h.len().min(n + 1);
            (0..reach).map(|j| h[j] * x[n - j]).sum()
        })
        .collect()
}

/// Stationary statistics seen by `bank` under this experiment's input.
pub fn experiment_stats(exp: &Experiment, bank: &AnalysisBank) -> Result<SubbandStats, HarnessError> {
    let cfg = exp.config();
    let snr = cfg.snr_db.unwrap_or(f64::INFINITY);
    let scaling = cfg.noise_scaling;
    let spectrum = match cfg.input {
        InputKind::Ar1 { pole } => Some(InputSpectrum::Ar1 {
            pole,
            innovation_variance: 1.0 - pole * pole,
        }),
        InputKind::Wgn => Some(InputSpectrum::White { variance: 1.0 }),
        InputKind::Wav { .. } => None,
    };
    if let Some(spectrum) = spectrum {
        return Ok(theory::stats_for(
            bank,
            spectrum,
            exp.echo_path(),
            snr,
            |v, n| scaling.subband_variance(v, n),
            cfg.taps,
        ));
    }
    // A recorded signal has no model spectrum: measure it.
    let signals = exp.signals(cfg.base_seed)?;
    let x = &signals.input.samples;
    let echo = variance(&filtered(exp.echo_path().taps(), x));
    let noise = echo * 10f64.powf(-snr / 10.0);
    Ok(SubbandStats {
        sigma_u2: bank.filters().iter().map(|h| variance(&filtered(h, x))).collect(),
        sigma_eta2_subband: scaling.subband_variance(noise, bank.subbands()),
        sigma_q2: 0.0,
        taps: cfg.taps,
    })
}

/// Predicted NMSD per configured algorithm, one row per decimated iteration.
/// Full-band algorithms advance `N` predictor steps per row. Path changes
/// are not modelled.
pub fn predict(exp: &Experiment) -> Result<CurveSet, HarnessError> {
    let cfg = exp.config();
    let rows = exp.total_samples() / cfg.subbands;
    let msd0 = exp.echo_path().energy();
    let sub_stats = experiment_stats(exp, exp.bank())?;
    let full_stats = experiment_stats(exp, &AnalysisBank::identity())?;

    let mut curves = CurveSet::default();
    for spec in &cfg.algorithms {
        let (stats, stride) = if spec.is_full_band() {
            (&full_stats, cfg.subbands)
        } else {
            (&sub_stats, 1)
        };
        let traj = match *spec {
            AlgorithmSpec::Nsaf { mu, delta, .. } | AlgorithmSpec::Nlms { mu, delta, .. } => {
                theory::msd_recursion(stats, StepParams::new(mu, delta), msd0, rows * stride)?
            }
            AlgorithmSpec::Josr { .. } | AlgorithmSpec::JoNlms { .. } => {
                theory::josr_msd_recursion(stats, msd0, rows * stride)?
            }
        };
        curves.names.push(spec.name().to_string());
        curves.deviation.push(
            (1..=rows)
                .map(|k| traj.values[k * stride] / msd0)
                .collect(),
        );
    }
    Ok(curves)
}
