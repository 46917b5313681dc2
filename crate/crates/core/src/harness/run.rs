use std::sync::Arc;

use rayon::prelude::*;

use super::config::{AlgorithmSpec, ExperimentConfig, InputKind};
use super::HarnessError;
use crate::adaptive::{AdaptiveFilter, JosrFilter, NsafConfig, NsafFilter, StepReport, WeightVector};
use crate::filterbank::{AnalysisBank, SubbandDecomposer};
use crate::signal::{
    gen_ar1, gen_wgn, load_wav, make_echo_path, negate_path_at, system_response, EchoPath,
    PathSchedule, RngSeed, SignalBuffer,
};

/// Deviation ratios below this are clamped before taking logs.
pub const DEVIATION_FLOOR: f64 = 1e-30;

/// `10·log10(‖w_o − w‖² / ‖w_o‖²)` in dB.
pub fn nmsd(active: &EchoPath, w: &[f64]) -> Result<f64, HarnessError> {
    Ok(to_db(deviation_ratio(active, w)?))
}

pub(crate) fn deviation_ratio(active: &EchoPath, w: &[f64]) -> Result<f64, HarnessError> {
    let reference = active.taps();
    if reference.len() != w.len() {
        return Err(HarnessError::LengthMismatch {
            expected: reference.len(),
            got: w.len(),
        });
    }
    let energy = active.energy();
    if energy == 0.0 {
        return Err(HarnessError::ZeroReference);
    }
    let err: f64 = reference.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((err / energy).max(DEVIATION_FLOOR))
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.max(DEVIATION_FLOOR).log10()
}

/// Named curves of normalized squared deviation, one value per decimated
/// iteration, stored linearly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveSet {
    pub names: Vec<String>,
    pub deviation: Vec<Vec<f64>>,
}

impl CurveSet {
    pub fn iterations(&self) -> usize {
        self.deviation.first().map_or(0, Vec::len)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn nmsd_db(&self, i: usize) -> Vec<f64> {
        self.deviation[i].iter().map(|&r| to_db(r)).collect()
    }

    pub fn nmsd_db_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name).map(|i| self.nmsd_db(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub subbands: usize,
    pub curves: CurveSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub runs: usize,
    pub subbands: usize,
    /// Ensemble mean of the linear deviation, per algorithm and iteration.
    pub curves: CurveSet,
    pub config: ExperimentConfig,
}

/// The signals of one run, before any adaptation.
#[derive(Debug, Clone)]
pub struct RunSignals {
    pub input: SignalBuffer,
    pub desired: Vec<f64>,
    pub schedule: PathSchedule,
    pub noise_variance: f64,
}

/// Passed to observers after every adaptation step.
pub struct StepEvent<'a> {
    pub algorithm: usize,
    /// Full-band sample index, counted from the end of warmup, that
    /// completed the frame.
    pub sample: usize,
    pub report: &'a StepReport,
    pub weights: &'a WeightVector,
}

struct Lane {
    filter: Box<dyn AdaptiveFilter + Send>,
    full_band: bool,
}

/// A validated experiment with its shared, immutable pieces prepared once.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    bank: Arc<AnalysisBank>,
    path: EchoPath,
    wav: Option<SignalBuffer>,
    total: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let bank = Arc::new(AnalysisBank::cosine_modulated(
            config.subbands,
            config.filter_bank.into(),
        )?);
        let path = make_echo_path(
            config.taps,
            config.echo_path.decay,
            RngSeed(config.echo_path.seed),
        )?;
        let (wav, total) = match &config.input {
            InputKind::Wav { path } => {
                let buf = load_wav(path)?;
                let available = buf.len().saturating_sub(config.warmup);
                let total = match config.total_samples {
                    Some(t) if t > available => {
                        return Err(HarnessError::Config(format!(
                            "total_samples {t} plus warmup {} exceeds the {} samples in {}",
                            config.warmup,
                            buf.len(),
                            path.display()
                        )))
                    }
                    Some(t) => t,
                    None => available,
                };
                if total == 0 {
                    return Err(HarnessError::Config("WAV file holds no samples".into()));
                }
                (Some(buf), total)
            }
            _ => (None, config.total_samples.expect("validated")),
        };
        config.change_sample(total)?;
        Ok(Self {
            config,
            bank,
            path,
            wav,
            total,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn bank(&self) -> &Arc<AnalysisBank> {
        &self.bank
    }

    pub fn echo_path(&self) -> &EchoPath {
        &self.path
    }

    pub fn total_samples(&self) -> usize {
        self.total
    }

    /// Input and desired signals for one realization, `warmup + total`
    /// samples long. The schedule is indexed on that extended time axis.
    pub fn signals(&self, seed: u64) -> Result<RunSignals, HarnessError> {
        let seed = RngSeed(seed);
        let warmup = self.config.warmup;
        let len = warmup + self.total;
        let input = match (&self.config.input, &self.wav) {
            (InputKind::Ar1 { pole }, _) => gen_ar1(*pole, len, 1.0 - pole * pole, seed.derive(0))?,
            (InputKind::Wgn, _) => gen_wgn(1.0, len, seed.derive(0))?,
            (InputKind::Wav { .. }, Some(buf)) => SignalBuffer {
                samples: buf.samples[..len].to_vec(),
                sample_rate: buf.sample_rate,
            },
            (InputKind::Wav { .. }, None) => unreachable!("WAV loaded in Experiment::new"),
        };
        let schedule = match self.config.change_sample(self.total)? {
            Some(c) => negate_path_at(self.path.clone(), warmup + c, len)?,
            None => PathSchedule::fixed(self.path.clone()),
        };
        let snr = self.config.snr_db.unwrap_or(f64::INFINITY);
        let out = system_response(&schedule, &input, snr, seed.derive(1))?;
        Ok(RunSignals {
            input,
            desired: out.desired,
            schedule,
            noise_variance: out.noise_variance,
        })
    }

    fn lanes(&self, noise_variance: f64) -> Result<Vec<Lane>, HarnessError> {
        let m = self.config.taps;
        let n = self.config.subbands;
        let scaling = self.config.noise_scaling;
        self.config
            .algorithms
            .iter()
            .map(|spec| {
                let filter: Box<dyn AdaptiveFilter + Send> = match *spec {
                    AlgorithmSpec::Nsaf { mu, delta, .. } => {
                        Box::new(NsafFilter::new(m, n, NsafConfig::new(mu, delta)?)?)
                    }
                    AlgorithmSpec::Josr { .. } => {
                        Box::new(JosrFilter::new(m, n, noise_variance, scaling)?)
                    }
                    AlgorithmSpec::Nlms { mu, delta, .. } => {
                        Box::new(NsafFilter::new(m, 1, NsafConfig::new(mu, delta)?)?)
                    }
                    AlgorithmSpec::JoNlms { .. } => {
                        Box::new(JosrFilter::new(m, 1, noise_variance, scaling)?)
                    }
                };
                Ok(Lane {
                    filter,
                    full_band: spec.is_full_band(),
                })
            })
            .collect()
    }

    /// Runs every configured algorithm on one realization.
    pub fn run_single(&self, seed: u64) -> Result<RunResult, HarnessError> {
        self.run_observed(seed, |_| {})
    }

    /// As [`run_single`](Self::run_single), calling `observer` after every
    /// adaptation step.
    pub fn run_observed<F>(&self, seed: u64, mut observer: F) -> Result<RunResult, HarnessError>
    where
        F: FnMut(StepEvent<'_>),
    {
        let signals = self.signals(seed)?;
        let mut lanes = self.lanes(signals.noise_variance)?;
        let n = self.config.subbands;
        let m = self.config.taps;
        let needs_sub = lanes.iter().any(|l| !l.full_band);
        let needs_full = lanes.iter().any(|l| l.full_band);
        let mut sub = needs_sub
            .then(|| SubbandDecomposer::new(self.bank.clone(), m))
            .transpose()?;
        let mut full = needs_full
            .then(|| SubbandDecomposer::new(Arc::new(AnalysisBank::identity()), m))
            .transpose()?;

        let iterations = self.total / n;
        let mut deviation = vec![Vec::with_capacity(iterations); lanes.len()];
        let positive = signals.schedule.path().clone();
        let negative = positive.negated();

        let warmup = self.config.warmup;
        let samples = signals.input.samples.iter().zip(&signals.desired);
        for (&u, &d) in samples.clone().take(warmup) {
            if let Some(dec) = full.as_mut() {
                dec.push_samples(u, d)?;
            }
            if let Some(dec) = sub.as_mut() {
                dec.push_samples(u, d)?;
            }
        }
        for (t, (&u, &d)) in samples.enumerate().skip(warmup) {
            if let Some(dec) = full.as_mut() {
                let frame = dec.push_samples(u, d)?.expect("identity bank emits every sample");
                step_lanes(&mut lanes, true, &frame, t - warmup, &mut observer)?;
            }
            if let Some(dec) = sub.as_mut() {
                if let Some(frame) = dec.push_samples(u, d)? {
                    step_lanes(&mut lanes, false, &frame, t - warmup, &mut observer)?;
                }
            }
            if (t + 1 - warmup).is_multiple_of(n) {
                let active = if signals.schedule.is_negated_at(t) { &negative } else { &positive };
                for (lane, dev) in lanes.iter().zip(deviation.iter_mut()) {
                    dev.push(deviation_ratio(active, lane.filter.weights().as_slice())?);
                }
            }
        }

        Ok(RunResult {
            seed,
            subbands: n,
            curves: CurveSet {
                names: self.config.algorithms.iter().map(|a| a.name().to_string()).collect(),
                deviation,
            },
        })
    }

    /// Averages `runs` realizations with seeds `base_seed..base_seed+runs`.
    /// Runs execute in parallel; the reduction is in seed order.
    pub fn run_monte_carlo(&self) -> Result<MonteCarloResult, HarnessError> {
        let runs = self.config.effective_runs();
        let base = self.config.base_seed;
        let results: Vec<RunResult> = (0..runs as u64)
            .into_par_iter()
            .map(|r| {
                let seed = base.wrapping_add(r);
                self.run_single(seed).map_err(|e| HarnessError::Run {
                    seed,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_, _>>()?;

        let mut iter = results.into_iter();
        let mut curves = iter.next().expect("at least one run").curves;
        for r in iter {
            for (acc, dev) in curves.deviation.iter_mut().zip(&r.curves.deviation) {
                acc.iter_mut().zip(dev).for_each(|(a, b)| *a += b);
            }
        }
        let scale = 1.0 / runs as f64;
        curves
            .deviation
            .iter_mut()
            .for_each(|d| d.iter_mut().for_each(|x| *x *= scale));
        Ok(MonteCarloResult {
            runs,
            subbands: self.config.subbands,
            curves,
            config: self.config.clone(),
        })
    }
}

fn step_lanes<F>(
    lanes: &mut [Lane],
    full_band: bool,
    frame: &crate::filterbank::SubbandFrame,
    sample: usize,
    observer: &mut F,
) -> Result<(), HarnessError>
where
    F: FnMut(StepEvent<'_>),
{
    for (i, lane) in lanes.iter_mut().enumerate().filter(|(_, l)| l.full_band == full_band) {
        let report = lane
            .filter
            .step(frame)
            .map_err(|e| HarnessError::Adapt { algorithm: i, source: e })?;
        observer(StepEvent {
            algorithm: i,
            sample,
            report: &report,
            weights: lane.filter.weights(),
        });
    }
    Ok(())
}

pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunResult, HarnessError> {
    Experiment::new(config.clone())?.run_single(seed)
}

pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MonteCarloResult, HarnessError> {
    Experiment::new(config.clone())?.run_monte_carlo()
}
