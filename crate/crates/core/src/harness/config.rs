use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adaptive::NoiseScaling;
use crate::filterbank::PrototypeDesign;

/// Full description of one experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputKind,
    /// Full-band samples per run. Optional for WAV input, where it defaults
    /// to the file length.
    #[serde(default)]
    pub total_samples: Option<usize>,
    /// Full-band samples pushed through the filter bank before adaptation
    /// starts, so the subband signals are stationary at the first iteration.
    /// Must be a multiple of `subbands`.
    #[serde(default)]
    pub warmup: usize,
    /// Adaptive filter length `M`, also the echo path length.
    pub taps: usize,
    /// Number of subbands `N`.
    pub subbands: usize,
    /// Echo-to-noise ratio in dB; `null` runs noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Sample index at which the echo path flips sign.
    #[serde(default)]
    pub change_at: Option<ChangePoint>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub echo_path: EchoPathConfig,
    #[serde(default)]
    pub filter_bank: BankConfig,
    #[serde(default)]
    pub noise_scaling: NoiseScaling,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_svg: Option<PathBuf>,
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputKind {
    /// Unit-variance AR(1) process.
    Ar1 { pole: f64 },
    /// Unit-variance white Gaussian noise.
    Wgn,
    /// Mono 16-bit PCM file; forces a single run.
    Wav { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Nsaf {
        name: String,
        mu: f64,
        #[serde(default)]
        delta: f64,
    },
    Josr {
        name: String,
    },
    /// Full-band NLMS, sampled at the subband decimation cadence.
    Nlms {
        name: String,
        mu: f64,
        #[serde(default)]
        delta: f64,
    },
    /// Full-band JO-NLMS, sampled at the subband decimation cadence.
    JoNlms {
        name: String,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &str {
        match self {
            Self::Nsaf { name, .. }
            | Self::Josr { name }
            | Self::Nlms { name, .. }
            | Self::JoNlms { name } => name,
        }
    }

    /// Runs on full-band frames rather than the configured subband bank.
    pub fn is_full_band(&self) -> bool {
        matches!(self, Self::Nlms { .. } | Self::JoNlms { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChangePoint {
    Sample(usize),
    Named(NamedChange),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedChange {
    /// `⌊total/2⌋` rounded down to a multiple of `N`.
    Middle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoPathConfig {
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_decay() -> f64 {
    0.01
}

impl Default for EchoPathConfig {
    fn default() -> Self {
        Self {
            decay: default_decay(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    #[serde(default = "default_attenuation")]
    pub attenuation_db: f64,
}

fn default_overlap() -> usize {
    PrototypeDesign::default().overlap
}

fn default_attenuation() -> f64 {
    PrototypeDesign::default().attenuation_db
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            overlap: default_overlap(),
            attenuation_db: default_attenuation(),
        }
    }
}

impl From<BankConfig> for PrototypeDesign {
    fn from(b: BankConfig) -> Self {
        PrototypeDesign {
            overlap: b.overlap,
            attenuation_db: b.attenuation_db,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// WAV input is a single fixed realization.
    pub fn effective_runs(&self) -> usize {
        match self.input {
            InputKind::Wav { .. } => 1,
            _ => self.runs,
        }
    }

    /// Static checks that do not need the input signal.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.taps == 0 {
            return bad("taps must be at least 1".into());
        }
        if self.subbands == 0 {
            return bad("subbands must be at least 1".into());
        }
        if !self.warmup.is_multiple_of(self.subbands) {
            return bad(format!(
                "warmup {} is not a multiple of subbands {}",
                self.warmup, self.subbands
            ));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if let InputKind::Ar1 { pole } = self.input {
            if pole.is_nan() || pole.abs() >= 1.0 {
                return bad(format!("AR(1) pole {pole} is not stationary"));
            }
        }
        if !matches!(self.input, InputKind::Wav { .. }) && self.total_samples.is_none() {
            return bad("total_samples is required for synthetic input".into());
        }
        if self.total_samples == Some(0) {
            return bad("total_samples must be positive".into());
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad(format!("snr_db {snr} must be finite (use null for noiseless)"));
            }
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            let name = a.name();
            if name.is_empty() || name.contains([',', '\n', '\r', '"']) {
                return bad(format!("algorithm {i} has an unusable name {name:?}"));
            }
            if self.algorithms[..i].iter().any(|b| b.name() == name) {
                return bad(format!("duplicate algorithm name {name:?}"));
            }
            match *a {
                AlgorithmSpec::Nsaf { mu, delta, .. } | AlgorithmSpec::Nlms { mu, delta, .. } => {
                    if !(mu.is_finite() && mu > 0.0) {
                        return bad(format!("{name}: step size {mu} must be positive"));
                    }
                    if !(delta.is_finite() && delta >= 0.0) {
                        return bad(format!("{name}: regularization {delta} must be non-negative"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolves the change point against the actual run length.
    pub fn change_sample(&self, total: usize) -> Result<Option<usize>, HarnessError> {
        let c = match self.change_at {
            None => return Ok(None),
            Some(ChangePoint::Sample(c)) => c,
            Some(ChangePoint::Named(NamedChange::Middle)) => total / 2 / self.subbands * self.subbands,
        };
        if c >= total {
            return Err(HarnessError::Config(format!(
                "change_at {c} is outside the run of {total} samples"
            )));
        }
        Ok(Some(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "input": {"kind": "ar1", "pole": 0.95},
        "total_samples": 4000,
        "taps": 64,
        "subbands": 4,
        "snr_db": 30,
        "algorithms": [
            {"kind": "nsaf", "name": "NSAF", "mu": 1.0, "delta": 0.01},
            {"kind": "josr", "name": "JOSR"},
            {"kind": "jo_nlms", "name": "JO-NLMS"}
        ],
        "change_at": "middle",
        "runs": 3
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(SAMPLE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.input, InputKind::Ar1 { pole: 0.95 });
        assert_eq!(c.algorithms.len(), 3);
        assert_eq!(c.algorithms[2].name(), "JO-NLMS");
        assert!(c.algorithms[2].is_full_band());
        assert_eq!(c.echo_path, EchoPathConfig::default());
        assert_eq!(c.noise_scaling, NoiseScaling::PerSubband);
        assert_eq!(c.change_sample(4000).unwrap(), Some(2000));
        assert_eq!(c.change_sample(4006).unwrap(), Some(2000));
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let extra = SAMPLE.replacen("\"runs\": 3", "\"runs\": 3, \"colour\": 1", 1);
        assert!(ExperimentConfig::from_json(&extra).is_err());
        let alg = SAMPLE.replacen("{\"kind\": \"josr\", \"name\": \"JOSR\"}", "{\"kind\": \"josr\", \"name\": \"JOSR\", \"mu\": 1}", 1);
        assert!(ExperimentConfig::from_json(&alg).is_err());
    }

    #[test]
    fn validation_failures() {
        let base = ExperimentConfig::from_json(SAMPLE).unwrap();
        let mut c = base.clone();
        c.taps = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.runs = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.algorithms.push(AlgorithmSpec::Josr { name: "JOSR".into() });
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.algorithms[0] = AlgorithmSpec::Nsaf { name: "a,b".into(), mu: 1.0, delta: 0.0 };
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.total_samples = None;
        assert!(c.validate().is_err());
        let mut c = base;
        c.change_at = Some(ChangePoint::Sample(5000));
        assert!(c.change_sample(4000).is_err());
    }

    #[test]
    fn wav_forces_single_run() {
        let c = ExperimentConfig {
            input: InputKind::Wav { path: "x.wav".into() },
            total_samples: None,
            ..ExperimentConfig::from_json(SAMPLE).unwrap()
        };
        c.validate().unwrap();
        assert_eq!(c.effective_runs(), 1);
    }
}
