//! Signal generation and ingestion: AR(1) and white Gaussian inputs, synthetic
//! echo paths, the noisy system model `d(n) = uᵀ(n)·w_o + η(n)`, and 16-bit
//! mono WAV files.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("AR(1) pole must satisfy |pole| < 1, got {0}")]
    NonStationaryPole(f64),
    #[error("variance must be finite and non-negative, got {0}")]
    BadVariance(f64),
    #[error("echo path needs at least one tap")]
    EmptyPath,
    #[error("echo path is all zeros")]
    ZeroPath,
    #[error("echo path decay must be finite and positive, got {0}")]
    BadDecay(f64),
    #[error("input signal is empty")]
    EmptyInput,
    #[error("clean echo has zero power, SNR {0} dB is undefined")]
    ZeroSignalPower(f64),
    #[error("SNR must not be NaN")]
    BadSnr,
    #[error("change sample {change} outside a run of {len} samples")]
    ChangeOutOfRange { change: usize, len: usize },
    #[error("signal contains a non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("expected a mono file, found {0} channels")]
    ChannelCount(u16),
    #[error("WAV file is truncated: {0}")]
    Truncated(String),
    #[error("malformed WAV file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Seed of a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// A decorrelated seed for sub-stream `stream` (splitmix64 finalizer).
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self.0 ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        RngSeed(z ^ (z >> 31))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: Option<u32>,
}

impl SignalBuffer {
    pub fn new(samples: Vec<f64>) -> Result<Self, SignalError> {
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    /// One float per line, for debugging and golden files.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for x in &self.samples {
            writeln!(out, "{x:e}")?;
        }
        Ok(())
    }
}

fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn check_variance(variance: f64) -> Result<(), SignalError> {
    if variance.is_finite() && variance >= 0.0 {
        Ok(())
    } else {
        Err(SignalError::BadVariance(variance))
    }
}

/// White Gaussian noise with the given variance.
pub fn gen_wgn(variance: f64, len: usize, seed: RngSeed) -> Result<SignalBuffer, SignalError> {
    check_variance(variance)?;
    let scale = variance.sqrt();
    let mut rng = seed.rng();
    let samples = (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();
    Ok(SignalBuffer {
        samples,
        sample_rate: None,
    })
}

/// `x(n) = pole·x(n−1) + v(n)` with `x(−1) = 0` and Gaussian innovations `v`.
pub fn gen_ar1(
    pole: f64,
    len: usize,
    innovation_variance: f64,
    seed: RngSeed,
) -> Result<SignalBuffer, SignalError> {
    if pole.is_nan() || pole.abs() >= 1.0 {
        return Err(SignalError::NonStationaryPole(pole));
    }
    let mut buf = gen_wgn(innovation_variance, len, seed)?;
    let mut prev = 0.0;
    for x in buf.samples.iter_mut() {
        prev = pole * prev + *x;
        *x = prev;
    }
    Ok(buf)
}

/// The unknown system `w_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoPath {
    taps: Vec<f64>,
}

impl EchoPath {
    pub fn new(taps: Vec<f64>) -> Result<Self, SignalError> {
        if taps.is_empty() {
            return Err(SignalError::EmptyPath);
        }
        if let Some(i) = taps.iter().position(|x| !x.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        if taps.iter().all(|&x| x == 0.0) {
            return Err(SignalError::ZeroPath);
        }
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|x| x * x).sum()
    }

    pub fn negated(&self) -> Self {
        Self {
            taps: self.taps.iter().map(|x| -x).collect(),
        }
    }
}

/// Exponentially decaying Gaussian impulse response with unit energy.
pub fn make_echo_path(taps: usize, decay: f64, seed: RngSeed) -> Result<EchoPath, SignalError> {
    if taps == 0 {
        return Err(SignalError::EmptyPath);
    }
    if !(decay.is_finite() && decay > 0.0) {
        return Err(SignalError::BadDecay(decay));
    }
    let mut rng = seed.rng();
    let mut w: Vec<f64> = (0..taps)
        .map(|j| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * (-decay * j as f64).exp()
        })
        .collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SignalError::ZeroPath);
    }
    w.iter_mut().for_each(|x| *x /= norm);
    EchoPath::new(w)
}

/// An echo path that flips sign at `change_at`: `w_o` before, `−w_o` from
/// that sample on.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSchedule {
    path: EchoPath,
    change_at: Option<usize>,
}

impl PathSchedule {
    pub fn fixed(path: EchoPath) -> Self {
        Self {
            path,
            change_at: None,
        }
    }

    pub fn path(&self) -> &EchoPath {
        &self.path
    }

    pub fn change_at(&self) -> Option<usize> {
        self.change_at
    }

    pub fn is_negated_at(&self, n: usize) -> bool {
        self.change_at.is_some_and(|c| n >= c)
    }

    /// The path in force at full-band sample `n`.
    pub fn active_at(&self, n: usize) -> EchoPath {
        if self.is_negated_at(n) {
            self.path.negated()
        } else {
            self.path.clone()
        }
    }
}

/// Schedules the abrupt `w_o → −w_o` change at sample `change_at` of a run of
/// `total_len` samples.
pub fn negate_path_at(
    path: EchoPath,
    change_at: usize,
    total_len: usize,
) -> Result<PathSchedule, SignalError> {
    if change_at >= total_len {
        return Err(SignalError::ChangeOutOfRange {
            change: change_at,
            len: total_len,
        });
    }
    Ok(PathSchedule {
        path,
        change_at: Some(change_at),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub desired: Vec<f64>,
    /// Noise variance `σ_η²` implied by the requested SNR.
    pub noise_variance: f64,
}

/// Passes `input` through the scheduled path and adds white noise at
/// `snr_db` relative to the clean echo power of the whole run.
/// `f64::INFINITY` means noiseless.
pub fn system_response(
    schedule: &PathSchedule,
    input: &SignalBuffer,
    snr_db: f64,
    seed: RngSeed,
) -> Result<SystemOutput, SignalError> {
    if input.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    if snr_db.is_nan() {
        return Err(SignalError::BadSnr);
    }
    let w = schedule.path.taps();
    let u = &input.samples;
    let mut clean: Vec<f64> = (0..u.len())
        .map(|n| {
            let reach = w.len().min(n + 1);
            (0..reach).map(|j| w[j] * u[n - j]).sum()
        })
        .collect();
    if let Some(c) = schedule.change_at {
        let start = c.min(clean.len());
        clean[start..].iter_mut().for_each(|x| *x = -*x);
    }

    if snr_db == f64::INFINITY {
        return Ok(SystemOutput {
            desired: clean,
            noise_variance: 0.0,
        });
    }
    let power = mean_square(&clean);
    if power == 0.0 {
        return Err(SignalError::ZeroSignalPower(snr_db));
    }
    let noise_variance = power * 10f64.powf(-snr_db / 10.0);
    let noise = gen_wgn(noise_variance, clean.len(), seed)?;
    let desired = clean
        .iter()
        .zip(&noise.samples)
        .map(|(c, e)| c + e)
        .collect();
    Ok(SystemOutput {
        desired,
        noise_variance,
    })
}

/// Reads a mono 16-bit PCM WAV file, scaling samples into `[−1, 1)`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<SignalBuffer, WavError> {
    let reader = hound::WavReader::open(path).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(WavError::UnsupportedEncoding(format!(
            "{:?} with {} bits per sample",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(WavError::ChannelCount(spec.channels));
    }
    let expected = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    if samples.len() != expected {
        return Err(WavError::Truncated(format!(
            "header announces {expected} samples, read {}",
            samples.len()
        )));
    }
    Ok(SignalBuffer {
        samples,
        sample_rate: Some(spec.sample_rate),
    })
}

/// Writes `buf` as mono 16-bit PCM, rounding and saturating to the `i16` range.
pub fn write_wav(path: impl AsRef<Path>, buf: &SignalBuffer, sample_rate: u32) -> Result<(), WavError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for x in &buf.samples {
        let v = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

fn map_hound(err: hound::Error) -> WavError {
    match err {
        // hound reports short reads as `Other` with this message
        hound::Error::IoError(e)
            if e.kind() == std::io::ErrorKind::UnexpectedEof
                || e.to_string().contains("enough bytes") =>
        {
            WavError::Truncated(e.to_string())
        }
        hound::Error::IoError(e) => WavError::Io(e),
        hound::Error::Unsupported => WavError::UnsupportedEncoding("format not supported".into()),
        hound::Error::FormatError(msg) => WavError::Malformed(msg.to_string()),
        other => WavError::Malformed(other.to_string()),
    }
}
