//! Cosine-modulated analysis filter bank and the multiband decomposer.
//!
//! A Kaiser-windowed sinc prototype of length `2·K·N` is designed so that
//! `|P(e^{jπ/2N})|² = 1/2`, which makes adjacent channels power complementary
//! at their shared band edge. The `N` analysis filters are then obtained by
//! the usual pseudo-QMF modulation
//!
//! ```text
//! h_i(n) = 2·p(n)·cos( (π/N)(i + ½)(n − (L−1)/2) + (−1)^i·π/4 )
//! ```
//!
//! [`SubbandDecomposer`] runs every channel at the full-band rate and hands
//! out one [`SubbandFrame`] per `N` input samples.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterBankError {
    #[error("number of subbands must be at least 1")]
    ZeroSubbands,
    #[error("overlap factor must be at least 1")]
    ZeroOverlap,
    #[error("adaptive filter length must be at least 1")]
    ZeroTaps,
    #[error("stopband attenuation must be positive and finite, got {0}")]
    BadAttenuation(f64),
    #[error("prototype designed for {designed} subbands, bank requested {requested}")]
    SubbandMismatch { designed: usize, requested: usize },
    #[error("prototype length {0} is not 2·K·N for an integer K >= 1")]
    BadPrototypeLength(usize),
    #[error("filter {index} has length {len}, expected {expected}")]
    RaggedBank { index: usize, len: usize, expected: usize },
    #[error("non-finite sample (u = {u}, d = {d})")]
    NonFiniteSample { u: f64, d: f64 },
    #[error("malformed bank file: {0}")]
    Parse(String),
}

/// Knobs for [`design_prototype`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrototypeDesign {
    /// Overlap factor `K`; the prototype has `2·K·N` taps.
    pub overlap: usize,
    /// Kaiser stopband attenuation target in dB.
    pub attenuation_db: f64,
}

impl Default for PrototypeDesign {
    fn default() -> Self {
        Self {
            overlap: 16,
            attenuation_db: 80.0,
        }
    }
}

/// Symmetric lowpass prototype of a cosine-modulated bank.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    coeffs: Vec<f64>,
    subbands: usize,
}

impl PrototypeFilter {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn designed_for(&self) -> usize {
        self.subbands
    }

    /// Zero-phase amplitude response `A(ω)`, so that `P(e^{jω}) = A(ω)·e^{-jω(L−1)/2}`.
    pub fn amplitude(&self, omega: f64) -> f64 {
        amplitude(&self.coeffs, omega)
    }
}

fn amplitude(coeffs: &[f64], omega: f64) -> f64 {
    let center = (coeffs.len() as f64 - 1.0) / 2.0;
    coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| c * (omega * (n as f64 - center)).cos())
        .sum()
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

/// Windowed sinc of even length `len` with cutoff `cutoff`, DC gain 1, built
/// from its first half so the symmetry is exact.
fn windowed_sinc(len: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let center = (len as f64 - 1.0) / 2.0;
    let i0_beta = bessel_i0(beta);
    let mut coeffs = vec![0.0; len];
    for n in 0..len / 2 {
        let m = n as f64 - center;
        let ratio = m / center.max(0.5);
        let window = bessel_i0(beta * (1.0 - ratio * ratio).max(0.0).sqrt()) / i0_beta;
        let value = window * (cutoff * m).sin() / (PI * m);
        coeffs[n] = value;
        coeffs[len - 1 - n] = value;
    }
    let dc: f64 = coeffs.iter().sum();
    coeffs.iter_mut().for_each(|c| *c /= dc);
    coeffs
}

/// Designs the lowpass prototype for an `subbands`-channel bank.
///
/// The cutoff is tuned by bisection until the amplitude at `π/(2N)` is
/// `1/√2`, the condition under which neighbouring channels add up to unit
/// power across their transition band.
pub fn design_prototype(
    subbands: usize,
    design: PrototypeDesign,
) -> Result<PrototypeFilter, FilterBankError> {
    if subbands == 0 {
        return Err(FilterBankError::ZeroSubbands);
    }
    if design.overlap == 0 {
        return Err(FilterBankError::ZeroOverlap);
    }
    if !(design.attenuation_db.is_finite() && design.attenuation_db > 0.0) {
        return Err(FilterBankError::BadAttenuation(design.attenuation_db));
    }
    let len = 2 * design.overlap * subbands;
    let beta = kaiser_beta(design.attenuation_db);
    let edge = PI / (2.0 * subbands as f64);
    let target = std::f64::consts::FRAC_1_SQRT_2;

    let mut lo = 0.25 * edge;
    let mut hi = (1.75 * edge).min(PI);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if amplitude(&windowed_sinc(len, mid, beta), edge) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PrototypeFilter {
        coeffs: windowed_sinc(len, 0.5 * (lo + hi), beta),
        subbands,
    })
}

/// The `N` analysis filters `h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBank {
    filters: Vec<Vec<f64>>,
}

impl AnalysisBank {
    /// Builds a bank from explicit impulse responses.
    pub fn from_filters(filters: Vec<Vec<f64>>) -> Result<Self, FilterBankError> {
        let expected = filters.first().ok_or(FilterBankError::ZeroSubbands)?.len();
        if expected == 0 {
            return Err(FilterBankError::Parse("empty filter".into()));
        }
        for (index, h) in filters.iter().enumerate() {
            if h.len() != expected {
                return Err(FilterBankError::RaggedBank {
                    index,
                    len: h.len(),
                    expected,
                });
            }
        }
        Ok(Self { filters })
    }

    /// Single pass-through channel `h_0 = [1]`.
    pub fn identity() -> Self {
        Self {
            filters: vec![vec![1.0]],
        }
    }

    /// Default bank for `subbands` channels. One channel yields the identity
    /// bank so that the subband filter collapses exactly onto its full-band
    /// counterpart.
    pub fn cosine_modulated(
        subbands: usize,
        design: PrototypeDesign,
    ) -> Result<Self, FilterBankError> {
        if subbands == 1 {
            return Ok(Self::identity());
        }
        let proto = design_prototype(subbands, design)?;
        build_analysis_bank(&proto, subbands)
    }

    pub fn subbands(&self) -> usize {
        self.filters.len()
    }

    pub fn filter_len(&self) -> usize {
        self.filters[0].len()
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    pub fn filter(&self, i: usize) -> &[f64] {
        &self.filters[i]
    }

    /// `Σ_n h_i(n)²` per channel; the subband variance produced by
    /// unit-variance white input.
    pub fn energies(&self) -> Vec<f64> {
        self.filters
            .iter()
            .map(|h| h.iter().map(|c| c * c).sum())
            .collect()
    }

    /// `|H_i(e^{jω})|²` for channel `i`.
    pub fn power_response(&self, i: usize, omega: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, c) in self.filters[i].iter().enumerate() {
            let phase = omega * n as f64;
            re += c * phase.cos();
            im -= c * phase.sin();
        }
        re * re + im * im
    }

    /// Largest `|Σ_i |H_i(e^{jω})|² − 1|` over `grid` equally spaced
    /// frequencies in `[0, π]`.
    pub fn power_complementarity_ripple(&self, grid: usize) -> f64 {
        (0..=grid)
            .map(|j| {
                let omega = PI * j as f64 / grid as f64;
                let total: f64 = (0..self.subbands())
                    .map(|i| self.power_response(i, omega))
                    .sum();
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Plain-text form: header `N L`, then one space-separated line per filter.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.subbands(), self.filter_len());
        for h in &self.filters {
            let line: Vec<String> = h.iter().map(|c| format!("{c:e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FilterBankError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| FilterBankError::Parse("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| FilterBankError::Parse(format!("header: {e}")))?;
        let [n, l] = dims[..] else {
            return Err(FilterBankError::Parse(format!("header `{header}` is not `N L`")));
        };
        let filters: Vec<Vec<f64>> = lines
            .map(|line| {
                line.split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| FilterBankError::Parse(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        if filters.len() != n {
            return Err(FilterBankError::Parse(format!(
                "header announces {n} filters, found {}",
                filters.len()
            )));
        }
        if let Some(h) = filters.iter().find(|h| h.len() != l) {
            return Err(FilterBankError::Parse(format!(
                "header announces length {l}, found a filter of length {}",
                h.len()
            )));
        }
        Self::from_filters(filters)
    }
}

/// Cosine-modulates `proto` into `subbands` analysis filters.
pub fn build_analysis_bank(
    proto: &PrototypeFilter,
    subbands: usize,
) -> Result<AnalysisBank, FilterBankError> {
    if subbands == 0 {
        return Err(FilterBankError::ZeroSubbands);
    }
    if proto.subbands != subbands {
        return Err(FilterBankError::SubbandMismatch {
            designed: proto.subbands,
            requested: subbands,
        });
    }
    let len = proto.len();
    if len == 0 || !len.is_multiple_of(2 * subbands) {
        return Err(FilterBankError::BadPrototypeLength(len));
    }
    let center = (len as f64 - 1.0) / 2.0;
    let filters = (0..subbands)
        .map(|i| {
            let freq = PI / subbands as f64 * (i as f64 + 0.5);
            let phase = if i % 2 == 0 { PI / 4.0 } else { -PI / 4.0 };
            proto
                .coeffs
                .iter()
                .enumerate()
                .map(|(n, p)| 2.0 * p * (freq * (n as f64 - center) + phase).cos())
                .collect()
        })
        .collect();
    Ok(AnalysisBank { filters })
}

/// Delay line of fixed length whose contents are always readable as one
/// contiguous slice, newest sample first.
#[derive(Debug, Clone)]
struct History {
    buf: Vec<f64>,
    pos: usize,
    len: usize,
}

impl History {
    fn new(len: usize) -> Self {
        Self {
            buf: vec![0.0; 2 * len],
            pos: 0,
            len,
        }
    }

    fn push(&mut self, x: f64) {
        self.pos = if self.pos == 0 { self.len - 1 } else { self.pos - 1 };
        self.buf[self.pos] = x;
        self.buf[self.pos + self.len] = x;
    }

    fn as_slice(&self) -> &[f64] {
        &self.buf[self.pos..self.pos + self.len]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One decimated iteration `k`: the subband regressors `u_i(k)` and the
/// decimated desired samples `d_{i,D}(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFrame {
    /// 1-based decimated iteration index.
    pub k: usize,
    pub regressors: Vec<Vec<f64>>,
    pub desired: Vec<f64>,
}

impl SubbandFrame {
    pub fn subbands(&self) -> usize {
        self.desired.len()
    }

    pub fn taps(&self) -> usize {
        self.regressors.first().map_or(0, Vec::len)
    }
}

/// Splits full-band `(u(n), d(n))` into decimated subband frames.
#[derive(Debug, Clone)]
pub struct SubbandDecomposer {
    bank: Arc<AnalysisBank>,
    taps: usize,
    input: History,
    desired: History,
    regressors: Vec<History>,
    samples: usize,
}

impl SubbandDecomposer {
    pub fn new(bank: Arc<AnalysisBank>, taps: usize) -> Result<Self, FilterBankError> {
        if taps == 0 {
            return Err(FilterBankError::ZeroTaps);
        }
        let filter_len = bank.filter_len();
        let subbands = bank.subbands();
        Ok(Self {
            bank,
            taps,
            input: History::new(filter_len),
            desired: History::new(filter_len),
            regressors: (0..subbands).map(|_| History::new(taps)).collect(),
            samples: 0,
        })
    }

    pub fn bank(&self) -> &AnalysisBank {
        &self.bank
    }

    pub fn subbands(&self) -> usize {
        self.bank.subbands()
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Full-band samples consumed so far.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Feeds one full-band sample pair; yields a frame every `N` samples.
    pub fn push_samples(
        &mut self,
        u: f64,
        d: f64,
    ) -> Result<Option<SubbandFrame>, FilterBankError> {
        if !(u.is_finite() && d.is_finite()) {
            return Err(FilterBankError::NonFiniteSample { u, d });
        }
        self.input.push(u);
        self.desired.push(d);
        for (h, reg) in self.bank.filters.iter().zip(self.regressors.iter_mut()) {
            reg.push(dot(h, self.input.as_slice()));
        }
        self.samples += 1;

        let subbands = self.subbands();
        if !self.samples.is_multiple_of(subbands) {
            return Ok(None);
        }
        let history = self.desired.as_slice();
        Ok(Some(SubbandFrame {
            k: self.samples / subbands,
            regressors: self.regressors.iter().map(|r| r.as_slice().to_vec()).collect(),
            desired: self.bank.filters.iter().map(|h| dot(h, history)).collect(),
        }))
    }
}
