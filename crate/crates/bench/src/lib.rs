//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use nsaf_core::filterbank::{AnalysisBank, PrototypeDesign, SubbandDecomposer, SubbandFrame};
use nsaf_core::signal::{gen_ar1, make_echo_path, system_response, PathSchedule, RngSeed};

/// Echo-cancellation input and desired signals, AR(1) coloured at pole 0.95.
pub fn echo_signals(taps: usize, len: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let path = make_echo_path(taps, 0.01, RngSeed(1)).expect("echo path");
    let x = gen_ar1(0.95, len, 1.0 - 0.95 * 0.95, RngSeed(2)).expect("input");
    let out = system_response(&PathSchedule::fixed(path), &x, 30.0, RngSeed(3)).expect("echo");
    (x.samples, out.desired, out.noise_variance)
}

pub fn bank(subbands: usize) -> Arc<AnalysisBank> {
    Arc::new(AnalysisBank::cosine_modulated(subbands, PrototypeDesign::default()).expect("bank"))
}

/// Every frame the decomposer emits for `len` samples.
pub fn frames(subbands: usize, taps: usize, len: usize) -> (Vec<SubbandFrame>, f64) {
    let (x, d, noise) = echo_signals(taps, len);
    let mut dec = SubbandDecomposer::new(bank(subbands), taps).expect("decomposer");
    let frames = x
        .iter()
        .zip(&d)
        .filter_map(|(&u, &d)| dec.push_samples(u, d).expect("finite"))
        .collect();
    (frames, noise)
}
