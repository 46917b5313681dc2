//! Normalized subband adaptive filtering (NSAF) and its joint step-size /
//! regularization optimized variant (JOSR-NSAF), together with the
//! closed-form mean-square-deviation model and an experiment harness for
//! echo-path identification.
//!
//! ```no_run
//! use nsaf_core::harness::{run_monte_carlo, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_file("experiment.json")?;
//! let result = run_monte_carlo(&cfg)?;
//! println!("{}", nsaf_core::harness::csv_string(&result.curves));
//! # Ok::<(), nsaf_core::harness::HarnessError>(())
//! ```

pub mod adaptive;
pub mod filterbank;
pub mod harness;
pub mod signal;
pub mod theory;

pub use adaptive::{
    AdaptError, AdaptiveFilter, JosrFilter, NoiseScaling, NsafConfig, NsafFilter, StepReport,
    WeightVector,
};
pub use filterbank::{AnalysisBank, PrototypeDesign, PrototypeFilter, SubbandDecomposer, SubbandFrame};
pub use signal::{EchoPath, PathSchedule, RngSeed, SignalBuffer};
pub use theory::{MsdTrajectory, StepParams, SubbandStats};
