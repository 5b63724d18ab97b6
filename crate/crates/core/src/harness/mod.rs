//! Evaluation protocol, statistics, synthetic data and study drivers.

pub mod eval;
pub mod paper;
pub mod stats;
pub mod study;
pub mod synth;

pub use eval::{accuracy, split_calibration, Split};
pub use paper::{paper_check, paper_check_tables, PaperCheckReport};
pub use stats::{median_range, wilcoxon_signed_rank, MedianRange, WilcoxonResult};
pub use study::{run_study, EvalReport, Method, StudyOptions};
pub use synth::{synth_study, synth_subject, SynthConfig};
