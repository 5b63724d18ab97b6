//! Filter-bank common spatial patterns (FBCSP) for two-class motor-imagery
//! EEG, with a multi-session transfer variant (msFBCSP) that fuses the
//! current-session model with a model trained on up to four earlier
//! calibration sessions.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataio`]: sessions on disk and the published accuracy tables.
//! - [`dsp`]: Butterworth band-pass design, causal filtering, windowing.
//! - [`csp`]: per-cell CSP training and log-variance features.
//! - [`lda`]: shrinkage LDA emitting `[N x 2]` class probabilities.
//! - [`pipeline`]: single- and multi-session models, fusion, persistence.
//! - [`harness`]: evaluation protocol, statistics, synthetic EEG, studies.

pub mod csp;
pub mod dataio;
pub mod dsp;
mod error;
mod matrix_serde;
pub mod harness;
pub mod lda;
pub mod pipeline;

pub use error::{Error, Result};

pub use csp::CspModel;
pub use dataio::{Class, PaperTables, Session, Trial};
pub use dsp::{FilterBankSpec, IirFilter};
pub use lda::{LdaModel, ProbabilityMatrix};
pub use pipeline::{FbcspModel, MsFbcspModel};
