//! Entropy assessment of low-entropy system counter traces.
//!
//! Traces are differenced, XOR-folded to `alpha` bits and packed into bytes;
//! plug-in Shannon and min-entropy estimates rank the counters, and
//! mutual information over nibble streams finds dependent counters and
//! checks cross-run independence.

pub mod dependence;
pub mod diag;
pub mod entropy;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod report;
pub mod synth;
pub mod trace;

pub use diag::Diagnostic;
pub use error::{Error, Result};
pub use preprocess::{Alpha, SymbolStream, SymbolWidth};
pub use trace::{CounterTrace, TraceRun};
