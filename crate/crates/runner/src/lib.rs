//! Command-line experiment runner for `lvwf-core`: JSON-configured runs with
//! manifests and verdicts, and the acceptance criteria grouped into suites.

pub mod criteria;
pub mod experiment;
pub mod suite;

pub use criteria::{Mode, Outcome, Timed, CRITERIA};
pub use experiment::{run, ExperimentSpec, RunReport};
pub use suite::{run_suite, Suite, SuiteReport};
