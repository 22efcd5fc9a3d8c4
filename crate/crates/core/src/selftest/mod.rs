//! Self-verification: benchmark data, independent oracles, and the
//! acceptance criteria run both by the `acceptance` test target and the
//! CLI `selftest` subcommand.

pub mod criteria;
pub mod data;
pub mod oracle;

pub use criteria::{run_all, CriterionResult};
