//! Scenario orchestration for the `vpdirac` command-line tool.

pub mod norms;
pub mod report;
pub mod run;
pub mod scenario;

pub use run::{run_scenario, Failure, Outcome};
pub use scenario::{parse_config, Kind, Override, Scenario};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "VPDIRAC_THREADS";
