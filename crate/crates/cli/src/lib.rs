//! Scenario files, built-in scenario generators, the run pipeline and the
//! run comparison report behind the `fdtd-mor` command line tool.

pub mod compare;
pub mod generators;
pub mod pipeline;
pub mod scenario;

/// Process exit codes used by the binary.
pub mod exit_codes {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG_ERROR: i32 = 1;
    pub const DIVERGENCE: i32 = 2;
    pub const COMPARISON_FAILED: i32 = 3;
}
