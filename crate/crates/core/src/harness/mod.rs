//! Configuration, seeded parallel sweeps over `(SNR, ξ_i, ξ_o)` and result
//! files.
//!
//! SNR is defined as `σ_d²/σ_w²`: data symbol power over the per-sample AWGN
//! variance.

mod config;
mod report;
mod sweep;

pub use config::{
    pair_xi, parse_grid, parse_list, Mode, RawConfig, SweepConfig, DEFAULT_MIN_BITS, DEFAULT_MSE_TRIALS, DEFAULT_SEED,
};
pub use report::{emit_results, parse_csv, summary_table, to_csv, CSV_HEADER};
pub use sweep::{
    run_cell, run_sweep, run_sweep_with, run_trial, with_threads, CellPlan, CellStatus, ResultRow, SweepContext,
    SweepKind, TrialOutcome,
};
