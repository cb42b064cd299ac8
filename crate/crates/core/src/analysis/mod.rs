//! Certification and diagnostics built on the flow.

pub mod concentration;
pub mod example1;
pub mod lions;
pub mod splitting;
pub mod theorem12;
pub mod verify;

pub use concentration::{concentration_monitor, concentration_monitor_with, talenti_bubble, ConcentrationConfig, ConcentrationReport};
pub use example1::{build_example1_k, save_sweep_csv, sweep_minimum, test_function_ue, ue_sweep, write_sweep_csv, Example1Params, SweepPoint};
pub use lions::{
    check_lions, default_starts, estimate_l, estimate_l_parallel, LEstimate, LionsCheck, LionsVerdict, Start, StartRun,
    StartSet,
};
pub use splitting::brezis_lieb_check;
pub use theorem12::{check_theorem12, coercivity_on_trace, spectral_gap_slack, BranchFlow, Coercivity, Theorem12Report};
pub use verify::{verify_solution, SolutionReport};
