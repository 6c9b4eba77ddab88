//! Experiment configuration, the Fixed and Greedy baselines, paired trials
//! over seeds, the re-identification stream and CSV output.

mod baselines;
mod config;
mod experiment;
mod output;
mod reid_stream;

pub use baselines::{FixedAgent, GreedyAgent};
pub use config::{Algorithm, ExperimentConfig, ScenarioMode};
pub use experiment::{run, run_ablations, run_fixed, run_greedy, run_on, run_trials, RunResult, TrialSummary};
pub use output::{emit_csv, read_delays, read_final_regret, write_delays, write_trace, TRACE_HEADER};
pub use reid_stream::{run_reid_stream, ReidStreamConfig, ReidStreamReport};
