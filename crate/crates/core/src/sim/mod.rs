//! Scenario configuration, closed-loop runs and their artifacts.

pub mod config;
pub mod example1;
pub mod output;
pub mod run;
pub mod svg;

pub use config::{
    ClassKSpec, ConstantsSpec, ControllerSpec, DomainSpec, ExtentSpec, FilterSpec, GainsSpec, OutputSpec, PolyTerm,
    SafeSpec, SamplingSpec, Scenario, ScenarioConfig, SystemSpec,
};
pub use example1::{run_example1_table, Example1Report};
pub use output::{emit_outputs, parse_trajectory_csv, summary_json, trajectory_csv};
pub use run::{run_scenario, HaltRecord, HaltRow, RunSummary, SolveTimeStats, StepRecord, Trajectory};
