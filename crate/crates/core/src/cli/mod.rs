//! Orchestration and reporting: CSV traces, experiment sweeps, SVG plots.

pub mod experiment;
pub mod plot;
pub mod trace_csv;

pub use experiment::{parse_experiment_spec, run_experiment, AggregateRow, ExperimentSpec};
pub use plot::{emit_boundary_plot, BoundaryPlot};
pub use trace_csv::{read_trace, write_trace, CSV_HEADER};
