//! Timing estimation and timeliness verification for message-passing robot
//! control software.
//!
//! The crate follows the measurement-to-verdict loop end to end:
//!
//! * [`graph`] holds the node/topic/service topology of a system,
//! * [`sim`] drives that topology with configured latencies and emits timed
//!   trace entries, which [`trace`] reads, writes and pairs into durations,
//! * [`stats`] turns duration samples into interval histograms,
//! * [`pipeline`] compiles a staged process description that uses those
//!   histograms into a probabilistic timed program ([`ptp`]),
//! * [`checker`] answers `Pmax`/`Pmin` reachability queries on such programs
//!   through digital clocks and value iteration,
//! * [`prism`] exchanges models with the PRISM `pta` language.

pub mod checker;
pub mod graph;
mod lex;
pub mod pipeline;
pub mod prism;
pub mod ptp;
pub mod ratio;
pub mod sim;
pub mod stats;
pub mod trace;


pub use checker::{
    check, granularity_ladder, parse_query, CheckError, CheckOptions, CheckResult, Ladder, Method, Opt,
    PctlQuery,
};
pub use graph::{load_graph, validate_graph, write_graph, RosGraph};
pub use pipeline::{bind_statistics, compile_pipeline, validate_pipeline, PipelineSpec};
pub use prism::{export_prism, parse_prism};
pub use ptp::{validate_ptp, Ptp, Zone};
pub use ratio::Prob;
pub use sim::{simulate, ScenarioConfig};
pub use stats::{build_histogram, summarize_samples, IntervalHistogram, SummaryStats};
pub use trace::{pair_events, parse_trace_event, write_trace, DurationSample, TraceEvent};
