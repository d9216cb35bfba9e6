//! Instantly decodable network coding: the two-layer IDNC graph, clique
//! selection policies, closed-form graph evolution analytics, an exact
//! stochastic shortest path oracle for tiny frames and a Monte Carlo
//! recovery simulator.

pub mod analytics;
pub mod clique_search;
pub mod error;
pub mod graph;
pub mod model;
pub mod policies;
pub mod sim;
pub mod ssp;

pub use error::{Error, Result};
pub use graph::{build_graph, coded_packet, Clique, IdncGraph, Layer, Vertex};
pub use model::{init_frame, Cell, FeedbackMatrix, FrameState, ReceiverProfile};
pub use policies::{CliqueSelector, PolicyKind, PolicyOptions, SecondaryWeight};
pub use sim::{run_experiment, run_sweep, run_trial, Axis, CompletionRecord, ExperimentSummary, SimConfig};
pub use ssp::{SspInstance, SspState, ValueTable};
