//! Cooperative localization of blind nodes in small indoor networks.
//!
//! The pipeline for one trial is: generate a random network, keep the links
//! within radio range, draw TOA range measurements with AWGN and LOS/NLOS
//! bias, solve the semidefinite relaxation of the range equations, refine
//! the estimate locally, and score it by the average position error.

pub mod channel;
pub mod cli;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod refine;
pub mod sdp;

pub use channel::{ChannelKind, ChannelModel, NlosMode, RangeMeasurements};
pub use error::{Error, Result};
pub use harness::{ScenarioConfig, SweepKind, SweepPoint, SweepSpec, TrialResult};
pub use network::{Area, Edge, EdgeSets, Network, Point2};
