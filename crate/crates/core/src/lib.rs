//! Slotted simulator and analytic toolkit for short-range millimeter-wave
//! MAC protocols.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] samples deployments of aligned links and thin obstacles on
//!   a torus and answers blockage queries.
//! * [`radio`] turns geometry into received power, SNR and SINR for
//!   ideal sector antennas.
//! * [`scenario`] bundles the two into a reproducible network description.
//! * [`conflict`] measures collision domains and collision probability.
//! * [`mac`] runs slotted ALOHA and TDMA over a deployment.
//! * [`csma`] covers RTS/CTS overhead arithmetic and the collision
//!   notification contention experiment.
//! * [`harness`] drives parameter sweeps and writes tidy CSV datasets.

pub mod conflict;
pub mod csma;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mac;
pub mod radio;
pub mod scenario;
pub mod seed;
pub mod stats;

pub use conflict::{
    collision_domain_histogram, estimate_collision_probability, strong_interferers,
    CollisionDomainHistogram, CollisionDomainReport, CollisionEstimate, DomainMode,
    StrongInterferers,
};
pub use csma::{
    channel_utilization, classify_reception, run_contention_experiment, BackoffConfig,
    ContentionConfig, ContentionStats, CsmaTimings, MessageKind, ProtocolVariant, ReceptionModel,
    ReceptionOutcome, Utilization,
};
pub use error::{Error, Result};
pub use geometry::{
    count_blockers, sample_deployment, segments_intersect, Arena, Deployment, DeploymentConfig,
    DirectedLink, Obstacle, Point2D, Segment,
};
pub use harness::{
    run_experiment, summarize, Dataset, ExperimentKind, ExperimentSpec, SummaryRecord,
};
pub use mac::{
    find_optimal_p, find_optimal_p_on_map, run_slotted_aloha, run_tdma, AlohaConfig, MacMetrics,
    OptimalP, SlotConfig, TrafficConfig,
};
pub use radio::{
    antenna_gain, received_power_dbm, AntennaPattern, ChannelParams, InterferenceMap, RadioConfig,
    RadioModel,
};
pub use scenario::{PowerPolicy, ResolvedScenario, Scenario};
pub use stats::Interval;
