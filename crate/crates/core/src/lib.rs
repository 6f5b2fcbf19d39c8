//! Multiclass acyclic queueing networks under earliest-deadline-first service.
//!
//! Two halves:
//!
//! * [`simulator`]: an event-level simulation with per-customer deadlines,
//!   frontier tracking, and conditional lead-time profile sampling.
//! * [`frontier`]: heavy-traffic prediction. Station queue lengths (or
//!   workloads) are mapped back to frontier positions by inverting the
//!   frontier equations, and the frontiers give the predicted lead-time
//!   profile at every station.
//!
//! [`harness`] wires both together into experiments that compare predicted
//! and simulated profiles.

pub mod frontier;
pub mod harness;
pub mod leadtime;
pub mod presets;
pub mod simulator;
pub mod topology;

pub use frontier::two_station::{two_station_closed_form, ClosedForm, Region, TwoStationParams};
pub use frontier::{FrontierError, FrontierSolution, InversionMethod, WeightKind, WeightedModel};
pub use leadtime::{LeadTimeDist, LeadTimeError, TailTable};
pub use topology::{
    Class, ClassSpec, NetworkSpec, ReachSets, RenewalLaw, Station, Topology, TopologyError,
};
