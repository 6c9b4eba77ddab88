//! Simulated MEC-enabled camera network.
//!
//! Per-slot server and link delays are drawn from configured distributions
//! (optionally inflated by random background tasks); a placement's cost is
//! the link delay plus the server delay plus a linear penalty for every
//! module already running on that server.

mod config;
mod delay;
mod topology;

pub use config::{load_delay_model, load_topology, DelayFile, LinkDelayEntry, LinkEntry, ServerEntry, TopologyFile};
pub use delay::{end_to_end_cost, sample_slot, DelayDist, DelayModel, DynamicMode, ServerDelay, Simulator, SlotObservation};
pub use topology::{Arm, CameraId, Link, LinkId, NetworkTopology, Node, ServerId};
