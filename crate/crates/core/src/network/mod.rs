pub mod capability;
pub mod entity;
pub mod topology;

pub use capability::{CapabilityProfile, FirewallAction, FirewallRule, MaxCoefficients};
pub use entity::{EntityForest, EntityId, NodeId, NodeKind};
pub use topology::Topology;
