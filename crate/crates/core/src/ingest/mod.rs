//! Reading scenarios, mapping configuration excerpts and generating
//! synthetic scenarios.

pub mod config;
pub mod document;
pub mod generate;
pub mod openvpn;
pub mod ssh;
pub mod strongswan;

pub use config::{to_document, CipherMap, MapContext, MappedPi};
pub use document::{load_scenario, parse_scenario, serialize_scenario, Document};
pub use openvpn::map_openvpn;
pub use ssh::map_ssh;
pub use strongswan::map_strongswan;
pub use generate::{generate_scenario, matches_entry, missed, unexpected, GenerationParams};
