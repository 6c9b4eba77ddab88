//! TOML schemas for topology and delay-model files. Unknown keys are rejected.
//!
//! Topology file:
//!
//! ```toml
//! cameras = ["c0"]
//! servers = ["s0", "s1"]
//! links = [
//!     { id = "e0", endpoints = ["c0", "s0"] },
//!     { id = "e1", endpoints = ["c0", "s1"] },
//! ]
//! ```
//!
//! Delay-model file (every server and link of the topology must appear):
//!
//! ```toml
//! [servers.s0]
//! delay = { family = "lognormal", mu = 2.0, sigma = 0.1 }
//! load_penalty_ms = 4.0
//!
//! [links.e0]
//! delay = { family = "constant", ms = 5.0 }
//!
//! [dynamic]
//! enabled = true
//! arrival_probability = 0.1
//! inflation = [2.0, 4.0]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::delay::{DelayDist, DelayModel, DynamicMode, ServerDelay};
use super::topology::NetworkTopology;
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    #[serde(default)]
    pub cameras: Vec<String>,
    pub servers: Vec<String>,
    pub links: Vec<LinkEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub id: String,
    pub endpoints: [String; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerEntry {
    pub delay: DelayDist,
    #[serde(default)]
    pub load_penalty_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDelayEntry {
    pub delay: DelayDist,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayFile {
    pub servers: BTreeMap<String, ServerEntry>,
    pub links: BTreeMap<String, LinkDelayEntry>,
    #[serde(default)]
    pub dynamic: Option<DynamicMode>,
}

impl TopologyFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("topology: {e}")))
    }

    pub fn build(&self) -> Result<NetworkTopology> {
        NetworkTopology::new(
            self.cameras.iter().cloned(),
            self.servers.iter().cloned(),
            self.links
                .iter()
                .map(|l| (l.id.clone(), l.endpoints[0].clone(), l.endpoints[1].clone())),
        )
    }
}

impl DelayFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("delay model: {e}")))
    }

    /// Align the per-name parameters with `topology`'s indices.
    pub fn build(&self, topology: &NetworkTopology) -> Result<DelayModel> {
        for name in self.servers.keys() {
            if topology.server_index(name).is_none() {
                return Err(Error::config(format!("delay model names unknown server `{name}`")));
            }
        }
        for name in self.links.keys() {
            if topology.link_index(name).is_none() {
                return Err(Error::config(format!("delay model names unknown link `{name}`")));
            }
        }
        let servers = topology
            .servers()
            .iter()
            .map(|name| {
                self.servers
                    .get(name)
                    .map(|e| ServerDelay {
                        delay: e.delay.clone(),
                        load_penalty_ms: e.load_penalty_ms,
                    })
                    .ok_or_else(|| Error::config(format!("no delay parameters for server `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let links = topology
            .links()
            .iter()
            .map(|l| {
                self.links
                    .get(&l.name)
                    .map(|e| e.delay.clone())
                    .ok_or_else(|| Error::config(format!("no delay parameters for link `{}`", l.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = DelayModel {
            servers,
            links,
            dynamic: self.dynamic.clone().unwrap_or_default(),
        };
        model.validate_for(topology)?;
        Ok(model)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_topology(path: &Path) -> Result<NetworkTopology> {
    TopologyFile::parse(&read(path)?)?.build()
}

pub fn load_delay_model(path: &Path, topology: &NetworkTopology) -> Result<DelayModel> {
    DelayFile::parse(&read(path)?)?.build(topology)
}
