use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CameraId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ServerId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Camera(CameraId),
    Server(ServerId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub name: String,
    pub endpoints: [Node; 2],
}

impl Link {
    pub fn touches(&self, server: ServerId) -> bool {
        self.endpoints.contains(&Node::Server(server))
    }
}

/// A (server, ingress-link) placement choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arm {
    pub server: ServerId,
    pub link: LinkId,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(s{}, e{})", self.server.0, self.link.0)
    }
}

/// The camera network: cameras, edge servers and the links between them.
///
/// Entities are addressed by dense indices. Wherever a per-entity vector is
/// flattened (contexts, memory logs) servers come first, then links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkTopology {
    cameras: Vec<String>,
    servers: Vec<String>,
    links: Vec<Link>,
    adjacency: Vec<Vec<LinkId>>,
}

impl NetworkTopology {
    /// Build a topology from names. Each link is `(link id, endpoint a, endpoint b)`.
    pub fn new<S: Into<String>>(
        cameras: impl IntoIterator<Item = S>,
        servers: impl IntoIterator<Item = S>,
        links: impl IntoIterator<Item = (S, S, S)>,
    ) -> Result<Self> {
        let cameras: Vec<String> = cameras.into_iter().map(Into::into).collect();
        let servers: Vec<String> = servers.into_iter().map(Into::into).collect();
        if servers.is_empty() {
            return Err(Error::config("topology has no servers"));
        }

        let mut seen = HashSet::new();
        for name in cameras.iter().chain(servers.iter()) {
            if !seen.insert(name.clone()) {
                return Err(Error::config(format!("duplicate node id `{name}`")));
            }
        }

        let resolve = |name: &str| -> Result<Node> {
            if let Some(i) = servers.iter().position(|s| s == name) {
                Ok(Node::Server(ServerId(i)))
            } else if let Some(i) = cameras.iter().position(|c| c == name) {
                Ok(Node::Camera(CameraId(i)))
            } else {
                Err(Error::config(format!("link endpoint `{name}` is not a declared camera or server")))
            }
        };

        let mut link_names = HashSet::new();
        let mut parsed = Vec::new();
        for (name, a, b) in links {
            let (name, a, b): (String, String, String) = (name.into(), a.into(), b.into());
            if !link_names.insert(name.clone()) || seen.contains(&name) {
                return Err(Error::config(format!("duplicate link id `{name}`")));
            }
            if a == b {
                return Err(Error::config(format!("link `{name}` is a self-loop")));
            }
            parsed.push(Link {
                endpoints: [resolve(&a)?, resolve(&b)?],
                name,
            });
        }

        let adjacency: Vec<Vec<LinkId>> = (0..servers.len())
            .map(|s| {
                parsed
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.touches(ServerId(s)))
                    .map(|(i, _)| LinkId(i))
                    .collect()
            })
            .collect();
        if let Some(s) = adjacency.iter().position(Vec::is_empty) {
            return Err(Error::config(format!("server `{}` has no incident link", servers[s])));
        }

        Ok(Self {
            cameras,
            servers,
            links: parsed,
            adjacency,
        })
    }

    pub fn cameras(&self) -> &[String] {
        &self.cameras
    }

    pub fn servers(&self) -> &[String] {
        &self.servers
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// |V| + |E|, the length of a context vector.
    pub fn entity_count(&self) -> usize {
        self.servers.len() + self.links.len()
    }

    pub fn incident_links(&self, server: ServerId) -> &[LinkId] {
        &self.adjacency[server.0]
    }

    pub fn server_index(&self, name: &str) -> Option<ServerId> {
        self.servers.iter().position(|s| s == name).map(ServerId)
    }

    pub fn link_index(&self, name: &str) -> Option<LinkId> {
        self.links.iter().position(|l| l.name == name).map(LinkId)
    }

    pub fn camera_index(&self, name: &str) -> Option<CameraId> {
        self.cameras.iter().position(|c| c == name).map(CameraId)
    }

    pub fn arm(&self, server: ServerId, link: LinkId) -> Result<Arm> {
        if server.0 >= self.servers.len() {
            return Err(Error::invalid(format!("unknown server index {}", server.0)));
        }
        if link.0 >= self.links.len() {
            return Err(Error::invalid(format!("unknown link index {}", link.0)));
        }
        if !self.links[link.0].touches(server) {
            return Err(Error::invalid(format!(
                "link `{}` is not incident to server `{}`",
                self.links[link.0].name, self.servers[server.0]
            )));
        }
        Ok(Arm { server, link })
    }

    pub fn check_arm(&self, arm: Arm) -> Result<()> {
        self.arm(arm.server, arm.link).map(|_| ())
    }

    /// Every (server, incident link) pair, servers in order, links in id order.
    pub fn arms(&self) -> Vec<Arm> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(s, links)| {
                links.iter().map(move |&link| Arm {
                    server: ServerId(s),
                    link,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> NetworkTopology {
        NetworkTopology::new(
            ["c0"],
            ["s0", "s1"],
            [("e0", "c0", "s0"), ("e1", "c0", "s1"), ("e2", "s0", "s1")],
        )
        .unwrap()
    }

    #[test]
    fn arm_count_is_sum_of_degrees() {
        let t = triangle();
        let degrees: usize = (0..t.server_count()).map(|s| t.incident_links(ServerId(s)).len()).sum();
        assert_eq!(t.arms().len(), degrees);
        assert_eq!(t.arms().len(), 4);
        for arm in t.arms() {
            t.check_arm(arm).unwrap();
        }
    }

    #[test]
    fn rejects_unknown_endpoint() {
        let err = NetworkTopology::new(["c0"], ["s0"], [("e0", "c0", "s9")]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rejects_isolated_server() {
        assert!(NetworkTopology::new(["c0"], ["s0", "s1"], [("e0", "c0", "s0")]).is_err());
    }

    #[test]
    fn rejects_duplicate_ids() {
        assert!(NetworkTopology::new(["x"], ["x"], [("e0", "x", "x")]).is_err());
        assert!(NetworkTopology::new(["c0"], ["s0"], [("e0", "c0", "s0"), ("e0", "c0", "s0")]).is_err());
    }

    #[test]
    fn non_incident_arm_is_rejected() {
        let t = NetworkTopology::new(["c0"], ["s0", "s1"], [("e0", "c0", "s0"), ("e1", "c0", "s1")]).unwrap();
        assert!(t.arm(ServerId(0), LinkId(1)).is_err());
        assert!(t.arm(ServerId(0), LinkId(0)).is_ok());
    }
}
