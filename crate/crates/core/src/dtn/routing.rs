use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct RouteEntry {
    pub next_hop: NodeId,
    /// Pins a specific link when several connect the same pair of nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

/// Static next-hop table of one node, keyed by destination.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoutingTable {
    pub entries: BTreeMap<NodeId, RouteEntry>,
}

impl RoutingTable {
    pub fn set(&mut self, dest: NodeId, next_hop: NodeId, link: Option<String>) {
        self.entries.insert(dest, RouteEntry { next_hop, link });
    }

    pub fn lookup(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dest)
    }
}

/// Routing tables of every node.
pub type Routes = BTreeMap<NodeId, RoutingTable>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteLookup {
    Next(NodeId),
    NoRoute,
}

pub fn route_next_hop(routes: &Routes, at: NodeId, dest: NodeId) -> RouteLookup {
    match routes.get(&at).and_then(|t| t.lookup(dest)) {
        Some(e) => RouteLookup::Next(e.next_hop),
        None => RouteLookup::NoRoute,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RouteError {
    #[error("routing loop from {from} towards {dest}: {path:?}")]
    Loop { from: NodeId, dest: NodeId, path: Vec<NodeId> },
}

/// Walks every route from every node towards every destination that
/// appears in any table and rejects cycles.
pub fn check_routes(routes: &Routes) -> Result<(), RouteError> {
    let dests: BTreeSet<NodeId> = routes.values().flat_map(|t| t.entries.keys().copied()).collect();
    for &from in routes.keys() {
        for &dest in &dests {
            let mut seen = BTreeSet::new();
            let mut path = vec![from];
            let mut at = from;
            while at != dest {
                if !seen.insert(at) {
                    return Err(RouteError::Loop { from, dest, path });
                }
                match route_next_hop(routes, at, dest) {
                    RouteLookup::Next(n) => {
                        path.push(n);
                        at = n;
                    }
                    RouteLookup::NoRoute => break,
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const VEH: NodeId = NodeId(1);
    const SAT: NodeId = NodeId(2);
    const GWA: NodeId = NodeId(3);
    const SRV: NodeId = NodeId(4);
    const GWB: NodeId = NodeId(5);
    const WS: NodeId = NodeId(6);

    fn dry_run_routes() -> Routes {
        let mut r = Routes::new();
        for (at, next) in [(VEH, SAT), (SAT, GWA), (GWA, SRV), (SRV, GWB), (GWB, WS)] {
            r.entry(at).or_default().set(WS, next, None);
        }
        r
    }

    #[test]
    fn lookups() {
        let r = dry_run_routes();
        assert_eq!(route_next_hop(&r, SAT, WS), RouteLookup::Next(GWA));
        assert_eq!(route_next_hop(&r, SRV, WS), RouteLookup::Next(GWB));
        assert_eq!(route_next_hop(&r, SRV, NodeId(99)), RouteLookup::NoRoute);
        assert_eq!(route_next_hop(&r, NodeId(42), WS), RouteLookup::NoRoute);
        check_routes(&r).unwrap();
    }

    #[test]
    fn loop_detected() {
        let mut r = dry_run_routes();
        r.entry(GWB).or_default().set(WS, GWA, None);
        assert!(matches!(check_routes(&r), Err(RouteError::Loop { .. })));
    }
}
