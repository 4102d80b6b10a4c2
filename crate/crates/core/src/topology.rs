//! Node layout, radio neighbourhoods and minimum-hop routing.
//!
//! Routes are computed over alive nodes only. When several shortest paths
//! exist, the one whose successive next hops have the lowest ids wins.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Node, NodeId, NodeRole, Position};
use crate::rng::{stream_seed, Stream};
use crate::scenario::{Placement, ScenarioConfig, SubSinkChoice};

/// Cached per-node routes, refreshed lazily after node deaths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RouteTable {
    /// Route from each node to its role-appropriate collector.
    pub collector: Vec<Option<Vec<NodeId>>>,
    /// Direct route from each node to the sink.
    pub sink: Vec<Option<Vec<NodeId>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    comm_radius: f64,
    adjacency: Vec<Vec<NodeId>>,
    alive: Vec<bool>,
    sink: NodeId,
    sub_sink: Option<NodeId>,
    aggregators: Vec<NodeId>,
    routes: RouteTable,
}

impl Topology {
    /// Builds adjacency from positions and checks that every node can reach the sink.
    pub fn from_nodes(nodes: Vec<Node>, comm_radius: f64) -> Result<Self> {
        let sinks: Vec<_> = nodes.iter().filter(|n| n.role == NodeRole::Sink).collect();
        if sinks.len() != 1 {
            return Err(Error::InvalidScenario(format!(
                "exactly one sink required, found {}",
                sinks.len()
            )));
        }
        let sink = sinks[0].id;
        if nodes.iter().enumerate().any(|(i, n)| n.id.index() != i) {
            return Err(Error::InvalidScenario(
                "node ids must be dense 0..N-1".into(),
            ));
        }
        let sub_sinks: Vec<NodeId> = nodes
            .iter()
            .filter(|n| n.role == NodeRole::SubSink)
            .map(|n| n.id)
            .collect();
        if sub_sinks.len() > 1 {
            return Err(Error::InvalidScenario(
                "at most one sub-sink is supported".into(),
            ));
        }
        let aggregators = nodes
            .iter()
            .filter(|n| n.role == NodeRole::Aggregator)
            .map(|n| n.id)
            .collect();

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for a in &nodes {
            for b in &nodes {
                if a.id != b.id && a.position.distance(&b.position) <= comm_radius {
                    adjacency[a.id.index()].push(b.id);
                }
            }
        }

        let mut topo = Topology {
            alive: vec![true; nodes.len()],
            nodes,
            comm_radius,
            adjacency,
            sink,
            sub_sink: sub_sinks.first().copied(),
            aggregators,
            routes: RouteTable::default(),
        };
        let dist = topo.hop_distances(sink);
        if let Some(orphan) = dist.iter().position(Option::is_none) {
            return Err(Error::DisconnectedTopology {
                node: NodeId(orphan),
            });
        }
        topo.refresh_routes();
        Ok(topo)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn role(&self, id: NodeId) -> NodeRole {
        self.nodes[id.index()].role
    }

    pub fn comm_radius(&self) -> f64 {
        self.comm_radius
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn sub_sink(&self) -> Option<NodeId> {
        self.sub_sink
    }

    pub fn aggregators(&self) -> &[NodeId] {
        &self.aggregators
    }

    pub fn sensors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Sensor)
            .map(|n| n.id)
    }

    /// Full adjacency of `n`, dead neighbours included, ascending ids.
    pub fn adjacency(&self, n: NodeId) -> &[NodeId] {
        &self.adjacency[n.index()]
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.node(a).position.distance(&self.node(b).position)
    }

    pub fn is_alive(&self, n: NodeId) -> bool {
        self.alive[n.index()]
    }

    pub fn mark_dead(&mut self, n: NodeId) {
        self.alive[n.index()] = false;
    }

    /// Alive neighbours of `n`, excluding `n` itself.
    pub fn neighbors_in_round(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.adjacency[n.index()]
            .iter()
            .copied()
            .filter(|&m| m != n && self.is_alive(m))
            .collect()
    }

    /// BFS hop distances from `origin` over alive nodes; `None` for unreachable or dead nodes.
    pub fn hop_distances(&self, origin: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        if !self.is_alive(origin) {
            return dist;
        }
        dist[origin.index()] = Some(0);
        let mut queue = VecDeque::from([origin]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap();
            for &v in &self.adjacency[u.index()] {
                if self.is_alive(v) && dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Minimum-hop path from `from` to `to` over alive nodes, lowest next-hop id on ties.
    pub fn shortest_route(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>> {
        let no_route = || Error::NoRoute {
            from,
            target: format!("node {to}"),
        };
        if !self.is_alive(from) {
            return Err(no_route());
        }
        let dist = self.hop_distances(to);
        let mut cur = from;
        let mut d = dist[from.index()].ok_or_else(no_route)?;
        let mut path = vec![from];
        while d > 0 {
            cur = self.adjacency[cur.index()]
                .iter()
                .copied()
                .find(|v| dist[v.index()] == Some(d - 1))
                .expect("BFS layer always has a predecessor");
            path.push(cur);
            d -= 1;
        }
        Ok(path)
    }

    /// The collector a node reports to: sensors to the nearest aggregator,
    /// aggregators to the sub-sink, the sub-sink to the sink.
    pub fn collector_of(&self, n: NodeId) -> Result<NodeId> {
        match self.role(n) {
            NodeRole::Sink => Ok(n),
            NodeRole::SubSink => Ok(self.sink),
            NodeRole::Aggregator => self.sub_sink.ok_or_else(|| Error::NoRoute {
                from: n,
                target: "sub-sink".into(),
            }),
            NodeRole::Sensor => {
                let dist = self.hop_distances(n);
                self.aggregators
                    .iter()
                    .filter_map(|&a| dist[a.index()].map(|d| (d, a)))
                    .min()
                    .map(|(_, a)| a)
                    .ok_or(Error::NoRoute {
                        from: n,
                        target: "any aggregator".into(),
                    })
            }
        }
    }

    pub fn route_to_collector(&self, n: NodeId) -> Result<Vec<NodeId>> {
        let collector = self.collector_of(n)?;
        self.shortest_route(n, collector)
    }

    /// Recomputes every cached route against the current alive set.
    pub fn refresh_routes(&mut self) {
        let ids: Vec<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let alive_route = |f: &dyn Fn(NodeId) -> Result<Vec<NodeId>>, id: NodeId| {
            if self.is_alive(id) {
                f(id).ok()
            } else {
                None
            }
        };
        let collector = ids
            .iter()
            .map(|&id| alive_route(&|n| self.route_to_collector(n), id))
            .collect();
        let sink = ids
            .iter()
            .map(|&id| alive_route(&|n| self.shortest_route(n, self.sink), id))
            .collect();
        self.routes = RouteTable { collector, sink };
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    pub fn cached_collector_route(&self, n: NodeId) -> Option<&[NodeId]> {
        self.routes.collector[n.index()].as_deref()
    }

    pub fn cached_sink_route(&self, n: NodeId) -> Option<&[NodeId]> {
        self.routes.sink[n.index()].as_deref()
    }
}

fn place(cfg: &ScenarioConfig, seed: u64) -> Vec<Position> {
    let n = cfg.node_count;
    match cfg.placement {
        Placement::Explicit => cfg.positions.clone(),
        Placement::Grid => {
            let cols = if cfg.grid_columns > 0 {
                cfg.grid_columns
            } else {
                (n as f64).sqrt().ceil() as usize
            };
            (0..n)
                .map(|i| {
                    Position::new(
                        (i % cols) as f64 * cfg.grid_spacing,
                        (i / cols) as f64 * cfg.grid_spacing,
                    )
                })
                .collect()
        }
        Placement::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Placement));
            (0..n)
                .map(|_| {
                    let x = rng.random_range(0.0..cfg.area_side);
                    let y = rng.random_range(0.0..cfg.area_side);
                    Position::new(x, y)
                })
                .collect()
        }
    }
}

/// Index of the candidate closest to `target`, lowest id on ties.
fn nearest(positions: &[Position], candidates: &[usize], target: Position) -> Option<usize> {
    candidates.iter().copied().min_by(|&a, &b| {
        positions[a]
            .distance(&target)
            .total_cmp(&positions[b].distance(&target))
            .then(a.cmp(&b))
    })
}

fn bounding_box(positions: &[Position]) -> (Position, Position) {
    let mut lo = Position::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Position::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in positions {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

fn assign_roles(cfg: &ScenarioConfig, positions: &[Position]) -> Vec<NodeRole> {
    let n = positions.len();
    let mut roles = vec![NodeRole::Sensor; n];
    roles[cfg.sink.index()] = NodeRole::Sink;

    let sub_sink = match cfg.sub_sink {
        SubSinkChoice::Disabled => None,
        SubSinkChoice::Node(id) => Some(id.index()),
        SubSinkChoice::Auto if n >= 3 => {
            let cx = positions.iter().map(|p| p.x).sum::<f64>() / n as f64;
            let cy = positions.iter().map(|p| p.y).sum::<f64>() / n as f64;
            let candidates: Vec<usize> = (0..n).filter(|&i| i != cfg.sink.index()).collect();
            nearest(positions, &candidates, Position::new(cx, cy))
        }
        SubSinkChoice::Auto => None,
    };
    if let Some(s) = sub_sink {
        roles[s] = NodeRole::SubSink;
    }

    let eligible = |roles: &[NodeRole]| -> Vec<usize> {
        (0..n).filter(|&i| roles[i] == NodeRole::Sensor).collect()
    };

    if !cfg.aggregators.is_empty() {
        for a in &cfg.aggregators {
            roles[a.index()] = NodeRole::Aggregator;
        }
    } else if cfg.aggregator_every > 0 {
        let k = cfg.aggregator_every;
        for i in eligible(&roles) {
            if i % k == k - 1 {
                roles[i] = NodeRole::Aggregator;
            }
        }
    } else if cfg.aggregator_count > 0 {
        // Leave at least one sensor behind.
        let wanted = cfg
            .aggregator_count
            .min(eligible(&roles).len().saturating_sub(1));
        let side = (wanted as f64).sqrt().ceil().max(1.0) as usize;
        let (lo, hi) = bounding_box(positions);
        let cell_w = (hi.x - lo.x) / side as f64;
        let cell_h = (hi.y - lo.y) / side as f64;
        for k in 0..wanted {
            let (row, col) = (k / side, k % side);
            let target = Position::new(
                lo.x + (col as f64 + 0.5) * cell_w,
                lo.y + (row as f64 + 0.5) * cell_h,
            );
            if let Some(i) = nearest(positions, &eligible(&roles), target) {
                roles[i] = NodeRole::Aggregator;
            }
        }
    }
    roles
}

/// Lays out nodes and roles from the scenario; `seed` drives uniform placement.
pub fn build_topology(cfg: &ScenarioConfig, seed: u64) -> Result<Topology> {
    if cfg.node_count < 2 {
        return Err(Error::InvalidScenario(
            "node_count must be at least 2".into(),
        ));
    }
    let positions = place(cfg, seed);
    let roles = assign_roles(cfg, &positions);
    let nodes = positions
        .into_iter()
        .zip(roles)
        .enumerate()
        .map(|(i, (position, role))| Node {
            id: NodeId(i),
            role,
            position,
        })
        .collect();
    Topology::from_nodes(nodes, cfg.comm_radius)
}
