//! Hop-by-hop forwarding with per-hop energy billing.

use std::collections::BTreeMap;

use crate::energy::{rx_cost, tx_cost, EnergyState, RadioParams};
use crate::error::{Error, Result};
use crate::model::{canonical_order, NodeId, Packet, PacketSizing, Round, SensorReading};
use crate::topology::Topology;

/// One packet crossing one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionEvent {
    pub round: Round,
    pub packet: Packet,
    pub from: NodeId,
    pub to: NodeId,
    pub distance: f64,
    /// Nominal radio-model costs for this hop.
    pub tx_energy: f64,
    pub rx_energy: f64,
    /// Energy actually drawn from each battery: equal to the nominal cost
    /// unless the node ran dry (clamped), zero for the infinite-budget sink.
    pub tx_charged: f64,
    pub rx_charged: f64,
}

/// A reading that reached the end of a route, with the hops it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub reading: SensorReading,
    pub hops: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dispatch {
    pub events: Vec<TransmissionEvent>,
    pub delivered: Vec<Delivery>,
    pub lost: Vec<SensorReading>,
}

impl Dispatch {
    fn absorb(&mut self, other: Dispatch) {
        self.events.extend(other.events);
        self.delivered.extend(other.delivered);
        self.lost.extend(other.lost);
    }
}

/// Shared radio settings for a dissemination call.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub radio: RadioParams,
    pub sizing: PacketSizing,
    pub batch_cap: usize,
    pub round: Round,
}

/// Sends `readings` along `route` in packets of at most `batch_cap`
/// readings. A packet whose next hop has a dead endpoint, or whose receiver
/// dies on reception, is lost along with its remaining hops.
pub fn send_along(
    route: &[NodeId],
    readings: &[SensorReading],
    topology: &mut Topology,
    energy: &mut [EnergyState],
    link: Link,
) -> Result<Dispatch> {
    let (Some(&src), Some(&dst)) = (route.first(), route.last()) else {
        return Err(Error::NoRoute {
            from: readings.first().map_or(NodeId(0), |r| r.source),
            target: "empty route".into(),
        });
    };
    let mut out = Dispatch::default();
    if readings.is_empty() {
        return Ok(out);
    }
    let hops = route.len() - 1;
    if hops == 0 {
        out.delivered = readings
            .iter()
            .map(|&reading| Delivery { reading, hops })
            .collect();
        return Ok(out);
    }
    assert!(link.batch_cap > 0, "batch_cap must be positive");

    for chunk in readings.chunks(link.batch_cap) {
        let packet = Packet::new(src, dst, chunk.to_vec(), &link.sizing);
        let mut arrived = true;
        for pair in route.windows(2) {
            let (from, to) = (pair[0], pair[1]);
            if !topology.is_alive(from) || !topology.is_alive(to) {
                arrived = false;
                break;
            }
            let distance = topology.distance(from, to);
            let tx_energy = tx_cost(&link.radio, packet.bits, distance);
            let rx_energy = rx_cost(&link.radio, packet.bits);
            let tx_charged = energy[from.index()].charge(tx_energy);
            let rx_charged = energy[to.index()].charge(rx_energy);
            for n in [from, to] {
                if !energy[n.index()].alive {
                    topology.mark_dead(n);
                }
            }
            out.events.push(TransmissionEvent {
                round: link.round,
                packet: packet.clone(),
                from,
                to,
                distance,
                tx_energy,
                rx_energy,
                tx_charged,
                rx_charged,
            });
            if !topology.is_alive(to) {
                arrived = false;
                break;
            }
        }
        if arrived {
            out.delivered.extend(
                packet
                    .payload
                    .iter()
                    .map(|&reading| Delivery { reading, hops }),
            );
        } else {
            out.lost.extend(packet.payload);
        }
    }
    Ok(out)
}

/// Baseline architecture: every reading travels from its source straight to
/// the sink along the cached sink route. Sources are served in id order.
pub fn baseline_forward_all(
    readings: &[SensorReading],
    topology: &mut Topology,
    energy: &mut [EnergyState],
    link: Link,
) -> Dispatch {
    let mut by_source: BTreeMap<NodeId, Vec<SensorReading>> = BTreeMap::new();
    for r in canonical_order(readings.to_vec()) {
        by_source.entry(r.source).or_default().push(r);
    }
    let mut out = Dispatch::default();
    for (source, batch) in by_source {
        match topology.cached_sink_route(source).map(<[NodeId]>::to_vec) {
            Some(route) if topology.is_alive(source) => {
                let d = send_along(&route, &batch, topology, energy, link)
                    .expect("cached routes are never empty");
                out.absorb(d);
            }
            _ => out.lost.extend(batch),
        }
    }
    out
}
