//! Optional CSV traces.
//!
//! - packets: `vehicle,id,created_at,delivered_at,attempts,state`
//! - links: `time,vehicle,enb,d,los,PL,SF,fading_dB`, sampled at every
//!   association epoch
//! - topology: `entity,id,x,y`, written once at the start of the run

use std::io::{self, Write};

use crate::channel::LinkState;
use crate::geometry::Topology;
use crate::stack::PacketRecord;
use crate::time::SimTime;

pub const PACKET_HEADER: &str = "vehicle,id,created_at,delivered_at,attempts,state";
pub const LINK_HEADER: &str = "time,vehicle,enb,d,los,PL,SF,fading_dB";
pub const TOPOLOGY_HEADER: &str = "entity,id,x,y";

/// Which trace a run writes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceKind {
    #[default]
    None,
    Packets,
    Links,
    Topology,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::None => "none",
            TraceKind::Packets => "packets",
            TraceKind::Links => "links",
            TraceKind::Topology => "topology",
        }
    }
}

impl std::str::FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(TraceKind::None),
            "packets" => Ok(TraceKind::Packets),
            "links" => Ok(TraceKind::Links),
            "topology" => Ok(TraceKind::Topology),
            other => Err(format!("unknown trace `{other}` (none, packets, links, topology)")),
        }
    }
}

/// Receives simulation events worth tracing. Every method defaults to a no-op.
pub trait TraceSink {
    /// Called once per packet when it reaches a final state, or at run end
    /// for packets still held by the stack.
    fn packet(&mut self, _vehicle: usize, _pkt: &PacketRecord) {}

    fn wants_links(&self) -> bool {
        false
    }

    fn link(&mut self, _t: SimTime, _vehicle: usize, _enb: usize, _link: &LinkState) {}

    fn topology(&mut self, _topology: &Topology) {}
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {}

pub fn write_packet_row<W: Write>(w: &mut W, vehicle: usize, p: &PacketRecord) -> io::Result<()> {
    let delivered = p
        .delivered_at
        .map(|t| format!("{:.9}", t.as_secs_f64()))
        .unwrap_or_default();
    writeln!(
        w,
        "{},{},{:.9},{},{},{}",
        vehicle,
        p.id,
        p.created_at.as_secs_f64(),
        delivered,
        p.tx_attempts,
        p.state.as_str()
    )
}

/// Streams the selected traces to writers. Write errors are latched and
/// reported by [`CsvTrace::finish`].
pub struct CsvTrace<W: Write> {
    packets: Option<W>,
    links: Option<W>,
    topology: Option<W>,
    error: Option<io::Error>,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(packets: Option<W>, links: Option<W>, topology: Option<W>) -> io::Result<Self> {
        let mut t = CsvTrace {
            packets,
            links,
            topology,
            error: None,
        };
        if let Some(w) = t.packets.as_mut() {
            writeln!(w, "{PACKET_HEADER}")?;
        }
        if let Some(w) = t.links.as_mut() {
            writeln!(w, "{LINK_HEADER}")?;
        }
        if let Some(w) = t.topology.as_mut() {
            writeln!(w, "{TOPOLOGY_HEADER}")?;
        }
        Ok(t)
    }

    /// A trace writing only `kind` to `w`.
    pub fn single(kind: TraceKind, w: W) -> io::Result<Self> {
        match kind {
            TraceKind::None => Self::new(None, None, None),
            TraceKind::Packets => Self::new(Some(w), None, None),
            TraceKind::Links => Self::new(None, Some(w), None),
            TraceKind::Topology => Self::new(None, None, Some(w)),
        }
    }

    fn latch(&mut self, r: io::Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        for w in [&mut self.packets, &mut self.links, &mut self.topology].into_iter().flatten() {
            w.flush()?;
        }
        Ok(())
    }
}

impl<W: Write> TraceSink for CsvTrace<W> {
    fn packet(&mut self, vehicle: usize, pkt: &PacketRecord) {
        if let Some(w) = self.packets.as_mut() {
            let r = write_packet_row(w, vehicle, pkt);
            self.latch(r);
        }
    }

    fn wants_links(&self) -> bool {
        self.links.is_some()
    }

    fn link(&mut self, t: SimTime, vehicle: usize, enb: usize, l: &LinkState) {
        if let Some(w) = self.links.as_mut() {
            let r = writeln!(
                w,
                "{:.6},{},{},{:.3},{},{:.3},{:.3},{:.3}",
                t.as_secs_f64(),
                vehicle,
                enb,
                l.distance,
                u8::from(l.los),
                l.path_loss,
                l.shadowing,
                10.0 * l.fading_power.log10()
            );
            self.latch(r);
        }
    }

    fn topology(&mut self, topo: &Topology) {
        if let Some(w) = self.topology.as_mut() {
            let mut r = Ok(());
            for (i, e) in topo.enbs.iter().enumerate() {
                r = r.and_then(|_| writeln!(w, "enb,{},{:.3},{:.3}", i, e.x, e.y));
            }
            for (i, v) in topo.vehicles.iter().enumerate() {
                r = r.and_then(|_| writeln!(w, "vehicle,{},{:.3},{:.3}", i, v.pos.x, v.pos.y));
            }
            self.latch(r);
        }
    }
}
