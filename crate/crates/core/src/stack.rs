//! Downlink protocol stack: CBR traffic, RLC-AM buffering and reordering,
//! equal-share scheduling and HARQ.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, Tech};
use crate::radio::SINR_OUTAGE_DB;
use crate::time::SimTime;

/// Transmission attempts per HARQ round.
pub const HARQ_MAX: u8 = 4;
/// Block error rate at the scheduled operating point.
pub const BASELINE_BLER: f64 = 1e-2;
/// Effective SINR bonus per retransmission from soft combining, dB.
pub const HARQ_COMBINING_DB: f64 = 3.0;

/// MAC slot length.
pub fn slot_duration(tech: Tech) -> SimTime {
    match tech {
        Tech::Lte => SimTime::from_millis(1),
        Tech::MmWave => SimTime::from_micros(125),
    }
}

/// HARQ feedback round trip.
pub fn harq_rtt(tech: Tech) -> SimTime {
    let slots = match tech {
        Tech::Lte => 8,
        Tech::MmWave => 4,
    };
    SimTime(slot_duration(tech).0 * slots)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PacketState {
    Queued,
    InFlight,
    Delivered,
    Dropped,
}

impl PacketState {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketState::Queued => "Queued",
            PacketState::InFlight => "InFlight",
            PacketState::Delivered => "Delivered",
            PacketState::Dropped => "Dropped",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketRecord {
    /// Application sequence number, counts dropped packets too.
    pub id: u64,
    /// RLC sequence number, assigned on admission to the buffer.
    pub sn: u64,
    pub size: u32,
    pub created_at: SimTime,
    pub delivered_at: Option<SimTime>,
    /// Attempts in the current HARQ round.
    pub tx_attempts: u8,
    /// HARQ rounds exhausted and recovered by RLC.
    pub rlc_retx: u32,
    pub state: PacketState,
}

impl PacketRecord {
    pub fn new(id: u64, size: u32, created_at: SimTime) -> Self {
        PacketRecord {
            id,
            sn: 0,
            size,
            created_at,
            delivered_at: None,
            tx_attempts: 0,
            rlc_retx: 0,
            state: PacketState::Queued,
        }
    }

    pub fn latency(&self) -> Option<SimTime> {
        self.delivered_at.map(|d| d - self.created_at)
    }
}

/// Constant-bit-rate source of one downlink flow.
#[derive(Clone, Debug, PartialEq)]
pub struct CbrSource {
    interarrival_s: f64,
    phase_s: f64,
    size: u32,
    next: u64,
}

impl CbrSource {
    pub fn new(interarrival_s: f64, phase_s: f64, size: u32) -> Self {
        CbrSource {
            interarrival_s,
            phase_s,
            size,
            next: 0,
        }
    }

    pub fn interarrival_s(&self) -> f64 {
        self.interarrival_s
    }

    pub fn generated(&self) -> u64 {
        self.next
    }

    fn arrival(&self, k: u64) -> SimTime {
        SimTime::from_secs_f64(self.phase_s + k as f64 * self.interarrival_s)
    }

    pub fn next_arrival(&self) -> SimTime {
        self.arrival(self.next)
    }

    /// Emits every packet created at or before `t`.
    pub fn drain_until(&mut self, t: SimTime, mut emit: impl FnMut(PacketRecord)) {
        loop {
            let at = self.arrival(self.next);
            if at > t {
                break;
            }
            emit(PacketRecord::new(self.next, self.size, at));
            self.next += 1;
        }
    }
}

/// CBR flow for one vehicle with a uniform random phase in `[0, interarrival)`.
pub fn generate_traffic<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> CbrSource {
    let ia = config.interarrival_s();
    CbrSource::new(ia, rng.random::<f64>() * ia, config.packet_size_bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    Dropped,
}

/// RLC-AM transmit side: drop-tail FIFO plus the retransmission buffer.
///
/// `occupancy` counts every admitted packet until it is acknowledged, so a
/// retransmission never needs fresh buffer space.
#[derive(Clone, Debug)]
pub struct RlcBuffer {
    queue: VecDeque<PacketRecord>,
    queued_bytes: u64,
    occupancy: u64,
    capacity: u64,
    reorder_timer: SimTime,
    next_sn: u64,
    dropped: u64,
}

impl RlcBuffer {
    pub fn new(capacity: u64, reorder_timer: SimTime) -> Self {
        RlcBuffer {
            queue: VecDeque::new(),
            queued_bytes: 0,
            occupancy: 0,
            capacity,
            reorder_timer,
            next_sn: 0,
            dropped: 0,
        }
    }

    pub fn enqueue(&mut self, mut pkt: PacketRecord) -> (EnqueueOutcome, Option<PacketRecord>) {
        let size = u64::from(pkt.size);
        if self.occupancy + size > self.capacity {
            self.dropped += 1;
            pkt.state = PacketState::Dropped;
            return (EnqueueOutcome::Dropped, Some(pkt));
        }
        pkt.sn = self.next_sn;
        pkt.state = PacketState::Queued;
        self.next_sn += 1;
        self.occupancy += size;
        self.queued_bytes += size;
        self.queue.push_back(pkt);
        (EnqueueOutcome::Queued, None)
    }

    pub fn head(&self) -> Option<&PacketRecord> {
        self.queue.front()
    }

    /// Removes the head for transmission.
    pub fn pop_head(&mut self) -> Option<PacketRecord> {
        let mut p = self.queue.pop_front()?;
        self.queued_bytes -= u64::from(p.size);
        p.state = PacketState::InFlight;
        Some(p)
    }

    /// Puts an already-admitted packet back at the head for retransmission.
    pub fn requeue_front(&mut self, mut pkt: PacketRecord) {
        self.queued_bytes += u64::from(pkt.size);
        pkt.state = PacketState::Queued;
        self.queue.push_front(pkt);
    }

    /// Frees the space of an acknowledged packet.
    pub fn acknowledge(&mut self, size: u32) {
        self.occupancy -= u64::from(size);
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn reorder_timer(&self) -> SimTime {
        self.reorder_timer
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn iter(&self) -> impl Iterator<Item = &PacketRecord> {
        self.queue.iter()
    }
}

/// RLC-AM receive side: releases packets strictly in sequence order.
#[derive(Clone, Debug, Default)]
pub struct RlcReceiver {
    next_expected: u64,
    pending: BTreeMap<u64, PacketRecord>,
}

impl RlcReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts a correctly decoded packet at `t`, delivering it and every
    /// buffered successor once the sequence has no gap.
    pub fn receive(&mut self, pkt: PacketRecord, t: SimTime, mut deliver: impl FnMut(PacketRecord)) {
        if pkt.sn != self.next_expected {
            self.pending.insert(pkt.sn, pkt);
            return;
        }
        let mut release = |mut p: PacketRecord| {
            p.state = PacketState::Delivered;
            p.delivered_at = Some(t);
            deliver(p);
        };
        release(pkt);
        self.next_expected += 1;
        while let Some(p) = self.pending.remove(&self.next_expected) {
            release(p);
            self.next_expected += 1;
        }
    }

    pub fn waiting(&self) -> usize {
        self.pending.len()
    }

    pub fn iter_waiting(&self) -> impl Iterator<Item = &PacketRecord> {
        self.pending.values()
    }
}

/// Scheduler input for one vehicle of a cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchedRequest {
    pub vehicle: usize,
    /// Full-band link capacity, bit/s.
    pub capacity_bps: f64,
    pub queued_bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grant {
    pub vehicle: usize,
    pub bytes: f64,
}

/// Round-robin over the backlogged vehicles of one cell.
///
/// Every backlogged vehicle with non-zero capacity is served each slot with
/// an equal share of the resources; the rotating pointer only fixes the
/// service order inside the slot.
#[derive(Clone, Debug, Default)]
pub struct RoundRobin {
    cursor: usize,
}

impl RoundRobin {
    pub fn schedule_slot(&mut self, requests: &[SchedRequest], slot_s: f64, grants: &mut Vec<Grant>) {
        grants.clear();
        let n = requests
            .iter()
            .filter(|r| r.queued_bytes > 0 && r.capacity_bps > 0.0)
            .count();
        if n == 0 {
            return;
        }
        let share = slot_s / n as f64;
        let len = requests.len();
        let start = self.cursor % len;
        for i in 0..len {
            let r = &requests[(start + i) % len];
            if r.queued_bytes == 0 || r.capacity_bps <= 0.0 {
                continue;
            }
            let bytes = (r.capacity_bps * share / 8.0).min(r.queued_bytes as f64);
            grants.push(Grant {
                vehicle: r.vehicle,
                bytes,
            });
        }
        self.cursor = (start + 1) % len;
    }
}

/// One-shot wrapper around [`RoundRobin::schedule_slot`].
pub fn schedule_slot(requests: &[SchedRequest], slot_s: f64) -> Vec<Grant> {
    let mut grants = Vec::new();
    RoundRobin::default().schedule_slot(requests, slot_s, &mut grants);
    grants
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxOutcome {
    Success,
    /// Decoding failed; another HARQ attempt follows after the round trip.
    HarqRetry,
    /// HARQ gave up; RLC-AM re-injects the packet.
    Fail,
}

/// Decides one HARQ attempt of `pkt` at `sinr_db`.
pub fn transmit<R: Rng + ?Sized>(pkt: &mut PacketRecord, sinr_db: f64, rng: &mut R) -> TxOutcome {
    debug_assert!(pkt.tx_attempts < HARQ_MAX);
    pkt.tx_attempts += 1;
    let effective = sinr_db + HARQ_COMBINING_DB * f64::from(pkt.tx_attempts - 1);
    let decoded = effective >= SINR_OUTAGE_DB && rng.random::<f64>() < 1.0 - BASELINE_BLER;
    if decoded {
        TxOutcome::Success
    } else if pkt.tx_attempts >= HARQ_MAX {
        TxOutcome::Fail
    } else {
        TxOutcome::HarqRetry
    }
}

/// When a failed attempt made at `attempt_at` may be transmitted again.
pub fn retry_time(outcome: TxOutcome, attempt_at: SimTime, tech: Tech, reorder_timer: SimTime) -> Option<SimTime> {
    match outcome {
        TxOutcome::Success => None,
        TxOutcome::HarqRetry => Some(attempt_at + harq_rtt(tech)),
        TxOutcome::Fail => Some(attempt_at + harq_rtt(tech) + reorder_timer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(rate: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::defaults(Scenario::UMi, Tech::MmWave);
        c.app_rate_bps = rate;
        c
    }

    #[test]
    fn interarrival_extremes() {
        assert!((cfg(224e6).interarrival_s() - 50e-6).abs() < 1e-15);
        assert!((cfg(1.12e6).interarrival_s() - 10_000e-6).abs() < 1e-12);
    }

    #[test]
    fn ten_seconds_at_11_2_mbps() {
        let mut src = CbrSource::new(cfg(11.2e6).interarrival_s(), 0.0, 1400);
        let mut n = 0;
        // Arrivals in [0, 10 s).
        src.drain_until(SimTime::from_secs_f64(10.0) - SimTime(1), |_| n += 1);
        assert_eq!(n, 10_000);
    }

    #[test]
    fn phase_is_within_one_interarrival() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s = generate_traffic(&cfg(11e6), &mut rng);
            assert!(s.next_arrival().as_secs_f64() < s.interarrival_s() + 1e-9);
        }
    }

    #[test]
    fn drop_tail() {
        let mut b = RlcBuffer::new(10_000_000, SimTime::from_millis(1));
        assert_eq!(b.enqueue(PacketRecord::new(0, 1400, SimTime::ZERO)).0, EnqueueOutcome::Queued);
        assert_eq!(b.occupancy(), 1400);
        for i in 1..7142 {
            assert_eq!(b.enqueue(PacketRecord::new(i, 1400, SimTime::ZERO)).0, EnqueueOutcome::Queued);
        }
        assert_eq!(b.len(), 7142);
        assert_eq!(b.occupancy(), 9_998_800);
        let (o, p) = b.enqueue(PacketRecord::new(9999, 1400, SimTime::ZERO));
        assert_eq!(o, EnqueueOutcome::Dropped);
        assert_eq!(p.unwrap().state, PacketState::Dropped);
        assert_eq!(b.occupancy(), 9_998_800);
        assert_eq!(b.dropped(), 1);
    }

    #[test]
    fn full_buffer_drops() {
        let mut b = RlcBuffer::new(2800, SimTime::ZERO);
        b.enqueue(PacketRecord::new(0, 1400, SimTime::ZERO));
        b.enqueue(PacketRecord::new(1, 1400, SimTime::ZERO));
        assert_eq!(b.occupancy(), b.capacity());
        assert_eq!(b.enqueue(PacketRecord::new(2, 1400, SimTime::ZERO)).0, EnqueueOutcome::Dropped);
        assert_eq!(b.occupancy(), 2800);
    }

    #[test]
    fn retransmission_keeps_occupancy() {
        let mut b = RlcBuffer::new(5000, SimTime::ZERO);
        b.enqueue(PacketRecord::new(0, 1400, SimTime::ZERO));
        let p = b.pop_head().unwrap();
        assert_eq!((b.queued_bytes(), b.occupancy()), (0, 1400));
        b.requeue_front(p);
        assert_eq!((b.queued_bytes(), b.occupancy()), (1400, 1400));
        let p = b.pop_head().unwrap();
        b.acknowledge(p.size);
        assert_eq!(b.occupancy(), 0);
    }

    #[test]
    fn equal_share_grants() {
        let one = schedule_slot(
            &[SchedRequest {
                vehicle: 3,
                capacity_bps: 100e6,
                queued_bytes: 1_000_000,
            }],
            1e-3,
        );
        assert_eq!(one, vec![Grant { vehicle: 3, bytes: 12_500.0 }]);
        let req = SchedRequest {
            vehicle: 0,
            capacity_bps: 100e6,
            queued_bytes: 1_000_000,
        };
        let two = schedule_slot(&[req, SchedRequest { vehicle: 1, ..req }], 1e-3);
        assert_eq!(two.len(), 2);
        assert!(two.iter().all(|g| g.bytes == 6_250.0));
        let idle = schedule_slot(&[SchedRequest { queued_bytes: 0, ..req }], 1e-3);
        assert!(idle.is_empty());
    }

    #[test]
    fn outage_vehicles_do_not_take_a_share() {
        let req = SchedRequest {
            vehicle: 0,
            capacity_bps: 100e6,
            queued_bytes: 1_000_000,
        };
        let g = schedule_slot(&[req, SchedRequest { vehicle: 1, capacity_bps: 0.0, ..req }], 1e-3);
        assert_eq!(g, vec![Grant { vehicle: 0, bytes: 12_500.0 }]);
    }

    #[test]
    fn grant_never_exceeds_queue() {
        let g = schedule_slot(
            &[SchedRequest {
                vehicle: 0,
                capacity_bps: 1e9,
                queued_bytes: 1400,
            }],
            1e-3,
        );
        assert_eq!(g[0].bytes, 1400.0);
    }

    #[test]
    fn outage_attempt_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = PacketRecord::new(0, 1400, SimTime::ZERO);
        assert_eq!(transmit(&mut p, -10.0, &mut rng), TxOutcome::HarqRetry);
        assert_eq!(p.tx_attempts, 1);
    }

    #[test]
    fn operating_point_success_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let ok = (0..n)
            .filter(|_| transmit(&mut PacketRecord::new(0, 1400, SimTime::ZERO), 10.0, &mut rng) == TxOutcome::Success)
            .count();
        let p = ok as f64 / n as f64;
        assert!((p - 0.99).abs() < 4.0 * (0.99f64 * 0.01 / n as f64).sqrt());
    }

    #[test]
    fn combining_gain_lifts_out_of_outage() {
        // -7 dB fails on the first attempt; +3 dB combining reaches -4 dB.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = PacketRecord::new(0, 1400, SimTime::ZERO);
        assert_eq!(transmit(&mut p, -7.0, &mut rng), TxOutcome::HarqRetry);
        let mut succeeded = false;
        for _ in 0..200 {
            let mut q = p.clone();
            succeeded |= transmit(&mut q, -7.0, &mut rng) == TxOutcome::Success;
        }
        assert!(succeeded);
    }

    #[test]
    fn harq_exhaustion_timeline() {
        for tech in [Tech::Lte, Tech::MmWave] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let tau = SimTime::from_millis(1);
            let mut p = PacketRecord::new(0, 1400, SimTime::ZERO);
            let mut t = SimTime::ZERO;
            let mut outcomes = Vec::new();
            loop {
                let o = transmit(&mut p, -30.0, &mut rng);
                outcomes.push(o);
                t = retry_time(o, t, tech, tau).unwrap();
                if o == TxOutcome::Fail {
                    break;
                }
            }
            assert_eq!(outcomes.len(), HARQ_MAX as usize);
            assert_eq!(*outcomes.last().unwrap(), TxOutcome::Fail);
            assert!(t >= SimTime(4 * harq_rtt(tech).0) + tau);
        }
    }

    #[test]
    fn receiver_releases_in_order() {
        let mut rx = RlcReceiver::new();
        let mk = |sn| PacketRecord {
            sn,
            ..PacketRecord::new(sn, 1400, SimTime::ZERO)
        };
        let mut out = Vec::new();
        rx.receive(mk(1), SimTime(10), |p| out.push(p));
        rx.receive(mk(2), SimTime(20), |p| out.push(p));
        assert!(out.is_empty());
        assert_eq!(rx.waiting(), 2);
        rx.receive(mk(0), SimTime(30), |p| out.push(p));
        let sns: Vec<u64> = out.iter().map(|p| p.sn).collect();
        assert_eq!(sns, vec![0, 1, 2]);
        assert!(out.iter().all(|p| p.delivered_at == Some(SimTime(30))));
    }
}
