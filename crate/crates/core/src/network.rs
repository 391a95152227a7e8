//! Multi-hop networks of buffered-entanglement links.
//!
//! Every directed link owns a synchronized pair of entanglement buffers.
//! Nodes with outgoing links run the same idle-time generation as a
//! point-to-point sender, but route each channel use separately: the next
//! qubit goes out on the outgoing link holding the most stored pairs, and
//! every outgoing link left unused in a tick generates pairs. A channel use
//! is assisted (two bits) whenever the chosen link has a pair, plain (one
//! bit) otherwise.
//!
//! Relays measure what they receive and queue the decoded bits for the next
//! hop, so no entanglement swapping is involved and decoding errors travel
//! on as data. Each bit carries an out-of-band `(seq, offset)` tag so that
//! the sink can reassemble messages that took different paths.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::buffers::{
    ConsumePolicy, EntanglementBuffer, EprRecord, Message, MessageBuffer, OfferOutcome, OverflowPolicy, StoreOutcome,
};
use crate::error::Error;
use crate::event::EventQueue;
use crate::link::{
    encode_for_send, receive_and_decode, summarize, symbol_rng, EncodedQubit, Mode, TraceSummary, TransmissionRecord,
};
use crate::qcore::{classical_encode_measure, NoiseParams, Symbol};
use crate::rng::{self, stream, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    Relay,
    Sink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub role: Role,
}

/// Physical parameters of one directed link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub channel_delay_ns: u64,
    pub ebuf_capacity: usize,
    pub noise: NoiseParams,
    pub overflow: OverflowPolicy,
    pub consume: ConsumePolicy,
    pub pairs_per_idle_tick: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            channel_delay_ns: 5000,
            ebuf_capacity: 200,
            noise: NoiseParams::perfect(),
            overflow: OverflowPolicy::DropNew,
            consume: ConsumePolicy::Filo,
            pairs_per_idle_tick: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub from: usize,
    pub to: usize,
    pub params: LinkParams,
}

/// A network scenario: graph, per-link parameters and traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub tick_period_ns: u64,
    /// Channel uses per node per tick.
    pub qubits_per_tick: u32,
    pub arrival_prob: f64,
    pub job_bits: usize,
    pub source_buffer_bits: usize,
    /// Bit capacity of each relay's forwarding queue.
    pub relay_buffer_bits: usize,
    pub total_ticks: u64,
}

impl Topology {
    /// Source `s`, relays `a` and `b`, sink `d`, links `s→a, s→b, a→d, b→d`.
    pub fn diamond(params: LinkParams) -> Self {
        let node = |name: &str, role| NodeSpec { name: name.into(), role };
        let link = |from, to| LinkSpec { from, to, params: params.clone() };
        let job_bits = 4;
        Self {
            nodes: vec![node("s", Role::Source), node("a", Role::Relay), node("b", Role::Relay), node("d", Role::Sink)],
            links: vec![link(0, 1), link(0, 2), link(1, 3), link(2, 3)],
            tick_period_ns: 10,
            qubits_per_tick: 1,
            arrival_prob: 0.5,
            job_bits,
            source_buffer_bits: job_bits,
            relay_buffer_bits: 64 * job_bits,
            total_ticks: 100_000,
        }
    }

    pub fn out_links(&self, node: usize) -> Vec<usize> {
        self.links.iter().enumerate().filter(|(_, l)| l.from == node).map(|(i, _)| i).collect()
    }

    pub fn source(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == Role::Source)
    }

    pub fn sink(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == Role::Sink)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        let count = |role| self.nodes.iter().filter(|n| n.role == role).count();
        if count(Role::Source) != 1 {
            return fail("network needs exactly one source".into());
        }
        if count(Role::Sink) != 1 {
            return fail("network needs exactly one sink".into());
        }
        let n = self.nodes.len();
        for (i, l) in self.links.iter().enumerate() {
            if l.from >= n || l.to >= n {
                return fail(alloc::format!("link {i} references a missing node"));
            }
            if l.from == l.to {
                return fail(alloc::format!("link {i} is a self-loop"));
            }
        }
        let mut seen = BTreeSet::new();
        for l in &self.links {
            if !seen.insert((l.from, l.to)) {
                return fail(alloc::format!("duplicate link {} -> {}", self.nodes[l.from].name, self.nodes[l.to].name));
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let out = self.out_links(i).len();
            match node.role {
                Role::Sink if out > 0 => return fail(alloc::format!("sink {} has outgoing links", node.name)),
                Role::Source | Role::Relay if out == 0 => {
                    return fail(alloc::format!("{} has no outgoing link", node.name))
                }
                _ => {}
            }
            if node.role == Role::Source && self.links.iter().any(|l| l.to == i) {
                return fail("source must not have incoming links".into());
            }
        }
        // Kahn's algorithm
        let mut indegree = vec![0usize; n];
        for l in &self.links {
            indegree[l.to] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut visited = 0;
        while let Some(v) = ready.pop() {
            visited += 1;
            for l in self.links.iter().filter(|l| l.from == v) {
                indegree[l.to] -= 1;
                if indegree[l.to] == 0 {
                    ready.push(l.to);
                }
            }
        }
        if visited != n {
            return fail("network links must form a DAG".into());
        }
        if self.tick_period_ns == 0 || self.qubits_per_tick == 0 || self.job_bits == 0 {
            return fail("tick period, qubits per tick and job size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.arrival_prob) {
            return fail("arrival_prob must lie in [0, 1]".into());
        }
        if self.source_buffer_bits < self.job_bits {
            return fail("source buffer must hold at least one job".into());
        }
        if self.relay_buffer_bits < 2 {
            return fail("relay buffer must hold at least two bits".into());
        }
        Ok(())
    }
}

/// Index of the link with the most stored pairs; ties go to the lowest index.
pub fn route(pair_counts: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, &c) in pair_counts.iter().enumerate() {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitTag {
    pub seq: u64,
    pub offset: usize,
}

/// One channel use as seen by the sending node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelUse {
    pub tick: u64,
    pub node: usize,
    pub link: usize,
    pub mode: Mode,
    /// Pairs on the chosen link when the routing decision was made.
    pub chosen_pairs: usize,
    /// Most pairs held by any other outgoing link of the node.
    pub best_alternative_pairs: Option<usize>,
    pub first_bit: BitTag,
    pub bits: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkStats {
    pub assisted_uses: u64,
    pub plain_uses: u64,
    pub pairs_generated: u64,
    pub pairs_rejected: u64,
    pub pairs_evicted: u64,
    pub pairs_consumed: u64,
    pub pairs_remaining: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkMetrics {
    pub total_ticks: u64,
    pub offered: u64,
    pub accepted: u64,
    pub dropped: u64,
    /// Bits lost to full relay queues.
    pub relay_drops: u64,
    /// End-to-end figures at the sink.
    pub summary: TraceSummary,
    pub per_link: Vec<LinkStats>,
}

impl NetworkMetrics {
    pub fn message_error_rate(&self) -> f64 {
        self.summary.message_error_rate
    }

    pub fn throughput(&self) -> f64 {
        self.summary.throughput_bits_per_tick
    }
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub metrics: NetworkMetrics,
    pub delivered: Vec<TransmissionRecord>,
    pub uses: Vec<ChannelUse>,
}

#[derive(Debug, Clone, Copy)]
struct TaggedBit {
    tag: BitTag,
    value: bool,
}

#[derive(Debug, Clone)]
enum Carried {
    Plain,
    Assisted(EncodedQubit),
}

#[derive(Debug, Clone)]
enum Payload {
    Twin { link: usize, pair_id: u64 },
    Data { link: usize, bits: Vec<TaggedBit>, carried: Carried, mode_trail: Trail },
}

/// Per-bit history carried out-of-band to the sink.
#[derive(Debug, Clone, Default)]
struct Trail {
    modes: Vec<Mode>,
    pair_ids: Vec<u64>,
    sender_ages: Vec<u64>,
    receiver_ages: Vec<u64>,
}

impl Trail {
    fn extend(&mut self, other: &Trail) {
        self.modes.extend_from_slice(&other.modes);
        self.pair_ids.extend_from_slice(&other.pair_ids);
        self.sender_ages.extend_from_slice(&other.sender_ages);
        self.receiver_ages.extend_from_slice(&other.receiver_ages);
    }
}

struct NetLink {
    from: usize,
    to: usize,
    params: LinkParams,
    ebuf: EntanglementBuffer,
    receiver: BTreeMap<u64, u64>,
    orphaned: BTreeSet<u64>,
    next_pair_id: u64,
    stats: LinkStats,
}

impl NetLink {
    fn generate(&mut self, id_link: usize, now: u64, channel: &mut EventQueue<Payload>) {
        let id = self.next_pair_id;
        self.next_pair_id += 1;
        self.stats.pairs_generated += 1;
        match self.ebuf.store(EprRecord::fresh(id, now)) {
            StoreOutcome::Stored => {}
            StoreOutcome::DroppedNew => {
                self.stats.pairs_rejected += 1;
                return;
            }
            StoreOutcome::ReplacedOldest(evicted) => {
                self.stats.pairs_evicted += 1;
                if self.receiver.remove(&evicted).is_none() {
                    self.orphaned.insert(evicted);
                }
            }
        }
        channel.schedule(now + self.params.channel_delay_ns, Payload::Twin { link: id_link, pair_id: id });
    }
}

/// Queued bits at a node, each with the trail of hops it has taken so far.
struct Forward {
    bit: TaggedBit,
    trail: Trail,
}

struct SourceState {
    mbuf: MessageBuffer,
    offset: usize,
}

struct SinkMessage {
    decoded: Vec<bool>,
    received: usize,
    trail: Trail,
}

/// Runs a network scenario to completion.
pub fn run_network(topology: &Topology, seed: u64) -> Result<NetworkRun, Error> {
    topology.validate()?;
    let source = topology.source().expect("validated");
    let sink = topology.sink().expect("validated");
    let n = topology.nodes.len();

    let mut traffic: SimRng = rng::rng_for(seed, stream::TRAFFIC, 0);
    let mut links: Vec<NetLink> = topology
        .links
        .iter()
        .map(|l| NetLink {
            from: l.from,
            to: l.to,
            params: l.params.clone(),
            ebuf: EntanglementBuffer::new(l.params.ebuf_capacity, l.params.overflow, l.params.consume),
            receiver: BTreeMap::new(),
            orphaned: BTreeSet::new(),
            next_pair_id: 0,
            stats: LinkStats::default(),
        })
        .collect();
    let out_links: Vec<Vec<usize>> = (0..n).map(|i| topology.out_links(i)).collect();
    let mut src = SourceState { mbuf: MessageBuffer::new(topology.source_buffer_bits, topology.job_bits), offset: 0 };
    let mut queues: Vec<VecDeque<Forward>> = (0..n).map(|_| VecDeque::new()).collect();
    let mut sent: BTreeMap<u64, (Vec<bool>, u64)> = BTreeMap::new();
    let mut at_sink: BTreeMap<u64, SinkMessage> = BTreeMap::new();
    let mut channel: EventQueue<Payload> = EventQueue::new();
    let mut delivered = Vec::new();
    let mut uses = Vec::new();
    let mut metrics = NetworkMetrics::default();
    let mut next_seq = 0u64;
    let job_bits = topology.job_bits;

    let deliver = |now: u64,
                   channel: &mut EventQueue<Payload>,
                   links: &mut [NetLink],
                   queues: &mut [VecDeque<Forward>],
                   at_sink: &mut BTreeMap<u64, SinkMessage>,
                   sent: &mut BTreeMap<u64, (Vec<bool>, u64)>,
                   delivered: &mut Vec<TransmissionRecord>,
                   relay_drops: &mut u64| {
        while let Some((time, payload)) = channel.pop_due(now) {
            match payload {
                Payload::Twin { link, pair_id } => {
                    let l = &mut links[link];
                    if !l.orphaned.remove(&pair_id) {
                        l.receiver.insert(pair_id, time);
                    }
                }
                Payload::Data { link, bits, carried, mode_trail } => {
                    let l = &mut links[link];
                    let first = bits[0].tag;
                    let mut trail = mode_trail;
                    let values: Vec<bool> = match carried {
                        Carried::Plain => {
                            let mut rng = symbol_rng(seed, link as u64 + 1, first.seq, first.offset);
                            bits.iter().map(|b| classical_encode_measure(b.value, &mut rng)).collect()
                        }
                        Carried::Assisted(qubit) => {
                            let twin = l.receiver.remove(&qubit.pair_id).expect("twin arrives before its partner");
                            let receiver_age = time - twin;
                            let mut rng = symbol_rng(seed, link as u64 + 1, first.seq, first.offset);
                            let symbol = receive_and_decode(&qubit, receiver_age, &l.params.noise, &mut rng);
                            trail.receiver_ages.push(receiver_age);
                            let decoded = [symbol.high(), symbol.low()];
                            decoded[..bits.len()].to_vec()
                        }
                    };
                    let to = l.to;
                    if to == sink {
                        for (b, v) in bits.iter().zip(values) {
                            let msg = at_sink.entry(b.tag.seq).or_insert_with(|| SinkMessage {
                                decoded: vec![false; job_bits],
                                received: 0,
                                trail: Trail::default(),
                            });
                            msg.decoded[b.tag.offset] = v;
                            msg.received += 1;
                            msg.trail.extend(&trail);
                            if msg.received == job_bits {
                                let msg = at_sink.remove(&b.tag.seq).expect("present");
                                let (sent_bits, start) = sent.remove(&b.tag.seq).expect("sent before received");
                                delivered.push(TransmissionRecord {
                                    seq: b.tag.seq,
                                    sent: sent_bits,
                                    decoded: msg.decoded,
                                    modes: msg.trail.modes,
                                    send_tick: start,
                                    arrival_time: time,
                                    pair_ids: msg.trail.pair_ids,
                                    sender_ages: msg.trail.sender_ages,
                                    receiver_ages: msg.trail.receiver_ages,
                                });
                            }
                        }
                    } else {
                        let cap = topology.relay_buffer_bits;
                        // the trail rides with the first bit only so hop data is not duplicated
                        let mut trail = Some(trail);
                        for (b, v) in bits.iter().zip(values) {
                            if queues[to].len() >= cap {
                                *relay_drops += 1;
                                continue;
                            }
                            queues[to].push_back(Forward {
                                bit: TaggedBit { tag: b.tag, value: v },
                                trail: trail.take().unwrap_or_default(),
                            });
                        }
                    }
                }
            }
        }
    };

    for tick in 0..topology.total_ticks {
        let now = tick * topology.tick_period_ns;
        deliver(
            now,
            &mut channel,
            &mut links,
            &mut queues,
            &mut at_sink,
            &mut sent,
            &mut delivered,
            &mut metrics.relay_drops,
        );

        if traffic.random::<f64>() < topology.arrival_prob {
            let bits: Vec<bool> = (0..job_bits).map(|_| traffic.random()).collect();
            let seq = next_seq;
            next_seq += 1;
            metrics.offered += 1;
            match src.mbuf.offer(Message { seq, bits }) {
                OfferOutcome::Accepted => metrics.accepted += 1,
                OfferOutcome::Dropped => metrics.dropped += 1,
            }
        }

        for node in 0..n {
            let outs = &out_links[node];
            if outs.is_empty() {
                continue;
            }
            let mut used = vec![false; outs.len()];
            for _ in 0..topology.qubits_per_tick {
                let available = if node == source {
                    src.mbuf.front().map_or(0, |m| m.bits.len() - src.offset)
                } else {
                    queues[node].len()
                };
                if available == 0 {
                    break;
                }
                let counts: Vec<usize> = outs.iter().map(|&li| links[li].ebuf.len()).collect();
                let pick = route(&counts).expect("node has outgoing links");
                let li = outs[pick];
                used[pick] = true;
                let best_alternative_pairs =
                    counts.iter().enumerate().filter(|(i, _)| *i != pick).map(|(_, c)| *c).max();
                let assisted = counts[pick] > 0;
                let width = if assisted { available.min(2) } else { 1 };

                let mut bits = Vec::with_capacity(width);
                let mut trail = Trail::default();
                if node == source {
                    let msg = src.mbuf.front().expect("available > 0");
                    if src.offset == 0 {
                        sent.insert(msg.seq, (msg.bits.clone(), tick));
                    }
                    for k in 0..width {
                        let offset = src.offset + k;
                        bits.push(TaggedBit { tag: BitTag { seq: msg.seq, offset }, value: msg.bits[offset] });
                    }
                    src.offset += width;
                    if src.offset == msg.bits.len() {
                        src.mbuf.pop();
                        src.offset = 0;
                    }
                } else {
                    for _ in 0..width {
                        let f = queues[node].pop_front().expect("available");
                        bits.push(f.bit);
                        trail.extend(&f.trail);
                    }
                }

                let link = &mut links[li];
                let mode = if assisted { Mode::Assisted } else { Mode::Plain };
                trail.modes.push(mode);
                let carried = if assisted {
                    let record = link.ebuf.take().expect("counted above");
                    link.stats.pairs_consumed += 1;
                    link.stats.assisted_uses += 1;
                    let symbol = Symbol::from_bits(bits[0].value, bits.get(1).is_some_and(|b| b.value));
                    let qubit = encode_for_send(record, symbol, now, &link.params.noise);
                    trail.pair_ids.push(qubit.pair_id);
                    trail.sender_ages.push(qubit.sender_age);
                    Carried::Assisted(qubit)
                } else {
                    link.stats.plain_uses += 1;
                    Carried::Plain
                };
                uses.push(ChannelUse {
                    tick,
                    node,
                    link: li,
                    mode,
                    chosen_pairs: counts[pick],
                    best_alternative_pairs,
                    first_bit: bits[0].tag,
                    bits: bits.len(),
                });
                channel.schedule(
                    now + link.params.channel_delay_ns,
                    Payload::Data { link: li, bits, carried, mode_trail: trail },
                );
            }
            for (k, &li) in outs.iter().enumerate() {
                if !used[k] {
                    for _ in 0..links[li].params.pairs_per_idle_tick {
                        links[li].generate(li, now, &mut channel);
                    }
                }
            }
        }
    }

    let end = topology.total_ticks * topology.tick_period_ns;
    deliver(
        end,
        &mut channel,
        &mut links,
        &mut queues,
        &mut at_sink,
        &mut sent,
        &mut delivered,
        &mut metrics.relay_drops,
    );

    metrics.total_ticks = topology.total_ticks;
    let errored = delivered.iter().filter(|r| r.is_error()).count() as u64;
    let bits: u64 = delivered.iter().map(|r| r.sent.len() as u64).sum();
    metrics.summary = summarize(delivered.len() as u64, errored, bits, topology.total_ticks, topology.tick_period_ns);
    metrics.per_link =
        links.iter().map(|l| LinkStats { pairs_remaining: l.ebuf.len() as u64, ..l.stats.clone() }).collect();
    debug_assert!(links.iter().all(|l| l.from != l.to));
    Ok(NetworkRun { metrics, delivered, uses })
}
