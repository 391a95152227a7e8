//! Point-to-point buffered-entanglement link driven by a fixed tick.
//!
//! Each tick, in order:
//!
//! 1. qubits whose channel delay has elapsed reach the receiver;
//! 2. with probability `arrival_prob` a random `job_bits` message is offered
//!    to the sender's message buffer;
//! 3. if a message is being sent or waiting, up to `qubits_per_tick` channel
//!    uses go to it;
//! 4. otherwise the tick is idle and the sender creates `pairs_per_idle_tick`
//!    EPR pairs, keeping one half and sending the other to the receiver.
//!
//! The transmission mode is fixed when a message starts: assisted if the
//! entanglement buffer holds a full message's worth of pairs, plain
//! otherwise. The head message keeps its place in the message buffer until
//! its last qubit has left.
//!
//! Noise is lazy. A stored half is untouched until it is taken; the sender
//! then folds in its storage time, and the receiver folds in the time its
//! twin waited in memory before the encoded qubit arrived. Qubits do not
//! decohere in the fiber, so both ages equal `encode_time - birth_time`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::buffers::{
    ConsumePolicy, EntanglementBuffer, EprRecord, Message, MessageBuffer, OfferOutcome, OverflowPolicy, StoreOutcome,
};
use crate::error::Error;
use crate::event::EventQueue;
use crate::qcore::{Half, NoiseParams, QubitPairState, Symbol};
use crate::rng::{self, stream, SimRng};
use crate::splitmix::SplitMix;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub tick_period_ns: u64,
    pub channel_delay_ns: u64,
    /// Channel uses per tick.
    pub qubits_per_tick: u32,
    pub arrival_prob: f64,
    pub job_bits: usize,
    pub buffer_bits: usize,
    pub ebuf_capacity: usize,
    pub noise: NoiseParams,
    pub overflow: OverflowPolicy,
    pub consume: ConsumePolicy,
    pub pairs_per_idle_tick: u32,
    pub total_ticks: u64,
    /// Start with the entanglement buffer full of fresh pairs.
    pub prefill: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            tick_period_ns: 10,
            channel_delay_ns: 5000,
            qubits_per_tick: 2,
            arrival_prob: 0.5,
            job_bits: 4,
            buffer_bits: 4,
            ebuf_capacity: 200,
            noise: NoiseParams::perfect(),
            overflow: OverflowPolicy::DropNew,
            consume: ConsumePolicy::Filo,
            pairs_per_idle_tick: 1,
            total_ticks: 100_000,
            prefill: false,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.tick_period_ns == 0 {
            return fail("tick_period_ns must be > 0");
        }
        if self.qubits_per_tick == 0 {
            return fail("qubits_per_tick must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.arrival_prob) {
            return fail("arrival_prob must lie in [0, 1]");
        }
        if self.job_bits == 0 {
            return fail("job_bits must be >= 1");
        }
        if self.buffer_bits < self.job_bits {
            return fail("buffer_bits must hold at least one job");
        }
        Ok(())
    }

    /// Pairs needed to send one message with assistance.
    pub fn pairs_per_message(&self) -> usize {
        self.job_bits.div_ceil(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Assisted,
    Plain,
}

/// A message as seen by the receiver once all its qubits have arrived.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub seq: u64,
    pub sent: Vec<bool>,
    pub decoded: Vec<bool>,
    /// Mode of each channel use, in send order.
    pub modes: Vec<Mode>,
    pub send_tick: u64,
    /// Arrival time (ns) of the last qubit.
    pub arrival_time: u64,
    pub pair_ids: Vec<u64>,
    /// Storage time (ns) folded into the sender half of each consumed pair.
    pub sender_ages: Vec<u64>,
    /// Storage time (ns) folded into the receiver half of each consumed pair.
    pub receiver_ages: Vec<u64>,
}

impl TransmissionRecord {
    pub fn is_error(&self) -> bool {
        self.sent != self.decoded
    }

    /// The single mode used, or `None` if the channel uses were mixed.
    pub fn mode(&self) -> Option<Mode> {
        let first = *self.modes.first()?;
        self.modes.iter().all(|m| *m == first).then_some(first)
    }
}

/// Error and throughput figures derived from a delivered-message trace.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceSummary {
    pub delivered: u64,
    pub errored: u64,
    /// Fraction of delivered messages with at least one wrong bit; 0 if
    /// nothing was delivered.
    pub message_error_rate: f64,
    pub bits_delivered: u64,
    /// Delivered bits per tick scaled by the message success rate.
    pub throughput_bits_per_tick: f64,
    pub throughput_bits_per_sec: f64,
}

pub fn compute_metrics(trace: &[TransmissionRecord], total_ticks: u64, tick_period_ns: u64) -> TraceSummary {
    let delivered = trace.len() as u64;
    let errored = trace.iter().filter(|r| r.is_error()).count() as u64;
    let bits_delivered: u64 = trace.iter().map(|r| r.sent.len() as u64).sum();
    summarize(delivered, errored, bits_delivered, total_ticks, tick_period_ns)
}

pub(crate) fn summarize(
    delivered: u64,
    errored: u64,
    bits_delivered: u64,
    total_ticks: u64,
    tick_period_ns: u64,
) -> TraceSummary {
    let message_error_rate = if delivered == 0 { 0.0 } else { errored as f64 / delivered as f64 };
    let throughput_bits_per_tick =
        if total_ticks == 0 { 0.0 } else { bits_delivered as f64 / total_ticks as f64 * (1.0 - message_error_rate) };
    TraceSummary {
        delivered,
        errored,
        message_error_rate,
        bits_delivered,
        throughput_bits_per_tick,
        throughput_bits_per_sec: throughput_bits_per_tick / (tick_period_ns as f64 * 1e-9),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub total_ticks: u64,
    pub offered: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub assisted_messages: u64,
    pub plain_messages: u64,
    pub summary: TraceSummary,
    pub pairs_generated: u64,
    /// Rejected on arrival at a full buffer under `DropNew`.
    pub pairs_rejected: u64,
    /// Pushed out by `ReplaceOldest`.
    pub pairs_evicted: u64,
    pub pairs_consumed: u64,
    pub pairs_remaining: u64,
}

impl RunMetrics {
    pub fn message_error_rate(&self) -> f64 {
        self.summary.message_error_rate
    }

    pub fn throughput(&self) -> f64 {
        self.summary.throughput_bits_per_tick
    }
}

#[derive(Debug, Clone)]
pub struct LinkRun {
    pub metrics: RunMetrics,
    pub trace: Vec<TransmissionRecord>,
}

/// A qubit leaving the sender after superdense encoding.
#[derive(Debug, Clone)]
pub struct EncodedQubit {
    pub pair_id: u64,
    pub state: QubitPairState,
    pub sender_age: u64,
}

/// Sender side of an assisted channel use: age the stored half up to `now`
/// and apply the symbol's Pauli.
pub fn encode_for_send(record: EprRecord, symbol: Symbol, now: u64, noise: &NoiseParams) -> EncodedQubit {
    let sender_age = now.saturating_sub(record.last_update_time);
    let state = record
        .state
        .apply_memory_noise(Half::Sender, sender_age as f64, noise)
        .expect("storage age is non-negative")
        .superdense_encode(symbol);
    EncodedQubit { pair_id: record.id, state, sender_age }
}

/// Receiver side: age the receiver half by the time its twin waited in
/// memory, then Bell-measure.
pub fn receive_and_decode<R: Rng + ?Sized>(
    qubit: &EncodedQubit,
    receiver_age: u64,
    noise: &NoiseParams,
    rng: &mut R,
) -> Symbol {
    qubit
        .state
        .apply_memory_noise(Half::Receiver, receiver_age as f64, noise)
        .expect("storage age is non-negative")
        .bell_measure_sample(rng)
        .symbol()
}

/// Full use of one stored pair: both halves age `now - last_update_time`,
/// the symbol is encoded and the pair is Bell-measured.
pub fn consume_and_decode<R: Rng + ?Sized>(
    record: EprRecord,
    symbol: Symbol,
    now: u64,
    noise: &NoiseParams,
    rng: &mut R,
) -> Symbol {
    let age = now.saturating_sub(record.last_update_time);
    let qubit = encode_for_send(record, symbol, now, noise);
    receive_and_decode(&qubit, age, noise, rng)
}

/// Measurement randomness for one symbol, keyed so that runs with the same
/// seed draw the same uniforms for the same message position.
pub(crate) fn symbol_rng(seed: u64, channel: u64, seq: u64, offset: usize) -> SplitMix {
    SplitMix::new(rng::derive_seed(
        seed ^ channel.rotate_left(32),
        stream::MEASUREMENT ^ seq.rotate_left(17),
        offset as u64,
    ))
}

#[derive(Debug, Clone)]
enum Payload {
    Twin { pair_id: u64 },
    Data { seq: u64, offset: usize, carried: Carried },
}

#[derive(Debug, Clone)]
enum Carried {
    Plain(bool),
    Assisted { qubit: EncodedQubit, bits: usize },
}

struct Outgoing {
    message: Message,
    offset: usize,
    mode: Mode,
}

struct Assembly {
    decoded: Vec<bool>,
    received: usize,
    modes: Vec<Mode>,
    pair_ids: Vec<u64>,
    sender_ages: Vec<u64>,
    receiver_ages: Vec<u64>,
    start_tick: u64,
}

/// Stepwise point-to-point simulation; [`run_link`] drives it to the end.
pub struct LinkSim {
    config: LinkConfig,
    seed: u64,
    tick: u64,
    traffic: SimRng,
    mbuf: MessageBuffer,
    ebuf: EntanglementBuffer,
    next_pair_id: u64,
    next_seq: u64,
    outgoing: Option<Outgoing>,
    sent_payloads: BTreeMap<u64, (Vec<bool>, u64)>,
    channel: EventQueue<Payload>,
    /// Receiver's synchronized buffer: pair id -> twin arrival time.
    receiver: BTreeMap<u64, u64>,
    /// Twins still in flight whose sender half is already gone.
    orphaned: BTreeSet<u64>,
    assembling: BTreeMap<u64, Assembly>,
    trace: Vec<TransmissionRecord>,
    metrics: RunMetrics,
}

impl LinkSim {
    pub fn new(config: LinkConfig, seed: u64) -> Result<Self, Error> {
        config.validate()?;
        let mut sim = Self {
            traffic: rng::rng_for(seed, stream::TRAFFIC, 0),
            mbuf: MessageBuffer::new(config.buffer_bits, config.job_bits),
            ebuf: EntanglementBuffer::new(config.ebuf_capacity, config.overflow, config.consume),
            seed,
            tick: 0,
            next_pair_id: 0,
            next_seq: 0,
            outgoing: None,
            sent_payloads: BTreeMap::new(),
            channel: EventQueue::new(),
            receiver: BTreeMap::new(),
            orphaned: BTreeSet::new(),
            assembling: BTreeMap::new(),
            trace: Vec::new(),
            metrics: RunMetrics::default(),
            config,
        };
        if sim.config.prefill {
            for _ in 0..sim.config.ebuf_capacity {
                sim.generate_pair(0);
            }
        }
        Ok(sim)
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn now(&self) -> u64 {
        self.tick * self.config.tick_period_ns
    }

    pub fn entanglement_buffer(&self) -> &EntanglementBuffer {
        &self.ebuf
    }

    pub fn receiver_buffer_len(&self) -> usize {
        self.receiver.len()
    }

    pub fn trace(&self) -> &[TransmissionRecord] {
        &self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.config.total_ticks
    }

    /// Advances one tick.
    pub fn step(&mut self) {
        let now = self.now();
        self.deliver(now);

        if self.traffic.random::<f64>() < self.config.arrival_prob {
            let bits: Vec<bool> = (0..self.config.job_bits).map(|_| self.traffic.random()).collect();
            let seq = self.next_seq;
            self.next_seq += 1;
            self.metrics.offered += 1;
            match self.mbuf.offer(Message { seq, bits }) {
                OfferOutcome::Accepted => self.metrics.accepted += 1,
                OfferOutcome::Dropped => self.metrics.dropped += 1,
            }
        }

        if self.outgoing.is_some() || !self.mbuf.is_empty() {
            self.transmit_step(now);
        } else {
            for _ in 0..self.config.pairs_per_idle_tick {
                self.generate_pair(now);
            }
        }
        self.tick += 1;
    }

    pub fn run(mut self) -> LinkRun {
        while !self.is_finished() {
            self.step();
        }
        self.finish()
    }

    /// Delivers whatever has arrived by the end of the last tick and
    /// computes the metrics.
    pub fn finish(mut self) -> LinkRun {
        let end = self.now();
        self.deliver(end);
        let mut metrics = self.metrics;
        metrics.total_ticks = self.tick;
        metrics.pairs_remaining = self.ebuf.len() as u64;
        metrics.summary = compute_metrics(&self.trace, self.tick, self.config.tick_period_ns);
        for rec in &self.trace {
            match rec.mode() {
                Some(Mode::Assisted) => metrics.assisted_messages += 1,
                _ => metrics.plain_messages += 1,
            }
        }
        LinkRun { metrics, trace: self.trace }
    }

    fn generate_pair(&mut self, now: u64) {
        let id = self.next_pair_id;
        self.next_pair_id += 1;
        self.metrics.pairs_generated += 1;
        match self.ebuf.store(EprRecord::fresh(id, now)) {
            StoreOutcome::Stored => {}
            StoreOutcome::DroppedNew => {
                self.metrics.pairs_rejected += 1;
                return;
            }
            StoreOutcome::ReplacedOldest(evicted) => {
                self.metrics.pairs_evicted += 1;
                self.discard_twin(evicted);
            }
        }
        self.channel.schedule(now + self.config.channel_delay_ns, Payload::Twin { pair_id: id });
    }

    fn discard_twin(&mut self, pair_id: u64) {
        if self.receiver.remove(&pair_id).is_none() {
            self.orphaned.insert(pair_id);
        }
    }

    fn transmit_step(&mut self, now: u64) {
        if self.outgoing.is_none() {
            let message = self.mbuf.front().expect("caller checked").clone();
            let mode = if self.ebuf.len() >= self.config.pairs_per_message() { Mode::Assisted } else { Mode::Plain };
            self.sent_payloads.insert(message.seq, (message.bits.clone(), self.tick));
            self.outgoing = Some(Outgoing { message, offset: 0, mode });
        }
        let arrival = now + self.config.channel_delay_ns;
        let job_bits = self.config.job_bits;
        let out = self.outgoing.as_mut().expect("set above");
        for _ in 0..self.config.qubits_per_tick {
            if out.offset >= job_bits {
                break;
            }
            let offset = out.offset;
            let carried = match out.mode {
                Mode::Assisted => {
                    let record = self.ebuf.take().expect("assisted mode reserved enough pairs");
                    self.metrics.pairs_consumed += 1;
                    let high = out.message.bits[offset];
                    let low = out.message.bits.get(offset + 1).copied().unwrap_or(false);
                    let bits = (job_bits - offset).min(2);
                    let qubit = encode_for_send(record, Symbol::from_bits(high, low), now, &self.config.noise);
                    out.offset += bits;
                    Carried::Assisted { qubit, bits }
                }
                Mode::Plain => {
                    out.offset += 1;
                    Carried::Plain(out.message.bits[offset])
                }
            };
            self.channel.schedule(arrival, Payload::Data { seq: out.message.seq, offset, carried });
        }
        if out.offset >= job_bits {
            let done = self.outgoing.take().expect("in progress");
            let popped = self.mbuf.pop();
            debug_assert_eq!(popped.map(|m| m.seq), Some(done.message.seq));
        }
    }

    fn deliver(&mut self, now: u64) {
        while let Some((time, payload)) = self.channel.pop_due(now) {
            match payload {
                Payload::Twin { pair_id } => {
                    if !self.orphaned.remove(&pair_id) {
                        self.receiver.insert(pair_id, time);
                    }
                }
                Payload::Data { seq, offset, carried } => self.receive_data(time, seq, offset, carried),
            }
        }
    }

    fn receive_data(&mut self, time: u64, seq: u64, offset: usize, carried: Carried) {
        let job_bits = self.config.job_bits;
        let start_tick = self.sent_payloads.get(&seq).map(|(_, t)| *t).unwrap_or(0);
        let asm = self.assembling.entry(seq).or_insert_with(|| Assembly {
            decoded: vec![false; job_bits],
            received: 0,
            modes: Vec::new(),
            pair_ids: Vec::new(),
            sender_ages: Vec::new(),
            receiver_ages: Vec::new(),
            start_tick,
        });
        match carried {
            Carried::Plain(bit) => {
                let mut rng = symbol_rng(self.seed, 0, seq, offset);
                asm.decoded[offset] = crate::qcore::classical_encode_measure(bit, &mut rng);
                asm.received += 1;
                asm.modes.push(Mode::Plain);
            }
            Carried::Assisted { qubit, bits } => {
                let twin_arrival = self
                    .receiver
                    .remove(&qubit.pair_id)
                    .expect("twin precedes its encoded partner on an ordered channel");
                let receiver_age = time - twin_arrival;
                let mut rng = symbol_rng(self.seed, 0, seq, offset);
                let symbol = receive_and_decode(&qubit, receiver_age, &self.config.noise, &mut rng);
                asm.decoded[offset] = symbol.high();
                if bits == 2 {
                    asm.decoded[offset + 1] = symbol.low();
                }
                asm.received += bits;
                asm.modes.push(Mode::Assisted);
                asm.pair_ids.push(qubit.pair_id);
                asm.sender_ages.push(qubit.sender_age);
                asm.receiver_ages.push(receiver_age);
            }
        }
        if asm.received == job_bits {
            let asm = self.assembling.remove(&seq).expect("present");
            let (sent, _) = self.sent_payloads.remove(&seq).expect("sent before received");
            self.trace.push(TransmissionRecord {
                seq,
                sent,
                decoded: asm.decoded,
                modes: asm.modes,
                send_tick: asm.start_tick,
                arrival_time: time,
                pair_ids: asm.pair_ids,
                sender_ages: asm.sender_ages,
                receiver_ages: asm.receiver_ages,
            });
        }
    }
}

/// Runs a full point-to-point simulation.
pub fn run_link(config: &LinkConfig, seed: u64) -> Result<LinkRun, Error> {
    Ok(LinkSim::new(config.clone(), seed)?.run())
}
