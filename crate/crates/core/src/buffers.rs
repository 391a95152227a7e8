//! Bounded queues for stored EPR halves and for classical jobs.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::qcore::QubitPairState;

/// What happens when a new pair arrives at a full entanglement buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverflowPolicy {
    DropNew,
    /// Evict the pair with the smallest birth time ("entanglement replacing").
    ReplaceOldest,
}

/// Which stored pair is handed out for encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsumePolicy {
    /// Oldest insertion first.
    Fifo,
    /// Newest insertion first.
    Filo,
}

/// One stored pair. `last_update_time` is when noise was last folded into
/// `state`; noise is applied lazily at the next touch.
#[derive(Debug, Clone, PartialEq)]
pub struct EprRecord {
    pub id: u64,
    pub state: QubitPairState,
    pub birth_time: u64,
    pub last_update_time: u64,
}

impl EprRecord {
    pub fn fresh(id: u64, now: u64) -> Self {
        Self { id, state: QubitPairState::bell_pair(), birth_time: now, last_update_time: now }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    Stored,
    DroppedNew,
    ReplacedOldest(u64),
}

#[derive(Debug, Clone)]
pub struct EntanglementBuffer {
    capacity: usize,
    slots: VecDeque<EprRecord>,
    overflow: OverflowPolicy,
    consume: ConsumePolicy,
}

impl EntanglementBuffer {
    pub fn new(capacity: usize, overflow: OverflowPolicy, consume: ConsumePolicy) -> Self {
        Self { capacity, slots: VecDeque::with_capacity(capacity.min(4096)), overflow, consume }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn overflow_policy(&self) -> OverflowPolicy {
        self.overflow
    }

    pub fn consume_policy(&self) -> ConsumePolicy {
        self.consume
    }

    /// Records in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &EprRecord> {
        self.slots.iter()
    }

    pub fn store(&mut self, record: EprRecord) -> StoreOutcome {
        debug_assert!(self.slots.back().is_none_or(|last| last.id < record.id), "record ids must increase");
        if self.slots.len() < self.capacity {
            self.slots.push_back(record);
            return StoreOutcome::Stored;
        }
        match self.overflow {
            OverflowPolicy::DropNew => StoreOutcome::DroppedNew,
            OverflowPolicy::ReplaceOldest => match self.slots.pop_front() {
                // insertion order == birth order, so the front is the oldest
                Some(evicted) => {
                    self.slots.push_back(record);
                    StoreOutcome::ReplacedOldest(evicted.id)
                }
                None => StoreOutcome::DroppedNew,
            },
        }
    }

    pub fn take(&mut self) -> Option<EprRecord> {
        match self.consume {
            ConsumePolicy::Fifo => self.slots.pop_front(),
            ConsumePolicy::Filo => self.slots.pop_back(),
        }
    }

    /// Drains everything, oldest first.
    pub fn drain(&mut self) -> impl Iterator<Item = EprRecord> + '_ {
        self.slots.drain(..)
    }
}

/// A fixed-length job of classical bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub seq: u64,
    pub bits: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfferOutcome {
    Accepted,
    Dropped,
}

/// FIFO of whole jobs bounded by a bit budget.
#[derive(Debug, Clone)]
pub struct MessageBuffer {
    capacity_bits: usize,
    job_bits: usize,
    queue: VecDeque<Message>,
}

impl MessageBuffer {
    pub fn new(capacity_bits: usize, job_bits: usize) -> Self {
        assert!(job_bits > 0, "job size must be positive");
        Self { capacity_bits, job_bits, queue: VecDeque::new() }
    }

    pub fn capacity_bits(&self) -> usize {
        self.capacity_bits
    }

    pub fn job_bits(&self) -> usize {
        self.job_bits
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn offer(&mut self, message: Message) -> OfferOutcome {
        debug_assert_eq!(message.bits.len(), self.job_bits);
        if (self.queue.len() + 1) * self.job_bits <= self.capacity_bits {
            self.queue.push_back(message);
            OfferOutcome::Accepted
        } else {
            OfferOutcome::Dropped
        }
    }

    pub fn front(&self) -> Option<&Message> {
        self.queue.front()
    }

    pub fn pop(&mut self) -> Option<Message> {
        self.queue.pop_front()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn rec(id: u64) -> EprRecord {
        EprRecord::fresh(id, id * 10)
    }

    fn ids(buf: &EntanglementBuffer) -> Vec<u64> {
        buf.iter().map(|r| r.id).collect()
    }

    #[test]
    fn drop_new_when_full() {
        let mut b = EntanglementBuffer::new(2, OverflowPolicy::DropNew, ConsumePolicy::Filo);
        assert_eq!(b.store(rec(1)), StoreOutcome::Stored);
        assert_eq!(b.store(rec(2)), StoreOutcome::Stored);
        assert_eq!(b.store(rec(3)), StoreOutcome::DroppedNew);
        assert_eq!(ids(&b), vec![1, 2]);
    }

    #[test]
    fn replace_oldest_when_full() {
        let mut b = EntanglementBuffer::new(2, OverflowPolicy::ReplaceOldest, ConsumePolicy::Filo);
        b.store(rec(1));
        b.store(rec(2));
        assert_eq!(b.store(rec(3)), StoreOutcome::ReplacedOldest(1));
        assert_eq!(ids(&b), vec![2, 3]);
    }

    #[test]
    fn zero_capacity_drops_everything() {
        for policy in [OverflowPolicy::DropNew, OverflowPolicy::ReplaceOldest] {
            let mut b = EntanglementBuffer::new(0, policy, ConsumePolicy::Fifo);
            for id in 0..5 {
                assert_eq!(b.store(rec(id)), StoreOutcome::DroppedNew);
            }
            assert!(b.take().is_none());
        }
    }

    #[test]
    fn take_order() {
        let mut fifo = EntanglementBuffer::new(3, OverflowPolicy::DropNew, ConsumePolicy::Fifo);
        let mut filo = EntanglementBuffer::new(3, OverflowPolicy::DropNew, ConsumePolicy::Filo);
        for id in 1..=3 {
            fifo.store(rec(id));
            filo.store(rec(id));
        }
        assert_eq!(fifo.take().unwrap().id, 1);
        assert_eq!(filo.take().unwrap().id, 3);
    }

    #[test]
    fn single_slot_policies_agree() {
        let mut fifo = EntanglementBuffer::new(1, OverflowPolicy::DropNew, ConsumePolicy::Fifo);
        let mut filo = EntanglementBuffer::new(1, OverflowPolicy::DropNew, ConsumePolicy::Filo);
        fifo.store(rec(4));
        filo.store(rec(4));
        assert_eq!(fifo.take(), filo.take());
    }

    #[test]
    fn empty_take() {
        let mut b = EntanglementBuffer::new(3, OverflowPolicy::DropNew, ConsumePolicy::Filo);
        assert!(b.take().is_none());
    }

    fn msg(seq: u64) -> Message {
        Message { seq, bits: vec![false; 4] }
    }

    #[test]
    fn single_job_buffer() {
        let mut b = MessageBuffer::new(4, 4);
        assert_eq!(b.offer(msg(0)), OfferOutcome::Accepted);
        assert_eq!(b.offer(msg(1)), OfferOutcome::Dropped);
        assert_eq!(b.pop().unwrap().seq, 0);
        assert_eq!(b.offer(msg(2)), OfferOutcome::Accepted);
    }

    #[test]
    fn five_job_buffer() {
        let mut b = MessageBuffer::new(20, 4);
        for seq in 0..5 {
            assert_eq!(b.offer(msg(seq)), OfferOutcome::Accepted);
        }
        assert_eq!(b.offer(msg(5)), OfferOutcome::Dropped);
        let order: Vec<u64> = core::iter::from_fn(|| b.pop()).map(|m| m.seq).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Store,
        Take,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![Just(Op::Store), Just(Op::Take)]
    }

    fn policy() -> impl Strategy<Value = (OverflowPolicy, ConsumePolicy)> {
        (
            prop_oneof![Just(OverflowPolicy::DropNew), Just(OverflowPolicy::ReplaceOldest)],
            prop_oneof![Just(ConsumePolicy::Fifo), Just(ConsumePolicy::Filo)],
        )
    }

    proptest! {
        // every stored id ends up taken, evicted or still present, exactly once
        #[test]
        fn record_conservation(cap in 0usize..6, (ov, co) in policy(), ops in prop::collection::vec(op(), 0..200)) {
            let mut b = EntanglementBuffer::new(cap, ov, co);
            let mut next = 0u64;
            let mut stored = Vec::new();
            let mut gone = Vec::new();
            for o in ops {
                match o {
                    Op::Store => {
                        let id = next;
                        next += 1;
                        match b.store(rec(id)) {
                            StoreOutcome::Stored => stored.push(id),
                            StoreOutcome::DroppedNew => {}
                            StoreOutcome::ReplacedOldest(ev) => {
                                stored.push(id);
                                gone.push(ev);
                            }
                        }
                        prop_assert!(b.len() <= cap);
                    }
                    Op::Take => {
                        if let Some(r) = b.take() {
                            gone.push(r.id);
                        }
                    }
                }
            }
            gone.extend(b.iter().map(|r| r.id));
            gone.sort_unstable();
            stored.sort_unstable();
            prop_assert_eq!(gone, stored);
            let remaining = ids(&b);
            prop_assert!(remaining.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn fifo_without_eviction_preserves_order(n in 0usize..50) {
            let mut b = EntanglementBuffer::new(64, OverflowPolicy::DropNew, ConsumePolicy::Fifo);
            for id in 0..n as u64 {
                b.store(rec(id));
            }
            let taken: Vec<u64> = core::iter::from_fn(|| b.take()).map(|r| r.id).collect();
            prop_assert_eq!(taken, (0..n as u64).collect::<Vec<_>>());
        }
    }
}
