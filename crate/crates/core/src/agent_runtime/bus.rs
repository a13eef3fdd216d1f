use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender, TrySendError};
use parking_lot::{Mutex, RwLock};
use serde_json::{json, Value};
use tracing::warn;

use super::codec::Message;
use super::topic::{validate_topic, TopicPattern};
use super::BusError;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;
pub const ERRORS_TOPIC: &str = "system/errors";
pub const ANNOUNCE_TOPIC: &str = "system/announce";
/// Sender name of diagnostics the bus emits itself.
pub const BUS_SENDER: &str = "bus";

struct SubEntry {
    id: u64,
    agent: String,
    pattern: TopicPattern,
    tx: Sender<Message>,
}

struct Inner {
    capacity: usize,
    closed: AtomicBool,
    next_id: AtomicU64,
    subs: RwLock<Vec<SubEntry>>,
    // one lock per (sender, topic) keeps seq assignment and delivery in step
    seqs: Mutex<HashMap<(String, String), Arc<Mutex<u64>>>>,
    names: Mutex<HashSet<String>>,
}

/// Outcome of one publication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    /// Matching subscriptions the message was queued for.
    pub subscribers: usize,
    /// Matching subscriptions whose queue was full.
    pub dropped: usize,
    pub seq: u64,
}

/// In-process publish/subscribe bus. Cloning yields another handle to the
/// same bus.
#[derive(Clone)]
pub struct Bus {
    inner: Arc<Inner>,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self::with_capacity(DEFAULT_QUEUE_CAPACITY)
    }

    /// A bus whose subscriptions queue at most `capacity` messages each.
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            inner: Arc::new(Inner {
                capacity: capacity.max(1),
                closed: AtomicBool::new(false),
                next_id: AtomicU64::new(0),
                subs: RwLock::new(Vec::new()),
                seqs: Mutex::new(HashMap::new()),
                names: Mutex::new(HashSet::new()),
            }),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::Acquire)
    }

    /// Closes the bus. Queued messages can still be received; afterwards
    /// every subscription reports `BusClosed`.
    pub fn close(&self) {
        self.inner.closed.store(true, Ordering::Release);
        self.inner.subs.write().clear();
    }

    pub fn subscription_count(&self) -> usize {
        self.inner.subs.read().len()
    }

    pub fn publish(&self, sender: &str, topic: &str, correlation_id: &str, payload: Value) -> Result<Receipt, BusError> {
        if self.is_closed() {
            return Err(BusError::BusClosed);
        }
        validate_topic(topic)?;
        let counter = self
            .inner
            .seqs
            .lock()
            .entry((sender.to_string(), topic.to_string()))
            .or_default()
            .clone();
        let mut overflowed = Vec::new();
        let receipt = {
            let mut seq = counter.lock();
            *seq += 1;
            let message = Message {
                topic: topic.to_string(),
                correlation_id: correlation_id.to_string(),
                sender: sender.to_string(),
                seq: *seq,
                payload,
            };
            let subs = self.inner.subs.read();
            let mut receipt = Receipt { subscribers: 0, dropped: 0, seq: *seq };
            for sub in subs.iter().filter(|s| s.pattern.matches(topic)) {
                match sub.tx.try_send(message.clone()) {
                    Ok(()) => receipt.subscribers += 1,
                    Err(TrySendError::Full(_)) => {
                        receipt.dropped += 1;
                        overflowed.push(sub.agent.clone());
                    }
                    // the subscription is being dropped right now
                    Err(TrySendError::Disconnected(_)) => {}
                }
            }
            receipt
        };
        if topic != ERRORS_TOPIC {
            for agent in overflowed {
                warn!(%agent, %topic, seq = receipt.seq, "subscriber queue full, message dropped");
                let _ = self.publish(
                    BUS_SENDER,
                    ERRORS_TOPIC,
                    correlation_id,
                    json!({
                        "error_code": "QueueOverflow",
                        "message": format!("queue of `{agent}` is full; dropped {sender} {topic} #{}", receipt.seq),
                        "agent": agent,
                        "topic": topic,
                        "sender": sender,
                        "seq": receipt.seq,
                    }),
                );
            }
        }
        Ok(receipt)
    }

    /// Subscribes `agent` to `pattern`. Every subscription receives its own
    /// copy of each matching message.
    pub fn subscribe(&self, agent: &str, pattern: &str) -> Result<Subscription, BusError> {
        let pattern = TopicPattern::parse(pattern)?;
        let (tx, rx) = bounded(self.inner.capacity);
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed);
        {
            let mut subs = self.inner.subs.write();
            // checked under the lock so a concurrent close cannot miss us
            if self.is_closed() {
                return Err(BusError::BusClosed);
            }
            subs.push(SubEntry { id, agent: agent.to_string(), pattern: pattern.clone(), tx });
        }
        Ok(Subscription { id, pattern, rx, bus: Arc::downgrade(&self.inner) })
    }

    /// Reserves an agent name; fails if it is taken.
    pub fn register_name(&self, name: &str) -> Result<(), BusError> {
        if name.trim().is_empty() {
            return Err(BusError::InvalidAgent("agent name is empty".into()));
        }
        if !self.inner.names.lock().insert(name.to_string()) {
            return Err(BusError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn release_name(&self, name: &str) {
        self.inner.names.lock().remove(name);
    }
}

/// A live subscription. Dropping it unsubscribes.
pub struct Subscription {
    id: u64,
    pattern: TopicPattern,
    rx: Receiver<Message>,
    bus: Weak<Inner>,
}

impl Subscription {
    pub fn pattern(&self) -> &TopicPattern {
        &self.pattern
    }

    /// Blocks for the next message; `BusClosed` once the bus is closed and
    /// the queue is drained.
    pub fn recv(&self) -> Result<Message, BusError> {
        self.rx.recv().map_err(|_| BusError::BusClosed)
    }

    /// `Ok(None)` on timeout.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Message>, BusError> {
        match self.rx.recv_timeout(timeout) {
            Ok(m) => Ok(Some(m)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(BusError::BusClosed),
        }
    }

    pub fn try_recv(&self) -> Option<Message> {
        self.rx.try_recv().ok()
    }

    pub fn receiver(&self) -> &Receiver<Message> {
        &self.rx
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        if let Some(inner) = self.bus.upgrade() {
            inner.subs.write().retain(|s| s.id != self.id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn receipts_count_subscribers() {
        let bus = Bus::new();
        assert_eq!(bus.publish("p", "kg/updates", "c", json!(1)).unwrap().subscribers, 0);
        let subs: Vec<_> = (0..3).map(|i| bus.subscribe(&format!("s{i}"), "kg/updates").unwrap()).collect();
        let r = bus.publish("p", "kg/updates", "c", json!(2)).unwrap();
        assert_eq!((r.subscribers, r.seq), (3, 2));
        for s in &subs {
            let m = s.recv().unwrap();
            assert_eq!((m.seq, m.payload.clone()), (2, json!(2)));
        }
        assert!(matches!(bus.publish("p", "a/*", "c", json!(0)), Err(BusError::WildcardPublish(_))));
    }

    #[test]
    fn unsubscribe_and_overlap() {
        let bus = Bus::new();
        let a = bus.subscribe("x", "exam/*").unwrap();
        let b = bus.subscribe("x", "exam/request").unwrap();
        assert_eq!(bus.publish("p", "exam/request", "c", json!(null)).unwrap().subscribers, 2);
        drop(b);
        assert_eq!(bus.publish("p", "exam/request", "c", json!(null)).unwrap().subscribers, 1);
        assert_eq!(a.try_recv().unwrap().seq, 1);
        assert_eq!(a.try_recv().unwrap().seq, 2);
        assert!(a.try_recv().is_none());
    }

    #[test]
    fn overflow_drops_newest_and_reports() {
        let bus = Bus::with_capacity(2);
        let slow = bus.subscribe("slow", "t").unwrap();
        let errors = bus.subscribe("monitor", ERRORS_TOPIC).unwrap();
        for i in 0..3 {
            bus.publish("p", "t", "c", json!(i)).unwrap();
        }
        assert_eq!(slow.recv().unwrap().payload, json!(0));
        assert_eq!(slow.recv().unwrap().payload, json!(1));
        assert!(slow.try_recv().is_none());
        let diag = errors.recv().unwrap();
        assert_eq!(diag.sender, BUS_SENDER);
        assert_eq!(diag.payload["error_code"], "QueueOverflow");
        assert_eq!(diag.payload["seq"], 3);
    }

    #[test]
    fn close_and_names() {
        let bus = Bus::new();
        let s = bus.subscribe("a", "t").unwrap();
        bus.publish("p", "t", "c", json!(1)).unwrap();
        bus.close();
        assert!(s.recv().is_ok());
        assert!(matches!(s.recv(), Err(BusError::BusClosed)));
        assert!(matches!(bus.publish("p", "t", "c", json!(1)), Err(BusError::BusClosed)));
        assert!(matches!(bus.subscribe("a", "t"), Err(BusError::BusClosed)));

        let bus = Bus::new();
        bus.register_name("agent").unwrap();
        assert!(matches!(bus.register_name("agent"), Err(BusError::DuplicateName(_))));
        bus.release_name("agent");
        bus.register_name("agent").unwrap();
    }
}
