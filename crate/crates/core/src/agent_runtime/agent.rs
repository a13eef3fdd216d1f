use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, Select, Sender};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::bus::{Bus, ERRORS_TOPIC};
use super::codec::Message;
use super::BusError;

/// A message an agent wants published under its own name.
#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub topic: String,
    pub correlation_id: String,
    pub payload: Value,
}

impl Outgoing {
    pub fn new(topic: impl Into<String>, correlation_id: impl Into<String>, payload: Value) -> Self {
        Self { topic: topic.into(), correlation_id: correlation_id.into(), payload }
    }

    /// A message on `topic` carrying the correlation id of `to`.
    pub fn reply(to: &Message, topic: impl Into<String>, payload: Value) -> Self {
        Self::new(topic, to.correlation_id.clone(), payload)
    }

    /// A structured error report on `system/errors`.
    pub fn error(correlation_id: &str, agent: &str, code: &str, message: impl Into<String>) -> Self {
        Self::new(
            ERRORS_TOPIC,
            correlation_id,
            json!({"agent": agent, "error_code": code, "message": message.into()}),
        )
    }
}

/// Message handler. Called for one message at a time.
pub trait Handler: Send {
    fn handle(&mut self, message: &Message) -> Vec<Outgoing>;
}

impl<F> Handler for F
where
    F: FnMut(&Message) -> Vec<Outgoing> + Send,
{
    fn handle(&mut self, message: &Message) -> Vec<Outgoing> {
        self(message)
    }
}

pub struct AgentDescriptor {
    pub name: String,
    pub subscriptions: Vec<String>,
    pub handler: Box<dyn Handler>,
}

impl AgentDescriptor {
    pub fn new<S: AsRef<str>>(name: impl Into<String>, subscriptions: &[S], handler: impl Handler + 'static) -> Self {
        Self {
            name: name.into(),
            subscriptions: subscriptions.iter().map(|s| s.as_ref().to_string()).collect(),
            handler: Box::new(handler),
        }
    }
}

/// A running agent. Dropping the handle stops it.
pub struct AgentHandle {
    name: String,
    stop: Option<Box<dyn FnOnce() + Send>>,
    thread: Option<JoinHandle<()>>,
}

impl AgentHandle {
    pub(crate) fn new(name: String, stop: Box<dyn FnOnce() + Send>, thread: JoinHandle<()>) -> Self {
        Self { name, stop: Some(stop), thread: Some(thread) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Stops the agent after its current message, if any. No handler call
    /// starts after this returns.
    pub fn stop(mut self) {
        self.shutdown();
    }

    /// Waits until the agent ends on its own (bus closed, peer gone).
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        self.stop.take();
    }

    fn shutdown(&mut self) {
        if let Some(stop) = self.stop.take() {
            stop();
        }
        if let Some(t) = self.thread.take() {
            if t.join().is_err() {
                warn!(agent = %self.name, "agent thread panicked");
            }
        }
    }
}

impl Drop for AgentHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Publishes an agent's outgoing messages; a rejected publication is
/// reported on `system/errors`. Returns false once the bus is closed.
pub(crate) fn publish_all(bus: &Bus, name: &str, out: Vec<Outgoing>) -> bool {
    for o in out {
        match bus.publish(name, &o.topic, &o.correlation_id, o.payload) {
            Ok(_) => {}
            Err(BusError::BusClosed) => return false,
            Err(e) => {
                let report = Outgoing::error(&o.correlation_id, name, e.code(), e.to_string());
                if let Err(BusError::BusClosed) = bus.publish(name, &report.topic, &report.correlation_id, report.payload) {
                    return false;
                }
            }
        }
    }
    true
}

/// Subscribes the agent and runs its handler on a dedicated thread.
pub fn spawn_agent(bus: &Bus, descriptor: AgentDescriptor) -> Result<AgentHandle, BusError> {
    let AgentDescriptor { name, subscriptions, mut handler } = descriptor;
    bus.register_name(&name)?;
    let subs = match subscriptions.iter().map(|p| bus.subscribe(&name, p)).collect::<Result<Vec<_>, _>>() {
        Ok(s) => s,
        Err(e) => {
            bus.release_name(&name);
            return Err(e);
        }
    };
    let (stop_tx, stop_rx) = bounded::<()>(1);
    let stopped = Arc::new(AtomicBool::new(false));
    let thread = {
        let bus = bus.clone();
        let name = name.clone();
        let stopped = stopped.clone();
        std::thread::Builder::new()
            .name(format!("agent-{name}"))
            .spawn(move || {
                let mut select = Select::new();
                select.recv(&stop_rx);
                for s in &subs {
                    select.recv(s.receiver());
                }
                let mut open = subs.len();
                while open > 0 && !stopped.load(Ordering::Acquire) {
                    let op = select.select();
                    let i = op.index();
                    if i == 0 {
                        let _ = op.recv(&stop_rx);
                        break;
                    }
                    match op.recv(subs[i - 1].receiver()) {
                        Ok(message) => {
                            if stopped.load(Ordering::Acquire) {
                                break;
                            }
                            let out = handler.handle(&message);
                            if !publish_all(&bus, &name, out) {
                                break;
                            }
                        }
                        Err(_) => {
                            select.remove(i);
                            open -= 1;
                        }
                    }
                }
                drop(subs);
                bus.release_name(&name);
                debug!(agent = %name, "agent stopped");
            })
            .map_err(|e| BusError::Io(e.to_string()))?
    };
    let stop = Box::new(move || {
        stopped.store(true, Ordering::Release);
        let _: Result<(), _> = Sender::try_send(&stop_tx, ());
    });
    Ok(AgentHandle::new(name, stop, thread))
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::AtomicUsize;
    use std::time::Duration;

    use super::*;

    #[test]
    fn echo_round_trip() {
        let bus = Bus::new();
        let echo = spawn_agent(
            &bus,
            AgentDescriptor::new("echo", &["echo/request"], |m: &Message| {
                vec![Outgoing::reply(m, "echo/reply", m.payload.clone())]
            }),
        )
        .unwrap();
        let replies = bus.subscribe("client", "echo/reply").unwrap();
        bus.publish("client", "echo/request", "req-7", json!({"x": 1})).unwrap();
        let r = replies.recv_timeout(Duration::from_secs(5)).unwrap().unwrap();
        assert_eq!((r.correlation_id.as_str(), r.sender.as_str()), ("req-7", "echo"));
        assert_eq!(r.payload, json!({"x": 1}));

        let dup = spawn_agent(&bus, AgentDescriptor::new("echo", &["x"], |_: &Message| vec![]));
        assert!(matches!(dup, Err(BusError::DuplicateName(_))));
        echo.stop();
        spawn_agent(&bus, AgentDescriptor::new("echo", &["x"], |_: &Message| vec![])).unwrap();
    }

    #[test]
    fn stopped_agent_is_silent() {
        let bus = Bus::new();
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let agent = spawn_agent(
            &bus,
            AgentDescriptor::new("counter", &["t"], move |_: &Message| {
                c.fetch_add(1, Ordering::SeqCst);
                vec![]
            }),
        )
        .unwrap();
        let done = bus.subscribe("probe", "t").unwrap();
        bus.publish("p", "t", "c", json!(1)).unwrap();
        done.recv().unwrap();
        while calls.load(Ordering::SeqCst) < 1 {
            std::thread::yield_now();
        }
        agent.stop();
        let before = calls.load(Ordering::SeqCst);
        for _ in 0..10 {
            bus.publish("p", "t", "c", json!(2)).unwrap();
        }
        std::thread::sleep(Duration::from_millis(20));
        assert_eq!(calls.load(Ordering::SeqCst), before);
        assert_eq!(bus.subscription_count(), 1);
    }

    #[test]
    fn bad_outgoing_topic_is_reported() {
        let bus = Bus::new();
        let errors = bus.subscribe("monitor", ERRORS_TOPIC).unwrap();
        let _a = spawn_agent(&bus, AgentDescriptor::new("bad", &["t"], |m: &Message| vec![Outgoing::reply(m, "x/*", json!(0))]))
            .unwrap();
        bus.publish("p", "t", "c9", json!(0)).unwrap();
        let e = errors.recv_timeout(Duration::from_secs(5)).unwrap().unwrap();
        assert_eq!(e.payload["error_code"], "WildcardPublish");
        assert_eq!(e.correlation_id, "c9");
    }
}
