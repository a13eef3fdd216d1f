//! TCP transport. One process owns the bus and runs a [`TcpHub`]; remote
//! agents connect, send an announce frame naming themselves and their
//! subscriptions, and then exchange ordinary message frames.

use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{bounded, unbounded, Receiver, Select};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::agent::{AgentDescriptor, AgentHandle, Outgoing};
use super::bus::{Bus, Subscription, ANNOUNCE_TOPIC, ERRORS_TOPIC};
use super::codec::{read_frame, write_frame, Message};
use super::topic::validate_topic;
use super::BusError;

/// Sender name on frames the hub writes itself.
pub const HUB_SENDER: &str = "hub";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announce {
    pub name: String,
    pub subscriptions: Vec<String>,
}

fn hub_frame(topic: &str, correlation_id: &str, payload: Value) -> Message {
    Message { topic: topic.into(), correlation_id: correlation_id.into(), sender: HUB_SENDER.into(), seq: 0, payload }
}

/// Accepts remote agents and bridges them onto a bus.
pub struct TcpHub {
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    conns: Arc<Mutex<Vec<TcpStream>>>,
    accept: Option<JoinHandle<()>>,
}

impl TcpHub {
    pub fn bind(bus: &Bus, addr: impl ToSocketAddrs) -> Result<Self, BusError> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stopping = Arc::new(AtomicBool::new(false));
        let conns: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let accept = {
            let bus = bus.clone();
            let stopping = stopping.clone();
            let conns = conns.clone();
            std::thread::Builder::new().name("tcp-hub".into()).spawn(move || {
                for stream in listener.incoming() {
                    if stopping.load(Ordering::Acquire) {
                        break;
                    }
                    let stream = match stream {
                        Ok(s) => s,
                        Err(e) => {
                            warn!(error = %e, "accept failed");
                            continue;
                        }
                    };
                    if let Ok(clone) = stream.try_clone() {
                        conns.lock().push(clone);
                    }
                    let bus = bus.clone();
                    let _ = std::thread::Builder::new().name("tcp-conn".into()).spawn(move || {
                        if let Err(e) = serve_connection(&bus, stream) {
                            debug!(error = %e, "connection ended");
                        }
                    });
                }
            })?
        };
        Ok(Self { addr, stopping, conns, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting and disconnects every client.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.stopping.swap(true, Ordering::AcqRel) {
            return;
        }
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.accept.take() {
            let _ = t.join();
        }
        for c in self.conns.lock().drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for TcpHub {
    fn drop(&mut self) {
        self.stop();
    }
}

fn reject(stream: &TcpStream, correlation_id: &str, e: &BusError) -> BusError {
    let mut w = BufWriter::new(stream);
    let frame = hub_frame(ERRORS_TOPIC, correlation_id, json!({"error_code": e.code(), "message": e.to_string()}));
    let _ = write_frame(&mut w, &frame);
    let _ = stream.shutdown(Shutdown::Both);
    e.clone()
}

fn serve_connection(bus: &Bus, stream: TcpStream) -> Result<(), BusError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let Some(first) = read_frame(&mut reader)? else {
        return Ok(());
    };
    let announce = if first.topic == ANNOUNCE_TOPIC {
        serde_json::from_value::<Announce>(first.payload.clone()).map_err(|e| BusError::InvalidAgent(e.to_string()))
    } else {
        Err(BusError::InvalidAgent(format!("expected an announce frame, got `{}`", first.topic)))
    };
    let announce = announce.map_err(|e| reject(&stream, &first.correlation_id, &e))?;
    let name = announce.name.clone();
    bus.register_name(&name).map_err(|e| reject(&stream, &first.correlation_id, &e))?;
    let subs: Result<Vec<Subscription>, BusError> = announce.subscriptions.iter().map(|p| bus.subscribe(&name, p)).collect();
    let subs = match subs {
        Ok(s) => s,
        Err(e) => {
            bus.release_name(&name);
            return Err(reject(&stream, &first.correlation_id, &e));
        }
    };

    let (stop_tx, stop_rx) = bounded::<()>(1);
    let writer = {
        let stream = stream.try_clone()?;
        let ack = hub_frame(ANNOUNCE_TOPIC, &first.correlation_id, json!({"accepted": true, "name": name}));
        std::thread::Builder::new().name("tcp-writer".into()).spawn(move || {
            let mut out = BufWriter::new(&stream);
            if write_frame(&mut out, &ack).is_ok() {
                forward(&subs, &stop_rx, &mut out);
            }
            drop(subs);
            let _ = stream.shutdown(Shutdown::Both);
        })?
    };
    // the ack is queued ahead of any subscription traffic; discovery follows
    let _ = bus.publish(&name, ANNOUNCE_TOPIC, &first.correlation_id, first.payload);

    let result = loop {
        match read_frame(&mut reader) {
            Ok(Some(m)) => match bus.publish(&name, &m.topic, &m.correlation_id, m.payload) {
                Ok(_) => {}
                Err(BusError::BusClosed) => break Ok(()),
                Err(e) => {
                    let report = Outgoing::error(&m.correlation_id, &name, e.code(), e.to_string());
                    let _ = bus.publish(&name, &report.topic, &report.correlation_id, report.payload);
                }
            },
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    let _ = stop_tx.try_send(());
    let _ = writer.join();
    bus.release_name(&name);
    result
}

fn forward(subs: &[Subscription], stop: &Receiver<()>, out: &mut BufWriter<&TcpStream>) {
    let mut select = Select::new();
    select.recv(stop);
    for s in subs {
        select.recv(s.receiver());
    }
    let mut open = subs.len();
    while open > 0 {
        let op = select.select();
        let i = op.index();
        if i == 0 {
            let _ = op.recv(stop);
            return;
        }
        match op.recv(subs[i - 1].receiver()) {
            Ok(m) => {
                if write_frame(out, &m).is_err() {
                    return;
                }
            }
            Err(_) => {
                select.remove(i);
                open -= 1;
            }
        }
    }
}

/// Client side of a hub connection.
pub struct RemoteClient {
    name: String,
    writer: Mutex<BufWriter<TcpStream>>,
    stream: TcpStream,
    incoming: Receiver<Message>,
    reader: Option<JoinHandle<()>>,
}

impl RemoteClient {
    /// Connects, announces and waits for the hub to confirm the
    /// subscriptions are live.
    pub fn connect<S: AsRef<str>>(addr: impl ToSocketAddrs, name: &str, subscriptions: &[S]) -> Result<Self, BusError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let announce = Announce {
            name: name.to_string(),
            subscriptions: subscriptions.iter().map(|s| s.as_ref().to_string()).collect(),
        };
        let mut writer = BufWriter::new(stream.try_clone()?);
        let hello = Message {
            topic: ANNOUNCE_TOPIC.into(),
            correlation_id: format!("announce:{name}"),
            sender: name.to_string(),
            seq: 0,
            payload: serde_json::to_value(&announce).expect("announce serializes"),
        };
        write_frame(&mut writer, &hello)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let ack = read_frame(&mut reader)?.ok_or_else(|| BusError::Io("hub closed the connection".into()))?;
        if ack.topic != ANNOUNCE_TOPIC {
            let code = ack.payload["error_code"].as_str().unwrap_or("Remote").to_string();
            let message = ack.payload["message"].as_str().unwrap_or_default().to_string();
            return Err(match code.as_str() {
                "DuplicateName" => BusError::DuplicateName(name.to_string()),
                _ => BusError::Remote { code, message },
            });
        }
        let (tx, incoming) = unbounded();
        let reader = std::thread::Builder::new().name(format!("remote-{name}")).spawn(move || {
            while let Ok(Some(m)) = read_frame(&mut reader) {
                if tx.send(m).is_err() {
                    break;
                }
            }
        })?;
        Ok(Self { name: name.to_string(), writer: Mutex::new(writer), stream, incoming, reader: Some(reader) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sends a publication; the hub assigns the sequence number.
    pub fn publish(&self, topic: &str, correlation_id: &str, payload: Value) -> Result<(), BusError> {
        validate_topic(topic)?;
        let m = Message {
            topic: topic.into(),
            correlation_id: correlation_id.into(),
            sender: self.name.clone(),
            seq: 0,
            payload,
        };
        write_frame(&mut *self.writer.lock(), &m)
    }

    /// `BusClosed` once the hub has gone away and the backlog is drained.
    pub fn recv(&self) -> Result<Message, BusError> {
        self.incoming.recv().map_err(|_| BusError::BusClosed)
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Message>, BusError> {
        match self.incoming.recv_timeout(timeout) {
            Ok(m) => Ok(Some(m)),
            Err(crossbeam_channel::RecvTimeoutError::Timeout) => Ok(None),
            Err(_) => Err(BusError::BusClosed),
        }
    }

    pub fn receiver(&self) -> &Receiver<Message> {
        &self.incoming
    }

    pub fn close(&self) {
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

impl Drop for RemoteClient {
    fn drop(&mut self) {
        self.close();
        if let Some(t) = self.reader.take() {
            let _ = t.join();
        }
    }
}

/// Runs an agent in this process against a remote hub.
pub fn spawn_remote_agent(addr: impl ToSocketAddrs, descriptor: AgentDescriptor) -> Result<AgentHandle, BusError> {
    let AgentDescriptor { name, subscriptions, mut handler } = descriptor;
    let client = Arc::new(RemoteClient::connect(addr, &name, &subscriptions)?);
    let stopped = Arc::new(AtomicBool::new(false));
    let thread = {
        let client = client.clone();
        let stopped = stopped.clone();
        let name = name.clone();
        std::thread::Builder::new().name(format!("agent-{name}")).spawn(move || {
            while let Ok(m) = client.recv() {
                if stopped.load(Ordering::Acquire) {
                    break;
                }
                for o in handler.handle(&m) {
                    if let Err(e) = client.publish(&o.topic, &o.correlation_id, o.payload) {
                        if matches!(e, BusError::Io(_)) {
                            return;
                        }
                        let r = Outgoing::error(&o.correlation_id, &name, e.code(), e.to_string());
                        let _ = client.publish(&r.topic, &r.correlation_id, r.payload);
                    }
                }
            }
        })?
    };
    let stop = Box::new(move || {
        stopped.store(true, Ordering::Release);
        client.close();
    });
    Ok(AgentHandle::new(name, stop, thread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_runtime::spawn_agent;

    #[test]
    fn remote_client_round_trip() {
        let bus = Bus::new();
        let hub = TcpHub::bind(&bus, "127.0.0.1:0").unwrap();
        let announces = bus.subscribe("watch", ANNOUNCE_TOPIC).unwrap();
        let _echo = spawn_agent(
            &bus,
            AgentDescriptor::new("echo", &["echo/request"], |m: &Message| {
                vec![Outgoing::reply(m, "echo/reply", m.payload.clone())]
            }),
        )
        .unwrap();
        let client = RemoteClient::connect(hub.local_addr(), "far", &["echo/*"]).unwrap();
        let a = announces.recv_timeout(Duration::from_secs(5)).unwrap().unwrap();
        assert_eq!(a.sender, "far");
        assert_eq!(a.payload["subscriptions"], json!(["echo/*"]));

        client.publish("echo/request", "r1", json!({"n": 1})).unwrap();
        let mut got = Vec::new();
        while got.len() < 2 {
            got.push(client.recv_timeout(Duration::from_secs(5)).unwrap().unwrap());
        }
        // the client sees its own request (matches echo/*) and the reply
        assert_eq!(got[0].topic, "echo/request");
        assert_eq!(got[1].topic, "echo/reply");
        assert_eq!(got[1].payload, json!({"n": 1}));

        let dup = RemoteClient::connect(hub.local_addr(), "far", &["x"]);
        assert!(matches!(dup, Err(BusError::DuplicateName(_))));
        let bad = RemoteClient::connect(hub.local_addr(), "other", &["a/b*"]);
        assert!(matches!(bad, Err(BusError::Remote { .. })));
        hub.shutdown();
    }

    #[test]
    fn remote_agent_serves_local_clients() {
        let bus = Bus::new();
        let hub = TcpHub::bind(&bus, "127.0.0.1:0").unwrap();
        let agent = spawn_remote_agent(
            hub.local_addr(),
            AgentDescriptor::new("upper", &["text/in"], |m: &Message| {
                vec![Outgoing::reply(m, "text/out", json!(m.payload.as_str().unwrap_or("").to_uppercase()))]
            }),
        )
        .unwrap();
        let out = bus.subscribe("client", "text/out").unwrap();
        bus.publish("client", "text/in", "c", json!("abc")).unwrap();
        let m = out.recv_timeout(Duration::from_secs(5)).unwrap().unwrap();
        assert_eq!((m.sender.as_str(), m.payload.clone()), ("upper", json!("ABC")));
        agent.stop();
    }
}
