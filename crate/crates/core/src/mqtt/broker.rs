//! Minimal in-process MQTT 3.1.1 broker over real TCP.
//!
//! One reader thread per connection, one writer thread per connection fed by
//! a bounded queue (oldest qos-0 frame dropped on overflow), and a shared
//! routing registry behind a mutex. Sessions are always clean; retained
//! messages live in memory only. Malformed packets close the connection, and
//! silent clients are dropped at 1.5x their declared keep-alive.

use std::collections::{HashMap, VecDeque};
use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::codec::{decode_packet, encode_packet, DecodeError, MqttPacket};
use super::topic::TopicFilter;

/// Frames larger than this are treated as hostile and close the connection.
const MAX_FRAME_BYTES: usize = 1 << 20;
/// A connection must present its CONNECT within this long.
const CONNECT_DEADLINE: Duration = Duration::from_secs(10);
/// Reader poll interval; bounds keep-alive detection latency.
const POLL_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy)]
pub struct BrokerConfig {
    /// Per-client outbound queue capacity, frames.
    pub max_queued_frames: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            max_queued_frames: 1024,
        }
    }
}

struct Frame {
    bytes: Vec<u8>,
    /// qos-0 publishes may be dropped under backpressure; control frames not.
    droppable: bool,
}

#[derive(Default)]
struct QueueInner {
    frames: VecDeque<Frame>,
    closed: bool,
    dropped: u64,
}

/// Bounded outbound queue between the router and one writer thread.
struct OutQueue {
    inner: Mutex<QueueInner>,
    ready: Condvar,
    capacity: usize,
}

impl OutQueue {
    fn new(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(QueueInner::default()),
            ready: Condvar::new(),
            capacity,
        }
    }

    fn push(&self, bytes: Vec<u8>, droppable: bool) {
        let mut inner = self.inner.lock().unwrap();
        if inner.closed {
            return;
        }
        if droppable && inner.frames.len() >= self.capacity {
            if let Some(pos) = inner.frames.iter().position(|f| f.droppable) {
                inner.frames.remove(pos);
                inner.dropped += 1;
            } else {
                inner.dropped += 1;
                return;
            }
        }
        inner.frames.push_back(Frame { bytes, droppable });
        self.ready.notify_one();
    }

    fn pop(&self) -> Option<Vec<u8>> {
        let mut inner = self.inner.lock().unwrap();
        loop {
            if let Some(frame) = inner.frames.pop_front() {
                return Some(frame.bytes);
            }
            if inner.closed {
                return None;
            }
            inner = self.ready.wait(inner).unwrap();
        }
    }

    fn close(&self) {
        self.inner.lock().unwrap().closed = true;
        self.ready.notify_all();
    }
}

struct SessionEntry {
    client_id: String,
    stream: TcpStream,
    queue: Arc<OutQueue>,
    subscriptions: Vec<(TopicFilter, u8)>,
    next_packet_id: u16,
}

impl SessionEntry {
    fn allocate_packet_id(&mut self) -> u16 {
        self.next_packet_id = if self.next_packet_id == u16::MAX {
            1
        } else {
            self.next_packet_id + 1
        };
        self.next_packet_id
    }
}

#[derive(Default)]
struct Registry {
    sessions: HashMap<u64, SessionEntry>,
    retained: HashMap<String, (Vec<u8>, u8)>,
}

impl Registry {
    fn session_by_client_id(&self, client_id: &str) -> Option<u64> {
        self.sessions
            .iter()
            .find(|(_, entry)| entry.client_id == client_id)
            .map(|(id, _)| *id)
    }
}

/// A running broker bound to a TCP port.
pub struct BrokerHandle {
    local_addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    registry: Arc<Mutex<Registry>>,
    accept_thread: Option<JoinHandle<()>>,
}

impl BrokerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stop accepting, close every live session, and join the accept loop.
    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
        let mut registry = self.registry.lock().unwrap();
        for (_, entry) in registry.sessions.drain() {
            entry.queue.close();
            let _ = entry.stream.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.shutdown_now();
        }
    }
}

/// The broker entry point. `Broker::start` binds and serves in the background.
pub struct Broker;

impl Broker {
    pub fn start(bind_addr: &str) -> std::io::Result<BrokerHandle> {
        Self::start_with(bind_addr, BrokerConfig::default())
    }

    pub fn start_with(bind_addr: &str, config: BrokerConfig) -> std::io::Result<BrokerHandle> {
        let listener = TcpListener::bind(bind_addr)?;
        let local_addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let registry = Arc::new(Mutex::new(Registry::default()));
        let accept_thread = {
            let shutdown = Arc::clone(&shutdown);
            let registry = Arc::clone(&registry);
            std::thread::Builder::new()
                .name("mqtt-accept".into())
                .spawn(move || serve(listener, registry, shutdown, config))?
        };
        Ok(BrokerHandle {
            local_addr,
            shutdown,
            registry,
            accept_thread: Some(accept_thread),
        })
    }
}

/// Accept loop: one reader + one writer thread per connection.
fn serve(
    listener: TcpListener,
    registry: Arc<Mutex<Registry>>,
    shutdown: Arc<AtomicBool>,
    config: BrokerConfig,
) {
    listener.set_nonblocking(true).expect("set_nonblocking");
    let next_session_id = AtomicU64::new(1);
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _peer)) => {
                let session_id = next_session_id.fetch_add(1, Ordering::SeqCst);
                let registry = Arc::clone(&registry);
                let shutdown = Arc::clone(&shutdown);
                let _ = std::thread::Builder::new()
                    .name(format!("mqtt-session-{session_id}"))
                    .spawn(move || run_session(session_id, stream, registry, shutdown, config));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(_) => break,
        }
    }
}

fn run_session(
    session_id: u64,
    stream: TcpStream,
    registry: Arc<Mutex<Registry>>,
    shutdown: Arc<AtomicBool>,
    config: BrokerConfig,
) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(POLL_INTERVAL));
    let queue = Arc::new(OutQueue::new(config.max_queued_frames));

    let writer_stream = match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    };
    let writer_queue = Arc::clone(&queue);
    let writer = std::thread::Builder::new()
        .name(format!("mqtt-writer-{session_id}"))
        .spawn(move || {
            let mut stream = writer_stream;
            while let Some(bytes) = writer_queue.pop() {
                if stream.write_all(&bytes).is_err() {
                    break;
                }
            }
            let _ = stream.shutdown(Shutdown::Both);
        });

    let result = session_loop(session_id, &stream, &registry, &shutdown, &queue);
    if result.is_err() {
        // protocol violation or IO failure: close without further ceremony
    }
    {
        let mut reg = registry.lock().unwrap();
        reg.sessions.remove(&session_id);
    }
    queue.close();
    let _ = stream.shutdown(Shutdown::Both);
    if let Ok(writer) = writer {
        let _ = writer.join();
    }
}

enum SessionEnd {
    CleanDisconnect,
    Closed,
}

fn session_loop(
    session_id: u64,
    stream: &TcpStream,
    registry: &Arc<Mutex<Registry>>,
    shutdown: &Arc<AtomicBool>,
    queue: &Arc<OutQueue>,
) -> Result<SessionEnd, ()> {
    let mut stream = stream;
    let mut buf: Vec<u8> = Vec::with_capacity(4096);
    let mut chunk = [0u8; 4096];
    let started = Instant::now();
    let mut last_rx = Instant::now();
    let mut keep_alive: Option<Duration> = None;
    let mut connected = false;

    loop {
        if shutdown.load(Ordering::SeqCst) {
            return Ok(SessionEnd::Closed);
        }
        // drain complete frames already buffered
        loop {
            match decode_packet(&buf) {
                Ok((packet, consumed)) => {
                    buf.drain(..consumed);
                    match handle_packet(
                        session_id,
                        packet,
                        &mut connected,
                        &mut keep_alive,
                        stream,
                        registry,
                        queue,
                    )? {
                        PacketOutcome::Continue => {}
                        PacketOutcome::Disconnect => return Ok(SessionEnd::CleanDisconnect),
                    }
                }
                Err(DecodeError::NeedMoreBytes) => break,
                Err(DecodeError::Malformed(_)) => return Err(()),
            }
        }
        if buf.len() > MAX_FRAME_BYTES {
            return Err(());
        }
        match stream.read(&mut chunk) {
            Ok(0) => return Ok(SessionEnd::Closed),
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                last_rx = Instant::now();
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if !connected && started.elapsed() > CONNECT_DEADLINE {
                    return Err(());
                }
                if let Some(ka) = keep_alive {
                    if last_rx.elapsed() > ka.mul_f64(1.5) {
                        return Err(()); // keep-alive expiry
                    }
                }
            }
            Err(_) => return Ok(SessionEnd::Closed),
        }
    }
}

enum PacketOutcome {
    Continue,
    Disconnect,
}

fn handle_packet(
    session_id: u64,
    packet: MqttPacket,
    connected: &mut bool,
    keep_alive: &mut Option<Duration>,
    stream: &TcpStream,
    registry: &Arc<Mutex<Registry>>,
    queue: &Arc<OutQueue>,
) -> Result<PacketOutcome, ()> {
    if !*connected {
        let MqttPacket::Connect {
            client_id,
            keep_alive_s,
            clean_session: _,
        } = packet
        else {
            return Err(()); // first packet must be CONNECT
        };
        if keep_alive_s > 0 {
            *keep_alive = Some(Duration::from_secs(keep_alive_s as u64));
        }
        let stream_clone = stream.try_clone().map_err(|_| ())?;
        {
            let mut reg = registry.lock().unwrap();
            // a second session with the same client id evicts the first
            if let Some(old_id) = reg.session_by_client_id(&client_id) {
                if let Some(old) = reg.sessions.remove(&old_id) {
                    old.queue.close();
                    let _ = old.stream.shutdown(Shutdown::Both);
                }
            }
            reg.sessions.insert(
                session_id,
                SessionEntry {
                    client_id,
                    stream: stream_clone,
                    queue: Arc::clone(queue),
                    subscriptions: Vec::new(),
                    next_packet_id: 0,
                },
            );
        }
        *connected = true;
        // sessions are always clean here, so session_present is always false
        let connack = encode_packet(&MqttPacket::Connack {
            session_present: false,
            return_code: 0,
        })
        .expect("connack encodes");
        queue.push(connack, false);
        return Ok(PacketOutcome::Continue);
    }

    match packet {
        MqttPacket::Connect { .. } => Err(()), // second CONNECT is a violation
        MqttPacket::Pingreq => {
            queue.push(
                encode_packet(&MqttPacket::Pingresp).expect("pingresp encodes"),
                false,
            );
            Ok(PacketOutcome::Continue)
        }
        MqttPacket::Disconnect => Ok(PacketOutcome::Disconnect),
        MqttPacket::Subscribe { packet_id, filters } => {
            let mut granted = Vec::with_capacity(filters.len());
            let mut parsed = Vec::with_capacity(filters.len());
            for (raw, qos) in &filters {
                match TopicFilter::parse(raw) {
                    Ok(filter) => {
                        granted.push((*qos).min(1));
                        parsed.push((filter, (*qos).min(1)));
                    }
                    Err(_) => granted.push(0x80),
                }
            }
            let retained_deliveries;
            {
                let mut reg = registry.lock().unwrap();
                retained_deliveries = parsed
                    .iter()
                    .flat_map(|(filter, sub_qos)| {
                        reg.retained
                            .iter()
                            .filter(|(topic, _)| filter.matches(topic))
                            .map(|(topic, (payload, pub_qos))| {
                                (topic.clone(), payload.clone(), (*pub_qos).min(*sub_qos))
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>();
                if let Some(entry) = reg.sessions.get_mut(&session_id) {
                    entry.subscriptions.extend(parsed);
                } else {
                    return Err(());
                }
            }
            let suback =
                encode_packet(&MqttPacket::Suback { packet_id, granted }).expect("suback encodes");
            queue.push(suback, false);
            for (topic, payload, qos) in retained_deliveries {
                let packet_id = if qos == 1 {
                    let mut reg = registry.lock().unwrap();
                    reg.sessions
                        .get_mut(&session_id)
                        .map(|e| e.allocate_packet_id())
                } else {
                    None
                };
                let publish = MqttPacket::Publish {
                    topic,
                    payload,
                    qos,
                    retain: true,
                    packet_id,
                };
                if let Ok(bytes) = encode_packet(&publish) {
                    queue.push(bytes, qos == 0);
                }
            }
            Ok(PacketOutcome::Continue)
        }
        MqttPacket::Publish {
            topic,
            payload,
            qos,
            retain,
            packet_id,
        } => {
            if qos == 1 {
                let pid = packet_id.expect("decoder enforces pid on qos 1");
                queue.push(
                    encode_packet(&MqttPacket::Puback { packet_id: pid }).expect("puback encodes"),
                    false,
                );
            }
            let mut reg = registry.lock().unwrap();
            if retain {
                if payload.is_empty() {
                    reg.retained.remove(&topic);
                } else {
                    reg.retained.insert(topic.clone(), (payload.clone(), qos));
                }
            }
            route_publish(&mut reg, &topic, &payload, qos);
            Ok(PacketOutcome::Continue)
        }
        // we never retry qos-1 deliveries, so acknowledgements just retire
        MqttPacket::Puback { .. } => Ok(PacketOutcome::Continue),
        // server-to-client packets arriving at the broker are violations
        MqttPacket::Connack { .. } | MqttPacket::Suback { .. } | MqttPacket::Pingresp => Err(()),
    }
}

/// Deliver one inbound publish to every matching session, once per session
/// at the highest matching subscription qos (capped by the publish qos).
fn route_publish(reg: &mut Registry, topic: &str, payload: &[u8], publish_qos: u8) {
    let targets: Vec<(u64, u8)> = reg
        .sessions
        .iter()
        .filter_map(|(id, entry)| {
            entry
                .subscriptions
                .iter()
                .filter(|(filter, _)| filter.matches(topic))
                .map(|(_, qos)| *qos)
                .max()
                .map(|best| (*id, best.min(publish_qos)))
        })
        .collect();
    for (id, qos) in targets {
        let Some(entry) = reg.sessions.get_mut(&id) else {
            continue;
        };
        let packet_id = (qos == 1).then(|| entry.allocate_packet_id());
        let publish = MqttPacket::Publish {
            topic: topic.to_string(),
            payload: payload.to_vec(),
            qos,
            retain: false,
            packet_id,
        };
        if let Ok(bytes) = encode_packet(&publish) {
            entry.queue.push(bytes, qos == 0);
        }
    }
}
