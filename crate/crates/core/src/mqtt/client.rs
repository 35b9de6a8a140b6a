//! Blocking MQTT 3.1.1 client used by the telemetry publisher and the tests.

use std::collections::VecDeque;
use std::io::{ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::codec::{decode_packet, encode_packet, DecodeError, MqttPacket};
use super::sample::TelemetrySample;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
    #[error("broker refused connection with return code {0}")]
    ConnectionRefused(u8),
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("connection closed by peer")]
    Closed,
}

/// A connected publish/subscribe session.
pub struct MqttClient {
    stream: TcpStream,
    rx_buf: Vec<u8>,
    /// Publishes that arrived while waiting for an acknowledgement.
    inbox: VecDeque<MqttPacket>,
    next_packet_id: u16,
    /// Default wait used by acknowledged operations.
    pub ack_timeout: Duration,
}

impl MqttClient {
    /// TCP connect, send CONNECT, and wait for a successful CONNACK.
    pub fn connect(
        addr: impl ToSocketAddrs,
        client_id: &str,
        keep_alive_s: u16,
    ) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_millis(50)))?;
        let mut client = Self {
            stream,
            rx_buf: Vec::with_capacity(4096),
            inbox: VecDeque::new(),
            next_packet_id: 0,
            ack_timeout: Duration::from_secs(5),
        };
        client.send(&MqttPacket::Connect {
            client_id: client_id.to_string(),
            keep_alive_s,
            clean_session: true,
        })?;
        match client.wait_for(client.ack_timeout, |p| {
            matches!(p, MqttPacket::Connack { .. })
        })? {
            MqttPacket::Connack { return_code: 0, .. } => Ok(client),
            MqttPacket::Connack { return_code, .. } => {
                Err(ClientError::ConnectionRefused(return_code))
            }
            _ => unreachable!(),
        }
    }

    fn allocate_packet_id(&mut self) -> u16 {
        self.next_packet_id = if self.next_packet_id == u16::MAX {
            1
        } else {
            self.next_packet_id + 1
        };
        self.next_packet_id
    }

    fn send(&mut self, packet: &MqttPacket) -> Result<(), ClientError> {
        let bytes =
            encode_packet(packet).map_err(|_| ClientError::Protocol("unencodable packet"))?;
        self.stream.write_all(&bytes)?;
        Ok(())
    }

    /// Subscribe and wait for the SUBACK; returns the granted codes.
    pub fn subscribe(&mut self, filter: &str, qos: u8) -> Result<Vec<u8>, ClientError> {
        let packet_id = self.allocate_packet_id();
        self.send(&MqttPacket::Subscribe {
            packet_id,
            filters: vec![(filter.to_string(), qos)],
        })?;
        let ack = self.wait_for(
            self.ack_timeout,
            |p| matches!(p, MqttPacket::Suback { packet_id: pid, .. } if *pid == packet_id),
        )?;
        match ack {
            MqttPacket::Suback { granted, .. } => Ok(granted),
            _ => unreachable!(),
        }
    }

    /// Fire-and-forget publish.
    pub fn publish_qos0(
        &mut self,
        topic: &str,
        payload: &[u8],
        retain: bool,
    ) -> Result<(), ClientError> {
        self.send(&MqttPacket::Publish {
            topic: topic.to_string(),
            payload: payload.to_vec(),
            qos: 0,
            retain,
            packet_id: None,
        })
    }

    /// Acknowledged publish: blocks until the matching PUBACK arrives.
    pub fn publish_qos1(
        &mut self,
        topic: &str,
        payload: &[u8],
        retain: bool,
    ) -> Result<u16, ClientError> {
        let packet_id = self.allocate_packet_id();
        self.send(&MqttPacket::Publish {
            topic: topic.to_string(),
            payload: payload.to_vec(),
            qos: 1,
            retain,
            packet_id: Some(packet_id),
        })?;
        self.wait_for(
            self.ack_timeout,
            |p| matches!(p, MqttPacket::Puback { packet_id: pid } if *pid == packet_id),
        )?;
        Ok(packet_id)
    }

    /// Serialize a telemetry sample and publish it at qos 0.
    pub fn publish_sample(
        &mut self,
        topic: &str,
        sample: &TelemetrySample,
    ) -> Result<(), ClientError> {
        self.publish_qos0(topic, sample.to_payload().as_bytes(), false)
    }

    /// PINGREQ/PINGRESP round trip.
    pub fn ping(&mut self) -> Result<(), ClientError> {
        self.send(&MqttPacket::Pingreq)?;
        self.wait_for(self.ack_timeout, |p| matches!(p, MqttPacket::Pingresp))?;
        Ok(())
    }

    /// Next inbound packet, inbox first, within `timeout`.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<MqttPacket>, ClientError> {
        if let Some(packet) = self.inbox.pop_front() {
            return Ok(Some(packet));
        }
        let deadline = Instant::now() + timeout;
        match self.read_packet(deadline) {
            Ok(packet) => Ok(Some(packet)),
            Err(ClientError::Timeout(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Graceful DISCONNECT.
    pub fn disconnect(mut self) -> Result<(), ClientError> {
        self.send(&MqttPacket::Disconnect)?;
        Ok(())
    }

    /// Bound how long a send may block on a congested peer.
    pub fn set_write_timeout(&self, timeout: Option<Duration>) -> Result<(), ClientError> {
        self.stream.set_write_timeout(timeout)?;
        Ok(())
    }

    fn wait_for(
        &mut self,
        timeout: Duration,
        want: impl Fn(&MqttPacket) -> bool,
    ) -> Result<MqttPacket, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let packet = self.read_packet(deadline).map_err(|e| match e {
                ClientError::Timeout(_) => ClientError::Timeout("acknowledgement"),
                other => other,
            })?;
            if want(&packet) {
                return Ok(packet);
            }
            // keep interleaved traffic (e.g. publishes) for recv_timeout
            self.inbox.push_back(packet);
        }
    }

    fn read_packet(&mut self, deadline: Instant) -> Result<MqttPacket, ClientError> {
        let mut chunk = [0u8; 4096];
        loop {
            match decode_packet(&self.rx_buf) {
                Ok((packet, consumed)) => {
                    self.rx_buf.drain(..consumed);
                    return Ok(packet);
                }
                Err(DecodeError::NeedMoreBytes) => {}
                Err(e @ DecodeError::Malformed(_)) => return Err(e.into()),
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout("packet"));
            }
            match self.stream.read(&mut chunk) {
                Ok(0) => return Err(ClientError::Closed),
                Ok(n) => self.rx_buf.extend_from_slice(&chunk[..n]),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}
