//! Bit-exact MQTT 3.1.1 packet codec for the subset this artifact speaks:
//! CONNECT/CONNACK, PUBLISH (qos 0 and 1), PUBACK, SUBSCRIBE/SUBACK,
//! PINGREQ/PINGRESP, DISCONNECT. QoS 2 flows, UNSUBSCRIBE, wills, and
//! username/password are out of scope and decode as malformed.
//!
//! The decoder is streaming-friendly: a partial frame reports
//! [`DecodeError::NeedMoreBytes`], anything else that fails is
//! [`DecodeError::Malformed`] and the connection must be closed.

use thiserror::Error;

use super::topic::{validate_publish_topic, TopicFilter};

/// Largest value the 4-byte remaining-length field can carry.
pub const MAX_REMAINING_LENGTH: u32 = 268_435_455;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    /// The buffer ends mid-frame; read more bytes and retry.
    #[error("need more bytes")]
    NeedMoreBytes,
    /// Protocol violation; the connection must be closed.
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("invalid packet: {0}")]
    Invalid(&'static str),
}

/// The MQTT 3.1.1 control packets this stack exchanges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MqttPacket {
    Connect {
        client_id: String,
        keep_alive_s: u16,
        clean_session: bool,
    },
    Connack {
        session_present: bool,
        return_code: u8,
    },
    Publish {
        topic: String,
        payload: Vec<u8>,
        /// 0 = at most once, 1 = at least once.
        qos: u8,
        retain: bool,
        /// Present exactly when qos = 1.
        packet_id: Option<u16>,
    },
    Puback {
        packet_id: u16,
    },
    Subscribe {
        packet_id: u16,
        filters: Vec<(String, u8)>,
    },
    Suback {
        packet_id: u16,
        /// Granted qos per filter; 0x80 marks a rejected filter.
        granted: Vec<u8>,
    },
    Pingreq,
    Pingresp,
    Disconnect,
}

/// Encode `n` as the base-128 remaining-length field (1..=4 bytes, minimal).
pub fn encode_remaining_length(n: u32) -> Result<Vec<u8>, EncodeError> {
    if n > MAX_REMAINING_LENGTH {
        return Err(EncodeError::Invalid("remaining length out of range"));
    }
    let mut out = Vec::with_capacity(4);
    let mut value = n;
    loop {
        let mut byte = (value % 128) as u8;
        value /= 128;
        if value > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if value == 0 {
            return Ok(out);
        }
    }
}

/// Decode a remaining-length field, returning `(value, bytes consumed)`.
///
/// Rejects encodings longer than four bytes and non-minimal encodings
/// (a multi-byte field whose last byte is zero).
pub fn decode_remaining_length(buf: &[u8]) -> Result<(u32, usize), DecodeError> {
    let mut value: u32 = 0;
    let mut multiplier: u32 = 1;
    for i in 0..4 {
        let Some(&byte) = buf.get(i) else {
            return Err(DecodeError::NeedMoreBytes);
        };
        value += (byte & 0x7F) as u32 * multiplier;
        if byte & 0x80 == 0 {
            if i > 0 && byte == 0 {
                return Err(DecodeError::Malformed("non-minimal remaining length"));
            }
            return Ok((value, i + 1));
        }
        multiplier *= 128;
    }
    Err(DecodeError::Malformed("remaining length exceeds 4 bytes"))
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn push_string(out: &mut Vec<u8>, s: &str) -> Result<(), EncodeError> {
    if s.len() > u16::MAX as usize {
        return Err(EncodeError::Invalid("string longer than 65535 bytes"));
    }
    push_u16(out, s.len() as u16);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn frame(packet_type: u8, flags: u8, body: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if body.len() > MAX_REMAINING_LENGTH as usize {
        return Err(EncodeError::Invalid("packet body too large"));
    }
    let rl = encode_remaining_length(body.len() as u32)?;
    let mut out = Vec::with_capacity(1 + rl.len() + body.len());
    out.push((packet_type << 4) | flags);
    out.extend_from_slice(&rl);
    out.extend_from_slice(body);
    Ok(out)
}

/// Serialize a packet to its exact wire bytes.
pub fn encode_packet(packet: &MqttPacket) -> Result<Vec<u8>, EncodeError> {
    match packet {
        MqttPacket::Connect {
            client_id,
            keep_alive_s,
            clean_session,
        } => {
            let mut body = Vec::new();
            push_string(&mut body, "MQTT")?;
            body.push(4); // protocol level 3.1.1
            body.push(if *clean_session { 0x02 } else { 0x00 });
            push_u16(&mut body, *keep_alive_s);
            push_string(&mut body, client_id)?;
            frame(1, 0, &body)
        }
        MqttPacket::Connack {
            session_present,
            return_code,
        } => {
            if *return_code > 5 {
                return Err(EncodeError::Invalid("connack return code out of range"));
            }
            frame(2, 0, &[*session_present as u8, *return_code])
        }
        MqttPacket::Publish {
            topic,
            payload,
            qos,
            retain,
            packet_id,
        } => {
            validate_publish_topic(topic)
                .map_err(|_| EncodeError::Invalid("invalid publish topic"))?;
            let flags = match (qos, packet_id) {
                (0, None) => u8::from(*retain),
                (1, Some(pid)) if *pid != 0 => 0x02 | u8::from(*retain),
                (0, Some(_)) => {
                    return Err(EncodeError::Invalid("qos 0 publish carries a packet id"))
                }
                (1, _) => {
                    return Err(EncodeError::Invalid(
                        "qos 1 publish needs a nonzero packet id",
                    ))
                }
                _ => return Err(EncodeError::Invalid("qos must be 0 or 1")),
            };
            let mut body = Vec::new();
            push_string(&mut body, topic)?;
            if let Some(pid) = packet_id {
                push_u16(&mut body, *pid);
            }
            body.extend_from_slice(payload);
            frame(3, flags, &body)
        }
        MqttPacket::Puback { packet_id } => {
            if *packet_id == 0 {
                return Err(EncodeError::Invalid("packet id must be nonzero"));
            }
            frame(4, 0, &packet_id.to_be_bytes())
        }
        MqttPacket::Subscribe { packet_id, filters } => {
            if *packet_id == 0 {
                return Err(EncodeError::Invalid("packet id must be nonzero"));
            }
            if filters.is_empty() {
                return Err(EncodeError::Invalid("subscribe needs at least one filter"));
            }
            let mut body = Vec::new();
            push_u16(&mut body, *packet_id);
            for (filter, qos) in filters {
                TopicFilter::parse(filter)
                    .map_err(|_| EncodeError::Invalid("invalid topic filter"))?;
                if *qos > 1 {
                    return Err(EncodeError::Invalid("subscribe qos must be 0 or 1"));
                }
                push_string(&mut body, filter)?;
                body.push(*qos);
            }
            frame(8, 0x02, &body)
        }
        MqttPacket::Suback { packet_id, granted } => {
            if *packet_id == 0 {
                return Err(EncodeError::Invalid("packet id must be nonzero"));
            }
            if granted.is_empty() {
                return Err(EncodeError::Invalid(
                    "suback needs at least one return code",
                ));
            }
            for code in granted {
                if !matches!(code, 0 | 1 | 0x80) {
                    return Err(EncodeError::Invalid(
                        "suback return code must be 0, 1, or 0x80",
                    ));
                }
            }
            let mut body = Vec::new();
            push_u16(&mut body, *packet_id);
            body.extend_from_slice(granted);
            frame(9, 0, &body)
        }
        MqttPacket::Pingreq => frame(12, 0, &[]),
        MqttPacket::Pingresp => frame(13, 0, &[]),
        MqttPacket::Disconnect => frame(14, 0, &[]),
    }
}

/// Cursor over one frame body; running past the declared remaining length is
/// a protocol violation, never a request for more bytes.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take_u8(&mut self) -> Result<u8, DecodeError> {
        let b = *self
            .buf
            .get(self.pos)
            .ok_or(DecodeError::Malformed("truncated field"))?;
        self.pos += 1;
        Ok(b)
    }

    fn take_u16(&mut self) -> Result<u16, DecodeError> {
        let hi = self.take_u8()?;
        let lo = self.take_u8()?;
        Ok(u16::from_be_bytes([hi, lo]))
    }

    fn take_bytes(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Malformed("truncated field"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_string(&mut self) -> Result<String, DecodeError> {
        let len = self.take_u16()? as usize;
        let bytes = self.take_bytes(len)?;
        let s = std::str::from_utf8(bytes)
            .map_err(|_| DecodeError::Malformed("invalid UTF-8 string"))?;
        if s.contains('\u{0}') {
            return Err(DecodeError::Malformed("string contains U+0000"));
        }
        Ok(s.to_string())
    }

    fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    fn expect_empty(&self) -> Result<(), DecodeError> {
        if self.remaining() != 0 {
            return Err(DecodeError::Malformed("trailing bytes after packet body"));
        }
        Ok(())
    }
}

/// Decode one packet from the front of `buf`, returning it and the number of
/// bytes consumed.
pub fn decode_packet(buf: &[u8]) -> Result<(MqttPacket, usize), DecodeError> {
    let first = *buf.first().ok_or(DecodeError::NeedMoreBytes)?;
    let packet_type = first >> 4;
    let flags = first & 0x0F;
    let (remaining, rl_len) = decode_remaining_length(&buf[1..])?;
    let total = 1 + rl_len + remaining as usize;
    if buf.len() < total {
        return Err(DecodeError::NeedMoreBytes);
    }
    let mut r = Reader::new(&buf[1 + rl_len..total]);

    let packet = match packet_type {
        1 => {
            if flags != 0 {
                return Err(DecodeError::Malformed("connect flags nibble must be 0"));
            }
            let name = r.take_string()?;
            if name != "MQTT" {
                return Err(DecodeError::Malformed("unknown protocol name"));
            }
            if r.take_u8()? != 4 {
                return Err(DecodeError::Malformed("unsupported protocol level"));
            }
            let connect_flags = r.take_u8()?;
            if connect_flags & 0x01 != 0 {
                return Err(DecodeError::Malformed("connect reserved flag set"));
            }
            if connect_flags & 0xFC != 0 {
                return Err(DecodeError::Malformed(
                    "will/username/password not supported",
                ));
            }
            let clean_session = connect_flags & 0x02 != 0;
            let keep_alive_s = r.take_u16()?;
            let client_id = r.take_string()?;
            r.expect_empty()?;
            MqttPacket::Connect {
                client_id,
                keep_alive_s,
                clean_session,
            }
        }
        2 => {
            if flags != 0 {
                return Err(DecodeError::Malformed("connack flags must be 0"));
            }
            let ack_flags = r.take_u8()?;
            if ack_flags & 0xFE != 0 {
                return Err(DecodeError::Malformed("connack reserved bits set"));
            }
            let return_code = r.take_u8()?;
            if return_code > 5 {
                return Err(DecodeError::Malformed("connack return code out of range"));
            }
            r.expect_empty()?;
            MqttPacket::Connack {
                session_present: ack_flags & 0x01 != 0,
                return_code,
            }
        }
        3 => {
            let dup = flags & 0x08 != 0;
            let qos = (flags >> 1) & 0x03;
            let retain = flags & 0x01 != 0;
            if qos == 3 {
                return Err(DecodeError::Malformed("publish qos bits 3 are reserved"));
            }
            if qos == 2 {
                return Err(DecodeError::Malformed("qos 2 not supported"));
            }
            if dup && qos == 0 {
                return Err(DecodeError::Malformed("dup flag set on qos 0 publish"));
            }
            let topic = r.take_string()?;
            validate_publish_topic(&topic)
                .map_err(|_| DecodeError::Malformed("invalid publish topic"))?;
            let packet_id = if qos == 1 {
                let pid = r.take_u16()?;
                if pid == 0 {
                    return Err(DecodeError::Malformed("packet id must be nonzero"));
                }
                Some(pid)
            } else {
                None
            };
            let payload = r.rest().to_vec();
            MqttPacket::Publish {
                topic,
                payload,
                qos,
                retain,
                packet_id,
            }
        }
        4 => {
            if flags != 0 {
                return Err(DecodeError::Malformed("puback flags must be 0"));
            }
            let packet_id = r.take_u16()?;
            if packet_id == 0 {
                return Err(DecodeError::Malformed("packet id must be nonzero"));
            }
            r.expect_empty()?;
            MqttPacket::Puback { packet_id }
        }
        8 => {
            if flags != 0x02 {
                return Err(DecodeError::Malformed("subscribe flags must be 0b0010"));
            }
            let packet_id = r.take_u16()?;
            if packet_id == 0 {
                return Err(DecodeError::Malformed("packet id must be nonzero"));
            }
            let mut filters = Vec::new();
            while r.remaining() > 0 {
                let filter = r.take_string()?;
                TopicFilter::parse(&filter)
                    .map_err(|_| DecodeError::Malformed("invalid topic filter"))?;
                let qos = r.take_u8()?;
                if qos > 1 {
                    return Err(DecodeError::Malformed(
                        "subscribe qos above 1 not supported",
                    ));
                }
                filters.push((filter, qos));
            }
            if filters.is_empty() {
                return Err(DecodeError::Malformed("subscribe with empty filter list"));
            }
            MqttPacket::Subscribe { packet_id, filters }
        }
        9 => {
            if flags != 0 {
                return Err(DecodeError::Malformed("suback flags must be 0"));
            }
            let packet_id = r.take_u16()?;
            if packet_id == 0 {
                return Err(DecodeError::Malformed("packet id must be nonzero"));
            }
            let granted = r.rest().to_vec();
            if granted.is_empty() {
                return Err(DecodeError::Malformed("suback with no return codes"));
            }
            for code in &granted {
                if !matches!(code, 0 | 1 | 0x80) {
                    return Err(DecodeError::Malformed("suback return code out of range"));
                }
            }
            MqttPacket::Suback { packet_id, granted }
        }
        12..=14 => {
            if flags != 0 {
                return Err(DecodeError::Malformed(
                    "flags must be 0 for this packet type",
                ));
            }
            r.expect_empty()?;
            match packet_type {
                12 => MqttPacket::Pingreq,
                13 => MqttPacket::Pingresp,
                _ => MqttPacket::Disconnect,
            }
        }
        0 | 15 => return Err(DecodeError::Malformed("reserved packet type")),
        _ => return Err(DecodeError::Malformed("unsupported packet type")),
    };
    Ok((packet, total))
}
