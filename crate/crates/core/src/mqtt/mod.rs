//! MQTT 3.1.1 telemetry stack: packet codec, topic matching, an in-process
//! TCP broker, and a blocking client.
//!
//! Scope is fixed to qos 0 and 1, clean sessions, and in-memory retained
//! messages; qos 2, persistence, and TLS are out.

pub mod broker;
pub mod client;
pub mod codec;
pub mod sample;
pub mod topic;

pub use broker::{Broker, BrokerConfig, BrokerHandle};
pub use client::{ClientError, MqttClient};
pub use codec::{
    decode_packet, decode_remaining_length, encode_packet, encode_remaining_length, DecodeError,
    EncodeError, MqttPacket, MAX_REMAINING_LENGTH,
};
pub use sample::{SampleError, TelemetrySample};
pub use topic::{
    alarm_topic, relay_topic, sensor_topic, topic_matches, validate_publish_topic, TopicError,
    TopicFilter,
};
