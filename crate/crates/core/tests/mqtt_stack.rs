//! Broker/client integration beyond the acceptance criteria: session
//! takeover, retained messages, qos downgrade, malformed-frame handling, and
//! the telemetry path through the scenario runner.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use onionstore::harness::{run_scenario, Scenario};
use onionstore::mqtt::{
    decode_packet, encode_packet, sensor_topic, Broker, ClientError, MqttClient, MqttPacket,
    TelemetrySample,
};

fn recv_publish(client: &mut MqttClient, timeout: Duration) -> Option<(String, Vec<u8>, u8, bool)> {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        match client.recv_timeout(Duration::from_millis(100)) {
            Ok(Some(MqttPacket::Publish {
                topic,
                payload,
                qos,
                retain,
                ..
            })) => return Some((topic, payload, qos, retain)),
            Ok(Some(_)) | Ok(None) => {}
            Err(_) => return None,
        }
    }
    None
}

#[test]
fn telemetry_sample_round_trips_through_loopback_broker() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();

    let mut subscriber = MqttClient::connect(&addr, "loopback-sub", 30).unwrap();
    subscriber.subscribe("store/s1/sensor/#", 0).unwrap();

    let mut publisher = MqttClient::connect(&addr, "loopback-pub", 30).unwrap();
    let sample = TelemetrySample::new(120.0, "temp", 31.4, true);
    publisher
        .publish_sample(&sensor_topic("s1", "temp"), &sample)
        .unwrap();

    let (topic, payload, _, _) = recv_publish(&mut subscriber, Duration::from_secs(2)).unwrap();
    assert_eq!(topic, "store/s1/sensor/temp");
    assert_eq!(payload, sample.to_payload().as_bytes());
    let parsed = TelemetrySample::parse_payload("temp", &payload).unwrap();
    assert_eq!(parsed, sample);
    broker.stop();
}

#[test]
fn duplicate_client_id_evicts_older_session() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();

    let mut first = MqttClient::connect(&addr, "twin", 30).unwrap();
    let mut second = MqttClient::connect(&addr, "twin", 30).unwrap();

    // the older session gets closed by the takeover
    let deadline = Instant::now() + Duration::from_secs(3);
    let evicted = loop {
        match first.recv_timeout(Duration::from_millis(100)) {
            Err(ClientError::Closed) | Err(ClientError::Io(_)) => break true,
            Ok(None) | Ok(Some(_)) => {
                if Instant::now() > deadline {
                    break false;
                }
            }
            Err(e) => panic!("unexpected: {e}"),
        }
    };
    assert!(evicted, "older session must be disconnected");

    // the newer session is fully functional
    second.subscribe("a/b", 0).unwrap();
    second.ping().unwrap();
    broker.stop();
}

#[test]
fn retained_messages_delivered_to_late_subscribers() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();

    let mut publisher = MqttClient::connect(&addr, "retainer", 30).unwrap();
    publisher
        .publish_qos0("config/threshold", b"30.0", true)
        .unwrap();
    publisher.ping().unwrap(); // fence: retained store updated before subscribing

    let mut late = MqttClient::connect(&addr, "latecomer", 30).unwrap();
    late.subscribe("config/#", 0).unwrap();
    let (topic, payload, _, retain) = recv_publish(&mut late, Duration::from_secs(2)).unwrap();
    assert_eq!(topic, "config/threshold");
    assert_eq!(payload, b"30.0");
    assert!(retain, "retained delivery must carry the retain flag");

    // an empty retained payload clears the slot
    publisher
        .publish_qos0("config/threshold", b"", true)
        .unwrap();
    publisher.ping().unwrap();
    let mut later = MqttClient::connect(&addr, "even-later", 30).unwrap();
    later.subscribe("config/#", 0).unwrap();
    assert!(recv_publish(&mut later, Duration::from_millis(500)).is_none());
    broker.stop();
}

#[test]
fn delivery_qos_is_min_of_publish_and_subscription() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();

    let mut sub_q1 = MqttClient::connect(&addr, "q1-sub", 30).unwrap();
    assert_eq!(sub_q1.subscribe("data/#", 1).unwrap(), vec![1]);
    let mut sub_q0 = MqttClient::connect(&addr, "q0-sub", 30).unwrap();
    assert_eq!(sub_q0.subscribe("data/#", 0).unwrap(), vec![0]);

    let mut publisher = MqttClient::connect(&addr, "qos-pub", 30).unwrap();
    publisher.publish_qos1("data/x", b"payload", false).unwrap();

    let (_, _, qos, _) = recv_publish(&mut sub_q1, Duration::from_secs(2)).unwrap();
    assert_eq!(qos, 1, "qos1 sub x qos1 pub must deliver at qos 1");
    let (_, _, qos, _) = recv_publish(&mut sub_q0, Duration::from_secs(2)).unwrap();
    assert_eq!(qos, 0, "qos0 sub caps delivery at qos 0");

    publisher.publish_qos0("data/y", b"payload", false).unwrap();
    let (_, _, qos, _) = recv_publish(&mut sub_q1, Duration::from_secs(2)).unwrap();
    assert_eq!(qos, 0, "qos0 publish caps delivery at qos 0");
    broker.stop();
}

#[test]
fn malformed_frame_closes_connection() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr();

    let mut raw = TcpStream::connect(addr).unwrap();
    raw.set_read_timeout(Some(Duration::from_millis(200)))
        .unwrap();
    let connect = encode_packet(&MqttPacket::Connect {
        client_id: "raw".into(),
        keep_alive_s: 30,
        clean_session: true,
    })
    .unwrap();
    raw.write_all(&connect).unwrap();
    let mut buf = [0u8; 64];
    let n = raw.read(&mut buf).unwrap();
    assert!(matches!(
        decode_packet(&buf[..n]),
        Ok((MqttPacket::Connack { .. }, _))
    ));

    // packet type 0 is reserved; the broker must drop the connection
    raw.write_all(&[0x00, 0x00]).unwrap();
    let deadline = Instant::now() + Duration::from_secs(3);
    let closed = loop {
        match raw.read(&mut buf) {
            Ok(0) => break true,
            Ok(_) => {}
            Err(e)
                if matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                ) =>
            {
                if Instant::now() > deadline {
                    break false;
                }
            }
            Err(_) => break true,
        }
    };
    assert!(
        closed,
        "broker kept a session alive after a malformed frame"
    );
    broker.stop();
}

#[test]
fn publish_on_closed_session_errors_without_panic() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();
    let mut client = MqttClient::connect(&addr, "orphan", 30).unwrap();
    broker.stop();

    // the first few sends may land in socket buffers; an error must surface
    let mut failed = false;
    for i in 0..200 {
        if client
            .publish_qos0("a/b", format!("n={i}").as_bytes(), false)
            .is_err()
        {
            failed = true;
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    assert!(
        failed,
        "publishing into a dead broker never reported an error"
    );
}

#[test]
fn ping_round_trip() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let mut client = MqttClient::connect(broker.local_addr().to_string(), "pinger", 30).unwrap();
    client.ping().unwrap();
    client.disconnect().unwrap();
    broker.stop();
}

#[test]
fn runner_publishes_sensor_relay_and_alarm_topics() {
    let broker = Broker::start("127.0.0.1:0").unwrap();
    let addr = broker.local_addr().to_string();

    let mut subscriber = MqttClient::connect(&addr, "observer", 30).unwrap();
    subscriber.subscribe("store/itest/#", 0).unwrap();

    // two hot-humid simulated hours publish every tick
    let mut scenario = Scenario::monsoon_preset(1.0, true);
    scenario.duration_s = 7200.0;
    scenario.telemetry.enabled = true;
    scenario.telemetry.broker_addr = addr;
    scenario.telemetry.store_id = "itest".into();
    let out = run_scenario(&scenario).unwrap();
    assert!(out.report.telemetry_sent > 0, "nothing was published");
    assert_eq!(
        out.report.telemetry_dropped, 0,
        "loopback broker should keep up"
    );

    let mut seen_sensor = false;
    let mut seen_relay = false;
    let mut seen_alarm = false;
    let deadline = Instant::now() + Duration::from_secs(5);
    while Instant::now() < deadline && !(seen_sensor && seen_relay && seen_alarm) {
        match subscriber.recv_timeout(Duration::from_millis(100)) {
            Ok(Some(MqttPacket::Publish { topic, payload, .. })) => {
                if topic.starts_with("store/itest/sensor/") {
                    let channel = topic.rsplit('/').next().unwrap();
                    let sample = TelemetrySample::parse_payload(channel, &payload).unwrap();
                    assert!(sample.t_s > 0.0);
                    seen_sensor = true;
                } else if topic.starts_with("store/itest/relay/") {
                    seen_relay = true;
                } else if topic == "store/itest/alarm" {
                    seen_alarm = true;
                }
            }
            Ok(_) => {}
            Err(e) => panic!("subscriber failed: {e}"),
        }
    }
    assert!(seen_sensor, "no sensor samples observed");
    assert!(seen_relay, "no relay states observed");
    assert!(
        seen_alarm,
        "no alarm events observed (monsoon must breach thresholds)"
    );
    broker.stop();
}

/// A "broker" that completes the CONNECT handshake and then never reads
/// again, so the publisher's socket eventually jams.
fn start_stuck_broker() -> (std::net::SocketAddr, std::thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        if let Ok((mut stream, _)) = listener.accept() {
            let mut buf = Vec::new();
            let mut chunk = [0u8; 1024];
            loop {
                match stream.read(&mut chunk) {
                    Ok(0) | Err(_) => return,
                    Ok(n) => {
                        buf.extend_from_slice(&chunk[..n]);
                        if let Ok((MqttPacket::Connect { .. }, _)) = decode_packet(&buf) {
                            let connack = encode_packet(&MqttPacket::Connack {
                                session_present: false,
                                return_code: 0,
                            })
                            .unwrap();
                            let _ = stream.write_all(&connack);
                            break;
                        }
                    }
                }
            }
            // hold the socket open without reading for longer than the test
            std::thread::sleep(Duration::from_secs(30));
        }
    });
    (addr, handle)
}

#[test]
fn stalled_broker_drops_samples_but_never_stalls_the_run() {
    let (addr, _broker_thread) = start_stuck_broker();

    let mut scenario = Scenario::monsoon_preset(30.0, true);
    scenario.telemetry.enabled = true;
    scenario.telemetry.broker_addr = addr.to_string();
    scenario.telemetry.queue_capacity = 4;

    let started = Instant::now();
    let out = run_scenario(&scenario).unwrap();
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(20),
        "run blocked on a stalled broker: {elapsed:?}"
    );
    assert!(
        out.report.telemetry_dropped > 0,
        "a jammed socket must surface as dropped samples"
    );
}
