//! Wire-protocol tests against a minimal in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};

use verbatim_core::backend::{RemoteBackend, RemoteConfig};
use verbatim_core::{BackendError, LmBackend};

type Responder = Box<dyn Fn(&str, &str, &str) -> String + Send>;

/// Serve canned JSON responses; one connection at a time, `Connection: close`.
fn spawn_server(responder: Responder) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let responder = &responder;
            let _ = handle_connection(stream, responder);
        }
    });
    format!("http://{addr}")
}

fn handle_connection(stream: TcpStream, responder: &Responder) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line == "\r\n" || line == "\n" || line.is_empty() {
            break;
        }
        if let Some(value) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();

    let response_body = responder(&method, &path, &body);
    let mut stream = reader.into_inner();
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response_body.len(),
        response_body
    )?;
    stream.flush()
}

fn standard_responder(logits: &'static str) -> Responder {
    Box::new(move |method, path, body| match (method, path) {
        ("GET", "/handshake") => {
            r#"{"vocab_size":3,"eos_id":2,"model":"test-model"}"#.to_string()
        }
        ("GET", "/vocab") => r#"{"tokens":[[104,105],[32,121,111],[]]}"#.to_string(),
        ("POST", "/logits") => format!(r#"{{"logits":{logits}}}"#),
        ("POST", "/tokenize") => {
            // "hi yo" -> [0, 1], anything else -> [0]
            if body.contains("hi yo") {
                r#"{"ids":[0,1]}"#.to_string()
            } else {
                r#"{"ids":[0]}"#.to_string()
            }
        }
        ("POST", "/detokenize") => r#"{"bytes":[104,105,32,121,111]}"#.to_string(),
        other => panic!("unexpected request {other:?}"),
    })
}

fn connect(endpoint: &str) -> Result<RemoteBackend, BackendError> {
    RemoteBackend::connect(RemoteConfig {
        endpoint: endpoint.to_string(),
        timeout_secs: 5,
        retries: 0,
    })
}

#[test]
fn handshake_vocab_and_round_trip() {
    let endpoint = spawn_server(standard_responder("[0.5,1.5,-0.5]"));
    let backend = connect(&endpoint).unwrap();
    assert_eq!(backend.vocabulary().len(), 3);
    assert_eq!(backend.vocabulary().eos_id(), 2);
    assert_eq!(backend.model_label(), "test-model");
    assert_eq!(backend.vocabulary().token_bytes(0), b"hi");

    let ids = backend.tokenize("hi yo").unwrap();
    assert_eq!(ids, vec![0, 1]);
    assert_eq!(backend.detokenize(&ids).unwrap(), b"hi yo");

    let logits = backend.next_logits(&[0]).unwrap();
    assert_eq!(logits.len(), 3);
    assert_eq!(logits.score(1), 1.5);
}

#[test]
fn wrong_logits_length_names_expected_size() {
    let endpoint = spawn_server(standard_responder("[0.5,1.5]"));
    let backend = connect(&endpoint).unwrap();
    match backend.next_logits(&[]) {
        Err(BackendError::WrongLogitsLength { expected, got }) => {
            assert_eq!(expected, 3);
            assert_eq!(got, 2);
        }
        other => panic!("unexpected result: {other:?}"),
    }
}

#[test]
fn non_finite_logits_never_reach_the_sampler() {
    // JSON cannot encode NaN/inf and serde_json rejects overflowing numbers,
    // so both shapes fail hard at the wire boundary.
    for bad in ["[0.5,null,1.0]", "[0.5,1e999,1.0]"] {
        let endpoint = spawn_server(standard_responder(
            Box::leak(bad.to_string().into_boxed_str()),
        ));
        let backend = connect(&endpoint).unwrap();
        assert!(backend.next_logits(&[]).is_err(), "accepted {bad}");
    }
}

#[test]
fn top_k_only_server_is_rejected_at_handshake() {
    let endpoint = spawn_server(Box::new(|method, path, _| match (method, path) {
        ("GET", "/handshake") => {
            r#"{"vocab_size":3,"eos_id":2,"model":"m","logits_mode":"top-k"}"#.to_string()
        }
        other => panic!("unexpected request {other:?}"),
    }));
    match connect(&endpoint) {
        Err(BackendError::Handshake(message)) => assert!(message.contains("top-k")),
        other => panic!("unexpected result: {:?}", other.map(|_| "backend")),
    }
}

#[test]
fn vocab_size_mismatch_is_a_protocol_error() {
    let endpoint = spawn_server(Box::new(|method, path, _| match (method, path) {
        ("GET", "/handshake") => r#"{"vocab_size":5,"eos_id":2,"model":"m"}"#.to_string(),
        ("GET", "/vocab") => r#"{"tokens":[[104],[105],[]]}"#.to_string(),
        other => panic!("unexpected request {other:?}"),
    }));
    match connect(&endpoint) {
        Err(BackendError::Protocol(message)) => assert!(message.contains("vocab_size")),
        other => panic!("unexpected result: {:?}", other.map(|_| "backend")),
    }
}

/// Round-trip check against a live model server; set `VERBATIM_TEST_ENDPOINT`
/// to run it.
#[test]
fn live_server_round_trip_fixture() {
    let Ok(endpoint) = std::env::var("VERBATIM_TEST_ENDPOINT") else {
        eprintln!("live_server_round_trip_fixture: skipped (VERBATIM_TEST_ENDPOINT not set)");
        return;
    };
    let backend = RemoteBackend::connect(RemoteConfig {
        endpoint,
        ..Default::default()
    })
    .expect("live server reachable");
    let sentences: Vec<String> = (0..50)
        .map(|i| format!("Round trip sentence number {i} with some shared words."))
        .collect();
    for sentence in &sentences {
        let ids = backend.tokenize(sentence).unwrap();
        let bytes = backend.detokenize(&ids).unwrap();
        assert_eq!(String::from_utf8_lossy(&bytes), *sentence);
    }
}
