mod common;

use std::time::{Duration, Instant};

use futures::{SinkExt, StreamExt};
use serde_json::json;
use tokio_tungstenite::tungstenite::Message;
use vlab_service::{replay, AnalysisFrame, MutationLog, ServerMessage};

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(srv: &common::Server, id: &str) -> Ws {
    tokio_tungstenite::connect_async(srv.ws(&format!("/sessions/{id}/stream")))
        .await
        .unwrap()
        .0
}

async fn next_message(ws: &mut Ws) -> Option<ServerMessage> {
    loop {
        match tokio::time::timeout(Duration::from_secs(20), ws.next()).await.ok()?? {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(&t).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

/// Collects frames until one with `revision >= until` arrives.
async fn frames_until(ws: &mut Ws, until: u64) -> Vec<AnalysisFrame> {
    let mut out = Vec::new();
    while let Some(msg) = next_message(ws).await {
        if let ServerMessage::Frame(f) = msg {
            let done = f.revision >= until;
            out.push(*f);
            if done {
                break;
            }
        }
    }
    out
}

#[tokio::test]
async fn first_message_is_current_frame() {
    let srv = common::start().await;
    let id = srv.session(json!({"tx": {"n_symbols": 1000}})).await;
    let mut ws = connect(&srv, &id).await;
    match next_message(&mut ws).await.unwrap() {
        ServerMessage::Frame(f) => assert_eq!(f.revision, 1),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn patches_over_the_stream_are_acknowledged() {
    let srv = common::start().await;
    let id = srv.session(json!({"tx": {"n_symbols": 1000}})).await;
    let mut ws = connect(&srv, &id).await;
    next_message(&mut ws).await.unwrap();
    let msg = json!({"type": "patch", "patch": {"chain": [{"stage": "awgn", "snr_db": 5.0}]}});
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
    let mut acked = false;
    let mut frame = None;
    while !(acked && frame.is_some()) {
        match next_message(&mut ws).await.unwrap() {
            ServerMessage::Ack { revision } => {
                assert_eq!(revision, 2);
                acked = true;
            }
            ServerMessage::Frame(f) => frame = Some(f),
            ServerMessage::Error { error } => panic!("{error:?}"),
        }
    }
    assert_eq!(frame.unwrap().revision, 2);

    let bad = json!({"type": "patch", "patch": {"tx": {"scheme": "morse"}}});
    ws.send(Message::Text(bad.to_string().into())).await.unwrap();
    match next_message(&mut ws).await.unwrap() {
        ServerMessage::Error { error } => assert_eq!(error.field.as_deref(), Some("tx.scheme")),
        other => panic!("{other:?}"),
    }
    ws.send(Message::Text("not json".into())).await.unwrap();
    assert!(matches!(
        next_message(&mut ws).await.unwrap(),
        ServerMessage::Error { .. }
    ));
}

#[tokio::test]
async fn unknown_session_stream_is_404() {
    let srv = common::start().await;
    let err = tokio_tungstenite::connect_async(srv.ws("/sessions/missing/stream"))
        .await
        .unwrap_err();
    let tokio_tungstenite::tungstenite::Error::Http(resp) = err else {
        panic!("{err:?}")
    };
    assert_eq!(resp.status().as_u16(), 404);
}

#[tokio::test]
async fn concurrent_mutations_never_mix_revisions() {
    let srv = common::start().await;
    let id = srv
        .session(json!({"tx": {"n_symbols": 2000}, "analysis": {"constellation_points": 200}}))
        .await;
    let mut readers = Vec::new();
    for _ in 0..2 {
        let mut ws = connect(&srv, &id).await;
        readers.push(tokio::spawn(async move { frames_until(&mut ws, 1001).await }));
    }
    let client = reqwest::Client::new();
    let writers: Vec<_> = (0..4u64)
        .map(|w| {
            let client = client.clone();
            let url = format!("{}/sessions/{id}", srv.base);
            tokio::spawn(async move {
                for k in 0..250u64 {
                    let n = w * 250 + k;
                    // Seed and SNR move together; a torn update would pair them wrongly.
                    let patch = json!({"seed": n, "chain": [{"stage": "awgn", "snr_db": 5.0 + (n % 25) as f64}]});
                    let r = client.patch(&url).json(&patch).send().await.unwrap();
                    assert_eq!(r.status().as_u16(), 200);
                    tokio::time::sleep(Duration::from_millis(3)).await;
                }
            })
        })
        .collect();
    for w in writers {
        w.await.unwrap();
    }
    let log: MutationLog = serde_json::from_value(srv.get(&format!("/sessions/{id}/log")).await.1).unwrap();
    assert_eq!(log.entries.len(), 1001);
    let revs = replay(&log.entries).unwrap();

    let mut mixed = 0;
    let mut checked = 0;
    for r in readers {
        let frames = r.await.unwrap();
        assert_eq!(frames.last().unwrap().revision, 1001);
        assert!(frames.windows(2).all(|w| w[1].revision > w[0].revision));
        for f in &frames {
            let rev = &revs[(f.revision - 1) as usize];
            let snr = match &f.spec.chain.stages[..] {
                [vlab_core::impairments::Stage::Awgn { snr_db: Some(s), .. }] => *s,
                _ => f64::NAN,
            };
            let coherent = f.revision == 1 || snr == 5.0 + (f.spec.seed % 25) as f64;
            if !coherent || f.spec != rev.spec || *f != rev.frame().unwrap() {
                mixed += 1;
            }
            checked += 1;
        }
    }
    assert!(checked >= 4);
    assert_eq!(mixed, 0);
}

#[tokio::test]
async fn stream_is_throttled_to_ten_frames_per_second() {
    let srv = common::start().await;
    let id = srv.session(json!({"tx": {"n_symbols": 500}})).await;
    let mut ws = connect(&srv, &id).await;
    next_message(&mut ws).await.unwrap();
    let url = format!("{}/sessions/{id}", srv.base);
    let window = Duration::from_millis(1500);
    let writer = tokio::spawn(async move {
        let client = reqwest::Client::new();
        let start = Instant::now();
        let mut n = 0u64;
        while start.elapsed() < window {
            client.patch(&url).json(&json!({"seed": n})).send().await.unwrap();
            n += 1;
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        n
    });
    let start = Instant::now();
    let mut times = Vec::new();
    while start.elapsed() < window {
        match tokio::time::timeout(window.saturating_sub(start.elapsed()), next_message(&mut ws)).await {
            Ok(Some(ServerMessage::Frame(_))) => times.push(Instant::now()),
            Ok(Some(_)) => {}
            _ => break,
        }
    }
    let mutations = writer.await.unwrap();
    assert!(mutations > 50, "{mutations}");
    assert!(times.len() >= 3, "{}", times.len());
    assert!(times.len() <= 16, "{}", times.len());
    for w in times.windows(2) {
        assert!(w[1] - w[0] >= Duration::from_millis(90), "{:?}", w[1] - w[0]);
    }
}
