use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;

use crate::{ApiError, AppState, ClientMessage, FieldError, Mutation, ServerMessage, Session};

pub(crate) async fn stream(
    State(st): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let session = st.session(&id)?;
    Ok(ws.on_upgrade(move |socket| run(socket, session)))
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("message serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

fn error(e: FieldError) -> ServerMessage {
    ServerMessage::Error {
        error: ApiError::Invalid(e).body(),
    }
}

/// Sends the newest frame if it is newer than `last`. Frames are produced
/// only for the latest revision, so revisions may be skipped but never go
/// backwards.
async fn push_frame(socket: &mut WebSocket, session: &Session, last: &mut u64, force: bool) -> bool {
    match session.frame().await {
        Ok(f) if f.revision > *last || force => {
            *last = f.revision;
            send(socket, &ServerMessage::Frame(Box::new(f.as_ref().clone()))).await
        }
        Ok(_) => true,
        Err(e) => send(socket, &error(e)).await,
    }
}

async fn run(mut socket: WebSocket, session: Arc<Session>) {
    let mut updates = session.subscribe();
    let mut last = 0u64;
    updates.mark_unchanged();
    if !push_frame(&mut socket, &session, &mut last, false).await {
        return;
    }
    loop {
        tokio::select! {
            changed = updates.changed() => {
                if changed.is_err() || !push_frame(&mut socket, &session, &mut last, false).await {
                    break;
                }
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(ClientMessage::Patch { patch }) => match session.mutate(Mutation::Patch { patch }).await {
                        Ok(rev) => ServerMessage::Ack { revision: rev.revision },
                        Err(e) => error(e),
                    },
                    Ok(ClientMessage::Refresh) => {
                        if !push_frame(&mut socket, &session, &mut last, true).await {
                            break;
                        }
                        continue;
                    }
                    Err(e) => error(FieldError::new("", e.to_string())),
                };
                if !send(&mut socket, &reply).await {
                    break;
                }
            }
        }
    }
}
