use std::sync::Arc;
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use teleop_core::api::{tag_infos, AccuracyRequest, ApiError, FkRequest, FkResponse, IkRequest};
use teleop_core::kinematics::{forward_kinematics, inverse_kinematics, JointVector, KinematicModel, Pose};
use teleop_core::metrics::accuracy_report;
use tokio::net::TcpListener;
use tokio_util::sync::CancellationToken;

use crate::conn::Connection;
use crate::Shared;

type AppState = (Arc<Shared>, CancellationToken);

fn bad_request(message: impl ToString) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(ApiError {
            error: message.to_string(),
        }),
    )
        .into_response()
}

pub(crate) fn router(shared: Arc<Shared>, cancel: CancellationToken) -> Router {
    Router::new()
        .route("/api/state", get(state))
        .route("/api/tags", get(|| async { Json(tag_infos()) }))
        .route("/api/metrics", get(metrics))
        .route("/api/fk", post(fk))
        .route("/api/ik", post(ik))
        .route("/api/accuracy", post(accuracy))
        .route("/ws", get(ws))
        .with_state((shared, cancel))
}

pub(crate) async fn serve(listener: TcpListener, shared: Arc<Shared>, cancel: CancellationToken) {
    let app = router(shared, cancel.clone());
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move { cancel.cancelled().await })
        .await;
    if let Err(e) = result {
        tracing::error!(error = %e, "http server failed");
    }
}

async fn state(State((shared, _)): State<AppState>) -> Response {
    let snapshot = shared.snapshot.read().expect("snapshot lock").clone();
    Json(&*snapshot).into_response()
}

async fn metrics(State((shared, _)): State<AppState>) -> Response {
    let m = shared.metrics().clone();
    Json(m).into_response()
}

async fn fk(Json(req): Json<FkRequest>) -> Response {
    let model = KinematicModel::builtin(req.robot);
    match forward_kinematics(&model, &req.q) {
        Ok(pose) => Json(FkResponse {
            pose: pose.components(),
        })
        .into_response(),
        Err(e) => bad_request(e),
    }
}

async fn ik(State((shared, _)): State<AppState>, Json(req): Json<IkRequest>) -> Response {
    let model = KinematicModel::builtin(req.robot);
    let target = match Pose::from_components(req.pose) {
        Ok(p) => p,
        Err(e) => return bad_request(e),
    };
    let seed = req.seed.map(JointVector).unwrap_or_else(|| model.home().clone());
    let params = shared.scenario.world.ik;
    let solved = tokio::task::spawn_blocking(move || inverse_kinematics(&model, &target, &seed, &params)).await;
    match solved {
        Ok(Ok(result)) => Json(result).into_response(),
        Ok(Err(e)) => bad_request(e),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(ApiError { error: e.to_string() })).into_response(),
    }
}

async fn accuracy(Json(req): Json<AccuracyRequest>) -> Response {
    match accuracy_report(&req.pairs) {
        Ok(a) => Json(a).into_response(),
        Err(e) => bad_request(e),
    }
}

async fn ws(upgrade: WebSocketUpgrade, State((shared, cancel)): State<AppState>) -> Response {
    upgrade.on_upgrade(move |socket| handle_ws(socket, shared, cancel))
}

/// Text messages carry wire lines; a message without a trailing newline counts as one
/// complete line. Each outgoing frame is its own message.
async fn handle_ws(mut socket: WebSocket, shared: Arc<Shared>, cancel: CancellationToken) {
    let (mut conn, mut rx) = Connection::open(shared);
    loop {
        tokio::select! {
            _ = cancel.cancelled() => break,
            out = rx.recv() => {
                let Some(frame) = out else { break };
                if socket.send(Message::text(frame.to_line())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => {
                let received = Instant::now();
                match msg {
                    Some(Ok(Message::Text(text))) => {
                        let mut bytes = text.as_str().as_bytes().to_vec();
                        if bytes.last() != Some(&b'\n') {
                            bytes.push(b'\n');
                        }
                        conn.feed(&bytes, received);
                    }
                    Some(Ok(Message::Binary(bytes))) => conn.feed(&bytes, received),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => {}
                }
            }
        }
    }
}
