use std::sync::Arc;
use std::time::Instant;

use teleop_core::session::ErrorCode;
use teleop_core::wire::{FrameDecoder, Tag, WireFrame};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};
use tokio_util::sync::CancellationToken;

use crate::{Inbound, Shared};

/// Transport-independent half of a connection: decodes incoming bytes, answers
/// echoes and malformed lines, forwards everything else to the ticker.
pub(crate) struct Connection {
    pub id: u64,
    shared: Arc<Shared>,
    decoder: FrameDecoder,
    out: UnboundedSender<WireFrame>,
}

impl Connection {
    pub fn open(shared: Arc<Shared>) -> (Connection, UnboundedReceiver<WireFrame>) {
        let id = shared.next_id();
        let (out, rx) = unbounded_channel();
        shared.send(Inbound::Connect { id, out: out.clone() });
        {
            let mut m = shared.metrics();
            m.connections_open += 1;
            m.connections_total += 1;
        }
        tracing::info!(conn = id, "connection opened");
        let conn = Connection {
            id,
            shared,
            decoder: FrameDecoder::new(),
            out,
        };
        (conn, rx)
    }

    pub fn feed(&mut self, bytes: &[u8], received: Instant) {
        for result in self.decoder.feed(bytes) {
            let mut m = self.shared.metrics();
            m.frames_in += 1;
            match result {
                Ok(frame) if frame.tag == Tag::Echo => {
                    let _ = self.out.send(frame);
                    m.echo_ms.push(received.elapsed().as_secs_f64() * 1e3);
                    m.frames_out += 1;
                }
                Ok(frame) => {
                    drop(m);
                    tracing::debug!(conn = self.id, dir = "in", tag = frame.tag.code(), value = frame.value);
                    self.shared.send(Inbound::Frame {
                        id: self.id,
                        frame,
                        received,
                    });
                }
                Err(e) => {
                    m.frames_out += 1;
                    m.error_replies += 1;
                    drop(m);
                    tracing::debug!(conn = self.id, error = %e, "malformed frame");
                    let _ = self.out.send(ErrorCode::Malformed.reply());
                }
            }
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.shared.send(Inbound::Disconnect { id: self.id });
        self.shared.metrics().connections_open -= 1;
        tracing::info!(conn = self.id, "connection closed");
    }
}

pub(crate) async fn serve_tcp(listener: TcpListener, shared: Arc<Shared>, cancel: CancellationToken) {
    loop {
        let accepted = tokio::select! {
            _ = cancel.cancelled() => return,
            a = listener.accept() => a,
        };
        match accepted {
            Ok((stream, peer)) => {
                tracing::debug!(%peer, "accepted");
                tokio::spawn(handle_tcp(stream, shared.clone(), cancel.clone()));
            }
            Err(e) => tracing::warn!(error = %e, "accept failed"),
        }
    }
}

async fn handle_tcp(stream: TcpStream, shared: Arc<Shared>, cancel: CancellationToken) {
    let _ = stream.set_nodelay(true);
    let (mut reader, mut writer) = stream.into_split();
    let (mut conn, mut rx) = Connection::open(shared);
    let writer_task = tokio::spawn(async move {
        let mut buf = Vec::new();
        while let Some(frame) = rx.recv().await {
            buf.clear();
            buf.extend_from_slice(&frame.to_bytes());
            while let Ok(more) = rx.try_recv() {
                buf.extend_from_slice(&more.to_bytes());
            }
            if writer.write_all(&buf).await.is_err() {
                break;
            }
        }
    });
    let mut buf = [0u8; 4096];
    loop {
        let read = tokio::select! {
            _ = cancel.cancelled() => break,
            r = reader.read(&mut buf) => r,
        };
        match read {
            Ok(0) => break,
            Ok(n) => conn.feed(&buf[..n], Instant::now()),
            Err(e) => {
                tracing::debug!(conn = conn.id, error = %e, "read failed");
                break;
            }
        }
    }
    drop(conn);
    writer_task.abort();
}
