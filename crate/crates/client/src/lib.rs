//! Client side of the bridge. [`BridgeClient`] speaks the line protocol over TCP,
//! [`HttpClient`] wraps the JSON API, and [`run_latency_bench`] measures echo round trips.

use std::net::SocketAddr;
use std::time::{Duration, Instant};

use teleop_core::api::{AccuracyRequest, ApiError, BridgeMetrics, FkRequest, FkResponse, IkRequest, TagInfo};
use teleop_core::kinematics::IkResult;
use teleop_core::metrics::{Accuracy, LatencyReport, MetricsError};
use teleop_core::wire::{FrameDecoder, Tag, WireError, WireFrame};
use teleop_core::world::WorldSnapshot;
use teleop_core::RobotKind;
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {addr}: {source}")]
    Connect { addr: SocketAddr, source: std::io::Error },
    #[error("connection error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bridge closed the connection")]
    Closed,
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("bad frame from bridge: {0}")]
    Wire(#[from] WireError),
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("bridge rejected the request: {0}")]
    Api(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One TCP connection to the wire port.
pub struct BridgeClient {
    stream: TcpStream,
    decoder: FrameDecoder,
    pending: std::collections::VecDeque<WireFrame>,
    buf: Vec<u8>,
}

impl BridgeClient {
    pub async fn connect(addr: SocketAddr) -> Result<BridgeClient, ClientError> {
        let stream = TcpStream::connect(addr)
            .await
            .map_err(|source| ClientError::Connect { addr, source })?;
        stream.set_nodelay(true)?;
        Ok(BridgeClient {
            stream,
            decoder: FrameDecoder::new(),
            pending: Default::default(),
            buf: vec![0; 4096],
        })
    }

    pub async fn send(&mut self, frame: WireFrame) -> Result<(), ClientError> {
        self.stream.write_all(&frame.to_bytes()).await?;
        Ok(())
    }

    pub async fn send_all(&mut self, frames: &[WireFrame]) -> Result<(), ClientError> {
        let bytes: Vec<u8> = frames.iter().flat_map(|f| f.to_bytes()).collect();
        self.stream.write_all(&bytes).await?;
        Ok(())
    }

    /// Next frame from the bridge, telemetry included.
    pub async fn recv(&mut self) -> Result<WireFrame, ClientError> {
        loop {
            if let Some(f) = self.pending.pop_front() {
                return Ok(f);
            }
            let n = self.stream.read(&mut self.buf).await?;
            if n == 0 {
                return Err(ClientError::Closed);
            }
            for r in self.decoder.feed(&self.buf[..n]) {
                self.pending.push_back(r?);
            }
        }
    }

    /// Next frame accepted by `keep`, dropping the others.
    pub async fn recv_matching(
        &mut self,
        wait: Duration,
        mut keep: impl FnMut(&WireFrame) -> bool,
    ) -> Result<WireFrame, ClientError> {
        let deadline = tokio::time::Instant::now() + wait;
        loop {
            let frame = tokio::time::timeout_at(deadline, self.recv())
                .await
                .map_err(|_| ClientError::Timeout(wait))??;
            if keep(&frame) {
                return Ok(frame);
            }
        }
    }

    /// Next reply that is not periodic telemetry.
    pub async fn reply(&mut self, wait: Duration) -> Result<WireFrame, ClientError> {
        self.recv_matching(wait, |f| !matches!(f.tag, Tag::Status | Tag::RealTimeFactor))
            .await
    }

    /// One echo round trip.
    pub async fn echo(&mut self, value: u16, wait: Duration) -> Result<Duration, ClientError> {
        let start = Instant::now();
        self.send(WireFrame::new(Tag::Echo, value)).await?;
        self.recv_matching(wait, |f| f.tag == Tag::Echo && f.value == value).await?;
        Ok(start.elapsed())
    }
}

/// The bridge's JSON API at `base`, e.g. `http://127.0.0.1:8080`.
#[derive(Debug, Clone)]
pub struct HttpClient {
    base: String,
    http: reqwest::Client,
}

impl HttpClient {
    pub fn new(base: impl Into<String>) -> HttpClient {
        HttpClient {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn for_addr(addr: SocketAddr) -> HttpClient {
        HttpClient::new(format!("http://{addr}"))
    }

    async fn decode<T: serde::de::DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        if resp.status().is_success() {
            Ok(resp.json().await?)
        } else {
            let status = resp.status();
            let err = resp
                .json::<ApiError>()
                .await
                .map(|e| e.error)
                .unwrap_or_else(|_| status.to_string());
            Err(ClientError::Api(err))
        }
    }

    async fn get<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::decode(self.http.get(format!("{}{path}", self.base)).send().await?).await
    }

    async fn post<B: serde::Serialize, T: serde::de::DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        Self::decode(self.http.post(format!("{}{path}", self.base)).json(body).send().await?).await
    }

    pub async fn state(&self) -> Result<WorldSnapshot, ClientError> {
        self.get("/api/state").await
    }

    pub async fn tags(&self) -> Result<Vec<TagInfo>, ClientError> {
        self.get("/api/tags").await
    }

    pub async fn metrics(&self) -> Result<BridgeMetrics, ClientError> {
        self.get("/api/metrics").await
    }

    pub async fn fk(&self, robot: RobotKind, q: Vec<f64>) -> Result<[f64; 7], ClientError> {
        let r: FkResponse = self.post("/api/fk", &FkRequest { robot, q }).await?;
        Ok(r.pose)
    }

    pub async fn ik(&self, robot: RobotKind, pose: [f64; 7], seed: Option<Vec<f64>>) -> Result<IkResult, ClientError> {
        self.post("/api/ik", &IkRequest { robot, pose, seed }).await
    }

    pub async fn accuracy(&self, pairs: Vec<(f64, f64)>) -> Result<Accuracy, ClientError> {
        self.post("/api/accuracy", &AccuracyRequest { pairs }).await
    }
}

pub const ECHO_TIMEOUT: Duration = Duration::from_secs(5);

/// `n` echo round trips over one connection. With `http`, each echo is preceded by a
/// robot-selection frame so the bridge's own processing time can be read back from
/// its metrics; that selection only affects the benchmark's session.
pub async fn run_latency_bench(wire: SocketAddr, http: Option<&HttpClient>, n: usize) -> Result<LatencyReport, ClientError> {
    if n == 0 {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 }.into());
    }
    let mut client = BridgeClient::connect(wire).await?;
    let before = match http {
        Some(h) => Some(h.metrics().await?.processing_ms),
        None => None,
    };
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if http.is_some() {
            client.send(WireFrame::signal(Tag::Robot(RobotKind::Ur5))).await?;
        }
        let rtt = client.echo((i % 65536) as u16, ECHO_TIMEOUT).await?;
        samples.push(rtt.as_secs_f64() * 1e3);
    }
    let processing = match (http, before) {
        (Some(h), Some(before)) => {
            // selection frames are applied at the next tick; let the last ones land
            tokio::time::sleep(Duration::from_millis(50)).await;
            let after = h.metrics().await?.processing_ms;
            let added = after.count.saturating_sub(before.count);
            (added > 0).then(|| (after.mean * after.count as f64 - before.mean * before.count as f64) / added as f64)
        }
        _ => None,
    };
    Ok(LatencyReport::from_samples(samples, processing)?)
}
