//! The bridge between operator consoles and the simulated arms.
//!
//! * a TCP port speaking the line protocol of [`teleop_core::wire`],
//! * `GET /ws` carrying the same lines over a websocket for browsers,
//! * a small HTTP/JSON API for state, metrics, kinematics and accuracy.
//!
//! One thread owns the [`World`](teleop_core::world::World) and advances it at a
//! fixed tick. Connection tasks queue decoded frames for it; the queue is drained
//! at tick boundaries, so frames from one connection apply in arrival order.
//! Echo frames are answered by the connection task itself and never wait for a tick.
//! Concurrent connections share the one world; the last setpoint written wins.

mod conn;
mod http;
mod ticker;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};

use teleop_core::api::BridgeMetrics;
use teleop_core::bench::seeded_objects;
use teleop_core::scenario::Scenario;
use teleop_core::wire::ScaleConfig;
use teleop_core::world::{World, WorldError, WorldSnapshot};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

pub use teleop_core::api;
pub(crate) use ticker::Inbound;

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub wire_addr: SocketAddr,
    /// `None` disables the HTTP and websocket listener.
    pub http_addr: Option<SocketAddr>,
    pub scenario: Scenario,
    pub scale: ScaleConfig,
    /// Replaces the scenario objects with one seeded random object per arm.
    pub seed: Option<u64>,
}

impl BridgeConfig {
    /// Both listeners on ephemeral loopback ports.
    pub fn loopback(scenario: Scenario) -> Self {
        BridgeConfig {
            wire_addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            http_addr: Some(SocketAddr::from(([127, 0, 0, 1], 0))),
            scenario,
            scale: ScaleConfig::CENTI,
            seed: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("no valid random object placement for the given seed")]
    Sampling,
}

pub(crate) struct Shared {
    inbound: Mutex<mpsc::Sender<Inbound>>,
    snapshot: RwLock<Arc<WorldSnapshot>>,
    metrics: Mutex<BridgeMetrics>,
    next_conn: AtomicU64,
    scenario: Scenario,
}

impl Shared {
    fn send(&self, msg: Inbound) {
        // the ticker only goes away at shutdown, when losing frames is fine
        let _ = self.inbound.lock().expect("inbound lock").send(msg);
    }

    fn next_id(&self) -> u64 {
        self.next_conn.fetch_add(1, Ordering::Relaxed) + 1
    }

    fn metrics(&self) -> std::sync::MutexGuard<'_, BridgeMetrics> {
        self.metrics.lock().expect("metrics lock")
    }
}

/// A running bridge. Dropping it without [`Bridge::shutdown`] leaves the tasks running
/// until the runtime stops.
pub struct Bridge {
    wire_addr: SocketAddr,
    http_addr: Option<SocketAddr>,
    shared: Arc<Shared>,
    cancel: CancellationToken,
    tasks: Vec<JoinHandle<()>>,
    ticker: Option<std::thread::JoinHandle<()>>,
}

impl Bridge {
    pub async fn start(config: BridgeConfig) -> Result<Bridge, BridgeError> {
        let mut scenario = config.scenario.clone();
        if let Some(seed) = config.seed {
            scenario.world.scene.objects = seeded_objects(&scenario, seed).ok_or(BridgeError::Sampling)?;
            scenario.seed = seed;
        }
        let world = World::new(scenario.world.clone())?;

        let wire = TcpListener::bind(config.wire_addr)
            .await
            .map_err(|source| BridgeError::Bind {
                addr: config.wire_addr,
                source,
            })?;
        let wire_addr = wire.local_addr().expect("bound socket has an address");
        let http = match config.http_addr {
            Some(addr) => Some(
                TcpListener::bind(addr)
                    .await
                    .map_err(|source| BridgeError::Bind { addr, source })?,
            ),
            None => None,
        };
        let http_addr = http.as_ref().map(|l| l.local_addr().expect("bound socket has an address"));

        let (tx, rx) = mpsc::channel();
        let shared = Arc::new(Shared {
            inbound: Mutex::new(tx),
            snapshot: RwLock::new(Arc::new(world.snapshot())),
            metrics: Mutex::new(BridgeMetrics::default()),
            next_conn: AtomicU64::new(0),
            scenario: scenario.clone(),
        });
        let ticker = ticker::spawn(world, rx, shared.clone(), &scenario, config.scale);

        let cancel = CancellationToken::new();
        let mut tasks = vec![tokio::spawn(conn::serve_tcp(wire, shared.clone(), cancel.clone()))];
        if let Some(listener) = http {
            tasks.push(tokio::spawn(http::serve(listener, shared.clone(), cancel.clone())));
        }
        tracing::info!(%wire_addr, http_addr = ?http_addr, "bridge listening");
        Ok(Bridge {
            wire_addr,
            http_addr,
            shared,
            cancel,
            tasks,
            ticker: Some(ticker),
        })
    }

    pub fn wire_addr(&self) -> SocketAddr {
        self.wire_addr
    }

    pub fn http_addr(&self) -> Option<SocketAddr> {
        self.http_addr
    }

    pub fn metrics(&self) -> BridgeMetrics {
        self.shared.metrics().clone()
    }

    pub fn snapshot(&self) -> Arc<WorldSnapshot> {
        self.shared.snapshot.read().expect("snapshot lock").clone()
    }

    /// Stops listeners and the ticker and returns the final metrics.
    pub async fn shutdown(mut self) -> BridgeMetrics {
        self.cancel.cancel();
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
        self.shared.send(Inbound::Shutdown);
        if let Some(t) = self.ticker.take() {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
        let metrics = self.metrics();
        tracing::info!(?metrics, "bridge stopped");
        metrics
    }
}
