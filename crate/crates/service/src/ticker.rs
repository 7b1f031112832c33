use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, TryRecvError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use teleop_core::kinematics::IkParams;
use teleop_core::scenario::Scenario;
use teleop_core::session::{Effect, ErrorCode, Session};
use teleop_core::wire::{ScaleConfig, Tag, WireFrame};
use teleop_core::world::{CommandOutcome, RtfMeter, TickClock, World};
use tokio::sync::mpsc::UnboundedSender;

use crate::Shared;

/// Ticks between refreshes of the snapshot served over HTTP.
const SNAPSHOT_EVERY: u64 = 20;

pub(crate) enum Inbound {
    Connect { id: u64, out: UnboundedSender<WireFrame> },
    Frame { id: u64, frame: WireFrame, received: Instant },
    Disconnect { id: u64 },
    Shutdown,
}

struct Peer {
    session: Session,
    out: UnboundedSender<WireFrame>,
    next_telemetry: f64,
}

struct Ticker {
    world: World,
    shared: Arc<Shared>,
    peers: BTreeMap<u64, Peer>,
    ik: IkParams,
    scale: ScaleConfig,
    dt: f64,
    telemetry_period: f64,
    rtf: RtfMeter,
}

pub(crate) fn spawn(
    world: World,
    rx: Receiver<Inbound>,
    shared: Arc<Shared>,
    scenario: &Scenario,
    scale: ScaleConfig,
) -> std::thread::JoinHandle<()> {
    let ticker = Ticker {
        world,
        shared,
        peers: BTreeMap::new(),
        ik: scenario.world.ik,
        scale,
        dt: scenario.dt,
        telemetry_period: scenario.telemetry_period,
        rtf: RtfMeter::default(),
    };
    std::thread::Builder::new()
        .name("world-ticker".into())
        .spawn(move || ticker.run(rx))
        .expect("spawn ticker thread")
}

impl Ticker {
    fn run(mut self, rx: Receiver<Inbound>) {
        let mut clock = TickClock::new(Duration::from_secs_f64(self.dt));
        loop {
            clock.wait();
            loop {
                match rx.try_recv() {
                    Ok(Inbound::Shutdown) | Err(TryRecvError::Disconnected) => {
                        self.publish(true);
                        return;
                    }
                    Ok(msg) => self.handle(msg),
                    Err(TryRecvError::Empty) => break,
                }
            }
            self.world.step(self.dt);
            clock.advance();
            self.rtf.record(clock.elapsed_wall(), self.world.time());
            self.telemetry();
            if self.world.ticks().is_multiple_of(SNAPSHOT_EVERY) {
                self.publish(false);
            }
        }
    }

    fn send(&self, peer: &Peer, frame: WireFrame) {
        tracing::debug!(conn = peer.session.id, dir = "out", tag = frame.tag.code(), value = frame.value);
        let _ = peer.out.send(frame);
    }

    fn handle(&mut self, msg: Inbound) {
        match msg {
            Inbound::Connect { id, out } => {
                let peer = Peer {
                    session: Session::new(id, self.scale),
                    out,
                    next_telemetry: self.world.time(),
                };
                self.peers.insert(id, peer);
            }
            Inbound::Disconnect { id } => {
                self.peers.remove(&id);
            }
            Inbound::Frame { id, frame, received } => self.handle_frame(id, frame, received),
            Inbound::Shutdown => unreachable!("handled by the loop"),
        }
    }

    fn handle_frame(&mut self, id: u64, frame: WireFrame, received: Instant) {
        let Some(mut peer) = self.peers.remove(&id) else {
            return;
        };
        let now = self.world.time();
        let effects = peer.session.handle_frame(&frame, &self.world, &self.ik, now);
        let mut replies = vec![];
        for effect in effects {
            match effect {
                Effect::Command(cmd) => match self.world.apply(&cmd) {
                    CommandOutcome::Clamped => replies.push(ErrorCode::Clamped.reply()),
                    CommandOutcome::Rejected(reason) => {
                        tracing::debug!(conn = id, %reason, "command rejected");
                        replies.push(ErrorCode::BadValue.reply());
                    }
                    CommandOutcome::Applied | CommandOutcome::Ignored => {}
                },
                Effect::Reply(f) => replies.push(f),
                Effect::Commanded(c) => tracing::debug!(conn = id, commanded = ?c),
            }
        }
        let elapsed = received.elapsed().as_secs_f64() * 1e3;
        {
            let mut m = self.shared.metrics();
            m.processing_ms.push(elapsed);
            m.frames_out += replies.len() as u64;
            m.error_replies += replies.iter().filter(|f| f.tag == Tag::Error).count() as u64;
        }
        for r in replies {
            self.send(&peer, r);
        }
        self.peers.insert(id, peer);
    }

    /// Status word of the peer's selected robot and the real-time factor, every period.
    fn telemetry(&mut self) {
        let now = self.world.time();
        let rtf = self.rtf.factor();
        let mut sent = 0;
        for peer in self.peers.values() {
            if peer.next_telemetry > now + 1e-9 {
                continue;
            }
            let status = peer
                .session
                .robot
                .and_then(|r| self.world.arm(r))
                .map_or(0, |a| a.sequence.status_word());
            self.send(peer, WireFrame::new(Tag::Status, status));
            sent += 1;
            if let Some(f) = rtf {
                self.send(peer, WireFrame::new(Tag::RealTimeFactor, (f * 100.0).round().min(65535.0) as u16));
                sent += 1;
            }
        }
        for peer in self.peers.values_mut() {
            while peer.next_telemetry <= now + 1e-9 {
                peer.next_telemetry += self.telemetry_period;
            }
        }
        if sent > 0 {
            self.shared.metrics().frames_out += sent;
        }
    }

    fn publish(&self, last: bool) {
        *self.shared.snapshot.write().expect("snapshot lock") = Arc::new(self.world.snapshot());
        let mut m = self.shared.metrics();
        m.ticks = self.world.ticks();
        m.sim_time = self.world.time();
        m.real_time_factor = self.rtf.factor();
        if last {
            m.connections_open = 0;
        }
    }
}
