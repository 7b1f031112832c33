use std::collections::VecDeque;
use std::time::{Duration, Instant};

/// Sliding-window ratio of simulated to wall-clock time.
#[derive(Debug, Clone)]
pub struct RtfMeter {
    window: f64,
    samples: VecDeque<(f64, f64)>,
}

impl Default for RtfMeter {
    fn default() -> Self {
        RtfMeter::new(5.0)
    }
}

impl RtfMeter {
    pub fn new(window_secs: f64) -> Self {
        RtfMeter {
            window: window_secs,
            samples: VecDeque::new(),
        }
    }

    /// Records that `sim` simulated seconds had elapsed at `wall` seconds.
    pub fn record(&mut self, wall: f64, sim: f64) {
        self.samples.push_back((wall, sim));
        // keep one sample at or beyond the window edge so the span stays full
        while self.samples.get(1).is_some_and(|s| wall - s.0 >= self.window) {
            self.samples.pop_front();
        }
    }

    pub fn wall_span(&self) -> f64 {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => b.0 - a.0,
            _ => 0.0,
        }
    }

    /// `None` until at least a second of wall time is covered.
    pub fn factor(&self) -> Option<f64> {
        let (a, b) = (self.samples.front()?, self.samples.back()?);
        let wall = b.0 - a.0;
        if wall < 1.0 {
            return None;
        }
        Some(((b.1 - a.1) / wall).max(f64::MIN_POSITIVE))
    }
}

/// Paces a fixed-step loop against the wall clock. Deadlines are absolute, so a
/// late tick does not push back the ones after it.
#[derive(Debug)]
pub struct TickClock {
    start: Instant,
    period: Duration,
    ticks: u64,
}

impl TickClock {
    pub fn new(period: Duration) -> Self {
        TickClock {
            start: Instant::now(),
            period,
            ticks: 0,
        }
    }

    pub fn start(&self) -> Instant {
        self.start
    }

    /// Wall time at which the next tick is due.
    pub fn next_deadline(&self) -> Instant {
        self.start + Duration::from_nanos(self.period.as_nanos() as u64 * self.ticks)
    }

    /// Counts a tick as done.
    pub fn advance(&mut self) {
        self.ticks += 1;
    }

    /// Blocks the thread until the next tick is due.
    pub fn wait(&self) {
        let deadline = self.next_deadline();
        let now = Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }

    pub fn elapsed_wall(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}
