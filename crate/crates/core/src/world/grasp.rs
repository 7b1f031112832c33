use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Perceive,
    Plan,
    Approach,
    Grasp,
    Lift,
    Transport,
    Place,
    Retreat,
    Done,
    Stopped,
    Failed,
}

impl Phase {
    pub const ALL: [Phase; 12] = [
        Phase::Idle,
        Phase::Perceive,
        Phase::Plan,
        Phase::Approach,
        Phase::Grasp,
        Phase::Lift,
        Phase::Transport,
        Phase::Place,
        Phase::Retreat,
        Phase::Done,
        Phase::Stopped,
        Phase::Failed,
    ];

    /// Position in [`Phase::ALL`]; carried in the upper bits of the status word.
    pub fn number(self) -> u16 {
        Phase::ALL.iter().position(|p| *p == self).expect("listed") as u16
    }

    pub fn from_number(n: u16) -> Option<Phase> {
        Phase::ALL.get(n as usize).copied()
    }

    pub fn is_active(self) -> bool {
        !matches!(self, Phase::Idle | Phase::Done | Phase::Stopped | Phase::Failed)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Stopped | Phase::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NotPerceived,
    Unreachable,
    Collision,
    GraspFailed,
    Dropped,
    Misplaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusFlags {
    pub perceived: bool,
    pub planned: bool,
    pub grasped: bool,
    pub placed: bool,
}

impl StatusFlags {
    /// Low four bits of the 9001 status word.
    pub fn bits(&self) -> u16 {
        self.perceived as u16 | (self.planned as u16) << 1 | (self.grasped as u16) << 2 | (self.placed as u16) << 3
    }

    pub fn from_bits(bits: u16) -> StatusFlags {
        StatusFlags {
            perceived: bits & 1 != 0,
            planned: bits & 2 != 0,
            grasped: bits & 4 != 0,
            placed: bits & 8 != 0,
        }
    }

    /// True if every flag set in `earlier` is still set here.
    pub fn includes(&self, earlier: &StatusFlags) -> bool {
        self.bits() & earlier.bits() == earlier.bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSequenceState {
    pub phase: Phase,
    pub flags: StatusFlags,
    /// Number of Start commands that began a run.
    pub attempts: u32,
    pub failure: Option<FailureReason>,
    /// Simulated time the current phase was entered, s.
    pub phase_started: f64,
    /// Simulated time of the Start that began this run, s.
    pub run_started: f64,
    pub target: Option<u32>,
}

impl Default for GraspSequenceState {
    fn default() -> Self {
        GraspSequenceState {
            phase: Phase::Idle,
            flags: StatusFlags::default(),
            attempts: 0,
            failure: None,
            phase_started: 0.0,
            run_started: 0.0,
            target: None,
        }
    }
}

impl GraspSequenceState {
    /// The 9001 telemetry word: flags in bits 0..3, phase number in bits 4..7.
    pub fn status_word(&self) -> u16 {
        self.flags.bits() | self.phase.number() << 4
    }

    pub fn enter(&mut self, phase: Phase, now: f64) {
        self.phase = phase;
        self.phase_started = now;
    }

    pub fn fail(&mut self, reason: FailureReason, now: f64) {
        self.failure = Some(reason);
        self.enter(Phase::Failed, now);
    }

    /// Begins a new attempt; flags start over.
    pub fn begin(&mut self, now: f64) {
        self.attempts += 1;
        self.flags = StatusFlags::default();
        self.failure = None;
        self.target = None;
        self.run_started = now;
        self.enter(Phase::Perceive, now);
    }
}
