//! JSON bodies of the bridge's HTTP API, shared by the service and its clients.

use serde::{Deserialize, Serialize};

use crate::metrics::RunningStats;
use crate::wire::Tag;
use crate::RobotKind;

/// Counters served on `GET /api/metrics`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BridgeMetrics {
    pub frames_in: u64,
    pub frames_out: u64,
    pub error_replies: u64,
    /// Receipt of a frame to its effect applied to the world, ms.
    pub processing_ms: RunningStats,
    /// Receipt of an echo frame to its reply being queued, ms.
    pub echo_ms: RunningStats,
    pub connections_open: u64,
    pub connections_total: u64,
    pub ticks: u64,
    pub sim_time: f64,
    pub real_time_factor: Option<f64>,
}

/// One row of `GET /api/tags`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagInfo {
    pub code: u16,
    pub group: String,
    pub description: String,
}

impl From<Tag> for TagInfo {
    fn from(tag: Tag) -> Self {
        TagInfo {
            code: tag.code(),
            group: tag.group().into(),
            description: tag.describe(),
        }
    }
}

pub fn tag_infos() -> Vec<TagInfo> {
    Tag::all().into_iter().map(TagInfo::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkRequest {
    pub robot: RobotKind,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkResponse {
    /// `(x, y, z, Xor, Yor, Zor, W)` in the base frame.
    pub pose: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkRequest {
    pub robot: RobotKind,
    pub pose: [f64; 7],
    /// Defaults to the home configuration.
    #[serde(default)]
    pub seed: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRequest {
    /// `(commanded, achieved)` pairs.
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
}
