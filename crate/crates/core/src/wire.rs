//! Tagged 16-bit command protocol.
//!
//! Every command or telemetry value travels as one ASCII line
//! `"<tag> <value>\n"`, where `tag` is a registered decimal code and `value`
//! an unsigned 16-bit integer. Reals and negative numbers are folded into the
//! unsigned range by the codecs below:
//!
//! * joint angles: whole degrees, negatives sent as `|deg| + 1000`,
//! * Mode-2 reals: fixed point `round(|r| * scale)`, negatives offset by `10 * scale`,
//! * gripper fingers: whole millimetres.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::RobotKind;

/// Offset added to the magnitude of a negative joint angle.
pub const ANGLE_NEGATIVE_OFFSET: u16 = 1000;
pub const ANGLE_LIMIT_DEG: i32 = 180;
pub const GRIPPER_LIMIT_MM: i32 = 40;
/// Mode-2 reals must satisfy `|r| < MAX_SCALED_MAGNITUDE`.
pub const MAX_SCALED_MAGNITUDE: f64 = 10.0;
/// Longest legal line is `"9999 65535\r\n"`; anything longer without a newline is garbage.
const MAX_LINE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("{what} out of range: {value}")]
    Range { what: &'static str, value: String },
    #[error("malformed {what} value {value}")]
    Malformed { what: &'static str, value: u16 },
    #[error("protocol error at byte {offset}: {reason}")]
    Framing { offset: usize, reason: String },
    #[error("unregistered tag {0}")]
    UnknownTag(u32),
}

/// Operating mode selected on the console.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Mode 1: one slider per joint.
    Joints,
    /// Mode 2: seven pose components then Confirm.
    Pose,
    /// Mode 3: device roll sent per joint.
    Tilt,
    /// Mode 4: autonomous grasp with Start/Stop.
    Autonomous,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Joints, Mode::Pose, Mode::Tilt, Mode::Autonomous];

    pub fn number(self) -> u8 {
        match self {
            Mode::Joints => 1,
            Mode::Pose => 2,
            Mode::Tilt => 3,
            Mode::Autonomous => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.number() == n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Left,
    Right,
}

impl Finger {
    pub fn index(self) -> usize {
        match self {
            Finger::Left => 0,
            Finger::Right => 1,
        }
    }
}

/// The seven Mode-2 target parameters, in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoseComponent {
    X,
    Y,
    Z,
    Xor,
    Yor,
    Zor,
    W,
}

impl PoseComponent {
    pub const ALL: [PoseComponent; 7] = [
        PoseComponent::X,
        PoseComponent::Y,
        PoseComponent::Z,
        PoseComponent::Xor,
        PoseComponent::Yor,
        PoseComponent::Zor,
        PoseComponent::W,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            PoseComponent::X => "x",
            PoseComponent::Y => "y",
            PoseComponent::Z => "z",
            PoseComponent::Xor => "Xor",
            PoseComponent::Yor => "Yor",
            PoseComponent::Zor => "Zor",
            PoseComponent::W => "W",
        }
    }
}

/// Every registered tag. [`Tag::code`] and [`Tag::from_code`] are the tag table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Robot(RobotKind),
    Mode(Mode),
    /// Joint number, 1-based, `1..=7`.
    Joint(u8),
    Finger(Finger),
    Pose(PoseComponent),
    Confirm,
    Start,
    Stop,
    /// Telemetry: grasp status bitmask, see [`crate::world::StatusFlags`].
    Status,
    /// Telemetry: real-time factor times 100.
    RealTimeFactor,
    /// Telemetry: error reply, value is an [`crate::session::ErrorCode`].
    Error,
    /// Latency probe, echoed back verbatim.
    Echo,
}

impl Tag {
    pub fn code(self) -> u16 {
        match self {
            Tag::Robot(RobotKind::Ur5) => 5000,
            Tag::Robot(RobotKind::Panda) => 5001,
            Tag::Mode(m) => 4000 + m.number() as u16,
            Tag::Joint(j) => 3000 + j as u16,
            Tag::Finger(Finger::Left) => 3101,
            Tag::Finger(Finger::Right) => 3102,
            Tag::Pose(c) => 2001 + c.index() as u16,
            Tag::Confirm => 2008,
            Tag::Start => 1001,
            Tag::Stop => 1002,
            Tag::Status => 9001,
            Tag::RealTimeFactor => 9002,
            Tag::Error => 9003,
            Tag::Echo => 9999,
        }
    }

    pub fn from_code(code: u32) -> Option<Tag> {
        let tag = match code {
            5000 => Tag::Robot(RobotKind::Ur5),
            5001 => Tag::Robot(RobotKind::Panda),
            4001..=4004 => Tag::Mode(Mode::from_number((code - 4000) as u8)?),
            3001..=3007 => Tag::Joint((code - 3000) as u8),
            3101 => Tag::Finger(Finger::Left),
            3102 => Tag::Finger(Finger::Right),
            2001..=2007 => Tag::Pose(PoseComponent::ALL[(code - 2001) as usize]),
            2008 => Tag::Confirm,
            1001 => Tag::Start,
            1002 => Tag::Stop,
            9001 => Tag::Status,
            9002 => Tag::RealTimeFactor,
            9003 => Tag::Error,
            9999 => Tag::Echo,
            _ => return None,
        };
        Some(tag)
    }

    /// All registered tags in ascending code order.
    pub fn all() -> Vec<Tag> {
        let mut tags: Vec<Tag> = RobotKind::ALL.into_iter().map(Tag::Robot).collect();
        tags.extend(Mode::ALL.into_iter().map(Tag::Mode));
        tags.extend((1..=7).map(Tag::Joint));
        tags.extend([Tag::Finger(Finger::Left), Tag::Finger(Finger::Right)]);
        tags.extend(PoseComponent::ALL.into_iter().map(Tag::Pose));
        tags.extend([
            Tag::Confirm,
            Tag::Start,
            Tag::Stop,
            Tag::Status,
            Tag::RealTimeFactor,
            Tag::Error,
            Tag::Echo,
        ]);
        tags.sort_by_key(|t| t.code());
        tags
    }

    pub fn group(self) -> &'static str {
        match self {
            Tag::Robot(_) => "robot_select",
            Tag::Mode(_) => "mode_select",
            Tag::Joint(_) => "joint_command",
            Tag::Finger(_) => "gripper_command",
            Tag::Pose(_) | Tag::Confirm => "pose_component",
            Tag::Start | Tag::Stop => "autonomy",
            Tag::Status | Tag::RealTimeFactor | Tag::Error | Tag::Echo => "telemetry",
        }
    }

    pub fn describe(self) -> String {
        match self {
            Tag::Robot(r) => format!("select robot {}", r.name().to_uppercase()),
            Tag::Mode(m) => format!("select mode {}", m.number()),
            Tag::Joint(j) => format!("joint {j} angle (encoded degrees)"),
            Tag::Finger(f) => format!("{f:?} finger opening (mm)").to_lowercase(),
            Tag::Pose(c) => format!("target {} (fixed point)", c.label()),
            Tag::Confirm => "confirm Mode-2 target".into(),
            Tag::Start => "start autonomous grasp".into(),
            Tag::Stop => "stop autonomous grasp, return home".into(),
            Tag::Status => "grasp status bitmask".into(),
            Tag::RealTimeFactor => "real-time factor x100".into(),
            Tag::Error => "error reply code".into(),
            Tag::Echo => "latency echo".into(),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// One tagged value on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireFrame {
    pub tag: Tag,
    pub value: u16,
}

impl WireFrame {
    pub fn new(tag: Tag, value: u16) -> Self {
        WireFrame { tag, value }
    }

    /// A frame whose only content is its tag (Confirm, Start, Stop, selections).
    pub fn signal(tag: Tag) -> Self {
        WireFrame { tag, value: 1 }
    }

    pub fn to_line(&self) -> String {
        format!("{} {}\n", self.tag.code(), self.value)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_line().into_bytes()
    }

    /// Parses a single line without its terminator.
    pub fn parse_line(line: &str) -> Result<WireFrame, WireError> {
        parse_line_at(line.as_bytes(), 0)
    }
}

impl fmt::Display for WireFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.tag.code(), self.value)
    }
}

pub fn frame_to_bytes(frame: &WireFrame) -> Vec<u8> {
    frame.to_bytes()
}

/// Parses every complete line in `bytes`; the unterminated tail is returned as the remainder.
/// Stops at the first malformed line.
pub fn bytes_to_frames(bytes: &[u8]) -> Result<(Vec<WireFrame>, &[u8]), WireError> {
    let mut frames = Vec::new();
    let mut start = 0;
    while let Some(nl) = bytes[start..].iter().position(|&b| b == b'\n') {
        frames.push(parse_line_at(&bytes[start..start + nl], start)?);
        start += nl + 1;
    }
    let rest = &bytes[start..];
    if rest.len() > MAX_LINE_LEN {
        return Err(WireError::Framing {
            offset: start,
            reason: "line too long".into(),
        });
    }
    Ok((frames, rest))
}

fn parse_line_at(line: &[u8], offset: usize) -> Result<WireFrame, WireError> {
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let err = |at: usize, reason: &str| WireError::Framing {
        offset: offset + at,
        reason: reason.to_string(),
    };
    let space = line
        .iter()
        .position(|&b| b == b' ')
        .ok_or_else(|| err(0, "missing separator"))?;
    let tag_field = &line[..space];
    let value_field = &line[space + 1..];
    let tag_code = parse_decimal(tag_field).ok_or_else(|| err(0, "non-numeric tag"))?;
    let value = parse_decimal(value_field).ok_or_else(|| err(space + 1, "non-numeric value"))?;
    let tag = Tag::from_code(tag_code).ok_or_else(|| err(0, &format!("unregistered tag {tag_code}")))?;
    let value = u16::try_from(value).map_err(|_| err(space + 1, "value exceeds 65535"))?;
    Ok(WireFrame { tag, value })
}

/// Plain ASCII digits, 1 to 5 of them. Rejects signs, blanks and anything longer.
fn parse_decimal(field: &[u8]) -> Option<u32> {
    if field.is_empty() || field.len() > 5 || !field.iter().all(u8::is_ascii_digit) {
        return None;
    }
    Some(field.iter().fold(0u32, |acc, &d| acc * 10 + u32::from(d - b'0')))
}

/// Incremental line parser owned by one connection. Tolerates arbitrary read splits,
/// reports errors with absolute stream offsets, and resynchronizes at the next newline.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    /// Stream offset of `buf[0]`.
    base: usize,
    /// Dropping bytes of an overlong line until its newline.
    discarding: bool,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes held back waiting for a newline.
    pub fn pending(&self) -> &[u8] {
        &self.buf
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Result<WireFrame, WireError>> {
        let mut out = Vec::new();
        for &b in bytes {
            if self.discarding {
                self.base += 1;
                if b == b'\n' {
                    self.discarding = false;
                }
                continue;
            }
            if b == b'\n' {
                out.push(parse_line_at(&self.buf, self.base));
                self.base += self.buf.len() + 1;
                self.buf.clear();
                continue;
            }
            self.buf.push(b);
            if self.buf.len() > MAX_LINE_LEN {
                out.push(Err(WireError::Framing {
                    offset: self.base,
                    reason: "line too long".into(),
                }));
                self.base += self.buf.len();
                self.buf.clear();
                self.discarding = true;
            }
        }
        out
    }
}

/// Encodes a whole-degree joint angle in `[-180, 180]`.
pub fn encode_angle(deg: i32) -> Result<u16, WireError> {
    if !(-ANGLE_LIMIT_DEG..=ANGLE_LIMIT_DEG).contains(&deg) {
        return Err(WireError::Range {
            what: "angle",
            value: deg.to_string(),
        });
    }
    Ok(if deg >= 0 {
        deg as u16
    } else {
        (-deg) as u16 + ANGLE_NEGATIVE_OFFSET
    })
}

pub fn decode_angle(value: u16) -> Result<i32, WireError> {
    let limit = ANGLE_LIMIT_DEG as u16;
    match value {
        v if v <= limit => Ok(i32::from(v)),
        v if v > ANGLE_NEGATIVE_OFFSET && v <= ANGLE_NEGATIVE_OFFSET + limit => {
            Ok(-i32::from(v - ANGLE_NEGATIVE_OFFSET))
        }
        v => Err(WireError::Malformed {
            what: "angle",
            value: v,
        }),
    }
}

pub fn encode_gripper(mm: i32) -> Result<u16, WireError> {
    if !(0..=GRIPPER_LIMIT_MM).contains(&mm) {
        return Err(WireError::Range {
            what: "gripper opening",
            value: mm.to_string(),
        });
    }
    Ok(mm as u16)
}

/// Gripper opening in metres.
pub fn decode_gripper(value: u16) -> Result<f64, WireError> {
    if i32::from(value) > GRIPPER_LIMIT_MM {
        return Err(WireError::Malformed {
            what: "gripper opening",
            value,
        });
    }
    Ok(f64::from(value) / 1000.0)
}

/// Fixed-point setting for Mode-2 reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ScaleConfig {
    scale: u16,
}

impl ScaleConfig {
    pub const CENTI: ScaleConfig = ScaleConfig { scale: 100 };
    pub const MILLI: ScaleConfig = ScaleConfig { scale: 1000 };

    pub fn new(scale: u32) -> Result<Self, WireError> {
        match scale {
            100 => Ok(Self::CENTI),
            1000 => Ok(Self::MILLI),
            other => Err(WireError::Range {
                what: "scale (expected 100 or 1000)",
                value: other.to_string(),
            }),
        }
    }

    pub fn scale(self) -> u16 {
        self.scale
    }

    pub fn negative_offset(self) -> u16 {
        10 * self.scale
    }

    /// Largest quantization error of a round trip.
    pub fn resolution(self) -> f64 {
        0.5 / f64::from(self.scale)
    }
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self::CENTI
    }
}

impl TryFrom<u32> for ScaleConfig {
    type Error = WireError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        ScaleConfig::new(v)
    }
}

impl From<ScaleConfig> for u32 {
    fn from(c: ScaleConfig) -> u32 {
        u32::from(c.scale)
    }
}

pub fn encode_scaled(real: f64, cfg: ScaleConfig) -> Result<u16, WireError> {
    let range = || WireError::Range {
        what: "scaled real",
        value: real.to_string(),
    };
    if !real.is_finite() || real.abs() >= MAX_SCALED_MAGNITUDE {
        return Err(range());
    }
    let magnitude = (real.abs() * f64::from(cfg.scale)).round() as u32;
    let offset = u32::from(cfg.negative_offset());
    // |r| just under 10 can still round up onto the offset
    if magnitude >= offset {
        return Err(range());
    }
    let value = if real < 0.0 && magnitude > 0 {
        magnitude + offset
    } else {
        magnitude
    };
    u16::try_from(value).map_err(|_| range())
}

pub fn decode_scaled(value: u16, cfg: ScaleConfig) -> Result<f64, WireError> {
    let offset = cfg.negative_offset();
    let scale = f64::from(cfg.scale);
    if u32::from(value) >= 2 * u32::from(offset) {
        return Err(WireError::Malformed {
            what: "scaled real",
            value,
        });
    }
    Ok(if value < offset {
        f64::from(value) / scale
    } else {
        -f64::from(value - offset) / scale
    })
}

/// Markdown reference of every registered tag.
pub fn tag_table_markdown() -> String {
    let mut out = String::from(
        "# Tag table\n\n\
         Generated by `teleop tags`. Each frame is one ASCII line `<tag> <value>\\n`, value in 0..=65535.\n\
         Valueless commands (selections, Confirm, Start, Stop) carry value 1.\n\n\
         | tag | group | meaning |\n|---:|---|---|\n",
    );
    for tag in Tag::all() {
        out.push_str(&format!("| {} | {} | {} |\n", tag.code(), tag.group(), tag.describe()));
    }
    out.push_str(
        "\n## Value encodings\n\n\
         * joint angle, whole degrees in [-180, 180]: `d` if `d >= 0`, else `-d + 1000`\n\
         * gripper finger, whole millimetres in [0, 40]: sent as is\n\
         * pose component `r` with `|r| < 10`: `round(|r| * scale)`, plus `10 * scale` when negative; scale is 100 (default) or 1000\n\
         * status (9001): bit 0 perceived, bit 1 planned, bit 2 grasped, bit 3 placed; bits 4..7 hold the phase number\n",
    );
    out
}
