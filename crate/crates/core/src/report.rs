//! Report files: TOML with a version header and a kind tag, so any report can be
//! read back by the same code that wrote it.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Replay,
    GraspBench,
    Latency,
    Accuracy,
    Metrics,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report is not valid TOML: {0}")]
    Parse(String),
    #[error("unsupported report format version {0}")]
    Version(u32),
    #[error("expected a {expected:?} report, found {found:?}")]
    Kind { expected: ReportKind, found: ReportKind },
    #[error("cannot serialize report: {0}")]
    Serialize(String),
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    format_version: u32,
    kind: ReportKind,
    report: &'a T,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    kind: ReportKind,
}

#[derive(Deserialize)]
struct Owned<T> {
    report: T,
}

pub fn write_report<T: Serialize>(kind: ReportKind, report: &T) -> Result<String, ReportError> {
    toml::to_string(&Envelope {
        format_version: FORMAT_VERSION,
        kind,
        report,
    })
    .map_err(|e| ReportError::Serialize(e.to_string()))
}

/// Kind and version of a report without decoding its body.
pub fn peek_kind(text: &str) -> Result<ReportKind, ReportError> {
    let header: Header = toml::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ReportError::Version(header.format_version));
    }
    Ok(header.kind)
}

pub fn read_report<T: DeserializeOwned>(text: &str, expected: ReportKind) -> Result<T, ReportError> {
    let found = peek_kind(text)?;
    if found != expected {
        return Err(ReportError::Kind { expected, found });
    }
    let body: Owned<T> = toml::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
    Ok(body.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LatencyReport;

    #[test]
    fn latency_round_trip() {
        let r = LatencyReport::from_samples(vec![0.1, 0.2, 0.15], Some(0.01)).unwrap();
        let text = write_report(ReportKind::Latency, &r).unwrap();
        assert!(text.starts_with("format_version = 1\nkind = \"latency\""));
        assert_eq!(read_report::<LatencyReport>(&text, ReportKind::Latency).unwrap(), r);
    }

    #[test]
    fn wrong_kind_and_version() {
        let r = LatencyReport::from_samples(vec![0.1], None).unwrap();
        let text = write_report(ReportKind::Latency, &r).unwrap();
        assert!(matches!(
            read_report::<LatencyReport>(&text, ReportKind::Replay),
            Err(ReportError::Kind { .. })
        ));
        let v2 = text.replace("format_version = 1", "format_version = 2");
        assert!(matches!(peek_kind(&v2), Err(ReportError::Version(2))));
    }
}
