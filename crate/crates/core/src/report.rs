//! Run reports and their JSON/CSV renderings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Method, PipelineConfig};
use crate::diagnosis::{FaultSignature, Severity};
use crate::error::{Error, Result};
use crate::rooting::FrequencyEstimate;
use crate::tracking::{TrackPoint, TrackStatus};

/// JSON schema every emitted report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub hankel_us: u64,
    pub lanczos_us: u64,
    pub rooting_us: u64,
    pub tracking_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    #[serde(flatten)]
    pub estimate: FrequencyEstimate,
    pub track_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_id: usize,
    pub timestamp_s: f64,
    pub estimates: Vec<EstimateRecord>,
    pub selected_order: usize,
    pub lanczos_iterations: usize,
    /// Frame-level signal-to-noise estimate (linear).
    pub snr_linear: f64,
    /// Non-fatal conditions met while processing the frame.
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_us: Option<StageTimings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub id: u64,
    pub status: TrackStatus,
    pub confirmed: bool,
    pub mean_f_hz: f64,
    pub mean_amplitude: f64,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureRecord {
    #[serde(flatten)]
    pub signature: FaultSignature,
    pub severity: Option<Severity>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InputInfo {
    pub source: String,
    /// Generated rather than measured data.
    pub synthetic: bool,
    pub label: Option<String>,
    pub samples: usize,
    pub fs_hz: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStat {
    pub mean_us: f64,
    pub std_us: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub hankel: StageStat,
    pub lanczos: StageStat,
    pub rooting: StageStat,
    pub tracking: StageStat,
    pub total: StageStat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCount {
    /// Estimates are binned to the nearest hertz.
    pub f_hz: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub estimates: usize,
    pub confirmed_tracks: usize,
    pub detections: Vec<DetectionCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Method,
    pub input: InputInfo,
    pub config_echo: PipelineConfig,
    pub frames: Vec<FrameReport>,
    pub tracks: Vec<TrackReport>,
    pub signatures: Vec<SignatureRecord>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_summary: Option<TimingSummary>,
}

impl Report {
    pub fn confirmed_signatures(&self) -> usize {
        self.signatures.len()
    }
}

pub(crate) fn summarize(frames: &[FrameReport], tracks: &[TrackReport]) -> Summary {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    let mut estimates = 0;
    for f in frames {
        for e in &f.estimates {
            estimates += 1;
            *bins.entry(e.estimate.frequency_hz.round() as i64).or_default() += 1;
        }
    }
    Summary {
        frames: frames.len(),
        estimates,
        confirmed_tracks: tracks.iter().filter(|t| t.confirmed).count(),
        detections: bins
            .into_iter()
            .map(|(f, count)| DetectionCount { f_hz: f as f64, count })
            .collect(),
    }
}

fn stat(values: impl Iterator<Item = u64> + Clone) -> StageStat {
    let n = values.clone().count();
    if n == 0 {
        return StageStat::default();
    }
    let mean = values.clone().map(|v| v as f64).sum::<f64>() / n as f64;
    let var = values.map(|v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
    StageStat {
        mean_us: mean,
        std_us: var.sqrt(),
    }
}

pub(crate) fn timing_summary(frames: &[FrameReport]) -> Option<TimingSummary> {
    let t: Vec<StageTimings> = frames.iter().filter_map(|f| f.timing_us).collect();
    if t.len() != frames.len() {
        return None;
    }
    Some(TimingSummary {
        hankel: stat(t.iter().map(|s| s.hankel_us)),
        lanczos: stat(t.iter().map(|s| s.lanczos_us)),
        rooting: stat(t.iter().map(|s| s.rooting_us)),
        tracking: stat(t.iter().map(|s| s.tracking_us)),
        total: stat(t.iter().map(|s| s.hankel_us + s.lanczos_us + s.rooting_us + s.tracking_us)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::invalid("format", format!("unknown format '{other}'"))),
        }
    }
}

pub fn to_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Numerical(format!("serializing report: {e}")))
}

pub const CSV_HEADER: &str = "frame_id,t_s,f_hz,amp,phase,root_radius,track_id";

/// One row per (frame, estimate). Floats use the shortest representation
/// that parses back to the same value.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for f in &report.frames {
        for e in &f.estimates {
            let est = &e.estimate;
            let track = e.track_id.map_or(String::new(), |t| t.to_string());
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{}\n",
                f.frame_id, f.timestamp_s, est.frequency_hz, est.amplitude, est.phase_rad, est.root_radius, track
            ));
        }
    }
    out
}

/// A parsed CSV report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub frame_id: usize,
    pub t_s: f64,
    pub f_hz: f64,
    pub amp: f64,
    pub phase: f64,
    pub root_radius: f64,
    pub track_id: Option<u64>,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: "missing report header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line: i + 1,
            reason: format!("bad {what}"),
        };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(bad("column count"));
        }
        let f = |k: usize, what: &str| cols[k].trim().parse::<f64>().map_err(|_| bad(what));
        rows.push(CsvRow {
            frame_id: cols[0].trim().parse().map_err(|_| bad("frame_id"))?,
            t_s: f(1, "t_s")?,
            f_hz: f(2, "f_hz")?,
            amp: f(3, "amp")?,
            phase: f(4, "phase")?,
            root_radius: f(5, "root_radius")?,
            track_id: match cols[6].trim() {
                "" => None,
                t => Some(t.parse().map_err(|_| bad("track_id"))?),
            },
        });
    }
    Ok(rows)
}

pub fn emit_report(report: &Report, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let body = match format {
        Format::Json => to_json(report)?,
        Format::Csv => to_csv(report),
    };
    std::fs::write(path, body)?;
    Ok(())
}
