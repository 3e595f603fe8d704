//! Synthetic bearing signals, framing and CSV sample I/O.
//!
//! Signals are real-valued: each physical tone `A cos(2π f n / fs + φ)`
//! contributes a pair of complex exponentials, which is what the subspace
//! stages count when they talk about model order.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of distinct tones in a synthetic signal.
pub const MAX_COMPONENTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidSpec {
    pub frequency_hz: f64,
    /// Peak amplitude in g.
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl SinusoidSpec {
    pub fn new(frequency_hz: f64, amplitude: f64, phase_rad: f64) -> Self {
        Self {
            frequency_hz,
            amplitude,
            phase_rad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub components: Vec<SinusoidSpec>,
    pub noise_std: f64,
    pub fs_hz: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
}

impl SignalSpec {
    pub fn len(&self) -> usize {
        (self.duration_s * self.fs_hz).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(Error::invalid("fs_hz", format!("{} must be finite and > 0", self.fs_hz)));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid(
                "duration_s",
                format!("{} must be finite and > 0", self.duration_s),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid(
                "noise_std",
                format!("{} must be finite and >= 0", self.noise_std),
            ));
        }
        if self.components.len() >= MAX_COMPONENTS {
            return Err(Error::invalid(
                "components",
                format!("{} tones, at most {} allowed", self.components.len(), MAX_COMPONENTS - 1),
            ));
        }
        let nyquist = self.fs_hz / 2.0;
        for c in &self.components {
            if !(c.frequency_hz.is_finite() && c.amplitude.is_finite() && c.phase_rad.is_finite()) {
                return Err(Error::invalid("components", "non-finite tone parameter"));
            }
            if c.frequency_hz <= 0.0 {
                return Err(Error::invalid(
                    "components",
                    format!("frequency {} Hz must be > 0", c.frequency_hz),
                ));
            }
            if c.frequency_hz >= nyquist {
                return Err(Error::Aliasing {
                    frequency_hz: c.frequency_hz,
                    nyquist_hz: nyquist,
                });
            }
            if c.amplitude < 0.0 {
                return Err(Error::invalid(
                    "components",
                    format!("amplitude {} must be >= 0", c.amplitude),
                ));
            }
            if !(0.0..TAU).contains(&c.phase_rad) {
                return Err(Error::invalid(
                    "components",
                    format!("phase {} must lie in [0, 2π)", c.phase_rad),
                ));
            }
        }
        for (i, a) in self.components.iter().enumerate() {
            if self.components[i + 1..]
                .iter()
                .any(|b| b.frequency_hz == a.frequency_hz)
            {
                return Err(Error::invalid(
                    "components",
                    format!("duplicate frequency {} Hz", a.frequency_hz),
                ));
            }
        }
        Ok(())
    }
}

/// One analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub fs_hz: f64,
    pub start_index: usize,
    pub frame_id: usize,
}

impl Frame {
    pub fn new(samples: Vec<f64>, fs_hz: f64) -> Self {
        Self {
            samples,
            fs_hz,
            start_index: 0,
            frame_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_index as f64 / self.fs_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(Error::invalid("fs_hz", "must be finite and > 0"));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid("samples", format!("sample {i} is not finite")));
        }
        Ok(())
    }
}

/// Characteristic bearing frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultKinematics {
    pub shaft_hz: f64,
    pub bpfi_hz: f64,
    pub bsf_hz: f64,
    pub ftf_hz: f64,
}

impl FaultKinematics {
    pub fn validate(&self) -> Result<()> {
        let all = [self.shaft_hz, self.bpfi_hz, self.bsf_hz, self.ftf_hz];
        if all.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("kinematics", "all frequencies must be finite and > 0"));
        }
        if !(self.ftf_hz < self.shaft_hz && self.shaft_hz < self.bpfi_hz) {
            return Err(Error::invalid("kinematics", "expected ftf < shaft < bpfi"));
        }
        Ok(())
    }
}

/// Kinematic frequencies of the high-speed test rig: 200 Hz shaft (12 000 rpm).
pub fn fault_kinematics_preset() -> FaultKinematics {
    FaultKinematics {
        shaft_hz: 200.0,
        bpfi_hz: 1197.0,
        bsf_hz: 972.8,
        ftf_hz: 80.25,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    /// Symmetric window weights of length `n`.
    pub fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n <= 1 => vec![1.0; n],
            Window::Hann => {
                let denom = (n - 1) as f64;
                (0..n)
                    .map(|i| 0.5 - 0.5 * (TAU * i as f64 / denom).cos())
                    .collect()
            }
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::invalid("window", format!("unknown window '{other}'"))),
        }
    }
}

/// Samples of the sum of tones plus seeded white Gaussian noise.
pub fn generate(spec: &SignalSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.len();
    let mut out = vec![0.0; n];
    for c in &spec.components {
        let w = TAU * c.frequency_hz / spec.fs_hz;
        for (i, x) in out.iter_mut().enumerate() {
            *x += c.amplitude * (w * i as f64 + c.phase_rad).cos();
        }
    }
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::invalid("noise_std", e.to_string()))?;
        for x in out.iter_mut() {
            *x += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Splits `samples` into windowed frames of `frame_len` every `hop` samples.
/// A trailing partial frame is dropped.
pub fn frames(
    samples: &[f64],
    fs_hz: f64,
    frame_len: usize,
    hop: usize,
    window: Window,
) -> Result<Vec<Frame>> {
    if hop == 0 {
        return Err(Error::invalid("hop", "must be >= 1"));
    }
    if frame_len == 0 {
        return Err(Error::invalid("frame_len", "must be >= 1"));
    }
    if frame_len > samples.len() {
        return Ok(Vec::new());
    }
    let weights = window.weights(frame_len);
    let count = (samples.len() - frame_len) / hop + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * hop;
            let data = samples[start..start + frame_len]
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .collect();
            Frame {
                samples: data,
                fs_hz,
                start_index: start,
                frame_id: k,
            }
        })
        .collect())
}

/// Samples read from a CSV file, with the sampling rate when the file
/// carries a `# fs=<value>` header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSamples {
    pub samples: Vec<f64>,
    pub fs_hz: Option<f64>,
}

/// Reads one column (zero-based) of a comma-separated sample file.
pub fn load_csv(path: impl AsRef<Path>, column: usize) -> Result<CsvSamples> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, column)
}

pub fn parse_csv(text: &str, column: usize) -> Result<CsvSamples> {
    let mut samples = Vec::new();
    let mut fs_hz = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if line_no == 1 {
                fs_hz = Some(parse_fs_header(comment, line_no)?);
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                reason: "comment lines are only allowed as the first-line fs header".into(),
            });
        }
        let field = line.split(',').nth(column).ok_or_else(|| Error::Parse {
            line: line_no,
            reason: format!("row has no column {column}"),
        })?;
        let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            reason: format!("'{}' is not a number", field.trim()),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                reason: "non-finite sample".into(),
            });
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(CsvSamples { samples, fs_hz })
}

fn parse_fs_header(comment: &str, line: usize) -> Result<f64> {
    let body = comment.trim();
    let value = body
        .strip_prefix("fs")
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| Error::Parse {
            line,
            reason: format!("expected '# fs=<value>', found '#{comment}'"),
        })?;
    let fs: f64 = value.trim().parse().map_err(|_| Error::Parse {
        line,
        reason: format!("bad sampling rate '{}'", value.trim()),
    })?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Parse {
            line,
            reason: "sampling rate must be > 0".into(),
        });
    }
    Ok(fs)
}

/// Formats samples with 17 significant digits so they read back bit-exactly.
pub fn format_csv(samples: &[f64], fs_hz: Option<f64>) -> String {
    let mut out = String::with_capacity(samples.len() * 25 + 16);
    if let Some(fs) = fs_hz {
        let _ = writeln!(out, "# fs={fs}");
    }
    for x in samples {
        let _ = writeln!(out, "{x:.16e}");
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, samples: &[f64], fs_hz: Option<f64>) -> Result<()> {
    fs::write(path, format_csv(samples, fs_hz))?;
    Ok(())
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let w = wrap_phase(angle + PI) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}
