//! Pipeline configuration: a flat `key = value` file, with the same keys
//! accepted as overrides.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnosis::DEFAULT_FREQ_TOL_HZ;
use crate::error::{Error, Result};
use crate::rooting::RootingConfig;
use crate::signal::{fault_kinematics_preset, FaultKinematics, Window};
use crate::subspace::{LanczosConfig, OrderRule, K_MAX_CAP};
use crate::tracking::TrackingConfig;

/// Shortest frame the pipeline accepts.
pub const MIN_FRAME_LEN: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Fstrm,
    Classical,
    Periodogram,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fstrm => "fstrm",
            Method::Classical => "classical",
            Method::Periodogram => "periodogram",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fstrm" => Ok(Method::Fstrm),
            "classical" => Ok(Method::Classical),
            "periodogram" => Ok(Method::Periodogram),
            other => Err(Error::invalid("method", format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub fs_hz: f64,
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
    pub lanczos: LanczosConfig,
    pub order_threshold: f64,
    /// Fixed model order; overrides the energy threshold when set.
    pub order: Option<usize>,
    /// Estimate the subspace from the frame and its time reversal together.
    pub forward_backward: bool,
    pub rooting: RootingConfig,
    pub tracking: TrackingConfig,
    pub kinematics: Option<FaultKinematics>,
    pub freq_tol_hz: f64,
    pub method: Method,
    /// Covariance size for the classical method.
    pub l_cov: usize,
    /// Worker threads for per-frame stages; 0 picks the machine's parallelism.
    /// Left out of report echoes so output does not depend on the machine.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fs_hz: 51_200.0,
            frame_len: 819,
            hop: 819,
            window: Window::Rectangular,
            lanczos: LanczosConfig::default(),
            order_threshold: 0.9,
            order: None,
            forward_backward: true,
            rooting: RootingConfig::default(),
            tracking: TrackingConfig::default(),
            kinematics: Some(fault_kinematics_preset()),
            freq_tol_hz: DEFAULT_FREQ_TOL_HZ,
            method: Method::Fstrm,
            l_cov: 64,
            threads: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "fs_hz",
    "frame_len",
    "hop",
    "window",
    "expected_components",
    "k_max",
    "eps",
    "reorth_threshold",
    "seed",
    "order_threshold",
    "order",
    "forward_backward",
    "radius_tol",
    "rooting_aperture",
    "refine",
    "gate_hz",
    "confirm_hits",
    "max_misses",
    "process_noise",
    "measurement_noise_scale",
    "kinematics",
    "shaft_hz",
    "bpfi_hz",
    "bsf_hz",
    "ftf_hz",
    "freq_tol_hz",
    "method",
    "l_cov",
    "threads",
];

fn num<T: FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse '{value}'")))
}

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

impl PipelineConfig {
    pub fn order_rule(&self) -> OrderRule {
        match self.order {
            Some(p) => OrderRule::Fixed(p),
            None => OrderRule::Energy(self.order_threshold),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let key = canonical(key.trim()).ok_or_else(|| {
            Error::invalid("config", format!("unknown key '{}'", key.trim()))
        })?;
        match key {
            "fs_hz" => self.fs_hz = num(key, value)?,
            "frame_len" => self.frame_len = num(key, value)?,
            "hop" => self.hop = num(key, value)?,
            "window" => self.window = value.parse()?,
            "expected_components" => {
                let p: usize = num(key, value)?;
                self.lanczos.k_max = LanczosConfig::for_components(p).k_max;
            }
            "k_max" => self.lanczos.k_max = num(key, value)?,
            "eps" => self.lanczos.eps = num(key, value)?,
            "reorth_threshold" => self.lanczos.reorth_threshold = num(key, value)?,
            "seed" => self.lanczos.rng_seed = num(key, value)?,
            "order_threshold" => self.order_threshold = num(key, value)?,
            "order" => {
                self.order = match value {
                    "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "forward_backward" => self.forward_backward = num(key, value)?,
            "radius_tol" => self.rooting.radius_tol = num(key, value)?,
            "rooting_aperture" => self.rooting.aperture = num(key, value)?,
            "refine" => self.rooting.refine = num(key, value)?,
            "gate_hz" => self.tracking.gate_hz = num(key, value)?,
            "confirm_hits" => self.tracking.confirm_hits = num(key, value)?,
            "max_misses" => self.tracking.max_misses = num(key, value)?,
            "process_noise" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::invalid(key, "expected three comma-separated values"));
                }
                for (slot, part) in self.tracking.process_noise.iter_mut().zip(parts) {
                    *slot = num(key, part)?;
                }
            }
            "measurement_noise_scale" => self.tracking.measurement_noise_scale = num(key, value)?,
            "kinematics" => {
                self.kinematics = match value {
                    "none" => None,
                    "preset" => Some(fault_kinematics_preset()),
                    other => {
                        return Err(Error::invalid(key, format!("expected 'preset' or 'none', got '{other}'")))
                    }
                }
            }
            "shaft_hz" | "bpfi_hz" | "bsf_hz" | "ftf_hz" => {
                let kin = self.kinematics.get_or_insert_with(fault_kinematics_preset);
                let v = num(key, value)?;
                match key {
                    "shaft_hz" => kin.shaft_hz = v,
                    "bpfi_hz" => kin.bpfi_hz = v,
                    "bsf_hz" => kin.bsf_hz = v,
                    _ => kin.ftf_hz = v,
                }
            }
            "freq_tol_hz" => self.freq_tol_hz = num(key, value)?,
            "method" => self.method = value.parse()?,
            "l_cov" => self.l_cov = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            _ => unreachable!("key list and match arms disagree"),
        }
        Ok(())
    }

    /// Parses a config file body. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            cfg.set(k, v).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the config back into the file format.
    pub fn to_text(&self) -> String {
        let t = &self.tracking;
        let mut lines = vec![
            format!("fs_hz = {}", self.fs_hz),
            format!("frame_len = {}", self.frame_len),
            format!("hop = {}", self.hop),
            format!("window = {}", match self.window {
                Window::Rectangular => "rectangular",
                Window::Hann => "hann",
            }),
            format!("k_max = {}", self.lanczos.k_max),
            format!("eps = {:e}", self.lanczos.eps),
            format!("reorth_threshold = {:e}", self.lanczos.reorth_threshold),
            format!("seed = {}", self.lanczos.rng_seed),
            format!("order_threshold = {}", self.order_threshold),
            format!("order = {}", self.order.map_or("auto".to_string(), |p| p.to_string())),
            format!("forward_backward = {}", self.forward_backward),
            format!("radius_tol = {}", self.rooting.radius_tol),
            format!("rooting_aperture = {}", self.rooting.aperture),
            format!("refine = {}", self.rooting.refine),
            format!("gate_hz = {}", t.gate_hz),
            format!("confirm_hits = {}", t.confirm_hits),
            format!("max_misses = {}", t.max_misses),
            format!(
                "process_noise = {}, {}, {}",
                t.process_noise[0], t.process_noise[1], t.process_noise[2]
            ),
            format!("measurement_noise_scale = {}", t.measurement_noise_scale),
        ];
        match &self.kinematics {
            None => lines.push("kinematics = none".into()),
            Some(k) => {
                lines.push(format!("shaft_hz = {}", k.shaft_hz));
                lines.push(format!("bpfi_hz = {}", k.bpfi_hz));
                lines.push(format!("bsf_hz = {}", k.bsf_hz));
                lines.push(format!("ftf_hz = {}", k.ftf_hz));
            }
        }
        lines.push(format!("freq_tol_hz = {}", self.freq_tol_hz));
        lines.push(format!("method = {}", self.method.as_str()));
        lines.push(format!("l_cov = {}", self.l_cov));
        lines.push(format!("threads = {}", self.threads));
        lines.join("\n") + "\n"
    }

    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz > 0.0 && self.fs_hz.is_finite()) {
            return Err(Error::invalid("fs_hz", format!("{} must be finite and > 0", self.fs_hz)));
        }
        if self.frame_len < MIN_FRAME_LEN {
            return Err(Error::invalid(
                "frame_len",
                format!("{} is below the minimum of {MIN_FRAME_LEN}", self.frame_len),
            ));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::invalid("hop", format!("{} must lie in [1, frame_len]", self.hop)));
        }
        self.lanczos.validate()?;
        if self.lanczos.k_max > K_MAX_CAP {
            return Err(Error::invalid("k_max", format!("{} exceeds the cap of {K_MAX_CAP}", self.lanczos.k_max)));
        }
        if !(self.order_threshold > 0.0 && self.order_threshold <= 1.0) {
            return Err(Error::invalid("order_threshold", format!("{} must lie in (0, 1]", self.order_threshold)));
        }
        if self.order == Some(0) {
            return Err(Error::invalid("order", "must be >= 1 or 'auto'"));
        }
        self.rooting.validate()?;
        self.tracking.validate()?;
        if let Some(k) = &self.kinematics {
            k.validate()?;
        }
        if !(self.freq_tol_hz > 0.0 && self.freq_tol_hz.is_finite()) {
            return Err(Error::invalid("freq_tol_hz", "must be finite and > 0"));
        }
        if self.method == Method::Classical && (self.l_cov < 2 || self.l_cov > self.frame_len / 2) {
            return Err(Error::invalid("l_cov", format!("{} must lie in [2, frame_len/2]", self.l_cov)));
        }
        Ok(())
    }
}
