//! Synthetic bearing-fault profiles built from published harmonic amplitude
//! ratios. They are stand-ins for recorded data, not replays of it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnosis::FaultType;
use crate::error::{Error, Result};
use crate::signal::{fault_kinematics_preset, SignalSpec, SinusoidSpec};

pub const PRESET_FS_HZ: f64 = 51_200.0;
pub const PRESET_NOISE_STD: f64 = 0.01;
pub const PRESET_DURATION_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub fault: FaultType,
    pub defect_um: Option<u32>,
    /// Fundamental amplitude in g.
    pub fundamental_amplitude: f64,
    /// 2nd- and 3rd-to-fundamental amplitude ratios.
    pub ratios: [f64; 2],
}

pub const PRESETS: [Preset; 7] = [
    Preset {
        name: "c0a",
        fault: FaultType::None,
        defect_um: None,
        fundamental_amplitude: 0.0,
        ratios: [0.0, 0.0],
    },
    Preset {
        name: "c1a",
        fault: FaultType::InnerRace,
        defect_um: Some(450),
        fundamental_amplitude: 0.28,
        ratios: [0.61, 0.42],
    },
    Preset {
        name: "c2a",
        fault: FaultType::InnerRace,
        defect_um: Some(250),
        fundamental_amplitude: 0.15,
        ratios: [0.52, 0.35],
    },
    Preset {
        name: "c3a",
        fault: FaultType::InnerRace,
        defect_um: Some(150),
        fundamental_amplitude: 0.08,
        ratios: [0.45, 0.28],
    },
    Preset {
        name: "c4a",
        fault: FaultType::RollingElement,
        defect_um: Some(450),
        fundamental_amplitude: 0.22,
        ratios: [0.58, 0.39],
    },
    Preset {
        name: "c5a",
        fault: FaultType::RollingElement,
        defect_um: Some(250),
        fundamental_amplitude: 0.12,
        ratios: [0.48, 0.31],
    },
    Preset {
        name: "c6a",
        fault: FaultType::RollingElement,
        defect_um: Some(150),
        fundamental_amplitude: 0.06,
        ratios: [0.38, 0.22],
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    let name = name.to_ascii_lowercase();
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    pub fn label(&self) -> String {
        match (self.fault, self.defect_um) {
            (FaultType::None, _) => format!("{} synthetic healthy profile (noise only)", self.name),
            (f, Some(um)) => format!("{} synthetic {} profile, {um} um defect", self.name, f.as_str()),
            (f, None) => format!("{} synthetic {} profile", self.name, f.as_str()),
        }
    }

    /// Fundamental frequency of the fault family, if any.
    pub fn fundamental_hz(&self) -> Option<f64> {
        let kin = fault_kinematics_preset();
        match self.fault {
            FaultType::InnerRace => Some(kin.bpfi_hz),
            FaultType::RollingElement => Some(kin.bsf_hz),
            FaultType::Cage => Some(kin.ftf_hz),
            FaultType::None => None,
        }
    }

    /// Harmonics 1–3 at the profile's amplitudes with seeded random phases,
    /// plus white noise from the same seed.
    pub fn signal_spec(&self, seed: u64, duration_s: f64, noise_std: f64) -> Result<SignalSpec> {
        if !(duration_s > 0.0) {
            return Err(Error::invalid("duration_s", "must be > 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let amps = [
            self.fundamental_amplitude,
            self.fundamental_amplitude * self.ratios[0],
            self.fundamental_amplitude * self.ratios[1],
        ];
        let components = match self.fundamental_hz() {
            Some(f0) => amps
                .iter()
                .enumerate()
                .map(|(k, &a)| {
                    SinusoidSpec::new((k + 1) as f64 * f0, a, rng.random::<f64>() * std::f64::consts::TAU)
                })
                .collect(),
            None => Vec::new(),
        };
        let spec = SignalSpec {
            components,
            noise_std,
            fs_hz: PRESET_FS_HZ,
            duration_s,
            rng_seed: seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_signal_spec(&self, seed: u64) -> Result<SignalSpec> {
        self.signal_spec(seed, PRESET_DURATION_S, PRESET_NOISE_STD)
    }
}
