//! Maps confirmed tracks onto bearing fault signatures by harmonic family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FaultKinematics;
use crate::tracking::TrackState;

/// Harmonic orders searched per fault frequency.
pub const MAX_ORDER: u32 = 5;

pub const DEFAULT_FREQ_TOL_HZ: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultType {
    InnerRace,
    RollingElement,
    Cage,
    None,
}

impl FaultType {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultType::InnerRace => "inner_race",
            FaultType::RollingElement => "rolling_element",
            FaultType::Cage => "cage",
            FaultType::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub track_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicRatio {
    pub order: u32,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSignature {
    pub fault_type: FaultType,
    pub fundamental_hz: f64,
    /// Ascending orders, starting at 1.
    pub harmonics: Vec<Harmonic>,
    /// Amplitude of each order ≥ 2 relative to the fundamental.
    pub harmonic_ratios: Vec<HarmonicRatio>,
    /// Matched orders out of [`MAX_ORDER`].
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Severity {
    /// Second-to-fundamental amplitude ratio.
    pub ratio2: f64,
    pub fundamental_amplitude: f64,
}

/// One signature per fault frequency whose fundamental is carried by a
/// confirmed track. Frequencies and amplitudes are track means.
pub fn match_fault(
    tracks: &[TrackState],
    kin: &FaultKinematics,
    freq_tol_hz: f64,
) -> Result<Vec<FaultSignature>> {
    kin.validate()?;
    if !(freq_tol_hz > 0.0 && freq_tol_hz.is_finite()) {
        return Err(Error::invalid("freq_tol_hz", format!("{freq_tol_hz} must be finite and > 0")));
    }
    let confirmed: Vec<(f64, f64, u64)> = tracks
        .iter()
        .filter(|t| t.was_confirmed())
        .map(|t| (t.mean_frequency(), t.mean_amplitude(), t.track_id))
        .collect();

    let families = [
        (FaultType::InnerRace, kin.bpfi_hz),
        (FaultType::RollingElement, kin.bsf_hz),
        (FaultType::Cage, kin.ftf_hz),
    ];
    let mut out = Vec::new();
    for (fault_type, f0) in families {
        let harmonics: Vec<Harmonic> = (1..=MAX_ORDER)
            .filter_map(|k| {
                let target = k as f64 * f0;
                confirmed
                    .iter()
                    .filter(|(f, _, _)| (f - target).abs() <= freq_tol_hz)
                    .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
                    .map(|&(f, a, id)| Harmonic {
                        order: k,
                        frequency_hz: f,
                        amplitude: a,
                        track_id: id,
                    })
            })
            .collect();
        if harmonics.first().map(|h| h.order) != Some(1) {
            continue;
        }
        let mut sig = FaultSignature {
            fault_type,
            fundamental_hz: harmonics[0].frequency_hz,
            confidence: harmonics.len() as f64 / MAX_ORDER as f64,
            harmonics,
            harmonic_ratios: Vec::new(),
        };
        sig.harmonic_ratios = harmonic_ratios(&sig).unwrap_or_default();
        out.push(sig);
    }
    Ok(out)
}

pub fn harmonic_ratios(sig: &FaultSignature) -> Result<Vec<HarmonicRatio>> {
    let fundamental = sig
        .harmonics
        .iter()
        .find(|h| h.order == 1)
        .map(|h| h.amplitude)
        .unwrap_or(0.0);
    if !(fundamental > 0.0) {
        return Err(Error::ZeroFundamental);
    }
    Ok(sig
        .harmonics
        .iter()
        .filter(|h| h.order > 1)
        .map(|h| HarmonicRatio {
            order: h.order,
            ratio: h.amplitude / fundamental,
        })
        .collect())
}

/// The second-harmonic ratio, when there is one.
pub fn severity_indicator(sig: &FaultSignature) -> Option<Severity> {
    if sig.fault_type == FaultType::None {
        return None;
    }
    let ratio2 = sig.harmonic_ratios.iter().find(|r| r.order == 2)?.ratio;
    let fundamental_amplitude = sig.harmonics.iter().find(|h| h.order == 1)?.amplitude;
    Some(Severity {
        ratio2,
        fundamental_amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::fault_kinematics_preset;
    use crate::tracking::TrackPoint;
    use nalgebra::{Matrix3, Vector3};

    fn confirmed(id: u64, f: f64, a: f64) -> TrackState {
        let mut t = TrackState::new(id, Vector3::new(f, a, 0.0), Matrix3::identity());
        t.confirmed_at = Some(2);
        t.points.push(TrackPoint {
            frame_id: 0,
            f_hz: f,
            amplitude: a,
            phase: 0.0,
        });
        t
    }

    #[test]
    fn inner_race_family() {
        let tracks = [
            confirmed(0, 1197.2, 0.28),
            confirmed(1, 2394.1, 0.1708),
            confirmed(2, 3591.5, 0.1176),
        ];
        let sigs = match_fault(&tracks, &fault_kinematics_preset(), DEFAULT_FREQ_TOL_HZ).unwrap();
        assert_eq!(sigs.len(), 1);
        let s = &sigs[0];
        assert_eq!(s.fault_type, FaultType::InnerRace);
        assert_eq!(s.harmonics.iter().map(|h| h.order).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!((s.confidence - 0.6).abs() < 1e-12);
        let sev = severity_indicator(s).unwrap();
        assert!((sev.ratio2 - 0.61).abs() < 1e-12);
        assert_eq!(sev.fundamental_amplitude, 0.28);
    }

    #[test]
    fn rolling_element_family() {
        let tracks = [confirmed(0, 972.8, 0.2), confirmed(1, 1945.6, 0.1)];
        let sigs = match_fault(&tracks, &fault_kinematics_preset(), DEFAULT_FREQ_TOL_HZ).unwrap();
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].fault_type, FaultType::RollingElement);
        assert_eq!(sigs[0].harmonics.len(), 2);
    }

    #[test]
    fn nothing_to_match() {
        let sigs = match_fault(&[], &fault_kinematics_preset(), DEFAULT_FREQ_TOL_HZ).unwrap();
        assert!(sigs.is_empty());
        // Harmonic without its fundamental is not a signature.
        let sigs = match_fault(&[confirmed(0, 2394.0, 0.1)], &fault_kinematics_preset(), 2.5).unwrap();
        assert!(sigs.is_empty());
    }

    #[test]
    fn tentative_tracks_are_ignored() {
        let mut t = confirmed(0, 1197.0, 0.3);
        t.confirmed_at = None;
        let sigs = match_fault(&[t], &fault_kinematics_preset(), 2.5).unwrap();
        assert!(sigs.is_empty());
    }

    #[test]
    fn ratio_edge_cases() {
        let sigs = match_fault(&[confirmed(0, 1197.0, 0.3)], &fault_kinematics_preset(), 2.5).unwrap();
        assert!(harmonic_ratios(&sigs[0]).unwrap().is_empty());
        assert!(severity_indicator(&sigs[0]).is_none());
        let mut zero = sigs[0].clone();
        zero.harmonics[0].amplitude = 0.0;
        assert!(matches!(harmonic_ratios(&zero), Err(Error::ZeroFundamental)));
        let none = FaultSignature {
            fault_type: FaultType::None,
            fundamental_hz: 0.0,
            harmonics: vec![],
            harmonic_ratios: vec![],
            confidence: 0.0,
        };
        assert!(severity_indicator(&none).is_none());
    }
}
