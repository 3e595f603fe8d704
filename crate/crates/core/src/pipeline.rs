//! Frame loop: window → Hankel → Lanczos → order → roots → amplitudes,
//! then tracking and fault matching over the whole run.

use std::time::Instant;

use crate::config::{Method, PipelineConfig};
use crate::diagnosis::{match_fault, severity_indicator};
use crate::error::{Error, Result};
use crate::hankel::{default_rows, ForwardBackward, HankelOperator, LinearOperator};
use crate::oracle::{classical_root_music, peak_bins, periodogram};
use crate::presets::Preset;
use crate::report::{
    summarize, timing_summary, EstimateRecord, FrameReport, InputInfo, Report, SignatureRecord,
    StageTimings, TrackReport,
};
use crate::rooting::{estimate_amplitudes, estimate_frequencies, FrequencyEstimate};
use crate::signal::{frames, generate, Frame, Window};
use crate::subspace::{decompose, estimate_noise};
use crate::tracking::Tracker;

/// Cap on reported SNR so reports stay finite for noise-free input.
const SNR_CAP: f64 = 1e12;

/// Upper bound on peaks reported by the periodogram baseline.
const MAX_PERIODOGRAM_PEAKS: usize = 10;

/// Per-frame result before tracking.
#[derive(Debug, Clone, Default)]
pub struct FrameAnalysis {
    pub estimates: Vec<FrequencyEstimate>,
    pub selected_order: usize,
    pub lanczos_iterations: usize,
    pub snr_linear: f64,
    pub flags: Vec<String>,
    pub timing: StageTimings,
}

fn micros(since: Instant) -> u64 {
    since.elapsed().as_micros() as u64
}

/// Whether an error only means "nothing to find in this frame".
fn is_empty_frame(e: &Error) -> bool {
    matches!(e, Error::NoSignalEnergy | Error::EmptySubspace | Error::ZeroPolynomial)
}

fn build_estimates(
    raw: &[f64],
    freqs: &[(f64, f64)],
    noise_var: f64,
    frame_id: usize,
    fs_hz: f64,
    flags: &mut Vec<String>,
) -> Result<Vec<FrequencyEstimate>> {
    let f: Vec<f64> = freqs.iter().map(|x| x.0).collect();
    let fit = estimate_amplitudes(raw, fs_hz, &f)?;
    if fit.regularized {
        flags.push("ridge_amplitude_fit".into());
    }
    Ok(freqs
        .iter()
        .zip(fit.components)
        .map(|(&(frequency_hz, root_radius), (amplitude, phase_rad))| {
            let snr = if noise_var > 0.0 {
                (amplitude * amplitude / 2.0 / noise_var).min(SNR_CAP)
            } else {
                SNR_CAP
            };
            FrequencyEstimate {
                frequency_hz,
                amplitude,
                phase_rad,
                root_radius,
                frame_id,
                snr_linear: snr,
            }
        })
        .collect())
}

/// Runs the configured method on one frame. `raw` feeds the amplitude fit;
/// `windowed` feeds the estimator.
pub fn analyze_frame(raw: &Frame, windowed: &[f64], cfg: &PipelineConfig) -> Result<FrameAnalysis> {
    match cfg.method {
        Method::Fstrm => analyze_fstrm(raw, windowed, cfg),
        Method::Classical => analyze_classical(raw, windowed, cfg),
        Method::Periodogram => analyze_periodogram(raw, windowed, cfg),
    }
}

fn analyze_fstrm(raw: &Frame, windowed: &[f64], cfg: &PipelineConfig) -> Result<FrameAnalysis> {
    let mut out = FrameAnalysis::default();
    let t = Instant::now();
    let op = HankelOperator::new(windowed.to_vec(), default_rows(windowed.len()))?;
    out.timing.hankel_us = micros(t);

    let t = Instant::now();
    let decomposed = if cfg.forward_backward {
        decompose(&ForwardBackward::new(&op), &cfg.lanczos, cfg.order_rule())
    } else {
        decompose(&op, &cfg.lanczos, cfg.order_rule())
    };
    let dec = match decomposed {
        Ok(d) => d,
        Err(e) if is_empty_frame(&e) => {
            out.flags.push(e.to_string().replace(' ', "_"));
            out.timing.lanczos_us = micros(t);
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.timing.lanczos_us = micros(t);
    out.selected_order = dec.p;
    out.lanczos_iterations = dec.k_used;
    if dec.breakdown {
        out.flags.push("lanczos_breakdown".into());
    }

    let t = Instant::now();
    let basis = dec.left_signal_basis();
    if basis.no_noise_dimensions {
        out.flags.push("no_noise_dimensions".into());
    }
    let noise = if cfg.forward_backward {
        let fb = ForwardBackward::new(&op);
        estimate_noise(&dec.singular_values, dec.p, fb.frobenius_sq(), fb.rows(), fb.cols())
    } else {
        estimate_noise(&dec.singular_values, dec.p, op.frobenius_sq(), op.rows(), op.cols())
    };
    out.snr_linear = noise.snr_linear.min(SNR_CAP);
    let freqs = match estimate_frequencies(&basis.basis, dec.p, raw.fs_hz, &cfg.rooting) {
        Ok(f) => f,
        Err(e) if is_empty_frame(&e) => Vec::new(),
        Err(e) => return Err(e),
    };
    out.estimates = build_estimates(&raw.samples, &freqs, noise.noise_var, raw.frame_id, raw.fs_hz, &mut out.flags)?;
    out.timing.rooting_us = micros(t);
    Ok(out)
}

fn analyze_classical(raw: &Frame, windowed: &[f64], cfg: &PipelineConfig) -> Result<FrameAnalysis> {
    let mut out = FrameAnalysis::default();
    let t = Instant::now();
    let res = match classical_root_music(windowed, raw.fs_hz, cfg.order_rule(), cfg.l_cov, cfg.rooting.radius_tol) {
        Ok(r) => r,
        Err(e) if is_empty_frame(&e) => {
            out.flags.push(e.to_string().replace(' ', "_"));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.timing.lanczos_us = micros(t);
    let t = Instant::now();
    let amps: Vec<f64> = res.singular_or_eigen_values.iter().map(|v| v.sqrt()).collect();
    let p = cfg.order_rule().select(&amps)?;
    out.selected_order = p;
    let noise = &res.singular_or_eigen_values[p..];
    let noise_var = noise.iter().sum::<f64>() / noise.len().max(1) as f64;
    let signal: f64 = res.singular_or_eigen_values[..p].iter().map(|v| v - noise_var).sum();
    out.snr_linear = if noise_var > 0.0 { (signal / noise_var).min(SNR_CAP) } else { SNR_CAP };
    let freqs: Vec<(f64, f64)> = res.frequencies.iter().map(|&f| (f, 1.0)).collect();
    out.estimates = build_estimates(&raw.samples, &freqs, noise_var, raw.frame_id, raw.fs_hz, &mut out.flags)?;
    out.timing.rooting_us = micros(t);
    Ok(out)
}

fn analyze_periodogram(raw: &Frame, windowed: &[f64], cfg: &PipelineConfig) -> Result<FrameAnalysis> {
    let mut out = FrameAnalysis::default();
    let t = Instant::now();
    let (grid, power) = periodogram(windowed, raw.fs_hz, Window::Rectangular);
    let mut sorted = power.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let w2: f64 = cfg.window.weights(windowed.len()).iter().map(|w| w * w).sum();
    // |X|² of white noise is exponential with mean σ²Σw²; its median is ln2 of that.
    let noise_var = median / std::f64::consts::LN_2 / w2.max(f64::MIN_POSITIVE);
    let freqs: Vec<(f64, f64)> = peak_bins(&power)
        .into_iter()
        .filter(|&k| power[k] >= 10.0 * median && grid[k] > 0.0 && grid[k] < raw.fs_hz / 2.0)
        .take(MAX_PERIODOGRAM_PEAKS)
        .map(|k| (grid[k], 1.0))
        .collect();
    out.timing.lanczos_us = micros(t);
    let t = Instant::now();
    out.selected_order = 2 * freqs.len();
    out.estimates = build_estimates(&raw.samples, &freqs, noise_var, raw.frame_id, raw.fs_hz, &mut out.flags)?;
    if noise_var > 0.0 {
        let total: f64 = out.estimates.iter().map(|e| e.amplitude * e.amplitude / 2.0).sum();
        out.snr_linear = (total / noise_var).min(SNR_CAP);
    }
    out.timing.rooting_us = micros(t);
    Ok(out)
}

/// Worker count: the machine's parallelism, capped by the config and by
/// `FSTRM_THREADS`.
pub fn worker_count(cfg_threads: usize) -> usize {
    let mut n = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cfg_threads > 0 {
        n = n.min(cfg_threads);
    }
    if let Some(cap) = std::env::var("FSTRM_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if cap > 0 {
            n = n.min(cap);
        }
    }
    n.max(1)
}

/// Per-frame stages in parallel, results in frame order.
fn analyze_all(frames: &[Frame], cfg: &PipelineConfig) -> Vec<Result<FrameAnalysis>> {
    let weights = cfg.window.weights(cfg.frame_len);
    let work = |f: &Frame| {
        let windowed: Vec<f64> = f.samples.iter().zip(&weights).map(|(x, w)| x * w).collect();
        analyze_frame(f, &windowed, cfg)
    };
    let workers = worker_count(cfg.threads).min(frames.len().max(1));
    if workers <= 1 {
        return frames.iter().map(work).collect();
    }
    let chunk = frames.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = frames
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(work).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("frame worker panicked"))
            .collect()
    })
}

/// Full run over `samples`. With `timing` off the report is a pure
/// function of the input and config.
pub fn run_pipeline(samples: &[f64], input: InputInfo, cfg: &PipelineConfig, timing: bool) -> Result<Report> {
    cfg.validate()?;
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples", "input contains non-finite values"));
    }
    let frames = frames(samples, cfg.fs_hz, cfg.frame_len, cfg.hop, Window::Rectangular)?;
    let analyses = analyze_all(&frames, cfg);

    let mut tracker = Tracker::new(cfg.tracking)?;
    let mut reports = Vec::with_capacity(frames.len());
    for (frame, analysis) in frames.iter().zip(analyses) {
        let mut a = analysis?;
        let t = Instant::now();
        let snap = tracker.step(frame.frame_id, &a.estimates)?;
        a.timing.tracking_us = micros(t);
        let mut track_ids = vec![None; a.estimates.len()];
        for (id, idx) in snap.matches {
            track_ids[idx] = Some(id);
        }
        reports.push(FrameReport {
            frame_id: frame.frame_id,
            timestamp_s: frame.start_time_s(),
            estimates: a
                .estimates
                .into_iter()
                .zip(track_ids)
                .map(|(estimate, track_id)| EstimateRecord { estimate, track_id })
                .collect(),
            selected_order: a.selected_order,
            lanczos_iterations: a.lanczos_iterations,
            snr_linear: a.snr_linear,
            flags: a.flags,
            timing_us: timing.then_some(a.timing),
        });
    }

    let all = tracker.all_tracks();
    let signatures = match &cfg.kinematics {
        Some(kin) => match_fault(&all, kin, cfg.freq_tol_hz)?
            .into_iter()
            .map(|signature| SignatureRecord {
                severity: severity_indicator(&signature),
                signature,
            })
            .collect(),
        None => Vec::new(),
    };
    let tracks: Vec<TrackReport> = all
        .iter()
        .map(|t| TrackReport {
            id: t.track_id,
            status: t.status,
            confirmed: t.was_confirmed(),
            mean_f_hz: t.mean_frequency(),
            mean_amplitude: t.mean_amplitude(),
            points: t.points.clone(),
        })
        .collect();
    let summary = summarize(&reports, &tracks);
    let timing_summary = if timing { timing_summary(&reports) } else { None };
    Ok(Report {
        method: cfg.method,
        input,
        config_echo: cfg.clone(),
        frames: reports,
        tracks,
        signatures,
        summary,
        timing_summary,
    })
}

/// Generates a preset profile and runs it.
pub fn run_preset(preset: &Preset, seed: u64, cfg: &PipelineConfig, timing: bool) -> Result<Report> {
    let spec = preset.default_signal_spec(seed)?;
    let samples = generate(&spec)?;
    let mut cfg = cfg.clone();
    cfg.fs_hz = spec.fs_hz;
    let input = InputInfo {
        source: format!("preset:{}", preset.name),
        synthetic: true,
        label: Some(preset.label()),
        samples: samples.len(),
        fs_hz: spec.fs_hz,
    };
    run_pipeline(&samples, input, &cfg, timing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;
    use crate::signal::{SignalSpec, SinusoidSpec};

    fn synthetic(samples: &[f64]) -> InputInfo {
        InputInfo {
            source: "test".into(),
            synthetic: true,
            label: None,
            samples: samples.len(),
            fs_hz: 51_200.0,
        }
    }

    #[test]
    fn single_tone_run() {
        let spec = SignalSpec {
            components: vec![SinusoidSpec::new(1197.0, 0.5, 0.3)],
            noise_std: 0.05,
            fs_hz: 51_200.0,
            duration_s: 0.2,
            rng_seed: 1,
        };
        let x = generate(&spec).unwrap();
        let r = run_pipeline(&x, synthetic(&x), &PipelineConfig::default(), true).unwrap();
        assert_eq!(r.frames.len(), 12);
        assert!(r.frames.iter().all(|f| f.estimates.iter().any(|e| (e.estimate.frequency_hz - 1197.0).abs() < 1.0)));
        assert!(r.tracks.iter().any(|t| t.confirmed && (t.mean_f_hz - 1197.0).abs() < 0.5));
        assert!(r.timing_summary.is_some());
    }

    #[test]
    fn inner_race_preset_is_diagnosed() {
        let r = run_preset(preset("c1a").unwrap(), 7, &PipelineConfig::default(), false).unwrap();
        assert_eq!(r.signatures.len(), 1, "{:?}", r.signatures);
        let sev = r.signatures[0].severity.unwrap();
        assert!((sev.ratio2 - 0.61).abs() <= 0.05, "{sev:?}");
    }

    #[test]
    fn deterministic_without_timing() {
        let p = preset("c3a").unwrap();
        let mut one = PipelineConfig::default();
        one.threads = 1;
        let a = run_preset(p, 3, &one, false).unwrap();
        let b = run_preset(p, 3, &PipelineConfig::default(), false).unwrap();
        assert_eq!(crate::report::to_json(&a).unwrap(), crate::report::to_json(&b).unwrap());
    }

    #[test]
    fn alternative_methods_run() {
        let spec = preset("c1a").unwrap().signal_spec(1, 0.1, 0.01).unwrap();
        let x = generate(&spec).unwrap();
        for m in [Method::Classical, Method::Periodogram] {
            let cfg = PipelineConfig {
                method: m,
                ..PipelineConfig::default()
            };
            let r = run_pipeline(&x, synthetic(&x), &cfg, false).unwrap();
            assert_eq!(r.method, m);
            assert!(r.frames.iter().all(|f| f
                .estimates
                .iter()
                .any(|e| (e.estimate.frequency_hz - 1197.0).abs() < 40.0)));
        }
    }

    #[test]
    fn zero_input_yields_empty_frames() {
        let x = vec![0.0; 2000];
        let r = run_pipeline(&x, synthetic(&x), &PipelineConfig::default(), false).unwrap();
        assert_eq!(r.frames.len(), 2);
        assert!(r.frames.iter().all(|f| f.estimates.is_empty() && !f.flags.is_empty()));
        assert!(r.signatures.is_empty());
    }

    #[test]
    fn short_input_has_no_frames() {
        let x = vec![0.1; 100];
        let r = run_pipeline(&x, synthetic(&x), &PipelineConfig::default(), false).unwrap();
        assert!(r.frames.is_empty());
    }
}
