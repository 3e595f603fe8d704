//! Frame-to-frame tracking of frequency estimates: a random-walk Kalman
//! filter per track over `[f, A, φ]`, with gated Hungarian association.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rooting::FrequencyEstimate;
use crate::signal::{wrap_phase, wrap_pi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    /// Diagonal of Q in Hz², amplitude², rad².
    pub process_noise: [f64; 3],
    pub gate_hz: f64,
    pub confirm_hits: u32,
    pub max_misses: u32,
    pub measurement_noise_scale: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            process_noise: [1.0, 1e-4, 1e-2],
            gate_hz: 5.0,
            confirm_hits: 3,
            max_misses: 5,
            measurement_noise_scale: 1.0,
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.process_noise.iter().any(|q| !(*q > 0.0 && q.is_finite())) {
            return Err(Error::invalid("process_noise", "entries must be finite and > 0"));
        }
        if !(self.gate_hz > 0.0 && self.gate_hz.is_finite()) {
            return Err(Error::invalid("gate_hz", format!("{} must be finite and > 0", self.gate_hz)));
        }
        if self.confirm_hits == 0 {
            return Err(Error::invalid("confirm_hits", "must be > 0"));
        }
        if self.max_misses == 0 {
            return Err(Error::invalid("max_misses", "must be > 0"));
        }
        if !(self.measurement_noise_scale > 0.0 && self.measurement_noise_scale.is_finite()) {
            return Err(Error::invalid("measurement_noise_scale", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn q(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.process_noise))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame_id: usize,
    pub f_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub track_id: u64,
    /// `[f_hz, amplitude, phase_rad]`.
    pub x: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    /// Consecutive hits.
    pub hits: u32,
    /// Consecutive misses.
    pub misses: u32,
    pub status: TrackStatus,
    /// Frame at which the track was confirmed; survives death.
    pub confirmed_at: Option<usize>,
    /// Filtered state after each measurement update.
    pub points: Vec<TrackPoint>,
}

impl TrackState {
    pub fn new(track_id: u64, x: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        Self {
            track_id,
            x,
            covariance,
            hits: 0,
            misses: 0,
            status: TrackStatus::Tentative,
            confirmed_at: None,
            points: Vec::new(),
        }
    }

    pub fn frequency(&self) -> f64 {
        self.x[0]
    }

    pub fn was_confirmed(&self) -> bool {
        self.confirmed_at.is_some()
    }

    /// Mean filtered frequency over the track's updates.
    pub fn mean_frequency(&self) -> f64 {
        if self.points.is_empty() {
            return self.x[0];
        }
        self.points.iter().map(|p| p.f_hz).sum::<f64>() / self.points.len() as f64
    }

    pub fn mean_amplitude(&self) -> f64 {
        if self.points.is_empty() {
            return self.x[1];
        }
        self.points.iter().map(|p| p.amplitude).sum::<f64>() / self.points.len() as f64
    }
}

/// Identity transition; only the covariance grows.
pub fn predict(track: &TrackState, cfg: &TrackingConfig) -> TrackState {
    let mut out = track.clone();
    out.covariance += cfg.q();
    out.x[2] = wrap_phase(out.x[2]);
    out
}

/// Full-state Kalman update (`H = I`) in Joseph form.
pub fn update(track: &TrackState, meas: &FrequencyEstimate, r: &Matrix3<f64>) -> Result<TrackState> {
    check_psd(r)?;
    let s = track.covariance + r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?;
    let k = track.covariance * s_inv;
    let innovation = Vector3::new(
        meas.frequency_hz - track.x[0],
        meas.amplitude - track.x[1],
        wrap_pi(meas.phase_rad - track.x[2]),
    );
    let mut out = track.clone();
    out.x += k * innovation;
    out.x[1] = out.x[1].max(0.0);
    out.x[2] = wrap_phase(out.x[2]);
    let ik = Matrix3::identity() - k;
    let p = ik * track.covariance * ik.transpose() + k * r * k.transpose();
    out.covariance = (p + p.transpose()) * 0.5;
    out.hits += 1;
    out.misses = 0;
    Ok(out)
}

fn check_psd(r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("measurement_noise", "non-finite entry"));
    }
    let scale = r.amax().max(f64::MIN_POSITIVE);
    if (r - r.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid("measurement_noise", "not symmetric"));
    }
    let eig = SymmetricEigen::new(*r).eigenvalues;
    if eig.iter().any(|&e| e < -1e-12 * scale) {
        return Err(Error::invalid("measurement_noise", "not positive semidefinite"));
    }
    Ok(())
}

/// `R = c_R·diag(1, 0.01·A², 0.01)/snr`.
pub fn measurement_noise(
    est: &FrequencyEstimate,
    snr_linear: f64,
    cfg: &TrackingConfig,
) -> Result<Matrix3<f64>> {
    if !(snr_linear > 0.0) {
        return Err(Error::invalid("snr_linear", format!("{snr_linear} must be > 0")));
    }
    let a2 = est.amplitude * est.amplitude;
    let c = cfg.measurement_noise_scale / snr_linear;
    Ok(Matrix3::from_diagonal(&Vector3::new(c, c * a2 * 0.01, c * 0.01)))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(track index, estimate index)`.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_estimates: Vec<usize>,
}

/// Minimum-cost assignment of rows to columns of a rectangular cost matrix
/// (`cost[row][col]`); every row of the smaller side is matched.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    if m == 0 {
        return vec![None; n];
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let cols = hungarian(&t);
        let mut rows = vec![None; n];
        for (j, i) in cols.into_iter().enumerate() {
            if let Some(i) = i {
                rows[i] = Some(j);
            }
        }
        return rows;
    }
    // Shortest augmenting paths with row/column potentials, 1-based.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            rows[owner[j] - 1] = Some(j - 1);
        }
    }
    rows
}

/// Gated assignment on frequency distance. Pairs beyond `gate_hz` carry a
/// prohibitive cost so the solver prefers any feasible alternative, and are
/// dropped afterwards.
pub fn associate(track_hz: &[f64], est_hz: &[f64], gate_hz: f64) -> Assignment {
    let forbidden = 1e6 * (gate_hz + 1.0) * (track_hz.len() + est_hz.len()) as f64;
    let cost: Vec<Vec<f64>> = track_hz
        .iter()
        .map(|t| {
            est_hz
                .iter()
                .map(|e| {
                    let d = (t - e).abs();
                    if d <= gate_hz {
                        d
                    } else {
                        forbidden
                    }
                })
                .collect()
        })
        .collect();
    let rows = hungarian(&cost);
    let mut out = Assignment::default();
    let mut est_used = vec![false; est_hz.len()];
    for (i, j) in rows.into_iter().enumerate() {
        match j {
            Some(j) if (track_hz[i] - est_hz[j]).abs() <= gate_hz => {
                out.pairs.push((i, j));
                est_used[j] = true;
            }
            _ => out.unmatched_tracks.push(i),
        }
    }
    out.unmatched_estimates = (0..est_hz.len()).filter(|&j| !est_used[j]).collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub track_id: u64,
    pub status: TrackStatus,
    pub f_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Live tracks after one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTracks {
    pub frame_id: usize,
    pub tracks: Vec<TrackSummary>,
    /// `(track_id, estimate index)` for estimates consumed this frame.
    pub matches: Vec<(u64, usize)>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackingConfig,
    live: Vec<TrackState>,
    archived: Vec<TrackState>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackingConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            live: Vec::new(),
            archived: Vec::new(),
            next_id: 0,
        })
    }

    pub fn config(&self) -> &TrackingConfig {
        &self.cfg
    }

    pub fn live(&self) -> &[TrackState] {
        &self.live
    }

    pub fn archived(&self) -> &[TrackState] {
        &self.archived
    }

    /// Archived tracks followed by live ones, in creation order.
    pub fn all_tracks(&self) -> Vec<TrackState> {
        let mut all: Vec<TrackState> = self.archived.iter().chain(&self.live).cloned().collect();
        all.sort_by_key(|t| t.track_id);
        all
    }

    /// Consumes one frame's estimates; frames must arrive in time order.
    pub fn step(&mut self, frame_id: usize, estimates: &[FrequencyEstimate]) -> Result<FrameTracks> {
        for t in &mut self.live {
            *t = predict(t, &self.cfg);
        }
        let track_hz: Vec<f64> = self.live.iter().map(|t| t.frequency()).collect();
        let est_hz: Vec<f64> = estimates.iter().map(|e| e.frequency_hz).collect();
        let assignment = associate(&track_hz, &est_hz, self.cfg.gate_hz);

        let mut matches = Vec::with_capacity(assignment.pairs.len());
        for &(ti, ei) in &assignment.pairs {
            let est = &estimates[ei];
            let r = measurement_noise(est, est.snr_linear.max(1e-12), &self.cfg)?;
            let mut t = update(&self.live[ti], est, &r)?;
            if t.status == TrackStatus::Tentative && t.hits >= self.cfg.confirm_hits {
                t.status = TrackStatus::Confirmed;
                t.confirmed_at = Some(frame_id);
            }
            t.points.push(point(frame_id, &t.x));
            matches.push((t.track_id, ei));
            self.live[ti] = t;
        }
        for &ti in &assignment.unmatched_tracks {
            let t = &mut self.live[ti];
            t.misses += 1;
            t.hits = 0;
            if t.misses >= self.cfg.max_misses {
                t.status = TrackStatus::Dead;
            }
        }
        for &ei in &assignment.unmatched_estimates {
            let est = &estimates[ei];
            let r = measurement_noise(est, est.snr_linear.max(1e-12), &self.cfg)?;
            let x = Vector3::new(est.frequency_hz, est.amplitude, wrap_phase(est.phase_rad));
            let mut t = TrackState::new(self.next_id, x, r);
            self.next_id += 1;
            t.hits = 1;
            if t.hits >= self.cfg.confirm_hits {
                t.status = TrackStatus::Confirmed;
                t.confirmed_at = Some(frame_id);
            }
            t.points.push(point(frame_id, &t.x));
            matches.push((t.track_id, ei));
            self.live.push(t);
        }
        let (dead, live): (Vec<_>, Vec<_>) =
            self.live.drain(..).partition(|t| t.status == TrackStatus::Dead);
        self.live = live;
        self.archived.extend(dead);

        Ok(FrameTracks {
            frame_id,
            tracks: self
                .live
                .iter()
                .map(|t| TrackSummary {
                    track_id: t.track_id,
                    status: t.status,
                    f_hz: t.x[0],
                    amplitude: t.x[1],
                    phase: t.x[2],
                })
                .collect(),
            matches,
        })
    }
}

fn point(frame_id: usize, x: &Vector3<f64>) -> TrackPoint {
    TrackPoint {
        frame_id,
        f_hz: x[0],
        amplitude: x[1],
        phase: x[2],
    }
}

/// Fraction of frames in which a single confirmed track sits within
/// `gate_hz` of `truth_hz`; the best such track is used.
pub fn continuity(history: &[FrameTracks], truth_hz: f64, gate_hz: f64) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    let mut covered: std::collections::HashMap<u64, usize> = Default::default();
    for frame in history {
        for t in &frame.tracks {
            if t.status == TrackStatus::Confirmed && (t.f_hz - truth_hz).abs() <= gate_hz {
                *covered.entry(t.track_id).or_default() += 1;
            }
        }
    }
    covered.values().copied().max().unwrap_or(0) as f64 / history.len() as f64
}
