//! Per-frame timing of the fast path against the dense baseline, and an
//! `a + b·N log N` fit over frame sizes.

use std::time::Instant;

use serde::Serialize;

use crate::config::{Method, PipelineConfig};
use crate::error::{Error, Result};
use crate::hankel::{default_rows, HankelOperator, DENSE_CAP};
use crate::oracle::classical_dense;
use crate::pipeline::analyze_frame;
use crate::signal::{generate, Frame, SignalSpec, SinusoidSpec};

pub const MIN_BENCH_SIZE: usize = 48;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    /// Timed frames per size for the fast path.
    pub frames: usize,
    /// Timed frames per size for the dense baseline; 0 skips it.
    pub classical_frames: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1024, 2048, 4096],
            frames: 50,
            classical_frames: 3,
            seed: 1,
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub fstrm_median_us: f64,
    /// Versus the previous (smaller) size.
    pub growth: Option<f64>,
    pub classical_median_us: Option<f64>,
    pub speedup: Option<f64>,
    /// `|t − fit|/t` under the N log N model.
    pub fit_residual: Option<f64>,
    /// Process peak resident set after the fast-path runs at this size
    /// (Linux only). Sizes run in ascending order before any dense baseline,
    /// so the dense matrices never inflate it.
    pub fstrm_peak_rss_kib: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlogNFit {
    pub intercept_us: f64,
    pub slope_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub fit: Option<NlogNFit>,
}

fn bench_frame(n: usize, fs: f64, seed: u64) -> Result<Frame> {
    let spec = SignalSpec {
        components: vec![
            SinusoidSpec::new(1197.0, 1.0, 0.3),
            SinusoidSpec::new(2394.0, 0.6, 1.3),
            SinusoidSpec::new(3591.0, 0.4, 2.3),
        ],
        noise_std: 0.1,
        fs_hz: fs,
        duration_s: n as f64 / fs,
        rng_seed: seed,
    };
    let mut x = generate(&spec)?;
    x.resize(n, 0.0);
    Ok(Frame::new(x, fs))
}

/// `VmHWM` from `/proc/self/status`: the high-water resident set in KiB.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares fit of `t = a + b·N·log₂N`.
pub fn fit_nlogn(sizes: &[usize], times: &[f64]) -> Option<NlogNFit> {
    if sizes.len() < 2 {
        return None;
    }
    let x: Vec<f64> = sizes.iter().map(|&n| n as f64 * (n as f64).log2()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = times.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(times).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(NlogNFit {
        intercept_us: my - slope * mx,
        slope_us: slope,
    })
}

impl NlogNFit {
    pub fn predict(&self, n: usize) -> f64 {
        self.intercept_us + self.slope_us * n as f64 * (n as f64).log2()
    }
}

pub fn bench(cfg: &BenchConfig) -> Result<BenchTable> {
    if cfg.sizes.is_empty() {
        return Err(Error::invalid("sizes", "need at least one size"));
    }
    if let Some(&bad) = cfg.sizes.iter().find(|&&n| n < MIN_BENCH_SIZE) {
        return Err(Error::invalid("sizes", format!("{bad} is below {MIN_BENCH_SIZE}")));
    }
    if cfg.frames == 0 {
        return Err(Error::invalid("frames", "must be > 0"));
    }
    let fs = cfg.pipeline.fs_hz;
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut pcfgs = Vec::with_capacity(sizes.len());
    let mut rows: Vec<BenchRow> = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let mut pcfg = cfg.pipeline.clone();
        pcfg.method = Method::Fstrm;
        pcfg.frame_len = n;
        pcfg.hop = n;
        pcfg.validate()?;

        // One untimed pass warms FFT plans and allocations.
        let warm = bench_frame(n, fs, cfg.seed)?;
        analyze_frame(&warm, &warm.samples, &pcfg)?;
        let mut times = Vec::with_capacity(cfg.frames);
        for i in 0..cfg.frames {
            let frame = bench_frame(n, fs, cfg.seed + i as u64)?;
            let t = Instant::now();
            analyze_frame(&frame, &frame.samples, &pcfg)?;
            times.push(t.elapsed().as_secs_f64() * 1e6);
        }
        let fstrm = median(times);
        rows.push(BenchRow {
            n,
            fstrm_median_us: fstrm,
            growth: rows.last().map(|prev| fstrm / prev.fstrm_median_us),
            classical_median_us: None,
            speedup: None,
            fit_residual: None,
            fstrm_peak_rss_kib: peak_rss_kib(),
        });
        pcfgs.push(pcfg);
    }

    for (row, pcfg) in rows.iter_mut().zip(&pcfgs) {
        let n = row.n;
        let l = default_rows(n);
        if cfg.classical_frames == 0 || l * (n - l + 1) > DENSE_CAP {
            continue;
        }
        let mut times = Vec::with_capacity(cfg.classical_frames);
        for i in 0..cfg.classical_frames {
            let frame = bench_frame(n, fs, cfg.seed + i as u64)?;
            let t = Instant::now();
            let op = HankelOperator::new(frame.samples.clone(), l)?;
            classical_dense(&op, fs, pcfg.order_rule(), &pcfg.rooting)?;
            times.push(t.elapsed().as_secs_f64() * 1e6);
        }
        let classical = median(times);
        row.classical_median_us = Some(classical);
        row.speedup = Some(classical / row.fstrm_median_us);
    }
    let sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.fstrm_median_us).collect();
    let fit = fit_nlogn(&sizes, &times);
    if let Some(f) = fit {
        for r in &mut rows {
            r.fit_residual = Some((r.fstrm_median_us - f.predict(r.n)).abs() / r.fstrm_median_us);
        }
    }
    Ok(BenchTable { rows, fit })
}

impl BenchTable {
    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        let mut out = format!(
            "{:>7} {:>12} {:>8} {:>14} {:>9} {:>9} {:>10}\n",
            "N", "fstrm_us", "growth", "classical_us", "speedup", "residual", "peak_kib"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>7} {:>12.1} {:>8} {:>14} {:>9} {:>9} {:>10}\n",
                r.n,
                r.fstrm_median_us,
                opt(r.growth, 2),
                opt(r.classical_median_us, 0),
                opt(r.speedup, 1),
                r.fit_residual.map_or("-".to_string(), |x| format!("{:.1}%", x * 100.0)),
                r.fstrm_peak_rss_kib.map_or("-".to_string(), |k| k.to_string()),
            ));
        }
        if let Some(f) = self.fit {
            out.push_str(&format!(
                "fit: t = {:.1} us + {:.3e} us * N log2 N\n",
                f.intercept_us, f.slope_us
            ));
        }
        out
    }
}
