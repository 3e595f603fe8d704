//! Brute-force references: dense SVD, covariance-based Root-MUSIC, grid
//! MUSIC and the periodogram. They share no code with the fast path beyond
//! polynomial rooting and the gate.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::HankelOperator;
use crate::rooting::{estimate_frequencies, polynomial_roots, roots_to_frequencies, RootingConfig};
use crate::signal::Window;
use crate::subspace::OrderRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Ascending.
    pub frequencies: Vec<f64>,
    /// Descending.
    pub singular_or_eigen_values: Vec<f64>,
    pub method_tag: String,
}

pub struct DenseSvd {
    pub singular_values: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD of the densified operator, singular values descending.
pub fn dense_svd(op: &HankelOperator) -> Result<DenseSvd> {
    let h = op.dense()?;
    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("dense SVD: no U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("dense SVD: no Vᵀ".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok(DenseSvd {
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        u: u.select_columns(order.iter()),
        v: vt.transpose().select_columns(order.iter()),
    })
}

/// Root-MUSIC on the `l_cov×l_cov` forward-backward sample covariance.
pub fn classical_root_music(
    samples: &[f64],
    fs_hz: f64,
    rule: OrderRule,
    l_cov: usize,
    radius_tol: f64,
) -> Result<OracleResult> {
    let n = samples.len();
    if l_cov < 2 || l_cov > n / 2 {
        return Err(Error::invalid("l_cov", format!("{l_cov} must lie in [2, N/2 = {}]", n / 2)));
    }
    let snapshots = n - l_cov + 1;
    let mut r = DMatrix::<f64>::zeros(l_cov, l_cov);
    for k in 0..snapshots {
        let x = &samples[k..k + l_cov];
        for i in 0..l_cov {
            for j in i..l_cov {
                r[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..l_cov {
        for j in 0..i {
            r[(i, j)] = r[(j, i)];
        }
    }
    r /= snapshots as f64;
    // Forward-backward: average with the exchange-reversed matrix.
    let fb = DMatrix::from_fn(l_cov, l_cov, |i, j| {
        0.5 * (r[(i, j)] + r[(l_cov - 1 - i, l_cov - 1 - j)])
    });

    let eig = SymmetricEigen::new(fb);
    let mut order: Vec<usize> = (0..l_cov).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let amplitudes: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
    let p = rule.select(&amplitudes)?;
    if p >= l_cov {
        return Err(Error::SingularCovariance { order: p, dim: l_cov });
    }

    // Σ over noise eigenvectors of their autocorrelation, lag by lag.
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * l_cov - 1];
    for &col in &order[p..] {
        let e = eig.eigenvectors.column(col);
        for m in 0..l_cov {
            let acc: f64 = (0..l_cov - m).map(|i| e[i] * e[i + m]).sum();
            coeffs[l_cov - 1 + m] += acc;
            if m > 0 {
                coeffs[l_cov - 1 - m] += acc;
            }
        }
    }
    let roots = polynomial_roots(&coeffs)?;
    let mut frequencies: Vec<f64> = roots_to_frequencies(&roots, fs_hz, p, radius_tol)?
        .into_iter()
        .map(|(f, _)| f)
        .collect();
    frequencies.sort_by(f64::total_cmp);
    Ok(OracleResult {
        frequencies,
        singular_or_eigen_values: values,
        method_tag: "classical_root_music".into(),
    })
}

/// The fast pipeline's rooting stage on a basis from a dense SVD of the
/// full Hankel matrix: the O(N³) baseline that the benchmark compares
/// against.
pub fn classical_dense(
    op: &HankelOperator,
    fs_hz: f64,
    rule: OrderRule,
    rooting: &RootingConfig,
) -> Result<OracleResult> {
    let svd = dense_svd(op)?;
    let p = rule.select(&svd.singular_values)?;
    let basis = svd.u.columns(0, p).into_owned();
    let mut frequencies: Vec<f64> = estimate_frequencies(&basis, p, fs_hz, rooting)?
        .into_iter()
        .map(|(f, _)| f)
        .collect();
    frequencies.sort_by(f64::total_cmp);
    Ok(OracleResult {
        frequencies,
        singular_or_eigen_values: svd.singular_values,
        method_tag: "classical_dense_svd".into(),
    })
}

/// One-sided `|FFT|²` of the windowed frame on the grid `k·fs/N`.
pub fn periodogram(samples: &[f64], fs_hz: f64, window: Window) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let w = window.weights(n);
    let mut buf: Vec<Complex64> = samples
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let grid = (0..bins).map(|k| k as f64 * fs_hz / n as f64).collect();
    let power = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
    (grid, power)
}

/// Indices of strict local maxima of `power`, strongest first.
pub fn peak_bins(power: &[f64]) -> Vec<usize> {
    let mut peaks: Vec<usize> = (1..power.len().saturating_sub(1))
        .filter(|&k| power[k] > power[k - 1] && power[k] >= power[k + 1])
        .collect();
    peaks.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    peaks
}

/// `‖(I − V Vᴴ) a(e^{jω})‖²` at `ω = 2πk/grid_size`, for an orthonormal basis.
pub fn spectral_music_grid(basis: &DMatrix<Complex64>, grid_size: usize) -> Result<Vec<f64>> {
    let l = basis.nrows();
    if grid_size < 2 * l {
        return Err(Error::invalid("grid_size", format!("{grid_size} must be >= {}", 2 * l)));
    }
    let fft = FftPlanner::new().plan_fft_forward(grid_size);
    let mut out = vec![l as f64; grid_size];
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    for col in basis.column_iter() {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        buf[..l].copy_from_slice(col.as_slice());
        fft.process(&mut buf);
        // vᴴa(e^{jω_k}) = conj(FFT(v)[k]).
        for (o, b) in out.iter_mut().zip(&buf) {
            *o -= b.norm_sqr();
        }
    }
    Ok(out)
}

/// Angular frequency of grid point `k`.
pub fn grid_omega(k: usize, grid_size: usize) -> f64 {
    TAU * k as f64 / grid_size as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rooting::{companion_roots, music_polynomial};
    use crate::signal::{generate, SignalSpec, SinusoidSpec};

    const FS: f64 = 51_200.0;

    fn tones(comps: &[(f64, f64)], noise: f64, duration: f64, seed: u64) -> Vec<f64> {
        let spec = SignalSpec {
            components: comps
                .iter()
                .enumerate()
                .map(|(i, &(f, a))| SinusoidSpec::new(f, a, 0.7 + i as f64))
                .collect(),
            noise_std: noise,
            fs_hz: FS,
            duration_s: duration,
            rng_seed: seed,
        };
        generate(&spec).unwrap()
    }

    #[test]
    fn classical_exact_tone() {
        let x = tones(&[(1000.0, 1.0)], 0.0, 0.016, 0);
        let r = classical_root_music(&x, FS, OrderRule::Fixed(2), 64, 0.1).unwrap();
        assert_eq!(r.frequencies.len(), 1);
        assert!((r.frequencies[0] - 1000.0).abs() < 1e-6, "{:?}", r.frequencies);
        assert_eq!(r.method_tag, "classical_root_music");
    }

    #[test]
    fn classical_rejects_full_order() {
        let x = tones(&[(1000.0, 1.0)], 0.1, 0.016, 0);
        assert!(matches!(
            classical_root_music(&x, FS, OrderRule::Fixed(64), 64, 0.1),
            Err(Error::SingularCovariance { .. })
        ));
        assert!(classical_root_music(&x, FS, OrderRule::Fixed(2), 500, 0.1).is_err());
    }

    #[test]
    fn dense_svd_matches_operator() {
        let x = tones(&[(1197.0, 1.0), (3000.0, 0.5)], 0.1, 0.004, 1);
        let op = HankelOperator::new(x, 68).unwrap();
        let s = dense_svd(&op).unwrap();
        let h = op.dense().unwrap();
        let v0 = s.v.column(0).into_owned();
        let u0 = s.u.column(0).into_owned();
        assert!((&h * v0 - u0 * s.singular_values[0]).norm() < 1e-9);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn periodogram_grid_and_peak() {
        let (grid, _) = periodogram(&vec![0.0; 819], FS, Window::Rectangular);
        assert!((grid[1] - 62.5).abs() < 0.02);
        let (grid, _) = periodogram(&vec![0.0; 4096], FS, Window::Rectangular);
        assert_eq!(grid[1], 12.5);
        let x = tones(&[(1200.0, 1.0)], 0.0, 0.08, 0);
        let (grid, power) = periodogram(&x, FS, Window::Rectangular);
        assert_eq!(grid[peak_bins(&power)[0]], 1200.0);
    }

    #[test]
    fn periodogram_merges_close_pair() {
        let x = tones(&[(1197.0, 1.0), (1202.0, 1.0)], 0.0, 0.08, 0);
        let (grid, power) = periodogram(&x, FS, Window::Rectangular);
        let near = peak_bins(&power)
            .into_iter()
            .filter(|&k| (grid[k] - 1199.5).abs() < 20.0)
            .count();
        assert_eq!(near, 1);
    }

    #[test]
    fn grid_music_agrees_with_roots() {
        let l = 32;
        let x = tones(&[(4000.0, 1.0), (9000.0, 0.6)], 0.0, 0.004, 0);
        let op = HankelOperator::new(x[..l + 40].to_vec(), l).unwrap();
        let s = dense_svd(&op).unwrap();
        let basis = s.u.columns(0, 4).map(|v| Complex64::new(v, 0.0));
        let grid_size = 4096;
        let spec = spectral_music_grid(&basis, grid_size).unwrap();
        let poly = music_polynomial(&basis, l).unwrap();
        let roots = roots_to_frequencies(&companion_roots(&poly).unwrap(), TAU, 4, 0.1).unwrap();
        assert_eq!(roots.len(), 2);
        for (w, _) in roots {
            let k = (w / TAU * grid_size as f64).round() as usize;
            let lo = k.saturating_sub(3);
            let local = (lo..k + 4).min_by(|&a, &b| spec[a].total_cmp(&spec[b])).unwrap();
            assert!((grid_omega(local, grid_size) - w).abs() <= TAU / grid_size as f64 + 1e-12);
        }
    }

    #[test]
    fn grid_music_identity_and_size() {
        let empty = DMatrix::<Complex64>::zeros(8, 0);
        let g = spectral_music_grid(&empty, 64).unwrap();
        assert!(g.iter().all(|&v| v == 8.0));
        assert!(spectral_music_grid(&empty, 10).is_err());
    }

    #[test]
    fn classical_resolves_close_pair_at_20db() {
        let sigma = (1.0f64 / 2.0 / 100.0).sqrt();
        let x = tones(&[(1197.0, 1.0), (1202.0, 1.0)], sigma, 0.016, 4);
        let r = classical_root_music(&x, FS, OrderRule::Fixed(4), 64, 0.1).unwrap();
        assert_eq!(r.frequencies.len(), 2, "{:?}", r.frequencies);
    }
}
