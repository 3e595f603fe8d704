//! Root-MUSIC: null-spectrum polynomial from a signal basis, companion
//! rooting, the unit-circle gate, and a least-squares amplitude fit.
//!
//! Steering vectors are `a(z) = [1, z, …, z^{L−1}]`, so a basis containing
//! `e^{jωn}` puts a root at `e^{jω}`. The null spectrum
//! `P(z) = a(z)ᴴ(I − V Vᴴ)a(z) = Σ_m c_m z^m` has lags `m ∈ (−L, L)` and
//! `z^{L−1}P(z)` is an ordinary polynomial whose coefficient array, in
//! ascending powers, is exactly `c` indexed by `m + L − 1`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::wrap_phase;

const ZERO_COEFF_REL: f64 = 1e-12;
/// Roots within this angle of 0 or π are DC/Nyquist artefacts of a real signal.
const EDGE_ANGLE: f64 = 1e-6;
/// Newton iterates straying this far from the unit circle are abandoned.
const NEWTON_GUARD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MusicPolynomial {
    /// `c_{−(L−1)} … c_{L−1}`, i.e. ascending powers of `z^{L−1}P(z)`.
    pub coefficients: Vec<Complex64>,
    pub aperture: usize,
}

impl MusicPolynomial {
    /// Null spectrum of an empty signal subspace: the constant `L`.
    pub fn identity(aperture: usize) -> Self {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); 2 * aperture - 1];
        coefficients[aperture - 1] = Complex64::new(aperture as f64, 0.0);
        Self {
            coefficients,
            aperture,
        }
    }

    /// `c_m` for `|m| < L`.
    pub fn lag(&self, m: isize) -> Complex64 {
        self.coefficients[(m + self.aperture as isize - 1) as usize]
    }

    /// `z^{L−1}P(z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.coefficients, z).0
    }

    /// `P(e^{jω})`, real for a conjugate-symmetric polynomial.
    pub fn null_spectrum(&self, omega: f64) -> f64 {
        let l = self.aperture as isize;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in -(l - 1)..l {
            acc += self.lag(m) * Complex64::from_polar(1.0, omega * m as f64);
        }
        acc.re
    }
}

/// `P(z)` coefficients for the first `aperture` rows of `basis`. When the
/// aperture is shorter than the basis, the truncated rows are
/// re-orthonormalized first.
pub fn music_polynomial(basis: &DMatrix<Complex64>, aperture: usize) -> Result<MusicPolynomial> {
    let (rows, p) = basis.shape();
    if p == 0 {
        return Err(Error::EmptySubspace);
    }
    if aperture < 2 || aperture > rows {
        return Err(Error::invalid(
            "aperture",
            format!("{aperture} must lie in [2, {rows}]"),
        ));
    }
    let q = if aperture < rows {
        orthonormalize(basis.rows(0, aperture).into_owned())?
    } else {
        basis.clone()
    };
    let l = aperture;
    let nfft = (2 * l - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);

    let mut power = vec![0.0f64; nfft];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for col in q.column_iter() {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        buf[..l].copy_from_slice(col.as_slice());
        fwd.process(&mut buf);
        for (acc, b) in power.iter_mut().zip(&buf) {
            *acc += b.norm_sqr();
        }
    }
    // IFFT of Σ|V_i|² gives r[m] = Σ_i Σ_n conj(v_i[n]) v_i[n+m] at index m mod nfft.
    for (b, &pw) in buf.iter_mut().zip(&power) {
        *b = Complex64::new(pw, 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / nfft as f64;
    let r = |m: isize| buf[m.rem_euclid(nfft as isize) as usize] * scale;

    let li = l as isize;
    let coefficients = (-(li - 1)..li)
        .map(|m| {
            let delta = if m == 0 { l as f64 } else { 0.0 };
            Complex64::new(delta, 0.0) - r(-m)
        })
        .collect();
    Ok(MusicPolynomial {
        coefficients,
        aperture: l,
    })
}

/// Real-basis convenience wrapper around [`music_polynomial`].
pub fn music_polynomial_real(basis: &DMatrix<f64>, aperture: usize) -> Result<MusicPolynomial> {
    music_polynomial(&basis.map(|x| Complex64::new(x, 0.0)), aperture)
}

fn orthonormalize(m: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let svd = m.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("thin SVD returned no left vectors".into()))?;
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Err(Error::EmptySubspace);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * top)
        .collect();
    Ok(u.select_columns(keep.iter()))
}

/// All roots of the polynomial (`2(L−1)` of them unless leading
/// coefficients vanish), via the eigenvalues of its companion matrix.
pub fn companion_roots(poly: &MusicPolynomial) -> Result<Vec<Complex64>> {
    polynomial_roots(&poly.coefficients)
}

/// Roots of `Σ coeffs[k] z^k`. Leading coefficients below `1e−12·max|c|`
/// are dropped; trailing zeros contribute roots at the origin.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let top = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if top == 0.0 || !top.is_finite() {
        return Err(Error::ZeroPolynomial);
    }
    let tiny = ZERO_COEFF_REL * top;
    let hi = coeffs.iter().rposition(|c| c.norm() > tiny).unwrap();
    let lo = coeffs.iter().position(|c| c.norm() > tiny).unwrap();
    let mut roots = vec![Complex64::new(0.0, 0.0); lo];
    let c = &coeffs[lo..=hi];
    let n = c.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    let lead = c[n];
    let real = c.iter().all(|x| x.im.abs() <= tiny);
    let palindromic = n % 2 == 0 && (0..n / 2).all(|k| (c[k] - c[n - k]).norm() <= tiny);
    if real && palindromic {
        roots.extend(palindromic_roots(c)?);
    } else if real {
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -(c[i] / lead).re;
        }
        nalgebra::linalg::balancing::balance_parlett_reinsch(&mut comp);
        roots.extend(hessenberg_eigenvalues(&comp)?);
    } else {
        let mut comp = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..n {
            comp[(i, n - 1)] = -c[i] / lead;
        }
        let schur = nalgebra::linalg::Schur::try_new(comp, f64::EPSILON, 100 * n.max(10))
            .ok_or_else(|| Error::Numerical("companion Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        roots.extend(t.diagonal().iter().copied());
    }
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite companion eigenvalue".into()));
    }
    Ok(roots)
}

/// Roots of a real palindromic polynomial of degree `2n`. With
/// `x = (z + 1/z)/2`, `z^{−n}P(z) = c_n + Σ 2c_{n+k} T_k(x)` exactly, so the
/// `n` roots in `x` come from the (transposed) colleague matrix, half the
/// size of the companion matrix, and each gives the pair `z, 1/z`.
fn palindromic_roots(c: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = (c.len() - 1) / 2;
    let mut a: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { c[n].re } else { 2.0 * c[n + k].re })
        .collect();
    let top = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    while a.len() > 1 && a.last().unwrap().abs() <= ZERO_COEFF_REL * top {
        a.pop();
    }
    let d = a.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let xs: Vec<Complex64> = if d == 1 {
        vec![Complex64::new(-a[0] / a[1], 0.0)]
    } else {
        // Transposed colleague matrix: upper Hessenberg.
        let mut m = DMatrix::<f64>::zeros(d, d);
        m[(1, 0)] = 1.0;
        for k in 1..d - 1 {
            m[(k - 1, k)] = 0.5;
            m[(k + 1, k)] = 0.5;
        }
        m[(d - 2, d - 1)] = 0.5;
        for k in 0..d {
            m[(k, d - 1)] -= a[k] / (2.0 * a[d]);
        }
        nalgebra::linalg::balancing::balance_parlett_reinsch(&mut m);
        hessenberg_eigenvalues(&m)?
    };
    let one = Complex64::new(1.0, 0.0);
    let mut roots = Vec::with_capacity(2 * d);
    for x in xs {
        let z = x + (x * x - one).sqrt();
        roots.push(z);
        roots.push(z.inv());
    }
    Ok(roots)
}

/// Eigenvalues of a real upper Hessenberg matrix by Francis double-shift
/// QR, without accumulating vectors. nalgebra's general Schur spends most
/// of its time on work this problem does not need.
fn hessenberg_eigenvalues(h: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    // 1-based copy keeps the index arithmetic of the classic formulation.
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            a[i][j] = h[(i - 1, j - 1)];
            anorm += a[i][j].abs();
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let sign = |a: f64, b: f64| if b >= 0.0 { a.abs() } else { -a.abs() };
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if its == 60 {
                return Err(Error::Numerical("companion QR iteration did not converge".into()));
            }
            if its % 10 == 0 && its > 0 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r, mut z);
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Value and derivative of `Σ c[k] z^k`.
fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut b = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        d = d * z + b;
        b = b * z + ck;
    }
    (b, d)
}

/// Newton iteration on `c`, implicitly deflating the roots in `known`.
fn newton(c: &[Complex64], start: Complex64, known: &[Complex64]) -> Option<Complex64> {
    let mut z = start;
    for _ in 0..80 {
        let (f, d) = horner(c, z);
        if f.norm() == 0.0 {
            return Some(z);
        }
        if d.norm() == 0.0 {
            return None;
        }
        let ratio = f / d;
        let pull: Complex64 = known.iter().map(|&r| (z - r).inv()).sum();
        let step = ratio / (Complex64::new(1.0, 0.0) - ratio * pull);
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || (1.0 - z.norm()).abs() > NEWTON_GUARD {
            return None;
        }
        if step.norm() < 1e-14 * z.norm() {
            break;
        }
    }
    Some(z)
}

/// Maps a root outside the unit circle to its reciprocal partner inside.
fn fold_inside(z: Complex64) -> Complex64 {
    if z.norm() > 1.0 {
        z.conj().inv()
    } else {
        z
    }
}

/// Folded, gated positive-frequency roots ranked by closeness to the unit
/// circle, merged when their frequencies differ by less than `merge_rad`
/// (normalized angular units), at most `keep` of them.
fn select_roots(roots: &[Complex64], keep: usize, radius_tol: f64, merge_rad: f64) -> Vec<Complex64> {
    let mut cand: Vec<Complex64> = roots
        .iter()
        .map(|&z| fold_inside(z))
        .filter(|z| {
            let arg = z.arg();
            arg > EDGE_ANGLE && arg < PI - EDGE_ANGLE && (1.0 - z.norm()).abs() < radius_tol
        })
        .collect();
    cand.sort_by(|a, b| (1.0 - a.norm()).abs().total_cmp(&(1.0 - b.norm()).abs()));

    let mut out: Vec<(Complex64, f64, usize)> = Vec::new();
    for z in cand {
        let arg = z.arg();
        if let Some(hit) = out.iter_mut().find(|(_, a, _)| (a - arg).abs() < merge_rad) {
            // Running mean of the merged angles; radius stays with the closest root.
            hit.2 += 1;
            hit.1 += (arg - hit.1) / hit.2 as f64;
            hit.0 = Complex64::from_polar(hit.0.norm(), hit.1);
            continue;
        }
        if out.len() == keep {
            continue;
        }
        out.push((z, arg, 1));
    }
    out.into_iter().map(|(z, _, _)| z).collect()
}

/// Minimum separation below which two estimates are one root pair.
pub const MERGE_HZ: f64 = 0.05;

/// Gated frequency/radius pairs: positive frequencies only, inner member of
/// each reciprocal pair, closest to the circle first, at most `ceil(p/2)`.
pub fn roots_to_frequencies(
    roots: &[Complex64],
    fs_hz: f64,
    p: usize,
    radius_tol: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(Error::invalid("fs_hz", format!("{fs_hz} must be finite and > 0")));
    }
    let merge = TAU * MERGE_HZ / fs_hz;
    Ok(select_roots(roots, p.div_ceil(2), radius_tol, merge)
        .into_iter()
        .map(|z| (fs_hz * z.arg() / TAU, z.norm()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootingConfig {
    /// Rows of the basis used for the companion stage.
    pub aperture: usize,
    pub radius_tol: f64,
    /// Polish companion roots with Newton on the full-aperture polynomial.
    pub refine: bool,
}

impl Default for RootingConfig {
    fn default() -> Self {
        Self {
            aperture: 64,
            radius_tol: 0.1,
            refine: true,
        }
    }
}

impl RootingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aperture < 2 {
            return Err(Error::invalid("rooting_aperture", format!("{} must be >= 2", self.aperture)));
        }
        if !(self.radius_tol > 0.0 && self.radius_tol < 1.0) {
            return Err(Error::invalid("radius_tol", format!("{} must lie in (0, 1)", self.radius_tol)));
        }
        Ok(())
    }
}

/// Frequencies (Hz) and root radii from an `L×p` signal basis whose columns
/// span the sampled sinusoids.
///
/// The companion stage runs on the first `aperture` rows only, which keeps
/// the eigenvalue problem small. Each surviving root then seeds Newton on
/// the full-length polynomial twice: once plainly, once deflating the root
/// just found (and its reciprocal) so a second, unresolved neighbour can
/// emerge from the same coarse seed.
pub fn estimate_frequencies(
    basis: &DMatrix<f64>,
    p: usize,
    fs_hz: f64,
    cfg: &RootingConfig,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if p == 0 || basis.ncols() == 0 {
        return Err(Error::EmptySubspace);
    }
    let rows = basis.nrows();
    let keep = p.div_ceil(2);
    let merge = TAU * MERGE_HZ / fs_hz;
    let aperture = cfg.aperture.min(rows);
    let coarse = music_polynomial_real(basis, aperture)?;
    let coarse_roots = companion_roots(&coarse)?;

    let roots = if cfg.refine && aperture < rows {
        let seeds = select_roots(&coarse_roots, keep, cfg.radius_tol, merge);
        let full = music_polynomial_real(basis, rows)?;
        let c = &full.coefficients;
        let mut refined = Vec::with_capacity(2 * seeds.len());
        for s in seeds {
            let Some(z1) = newton(c, s, &[]) else { continue };
            let z1 = fold_inside(z1);
            refined.push(z1);
            if let Some(z2) = newton(c, s, &[z1, z1.conj().inv()]) {
                refined.push(fold_inside(z2));
            }
        }
        refined
    } else {
        coarse_roots
    };
    Ok(select_roots(&roots, keep, cfg.radius_tol, merge)
        .into_iter()
        .map(|z| (fs_hz * z.arg() / TAU, z.norm()))
        .collect())
}

/// One frequency component found in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub frequency_hz: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    pub root_radius: f64,
    pub frame_id: usize,
    /// `(A²/2)/σ̂²` against the frame's noise estimate.
    pub snr_linear: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    /// `(amplitude, phase in [0, 2π))` per input frequency.
    pub components: Vec<(f64, f64)>,
    /// Ridge regularization was needed for near-collinear frequencies.
    pub regularized: bool,
}

/// Least-squares fit of `Σ a_i cos(2πf_i n/fs) + b_i sin(2πf_i n/fs)`.
pub fn estimate_amplitudes(samples: &[f64], fs_hz: f64, freqs: &[f64]) -> Result<AmplitudeFit> {
    if freqs.is_empty() {
        return Ok(AmplitudeFit {
            components: Vec::new(),
            regularized: false,
        });
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    for &f in freqs {
        if !(f > 0.0 && f < fs_hz / 2.0) {
            return Err(Error::invalid("frequency", format!("{f} Hz outside (0, {})", fs_hz / 2.0)));
        }
    }
    let resolution = 0.1 * fs_hz / n as f64;
    let mut regularized = false;
    for (i, a) in freqs.iter().enumerate() {
        for b in &freqs[i + 1..] {
            if a == b {
                return Err(Error::invalid("frequency", format!("{a} Hz listed twice")));
            }
            if (a - b).abs() < resolution {
                regularized = true;
            }
        }
    }
    let k = freqs.len();
    let x = DMatrix::<f64>::from_fn(n, 2 * k, |row, col| {
        let w = TAU * freqs[col / 2] * row as f64 / fs_hz;
        if col % 2 == 0 {
            w.cos()
        } else {
            w.sin()
        }
    });
    let y = DVector::from_column_slice(samples);
    let mut gram = x.transpose() * &x;
    let rhs = x.transpose() * y;
    if regularized {
        let lambda = 1e-3 * gram.trace() / (2 * k) as f64;
        for i in 0..2 * k {
            gram[(i, i)] += lambda;
        }
    }
    let sol = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.svd(true, true).solve(&rhs, 1e-12).ok())
        .ok_or_else(|| Error::Numerical("amplitude fit failed".into()))?;
    let components = (0..k)
        .map(|i| {
            let (a, b) = (sol[2 * i], sol[2 * i + 1]);
            (a.hypot(b), wrap_phase((-b).atan2(a)))
        })
        .collect();
    Ok(AmplitudeFit {
        components,
        regularized,
    })
}
