//! Implicit Hankel operator with FFT-based matrix-vector products.
//!
//! Entry `(i, j)` of the `L×M` operator is `source[i + j]`. Both products
//! reduce to a linear convolution of the source with a reversed vector:
//!
//! ```text
//! (H v)_i   = (x * rev(v))[i + M - 1],   i in 0..L
//! (Hᵀ u)_j  = (x * rev(u))[j + L - 1],   j in 0..M
//! ```
//!
//! A circular convolution of length `n >= N = L + M - 1` wraps only lags
//! below the extraction window, so the FFT length never needs to exceed the
//! next fast size above `N`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::Frame;

/// Default densification cap (entries).
pub const DENSE_CAP: usize = 4_000_000;

#[derive(Clone)]
pub struct HankelOperator {
    source: Vec<f64>,
    rows: usize,
    cols: usize,
    fft_len: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for HankelOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HankelOperator")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("fft_len", &self.fft_len)
            .finish_non_exhaustive()
    }
}

/// Per-caller scratch for the FFT products.
pub struct HankelWorkspace {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// Row count used by the default dimension rule.
pub fn default_rows(n: usize) -> usize {
    n / 3
}

/// Smallest 2^a·3^b·5^c·7^d not below `n`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Builds the operator for a frame with `L = floor(N/3)` rows and
/// `M = N - L + 1` columns.
pub fn make_hankel(frame: &Frame) -> Result<HankelOperator> {
    frame.validate()?;
    let n = frame.len();
    let rows = default_rows(n);
    if rows < 2 {
        return Err(Error::invalid(
            "frame",
            format!("{n} samples is too short for a Hankel operator (need L = N/3 >= 2)"),
        ));
    }
    HankelOperator::new(frame.samples.clone(), rows)
}

impl HankelOperator {
    /// Operator with `rows` rows over all of `source`; columns follow as
    /// `N - rows + 1`.
    pub fn new(source: Vec<f64>, rows: usize) -> Result<Self> {
        let n = source.len();
        if rows == 0 || rows > n {
            return Err(Error::invalid(
                "rows",
                format!("{rows} rows is not valid for {n} samples"),
            ));
        }
        if let Some(i) = source.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid("source", format!("sample {i} is not finite")));
        }
        let cols = n - rows + 1;
        let fft_len = fast_len(n);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum: Vec<Complex64> = source
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(fft_len)
            .collect();
        forward.process(&mut spectrum);
        Ok(Self {
            source,
            rows,
            cols,
            fft_len,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn workspace(&self) -> HankelWorkspace {
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        HankelWorkspace {
            buf: vec![Complex64::new(0.0, 0.0); self.fft_len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// `H v`.
    pub fn hv(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.hv_into(v, &mut out, &mut self.workspace())?;
        Ok(out)
    }

    /// `Hᵀ u`.
    pub fn htu(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.htu_into(u, &mut out, &mut self.workspace())?;
        Ok(out)
    }

    pub fn hv_into(&self, v: &[f64], out: &mut [f64], ws: &mut HankelWorkspace) -> Result<()> {
        check_len(self.cols, v.len())?;
        check_len(self.rows, out.len())?;
        self.correlate(v, self.cols - 1, out, ws);
        Ok(())
    }

    pub fn htu_into(&self, u: &[f64], out: &mut [f64], ws: &mut HankelWorkspace) -> Result<()> {
        check_len(self.rows, u.len())?;
        check_len(self.cols, out.len())?;
        self.correlate(u, self.rows - 1, out, ws);
        Ok(())
    }

    /// Writes `(x * rev(w))[offset + k]` into `out[k]`.
    fn correlate(&self, w: &[f64], offset: usize, out: &mut [f64], ws: &mut HankelWorkspace) {
        let n = self.fft_len;
        let len = w.len();
        let zero = Complex64::new(0.0, 0.0);
        ws.buf.fill(zero);
        for (k, &x) in w.iter().enumerate() {
            ws.buf[len - 1 - k] = Complex64::new(x, 0.0);
        }
        self.forward.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        for (b, s) in ws.buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        let scale = 1.0 / n as f64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = ws.buf[offset + k].re * scale;
        }
    }

    /// Squared Frobenius norm, from the anti-diagonal multiplicities.
    pub fn frobenius_sq(&self) -> f64 {
        self.source
            .iter()
            .enumerate()
            .map(|(n, x)| {
                let lo = n.saturating_sub(self.cols - 1);
                let hi = n.min(self.rows - 1);
                (hi + 1 - lo) as f64 * x * x
            })
            .sum()
    }

    /// Dense `L×M` copy, refused above `cap` entries.
    pub fn dense_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        let entries = self.rows * self.cols;
        if entries > cap {
            return Err(Error::DenseCap { entries, cap });
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| self.source[i + j]))
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        self.dense_capped(DENSE_CAP)
    }
}

/// A real matrix reachable only through products, as the Krylov solver
/// needs it.
pub trait LinearOperator {
    type Workspace;

    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn workspace(&self) -> Self::Workspace;
    /// `out = A v`.
    fn apply_into(&self, v: &[f64], out: &mut [f64], ws: &mut Self::Workspace) -> Result<()>;
    /// `out = Aᵀ u`.
    fn apply_t_into(&self, u: &[f64], out: &mut [f64], ws: &mut Self::Workspace) -> Result<()>;
    fn frobenius_sq(&self) -> f64;
}

impl LinearOperator for HankelOperator {
    type Workspace = HankelWorkspace;

    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn workspace(&self) -> HankelWorkspace {
        HankelOperator::workspace(self)
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64], ws: &mut HankelWorkspace) -> Result<()> {
        self.hv_into(v, out, ws)
    }

    fn apply_t_into(&self, u: &[f64], out: &mut [f64], ws: &mut HankelWorkspace) -> Result<()> {
        self.htu_into(u, out, ws)
    }

    fn frobenius_sq(&self) -> f64 {
        HankelOperator::frobenius_sq(self)
    }
}

/// `[H, J H]` for the exchange matrix `J`: the data matrix of the frame and
/// of its time reversal side by side. Its left singular subspace is the
/// forward-backward averaged one, `H Hᵀ + J H Hᵀ J`, which decorrelates
/// closely spaced components and tightens the subspace estimate.
#[derive(Debug, Clone, Copy)]
pub struct ForwardBackward<'a> {
    pub inner: &'a HankelOperator,
}

pub struct ForwardBackwardWorkspace {
    inner: HankelWorkspace,
    left: Vec<f64>,
}

impl<'a> ForwardBackward<'a> {
    pub fn new(inner: &'a HankelOperator) -> Self {
        Self { inner }
    }
}

impl LinearOperator for ForwardBackward<'_> {
    type Workspace = ForwardBackwardWorkspace;

    fn rows(&self) -> usize {
        self.inner.rows
    }

    fn cols(&self) -> usize {
        2 * self.inner.cols
    }

    fn workspace(&self) -> ForwardBackwardWorkspace {
        ForwardBackwardWorkspace {
            inner: self.inner.workspace(),
            left: vec![0.0; self.inner.rows],
        }
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64], ws: &mut ForwardBackwardWorkspace) -> Result<()> {
        let m = self.inner.cols;
        check_len(2 * m, v.len())?;
        self.inner.hv_into(&v[..m], out, &mut ws.inner)?;
        self.inner.hv_into(&v[m..], &mut ws.left, &mut ws.inner)?;
        for (o, x) in out.iter_mut().zip(ws.left.iter().rev()) {
            *o += x;
        }
        Ok(())
    }

    fn apply_t_into(&self, u: &[f64], out: &mut [f64], ws: &mut ForwardBackwardWorkspace) -> Result<()> {
        let m = self.inner.cols;
        check_len(2 * m, out.len())?;
        self.inner.htu_into(u, &mut out[..m], &mut ws.inner)?;
        for (r, x) in ws.left.iter_mut().zip(u.iter().rev()) {
            *r = *x;
        }
        self.inner.htu_into(&ws.left, &mut out[m..], &mut ws.inner)
    }

    fn frobenius_sq(&self) -> f64 {
        2.0 * self.inner.frobenius_sq()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}
