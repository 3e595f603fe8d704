//! Golub–Kahan–Lanczos bidiagonalization driven by the FFT Hankel products,
//! the SVD of the small bidiagonal factor, and cumulative-energy order
//! selection.
//!
//! The recurrence follows the textbook upper-bidiagonal form started from a
//! right vector `v₁`:
//!
//! ```text
//! α_j u_j     = H v_j  − β_{j-1} u_{j-1}
//! β_j v_{j+1} = Hᵀ u_j − α_j v_j
//! ```
//!
//! so that `H V_k = U_k B_k` with `B_k = bidiag(α; β)`. (Some write-ups name
//! the two norms the other way around; the dense SVD in the tests is what
//! pins the convention.)

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::LinearOperator;

/// Hard upper limit on Krylov steps.
pub const K_MAX_CAP: usize = 40;

/// Norms below this are treated as a breakdown of the recurrence.
const BREAKDOWN_NORM: f64 = 1e-300;

/// A step whose norm falls below this fraction of the largest norm seen has
/// exhausted an invariant subspace.
const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosConfig {
    pub k_max: usize,
    pub eps: f64,
    /// Cosine against an earlier basis vector that triggers Gram–Schmidt.
    /// √eps-style thresholds let the loss of orthogonality grow to ~1e-3.
    pub reorth_threshold: f64,
    pub rng_seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self::for_components(5)
    }
}

impl LanczosConfig {
    /// `k_max = 2P + 5`, capped at [`K_MAX_CAP`].
    pub fn for_components(expected_components: usize) -> Self {
        let eps = 1e-6;
        Self {
            k_max: (2 * expected_components + 5).min(K_MAX_CAP),
            eps,
            reorth_threshold: 1e-10,
            rng_seed: 0x5EED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 2 {
            return Err(Error::invalid("k_max", format!("{} must be >= 2", self.k_max)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid("eps", format!("{} must lie in (0, 1)", self.eps)));
        }
        if !(self.reorth_threshold > 0.0 && self.reorth_threshold.is_finite()) {
            return Err(Error::invalid("reorth_threshold", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Raw output of the bidiagonalization.
#[derive(Debug, Clone)]
pub struct LanczosRun {
    /// Diagonal of `B_k`.
    pub alphas: Vec<f64>,
    /// Superdiagonal of `B_k`; `betas[k-1]` is the residual coupling to the
    /// next (unreturned) right vector.
    pub betas: Vec<f64>,
    /// `L×k` left Lanczos vectors.
    pub u: DMatrix<f64>,
    /// `M×k` right Lanczos vectors.
    pub v: DMatrix<f64>,
    pub k_used: usize,
    pub converged: bool,
    pub breakdown: bool,
    /// Number of steps that triggered reorthogonalization.
    pub reorth_steps: usize,
    /// Invariant subspaces hit (restarted with a fresh orthogonal vector).
    pub restarts: usize,
    pub rng_seed: u64,
}

/// Bidiagonalizes `op` with at most `min(k_max, L, M)` steps.
pub fn lanczos_bidiag<O: LinearOperator>(op: &O, cfg: &LanczosConfig) -> Result<LanczosRun> {
    cfg.validate()?;
    let (l, m) = (op.rows(), op.cols());
    let k_max = cfg.k_max.min(l).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut ws = op.workspace();

    let mut u = DMatrix::<f64>::zeros(l, k_max);
    let mut v = DMatrix::<f64>::zeros(m, k_max);
    let mut alphas: Vec<f64> = Vec::with_capacity(k_max);
    let mut betas: Vec<f64> = Vec::with_capacity(k_max);
    let mut reorth_steps = 0;
    let mut restarts = 0;
    let mut converged = false;
    let mut breakdown = false;
    let mut scale = 0.0f64;

    let mut start: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut start);
    v.column_mut(0).copy_from_slice(&start);

    let mut left = vec![0.0; l];
    let mut right = vec![0.0; m];
    let mut k_used = 0;

    for j in 0..k_max {
        // Left step.
        op.apply_into(v.column(j).as_slice(), &mut left, &mut ws)?;
        if j > 0 {
            let b = betas[j - 1];
            axpy(-b, u.column(j - 1).as_slice(), &mut left);
        }
        if reorthogonalize(&mut left, &u, j, cfg.reorth_threshold) {
            reorth_steps += 1;
        }
        let mut alpha = norm(&left);
        scale = scale.max(alpha);
        if alpha < BREAKDOWN_NORM && scale < BREAKDOWN_NORM {
            // Zero operator: nothing to find.
            alphas.push(0.0);
            betas.push(0.0);
            let fresh = unit_orthogonal(&u, j, l, &mut rng).unwrap_or_else(|| e0(l));
            u.column_mut(j).copy_from_slice(&fresh);
            k_used = j + 1;
            breakdown = true;
            break;
        }
        if alpha <= INVARIANT_TOL * scale {
            match unit_orthogonal(&u, j, l, &mut rng) {
                Some(fresh) => {
                    left = fresh;
                    alpha = 0.0;
                    restarts += 1;
                }
                None => {
                    k_used = j;
                    breakdown = true;
                    break;
                }
            }
        } else {
            scale_in_place(&mut left, 1.0 / alpha);
        }
        u.column_mut(j).copy_from_slice(&left);
        alphas.push(alpha);

        // Right step.
        op.apply_t_into(u.column(j).as_slice(), &mut right, &mut ws)?;
        axpy(-alpha, v.column(j).as_slice(), &mut right);
        if reorthogonalize(&mut right, &v, j + 1, cfg.reorth_threshold) {
            reorth_steps += 1;
        }
        let beta = norm(&right);
        scale = scale.max(beta);
        betas.push(beta);
        k_used = j + 1;

        if j >= 2 && relative_change(alphas[j], alphas[j - 1]) < cfg.eps
            && relative_change(betas[j], betas[j - 1]) < cfg.eps
        {
            converged = true;
            break;
        }
        if j + 1 == k_max {
            break;
        }
        if beta < BREAKDOWN_NORM {
            breakdown = true;
            betas[j] = 0.0;
            match unit_orthogonal(&v, j + 1, m, &mut rng) {
                Some(fresh) => {
                    restarts += 1;
                    v.column_mut(j + 1).copy_from_slice(&fresh);
                }
                None => break,
            }
        } else if beta <= INVARIANT_TOL * scale {
            betas[j] = 0.0;
            match unit_orthogonal(&v, j + 1, m, &mut rng) {
                Some(fresh) => {
                    restarts += 1;
                    v.column_mut(j + 1).copy_from_slice(&fresh);
                }
                None => break,
            }
        } else {
            scale_in_place(&mut right, 1.0 / beta);
            v.column_mut(j + 1).copy_from_slice(&right);
        }
    }

    let u = u.columns(0, k_used).into_owned();
    let v = v.columns(0, k_used).into_owned();
    alphas.truncate(k_used);
    betas.truncate(k_used);
    Ok(LanczosRun {
        alphas,
        betas,
        u,
        v,
        k_used,
        converged,
        breakdown,
        reorth_steps,
        restarts,
        rng_seed: cfg.rng_seed,
    })
}

fn relative_change(now: f64, before: f64) -> f64 {
    if now == 0.0 {
        return if before == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (now - before).abs() / now.abs()
}

/// Gram–Schmidt against the first `count` columns of `basis` when any
/// cosine exceeds `threshold`; falls back to all columns (twice) when more
/// than half exceed it. Returns whether anything was done.
fn reorthogonalize(w: &mut [f64], basis: &DMatrix<f64>, count: usize, threshold: f64) -> bool {
    if count == 0 {
        return false;
    }
    let wn = norm(w);
    if wn == 0.0 {
        return false;
    }
    let dots: Vec<f64> = (0..count).map(|i| dot(basis.column(i).as_slice(), w)).collect();
    let flagged: Vec<usize> = (0..count).filter(|&i| dots[i].abs() > threshold * wn).collect();
    if flagged.is_empty() {
        return false;
    }
    if 2 * flagged.len() > count {
        for _ in 0..2 {
            for i in 0..count {
                let col = basis.column(i);
                let d = dot(col.as_slice(), w);
                axpy(-d, col.as_slice(), w);
            }
        }
    } else {
        for &i in &flagged {
            let col = basis.column(i);
            let d = dot(col.as_slice(), w);
            axpy(-d, col.as_slice(), w);
        }
    }
    true
}

/// Random unit vector orthogonal to the first `count` columns of `basis`.
fn unit_orthogonal(
    basis: &DMatrix<f64>,
    count: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    if count >= dim {
        return None;
    }
    for _ in 0..3 {
        let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for i in 0..count {
                let col = basis.column(i);
                let d = dot(col.as_slice(), &w);
                axpy(-d, col.as_slice(), &mut w);
            }
        }
        let n = norm(&w);
        if n > 1e-8 {
            scale_in_place(&mut w, 1.0 / n);
            return Some(w);
        }
    }
    None
}

fn e0(dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale_in_place(x: &mut [f64], s: f64) {
    x.iter_mut().for_each(|v| *v *= s);
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    if n > 0.0 {
        scale_in_place(x, 1.0 / n);
    }
}

/// SVD of a lower-bidiagonal matrix `B = P Σ Qᵀ`.
#[derive(Debug, Clone)]
pub struct BidiagSvd {
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// `rows×k` left rotations, orthonormal columns.
    pub left: DMatrix<f64>,
    /// `k×k` right rotations.
    pub right: DMatrix<f64>,
}

/// Lower-bidiagonal matrix with `alphas` on the diagonal and `betas` on the
/// subdiagonal. `betas.len()` may be `k - 1` (square) or `k` (one extra row).
pub fn lower_bidiagonal(alphas: &[f64], betas: &[f64]) -> Result<DMatrix<f64>> {
    let k = alphas.len();
    if k == 0 {
        return Err(Error::invalid("alphas", "need at least one diagonal entry"));
    }
    let rows = match betas.len() {
        b if b + 1 == k => k,
        b if b == k => k + 1,
        b => {
            return Err(Error::invalid(
                "betas",
                format!("{b} subdiagonal entries do not fit {k} diagonal entries"),
            ))
        }
    };
    let mut b = DMatrix::zeros(rows, k);
    for (j, &a) in alphas.iter().enumerate() {
        b[(j, j)] = a;
    }
    for (j, &beta) in betas.iter().enumerate() {
        b[(j + 1, j)] = beta;
    }
    Ok(b)
}

/// Singular values and rotations of the lower-bidiagonal matrix built from
/// `alphas` and `betas`, by one-sided Jacobi.
pub fn bidiag_svd(alphas: &[f64], betas: &[f64]) -> Result<BidiagSvd> {
    if alphas.iter().chain(betas).any(|x| !x.is_finite()) {
        return Err(Error::invalid("bidiagonal", "non-finite entry"));
    }
    let b = lower_bidiagonal(alphas, betas)?;
    Ok(jacobi_svd(b))
}

/// One-sided Jacobi SVD of a tall (or square) matrix.
fn jacobi_svd(mut w: DMatrix<f64>) -> BidiagSvd {
    let (rows, k) = w.shape();
    let mut q = DMatrix::<f64>::identity(k, k);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for r in (p + 1)..k {
                let a = w.column(p).norm_squared();
                let b = w.column(r).norm_squared();
                let c = w.column(p).dot(&w.column(r));
                if c == 0.0 || c.abs() <= 1e-15 * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut w, p, r, cs, sn);
                rotate_columns(&mut q, p, r, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = (0..k).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let singular_values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut left = DMatrix::<f64>::zeros(rows, k);
    let mut right = DMatrix::<f64>::zeros(k, k);
    let tiny = singular_values.first().copied().unwrap_or(0.0) * 1e-300_f64.max(f64::EPSILON * 1e-3);
    for (dst, &src) in order.iter().enumerate() {
        right.set_column(dst, &q.column(src));
        if norms[src] > tiny && norms[src] > 0.0 {
            left.set_column(dst, &(w.column(src) / norms[src]));
        }
    }
    complete_orthonormal(&mut left, &singular_values, tiny);
    BidiagSvd {
        singular_values,
        left,
        right,
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, r: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, r)];
        m[(i, p)] = cs * x - sn * y;
        m[(i, r)] = sn * x + cs * y;
    }
}

/// Fills columns belonging to (numerically) zero singular values with unit
/// vectors orthogonal to the rest.
fn complete_orthonormal(left: &mut DMatrix<f64>, sv: &[f64], tiny: f64) {
    let rows = left.nrows();
    for j in 0..left.ncols() {
        if sv[j] > tiny && sv[j] > 0.0 {
            continue;
        }
        for e in 0..rows {
            let mut cand = DVector::<f64>::zeros(rows);
            cand[e] = 1.0;
            for _ in 0..2 {
                for i in 0..left.ncols() {
                    if i == j || left.column(i).norm_squared() == 0.0 {
                        continue;
                    }
                    let d = left.column(i).dot(&cand);
                    cand -= left.column(i) * d;
                }
            }
            let n = cand.norm();
            if n > 1e-8 {
                left.set_column(j, &(cand / n));
                break;
            }
        }
    }
}

/// Smallest `k` whose leading `k` squared singular values hold at least
/// `threshold` of the total energy.
pub fn select_order(singular_values: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("order_threshold", format!("{threshold} must lie in (0, 1]")));
    }
    if singular_values.is_empty() {
        return Err(Error::NoSignalEnergy);
    }
    if singular_values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("singular_values", "must be finite and >= 0"));
    }
    let top = singular_values[0];
    if singular_values
        .windows(2)
        .any(|w| w[1] > w[0] + 1e-12 * top.max(f64::MIN_POSITIVE))
    {
        return Err(Error::invalid("singular_values", "must be nonincreasing"));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::NoSignalEnergy);
    }
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= threshold {
            return Ok(i + 1);
        }
    }
    Ok(singular_values.len())
}

/// How the model order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRule {
    /// Cumulative-energy threshold over the Krylov singular values.
    Energy(f64),
    /// Known number of complex exponentials.
    Fixed(usize),
}

impl Default for OrderRule {
    fn default() -> Self {
        OrderRule::Energy(0.9)
    }
}

impl OrderRule {
    pub fn select(&self, singular_values: &[f64]) -> Result<usize> {
        match *self {
            OrderRule::Energy(t) => select_order(singular_values, t),
            OrderRule::Fixed(p) => {
                if p == 0 {
                    return Err(Error::EmptySubspace);
                }
                if singular_values.iter().all(|s| *s == 0.0) {
                    return Err(Error::NoSignalEnergy);
                }
                Ok(p.min(singular_values.len()))
            }
        }
    }
}

/// Lanczos output together with the SVD of `B_k` and the chosen order.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `k×k` rotation taking `U_k` to left Ritz vectors.
    pub left_rotation: DMatrix<f64>,
    /// `k×k` rotation taking `V_k` to right Ritz vectors.
    pub right_rotation: DMatrix<f64>,
    pub k_used: usize,
    pub p: usize,
    pub converged: bool,
    pub breakdown: bool,
    pub rng_seed: u64,
}

/// Signal basis plus a flag raised when the Krylov space left no noise
/// dimensions (`p == k_used`).
#[derive(Debug, Clone)]
pub struct SignalBasis {
    pub basis: DMatrix<f64>,
    pub no_noise_dimensions: bool,
}

pub fn decompose<O: LinearOperator>(
    op: &O,
    cfg: &LanczosConfig,
    rule: OrderRule,
) -> Result<SubspaceDecomposition> {
    let run = lanczos_bidiag(op, cfg)?;
    from_run(run, rule)
}

pub fn from_run(run: LanczosRun, rule: OrderRule) -> Result<SubspaceDecomposition> {
    let k = run.k_used;
    if k == 0 {
        return Err(Error::NoSignalEnergy);
    }
    // B_k is upper bidiagonal; its transpose is the lower form.
    let svd = bidiag_svd(&run.alphas, &run.betas[..k - 1])?;
    let p = rule.select(&svd.singular_values)?;
    Ok(SubspaceDecomposition {
        alphas: run.alphas,
        betas: run.betas,
        u: run.u,
        v: run.v,
        singular_values: svd.singular_values,
        left_rotation: svd.right,
        right_rotation: svd.left,
        k_used: k,
        p,
        converged: run.converged,
        breakdown: run.breakdown,
        rng_seed: run.rng_seed,
    })
}

impl SubspaceDecomposition {
    /// First `count` left Ritz vectors (`L×count`).
    pub fn left_vectors(&self, count: usize) -> DMatrix<f64> {
        let c = count.min(self.k_used);
        &self.u * self.left_rotation.columns(0, c)
    }

    /// First `count` right Ritz vectors (`M×count`).
    pub fn right_vectors(&self, count: usize) -> DMatrix<f64> {
        let c = count.min(self.k_used);
        &self.v * self.right_rotation.columns(0, c)
    }

    /// Dominant-`p` right singular subspace (`M×p`).
    pub fn signal_basis(&self) -> SignalBasis {
        SignalBasis {
            basis: self.right_vectors(self.p),
            no_noise_dimensions: self.p >= self.k_used,
        }
    }

    /// Dominant-`p` left singular subspace (`L×p`).
    pub fn left_signal_basis(&self) -> SignalBasis {
        SignalBasis {
            basis: self.left_vectors(self.p),
            no_noise_dimensions: self.p >= self.k_used,
        }
    }

    /// Largest `|UᵀU − I|` and `|VᵀV − I|` entries.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        (gram_error(&self.u), gram_error(&self.v))
    }
}

pub(crate) fn gram_error(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Noise variance and signal power inferred from the split of Hankel energy
/// between the signal subspace and its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub noise_var: f64,
    pub signal_power: f64,
    pub snr_linear: f64,
}

/// With `‖H‖²_F` split into the `p` dominant squared singular values and the
/// remainder, white noise of variance σ² leaves roughly `σ²(L−p)(M−p)` in
/// the remainder and `σ²·p(L+M−p)` inside the signal subspace.
pub fn estimate_noise(
    singular_values: &[f64],
    p: usize,
    frobenius_sq: f64,
    rows: usize,
    cols: usize,
) -> NoiseEstimate {
    let p = p.min(singular_values.len()).min(rows).min(cols);
    let signal_energy: f64 = singular_values[..p].iter().map(|s| s * s).sum();
    let residual = (frobenius_sq - signal_energy).max(0.0);
    let dof = ((rows - p) * (cols - p)).max(1) as f64;
    let noise_var = residual / dof;
    let cells = (rows * cols) as f64;
    let leak = noise_var * (p * (rows + cols - p)) as f64;
    let signal_power = ((signal_energy - leak) / cells).max(0.0);
    let snr_linear = if noise_var > 0.0 {
        signal_power / noise_var
    } else if signal_power > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    NoiseEstimate {
        noise_var,
        signal_power,
        snr_linear,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::HankelOperator;
    use crate::signal::{generate, SignalSpec, SinusoidSpec};

    fn tone_frame(n: usize, f: f64, fs: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (std::f64::consts::TAU * f * i as f64 / fs + 0.3).cos())
            .collect()
    }

    #[test]
    fn constant_signal_is_rank_one() {
        let op = HankelOperator::new(vec![1.0; 9], 3).unwrap();
        let dec = decompose(&op, &LanczosConfig::default(), OrderRule::default()).unwrap();
        assert!((dec.singular_values[0] - 21f64.sqrt()).abs() < 1e-10);
        assert!(dec.singular_values[1..].iter().all(|&s| s <= 1e-8));
        assert_eq!(dec.p, 1);
        let b = dec.signal_basis().basis;
        let corr = b.column(0).sum().abs() / (7f64).sqrt();
        assert!(corr >= 0.999, "corr {corr}");
    }

    #[test]
    fn single_real_tone_is_rank_two() {
        let x = tone_frame(120, 1000.0, 51_200.0);
        let op = HankelOperator::new(x, 40).unwrap();
        let dec = decompose(&op, &LanczosConfig::default(), OrderRule::default()).unwrap();
        let s1 = dec.singular_values[0];
        let above = dec.singular_values.iter().filter(|&&s| s > 1e-8 * s1).count();
        assert_eq!(above, 2, "{:?}", dec.singular_values);
    }

    #[test]
    fn bidiag_examples() {
        let s = bidiag_svd(&[3.0], &[4.0]).unwrap();
        assert!((s.singular_values[0] - 5.0).abs() < 1e-14);
        let s = bidiag_svd(&[1.0, -4.0, 2.5], &[0.0, 0.0]).unwrap();
        assert_eq!(s.singular_values, vec![4.0, 2.5, 1.0]);
        assert!(bidiag_svd(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn bidiag_rotations_reconstruct() {
        let alphas = [2.0, 1.5, 0.7, 3.1, 0.01];
        let betas = [0.3, -1.2, 0.8, 2.0];
        let s = bidiag_svd(&alphas, &betas).unwrap();
        let b = lower_bidiagonal(&alphas, &betas).unwrap();
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(s.singular_values.clone()));
        let rebuilt = &s.left * sigma * s.right.transpose();
        assert!((rebuilt - b).amax() < 1e-12);
        assert!(gram_error(&s.left) < 1e-12);
        assert!(gram_error(&s.right) < 1e-12);
    }

    #[test]
    fn order_examples() {
        assert_eq!(select_order(&[1.0, 0.0, 0.0], 0.9).unwrap(), 1);
        assert_eq!(select_order(&[3.0, 3.0, 3.0, 1e-6], 0.9).unwrap(), 3);
        assert!(matches!(select_order(&[0.0, 0.0], 0.9), Err(Error::NoSignalEnergy)));
        assert!(select_order(&[1.0, 2.0], 0.9).is_err());
    }

    #[test]
    fn fixed_order_rule() {
        assert_eq!(OrderRule::Fixed(4).select(&[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), 4);
        assert_eq!(OrderRule::Fixed(9).select(&[5.0, 4.0]).unwrap(), 2);
        assert!(matches!(OrderRule::Fixed(0).select(&[1.0]), Err(Error::EmptySubspace)));
    }

    #[test]
    fn zero_frame_has_no_energy() {
        let op = HankelOperator::new(vec![0.0; 30], 10).unwrap();
        let r = decompose(&op, &LanczosConfig::default(), OrderRule::default());
        assert!(matches!(r, Err(Error::NoSignalEnergy)));
    }

    #[test]
    fn bases_stay_orthonormal() {
        let spec = SignalSpec {
            components: vec![
                SinusoidSpec::new(1197.0, 1.0, 0.1),
                SinusoidSpec::new(2394.0, 0.5, 1.0),
                SinusoidSpec::new(3591.0, 0.3, 2.0),
            ],
            noise_std: 0.05,
            fs_hz: 51_200.0,
            duration_s: 0.016,
            rng_seed: 3,
        };
        let x = generate(&spec).unwrap();
        let op = HankelOperator::new(x, 273).unwrap();
        let cfg = LanczosConfig {
            k_max: 40,
            ..LanczosConfig::default()
        };
        let dec = decompose(&op, &cfg, OrderRule::default()).unwrap();
        let (eu, ev) = dec.orthonormality_error();
        assert!(eu <= 1e-8 && ev <= 1e-8, "{eu} {ev}");
    }

    #[test]
    fn ritz_residuals_are_small() {
        let spec = SignalSpec {
            components: vec![SinusoidSpec::new(1197.0, 1.0, 0.1), SinusoidSpec::new(5000.0, 0.4, 2.0)],
            noise_std: 0.1,
            fs_hz: 51_200.0,
            duration_s: 0.016,
            rng_seed: 9,
        };
        let x = generate(&spec).unwrap();
        let op = HankelOperator::new(x, 273).unwrap();
        let dec = decompose(&op, &LanczosConfig::default(), OrderRule::default()).unwrap();
        let us = dec.left_vectors(dec.p);
        let vs = dec.right_vectors(dec.p);
        let s1 = dec.singular_values[0];
        for i in 0..dec.p {
            let hv = op.hv(vs.column(i).as_slice()).unwrap();
            let r: f64 = hv
                .iter()
                .zip(us.column(i).iter())
                .map(|(a, b)| (a - dec.singular_values[i] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r <= 1e-5 * s1, "residual {r}");
        }
    }

    #[test]
    fn noise_estimate_tracks_snr() {
        let sigma = 0.5;
        let a = (2.0 * 10.0 * sigma * sigma as f64).sqrt();
        let spec = SignalSpec {
            components: vec![SinusoidSpec::new(1197.0, a, 0.0)],
            noise_std: sigma,
            fs_hz: 51_200.0,
            duration_s: 0.016,
            rng_seed: 21,
        };
        let x = generate(&spec).unwrap();
        let op = HankelOperator::new(x, 273).unwrap();
        let dec = decompose(&op, &LanczosConfig::default(), OrderRule::Fixed(2)).unwrap();
        let est = estimate_noise(&dec.singular_values, 2, op.frobenius_sq(), op.rows(), op.cols());
        assert!(est.snr_linear > 5.0 && est.snr_linear < 20.0, "{est:?}");
        assert!((est.noise_var / (sigma * sigma) - 1.0).abs() < 0.2);
    }

    proptest::proptest! {
        #[test]
        fn energy_ratio_is_monotone(vals in proptest::collection::vec(0.0f64..10.0, 1..20)) {
            let mut v = vals.clone();
            v.sort_by(|a, b| b.total_cmp(a));
            proptest::prop_assume!(v[0] > 0.0);
            let mut last = 0usize;
            for t in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0] {
                let p = select_order(&v, t).unwrap();
                proptest::prop_assert!(p >= last);
                proptest::prop_assert!(p >= 1 && p <= v.len());
                last = p;
            }
        }
    }
}
