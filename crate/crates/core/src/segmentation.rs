//! Change-point extraction, sparsity supports, evaluation metrics and a KKT
//! residual for fitted covariance paths.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{block_ranges, CovariancePath, ObservationSeries, Segmentation, WeightSet};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, symmetric_eigen, SymMatrix};

/// Ordered off-diagonal index pairs `(u, v)`, `u != v`, zero-based.
pub type Support = BTreeSet<(usize, usize)>;

/// Default relative threshold for detecting breaks from a path alone.
pub const DEFAULT_BREAK_TOL: f64 = 1e-6;
/// Default relative threshold for detecting nonzero entries from a matrix alone.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-8;

/// One-based break indices `t` in `2..=T`.
///
/// With `d` supplied (entry `k` is `D_{k+2}`), `t` is a break exactly when
/// `D_t` has a nonzero entry. Otherwise `t` is a break when
/// `‖Θ_t - Θ_{t-1}‖_F > rel_tol·(1 + ‖Θ_{t-1}‖_F)`.
pub fn break_indices(theta: &CovariancePath, d: Option<&CovariancePath>, rel_tol: f64) -> Vec<usize> {
    let len = theta.len();
    match d {
        Some(d) => (0..d.len())
            .filter(|&k| d.block(k).iter().any(|&x| x != 0.0))
            .map(|k| k + 2)
            .collect(),
        None => (1..len)
            .filter(|&i| {
                let (prev, next) = (theta.block(i - 1), theta.block(i));
                let diff: f64 = next.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum();
                diff.sqrt() > rel_tol * (1.0 + frobenius_norm(prev))
            })
            .map(|i| i + 1)
            .collect(),
    }
}

/// Breaks plus one covariance per block.
///
/// A block's covariance is the path value at its start when the path is
/// exactly constant over the block, and the time average otherwise.
pub fn extract_changepoints(theta: &CovariancePath, d: Option<&CovariancePath>, rel_tol: f64) -> Segmentation {
    let breakpoints = break_indices(theta, d, rel_tol);
    let block_covs = block_ranges(&breakpoints, theta.len())
        .into_iter()
        .map(|range| block_average(theta, range))
        .collect();
    Segmentation {
        breakpoints,
        block_covs,
    }
}

fn block_average(theta: &CovariancePath, range: std::ops::Range<usize>) -> SymMatrix {
    let first = theta.block(range.start);
    if range.clone().all(|i| theta.block(i) == first) {
        return theta.matrix(range.start);
    }
    let n = range.len() as f64;
    let mut acc = vec![0.0; first.len()];
    for i in range {
        for (a, x) in acc.iter_mut().zip(theta.block(i)) {
            *a += x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    SymMatrix::from_row_slice(theta.dim(), &acc).expect("average of finite symmetric blocks")
}

/// Nonzero off-diagonal pattern.
///
/// With `upsilon` supplied the exact nonzeros of that block are used;
/// otherwise entries with `|S_{uv}| > 1e-8·(1 + ‖S‖_F)`.
pub fn support_of(s: &SymMatrix, upsilon: Option<&[f64]>) -> Support {
    let p = s.dim();
    let threshold = DEFAULT_SUPPORT_TOL * (1.0 + s.frobenius_norm());
    let mut out = Support::new();
    for u in 0..p {
        for v in 0..p {
            if u == v {
                continue;
            }
            let nonzero = match upsilon {
                Some(ups) => ups[u * p + v] != 0.0,
                None => s.get(u, v).abs() > threshold,
            };
            if nonzero {
                out.insert((u, v));
            }
        }
    }
    out
}

/// Per-time supports of a fitted path, from `Υ` when available.
pub fn path_supports(theta: &CovariancePath, upsilon: Option<&CovariancePath>) -> Vec<Support> {
    (0..theta.len())
        .map(|i| support_of(&theta.matrix(i), upsilon.map(|u| u.block(i))))
        .collect()
}

/// Expands one support per block into one support per time point.
pub fn expand_supports(breakpoints: &[usize], block_supports: &[Support], len: usize) -> Vec<Support> {
    let mut out = Vec::with_capacity(len);
    for (range, support) in block_ranges(breakpoints, len).into_iter().zip(block_supports) {
        out.extend(std::iter::repeat_n(support.clone(), range.len()));
    }
    out
}

/// How to score the case where exactly one break set is empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmptySetConvention {
    /// `100·max(nonempty)/T`, in the same percent-of-T units as the main formula.
    #[default]
    Scaled,
    /// `max(nonempty)`, the raw time index.
    Literal,
}

/// `sup_{b∈B} inf_{a∈A} |a - b|` for nonempty sets.
fn directed(a: &[usize], b: &[usize]) -> usize {
    b.iter()
        .map(|&y| a.iter().map(|&x| x.abs_diff(y)).min().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// `100·max(h(est, truth), h(truth, est))/T`, with the empty-set conventions.
pub fn hausdorff(est: &[usize], truth: &[usize], len: usize) -> f64 {
    hausdorff_with(est, truth, len, EmptySetConvention::Scaled)
}

pub fn hausdorff_with(est: &[usize], truth: &[usize], len: usize, convention: EmptySetConvention) -> f64 {
    let scale = 100.0 / len as f64;
    match (est.is_empty(), truth.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => {
            let largest = *est.iter().chain(truth).max().expect("one set is nonempty") as f64;
            match convention {
                EmptySetConvention::Scaled => scale * largest,
                EmptySetConvention::Literal => largest,
            }
        }
        (false, false) => scale * directed(est, truth).max(directed(truth, est)) as f64,
    }
}

/// Confusion counts of off-diagonal support recovery.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SupportCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl SupportCounts {
    /// `2TP / (2TP + FN + FP)`, defined as 1 when `TP = FP = FN = 0`.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fn_ + self.fp;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    /// `(TP + TN) / (TP + TN + FP + FN)`, defined as 1 on an empty comparison.
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.tn + self.fp + self.fn_;
        if total == 0 {
            1.0
        } else {
            (self.tp + self.tn) as f64 / total as f64
        }
    }
}

impl std::ops::Add for SupportCounts {
    type Output = SupportCounts;

    fn add(self, o: SupportCounts) -> SupportCounts {
        SupportCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Which entries support recovery is scored on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportScope {
    /// Ordered off-diagonal pairs only.
    #[default]
    OffDiagonal,
    /// Every entry, the diagonal included.
    AllEntries,
}

/// Confusion counts of the nonzero diagonal entries over all time points.
pub fn diagonal_counts(est: &CovariancePath, truth: &CovariancePath) -> Result<SupportCounts> {
    if est.len() != truth.len() || est.dim() != truth.dim() {
        return Err(Error::Dimension("paths differ in shape".into()));
    }
    let mut c = SupportCounts::default();
    for i in 0..est.len() {
        for u in 0..est.dim() {
            match (est.get(i, u, u) != 0.0, truth.get(i, u, u) != 0.0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// Counts over all time points and ordered off-diagonal pairs of a `p × p` matrix.
pub fn support_counts(est: &[Support], truth: &[Support], p: usize) -> Result<SupportCounts> {
    if est.len() != truth.len() {
        return Err(Error::Dimension("support sequences differ in length".into()));
    }
    let mut c = SupportCounts::default();
    for (e, t) in est.iter().zip(truth) {
        let tp = e.intersection(t).count();
        let fp = e.len() - tp;
        let fn_ = t.len() - tp;
        c.tp += tp;
        c.fp += fp;
        c.fn_ += fn_;
        c.tn += p * (p - 1) - tp - fp - fn_;
    }
    Ok(c)
}

/// `(F₁, accuracy)` of the per-time supports.
pub fn f1_and_accuracy(est: &[Support], truth: &[Support], p: usize) -> Result<(f64, f64)> {
    let c = support_counts(est, truth, p)?;
    Ok((c.f1(), c.accuracy()))
}

/// `√(Σ_t ‖Θ̂_t - Θ*_t‖_F² / (p²T))`.
pub fn rmse(est: &CovariancePath, truth: &CovariancePath) -> Result<f64> {
    if est.len() != truth.len() || est.dim() != truth.dim() {
        return Err(Error::Dimension("paths differ in shape".into()));
    }
    let sq: f64 = est
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let n = (est.dim() * est.dim() * est.len()) as f64;
    Ok((sq / n).sqrt())
}

/// The four evaluation metrics plus the break count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub nb: usize,
    pub d_h: f64,
    pub f1: f64,
    pub acc: f64,
    pub rmse: f64,
}

/// Scores a fit against the truth, with supports over off-diagonal pairs.
pub fn evaluate(
    est_breaks: &[usize],
    est_supports: &[Support],
    est_path: &CovariancePath,
    true_breaks: &[usize],
    true_supports: &[Support],
    true_path: &CovariancePath,
) -> Result<MetricsRecord> {
    evaluate_with(
        est_breaks,
        est_supports,
        est_path,
        true_breaks,
        true_supports,
        true_path,
        SupportScope::OffDiagonal,
    )
}

/// [`evaluate`] with a choice of support scope. The diagonal pattern for
/// [`SupportScope::AllEntries`] is read from the two paths.
pub fn evaluate_with(
    est_breaks: &[usize],
    est_supports: &[Support],
    est_path: &CovariancePath,
    true_breaks: &[usize],
    true_supports: &[Support],
    true_path: &CovariancePath,
    scope: SupportScope,
) -> Result<MetricsRecord> {
    let mut counts = support_counts(est_supports, true_supports, est_path.dim())?;
    if scope == SupportScope::AllEntries {
        counts = counts + diagonal_counts(est_path, true_path)?;
    }
    let (f1, acc) = (counts.f1(), counts.accuracy());
    Ok(MetricsRecord {
        nb: est_breaks.len(),
        d_h: hausdorff(est_breaks, true_breaks, est_path.len()),
        f1,
        acc,
        rmse: rmse(est_path, true_path)?,
    })
}

/// Classification thresholds of [`kkt_residual`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktOptions {
    /// Eigenvalue floor of the feasible set. `None` treats every `Θ_t` as
    /// interior, so no cone multiplier is available.
    pub epsilon: Option<f64>,
    /// Entries with `|Θ_{uv,t}| <= zero_tol·(1 + ‖Θ_t‖_F)` may take any
    /// subgradient in `[-1, 1]`.
    pub zero_tol: f64,
    /// Increments with `‖Θ_t - Θ_{t-1}‖_F <= break_tol·(1 + ‖Θ_{t-1}‖_F)` may
    /// take any fusion subgradient in the unit ball.
    pub break_tol: f64,
    /// Eigenvalues of `Θ_t` within `active_tol` of the floor count as active.
    pub active_tol: f64,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            zero_tol: 1e-4,
            break_tol: 1e-4,
            active_tol: 1e-4,
        }
    }
}

/// Largest Frobenius norm of the cumulative stationarity residual.
///
/// For `t = T, …, 1` the tail sum
/// `R_t = Σ_{r≥t} [(Θ_r - S_r)/T + λ₁ ξ_{1r} ⊙ E_{1r} - M_r]` must equal
/// `-λ₂ξ_{2t} E_{2t}` for `t ≥ 2` and vanish at `t = 1`, where `E_1` and `E_2`
/// are subgradients of the lasso and fusion terms and `M_r ⪰ 0` is a cone
/// multiplier supported on the eigenvectors of `Θ_r` at the floor. Free
/// subgradients (zero entries, non-break increments) and the cone multiplier
/// are chosen greedily to steer `R_t` toward the next fixed target; the
/// residual at a non-break is the distance of `R_t` to the ball of radius
/// `λ₂ξ_{2t}`.
pub fn kkt_residual(
    theta: &CovariancePath,
    data: &ObservationSeries,
    weights: &WeightSet,
    lambda1: f64,
    lambda2: f64,
    options: &KktOptions,
) -> Result<f64> {
    let (len, p) = (theta.len(), theta.dim());
    if data.len() != len || data.dim() != p || weights.len() != len || weights.dim() != p {
        return Err(Error::Dimension("path, data and weights must agree in shape".into()));
    }
    let outer = data.outer_products();
    let pp = p * p;
    let big_t = len as f64;

    // Fusion subgradient targets: Some(direction) at breaks, None elsewhere.
    let mut hard: Vec<Option<Vec<f64>>> = vec![None; len];
    for i in 1..len {
        let (prev, next) = (theta.block(i - 1), theta.block(i));
        let diff: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
        let norm = frobenius_norm(&diff);
        if norm > options.break_tol * (1.0 + frobenius_norm(prev)) {
            hard[i] = Some(diff.iter().map(|x| -lambda2 * weights.fusion()[i - 1] * x / norm).collect());
        }
    }
    // The aim at time i is the target of the nearest fixed constraint at or before i.
    let mut aims: Vec<Vec<f64>> = Vec::with_capacity(len);
    let mut current = vec![0.0; pp];
    for target in hard.iter() {
        if let Some(target) = target {
            current = target.clone();
        }
        aims.push(current.clone());
    }

    let mut tail = vec![0.0; pp];
    let mut worst: f64 = 0.0;
    for i in (0..len).rev() {
        let (th, s, xi) = (theta.block(i), outer.block(i), weights.lasso().block(i));
        let aim = &aims[i];
        let zero_level = options.zero_tol * (1.0 + frobenius_norm(th));

        let mut base = tail.clone();
        let mut free = Vec::new();
        for u in 0..p {
            for v in 0..p {
                let k = u * p + v;
                base[k] += (th[k] - s[k]) / big_t;
                if u != v && lambda1 * xi[k] > 0.0 {
                    if th[k].abs() <= zero_level {
                        free.push(k);
                    } else {
                        base[k] += lambda1 * xi[k] * th[k].signum();
                    }
                }
            }
        }

        let active = match options.epsilon {
            Some(eps) => active_eigenvectors(th, p, eps + options.active_tol)?,
            None => Vec::new(),
        };

        // Alternate between the box-constrained lasso subgradients and the
        // cone multiplier; each step is an exact partial minimisation.
        let mut cone = vec![0.0; pp];
        let mut lasso = vec![0.0; pp];
        let rounds = if active.is_empty() || free.is_empty() { 1 } else { 25 };
        for _ in 0..rounds {
            for &k in &free {
                let want = aim[k] - (base[k] - cone[k]);
                lasso[k] = (want / (lambda1 * xi[k])).clamp(-1.0, 1.0) * lambda1 * xi[k];
            }
            if !active.is_empty() {
                let gap: Vec<f64> = (0..pp).map(|k| base[k] + lasso[k] - aim[k]).collect();
                cone = cone_multiplier(&gap, &active, p);
            }
        }
        for k in 0..pp {
            tail[k] = base[k] + lasso[k] - cone[k];
        }

        let residual = if i == 0 {
            frobenius_norm(&tail)
        } else if hard[i].is_some() {
            let r: Vec<f64> = tail.iter().zip(aim).map(|(a, b)| a - b).collect();
            frobenius_norm(&r)
        } else {
            (frobenius_norm(&tail) - lambda2 * weights.fusion()[i - 1]).max(0.0)
        };
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Orthonormal eigenvectors of `th` with eigenvalue at most `level`, flattened.
fn active_eigenvectors(th: &[f64], p: usize, level: f64) -> Result<Vec<Vec<f64>>> {
    let eig = symmetric_eigen(th, p)?;
    Ok((0..p)
        .filter(|&k| eig.eigenvalues[k] <= level)
        .map(|k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect())
}

/// `Q N Qᵀ` with `N = P_{⪰0}(Qᵀ G Q)`, the closest PSD matrix supported on
/// the span of the columns `Q` to `G`.
fn cone_multiplier(g: &[f64], q: &[Vec<f64>], p: usize) -> Vec<f64> {
    let r = q.len();
    let mut small = vec![0.0; r * r];
    for a in 0..r {
        for b in 0..r {
            let mut acc = 0.0;
            for u in 0..p {
                for v in 0..p {
                    acc += q[a][u] * g[u * p + v] * q[b][v];
                }
            }
            small[a * r + b] = acc;
        }
    }
    let mut projected = vec![0.0; r * r];
    crate::linalg::project_psd_slice(&small, r, 0.0, &mut projected).expect("finite reduced matrix");
    let mut out = vec![0.0; p * p];
    for u in 0..p {
        for v in 0..p {
            let mut acc = 0.0;
            for a in 0..r {
                for b in 0..r {
                    acc += q[a][u] * projected[a * r + b] * q[b][v];
                }
            }
            out[u * p + v] = acc;
        }
    }
    out
}
