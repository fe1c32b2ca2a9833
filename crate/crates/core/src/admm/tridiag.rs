//! The Θ-update: assembling the right-hand side Ψ and solving the
//! `p(p+1)/2` independent tridiagonal systems, one per coordinate pair.

use super::state::AdmmState;
use crate::domain::CovariancePath;
use crate::par::Execution;

/// Right-hand side of the Θ-stationarity system:
/// `Ψ_t = S_t/T + A_t + Y_t - Z_{t+1} + Z_t + β(V_t + Υ_t - D_{t+1} + D_t)`,
/// where `S_t = X_t X_tᵀ` is passed in as `outer`.
pub fn build_psi(state: &AdmmState, outer: &CovariancePath, beta: f64) -> CovariancePath {
    let len = outer.len();
    let inv_len = 1.0 / len as f64;
    let mut psi = CovariancePath::zeros(len, outer.dim());
    for i in 0..len {
        let out = psi.block_mut(i);
        let (s, a, y, v, ups) = (
            outer.block(i),
            state.a.block(i),
            state.y.block(i),
            state.v.block(i),
            state.upsilon.block(i),
        );
        for k in 0..out.len() {
            out[k] = s[k] * inv_len + a[k] + y[k] + beta * (v[k] + ups[k]);
        }
        // Z_t and D_t exist for t >= 2, stored at i - 1.
        if i >= 1 {
            let (z, d) = (state.z.block(i - 1), state.d.block(i - 1));
            for k in 0..out.len() {
                out[k] += z[k] + beta * d[k];
            }
        }
        // Z_{t+1} and D_{t+1} exist for t <= T - 1, stored at i.
        if i + 1 < len {
            let (z, d) = (state.z.block(i), state.d.block(i));
            for k in 0..out.len() {
                out[k] -= z[k] + beta * d[k];
            }
        }
    }
    psi
}

/// Factored constant-coefficient tridiagonal matrix with off-diagonal `-β`.
///
/// Rows with two neighbours carry `interior` on the diagonal, rows with one
/// carry `boundary`; a single-row system has diagonal `lone`.
#[derive(Clone, Debug)]
pub struct TridiagonalSystem {
    len: usize,
    off: f64,
    // Thomas sweep coefficients: modified super-diagonal and pivot reciprocals.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(len: usize, beta: f64, boundary: f64, interior: f64, lone: f64) -> Self {
        let off = -beta;
        let diag = |i: usize| {
            if len == 1 {
                lone
            } else if i == 0 || i + 1 == len {
                boundary
            } else {
                interior
            }
        };
        let mut c_prime = vec![0.0; len];
        let mut inv_pivot = vec![0.0; len];
        let mut prev_c = 0.0;
        for i in 0..len {
            let pivot = diag(i) - if i > 0 { off * prev_c } else { 0.0 };
            inv_pivot[i] = 1.0 / pivot;
            prev_c = if i + 1 < len { off / pivot } else { 0.0 };
            c_prime[i] = prev_c;
        }
        Self {
            len,
            off,
            c_prime,
            inv_pivot,
        }
    }

    /// The system for coordinate `(u, v)` of the Θ-update.
    pub fn for_coordinate(len: usize, beta: f64, off_diagonal: bool) -> Self {
        let (b, c) = theta_coefficients(len, beta, off_diagonal);
        let extra = if off_diagonal { 2.0 * beta } else { beta };
        Self::new(len, beta, b, c, extra + 1.0 / len as f64)
    }

    /// Solves in place by a forward elimination and a backward sweep.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.len);
        let n = self.len;
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// Boundary and interior diagonal coefficients `(b, c)` for a coordinate pair:
/// `(3β + 1/T, 4β + 1/T)` off the diagonal and `(2β + 1/T, 3β + 1/T)` on it.
pub fn theta_coefficients(len: usize, beta: f64, off_diagonal: bool) -> (f64, f64) {
    let inv = 1.0 / len as f64;
    if off_diagonal {
        (3.0 * beta + inv, 4.0 * beta + inv)
    } else {
        (2.0 * beta + inv, 3.0 * beta + inv)
    }
}

/// Solves the Θ-update for every coordinate pair `u <= v` and mirrors the result.
pub fn solve_theta_block(psi: &CovariancePath, beta: f64) -> CovariancePath {
    solve_theta_block_with(psi, beta, Execution::Sequential)
}

pub fn solve_theta_block_with(psi: &CovariancePath, beta: f64, exec: Execution) -> CovariancePath {
    let (len, p) = (psi.len(), psi.dim());
    let diag_sys = TridiagonalSystem::for_coordinate(len, beta, false);
    let off_sys = TridiagonalSystem::for_coordinate(len, beta, true);
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|u| (u..p).map(move |v| (u, v))).collect();
    let src = psi.as_slice();
    let pp = p * p;

    let solve_pair = |(u, v): (usize, usize), column: &mut [f64]| {
        let k = u * p + v;
        for (i, c) in column.iter_mut().enumerate() {
            *c = src[i * pp + k];
        }
        if u == v {
            diag_sys.solve_in_place(column);
        } else {
            off_sys.solve_in_place(column);
        }
    };

    if exec.is_parallel() {
        let columns = exec.map(pairs.len(), |j| {
            let mut column = vec![0.0; len];
            solve_pair(pairs[j], &mut column);
            column
        });
        let mut theta = CovariancePath::zeros(len, p);
        let out = theta.as_mut_slice();
        for (&(u, v), column) in pairs.iter().zip(&columns) {
            scatter(out, column, p, u, v);
        }
        theta
    } else {
        sweep_all(psi, &diag_sys, &off_sys)
    }
}

/// Runs the Thomas sweeps for every entry at once, walking the path in
/// storage order. Mirrored entries see identical arithmetic, so symmetry is
/// preserved bit for bit.
fn sweep_all(psi: &CovariancePath, diag_sys: &TridiagonalSystem, off_sys: &TridiagonalSystem) -> CovariancePath {
    let (len, p) = (psi.len(), psi.dim());
    let pp = p * p;
    let mut theta = psi.clone();
    if len == 0 {
        return theta;
    }
    let is_diag: Vec<bool> = (0..pp).map(|k| k / p == k % p).collect();
    let pick = |k: usize| if is_diag[k] { diag_sys } else { off_sys };
    let out = theta.as_mut_slice();
    for k in 0..pp {
        out[k] *= pick(k).inv_pivot[0];
    }
    for i in 1..len {
        let (head, tail) = out.split_at_mut(i * pp);
        let prev = &head[(i - 1) * pp..];
        for k in 0..pp {
            let sys = pick(k);
            tail[k] = (tail[k] - sys.off * prev[k]) * sys.inv_pivot[i];
        }
    }
    for i in (0..len - 1).rev() {
        let (head, tail) = out.split_at_mut((i + 1) * pp);
        let cur = &mut head[i * pp..];
        for k in 0..pp {
            cur[k] -= pick(k).c_prime[i] * tail[k];
        }
    }
    theta
}

fn scatter(out: &mut [f64], column: &[f64], p: usize, u: usize, v: usize) {
    let pp = p * p;
    for (i, &x) in column.iter().enumerate() {
        out[i * pp + u * p + v] = x;
        out[i * pp + v * p + u] = x;
    }
}
