//! Closed-form V, Υ and D updates and the scaled dual ascent.

use super::state::{AdmmState, DualBlocks};
use crate::domain::{CovariancePath, WeightSet};
use crate::error::Result;
use crate::linalg::{frobenius_norm, project_psd_slice};
use crate::par::Execution;

/// `sgn(x)·(|x| - τ)₊`. Returns exactly `0.0` inside the dead zone.
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `(1 - τ/‖Ξ‖_F)₊ Ξ`, written into `out`. Returns `true` when the result is nonzero.
pub fn group_shrink_slice(xi: &[f64], tau: f64, out: &mut [f64]) -> bool {
    let norm = frobenius_norm(xi);
    if norm <= tau {
        out.iter_mut().for_each(|x| *x = 0.0);
        false
    } else {
        let scale = 1.0 - tau / norm;
        for (o, x) in out.iter_mut().zip(xi) {
            *o = scale * x;
        }
        true
    }
}

/// Group shrinkage of a single matrix, see [`group_shrink_slice`].
pub fn group_shrink(xi: &crate::SymMatrix, tau: f64) -> crate::SymMatrix {
    let mut out = vec![0.0; xi.as_slice().len()];
    group_shrink_slice(xi.as_slice(), tau, &mut out);
    crate::SymMatrix::from_symmetric_unchecked(xi.dim(), out)
}

/// `V_t = P_{⪰εI}(Θ_t - A_t/β)`.
pub fn update_v(
    theta: &CovariancePath,
    a: &CovariancePath,
    epsilon: f64,
    beta: f64,
    exec: Execution,
) -> Result<CovariancePath> {
    let (len, p) = (theta.len(), theta.dim());
    let pp = p * p;
    let mut v = CovariancePath::zeros(len, p);
    let results = {
        let out = v.as_mut_slice();
        let step = |i: usize, dst: &mut [f64]| {
            let src: Vec<f64> = theta
                .block(i)
                .iter()
                .zip(a.block(i))
                .map(|(t, a)| t - a / beta)
                .collect();
            project_psd_slice(&src, p, epsilon, dst)
        };
        if exec.is_parallel() && len > 1 {
            let errors = std::sync::Mutex::new(Ok(()));
            exec.for_each_chunk(out, pp, |i, dst| {
                if let Err(e) = step(i, dst) {
                    *errors.lock().unwrap() = Err(e);
                }
            });
            errors.into_inner().unwrap()
        } else {
            out.chunks_mut(pp.max(1))
                .enumerate()
                .try_for_each(|(i, dst)| step(i, dst))
        }
    };
    results?;
    Ok(v)
}

/// `Υ_{uv,t} = 𝒯_{λ₁ξ_{uv,1t}/β}(Θ_{uv,t} - Y_{uv,t}/β)` off the diagonal; diagonal zero.
pub fn update_upsilon(
    theta: &CovariancePath,
    y: &CovariancePath,
    weights: &WeightSet,
    lambda1: f64,
    beta: f64,
) -> CovariancePath {
    let p = theta.dim();
    let mut out = CovariancePath::zeros(theta.len(), p);
    for i in 0..theta.len() {
        let (th, yy, w) = (theta.block(i), y.block(i), weights.lasso().block(i));
        let dst = out.block_mut(i);
        for u in 0..p {
            for v in 0..p {
                if u != v {
                    let k = u * p + v;
                    dst[k] = soft_threshold(th[k] - yy[k] / beta, lambda1 * w[k] / beta);
                }
            }
        }
    }
    out
}

/// `D_t = (1 - τ_t/‖Ξ_t‖)₊ Ξ_t` with `Ξ_t = Θ_t - Θ_{t-1} - Z_t/β` and
/// `τ_t = λ₂ξ_{2t}/β`, for `t = 2..T`.
pub fn update_d(
    theta: &CovariancePath,
    z: &CovariancePath,
    weights: &WeightSet,
    lambda2: f64,
    beta: f64,
) -> CovariancePath {
    let (len, p) = (theta.len(), theta.dim());
    let steps = len.saturating_sub(1);
    let mut d = CovariancePath::zeros(steps, p);
    let mut xi = vec![0.0; p * p];
    for k in 0..steps {
        let (prev, next, zk) = (theta.block(k), theta.block(k + 1), z.block(k));
        for (j, x) in xi.iter_mut().enumerate() {
            *x = next[j] - prev[j] - zk[j] / beta;
        }
        group_shrink_slice(&xi, lambda2 * weights.fusion()[k] / beta, d.block_mut(k));
    }
    d
}

/// Dual ascent with step `γβ`:
/// `A ← A - γβ(Θ - V)`, `Y ← Y - γβ(Θ_off - Υ)`, `Z_t ← Z_t - γβ(Θ_t - Θ_{t-1} - D_t)`.
pub fn dual_ascent(
    state: &AdmmState,
    theta: &CovariancePath,
    v: &CovariancePath,
    upsilon: &CovariancePath,
    d: &CovariancePath,
    beta: f64,
    gamma: f64,
) -> DualBlocks {
    let (len, p) = (theta.len(), theta.dim());
    let step = gamma * beta;
    let mut a = state.a.clone();
    let mut y = state.y.clone();
    let mut z = state.z.clone();
    for i in 0..len {
        let (th, vv, ups) = (theta.block(i), v.block(i), upsilon.block(i));
        for (k, x) in a.block_mut(i).iter_mut().enumerate() {
            *x -= step * (th[k] - vv[k]);
        }
        let yb = y.block_mut(i);
        for u in 0..p {
            for w in 0..p {
                if u != w {
                    let k = u * p + w;
                    yb[k] -= step * (th[k] - ups[k]);
                }
            }
        }
    }
    for k in 0..len.saturating_sub(1) {
        let (prev, next, dk) = (theta.block(k), theta.block(k + 1), d.block(k));
        for (j, x) in z.block_mut(k).iter_mut().enumerate() {
            *x -= step * (next[j] - prev[j] - dk[j]);
        }
    }
    DualBlocks { a, y, z }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::uniform_weights;
    use crate::admm::state::{initialize, off_diagonal};
    use crate::domain::{ObservationSeries, PenaltySpec};
    use crate::SymMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_path(rng: &mut ChaCha8Rng, len: usize, p: usize) -> CovariancePath {
        let data = (0..len * p * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        CovariancePath::from_flat(len, p, data).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert!((soft_threshold(1.2, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert!((soft_threshold(-2.0, 0.5) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn group_shrink_examples() {
        let zero = SymMatrix::zeros(2);
        assert_eq!(group_shrink(&zero, 1.0), zero);
        let two_i = SymMatrix::from_diagonal(&[2.0, 2.0]).unwrap();
        let out = group_shrink(&two_i, 1.0);
        let factor = 1.0 - 1.0 / (2.0 * 2f64.sqrt());
        assert!((out.get(0, 0) - 2.0 * factor).abs() < 1e-12);
        assert!((out.get(0, 0) - 1.29289).abs() < 1e-5);
        assert_eq!(out.get(0, 1), 0.0);
        let small = SymMatrix::from_diagonal(&[0.9, 0.0]).unwrap();
        assert!(group_shrink(&small, 1.0).as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn upsilon_single_entry() {
        let mut theta = CovariancePath::zeros(1, 2);
        theta.block_mut(0).copy_from_slice(&[0.0, 1.0, 1.0, 0.0]);
        let mut y = CovariancePath::zeros(1, 2);
        y.block_mut(0).copy_from_slice(&[0.0, 0.2, 0.2, 0.0]);
        let w = uniform_weights(1, 2);
        let ups = update_upsilon(&theta, &y, &w, 0.6, 2.0);
        assert!((ups.get(0, 0, 1) - 0.6).abs() < 1e-15);
        assert_eq!(ups.get(0, 0, 0), 0.0);
    }

    #[test]
    fn upsilon_zero_threshold_and_saturation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = random_path(&mut rng, 4, 3);
        let y = off_diagonal(&random_path(&mut rng, 4, 3));
        let w = uniform_weights(4, 3);
        let beta = 1.5;
        let ups = update_upsilon(&theta, &y, &w, 0.0, beta);
        for i in 0..4 {
            for u in 0..3 {
                for v in 0..3 {
                    let expect = if u == v { 0.0 } else { theta.get(i, u, v) - y.get(i, u, v) / beta };
                    assert_eq!(ups.get(i, u, v), expect);
                }
            }
        }
        let max = theta
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(t, y)| (t - y / beta).abs())
            .fold(0.0, f64::max);
        let ups = update_upsilon(&theta, &y, &w, beta * max, beta);
        assert!(ups.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn d_of_constant_path_is_zero() {
        let m = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let theta = CovariancePath::from_matrices(&[m.clone(), m.clone(), m]).unwrap();
        let d = update_d(&theta, &CovariancePath::zeros(2, 2), &uniform_weights(3, 2), 0.1, 1.0);
        assert!(d.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn d_tends_to_xi_as_penalty_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = random_path(&mut rng, 5, 2);
        let z = random_path(&mut rng, 4, 2);
        let d = update_d(&theta, &z, &uniform_weights(5, 2), 1e-14, 1.0);
        for k in 0..4 {
            for u in 0..2 {
                for v in 0..2 {
                    let xi = theta.get(k + 1, u, v) - theta.get(k, u, v) - z.get(k, u, v);
                    assert!((d.get(k, u, v) - xi).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn d_matches_vectorized_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (len, p, beta, lambda2) = (7, 3, 0.8, 0.9);
        let theta = random_path(&mut rng, len, p);
        let z = random_path(&mut rng, len - 1, p);
        let xi2: Vec<f64> = (0..len - 1).map(|_| rng.random_range(0.2..3.0)).collect();
        let weights = WeightSet::new(off_diagonal(&CovariancePath::zeros(len, p)), xi2.clone()).unwrap();
        let d = update_d(&theta, &z, &weights, lambda2, beta);
        for k in 0..len - 1 {
            let xi: Vec<f64> = (0..p * p)
                .map(|j| theta.block(k + 1)[j] - theta.block(k)[j] - z.block(k)[j] / beta)
                .collect();
            let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            let factor = (1.0 - lambda2 * xi2[k] / beta / norm).max(0.0);
            for j in 0..p * p {
                assert!((d.block(k)[j] - factor * xi[j]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn dual_ascent_examples() {
        let x = ObservationSeries::from_rows(&[vec![1.0, 0.5], vec![0.2, -1.0]]).unwrap();
        let state = initialize(&x, &PenaltySpec::default()).unwrap();
        let d_fixed = {
            let mut d = CovariancePath::zeros(1, 2);
            for j in 0..4 {
                d.block_mut(0)[j] = state.theta.block(1)[j] - state.theta.block(0)[j];
            }
            d
        };
        let same = dual_ascent(&state, &state.theta, &state.theta, &off_diagonal(&state.theta), &d_fixed, 1.0, 1.61);
        assert_eq!(same.a, state.a);
        assert_eq!(same.y, state.y);
        assert_eq!(same.z, state.z);

        let mut theta = CovariancePath::zeros(2, 2);
        for i in 0..2 {
            theta.block_mut(i).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        }
        let v = CovariancePath::zeros(2, 2);
        let zeros = CovariancePath::zeros(1, 2);
        let mut fresh = state.clone();
        fresh.a = CovariancePath::zeros(2, 2);
        let out = dual_ascent(&fresh, &theta, &v, &CovariancePath::zeros(2, 2), &zeros, 1.0, 1.61);
        assert!((out.a.get(0, 0, 0) + 1.61).abs() < 1e-15);
        assert_eq!(out.a.get(0, 0, 1), 0.0);
    }

    #[test]
    fn dual_ascent_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (len, p, beta, gamma) = (5, 3, 1.7, 1.3);
        let state = AdmmState {
            theta: random_path(&mut rng, len, p),
            v: random_path(&mut rng, len, p),
            upsilon: off_diagonal(&random_path(&mut rng, len, p)),
            d: random_path(&mut rng, len - 1, p),
            a: random_path(&mut rng, len, p),
            y: off_diagonal(&random_path(&mut rng, len, p)),
            z: random_path(&mut rng, len - 1, p),
            iteration: 3,
        };
        let theta = random_path(&mut rng, len, p);
        let v = random_path(&mut rng, len, p);
        let ups = off_diagonal(&random_path(&mut rng, len, p));
        let d = random_path(&mut rng, len - 1, p);
        let out = dual_ascent(&state, &theta, &v, &ups, &d, beta, gamma);
        let s = gamma * beta;
        for i in 0..len {
            for u in 0..p {
                for w in 0..p {
                    let a = state.a.get(i, u, w) - s * (theta.get(i, u, w) - v.get(i, u, w));
                    assert!((out.a.get(i, u, w) - a).abs() <= 1e-14);
                    let y = if u == w {
                        0.0
                    } else {
                        state.y.get(i, u, w) - s * (theta.get(i, u, w) - ups.get(i, u, w))
                    };
                    assert!((out.y.get(i, u, w) - y).abs() <= 1e-14);
                    if i >= 1 {
                        let z = state.z.get(i - 1, u, w)
                            - s * (theta.get(i, u, w) - theta.get(i - 1, u, w) - d.get(i - 1, u, w));
                        assert!((out.z.get(i - 1, u, w) - z).abs() <= 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn update_v_respects_floor_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = random_path(&mut rng, 6, 3);
        let a = random_path(&mut rng, 6, 3);
        let seq = update_v(&theta, &a, 0.01, 1.0, Execution::Sequential).unwrap();
        let par = update_v(&theta, &a, 0.01, 1.0, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        for m in seq.matrices() {
            assert!(m.min_eigenvalue().unwrap() >= 0.01 - 1e-8);
        }
    }

    /// Grid brute force over `[-R, R]` with 10⁴ points.
    fn brute_force_scalar(x: f64, tau: f64) -> f64 {
        let r = x.abs() + tau + 1.0;
        (0..=10_000)
            .map(|k| -r + 2.0 * r * k as f64 / 10_000.0)
            .map(|z| (z, 0.5 * (z - x).powi(2) + tau * z.abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    proptest! {
        #[test]
        fn soft_threshold_contracts(x in -10.0f64..10.0, tau in 0.0f64..5.0) {
            let y = soft_threshold(x, tau);
            prop_assert!(y.abs() <= x.abs());
            prop_assert!(y == 0.0 || y.signum() == x.signum());
            let grid_step = 2.0 * (x.abs() + tau + 1.0) / 10_000.0;
            prop_assert!((y - brute_force_scalar(x, tau)).abs() <= grid_step);
        }

        #[test]
        fn group_shrink_is_scaled_input(entries in proptest::collection::vec(-3.0f64..3.0, 4), tau in 0.0f64..4.0) {
            let m = SymMatrix::from_row_slice(2, &entries).unwrap();
            let out = group_shrink(&m, tau);
            let norm = m.frobenius_norm();
            if norm <= tau {
                prop_assert!(out.as_slice().iter().all(|&x| x == 0.0));
            } else {
                prop_assert!((out.frobenius_norm() - (norm - tau)).abs() <= 1e-12);
            }
        }
    }
}
