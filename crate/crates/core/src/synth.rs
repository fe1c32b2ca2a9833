//! Simulation designs: random change-point placement, three families of
//! regime covariances, and Gaussian sampling along a piecewise-constant path.
//!
//! Randomness comes from [`ChaCha8Rng`] keyed by `(seed, replication, regime,
//! purpose)`: the 32-byte key is the four values as little-endian `u64`s.
//! Every draw therefore depends only on its own coordinates, which keeps
//! replications reproducible under any scheduling.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{block_ranges, CovariancePath, ObservationSeries};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, SymMatrix};
use crate::segmentation::{expand_supports, support_of, Support};

/// What a random stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Breakpoints = 0,
    Regime = 1,
    Sample = 2,
    HeldOut = 3,
}

/// Independent generator for one `(seed, replication, index, purpose)` cell.
pub fn stream(seed: u64, replication: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replication.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Regime covariance family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Sparse random entries with 80% zeros below the diagonal.
    I,
    /// Scaled banded correlation with thresholding and random signs.
    II,
    /// Sparse factor model plus diagonal noise.
    III,
}

impl Setting {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Setting::I),
            2 => Some(Setting::II),
            3 => Some(Setting::III),
            _ => None,
        }
    }
}

/// A simulation cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub setting: Setting,
    pub len: usize,
    pub dim: usize,
    pub m_star: usize,
    /// Minimum regime length as a fraction of `T`; `None` uses `1/(m* + 8)`.
    pub kappa: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(setting: Setting, len: usize, dim: usize, m_star: usize, seed: u64) -> Self {
        Self {
            setting,
            len,
            dim,
            m_star,
            kappa: None,
            seed,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(1.0 / (self.m_star as f64 + 8.0))
    }
}

/// The true segmentation, regime covariances and expanded path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// One-based breaks in `2..=T`.
    pub breakpoints: Vec<usize>,
    pub sigmas: Vec<SymMatrix>,
    pub path: CovariancePath,
    /// Off-diagonal support of each regime.
    pub supports: Vec<Support>,
}

impl GroundTruth {
    pub fn from_regimes(breakpoints: Vec<usize>, sigmas: Vec<SymMatrix>, len: usize) -> Result<Self> {
        crate::domain::validate_breakpoints(&breakpoints, len)?;
        if sigmas.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension("need one covariance per regime".into()));
        }
        let lengths: Vec<usize> = block_ranges(&breakpoints, len).iter().map(|r| r.len()).collect();
        let path = CovariancePath::piecewise(&sigmas, &lengths)?;
        let supports = sigmas.iter().map(|s| support_of(s, None)).collect();
        Ok(Self {
            breakpoints,
            sigmas,
            path,
            supports,
        })
    }

    /// Support at every time point.
    pub fn supports_over_time(&self) -> Vec<Support> {
        expand_supports(&self.breakpoints, &self.supports, self.path.len())
    }
}

/// `m` one-based breaks in `2..=T` such that every regime, including the
/// first and last, spans at least `⌈κT⌉` observations. Uniform over all
/// admissible placements (rejection sampling).
pub fn place_changepoints<R: Rng + ?Sized>(len: usize, m: usize, kappa: f64, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let gap = (kappa * len as f64 - 1e-9).ceil().max(1.0) as usize;
    if (m + 1) * gap > len {
        return Err(Error::Infeasible(format!(
            "{m} breaks with minimum regime length {gap} do not fit in T = {len}"
        )));
    }
    loop {
        let mut picks: Vec<usize> = sample(rng, len - 1, m).into_iter().map(|k| k + 2).collect();
        picks.sort_unstable();
        let mut bounds = vec![1];
        bounds.extend(&picks);
        bounds.push(len + 1);
        if bounds.windows(2).all(|w| w[1] - w[0] >= gap) {
            return Ok(picks);
        }
    }
}

/// Makes `S` safely positive definite: unchanged when `λ_min(S) > 0.01`,
/// otherwise `S + (ζ + |λ_min|)I` for the first `ζ ∈ {0.005, 0.010, …}` with
/// `λ_min > 0.01`.
pub fn pd_repair(s: &SymMatrix) -> Result<SymMatrix> {
    const FLOOR: f64 = 0.01;
    let lam = s.min_eigenvalue()?;
    if lam > FLOOR {
        return Ok(s.clone());
    }
    let mut k = 1u32;
    loop {
        let zeta = 0.005 * k as f64;
        // `λ_min + |λ_min|` is exactly zero for negative `λ_min`.
        if (lam + lam.abs()) + zeta > FLOOR {
            return Ok(s.shifted(zeta + lam.abs()));
        }
        k += 1;
    }
}

/// `⌈0.8·n⌉` in exact integer arithmetic.
fn eighty_percent(n: usize) -> usize {
    (8 * n).div_ceil(10)
}

/// Sparse random regime: `⌈0.8·p(p-1)/2⌉` lower-triangular zeros at random
/// positions, remaining off-diagonals `U[-2, 2]`, diagonal `U[1.5, 3.5]`,
/// then [`pd_repair`].
pub fn gen_sigma_setting_i<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<SymMatrix> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|u| (0..u).map(move |v| (u, v))).collect();
    let zeros: std::collections::HashSet<usize> = sample(rng, pairs.len(), eighty_percent(pairs.len())).into_iter().collect();
    let mut m = vec![0.0; p * p];
    for (k, &(u, v)) in pairs.iter().enumerate() {
        let x = if zeros.contains(&k) { 0.0 } else { rng.random_range(-2.0..=2.0) };
        m[u * p + v] = x;
        m[v * p + u] = x;
    }
    for u in 0..p {
        m[u * p + u] = rng.random_range(1.5..=3.5);
    }
    pd_repair(&SymMatrix::from_row_slice(p, &m)?)
}

/// Banded regime `D^{1/2} C D^{1/2}` with `C_{uv} = a^{|u-v|}`, `a ∈ {0.3, 0.8}`
/// equally likely and `D_k ~ U[1.5, 4]`; entries below 0.05 in magnitude are
/// zeroed, surviving off-diagonal pairs get a random common sign, then
/// [`pd_repair`].
pub fn gen_sigma_setting_ii<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<SymMatrix> {
    let a: f64 = if rng.random_bool(0.5) { 0.3 } else { 0.8 };
    let d: Vec<f64> = (0..p).map(|_| rng.random_range(1.5..=4.0)).collect();
    let mut m = vec![0.0; p * p];
    for u in 0..p {
        m[u * p + u] = d[u];
        for v in (u + 1)..p {
            let mut x = (d[u] * d[v]).sqrt() * a.powi((v - u) as i32);
            if x.abs() < 0.05 {
                x = 0.0;
            } else if rng.random_bool(0.5) {
                x = -x;
            }
            m[u * p + v] = x;
            m[v * p + u] = x;
        }
    }
    pd_repair(&SymMatrix::from_row_slice(p, &m)?)
}

/// Sparse factor regime `ΛΛᵀ + Ψ`: `r ~ U{2..6}` factors, `⌈0.8·p·r⌉`
/// zero loadings, nonzero loadings uniform on `[-2, -0.5] ∪ [0.5, 2]`,
/// `Ψ` diagonal `U[0.5, 1]`.
pub fn gen_sigma_setting_iii<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<SymMatrix> {
    let r = rng.random_range(2..=6usize);
    let zeros: std::collections::HashSet<usize> = sample(rng, p * r, eighty_percent(p * r)).into_iter().collect();
    let loadings: Vec<f64> = (0..p * r)
        .map(|k| {
            if zeros.contains(&k) {
                0.0
            } else {
                let mag: f64 = rng.random_range(0.5..=2.0);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
        })
        .collect();
    let mut m = vec![0.0; p * p];
    for u in 0..p {
        for v in 0..p {
            m[u * p + v] = (0..r).map(|k| loadings[u * r + k] * loadings[v * r + k]).sum();
        }
    }
    for u in 0..p {
        m[u * p + u] += rng.random_range(0.5..=1.0);
    }
    SymMatrix::from_row_slice(p, &m)
}

pub fn gen_sigma<R: Rng + ?Sized>(setting: Setting, p: usize, rng: &mut R) -> Result<SymMatrix> {
    if p < 2 {
        return Err(Error::Dimension("regime generators need p >= 2".into()));
    }
    match setting {
        Setting::I => gen_sigma_setting_i(p, rng),
        Setting::II => gen_sigma_setting_ii(p, rng),
        Setting::III => gen_sigma_setting_iii(p, rng),
    }
}

/// Independent draws `X_t = L_t ε_t` with `L_t` the Cholesky factor of `Θ*_t`.
pub fn sample_gaussian<R: Rng + ?Sized>(path: &CovariancePath, rng: &mut R) -> Result<ObservationSeries> {
    let (len, p) = (path.len(), path.dim());
    let mut data = Vec::with_capacity(len * p);
    let mut cached: Option<(usize, Vec<f64>)> = None;
    let mut eps = vec![0.0; p];
    for i in 0..len {
        let reuse = matches!(&cached, Some((j, _)) if path.block(*j) == path.block(i));
        if !reuse {
            let l = cholesky_lower(path.block(i), p).ok_or(Error::NotPositiveDefinite(i))?;
            cached = Some((i, l));
        }
        let l = &cached.as_ref().expect("factor computed above").1;
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        for u in 0..p {
            data.push((0..=u).map(|k| l[u * p + k] * eps[k]).sum());
        }
    }
    ObservationSeries::new(len, p, data)
}

/// Ground truth for one replication of a scenario.
pub fn make_truth(scenario: &Scenario, replication: u64) -> Result<GroundTruth> {
    let seed = scenario.seed;
    let mut rng = stream(seed, replication, 0, Purpose::Breakpoints);
    let breakpoints = place_changepoints(scenario.len, scenario.m_star, scenario.kappa(), &mut rng)?;
    let sigmas = (0..=scenario.m_star)
        .map(|j| gen_sigma(scenario.setting, scenario.dim, &mut stream(seed, replication, j as u64, Purpose::Regime)))
        .collect::<Result<Vec<_>>>()?;
    GroundTruth::from_regimes(breakpoints, sigmas, scenario.len)
}

/// Ground truth and one sample path for a replication.
pub fn make_scenario(scenario: &Scenario, replication: u64) -> Result<(GroundTruth, ObservationSeries)> {
    let truth = make_truth(scenario, replication)?;
    let data = sample_gaussian(&truth.path, &mut stream(scenario.seed, replication, 0, Purpose::Sample))?;
    Ok((truth, data))
}

/// Additional independent samples from the same truth, for held-out losses.
pub fn held_out_samples(truth: &GroundTruth, seed: u64, replication: u64, count: usize) -> Result<Vec<ObservationSeries>> {
    (0..count)
        .map(|b| sample_gaussian(&truth.path, &mut stream(seed, replication, b as u64, Purpose::HeldOut)))
        .collect()
}
