//! The versioned JSON result bundle and the diagnostics table.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use covbreak::domain::block_ranges;
use covbreak::segmentation::{expand_supports, Support};
use covbreak::selection::FitPattern;
use covbreak::synth::GroundTruth;
use covbreak::{AdmmSolution, CovariancePath, Segmentation, SolveReport, SymMatrix};
use serde::{Deserialize, Serialize};

pub const BUNDLE_MAJOR: u64 = 1;
pub const BUNDLE_VERSION: &str = "1.0";

/// One block of the fitted segmentation; `start` and `end` are one-based and inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub covariance: SymMatrix,
}

/// Settings a bundle was produced with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub estimator: String,
    pub lambda: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub epsilon: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub criterion: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub version: String,
    pub len: usize,
    pub dim: usize,
    pub changepoints: Vec<usize>,
    pub blocks: Vec<Block>,
    /// Ordered off-diagonal pairs `(u, v)`, zero-based, per block.
    pub support_per_block: Vec<Vec<(usize, usize)>>,
    pub solve_reports: Vec<SolveReport>,
    /// `None` for a bundle describing a known truth.
    pub parameters: Option<Parameters>,
}

impl Bundle {
    /// Breaks and supports from `pattern` (the exact zeros of `D` and `Υ`),
    /// block covariances as block means of the floored path `v`.
    pub fn from_fit(v: &CovariancePath, pattern: &FitPattern, solve_reports: Vec<SolveReport>, parameters: Parameters) -> Self {
        let len = v.len();
        let ranges = block_ranges(&pattern.breakpoints, len);
        let seg = Segmentation {
            breakpoints: pattern.breakpoints.clone(),
            block_covs: ranges.iter().map(|r| block_mean(v, r.clone())).collect(),
        };
        let supports: Vec<Support> = ranges.iter().map(|r| pattern.supports[r.start].clone()).collect();
        Self::assemble(len, seg, &supports, solve_reports, Some(parameters))
    }

    pub fn from_solution(sol: &AdmmSolution, solve_reports: Vec<SolveReport>, parameters: Parameters) -> Self {
        Self::from_fit(sol.v(), &FitPattern::from_solution(sol), solve_reports, parameters)
    }

    pub fn from_truth(truth: &GroundTruth) -> Self {
        let seg = Segmentation {
            breakpoints: truth.breakpoints.clone(),
            block_covs: truth.sigmas.clone(),
        };
        Self::assemble(truth.path.len(), seg, &truth.supports, Vec::new(), None)
    }

    fn assemble(
        len: usize,
        seg: Segmentation,
        supports: &[Support],
        solve_reports: Vec<SolveReport>,
        parameters: Option<Parameters>,
    ) -> Self {
        let dim = seg.block_covs.first().map_or(0, SymMatrix::dim);
        let blocks = block_ranges(&seg.breakpoints, len)
            .into_iter()
            .zip(seg.block_covs)
            .map(|(r, covariance)| Block {
                start: r.start + 1,
                end: r.end,
                covariance,
            })
            .collect();
        Self {
            version: BUNDLE_VERSION.to_string(),
            len,
            dim,
            changepoints: seg.breakpoints,
            blocks,
            support_per_block: supports.iter().map(|s| s.iter().copied().collect()).collect(),
            solve_reports,
            parameters,
        }
    }

    pub fn segmentation(&self) -> Result<Segmentation> {
        let covs = self.blocks.iter().map(|b| b.covariance.clone()).collect();
        Ok(Segmentation::new(self.changepoints.clone(), covs, self.len)?)
    }

    /// The piecewise-constant covariance path of the blocks.
    pub fn path(&self) -> Result<CovariancePath> {
        let covs: Vec<SymMatrix> = self.blocks.iter().map(|b| b.covariance.clone()).collect();
        let lengths: Vec<usize> = self.blocks.iter().map(|b| b.end + 1 - b.start).collect();
        Ok(CovariancePath::piecewise(&covs, &lengths)?)
    }

    pub fn supports_over_time(&self) -> Vec<Support> {
        let per_block: Vec<Support> = self
            .support_per_block
            .iter()
            .map(|s| s.iter().copied().collect())
            .collect();
        expand_supports(&self.changepoints, &per_block, self.len)
    }

    pub fn to_truth(&self) -> Result<GroundTruth> {
        let covs = self.blocks.iter().map(|b| b.covariance.clone()).collect();
        Ok(GroundTruth::from_regimes(self.changepoints.clone(), covs, self.len)?)
    }

    /// Checks the internal consistency of a deserialized bundle.
    pub fn validate(&self) -> Result<()> {
        let seg = self.segmentation()?;
        let ranges = seg.block_ranges(self.len);
        if ranges.len() != self.blocks.len() || self.support_per_block.len() != self.blocks.len() {
            bail!("block count does not match the change points");
        }
        for (r, b) in ranges.iter().zip(&self.blocks) {
            if b.start != r.start + 1 || b.end != r.end {
                bail!("block [{}, {}] does not match the change points", b.start, b.end);
            }
            if b.covariance.dim() != self.dim {
                bail!("block [{}, {}] is not {}x{}", b.start, b.end, self.dim, self.dim);
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid bundle {}", path.display()))
    }

    /// Parses a bundle, rejecting unknown major versions before the body is read.
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("version").and_then(|v| v.as_str()).context("missing version")?;
        let major = version.split('.').next().and_then(|m| m.parse::<u64>().ok());
        if major != Some(BUNDLE_MAJOR) {
            bail!("unsupported bundle version {version:?}, expected {BUNDLE_MAJOR}.x");
        }
        let bundle: Bundle = serde_json::from_value(value)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

fn block_mean(path: &CovariancePath, range: std::ops::Range<usize>) -> SymMatrix {
    let n = range.len() as f64;
    let mut acc = vec![0.0; path.dim() * path.dim()];
    for i in range {
        for (a, x) in acc.iter_mut().zip(path.block(i)) {
            *a += x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    SymMatrix::from_row_slice(path.dim(), &acc).expect("mean of finite symmetric blocks")
}

/// Columns `t, frobenius_diff, proxy_diff` for `t = 2..T`.
pub fn write_diagnostics<W: Write>(theta: &CovariancePath, proxy: &CovariancePath, out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["t", "frobenius_diff", "proxy_diff"])?;
    let diff = |path: &CovariancePath, i: usize| {
        covbreak::frobenius_norm(
            &path
                .block(i)
                .iter()
                .zip(path.block(i - 1))
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        )
    };
    for i in 1..theta.len() {
        csv.write_record([(i + 1).to_string(), diff(theta, i).to_string(), diff(proxy, i).to_string()])?;
    }
    csv.flush()?;
    Ok(())
}
