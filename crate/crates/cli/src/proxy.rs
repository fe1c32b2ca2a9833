//! Rolling covariance proxy used as a reference curve in the diagnostics.

use anyhow::{ensure, Result};
use covbreak::{CovariancePath, ObservationSeries};

pub const DEFAULT_WINDOW: usize = 42;
pub const DEFAULT_BLEND: f64 = 0.01;

/// `(1 - a)·X_t X_tᵀ + a·mean(X_s X_sᵀ)` with the mean over the trailing
/// `min(window, t)` observations ending at `t`.
pub fn rolling_proxy(series: &ObservationSeries, window: usize, a: f64) -> Result<CovariancePath> {
    ensure!(window >= 1, "window must be at least 1");
    ensure!((0.0..=1.0).contains(&a), "blend weight must lie in [0, 1]");
    let outer = series.outer_products();
    let (len, p) = (series.len(), series.dim());
    let mut out = CovariancePath::zeros(len, p);
    let mut running = vec![0.0; p * p];
    for i in 0..len {
        for (r, s) in running.iter_mut().zip(outer.block(i)) {
            *r += s;
        }
        if i >= window {
            for (r, s) in running.iter_mut().zip(outer.block(i - window)) {
                *r -= s;
            }
        }
        let count = (i + 1).min(window) as f64;
        for ((o, s), r) in out.block_mut(i).iter_mut().zip(outer.block(i)).zip(&running) {
            *o = (1.0 - a) * s + a * r / count;
        }
    }
    Ok(out)
}
