use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::paneldata::PanelDataset;

/// SBIC of a least-squares VAR(p) with intercept: `ln det(E'E/T) + k/T ln T`.
pub fn var_sbic(series: &DMatrix<f64>, p: usize, max_lag: usize) -> Result<f64> {
    let (t_all, n) = series.shape();
    if p == 0 || p > max_lag {
        return Err(Error::InvalidInput(format!("lag {p} outside 1..={max_lag}")));
    }
    let t = t_all.saturating_sub(max_lag);
    let k = n * p + 1;
    if t <= k {
        return Err(Error::InsufficientObservations(format!(
            "{t} usable rows for a VAR({p}) with {k} regressors per equation"
        )));
    }
    let y = series.rows(max_lag, t).into_owned();
    let mut x = DMatrix::zeros(t, k);
    for r in 0..t {
        for l in 1..=p {
            for j in 0..n {
                x[(r, (l - 1) * n + j)] = series[(max_lag + r - l, j)];
            }
        }
        x[(r, k - 1)] = 1.0;
    }
    let fit = ols(&y, &x, &format!("VAR({p}) for SBIC"))?;
    let sigma = fit.resid.transpose() * &fit.resid / t as f64;
    let det = sigma.determinant();
    if !(det > 0.0) {
        return Err(Error::Degenerate(format!("singular residual covariance at p = {p}")));
    }
    let tf = t as f64;
    Ok(det.ln() + (n * k) as f64 / tf * tf.ln())
}

/// Lag order in `1..=max_lag` minimizing SBIC for one country's VAR of the
/// panel variables, on the common sample that drops the first `max_lag`
/// months. Ties go to the smaller order.
pub fn sbic_lag_select(dataset: &PanelDataset, country: &str, max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Err(Error::InvalidInput("max_lag must be >= 1".into()));
    }
    let i = dataset.country_index(country)?;
    let (_, t, n) = dataset.dim();
    if t <= max_lag + n * max_lag + 1 {
        return Err(Error::InsufficientObservations(format!(
            "{t} months cannot support a VAR({max_lag}) in {n} variables"
        )));
    }
    let series = DMatrix::from_fn(t, n, |r, j| dataset.values()[(i, r, j)]);
    let mut best = (1, f64::INFINITY);
    for p in 1..=max_lag {
        let s = var_sbic(&series, p, max_lag)?;
        if s < best.1 {
            best = (p, s);
        }
    }
    Ok(best.0)
}
