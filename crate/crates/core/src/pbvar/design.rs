use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::paneldata::PanelDataset;

/// Stacked pooled regression `Y = X B + E`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// N(T-p) x (m+n)
    pub y: DMatrix<f64>,
    /// N(T-p) x ((m+n)p + 1): lag 1 block, ..., lag p block, intercept.
    pub x: DMatrix<f64>,
    /// Shock names followed by country variable names.
    pub names: Vec<String>,
    pub n_shocks: usize,
    pub lags: usize,
    pub n_countries: usize,
}

impl Design {
    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    /// Column of `x` holding lag `lag` (1-based) of variable `var`.
    pub fn lag_column(&self, lag: usize, var: usize) -> usize {
        (lag - 1) * self.n_vars() + var
    }

    pub fn const_column(&self) -> usize {
        self.x.ncols() - 1
    }

    pub fn rows_per_country(&self) -> usize {
        self.y.nrows() / self.n_countries
    }
}

/// Builds the pooled design, country blocks stacked vertically.
pub fn build_design(dataset: &PanelDataset, lags: usize) -> Result<Design> {
    let (n_c, n_t, n_v) = dataset.dim();
    let m = dataset.n_shocks();
    let k = m + n_v;
    if lags == 0 {
        return Err(Error::InvalidInput("lags must be >= 1".into()));
    }
    if n_t <= lags + 1 {
        return Err(Error::InsufficientObservations(format!(
            "T = {n_t} with {lags} lags"
        )));
    }
    let rows = n_t - lags;
    let shocks = dataset.shocks();
    let values = dataset.values();
    let z = |i: usize, t: usize, j: usize| -> f64 {
        if j < m {
            shocks[(t, j)]
        } else {
            values[(i, t, j - m)]
        }
    };
    let mut y = DMatrix::zeros(n_c * rows, k);
    let mut x = DMatrix::zeros(n_c * rows, k * lags + 1);
    for i in 0..n_c {
        for (r, t) in (lags..n_t).enumerate() {
            let row = i * rows + r;
            for j in 0..k {
                y[(row, j)] = z(i, t, j);
                for l in 1..=lags {
                    x[(row, (l - 1) * k + j)] = z(i, t - l, j);
                }
            }
            x[(row, k * lags)] = 1.0;
        }
    }
    let mut names: Vec<String> = dataset.shock_names().to_vec();
    names.extend(dataset.variables().iter().cloned());
    Ok(Design {
        y,
        x,
        names,
        n_shocks: m,
        lags,
        n_countries: n_c,
    })
}
