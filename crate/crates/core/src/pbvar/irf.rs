use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array3, Array4, Axis};
use rayon::prelude::*;
use serde::Serialize;

use super::posterior::PosteriorSample;
use super::BvarConfig;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, percentile_sorted};
use crate::numfmt::fmt_sig;

/// Per-draw structural responses, `draw x shock x variable x horizon`.
#[derive(Debug, Clone)]
pub struct IrfDraws {
    pub shock_names: Vec<String>,
    pub variable_names: Vec<String>,
    pub values: Array4<f64>,
    /// Draws whose covariance failed to factor.
    pub rejected: usize,
}

impl IrfDraws {
    pub fn n_draws(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    pub fn horizon(&self) -> usize {
        self.values.len_of(Axis(3)) - 1
    }

    /// Percentile summary across draws.
    pub fn summarize(&self, percentiles: &[f64]) -> IrfResult {
        let (_, s, v, h) = self.values.dim();
        let cells: Vec<Vec<f64>> = (0..s * v * h)
            .into_par_iter()
            .map(|c| {
                let (si, rest) = (c / (v * h), c % (v * h));
                let (vi, hi) = (rest / h, rest % h);
                let mut col: Vec<f64> = self.values.slice(ndarray::s![.., si, vi, hi]).to_vec();
                col.sort_by(f64::total_cmp);
                percentiles.iter().map(|&p| percentile_sorted(&col, p)).collect()
            })
            .collect();
        let responses = Array4::from_shape_fn((s, v, h, percentiles.len()), |(si, vi, hi, p)| {
            cells[(si * v + vi) * h + hi][p]
        });
        IrfResult {
            shock_names: self.shock_names.clone(),
            variable_names: self.variable_names.clone(),
            percentiles: percentiles.to_vec(),
            responses,
            draws_used: self.n_draws(),
            rejected: self.rejected,
        }
    }
}

/// Percentile bands of structural responses to one-standard-deviation shocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrfResult {
    pub shock_names: Vec<String>,
    pub variable_names: Vec<String>,
    pub percentiles: Vec<f64>,
    /// `shock x variable x horizon x percentile`.
    #[serde(skip)]
    pub responses: Array4<f64>,
    pub draws_used: usize,
    pub rejected: usize,
}

impl IrfResult {
    pub fn horizon(&self) -> usize {
        self.responses.len_of(Axis(2)) - 1
    }

    pub fn percentile_index(&self, p: f64) -> Option<usize> {
        self.percentiles.iter().position(|&q| (q - p).abs() < 1e-9)
    }

    pub fn shock_index(&self, name: &str) -> Result<usize> {
        self.shock_names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variable_names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Value at percentile `p` (must be one of the configured percentiles).
    pub fn at(&self, shock: usize, variable: usize, h: usize, p: f64) -> f64 {
        let k = self
            .percentile_index(p)
            .unwrap_or_else(|| panic!("percentile {p} not computed"));
        self.responses[(shock, variable, h, k)]
    }

    /// 50th percentile; panics if it was not computed.
    pub fn median(&self, shock: usize, variable: usize, h: usize) -> f64 {
        self.at(shock, variable, h, 50.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["shock", "variable", "horizon", "pctl", "value"])?;
        let (s, v, h, p) = self.responses.dim();
        for si in 0..s {
            for vi in 0..v {
                for hi in 0..h {
                    for pi in 0..p {
                        w.write_record([
                            self.shock_names[si].as_str(),
                            self.variable_names[vi].as_str(),
                            &hi.to_string(),
                            &fmt_sig(self.percentiles[pi]),
                            &fmt_sig(self.responses[(si, vi, hi, pi)]),
                        ])?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io("<irf csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Responses of all variables to the first `n_shocks` Cholesky shocks of a
/// single draw, `shock x variable x horizon`. `None` if `sigma` is not PD.
pub fn cholesky_irf(
    coeffs: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    n_shocks: usize,
    horizon: usize,
) -> Option<Array3<f64>> {
    let k = sigma.nrows();
    let lags = (coeffs.ncols() - 1) / k;
    let l = cholesky_lower(sigma)?;
    let impact = l.columns(0, n_shocks).into_owned();
    let a: Vec<DMatrix<f64>> = (0..lags)
        .map(|j| coeffs.columns(j * k, k).into_owned())
        .collect();
    let mut theta: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    theta.push(impact);
    for h in 1..=horizon {
        let mut next = DMatrix::zeros(k, n_shocks);
        for (j, aj) in a.iter().enumerate().take(h.min(lags)) {
            next += aj * &theta[h - j - 1];
        }
        theta.push(next);
    }
    Some(Array3::from_shape_fn((n_shocks, k, horizon + 1), |(s, v, h)| {
        theta[h][(v, s)]
    }))
}

/// Structural responses for every sample. The first `n_shocks` Cholesky
/// shocks are kept (`None` keeps all). Non-PD draws are rejected and
/// counted; more than 1% is an error.
pub fn irf_draws(
    samples: &[PosteriorSample],
    names: &[String],
    horizon: usize,
    n_shocks: Option<usize>,
) -> Result<IrfDraws> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("no posterior samples".into()))?;
    let k = first.n_vars();
    if names.len() != k {
        return Err(Error::InvalidInput(format!(
            "{} variable names for a {k}-variable system",
            names.len()
        )));
    }
    let s = n_shocks.unwrap_or(k).min(k);
    let per_draw: Vec<Option<Array3<f64>>> = samples
        .par_iter()
        .map(|d| cholesky_irf(&d.coeffs, &d.sigma, s, horizon))
        .collect();
    let rejected = per_draw.iter().filter(|d| d.is_none()).count();
    if rejected * 100 > samples.len() {
        return Err(Error::TooManyRejections {
            rejected,
            total: samples.len(),
        });
    }
    let kept: Vec<Array3<f64>> = per_draw.into_iter().flatten().collect();
    let mut values = Array4::zeros((kept.len(), s, k, horizon + 1));
    for (i, d) in kept.iter().enumerate() {
        values.index_axis_mut(Axis(0), i).assign(d);
    }
    Ok(IrfDraws {
        shock_names: names[..s].to_vec(),
        variable_names: names.to_vec(),
        values,
        rejected,
    })
}

/// Cholesky IRFs for all shocks with the configured horizon and percentiles.
pub fn structural_irf(
    samples: &[PosteriorSample],
    names: &[String],
    config: &BvarConfig,
) -> Result<IrfResult> {
    config.validate()?;
    Ok(irf_draws(samples, names, config.horizon, None)?.summarize(&config.percentiles))
}
