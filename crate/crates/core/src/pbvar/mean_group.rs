use nalgebra::DMatrix;
use ndarray::{Array3, Array4, Axis};
use serde::Serialize;

use super::design::build_design;
use super::irf::{cholesky_irf, IrfDraws, IrfResult};
use super::BvarConfig;
use crate::error::{Error, Result};
use crate::linalg::{ols, symmetrize};
use crate::paneldata::PanelDataset;

/// Least-squares VAR of one country.
#[derive(Debug, Clone, Serialize)]
pub struct CountryEstimate {
    pub country: String,
    /// Equation rows, `[A_1 .. A_p, c]`.
    #[serde(skip)]
    pub coeffs: DMatrix<f64>,
    #[serde(skip)]
    pub sigma: DMatrix<f64>,
    /// `shock x variable x horizon`.
    #[serde(skip)]
    pub irf: Array3<f64>,
    pub cond: f64,
}

#[derive(Debug, Clone)]
pub struct MeanGroupResult {
    /// Cholesky IRF of the averaged system, `shock x variable x horizon`.
    pub point: Array3<f64>,
    /// Cross-country percentiles of the per-country IRFs.
    pub bands: IrfResult,
    pub mean_coeffs: DMatrix<f64>,
    pub mean_sigma: DMatrix<f64>,
    pub countries: Vec<CountryEstimate>,
    /// Countries skipped for rank deficiency or a singular covariance.
    pub dropped: Vec<String>,
}

/// Country-by-country OLS VARs averaged into one system.
pub fn mean_group(dataset: &PanelDataset, config: &BvarConfig) -> Result<MeanGroupResult> {
    config.validate()?;
    let design = build_design(dataset, config.lags)?;
    let k = design.n_vars();
    let rows = design.rows_per_country();
    let n_t = dataset.dates().len();
    if n_t <= 2 * k + 1 {
        return Err(Error::InsufficientObservations(format!(
            "mean group needs T > {} per country, have {n_t}",
            2 * k + 1
        )));
    }
    let mut countries = Vec::new();
    let mut dropped = Vec::new();
    for (i, name) in dataset.countries().iter().enumerate() {
        let y = design.y.rows(i * rows, rows).into_owned();
        let x = design.x.rows(i * rows, rows).into_owned();
        let fit = match ols(&y, &x, &format!("VAR of {name}")) {
            Ok(f) => f,
            Err(e @ Error::RankDeficient { .. }) => {
                log::warn!("dropping {name}: {e}");
                dropped.push(name.clone());
                continue;
            }
            Err(e) => return Err(e),
        };
        let dof = rows - x.ncols();
        let sigma = symmetrize(&(fit.resid.transpose() * &fit.resid / dof as f64));
        let coeffs = fit.coef.transpose();
        let Some(irf) = cholesky_irf(&coeffs, &sigma, k, config.horizon) else {
            log::warn!("dropping {name}: residual covariance not positive definite");
            dropped.push(name.clone());
            continue;
        };
        countries.push(CountryEstimate {
            country: name.clone(),
            coeffs,
            sigma,
            irf,
            cond: fit.cond,
        });
    }
    let need = dataset.countries().len().min(2);
    if countries.len() < need {
        return Err(Error::InsufficientObservations(format!(
            "{} of {} countries survive, need {need}",
            countries.len(),
            dataset.countries().len()
        )));
    }
    let n = countries.len() as f64;
    let mean_coeffs = countries.iter().fold(DMatrix::zeros(k, design.x.ncols()), |acc, c| acc + &c.coeffs) / n;
    let mean_sigma = symmetrize(&(countries.iter().fold(DMatrix::zeros(k, k), |acc, c| acc + &c.sigma) / n));
    let point = cholesky_irf(&mean_coeffs, &mean_sigma, k, config.horizon)
        .ok_or_else(|| Error::NotPositiveDefinite("averaged covariance".into()))?;
    let mut values = Array4::zeros((countries.len(), k, k, config.horizon + 1));
    for (i, c) in countries.iter().enumerate() {
        values.index_axis_mut(Axis(0), i).assign(&c.irf);
    }
    let bands = IrfDraws {
        shock_names: design.names.clone(),
        variable_names: design.names.clone(),
        values,
        rejected: 0,
    }
    .summarize(&config.percentiles);
    Ok(MeanGroupResult {
        point,
        bands,
        mean_coeffs,
        mean_sigma,
        countries,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paneldata::YearMonth;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Country `i` follows y_t = a_i y_{t-1} + e_t; a common white-noise shock.
    fn panel(a: &[f64], t: usize, seed: u64) -> PanelDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shocks = Array2::from_shape_fn((t, 1), |_| StandardNormal.sample(&mut rng));
        let mut values = Array3::zeros((a.len(), t, 1));
        for (i, &ai) in a.iter().enumerate() {
            let mut y = 0.0;
            for s in 0..t {
                let e: f64 = StandardNormal.sample(&mut rng);
                y = ai * y + 0.3 * shocks[(s, 0)] + e;
                values[(i, s, 0)] = y;
            }
        }
        PanelDataset::new(
            (0..a.len()).map(|i| format!("C{i}")).collect(),
            YearMonth::new(2000, 1).unwrap().range(t),
            vec!["y".into()],
            values,
        )
        .unwrap()
        .with_shocks(vec!["m".into()], shocks)
        .unwrap()
    }

    fn cfg() -> BvarConfig {
        BvarConfig { lags: 1, horizon: 8, ..Default::default() }
    }

    #[test]
    fn single_country_equals_ols_irf() {
        let data = panel(&[0.6], 120, 1);
        let r = mean_group(&data, &cfg()).unwrap();
        let d = build_design(&data, 1).unwrap();
        let fit = ols(&d.y, &d.x, "oracle").unwrap();
        let sigma = fit.resid.transpose() * &fit.resid / (d.y.nrows() - d.x.ncols()) as f64;
        let oracle = cholesky_irf(&fit.coef.transpose(), &sigma, 2, 8).unwrap();
        assert_eq!(r.point.dim(), oracle.dim());
        for (a, b) in r.point.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_coefficients_average_out() {
        let data = panel(&[0.7, -0.7], 400, 2);
        let r = mean_group(&data, &cfg()).unwrap();
        let a0 = r.countries[0].coeffs[(1, 1)];
        let a1 = r.countries[1].coeffs[(1, 1)];
        assert!((r.mean_coeffs[(1, 1)] - 0.5 * (a0 + a1)).abs() < 1e-14);
        assert!(r.mean_coeffs[(1, 1)].abs() < 0.1);
        // Own response after impact is second order in the averaged coefficient.
        assert!(r.point[(1, 1, 1)].abs() < 0.1 * r.point[(1, 1, 0)]);
    }

    #[test]
    fn rank_deficient_country_is_dropped() {
        let mut data = panel(&[0.5, 0.5, 0.5], 100, 3);
        let mut values = data.values().clone();
        values.index_axis_mut(Axis(0), 1).fill(1.0);
        data = PanelDataset::new(
            data.countries().to_vec(),
            data.dates().to_vec(),
            data.variables().to_vec(),
            values,
        )
        .unwrap()
        .with_shocks(data.shock_names().to_vec(), data.shocks().clone())
        .unwrap();
        let r = mean_group(&data, &cfg()).unwrap();
        assert_eq!(r.dropped, ["C1"]);
        assert_eq!(r.countries.len(), 2);
    }

    #[test]
    fn too_few_survivors() {
        let data = panel(&[0.5, 0.5], 100, 4);
        let mut values = data.values().clone();
        values.index_axis_mut(Axis(0), 0).fill(2.0);
        let data = PanelDataset::new(
            data.countries().to_vec(),
            data.dates().to_vec(),
            data.variables().to_vec(),
            values,
        )
        .unwrap()
        .with_shocks(data.shock_names().to_vec(), data.shocks().clone())
        .unwrap();
        assert!(matches!(
            mean_group(&data, &cfg()),
            Err(Error::InsufficientObservations(_))
        ));
    }

    #[test]
    fn bands_bracket_country_irfs() {
        let data = panel(&[0.3, 0.5, 0.7, 0.6], 200, 5);
        let r = mean_group(&data, &cfg()).unwrap();
        let lo = r.bands.percentile_index(5.0).unwrap();
        let hi = r.bands.percentile_index(95.0).unwrap();
        for h in 0..=8 {
            let own: Vec<f64> = r.countries.iter().map(|c| c.irf[(1, 1, h)]).collect();
            let min = own.iter().copied().fold(f64::INFINITY, f64::min);
            let max = own.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(r.bands.responses[(1, 1, h, lo)] >= min - 1e-12);
            assert!(r.bands.responses[(1, 1, h, hi)] <= max + 1e-12);
        }
    }
}
