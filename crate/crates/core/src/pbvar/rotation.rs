use chrono::NaiveDate;
use ndarray::{Array4, Axis};
use rand::Rng;

use super::design::build_design;
use super::irf::{irf_draws, IrfDraws, IrfResult};
use super::posterior::Posterior;
use super::BvarConfig;
use crate::error::{Error, Result};
use crate::hfdecomp::ShockDecomposition;
use crate::linalg::{mix_seed, substream};
use crate::paneldata::{DatedShocks, PanelDataset};

pub const MP_SHOCK: &str = "i_mp";
pub const ID_SHOCK: &str = "i_id";

#[derive(Debug, Clone, PartialEq)]
pub struct RotationOptions {
    /// Size of the uniform resample from the pooled draws; `None` pools
    /// every retained draw as is.
    pub pool_draws: Option<usize>,
}

impl Default for RotationOptions {
    fn default() -> Self {
        Self {
            pool_draws: Some(10_000),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotationBandResult {
    /// Percentiles of the pooled resample.
    pub pooled: IrfResult,
    /// Median IRF per grid point, `grid x shock x variable x horizon`.
    pub grid_medians: Array4<f64>,
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Draws entering the pooled percentiles.
    pub pooled_draws: usize,
}

impl RotationBandResult {
    pub fn median_at(&self, g: usize) -> ndarray::ArrayView3<'_, f64> {
        self.grid_medians.index_axis(Axis(0), g)
    }
}

/// Re-estimates the pooled model at every rotation of the grid and pools
/// the structural responses to the two policy shocks with uniform weight.
///
/// `dates` are the announcement dates the decompositions are indexed by.
/// Grid point `g` is estimated with seed `mix_seed(seed, g)`.
pub fn rotation_band_irf(
    dataset: &PanelDataset,
    dates: &[NaiveDate],
    grid: &[ShockDecomposition],
    config: &BvarConfig,
    options: &RotationOptions,
    seed: u64,
) -> Result<RotationBandResult> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty rotation grid".into()));
    }
    let n_grid = grid.len();
    // (grid point, position in [0,1)) pairs, drawn before any estimation.
    let picks: Option<Vec<(usize, f64)>> = options.pool_draws.map(|n| {
        let mut rng = substream(seed, u64::MAX);
        (0..n)
            .map(|_| (rng.random_range(0..n_grid), rng.random::<f64>()))
            .collect()
    });

    let mut medians: Option<Array4<f64>> = None;
    let mut pooled: Vec<ndarray::Array3<f64>> = Vec::new();
    let mut names = (Vec::new(), Vec::new());
    let mut rejected = 0;
    for (g, dec) in grid.iter().enumerate() {
        let shocks = DatedShocks::new(
            dates.to_vec(),
            vec![MP_SHOCK.into(), ID_SHOCK.into()],
            &[&dec.i_mp, &dec.i_id],
        )?;
        let data = dataset.align_shocks(&shocks)?;
        let design = build_design(&data, config.lags)?;
        let post = Posterior::fit(&design, config)?;
        let draws = post.sample(config, mix_seed(seed, g as u64))?;
        let irf = irf_draws(&draws.samples, &design.names, config.horizon, Some(2))?;
        rejected += draws.rejected + irf.rejected;
        let median = irf.summarize(&[50.0]).responses.index_axis_move(Axis(3), 0);
        let m = medians.get_or_insert_with(|| {
            let (s, v, h) = median.dim();
            Array4::zeros((n_grid, s, v, h))
        });
        m.index_axis_mut(Axis(0), g).assign(&median);

        let d = irf.n_draws();
        match &picks {
            None => pooled.extend(irf.values.outer_iter().map(|a| a.to_owned())),
            Some(p) => pooled.extend(
                p.iter()
                    .filter(|(pg, _)| *pg == g)
                    .map(|(_, u)| irf.values.index_axis(Axis(0), ((u * d as f64) as usize).min(d - 1)).to_owned()),
            ),
        }
        if g == 0 {
            names = (irf.shock_names.clone(), irf.variable_names.clone());
        }
    }
    let grid_medians = medians.expect("grid non-empty");
    let (_, s, v, h) = grid_medians.dim();
    let mut values = Array4::zeros((pooled.len(), s, v, h));
    for (i, d) in pooled.iter().enumerate() {
        values.index_axis_mut(Axis(0), i).assign(d);
    }
    let pooled_draws = pooled.len();
    let mut result = IrfDraws {
        shock_names: names.0,
        variable_names: names.1,
        values,
        rejected,
    }
    .summarize(&config.percentiles);
    result.draws_used = pooled_draws;
    Ok(RotationBandResult {
        pooled: result,
        grid_medians,
        alphas: grid.iter().map(|d| d.alpha).collect(),
        weights: grid.iter().map(|d| d.w).collect(),
        pooled_draws,
    })
}
