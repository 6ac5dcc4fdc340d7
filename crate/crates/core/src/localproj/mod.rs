//! Panel local projections of country outcomes on the policy shocks.
//!
//! For each horizon `h` the outcome `y_{i,t+h}` is regressed on the
//! standardized shocks at `t`, country-specific lags of the outcome, of the
//! other panel variables and of the shocks, plus a constant (pooled),
//! country intercepts (fixed effects) or country intercepts and trends.

mod cluster;
mod sbic;

pub use cluster::{twoway_cluster_cov, ClusterCov};
pub use sbic::{sbic_lag_select, var_sbic};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sample_sd;
use crate::numfmt::fmt_sig;
use crate::paneldata::PanelDataset;

/// Minimum usable months per country at the longest horizon.
const MIN_ROWS_PER_COUNTRY: usize = 10;
/// Relative residual norm below which a column counts as collinear.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpSpec {
    Pooled,
    FixedEffects,
    FeTrend,
}

impl LpSpec {
    pub const ALL: [LpSpec; 3] = [LpSpec::Pooled, LpSpec::FixedEffects, LpSpec::FeTrend];
}

impl fmt::Display for LpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpSpec::Pooled => "pooled",
            LpSpec::FixedEffects => "fixed_effects",
            LpSpec::FeTrend => "fe_trend",
        })
    }
}

impl FromStr for LpSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(LpSpec::Pooled),
            "fixed_effects" | "fe" => Ok(LpSpec::FixedEffects),
            "fe_trend" => Ok(LpSpec::FeTrend),
            other => Err(Error::InvalidInput(format!(
                "unknown LP spec {other:?} (expected pooled, fixed_effects or fe_trend)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    /// Largest horizon.
    pub horizons: usize,
    /// Lags of the outcome.
    pub j_y: usize,
    /// Lags of each other panel variable.
    pub j_x: usize,
    /// Lags of each shock.
    pub j_i: usize,
    pub spec: LpSpec,
    /// When set, `j_y = j_x` is chosen per country by SBIC over `1..=max`.
    pub sbic_max_lag: Option<usize>,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            horizons: 24,
            j_y: 1,
            j_x: 1,
            j_i: 2,
            spec: LpSpec::Pooled,
            sbic_max_lag: None,
        }
    }
}

/// Per-horizon responses to one-standard-deviation shocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpResult {
    pub spec: LpSpec,
    pub outcome: String,
    pub shock_names: Vec<String>,
    /// `beta[shock][h]`.
    pub beta: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    /// Sample standard deviations the raw shocks were divided by.
    pub scale: Vec<f64>,
    pub n_obs: Vec<usize>,
    /// Names of regressors dropped as collinear, per horizon.
    pub dropped: Vec<Vec<String>>,
    /// Horizons whose clustered covariance needed eigenvalue truncation.
    pub truncated: Vec<bool>,
    /// Outcome/control lag order used for each country.
    pub country_lags: Vec<usize>,
}

impl LpResult {
    pub fn horizons(&self) -> usize {
        self.beta[0].len() - 1
    }

    pub fn beta_mp(&self) -> &[f64] {
        &self.beta[0]
    }

    pub fn beta_id(&self) -> &[f64] {
        &self.beta[1]
    }

    pub fn se_mp(&self) -> &[f64] {
        &self.se[0]
    }

    pub fn se_id(&self) -> &[f64] {
        &self.se[1]
    }
}

/// Writes `spec,outcome,shock,horizon,beta,se` plus `lo_b,hi_b` columns for
/// every band multiple `b`.
pub fn write_lp_csv<W: Write>(results: &[LpResult], bands: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["spec", "outcome", "shock", "horizon", "beta", "se"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for b in bands {
        header.push(format!("lo_{}", fmt_sig(*b)));
        header.push(format!("hi_{}", fmt_sig(*b)));
    }
    w.write_record(&header)?;
    for r in results {
        for (s, name) in r.shock_names.iter().enumerate() {
            for h in 0..r.beta[s].len() {
                let (b, se) = (r.beta[s][h], r.se[s][h]);
                let mut row = vec![
                    r.spec.to_string(),
                    r.outcome.clone(),
                    name.clone(),
                    h.to_string(),
                    fmt_sig(b),
                    fmt_sig(se),
                ];
                for m in bands {
                    row.push(fmt_sig(b - m * se));
                    row.push(fmt_sig(b + m * se));
                }
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<lp csv>", e))?;
    Ok(())
}

/// Local-projection responses of `outcome` to every shock in the dataset.
pub fn lp_estimate(dataset: &PanelDataset, outcome: &str, config: &LpConfig) -> Result<LpResult> {
    let (n_c, n_t, _) = dataset.dim();
    let m = dataset.n_shocks();
    if m == 0 {
        return Err(Error::InvalidInput("local projections need shock series".into()));
    }
    let y_idx = dataset.variable_index(outcome)?;
    let country_lags: Vec<usize> = match config.sbic_max_lag {
        Some(max) => dataset
            .countries()
            .iter()
            .map(|c| sbic_lag_select(dataset, c, max))
            .collect::<Result<_>>()?,
        None => vec![config.j_y; n_c],
    };
    let (j_y, j_x): (Vec<usize>, Vec<usize>) = match config.sbic_max_lag {
        Some(_) => (country_lags.clone(), country_lags.clone()),
        None => (vec![config.j_y; n_c], vec![config.j_x; n_c]),
    };
    let start = j_y
        .iter()
        .chain(&j_x)
        .copied()
        .chain(std::iter::once(config.j_i))
        .max()
        .unwrap_or(0);
    let usable = n_t as i64 - config.horizons as i64 - start as i64;
    if usable < MIN_ROWS_PER_COUNTRY as i64 {
        return Err(Error::InsufficientObservations(format!(
            "T = {n_t} leaves {usable} months per country at horizon {} with {start} lags (need {MIN_ROWS_PER_COUNTRY})",
            config.horizons
        )));
    }

    let scale: Vec<f64> = (0..m)
        .map(|s| {
            let sd = sample_sd(&dataset.shock_series(s));
            if sd > 0.0 && sd.is_finite() {
                Ok(sd)
            } else {
                Err(Error::Degenerate(format!(
                    "shock {} has zero variance",
                    dataset.shock_names()[s]
                )))
            }
        })
        .collect::<Result<_>>()?;

    let layout = Layout::new(dataset, y_idx, &j_y, &j_x, config, &scale);
    let fits: Vec<HorizonFit> = (0..=config.horizons)
        .into_par_iter()
        .map(|h| layout.fit(h, start))
        .collect::<Result<_>>()?;

    Ok(LpResult {
        spec: config.spec,
        outcome: outcome.to_string(),
        shock_names: dataset.shock_names().to_vec(),
        beta: (0..m).map(|s| fits.iter().map(|f| f.beta[s]).collect()).collect(),
        se: (0..m).map(|s| fits.iter().map(|f| f.se[s]).collect()).collect(),
        scale,
        n_obs: fits.iter().map(|f| f.n_obs).collect(),
        dropped: fits.iter().map(|f| f.dropped.clone()).collect(),
        truncated: fits.iter().map(|f| f.truncated).collect(),
        country_lags,
    })
}

#[derive(Debug, Clone, Copy)]
enum Column {
    Shock(usize),
    /// Lag `lag` of panel variable `var`, for country `country` only.
    VarLag { country: usize, var: usize, lag: usize },
    ShockLag { country: usize, shock: usize, lag: usize },
    Constant,
    CountryEffect(usize),
    CountryTrend(usize),
}

struct Layout<'a> {
    data: &'a PanelDataset,
    y_idx: usize,
    columns: Vec<Column>,
    scale: &'a [f64],
}

struct HorizonFit {
    beta: Vec<f64>,
    se: Vec<f64>,
    n_obs: usize,
    dropped: Vec<String>,
    truncated: bool,
}

impl<'a> Layout<'a> {
    fn new(
        data: &'a PanelDataset,
        y_idx: usize,
        j_y: &[usize],
        j_x: &[usize],
        config: &LpConfig,
        scale: &'a [f64],
    ) -> Self {
        let (n_c, _, n_v) = data.dim();
        let m = data.n_shocks();
        let mut columns: Vec<Column> = (0..m).map(Column::Shock).collect();
        for c in 0..n_c {
            for lag in 1..=j_y[c] {
                columns.push(Column::VarLag { country: c, var: y_idx, lag });
            }
            for var in (0..n_v).filter(|&v| v != y_idx) {
                for lag in 1..=j_x[c] {
                    columns.push(Column::VarLag { country: c, var, lag });
                }
            }
            for shock in 0..m {
                for lag in 1..=config.j_i {
                    columns.push(Column::ShockLag { country: c, shock, lag });
                }
            }
        }
        match config.spec {
            LpSpec::Pooled => columns.push(Column::Constant),
            LpSpec::FixedEffects => columns.extend((0..n_c).map(Column::CountryEffect)),
            LpSpec::FeTrend => {
                columns.extend((0..n_c).map(Column::CountryEffect));
                columns.extend((0..n_c).map(Column::CountryTrend));
            }
        }
        Self {
            data,
            y_idx,
            columns,
            scale,
        }
    }

    fn name(&self, col: Column) -> String {
        let d = self.data;
        match col {
            Column::Shock(s) => d.shock_names()[s].clone(),
            Column::VarLag { country, var, lag } => {
                format!("{}.L{lag}[{}]", d.variables()[var], d.countries()[country])
            }
            Column::ShockLag { country, shock, lag } => {
                format!("{}.L{lag}[{}]", d.shock_names()[shock], d.countries()[country])
            }
            Column::Constant => "const".into(),
            Column::CountryEffect(c) => format!("fe[{}]", d.countries()[c]),
            Column::CountryTrend(c) => format!("trend[{}]", d.countries()[c]),
        }
    }

    fn value(&self, col: Column, i: usize, t: usize) -> f64 {
        let d = self.data;
        match col {
            Column::Shock(s) => d.shocks()[(t, s)] / self.scale[s],
            Column::VarLag { country, var, lag } => {
                if country == i {
                    d.values()[(i, t - lag, var)]
                } else {
                    0.0
                }
            }
            Column::ShockLag { country, shock, lag } => {
                if country == i {
                    d.shocks()[(t - lag, shock)] / self.scale[shock]
                } else {
                    0.0
                }
            }
            Column::Constant => 1.0,
            Column::CountryEffect(c) => f64::from(u8::from(c == i)),
            Column::CountryTrend(c) => {
                if c == i {
                    t as f64
                } else {
                    0.0
                }
            }
        }
    }

    fn fit(&self, h: usize, start: usize) -> Result<HorizonFit> {
        let (n_c, n_t, _) = self.data.dim();
        let m = self.data.n_shocks();
        let obs: Vec<(usize, usize)> = (0..n_c)
            .flat_map(|i| (start..n_t - h).map(move |t| (i, t)))
            .collect();
        let n = obs.len();
        let x = DMatrix::from_fn(n, self.columns.len(), |r, c| {
            let (i, t) = obs[r];
            self.value(self.columns[c], i, t)
        });
        let y = DVector::from_fn(n, |r, _| {
            let (i, t) = obs[r];
            self.data.values()[(i, t + h, self.y_idx)]
        });
        let reg = PivotedOls::fit(&x, &y)?;
        let dropped: Vec<String> = reg
            .dropped
            .iter()
            .map(|&c| self.name(self.columns[c]))
            .collect();
        for s in 0..m {
            if reg.dropped.contains(&s) {
                return Err(Error::Collinear(format!(
                    "shock {} is collinear with the controls at horizon {h} (dropped: {})",
                    self.data.shock_names()[s],
                    dropped.join(", ")
                )));
            }
        }
        let xk = x.select_columns(&reg.kept);
        let country: Vec<usize> = obs.iter().map(|o| o.0).collect();
        let time: Vec<usize> = obs.iter().map(|o| o.1).collect();
        let cov = cluster::twoway_with_bread(&xk, &reg.resid, &reg.bread, &country, &time)?;
        // Shock columns come first and are never dropped, so they lead `kept`.
        Ok(HorizonFit {
            beta: (0..m).map(|s| reg.beta[s]).collect(),
            se: (0..m).map(|s| cov.se(s)).collect(),
            n_obs: n,
            dropped,
            truncated: cov.truncated,
        })
    }
}

/// Least squares through a Gram-Schmidt QR that skips columns lying in the
/// span of the earlier ones.
struct PivotedOls {
    kept: Vec<usize>,
    dropped: Vec<usize>,
    beta: DVector<f64>,
    resid: DVector<f64>,
    /// `(X_kept' X_kept)^-1`.
    bread: DMatrix<f64>,
}

impl PivotedOls {
    fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let (n, k) = x.shape();
        let mut q: Vec<DVector<f64>> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut r_cols: Vec<Vec<f64>> = Vec::new();
        for c in 0..k {
            let orig = x.column(c).into_owned();
            let norm0 = orig.norm();
            let mut v = orig.clone();
            let mut coefs = vec![0.0; q.len()];
            // Two passes keep the basis orthogonal to working precision.
            for _ in 0..2 {
                for (j, qj) in q.iter().enumerate() {
                    let d = qj.dot(&v);
                    coefs[j] += d;
                    v.axpy(-d, qj, 1.0);
                }
            }
            let norm = v.norm();
            if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0 {
                dropped.push(c);
                continue;
            }
            coefs.push(norm);
            r_cols.push(coefs);
            q.push(v / norm);
            kept.push(c);
        }
        let p = kept.len();
        if n <= p {
            return Err(Error::InsufficientObservations(format!(
                "{n} observations for {p} regressors"
            )));
        }
        let mut r = DMatrix::zeros(p, p);
        for (j, col) in r_cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                r[(i, j)] = *v;
            }
        }
        let qty = DVector::from_iterator(p, q.iter().map(|qj| qj.dot(y)));
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Collinear("triangular solve failed".into()))?;
        let mut fitted = DVector::zeros(n);
        for (qj, c) in q.iter().zip(qty.iter()) {
            fitted.axpy(*c, qj, 1.0);
        }
        let resid = y - fitted;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| Error::Collinear("triangular inverse failed".into()))?;
        let bread = &r_inv * r_inv.transpose();
        Ok(Self {
            kept,
            dropped,
            beta,
            resid,
            bread,
        })
    }
}
