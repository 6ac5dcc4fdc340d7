use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::Design;
use super::{BvarConfig, PriorConfig};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, condition_number, ols, spd_inverse, substream, symmetrize};

/// Retries allowed per draw index before giving up on a non-PD covariance.
const MAX_REDRAWS: usize = 100;

/// One draw of the reduced-form VAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    /// (m+n) x ((m+n)p + 1), one row per equation: `[A_1 .. A_p, c]`.
    pub coeffs: DMatrix<f64>,
    /// (m+n) x (m+n) innovation covariance.
    pub sigma: DMatrix<f64>,
}

impl PosteriorSample {
    pub fn n_vars(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn lags(&self) -> usize {
        (self.coeffs.ncols() - 1) / self.n_vars()
    }

    /// Lag-`l` coefficient matrix, `l` 1-based.
    pub fn lag_matrix(&self, l: usize) -> DMatrix<f64> {
        let k = self.n_vars();
        self.coeffs.columns((l - 1) * k, k).into_owned()
    }
}

/// Conjugate posterior `Sigma ~ IW(S, nu)`, `vec(B) | Sigma ~ N(vec(B_mean), Sigma (x) V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwPosterior {
    /// k x q posterior mean.
    pub b_mean: DMatrix<f64>,
    /// Lower Cholesky factor of `V^-1`.
    pub v_inv_chol: DMatrix<f64>,
    pub scale: DMatrix<f64>,
    pub dof: f64,
    /// Condition number of `X'X`.
    pub cond: f64,
}

/// What a regressor column is, for building the Minnesota moments.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Regressor {
    Lag { var: usize, lag: usize },
    Contemporaneous { var: usize },
    Constant,
}

struct PriorMoments {
    b0: DMatrix<f64>,
    v0_inv_diag: Vec<f64>,
    s0: DMatrix<f64>,
    nu0: f64,
}

impl NiwPosterior {
    fn fit(
        y: &DMatrix<f64>,
        x: &DMatrix<f64>,
        prior: Option<PriorMoments>,
        what: &str,
    ) -> Result<Self> {
        let (r, k) = x.shape();
        let q = y.ncols();
        let xtx = symmetrize(&(x.transpose() * x));
        let cond = condition_number(&xtx);
        let (b_mean, v_inv, scale, dof) = match prior {
            None => {
                if r < k + q {
                    return Err(Error::InsufficientObservations(format!(
                        "{what}: {r} rows for {k} regressors and {q} equations"
                    )));
                }
                let fit = ols(y, x, what)?;
                let scale = symmetrize(&(fit.resid.transpose() * &fit.resid));
                (fit.coef, xtx, scale, (r - k) as f64)
            }
            Some(p) => {
                let v0_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(p.v0_inv_diag));
                let v_inv = symmetrize(&(&v0_inv + &xtx));
                let v = spd_inverse(&v_inv, what).map_err(|_| Error::RankDeficient {
                    what: what.to_string(),
                    cond,
                })?;
                let b = &v * (&v0_inv * &p.b0 + x.transpose() * y);
                let e = y - x * &b;
                let db = &b - &p.b0;
                let scale = symmetrize(&(p.s0 + e.transpose() * &e + db.transpose() * &v0_inv * &db));
                (b, v_inv, scale, p.nu0 + r as f64)
            }
        };
        let v_inv_chol = cholesky_lower(&v_inv).ok_or(Error::RankDeficient {
            what: what.to_string(),
            cond,
        })?;
        if cholesky_lower(&scale).is_none() {
            return Err(Error::NotPositiveDefinite(format!("{what}: posterior scale matrix")));
        }
        Ok(Self {
            b_mean,
            v_inv_chol,
            scale,
            dof,
            cond,
        })
    }

    /// Posterior mean of the covariance, `S / (nu - q - 1)`.
    pub fn sigma_mean(&self) -> DMatrix<f64> {
        let q = self.scale.nrows() as f64;
        &self.scale / (self.dof - q - 1.0)
    }

    /// Draws `(B, Sigma)`; `None` when the drawn covariance is not PD.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
        let q = self.scale.nrows();
        let k = self.b_mean.nrows();
        // Bartlett: Sigma^-1 = (L A)(L A)' with L L' = S^-1.
        let s_inv = spd_inverse(&self.scale, "posterior scale")?;
        let l = cholesky_lower(&s_inv)
            .ok_or_else(|| Error::NotPositiveDefinite("inverse posterior scale".into()))?;
        let mut a = DMatrix::zeros(q, q);
        for i in 0..q {
            let chi = ChiSquared::new(self.dof - i as f64)
                .map_err(|_| Error::InvalidInput(format!("Wishart dof {} too small", self.dof)))?;
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let g = l * a;
        let Some(g_inv) = g.try_inverse() else {
            return Ok(None);
        };
        let sigma = symmetrize(&(g_inv.transpose() * g_inv));
        let Some(sigma_chol) = cholesky_lower(&sigma) else {
            return Ok(None);
        };
        let z = DMatrix::from_fn(k, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        // V^{1/2} = R^{-T} where R R' = V^-1.
        let vz = self
            .v_inv_chol
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("coefficient precision".into()))?;
        let b = &self.b_mean + vz * sigma_chol.transpose();
        Ok(Some((b, sigma)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Blocks {
    Joint(NiwPosterior),
    /// Shock block on its own lags; country block conditional on the
    /// contemporaneous shock variables.
    BlockExogenous {
        shock: NiwPosterior,
        country: NiwPosterior,
    },
}

/// Fitted posterior of the pooled model; serializable so draws can be
/// regenerated from `(posterior, seed)` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub names: Vec<String>,
    pub n_shocks: usize,
    pub lags: usize,
    pub n_obs: usize,
    blocks: Blocks,
}

/// Posterior samples plus bookkeeping.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub samples: Vec<PosteriorSample>,
    pub rejected: usize,
}

impl Posterior {
    pub fn fit(design: &Design, config: &BvarConfig) -> Result<Self> {
        config.validate()?;
        if design.lags != config.lags {
            return Err(Error::InvalidInput(format!(
                "design built with {} lags, config asks for {}",
                design.lags, config.lags
            )));
        }
        let k_vars = design.n_vars();
        let m = design.n_shocks;
        let prior = &config.prior;
        let sigmas = if prior.diffuse {
            Vec::new()
        } else {
            ar_residual_variances(design)?
        };
        let full_regs: Vec<Regressor> = (1..=design.lags)
            .flat_map(|lag| (0..k_vars).map(move |var| Regressor::Lag { var, lag }))
            .chain(std::iter::once(Regressor::Constant))
            .collect();

        let blocks = if config.block_exogenous && m > 0 && m < k_vars {
            let shock_eqs: Vec<usize> = (0..m).collect();
            let shock_regs: Vec<Regressor> = full_regs
                .iter()
                .copied()
                .filter(|r| !matches!(r, Regressor::Lag { var, .. } if *var >= m))
                .collect();
            let x_m = select_columns(design, &shock_regs);
            let y_m = design.y.columns(0, m).into_owned();
            let shock = NiwPosterior::fit(
                &y_m,
                &x_m,
                moments(prior, &sigmas, &shock_regs, &shock_eqs, m),
                "shock block",
            )?;

            let country_eqs: Vec<usize> = (m..k_vars).collect();
            let mut country_regs = full_regs.clone();
            country_regs.extend((0..m).map(|var| Regressor::Contemporaneous { var }));
            let mut x_y = DMatrix::zeros(design.x.nrows(), design.x.ncols() + m);
            x_y.columns_mut(0, design.x.ncols()).copy_from(&design.x);
            x_y.columns_mut(design.x.ncols(), m).copy_from(&y_m);
            let y_y = design.y.columns(m, k_vars - m).into_owned();
            let country = NiwPosterior::fit(
                &y_y,
                &x_y,
                moments(prior, &sigmas, &country_regs, &country_eqs, m),
                "country block",
            )?;
            Blocks::BlockExogenous { shock, country }
        } else {
            let eqs: Vec<usize> = (0..k_vars).collect();
            Blocks::Joint(NiwPosterior::fit(
                &design.y,
                &design.x,
                moments(prior, &sigmas, &full_regs, &eqs, m),
                "pooled VAR",
            )?)
        };
        Ok(Self {
            names: design.names.clone(),
            n_shocks: m,
            lags: design.lags,
            n_obs: design.y.nrows(),
            blocks,
        })
    }

    /// Largest condition number of the `X'X` matrices involved.
    pub fn condition_number(&self) -> f64 {
        match &self.blocks {
            Blocks::Joint(b) => b.cond,
            Blocks::BlockExogenous { shock, country } => shock.cond.max(country.cond),
        }
    }

    pub fn is_block_exogenous(&self) -> bool {
        matches!(self.blocks, Blocks::BlockExogenous { .. })
    }

    /// Posterior-mean coefficients in equation-row layout (joint model only).
    pub fn mean_coeffs(&self) -> Option<DMatrix<f64>> {
        match &self.blocks {
            Blocks::Joint(b) => Some(b.b_mean.transpose()),
            Blocks::BlockExogenous { .. } => None,
        }
    }

    pub fn joint(&self) -> Option<&NiwPosterior> {
        match &self.blocks {
            Blocks::Joint(b) => Some(b),
            Blocks::BlockExogenous { .. } => None,
        }
    }

    /// One draw; `None` signals a rejected (non-PD) covariance.
    pub fn draw_one<R: Rng>(&self, rng: &mut R) -> Result<Option<PosteriorSample>> {
        match &self.blocks {
            Blocks::Joint(b) => Ok(b.draw(rng)?.map(|(coef, sigma)| PosteriorSample {
                coeffs: coef.transpose(),
                sigma,
            })),
            Blocks::BlockExogenous { shock, country } => {
                let Some((b_m, s_mm)) = shock.draw(rng)? else {
                    return Ok(None);
                };
                let Some((g, s_v)) = country.draw(rng)? else {
                    return Ok(None);
                };
                Ok(Some(self.assemble_block_exogenous(&b_m, &s_mm, &g, &s_v)))
            }
        }
    }

    fn assemble_block_exogenous(
        &self,
        b_m: &DMatrix<f64>,
        s_mm: &DMatrix<f64>,
        g: &DMatrix<f64>,
        s_v: &DMatrix<f64>,
    ) -> PosteriorSample {
        let m = self.n_shocks;
        let kv = self.names.len();
        let n = kv - m;
        let kx = kv * self.lags + 1;
        // Embed the restricted shock-block coefficients in the full regressor layout.
        let mut b_m_full = DMatrix::zeros(kx, m);
        let mut src = 0;
        for l in 0..self.lags {
            for j in 0..m {
                b_m_full.row_mut(l * kv + j).copy_from(&b_m.row(src));
                src += 1;
            }
        }
        b_m_full.row_mut(kx - 1).copy_from(&b_m.row(src));

        let b_y = g.rows(0, kx);
        let gamma = g.rows(kx, m);
        let b_y_rf = b_y + &b_m_full * gamma;
        let mut coeffs = DMatrix::zeros(kv, kx);
        coeffs.rows_mut(0, m).copy_from(&b_m_full.transpose());
        coeffs.rows_mut(m, n).copy_from(&b_y_rf.transpose());

        let s_my = s_mm * gamma;
        let s_yy = gamma.transpose() * &s_my + s_v;
        let mut sigma = DMatrix::zeros(kv, kv);
        sigma.view_mut((0, 0), (m, m)).copy_from(s_mm);
        sigma.view_mut((0, m), (m, n)).copy_from(&s_my);
        sigma.view_mut((m, 0), (n, m)).copy_from(&s_my.transpose());
        sigma.view_mut((m, m), (n, n)).copy_from(&s_yy);
        PosteriorSample {
            coeffs,
            sigma: symmetrize(&sigma),
        }
    }

    /// Draws indices `burn..draws`, each from its own seeded substream, so the
    /// output does not depend on thread scheduling. Non-PD covariances are
    /// redrawn; more than 1% rejections is an error.
    pub fn sample(&self, config: &BvarConfig, seed: u64) -> Result<PosteriorDraws> {
        config.validate()?;
        let results: Vec<(PosteriorSample, usize)> = (config.burn..config.draws)
            .into_par_iter()
            .map(|idx| {
                let mut rng = substream(seed, idx as u64);
                let mut rejected = 0;
                loop {
                    if let Some(s) = self.draw_one(&mut rng)? {
                        return Ok((s, rejected));
                    }
                    rejected += 1;
                    if rejected > MAX_REDRAWS {
                        return Err(Error::NotPositiveDefinite(format!(
                            "draw {idx}: covariance not PD after {MAX_REDRAWS} redraws"
                        )));
                    }
                }
            })
            .collect::<Result<_>>()?;
        let rejected: usize = results.iter().map(|(_, r)| r).sum();
        let total = config.kept();
        if rejected * 100 > total {
            return Err(Error::TooManyRejections { rejected, total });
        }
        Ok(PosteriorDraws {
            samples: results.into_iter().map(|(s, _)| s).collect(),
            rejected,
        })
    }
}

/// Fits the posterior and returns `draws - burn` samples.
pub fn fit_posterior(design: &Design, config: &BvarConfig, seed: u64) -> Result<Vec<PosteriorSample>> {
    Ok(Posterior::fit(design, config)?.sample(config, seed)?.samples)
}

fn select_columns(design: &Design, regs: &[Regressor]) -> DMatrix<f64> {
    let cols: Vec<usize> = regs
        .iter()
        .map(|r| match *r {
            Regressor::Lag { var, lag } => design.lag_column(lag, var),
            Regressor::Constant => design.const_column(),
            Regressor::Contemporaneous { .. } => unreachable!("not a column of X"),
        })
        .collect();
    design.x.select_columns(&cols)
}

/// Residual variance of a univariate AR(p) with intercept for every variable.
fn ar_residual_variances(design: &Design) -> Result<Vec<f64>> {
    let k = design.n_vars();
    (0..k)
        .map(|j| {
            let mut cols: Vec<usize> = (1..=design.lags).map(|l| design.lag_column(l, j)).collect();
            cols.push(design.const_column());
            let x = design.x.select_columns(&cols);
            let y = design.y.columns(j, 1).into_owned();
            let fit = ols(&y, &x, &format!("AR scale of {}", design.names[j]))?;
            let dof = (y.nrows() - cols.len()) as f64;
            let s2 = fit.resid.norm_squared() / dof;
            if !(s2 > 1e-300) {
                return Err(Error::Degenerate(format!(
                    "variable {} has zero residual variance",
                    design.names[j]
                )));
            }
            Ok(s2)
        })
        .collect()
}

/// Minnesota Normal-Wishart prior moments for the given equations/regressors.
fn moments(
    prior: &PriorConfig,
    sigmas: &[f64],
    regs: &[Regressor],
    eqs: &[usize],
    n_shocks: usize,
) -> Option<PriorMoments> {
    if prior.diffuse {
        return None;
    }
    let (l1, l3, l4) = (prior.tightness, prior.lag_decay, prior.intercept);
    let v0_inv_diag = regs
        .iter()
        .map(|r| {
            let var = match *r {
                Regressor::Lag { var, lag } => (l1 / (sigmas[var].sqrt() * (lag as f64).powf(l3))).powi(2),
                Regressor::Contemporaneous { var } => (l1 * l4 / sigmas[var].sqrt()).powi(2),
                Regressor::Constant => (l1 * l4).powi(2),
            };
            1.0 / var
        })
        .collect();
    let mut b0 = DMatrix::zeros(regs.len(), eqs.len());
    for (c, &eq) in eqs.iter().enumerate() {
        if eq < n_shocks {
            continue;
        }
        if let Some(row) = regs
            .iter()
            .position(|r| *r == Regressor::Lag { var: eq, lag: 1 })
        {
            b0[(row, c)] = prior.own_lag_mean;
        }
    }
    let q = eqs.len();
    let s0 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        q,
        eqs.iter().map(|&e| sigmas[e]),
    ));
    Some(PriorMoments {
        b0,
        v0_inv_diag,
        s0,
        nu0: q as f64 + 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mean;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Bivariate VAR(1) design simulated directly (independent of dgpsim).
    fn simulated_design(t: usize, seed: u64) -> (Design, DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]);
        let c = nalgebra::DVector::from_vec(vec![0.2, -0.1]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let l = sigma.clone().cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = nalgebra::DVector::zeros(2);
        let mut y = DMatrix::zeros(t, 2);
        let mut x = DMatrix::zeros(t, 3);
        for r in 0..t + 100 {
            let e = nalgebra::DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let next = &a * &z + &c + &l * e;
            if r >= 100 {
                let row = r - 100;
                x[(row, 0)] = z[0];
                x[(row, 1)] = z[1];
                x[(row, 2)] = 1.0;
                y[(row, 0)] = next[0];
                y[(row, 1)] = next[1];
            }
            z = next;
        }
        let design = Design {
            y,
            x,
            names: vec!["a".into(), "b".into()],
            n_shocks: 0,
            lags: 1,
            n_countries: 1,
        };
        (design, a, sigma)
    }

    fn diffuse(draws: usize, burn: usize) -> BvarConfig {
        BvarConfig {
            lags: 1,
            draws,
            burn,
            prior: PriorConfig {
                diffuse: true,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn diffuse_posterior_mean_matches_ols() {
        let (design, _, _) = simulated_design(5000, 1);
        let cfg = diffuse(2000, 0);
        let draws = fit_posterior(&design, &cfg, 3).unwrap();
        let fit = ols(&design.y, &design.x, "oracle").unwrap();
        for eq in 0..2 {
            for reg in 0..3 {
                let vals: Vec<f64> = draws.iter().map(|d| d.coeffs[(eq, reg)]).collect();
                let m = mean(&vals);
                let sd = crate::linalg::sample_sd(&vals);
                let mc_se = sd / (vals.len() as f64).sqrt();
                assert!(
                    (m - fit.coef[(reg, eq)]).abs() < 3.0 * mc_se,
                    "eq {eq} reg {reg}: {m} vs {}",
                    fit.coef[(reg, eq)]
                );
            }
        }
    }

    #[test]
    fn sigma_median_near_truth() {
        let (design, _, sigma) = simulated_design(5000, 2);
        let draws = fit_posterior(&design, &diffuse(1000, 0), 4).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut v: Vec<f64> = draws.iter().map(|d| d.sigma[(i, j)]).collect();
                v.sort_by(f64::total_cmp);
                let med = crate::linalg::percentile_sorted(&v, 50.0);
                let scale = (sigma[(i, i)] * sigma[(j, j)]).sqrt();
                assert!((med - sigma[(i, j)]).abs() < 0.05 * scale, "{i}{j}: {med}");
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let (design, _, _) = simulated_design(300, 5);
        let cfg = BvarConfig {
            lags: 1,
            draws: 60,
            burn: 10,
            ..Default::default()
        };
        let a = fit_posterior(&design, &cfg, 17).unwrap();
        let b = fit_posterior(&design, &cfg, 17).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        let c = fit_posterior(&design, &cfg, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn burn_in_discards_leading_draws() {
        let (design, _, _) = simulated_design(300, 5);
        let long = BvarConfig { lags: 1, draws: 40, burn: 0, ..Default::default() };
        let burned = BvarConfig { lags: 1, draws: 40, burn: 15, ..Default::default() };
        let a = fit_posterior(&design, &long, 8).unwrap();
        let b = fit_posterior(&design, &burned, 8).unwrap();
        assert_eq!(&a[15..], &b[..]);
    }

    #[test]
    fn tight_prior_pulls_toward_prior_mean() {
        let (design, _, _) = simulated_design(200, 6);
        let mut cfg = BvarConfig { lags: 1, ..Default::default() };
        cfg.prior.tightness = 1e-4;
        cfg.prior.own_lag_mean = 0.9;
        let post = Posterior::fit(&design, &cfg).unwrap();
        let b = post.mean_coeffs().unwrap();
        assert!((b[(0, 0)] - 0.9).abs() < 1e-3);
        assert!((b[(1, 1)] - 0.9).abs() < 1e-3);
        assert!(b[(0, 1)].abs() < 1e-3);
    }

    #[test]
    fn rank_deficient_diffuse_design_errors() {
        let (mut design, _, _) = simulated_design(200, 7);
        let col = design.x.column(0).into_owned();
        design.x.set_column(1, &col);
        assert!(matches!(
            Posterior::fit(&design, &diffuse(20, 0)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn block_exogenous_shock_block_ignores_country_innovations() {
        let (base, _, _) = simulated_design(400, 8);
        let design = Design { n_shocks: 1, ..base };
        let cfg = BvarConfig { lags: 1, draws: 50, burn: 0, block_exogenous: true, ..Default::default() };
        let post = Posterior::fit(&design, &cfg).unwrap();
        assert!(post.is_block_exogenous());
        for s in post.sample(&cfg, 2).unwrap().samples {
            assert_eq!(s.coeffs[(0, 1)], 0.0);
            let irf = crate::pbvar::cholesky_irf(&s.coeffs, &s.sigma, 2, 12).unwrap();
            for h in 0..=12 {
                assert_eq!(irf[(1, 0, h)], 0.0);
            }
        }
    }
}
