//! Pooled Bayesian panel SVAR with the shock block ordered first.
//!
//! Every country row stacks `z_{i,t} = [m_t; y_{i,t}]` and shares one set of
//! dynamic coefficients and one innovation covariance. The posterior is the
//! conjugate Normal-inverse-Wishart; structural responses come from the
//! lower Cholesky factor of each drawn covariance.

mod design;
mod irf;
mod mean_group;
mod posterior;
mod rotation;

pub use design::{build_design, Design};
pub use irf::{cholesky_irf, irf_draws, structural_irf, IrfDraws, IrfResult};
pub use mean_group::{mean_group, CountryEstimate, MeanGroupResult};
pub use posterior::{fit_posterior, NiwPosterior, Posterior, PosteriorDraws, PosteriorSample};
pub use rotation::{rotation_band_irf, RotationBandResult, RotationOptions, ID_SHOCK, MP_SHOCK};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minnesota-style Normal-Wishart shrinkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Overall tightness.
    pub tightness: f64,
    /// Lag decay exponent.
    pub lag_decay: f64,
    /// Intercept looseness, multiplies the overall tightness.
    pub intercept: f64,
    /// Prior mean of each country variable's own first lag. Shock-block
    /// equations always centre on zero.
    pub own_lag_mean: f64,
    /// Flat prior on coefficients and Jeffreys prior on the covariance.
    pub diffuse: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            tightness: 0.1,
            lag_decay: 1.0,
            intercept: 100.0,
            own_lag_mean: 0.8,
            diffuse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvarConfig {
    pub lags: usize,
    pub draws: usize,
    pub burn: usize,
    /// Last IRF horizon in months.
    pub horizon: usize,
    pub percentiles: Vec<f64>,
    /// Shock-block equations load only on lagged shocks and the intercept.
    pub block_exogenous: bool,
    pub prior: PriorConfig,
}

impl Default for BvarConfig {
    fn default() -> Self {
        Self {
            lags: 6,
            draws: 5000,
            burn: 500,
            horizon: 36,
            percentiles: vec![5.0, 16.0, 50.0, 84.0, 95.0],
            block_exogenous: false,
            prior: PriorConfig::default(),
        }
    }
}

impl BvarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::InvalidInput("lags must be >= 1".into()));
        }
        if self.draws <= self.burn {
            return Err(Error::InvalidInput(format!(
                "draws ({}) must exceed burn ({})",
                self.draws, self.burn
            )));
        }
        if self.percentiles.is_empty()
            || self.percentiles.iter().any(|p| !(*p > 0.0 && *p < 100.0))
            || self.percentiles.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidInput(format!(
                "percentiles {:?} must be strictly increasing inside (0, 100)",
                self.percentiles
            )));
        }
        let p = &self.prior;
        if !p.diffuse && !(p.tightness > 0.0 && p.lag_decay >= 0.0 && p.intercept > 0.0) {
            return Err(Error::InvalidInput(format!("invalid prior hyperparameters {p:?}")));
        }
        if !p.own_lag_mean.is_finite() {
            return Err(Error::InvalidInput("own_lag_mean must be finite".into()));
        }
        Ok(())
    }

    /// Retained draws after burn-in.
    pub fn kept(&self) -> usize {
        self.draws - self.burn
    }
}
