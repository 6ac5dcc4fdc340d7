use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize};

/// Cluster-robust covariance of OLS coefficients.
#[derive(Debug, Clone)]
pub struct ClusterCov {
    pub cov: DMatrix<f64>,
    /// Negative eigenvalues were truncated at zero.
    pub truncated: bool,
}

impl ClusterCov {
    pub fn se(&self, j: usize) -> f64 {
        self.cov[(j, j)].max(0.0).sqrt()
    }
}

/// Two-way (country and time) clustered covariance,
/// `V = V_country + V_time - V_country×time`.
pub fn twoway_cluster_cov(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    country: &[usize],
    time: &[usize],
) -> Result<ClusterCov> {
    let bread = spd_inverse(&(x.transpose() * x), "X'X of clustered regression")?;
    twoway_with_bread(x, resid, &bread, country, time)
}

pub(crate) fn twoway_with_bread(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    bread: &DMatrix<f64>,
    country: &[usize],
    time: &[usize],
) -> Result<ClusterCov> {
    let n = x.nrows();
    if resid.len() != n || country.len() != n || time.len() != n {
        return Err(Error::InvalidInput("cluster labels do not match the design".into()));
    }
    let pairs: Vec<(usize, usize)> = country.iter().copied().zip(time.iter().copied()).collect();
    let v_c = oneway(x, resid, bread, country, "country")?;
    let v_t = oneway(x, resid, bread, time, "time")?;
    let v_ct = oneway(x, resid, bread, &pairs, "country x time")?;
    let v = symmetrize(&(v_c + v_t - v_ct));
    if (0..v.nrows()).all(|j| v[(j, j)] >= 0.0) {
        return Ok(ClusterCov { cov: v, truncated: false });
    }
    let eig = v.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let cov = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok(ClusterCov {
        cov: symmetrize(&cov),
        truncated: true,
    })
}

/// One-way cluster-robust sandwich with the usual small-sample factor
/// `G/(G-1) * (n-1)/(n-k)`.
fn oneway<L: Eq + Hash + Copy>(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    bread: &DMatrix<f64>,
    labels: &[L],
    what: &str,
) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let mut scores: Vec<DVector<f64>> = Vec::new();
    let mut index: HashMap<L, usize> = HashMap::new();
    for r in 0..n {
        let g = *index.entry(labels[r]).or_insert_with(|| {
            scores.push(DVector::zeros(k));
            scores.len() - 1
        });
        scores[g].axpy(resid[r], &x.row(r).transpose(), 1.0);
    }
    let g = scores.len();
    if g < 2 {
        return Err(Error::InvalidInput(format!("clustering by {what} needs at least 2 clusters")));
    }
    if n <= k {
        return Err(Error::InsufficientObservations(format!("{n} rows for {k} regressors")));
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in &scores {
        meat.ger(1.0, s, s, 1.0);
    }
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - k) as f64);
    Ok(bread * meat * bread * factor)
}
