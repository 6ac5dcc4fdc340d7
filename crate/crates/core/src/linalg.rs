//! Small dense linear-algebra and statistics helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    m.clone().cholesky().map(|c| c.l())
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ratio of extreme eigenvalues of a symmetric matrix (infinite when singular).
pub fn condition_number(sym: &DMatrix<f64>) -> f64 {
    let eig = sym.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Least-squares fit of every column of `y` on `x`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// k x q coefficients, one column per equation.
    pub coef: DMatrix<f64>,
    pub resid: DMatrix<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub cond: f64,
}

/// Ordinary least squares through the normal equations.
///
/// Fails with `RankDeficient` when `X'X` cannot be Cholesky-factored or its
/// condition number exceeds 1e14.
pub fn ols(y: &DMatrix<f64>, x: &DMatrix<f64>, what: &str) -> Result<OlsFit> {
    if x.nrows() < x.ncols() {
        return Err(Error::InsufficientObservations(format!(
            "{what}: {} rows for {} regressors",
            x.nrows(),
            x.ncols()
        )));
    }
    let xtx = symmetrize(&(x.transpose() * x));
    let cond = condition_number(&xtx);
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::RankDeficient {
            what: what.to_string(),
            cond,
        });
    }
    let xtx_inv = spd_inverse(&xtx, what).map_err(|_| Error::RankDeficient {
        what: what.to_string(),
        cond,
    })?;
    let coef = &xtx_inv * (x.transpose() * y);
    let resid = y - x * &coef;
    Ok(OlsFit {
        coef,
        resid,
        xtx_inv,
        cond,
    })
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Linear-interpolation percentile (`q` in [0, 100]) of an ascending slice.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the n - 1 divisor.
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Deterministic random substream for work item `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent seed for a sub-task; `mix_seed(s, 0) == s`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn column_vec(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
