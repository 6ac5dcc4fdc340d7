//! Decomposition of high-frequency FOMC surprises into a pure monetary policy
//! (MP) shock and an information disclosure (ID) shock.
//!
//! The surprise matrix `M = [i_total, s]` is factored as `M = U C` where the
//! columns of `U = [i_mp, i_id]` are orthogonal and
//!
//! ```text
//! C = | 1  c_mp |     c_mp < 0 (rates up, stocks down)
//!     | 1  c_id |     c_id > 0 (rates up, stocks up)
//! ```
//!
//! The factorization goes through a sign-normalized QR step `M = Q R`, a
//! rotation `P(alpha)` and a diagonal rescaling `D` so that `U = Q P D` and
//! `C = D^-1 P' R`. Every admissible `alpha` lies in an open interval that
//! depends only on `R`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{correlation, sample_sd};
use crate::numfmt::fmt_sig;

/// Relative threshold on `|r22| / |r11|` below which the surprises are collinear.
pub const COLLINEARITY_TOL: f64 = 1e-12;

/// Raw per-announcement surprises.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisePanel {
    dates: Vec<NaiveDate>,
    /// T x K interest-rate contract surprises, percentage points.
    contracts: DMatrix<f64>,
    /// Equity index surprise, percent.
    equity: Vec<f64>,
}

impl SurprisePanel {
    pub fn new(dates: Vec<NaiveDate>, contracts: DMatrix<f64>, equity: Vec<f64>) -> Result<Self> {
        let t = dates.len();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "surprise panel needs at least 2 announcements, got {t}"
            )));
        }
        if contracts.ncols() == 0 {
            return Err(Error::InvalidInput("no interest-rate contracts".into()));
        }
        if contracts.nrows() != t || equity.len() != t {
            return Err(Error::InvalidInput(format!(
                "{t} dates but {} contract rows and {} equity values",
                contracts.nrows(),
                equity.len()
            )));
        }
        if contracts.iter().chain(&equity).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surprise panel".into()));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "announcement dates not strictly increasing at {}",
                w[1]
            )));
        }
        Ok(Self {
            dates,
            contracts,
            equity,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn contracts(&self) -> &DMatrix<f64> {
        &self.contracts
    }

    pub fn equity(&self) -> &[f64] {
        &self.equity
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Composite rate surprise (first principal component) paired with equity.
    pub fn to_pair(&self) -> Result<SurprisePair> {
        SurprisePair::new(pca_composite(self)?, self.equity.clone())
    }

    /// Reads `date,contract_1,...,contract_K,sp500`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = crate::error::open_csv(path)?;
        let headers = rdr.headers()?.clone();
        let n = headers.len();
        if n < 3 || &headers[0] != "date" || &headers[n - 1] != "sp500" {
            return Err(Error::schema(
                path,
                "expected header date,contract_1,...,contract_K,sp500",
            ));
        }
        let k = n - 2;
        let mut dates = Vec::new();
        let mut values = Vec::new();
        let mut equity = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            dates.push(parse_day(&rec[0])?);
            for j in 1..=k {
                values.push(parse_f64(path, &rec[j])?);
            }
            equity.push(parse_f64(path, &rec[n - 1])?);
        }
        let contracts = DMatrix::from_row_slice(dates.len(), k, &values);
        Self::new(dates, contracts, equity)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("date");
        for j in 0..self.contracts.ncols() {
            out.push_str(&format!(",contract_{}", j + 1));
        }
        out.push_str(",sp500\n");
        for (t, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for j in 0..self.contracts.ncols() {
                out.push(',');
                out.push_str(&fmt_sig(self.contracts[(t, j)]));
            }
            out.push(',');
            out.push_str(&fmt_sig(self.equity[t]));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn parse_day(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| Error::BadDate(s.to_string()))
}

pub(crate) fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::schema(path, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{} value {s:?}", path.display())));
    }
    Ok(v)
}

/// The two series entering `M`: composite rate surprise and equity surprise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurprisePair {
    i_total: Vec<f64>,
    s: Vec<f64>,
}

impl SurprisePair {
    pub fn new(i_total: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if i_total.len() != s.len() {
            return Err(Error::InvalidInput(format!(
                "i_total has {} entries, s has {}",
                i_total.len(),
                s.len()
            )));
        }
        if i_total.len() < 2 {
            return Err(Error::InvalidInput("surprise pair needs T >= 2".into()));
        }
        if i_total.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surprise pair".into()));
        }
        if i_total.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate("i_total is identically zero".into()));
        }
        Ok(Self { i_total, s })
    }

    pub fn i_total(&self) -> &[f64] {
        &self.i_total
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.i_total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_total.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.i_total.iter().map(|v| v * k).collect(),
            self.s.iter().map(|v| v * k).collect(),
        )
    }
}

/// First principal component of the contract surprises.
///
/// Columns are demeaned, the leading eigenvector of their sample covariance
/// gives the loadings, the score is signed to correlate non-negatively with the
/// first contract and rescaled to that contract's sample standard deviation.
pub fn pca_composite(panel: &SurprisePanel) -> Result<Vec<f64>> {
    let x = panel.contracts();
    let (t, k) = x.shape();
    let mut centered = x.clone();
    for j in 0..k {
        let m = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-m);
    }
    if centered.iter().all(|v| v.abs() == 0.0) {
        return Err(Error::Degenerate("all contract columns are constant".into()));
    }
    let first: Vec<f64> = centered.column(0).iter().copied().collect();
    let target_sd = sample_sd(&first);
    if target_sd == 0.0 {
        return Err(Error::Degenerate(
            "first contract is constant, composite scale undefined".into(),
        ));
    }
    let cov = centered.transpose() * &centered / (t as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let lead = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > eig.eigenvalues[best] { i } else { best });
    let loadings = eig.eigenvectors.column(lead).into_owned();
    let score: Vec<f64> = (&centered * loadings).iter().copied().collect();
    let sd = sample_sd(&score);
    let sign = if correlation(&score, &first) < 0.0 { -1.0 } else { 1.0 };
    Ok(score.iter().map(|v| sign * v * target_sd / sd).collect())
}

/// Sign-normalized thin QR factors of `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrFactors {
    /// T x 2 with orthonormal columns.
    pub q: DMatrix<f64>,
    /// Upper triangular, positive diagonal.
    pub r: Matrix2<f64>,
}

impl QrFactors {
    pub fn r11(&self) -> f64 {
        self.r[(0, 0)]
    }

    pub fn r12(&self) -> f64 {
        self.r[(0, 1)]
    }

    pub fn r22(&self) -> f64 {
        self.r[(1, 1)]
    }
}

/// Thin QR of `[i_total, s]` with `r11 > 0`, `r22 > 0`.
pub fn qr_factors(pair: &SurprisePair) -> Result<QrFactors> {
    let t = pair.len();
    let mut m = DMatrix::zeros(t, 2);
    m.column_mut(0).copy_from_slice(&pair.i_total);
    m.column_mut(1).copy_from_slice(&pair.s);
    let qr = m.qr();
    let mut q = qr.q();
    let rr = qr.r();
    let mut r = Matrix2::new(rr[(0, 0)], rr[(0, 1)], 0.0, rr[(1, 1)]);
    for j in 0..2 {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    if r[(0, 0)] == 0.0 || r[(1, 1)].abs() < COLLINEARITY_TOL * r[(0, 0)].abs() {
        return Err(Error::CollinearSurprises {
            r11: r[(0, 0)],
            r22: r[(1, 1)],
        });
    }
    Ok(QrFactors { q, r })
}

/// Open interval of rotation angles satisfying `c_mp < 0` and `c_id > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    /// Linear interpolation `(1 - w) lo + w hi`.
    pub fn at(&self, w: f64) -> f64 {
        (1.0 - w) * self.lo + w * self.hi
    }

    pub fn contains(&self, alpha: f64) -> bool {
        alpha > self.lo && alpha < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn interval_from_r(r: &Matrix2<f64>) -> Result<AngleInterval> {
    let (r12, r22) = (r[(0, 1)], r[(1, 1)]);
    let interval = if r12 > 0.0 {
        AngleInterval {
            lo: (r12 / r22).atan(),
            hi: FRAC_PI_2,
        }
    } else if r12 == 0.0 {
        AngleInterval {
            lo: 0.0,
            hi: FRAC_PI_2,
        }
    } else {
        AngleInterval {
            lo: 0.0,
            hi: (-r22 / r12).atan(),
        }
    };
    if !(interval.hi > interval.lo) {
        return Err(Error::IdentificationFailure(format!(
            "empty interval ({}, {})",
            interval.lo, interval.hi
        )));
    }
    let eps = 1e-6 * interval.width();
    for alpha in [interval.lo + eps, interval.hi - eps] {
        let (c_mp, c_id) = loadings(r, alpha);
        if !(c_mp < 0.0 && c_id > 0.0) {
            return Err(Error::IdentificationFailure(format!(
                "at alpha = {alpha}: c_mp = {c_mp}, c_id = {c_id}"
            )));
        }
    }
    Ok(interval)
}

fn rotation(alpha: f64) -> Matrix2<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn rescaling(r11: f64, alpha: f64) -> Matrix2<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix2::new(r11 * c, 0.0, 0.0, r11 * s)
}

fn loading_matrix(r: &Matrix2<f64>, alpha: f64) -> Matrix2<f64> {
    let d = rescaling(r[(0, 0)], alpha);
    let d_inv = Matrix2::new(1.0 / d[(0, 0)], 0.0, 0.0, 1.0 / d[(1, 1)]);
    d_inv * rotation(alpha).transpose() * r
}

fn loadings(r: &Matrix2<f64>, alpha: f64) -> (f64, f64) {
    let c = loading_matrix(r, alpha);
    (c[(0, 1)], c[(1, 1)])
}

/// Admissible rotation interval of a surprise pair.
pub fn admissible_angle_interval(pair: &SurprisePair) -> Result<AngleInterval> {
    interval_from_r(&qr_factors(pair)?.r)
}

/// Audit trail of one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFactors {
    pub qr: QrFactors,
    pub p: Matrix2<f64>,
    pub d: Matrix2<f64>,
    /// Full loading matrix `C = D^-1 P' R`.
    pub c: Matrix2<f64>,
}

/// Orthogonal MP / ID shock series at one rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockDecomposition {
    pub i_mp: Vec<f64>,
    pub i_id: Vec<f64>,
    pub alpha: f64,
    pub w: f64,
    pub c_mp: f64,
    pub c_id: f64,
    pub interval: AngleInterval,
    pub factors: DecompositionFactors,
}

impl ShockDecomposition {
    pub fn i_total(&self) -> Vec<f64> {
        self.i_mp.iter().zip(&self.i_id).map(|(a, b)| a + b).collect()
    }
}

/// Reusable QR factorization plus admissible interval for one surprise pair.
#[derive(Debug, Clone)]
pub struct Rotator {
    qr: QrFactors,
    interval: AngleInterval,
}

impl Rotator {
    pub fn new(pair: &SurprisePair) -> Result<Self> {
        let qr = qr_factors(pair)?;
        let interval = interval_from_r(&qr.r)?;
        Ok(Self { qr, interval })
    }

    pub fn interval(&self) -> AngleInterval {
        self.interval
    }

    pub fn qr(&self) -> &QrFactors {
        &self.qr
    }

    pub fn at_weight(&self, w: f64) -> Result<ShockDecomposition> {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::WeightOutOfRange(w));
        }
        self.build(self.interval.at(w), w)
    }

    pub fn at_angle(&self, alpha: f64) -> Result<ShockDecomposition> {
        if !self.interval.contains(alpha) {
            return Err(Error::AngleOutOfRange {
                alpha,
                lo: self.interval.lo,
                hi: self.interval.hi,
            });
        }
        let w = (alpha - self.interval.lo) / self.interval.width();
        self.build(alpha, w)
    }

    fn build(&self, alpha: f64, w: f64) -> Result<ShockDecomposition> {
        let r = self.qr.r;
        let p = rotation(alpha);
        let d = rescaling(r[(0, 0)], alpha);
        let c = loading_matrix(&r, alpha);
        let (c_mp, c_id) = (c[(0, 1)], c[(1, 1)]);
        if !(c_mp < 0.0 && c_id > 0.0) {
            return Err(Error::IdentificationFailure(format!(
                "alpha = {alpha}: c_mp = {c_mp}, c_id = {c_id}"
            )));
        }
        let pd = p * d;
        let t = self.qr.q.nrows();
        let mut i_mp = Vec::with_capacity(t);
        let mut i_id = Vec::with_capacity(t);
        for row in 0..t {
            let (q1, q2) = (self.qr.q[(row, 0)], self.qr.q[(row, 1)]);
            i_mp.push(q1 * pd[(0, 0)] + q2 * pd[(1, 0)]);
            i_id.push(q1 * pd[(0, 1)] + q2 * pd[(1, 1)]);
        }
        Ok(ShockDecomposition {
            i_mp,
            i_id,
            alpha,
            w,
            c_mp,
            c_id,
            interval: self.interval,
            factors: DecompositionFactors {
                qr: self.qr.clone(),
                p,
                d,
                c,
            },
        })
    }
}

/// Decomposition at interpolation weight `w`; `w = 0.5` is the median rotation.
pub fn decompose_at(pair: &SurprisePair, w: f64) -> Result<ShockDecomposition> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::WeightOutOfRange(w));
    }
    Rotator::new(pair)?.at_weight(w)
}

/// Decomposition at a user-supplied angle, which must be admissible.
pub fn decompose_with_angle(pair: &SurprisePair, alpha: f64) -> Result<ShockDecomposition> {
    Rotator::new(pair)?.at_angle(alpha)
}

/// Decompositions at `w = k / (n + 1)`, `k = 1..=n`.
pub fn rotation_grid(pair: &SurprisePair, n: usize) -> Result<Vec<ShockDecomposition>> {
    if n == 0 {
        return Err(Error::InvalidInput("rotation grid needs n >= 1".into()));
    }
    let rot = Rotator::new(pair)?;
    (1..=n)
        .map(|k| rot.at_weight(k as f64 / (n as f64 + 1.0)))
        .collect()
}

/// All-or-nothing classification of each announcement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoorMansShocks {
    pub i_mp: Vec<f64>,
    pub i_id: Vec<f64>,
}

impl PoorMansShocks {
    /// Uncentered `var(i_mp) / var(i_total)`.
    pub fn variance_ratio(&self) -> f64 {
        let mp = second_moment(&self.i_mp);
        let total: f64 = self
            .i_mp
            .iter()
            .zip(&self.i_id)
            .map(|(a, b)| (a + b) * (a + b))
            .sum::<f64>()
            / self.i_mp.len() as f64;
        mp / total
    }
}

/// Negative rate/equity co-movement is MP, positive is ID.
pub fn poor_mans_decompose(pair: &SurprisePair) -> PoorMansShocks {
    let (mut i_mp, mut i_id) = (Vec::new(), Vec::new());
    for (&i, &s) in pair.i_total.iter().zip(&pair.s) {
        if i * s <= 0.0 {
            i_mp.push(i);
            i_id.push(0.0);
        } else {
            i_mp.push(0.0);
            i_id.push(i);
        }
    }
    PoorMansShocks { i_mp, i_id }
}

/// `arccos(sqrt(ratio))`: the rotation giving `var(i_mp) / var(i_total) = ratio`.
pub fn angle_from_variance_ratio(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::RatioOutOfRange(ratio));
    }
    Ok(ratio.sqrt().acos())
}

/// Uncentered second moment, the variance notion used throughout this module.
pub fn second_moment(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Writes `date,i_total,i_mp,i_id` with 12 significant digits.
pub fn write_shocks_csv(
    path: impl AsRef<Path>,
    dates: &[NaiveDate],
    i_total: &[f64],
    i_mp: &[f64],
    i_id: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    writeln!(buf, "date,i_total,i_mp,i_id").expect("in-memory write");
    for t in 0..dates.len() {
        writeln!(
            buf,
            "{},{},{},{}",
            dates[t].format("%Y-%m-%d"),
            fmt_sig(i_total[t]),
            fmt_sig(i_mp[t]),
            fmt_sig(i_id[t])
        )
        .expect("in-memory write");
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
