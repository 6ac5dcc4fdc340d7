//! Synthetic surprises and country panels from a known structural VAR(1).
//!
//! Structural innovations `eps_t` are standard normal, with the two policy
//! shocks switched on only in announcement months. The common state
//! `z_t = [i_mp, i_id, country variables]` follows `z_t = A z_{t-1} + B eps_t`
//! with lower-triangular `B`; each country draws its own country innovations.
//! Surprises obey `i_total = i_mp + i_id` and `s = c_mp i_mp + c_id i_id`.

use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hfdecomp::{write_shocks_csv, SurprisePair, SurprisePanel};
use crate::linalg::{spectral_radius, substream};
use crate::numfmt::fmt_sig;
use crate::paneldata::{PanelDataset, Transform, VariableSpec, YearMonth};

/// Countries used to label simulated panels, emerging markets first.
pub const DEMO_COUNTRIES: [&str; 18] = [
    "Brazil",
    "Chile",
    "Colombia",
    "Hungary",
    "Indonesia",
    "Mexico",
    "Peru",
    "Philippines",
    "South Africa",
    "Australia",
    "Canada",
    "France",
    "Iceland",
    "Italy",
    "Japan",
    "South Korea",
    "The Netherlands",
    "Sweden",
];

/// Raw-level offset of `Log100` series (`100 ln 100`), so raw values hover near 100.
const LOG_LEVEL: f64 = 460.517_018_598_809_1;
/// Raw-level offset of `Level` series (a 5% rate).
const RATE_LEVEL: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpSpec {
    pub n_countries: usize,
    pub n_months: usize,
    /// First month, `YYYY-MM`.
    pub start: String,
    /// Country labels; defaults to the demo list (then `C19`, `C20`, ...).
    pub countries: Option<Vec<String>>,
    /// Country variables, in VAR order after the two shocks.
    pub variables: Vec<VariableSpec>,
    /// `(2+n) x (2+n)` VAR(1) matrix; the two shock rows must be zero.
    pub var_coeffs: Vec<Vec<f64>>,
    /// `(2+n) x (2+n)` lower-triangular structural impact matrix.
    pub impact: Vec<Vec<f64>>,
    pub c_mp: f64,
    pub c_id: f64,
    /// Probability that a month has an announcement.
    pub shock_prob: f64,
    pub seed: u64,
    /// Interest-rate contracts in the surprise file.
    pub n_contracts: usize,
    /// Idiosyncratic noise sd of each contract around its loading on `i_total`.
    pub contract_noise: f64,
    /// Pre-sample months discarded so the panel starts near its ergodic law.
    pub burn_in: usize,
}

impl Default for DgpSpec {
    fn default() -> Self {
        let vars = [
            ("ner", Transform::Log100),
            ("ip", Transform::Log100),
            ("cpi", Transform::Log100),
            ("lending_rate", Transform::Level),
            ("equity", Transform::Log100),
        ];
        #[rustfmt::skip]
        let a = vec![
            vec![0.0, 0.0, 0.0,   0.0,  0.0,  0.0, 0.0],
            vec![0.0, 0.0, 0.0,   0.0,  0.0,  0.0, 0.0],
            vec![0.0, 0.0, 0.9,   0.0,  0.0,  0.0, 0.0],
            vec![0.0, 0.0, -0.05, 0.85, 0.0,  0.0, 0.0],
            vec![0.0, 0.0, 0.02,  0.0,  0.95, 0.0, 0.0],
            vec![0.0, 0.0, 0.0,   0.0,  0.02, 0.8, 0.0],
            vec![0.0, 0.0, 0.0,   0.0,  0.0,  0.0, 0.7],
        ];
        #[rustfmt::skip]
        let b = vec![
            vec![1.0,   0.0,    0.0,  0.0, 0.0, 0.0, 0.0],
            vec![0.0,   1.3,    0.0,  0.0, 0.0, 0.0, 0.0],
            vec![0.5,  -0.375,  0.5,  0.0, 0.0, 0.0, 0.0],
            vec![-0.4,  0.3,    0.0,  0.5, 0.0, 0.0, 0.0],
            vec![0.1,  -0.12,   0.0,  0.0, 0.2, 0.0, 0.0],
            vec![0.08, -0.06,   0.0,  0.0, 0.0, 0.1, 0.0],
            vec![-0.8,  0.6,    0.2,  0.0, 0.0, 0.0, 1.0],
        ];
        Self {
            n_countries: 9,
            n_months: 156,
            start: "2004-01".into(),
            countries: None,
            variables: vars
                .iter()
                .map(|(n, t)| VariableSpec::endogenous(n, *t))
                .collect(),
            var_coeffs: a,
            impact: b,
            c_mp: -1.0,
            c_id: 1.0,
            shock_prob: 8.0 / 12.0,
            seed: 20_240_101,
            n_contracts: 3,
            contract_noise: 0.02,
            burn_in: 100,
        }
    }
}

impl DgpSpec {
    pub fn dim(&self) -> usize {
        2 + self.variables.len()
    }

    pub fn var_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.var_coeffs)
    }

    pub fn impact_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.impact)
    }

    pub fn variable_names(&self) -> Vec<String> {
        let mut v = vec!["i_mp".to_string(), "i_id".to_string()];
        v.extend(self.variables.iter().map(|s| s.name.clone()));
        v
    }

    pub fn country_names(&self) -> Vec<String> {
        match &self.countries {
            Some(c) => c.clone(),
            None => (0..self.n_countries)
                .map(|i| {
                    DEMO_COUNTRIES
                        .get(i)
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| format!("C{}", i + 1))
                })
                .collect(),
        }
    }

    pub fn start_month(&self) -> Result<YearMonth> {
        self.start.parse()
    }

    /// `var(i_mp) / var(i_total)` implied by the impact scales.
    pub fn population_variance_ratio(&self) -> f64 {
        let (s_mp, s_id) = (self.impact[0][0], self.impact[1][1]);
        s_mp * s_mp / (s_mp * s_mp + s_id * s_id)
    }

    /// Rotation angle that maps the orthogonal surprise factors onto the true
    /// shocks, `atan(sd(i_id) / sd(i_mp))`.
    pub fn generating_angle(&self) -> f64 {
        (self.impact[1][1] / self.impact[0][0]).atan()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_countries == 0 || self.n_months < 3 {
            return bad(format!(
                "need at least one country and three months, got {} x {}",
                self.n_countries, self.n_months
            ));
        }
        if let Some(c) = &self.countries {
            if c.len() != self.n_countries {
                return bad(format!("{} country names for n_countries = {}", c.len(), self.n_countries));
            }
        }
        self.start_month()?;
        for (what, m) in [("var_coeffs", &self.var_coeffs), ("impact", &self.impact)] {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return bad(format!("{what} must be {k} x {k}"));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return bad(format!("{what} has non-finite entries"));
            }
        }
        if self.var_coeffs[..2].iter().flatten().any(|v| *v != 0.0) {
            return bad("var_coeffs rows of i_mp and i_id must be zero (shocks are serially uncorrelated)".into());
        }
        for r in 0..k {
            if self.impact[r][r + 1..].iter().any(|v| *v != 0.0) {
                return bad("impact must be lower triangular".into());
            }
        }
        if !(self.impact[0][0] > 0.0 && self.impact[1][1] > 0.0) {
            return bad("impact scales of i_mp and i_id must be positive".into());
        }
        if !(self.c_mp < 0.0 && self.c_id > 0.0) {
            return bad(format!(
                "loadings need c_mp < 0 < c_id, got c_mp = {}, c_id = {}",
                self.c_mp, self.c_id
            ));
        }
        if !(self.shock_prob > 0.0 && self.shock_prob <= 1.0) {
            return bad(format!("shock_prob {} outside (0, 1]", self.shock_prob));
        }
        if self.n_contracts == 0 || !(self.contract_noise >= 0.0) {
            return bad("need n_contracts >= 1 and contract_noise >= 0".into());
        }
        let rho = spectral_radius(&self.var_matrix());
        if !(rho < 1.0) {
            return Err(Error::Unstable(rho));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad DGP spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let k = rows.len();
    DMatrix::from_fn(k, rows.first().map_or(0, |r| r.len()), |i, j| rows[i][j])
}

/// Known quantities behind a simulated sample.
#[derive(Debug, Clone)]
pub struct SimTruth {
    /// Per announcement.
    pub i_mp: Vec<f64>,
    pub i_id: Vec<f64>,
    /// Monthly shock block, `T x 2` (zero without announcement).
    pub monthly: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub surprises: SurprisePanel,
    /// Exact `(i_total, s)` before contract noise.
    pub pair: SurprisePair,
    /// Country variables in transformed units, no shock block attached.
    pub panel: PanelDataset,
    pub truth: SimTruth,
}

impl SimOutput {
    pub fn announcement_dates(&self) -> &[NaiveDate] {
        self.surprises.dates()
    }

    /// Panel with the true monthly shocks attached as `i_mp`, `i_id`.
    pub fn panel_with_true_shocks(&self) -> Result<PanelDataset> {
        self.panel
            .clone()
            .with_shocks(vec!["i_mp".into(), "i_id".into()], self.truth.monthly.clone())
    }

    /// Writes `surprises.csv`, `panel.csv` (raw units), `true_shocks.csv`,
    /// `true_irf.csv` and `spec.toml` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>, spec: &DgpSpec, horizon: usize) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.surprises.write_csv(dir.join("surprises.csv"))?;
        let transforms: Vec<Transform> = spec.variables.iter().map(|v| v.transform).collect();
        self.panel.export_levels_csv(dir.join("panel.csv"), &transforms)?;
        let i_total: Vec<f64> = self.truth.i_mp.iter().zip(&self.truth.i_id).map(|(a, b)| a + b).collect();
        write_shocks_csv(
            dir.join("true_shocks.csv"),
            self.surprises.dates(),
            &i_total,
            &self.truth.i_mp,
            &self.truth.i_id,
        )?;
        let irf = true_irf_per_sd(spec, horizon);
        let names = spec.variable_names();
        let mut out = String::from("shock,variable,horizon,value\n");
        for s in 0..2 {
            for (v, name) in names.iter().enumerate() {
                for h in 0..=horizon {
                    out.push_str(&format!("{},{name},{h},{}\n", names[s], fmt_sig(irf[(s, v, h)])));
                }
            }
        }
        let p = dir.join("true_irf.csv");
        std::fs::write(&p, out).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("spec.toml");
        std::fs::write(&p, spec.to_toml()).map_err(|e| Error::io(&p, e))
    }
}

/// Draws one sample from the spec. Identical specs give identical output.
pub fn simulate(spec: &DgpSpec) -> Result<SimOutput> {
    spec.validate()?;
    let k = spec.dim();
    let n = k - 2;
    let (t_out, burn) = (spec.n_months, spec.burn_in);
    let t_all = t_out + burn;
    let a = spec.var_matrix();
    let b = spec.impact_matrix();
    let months = spec.start_month()?.range(t_out);

    // Common shock block, including the pre-sample.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut eps_policy = Array2::<f64>::zeros((t_all, 2));
    let mut days = vec![0u32; t_all];
    for t in 0..t_all {
        if rng.random::<f64>() < spec.shock_prob {
            eps_policy[(t, 0)] = rng.sample(StandardNormal);
            eps_policy[(t, 1)] = rng.sample(StandardNormal);
            days[t] = rng.random_range(1..=28);
        }
    }
    let mut monthly = Array2::zeros((t_out, 2));
    let (mut dates, mut i_mp, mut i_id) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..t_out {
        let (e_mp, e_id) = (eps_policy[(burn + t, 0)], eps_policy[(burn + t, 1)]);
        let mp = b[(0, 0)] * e_mp;
        let id = b[(1, 0)] * e_mp + b[(1, 1)] * e_id;
        monthly[(t, 0)] = mp;
        monthly[(t, 1)] = id;
        if days[burn + t] > 0 {
            let ym = months[t];
            dates.push(NaiveDate::from_ymd_opt(ym.year, ym.month, days[burn + t]).expect("day <= 28"));
            i_mp.push(mp);
            i_id.push(id);
        }
    }
    if dates.len() < 2 {
        return Err(Error::InsufficientObservations(format!(
            "only {} announcements drawn; raise n_months or shock_prob",
            dates.len()
        )));
    }
    let i_total: Vec<f64> = i_mp.iter().zip(&i_id).map(|(a, b)| a + b).collect();
    let s: Vec<f64> = i_mp
        .iter()
        .zip(&i_id)
        .map(|(a, b)| spec.c_mp * a + spec.c_id * b)
        .collect();
    let noise = Normal::new(0.0, spec.contract_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let contracts = DMatrix::from_fn(dates.len(), spec.n_contracts, |r, j| {
        let loading = 1.0 - 0.1 * j as f64;
        let e = if spec.contract_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        loading * i_total[r] + e
    });
    let surprises = SurprisePanel::new(dates, contracts, s.clone())?;
    let pair = SurprisePair::new(i_total, s)?;

    let levels: Vec<f64> = spec
        .variables
        .iter()
        .map(|v| match v.transform {
            Transform::Log100 => LOG_LEVEL,
            Transform::Level => RATE_LEVEL,
        })
        .collect();
    let mut values = Array3::zeros((spec.n_countries, t_out, n));
    for i in 0..spec.n_countries {
        let mut crng = substream(spec.seed, 1 + i as u64);
        let mut z = DVector::<f64>::zeros(k);
        for t in 0..t_all {
            let eps = DVector::from_fn(k, |j, _| {
                if j < 2 {
                    eps_policy[(t, j)]
                } else {
                    crng.sample(StandardNormal)
                }
            });
            z = &a * &z + &b * eps;
            if t >= burn {
                for v in 0..n {
                    values[(i, t - burn, v)] = levels[v] + z[2 + v];
                }
            }
        }
    }
    let panel = PanelDataset::new(
        spec.country_names(),
        months,
        spec.variables.iter().map(|v| v.name.clone()).collect(),
        values,
    )?;
    Ok(SimOutput {
        surprises,
        pair,
        panel,
        truth: SimTruth { i_mp, i_id, monthly },
    })
}

/// Responses to unit structural innovations, `shock x variable x horizon`:
/// column `j` of `A^h B`.
pub fn true_irf(spec: &DgpSpec, horizon: usize) -> Array3<f64> {
    let a = spec.var_matrix();
    let b = spec.impact_matrix();
    let k = spec.dim();
    let mut out = Array3::zeros((k, k, horizon + 1));
    let mut theta = b;
    for h in 0..=horizon {
        for s in 0..k {
            for v in 0..k {
                out[(s, v, h)] = theta[(v, s)];
            }
        }
        theta = &a * theta;
    }
    out
}

/// Responses to one-standard-deviation Cholesky shocks of the monthly
/// process, where the policy innovations have variance `shock_prob`.
pub fn true_irf_per_sd(spec: &DgpSpec, horizon: usize) -> Array3<f64> {
    let mut irf = true_irf(spec, horizon);
    let sd = spec.shock_prob.sqrt();
    for s in 0..2 {
        irf.index_axis_mut(ndarray::Axis(0), s).mapv_inplace(|v| v * sd);
    }
    irf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hfdecomp::angle_from_variance_ratio;
    use crate::linalg::correlation;

    fn scalar_like(a: f64) -> DgpSpec {
        let k = 3;
        let mut var_coeffs = vec![vec![0.0; k]; k];
        var_coeffs[2][2] = a;
        let mut impact = vec![vec![0.0; k]; k];
        for (j, row) in impact.iter_mut().enumerate() {
            row[j] = 1.0;
        }
        DgpSpec {
            variables: vec![VariableSpec::endogenous("y", Transform::Level)],
            var_coeffs,
            impact,
            ..Default::default()
        }
    }

    #[test]
    fn default_spec_is_valid_and_stable() {
        let s = DgpSpec::default();
        s.validate().unwrap();
        assert!(spectral_radius(&s.var_matrix()) < 1.0);
        assert_eq!(s.country_names()[0], "Brazil");
    }

    #[test]
    fn identity_impact_no_dynamics() {
        let mut s = scalar_like(0.0);
        s.var_coeffs[2][2] = 0.0;
        let irf = true_irf(&s, 4);
        for sh in 0..3 {
            for v in 0..3 {
                assert_eq!(irf[(sh, v, 0)], f64::from(u8::from(sh == v)));
                for h in 1..=4 {
                    assert_eq!(irf[(sh, v, h)], 0.0);
                }
            }
        }
    }

    #[test]
    fn geometric_decay() {
        let irf = true_irf(&scalar_like(0.9), 20);
        for h in 0..=20 {
            assert!((irf[(2, 2, h)] - 0.9f64.powi(h as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn recursion_identity() {
        let s = DgpSpec::default();
        let irf = true_irf(&s, 12);
        let a = s.var_matrix();
        for h in 0..12 {
            for sh in 0..s.dim() {
                let col = DVector::from_fn(s.dim(), |v, _| irf[(sh, v, h)]);
                let next = &a * col;
                for v in 0..s.dim() {
                    assert!((irf[(sh, v, h + 1)] - next[v]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn default_signs_are_opposite() {
        let irf = true_irf(&DgpSpec::default(), 24);
        // ner (2) and ip (3): MP raises ner, lowers ip; ID the reverse.
        for h in 0..=24 {
            assert!(irf[(0, 2, h)] > 0.0 && irf[(1, 2, h)] < 0.0);
            assert!(irf[(0, 3, h)] < 0.0 && irf[(1, 3, h)] > 0.0);
        }
    }

    #[test]
    fn seeded_determinism() {
        let s = DgpSpec { n_countries: 2, n_months: 40, ..Default::default() };
        let a = simulate(&s).unwrap();
        let b = simulate(&s).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.surprises, b.surprises);
        let c = simulate(&DgpSpec { seed: 7, ..s }).unwrap();
        assert_ne!(a.panel, c.panel);
    }

    #[test]
    fn observation_equation_holds() {
        let s = DgpSpec { n_countries: 1, n_months: 60, ..Default::default() };
        let out = simulate(&s).unwrap();
        for t in 0..out.pair.len() {
            let (mp, id) = (out.truth.i_mp[t], out.truth.i_id[t]);
            assert!((out.pair.i_total()[t] - (mp + id)).abs() < 1e-15);
            assert!((out.pair.s()[t] - (-mp + id)).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_variances_give_uncorrelated_surprises() {
        let mut s = DgpSpec { n_countries: 1, n_months: 100_000, burn_in: 0, ..Default::default() };
        s.impact[1][1] = 1.0;
        let out = simulate(&s).unwrap();
        assert!(correlation(out.pair.i_total(), out.pair.s()).abs() < 0.02);
        assert!(correlation(&out.truth.i_mp, &out.truth.i_id).abs() < 0.02);
    }

    #[test]
    fn variance_ratio_matches_generating_angle() {
        let s = DgpSpec::default();
        let alpha = angle_from_variance_ratio(s.population_variance_ratio()).unwrap();
        assert!((alpha - s.generating_angle()).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut unstable = DgpSpec::default();
        unstable.var_coeffs[2][2] = 1.05;
        assert!(matches!(simulate(&unstable), Err(Error::Unstable(_))));
        let mut upper = DgpSpec::default();
        upper.impact[2][3] = 0.1;
        assert!(upper.validate().is_err());
        assert!(DgpSpec { c_mp: 0.5, ..Default::default() }.validate().is_err());
        assert!(DgpSpec { shock_prob: 0.0, ..Default::default() }.validate().is_err());
        let mut lagged_shock = DgpSpec::default();
        lagged_shock.var_coeffs[0][2] = 0.1;
        assert!(lagged_shock.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = DgpSpec::default();
        assert_eq!(DgpSpec::from_toml(&s.to_toml()).unwrap(), s);
        let partial = DgpSpec::from_toml("n_countries = 3\nseed = 5\n").unwrap();
        assert_eq!(partial.n_countries, 3);
        assert_eq!(partial.var_coeffs, DgpSpec::default().var_coeffs);
    }

    #[test]
    fn written_panel_reloads_to_same_values() {
        let s = DgpSpec { n_countries: 2, n_months: 24, ..Default::default() };
        let out = simulate(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        out.write_dir(dir.path(), &s, 6).unwrap();
        let back = crate::paneldata::load_panel(dir.path().join("panel.csv"), &s.variables).unwrap();
        for (a, b) in back.values().iter().zip(out.panel.values().iter()) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
        let sur = SurprisePanel::read_csv(dir.path().join("surprises.csv")).unwrap();
        assert_eq!(sur.len(), out.surprises.len());
    }
}
