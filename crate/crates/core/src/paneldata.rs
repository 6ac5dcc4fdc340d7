//! Balanced monthly country panels and their alignment with shock series.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hfdecomp::{parse_day, parse_f64};
use crate::numfmt::fmt_sig;

/// Calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::BadDate(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    /// `n` consecutive months starting at `self`.
    pub fn range(self, n: usize) -> Vec<YearMonth> {
        std::iter::successors(Some(self), |m| Some(m.succ()))
            .take(n)
            .collect()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadDate(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `100 * ln(x)`: responses read in basis points.
    Log100,
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Endogenous,
    Shock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub transform: Transform,
    #[serde(default)]
    pub role: Role,
}

impl VariableSpec {
    pub fn endogenous(name: &str, transform: Transform) -> Self {
        Self {
            name: name.to_string(),
            transform,
            role: Role::Endogenous,
        }
    }

    pub fn shock(name: &str) -> Self {
        Self {
            name: name.to_string(),
            transform: Transform::Level,
            role: Role::Shock,
        }
    }
}

/// Country x month x variable observations plus the common shock block.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    countries: Vec<String>,
    dates: Vec<YearMonth>,
    variables: Vec<String>,
    /// N x T x n, transformed.
    values: Array3<f64>,
    shock_names: Vec<String>,
    /// T x m, zero in months without announcements.
    shocks: Array2<f64>,
}

impl PanelDataset {
    /// Panel without shocks; `values` is N x T x n.
    pub fn new(
        countries: Vec<String>,
        dates: Vec<YearMonth>,
        variables: Vec<String>,
        values: Array3<f64>,
    ) -> Result<Self> {
        let shape = (countries.len(), dates.len(), variables.len());
        if values.dim() != shape {
            return Err(Error::InvalidInput(format!(
                "values have shape {:?}, expected {:?}",
                values.dim(),
                shape
            )));
        }
        if countries.is_empty() || dates.is_empty() || variables.is_empty() {
            return Err(Error::InvalidInput("empty panel".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("panel values".into()));
        }
        check_contiguous(&dates)?;
        let t = dates.len();
        Ok(Self {
            countries,
            dates,
            variables,
            values,
            shock_names: Vec::new(),
            shocks: Array2::zeros((t, 0)),
        })
    }

    /// Replaces the shock block with a T x m matrix already on the panel's dates.
    pub fn with_shocks(mut self, names: Vec<String>, shocks: Array2<f64>) -> Result<Self> {
        if shocks.nrows() != self.dates.len() || shocks.ncols() != names.len() {
            return Err(Error::InvalidInput(format!(
                "shock block {:?} does not match {} dates x {} names",
                shocks.dim(),
                self.dates.len(),
                names.len()
            )));
        }
        if shocks.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shock block".into()));
        }
        self.shock_names = names;
        self.shocks = shocks;
        Ok(self)
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn shock_names(&self) -> &[String] {
        &self.shock_names
    }

    pub fn shocks(&self) -> &Array2<f64> {
        &self.shocks
    }

    /// (N, T, n)
    pub fn dim(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn n_shocks(&self) -> usize {
        self.shock_names.len()
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn country_index(&self, name: &str) -> Result<usize> {
        self.countries
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownCountry(name.to_string()))
    }

    pub fn series(&self, country: usize, variable: usize) -> Vec<f64> {
        (0..self.dates.len())
            .map(|t| self.values[(country, t, variable)])
            .collect()
    }

    pub fn shock_series(&self, shock: usize) -> Vec<f64> {
        self.shocks.column(shock).to_vec()
    }

    /// Restricts to `countries`, keeping the panel's own country order.
    pub fn subset<S: AsRef<str>>(&self, countries: &[S]) -> Result<Self> {
        let mut keep = Vec::new();
        for c in countries {
            let i = self.country_index(c.as_ref())?;
            if !keep.contains(&i) {
                keep.push(i);
            }
        }
        keep.sort_unstable();
        Ok(Self {
            countries: keep.iter().map(|&i| self.countries[i].clone()).collect(),
            dates: self.dates.clone(),
            variables: self.variables.clone(),
            values: self.values.select(Axis(0), &keep),
            shock_names: self.shock_names.clone(),
            shocks: self.shocks.clone(),
        })
    }

    /// Writes the long `country,date,variable,value` layout of stored values.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("country,date,variable,value\n");
        for (i, c) in self.countries.iter().enumerate() {
            for (t, d) in self.dates.iter().enumerate() {
                for (k, v) in self.variables.iter().enumerate() {
                    out.push_str(&format!("{c},{d},{v},{}\n", fmt_sig(self.values[(i, t, k)])));
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes the long layout in raw units, undoing each variable's transform
    /// so that [`load_panel`] with the same specs reads the stored values back.
    pub fn export_levels_csv(&self, path: impl AsRef<Path>, transforms: &[Transform]) -> Result<()> {
        let path = path.as_ref();
        if transforms.len() != self.variables.len() {
            return Err(Error::InvalidInput(format!(
                "{} transforms for {} variables",
                transforms.len(),
                self.variables.len()
            )));
        }
        let mut out = String::from("country,date,variable,value\n");
        for (i, c) in self.countries.iter().enumerate() {
            for (t, d) in self.dates.iter().enumerate() {
                for (k, v) in self.variables.iter().enumerate() {
                    let x = self.values[(i, t, k)];
                    let raw = match transforms[k] {
                        Transform::Level => x,
                        Transform::Log100 => (x / 100.0).exp(),
                    };
                    out.push_str(&format!("{c},{d},{v},{}\n", fmt_sig(raw)));
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Attaches announcement-level shocks, summed within each calendar month.
    ///
    /// Months without announcements carry zero. Announcements before the
    /// panel start are ignored; any after the panel end is an error.
    pub fn align_shocks(&self, shocks: &DatedShocks) -> Result<Self> {
        let first = self.dates[0];
        let last = *self.dates.last().expect("non-empty panel");
        let m = shocks.names.len();
        let mut by_month: BTreeMap<YearMonth, Vec<(NaiveDate, Vec<f64>)>> = BTreeMap::new();
        for (r, date) in shocks.dates.iter().enumerate() {
            let ym = YearMonth::of(*date);
            if ym > last {
                return Err(Error::ShockAfterPanel(date.to_string(), last.to_string()));
            }
            if ym < first {
                continue;
            }
            by_month
                .entry(ym)
                .or_default()
                .push((*date, shocks.values.row(r).to_vec()));
        }
        let mut block = Array2::zeros((self.dates.len(), m));
        for (ym, mut obs) in by_month {
            // Canonical order makes the floating-point sum permutation-invariant.
            obs.sort_by(|a, b| {
                a.0.cmp(&b.0).then_with(|| {
                    a.1.iter()
                        .zip(&b.1)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
            });
            let t = self
                .dates
                .binary_search(&ym)
                .expect("contiguous panel covers every month in range");
            for (_, row) in obs {
                for j in 0..m {
                    block[(t, j)] += row[j];
                }
            }
        }
        self.clone().with_shocks(shocks.names.clone(), block)
    }
}

fn check_contiguous(dates: &[YearMonth]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] != w[0].succ() {
            return Err(Error::NonContiguousDates(w[0].to_string()));
        }
    }
    Ok(())
}

/// Reads a long-format panel CSV (`country,date,variable,value`, date `YYYY-MM`).
///
/// Only endogenous specs are loaded, in spec order; other variables in the
/// file are ignored. Countries keep their order of first appearance.
pub fn load_panel(path: impl AsRef<Path>, specs: &[VariableSpec]) -> Result<PanelDataset> {
    let path = path.as_ref();
    let specs: Vec<&VariableSpec> = specs.iter().filter(|s| s.role == Role::Endogenous).collect();
    if specs.is_empty() {
        return Err(Error::InvalidInput("no endogenous variables specified".into()));
    }
    let var_index: HashMap<&str, usize> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| (s.name.as_str(), k))
        .collect();

    let mut rdr = crate::error::open_csv(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["country", "date", "variable", "value"] {
        return Err(Error::schema(path, "expected header country,date,variable,value"));
    }
    let mut countries: Vec<String> = Vec::new();
    let mut country_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, YearMonth, usize), f64> = HashMap::new();
    let mut months = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let Some(&k) = var_index.get(&rec[2]) else {
            continue;
        };
        let country = rec[0].to_string();
        let ym: YearMonth = rec[1].parse()?;
        let raw = parse_f64(path, &rec[3])?;
        let value = match specs[k].transform {
            Transform::Level => raw,
            Transform::Log100 => {
                if raw <= 0.0 {
                    return Err(Error::NonPositiveLog {
                        country,
                        date: ym.to_string(),
                        variable: specs[k].name.clone(),
                        value: raw,
                    });
                }
                100.0 * raw.ln()
            }
        };
        let i = *country_index.entry(country.clone()).or_insert_with(|| {
            countries.push(country.clone());
            countries.len() - 1
        });
        months.insert(ym);
        if cells.insert((i, ym, k), value).is_some() {
            return Err(Error::DuplicateCell(country, ym.to_string(), specs[k].name.clone()));
        }
    }
    if countries.is_empty() {
        return Err(Error::schema(path, "no rows for the requested variables"));
    }
    let dates: Vec<YearMonth> = months.into_iter().collect();
    check_contiguous(&dates)?;

    let (n_c, n_t, n_v) = (countries.len(), dates.len(), specs.len());
    let mut values = Array3::zeros((n_c, n_t, n_v));
    let mut missing = Vec::new();
    for (i, c) in countries.iter().enumerate() {
        for (t, d) in dates.iter().enumerate() {
            for (k, s) in specs.iter().enumerate() {
                match cells.get(&(i, *d, k)) {
                    Some(v) => values[(i, t, k)] = *v,
                    None => missing.push((c.clone(), d.to_string(), s.name.clone())),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnbalancedPanel(missing));
    }
    let variables = specs.iter().map(|s| s.name.clone()).collect();
    PanelDataset::new(countries, dates, variables, values)
}

/// Announcement-dated shock series (one row per announcement).
#[derive(Debug, Clone, PartialEq)]
pub struct DatedShocks {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    /// rows = announcements, columns = shocks
    pub values: Array2<f64>,
}

impl DatedShocks {
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, columns: &[&[f64]]) -> Result<Self> {
        if columns.len() != names.len() || columns.iter().any(|c| c.len() != dates.len()) {
            return Err(Error::InvalidInput("shock columns do not match dates/names".into()));
        }
        let mut values = Array2::zeros((dates.len(), names.len()));
        for (j, col) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("shock {}", names[j])));
                }
                values[(r, j)] = *v;
            }
        }
        Ok(Self {
            dates,
            names,
            values,
        })
    }

    /// Reads the named columns of a `date,...` CSV (e.g. `date,i_total,i_mp,i_id`).
    pub fn read_csv<S: AsRef<str>>(path: impl AsRef<Path>, columns: &[S]) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = crate::error::open_csv(path)?;
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::schema(path, "first column must be `date`"));
        }
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c.as_ref())
                    .ok_or_else(|| Error::schema(path, format!("missing column {:?}", c.as_ref())))
            })
            .collect::<Result<_>>()?;
        let mut dates = Vec::new();
        let mut flat = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            dates.push(parse_day(&rec[0])?);
            for &j in &idx {
                flat.push(parse_f64(path, &rec[j])?);
            }
        }
        let values = Array2::from_shape_vec((dates.len(), idx.len()), flat)
            .expect("row-major shock block");
        Ok(Self {
            dates,
            names: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            values,
        })
    }
}
