//! The `fomc` command line.
//!
//! Every subcommand reads CSV/TOML inputs, writes its artifacts and a
//! `manifest.json` next to them, and returns exit code 0 on success, 1 on
//! invalid input and 2 on a numerical failure.

pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dgpsim::{simulate, DgpSpec};
use crate::error::{Error, Result};
use crate::hfdecomp::{
    angle_from_variance_ratio, decompose_at, decompose_with_angle, poor_mans_decompose,
    rotation_grid, write_shocks_csv, SurprisePanel,
};
use crate::localproj::{lp_estimate, write_lp_csv, LpConfig, LpSpec};
use crate::numfmt::fmt_sig;
use crate::paneldata::{load_panel, DatedShocks, PanelDataset};
use crate::pbvar::{
    build_design, irf_draws, mean_group, rotation_band_irf, BvarConfig, Posterior,
    RotationOptions,
};
use config::{default_variables, parse_f64_list, parse_variables, FileConfig, DEFAULT_SEED};
use manifest::{manifest_path, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "fomc",
    version,
    about = "FOMC shock decomposition, pooled panel BVARs and panel local projections"
)]
pub struct Cli {
    /// TOML file with default settings; command-line flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for draw-level parallelism [env: FOMC_THREADS] [default: all cores]
    #[arg(long, global = true, env = "FOMC_THREADS", hide_env = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split surprises into monetary-policy and information shocks
    Decompose(DecomposeArgs),
    /// Fit the pooled Bayesian panel VAR posterior
    Estimate(EstimateArgs),
    /// Sample the posterior and write Cholesky impulse responses
    Irf(IrfArgs),
    /// Panel local projections with two-way clustered errors
    Localproj(LocalProjArgs),
    /// Mean-group estimator over country-by-country VARs
    Meangroup(MeanGroupArgs),
    /// Responses pooled across the admissible rotations
    Rotations(RotationsArgs),
    /// Simulate surprises and a country panel from a known model
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Surprises CSV: date,contract_1,...,contract_K,sp500
    #[arg(long, value_name = "FILE")]
    pub surprises: PathBuf,
    /// Position inside the admissible angle interval, in (0, 1) [default: 0.5]
    #[arg(long, group = "method")]
    pub w: Option<f64>,
    /// Rotation angle in radians, must be admissible
    #[arg(long, group = "method", allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Angle implied by a target var(i_mp)/var(i_total) ratio in (0, 1]
    #[arg(long, group = "method")]
    pub variance_ratio: Option<f64>,
    /// All-or-nothing split by the sign of rate/equity co-movement
    #[arg(long, group = "method")]
    pub poor_man: bool,
    /// Output CSV: date,i_total,i_mp,i_id
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format panel CSV: country,date,variable,value
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,
    /// Comma-separated name:transform list, transform log100 or level
    /// [default: ner:log100,ip:log100,cpi:log100,lending_rate:level,equity:log100]
    #[arg(long, value_name = "LIST")]
    pub variables: Option<String>,
    /// Comma-separated country subset [default: every country in the panel]
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub countries: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ShockArgs {
    /// Shock CSV with columns date,i_mp,i_id (as written by `decompose`)
    #[arg(long, value_name = "FILE", required_unless_present = "hfi")]
    pub shocks: Option<PathBuf>,
    /// Use the raw composite rate surprise and the equity surprise (i_total, s) as shocks
    #[arg(long, requires = "surprises", conflicts_with = "shocks")]
    pub hfi: bool,
    /// Surprises CSV for --hfi
    #[arg(long, value_name = "FILE")]
    pub surprises: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Overall prior tightness [default: 0.1]
    #[arg(long)]
    pub tightness: Option<f64>,
    /// Lag decay exponent [default: 1]
    #[arg(long)]
    pub lag_decay: Option<f64>,
    /// Intercept looseness relative to the tightness [default: 100]
    #[arg(long)]
    pub intercept: Option<f64>,
    /// Prior mean of own first lags of country variables [default: 0.8]
    #[arg(long, allow_negative_numbers = true)]
    pub own_lag_mean: Option<f64>,
    /// Flat coefficient prior and Jeffreys covariance prior [default: off]
    #[arg(long)]
    pub diffuse: bool,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Total posterior draws [default: 5000]
    #[arg(long)]
    pub draws: Option<usize>,
    /// Initial draws discarded [default: 500]
    #[arg(long)]
    pub burn: Option<usize>,
    /// Last impulse-response horizon in months [default: 36]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated percentiles [default: 5,16,50,84,95]
    #[arg(long, value_name = "LIST")]
    pub percentiles: Option<String>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub shocks: ShockArgs,
    /// VAR lag order [default: 6]
    #[arg(long)]
    pub lags: Option<usize>,
    /// Total posterior draws recorded for `irf` [default: 5000]
    #[arg(long)]
    pub draws: Option<usize>,
    /// Burn-in recorded for `irf` [default: 500]
    #[arg(long)]
    pub burn: Option<usize>,
    /// Shock equations load only on lagged shocks and a constant [default: off]
    #[arg(long)]
    pub block_exogenous: bool,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Output directory (posterior.json, summary.json, manifest.json)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IrfArgs {
    /// posterior.json written by `estimate`
    #[arg(long, value_name = "FILE")]
    pub posterior: PathBuf,
    /// Total posterior draws [default: as recorded in posterior.json]
    #[arg(long)]
    pub draws: Option<usize>,
    /// Initial draws discarded [default: as recorded in posterior.json]
    #[arg(long)]
    pub burn: Option<usize>,
    /// Last impulse-response horizon in months [default: as recorded in posterior.json]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated percentiles [default: as recorded in posterior.json]
    #[arg(long, value_name = "LIST")]
    pub percentiles: Option<String>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV: shock,variable,horizon,pctl,value
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocalProjArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub shocks: ShockArgs,
    /// pooled, fixed_effects, fe_trend or all [default: pooled]
    #[arg(long)]
    pub spec: Option<String>,
    /// Comma-separated outcome variables [default: every panel variable]
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub outcomes: Option<Vec<String>>,
    /// Largest horizon [default: 24]
    #[arg(long)]
    pub horizons: Option<usize>,
    /// Lags of the outcome [default: 1]
    #[arg(long)]
    pub j_y: Option<usize>,
    /// Lags of the other panel variables [default: 1]
    #[arg(long)]
    pub j_x: Option<usize>,
    /// Lags of the shocks [default: 2]
    #[arg(long)]
    pub j_i: Option<usize>,
    /// Choose outcome/control lags per country by SBIC up to this order [default: off]
    #[arg(long)]
    pub sbic_max_lag: Option<usize>,
    /// Comma-separated standard-error multiples written as lo_/hi_ columns [default: 1,1.65]
    #[arg(long, value_name = "LIST")]
    pub bands: Option<String>,
    /// Output CSV: spec,outcome,shock,horizon,beta,se,...
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MeanGroupArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub shocks: ShockArgs,
    /// Per-country VAR lag order [default: 1]
    #[arg(long)]
    pub lags: Option<usize>,
    /// Last impulse-response horizon in months [default: 36]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated cross-country percentiles [default: 5,16,50,84,95]
    #[arg(long, value_name = "LIST")]
    pub percentiles: Option<String>,
    /// Output directory (irf.csv, point.csv, summary.json, manifest.json)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RotationsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Surprises CSV: date,contract_1,...,contract_K,sp500
    #[arg(long, value_name = "FILE")]
    pub surprises: PathBuf,
    /// Number of evenly spaced rotations inside the admissible interval [default: 99]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Draws resampled into the pooled bands, 0 keeps every draw [default: 10000]
    #[arg(long)]
    pub pool_draws: Option<usize>,
    /// VAR lag order [default: 6]
    #[arg(long)]
    pub lags: Option<usize>,
    /// Shock equations load only on lagged shocks and a constant [default: off]
    #[arg(long)]
    pub block_exogenous: bool,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory (irf.csv, medians.csv, summary.json, manifest.json)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model specification TOML [default: built-in 9-country model]
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Random seed, overrides the spec [default: 20240101]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Last horizon of true_irf.csv [default: 36]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads 0: must be >= 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    let started = Instant::now();
    let mut manifest = match &cli.command {
        Command::Decompose(a) => decompose(a, &file)?,
        Command::Estimate(a) => estimate(a, &file)?,
        Command::Irf(a) => irf(a, &file)?,
        Command::Localproj(a) => localproj(a, &file)?,
        Command::Meangroup(a) => meangroup(a, &file)?,
        Command::Rotations(a) => rotations(a, &file)?,
        Command::Simulate(a) => simulate_cmd(a)?,
    };
    if let Some(path) = &cli.config {
        manifest.add_input(path)?;
    }
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    let (out, is_dir) = output_of(&cli.command);
    manifest.write(&manifest_path(out, is_dir))
}

fn output_of(cmd: &Command) -> (&Path, bool) {
    match cmd {
        Command::Decompose(a) => (&a.out, false),
        Command::Estimate(a) => (&a.out, true),
        Command::Irf(a) => (&a.out, false),
        Command::Localproj(a) => (&a.out, false),
        Command::Meangroup(a) => (&a.out, true),
        Command::Rotations(a) => (&a.out, true),
        Command::Simulate(a) => (&a.out, true),
    }
}

fn at_least(flag: &str, value: usize, min: usize) -> Result<usize> {
    if value < min {
        return Err(Error::InvalidInput(format!("{flag} {value}: must be >= {min}")));
    }
    Ok(value)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn decompose(a: &DecomposeArgs, file: &FileConfig) -> Result<RunManifest> {
    let panel = SurprisePanel::read_csv(&a.surprises)?;
    let pair = panel.to_pair()?;
    let (method, summary, i_total, i_mp, i_id) = if a.poor_man {
        let pm = poor_mans_decompose(&pair);
        let summary = json!({ "method": "poor_man", "variance_ratio": pm.variance_ratio() });
        let total = pair.i_total().to_vec();
        ("poor_man", summary, total, pm.i_mp, pm.i_id)
    } else {
        let (method, dec) = if let Some(alpha) = a.alpha {
            ("alpha", decompose_with_angle(&pair, alpha)?)
        } else if let Some(r) = a.variance_ratio {
            ("variance_ratio", decompose_with_angle(&pair, angle_from_variance_ratio(r)?)?)
        } else {
            ("w", decompose_at(&pair, a.w.unwrap_or(file.decompose.w))?)
        };
        let summary = json!({ "method": method, "decomposition": {
            "alpha": dec.alpha, "w": dec.w, "c_mp": dec.c_mp, "c_id": dec.c_id,
            "interval": dec.interval, "factors": dec.factors,
        }});
        let total = dec.i_total();
        (method, summary, total, dec.i_mp, dec.i_id)
    };
    write_shocks_csv(&a.out, panel.dates(), &i_total, &i_mp, &i_id)?;
    write_json(&summary_path(&a.out), &summary)?;

    let config = json!({
        "method": method,
        "w": if method == "w" { Some(a.w.unwrap_or(file.decompose.w)) } else { None },
        "alpha": a.alpha,
        "variance_ratio": a.variance_ratio,
    });
    let mut m = RunManifest::new("decompose", config, None);
    m.add_input(&a.surprises)?;
    m.add_output(&a.out)?;
    m.add_output(&summary_path(&a.out))?;
    Ok(m)
}

/// Loads the panel, applies the country filter and attaches the shocks.
fn load_data(
    data: &DataArgs,
    shocks: Option<&ShockArgs>,
    file: &FileConfig,
    m: &mut RunManifest,
) -> Result<PanelDataset> {
    let specs = match &data.variables {
        Some(list) => parse_variables(list)?,
        None => file.data.variables.clone().unwrap_or_else(default_variables),
    };
    let mut ds = load_panel(&data.panel, &specs)?;
    m.add_input(&data.panel)?;
    if let Some(cs) = data.countries.as_ref().or(file.data.countries.as_ref()) {
        ds = ds.subset(cs)?;
    }
    let Some(s) = shocks else {
        return Ok(ds);
    };
    let dated = if s.hfi {
        let path = s.surprises.as_ref().expect("clap enforces --surprises with --hfi");
        m.add_input(path)?;
        let panel = SurprisePanel::read_csv(path)?;
        let pair = panel.to_pair()?;
        DatedShocks::new(
            panel.dates().to_vec(),
            vec!["i_total".into(), "s".into()],
            &[pair.i_total(), pair.s()],
        )?
    } else {
        let path = s.shocks.as_ref().expect("clap enforces --shocks without --hfi");
        m.add_input(path)?;
        DatedShocks::read_csv(path, &["i_mp", "i_id"])?
    };
    ds.align_shocks(&dated)
}

fn data_config(data: &DataArgs, shocks: Option<&ShockArgs>, file: &FileConfig) -> serde_json::Value {
    json!({
        "variables": data.variables.clone().map(serde_json::Value::from).unwrap_or_else(|| {
            let specs = file.data.variables.clone().unwrap_or_else(default_variables);
            serde_json::to_value(specs).expect("serializable specs")
        }),
        "countries": data.countries.clone().or_else(|| file.data.countries.clone()),
        "hfi": shocks.map(|s| s.hfi),
    })
}

fn apply_prior(cfg: &mut BvarConfig, p: &PriorArgs) {
    let prior = &mut cfg.prior;
    prior.tightness = p.tightness.unwrap_or(prior.tightness);
    prior.lag_decay = p.lag_decay.unwrap_or(prior.lag_decay);
    prior.intercept = p.intercept.unwrap_or(prior.intercept);
    prior.own_lag_mean = p.own_lag_mean.unwrap_or(prior.own_lag_mean);
    prior.diffuse |= p.diffuse;
}

fn apply_sampler(cfg: &mut BvarConfig, s: &SamplerArgs) -> Result<()> {
    cfg.draws = s.draws.unwrap_or(cfg.draws);
    cfg.burn = s.burn.unwrap_or(cfg.burn);
    cfg.horizon = s.horizon.unwrap_or(cfg.horizon);
    if let Some(list) = &s.percentiles {
        cfg.percentiles = parse_f64_list("--percentiles", list)?;
    }
    at_least("--draws", cfg.draws, 1)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateFile {
    config: BvarConfig,
    posterior: Posterior,
}

fn estimate(a: &EstimateArgs, file: &FileConfig) -> Result<RunManifest> {
    let mut cfg = file.bvar.clone();
    cfg.lags = at_least("--lags", a.lags.unwrap_or(cfg.lags), 1)?;
    cfg.draws = a.draws.unwrap_or(cfg.draws);
    cfg.burn = a.burn.unwrap_or(cfg.burn);
    cfg.block_exogenous |= a.block_exogenous;
    apply_prior(&mut cfg, &a.prior);
    cfg.validate()?;

    let config = json!({ "data": data_config(&a.data, Some(&a.shocks), file), "bvar": cfg });
    let mut m = RunManifest::new("estimate", config, None);
    let ds = load_data(&a.data, Some(&a.shocks), file, &mut m)?;
    let design = build_design(&ds, cfg.lags)?;
    let posterior = Posterior::fit(&design, &cfg)?;

    create_dir(&a.out)?;
    let summary = json!({
        "variables": posterior.names,
        "n_shocks": posterior.n_shocks,
        "countries": ds.countries(),
        "n_obs": posterior.n_obs,
        "condition_number": posterior.condition_number(),
        "block_exogenous": posterior.is_block_exogenous(),
    });
    let post_path = a.out.join("posterior.json");
    write_json(&post_path, &EstimateFile { config: cfg, posterior })?;
    let sum_path = a.out.join("summary.json");
    write_json(&sum_path, &summary)?;
    m.add_output(&post_path)?;
    m.add_output(&sum_path)?;
    Ok(m)
}

fn irf(a: &IrfArgs, file: &FileConfig) -> Result<RunManifest> {
    let text = std::fs::read_to_string(&a.posterior).map_err(|e| Error::io(&a.posterior, e))?;
    let est: EstimateFile = serde_json::from_str(&text)
        .map_err(|e| Error::Schema { path: a.posterior.clone(), message: e.to_string() })?;
    // Sampler settings recorded at estimation time, overridden by flags.
    let mut cfg = est.config.clone();
    apply_sampler(
        &mut cfg,
        &SamplerArgs {
            draws: a.draws,
            burn: a.burn,
            horizon: a.horizon,
            percentiles: a.percentiles.clone(),
            seed: a.seed,
        },
    )?;
    cfg.validate()?;
    let seed = a.seed.or(file.seed).unwrap_or(DEFAULT_SEED);

    let config = json!({
        "draws": cfg.draws, "burn": cfg.burn, "horizon": cfg.horizon,
        "percentiles": cfg.percentiles,
    });
    let mut m = RunManifest::new("irf", config, Some(seed));
    m.add_input(&a.posterior)?;

    let post = &est.posterior;
    let draws = post.sample(&cfg, seed)?;
    let irf = irf_draws(&draws.samples, &post.names, cfg.horizon, Some(post.n_shocks))?;
    let result = irf.summarize(&cfg.percentiles);
    result.save_csv(&a.out)?;
    let summary = json!({
        "draws_used": result.draws_used,
        "redrawn_non_pd": draws.rejected,
        "rejected_irf": result.rejected,
    });
    write_json(&summary_path(&a.out), &summary)?;
    m.add_output(&a.out)?;
    m.add_output(&summary_path(&a.out))?;
    Ok(m)
}

fn localproj(a: &LocalProjArgs, file: &FileConfig) -> Result<RunManifest> {
    let mut lp: LpConfig = file.localproj.lp();
    let specs: Vec<LpSpec> = match a.spec.as_deref() {
        Some("all") => LpSpec::ALL.to_vec(),
        Some(s) => vec![s.parse()?],
        None => vec![lp.spec],
    };
    lp.horizons = a.horizons.unwrap_or(lp.horizons);
    lp.j_y = a.j_y.unwrap_or(lp.j_y);
    lp.j_x = a.j_x.unwrap_or(lp.j_x);
    lp.j_i = a.j_i.unwrap_or(lp.j_i);
    lp.sbic_max_lag = a.sbic_max_lag.or(lp.sbic_max_lag);
    if let Some(max) = lp.sbic_max_lag {
        at_least("--sbic-max-lag", max, 1)?;
    }
    let bands = match &a.bands {
        Some(list) => parse_f64_list("--bands", list)?,
        None => file.localproj.bands.clone(),
    };
    if bands.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::InvalidInput(format!("--bands {bands:?}: multiples must be positive")));
    }

    let config = json!({
        "data": data_config(&a.data, Some(&a.shocks), file),
        "localproj": lp, "specs": specs, "outcomes": a.outcomes, "bands": bands,
    });
    let mut m = RunManifest::new("localproj", config, None);
    let ds = load_data(&a.data, Some(&a.shocks), file, &mut m)?;
    let outcomes = match &a.outcomes {
        Some(o) => o.clone(),
        None => ds.variables().to_vec(),
    };
    let mut results = Vec::new();
    for spec in &specs {
        let cfg = LpConfig { spec: *spec, ..lp.clone() };
        for outcome in &outcomes {
            results.push(lp_estimate(&ds, outcome, &cfg)?);
        }
    }
    let mut buf = Vec::new();
    write_lp_csv(&results, &bands, &mut buf)?;
    std::fs::write(&a.out, buf).map_err(|e| Error::io(&a.out, e))?;
    let summary: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "spec": r.spec, "outcome": r.outcome, "shock_scale": r.scale,
                "n_obs": r.n_obs, "dropped": r.dropped, "truncated": r.truncated,
                "country_lags": r.country_lags,
            })
        })
        .collect();
    write_json(&summary_path(&a.out), &summary)?;
    m.add_output(&a.out)?;
    m.add_output(&summary_path(&a.out))?;
    Ok(m)
}

fn meangroup(a: &MeanGroupArgs, file: &FileConfig) -> Result<RunManifest> {
    let mut cfg = file.bvar.clone();
    cfg.lags = at_least("--lags", a.lags.unwrap_or(file.meangroup.lags), 1)?;
    cfg.horizon = a.horizon.unwrap_or(cfg.horizon);
    if let Some(list) = &a.percentiles {
        cfg.percentiles = parse_f64_list("--percentiles", list)?;
    }
    cfg.validate()?;

    let config = json!({
        "data": data_config(&a.data, Some(&a.shocks), file),
        "lags": cfg.lags, "horizon": cfg.horizon, "percentiles": cfg.percentiles,
    });
    let mut m = RunManifest::new("meangroup", config, None);
    let ds = load_data(&a.data, Some(&a.shocks), file, &mut m)?;
    let res = mean_group(&ds, &cfg)?;

    create_dir(&a.out)?;
    let irf_path = a.out.join("irf.csv");
    res.bands.save_csv(&irf_path)?;
    let point_path = a.out.join("point.csv");
    let names = &res.bands.variable_names;
    let (n_s, n_v, n_h) = res.point.dim();
    let mut out = String::from("shock,variable,horizon,value\n");
    for s in 0..n_s {
        for v in 0..n_v {
            for h in 0..n_h {
                out.push_str(&format!(
                    "{},{},{h},{}\n",
                    names[s],
                    names[v],
                    fmt_sig(res.point[(s, v, h)])
                ));
            }
        }
    }
    std::fs::write(&point_path, out).map_err(|e| Error::io(&point_path, e))?;
    let sum_path = a.out.join("summary.json");
    write_json(&sum_path, &json!({ "countries": res.countries, "dropped": res.dropped }))?;
    for p in [&irf_path, &point_path, &sum_path] {
        m.add_output(p)?;
    }
    Ok(m)
}

fn rotations(a: &RotationsArgs, file: &FileConfig) -> Result<RunManifest> {
    let mut cfg = file.bvar.clone();
    cfg.lags = at_least("--lags", a.lags.unwrap_or(cfg.lags), 1)?;
    cfg.block_exogenous |= a.block_exogenous;
    apply_prior(&mut cfg, &a.prior);
    apply_sampler(&mut cfg, &a.sampler)?;
    cfg.validate()?;
    let grid_n = at_least("--grid", a.grid.unwrap_or(file.rotations.grid), 1)?;
    let pool = a.pool_draws.unwrap_or(file.rotations.pool_draws);
    let seed = a.sampler.seed.or(file.seed).unwrap_or(DEFAULT_SEED);

    let config = json!({
        "data": data_config(&a.data, None, file), "bvar": cfg,
        "grid": grid_n, "pool_draws": pool,
    });
    let mut m = RunManifest::new("rotations", config, Some(seed));
    let ds = load_data(&a.data, None, file, &mut m)?;
    m.add_input(&a.surprises)?;
    let surprises = SurprisePanel::read_csv(&a.surprises)?;
    let grid = rotation_grid(&surprises.to_pair()?, grid_n)?;
    let options = RotationOptions { pool_draws: (pool > 0).then_some(pool) };
    let res = rotation_band_irf(&ds, surprises.dates(), &grid, &cfg, &options, seed)?;

    create_dir(&a.out)?;
    let irf_path = a.out.join("irf.csv");
    res.pooled.save_csv(&irf_path)?;
    let med_path = a.out.join("medians.csv");
    let mut f = Vec::new();
    writeln!(f, "grid,w,alpha,shock,variable,horizon,value").expect("in-memory write");
    let (n_g, n_s, n_v, n_h) = res.grid_medians.dim();
    for g in 0..n_g {
        for s in 0..n_s {
            for v in 0..n_v {
                for h in 0..n_h {
                    writeln!(
                        f,
                        "{g},{},{},{},{},{h},{}",
                        fmt_sig(res.weights[g]),
                        fmt_sig(res.alphas[g]),
                        res.pooled.shock_names[s],
                        res.pooled.variable_names[v],
                        fmt_sig(res.grid_medians[(g, s, v, h)])
                    )
                    .expect("in-memory write");
                }
            }
        }
    }
    std::fs::write(&med_path, f).map_err(|e| Error::io(&med_path, e))?;
    let sum_path = a.out.join("summary.json");
    write_json(
        &sum_path,
        &json!({ "alphas": res.alphas, "weights": res.weights, "pooled_draws": res.pooled_draws }),
    )?;
    for p in [&irf_path, &med_path, &sum_path] {
        m.add_output(p)?;
    }
    Ok(m)
}

fn simulate_cmd(a: &SimulateArgs) -> Result<RunManifest> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            DgpSpec::from_toml(&text).map_err(|e| match e {
                Error::InvalidInput(msg) => Error::Schema { path: path.clone(), message: msg },
                other => other,
            })?
        }
        None => DgpSpec::default(),
    };
    spec.seed = a.seed.unwrap_or(spec.seed);
    let horizon = a.horizon.unwrap_or(36);
    let config = json!({ "spec": spec, "horizon": horizon });
    let mut m = RunManifest::new("simulate", config, Some(spec.seed));
    if let Some(path) = &a.spec {
        m.add_input(path)?;
    }
    let sim = simulate(&spec)?;
    sim.write_dir(&a.out, &spec, horizon)?;
    for name in ["surprises.csv", "panel.csv", "true_shocks.csv", "true_irf.csv", "spec.toml"] {
        m.add_output(&a.out.join(name))?;
    }
    Ok(m)
}
