//! Loads the demo panel, attaches the golden shocks and writes both back out.

use fomc_spillovers::paneldata::{load_panel, DatedShocks, Transform, VariableSpec};

fn main() -> fomc_spillovers::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let specs = [
        VariableSpec::endogenous("ner", Transform::Log100),
        VariableSpec::endogenous("lending_rate", Transform::Level),
    ];
    let panel = load_panel(format!("{dir}/data/demo_panel.csv"), &specs)?;
    let shocks = DatedShocks::read_csv(format!("{dir}/data/demo_shocks_golden.csv"), &["i_mp", "i_id"])?;
    let panel = panel.align_shocks(&shocks)?;

    let (n, t, k) = panel.dim();
    let first = panel.dates()[0];
    let last = panel.dates()[t - 1];
    println!("{n} countries, {first} to {last}, {k} variables + {} shocks", panel.n_shocks());
    let active = panel.shock_series(0).iter().filter(|v| **v != 0.0).count();
    println!("{active} of {t} months carry an announcement");

    let out = std::env::temp_dir().join("fomc_panel_io");
    std::fs::create_dir_all(&out).map_err(|e| fomc_spillovers::Error::InvalidInput(e.to_string()))?;
    panel.export_csv(out.join("transformed.csv"))?;
    panel.export_levels_csv(out.join("levels.csv"), &[Transform::Log100, Transform::Level])?;
    let back = load_panel(out.join("levels.csv"), &specs)?;
    let max_diff = back
        .values()
        .iter()
        .zip(panel.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("round trip through {}: max |diff| = {max_diff:.2e}", out.display());
    Ok(())
}
