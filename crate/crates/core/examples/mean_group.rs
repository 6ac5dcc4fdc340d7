//! Mean-group estimate: one OLS VAR per country, averaged.

use fomc_spillovers::paneldata::{load_panel, DatedShocks, Transform, VariableSpec};
use fomc_spillovers::pbvar::{mean_group, BvarConfig};

fn main() -> fomc_spillovers::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let specs = [
        VariableSpec::endogenous("ner", Transform::Log100),
        VariableSpec::endogenous("ip", Transform::Log100),
        VariableSpec::endogenous("equity", Transform::Log100),
    ];
    let shocks = DatedShocks::read_csv(format!("{dir}/data/demo_shocks_golden.csv"), &["i_mp", "i_id"])?;
    let panel = load_panel(format!("{dir}/data/demo_panel.csv"), &specs)?.align_shocks(&shocks)?;

    let config = BvarConfig {
        lags: 1,
        horizon: 12,
        ..BvarConfig::default()
    };
    let mg = mean_group(&panel, &config)?;
    println!("{} countries used, dropped: {:?}", mg.countries.len(), mg.dropped);
    let names = &mg.bands.variable_names;
    for v in 2..names.len() {
        println!(
            "{:>7} to i_mp: impact {:+.3}, 6m {:+.3}; country 16-84: [{:+.3}, {:+.3}]",
            names[v],
            mg.point[(0, v, 0)],
            mg.point[(0, v, 6)],
            mg.bands.at(0, v, 0, 16.0),
            mg.bands.at(0, v, 0, 84.0)
        );
    }
    Ok(())
}
