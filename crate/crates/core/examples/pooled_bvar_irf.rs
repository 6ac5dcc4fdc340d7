//! Pooled Bayesian panel VAR on the demo data with Cholesky responses to
//! the MP and ID shocks.

use fomc_spillovers::paneldata::{load_panel, DatedShocks, Transform, VariableSpec};
use fomc_spillovers::pbvar::{build_design, irf_draws, BvarConfig, Posterior};

fn main() -> fomc_spillovers::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let specs = [
        VariableSpec::endogenous("ner", Transform::Log100),
        VariableSpec::endogenous("ip", Transform::Log100),
        VariableSpec::endogenous("cpi", Transform::Log100),
        VariableSpec::endogenous("lending_rate", Transform::Level),
        VariableSpec::endogenous("equity", Transform::Log100),
    ];
    let shocks = DatedShocks::read_csv(format!("{dir}/data/demo_shocks_golden.csv"), &["i_mp", "i_id"])?;
    let panel = load_panel(format!("{dir}/data/demo_panel.csv"), &specs)?.align_shocks(&shocks)?;

    let config = BvarConfig {
        lags: 2,
        draws: 1200,
        burn: 200,
        horizon: 24,
        block_exogenous: true,
        ..BvarConfig::default()
    };
    let design = build_design(&panel, config.lags)?;
    let posterior = Posterior::fit(&design, &config)?;
    let draws = posterior.sample(&config, 11)?;
    let irf = irf_draws(&draws.samples, &posterior.names, config.horizon, Some(2))?
        .summarize(&config.percentiles);

    println!("{} draws kept, {} redrawn", irf.draws_used, draws.rejected);
    for shock in ["i_mp", "i_id"] {
        let s = irf.shock_index(shock)?;
        println!("{shock}:");
        for var in ["ner", "ip", "equity"] {
            let v = irf.variable_index(var)?;
            for h in [0, 6, 12, 24] {
                println!(
                    "  {var:>7} h={h:>2}: {:+.3} [{:+.3}, {:+.3}]",
                    irf.median(s, v, h),
                    irf.at(s, v, h, 16.0),
                    irf.at(s, v, h, 84.0)
                );
            }
        }
    }
    Ok(())
}
