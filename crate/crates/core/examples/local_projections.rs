//! Panel local projections of the exchange rate under the three
//! specifications.

use fomc_spillovers::localproj::{lp_estimate, LpConfig, LpSpec};
use fomc_spillovers::paneldata::{load_panel, DatedShocks, Transform, VariableSpec};

fn main() -> fomc_spillovers::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let specs = [
        VariableSpec::endogenous("ner", Transform::Log100),
        VariableSpec::endogenous("ip", Transform::Log100),
        VariableSpec::endogenous("lending_rate", Transform::Level),
    ];
    let shocks = DatedShocks::read_csv(format!("{dir}/data/demo_shocks_golden.csv"), &["i_mp", "i_id"])?;
    let panel = load_panel(format!("{dir}/data/demo_panel.csv"), &specs)?.align_shocks(&shocks)?;

    for spec in LpSpec::ALL {
        let cfg = LpConfig {
            spec,
            horizons: 12,
            ..LpConfig::default()
        };
        let r = lp_estimate(&panel, "ner", &cfg)?;
        println!("{spec} ({} obs at h=0)", r.n_obs[0]);
        for h in [0, 3, 6, 12] {
            println!(
                "  h={h:>2}  MP {:+.3} ({:.3})  ID {:+.3} ({:.3})",
                r.beta_mp()[h],
                r.se_mp()[h],
                r.beta_id()[h],
                r.se_id()[h]
            );
        }
    }
    Ok(())
}
