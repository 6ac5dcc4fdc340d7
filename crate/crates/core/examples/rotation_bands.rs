//! Responses pooled over a coarse grid of admissible rotations.

use fomc_spillovers::hfdecomp::{rotation_grid, SurprisePanel};
use fomc_spillovers::paneldata::{load_panel, Transform, VariableSpec};
use fomc_spillovers::pbvar::{rotation_band_irf, BvarConfig, RotationOptions};

fn main() -> fomc_spillovers::Result<()> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let specs = [
        VariableSpec::endogenous("ner", Transform::Log100),
        VariableSpec::endogenous("ip", Transform::Log100),
    ];
    let panel = load_panel(format!("{dir}/data/demo_panel.csv"), &specs)?;
    let surprises = SurprisePanel::read_csv(format!("{dir}/data/demo_surprises.csv"))?;
    let grid = rotation_grid(&surprises.to_pair()?, 9)?;

    let config = BvarConfig {
        lags: 1,
        draws: 400,
        burn: 100,
        horizon: 12,
        ..BvarConfig::default()
    };
    let options = RotationOptions { pool_draws: Some(2000) };
    let res = rotation_band_irf(&panel, surprises.dates(), &grid, &config, &options, 5)?;

    let ner = res.pooled.variable_index("ner")?;
    println!("pooled over {} rotations, {} draws", grid.len(), res.pooled_draws);
    for (g, alpha) in res.alphas.iter().enumerate() {
        let m = res.median_at(g);
        println!("alpha = {alpha:.3}: ner impact MP {:+.3}, ID {:+.3}", m[(0, ner, 0)], m[(1, ner, 0)]);
    }
    println!(
        "pooled ner impact to MP: {:+.3} [{:+.3}, {:+.3}]",
        res.pooled.median(0, ner, 0),
        res.pooled.at(0, ner, 0, 5.0),
        res.pooled.at(0, ner, 0, 95.0)
    );
    Ok(())
}
