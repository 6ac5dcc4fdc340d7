//! Splits the demo FOMC surprises into MP and ID shocks at a few rotations.

use fomc_spillovers::hfdecomp::{
    admissible_angle_interval, decompose_at, poor_mans_decompose, second_moment, SurprisePanel,
};

fn main() -> fomc_spillovers::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo_surprises.csv");
    let panel = SurprisePanel::read_csv(path)?;
    let pair = panel.to_pair()?;
    let interval = admissible_angle_interval(&pair)?;
    println!(
        "{} announcements, admissible alpha in ({:.4}, {:.4})",
        pair.len(),
        interval.lo,
        interval.hi
    );

    let total = second_moment(pair.i_total());
    for w in [0.1, 0.5, 0.9] {
        let d = decompose_at(&pair, w)?;
        println!(
            "w = {w}: alpha = {:.4}, c_mp = {:+.3}, c_id = {:+.3}, var(i_mp)/var(i_total) = {:.3}",
            d.alpha,
            d.c_mp,
            d.c_id,
            second_moment(&d.i_mp) / total
        );
    }

    let pm = poor_mans_decompose(&pair);
    println!("poor man's split: var(i_mp)/var(i_total) = {:.3}", pm.variance_ratio());
    Ok(())
}
