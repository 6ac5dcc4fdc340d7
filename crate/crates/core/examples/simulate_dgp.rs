//! Draws a synthetic panel and compares the generating angle with the
//! admissible interval of the simulated surprises.

use fomc_spillovers::dgpsim::{simulate, true_irf_per_sd, DgpSpec};
use fomc_spillovers::hfdecomp::admissible_angle_interval;

fn main() -> fomc_spillovers::Result<()> {
    let spec = DgpSpec {
        n_countries: 4,
        n_months: 120,
        ..DgpSpec::default()
    };
    let sim = simulate(&spec)?;
    let (n, t, k) = sim.panel.dim();
    println!("{n} countries x {t} months x {k} variables, {} announcements", sim.surprises.len());
    println!("countries: {}", sim.panel.countries().join(", "));

    let interval = admissible_angle_interval(&sim.pair)?;
    println!(
        "generating alpha = {:.4}, admissible ({:.4}, {:.4})",
        spec.generating_angle(),
        interval.lo,
        interval.hi
    );

    let irf = true_irf_per_sd(&spec, 12);
    let names = spec.variable_names();
    for v in 2..names.len() {
        println!(
            "{:>13}: MP impact {:+.3}, ID impact {:+.3}, MP at 12m {:+.3}",
            names[v],
            irf[(0, v, 0)],
            irf[(1, v, 0)],
            irf[(0, v, 12)]
        );
    }
    Ok(())
}
