//! Interpolates the Franke function on a lattice and reports the error on a
//! finer grid. `cargo run --release --example franke -- 0.9` sets h / sigma.

use gaussrbf::{franke, lattice_points, sample_values, solve, LatticeSpec, SolveConfig};

fn main() -> gaussrbf::Result<()> {
    let h_over_sigma: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let sigma = 0.01;
    let spec = LatticeSpec::unit_square(h_over_sigma * sigma)?;
    let points = sample_values(lattice_points(&spec), |p| franke(p.x, p.y))?;

    let (interp, report) = solve(&points, &SolveConfig::lattice_defaults(sigma))?;
    println!(
        "N = {}, {} subdomains, {} iterations, converged = {}, {:.3} s",
        report.n_points, report.subdomain_count, report.iterations, report.converged, report.wall_times.total
    );

    let queries = lattice_points(&LatticeSpec::unit_square(0.0037)?).into_parts().0;
    let values = interp.evaluate(&queries, None)?;
    let err = queries
        .iter()
        .zip(&values)
        .map(|(q, s)| (s - franke(q.x, q.y)).abs())
        .fold(0.0, f64::max);
    println!("max |s - f| on {} off-lattice points: {err:.3e}", queries.len());
    Ok(())
}
