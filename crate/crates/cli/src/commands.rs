use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, ensure, Context, Result};
use gaussrbf::{
    lattice_points, loglog_slope, sample_values, scatter_points, thread_scaling, BoundingBox, BoxWidths, Decomposition,
    GaussianKernel, GmresParams, Interpolant, LatticeSpec, Point, PointSet, SolveConfig, TestFunction, RNG_ALGORITHM,
};

use crate::io;
use crate::summary::{BenchReport, GeneratorInfo, RunSummary, SCHEMA_VERSION, TOOL_VERSION};
use crate::{BenchArgs, BoxArgs, EvalArgs, EvalMode, GenerateArgs, GmresArgs, SolveArgs, SweepArgs};

pub enum Status {
    Done,
    NotConverged,
}

impl BoxArgs {
    fn defaults(&self) -> SolveConfig {
        if self.scattered {
            SolveConfig::scattered_defaults(self.sigma)
        } else {
            SolveConfig::lattice_defaults(self.sigma)
        }
    }

    fn widths(&self) -> BoxWidths {
        let d = self.defaults().widths;
        let cell = self.cell_width.unwrap_or(d.cell);
        BoxWidths::new(
            cell,
            self.overlap_width.unwrap_or(cell * d.overlap / d.cell),
            self.trunc_width.unwrap_or(cell + (d.trunc - d.cell)),
        )
    }
}

impl GmresArgs {
    fn params(&self) -> GmresParams {
        GmresParams {
            restart: self.restart,
            rtol: self.rtol,
            atol: self.atol,
            max_iters: self.max_iters,
        }
    }
}

fn config(boxes: &BoxArgs, gmres: &GmresArgs) -> Result<SolveConfig> {
    let config = boxes
        .defaults()
        .with_widths(boxes.widths())
        .with_variant(gmres.variant.into())
        .with_gmres(gmres.params())
        .with_threads(gmres.threads);
    config.validate()?;
    Ok(config)
}

pub fn generate(a: GenerateArgs) -> Result<Status> {
    let domain = BoundingBox::new(
        Point::new(a.domain[0], a.domain[1]),
        Point::new(a.domain[2], a.domain[3]),
    )?;
    let spacing = match (a.lattice_h, a.side) {
        (Some(h), _) => h,
        (None, Some(side)) => {
            ensure!(side >= 2, "--side must be at least 2");
            ensure!(domain.width() == domain.height(), "--side needs a square domain");
            domain.width() / (side - 1) as f64
        }
        (None, None) => bail!("one of --lattice-h or --side is required"),
    };
    let spec = LatticeSpec::new(spacing, domain)?;
    let mut points = lattice_points(&spec);
    if let Some(seed) = a.scatter_seed {
        points = scatter_points(&points, spacing, seed)?;
    }
    let function: TestFunction = a.function.into();
    let points = sample_values(points, |p| function.eval(p))?;
    io::emit(a.output.as_deref(), &io::write_points(&points))?;

    if let Some(out) = &a.output {
        let info = GeneratorInfo {
            name: if a.scatter_seed.is_some() {
                "scattered"
            } else {
                "lattice"
            }
            .to_string(),
            seed: a.scatter_seed,
            rng: a.scatter_seed.map(|_| RNG_ALGORITHM.to_string()),
            spacing,
            domain: [domain.min.x, domain.min.y, domain.max.x, domain.max.y],
            function,
            n_points: points.len(),
            tool_version: TOOL_VERSION.to_string(),
        };
        let meta = io::sidecar(out);
        fs::write(&meta, serde_json::to_string_pretty(&info)? + "\n")
            .with_context(|| format!("cannot write {}", meta.display()))?;
    }
    Ok(Status::Done)
}

pub fn solve(a: SolveArgs) -> Result<Status> {
    let config = config(&a.boxes, &a.gmres)?;
    let points = io::read_point_set(&a.input)?;
    let meta = io::sidecar(&a.input);
    let generator = if meta.exists() {
        let text = fs::read_to_string(&meta).with_context(|| format!("cannot read {}", meta.display()))?;
        Some(serde_json::from_str(&text).with_context(|| format!("bad metadata in {}", meta.display()))?)
    } else {
        None
    };

    let (interp, report) = gaussrbf::solve(&points, &config)?;
    if let Some(path) = &a.weights {
        io::emit(Some(path), &io::write_weights(interp.weights()))?;
    }
    if let Some(path) = &a.history {
        io::emit(Some(path), &io::write_history(&report.residual_history))?;
    }
    let summary = RunSummary::new(a.input.display().to_string(), config, &report, generator);
    io::emit(a.summary.as_deref(), &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    if report.converged {
        Ok(Status::Done)
    } else {
        eprintln!(
            "not converged after {} iterations (residual {:.3e})",
            report.iterations, report.preconditioned_residual
        );
        Ok(Status::NotConverged)
    }
}

pub fn eval(a: EvalArgs) -> Result<Status> {
    let weights = io::read_weights(&a.weights)?;
    let (centers, _) = io::read_points(&a.points, false)?;
    ensure!(
        centers.len() == weights.len(),
        "{} has {} points but {} has {} weights",
        a.points.display(),
        centers.len(),
        a.weights.display(),
        weights.len()
    );
    let queries = match (&a.queries, a.query_lattice) {
        (Some(path), _) => io::read_points(path, false)?.0,
        (None, Some(h)) => {
            let bbox = PointSet::new(centers.clone())?.bounding_box();
            lattice_points(&LatticeSpec::new(h, bbox)?).into_parts().0
        }
        (None, None) => bail!("one of --queries or --query-lattice is required"),
    };
    let kernel = GaussianKernel::new(a.boxes.sigma)?;
    let values = match a.mode {
        EvalMode::Exact => Interpolant::new(kernel, centers, weights)?.evaluate(&queries, None)?,
        EvalMode::Truncated => {
            let set = PointSet::new(centers.clone())?;
            let decomp = Decomposition::build(&set, a.boxes.widths())?;
            Interpolant::new(kernel, centers, weights)?.evaluate(&queries, Some(&decomp))?
        }
    };
    io::emit(a.output.as_deref(), &io::write_values(&queries, &values))?;
    Ok(Status::Done)
}

pub fn sweep(a: SweepArgs) -> Result<Status> {
    let boxes = BoxArgs {
        sigma: a.sigma,
        cell_width: None,
        overlap_width: None,
        trunc_width: None,
        scattered: a.scattered,
    };
    let mut base = config(&boxes, &a.gmres)?;
    if let Some(m) = a.trunc_margin {
        let w = base.widths;
        base = base.with_widths(BoxWidths::new(w.cell, w.overlap, w.cell + m * a.sigma));
    }
    let points = io::read_point_set(&a.input)?;
    let table = gaussrbf::sweep(&points, &base, &a.b_over_sigma, &a.d_over_b)?;

    // Grid order keeps the file stable across runs; ranking is by `seconds`.
    let mut rows = table.rows.clone();
    rows.sort_by(|x, y| {
        x.b_over_sigma
            .total_cmp(&y.b_over_sigma)
            .then(x.d_over_b.total_cmp(&y.d_over_b))
    });
    let mut out = String::from("B_over_sigma,D_over_B,iterations,seconds,converged\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{}",
            r.b_over_sigma, r.d_over_b, r.iterations, r.seconds, r.converged
        );
        if let Some(e) = &r.error {
            eprintln!("B/sigma={} D/B={}: {e}", r.b_over_sigma, r.d_over_b);
        }
    }
    io::emit(a.output.as_deref(), &out)?;
    if rows.iter().any(|r| r.converged) {
        Ok(Status::Done)
    } else {
        eprintln!("no sweep cell converged");
        Ok(Status::NotConverged)
    }
}

pub fn bench(a: BenchArgs) -> Result<Status> {
    if a.sizes.len() < 2 && a.thread_counts.len() < 2 {
        bail!("bench needs at least two sizes or two thread counts");
    }
    ensure!(
        a.sizes.iter().all(|&s| s >= 2),
        "sizes are points per side and must be at least 2"
    );
    ensure!(a.repeats >= 1, "--repeats must be at least 1");
    ensure!(a.h_over_sigma > 0.0, "--h-over-sigma must be positive");

    let mut csv = String::from("N,threads,iterations,seconds,storage_estimate,converged\n");
    // (N, threads, seconds, storage) per cell.
    let mut runs = Vec::new();
    let mut all_converged = true;
    for &side in &a.sizes {
        let spec = LatticeSpec::unit_square_with_side(side)?;
        let mut points = lattice_points(&spec);
        if a.scattered {
            points = scatter_points(&points, spec.spacing, 7)?;
        }
        let points = sample_values(points, |p| gaussrbf::franke(p.x, p.y))?;
        let sigma = spec.spacing / a.h_over_sigma;
        let boxes = BoxArgs {
            sigma,
            cell_width: None,
            overlap_width: None,
            trunc_width: None,
            scattered: a.scattered,
        };
        for &threads in &a.thread_counts {
            let gmres = GmresArgs {
                variant: a.variant,
                rtol: a.rtol,
                atol: a.atol,
                restart: GmresParams::default().restart,
                max_iters: a.max_iters,
                threads,
            };
            let config = config(&boxes, &gmres)?;
            let mut best = f64::INFINITY;
            let mut last = None;
            for _ in 0..a.repeats {
                let (_, report) = gaussrbf::solve(&points, &config)?;
                best = best.min(report.wall_times.total);
                last = Some(report);
            }
            let report = last.expect("at least one repeat");
            all_converged &= report.converged;
            let _ = writeln!(
                csv,
                "{},{threads},{},{best:.6},{},{}",
                report.n_points, report.iterations, report.storage_estimate, report.converged
            );
            runs.push((report.n_points, threads, best, report.storage_estimate));
        }
    }
    io::emit(a.output.as_deref(), &csv)?;

    let first_threads = a.thread_counts[0];
    let series: Vec<_> = runs.iter().filter(|r| r.1 == first_threads).collect();
    let ns: Vec<f64> = series.iter().map(|r| r.0 as f64).collect();
    let distinct = ns.windows(2).any(|w| w[0] != w[1]);
    let (time_slope, storage_slope) = if distinct {
        let ts: Vec<f64> = series.iter().map(|r| r.2).collect();
        let ss: Vec<f64> = series.iter().map(|r| r.3 as f64).collect();
        (Some(loglog_slope(&ns, &ts)?), Some(loglog_slope(&ns, &ss)?))
    } else {
        (None, None)
    };
    let scaling = if a.thread_counts.len() >= 2 {
        let largest = runs.iter().map(|r| r.0).max().unwrap_or(0);
        let samples: Vec<(usize, f64)> = runs.iter().filter(|r| r.0 == largest).map(|r| (r.1, r.2)).collect();
        thread_scaling(&samples)?
    } else {
        Vec::new()
    };
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        h_over_sigma: a.h_over_sigma,
        time_slope,
        storage_slope,
        thread_scaling: scaling,
    };
    io::emit(a.report.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(if all_converged {
        Status::Done
    } else {
        Status::NotConverged
    })
}
