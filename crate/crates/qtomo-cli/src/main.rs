//! Command-line interface for the density-matrix estimation harness.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qtomo_cli::bernstein::run_bernstein_suite;
use qtomo_cli::csvio;
use qtomo_cli::experiment::{EpsilonRule, ExperimentSpec};
use qtomo_cli::popcheck::{log_grid, run_population_props};
use qtomo_cli::runner::{run_recovery, run_scaling_sweep, Axis};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "qtomo",
    about = "Entropy-penalized density-matrix estimation: solvers, Monte-Carlo experiments, and bound checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by experiment-driven subcommands; every flag overrides the
/// matching config-file field.
#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// TOML config file with an `[experiment]` section.
    #[arg(long)]
    config: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Design kind: mc-uniform | mc-entry | pauli | gauss | rademacher.
    #[arg(long)]
    design: Option<String>,
    /// Matrix dimension m.
    #[arg(long)]
    m: Option<usize>,
    /// Qubit count (sets m = 2^k for the pauli design).
    #[arg(long)]
    k: Option<usize>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// True-state rank.
    #[arg(long)]
    rank: Option<usize>,
    /// Noise parameter (sigma for gaussian noise).
    #[arg(long)]
    sigma: Option<f64>,
    /// Regularization: a fixed value or `auto:D`.
    #[arg(long)]
    epsilon: Option<String>,
    /// Replications per grid point.
    #[arg(long)]
    reps: Option<usize>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_config_file(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(out) = &self.out {
            spec.out = out.clone();
        }
        if let Some(design) = &self.design {
            spec.design = design.clone();
        }
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(k) = self.k {
            spec.m = 1usize << k;
        }
        if let Some(ns) = &self.n {
            spec.ns = ns.clone();
        }
        if let Some(rank) = self.rank {
            spec.rank = rank;
        }
        if let Some(sigma) = self.sigma {
            spec.sigma = sigma;
        }
        if let Some(eps) = &self.epsilon {
            spec.epsilon = eps.clone();
        }
        if let Some(reps) = self.reps {
            spec.replications = reps;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one dataset into one estimate.
    ///
    /// Reads `j,design_index_or_hash,y` rows with a `.meta.json` sidecar and
    /// writes the estimate as `i,j,re,im` rows plus its own sidecar
    /// (epsilon, iterations, residual, converged).
    Estimate {
        /// Dataset CSV path.
        #[arg(long)]
        data: String,
        /// Regularization: fixed value or `auto:D`.
        #[arg(long, default_value = "auto:0.03")]
        epsilon: String,
        /// Output path for the estimate CSV.
        #[arg(long)]
        out: String,
        /// Confidence parameter t for auto epsilon.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Run recovery experiments over the configured n grid.
    ///
    /// Emits rows.csv with columns spec_hash,n,m,rank,sigma,rep,seed,
    /// <metrics...>,iterations,residual,converged,wall_ms (wall_ms is the
    /// only nondeterministic column under a fixed seed).
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also save the first replication's dataset (CSV + metadata
        /// sidecar) under the output directory.
        #[arg(long)]
        save_data: bool,
    },
    /// Scaling sweep along one axis with an OLS slope report.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Sweep axis: n | rank | m | sigma.
        #[arg(long)]
        axis: String,
        /// Fail (exit nonzero) if the fitted slope is below this value.
        #[arg(long, allow_negative_numbers = true)]
        slope_min: Option<f64>,
        /// Fail (exit nonzero) if the fitted slope is above this value.
        #[arg(long, allow_negative_numbers = true)]
        slope_max: Option<f64>,
    },
    /// Monte-Carlo verification of the matrix Bernstein tail bound.
    Bernstein {
        /// Design kind (basis-sampling kinds only).
        #[arg(long, default_value = "mc-uniform")]
        design: String,
        /// Matrix dimension m (power of two for pauli).
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Observations per replication.
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Replications.
        #[arg(long, default_value_t = 10000)]
        reps: usize,
        /// Grid points.
        #[arg(long, default_value_t = 20)]
        t_points: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: String,
    },
    /// Verify the population-risk approximation bounds over an epsilon grid.
    Popcheck {
        #[arg(long, default_value = "pauli")]
        design: String,
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Epsilon grid as lo,hi,points (log-spaced).
        #[arg(long, default_value = "1e-3,1e-1,8", value_delimiter = ',')]
        eps_grid: Vec<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: String,
        /// Allowed slack on the constant-free bounds.
        #[arg(long, default_value_t = 1e-6)]
        slack: f64,
    },
    /// Evaluate a theoretical bound display as a CSV row.
    Bounds {
        /// Display tag, e.g. thm22, thm52, cor56, kl, hellinger.
        #[arg(long)]
        theorem: String,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma_xi: f64,
        #[arg(long, default_value_t = 0.1)]
        c_xi: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        approx_sq: Option<f64>,
        #[arg(long)]
        a_log_s: Option<f64>,
        #[arg(long)]
        tail_norm: Option<f64>,
        #[arg(long)]
        log_s_op: Option<f64>,
        #[arg(long)]
        log_s_hs: Option<f64>,
        #[arg(long)]
        gamma_r: Option<f64>,
        #[arg(long)]
        delta_r: Option<f64>,
        #[arg(long)]
        approx_l2: Option<f64>,
        #[arg(long)]
        trace_err: Option<f64>,
        /// Design constants sigma_X,sigma_XX,U,||EX||,E||X||^2.
        #[arg(long, value_delimiter = ',')]
        design_constants: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        c_const: f64,
        #[arg(long, default_value_t = 1.0)]
        d_const: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Estimate {
            data,
            epsilon,
            out,
            t,
        } => cmd_estimate(&data, &epsilon, &out, t),
        Command::Simulate { spec, save_data } => {
            let spec = spec.resolve()?;
            let metrics = spec.metric_list()?;
            let rows = run_recovery(&spec)?;
            let dir = PathBuf::from(&spec.out);
            csvio::emit_csv(&rows, &metrics, &dir.join("rows.csv"))?;
            csvio::emit_plotdata(&rows, |r| r.n as f64, &dir.join("plot.csv"))?;
            if save_data {
                // Regenerate the first grid point's first replication with
                // its recorded stream seed and persist it.
                let dist = spec.distribution()?;
                let noise = spec.noise_model()?;
                let mut rng =
                    qtomo_cli::seeding::stream_rng(spec.seed, qtomo_cli::seeding::Phase::Recovery, 0, 0);
                let truth = qtomo_cli::runner::draw_truth(&spec, spec.m, spec.rank, &mut rng);
                let data_seed: u64 = rand::Rng::random(&mut rng);
                let data = qtomo::noise::simulate_measurements(
                    &truth, &dist, &noise, spec.ns[0], data_seed,
                );
                csvio::save_dataset(&data, &dir.join("dataset.csv"))?;
                println!("simulate: dataset -> {}", dir.join("dataset.csv").display());
            }
            let unconverged = rows.iter().filter(|r| !r.converged).count();
            println!(
                "simulate: {} rows -> {} ({} unconverged)",
                rows.len(),
                dir.join("rows.csv").display(),
                unconverged
            );
            Ok(())
        }
        Command::Sweep {
            spec,
            axis,
            slope_min,
            slope_max,
        } => {
            let spec = spec.resolve()?;
            let metrics = spec.metric_list()?;
            let axis = Axis::parse(&axis)?;
            let (rows, report) = run_scaling_sweep(&spec, axis)?;
            let dir = PathBuf::from(&spec.out);
            csvio::emit_csv(&rows, &metrics, &dir.join("rows.csv"))?;
            let axis_of = move |r: &qtomo_cli::runner::ResultRow| -> f64 {
                match axis {
                    Axis::N => r.n as f64,
                    Axis::Rank => r.rank as f64,
                    Axis::M => r.m as f64,
                    Axis::Sigma => r.sigma,
                }
            };
            csvio::emit_plotdata(&rows, axis_of, &dir.join("plot.csv"))?;
            let mut slope_csv = String::from("axis,slope,ci_low,ci_high\n");
            slope_csv.push_str(&format!(
                "{},{},{},{}\n",
                report.axis, report.slope, report.ci_low, report.ci_high
            ));
            std::fs::write(dir.join("slope.csv"), slope_csv)?;
            // Both theoretical bound families side by side; which one is
            // sharper depends on the noise level, so neither is asserted.
            let families = qtomo_cli::runner::bound_family_table(&spec, axis)?;
            let mut bounds_csv = String::from("axis_value,epsilon,rough_bound,subtle_bound\n");
            for row in &families {
                bounds_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    row.axis_value, row.epsilon, row.rough, row.subtle
                ));
            }
            std::fs::write(dir.join("bounds.csv"), bounds_csv)?;
            println!(
                "sweep {}: slope = {:.4} (bootstrap 95% CI [{:.4}, {:.4}])",
                report.axis, report.slope, report.ci_low, report.ci_high
            );
            for (x, med) in &report.points {
                println!("  {} = {x}: median squared l2pi error = {med:.6e}", report.axis);
            }
            if let Some(lo) = slope_min {
                if report.slope < lo {
                    bail!("slope {:.4} below required minimum {lo}", report.slope);
                }
            }
            if let Some(hi) = slope_max {
                if report.slope > hi {
                    bail!("slope {:.4} above required maximum {hi}", report.slope);
                }
            }
            Ok(())
        }
        Command::Bernstein {
            design,
            m,
            n,
            reps,
            t_points,
            seed,
            out,
        } => {
            let dist = build_dist(&design, m)?;
            let table = run_bernstein_suite(&dist, n, reps, t_points, seed)?;
            let dir = PathBuf::from(out);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("bernstein.csv"), table.csv())?;
            println!(
                "bernstein: sigma_X = {:.6}, centered U = {:.6}, {} grid points, {} violations",
                table.sigma_x,
                table.u_centered,
                table.rows.len(),
                table.violations
            );
            if table.violations > 0 {
                bail!("{} Bernstein bound violations", table.violations);
            }
            Ok(())
        }
        Command::Popcheck {
            design,
            m,
            eps_grid,
            seed,
            out,
            slack,
        } => {
            if eps_grid.len() != 3 {
                bail!("--eps-grid expects lo,hi,points");
            }
            let lo: f64 = eps_grid[0].parse().context("bad eps_grid lo")?;
            let hi: f64 = eps_grid[1].parse().context("bad eps_grid hi")?;
            let points: usize = eps_grid[2].parse().context("bad eps_grid points")?;
            let dist = build_dist(&design, m)?;
            let grid = log_grid(lo, hi, points);
            let table = run_population_props(&dist, &grid, seed)?;
            let dir = PathBuf::from(out);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("popcheck.csv"), table.csv())?;
            println!(
                "popcheck: ||log rho|| = {:.4}, a(log rho) = {:.4}, {} grid points",
                table.log_rho_op,
                table.a_log_rho,
                table.rows.len()
            );
            table.check(slack)?;
            println!("popcheck: all constant-free bounds hold (slack {slack:e})");
            Ok(())
        }
        Command::Bounds {
            theorem,
            m,
            n,
            t,
            sigma_xi,
            c_xi,
            epsilon,
            rank,
            approx_sq,
            a_log_s,
            tail_norm,
            log_s_op,
            log_s_hs,
            gamma_r,
            delta_r,
            approx_l2,
            trace_err,
            design_constants,
            c_const,
            d_const,
            lambda,
        } => {
            let tag: qtomo::bounds::TheoremTag =
                theorem.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut ctx = qtomo::bounds::RateContext::new(m, n, t);
            ctx.sigma_xi = sigma_xi;
            ctx.c_xi = c_xi;
            ctx.psi1_xi = c_xi;
            ctx.c_const = c_const;
            ctx.d_const = d_const;
            ctx.lambda = lambda;
            if let Some(dc) = design_constants {
                if dc.len() != 5 {
                    bail!("--design-constants expects sigma_X,sigma_XX,U,||EX||,E||X||^2");
                }
                ctx.design = qtomo::bounds::DesignStats {
                    sigma_x: dc[0],
                    sigma_xx: dc[1],
                    u_bound: dc[2],
                    ex_norm: dc[3],
                    e_norm_sq: dc[4],
                };
            }
            let info = qtomo::bounds::OracleInfo {
                epsilon,
                approx_error_sq: approx_sq,
                rank,
                a_log_s,
                tail_norm,
                log_s_op,
                log_s_hs,
                beta: None,
                gamma_r,
                delta_r,
                approx_l2,
                trace_err,
            };
            let report =
                qtomo::bounds::oracle_rhs(&ctx, tag, &info).map_err(|e| anyhow::anyhow!("{e}"))?;
            println!("{}", report.csv_row());
            Ok(())
        }
    }
}

fn build_dist(kind: &str, m: usize) -> Result<qtomo::designs::DesignDistribution> {
    let kind: qtomo::designs::DesignKind = kind.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(match kind {
        qtomo::designs::DesignKind::PauliUniform => {
            if !m.is_power_of_two() || m < 2 {
                bail!("pauli design requires m to be a power of two");
            }
            qtomo::designs::DesignDistribution::pauli(m.trailing_zeros() as usize)
        }
        other => qtomo::designs::DesignDistribution::from_kind(other, m),
    })
}

fn cmd_estimate(data_path: &str, epsilon: &str, out: &str, t: f64) -> Result<()> {
    let data = csvio::load_dataset(Path::new(data_path))?;
    let kind: qtomo::designs::DesignKind = data
        .meta
        .design_kind
        .parse()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let flavor = qtomo_cli::experiment::default_flavor(kind);
    let rule = EpsilonRule::parse(epsilon, flavor)?;
    let noise = match data.meta.noise_kind.as_str() {
        "gaussian" => qtomo::noise::NoiseModel::Gaussian {
            sigma: data.meta.noise_param,
        },
        "uniform" => qtomo::noise::NoiseModel::BoundedUniform {
            c: data.meta.noise_param,
        },
        "two-point" => qtomo::noise::NoiseModel::TwoPoint {
            c: data.meta.noise_param,
        },
        other => bail!("unknown noise kind `{other}`"),
    };
    let nc = qtomo::noise::noise_constants(&noise);
    let mut ctx = qtomo::bounds::RateContext::new(data.meta.dim, data.len(), t);
    ctx.sigma_xi = nc.sigma_xi;
    ctx.c_xi = if nc.c_xi_bound.is_finite() {
        nc.c_xi_bound
    } else {
        nc.c_xi_subgauss
    };
    let eps = rule.resolve(&ctx);
    let cfg = qtomo::estimator::SolverConfig {
        epsilon: eps,
        ..Default::default()
    };
    let result = qtomo::estimator::solve_entropy_penalized(&data, None, &cfg)
        .map_err(|e| anyhow::anyhow!("solver failure: {e}"))?;
    csvio::save_estimate(&result, eps, Path::new(out))?;
    println!(
        "estimate: epsilon = {eps:.6e}, iterations = {}, residual = {:.3e}, converged = {} -> {out}",
        result.iterations, result.stationarity_residual, result.converged
    );
    if !result.converged {
        bail!("solver did not reach the stationarity tolerance");
    }
    Ok(())
}
