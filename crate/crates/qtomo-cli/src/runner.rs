//! End-to-end recovery runs and scaling sweeps.

use crate::experiment::{ExperimentSpec, Metric};
use crate::seeding::{stream_rng, Phase};
use anyhow::{bail, Result};
use qtomo::designs::DesignDistribution;
use qtomo::estimator::{solve_entropy_penalized, SolverConfig};
use qtomo::noise::simulate_measurements;
use qtomo::states::{
    fidelity, gibbs_state, hellinger_sq, random_density, random_unitary, symmetrized_kl,
    DensityMatrix,
};
use qtomo::HermitianMatrix;
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

/// One replication's outcome. `wall_ms` is the only nondeterministic field.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub spec_hash: u64,
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub sigma: f64,
    pub rep: usize,
    pub seed: u64,
    pub metrics: Vec<(Metric, f64)>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub wall_ms: f64,
}

/// The sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    Rank,
    M,
    Sigma,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => Axis::N,
            "rank" => Axis::Rank,
            "m" => Axis::M,
            "sigma" => Axis::Sigma,
            other => bail!("unknown sweep axis `{other}`"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Rank => "rank",
            Axis::M => "m",
            Axis::Sigma => "sigma",
        }
    }
}

/// OLS slope of `log(median squared l2pi error)` against `log(axis)`, with
/// a bootstrap confidence interval over replications.
#[derive(Debug, Clone)]
pub struct SlopeReport {
    pub axis: &'static str,
    /// `(axis value, median squared l2pi error)` per grid point.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Draws the true state per the spec's recipe: a random rank-constrained
/// state, or a Gibbs state of a randomly conjugated fixed spectrum.
pub fn draw_truth(spec: &ExperimentSpec, m: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    if spec.gibbs_spectrum.is_empty() {
        random_density(m, rank, rng)
    } else {
        assert_eq!(spec.gibbs_spectrum.len(), m, "gibbs spectrum length != m");
        let u = random_unitary(m, rng);
        let diag = HermitianMatrix::from_real_diagonal(&spec.gibbs_spectrum);
        let h = HermitianMatrix::symmetrize(&u * diag.data() * u.adjoint());
        gibbs_state(&h)
    }
}

fn compute_metric(
    metric: Metric,
    estimate: &DensityMatrix,
    truth: &DensityMatrix,
    dist: &DesignDistribution,
) -> f64 {
    let diff = estimate.matrix().sub(truth.matrix());
    match metric {
        Metric::L2Pi => dist.l2_pi_norm(&diff),
        Metric::Hs => diff.frobenius_norm(),
        Metric::Trace => diff.schatten_norm(1.0),
        Metric::Hellinger => hellinger_sq(estimate, truth),
        Metric::KlSym => symmetrized_kl(estimate, truth).unwrap_or(f64::NAN),
        Metric::Fidelity => fidelity(estimate, truth),
    }
}

struct Job {
    grid_index: usize,
    n: usize,
    rank: usize,
    sigma: f64,
    m: usize,
    rep: usize,
}

fn run_jobs(spec: &ExperimentSpec, jobs: Vec<Job>) -> Result<Vec<ResultRow>> {
    let metrics = spec.metric_list()?;
    let rule = spec.epsilon_rule()?;
    let spec_hash = spec.spec_hash();

    let rows: Result<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|job| {
            let started = Instant::now();
            let sub_spec = ExperimentSpec {
                m: job.m,
                ..spec.clone()
            };
            let dist = sub_spec.distribution()?;
            let noise = match spec.noise.as_str() {
                "gaussian" => qtomo::noise::NoiseModel::Gaussian { sigma: job.sigma },
                "uniform" => qtomo::noise::NoiseModel::BoundedUniform { c: job.sigma },
                "two-point" => qtomo::noise::NoiseModel::TwoPoint { c: job.sigma },
                other => bail!("unknown noise kind `{other}`"),
            };
            let seed = crate::seeding::stream_seed(
                spec.seed,
                Phase::Recovery,
                job.grid_index as u64,
                job.rep as u64,
            );
            let mut rng = stream_rng(
                spec.seed,
                Phase::Recovery,
                job.grid_index as u64,
                job.rep as u64,
            );
            let truth = draw_truth(&sub_spec, job.m, job.rank, &mut rng);
            // Separate stream for the measurements so a saved dataset can be
            // replayed from its recorded seed alone.
            let data_seed: u64 = rng.random();
            let data = simulate_measurements(&truth, &dist, &noise, job.n, data_seed);
            let ctx = sub_spec.rate_context(job.n, job.sigma)?;
            let epsilon = rule.resolve(&ctx);
            let cfg = SolverConfig {
                epsilon,
                max_iter: spec.max_iter,
                ..SolverConfig::default()
            };
            let result = solve_entropy_penalized(&data, None, &cfg)
                .map_err(|e| anyhow::anyhow!("solver failure: {e}"))?;
            let metric_values: Vec<(Metric, f64)> = metrics
                .iter()
                .map(|&metric| {
                    (
                        metric,
                        compute_metric(metric, &result.estimate, &truth, &dist),
                    )
                })
                .collect();
            Ok(ResultRow {
                spec_hash,
                n: job.n,
                m: job.m,
                rank: job.rank,
                sigma: job.sigma,
                rep: job.rep,
                seed,
                metrics: metric_values,
                iterations: result.iterations,
                residual: result.stationarity_residual,
                converged: result.converged,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect();
    let mut rows = rows?;
    rows.sort_by(|a, b| {
        a.m.cmp(&b.m)
            .then(a.n.cmp(&b.n))
            .then(a.rank.cmp(&b.rank))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.rep.cmp(&b.rep))
    });
    Ok(rows)
}

/// For each `(n, replication)` pair: draw the true state, simulate the
/// dataset, solve, and record the requested error metrics against truth.
/// Deterministic per `(seed, spec)` up to the wall-time column; solver
/// non-convergence is recorded per row and the run continues.
pub fn run_recovery(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for (g, &n) in spec.ns.iter().enumerate() {
        for rep in 0..spec.replications {
            jobs.push(Job {
                grid_index: g,
                n,
                rank: spec.rank,
                sigma: spec.sigma,
                m: spec.m,
                rep,
            });
        }
    }
    run_jobs(spec, jobs)
}

/// Runs the grid along the chosen axis and fits the log-log slope of the
/// median squared `l2pi` error, with a bootstrap confidence interval over
/// replications (200 resamples).
pub fn run_scaling_sweep(spec: &ExperimentSpec, axis: Axis) -> Result<(Vec<ResultRow>, SlopeReport)> {
    spec.validate()?;
    if !spec
        .metrics
        .iter()
        .any(|m| m == "l2pi")
    {
        bail!("scaling sweeps require the l2pi metric");
    }
    let grid: Vec<(f64, Job)> = match axis {
        Axis::N => spec
            .ns
            .iter()
            .enumerate()
            .map(|(g, &n)| {
                (
                    n as f64,
                    Job {
                        grid_index: g,
                        n,
                        rank: spec.rank,
                        sigma: spec.sigma,
                        m: spec.m,
                        rep: 0,
                    },
                )
            })
            .collect(),
        Axis::Rank => spec
            .ranks
            .iter()
            .enumerate()
            .map(|(g, &rank)| {
                (
                    rank as f64,
                    Job {
                        grid_index: g,
                        n: spec.ns[0],
                        rank,
                        sigma: spec.sigma,
                        m: spec.m,
                        rep: 0,
                    },
                )
            })
            .collect(),
        Axis::M => spec
            .ms
            .iter()
            .enumerate()
            .map(|(g, &m)| {
                (
                    m as f64,
                    Job {
                        grid_index: g,
                        n: spec.ns[0],
                        rank: spec.rank,
                        sigma: spec.sigma,
                        m,
                        rep: 0,
                    },
                )
            })
            .collect(),
        Axis::Sigma => spec
            .sigmas
            .iter()
            .enumerate()
            .map(|(g, &sigma)| {
                (
                    sigma,
                    Job {
                        grid_index: g,
                        n: spec.ns[0],
                        rank: spec.rank,
                        sigma,
                        m: spec.m,
                        rep: 0,
                    },
                )
            })
            .collect(),
    };
    if grid.len() < 4 && axis == Axis::N {
        bail!("sweeps over n need at least 4 grid points");
    }
    if grid.len() < 2 {
        bail!("degenerate sweep grid");
    }

    let mut jobs = Vec::new();
    let mut axis_values = Vec::new();
    for (x, proto) in &grid {
        axis_values.push(*x);
        for rep in 0..spec.replications {
            jobs.push(Job {
                grid_index: proto.grid_index,
                n: proto.n,
                rank: proto.rank,
                sigma: proto.sigma,
                m: proto.m,
                rep,
            });
        }
    }
    let rows = run_jobs(spec, jobs)?;

    // Squared l2pi errors grouped per grid point, in replication order.
    let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    for row in &rows {
        let g = grid
            .iter()
            .position(|(_, p)| {
                p.n == row.n && p.rank == row.rank && p.sigma == row.sigma && p.m == row.m
            })
            .expect("row belongs to a grid point");
        let l2 = row
            .metrics
            .iter()
            .find(|(m, _)| *m == Metric::L2Pi)
            .expect("l2pi requested")
            .1;
        per_point[g].push(l2 * l2);
    }

    let medians: Vec<f64> = per_point.iter().map(|v| median(v)).collect();
    let points: Vec<(f64, f64)> = axis_values.iter().cloned().zip(medians.iter().cloned()).collect();
    let slope = ols_slope(&axis_values, &medians);

    // Bootstrap over replications, deterministic under the master seed.
    let boots = 200usize;
    let mut slopes = Vec::with_capacity(boots);
    for b in 0..boots {
        let mut rng = stream_rng(spec.seed, Phase::Bootstrap, 0, b as u64);
        let meds: Vec<f64> = per_point
            .iter()
            .map(|vals| {
                let resampled: Vec<f64> = (0..vals.len())
                    .map(|_| vals[rng.random_range(0..vals.len())])
                    .collect();
                median(&resampled)
            })
            .collect();
        slopes.push(ols_slope(&axis_values, &meds));
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let ci_low = slopes[(0.025 * boots as f64) as usize];
    let ci_high = slopes[((0.975 * boots as f64) as usize).min(boots - 1)];

    Ok((
        rows,
        SlopeReport {
            axis: axis.name(),
            points,
            slope,
            ci_low,
            ci_high,
        },
    ))
}

/// Side-by-side evaluation of the two theoretical bound families at one
/// grid point: the "rough" family decays like `n^{-1/2}` and holds for all
/// regularization levels; the "subtle" family decays like `1/n` but carries
/// larger logarithmic factors. Which one is sharper depends on the noise
/// level, so both are reported and neither is asserted.
#[derive(Debug, Clone)]
pub struct BoundFamilyRow {
    pub axis_value: f64,
    pub epsilon: f64,
    pub rough: f64,
    pub subtle: f64,
}

/// Evaluates both bound families (with unit constants) along the sweep
/// grid, pairing the displays by design family.
pub fn bound_family_table(spec: &ExperimentSpec, axis: Axis) -> Result<Vec<BoundFamilyRow>> {
    use qtomo::bounds::{oracle_rhs, OracleInfo, TheoremTag};
    use qtomo::designs::DesignKind;
    let rule = spec.epsilon_rule()?;
    let kind = spec.design_kind()?;
    let grid: Vec<(f64, usize, usize, f64, usize)> = match axis {
        Axis::N => spec
            .ns
            .iter()
            .map(|&n| (n as f64, n, spec.rank, spec.sigma, spec.m))
            .collect(),
        Axis::Rank => spec
            .ranks
            .iter()
            .map(|&r| (r as f64, spec.ns[0], r, spec.sigma, spec.m))
            .collect(),
        Axis::M => spec
            .ms
            .iter()
            .map(|&m| (m as f64, spec.ns[0], spec.rank, spec.sigma, m))
            .collect(),
        Axis::Sigma => spec
            .sigmas
            .iter()
            .map(|&s| (s, spec.ns[0], spec.rank, s, spec.m))
            .collect(),
    };
    let (rough_tag, subtle_tag) = match kind {
        DesignKind::PauliUniform => (TheoremTag::Thm23First, TheoremTag::Thm23Oracle),
        DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => {
            (TheoremTag::Thm21First, TheoremTag::Thm22)
        }
        DesignKind::MatrixCompletionUniform | DesignKind::MatrixCompletionEntry => {
            (TheoremTag::Thm51, TheoremTag::Cor54)
        }
    };
    let needs_constants = matches!(rough_tag, TheoremTag::Thm51);
    let mut out = Vec::with_capacity(grid.len());
    for (axis_value, n, rank, sigma, m) in grid {
        let sub_spec = ExperimentSpec {
            m,
            ..spec.clone()
        };
        let mut ctx = sub_spec.rate_context(n, sigma)?;
        if needs_constants {
            let dist = sub_spec.distribution()?;
            let mut rng = stream_rng(spec.seed, Phase::Fixture, 0, 0);
            ctx.design = (&dist.design_constants(2000, &mut rng)).into();
        }
        let epsilon = rule.resolve(&ctx);
        // With the truth itself as oracle: zero approximation error; the
        // penalty branch of the rough family falls back to log(m/eps) for
        // rank-deficient truths.
        let info = OracleInfo {
            epsilon: Some(epsilon),
            approx_error_sq: Some(0.0),
            rank: Some(rank),
            log_s_op: Some(f64::INFINITY),
            log_s_hs: Some(f64::INFINITY),
            tail_norm: Some(0.0),
            ..OracleInfo::default()
        };
        let rough = oracle_rhs(&ctx, rough_tag, &info)
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .value;
        let subtle = oracle_rhs(&ctx, subtle_tag, &info)
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .value;
        out.push(BoundFamilyRow {
            axis_value,
            epsilon,
            rough,
            subtle,
        });
    }
    Ok(out)
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-300).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_quantile() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((quantile(&[1.0, 2.0, 3.0, 4.0], 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ols_slope_recovers_power_law() {
        let xs = [1.0f64, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        assert!((ols_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_is_deterministic_and_consistent() {
        let spec = ExperimentSpec {
            design: "pauli".into(),
            m: 4,
            rank: 1,
            noise: "gaussian".into(),
            sigma: 0.1,
            ns: vec![200, 800],
            epsilon: "auto:0.03".into(),
            replications: 6,
            seed: 11,
            ..ExperimentSpec::default()
        };
        let rows1 = run_recovery(&spec).unwrap();
        let rows2 = run_recovery(&spec).unwrap();
        assert_eq!(rows1.len(), 12);
        for (a, b) in rows1.iter().zip(rows2.iter()) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.iterations, b.iterations);
        }
        // Consistency direction: larger n gives smaller median l2pi error.
        let med = |n: usize| -> f64 {
            let vals: Vec<f64> = rows1
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.metrics.iter().find(|(m, _)| *m == Metric::L2Pi).unwrap().1)
                .collect();
            median(&vals)
        };
        assert!(med(800) < med(200), "no error decrease with n");
    }

    #[test]
    fn bound_families_decay_at_their_stated_rates() {
        let spec = ExperimentSpec {
            design: "pauli".into(),
            m: 8,
            rank: 1,
            sigma: 0.1,
            ns: vec![1000, 4000, 16000, 64000],
            epsilon: "auto:1.0".into(),
            ..ExperimentSpec::default()
        };
        let table = bound_family_table(&spec, Axis::N).unwrap();
        assert_eq!(table.len(), 4);
        for w in table.windows(2) {
            assert!(w[1].rough < w[0].rough);
            assert!(w[1].subtle < w[0].subtle);
        }
        // Over a 16x growth in n the rough family shrinks like n^{-1/2}
        // and the subtle family like 1/n (up to logarithmic drift).
        let rough_ratio = table[0].rough / table[2].rough;
        let subtle_ratio = table[0].subtle / table[2].subtle;
        assert!(
            (2.0..=8.0).contains(&rough_ratio),
            "rough ratio {rough_ratio}"
        );
        assert!(
            (8.0..=32.0).contains(&subtle_ratio),
            "subtle ratio {subtle_ratio}"
        );
        // The completion-basis pairing exercises the design-constants path.
        let mc = ExperimentSpec {
            design: "mc-uniform".into(),
            m: 4,
            ns: vec![500, 1000, 2000, 4000],
            ..spec
        };
        let table = bound_family_table(&mc, Axis::N).unwrap();
        assert!(table.iter().all(|r| r.rough.is_finite() && r.rough > 0.0));
        assert!(table.iter().all(|r| r.subtle.is_finite() && r.subtle > 0.0));
    }

    #[test]
    fn dimension_axis_sweep_groups_rows_by_m() {
        let spec = ExperimentSpec {
            design: "pauli".into(),
            m: 2,
            rank: 1,
            ns: vec![200],
            ms: vec![2, 4],
            replications: 4,
            seed: 13,
            ..ExperimentSpec::default()
        };
        let (rows, report) = run_scaling_sweep(&spec, Axis::M).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows.iter().filter(|r| r.m == 2).count(), 4);
        assert_eq!(rows.iter().filter(|r| r.m == 4).count(), 4);
        assert_eq!(report.points.len(), 2);
        assert!(report.slope.is_finite());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = ExperimentSpec {
            design: "mc-uniform".into(),
            m: 3,
            rank: 2,
            ns: vec![150],
            replications: 8,
            seed: 21,
            ..ExperimentSpec::default()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_recovery(&spec).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_recovery(&spec).unwrap());
        assert_eq!(single.len(), many.len());
        for (a, b) in single.iter().zip(many.iter()) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.residual, b.residual);
            assert_eq!(a.iterations, b.iterations);
        }
    }

    #[test]
    fn gibbs_truth_recipe_is_used() {
        let spec = ExperimentSpec {
            design: "pauli".into(),
            m: 4,
            gibbs_spectrum: vec![0.0, 1.0, 2.0, 3.0],
            ns: vec![100],
            replications: 2,
            metrics: vec!["l2pi".into(), "fidelity".into()],
            ..ExperimentSpec::default()
        };
        let rows = run_recovery(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let f = row
                .metrics
                .iter()
                .find(|(m, _)| *m == Metric::Fidelity)
                .unwrap()
                .1;
            assert!(f > 0.0 && f <= 1.0 + 1e-8);
        }
    }
}
