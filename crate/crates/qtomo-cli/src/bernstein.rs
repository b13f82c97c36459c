//! Monte-Carlo verification of the matrix Bernstein tail bound.

use crate::seeding::{stream_rng, Phase};
use anyhow::{bail, Result};
use qtomo::bounds::bernstein_tail;
use qtomo::designs::DesignDistribution;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct BernsteinRow {
    /// Deviation level on the sample-mean scale.
    pub t: f64,
    /// Empirical frequency of `||mean(X_j) - EX|| >= t`.
    pub empirical: f64,
    /// The tail bound evaluated at the sum scale `n t`.
    pub bound: f64,
    /// Monte-Carlo standard error of the empirical frequency under the
    /// bound's own rate: `sqrt(bound (1 - bound) / reps)`.
    pub mc_se: f64,
    /// Whether the row violates `empirical <= bound + 3 mc_se` while the
    /// bound is informative (`<= 1`).
    pub violated: bool,
}

#[derive(Debug, Clone)]
pub struct BernsteinTable {
    pub sigma_x: f64,
    pub u_centered: f64,
    pub rows: Vec<BernsteinRow>,
    pub violations: usize,
}

impl BernsteinTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("t,empirical,bound,mc_se,violated\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t, r.empirical, r.bound, r.mc_se, r.violated
            ));
        }
        out
    }
}

/// Draws `reps` independent samples of `||(1/n) sum (X_j - EX)||` and tests
/// the empirical tail against the Bernstein bound on a `t_points`-point
/// grid spanning the observed range. All constants are exact finite sums
/// over the (bounded, basis-sampling) design's support.
pub fn run_bernstein_suite(
    dist: &DesignDistribution,
    n: usize,
    reps: usize,
    t_points: usize,
    master_seed: u64,
) -> Result<BernsteinTable> {
    if !dist.kind().is_basis_sampling() {
        bail!("the Bernstein suite needs a bounded basis-sampling design");
    }
    assert!(n >= 1 && reps >= 1 && t_points >= 1);
    let m = dist.dim();
    let mean = dist.mean_matrix();
    let sigma_x = dist
        .sigma_x_exact()
        .expect("basis-sampling design has exact sigma_X");
    // Uniform bound on the centered summand, exact over the support.
    let u_centered = dist
        .basis()
        .iter()
        .map(|x| x.sub(&mean).op_norm())
        .fold(0.0f64, f64::max);

    let deviations: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(master_seed, Phase::Bernstein, 0, rep as u64);
            let mut acc = qtomo::HermitianMatrix::zeros(m);
            for _ in 0..n {
                acc = acc.add(&dist.sample(&mut rng));
            }
            acc.scale(1.0 / n as f64).sub(&mean).op_norm()
        })
        .collect();
    let max_dev = deviations.iter().cloned().fold(0.0f64, f64::max);

    let mut rows = Vec::with_capacity(t_points);
    let mut violations = 0usize;
    for k in 1..=t_points {
        let t = 1.05 * max_dev * k as f64 / t_points as f64;
        let empirical =
            deviations.iter().filter(|&&d| d >= t).count() as f64 / reps as f64;
        let bound = bernstein_tail(n as f64 * t, n, m, sigma_x, u_centered);
        let mc_se = if bound <= 1.0 {
            (bound * (1.0 - bound) / reps as f64).max(0.0).sqrt()
        } else {
            0.0
        };
        let violated = bound <= 1.0 && empirical > bound + 3.0 * mc_se;
        if violated {
            violations += 1;
        }
        rows.push(BernsteinRow {
            t,
            empirical,
            bound,
            mc_se,
            violated,
        });
    }
    Ok(BernsteinTable {
        sigma_x,
        u_centered,
        rows,
        violations,
    })
}
