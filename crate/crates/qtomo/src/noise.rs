//! Noise models and simulation of the linear measurement process
//! `Y_j = tr(rho X_j) + xi_j`.

use crate::designs::{DesignDistribution, DesignDraw};
use crate::hermitian::{hs_inner, HermitianMatrix};
use crate::states::DensityMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Mean-zero measurement noise. The noiseless case is `Gaussian { sigma: 0 }`
/// so that one code path covers it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// Uniform on `[-c, c]`; variance `c^2/3`.
    BoundedUniform { c: f64 },
    /// `+c` or `-c` with probability 1/2 each; variance `c^2`.
    TwoPoint { c: f64 },
}

impl NoiseModel {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                let g: f64 = StandardNormal.sample(rng);
                sigma * g
            }
            NoiseModel::BoundedUniform { c } => {
                let u: f64 = rng.random();
                c * (2.0 * u - 1.0)
            }
            NoiseModel::TwoPoint { c } => {
                if rng.random::<bool>() {
                    c
                } else {
                    -c
                }
            }
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::BoundedUniform { c } => c / 3f64.sqrt(),
            NoiseModel::TwoPoint { c } => c,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::BoundedUniform { .. } => "uniform",
            NoiseModel::TwoPoint { .. } => "two-point",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::BoundedUniform { c } => c,
            NoiseModel::TwoPoint { c } => c,
        }
    }
}

/// Analytic constants of a noise model under the Orlicz convention
/// `||xi||_psi = inf { C : E psi(|xi|/C) <= 1 }` with
/// `psi_alpha(t) = e^{t^alpha} - 1`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseConstants {
    /// Standard deviation `sigma_xi`.
    pub sigma_xi: f64,
    /// Uniform bound `c_xi` on `|xi|`; infinite for Gaussian noise.
    pub c_xi_bound: f64,
    pub psi1: f64,
    pub psi2: f64,
    /// `||xi||_{psi_2} * max(log(||xi||_{psi_2}/sigma_xi), 1)`, the
    /// subgaussian-noise constant with its logarithm floored at 1 to keep
    /// it positive.
    pub c_xi_subgauss: f64,
}

/// Analytic noise constants per model kind. All constants vanish for the
/// degenerate `sigma = 0` model.
pub fn noise_constants(noise: &NoiseModel) -> NoiseConstants {
    match *noise {
        NoiseModel::Gaussian { sigma } => {
            if sigma == 0.0 {
                return NoiseConstants {
                    sigma_xi: 0.0,
                    c_xi_bound: 0.0,
                    psi1: 0.0,
                    psi2: 0.0,
                    c_xi_subgauss: 0.0,
                };
            }
            // E exp(xi^2/C^2) = (1 - 2 sigma^2/C^2)^{-1/2} = 2.
            let psi2 = sigma * (8.0f64 / 3.0).sqrt();
            // E exp(|xi|/C) = 2 e^{u^2/2} Phi(u) with u = sigma/C; solve = 2.
            let u = bisect(
                |u| 2.0 * (0.5 * u * u).exp() * normal_cdf(u) - 2.0,
                1e-9,
                20.0,
            );
            let psi1 = sigma / u;
            NoiseConstants {
                sigma_xi: sigma,
                c_xi_bound: f64::INFINITY,
                psi1,
                psi2,
                c_xi_subgauss: c_xi_subgauss(psi2, sigma),
            }
        }
        NoiseModel::BoundedUniform { c } => {
            if c == 0.0 {
                return NoiseConstants {
                    sigma_xi: 0.0,
                    c_xi_bound: 0.0,
                    psi1: 0.0,
                    psi2: 0.0,
                    c_xi_subgauss: 0.0,
                };
            }
            let sigma = c / 3f64.sqrt();
            // E exp(|xi|/C) = (C/c)(e^{c/C} - 1) = 2, solved for r = c/C.
            let r1 = bisect(|r| ((r).exp() - 1.0) / r - 2.0, 1e-9, 50.0);
            let psi1 = c / r1;
            // E exp(xi^2/C^2) = (1/c) int_0^c e^{x^2/C^2} dx = 2 via quadrature.
            let r2 = bisect(
                |r| {
                    // mean of exp((r x / c)^2) over x in [0, c]
                    let steps = 2000;
                    let mut acc = 0.0;
                    for k in 0..steps {
                        let x = (k as f64 + 0.5) / steps as f64;
                        acc += (r * r * x * x).exp();
                    }
                    acc / steps as f64 - 2.0
                },
                1e-9,
                20.0,
            );
            let psi2 = c / r2;
            NoiseConstants {
                sigma_xi: sigma,
                c_xi_bound: c,
                psi1,
                psi2,
                c_xi_subgauss: c_xi_subgauss(psi2, sigma),
            }
        }
        NoiseModel::TwoPoint { c } => {
            if c == 0.0 {
                return NoiseConstants {
                    sigma_xi: 0.0,
                    c_xi_bound: 0.0,
                    psi1: 0.0,
                    psi2: 0.0,
                    c_xi_subgauss: 0.0,
                };
            }
            NoiseConstants {
                sigma_xi: c,
                c_xi_bound: c,
                psi1: c / 2f64.ln(),
                psi2: c / 2f64.ln().sqrt(),
                c_xi_subgauss: c_xi_subgauss(c / 2f64.ln().sqrt(), c),
            }
        }
    }
}

fn c_xi_subgauss(psi2: f64, sigma: f64) -> f64 {
    psi2 * (psi2 / sigma).ln().max(1.0)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc_neg(x / 2f64.sqrt())
}

/// `erfc(-t)` via the Abramowitz-Stegun 7.1.26 polynomial, accurate to ~1e-7,
/// sufficient for solving the Orlicz equations to the tolerances used here.
fn erfc_neg(t: f64) -> f64 {
    let erf = |z: f64| -> f64 {
        let sign = if z < 0.0 { -1.0 } else { 1.0 };
        let z = z.abs();
        let t = 1.0 / (1.0 + 0.3275911 * z);
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        sign * (1.0 - poly * (-z * z).exp())
    };
    1.0 + erf(t)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f increasing in its root region; expand hi until sign change.
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Metadata identifying how a dataset was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub design_kind: String,
    pub dim: usize,
    pub n: usize,
    pub noise_kind: String,
    pub noise_param: f64,
    pub seed: u64,
    pub true_state: String,
}

/// `n` pairs of design matrices and scalar responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub designs: Vec<HermitianMatrix>,
    pub draws: Vec<DesignDraw>,
    pub responses: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    /// A dataset from explicit designs and exact noiseless responses.
    pub fn noiseless_exact(
        rho: &DensityMatrix,
        designs: Vec<HermitianMatrix>,
        draws: Vec<DesignDraw>,
        meta_kind: &str,
    ) -> Self {
        let responses: Vec<f64> = designs
            .iter()
            .map(|x| hs_inner(rho.matrix(), x))
            .collect();
        let n = responses.len();
        Dataset {
            meta: DatasetMeta {
                design_kind: meta_kind.to_string(),
                dim: rho.dim(),
                n,
                noise_kind: "gaussian".to_string(),
                noise_param: 0.0,
                seed: 0,
                true_state: "exact".to_string(),
            },
            designs,
            draws,
            responses,
        }
    }
}

/// Simulates `n` measurements `Y_j = tr(rho X_j) + xi_j` with `xi`
/// independent of the designs.
///
/// The generator stream is owned by this function and derived from `seed`
/// alone, so a recorded dataset can be replayed bit-exactly from its
/// metadata (the design-then-noise draw order per observation is part of
/// the serialization contract).
///
/// Panics if `rho` and the design dimension disagree or `n = 0`.
pub fn simulate_measurements(
    rho: &DensityMatrix,
    dist: &DesignDistribution,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Dataset {
    use rand::SeedableRng;
    assert_eq!(rho.dim(), dist.dim(), "dimension mismatch");
    assert!(n >= 1, "n must be at least 1");
    let rng = &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut designs = Vec::with_capacity(n);
    let mut draws = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let (draw, x) = dist.sample_indexed(rng);
        let y = hs_inner(rho.matrix(), &x) + noise.sample(rng);
        designs.push(x);
        draws.push(draw);
        responses.push(y);
    }
    Dataset {
        designs,
        draws,
        responses,
        meta: DatasetMeta {
            design_kind: dist.kind().as_str().to_string(),
            dim: dist.dim(),
            n,
            noise_kind: noise.kind_str().to_string(),
            noise_param: noise.parameter(),
            seed,
            true_state: String::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn noiseless_responses_are_exact_traces() {
        let mut r = rng(3);
        let rho = random_density(4, 2, &mut r);
        let dist = DesignDistribution::pauli(2);
        let data = simulate_measurements(&rho, &dist, &NoiseModel::Gaussian { sigma: 0.0 }, 50, 0);
        for (x, &y) in data.designs.iter().zip(data.responses.iter()) {
            assert!((y - hs_inner(rho.matrix(), x)).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_identity_draws_have_mean_inverse_sqrt_m() {
        let m = 4usize;
        let rho = DensityMatrix::maximally_mixed(m);
        let dist = DesignDistribution::pauli(2);
        let data = simulate_measurements(&rho, &dist, &NoiseModel::Gaussian { sigma: 0.0 }, 5000, 0);
        let target = (m as f64).powf(-0.5);
        for (x, &y) in data.designs.iter().zip(data.responses.iter()) {
            // Identity-proportional draws give m^{-1/2}; all others are
            // traceless, hence response 0.
            if x.trace().abs() > 1e-9 {
                assert!((y - target).abs() < 1e-12);
            } else {
                assert!(y.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_variance_matches_noise_model() {
        let mut r = rng(7);
        let rho = random_density(3, 3, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(3);
        for noise in [
            NoiseModel::Gaussian { sigma: 0.3 },
            NoiseModel::BoundedUniform { c: 0.5 },
            NoiseModel::TwoPoint { c: 0.2 },
        ] {
            let n = 100_000usize;
            let data = simulate_measurements(&rho, &dist, &noise, n, 0);
            let resid: Vec<f64> = data
                .designs
                .iter()
                .zip(data.responses.iter())
                .map(|(x, &y)| y - hs_inner(rho.matrix(), x))
                .collect();
            let mean = resid.iter().sum::<f64>() / n as f64;
            let var = resid.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
            let fourth = resid.iter().map(|e| e.powi(4)).sum::<f64>() / n as f64;
            let se = ((fourth - var * var) / n as f64).max(0.0).sqrt();
            let expect = noise.sigma().powi(2);
            assert!(
                (var - expect).abs() <= 3.0 * se + 1e-9,
                "{}: var {var} vs {expect}",
                noise.kind_str()
            );
        }
    }

    #[test]
    fn noise_is_independent_of_design_functionals() {
        let mut r = rng(11);
        let rho = random_density(3, 3, &mut r);
        let dist = DesignDistribution::gaussian(3);
        let noise = NoiseModel::Gaussian { sigma: 0.5 };
        let n = 100_000usize;
        let data = simulate_measurements(&rho, &dist, &noise, n, 0);
        let probe = crate::hermitian::random_hermitian(3, &mut r);
        let mut sum_f = 0.0;
        let mut sum_e = 0.0;
        let mut sum_fe = 0.0;
        let mut sum_f2 = 0.0;
        let mut sum_e2 = 0.0;
        for (x, &y) in data.designs.iter().zip(data.responses.iter()) {
            let f = hs_inner(&probe, x);
            let e = y - hs_inner(rho.matrix(), x);
            sum_f += f;
            sum_e += e;
            sum_fe += f * e;
            sum_f2 += f * f;
            sum_e2 += e * e;
        }
        let nf = n as f64;
        let cov = sum_fe / nf - (sum_f / nf) * (sum_e / nf);
        let var_f = sum_f2 / nf - (sum_f / nf).powi(2);
        let var_e = sum_e2 / nf - (sum_e / nf).powi(2);
        let se = (var_f * var_e / nf).sqrt();
        assert!(cov.abs() <= 4.0 * se, "cov {cov} exceeds 4 se {se}");
    }

    #[test]
    fn simulation_is_reproducible() {
        let rho = random_density(3, 2, &mut rng(13));
        let dist = DesignDistribution::rademacher(3);
        let noise = NoiseModel::TwoPoint { c: 0.1 };
        let a = simulate_measurements(&rho, &dist, &noise, 100, 42);
        let b = simulate_measurements(&rho, &dist, &noise, 100, 42);
        assert_eq!(a.responses, b.responses);
        for (x, y) in a.designs.iter().zip(b.designs.iter()) {
            assert_eq!(x.data(), y.data());
        }
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.meta, b.meta);
    }

    #[test]
    fn two_point_constants() {
        let c = noise_constants(&NoiseModel::TwoPoint { c: 0.7 });
        assert!((c.sigma_xi - 0.7).abs() < 1e-12);
        assert!((c.c_xi_bound - 0.7).abs() < 1e-12);
        assert!((c.psi1 - 0.7 / 2f64.ln()).abs() < 1e-12);
        assert!((c.psi2 - 0.7 / 2f64.ln().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bounded_uniform_constants() {
        let c = noise_constants(&NoiseModel::BoundedUniform { c: 0.9 });
        assert!((c.sigma_xi - 0.9 / 3f64.sqrt()).abs() < 1e-12);
        assert!((c.c_xi_bound - 0.9).abs() < 1e-12);
        // Check the psi_1 defining equation directly.
        let r = 0.9 / c.psi1;
        assert!(((r.exp() - 1.0) / r - 2.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_psi2_closed_form() {
        let sigma = 1.3;
        let c = noise_constants(&NoiseModel::Gaussian { sigma });
        assert!((c.psi2 - sigma * (8f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(c.c_xi_bound.is_infinite());
        // Quadrature check of E exp(xi^2 / psi2^2) = 2 (a Monte-Carlo mean
        // of this integrand has infinite variance, so integrate instead).
        let steps = 400_000usize;
        let span = 12.0 * sigma;
        let mut integral = 0.0;
        for k in 0..steps {
            let x = -span + (2.0 * span) * (k as f64 + 0.5) / steps as f64;
            let density = (-x * x / (2.0 * sigma * sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            integral += ((x / c.psi2).powi(2)).exp() * density * (2.0 * span / steps as f64);
        }
        assert!((integral - 2.0).abs() < 1e-3, "E exp = {integral}");
        // c_xi_subgauss floors the log at 1: psi2/sigma = sqrt(8/3) < e.
        assert!((c.c_xi_subgauss - c.psi2).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_has_zero_constants() {
        let c = noise_constants(&NoiseModel::Gaussian { sigma: 0.0 });
        assert_eq!(c.sigma_xi, 0.0);
        assert_eq!(c.psi1, 0.0);
        assert_eq!(c.psi2, 0.0);
        assert_eq!(c.c_xi_subgauss, 0.0);
    }
}
