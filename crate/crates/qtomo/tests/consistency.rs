//! Population-vs-empirical consistency: at fixed regularization the
//! empirical solution approaches the population solution as the sample
//! grows.

use qtomo::designs::DesignDistribution;
use qtomo::estimator::{solve_entropy_penalized, solve_population, SolverConfig};
use qtomo::noise::{simulate_measurements, NoiseModel};
use qtomo::states::random_density;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn empirical_solution_approaches_population_solution() {
    let m = 4usize;
    let dist = DesignDistribution::pauli(2);
    let noise = NoiseModel::Gaussian { sigma: 0.1 };
    let epsilon = 0.01;
    let cfg = SolverConfig::with_epsilon(epsilon);

    let mut distances = [Vec::new(), Vec::new()];
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let rho = random_density(m, 2, &mut rng);
        let population = solve_population(&rho, &dist, epsilon, &cfg).unwrap();
        for (slot, n) in [(0usize, 10_000usize), (1, 100_000)] {
            let data = simulate_measurements(&rho, &dist, &noise, n, seed.wrapping_mul(1_000_003).wrapping_add(n as u64));
            let empirical = solve_entropy_penalized(&data, None, &cfg).unwrap();
            let diff = empirical
                .estimate
                .matrix()
                .sub(population.estimate.matrix());
            distances[slot].push(dist.l2_pi_norm(&diff));
        }
    }
    let med = |v: &Vec<f64>| -> f64 {
        let mut s = v.clone();
        s.sort_by(|a, b| a.total_cmp(b));
        0.5 * (s[9] + s[10])
    };
    let d_small = med(&distances[0]);
    let d_large = med(&distances[1]);
    assert!(
        d_large < d_small,
        "median L2(Pi) distance to the population solution did not shrink: \
         n=1e4 gives {d_small:.3e}, n=1e5 gives {d_large:.3e}"
    );
}
