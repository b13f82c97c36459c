//! Density matrices, von Neumann entropy, noncommutative distances,
//! low-rank structure utilities, and Gibbs states.
//!
//! Distances follow the matrix-function forms directly; the POVM-supremum
//! characterizations are not computed here.

use crate::hermitian::{hs_inner, HermitianMatrix, MatrixFunction, EIG_FLOOR};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

/// Numerical PSD tolerance: eigenvalues above `-PSD_TOL` are accepted.
pub const PSD_TOL: f64 = 1e-10;

/// Unit-trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("matrix trace {trace} deviates from 1 beyond tolerance")]
    TraceNotUnit { trace: f64 },
    #[error("state is rank-deficient (eigenvalue {eigenvalue:e}); logarithm undefined")]
    RankDeficient { eigenvalue: f64 },
    #[error("matrix is not an orthogonal projection: deviation {deviation:e}")]
    NotProjector { deviation: f64 },
}

/// A Hermitian, positive semidefinite matrix of unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: HermitianMatrix,
}

impl DensityMatrix {
    /// Validates PSD (eigenvalues >= -1e-10) and unit trace (within 1e-10).
    pub fn new(matrix: HermitianMatrix) -> Result<Self, StateError> {
        let trace = matrix.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(StateError::TraceNotUnit { trace });
        }
        let spec = matrix.eig().map_err(|_| StateError::NotPositive {
            min_eigenvalue: f64::NAN,
        })?;
        let min = *spec
            .eigenvalues
            .last()
            .expect("density matrix has dim >= 1");
        if min < -PSD_TOL {
            return Err(StateError::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(Self { matrix })
    }

    /// The maximally mixed state `I/m`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: HermitianMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Pure state `v v*` from a (not necessarily normalized) vector.
    pub fn pure(v: &[Complex64]) -> Self {
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!(norm_sq > 0.0, "pure state vector must be nonzero");
        let m = v.len();
        let data = DMatrix::from_fn(m, m, |i, j| v[i] * v[j].conj() / norm_sq);
        Self {
            matrix: HermitianMatrix::symmetrize(data),
        }
    }

    pub fn from_real_eigenvalues(eigs: &[f64]) -> Result<Self, StateError> {
        Self::new(HermitianMatrix::from_real_diagonal(eigs))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.eig().expect("density matrix eig").eigenvalues
    }
}

/// The entropy penalty `tr(S log S)`, i.e. minus the von Neumann entropy,
/// with the convention `0 log 0 = 0`. Lies in `[-log m, 0]`.
pub fn entropy_penalty(s: &DensityMatrix) -> f64 {
    s.eigenvalues()
        .iter()
        .map(|&l| if l <= EIG_FLOOR { 0.0 } else { l * l.ln() })
        .sum()
}

/// Kullback-Leibler divergence `tr(S1 (log S1 - log S2))`.
///
/// `s2` must be strictly positive definite; `s1` may be rank-deficient
/// (its own `0 log 0` terms vanish).
pub fn kl_divergence(s1: &DensityMatrix, s2: &DensityMatrix) -> Result<f64, StateError> {
    let log_s2 = log_of_state(s2)?;
    Ok(entropy_penalty(s1) - hs_inner(s1.matrix(), &log_s2))
}

/// Symmetrized Kullback-Leibler divergence
/// `tr((S1 - S2)(log S1 - log S2))`; both states must be strictly positive
/// definite.
pub fn symmetrized_kl(s1: &DensityMatrix, s2: &DensityMatrix) -> Result<f64, StateError> {
    let log_s1 = log_of_state(s1)?;
    let log_s2 = log_of_state(s2)?;
    let diff_s = s1.matrix().sub(s2.matrix());
    let diff_log = log_s1.sub(&log_s2);
    Ok(hs_inner(&diff_s, &diff_log))
}

fn log_of_state(s: &DensityMatrix) -> Result<HermitianMatrix, StateError> {
    let eigs = s.eigenvalues();
    let min = *eigs.last().expect("dim >= 1");
    if min <= EIG_FLOOR {
        return Err(StateError::RankDeficient { eigenvalue: min });
    }
    Ok(s.matrix()
        .matrix_func(MatrixFunction::Log)
        .expect("strictly positive state has a logarithm"))
}

/// Fidelity `F(S1, S2) = tr sqrt(S1^{1/2} S2 S1^{1/2})`, in `[0, 1]` up to
/// round-off; symmetric in its arguments.
pub fn fidelity(s1: &DensityMatrix, s2: &DensityMatrix) -> f64 {
    let sqrt_s1 = s1
        .matrix()
        .matrix_func(MatrixFunction::Sqrt)
        .expect("PSD state has a square root");
    let inner = sqrt_s1.conjugate_with(s2.matrix());
    let eigs = inner.eig().expect("fidelity eig").eigenvalues;
    let top = eigs.first().copied().unwrap_or(0.0).max(0.0);
    // Eigenvalues at round-off scale are exact zeros of the rank-deficient
    // inner matrix; the square root would amplify their noise to ~1e-8.
    let floor = top * 1e-12;
    eigs.iter()
        .map(|&l| if l <= floor { 0.0 } else { l.sqrt() })
        .sum()
}

/// Squared Hellinger distance `H^2(S1, S2) = 2 (1 - F(S1, S2))`, in `[0, 2]`.
pub fn hellinger_sq(s1: &DensityMatrix, s2: &DensityMatrix) -> f64 {
    2.0 * (1.0 - fidelity(s1, s2))
}

/// Trace distance `||S1 - S2||_1`, in `[0, 2]`.
pub fn trace_distance(s1: &DensityMatrix, s2: &DensityMatrix) -> f64 {
    s1.matrix().sub(s2.matrix()).schatten_norm(1.0)
}

/// An orthogonal projection onto an `r`-dimensional subspace of `C^m`.
#[derive(Debug, Clone)]
pub struct SubspaceProjector {
    matrix: HermitianMatrix,
    rank: usize,
}

impl SubspaceProjector {
    /// Builds `P = V V*` from a matrix whose columns are orthonormal.
    pub fn from_orthonormal_columns(cols: &DMatrix<Complex64>) -> Result<Self, StateError> {
        let r = cols.ncols();
        let gram = cols.adjoint() * cols;
        let dev = (&gram - DMatrix::<Complex64>::identity(r, r)).norm();
        if dev > 1e-10 {
            return Err(StateError::NotProjector { deviation: dev });
        }
        let matrix = HermitianMatrix::symmetrize(cols * cols.adjoint());
        Ok(Self { matrix, rank: r })
    }

    /// Projector onto the span of `rank` random orthonormal vectors.
    pub fn random(dim: usize, rank: usize, rng: &mut impl Rng) -> Self {
        assert!(rank <= dim);
        let u = random_unitary(dim, rng);
        let cols = u.columns(0, rank).into_owned();
        Self::from_orthonormal_columns(&cols).expect("unitary columns are orthonormal")
    }

    /// Projector onto the span of the `rank` bottom eigenvectors of `h`.
    pub fn bottom_eigenspace(h: &HermitianMatrix, rank: usize) -> Self {
        assert!(rank <= h.dim());
        let spec = h.eig().expect("projector eig");
        // Eigenvalues are stored descending; the bottom eigenvectors are the
        // trailing columns.
        let cols = spec
            .eigenvectors
            .columns(h.dim() - rank, rank)
            .into_owned();
        Self::from_orthonormal_columns(&cols).expect("eigenvectors are orthonormal")
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: HermitianMatrix::identity(dim),
            rank: dim,
        }
    }

    pub fn dim_ambient(&self) -> usize {
        self.matrix.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    /// The complementary projector `I - P`.
    pub fn complement(&self) -> Self {
        Self {
            matrix: HermitianMatrix::identity(self.dim_ambient()).sub(&self.matrix),
            rank: self.dim_ambient() - self.rank,
        }
    }

    /// The compression `P A P`.
    pub fn compress(&self, a: &HermitianMatrix) -> HermitianMatrix {
        self.matrix.conjugate_with(a)
    }
}

/// Both sides of the rank-transfer inequality
/// `||P S1 P||_1 <= 2 ||P S2 P||_1 + 2 H^2(S1, S2)`.
///
/// Returns `(lhs, rhs)`; the caller asserts `lhs <= rhs` up to slack.
pub fn rank_transfer_check(
    s1: &DensityMatrix,
    s2: &DensityMatrix,
    p: &SubspaceProjector,
) -> (f64, f64) {
    let lhs = p.compress(s1.matrix()).schatten_norm(1.0);
    let rhs = 2.0 * p.compress(s2.matrix()).schatten_norm(1.0) + 2.0 * hellinger_sq(s1, s2);
    (lhs, rhs)
}

/// The Gibbs state `e^{-H} / tr(e^{-H})`.
///
/// The spectrum is shifted by its minimum before exponentiation; the shift
/// cancels in the normalization and prevents overflow for large `||H||`.
pub fn gibbs_state(h: &HermitianMatrix) -> DensityMatrix {
    let spec = h.eig().expect("gibbs eig");
    let min = *spec.eigenvalues.last().expect("dim >= 1");
    let weights: Vec<f64> = spec.eigenvalues.iter().map(|&g| (-(g - min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    DensityMatrix::new(spec.recombine(&probs)).expect("gibbs weights form a state")
}

/// The tail mass `delta_r(H)` of the Gibbs state outside the span of the
/// `r` bottom eigenvectors of `H`:
/// `sum_{k > r} e^{-gamma_k} / sum_k e^{-gamma_k}` with the eigenvalues
/// `gamma_1 <= ... <= gamma_m` sorted in increasing order.
pub fn gibbs_tail(h: &HermitianMatrix, r: usize) -> f64 {
    let m = h.dim();
    assert!(r <= m, "r = {r} out of range for dim {m}");
    let spec = h.eig().expect("gibbs tail eig");
    let gammas = spec.ascending_eigenvalues();
    let shift = gammas[0];
    let weights: Vec<f64> = gammas.iter().map(|&g| (-(g - shift)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let tail: f64 = weights[r..].iter().sum();
    tail / total
}

/// Truncates `H` to its `r` bottom eigenvalues:
/// `H_low = sum_{j<=r} gamma_j e_j e_j*` (increasing eigenvalue order) and
/// the squared Hilbert-Schmidt mass `sum_{j<=r} gamma_j^2` of the kept part.
pub fn gibbs_truncate(h: &HermitianMatrix, r: usize) -> (HermitianMatrix, f64) {
    let m = h.dim();
    assert!(r <= m, "r = {r} out of range for dim {m}");
    let spec = h.eig().expect("gibbs truncate eig");
    // Descending storage: the r smallest eigenvalues occupy the last r slots.
    let mut kept = vec![0.0; m];
    let mut mass = 0.0;
    for (slot, &gamma) in kept[(m - r)..].iter_mut().zip(&spec.eigenvalues[(m - r)..]) {
        *slot = gamma;
        mass += gamma * gamma;
    }
    (spec.recombine(&kept), mass)
}

/// A Haar-like random unitary: the eigenvector matrix of a random Hermitian
/// matrix drawn from `rng`.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    crate::hermitian::random_hermitian(dim, rng)
        .eig()
        .expect("random unitary eig")
        .eigenvectors
}

/// A random density matrix of exact rank `rank`: eigenvalues are i.i.d.
/// Exponential(1) draws on `rank` coordinates normalized to sum 1, conjugated
/// by a random unitary.
pub fn random_density(dim: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    assert!((1..=dim).contains(&rank), "rank must lie in 1..=dim");
    let mut eigs = vec![0.0; dim];
    let mut total = 0.0;
    for e in eigs.iter_mut().take(rank) {
        let mut draw = 0.0;
        while draw <= 0.0 {
            let u: f64 = rng.random();
            draw = -(1.0 - u).ln();
        }
        *e = draw;
        total += draw;
    }
    for e in eigs.iter_mut().take(rank) {
        *e /= total;
    }
    let u = random_unitary(dim, rng);
    let diag = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(eigs[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let matrix = HermitianMatrix::symmetrize(&u * diag * u.adjoint());
    DensityMatrix::new(matrix).expect("simplex eigenvalues form a state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn entropy_of_maximally_mixed_state() {
        for m in [2usize, 4, 8] {
            let s = DensityMatrix::maximally_mixed(m);
            assert!((entropy_penalty(&s) + (m as f64).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_of_pure_state_is_zero() {
        let s = DensityMatrix::pure(&[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.5, -0.5),
        ]);
        assert!(entropy_penalty(&s).abs() < 1e-10);
    }

    #[test]
    fn entropy_of_diagonal_state_matches_scalar_formula() {
        let s = DensityMatrix::from_real_eigenvalues(&[0.75, 0.25]).unwrap();
        let expected = 0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln();
        assert!((entropy_penalty(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_of_state_with_itself_is_zero() {
        let mut r = rng(3);
        let s = random_density(4, 4, &mut r);
        let k = kl_divergence(&s, &s).unwrap();
        assert!(k.abs() < 1e-9);
    }

    #[test]
    fn kl_matches_classical_formula_for_commuting_states() {
        let p = [0.5, 0.5];
        let q = [0.75, 0.25];
        let s1 = DensityMatrix::from_real_eigenvalues(&p).unwrap();
        let s2 = DensityMatrix::from_real_eigenvalues(&q).unwrap();
        let classical: f64 = p
            .iter()
            .zip(q.iter())
            .map(|(&pi, &qi)| pi * (pi / qi).ln())
            .sum();
        assert!((kl_divergence(&s1, &s2).unwrap() - classical).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_on_random_pairs() {
        let mut r = rng(5);
        for _ in 0..100 {
            let s1 = random_density(3, 3, &mut r);
            let s2 = random_density(3, 3, &mut r);
            assert!(kl_divergence(&s1, &s2).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn kl_rejects_rank_deficient_second_argument() {
        let s1 = DensityMatrix::maximally_mixed(2);
        let s2 = DensityMatrix::from_real_eigenvalues(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            kl_divergence(&s1, &s2),
            Err(StateError::RankDeficient { .. })
        ));
    }

    #[test]
    fn symmetrized_kl_equals_two_call_oracle() {
        let mut r = rng(7);
        for _ in 0..20 {
            let s1 = random_density(4, 4, &mut r);
            let s2 = random_density(4, 4, &mut r);
            let sym = symmetrized_kl(&s1, &s2).unwrap();
            let two_calls =
                kl_divergence(&s1, &s2).unwrap() + kl_divergence(&s2, &s1).unwrap();
            assert!((sym - two_calls).abs() < 1e-8);
            assert!(sym >= -1e-10);
            let flipped = symmetrized_kl(&s2, &s1).unwrap();
            assert!((sym - flipped).abs() < 1e-8);
        }
    }

    #[test]
    fn symmetrized_kl_commuting_matches_scalar_formula() {
        let p = [0.6, 0.3, 0.1];
        let q = [0.2, 0.5, 0.3];
        let s1 = DensityMatrix::from_real_eigenvalues(&p).unwrap();
        let s2 = DensityMatrix::from_real_eigenvalues(&q).unwrap();
        let classical: f64 = p
            .iter()
            .zip(q.iter())
            .map(|(&pi, &qi)| (pi - qi) * (pi.ln() - qi.ln()))
            .sum();
        assert!((symmetrized_kl(&s1, &s2).unwrap() - classical).abs() < 1e-10);
    }

    #[test]
    fn fidelity_of_state_with_itself_is_one() {
        let mut r = rng(11);
        let s = random_density(5, 3, &mut r);
        assert!((fidelity(&s, &s) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fidelity_of_orthogonal_pure_states_is_zero() {
        let e1 = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let e2 = DensityMatrix::pure(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(fidelity(&e1, &e2).abs() < 1e-8);
        assert!((hellinger_sq(&e1, &e2) - 2.0).abs() < 1e-8);
        assert!((trace_distance(&e1, &e2) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fidelity_commuting_matches_bhattacharyya() {
        let p = [0.7, 0.2, 0.1];
        let q = [0.1, 0.6, 0.3];
        let s1 = DensityMatrix::from_real_eigenvalues(&p).unwrap();
        let s2 = DensityMatrix::from_real_eigenvalues(&q).unwrap();
        let bhatta: f64 = p
            .iter()
            .zip(q.iter())
            .map(|(&pi, &qi)| (pi * qi).sqrt())
            .sum();
        assert!((fidelity(&s1, &s2) - bhatta).abs() < 1e-10);
        let hellinger_classical: f64 = p
            .iter()
            .zip(q.iter())
            .map(|(&pi, &qi)| (pi.sqrt() - qi.sqrt()).powi(2))
            .sum();
        assert!((hellinger_sq(&s1, &s2) - hellinger_classical).abs() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric() {
        let mut r = rng(13);
        for _ in 0..10 {
            let s1 = random_density(4, 2, &mut r);
            let s2 = random_density(4, 4, &mut r);
            assert!((fidelity(&s1, &s2) - fidelity(&s2, &s1)).abs() < 1e-8);
            let f = fidelity(&s1, &s2);
            assert!((-1e-8..=1.0 + 1e-8).contains(&f));
        }
    }

    #[test]
    fn trace_distance_matches_direct_norm() {
        let mut r = rng(17);
        let s1 = random_density(4, 4, &mut r);
        let s2 = random_density(4, 4, &mut r);
        let direct = s1.matrix().sub(s2.matrix()).schatten_norm(1.0);
        assert!((trace_distance(&s1, &s2) - direct).abs() < 1e-12);
        assert!(trace_distance(&s1, &s1).abs() < 1e-12);
    }

    #[test]
    fn rank_transfer_trivial_cases() {
        let mut r = rng(19);
        let s = random_density(4, 4, &mut r);
        let p = SubspaceProjector::random(4, 2, &mut r);
        let (lhs, rhs) = rank_transfer_check(&s, &s, &p);
        assert!(lhs <= rhs + 1e-8);
        let full = SubspaceProjector::identity(4);
        let s2 = random_density(4, 4, &mut r);
        let (lhs, rhs) = rank_transfer_check(&s, &s2, &full);
        assert!((lhs - 1.0).abs() < 1e-8);
        assert!(lhs <= rhs + 1e-8);
    }

    #[test]
    fn rank_transfer_holds_on_random_triples() {
        let mut r = rng(23);
        for &m in &[2usize, 4, 8] {
            for _ in 0..20 {
                let s1 = random_density(m, 1 + (m / 2), &mut r);
                let s2 = random_density(m, m, &mut r);
                let p = SubspaceProjector::random(m, 1 + m / 3, &mut r);
                let (lhs, rhs) = rank_transfer_check(&s1, &s2, &p);
                assert!(lhs <= rhs + 1e-8, "m={m} lhs={lhs} rhs={rhs}");
            }
        }
    }

    #[test]
    fn gibbs_of_zero_hamiltonian_is_maximally_mixed() {
        let g = gibbs_state(&HermitianMatrix::zeros(4));
        let diff = trace_distance(&g, &DensityMatrix::maximally_mixed(4));
        assert!(diff < 1e-12);
    }

    #[test]
    fn gibbs_of_two_level_hamiltonian() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 3f64.ln()]);
        let g = gibbs_state(&h);
        assert!((g.matrix().get(0, 0).re - 0.75).abs() < 1e-12);
        assert!((g.matrix().get(1, 1).re - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gibbs_is_shift_invariant() {
        let mut r = rng(29);
        let h = crate::hermitian::random_hermitian(4, &mut r);
        let shifted = h.add(&HermitianMatrix::identity(4).scale(57.3));
        let d = trace_distance(&gibbs_state(&h), &gibbs_state(&shifted));
        assert!(d < 1e-10);
    }

    #[test]
    fn gibbs_tail_uniform_and_extremes() {
        let h = HermitianMatrix::zeros(4);
        assert!((gibbs_tail(&h, 2) - 0.5).abs() < 1e-12);
        assert!(gibbs_tail(&h, 4).abs() < 1e-15);
        let mut r = rng(31);
        let h = crate::hermitian::random_hermitian(6, &mut r);
        let mut prev = gibbs_tail(&h, 0);
        assert!((prev - 1.0).abs() < 1e-12);
        for k in 1..=6 {
            let cur = gibbs_tail(&h, k);
            assert!(cur <= prev + 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn gibbs_tail_equals_projector_norm() {
        let mut r = rng(37);
        let h = crate::hermitian::random_hermitian(5, &mut r);
        let rho = gibbs_state(&h);
        for rank in 1..5 {
            let p_perp = SubspaceProjector::bottom_eigenspace(&h, rank).complement();
            let norm = p_perp.compress(rho.matrix()).schatten_norm(1.0);
            assert!((gibbs_tail(&h, rank) - norm).abs() < 1e-9);
        }
    }

    #[test]
    fn gibbs_tail_complement_mass_sums_to_one() {
        let mut r = rng(41);
        let h = crate::hermitian::random_hermitian(5, &mut r);
        let rho = gibbs_state(&h);
        for rank in 0..=5 {
            let p = if rank == 0 {
                continue;
            } else {
                SubspaceProjector::bottom_eigenspace(&h, rank)
            };
            let head = p.compress(rho.matrix()).schatten_norm(1.0);
            assert!((gibbs_tail(&h, rank) + head - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gibbs_truncate_examples() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let (low, mass) = gibbs_truncate(&h, 2);
        assert!((mass - 5.0).abs() < 1e-12);
        let expected = HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 0.0]);
        assert!(low.sub(&expected).frobenius_norm() < 1e-10);
        let (zero, zero_mass) = gibbs_truncate(&h, 0);
        assert!(zero.frobenius_norm() < 1e-14);
        assert!(zero_mass.abs() < 1e-14);
        let (full, full_mass) = gibbs_truncate(&h, 3);
        assert!(full.sub(&h).frobenius_norm() < 1e-10);
        assert!((full_mass - h.frobenius_norm().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn random_density_rank_and_entropy() {
        let mut r = rng(43);
        let pure = random_density(5, 1, &mut r);
        assert!(entropy_penalty(&pure).abs() < 1e-9);
        let full = random_density(5, 5, &mut r);
        let h = entropy_penalty(&full);
        assert!(h > -(5f64).ln() && h < 0.0);
        let eigs = full.eigenvalues();
        assert!(eigs.iter().all(|&l| l > 1e-12));
        let low = random_density(5, 2, &mut r);
        let eigs = low.eigenvalues();
        assert_eq!(eigs.iter().filter(|&&l| l > 1e-10).count(), 2);
    }

    #[test]
    fn random_density_is_deterministic_under_fixed_seed() {
        let a = random_density(4, 2, &mut rng(99));
        let b = random_density(4, 2, &mut rng(99));
        assert_eq!(a.matrix().data(), b.matrix().data());
    }

    #[test]
    fn projector_invariants() {
        let mut r = rng(47);
        let p = SubspaceProjector::random(6, 3, &mut r);
        let pp = p.matrix().conjugate_with(&HermitianMatrix::identity(6));
        assert!(pp.sub(p.matrix()).frobenius_norm() < 1e-10); // P I P = P^2 = P
        assert!((p.matrix().trace() - 3.0).abs() < 1e-8);
        assert_eq!(p.complement().rank(), 3);
    }
}
