//! Design distributions for the random observable `X`: basis sampling
//! (matrix-completion and Pauli) and subgaussian isotropic ensembles,
//! together with the `L2(Pi)` geometry they induce.
//!
//! # Coordinate convention
//!
//! Hermitian matrices are identified with `R^{m^2}` through the
//! matrix-completion basis, enumerated in a fixed documented order:
//! first the `m` diagonal elements `e_i e_i*` for `i = 0..m`, then the
//! symmetric pairs `(e_i e_j* + e_j e_i*)/sqrt(2)` for `i < j` in
//! lexicographic `(i, j)` order, then the antisymmetric elements
//! `i (e_i e_j* - e_j e_i*)/sqrt(2)` in the same pair order. Coordinate
//! vectors and Gram matrices are therefore reproducible byte-for-byte.

use crate::hermitian::{hs_inner, HermitianMatrix};
use crate::states::SubspaceProjector;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("Gram operator is singular; the alignment coefficient is not finite")]
    SingularGram,
    #[error("unknown design kind `{0}`")]
    UnknownKind(String),
}

/// The supported laws of the random observable. The string forms are stable
/// and used in config files and CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Uniform sampling from the matrix-completion basis ("mc-uniform").
    MatrixCompletionUniform,
    /// Entry sampling from the non-orthogonal Hermitian entry basis with
    /// probabilities `1/m^2` (diagonal) and `2/m^2` (off-diagonal)
    /// ("mc-entry").
    MatrixCompletionEntry,
    /// Uniform sampling from the k-qubit Pauli basis ("pauli").
    PauliUniform,
    /// Real symmetric Gaussian matrices, `N(0,1)` diagonal and `N(0,1/2)`
    /// off-diagonal entries ("gauss").
    GaussianIsotropic,
    /// Real symmetric Rademacher matrices, `+/-1` diagonal and
    /// `+/-1/sqrt(2)` off-diagonal entries ("rademacher").
    RademacherIsotropic,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::MatrixCompletionUniform => "mc-uniform",
            DesignKind::MatrixCompletionEntry => "mc-entry",
            DesignKind::PauliUniform => "pauli",
            DesignKind::GaussianIsotropic => "gauss",
            DesignKind::RademacherIsotropic => "rademacher",
        }
    }

    pub fn is_basis_sampling(&self) -> bool {
        matches!(
            self,
            DesignKind::MatrixCompletionUniform
                | DesignKind::MatrixCompletionEntry
                | DesignKind::PauliUniform
        )
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(
            self,
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic
        )
    }
}

impl std::fmt::Display for DesignKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DesignKind {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mc-uniform" => Ok(DesignKind::MatrixCompletionUniform),
            "mc-entry" => Ok(DesignKind::MatrixCompletionEntry),
            "pauli" => Ok(DesignKind::PauliUniform),
            "gauss" => Ok(DesignKind::GaussianIsotropic),
            "rademacher" => Ok(DesignKind::RademacherIsotropic),
            other => Err(DesignError::UnknownKind(other.to_string())),
        }
    }
}

/// The matrix-completion basis of `M_m(C)`: `m` diagonal projectors,
/// `m(m-1)/2` symmetric and `m(m-1)/2` antisymmetric off-diagonal elements,
/// HS-orthonormal, in the documented enumeration order.
pub fn basis_matrix_completion(m: usize) -> Vec<HermitianMatrix> {
    assert!(m >= 1);
    let inv_sqrt2 = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    let i_inv_sqrt2 = Complex64::new(0.0, 1.0 / 2f64.sqrt());
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let mut d = DMatrix::<Complex64>::zeros(m, m);
        d[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(HermitianMatrix::symmetrize(d));
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut d = DMatrix::<Complex64>::zeros(m, m);
            d[(i, j)] = inv_sqrt2;
            d[(j, i)] = inv_sqrt2;
            out.push(HermitianMatrix::symmetrize(d));
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut d = DMatrix::<Complex64>::zeros(m, m);
            d[(i, j)] = i_inv_sqrt2;
            d[(j, i)] = -i_inv_sqrt2;
            out.push(HermitianMatrix::symmetrize(d));
        }
    }
    out
}

/// The `k`-qubit Pauli basis: all tensor products of the normalized Pauli
/// matrices `W_i = sigma_i / sqrt(2)`, enumerated with the first factor as
/// the most significant base-4 digit (`sigma_1, sigma_2, sigma_3, sigma_4`
/// in that order, `sigma_4 = I`); the identity element is last.
pub fn basis_pauli(k: usize) -> Vec<HermitianMatrix> {
    assert!(k >= 1);
    let s = 1.0 / 2f64.sqrt();
    let zero = Complex64::new(0.0, 0.0);
    let w: [HermitianMatrix; 4] = [
        // sigma_1 / sqrt(2)
        HermitianMatrix::try_new(DMatrix::from_row_slice(
            2,
            2,
            &[zero, Complex64::new(s, 0.0), Complex64::new(s, 0.0), zero],
        ))
        .unwrap(),
        // sigma_2 / sqrt(2)
        HermitianMatrix::try_new(DMatrix::from_row_slice(
            2,
            2,
            &[zero, Complex64::new(0.0, -s), Complex64::new(0.0, s), zero],
        ))
        .unwrap(),
        // sigma_3 / sqrt(2)
        HermitianMatrix::try_new(DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(s, 0.0), zero, zero, Complex64::new(-s, 0.0)],
        ))
        .unwrap(),
        // sigma_4 / sqrt(2)
        HermitianMatrix::try_new(DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(s, 0.0), zero, zero, Complex64::new(s, 0.0)],
        ))
        .unwrap(),
    ];
    let total = 4usize.pow(k as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut digits = Vec::with_capacity(k);
        let mut rem = idx;
        for _ in 0..k {
            digits.push(rem % 4);
            rem /= 4;
        }
        digits.reverse();
        let mut prod = w[digits[0]].clone();
        for &d in &digits[1..] {
            prod = prod.tensor_product(&w[d]);
        }
        out.push(prod);
    }
    out
}

/// The Hermitian entry basis of Example-1's second display: diagonal
/// projectors and the combined elements
/// `(e_i e_j* + e_j e_i*)/2 + i (e_i e_j* - e_j e_i*)/2` for `i < j`,
/// represented exactly as written. Returns the elements and their sampling
/// probabilities (`1/m^2` diagonal, `2/m^2` off-diagonal).
pub fn basis_matrix_completion_entry(m: usize) -> (Vec<HermitianMatrix>, Vec<f64>) {
    assert!(m >= 1);
    let mm = (m * m) as f64;
    let mut elems = Vec::new();
    let mut probs = Vec::new();
    for i in 0..m {
        let mut d = DMatrix::<Complex64>::zeros(m, m);
        d[(i, i)] = Complex64::new(1.0, 0.0);
        elems.push(HermitianMatrix::symmetrize(d));
        probs.push(1.0 / mm);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut d = DMatrix::<Complex64>::zeros(m, m);
            d[(i, j)] = Complex64::new(0.5, 0.5);
            d[(j, i)] = Complex64::new(0.5, -0.5);
            elems.push(HermitianMatrix::symmetrize(d));
            probs.push(2.0 / mm);
        }
    }
    (elems, probs)
}

/// Coordinates of a Hermitian matrix in the matrix-completion basis
/// (isometric: `|coords|^2 = ||A||_2^2`).
pub fn coords(a: &HermitianMatrix) -> DVector<f64> {
    let m = a.dim();
    let mut v = DVector::zeros(m * m);
    let sqrt2 = 2f64.sqrt();
    for i in 0..m {
        v[i] = a.get(i, i).re;
    }
    let mut idx = m;
    for i in 0..m {
        for j in (i + 1)..m {
            v[idx] = sqrt2 * a.get(i, j).re;
            idx += 1;
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            v[idx] = sqrt2 * a.get(i, j).im;
            idx += 1;
        }
    }
    v
}

/// Inverse of [`coords`].
pub fn from_coords(m: usize, v: &DVector<f64>) -> HermitianMatrix {
    assert_eq!(v.len(), m * m);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    let mut data = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        data[(i, i)] = Complex64::new(v[i], 0.0);
    }
    let pairs = m * (m - 1) / 2;
    let mut idx = m;
    for i in 0..m {
        for j in (i + 1)..m {
            let re = v[idx] * inv_sqrt2;
            let im = v[idx + pairs] * inv_sqrt2;
            data[(i, j)] = Complex64::new(re, im);
            data[(j, i)] = Complex64::new(re, -im);
            idx += 1;
        }
    }
    HermitianMatrix::symmetrize(data)
}

/// Identifier of a sampled design matrix for dataset serialization: the
/// basis index for basis-sampling kinds, a content hash for dense draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignDraw {
    BasisIndex(usize),
    Hash(u64),
}

/// FNV-1a over the bit patterns of the entries in column-major order.
pub fn matrix_hash(a: &HermitianMatrix) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for z in a.data().iter() {
        for bits in [z.re.to_bits(), z.im.to_bits()] {
            for byte in bits.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
    }
    h
}

/// A fully specified law of the random observable `X`.
///
/// Immutable after construction and shareable across threads; sampling
/// requires a caller-owned generator.
#[derive(Debug, Clone)]
pub struct DesignDistribution {
    kind: DesignKind,
    dim: usize,
    qubits: Option<usize>,
    basis: Vec<HermitianMatrix>,
    probs: Vec<f64>,
}

impl DesignDistribution {
    pub fn matrix_completion_uniform(m: usize) -> Self {
        let basis = basis_matrix_completion(m);
        let p = 1.0 / (m * m) as f64;
        let probs = vec![p; basis.len()];
        Self {
            kind: DesignKind::MatrixCompletionUniform,
            dim: m,
            qubits: None,
            basis,
            probs,
        }
    }

    pub fn matrix_completion_entry(m: usize) -> Self {
        let (basis, probs) = basis_matrix_completion_entry(m);
        Self {
            kind: DesignKind::MatrixCompletionEntry,
            dim: m,
            qubits: None,
            basis,
            probs,
        }
    }

    pub fn pauli(k: usize) -> Self {
        let basis = basis_pauli(k);
        let m = 1usize << k;
        let p = 1.0 / (m * m) as f64;
        let probs = vec![p; basis.len()];
        Self {
            kind: DesignKind::PauliUniform,
            dim: m,
            qubits: Some(k),
            basis,
            probs,
        }
    }

    pub fn gaussian(m: usize) -> Self {
        Self {
            kind: DesignKind::GaussianIsotropic,
            dim: m,
            qubits: None,
            basis: Vec::new(),
            probs: Vec::new(),
        }
    }

    pub fn rademacher(m: usize) -> Self {
        Self {
            kind: DesignKind::RademacherIsotropic,
            dim: m,
            qubits: None,
            basis: Vec::new(),
            probs: Vec::new(),
        }
    }

    /// Builds a distribution from its stable kind string; `size` is the
    /// matrix dimension `m`, except for `pauli` where it is the qubit
    /// count `k`.
    pub fn from_kind(kind: DesignKind, size: usize) -> Self {
        match kind {
            DesignKind::MatrixCompletionUniform => Self::matrix_completion_uniform(size),
            DesignKind::MatrixCompletionEntry => Self::matrix_completion_entry(size),
            DesignKind::PauliUniform => Self::pauli(size),
            DesignKind::GaussianIsotropic => Self::gaussian(size),
            DesignKind::RademacherIsotropic => Self::rademacher(size),
        }
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn qubits(&self) -> Option<usize> {
        self.qubits
    }

    /// The stored basis elements (empty for dense isotropic kinds).
    pub fn basis(&self) -> &[HermitianMatrix] {
        &self.basis
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Draws one observable.
    pub fn sample(&self, rng: &mut impl Rng) -> HermitianMatrix {
        self.sample_indexed(rng).1
    }

    /// Draws one observable along with its serialization identifier.
    pub fn sample_indexed(&self, rng: &mut impl Rng) -> (DesignDraw, HermitianMatrix) {
        match self.kind {
            DesignKind::MatrixCompletionUniform | DesignKind::PauliUniform => {
                let idx = rng.random_range(0..self.basis.len());
                (DesignDraw::BasisIndex(idx), self.basis[idx].clone())
            }
            DesignKind::MatrixCompletionEntry => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = self.basis.len() - 1;
                for (l, &p) in self.probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        idx = l;
                        break;
                    }
                }
                (DesignDraw::BasisIndex(idx), self.basis[idx].clone())
            }
            DesignKind::GaussianIsotropic => {
                let x = HermitianMatrix::from_upper_fn(self.dim, |i, j| {
                    let g: f64 = StandardNormal.sample(rng);
                    if i == j {
                        Complex64::new(g, 0.0)
                    } else {
                        Complex64::new(g / 2f64.sqrt(), 0.0)
                    }
                });
                (DesignDraw::Hash(matrix_hash(&x)), x)
            }
            DesignKind::RademacherIsotropic => {
                let x = HermitianMatrix::from_upper_fn(self.dim, |i, j| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    if i == j {
                        Complex64::new(sign, 0.0)
                    } else {
                        Complex64::new(sign / 2f64.sqrt(), 0.0)
                    }
                });
                (DesignDraw::Hash(matrix_hash(&x)), x)
            }
        }
    }

    /// Recovers a basis element from its serialized index.
    pub fn basis_element(&self, idx: usize) -> Option<&HermitianMatrix> {
        self.basis.get(idx)
    }

    /// The `L2(Pi)` norm `(E <A,X>^2)^{1/2}`.
    ///
    /// Exact analytic values: `||A||_2 / m` for the orthonormal
    /// basis-sampling kinds, `||A||_2` for the isotropic kinds (their ideal
    /// geometry; the real-valued ensembles realize it on real symmetric
    /// matrices), and the exact finite sum for entry sampling.
    pub fn l2_pi_norm(&self, a: &HermitianMatrix) -> f64 {
        match self.kind {
            DesignKind::MatrixCompletionUniform | DesignKind::PauliUniform => {
                a.frobenius_norm() / self.dim as f64
            }
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => a.frobenius_norm(),
            DesignKind::MatrixCompletionEntry => self
                .basis
                .iter()
                .zip(self.probs.iter())
                .map(|(x, &p)| {
                    let ip = hs_inner(a, x);
                    p * ip * ip
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// The second-moment operator `T(A) = E <A,X> X`, so that
    /// `<A, T(A)> = ||A||^2_{L2(Pi)}`. Used by the population-risk solvers.
    pub fn second_moment_apply(&self, a: &HermitianMatrix) -> HermitianMatrix {
        match self.kind {
            DesignKind::MatrixCompletionUniform | DesignKind::PauliUniform => {
                a.scale(1.0 / (self.dim * self.dim) as f64)
            }
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => a.clone(),
            DesignKind::MatrixCompletionEntry => {
                let mut acc = HermitianMatrix::zeros(self.dim);
                for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
                    acc = acc.add(&x.scale(p * hs_inner(a, x)));
                }
                acc
            }
        }
    }

    /// The Gram matrix `(<E_j, E_k>_{L2(Pi)})_{j,k}` of an HS-orthonormal
    /// Hermitian basis under this design.
    pub fn gram_operator(&self, basis: &[HermitianMatrix]) -> GramOperator {
        let n = basis.len();
        let matrix = match self.kind {
            DesignKind::MatrixCompletionUniform | DesignKind::PauliUniform => {
                DMatrix::<f64>::identity(n, n) / (self.dim * self.dim) as f64
            }
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => {
                DMatrix::<f64>::identity(n, n)
            }
            DesignKind::MatrixCompletionEntry => {
                let mut g = DMatrix::<f64>::zeros(n, n);
                for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
                    let ips: Vec<f64> = basis.iter().map(|e| hs_inner(e, x)).collect();
                    for j in 0..n {
                        for k in j..n {
                            g[(j, k)] += p * ips[j] * ips[k];
                        }
                    }
                }
                for j in 0..n {
                    for k in 0..j {
                        g[(j, k)] = g[(k, j)];
                    }
                }
                g
            }
        };
        GramOperator {
            basis: basis.to_vec(),
            matrix,
        }
    }

    /// The Gram operator in the canonical matrix-completion coordinates.
    pub fn gram_canonical(&self) -> GramOperator {
        self.gram_operator(&basis_matrix_completion(self.dim))
    }

    /// The alignment coefficient
    /// `a(W) = sup { <W,U> : U Hermitian, tr U = 0, ||U||_{L2(Pi)} = 1 }`,
    /// computed by constrained quadratic maximization in basis coordinates:
    /// `a(W)^2 = w' K^{-1} w - (w' K^{-1} t)^2 / (t' K^{-1} t)` with `w, t`
    /// the coordinates of `W` and the identity. Satisfies
    /// `a(W + cI) = a(W)` and `a_{cX}(W) = a_X(W) / |c|`.
    pub fn alignment_coefficient(&self, w: &HermitianMatrix) -> Result<f64, DesignError> {
        let m = self.dim;
        assert_eq!(w.dim(), m, "dimension mismatch");
        match self.kind {
            // K = c I: a(W)^2 = ||W - (tr W / m) I||_2^2 / c.
            DesignKind::MatrixCompletionUniform | DesignKind::PauliUniform => {
                Ok(self.dim as f64 * traceless_hs_norm(w))
            }
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => {
                Ok(traceless_hs_norm(w))
            }
            DesignKind::MatrixCompletionEntry => {
                let gram = self.gram_canonical();
                let inv = gram.inverse().ok_or(DesignError::SingularGram)?;
                let wc = coords(w);
                let tc = coords(&HermitianMatrix::identity(m));
                let inv_w = &inv * &wc;
                let inv_t = &inv * &tc;
                let a_sq = wc.dot(&inv_w) - wc.dot(&inv_t).powi(2) / tc.dot(&inv_t);
                Ok(a_sq.max(0.0).sqrt())
            }
        }
    }

    /// `Lambda(L) = sup { ||P_L A P_L||_2 : ||A||_{L2(Pi)} <= 1 }`.
    ///
    /// Analytic for the norm-equivalent kinds (`m` for uniform basis
    /// sampling, `1` for isotropic); otherwise computed by power iteration
    /// in the Gram metric. May be infinite when the design's quadratic form
    /// is degenerate in directions visible to the compression.
    pub fn lambda_coefficient(&self, p: &SubspaceProjector) -> f64 {
        if p.rank() == 0 {
            return 0.0;
        }
        match self.kind {
            DesignKind::MatrixCompletionUniform | DesignKind::PauliUniform => self.dim as f64,
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => 1.0,
            DesignKind::MatrixCompletionEntry => self.lambda_coefficient_power(p),
        }
    }

    /// The power-iteration route for `Lambda(L)`, usable on any kind.
    pub fn lambda_coefficient_power(&self, p: &SubspaceProjector) -> f64 {
        let m = self.dim;
        let compression = linear_map_matrix(m, |a| p.compress(a));
        self.constrained_sup(&compression)
    }

    /// `beta(L) = sup { ||A - P_{L^perp} A P_{L^perp}||_{L2(Pi)} :
    /// ||A||_{L2(Pi)} <= 1 }`; equals 1 whenever the `L2(Pi)` norm is a
    /// multiple of the HS norm.
    pub fn beta_coefficient(&self, p: &SubspaceProjector) -> f64 {
        if p.rank() == 0 {
            return 0.0;
        }
        match self.kind {
            DesignKind::MatrixCompletionUniform
            | DesignKind::PauliUniform
            | DesignKind::GaussianIsotropic
            | DesignKind::RademacherIsotropic => 1.0,
            DesignKind::MatrixCompletionEntry => self.beta_coefficient_power(p),
        }
    }

    /// The power-iteration route for `beta(L)`, usable on any kind.
    pub fn beta_coefficient_power(&self, p: &SubspaceProjector) -> f64 {
        let m = self.dim;
        let p_perp = p.complement();
        let cal_p = linear_map_matrix(m, |a| a.sub(&p_perp.compress(a)));
        let gram = self.gram_canonical();
        let (q, lam) = gram.spectral();
        let sqrt_k = &q * DMatrix::from_diagonal(&lam.map(|l| l.max(0.0).sqrt())) * q.transpose();
        let numerator = &sqrt_k * &cal_p;
        self.constrained_sup(&numerator)
    }

    /// Supremum of `|C a|` over `a' K a <= 1`, by power iteration on the
    /// reduced PSD operator. Returns infinity when `C` is nonzero on the
    /// kernel of `K`.
    fn constrained_sup(&self, c: &DMatrix<f64>) -> f64 {
        let gram = self.gram_canonical();
        let (q, lam) = gram.spectral();
        let lmax = lam.iter().fold(0.0f64, |a, &b| a.max(b));
        let tol = lmax * 1e-12;
        let n = lam.len();
        let mut range_cols = Vec::new();
        for i in 0..n {
            if lam[i] <= tol {
                // Kernel direction: the L2(Pi) seminorm vanishes here.
                let dir = q.column(i).into_owned();
                if (c * &dir).norm() > 1e-8 {
                    return f64::INFINITY;
                }
            } else {
                range_cols.push(i);
            }
        }
        let r = range_cols.len();
        let mut basis_scaled = DMatrix::<f64>::zeros(n, r);
        for (new_col, &i) in range_cols.iter().enumerate() {
            let scaled = q.column(i) / lam[i].sqrt();
            basis_scaled.set_column(new_col, &scaled);
        }
        let m1 = c * &basis_scaled;
        let gram_reduced = m1.transpose() * &m1;
        power_iteration_top(&gram_reduced).sqrt()
    }

    /// `E X` as an exact sum over the support; the dense ensembles are
    /// centered by construction.
    pub fn mean_matrix(&self) -> HermitianMatrix {
        if self.kind.is_basis_sampling() {
            let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
            for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
                acc += x.data().scale(p);
            }
            HermitianMatrix::symmetrize(acc)
        } else {
            HermitianMatrix::zeros(self.dim)
        }
    }

    /// Exact `sigma_X = ||E (X - EX)^2||^{1/2}` for basis-sampling kinds.
    pub fn sigma_x_exact(&self) -> Option<f64> {
        if !self.kind.is_basis_sampling() {
            return None;
        }
        let mut ex = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        let mut ex2 = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
            ex += x.data().scale(p);
            ex2 += (x.data() * x.data()).scale(p);
        }
        let centered = HermitianMatrix::symmetrize(ex2 - &ex * &ex);
        Some(centered.op_norm().max(0.0).sqrt())
    }

    /// `max_k E <X e_k, e_k>^2`: exact finite sum for basis-sampling kinds,
    /// `1` for the isotropic ensembles (unit-variance diagonal entries).
    pub fn diag_second_moment_max(&self) -> f64 {
        match self.kind {
            DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => 1.0,
            _ => {
                let m = self.dim;
                (0..m)
                    .map(|k| {
                        self.basis
                            .iter()
                            .zip(self.probs.iter())
                            .map(|(x, &p)| {
                                let d = x.get(k, k).re;
                                p * d * d
                            })
                            .sum::<f64>()
                    })
                    .fold(0.0f64, f64::max)
            }
        }
    }

    /// Structural constants of the design: `sigma_X`, `sigma_{X (x) X}`,
    /// `sigma~_X`, the operator-norm bound `U`, `E ||X||^2`, and `||E X||`.
    ///
    /// Exact finite sums for basis-sampling kinds; Monte-Carlo estimates
    /// (with batch standard errors) for the dense ensembles.
    pub fn design_constants(&self, draws: usize, rng: &mut impl Rng) -> DesignConstants {
        if self.kind.is_basis_sampling() {
            self.design_constants_exact(draws, rng)
        } else {
            self.design_constants_mc(draws, rng)
        }
    }

    fn design_constants_exact(&self, draws: usize, rng: &mut impl Rng) -> DesignConstants {
        let m = self.dim;
        let mut ex = DMatrix::<Complex64>::zeros(m, m);
        let mut ex2 = DMatrix::<Complex64>::zeros(m, m);
        let mut e_norm_sq = 0.0;
        let mut u_bound: f64 = 0.0;
        for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
            let d = x.data();
            ex += d.scale(p);
            ex2 += (d * d).scale(p);
            let op = x.op_norm();
            e_norm_sq += p * op * op;
            u_bound = u_bound.max(op);
        }
        let ex_h = HermitianMatrix::symmetrize(ex.clone());
        let centered2 = HermitianMatrix::symmetrize(ex2 - &ex * &ex);
        let sigma_x = centered2.op_norm().max(0.0).sqrt();

        // Tensor-moment constant via the same exact sums one level up.
        let mm = m * m;
        let mut et = DMatrix::<Complex64>::zeros(mm, mm);
        let mut et2 = DMatrix::<Complex64>::zeros(mm, mm);
        for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
            let t = x.data().kronecker(x.data());
            et += t.scale(p);
            et2 += (&t * &t).scale(p);
        }
        let centered_t2 = HermitianMatrix::symmetrize(et2 - &et * &et);
        let sigma_xx = centered_t2.op_norm().max(0.0).sqrt();

        let sigma_tilde = self.sigma_tilde_exact();
        let psi2_opnorm = self.psi2_opnorm_mc(draws.max(1000), rng);

        DesignConstants {
            sigma_x,
            sigma_x_se: 0.0,
            sigma_xx,
            sigma_xx_se: 0.0,
            sigma_tilde,
            u_bound,
            e_norm_sq,
            e_norm_sq_se: 0.0,
            ex_norm: ex_h.op_norm(),
            psi2_opnorm,
            exact: true,
        }
    }

    fn design_constants_mc(&self, draws: usize, rng: &mut impl Rng) -> DesignConstants {
        let m = self.dim;
        let batches = 10usize;
        let per_batch = (draws / batches).max(1);
        let mut sigma_x_batch = Vec::with_capacity(batches);
        let mut sigma_xx_batch = Vec::with_capacity(batches);
        let mut e_norm_batch = Vec::with_capacity(batches);
        let mut u_seen: f64 = 0.0;
        let mut op_norms = Vec::with_capacity(batches * per_batch);
        let mm = m * m;
        for _ in 0..batches {
            let mut ex = DMatrix::<Complex64>::zeros(m, m);
            let mut ex2 = DMatrix::<Complex64>::zeros(m, m);
            let mut et = DMatrix::<Complex64>::zeros(mm, mm);
            let mut et2 = DMatrix::<Complex64>::zeros(mm, mm);
            let mut norm_sum = 0.0;
            for _ in 0..per_batch {
                let x = self.sample(rng);
                let d = x.data();
                ex += d;
                ex2 += d * d;
                let t = d.kronecker(d);
                et2 += &t * &t;
                et += t;
                let op = x.op_norm();
                op_norms.push(op);
                norm_sum += op * op;
                u_seen = u_seen.max(op);
            }
            let inv = 1.0 / per_batch as f64;
            let exm = ex.scale(inv);
            let c2 = HermitianMatrix::symmetrize(ex2.scale(inv) - &exm * &exm);
            sigma_x_batch.push(c2.op_norm().max(0.0).sqrt());
            let etm = et.scale(inv);
            let ct2 = HermitianMatrix::symmetrize(et2.scale(inv) - &etm * &etm);
            sigma_xx_batch.push(ct2.op_norm().max(0.0).sqrt());
            e_norm_batch.push(norm_sum * inv);
        }
        let (sigma_x, sigma_x_se) = mean_se(&sigma_x_batch);
        let (sigma_xx, sigma_xx_se) = mean_se(&sigma_xx_batch);
        let (e_norm_sq, e_norm_sq_se) = mean_se(&e_norm_batch);
        let u_bound = match self.kind {
            DesignKind::GaussianIsotropic => f64::INFINITY,
            _ => u_seen,
        };
        let sigma_tilde = self.sigma_tilde_mc(draws.min(4000), rng);
        let psi2_opnorm = psi2_from_samples(&op_norms);

        DesignConstants {
            sigma_x,
            sigma_x_se,
            sigma_xx,
            sigma_xx_se,
            sigma_tilde,
            u_bound,
            e_norm_sq,
            e_norm_sq_se,
            ex_norm: 0.0,
            psi2_opnorm,
            exact: false,
        }
    }

    /// `sigma~_X^2 = sup_{|u|,|v|<=1} E |<X u, v>|^2` by alternating ascent
    /// over `u` and `v` on the exact second-moment operator.
    fn sigma_tilde_exact(&self) -> f64 {
        let m = self.dim;
        let moment = |u: &DVector<Complex64>| -> DMatrix<Complex64> {
            let mut t = DMatrix::<Complex64>::zeros(m, m);
            for (x, &p) in self.basis.iter().zip(self.probs.iter()) {
                let xu = x.data() * u;
                t += (&xu * xu.adjoint()).scale(p);
            }
            t
        };
        alternating_ascent(m, moment)
    }

    fn sigma_tilde_mc(&self, draws: usize, rng: &mut impl Rng) -> f64 {
        let m = self.dim;
        let sample: Vec<HermitianMatrix> = (0..draws).map(|_| self.sample(rng)).collect();
        let inv = 1.0 / draws as f64;
        let moment = |u: &DVector<Complex64>| -> DMatrix<Complex64> {
            let mut t = DMatrix::<Complex64>::zeros(m, m);
            for x in &sample {
                let xu = x.data() * u;
                t += (&xu * xu.adjoint()).scale(inv);
            }
            t
        };
        alternating_ascent(m, moment)
    }

    fn psi2_opnorm_mc(&self, draws: usize, rng: &mut impl Rng) -> f64 {
        let norms: Vec<f64> = (0..draws).map(|_| self.sample(rng).op_norm()).collect();
        psi2_from_samples(&norms)
    }
}

fn traceless_hs_norm(w: &HermitianMatrix) -> f64 {
    let m = w.dim() as f64;
    let centered = w.sub(&HermitianMatrix::identity(w.dim()).scale(w.trace() / m));
    centered.frobenius_norm()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Empirical Orlicz psi_2 norm: the smallest `C` with
/// `mean exp(v^2/C^2) <= 2`, found by bisection.
pub fn psi2_from_samples(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let crit = |c: f64| -> f64 {
        values
            .iter()
            .map(|v| ((v / c).powi(2)).exp())
            .sum::<f64>()
            / values.len() as f64
    };
    let mut lo = max * 1e-3;
    let mut hi = max * 10.0;
    while crit(hi) > 2.0 {
        hi *= 2.0;
    }
    while crit(lo) < 2.0 && lo > max * 1e-9 {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if crit(mid) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn alternating_ascent(
    m: usize,
    moment: impl Fn(&DVector<Complex64>) -> DMatrix<Complex64>,
) -> f64 {
    let mut best = 0.0f64;
    let mut seed = SplitMix64::new(0x5eed_d151_9e37_79b9);
    for _restart in 0..4 {
        let mut u = DVector::from_fn(m, |_, _| {
            Complex64::new(seed.next_f64() - 0.5, seed.next_f64() - 0.5)
        });
        let norm = u.norm();
        u /= Complex64::new(norm, 0.0);
        let mut val = 0.0;
        for _ in 0..60 {
            // For Hermitian X the operator E (Xw)(Xw)* serves both halves of
            // the alternation: v maximizes it at fixed u and vice versa.
            let t_u = HermitianMatrix::symmetrize(moment(&u));
            let spec = t_u.eig().expect("ascent eig");
            let new_val = spec.eigenvalues[0];
            let v = spec.eigenvectors.column(0).into_owned();
            let t_v = HermitianMatrix::symmetrize(moment(&v));
            let spec_b = t_v.eig().expect("ascent eig");
            u = spec_b.eigenvectors.column(0).into_owned();
            if (new_val - val).abs() <= 1e-12 * (1.0 + new_val.abs()) {
                val = new_val;
                break;
            }
            val = new_val;
        }
        best = best.max(val);
    }
    best.max(0.0).sqrt()
}

/// The Gram matrix of an HS-orthonormal Hermitian basis in `L2(Pi)`.
#[derive(Debug, Clone)]
pub struct GramOperator {
    basis: Vec<HermitianMatrix>,
    matrix: DMatrix<f64>,
}

impl GramOperator {
    pub fn basis(&self) -> &[HermitianMatrix] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Symmetric eigendecomposition `(Q, lambda)` of the Gram matrix.
    pub fn spectral(&self) -> (DMatrix<f64>, DVector<f64>) {
        let se = self
            .matrix
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .expect("gram eig");
        (se.eigenvectors, se.eigenvalues)
    }

    /// Inverse through the spectral decomposition; `None` when singular.
    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        let (q, lam) = self.spectral();
        let lmax = lam.iter().fold(0.0f64, |a, &b| a.max(b));
        if lam.iter().any(|&l| l <= lmax * 1e-12) {
            return None;
        }
        let inv_diag = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l));
        Some(&q * inv_diag * q.transpose())
    }
}

/// Matrix (in canonical coordinates) of a linear map on Hermitian matrices.
fn linear_map_matrix(
    m: usize,
    map: impl Fn(&HermitianMatrix) -> HermitianMatrix,
) -> DMatrix<f64> {
    let basis = basis_matrix_completion(m);
    let n = m * m;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (j, e) in basis.iter().enumerate() {
        out.set_column(j, &coords(&map(e)));
    }
    out
}

/// Top eigenvalue of a small PSD matrix by power iteration: 500 iterations
/// or relative change below 1e-10, three randomized restarts taking the max.
fn power_iteration_top(mat: &DMatrix<f64>) -> f64 {
    let n = mat.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut seed = SplitMix64::new(0x9e3779b97f4a7c15);
    let mut best = 0.0f64;
    for _restart in 0..3 {
        let mut v = DVector::from_fn(n, |_, _| seed.next_f64() - 0.5);
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        v /= norm;
        let mut lam = 0.0;
        for _ in 0..500 {
            let w = mat * &v;
            let wn = w.norm();
            if wn == 0.0 {
                lam = 0.0;
                break;
            }
            let new_lam = v.dot(&w);
            v = w / wn;
            if (new_lam - lam).abs() <= 1e-10 * (1.0 + new_lam.abs()) {
                lam = new_lam;
                break;
            }
            lam = new_lam;
        }
        best = best.max(lam);
    }
    best.max(0.0)
}

/// Deterministic 64-bit mixer for reproducible internal randomized starts
/// and stream-seed derivation.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Structural constants of a design distribution. Standard errors are zero
/// for exactly computed (basis-sampling) kinds.
#[derive(Debug, Clone)]
pub struct DesignConstants {
    pub sigma_x: f64,
    pub sigma_x_se: f64,
    pub sigma_xx: f64,
    pub sigma_xx_se: f64,
    pub sigma_tilde: f64,
    /// Uniform bound on `||X||`; infinite for the Gaussian ensemble, the
    /// observed maximum for Rademacher draws.
    pub u_bound: f64,
    pub e_norm_sq: f64,
    pub e_norm_sq_se: f64,
    /// `||E X||`; zero for the centered dense ensembles.
    pub ex_norm: f64,
    /// Monte-Carlo psi_2 norm of `||X||`.
    pub psi2_opnorm: f64,
    pub exact: bool,
}
