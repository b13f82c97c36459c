//! Dense complex Hermitian matrix arithmetic, spectral decomposition,
//! matrix functions, and Schatten norms.
//!
//! All operations are pure functions on immutable inputs and are safe to
//! call from any number of threads. Dense storage only; the target envelope
//! is dimension <= 64.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Eigenvalues below this floor are clamped before `log`-like scalar
/// functions are applied. Solver iterates approach the PSD boundary and
/// rank-deficient inputs produce exact zeros; `0 log 0 = 0` is the analytic
/// continuation.
pub const EIG_FLOOR: f64 = 1e-14;

/// Entrywise tolerance for Hermitian symmetry after construction.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Tolerance below which a negative eigenvalue is treated as numerical
/// noise rather than a domain violation.
pub const DOMAIN_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HermitianError {
    #[error("matrix entry ({row},{col}) deviates from Hermitian symmetry by {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },
    #[error("eigendecomposition did not converge for a {dim}x{dim} Hermitian matrix")]
    EigNonConvergence { dim: usize },
    #[error("{func} is undefined at eigenvalue {eigenvalue:e}")]
    Domain { func: &'static str, eigenvalue: f64 },
}

/// Scalar functions liftable to Hermitian matrices through the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFunction {
    Log,
    Exp,
    Sqrt,
    /// `x log x` with the convention `0 log 0 = 0`.
    XLogX,
}

/// A dense complex Hermitian matrix.
///
/// The wrapped storage always satisfies `A[i][j] == conj(A[j][i])` exactly:
/// every constructor re-symmetrizes via `(A + A*)/2` after validating the
/// input against [`HERMITICITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    data: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Validates Hermitian symmetry entrywise and wraps the matrix.
    pub fn try_new(data: DMatrix<Complex64>) -> Result<Self, HermitianError> {
        assert_eq!(data.nrows(), data.ncols(), "matrix must be square");
        assert!(data.nrows() >= 1, "dimension must be at least 1");
        for i in 0..data.nrows() {
            for j in i..data.ncols() {
                let dev = (data[(i, j)] - data[(j, i)].conj()).norm();
                if dev > HERMITICITY_TOL {
                    return Err(HermitianError::NotHermitian {
                        row: i,
                        col: j,
                        deviation: dev,
                    });
                }
            }
        }
        Ok(Self::symmetrize(data))
    }

    /// Wraps a matrix that is Hermitian by construction, re-symmetrizing to
    /// remove floating-point drift. Callers must guarantee the input is
    /// Hermitian up to round-off.
    pub fn symmetrize(data: DMatrix<Complex64>) -> Self {
        let adj = data.adjoint();
        Self {
            data: (data + adj).scale(0.5),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty());
        let m = diag.len();
        Self {
            data: DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// Builds a matrix from an entry function over the upper triangle; the
    /// lower triangle is filled by conjugation.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(dim >= 1);
        let mut data = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            data[(i, i)] = Complex64::new(f(i, i).re, 0.0);
            for j in (i + 1)..dim {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v.conj();
            }
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    /// Trace, real by Hermitian symmetry.
    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            data: self.data.scale(c),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self {
            data: &self.data - &other.data,
        }
    }

    /// `c1 * self + c2 * other`.
    pub fn linear_combination(&self, c1: f64, other: &Self, c2: f64) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self {
            data: self.data.scale(c1) + other.data.scale(c2),
        }
    }

    /// `X * A * X` for Hermitian `X = self`; the result is Hermitian.
    pub fn conjugate_with(&self, inner: &Self) -> Self {
        assert_eq!(self.dim(), inner.dim(), "dimension mismatch");
        Self::symmetrize(&self.data * &inner.data * &self.data)
    }

    /// Entrywise Frobenius norm, equal to the Schatten 2-norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Eigendecomposition with eigenvalues sorted in decreasing order.
    ///
    /// Deterministic for identical input bits. Degenerate eigenvalues may
    /// produce any valid orthonormal eigenbasis; downstream spectral
    /// operations are basis-insensitive.
    pub fn eig(&self) -> Result<Spectrum, HermitianError> {
        let dim = self.dim();
        let se = self
            .data
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or(HermitianError::EigNonConvergence { dim })?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[b]
                .partial_cmp(&se.eigenvalues[a])
                .expect("eigenvalue is NaN")
        });
        let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::zeros(dim, dim);
        for (col, &k) in order.iter().enumerate() {
            eigenvectors.set_column(col, &se.eigenvectors.column(k));
        }
        Ok(Spectrum {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Eigendecomposition for internal use on paths whose contract declares
    /// no eigensolver error; failure aborts with the matrix dimension.
    pub(crate) fn spectrum(&self) -> Spectrum {
        let dim = self.dim();
        self.eig()
            .unwrap_or_else(|_| panic!("eigendecomposition failed for dim {dim}"))
    }

    /// Applies a scalar function to the spectrum: `V diag(f(lambda)) V*`.
    pub fn matrix_func(&self, f: MatrixFunction) -> Result<Self, HermitianError> {
        let spec = self.eig()?;
        let mapped = spec
            .eigenvalues
            .iter()
            .map(|&lam| apply_scalar(f, lam))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(spec.recombine(&mapped))
    }

    /// The Schatten p-norm `(sum |lambda_k|^p)^(1/p)`; `p = f64::INFINITY`
    /// gives the operator norm. Requires `p >= 1`. Eigensolver failure is
    /// propagated as a panic naming the dimension.
    pub fn schatten_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "Schatten norms require p >= 1, got {p}");
        let eigs = &self.spectrum().eigenvalues;
        if p.is_infinite() {
            eigs.iter().fold(0.0, |acc, &l| acc.max(l.abs()))
        } else if p == 1.0 {
            eigs.iter().map(|l| l.abs()).sum()
        } else if p == 2.0 {
            eigs.iter().map(|l| l * l).sum::<f64>().sqrt()
        } else {
            eigs.iter()
                .map(|l| l.abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }

    /// Operator norm, the Schatten infinity norm.
    pub fn op_norm(&self) -> f64 {
        self.schatten_norm(f64::INFINITY)
    }

    /// Kronecker (tensor) product; Hermitian whenever both factors are.
    pub fn tensor_product(&self, other: &Self) -> Self {
        Self {
            data: self.data.kronecker(&other.data),
        }
    }
}

/// Hilbert-Schmidt inner product `tr(A B*)`, real for Hermitian inputs.
///
/// Panics on dimension mismatch.
pub fn hs_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "dimension mismatch");
    a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum()
}

fn apply_scalar(f: MatrixFunction, lam: f64) -> Result<f64, HermitianError> {
    match f {
        MatrixFunction::Exp => Ok(lam.exp()),
        MatrixFunction::Log => {
            if lam < -DOMAIN_TOL {
                Err(HermitianError::Domain {
                    func: "log",
                    eigenvalue: lam,
                })
            } else {
                Ok(lam.max(EIG_FLOOR).ln())
            }
        }
        MatrixFunction::Sqrt => {
            if lam < -DOMAIN_TOL {
                Err(HermitianError::Domain {
                    func: "sqrt",
                    eigenvalue: lam,
                })
            } else {
                Ok(lam.max(0.0).sqrt())
            }
        }
        MatrixFunction::XLogX => {
            if lam < -DOMAIN_TOL {
                Err(HermitianError::Domain {
                    func: "xlogx",
                    eigenvalue: lam,
                })
            } else if lam <= EIG_FLOOR {
                Ok(0.0)
            } else {
                Ok(lam * lam.ln())
            }
        }
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues in decreasing
/// order, eigenvectors as the columns of a unitary matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(values) V*` for an arbitrary replacement of the eigenvalues.
    pub fn recombine(&self, values: &[f64]) -> HermitianMatrix {
        assert_eq!(values.len(), self.dim());
        let dim = self.dim();
        let diag = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        HermitianMatrix::symmetrize(&self.eigenvectors * diag * self.eigenvectors.adjoint())
    }

    /// Reconstructs the original matrix.
    pub fn reconstruct(&self) -> HermitianMatrix {
        self.recombine(&self.eigenvalues)
    }

    /// Eigenvalues in increasing order (the convention used by Gibbs-state
    /// truncations; `eigenvalues` itself is stored decreasing).
    pub fn ascending_eigenvalues(&self) -> Vec<f64> {
        let mut asc = self.eigenvalues.clone();
        asc.reverse();
        asc
    }
}

/// A random Hermitian matrix with independent standard complex Gaussian
/// off-diagonal entries and real Gaussian diagonal; a test-fixture and
/// random-start generator.
pub fn random_hermitian(dim: usize, rng: &mut impl rand::Rng) -> HermitianMatrix {
    use rand_distr::{Distribution, StandardNormal};
    HermitianMatrix::from_upper_fn(dim, |i, j| {
        if i == j {
            Complex64::new(StandardNormal.sample(rng), 0.0)
        } else {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re / 2f64.sqrt(), im / 2f64.sqrt())
        }
    })
}
