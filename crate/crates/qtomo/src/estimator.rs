//! Convex solvers for the entropy-penalized least-squares problems over the
//! set of density matrices, and the nuclear-norm baseline over all Hermitian
//! matrices.
//!
//! The penalized problems are solved by entropy mirror descent: the iterate
//! `S_{t+1} = exp(M_t)/tr(exp(M_t))` with `M_t = log S_t - eta_t G_t` stays
//! strictly inside the feasible set, matching the full-rank character of the
//! penalized solution. The unpenalized case (`epsilon = 0`) falls back to
//! projected gradient with exact eigenvalue projection onto the simplex,
//! certified by the Frank-Wolfe gap.

use crate::designs::DesignDistribution;
use crate::hermitian::{hs_inner, HermitianMatrix, MatrixFunction};
use crate::noise::Dataset;
use crate::states::DensityMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

/// Consecutive iterations with relative objective decrease below `tol_obj`
/// tolerated before the solver gives up on improving the certificate.
/// Near-boundary iterates improve their certificate much more slowly than
/// the objective, so the limit is generous.
const STALL_LIMIT: usize = 300;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("objective evaluated to NaN at iteration {0}")]
    ObjectiveNaN(usize),
    #[error("eigendecomposition failed inside the solver at iteration {0}")]
    EigFailure(usize),
}

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Regularization strength; `0` selects the projected-gradient path.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Relative objective-decrease stop.
    pub tol_obj: f64,
    /// Stationarity-residual stop, scaled at solve time by
    /// `1 + (mean Y^2)^{1/2}`.
    pub tol_stat: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub eig_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            max_iter: 5000,
            tol_obj: 1e-10,
            tol_stat: 1e-6,
            step_init: 1.0,
            backtrack_factor: 0.5,
            eig_floor: 1e-14,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    /// Panics on invalid parameters: negative regularization, nonpositive
    /// tolerances or step, or a backtracking factor outside `(0, 1)`.
    pub fn validate(&self) {
        assert!(self.epsilon >= 0.0, "epsilon must be nonnegative");
        assert!(self.tol_obj > 0.0 && self.tol_stat > 0.0, "tolerances must be positive");
        assert!(self.step_init > 0.0, "step_init must be positive");
        assert!(
            self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0,
            "backtrack_factor must lie in (0, 1)"
        );
        assert!(self.eig_floor > 0.0, "eig_floor must be positive");
    }
}

/// Output of a penalized solve.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub estimate: DensityMatrix,
    /// Objective value per accepted iterate; nonincreasing by construction
    /// of the backtracking line search.
    pub objective_trace: Vec<f64>,
    /// The smaller of the two first-order certificates at the estimate:
    /// the interior residual `||G - (tr G/m) I||` and the Frank-Wolfe gap
    /// `<G, S> - lambda_min(G)`. Either being small certifies optimality
    /// over the state set; the gap also covers numerically rank-deficient
    /// solutions.
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Output of the unconstrained nuclear-norm baseline.
#[derive(Debug, Clone)]
pub struct NuclearResult {
    pub estimate: HermitianMatrix,
    pub objective_trace: Vec<f64>,
    /// Scaled step displacement `||W_{t+1} - W_t||_2 / eta`.
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The quadratic part of an objective, reduced to sufficient statistics:
/// `q(S) - 2 <S, B> + c0` with `q` either a weighted sum of squared inner
/// products or a multiple of the squared HS norm.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    dim: usize,
    b: HermitianMatrix,
    const_term: f64,
    agg: Aggregation,
    /// Scale used for the stationarity tolerance.
    scale: f64,
    /// `2 max_j ||X_j||_2^2`, the smoothness constant used by the
    /// proximal baseline (finite only for dataset-backed models).
    lipschitz: f64,
}

#[derive(Debug, Clone)]
enum Aggregation {
    /// `q(S) = sum_l w_l <S, E_l>^2`.
    Elements {
        mats: Vec<HermitianMatrix>,
        weights: Vec<f64>,
    },
    /// `q(S) = c ||S||_2^2`.
    Isometric { c: f64 },
}

impl QuadraticModel {
    /// Empirical least squares `n^{-1} sum (Y_j - <S, X_j>)^2`.
    pub fn from_dataset(data: &Dataset) -> Self {
        assert!(!data.is_empty(), "dataset must contain at least one pair");
        let m = data.dim();
        let n = data.len() as f64;
        let mut b_acc = DMatrix::<Complex64>::zeros(m, m);
        let mut mean_y_sq = 0.0;
        let mut max_fro_sq = 0.0f64;
        for (x, &y) in data.designs.iter().zip(data.responses.iter()) {
            b_acc += x.data().scale(y / n);
            mean_y_sq += y * y / n;
            max_fro_sq = max_fro_sq.max(x.frobenius_norm().powi(2));
        }
        let b = HermitianMatrix::symmetrize(b_acc);

        // Group repeated basis draws so each gradient evaluation costs one
        // pass over the distinct elements instead of the whole sample.
        // BTreeMap keeps the accumulation order deterministic.
        let all_indexed = data
            .draws
            .iter()
            .all(|d| matches!(d, crate::designs::DesignDraw::BasisIndex(_)));
        let agg = if all_indexed {
            let mut groups: BTreeMap<usize, (f64, HermitianMatrix)> = BTreeMap::new();
            for (draw, x) in data.draws.iter().zip(data.designs.iter()) {
                if let crate::designs::DesignDraw::BasisIndex(idx) = draw {
                    groups
                        .entry(*idx)
                        .and_modify(|(w, _)| *w += 1.0 / n)
                        .or_insert((1.0 / n, x.clone()));
                }
            }
            let (weights, mats): (Vec<f64>, Vec<HermitianMatrix>) =
                groups.into_values().unzip();
            Aggregation::Elements { mats, weights }
        } else {
            Aggregation::Elements {
                mats: data.designs.clone(),
                weights: vec![1.0 / n; data.len()],
            }
        };
        Self {
            dim: m,
            b,
            const_term: mean_y_sq,
            agg,
            scale: mean_y_sq.sqrt(),
            lipschitz: 2.0 * max_fro_sq,
        }
    }

    /// The known-design objective `||S||^2_{L2(Pi)} - (2/n) sum Y_j <S, X_j>`.
    pub fn known_design(dist: &DesignDistribution, data: &Dataset) -> Self {
        assert!(!data.is_empty());
        assert_eq!(dist.dim(), data.dim(), "dimension mismatch");
        let m = data.dim();
        let n = data.len() as f64;
        let mut b_acc = DMatrix::<Complex64>::zeros(m, m);
        let mut mean_y_sq = 0.0;
        for (x, &y) in data.designs.iter().zip(data.responses.iter()) {
            b_acc += x.data().scale(y / n);
            mean_y_sq += y * y / n;
        }
        let b = HermitianMatrix::symmetrize(b_acc);
        Self {
            dim: m,
            b,
            const_term: 0.0,
            agg: design_aggregation(dist),
            scale: mean_y_sq.sqrt(),
            lipschitz: f64::INFINITY,
        }
    }

    /// The population risk `||S - rho||^2_{L2(Pi)}` expanded around `rho`.
    pub fn population(dist: &DesignDistribution, rho: &DensityMatrix) -> Self {
        assert_eq!(dist.dim(), rho.dim(), "dimension mismatch");
        let b = dist.second_moment_apply(rho.matrix());
        let rho_l2_sq = hs_inner(rho.matrix(), &b);
        Self {
            dim: dist.dim(),
            b,
            const_term: rho_l2_sq,
            agg: design_aggregation(dist),
            scale: rho_l2_sq.sqrt(),
            lipschitz: f64::INFINITY,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn quad_form(&self, s: &HermitianMatrix) -> f64 {
        match &self.agg {
            Aggregation::Elements { mats, weights } => mats
                .iter()
                .zip(weights.iter())
                .map(|(x, &w)| {
                    let ip = hs_inner(s, x);
                    w * ip * ip
                })
                .sum(),
            Aggregation::Isometric { c } => c * s.frobenius_norm().powi(2),
        }
    }

    fn quad_apply(&self, s: &HermitianMatrix) -> HermitianMatrix {
        match &self.agg {
            Aggregation::Elements { mats, weights } => {
                let m = self.dim;
                let mut acc = DMatrix::<Complex64>::zeros(m, m);
                for (x, &w) in mats.iter().zip(weights.iter()) {
                    acc += x.data().scale(w * hs_inner(s, x));
                }
                HermitianMatrix::symmetrize(acc)
            }
            Aggregation::Isometric { c } => s.scale(*c),
        }
    }

    /// The quadratic objective value at `s` (without the entropy term).
    pub fn value(&self, s: &HermitianMatrix) -> f64 {
        self.quad_form(s) - 2.0 * hs_inner(s, &self.b) + self.const_term
    }

    /// Gradient of the quadratic part.
    pub fn gradient(&self, s: &HermitianMatrix) -> HermitianMatrix {
        self.quad_apply(s).sub(&self.b).scale(2.0)
    }
}

fn design_aggregation(dist: &DesignDistribution) -> Aggregation {
    use crate::designs::DesignKind::*;
    match dist.kind() {
        MatrixCompletionUniform | PauliUniform => Aggregation::Isometric {
            c: 1.0 / (dist.dim() * dist.dim()) as f64,
        },
        GaussianIsotropic | RademacherIsotropic => Aggregation::Isometric { c: 1.0 },
        MatrixCompletionEntry => Aggregation::Elements {
            mats: dist.basis().to_vec(),
            weights: dist.probabilities().to_vec(),
        },
    }
}

/// The empirical objective `n^{-1} sum (Y_j - <S,X_j>)^2 + eps tr(S log S)`.
pub fn empirical_objective(s: &DensityMatrix, data: &Dataset, epsilon: f64) -> f64 {
    let model = QuadraticModel::from_dataset(data);
    model.value(s.matrix()) + epsilon * crate::states::entropy_penalty(s)
}

/// The known-design objective
/// `||S||^2_{L2(Pi)} - (2/n) sum Y_j <S,X_j> + eps tr(S log S)`.
pub fn population_objective(
    s: &DensityMatrix,
    dist: &DesignDistribution,
    data: &Dataset,
    epsilon: f64,
) -> f64 {
    let model = QuadraticModel::known_design(dist, data);
    model.value(s.matrix()) + epsilon * crate::states::entropy_penalty(s)
}

/// Gradient of the empirical objective at a strictly positive state:
/// `(2/n) sum (<S,X_j> - Y_j) X_j + eps (log S + I)`, with the matrix
/// logarithm floored at the configured eigenvalue floor.
pub fn gradient_empirical(s: &DensityMatrix, data: &Dataset, epsilon: f64) -> HermitianMatrix {
    let model = QuadraticModel::from_dataset(data);
    let mut g = model.gradient(s.matrix());
    if epsilon != 0.0 {
        let log_s = s
            .matrix()
            .matrix_func(MatrixFunction::Log)
            .expect("state logarithm");
        g = g.add(&log_s.add(&HermitianMatrix::identity(s.dim())).scale(epsilon));
    }
    g
}

/// The interior stationarity certificate: the operator norm of the
/// traceless part of the gradient, `||G - (tr G / m) I||`. Zero exactly
/// when `G` is a multiple of the identity, the first-order condition at a
/// full-rank minimizer over the density-matrix set.
pub fn stationarity_residual(grad: &HermitianMatrix) -> f64 {
    let m = grad.dim();
    grad.sub(&HermitianMatrix::identity(m).scale(grad.trace() / m as f64))
        .op_norm()
}

/// The Frank-Wolfe gap `<G, S> - lambda_min(G)`: the boundary stationarity
/// certificate used when `epsilon = 0`. Nonnegative, and zero exactly when
/// the variational inequality `<G, S' - S> >= 0` holds over all states `S'`.
pub fn frank_wolfe_gap(s: &DensityMatrix, grad: &HermitianMatrix) -> f64 {
    let lambda_min = *grad
        .eig()
        .expect("gap eig")
        .eigenvalues
        .last()
        .expect("dim >= 1");
    hs_inner(grad, s.matrix()) - lambda_min
}

/// Both first-order certificates from one gradient spectrum: the interior
/// residual `||G - (tr G/m) I||` and the Frank-Wolfe gap
/// `<G, S> - lambda_min(G)`.
///
/// Small epsilon drives the penalized solution's tail eigenvalues below
/// the representable floor, so the interior certificate cannot vanish
/// there; the gap certificate remains valid at the boundary, and either
/// one being small certifies first-order optimality over the state set.
fn certificates(
    grad: &HermitianMatrix,
    s_mat: &HermitianMatrix,
) -> Result<(f64, f64), crate::hermitian::HermitianError> {
    let spec = grad.eig()?;
    let m = grad.dim() as f64;
    let mean = grad.trace() / m;
    let interior = spec
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max((l - mean).abs()));
    let lambda_min = *spec.eigenvalues.last().expect("dim >= 1");
    let gap = hs_inner(grad, s_mat) - lambda_min;
    Ok((interior, gap))
}

/// Solves the entropy-penalized problem. With `dist = None` this is the
/// empirical objective; with a distribution it is the known-design variant
/// using the analytic quadratic term.
pub fn solve_entropy_penalized(
    data: &Dataset,
    dist: Option<&DesignDistribution>,
    cfg: &SolverConfig,
) -> Result<EstimateResult, SolveError> {
    let model = match dist {
        None => QuadraticModel::from_dataset(data),
        Some(d) => QuadraticModel::known_design(d, data),
    };
    solve_model(&model, cfg)
}

/// Solves the noise-free population problem
/// `argmin_S ||S - rho||^2_{L2(Pi)} + eps tr(S log S)`.
pub fn solve_population(
    rho: &DensityMatrix,
    dist: &DesignDistribution,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<EstimateResult, SolveError> {
    let model = QuadraticModel::population(dist, rho);
    let cfg = SolverConfig {
        epsilon,
        ..cfg.clone()
    };
    solve_model(&model, &cfg)
}

/// Solves a quadratic-plus-entropy model over the density-matrix set.
pub fn solve_model(model: &QuadraticModel, cfg: &SolverConfig) -> Result<EstimateResult, SolveError> {
    cfg.validate();
    if cfg.epsilon == 0.0 {
        solve_projected_gradient(model, cfg)
    } else {
        solve_mirror(model, cfg)
    }
}

fn solve_mirror(model: &QuadraticModel, cfg: &SolverConfig) -> Result<EstimateResult, SolveError> {
    let m = model.dim();
    let eps = cfg.epsilon;
    let tol_stat = cfg.tol_stat * (1.0 + model.scale);
    let identity = HermitianMatrix::identity(m);

    // Iterate kept in spectral form: eigenvectors, probabilities, exact
    // floored log-probabilities (so log S never passes through a fresh
    // matrix logarithm).
    let mut vecs = DMatrix::<Complex64>::identity(m, m);
    let init_probs = vec![1.0 / m as f64; m];
    let mut mu: Vec<f64> = init_probs.iter().map(|p| p.ln()).collect();
    let mut s_mat = recombine(&vecs, &init_probs);

    let entropy = |p: &[f64], mu: &[f64]| -> f64 { p.iter().zip(mu).map(|(pi, mi)| pi * mi).sum() };
    let mut f_cur = model.value(&s_mat) + eps * entropy(&init_probs, &mu);
    if f_cur.is_nan() {
        return Err(SolveError::ObjectiveNaN(0));
    }
    let mut trace = vec![f_cur];
    let mut step = cfg.step_init;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0usize;

    for t in 0..cfg.max_iter {
        iterations = t + 1;
        let log_s = recombine(&vecs, &mu);
        let grad = model
            .gradient(&s_mat)
            .add(&log_s.add(&identity).scale(eps));
        let (interior, gap) = certificates(&grad, &s_mat).map_err(|_| SolveError::EigFailure(t))?;
        residual = interior.min(gap.max(0.0));
        if residual <= tol_stat {
            converged = true;
            iterations = t;
            break;
        }
        if stalled >= STALL_LIMIT {
            break;
        }

        let mut eta = step;
        let mut accepted = false;
        while eta > 1e-18 {
            let mirror = log_s.sub(&grad.scale(eta));
            let spec = mirror.eig().map_err(|_| SolveError::EigFailure(t))?;
            let lmax = spec.eigenvalues[0];
            let weights: Vec<f64> = spec.eigenvalues.iter().map(|&l| (l - lmax).exp()).collect();
            let z: f64 = weights.iter().sum();
            let p_new: Vec<f64> = weights.iter().map(|w| w / z).collect();
            let mu_new: Vec<f64> = p_new.iter().map(|p| p.max(cfg.eig_floor).ln()).collect();
            let s_new = spec.recombine(&p_new);
            let f_new = model.value(&s_new) + eps * entropy(&p_new, &mu_new);
            if f_new.is_nan() {
                return Err(SolveError::ObjectiveNaN(t));
            }
            if f_new <= f_cur - 1e-15 * (1.0 + f_cur.abs()) {
                let decrease = f_cur - f_new;
                vecs = spec.eigenvectors;
                mu = mu_new;
                s_mat = s_new;
                f_cur = f_new;
                trace.push(f_new);
                step = (eta * 2.0).min(1e6);
                accepted = true;
                // The relative-decrease stop is a stall detector: the
                // residual certificate above remains the convergence test.
                if decrease <= cfg.tol_obj * (1.0 + f_cur.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                break;
            }
            eta *= cfg.backtrack_factor;
        }
        if !accepted {
            // No descent direction at line-search resolution.
            converged = residual <= tol_stat;
            break;
        }
    }
    finished(s_mat, trace, residual, iterations, converged)
}

fn solve_projected_gradient(
    model: &QuadraticModel,
    cfg: &SolverConfig,
) -> Result<EstimateResult, SolveError> {
    let m = model.dim();
    let tol_stat = cfg.tol_stat * (1.0 + model.scale);
    let mut s_mat = HermitianMatrix::identity(m).scale(1.0 / m as f64);
    let mut f_cur = model.value(&s_mat);
    if f_cur.is_nan() {
        return Err(SolveError::ObjectiveNaN(0));
    }
    let mut trace = vec![f_cur];
    let mut step = cfg.step_init;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0usize;

    for t in 0..cfg.max_iter {
        iterations = t + 1;
        let grad = model.gradient(&s_mat);
        // Boundary certificate: the Frank-Wolfe gap over the extreme points.
        let lambda_min = *grad
            .eig()
            .map_err(|_| SolveError::EigFailure(t))?
            .eigenvalues
            .last()
            .expect("dim >= 1");
        residual = hs_inner(&grad, &s_mat) - lambda_min;
        if residual <= tol_stat {
            converged = true;
            iterations = t;
            break;
        }
        if stalled >= STALL_LIMIT {
            break;
        }

        let mut eta = step;
        let mut accepted = false;
        while eta > 1e-18 {
            let moved = s_mat.sub(&grad.scale(eta));
            let spec = moved.eig().map_err(|_| SolveError::EigFailure(t))?;
            let projected = project_simplex(&spec.eigenvalues);
            let s_new = spec.recombine(&projected);
            let f_new = model.value(&s_new);
            if f_new.is_nan() {
                return Err(SolveError::ObjectiveNaN(t));
            }
            if f_new <= f_cur - 1e-15 * (1.0 + f_cur.abs()) {
                let decrease = f_cur - f_new;
                s_mat = s_new;
                f_cur = f_new;
                trace.push(f_new);
                step = (eta * 2.0).min(1e6);
                accepted = true;
                if decrease <= cfg.tol_obj * (1.0 + f_cur.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                break;
            }
            eta *= cfg.backtrack_factor;
        }
        if !accepted {
            converged = residual <= tol_stat;
            break;
        }
    }
    finished(s_mat, trace, residual, iterations, converged)
}

fn finished(
    s_mat: HermitianMatrix,
    trace: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
) -> Result<EstimateResult, SolveError> {
    let estimate = DensityMatrix::new(s_mat).expect("solver iterate is a state");
    Ok(EstimateResult {
        estimate,
        objective_trace: trace,
        stationarity_residual: residual,
        iterations,
        converged,
    })
}

/// Proximal-gradient solver for the nuclear-norm baseline
/// `n^{-1} sum (Y_j - <S,X_j>)^2 + eps ||S||_1` over all Hermitian matrices
/// (not constrained to unit trace). The proximal map is eigenvalue
/// soft-thresholding; the step is `1/L` with `L = 2 max_j ||X_j||_2^2`.
pub fn solve_nuclear_baseline(
    data: &Dataset,
    epsilon_nuc: f64,
    cfg: &SolverConfig,
) -> Result<NuclearResult, SolveError> {
    cfg.validate();
    assert!(epsilon_nuc >= 0.0, "nuclear threshold must be nonnegative");
    let model = QuadraticModel::from_dataset(data);
    let m = model.dim();
    let eta = 1.0 / model.lipschitz;
    let mut w = HermitianMatrix::zeros(m);
    let mut nuclear = 0.0;
    let mut f_cur = model.value(&w) + epsilon_nuc * nuclear;
    if f_cur.is_nan() {
        return Err(SolveError::ObjectiveNaN(0));
    }
    let mut trace = vec![f_cur];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for t in 0..cfg.max_iter {
        iterations = t + 1;
        let grad = model.gradient(&w);
        let moved = w.sub(&grad.scale(eta));
        let spec = moved.eig().map_err(|_| SolveError::EigFailure(t))?;
        let thresholded: Vec<f64> = spec
            .eigenvalues
            .iter()
            .map(|&l| l.signum() * (l.abs() - eta * epsilon_nuc).max(0.0))
            .collect();
        let w_new = spec.recombine(&thresholded);
        nuclear = thresholded.iter().map(|l| l.abs()).sum();
        let f_new = model.value(&w_new) + epsilon_nuc * nuclear;
        if f_new.is_nan() {
            return Err(SolveError::ObjectiveNaN(t));
        }
        residual = w_new.sub(&w).frobenius_norm() / eta;
        let decrease = f_cur - f_new;
        w = w_new;
        f_cur = f_new;
        trace.push(f_new);
        if decrease.abs() <= cfg.tol_obj * (1.0 + f_cur.abs()) {
            converged = true;
            break;
        }
    }
    Ok(NuclearResult {
        estimate: w,
        objective_trace: trace,
        stationarity_residual: residual,
        iterations,
        converged,
    })
}

fn recombine(vecs: &DMatrix<Complex64>, values: &[f64]) -> HermitianMatrix {
    let m = values.len();
    let diag = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    HermitianMatrix::symmetrize(vecs * diag * vecs.adjoint())
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("simplex projection NaN"));
    let mut acc = 0.0;
    let mut tau = 0.0;
    let mut k = 0;
    for (i, &val) in sorted.iter().enumerate() {
        acc += val;
        let candidate = (acc - 1.0) / (i + 1) as f64;
        if val - candidate > 0.0 {
            tau = candidate;
            k = i + 1;
        }
    }
    debug_assert!(k > 0);
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{DesignDraw, DesignDistribution};
    use crate::hermitian::random_hermitian;
    use crate::noise::{simulate_measurements, NoiseModel};
    use crate::states::{entropy_penalty, random_density, trace_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn complete_basis_dataset(rho: &DensityMatrix, dist: &DesignDistribution) -> Dataset {
        let designs: Vec<HermitianMatrix> = dist.basis().to_vec();
        let draws: Vec<DesignDraw> = (0..designs.len()).map(DesignDraw::BasisIndex).collect();
        Dataset::noiseless_exact(rho, designs, draws, dist.kind().as_str())
    }

    #[test]
    fn empirical_objective_trivial_cases() {
        let mut r = rng(3);
        let m = 4usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let data = complete_basis_dataset(&rho, &dist);
        // Perfect fit at eps = 0, up to cancellation round-off.
        assert!(empirical_objective(&rho, &data, 0.0).abs() < 1e-12);
        // Mixed state against its own noiseless data: quadratic part zero.
        let mixed = DensityMatrix::maximally_mixed(m);
        let data_mixed = complete_basis_dataset(&mixed, &dist);
        let eps = 0.37;
        let expect = eps * -(m as f64).ln();
        assert!((empirical_objective(&mixed, &data_mixed, eps) - expect).abs() < 1e-12);
    }

    #[test]
    fn empirical_objective_matches_term_by_term_oracle() {
        let mut r = rng(5);
        let m = 3usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::gaussian(m);
        let noise = NoiseModel::Gaussian { sigma: 0.2 };
        let data = simulate_measurements(&rho, &dist, &noise, 40, 0);
        let s = random_density(m, m, &mut r);
        let eps = 0.05;
        // Independent summation route.
        let mut quad = 0.0;
        for (x, &y) in data.designs.iter().zip(data.responses.iter()) {
            let resid = y - hs_inner(s.matrix(), x);
            quad += resid * resid;
        }
        quad /= data.len() as f64;
        let oracle = quad + eps * entropy_penalty(&s);
        assert!((empirical_objective(&s, &data, eps) - oracle).abs() < 1e-12);
    }

    #[test]
    fn population_objective_pauli_quadratic_term() {
        let mut r = rng(7);
        let dist = DesignDistribution::pauli(2);
        let m = 4usize;
        let rho = random_density(m, m, &mut r);
        let data = simulate_measurements(&rho, &dist, &NoiseModel::Gaussian { sigma: 0.0 }, 30, 0);
        let s = random_density(m, m, &mut r);
        let model = QuadraticModel::known_design(&dist, &data);
        let quad_expected = s.matrix().frobenius_norm().powi(2) / (m * m) as f64;
        let linear: f64 = data
            .designs
            .iter()
            .zip(data.responses.iter())
            .map(|(x, &y)| y * hs_inner(s.matrix(), x))
            .sum::<f64>()
            * 2.0
            / data.len() as f64;
        assert!((model.value(s.matrix()) - (quad_expected - linear)).abs() < 1e-12);
        // With the scalar oracle at S = I/m: quadratic term is m^{-3}.
        let mixed = DensityMatrix::maximally_mixed(m);
        let quad_mixed = mixed.matrix().frobenius_norm().powi(2) / (m * m) as f64;
        assert!((quad_mixed - (m as f64).powi(-3) * m as f64 / m as f64).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = rng(11);
        let m = 4usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let noise = NoiseModel::Gaussian { sigma: 0.1 };
        let data = simulate_measurements(&rho, &dist, &noise, 60, 0);
        let eps = 0.03;
        for _ in 0..5 {
            let s = random_density(m, m, &mut r);
            let grad = gradient_empirical(&s, &data, eps);
            for _ in 0..10 {
                let mut nu = random_hermitian(m, &mut r);
                nu = nu.sub(&HermitianMatrix::identity(m).scale(nu.trace() / m as f64));
                nu = nu.scale(1.0 / nu.frobenius_norm());
                let t = 1e-5;
                let plus = DensityMatrix::new(s.matrix().add(&nu.scale(t))).unwrap();
                let minus = DensityMatrix::new(s.matrix().sub(&nu.scale(t))).unwrap();
                let fd = (empirical_objective(&plus, &data, eps)
                    - empirical_objective(&minus, &data, eps))
                    / (2.0 * t);
                let directional = hs_inner(&grad, &nu);
                assert!(
                    (directional - fd).abs() <= 1e-5,
                    "directional {directional} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn gradient_entropy_term_at_mixed_state() {
        let m = 3usize;
        let mixed = DensityMatrix::maximally_mixed(m);
        // Dataset with zero designs and zero responses: quadratic part zero.
        let data = Dataset::noiseless_exact(
            &mixed,
            vec![HermitianMatrix::zeros(m)],
            vec![DesignDraw::BasisIndex(0)],
            "mc-uniform",
        );
        let eps = 0.7;
        let grad = gradient_empirical(&mixed, &data, eps);
        let expect = eps * ((1.0 / m as f64).ln() + 1.0);
        for i in 0..m {
            assert!((grad.get(i, i).re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_zero_at_perfect_fit_without_penalty() {
        let mut r = rng(13);
        let m = 3usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let data = complete_basis_dataset(&rho, &dist);
        let grad = gradient_empirical(&rho, &data, 0.0);
        assert!(grad.op_norm() < 1e-12);
    }

    #[test]
    fn stationarity_residual_formula() {
        let g = HermitianMatrix::identity(4).scale(2.5);
        assert!(stationarity_residual(&g) < 1e-12);
        let g = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!((stationarity_residual(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_epsilon_returns_maximally_mixed() {
        let mut r = rng(17);
        let m = 4usize;
        let rho = random_density(m, 1, &mut r);
        let dist = DesignDistribution::pauli(2);
        let data = simulate_measurements(&rho, &dist, &NoiseModel::Gaussian { sigma: 0.05 }, 200, 0);
        let cfg = SolverConfig::with_epsilon(1e3);
        let res = solve_entropy_penalized(&data, None, &cfg).unwrap();
        let d = trace_distance(&res.estimate, &DensityMatrix::maximally_mixed(m));
        assert!(d < 1e-3, "distance to mixed state {d}");
    }

    #[test]
    fn noiseless_complete_basis_recovers_truth() {
        let mut r = rng(19);
        let m = 4usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let data = complete_basis_dataset(&rho, &dist);
        let cfg = SolverConfig::with_epsilon(1e-8);
        let res = solve_entropy_penalized(&data, None, &cfg).unwrap();
        let d = trace_distance(&res.estimate, &rho);
        assert!(d <= 1e-3, "trace distance {d}");
        // Minimizer property: objective no worse than at truth or mixed,
        // up to the first-order slack 2 * residual implied by convexity.
        let slack = 2.0 * res.stationarity_residual + 1e-12;
        let f_hat = empirical_objective(&res.estimate, &data, 1e-8);
        assert!(f_hat <= empirical_objective(&rho, &data, 1e-8) + slack);
        assert!(
            f_hat <= empirical_objective(&DensityMatrix::maximally_mixed(m), &data, 1e-8) + slack
        );
    }

    #[test]
    fn objective_trace_is_monotone_and_certificates_hold() {
        let mut r = rng(23);
        let m = 4usize;
        let rho = random_density(m, 2, &mut r);
        let dist = DesignDistribution::pauli(2);
        let data = simulate_measurements(&rho, &dist, &NoiseModel::Gaussian { sigma: 0.1 }, 500, 0);
        let cfg = SolverConfig::with_epsilon(0.01);
        let res = solve_entropy_penalized(&data, None, &cfg).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(res.converged);
        let scale = 1.0
            + (data.responses.iter().map(|y| y * y).sum::<f64>() / data.len() as f64).sqrt();
        assert!(res.stationarity_residual <= cfg.tol_stat * scale);
        // First-order optimality over random states.
        let grad = gradient_empirical(&res.estimate, &data, 0.01);
        for _ in 0..20 {
            let s = random_density(m, m, &mut r);
            let dir = hs_inner(&grad, &s.matrix().sub(res.estimate.matrix()));
            assert!(dir >= -10.0 * cfg.tol_stat * scale, "violation {dir}");
        }
        // Optimality dominance against truth, mixed state, random states.
        let slack = 2.0 * res.stationarity_residual + 1e-12;
        let f_hat = empirical_objective(&res.estimate, &data, 0.01);
        assert!(f_hat <= empirical_objective(&rho, &data, 0.01) + slack);
        for _ in 0..20 {
            let s = random_density(m, m, &mut r);
            assert!(f_hat <= empirical_objective(&s, &data, 0.01) + slack);
        }
    }

    #[test]
    fn known_design_solver_runs() {
        let mut r = rng(29);
        let m = 4usize;
        let rho = random_density(m, 2, &mut r);
        let dist = DesignDistribution::pauli(2);
        let data = simulate_measurements(&rho, &dist, &NoiseModel::Gaussian { sigma: 0.05 }, 2000, 0);
        let cfg = SolverConfig::with_epsilon(0.005);
        let res = solve_entropy_penalized(&data, Some(&dist), &cfg).unwrap();
        assert!(res.converged);
        let d = trace_distance(&res.estimate, &rho);
        assert!(d < 0.8, "known-design estimate unreasonably far: {d}");
    }

    #[test]
    fn population_solution_approaches_truth_as_epsilon_vanishes() {
        let mut r = rng(31);
        let m = 4usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::pauli(2);
        let cfg = SolverConfig::default();
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let res = solve_population(&rho, &dist, eps, &cfg).unwrap();
            let d = trace_distance(&res.estimate, &rho);
            assert!(d <= last + 1e-9, "distance should shrink with epsilon");
            last = d;
        }
        assert!(last < 1e-2, "smallest-epsilon distance {last}");
    }

    #[test]
    fn projected_gradient_handles_zero_epsilon() {
        let mut r = rng(37);
        let m = 3usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let data = complete_basis_dataset(&rho, &dist);
        let cfg = SolverConfig::default();
        let res = solve_entropy_penalized(&data, None, &cfg).unwrap();
        assert!(res.converged);
        assert!(trace_distance(&res.estimate, &rho) < 1e-3);
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn nuclear_baseline_huge_threshold_returns_zero() {
        let mut r = rng(41);
        let m = 3usize;
        let rho = random_density(m, 1, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let data = complete_basis_dataset(&rho, &dist);
        let cfg = SolverConfig::default();
        let res = solve_nuclear_baseline(&data, 1e6, &cfg).unwrap();
        assert!(res.estimate.frobenius_norm() < 1e-12);
    }

    #[test]
    fn nuclear_baseline_zero_threshold_inverts_complete_data() {
        let mut r = rng(43);
        let m = 3usize;
        let rho = random_density(m, m, &mut r);
        let dist = DesignDistribution::matrix_completion_uniform(m);
        let data = complete_basis_dataset(&rho, &dist);
        let cfg = SolverConfig {
            max_iter: 20_000,
            ..SolverConfig::default()
        };
        let res = solve_nuclear_baseline(&data, 0.0, &cfg).unwrap();
        let d = res.estimate.sub(rho.matrix()).frobenius_norm();
        assert!(d < 1e-4, "nuclear inversion error {d}");
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn simplex_projection_properties() {
        let cases: Vec<Vec<f64>> = vec![
            vec![0.2, 0.3, 0.5],
            vec![1.5, -0.5, 0.2],
            vec![-1.0, -2.0, -3.0],
            vec![10.0, 0.0, 0.0],
        ];
        for v in cases {
            let p = project_simplex(&v);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
        // Already on the simplex: unchanged.
        let p = project_simplex(&[0.25, 0.25, 0.5]);
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }
}
