//! Closed-form evaluators for the theoretical error bounds and the matrix
//! Bernstein tail inequalities, so the Monte-Carlo harness can compare
//! theory against measurement.
//!
//! Every evaluator exposes its `max`/sum branches as named components;
//! `value` always equals the recombination of the components exactly. All
//! logarithms are natural except the `log_2` inside `tau_n`. Unspecified
//! numerical constants are the caller-supplied `C`, `D`, `lambda` fields of
//! [`RateContext`], defaulting to 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("evaluator `{display}` requires the symbol `{symbol}`")]
    MissingSymbol {
        symbol: &'static str,
        display: &'static str,
    },
    #[error("unknown bound tag `{0}`")]
    UnknownTag(String),
}

/// Design-dependent constants consumed by the bound evaluators.
#[derive(Debug, Clone, Copy, Default)]
pub struct DesignStats {
    pub sigma_x: f64,
    pub sigma_xx: f64,
    pub u_bound: f64,
    pub ex_norm: f64,
    pub e_norm_sq: f64,
}

impl From<&crate::designs::DesignConstants> for DesignStats {
    fn from(c: &crate::designs::DesignConstants) -> Self {
        Self {
            sigma_x: c.sigma_x,
            sigma_xx: c.sigma_xx,
            u_bound: c.u_bound,
            ex_norm: c.ex_norm,
            e_norm_sq: c.e_norm_sq,
        }
    }
}

/// Problem-size and confidence context shared by the evaluators.
#[derive(Debug, Clone, Copy)]
pub struct RateContext {
    pub m: usize,
    pub n: usize,
    /// Confidence parameter `t > 0`.
    pub t: f64,
    pub sigma_xi: f64,
    pub c_xi: f64,
    /// psi_1 norm of the noise, for the unbounded-noise flavors.
    pub psi1_xi: f64,
    pub design: DesignStats,
    /// The generic constant `C`.
    pub c_const: f64,
    /// The regularization constant `D`.
    pub d_const: f64,
    /// The oracle-inequality balance parameter `lambda`.
    pub lambda: f64,
}

impl RateContext {
    pub fn new(m: usize, n: usize, t: f64) -> Self {
        Self {
            m,
            n,
            t,
            sigma_xi: 0.0,
            c_xi: 0.0,
            psi1_xi: 0.0,
            design: DesignStats::default(),
            c_const: 1.0,
            d_const: 1.0,
            lambda: 1.0,
        }
    }

    /// `t_m = t + log(2m)`.
    pub fn t_m(&self) -> f64 {
        self.t + (2.0 * self.m as f64).ln()
    }

    /// `tau_n = t + log log_2(2n)`.
    pub fn tau_n(&self) -> f64 {
        self.t + (2.0 * self.n as f64).log2().ln()
    }

    /// `t_{n,m} = tau_n log n ∨ t_m`.
    pub fn t_nm(&self) -> f64 {
        (self.tau_n() * (self.n as f64).ln()).max(self.t_m())
    }

    fn mf(&self) -> f64 {
        self.m as f64
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// The matrix Bernstein tail bound for a sum of `n` i.i.d. centered
/// Hermitian matrices with `||X|| <= u`:
/// `P(||X_1 + ... + X_n|| >= t) <= 2m exp(-t^2 / (2 sigma^2 n + 2 u t / 3))`.
pub fn bernstein_tail(t: f64, n: usize, m: usize, sigma_x: f64, u: f64) -> f64 {
    2.0 * m as f64 * (-(t * t) / (2.0 * sigma_x * sigma_x * n as f64 + 2.0 * u * t / 3.0)).exp()
}

/// The companion deviation level: with probability at least `1 - e^{-t}`,
/// `||(X_1 + ... + X_n)/n|| <= 2 (sigma sqrt(t_m/n) ∨ u t_m/n)` with
/// `t_m = t + log(2m)`.
pub fn bernstein_level(t: f64, n: usize, m: usize, sigma_x: f64, u: f64) -> f64 {
    let tm = t + (2.0 * m as f64).ln();
    let nf = n as f64;
    2.0 * (sigma_x * (tm / nf).sqrt()).max(u * tm / nf)
}

/// The psi_alpha-norm deviation level
/// `C (sigma sqrt(t_m/n) ∨ u_alpha (log(u_alpha/sigma))^{1/alpha} t_m/n)`;
/// the ratio inside the logarithm is floored at `e` so the factor is at
/// least 1. Recovers the bounded level's shape as `alpha -> infinity`.
pub fn bernstein_psi_level(
    t: f64,
    n: usize,
    m: usize,
    sigma_x: f64,
    u_alpha: f64,
    alpha: f64,
    c: f64,
) -> f64 {
    assert!(alpha >= 1.0);
    let tm = t + (2.0 * m as f64).ln();
    let nf = n as f64;
    let log_factor = (u_alpha / sigma_x).max(std::f64::consts::E).ln().powf(1.0 / alpha);
    c * (sigma_x * (tm / nf).sqrt()).max(u_alpha * log_factor * tm / nf)
}

/// Talagrand-style variant of the bounded deviation level carrying the
/// directional moment `sigma~_X`:
/// `C (sigma sqrt(log(2m)/n) ∨ sigma~ sqrt(t/n) ∨ u log(2m)/n ∨ u t/n)`.
pub fn bernstein_level_directional(
    t: f64,
    n: usize,
    m: usize,
    sigma_x: f64,
    sigma_tilde: f64,
    u: f64,
    c: f64,
) -> f64 {
    let l2m = (2.0 * m as f64).ln();
    let nf = n as f64;
    c * (sigma_x * (l2m / nf).sqrt())
        .max(sigma_tilde * (t / nf).sqrt())
        .max(u * l2m / nf)
        .max(u * t / nf)
}

/// psi_1 variant of the directional deviation level:
/// `C (sigma sqrt(log(2m)/n) ∨ sigma~ sqrt(t/n) ∨
/// u_1 log(u_1/sigma) log(2m)/n ∨ u_1 t log(n)/n)`.
pub fn bernstein_level_directional_psi1(
    t: f64,
    n: usize,
    m: usize,
    sigma_x: f64,
    sigma_tilde: f64,
    u1: f64,
    c: f64,
) -> f64 {
    let l2m = (2.0 * m as f64).ln();
    let nf = n as f64;
    let log_factor = (u1 / sigma_x).max(std::f64::consts::E).ln();
    c * (sigma_x * (l2m / nf).sqrt())
        .max(sigma_tilde * (t / nf).sqrt())
        .max(u1 * log_factor * l2m / nf)
        .max(u1 * t * nf.ln() / nf)
}

/// Regularization thresholds `epsilon_{n,m}` per design family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonFlavor {
    /// `(sigma_xi sigma_X ∨ sigma_xi ||EX|| ∨ sigma_XX) sqrt(t_m/n) ∨
    /// (c_xi U ∨ U^2) t_m/n`.
    GeneralS5,
    /// Completion basis: `(sigma_xi ∨ 1) m^{-1/2} sqrt(t_m/n) ∨
    /// (c_xi ∨ 1) t_m/n`.
    McExample,
    /// Pauli basis: `(sigma_xi m^{-1/2} ∨ m^{-1}) sqrt(t_m/n) ∨
    /// (c_xi m^{-1/2} ∨ m^{-1}) t_m/n`.
    PauliExample,
    /// Subgaussian isotropic: `sigma_xi sqrt(m t_m/n) ∨ c_xi sqrt(m) t_m/n`.
    SubgaussS6,
}

impl std::str::FromStr for EpsilonFlavor {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general-s5" => Ok(EpsilonFlavor::GeneralS5),
            "mc-example" => Ok(EpsilonFlavor::McExample),
            "pauli-example" => Ok(EpsilonFlavor::PauliExample),
            "subgauss-s6" => Ok(EpsilonFlavor::SubgaussS6),
            other => Err(BoundError::UnknownTag(other.to_string())),
        }
    }
}

/// Evaluates the threshold `epsilon_{n,m}` for the chosen flavor.
pub fn epsilon_threshold(ctx: &RateContext, flavor: EpsilonFlavor) -> f64 {
    let tm = ctx.t_m();
    let nf = ctx.nf();
    let mf = ctx.mf();
    let sqrt_rate = (tm / nf).sqrt();
    let lin_rate = tm / nf;
    match flavor {
        EpsilonFlavor::GeneralS5 => {
            let d = &ctx.design;
            let first = (ctx.sigma_xi * d.sigma_x)
                .max(ctx.sigma_xi * d.ex_norm)
                .max(d.sigma_xx)
                * sqrt_rate;
            let second = (ctx.c_xi * d.u_bound).max(d.u_bound * d.u_bound) * lin_rate;
            first.max(second)
        }
        EpsilonFlavor::McExample => {
            let first = ctx.sigma_xi.max(1.0) / mf.sqrt() * sqrt_rate;
            let second = ctx.c_xi.max(1.0) * lin_rate;
            first.max(second)
        }
        EpsilonFlavor::PauliExample => {
            let first = (ctx.sigma_xi / mf.sqrt()).max(1.0 / mf) * sqrt_rate;
            let second = (ctx.c_xi / mf.sqrt()).max(1.0 / mf) * lin_rate;
            first.max(second)
        }
        EpsilonFlavor::SubgaussS6 => {
            let first = ctx.sigma_xi * (mf * tm / nf).sqrt();
            let second = ctx.c_xi * mf.sqrt() * lin_rate;
            first.max(second)
        }
    }
}

/// Oracle-side quantities consumed by the bound evaluators. Optional
/// fields; each display errors on the symbols it needs but lacks.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleInfo {
    /// Regularization `epsilon`.
    pub epsilon: Option<f64>,
    /// Squared approximation error `||S - rho||^2_{L2(Pi)}`.
    pub approx_error_sq: Option<f64>,
    /// `rank(S)` or `dim(L)`.
    pub rank: Option<usize>,
    /// Alignment coefficient `a(log S)`.
    pub a_log_s: Option<f64>,
    /// Tail mass `||P_{L^perp} S P_{L^perp}||_1`.
    pub tail_norm: Option<f64>,
    /// Operator norm `||log S||`.
    pub log_s_op: Option<f64>,
    /// Hilbert-Schmidt norm `||log S||_2`.
    pub log_s_hs: Option<f64>,
    /// `beta(L)`; defaults to 1 when absent.
    pub beta: Option<f64>,
    /// `Gamma_r = sum_{k<=r} gamma_k^2` for Gibbs oracles.
    pub gamma_r: Option<f64>,
    /// `delta_r(H)` for Gibbs oracles.
    pub delta_r: Option<f64>,
    /// Unsquared error `||rho^eps - rho||_{L2(Pi)}`.
    pub approx_l2: Option<f64>,
    /// Trace-norm error `||rho^eps - rho||_1`.
    pub trace_err: Option<f64>,
}

macro_rules! need {
    ($info:expr, $field:ident, $display:expr) => {
        $info.$field.ok_or(BoundError::MissingSymbol {
            symbol: stringify!($field),
            display: $display,
        })?
    };
}

/// A named evaluation of one bound display: additive components (prefixed
/// `add:`) plus the maximum of the `max:` components.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub components: Vec<(String, f64)>,
}

impl BoundReport {
    fn build(name: &str, adds: Vec<(&str, f64)>, maxes: Vec<(&str, f64)>) -> Self {
        let mut components = Vec::new();
        let mut value = 0.0;
        for (label, v) in adds {
            components.push((format!("add:{label}"), v));
            value += v;
        }
        let mut best = f64::NEG_INFINITY;
        for (label, v) in &maxes {
            best = best.max(*v);
            components.push((format!("max:{label}"), *v));
        }
        if !maxes.is_empty() {
            value += best;
        }
        BoundReport {
            name: name.to_string(),
            value,
            components,
        }
    }

    /// Recomputes the value from the exposed components; equal to `value`
    /// exactly by construction, used as a structural self-check.
    pub fn recombine(&self) -> f64 {
        let mut value = 0.0;
        let mut best = f64::NEG_INFINITY;
        let mut has_max = false;
        for (name, v) in &self.components {
            if name.starts_with("add:") {
                value += v;
            } else {
                has_max = true;
                best = best.max(*v);
            }
        }
        if has_max {
            value += best;
        }
        value
    }

    /// CSV row: `name,value` then one column per component.
    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{}", self.name, self.value);
        for (name, v) in &self.components {
            row.push_str(&format!(",{name}={v}"));
        }
        row
    }
}

/// The theorem/corollary displays implemented by [`oracle_rhs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremTag {
    /// Subgaussian isotropic, all epsilon: point bound.
    Thm21First,
    /// Subgaussian isotropic oracle inequality with explicit subspace.
    Thm21Oracle,
    /// Subgaussian isotropic low-rank oracle inequality.
    Thm22,
    /// Pauli point bound, all epsilon.
    Thm23First,
    /// Pauli low-rank oracle inequality.
    Thm23Oracle,
    /// Symmetrized KL display.
    KlDisplay,
    /// Squared Hellinger display for the Pauli design.
    HellingerDisplay,
    /// General bounded design, order-epsilon bound.
    Thm51,
    /// General bounded design, full-rank oracle inequality.
    Thm52,
    /// The thm52 display with the psi_1 unbounded-noise replacement.
    Thm52Psi1,
    /// Random-error bound around the population solution.
    Thm53,
    /// The thm53 display with the psi_1 unbounded-noise replacement.
    Thm53Psi1,
    /// Completion-basis low-rank corollary.
    Cor54,
    /// Completion-basis Gibbs corollary.
    Cor55Gibbs,
    /// Pauli low-rank corollary.
    Cor56Pauli,
    /// Pauli Gibbs corollary.
    Cor57PauliGibbs,
    /// Subgaussian order-epsilon oracle bound.
    Thm62,
    /// Subgaussian full-rank oracle inequality.
    Thm63,
    /// Subgaussian random-error bound.
    Thm64,
    /// Subgaussian low-rank corollary.
    Cor65,
    /// Subgaussian Gibbs corollary.
    Cor66Gibbs,
}

impl std::str::FromStr for TheoremTag {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use TheoremTag::*;
        match s {
            "thm21-first" => Ok(Thm21First),
            "thm21-oracle" => Ok(Thm21Oracle),
            "thm22" => Ok(Thm22),
            "thm23-first" => Ok(Thm23First),
            "thm23-oracle" => Ok(Thm23Oracle),
            "kl" => Ok(KlDisplay),
            "hellinger" => Ok(HellingerDisplay),
            "thm51" => Ok(Thm51),
            "thm52" => Ok(Thm52),
            "thm52-psi1" => Ok(Thm52Psi1),
            "thm53" => Ok(Thm53),
            "thm53-psi1" => Ok(Thm53Psi1),
            "cor54" => Ok(Cor54),
            "cor55" => Ok(Cor55Gibbs),
            "cor56" => Ok(Cor56Pauli),
            "cor57" => Ok(Cor57PauliGibbs),
            "thm62" => Ok(Thm62),
            "thm63" => Ok(Thm63),
            "thm64" => Ok(Thm64),
            "cor65" => Ok(Cor65),
            "cor66" => Ok(Cor66Gibbs),
            other => Err(BoundError::UnknownTag(other.to_string())),
        }
    }
}

/// Evaluates the right-hand side of the chosen display, exposing each
/// branch of its `max`/sum structure as a named component.
pub fn oracle_rhs(
    ctx: &RateContext,
    theorem: TheoremTag,
    info: &OracleInfo,
) -> Result<BoundReport, BoundError> {
    use TheoremTag::*;
    let m = ctx.mf();
    let n = ctx.nf();
    let tm = ctx.t_m();
    let tau = ctx.tau_n();
    let tnm = ctx.t_nm();
    let c = ctx.c_const;
    let d2 = ctx.d_const * ctx.d_const;
    let lam = ctx.lambda;
    let sx = ctx.sigma_xi;
    let cx = ctx.c_xi;
    let beta = info.beta.unwrap_or(1.0);
    let log2mn = (m * n).ln().powi(2);

    let report = match theorem {
        Thm21First => {
            let eps = need!(info, epsilon, "thm21-first");
            let log_op = need!(info, log_s_op, "thm21-first");
            BoundReport::build(
                "thm21-first",
                vec![],
                vec![
                    ("penalty", c * eps * log_op.min((m / eps).ln())),
                    ("noise", c * sx * (m * tm / n).sqrt()),
                    (
                        "higher-order",
                        c * sx.max(m.sqrt()) * m.sqrt() * (tau * n.ln()).max(tm) / n,
                    ),
                ],
            )
        }
        Thm21Oracle => {
            let eps = need!(info, epsilon, "thm21-oracle");
            let approx = need!(info, approx_error_sq, "thm21-oracle");
            let log_hs = need!(info, log_s_hs, "thm21-oracle");
            let r = need!(info, rank, "thm21-oracle") as f64;
            let tail = need!(info, tail_norm, "thm21-oracle");
            BoundReport::build(
                "thm21-oracle",
                vec![("approx", 2.0 * approx)],
                vec![
                    ("penalty-sq", c * eps * eps * log_hs * log_hs),
                    ("variance", c * sx * sx * (m * r + tau) / n),
                    ("tail", c * sx * tail * (m * tm / n).sqrt()),
                    (
                        "higher-order",
                        c * sx.max(m.sqrt()) * m.sqrt() * (tau * n.ln()).max(tm) / n,
                    ),
                ],
            )
        }
        Thm22 => {
            let approx = need!(info, approx_error_sq, "thm22");
            let r = need!(info, rank, "thm22") as f64;
            BoundReport::build(
                "thm22",
                vec![("approx", 2.0 * approx)],
                vec![
                    ("rank-term", c * sx * sx * r * m * tm * log2mn / n),
                    ("higher-order", c * m * (tau * n.ln()).max(tm) / n),
                ],
            )
        }
        Thm23First => {
            let eps = need!(info, epsilon, "thm23-first");
            let log_op = need!(info, log_s_op, "thm23-first");
            BoundReport::build(
                "thm23-first",
                vec![],
                vec![
                    ("penalty", c * eps * log_op.min((m / eps).ln())),
                    (
                        "noise",
                        c * sx.max(m.powf(-0.5)) * (tm / (n * m)).sqrt(),
                    ),
                ],
            )
        }
        Thm23Oracle => {
            let approx = need!(info, approx_error_sq, "thm23-oracle");
            let r = need!(info, rank, "thm23-oracle") as f64;
            BoundReport::build(
                "thm23-oracle",
                vec![("approx", 2.0 * approx)],
                vec![(
                    "rank-term",
                    c * (sx * sx).max(1.0 / m) * r * m * tm * log2mn / n,
                )],
            )
        }
        KlDisplay => {
            let eps = need!(info, epsilon, "kl");
            let log_hs = need!(info, log_s_hs, "kl");
            let r = need!(info, rank, "kl") as f64;
            let tail = need!(info, tail_norm, "kl");
            let scale = c / eps;
            BoundReport::build(
                "kl",
                vec![],
                vec![
                    ("penalty-sq", scale * eps * eps * log_hs * log_hs),
                    ("variance", scale * sx * sx * (m * r + tau) / n),
                    ("tail", scale * sx * tail * (m * tm / n).sqrt()),
                    (
                        "higher-order",
                        scale * sx.max(m.sqrt()) * m.sqrt() * (tau * n.ln()).max(tm) / n,
                    ),
                ],
            )
        }
        HellingerDisplay => {
            let r = need!(info, rank, "hellinger") as f64;
            BoundReport::build(
                "hellinger",
                vec![],
                vec![(
                    "rate",
                    c * sx.max(m.powf(-0.5)) * r * (m * tm).sqrt() * log2mn / n.sqrt(),
                )],
            )
        }
        Thm51 => {
            let eps = need!(info, epsilon, "thm51");
            let approx = need!(info, approx_error_sq, "thm51");
            let log_op = need!(info, log_s_op, "thm51");
            let ds = &ctx.design;
            let gamma = (m * ds.e_norm_sq.sqrt() / eps.sqrt()).max(m);
            BoundReport::build(
                "thm51",
                vec![("approx", approx)],
                vec![
                    ("penalty", c * eps * log_op.min(gamma.ln())),
                    (
                        "cross",
                        c * approx.sqrt() * ds.u_bound * (tm / n).sqrt(),
                    ),
                    (
                        "variance",
                        c * (sx * ds.sigma_x).max(sx * ds.ex_norm).max(ds.sigma_xx)
                            * (tm / n).sqrt(),
                    ),
                    (
                        "higher-order",
                        c * (cx * ds.u_bound).max(ds.u_bound * ds.u_bound) * tm / n,
                    ),
                ],
            )
        }
        Thm52 | Thm52Psi1 => {
            let eps = need!(info, epsilon, "thm52");
            let approx = need!(info, approx_error_sq, "thm52");
            let a_log = need!(info, a_log_s, "thm52");
            let r = need!(info, rank, "thm52") as f64;
            let tail = need!(info, tail_norm, "thm52");
            let ds = &ctx.design;
            let scale = c / lam;
            let noise_branch = if theorem == Thm52Psi1 {
                let p1 = ctx.psi1_xi;
                let logf = ((p1 * ds.u_bound) / (sx * ds.sigma_x))
                    .max(std::f64::consts::E)
                    .ln();
                (p1 * ds.u_bound * tau * n.ln() / n).max(p1 * ds.u_bound * logf * tm / n)
            } else {
                cx * ds.u_bound * tau.max(tm) / n
            };
            BoundReport::build(
                if theorem == Thm52Psi1 {
                    "thm52-psi1"
                } else {
                    "thm52"
                },
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    ("alignment", scale * a_log * a_log * eps * eps),
                    ("variance", scale * sx * sx * beta * beta * (m * r + tau) / n),
                    (
                        "tail",
                        scale * sx * ds.sigma_x.max(ds.ex_norm) * tail * (tm / n).sqrt(),
                    ),
                    ("noise-u", scale * noise_branch),
                    ("u-sq", scale * ds.u_bound * ds.u_bound * tm / n),
                ],
            )
        }
        Thm53 | Thm53Psi1 => {
            let r = need!(info, rank, "thm53") as f64;
            let tail = need!(info, tail_norm, "thm53");
            let err_l2 = need!(info, approx_l2, "thm53");
            let err_tr = need!(info, trace_err, "thm53");
            let ds = &ctx.design;
            let noise_branch = if theorem == Thm53Psi1 {
                let p1 = ctx.psi1_xi;
                let logf = ((p1 * ds.u_bound) / (sx * ds.sigma_x))
                    .max(std::f64::consts::E)
                    .ln();
                (p1 * ds.u_bound * tau * n.ln() / n).max(p1 * ds.u_bound * logf * tm / n)
            } else {
                cx * ds.u_bound * tau.max(tm) / n
            };
            BoundReport::build(
                if theorem == Thm53Psi1 {
                    "thm53-psi1"
                } else {
                    "thm53"
                },
                vec![],
                vec![
                    ("variance", c * sx * sx * beta * beta * (m * r + tau) / n),
                    (
                        "tail",
                        c * sx * ds.sigma_x.max(ds.ex_norm) * tail * (tm / n).sqrt(),
                    ),
                    ("cross", c * ds.u_bound * err_l2 * (tm / n).sqrt()),
                    (
                        "trace-cross",
                        c * ds.u_bound * ds.u_bound * err_tr * tm / n,
                    ),
                    ("noise-u", c * noise_branch),
                ],
            )
        }
        Cor54 => {
            let approx = need!(info, approx_error_sq, "cor54");
            let r = need!(info, rank, "cor54") as f64;
            let scale = c / lam;
            BoundReport::build(
                "cor54",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    (
                        "rank-term",
                        scale
                            * d2
                            * ((sx * sx).max(1.0) * r * m * tm / n)
                                .max((cx * cx).max(1.0) * r * m * m * tm * tm / (n * n))
                            * log2mn,
                    ),
                    ("variance", scale * sx * sx * tau / n),
                    ("noise-u", scale * cx * tau.max(tm) / n),
                    ("u-sq", scale * tm / n),
                ],
            )
        }
        Cor55Gibbs => {
            let approx = need!(info, approx_error_sq, "cor55");
            let r = need!(info, rank, "cor55") as f64;
            let gamma_r = need!(info, gamma_r, "cor55");
            let delta_r = need!(info, delta_r, "cor55");
            let scale = c / lam;
            BoundReport::build(
                "cor55",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    ("gibbs-tail", scale * delta_r * delta_r / (m * m)),
                    (
                        "rank-term",
                        scale
                            * d2
                            * ((sx * sx).max(1.0) * gamma_r * m * tm / n)
                                .max((cx * cx).max(1.0) * gamma_r * m * m * tm * tm / (n * n)),
                    ),
                    ("variance", scale * sx * sx * (m * r + tau) / n),
                    ("noise-u", scale * cx * tau.max(tm) / n),
                    ("u-sq", scale * tm / n),
                ],
            )
        }
        Cor56Pauli => {
            let approx = need!(info, approx_error_sq, "cor56");
            let r = need!(info, rank, "cor56") as f64;
            let scale = c / lam;
            BoundReport::build(
                "cor56",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    (
                        "rank-term",
                        scale
                            * d2
                            * ((sx * sx).max(1.0 / m) * r * m * tm / n)
                                .max((cx * cx).max(1.0 / m) * r * m * tm * tm / (n * n))
                            * log2mn,
                    ),
                    ("variance", scale * sx * sx * tau / n),
                    ("noise-u", scale * cx * m.powf(-0.5) * tau.max(tm) / n),
                    ("u-sq", scale * tm / (m * n)),
                ],
            )
        }
        Cor57PauliGibbs => {
            let approx = need!(info, approx_error_sq, "cor57");
            let r = need!(info, rank, "cor57") as f64;
            let gamma_r = need!(info, gamma_r, "cor57");
            let delta_r = need!(info, delta_r, "cor57");
            let scale = c / lam;
            BoundReport::build(
                "cor57",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    ("gibbs-tail", scale * delta_r * delta_r / (m * m)),
                    (
                        "rank-term",
                        scale
                            * d2
                            * ((sx * sx).max(1.0 / m) * gamma_r * m * tm / n)
                                .max((cx * cx).max(1.0 / m) * gamma_r * m * m * tm * tm / (n * n)),
                    ),
                    ("variance", scale * sx * sx * (m * r + tau) / n),
                    ("noise-u", scale * cx * m.powf(-0.5) * tau.max(tm) / n),
                    ("u-sq", scale * tm / (m * n)),
                ],
            )
        }
        Thm62 => {
            let eps = need!(info, epsilon, "thm62");
            let approx = need!(info, approx_error_sq, "thm62");
            let log_op = need!(info, log_s_op, "thm62");
            BoundReport::build(
                "thm62",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    ("penalty", c * eps * log_op.min((m / eps).ln())),
                    ("noise", c * sx * (m * tm / n).sqrt()),
                    ("balance", c * m * tm / (n * lam)),
                    (
                        "higher-order",
                        c * cx.max(m.sqrt()) * m.sqrt() * tnm / n,
                    ),
                ],
            )
        }
        Thm63 => {
            let eps = need!(info, epsilon, "thm63");
            let approx = need!(info, approx_error_sq, "thm63");
            let a_log = need!(info, a_log_s, "thm63");
            let r = need!(info, rank, "thm63") as f64;
            let tail = need!(info, tail_norm, "thm63");
            let scale = c / lam;
            BoundReport::build(
                "thm63",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    ("alignment", scale * a_log * a_log * eps * eps),
                    ("variance", scale * sx * sx * beta * beta * (m * r + tau) / n),
                    ("tail", scale * sx * tail * (m * tm / n).sqrt()),
                    (
                        "higher-order",
                        scale * cx.max(m.sqrt()) * m.sqrt() * tnm / n,
                    ),
                ],
            )
        }
        Thm64 => {
            let r = need!(info, rank, "thm64") as f64;
            let tail = need!(info, tail_norm, "thm64");
            let err_l2 = need!(info, approx_l2, "thm64");
            BoundReport::build(
                "thm64",
                vec![],
                vec![
                    ("variance", c * sx * sx * beta * beta * (m * r + tau) / n),
                    ("tail", c * sx * tail * (m * tm / n).sqrt()),
                    ("cross", c * err_l2 * (m * tm / n).sqrt()),
                    (
                        "higher-order",
                        c * cx.max(m.sqrt()) * m.sqrt() * tnm / n,
                    ),
                ],
            )
        }
        Cor65 => {
            let approx = need!(info, approx_error_sq, "cor65");
            let r = need!(info, rank, "cor65") as f64;
            let scale = c / lam;
            BoundReport::build(
                "cor65",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    (
                        "rank-term",
                        scale
                            * d2
                            * (sx * sx * r * m * tm / n)
                                .max(cx * cx * r * m * tm * tm / (n * n))
                            * log2mn,
                    ),
                    ("variance", scale * sx * sx * tau / n),
                    (
                        "higher-order",
                        scale * cx.max(m.sqrt()) * m.sqrt() * tnm / n,
                    ),
                ],
            )
        }
        Cor66Gibbs => {
            let approx = need!(info, approx_error_sq, "cor66");
            let r = need!(info, rank, "cor66") as f64;
            let gamma_r = need!(info, gamma_r, "cor66");
            let delta_r = need!(info, delta_r, "cor66");
            let scale = c / lam;
            BoundReport::build(
                "cor66",
                vec![("approx", (1.0 + lam) * approx)],
                vec![
                    ("gibbs-tail", scale * delta_r * delta_r),
                    (
                        "rank-term",
                        scale
                            * d2
                            * (sx * sx * gamma_r * m * tm / n)
                                .max(cx * cx * gamma_r * m * tm * tm / (n * n)),
                    ),
                    ("variance", scale * sx * sx * (m * r + tau) / n),
                    (
                        "higher-order",
                        scale * cx.max(m.sqrt()) * m.sqrt() * tnm / n,
                    ),
                ],
            )
        }
    };
    Ok(report)
}

/// Approximation-error bounds for the population solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropTag {
    /// `(2 ||S - rho|| + sqrt(eps ||log S||))^2`.
    P41,
    /// `(||S - rho|| + (eps/2) a(log S))^2`.
    P43,
    /// `2 ||S - rho||^2 + C eps^2 (Lambda^2 r log^2(1 + m/(eps ∧ 1)) + E||X||^2)`.
    P44,
    /// `2 ||rho_H - rho||^2 + 24 max_k E<X e_k, e_k>^2 delta_r^2 + a^2(H_{<=r}) eps^2`.
    P45,
}

impl std::str::FromStr for PropTag {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p41" => Ok(PropTag::P41),
            "p43" => Ok(PropTag::P43),
            "p44" => Ok(PropTag::P44),
            "p45" => Ok(PropTag::P45),
            other => Err(BoundError::UnknownTag(other.to_string())),
        }
    }
}

/// Inputs for [`approx_rhs`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxInfo {
    pub epsilon: Option<f64>,
    /// `||S - rho||_{L2(Pi)}` (unsquared).
    pub approx_l2: Option<f64>,
    pub log_s_op: Option<f64>,
    pub a_log_s: Option<f64>,
    /// `Lambda(L)`.
    pub lambda_l: Option<f64>,
    pub rank: Option<usize>,
    pub e_norm_sq: Option<f64>,
    /// `max_k E<X e_k, e_k>^2`.
    pub diag_moment: Option<f64>,
    pub delta_r: Option<f64>,
    /// `a(H_{<=r})`.
    pub a_h_low: Option<f64>,
}

/// Evaluates the right-hand side of the chosen approximation-error bound
/// (on the squared `L2(Pi)` distance).
pub fn approx_rhs(ctx: &RateContext, prop: PropTag, info: &ApproxInfo) -> Result<f64, BoundError> {
    let m = ctx.mf();
    match prop {
        PropTag::P41 => {
            let eps = need!(info, epsilon, "p41");
            let approx = need!(info, approx_l2, "p41");
            let log_op = need!(info, log_s_op, "p41");
            Ok((2.0 * approx + (eps * log_op).sqrt()).powi(2))
        }
        PropTag::P43 => {
            let eps = need!(info, epsilon, "p43");
            let approx = need!(info, approx_l2, "p43");
            let a = need!(info, a_log_s, "p43");
            Ok((approx + 0.5 * eps * a).powi(2))
        }
        PropTag::P44 => {
            let eps = need!(info, epsilon, "p44");
            let approx = need!(info, approx_l2, "p44");
            let lam_l = need!(info, lambda_l, "p44");
            let r = need!(info, rank, "p44") as f64;
            let e_norm = need!(info, e_norm_sq, "p44");
            let log_term = (1.0 + m / eps.min(1.0)).ln().powi(2);
            Ok(2.0 * approx * approx
                + ctx.c_const * eps * eps * (lam_l * lam_l * r * log_term + e_norm))
        }
        PropTag::P45 => {
            let eps = need!(info, epsilon, "p45");
            let approx = need!(info, approx_l2, "p45");
            let diag = need!(info, diag_moment, "p45");
            let delta = need!(info, delta_r, "p45");
            let a_low = need!(info, a_h_low, "p45");
            Ok(2.0 * approx * approx + 24.0 * diag * delta * delta + a_low * a_low * eps * eps)
        }
    }
}
