//! Experiment specification: TOML config file (`key = value` sections
//! mirroring the field names below) with CLI flag overrides.

use anyhow::{bail, Context, Result};
use qtomo::bounds::{epsilon_threshold, EpsilonFlavor, RateContext};
use qtomo::designs::{DesignDistribution, DesignKind};
use qtomo::noise::{noise_constants, NoiseModel};
use serde::{Deserialize, Serialize};

/// Error metrics a run can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "l2pi")]
    L2Pi,
    #[serde(rename = "hs")]
    Hs,
    #[serde(rename = "trace")]
    Trace,
    #[serde(rename = "hellinger")]
    Hellinger,
    #[serde(rename = "kl-sym")]
    KlSym,
    #[serde(rename = "fidelity")]
    Fidelity,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::L2Pi => "l2pi",
            Metric::Hs => "hs",
            Metric::Trace => "trace",
            Metric::Hellinger => "hellinger",
            Metric::KlSym => "kl-sym",
            Metric::Fidelity => "fidelity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "l2pi" => Metric::L2Pi,
            "hs" => Metric::Hs,
            "trace" => Metric::Trace,
            "hellinger" => Metric::Hellinger,
            "kl-sym" => Metric::KlSym,
            "fidelity" => Metric::Fidelity,
            other => bail!("unknown metric `{other}`"),
        })
    }
}

/// How the regularization strength is chosen per grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    Fixed(f64),
    /// `D * epsilon_{n,m}` with the given threshold flavor.
    Auto { d: f64, flavor: EpsilonFlavor },
}

impl EpsilonRule {
    /// Parses `"<value>"` or `"auto:<D>"`; the flavor defaults per design
    /// kind and can be overridden by the spec's `epsilon_flavor`.
    pub fn parse(s: &str, flavor: EpsilonFlavor) -> Result<Self> {
        if let Some(d) = s.strip_prefix("auto:") {
            let d: f64 = d.parse().context("epsilon rule: bad D in `auto:D`")?;
            Ok(EpsilonRule::Auto { d, flavor })
        } else {
            let v: f64 = s.parse().context("epsilon rule: bad fixed value")?;
            Ok(EpsilonRule::Fixed(v))
        }
    }

    pub fn resolve(&self, ctx: &RateContext) -> f64 {
        match *self {
            EpsilonRule::Fixed(v) => v,
            EpsilonRule::Auto { d, flavor } => d * epsilon_threshold(ctx, flavor),
        }
    }
}

pub fn default_flavor(kind: DesignKind) -> EpsilonFlavor {
    match kind {
        DesignKind::PauliUniform => EpsilonFlavor::PauliExample,
        DesignKind::MatrixCompletionUniform | DesignKind::MatrixCompletionEntry => {
            EpsilonFlavor::McExample
        }
        DesignKind::GaussianIsotropic | DesignKind::RademacherIsotropic => {
            EpsilonFlavor::SubgaussS6
        }
    }
}

/// A fully resolved experiment description. The TOML config mirrors these
/// fields under an `[experiment]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// Design kind string: mc-uniform | mc-entry | pauli | gauss | rademacher.
    pub design: String,
    /// Matrix dimension; for `pauli` a power of two.
    pub m: usize,
    /// Rank of the random true state.
    pub rank: usize,
    /// Alternative truth recipe: eigenvalue spectrum of a Gibbs Hamiltonian.
    /// The state is then `e^{-H}/tr(e^{-H})` conjugated by a seeded random
    /// basis. Empty means "use `rank`".
    pub gibbs_spectrum: Vec<f64>,
    /// Noise kind: gaussian | uniform | two-point.
    pub noise: String,
    /// Noise parameter (sigma for gaussian, the bound c otherwise).
    pub sigma: f64,
    /// Sample sizes.
    pub ns: Vec<usize>,
    /// Regularization rule: a number, or `auto:D`.
    pub epsilon: String,
    /// Threshold flavor override; empty selects the design default.
    pub epsilon_flavor: String,
    pub replications: usize,
    pub seed: u64,
    /// Output directory.
    pub out: String,
    pub metrics: Vec<String>,
    /// Sweep grids; used by the matching `--axis`.
    pub ranks: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub ms: Vec<usize>,
    /// Confidence parameter `t` for the epsilon thresholds.
    pub t_confidence: f64,
    /// Solver iteration cap.
    pub max_iter: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            design: "pauli".to_string(),
            m: 4,
            rank: 1,
            gibbs_spectrum: Vec::new(),
            noise: "gaussian".to_string(),
            sigma: 0.1,
            ns: vec![500, 1000, 2000],
            epsilon: "auto:0.03".to_string(),
            epsilon_flavor: String::new(),
            replications: 20,
            seed: 7,
            out: "out".to_string(),
            metrics: vec!["l2pi".into(), "hs".into(), "trace".into()],
            ranks: vec![1, 2, 4],
            sigmas: vec![0.05, 0.1, 0.2, 0.4],
            ms: vec![2, 4, 8],
            t_confidence: 1.0,
            max_iter: 5000,
        }
    }
}

/// Top-level config document.
#[derive(Debug, Default, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    experiment: ExperimentSpec,
}

impl ExperimentSpec {
    pub fn from_config_file(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {path}"))?;
        let cfg: ConfigFile = toml::from_str(&text).context("parsing config file")?;
        Ok(cfg.experiment)
    }

    pub fn design_kind(&self) -> Result<DesignKind> {
        self.design
            .parse::<DesignKind>()
            .map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn distribution(&self) -> Result<DesignDistribution> {
        let kind = self.design_kind()?;
        let dist = match kind {
            DesignKind::PauliUniform => {
                if !self.m.is_power_of_two() || self.m < 2 {
                    bail!("pauli design requires m to be a power of two, got {}", self.m);
                }
                DesignDistribution::pauli(self.m.trailing_zeros() as usize)
            }
            other => DesignDistribution::from_kind(other, self.m),
        };
        Ok(dist)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        Ok(match self.noise.as_str() {
            "gaussian" => NoiseModel::Gaussian { sigma: self.sigma },
            "uniform" => NoiseModel::BoundedUniform { c: self.sigma },
            "two-point" => NoiseModel::TwoPoint { c: self.sigma },
            other => bail!("unknown noise kind `{other}`"),
        })
    }

    pub fn epsilon_rule(&self) -> Result<EpsilonRule> {
        let flavor = if self.epsilon_flavor.is_empty() {
            default_flavor(self.design_kind()?)
        } else {
            self.epsilon_flavor
                .parse::<EpsilonFlavor>()
                .map_err(|e| anyhow::anyhow!("{e}"))?
        };
        EpsilonRule::parse(&self.epsilon, flavor)
    }

    pub fn metric_list(&self) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for name in &self.metrics {
            out.push(Metric::parse(name)?);
        }
        if out.is_empty() {
            bail!("metrics list must not be empty");
        }
        Ok(out)
    }

    /// Rate context for the epsilon rule at sample size `n`.
    pub fn rate_context(&self, n: usize, sigma: f64) -> Result<RateContext> {
        let noise = match self.noise.as_str() {
            "gaussian" => NoiseModel::Gaussian { sigma },
            "uniform" => NoiseModel::BoundedUniform { c: sigma },
            "two-point" => NoiseModel::TwoPoint { c: sigma },
            other => bail!("unknown noise kind `{other}`"),
        };
        let nc = noise_constants(&noise);
        let mut ctx = RateContext::new(self.m, n, self.t_confidence);
        ctx.sigma_xi = nc.sigma_xi;
        ctx.c_xi = if nc.c_xi_bound.is_finite() {
            nc.c_xi_bound
        } else {
            nc.c_xi_subgauss
        };
        ctx.psi1_xi = nc.psi1;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            bail!("replications must be >= 1");
        }
        if self.ns.is_empty() || self.ns.contains(&0) {
            bail!("all n values must be >= 1");
        }
        self.distribution()?;
        self.noise_model()?;
        self.epsilon_rule()?;
        self.metric_list()?;
        Ok(())
    }

    /// Stable hash of the canonical serialized spec, echoed into results.
    /// The output directory is presentation, not experiment identity, and
    /// is excluded so reruns into different directories compare equal.
    pub fn spec_hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.out = String::new();
        let text = toml::to_string(&canonical).unwrap_or_default();
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in text.as_bytes() {
            h ^= *byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_validates() {
        ExperimentSpec::default().validate().unwrap();
    }

    #[test]
    fn epsilon_rule_parses_both_forms() {
        let fixed = EpsilonRule::parse("0.01", EpsilonFlavor::PauliExample).unwrap();
        assert_eq!(fixed, EpsilonRule::Fixed(0.01));
        let auto = EpsilonRule::parse("auto:2.5", EpsilonFlavor::PauliExample).unwrap();
        match auto {
            EpsilonRule::Auto { d, flavor } => {
                assert_eq!(d, 2.5);
                assert_eq!(flavor, EpsilonFlavor::PauliExample);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(EpsilonRule::parse("auto:x", EpsilonFlavor::PauliExample).is_err());
    }

    #[test]
    fn config_roundtrip_through_toml() {
        let spec = ExperimentSpec {
            design: "mc-uniform".into(),
            m: 4,
            ns: vec![16],
            epsilon: "1e-8".into(),
            ..ExperimentSpec::default()
        };
        let text = format!(
            "[experiment]\n{}",
            toml::to_string(&spec).unwrap()
        );
        let dir = std::env::temp_dir().join("qtomo-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.toml");
        std::fs::write(&path, text).unwrap();
        let loaded = ExperimentSpec::from_config_file(path.to_str().unwrap()).unwrap();
        assert_eq!(loaded.design, "mc-uniform");
        assert_eq!(loaded.ns, vec![16]);
        assert_eq!(loaded.spec_hash(), spec.spec_hash());
    }

    #[test]
    fn pauli_requires_power_of_two() {
        let spec = ExperimentSpec {
            design: "pauli".into(),
            m: 6,
            ..ExperimentSpec::default()
        };
        assert!(spec.distribution().is_err());
    }

    #[test]
    fn rate_context_uses_noise_constants() {
        let spec = ExperimentSpec::default();
        let ctx = spec.rate_context(500, 0.1).unwrap();
        assert!((ctx.sigma_xi - 0.1).abs() < 1e-12);
        // Gaussian noise: c_xi falls back to the psi2-based constant.
        assert!(ctx.c_xi > 0.0 && ctx.c_xi.is_finite());
    }
}
