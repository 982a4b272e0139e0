//! Run configuration, read from JSON or TOML.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use monopriv::loss::{increasing_threshold_model, ThresholdFn};
use monopriv::{
    Alg1, Alg1Prime, BudgetParams, ConstantOutput, ExactSum, InputProfile, LossModel, Mechanism,
    NeighborRelation, PayDeclared, Subsample, SubsampleParams, DEFAULT_MASS_TOL,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mechanism: MechanismConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_model: Option<LossConfig>,
    #[serde(default)]
    pub profiles: ProfilesConfig,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_mass_tol")]
    pub mass_tol: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_mass_tol() -> f64 {
    DEFAULT_MASS_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismConfig {
    Alg1 {
        budget: f64,
        epsilon: f64,
        n: usize,
    },
    Alg1Prime {
        budget: f64,
        epsilon: f64,
        n: usize,
    },
    Subsample {
        #[serde(default)]
        flat_pay: f64,
        sample_size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distinguishability_budget: Option<f64>,
    },
    PayDeclared {
        epsilon: f64,
    },
    ExactSum {
        #[serde(default)]
        flat_pay: f64,
    },
    Constant {
        #[serde(default)]
        value: i64,
        #[serde(default)]
        flat_pay: f64,
    },
}

impl MechanismConfig {
    pub fn build(&self) -> anyhow::Result<Box<dyn Mechanism>> {
        let m: Box<dyn Mechanism> = match *self {
            MechanismConfig::Alg1 { budget, epsilon, n } => {
                Box::new(Alg1::new(BudgetParams::new(budget, epsilon, n)?)?)
            }
            MechanismConfig::Alg1Prime { budget, epsilon, n } => {
                Box::new(Alg1Prime::new(BudgetParams::new(budget, epsilon, n)?)?)
            }
            MechanismConfig::Subsample {
                flat_pay,
                sample_size,
                distinguishability_budget,
            } => Box::new(Subsample::new(SubsampleParams {
                flat_pay,
                sample_size,
                distinguishability_budget,
            })?),
            MechanismConfig::PayDeclared { epsilon } => Box::new(PayDeclared::new(epsilon)?),
            MechanismConfig::ExactSum { flat_pay } => {
                if !(flat_pay.is_finite() && flat_pay >= 0.0) {
                    bail!("flat_pay must be finite and >= 0, got {flat_pay}");
                }
                Box::new(ExactSum { flat_pay })
            }
            MechanismConfig::Constant { value, flat_pay } => {
                if !(flat_pay.is_finite() && flat_pay >= 0.0) {
                    bail!("flat_pay must be finite and >= 0, got {flat_pay}");
                }
                Box::new(ConstantOutput { value, flat_pay })
            }
        };
        Ok(m)
    }
}

/// `T(l, .) = scale * l + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineThreshold {
    pub scale: f64,
    pub offset: f64,
}

impl AffineThreshold {
    fn build(threshold: Option<AffineThreshold>) -> ThresholdFn {
        threshold
            .map(|t| ThresholdFn::affine(t.scale, t.offset))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Zero,
    TightDp {
        relation: NeighborRelation,
    },
    GrowingSd,
    IncreasingThreshold {
        relation: NeighborRelation,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<AffineThreshold>,
    },
    DistinguishabilityCapped {
        c: f64,
        cap: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<AffineThreshold>,
    },
}

impl LossConfig {
    pub fn build(&self) -> anyhow::Result<LossModel> {
        Ok(match *self {
            LossConfig::Zero => LossModel::zero(),
            LossConfig::TightDp { relation } => LossModel::tight_dp(relation),
            LossConfig::GrowingSd => LossModel::growing_sd(),
            LossConfig::IncreasingThreshold {
                relation,
                delta,
                threshold,
            } => increasing_threshold_model(AffineThreshold::build(threshold), delta, relation)?,
            LossConfig::DistinguishabilityCapped { c, cap, threshold } => {
                LossModel::distinguishability_capped(c, cap, AffineThreshold::build(threshold))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfilesConfig {
    Inline(Vec<InputProfile>),
    File { path: PathBuf },
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        ProfilesConfig::Inline(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    profiles: Vec<InputProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlayerSelect {
    #[default]
    All,
    /// Players the mechanism claims to be truthful for.
    Eligible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AccuracyModeConfig {
    #[default]
    Exact,
    MonteCarlo {
        trials: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    Ir,
    Truthful {
        #[serde(default)]
        players: PlayerSelect,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        extra_deviations: Vec<f64>,
    },
    Accuracy {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_prime: Option<f64>,
        beta: f64,
        #[serde(default)]
        mode: AccuracyModeConfig,
    },
    Dp {
        epsilon: f64,
    },
    Distinguishability {
        delta: f64,
        relation: NeighborRelation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        player: Option<usize>,
        /// Expected outcome; without it the check only fails to settle.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<bool>,
    },
    AuditGeneral {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    AuditMonotonic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    AuditTradeoff {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        tau: f64,
        gamma: f64,
        eta: f64,
        beta: f64,
        max_pay: f64,
    },
}

impl CheckConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CheckConfig::Ir => "ir",
            CheckConfig::Truthful { .. } => "truthful",
            CheckConfig::Accuracy { .. } => "accuracy",
            CheckConfig::Dp { .. } => "dp",
            CheckConfig::Distinguishability { .. } => "distinguishability",
            CheckConfig::AuditGeneral { .. } => "audit_general",
            CheckConfig::AuditMonotonic { .. } => "audit_monotonic",
            CheckConfig::AuditTradeoff { .. } => "audit_tradeoff",
        }
    }

    fn needs_loss_model(&self) -> bool {
        matches!(
            self,
            CheckConfig::Ir
                | CheckConfig::Truthful { .. }
                | CheckConfig::AuditGeneral { .. }
                | CheckConfig::AuditMonotonic { .. }
                | CheckConfig::AuditTradeoff { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl Format {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(Format::Json),
            Some("toml") => Ok(Format::Toml),
            other => bail!(
                "{}: unsupported config extension {:?} (use .json or .toml)",
                path.display(),
                other.unwrap_or("")
            ),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, format: Format) -> anyhow::Result<Self> {
        match format {
            Format::Json => serde_json::from_str(text).map_err(|e| anyhow!("{e}")),
            Format::Toml => toml::from_str(text).map_err(|e| anyhow!("{e}")),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let format = Format::from_path(path)?;
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg =
            Self::parse(&text, format).with_context(|| format!("parsing {}", path.display()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_string(&self, format: Format) -> anyhow::Result<String> {
        Ok(match format {
            Format::Json => serde_json::to_string_pretty(self)?,
            Format::Toml => toml::to_string(self)?,
        })
    }

    /// Makes relative profile paths relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        if let ProfilesConfig::File { path } = &mut self.profiles {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn load_profiles(&self) -> anyhow::Result<Vec<InputProfile>> {
        match &self.profiles {
            ProfilesConfig::Inline(p) => Ok(p.clone()),
            ProfilesConfig::File { path } => {
                let format = Format::from_path(path)?;
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("profiles: reading {}", path.display()))?;
                let parsed = match format {
                    Format::Json => {
                        serde_json::from_str::<Vec<InputProfile>>(&text).map_err(|e| anyhow!("{e}"))
                    }
                    Format::Toml => toml::from_str::<ProfileFile>(&text)
                        .map(|f| f.profiles)
                        .map_err(|e| anyhow!("{e}")),
                };
                parsed.with_context(|| format!("profiles: parsing {}", path.display()))
            }
        }
    }

    /// Checks that cannot be caught by deserialization alone.
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.mass_tol > 0.0 && self.mass_tol < 1.0) {
            bail!("mass_tol: must lie in (0, 1), got {}", self.mass_tol);
        }
        self.mechanism.build().context("mechanism")?;
        if let Some(l) = &self.loss_model {
            l.build().context("loss_model")?;
        }
        for (k, c) in self.checks.iter().enumerate() {
            if c.needs_loss_model() && self.loss_model.is_none() {
                bail!("checks[{k}] ({}): needs a loss_model", c.name());
            }
            if let CheckConfig::Accuracy {
                mode: AccuracyModeConfig::MonteCarlo { trials },
                ..
            } = c
            {
                if self.seed.is_none() {
                    bail!("checks[{k}] (accuracy): monte_carlo mode needs a seed");
                }
                if *trials == 0 {
                    bail!("checks[{k}] (accuracy): trials must be >= 1");
                }
            }
        }
        if let ProfilesConfig::File { path } = &self.profiles {
            if !path.exists() {
                bail!("profiles: file {} does not exist", path.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
seed = 7
mass_tol = 1e-12

[mechanism]
kind = "alg1"
budget = 8.0
epsilon = 0.5
n = 2

[loss_model]
kind = "tight_dp"
relation = "monotonic"

[[profiles]]
bits = [1, 0]
valuations = [0.5, 3.0]

[[checks]]
kind = "ir"

[[checks]]
kind = "accuracy"
alpha = 0.5
beta = 0.9
mode = { kind = "monte_carlo", trials = 100 }
"#;

    #[test]
    fn toml_and_json_round_trip() {
        let cfg = RunConfig::parse(TOML, Format::Toml).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.load_profiles().unwrap().len(), 1);
        for f in [Format::Json, Format::Toml] {
            let again = RunConfig::parse(&cfg.to_string(f).unwrap(), f).unwrap();
            assert_eq!(again, cfg);
        }
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = TOML.replace("budget = 8.0", "budgt = 8.0");
        let e = RunConfig::parse(&bad, Format::Toml)
            .unwrap_err()
            .to_string();
        assert!(e.contains("budgt") || e.contains("budget"), "{e}");
        assert!(e.contains("line"), "{e}");

        let e = RunConfig::parse("{\"mechanism\": {\"kind\": \"alg1\"}}", Format::Json)
            .unwrap_err()
            .to_string();
        assert!(e.contains("budget") && e.contains("line"), "{e}");
    }

    #[test]
    fn monte_carlo_needs_seed() {
        let cfg = RunConfig::parse(&TOML.replace("seed = 7", ""), Format::Toml).unwrap();
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("seed"), "{e}");
    }

    #[test]
    fn invalid_mechanism_params_are_reported() {
        let cfg = RunConfig::parse(
            &TOML.replace("epsilon = 0.5", "epsilon = -1.0"),
            Format::Toml,
        )
        .unwrap();
        let e = format!("{:#}", cfg.validate().unwrap_err());
        assert!(e.contains("mechanism") && e.contains("epsilon"), "{e}");
    }
}
