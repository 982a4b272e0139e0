//! Canned small-n configurations.

use anyhow::bail;
use monopriv::model::all_bit_vectors;
use monopriv::{InputProfile, NeighborRelation, DEFAULT_MASS_TOL};

use crate::config::{
    AccuracyModeConfig, CheckConfig, LossConfig, MechanismConfig, OutputConfig, PlayerSelect,
    ProfilesConfig, RunConfig,
};

pub const DEMOS: [&str; 5] = ["thm_mon", "thm_imp", "thm_monimp", "tradeoff", "subsample"];

fn base(mechanism: MechanismConfig, loss_model: Option<LossConfig>) -> RunConfig {
    RunConfig {
        mechanism,
        loss_model,
        profiles: ProfilesConfig::default(),
        checks: Vec::new(),
        seed: None,
        mass_tol: DEFAULT_MASS_TOL,
        output: OutputConfig::default(),
    }
}

pub fn demo_config(name: &str) -> anyhow::Result<RunConfig> {
    let cfg = match name {
        // n = 4, B = 8, eps = 0.5: theta = 2, two players above it
        "thm_mon" => {
            let mut cfg = base(
                MechanismConfig::Alg1 {
                    budget: 8.0,
                    epsilon: 0.5,
                    n: 4,
                },
                Some(LossConfig::TightDp {
                    relation: NeighborRelation::Monotonic,
                }),
            );
            let mut profiles = Vec::new();
            for bits in all_bit_vectors(4) {
                for vals in [[0.0, 1.0, 4.0, 40.0], [2.0, 0.5, 20.0, 3.0]] {
                    profiles.push(InputProfile::from_parts(&bits, &vals)?);
                }
            }
            cfg.profiles = ProfilesConfig::Inline(profiles);
            cfg.checks = vec![
                CheckConfig::Truthful {
                    players: PlayerSelect::Eligible,
                    extra_deviations: Vec::new(),
                },
                CheckConfig::Ir,
                CheckConfig::Accuracy {
                    alpha: 1.0,
                    alpha_prime: Some(0.5),
                    beta: 2.0 * (-1.0f64).exp(),
                    mode: AccuracyModeConfig::Exact,
                },
            ];
            cfg
        }
        "thm_imp" => {
            let mut cfg = base(
                MechanismConfig::ExactSum { flat_pay: 0.0 },
                Some(LossConfig::IncreasingThreshold {
                    relation: NeighborRelation::General,
                    delta: 1.0 / 12.0,
                    threshold: None,
                }),
            );
            cfg.checks = vec![CheckConfig::AuditGeneral {
                n: Some(2),
                delta: None,
            }];
            cfg
        }
        "thm_monimp" => {
            let mut cfg = base(
                MechanismConfig::Alg1 {
                    budget: 4.0,
                    epsilon: std::f64::consts::LN_2,
                    n: 2,
                },
                Some(LossConfig::IncreasingThreshold {
                    relation: NeighborRelation::Monotonic,
                    delta: 1.0 / 6.0,
                    threshold: None,
                }),
            );
            cfg.checks = vec![CheckConfig::AuditMonotonic {
                n: None,
                delta: None,
            }];
            cfg
        }
        "tradeoff" => {
            let mut cfg = base(
                MechanismConfig::Alg1 {
                    budget: 8.0,
                    epsilon: 0.5,
                    n: 8,
                },
                Some(LossConfig::GrowingSd),
            );
            cfg.checks = vec![CheckConfig::AuditTradeoff {
                n: None,
                tau: 4.0,
                gamma: 0.125,
                eta: 0.25,
                beta: 0.2,
                max_pay: 1.0,
            }];
            cfg
        }
        // n = 10, k = 5, eta = 0.4: bound 2 e^{-eta^2 k}
        "subsample" => {
            let n = 10;
            let mut cfg = base(
                MechanismConfig::Subsample {
                    flat_pay: 1.0,
                    sample_size: 5,
                    distinguishability_budget: None,
                },
                None,
            );
            let zeros = vec![0.0; n];
            let profiles = (0..=n)
                .map(|ones| {
                    let bits: Vec<u8> = (0..n).map(|j| (j < ones) as u8).collect();
                    InputProfile::from_parts(&bits, &zeros)
                })
                .collect::<monopriv::Result<Vec<_>>>()?;
            cfg.profiles = ProfilesConfig::Inline(profiles);
            cfg.checks = vec![CheckConfig::Accuracy {
                alpha: 0.4,
                alpha_prime: None,
                beta: 2.0 * (-0.4f64 * 0.4 * 5.0).exp(),
                mode: AccuracyModeConfig::Exact,
            }];
            cfg
        }
        other => bail!(
            "unknown demo {other:?}; expected one of {}",
            DEMOS.join(", ")
        ),
    };
    Ok(cfg)
}
