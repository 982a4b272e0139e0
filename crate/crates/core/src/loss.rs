//! Privacy-loss families and their expectations.
//!
//! A loss model fixes the per-outcome loss `lambda_i(b, v, v'_i, s, p_{-i})`
//! of player `i`; [`loss_expectation`] averages it over the count law the
//! mechanism produces under player `i`'s declaration. Player `i`'s own
//! payment is never part of the outcome the loss sees.
//!
//! Every shipped model multiplies by the player's true valuation, so a
//! player with valuation zero has zero loss whatever they declare.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{CountDistribution, Interval};
use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::model::{i_neighbor_profiles, InputProfile, NeighborRelation};
use crate::verify::{max_neighbor_distance, Distinguishability};

type ThresholdClosure = dyn Fn(f64, &[u8], &[f64]) -> f64 + Send + Sync;

/// Threshold function `T_i(l, b, v_{-i})` of an increasing loss model.
#[derive(Clone)]
pub struct ThresholdFn {
    f: Arc<ThresholdClosure>,
    label: String,
}

impl ThresholdFn {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[u8], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    /// `T(l, .) = scale * l + offset`.
    pub fn affine(scale: f64, offset: f64) -> Self {
        Self::new(format!("{scale}*l + {offset}"), move |l, _, _| {
            scale * l + offset
        })
    }

    pub fn eval(&self, level: f64, bits: &[u8], others: &[f64]) -> f64 {
        (self.f)(level, bits, others)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl Default for ThresholdFn {
    /// `T(l, .) = l + 1`.
    fn default() -> Self {
        Self::affine(1.0, 1.0)
    }
}

impl std::fmt::Debug for ThresholdFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ThresholdFn({})", self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// No loss at all.
    Zero,
    /// The extremal loss bounded by differential privacy: the player's
    /// valuation times the worst log-likelihood ratio against a neighbor
    /// type, per outcome.
    TightDp { relation: NeighborRelation },
    /// Valuation times the largest total-variation distance to a monotonic
    /// neighbor of the declared input.
    GrowingSd,
    /// Valuation when the declared input is `delta`-distinguishable for the
    /// player, zero otherwise.
    IncreasingThreshold {
        relation: NeighborRelation,
        delta: f64,
    },
    /// Valuation when the declared input is `c/n`-distinguishable, otherwise
    /// capped at `cap`. Not increasing for any smaller `delta`.
    DistinguishabilityCapped { c: f64, cap: f64 },
}

/// Structural properties a loss model has by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LossFlags {
    pub respects_indifference: bool,
    pub respects_identical_output_dists: bool,
    pub bounded_by_dp: bool,
    pub bounded_by_dp_monotonic: bool,
    pub growing_with_sd: bool,
    pub increasing_for_delta: bool,
}

#[derive(Debug, Clone)]
pub struct LossModel {
    kind: LossKind,
    threshold: Option<ThresholdFn>,
}

impl LossModel {
    pub fn zero() -> Self {
        Self {
            kind: LossKind::Zero,
            threshold: None,
        }
    }

    pub fn tight_dp(relation: NeighborRelation) -> Self {
        Self {
            kind: LossKind::TightDp { relation },
            threshold: None,
        }
    }

    pub fn growing_sd() -> Self {
        Self {
            kind: LossKind::GrowingSd,
            threshold: None,
        }
    }

    /// Capped model: loss at most `cap` unless the input is
    /// `c/n`-distinguishable. It still advertises `threshold` so audits can
    /// test whether it actually behaves as an increasing model.
    pub fn distinguishability_capped(c: f64, cap: f64, threshold: ThresholdFn) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::param(
                "c",
                format!("must be finite and > 0, got {c}"),
            ));
        }
        if !(cap.is_finite() && cap >= 0.0) {
            return Err(Error::param(
                "cap",
                format!("must be finite and >= 0, got {cap}"),
            ));
        }
        Ok(Self {
            kind: LossKind::DistinguishabilityCapped { c, cap },
            threshold: Some(threshold),
        })
    }

    /// Builds a model from its kind; increasing and capped models get the
    /// default threshold `l + 1` unless one is supplied.
    pub fn from_kind(kind: LossKind, threshold: Option<ThresholdFn>) -> Result<Self> {
        match kind {
            LossKind::IncreasingThreshold { relation, delta } => {
                increasing_threshold_model(threshold.unwrap_or_default(), delta, relation)
            }
            LossKind::DistinguishabilityCapped { c, cap } => {
                Self::distinguishability_capped(c, cap, threshold.unwrap_or_default())
            }
            _ => Ok(Self {
                kind,
                threshold: None,
            }),
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn threshold(&self) -> Option<&ThresholdFn> {
        self.threshold.as_ref()
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::Zero => "zero",
            LossKind::TightDp {
                relation: NeighborRelation::General,
            } => "dp_bounded_general",
            LossKind::TightDp {
                relation: NeighborRelation::Monotonic,
            } => "dp_bounded_monotonic",
            LossKind::GrowingSd => "growing_sd_monotonic",
            LossKind::IncreasingThreshold { .. } => "increasing_with_threshold",
            LossKind::DistinguishabilityCapped { .. } => "distinguishability_capped",
        }
    }

    pub fn flags(&self) -> LossFlags {
        let base = LossFlags {
            respects_indifference: true,
            respects_identical_output_dists: true,
            ..LossFlags::default()
        };
        match self.kind {
            LossKind::Zero => LossFlags {
                bounded_by_dp: true,
                bounded_by_dp_monotonic: true,
                ..base
            },
            LossKind::TightDp {
                relation: NeighborRelation::General,
            } => LossFlags {
                bounded_by_dp: true,
                ..base
            },
            LossKind::TightDp {
                relation: NeighborRelation::Monotonic,
            } => LossFlags {
                bounded_by_dp_monotonic: true,
                ..base
            },
            // the monotonic neighbor set moves with the declared valuation
            LossKind::GrowingSd => LossFlags {
                growing_with_sd: true,
                respects_identical_output_dists: false,
                ..base
            },
            LossKind::IncreasingThreshold { relation, .. } => LossFlags {
                increasing_for_delta: true,
                respects_identical_output_dists: relation == NeighborRelation::General,
                ..base
            },
            LossKind::DistinguishabilityCapped { .. } => base,
        }
    }

    /// Evaluator for player `i` with true input `x`, reusable across
    /// declarations.
    pub fn evaluator<'a>(
        &'a self,
        mech: &'a dyn Mechanism,
        x: &'a InputProfile,
        i: usize,
        mass_tol: f64,
    ) -> Result<LossEvaluator<'a>> {
        let valuation = x.player(i)?.valuation;
        let tight = match self.kind {
            LossKind::TightDp { relation } if valuation != 0.0 => {
                Some(TightDp::new(mech, x, i, relation, mass_tol)?)
            }
            _ => None,
        };
        Ok(LossEvaluator {
            model: self,
            mech,
            x,
            i,
            valuation,
            mass_tol,
            tight,
        })
    }
}

/// The increasing model used by the impossibility audits.
///
/// Loss is the (non-negative part of the) valuation when the declared input
/// is `delta`-distinguishable for the player under `relation`, and zero
/// otherwise, so any valuation at or above `T(l, .)` exceeds `l` once
/// `T(l, .) > l`.
pub fn increasing_threshold_model(
    threshold: ThresholdFn,
    delta: f64,
    relation: NeighborRelation,
) -> Result<LossModel> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, 1], got {delta}"),
        ));
    }
    Ok(LossModel {
        kind: LossKind::IncreasingThreshold { relation, delta },
        threshold: Some(threshold),
    })
}

/// Per-outcome tight loss data for one player and true input.
struct TightDp {
    truth: CountDistribution,
    neighbors: Vec<CountDistribution>,
    /// General sups range over the player's own type too, contributing 0.
    floor_zero: bool,
}

impl TightDp {
    fn new(
        mech: &dyn Mechanism,
        x: &InputProfile,
        i: usize,
        relation: NeighborRelation,
        mass_tol: f64,
    ) -> Result<Self> {
        if !mech.others_pay_independent() {
            return Err(Error::Precondition(format!(
                "{}: payments to other players depend on player {i}'s type",
                mech.name()
            )));
        }
        let truth = mech.output_dist(x, mass_tol)?;
        let candidates = mech.candidate_types(x, i)?;
        let mut neighbors: Vec<CountDistribution> = Vec::new();
        for y in i_neighbor_profiles(x, i, relation, &candidates)? {
            let law = mech.output_dist(&y, mass_tol)?;
            if !neighbors.iter().any(|d| d.same_law(&law)) {
                neighbors.push(law);
            }
        }
        Ok(Self {
            truth,
            neighbors,
            floor_zero: relation == NeighborRelation::General,
        })
    }

    /// Worst log-ratio at outcome `s`, before scaling by the valuation.
    fn log_ratio(&self, s: i64) -> Result<f64> {
        let unknown = || Error::Precondition(format!("count law not known at {s}"));
        let num = self.truth.ln_pmf(s).ok_or_else(unknown)?;
        let mut best = if self.floor_zero || self.neighbors.is_empty() {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        for d in &self.neighbors {
            let den = d.ln_pmf(s).ok_or_else(unknown)?;
            let r = match (num == f64::NEG_INFINITY, den == f64::NEG_INFINITY) {
                (true, true) => 0.0,
                (true, false) => f64::NEG_INFINITY,
                (false, true) => f64::INFINITY,
                (false, false) => num - den,
            };
            best = best.max(r);
        }
        Ok(best)
    }
}

fn scale_loss(valuation: f64, r: f64) -> f64 {
    if valuation == 0.0 {
        0.0
    } else {
        valuation * r
    }
}

/// Loss evaluation for one player against one true input.
pub struct LossEvaluator<'a> {
    model: &'a LossModel,
    mech: &'a dyn Mechanism,
    x: &'a InputProfile,
    i: usize,
    valuation: f64,
    mass_tol: f64,
    tight: Option<TightDp>,
}

impl LossEvaluator<'_> {
    /// Per-outcome loss at count `s` when the player declares `declared`.
    /// Only meaningful for per-outcome models; the distributional models
    /// return their (outcome-independent) expectation midpoint.
    pub fn per_outcome(&self, s: i64) -> Result<f64> {
        match (&self.tight, self.model.kind) {
            (_, LossKind::Zero) => Ok(0.0),
            (None, LossKind::TightDp { .. }) => Ok(0.0),
            (Some(t), _) => Ok(scale_loss(self.valuation, t.log_ratio(s)?)),
            _ => Err(Error::Precondition(format!(
                "{} has no per-outcome form",
                self.model.name()
            ))),
        }
    }

    /// Certified enclosure of `Loss_i(b, v, declared)`.
    pub fn expectation(&self, declared: f64) -> Result<Interval> {
        let v = self.valuation;
        if v == 0.0 {
            return Ok(Interval::zero());
        }
        let y = self.x.with_valuation(self.i, declared)?;
        let v_plus = v.max(0.0);
        match self.model.kind {
            LossKind::Zero => Ok(Interval::zero()),
            LossKind::TightDp { .. } => {
                let law = self.mech.output_dist(&y, self.mass_tol)?;
                self.tight_expectation(&law)
            }
            LossKind::GrowingSd => {
                let sup = max_neighbor_distance(
                    self.mech,
                    &y,
                    self.i,
                    NeighborRelation::Monotonic,
                    self.mass_tol,
                )?;
                Ok(sup.sup.scale(v))
            }
            LossKind::IncreasingThreshold { relation, delta } => {
                let sup = max_neighbor_distance(self.mech, &y, self.i, relation, self.mass_tol)?;
                Ok(match sup.classify(delta) {
                    Distinguishability::Distinguishable => Interval::point(v_plus),
                    Distinguishability::NotDistinguishable => Interval::zero(),
                    Distinguishability::Inconclusive => Interval::new(0.0, v_plus),
                })
            }
            LossKind::DistinguishabilityCapped { c, cap } => {
                let delta = c / self.x.len() as f64;
                let sup = max_neighbor_distance(
                    self.mech,
                    &y,
                    self.i,
                    NeighborRelation::General,
                    self.mass_tol,
                )?;
                let capped = v_plus.min(cap);
                Ok(match sup.classify(delta) {
                    Distinguishability::Distinguishable => Interval::point(v_plus),
                    Distinguishability::NotDistinguishable => Interval::point(capped),
                    Distinguishability::Inconclusive => Interval::new(capped, v_plus),
                })
            }
        }
    }

    fn tight_expectation(&self, law: &CountDistribution) -> Result<Interval> {
        let Some(tight) = &self.tight else {
            return Ok(Interval::zero());
        };
        let mut sum = 0.0;
        let mut sup = 0.0f64;
        let (mut pos_inf, mut neg_inf) = (false, false);
        for (&s, &p) in law.atoms() {
            if p == 0.0 {
                continue;
            }
            let loss = scale_loss(self.valuation, tight.log_ratio(s)?);
            if loss == f64::INFINITY {
                pos_inf = true;
            } else if loss == f64::NEG_INFINITY {
                neg_inf = true;
            } else {
                sum += p * loss;
                sup = sup.max(loss.abs());
            }
        }
        match (pos_inf, neg_inf) {
            (true, true) => Err(Error::UnboundedLoss(format!(
                "player {} loss is +inf and -inf on different outcomes",
                self.i
            ))),
            (true, false) => Ok(Interval::point(f64::INFINITY)),
            (false, true) => Ok(Interval::point(f64::NEG_INFINITY)),
            (false, false) => {
                let slack = law.truncation_mass() * sup;
                Ok(Interval::new(sum - slack, sum + slack))
            }
        }
    }
}

/// Certified enclosure of the expected loss of player `i` declaring
/// `declared` on true input `x`.
pub fn loss_expectation(
    model: &LossModel,
    mech: &dyn Mechanism,
    x: &InputProfile,
    i: usize,
    declared: f64,
    mass_tol: f64,
) -> Result<Interval> {
    model.evaluator(mech, x, i, mass_tol)?.expectation(declared)
}

/// Tight loss of player `i` at outcome `s` on true input `x`.
pub fn tight_dp_loss(
    mech: &dyn Mechanism,
    relation: NeighborRelation,
    x: &InputProfile,
    i: usize,
    s: i64,
    mass_tol: f64,
) -> Result<f64> {
    let model = LossModel::tight_dp(relation);
    model.evaluator(mech, x, i, mass_tol)?.per_outcome(s)
}

/// `v_i` times the largest certified-lower-bound distance to a monotonic
/// neighbor: a lower bound on any loss growing with statistical distance.
pub fn growing_sd_loss(
    mech: &dyn Mechanism,
    x: &InputProfile,
    i: usize,
    mass_tol: f64,
) -> Result<f64> {
    let v = x.player(i)?.valuation;
    if v == 0.0 {
        return Ok(0.0);
    }
    let sup = max_neighbor_distance(mech, x, i, NeighborRelation::Monotonic, mass_tol)?;
    Ok(v * sup.sup.lo)
}
