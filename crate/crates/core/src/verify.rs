//! Interval-sound checkers.
//!
//! Each checker compares certified enclosures and only answers `Pass` or
//! `Fail` when the enclosure lies entirely on one side of the criterion;
//! otherwise it answers `Inconclusive` and, where it can, says how much
//! tighter the truncation has to be.

use serde::{Deserialize, Serialize};

use crate::dist::{dp_level, statistical_distance, CountDistribution, Interval, DP_MASS_TOL};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::mechanism::{dedup_f64, Mechanism};
use crate::model::{i_neighbor_profiles, InputProfile, NeighborRelation, PlayerType};
use crate::par::{map_range, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// `Pass` iff `lhs >= rhs` for every point of both enclosures, `Fail`
    /// iff it holds for none.
    pub fn at_least(lhs: Interval, rhs: Interval) -> Verdict {
        if lhs.lo >= rhs.hi {
            Verdict::Pass
        } else if lhs.hi < rhs.lo {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// Fail beats inconclusive beats pass.
    pub fn worst(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distinguishability {
    Distinguishable,
    NotDistinguishable,
    Inconclusive,
}

/// Largest distance from an input's count law to its admissible
/// i-neighbors' laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSup {
    /// `[max lo, max hi]` over the neighbors.
    pub sup: Interval,
    /// Neighbor type attaining `max lo`.
    pub witness: Option<(bool, f64)>,
    pub witness_distance: Interval,
}

impl NeighborSup {
    pub fn classify(&self, delta: f64) -> Distinguishability {
        if self.sup.lo >= delta {
            Distinguishability::Distinguishable
        } else if self.sup.hi < delta {
            Distinguishability::NotDistinguishable
        } else {
            Distinguishability::Inconclusive
        }
    }

    pub fn witness_type(&self) -> Option<PlayerType> {
        self.witness
            .map(|(bit, valuation)| PlayerType { bit, valuation })
    }
}

/// Laws of every admissible i-neighbor over the mechanism's candidate set,
/// paired with the replacing type.
pub fn neighbor_laws(
    mech: &dyn Mechanism,
    x: &InputProfile,
    i: usize,
    relation: NeighborRelation,
    mass_tol: f64,
) -> Result<Vec<(PlayerType, CountDistribution)>> {
    let candidates = mech.candidate_types(x, i)?;
    i_neighbor_profiles(x, i, relation, &candidates)?
        .into_iter()
        .map(|y| {
            let t = y.player(i)?;
            Ok((t, mech.output_dist(&y, mass_tol)?))
        })
        .collect()
}

pub fn max_neighbor_distance(
    mech: &dyn Mechanism,
    x: &InputProfile,
    i: usize,
    relation: NeighborRelation,
    mass_tol: f64,
) -> Result<NeighborSup> {
    let own = mech.output_dist(x, mass_tol)?;
    let mut out = NeighborSup {
        sup: Interval::zero(),
        witness: None,
        witness_distance: Interval::zero(),
    };
    for (t, law) in neighbor_laws(mech, x, i, relation, mass_tol)? {
        let d = statistical_distance(&own, &law);
        if out.witness.is_none() || d.lo > out.witness_distance.lo {
            out.witness = Some((t.bit, t.valuation));
            out.witness_distance = d;
        }
        out.sup = Interval::new(out.sup.lo.max(d.lo), out.sup.hi.max(d.hi));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrResult {
    pub player: usize,
    pub verdict: Verdict,
    pub pay: f64,
    pub loss: Interval,
    /// `pay - loss.hi`.
    pub margin: f64,
}

/// Individual rationality for every player of `x`: expected pay covers the
/// expected loss under a truthful declaration.
pub fn check_ir(
    mech: &dyn Mechanism,
    model: &LossModel,
    x: &InputProfile,
    mass_tol: f64,
) -> Result<Vec<IrResult>> {
    (0..x.len())
        .map(|i| check_ir_player(mech, model, x, i, mass_tol))
        .collect()
}

pub fn check_ir_player(
    mech: &dyn Mechanism,
    model: &LossModel,
    x: &InputProfile,
    i: usize,
    mass_tol: f64,
) -> Result<IrResult> {
    let v = x.player(i)?.valuation;
    let pay = mech.expected_pay(x, i)?;
    let loss = model.evaluator(mech, x, i, mass_tol)?.expectation(v)?;
    Ok(IrResult {
        player: i,
        verdict: Verdict::at_least(Interval::point(pay), loss),
        pay,
        loss,
        margin: pay - loss.hi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationOutcome {
    pub declared: f64,
    pub verdict: Verdict,
    /// Lower bound of truthful utility minus upper bound of deviating
    /// utility.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthResult {
    pub player: usize,
    pub verdict: Verdict,
    pub margin: f64,
    /// Declaration with the smallest margin.
    pub witness: Option<f64>,
    pub deviations: Vec<DeviationOutcome>,
}

/// Truthfulness of player `i` on `x` against each declaration in
/// `deviations`.
///
/// When a declaration leaves the count law unchanged and the model respects
/// identical output distributions, the losses cancel exactly and only the
/// payment difference is compared.
pub fn check_truthful(
    mech: &dyn Mechanism,
    model: &LossModel,
    x: &InputProfile,
    i: usize,
    deviations: &[f64],
    mass_tol: f64,
) -> Result<TruthResult> {
    if deviations.is_empty() {
        return Err(Error::Precondition("deviation list is empty".into()));
    }
    let v = x.player(i)?.valuation;
    let eval = model.evaluator(mech, x, i, mass_tol)?;
    let truth_pay = mech.expected_pay(x, i)?;
    let truth_law = mech.output_dist(x, mass_tol)?;
    let truth_loss = eval.expectation(v)?;
    let identical_ok = model.flags().respects_identical_output_dists;

    let mut outcomes = Vec::with_capacity(deviations.len());
    for &d in deviations {
        let y = x.with_valuation(i, d)?;
        let dev_pay = mech.expected_pay(&y, i)?;
        let (truth_u, dev_u) =
            if d == v || (identical_ok && mech.output_dist(&y, mass_tol)?.same_law(&truth_law)) {
                (Interval::point(truth_pay), Interval::point(dev_pay))
            } else {
                let dev_loss = eval.expectation(d)?;
                (
                    Interval::point(truth_pay).minus(&truth_loss),
                    Interval::point(dev_pay).minus(&dev_loss),
                )
            };
        outcomes.push(DeviationOutcome {
            declared: d,
            verdict: Verdict::at_least(truth_u, dev_u),
            margin: truth_u.lo - dev_u.hi,
        });
    }
    let verdict = outcomes
        .iter()
        .fold(Verdict::Pass, |acc, o| acc.worst(o.verdict));
    let worst = outcomes
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .expect("nonempty");
    Ok(TruthResult {
        player: i,
        verdict,
        margin: worst.margin,
        witness: Some(worst.declared),
        deviations: outcomes,
    })
}

/// The mechanism's canonical deviations for player `i` plus `extra`.
pub fn default_deviations(
    mech: &dyn Mechanism,
    x: &InputProfile,
    i: usize,
    extra: &[f64],
) -> Result<Vec<f64>> {
    let mut vals = mech.deviation_valuations(x, i)?;
    vals.extend_from_slice(extra);
    dedup_f64(&mut vals);
    Ok(vals)
}

/// `([alpha, alpha_prime], beta)`-accuracy: the count must land in the open
/// window `((b̄ - alpha) n, (b̄ + alpha_prime) n)` except with probability
/// at most `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
}

impl AccuracySpec {
    pub fn new(alpha: f64, alpha_prime: f64, beta: f64) -> Result<Self> {
        let s = Self {
            alpha,
            alpha_prime,
            beta,
        };
        s.validate()?;
        Ok(s)
    }

    /// Symmetric `(alpha, beta)`-accuracy.
    pub fn symmetric(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha_prime >= 0.0) {
            return Err(Error::param("alpha", "alpha and alpha_prime must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::param(
                "beta",
                format!("must lie in [0, 1], got {}", self.beta),
            ));
        }
        Ok(())
    }

    /// Open window of acceptable counts on `x`. Ends within 1e-9 of an
    /// integer are snapped to it so that `(eta + gamma) * n` style products
    /// do not miss an integer boundary by one ulp.
    pub fn window(&self, x: &InputProfile) -> (f64, f64) {
        let n = x.len() as f64;
        let sum = x.bit_sum() as f64;
        (snap(sum - self.alpha * n), snap(sum + self.alpha_prime * n))
    }
}

fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() <= 1e-9 {
        r
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub verdict: Verdict,
    /// Enclosure of the probability of landing outside the window (exact
    /// mode) or its 99% Wilson interval (Monte Carlo mode).
    pub miss_probability: Interval,
    pub beta: f64,
    /// `beta - miss_probability.hi`.
    pub margin: f64,
}

/// Two-sided 99% normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

/// 99% Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64) -> Interval {
    if trials == 0 {
        return Interval::new(0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z99 * Z99;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z99 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval::new((center - half).max(0.0), (center + half).min(1.0))
}

/// Seed of the `j`-th Monte Carlo trial.
pub fn trial_seed(seed: u64, j: u64) -> u64 {
    // splitmix64 step keeps neighbouring trials decorrelated
    let mut z = seed.wrapping_add(j.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn check_accuracy(
    mech: &dyn Mechanism,
    x: &InputProfile,
    spec: &AccuracySpec,
    mode: AccuracyMode,
    mass_tol: f64,
    exec: Exec,
) -> Result<AccuracyResult> {
    spec.validate()?;
    let (lo, hi) = spec.window(x);
    let outside = |k: i64| {
        let k = k as f64;
        !(lo < k && k < hi)
    };
    let miss = match mode {
        AccuracyMode::Exact => mech.output_dist(x, mass_tol)?.mass_where(outside),
        AccuracyMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::param("trials", "must be >= 1"));
            }
            let misses = map_range(exec, trials as usize, |j| {
                mech.sample(x, trial_seed(seed, j as u64))
                    .map(|o| outside(o.count) as u64)
            })
            .into_iter()
            .sum::<Result<u64>>()?;
            wilson_interval(misses, trials)
        }
    };
    let verdict = if miss.hi <= spec.beta {
        Verdict::Pass
    } else if miss.lo > spec.beta {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(AccuracyResult {
        verdict,
        miss_probability: miss,
        beta: spec.beta,
        margin: spec.beta - miss.hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityQuery {
    pub player: usize,
    pub delta: f64,
    pub relation: NeighborRelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishResult {
    pub outcome: Distinguishability,
    pub sup: NeighborSup,
    /// Truncation tolerance that would settle an inconclusive answer.
    pub refine_mass_tol: Option<f64>,
}

pub fn check_distinguishable(
    mech: &dyn Mechanism,
    x: &InputProfile,
    q: &DistinguishabilityQuery,
    mass_tol: f64,
) -> Result<DistinguishResult> {
    if q.delta.is_nan() || q.delta <= 0.0 {
        return Err(Error::param(
            "delta",
            format!("must be > 0, got {}", q.delta),
        ));
    }
    let sup = max_neighbor_distance(mech, x, q.player, q.relation, mass_tol)?;
    let outcome = sup.classify(q.delta);
    let refine_mass_tol = (outcome == Distinguishability::Inconclusive).then(|| {
        // hi - lo is at most the truncation mass of the two laws
        let gap = q.delta - sup.sup.lo;
        if gap > 0.0 {
            (gap / 2.0).min(mass_tol / 10.0)
        } else {
            mass_tol / 10.0
        }
    });
    Ok(DistinguishResult {
        outcome,
        sup,
        refine_mass_tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpResult {
    pub player: usize,
    pub verdict: Verdict,
    pub level: f64,
    pub epsilon: f64,
    pub witness: Option<(bool, f64)>,
}

/// Tolerance on the pure-DP comparison.
pub const DP_LEVEL_SLACK: f64 = 1e-9;

/// Pure-DP level of the count law over every i-neighbor of `x`, compared
/// against `epsilon`.
pub fn check_dp(
    mech: &dyn Mechanism,
    x: &InputProfile,
    epsilon: f64,
    mass_tol: f64,
) -> Result<Vec<DpResult>> {
    if mass_tol > DP_MASS_TOL {
        return Err(Error::Precondition(format!(
            "dp check needs mass_tol <= {DP_MASS_TOL}, got {mass_tol}"
        )));
    }
    let own = mech.output_dist(x, mass_tol)?;
    (0..x.len())
        .map(|i| {
            let mut level = 0.0f64;
            let mut witness = None;
            for (t, law) in neighbor_laws(mech, x, i, NeighborRelation::General, mass_tol)? {
                let l = dp_level(&own, &law)?;
                if l > level || witness.is_none() {
                    level = level.max(l);
                    witness = Some((t.bit, t.valuation));
                }
            }
            Ok(DpResult {
                player: i,
                verdict: if level <= epsilon + DP_LEVEL_SLACK {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                level,
                epsilon,
                witness,
            })
        })
        .collect()
}
