//! Hybrid-chain auditors.
//!
//! Each auditor walks a chain of inputs from all-zero bits to (mostly)
//! all-one bits, one player at a time, and checks the premises that force
//! neighbouring hybrids to be statistically close. A mechanism either breaks
//! one of those premises (reported with the hybrid and player that witness
//! it) or gives up accuracy at an endpoint.

use serde::{Deserialize, Serialize};

use crate::dist::{statistical_distance, Interval};
use crate::error::{Error, Result};
use crate::loss::{loss_expectation, LossModel};
use crate::mechanism::Mechanism;
use crate::model::{all_bit_vectors, InputProfile, NeighborRelation, PlayerType};
use crate::par::{map_collect, map_range, Exec};
use crate::verify::{
    check_accuracy, check_ir_player, max_neighbor_distance, AccuracyMode, AccuracyResult,
    AccuracySpec, Verdict,
};

/// Relative slack when comparing two expected payments.
pub const PAY_TOL: f64 = 1e-12;

/// Slack on the triangle inequality over certified intervals.
pub const TRIANGLE_TOL: f64 = 1e-12;

fn pay_le(a: f64, b: f64) -> bool {
    a <= b + PAY_TOL * b.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    General,
    Monotonic,
    Tradeoff,
}

/// Premises in the order they are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Premise {
    LossModel,
    Payments,
    IndifferentTruthfulness,
    IndividualRationality,
}

impl std::fmt::Display for Premise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Premise::LossModel => "loss model",
            Premise::Payments => "finite payments",
            Premise::IndifferentTruthfulness => "truthfulness for indifferent players",
            Premise::IndividualRationality => "individual rationality",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseCheck {
    pub premise: Premise,
    /// 1-based hybrid index `i`.
    pub step: Option<usize>,
    /// 0-based player index.
    pub player: Option<usize>,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    /// Some premise fails; see `first_failure`.
    PremiseViolated,
    /// Every premise holds and accuracy fails at some audited input.
    ImpossibilityRespected,
    /// Every premise holds and every audited input is accurate.
    Anomaly,
    Inconclusive,
}

impl AuditVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditVerdict::PremiseViolated => "premise violated",
            AuditVerdict::ImpossibilityRespected => "impossibility respected",
            AuditVerdict::Anomaly => "anomaly",
            AuditVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// The audited sequence of inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridChain {
    pub labels: Vec<String>,
    pub inputs: Vec<InputProfile>,
    /// Inputs visited between chain links but not part of the chain
    /// (`(i,1)` probes of the adaptive chains).
    pub probes: Vec<InputProfile>,
    /// Per-player payment bound (`P` or `P_i`).
    pub payments: Vec<f64>,
    /// Per-player valuation threshold (`L` or `L_i`).
    pub thresholds: Vec<f64>,
    pub step_distances: Vec<Interval>,
    pub end_to_end: Interval,
}

impl HybridChain {
    #[allow(clippy::too_many_arguments)]
    fn build(
        mech: &dyn Mechanism,
        labels: Vec<String>,
        inputs: Vec<InputProfile>,
        probes: Vec<InputProfile>,
        payments: Vec<f64>,
        thresholds: Vec<f64>,
        mass_tol: f64,
        exec: Exec,
    ) -> Result<Self> {
        let laws = map_collect(exec, &inputs, |x| mech.output_dist(x, mass_tol))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let step_distances = laws
            .windows(2)
            .map(|w| statistical_distance(&w[0], &w[1]))
            .collect();
        let end_to_end = statistical_distance(&laws[0], &laws[laws.len() - 1]);
        let chain = Self {
            labels,
            inputs,
            probes,
            payments,
            thresholds,
            step_distances,
            end_to_end,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Sum of the step distance upper bounds.
    pub fn step_sum_hi(&self) -> f64 {
        self.step_distances.iter().map(|d| d.hi).sum()
    }

    /// Consecutive inputs differ in at most one player and the end-to-end
    /// distance respects the triangle inequality.
    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() || self.labels.len() != self.inputs.len() {
            return Err(Error::Precondition(
                "chain labels and inputs disagree".into(),
            ));
        }
        if self.step_distances.len() + 1 != self.inputs.len() {
            return Err(Error::Precondition(
                "one step distance per link expected".into(),
            ));
        }
        for (k, w) in self.inputs.windows(2).enumerate() {
            let diff = w[0].differing_players(&w[1]);
            if diff.len() > 1 {
                return Err(Error::Precondition(format!(
                    "hybrids {} and {} differ in {} players",
                    self.labels[k],
                    self.labels[k + 1],
                    diff.len()
                )));
            }
        }
        if self.end_to_end.lo > self.step_sum_hi() + TRIANGLE_TOL {
            return Err(Error::Precondition(format!(
                "end-to-end distance {} exceeds the sum of steps {}",
                self.end_to_end.lo,
                self.step_sum_hi()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputAccuracy {
    pub label: String,
    pub input: InputProfile,
    pub result: AccuracyResult,
}

/// Derived quantities of the payment/accuracy tradeoff chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffSummary {
    pub high_players: usize,
    pub tau_players: usize,
    pub high_valuation: f64,
    /// `1/2 - (P/tau) gamma n`.
    pub beta_max: f64,
    /// `eta n P / L + 2 gamma n P / tau`.
    pub chain_bound: f64,
    /// Miss probability of the final hybrid's accuracy window.
    pub final_miss: Interval,
    /// The final hybrid fails accuracy for every `beta < beta_max`.
    pub fails_below_beta_max: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audit: AuditKind,
    pub mechanism: String,
    pub loss_model: String,
    pub n: usize,
    pub delta: Option<f64>,
    pub mass_tol: f64,
    pub chain: HybridChain,
    pub premises: Vec<PremiseCheck>,
    pub accuracy: Vec<InputAccuracy>,
    /// Bound the chain's end-to-end distance must stay under when every
    /// premise holds.
    pub claim_bound: f64,
    /// Whether `end_to_end` stays under `claim_bound`.
    pub claim: Verdict,
    /// Largest certified distance any single player's type can cause along
    /// the chain.
    pub max_player_distance: Interval,
    pub tradeoff: Option<TradeoffSummary>,
    pub first_failure: Option<PremiseCheck>,
    pub verdict: AuditVerdict,
    pub summary: String,
}

impl AuditReport {
    /// Checks failing with the given premise.
    pub fn failures(&self, premise: Premise) -> impl Iterator<Item = &PremiseCheck> {
        self.premises
            .iter()
            .filter(move |c| c.premise == premise && c.verdict == Verdict::Fail)
    }
}

fn check_n(mech: &dyn Mechanism, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyProfile);
    }
    match mech.player_count() {
        Some(m) if m != n => Err(Error::SizeMismatch {
            expected: m,
            got: n,
        }),
        _ => Ok(()),
    }
}

fn label(i: usize, j: usize) -> String {
    format!("({i},{j})")
}

fn prefix_profile(n: usize, ones: usize, vals: &[f64]) -> Result<InputProfile> {
    let bits: Vec<u8> = (0..n).map(|j| (j < ones) as u8).collect();
    InputProfile::from_parts(&bits, vals)
}

/// `(1/2, 1/3)`-accuracy.
fn nontrivial_accuracy() -> AccuracySpec {
    AccuracySpec {
        alpha: 0.5,
        alpha_prime: 0.5,
        beta: 1.0 / 3.0,
    }
}

/// Does the model charge more than `level` at a `delta`-distinguishable
/// input whose player `i` is at or above the threshold?
#[allow(clippy::too_many_arguments)]
fn loss_model_step(
    mech: &dyn Mechanism,
    model: &LossModel,
    x: &InputProfile,
    i: usize,
    relation: NeighborRelation,
    delta: f64,
    level: f64,
    mass_tol: f64,
) -> Result<(Interval, Verdict, String)> {
    let sup = max_neighbor_distance(mech, x, i, relation, mass_tol)?;
    if sup.sup.hi < delta {
        return Ok((
            sup.sup,
            Verdict::Pass,
            format!("not {delta}-distinguishable"),
        ));
    }
    let v = x.player(i)?.valuation;
    let loss = loss_expectation(model, mech, x, i, v, mass_tol)?;
    let verdict = if loss.lo > level {
        Verdict::Pass
    } else if sup.sup.lo >= delta && loss.hi <= level {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    let detail = format!(
        "distance {} vs delta {delta}; loss {} vs level {level}",
        sup.sup, loss
    );
    Ok((sup.sup, verdict, detail))
}

fn indifference_check(model: &LossModel) -> PremiseCheck {
    let ok = model.flags().respects_indifference;
    PremiseCheck {
        premise: Premise::LossModel,
        step: None,
        player: None,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail: format!(
            "{} {} indifference",
            model.name(),
            if ok { "respects" } else { "does not respect" }
        ),
    }
}

fn ir_check(
    mech: &dyn Mechanism,
    model: &LossModel,
    x: &InputProfile,
    i: usize,
    step: usize,
    at: &str,
    mass_tol: f64,
) -> Result<PremiseCheck> {
    let r = check_ir_player(mech, model, x, i, mass_tol)?;
    Ok(PremiseCheck {
        premise: Premise::IndividualRationality,
        step: Some(step),
        player: Some(i),
        verdict: r.verdict,
        detail: format!("at {at}: pay {} vs loss {}", r.pay, r.loss),
    })
}

fn truth_check(step: usize, i: usize, lhs: f64, rhs: f64, what: &str) -> PremiseCheck {
    PremiseCheck {
        premise: Premise::IndifferentTruthfulness,
        step: Some(step),
        player: Some(i),
        verdict: if pay_le(lhs, rhs) {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        detail: format!("{what}: {lhs} <= {rhs}"),
    }
}

fn finite_check(step: usize, i: usize, pays: &[(f64, &str)]) -> PremiseCheck {
    let bad: Vec<String> = pays
        .iter()
        .filter(|(p, _)| !p.is_finite())
        .map(|(p, at)| format!("{p} at {at}"))
        .collect();
    PremiseCheck {
        premise: Premise::Payments,
        step: Some(step),
        player: Some(i),
        verdict: if bad.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        detail: if bad.is_empty() {
            "finite".into()
        } else {
            bad.join(", ")
        },
    }
}

fn strictly_below(d: Interval, bound: f64) -> Verdict {
    if d.hi < bound {
        Verdict::Pass
    } else if d.lo >= bound {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Orders checks by premise (stable within a premise) and derives the
/// verdict.
fn conclude(
    mut premises: Vec<PremiseCheck>,
    accuracy: &[InputAccuracy],
) -> (
    Vec<PremiseCheck>,
    Option<PremiseCheck>,
    AuditVerdict,
    String,
) {
    premises.sort_by_key(|c| c.premise);
    let first = premises
        .iter()
        .find(|c| c.verdict == Verdict::Fail)
        .cloned();
    let acc = accuracy
        .iter()
        .fold(Verdict::Pass, |a, r| a.worst(r.result.verdict));
    let premise_open = premises.iter().any(|c| c.verdict == Verdict::Inconclusive);
    let (verdict, summary) = if let Some(f) = &first {
        let at = match (f.step, f.player) {
            (Some(s), Some(p)) => format!(" at hybrid {s}, player {p}"),
            _ => String::new(),
        };
        (
            AuditVerdict::PremiseViolated,
            format!("{} violated{at}: {}", f.premise, f.detail),
        )
    } else if premise_open {
        (
            AuditVerdict::Inconclusive,
            "some premise could not be settled at this mass tolerance".into(),
        )
    } else {
        match acc {
            Verdict::Fail => {
                let bad: Vec<String> = accuracy
                    .iter()
                    .filter(|r| r.result.verdict == Verdict::Fail)
                    .map(|r| format!("{} (miss {})", r.label, r.result.miss_probability))
                    .collect();
                (
                    AuditVerdict::ImpossibilityRespected,
                    format!("premises hold; accuracy fails at {}", bad.join(", ")),
                )
            }
            Verdict::Inconclusive => (
                AuditVerdict::Inconclusive,
                "premises hold; accuracy could not be settled".into(),
            ),
            Verdict::Pass => (
                AuditVerdict::Anomaly,
                "premises hold and every audited input is accurate".into(),
            ),
        }
    };
    (premises, first, verdict, summary)
}

fn accuracy_at(
    mech: &dyn Mechanism,
    labelled: Vec<(String, InputProfile)>,
    spec: &AccuracySpec,
    mass_tol: f64,
    exec: Exec,
) -> Result<Vec<InputAccuracy>> {
    map_collect(exec, &labelled, |(label, x)| {
        let result = check_accuracy(
            mech,
            x,
            spec,
            AccuracyMode::Exact,
            mass_tol,
            Exec::Sequential,
        )?;
        Ok(InputAccuracy {
            label: label.clone(),
            input: x.clone(),
            result,
        })
    })
    .into_iter()
    .collect()
}

fn max_interval(it: impl IntoIterator<Item = Interval>) -> Interval {
    it.into_iter().fold(Interval::zero(), |a, d| {
        Interval::new(a.lo.max(d.lo), a.hi.max(d.hi))
    })
}

/// Audit against a model increasing for `delta`-distinguishability (general
/// neighbors), `delta <= 1/(6n)`.
///
/// `P` is the largest payment over all bit vectors with all-zero
/// valuations and `L = max T(P, b, 0^{n-1})`. The chain is
/// `(1,0), (1,1), (2,0), ..., (n+1,0)` where `(i,1)` sets player `i` to
/// `(1, L)` and `(i+1,0)` drops that valuation back to 0.
pub fn audit_general_impossibility(
    mech: &dyn Mechanism,
    model: &LossModel,
    n: usize,
    delta: f64,
    mass_tol: f64,
    exec: Exec,
) -> Result<AuditReport> {
    check_n(mech, n)?;
    let max_delta = 1.0 / (6.0 * n as f64);
    if !(delta > 0.0 && delta <= max_delta) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, 1/(6n)] = (0, {max_delta}], got {delta}"),
        ));
    }
    let threshold = model
        .threshold()
        .ok_or_else(|| Error::MissingThreshold(model.name().into()))?;

    let zeros = vec![0.0; n];
    let bit_vectors = all_bit_vectors(n);
    let pays = map_collect(exec, &bit_vectors, |b| {
        mech.expected_payments(&InputProfile::from_parts(b, &zeros)?)
    });
    let mut p = f64::NEG_INFINITY;
    for (b, pay) in bit_vectors.iter().zip(pays) {
        for (i, v) in pay?.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Precondition(format!(
                    "player {i} is paid {v} on bits {b:?} with zero valuations"
                )));
            }
            p = p.max(v);
        }
    }
    let others = vec![0.0; n - 1];
    let mut l = f64::NEG_INFINITY;
    for b in &bit_vectors {
        l = l.max(threshold.eval(p, b, &others));
    }
    if !l.is_finite() {
        return Err(Error::param(
            "threshold",
            format!("T(P, .) = {l} is not finite"),
        ));
    }

    let mut labels = Vec::with_capacity(2 * n + 1);
    let mut inputs = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        let x0 = prefix_profile(n, i, &zeros)?;
        let x1 = x0.with_player(i, PlayerType::new(true, l)?)?;
        labels.push(label(i + 1, 0));
        inputs.push(x0);
        labels.push(label(i + 1, 1));
        inputs.push(x1);
    }
    labels.push(label(n + 1, 0));
    inputs.push(prefix_profile(n, n, &zeros)?);
    let chain = HybridChain::build(
        mech,
        labels,
        inputs,
        Vec::new(),
        vec![p; n],
        vec![l; n],
        mass_tol,
        exec,
    )?;

    let per_player = map_range(exec, n, |i| -> Result<(Interval, Vec<PremiseCheck>)> {
        let step = i + 1;
        let x1 = &chain.inputs[2 * i + 1];
        let next = &chain.inputs[2 * i + 2];
        let at = &chain.labels[2 * i + 1];
        let (sup, verdict, detail) = loss_model_step(
            mech,
            model,
            x1,
            i,
            NeighborRelation::General,
            delta,
            p,
            mass_tol,
        )?;
        let pay1 = mech.expected_pay(x1, i)?;
        let pay_next = mech.expected_pay(next, i)?;
        Ok((
            sup,
            vec![
                PremiseCheck {
                    premise: Premise::LossModel,
                    step: Some(step),
                    player: Some(i),
                    verdict,
                    detail: format!("at {at}: {detail}"),
                },
                finite_check(step, i, &[(pay1, at), (pay_next, &chain.labels[2 * i + 2])]),
                truth_check(
                    step,
                    i,
                    pay1,
                    pay_next,
                    &format!("pay at {at} vs {}", chain.labels[2 * i + 2]),
                ),
                ir_check(mech, model, x1, i, step, at, mass_tol)?,
            ],
        ))
    });
    let mut premises = vec![indifference_check(model)];
    let mut sups = Vec::with_capacity(n);
    for r in per_player {
        let (sup, checks) = r?;
        sups.push(sup);
        premises.extend(checks);
    }

    let accuracy = accuracy_at(
        mech,
        vec![
            (label(1, 0), chain.inputs[0].clone()),
            (label(n + 1, 0), chain.inputs[2 * n].clone()),
        ],
        &nontrivial_accuracy(),
        mass_tol,
        exec,
    )?;
    let claim_bound = 2.0 * n as f64 * delta;
    let claim = strictly_below(chain.end_to_end, claim_bound);
    let (premises, first_failure, verdict, summary) = conclude(premises, &accuracy);
    Ok(AuditReport {
        audit: AuditKind::General,
        mechanism: mech.name().into(),
        loss_model: model.name().into(),
        n,
        delta: Some(delta),
        mass_tol,
        chain,
        premises,
        accuracy,
        claim_bound,
        claim,
        max_player_distance: max_interval(sups),
        tradeoff: None,
        first_failure,
        verdict,
        summary,
    })
}

/// Audit against a model increasing for `delta`-monotonic
/// distinguishability, `delta <= 1/(3n)`.
///
/// The chain is built adaptively: from `(i,0)` the probe `(i,1)` flips
/// player `i`'s bit, `P_i` is the player's pay there,
/// `L_i = T(P_i, b, v_{-i})`, and `(i+1,0)` raises the valuation to `L_i`.
pub fn audit_monotonic_impossibility(
    mech: &dyn Mechanism,
    model: &LossModel,
    n: usize,
    delta: f64,
    mass_tol: f64,
    exec: Exec,
) -> Result<AuditReport> {
    check_n(mech, n)?;
    let max_delta = 1.0 / (3.0 * n as f64);
    if !(delta > 0.0 && delta <= max_delta) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, 1/(3n)] = (0, {max_delta}], got {delta}"),
        ));
    }
    let threshold = model
        .threshold()
        .ok_or_else(|| Error::MissingThreshold(model.name().into()))?;

    let mut x = prefix_profile(n, 0, &vec![0.0; n])?;
    let mut labels = vec![label(1, 0)];
    let mut inputs = vec![x.clone()];
    let mut probes = Vec::with_capacity(n);
    let mut payments = Vec::with_capacity(n);
    let mut thresholds = Vec::with_capacity(n);
    for i in 0..n {
        let probe = x.with_player(i, PlayerType::new(true, 0.0)?)?;
        let p_i = mech.expected_pay(&probe, i)?;
        if !p_i.is_finite() {
            return Err(Error::Precondition(format!(
                "player {i} is paid {p_i} at {}",
                label(i + 1, 1)
            )));
        }
        let mut others = probe.valuations();
        others.remove(i);
        let l_i = threshold.eval(p_i, &probe.bits(), &others);
        if !l_i.is_finite() {
            return Err(Error::param(
                "threshold",
                format!("T(P_{}, .) = {l_i} is not finite", i + 1),
            ));
        }
        x = probe.with_valuation(i, l_i)?;
        probes.push(probe);
        payments.push(p_i);
        thresholds.push(l_i);
        labels.push(label(i + 2, 0));
        inputs.push(x.clone());
    }
    let chain = HybridChain::build(
        mech, labels, inputs, probes, payments, thresholds, mass_tol, exec,
    )?;

    let per_player = map_range(exec, n, |i| -> Result<(Interval, Vec<PremiseCheck>)> {
        let step = i + 1;
        let next = &chain.inputs[i + 1];
        let at = &chain.labels[i + 1];
        let p_i = chain.payments[i];
        let (_, verdict, detail) = loss_model_step(
            mech,
            model,
            next,
            i,
            NeighborRelation::Monotonic,
            delta,
            p_i,
            mass_tol,
        )?;
        let general = max_neighbor_distance(mech, next, i, NeighborRelation::General, mass_tol)?;
        let pay_next = mech.expected_pay(next, i)?;
        Ok((
            general.sup,
            vec![
                PremiseCheck {
                    premise: Premise::LossModel,
                    step: Some(step),
                    player: Some(i),
                    verdict,
                    detail: format!("at {at}: {detail}"),
                },
                finite_check(step, i, &[(p_i, &label(step, 1)), (pay_next, at)]),
                truth_check(
                    step,
                    i,
                    pay_next,
                    p_i,
                    &format!("pay at {at} vs {}", label(step, 1)),
                ),
                ir_check(mech, model, next, i, step, at, mass_tol)?,
            ],
        ))
    });
    let mut premises = vec![indifference_check(model)];
    let mut sups = Vec::with_capacity(n);
    for r in per_player {
        let (sup, checks) = r?;
        sups.push(sup);
        premises.extend(checks);
    }

    let accuracy = accuracy_at(
        mech,
        vec![
            (label(1, 0), chain.inputs[0].clone()),
            (label(n + 1, 0), chain.inputs[n].clone()),
        ],
        &nontrivial_accuracy(),
        mass_tol,
        exec,
    )?;
    let claim_bound = n as f64 * delta;
    let claim = strictly_below(chain.end_to_end, claim_bound);
    let (premises, first_failure, verdict, summary) = conclude(premises, &accuracy);
    Ok(AuditReport {
        audit: AuditKind::Monotonic,
        mechanism: mech.name().into(),
        loss_model: model.name().into(),
        n,
        delta: Some(delta),
        mass_tol,
        chain,
        premises,
        accuracy,
        claim_bound,
        claim,
        max_player_distance: max_interval(sups),
        tradeoff: None,
        first_failure,
        verdict,
        summary,
    })
}

/// Parameters of the payment/accuracy tradeoff audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffParams {
    pub tau: f64,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    /// Largest payment to any player declaring valuation 0.
    pub max_pay: f64,
    pub n: usize,
}

fn snapped_count(name: &'static str, t: f64) -> Result<usize> {
    let r = t.round();
    if (t - r).abs() > 1e-9 || r < 0.0 {
        return Err(Error::param(
            name,
            format!("must make an integer count of players, got {t}"),
        ));
    }
    Ok(r as usize)
}

impl TradeoffParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyProfile);
        }
        for (name, v) in [("tau", self.tau), ("gamma", self.gamma), ("eta", self.eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.max_pay.is_finite() && self.max_pay >= 0.0) {
            return Err(Error::param(
                "max_pay",
                format!("must be finite and >= 0, got {}", self.max_pay),
            ));
        }
        if self.eta + 2.0 * self.gamma > 1.0 + 1e-12 {
            return Err(Error::param("eta", "eta + 2 gamma must be <= 1"));
        }
        let beta_max = self.beta_max();
        if !(self.beta >= 0.0 && self.beta < beta_max) {
            return Err(Error::param(
                "beta",
                format!(
                    "must lie in [0, 1/2 - (P/tau) gamma n) = [0, {beta_max}), got {}",
                    self.beta
                ),
            ));
        }
        let h = snapped_count("eta", self.eta * self.n as f64)?;
        let g = snapped_count("gamma", 2.0 * self.gamma * self.n as f64)?;
        if h + g > self.n {
            return Err(Error::param("eta", "eta n + 2 gamma n exceeds n"));
        }
        Ok(())
    }

    /// `1/2 - (P/tau) gamma n`.
    pub fn beta_max(&self) -> f64 {
        0.5 - self.max_pay / self.tau * self.gamma * self.n as f64
    }

    /// `h = eta n`.
    pub fn high_players(&self) -> usize {
        (self.eta * self.n as f64).round() as usize
    }

    /// `2 gamma n`.
    pub fn tau_players(&self) -> usize {
        (2.0 * self.gamma * self.n as f64).round() as usize
    }

    /// `max(P h / (1 - 2 (P/tau) gamma n - 2 beta), tau)`.
    pub fn high_valuation(&self) -> f64 {
        let denom =
            1.0 - 2.0 * self.max_pay / self.tau * self.gamma * self.n as f64 - 2.0 * self.beta;
        (self.max_pay * self.high_players() as f64 / denom).max(self.tau)
    }

    /// `([eta + gamma, gamma], beta)`.
    pub fn accuracy(&self) -> AccuracySpec {
        AccuracySpec {
            alpha: self.eta + self.gamma,
            alpha_prime: self.gamma,
            beta: self.beta,
        }
    }
}

/// Audit of the payment/accuracy tradeoff against a model growing with
/// statistical distance for monotonic neighbors.
///
/// Hybrid `(i+1,0)` sets player `i` to `(1, L)` for the first `h` players
/// and to `(1, tau)` for the next `2 gamma n`. Accuracy is checked on every
/// hybrid with the window `(i-1-(eta+gamma)n, i-1+gamma n)`.
pub fn audit_payment_accuracy_tradeoff(
    mech: &dyn Mechanism,
    model: &LossModel,
    params: &TradeoffParams,
    mass_tol: f64,
    exec: Exec,
) -> Result<AuditReport> {
    params.validate()?;
    let n = params.n;
    check_n(mech, n)?;
    let h = params.high_players();
    let g = params.tau_players();
    let steps = h + g;
    let l = params.high_valuation();
    let p = params.max_pay;

    let mut x = prefix_profile(n, 0, &vec![0.0; n])?;
    let mut labels = vec![label(1, 0)];
    let mut inputs = vec![x.clone()];
    let mut probes = Vec::with_capacity(steps);
    let mut thresholds = Vec::with_capacity(steps);
    for i in 0..steps {
        let probe = x.with_player(i, PlayerType::new(true, 0.0)?)?;
        let v = if i < h { l } else { params.tau };
        x = probe.with_valuation(i, v)?;
        probes.push(probe);
        thresholds.push(v);
        labels.push(label(i + 2, 0));
        inputs.push(x.clone());
    }
    let chain = HybridChain::build(
        mech,
        labels,
        inputs,
        probes,
        vec![p; steps],
        thresholds,
        mass_tol,
        exec,
    )?;

    let growing = model.flags().growing_with_sd;
    let per_player = map_range(exec, steps, |i| -> Result<Vec<PremiseCheck>> {
        let step = i + 1;
        let next = &chain.inputs[i + 1];
        let probe = &chain.probes[i];
        let at = &chain.labels[i + 1];
        let probe_at = label(step, 1);
        let v = chain.thresholds[i];
        let model_check = if growing {
            PremiseCheck {
                premise: Premise::LossModel,
                step: Some(step),
                player: Some(i),
                verdict: Verdict::Pass,
                detail: format!("{} grows with statistical distance", model.name()),
            }
        } else {
            let sup = max_neighbor_distance(mech, next, i, NeighborRelation::Monotonic, mass_tol)?;
            let loss = loss_expectation(model, mech, next, i, v, mass_tol)?;
            let floor = sup.sup.scale(v);
            PremiseCheck {
                premise: Premise::LossModel,
                step: Some(step),
                player: Some(i),
                verdict: Verdict::at_least(loss, floor),
                detail: format!("at {at}: loss {loss} vs v * distance {floor}"),
            }
        };
        let pay_probe = mech.expected_pay(probe, i)?;
        let pay_next = mech.expected_pay(next, i)?;
        let pay_cap = PremiseCheck {
            premise: Premise::Payments,
            step: Some(step),
            player: Some(i),
            verdict: if pay_probe.is_finite() && pay_le(pay_probe, p) {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            detail: format!("zero-valuation pay at {probe_at}: {pay_probe} <= P = {p}"),
        };
        let mut ir = ir_check(mech, model, next, i, step, at, mass_tol)?;
        let step_d = chain.step_distances[i];
        ir.detail = format!("{}; step distance {step_d} vs P/v = {}", ir.detail, p / v);
        Ok(vec![
            model_check,
            pay_cap,
            truth_check(
                step,
                i,
                pay_next,
                pay_probe,
                &format!("pay at {at} vs {probe_at}"),
            ),
            ir,
        ])
    });
    let mut premises = vec![indifference_check(model)];
    for r in per_player {
        premises.extend(r?);
    }

    let spec = params.accuracy();
    let labelled: Vec<(String, InputProfile)> = chain
        .labels
        .iter()
        .cloned()
        .zip(chain.inputs.iter().cloned())
        .collect();
    let accuracy = accuracy_at(mech, labelled, &spec, mass_tol, exec)?;
    let final_miss = accuracy[steps].result.miss_probability;
    let beta_max = params.beta_max();
    let sups = map_range(exec, steps, |i| {
        max_neighbor_distance(
            mech,
            &chain.inputs[i + 1],
            i,
            NeighborRelation::General,
            mass_tol,
        )
        .map(|s| s.sup)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let claim_bound = 1.0 - 2.0 * params.beta;
    let claim = strictly_below(chain.end_to_end, claim_bound);
    let chain_bound = h as f64 * p / l + g as f64 * p / params.tau;
    let (premises, first_failure, verdict, summary) = conclude(premises, &accuracy);
    Ok(AuditReport {
        audit: AuditKind::Tradeoff,
        mechanism: mech.name().into(),
        loss_model: model.name().into(),
        n,
        delta: None,
        mass_tol,
        chain,
        premises,
        accuracy,
        claim_bound,
        claim,
        max_player_distance: max_interval(sups),
        tradeoff: Some(TradeoffSummary {
            high_players: h,
            tau_players: g,
            high_valuation: l,
            beta_max,
            chain_bound,
            final_miss,
            fails_below_beta_max: final_miss.lo >= beta_max,
        }),
        first_failure,
        verdict,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{increasing_threshold_model, ThresholdFn};
    use crate::mechanism::{
        Alg1, BudgetParams, ConstantOutput, ExactSum, Subsample, SubsampleParams,
    };

    const LN2: f64 = std::f64::consts::LN_2;
    const TOL: f64 = 1e-12;

    fn general_model(delta: f64) -> LossModel {
        increasing_threshold_model(ThresholdFn::default(), delta, NeighborRelation::General)
            .unwrap()
    }

    fn mono_model(delta: f64) -> LossModel {
        increasing_threshold_model(ThresholdFn::default(), delta, NeighborRelation::Monotonic)
            .unwrap()
    }

    fn alg1(b: f64, eps: f64, n: usize) -> Alg1 {
        Alg1::new(BudgetParams::new(b, eps, n).unwrap()).unwrap()
    }

    #[test]
    fn general_exact_sum_flagged_at_ir() {
        let delta = 1.0 / 12.0;
        let r = audit_general_impossibility(
            &ExactSum::default(),
            &general_model(delta),
            2,
            delta,
            TOL,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(r.chain.inputs.len(), 5);
        assert_eq!(r.chain.payments, vec![0.0, 0.0]);
        assert_eq!(r.chain.thresholds, vec![1.0, 1.0]);
        assert_eq!(r.verdict, AuditVerdict::PremiseViolated);
        let f = r.first_failure.unwrap();
        assert_eq!(f.premise, Premise::IndividualRationality);
        assert_eq!((f.step, f.player), (Some(1), Some(0)));
        assert_eq!(r.chain.end_to_end, Interval::point(1.0));
        assert_eq!(r.claim, Verdict::Fail);
    }

    #[test]
    fn general_constant_output_respects_impossibility() {
        let delta = 1.0 / 18.0;
        let r = audit_general_impossibility(
            &ConstantOutput::default(),
            &general_model(delta),
            3,
            delta,
            TOL,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(
            r.verdict,
            AuditVerdict::ImpossibilityRespected,
            "{}",
            r.summary
        );
        assert_eq!(r.chain.end_to_end, Interval::zero());
        assert!(r
            .chain
            .step_distances
            .iter()
            .all(|d| *d == Interval::zero()));
        assert_eq!(r.accuracy[0].result.verdict, Verdict::Pass);
        assert_eq!(r.accuracy[1].result.verdict, Verdict::Fail);
    }

    #[test]
    fn general_alg1_flagged_at_ir() {
        let delta = 1.0 / 12.0;
        let m = alg1(4.0, LN2, 2);
        let r =
            audit_general_impossibility(&m, &general_model(delta), 2, delta, TOL, Exec::Sequential)
                .unwrap();
        assert_eq!(r.chain.payments, vec![2.0, 2.0]);
        assert_eq!(r.chain.thresholds, vec![3.0, 3.0]);
        let f = r.first_failure.clone().unwrap();
        assert_eq!(f.premise, Premise::IndividualRationality);
        assert_eq!((f.step, f.player), (Some(1), Some(0)));
        // the (1,0) neighbor of (1,1) shifts the count by one
        let d = r.max_player_distance;
        assert!(
            d.lo >= 1.0 / 3.0 - 1e-12 && d.lo <= 1.0 / 3.0 + 1e-12,
            "{d}"
        );
    }

    #[test]
    fn general_audit_is_reproducible() {
        let delta = 1.0 / 18.0;
        let m = alg1(6.0, 0.5, 3);
        let model = general_model(delta);
        let a = audit_general_impossibility(&m, &model, 3, delta, TOL, Exec::Parallel).unwrap();
        let b = audit_general_impossibility(&m, &model, 3, delta, TOL, Exec::Sequential).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn general_audit_errors() {
        let m = alg1(4.0, LN2, 2);
        let model = general_model(0.05);
        assert!(matches!(
            audit_general_impossibility(&m, &model, 2, 0.2, TOL, Exec::Sequential),
            Err(Error::InvalidParam { .. })
        ));
        assert!(matches!(
            audit_general_impossibility(
                &m,
                &LossModel::tight_dp(NeighborRelation::General),
                2,
                0.05,
                TOL,
                Exec::Sequential
            ),
            Err(Error::MissingThreshold(_))
        ));
        assert!(matches!(
            audit_general_impossibility(&m, &model, 3, 0.05, TOL, Exec::Sequential),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn monotonic_alg1_gives_up_accuracy() {
        let delta = 1.0 / 6.0;
        let m = alg1(4.0, LN2, 2);
        let r =
            audit_monotonic_impossibility(&m, &mono_model(delta), 2, delta, TOL, Exec::Sequential)
                .unwrap();
        assert_eq!(r.chain.inputs.len(), 3);
        assert_eq!(r.chain.probes.len(), 2);
        assert_eq!(r.chain.payments, vec![2.0, 2.0]);
        assert_eq!(r.chain.thresholds, vec![3.0, 3.0]);
        assert!(r
            .chain
            .step_distances
            .iter()
            .all(|d| *d == Interval::zero()));
        assert_eq!(
            r.verdict,
            AuditVerdict::ImpossibilityRespected,
            "{}",
            r.summary
        );
        assert_eq!(r.accuracy[1].result.verdict, Verdict::Fail);
        // window (1, 3) around bit sum 2 only admits count 2 and the noisy
        // count is pure noise: Pr[Geom = 2] = tanh(ln2 / 2) / 4 = 1/12
        let miss = r.accuracy[1].result.miss_probability;
        assert!((miss.lo - 11.0 / 12.0).abs() < 1e-11, "{miss}");
    }

    #[test]
    fn monotonic_subsample_breaks_the_loss_premise() {
        let n = 6;
        let delta = 1.0 / 18.0;
        let m = Subsample::new(SubsampleParams {
            flat_pay: 1.0,
            sample_size: 2,
            distinguishability_budget: Some(3.0),
        })
        .unwrap();
        let model = LossModel::distinguishability_capped(3.0, 1.0, ThresholdFn::default()).unwrap();
        let r = audit_monotonic_impossibility(&m, &model, n, delta, TOL, Exec::Sequential).unwrap();
        assert_eq!(r.verdict, AuditVerdict::PremiseViolated);
        let f = r.first_failure.as_ref().unwrap();
        assert_eq!(f.premise, Premise::LossModel);
        assert_eq!(f.step, Some(1));
        assert!(r.failures(Premise::IndividualRationality).next().is_none());
        assert!(r.max_player_distance.hi < 3.0 / n as f64);
        // first step: Pr[the single one is sampled] = 1 - C(5,2)/C(6,2)
        let d = r.chain.step_distances[0];
        assert!((d.lo - 1.0 / 3.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn tradeoff_params_validation() {
        let ok = TradeoffParams {
            tau: 4.0,
            gamma: 0.125,
            eta: 0.25,
            beta: 0.1,
            max_pay: 1.0,
            n: 8,
        };
        ok.validate().unwrap();
        assert_eq!(ok.beta_max(), 0.25);
        assert_eq!((ok.high_players(), ok.tau_players()), (2, 2));
        assert!(TradeoffParams { beta: 0.5, ..ok }.validate().is_err());
        assert!(TradeoffParams { beta: 0.25, ..ok }.validate().is_err());
        assert!(TradeoffParams { eta: 0.9, ..ok }.validate().is_err());
        assert!(TradeoffParams { eta: 0.3, ..ok }.validate().is_err());
    }

    #[test]
    fn tradeoff_alg1_fails_accuracy_at_the_end() {
        let m = alg1(8.0, 0.5, 8);
        let params = TradeoffParams {
            tau: 4.0,
            gamma: 0.125,
            eta: 0.25,
            beta: 0.2,
            max_pay: 1.0,
            n: 8,
        };
        let r = audit_payment_accuracy_tradeoff(
            &m,
            &LossModel::growing_sd(),
            &params,
            TOL,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(r.chain.inputs.len(), 5);
        assert!(r
            .chain
            .step_distances
            .iter()
            .all(|d| *d == Interval::zero()));
        assert_eq!(
            r.verdict,
            AuditVerdict::ImpossibilityRespected,
            "{}",
            r.summary
        );
        let t = r.tradeoff.unwrap();
        assert!(t.fails_below_beta_max);
        assert_eq!(r.accuracy.last().unwrap().result.verdict, Verdict::Fail);
    }

    #[test]
    fn tradeoff_exact_sum_flagged_at_ir() {
        let m = ExactSum { flat_pay: 1.0 };
        let params = TradeoffParams {
            tau: 4.0,
            gamma: 0.125,
            eta: 0.25,
            beta: 0.1,
            max_pay: 1.0,
            n: 8,
        };
        let r = audit_payment_accuracy_tradeoff(
            &m,
            &LossModel::growing_sd(),
            &params,
            TOL,
            Exec::Sequential,
        )
        .unwrap();
        assert!(r
            .chain
            .step_distances
            .iter()
            .all(|d| *d == Interval::point(1.0)));
        let f = r.first_failure.unwrap();
        assert_eq!(f.premise, Premise::IndividualRationality);
        assert_eq!(f.step, Some(1));
    }
}
