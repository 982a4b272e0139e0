//! Concrete mechanisms.
//!
//! A mechanism maps an input profile to a published count and a payment
//! vector. Every mechanism here exposes its count law exactly, which is what
//! the verifiers and audits run on.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{shifted_geom_dist, CountDistribution, GeomParams};
use crate::error::{Error, Result};
use crate::model::{InputProfile, Outcome, PlayerType};

/// A mechanism `M = (M_out, M_pay)` with exactly computable count law.
pub trait Mechanism: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Fixed player count, when the mechanism's parameters pin one.
    fn player_count(&self) -> Option<usize> {
        None
    }

    /// Law of the published count on `x`.
    fn output_dist(&self, x: &InputProfile, mass_tol: f64) -> Result<CountDistribution>;

    /// Expected payment to player `i` on `x`.
    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64>;

    /// One run of the mechanism. Deterministic in `seed`.
    fn sample(&self, x: &InputProfile, seed: u64) -> Result<Outcome>;

    /// Replacement types for player `i` that reach every distinct
    /// (count law, payment) class under both neighbor relations. Sups over
    /// the infinite type space are taken over this set.
    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>>;

    /// Declarations for player `i` covering every outcome class of a
    /// unilateral misreport.
    fn deviation_valuations(&self, x: &InputProfile, i: usize) -> Result<Vec<f64>> {
        let mut vals: Vec<f64> = self
            .candidate_types(x, i)?
            .into_iter()
            .map(|t| t.valuation)
            .collect();
        dedup_f64(&mut vals);
        Ok(vals)
    }

    /// Whether the mechanism is meant to be truthful for player `i` on `x`.
    fn claims_truthful(&self, _x: &InputProfile, _i: usize) -> bool {
        true
    }

    /// True when payments to players other than `i` never depend on
    /// player `i`'s type, so the observer's view of `M_{-i}` carries no
    /// information beyond the count.
    fn others_pay_independent(&self) -> bool {
        true
    }

    /// Expected payments to every player.
    fn expected_payments(&self, x: &InputProfile) -> Result<Vec<f64>> {
        (0..x.len()).map(|i| self.expected_pay(x, i)).collect()
    }
}

pub(crate) fn dedup_f64(vals: &mut Vec<f64>) {
    vals.sort_by(f64::total_cmp);
    vals.dedup();
}

fn check_size(expected: Option<usize>, x: &InputProfile) -> Result<()> {
    match expected {
        Some(n) if n != x.len() => Err(Error::SizeMismatch {
            expected: n,
            got: x.len(),
        }),
        _ => Ok(()),
    }
}

fn check_index(x: &InputProfile, i: usize) -> Result<()> {
    x.player(i).map(|_| ())
}

/// Types `(b, v)` for both bits and every `v` in `vals`.
fn both_bits(vals: &[f64]) -> Vec<PlayerType> {
    let mut vals = vals.to_vec();
    dedup_f64(&mut vals);
    [false, true]
        .iter()
        .flat_map(|&bit| {
            vals.iter()
                .map(move |&valuation| PlayerType { bit, valuation })
        })
        .collect()
}

/// Budget, privacy parameter and player count of the threshold mechanism.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BudgetParams {
    pub budget: f64,
    pub epsilon: f64,
    pub n: usize,
}

impl BudgetParams {
    pub fn new(budget: f64, epsilon: f64, n: usize) -> Result<Self> {
        let p = Self { budget, epsilon, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::param(
                "budget",
                format!("must be finite and > 0, got {}", self.budget),
            ));
        }
        GeomParams::new(self.epsilon)?;
        if self.n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        let theta = self.threshold();
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::param(
                "budget",
                format!("threshold B/(2 eps n) = {theta} is not finite and positive"),
            ));
        }
        Ok(())
    }

    /// Per-player payment `B/n`.
    pub fn per_player_pay(&self) -> f64 {
        self.budget / self.n as f64
    }

    /// Valuation threshold `B/(2 eps n)`.
    pub fn threshold(&self) -> f64 {
        self.budget / (2.0 * self.epsilon * self.n as f64)
    }

    /// Whether a declared valuation is below the threshold. Ties included.
    pub fn included(&self, v: f64) -> bool {
        2.0 * self.epsilon * v <= self.per_player_pay()
    }

    /// Largest float that [`included`](Self::included) accepts near the
    /// threshold, so candidate sets land on the right side of it.
    pub fn largest_included(&self) -> f64 {
        let mut t = self.threshold();
        while !self.included(t) {
            t = t.next_down();
        }
        while self.included(t.next_up()) {
            t = t.next_up();
        }
        t
    }

    fn geom(&self) -> GeomParams {
        GeomParams::new(self.epsilon).expect("validated")
    }

    /// `sum b'_i`: bits of players above the threshold are zeroed.
    pub fn effective_sum(&self, x: &InputProfile) -> i64 {
        x.players()
            .iter()
            .filter(|p| p.bit && self.included(p.valuation))
            .count() as i64
    }

    /// Candidate types for the threshold mechanisms: both bits on each side
    /// of the threshold, plus representatives anchored at player `i`'s own
    /// valuation so monotonic neighbors of either class are always present.
    fn candidates(&self, own: PlayerType) -> Vec<PlayerType> {
        let low = self.largest_included();
        let high = 2.0 * low.max(self.threshold());
        let v = own.valuation;
        both_bits(&[0.0, low, high, v, v.min(low), v.max(high)])
    }
}

/// Threshold mechanism: players whose valuation is too high for the
/// per-player budget are neither counted nor paid.
///
/// 1. `b'_i = b_i` if `2 eps v_i <= B/n`, else `0`.
/// 2. Publish `sum b'_i + Geom(eps)`.
/// 3. Pay `B/n` to each player with `2 eps v_i <= B/n`.
#[derive(Debug, Clone)]
pub struct Alg1 {
    pub params: BudgetParams,
}

impl Alg1 {
    pub fn new(params: BudgetParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Runs the mechanism once.
    pub fn run(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        self.sample(x, seed)
    }
}

fn run_threshold<F: Fn(PlayerType) -> f64>(
    params: &BudgetParams,
    x: &InputProfile,
    seed: u64,
    pay: F,
) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = params.effective_sum(x) + params.geom().sample(&mut rng);
    Outcome {
        count,
        payments: x.players().iter().map(|&p| pay(p)).collect(),
    }
}

impl Mechanism for Alg1 {
    fn name(&self) -> &'static str {
        "alg1"
    }

    fn player_count(&self) -> Option<usize> {
        Some(self.params.n)
    }

    fn output_dist(&self, x: &InputProfile, mass_tol: f64) -> Result<CountDistribution> {
        check_size(self.player_count(), x)?;
        shifted_geom_dist(self.params.geom(), self.params.effective_sum(x), mass_tol)
    }

    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64> {
        check_size(self.player_count(), x)?;
        let p = x.player(i)?;
        Ok(if self.params.included(p.valuation) {
            self.params.per_player_pay()
        } else {
            0.0
        })
    }

    fn sample(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        check_size(self.player_count(), x)?;
        let bp = self.params;
        Ok(run_threshold(&bp, x, seed, |p| {
            if bp.included(p.valuation) {
                bp.per_player_pay()
            } else {
                0.0
            }
        }))
    }

    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>> {
        check_size(self.player_count(), x)?;
        Ok(self.params.candidates(x.player(i)?))
    }

    fn claims_truthful(&self, x: &InputProfile, i: usize) -> bool {
        x.player(i)
            .map(|p| self.params.included(p.valuation))
            .unwrap_or(false)
    }
}

/// The threshold mechanism, except that every player with bit 0 is paid
/// `B/n` whatever their valuation.
///
/// The payment therefore reveals the player's bit to whoever makes it.
#[derive(Debug, Clone)]
pub struct Alg1Prime {
    pub params: BudgetParams,
}

impl Alg1Prime {
    pub fn new(params: BudgetParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    fn pay_for(&self, p: PlayerType) -> f64 {
        if !p.bit || self.params.included(p.valuation) {
            self.params.per_player_pay()
        } else {
            0.0
        }
    }
}

/// Payment of the bit-zero variant to player `i`.
pub fn alg1_prime_pay(params: BudgetParams, x: &InputProfile, i: usize) -> Result<f64> {
    Alg1Prime::new(params)?.expected_pay(x, i)
}

impl Mechanism for Alg1Prime {
    fn name(&self) -> &'static str {
        "alg1_prime"
    }

    fn player_count(&self) -> Option<usize> {
        Some(self.params.n)
    }

    fn output_dist(&self, x: &InputProfile, mass_tol: f64) -> Result<CountDistribution> {
        check_size(self.player_count(), x)?;
        shifted_geom_dist(self.params.geom(), self.params.effective_sum(x), mass_tol)
    }

    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64> {
        check_size(self.player_count(), x)?;
        Ok(self.pay_for(x.player(i)?))
    }

    fn sample(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        check_size(self.player_count(), x)?;
        Ok(run_threshold(&self.params, x, seed, |p| self.pay_for(p)))
    }

    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>> {
        check_size(self.player_count(), x)?;
        Ok(self.params.candidates(x.player(i)?))
    }

    fn claims_truthful(&self, x: &InputProfile, i: usize) -> bool {
        x.player(i)
            .map(|p| !p.bit || self.params.included(p.valuation))
            .unwrap_or(false)
    }
}

/// Flat pay, sample size and distinguishability constant of the
/// subsampling mechanism.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubsampleParams {
    pub flat_pay: f64,
    pub sample_size: usize,
    /// The constant `C` with `k < C`; `None` means unbounded.
    #[serde(default)]
    pub distinguishability_budget: Option<f64>,
}

impl SubsampleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.flat_pay.is_finite() && self.flat_pay >= 0.0) {
            return Err(Error::param(
                "flat_pay",
                format!("must be finite and >= 0, got {}", self.flat_pay),
            ));
        }
        if self.sample_size == 0 {
            return Err(Error::param("sample_size", "must be >= 1"));
        }
        if let Some(c) = self.distinguishability_budget {
            if (self.sample_size as f64) >= c || c.is_nan() {
                return Err(Error::param(
                    "distinguishability_budget",
                    format!("sample size {} must be < C = {c}", self.sample_size),
                ));
            }
        }
        Ok(())
    }
}

/// Pays everyone a flat amount, samples `k` players uniformly and publishes
/// the scaled sample sum `(n/k) * sum_{A} b_i`, rounded half to even.
/// Declarations are ignored.
#[derive(Debug, Clone)]
pub struct Subsample {
    pub params: SubsampleParams,
}

/// `round_half_even(n * m / k)` in exact integer arithmetic.
pub fn scaled_count(n: usize, k: usize, m: usize) -> i64 {
    let num = (n * m) as i64;
    let k = k as i64;
    let (q, r) = (num / k, num % k);
    match (2 * r).cmp(&k) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

impl Subsample {
    pub fn new(params: SubsampleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    fn check_k(&self, x: &InputProfile) -> Result<()> {
        if self.params.sample_size > x.len() {
            return Err(Error::param(
                "sample_size",
                format!("k = {} exceeds n = {}", self.params.sample_size, x.len()),
            ));
        }
        Ok(())
    }

    /// Runs the mechanism once.
    pub fn run(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        self.sample(x, seed)
    }
}

impl Mechanism for Subsample {
    fn name(&self) -> &'static str {
        "subsample"
    }

    /// Hypergeometric law of the sampled ones, pushed through the scaling.
    fn output_dist(&self, x: &InputProfile, _mass_tol: f64) -> Result<CountDistribution> {
        self.check_k(x)?;
        let n = x.len();
        let k = self.params.sample_size;
        let ones = x.bit_sum() as usize;
        let total = binomial(n, k) as f64;
        let mut atoms = BTreeMap::new();
        for m in 0..=k.min(ones) {
            let ways = binomial(ones, m) * binomial(n - ones, k - m);
            if ways > 0 {
                *atoms.entry(scaled_count(n, k, m)).or_insert(0.0) += ways as f64 / total;
            }
        }
        CountDistribution::finite(atoms)
    }

    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64> {
        check_index(x, i)?;
        Ok(self.params.flat_pay)
    }

    fn sample(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        self.check_k(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = x.len();
        let k = self.params.sample_size;
        let chosen = rand::seq::index::sample(&mut rng, n, k);
        let m = chosen.iter().filter(|&j| x.players()[j].bit).count();
        Ok(Outcome {
            count: scaled_count(n, k, m),
            payments: vec![self.params.flat_pay; n],
        })
    }

    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>> {
        let v = x.player(i)?.valuation;
        Ok(both_bits(&[0.0, v]))
    }
}

/// Untruthful baseline: publishes `sum b_i + Geom(eps)` and pays each
/// player their declared valuation times `eps`.
#[derive(Debug, Clone)]
pub struct PayDeclared {
    geom: GeomParams,
}

impl PayDeclared {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(Self {
            geom: GeomParams::new(epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.geom.epsilon()
    }

    /// Runs the mechanism once.
    pub fn run(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        self.sample(x, seed)
    }
}

impl Mechanism for PayDeclared {
    fn name(&self) -> &'static str {
        "pay_declared"
    }

    fn output_dist(&self, x: &InputProfile, mass_tol: f64) -> Result<CountDistribution> {
        shifted_geom_dist(self.geom, x.bit_sum(), mass_tol)
    }

    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64> {
        Ok(x.player(i)?.valuation * self.geom.epsilon())
    }

    fn sample(&self, x: &InputProfile, seed: u64) -> Result<Outcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Outcome {
            count: x.bit_sum() + self.geom.sample(&mut rng),
            payments: x
                .players()
                .iter()
                .map(|p| p.valuation * self.geom.epsilon())
                .collect(),
        })
    }

    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>> {
        let v = x.player(i)?.valuation;
        Ok(both_bits(&[0.0, v]))
    }

    /// Payment is linear in the declaration, so larger reports are always
    /// represented.
    fn deviation_valuations(&self, x: &InputProfile, i: usize) -> Result<Vec<f64>> {
        let v = x.player(i)?.valuation;
        let mut vals = vec![0.0, v / 2.0, v, 2.0 * v.abs() + 1.0, 100.0];
        dedup_f64(&mut vals);
        Ok(vals)
    }
}

/// Publishes the exact bit sum and pays everyone a flat amount.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    pub flat_pay: f64,
}

impl Mechanism for ExactSum {
    fn name(&self) -> &'static str {
        "exact_sum"
    }

    fn output_dist(&self, x: &InputProfile, _mass_tol: f64) -> Result<CountDistribution> {
        Ok(CountDistribution::point_mass(x.bit_sum()))
    }

    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64> {
        check_index(x, i)?;
        Ok(self.flat_pay)
    }

    fn sample(&self, x: &InputProfile, _seed: u64) -> Result<Outcome> {
        Ok(Outcome {
            count: x.bit_sum(),
            payments: vec![self.flat_pay; x.len()],
        })
    }

    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>> {
        let v = x.player(i)?.valuation;
        Ok(both_bits(&[0.0, v]))
    }
}

/// Ignores its input: publishes a fixed count and pays a fixed amount.
#[derive(Debug, Clone, Default)]
pub struct ConstantOutput {
    pub value: i64,
    pub flat_pay: f64,
}

impl Mechanism for ConstantOutput {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn output_dist(&self, _x: &InputProfile, _mass_tol: f64) -> Result<CountDistribution> {
        Ok(CountDistribution::point_mass(self.value))
    }

    fn expected_pay(&self, x: &InputProfile, i: usize) -> Result<f64> {
        check_index(x, i)?;
        Ok(self.flat_pay)
    }

    fn sample(&self, x: &InputProfile, _seed: u64) -> Result<Outcome> {
        Ok(Outcome {
            count: self.value,
            payments: vec![self.flat_pay; x.len()],
        })
    }

    fn candidate_types(&self, x: &InputProfile, i: usize) -> Result<Vec<PlayerType>> {
        let v = x.player(i)?.valuation;
        Ok(both_bits(&[0.0, v]))
    }
}
