//! Exact laws for published counts.
//!
//! The two-sided geometric distribution has infinite support, so every
//! stored law keeps a window of atoms plus a certified bound on the mass
//! outside it. Quantities derived from laws are returned as [`Interval`]s
//! whose width accounts for that missing mass.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(
            lo.is_nan() || hi.is_nan() || lo <= hi,
            "inverted interval [{lo}, {hi}]"
        );
        // adding +0 turns -0 into +0
        Self {
            lo: lo + 0.0,
            hi: hi + 0.0,
        }
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    pub fn zero() -> Self {
        Self::point(0.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// `self - other` in interval arithmetic.
    pub fn minus(&self, other: &Interval) -> Interval {
        Interval::new(self.lo - other.hi, self.hi - other.lo)
    }

    /// Multiply by a scalar, flipping the ends when it is negative.
    pub fn scale(&self, c: f64) -> Interval {
        if c == 0.0 {
            return Interval::zero();
        }
        let (a, b) = (self.lo * c, self.hi * c);
        Interval::new(a.min(b), a.max(b))
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:.6e}, {:.6e}]", self.lo, self.hi)
    }
}

/// Parameters of the symmetric geometric distribution `Geom(eps)`, whose pmf
/// is proportional to `exp(-eps * |k|)` over the integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomParams {
    epsilon: f64,
}

impl GeomParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("must be finite and > 0, got {epsilon}"),
            ));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Decay `alpha = exp(-eps)`.
    pub fn alpha(&self) -> f64 {
        (-self.epsilon).exp()
    }

    /// `(1 - alpha) / (1 + alpha)`, the mass at zero.
    fn norm(&self) -> f64 {
        (self.epsilon / 2.0).tanh()
    }

    pub fn pmf(&self, k: i64) -> f64 {
        self.norm() * (-self.epsilon * k.unsigned_abs() as f64).exp()
    }

    pub fn ln_pmf(&self, k: i64) -> f64 {
        self.norm().ln() - self.epsilon * k.unsigned_abs() as f64
    }

    /// `Pr[|X| >= t] = 2 alpha^t / (1 + alpha)` for `t >= 0`.
    fn tail_from(&self, t: u64) -> f64 {
        if t == 0 {
            return 1.0;
        }
        2.0 * (-self.epsilon * t as f64).exp() / (1.0 + self.alpha())
    }

    /// Draws one sample by inverting the CDF of `|X|` on a uniform in
    /// `[0, 1)`, then attaching an independent fair sign when nonzero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        // Pr[|X| <= m] = 1 - 2 alpha^(m+1) / (1 + alpha); the smallest m
        // exceeding u solves alpha^(m+1) < r.
        let r = (1.0 - u) * (1.0 + self.alpha()) / 2.0;
        let m = (-r.ln() / self.epsilon).floor();
        let m = if m.is_finite() && m < i64::MAX as f64 {
            m as i64
        } else {
            i64::MAX
        };
        if m == 0 {
            return 0;
        }
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    }
}

/// `Pr[Geom(eps) = k]`.
pub fn geom_pmf(g: GeomParams, k: i64) -> f64 {
    g.pmf(k)
}

/// `Pr[|Geom(eps)| >= t]` for `t >= 1`.
pub fn geom_tail(g: GeomParams, t: i64) -> Result<f64> {
    if t < 1 {
        return Err(Error::param(
            "t",
            format!("tail index must be >= 1, got {t}"),
        ));
    }
    let tail = g.tail_from(t as u64);
    debug_assert!(tail < 2.0 * (-g.epsilon * t as f64).exp());
    Ok(tail)
}

/// What is known about a law beyond its stored atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Law {
    /// Stored atoms are the whole support.
    Finite,
    /// `shift + Geom(epsilon)`, evaluable everywhere.
    ShiftedGeom { geom: GeomParams, shift: i64 },
    /// Read back from serialized form: only the stored window is known.
    Opaque,
}

/// Law of a published count: stored atoms plus a certified upper bound on
/// the probability outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    atoms: BTreeMap<i64, f64>,
    truncation_mass: f64,
    law: Law,
}

const MASS_SLACK: f64 = 1e-12;

impl CountDistribution {
    /// A law with finite support given by `atoms`.
    pub fn finite(atoms: BTreeMap<i64, f64>) -> Result<Self> {
        let d = Self {
            atoms,
            truncation_mass: 0.0,
            law: Law::Finite,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(k: i64) -> Self {
        Self {
            atoms: BTreeMap::from([(k, 1.0)]),
            truncation_mass: 0.0,
            law: Law::Finite,
        }
    }

    /// Stored atoms plus truncation bound with nothing known beyond them.
    pub fn from_parts(atoms: BTreeMap<i64, f64>, truncation_mass: f64) -> Result<Self> {
        let d = Self {
            atoms,
            truncation_mass,
            law: if truncation_mass == 0.0 {
                Law::Finite
            } else {
                Law::Opaque
            },
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if !(self.truncation_mass >= 0.0 && self.truncation_mass.is_finite()) {
            return Err(Error::Precondition(format!(
                "truncation mass must be finite and >= 0, got {}",
                self.truncation_mass
            )));
        }
        if let Some((k, p)) = self
            .atoms
            .iter()
            .find(|(_, p)| !(**p >= 0.0 && p.is_finite()))
        {
            return Err(Error::Precondition(format!(
                "atom {k} has invalid probability {p}"
            )));
        }
        let total = self.stored_mass() + self.truncation_mass;
        if (total - 1.0).abs() > MASS_SLACK {
            return Err(Error::Precondition(format!(
                "atoms plus truncation mass sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &BTreeMap<i64, f64> {
        &self.atoms
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub fn stored_mass(&self) -> f64 {
        self.atoms.values().sum()
    }

    /// Stored probability of `k`, zero when not stored.
    pub fn stored(&self, k: i64) -> f64 {
        self.atoms.get(&k).copied().unwrap_or(0.0)
    }

    /// Exact probability of `k` where it is known.
    pub fn pmf(&self, k: i64) -> Option<f64> {
        match self.law {
            Law::ShiftedGeom { geom, shift } => Some(geom.pmf(k - shift)),
            Law::Finite => Some(self.stored(k)),
            Law::Opaque => self.atoms.get(&k).copied(),
        }
    }

    /// Exact log-probability of `k`, `-inf` for impossible counts.
    pub fn ln_pmf(&self, k: i64) -> Option<f64> {
        match self.law {
            Law::ShiftedGeom { geom, shift } => Some(geom.ln_pmf(k - shift)),
            _ => self.pmf(k).map(f64::ln),
        }
    }

    /// True when both describe the same law exactly, which is stronger than
    /// equality of the stored windows.
    pub fn same_law(&self, other: &Self) -> bool {
        match (self.law, other.law) {
            (
                Law::ShiftedGeom {
                    geom: g1,
                    shift: s1,
                },
                Law::ShiftedGeom {
                    geom: g2,
                    shift: s2,
                },
            ) => g1 == g2 && s1 == s2,
            (Law::Finite, Law::Finite) => {
                let keys = self.atoms.keys().chain(other.atoms.keys());
                keys.into_iter().all(|&k| self.stored(k) == other.stored(k))
            }
            _ => false,
        }
    }

    /// Shift every atom by `c`.
    pub fn translate(&self, c: i64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|(&k, &p)| (k + c, p)).collect(),
            truncation_mass: self.truncation_mass,
            law: match self.law {
                Law::ShiftedGeom { geom, shift } => Law::ShiftedGeom {
                    geom,
                    shift: shift + c,
                },
                other => other,
            },
        }
    }

    /// Certified enclosure of the probability that the count satisfies
    /// `pred`. Truncated mass can only add to it.
    pub fn mass_where<F: Fn(i64) -> bool>(&self, pred: F) -> Interval {
        let inside: f64 = self
            .atoms
            .iter()
            .filter(|(&k, _)| pred(k))
            .map(|(_, &p)| p)
            .sum();
        Interval::new(inside, (inside + self.truncation_mass).min(1.0).max(inside))
    }

    /// Shift of a geometric law, when this is one.
    pub fn geometric_shift(&self) -> Option<i64> {
        match self.law {
            Law::ShiftedGeom { shift, .. } => Some(shift),
            _ => None,
        }
    }
}

impl Serialize for CountDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            atoms: &'a BTreeMap<i64, f64>,
            truncation_mass: f64,
        }
        Wire {
            atoms: &self.atoms,
            truncation_mass: self.truncation_mass,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CountDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            atoms: BTreeMap<i64, f64>,
            truncation_mass: f64,
        }
        let w = Wire::deserialize(d)?;
        CountDistribution::from_parts(w.atoms, w.truncation_mass).map_err(serde::de::Error::custom)
    }
}

/// Smallest window radius `t >= 0` whose excluded mass
/// `2 alpha^(t+1) / (1 + alpha)` is at most `mass_tol`.
pub fn window_radius(g: GeomParams, mass_tol: f64) -> u64 {
    let target = (2.0 / ((1.0 + g.alpha()) * mass_tol)).ln() / g.epsilon;
    let mut t = (target.ceil() - 1.0).max(0.0) as u64;
    while g.tail_from(t + 1) > mass_tol {
        t += 1;
    }
    while t > 0 && g.tail_from(t) <= mass_tol {
        t -= 1;
    }
    t
}

/// Law of `c + Geom(eps)` restricted to the smallest symmetric window
/// around `c` whose excluded mass is at most `mass_tol`.
pub fn shifted_geom_dist(g: GeomParams, c: i64, mass_tol: f64) -> Result<CountDistribution> {
    if !(mass_tol > 0.0 && mass_tol < 1.0) {
        return Err(Error::param(
            "mass_tol",
            format!("must lie in (0, 1), got {mass_tol}"),
        ));
    }
    let t = window_radius(g, mass_tol) as i64;
    let atoms = (-t..=t).map(|k| (c + k, g.pmf(k))).collect();
    Ok(CountDistribution {
        atoms,
        truncation_mass: g.tail_from(t as u64 + 1),
        law: Law::ShiftedGeom { geom: g, shift: c },
    })
}

/// Certified enclosure of the total variation distance.
///
/// `lo` sums `|p1 - p2| / 2` over the stored union; `hi` adds half of both
/// truncation masses. Identical laws give exactly `[0, 0]`.
pub fn statistical_distance(d1: &CountDistribution, d2: &CountDistribution) -> Interval {
    if d1.same_law(d2) {
        return Interval::zero();
    }
    let mut keys: Vec<i64> = d1.atoms.keys().chain(d2.atoms.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let lo = 0.5
        * keys
            .iter()
            .map(|&k| (d1.stored(k) - d2.stored(k)).abs())
            .sum::<f64>();
    let lo = lo.min(1.0);
    let hi = (lo + 0.5 * (d1.truncation_mass + d2.truncation_mass)).min(1.0);
    Interval::new(lo, hi)
}

/// Largest truncation mass `dp_level` accepts.
pub const DP_MASS_TOL: f64 = 1e-9;

/// Pure-DP level between two laws: the largest absolute log-ratio over the
/// stored atoms of either law.
///
/// Probabilities are evaluated exactly where the law is known in closed
/// form. For a law read back from storage, an atom it does not hold is
/// skipped when the other side's probability there is at most
/// [`DP_MASS_TOL`], and makes the level infinite otherwise.
pub fn dp_level(d1: &CountDistribution, d2: &CountDistribution) -> Result<f64> {
    for d in [d1, d2] {
        if d.truncation_mass > DP_MASS_TOL {
            return Err(Error::Precondition(format!(
                "dp_level needs truncation mass <= {DP_MASS_TOL}, got {}",
                d.truncation_mass
            )));
        }
    }
    if d1.same_law(d2) {
        return Ok(0.0);
    }
    let mut keys: Vec<i64> = d1.atoms.keys().chain(d2.atoms.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let mut level = 0.0f64;
    for k in keys {
        let (l1, l2) = match (d1.ln_pmf(k), d2.ln_pmf(k)) {
            (Some(l1), Some(l2)) => (l1, l2),
            // only reachable for opaque laws: one side's value is unknown
            (Some(l), None) | (None, Some(l)) => {
                if l.exp() > DP_MASS_TOL {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            (None, None) => continue,
        };
        match (l1 == f64::NEG_INFINITY, l2 == f64::NEG_INFINITY) {
            (true, true) => {}
            (true, false) | (false, true) => return Ok(f64::INFINITY),
            (false, false) => level = level.max((l1 - l2).abs()),
        }
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn g(eps: f64) -> GeomParams {
        GeomParams::new(eps).unwrap()
    }

    /// Unnormalized weights summed over `|k| <= radius`, then normalized.
    fn brute_pmf(eps: f64, radius: i64) -> impl Fn(i64) -> f64 {
        let z: f64 = (-radius..=radius)
            .map(|k| (-eps * k.abs() as f64).exp())
            .sum();
        move |k| {
            if k.abs() > radius {
                0.0
            } else {
                (-eps * k.abs() as f64).exp() / z
            }
        }
    }

    #[test]
    fn pmf_examples() {
        let p = brute_pmf(LN2, 200);
        assert!((geom_pmf(g(LN2), 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p(0) - 1.0 / 3.0).abs() < 1e-15);
        for k in [-1, 1] {
            assert!((geom_pmf(g(LN2), k) - 1.0 / 6.0).abs() < 1e-15);
            assert!((geom_pmf(g(LN2), k) - p(k)).abs() < 1e-15);
        }
        for k in 0..20 {
            assert_eq!(geom_pmf(g(0.3), k), geom_pmf(g(0.3), -k));
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(GeomParams::new(0.0).is_err());
        assert!(GeomParams::new(-1.0).is_err());
        assert!(GeomParams::new(f64::INFINITY).is_err());
        assert!(GeomParams::new(f64::NAN).is_err());
    }

    #[test]
    fn shifted_window_examples() {
        let d = shifted_geom_dist(g(LN2), 0, 0.5).unwrap();
        let keys: Vec<i64> = d.atoms().keys().copied().collect();
        assert_eq!(keys, vec![-1, 0, 1]);
        assert!((d.stored(-1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.stored(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.stored(1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.truncation_mass() - 1.0 / 3.0).abs() < 1e-15);

        let d = shifted_geom_dist(g(LN2), 0, 1e-12).unwrap();
        assert_eq!(window_radius(g(LN2), 1e-12), 40);
        assert_eq!(*d.atoms().keys().next().unwrap(), -40);
        // summation confirms the closed-form tail at the chosen radius
        let p = brute_pmf(LN2, 400);
        let tail: f64 = (41..=400).map(|k| 2.0 * p(k)).sum();
        assert!((tail - d.truncation_mass()).abs() < 1e-24);
        assert!(tail <= 1e-12);
        let tail_39: f64 = (40..=400).map(|k| 2.0 * p(k)).sum();
        assert!(tail_39 > 1e-12);
    }

    #[test]
    fn shifted_window_is_translation() {
        let base = shifted_geom_dist(g(0.7), 0, 1e-9).unwrap();
        let five = shifted_geom_dist(g(0.7), 5, 1e-9).unwrap();
        assert_eq!(base.translate(5), five);
        for (k, p) in base.atoms() {
            assert_eq!(five.stored(k + 5), *p);
        }
    }

    #[test]
    fn mass_tol_must_be_a_probability() {
        assert!(shifted_geom_dist(g(1.0), 0, 0.0).is_err());
        assert!(shifted_geom_dist(g(1.0), 0, 1.0).is_err());
    }

    #[test]
    fn tail_examples() {
        assert!((geom_tail(g(LN2), 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((geom_tail(g(LN2), 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(geom_tail(g(LN2), 0).is_err());
        for eps in [0.1, 0.5, LN2, 2.0] {
            for t in 1..30 {
                assert!(geom_tail(g(eps), t).unwrap() < 2.0 * (-eps * t as f64).exp());
            }
        }
    }

    #[test]
    fn tail_matches_wide_summation() {
        for eps in [0.1, 0.5, LN2, 2.0] {
            let p = brute_pmf(eps, 600);
            for t in 1..12 {
                let brute: f64 = (t..=600).map(|k| 2.0 * p(k)).sum();
                let closed = geom_tail(g(eps), t).unwrap();
                assert!((brute - closed).abs() < 1e-12, "eps={eps} t={t}");
            }
        }
    }

    #[test]
    fn distance_examples() {
        let d0 = shifted_geom_dist(g(LN2), 0, 1e-12).unwrap();
        let same = statistical_distance(&d0, &d0.clone());
        assert_eq!(same, Interval::zero());

        let d1 = shifted_geom_dist(g(LN2), 1, 1e-12).unwrap();
        let iv = statistical_distance(&d0, &d1);
        let p = brute_pmf(LN2, 200);
        let brute: f64 = 0.5 * (-201..=201).map(|k| (p(k) - p(k - 1)).abs()).sum::<f64>();
        assert!((brute - 1.0 / 3.0).abs() < 1e-14);
        assert!(
            iv.lo <= 1.0 / 3.0 + 1e-15 && 1.0 / 3.0 <= iv.hi + 1e-15,
            "{iv}"
        );
        assert!(iv.width() <= 1e-12);

        let mut prev = -1.0;
        for m in 0..=5 {
            let dm = shifted_geom_dist(g(LN2), m, 1e-12).unwrap();
            let iv = statistical_distance(&d0, &dm);
            assert!(iv.lo >= prev);
            prev = iv.lo;
        }
    }

    #[test]
    fn distance_of_disjoint_points_is_one() {
        let a = CountDistribution::point_mass(0);
        let b = CountDistribution::point_mass(3);
        assert_eq!(statistical_distance(&a, &b), Interval::point(1.0));
    }

    #[test]
    fn dp_level_examples() {
        let tol = 1e-12;
        let d3 = shifted_geom_dist(g(0.5), 3, tol).unwrap();
        let d4 = shifted_geom_dist(g(0.5), 4, tol).unwrap();
        assert!((dp_level(&d3, &d4).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(dp_level(&d3, &d3.clone()).unwrap(), 0.0);
        let d0 = shifted_geom_dist(g(0.5), 0, tol).unwrap();
        let d2 = shifted_geom_dist(g(0.5), 2, tol).unwrap();
        assert!((dp_level(&d0, &d2).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dp_level_precondition_and_disjoint_support() {
        let loose = shifted_geom_dist(g(0.5), 0, 1e-3).unwrap();
        let tight = shifted_geom_dist(g(0.5), 0, 1e-12).unwrap();
        assert!(matches!(
            dp_level(&loose, &tight),
            Err(Error::Precondition(_))
        ));
        let a = CountDistribution::point_mass(0);
        let b = CountDistribution::point_mass(1);
        assert_eq!(dp_level(&a, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn serialization_format() {
        let d = CountDistribution::finite(BTreeMap::from([(-1, 0.25), (2, 0.75)])).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"atoms":{"-1":0.25,"2":0.75},"truncation_mass":0.0}"#);
        let back: CountDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let bad = r#"{"atoms":{"0":0.5},"truncation_mass":0.0}"#;
        assert!(serde_json::from_str::<CountDistribution>(bad).is_err());
    }

    #[test]
    fn sampler_matches_pmf() {
        let geom = g(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 200_000;
        let mut counts = BTreeMap::<i64, u64>::new();
        for _ in 0..trials {
            *counts.entry(geom.sample(&mut rng)).or_default() += 1;
        }
        for k in -4..=4 {
            let p = geom.pmf(k);
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let freq = *counts.get(&k).unwrap_or(&0) as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-12,
                "k={k} freq={freq} p={p}"
            );
        }
        // same seed, same stream
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<i64> = (0..50).map(|_| geom.sample(&mut a)).collect();
        let ys: Vec<i64> = (0..50).map(|_| geom.sample(&mut b)).collect();
        assert_eq!(xs, ys);
    }

    fn arb_law() -> impl Strategy<Value = CountDistribution> {
        prop_oneof![
            (0.05f64..3.0, -5i64..5, 1e-12f64..1e-3).prop_map(|(e, c, tol)| shifted_geom_dist(
                g(e),
                c,
                tol
            )
            .unwrap()),
            proptest::collection::vec(0.01f64..1.0, 1..6).prop_map(|w| {
                let z: f64 = w.iter().sum();
                let atoms = w
                    .iter()
                    .enumerate()
                    .map(|(k, x)| (k as i64 - 2, x / z))
                    .collect();
                CountDistribution::from_parts(atoms, 0.0).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn constructed_laws_are_normalized(e in 0.05f64..4.0, c in -50i64..50, tol in 1e-13f64..0.5) {
            let d = shifted_geom_dist(g(e), c, tol).unwrap();
            prop_assert!((d.stored_mass() + d.truncation_mass() - 1.0).abs() <= 1e-12);
            prop_assert!(d.truncation_mass() <= tol);
            prop_assert!(d.atoms().values().all(|&p| p >= 0.0));
        }

        #[test]
        fn distance_triangle_inequality(a in arb_law(), b in arb_law(), c in arb_law()) {
            let ac = statistical_distance(&a, &c);
            let ab = statistical_distance(&a, &b);
            let bc = statistical_distance(&b, &c);
            prop_assert!(ac.lo <= ab.hi + bc.hi + 1e-12);
        }

        #[test]
        fn dp_level_of_shifts(e in 0.05f64..3.0, c1 in -10i64..10, c2 in -10i64..10) {
            let d1 = shifted_geom_dist(g(e), c1, 1e-12).unwrap();
            let d2 = shifted_geom_dist(g(e), c2, 1e-12).unwrap();
            let level = dp_level(&d1, &d2).unwrap();
            prop_assert!((level - e * (c1 - c2).abs() as f64).abs() <= 1e-9);
        }
    }
}
