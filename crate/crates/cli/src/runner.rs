//! Executes a [`RunConfig`] and collects report rows.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use monopriv::audit::{
    audit_general_impossibility, audit_monotonic_impossibility, audit_payment_accuracy_tradeoff,
    AuditReport, AuditVerdict, TradeoffParams,
};
use monopriv::par::map_collect;
use monopriv::verify::{
    check_accuracy, check_distinguishable, check_dp, check_ir, check_truthful, default_deviations,
    trial_seed, AccuracyMode, AccuracySpec, Distinguishability, DistinguishabilityQuery,
};
use monopriv::{Exec, InputProfile, LossModel, Mechanism, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::{AccuracyModeConfig, CheckConfig, PlayerSelect, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// One CSV row: a verdict for a (check, profile, player) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub check: String,
    pub mechanism: String,
    pub profile_id: Option<usize>,
    pub player: Option<usize>,
    pub verdict: Verdict,
    pub margin: Option<f64>,
    pub witness: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mechanism: String,
    pub loss_model: Option<String>,
    pub seed: Option<u64>,
    pub mass_tol: f64,
    pub profiles: usize,
    pub counts: Counts,
    pub exit_code: i32,
    pub rows: Vec<Row>,
    pub audits: Vec<AuditReport>,
}

impl RunReport {
    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        write_rows(&mut w, &self.rows)?;
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        write_rows(&mut w, &self.rows)?;
        Ok(String::from_utf8(
            w.into_inner().map_err(|e| anyhow!("{e}"))?,
        )?)
    }
}

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 7] = [
    "check",
    "mechanism",
    "profile_id",
    "player",
    "verdict",
    "margin",
    "witness",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_rows<W: std::io::Write>(w: &mut csv::Writer<W>, rows: &[Row]) -> anyhow::Result<()> {
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.check.clone(),
            r.mechanism.clone(),
            opt(r.profile_id),
            opt(r.player),
            r.verdict.to_string(),
            opt(r.margin),
            r.witness.clone(),
        ])?;
    }
    Ok(())
}

pub fn exit_code(counts: Counts) -> i32 {
    if counts.fail > 0 {
        EXIT_FAIL
    } else if counts.inconclusive > 0 {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_PASS
    }
}

fn audit_verdict(v: AuditVerdict) -> Verdict {
    match v {
        AuditVerdict::ImpossibilityRespected => Verdict::Pass,
        AuditVerdict::PremiseViolated | AuditVerdict::Anomaly => Verdict::Fail,
        AuditVerdict::Inconclusive => Verdict::Inconclusive,
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    mech: &'a dyn Mechanism,
    model: Option<&'a LossModel>,
    profiles: &'a [InputProfile],
    exec: Exec,
}

impl Ctx<'_> {
    fn model(&self) -> anyhow::Result<&LossModel> {
        self.model
            .ok_or_else(|| anyhow!("check needs a loss_model"))
    }

    fn row(&self, check: &str, pid: Option<usize>, player: Option<usize>) -> Row {
        Row {
            check: check.into(),
            mechanism: self.mech.name().into(),
            profile_id: pid,
            player,
            verdict: Verdict::Pass,
            margin: None,
            witness: String::new(),
        }
    }

    /// Runs `f` on every profile concurrently and concatenates the rows in
    /// profile order.
    fn per_profile<F>(&self, f: F) -> anyhow::Result<Vec<Row>>
    where
        F: Fn(usize, &InputProfile) -> anyhow::Result<Vec<Row>> + Sync + Send,
    {
        let indexed: Vec<(usize, &InputProfile)> = self.profiles.iter().enumerate().collect();
        let mut rows = Vec::new();
        for r in map_collect(self.exec, &indexed, |&(k, x)| f(k, x)) {
            rows.extend(r?);
        }
        Ok(rows)
    }

    fn audit_n(&self, n: Option<usize>) -> anyhow::Result<usize> {
        n.or(self.mech.player_count())
            .or(self.profiles.first().map(|p| p.len()))
            .ok_or_else(|| anyhow!("cannot infer n: set it on the check or supply a profile"))
    }

    fn run_check(
        &self,
        k: usize,
        check: &CheckConfig,
    ) -> anyhow::Result<(Vec<Row>, Option<AuditReport>)> {
        let name = check.name();
        let tol = self.cfg.mass_tol;
        let rows = match check {
            CheckConfig::Ir => {
                let model = self.model()?;
                self.per_profile(|pid, x| {
                    Ok(check_ir(self.mech, model, x, tol)?
                        .into_iter()
                        .map(|r| Row {
                            verdict: r.verdict,
                            margin: Some(r.margin),
                            witness: format!("pay={} loss={}", r.pay, r.loss),
                            ..self.row(name, Some(pid), Some(r.player))
                        })
                        .collect())
                })?
            }
            CheckConfig::Truthful {
                players,
                extra_deviations,
            } => {
                let model = self.model()?;
                self.per_profile(|pid, x| {
                    let mut rows = Vec::new();
                    for i in 0..x.len() {
                        if *players == PlayerSelect::Eligible && !self.mech.claims_truthful(x, i) {
                            continue;
                        }
                        let devs = default_deviations(self.mech, x, i, extra_deviations)?;
                        let r = check_truthful(self.mech, model, x, i, &devs, tol)?;
                        rows.push(Row {
                            verdict: r.verdict,
                            margin: Some(r.margin),
                            witness: opt(r.witness.map(|w| format!("declare={w}"))),
                            ..self.row(name, Some(pid), Some(i))
                        });
                    }
                    Ok(rows)
                })?
            }
            CheckConfig::Accuracy {
                alpha,
                alpha_prime,
                beta,
                mode,
            } => {
                let spec = AccuracySpec::new(*alpha, alpha_prime.unwrap_or(*alpha), *beta)?;
                self.per_profile(|pid, x| {
                    let mode = match mode {
                        AccuracyModeConfig::Exact => AccuracyMode::Exact,
                        AccuracyModeConfig::MonteCarlo { trials } => AccuracyMode::MonteCarlo {
                            trials: *trials,
                            seed: trial_seed(
                                self.cfg
                                    .seed
                                    .ok_or_else(|| anyhow!("monte_carlo needs a seed"))?,
                                (k as u64) << 32 | pid as u64,
                            ),
                        },
                    };
                    let r = check_accuracy(self.mech, x, &spec, mode, tol, Exec::Sequential)?;
                    Ok(vec![Row {
                        verdict: r.verdict,
                        margin: Some(r.margin),
                        witness: format!("miss={}", r.miss_probability),
                        ..self.row(name, Some(pid), None)
                    }])
                })?
            }
            CheckConfig::Dp { epsilon } => self.per_profile(|pid, x| {
                Ok(check_dp(self.mech, x, *epsilon, tol)?
                    .into_iter()
                    .map(|r| Row {
                        verdict: r.verdict,
                        margin: Some(r.epsilon - r.level),
                        witness: opt(r
                            .witness
                            .map(|(b, v)| format!("neighbor=({},{v})", b as u8))),
                        ..self.row(name, Some(pid), Some(r.player))
                    })
                    .collect())
            })?,
            CheckConfig::Distinguishability {
                delta,
                relation,
                player,
                expect,
            } => self.per_profile(|pid, x| {
                let players: Vec<usize> = match player {
                    Some(i) => vec![*i],
                    None => (0..x.len()).collect(),
                };
                let mut rows = Vec::new();
                for i in players {
                    let q = DistinguishabilityQuery {
                        player: i,
                        delta: *delta,
                        relation: *relation,
                    };
                    let r = check_distinguishable(self.mech, x, &q, tol)?;
                    let verdict = match (r.outcome, expect) {
                        (Distinguishability::Inconclusive, _) => Verdict::Inconclusive,
                        (_, None) => Verdict::Pass,
                        (o, Some(e)) => {
                            if (o == Distinguishability::Distinguishable) == *e {
                                Verdict::Pass
                            } else {
                                Verdict::Fail
                            }
                        }
                    };
                    let mut witness = format!("{:?} sup={}", r.outcome, r.sup.sup);
                    if let Some((b, v)) = r.sup.witness {
                        witness.push_str(&format!(" neighbor=({},{v})", b as u8));
                    }
                    if let Some(t) = r.refine_mass_tol {
                        witness.push_str(&format!(" retry_mass_tol={t}"));
                    }
                    rows.push(Row {
                        verdict,
                        margin: Some(r.sup.sup.lo - delta),
                        witness,
                        ..self.row(name, Some(pid), Some(i))
                    });
                }
                Ok(rows)
            })?,
            CheckConfig::AuditGeneral { n, delta } => {
                let n = self.audit_n(*n)?;
                let delta = delta.unwrap_or(1.0 / (6.0 * n as f64));
                let r = audit_general_impossibility(
                    self.mech,
                    self.model()?,
                    n,
                    delta,
                    tol,
                    self.exec,
                )?;
                return Ok((vec![self.audit_row(name, &r)], Some(r)));
            }
            CheckConfig::AuditMonotonic { n, delta } => {
                let n = self.audit_n(*n)?;
                let delta = delta.unwrap_or(1.0 / (3.0 * n as f64));
                let r = audit_monotonic_impossibility(
                    self.mech,
                    self.model()?,
                    n,
                    delta,
                    tol,
                    self.exec,
                )?;
                return Ok((vec![self.audit_row(name, &r)], Some(r)));
            }
            CheckConfig::AuditTradeoff {
                n,
                tau,
                gamma,
                eta,
                beta,
                max_pay,
            } => {
                let params = TradeoffParams {
                    tau: *tau,
                    gamma: *gamma,
                    eta: *eta,
                    beta: *beta,
                    max_pay: *max_pay,
                    n: self.audit_n(*n)?,
                };
                let r = audit_payment_accuracy_tradeoff(
                    self.mech,
                    self.model()?,
                    &params,
                    tol,
                    self.exec,
                )?;
                return Ok((vec![self.audit_row(name, &r)], Some(r)));
            }
        };
        Ok((rows, None))
    }

    fn audit_row(&self, name: &str, r: &AuditReport) -> Row {
        let (player, witness) = match &r.first_failure {
            Some(f) => (f.player, format!("{}: {}", r.verdict.as_str(), r.summary)),
            None => (None, format!("{}: {}", r.verdict.as_str(), r.summary)),
        };
        Row {
            verdict: audit_verdict(r.verdict),
            margin: Some(r.claim_bound - r.chain.end_to_end.hi),
            witness,
            ..self.row(name, None, player)
        }
    }
}

/// Runs every check in declared order.
pub fn run(cfg: &RunConfig, exec: Exec) -> anyhow::Result<RunReport> {
    cfg.validate()?;
    let mech = cfg.mechanism.build().context("mechanism")?;
    let model = cfg
        .loss_model
        .as_ref()
        .map(|l| l.build())
        .transpose()
        .context("loss_model")?;
    let profiles = cfg.load_profiles()?;
    if let Some(n) = mech.player_count() {
        if let Some((k, p)) = profiles.iter().enumerate().find(|(_, p)| p.len() != n) {
            bail!(
                "profiles[{k}]: has {} players, mechanism expects {n}",
                p.len()
            );
        }
    }
    let ctx = Ctx {
        cfg,
        mech: mech.as_ref(),
        model: model.as_ref(),
        profiles: &profiles,
        exec,
    };
    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for (k, check) in cfg.checks.iter().enumerate() {
        let (r, a) = ctx
            .run_check(k, check)
            .with_context(|| format!("checks[{k}] ({})", check.name()))?;
        rows.extend(r);
        audits.extend(a);
    }
    let mut counts = Counts::default();
    for r in &rows {
        match r.verdict {
            Verdict::Pass => counts.pass += 1,
            Verdict::Fail => counts.fail += 1,
            Verdict::Inconclusive => counts.inconclusive += 1,
        }
    }
    Ok(RunReport {
        mechanism: mech.name().into(),
        loss_model: model.map(|m| m.name().to_string()),
        seed: cfg.seed,
        mass_tol: cfg.mass_tol,
        profiles: profiles.len(),
        counts,
        exit_code: exit_code(counts),
        rows,
        audits,
    })
}
