//! Human-readable tables.

use std::fmt::Write;

use monopriv::audit::AuditReport;

use crate::runner::RunReport;

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let last = cells.len() - 1;
        for (k, c) in cells.iter().enumerate() {
            if k == last {
                out.push_str(c);
            } else {
                let _ = write!(out, "{c:<w$}  ", w = widths[k]);
            }
        }
        out.push('\n');
    };
    line(
        &mut out,
        &header.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
    );
    line(
        &mut out,
        &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>(),
    );
    for r in rows {
        line(&mut out, r);
    }
    out
}

fn fmt_margin(m: Option<f64>) -> String {
    m.map(|m| format!("{m:.6}")).unwrap_or_default()
}

fn fmt_vals(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_bits(b: &[u8]) -> String {
    b.iter().map(|x| x.to_string()).collect()
}

pub fn render_audit(r: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "audit {:?}: mechanism {}, loss model {}, n = {}{}",
        r.audit,
        r.mechanism,
        r.loss_model,
        r.n,
        r.delta
            .map(|d| format!(", delta = {d:.6}"))
            .unwrap_or_default()
    );
    let c = &r.chain;
    let rows: Vec<Vec<String>> = c
        .inputs
        .iter()
        .enumerate()
        .map(|(k, x)| {
            vec![
                c.labels[k].clone(),
                fmt_bits(&x.bits()),
                fmt_vals(&x.valuations()),
                if k == 0 {
                    String::new()
                } else {
                    c.step_distances[k - 1].to_string()
                },
            ]
        })
        .collect();
    out.push_str(&table(
        &["hybrid", "bits", "valuations", "distance to previous"],
        &rows,
    ));
    let _ = writeln!(
        out,
        "payment bounds: {}; valuation thresholds: {}",
        fmt_vals(&c.payments),
        fmt_vals(&c.thresholds)
    );
    let _ = writeln!(
        out,
        "end-to-end distance {} vs bound {:.6}: {}",
        c.end_to_end, r.claim_bound, r.claim
    );
    let _ = writeln!(out, "max single-player distance {}", r.max_player_distance);
    for a in &r.accuracy {
        let _ = writeln!(
            out,
            "accuracy at {}: miss probability {} vs beta {:.6}: {}",
            a.label, a.result.miss_probability, a.result.beta, a.result.verdict
        );
    }
    if let Some(t) = &r.tradeoff {
        let _ = writeln!(
            out,
            "high players {} at L = {}, tau players {}, chain bound {:.6}, beta_max {:.6}, fails for every beta < beta_max: {}",
            t.high_players, t.high_valuation, t.tau_players, t.chain_bound, t.beta_max, t.fails_below_beta_max
        );
    }
    let _ = writeln!(out, "verdict: {} ({})", r.verdict.as_str(), r.summary);
    out
}

pub fn render_report(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mechanism {}, loss model {}, {} profiles, mass_tol {}",
        r.mechanism,
        r.loss_model.as_deref().unwrap_or("-"),
        r.profiles,
        r.mass_tol
    );
    if !r.rows.is_empty() {
        let rows: Vec<Vec<String>> = r
            .rows
            .iter()
            .map(|x| {
                vec![
                    x.check.clone(),
                    x.profile_id.map(|p| p.to_string()).unwrap_or_default(),
                    x.player.map(|p| p.to_string()).unwrap_or_default(),
                    x.verdict.to_string(),
                    fmt_margin(x.margin),
                    x.witness.clone(),
                ]
            })
            .collect();
        out.push_str(&table(
            &["check", "profile", "player", "verdict", "margin", "witness"],
            &rows,
        ));
    }
    for a in &r.audits {
        out.push('\n');
        out.push_str(&render_audit(a));
    }
    let _ = writeln!(
        out,
        "\n{} pass, {} fail, {} inconclusive (exit {})",
        r.counts.pass, r.counts.fail, r.counts.inconclusive, r.exit_code
    );
    out
}
