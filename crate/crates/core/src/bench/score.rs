use std::io::Write;

use serde::Serialize;

use super::run::{Algorithm, InstanceResult};
use super::sample::factors_of;
use crate::error::Result;

/// Per-instance scores: gain over the best feasible gain among the three
/// feasibility-seeking methods, zero when infeasible. The relaxation is
/// scored with its bound over the same denominator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScore {
    pub instance: String,
    /// Price set of a sample instance, if the name encodes one.
    pub price_set: Option<String>,
    pub best: f64,
    /// Gains in [`Algorithm::ALL`] order; `None` when infeasible (or, for
    /// the relaxation, when it failed).
    pub gains: [Option<f64>; 4],
    pub feasible: [bool; 4],
    /// `None` when the instance is excluded for lack of a positive best.
    pub scores: Option<[f64; 4]>,
}

/// Mean score and feasibility rate over a group of instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub instances: usize,
    /// Instances that entered the mean score.
    pub scored: usize,
    pub mean_score: [f64; 4],
    pub feasibility: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub instances: Vec<InstanceScore>,
    /// One row per price set in order of appearance, then the overall `M`.
    pub groups: Vec<GroupSummary>,
    pub warnings: Vec<String>,
}

const SCORED: [Algorithm; 3] = [Algorithm::Price, Algorithm::Predict, Algorithm::Heuristic];

pub fn score(results: &[InstanceResult]) -> ScoreTable {
    let mut warnings = Vec::new();
    let instances: Vec<InstanceScore> = results
        .iter()
        .map(|r| {
            let gains = Algorithm::ALL.map(|a| {
                let o = r.outcome(a);
                if a == Algorithm::Lp || o.feasible {
                    o.gain
                } else {
                    None
                }
            });
            let feasible = Algorithm::ALL.map(|a| r.outcome(a).feasible);
            let best = SCORED
                .iter()
                .map(|&a| r.outcome(a).scored_gain())
                .fold(0.0_f64, f64::max);
            let scores = if best > 0.0 {
                Some(Algorithm::ALL.map(|a| match a {
                    Algorithm::Lp => r.lp.gain.unwrap_or(0.0) / best,
                    _ => r.outcome(a).scored_gain() / best,
                }))
            } else {
                let w = format!("{}: no positive feasible gain, excluded from mean scores", r.instance);
                log::warn!("{w}");
                warnings.push(w);
                None
            };
            InstanceScore {
                instance: r.instance.clone(),
                price_set: factors_of(&r.instance).map(|f| f.price_set),
                best,
                gains,
                feasible,
                scores,
            }
        })
        .collect();

    let mut order: Vec<String> = Vec::new();
    for s in &instances {
        if let Some(p) = &s.price_set {
            if !order.contains(p) {
                order.push(p.clone());
            }
        }
    }
    let mut groups: Vec<GroupSummary> = order
        .iter()
        .map(|p| summarize(p, instances.iter().filter(|s| s.price_set.as_ref() == Some(p))))
        .collect();
    groups.push(summarize("M", instances.iter()));
    ScoreTable {
        instances,
        groups,
        warnings,
    }
}

fn summarize<'a>(group: &str, members: impl Iterator<Item = &'a InstanceScore>) -> GroupSummary {
    let mut count = 0;
    let mut scored = 0;
    let mut score_sum = [0.0; 4];
    let mut feasible = [0usize; 4];
    for s in members {
        count += 1;
        for k in 0..4 {
            feasible[k] += usize::from(s.feasible[k]);
        }
        if let Some(sc) = s.scores {
            scored += 1;
            for k in 0..4 {
                score_sum[k] += sc[k];
            }
        }
    }
    let mean = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
    GroupSummary {
        group: group.to_string(),
        instances: count,
        scored,
        mean_score: score_sum.map(|x| mean(x, scored)),
        feasibility: feasible.map(|f| mean(f as f64, count)),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-instance sheet. Columns: `instance`, `best`, then `gain_L`,
/// `gain_A`, `gain_B`, `gain_C` (empty when infeasible), then `score_L` ..
/// `score_C` (empty when the instance is excluded). Always has a header.
pub fn write_instance_csv(table: &ScoreTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["instance".to_string(), "best".to_string()];
    header.extend(Algorithm::ALL.iter().map(|a| format!("gain_{}", a.label())));
    header.extend(Algorithm::ALL.iter().map(|a| format!("score_{}", a.label())));
    w.write_record(&header)?;
    for s in &table.instances {
        let mut row = vec![s.instance.clone(), s.best.to_string()];
        row.extend(s.gains.iter().map(|g| opt(*g)));
        match s.scores {
            Some(sc) => row.extend(sc.iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Summary sheet: for each group, an `m.s.` row of mean scores and an
/// `a.f.` row of feasibility rates, both in percent, with columns
/// `group`, `measure`, `L`, `A`, `B`, `C`.
pub fn write_summary_csv(table: &ScoreTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string(), "measure".to_string()];
    header.extend(Algorithm::ALL.iter().map(|a| a.label().to_string()));
    w.write_record(&header)?;
    for g in &table.groups {
        for (measure, values) in [("m.s.", g.mean_score), ("a.f.", g.feasibility)] {
            let mut row = vec![g.group.clone(), measure.to_string()];
            row.extend(values.iter().map(|v| format!("{:.1}", 100.0 * v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text version of the summary sheet.
pub fn render_summary(table: &ScoreTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<6}{:<7}", "group", ""));
    for a in Algorithm::ALL {
        out.push_str(&format!("{:>9}", a.label()));
    }
    out.push('\n');
    for g in &table.groups {
        for (measure, values) in [("m.s.", g.mean_score), ("a.f.", g.feasibility)] {
            out.push_str(&format!("{:<6}{:<7}", g.group, measure));
            for v in values {
                out.push_str(&format!("{:>8.1}%", 100.0 * v));
            }
            out.push('\n');
        }
    }
    out
}

/// Wall-clock seconds and iteration counts per instance and algorithm.
/// Kept apart from the instance sheet, which must be reproducible.
pub fn write_timings_csv(results: &[InstanceResult], out: impl Write) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        instance: &'a str,
        algorithm: &'static str,
        seconds: f64,
        iterations: usize,
        best_iteration: Option<usize>,
        error: Option<&'a str>,
    }
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        for a in Algorithm::ALL {
            let o = r.outcome(a);
            w.serialize(Row {
                instance: &r.instance,
                algorithm: a.name(),
                seconds: o.seconds,
                iterations: o.iterations,
                best_iteration: o.best_iteration,
                error: o.error.as_deref(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
