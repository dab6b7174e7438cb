//! Target-set scoring and cohort aggregation.
//!
//! Set metrics deduplicate the prediction (first occurrence wins) before
//! counting. Hit@k counts how many of the first `k` unique predictions are
//! reference targets, divided by `k` (or by the prediction length when it
//! is shorter).

use crate::graph::EntityId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("instance {0} has an empty reference set")]
    EmptyReference(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no records to aggregate")]
    NoRecords,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance: String,
    /// Ranked prediction, best first.
    pub predicted: Vec<EntityId>,
    pub reference: Vec<EntityId>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
    pub hit5: f64,
    pub hit10: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = ["Precision", "Recall", "F1", "Jaccard", "Hit@5", "Hit@10"];

    pub fn to_array(self) -> [f64; 6] {
        [self.precision, self.recall, self.f1, self.jaccard, self.hit5, self.hit10]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { precision: a[0], recall: a[1], f1: a[2], jaccard: a[3], hit5: a[4], hit10: a[5] }
    }
}

/// How Hit@k turns the top-k overlap into a number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitMode {
    /// Overlap divided by `min(k, |prediction|)`.
    #[default]
    Fraction,
    /// 1 if any of the top k is a target.
    Binary,
}

fn dedup(ids: &[EntityId]) -> Vec<EntityId> {
    let mut seen = HashSet::new();
    ids.iter().copied().filter(|i| seen.insert(*i)).collect()
}

pub fn hit_at_k(predicted: &[EntityId], reference: &HashSet<EntityId>, k: usize, mode: HitMode) -> f64 {
    let top: Vec<EntityId> = dedup(predicted).into_iter().take(k).collect();
    if top.is_empty() {
        return 0.0;
    }
    let hits = top.iter().filter(|i| reference.contains(i)).count();
    match mode {
        HitMode::Fraction => hits as f64 / top.len() as f64,
        HitMode::Binary => f64::from(u8::from(hits > 0)),
    }
}

pub fn score(record: &PredictionRecord) -> Result<Metrics, EvalError> {
    score_with(record, HitMode::Fraction)
}

pub fn score_with(record: &PredictionRecord, mode: HitMode) -> Result<Metrics, EvalError> {
    let reference: HashSet<EntityId> = record.reference.iter().copied().collect();
    if reference.is_empty() {
        return Err(EvalError::EmptyReference(record.instance.clone()));
    }
    let pred = dedup(&record.predicted);
    let inter = pred.iter().filter(|i| reference.contains(i)).count() as f64;
    let union = pred.len() as f64 + reference.len() as f64 - inter;
    let precision = if pred.is_empty() { 0.0 } else { inter / pred.len() as f64 };
    let recall = inter / reference.len() as f64;
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Metrics {
        precision,
        recall,
        f1,
        jaccard: inter / union,
        hit5: hit_at_k(&pred, &reference, 5, mode),
        hit10: hit_at_k(&pred, &reference, 10, mode),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance: String,
    pub seed: u64,
    pub group: String,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    pub seeds: usize,
    pub instances: usize,
    /// Mean over seeds of the per-seed instance mean.
    pub mean: Metrics,
    /// Sample standard deviation across seeds (0 for one seed).
    pub std: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_instance: Vec<InstanceReport>,
    /// Named groups in sorted order, then `Overall`.
    pub groups: Vec<GroupReport>,
}

pub const OVERALL: &str = "Overall";

fn mean_std(per_seed: &[[f64; 6]]) -> ([f64; 6], [f64; 6]) {
    let n = per_seed.len() as f64;
    let mut mean = [0.0; 6];
    let mut std = [0.0; 6];
    for j in 0..6 {
        mean[j] = per_seed.iter().map(|v| v[j]).sum::<f64>() / n;
        if per_seed.len() > 1 {
            std[j] = (per_seed.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        }
    }
    (mean, std)
}

fn group_report(group: &str, rows: &[&InstanceReport]) -> GroupReport {
    let mut by_seed: BTreeMap<u64, Vec<[f64; 6]>> = BTreeMap::new();
    for r in rows {
        by_seed.entry(r.seed).or_default().push(r.metrics.to_array());
    }
    let per_seed: Vec<[f64; 6]> = by_seed.values().map(|v| mean_std(v).0).collect();
    let (mean, std) = mean_std(&per_seed);
    GroupReport {
        group: group.to_string(),
        seeds: per_seed.len(),
        instances: rows.len(),
        mean: Metrics::from_array(mean),
        std: Metrics::from_array(std),
    }
}

/// Scores every record and aggregates per group and overall. The group of a
/// record comes from `groups` (keyed by instance id), else from the record,
/// else the record only counts towards `Overall`.
pub fn aggregate(
    records: &[PredictionRecord],
    groups: &BTreeMap<String, String>,
    mode: HitMode,
) -> Result<MetricReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let per_instance = records
        .iter()
        .map(|r| {
            let group = groups.get(&r.instance).or(r.group.as_ref()).cloned().unwrap_or_default();
            Ok(InstanceReport { instance: r.instance.clone(), seed: r.seed, group, metrics: score_with(r, mode)? })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let mut named: BTreeMap<&str, Vec<&InstanceReport>> = BTreeMap::new();
    for r in &per_instance {
        if !r.group.is_empty() && r.group != OVERALL {
            named.entry(r.group.as_str()).or_default().push(r);
        }
    }
    let mut out: Vec<GroupReport> = named.iter().map(|(g, rows)| group_report(g, rows)).collect();
    out.push(group_report(OVERALL, &per_instance.iter().collect::<Vec<_>>()));
    Ok(MetricReport { per_instance, groups: out })
}

pub fn read_records(reader: impl BufRead) -> Result<Vec<PredictionRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_records(mut w: impl Write, records: &[PredictionRecord]) -> Result<(), EvalError> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("record serialises"))?;
    }
    Ok(())
}

/// One row per group; cells are `mean ± std` with four decimals.
pub fn report_tsv(report: &MetricReport) -> String {
    let mut s = format!("Group\tSeeds\tInstances\t{}\n", Metrics::NAMES.join("\t"));
    for g in &report.groups {
        s.push_str(&format!("{}\t{}\t{}", g.group, g.seeds, g.instances));
        for (m, d) in g.mean.to_array().iter().zip(g.std.to_array()) {
            s.push_str(&format!("\t{m:.4} ± {d:.4}"));
        }
        s.push('\n');
    }
    s
}
