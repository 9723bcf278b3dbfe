//! CSV and JSON files: distances, truth labels, outcome records, scenario
//! configs and the plot-ready summary exports.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use ndpc_core::outcome::{
    Covariates, MajorityRace, OutcomeRecord, ParamSummary, QuantityEffect, Urbanicity, Waic,
};
use ndpc_core::rng::{self, Tag};
use ndpc_core::summary::{CoClusterMatrix, DensityCurves, Partition, PartitionSummary};
use ndpc_core::synth::GenerativeScenario;
use ndpc_core::PointPattern;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io_err, json_err, Error, Issue, Result, ValidationReport};

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

/// Positions of `wanted` in the header row; the first absent name is an
/// error.
fn columns<R: std::io::Read>(rdr: &mut csv::Reader<R>, path: &Path, wanted: &[&str]) -> Result<Vec<usize>> {
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    wanted
        .iter()
        .map(|w| {
            headers.iter().position(|h| h == *w).ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: (*w).to_string(),
            })
        })
        .collect()
}

fn finish(path: &Path, issues: Vec<Issue>) -> Result<()> {
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(ValidationReport {
            path: path.to_path_buf(),
            issues,
        }))
    }
}

fn issue(row: usize, column: &str, reason: impl Into<String>) -> Issue {
    Issue {
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

/// Reads `subject_id, distance_miles` rows into one pattern per subject, in
/// order of first appearance. Distances must lie strictly inside
/// `(0, radius)`. With `jitter_sd > 0`, a distance that repeats an earlier
/// one of the same subject gets `N(0, jitter_sd^2)` noise from a stream
/// keyed by `seed` and its position.
pub fn read_distances(path: &Path, radius: f64, jitter_sd: f64, seed: u64) -> Result<Vec<PointPattern>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Usage(format!("radius must be positive, got {radius}")));
    }
    if !(jitter_sd.is_finite() && jitter_sd >= 0.0) {
        return Err(Error::Usage(format!("jitter sd must be non-negative, got {jitter_sd}")));
    }
    let mut rdr = reader(path)?;
    let cols = columns(&mut rdr, path, &["subject_id", "distance_miles"])?;
    let mut patterns: Vec<PointPattern> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut issues = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err(path))?;
        let id = rec.get(cols[0]).unwrap_or("");
        let raw = rec.get(cols[1]).unwrap_or("");
        if id.is_empty() {
            issues.push(issue(row, "subject_id", "empty subject id"));
            continue;
        }
        let d = match raw.parse::<f64>() {
            Ok(d) => d,
            Err(_) => {
                issues.push(issue(row, "distance_miles", format!("not a number: {raw:?}")));
                continue;
            }
        };
        if !(d > 0.0 && d < radius) {
            issues.push(issue(
                row,
                "distance_miles",
                format!("distance {d} must lie strictly inside (0, {radius})"),
            ));
            continue;
        }
        let j = *index.entry(id.to_string()).or_insert_with(|| {
            patterns.push(PointPattern {
                subject_id: id.to_string(),
                distances: Vec::new(),
                radius,
            });
            patterns.len() - 1
        });
        patterns[j].distances.push(d);
    }
    finish(path, issues)?;
    let tied = patterns.iter().filter(|p| p.duplicate_count() > 0).count();
    if tied > 0 {
        if jitter_sd > 0.0 {
            let moved = jitter_duplicates(&mut patterns, jitter_sd, seed);
            warn!("{}: jittered {moved} repeated distance(s) in {tied} subject(s) with sd {jitter_sd}", path.display());
        } else {
            warn!("{}: {tied} subject(s) have repeated distances; consider --jitter-sd", path.display());
        }
    }
    Ok(patterns)
}

/// Perturbs every distance equal to an earlier one in its pattern; returns
/// how many moved. Perturbed values stay inside `(0, R)` and off every
/// other value of the pattern.
pub fn jitter_duplicates(patterns: &mut [PointPattern], sd: f64, seed: u64) -> usize {
    let noise = Normal::new(0.0, sd).expect("finite sd");
    let mut moved = 0;
    for (s, p) in patterns.iter_mut().enumerate() {
        for i in 1..p.distances.len() {
            let d = p.distances[i];
            if !p.distances[..i].contains(&d) {
                continue;
            }
            let mut r = rng::tagged(seed, Tag::Jitter, s as u64, i as u64, 0);
            loop {
                let x = d + noise.sample(&mut r);
                if x > 0.0 && x < p.radius && !p.distances.contains(&x) {
                    p.distances[i] = x;
                    break;
                }
            }
            moved += 1;
        }
    }
    moved
}

pub fn write_distances(path: &Path, patterns: &[PointPattern]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["subject_id", "distance_miles"])?;
        for p in patterns {
            for d in &p.distances {
                w.write_record([p.subject_id.as_str(), &fmt_f64(*d)])?;
            }
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

pub fn write_labels(path: &Path, subject_ids: &[String], labels: &[u32]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["subject_id", "label"])?;
        for (id, l) in subject_ids.iter().zip(labels) {
            w.write_record([id.as_str(), &l.to_string()])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

/// `subject_id, label` rows.
pub fn read_labels(path: &Path) -> Result<Vec<(String, u32)>> {
    let mut rdr = reader(path)?;
    let cols = columns(&mut rdr, path, &["subject_id", "label"])?;
    let mut out = Vec::new();
    let mut issues = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let raw = rec.get(cols[1]).unwrap_or("");
        match raw.parse::<u32>() {
            Ok(l) => out.push((rec.get(cols[0]).unwrap_or("").to_string(), l)),
            Err(_) => issues.push(issue(i + 1, "label", format!("not a label: {raw:?}"))),
        }
    }
    finish(path, issues)?;
    Ok(out)
}

pub const OUTCOME_COLUMNS: [&str; 9] = [
    "subject_id",
    "obese_count",
    "total_count",
    "ffr_count",
    "majority_race",
    "charter",
    "income_centered_scaled",
    "education_centered",
    "urbanicity",
];

fn race_name(r: MajorityRace) -> &'static str {
    match r {
        MajorityRace::AfricanAmerican => "AfricanAmerican",
        MajorityRace::Asian => "Asian",
        MajorityRace::Hispanic => "Hispanic",
        MajorityRace::NoMajority => "NoMajority",
        MajorityRace::White => "White",
    }
}

fn parse_race(s: &str) -> Option<MajorityRace> {
    [
        MajorityRace::AfricanAmerican,
        MajorityRace::Asian,
        MajorityRace::Hispanic,
        MajorityRace::NoMajority,
        MajorityRace::White,
    ]
    .into_iter()
    .find(|r| race_name(*r).eq_ignore_ascii_case(s))
}

fn urbanicity_name(u: Urbanicity) -> &'static str {
    match u {
        Urbanicity::Rural => "Rural",
        Urbanicity::SubUrban => "SubUrban",
        Urbanicity::Urban => "Urban",
    }
}

fn parse_urbanicity(s: &str) -> Option<Urbanicity> {
    [Urbanicity::Rural, Urbanicity::SubUrban, Urbanicity::Urban]
        .into_iter()
        .find(|u| urbanicity_name(*u).eq_ignore_ascii_case(s))
}

/// Outcome records plus the ids of rows dropped for a missing outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub records: Vec<OutcomeRecord>,
    pub dropped: Vec<String>,
}

/// Reads the school-level outcome CSV. Rows with an empty `obese_count` or
/// `total_count` are dropped and listed; every other problem is collected
/// into one validation report.
pub fn read_outcomes(path: &Path) -> Result<OutcomeTable> {
    let mut rdr = reader(path)?;
    let c = columns(&mut rdr, path, &OUTCOME_COLUMNS)?;
    let mut records = Vec::new();
    let mut dropped = Vec::new();
    let mut issues = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err(path))?;
        let get = |k: usize| rec.get(c[k]).unwrap_or("");
        let id = get(0).to_string();
        if id.is_empty() {
            issues.push(issue(row, "subject_id", "empty subject id"));
            continue;
        }
        if get(1).is_empty() || get(2).is_empty() {
            dropped.push(id);
            continue;
        }
        let before = issues.len();
        let mut int = |k: usize| -> u64 {
            get(k).parse::<u64>().unwrap_or_else(|_| {
                issues.push(issue(row, OUTCOME_COLUMNS[k], format!("not a non-negative integer: {:?}", get(k))));
                0
            })
        };
        let obese = int(1);
        let total = int(2);
        let ffr = int(3);
        let mut real = |k: usize| -> f64 {
            match get(k).parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                _ => {
                    issues.push(issue(row, OUTCOME_COLUMNS[k], format!("not a finite number: {:?}", get(k))));
                    0.0
                }
            }
        };
        let income = real(6);
        let education = real(7);
        let race = parse_race(get(4));
        if race.is_none() {
            issues.push(issue(row, "majority_race", format!("unknown category {:?}", get(4))));
        }
        let charter = match get(5) {
            "0" | "false" | "FALSE" => Some(false),
            "1" | "true" | "TRUE" => Some(true),
            _ => None,
        };
        if charter.is_none() {
            issues.push(issue(row, "charter", format!("expected 0 or 1, got {:?}", get(5))));
        }
        let urban = parse_urbanicity(get(8));
        if urban.is_none() {
            issues.push(issue(row, "urbanicity", format!("unknown category {:?}", get(8))));
        }
        if issues.len() > before {
            continue;
        }
        let r = OutcomeRecord {
            subject_id: id,
            obese_count: obese,
            total_count: total,
            ffr_count: ffr,
            covariates: Covariates {
                majority_race: race.expect("checked"),
                charter: charter.expect("checked"),
                income_centered_scaled: income,
                education_centered: education,
                urbanicity: urban.expect("checked"),
            },
        };
        if let Err(e) = r.validate() {
            issues.push(issue(row, "obese_count", e.to_string()));
            continue;
        }
        records.push(r);
    }
    finish(path, issues)?;
    if !dropped.is_empty() {
        warn!("{}: dropped {} record(s) with a missing outcome: {}", path.display(), dropped.len(), dropped.join(", "));
    }
    Ok(OutcomeTable { records, dropped })
}

pub fn write_outcomes(path: &Path, records: &[OutcomeRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(OUTCOME_COLUMNS)?;
        for r in records {
            let c = &r.covariates;
            w.write_record([
                r.subject_id.clone(),
                r.obese_count.to_string(),
                r.total_count.to_string(),
                r.ffr_count.to_string(),
                race_name(c.majority_race).to_string(),
                (c.charter as u8).to_string(),
                fmt_f64(c.income_centered_scaled),
                fmt_f64(c.education_centered),
                urbanicity_name(c.urbanicity).to_string(),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

pub const SCENARIO_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u64,
    pub scenario: GenerativeScenario,
}

pub fn read_scenario(path: &Path) -> Result<GenerativeScenario> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(json_err(path))?;
    let found = v.get("version").and_then(|x| x.as_u64()).ok_or_else(|| Error::Malformed {
        path: path.to_path_buf(),
        reason: "scenario config needs an integer \"version\"".into(),
    })?;
    if found != SCENARIO_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found,
            expected: SCENARIO_VERSION,
        });
    }
    let f: ScenarioFile = serde_json::from_value(v).map_err(json_err(path))?;
    f.scenario.validate()?;
    Ok(f.scenario)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err(path))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

/// Long form `i, j, prob` over all ordered pairs.
pub fn write_cocluster(path: &Path, p: &CoClusterMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["i", "j", "prob"])?;
        for i in 0..p.n {
            for j in 0..p.n {
                w.write_record([p.subject_ids[i].as_str(), p.subject_ids[j].as_str(), &fmt_f64(p.get(i, j))])?;
            }
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

/// Inverse of [`write_cocluster`]; subjects are ordered by first appearance
/// in column `i` and every pair must be present.
pub fn read_cocluster(path: &Path) -> Result<CoClusterMatrix> {
    let mut rdr = reader(path)?;
    let c = columns(&mut rdr, path, &["i", "j", "prob"])?;
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut entries = Vec::new();
    let mut issues = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let i = rec.get(c[0]).unwrap_or("").to_string();
        let j = rec.get(c[1]).unwrap_or("").to_string();
        let raw = rec.get(c[2]).unwrap_or("");
        let p = match raw.parse::<f64>() {
            Ok(p) if (0.0..=1.0).contains(&p) => p,
            _ => {
                issues.push(issue(row + 1, "prob", format!("not a probability: {raw:?}")));
                continue;
            }
        };
        if !index.contains_key(&i) {
            index.insert(i.clone(), ids.len());
            ids.push(i.clone());
        }
        entries.push((row + 1, i, j, p));
    }
    finish(path, std::mem::take(&mut issues))?;
    let n = ids.len();
    let mut probs = vec![f64::NAN; n * n];
    for (row, i, j, p) in entries {
        match index.get(&j) {
            Some(&b) => probs[index[&i] * n + b] = p,
            None => issues.push(issue(row, "j", format!("subject {j:?} never appears in column i"))),
        }
    }
    if probs.iter().any(|p| p.is_nan()) {
        issues.push(issue(0, "prob", format!("expected all {} pairs of {n} subjects", n * n)));
    }
    finish(path, issues)?;
    let m = CoClusterMatrix {
        n,
        probs,
        subject_ids: ids,
    };
    if !m.check_invariants() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: "co-clustering matrix must be symmetric with unit diagonal".into(),
        });
    }
    Ok(m)
}

pub fn write_density_curves(path: &Path, curves: &DensityCurves) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["cluster", "r", "q025", "q25", "median", "q75", "q975"])?;
        for c in &curves.clusters {
            for (g, r) in curves.grid.iter().enumerate() {
                w.write_record([
                    c.label.to_string(),
                    fmt_f64(*r),
                    fmt_f64(c.q025[g]),
                    fmt_f64(c.q25[g]),
                    fmt_f64(c.median[g]),
                    fmt_f64(c.q75[g]),
                    fmt_f64(c.q975[g]),
                ])?;
            }
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

pub fn write_cluster_weights(path: &Path, curves: &DensityCurves) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["cluster", "source", "occupancy", "weight_median", "weight_q25", "weight_q75"])?;
        for c in &curves.clusters {
            w.write_record([
                c.label.to_string(),
                c.source.to_string(),
                fmt_f64(c.occupancy),
                fmt_f64(c.weight_median),
                fmt_f64(c.weight_q25),
                fmt_f64(c.weight_q75),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

const SUMMARY_COLUMNS: [&str; 6] = ["subject_id", "mode", "horizontal", "upper", "lower", "consensus"];

pub fn write_partition_summary(path: &Path, subject_ids: &[String], s: &PartitionSummary) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(SUMMARY_COLUMNS)?;
        for (i, id) in subject_ids.iter().enumerate() {
            w.write_record([
                id.clone(),
                s.mode.labels()[i].to_string(),
                s.horizontal_bound.labels()[i].to_string(),
                s.upper_bound.labels()[i].to_string(),
                s.lower_bound.labels()[i].to_string(),
                s.consensus[i].map_or(String::new(), |l| l.to_string()),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

/// One row of a partition summary file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryRow {
    pub subject_id: String,
    pub mode: u32,
    pub consensus: Option<u32>,
}

pub fn read_partition_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rdr = reader(path)?;
    let c = columns(&mut rdr, path, &["subject_id", "mode", "consensus"])?;
    let mut out = Vec::new();
    let mut issues = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let mode = rec.get(c[1]).unwrap_or("").parse::<u32>();
        let raw = rec.get(c[2]).unwrap_or("");
        let consensus = if raw.is_empty() { Ok(None) } else { raw.parse::<u32>().map(Some) };
        match (mode, consensus) {
            (Ok(mode), Ok(consensus)) => out.push(SummaryRow {
                subject_id: rec.get(c[0]).unwrap_or("").to_string(),
                mode,
                consensus,
            }),
            (Err(_), _) => issues.push(issue(i + 1, "mode", "not a label")),
            (_, Err(_)) => issues.push(issue(i + 1, "consensus", "not a label")),
        }
    }
    finish(path, issues)?;
    Ok(out)
}

pub fn write_heatmap_order(path: &Path, subject_ids: &[String], order: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["position", "subject_id"])?;
        for (pos, &i) in order.iter().enumerate() {
            w.write_record([(pos + 1).to_string(), subject_ids[i].clone()])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

pub fn write_param_summaries(path: &Path, summaries: &[ParamSummary], first_column: &str) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record([first_column, "median", "q025", "q975", "split_rhat"])?;
        for s in summaries {
            w.write_record([
                s.name.clone(),
                fmt_f64(s.median),
                fmt_f64(s.q025),
                fmt_f64(s.q975),
                fmt_f64(s.split_rhat),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

pub fn write_quantity_effects(path: &Path, effects: &[QuantityEffect]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    (|| {
        w.write_record(["category", "median", "q025", "q975"])?;
        for q in effects {
            w.write_record([
                q.category.name().to_string(),
                fmt_f64(q.median),
                fmt_f64(q.q025),
                fmt_f64(q.q975),
            ])?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })()
    .map_err(err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicReport {
    pub model: String,
    pub dataset: String,
    pub records: usize,
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    /// Records whose variance term exceeds 0.4.
    pub unstable: usize,
}

impl WaicReport {
    pub fn new(model: &str, dataset: &str, records: usize, w: &Waic) -> Self {
        Self {
            model: model.to_string(),
            dataset: dataset.to_string(),
            records,
            waic: w.waic,
            lppd: w.lppd,
            p_waic: w.p_waic,
            unstable: w.unstable,
        }
    }
}

/// Labels of the subjects named in `ids`, read from a truth or estimate
/// file, as a partition in the order of `ids`.
pub fn partition_for(path: &Path, rows: &[(String, u32)], ids: &[String]) -> Result<Partition> {
    let map: HashMap<&str, u32> = rows.iter().map(|(s, l)| (s.as_str(), *l)).collect();
    let mut labels = Vec::with_capacity(ids.len());
    let mut issues = Vec::new();
    for id in ids {
        match map.get(id.as_str()) {
            Some(&l) => labels.push(l),
            None => issues.push(issue(0, "subject_id", format!("no label for subject {id:?}"))),
        }
    }
    finish(path, issues)?;
    Ok(Partition::from_labels(&labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn three_rows_make_two_patterns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "subject_id,distance_miles\na,0.2\nb,0.5\na, 0.9\n");
        let pats = read_distances(&p, 1.0, 0.0, 0).unwrap();
        assert_eq!(pats.len(), 2);
        assert_eq!(pats[0].subject_id, "a");
        assert_eq!(pats[0].distances, vec![0.2, 0.9]);
        assert_eq!(pats[1].distances, vec![0.5]);
    }

    #[test]
    fn boundary_distances_are_reported_by_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "subject_id,distance_miles\na,0.2\nb,1.0\nc,0\nd,x\n");
        let err = read_distances(&p, 1.0, 0.0, 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let Error::Validation(rep) = &err else { panic!("{err}") };
        let rows: Vec<usize> = rep.issues.iter().map(|i| i.row).collect();
        assert_eq!(rows, vec![2, 3, 4]);
        assert!(err.to_string().contains("row 2, column distance_miles"));
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "subject_id,dist\na,0.2\n");
        let err = read_distances(&p, 1.0, 0.0, 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("distance_miles"), "{err}");
    }

    #[test]
    fn jitter_separates_repeats_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "subject_id,distance_miles\na,0.5\na,0.5\na,0.5\nb,0.3\n");
        let kept = read_distances(&p, 1.0, 0.0, 7).unwrap();
        assert_eq!(kept[0].duplicate_count(), 2);
        let a = read_distances(&p, 1.0, 0.01, 7).unwrap();
        let b = read_distances(&p, 1.0, 0.01, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].duplicate_count(), 0);
        assert_eq!(a[0].distances[0], 0.5);
        assert!(a[0].distances.iter().all(|d| *d > 0.0 && *d < 1.0));
        assert_eq!(a[1].distances, vec![0.3]);
    }

    const HEADER: &str = "subject_id,obese_count,total_count,ffr_count,majority_race,charter,income_centered_scaled,education_centered,urbanicity\n";

    #[test]
    fn missing_outcomes_are_dropped_and_listed() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "{HEADER}s1,30,300,2,white,0,0.1,-0.02,Urban\ns2,,300,0,Asian,1,0,0,rural\ns3,12,200,0,Hispanic,0,0,0,SubUrban\n"
        );
        let p = write(&dir, "o.csv", &text);
        let t = read_outcomes(&p).unwrap();
        assert_eq!(t.dropped, vec!["s2".to_string()]);
        assert_eq!(t.records.len(), 2);
        assert_eq!(t.records[0].covariates.majority_race, MajorityRace::White);
        assert_eq!(t.records[1].covariates.urbanicity, Urbanicity::SubUrban);
    }

    #[test]
    fn bad_outcome_rows_are_collected() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{HEADER}s1,400,300,2,White,0,0,0,Urban\ns2,3,300,1,Martian,2,0,0,Urban\n");
        let p = write(&dir, "o.csv", &text);
        let Error::Validation(rep) = read_outcomes(&p).unwrap_err() else { panic!() };
        let cols: Vec<(usize, &str)> = rep.issues.iter().map(|i| (i.row, i.column.as_str())).collect();
        assert_eq!(cols, vec![(1, "obese_count"), (2, "majority_race"), (2, "charter")]);
    }

    #[test]
    fn files_round_trip_byte_for_byte() {
        let dir = tempfile::tempdir().unwrap();
        let d = write(&dir, "d.csv", "subject_id,distance_miles\ns1,0.1\ns1,0.30000000000000004\ns2,0.7\n");
        let pats = read_distances(&d, 1.0, 0.0, 0).unwrap();
        let d2 = dir.path().join("d2.csv");
        write_distances(&d2, &pats).unwrap();
        assert_eq!(fs::read(&d).unwrap(), fs::read(&d2).unwrap());

        let o = write(
            &dir,
            "o.csv",
            &format!("{HEADER}s1,30,300,2,White,0,0.125,-0.5,Urban\ns2,12,200,0,NoMajority,1,-1,0,Rural\n"),
        );
        let t = read_outcomes(&o).unwrap();
        let o2 = dir.path().join("o2.csv");
        write_outcomes(&o2, &t.records).unwrap();
        assert_eq!(fs::read(&o).unwrap(), fs::read(&o2).unwrap());

        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let p = CoClusterMatrix::from_partition(&Partition::from_labels(&[0u32, 0, 1]), &ids);
        let c = dir.path().join("c.csv");
        write_cocluster(&c, &p).unwrap();
        assert_eq!(read_cocluster(&c).unwrap(), p);
    }

    #[test]
    fn scenario_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("s.json");
        write_json(
            &good,
            &ScenarioFile {
                version: SCENARIO_VERSION,
                scenario: ndpc_core::synth::default_scenario(),
            },
        )
        .unwrap();
        assert_eq!(read_scenario(&good).unwrap(), ndpc_core::synth::default_scenario());
        let text = fs::read_to_string(&good).unwrap().replacen("\"version\": 1", "\"version\": 9", 1);
        let bad = write(&dir, "b.json", &text);
        assert!(matches!(read_scenario(&bad), Err(Error::UnsupportedVersion { found: 9, .. })));
    }
}
