//! Areas, relative area change, threshold detection, threshold fitting and
//! per-epoch aggregation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::ExtendedColorType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::observers::{observe, ObserverSpec};
use crate::raster::{encode_png, MaskGrid};
use crate::trials::{Battery, Condition, Which, SCHEMA_VERSION};

/// Per-pixel foreground probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: u32,
    height: u32,
    p: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: u32, height: u32, p: Vec<f64>) -> Result<Self> {
        if p.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "probability map has {} values for {width}x{height}",
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("probability {bad} outside [0, 1]")));
        }
        Ok(ProbMap { width, height, p })
    }

    /// 16-bit samples scaled so that 65535 is probability 1.
    pub fn from_u16(width: u32, height: u32, samples: &[u16]) -> Result<Self> {
        Self::new(
            width,
            height,
            samples.iter().map(|&v| v as f64 / 65535.0).collect(),
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }
}

/// 16-bit grayscale PNG of a probability map.
pub fn encode_prob_map_png(pm: &ProbMap) -> Vec<u8> {
    let bytes: Vec<u8> = pm
        .p
        .iter()
        .flat_map(|&v| ((v * 65535.0).round() as u16).to_ne_bytes())
        .collect();
    encode_png(pm.width, pm.height, &bytes, ExtendedColorType::L16)
        .expect("in-memory PNG encoding of a valid probability map")
}

/// Foreground where p > 0.5; background wins ties.
pub fn binarize(pm: &ProbMap) -> MaskGrid {
    let bits = pm.p.iter().map(|&v| u8::from(v > 0.5)).collect();
    MaskGrid::from_bits(pm.width, pm.height, bits).expect("probability map dimensions")
}

pub fn mask_area(m: &MaskGrid) -> u64 {
    m.count()
}

pub fn rac(a_init: u64, a_out: u64, a_seg_gt: u64) -> Result<f64> {
    if a_seg_gt == 0 {
        return Err(Error::Domain);
    }
    Ok((a_out as f64 - a_init as f64) / a_seg_gt as f64)
}

/// `tau` is in percent.
pub fn detect(rac_value: f64, tau: f64) -> bool {
    rac_value > tau / 100.0
}

/// 0.1 to 0.5 in steps of 0.1, then 1 to 20 in steps of 1 (percent).
pub fn default_tau_grid() -> Vec<f64> {
    (1..=5)
        .map(|k| k as f64 / 10.0)
        .chain((1..=20).map(|k| k as f64))
        .collect()
}

pub fn validate_tau_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Invalid("tau grid is empty".into()));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Invalid("tau values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("tau grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Parses `default` or a comma-separated list of percentages.
pub fn parse_tau_grid(s: &str) -> Result<Vec<f64>> {
    if s.trim().eq_ignore_ascii_case("default") {
        return Ok(default_tau_grid());
    }
    let grid = s
        .split(',')
        .map(|t| {
            t.trim()
                .trim_end_matches('%')
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad tau value {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    validate_tau_grid(&grid)?;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RacRecord {
    pub trial_id: String,
    pub condition: Condition,
    pub a_init: u64,
    pub a_out: u64,
    pub a_seg_gt: u64,
    /// Undefined for no-change trials.
    pub rac: Option<f64>,
    /// |a_out - a_init| / a_init, only for no-change trials.
    pub rel_delta: Option<f64>,
}

impl RacRecord {
    pub fn new(trial_id: &str, condition: Condition, a_init: u64, a_out: u64, a_seg_gt: u64) -> Result<Self> {
        let (rac_value, rel_delta) = if condition.is_change() {
            (Some(rac(a_init, a_out, a_seg_gt)?), None)
        } else {
            let delta = a_out.abs_diff(a_init) as f64;
            let rel = match (a_init, delta == 0.0) {
                (_, true) => 0.0,
                (0, false) => f64::INFINITY,
                _ => delta / a_init as f64,
            };
            (None, Some(rel))
        };
        Ok(RacRecord {
            trial_id: trial_id.to_string(),
            condition,
            a_init,
            a_out,
            a_seg_gt,
            rac: rac_value,
            rel_delta,
        })
    }

    /// Decision at `tau` percent: a detection for change trials, a false
    /// alarm for no-change trials.
    pub fn decision(&self, tau: f64) -> bool {
        match (self.rac, self.rel_delta) {
            (Some(r), _) => detect(r, tau),
            (None, Some(d)) => d > tau / 100.0,
            (None, None) => false,
        }
    }
}

/// Scores every trial of `battery` under `spec`.
pub fn score_battery(spec: &ObserverSpec, battery: &Battery) -> Result<Vec<RacRecord>> {
    spec.validate()?;
    battery
        .trials
        .par_iter()
        .map(|t| {
            let a_init = mask_area(&observe(spec, battery, t, Which::Init)?);
            let a_out = mask_area(&observe(spec, battery, t, Which::Out)?);
            RacRecord::new(&t.id, t.condition, a_init, a_out, t.a_seg_gt)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCurve {
    pub tau_grid: Vec<f64>,
    /// Detection rate per change condition, aligned with `tau_grid`.
    pub rates: BTreeMap<Condition, Vec<f64>>,
    /// False-alarm rate on no-change trials, when any were scored.
    pub false_alarm: Option<Vec<f64>>,
}

pub fn sweep(records: &[RacRecord], tau_grid: &[f64]) -> Result<DetectionCurve> {
    validate_tau_grid(tau_grid)?;
    if records.is_empty() {
        return Err(Error::Invalid("no records to sweep".into()));
    }
    let mut by_condition: BTreeMap<Condition, Vec<&RacRecord>> = BTreeMap::new();
    for r in records {
        by_condition.entry(r.condition).or_default().push(r);
    }
    let rate = |rs: &[&RacRecord], tau: f64| {
        rs.iter().filter(|r| r.decision(tau)).count() as f64 / rs.len() as f64
    };
    let mut rates = BTreeMap::new();
    let mut false_alarm = None;
    for (c, rs) in &by_condition {
        let curve: Vec<f64> = tau_grid.iter().map(|&t| rate(rs, t)).collect();
        if c.is_change() {
            rates.insert(*c, curve);
        } else {
            false_alarm = Some(curve);
        }
    }
    Ok(DetectionCurve {
        tau_grid: tau_grid.to_vec(),
        rates,
        false_alarm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanData {
    pub accuracy: BTreeMap<Condition, f64>,
}

impl HumanData {
    pub fn new(accuracy: BTreeMap<Condition, f64>) -> Result<Self> {
        for c in Condition::CHANGES {
            match accuracy.get(&c) {
                None => return Err(Error::MissingCondition(c.to_string())),
                Some(a) if !(0.0..=1.0).contains(a) => {
                    return Err(Error::Invalid(format!("{c} accuracy {a} outside [0, 1]")))
                }
                _ => {}
            }
        }
        if accuracy.contains_key(&Condition::Nochange) {
            return Err(Error::Invalid("human data covers CONCAVE, NOFILL and CONVEX only".into()));
        }
        Ok(HumanData { accuracy })
    }

    /// Reads a CSV with header `condition,accuracy`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => parse_err(format!("{other:?}")),
            })?;
        let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "condition" || &headers[1] != "accuracy" {
            return Err(parse_err(format!(
                "expected header `condition,accuracy`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut accuracy = BTreeMap::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| parse_err(e.to_string()))?;
            let line = i + 2;
            let condition: Condition = row[0]
                .parse()
                .map_err(|_| parse_err(format!("line {line}: unknown condition {:?}", &row[0])))?;
            let value: f64 = row[1]
                .parse()
                .map_err(|_| parse_err(format!("line {line}: accuracy {:?} is not a number", &row[1])))?;
            if accuracy.insert(condition, value).is_some() {
                return Err(parse_err(format!("line {line}: duplicate condition {condition}")));
            }
        }
        HumanData::new(accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauFit {
    pub tau_star: f64,
    pub rmse: f64,
}

/// Grid threshold whose per-condition detection rates are closest to the
/// human accuracies in RMSE over the three change conditions. Ties go to the
/// smaller threshold.
pub fn fit_tau(curve: &DetectionCurve, human: &HumanData) -> Result<TauFit> {
    let mut rows = Vec::with_capacity(3);
    for c in Condition::CHANGES {
        let rates = curve
            .rates
            .get(&c)
            .ok_or_else(|| Error::MissingCondition(c.to_string()))?;
        let target = *human
            .accuracy
            .get(&c)
            .ok_or_else(|| Error::MissingCondition(c.to_string()))?;
        rows.push((rates, target));
    }
    let mut best: Option<TauFit> = None;
    for (i, &tau) in curve.tau_grid.iter().enumerate() {
        let mse = rows
            .iter()
            .map(|(rates, target)| (rates[i] - target).powi(2))
            .sum::<f64>()
            / rows.len() as f64;
        let rmse = mse.sqrt();
        if best.is_none_or(|b| rmse < b.rmse) {
            best = Some(TauFit { tau_star: tau, rmse });
        }
    }
    best.ok_or_else(|| Error::Invalid("tau grid is empty".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub n: usize,
    pub mean_rac: f64,
    pub median_rac: f64,
}

pub fn condition_stats(records: &[RacRecord]) -> BTreeMap<Condition, ConditionStats> {
    let mut groups: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(v) = r.rac {
            groups.entry(r.condition).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .map(|(c, mut v)| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let median = if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            };
            let mean = v.iter().sum::<f64>() / n as f64;
            (
                c,
                ConditionStats {
                    n,
                    mean_rac: mean,
                    median_rac: median,
                },
            )
        })
        .collect()
}

pub fn mean_rac(records: &[RacRecord], condition: Condition) -> Option<f64> {
    condition_stats(records).get(&condition).map(|s| s.mean_rac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub battery_id: String,
    pub observer: ObserverSpec,
    pub records: Vec<RacRecord>,
    pub curve: DetectionCurve,
    pub stats: BTreeMap<Condition, ConditionStats>,
    pub fit: Option<TauFit>,
}

pub fn evaluate(
    battery: &Battery,
    spec: &ObserverSpec,
    tau_grid: &[f64],
    human: Option<&HumanData>,
) -> Result<EvalReport> {
    let records = score_battery(spec, battery)?;
    let curve = sweep(&records, tau_grid)?;
    let fit = human.map(|h| fit_tau(&curve, h)).transpose()?;
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        battery_id: battery.header.battery_id.clone(),
        observer: spec.clone(),
        stats: condition_stats(&records),
        records,
        curve,
        fit,
    })
}

pub const REPORT_FILE: &str = "eval_report.json";

impl EvalReport {
    pub fn load(path: &Path) -> Result<EvalReport> {
        let path = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let report: EvalReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Version {
                path,
                found: report.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(report)
    }

    /// Writes `eval_report.json`, `rac_records.csv` and
    /// `detection_curve.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::fsutil::create_dir(dir)?;
        let mut json = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Invalid(format!("serializing report: {e}")))?;
        json.push(b'\n');
        atomic_write(&dir.join(REPORT_FILE), &json)?;
        atomic_write(&dir.join("rac_records.csv"), &self.records_csv()?)?;
        atomic_write(&dir.join("detection_curve.csv"), &curve_csv(&self.curve)?)
    }

    fn records_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record(["trial_id", "condition", "a_init", "a_out", "a_seg_gt", "rac", "rel_delta"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.trial_id.clone(),
                r.condition.to_string(),
                r.a_init.to_string(),
                r.a_out.to_string(),
                r.a_seg_gt.to_string(),
                fmt(r.rac),
                fmt(r.rel_delta),
            ])
            .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("writing CSV: {e}"))
}

pub fn curve_csv(curve: &DetectionCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tau_percent".to_string()];
    header.extend(curve.rates.keys().map(|c| c.to_string()));
    if curve.false_alarm.is_some() {
        header.push("NOCHANGE_FALSE_ALARM".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, tau) in curve.tau_grid.iter().enumerate() {
        let mut row = vec![tau.to_string()];
        row.extend(curve.rates.values().map(|r| r[i].to_string()));
        if let Some(fa) = &curve.false_alarm {
            row.push(fa[i].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTable {
    pub epochs: Vec<String>,
    pub conditions: Vec<Condition>,
    /// `mean_rac[e][c]` for epoch `e` and condition `c`.
    pub mean_rac: Vec<Vec<f64>>,
}

impl DynamicsTable {
    pub fn column(&self, c: Condition) -> Option<Vec<f64>> {
        let j = self.conditions.iter().position(|x| *x == c)?;
        Some(self.mean_rac.iter().map(|row| row[j]).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["epoch".to_string()];
        header.extend(self.conditions.iter().map(|c| c.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for (e, row) in self.epochs.iter().zip(&self.mean_rac) {
            let mut rec = vec![e.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::fsutil::create_dir(dir)?;
        let mut json = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Invalid(format!("serializing dynamics: {e}")))?;
        json.push(b'\n');
        atomic_write(&dir.join("dynamics.json"), &json)?;
        atomic_write(&dir.join("dynamics.csv"), &self.to_csv()?)
    }

    pub fn load(path: &Path) -> Result<DynamicsTable> {
        let path = if path.is_dir() { path.join("dynamics.json") } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            message: e.to_string(),
        })
    }
}

fn numeric_suffix(path: &Path) -> Option<u64> {
    let name = path.file_name()?.to_str()?;
    let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    name[name.len() - digits..].parse().ok()
}

/// Orders epoch directories by the integer at the end of their names.
pub fn sort_epoch_dirs(mut dirs: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
    for d in &dirs {
        if numeric_suffix(d).is_none() {
            return Err(Error::Invalid(format!(
                "epoch directory {} has no numeric suffix",
                d.display()
            )));
        }
    }
    dirs.sort_by_key(|d| (numeric_suffix(d), d.clone()));
    Ok(dirs)
}

/// Mean RAC per change condition for each epoch mask directory, in the
/// given order.
pub fn dynamics(epoch_dirs: &[PathBuf], battery: &Battery) -> Result<DynamicsTable> {
    if epoch_dirs.is_empty() {
        return Err(Error::Invalid("no epoch directories given".into()));
    }
    let conditions: Vec<Condition> = Condition::CHANGES
        .into_iter()
        .filter(|c| battery.trials.iter().any(|t| t.condition == *c))
        .collect();
    let mut epochs = Vec::new();
    let mut mean_rac = Vec::new();
    for dir in epoch_dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let wrap = |e: Error| Error::Epoch {
            epoch: name.clone(),
            source: Box::new(e),
        };
        let spec = ObserverSpec::External { mask_dir: dir.clone() };
        let records = score_battery(&spec, battery).map_err(wrap)?;
        let stats = condition_stats(&records);
        mean_rac.push(conditions.iter().map(|c| stats[c].mean_rac).collect());
        epochs.push(name);
    }
    Ok(DynamicsTable {
        epochs,
        conditions,
        mean_rac,
    })
}
