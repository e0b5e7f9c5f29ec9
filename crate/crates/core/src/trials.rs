//! Training sets, trial batteries and their JSONL manifests.
//!
//! A manifest is one JSON header line carrying `schema_version` and `kind`,
//! followed by one record per line. Asset paths inside records are relative
//! to the manifest directory.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GeometryError, Result};
use crate::fsutil::{atomic_write, create_dir};
use crate::geometry::{
    generate_polygon, make_edit, EditCondition, GenParams, Polygon, GEN_RETRY_BUDGET,
};
use crate::raster::{encode_image_png, encode_mask_png, rasterize_mask, render_mask, PALETTE_SIZE};
use crate::seed::{domain_seed, mix, SeedDomain};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DEFAULT_REL_AREA: f64 = 0.05;
pub const DEFAULT_RESOLUTION: u32 = 512;
pub const MIN_RESOLUTION: u32 = 8;
pub const MAX_RESOLUTION: u32 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    Concave,
    Nofill,
    Convex,
    Nochange,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Concave,
        Condition::Nofill,
        Condition::Convex,
        Condition::Nochange,
    ];
    pub const CHANGES: [Condition; 3] = [Condition::Concave, Condition::Nofill, Condition::Convex];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Concave => "CONCAVE",
            Condition::Nofill => "NOFILL",
            Condition::Convex => "CONVEX",
            Condition::Nochange => "NOCHANGE",
        }
    }

    pub fn edit(self) -> Option<EditCondition> {
        match self {
            Condition::Concave => Some(EditCondition::Concave),
            Condition::Nofill => Some(EditCondition::Nofill),
            Condition::Convex => Some(EditCondition::Convex),
            Condition::Nochange => None,
        }
    }

    pub fn is_change(self) -> bool {
        self != Condition::Nochange
    }

    fn tag(self) -> &'static str {
        match self {
            Condition::Concave => "concave",
            Condition::Nofill => "nofill",
            Condition::Convex => "convex",
            Condition::Nochange => "nochange",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown condition {s:?}")))
    }
}

/// Which image of a trial pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    Init,
    Out,
}

impl Which {
    pub const BOTH: [Which; 2] = [Which::Init, Which::Out];

    pub fn as_str(self) -> &'static str {
        match self {
            Which::Init => "init",
            Which::Out => "out",
        }
    }
}

/// Inclusive sampling ranges for generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenRanges {
    pub n_vertices: (u32, u32),
    pub n_concavities: (u32, u32),
    pub irregularity: (f64, f64),
    pub spikiness: (f64, f64),
}

impl Default for GenRanges {
    fn default() -> Self {
        GenRanges {
            n_vertices: (5, 12),
            n_concavities: (0, 3),
            irregularity: (0.0, 1.0),
            spikiness: (0.0, 1.0),
        }
    }
}

impl GenRanges {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(format!("generator ranges: {m}")));
        let (v0, v1) = self.n_vertices;
        let (k0, k1) = self.n_concavities;
        if v0 > v1 || v0 < 5 || v1 > 12 {
            return bad(format!("n_vertices {v0}..{v1} must lie in 5..12"));
        }
        if k0 > k1 || k1 > 3 {
            return bad(format!("n_concavities {k0}..{k1} must lie in 0..3"));
        }
        if k0 + 4 > v1 {
            return bad(format!("n_concavities {k0} needs at least {} vertices", k0 + 4));
        }
        for (name, (lo, hi)) in [("irregularity", self.irregularity), ("spikiness", self.spikiness)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!("{name} {lo}..{hi} must lie in 0..1"));
            }
        }
        Ok(())
    }

    /// Draws parameters with at least `min_concavities` notches, or `None`
    /// when the ranges cannot provide that many.
    fn sample(&self, rng: &mut ChaCha8Rng, min_concavities: u32, seed: u64) -> Option<GenParams> {
        let lo_n = self.n_vertices.0.max(min_concavities.max(self.n_concavities.0) + 4);
        if lo_n > self.n_vertices.1 {
            return None;
        }
        let n = rng.random_range(lo_n..=self.n_vertices.1);
        let k_lo = self.n_concavities.0.max(min_concavities);
        let k_hi = self.n_concavities.1.min(n - 4);
        if k_lo > k_hi {
            return None;
        }
        let k = rng.random_range(k_lo..=k_hi);
        let unit = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        Some(GenParams {
            n_vertices: n,
            n_concavities: k,
            irregularity: unit(rng, self.irregularity),
            spikiness: unit(rng, self.spikiness),
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub n_per_condition: u32,
    pub rel_area: f64,
    pub resolution: u32,
    pub include_nochange: bool,
    pub seed: u64,
    #[serde(default)]
    pub gen_ranges: GenRanges,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            n_per_condition: 10,
            rel_area: DEFAULT_REL_AREA,
            resolution: DEFAULT_RESOLUTION,
            include_nochange: true,
            seed: 0,
            gen_ranges: GenRanges::default(),
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_condition < 1 {
            return Err(Error::Invalid("n_per_condition must be at least 1".into()));
        }
        if !(self.rel_area > 0.0 && self.rel_area <= crate::geometry::MAX_REL_AREA) {
            return Err(GeometryError::InvalidRelArea(self.rel_area).into());
        }
        validate_resolution(self.resolution)?;
        self.gen_ranges.validate()
    }

    pub fn conditions(&self) -> Vec<Condition> {
        if self.include_nochange {
            Condition::ALL.to_vec()
        } else {
            Condition::CHANGES.to_vec()
        }
    }

    pub fn battery_id(&self) -> String {
        let id = mix(
            self.seed,
            &[
                self.n_per_condition as u64,
                self.rel_area.to_bits(),
                self.resolution as u64,
                self.include_nochange as u64,
            ],
        );
        format!("battery-{id:016x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_images: u32,
    pub resolution: u32,
    pub seed: u64,
    #[serde(default)]
    pub gen_ranges: GenRanges,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_images < 1 {
            return Err(Error::Invalid("n_images must be at least 1".into()));
        }
        validate_resolution(self.resolution)?;
        self.gen_ranges.validate()
    }
}

pub fn validate_resolution(resolution: u32) -> Result<()> {
    if (MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "resolution {resolution} outside {MIN_RESOLUTION}..{MAX_RESOLUTION}"
        )))
    }
}

/// Presentation schedule of the human experiment. Stored, never simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub init_s: f64,
    pub blank_s: f64,
    pub out_s: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            init_s: 1.0,
            blank_s: 2.0,
            out_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub attachment_edge_index: usize,
    pub area: f64,
    pub patch: Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPair {
    pub id: String,
    pub condition: Condition,
    pub init_image_path: String,
    pub out_image_path: String,
    pub init_gtmask_path: String,
    pub out_gtmask_path: String,
    pub a_seg_gt: u64,
    pub color_index: usize,
    pub seed: u64,
    pub gen_params: GenParams,
    pub init_polygon: Polygon,
    pub out_polygon: Polygon,
    pub edit: Option<EditRecord>,
}

impl TrialPair {
    pub fn image_path(&self, which: Which) -> &str {
        match which {
            Which::Init => &self.init_image_path,
            Which::Out => &self.out_image_path,
        }
    }

    pub fn gtmask_path(&self, which: Which) -> &str {
        match which {
            Which::Init => &self.init_gtmask_path,
            Which::Out => &self.out_gtmask_path,
        }
    }

    pub fn polygon(&self, which: Which) -> &Polygon {
        match which {
            Which::Init => &self.init_polygon,
            Which::Out => &self.out_polygon,
        }
    }

    fn paths(&self) -> [&str; 4] {
        [
            &self.init_image_path,
            &self.out_image_path,
            &self.init_gtmask_path,
            &self.out_gtmask_path,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryHeader {
    pub schema_version: u32,
    pub kind: String,
    pub battery_id: String,
    pub config: BatteryConfig,
    pub timing: Timing,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub dir: PathBuf,
    pub header: BatteryHeader,
    pub trials: Vec<TrialPair>,
}

impl Battery {
    /// Loads `<dir>/manifest.jsonl` (or a manifest path directly) and checks
    /// that every referenced file exists.
    pub fn load(path: &Path) -> Result<Battery> {
        let (dir, manifest) = manifest_location(path);
        let (header, trials): (BatteryHeader, Vec<TrialPair>) = read_manifest(&manifest, "battery")?;
        let battery = Battery { dir, header, trials };
        battery.validate_files()?;
        Ok(battery)
    }

    pub fn resolution(&self) -> u32 {
        self.header.config.resolution
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn validate_files(&self) -> Result<()> {
        let missing: Vec<PathBuf> = self
            .trials
            .iter()
            .flat_map(|t| t.paths())
            .map(|p| self.path(p))
            .filter(|p| !p.is_file())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingFiles(missing))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub id: String,
    pub image_path: String,
    pub gtmask_path: String,
    pub color_index: usize,
    pub seed: u64,
    pub gen_params: GenParams,
    pub pixel_area: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHeader {
    pub schema_version: u32,
    pub kind: String,
    pub config: DatasetConfig,
    pub n_images: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub dir: PathBuf,
    pub header: TrainingHeader,
    pub rows: Vec<TrainingRow>,
}

impl TrainingSet {
    pub fn load(path: &Path) -> Result<TrainingSet> {
        let (dir, manifest) = manifest_location(path);
        let (header, rows): (TrainingHeader, Vec<TrainingRow>) = read_manifest(&manifest, "training")?;
        let missing: Vec<PathBuf> = rows
            .iter()
            .flat_map(|r| [&r.image_path, &r.gtmask_path])
            .map(|p| dir.join(p))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        Ok(TrainingSet { dir, header, rows })
    }
}

fn manifest_location(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_FILE))
    } else {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."));
        (dir.to_path_buf(), path.to_path_buf())
    }
}

/// Serializes a header line plus one line per record and replaces `path`
/// atomically.
pub fn write_manifest<H: Serialize, R: Serialize>(path: &Path, header: &H, rows: &[R]) -> Result<()> {
    let mut out = Vec::new();
    let mut push = |v: serde_json::Result<Vec<u8>>| -> Result<()> {
        let line = v.map_err(|e| Error::Invalid(format!("serializing manifest: {e}")))?;
        out.extend_from_slice(&line);
        out.push(b'\n');
        Ok(())
    };
    push(serde_json::to_vec(header))?;
    for row in rows {
        push(serde_json::to_vec(row))?;
    }
    atomic_write(path, &out)
}

/// Reads a manifest written by [`write_manifest`]. The header must carry
/// the current schema version and the expected `kind`, and its record count
/// must match, so truncated files are rejected.
pub fn read_manifest<H: DeserializeOwned, R: DeserializeOwned>(
    path: &Path,
    kind: &str,
) -> Result<(H, Vec<R>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let manifest_err = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let first = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(manifest_err(1, "empty manifest".into())),
    };
    let head: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| manifest_err(1, format!("header: {e}")))?;
    let version = head
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| manifest_err(1, "header lacks schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let found_kind = head.get("kind").and_then(|v| v.as_str()).unwrap_or("");
    if found_kind != kind {
        return Err(manifest_err(1, format!("expected a {kind} manifest, found {found_kind:?}")));
    }
    let declared = head
        .get("n_trials")
        .or_else(|| head.get("n_images"))
        .and_then(|v| v.as_u64());
    let header: H = serde_json::from_value(head).map_err(|e| manifest_err(1, format!("header: {e}")))?;

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| manifest_err(i + 1, e.to_string()))?);
    }
    if let Some(n) = declared {
        if n != rows.len() as u64 {
            return Err(manifest_err(
                rows.len() + 1,
                format!("header declares {n} records, found {}", rows.len()),
            ));
        }
    }
    Ok((header, rows))
}

struct Materialized {
    trial: TrialPair,
    files: Vec<(String, Vec<u8>)>,
}

fn asset_name(id: &str, which: Which, kind: &str) -> String {
    format!("{id}_{}_{kind}.png", which.as_str())
}

fn in_unit_square(poly: &Polygon) -> bool {
    poly.vertices()
        .iter()
        .all(|p| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y))
}

fn attempt_trial(
    config: &BatteryConfig,
    id: &str,
    condition: Condition,
    seed: u64,
) -> std::result::Result<Materialized, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_k = match condition {
        Condition::Concave | Condition::Nofill => 1,
        _ => 0,
    };
    let params = config
        .gen_ranges
        .sample(&mut rng, min_k, mix(seed, &[0]))
        .ok_or_else(|| format!("generator ranges cannot host a {condition} site"))?;
    let color_index = rng.random_range(0..PALETTE_SIZE);
    let init = generate_polygon(&params).map_err(|e| e.to_string())?;

    let (out, edit) = match condition.edit() {
        None => (init.clone(), None),
        Some(c) => {
            let (out, piece) =
                make_edit(&init, c, config.rel_area, mix(seed, &[1])).map_err(|e| e.to_string())?;
            let record = EditRecord {
                attachment_edge_index: piece.attachment_edge_index,
                area: piece.area,
                patch: piece.patch,
            };
            (out, Some(record))
        }
    };
    if !in_unit_square(&out) {
        return Err("edited polygon leaves the scene".into());
    }

    let res = config.resolution;
    let init_mask = rasterize_mask(&init, res, res);
    let init_gt = encode_mask_png(&init_mask);
    let init_img = encode_image_png(&render_mask(&init_mask, color_index));
    let (out_gt, out_img, a_seg_gt) = if condition.is_change() {
        let out_mask = rasterize_mask(&out, res, res);
        let delta = out_mask.count() as i64 - init_mask.count() as i64;
        if delta <= 0 {
            return Err(format!("edit adds {delta} pixels at {res}px"));
        }
        (
            encode_mask_png(&out_mask),
            encode_image_png(&render_mask(&out_mask, color_index)),
            delta as u64,
        )
    } else {
        (init_gt.clone(), init_img.clone(), 0)
    };

    let trial = TrialPair {
        id: id.to_string(),
        condition,
        init_image_path: asset_name(id, Which::Init, "img"),
        out_image_path: asset_name(id, Which::Out, "img"),
        init_gtmask_path: asset_name(id, Which::Init, "gt"),
        out_gtmask_path: asset_name(id, Which::Out, "gt"),
        a_seg_gt,
        color_index,
        seed,
        gen_params: params,
        init_polygon: init,
        out_polygon: out,
        edit,
    };
    let files = vec![
        (trial.init_image_path.clone(), init_img),
        (trial.out_image_path.clone(), out_img),
        (trial.init_gtmask_path.clone(), init_gt),
        (trial.out_gtmask_path.clone(), out_gt),
    ];
    Ok(Materialized { trial, files })
}

fn build_trial(config: &BatteryConfig, index: usize, condition: Condition) -> Result<Materialized> {
    let id = format!("{index:04}_{}", condition.tag());
    let mut last = String::new();
    for attempt in 0..GEN_RETRY_BUDGET {
        let seed = domain_seed(SeedDomain::Battery, config.seed, index as u64, attempt as u64);
        match attempt_trial(config, &id, condition, seed) {
            Ok(m) => return Ok(m),
            Err(reason) => last = reason,
        }
    }
    Err(GeometryError::GenerationFailed {
        attempts: GEN_RETRY_BUDGET,
        reason: format!("trial {id}: {last}"),
    }
    .into())
}

/// Builds and materializes a battery of `n_per_condition` trials for each
/// active condition, then writes its manifest. Trials are generated in
/// parallel on the current rayon pool; the output does not depend on the
/// pool size.
pub fn build_battery(config: &BatteryConfig, out_dir: &Path) -> Result<Battery> {
    config.validate()?;
    create_dir(out_dir)?;
    let plan: Vec<Condition> = config
        .conditions()
        .into_iter()
        .flat_map(|c| std::iter::repeat_n(c, config.n_per_condition as usize))
        .collect();

    let trials = plan
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let m = build_trial(config, i, c)?;
            for (name, bytes) in &m.files {
                atomic_write(&out_dir.join(name), bytes)?;
            }
            Ok(m.trial)
        })
        .collect::<Result<Vec<_>>>()?;

    let header = BatteryHeader {
        schema_version: SCHEMA_VERSION,
        kind: "battery".into(),
        battery_id: config.battery_id(),
        config: *config,
        timing: Timing::default(),
        n_trials: trials.len(),
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &header, &trials)?;
    Ok(Battery {
        dir: out_dir.to_path_buf(),
        header,
        trials,
    })
}

/// Image and mask PNG bytes for one training row, regenerated from its
/// stored parameters.
pub fn render_training_row(row: &TrainingRow, resolution: u32) -> Result<(Vec<u8>, Vec<u8>)> {
    let poly = generate_polygon(&row.gen_params)?;
    let mask = rasterize_mask(&poly, resolution, resolution);
    if row.color_index >= PALETTE_SIZE {
        return Err(Error::Invalid(format!("color index {} out of range", row.color_index)));
    }
    Ok((
        encode_image_png(&render_mask(&mask, row.color_index)),
        encode_mask_png(&mask),
    ))
}

fn build_training_row(config: &DatasetConfig, index: usize) -> Result<(TrainingRow, Vec<u8>, Vec<u8>)> {
    let id = format!("{index:06}");
    let mut last = String::new();
    for attempt in 0..GEN_RETRY_BUDGET {
        let seed = domain_seed(SeedDomain::Training, config.seed, index as u64, attempt as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(params) = config.gen_ranges.sample(&mut rng, 0, mix(seed, &[0])) else {
            last = "generator ranges are empty".into();
            continue;
        };
        let color_index = rng.random_range(0..PALETTE_SIZE);
        let poly = match generate_polygon(&params) {
            Ok(p) => p,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let res = config.resolution;
        let mask = rasterize_mask(&poly, res, res);
        let row = TrainingRow {
            image_path: format!("{id}_img.png"),
            gtmask_path: format!("{id}_gt.png"),
            id,
            color_index,
            seed,
            gen_params: params,
            pixel_area: mask.count(),
        };
        let img = encode_image_png(&render_mask(&mask, color_index));
        return Ok((row, img, encode_mask_png(&mask)));
    }
    Err(GeometryError::GenerationFailed {
        attempts: GEN_RETRY_BUDGET,
        reason: format!("training image {id}: {last}"),
    }
    .into())
}

/// Generates `n_images` image/mask pairs and their manifest. Seeds come from
/// the training domain, disjoint from every battery seed.
pub fn build_training_set(config: &DatasetConfig, out_dir: &Path) -> Result<TrainingSet> {
    config.validate()?;
    create_dir(out_dir)?;
    let rows = (0..config.n_images as usize)
        .into_par_iter()
        .map(|i| {
            let (row, img, gt) = build_training_row(config, i)?;
            atomic_write(&out_dir.join(&row.image_path), &img)?;
            atomic_write(&out_dir.join(&row.gtmask_path), &gt)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let header = TrainingHeader {
        schema_version: SCHEMA_VERSION,
        kind: "training".into(),
        config: *config,
        n_images: rows.len(),
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &header, &rows)?;
    Ok(TrainingSet {
        dir: out_dir.to_path_buf(),
        header,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{concavities, ConcavityKind};
    use crate::raster::read_mask;
    use crate::seed::domain_of;

    fn small(n: u32, nochange: bool) -> BatteryConfig {
        BatteryConfig {
            n_per_condition: n,
            resolution: 96,
            include_nochange: nochange,
            seed: 11,
            ..BatteryConfig::default()
        }
    }

    #[test]
    fn battery_counts_per_condition() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(10, true), dir.path()).unwrap();
        assert_eq!(b.trials.len(), 40);
        for c in Condition::ALL {
            assert_eq!(b.trials.iter().filter(|t| t.condition == c).count(), 10);
        }
        let seeds: std::collections::HashSet<u64> = b.trials.iter().map(|t| t.seed).collect();
        assert_eq!(seeds.len(), 40);
    }

    #[test]
    fn without_nochange_three_conditions() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(2, false), dir.path()).unwrap();
        assert_eq!(b.trials.len(), 6);
        assert!(b.trials.iter().all(|t| t.condition.is_change()));
    }

    #[test]
    fn concave_trials_have_deep_pockets() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(5, false), dir.path()).unwrap();
        for t in b.trials.iter().filter(|t| t.condition == Condition::Concave) {
            let kinds: Vec<_> = concavities(&t.init_polygon).iter().map(|c| c.kind).collect();
            assert!(kinds.contains(&ConcavityKind::Deep), "{}", t.id);
        }
    }

    #[test]
    fn nochange_files_identical_and_seg_area_matches_masks() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(3, true), dir.path()).unwrap();
        for t in &b.trials {
            let init = fs::read(b.path(&t.init_gtmask_path)).unwrap();
            let out = fs::read(b.path(&t.out_gtmask_path)).unwrap();
            if t.condition == Condition::Nochange {
                assert_eq!(init, out);
                assert_eq!(
                    fs::read(b.path(&t.init_image_path)).unwrap(),
                    fs::read(b.path(&t.out_image_path)).unwrap()
                );
                assert_eq!(t.a_seg_gt, 0);
            } else {
                let a0 = read_mask(&b.path(&t.init_gtmask_path)).unwrap().count();
                let a1 = read_mask(&b.path(&t.out_gtmask_path)).unwrap().count();
                assert_eq!(t.a_seg_gt, a1 - a0);
            }
            assert_eq!(domain_of(t.seed), SeedDomain::Battery);
        }
    }

    #[test]
    fn manifest_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(1, true), dir.path()).unwrap();
        let again = Battery::load(dir.path()).unwrap();
        assert_eq!(b, again);

        let text = fs::read_to_string(b.manifest_path()).unwrap();
        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        let path = dir.path().join("v9.jsonl");
        fs::write(&path, bumped).unwrap();
        let err = Battery::load(&path).unwrap_err();
        assert!(matches!(err, Error::Version { found: 9, expected: 1, .. }), "{err}");
    }

    #[test]
    fn missing_asset_is_listed() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(1, false), dir.path()).unwrap();
        let gone = b.path(&b.trials[1].out_gtmask_path);
        fs::remove_file(&gone).unwrap();
        match Battery::load(dir.path()).unwrap_err() {
            Error::MissingFiles(paths) => assert_eq!(paths, vec![gone]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn truncated_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let b = build_battery(&small(1, true), dir.path()).unwrap();
        let text = fs::read_to_string(b.manifest_path()).unwrap();
        let cut: Vec<&str> = text.lines().take(3).collect();
        fs::write(b.manifest_path(), cut.join("\n")).unwrap();
        assert!(matches!(Battery::load(dir.path()).unwrap_err(), Error::Manifest { .. }));
    }

    #[test]
    fn battery_is_reproducible() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        build_battery(&small(2, true), d1.path()).unwrap();
        build_battery(&small(2, true), d2.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(d1.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for n in names {
            assert_eq!(
                fs::read(d1.path().join(&n)).unwrap(),
                fs::read(d2.path().join(&n)).unwrap(),
                "{n:?}"
            );
        }
    }

    #[test]
    fn training_rows_replay_and_stay_in_range() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig {
            n_images: 30,
            resolution: 64,
            seed: 5,
            gen_ranges: GenRanges::default(),
        };
        let set = build_training_set(&cfg, dir.path()).unwrap();
        assert_eq!(set.rows.len(), 30);
        for row in &set.rows {
            assert!((5..=12).contains(&row.gen_params.n_vertices));
            assert!(row.gen_params.n_concavities <= 3);
            assert_eq!(domain_of(row.seed), SeedDomain::Training);
            let (img, gt) = render_training_row(row, 64).unwrap();
            assert_eq!(img, fs::read(dir.path().join(&row.image_path)).unwrap());
            assert_eq!(gt, fs::read(dir.path().join(&row.gtmask_path)).unwrap());
        }
        assert_eq!(TrainingSet::load(dir.path()).unwrap(), set);
    }

    #[test]
    fn infeasible_ranges_rejected() {
        let cfg = GenRanges {
            n_vertices: (5, 6),
            n_concavities: (3, 3),
            ..GenRanges::default()
        };
        assert!(cfg.validate().is_err());
        let bad = BatteryConfig {
            rel_area: 0.5,
            ..BatteryConfig::default()
        };
        assert!(matches!(
            bad.validate().unwrap_err(),
            Error::Geometry(GeometryError::InvalidRelArea(_))
        ));
    }

    #[test]
    fn condition_parsing() {
        assert_eq!("nofill".parse::<Condition>().unwrap(), Condition::Nofill);
        assert!("bulge".parse::<Condition>().is_err());
    }
}
