//! Mask producers: exact ground truth, convex hull, disk closing, or masks
//! read from an external directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fsutil::{atomic_write, create_dir};
use crate::metrics::{binarize, ProbMap};
use crate::morphology::morphological_closing;
use crate::raster::{decode, encode_mask_png, mask_from_gray8, rasterize_mask, read_mask, MaskGrid};
use crate::trials::{Battery, TrialPair, Which};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObserverSpec {
    Exact,
    ConvexHull,
    Closing { radius_px: u32 },
    External { mask_dir: PathBuf },
}

impl ObserverSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ObserverSpec::Closing { radius_px: 0 } => {
                Err(Error::Invalid("closing radius must be at least 1 px".into()))
            }
            ObserverSpec::External { mask_dir } if !mask_dir.is_dir() => Err(Error::io(
                mask_dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "mask directory not found"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ObserverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObserverSpec::Exact => f.write_str("exact"),
            ObserverSpec::ConvexHull => f.write_str("hull"),
            ObserverSpec::Closing { radius_px } => write!(f, "closing:{radius_px}"),
            ObserverSpec::External { mask_dir } => write!(f, "external:{}", mask_dir.display()),
        }
    }
}

impl FromStr for ObserverSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Invalid(format!("unknown observer {s:?} (expected exact, hull, closing:<r> or external:<dir>)"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind.to_ascii_lowercase().as_str(), arg) {
            ("exact", None) => Ok(ObserverSpec::Exact),
            ("hull" | "convex_hull", None) => Ok(ObserverSpec::ConvexHull),
            ("closing", Some(r)) => {
                let radius_px: u32 = r
                    .parse()
                    .map_err(|_| Error::Invalid(format!("closing radius {r:?} is not a whole number")))?;
                if radius_px == 0 {
                    return Err(Error::Invalid("closing radius must be at least 1 px".into()));
                }
                Ok(ObserverSpec::Closing { radius_px })
            }
            ("external", Some(dir)) if !dir.is_empty() => Ok(ObserverSpec::External {
                mask_dir: PathBuf::from(dir),
            }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ObserverSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObserverSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// File name of an observer mask under the external directory contract.
pub fn external_mask_name(trial_id: &str, which: Which) -> String {
    format!("{trial_id}_{}.png", which.as_str())
}

/// Reads an external mask, accepting 8-bit binary masks and 16-bit
/// probability maps (binarized at p > 0.5).
pub fn read_external_mask(path: &Path) -> Result<MaskGrid> {
    match decode(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            mask_from_gray8(path, w, h, img.as_raw())
        }
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            Ok(binarize(&ProbMap::from_u16(w, h, img.as_raw())?))
        }
        other => Err(Error::MalformedMask {
            path: path.to_path_buf(),
            reason: format!(
                "expected 8-bit mask or 16-bit probability map, found {:?}",
                other.color()
            ),
        }),
    }
}

fn external(battery: &Battery, dir: &Path, trial: &TrialPair, which: Which) -> Result<MaskGrid> {
    let path = dir.join(external_mask_name(&trial.id, which));
    if !path.is_file() {
        return Err(Error::MissingExternalMask {
            trial_id: trial.id.clone(),
            path,
        });
    }
    let mask = read_external_mask(&path)?;
    let res = battery.resolution();
    if mask.width() != res || mask.height() != res {
        return Err(Error::DimensionMismatch {
            path,
            found_w: mask.width(),
            found_h: mask.height(),
            expected_w: res,
            expected_h: res,
        });
    }
    Ok(mask)
}

pub fn observe(spec: &ObserverSpec, battery: &Battery, trial: &TrialPair, which: Which) -> Result<MaskGrid> {
    let gt = || read_mask(&battery.path(trial.gtmask_path(which)));
    match spec {
        ObserverSpec::Exact => gt(),
        ObserverSpec::ConvexHull => {
            let res = battery.resolution();
            Ok(rasterize_mask(&trial.polygon(which).convex_hull(), res, res))
        }
        ObserverSpec::Closing { radius_px } => Ok(morphological_closing(&gt()?, *radius_px)),
        ObserverSpec::External { mask_dir } => external(battery, mask_dir, trial, which),
    }
}

/// Runs `spec` over every trial and writes `<id>_{init|out}.png` masks into
/// `out_dir`.
pub fn observe_battery(spec: &ObserverSpec, battery: &Battery, out_dir: &Path) -> Result<()> {
    spec.validate()?;
    create_dir(out_dir)?;
    battery.trials.par_iter().try_for_each(|t| {
        for which in Which::BOTH {
            let mask = observe(spec, battery, t, which)?;
            atomic_write(&out_dir.join(external_mask_name(&t.id, which)), &encode_mask_png(&mask))?;
        }
        Ok(())
    })
}
