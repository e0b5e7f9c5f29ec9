//! Seeded star-polygon generator with an exact reflex-vertex count.
//!
//! Vertices are placed by angle around a centre, so any positive radius
//! assignment yields a simple polygon. The non-notch vertices are kept in
//! strictly convex position; each requested concavity is one vertex pulled
//! inward past the chord of its neighbours. Neighbours of a notch vertex are
//! first drawn toward it in angle, which is what produces narrow, deep notches.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{is_simple, orient, signed_area, Point2, Polygon, VertexClass};
use crate::error::GeometryError;
use crate::seed::mix;

pub const GEN_RETRY_BUDGET: usize = 64;
pub const MIN_POLYGON_AREA: f64 = 0.02;

const MIN_VERTICES: u32 = 5;
const MAX_VERTICES: u32 = 12;
const MAX_CONCAVITIES: u32 = 3;

const BASE_RADIUS: (f64, f64) = (0.17, 0.24);

/// Notch shapes. A slit pulls its neighbours to within a few degrees of the
/// notch ray and sinks the apex close to the centre; a bay keeps most of the
/// angular gap and stays shallow.
#[derive(Debug, Clone, Copy)]
struct NotchStyle {
    /// Angle (radians) between the notch ray and each neighbour, or `None`
    /// to scale the existing gap by `squeeze`.
    half_width: Option<(f64, f64)>,
    squeeze: (f64, f64),
    /// Apex radius as a fraction of the chord radius along the notch ray.
    apex: (f64, f64),
}

const SLIT: NotchStyle = NotchStyle {
    half_width: Some((0.1, 0.2)),
    squeeze: (1.0, 1.0),
    apex: (0.03, 0.25),
};
const BAY: NotchStyle = NotchStyle {
    half_width: None,
    squeeze: (0.75, 1.0),
    apex: (0.45, 0.8),
};
const SCENE_MARGIN: f64 = 0.03;
/// sin of the smallest turn accepted at convex vertices.
const MIN_CONVEX_TURN: f64 = 0.05;
const MIN_REFLEX_TURN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_vertices: u32,
    pub n_concavities: u32,
    pub irregularity: f64,
    pub spikiness: f64,
    pub seed: u64,
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParams(m));
        if !(MIN_VERTICES..=MAX_VERTICES).contains(&self.n_vertices) {
            return bad(format!("n_vertices {} outside [5, 12]", self.n_vertices));
        }
        if self.n_concavities > MAX_CONCAVITIES {
            return bad(format!("n_concavities {} outside [0, 3]", self.n_concavities));
        }
        if self.n_concavities + 4 > self.n_vertices {
            return bad(format!(
                "n_concavities {} exceeds n_vertices - 4 = {}",
                self.n_concavities,
                self.n_vertices - 4
            ));
        }
        for (name, v) in [("irregularity", self.irregularity), ("spikiness", self.spikiness)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

pub fn generate_polygon(params: &GenParams) -> Result<Polygon, GeometryError> {
    params.validate()?;
    let mut last = String::new();
    for attempt in 0..GEN_RETRY_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(params.seed, &[attempt as u64]));
        match try_generate(params, &mut rng) {
            Ok(p) => return Ok(p),
            Err(reason) => last = reason,
        }
    }
    Err(GeometryError::GenerationFailed {
        attempts: GEN_RETRY_BUDGET,
        reason: last,
    })
}

fn wrap_pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn pick_notches(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for i in idx {
        if chosen.len() == k {
            break;
        }
        let adjacent = chosen
            .iter()
            .any(|&c| (c + 1) % n == i || (i + 1) % n == c);
        if !adjacent {
            chosen.push(i);
        }
    }
    (chosen.len() == k).then(|| {
        chosen.sort_unstable();
        chosen
    })
}

fn turn_ratio(prev: Point2, v: Point2, next: Point2) -> f64 {
    orient(prev, v, next) / ((v - prev).norm() * (next - v).norm())
}

fn try_generate(params: &GenParams, rng: &mut ChaCha8Rng) -> Result<Polygon, String> {
    let n = params.n_vertices as usize;
    let k = params.n_concavities as usize;
    let step = TAU / n as f64;

    let start = rng.random_range(0.0..TAU);
    let mut angles: Vec<f64> = (0..n)
        .map(|i| start + step * (i as f64 + params.irregularity * rng.random_range(-0.45..0.45)))
        .collect();
    let base_radius = rng.random_range(BASE_RADIUS.0..BASE_RADIUS.1);
    let deviation: Vec<f64> = (0..n)
        .map(|_| params.spikiness * rng.random_range(-0.4..0.4))
        .collect();

    let notches = pick_notches(n, k, rng).ok_or("could not place non-adjacent notches")?;
    let is_notch = |i: usize| notches.contains(&i);

    let mut apex_fraction = Vec::with_capacity(k);
    for &i in &notches {
        let style = if rng.random_bool(0.5) { SLIT } else { BAY };
        let half_width = style.half_width.map(|(lo, hi)| rng.random_range(lo..hi));
        let squeeze = rng.random_range(style.squeeze.0..=style.squeeze.1);
        for j in [(i + n - 1) % n, (i + 1) % n] {
            let delta = wrap_pi(angles[j] - angles[i]);
            let scale = match half_width {
                Some(w) => (w / delta.abs()).min(1.0),
                None => squeeze,
            };
            angles[j] = angles[i] + scale * delta;
        }
        apex_fraction.push(rng.random_range(style.apex.0..style.apex.1));
    }

    // Shrink the radial noise until the base polygon is strictly convex.
    let mut blend = 1.0;
    let base = loop {
        let pts: Vec<Point2> = (0..n)
            .map(|i| {
                let r = base_radius * (1.0 + blend * deviation[i]);
                Point2::new(r * angles[i].cos(), r * angles[i].sin())
            })
            .collect();
        let convex = (0..n).all(|i| {
            turn_ratio(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]) > MIN_CONVEX_TURN
        });
        if convex {
            break pts;
        }
        if blend == 0.0 {
            return Err("angular layout cannot be made convex".into());
        }
        blend = if blend < 1.0 / 64.0 { 0.0 } else { blend * 0.5 };
    };

    let mut pts = base.clone();
    for (&i, &frac) in notches.iter().zip(&apex_fraction) {
        let p = base[(i + n - 1) % n];
        let q = base[(i + 1) % n];
        let dir = Point2::new(angles[i].cos(), angles[i].sin());
        // ray from the centre along `dir` meets the chord p-q at t
        let denom = dir.cross(q - p);
        if denom.abs() < 1e-12 {
            return Err("degenerate notch chord".into());
        }
        let t = p.cross(q - p) / denom;
        if t <= 0.0 {
            return Err("notch chord behind centre".into());
        }
        pts[i] = dir * (frac * t);
    }

    for i in 0..n {
        let ratio = turn_ratio(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        let ok = if is_notch(i) {
            ratio < -MIN_REFLEX_TURN
        } else {
            ratio > MIN_CONVEX_TURN
        };
        if !ok {
            return Err(format!("vertex {i} turn {ratio:.3} outside margin"));
        }
    }

    // Place inside the unit square with a random offset in the free slack.
    let (min_x, max_x, min_y, max_y) = pts.iter().fold(
        (f64::MAX, f64::MIN, f64::MAX, f64::MIN),
        |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
    );
    let span_x = (SCENE_MARGIN - min_x, 1.0 - SCENE_MARGIN - max_x);
    let span_y = (SCENE_MARGIN - min_y, 1.0 - SCENE_MARGIN - max_y);
    if span_x.0 > span_x.1 || span_y.0 > span_y.1 {
        return Err("polygon does not fit the scene".into());
    }
    let jitter = |span: (f64, f64), u: f64| 0.5 * (span.0 + span.1) + 0.25 * u * (span.1 - span.0);
    let offset = Point2::new(
        jitter(span_x, rng.random_range(-1.0..=1.0)),
        jitter(span_y, rng.random_range(-1.0..=1.0)),
    );
    let pts: Vec<Point2> = pts.into_iter().map(|p| p + offset).collect();

    if !is_simple(&pts) {
        return Err("polygon not simple".into());
    }
    let area = signed_area(&pts);
    if area < MIN_POLYGON_AREA {
        return Err(format!("area {area:.4} below minimum"));
    }
    let poly = Polygon::new(pts).map_err(|e| e.to_string())?;
    let reflex = poly
        .classify_vertices()
        .iter()
        .filter(|c| **c == VertexClass::Reflex)
        .count();
    if reflex != k {
        return Err(format!("reflex count {reflex} != {k}"));
    }
    Ok(poly)
}
