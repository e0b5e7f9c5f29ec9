//! Concavity analysis and local edit construction.
//!
//! A concavity is a pocket between two consecutive convex-hull vertices that
//! are not adjacent on the polygon. Its mouth is the hull chord across the
//! pocket and its depth the largest distance of a pocket vertex from that
//! chord. Narrow pockets (mouth < depth) are `Deep`, the rest `Shallow`.
//!
//! Every edit adds an isosceles triangle scaled to a target area. Convex
//! edits erect it outward on the middle of a hull edge; pocket edits fill the
//! pocket apex with a wedge whose equal legs lie on the two pocket walls.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::{convex_hull_indices, is_simple, orient, Point2, Polygon};
use crate::error::GeometryError;

/// Largest accepted edit size as a fraction of the host area.
pub const MAX_REL_AREA: f64 = 0.15;

/// Minimum clearance between an edit apex and the rest of the host, in
/// scene units.
const APEX_CLEARANCE: f64 = 0.004;
/// Longest wedge leg as a fraction of the shorter pocket edge.
const WEDGE_MAX_LEG: f64 = 0.9;
/// Depths below this are collinear hull points, not concavities.
const MIN_POCKET_DEPTH: f64 = 1e-9;
const SCENE_MARGIN: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EditCondition {
    Concave,
    Nofill,
    Convex,
}

impl fmt::Display for EditCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EditCondition::Concave => "CONCAVE",
            EditCondition::Nofill => "NOFILL",
            EditCondition::Convex => "CONVEX",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConcavityKind {
    Deep,
    Shallow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concavity {
    /// Hull vertex opening the pocket.
    pub start: usize,
    /// Hull vertex closing the pocket.
    pub end: usize,
    /// Pocket vertices strictly between `start` and `end`, in polygon order.
    pub chain: Vec<usize>,
    pub mouth: f64,
    pub depth: f64,
    /// Pocket vertex farthest from the mouth chord.
    pub deepest: usize,
    pub kind: ConcavityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPiece {
    pub patch: Polygon,
    pub attachment_edge_index: usize,
    pub condition: EditCondition,
    pub area: f64,
}

fn dist_to_line(a: Point2, b: Point2, p: Point2) -> f64 {
    orient(a, b, p).abs() / a.dist(b)
}

pub fn concavities(poly: &Polygon) -> Vec<Concavity> {
    let v = poly.vertices();
    let n = v.len();
    let hull: Vec<Point2> = convex_hull_indices(v).into_iter().map(|i| v[i]).collect();
    // Vertices on the hull boundary, collinear ones included, so the mouth
    // spans the points where the outline actually leaves the hull.
    let rim: Vec<usize> = (0..n).filter(|&i| on_hull_boundary(&hull, v[i])).collect();
    let h = rim.len();
    let mut out = Vec::new();
    for k in 0..h {
        let start = rim[k];
        let end = rim[(k + 1) % h];
        let gap = (end + n - start) % n;
        if gap <= 1 {
            continue;
        }
        let chain: Vec<usize> = (1..gap).map(|d| (start + d) % n).collect();
        let (a, b) = (v[start], v[end]);
        let (deepest, depth) = chain
            .iter()
            .map(|&i| (i, dist_to_line(a, b, v[i])))
            .fold((chain[0], f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
        if depth <= MIN_POCKET_DEPTH {
            continue;
        }
        let mouth = a.dist(b);
        let kind = if mouth < depth {
            ConcavityKind::Deep
        } else {
            ConcavityKind::Shallow
        };
        out.push(Concavity {
            start,
            end,
            chain,
            mouth,
            depth,
            deepest,
            kind,
        });
    }
    out
}

fn on_hull_boundary(hull: &[Point2], p: Point2) -> bool {
    let h = hull.len();
    (0..h).any(|k| {
        let (a, b) = (hull[k], hull[(k + 1) % h]);
        let len = a.dist(b);
        let t = (p - a).dot(b - a) / (len * len);
        (-1e-12..=1.0 + 1e-12).contains(&t) && orient(a, b, p).abs() <= 1e-12 * len.max(1.0)
    })
}

/// A candidate bump placement: edge index plus base interval along the edge,
/// measured as fractions from the edge start.
#[derive(Debug, Clone, Copy)]
struct Site {
    edge: usize,
    t0: f64,
    t1: f64,
}

fn build(
    poly: &Polygon,
    site: Site,
    target: f64,
    in_scene: bool,
) -> Option<(Polygon, EditPiece)> {
    let n = poly.len();
    let (e0, e1) = poly.edge(site.edge);
    let d = e1 - e0;
    let len = d.norm();
    let base = (site.t1 - site.t0) * len;
    if base <= 0.0 {
        return None;
    }
    let height = 2.0 * target / base;
    let b0 = e0 + d * site.t0;
    let b1 = e0 + d * site.t1;
    // outward normal of a CCW edge is to its right
    let normal = Point2::new(d.y / len, -d.x / len);
    let apex = (b0 + b1) * 0.5 + normal * height;
    if in_scene
        && (!(SCENE_MARGIN..=1.0 - SCENE_MARGIN).contains(&apex.x)
            || !(SCENE_MARGIN..=1.0 - SCENE_MARGIN).contains(&apex.y))
    {
        return None;
    }
    let v = poly.vertices();
    // keep the apex clear of every host edge other than the attachment edge
    for i in 0..n {
        if i == site.edge {
            continue;
        }
        let (a, b) = poly.edge(i);
        if dist_point_segment(apex, a, b) < APEX_CLEARANCE {
            return None;
        }
    }
    let mut out = Vec::with_capacity(n + 3);
    for (i, &p) in v.iter().enumerate() {
        out.push(p);
        if i == site.edge {
            if site.t0 > 0.0 {
                out.push(b0);
            }
            out.push(apex);
            if site.t1 < 1.0 {
                out.push(b1);
            }
        }
    }
    if !is_simple(&out) {
        return None;
    }
    let out = Polygon::new(out).ok()?;
    let patch = Polygon::new(vec![b1, b0, apex]).ok()?;
    let area = patch.area();
    Some((
        out,
        EditPiece {
            patch,
            attachment_edge_index: site.edge,
            condition: EditCondition::Convex,
            area,
        },
    ))
}

fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Isosceles wedge filling the apex of a pocket: legs of length `t` run
/// along the two host edges meeting at the deepest vertex, which the union
/// absorbs. All other host vertices are kept.
fn build_wedge(poly: &Polygon, c: &Concavity, target: f64) -> Option<(Polygon, EditPiece)> {
    let v = poly.vertices();
    let n = v.len();
    let apex = v[c.deepest];
    let prev = v[(c.deepest + n - 1) % n];
    let next = v[(c.deepest + 1) % n];
    if orient(prev, apex, next) >= 0.0 {
        return None;
    }
    let (len_in, len_out) = (prev.dist(apex), next.dist(apex));
    let sin_open = (prev - apex).cross(next - apex).abs() / (len_in * len_out);
    let leg = (2.0 * target / sin_open).sqrt();
    if leg > WEDGE_MAX_LEG * len_in.min(len_out) {
        return None;
    }
    let a = apex + (prev - apex) * (leg / len_in);
    let b = apex + (next - apex) * (leg / len_out);
    let mut out = Vec::with_capacity(n + 1);
    for (i, &p) in v.iter().enumerate() {
        if i == c.deepest {
            out.push(a);
            out.push(b);
        } else {
            out.push(p);
        }
    }
    if !is_simple(&out) {
        return None;
    }
    // the chord a-b must keep clear of the rest of the host
    for i in 0..n {
        let (p, q) = poly.edge(i);
        if i == c.deepest || (i + 1) % n == c.deepest {
            continue;
        }
        if dist_segment_segment(a, b, p, q) < APEX_CLEARANCE {
            return None;
        }
    }
    let out = Polygon::new(out).ok()?;
    let patch = Polygon::new_any_orientation(vec![a, apex, b]).ok()?;
    let area = patch.area();
    Some((
        out,
        EditPiece {
            patch,
            attachment_edge_index: (c.deepest + n - 1) % n,
            condition: EditCondition::Concave,
            area,
        },
    ))
}

fn dist_segment_segment(a: Point2, b: Point2, p: Point2, q: Point2) -> f64 {
    if super::segments_intersect(a, b, p, q) {
        return 0.0;
    }
    dist_point_segment(a, p, q)
        .min(dist_point_segment(b, p, q))
        .min(dist_point_segment(p, a, b))
        .min(dist_point_segment(q, a, b))
}

fn convex_sites(poly: &Polygon, hull_idx: &[usize], rng: &mut ChaCha8Rng, target: f64) -> Vec<Vec<Site>> {
    let n = poly.len();
    let h = hull_idx.len();
    let mut edges: Vec<usize> = (0..h)
        .filter(|&k| hull_idx[(k + 1) % h] == (hull_idx[k] + 1) % n)
        .map(|k| hull_idx[k])
        .collect();
    edges.shuffle(rng);
    edges
        .into_iter()
        .map(|edge| {
            let (a, b) = poly.edge(edge);
            let len = a.dist(b);
            // base twice the height when it fits, otherwise as wide as allowed
            let preferred = (2.0 * target.sqrt() / len).min(0.7);
            let mut widths = vec![preferred];
            widths.extend([0.6, 0.5, 0.4, 0.3].into_iter().filter(|w| *w < preferred));
            widths
                .into_iter()
                .map(|w| Site {
                    edge,
                    t0: 0.5 - w / 2.0,
                    t1: 0.5 + w / 2.0,
                })
                .collect()
        })
        .collect()
}

/// Adds a local piece of area `rel_area * area(poly)` at a site matching
/// `condition`: inside a deep pocket (`Concave`), inside a shallow pocket
/// (`Nofill`) or on a hull edge (`Convex`). Host vertices are preserved.
///
/// Sites whose apex stays inside the unit scene are preferred; callers that
/// need in-scene stimuli must still check the result.
pub fn make_edit(
    poly: &Polygon,
    condition: EditCondition,
    rel_area: f64,
    seed: u64,
) -> Result<(Polygon, EditPiece), GeometryError> {
    if !(rel_area > 0.0 && rel_area <= MAX_REL_AREA) {
        return Err(GeometryError::InvalidRelArea(rel_area));
    }
    let target = rel_area * poly.area();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hull_idx = convex_hull_indices(poly.vertices());
    let no_site = |reason: &str| GeometryError::NoSuitableSite {
        condition: condition.to_string(),
        reason: reason.to_string(),
    };

    match condition {
        EditCondition::Convex => {
            let groups = convex_sites(poly, &hull_idx, &mut rng, target);
            // Sites keeping the apex inside the unit scene win; others are a fallback.
            for in_scene in [true, false] {
                for site in groups.iter().flatten() {
                    if let Some((out, mut piece)) = build(poly, *site, target, in_scene) {
                        piece.condition = condition;
                        return Ok((out, piece));
                    }
                }
            }
        }
        EditCondition::Concave | EditCondition::Nofill => {
            let wanted = if condition == EditCondition::Concave {
                ConcavityKind::Deep
            } else {
                ConcavityKind::Shallow
            };
            let mut pockets: Vec<Concavity> = concavities(poly)
                .into_iter()
                .filter(|c| c.kind == wanted)
                .collect();
            if pockets.is_empty() {
                return Err(no_site("no concavity of the required depth class"));
            }
            pockets.shuffle(&mut rng);
            for c in &pockets {
                if let Some((out, mut piece)) = build_wedge(poly, c, target) {
                    piece.condition = condition;
                    return Ok((out, piece));
                }
            }
        }
    }
    Err(no_site("patch does not fit at any candidate site"))
}
