//! Planar polygon primitives for stimulus construction.
//!
//! Scene coordinates live in the unit square. Polygons are stored
//! counter-clockwise (positive shoelace area) and are always simple.

mod edit;
mod generate;

pub use edit::{concavities, make_edit, Concavity, ConcavityKind, EditCondition, EditPiece, MAX_REL_AREA};
pub use generate::{generate_polygon, GenParams, GEN_RETRY_BUDGET, MIN_POLYGON_AREA};

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Orientation of the triple `(a, b, c)`: positive for a left turn.
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VertexClass {
    Convex,
    Reflex,
}

/// A simple, counter-clockwise polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates vertex count, finiteness, simplicity and CCW orientation.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidPolygon(format!("non-finite vertex {p:?}")));
        }
        if !is_simple(&vertices) {
            return Err(GeometryError::InvalidPolygon("polygon is not simple".into()));
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(GeometryError::InvalidPolygon(
                "polygon must be counter-clockwise".into(),
            ));
        }
        Ok(Self { vertices })
    }

    /// Like [`Polygon::new`] but reverses clockwise input first.
    pub fn new_any_orientation(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1` (cyclically).
    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                a.dist(b)
            })
            .sum()
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    pub fn classify_vertices(&self) -> Vec<VertexClass> {
        classify_vertices(&self.vertices)
    }

    pub fn reflex_count(&self) -> usize {
        self.classify_vertices()
            .into_iter()
            .filter(|c| *c == VertexClass::Reflex)
            .count()
    }

    pub fn convex_hull(&self) -> Polygon {
        let idx = convex_hull_indices(&self.vertices);
        Polygon {
            vertices: idx.into_iter().map(|i| self.vertices[i]).collect(),
        }
    }
}

impl TryFrom<Vec<Point2>> for Polygon {
    type Error = GeometryError;
    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

/// Shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * acc
}

pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.area()
}

/// Convex/reflex label per vertex from the turn direction at that vertex.
/// Assumes counter-clockwise order; collinear vertices count as convex.
pub fn classify_vertices(vertices: &[Point2]) -> Vec<VertexClass> {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let prev = vertices[(i + n - 1) % n];
            let next = vertices[(i + 1) % n];
            if orient(prev, vertices[i], next) < 0.0 {
                VertexClass::Reflex
            } else {
                VertexClass::Convex
            }
        })
        .collect()
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching endpoints included.
pub fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True iff the closed polygonal chain has no improper intersections.
///
/// Non-adjacent edges may not touch at all; adjacent edges may only share
/// their common vertex. Quadratic in the vertex count.
pub fn is_simple(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if vertices[i] == vertices[(i + 1) % n] {
            return false;
        }
    }
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        // adjacent edges folding back onto each other
        if orient(a, b, c) == 0.0 && (b - a).dot(c - b) < 0.0 {
            return false;
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let p = vertices[j];
            let q = vertices[(j + 1) % n];
            if segments_intersect(a, b, p, q) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test with the crossing convention used by the
/// rasterizer, so a point classifies identically in both paths.
pub fn point_in_polygon(vertices: &[Point2], p: Point2) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let vi = vertices[i];
        let vj = vertices[j];
        if (vi.y > p.y) != (vj.y > p.y) && p.x < edge_x_at(vi, vj, p.y) {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// x coordinate where the edge `a`–`b` meets the horizontal line at `y`.
#[inline]
pub(crate) fn edge_x_at(a: Point2, b: Point2, y: f64) -> f64 {
    (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x
}

/// Indices of the convex hull vertices, counter-clockwise, collinear points
/// dropped. Monotone chain; the start vertex is the lowest index on the hull
/// so the output follows the input's cyclic order for CCW simple polygons.
pub fn convex_hull_indices(points: &[Point2]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    order.dedup_by(|a, b| points[*a] == points[*b]);
    if order.len() < 3 {
        return order;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * order.len());
    for &i in order.iter() {
        while hull.len() >= 2
            && orient(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in order.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && orient(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    let start = hull
        .iter()
        .enumerate()
        .min_by_key(|(_, &i)| i)
        .map(|(k, _)| k)
        .unwrap_or(0);
    hull.rotate_left(start);
    hull
}

pub fn convex_hull(poly: &Polygon) -> Polygon {
    poly.convex_hull()
}

/// Point strictly inside a CCW convex polygon, at least `margin` from every edge.
pub fn inside_convex(hull: &[Point2], p: Point2, margin: f64) -> bool {
    let n = hull.len();
    (0..n).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        orient(a, b, p) / a.dist(b) > margin
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    pub(crate) fn l_hexagon() -> Polygon {
        Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap()
    }

    fn regular(n: usize) -> Polygon {
        let v = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                Point2::new(0.5 + 0.4 * t.cos(), 0.5 + 0.4 * t.sin())
            })
            .collect();
        Polygon::new(v).unwrap()
    }

    /// Interior angle at each vertex by atan2 of the incoming/outgoing edges.
    fn interior_angles(v: &[Point2]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let to_prev = v[(i + n - 1) % n] - v[i];
                let to_next = v[(i + 1) % n] - v[i];
                let a = to_next.y.atan2(to_next.x);
                let b = to_prev.y.atan2(to_prev.x);
                (b - a).rem_euclid(std::f64::consts::TAU)
            })
            .collect()
    }

    #[test]
    fn square_is_all_convex() {
        assert_eq!(square().classify_vertices(), vec![VertexClass::Convex; 4]);
    }

    #[test]
    fn l_hexagon_has_one_reflex_vertex() {
        let l = l_hexagon();
        let classes = l.classify_vertices();
        let angles = interior_angles(l.vertices());
        for (c, a) in classes.iter().zip(&angles) {
            assert_eq!(*c == VertexClass::Reflex, *a > std::f64::consts::PI);
        }
        assert_eq!(classes.iter().filter(|c| **c == VertexClass::Reflex).count(), 1);
        assert_eq!(classes[4], VertexClass::Reflex);
    }

    #[test]
    fn regular_dodecagon_convex() {
        assert_eq!(regular(12).reflex_count(), 0);
    }

    #[test]
    fn shoelace_areas() {
        assert_eq!(square().area(), 1.0);
        let tri = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(tri.area(), 0.5);
        assert_eq!(l_hexagon().area(), 0.75);
    }

    #[test]
    fn simplicity() {
        assert!(is_simple(square().vertices()));
        let bowtie = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(!is_simple(&bowtie));
        assert!(Polygon::new(bowtie.to_vec()).is_err());
        // spike folding back along its incoming edge
        let fold = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 1.0),
        ];
        assert!(!is_simple(&fold));
    }

    #[test]
    fn clockwise_rejected() {
        let mut v = square().vertices().to_vec();
        v.reverse();
        assert!(Polygon::new(v.clone()).is_err());
        assert_eq!(Polygon::new_any_orientation(v).unwrap().area(), 1.0);
    }

    #[test]
    fn hull_of_convex_is_identity() {
        let p = regular(9);
        assert_eq!(p.convex_hull().vertices(), p.vertices());
        assert_eq!(square().convex_hull(), square());
    }

    /// A point is a strict hull vertex iff it lies in no triangle (closed)
    /// spanned by three other points and is not on a segment between two others.
    fn brute_force_hull_vertices(pts: &[Point2]) -> Vec<usize> {
        let n = pts.len();
        let in_tri = |p: Point2, a: Point2, b: Point2, c: Point2| {
            let d1 = orient(a, b, p);
            let d2 = orient(b, c, p);
            let d3 = orient(c, a, p);
            let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
            let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
            !(neg && pos)
        };
        (0..n)
            .filter(|&i| {
                let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
                for &a in &others {
                    for &b in &others {
                        if b <= a {
                            continue;
                        }
                        if orient(pts[a], pts[b], pts[i]) == 0.0 && on_segment(pts[a], pts[b], pts[i]) {
                            return false;
                        }
                        for &c in &others {
                            if c <= b {
                                continue;
                            }
                            if orient(pts[a], pts[b], pts[c]) != 0.0
                                && in_tri(pts[i], pts[a], pts[b], pts[c])
                            {
                                return false;
                            }
                        }
                    }
                }
                true
            })
            .collect()
    }

    #[test]
    fn hull_of_l_hexagon_matches_brute_force() {
        let l = l_hexagon();
        let hull = l.convex_hull();
        let expected = brute_force_hull_vertices(l.vertices());
        assert_eq!(expected, vec![0, 1, 2, 3, 5]);
        assert_eq!(convex_hull_indices(l.vertices()), expected);
        assert!(!hull.vertices().contains(&Point2::new(0.5, 0.5)));
        assert_eq!(hull.area(), 0.875);
    }

    #[test]
    fn reflex_polygon_hull_is_larger() {
        let p = crate::geometry::generate_polygon(&GenParams {
            n_vertices: 9,
            n_concavities: 1,
            irregularity: 0.4,
            spikiness: 0.3,
            seed: 11,
        })
        .unwrap();
        assert!(p.convex_hull().area() > p.area());
    }

    #[test]
    fn point_in_polygon_basics() {
        let l = l_hexagon();
        assert!(l.contains(Point2::new(0.25, 0.25)));
        assert!(l.contains(Point2::new(0.75, 0.75)));
        assert!(!l.contains(Point2::new(0.25, 0.75)));
        assert!(!l.contains(Point2::new(1.5, 0.5)));
    }

    #[test]
    fn monte_carlo_area_of_generated_polygon() {
        use rand::{Rng, SeedableRng};
        let p = crate::geometry::generate_polygon(&GenParams {
            n_vertices: 9,
            n_concavities: 2,
            irregularity: 0.5,
            spikiness: 0.4,
            seed: 1,
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let samples = 1_000_000;
        let hits = (0..samples)
            .filter(|_| p.contains(Point2::new(rng.random(), rng.random())))
            .count();
        let estimate = hits as f64 / samples as f64;
        assert!((estimate - p.area()).abs() <= 1e-3, "{estimate} vs {}", p.area());
    }
}
