//! Open witness regions for the open set condition, and the exact convex
//! geometry needed to push them through affine maps.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ifs::{Affine, Hull, Point};

/// Boundary slack for containment and disjointness tests.
pub const GEOM_SLACK: f64 = 1e-12;

/// An open region `V ⊂ R^d`, as read from a witness file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// Open box `∏ (lo_k, hi_k)`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Interior of a convex polygon (2-D only).
    Polygon { vertices: Vec<[f64; 2]> },
    /// Finite union of the other kinds.
    Union { parts: Vec<Region> },
    /// Interior of the system's hull ball.
    Hull,
}

impl Region {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::Box {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Convex pieces of the region, resolved against `hull`.
    pub fn pieces(&self, hull: &Hull) -> Result<Vec<Shape>> {
        let d = hull.center.len();
        match self {
            Region::Union { parts } => {
                if parts.is_empty() {
                    return invalid("empty union");
                }
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.pieces(hull)?);
                }
                Ok(out)
            }
            other => Ok(vec![Shape::from_region(other, d, hull)?]),
        }
    }

    /// Whether `x` lies in the open region.
    pub fn contains(&self, x: &Point, hull: &Hull) -> Result<bool> {
        Ok(self.pieces(hull)?.iter().any(|s| s.contains_open(x)))
    }
}

/// A convex piece in a form that is closed under the affine maps we need.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Interval { lo: f64, hi: f64 },
    /// Counter-clockwise convex polygon.
    Polygon(Vec<[f64; 2]>),
    Ball { center: Point, radius: f64 },
}

impl Shape {
    fn from_region(r: &Region, d: usize, hull: &Hull) -> Result<Shape> {
        match r {
            Region::Box { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    return invalid(format!("box dimension differs from system dimension {d}"));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return invalid("box requires lo < hi in every coordinate");
                }
                match d {
                    1 => Ok(Shape::Interval { lo: lo[0], hi: hi[0] }),
                    2 => Ok(Shape::Polygon(vec![
                        [lo[0], lo[1]],
                        [hi[0], lo[1]],
                        [hi[0], hi[1]],
                        [lo[0], hi[1]],
                    ])),
                    _ => Err(crate::Error::Unsupported(
                        "boxes are supported in dimensions 1 and 2".into(),
                    )),
                }
            }
            Region::Ball { center, radius } => {
                if center.len() != d || !(*radius > 0.0) {
                    return invalid("ball needs a center of the system dimension and positive radius");
                }
                Ok(Shape::ball(DVector::from_column_slice(center), *radius))
            }
            Region::Hull => Ok(Shape::ball(hull.center.clone(), hull.radius)),
            Region::Polygon { vertices } => {
                if d != 2 {
                    return invalid("polygons are two-dimensional");
                }
                Shape::polygon(vertices.clone())
            }
            Region::Union { .. } => invalid("nested union must be flattened"),
        }
    }

    fn ball(center: Point, radius: f64) -> Shape {
        if center.len() == 1 {
            Shape::Interval {
                lo: center[0] - radius,
                hi: center[0] + radius,
            }
        } else {
            Shape::Ball { center, radius }
        }
    }

    /// Validates convexity and orients counter-clockwise.
    pub fn polygon(mut v: Vec<[f64; 2]>) -> Result<Shape> {
        if v.len() < 3 {
            return invalid("polygon needs at least 3 vertices");
        }
        let area = signed_area(&v);
        if area.abs() <= GEOM_SLACK {
            return invalid("degenerate polygon");
        }
        if area < 0.0 {
            v.reverse();
        }
        let n = v.len();
        for k in 0..n {
            if cross(v[k], v[(k + 1) % n], v[(k + 2) % n]) < -GEOM_SLACK {
                return invalid("polygon is not convex");
            }
        }
        Ok(Shape::Polygon(v))
    }

    /// Image under an affine map, when it is again representable.
    pub fn map(&self, a: &Affine) -> Option<Shape> {
        match self {
            Shape::Interval { lo, hi } => {
                let p = a.matrix[(0, 0)] * lo + a.offset[0];
                let q = a.matrix[(0, 0)] * hi + a.offset[0];
                Some(Shape::Interval {
                    lo: p.min(q),
                    hi: p.max(q),
                })
            }
            Shape::Polygon(v) => {
                let mapped = v
                    .iter()
                    .map(|p| {
                        let x = a.apply(&DVector::from_column_slice(p));
                        [x[0], x[1]]
                    })
                    .collect();
                Shape::polygon(mapped).ok()
            }
            Shape::Ball { center, radius } => {
                let s = similarity_ratio(a)?;
                Some(Shape::Ball {
                    center: a.apply(center),
                    radius: radius * s,
                })
            }
        }
    }

    pub fn contains_open(&self, x: &Point) -> bool {
        match self {
            Shape::Interval { lo, hi } => *lo < x[0] && x[0] < *hi,
            Shape::Polygon(v) => {
                let p = [x[0], x[1]];
                (0..v.len()).all(|k| cross(v[k], v[(k + 1) % v.len()], p) > 0.0)
            }
            Shape::Ball { center, radius } => (x - center).norm() < *radius,
        }
    }

    /// Closure containment `self ⊂ outer`, decided exactly up to slack.
    /// `None` when the pair of kinds has no exact test.
    pub fn within(&self, outer: &Shape) -> Option<bool> {
        use Shape::*;
        let s = GEOM_SLACK;
        match (self, outer) {
            (Interval { lo, hi }, Interval { lo: a, hi: b }) => Some(*lo >= a - s && *hi <= b + s),
            (Polygon(v), Polygon(w)) => Some(v.iter().all(|p| inside_closed(w, *p, s))),
            (Polygon(v), Ball { center, radius }) => Some(
                v.iter()
                    .all(|p| ((p[0] - center[0]).hypot(p[1] - center[1])) <= radius + s),
            ),
            (Ball { center, radius }, Ball { center: c, radius: r }) => {
                Some((center - c).norm() + radius <= r + s)
            }
            (Ball { center, radius }, Polygon(w)) => {
                let p = [center[0], center[1]];
                Some((0..w.len()).all(|k| {
                    edge_distance(w[k], w[(k + 1) % w.len()], p) >= radius - s
                }))
            }
            _ => None,
        }
    }

    /// Whether the open shapes are disjoint (touching boundaries allowed).
    pub fn disjoint(&self, other: &Shape) -> Option<bool> {
        use Shape::*;
        let s = GEOM_SLACK;
        match (self, other) {
            (Interval { lo, hi }, Interval { lo: a, hi: b }) => Some(*hi <= a + s || *b <= lo + s),
            (Polygon(v), Polygon(w)) => Some(separated(v, w, s) || separated(w, v, s)),
            (Ball { center, radius }, Ball { center: c, radius: r }) => {
                Some((center - c).norm() >= radius + r - s)
            }
            (Ball { center, radius }, Polygon(w)) | (Polygon(w), Ball { center, radius }) => {
                let p = [center[0], center[1]];
                Some(polygon_distance(w, p) >= radius - s)
            }
            _ => None,
        }
    }

    /// A point of the open shape, used as a falsification witness.
    pub fn interior_point(&self) -> Point {
        match self {
            Shape::Interval { lo, hi } => DVector::from_vec(vec![0.5 * (lo + hi)]),
            Shape::Polygon(v) => {
                let n = v.len() as f64;
                let cx = v.iter().map(|p| p[0]).sum::<f64>() / n;
                let cy = v.iter().map(|p| p[1]).sum::<f64>() / n;
                DVector::from_vec(vec![cx, cy])
            }
            Shape::Ball { center, .. } => center.clone(),
        }
    }

    /// Uniform-ish random interior sample.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            Shape::Interval { lo, hi } => DVector::from_vec(vec![rng.gen_range(*lo..*hi)]),
            Shape::Polygon(v) => {
                // random convex combination biased toward the centroid
                let mut w: Vec<f64> = v.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
                let x = v.iter().zip(&w).map(|(p, t)| p[0] * t).sum();
                let y = v.iter().zip(&w).map(|(p, t)| p[1] * t).sum();
                DVector::from_vec(vec![x, y])
            }
            Shape::Ball { center, radius } => loop {
                let d = center.len();
                let u = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
                if u.norm() < 1.0 {
                    break center + u * (*radius * 0.999);
                }
            },
        }
    }
}

/// `s` when `M^T M = s^2 I`.
fn similarity_ratio(a: &Affine) -> Option<f64> {
    let g = a.matrix.transpose() * &a.matrix;
    let d = g.nrows();
    let s2 = g.trace() / d as f64;
    let off = (&g - nalgebra::DMatrix::identity(d, d) * s2).abs().max();
    (off <= 1e-12).then(|| s2.sqrt())
}

fn cross(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|k| v[k][0] * v[(k + 1) % n][1] - v[(k + 1) % n][0] * v[k][1])
        .sum::<f64>()
        / 2.0
}

/// Signed distance of `p` to the line through an edge, positive inside.
fn edge_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    cross(a, b, p) / (b[0] - a[0]).hypot(b[1] - a[1])
}

fn inside_closed(w: &[[f64; 2]], p: [f64; 2], s: f64) -> bool {
    (0..w.len()).all(|k| edge_distance(w[k], w[(k + 1) % w.len()], p) >= -s)
}

/// Some edge of `v` has all of `w` on its outer side.
fn separated(v: &[[f64; 2]], w: &[[f64; 2]], s: f64) -> bool {
    (0..v.len()).any(|k| {
        let (a, b) = (v[k], v[(k + 1) % v.len()]);
        w.iter().all(|p| edge_distance(a, b, *p) <= s)
    })
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn polygon_distance(w: &[[f64; 2]], p: [f64; 2]) -> f64 {
    if inside_closed(w, p, 0.0) {
        return 0.0;
    }
    (0..w.len())
        .map(|k| segment_distance(w[k], w[(k + 1) % w.len()], p))
        .fold(f64::INFINITY, f64::min)
}
