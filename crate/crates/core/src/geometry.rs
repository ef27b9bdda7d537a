//! W-hyperbolic spaces: a metric `d` together with a convexity mapping
//! `W(x, y, λ)`, written `(1-λ)x ⊕ λy`.
//!
//! Three concrete instances are provided:
//!
//! * `Euclidean(dim)`: ℝ^dim with the 2-norm and linear interpolation;
//! * `SpiderTree(rays)`: finitely many half-lines glued at a common origin,
//!   an ℝ-tree (hence CAT(0)) with closed-form geodesics;
//! * `MaxNormPlane`: ℝ² with the max-norm, a normed but not uniquely
//!   geodesic space.
//!
//! Points are compared through the metric with a tolerance, never bitwise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::report::{MarginTracker, ValidationReport};

#[derive(Debug, Clone, PartialEq)]
pub enum SpacePoint {
    /// Euclidean coordinates.
    Vector(Vec<f64>),
    /// A point on a spider tree: `radius` along ray `ray`.
    Tree { ray: usize, radius: f64 },
    /// A vector of the max-norm plane.
    Plane([f64; 2]),
}

impl SpacePoint {
    /// Builds a tree point, mapping radius 0 to the canonical origin (ray 0).
    pub fn tree(ray: usize, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::input(format!("tree radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self::tree_unchecked(ray, radius))
    }

    fn tree_unchecked(ray: usize, radius: f64) -> Self {
        if radius <= 0.0 {
            SpacePoint::Tree { ray: 0, radius: 0.0 }
        } else {
            SpacePoint::Tree { ray, radius }
        }
    }

    pub fn tree_origin() -> Self {
        SpacePoint::Tree { ray: 0, radius: 0.0 }
    }

    pub fn vector(coords: impl Into<Vec<f64>>) -> Self {
        SpacePoint::Vector(coords.into())
    }

    pub fn plane(x: f64, y: f64) -> Self {
        SpacePoint::Plane([x, y])
    }

    /// Coordinates for the linear kinds; `None` for tree points.
    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            SpacePoint::Vector(v) => Some(v),
            SpacePoint::Plane(p) => Some(p),
            SpacePoint::Tree { .. } => None,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            SpacePoint::Vector(_) => "euclidean vector",
            SpacePoint::Tree { .. } => "tree point",
            SpacePoint::Plane(_) => "plane vector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Euclidean { dim: usize },
    SpiderTree { rays: usize },
    MaxNormPlane,
}

/// Slack used for floating-point comparisons: `abs + rel * scale`, where
/// `scale` is the magnitude of the quantities being compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-9, rel: 1e-12 }
    }
}

impl Tolerance {
    pub fn slack(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceHandle {
    kind: SpaceKind,
    tolerance: Tolerance,
}

impl SpaceHandle {
    pub fn new(kind: SpaceKind) -> Result<Self> {
        match kind {
            SpaceKind::Euclidean { dim: 0 } => Err(Error::input("euclidean dimension must be >= 1")),
            SpaceKind::SpiderTree { rays: 0 } => Err(Error::input("spider tree needs at least one ray")),
            _ => Ok(SpaceHandle { kind, tolerance: Tolerance::default() }),
        }
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclidean { dim })
    }

    pub fn spider_tree(rays: usize) -> Result<Self> {
        Self::new(SpaceKind::SpiderTree { rays })
    }

    pub fn maxnorm_plane() -> Self {
        SpaceHandle { kind: SpaceKind::MaxNormPlane, tolerance: Tolerance::default() }
    }

    pub fn with_tolerance(mut self, tolerance: Tolerance) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tolerance
    }

    /// True for the normed kinds, where `W` is linear interpolation.
    pub fn is_normed(&self) -> bool {
        !matches!(self.kind, SpaceKind::SpiderTree { .. })
    }

    /// The zero vector of a normed space, or the origin of a spider tree.
    pub fn origin(&self) -> SpacePoint {
        match self.kind {
            SpaceKind::Euclidean { dim } => SpacePoint::Vector(vec![0.0; dim]),
            SpaceKind::SpiderTree { .. } => SpacePoint::tree_origin(),
            SpaceKind::MaxNormPlane => SpacePoint::Plane([0.0; 2]),
        }
    }

    /// Checks that `p` is a point of this space.
    pub fn check_point(&self, p: &SpacePoint) -> Result<()> {
        match (self.kind, p) {
            (SpaceKind::Euclidean { dim }, SpacePoint::Vector(v)) => {
                if v.len() != dim {
                    return Err(Error::input(format!("expected {dim} coordinates, got {}", v.len())));
                }
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::input("non-finite coordinate"));
                }
                Ok(())
            }
            (SpaceKind::SpiderTree { rays }, SpacePoint::Tree { ray, radius }) => {
                if *ray >= rays {
                    return Err(Error::input(format!("ray index {ray} out of range (tree has {rays} rays)")));
                }
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return Err(Error::input(format!("tree radius must be finite and >= 0, got {radius}")));
                }
                Ok(())
            }
            (SpaceKind::MaxNormPlane, SpacePoint::Plane(v)) => {
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::input("non-finite coordinate"));
                }
                Ok(())
            }
            (kind, p) => Err(Error::input(format!("a {} is not a point of {kind:?}", p.kind_name()))),
        }
    }

    pub fn distance(&self, p: &SpacePoint, q: &SpacePoint) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(raw_distance(p, q))
    }

    /// `W(x, y, λ)`: the point at parameter λ on the geodesic from `x` to `y`.
    pub fn combine(&self, x: &SpacePoint, y: &SpacePoint, lambda: f64) -> Result<SpacePoint> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::input(format!("combination parameter must lie in [0,1], got {lambda}")));
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(raw_combine(x, y, lambda))
    }

    /// Points are equal when their distance is within the tolerance.
    pub fn approx_eq(&self, p: &SpacePoint, q: &SpacePoint) -> Result<bool> {
        let d = self.distance(p, q)?;
        Ok(d <= self.tolerance.slack(norm_scale(p) + norm_scale(q)))
    }

    /// Draws a random point with coordinates (or radius) of order `spread`.
    ///
    /// Tree samples hit the origin and shared rays with positive probability
    /// so degenerate geodesics are exercised.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> SpacePoint {
        match self.kind {
            SpaceKind::Euclidean { dim } => {
                SpacePoint::Vector((0..dim).map(|_| rng.gen_range(-spread..=spread)).collect())
            }
            SpaceKind::SpiderTree { rays } => {
                if rng.gen_bool(0.05) {
                    return SpacePoint::tree_origin();
                }
                let ray = rng.gen_range(0..rays);
                SpacePoint::tree_unchecked(ray, rng.gen_range(0.0..=spread))
            }
            SpaceKind::MaxNormPlane => {
                SpacePoint::Plane([rng.gen_range(-spread..=spread), rng.gen_range(-spread..=spread)])
            }
        }
    }
}

fn norm_scale(p: &SpacePoint) -> f64 {
    match p {
        SpacePoint::Vector(v) => v.iter().map(|c| c.abs()).fold(0.0, f64::max),
        SpacePoint::Plane(v) => v[0].abs().max(v[1].abs()),
        SpacePoint::Tree { radius, .. } => *radius,
    }
}

fn on_common_ray(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 == b.0 || a.1 == 0.0 || b.1 == 0.0
}

/// Distance for points already known to belong to the same space.
pub(crate) fn raw_distance(p: &SpacePoint, q: &SpacePoint) -> f64 {
    match (p, q) {
        (SpacePoint::Vector(a), SpacePoint::Vector(b)) => {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        }
        (SpacePoint::Plane(a), SpacePoint::Plane(b)) => (a[0] - b[0]).abs().max((a[1] - b[1]).abs()),
        (SpacePoint::Tree { ray: i, radius: r }, SpacePoint::Tree { ray: j, radius: s }) => {
            if on_common_ray((*i, *r), (*j, *s)) {
                (r - s).abs()
            } else {
                r + s
            }
        }
        _ => f64::NAN,
    }
}

pub(crate) fn raw_combine(x: &SpacePoint, y: &SpacePoint, lambda: f64) -> SpacePoint {
    if lambda == 0.0 {
        return x.clone();
    }
    if lambda == 1.0 {
        return y.clone();
    }
    match (x, y) {
        (SpacePoint::Vector(a), SpacePoint::Vector(b)) => {
            SpacePoint::Vector(a.iter().zip(b).map(|(p, q)| (1.0 - lambda) * p + lambda * q).collect())
        }
        (SpacePoint::Plane(a), SpacePoint::Plane(b)) => SpacePoint::Plane([
            (1.0 - lambda) * a[0] + lambda * b[0],
            (1.0 - lambda) * a[1] + lambda * b[1],
        ]),
        (SpacePoint::Tree { ray: i, radius: r }, SpacePoint::Tree { ray: j, radius: s }) => {
            let (i, r, j, s) = (*i, *r, *j, *s);
            if on_common_ray((i, r), (j, s)) {
                let ray = if r > 0.0 { i } else { j };
                SpacePoint::tree_unchecked(ray, ((1.0 - lambda) * r + lambda * s).max(0.0))
            } else {
                // Geodesic runs from x down to the origin, then out along y's ray.
                let travelled = lambda * (r + s);
                if travelled <= r {
                    SpacePoint::tree_unchecked(i, (r - travelled).max(0.0))
                } else {
                    SpacePoint::tree_unchecked(j, (travelled - r).max(0.0))
                }
            }
        }
        _ => x.clone(),
    }
}

fn sample_lambda<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..=1.0),
    }
}

/// Up to four sample points; with some probability later points repeat earlier
/// ones so the degenerate configurations are covered.
fn sample_tuple<R: Rng + ?Sized>(space: &SpaceHandle, rng: &mut R) -> [SpacePoint; 4] {
    let x = space.sample_point(rng, 5.0);
    let y = if rng.gen_bool(0.05) { x.clone() } else { space.sample_point(rng, 5.0) };
    let z = space.sample_point(rng, 5.0);
    let w = if rng.gen_bool(0.05) { z.clone() } else { space.sample_point(rng, 5.0) };
    [x, y, z, w]
}

/// Seeded sampler for W1-W4. One report entry per axiom, carrying the
/// largest raw violation `lhs - rhs` (absolute deviation for equalities).
pub fn check_axioms(space: &SpaceHandle, sample_count: usize, seed: u64, tol: f64) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(Error::input("sample_count must be >= 1"));
    }
    let rel = space.tolerance.rel;
    let slack = |scale: f64| tol + rel * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w1 = MarginTracker::new();
    let mut w2 = MarginTracker::new();
    let mut w3 = MarginTracker::new();
    let mut w4 = MarginTracker::new();
    let d = raw_distance;
    let mix = raw_combine;
    for i in 0..sample_count {
        let idx = Some(i as u128);
        let [x, y, z, w] = sample_tuple(space, &mut rng);
        let lam = sample_lambda(&mut rng);
        let lam2 = sample_lambda(&mut rng);

        let m = mix(&x, &y, lam);
        let rhs = (1.0 - lam) * d(&z, &x) + lam * d(&z, &y);
        w1.observe(d(&z, &m), rhs, slack(rhs), idx, None);

        let m2 = mix(&x, &y, lam2);
        let lhs = d(&m, &m2);
        let rhs = (lam - lam2).abs() * d(&x, &y);
        w2.observe((lhs - rhs).abs(), 0.0, slack(rhs), idx, None);

        let swapped = mix(&y, &x, 1.0 - lam);
        w3.observe(d(&m, &swapped), 0.0, slack(d(&x, &y)), idx, None);

        let a = mix(&x, &z, lam);
        let b = mix(&y, &w, lam);
        let rhs = (1.0 - lam) * d(&x, &y) + lam * d(&z, &w);
        w4.observe(d(&a, &b), rhs, slack(rhs), idx, None);
    }
    let mut report = ValidationReport::new();
    report.push(w1.finish("W1 convexity", "axiom"));
    report.push(w2.finish("W2 segment metric", "axiom"));
    report.push(w3.finish("W3 symmetry", "axiom"));
    report.push(w4.finish("W4 four-point", "axiom"));
    Ok(report)
}

/// Seeded sampler for the five consequences of W1-W4 about segments:
/// distances along a segment, endpoint values, degenerate segments, and the
/// two mixed-parameter inequalities.
pub fn check_segment_identities(
    space: &SpaceHandle,
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(Error::input("sample_count must be >= 1"));
    }
    let rel = space.tolerance.rel;
    let slack = |scale: f64| tol + rel * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut along = MarginTracker::new();
    let mut ends = MarginTracker::new();
    let mut degenerate = MarginTracker::new();
    let mut four = MarginTracker::new();
    let mut three = MarginTracker::new();
    let d = raw_distance;
    let mix = raw_combine;
    for i in 0..sample_count {
        let idx = Some(i as u128);
        let [x, y, z, w] = sample_tuple(space, &mut rng);
        let lam = sample_lambda(&mut rng);
        let lam2 = if rng.gen_bool(0.1) { lam } else { sample_lambda(&mut rng) };
        let dxy = d(&x, &y);

        let m = mix(&x, &y, lam);
        along.observe((d(&x, &m) - lam * dxy).abs(), 0.0, slack(dxy), idx, None);
        along.observe((d(&y, &m) - (1.0 - lam) * dxy).abs(), 0.0, slack(dxy), idx, None);

        ends.observe(d(&mix(&x, &y, 0.0), &x), 0.0, slack(dxy), idx, None);
        ends.observe(d(&mix(&x, &y, 1.0), &y), 0.0, slack(dxy), idx, None);

        degenerate.observe(d(&mix(&x, &x, lam), &x), 0.0, slack(norm_scale(&x)), idx, None);

        let a = mix(&x, &z, lam);
        let b = mix(&y, &w, lam2);
        let rhs = (1.0 - lam) * d(&x, &y) + lam * d(&z, &w) + (lam - lam2).abs() * d(&y, &w);
        four.observe(d(&a, &b), rhs, slack(rhs), idx, None);

        let c = mix(&x, &w, lam2);
        let rhs = lam * d(&z, &w) + (lam - lam2).abs() * d(&x, &w);
        three.observe(d(&a, &c), rhs, slack(rhs), idx, None);
    }
    let mut report = ValidationReport::new();
    report.push(along.finish("segment distances", "segment"));
    report.push(ends.finish("segment endpoints", "segment"));
    report.push(degenerate.finish("degenerate segment", "segment"));
    report.push(four.finish("mixed-parameter four-point", "segment"));
    report.push(three.finish("mixed-parameter three-point", "segment"));
    Ok(report)
}
