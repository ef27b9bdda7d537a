//! Nonexpansive self-maps of the built-in spaces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{raw_combine, raw_distance, SpaceHandle, SpaceKind, SpacePoint};
use crate::report::{MarginTracker, ValidationReport};

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Identity,
    /// Rotation of the first two coordinates about `center`. On the max-norm
    /// plane only quarter turns are isometries and other angles are rejected.
    Rotation { angle: f64, center: Vec<f64> },
    /// Metric projection onto the closed Euclidean ball.
    BallProjection { center: Vec<f64>, radius: f64 },
    /// Metric projection onto `{x : <normal, x> <= offset}`.
    HalfspaceProjection { normal: Vec<f64>, offset: f64 },
    /// Coordinatewise clamp onto the box `[lo, hi]`; nonexpansive for every
    /// ℓp norm, so valid on both normed kinds.
    BoxClamp { lo: Vec<f64>, hi: Vec<f64> },
    /// Radius-preserving relabelling of spider rays: ray `i` goes to `perm[i]`.
    RayPermutation(Vec<usize>),
    /// `x ↦ (1-w) A x ⊕ w B x`.
    ConvexCombination { first: Box<MapHandle>, second: Box<MapHandle>, weight: f64 },
    /// `x ↦ outer(inner(x))`.
    Composition { outer: Box<MapHandle>, inner: Box<MapHandle> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapHandle {
    pub kind: MapKind,
    pub known_fixed_point: Option<SpacePoint>,
}

fn quarter_turns(angle: f64) -> Option<i64> {
    let q = angle / std::f64::consts::FRAC_PI_2;
    let r = q.round();
    ((q - r).abs() < 1e-12).then(|| (r as i64).rem_euclid(4))
}

impl MapHandle {
    pub fn identity() -> Self {
        MapHandle { kind: MapKind::Identity, known_fixed_point: None }
    }

    pub fn rotation(angle: f64, center: Vec<f64>) -> Self {
        let fp = Some(SpacePoint::Vector(center.clone()));
        MapHandle { kind: MapKind::Rotation { angle, center }, known_fixed_point: fp }
    }

    pub fn ball_projection(center: Vec<f64>, radius: f64) -> Self {
        let fp = Some(SpacePoint::Vector(center.clone()));
        MapHandle { kind: MapKind::BallProjection { center, radius }, known_fixed_point: fp }
    }

    pub fn halfspace_projection(normal: Vec<f64>, offset: f64) -> Self {
        let nn: f64 = normal.iter().map(|c| c * c).sum();
        let fp = (nn > 0.0).then(|| SpacePoint::Vector(normal.iter().map(|c| c * offset / nn).collect()));
        MapHandle { kind: MapKind::HalfspaceProjection { normal, offset }, known_fixed_point: fp }
    }

    pub fn box_clamp(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let fp = Some(SpacePoint::Vector(mid));
        MapHandle { kind: MapKind::BoxClamp { lo, hi }, known_fixed_point: fp }
    }

    pub fn ray_permutation(perm: Vec<usize>) -> Self {
        MapHandle { kind: MapKind::RayPermutation(perm), known_fixed_point: Some(SpacePoint::tree_origin()) }
    }

    /// Keeps a fixed point only when both parts are known to share it.
    pub fn convex_combination(first: MapHandle, second: MapHandle, weight: f64) -> Self {
        let fp = shared_fixed_point(&first, &second);
        MapHandle {
            kind: MapKind::ConvexCombination { first: Box::new(first), second: Box::new(second), weight },
            known_fixed_point: fp,
        }
    }

    pub fn composition(outer: MapHandle, inner: MapHandle) -> Self {
        let fp = shared_fixed_point(&outer, &inner);
        MapHandle { kind: MapKind::Composition { outer: Box::new(outer), inner: Box::new(inner) }, known_fixed_point: fp }
    }

    pub fn with_fixed_point(mut self, p: SpacePoint) -> Self {
        self.known_fixed_point = Some(p);
        self
    }

    /// Checks that the descriptor is meaningful on `space`.
    pub fn check_compatible(&self, space: &SpaceHandle) -> Result<()> {
        let kind = space.kind();
        let linear_dim = match kind {
            SpaceKind::Euclidean { dim } => Some(dim),
            SpaceKind::MaxNormPlane => Some(2),
            SpaceKind::SpiderTree { .. } => None,
        };
        let need_dim = |len: usize, what: &str| -> Result<()> {
            match linear_dim {
                Some(d) if d == len => Ok(()),
                Some(d) => Err(Error::input(format!("{what} has {len} coordinates, space has {d}"))),
                None => Err(Error::input(format!("{what} needs a normed space"))),
            }
        };
        let euclidean_only = |what: &str| -> Result<()> {
            if matches!(kind, SpaceKind::Euclidean { .. }) {
                Ok(())
            } else {
                Err(Error::input(format!("{what} is only defined on euclidean spaces")))
            }
        };
        match &self.kind {
            MapKind::Identity => {}
            MapKind::Rotation { angle, center } => {
                need_dim(center.len(), "rotation center")?;
                if center.len() < 2 {
                    return Err(Error::input("rotation needs dimension >= 2"));
                }
                if kind == SpaceKind::MaxNormPlane && quarter_turns(*angle).is_none() {
                    return Err(Error::input("only quarter-turn rotations are nonexpansive in the max-norm"));
                }
                if !angle.is_finite() {
                    return Err(Error::input("rotation angle must be finite"));
                }
            }
            MapKind::BallProjection { center, radius } => {
                euclidean_only("ball projection")?;
                need_dim(center.len(), "ball center")?;
                if !(*radius >= 0.0) {
                    return Err(Error::input("ball radius must be >= 0"));
                }
            }
            MapKind::HalfspaceProjection { normal, offset } => {
                euclidean_only("halfspace projection")?;
                need_dim(normal.len(), "halfspace normal")?;
                if normal.iter().all(|c| *c == 0.0) || !offset.is_finite() {
                    return Err(Error::input("halfspace needs a nonzero normal and finite offset"));
                }
            }
            MapKind::BoxClamp { lo, hi } => {
                need_dim(lo.len(), "box lower corner")?;
                need_dim(hi.len(), "box upper corner")?;
                if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                    return Err(Error::input("box needs lo <= hi coordinatewise"));
                }
            }
            MapKind::RayPermutation(perm) => {
                let SpaceKind::SpiderTree { rays } = kind else {
                    return Err(Error::input("ray permutation needs a spider tree"));
                };
                let mut seen = vec![false; rays];
                if perm.len() != rays {
                    return Err(Error::input(format!("permutation has {} entries, tree has {rays} rays", perm.len())));
                }
                for &p in perm {
                    if p >= rays || seen[p] {
                        return Err(Error::input("ray map is not a permutation"));
                    }
                    seen[p] = true;
                }
            }
            MapKind::ConvexCombination { first, second, weight } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::input(format!("combination weight must lie in [0,1], got {weight}")));
                }
                first.check_compatible(space)?;
                second.check_compatible(space)?;
            }
            MapKind::Composition { outer, inner } => {
                outer.check_compatible(space)?;
                inner.check_compatible(space)?;
            }
        }
        if let Some(p) = &self.known_fixed_point {
            space.check_point(&adapt_point(space, p.clone()))?;
        }
        Ok(())
    }

    pub fn apply(&self, space: &SpaceHandle, x: &SpacePoint) -> Result<SpacePoint> {
        self.check_compatible(space)?;
        space.check_point(x)?;
        Ok(self.apply_unchecked(x))
    }

    /// Application without the compatibility checks; callers must have run
    /// [`MapHandle::check_compatible`] and validated `x`.
    pub(crate) fn apply_unchecked(&self, x: &SpacePoint) -> SpacePoint {
        match (&self.kind, x) {
            (MapKind::Identity, _) => x.clone(),
            (MapKind::Rotation { angle, center }, _) => {
                let mut v = x.coords().map(<[f64]>::to_vec).unwrap_or_default();
                let (dx, dy) = (v[0] - center[0], v[1] - center[1]);
                let (rx, ry) = match quarter_turns(*angle) {
                    Some(0) => (dx, dy),
                    Some(1) => (-dy, dx),
                    Some(2) => (-dx, -dy),
                    Some(3) => (dy, -dx),
                    _ => {
                        let (s, c) = angle.sin_cos();
                        (c * dx - s * dy, s * dx + c * dy)
                    }
                };
                v[0] = center[0] + rx;
                v[1] = center[1] + ry;
                rewrap(x, v)
            }
            (MapKind::BallProjection { center, radius }, SpacePoint::Vector(v)) => {
                let diff: Vec<f64> = v.iter().zip(center).map(|(a, c)| a - c).collect();
                let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm <= *radius {
                    x.clone()
                } else {
                    let scale = radius / norm;
                    SpacePoint::Vector(center.iter().zip(&diff).map(|(c, d)| c + scale * d).collect())
                }
            }
            (MapKind::HalfspaceProjection { normal, offset }, SpacePoint::Vector(v)) => {
                let dot: f64 = v.iter().zip(normal).map(|(a, n)| a * n).sum();
                if dot <= *offset {
                    x.clone()
                } else {
                    let nn: f64 = normal.iter().map(|n| n * n).sum();
                    let t = (dot - offset) / nn;
                    SpacePoint::Vector(v.iter().zip(normal).map(|(a, n)| a - t * n).collect())
                }
            }
            (MapKind::BoxClamp { lo, hi }, _) => {
                let v: Vec<f64> = x
                    .coords()
                    .unwrap_or_default()
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(c, (a, b))| c.clamp(*a, *b))
                    .collect();
                rewrap(x, v)
            }
            (MapKind::RayPermutation(perm), SpacePoint::Tree { ray, radius }) => {
                if *radius == 0.0 {
                    x.clone()
                } else {
                    SpacePoint::Tree { ray: perm[*ray], radius: *radius }
                }
            }
            (MapKind::ConvexCombination { first, second, weight }, _) => {
                raw_combine(&first.apply_unchecked(x), &second.apply_unchecked(x), *weight)
            }
            (MapKind::Composition { outer, inner }, _) => outer.apply_unchecked(&inner.apply_unchecked(x)),
            // Unreachable after check_compatible.
            _ => x.clone(),
        }
    }
}

fn rewrap(like: &SpacePoint, v: Vec<f64>) -> SpacePoint {
    match like {
        SpacePoint::Plane(_) => SpacePoint::Plane([v[0], v[1]]),
        _ => SpacePoint::Vector(v),
    }
}

fn shared_fixed_point(a: &MapHandle, b: &MapHandle) -> Option<SpacePoint> {
    match (&a.known_fixed_point, &b.known_fixed_point) {
        (Some(p), Some(q)) if same_kind(p, q) && raw_distance(p, q) <= 1e-12 => Some(p.clone()),
        (Some(p), None) if b.kind == MapKind::Identity => Some(p.clone()),
        (None, Some(q)) if a.kind == MapKind::Identity => Some(q.clone()),
        _ => None,
    }
}

fn same_kind(p: &SpacePoint, q: &SpacePoint) -> bool {
    std::mem::discriminant(p) == std::mem::discriminant(q)
}

/// Converts vector-valued fixed points to plane points when the space is the
/// max-norm plane. Constructors cannot know the target space.
pub fn adapt_point(space: &SpaceHandle, p: SpacePoint) -> SpacePoint {
    match (space.kind(), p) {
        (SpaceKind::MaxNormPlane, SpacePoint::Vector(v)) if v.len() == 2 => SpacePoint::Plane([v[0], v[1]]),
        (_, p) => p,
    }
}

impl MapHandle {
    /// Rewrites every stored fixed point into the representation used by `space`.
    pub fn adapted_to(mut self, space: &SpaceHandle) -> Self {
        self.known_fixed_point = self.known_fixed_point.map(|p| adapt_point(space, p));
        self.kind = match self.kind {
            MapKind::ConvexCombination { first, second, weight } => MapKind::ConvexCombination {
                first: Box::new(first.adapted_to(space)),
                second: Box::new(second.adapted_to(space)),
                weight,
            },
            MapKind::Composition { outer, inner } => MapKind::Composition {
                outer: Box::new(outer.adapted_to(space)),
                inner: Box::new(inner.adapted_to(space)),
            },
            k => k,
        };
        self
    }
}

/// Samples pairs and reports `max d(Tx,Ty) - d(x,y)`, plus `d(Tp, p)` for the
/// known fixed point when there is one.
pub fn check_nonexpansive(
    space: &SpaceHandle,
    map: &MapHandle,
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(Error::input("sample_count must be >= 1"));
    }
    map.check_compatible(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = MarginTracker::new();
    let rel = space.tolerance().rel;
    for i in 0..sample_count {
        let x = space.sample_point(&mut rng, 5.0);
        let y = if i % 20 == 0 { x.clone() } else { space.sample_point(&mut rng, 5.0) };
        let lhs = raw_distance(&map.apply_unchecked(&x), &map.apply_unchecked(&y));
        let rhs = raw_distance(&x, &y);
        tracker.observe(lhs, rhs, tol + rel * rhs, Some(i as u128), None);
    }
    let mut report = ValidationReport::new();
    report.push(tracker.finish("nonexpansive", "map"));
    if let Some(p) = &map.known_fixed_point {
        let mut fp = MarginTracker::new();
        fp.observe(raw_distance(&map.apply_unchecked(p), p), 0.0, tol, None, None);
        report.push(fp.finish("known fixed point", "map"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn e2() -> SpaceHandle {
        SpaceHandle::euclidean(2).unwrap()
    }

    #[test]
    fn quarter_rotation() {
        let t = MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]);
        assert_eq!(t.apply(&e2(), &SpacePoint::vector([1.0, 0.0])).unwrap(), SpacePoint::vector([0.0, 1.0]));
    }

    #[test]
    fn generic_rotation_about_center() {
        let t = MapHandle::rotation(0.3, vec![1.0, -1.0]);
        let s = e2();
        let x = SpacePoint::vector([2.0, 0.5]);
        let tx = t.apply(&s, &x).unwrap();
        let c = SpacePoint::vector([1.0, -1.0]);
        assert!((s.distance(&tx, &c).unwrap() - s.distance(&x, &c).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn ball_projection_is_radial() {
        let t = MapHandle::ball_projection(vec![0.0, 0.0], 1.0);
        let p = t.apply(&e2(), &SpacePoint::vector([3.0, 4.0])).unwrap();
        match p {
            SpacePoint::Vector(v) => {
                assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        let inside = SpacePoint::vector([0.1, 0.2]);
        assert_eq!(t.apply(&e2(), &inside).unwrap(), inside);
    }

    #[test]
    fn halfspace_projection() {
        let t = MapHandle::halfspace_projection(vec![0.0, 2.0], 2.0);
        let p = t.apply(&e2(), &SpacePoint::vector([5.0, 3.0])).unwrap();
        assert_eq!(p, SpacePoint::vector([5.0, 1.0]));
        assert_eq!(t.known_fixed_point, Some(SpacePoint::vector([0.0, 1.0])));
    }

    #[test]
    fn ray_permutation_cycles() {
        let s = SpaceHandle::spider_tree(3).unwrap();
        let t = MapHandle::ray_permutation(vec![1, 2, 0]);
        let p = t.apply(&s, &SpacePoint::tree(0, 2.5).unwrap()).unwrap();
        assert_eq!(p, SpacePoint::tree(1, 2.5).unwrap());
        assert!(MapHandle::ray_permutation(vec![0, 0, 1]).apply(&s, &p).is_err());
    }

    #[test]
    fn incompatible_maps_rejected() {
        let tree = SpaceHandle::spider_tree(3).unwrap();
        let x = SpacePoint::tree(0, 1.0).unwrap();
        assert!(MapHandle::rotation(1.0, vec![0.0, 0.0]).apply(&tree, &x).is_err());
        let plane = SpaceHandle::maxnorm_plane();
        assert!(MapHandle::rotation(1.0, vec![0.0, 0.0]).check_compatible(&plane).is_err());
        assert!(MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]).check_compatible(&plane).is_ok());
        assert!(MapHandle::ball_projection(vec![0.0, 0.0], 1.0).check_compatible(&plane).is_err());
    }

    #[test]
    fn convex_combination_matches_combine() {
        let s = e2();
        let a = MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]);
        let b = MapHandle::ball_projection(vec![0.0, 0.0], 0.5);
        let t = MapHandle::convex_combination(a.clone(), b.clone(), 0.3);
        let x = SpacePoint::vector([1.0, 2.0]);
        let expect = s.combine(&a.apply(&s, &x).unwrap(), &b.apply(&s, &x).unwrap(), 0.3).unwrap();
        assert_eq!(t.apply(&s, &x).unwrap(), expect);
        assert_eq!(t.known_fixed_point, Some(SpacePoint::vector([0.0, 0.0])));
    }

    #[test]
    fn differing_fixed_points_are_dropped() {
        let a = MapHandle::ball_projection(vec![0.0, 0.0], 0.5);
        let b = MapHandle::ball_projection(vec![5.0, 0.0], 0.5);
        assert_eq!(MapHandle::composition(a, b).known_fixed_point, None);
    }

    #[test]
    fn builtin_descriptors_are_nonexpansive() {
        let s = e2();
        let rot = MapHandle::rotation(0.7, vec![0.5, -0.5]);
        let r = check_nonexpansive(&s, &rot, 2000, 1, 1e-12).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        let plane = SpaceHandle::maxnorm_plane();
        let clamp = MapHandle::box_clamp(vec![-1.0, -1.0], vec![1.0, 1.0]).adapted_to(&plane);
        let quarter = MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]).adapted_to(&plane);
        let mix = MapHandle::convex_combination(quarter, clamp, 0.5).adapted_to(&plane);
        let r = check_nonexpansive(&plane, &mix, 2000, 2, 1e-9).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        let comp = MapHandle::composition(MapHandle::ball_projection(vec![0.0, 0.0], 2.0), rot);
        assert!(check_nonexpansive(&s, &comp, 2000, 3, 1e-9).unwrap().passed());
    }
}
