//! Built-in scenarios used by tests, the acceptance suite and the CLI.

use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::geometry::{SpaceHandle, SpacePoint};
use crate::iteration::Scenario;
use crate::operators::MapHandle;
use crate::rates::NatRate;
use crate::schedule::{ModuliBundle, ScalarSchedule};

fn with_corollary_moduli(
    space: SpaceHandle,
    map: MapHandle,
    u: SpacePoint,
    x0: SpacePoint,
    lambda: f64,
    p: SpacePoint,
) -> Result<Scenario> {
    let k = Scenario::default_k(&space, &u, &x0, Some(&p))?.expect("fixed point supplied");
    let bundle = ModuliBundle::corollary(k, lambda)?;
    Scenario::new(space, map, u, x0, ScalarSchedule::constant(lambda)?, ScalarSchedule::HarmonicComplement, bundle, Some(p))
}

/// Quarter turn about the origin of the plane, `u = x0 = (1,0)`, K = 1,
/// constant λ and `β_n = 1 - 1/(n+1)`.
pub fn rotation_corollary(lambda: f64) -> Result<Scenario> {
    let u = SpacePoint::vector([1.0, 0.0]);
    with_corollary_moduli(
        SpaceHandle::euclidean(2)?,
        MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]),
        u.clone(),
        u,
        lambda,
        SpacePoint::vector([0.0, 0.0]),
    )
}

/// Projection onto the closed unit disc, started outside it.
pub fn projection_ball() -> Result<Scenario> {
    with_corollary_moduli(
        SpaceHandle::euclidean(2)?,
        MapHandle::ball_projection(vec![0.0, 0.0], 1.0),
        SpacePoint::vector([3.0, 1.0]),
        SpacePoint::vector([-2.0, 4.0]),
        0.5,
        SpacePoint::vector([0.0, 0.0]),
    )
}

/// Cyclic permutation of the three rays of a spider tree.
pub fn spider_permutation() -> Result<Scenario> {
    with_corollary_moduli(
        SpaceHandle::spider_tree(3)?,
        MapHandle::ray_permutation(vec![1, 2, 0]),
        SpacePoint::tree(0, 2.0)?,
        SpacePoint::tree(1, 3.0)?,
        0.5,
        SpacePoint::tree_origin(),
    )
}

/// Average of a quarter turn and the clamp to `[-1,1]²` in the max-norm plane.
pub fn maxnorm_combination() -> Result<Scenario> {
    let space = SpaceHandle::maxnorm_plane();
    let map = MapHandle::convex_combination(
        MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]),
        MapHandle::box_clamp(vec![-1.0, -1.0], vec![1.0, 1.0]),
        0.5,
    )
    .adapted_to(&space);
    with_corollary_moduli(space, map, SpacePoint::plane(2.0, 1.0), SpacePoint::plane(-3.0, 0.5), 0.5, SpacePoint::plane(0.0, 0.0))
}

/// `β ≡ 0`: every anchor point is `u`, so the orbit freezes after one step.
/// The moduli are `σ₁(n) = max(n-1, 0)`, `σ₃ = σ₄ = 0`.
pub fn zero_beta() -> Result<Scenario> {
    let space = SpaceHandle::euclidean(2)?;
    let u = SpacePoint::vector([1.0, 0.0]);
    let x0 = SpacePoint::vector([0.0, 1.0]);
    let p = SpacePoint::vector([0.0, 0.0]);
    let k = Scenario::default_k(&space, &u, &x0, Some(&p))?.expect("fixed point supplied");
    let bundle = ModuliBundle {
        sigma1: Some(NatRate::Monus(1)),
        sigma2: None,
        sigma3: NatRate::Constant(0),
        sigma4: NatRate::Constant(0),
        sigma5: None,
        lambda_floor: Some((2, 0)),
        psi0: None,
        k_bound: k,
    };
    Scenario::new(
        space,
        MapHandle::rotation(FRAC_PI_2, vec![0.0, 0.0]),
        u,
        x0,
        ScalarSchedule::constant(0.5)?,
        ScalarSchedule::constant(0.0)?,
        bundle,
        Some(p),
    )
}

/// The four scenarios covering each space and map family.
pub fn standard_suite() -> Result<Vec<(&'static str, Scenario)>> {
    Ok(vec![
        ("rotation/euclidean", rotation_corollary(0.5)?),
        ("projection/euclidean", projection_ball()?),
        ("permutation/spider-tree", spider_permutation()?),
        ("combination/maxnorm", maxnorm_combination()?),
    ])
}

/// Looks up a built-in scenario by name.
pub fn by_name(name: &str) -> Option<Result<Scenario>> {
    Some(match name {
        "rotation" => rotation_corollary(0.5),
        "projection" => projection_ball(),
        "spider" => spider_permutation(),
        "maxnorm" => maxnorm_combination(),
        "zero-beta" => zero_beta(),
        _ => return None,
    })
}

pub const NAMES: [&str; 5] = ["rotation", "projection", "spider", "maxnorm", "zero-beta"];
