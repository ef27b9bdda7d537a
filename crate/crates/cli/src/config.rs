//! TOML scenario files.
//!
//! Parsing is two-stage: serde turns the text into [`ConfigFile`] (syntax and
//! type errors carry a line and column from `toml`), then [`ConfigFile::build`]
//! turns that into a validated scenario, naming the offending field on error.

use serde::Deserialize;
use tkm_core::rates::{self, Nat, NatRate};
use tkm_core::schedule::{numeric_sigma1, KBound, ModuliBundle, ScalarSchedule, TailRule};
use tkm_core::{MapHandle, Scenario, SpaceHandle, SpacePoint};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub space: SpaceSpec,
    pub map: MapSpec,
    pub points: PointsSpec,
    pub lambda: ScheduleSpec,
    pub beta: ScheduleSpec,
    #[serde(default)]
    pub moduli: ModuliSpec,
    #[serde(default)]
    pub run: RunSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Euclidean { dim: usize },
    SpiderTree { rays: usize },
    MaxnormPlane,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Rotation {
        /// Radians; alternatively `quarter_turns`.
        angle: Option<f64>,
        quarter_turns: Option<i64>,
        center: Vec<f64>,
    },
    BallProjection { center: Vec<f64>, radius: f64 },
    HalfspaceProjection { normal: Vec<f64>, offset: f64 },
    BoxClamp { lo: Vec<f64>, hi: Vec<f64> },
    RayPermutation { perm: Vec<usize> },
    ConvexCombination { weight: f64, first: Box<MapSpec>, second: Box<MapSpec> },
    Composition { outer: Box<MapSpec>, inner: Box<MapSpec> },
}

/// A coordinate list, or `{ ray, radius }` on a spider tree.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Coords(Vec<f64>),
    Tree { ray: usize, radius: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsSpec {
    pub u: PointSpec,
    pub x0: PointSpec,
    pub fixed_point: Option<PointSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { value: f64 },
    /// `1 - 1/(n+1)`.
    HarmonicComplement,
    /// Listed values; past the end the last value is held unless `tail` is set.
    Table { values: Vec<f64>, tail: Option<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateSpec {
    Identity,
    Constant { value: u64 },
    Affine { slope: u64, offset: u64 },
    /// `k ↦ max(k - value, 0)`.
    Monus { value: u64 },
    Table { values: Vec<u64> },
    /// Scan the partial sums of `1 - β_n` up to `horizon` (σ₁ only).
    Numeric { horizon: usize },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuliSpec {
    /// `"corollary"` for constant λ and harmonic β.
    pub preset: Option<String>,
    #[serde(rename = "K")]
    pub k: Option<u64>,
    pub sigma1: Option<RateSpec>,
    pub sigma2: Option<RateSpec>,
    pub sigma3: Option<RateSpec>,
    pub sigma4: Option<RateSpec>,
    pub sigma5: Option<RateSpec>,
    pub psi0: Option<RateSpec>,
    /// `[Λ, N_Λ]`.
    pub lambda_floor: Option<[u64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: usize,
    pub k_max: u64,
    pub slack: f64,
    pub stride: usize,
    pub seed: u64,
    pub samples: usize,
    pub point_stride: usize,
    pub checks: Checks,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            horizon: 10_000,
            k_max: 5,
            slack: 1e-9,
            stride: 97,
            seed: 0,
            samples: 2_000,
            point_stride: 1_000,
            checks: Checks::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub moduli: bool,
    pub axioms: bool,
    pub nonexpansive: bool,
    pub inequalities: bool,
    pub rates: bool,
    pub xu: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks { moduli: true, axioms: true, nonexpansive: true, inequalities: true, rates: true, xu: true }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub run: RunSpec,
    /// λ when the corollary closed forms apply.
    pub corollary_lambda: Option<f64>,
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load(path: &std::path::Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
        .map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?
        .build()
}

impl SpaceSpec {
    fn build(&self) -> Result<SpaceHandle, CliError> {
        let r = match *self {
            SpaceSpec::Euclidean { dim } => SpaceHandle::euclidean(dim),
            SpaceSpec::SpiderTree { rays } => SpaceHandle::spider_tree(rays),
            SpaceSpec::MaxnormPlane => Ok(SpaceHandle::maxnorm_plane()),
        };
        r.map_err(|e| field("space", e))
    }
}

impl MapSpec {
    fn build(&self, path: &str) -> Result<MapHandle, CliError> {
        Ok(match self {
            MapSpec::Identity => MapHandle::identity(),
            MapSpec::Rotation { angle, quarter_turns, center } => {
                let angle = match (angle, quarter_turns) {
                    (Some(a), None) => *a,
                    (None, Some(q)) => *q as f64 * std::f64::consts::FRAC_PI_2,
                    _ => return Err(field(path, "rotation needs exactly one of `angle`, `quarter_turns`")),
                };
                MapHandle::rotation(angle, center.clone())
            }
            MapSpec::BallProjection { center, radius } => MapHandle::ball_projection(center.clone(), *radius),
            MapSpec::HalfspaceProjection { normal, offset } => MapHandle::halfspace_projection(normal.clone(), *offset),
            MapSpec::BoxClamp { lo, hi } => MapHandle::box_clamp(lo.clone(), hi.clone()),
            MapSpec::RayPermutation { perm } => MapHandle::ray_permutation(perm.clone()),
            MapSpec::ConvexCombination { weight, first, second } => MapHandle::convex_combination(
                first.build(&format!("{path}.first"))?,
                second.build(&format!("{path}.second"))?,
                *weight,
            ),
            MapSpec::Composition { outer, inner } => {
                MapHandle::composition(outer.build(&format!("{path}.outer"))?, inner.build(&format!("{path}.inner"))?)
            }
        })
    }
}

impl PointSpec {
    fn build(&self, space: &SpaceHandle, path: &str) -> Result<SpacePoint, CliError> {
        let p = match self {
            PointSpec::Tree { ray, radius } => SpacePoint::tree(*ray, *radius).map_err(|e| field(path, e))?,
            PointSpec::Coords(c) => match space.kind() {
                tkm_core::SpaceKind::MaxNormPlane if c.len() == 2 => SpacePoint::plane(c[0], c[1]),
                tkm_core::SpaceKind::SpiderTree { .. } => {
                    return Err(field(path, "spider tree points are written { ray = .., radius = .. }"))
                }
                _ => SpacePoint::vector(c.clone()),
            },
        };
        space.check_point(&p).map_err(|e| field(path, e))?;
        Ok(p)
    }
}

impl ScheduleSpec {
    fn build(&self, path: &str) -> Result<ScalarSchedule, CliError> {
        let r = match self {
            ScheduleSpec::Constant { value } => ScalarSchedule::constant(*value),
            ScheduleSpec::HarmonicComplement => Ok(ScalarSchedule::HarmonicComplement),
            ScheduleSpec::Table { values, tail } => {
                let tail = tail.map_or(TailRule::HoldLast, TailRule::Value);
                ScalarSchedule::table(values.clone(), tail)
            }
        };
        r.map_err(|e| field(path, e))
    }
}

impl RateSpec {
    fn build(&self, path: &str, beta: &ScalarSchedule) -> Result<NatRate, CliError> {
        Ok(match self {
            RateSpec::Identity => NatRate::Identity,
            RateSpec::Constant { value } => NatRate::Constant(*value as Nat),
            RateSpec::Affine { slope, offset } => NatRate::affine(*slope as Nat, *offset as Nat),
            RateSpec::Monus { value } => NatRate::Monus(*value as Nat),
            RateSpec::Table { values } => NatRate::table(values.iter().map(|v| *v as Nat).collect(), None),
            RateSpec::Numeric { horizon } => {
                if path != "moduli.sigma1" {
                    return Err(field(path, "numeric rates are only available for sigma1"));
                }
                numeric_sigma1(beta, *horizon)
            }
        })
    }
}

impl ConfigFile {
    pub fn build(&self) -> Result<Loaded, CliError> {
        let space = self.space.build()?;
        let map = self.map.build("map")?.adapted_to(&space);
        let u = self.points.u.build(&space, "points.u")?;
        let x0 = self.points.x0.build(&space, "points.x0")?;
        let fixed_point = match &self.points.fixed_point {
            Some(p) => Some(p.build(&space, "points.fixed_point")?),
            None => None,
        };
        let lambda = self.lambda.build("lambda")?;
        let beta = self.beta.build("beta")?;
        let m = &self.moduli;

        let k_bound = match (m.k, &fixed_point) {
            (Some(k), _) => KBound::user(k as Nat).map_err(|e| field("moduli.K", e))?,
            (None, Some(p)) => Scenario::default_k(&space, &u, &x0, Some(p))
                .map_err(|e| field("points", e))?
                .expect("fixed point present"),
            (None, None) => {
                return Err(field("moduli.K", "K is required when no points.fixed_point is given"));
            }
        };

        let mut corollary_lambda = None;
        let mut bundle = match m.preset.as_deref() {
            Some("corollary") => {
                let ScalarSchedule::Constant(l) = lambda else {
                    return Err(field("moduli.preset", "the corollary preset needs a constant lambda"));
                };
                if !matches!(beta, ScalarSchedule::HarmonicComplement) {
                    return Err(field("moduli.preset", "the corollary preset needs beta kind = \"harmonic-complement\""));
                }
                corollary_lambda = Some(l);
                ModuliBundle::corollary(k_bound, l).map_err(|e| field("moduli.preset", e))?
            }
            Some(other) => return Err(field("moduli.preset", format!("unknown preset {other:?}"))),
            None => {
                let s3 = m.sigma3.as_ref().ok_or_else(|| field("moduli.sigma3", "required without a preset"))?;
                let s4 = m.sigma4.as_ref().ok_or_else(|| field("moduli.sigma4", "required without a preset"))?;
                ModuliBundle {
                    sigma1: None,
                    sigma2: None,
                    sigma3: s3.build("moduli.sigma3", &beta)?,
                    sigma4: s4.build("moduli.sigma4", &beta)?,
                    sigma5: None,
                    lambda_floor: None,
                    psi0: None,
                    k_bound,
                }
            }
        };
        let opt = |spec: &Option<RateSpec>, path: &str| -> Result<Option<NatRate>, CliError> {
            spec.as_ref().map(|s| s.build(path, &beta)).transpose()
        };
        if let Some(r) = opt(&m.sigma1, "moduli.sigma1")? {
            bundle.sigma1 = Some(r);
        }
        if let Some(r) = opt(&m.sigma2, "moduli.sigma2")? {
            bundle.sigma2 = Some(r);
        }
        if m.preset.is_some() {
            if let Some(r) = opt(&m.sigma3, "moduli.sigma3")? {
                bundle.sigma3 = r;
            }
            if let Some(r) = opt(&m.sigma4, "moduli.sigma4")? {
                bundle.sigma4 = r;
            }
        }
        if let Some(r) = opt(&m.sigma5, "moduli.sigma5")? {
            bundle.sigma5 = Some(r);
        }
        if let Some(r) = opt(&m.psi0, "moduli.psi0")? {
            bundle.psi0 = Some(r);
        }
        if let Some([big, n]) = m.lambda_floor {
            if big == 0 {
                return Err(field("moduli.lambda_floor", "Lambda must be >= 1"));
            }
            bundle.lambda_floor = Some((big as Nat, n as Nat));
        }

        let run = self.run.clone();
        if run.horizon == 0 {
            return Err(field("run.horizon", "must be >= 1"));
        }
        if !(run.slack >= 0.0) {
            return Err(field("run.slack", "must be >= 0"));
        }
        let scenario = Scenario::new(space, map, u, x0, lambda, beta, bundle, fixed_point).map_err(|e| field("scenario", e))?;
        Ok(Loaded { scenario, run, corollary_lambda })
    }
}

/// `Λ = ⌈1/λ⌉` for a corollary configuration.
pub fn corollary_lambda_bound(lambda: f64) -> Result<Nat, CliError> {
    rates::lambda_bound_for(lambda).map_err(CliError::Core)
}
