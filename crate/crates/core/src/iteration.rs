//! The Tikhonov-Mann iteration and its recorded trace.

use crate::error::{Error, Result};
use crate::geometry::{raw_combine, raw_distance, SpaceHandle, SpacePoint};
use crate::operators::MapHandle;
use crate::report::{MarginTracker, ValidationReport};
use crate::schedule::{KBound, ModuliBundle, ScalarSchedule};

/// Everything the iteration and its bounds depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub space: SpaceHandle,
    pub map: MapHandle,
    /// Anchor of the Tikhonov term.
    pub u: SpacePoint,
    pub x0: SpacePoint,
    pub lambda: ScalarSchedule,
    pub beta: ScalarSchedule,
    pub bundle: ModuliBundle,
    pub fixed_point: Option<SpacePoint>,
}

impl Scenario {
    /// Validates the pieces against each other: points in the space, map
    /// compatible, schedules in [0,1], `d(Tp, p) <= tol` and `K >= M`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space: SpaceHandle,
        map: MapHandle,
        u: SpacePoint,
        x0: SpacePoint,
        lambda: ScalarSchedule,
        beta: ScalarSchedule,
        bundle: ModuliBundle,
        fixed_point: Option<SpacePoint>,
    ) -> Result<Self> {
        space.check_point(&u)?;
        space.check_point(&x0)?;
        map.check_compatible(&space)?;
        lambda.validate()?;
        beta.validate()?;
        let s = Scenario { space, map, u, x0, lambda, beta, bundle, fixed_point };
        if let Some(p) = &s.fixed_point {
            s.space.check_point(p)?;
            let moved = raw_distance(&s.map.apply_unchecked(p), p);
            if moved > s.space.tolerance().abs {
                return Err(Error::input(format!("supplied fixed point moves by {moved} under T")));
            }
        }
        if let Some(m) = s.m_bound() {
            if (s.bundle.k_bound.value as f64) < m - s.space.tolerance().abs {
                return Err(Error::input(format!("K = {} is smaller than M = {m}", s.bundle.k_bound.value)));
            }
        }
        Ok(s)
    }

    /// `M = max(d(x0, p), d(u, p))` when a fixed point is known.
    pub fn m_bound(&self) -> Option<f64> {
        let p = self.fixed_point.as_ref()?;
        Some(raw_distance(&self.x0, p).max(raw_distance(&self.u, p)))
    }

    /// The default K, `max(1, ⌈M⌉)`, or `None` without a fixed point.
    pub fn default_k(space: &SpaceHandle, u: &SpacePoint, x0: &SpacePoint, p: Option<&SpacePoint>) -> Result<Option<KBound>> {
        let Some(p) = p else { return Ok(None) };
        let m = space.distance(x0, p)?.max(space.distance(u, p)?);
        Ok(Some(KBound::from_m(m)?))
    }
}

/// One step: `y = (1-β)u ⊕ βx`, `x_next = (1-λ)y ⊕ λTy`.
pub fn tikhonov_mann_step(
    space: &SpaceHandle,
    map: &MapHandle,
    u: &SpacePoint,
    x: &SpacePoint,
    lambda_n: f64,
    beta_n: f64,
) -> Result<(SpacePoint, SpacePoint)> {
    for (name, v) in [("lambda_n", lambda_n), ("beta_n", beta_n)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::input(format!("{name} must lie in [0,1], got {v}")));
        }
    }
    space.check_point(u)?;
    space.check_point(x)?;
    map.check_compatible(space)?;
    Ok(raw_step(map, u, x, lambda_n, beta_n))
}

fn raw_step(map: &MapHandle, u: &SpacePoint, x: &SpacePoint, lambda_n: f64, beta_n: f64) -> (SpacePoint, SpacePoint) {
    let y = raw_combine(u, x, beta_n);
    let ty = map.apply_unchecked(&y);
    let next = raw_combine(&y, &ty, lambda_n);
    (y, next)
}

/// Distances recorded at index n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// `d(x_n, x_{n+1})`
    pub step_gap: f64,
    /// `d(x_n, T x_n)`
    pub t_gap: f64,
    /// `d(x_n, y_n)`
    pub x_y: f64,
    /// `d(x_n, u)`
    pub x_u: f64,
    /// `d(u, T x_n)`
    pub u_tx: f64,
    /// `d(y_n, T y_n)`
    pub y_ty: f64,
    /// `d(y_n, y_{n+1})`
    pub y_gap: f64,
    /// `d(x_n, p)`
    pub x_p: Option<f64>,
    /// `d(y_n, p)`
    pub y_p: Option<f64>,
    /// `d(x_{n+1}, p)`
    pub next_x_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// Records for n = 0..horizon-1.
    pub records: Vec<StepRecord>,
    /// λ_n and β_n for n = 0..=horizon.
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub m_bound: Option<f64>,
    pub d_u_p: Option<f64>,
    pub k_bound: KBound,
    /// `(n, x_n, y_n)` every `point_stride` steps.
    pub points: Vec<(usize, SpacePoint, SpacePoint)>,
    pub point_stride: usize,
    /// `x_horizon`.
    pub final_point: SpacePoint,
}

impl IterationTrace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Store points every `point_stride` indices (distances are always stored).
    pub point_stride: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { point_stride: 1000 }
    }
}

pub fn run_trace(scenario: &Scenario, horizon: usize) -> Result<IterationTrace> {
    run_trace_with(scenario, horizon, TraceOptions::default())
}

pub fn run_trace_with(scenario: &Scenario, horizon: usize, options: TraceOptions) -> Result<IterationTrace> {
    if horizon == 0 {
        return Err(Error::input("horizon must be >= 1"));
    }
    let stride = options.point_stride.max(1);
    let Scenario { map, u, lambda, beta, fixed_point, .. } = scenario;
    let p = fixed_point.as_ref();
    let lambdas: Vec<f64> = (0..=horizon).map(|n| lambda.eval(n)).collect();
    let betas: Vec<f64> = (0..=horizon).map(|n| beta.eval(n)).collect();

    let mut records = Vec::with_capacity(horizon);
    let mut points = Vec::new();
    let mut x = scenario.x0.clone();
    let mut prev_y: Option<SpacePoint> = None;
    for n in 0..horizon {
        let (y, next) = raw_step(map, u, &x, lambdas[n], betas[n]);
        let ty = map.apply_unchecked(&y);
        let tx = map.apply_unchecked(&x);
        if let (Some(py), Some(last)) = (prev_y.as_ref(), records.last_mut()) {
            let last: &mut StepRecord = last;
            last.y_gap = raw_distance(py, &y);
        }
        let rec = StepRecord {
            step_gap: raw_distance(&x, &next),
            t_gap: raw_distance(&x, &tx),
            x_y: raw_distance(&x, &y),
            x_u: raw_distance(&x, u),
            u_tx: raw_distance(u, &tx),
            y_ty: raw_distance(&y, &ty),
            y_gap: f64::NAN,
            x_p: p.map(|p| raw_distance(&x, p)),
            y_p: p.map(|p| raw_distance(&y, p)),
            next_x_p: p.map(|p| raw_distance(&next, p)),
        };
        if !rec.step_gap.is_finite() || !rec.t_gap.is_finite() {
            return Err(Error::domain(format!("non-finite distance at step {n}")));
        }
        records.push(rec);
        if n % stride == 0 {
            points.push((n, x.clone(), y.clone()));
        }
        prev_y = Some(y);
        x = next;
    }
    let y_last = raw_combine(u, &x, betas[horizon]);
    if let (Some(py), Some(last)) = (prev_y.as_ref(), records.last_mut()) {
        last.y_gap = raw_distance(py, &y_last);
    }
    Ok(IterationTrace {
        records,
        lambdas,
        betas,
        m_bound: scenario.m_bound(),
        d_u_p: p.map(|p| raw_distance(u, p)),
        k_bound: scenario.bundle.k_bound,
        points,
        point_stride: stride,
        final_point: x,
    })
}

fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|c| s * c).collect()
}

fn vec_of(p: &SpacePoint) -> Vec<f64> {
    p.coords().map(<[f64]>::to_vec).unwrap_or_default()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// With `u = 0` in a normed space, checks that `y_n = β_n x_n` and that each
/// step equals `(1-λ_n)β_n x_n + λ_n T(β_n x_n)` evaluated with plain vector
/// arithmetic, and that the two orbits agree. Deviations are coordinatewise
/// maxima; each entry passes at `1e-12`.
pub fn check_modified_mann_equivalence(scenario: &Scenario, horizon: usize) -> Result<ValidationReport> {
    const LIMIT: f64 = 1e-12;
    if !scenario.space.is_normed() {
        return Err(Error::input("modified Mann comparison needs a normed space"));
    }
    if raw_distance(&scenario.u, &scenario.space.origin()) != 0.0 {
        return Err(Error::input("modified Mann comparison needs u = 0"));
    }
    let Scenario { map, u, lambda, beta, .. } = scenario;
    let mut y_check = MarginTracker::new();
    let mut step_check = MarginTracker::new();
    let mut orbit_check = MarginTracker::new();
    let wrap = |v: Vec<f64>| match scenario.space.origin() {
        SpacePoint::Plane(_) => SpacePoint::Plane([v[0], v[1]]),
        _ => SpacePoint::Vector(v),
    };
    let mut x = scenario.x0.clone();
    let mut literal = vec_of(&x);
    for n in 0..horizon {
        let (l, b) = (lambda.eval(n), beta.eval(n));
        let (y, next) = raw_step(map, u, &x, l, b);
        let xv = vec_of(&x);
        let bx = scale(&xv, b);
        y_check.observe(sup_dist(&vec_of(&y), &bx), 0.0, LIMIT, Some(n as u128), None);
        let tbx = vec_of(&map.apply_unchecked(&wrap(bx.clone())));
        let one_step: Vec<f64> = bx.iter().zip(&tbx).map(|(a, t)| (1.0 - l) * a + l * t).collect();
        step_check.observe(sup_dist(&vec_of(&next), &one_step), 0.0, LIMIT, Some(n as u128), None);

        let lb = scale(&literal, b);
        let tlb = vec_of(&map.apply_unchecked(&wrap(lb.clone())));
        literal = lb.iter().zip(&tlb).map(|(a, t)| (1.0 - l) * a + l * t).collect();
        x = next;
        orbit_check.observe(sup_dist(&vec_of(&x), &literal), 0.0, LIMIT, Some(n as u128 + 1), None);
    }
    let mut report = ValidationReport::new();
    report.push(y_check.finish("anchor term is scalar multiple", "modified-mann"));
    report.push(step_check.finish("step equals literal recurrence", "modified-mann"));
    report.push(orbit_check.finish("orbit equals literal orbit", "modified-mann"));
    Ok(report)
}
