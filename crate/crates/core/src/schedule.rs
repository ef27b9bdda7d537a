//! Parameter sequences (λ_n), (β_n) and their quantitative moduli.

use crate::error::{Error, Result};
use crate::rates::{self, Nat, NatRate, NeumaierSum};
use crate::report::{CheckEntry, MarginTracker, ValidationReport};

/// How a [`ScalarSchedule::Table`] continues past its last entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRule {
    /// Repeat the last listed value.
    HoldLast,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarSchedule {
    Constant(f64),
    /// `1 - 1/(n+1)`.
    HarmonicComplement,
    Table { values: Vec<f64>, tail: TailRule },
    /// `base`, with the term at `index` replaced by `value`.
    Patched { base: Box<ScalarSchedule>, index: usize, value: f64 },
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl ScalarSchedule {
    pub fn constant(c: f64) -> Result<Self> {
        let s = ScalarSchedule::Constant(c);
        s.validate()?;
        Ok(s)
    }

    pub fn table(values: Vec<f64>, tail: TailRule) -> Result<Self> {
        let s = ScalarSchedule::Table { values, tail };
        s.validate()?;
        Ok(s)
    }

    pub fn patched(self, index: usize, value: f64) -> Result<Self> {
        let s = ScalarSchedule::Patched { base: Box::new(self), index, value };
        s.validate()?;
        Ok(s)
    }

    /// Checks that every term that can be produced lies in [0,1].
    pub fn validate(&self) -> Result<()> {
        let bad = |v: f64| Err(Error::input(format!("schedule term {v} outside [0,1]")));
        match self {
            ScalarSchedule::Constant(c) if !in_unit(*c) => bad(*c),
            ScalarSchedule::Table { values, tail } => {
                if values.is_empty() && *tail == TailRule::HoldLast {
                    return Err(Error::input("table schedule with hold-last tail needs at least one value"));
                }
                if let Some(v) = values.iter().find(|v| !in_unit(**v)) {
                    return bad(*v);
                }
                match tail {
                    TailRule::Value(v) if !in_unit(*v) => bad(*v),
                    _ => Ok(()),
                }
            }
            ScalarSchedule::Patched { base, value, .. } => {
                if !in_unit(*value) {
                    return bad(*value);
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, n: usize) -> f64 {
        match self {
            ScalarSchedule::Constant(c) => *c,
            ScalarSchedule::HarmonicComplement => 1.0 - 1.0 / (n as f64 + 1.0),
            ScalarSchedule::Table { values, tail } => match values.get(n) {
                Some(v) => *v,
                None => match tail {
                    TailRule::HoldLast => *values.last().unwrap_or(&0.0),
                    TailRule::Value(v) => *v,
                },
            },
            ScalarSchedule::Patched { base, index, value } => {
                if n == *index {
                    *value
                } else {
                    base.eval(n)
                }
            }
        }
    }

    /// `1 - eval(n)`, computed without cancellation where the closed form allows.
    pub fn complement(&self, n: usize) -> f64 {
        match self {
            ScalarSchedule::HarmonicComplement => 1.0 / (n as f64 + 1.0),
            ScalarSchedule::Patched { base, index, value } => {
                if n == *index {
                    1.0 - value
                } else {
                    base.complement(n)
                }
            }
            _ => 1.0 - self.eval(n),
        }
    }

    /// `|s_{n+1} - s_n|`, taken on complements for accuracy near 1.
    pub fn abs_diff(&self, n: usize) -> f64 {
        (self.complement(n) - self.complement(n + 1)).abs()
    }
}

/// `P_n = β_1 β_2 ... β_{n+1}`.
///
/// Accumulated as a sum of `ln(1 - (1-β_i))` via `ln_1p` on the complements,
/// which keeps the relative error near machine precision even for a million
/// factors close to 1. A zero factor is a domain error.
pub fn product_p(beta: &ScalarSchedule, n: usize) -> Result<f64> {
    let mut acc = ProductAccumulator::default();
    for i in 0..=n {
        acc.push(beta, i + 1)?;
    }
    Ok(acc.value())
}

/// Running product of `β_i` in log space.
#[derive(Debug, Clone, Copy, Default)]
struct ProductAccumulator {
    log: NeumaierSum,
}

impl ProductAccumulator {
    fn push(&mut self, beta: &ScalarSchedule, i: usize) -> Result<()> {
        let c = beta.complement(i);
        if c >= 1.0 {
            return Err(Error::domain(format!("beta_{i} = 0: the product needs positive factors")));
        }
        self.log.add((-c).ln_1p());
        Ok(())
    }

    fn value(&self) -> f64 {
        self.log.value().exp()
    }
}

/// All of `P_0, ..., P_horizon`.
pub fn partial_products(beta: &ScalarSchedule, horizon: usize) -> Result<Vec<f64>> {
    let mut acc = ProductAccumulator::default();
    let mut out = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        acc.push(beta, n + 1)?;
        out.push(acc.value());
    }
    Ok(out)
}

/// `Σ_{i=0}^{n} |s_{i+1} - s_i|`.
pub fn diff_series_partial(schedule: &ScalarSchedule, n: usize) -> f64 {
    let mut sum = NeumaierSum::default();
    for i in 0..=n {
        sum.add(schedule.abs_diff(i));
    }
    sum.value()
}

fn diff_series_prefix(schedule: &ScalarSchedule, horizon: usize) -> Vec<f64> {
    let mut sum = NeumaierSum::default();
    (0..=horizon)
        .map(|i| {
            sum.add(schedule.abs_diff(i));
            sum.value()
        })
        .collect()
}

/// Tabulated rate of divergence for `Σ(1-β_n)`: entry `n` is the least
/// `m <= horizon` with `Σ_{i<=m}(1-β_i) >= n`. Arguments past the table give
/// [`Error::DomainExhausted`] with floor `horizon + 1`.
pub fn numeric_sigma1(beta: &ScalarSchedule, horizon: usize) -> NatRate {
    rates::divergence_rate_table(|i| beta.complement(i), horizon)
}

/// Where the bound K comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSource {
    /// `max(1, ⌈M⌉)` from a known fixed point.
    FixedPoint,
    /// Supplied by the user; not checked against M.
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KBound {
    pub value: Nat,
    pub source: BoundSource,
}

impl KBound {
    /// `max(1, ⌈m⌉)`.
    pub fn from_m(m: f64) -> Result<Self> {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::domain(format!("M must be finite and >= 0, got {m}")));
        }
        Ok(KBound { value: (m.ceil() as Nat).max(1), source: BoundSource::FixedPoint })
    }

    pub fn user(value: Nat) -> Result<Self> {
        if value == 0 {
            return Err(Error::input("K must be >= 1"));
        }
        Ok(KBound { value, source: BoundSource::User })
    }
}

/// The quantitative hypotheses on (λ_n), (β_n). Rates that are absent simply
/// disable the theorems that need them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuliBundle {
    /// Rate of divergence of `Σ(1-β_n)`.
    pub sigma1: Option<NatRate>,
    /// Rate of convergence of `P_n = ∏β_{i+1}` to 0.
    pub sigma2: Option<NatRate>,
    /// Cauchy modulus of `Σ|β_{n+1}-β_n|`.
    pub sigma3: NatRate,
    /// Cauchy modulus of `Σ|λ_{n+1}-λ_n|`.
    pub sigma4: NatRate,
    /// Rate of convergence of `β_n` to 1.
    pub sigma5: Option<NatRate>,
    /// `(Λ, N_Λ)` with `λ_n >= 1/Λ` for all `n >= N_Λ`.
    pub lambda_floor: Option<(Nat, Nat)>,
    /// `1/ψ₀(k) <= P_{χ(3k+2)}`, values >= 1.
    pub psi0: Option<NatRate>,
    pub k_bound: KBound,
}

impl ModuliBundle {
    /// Moduli for constant λ and `β_n = 1 - 1/(n+1)`: σ₂ = σ₃ = σ₅ = id,
    /// σ₄ = 0, ψ₀(k) = 24K(k+1) + 1, Λ = ⌈1/λ⌉, N_Λ = 0.
    pub fn corollary(k_bound: KBound, lambda: f64) -> Result<Self> {
        let big_lambda = rates::lambda_bound_for(lambda)?;
        let k = k_bound.value;
        let c = k.checked_mul(24).ok_or_else(|| Error::overflow("psi0"))?;
        Ok(ModuliBundle {
            sigma1: None,
            sigma2: Some(NatRate::Identity),
            sigma3: NatRate::Identity,
            sigma4: NatRate::Constant(0),
            sigma5: Some(NatRate::Identity),
            lambda_floor: Some((big_lambda, 0)),
            psi0: Some(NatRate::affine(c, c + 1)),
            k_bound,
        })
    }

    pub fn chi_rate(&self) -> NatRate {
        NatRate::Chi {
            sigma3: Box::new(self.sigma3.clone()),
            sigma4: Box::new(self.sigma4.clone()),
            k_bound: self.k_bound.value,
        }
    }

    /// Σ, when σ₁ is available.
    pub fn sigma_rate(&self) -> Option<NatRate> {
        Some(NatRate::SigmaC1 {
            sigma1: Box::new(self.sigma1.clone()?),
            chi: Box::new(self.chi_rate()),
            k_bound: self.k_bound.value,
        })
    }

    /// Σ̃, when σ₂ and ψ₀ are available.
    pub fn sigma_tilde_rate(&self) -> Option<NatRate> {
        Some(NatRate::SigmaTildeC2 {
            sigma2: Box::new(self.sigma2.clone()?),
            psi0: Box::new(self.psi0.clone()?),
            chi: Box::new(self.chi_rate()),
            k_bound: self.k_bound.value,
        })
    }

    /// Θ* built on top of a rate of asymptotic regularity.
    pub fn t_rate(&self, theta: NatRate, variant: rates::Sigma5Argument) -> Option<NatRate> {
        let (lambda_bound, n_lambda) = self.lambda_floor?;
        Some(NatRate::TStar {
            theta: Box::new(theta),
            n_lambda,
            lambda_bound,
            sigma5: Box::new(self.sigma5.clone()?),
            k_bound: self.k_bound.value,
            variant,
        })
    }
}

fn eval_index(rate: &NatRate, k: Nat) -> Result<Option<usize>> {
    match rate.eval(k) {
        Ok(v) => Ok(usize::try_from(v).ok()),
        Err(Error::DomainExhausted { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Suffix maxima: `out[n] = max(values[n..])`.
fn suffix_max(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    out
}

/// Index of the maximum of `values[from..]`.
fn argmax_from(values: &[f64], from: usize) -> usize {
    let mut best = from;
    for (i, v) in values.iter().enumerate().skip(from) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Checks every supplied modulus against the schedules for `k <= k_max` and
/// indices up to `horizon`.
///
/// Cauchy moduli are checked only for tails ending inside the horizon
/// (`n + p <= horizon`), which under-approximates the condition for all p.
pub fn validate_moduli(
    bundle: &ModuliBundle,
    lambda: &ScalarSchedule,
    beta: &ScalarSchedule,
    horizon: usize,
    k_max: Nat,
    tol: f64,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new();
    let family = "modulus";
    let threshold = |k: Nat| 1.0 / (k as f64 + 1.0);

    if bundle.k_bound.value == 0 {
        return Err(Error::input("K must be >= 1"));
    }

    // Rate of divergence.
    match &bundle.sigma1 {
        Some(sigma1) => {
            let mut prefix = Vec::with_capacity(horizon + 1);
            let mut sum = NeumaierSum::default();
            for i in 0..=horizon {
                sum.add(beta.complement(i));
                prefix.push(sum.value());
            }
            let mut t = MarginTracker::new();
            let mut skipped = 0usize;
            for n in 0..=k_max {
                match eval_index(sigma1, n)? {
                    Some(m) if m <= horizon => t.observe(n as f64, prefix[m], tol, Some(m as Nat), Some(n)),
                    _ => skipped += 1,
                }
            }
            let mut e = t.finish("divergence rate sigma1", family);
            if skipped > 0 {
                e = e.with_note(format!("{skipped} levels beyond horizon"));
            }
            report.push(e);
        }
        None => report.push(CheckEntry::skipped("divergence rate sigma1", family, "not supplied")),
    }

    // Product rate and positivity.
    let products = match (&bundle.sigma2, &bundle.psi0) {
        (None, None) => None,
        _ => {
            let mut t = MarginTracker::new();
            // Only β_1, β_2, ... enter P_n, so β_0 may vanish.
            for n in 1..=horizon + 1 {
                t.observe(-beta.eval(n), 0.0, -f64::MIN_POSITIVE, Some(n as Nat), None);
            }
            let positive = t.passed();
            report.push(t.finish("positive beta", family).with_note("beta_n > 0 for n >= 1"));
            if positive {
                Some(partial_products(beta, horizon)?)
            } else {
                None
            }
        }
    };
    match (&bundle.sigma2, &products) {
        (Some(sigma2), Some(p)) => {
            let smax = suffix_max(p);
            let mut t = MarginTracker::new();
            for k in 0..=k_max {
                if let Some(n0) = eval_index(sigma2, k)?.filter(|&n0| n0 <= horizon) {
                    let n = argmax_from(p, n0);
                    t.observe(smax[n0], threshold(k), tol, Some(n as Nat), Some(k));
                }
            }
            report.push(t.finish("product rate sigma2", family));
        }
        (Some(_), None) => report.push(CheckEntry::skipped("product rate sigma2", family, "product undefined")),
        (None, _) => report.push(CheckEntry::skipped("product rate sigma2", family, "not supplied")),
    }

    // Cauchy moduli of the difference series.
    for (name, rate, sched) in [
        ("Cauchy modulus sigma3", &bundle.sigma3, beta),
        ("Cauchy modulus sigma4", &bundle.sigma4, lambda),
    ] {
        // prefix[n] = Σ_{i<=n}|s_{i+1}-s_i|, nondecreasing, so the worst tail
        // from n0 is prefix[horizon] - prefix[n0].
        let prefix = diff_series_prefix(sched, horizon);
        let mut t = MarginTracker::new();
        for k in 0..=k_max {
            if let Some(n0) = eval_index(rate, k)?.filter(|&n0| n0 <= horizon) {
                t.observe(prefix[horizon] - prefix[n0], threshold(k), tol, Some(n0 as Nat), Some(k));
            }
        }
        report.push(t.finish(name, family).with_note("horizon-bounded check"));
    }

    // β_n -> 1.
    match &bundle.sigma5 {
        Some(sigma5) => {
            let gaps: Vec<f64> = (0..=horizon).map(|n| beta.complement(n)).collect();
            let smax = suffix_max(&gaps);
            let mut t = MarginTracker::new();
            for k in 0..=k_max {
                if let Some(n0) = eval_index(sigma5, k)?.filter(|&n0| n0 <= horizon) {
                    let n = argmax_from(&gaps, n0);
                    t.observe(smax[n0], threshold(k), tol, Some(n as Nat), Some(k));
                }
            }
            report.push(t.finish("beta rate sigma5", family));
        }
        None => report.push(CheckEntry::skipped("beta rate sigma5", family, "not supplied")),
    }

    // λ_n >= 1/Λ eventually.
    match bundle.lambda_floor {
        Some((big_lambda, n_lambda)) => {
            if big_lambda == 0 {
                return Err(Error::input("Lambda must be >= 1"));
            }
            let floor = 1.0 / big_lambda as f64;
            let mut t = MarginTracker::new();
            let start = usize::try_from(n_lambda).unwrap_or(usize::MAX);
            for n in start..=horizon {
                t.observe(floor, lambda.eval(n), tol, Some(n as Nat), None);
            }
            report.push(t.finish("lambda floor", family));
        }
        None => report.push(CheckEntry::skipped("lambda floor", family, "not supplied")),
    }

    // 1/ψ₀(k) <= P_{χ(3k+2)}.
    match (&bundle.psi0, &products) {
        (Some(psi0), Some(p)) => {
            let chi = bundle.chi_rate();
            let mut t = MarginTracker::new();
            for k in 0..=k_max {
                let psi = psi0.eval(k)?;
                if psi == 0 {
                    t.observe(f64::INFINITY, 0.0, tol, None, Some(k));
                    continue;
                }
                let j = chi.eval(3 * k + 2)?;
                if let Some(j) = usize::try_from(j).ok().filter(|&j| j <= horizon) {
                    t.observe(1.0 / psi as f64, p[j], tol, Some(j as Nat), Some(k));
                }
            }
            report.push(t.finish("product lower bound psi0", family));
        }
        (Some(_), None) => report.push(CheckEntry::skipped("product lower bound psi0", family, "product undefined")),
        (None, _) => report.push(CheckEntry::skipped("product lower bound psi0", family, "not supplied")),
    }

    if bundle.k_bound.source == BoundSource::User {
        report.note("K was supplied by the user and is unverified against M");
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Status;

    fn k1() -> KBound {
        KBound::user(1).unwrap()
    }

    #[test]
    fn eval_examples() {
        let h = ScalarSchedule::HarmonicComplement;
        assert_eq!(h.eval(0), 0.0);
        assert_eq!(h.eval(3), 0.75);
        assert_eq!(ScalarSchedule::constant(0.5).unwrap().eval(1_000_000), 0.5);
        assert!(ScalarSchedule::constant(1.5).is_err());
        let t = ScalarSchedule::table(vec![0.1, 0.2], TailRule::HoldLast).unwrap();
        assert_eq!(t.eval(7), 0.2);
        let t = ScalarSchedule::table(vec![0.1], TailRule::Value(0.9)).unwrap();
        assert_eq!(t.eval(7), 0.9);
        assert!(ScalarSchedule::table(vec![], TailRule::HoldLast).is_err());
        let p = h.clone().patched(4, 0.0).unwrap();
        assert_eq!(p.eval(4), 0.0);
        assert_eq!(p.eval(5), h.eval(5));
    }

    #[test]
    fn product_examples() {
        let h = ScalarSchedule::HarmonicComplement;
        assert!((product_p(&h, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((product_p(&h, 8).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(product_p(&ScalarSchedule::Constant(1.0), 40).unwrap(), 1.0);
        let zeroed = h.patched(3, 0.0).unwrap();
        assert!(matches!(product_p(&zeroed, 5), Err(Error::Domain(_))));
        // β_0 = 0 is not a factor of P_n.
        assert!(product_p(&ScalarSchedule::HarmonicComplement, 2).is_ok());
    }

    #[test]
    fn product_matches_closed_form_to_a_million() {
        let h = ScalarSchedule::HarmonicComplement;
        let p = partial_products(&h, 1_000_000).unwrap();
        for (n, v) in p.iter().enumerate() {
            let exact = 1.0 / (n as f64 + 2.0);
            assert!(((v - exact) / exact).abs() <= 1e-12, "n={n}: {v} vs {exact}");
        }
    }

    #[test]
    fn diff_series_examples() {
        let h = ScalarSchedule::HarmonicComplement;
        for n in [0usize, 1, 5, 100, 10_000] {
            let expect = 1.0 - 1.0 / (n as f64 + 2.0);
            assert!((diff_series_partial(&h, n) - expect).abs() < 1e-13);
        }
        assert_eq!(diff_series_partial(&ScalarSchedule::Constant(0.3), 50), 0.0);
        let t = ScalarSchedule::table(vec![0.0, 0.5, 0.5], TailRule::HoldLast).unwrap();
        assert_eq!(diff_series_partial(&t, 1), 0.5);
    }

    #[test]
    fn numeric_sigma1_examples() {
        let zero = ScalarSchedule::Constant(0.0);
        let s = numeric_sigma1(&zero, 100);
        assert_eq!(s.eval(0).unwrap(), 0);
        for n in 1..50 {
            assert_eq!(s.eval(n).unwrap(), n - 1);
        }
        let h = numeric_sigma1(&ScalarSchedule::HarmonicComplement, 1000);
        assert_eq!(h.eval(1).unwrap(), 0);
        assert_eq!(h.eval(2).unwrap(), 3);
        assert!(matches!(h.eval(20), Err(Error::DomainExhausted { floor: Some(1001), .. })));
    }

    #[test]
    fn corollary_bundle_validates() {
        let bundle = ModuliBundle::corollary(k1(), 0.5).unwrap();
        let r = validate_moduli(
            &bundle,
            &ScalarSchedule::Constant(0.5),
            &ScalarSchedule::HarmonicComplement,
            20_000,
            100,
            1e-12,
        )
        .unwrap();
        assert!(r.passed(), "{}", r.to_text());
        assert_eq!(r.entry("divergence rate sigma1").unwrap().status, Status::Skipped);
        assert_eq!(r.entry("product lower bound psi0").unwrap().status, Status::Pass);
    }

    #[test]
    fn constant_one_beta() {
        let bundle = ModuliBundle {
            sigma1: Some(NatRate::Identity),
            sigma2: None,
            sigma3: NatRate::Constant(0),
            sigma4: NatRate::Constant(0),
            sigma5: Some(NatRate::Constant(0)),
            lambda_floor: None,
            psi0: None,
            k_bound: k1(),
        };
        let one = ScalarSchedule::Constant(1.0);
        let r = validate_moduli(&bundle, &ScalarSchedule::Constant(0.5), &one, 1000, 10, 1e-12).unwrap();
        assert_eq!(r.entry("Cauchy modulus sigma3").unwrap().status, Status::Pass);
        assert_eq!(r.entry("beta rate sigma5").unwrap().status, Status::Pass);
        let c1 = r.entry("divergence rate sigma1").unwrap();
        assert_eq!(c1.status, Status::Fail);
        assert!(c1.witness.unwrap().k.unwrap() >= 1);
    }

    #[test]
    fn wrong_sigma5_fails_at_first_index() {
        let mut bundle = ModuliBundle::corollary(k1(), 0.5).unwrap();
        bundle.sigma5 = Some(NatRate::Constant(0));
        let r = validate_moduli(
            &bundle,
            &ScalarSchedule::Constant(0.5),
            &ScalarSchedule::HarmonicComplement,
            1000,
            5,
            1e-12,
        )
        .unwrap();
        let e = r.entry("beta rate sigma5").unwrap();
        assert_eq!(e.status, Status::Fail);
        let w = e.witness.unwrap();
        assert_eq!(w.n, Some(0));
        assert_eq!(w.lhs, 1.0);
    }

    #[test]
    fn k_bound_rounds_up() {
        assert_eq!(KBound::from_m(0.0).unwrap().value, 1);
        assert_eq!(KBound::from_m(1.0).unwrap().value, 1);
        assert_eq!(KBound::from_m(2.2).unwrap().value, 3);
        assert!(KBound::user(0).is_err());
    }
}
