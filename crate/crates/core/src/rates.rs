//! Rates and moduli as exact natural-number functions.
//!
//! Every formula is evaluated in `u128` with checked arithmetic. A rate is a
//! certificate, so overflow is always reported as [`Error::Overflow`] and
//! never saturates or wraps.
//!
//! [`NatRate`] is a small expression tree: the basic shapes (identity,
//! constants, affine maps, finite tables) plus one node per composite rate
//! (χ, θ, Σ, Σ̃, Θ*, the quantitative Xu rates and the closed forms for the
//! harmonic schedule). Composites are evaluated lazily, on demand.

use crate::error::{Error, Result};

pub type Nat = u128;

/// Which argument the σ₅ term of the T-asymptotic-regularity transformer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sigma5Argument {
    /// `σ₅(4KΛ(k+1) - 1)`, the argument the soundness argument needs.
    #[default]
    Sound,
    /// `σ₅(4K(k+1) - 1)`, without the Λ factor. Kept for comparison only.
    Literal,
}

/// A finite table `k ↦ values[k]`.
///
/// `floor`, when present, is a lower bound valid for every argument past the
/// end of the table (typically `horizon + 1` for a scan that ran out).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateTable {
    pub values: Vec<Nat>,
    pub floor: Option<Nat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NatRate {
    Identity,
    Constant(Nat),
    /// `k ↦ slope·k + offset`.
    Affine { slope: Nat, offset: Nat },
    /// `k ↦ max(k - c, 0)`.
    Monus(Nat),
    Table(RateTable),
    Chi { sigma3: Box<NatRate>, sigma4: Box<NatRate>, k_bound: Nat },
    ThetaFromSigma1(Box<NatRate>),
    SigmaC1 { sigma1: Box<NatRate>, chi: Box<NatRate>, k_bound: Nat },
    SigmaTildeC2 { sigma2: Box<NatRate>, psi0: Box<NatRate>, chi: Box<NatRate>, k_bound: Nat },
    TStar {
        theta: Box<NatRate>,
        n_lambda: Nat,
        lambda_bound: Nat,
        sigma5: Box<NatRate>,
        k_bound: Nat,
        variant: Sigma5Argument,
    },
    XuSigma { theta: Box<NatRate>, chi: Box<NatRate>, upper: Nat },
    XuSigmaTilde { gamma: Box<NatRate>, delta0: Box<NatRate>, chi: Box<NatRate>, upper: Nat },
    CorollarySigma0 { k_bound: Nat },
    CorollaryPhi0 { k_bound: Nat, lambda_bound: Nat },
}

impl NatRate {
    pub fn affine(slope: Nat, offset: Nat) -> Self {
        NatRate::Affine { slope, offset }
    }

    pub fn table(values: Vec<Nat>, floor: Option<Nat>) -> Self {
        NatRate::Table(RateTable { values, floor })
    }

    pub fn eval(&self, k: Nat) -> Result<Nat> {
        match self {
            NatRate::Identity => Ok(k),
            NatRate::Constant(c) => Ok(*c),
            NatRate::Affine { slope, offset } => slope
                .checked_mul(k)
                .and_then(|v| v.checked_add(*offset))
                .ok_or_else(|| Error::overflow(format!("affine rate {slope}*k+{offset} at k={k}"))),
            NatRate::Monus(c) => Ok(k.saturating_sub(*c)),
            NatRate::Table(t) => {
                let idx = usize::try_from(k).ok().filter(|&i| i < t.values.len());
                idx.map(|i| t.values[i])
                    .ok_or(Error::DomainExhausted { arg: k, len: t.values.len(), floor: t.floor })
            }
            NatRate::Chi { sigma3, sigma4, k_bound } => chi(sigma3, sigma4, *k_bound, k),
            NatRate::ThetaFromSigma1(sigma1) => theta_from_sigma1(sigma1, k),
            NatRate::SigmaC1 { sigma1, chi, k_bound } => sigma_c1(sigma1, chi, *k_bound, k),
            NatRate::SigmaTildeC2 { sigma2, psi0, chi, k_bound } => {
                sigma_tilde_c2(sigma2, psi0, chi, *k_bound, k)
            }
            NatRate::TStar { theta, n_lambda, lambda_bound, sigma5, k_bound, variant } => {
                phi_from_rate(theta, *n_lambda, *lambda_bound, sigma5, *k_bound, k, *variant)
            }
            NatRate::XuSigma { theta, chi, upper } => xu_sigma(theta, chi, *upper, k),
            NatRate::XuSigmaTilde { gamma, delta0, chi, upper } => xu_sigma_tilde(gamma, delta0, chi, *upper, k),
            NatRate::CorollarySigma0 { k_bound } => corollary_sigma0(*k_bound, k),
            NatRate::CorollaryPhi0 { k_bound, lambda_bound } => corollary_phi0_with_bound(*k_bound, *lambda_bound, k),
        }
    }

    /// Values for `k = 0..=k_max`.
    pub fn tabulate(&self, k_max: Nat) -> Result<Vec<Nat>> {
        (0..=k_max).map(|k| self.eval(k)).collect()
    }
}

// Small checked-arithmetic helpers; `what` names the formula in the error.

fn add(a: Nat, b: Nat, what: &str) -> Result<Nat> {
    a.checked_add(b).ok_or_else(|| Error::overflow(what))
}

fn mul(a: Nat, b: Nat, what: &str) -> Result<Nat> {
    a.checked_mul(b).ok_or_else(|| Error::overflow(what))
}

/// `c·(k+1) - 1` for `c >= 1`; never underflows.
fn scaled_minus_one(c: Nat, k: Nat, what: &str) -> Result<Nat> {
    Ok(mul(c, add(k, 1, what)?, what)? - 1)
}

fn require_positive(v: Nat, name: &str) -> Result<()> {
    if v == 0 {
        Err(Error::domain(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

/// Least `j >= 0` with `e^j >= m`.
///
/// Computed in double precision; if `ln m` lands within `1e-9` of an integer
/// the result is bumped up by one, since overestimating keeps every rate
/// built from it valid. `m = 1` gives 0 exactly.
pub fn ceil_ln(m: Nat) -> Result<Nat> {
    match m {
        0 => Err(Error::input("ceil_ln is undefined at 0")),
        1 => Ok(0),
        _ => {
            let l = (m as f64).ln();
            let nearest = l.round();
            let j = if (l - nearest).abs() < 1e-9 { nearest + 1.0 } else { l.ceil() };
            Ok(j as Nat)
        }
    }
}

/// `χ(k) = max{σ₃(8K(k+1)-1), σ₄(8K(k+1)-1)}`.
pub fn chi(sigma3: &NatRate, sigma4: &NatRate, k_bound: Nat, k: Nat) -> Result<Nat> {
    require_positive(k_bound, "K")?;
    let arg = scaled_minus_one(mul(8, k_bound, "chi")?, k, "chi")?;
    Ok(sigma3.eval(arg)?.max(sigma4.eval(arg)?))
}

/// `θ(n) = σ₁(n+1)`: turns a rate of divergence for `Σ(1-β_n)` into one for
/// `Σ(1-β_{n+1})`.
pub fn theta_from_sigma1(sigma1: &NatRate, n: Nat) -> Result<Nat> {
    sigma1.eval(add(n, 1, "theta")?)
}

/// Σ(k) = σ₁(χ(3k+2) + 2 + ⌈ln(6K(k+1))⌉) + 1, the rate under divergence of
/// `Σ(1-β_n)`. `chi` is the Cauchy-modulus rate (normally [`NatRate::Chi`]).
pub fn sigma_c1(sigma1: &NatRate, chi: &NatRate, k_bound: Nat, k: Nat) -> Result<Nat> {
    let arg = sigma_c1_argument(chi, k_bound, k)?;
    add(sigma1.eval(arg)?, 1, "Sigma")
}

fn sigma_c1_argument(chi: &NatRate, k_bound: Nat, k: Nat) -> Result<Nat> {
    require_positive(k_bound, "K")?;
    let what = "Sigma";
    let chi_arg = add(mul(3, k, what)?, 2, what)?;
    let log_arg = mul(mul(6, k_bound, what)?, add(k, 1, what)?, what)?;
    add(add(chi.eval(chi_arg)?, 2, what)?, ceil_ln(log_arg)?, what)
}

/// Either an exact value or a proven lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBound {
    Exact(Nat),
    AtLeast(Nat),
}

impl RateBound {
    /// The value itself, or the lower bound.
    pub fn lower(self) -> Nat {
        match self {
            RateBound::Exact(v) | RateBound::AtLeast(v) => v,
        }
    }
}

impl std::fmt::Display for RateBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateBound::Exact(v) => write!(f, "{v}"),
            RateBound::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

/// [`sigma_c1`] for a tabulated σ₁ that may run out: when σ₁ is queried past
/// its table and the table carries a floor, the result is `AtLeast(floor+1)`.
/// Sound because Σ is σ₁ plus one, monotone in the σ₁ value.
pub fn sigma_c1_bound(sigma1: &NatRate, chi: &NatRate, k_bound: Nat, k: Nat) -> Result<RateBound> {
    let arg = sigma_c1_argument(chi, k_bound, k)?;
    match sigma1.eval(arg) {
        Ok(v) => Ok(RateBound::Exact(add(v, 1, "Sigma")?)),
        Err(Error::DomainExhausted { floor: Some(f), .. }) => Ok(RateBound::AtLeast(add(f, 1, "Sigma")?)),
        Err(e) => Err(e),
    }
}

/// Σ̃(k) = max{σ₂(6K(k+1)ψ₀(k) - 1), χ(3k+2) + 1} + 1, the rate under
/// `∏β_{n+1} → 0`.
pub fn sigma_tilde_c2(sigma2: &NatRate, psi0: &NatRate, chi: &NatRate, k_bound: Nat, k: Nat) -> Result<Nat> {
    require_positive(k_bound, "K")?;
    let what = "Sigma-tilde";
    let psi = psi0.eval(k)?;
    require_positive(psi, "psi0(k)")?;
    let arg = mul(mul(mul(6, k_bound, what)?, add(k, 1, what)?, what)?, psi, what)? - 1;
    let first = sigma2.eval(arg)?;
    let second = add(chi.eval(add(mul(3, k, what)?, 2, what)?)?, 1, what)?;
    add(first.max(second), 1, what)
}

/// Θ*(k) = max{N_Λ, Θ(2Λ(k+1) - 1), σ₅(s)} where `s = 4KΛ(k+1) - 1` for
/// [`Sigma5Argument::Sound`] and `4K(k+1) - 1` for the literal variant.
///
/// Turns a rate of asymptotic regularity Θ into one of T-asymptotic regularity.
pub fn phi_from_rate(
    theta: &NatRate,
    n_lambda: Nat,
    lambda_bound: Nat,
    sigma5: &NatRate,
    k_bound: Nat,
    k: Nat,
    variant: Sigma5Argument,
) -> Result<Nat> {
    require_positive(k_bound, "K")?;
    require_positive(lambda_bound, "Lambda")?;
    let what = "Theta*";
    let rate_part = theta.eval(scaled_minus_one(mul(2, lambda_bound, what)?, k, what)?)?;
    let coeff = match variant {
        Sigma5Argument::Sound => mul(mul(4, k_bound, what)?, lambda_bound, what)?,
        Sigma5Argument::Literal => mul(4, k_bound, what)?,
    };
    let beta_part = sigma5.eval(scaled_minus_one(coeff, k, what)?)?;
    Ok(n_lambda.max(rate_part).max(beta_part))
}

/// Σ₀(k) = 144K²(k+1)² + 6K(k+1).
pub fn corollary_sigma0(k_bound: Nat, k: Nat) -> Result<Nat> {
    require_positive(k_bound, "K")?;
    let what = "Sigma0";
    let t = mul(k_bound, add(k, 1, what)?, what)?;
    add(mul(144, mul(t, t, what)?, what)?, mul(6, t, what)?, what)
}

/// Λ = ⌈1/λ⌉ for λ ∈ (0, 1].
pub fn lambda_bound_for(lambda: f64) -> Result<Nat> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::input(format!("lambda must lie in (0,1], got {lambda}")));
    }
    Ok((1.0 / lambda).ceil() as Nat)
}

/// Φ₀(k) = 576K²⌈1/λ⌉²(k+1)² + 12K⌈1/λ⌉(k+1).
pub fn corollary_phi0(k_bound: Nat, lambda: f64, k: Nat) -> Result<Nat> {
    corollary_phi0_with_bound(k_bound, lambda_bound_for(lambda)?, k)
}

fn corollary_phi0_with_bound(k_bound: Nat, lambda_bound: Nat, k: Nat) -> Result<Nat> {
    require_positive(k_bound, "K")?;
    require_positive(lambda_bound, "Lambda")?;
    let what = "Phi0";
    let t = mul(mul(k_bound, lambda_bound, what)?, add(k, 1, what)?, what)?;
    add(mul(576, mul(t, t, what)?, what)?, mul(12, t, what)?, what)
}

/// Quantitative Xu lemma, divergence branch:
/// Σ(k) = θ(χ(3k+2) + 1 + ⌈ln(3L(k+1))⌉) + 1.
pub fn xu_sigma(theta: &NatRate, chi: &NatRate, upper: Nat, k: Nat) -> Result<Nat> {
    require_positive(upper, "L")?;
    let what = "Xu Sigma";
    let c = chi.eval(add(mul(3, k, what)?, 2, what)?)?;
    let log_arg = mul(mul(3, upper, what)?, add(k, 1, what)?, what)?;
    let arg = add(add(c, 1, what)?, ceil_ln(log_arg)?, what)?;
    add(theta.eval(arg)?, 1, what)
}

/// Quantitative Xu lemma, product branch:
/// Σ̃(k) = max{γ(3L(k+1)δ₀(k) - 1), χ(3k+2) + 1} + 1.
pub fn xu_sigma_tilde(gamma: &NatRate, delta0: &NatRate, chi: &NatRate, upper: Nat, k: Nat) -> Result<Nat> {
    require_positive(upper, "L")?;
    let what = "Xu Sigma-tilde";
    let d = delta0.eval(k)?;
    require_positive(d, "delta0(k)")?;
    let arg = mul(mul(mul(3, upper, what)?, add(k, 1, what)?, what)?, d, what)? - 1;
    let first = gamma.eval(arg)?;
    let second = add(chi.eval(add(mul(3, k, what)?, 2, what)?)?, 1, what)?;
    add(first.max(second), 1, what)
}

/// Tabulates the least index whose partial sum reaches each level:
/// entry `n` is the least `m <= horizon` with `terms[0] + ... + terms[m] >= n`.
///
/// The table stops at the first level not reached within the horizon and
/// records `horizon + 1` as its floor. Partial sums use compensated
/// summation.
pub fn divergence_rate_table<F: Fn(usize) -> f64>(terms: F, horizon: usize) -> NatRate {
    let mut values = Vec::new();
    let mut sum = NeumaierSum::default();
    let mut level: f64 = 0.0;
    for m in 0..=horizon {
        sum.add(terms(m));
        let s = sum.value();
        while s >= level {
            values.push(m as Nat);
            level += 1.0;
        }
    }
    NatRate::table(values, Some(horizon as Nat + 1))
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id() -> NatRate {
        NatRate::Identity
    }

    fn zero() -> NatRate {
        NatRate::Constant(0)
    }

    /// ψ₀(k) = 24K(k+1) + 1.
    fn psi0(k_bound: Nat) -> NatRate {
        NatRate::affine(24 * k_bound, 24 * k_bound + 1)
    }

    fn corollary_chi(k_bound: Nat) -> NatRate {
        NatRate::Chi { sigma3: Box::new(id()), sigma4: Box::new(zero()), k_bound }
    }

    #[test]
    fn ceil_ln_examples() {
        assert_eq!(ceil_ln(1).unwrap(), 0);
        assert_eq!(ceil_ln(2).unwrap(), 1);
        assert_eq!(ceil_ln(3).unwrap(), 2);
        assert_eq!(ceil_ln(6).unwrap(), 2);
        assert_eq!(ceil_ln(7).unwrap(), 2);
        assert_eq!(ceil_ln(8).unwrap(), 3);
        assert_eq!(ceil_ln(12).unwrap(), 3);
        assert!(matches!(ceil_ln(0), Err(Error::Input(_))));
    }

    #[test]
    fn ceil_ln_matches_exponential_oracle() {
        // Independent check: least j with e^j >= m by repeated multiplication.
        for m in 1..5000u128 {
            let mut j = 0u128;
            let mut p = 1.0f64;
            while p < m as f64 {
                p *= std::f64::consts::E;
                j += 1;
            }
            assert_eq!(ceil_ln(m).unwrap(), j, "m={m}");
        }
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi(&id(), &zero(), 1, 0).unwrap(), 7);
        assert_eq!(chi(&zero(), &zero(), 5, 9).unwrap(), 0);
        assert_eq!(chi(&id(), &zero(), 2, 3).unwrap(), 63);
        assert!(matches!(chi(&id(), &zero(), 0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn sigma_c1_examples() {
        assert_eq!(sigma_c1(&id(), &zero(), 1, 0).unwrap(), 5);
        assert_eq!(sigma_c1(&id(), &zero(), 1, 1).unwrap(), 6);
        // σ₁(n) = max(n-1, 0) for β ≡ 0, σ₃ = σ₄ = 0.
        let sigma1 = NatRate::table((0..50).map(|n: Nat| n.saturating_sub(1)).collect(), None);
        let chi0 = NatRate::Chi { sigma3: Box::new(zero()), sigma4: Box::new(zero()), k_bound: 1 };
        assert_eq!(sigma_c1(&sigma1, &chi0, 1, 0).unwrap(), 4);
    }

    #[test]
    fn sigma_tilde_examples() {
        assert_eq!(sigma_tilde_c2(&id(), &psi0(1), &corollary_chi(1), 1, 0).unwrap(), 150);
        assert_eq!(sigma_tilde_c2(&id(), &psi0(1), &corollary_chi(1), 1, 1).unwrap(), 588);
        // σ₂ = 0, ψ₀ = 1, χ ≡ 0: max{0, 0 + 1} + 1.
        let chi0 = NatRate::Chi { sigma3: Box::new(zero()), sigma4: Box::new(zero()), k_bound: 1 };
        assert_eq!(sigma_tilde_c2(&zero(), &NatRate::Constant(1), &chi0, 1, 0).unwrap(), 2);
        assert!(sigma_tilde_c2(&zero(), &zero(), &chi0, 1, 0).is_err());
    }

    #[test]
    fn phi_from_rate_examples() {
        let sigma_tilde = NatRate::SigmaTildeC2 {
            sigma2: Box::new(id()),
            psi0: Box::new(psi0(1)),
            chi: Box::new(corollary_chi(1)),
            k_bound: 1,
        };
        assert_eq!(sigma_tilde.eval(3).unwrap(), 2328);
        assert_eq!(phi_from_rate(&sigma_tilde, 0, 2, &id(), 1, 0, Sigma5Argument::Sound).unwrap(), 2328);
        for k in 0..10 {
            assert_eq!(phi_from_rate(&zero(), 5, 3, &zero(), 2, k, Sigma5Argument::Sound).unwrap(), 5);
        }
        assert_eq!(phi_from_rate(&id(), 0, 1, &id(), 1, 0, Sigma5Argument::Sound).unwrap(), 3);
        // The two σ₅ variants only differ when Λ > 1 and σ₅ dominates.
        let big = NatRate::affine(1000, 0);
        let sound = phi_from_rate(&zero(), 0, 4, &big, 1, 0, Sigma5Argument::Sound).unwrap();
        let literal = phi_from_rate(&zero(), 0, 4, &big, 1, 0, Sigma5Argument::Literal).unwrap();
        assert_eq!((sound, literal), (15_000, 3_000));
    }

    #[test]
    fn corollary_closed_forms() {
        assert_eq!(corollary_sigma0(1, 0).unwrap(), 150);
        assert_eq!(corollary_sigma0(1, 1).unwrap(), 588);
        assert_eq!(corollary_sigma0(1, 2).unwrap(), 1314);
        assert_eq!(corollary_sigma0(3, 0).unwrap(), 1314);
        assert_eq!(corollary_phi0(1, 0.5, 0).unwrap(), 2328);
        assert_eq!(corollary_phi0(1, 1.0, 0).unwrap(), 588);
        assert_eq!(corollary_phi0(1, 0.5, 1).unwrap(), 9264);
        assert_eq!(corollary_phi0(1, 0.5, 2).unwrap(), 20808);
        assert!(corollary_phi0(1, 0.0, 0).is_err());
        assert!(corollary_phi0(1, 1.5, 0).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let huge = 1u128 << 70;
        assert!(matches!(corollary_sigma0(huge, 0), Err(Error::Overflow(_))));
        assert!(matches!(chi(&id(), &zero(), huge, Nat::MAX / 2), Err(Error::Overflow(_))));
        assert!(matches!(NatRate::affine(2, 0).eval(Nat::MAX), Err(Error::Overflow(_))));
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta_from_sigma1(&id(), 4).unwrap(), 5);
        assert_eq!(theta_from_sigma1(&zero(), 0).unwrap(), 0);
        let sigma1 = divergence_rate_table(|_| 1.0, 100);
        assert_eq!(theta_from_sigma1(&sigma1, 3).unwrap(), 3);
    }

    #[test]
    fn xu_examples() {
        assert_eq!(xu_sigma(&id(), &zero(), 1, 0).unwrap(), 4);
        assert_eq!(xu_sigma(&id(), &zero(), 1, 1).unwrap(), 4);
        for k in 0..20 {
            assert_eq!(xu_sigma(&zero(), &id(), 7, k).unwrap(), 1);
        }
        assert_eq!(xu_sigma_tilde(&id(), &NatRate::Constant(1), &zero(), 1, 0).unwrap(), 3);
        assert_eq!(xu_sigma_tilde(&zero(), &NatRate::Constant(1), &zero(), 1, 0).unwrap(), 2);
    }

    #[test]
    fn divergence_table_and_exhaustion() {
        let t = divergence_rate_table(|_| 1.0, 10);
        assert_eq!(t.tabulate(5).unwrap(), vec![0, 0, 1, 2, 3, 4]);
        assert_eq!(t.eval(12), Err(Error::DomainExhausted { arg: 12, len: 12, floor: Some(11) }));
        let chi0 = NatRate::Constant(0);
        // ⌈ln 6·51⌉ = 6, so Σ(50) = σ₁(8) + 1.
        assert_eq!(sigma_c1_bound(&t, &chi0, 1, 50).unwrap(), RateBound::Exact(8));
        // ⌈ln 6·2001⌉ = 10 runs past the table.
        assert_eq!(sigma_c1_bound(&t, &chi0, 1, 2000).unwrap(), RateBound::AtLeast(12));
    }
}
