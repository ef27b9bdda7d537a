//! Empirical checks of rates and inequalities against recorded traces, and a
//! harness for the quantitative Xu lemma on explicit sequences.

use crate::error::{Error, Result};
use crate::iteration::{IterationTrace, Scenario, StepRecord};
use crate::rates::{self, NatRate, NeumaierSum, Nat};
use crate::report::{CheckEntry, MarginTracker, ValidationReport, Witness};

/// Default stride between sampled indices past `rate(k)`.
pub const DEFAULT_STRIDE: usize = 97;
/// Default absolute slack.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// The distance sequence a rate is claimed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `d(x_n, x_{n+1})`
    StepGap,
    /// `d(x_n, T x_n)`
    TGap,
}

impl Quantity {
    pub fn of(self, r: &StepRecord) -> f64 {
        match self {
            Quantity::StepGap => r.step_gap,
            Quantity::TGap => r.t_gap,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quantity::StepGap => "step_gap",
            Quantity::TGap => "t_gap",
        }
    }
}

fn threshold(k: Nat) -> f64 {
    1.0 / (k as f64 + 1.0)
}

/// Checks `q_n <= 1/(k+1) + slack` at `n = rate(k)` and then every `stride`
/// indices up to the last recorded one (which is always included), for every
/// `k <= k_max`. `stride = 1` checks every index.
pub fn validate_rate(
    trace: &IterationTrace,
    rate: &NatRate,
    quantity: Quantity,
    k_max: Nat,
    slack: f64,
    stride: usize,
) -> Result<ValidationReport> {
    let horizon = trace.horizon();
    let stride = stride.max(1);
    let starts = rate.tabulate(k_max)?;
    if let Some((k, &r)) = starts.iter().enumerate().max_by_key(|(_, &r)| r) {
        if r >= horizon as Nat {
            return Err(Error::HorizonExceeded {
                what: format!("{} rate at k={k}", quantity.label()),
                required: r + 1,
                horizon,
            });
        }
    }
    let mut t = MarginTracker::new();
    for (k, &start) in starts.iter().enumerate() {
        let start = start as usize;
        let bound = threshold(k as Nat);
        let mut check = |n: usize| t.observe(quantity.of(&trace.records[n]), bound, slack, Some(n as Nat), Some(k as Nat));
        let mut n = start;
        while n < horizon {
            check(n);
            n += stride;
        }
        if (horizon - 1 - start) % stride != 0 {
            check(horizon - 1);
        }
    }
    let mut report = ValidationReport::new();
    let note = format!("k <= {k_max}, stride {stride}, horizon {horizon}");
    report.push(t.finish(format!("rate bound {}", quantity.label()), "asymptotic regularity").with_note(note));
    Ok(report)
}

/// Least `n` with `q_m <= 1/(k+1)` for every recorded `m >= n`.
pub fn first_hit(trace: &IterationTrace, quantity: Quantity, k: Nat) -> Option<usize> {
    let bound = threshold(k);
    let mut hit = None;
    for (n, r) in trace.records.iter().enumerate().rev() {
        if quantity.of(r) > bound {
            break;
        }
        hit = Some(n);
    }
    hit
}

/// Evaluates the orbit inequalities at every step of the trace. Checks that
/// involve `M` are skipped when the trace has no fixed point.
pub fn check_trace_inequalities(trace: &IterationTrace, slack: f64) -> ValidationReport {
    let rec = &trace.records;
    let (lam, beta) = (&trace.lambdas, &trace.betas);
    let h = rec.len();
    let family = "orbit inequality";
    let mut report = ValidationReport::new();

    let mut dxnyn = MarginTracker::new();
    let mut dxn_txn = MarginTracker::new();
    for (n, r) in rec.iter().enumerate() {
        let (l, b) = (lam[n], beta[n]);
        let nn = Some(n as Nat);
        // Two-sided identity, checked as |lhs - rhs| <= slack.
        dxnyn.observe((r.x_y - (1.0 - b) * r.x_u).abs(), 0.0, slack, nn, None);
        let rhs = r.step_gap + l * (1.0 - b) * r.x_u + (1.0 - l) * b * r.t_gap + (1.0 - l) * (1.0 - b) * r.u_tx;
        dxn_txn.observe(r.t_gap, rhs, slack, nn, None);
    }

    let Some(m) = trace.m_bound else {
        for name in ["consecutive anchor points", "consecutive iterates"] {
            report.push(CheckEntry::skipped(name, family, "not checked: no fixed point"));
        }
        report.push(dxnyn.finish("anchor distance identity", family));
        report.push(dxn_txn.finish("T-gap decomposition", family));
        for name in ["T-gap from step gap", "distance to fixed point recursion", "orbit bounded", "anchor points bounded"] {
            report.push(CheckEntry::skipped(name, family, "not checked: no fixed point"));
        }
        return report;
    };
    let d_u_p = trace.d_u_p.unwrap_or(0.0);

    let mut dyn_cons = MarginTracker::new();
    let mut dxn_cons = MarginTracker::new();
    let mut useful = MarginTracker::new();
    let mut lemma1 = MarginTracker::new();
    let mut lemma2 = MarginTracker::new();
    let mut lemma3 = MarginTracker::new();
    for (n, r) in rec.iter().enumerate() {
        let (l, b) = (lam[n], beta[n]);
        let (db, dl) = ((beta[n + 1] - b).abs(), (lam[n + 1] - l).abs());
        let nn = Some(n as Nat);
        dyn_cons.observe(r.y_gap, beta[n + 1] * r.step_gap + 2.0 * m * db, slack, nn, None);
        if n + 1 < h {
            dxn_cons.observe(rec[n + 1].step_gap, beta[n + 1] * r.step_gap + 2.0 * m * (db + dl), slack, nn, None);
        }
        useful.observe(l * r.t_gap, r.step_gap + 2.0 * m * (1.0 - b), slack, nn, None);
        if let (Some(xp), Some(next_xp), Some(yp)) = (r.x_p, r.next_x_p, r.y_p) {
            lemma1.observe(next_xp, (1.0 - b) * d_u_p + b * xp, slack, nn, None);
            lemma2.observe(xp, m, slack, nn, None);
            lemma2.observe(r.x_u, 2.0 * m, slack, nn, None);
            lemma3.observe(yp, m, slack, nn, None);
            lemma3.observe(r.y_ty, 2.0 * m, slack, nn, None);
        }
    }
    report.push(dyn_cons.finish("consecutive anchor points", family));
    report.push(dxn_cons.finish("consecutive iterates", family));
    report.push(dxnyn.finish("anchor distance identity", family));
    report.push(dxn_txn.finish("T-gap decomposition", family));
    report.push(useful.finish("T-gap from step gap", family));
    report.push(lemma1.finish("distance to fixed point recursion", family));
    report.push(lemma2.finish("orbit bounded", family));
    report.push(lemma3.finish("anchor points bounded", family));
    report
}

/// How the sequence `(s_n)` of a Xu instance is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum XuSequence {
    /// `s_{n+1} = (1 - a_n)s_n + c_n` with equality.
    Recurrence { s0: f64 },
    /// Given values; the recurrence is checked as an inequality.
    Observed(Vec<f64>),
}

/// Data for `s_{n+1} <= (1 - a_n)s_n + c_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct XuInstance {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub s: XuSequence,
    /// `L >= s_n` for all n.
    pub upper: Nat,
    /// Cauchy modulus of `Σ c_n`.
    pub chi: NatRate,
    /// Rate of divergence of `Σ a_n`.
    pub theta: Option<NatRate>,
    /// Rate of convergence of `A_n = ∏_{i<=n}(1 - a_i)` to 0.
    pub gamma: Option<NatRate>,
    /// `1/δ₀(k) <= A_{χ(3k+2)}`.
    pub delta0: Option<NatRate>,
}

impl XuInstance {
    /// Largest horizon the sequences support.
    pub fn max_horizon(&self) -> usize {
        let n = self.a.len().min(self.c.len());
        match &self.s {
            XuSequence::Recurrence { .. } => n,
            XuSequence::Observed(s) => n.min(s.len().saturating_sub(1)),
        }
    }

    /// `s_0..=s_horizon`.
    pub fn sequence(&self, horizon: usize) -> Vec<f64> {
        match &self.s {
            XuSequence::Recurrence { s0 } => {
                let mut s = Vec::with_capacity(horizon + 1);
                s.push(*s0);
                for n in 0..horizon {
                    s.push((1.0 - self.a[n]) * s[n] + self.c[n]);
                }
                s
            }
            XuSequence::Observed(s) => s[..=horizon].to_vec(),
        }
    }
}

fn precondition(check: &str, w: Witness) -> Error {
    Error::Precondition { check: check.to_string(), witness: w }
}

/// Runs one precondition tracker and turns a failure into an error.
fn require(report: &mut ValidationReport, t: MarginTracker, name: &str) -> Result<()> {
    let entry = t.finish(name, "xu precondition");
    if entry.status == crate::report::Status::Fail {
        let w = entry.witness.unwrap_or(Witness { n: None, k: None, lhs: f64::NAN, rhs: f64::NAN });
        return Err(precondition(name, w));
    }
    report.push(entry);
    Ok(())
}

fn eval_or_precondition(rate: &NatRate, arg: Nat, name: &str) -> Result<Nat> {
    rate.eval(arg).map_err(|e| match e {
        Error::DomainExhausted { arg, floor, .. } => precondition(
            name,
            Witness { n: floor, k: Some(arg), lhs: f64::NAN, rhs: f64::NAN },
        ),
        other => other,
    })
}

/// Validates the instance's moduli on `0..=horizon`, then checks
/// `s_n <= 1/(k+1) + slack` for `rate(k) <= n <= horizon` for each branch whose
/// moduli are present. Invalid moduli give [`Error::Precondition`].
pub fn xu_harness(inst: &XuInstance, horizon: usize, k_max: Nat, slack: f64) -> Result<ValidationReport> {
    if horizon > inst.max_horizon() {
        return Err(Error::HorizonExceeded {
            what: "xu instance sequences".into(),
            required: horizon as Nat,
            horizon: inst.max_horizon(),
        });
    }
    if inst.upper == 0 {
        return Err(Error::input("L must be >= 1"));
    }
    let mut report = ValidationReport::new();
    let (a, c) = (&inst.a[..horizon], &inst.c[..horizon]);
    let s = inst.sequence(horizon);

    let mut ta = MarginTracker::new();
    for (n, &v) in a.iter().enumerate() {
        // a_n in [0,1]: distance from the interval must vanish.
        let out = (-v).max(v - 1.0).max(0.0);
        ta.observe(if v.is_nan() { f64::NAN } else { out }, 0.0, 0.0, Some(n as Nat), None);
    }
    require(&mut report, ta, "a in [0,1]")?;
    let mut tc = MarginTracker::new();
    for (n, &v) in c.iter().enumerate() {
        tc.observe(-v, 0.0, 0.0, Some(n as Nat), None);
    }
    require(&mut report, tc, "c nonnegative")?;
    let mut ts = MarginTracker::new();
    for (n, &v) in s.iter().enumerate() {
        ts.observe(v, inst.upper as f64, slack, Some(n as Nat), None);
        ts.observe(-v, 0.0, slack, Some(n as Nat), None);
    }
    require(&mut report, ts, "s bounded by L")?;
    if let XuSequence::Observed(_) = inst.s {
        let mut tr = MarginTracker::new();
        for n in 0..horizon {
            tr.observe(s[n + 1], (1.0 - a[n]) * s[n] + c[n], slack, Some(n as Nat), None);
        }
        require(&mut report, tr, "recurrence")?;
    }

    // χ: the partial sums of c are nondecreasing, so the worst tail from
    // χ(j) inside the horizon is c̃_last - c̃_{χ(j)}.
    let mut prefix = Vec::with_capacity(c.len());
    let mut sum = NeumaierSum::default();
    for &v in c {
        sum.add(v);
        prefix.push(sum.value());
    }
    let mut tchi = MarginTracker::new();
    let j_max = 3 * k_max + 2;
    for j in 0..=j_max {
        let n0 = eval_or_precondition(&inst.chi, j, "chi Cauchy modulus")?;
        if let (Some(&last), Some(&at)) = (prefix.last(), usize::try_from(n0).ok().and_then(|i| prefix.get(i))) {
            tchi.observe(last - at, threshold(j), slack, Some(n0), Some(j));
        }
    }
    if tchi.observed() > 0 {
        require(&mut report, tchi, "chi Cauchy modulus")?;
    }

    let upper = inst.upper;
    let mut branches: Vec<(&str, NatRate)> = Vec::new();

    if let Some(theta) = &inst.theta {
        let mut pa = Vec::with_capacity(a.len());
        let mut sum = NeumaierSum::default();
        for &v in a {
            sum.add(v);
            pa.push(sum.value());
        }
        let mut n_max = 0;
        for k in 0..=k_max {
            let what = "xu theta argument";
            let arg = inst.chi.eval(3 * k + 2)?;
            let l = rates::ceil_ln(upper.checked_mul(3 * (k + 1)).ok_or_else(|| Error::overflow(what))?)?;
            n_max = n_max.max(arg.checked_add(1 + l).ok_or_else(|| Error::overflow(what))?);
        }
        let mut tt = MarginTracker::new();
        for n in 0..=n_max {
            let m = eval_or_precondition(theta, n, "theta divergence")?;
            if let Some(&sum) = usize::try_from(m).ok().and_then(|i| pa.get(i)) {
                tt.observe(n as f64, sum, slack, Some(m), Some(n));
            }
        }
        if tt.observed() > 0 {
            require(&mut report, tt, "theta divergence")?;
        }
        branches.push(("xu rate Sigma", NatRate::XuSigma { theta: Box::new(theta.clone()), chi: Box::new(inst.chi.clone()), upper }));
    } else {
        report.push(CheckEntry::skipped("xu rate Sigma", "xu rate", "theta not supplied"));
    }

    if let (Some(gamma), Some(delta0)) = (&inst.gamma, &inst.delta0) {
        let mut tl = MarginTracker::new();
        for (n, &v) in a.iter().enumerate() {
            tl.observe(v, 1.0, -f64::EPSILON / 2.0, Some(n as Nat), None);
        }
        require(&mut report, tl, "a below 1")?;
        // A_n in log space.
        let mut log_a = Vec::with_capacity(a.len());
        let mut acc = NeumaierSum::default();
        for &v in a {
            acc.add((-v).ln_1p());
            log_a.push(acc.value());
        }
        let prod = |i: usize| log_a[i].exp();
        let mut tg = MarginTracker::new();
        let mut td = MarginTracker::new();
        for k in 0..=k_max {
            let d = eval_or_precondition(delta0, k, "delta0 bound")?;
            if d == 0 {
                return Err(precondition("delta0 bound", Witness { n: None, k: Some(k), lhs: 0.0, rhs: 1.0 }));
            }
            let at = inst.chi.eval(3 * k + 2)?;
            if let Some(i) = usize::try_from(at).ok().filter(|&i| i < a.len()) {
                td.observe(1.0 / d as f64, prod(i), slack, Some(at), Some(k));
            }
            // γ is checked at every argument the rate formula feeds it.
            let what = "xu gamma argument";
            let arg = upper
                .checked_mul(3 * (k + 1))
                .and_then(|v| v.checked_mul(d))
                .ok_or_else(|| Error::overflow(what))?
                - 1;
            let g = eval_or_precondition(gamma, arg, "gamma product rate")?;
            if let Some(i) = usize::try_from(g).ok().filter(|&i| i < a.len()) {
                tg.observe(prod(i), threshold(arg), slack, Some(g), Some(arg));
            }
        }
        if td.observed() > 0 {
            require(&mut report, td, "delta0 bound")?;
        }
        if tg.observed() > 0 {
            require(&mut report, tg, "gamma product rate")?;
        }
        branches.push((
            "xu rate Sigma-tilde",
            NatRate::XuSigmaTilde {
                gamma: Box::new(gamma.clone()),
                delta0: Box::new(delta0.clone()),
                chi: Box::new(inst.chi.clone()),
                upper,
            },
        ));
    } else {
        report.push(CheckEntry::skipped("xu rate Sigma-tilde", "xu rate", "gamma/delta0 not supplied"));
    }

    for (name, rate) in branches {
        let mut t = MarginTracker::new();
        let mut beyond = 0usize;
        for k in 0..=k_max {
            let start = rate.eval(k)?;
            match usize::try_from(start).ok().filter(|&n| n <= horizon) {
                Some(start) => {
                    for (n, &v) in s.iter().enumerate().skip(start) {
                        t.observe(v, threshold(k), slack, Some(n as Nat), Some(k));
                    }
                }
                None => beyond += 1,
            }
        }
        let mut entry = t.finish(name, "xu rate");
        if beyond > 0 {
            entry = entry.with_note(format!("{beyond} levels with rate beyond horizon (vacuous)"));
        }
        report.push(entry);
    }
    Ok(report)
}

/// The instance the asymptotic-regularity proof feeds to the Xu lemma:
/// `a_n = 1 - β_{n+1}`, `c_n = 2M(|β_{n+1}-β_n| + |λ_{n+1}-λ_n|)`,
/// `s_n = d(x_n, x_{n+1})`, `L = 2K`. Returns the instance and the largest
/// usable horizon.
pub fn xu_instance_from_trace(scenario: &Scenario, trace: &IterationTrace) -> Result<(XuInstance, usize)> {
    let m = trace.m_bound.ok_or_else(|| Error::input("the Xu instantiation needs a known fixed point"))?;
    let h = trace.horizon();
    let a: Vec<f64> = (0..h).map(|n| scenario.beta.complement(n + 1)).collect();
    let c: Vec<f64> = (0..h)
        .map(|n| 2.0 * m * (scenario.beta.abs_diff(n) + scenario.lambda.abs_diff(n)))
        .collect();
    let s: Vec<f64> = trace.records.iter().map(|r| r.step_gap).collect();
    let bundle = &scenario.bundle;
    let upper = bundle.k_bound.value.checked_mul(2).ok_or_else(|| Error::overflow("L = 2K"))?;
    let inst = XuInstance {
        a,
        c,
        s: XuSequence::Observed(s),
        upper,
        chi: bundle.chi_rate(),
        theta: bundle.sigma1.clone().map(|s1| NatRate::ThetaFromSigma1(Box::new(s1))),
        gamma: bundle.sigma2.clone(),
        delta0: bundle.psi0.clone(),
    };
    let usable = inst.max_horizon();
    Ok((inst, usable))
}
