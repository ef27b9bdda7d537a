use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tkm_core::geometry::check_axioms;
use tkm_core::iteration::{run_trace_with, TraceOptions};
use tkm_core::operators::check_nonexpansive;
use tkm_core::rates::{self, Nat, NatRate, RateBound, Sigma5Argument};
use tkm_core::report::{CheckEntry, Status};
use tkm_core::schedule::validate_moduli;
use tkm_core::verify::{self, first_hit, Quantity};
use tkm_core::{scenarios, Error as CoreError, IterationTrace, ValidationReport};

use crate::config::{self, Loaded, RunSpec};
use crate::error::CliError;
use crate::output::{real, series, write_atomic};

/// Settings shared by every command after flags override the file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub loaded: Loaded,
    pub variant: Sigma5Argument,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub horizon: Option<usize>,
    pub k_max: Option<u64>,
    pub slack: Option<f64>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
}

pub fn load(config: Option<&Path>, scenario: Option<&str>, o: &Overrides) -> Result<Loaded, CliError> {
    let mut loaded = match (config, scenario) {
        (Some(path), _) => config::load(path)?,
        (None, name) => {
            let name = name.unwrap_or("rotation");
            let sc = scenarios::by_name(name)
                .ok_or_else(|| CliError::Config(format!("unknown scenario {name:?}; known: {}", scenarios::NAMES.join(", "))))??;
            let corollary_lambda = (name != "zero-beta").then_some(0.5);
            Loaded { scenario: sc, run: RunSpec::default(), corollary_lambda }
        }
    };
    let run = &mut loaded.run;
    if let Some(h) = o.horizon {
        run.horizon = h;
    }
    if let Some(k) = o.k_max {
        run.k_max = k;
    }
    if let Some(s) = o.slack {
        run.slack = s;
    }
    if let Some(s) = o.stride {
        run.stride = s;
    }
    if let Some(s) = o.seed {
        run.seed = s;
    }
    if run.horizon == 0 {
        return Err(CliError::Config("run.horizon: must be >= 1".into()));
    }
    if !(run.slack >= 0.0) {
        return Err(CliError::Config("run.slack: must be >= 0".into()));
    }
    if run.stride == 0 {
        return Err(CliError::Config("run.stride: must be >= 1".into()));
    }
    Ok(loaded)
}

fn trace_of(s: &Settings) -> Result<IterationTrace, CliError> {
    let run = &s.loaded.run;
    Ok(run_trace_with(&s.loaded.scenario, run.horizon, TraceOptions { point_stride: run.point_stride.max(1) })?)
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::from("n,d_xn_xnp1,d_xn_Txn,d_xn_yn,d_xn_u,d_xn_p,lambda_n,beta_n\n");
    for (n, r) in trace.records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{n},{},{},{},{},{},{},{}",
            real(r.step_gap),
            real(r.t_gap),
            real(r.x_y),
            real(r.x_u),
            opt_real(r.x_p),
            real(trace.lambdas[n]),
            real(trace.betas[n]),
        );
    }
    out
}

pub fn run(s: &Settings) -> Result<String, CliError> {
    let trace = trace_of(s)?;
    if let Some(dir) = &s.out {
        write_atomic(dir, "trace.csv", &trace_csv(&trace))?;
        write_atomic(dir, "step_gap.csv", &series("d_xn_xnp1", trace.records.iter().map(|r| r.step_gap)))?;
        write_atomic(dir, "t_gap.csv", &series("d_xn_Txn", trace.records.iter().map(|r| r.t_gap)))?;
    }
    let last = trace.records.last().expect("horizon >= 1");
    let mut text = String::new();
    let _ = writeln!(text, "horizon = {}", trace.horizon());
    let _ = writeln!(text, "M = {}", trace.m_bound.map(real).unwrap_or_else(|| "unknown".into()));
    let _ = writeln!(text, "K = {} ({:?})", trace.k_bound.value, trace.k_bound.source);
    let _ = writeln!(text, "final d(x_n, x_n+1) = {}", real(last.step_gap));
    let _ = writeln!(text, "final d(x_n, T x_n) = {}", real(last.t_gap));
    Ok(text)
}

fn cell(r: Result<Nat, CoreError>, k: Nat) -> Result<String, CliError> {
    match r {
        Ok(v) => Ok(v.to_string()),
        Err(e @ CoreError::Overflow(_)) => Err(CliError::Rate { k, source: e }),
        Err(CoreError::DomainExhausted { floor: Some(f), .. }) => Ok(format!(">={f}")),
        Err(e) => Err(CliError::Rate { k, source: e }),
    }
}

fn bound_cell(r: Result<RateBound, CoreError>, k: Nat) -> Result<String, CliError> {
    r.map(|b| b.to_string()).map_err(|e| CliError::Rate { k, source: e })
}

/// Θ* on top of Σ when Σ may only be known as a lower bound.
fn phi_divergence(s: &Settings, k: Nat) -> Result<Option<RateBound>, CoreError> {
    let b = &s.loaded.scenario.bundle;
    let (Some(sigma1), Some((big, n_lambda)), Some(sigma5)) = (&b.sigma1, b.lambda_floor, &b.sigma5) else {
        return Ok(None);
    };
    let arg = big
        .checked_mul(2)
        .and_then(|v| v.checked_mul(k + 1))
        .ok_or_else(|| CoreError::Overflow("phi argument".into()))?
        - 1;
    let theta = rates::sigma_c1_bound(sigma1, &b.chi_rate(), b.k_bound.value, arg)?;
    let v = rates::phi_from_rate(&NatRate::Constant(theta.lower()), n_lambda, big, sigma5, b.k_bound.value, k, s.variant)?;
    Ok(Some(match theta {
        RateBound::Exact(_) => RateBound::Exact(v),
        RateBound::AtLeast(_) => RateBound::AtLeast(v),
    }))
}

/// Rate table: `product` columns use the product hypothesis on β, `closed`
/// the closed forms for constant λ and harmonic β, `divergence` the
/// divergence hypothesis (printed as `>=N` when only a lower bound is known).
pub fn rates(s: &Settings) -> Result<String, CliError> {
    let b = &s.loaded.scenario.bundle;
    let kb = b.k_bound.value;
    let sigma_tilde = b.sigma_tilde_rate();
    let phi_tilde = sigma_tilde.clone().and_then(|st| b.t_rate(st, s.variant));
    let closed = s.loaded.corollary_lambda;
    let divergence = b.sigma1.is_some();

    let mut header = vec!["k"];
    if sigma_tilde.is_some() {
        header.push("sigma_product");
    }
    if phi_tilde.is_some() {
        header.push("phi_product");
    }
    if closed.is_some() {
        header.extend(["sigma_closed", "phi_closed"]);
    }
    if divergence {
        header.push("sigma_divergence");
        if b.lambda_floor.is_some() && b.sigma5.is_some() {
            header.push("phi_divergence");
        }
    }
    let mut out = header.join(",") + "\n";
    for k in 0..=s.loaded.run.k_max as Nat {
        let mut row = vec![k.to_string()];
        if let Some(r) = &sigma_tilde {
            row.push(cell(r.eval(k), k)?);
        }
        if let Some(r) = &phi_tilde {
            row.push(cell(r.eval(k), k)?);
        }
        if let Some(l) = closed {
            row.push(cell(rates::corollary_sigma0(kb, k), k)?);
            row.push(cell(rates::corollary_phi0(kb, l, k), k)?);
        }
        if let Some(sigma1) = &b.sigma1 {
            row.push(bound_cell(rates::sigma_c1_bound(sigma1, &b.chi_rate(), kb, k), k)?);
            if let Some(p) = phi_divergence(s, k).map_err(|e| CliError::Rate { k, source: e })? {
                row.push(p.to_string());
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    if let Some(dir) = &s.out {
        write_atomic(dir, "rates.csv", &out)?;
    }
    Ok(out)
}

/// Largest `k <= k_max` whose rate value fits inside the horizon.
fn fitting_k(rate: &NatRate, k_max: Nat, horizon: usize) -> Result<Option<Nat>, CoreError> {
    let mut best = None;
    for k in 0..=k_max {
        match rate.eval(k) {
            Ok(v) if v < horizon as Nat => best = Some(k),
            Ok(_) | Err(CoreError::DomainExhausted { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

fn rate_checks(s: &Settings, trace: &IterationTrace, report: &mut ValidationReport, stride: usize) -> Result<(), CliError> {
    let b = &s.loaded.scenario.bundle;
    let run = &s.loaded.run;
    let step_rate = b.sigma_tilde_rate().or_else(|| b.sigma_rate());
    let Some(step_rate) = step_rate else {
        report.push(CheckEntry::skipped("rate bound step_gap", "asymptotic regularity", "no rate available"));
        report.push(CheckEntry::skipped("rate bound t_gap", "asymptotic regularity", "no rate available"));
        return Ok(());
    };
    let t_rate = b.t_rate(step_rate.clone(), s.variant);
    let pairs = [(Quantity::StepGap, Some(step_rate.clone())), (Quantity::TGap, t_rate)];
    for (q, rate) in pairs {
        let name = format!("rate bound {}", q.label());
        let Some(rate) = rate else {
            report.push(CheckEntry::skipped(name, "asymptotic regularity", "no rate available"));
            continue;
        };
        let k_max = run.k_max as Nat;
        match fitting_k(&rate, k_max, trace.horizon())? {
            None => {
                let why = format!("rate(0) does not fit in horizon {}", trace.horizon());
                report.push(CheckEntry::skipped(name, "asymptotic regularity", why));
            }
            Some(k) => {
                report.extend(verify::validate_rate(trace, &rate, q, k, run.slack, stride)?);
                if k < k_max {
                    report.note(format!("{}: k clamped from {k_max} to {k} to fit the horizon", q.label()));
                }
                let r0 = rate.eval(0)?;
                let hit = first_hit(trace, q, 0).map_or("none".to_string(), |n| n.to_string());
                report.note(format!("{}: rate(0) = {r0}, empirical first hit = {hit}", q.label()));
            }
        }
    }
    if s.variant == Sigma5Argument::Literal {
        let sound = b.t_rate(step_rate.clone(), Sigma5Argument::Sound);
        let literal = b.t_rate(step_rate, Sigma5Argument::Literal);
        if let (Some(sound), Some(literal)) = (sound, literal) {
            for k in 0..=run.k_max as Nat {
                let (a, l) = (sound.eval(k)?, literal.eval(k)?);
                report.note(format!("phi variants k={k}: sound={a} literal={l}{}", if a == l { "" } else { " (differ)" }));
            }
        }
    }
    Ok(())
}

pub fn validate(s: &Settings, full_density: bool) -> Result<(String, bool), CliError> {
    let sc = &s.loaded.scenario;
    let run = &s.loaded.run;
    let checks = run.checks;
    let mut report = ValidationReport::new();
    if checks.moduli {
        report.extend(validate_moduli(&sc.bundle, &sc.lambda, &sc.beta, run.horizon, run.k_max as Nat, run.slack)?);
    }
    if checks.axioms {
        report.extend(check_axioms(&sc.space, run.samples, run.seed, run.slack)?);
    }
    if checks.nonexpansive {
        report.extend(check_nonexpansive(&sc.space, &sc.map, run.samples, run.seed, run.slack)?);
    }
    let trace = trace_of(s)?;
    if checks.inequalities {
        report.extend(verify::check_trace_inequalities(&trace, run.slack));
    }
    if checks.rates {
        let stride = if full_density { 1 } else { run.stride };
        rate_checks(s, &trace, &mut report, stride)?;
    }
    if checks.xu && trace.m_bound.is_some() {
        let (mut inst, h) = verify::xu_instance_from_trace(sc, &trace)?;
        // A tabulated σ₁ that cannot reach the arguments of the divergence
        // branch says nothing about validity; run the other branch only.
        if let Some(theta) = &inst.theta {
            let sigma = NatRate::XuSigma { theta: Box::new(theta.clone()), chi: Box::new(inst.chi.clone()), upper: inst.upper };
            if let Err(CoreError::DomainExhausted { arg, .. }) = sigma.tabulate(run.k_max as Nat) {
                report.note(format!("xu divergence branch not run: theta table ends before argument {arg}"));
                inst.theta = None;
            }
        }
        match verify::xu_harness(&inst, h, run.k_max as Nat, run.slack) {
            Ok(r) => report.extend(r),
            Err(CoreError::Precondition { check, witness }) => report.push(CheckEntry {
                name: format!("xu precondition {check}"),
                family: "xu precondition".into(),
                status: Status::Fail,
                worst_margin: witness.lhs - witness.rhs,
                witness: Some(witness),
                note: None,
            }),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(dir) = &s.out {
        write_atomic(dir, "report.txt", &report.to_text())?;
        write_atomic(dir, "report.csv", &report.to_csv())?;
    }
    Ok((report.to_text(), report.passed()))
}

/// Pipeline-versus-closed-form equality over `k <= k_max`.
pub fn compare(s: &Settings) -> Result<(String, bool), CliError> {
    let b = &s.loaded.scenario.bundle;
    let kb = b.k_bound.value;
    let upper = kb.checked_mul(2).ok_or_else(|| CoreError::Overflow("L = 2K".into()))?;
    let chi = b.chi_rate();
    let k_max = s.loaded.run.k_max as Nat;
    let mut report = ValidationReport::new();

    let mut pairs: Vec<(&str, Box<dyn Fn(Nat) -> Result<(Nat, Nat), CoreError> + '_>)> = Vec::new();
    if let (Some(s2), Some(psi0)) = (&b.sigma2, &b.psi0) {
        let chi = chi.clone();
        pairs.push((
            "product rate equals xu product rate",
            Box::new(move |k| Ok((rates::sigma_tilde_c2(s2, psi0, &chi, kb, k)?, rates::xu_sigma_tilde(s2, psi0, &chi, upper, k)?))),
        ));
    }
    if let Some(s1) = &b.sigma1 {
        let chi = chi.clone();
        let theta = NatRate::ThetaFromSigma1(Box::new(s1.clone()));
        pairs.push((
            "divergence rate equals xu divergence rate",
            Box::new(move |k| Ok((rates::sigma_c1(s1, &chi, kb, k)?, rates::xu_sigma(&theta, &chi, upper, k)?))),
        ));
    }
    if let (Some(l), Some(st)) = (s.loaded.corollary_lambda, b.sigma_tilde_rate()) {
        let big = config::corollary_lambda_bound(l)?;
        let st2 = st.clone();
        pairs.push(("closed form sigma", Box::new(move |k| Ok((rates::corollary_sigma0(kb, k)?, st.eval(k)?)))));
        let variant = s.variant;
        pairs.push((
            "closed form phi",
            Box::new(move |k| {
                let closed = rates::corollary_phi0(kb, l, k)?;
                Ok((closed, rates::phi_from_rate(&st2, 0, big, &NatRate::Identity, kb, k, variant)?))
            }),
        ));
    }
    for (name, f) in pairs {
        let mut mismatch = None;
        let mut exhausted = 0usize;
        for k in 0..=k_max {
            match f(k) {
                Ok((a, b)) if a != b && mismatch.is_none() => mismatch = Some((k, a, b)),
                Ok(_) => {}
                Err(CoreError::DomainExhausted { .. }) => exhausted += 1,
                Err(e) => return Err(CliError::Rate { k, source: e }),
            }
        }
        let mut entry = match mismatch {
            None => CheckEntry {
                name: name.into(),
                family: "rate identity".into(),
                status: if exhausted as Nat > k_max { Status::Skipped } else { Status::Pass },
                worst_margin: 0.0,
                witness: None,
                note: None,
            },
            Some((k, a, b)) => CheckEntry {
                name: name.into(),
                family: "rate identity".into(),
                status: Status::Fail,
                worst_margin: a as f64 - b as f64,
                witness: Some(tkm_core::Witness { n: None, k: Some(k), lhs: a as f64, rhs: b as f64 }),
                note: None,
            },
        };
        if exhausted > 0 {
            entry = entry.with_note(format!("{exhausted} levels outside the tabulated domain"));
        }
        report.push(entry);
    }
    report.note(format!("k <= {k_max}, K = {kb}"));
    if let Some(dir) = &s.out {
        write_atomic(dir, "compare.txt", &report.to_text())?;
    }
    Ok((report.to_text(), report.passed()))
}
