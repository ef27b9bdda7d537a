//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use tkm_core::geometry::{check_axioms, check_segment_identities};
use tkm_core::iteration::{check_modified_mann_equivalence, run_trace, run_trace_with, TraceOptions};
use tkm_core::rates::{self, Nat, NatRate, RateBound, Sigma5Argument};
use tkm_core::schedule::{numeric_sigma1, KBound, ModuliBundle, ScalarSchedule};
use tkm_core::verify::{self, validate_rate, xu_harness, Quantity, XuInstance, XuSequence};
use tkm_core::{scenarios, Error, SpaceHandle, SpacePoint, Status};

/// Absolute slack on every distance bound.
const SLACK: f64 = 1e-9;
/// Maximum per-step deviation in the modified-Mann comparison.
const MANN_DEVIATION: f64 = 1e-12;
/// Maximum axiom violation.
const AXIOM_VIOLATION: f64 = 1e-9;
const AXIOM_SAMPLES: usize = 10_000;
const AXIOM_SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c1_step_gap_rate() -> Outcome {
    let started = Instant::now();
    let sc = scenarios::rotation_corollary(0.5).map_err(|e| e.to_string())?;
    ensure(sc.bundle.k_bound.value == 1, || "K != 1".into())?;
    let trace = run_trace(&sc, 100_000).map_err(|e| e.to_string())?;
    let sigma0 = NatRate::CorollarySigma0 { k_bound: 1 };
    for k in 0..=15u128 {
        let expected = 144 * (k + 1) * (k + 1) + 6 * (k + 1);
        ensure(sigma0.eval(k) == Ok(expected), || format!("Sigma0({k}) != {expected}"))?;
    }
    let r = validate_rate(&trace, &sigma0, Quantity::StepGap, 15, SLACK, verify::DEFAULT_STRIDE).map_err(|e| e.to_string())?;
    ensure(r.passed(), || r.to_text())?;
    within(started, Duration::from_secs(10), "criterion 1")?;
    Ok(format!("k <= 15, horizon 1e5, worst margin {:.3e}", r.entries[0].worst_margin))
}

fn c2_t_gap_rate() -> Outcome {
    let started = Instant::now();
    let sc = scenarios::rotation_corollary(0.5).map_err(|e| e.to_string())?;
    let trace = run_trace_with(&sc, 300_000, TraceOptions { point_stride: 100_000 }).map_err(|e| e.to_string())?;
    let phi0 = NatRate::CorollaryPhi0 { k_bound: 1, lambda_bound: 2 };
    for k in 0..=10u128 {
        let expected = 2304 * (k + 1) * (k + 1) + 24 * (k + 1);
        ensure(phi0.eval(k) == Ok(expected), || format!("Phi0({k}) != {expected}"))?;
    }
    let r = validate_rate(&trace, &phi0, Quantity::TGap, 10, SLACK, verify::DEFAULT_STRIDE).map_err(|e| e.to_string())?;
    ensure(r.passed(), || r.to_text())?;
    within(started, Duration::from_secs(30), "criterion 2")?;
    Ok(format!("k <= 10, horizon 3e5, worst margin {:.3e}", r.entries[0].worst_margin))
}

fn c3_rate_table() -> Outcome {
    let config = workspace_root().join("configs/rotation.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_tkm"))
        .args(["rates", "--kmax", "2", "--config"])
        .arg(&config)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr)))?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("missing column {name}"));
    let (sc, pc) = (col("sigma_closed")?, col("phi_closed")?);
    let (sp, pp) = (col("sigma_product")?, col("phi_product")?);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    ensure(rows.len() == 3, || format!("expected 3 rows, got {}", rows.len()))?;
    let want = [("0", "150", "2328"), ("1", "588", "9264")];
    for (row, (k, s, p)) in rows.iter().zip(want) {
        ensure(row[0] == k && row[sc] == s && row[sp] == s, || format!("sigma row {row:?}"))?;
        ensure(row[pc] == p && row[pp] == p, || format!("phi row {row:?}"))?;
    }
    Ok("Sigma0(0)=150, Sigma0(1)=588, Phi0(0)=2328 from `tkm rates`".into())
}

fn c4_closed_forms() -> Outcome {
    let started = Instant::now();
    let mut checked = 0;
    for kb in 1..=3u128 {
        let k_bound = KBound::user(kb).map_err(|e| e.to_string())?;
        for lambda in [1.0, 0.5, 0.25] {
            let bundle = ModuliBundle::corollary(k_bound, lambda).map_err(|e| e.to_string())?;
            let big = rates::lambda_bound_for(lambda).map_err(|e| e.to_string())?;
            let st = bundle.sigma_tilde_rate().ok_or("no product rate")?;
            let s2 = bundle.sigma2.clone().ok_or("no sigma2")?;
            let psi0 = bundle.psi0.clone().ok_or("no psi0")?;
            for k in 0..=100u128 {
                let pipeline = rates::sigma_tilde_c2(&s2, &psi0, &bundle.chi_rate(), kb, k).map_err(|e| e.to_string())?;
                let closed = rates::corollary_sigma0(kb, k).map_err(|e| e.to_string())?;
                ensure(pipeline == closed, || format!("Sigma K={kb} k={k}: {pipeline} != {closed}"))?;
                let phi = rates::phi_from_rate(&st, 0, big, &NatRate::Identity, kb, k, Sigma5Argument::Sound)
                    .map_err(|e| e.to_string())?;
                let closed = rates::corollary_phi0(kb, lambda, k).map_err(|e| e.to_string())?;
                ensure(phi == closed, || format!("Phi K={kb} lambda={lambda} k={k}: {phi} != {closed}"))?;
                checked += 2;
            }
        }
    }
    within(started, Duration::from_secs(1), "criterion 4")?;
    Ok(format!("{checked} exact equalities"))
}

fn c5_axioms() -> Outcome {
    let spaces = [
        SpaceHandle::euclidean(2),
        SpaceHandle::euclidean(5),
        SpaceHandle::spider_tree(3),
        SpaceHandle::spider_tree(7),
        Ok(SpaceHandle::maxnorm_plane()),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut entries = 0;
    for space in spaces {
        let space = space.map_err(|e| e.to_string())?;
        let mut r = check_axioms(&space, AXIOM_SAMPLES, AXIOM_SEED, AXIOM_VIOLATION).map_err(|e| e.to_string())?;
        r.extend(check_segment_identities(&space, AXIOM_SAMPLES, AXIOM_SEED, AXIOM_VIOLATION).map_err(|e| e.to_string())?);
        ensure(r.entries.len() == 9, || format!("{:?}: expected 9 checks", space.kind()))?;
        ensure(r.count(Status::Pass) == 9, || format!("{:?}:\n{}", space.kind(), r.to_text()))?;
        for e in &r.entries {
            ensure(e.worst_margin <= AXIOM_VIOLATION, || format!("{:?} {}: {}", space.kind(), e.name, e.worst_margin))?;
            worst = worst.max(e.worst_margin);
        }
        entries += r.entries.len();
    }
    Ok(format!("{entries} checks on 5 spaces, worst violation {worst:.3e}"))
}

fn c6_inequalities() -> Outcome {
    let suite = scenarios::standard_suite().map_err(|e| e.to_string())?;
    ensure(suite.len() >= 4, || "fewer than 4 scenarios".into())?;
    for (name, sc) in &suite {
        let trace = run_trace(sc, 10_000).map_err(|e| e.to_string())?;
        let r = verify::check_trace_inequalities(&trace, SLACK);
        ensure(r.entries.len() == 8 && r.count(Status::Pass) == 8, || format!("{name}:\n{}", r.to_text()))?;
    }
    Ok(format!("8 inequalities on {} scenarios, horizon 1e4", suite.len()))
}

/// Least index with `Σ_{i<=n} a_i >= level`, for each level reached.
fn scan_divergence(a: &[f64]) -> NatRate {
    let mut out = Vec::new();
    let mut sum = 0.0;
    for (n, v) in a.iter().enumerate() {
        sum += v;
        while sum >= out.len() as f64 {
            out.push(n as Nat);
        }
    }
    NatRate::table(out, Some(a.len() as Nat))
}

/// Least `n` with `Σ_{i>n} c_i <= 1/(j+1)`, where the tail includes an
/// analytic bound `remainder` on everything past the sampled terms.
fn scan_cauchy(c: &[f64], remainder: f64, levels: usize) -> NatRate {
    let mut tails = vec![remainder; c.len() + 1];
    for i in (0..c.len()).rev() {
        tails[i] = tails[i + 1] + c[i];
    }
    let values = (0..levels)
        .map(|j| (0..c.len()).find(|&n| tails[n + 1] <= 1.0 / (j as f64 + 1.0)).expect("tail reaches level") as Nat)
        .collect();
    NatRate::table(values, None)
}

/// `γ(m)`: least `n` with `A_n <= 1/(m+1)` for `m <= m_max`, where
/// `A_n = ∏_{i<=n}(1-a_i)` is nonincreasing.
fn scan_product(a: &[f64], m_max: usize) -> NatRate {
    let mut prod = Vec::with_capacity(a.len());
    let mut p = 1.0;
    for v in a {
        p *= 1.0 - v;
        prod.push(p);
    }
    let mut values = Vec::with_capacity(m_max + 1);
    let mut n = 0;
    for m in 0..=m_max {
        while n < prod.len() && prod[n] > 1.0 / (m as f64 + 1.0) {
            n += 1;
        }
        if n == prod.len() {
            break;
        }
        values.push(n as Nat);
    }
    NatRate::table(values, Some(a.len() as Nat))
}

/// Builds an instance with every modulus derived by scanning the data.
fn brute_instance(a: Vec<f64>, c: Vec<f64>, remainder: f64, s0: f64, upper: Nat, k_max: Nat) -> XuInstance {
    let chi = scan_cauchy(&c, remainder, 3 * k_max as usize + 3);
    let mut prod = 1.0;
    let mut products = Vec::with_capacity(a.len());
    for v in &a {
        prod *= 1.0 - v;
        products.push(prod);
    }
    let delta0: Vec<Nat> = (0..=k_max)
        .map(|k| {
            let at = chi.eval(3 * k + 2).unwrap() as usize;
            (1.0 / products[at]).ceil() as Nat
        })
        .collect();
    let m_max = (0..=k_max).map(|k| 3 * upper * (k + 1) * delta0[k as usize] - 1).max().unwrap() as usize;
    XuInstance {
        theta: Some(scan_divergence(&a)),
        gamma: Some(scan_product(&a, m_max)),
        delta0: Some(NatRate::table(delta0, None)),
        chi,
        a,
        c,
        s: XuSequence::Recurrence { s0 },
        upper,
    }
}

fn c7_xu_lemma() -> Outcome {
    let h = 200_000;
    let k_max = 2;
    let instances = [
        (
            "a=1/(n+2), c=1e-3*2^-n",
            brute_instance(
                (0..h).map(|n| 1.0 / (n as f64 + 2.0)).collect(),
                (0..h).map(|n| 1e-3 * 0.5f64.powi(n as i32)).collect(),
                0.0,
                1.0,
                1,
                k_max,
            ),
        ),
        (
            "a=1/2, c=0.05*0.9^n",
            brute_instance(
                vec![0.5; h],
                (0..h).map(|n| 0.05 * 0.9f64.powi(n as i32)).collect(),
                0.0,
                1.0,
                1,
                k_max,
            ),
        ),
        (
            "a=1/sqrt(n+2), c=0.01/(n+1)^3",
            brute_instance(
                (0..h).map(|n| 1.0 / (n as f64 + 2.0).sqrt()).collect(),
                (0..h).map(|n| 0.01 / (n as f64 + 1.0).powi(3)).collect(),
                // Σ_{n>=h} 0.01/(n+1)^3 <= 0.01/(2h^2).
                0.01 / (2.0 * (h as f64).powi(2)),
                2.0,
                2,
                k_max,
            ),
        ),
    ];
    let mut lines = Vec::new();
    for (name, inst) in &instances {
        let r = xu_harness(inst, h - 1, k_max, SLACK).map_err(|e| format!("{name}: {e}"))?;
        for branch in ["xu rate Sigma", "xu rate Sigma-tilde"] {
            let e = r.entry(branch).ok_or(format!("{name}: missing {branch}"))?;
            ensure(e.status == Status::Pass, || format!("{name}:\n{}", r.to_text()))?;
        }
        let sigma = NatRate::XuSigma {
            theta: Box::new(inst.theta.clone().unwrap()),
            chi: Box::new(inst.chi.clone()),
            upper: inst.upper,
        };
        lines.push(format!("{name}: Sigma(0)={}", sigma.eval(0).map_err(|e| e.to_string())?));
    }

    // Engineered failure: the claimed χ is one less than the scanned one.
    let c: Vec<f64> = (0..2000).map(|n| 0.6f64.powi(n)).collect();
    let a: Vec<f64> = (0..2000).map(|n| 1.0 / (n as f64 + 2.0)).collect();
    let good = scan_cauchy(&c, 0.0, 9);
    let shifted = good.tabulate(8).unwrap().into_iter().map(|v| v.saturating_sub(1)).collect();
    ensure(good.eval(0) == Ok(1), || "expected true chi(0) = 1".into())?;
    let bad = XuInstance { chi: NatRate::table(shifted, None), theta: Some(scan_divergence(&a)), gamma: None, delta0: None, a, c, s: XuSequence::Recurrence { s0: 1.0 }, upper: 3 };
    match xu_harness(&bad, 1999, k_max, SLACK) {
        Err(Error::Precondition { check, witness }) if check == "chi Cauchy modulus" => {
            ensure(witness.lhs > witness.rhs + SLACK, || format!("weak witness {witness}"))?;
            lines.push(format!("off-by-one chi rejected ({witness})"));
        }
        other => return Err(format!("off-by-one chi not rejected: {other:?}")),
    }
    Ok(lines.join("; "))
}

fn c8_divergence_vs_product() -> Outcome {
    let sc = scenarios::rotation_corollary(0.5).map_err(|e| e.to_string())?;
    let horizon = 1_000_000;
    let sigma1 = numeric_sigma1(&ScalarSchedule::HarmonicComplement, horizon);
    let chi = sc.bundle.chi_rate();
    let product = sc.bundle.sigma_tilde_rate().ok_or("no product rate")?;
    let mut parts = Vec::new();
    for k in 1..=5u128 {
        let bound = rates::sigma_c1_bound(&sigma1, &chi, 1, k).map_err(|e| e.to_string())?;
        let st = product.eval(k).map_err(|e| e.to_string())?;
        // Exact or lower bound, the divergence rate must exceed the product rate.
        ensure(bound.lower() > st, || format!("k={k}: Sigma {bound} vs Sigma~ {st}"))?;
        if let RateBound::AtLeast(v) = bound {
            ensure(v as usize > horizon, || format!("k={k}: lower bound {v} inside the scan"))?;
        }
        parts.push(format!("k={k}: {bound} > {st}"));
    }
    Ok(parts.join(", "))
}

fn c9_modified_mann() -> Outcome {
    let mut sc = scenarios::rotation_corollary(0.5).map_err(|e| e.to_string())?;
    sc.u = SpacePoint::vector([0.0, 0.0]);
    let r = check_modified_mann_equivalence(&sc, 1000).map_err(|e| e.to_string())?;
    ensure(r.passed() && r.count(Status::Pass) == 3, || r.to_text())?;
    let worst = r.entries.iter().map(|e| e.worst_margin).fold(f64::NEG_INFINITY, f64::max);
    ensure(worst <= MANN_DEVIATION, || format!("deviation {worst}"))?;
    Ok(format!("1e3 steps, max deviation {worst:.3e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("step-gap rate Sigma0 on the rotation scenario", c1_step_gap_rate),
        ("T-gap rate Phi0 on the rotation scenario", c2_t_gap_rate),
        ("rate table reproduction", c3_rate_table),
        ("closed forms equal the composed pipeline", c4_closed_forms),
        ("W-space axioms and segment identities", c5_axioms),
        ("orbit inequalities on four scenarios", c6_inequalities),
        ("quantitative Xu lemma harness", c7_xu_lemma),
        ("divergence route exceeds product route", c8_divergence_vs_product),
        ("modified Mann reduction", c9_modified_mann),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name} [{secs:.2}s]\n    {}", i + 1, why.replace('\n', "\n    "));
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
