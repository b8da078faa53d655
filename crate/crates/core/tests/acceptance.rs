use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tomita_fock::bimodule::{BasisVector, Bimodule, BimoduleVector};
use tomita_fock::classify::{classify, classify_with_successor, Verdict};
use tomita_fock::fock::{modular_flow_check, trace_weight, word_moment};
use tomita_fock::fusion::FusionData;
use tomita_fock::oracle::{
    effective_lambda, freeness_check, gamma_star_gamma_moments, letter_groups, moment_nc,
    mp_moments, mp_moments_numeric, off_diagonal_residual,
};
use tomita_fock::suites::{
    affordable_basis, module, one_letter_lambda, random_closed_word, tracial_residual, CATALOG,
};
use tomita_fock::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn configs() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for cat in CATALOG {
        let f = FusionData::catalog(cat).unwrap();
        out.push((cat.to_string(), "uniform:1".to_string()));
        out.push((cat.to_string(), one_letter_lambda(&f)));
    }
    out
}

fn vector(m: &Bimodule, src: &str, dst: &str, letter: &str) -> BasisVector {
    let f = m.fusion();
    m.basis_vector(
        f.index_of(src).unwrap(),
        f.index_of(dst).unwrap(),
        f.parse_letter(letter).unwrap(),
        0,
    )
    .unwrap()
}

fn oracle_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut words = 0;
    let mut nonzero = 0;
    for (cat, lam) in configs() {
        let m = module(&cat, &lam)?;
        for k in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(k);
            let len = 2 * rng.random_range(1..=4);
            let w = random_closed_word(&m, len, &mut rng);
            assert!(w.is_closed()?);
            let a = moment_nc(&m, &w)?;
            let b = word_moment(&m, &w.vectors())?;
            worst = worst.max((a - b).norm());
            words += 1;
            if a.norm() > 1e-6 {
                nonzero += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst < 1e-10 && secs < 60.0,
        format!("{words} closed words ({nonzero} nonzero), max residual {worst:.2e}, {secs:.1}s"),
    ))
}

fn marchenko_pastur() -> Result<Outcome> {
    let m = module("trivial", "uniform:1")?;
    let r = gamma_star_gamma_moments(&m, vector(&m, "1", "1", "1"), 6)?;
    let catalan = [1.0, 2.0, 5.0, 14.0, 42.0, 132.0];
    let cat_err = r
        .moments
        .iter()
        .zip(catalan)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let numeric = mp_moments_numeric(0.25, 2);
    let analytic = mp_moments(0.25, 2)?;
    let quarter = module("trivial", "1=1/4")?;
    let realized = gamma_star_gamma_moments(&quarter, vector(&quarter, "1", "1", "1"), 2)?;
    let q_err = [
        (numeric[0] - 1.0).abs(),
        (numeric[1] - 1.25).abs(),
        (analytic[0] - numeric[0]).abs(),
        (analytic[1] - numeric[1]).abs(),
        (realized.moments[0] - numeric[0]).abs(),
        (realized.moments[1] - numeric[1]).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(outcome(
        cat_err < 1e-9 && q_err < 1e-9 && (realized.lambda - 0.25).abs() < 1e-15,
        format!(
            "Catalan error {cat_err:.2e}; lambda=1/4 quadrature m1={:.12} m2={:.12}, error {q_err:.2e}",
            numeric[0], numeric[1]
        ),
    ))
}

fn off_diagonal() -> Result<Outcome> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let m = module("fib", &format!("t={}", 0.5 * phi))?;
    let xi = vector(&m, "1", "t", "t");
    let lam = effective_lambda(&m, xi);
    let oracle = off_diagonal_residual(&m, xi, 5)?;

    // Same identity from the Fock-space matrices.
    let s = m.apply_s(&BimoduleVector::basis(xi));
    let g = BimoduleVector::basis(xi);
    let (d1, d2) = (m.dims()[xi.src], m.dims()[xi.dst]);
    let mut matrix: f64 = 0.0;
    for k in 1..=5 {
        let gsg: Vec<_> = [g.clone(), s.clone()].into_iter().cycle().take(2 * k).collect();
        let ggs: Vec<_> = [s.clone(), g.clone()].into_iter().cycle().take(2 * k).collect();
        let a = word_moment(&m, &gsg)?.re;
        let b = word_moment(&m, &ggs)?.re;
        matrix = matrix.max((b / d2 - lam * a / d1).abs());
    }
    Ok(outcome(
        oracle < 1e-9 && matrix < 1e-9 && (lam - 0.5).abs() < 1e-12,
        format!("lambda={lam:.15}, k=1..5 residual {oracle:.2e} (oracle), {matrix:.2e} (matrix)"),
    ))
}

fn modular_flow() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for cat in CATALOG {
        let f = FusionData::catalog(cat)?;
        let m = module(cat, &one_letter_lambda(&f))?;
        let basis = affordable_basis(&m, 4, 20_000)?;
        for &xi in m.basis() {
            for t in [0.3, 1.0, std::f64::consts::PI] {
                worst = worst.max(modular_flow_check(&m, xi, t, &basis)?);
                cases += 1;
            }
        }
    }
    Ok(outcome(
        worst < 1e-12,
        format!(
            "{cases} (generator, t) cases, max residual {worst:.2e}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    ))
}

fn freeness() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut control: f64 = 0.0;
    let mut words = 0;
    for (cat, lam, trials) in [("fib", "t=2", 120), ("ising", "sigma=2", 40), ("zmod:3", "g^1=2", 40)] {
        let m = module(cat, lam)?;
        let f = m.fusion();
        let rest: Vec<usize> = (0..f.len()).filter(|&b| b != f.unit()).collect();
        let groups = vec![
            letter_groups(&m, &rest).concat(),
            letter_groups(&m, &[f.unit()]).remove(0),
        ];
        let r = freeness_check(&m, &groups, trials, 17)?;
        worst = worst.max(r.centered).max(r.recursion);
        control = control.max(r.control);
        words += trials;
    }
    Ok(outcome(
        worst < 1e-10 && control > 1e-3 && words >= 100,
        format!("{words} centered alternating words, max |E| {worst:.2e}; control max {control:.2e}"),
    ))
}

fn classification() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut ok = true;

    let setup = |cat: &str, lam: &str| -> Result<Bimodule> { module(cat, lam) };

    let m = setup("fib", "uniform:1")?;
    let r = classify(m.fusion(), m.lambdas());
    ok &= r.verdict == Verdict::II1;
    lines.push(format!("fib uniform:1 -> {}", r.verdict_label));

    let a = setup("zwindow:4", "uniform:1")?;
    let b = setup("zwindow:5", "uniform:1")?;
    let r = classify_with_successor(a.fusion(), a.lambdas(), Some((b.fusion(), b.lambdas())));
    let stable = r.stabilization.as_ref().is_some_and(|s| s.stable);
    ok &= r.verdict == Verdict::IIInf && stable;
    lines.push(format!("zwindow:4 uniform:1 -> {} (stable {stable})", r.verdict_label));

    let m = setup("fib", "t=2")?;
    let r = classify(m.fusion(), m.lambdas());
    let first = serde_json::to_string(&r).unwrap();
    ok &= r.mode == "exact" && r.verdict_label == "III_{1/2}";
    lines.push(format!("fib t=2 -> {} ({})", r.verdict_label, r.mode));

    let m = setup("zmod:3", "g^1=2,g^2=3")?;
    let r = classify(m.fusion(), m.lambdas());
    let caveat = r.notes.iter().any(|n| n.contains("finite evidence"));
    ok &= r.verdict == Verdict::III1 && caveat;
    lines.push(format!("zmod:3 g^1=2,g^2=3 -> {} (caveat {caveat})", r.verdict_label));

    let stable_runs = (0..5).all(|_| {
        let m = setup("fib", "t=2").unwrap();
        serde_json::to_string(&classify(m.fusion(), m.lambdas())).unwrap() == first
    });
    ok &= stable_runs;
    lines.push(format!("bit-stable {stable_runs}"));
    Ok(outcome(ok, lines.join("; ")))
}

fn tomita_axioms() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut worst_inner: f64 = 0.0;
    for (cat, lam) in configs() {
        let m = module(&cat, &lam)?;
        let r = m.check_tomita_axioms(100, 7);
        worst = worst.max(r.max_residual());
        worst_inner = worst_inner.max(r.s_inner);
    }
    Ok(outcome(
        worst < 1e-12,
        format!("100 pairs per config, max residual {worst:.2e} (S-inner-product axiom {worst_inner:.2e})"),
    ))
}

fn tracial() -> Result<Outcome> {
    let mut uniform: f64 = 0.0;
    for cat in CATALOG {
        let m = module(cat, "uniform:1")?;
        let ones = vec![1.0; m.fusion().len()];
        uniform = uniform.max(tracial_residual(&m, &ones, 40, 6, 3)?);
    }
    let m = module("zwindow:4", "power:2")?;
    let k = trace_weight(&m);
    let ones = vec![1.0; m.fusion().len()];
    let weighted = tracial_residual(&m, &k, 60, 6, 5)?;
    let plain = tracial_residual(&m, &ones, 60, 6, 5)?;
    Ok(outcome(
        uniform < 1e-10 && weighted < 1e-10 && plain > 1e-3,
        format!(
            "lambda=1 tau.E {uniform:.2e}; zwindow power:2 tau_K.E {weighted:.2e}, tau.E {plain:.2e}"
        ),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("Marchenko-Pastur moments", marchenko_pastur),
        ("off-diagonal law", off_diagonal),
        ("modular flow", modular_flow),
        ("freeness with amalgamation", freeness),
        ("type classification", classification),
        ("Tomita axioms", tomita_axioms),
        ("tracial weights", tracial),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} [{}] {name}: {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
