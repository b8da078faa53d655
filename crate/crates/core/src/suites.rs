//! Random word sampling and the invariant suites shared by the acceptance
//! target and the CLI driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bimodule::{random_c64, BasisVector, Bimodule, BimoduleVector};
use crate::error::Result;
use crate::fock::{
    commutator_residual, enumerate_fock_basis, enumerate_fock_basis_over, modular_flow_check,
    trace_weight, vacuum_projection_check, word_moment, FockBasis,
};
use crate::fusion::{FusionData, LambdaSpec, Label};
use crate::oracle::{
    freeness_check, gamma_star_gamma_moments, letter_groups, moment_nc, mp_moments_analytic,
    mp_moments_numeric, WordSpec,
};

/// Catalog entries exercised by the default suites.
pub const CATALOG: [&str; 5] = ["trivial", "fib", "ising", "zmod:3", "zwindow:4"];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub config: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn below(suite: &str, config: &str, cases: usize, residual: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.into(),
            config: config.into(),
            cases,
            max_residual: residual,
            tolerance,
            passed: residual < tolerance,
        }
    }
}

pub fn module(category: &str, lambda: &str) -> Result<Bimodule> {
    let f = FusionData::catalog(category)?;
    let l = lambda.parse::<LambdaSpec>()?.resolve(&f)?;
    Bimodule::new(f, l)
}

/// `λ = 2` on the first non-unit label, or on the unit for a one-label category.
pub fn one_letter_lambda(f: &FusionData) -> String {
    let target = (0..f.len()).find(|&b| b != f.unit()).unwrap_or(f.unit());
    format!("{}=2", f.label(target))
}

fn random_from(m: &Bimodule, src: Label, dst: Option<Label>, rng: &mut impl Rng) -> Option<BasisVector> {
    let options: Vec<BasisVector> = m
        .basis_from(src)
        .filter(|b| dst.is_none_or(|d| b.dst == d))
        .copied()
        .collect();
    (!options.is_empty()).then(|| options[rng.random_range(0..options.len())])
}

/// A closed word of even length `len`, built by pushing random generators and
/// closing them in nested order, mostly with the matching conjugate.
pub fn random_closed_word(m: &Bimodule, len: usize, rng: &mut impl Rng) -> WordSpec {
    let n = m.fusion().len();
    let mut current = rng.random_range(0..n);
    let mut stack: Vec<BasisVector> = Vec::new();
    let mut gens = Vec::with_capacity(len);
    for slot in 0..len {
        let remaining = len - slot;
        let can_push = remaining > stack.len() + 1 || (remaining > stack.len() && stack.is_empty());
        let push = stack.is_empty() || (can_push && rng.random_bool(0.5));
        let e = if push {
            let e = random_from(m, current, None, rng).expect("every label has the unit letter");
            stack.push(e);
            e
        } else {
            let top = stack.pop().expect("nonempty");
            if rng.random_bool(0.85) {
                m.bar(top).1
            } else {
                random_from(m, current, Some(top.src), rng).expect("the conjugate always fits")
            }
        };
        gens.push((e, random_c64(rng)));
        current = e.dst;
    }
    WordSpec::new(gens)
}

/// A random word: mostly closed and even, sometimes odd or open.
pub fn random_word(m: &Bimodule, max_len: usize, rng: &mut impl Rng) -> WordSpec {
    let half = rng.random_range(1..=max_len / 2);
    let mut w = random_closed_word(m, 2 * half, rng);
    if rng.random_bool(0.1) {
        w.generators.pop();
    }
    w
}

/// `|moment_nc − word_moment_matrix|` over `words` random words of length `≤ max_len`.
pub fn oracle_suite(m: &Bimodule, config: &str, words: usize, max_len: usize, seed: u64) -> Result<SuiteResult> {
    let residuals = (0..words)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
            let w = random_word(m, max_len, &mut rng);
            let a = moment_nc(m, &w)?;
            let b = word_moment(m, &w.vectors())?;
            Ok((a - b).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = residuals.into_iter().fold(0.0, f64::max);
    Ok(SuiteResult::below("oracle", config, words, worst, 1e-10))
}

pub fn tomita_suite(m: &Bimodule, config: &str, samples: usize, seed: u64) -> SuiteResult {
    let r = m.check_tomita_axioms(samples, seed);
    SuiteResult::below("tomita", config, samples, r.max_residual(), 1e-12)
}

/// Largest depth `≤ max_depth` whose full Fock basis stays within `budget` paths.
pub fn affordable_basis(m: &Bimodule, max_depth: usize, budget: usize) -> Result<FockBasis> {
    let mut best = enumerate_fock_basis(m, 1)?;
    for d in 2..=max_depth {
        match enumerate_fock_basis_over(m, d, m.basis(), budget) {
            Ok(b) => best = b,
            Err(_) => break,
        }
    }
    Ok(best)
}

/// Modular flow on every basis vector of `H(1)` at each `t`.
pub fn modular_suite(m: &Bimodule, config: &str, ts: &[f64]) -> Result<SuiteResult> {
    let basis = affordable_basis(m, 4, 20_000)?;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &xi in m.basis() {
        for &t in ts {
            worst = worst.max(modular_flow_check(m, xi, t, &basis)?);
            cases += 1;
        }
    }
    Ok(SuiteResult::below("modular", config, cases, worst, 1e-12))
}

pub fn vacuum_suite(m: &Bimodule, config: &str, words: usize, seed: u64) -> Result<SuiteResult> {
    let basis = affordable_basis(m, 4, 5_000)?;
    let r = vacuum_projection_check(m, &basis, words, seed)?;
    Ok(SuiteResult::below("vacuum", config, words, r.max_residual(), 1e-12))
}

/// Two groups: the unit letters against everything else. `None` when the
/// category has a single label.
pub fn default_groups(m: &Bimodule) -> Option<Vec<Vec<BasisVector>>> {
    let f = m.fusion();
    if f.len() < 2 {
        return None;
    }
    let others: Vec<Label> = (0..f.len()).filter(|&b| b != f.unit()).collect();
    let unit = letter_groups(m, &[f.unit()]).remove(0);
    let rest = letter_groups(m, &others).concat();
    Some(vec![rest, unit])
}

/// Centered alternating words must have zero expectation; the recursion must
/// match the direct evaluation. The control maximum is reported separately.
pub fn freeness_suite(m: &Bimodule, config: &str, trials: usize, seed: u64) -> Result<Option<(SuiteResult, f64)>> {
    let Some(groups) = default_groups(m) else {
        return Ok(None);
    };
    let r = freeness_check(m, &groups, trials, seed)?;
    Ok(Some((
        SuiteResult::below("freeness", config, trials, r.centered.max(r.recursion), 1e-10),
        r.control,
    )))
}

/// Analytic against numeric MP moments, and `Γ*Γ` moments of every basis
/// vector against the MP law at its effective λ.
pub fn mp_suite(m: &Bimodule, config: &str, order: usize) -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for lam in [0.1, 0.25, 0.5, 1.0] {
        let a = mp_moments_analytic(lam, order);
        let n = mp_moments_numeric(lam, order);
        for (x, y) in a.iter().zip(&n) {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
        cases += 1;
    }
    for &xi in m.basis() {
        let r = gamma_star_gamma_moments(m, xi, order)?;
        for (x, y) in r.moments.iter().zip(&r.mp) {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
        cases += 1;
    }
    Ok(SuiteResult::below("mp", config, cases, worst, 1e-9))
}

/// A closed word split into `(A, B)` with `A` acting first.
pub fn random_word_pair(m: &Bimodule, max_len: usize, rng: &mut impl Rng) -> (Vec<BimoduleVector>, Vec<BimoduleVector>) {
    let half = rng.random_range(1..=max_len / 2);
    let w = random_closed_word(m, 2 * half, rng).vectors();
    let k = rng.random_range(1..w.len());
    (w[..k].to_vec(), w[k..].to_vec())
}

/// `max |φ(AB) − φ(BA)|` over random pairs, for `φ = Σ_β K_β ⟨I_β, · I_β⟩`.
pub fn tracial_residual(m: &Bimodule, weights: &[f64], pairs: usize, max_len: usize, seed: u64) -> Result<f64> {
    let r = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let (a, b) = random_word_pair(m, max_len, &mut rng);
            commutator_residual(m, &a, &b, weights)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

/// τ∘E tracial for λ ≡ 1, τ_K∘E tracial for semifinite data.
pub fn tracial_suite(m: &Bimodule, config: &str, pairs: usize, seed: u64) -> Result<SuiteResult> {
    let k = trace_weight(m);
    let worst = tracial_residual(m, &k, pairs, 6, seed)?;
    Ok(SuiteResult::below("tracial", config, pairs, worst, 1e-10))
}

/// Every suite over the default catalog with `λ ∈ {uniform:1, one letter = 2}`.
pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::new();
    for cat in CATALOG {
        let f = FusionData::catalog(cat)?;
        for lam in ["uniform:1".to_string(), one_letter_lambda(&f)] {
            let m = module(cat, &lam)?;
            let config = format!("{cat} {lam}");
            out.push(tomita_suite(&m, &config, 100, seed));
            out.push(modular_suite(&m, &config, &[0.3, 1.0, std::f64::consts::PI])?);
            out.push(vacuum_suite(&m, &config, 20, seed)?);
            out.push(oracle_suite(&m, &config, 200, 8, seed)?);
            if let Some((r, _)) = freeness_suite(&m, &config, 50, seed)? {
                out.push(r);
            }
            out.push(mp_suite(&m, &config, 6)?);
            if crate::classify::is_semifinite(m.fusion(), m.lambdas()) {
                out.push(tracial_suite(&m, &config, 30, seed)?);
            }
        }
    }
    out.sort_by(|a, b| (a.suite.as_str(), a.config.as_str()).cmp(&(b.suite.as_str(), b.config.as_str())));
    Ok(out)
}
