//! Semifiniteness and factor type from fusion data and λ.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::fusion::{ratio_to_f64, FusionData, Lambdas};

pub const LOG_TOLERANCE: f64 = 1e-9;

/// The set `{λ_α λ_{β₂}/λ_{β₁}}` over nonzero channels `Hom(β₁, β₂⊗α)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Generators {
    Exact(BTreeSet<BigRational>),
    Float(Vec<f64>),
}

impl Generators {
    pub fn is_trivial(&self) -> bool {
        match self {
            Self::Exact(s) => s.iter().all(One::is_one),
            Self::Float(v) => v.iter().all(|x| (x.ln()).abs() <= LOG_TOLERANCE),
        }
    }

    /// Values in decreasing order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Exact(s) => s.iter().rev().map(ratio_to_f64).collect(),
            Self::Float(v) => v.clone(),
        }
    }

    /// Display strings in decreasing order.
    pub fn display(&self) -> Vec<String> {
        match self {
            Self::Exact(s) => s.iter().rev().map(|r| r.to_string()).collect(),
            Self::Float(v) => v.iter().map(|x| format!("{x}")).collect(),
        }
    }
}

pub fn channel_generators(f: &FusionData, l: &Lambdas) -> Generators {
    let n = f.len();
    let mut exact = BTreeSet::new();
    let mut floats = Vec::new();
    let all_exact = l.is_exact();
    for a in f.letter_ids() {
        let la = l.letter_value(a);
        for b1 in 0..n {
            for b2 in 0..n {
                if f.hom_dim(b1, b2, a) == 0 {
                    continue;
                }
                let (v1, v2) = (l.label(b1), l.label(b2));
                if all_exact {
                    let r = la.exact.clone().expect("exact")
                        * v2.exact.clone().expect("exact")
                        / v1.exact.clone().expect("exact");
                    exact.insert(r);
                } else {
                    floats.push(la.value * v2.value / v1.value);
                }
            }
        }
    }
    if all_exact {
        return Generators::Exact(exact);
    }
    floats.sort_by(|a, b| b.total_cmp(a));
    floats.dedup_by(|a, b| (a.ln() - b.ln()).abs() <= LOG_TOLERANCE);
    Generators::Float(floats)
}

pub fn is_semifinite(f: &FusionData, l: &Lambdas) -> bool {
    channel_generators(f, l).is_trivial()
}

/// The closed subgroup of `ℝ₊*` generated by the channel ratios.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConnesGroup {
    Trivial,
    Cyclic { lambda0: f64, exact: Option<String> },
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupResult {
    pub group: ConnesGroup,
    pub mode: &'static str,
    pub warnings: Vec<String>,
}

pub fn connes_group(gens: &Generators, tolerance: f64) -> GroupResult {
    match gens {
        Generators::Exact(set) => match exact_group(set) {
            Some(group) => GroupResult {
                group,
                mode: "exact",
                warnings: Vec::new(),
            },
            None => {
                let mut r = float_group(&gens.values(), tolerance);
                r.warnings
                    .push("rational generators too large to factor; fell back to float mode".into());
                r
            }
        },
        Generators::Float(v) => float_group(v, tolerance),
    }
}

fn factor_u64(mut n: u64, primes: &mut Vec<u64>, exps: &mut Vec<i64>, sign: i64) {
    let mut p = 2u64;
    while p * p <= n {
        while n % p == 0 {
            add_prime(p, sign, primes, exps);
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
        if p > 1_000_000 {
            break;
        }
    }
    if n > 1 {
        add_prime(n, sign, primes, exps);
    }
}

fn add_prime(p: u64, sign: i64, primes: &mut Vec<u64>, exps: &mut Vec<i64>) {
    match primes.iter().position(|&q| q == p) {
        Some(i) => exps[i] += sign,
        None => {
            primes.push(p);
            exps.push(sign);
        }
    }
}

fn exact_group(set: &BTreeSet<BigRational>) -> Option<ConnesGroup> {
    let mut primes: Vec<u64> = Vec::new();
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for r in set {
        let num = r.numer().to_u64()?;
        let den = r.denom().to_u64()?;
        if num > 1_000_000_000_000 || den > 1_000_000_000_000 {
            return None;
        }
        let mut exps = vec![0; primes.len()];
        factor_u64(num, &mut primes, &mut exps, 1);
        factor_u64(den, &mut primes, &mut exps, -1);
        rows.push(exps);
    }
    let k = primes.len();
    let rows: Vec<Vec<i64>> = rows
        .into_iter()
        .map(|mut v| {
            v.resize(k, 0);
            v
        })
        .filter(|v| v.iter().any(|&e| e != 0))
        .collect();
    match integer_rank(&rows) {
        0 => Some(ConnesGroup::Trivial),
        1 => {
            // Every row is q_i·u for a primitive u; the group is (u^g)^ℤ, g = gcd q_i.
            let first = &rows[0];
            let c = first.iter().fold(0, |g, &e| gcd(g, e.abs()));
            let u: Vec<i64> = first.iter().map(|e| e / c).collect();
            let pivot = u.iter().position(|&e| e != 0).expect("nonzero row");
            let g = rows.iter().fold(0, |g, r| gcd(g, (r[pivot] / u[pivot]).abs()));
            let mut value = BigRational::one();
            for (p, &e) in primes.iter().zip(&u) {
                let base = BigRational::from_integer(BigInt::from(*p));
                value *= base.pow((e * g) as i32);
            }
            if value > BigRational::one() {
                value = value.recip();
            }
            Some(ConnesGroup::Cyclic {
                lambda0: ratio_to_f64(&value),
                exact: Some(value.to_string()),
            })
        }
        _ => Some(ConnesGroup::Dense),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rank over ℚ of integer row vectors, by fraction-free elimination.
fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.iter().map(|&e| BigInt::from(e)).collect())
        .collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for i in rank + 1..m.len() {
            if m[i][c].is_zero() {
                continue;
            }
            let (a, b) = (m[rank][c].clone(), m[i][c].clone());
            for j in 0..cols {
                let v = &m[i][j] * &a - &m[rank][j] * &b;
                m[i][j] = v;
            }
        }
        rank += 1;
    }
    rank
}

fn float_group(values: &[f64], tol: f64) -> GroupResult {
    let mut warnings = Vec::new();
    let logs: Vec<f64> = values
        .iter()
        .map(|v| v.ln().abs())
        .filter(|x| *x > tol)
        .collect();
    if logs.is_empty() {
        return GroupResult {
            group: ConnesGroup::Trivial,
            mode: "float",
            warnings,
        };
    }
    let scale = logs.iter().cloned().fold(0.0, f64::max);
    let mut g = logs[0];
    let mut dense = false;
    for &x in &logs[1..] {
        let (mut a, mut b) = (g.max(x), g.min(x));
        let mut steps = 0;
        while b > tol * scale {
            let r = a % b;
            let r = r.min(b - r);
            a = b;
            b = r;
            steps += 1;
            if steps > 200 {
                break;
            }
        }
        g = a;
        if g < 1e-6 * scale || steps > 200 {
            dense = true;
            break;
        }
    }
    if !dense {
        let worst = logs
            .iter()
            .map(|x| (x / g - (x / g).round()).abs())
            .fold(0.0, f64::max);
        if worst > 1e3 * tol {
            dense = true;
        } else if worst > tol {
            warnings.push(format!("log lattice residual {worst:e} is above tolerance {tol:e}"));
        }
    }
    let group = if dense {
        warnings.push("log generators look incommensurable at this tolerance; reported as dense".into());
        ConnesGroup::Dense
    } else {
        ConnesGroup::Cyclic {
            lambda0: (-g).exp(),
            exact: None,
        }
    };
    GroupResult {
        group,
        mode: "float",
        warnings,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum Verdict {
    #[serde(rename = "II_1")]
    II1,
    #[serde(rename = "II_inf")]
    IIInf,
    #[serde(rename = "III_lambda")]
    IIILambda { lambda0: f64, exact: Option<String> },
    #[serde(rename = "III_1")]
    III1,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::II1 => write!(f, "II_1"),
            Self::IIInf => write!(f, "II_inf"),
            Self::IIILambda { exact: Some(e), .. } => write!(f, "III_{{{e}}}"),
            Self::IIILambda { lambda0, .. } => write!(f, "III_{{{lambda0}}}"),
            Self::III1 => write!(f, "III_1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceWeight {
    pub label: String,
    pub lambda: String,
    pub dim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stabilization {
    pub window: usize,
    pub next_window: usize,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeReport {
    pub semifinite: bool,
    pub generators: Vec<String>,
    pub group: ConnesGroup,
    pub mode: &'static str,
    pub verdict: Verdict,
    pub verdict_label: String,
    /// `K = Σ λ_β I_β` when semifinite.
    pub trace_weight: Option<Vec<TraceWeight>>,
    pub stabilization: Option<Stabilization>,
    pub notes: Vec<String>,
}

pub fn classify(f: &FusionData, l: &Lambdas) -> TypeReport {
    classify_with_successor(f, l, None)
}

/// As [`classify`]; for truncated data, `next` is the next larger window with
/// the same λ rule, used to confirm that the generator set has stabilized.
pub fn classify_with_successor(
    f: &FusionData,
    l: &Lambdas,
    next: Option<(&FusionData, &Lambdas)>,
) -> TypeReport {
    let gens = channel_generators(f, l);
    let semifinite = gens.is_trivial();
    let gr = connes_group(&gens, LOG_TOLERANCE);
    let mut notes = gr.warnings.clone();

    let stabilization = if f.truncated() {
        match next {
            Some((g, m)) => {
                let stable = channel_generators(g, m) == gens;
                if !stable {
                    notes.push("generator set changed between windows; verdict is provisional".into());
                }
                Some(Stabilization {
                    window: f.len(),
                    next_window: g.len(),
                    stable,
                })
            }
            None => {
                notes.push("truncated data without a larger window; stabilization not verified".into());
                None
            }
        }
    } else {
        None
    };

    let verdict = if semifinite {
        if f.truncated() {
            notes.push(
                "truncated window of an infinite spectrum: Σ λ_β d_β = +∞, so τ_K∘E(I) diverges".into(),
            );
            Verdict::IIInf
        } else {
            Verdict::II1
        }
    } else {
        match &gr.group {
            ConnesGroup::Cyclic { lambda0, exact } => Verdict::IIILambda {
                lambda0: *lambda0,
                exact: exact.clone(),
            },
            ConnesGroup::Dense => {
                notes.push(
                    "dense group inferred from finitely many generators; finite evidence, not a proof".into(),
                );
                Verdict::III1
            }
            ConnesGroup::Trivial => unreachable!("non-semifinite data has a nontrivial generator"),
        }
    };

    let trace_weight = semifinite.then(|| {
        let lam1 = l.label(f.unit()).value;
        let self_conj_ok = (0..f.len())
            .filter(|&b| f.conj(b) == b)
            .all(|b| (l.label(b).value - 1.0).abs() <= LOG_TOLERANCE);
        if (lam1 - 1.0).abs() > LOG_TOLERANCE || !self_conj_ok {
            notes.push("semifinite data with λ_1 ≠ 1 or a non-unit self-conjugate λ; inconsistent input".into());
        }
        (0..f.len())
            .map(|b| TraceWeight {
                label: f.label(b).to_string(),
                lambda: l.label(b).to_string(),
                dim: f.dim(b),
            })
            .collect()
    });

    TypeReport {
        semifinite,
        generators: gens.display(),
        group: gr.group,
        mode: gr.mode,
        verdict_label: verdict.to_string(),
        verdict,
        trace_weight,
        stabilization,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::LambdaSpec;

    fn setup(cat: &str, lam: &str) -> (FusionData, Lambdas) {
        let f = FusionData::catalog(cat).unwrap();
        let l = lam.parse::<LambdaSpec>().unwrap().resolve(&f).unwrap();
        (f, l)
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn generators_examples() {
        let (f, l) = setup("fib", "uniform:1");
        assert_eq!(channel_generators(&f, &l), Generators::Exact([rat(1, 1)].into()));
        let (f, l) = setup("fib", "t=2");
        let expect: BTreeSet<_> = [rat(4, 1), rat(2, 1), rat(1, 1), rat(1, 2), rat(1, 4)].into();
        assert_eq!(channel_generators(&f, &l), Generators::Exact(expect));
        let (f, l) = setup("zwindow:3", "power:5/3");
        assert!(channel_generators(&f, &l).is_trivial());
        for s in &channel_generators(&f, &l).display() {
            assert_eq!(s, "1");
        }
    }

    #[test]
    fn semifinite_examples() {
        let (f, l) = setup("fib", "uniform:1");
        assert!(is_semifinite(&f, &l));
        let (f, l) = setup("zmod:2", "g^1=3");
        assert!(!is_semifinite(&f, &l));
        for mu in ["2", "0.5", "7/3"] {
            let (f, l) = setup("zwindow:4", &format!("power:{mu}"));
            assert!(is_semifinite(&f, &l));
        }
    }

    #[test]
    fn group_examples() {
        let g = Generators::Exact([rat(1, 1)].into());
        assert_eq!(connes_group(&g, LOG_TOLERANCE).group, ConnesGroup::Trivial);
        let g = Generators::Exact([rat(4, 1), rat(2, 1), rat(1, 1), rat(1, 2), rat(1, 4)].into());
        assert_eq!(
            connes_group(&g, LOG_TOLERANCE).group,
            ConnesGroup::Cyclic {
                lambda0: 0.5,
                exact: Some("1/2".into())
            }
        );
        let g = Generators::Exact([rat(2, 1), rat(3, 1)].into());
        assert_eq!(connes_group(&g, LOG_TOLERANCE).group, ConnesGroup::Dense);
        let g = Generators::Exact([rat(4, 9), rat(8, 27)].into());
        assert_eq!(
            connes_group(&g, LOG_TOLERANCE).group,
            ConnesGroup::Cyclic {
                lambda0: 2.0 / 3.0,
                exact: Some("2/3".into())
            }
        );
    }

    #[test]
    fn float_group_examples() {
        let r = connes_group(&Generators::Float(vec![2f64.sqrt(), 2.0, 1.0]), LOG_TOLERANCE);
        match r.group {
            ConnesGroup::Cyclic { lambda0, .. } => assert!((lambda0 - 0.5f64.sqrt()).abs() < 1e-12),
            g => panic!("{g:?}"),
        }
        let r = connes_group(&Generators::Float(vec![2.0, 3.0]), LOG_TOLERANCE);
        assert_eq!(r.group, ConnesGroup::Dense);
        assert!(!r.warnings.is_empty());
        let r = connes_group(&Generators::Float(vec![1.0]), LOG_TOLERANCE);
        assert_eq!(r.group, ConnesGroup::Trivial);
    }

    #[test]
    fn classify_examples() {
        let (f, l) = setup("fib", "uniform:1");
        let r = classify(&f, &l);
        assert_eq!(r.verdict, Verdict::II1);
        assert!(r.trace_weight.is_some());

        let (f, l) = setup("fib", "t=2");
        let r = classify(&f, &l);
        assert_eq!(r.verdict_label, "III_{1/2}");
        assert_eq!(r.mode, "exact");

        let (f, l) = setup("zwindow:3", "uniform:1");
        let (g, m) = setup("zwindow:4", "uniform:1");
        let r = classify_with_successor(&f, &l, Some((&g, &m)));
        assert_eq!(r.verdict, Verdict::IIInf);
        assert!(r.stabilization.as_ref().unwrap().stable);

        let (f, l) = setup("zmod:3", "g^1=2,g^2=3");
        let r = classify(&f, &l);
        assert_eq!(r.verdict, Verdict::III1);
        assert!(r.notes.iter().any(|n| n.contains("finite evidence")));
    }

    #[test]
    fn float_lambda_classifies_in_float_mode() {
        let (f, l) = setup("fib", "t=2e0");
        let r = classify(&f, &l);
        assert_eq!(r.mode, "float");
        match r.verdict {
            Verdict::IIILambda { lambda0, .. } => assert!((lambda0 - 0.5).abs() < 1e-9),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn relabeling_invariance() {
        let (f, l) = setup("ising", "sigma=3");
        let base = classify(&f, &l);
        let perm = [0, 2, 1];
        let g = f.permuted(&perm).unwrap();
        let spec: LambdaSpec = "sigma=3".parse().unwrap();
        let m = spec.resolve(&g).unwrap();
        let r = classify(&g, &m);
        assert_eq!(r.verdict, base.verdict);
        assert_eq!(r.generators, base.generators);
    }

    #[test]
    fn exact_reports_are_bit_stable() {
        let (f, l) = setup("fib", "t=2");
        let a = serde_json::to_string(&classify(&f, &l)).unwrap();
        let b = serde_json::to_string(&classify(&f, &l)).unwrap();
        assert_eq!(a, b);
    }
}
