//! Moments from the non-crossing pairing formula, Marchenko–Pastur moments,
//! and operator-valued freeness checks.
//!
//! Word convention: `word[0] = ξ₁` acts first, so a word of length `L`
//! stands for `Γ(ξ_L)⋯Γ(ξ₁)`, with `ξ_i : β_i → β_{i+1}` (source `β_i`).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bimodule::{random_c64, AlgebraElement, BasisVector, Bimodule, BimoduleVector, C64};
use crate::error::{Error, Result};
use crate::fock::{apply_algebra, apply_gamma, bar_closure, vacuum_component, FockVector};
use crate::fusion::Label;
use crate::quadrature::integrate;

pub const NC2_CAP: usize = 12;
pub const MP_TOLERANCE: f64 = 1e-9;

/// A non-crossing pairing of `{1..2n}`; pairs are `(i, j)` with `i < j`, one-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PairPartition {
    pub pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    pub fn is_non_crossing(&self) -> bool {
        self.pairs.iter().all(|&(a, b)| {
            self.pairs
                .iter()
                .all(|&(c, d)| !(a < c && c < b && b < d))
        })
    }
}

/// All non-crossing pairings of `{1..2n}`, by pairing the first point with
/// each admissible partner and splitting the interval.
pub fn enumerate_nc2(n: usize) -> Result<Vec<PairPartition>> {
    enumerate_nc2_capped(n, NC2_CAP)
}

pub fn enumerate_nc2_capped(n: usize, cap: usize) -> Result<Vec<PairPartition>> {
    if n > cap {
        return Err(Error::PairingCap { n, cap });
    }
    Ok(nc2_interval(1, 2 * n)
        .into_iter()
        .map(|mut pairs| {
            pairs.sort_unstable();
            PairPartition { pairs }
        })
        .collect())
}

fn nc2_interval(lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
    if lo > hi {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for j in (lo + 1..=hi).step_by(2) {
        let inner = nc2_interval(lo + 1, j - 1);
        let outer = nc2_interval(j + 1, hi);
        for a in &inner {
            for b in &outer {
                let mut p = Vec::with_capacity(a.len() + b.len() + 1);
                p.push((lo, j));
                p.extend_from_slice(a);
                p.extend_from_slice(b);
                out.push(p);
            }
        }
    }
    out
}

pub fn catalan(n: usize) -> u64 {
    (0..n).fold(1u64, |c, k| c * 2 * (2 * k as u64 + 1) / (k as u64 + 2))
}

/// A word of single generators `c_i e_i`, `word[0]` acting first.
#[derive(Clone, Debug, PartialEq)]
pub struct WordSpec {
    pub generators: Vec<(BasisVector, C64)>,
}

impl WordSpec {
    pub fn new(generators: Vec<(BasisVector, C64)>) -> Self {
        Self { generators }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// `β₁ … β_{L+1}`; errors if consecutive generators do not compose.
    pub fn betas(&self) -> Result<Vec<Label>> {
        let mut betas = Vec::with_capacity(self.len() + 1);
        for (k, (e, _)) in self.generators.iter().enumerate() {
            if let Some(&last) = betas.last() {
                if last != e.src {
                    return Err(Error::NotComposable(format!(
                        "generator {} starts at label {} but the previous one ends at {}",
                        k + 1,
                        e.src,
                        last
                    )));
                }
            } else {
                betas.push(e.src);
            }
            betas.push(e.dst);
        }
        Ok(betas)
    }

    pub fn is_closed(&self) -> Result<bool> {
        let b = self.betas()?;
        Ok(b.first() == b.last())
    }

    /// The word as bimodule vectors, for the Fock-space backends.
    pub fn vectors(&self) -> Vec<BimoduleVector> {
        self.generators
            .iter()
            .map(|&(e, c)| BimoduleVector::term(e, c))
            .collect()
    }
}

/// `τ∘E(Γ(ξ_L)⋯Γ(ξ₁)) = d_{β₁} Σ_{NC₂} ∏_{(i<j)} (√λ_{α_j}/d_{β_i}) ⟨ξ̄_j|ξ_i⟩`.
pub fn moment_nc(m: &Bimodule, w: &WordSpec) -> Result<C64> {
    let betas = w.betas()?;
    let zero = C64::new(0.0, 0.0);
    if w.is_empty() {
        return Ok(C64::new(m.dims().iter().sum(), 0.0));
    }
    if w.len() % 2 == 1 || betas[0] != betas[w.len()] {
        return Ok(zero);
    }
    let n = w.len();
    let dims = m.dims();
    // pair[i][j] for zero-based i < j.
    let mut pair = vec![vec![zero; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            pair[i][j] = pair_weight(m, w.generators[i], w.generators[j], dims[betas[i]]);
        }
    }
    let parts = enumerate_nc2(n / 2)?;
    let sum: C64 = parts
        .par_iter()
        .map(|p| {
            p.pairs
                .iter()
                .map(|&(i, j)| pair[i - 1][j - 1])
                .product::<C64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(sum * dims[betas[0]])
}

/// `(√λ_{α_j}/d_{β_i}) ⟨ξ̄_j|ξ_i⟩` for `ξ_i = c_i e_i`, `ξ_j = c_j e_j`.
fn pair_weight(m: &Bimodule, (ei, ci): (BasisVector, C64), (ej, cj): (BasisVector, C64), d_bi: f64) -> C64 {
    let (s, bar_j) = m.bar(ej);
    if bar_j != ei {
        return C64::new(0.0, 0.0);
    }
    // ξ̄_j = conj(c_j) s e_i; the inner product is antilinear on the left.
    let ip = cj * ci * s * m.dims()[ei.src];
    ip * m.lambda(ej.letter).sqrt() / d_bi
}

/// [`moment_nc`] extended multilinearly to words of arbitrary vectors.
/// Non-composable term choices contribute zero.
pub fn moment_nc_vectors(m: &Bimodule, word: &[BimoduleVector]) -> Result<C64> {
    if word.len() % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let slots: Vec<Vec<(BasisVector, C64)>> = word
        .iter()
        .map(|v| v.terms().map(|(b, c)| (*b, *c)).collect())
        .collect();
    let mut total = C64::new(0.0, 0.0);
    let mut chain = Vec::with_capacity(word.len());
    expand(m, &slots, &mut chain, &mut total)?;
    Ok(total)
}

fn expand(
    m: &Bimodule,
    slots: &[Vec<(BasisVector, C64)>],
    chain: &mut Vec<(BasisVector, C64)>,
    total: &mut C64,
) -> Result<()> {
    let k = chain.len();
    if k == slots.len() {
        *total += moment_nc(m, &WordSpec::new(chain.clone()))?;
        return Ok(());
    }
    for &g in &slots[k] {
        if chain.last().is_some_and(|(e, _)| e.dst != g.0.src) {
            continue;
        }
        if k + 1 == slots.len() && chain.first().is_some_and(|(e, _)| e.src != g.0.dst) {
            continue;
        }
        chain.push(g);
        expand(m, slots, chain, total)?;
        chain.pop();
    }
    Ok(())
}

/// Narayana numbers `N(k, r) = C(k,r) C(k,r−1) / k`.
pub fn narayana(k: usize, r: usize) -> f64 {
    if r == 0 || r > k {
        return 0.0;
    }
    binomial(k, r) * binomial(k, r - 1) / k as f64
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `m_k = Σ_r N(k,r) λ^{r−1}`, `k = 1..=count`.
pub fn mp_moments_analytic(lambda: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| (1..=k).map(|r| narayana(k, r) * lambda.powi(r as i32 - 1)).sum())
        .collect()
}

/// `∫ t^k √(4λ−(t−1−λ)²)/(2πλt) dt` for `k = 1..=count`, after
/// `t = 1 + λ + 2√λ cos θ`.
pub fn mp_moments_numeric(lambda: f64, count: usize) -> Vec<f64> {
    let r = lambda.sqrt();
    (1..=count)
        .map(|k| {
            let f = |th: f64| {
                let t = 1.0 + lambda + 2.0 * r * th.cos();
                t.powi(k as i32 - 1) * (2.0 / PI) * th.sin().powi(2)
            };
            integrate(f, 0.0, PI, 1e-13).0
        })
        .collect()
}

/// Moments `m_1..m_K` of the Marchenko–Pastur law with parameter `λ ∈ (0,1]`,
/// analytic values confirmed by quadrature.
pub fn mp_moments(lambda: f64, count: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Lambda(format!("Marchenko-Pastur parameter {lambda} is outside (0, 1]")));
    }
    let analytic = mp_moments_analytic(lambda, count);
    let numeric = mp_moments_numeric(lambda, count);
    for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        if (a - n).abs() > MP_TOLERANCE * a.abs().max(1.0) {
            return Err(Error::Integration {
                k: k + 1,
                numeric: *n,
                analytic: *a,
            });
        }
    }
    Ok(analytic)
}

/// `λ_α d_{src}/d_{dst}` for a basis vector.
pub fn effective_lambda(m: &Bimodule, xi: BasisVector) -> f64 {
    m.lambda(xi.letter) * m.dims()[xi.src] / m.dims()[xi.dst]
}

/// Raw `τ∘E((Γ(ξ)*Γ(ξ))^k)`, or `τ∘E((Γ(ξ)Γ(ξ)*)^k)` when `star_last` is set,
/// for `k = 1..=count`, via [`moment_nc`].
pub fn gamma_product_moments(m: &Bimodule, xi: BasisVector, count: usize, star_last: bool) -> Result<Vec<f64>> {
    let g = (xi, C64::new(1.0, 0.0));
    let s = m.apply_s(&BimoduleVector::basis(xi));
    let (&sb, &sc) = s.terms().next().expect("S of a basis vector is a single term");
    let gs = (sb, sc);
    let pair = if star_last { [gs, g] } else { [g, gs] };
    (1..=count)
        .map(|k| {
            let w = WordSpec::new(pair.iter().copied().cycle().take(2 * k).collect());
            moment_nc(m, &w).map(|c| c.re)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MpComparison {
    /// The basis vector actually used (`ξ` or `ξ̄`).
    pub generator: String,
    pub swapped: bool,
    pub lambda: f64,
    pub moments: Vec<f64>,
    pub mp: Vec<f64>,
}

/// Normalized moments `τ∘E((Γ*Γ)^k)/d_{src}`, exchanging `ξ` for `ξ̄` when
/// `λ_α d_{src}/d_{dst} > 1`. These equal [`mp_moments`] at the effective `λ`.
pub fn gamma_star_gamma_moments(m: &Bimodule, xi: BasisVector, count: usize) -> Result<MpComparison> {
    let mut lambda = effective_lambda(m, xi);
    let mut gen = xi;
    let swapped = lambda > 1.0 + 1e-12;
    if swapped {
        gen = m.bar(xi).1;
        lambda = effective_lambda(m, gen);
    }
    let d = m.dims()[gen.src];
    let moments = gamma_product_moments(m, gen, count, false)?
        .into_iter()
        .map(|x| x / d)
        .collect();
    Ok(MpComparison {
        generator: gen.display(m.fusion()),
        swapped,
        lambda,
        moments,
        mp: mp_moments(lambda.min(1.0), count)?,
    })
}

/// `max_k |m_k(ΓΓ*)/d_{dst} − λ m_k(Γ*Γ)/d_{src}|` for `k = 1..=count`.
pub fn off_diagonal_residual(m: &Bimodule, xi: BasisVector, count: usize) -> Result<f64> {
    let lambda = effective_lambda(m, xi);
    let a = gamma_product_moments(m, xi, count, false)?;
    let b = gamma_product_moments(m, xi, count, true)?;
    let (d1, d2) = (m.dims()[xi.src], m.dims()[xi.dst]);
    Ok(a
        .iter()
        .zip(&b)
        .map(|(x, y)| (y / d2 - lambda * x / d1).abs())
        .fold(0.0, f64::max))
}

/// A factor of an operator word: a noncommutative polynomial in `Γ`'s and
/// base-algebra elements. In each monomial `atoms[0]` acts first.
#[derive(Clone, Debug)]
pub enum Atom {
    Gamma(BimoduleVector),
    Alg(AlgebraElement),
}

pub type Poly = Vec<(C64, Vec<Atom>)>;

/// Lazily applies a polynomial to a Fock vector (no truncation).
pub fn apply_poly(m: &Bimodule, p: &Poly, v: &FockVector) -> Result<FockVector> {
    let mut out = FockVector::zero();
    for (c, atoms) in p {
        let mut x = v.clone();
        for a in atoms {
            x = match a {
                Atom::Gamma(xi) => apply_gamma(m, xi, &x, None)?,
                Atom::Alg(e) => apply_algebra(m, e, &x),
            };
            if x.is_empty() {
                break;
            }
        }
        out = out.add(&x.scale(*c));
    }
    Ok(out)
}

/// `E(P)` read off `P Ω`.
pub fn expectation(m: &Bimodule, p: &Poly) -> Result<AlgebraElement> {
    let omega = FockVector::omega(m.fusion().len());
    Ok(vacuum_component(m, &apply_poly(m, p, &omega)?))
}

/// One factor of an alternating word; `centered` stands for `P − E(P)`.
#[derive(Clone, Debug)]
pub struct Factor {
    pub group: usize,
    pub poly: Poly,
    pub centered: bool,
}

impl Factor {
    /// The factor as an explicit polynomial.
    pub fn explicit(&self, e: &AlgebraElement) -> Poly {
        let mut p = self.poly.clone();
        if self.centered {
            p.push((C64::new(-1.0, 0.0), vec![Atom::Alg(e.clone())]));
        }
        p
    }
}

fn poly_product(first: &Poly, second: &Poly) -> Poly {
    let mut out = Vec::with_capacity(first.len() * second.len());
    for (a, x) in first {
        for (b, y) in second {
            let mut atoms = x.clone();
            atoms.extend(y.iter().cloned());
            out.push((a * b, atoms));
        }
    }
    out
}

fn alg_poly(e: &AlgebraElement) -> Poly {
    vec![(C64::new(1.0, 0.0), vec![Atom::Alg(e.clone())])]
}

/// `E(X₁⋯X_l)` (`factors[0]` acting first) from per-group expectations,
/// expanding `X = X̊ + E(X)` and using that alternating centered products
/// have zero expectation.
pub fn amalgamated_moment_recursion<F>(factors: &[Factor], n: usize, expect: &F) -> Result<AlgebraElement>
where
    F: Fn(usize, &Poly) -> Result<AlgebraElement>,
{
    for (k, w) in factors.windows(2).enumerate() {
        if w[0].group == w[1].group {
            return Err(Error::NotAlternating(k + 1));
        }
    }
    recurse(factors.to_vec(), n, expect)
}

fn recurse<F>(factors: Vec<Factor>, n: usize, expect: &F) -> Result<AlgebraElement>
where
    F: Fn(usize, &Poly) -> Result<AlgebraElement>,
{
    if factors.is_empty() {
        return Ok(AlgebraElement::identity(n));
    }
    if factors.len() == 1 {
        let f = &factors[0];
        return if f.centered {
            Ok(AlgebraElement::zero(n))
        } else {
            expect(f.group, &f.poly)
        };
    }
    let Some(k) = factors.iter().position(|f| !f.centered) else {
        return Ok(AlgebraElement::zero(n));
    };
    let e = expect(factors[k].group, &factors[k].poly)?;

    // Centered part.
    let mut centered = factors.clone();
    centered[k].centered = true;
    let mut total = recurse(centered, n, expect)?;

    // E(X_k) absorbed into its neighbours.
    let mut rest = factors;
    rest.remove(k);
    if k == 0 {
        rest[0].poly = poly_product(&alg_poly(&e), &rest[0].poly);
    } else if k == rest.len() {
        let last = rest.last_mut().expect("nonempty");
        last.poly = poly_product(&last.poly, &alg_poly(&e));
    } else if rest[k - 1].group != rest[k].group {
        rest[k - 1].poly = poly_product(&rest[k - 1].poly, &alg_poly(&e));
    } else {
        let next = rest.remove(k);
        let prev = &rest[k - 1];
        let ep = if prev.centered { expect(prev.group, &prev.poly)? } else { AlgebraElement::zero(n) };
        let en = if next.centered { expect(next.group, &next.poly)? } else { AlgebraElement::zero(n) };
        let merged = poly_product(&poly_product(&prev.explicit(&ep), &alg_poly(&e)), &next.explicit(&en));
        rest[k - 1] = Factor {
            group: prev.group,
            poly: merged,
            centered: false,
        };
    }
    let absorbed = recurse(rest, n, expect)?;
    total = &total + &absorbed;
    Ok(total)
}

/// `E(X₁⋯X_l)` computed directly in the Fock space.
pub fn direct_expectation(m: &Bimodule, factors: &[Factor]) -> Result<AlgebraElement> {
    let n = m.fusion().len();
    let mut v = FockVector::omega(n);
    for f in factors {
        let mut next = apply_poly(m, &f.poly, &v)?;
        if f.centered {
            let e = expectation(m, &f.poly)?;
            next = next.add(&apply_algebra(m, &e, &v).scale(C64::new(-1.0, 0.0)));
        }
        v = next;
    }
    Ok(vacuum_component(m, &v))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FreenessReport {
    pub words: usize,
    /// `max ‖E(T₁⋯T_l)‖` over centered alternating words.
    pub centered: f64,
    /// Same for the non-centered control words.
    pub control: f64,
    /// `max ‖recursion − direct‖` over mixed words.
    pub recursion: f64,
}

/// Closes each group under the conjugation and checks the groups are disjoint.
pub fn prepare_groups(m: &Bimodule, groups: &[Vec<BasisVector>]) -> Result<Vec<Vec<BasisVector>>> {
    let closed: Vec<Vec<BasisVector>> = groups.iter().map(|g| bar_closure(m, g.iter().copied())).collect();
    for (i, a) in closed.iter().enumerate() {
        for b in &closed[i + 1..] {
            if let Some(x) = a.iter().find(|x| b.binary_search(x).is_ok()) {
                return Err(Error::GroupOverlap(x.display(m.fusion())));
            }
        }
    }
    Ok(closed)
}

fn random_group_poly(group: &[BasisVector], rng: &mut impl Rng) -> Poly {
    let monomials = rng.random_range(1..=2);
    (0..monomials)
        .map(|_| {
            let len = rng.random_range(1..=2);
            let atoms = (0..len)
                .map(|_| {
                    let mut xi = BimoduleVector::zero();
                    for _ in 0..rng.random_range(1..=2) {
                        xi.add_term(group[rng.random_range(0..group.len())], random_c64(rng));
                    }
                    Atom::Gamma(xi)
                })
                .collect();
            (random_c64(rng), atoms)
        })
        .collect()
}

/// Random alternating word of `len` factors over the given groups.
pub fn random_alternating_word(
    groups: &[Vec<BasisVector>],
    len: usize,
    centered: bool,
    rng: &mut impl Rng,
) -> Vec<Factor> {
    let mut out: Vec<Factor> = Vec::with_capacity(len);
    for _ in 0..len {
        let group = loop {
            let g = rng.random_range(0..groups.len());
            if out.last().is_none_or(|f| f.group != g) {
                break g;
            }
        };
        out.push(Factor {
            group,
            poly: random_group_poly(&groups[group], rng),
            centered,
        });
    }
    out
}

/// Samples centered alternating words and reports `max ‖E(word)‖`, along with
/// non-centered controls and the recursion cross-check.
pub fn freeness_check(
    m: &Bimodule,
    groups: &[Vec<BasisVector>],
    trials: usize,
    seed: u64,
) -> Result<FreenessReport> {
    let groups = prepare_groups(m, groups)?;
    if groups.len() < 2 || groups.iter().any(Vec::is_empty) {
        return Err(Error::Schema("freeness needs at least two nonempty groups".into()));
    }
    let n = m.fusion().len();
    let reports = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let len = rng.random_range(1..=4);
            let word = random_alternating_word(&groups, len, true, &mut rng);
            let centered = direct_expectation(m, &word)?.norm_inf();

            let control_word: Vec<Factor> = word
                .iter()
                .cloned()
                .map(|f| Factor { centered: false, ..f })
                .collect();
            let control = direct_expectation(m, &control_word)?.norm_inf();

            let mixed: Vec<Factor> = control_word
                .into_iter()
                .map(|f| Factor {
                    centered: rng.random_bool(0.5),
                    ..f
                })
                .collect();
            let direct = direct_expectation(m, &mixed)?;
            let rec = amalgamated_moment_recursion(&mixed, n, &|_, p| expectation(m, p))?;
            Ok((centered, control, (&direct - &rec).norm_inf()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = FreenessReport {
        words: trials,
        ..Default::default()
    };
    for (a, b, c) in reports {
        r.centered = r.centered.max(a);
        r.control = r.control.max(b);
        r.recursion = r.recursion.max(c);
    }
    Ok(r)
}

/// Basis vectors grouped by letter pair `{α, ᾱ}`, one group per listed object.
pub fn letter_groups(m: &Bimodule, objects: &[Label]) -> Vec<Vec<BasisVector>> {
    objects
        .iter()
        .map(|&o| {
            m.basis()
                .iter()
                .filter(|b| b.letter.object == o)
                .copied()
                .collect()
        })
        .collect()
}
