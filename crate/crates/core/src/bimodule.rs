//! The pre-Hilbert bimodule `H(1)` over `A(1) = ⊕_β C I_β`, with its
//! algebra-valued inner product, the conjugation `ξ ↦ ξ̄` and the Tomita
//! structure `S`, `U(z)`.
//!
//! Vectors are finite linear combinations of basis vectors
//! `ξ ∈ Hom(β₁, β₂ ⊗ α)`, written `src = β₁`, `dst = β₂`. The left action of
//! `I_γ` keeps terms with `dst = γ`, the right action keeps `src = γ`, and in a
//! tensor `ξ₁ ⊗ ξ₂` we require `src(ξ₁) = dst(ξ₂)`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionData, Label, Lambdas, LetterId};

pub type C64 = Complex64;

/// `Σ_β c_β I_β` in the abelian base algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    pub coeffs: Vec<C64>,
}

impl AlgebraElement {
    pub fn zero(n: usize) -> Self {
        Self {
            coeffs: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            coeffs: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// The minimal projection `I_β`.
    pub fn projection(n: usize, beta: Label) -> Self {
        let mut e = Self::zero(n);
        e.coeffs[beta] = C64::new(1.0, 0.0);
        e
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            coeffs: values.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, beta: Label) -> C64 {
        self.coeffs[beta]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `τ(Σ c_β I_β) = Σ c_β d_β`.
    pub fn trace(&self, dims: &[f64]) -> C64 {
        self.coeffs.iter().zip(dims).map(|(c, d)| c * d).sum()
    }

    pub fn is_positive(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0 && c.re >= 0.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        AlgebraElement {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        AlgebraElement {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: Self) -> AlgebraElement {
        AlgebraElement {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a * b).collect(),
        }
    }
}

/// An element of the orthonormal basis of isometries of `Hom(src, dst ⊗ letter)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisVector {
    pub src: Label,
    pub dst: Label,
    pub letter: LetterId,
    pub index: u32,
}

impl BasisVector {
    pub fn display(&self, f: &FusionData) -> String {
        format!(
            "{}->{}:{}#{}",
            f.label(self.src),
            f.label(self.dst),
            f.letter_name(self.letter),
            self.index
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BimoduleVector {
    terms: BTreeMap<BasisVector, C64>,
}

impl BimoduleVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(b: BasisVector) -> Self {
        Self::term(b, C64::new(1.0, 0.0))
    }

    pub fn term(b: BasisVector, c: C64) -> Self {
        let mut v = Self::zero();
        v.add_term(b, c);
        v
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (BasisVector, C64)>) -> Self {
        let mut v = Self::zero();
        for (b, c) in terms {
            v.add_term(b, c);
        }
        v
    }

    pub fn add_term(&mut self, b: BasisVector, c: C64) {
        let e = self.terms.entry(b).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&b);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisVector, &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, b: &BasisVector) -> C64 {
        self.terms.get(b).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_terms(self.terms.iter().map(|(b, c)| (*b, c * s)))
    }

    /// Largest coefficient modulus.
    pub fn norm_inf(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn left_act(&self, a: &AlgebraElement) -> Self {
        Self::from_terms(self.terms.iter().map(|(b, c)| (*b, a.get(b.dst) * c)))
    }

    pub fn right_act(&self, a: &AlgebraElement) -> Self {
        Self::from_terms(self.terms.iter().map(|(b, c)| (*b, c * a.get(b.src))))
    }

    pub fn to_terms(&self, f: &FusionData) -> Vec<VectorTerm> {
        self.terms
            .iter()
            .map(|(b, c)| VectorTerm {
                src: f.label(b.src).to_string(),
                dst: f.label(b.dst).to_string(),
                letter: f.letter_name(b.letter),
                index: b.index,
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    pub fn from_json_terms(m: &Bimodule, terms: &[VectorTerm]) -> Result<Self> {
        let f = m.fusion();
        let mut v = Self::zero();
        for t in terms {
            let b = m.basis_vector(
                f.index_of(&t.src)?,
                f.index_of(&t.dst)?,
                f.parse_letter(&t.letter)?,
                t.index,
            )?;
            v.add_term(b, C64::new(t.re, t.im));
        }
        Ok(v)
    }
}

impl Add for &BimoduleVector {
    type Output = BimoduleVector;
    fn add(self, rhs: Self) -> BimoduleVector {
        let mut v = self.clone();
        for (b, c) in rhs.terms() {
            v.add_term(*b, *c);
        }
        v
    }
}

impl Sub for &BimoduleVector {
    type Output = BimoduleVector;
    fn sub(self, rhs: Self) -> BimoduleVector {
        self + &(-rhs)
    }
}

impl Neg for &BimoduleVector {
    type Output = BimoduleVector;
    fn neg(self) -> BimoduleVector {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// JSON form of one term of a [`BimoduleVector`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorTerm {
    pub src: String,
    pub dst: String,
    pub letter: String,
    pub index: u32,
    pub re: f64,
    pub im: f64,
}

/// `H(1)` together with the chosen Tomita structure.
#[derive(Clone, Debug)]
pub struct Bimodule {
    fusion: FusionData,
    lambdas: Lambdas,
    basis: Vec<BasisVector>,
    bar_table: Vec<(f64, usize)>,
}

impl Bimodule {
    pub fn new(fusion: FusionData, lambdas: Lambdas) -> Result<Self> {
        if lambdas.len() != fusion.len() {
            return Err(Error::Lambda("λ must be assigned to every label".into()));
        }
        let mut basis = Vec::new();
        for src in 0..fusion.len() {
            for dst in 0..fusion.len() {
                for letter in fusion.letter_ids() {
                    for index in 0..fusion.hom_dim(src, dst, letter) {
                        basis.push(BasisVector {
                            src,
                            dst,
                            letter,
                            index,
                        });
                    }
                }
            }
        }
        basis.sort();
        let mut m = Self {
            fusion,
            lambdas,
            basis,
            bar_table: Vec::new(),
        };
        m.bar_table = (0..m.basis.len())
            .map(|i| {
                let (s, b) = m.bar(m.basis[i]);
                (s, m.basis_index(&b).expect("Frobenius reciprocity keeps bar inside the basis"))
            })
            .collect();
        Ok(m)
    }

    pub fn fusion(&self) -> &FusionData {
        &self.fusion
    }

    pub fn lambdas(&self) -> &Lambdas {
        &self.lambdas
    }

    pub fn dims(&self) -> &[f64] {
        self.fusion.dims()
    }

    /// Every basis vector of `H(1)`, sorted.
    pub fn basis(&self) -> &[BasisVector] {
        &self.basis
    }

    pub fn basis_index(&self, b: &BasisVector) -> Option<usize> {
        self.basis.binary_search(b).ok()
    }

    pub fn basis_at(&self, i: usize) -> BasisVector {
        self.basis[i]
    }

    /// Bar scale and basis index of the conjugate of basis vector `i`.
    pub fn bar_index(&self, i: usize) -> (f64, usize) {
        self.bar_table[i]
    }

    pub fn basis_from(&self, src: Label) -> impl Iterator<Item = &BasisVector> {
        self.basis.iter().filter(move |b| b.src == src)
    }

    pub fn basis_vector(
        &self,
        src: Label,
        dst: Label,
        letter: LetterId,
        index: u32,
    ) -> Result<BasisVector> {
        let n = self.fusion.len();
        if src >= n || dst >= n || letter.object >= n {
            return Err(Error::UnknownLabel(format!("{src}/{dst}/{}", letter.object)));
        }
        let dim = self.fusion.hom_dim(src, dst, letter);
        if index >= dim {
            return Err(Error::Schema(format!(
                "index {index} out of range: dim Hom({}, {} ⊗ {}) = {dim}",
                self.fusion.label(src),
                self.fusion.label(dst),
                self.fusion.letter_name(letter)
            )));
        }
        Ok(BasisVector {
            src,
            dst,
            letter,
            index,
        })
    }

    pub fn lambda(&self, letter: LetterId) -> f64 {
        self.lambdas.letter(letter)
    }

    /// Conjugation on basis vectors: `ξ ↦ √(d_src/d_dst) · ξ'` where
    /// `ξ' ∈ Hom(dst, src ⊗ ᾱ)` carries the same multiplicity index.
    pub fn bar(&self, v: BasisVector) -> (f64, BasisVector) {
        let scale = (self.fusion.dim(v.src) / self.fusion.dim(v.dst)).sqrt();
        (
            scale,
            BasisVector {
                src: v.dst,
                dst: v.src,
                letter: v.letter.bar(),
                index: v.index,
            },
        )
    }

    /// Conjugate-linear extension of `ξ ↦ ξ̄`.
    pub fn bar_vector(&self, v: &BimoduleVector) -> BimoduleVector {
        BimoduleVector::from_terms(v.terms().map(|(b, c)| {
            let (s, bb) = self.bar(*b);
            (bb, c.conj() * s)
        }))
    }

    /// `S ξ = √λ_α ξ̄`, extended conjugate-linearly.
    pub fn apply_s(&self, v: &BimoduleVector) -> BimoduleVector {
        self.apply_s_with(v, |b| self.bar(b))
    }

    fn apply_s_with(
        &self,
        v: &BimoduleVector,
        bar: impl Fn(BasisVector) -> (f64, BasisVector),
    ) -> BimoduleVector {
        BimoduleVector::from_terms(v.terms().map(|(b, c)| {
            let (s, bb) = bar(*b);
            (bb, c.conj() * s * self.lambda(b.letter).sqrt())
        }))
    }

    /// `λ_α^{iz}` for a letter.
    pub fn u_factor(&self, z: C64, letter: LetterId) -> C64 {
        (C64::i() * z * self.lambda(letter).ln()).exp()
    }

    /// `U(z) ξ = λ_α^{iz} ξ`.
    pub fn apply_u(&self, z: C64, v: &BimoduleVector) -> BimoduleVector {
        BimoduleVector::from_terms(v.terms().map(|(b, c)| (*b, c * self.u_factor(z, b.letter))))
    }

    /// `⟨v, w⟩_A`, conjugate-linear in `v`. Basis vectors are orthonormal
    /// isometries: `⟨ξ, η⟩_A = δ_{ξη} I_{src ξ}`.
    pub fn inner_product_a(&self, v: &BimoduleVector, w: &BimoduleVector) -> AlgebraElement {
        let mut out = AlgebraElement::zero(self.fusion.len());
        for (b, c) in v.terms() {
            let d = w.coeff(b);
            out.coeffs[b.src] += c.conj() * d;
        }
        out
    }

    /// Scalar inner product `τ(⟨v, w⟩_A)`.
    pub fn inner(&self, v: &BimoduleVector, w: &BimoduleVector) -> C64 {
        self.inner_product_a(v, w).trace(self.dims())
    }

    /// Nested inner product of elementary tensors
    /// `⟨ξ₁⊗…⊗ξₙ, η₁⊗…⊗ηₙ⟩_A = ⟨ξₙ, ⟨…⟨ξ₁,η₁⟩_A η₂…⟩ ηₙ⟩_A`.
    ///
    /// Degree-zero tensors are not covered here; see [`Self::algebra_inner_product`].
    pub fn tensor_inner_product(
        &self,
        u: &[BasisVector],
        w: &[BasisVector],
    ) -> Result<AlgebraElement> {
        if u.len() != w.len() {
            return Err(Error::NotComposable(format!(
                "tensor degrees differ: {} vs {}",
                u.len(),
                w.len()
            )));
        }
        self.check_chain(u)?;
        self.check_chain(w)?;
        let n = self.fusion.len();
        let mut acc = AlgebraElement::identity(n);
        for (x, y) in u.iter().zip(w) {
            let left = BimoduleVector::basis(*x);
            let right = BimoduleVector::basis(*y).left_act(&acc);
            acc = self.inner_product_a(&left, &right);
        }
        Ok(acc)
    }

    /// Degree-zero part of the Fock inner product: `⟨A, B⟩ = A* B`.
    pub fn algebra_inner_product(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        &a.adjoint() * b
    }

    pub fn check_chain(&self, chain: &[BasisVector]) -> Result<()> {
        for (k, pair) in chain.windows(2).enumerate() {
            if pair[0].src != pair[1].dst {
                return Err(Error::NotComposable(format!(
                    "factor {} has source {} but factor {} has target {}",
                    k + 1,
                    self.fusion.label(pair[0].src),
                    k + 2,
                    self.fusion.label(pair[1].dst)
                )));
            }
        }
        Ok(())
    }

    pub fn random_vector(&self, rng: &mut impl Rng, max_terms: usize) -> BimoduleVector {
        let k = rng.random_range(1..=max_terms.max(1));
        BimoduleVector::from_terms((0..k).map(|_| {
            let b = self.basis[rng.random_range(0..self.basis.len())];
            (b, random_c64(rng))
        }))
    }

    pub fn random_algebra(&self, rng: &mut impl Rng) -> AlgebraElement {
        AlgebraElement {
            coeffs: (0..self.fusion.len()).map(|_| random_c64(rng)).collect(),
        }
    }

    /// Checks the Tomita bimodule axioms on `samples` random vector pairs.
    pub fn check_tomita_axioms(&self, samples: usize, seed: u64) -> TomitaReport {
        self.check_tomita_axioms_with(samples, seed, |b| self.bar(b))
    }

    /// As [`Self::check_tomita_axioms`] but with a caller-supplied conjugation
    /// on basis vectors; used for negative controls.
    pub fn check_tomita_axioms_with(
        &self,
        samples: usize,
        seed: u64,
        bar: impl Fn(BasisVector) -> (f64, BasisVector),
    ) -> TomitaReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = TomitaReport::default();
        let s = |v: &BimoduleVector| self.apply_s_with(v, &bar);
        for _ in 0..samples {
            let xi = self.random_vector(&mut rng, 6);
            let eta = self.random_vector(&mut rng, 6);
            let a = self.random_algebra(&mut rng);
            let b = self.random_algebra(&mut rng);
            let z = random_c64(&mut rng);
            let w = random_c64(&mut rng);

            let lhs = s(&xi.left_act(&a).right_act(&b));
            let rhs = s(&xi).left_act(&b.adjoint()).right_act(&a.adjoint());
            r.s_bimodule = r.s_bimodule.max((&lhs - &rhs).norm_inf());

            r.s_involution = r.s_involution.max((&s(&s(&xi)) - &xi).norm_inf());

            let uu = self.apply_u(z, &self.apply_u(w, &xi));
            r.u_group = r.u_group.max((&uu - &self.apply_u(z + w, &xi)).norm_inf());

            let lhs = s(&self.apply_u(z, &xi));
            let rhs = self.apply_u(z.conj(), &s(&xi));
            r.s_u_conjugation = r.s_u_conjugation.max((&lhs - &rhs).norm_inf());

            let lhs = self.inner(&xi, &self.apply_u(z, &eta));
            let rhs = self.inner(&self.apply_u(-z.conj(), &xi), &eta);
            r.u_adjoint = r.u_adjoint.max((lhs - rhs).norm());

            let lhs = self.apply_u(z, &xi.left_act(&a).right_act(&b));
            let rhs = self.apply_u(z, &xi).left_act(&a).right_act(&b);
            r.u_bimodular = r.u_bimodular.max((&lhs - &rhs).norm_inf());

            let lhs = self.inner(&s(&xi), &s(&eta));
            let rhs = self.inner(&eta, &self.apply_u(C64::new(0.0, -1.0), &xi));
            r.s_inner = r.s_inner.max((lhs - rhs).norm());
        }
        r.samples = samples;
        r
    }
}

/// Maximum residual per axiom over the sampled vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TomitaReport {
    pub samples: usize,
    /// `S(A·ξ·B) = B*·S(ξ)·A*`
    pub s_bimodule: f64,
    /// `S² = id`
    pub s_involution: f64,
    /// `U(z)U(w) = U(z+w)`
    pub u_group: f64,
    /// `S U(z) = U(z̄) S`
    pub s_u_conjugation: f64,
    /// `⟨ξ, U(z)η⟩ = ⟨U(−z̄)ξ, η⟩`
    pub u_adjoint: f64,
    /// `U(z)` commutes with both actions
    pub u_bimodular: f64,
    /// `⟨Sξ, Sη⟩ = ⟨η, U(−i)ξ⟩`
    pub s_inner: f64,
}

impl TomitaReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.s_bimodule,
            self.s_involution,
            self.u_group,
            self.s_u_conjugation,
            self.u_adjoint,
            self.u_bimodular,
            self.s_inner,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub(crate) fn random_c64(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::LambdaSpec;

    fn module(cat: &str, lam: &str) -> Bimodule {
        let f = FusionData::catalog(cat).unwrap();
        let l = lam.parse::<LambdaSpec>().unwrap().resolve(&f).unwrap();
        Bimodule::new(f, l).unwrap()
    }

    fn bv(m: &Bimodule, src: &str, dst: &str, letter: &str) -> BasisVector {
        let f = m.fusion();
        m.basis_vector(
            f.index_of(src).unwrap(),
            f.index_of(dst).unwrap(),
            f.parse_letter(letter).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn bar_on_trivial_category() {
        let m = module("trivial", "uniform:1");
        let xi = bv(&m, "1", "1", "1");
        let (s, b) = m.bar(xi);
        assert_eq!(s, 1.0);
        assert_eq!(b, bv(&m, "1", "1", "1~"));
    }

    #[test]
    fn bar_scale_on_fibonacci() {
        let m = module("fib", "uniform:1");
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let xi = bv(&m, "1", "t", "t");
        let (s, b) = m.bar(xi);
        assert!((s - (1.0 / phi).sqrt()).abs() < 1e-15);
        assert_eq!(b, bv(&m, "t", "1", "t~"));
        // Anti-unitarity fixes the scale: ‖ξ̄‖² = s² d_t = d_1 = ‖ξ‖².
        let v = BimoduleVector::basis(xi);
        let vb = m.bar_vector(&v);
        assert!((m.inner(&vb, &vb) - m.inner(&v, &v)).norm() < 1e-14);
    }

    #[test]
    fn bar_is_involutive() {
        let m = module("ising", "uniform:1");
        for &b in m.basis() {
            let (s1, b1) = m.bar(b);
            let (s2, b2) = m.bar(b1);
            assert_eq!(b2, b);
            assert!((s1 * s2 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn s_examples() {
        let m = module("trivial", "uniform:4");
        let xi = bv(&m, "1", "1", "1");
        let s = m.apply_s(&BimoduleVector::basis(xi));
        assert_eq!(s.coeff(&bv(&m, "1", "1", "1~")), C64::new(2.0, 0.0));

        let m = module("fib", "uniform:1");
        let v = BimoduleVector::term(bv(&m, "t", "t", "t"), C64::new(0.5, 0.25));
        assert_eq!(m.apply_s(&v), m.bar_vector(&v));
    }

    #[test]
    fn u_examples() {
        let m = module("fib", "t=2");
        let v = BimoduleVector::basis(bv(&m, "1", "t", "t"));
        assert_eq!(m.apply_u(C64::new(0.0, 0.0), &v), v);
        let u = m.apply_u(C64::new(0.0, -1.0), &v);
        assert!((u.coeff(&bv(&m, "1", "t", "t")) - C64::new(2.0, 0.0)).norm() < 1e-15);
        let m1 = module("fib", "uniform:1");
        assert_eq!(m1.apply_u(C64::new(0.7, -2.0), &v), v);
    }

    #[test]
    fn inner_product_examples() {
        let m = module("fib", "t=2");
        for &b in m.basis() {
            let v = BimoduleVector::basis(b);
            let vb = m.bar_vector(&v);
            assert_eq!(m.inner_product_a(&v, &vb).norm_inf(), 0.0);
            assert_eq!(
                m.inner_product_a(&v, &v),
                AlgebraElement::projection(2, b.src)
            );
            let two = v.scale(C64::new(2.0, 0.0));
            let three = v.scale(C64::new(3.0, 0.0));
            assert_eq!(
                m.inner_product_a(&two, &three),
                AlgebraElement::projection(2, b.src).scale(C64::new(6.0, 0.0))
            );
            assert!((m.inner(&v, &v).re - m.dims()[b.src]).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_inner_products() {
        let m = module("fib", "uniform:1");
        let a = bv(&m, "t", "1", "t~");
        let b = bv(&m, "t", "t", "t");
        let c = bv(&m, "1", "t", "t");
        let path = [a, b, c];
        let ip = m.tensor_inner_product(&path, &path).unwrap();
        assert_eq!(ip, AlgebraElement::projection(2, c.src));
        let other = [a, bv(&m, "t", "t", "t~"), bv(&m, "1", "t", "t~")];
        assert_eq!(m.tensor_inner_product(&path, &other).unwrap().norm_inf(), 0.0);
        let broken = [c, c];
        assert!(matches!(
            m.tensor_inner_product(&broken, &broken),
            Err(Error::NotComposable(_))
        ));
        let x = AlgebraElement::from_real(&[2.0, 3.0]);
        let y = AlgebraElement::from_real(&[5.0, 7.0]);
        assert_eq!(
            m.algebra_inner_product(&x, &y),
            AlgebraElement::from_real(&[10.0, 21.0])
        );
    }

    #[test]
    fn tomita_axioms_hold() {
        let m = module("trivial", "uniform:1");
        // Exact up to the ordering of complex products.
        assert!(m.check_tomita_axioms(50, 1).max_residual() <= 1e-15);
        let m = module("fib", "t=2");
        let r = m.check_tomita_axioms(100, 7);
        assert!(r.max_residual() < 1e-12, "{r:?}");
    }

    #[test]
    fn unscaled_bar_breaks_axiom_3d() {
        let m = module("fib", "t=2");
        let r = m.check_tomita_axioms_with(100, 7, |b| (1.0, m.bar(b).1));
        assert!(r.s_inner > 1e-3, "{r:?}");
    }

    #[test]
    fn vector_json_roundtrip() {
        let m = module("fib", "t=2");
        let v = BimoduleVector::term(bv(&m, "1", "t", "t"), C64::new(0.5, -1.0));
        let terms = v.to_terms(m.fusion());
        let json = serde_json::to_string(&terms).unwrap();
        assert!(json.contains(r#""letter":"t""#));
        let back: Vec<VectorTerm> = serde_json::from_str(&json).unwrap();
        assert_eq!(BimoduleVector::from_json_terms(&m, &back).unwrap(), v);
    }
}
