//! Truncated full Fock space `⊕_{n≤N} H(1)^{⊗n}` and the operators acting on it.
//!
//! A path of degree `n ≥ 1` is a composable chain `ξ₁ ⊗ … ⊗ ξₙ` of basis
//! vectors (`src ξ_k = dst ξ_{k+1}`); degree zero holds the projections `I_β`.
//! Paths are mutually orthogonal and `‖ξ₁⊗…⊗ξₙ‖² = d_{src ξₙ}`, so operators
//! keep their path coordinates and adjoints are taken in the weighted inner
//! product.
//!
//! Two equivalent backends are provided: lazy application to sparse
//! [`FockVector`]s, and [`SparseOperator`] matrices on an enumerated
//! [`FockBasis`]. Creation beyond the depth `N` is dropped.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bimodule::{random_c64, AlgebraElement, BasisVector, Bimodule, BimoduleVector, C64};
use crate::error::{Error, Result};
use crate::fusion::Label;

pub const DEFAULT_DEPTH: usize = 6;
pub const DEFAULT_BASIS_CAP: usize = 2_000_000;
pub const MOMENT_TOLERANCE: f64 = 1e-10;
pub const STRUCTURAL_TOLERANCE: f64 = 1e-12;

/// A basis vector of the Fock space. `factors` are indices into
/// [`Bimodule::basis`], leftmost factor first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FockPath {
    right: Label,
    factors: Vec<u32>,
}

impl Ord for FockPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.factors
            .len()
            .cmp(&other.factors.len())
            .then_with(|| self.factors.cmp(&other.factors))
            .then_with(|| self.right.cmp(&other.right))
    }
}

impl PartialOrd for FockPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FockPath {
    /// The degree-zero vector `I_β`.
    pub fn vacuum(beta: Label) -> Self {
        Self {
            right: beta,
            factors: Vec::new(),
        }
    }

    /// Builds a path from basis vectors, checking composability.
    pub fn from_vectors(m: &Bimodule, chain: &[BasisVector]) -> Result<Self> {
        m.check_chain(chain)?;
        let factors = chain
            .iter()
            .map(|b| {
                m.basis_index(b)
                    .map(|i| i as u32)
                    .ok_or_else(|| Error::MissingPath(b.display(m.fusion())))
            })
            .collect::<Result<Vec<_>>>()?;
        let right = chain
            .last()
            .map(|b| b.src)
            .ok_or_else(|| Error::NotComposable("empty chain; use FockPath::vacuum".into()))?;
        Ok(Self { right, factors })
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[u32] {
        &self.factors
    }

    /// Label of the right action (source of the last factor).
    pub fn right(&self) -> Label {
        self.right
    }

    /// Label of the left action (target of the first factor).
    pub fn left(&self, m: &Bimodule) -> Label {
        match self.factors.first() {
            Some(&i) => m.basis_at(i as usize).dst,
            None => self.right,
        }
    }

    pub fn vectors(&self, m: &Bimodule) -> Vec<BasisVector> {
        self.factors.iter().map(|&i| m.basis_at(i as usize)).collect()
    }

    fn prepend(&self, i: usize) -> Self {
        let mut factors = Vec::with_capacity(self.factors.len() + 1);
        factors.push(i as u32);
        factors.extend_from_slice(&self.factors);
        Self {
            right: self.right,
            factors,
        }
    }

    fn tail(&self) -> Self {
        Self {
            right: self.right,
            factors: self.factors[1..].to_vec(),
        }
    }

    pub fn display(&self, m: &Bimodule) -> String {
        if self.factors.is_empty() {
            return format!("I[{}]", m.fusion().label(self.right));
        }
        self.vectors(m)
            .iter()
            .map(|b| b.display(m.fusion()))
            .collect::<Vec<_>>()
            .join(" (x) ")
    }
}

/// Finite linear combination of Fock paths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FockVector {
    terms: BTreeMap<FockPath, C64>,
}

impl FockVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn path(p: FockPath) -> Self {
        let mut v = Self::zero();
        v.add_term(p, C64::new(1.0, 0.0));
        v
    }

    /// `Ω = Σ_β I_β`.
    pub fn omega(n: usize) -> Self {
        let mut v = Self::zero();
        for b in 0..n {
            v.add_term(FockPath::vacuum(b), C64::new(1.0, 0.0));
        }
        v
    }

    pub fn add_term(&mut self, p: FockPath, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        *self.terms.entry(p).or_insert(C64::new(0.0, 0.0)) += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockPath, &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &FockPath) -> C64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut v = Self::zero();
        for (p, c) in self.terms() {
            v.add_term(p.clone(), c * s);
        }
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.clone();
        for (p, c) in other.terms() {
            v.add_term(p.clone(), *c);
        }
        v
    }

    pub fn norm_inf(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// `L(ξ)`: prepend `ξ` where it composes; paths above `max_degree` are dropped.
pub fn create(
    m: &Bimodule,
    xi: &BimoduleVector,
    v: &FockVector,
    max_degree: Option<usize>,
) -> Result<FockVector> {
    let gens = indexed_terms(m, xi)?;
    let mut out = FockVector::zero();
    for (p, c) in v.terms() {
        if max_degree.is_some_and(|n| p.degree() >= n) {
            continue;
        }
        let left = p.left(m);
        for &(i, x) in &gens {
            if m.basis_at(i).src == left {
                out.add_term(p.prepend(i), x * c);
            }
        }
    }
    Ok(out)
}

/// `L*(η)`: `ξ₁⊗rest ↦ ⟨η, ξ₁⟩_A · rest`; kills degree zero.
pub fn annihilate(m: &Bimodule, eta: &BimoduleVector, v: &FockVector) -> Result<FockVector> {
    let gens: HashMap<usize, C64> = indexed_terms(m, eta)?.into_iter().collect();
    let mut out = FockVector::zero();
    for (p, c) in v.terms() {
        if let Some(&first) = p.factors.first() {
            if let Some(x) = gens.get(&(first as usize)) {
                out.add_term(p.tail(), x.conj() * c);
            }
        }
    }
    Ok(out)
}

/// `Γ(ξ) = L(ξ) + L*(S ξ)`.
pub fn apply_gamma(
    m: &Bimodule,
    xi: &BimoduleVector,
    v: &FockVector,
    max_degree: Option<usize>,
) -> Result<FockVector> {
    let up = create(m, xi, v, max_degree)?;
    let down = annihilate(m, &m.apply_s(xi), v)?;
    Ok(up.add(&down))
}

/// Left action of the base algebra.
pub fn apply_algebra(m: &Bimodule, a: &AlgebraElement, v: &FockVector) -> FockVector {
    let mut out = FockVector::zero();
    for (p, c) in v.terms() {
        out.add_term(p.clone(), a.get(p.left(m)) * c);
    }
    out
}

/// `⟨v, w⟩ = Σ_p conj(v_p) w_p d_{right(p)}`.
pub fn weighted_inner(m: &Bimodule, v: &FockVector, w: &FockVector) -> C64 {
    v.terms()
        .map(|(p, c)| c.conj() * w.coeff(p) * m.dims()[p.right])
        .sum()
}

/// Degree-zero part of a vector, read as an algebra element.
pub fn vacuum_component(m: &Bimodule, v: &FockVector) -> AlgebraElement {
    let mut out = AlgebraElement::zero(m.fusion().len());
    for (p, c) in v.terms() {
        if p.degree() == 0 {
            out.coeffs[p.right] += c;
        }
    }
    out
}

fn indexed_terms(m: &Bimodule, xi: &BimoduleVector) -> Result<Vec<(usize, C64)>> {
    xi.terms()
        .map(|(b, c)| {
            m.basis_index(b)
                .map(|i| (i, *c))
                .ok_or_else(|| Error::MissingPath(b.display(m.fusion())))
        })
        .collect()
}

/// Ordered list of all Fock paths of degree `≤ depth`.
#[derive(Clone, Debug)]
pub struct FockBasis {
    paths: Vec<FockPath>,
    index: HashMap<FockPath, usize>,
    depth: usize,
    counts: Vec<usize>,
    weights: Arc<Vec<f64>>,
    vacua: Vec<usize>,
    closed: bool,
}

impl FockBasis {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of paths per degree `0..=depth`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn paths(&self) -> &[FockPath] {
        &self.paths
    }

    pub fn path(&self, i: usize) -> &FockPath {
        &self.paths[i]
    }

    pub fn index_of(&self, p: &FockPath) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Squared norms `d_{right(p)}` of the basis paths.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Basis position of `I_β`.
    pub fn vacuum_index(&self, beta: Label) -> usize {
        self.vacua[beta]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.paths[i].degree()
    }

    /// `false` for partial bases, where operator images leaving the basis
    /// are dropped instead of reported.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// A partial basis on the given paths (vacua are always added).
    pub fn from_paths(m: &Bimodule, paths: impl IntoIterator<Item = FockPath>, depth: usize) -> Self {
        let n = m.fusion().len();
        let mut all: Vec<FockPath> = (0..n).map(FockPath::vacuum).chain(paths).collect();
        all.sort_unstable();
        all.dedup();
        Self::build(m, all, depth, false)
    }

    fn build(m: &Bimodule, paths: Vec<FockPath>, depth: usize, closed: bool) -> Self {
        let index: HashMap<FockPath, usize> = paths.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let mut counts = vec![0; depth + 1];
        for p in &paths {
            counts[p.degree()] += 1;
        }
        let vacua = (0..m.fusion().len())
            .map(|b| index[&FockPath::vacuum(b)])
            .collect();
        let weights = Arc::new(paths.iter().map(|p| m.dims()[p.right]).collect());
        Self {
            paths,
            index,
            depth,
            counts,
            weights,
            vacua,
            closed,
        }
    }
}

/// All paths of degree `≤ depth` over every basis vector of `H(1)`.
pub fn enumerate_fock_basis(m: &Bimodule, depth: usize) -> Result<FockBasis> {
    enumerate_fock_basis_over(m, depth, m.basis(), DEFAULT_BASIS_CAP)
}

/// Paths built only from `generators` (the Fock space of the sub-bimodule
/// they span). Degree zero always holds every `I_β`.
pub fn enumerate_fock_basis_over(
    m: &Bimodule,
    depth: usize,
    generators: &[BasisVector],
    cap: usize,
) -> Result<FockBasis> {
    let n = m.fusion().len();
    let mut by_src: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut gens: Vec<usize> = generators
        .iter()
        .map(|b| {
            m.basis_index(b)
                .ok_or_else(|| Error::MissingPath(b.display(m.fusion())))
        })
        .collect::<Result<_>>()?;
    gens.sort_unstable();
    gens.dedup();
    for &g in &gens {
        by_src[m.basis_at(g).src].push(g);
    }

    let mut level: Vec<FockPath> = (0..n).map(FockPath::vacuum).collect();
    let mut paths = level.clone();
    if paths.len() > cap {
        return Err(Error::BasisCap {
            cap,
            degree: 0,
            count: paths.len(),
        });
    }
    for degree in 1..=depth {
        let size: usize = level.iter().map(|p| by_src[p.left(m)].len()).sum();
        if paths.len() + size > cap {
            return Err(Error::BasisCap {
                cap,
                degree,
                count: size,
            });
        }
        let mut next = Vec::with_capacity(size);
        for p in &level {
            for &g in &by_src[p.left(m)] {
                next.push(p.prepend(g));
            }
        }
        next.sort_unstable();
        paths.extend(next.iter().cloned());
        level = next;
    }
    Ok(FockBasis::build(m, paths, depth, true))
}

/// Closure of a generator set under the conjugation.
pub fn bar_closure(m: &Bimodule, gens: impl IntoIterator<Item = BasisVector>) -> Vec<BasisVector> {
    let mut out: Vec<BasisVector> = gens
        .into_iter()
        .flat_map(|b| [b, m.bar(b).1])
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Sparse matrix on a [`FockBasis`], stored by columns.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    cols: Vec<Vec<(usize, C64)>>,
    weights: Arc<Vec<f64>>,
}

impl SparseOperator {
    /// Builds column `j` from the image of basis path `j`. Images of degree
    /// above the basis depth must already have been dropped.
    pub fn from_action<F>(m: &Bimodule, basis: &FockBasis, action: F) -> Result<Self>
    where
        F: Fn(&FockVector) -> Result<FockVector> + Sync,
    {
        let cols = basis
            .paths
            .par_iter()
            .map(|p| {
                let image = action(&FockVector::path(p.clone()))?;
                let mut col = Vec::with_capacity(image.len());
                for (q, c) in image.terms() {
                    match basis.index_of(q) {
                        Some(r) => col.push((r, *c)),
                        None if q.degree() > basis.depth || !basis.closed => {}
                        None => return Err(Error::MissingPath(q.display(m))),
                    }
                }
                col.sort_unstable_by_key(|e| e.0);
                Ok(col)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cols,
            weights: basis.weights.clone(),
        })
    }

    pub fn identity(basis: &FockBasis) -> Self {
        Self::diagonal(basis, |_| C64::new(1.0, 0.0))
    }

    pub fn diagonal(basis: &FockBasis, value: impl Fn(usize) -> C64) -> Self {
        let cols = (0..basis.len())
            .map(|i| {
                let v = value(i);
                if v == C64::new(0.0, 0.0) {
                    Vec::new()
                } else {
                    vec![(i, v)]
                }
            })
            .collect();
        Self {
            cols,
            weights: basis.weights.clone(),
        }
    }

    /// Left multiplication by an element of the base algebra.
    pub fn algebra(m: &Bimodule, basis: &FockBasis, a: &AlgebraElement) -> Self {
        Self::diagonal(basis, |i| a.get(basis.path(i).left(m)))
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.cols[col]
            .binary_search_by_key(&row, |e| e.0)
            .map(|k| self.cols[col][k].1)
            .unwrap_or_default()
    }

    /// `(row, col, value)` triples, column-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |&(i, v)| (i, j, v)))
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            cols: self
                .cols
                .iter()
                .map(|c| c.iter().map(|&(i, v)| (i, v * s)).collect())
                .collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for &(i, v) in a.iter().chain(b) {
                    *acc.entry(i).or_default() += v;
                }
                acc.into_iter().filter(|e| e.1 != C64::new(0.0, 0.0)).collect()
            })
            .collect();
        Self {
            cols,
            weights: self.weights.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        let cols = other
            .cols
            .par_iter()
            .map(|bcol| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for &(k, b) in bcol {
                    for &(i, a) in &self.cols[k] {
                        *acc.entry(i).or_default() += a * b;
                    }
                }
                acc.into_iter().filter(|e| e.1 != C64::new(0.0, 0.0)).collect()
            })
            .collect();
        Self {
            cols,
            weights: self.weights.clone(),
        }
    }

    /// Adjoint in the weighted inner product: `(T*)_{pq} = conj(T_{qp}) w_q / w_p`.
    pub fn adjoint(&self) -> Self {
        let w = &self.weights;
        let mut cols: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim()];
        for (q, p, v) in self.entries() {
            cols[q].push((p, v.conj() * w[q] / w[p]));
        }
        for c in &mut cols {
            c.sort_unstable_by_key(|e| e.0);
        }
        Self {
            cols,
            weights: self.weights.clone(),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (j, col) in self.cols.iter().enumerate() {
            let xj = x[j];
            if xj == C64::new(0.0, 0.0) {
                continue;
            }
            for &(i, v) in col {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `max |self_ij − other_ij|` over entries whose row and column satisfy `keep`.
    pub fn max_diff_where(&self, other: &Self, keep: impl Fn(usize) -> bool) -> f64 {
        let d = self.sub(other);
        d.entries()
            .filter(|&(i, j, _)| keep(i) && keep(j))
            .fold(0.0, |m, (_, _, v)| m.max(v.norm()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.max_diff_where(other, |_| true)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for (i, j, v) in self.entries() {
            a[(i, j)] = v;
        }
        a
    }

    pub fn to_coo(&self, m: &Bimodule, basis: &FockBasis) -> CooDump {
        CooDump {
            basis: basis.paths.iter().map(|p| p.display(m)).collect(),
            weights: basis.weights.to_vec(),
            entries: self
                .entries()
                .map(|(i, j, v)| CooEntry {
                    row: i,
                    col: j,
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,re,im\n");
        for (i, j, v) in self.entries() {
            s.push_str(&format!("{i},{j},{:e},{:e}\n", v.re, v.im));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CooEntry {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

/// Coordinate-list export of an operator together with its basis.
#[derive(Clone, Debug, Serialize)]
pub struct CooDump {
    pub basis: Vec<String>,
    pub weights: Vec<f64>,
    pub entries: Vec<CooEntry>,
}

pub fn creation_matrix(m: &Bimodule, xi: &BimoduleVector, basis: &FockBasis) -> Result<SparseOperator> {
    let depth = basis.depth;
    SparseOperator::from_action(m, basis, |v| create(m, xi, v, Some(depth)))
}

/// `L*(η)` as a matrix.
pub fn annihilation_matrix(
    m: &Bimodule,
    eta: &BimoduleVector,
    basis: &FockBasis,
) -> Result<SparseOperator> {
    SparseOperator::from_action(m, basis, |v| annihilate(m, eta, v))
}

pub fn gamma_matrix(m: &Bimodule, xi: &BimoduleVector, basis: &FockBasis) -> Result<SparseOperator> {
    let depth = basis.depth;
    SparseOperator::from_action(m, basis, |v| apply_gamma(m, xi, v, Some(depth)))
}

/// `E(T) = Σ_β (⟨I_β, T I_β⟩ / d_β) I_β`.
pub fn conditional_expectation(
    m: &Bimodule,
    basis: &FockBasis,
    t: &SparseOperator,
) -> AlgebraElement {
    let n = m.fusion().len();
    AlgebraElement {
        coeffs: (0..n)
            .map(|b| {
                let i = basis.vacuum_index(b);
                t.get(i, i)
            })
            .collect(),
    }
}

/// `τ∘E(T) = Σ_β ⟨I_β, T I_β⟩`.
pub fn tau_e(m: &Bimodule, basis: &FockBasis, t: &SparseOperator) -> C64 {
    conditional_expectation(m, basis, t).trace(m.dims())
}

/// Diagonal modular operator and the modular conjugation on a basis.
#[derive(Clone, Debug)]
pub struct ModularData {
    /// `Δ`-eigenvalue `∏ λ_{α_k}` of each path.
    pub eigenvalues: Vec<f64>,
    /// `J(p) = scale · p'`, with `p'` the reversed barred path.
    pub conjugation: Vec<(usize, f64)>,
}

impl ModularData {
    /// Requires a bar-closed basis.
    pub fn new(m: &Bimodule, basis: &FockBasis) -> Result<Self> {
        let mut eigenvalues = Vec::with_capacity(basis.len());
        let mut conjugation = Vec::with_capacity(basis.len());
        for p in basis.paths() {
            let lam: f64 = p
                .factors
                .iter()
                .map(|&i| m.lambda(m.basis_at(i as usize).letter))
                .product();
            eigenvalues.push(lam);
            let mut scale = 1.0;
            let mut rev = Vec::with_capacity(p.degree());
            for &i in p.factors.iter().rev() {
                let (s, j) = m.bar_index(i as usize);
                scale *= s;
                rev.push(j as u32);
            }
            let q = FockPath {
                right: p.left(m),
                factors: rev,
            };
            let j = basis
                .index_of(&q)
                .ok_or_else(|| Error::MissingPath(q.display(m)))?;
            conjugation.push((j, scale));
        }
        Ok(Self {
            eigenvalues,
            conjugation,
        })
    }

    /// `Δ^{it}` as a diagonal operator.
    pub fn delta_it(&self, basis: &FockBasis, t: f64) -> SparseOperator {
        SparseOperator::diagonal(basis, |i| {
            (C64::i() * t * self.eigenvalues[i].ln()).exp()
        })
    }

    /// Antilinear `J` on a coordinate vector.
    pub fn apply_j(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (p, &(q, s)) in self.conjugation.iter().enumerate() {
            y[q] += x[p].conj() * s;
        }
        y
    }
}

/// `max |Δ^{it} Γ(ξ) Δ^{−it} − λ_α^{it} Γ(ξ)|` over entries between paths
/// of degree `≤ N − 1`.
pub fn modular_flow_check(
    m: &Bimodule,
    xi: BasisVector,
    t: f64,
    basis: &FockBasis,
) -> Result<f64> {
    let g = gamma_matrix(m, &BimoduleVector::basis(xi), basis)?;
    let modular = ModularData::new(m, basis)?;
    let lhs = modular
        .delta_it(basis, t)
        .mul(&g)
        .mul(&modular.delta_it(basis, -t));
    let rhs = g.scale(m.u_factor(C64::new(t, 0.0), xi.letter));
    let top = basis.depth.saturating_sub(1);
    Ok(lhs.max_diff_where(&rhs, |i| basis.degree(i) <= top))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VacuumReport {
    pub words: usize,
    /// `max |e T e − E(T) e|` over sampled words.
    pub compression: f64,
    /// `|e² − e|` and `|e* − e|`.
    pub projection: f64,
    /// `max |E(A T B) − A E(T) B|`.
    pub bimodularity: f64,
}

impl VacuumReport {
    pub fn max_residual(&self) -> f64 {
        self.compression.max(self.projection).max(self.bimodularity)
    }
}

/// Verifies `e T e = E(T) e` for the vacuum projection `e` and random words
/// `T` of Γ's of length `≤ depth`.
pub fn vacuum_projection_check(
    m: &Bimodule,
    basis: &FockBasis,
    words: usize,
    seed: u64,
) -> Result<VacuumReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = SparseOperator::diagonal(basis, |i| {
        if basis.degree(i) == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mut report = VacuumReport {
        words,
        projection: e.mul(&e).max_diff(&e).max(e.adjoint().max_diff(&e)),
        ..Default::default()
    };
    let gens: Vec<BasisVector> = basis
        .paths()
        .iter()
        .filter(|p| p.degree() == 1)
        .map(|p| m.basis_at(p.factors[0] as usize))
        .collect();
    if gens.is_empty() {
        return Ok(report);
    }
    for _ in 0..words {
        let len = rng.random_range(0..=basis.depth.min(4));
        let mut t = SparseOperator::identity(basis);
        for _ in 0..len {
            let mut xi = BimoduleVector::zero();
            for _ in 0..2 {
                xi.add_term(gens[rng.random_range(0..gens.len())], random_c64(&mut rng));
            }
            t = gamma_matrix(m, &xi, basis)?.mul(&t);
        }
        let ex = conditional_expectation(m, basis, &t);
        let ete = e.mul(&t).mul(&e);
        let ee = SparseOperator::algebra(m, basis, &ex).mul(&e);
        report.compression = report.compression.max(ete.max_diff(&ee));

        let a = m.random_algebra(&mut rng);
        let b = m.random_algebra(&mut rng);
        let atb = SparseOperator::algebra(m, basis, &a)
            .mul(&t)
            .mul(&SparseOperator::algebra(m, basis, &b));
        let lhs = conditional_expectation(m, basis, &atb);
        let rhs = &(&a * &ex) * &b;
        report.bimodularity = report.bimodularity.max((&lhs - &rhs).norm_inf());
    }
    Ok(report)
}

/// `Σ_β K_β ⟨I_β, Γ(ξ_L)⋯Γ(ξ₁) I_β⟩` with matrices on `basis`; `word[0]` acts
/// first. With `K ≡ 1` this is `τ∘E`.
pub fn word_functional_matrix(
    m: &Bimodule,
    word: &[BimoduleVector],
    basis: &FockBasis,
    weights: &[f64],
) -> Result<C64> {
    if basis.depth < word.len() {
        return Err(Error::DepthTooSmall {
            depth: basis.depth,
            length: word.len(),
        });
    }
    let mats = word
        .iter()
        .map(|xi| gamma_matrix(m, xi, basis))
        .collect::<Result<Vec<_>>>()?;
    let mut total = C64::new(0.0, 0.0);
    for b in 0..m.fusion().len() {
        let i = basis.vacuum_index(b);
        let mut x = vec![C64::new(0.0, 0.0); basis.len()];
        x[i] = C64::new(1.0, 0.0);
        for g in &mats {
            x = g.apply(&x);
        }
        total += x[i] * m.dims()[b] * weights[b];
    }
    Ok(total)
}

/// `τ∘E(Γ(ξ_L)⋯Γ(ξ₁))` from matrices on `basis`. Exact when `depth ≥ L`.
pub fn word_moment_matrix(m: &Bimodule, word: &[BimoduleVector], basis: &FockBasis) -> Result<C64> {
    word_functional_matrix(m, word, basis, &vec![1.0; m.fusion().len()])
}

/// The Fock space spanned by the word's vectors (closed under bar) at depth `L`.
pub fn word_basis(m: &Bimodule, word: &[BimoduleVector], depth: usize) -> Result<FockBasis> {
    let support = bar_closure(m, word.iter().flat_map(|v| v.terms().map(|(b, _)| *b)));
    enumerate_fock_basis_over(m, depth, &support, DEFAULT_BASIS_CAP)
}

/// Partial basis of the paths met while applying the word to `Ω` at depth
/// `depth`. Matrices on it reproduce the word's action on the vacuum exactly:
/// every column touched along the way has all its rows inside.
pub fn reachable_basis(m: &Bimodule, word: &[BimoduleVector], depth: usize) -> Result<FockBasis> {
    let mut v = FockVector::omega(m.fusion().len());
    let mut seen: Vec<FockPath> = Vec::new();
    for xi in word {
        v = apply_gamma(m, xi, &v, Some(depth))?;
        seen.extend(v.terms().map(|(p, _)| p.clone()));
    }
    Ok(FockBasis::from_paths(m, seen, depth))
}

/// [`word_moment_matrix`] at depth `L` on the paths the word reaches.
pub fn word_moment(m: &Bimodule, word: &[BimoduleVector]) -> Result<C64> {
    let basis = reachable_basis(m, word, word.len())?;
    word_moment_matrix(m, word, &basis)
}

/// [`word_functional_matrix`] on the paths reached by the word.
pub fn word_functional(m: &Bimodule, word: &[BimoduleVector], weights: &[f64]) -> Result<C64> {
    let basis = reachable_basis(m, word, word.len())?;
    word_functional_matrix(m, word, &basis, weights)
}

/// `τ_K∘E` with `K = Σ λ_β I_β`.
pub fn trace_weight(m: &Bimodule) -> Vec<f64> {
    (0..m.fusion().len())
        .map(|b| m.lambdas().label(b).value)
        .collect()
}

/// `|φ(T₁T₂) − φ(T₂T₁)|` for the weight `φ = Σ_β K_β ⟨I_β, · I_β⟩`.
pub fn commutator_residual(
    m: &Bimodule,
    t1: &[BimoduleVector],
    t2: &[BimoduleVector],
    weights: &[f64],
) -> Result<f64> {
    let w12: Vec<_> = t2.iter().chain(t1).cloned().collect();
    let w21: Vec<_> = t1.iter().chain(t2).cloned().collect();
    let a = word_functional(m, &w12, weights)?;
    let b = word_functional(m, &w21, weights)?;
    Ok((a - b).norm())
}

/// Eigenvalues of the compressed `Γ(ξ)*Γ(ξ)` on the Fock space of `{ξ, ξ̄}`
/// up to `depth`, with their weights in the normalized vacuum state at
/// `I_{src ξ}`.
#[derive(Clone, Debug, Serialize)]
pub struct CompressedSpectrum {
    pub eigenvalues: Vec<f64>,
    pub vacuum_weights: Vec<f64>,
}

pub fn compressed_spectrum(m: &Bimodule, xi: BasisVector, depth: usize) -> Result<CompressedSpectrum> {
    let basis = enumerate_fock_basis_over(m, depth, &bar_closure(m, [xi]), DEFAULT_BASIS_CAP)?;
    let g = gamma_matrix(m, &BimoduleVector::basis(xi), &basis)?;
    let a = g.adjoint().mul(&g);
    let w = basis.weights();
    let n = basis.len();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for (i, j, v) in a.entries() {
        h[(i, j)] = v * (w[i] / w[j]).sqrt();
    }
    // Symmetrize away rounding before the Hermitian solver.
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let v0 = basis.vacuum_index(xi.src);
    let vacuum_weights = (0..n).map(|k| eig.eigenvectors[(v0, k)].norm_sqr()).collect();
    Ok(CompressedSpectrum {
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
        vacuum_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{FusionData, LambdaSpec};

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
    fn basis_counts() {
        let m = module("trivial", "uniform:1");
        assert_eq!(enumerate_fock_basis(&m, 1).unwrap().len(), 3);
        let m = module("fib", "uniform:1");
        let b = enumerate_fock_basis(&m, 1).unwrap();
        assert_eq!(b.counts(), &[2, 10]);
        assert_eq!(b.len(), 12);
        for cat in ["ising", "zmod:3", "zwindow:2"] {
            let m = module(cat, "uniform:1");
            assert_eq!(enumerate_fock_basis(&m, 0).unwrap().len(), m.fusion().len());
        }
    }

    #[test]
    fn basis_cap_is_enforced() {
        let m = module("ising", "uniform:1");
        let err = enumerate_fock_basis_over(&m, 6, m.basis(), 1000).unwrap_err();
        assert!(matches!(err, Error::BasisCap { .. }));
    }

    #[test]
    fn basis_is_sorted_and_composable() {
        let m = module("fib", "uniform:1");
        let b = enumerate_fock_basis(&m, 3).unwrap();
        assert!(b.paths().windows(2).all(|w| w[0] < w[1]));
        for p in b.paths() {
            m.check_chain(&p.vectors(&m)).unwrap();
            let w = b.weights()[b.index_of(p).unwrap()];
            assert_eq!(w, m.dims()[p.right()]);
        }
    }

    #[test]
    fn fock_norm_matches_tensor_inner_product() {
        let m = module("fib", "t=2");
        let b = enumerate_fock_basis(&m, 3).unwrap();
        for p in b.paths().iter().filter(|p| p.degree() > 0) {
            let v = p.vectors(&m);
            let ip = m.tensor_inner_product(&v, &v).unwrap();
            assert!((ip.trace(m.dims()).re - b.weights()[b.index_of(p).unwrap()]).abs() < 1e-14);
        }
    }

    #[test]
    fn creation_on_vacuum() {
        let m = module("fib", "t=2");
        let xi = bv(&m, "1", "t", "t");
        let v = BimoduleVector::basis(xi);
        let out = create(&m, &v, &FockVector::path(FockPath::vacuum(0)), None).unwrap();
        let p = FockPath::from_vectors(&m, &[xi]).unwrap();
        assert_eq!(out, FockVector::path(p));
        let out = create(&m, &v, &FockVector::path(FockPath::vacuum(1)), None).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn creation_and_annihilation_are_adjoint() {
        let m = module("fib", "t=2");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        for &xi in m.basis() {
            let v = BimoduleVector::term(xi, C64::new(0.3, -0.7));
            let l = creation_matrix(&m, &v, &basis).unwrap();
            let ls = annihilation_matrix(&m, &v, &basis).unwrap();
            // Compare on degrees < N where truncation does not interfere.
            let top = basis.depth() - 1;
            assert!(l.adjoint().max_diff_where(&ls, |i| basis.degree(i) <= top) < 1e-12);
        }
    }

    #[test]
    fn gamma_adjoint_is_gamma_of_s() {
        let m = module("fib", "t=2");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        let top = basis.depth() - 1;
        for &xi in m.basis() {
            let v = BimoduleVector::term(xi, C64::new(-0.4, 0.9));
            let g = gamma_matrix(&m, &v, &basis).unwrap();
            let gs = gamma_matrix(&m, &m.apply_s(&v), &basis).unwrap();
            assert!(g.adjoint().max_diff_where(&gs, |i| basis.degree(i) <= top) < 1e-12);
        }
    }

    #[test]
    fn matrix_and_vector_backends_agree() {
        let m = module("ising", "sigma=2");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        let xi = BimoduleVector::from_terms([
            (bv(&m, "1", "sigma", "sigma"), C64::new(0.5, 0.1)),
            (bv(&m, "sigma", "psi", "sigma~"), C64::new(-0.2, 0.3)),
        ]);
        let g = gamma_matrix(&m, &xi, &basis).unwrap();
        for (j, p) in basis.paths().iter().enumerate() {
            let img = apply_gamma(&m, &xi, &FockVector::path(p.clone()), Some(3)).unwrap();
            for (q, c) in img.terms() {
                assert_eq!(g.get(basis.index_of(q).unwrap(), j), *c);
            }
        }
    }

    #[test]
    fn gamma_on_vacuum_and_expectations() {
        let m = module("fib", "t=2");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        let xi = bv(&m, "1", "t", "t");
        let v = BimoduleVector::basis(xi);
        let g = gamma_matrix(&m, &v, &basis).unwrap();
        let p = FockPath::from_vectors(&m, &[xi]).unwrap();
        assert_eq!(g.get(basis.index_of(&p).unwrap(), basis.vacuum_index(0)), C64::new(1.0, 0.0));

        let id = SparseOperator::identity(&basis);
        assert_eq!(conditional_expectation(&m, &basis, &id), AlgebraElement::identity(2));
        assert_eq!(conditional_expectation(&m, &basis, &g).norm_inf(), 0.0);
        let gsg = g.adjoint().mul(&g);
        let e = conditional_expectation(&m, &basis, &gsg);
        assert!((&e - &AlgebraElement::projection(2, 0)).norm_inf() < 1e-14);
    }

    #[test]
    fn unit_letter_square_has_zero_expectation() {
        let m = module("trivial", "uniform:1");
        let basis = enumerate_fock_basis(&m, 2).unwrap();
        let v = BimoduleVector::basis(bv(&m, "1", "1", "1"));
        let g = gamma_matrix(&m, &v, &basis).unwrap();
        assert_eq!(tau_e(&m, &basis, &g.mul(&g)), C64::new(0.0, 0.0));
    }

    #[test]
    fn modular_data_invariants() {
        let m = module("fib", "t=2");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        let md = ModularData::new(&m, &basis).unwrap();
        for (p, &(q, s)) in md.conjugation.iter().enumerate() {
            assert!((md.eigenvalues[p] * md.eigenvalues[q] - 1.0).abs() < 1e-12);
            let (q2, s2) = md.conjugation[q];
            assert_eq!(q2, p);
            assert!((s * s2 - 1.0).abs() < 1e-12);
            // J is antiunitary for the weighted norm.
            let w = basis.weights();
            assert!((s * s * w[q] - w[p]).abs() < 1e-12);
        }
        let x: Vec<C64> = (0..basis.len()).map(|i| C64::new(i as f64, 1.0)).collect();
        let back = md.apply_j(&md.apply_j(&x));
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).norm() < 1e-9));
    }

    #[test]
    fn modular_flow_examples() {
        let m = module("fib", "uniform:1");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        let xi = bv(&m, "t", "t", "t");
        assert_eq!(modular_flow_check(&m, xi, 0.7, &basis).unwrap(), 0.0);
        let m = module("trivial", "uniform:4");
        let basis = enumerate_fock_basis(&m, 4).unwrap();
        let xi = bv(&m, "1", "1", "1");
        assert!(modular_flow_check(&m, xi, 1.0, &basis).unwrap() < 1e-12);
        assert_eq!(modular_flow_check(&m, xi, 0.0, &basis).unwrap(), 0.0);
    }

    #[test]
    fn vacuum_projection_examples() {
        let m = module("fib", "t=2");
        let basis = enumerate_fock_basis(&m, 3).unwrap();
        let r = vacuum_projection_check(&m, &basis, 30, 3).unwrap();
        assert_eq!(r.projection, 0.0);
        assert!(r.max_residual() < 1e-12, "{r:?}");
    }

    #[test]
    fn word_moments() {
        let m = module("trivial", "uniform:1");
        let xi = BimoduleVector::basis(bv(&m, "1", "1", "1"));
        let sxi = m.apply_s(&xi);
        let word = vec![xi.clone(), sxi.clone(), xi.clone(), sxi.clone()];
        assert!((word_moment(&m, &word).unwrap() - C64::new(2.0, 0.0)).norm() < 1e-12);
        let odd = vec![xi.clone(), sxi.clone(), xi.clone()];
        assert_eq!(word_moment(&m, &odd).unwrap(), C64::new(0.0, 0.0));
        let shallow = word_basis(&m, &word, 3).unwrap();
        assert!(matches!(
            word_moment_matrix(&m, &word, &shallow),
            Err(Error::DepthTooSmall { .. })
        ));
        let deeper = word_basis(&m, &word, 5).unwrap();
        assert_eq!(
            word_moment_matrix(&m, &word, &deeper).unwrap(),
            word_moment(&m, &word).unwrap()
        );
    }

    #[test]
    fn reachable_basis_matches_full_basis() {
        let m = module("ising", "sigma=2");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = enumerate_fock_basis(&m, 4).unwrap();
        for _ in 0..20 {
            let word: Vec<_> = (0..4).map(|_| m.random_vector(&mut rng, 3)).collect();
            let partial = reachable_basis(&m, &word, 4).unwrap();
            assert!(!partial.is_closed());
            assert!(partial.len() <= full.len());
            let a = word_moment_matrix(&m, &word, &full).unwrap();
            let b = word_moment_matrix(&m, &word, &partial).unwrap();
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_lambda_is_tracial() {
        let m = module("fib", "uniform:1");
        let a = BimoduleVector::basis(bv(&m, "1", "t", "t"));
        let b = BimoduleVector::basis(bv(&m, "t", "t", "t"));
        let sa = m.apply_s(&a);
        let sb = m.apply_s(&b);
        let w = trace_weight(&m);
        let r = commutator_residual(&m, &[a.clone(), b.clone()], &[sb, sa], &w).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn coo_export() {
        let m = module("trivial", "uniform:1");
        let basis = enumerate_fock_basis(&m, 1).unwrap();
        let g = gamma_matrix(&m, &BimoduleVector::basis(bv(&m, "1", "1", "1")), &basis).unwrap();
        let dump = g.to_coo(&m, &basis);
        assert_eq!(dump.basis.len(), 3);
        assert_eq!(dump.entries.len(), g.nnz());
        assert!(g.to_csv().starts_with("row,col,re,im\n"));
    }

    #[test]
    fn compressed_spectrum_is_bounded() {
        let m = module("trivial", "uniform:1");
        let xi = bv(&m, "1", "1", "1");
        let s = compressed_spectrum(&m, xi, 6).unwrap();
        let total: f64 = s.vacuum_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(s.eigenvalues.iter().all(|&e| e > -1e-9 && e < 4.0 + 1e-9));
        let m1: f64 = s
            .eigenvalues
            .iter()
            .zip(&s.vacuum_weights)
            .map(|(e, w)| e * w)
            .sum();
        assert!((m1 - 1.0).abs() < 1e-10);
    }
}
