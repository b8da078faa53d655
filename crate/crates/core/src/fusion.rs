//! Fusion data of a rigid C*-tensor category: simple labels, conjugation,
//! fusion multiplicities and quantum dimensions.
//!
//! Only multiplicities and dimensions are stored. Solutions of the conjugate
//! equations are never materialized; everything downstream is a function of
//! `N`, `d` and the letter parameters.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a simple object in [`FusionData::labels`].
pub type Label = usize;

pub const DIM_TOLERANCE: f64 = 1e-9;

/// An element of the letter set: a simple object together with a bar flag.
///
/// `α` and `ᾱ` are distinct letters even when the object is self-conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LetterId {
    pub object: Label,
    pub barred: bool,
}

impl LetterId {
    pub fn plain(object: Label) -> Self {
        Self {
            object,
            barred: false,
        }
    }

    pub fn bar(self) -> Self {
        Self {
            object: self.object,
            barred: !self.barred,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionData {
    labels: Vec<String>,
    conj: Vec<Label>,
    /// Flattened `N[γ][β][α]`.
    mult: Vec<u32>,
    dims: Vec<f64>,
    truncated: bool,
    unit: Label,
    index: HashMap<String, Label>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryDoc {
    pub labels: Vec<String>,
    #[serde(default)]
    pub conj: BTreeMap<String, String>,
    #[serde(default)]
    pub fusion: Vec<FusionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionEntry {
    pub gamma: String,
    pub beta: String,
    pub alpha: String,
    pub mult: u32,
}

impl FusionData {
    /// Validates raw fusion data. `mult` is indexed as `mult[(γ * n + β) * n + α]`.
    pub fn new(
        labels: Vec<String>,
        conj: Vec<Label>,
        mult: Vec<u32>,
        dims: Option<Vec<f64>>,
        truncated: bool,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Schema("label list is empty".into()));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate label `{l}`")));
            }
        }
        let unit = *index
            .get("1")
            .ok_or_else(|| Error::Schema("labels must contain the unit \"1\"".into()))?;
        if conj.len() != n || mult.len() != n * n * n {
            return Err(Error::Schema("conjugation or multiplicity table has the wrong size".into()));
        }
        let mut data = Self {
            labels,
            conj,
            mult,
            dims: vec![1.0; n],
            truncated,
            unit,
            index,
        };
        data.check_conj()?;
        data.check_unit()?;
        data.check_frobenius()?;
        if !truncated {
            data.check_associativity()?;
        }
        data.dims = match dims {
            Some(d) => {
                if d.len() != n {
                    return Err(Error::Schema("dimension vector has the wrong size".into()));
                }
                data.check_dims(&d)?;
                d
            }
            None => compute_dimensions(&data)?,
        };
        Ok(data)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CategoryDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &CategoryDoc) -> Result<Self> {
        let labels = doc.labels.clone();
        let n = labels.len();
        let lookup = |name: &str| -> Result<Label> {
            labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::UnknownLabel(name.to_string()))
        };
        for key in doc.conj.keys().chain(doc.conj.values()) {
            lookup(key)?;
        }
        let mut conj = Vec::with_capacity(n);
        for l in &labels {
            match doc.conj.get(l) {
                Some(c) => conj.push(lookup(c)?),
                None if l == "1" => conj.push(lookup("1")?),
                None => return Err(Error::Schema(format!("no conjugate given for `{l}`"))),
            }
        }
        let mut mult = vec![0u32; n * n * n];
        if let Some(u) = labels.iter().position(|l| l == "1") {
            for x in 0..n {
                mult[(x * n + x) * n + u] = 1;
                mult[(x * n + u) * n + x] = 1;
            }
        }
        let mut seen: HashMap<(Label, Label, Label), u32> = HashMap::new();
        for e in &doc.fusion {
            let key = (lookup(&e.gamma)?, lookup(&e.beta)?, lookup(&e.alpha)?);
            if let Some(prev) = seen.insert(key, e.mult) {
                if prev != e.mult {
                    return Err(Error::Schema(format!(
                        "conflicting entries for N[{}][{}][{}]",
                        e.gamma, e.beta, e.alpha
                    )));
                }
            }
            mult[(key.0 * n + key.1) * n + key.2] = e.mult;
        }
        let dims = match &doc.dims {
            Some(map) => {
                let mut d = vec![f64::NAN; n];
                for (k, v) in map {
                    d[lookup(k)?] = *v;
                }
                if let Some(i) = d.iter().position(|x| x.is_nan()) {
                    return Err(Error::Schema(format!("no dimension given for `{}`", labels[i])));
                }
                Some(d)
            }
            None if doc.truncated => {
                return Err(Error::Dimensions(
                    "truncated data requires user-supplied dimensions".into(),
                ))
            }
            None => None,
        };
        Self::new(labels, conj, mult, dims, doc.truncated)
    }

    pub fn to_doc(&self) -> CategoryDoc {
        let n = self.len();
        let mut fusion = Vec::new();
        for g in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let m = self.mult(g, b, a);
                    if m > 0 && a != self.unit && b != self.unit {
                        fusion.push(FusionEntry {
                            gamma: self.labels[g].clone(),
                            beta: self.labels[b].clone(),
                            alpha: self.labels[a].clone(),
                            mult: m,
                        });
                    }
                }
            }
        }
        CategoryDoc {
            labels: self.labels.clone(),
            conj: (0..n)
                .map(|i| (self.labels[i].clone(), self.labels[self.conj[i]].clone()))
                .collect(),
            fusion,
            dims: Some(
                (0..n)
                    .map(|i| (self.labels[i].clone(), self.dims[i]))
                    .collect(),
            ),
            truncated: self.truncated,
        }
    }

    /// Built-in categories: `trivial`, `fib`, `ising`, `zmod:n`, `zwindow:n`.
    pub fn catalog(name: &str) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let parse_arg = |min: i64| -> Result<i64> {
            let a = arg.ok_or_else(|| Error::Schema(format!("`{head}` needs a size, e.g. {head}:3")))?;
            let v: i64 = a
                .parse()
                .map_err(|_| Error::Schema(format!("bad catalog size `{a}`")))?;
            if v < min {
                return Err(Error::Schema(format!("catalog size must be at least {min}")));
            }
            Ok(v)
        };
        match head {
            "trivial" => Self::new(vec!["1".into()], vec![0], vec![1], Some(vec![1.0]), false),
            "fib" => {
                let labels = vec!["1".to_string(), "t".to_string()];
                Self::from_rule(labels, vec![0, 1], None, false, |g, b, a| match (g, b, a) {
                    (_, 0, _) => u32::from(g == a),
                    (_, _, 0) => u32::from(g == b),
                    (_, 1, 1) => 1,
                    _ => 0,
                })
            }
            "ising" => {
                let labels = vec!["1".to_string(), "sigma".to_string(), "psi".to_string()];
                Self::from_rule(labels, vec![0, 1, 2], None, false, |g, b, a| match (b, a) {
                    (0, _) => u32::from(g == a),
                    (_, 0) => u32::from(g == b),
                    (1, 1) => u32::from(g != 1),
                    (1, 2) | (2, 1) => u32::from(g == 1),
                    (2, 2) => u32::from(g == 0),
                    _ => 0,
                })
            }
            "zmod" => {
                let n = parse_arg(1)?;
                let exps: Vec<i64> = (0..n).collect();
                let labels = exps.iter().map(|&k| group_label(k)).collect();
                let conj = exps.iter().map(|&k| ((n - k) % n) as usize).collect();
                Self::from_rule(labels, conj, None, false, |g, b, a| {
                    u32::from((b as i64 + a as i64) % n == g as i64)
                })
            }
            "zwindow" => {
                let n = parse_arg(0)?;
                let exps = window_exponents(n);
                let labels: Vec<String> = exps.iter().map(|&k| group_label(k)).collect();
                let pos = |k: i64| exps.iter().position(|&e| e == k);
                let conj = exps.iter().map(|&k| pos(-k).unwrap()).collect();
                let dims = vec![1.0; exps.len()];
                Self::from_rule(labels, conj, Some(dims), true, |g, b, a| {
                    u32::from(exps[b] + exps[a] == exps[g])
                })
            }
            _ => Err(Error::Schema(format!("unknown catalog entry `{name}`"))),
        }
    }

    fn from_rule(
        labels: Vec<String>,
        conj: Vec<Label>,
        dims: Option<Vec<f64>>,
        truncated: bool,
        rule: impl Fn(Label, Label, Label) -> u32,
    ) -> Result<Self> {
        let n = labels.len();
        let mut mult = vec![0u32; n * n * n];
        for g in 0..n {
            for b in 0..n {
                for a in 0..n {
                    mult[(g * n + b) * n + a] = rule(g, b, a);
                }
            }
        }
        Self::new(labels, conj, mult, dims, truncated)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: Label) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, name: &str) -> Result<Label> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn unit(&self) -> Label {
        self.unit
    }

    pub fn conj(&self, i: Label) -> Label {
        self.conj[i]
    }

    /// `N[γ][β][α] = dim Hom(γ, β ⊗ α)`.
    pub fn mult(&self, gamma: Label, beta: Label, alpha: Label) -> u32 {
        let n = self.len();
        self.mult[(gamma * n + beta) * n + alpha]
    }

    pub fn dims(&self) -> &[f64] {
        &self.dims
    }

    pub fn dim(&self, i: Label) -> f64 {
        self.dims[i]
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// The simple object a letter stands for: `α` itself, or `conj(α)` for `ᾱ`.
    pub fn underlying(&self, letter: LetterId) -> Label {
        if letter.barred {
            self.conj[letter.object]
        } else {
            letter.object
        }
    }

    /// `dim Hom(β₁, β₂ ⊗ ι(α))`.
    pub fn hom_dim(&self, src: Label, dst: Label, letter: LetterId) -> u32 {
        self.mult(src, dst, self.underlying(letter))
    }

    /// Same as [`hom_dim`](Self::hom_dim) but resolving labels by name.
    pub fn hom_dim_named(&self, src: &str, dst: &str, letter: &str) -> Result<u32> {
        let s = self.index_of(src)?;
        let d = self.index_of(dst)?;
        let l = self.parse_letter(letter)?;
        Ok(self.hom_dim(s, d, l))
    }

    /// All letters in deterministic order `α₀, ᾱ₀, α₁, ᾱ₁, …`.
    pub fn letter_ids(&self) -> impl Iterator<Item = LetterId> + '_ {
        (0..self.len()).flat_map(|o| [LetterId::plain(o), LetterId::plain(o).bar()])
    }

    /// Letters are written `t` and `t~`.
    pub fn parse_letter(&self, text: &str) -> Result<LetterId> {
        match text.strip_suffix('~') {
            Some(base) => Ok(LetterId::plain(self.index_of(base)?).bar()),
            None => Ok(LetterId::plain(self.index_of(text)?)),
        }
    }

    pub fn letter_name(&self, letter: LetterId) -> String {
        if letter.barred {
            format!("{}~", self.labels[letter.object])
        } else {
            self.labels[letter.object].clone()
        }
    }

    /// Applies the same permutation to every index; used for relabeling checks.
    pub fn permuted(&self, perm: &[Label]) -> Result<Self> {
        let n = self.len();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let labels = perm.iter().map(|&o| self.labels[o].clone()).collect();
        let conj = perm.iter().map(|&o| inv[self.conj[o]]).collect();
        let mut mult = vec![0; n * n * n];
        for g in 0..n {
            for b in 0..n {
                for a in 0..n {
                    mult[(g * n + b) * n + a] = self.mult(perm[g], perm[b], perm[a]);
                }
            }
        }
        let dims = perm.iter().map(|&o| self.dims[o]).collect();
        Self::new(labels, conj, mult, Some(dims), self.truncated)
    }

    fn check_conj(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.conj[i] >= self.len() {
                return Err(Error::Schema("conjugate index out of range".into()));
            }
            if self.conj[self.conj[i]] != i {
                return Err(Error::NonInvolutiveConj {
                    label: self.labels[i].clone(),
                    image: self.labels[self.conj[self.conj[i]]].clone(),
                });
            }
        }
        if self.conj[self.unit] != self.unit {
            return Err(Error::NonInvolutiveConj {
                label: "1".into(),
                image: self.labels[self.conj[self.unit]].clone(),
            });
        }
        Ok(())
    }

    fn check_unit(&self) -> Result<()> {
        let n = self.len();
        let u = self.unit;
        for g in 0..n {
            for x in 0..n {
                let expected = u32::from(g == x);
                for (b, a) in [(x, u), (u, x)] {
                    let found = self.mult(g, b, a);
                    if found != expected {
                        return Err(Error::UnitConstraint {
                            gamma: self.labels[g].clone(),
                            beta: self.labels[b].clone(),
                            alpha: self.labels[a].clone(),
                            found,
                            expected,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_frobenius(&self) -> Result<()> {
        let n = self.len();
        for g in 0..n {
            for b in 0..n {
                for a in 0..n {
                    let m = self.mult(g, b, a);
                    let ab = self.conj[a];
                    let m1 = self.mult(b, g, ab);
                    let m2 = self.mult(ab, self.conj[g], b);
                    if m != m1 || m != m2 {
                        return Err(Error::Frobenius {
                            gamma: self.labels[g].clone(),
                            beta: self.labels[b].clone(),
                            alpha: self.labels[a].clone(),
                            detail: format!(
                                "N[γ][β][α] = {m}, N[β][γ][ᾱ] = {m1}, N[ᾱ][γ̄][β] = {m2}"
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_associativity(&self) -> Result<()> {
        let n = self.len();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for g in 0..n {
                        let lhs: u64 = (0..n)
                            .map(|e| u64::from(self.mult(e, a, b)) * u64::from(self.mult(g, e, c)))
                            .sum();
                        let rhs: u64 = (0..n)
                            .map(|f| u64::from(self.mult(f, b, c)) * u64::from(self.mult(g, a, f)))
                            .sum();
                        if lhs != rhs {
                            return Err(Error::Associativity {
                                a: self.labels[a].clone(),
                                b: self.labels[b].clone(),
                                c: self.labels[c].clone(),
                                g: self.labels[g].clone(),
                                lhs,
                                rhs,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_dims(&self, d: &[f64]) -> Result<()> {
        for (i, &x) in d.iter().enumerate() {
            if !x.is_finite() || x < 1.0 - DIM_TOLERANCE {
                return Err(Error::Dimensions(format!(
                    "d_{} = {x} is not a dimension (must be >= 1)",
                    self.labels[i]
                )));
            }
        }
        if (d[self.unit] - 1.0).abs() > DIM_TOLERANCE {
            return Err(Error::Dimensions("the unit must have dimension 1".into()));
        }
        if !self.truncated {
            let r = dimension_residual(self, d);
            if r >= DIM_TOLERANCE {
                return Err(Error::Dimensions(format!(
                    "d is not multiplicative over fusion (residual {r:e})"
                )));
            }
        }
        Ok(())
    }
}

/// `max_{β,α} |d_β d_α − Σ_γ N[γ][β][α] d_γ|`.
pub fn dimension_residual(f: &FusionData, d: &[f64]) -> f64 {
    let n = f.len();
    let mut worst = 0.0f64;
    for b in 0..n {
        for a in 0..n {
            let s: f64 = (0..n).map(|g| f64::from(f.mult(g, b, a)) * d[g]).sum();
            worst = worst.max((d[b] * d[a] - s).abs());
        }
    }
    worst
}

/// Perron–Frobenius dimensions: the common positive eigenvector of the fusion
/// matrices `(A_β)_{αγ} = N[γ][β][α]`, normalized so that `d_1 = 1`.
pub fn compute_dimensions(f: &FusionData) -> Result<Vec<f64>> {
    if f.truncated() {
        return Err(Error::Dimensions(
            "truncated data requires user-supplied dimensions".into(),
        ));
    }
    let n = f.len();
    // Power iteration on I + Σ_β A_β, which is primitive for a connected fusion ring.
    let mut m = vec![0.0f64; n * n];
    for (a, row) in m.chunks_mut(n).enumerate() {
        row[a] += 1.0;
        for b in 0..n {
            for (g, x) in row.iter_mut().enumerate() {
                *x += f64::from(f.mult(g, b, a));
            }
        }
    }
    let mut v = vec![1.0f64; n];
    for _ in 0..10_000 {
        let mut w: Vec<f64> = m
            .chunks(n)
            .map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        let norm = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        w.iter_mut().for_each(|x| *x /= norm);
        let delta = w
            .iter()
            .zip(&v)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        v = w;
        if delta < 1e-15 {
            break;
        }
    }
    let u = v[f.unit()];
    if u <= 0.0 {
        return Err(Error::Dimensions("Perron–Frobenius vector vanishes at the unit".into()));
    }
    let d: Vec<f64> = v.iter().map(|x| x / u).collect();
    let r = dimension_residual(f, &d);
    if r >= DIM_TOLERANCE || d.iter().any(|&x| x < 1.0 - DIM_TOLERANCE) {
        return Err(Error::Dimensions(format!(
            "no consistent dimension vector (residual {r:e})"
        )));
    }
    Ok(d)
}

fn group_label(k: i64) -> String {
    if k == 0 {
        "1".to_string()
    } else {
        format!("g^{k}")
    }
}

/// Window order `0, 1, −1, 2, −2, …, n, −n`.
fn window_exponents(n: i64) -> Vec<i64> {
    let mut e = vec![0];
    for k in 1..=n {
        e.push(k);
        e.push(-k);
    }
    e
}

/// Exponent `k` of a label named `1` or `g^k`.
pub fn group_exponent(label: &str) -> Option<i64> {
    if label == "1" {
        return Some(0);
    }
    label.strip_prefix("g^")?.parse().ok()
}

/// A positive λ, optionally carried as an exact rational.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaValue {
    pub value: f64,
    pub exact: Option<BigRational>,
}

impl LambdaValue {
    pub fn exact(r: BigRational) -> Self {
        Self {
            value: ratio_to_f64(&r),
            exact: Some(r),
        }
    }

    pub fn float(value: f64) -> Self {
        Self { value, exact: None }
    }

    pub fn one() -> Self {
        Self::exact(BigRational::one())
    }

    pub fn recip(&self) -> Self {
        match &self.exact {
            Some(r) => Self::exact(r.recip()),
            None => Self::float(1.0 / self.value),
        }
    }

    pub fn powi(&self, k: i64) -> Self {
        match &self.exact {
            Some(r) => Self::exact(r.pow(k as i32)),
            None => Self::float(self.value.powi(k as i32)),
        }
    }

    fn is_positive(&self) -> bool {
        match &self.exact {
            Some(r) => r.is_positive(),
            None => self.value.is_finite() && self.value > 0.0,
        }
    }
}

impl fmt::Display for LambdaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "{}", self.value),
        }
    }
}

impl FromStr for LambdaValue {
    type Err = Error;

    /// Integers, `p/q` and plain decimals are exact; anything else parses as a float.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Lambda(format!("cannot parse `{s}` as a number"));
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::Lambda(format!("zero denominator in `{s}`")));
            }
            return Ok(Self::exact(BigRational::new(p, q)));
        }
        if let Some(r) = parse_decimal(s) {
            return Ok(Self::exact(r));
        }
        s.parse::<f64>().map(Self::float).map_err(|_| bad())
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, denom);
    Some(if neg { -r } else { r })
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(p), Some(q)) if p.is_finite() && q.is_finite() => p / q,
        _ => {
            // Scale both sides down before dividing.
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let p = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let q = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            p / q
        }
    }
}

/// How λ is assigned to the simple labels.
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSpec {
    /// The same λ on every label.
    Uniform(LambdaValue),
    /// `λ_{g^k} = μ^k` on group-like labels (`1`, `g^k`).
    Power(LambdaValue),
    /// Explicit values; unlisted labels get λ = 1. Entries for barred letters
    /// (`t~=…`) are accepted only when they equal the reciprocal.
    Map(Vec<(String, LambdaValue)>),
}

impl FromStr for LambdaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(v) = s.strip_prefix("uniform:") {
            return Ok(Self::Uniform(v.parse()?));
        }
        if let Some(v) = s.strip_prefix("power:") {
            return Ok(Self::Power(v.parse()?));
        }
        let mut entries = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Lambda(format!("expected label=value, got `{part}`")))?;
            entries.push((k.trim().to_string(), v.parse()?));
        }
        Ok(Self::Map(entries))
    }
}

impl LambdaSpec {
    pub fn resolve(&self, f: &FusionData) -> Result<Lambdas> {
        let values = match self {
            Self::Uniform(v) => vec![v.clone(); f.len()],
            Self::Power(mu) => f
                .labels()
                .iter()
                .map(|l| {
                    group_exponent(l).map(|k| mu.powi(k)).ok_or_else(|| {
                        Error::Lambda(format!("label `{l}` is not of the form g^k"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            Self::Map(entries) => {
                let mut values = vec![LambdaValue::one(); f.len()];
                let mut barred = Vec::new();
                for (k, v) in entries {
                    match k.strip_suffix('~') {
                        Some(base) => barred.push((f.index_of(base)?, v)),
                        None => values[f.index_of(k)?] = v.clone(),
                    }
                }
                for (i, v) in barred {
                    check_reciprocal(&f.labels()[i], &values[i], v)?;
                }
                values
            }
        };
        Lambdas::new(values)
    }
}

fn check_reciprocal(label: &str, plain: &LambdaValue, barred: &LambdaValue) -> Result<()> {
    let ok = match (&plain.exact, &barred.exact) {
        (Some(a), Some(b)) => (a * b).is_one(),
        _ => (plain.value * barred.value - 1.0).abs() <= 1e-12,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Lambda(format!(
            "λ({label}~) = {barred} but must equal 1/λ({label}) = {}",
            plain.recip()
        )))
    }
}

/// λ for every simple label; barred letters take the reciprocal.
#[derive(Clone, Debug, PartialEq)]
pub struct Lambdas {
    values: Vec<LambdaValue>,
}

impl Lambdas {
    pub fn new(values: Vec<LambdaValue>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_positive()) {
            return Err(Error::Lambda(format!("λ must be positive, got {v}")));
        }
        Ok(Self { values })
    }

    pub fn uniform(f: &FusionData, value: f64) -> Self {
        Self {
            values: vec![LambdaValue::float(value); f.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self, i: Label) -> &LambdaValue {
        &self.values[i]
    }

    pub fn letter(&self, l: LetterId) -> f64 {
        let v = self.values[l.object].value;
        if l.barred {
            1.0 / v
        } else {
            v
        }
    }

    pub fn letter_value(&self, l: LetterId) -> LambdaValue {
        let v = &self.values[l.object];
        if l.barred {
            v.recip()
        } else {
            v.clone()
        }
    }

    pub fn is_exact(&self) -> bool {
        self.values.iter().all(|v| v.exact.is_some())
    }

    pub fn is_uniform_one(&self) -> bool {
        self.values.iter().all(|v| v.value == 1.0)
    }
}

/// A letter with its underlying object and λ.
#[derive(Clone, Debug, PartialEq)]
pub struct Letter {
    pub id: LetterId,
    pub underlying: Label,
    pub lambda: LambdaValue,
}

impl Letter {
    pub fn object(&self) -> Label {
        self.id.object
    }

    pub fn barred(&self) -> bool {
        self.id.barred
    }
}

/// The `2|S|` letters with their λ values.
pub fn letters(f: &FusionData, lambdas: &Lambdas) -> Vec<Letter> {
    f.letter_ids()
        .map(|id| Letter {
            id,
            underlying: f.underlying(id),
            lambda: lambdas.letter_value(id),
        })
        .collect()
}
