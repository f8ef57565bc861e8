//! The semiclassical double torus: Laurent monomials `x^w y^v` with the sign-twisted
//! product `y^v·y^{v'} = (−1)^{χ̄(v',v)} y^{v+v'}`, its Poisson bracket, Ad/DT operators,
//! Fomin–Zelevinsky specialization and CC⁻ assembly.
//!
//! A monomial `x^w y^v` is the basis element `x^w · y^v`; x-monomials commute with
//! everything without sign. Series elements are truncated at total y-degree
//! `|v|₁ = Σ|v_i| ≤ D`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quiver::{mutate_exchange_matrix, DimVector, EulerForm, Quiver};
use crate::repmod::FSeries;
use crate::scalar::{format_rational, parse_rational};

/// `(x-exponents, y-exponents)`.
pub type Monomial = (Vec<i64>, Vec<i64>);

fn l1(v: &[i64]) -> usize {
    v.iter().map(|x| x.unsigned_abs() as usize).sum()
}

fn unit(n: usize, i: usize, e: i64) -> Vec<i64> {
    let mut v = vec![0; n];
    v[i] = e;
    v
}

fn add_vec(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// A finite combination of torus monomials, optionally truncated at y-degree `D`.
#[derive(Clone, PartialEq, Eq)]
pub struct TorusElement {
    n: usize,
    trunc: Option<usize>,
    terms: BTreeMap<Monomial, BigRational>,
}

impl fmt::Debug for TorusElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display())?;
        if let Some(d) = self.trunc {
            write!(f, " + O(y^{})", d + 1)?;
        }
        Ok(())
    }
}

/// `{"n": 2, "trunc": 6, "terms": [{"x": [1, 0], "y": [0, 1], "c": "-1/2"}]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TorusJson {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<usize>,
    pub terms: Vec<TorusTermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TorusTermJson {
    #[serde(default)]
    pub x: Vec<i64>,
    #[serde(default)]
    pub y: Vec<i64>,
    pub c: String,
}

impl TorusElement {
    pub fn zero(n: usize, trunc: Option<usize>) -> Self {
        TorusElement {
            n,
            trunc,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(n: usize, trunc: Option<usize>) -> Self {
        Self::monomial(n, trunc, vec![0; n], vec![0; n], rat(1))
    }

    pub fn monomial(n: usize, trunc: Option<usize>, x: Vec<i64>, y: Vec<i64>, c: BigRational) -> Self {
        assert!(x.len() == n && y.len() == n, "exponent vectors must have length {n}");
        let mut e = Self::zero(n, trunc);
        e.add_term((x, y), c);
        e
    }

    pub fn x_monomial(n: usize, w: Vec<i64>) -> Self {
        Self::monomial(n, None, w, vec![0; n], rat(1))
    }

    pub fn y_monomial(n: usize, trunc: Option<usize>, v: Vec<i64>) -> Self {
        Self::monomial(n, trunc, vec![0; n], v, rat(1))
    }

    pub fn x(n: usize, i: usize) -> Self {
        Self::x_monomial(n, unit(n, i, 1))
    }

    pub fn y(n: usize, i: usize) -> Self {
        Self::y_monomial(n, None, unit(n, i, 1))
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, BigRational)>>(n: usize, trunc: Option<usize>, terms: I) -> Result<Self> {
        let mut e = Self::zero(n, trunc);
        for ((x, y), c) in terms {
            if x.len() != n || y.len() != n {
                return Err(Error::Input(format!("exponent vectors must have length {n}")));
            }
            e.add_term((x, y), c);
        }
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trunc(&self) -> Option<usize> {
        self.trunc
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn constant_term(&self) -> BigRational {
        self.coeff(&(vec![0; self.n], vec![0; self.n]))
    }

    pub fn is_x_only(&self) -> bool {
        self.terms.keys().all(|(_, y)| y.iter().all(|&e| e == 0))
    }

    pub fn is_y_only(&self) -> bool {
        self.terms.keys().all(|(x, _)| x.iter().all(|&e| e == 0))
    }

    /// Adds `c·m`, dropping it when beyond the truncation bound.
    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() || self.trunc.is_some_and(|d| l1(&m.1) > d) {
            return;
        }
        let slot = self.terms.entry(m).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    /// Same terms under the bound `trunc` (dropping terms when it tightens).
    pub fn with_trunc(&self, trunc: Option<usize>) -> Self {
        let mut e = Self::zero(self.n, trunc);
        for (m, c) in &self.terms {
            e.add_term(m.clone(), c.clone());
        }
        e
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Mismatch(format!(
                "torus elements in {} and {} variables",
                self.n, other.n
            )));
        }
        Ok(())
    }

    fn joint_trunc(&self, other: &Self) -> Option<usize> {
        match (self.trunc, other.trunc) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut e = self.with_trunc(self.joint_trunc(other));
        for (m, c) in &other.terms {
            e.add_term(m.clone(), c.clone());
        }
        Ok(e)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut e = Self::zero(self.n, self.trunc);
        for (m, x) in &self.terms {
            e.add_term(m.clone(), x * c);
        }
        e
    }

    /// `2*x1^-1*y2 - 1/2` style rendering with 1-based variable indices.
    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, ((x, y), c)) in self.terms.iter().enumerate() {
            let mut factors = Vec::new();
            for (name, exps) in [("x", x), ("y", y)] {
                for (j, &e) in exps.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => factors.push(format!("{name}{}", j + 1)),
                        _ => factors.push(format!("{name}{}^{e}", j + 1)),
                    }
                }
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if factors.is_empty() {
                out.push_str(&format_rational(&mag));
            } else {
                if !mag.is_one() {
                    out.push_str(&format_rational(&mag));
                    out.push('*');
                }
                out.push_str(&factors.join("*"));
            }
        }
        out
    }

    pub fn to_json(&self) -> TorusJson {
        TorusJson {
            n: self.n,
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .map(|((x, y), c)| TorusTermJson {
                    x: x.clone(),
                    y: y.clone(),
                    c: format_rational(c),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &TorusJson) -> Result<Self> {
        let mut e = Self::zero(j.n, j.trunc);
        for (k, t) in j.terms.iter().enumerate() {
            let pad = |v: &Vec<i64>, field: &str| -> Result<Vec<i64>> {
                match v.len() {
                    0 => Ok(vec![0; j.n]),
                    l if l == j.n => Ok(v.clone()),
                    l => Err(Error::Input(format!("terms[{k}].{field} has length {l}, expected {}", j.n))),
                }
            };
            let c = parse_rational(&t.c).map_err(|e| Error::Input(format!("terms[{k}].c: {e}")))?;
            e.add_term((pad(&t.x, "x")?, pad(&t.y, "y")?), c);
        }
        Ok(e)
    }
}

/// How an Ad operator is built from its class: plain, or conjugated by the involution
/// `Σ: x_i ↦ x_i⁻¹, y_i ↦ y_i⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    Plain,
    Shifted,
}

/// A torus automorphism `x_i ↦ x_i·m_i`, `y_i ↦ y_i·μ_i` with multipliers of constant
/// term 1, truncated at y-degree `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdOperator {
    pub trunc: usize,
    pub x_mult: Vec<TorusElement>,
    pub y_mult: Vec<TorusElement>,
}

/// Dimension vectors ↦ torus monomials for [`TorusContext::cc_character`].
#[derive(Clone, Debug, PartialEq)]
pub enum ClassMap {
    /// `v ↦ y^v`.
    Y,
    /// `v ↦ fz_specialize(y^v)`.
    Specialized,
    /// `v ↦ x^{Mv}` with `M` an `n × n` integer matrix.
    Matrix(Vec<Vec<i64>>),
}

/// The Euler-form context: all torus operations live over a fixed quiver.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusContext {
    form: EulerForm,
}

impl TorusContext {
    pub fn new(form: EulerForm) -> Self {
        TorusContext { form }
    }

    pub fn from_quiver(q: &Quiver) -> Self {
        Self::new(q.euler_forms())
    }

    pub fn n(&self) -> usize {
        self.form.n()
    }

    pub fn form(&self) -> &EulerForm {
        &self.form
    }

    fn check(&self, u: &TorusElement) -> Result<()> {
        if u.n != self.n() {
            return Err(Error::Mismatch(format!(
                "element in {} variables for a {}-node context",
                u.n,
                self.n()
            )));
        }
        Ok(())
    }

    fn chibar(&self, v: &[i64], w: &[i64]) -> i64 {
        self.form.chibar_vec(v, w)
    }

    /// `(x^w y^v)(x^{w'} y^{v'}) = (−1)^{χ̄(v',v)} x^{w+w'} y^{v+v'}`.
    pub fn monomial_product(&self, a: &Monomial, b: &Monomial) -> (i64, Monomial) {
        let sign = if self.chibar(&b.1, &a.1).rem_euclid(2) == 0 { 1 } else { -1 };
        (sign, (add_vec(&a.0, &b.0), add_vec(&a.1, &b.1)))
    }

    pub fn product(&self, u: &TorusElement, v: &TorusElement) -> Result<TorusElement> {
        self.check(u)?;
        u.check(v)?;
        let trunc = u.joint_trunc(v);
        let pairs: Vec<(&Monomial, &BigRational)> = u.terms.iter().collect();
        let partial = |chunk: &[(&Monomial, &BigRational)]| {
            let mut acc = TorusElement::zero(u.n, trunc);
            for (a, ca) in chunk {
                for (b, cb) in &v.terms {
                    let (s, m) = self.monomial_product(a, b);
                    acc.add_term(m, rat(s) * *ca * cb);
                }
            }
            acc
        };
        if pairs.len() * v.len() < 4096 {
            return Ok(partial(&pairs));
        }
        let pieces: Vec<TorusElement> = pairs.par_chunks(64).map(partial).collect();
        let mut out = TorusElement::zero(u.n, trunc);
        for p in pieces {
            for (m, c) in p.terms {
                out.add_term(m, c);
            }
        }
        Ok(out)
    }

    /// Inverse of a monomial, or of a series `c(1 + r)` with `r` of positive y-degree.
    pub fn inverse(&self, u: &TorusElement) -> Result<TorusElement> {
        self.check(u)?;
        if u.len() == 1 {
            let ((x, y), c) = u.terms.iter().next().expect("one term");
            let neg = |v: &Vec<i64>| v.iter().map(|e| -e).collect();
            return Ok(TorusElement::monomial(u.n, u.trunc, neg(x), neg(y), c.recip()));
        }
        let c0 = u.constant_term();
        if c0.is_zero() {
            return Err(Error::Input("series inverse needs a nonzero constant term".into()));
        }
        let d = u.trunc.ok_or_else(|| Error::Input("series inverse needs a truncation bound".into()))?;
        let mut r = u.scale(&c0.recip());
        r.add_term((vec![0; u.n], vec![0; u.n]), rat(-1));
        if r.terms.keys().any(|(_, y)| l1(y) == 0) {
            return Err(Error::Input("series inverse needs the non-constant terms to carry y".into()));
        }
        let minus_r = r.scale(&rat(-1));
        let mut acc = TorusElement::one(u.n, Some(d));
        let mut pow = TorusElement::one(u.n, Some(d));
        for _ in 0..d {
            pow = self.product(&pow, &minus_r)?;
            if pow.is_zero() {
                break;
            }
            acc = acc.try_add(&pow)?;
        }
        Ok(acc.scale(&c0.recip()))
    }

    pub fn power(&self, u: &TorusElement, e: i64) -> Result<TorusElement> {
        self.check(u)?;
        let base = if e < 0 { self.inverse(u)? } else { u.clone() };
        let mut acc = TorusElement::one(u.n, u.trunc);
        let mut sq = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.product(&acc, &sq)?;
            }
            k >>= 1;
            if k > 0 {
                sq = self.product(&sq, &sq)?;
            }
        }
        Ok(acc)
    }

    /// `{x^w y^v, x^{w'} y^{v'}} = (−1)^{χ̄(v',v)} (χ̄(v',v) + ⟨w',v⟩ − ⟨w,v'⟩) x^{w+w'} y^{v+v'}`,
    /// the biderivation extending `{y^v, y^{v'}}` and `{y_i, x_j} = δ_ij x_j y_i`.
    pub fn poisson(&self, u: &TorusElement, v: &TorusElement) -> Result<TorusElement> {
        self.check(u)?;
        u.check(v)?;
        let mut out = TorusElement::zero(u.n, u.joint_trunc(v));
        let dot = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<i64>();
        for (a, ca) in &u.terms {
            for (b, cb) in &v.terms {
                let lambda = self.chibar(&b.1, &a.1) + dot(&b.0, &a.1) - dot(&a.0, &b.1);
                if lambda == 0 {
                    continue;
                }
                let (s, m) = self.monomial_product(a, b);
                out.add_term(m, rat(s * lambda) * ca * cb);
            }
        }
        Ok(out)
    }

    /// The involution `x_i ↦ x_i⁻¹`, `y_i ↦ y_i⁻¹` (an algebra automorphism).
    pub fn sigma(&self, u: &TorusElement) -> TorusElement {
        let mut out = TorusElement::zero(u.n, u.trunc);
        for ((x, y), c) in &u.terms {
            out.add_term((x.iter().map(|e| -e).collect(), y.iter().map(|e| -e).collect()), c.clone());
        }
        out
    }

    pub fn identity_operator(&self, d: usize) -> AdOperator {
        let one = TorusElement::one(self.n(), Some(d));
        AdOperator {
            trunc: d,
            x_mult: vec![one.clone(); self.n()],
            y_mult: vec![one; self.n()],
        }
    }

    fn check_op(&self, op: &AdOperator) -> Result<()> {
        if op.x_mult.len() != self.n() || op.y_mult.len() != self.n() {
            return Err(Error::Mismatch("operator has the wrong number of generators".into()));
        }
        for m in op.x_mult.iter().chain(&op.y_mult) {
            self.check(m)?;
            if !m.constant_term().is_one() {
                return Err(Error::Input("operator multipliers must have constant term 1".into()));
            }
        }
        Ok(())
    }

    /// `Ad(x^w y^v) = x^w y^v · Π m_i^{w_i} Π μ_i^{v_i}`.
    pub fn apply(&self, op: &AdOperator, u: &TorusElement) -> Result<TorusElement> {
        self.check(u)?;
        self.check_op(op)?;
        let d = u.trunc.map_or(op.trunc, |t| t.min(op.trunc));
        let mut cache: BTreeMap<(bool, usize, i64), TorusElement> = BTreeMap::new();
        let mut out = TorusElement::zero(u.n, Some(d));
        for ((x, y), c) in &u.terms {
            let mut img = TorusElement::monomial(u.n, Some(d), x.clone(), y.clone(), c.clone());
            for (is_x, exps, mults) in [(true, x, &op.x_mult), (false, y, &op.y_mult)] {
                for (i, &e) in exps.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let key = (is_x, i, e);
                    if let std::collections::btree_map::Entry::Vacant(slot) = cache.entry(key) {
                        slot.insert(self.power(&mults[i].with_trunc(Some(d)), e)?);
                    }
                    img = self.product(&img, &cache[&key])?;
                }
            }
            out = out.try_add(&img)?;
        }
        Ok(out)
    }

    /// `a ∘ b`: multipliers `m_i^a · a(m_i^b)`.
    pub fn compose(&self, a: &AdOperator, b: &AdOperator) -> Result<AdOperator> {
        self.check_op(a)?;
        self.check_op(b)?;
        let d = a.trunc.min(b.trunc);
        let join = |ma: &[TorusElement], mb: &[TorusElement]| -> Result<Vec<TorusElement>> {
            ma.iter()
                .zip(mb)
                .map(|(x, y)| self.product(&x.with_trunc(Some(d)), &self.apply(a, y)?))
                .collect()
        };
        Ok(AdOperator {
            trunc: d,
            x_mult: join(&a.x_mult, &b.x_mult)?,
            y_mult: join(&a.y_mult, &b.y_mult)?,
        })
    }

    /// Inverse operator by the fixed point `B(y_i) = y_i·B(μ_i)⁻¹`, exact after `D + 1`
    /// rounds since each round fixes one more y-degree.
    pub fn invert_operator(&self, op: &AdOperator) -> Result<AdOperator> {
        self.check_op(op)?;
        let d = op.trunc;
        let mut b = self.identity_operator(d);
        for _ in 0..=d {
            let next = |mults: &[TorusElement]| -> Result<Vec<TorusElement>> {
                mults.iter().map(|m| self.inverse(&self.apply(&b, m)?)).collect()
            };
            let nb = AdOperator {
                trunc: d,
                x_mult: next(&op.x_mult)?,
                y_mult: next(&op.y_mult)?,
            };
            if nb == b {
                break;
            }
            b = nb;
        }
        Ok(b)
    }

    /// Whether two operators agree on all generators to their common degree.
    pub fn operators_agree(&self, a: &AdOperator, b: &AdOperator) -> bool {
        let d = Some(a.trunc.min(b.trunc));
        a.x_mult
            .iter()
            .chain(&a.y_mult)
            .zip(b.x_mult.iter().chain(&b.y_mult))
            .all(|(p, q)| p.with_trunc(d) == q.with_trunc(d))
    }

    /// `DT(x_i) = x_i·Z^i`, `DT(y_i) = y_i·Π_j (Z^j)^{χ̄(j,i)}`.
    pub fn dt_operator(&self, z: &[TorusElement], d: usize) -> Result<AdOperator> {
        if z.len() != self.n() {
            return Err(Error::Input(format!("{} series for {} nodes", z.len(), self.n())));
        }
        let z: Vec<TorusElement> = z.iter().map(|s| s.with_trunc(Some(d))).collect();
        for (i, s) in z.iter().enumerate() {
            self.check(s)?;
            if !s.is_y_only() {
                return Err(Error::Input(format!("Z^{} must be a series in y only", i + 1)));
            }
            if !s.constant_term().is_one() {
                return Err(Error::Input(format!("Z^{} must have constant term 1", i + 1)));
            }
        }
        let y_mult = (0..self.n())
            .map(|i| {
                (0..self.n()).try_fold(TorusElement::one(self.n(), Some(d)), |acc, j| {
                    let e = self.form.chibar(j, i);
                    if e == 0 {
                        Ok(acc)
                    } else {
                        self.product(&acc, &self.power(&z[j], e)?)
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(AdOperator {
            trunc: d,
            x_mult: z,
            y_mult,
        })
    }

    /// `x_i ↦ x_i(1 − y^c)^{c_i}`, `y_i ↦ y_i(1 − y^c)^{χ̄(c,e_i)}`; the shifted mode is
    /// `Σ∘Ad∘Σ`, with multipliers `(1 − y^{−c})^{−c_i}` and `(1 − y^{−c})^{−χ̄(c,e_i)}`.
    pub fn ad_class(&self, c: &[i64], mode: SignMode, d: usize) -> Result<AdOperator> {
        let n = self.n();
        if c.len() != n || c.iter().all(|&e| e == 0) {
            return Err(Error::Input("class must be a nonzero vector with one entry per node".into()));
        }
        let (sign, base) = match mode {
            SignMode::Plain => (1, c.to_vec()),
            SignMode::Shifted => (-1, c.iter().map(|e| -e).collect()),
        };
        let mut factor = TorusElement::one(n, Some(d));
        factor.add_term((vec![0; n], base), rat(-1));
        let mult = |e: i64| -> Result<TorusElement> {
            if e == 0 {
                Ok(TorusElement::one(n, Some(d)))
            } else {
                self.power(&factor, sign * e)
            }
        };
        Ok(AdOperator {
            trunc: d,
            x_mult: (0..n).map(|i| mult(c[i])).collect::<Result<_>>()?,
            y_mult: (0..n).map(|i| mult(self.chibar(c, &unit(n, i, 1)))).collect::<Result<_>>()?,
        })
    }

    /// The one-step operator at node `k`: `x_k ↦ x_k(1 − y_k)` in plain mode.
    pub fn ad_simple(&self, k: usize, mode: SignMode, d: usize) -> Result<AdOperator> {
        if k >= self.n() {
            return Err(Error::Input(format!("node index {k} out of range")));
        }
        self.ad_class(&unit(self.n(), k, 1), mode, d)
    }

    /// `steps[0] ∘ steps[1] ∘ ⋯` for classes and modes supplied per step.
    pub fn sequence_operator(&self, steps: &[(Vec<i64>, SignMode)], d: usize) -> Result<AdOperator> {
        steps.iter().try_fold(self.identity_operator(d), |acc, (c, mode)| {
            self.compose(&acc, &self.ad_class(c, *mode, d)?)
        })
    }

    /// Sign `σ` with `y^v = σ·Π_i y_i^{v_i}` (ordered product).
    fn ordered_sign(&self, v: &[i64]) -> i64 {
        let n = self.n();
        let mut acc = vec![0; n];
        let mut sign = 1;
        for (i, &e) in v.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let step = unit(n, i, e);
            if self.chibar(&step, &acc).rem_euclid(2) == 1 {
                sign = -sign;
            }
            acc[i] += e;
        }
        sign
    }

    /// Substitutes `y_i = −Π_j x_j^{χ̄(j,i)}` and collects an x-only element.
    pub fn fz_specialize(&self, u: &TorusElement) -> Result<TorusElement> {
        self.check(u)?;
        let n = self.n();
        let mut out = TorusElement::zero(n, None);
        for ((x, y), c) in &u.terms {
            let mut w = x.clone();
            let mut sign = self.ordered_sign(y);
            for (i, &e) in y.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if e.rem_euclid(2) == 1 {
                    sign = -sign;
                }
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj += e * self.form.chibar(j, i);
                }
            }
            out.add_term((w, vec![0; n]), rat(sign) * c);
        }
        Ok(out)
    }

    fn class_of(&self, v: &DimVector, class: &ClassMap, d: usize) -> Result<TorusElement> {
        let n = self.n();
        let v: Vec<i64> = v.0.iter().map(|&e| e as i64).collect();
        match class {
            ClassMap::Y => Ok(TorusElement::y_monomial(n, Some(d), v)),
            ClassMap::Specialized => self.fz_specialize(&TorusElement::y_monomial(n, None, v)),
            ClassMap::Matrix(m) => {
                if m.len() != n || m.iter().any(|r| r.len() != n) {
                    return Err(Error::Input(format!("class map must be a {n}×{n} matrix")));
                }
                let w = m.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
                Ok(TorusElement::x_monomial(n, w))
            }
        }
    }

    /// `x^g · Σ_v f(v)·class(v)`.
    pub fn cc_character(&self, g: &[i64], f: &FSeries, class: &ClassMap, d: usize) -> Result<TorusElement> {
        let n = self.n();
        if g.len() != n {
            return Err(Error::Input(format!("g must have {n} entries")));
        }
        let mut sum = TorusElement::zero(n, Some(d));
        for (v, e) in &f.entries {
            if v.0.len() != n {
                return Err(Error::Input(format!("F-series entry {:?} has the wrong length", v.0)));
            }
            let term = self.class_of(v, class, d)?.with_trunc(Some(d));
            sum = sum.try_add(&term.scale(&BigRational::from_integer(e.value.clone())))?;
        }
        self.product(&TorusElement::x_monomial(n, g.to_vec()), &sum)
    }
}

/// Exact quotient of x-only Laurent polynomials, via lex division after clearing
/// monomial factors.
pub fn exact_divide(a: &TorusElement, b: &TorusElement) -> Result<TorusElement> {
    a.check(b)?;
    if !a.is_x_only() || !b.is_x_only() || b.is_zero() {
        return Err(Error::Input("exact division needs x-only elements and a nonzero divisor".into()));
    }
    let n = a.n;
    if a.is_zero() {
        return Ok(TorusElement::zero(n, None));
    }
    let mins = |e: &TorusElement| -> Vec<i64> {
        (0..n).map(|i| e.terms.keys().map(|(x, _)| x[i]).min().expect("nonzero")).collect()
    };
    let (ma, mb) = (mins(a), mins(b));
    let shift = |e: &TorusElement, m: &[i64]| -> BTreeMap<Vec<i64>, BigRational> {
        e.terms
            .iter()
            .map(|((x, _), c)| (x.iter().zip(m).map(|(p, q)| p - q).collect(), c.clone()))
            .collect()
    };
    let mut rem = shift(a, &ma);
    let den = shift(b, &mb);
    let (lt_b, lc_b) = den.iter().next_back().map(|(k, c)| (k.clone(), c.clone())).expect("nonzero");
    let mut quot: BTreeMap<Vec<i64>, BigRational> = BTreeMap::new();
    while let Some((lt, lc)) = rem.iter().next_back().map(|(k, c)| (k.clone(), c.clone())) {
        let q: Vec<i64> = lt.iter().zip(&lt_b).map(|(p, r)| p - r).collect();
        if q.iter().any(|&e| e < 0) {
            return Err(Error::Infeasible("Laurent division is not exact".into()));
        }
        let c = lc / &lc_b;
        for (m, dc) in &den {
            let key = add_vec(m, &q);
            let slot = rem.entry(key.clone()).or_insert_with(BigRational::zero);
            *slot -= &c * dc;
            if slot.is_zero() {
                rem.remove(&key);
            }
        }
        quot.insert(q, c);
    }
    let offset: Vec<i64> = ma.iter().zip(&mb).map(|(p, q)| p - q).collect();
    TorusElement::from_terms(
        n,
        None,
        quot.into_iter().map(|(q, c)| ((add_vec(&q, &offset), vec![0; n]), c)),
    )
}

/// Evaluates an x-only Laurent polynomial at x-only Laurent polynomials `values`,
/// dividing exactly by the common denominator.
pub fn substitute(ctx: &TorusContext, expr: &TorusElement, values: &[TorusElement]) -> Result<TorusElement> {
    let n = expr.n;
    if !expr.is_x_only() || values.len() != n {
        return Err(Error::Input("substitution needs an x-only expression and one value per variable".into()));
    }
    let lift: Vec<i64> = (0..n)
        .map(|i| expr.terms.keys().map(|(x, _)| (-x[i]).max(0)).max().unwrap_or(0))
        .collect();
    let mut num = TorusElement::zero(values.first().map_or(n, |v| v.n), None);
    for ((x, _), c) in &expr.terms {
        let mut t = TorusElement::one(num.n, None).scale(c);
        for (i, &e) in x.iter().enumerate() {
            if e + lift[i] > 0 {
                t = ctx.product(&t, &ctx.power(&values[i], e + lift[i])?)?;
            }
        }
        num = num.try_add(&t)?;
    }
    let mut den = TorusElement::one(num.n, None);
    for (i, &l) in lift.iter().enumerate() {
        if l > 0 {
            den = ctx.product(&den, &ctx.power(&values[i], l)?)?;
        }
    }
    exact_divide(&num, &den)
}

/// Clusters along a mutation sequence, starting from `(x_1, …, x_n)`. Each step derives
/// the local exchange `x_k′ = fz(Ad_{k,shifted}(x_k⁻¹ Π x_j^{χ(j,k)}))` in the current seed
/// and substitutes the current cluster into it.
pub fn cluster_exchange(q: &Quiver, seq: &[usize]) -> Result<Vec<Vec<TorusElement>>> {
    let n = q.node_count();
    if q.has_loops_or_two_cycles() != (false, false) {
        return Err(Error::Input("cluster exchange needs a quiver without loops or 2-cycles".into()));
    }
    let initial_ctx = TorusContext::from_quiver(q);
    let mut b = q.euler_forms().exchange_matrix();
    let mut cluster: Vec<TorusElement> = (0..n).map(|i| TorusElement::x(n, i)).collect();
    let mut history = vec![cluster.clone()];
    for &k in seq {
        if k >= n {
            return Err(Error::Input(format!("node index {k} out of range")));
        }
        let ctx = TorusContext::new(EulerForm::from_exchange_matrix(&b));
        let mut w = vec![0; n];
        w[k] = -1;
        for (j, wj) in w.iter_mut().enumerate() {
            *wj += ctx.form.chi(j, k);
        }
        let start = TorusElement::monomial(n, Some(1), w, vec![0; n], rat(1));
        let local = ctx.fz_specialize(&ctx.apply(&ctx.ad_simple(k, SignMode::Shifted, 1)?, &start)?)?;
        cluster[k] = substitute(&initial_ctx, &local, &cluster)?;
        b = mutate_exchange_matrix(&b, k);
        history.push(cluster.clone());
    }
    Ok(history)
}
