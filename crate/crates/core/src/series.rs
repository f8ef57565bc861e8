//! Truncated noncommutative series on the paths of a quiver.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quiver::Quiver;
use crate::scalar::Scalar;

/// A composable path; length 0 is the idempotent `e_src`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Path {
    src: usize,
    tgt: usize,
    arrows: Vec<usize>,
}

impl Ord for Path {
    fn cmp(&self, other: &Self) -> Ordering {
        self.arrows
            .len()
            .cmp(&other.arrows.len())
            .then_with(|| self.arrows.cmp(&other.arrows))
            .then_with(|| self.src.cmp(&other.src))
    }
}

impl PartialOrd for Path {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.arrows.is_empty() {
            write!(f, "e{}", self.src)
        } else {
            write!(f, "{:?}", self.arrows)
        }
    }
}

impl Path {
    pub fn idempotent(i: usize) -> Path {
        Path {
            src: i,
            tgt: i,
            arrows: Vec::new(),
        }
    }

    pub fn arrow(q: &Quiver, a: usize) -> Path {
        let ar = q.arrow(a);
        Path {
            src: ar.src,
            tgt: ar.tgt,
            arrows: vec![a],
        }
    }

    /// A nonempty arrow sequence, checked for composability.
    pub fn from_arrows(q: &Quiver, arrows: &[usize]) -> Result<Path> {
        let first = *arrows
            .first()
            .ok_or_else(|| Error::Input("empty arrow sequence needs a node".into()))?;
        if first >= q.arrow_count() {
            return Err(Error::Input(format!("arrow index {first} out of range")));
        }
        let mut tgt = q.arrow(first).tgt;
        for &a in &arrows[1..] {
            if a >= q.arrow_count() {
                return Err(Error::Input(format!("arrow index {a} out of range")));
            }
            let ar = q.arrow(a);
            if ar.src != tgt {
                return Err(Error::Input(format!(
                    "non-composable path: arrow {:?} does not start where the previous arrow ends",
                    ar.id
                )));
            }
            tgt = ar.tgt;
        }
        Ok(Path {
            src: q.arrow(first).src,
            tgt,
            arrows: arrows.to_vec(),
        })
    }

    /// Builds from arrow ids; an empty list needs `node`.
    pub fn from_ids<S: AsRef<str>>(q: &Quiver, ids: &[S], node: Option<&str>) -> Result<Path> {
        if ids.is_empty() {
            let n = node.ok_or_else(|| Error::Input("empty path requires a node".into()))?;
            return Ok(Path::idempotent(q.node(n)?));
        }
        let idx: Result<Vec<usize>> = ids.iter().map(|s| q.arrow_by_id(s.as_ref())).collect();
        let p = Path::from_arrows(q, &idx?)?;
        if let Some(n) = node {
            if q.node(n)? != p.src {
                return Err(Error::Input(format!("path does not start at node {n:?}")));
            }
        }
        Ok(p)
    }

    /// Unchecked constructor for internal use when endpoints are known.
    pub(crate) fn raw(src: usize, tgt: usize, arrows: Vec<usize>) -> Path {
        Path { src, tgt, arrows }
    }

    pub fn src(&self) -> usize {
        self.src
    }

    pub fn tgt(&self) -> usize {
        self.tgt
    }

    pub fn arrows(&self) -> &[usize] {
        &self.arrows
    }

    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrows.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.src == self.tgt
    }

    /// `self·other` when `t(self) = s(other)`.
    pub fn concat(&self, other: &Path) -> Option<Path> {
        if self.tgt != other.src {
            return None;
        }
        let mut arrows = Vec::with_capacity(self.arrows.len() + other.arrows.len());
        arrows.extend_from_slice(&self.arrows);
        arrows.extend_from_slice(&other.arrows);
        Some(Path {
            src: self.src,
            tgt: other.tgt,
            arrows,
        })
    }

    /// Subpath `arrows[i..j]`; empty ranges give the idempotent at the right node.
    pub fn slice(&self, q: &Quiver, i: usize, j: usize) -> Path {
        if i >= j {
            let node = if i < self.arrows.len() {
                q.arrow(self.arrows[i]).src
            } else {
                self.tgt
            };
            return Path::idempotent(node);
        }
        Path {
            src: q.arrow(self.arrows[i]).src,
            tgt: q.arrow(self.arrows[j - 1]).tgt,
            arrows: self.arrows[i..j].to_vec(),
        }
    }

    /// Arrow ids, or `["e_<node>"]` for an idempotent.
    pub fn display(&self, q: &Quiver) -> String {
        if self.arrows.is_empty() {
            format!("e_{}", q.node_id(self.src))
        } else {
            self.arrows
                .iter()
                .map(|&a| q.arrow(a).id.as_str())
                .collect::<Vec<_>>()
                .join("·")
        }
    }

    pub fn ids(&self, q: &Quiver) -> Vec<String> {
        self.arrows.iter().map(|&a| q.arrow(a).id.clone()).collect()
    }
}

/// Truncated series `Σ a_w w` over paths of length `≤ trunc`.
#[derive(Clone, PartialEq)]
pub struct TruncSeries<K> {
    quiver: Arc<Quiver>,
    trunc: usize,
    terms: BTreeMap<Path, K>,
}

impl<K: Scalar> fmt::Debug for TruncSeries<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncSeries(N={}; ", self.trunc)?;
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{:?}·{}", c, p.display(&self.quiver))?;
        }
        write!(f, ")")
    }
}

pub(crate) fn same_quiver(a: &Arc<Quiver>, b: &Arc<Quiver>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl<K: Scalar> TruncSeries<K> {
    pub fn zero(quiver: Arc<Quiver>, trunc: usize) -> Self {
        TruncSeries {
            quiver,
            trunc,
            terms: BTreeMap::new(),
        }
    }

    /// `Σ_i e_i`.
    pub fn identity(quiver: Arc<Quiver>, trunc: usize) -> Self {
        let mut s = Self::zero(quiver.clone(), trunc);
        for i in 0..quiver.node_count() {
            s.add_term(Path::idempotent(i), K::one());
        }
        s
    }

    pub fn idempotent(quiver: Arc<Quiver>, trunc: usize, i: usize) -> Self {
        Self::monomial(quiver, trunc, Path::idempotent(i), K::one())
    }

    pub fn arrow(quiver: Arc<Quiver>, trunc: usize, a: usize) -> Self {
        let p = Path::arrow(&quiver, a);
        Self::monomial(quiver, trunc, p, K::one())
    }

    pub fn monomial(quiver: Arc<Quiver>, trunc: usize, p: Path, c: K) -> Self {
        let mut s = Self::zero(quiver, trunc);
        s.add_term(p, c);
        s
    }

    pub fn from_terms<I: IntoIterator<Item = (Path, K)>>(
        quiver: Arc<Quiver>,
        trunc: usize,
        terms: I,
    ) -> Self {
        let mut s = Self::zero(quiver, trunc);
        for (p, c) in terms {
            s.add_term(p, c);
        }
        s
    }

    /// Parses words of arrow ids, e.g. `[("a b", 1)]`; coefficients given as integers.
    pub fn from_words(quiver: Arc<Quiver>, trunc: usize, words: &[(&str, i64)]) -> Result<Self> {
        let mut s = Self::zero(quiver.clone(), trunc);
        for (w, c) in words {
            let ids: Vec<&str> = w.split_whitespace().collect();
            let p = Path::from_ids(&quiver, &ids, None)?;
            s.add_term(p, K::from_i64(*c));
        }
        Ok(s)
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn terms(&self) -> &BTreeMap<Path, K> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<Path, K> {
        self.terms
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

    pub fn coeff(&self, p: &Path) -> K {
        self.terms.get(p).cloned().unwrap_or_else(K::zero)
    }

    /// Adds `c·p`, merging and dropping zeros; paths beyond the truncation are ignored.
    pub fn add_term(&mut self, p: Path, c: K) {
        if p.len() > self.trunc || c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(p) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = e.get().clone() + c;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    /// Lowest path length present; `trunc + 1` for the zero series.
    pub fn ord(&self) -> usize {
        self.terms
            .keys()
            .next()
            .map(|p| p.len())
            .unwrap_or(self.trunc + 1)
    }

    /// Highest path length present, if any.
    pub fn max_degree(&self) -> Option<usize> {
        self.terms.keys().next_back().map(|p| p.len())
    }

    pub fn degree_part(&self, d: usize) -> Self {
        Self::from_terms(
            self.quiver.clone(),
            self.trunc,
            self.terms
                .iter()
                .filter(|(p, _)| p.len() == d)
                .map(|(p, c)| (p.clone(), c.clone())),
        )
    }

    /// Keeps terms of length `≤ r` without changing the truncation degree.
    pub fn jet(&self, r: usize) -> Self {
        Self::from_terms(
            self.quiver.clone(),
            self.trunc,
            self.terms
                .iter()
                .filter(|(p, _)| p.len() <= r)
                .map(|(p, c)| (p.clone(), c.clone())),
        )
    }

    /// Re-truncates to a smaller (or equal) degree.
    pub fn truncated(&self, m: usize) -> Self {
        let mut s = self.jet(m);
        s.trunc = m.min(self.trunc);
        s
    }

    /// Same terms, different truncation degree (terms above `m` are dropped).
    pub fn with_trunc(&self, m: usize) -> Self {
        let mut s = self.jet(m);
        s.trunc = m;
        s
    }

    /// Terms with source `i`, i.e. `e_i · f`.
    pub fn restrict_source(&self, i: usize) -> Self {
        Self::from_terms(
            self.quiver.clone(),
            self.trunc,
            self.terms
                .iter()
                .filter(|(p, _)| p.src() == i)
                .map(|(p, c)| (p.clone(), c.clone())),
        )
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !same_quiver(&self.quiver, &other.quiver) {
            return Err(Error::Mismatch("series over different quivers".into()));
        }
        if self.trunc != other.trunc {
            return Err(Error::Mismatch(format!(
                "truncation degrees differ ({} vs {})",
                self.trunc, other.trunc
            )));
        }
        Ok(())
    }

    pub fn scale(&self, c: &K) -> Self {
        if c.is_zero() {
            return Self::zero(self.quiver.clone(), self.trunc);
        }
        Self::from_terms(
            self.quiver.clone(),
            self.trunc,
            self.terms.iter().map(|(p, x)| (p.clone(), x.clone() * c.clone())),
        )
    }

    pub fn add_assign_scaled(&mut self, other: &Self, c: &K) {
        for (p, x) in &other.terms {
            self.add_term(p.clone(), x.clone() * c.clone());
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut s = self.clone();
        for (p, x) in &other.terms {
            s.add_term(p.clone(), x.clone());
        }
        Ok(s)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut s = self.clone();
        for (p, x) in &other.terms {
            s.add_term(p.clone(), -x.clone());
        }
        Ok(s)
    }

    /// Concatenation product; terms of length `> trunc` are dropped.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.mul_bounded(other, self.trunc))
    }

    /// Product keeping only terms of length `≤ max` (and `≤ trunc`).
    pub(crate) fn mul_bounded(&self, other: &Self, max: usize) -> Self {
        let max = max.min(self.trunc);
        let n = self.quiver.node_count();
        let mut by_src: Vec<Vec<(&Path, &K)>> = vec![Vec::new(); n];
        for (p, c) in &other.terms {
            by_src[p.src()].push((p, c));
        }
        let mut out = Self::zero(self.quiver.clone(), self.trunc);
        for (p, c) in &self.terms {
            if p.len() > max {
                break;
            }
            let room = max - p.len();
            for (q, d) in &by_src[p.tgt()] {
                if q.len() > room {
                    break;
                }
                let pq = p.concat(q).expect("endpoints checked");
                out.add_term(pq, c.clone() * (*d).clone());
            }
        }
        out
    }

    /// Largest coefficient discrepancy in absolute value.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (p, c) in &self.terms {
            m = m.max((c.clone() - other.coeff(p)).abs_f64());
        }
        for (p, c) in &other.terms {
            if !self.terms.contains_key(p) {
                m = m.max(c.abs_f64());
            }
        }
        m
    }

    pub fn map_coeffs<K2: Scalar, F: Fn(&K) -> K2>(&self, f: F) -> TruncSeries<K2> {
        TruncSeries::from_terms(
            self.quiver.clone(),
            self.trunc,
            self.terms.iter().map(|(p, c)| (p.clone(), f(c))),
        )
    }

    /// Constant part `Σ c_i e_i` as node-indexed coefficients.
    pub fn constant_part(&self) -> Vec<K> {
        let mut v = vec![K::zero(); self.quiver.node_count()];
        for (p, c) in self.terms.iter().take_while(|(p, _)| p.is_empty()) {
            v[p.src()] = c.clone();
        }
        v
    }

    /// `Σ_{d≤N} f^d/d!` (with `f^0 = Σ e_i`).
    pub fn exponential(&self) -> Result<Self> {
        if self.ord() == 0 {
            return Err(Error::Infeasible("exponential needs ord(f) ≥ 1".into()));
        }
        let mut result = Self::identity(self.quiver.clone(), self.trunc);
        let mut power = result.clone();
        for d in 1..=self.trunc {
            power = power.mul_bounded(self, self.trunc).scale(&K::from_ratio(1, d as i64));
            if power.is_zero() {
                break;
            }
            result = &result + &power;
        }
        Ok(result)
    }

    /// `log(f) = Σ_{d≥1} (−1)^{d+1} (f − 1)^d / d` for `f` with constant part `Σ e_i`.
    pub fn logarithm(&self) -> Result<Self> {
        let one = Self::identity(self.quiver.clone(), self.trunc);
        let g = self.try_sub(&one)?;
        if g.ord() == 0 {
            return Err(Error::Infeasible("logarithm needs constant part Σ e_i".into()));
        }
        let mut result = Self::zero(self.quiver.clone(), self.trunc);
        let mut power = one;
        for d in 1..=self.trunc {
            power = power.mul_bounded(&g, self.trunc);
            if power.is_zero() {
                break;
            }
            let sign = if d % 2 == 1 { 1 } else { -1 };
            result.add_assign_scaled(&power, &K::from_ratio(sign, d as i64));
        }
        Ok(result)
    }

    /// Two-sided inverse of a series whose constant part `Σ c_i e_i` has every `c_i ≠ 0`.
    pub fn mult_inverse(&self) -> Result<Self> {
        let consts = self.constant_part();
        if let Some(i) = consts.iter().position(|c| c.is_zero()) {
            return Err(Error::Infeasible(format!(
                "constant coefficient at node {:?} is zero; not a unit",
                self.quiver.node_id(i)
            )));
        }
        let dinv = Self::from_terms(
            self.quiver.clone(),
            self.trunc,
            consts
                .iter()
                .enumerate()
                .map(|(i, c)| (Path::idempotent(i), K::one() / c.clone())),
        );
        // f = D(1 + h) with h = D⁻¹(f − D), so f⁻¹ = (Σ (−h)^d) D⁻¹.
        let h = dinv.mul_bounded(self, self.trunc) - Self::identity(self.quiver.clone(), self.trunc);
        let neg_h = -&h;
        let mut sum = Self::identity(self.quiver.clone(), self.trunc);
        let mut power = sum.clone();
        for _ in 1..=self.trunc {
            power = power.mul_bounded(&neg_h, self.trunc);
            if power.is_zero() {
                break;
            }
            sum = &sum + &power;
        }
        Ok(sum.mul_bounded(&dinv, self.trunc))
    }

    /// Per node `i`: loops at `i` become commuting variables, every other arrow maps to 0.
    pub fn abelianize(&self) -> Vec<CommPoly<K>> {
        let q = &self.quiver;
        (0..q.node_count())
            .map(|i| {
                let loops: Vec<usize> = q.arrows_between(i, i);
                let mut poly = CommPoly::zero(loops.len(), self.trunc);
                for (p, c) in &self.terms {
                    if p.src() != i || p.tgt() != i {
                        continue;
                    }
                    let mut exps = vec![0u32; loops.len()];
                    let mut ok = true;
                    for &a in p.arrows() {
                        match loops.iter().position(|&l| l == a) {
                            Some(k) => exps[k] += 1,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        poly.add_term(exps, c.clone());
                    }
                }
                poly
            })
            .collect()
    }

    /// Human-readable form such as `1·(e_1) + 2·(a·b)`.
    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|(p, c)| format!("{}·({})", crate::potential::fmt_coeff(c), p.display(&self.quiver)))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn growth_report(&self) -> GrowthReport {
        GrowthReport::from_coeffs(self.trunc, self.terms.iter().map(|(p, c)| (p.len(), c)))
    }
}

impl<K: Scalar> Add for &TruncSeries<K> {
    type Output = TruncSeries<K>;
    fn add(self, rhs: Self) -> TruncSeries<K> {
        self.try_add(rhs).expect("series operands must match")
    }
}

impl<K: Scalar> Sub for &TruncSeries<K> {
    type Output = TruncSeries<K>;
    fn sub(self, rhs: Self) -> TruncSeries<K> {
        self.try_sub(rhs).expect("series operands must match")
    }
}

impl<K: Scalar> Sub for TruncSeries<K> {
    type Output = TruncSeries<K>;
    fn sub(self, rhs: Self) -> TruncSeries<K> {
        self.try_sub(&rhs).expect("series operands must match")
    }
}

impl<K: Scalar> std::ops::Mul for &TruncSeries<K> {
    type Output = TruncSeries<K>;
    fn mul(self, rhs: Self) -> TruncSeries<K> {
        self.try_mul(rhs).expect("series operands must match")
    }
}

impl<K: Scalar> Neg for &TruncSeries<K> {
    type Output = TruncSeries<K>;
    fn neg(self) -> TruncSeries<K> {
        self.map_coeffs(|c| -c.clone())
    }
}

/// Truncated commutative polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct CommPoly<K> {
    pub nvars: usize,
    pub trunc: usize,
    pub terms: BTreeMap<Vec<u32>, K>,
}

impl<K: Scalar> CommPoly<K> {
    pub fn zero(nvars: usize, trunc: usize) -> Self {
        CommPoly {
            nvars,
            trunc,
            terms: BTreeMap::new(),
        }
    }

    pub fn degree(exps: &[u32]) -> usize {
        exps.iter().map(|&e| e as usize).sum()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: K) {
        if Self::degree(&exps) > self.trunc || c.is_zero() {
            return;
        }
        let v = match self.terms.remove(&exps) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(exps, v);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars, self.trunc.min(other.trunc));
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1.clone() * c2.clone());
            }
        }
        out
    }
}

/// Per-degree ℓ1 sums and the growth constant `Ĉ = max_n s_n^{1/n}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    /// `s_n` for `n = 0..=N`.
    pub sums: Vec<f64>,
    /// Exact sums when every coefficient is rational.
    #[serde(skip)]
    pub exact_sums: Option<Vec<BigRational>>,
    pub c_hat: f64,
    /// `s_n ≤ Ĉⁿ` for every computed `n ≥ 1`.
    pub geometric: bool,
    /// `s_n^{1/n}` is strictly increasing over the nonzero degrees `n ≥ 1` (non-geometric signal).
    pub root_increasing: bool,
}

impl GrowthReport {
    pub(crate) fn from_coeffs<'a, K: Scalar, I: Iterator<Item = (usize, &'a K)>>(
        trunc: usize,
        it: I,
    ) -> Self {
        let mut sums = vec![0.0f64; trunc + 1];
        let mut exact: Option<Vec<BigRational>> = Some(vec![<BigRational as Zero>::zero(); trunc + 1]);
        for (n, c) in it {
            sums[n] += c.abs_f64();
            match (exact.as_mut(), rational_abs(c)) {
                (Some(v), Some(a)) => v[n] += a,
                _ => exact = None,
            }
        }
        if let Some(v) = &exact {
            for (s, e) in sums.iter_mut().zip(v) {
                *s = num_traits::ToPrimitive::to_f64(e).unwrap_or(*s);
            }
        }
        let roots: Vec<(usize, f64)> = (1..=trunc)
            .filter(|&n| sums[n] > 0.0)
            .map(|n| (n, sums[n].powf(1.0 / n as f64)))
            .collect();
        let c_hat = roots.iter().map(|r| r.1).fold(0.0, f64::max);
        let geometric = (1..=trunc).all(|n| sums[n] <= c_hat.powi(n as i32) * (1.0 + 1e-12));
        let root_increasing = roots.len() >= 2 && roots.windows(2).all(|w| w[1].1 > w[0].1);
        GrowthReport {
            sums,
            exact_sums: exact,
            c_hat,
            geometric,
            root_increasing,
        }
    }
}

fn rational_abs<K: Scalar>(c: &K) -> Option<BigRational> {
    c.as_rational().map(|r| r.abs())
}

/// One JSON term. Series use `path`, potentials use `cycle`; `node` names an idempotent.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub re: String,
    #[serde(default = "zero_string")]
    pub im: String,
}

fn zero_string() -> String {
    "0".into()
}

/// `{"trunc": N, "terms": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct SeriesJson {
    pub trunc: usize,
    pub terms: Vec<TermJson>,
}

impl<K: Scalar> TruncSeries<K> {
    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| {
                    let (re, im) = c.format_parts();
                    TermJson {
                        path: Some(p.ids(&self.quiver)),
                        cycle: None,
                        node: if p.is_empty() {
                            Some(self.quiver.node_id(p.src()).to_string())
                        } else {
                            None
                        },
                        re,
                        im,
                    }
                })
                .collect(),
        }
    }

    pub fn from_json(quiver: Arc<Quiver>, j: &SeriesJson) -> Result<Self> {
        let mut s = Self::zero(quiver.clone(), j.trunc);
        for (k, t) in j.terms.iter().enumerate() {
            let ids = t
                .path
                .as_ref()
                .ok_or_else(|| Error::Input(format!("terms[{k}]: missing \"path\"")))?;
            let p = Path::from_ids(&quiver, ids, t.node.as_deref())
                .map_err(|e| Error::Input(format!("terms[{k}]: {e}")))?;
            if p.len() > j.trunc {
                return Err(Error::Input(format!(
                    "terms[{k}]: path length {} exceeds truncation {}",
                    p.len(),
                    j.trunc
                )));
            }
            let c = K::parse_parts(&t.re, &t.im).map_err(|e| Error::Input(format!("terms[{k}]: {e}")))?;
            s.add_term(p, c);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};
    use num_rational::BigRational as Q;
    use proptest::prelude::*;

    fn z_series(coeffs: &[i64], n: usize) -> TruncSeries<Q> {
        let quiver = Quiver::loops(&["z"]);
        let mut s = TruncSeries::zero(quiver.clone(), n);
        for (d, &c) in coeffs.iter().enumerate() {
            let p = if d == 0 {
                Path::idempotent(0)
            } else {
                Path::from_arrows(&quiver, &vec![0; d]).unwrap()
            };
            s.add_term(p, qi(c));
        }
        s
    }

    #[test]
    fn idempotent_action_restricts_source() {
        let q3 = Quiver::three_cycle();
        let f = TruncSeries::<Q>::from_words(q3.clone(), 4, &[("b a", 1), ("a c", 2), ("c b", 3)])
            .unwrap();
        let e1 = TruncSeries::idempotent(q3.clone(), 4, q3.node("1").unwrap());
        assert_eq!(&e1 * &f, f.restrict_source(0));
        assert_eq!((&e1 * &f).len(), 1);
    }

    #[test]
    fn monomial_concatenation() {
        let a = z_series(&[0, 1, 1], 3);
        let b = z_series(&[0, 1], 3);
        assert_eq!(&a * &b, z_series(&[0, 0, 1, 1], 3));
    }

    #[test]
    fn composability_under_convention() {
        let q3 = Quiver::three_cycle();
        let a = TruncSeries::<Q>::arrow(q3.clone(), 3, q3.arrow_by_id("a").unwrap());
        let b = TruncSeries::<Q>::arrow(q3.clone(), 3, q3.arrow_by_id("b").unwrap());
        let ba = &b * &a;
        assert_eq!(ba.len(), 1);
        let p = ba.terms().keys().next().unwrap();
        assert_eq!((p.src(), p.tgt()), (0, 2));
        assert!((&a * &b).is_zero());
    }

    #[test]
    fn exponential_of_loop() {
        let e = z_series(&[0, 1], 3).exponential().unwrap();
        let quiver = e.quiver().clone();
        let expected = TruncSeries::from_terms(
            quiver.clone(),
            3,
            (0..=3).map(|d| {
                let p = if d == 0 {
                    Path::idempotent(0)
                } else {
                    Path::from_arrows(&quiver, &vec![0; d]).unwrap()
                };
                let fact: i64 = (1..=d as i64).product();
                (p, q(1, fact))
            }),
        );
        assert_eq!(e, expected);
        let zero = z_series(&[], 3);
        assert_eq!(zero.exponential().unwrap(), z_series(&[1], 3));
        assert!(z_series(&[1], 3).exponential().is_err());
    }

    #[test]
    fn geometric_inverse() {
        let f = z_series(&[1, -1], 4);
        assert_eq!(f.mult_inverse().unwrap(), z_series(&[1, 1, 1, 1, 1], 4));
        let id = z_series(&[1], 4);
        assert_eq!(id.mult_inverse().unwrap(), id);
        assert!(z_series(&[0, 1], 4).mult_inverse().is_err());
        let scaled = z_series(&[2, 1], 3);
        let inv = scaled.mult_inverse().unwrap();
        assert_eq!(&scaled * &inv, z_series(&[1], 3));
    }

    #[test]
    fn abelianization_examples() {
        let q2 = Quiver::loops(&["x", "y"]);
        let c = TruncSeries::<Q>::from_words(q2, 3, &[("x y", 1), ("y x", -1)]).unwrap();
        assert!(c.abelianize()[0].is_zero());
        let q3 = Quiver::three_cycle();
        let abc = TruncSeries::<Q>::from_words(q3, 3, &[("a c b", 1)]).unwrap();
        assert!(abc.abelianize().iter().all(|p| p.is_zero()));
        let f = z_series(&[1, 2, 3], 3).abelianize();
        assert_eq!(f[0].terms.len(), 3);
        assert_eq!(f[0].terms[&vec![2]], qi(3));
    }

    #[test]
    fn growth_examples() {
        let g = z_series(&[0, 2, 4, 8, 16], 4).growth_report();
        assert_eq!(g.sums, vec![0.0, 2.0, 4.0, 8.0, 16.0]);
        assert!((g.c_hat - 2.0).abs() < 1e-12);
        assert!(g.geometric);
        let facts: Vec<i64> = (0..=8).map(|n| (1..=n).product::<i64>()).collect();
        let mut c = facts.clone();
        c[0] = 0;
        let g = z_series(&c, 8).growth_report();
        assert!((g.c_hat - 40320f64.powf(1.0 / 8.0)).abs() < 1e-9);
        assert!(g.root_increasing);
    }

    #[test]
    fn json_round_trip_keeps_idempotents() {
        let f = z_series(&[3, 0, -2], 4);
        let j = f.to_json();
        let back = TruncSeries::<Q>::from_json(f.quiver().clone(), &j).unwrap();
        assert_eq!(back, f);
        let bad = SeriesJson {
            trunc: 1,
            terms: vec![TermJson {
                path: Some(vec!["z".into(), "z".into()]),
                cycle: None,
                node: None,
                re: "1".into(),
                im: "0".into(),
            }],
        };
        assert!(TruncSeries::<Q>::from_json(f.quiver().clone(), &bad).is_err());
    }

    fn arb_two_loop(n: usize) -> impl Strategy<Value = TruncSeries<Q>> {
        let quiver = Quiver::loops(&["x", "y"]);
        proptest::collection::vec((proptest::collection::vec(0usize..2, 0..=n), -3i64..=3), 0..8)
            .prop_map(move |terms| {
                TruncSeries::from_terms(
                    quiver.clone(),
                    n,
                    terms.into_iter().map(|(w, c)| {
                        let p = if w.is_empty() {
                            Path::idempotent(0)
                        } else {
                            Path::raw(0, 0, w)
                        };
                        (p, qi(c))
                    }),
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn product_is_associative(f in arb_two_loop(4), g in arb_two_loop(4), h in arb_two_loop(4)) {
            prop_assert_eq!(&(&f * &g) * &h, &f * &(&g * &h));
        }

        #[test]
        fn product_is_bilinear(f in arb_two_loop(4), g in arb_two_loop(4), h in arb_two_loop(4)) {
            prop_assert_eq!(&f * &(&g + &h), &(&f * &g) + &(&f * &h));
        }

        #[test]
        fn truncation_coherence(f in arb_two_loop(5), g in arb_two_loop(5), m in 0usize..=5) {
            prop_assert_eq!((&f * &g).truncated(m), &f.truncated(m) * &g.truncated(m));
        }

        #[test]
        fn log_inverts_exp(f in arb_two_loop(4)) {
            let f = &f - &f.degree_part(0);
            prop_assert_eq!(f.exponential().unwrap().logarithm().unwrap(), f);
        }

        #[test]
        fn inverse_is_two_sided(f in arb_two_loop(4)) {
            let one = TruncSeries::identity(f.quiver().clone(), 4);
            let u = &(&f - &f.degree_part(0)) + &one;
            let inv = u.mult_inverse().unwrap();
            prop_assert_eq!(&u * &inv, one.clone());
            prop_assert_eq!(&inv * &u, one);
        }

        #[test]
        fn abelianize_is_multiplicative(f in arb_two_loop(4), g in arb_two_loop(4)) {
            let fg = (&f * &g).abelianize();
            let prod = f.abelianize()[0].mul(&g.abelianize()[0]);
            prop_assert_eq!(&fg[0], &prod);
        }

        #[test]
        fn growth_of_products_is_submultiplicative(f in arb_two_loop(4), g in arb_two_loop(4)) {
            let sf = f.growth_report().exact_sums.unwrap();
            let sg = g.growth_report().exact_sums.unwrap();
            let sfg = (&f * &g).growth_report().exact_sums.unwrap();
            for n in 0..=4 {
                let mut bound = <Q as Zero>::zero();
                for p in 0..=n {
                    bound += sf[p].clone() * sg[n - p].clone();
                }
                prop_assert!(sfg[n] <= bound);
            }
        }
    }
}
