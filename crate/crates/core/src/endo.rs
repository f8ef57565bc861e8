//! Endomorphisms of the truncated path algebra: substitution, composition and inversion.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::invert_dense;
use crate::potential::CyclicPotential;
use crate::quiver::Quiver;
use crate::scalar::Scalar;
use crate::series::{same_quiver, Path, SeriesJson, TruncSeries};

/// Arrow-indexed images `a ↦ H(a)` with `H(a)` parallel to `a` and of order `≥ 1`.
#[derive(Clone, PartialEq)]
pub struct Endomorphism<K> {
    quiver: Arc<Quiver>,
    trunc: usize,
    images: Vec<TruncSeries<K>>,
}

impl<K: Scalar> std::fmt::Debug for Endomorphism<K> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (a, img) in self.images.iter().enumerate() {
            m.entry(&self.quiver.arrow(a).id, img);
        }
        m.finish()
    }
}

/// `{"trunc": N, "images": {"a": <series>, ...}}`; arrows not listed map to themselves.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct EndoJson {
    pub trunc: usize,
    pub images: BTreeMap<String, SeriesJson>,
}

impl<K: Scalar> Endomorphism<K> {
    pub fn new(quiver: Arc<Quiver>, trunc: usize, images: Vec<TruncSeries<K>>) -> Result<Self> {
        if images.len() != quiver.arrow_count() {
            return Err(Error::Input(format!(
                "{} images for {} arrows",
                images.len(),
                quiver.arrow_count()
            )));
        }
        for (a, img) in images.iter().enumerate() {
            let ar = quiver.arrow(a);
            if !same_quiver(img.quiver(), &quiver) || img.trunc() != trunc {
                return Err(Error::Mismatch(format!(
                    "image of {:?} has a different quiver or truncation",
                    ar.id
                )));
            }
            if img.ord() == 0 {
                return Err(Error::Input(format!(
                    "image of {:?} has a constant term; endomorphisms must preserve m",
                    ar.id
                )));
            }
            if let Some(p) = img.terms().keys().find(|p| p.src() != ar.src || p.tgt() != ar.tgt) {
                return Err(Error::Input(format!(
                    "image of {:?} contains the path {} with wrong endpoints",
                    ar.id,
                    p.display(&quiver)
                )));
            }
        }
        Ok(Endomorphism {
            quiver,
            trunc,
            images,
        })
    }

    pub fn identity(quiver: Arc<Quiver>, trunc: usize) -> Self {
        let images = (0..quiver.arrow_count())
            .map(|a| TruncSeries::arrow(quiver.clone(), trunc, a))
            .collect();
        Endomorphism {
            quiver,
            trunc,
            images,
        }
    }

    /// Identity except for the listed arrows.
    pub fn from_map(
        quiver: Arc<Quiver>,
        trunc: usize,
        overrides: Vec<(usize, TruncSeries<K>)>,
    ) -> Result<Self> {
        let mut images: Vec<TruncSeries<K>> = (0..quiver.arrow_count())
            .map(|a| TruncSeries::arrow(quiver.clone(), trunc, a))
            .collect();
        for (a, s) in overrides {
            if a >= images.len() {
                return Err(Error::Input(format!("arrow index {a} out of range")));
            }
            images[a] = s;
        }
        Self::new(quiver, trunc, images)
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn images(&self) -> &[TruncSeries<K>] {
        &self.images
    }

    pub fn image(&self, a: usize) -> &TruncSeries<K> {
        &self.images[a]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.quiver.clone(), self.trunc)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.images
            .iter()
            .zip(&other.images)
            .map(|(x, y)| x.max_abs_diff(y))
            .fold(0.0, f64::max)
    }

    fn check_series(&self, f: &TruncSeries<K>) -> Result<()> {
        if !same_quiver(f.quiver(), &self.quiver) || f.trunc() != self.trunc {
            return Err(Error::Mismatch(
                "series and endomorphism differ in quiver or truncation".into(),
            ));
        }
        Ok(())
    }

    /// Substitutes `H(a)` for every arrow of every word of `f`.
    pub fn apply(&self, f: &TruncSeries<K>) -> Result<TruncSeries<K>> {
        self.check_series(f)?;
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &TruncSeries<K>) -> TruncSeries<K> {
        let items: Vec<(&[usize], usize, K)> = f
            .terms()
            .iter()
            .map(|(p, c)| (p.arrows(), p.src(), c.clone()))
            .collect();
        self.horner(&items, self.trunc)
    }

    /// Horner evaluation over the trie of words: `H(a·w) = H(a)·H(w)`, with the degree
    /// budget shrinking by one per letter since every image has order `≥ 1`.
    fn horner(&self, items: &[(&[usize], usize, K)], budget: usize) -> TruncSeries<K> {
        let mut out = TruncSeries::zero(self.quiver.clone(), self.trunc);
        let mut groups: BTreeMap<usize, Vec<(&[usize], usize, K)>> = BTreeMap::new();
        for (w, src, c) in items {
            if w.is_empty() {
                out.add_term(Path::idempotent(*src), c.clone());
            } else if w.len() <= budget {
                let a = w[0];
                groups
                    .entry(a)
                    .or_default()
                    .push((&w[1..], self.quiver.arrow(a).tgt, c.clone()));
            }
        }
        for (a, sub) in groups {
            let rest = self.horner(&sub, budget - 1);
            let prod = self.images[a].mul_bounded(&rest, budget);
            for (p, c) in prod.into_terms() {
                out.add_term(p, c);
            }
        }
        out
    }

    /// Pushes a potential through a representative and re-canonicalizes.
    pub fn apply_potential(&self, phi: &CyclicPotential<K>) -> Result<CyclicPotential<K>> {
        self.apply(&phi.representative())
            .map(|s| CyclicPotential::cyclic_class(&s))
    }

    /// `(self ∘ other)(a) = self(other(a))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if !same_quiver(&self.quiver, &other.quiver) || self.trunc != other.trunc {
            return Err(Error::Mismatch(
                "endomorphisms differ in quiver or truncation".into(),
            ));
        }
        let images = other
            .images
            .par_iter()
            .map(|img| self.apply_unchecked(img))
            .collect();
        Ok(Endomorphism {
            quiver: self.quiver.clone(),
            trunc: self.trunc,
            images,
        })
    }

    /// Images truncated to degree `r` (the truncation degree itself is kept).
    pub fn jet(&self, r: usize) -> Result<Self> {
        if r > self.trunc {
            return Err(Error::Input(format!(
                "jet order {r} exceeds truncation {}",
                self.trunc
            )));
        }
        Ok(Endomorphism {
            quiver: self.quiver.clone(),
            trunc: self.trunc,
            images: self.images.iter().map(|s| s.jet(r)).collect(),
        })
    }

    /// Re-truncates every image to degree `m ≤ trunc`.
    pub fn truncated(&self, m: usize) -> Self {
        Endomorphism {
            quiver: self.quiver.clone(),
            trunc: m.min(self.trunc),
            images: self.images.iter().map(|s| s.truncated(m)).collect(),
        }
    }

    /// `Σ_k c_k H_k` imagewise (not an algebra operation; used by integrators).
    pub fn linear_combination(terms: &[(K, &Self)]) -> Self {
        let first = terms[0].1;
        let mut images: Vec<TruncSeries<K>> = (0..first.images.len())
            .map(|_| TruncSeries::zero(first.quiver.clone(), first.trunc))
            .collect();
        for (c, h) in terms {
            for (img, src) in images.iter_mut().zip(&h.images) {
                img.add_assign_scaled(src, c);
            }
        }
        Endomorphism {
            quiver: first.quiver.clone(),
            trunc: first.trunc,
            images,
        }
    }

    /// Build without validation (images already known to be well-formed).
    pub(crate) fn from_images_unchecked(
        quiver: Arc<Quiver>,
        trunc: usize,
        images: Vec<TruncSeries<K>>,
    ) -> Self {
        Endomorphism {
            quiver,
            trunc,
            images,
        }
    }

    /// Coefficient matrix of the degree-1 part, per `(source, target)` block.
    fn linear_blocks(&self) -> Vec<((usize, usize), Vec<usize>, Vec<Vec<K>>)> {
        let q = &self.quiver;
        let mut blocks = Vec::new();
        for i in 0..q.node_count() {
            for j in 0..q.node_count() {
                let arrows = q.arrows_between(i, j);
                if arrows.is_empty() {
                    continue;
                }
                let m: Vec<Vec<K>> = arrows
                    .iter()
                    .map(|&a| {
                        arrows
                            .iter()
                            .map(|&b| self.images[a].coeff(&Path::arrow(q, b)))
                            .collect()
                    })
                    .collect();
                blocks.push(((i, j), arrows, m));
            }
        }
        blocks
    }

    /// Order-by-order inverse: solves `Σ_b M[a][b]·g(b) = a − g(R(a))` for the higher part `R`.
    pub fn invert(&self) -> Result<Self> {
        let q = self.quiver.clone();
        let n = self.trunc;
        let mut minv_rows: Vec<Vec<(usize, K)>> = vec![Vec::new(); q.arrow_count()];
        for ((i, j), arrows, m) in self.linear_blocks() {
            let inv = invert_dense(&m).ok_or_else(|| {
                Error::Infeasible(format!(
                    "singular linear part on the block {} → {}",
                    q.node_id(i),
                    q.node_id(j)
                ))
            })?;
            for (r, &b) in arrows.iter().enumerate() {
                for (c, &a) in arrows.iter().enumerate() {
                    if !inv[r][c].is_zero() {
                        minv_rows[b].push((a, inv[r][c].clone()));
                    }
                }
            }
        }
        let higher: Vec<TruncSeries<K>> = self
            .images
            .iter()
            .map(|s| s.try_sub(&s.degree_part(1)).expect("same shape"))
            .collect();
        let solve = |rhs: &[TruncSeries<K>]| -> Vec<TruncSeries<K>> {
            (0..q.arrow_count())
                .map(|b| {
                    let mut s = TruncSeries::zero(q.clone(), n);
                    for (a, c) in &minv_rows[b] {
                        s.add_assign_scaled(&rhs[*a], c);
                    }
                    s
                })
                .collect()
        };
        let arrows: Vec<TruncSeries<K>> = (0..q.arrow_count())
            .map(|a| TruncSeries::arrow(q.clone(), n, a))
            .collect();
        let mut g = Endomorphism::from_images_unchecked(q.clone(), n, solve(&arrows));
        for _ in 1..n {
            let rhs: Vec<TruncSeries<K>> = arrows
                .par_iter()
                .zip(&higher)
                .map(|(a, r)| a - &g.apply_unchecked(r))
                .collect();
            g = Endomorphism::from_images_unchecked(q.clone(), n, solve(&rhs));
        }
        Ok(g)
    }

    /// Inverse of `h(z) = z − M(z)` by the plane-binary-tree expansion
    /// `h⁻¹(z) = z + Σ_{T} N_T(z) / T̂!` over full binary trees with at most `N − 1` leaves,
    /// where `N_∘ = M` and `N_{B₊(L,R)} = (N_L δ_z)(N_R)`.
    pub fn invert_by_trees(&self) -> Result<Self> {
        let q = self.quiver.clone();
        let n = self.trunc;
        let m_family: Vec<TruncSeries<K>> = (0..q.arrow_count())
            .map(|a| &TruncSeries::arrow(q.clone(), n, a) - &self.images[a])
            .collect();
        if let Some(a) = m_family.iter().position(|s| s.ord() < 2) {
            return Err(Error::Infeasible(format!(
                "linear part is not the identity at arrow {:?}",
                q.arrow(a).id
            )));
        }
        let max_leaves = n.saturating_sub(1);
        let table = TreeTable::new(max_leaves);
        let mut values: Vec<Option<Vec<TruncSeries<K>>>> = vec![None; table.len()];
        for level in 1..=max_leaves {
            let ids = table.ids_with_leaves(level);
            let computed: Vec<(usize, Vec<TruncSeries<K>>)> = ids
                .par_iter()
                .map(|&id| {
                    let v = match table.children(id) {
                        None => m_family.clone(),
                        Some((l, r)) => {
                            let left = values[l].as_ref().expect("lower level computed");
                            let right = values[r].as_ref().expect("lower level computed");
                            right
                                .iter()
                                .map(|s| apply_derivation(left, s))
                                .collect()
                        }
                    };
                    (id, v)
                })
                .collect();
            for (id, v) in computed {
                values[id] = Some(v);
            }
        }
        let mut images: Vec<TruncSeries<K>> = (0..q.arrow_count())
            .map(|a| TruncSeries::arrow(q.clone(), n, a))
            .collect();
        for (id, v) in values.iter().enumerate() {
            let Some(v) = v else { continue };
            let weight = K::from_rational(&BigRational::new(
                BigInt::from(1),
                table.hat_factorial(id).clone(),
            ));
            for (img, s) in images.iter_mut().zip(v) {
                img.add_assign_scaled(s, &weight);
            }
        }
        Ok(Endomorphism::from_images_unchecked(q, n, images))
    }

    pub fn to_json(&self) -> EndoJson {
        EndoJson {
            trunc: self.trunc,
            images: self
                .images
                .iter()
                .enumerate()
                .map(|(a, s)| (self.quiver.arrow(a).id.clone(), s.to_json()))
                .collect(),
        }
    }

    pub fn from_json(quiver: Arc<Quiver>, j: &EndoJson) -> Result<Self> {
        let mut overrides = Vec::new();
        for (id, sj) in &j.images {
            let a = quiver
                .arrow_by_id(id)
                .map_err(|e| Error::Input(format!("images: {e}")))?;
            if sj.trunc != j.trunc {
                return Err(Error::Input(format!(
                    "images.{id}: truncation {} differs from {}",
                    sj.trunc, j.trunc
                )));
            }
            let s = TruncSeries::from_json(quiver.clone(), sj)
                .map_err(|e| Error::Input(format!("images.{id}: {e}")))?;
            overrides.push((a, s));
        }
        Self::from_map(quiver, j.trunc, overrides)
    }
}

/// Applies the derivation `z_a ↦ f[a]` to `s` (Leibniz over every letter).
pub fn apply_derivation<K: Scalar>(f: &[TruncSeries<K>], s: &TruncSeries<K>) -> TruncSeries<K> {
    let q = s.quiver().clone();
    let n = s.trunc();
    let mut out = TruncSeries::zero(q.clone(), n);
    for (p, c) in s.terms() {
        let w = p.arrows();
        for pos in 0..w.len() {
            let room = n + 1 - w.len();
            for (fp, fc) in f[w[pos]].terms() {
                if fp.len() > room {
                    break;
                }
                let mut arrows = Vec::with_capacity(w.len() - 1 + fp.len());
                arrows.extend_from_slice(&w[..pos]);
                arrows.extend_from_slice(fp.arrows());
                arrows.extend_from_slice(&w[pos + 1..]);
                let path = if arrows.is_empty() {
                    Path::idempotent(p.src())
                } else {
                    Path::raw(p.src(), p.tgt(), arrows)
                };
                out.add_term(path, c.clone() * fc.clone());
            }
        }
    }
    out
}

/// Rooted plane binary tree: empty, a leaf, or a node with ordered children.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PlaneBinaryTree {
    Empty,
    Leaf,
    Node(Box<PlaneBinaryTree>, Box<PlaneBinaryTree>),
}

impl PlaneBinaryTree {
    pub fn node(l: PlaneBinaryTree, r: PlaneBinaryTree) -> Self {
        PlaneBinaryTree::Node(Box::new(l), Box::new(r))
    }

    pub fn leaves(&self) -> usize {
        match self {
            PlaneBinaryTree::Empty => 0,
            PlaneBinaryTree::Leaf => 1,
            PlaneBinaryTree::Node(l, r) => l.leaves() + r.leaves(),
        }
    }

    /// Number of vertices `|T|`.
    pub fn size(&self) -> usize {
        match self {
            PlaneBinaryTree::Empty => 0,
            PlaneBinaryTree::Leaf => 1,
            PlaneBinaryTree::Node(l, r) => 1 + l.size() + r.size(),
        }
    }

    /// `T! = |T|·T_L!·T_R!`, with `∅! = ∘! = 1`.
    pub fn factorial(&self) -> BigInt {
        match self {
            PlaneBinaryTree::Empty | PlaneBinaryTree::Leaf => BigInt::from(1),
            PlaneBinaryTree::Node(l, r) => BigInt::from(self.size()) * l.factorial() * r.factorial(),
        }
    }

    /// `T̂`: the tree with its leaves deleted.
    pub fn hat(&self) -> PlaneBinaryTree {
        match self {
            PlaneBinaryTree::Empty | PlaneBinaryTree::Leaf => PlaneBinaryTree::Empty,
            PlaneBinaryTree::Node(l, r) => PlaneBinaryTree::node(l.hat(), r.hat()),
        }
    }

    /// All full binary trees with exactly `m ≥ 1` leaves.
    pub fn enumerate(m: usize) -> Vec<PlaneBinaryTree> {
        if m == 0 {
            return Vec::new();
        }
        if m == 1 {
            return vec![PlaneBinaryTree::Leaf];
        }
        let mut out = Vec::new();
        for i in 1..m {
            let ls = Self::enumerate(i);
            let rs = Self::enumerate(m - i);
            for l in &ls {
                for r in &rs {
                    out.push(PlaneBinaryTree::node(l.clone(), r.clone()));
                }
            }
        }
        out
    }
}

/// Full binary trees up to a leaf bound, indexed so that children precede parents.
struct TreeTable {
    children: Vec<Option<(usize, usize)>>,
    leaves: Vec<usize>,
    hat_size: Vec<usize>,
    hat_fact: Vec<BigInt>,
    by_leaves: Vec<Vec<usize>>,
}

impl TreeTable {
    fn new(max_leaves: usize) -> Self {
        let mut t = TreeTable {
            children: Vec::new(),
            leaves: Vec::new(),
            hat_size: Vec::new(),
            hat_fact: Vec::new(),
            by_leaves: vec![Vec::new(); max_leaves + 1],
        };
        if max_leaves == 0 {
            return t;
        }
        t.children.push(None);
        t.leaves.push(1);
        t.hat_size.push(0);
        t.hat_fact.push(BigInt::from(1));
        t.by_leaves[1].push(0);
        for m in 2..=max_leaves {
            for i in 1..m {
                let (ls, rs) = (t.by_leaves[i].clone(), t.by_leaves[m - i].clone());
                for &l in &ls {
                    for &r in &rs {
                        let size = 1 + t.hat_size[l] + t.hat_size[r];
                        let fact = BigInt::from(size) * &t.hat_fact[l] * &t.hat_fact[r];
                        let id = t.children.len();
                        t.children.push(Some((l, r)));
                        t.leaves.push(m);
                        t.hat_size.push(size);
                        t.hat_fact.push(fact);
                        t.by_leaves[m].push(id);
                    }
                }
            }
        }
        t
    }

    fn len(&self) -> usize {
        self.children.len()
    }

    fn children(&self, id: usize) -> Option<(usize, usize)> {
        self.children[id]
    }

    fn ids_with_leaves(&self, m: usize) -> Vec<usize> {
        self.by_leaves[m].clone()
    }

    fn hat_factorial(&self, id: usize) -> &BigInt {
        &self.hat_fact[id]
    }
}
