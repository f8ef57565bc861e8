//! Premutation, splitting off the trivial part, mutation and nondegeneracy probes.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::endo::Endomorphism;
use crate::error::{Error, Result};
use crate::potential::CyclicPotential;
use crate::quiver::{Arrow, Quiver, QuiverJson};
use crate::scalar::Scalar;
use crate::series::{Path, SeriesJson, TruncSeries};

/// A quiver together with a potential on it.
#[derive(Clone, PartialEq)]
pub struct QPPair<K> {
    pub potential: CyclicPotential<K>,
}

impl<K: Scalar> std::fmt::Debug for QPPair<K> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QPPair")
            .field("arrows", &self.quiver().arrows())
            .field("potential", &self.potential.display())
            .finish()
    }
}

/// `{"quiver": <quiver>, "potential": <cyclic series>}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct QPPairJson {
    pub quiver: QuiverJson,
    pub potential: SeriesJson,
}

impl<K: Scalar> QPPair<K> {
    pub fn new(potential: CyclicPotential<K>) -> Self {
        QPPair { potential }
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        self.potential.quiver()
    }

    pub fn trunc(&self) -> usize {
        self.potential.trunc()
    }

    pub fn to_json(&self) -> QPPairJson {
        QPPairJson {
            quiver: self.quiver().to_json(),
            potential: self.potential.to_json(),
        }
    }

    pub fn from_json(j: &QPPairJson) -> Result<Self> {
        let q = Arc::new(Quiver::from_json(&j.quiver)?);
        Ok(QPPair::new(CyclicPotential::from_json(q, &j.potential)?))
    }
}

/// How a cyclic word is split between `y·f` and `g·z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitRule {
    /// The word's coefficient is shared equally among all its occurrences of `y` and `z`.
    #[default]
    Averaged,
    /// The word is rotated to its earliest occurrence of `y` (else of `z`) in canonical form.
    Earliest,
}

/// Output of [`split_trivial`].
#[derive(Clone, Debug)]
pub struct SplittingReport<K: Scalar> {
    /// Removed pairs `(y, z)` as arrow indices of the input quiver.
    pub pairs: Vec<(usize, usize)>,
    /// Automorphism of the input quiver with `reducer(Φ) = Σ y_i z_i + reduced`.
    pub reducer: Endomorphism<K>,
    /// The reduced part on the quiver without the removed arrows.
    pub reduced: QPPair<K>,
    /// Arrows of the reduced quiver, as indices of the input quiver.
    pub kept_arrows: Vec<usize>,
    /// Degree-2 terms that could not be paired (e.g. squares of loops).
    pub unsplit: Vec<String>,
}

/// Output of [`mutate`].
#[derive(Clone, Debug)]
pub struct MutationResult<K: Scalar> {
    pub premutated: QPPair<K>,
    pub splitting: SplittingReport<K>,
    pub result: QPPair<K>,
    /// True when the reduced part still has a 2-cycle (degenerate potential).
    pub two_cycles_remain: bool,
}

/// Name of the composite of `β` (into `k`) followed by `α` (out of `k`).
pub fn composite_name(beta: &str, alpha: &str) -> String {
    format!("[{beta}|{alpha}]")
}

/// Arrow surgery at `k` plus the `Δ` term; each passage `β·α` through `k` becomes `[β|α]`.
pub fn premutate<K: Scalar>(qp: &QPPair<K>, k: usize) -> Result<QPPair<K>> {
    let q = qp.quiver();
    if k >= q.node_count() {
        return Err(Error::Input(format!("node index {k} out of range")));
    }
    let kid = q.node_id(k).to_string();
    if q.arrows().iter().any(|a| a.src == k && a.tgt == k) {
        return Err(Error::Input(format!("node {kid} carries a loop")));
    }
    if let Some(a) = q
        .arrows()
        .iter()
        .find(|a| a.tgt == k && q.arrows().iter().any(|b| b.src == k && b.tgt == a.src))
    {
        return Err(Error::Input(format!(
            "node {kid} lies on a 2-cycle through {}",
            q.node_id(a.src)
        )));
    }
    let ins: Vec<usize> = (0..q.arrow_count()).filter(|&a| q.arrow(a).tgt == k).collect();
    let outs: Vec<usize> = (0..q.arrow_count()).filter(|&a| q.arrow(a).src == k).collect();
    let mut arrows: Vec<Arrow> = Vec::new();
    let mut old_to_new: Vec<usize> = vec![usize::MAX; q.arrow_count()];
    for (a, ar) in q.arrows().iter().enumerate() {
        if ar.src != k && ar.tgt != k {
            old_to_new[a] = arrows.len();
            arrows.push(ar.clone());
        }
    }
    let mut star = vec![usize::MAX; q.arrow_count()];
    for (a, ar) in q.arrows().iter().enumerate() {
        if ar.src == k || ar.tgt == k {
            star[a] = arrows.len();
            arrows.push(Arrow {
                id: format!("{}*", ar.id),
                src: ar.tgt,
                tgt: ar.src,
            });
        }
    }
    let mut composite: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &b in &ins {
        for &a in &outs {
            composite.insert((b, a), arrows.len());
            arrows.push(Arrow {
                id: composite_name(&q.arrow(b).id, &q.arrow(a).id),
                src: q.arrow(b).src,
                tgt: q.arrow(a).tgt,
            });
        }
    }
    let nq = Arc::new(Quiver::from_indexed(q.nodes().to_vec(), arrows)?);
    let n = qp.trunc();
    let mut phi = CyclicPotential::zero(nq.clone(), n);
    for (p, c) in qp.potential.terms() {
        if p.is_empty() {
            phi.add_cycle(&Path::idempotent(p.src()), c.clone());
            continue;
        }
        let w = p.arrows();
        let len = w.len();
        let start = (0..len)
            .find(|&i| q.arrow(w[i]).src != k)
            .expect("a cycle without loops at k leaves k");
        let mut out = Vec::with_capacity(len);
        let mut i = 0;
        while i < len {
            let a = w[(start + i) % len];
            if q.arrow(a).tgt == k {
                let next = w[(start + i + 1) % len];
                out.push(composite[&(a, next)]);
                i += 2;
            } else {
                out.push(old_to_new[a]);
                i += 1;
            }
        }
        let s = nq.arrow(out[0]).src;
        phi.add_cycle(&Path::raw(s, s, out), c.clone());
    }
    for (&(b, a), &e) in &composite {
        let s = nq.arrow(e).src;
        phi.add_cycle(&Path::raw(s, s, vec![e, star[a], star[b]]), K::one());
    }
    Ok(QPPair::new(phi))
}

/// Degree-2 coefficient of the cyclic word `[a·b]`.
fn quadratic_coeff<K: Scalar>(phi: &CyclicPotential<K>, a: usize, b: usize) -> K {
    let q = phi.quiver();
    let (x, y) = (q.arrow(a), q.arrow(b));
    if x.tgt != y.src || y.tgt != x.src {
        return K::zero();
    }
    phi.coeff(&Path::raw(x.src, x.src, vec![a, b]))
}

/// Linear changes of variables making the degree-2 part `Σ y_i z_i` plus terms free of
/// every paired arrow; returns `(pairs, total linear map, unsplit notes)`.
fn normalize_quadratic<K: Scalar>(
    phi: &CyclicPotential<K>,
) -> Result<(Vec<(usize, usize)>, Endomorphism<K>, Vec<String>)> {
    let q = phi.quiver().clone();
    let n = phi.trunc();
    let mut total = Endomorphism::identity(q.clone(), n);
    let mut current = phi.jet(2);
    let mut used = vec![false; q.arrow_count()];
    let mut pairs = Vec::new();
    let mut unsplit = Vec::new();
    let mut flagged = vec![false; q.arrow_count()];
    for y in 0..q.arrow_count() {
        if used[y] {
            continue;
        }
        let (i, j) = (q.arrow(y).src, q.arrow(y).tgt);
        let partners: Vec<usize> = q
            .arrows_between(j, i)
            .into_iter()
            .filter(|&b| !used[b] && b != y)
            .collect();
        let Some(z) = partners
            .iter()
            .copied()
            .find(|&z| !quadratic_coeff(&current, y, z).is_zero())
        else {
            continue;
        };
        if i == j && (!quadratic_coeff(&current, y, y).is_zero() || !quadratic_coeff(&current, z, z).is_zero()) {
            unsplit.push(format!(
                "loops {:?}, {:?} carry squared terms and are left unsplit",
                q.arrow(y).id,
                q.arrow(z).id
            ));
            flagged[y] = true;
            flagged[z] = true;
            continue;
        }
        let cyz = quadratic_coeff(&current, y, z);
        // z ↦ (z − Σ_{b≠z} C_yb b) / C_yz makes the y-terms exactly y·z.
        let mut img_z = TruncSeries::arrow(q.clone(), n, z);
        for b in q.arrows_between(j, i) {
            if b != z && !used[b] {
                let c = quadratic_coeff(&current, y, b);
                if !c.is_zero() {
                    img_z.add_term(Path::arrow(&q, b), -c);
                }
            }
        }
        let img_z = img_z.scale(&(K::one() / cyz));
        let g1 = Endomorphism::from_map(q.clone(), n, vec![(z, img_z)])?;
        current = g1.apply_potential(&current)?.jet(2);
        // y ↦ y − Σ_{a≠y} C_az a removes the remaining z-terms.
        let mut img_y = TruncSeries::arrow(q.clone(), n, y);
        for a in q.arrows_between(i, j) {
            if a != y && !used[a] {
                let c = quadratic_coeff(&current, a, z);
                if !c.is_zero() {
                    img_y.add_term(Path::arrow(&q, a), -c);
                }
            }
        }
        let g2 = Endomorphism::from_map(q.clone(), n, vec![(y, img_y)])?;
        current = g2.apply_potential(&current)?.jet(2);
        total = g2.compose(&g1)?.compose(&total)?;
        used[y] = true;
        used[z] = true;
        pairs.push((y, z));
    }
    for p in current.degree_part(2).terms().keys() {
        let w = p.arrows();
        if w.iter().all(|&a| !used[a] && !flagged[a]) {
            unsplit.push(format!("degree-2 term {} has no partner and is left unsplit", p.display(&q)));
        }
    }
    Ok((pairs, total, unsplit))
}

/// `rest` after deleting position `pos` of the cyclic word `w`, read from `pos + 1`.
fn cyclic_rest(w: &[usize], pos: usize) -> Vec<usize> {
    let n = w.len();
    (1..n).map(|k| w[(pos + k) % n]).collect()
}

/// Removes all `y`, `z` terms above degree 2 from `Φ = yz − F` by the additive iteration
/// `H(y) += [d]g`, `H(z) += [d]f` where `F = y·f + g·z + u`.
fn separate_pair<K: Scalar>(
    phi: &CyclicPotential<K>,
    y: usize,
    z: usize,
    rule: SplitRule,
) -> Result<Endomorphism<K>> {
    let q = phi.quiver().clone();
    let n = phi.trunc();
    let (ya, za) = (q.arrow(y).clone(), q.arrow(z).clone());
    let mut h = Endomorphism::identity(q.clone(), n);
    for d in 2..n {
        let m = d + 1;
        let part = h.truncated(m).apply_potential(&phi.with_trunc(m))?.degree_part(m);
        let mut f = TruncSeries::zero(q.clone(), n);
        let mut g = TruncSeries::zero(q.clone(), n);
        for (p, c) in part.terms() {
            let w = p.arrows();
            let positions: Vec<usize> = match rule {
                SplitRule::Averaged => (0..w.len()).filter(|&i| w[i] == y || w[i] == z).collect(),
                SplitRule::Earliest => w
                    .iter()
                    .position(|&a| a == y)
                    .or_else(|| w.iter().position(|&a| a == z))
                    .into_iter()
                    .collect(),
            };
            if positions.is_empty() {
                continue;
            }
            // Φ's degree-m part is −F_m, so f and g collect −c.
            let share = -(c.clone() / K::from_i64(positions.len() as i64));
            for pos in positions {
                let rest = cyclic_rest(w, pos);
                if w[pos] == y {
                    f.add_term(Path::raw(ya.tgt, ya.src, rest), share.clone());
                } else {
                    g.add_term(Path::raw(za.tgt, za.src, rest), share.clone());
                }
            }
        }
        if f.is_zero() && g.is_zero() {
            continue;
        }
        let mut images = h.images().to_vec();
        images[y] = &images[y] + &g;
        images[z] = &images[z] + &f;
        h = Endomorphism::new(q.clone(), n, images)?;
    }
    Ok(h)
}

/// Splits `Φ` into `Σ y_i z_i` plus a reduced part: linear normalization of the
/// degree-2 pairing, then the separation iteration pair by pair.
pub fn split_trivial<K: Scalar>(qp: &QPPair<K>, rule: SplitRule) -> Result<SplittingReport<K>> {
    let q = qp.quiver().clone();
    let n = qp.trunc();
    let (pairs, linear, unsplit) = normalize_quadratic(&qp.potential)?;
    let mut total = linear;
    let mut current = total.apply_potential(&qp.potential)?;
    for &(y, z) in &pairs {
        let h = separate_pair(&current, y, z, rule)?;
        current = h.apply_potential(&current)?;
        total = h.compose(&total)?;
    }
    let mut trivial = CyclicPotential::zero(q.clone(), n);
    for &(y, z) in &pairs {
        let s = q.arrow(y).src;
        trivial.add_cycle(&Path::raw(s, s, vec![y, z]), K::one());
    }
    let rest = current.try_sub(&trivial)?;
    let removed: Vec<usize> = pairs.iter().flat_map(|&(y, z)| [y, z]).collect();
    if let Some(&a) = removed.iter().find(|&&a| rest.contains_arrow(a)) {
        return Err(Error::Infeasible(format!(
            "arrow {:?} survives reduction; the degree-2 pairing is degenerate",
            q.arrow(a).id
        )));
    }
    let (reduced, kept_arrows) = delete_arrows(&rest, &removed)?;
    Ok(SplittingReport {
        pairs,
        reducer: total,
        reduced: QPPair::new(reduced),
        kept_arrows,
        unsplit,
    })
}

/// Restricts a potential free of `removed` to the quiver without those arrows.
pub fn delete_arrows<K: Scalar>(
    phi: &CyclicPotential<K>,
    removed: &[usize],
) -> Result<(CyclicPotential<K>, Vec<usize>)> {
    let q = phi.quiver();
    let kept: Vec<usize> = (0..q.arrow_count()).filter(|a| !removed.contains(a)).collect();
    let mut map = vec![usize::MAX; q.arrow_count()];
    for (new, &old) in kept.iter().enumerate() {
        map[old] = new;
    }
    let nq = Arc::new(Quiver::from_indexed(
        q.nodes().to_vec(),
        kept.iter().map(|&a| q.arrow(a).clone()).collect(),
    )?);
    let mut out = CyclicPotential::zero(nq, phi.trunc());
    for (p, c) in phi.terms() {
        if p.arrows().iter().any(|a| removed.contains(a)) {
            return Err(Error::Input(format!(
                "term {} uses a deleted arrow",
                p.display(q)
            )));
        }
        let w: Vec<usize> = p.arrows().iter().map(|&a| map[a]).collect();
        let path = if w.is_empty() {
            Path::idempotent(p.src())
        } else {
            Path::raw(p.src(), p.src(), w)
        };
        out.add_cycle(&path, c.clone());
    }
    Ok((out, kept))
}

/// `μ_k`: the reduced part of the premutation at `k`.
pub fn mutate<K: Scalar>(qp: &QPPair<K>, k: usize, rule: SplitRule) -> Result<MutationResult<K>> {
    let premutated = premutate(qp, k)?;
    let splitting = split_trivial(&premutated, rule)?;
    let result = splitting.reduced.clone();
    let (_, two) = result.quiver().has_loops_or_two_cycles();
    Ok(MutationResult {
        premutated,
        splitting,
        result,
        two_cycles_remain: two,
    })
}

/// A mutation sequence (node ids) whose reduced part kept a 2-cycle or could not continue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegenerateSequence {
    pub sequence: Vec<String>,
    pub reason: String,
}

/// Result of [`nondegeneracy_probe`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbeReport {
    pub depth: usize,
    pub sequences_explored: usize,
    pub degenerate: Vec<DegenerateSequence>,
    /// Set when some visited potential was zero, where "no 2-cycles" says nothing about
    /// nondegeneracy of a generic potential.
    pub zero_potential_seen: bool,
}

/// Breadth-first search over mutation sequences of length `≤ depth`, skipping immediate
/// back-mutation, recording every sequence whose reduced part retains a 2-cycle.
pub fn nondegeneracy_probe<K: Scalar>(qp: &QPPair<K>, depth: usize, rule: SplitRule) -> ProbeReport {
    let mut frontier: Vec<(Vec<usize>, QPPair<K>)> = vec![(Vec::new(), qp.clone())];
    let mut explored = 0;
    let mut degenerate = Vec::new();
    let mut zero_seen = qp.potential.is_zero();
    let ids = |q: &Quiver, s: &[usize]| s.iter().map(|&k| q.node_id(k).to_string()).collect::<Vec<_>>();
    for _ in 0..depth {
        let steps: Vec<(Vec<usize>, std::result::Result<MutationResult<K>, Error>)> = frontier
            .par_iter()
            .flat_map_iter(|(seq, pair)| {
                let nodes = pair.quiver().node_count();
                (0..nodes)
                    .filter(move |&k| seq.last() != Some(&k))
                    .map(move |k| {
                        let mut s = seq.clone();
                        s.push(k);
                        (s, mutate(pair, k, rule))
                    })
            })
            .collect();
        let mut next = Vec::new();
        for (seq, res) in steps {
            explored += 1;
            let q = qp.quiver();
            match res {
                Ok(m) => {
                    zero_seen |= m.result.potential.is_zero();
                    if m.two_cycles_remain {
                        degenerate.push(DegenerateSequence {
                            sequence: ids(q, &seq),
                            reason: "reduced part contains 2-cycles".into(),
                        });
                    } else {
                        next.push((seq, m.result));
                    }
                }
                Err(e) => degenerate.push(DegenerateSequence {
                    sequence: ids(q, &seq),
                    reason: e.to_string(),
                }),
            }
        }
        frontier = next;
    }
    ProbeReport {
        depth,
        sequences_explored: explored,
        degenerate,
        zero_potential_seen: zero_seen,
    }
}

/// Arrow-count matrix `#(i → j)`, the quiver up to relabeling of arrows.
pub fn adjacency(q: &Quiver) -> Vec<Vec<usize>> {
    let n = q.node_count();
    let mut m = vec![vec![0; n]; n];
    for a in q.arrows() {
        m[a.src][a.tgt] += 1;
    }
    m
}
