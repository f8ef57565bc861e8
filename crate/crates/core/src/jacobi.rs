//! Truncated Jacobi ideals: graded quotient dimensions, finiteness certificates,
//! quasi-homogeneity and the tangent-space solve behind finite determinacy.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_sparse, EchelonBasis, SparseRow};
use crate::potential::{canonical_cycle, CyclicPotential};
use crate::quiver::Quiver;
use crate::scalar::Scalar;
use crate::series::{same_quiver, Path, TruncSeries};

/// All paths of length `≤ max`, grouped as `[src][tgt]` and sorted by (length, word).
pub fn paths_up_to(q: &Quiver, max: usize) -> Vec<Vec<Vec<Path>>> {
    let n = q.node_count();
    let mut out = vec![vec![Vec::new(); n]; n];
    let mut frontier: Vec<Path> = (0..n).map(Path::idempotent).collect();
    for p in &frontier {
        out[p.src()][p.tgt()].push(p.clone());
    }
    for _ in 0..max {
        let mut next = Vec::new();
        for p in &frontier {
            for (a, ar) in q.arrows().iter().enumerate() {
                if ar.src == p.tgt() {
                    let mut w = p.arrows().to_vec();
                    w.push(a);
                    next.push(Path::raw(p.src(), ar.tgt, w));
                }
            }
        }
        for p in &next {
            out[p.src()][p.tgt()].push(p.clone());
        }
        frontier = next;
    }
    for row in &mut out {
        for v in row.iter_mut() {
            v.sort();
        }
    }
    out
}

/// Row-reduced ideal component for one `(source, target)` pair of nodes.
#[derive(Clone, Debug)]
struct Block<K> {
    columns: Vec<Path>,
    index: HashMap<Path, usize>,
    basis: EchelonBasis<K>,
}

impl<K: Scalar> Block<K> {
    fn row(&self, f: &BTreeMap<Path, K>) -> SparseRow<K> {
        f.iter()
            .filter_map(|(p, c)| self.index.get(p).map(|&i| (i, c.clone())))
            .collect()
    }
}

/// Smallest certified `r` with `m^r ⊆ J`, the resulting determinacy bound and the
/// total truncated quotient dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FinitenessCertificate {
    pub r: Option<usize>,
    pub bound: Option<usize>,
    pub total_dim: usize,
}

/// Outcome of the quasi-homogeneity test; `exact` is false when the answer only holds
/// modulo terms of degree `> N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuasiHomogeneity {
    pub holds: bool,
    pub exact: bool,
}

/// The image of the Jacobi ideal in `kQ / m^{N+1}`, with graded quotient dimensions.
#[derive(Clone)]
pub struct JacobiTruncation<K> {
    quiver: Arc<Quiver>,
    potential: CyclicPotential<K>,
    trunc: usize,
    derivatives: Vec<TruncSeries<K>>,
    blocks: BTreeMap<(usize, usize), Block<K>>,
    path_counts: Vec<usize>,
    quotient_dims: Vec<usize>,
    warnings: Vec<String>,
}

impl<K: Scalar> JacobiTruncation<K> {
    /// Spans `u·D_aΦ·v` modulo `m^{N+1}` and row-reduces each node-pair block with
    /// columns ordered by degree, so pivot columns give the associated graded ideal.
    ///
    /// Degree-`N` data needs `Φ` to degree `N + 1`; when `phi` is truncated at `N` it is
    /// read as the polynomial it stores.
    pub fn new(phi: &CyclicPotential<K>, trunc: usize) -> Result<Self> {
        if trunc > phi.trunc() {
            return Err(Error::Input(format!(
                "truncation {trunc} exceeds the potential's truncation {}",
                phi.trunc()
            )));
        }
        let q = phi.quiver().clone();
        let source = phi.with_trunc((trunc + 1).min(phi.trunc()));
        let phi = phi.with_trunc(trunc);
        let mut warnings = Vec::new();
        if !phi.is_zero() && phi.ord() < 2 {
            warnings.push(format!(
                "potential has order {} < 2; the Jacobi ideal may contain idempotents",
                phi.ord()
            ));
        }
        let derivatives: Vec<TruncSeries<K>> = (0..q.arrow_count())
            .map(|a| {
                source
                    .cyclic_derivative(a)
                    .map(|d| d.with_trunc(trunc))
                    .unwrap_or_else(|_| TruncSeries::zero(q.clone(), trunc))
            })
            .collect();
        let paths = paths_up_to(&q, trunc);
        let n = q.node_count();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let blocks: BTreeMap<(usize, usize), Block<K>> = pairs
            .par_iter()
            .map(|&(i, j)| ((i, j), build_block(&q, trunc, &paths, &derivatives, i, j)))
            .collect();
        let mut path_counts = vec![0usize; trunc + 1];
        let mut pivot_counts = vec![0usize; trunc + 1];
        for b in blocks.values() {
            for p in &b.columns {
                path_counts[p.len()] += 1;
            }
            for &c in b.basis.pivot_columns() {
                pivot_counts[b.columns[c].len()] += 1;
            }
        }
        let quotient_dims = path_counts
            .iter()
            .zip(&pivot_counts)
            .map(|(p, v)| p - v)
            .collect();
        Ok(JacobiTruncation {
            quiver: q,
            potential: phi,
            trunc,
            derivatives,
            blocks,
            path_counts,
            quotient_dims,
            warnings,
        })
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    pub fn potential(&self) -> &CyclicPotential<K> {
        &self.potential
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Cyclic derivatives `D_aΦ`, lifted to truncation `N`.
    pub fn derivatives(&self) -> &[TruncSeries<K>] {
        &self.derivatives
    }

    /// Number of paths of each degree `0..=N`.
    pub fn path_counts(&self) -> &[usize] {
        &self.path_counts
    }

    /// `dim (kQ/J)_d` of the associated graded algebra for `d = 0..=N`.
    pub fn quotient_dims(&self) -> &[usize] {
        &self.quotient_dims
    }

    pub fn total_quotient_dim(&self) -> usize {
        self.quotient_dims.iter().sum()
    }

    /// Whether every path of length `r` lies in `J + m^{r+1}`; by Nakayama this gives
    /// `m^r ⊆ J` for the closed ideal.
    pub fn certify_m_power(&self, r: usize) -> Result<bool> {
        if r > self.trunc {
            return Err(Error::Input(format!(
                "degree {r} exceeds truncation {}",
                self.trunc
            )));
        }
        Ok(self.quotient_dims[r] == 0)
    }

    pub fn determinacy_bound(&self) -> FinitenessCertificate {
        let r = (1..=self.trunc).find(|&r| self.quotient_dims[r] == 0);
        let total_dim = match r {
            Some(r) => self.quotient_dims[..r].iter().sum(),
            None => self.total_quotient_dim(),
        };
        FinitenessCertificate {
            r,
            bound: r.map(|r| r + 1),
            total_dim,
        }
    }

    /// Normal form modulo `J + m^{N+1}`: a combination of non-pivot (standard) paths.
    pub fn reduce(&self, f: &TruncSeries<K>) -> Result<TruncSeries<K>> {
        if !same_quiver(f.quiver(), &self.quiver) {
            return Err(Error::Mismatch("series lives on a different quiver".into()));
        }
        let mut by_block: BTreeMap<(usize, usize), BTreeMap<Path, K>> = BTreeMap::new();
        for (p, c) in f.terms() {
            if p.len() <= self.trunc {
                by_block
                    .entry((p.src(), p.tgt()))
                    .or_default()
                    .insert(p.clone(), c.clone());
            }
        }
        let mut out = TruncSeries::zero(self.quiver.clone(), self.trunc);
        for (key, terms) in by_block {
            let b = &self.blocks[&key];
            for (c, v) in b.basis.reduce(b.row(&terms)) {
                out.add_term(b.columns[c].clone(), v);
            }
        }
        Ok(out)
    }

    pub fn in_ideal(&self, f: &TruncSeries<K>) -> Result<bool> {
        Ok(self.reduce(f)?.is_zero())
    }

    /// Standard (non-pivot) paths starting at node `i`, in degree order.
    pub fn standard_paths_from(&self, i: usize) -> Vec<Path> {
        let mut out: Vec<Path> = self
            .blocks
            .iter()
            .filter(|((s, _), _)| *s == i)
            .flat_map(|(_, b)| {
                b.columns
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| !b.basis.is_pivot(*c))
                    .map(|(_, p)| p.clone())
            })
            .collect();
        out.sort();
        out
    }

    /// Tests whether `[Φ]` lies in `π(J)`, the cyclic image of the ideal, up to degree `N`.
    /// The answer is exact when `m^r ⊆ J` is certified for some `r ≤ N`, since then every
    /// cyclic word of degree `> N` already lies in `π(J)`.
    pub fn quasi_homogeneous(&self) -> QuasiHomogeneity {
        let q = &self.quiver;
        let paths = paths_up_to(q, self.trunc);
        let mut cols: BTreeMap<Path, usize> = BTreeMap::new();
        let mut rows: Vec<BTreeMap<Path, K>> = Vec::new();
        for (a, d) in self.derivatives.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            let ar = q.arrow(a);
            let room = self.trunc - d.ord().min(self.trunc);
            for w in &paths[ar.src][ar.tgt] {
                if w.is_empty() || w.len() > room {
                    continue;
                }
                let mut row: BTreeMap<Path, K> = BTreeMap::new();
                for (p, c) in d.terms() {
                    if w.len() + p.len() > self.trunc {
                        break;
                    }
                    let wp = canonical_cycle(q, &w.concat(p).expect("closed"));
                    accumulate(&mut row, wp, c.clone());
                }
                rows.push(row);
            }
        }
        let mut keys: Vec<Path> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
        keys.extend(self.potential.terms().keys().cloned());
        keys.sort();
        keys.dedup();
        for (i, k) in keys.into_iter().enumerate() {
            cols.insert(k, i);
        }
        let to_row = |m: &BTreeMap<Path, K>| -> SparseRow<K> {
            m.iter().map(|(p, c)| (cols[p], c.clone())).collect()
        };
        let mut basis = EchelonBasis::<K>::new();
        for r in &rows {
            basis.insert(to_row(r));
        }
        let holds = basis.contains(to_row(self.potential.terms()));
        QuasiHomogeneity {
            holds,
            exact: self.determinacy_bound().r.is_some(),
        }
    }
}

fn accumulate<K: Scalar>(row: &mut BTreeMap<Path, K>, p: Path, c: K) {
    let v = match row.remove(&p) {
        Some(old) => old + c,
        None => c,
    };
    if !v.is_zero() {
        row.insert(p, v);
    }
}

fn build_block<K: Scalar>(
    q: &Quiver,
    trunc: usize,
    paths: &[Vec<Vec<Path>>],
    derivatives: &[TruncSeries<K>],
    i: usize,
    j: usize,
) -> Block<K> {
    let columns = paths[i][j].clone();
    let index: HashMap<Path, usize> = columns.iter().cloned().enumerate().map(|(k, p)| (p, k)).collect();
    let mut basis = EchelonBasis::<K>::new();
    for (a, d) in derivatives.iter().enumerate() {
        if d.is_zero() {
            continue;
        }
        let ar = q.arrow(a);
        let ord = d.ord();
        for u in &paths[i][ar.tgt] {
            if u.len() + ord > trunc {
                break;
            }
            for v in &paths[ar.src][j] {
                if u.len() + ord + v.len() > trunc {
                    break;
                }
                let mut row: SparseRow<K> = SparseRow::new();
                for (p, c) in d.terms() {
                    let len = u.len() + p.len() + v.len();
                    if len > trunc {
                        break;
                    }
                    let mut w = Vec::with_capacity(len);
                    w.extend_from_slice(u.arrows());
                    w.extend_from_slice(p.arrows());
                    w.extend_from_slice(v.arrows());
                    let path = if w.is_empty() {
                        Path::idempotent(i)
                    } else {
                        Path::raw(i, j, w)
                    };
                    let col = index[&path];
                    let nv = match row.remove(&col) {
                        Some(old) => old + c.clone(),
                        None => c.clone(),
                    };
                    if !nv.is_zero() {
                        row.insert(col, nv);
                    }
                }
                basis.insert(row);
            }
        }
    }
    Block {
        columns,
        index,
        basis,
    }
}

/// `Σ_a π(a·D_aΦ)`, which equals `Σ_d d·Φ_d` (the Euler identity).
pub fn euler_sum<K: Scalar>(phi: &CyclicPotential<K>) -> CyclicPotential<K> {
    let q = phi.quiver().clone();
    let n = phi.trunc();
    let mut out = TruncSeries::zero(q.clone(), n);
    for a in 0..q.arrow_count() {
        if let Ok(d) = phi.cyclic_derivative(a) {
            let prod = TruncSeries::arrow(q.clone(), n, a)
                .try_mul(&d.with_trunc(n))
                .expect("same quiver");
            out.add_assign_scaled(&prod, &K::one());
        }
    }
    CyclicPotential::cyclic_class(&out)
}

/// `π(Σ_a ξ(a)·D_aθ)`, the infinitesimal action of a derivation on a potential.
pub fn tangent_action<K: Scalar>(
    theta: &CyclicPotential<K>,
    xi: &[TruncSeries<K>],
) -> Result<CyclicPotential<K>> {
    let q = theta.quiver().clone();
    let n = theta.trunc();
    if xi.len() != q.arrow_count() {
        return Err(Error::Input(format!(
            "{} components for {} arrows",
            xi.len(),
            q.arrow_count()
        )));
    }
    let mut out = TruncSeries::zero(q.clone(), n);
    for (a, x) in xi.iter().enumerate() {
        let d = theta.cyclic_derivative(a)?.with_trunc(n);
        out.add_assign_scaled(&x.with_trunc(n).try_mul(&d)?, &K::one());
    }
    Ok(CyclicPotential::cyclic_class(&out))
}

/// Solves `π(Σ_a ξ(a)·D_aθ) = target` up to degree `N` for `ξ(a) ∈ m`, degree by degree.
/// Free coefficients are set to zero; infeasibility reports the first failing degree.
pub fn tangent_solve<K: Scalar>(
    theta: &CyclicPotential<K>,
    target: &CyclicPotential<K>,
) -> Result<Vec<TruncSeries<K>>> {
    theta.check_compatible(target)?;
    let q = theta.quiver().clone();
    let n = theta.trunc();
    let paths = paths_up_to(&q, n);
    let derivatives: Vec<TruncSeries<K>> = (0..q.arrow_count())
        .map(|a| theta.cyclic_derivative(a).map(|d| d.with_trunc(n)))
        .collect::<Result<_>>()?;
    let mut unknowns: Vec<(usize, Path)> = Vec::new();
    for (a, d) in derivatives.iter().enumerate() {
        if d.is_zero() {
            continue;
        }
        let ar = q.arrow(a);
        for w in &paths[ar.src][ar.tgt] {
            if !w.is_empty() && w.len() + d.ord() <= n {
                unknowns.push((a, w.clone()));
            }
        }
    }
    unknowns.sort_by(|x, y| (x.1.len(), x.0, &x.1).cmp(&(y.1.len(), y.0, &y.1)));
    let mut equations: BTreeMap<Path, SparseRow<K>> = BTreeMap::new();
    for (k, (a, w)) in unknowns.iter().enumerate() {
        for (p, c) in derivatives[*a].terms() {
            if w.len() + p.len() > n {
                break;
            }
            let cyc = canonical_cycle(&q, &w.concat(p).expect("closed"));
            let row = equations.entry(cyc).or_default();
            let nv = match row.remove(&k) {
                Some(old) => old + c.clone(),
                None => c.clone(),
            };
            if !nv.is_zero() {
                row.insert(k, nv);
            }
        }
    }
    for p in target.terms().keys() {
        equations.entry(p.clone()).or_default();
    }
    let keys: Vec<Path> = equations.keys().cloned().collect();
    let system: Vec<(SparseRow<K>, K)> = keys
        .iter()
        .map(|p| (equations[p].clone(), target.coeff(p)))
        .collect();
    let x = solve_sparse(&system, unknowns.len()).map_err(|idx| {
        Error::Infeasible(format!(
            "no solution at truncation {n}: inconsistent in degree {}",
            keys[idx].len()
        ))
    })?;
    let mut xi: Vec<TruncSeries<K>> = (0..q.arrow_count())
        .map(|_| TruncSeries::zero(q.clone(), n))
        .collect();
    for ((a, w), c) in unknowns.into_iter().zip(x) {
        if !c.is_zero() {
            xi[a].add_term(w, c);
        }
    }
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endo::Endomorphism;
    use crate::scalar::{q, qi};
    use num_rational::BigRational as Q;
    use proptest::prelude::*;

    fn loop_pot(coeffs: &[(usize, i64)], n: usize) -> CyclicPotential<Q> {
        let quiver = Quiver::loops(&["t"]);
        let mut phi = CyclicPotential::zero(quiver.clone(), n);
        for &(d, c) in coeffs {
            phi.add_cycle(&Path::raw(0, 0, vec![0; d]), qi(c));
        }
        phi
    }

    #[test]
    fn cubic_one_loop() {
        let jt = JacobiTruncation::new(&loop_pot(&[(3, 1)], 4), 4).unwrap();
        assert_eq!(jt.quotient_dims(), &[1, 1, 0, 0, 0]);
        assert_eq!(jt.total_quotient_dim(), 2);
        assert!(jt.certify_m_power(2).unwrap());
        assert!(!jt.certify_m_power(1).unwrap());
        assert!(jt.certify_m_power(5).is_err());
        assert_eq!(
            jt.determinacy_bound(),
            FinitenessCertificate {
                r: Some(2),
                bound: Some(3),
                total_dim: 2
            }
        );
        assert_eq!(jt.quasi_homogeneous(), QuasiHomogeneity { holds: true, exact: true });
    }

    #[test]
    fn powers_of_one_loop() {
        for n in 1..=6 {
            let jt = JacobiTruncation::new(&loop_pot(&[(n + 1, 1)], 8), 8).unwrap();
            assert!(jt.certify_m_power(n).unwrap());
            assert!(!jt.certify_m_power(n - 1).unwrap());
            assert_eq!(jt.determinacy_bound().bound, Some(n + 1));
        }
    }

    #[test]
    fn three_cycle() {
        let quiver = Quiver::three_cycle();
        let phi = CyclicPotential::from_words(quiver, 4, &[("c b a", qi(1))]).unwrap();
        let jt = JacobiTruncation::new(&phi, 4).unwrap();
        assert_eq!(jt.quotient_dims(), &[3, 3, 0, 0, 0]);
        assert_eq!(jt.determinacy_bound().bound, Some(3));
    }

    #[test]
    fn zero_potential() {
        let quiver = Quiver::loops(&["x", "y"]);
        let jt = JacobiTruncation::new(&CyclicPotential::<Q>::zero(quiver, 3), 3).unwrap();
        assert_eq!(jt.quotient_dims(), &[1, 2, 4, 8]);
        assert_eq!(jt.determinacy_bound().r, None);
    }

    #[test]
    fn quasi_homogeneity_of_non_homogeneous_loop() {
        // t³ + t⁴ = (t/3 - t²/9 + ...)·D(t³ + t⁴) at every truncation.
        let jt = JacobiTruncation::new(&loop_pot(&[(3, 1), (4, 1)], 6), 6).unwrap();
        assert_eq!(jt.quasi_homogeneous(), QuasiHomogeneity { holds: true, exact: true });
        let zero = JacobiTruncation::new(&loop_pot(&[], 4), 4).unwrap();
        assert!(zero.quasi_homogeneous().holds);
        assert!(!zero.quasi_homogeneous().exact);
    }

    #[test]
    fn normal_forms() {
        let jt = JacobiTruncation::new(&loop_pot(&[(3, 1)], 4), 4).unwrap();
        let quiver = jt.quiver().clone();
        let f = TruncSeries::<Q>::from_words(quiver.clone(), 4, &[("t", 2), ("t t", 5)]).unwrap();
        let nf = jt.reduce(&f).unwrap();
        assert_eq!(nf, TruncSeries::from_words(quiver, 4, &[("t", 2)]).unwrap());
        assert_eq!(jt.standard_paths_from(0).len(), 2);
    }

    #[test]
    fn tangent_solve_examples() {
        let theta = loop_pot(&[(3, 1)], 4);
        let target = loop_pot(&[(4, 1)], 4);
        let xi = tangent_solve(&theta, &target).unwrap();
        let quiver = theta.quiver().clone();
        assert_eq!(
            xi[0],
            TruncSeries::monomial(quiver.clone(), 4, Path::raw(0, 0, vec![0, 0]), q(1, 3))
        );
        assert_eq!(tangent_action(&theta, &xi).unwrap(), target);
        let zero = tangent_solve(&theta, &loop_pot(&[], 4)).unwrap();
        assert!(zero.iter().all(|s| s.is_zero()));
        assert!(matches!(
            tangent_solve(&theta, &loop_pot(&[(2, 1)], 4)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn tangent_solve_moser_step() {
        let theta = loop_pot(&[(3, 3), (4, 2)], 8).scale(&q(1, 3));
        let target = loop_pot(&[(4, -1)], 8);
        let xi = tangent_solve(&theta, &target).unwrap();
        assert_eq!(xi[0].coeff(&Path::raw(0, 0, vec![0])), qi(0));
        assert_eq!(xi[0].coeff(&Path::raw(0, 0, vec![0, 0])), q(-1, 3));
        assert_eq!(tangent_action(&theta, &xi).unwrap(), target);
    }

    fn arb_homogeneous(d: usize) -> impl Strategy<Value = CyclicPotential<Q>> {
        let quiver = Quiver::loops(&["x", "y"]);
        proptest::collection::vec((proptest::collection::vec(0usize..2, d), -3i64..=3), 1..5)
            .prop_map(move |ws| {
                let mut phi = CyclicPotential::zero(quiver.clone(), d + 2);
                for (w, c) in ws {
                    phi.add_cycle(&Path::raw(0, 0, w), qi(c));
                }
                phi
            })
    }

    fn arb_unitriangular() -> impl Strategy<Value = Endomorphism<Q>> {
        let quiver = Quiver::loops(&["x", "y"]);
        proptest::collection::vec((0usize..2, proptest::collection::vec(0usize..2, 2..=3), -2i64..=2), 0..4)
            .prop_map(move |ts| {
                let over = ts
                    .into_iter()
                    .fold(BTreeMap::<usize, TruncSeries<Q>>::new(), |mut m, (a, w, c)| {
                        m.entry(a)
                            .or_insert_with(|| TruncSeries::arrow(quiver.clone(), 6, a))
                            .add_term(Path::raw(0, 0, w), qi(c));
                        m
                    });
                Endomorphism::from_map(quiver.clone(), 6, over.into_iter().collect()).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn euler_identity(phi in arb_homogeneous(3)) {
            prop_assert_eq!(euler_sum(&phi), phi.scale(&qi(3)));
            let jt = JacobiTruncation::new(&phi, phi.trunc()).unwrap();
            prop_assert!(jt.quasi_homogeneous().holds);
        }

        #[test]
        fn degree_stability(phi in arb_homogeneous(3)) {
            let small = JacobiTruncation::new(&phi, 4).unwrap();
            let big = JacobiTruncation::new(&phi, 5).unwrap();
            prop_assert_eq!(small.quotient_dims(), &big.quotient_dims()[..5]);
        }

        #[test]
        fn certify_is_monotone(phi in arb_homogeneous(3)) {
            let jt = JacobiTruncation::new(&phi, 5).unwrap();
            if let Some(r) = jt.determinacy_bound().r {
                for s in r..=5 {
                    prop_assert!(jt.certify_m_power(s).unwrap());
                }
            }
        }

        #[test]
        fn automorphism_invariance(phi in arb_homogeneous(3), h in arb_unitriangular()) {
            let phi = phi.with_trunc(6);
            let moved = h.apply_potential(&phi).unwrap();
            let a = JacobiTruncation::new(&phi, 5).unwrap();
            let b = JacobiTruncation::new(&moved, 5).unwrap();
            prop_assert_eq!(a.quotient_dims(), b.quotient_dims());
        }

        #[test]
        fn tangent_solutions_verify(phi in arb_homogeneous(3), target in arb_homogeneous(4)) {
            let target = target.with_trunc(5);
            let phi = phi.with_trunc(5);
            if let Ok(xi) = tangent_solve(&phi, &target) {
                prop_assert_eq!(tangent_action(&phi, &xi).unwrap(), target);
            }
        }
    }
}
