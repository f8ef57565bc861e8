//! Matrix representations: Chern–Simons values and gradients, nilpotency, submodule
//! counts over prime fields, F-series and modules of Jacobi algebras.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::JacobiTruncation;
use crate::linalg::{mat_mul, EchelonBasis, SparseRow};
use crate::potential::CyclicPotential;
use crate::quiver::{DimVector, Quiver};
use crate::scalar::{format_rational, parse_rational, Scalar};
use crate::series::{same_quiver, Path, TruncSeries};

/// Dense matrix, row-major.
pub type Matrix<K> = Vec<Vec<K>>;

/// A representation: `A_a` has shape `v_{t(a)} × v_{s(a)}`, and a path `a₁⋯a_n` acts by
/// `A_{a_n}⋯A_{a_1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRep<K> {
    quiver: Arc<Quiver>,
    dims: DimVector,
    matrices: Vec<Matrix<K>>,
}

/// `{"dim": {"1": 2}, "matrices": {"a": [[0, 1], [0, 0]]}}`; entries are numbers, strings
/// or `[re, im]` pairs, and missing arrows are zero.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModuleJson {
    pub dim: BTreeMap<String, usize>,
    #[serde(default)]
    pub matrices: BTreeMap<String, Vec<Vec<serde_json::Value>>>,
}

fn identity<K: Scalar>(n: usize) -> Matrix<K> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { K::one() } else { K::zero() }).collect())
        .collect()
}

fn zeros<K: Scalar>(r: usize, c: usize) -> Matrix<K> {
    vec![vec![K::zero(); c]; r]
}

fn parse_entry<K: Scalar>(v: &serde_json::Value) -> Result<K> {
    let text = |v: &serde_json::Value| -> Result<String> {
        match v {
            serde_json::Value::Number(n) => Ok(n.to_string()),
            serde_json::Value::String(s) => Ok(s.clone()),
            _ => Err(Error::Parse(format!("bad matrix entry {v}"))),
        }
    };
    match v {
        serde_json::Value::Array(parts) if parts.len() == 2 => {
            K::parse_parts(&text(&parts[0])?, &text(&parts[1])?)
        }
        _ => K::parse_parts(&text(v)?, "0"),
    }
}

impl<K: Scalar> MatrixRep<K> {
    pub fn new(quiver: Arc<Quiver>, dims: DimVector, matrices: Vec<Matrix<K>>) -> Result<Self> {
        if dims.0.len() != quiver.node_count() {
            return Err(Error::Input(format!(
                "dimension vector has {} entries for {} nodes",
                dims.0.len(),
                quiver.node_count()
            )));
        }
        if matrices.len() != quiver.arrow_count() {
            return Err(Error::Input(format!(
                "{} matrices for {} arrows",
                matrices.len(),
                quiver.arrow_count()
            )));
        }
        for (a, m) in matrices.iter().enumerate() {
            let ar = quiver.arrow(a);
            let (r, c) = (dims.0[ar.tgt], dims.0[ar.src]);
            if m.len() != r || m.iter().any(|row| row.len() != c) {
                return Err(Error::Input(format!(
                    "matrix of {:?} must be {r}×{c}",
                    ar.id
                )));
            }
        }
        Ok(MatrixRep {
            quiver,
            dims,
            matrices,
        })
    }

    pub fn zero(quiver: Arc<Quiver>, dims: DimVector) -> Result<Self> {
        let matrices = quiver
            .arrows()
            .iter()
            .map(|a| zeros(dims.0.get(a.tgt).copied().unwrap_or(0), dims.0.get(a.src).copied().unwrap_or(0)))
            .collect();
        Self::new(quiver, dims, matrices)
    }

    pub fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    pub fn dims(&self) -> &DimVector {
        &self.dims
    }

    pub fn matrices(&self) -> &[Matrix<K>] {
        &self.matrices
    }

    pub fn matrix(&self, a: usize) -> &Matrix<K> {
        &self.matrices[a]
    }

    pub fn set_entry(&mut self, a: usize, i: usize, j: usize, v: K) {
        self.matrices[a][i][j] = v;
    }

    pub fn map_entries<K2: Scalar, F: Fn(&K) -> K2>(&self, f: F) -> MatrixRep<K2> {
        MatrixRep {
            quiver: self.quiver.clone(),
            dims: self.dims.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|m| m.iter().map(|r| r.iter().map(&f).collect()).collect())
                .collect(),
        }
    }

    /// Action of a path: `A_{a_n}⋯A_{a_1}`, of shape `v_{t(p)} × v_{s(p)}`.
    pub fn path_matrix(&self, p: &Path) -> Matrix<K> {
        let mut m = identity(self.dims.0[p.src()]);
        let mut cur = p.src();
        for &a in p.arrows() {
            let ar = self.quiver.arrow(a);
            m = mat_mul(&self.matrices[a], &m, self.dims.0[cur], self.dims.0[p.src()]);
            cur = ar.tgt;
        }
        m
    }

    /// Evaluates a series whose paths all run from `src` to `tgt`.
    pub fn eval_series(&self, f: &TruncSeries<K>, src: usize, tgt: usize) -> Result<Matrix<K>> {
        let mut out: Matrix<K> = zeros(self.dims.0[tgt], self.dims.0[src]);
        for (p, c) in f.terms() {
            if p.src() != src || p.tgt() != tgt {
                return Err(Error::Input(format!(
                    "path {} does not run between the requested nodes",
                    p.display(&self.quiver)
                )));
            }
            let m = self.path_matrix(p);
            for (orow, mrow) in out.iter_mut().zip(&m) {
                for (o, x) in orow.iter_mut().zip(mrow) {
                    *o = o.clone() + c.clone() * x.clone();
                }
            }
        }
        Ok(out)
    }

    /// Simultaneous base change `A_a ↦ g_{t(a)} A_a g_{s(a)}⁻¹`.
    pub fn conjugate(&self, g: &[Matrix<K>]) -> Result<Self> {
        let inv: Vec<Matrix<K>> = g
            .iter()
            .map(|m| crate::linalg::invert_dense(m).ok_or_else(|| Error::Input("singular base change".into())))
            .collect::<Result<_>>()?;
        let matrices = self
            .quiver
            .arrows()
            .iter()
            .enumerate()
            .map(|(a, ar)| {
                let (vt, vs) = (self.dims.0[ar.tgt], self.dims.0[ar.src]);
                let left = mat_mul(&g[ar.tgt], &self.matrices[a], vt, vs);
                mat_mul(&left, &inv[ar.src], vs, vs)
            })
            .collect();
        Self::new(self.quiver.clone(), self.dims.clone(), matrices)
    }

    /// Smallest `k` such that every path of length `k` acts by zero, via the radical
    /// filtration `W₀ = V`, `W_{k+1} = Σ_a A_a W_k`; `None` when not nilpotent.
    pub fn nilpotency_index(&self) -> Option<usize> {
        let n = self.quiver.node_count();
        let mut spaces: Vec<Vec<Vec<K>>> = (0..n).map(|i| identity::<K>(self.dims.0[i])).collect();
        let total = self.dims.total();
        for k in 0..=total {
            if spaces.iter().all(|s| s.is_empty()) {
                return Some(k);
            }
            let mut next: Vec<EchelonBasis<K>> = (0..n).map(|_| EchelonBasis::new()).collect();
            for (a, ar) in self.quiver.arrows().iter().enumerate() {
                for v in &spaces[ar.src] {
                    let image: SparseRow<K> = self.matrices[a]
                        .iter()
                        .enumerate()
                        .map(|(r, row)| {
                            let s = row
                                .iter()
                                .zip(v)
                                .fold(K::zero(), |acc, (x, y)| acc + x.clone() * y.clone());
                            (r, s)
                        })
                        .collect();
                    next[ar.tgt].insert(image);
                }
            }
            spaces = next
                .iter()
                .zip(&self.dims.0)
                .map(|(b, &d)| {
                    b.rows()
                        .map(|(_, r)| {
                            let mut v = vec![K::zero(); d];
                            for (c, x) in r {
                                v[*c] = x.clone();
                            }
                            v
                        })
                        .collect()
                })
                .collect();
        }
        None
    }

    pub fn is_nilpotent(&self) -> bool {
        self.nilpotency_index().is_some()
    }

    pub fn to_json(&self) -> ModuleJson {
        ModuleJson {
            dim: self
                .dims
                .0
                .iter()
                .enumerate()
                .map(|(i, &d)| (self.quiver.node_id(i).to_string(), d))
                .collect(),
            matrices: self
                .matrices
                .iter()
                .enumerate()
                .map(|(a, m)| {
                    let rows = m
                        .iter()
                        .map(|r| {
                            r.iter()
                                .map(|x| {
                                    let (re, im) = x.format_parts();
                                    if im == "0" {
                                        serde_json::Value::String(re)
                                    } else {
                                        serde_json::json!([re, im])
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    (self.quiver.arrow(a).id.clone(), rows)
                })
                .collect(),
        }
    }

    pub fn from_json(quiver: Arc<Quiver>, j: &ModuleJson) -> Result<Self> {
        let mut dims = vec![0; quiver.node_count()];
        for (id, &d) in &j.dim {
            dims[quiver.node(id)?] = d;
        }
        let mut rep = Self::zero(quiver.clone(), DimVector(dims))?;
        for (id, rows) in &j.matrices {
            let a = quiver.arrow_by_id(id)?;
            let m: Matrix<K> = rows
                .iter()
                .map(|r| r.iter().map(parse_entry).collect::<Result<Vec<K>>>())
                .collect::<Result<_>>()
                .map_err(|e| Error::Input(format!("matrices.{id}: {e}")))?;
            rep.matrices[a] = m;
        }
        Self::new(quiver, rep.dims, rep.matrices)
    }
}

fn trace<K: Scalar>(m: &Matrix<K>) -> K {
    (0..m.len()).fold(K::zero(), |acc, i| acc + m[i][i].clone())
}

/// `Σ_c φ_c·tr(A_c)` over the stored cyclic words: the Chern–Simons value of the stored
/// polynomial. It equals the value of the full potential when the representation is
/// nilpotent of index `≤ N + 1`.
pub fn cs_evaluate<K: Scalar>(phi: &CyclicPotential<K>, rep: &MatrixRep<K>) -> Result<K> {
    if !same_quiver(phi.quiver(), &rep.quiver) {
        return Err(Error::Mismatch("potential and representation differ in quiver".into()));
    }
    Ok(phi
        .terms()
        .iter()
        .fold(K::zero(), |acc, (p, c)| acc + c.clone() * trace(&rep.path_matrix(p))))
}

/// `∂ tr Φ(A) / ∂(A_a)_{ij} = (D_aΦ)(A)_{ji}`, arrow-indexed in the shape of `A_a`.
pub fn algebraic_gradient<K: Scalar>(phi: &CyclicPotential<K>, rep: &MatrixRep<K>) -> Result<Vec<Matrix<K>>> {
    let q = rep.quiver.clone();
    (0..q.arrow_count())
        .map(|a| {
            let ar = q.arrow(a);
            let d = phi.cyclic_derivative(a)?;
            let m = rep.eval_series(&d, ar.tgt, ar.src)?;
            let (r, c) = (rep.dims.0[ar.tgt], rep.dims.0[ar.src]);
            Ok((0..r)
                .map(|i| (0..c).map(|j| m[j][i].clone()).collect())
                .collect())
        })
        .collect()
}

/// Gradient check at a representation: algebraic versus central-difference gradient.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalReport {
    pub max_discrepancy: f64,
    pub gradient_norm: f64,
    pub is_critical: bool,
    pub nilpotent: bool,
}

/// Compares the algebraic gradient with central differences of [`cs_evaluate`] at step
/// `h` (valid along real directions since the trace is holomorphic in the entries).
pub fn critical_point_check(
    phi: &CyclicPotential<Complex64>,
    rep: &MatrixRep<Complex64>,
    h: f64,
    tol: f64,
) -> Result<CriticalReport> {
    let grad = algebraic_gradient(phi, rep)?;
    let mut worst: f64 = 0.0;
    let mut norm: f64 = 0.0;
    let mut probe = rep.clone();
    for (a, g) in grad.iter().enumerate() {
        for (i, row) in g.iter().enumerate() {
            for (j, gij) in row.iter().enumerate() {
                let x = rep.matrices[a][i][j];
                probe.matrices[a][i][j] = x + h;
                let plus = cs_evaluate(phi, &probe)?;
                probe.matrices[a][i][j] = x - h;
                let minus = cs_evaluate(phi, &probe)?;
                probe.matrices[a][i][j] = x;
                let fd = (plus - minus) / (2.0 * h);
                worst = worst.max((fd - gij).norm());
                norm = norm.max(gij.norm());
            }
        }
    }
    Ok(CriticalReport {
        max_discrepancy: worst,
        gradient_norm: norm,
        is_critical: norm <= tol,
        nilpotent: rep.is_nilpotent(),
    })
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % p as u128) as u64;
        }
        b = (b as u128 * b as u128 % p as u128) as u64;
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Reduction of a rational modulo `p`; fails when `p` divides the denominator.
pub fn reduce_mod(x: &BigRational, p: u64) -> Result<u64> {
    let pb = BigInt::from(p);
    let num = x.numer().mod_floor(&pb).to_u64().expect("residue fits");
    let den = x.denom().mod_floor(&pb).to_u64().expect("residue fits");
    if den == 0 {
        return Err(Error::Input(format!("{x} has no reduction modulo {p}")));
    }
    Ok((num as u128 * inv_mod(den, p) as u128 % p as u128) as u64)
}

/// Number of `k`-dimensional subspaces of `F_q^n`.
pub fn gaussian_binomial(n: usize, k: usize, q: u64) -> u128 {
    if k > n {
        return 0;
    }
    let q = q as u128;
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num = num.saturating_mul(q.saturating_pow((n - i) as u32).saturating_sub(1));
        den = den.saturating_mul(q.saturating_pow((i + 1) as u32) - 1);
    }
    if num == u128::MAX {
        u128::MAX
    } else {
        num / den
    }
}

/// RREF bases of all `k`-dimensional subspaces of `F_p^n`.
fn subspaces(n: usize, k: usize, p: u64) -> Vec<Vec<Vec<u64>>> {
    let mut out = Vec::new();
    let mut pivots = Vec::with_capacity(k);
    fn choose(n: usize, k: usize, start: usize, pivots: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pivots.len() == k {
            f(pivots);
            return;
        }
        for c in start..n {
            pivots.push(c);
            choose(n, k, c + 1, pivots, f);
            pivots.pop();
        }
    }
    choose(n, k, 0, &mut pivots, &mut |piv: &[usize]| {
        let free: Vec<(usize, usize)> = piv
            .iter()
            .enumerate()
            .flat_map(|(r, &c)| ((c + 1)..n).filter(|j| !piv.contains(j)).map(move |j| (r, j)))
            .collect();
        let total = (p as u128).pow(free.len() as u32);
        for code in 0..total {
            let mut rows = vec![vec![0u64; n]; k];
            for (r, &c) in piv.iter().enumerate() {
                rows[r][c] = 1;
            }
            let mut x = code;
            for &(r, j) in &free {
                rows[r][j] = (x % p as u128) as u64;
                x /= p as u128;
            }
            out.push(rows);
        }
    });
    out
}

/// Whether `v` lies in the span of RREF `rows`.
fn in_span(rows: &[Vec<u64>], v: &[u64], p: u64) -> bool {
    let mut v = v.to_vec();
    for r in rows {
        let c = r.iter().position(|&x| x != 0).expect("RREF rows are nonzero");
        let f = v[c];
        if f != 0 {
            for (x, y) in v.iter_mut().zip(r) {
                *x = (*x + p - f * y % p) % p;
            }
        }
    }
    v.iter().all(|&x| x == 0)
}

fn apply_mod(m: &[Vec<u64>], v: &[u64], p: u64) -> Vec<u64> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(0u64, |acc, (a, b)| (acc + a * b) % p))
        .collect()
}

/// Default cap on the number of subspace tuples enumerated by [`count_submodules`].
pub const DEFAULT_COUNT_BUDGET: u128 = 5_000_000;

/// Number of subrepresentations of dimension `sub` of `rep ⊗ F_p`.
pub fn count_submodules(rep: &MatrixRep<BigRational>, p: u64, sub: &DimVector, budget: u128) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::Input(format!("{p} is not prime")));
    }
    let q = rep.quiver();
    let n = q.node_count();
    if sub.0.len() != n || sub.0.iter().zip(&rep.dims.0).any(|(w, v)| w > v) {
        return Err(Error::Input("subdimension vector out of range".into()));
    }
    let size = (0..n).fold(1u128, |acc, i| acc.saturating_mul(gaussian_binomial(rep.dims.0[i], sub.0[i], p)));
    if size > budget {
        return Err(Error::Budget(format!(
            "{size} subspace tuples over F_{p} exceed the budget {budget}"
        )));
    }
    let mats: Vec<Vec<Vec<u64>>> = rep
        .matrices
        .iter()
        .map(|m| m.iter().map(|r| r.iter().map(|x| reduce_mod(x, p)).collect()).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let candidates: Vec<Vec<Vec<Vec<u64>>>> = (0..n).map(|i| subspaces(rep.dims.0[i], sub.0[i], p)).collect();
    let checks: Vec<Vec<usize>> = (0..n)
        .map(|k| {
            (0..q.arrow_count())
                .filter(|&a| q.arrow(a).src.max(q.arrow(a).tgt) == k)
                .collect()
        })
        .collect();
    fn go(
        k: usize,
        chosen: &mut Vec<usize>,
        q: &Quiver,
        cands: &[Vec<Vec<Vec<u64>>>],
        checks: &[Vec<usize>],
        mats: &[Vec<Vec<u64>>],
        p: u64,
    ) -> u64 {
        if k == cands.len() {
            return 1;
        }
        let mut total = 0;
        for idx in 0..cands[k].len() {
            chosen.push(idx);
            let stable = checks[k].iter().all(|&a| {
                let ar = q.arrow(a);
                let src = &cands[ar.src][chosen[ar.src]];
                let tgt = &cands[ar.tgt][chosen[ar.tgt]];
                src.iter().all(|v| in_span(tgt, &apply_mod(&mats[a], v, p), p))
            });
            if stable {
                total += go(k + 1, chosen, q, cands, checks, mats, p);
            }
            chosen.pop();
        }
        total
    }
    Ok(go(0, &mut Vec::with_capacity(n), q, &candidates, &checks, &mats, p))
}

/// Number of quotient representations of dimension `v`, via submodules of dimension `dim − v`.
pub fn count_quotients(rep: &MatrixRep<BigRational>, p: u64, v: &DimVector, budget: u128) -> Result<u64> {
    if v.0.len() != rep.dims.0.len() || v.0.iter().zip(&rep.dims.0).any(|(a, b)| a > b) {
        return Err(Error::Input("quotient dimension vector out of range".into()));
    }
    let sub = DimVector(rep.dims.0.iter().zip(&v.0).map(|(d, w)| d - w).collect());
    count_submodules(rep, p, &sub, budget)
}

/// How an F-series entry was obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FiniteFieldCount,
    DirectEnumeration,
    UserSupplied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FEntry {
    pub value: BigInt,
    pub provenance: Provenance,
    /// Point counts `(p, count)` when the entry came from finite fields.
    pub counts: Vec<(u64, u64)>,
    /// Coefficients of the fitted count polynomial in `q`, constant term first.
    pub polynomial: Vec<BigRational>,
}

/// Dimension vector ↦ Euler characteristic, with omitted entries and their reasons.
#[derive(Clone, Debug, PartialEq)]
pub struct FSeries {
    pub entries: BTreeMap<DimVector, FEntry>,
    pub omitted: Vec<(DimVector, String)>,
}

impl FSeries {
    /// Entries given directly, e.g. Behrend-weighted values.
    pub fn from_weights(weights: BTreeMap<DimVector, BigInt>) -> Self {
        FSeries {
            entries: weights
                .into_iter()
                .map(|(d, value)| {
                    (
                        d,
                        FEntry {
                            value,
                            provenance: Provenance::UserSupplied,
                            counts: Vec::new(),
                            polynomial: Vec::new(),
                        },
                    )
                })
                .collect(),
            omitted: Vec::new(),
        }
    }

    pub fn value(&self, d: &DimVector) -> Option<&BigInt> {
        self.entries.get(d).map(|e| &e.value)
    }

    /// `1 + 2·y1 + y1^2`-style rendering.
    pub fn display(&self, q: &Quiver) -> String {
        let mut parts = Vec::new();
        for (d, e) in &self.entries {
            if e.value.is_zero() {
                continue;
            }
            let mono: Vec<String> = d
                .0
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    if k == 1 {
                        format!("y{}", q.node_id(i))
                    } else {
                        format!("y{}^{k}", q.node_id(i))
                    }
                })
                .collect();
            parts.push(match (mono.is_empty(), e.value == BigInt::from(1)) {
                (true, _) => e.value.to_string(),
                (false, true) => mono.join("·"),
                (false, false) => format!("{}·{}", e.value, mono.join("·")),
            });
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

/// `{"entries": [{"dim": [1, 0], "value": "2"}], "omitted": []}`; `provenance` defaults to
/// `user_supplied`, so weight files need only `dim` and `value`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FSeriesJson {
    pub entries: Vec<FEntryJson>,
    #[serde(default)]
    pub omitted: Vec<OmittedJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FEntryJson {
    pub dim: Vec<usize>,
    pub value: String,
    #[serde(default = "user_supplied")]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polynomial: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OmittedJson {
    pub dim: Vec<usize>,
    pub reason: String,
}

fn user_supplied() -> Provenance {
    Provenance::UserSupplied
}

impl FSeries {
    pub fn to_json(&self) -> FSeriesJson {
        FSeriesJson {
            entries: self
                .entries
                .iter()
                .map(|(d, e)| FEntryJson {
                    dim: d.0.clone(),
                    value: e.value.to_string(),
                    provenance: e.provenance.clone(),
                    counts: e.counts.clone(),
                    polynomial: e.polynomial.iter().map(format_rational).collect(),
                })
                .collect(),
            omitted: self
                .omitted
                .iter()
                .map(|(d, r)| OmittedJson {
                    dim: d.0.clone(),
                    reason: r.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &FSeriesJson) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, e) in j.entries.iter().enumerate() {
            let value: BigInt = e
                .value
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("entries[{k}].value: {:?} is not an integer", e.value)))?;
            let polynomial = e
                .polynomial
                .iter()
                .map(|c| parse_rational(c))
                .collect::<Result<_>>()
                .map_err(|err| Error::Input(format!("entries[{k}].polynomial: {err}")))?;
            let entry = FEntry {
                value,
                provenance: e.provenance.clone(),
                counts: e.counts.clone(),
                polynomial,
            };
            if entries.insert(DimVector(e.dim.clone()), entry).is_some() {
                return Err(Error::Input(format!("entries[{k}]: duplicate dimension vector {:?}", e.dim)));
            }
        }
        Ok(FSeries {
            entries,
            omitted: j.omitted.iter().map(|o| (DimVector(o.dim.clone()), o.reason.clone())).collect(),
        })
    }
}

/// Lagrange interpolation through `(x_i, y_i)`, coefficients constant term first.
pub fn interpolate(points: &[(u64, u64)]) -> Vec<BigRational> {
    let n = points.len();
    let mut coeffs = vec![<BigRational as Zero>::zero(); n];
    for (i, &(xi, yi)) in points.iter().enumerate() {
        let mut basis = vec![BigRational::from_integer(BigInt::from(1))];
        let mut denom = BigRational::from_integer(BigInt::from(1));
        for (j, &(xj, _)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let xj = BigRational::from_integer(BigInt::from(xj));
            let mut next = vec![<BigRational as Zero>::zero(); basis.len() + 1];
            for (k, b) in basis.iter().enumerate() {
                next[k + 1] += b.clone();
                next[k] -= b.clone() * xj.clone();
            }
            basis = next;
            denom *= BigRational::from_integer(BigInt::from(xi)) - xj;
        }
        let scale = BigRational::from_integer(BigInt::from(yi)) / denom;
        for (k, b) in basis.into_iter().enumerate() {
            coeffs[k] += b * scale.clone();
        }
    }
    while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
        coeffs.pop();
    }
    coeffs
}

fn eval_poly(c: &[BigRational], x: u64) -> BigRational {
    let x = BigRational::from_integer(BigInt::from(x));
    c.iter().rev().fold(<BigRational as Zero>::zero(), |acc, a| acc * x.clone() + a.clone())
}

/// Minimal-degree polynomial through the first `d + 1` counts that matches all the others,
/// requiring at least two held-out primes.
fn fit_counts(counts: &[(u64, u64)]) -> Option<Vec<BigRational>> {
    for d in 0..counts.len() {
        if d + 1 + 2 > counts.len() {
            return None;
        }
        let poly = interpolate(&counts[..=d]);
        if counts[d + 1..]
            .iter()
            .all(|&(x, y)| eval_poly(&poly, x) == BigRational::from_integer(BigInt::from(y)))
        {
            return Some(poly);
        }
    }
    None
}

/// F-series `Σ_v χ(Grass(M, v)) y^v` from quotient counts over the given primes, each
/// entry fitted by a polynomial in `q` and evaluated at `q = 1`.
pub fn fseries(rep: &MatrixRep<BigRational>, primes: &[u64], budget: u128) -> Result<FSeries> {
    if primes.len() < 3 {
        return Err(Error::Input("at least three primes are needed to fit and validate".into()));
    }
    if let Some(p) = primes.iter().find(|&&p| !is_prime(p)) {
        return Err(Error::Input(format!("{p} is not prime")));
    }
    let dims = rep.dims.below();
    let results: Vec<(DimVector, Result<Vec<(u64, u64)>>)> = dims
        .par_iter()
        .map(|v| {
            let counts = primes
                .iter()
                .map(|&p| count_quotients(rep, p, v, budget).map(|c| (p, c)))
                .collect::<Result<Vec<_>>>();
            (v.clone(), counts)
        })
        .collect();
    let mut entries = BTreeMap::new();
    let mut omitted = Vec::new();
    for (v, counts) in results {
        let counts = counts?;
        match fit_counts(&counts) {
            Some(poly) => {
                let at_one = eval_poly(&poly, 1);
                if !at_one.is_integer() {
                    omitted.push((v, "fitted polynomial is not integral at q = 1".into()));
                    continue;
                }
                entries.insert(
                    v,
                    FEntry {
                        value: at_one.to_integer(),
                        provenance: Provenance::FiniteFieldCount,
                        counts,
                        polynomial: poly,
                    },
                );
            }
            None => omitted.push((v, "count not polynomial at tested primes".into())),
        }
    }
    Ok(FSeries { entries, omitted })
}

/// The finite module `Λ e_i` of a certified Jacobi algebra: basis the standard paths from
/// `i`, with arrow `a` acting by `p ↦ NF(p·a)`.
pub fn jacobi_module<K: Scalar>(jt: &JacobiTruncation<K>, i: usize) -> Result<MatrixRep<K>> {
    if jt.determinacy_bound().r.is_none() {
        return Err(Error::Infeasible(format!(
            "no finiteness certificate within truncation {}",
            jt.trunc()
        )));
    }
    let q = jt.quiver().clone();
    let basis = jt.standard_paths_from(i);
    let mut dims = vec![0; q.node_count()];
    let mut position: BTreeMap<Path, usize> = BTreeMap::new();
    for p in &basis {
        position.insert(p.clone(), dims[p.tgt()]);
        dims[p.tgt()] += 1;
    }
    let mut rep = MatrixRep::zero(q.clone(), DimVector(dims))?;
    for p in &basis {
        for (a, ar) in q.arrows().iter().enumerate() {
            if ar.src != p.tgt() {
                continue;
            }
            let mut w = p.arrows().to_vec();
            w.push(a);
            let pa = TruncSeries::monomial(q.clone(), jt.trunc(), Path::from_arrows(&q, &w)?, K::one());
            for (r, c) in jt.reduce(&pa)?.terms() {
                let row = *position.get(r).ok_or_else(|| {
                    Error::Infeasible("normal form left the standard basis".into())
                })?;
                rep.set_entry(a, row, position[p], c.clone());
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;
    use num_rational::BigRational as Q;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jordan(n: usize) -> MatrixRep<Q> {
        let q = Quiver::loops(&["t"]);
        let mut rep = MatrixRep::zero(q, DimVector(vec![n])).unwrap();
        for k in 0..n.saturating_sub(1) {
            rep.set_entry(0, k + 1, k, qi(1));
        }
        rep
    }

    #[test]
    fn scalar_trace_on_three_cycle() {
        let q = Quiver::three_cycle();
        let phi = CyclicPotential::from_words(q.clone(), 3, &[("c b a", qi(1))]).unwrap();
        let rep = MatrixRep::new(
            q.clone(),
            DimVector(vec![1, 1, 1]),
            vec![vec![vec![qi(2)]], vec![vec![qi(3)]], vec![vec![qi(5)]]],
        )
        .unwrap();
        assert_eq!(cs_evaluate(&phi, &rep).unwrap(), qi(30));
        let zero = MatrixRep::zero(q, DimVector(vec![1, 2, 0])).unwrap();
        assert_eq!(cs_evaluate(&phi, &zero).unwrap(), qi(0));
    }

    #[test]
    fn jordan_block_is_critical_for_cubic() {
        let rep = jordan(2).map_entries(|x| x.to_complex64());
        let phi = CyclicPotential::from_words(rep.quiver().clone(), 3, &[("t t t", Complex64::new(1.0, 0.0))]).unwrap();
        assert_eq!(cs_evaluate(&phi, &rep).unwrap(), Complex64::new(0.0, 0.0));
        let r = critical_point_check(&phi, &rep, 1e-5, 1e-12).unwrap();
        assert!(r.is_critical && r.nilpotent);
        assert!(r.max_discrepancy < 1e-6);
    }

    #[test]
    fn random_gradient_and_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = Quiver::three_cycle();
        let c = |x: f64| Complex64::new(x, 0.0);
        let phi = CyclicPotential::from_words(q.clone(), 6, &[("c b a", c(1.0)), ("c b a c b a", c(0.5))]).unwrap();
        let dims = DimVector(vec![2, 1, 2]);
        let mut rep = MatrixRep::<Complex64>::zero(q.clone(), dims.clone()).unwrap();
        for a in 0..3 {
            let ar = q.arrow(a).clone();
            for i in 0..dims.0[ar.tgt] {
                for j in 0..dims.0[ar.src] {
                    rep.set_entry(a, i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let r = critical_point_check(&phi, &rep, 1e-5, 1e-9).unwrap();
        assert!(!r.is_critical);
        assert!(r.max_discrepancy < 1e-6);
        let lq = Quiver::loops(&["t"]);
        let quartic = CyclicPotential::from_words(lq.clone(), 4, &[("t t t", c(1.0)), ("t t t t", c(1.0))]).unwrap();
        let mut m = MatrixRep::<Complex64>::zero(lq, DimVector(vec![3])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                m.set_entry(0, i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        let coarse = critical_point_check(&quartic, &m, 2e-2, 1e-9).unwrap().max_discrepancy;
        let fine = critical_point_check(&quartic, &m, 1e-2, 1e-9).unwrap().max_discrepancy;
        let ratio = coarse / fine;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        let g: Vec<Matrix<Complex64>> = dims
            .0
            .iter()
            .map(|&d| {
                (0..d)
                    .map(|i| (0..d).map(|j| c(if i == j { 2.0 } else { rng.gen_range(-1.0..1.0) })).collect())
                    .collect()
            })
            .collect();
        let moved = rep.conjugate(&g).unwrap();
        let diff = cs_evaluate(&phi, &moved).unwrap() - cs_evaluate(&phi, &rep).unwrap();
        assert!(diff.norm() < 1e-9);
    }

    #[test]
    fn nilpotency_uses_the_radical_filtration() {
        assert_eq!(jordan(3).nilpotency_index(), Some(3));
        let q = Arc::new(Quiver::new(&["1", "2"], &[("a", "1", "2"), ("b", "2", "1")]).unwrap());
        let one = vec![vec![qi(1)]];
        let cyc = MatrixRep::new(q.clone(), DimVector(vec![1, 1]), vec![one.clone(), one]).unwrap();
        assert_eq!(cyc.nilpotency_index(), None);
        let mut t = MatrixRep::<Q>::zero(Quiver::loops(&["t"]), DimVector(vec![1])).unwrap();
        t.set_entry(0, 0, 0, qi(1));
        assert!(!t.is_nilpotent());
    }

    #[test]
    fn submodule_counts() {
        assert_eq!(count_submodules(&jordan(2), 2, &DimVector(vec![1]), DEFAULT_COUNT_BUDGET).unwrap(), 1);
        let semisimple = MatrixRep::<Q>::zero(Quiver::loops(&["t"]), DimVector(vec![2])).unwrap();
        for p in [2, 3, 5, 7] {
            assert_eq!(count_submodules(&semisimple, p, &DimVector(vec![1]), DEFAULT_COUNT_BUDGET).unwrap(), p + 1);
        }
        for v in [0, 3] {
            assert_eq!(count_submodules(&jordan(3), 3, &DimVector(vec![v]), DEFAULT_COUNT_BUDGET).unwrap(), 1);
        }
        assert!(matches!(
            count_submodules(&semisimple, 7, &DimVector(vec![1]), 3),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn gaussian_binomials() {
        assert_eq!(gaussian_binomial(2, 1, 3), 4);
        assert_eq!(gaussian_binomial(4, 2, 2), 35);
        assert_eq!(gaussian_binomial(3, 0, 5), 1);
        for n in 0..5 {
            for k in 0..=n {
                assert_eq!(subspaces(n, k, 3).len() as u128, gaussian_binomial(n, k, 3));
            }
        }
    }

    #[test]
    fn fseries_examples() {
        let primes = [2, 3, 5, 7];
        for n in 1..=4 {
            let f = fseries(&jordan(n), &primes, DEFAULT_COUNT_BUDGET).unwrap();
            for k in 0..=n {
                assert_eq!(f.value(&DimVector(vec![k])), Some(&BigInt::from(1)));
            }
        }
        let semisimple = MatrixRep::<Q>::zero(Quiver::loops(&["t"]), DimVector(vec![2])).unwrap();
        let f = fseries(&semisimple, &primes, DEFAULT_COUNT_BUDGET).unwrap();
        let vals: Vec<i64> = (0..=2).map(|k| f.value(&DimVector(vec![k])).unwrap().to_i64().unwrap()).collect();
        assert_eq!(vals, [1, 2, 1]);
        assert_eq!(f.display(semisimple.quiver()), "1 + 2·y1 + y1^2");
        let zero = MatrixRep::<Q>::zero(Quiver::loops(&["t"]), DimVector(vec![0])).unwrap();
        assert_eq!(fseries(&zero, &primes, DEFAULT_COUNT_BUDGET).unwrap().entries.len(), 1);
    }

    #[test]
    fn holdout_prime_matches_fit() {
        let semisimple = MatrixRep::<Q>::zero(Quiver::loops(&["t"]), DimVector(vec![3])).unwrap();
        let f = fseries(&semisimple, &[2, 3, 5, 7, 11], DEFAULT_COUNT_BUDGET).unwrap();
        let entry = &f.entries[&DimVector(vec![1])];
        let at13 = count_quotients(&semisimple, 13, &DimVector(vec![1]), DEFAULT_COUNT_BUDGET).unwrap();
        assert_eq!(eval_poly(&entry.polynomial, 13), BigRational::from_integer(BigInt::from(at13)));
    }

    #[test]
    fn partition_of_all_submodules() {
        // Direct oracle over F_2: every subset of vectors closed under addition and the arrows.
        let q = Arc::new(Quiver::new(&["1", "2"], &[("a", "1", "2")]).unwrap());
        let rep = MatrixRep::new(
            q.clone(),
            DimVector(vec![2, 1]),
            vec![vec![vec![qi(1), qi(0)]]],
        )
        .unwrap();
        let total: u64 = rep
            .dims()
            .below()
            .iter()
            .map(|w| count_submodules(&rep, 2, w, DEFAULT_COUNT_BUDGET).unwrap())
            .sum();
        let vecs1: Vec<[u64; 2]> = vec![[0, 0], [1, 0], [0, 1], [1, 1]];
        let mut oracle = 0;
        for m1 in 0u32..16 {
            let s1: Vec<[u64; 2]> = (0..4).filter(|i| m1 >> i & 1 == 1).map(|i| vecs1[i]).collect();
            let closed1 = s1.contains(&[0, 0])
                && s1.iter().all(|x| s1.iter().all(|y| s1.contains(&[(x[0] + y[0]) % 2, (x[1] + y[1]) % 2])));
            if !closed1 {
                continue;
            }
            for s2 in [vec![0u64], vec![0, 1]] {
                if s1.iter().all(|v| s2.contains(&v[0])) {
                    oracle += 1;
                }
            }
        }
        assert_eq!(total, oracle);
    }

    #[test]
    fn jacobi_modules() {
        let q = Quiver::loops(&["t"]);
        let phi = CyclicPotential::from_words(q.clone(), 4, &[("t t t", qi(1))]).unwrap();
        let jt = JacobiTruncation::new(&phi, 4).unwrap();
        assert_eq!(jacobi_module(&jt, 0).unwrap(), jordan(2));
        let lin = CyclicPotential::from_words(q.clone(), 4, &[("t t", qi(1))]).unwrap();
        let m = jacobi_module(&JacobiTruncation::new(&lin, 4).unwrap(), 0).unwrap();
        assert_eq!(m.dims().0, vec![1]);
        let zero = JacobiTruncation::new(&CyclicPotential::<Q>::zero(q, 3), 3).unwrap();
        assert!(jacobi_module(&zero, 0).is_err());
        let tc = Quiver::three_cycle();
        let abc = CyclicPotential::from_words(tc, 4, &[("c b a", qi(1))]).unwrap();
        let p1 = jacobi_module(&JacobiTruncation::new(&abc, 4).unwrap(), 0).unwrap();
        assert_eq!(p1.dims().0, vec![1, 1, 0]);
    }

    #[test]
    fn fseries_json_round_trip() {
        let f = fseries(&jordan(2), &[2, 3, 5], DEFAULT_COUNT_BUDGET).unwrap();
        let text = serde_json::to_string(&f.to_json()).unwrap();
        let back = FSeries::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, f);
        let w: FSeriesJson = serde_json::from_str(r#"{"entries":[{"dim":[0],"value":"1"},{"dim":[1],"value":"-2"}]}"#).unwrap();
        let f = FSeries::from_json(&w).unwrap();
        assert_eq!(f.entries[&DimVector(vec![1])].provenance, Provenance::UserSupplied);
        assert_eq!(f.value(&DimVector(vec![1])), Some(&BigInt::from(-2)));
    }

    #[test]
    fn json_round_trip() {
        let rep = jordan(3);
        let back = MatrixRep::<Q>::from_json(rep.quiver().clone(), &rep.to_json()).unwrap();
        assert_eq!(back, rep);
        let j: ModuleJson = serde_json::from_str(r#"{"dim":{"1":2},"matrices":{"t":[[0,0],[1,0]]}}"#).unwrap();
        assert_eq!(MatrixRep::<Q>::from_json(rep.quiver().clone(), &j).unwrap(), jordan(2));
    }

    /// Entries only from lower to higher level, so every long enough path vanishes.
    fn graded_nilpotent(q: &Arc<Quiver>, dims: &DimVector, rng: &mut ChaCha8Rng) -> MatrixRep<Complex64> {
        let levels: Vec<Vec<usize>> = dims.0.iter().map(|&d| (0..d).map(|_| rng.gen_range(0..3)).collect()).collect();
        let mut rep = MatrixRep::zero(q.clone(), dims.clone()).unwrap();
        for (a, ar) in q.arrows().iter().enumerate() {
            for i in 0..dims.0[ar.tgt] {
                for j in 0..dims.0[ar.src] {
                    if levels[ar.tgt][i] > levels[ar.src][j] {
                        rep.set_entry(a, i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                    }
                }
            }
        }
        rep
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn nilpotent_reps_are_invariant_and_differentiable(seed in 0u64..10_000, d1 in 0usize..3, d2 in 0usize..3, d3 in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = Quiver::three_cycle();
            let c = |x: f64| Complex64::new(x, 0.0);
            let phi = CyclicPotential::from_words(q.clone(), 6, &[("c b a", c(1.0)), ("c b a c b a", c(-0.25))]).unwrap();
            let dims = DimVector(vec![d1, d2, d3]);
            let rep = graded_nilpotent(&q, &dims, &mut rng);
            proptest::prop_assert!(rep.nilpotency_index().is_some_and(|k| k <= 3));
            let g: Vec<Matrix<Complex64>> = dims.0.iter().map(|&d| {
                (0..d).map(|i| (0..d).map(|j| c(if i == j { 2.0 } else { rng.gen_range(-0.5..0.5) })).collect()).collect()
            }).collect();
            let moved = rep.conjugate(&g).unwrap();
            proptest::prop_assert!(moved.is_nilpotent());
            let diff = cs_evaluate(&phi, &moved).unwrap() - cs_evaluate(&phi, &rep).unwrap();
            proptest::prop_assert!(diff.norm() < 1e-9);
            let r = critical_point_check(&phi, &rep, 1e-5, 1e-6).unwrap();
            proptest::prop_assert!(r.max_discrepancy < 1e-6);
        }
    }
}
