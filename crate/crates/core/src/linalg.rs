//! Sparse row reduction and small dense solves over any coefficient field.

use std::collections::BTreeMap;

use crate::scalar::Scalar;

/// Default pivot tolerance for the complex-float kind.
pub const FLOAT_PIVOT_TOL: f64 = 1e-12;

/// Sparse vector: column index → nonzero coefficient.
pub type SparseRow<K> = BTreeMap<usize, K>;

fn clean<K: Scalar>(row: &mut SparseRow<K>, tol: f64) {
    row.retain(|_, v| !v.is_negligible(tol));
}

/// `row -= factor · pivot`.
fn axpy<K: Scalar>(row: &mut SparseRow<K>, factor: &K, pivot: &SparseRow<K>, tol: f64) {
    for (c, v) in pivot {
        let nv = match row.remove(c) {
            Some(old) => old - factor.clone() * v.clone(),
            None => -(factor.clone() * v.clone()),
        };
        if !nv.is_negligible(tol) {
            row.insert(*c, nv);
        }
    }
}

/// Row-echelon basis with distinct leading (smallest) columns, each leading entry 1.
///
/// The column order is the caller's order, so putting low degrees first makes the
/// leading columns describe the associated graded subspace.
#[derive(Clone, Debug)]
pub struct EchelonBasis<K> {
    pivots: BTreeMap<usize, SparseRow<K>>,
    tol: f64,
}

impl<K: Scalar> Default for EchelonBasis<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Scalar> EchelonBasis<K> {
    pub fn new() -> Self {
        EchelonBasis {
            pivots: BTreeMap::new(),
            tol: if K::EXACT { 0.0 } else { FLOAT_PIVOT_TOL },
        }
    }

    pub fn with_tolerance(tol: f64) -> Self {
        EchelonBasis {
            pivots: BTreeMap::new(),
            tol,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_columns(&self) -> impl Iterator<Item = &usize> {
        self.pivots.keys()
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivots.contains_key(&col)
    }

    /// Eliminates every pivot column from `row`; the result lives on non-pivot columns.
    pub fn reduce(&self, mut row: SparseRow<K>) -> SparseRow<K> {
        clean(&mut row, self.tol);
        let mut cursor: Option<usize> = None;
        loop {
            let next = match cursor {
                None => row.keys().find(|c| self.pivots.contains_key(c)).copied(),
                Some(c) => row
                    .range(c + 1..)
                    .map(|(k, _)| *k)
                    .find(|k| self.pivots.contains_key(k)),
            };
            let Some(col) = next else { break };
            let factor = row[&col].clone();
            axpy(&mut row, &factor, &self.pivots[&col], self.tol);
            row.remove(&col);
            cursor = Some(col);
        }
        row
    }

    /// Inserts a row; returns true when it enlarged the span.
    pub fn insert(&mut self, row: SparseRow<K>) -> bool {
        let row = self.reduce(row);
        let Some((&lead, lv)) = row.iter().next() else {
            return false;
        };
        let inv = K::one() / lv.clone();
        let mut normalized: SparseRow<K> = row.into_iter().map(|(c, v)| (c, v * inv.clone())).collect();
        normalized.insert(lead, K::one());
        // Keep existing pivots reduced against the new one so `reduce` stays a single pass.
        let cols: Vec<usize> = self
            .pivots
            .iter()
            .filter(|(_, r)| r.contains_key(&lead))
            .map(|(c, _)| *c)
            .collect();
        for c in cols {
            let r = self.pivots.get_mut(&c).expect("present");
            let f = r[&lead].clone();
            axpy(r, &f, &normalized, self.tol);
            r.remove(&lead);
        }
        self.pivots.insert(lead, normalized);
        true
    }

    pub fn contains(&self, row: SparseRow<K>) -> bool {
        self.reduce(row).is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&usize, &SparseRow<K>)> {
        self.pivots.iter()
    }
}

/// Inverse of a square dense matrix, or `None` when singular.
pub fn invert_dense<K: Scalar>(m: &[Vec<K>]) -> Option<Vec<Vec<K>>> {
    let n = m.len();
    let tol = if K::EXACT { 0.0 } else { FLOAT_PIVOT_TOL };
    let mut a: Vec<Vec<K>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { K::one() } else { K::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_negligible(tol))
            .max_by(|&x, &y| {
                if K::EXACT {
                    y.cmp(&x)
                } else {
                    a[x][col]
                        .abs_f64()
                        .partial_cmp(&a[y][col].abs_f64())
                        .unwrap_or(std::cmp::Ordering::Equal)
                }
            })?;
        a.swap(col, pivot);
        let inv = K::one() / a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..2 * n {
                    let sub = f.clone() * a[col][c].clone();
                    a[r][c] = a[r][c].clone() - sub;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Dense matrix product.
pub fn mat_mul<K: Scalar>(a: &[Vec<K>], b: &[Vec<K>], inner: usize, cols: usize) -> Vec<Vec<K>> {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut s = K::zero();
                    for k in 0..inner {
                        s = s + row[k].clone() * b[k][j].clone();
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Solution of `Σ_j A[i][j] x_j = b_i` with free variables set to zero.
///
/// Equations are consumed in the given order; the first inconsistent one is reported by index.
pub fn solve_sparse<K: Scalar>(
    equations: &[(SparseRow<K>, K)],
    nvars: usize,
) -> std::result::Result<Vec<K>, usize> {
    // Augment with the right-hand side as column `nvars`.
    let tol = if K::EXACT { 0.0 } else { FLOAT_PIVOT_TOL };
    let mut basis = EchelonBasis::<K>::with_tolerance(tol);
    for (idx, (row, rhs)) in equations.iter().enumerate() {
        let mut r = row.clone();
        if !rhs.is_zero() {
            r.insert(nvars, rhs.clone());
        }
        let red = basis.reduce(r);
        if let Some((&lead, _)) = red.iter().next() {
            if lead == nvars {
                return Err(idx);
            }
            basis.insert(red);
        }
    }
    let mut x = vec![K::zero(); nvars];
    for (&lead, row) in basis.rows() {
        if let Some(v) = row.get(&nvars) {
            x[lead] = v.clone();
        }
    }
    Ok(x)
}
