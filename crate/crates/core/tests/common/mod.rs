//! Independent oracles shared by the integration tests. None of them call the library
//! routine they check.

#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use qpcalc_core::repmod::MatrixRep;
use qpcalc_core::torus::TorusElement;
use qpcalc_core::{DimVector, Quiver};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Rank of a dense rational matrix by plain Gaussian elimination.
pub fn rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let pivot = rows[r][c].clone();
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = &rows[i][c] / &pivot;
                for j in c..cols {
                    let d = &f * &rows[r][j];
                    rows[i][j] -= d;
                }
            }
        }
        r += 1;
    }
    r
}

/// A path as `(source, target, arrows)`.
type RawPath = (usize, usize, Vec<usize>);

fn paths_up_to(q: &Quiver, n: usize) -> Vec<RawPath> {
    let mut out: Vec<RawPath> = (0..q.node_count()).map(|i| (i, i, vec![])).collect();
    let mut frontier = out.clone();
    for _ in 0..n {
        let mut next = Vec::new();
        for (s, t, w) in &frontier {
            for (a, ar) in q.arrows().iter().enumerate() {
                if ar.src == *t {
                    let mut w2 = w.clone();
                    w2.push(a);
                    next.push((*s, ar.tgt, w2));
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Cyclic derivative of closed words: every occurrence of `a`, rotated to the front
/// and deleted.
fn cyclic_derivative(words: &[(Vec<usize>, BigRational)], a: usize) -> Vec<(Vec<usize>, BigRational)> {
    let mut out = Vec::new();
    for (w, c) in words {
        for i in 0..w.len() {
            if w[i] == a {
                let rest: Vec<usize> = w[i + 1..].iter().chain(&w[..i]).copied().collect();
                out.push((rest, c.clone()));
            }
        }
    }
    out
}

/// Associated-graded dimensions of `kQ/J` up to degree `n`, from
/// `dim kQ/(J + m^{d+1}) = #paths(≤ d) − rank span{u·D_aΦ·v}`.
pub fn jacobi_dims_bruteforce(q: &Quiver, words: &[(Vec<usize>, BigRational)], n: usize) -> Vec<usize> {
    let paths = paths_up_to(q, n);
    let index = |p: &RawPath| paths.iter().position(|x| x == p);
    let mut quotient = Vec::new();
    for d in 0..=n {
        let cols: Vec<usize> = (0..paths.len()).filter(|&i| paths[i].2.len() <= d).collect();
        let mut rows = Vec::new();
        for a in 0..q.arrow_count() {
            let ar = &q.arrows()[a];
            let da = cyclic_derivative(words, a);
            for u in paths.iter().filter(|u| u.1 == ar.tgt) {
                for v in paths.iter().filter(|v| v.0 == ar.src) {
                    let mut row = vec![BigRational::zero(); cols.len()];
                    let mut any = false;
                    for (w, c) in &da {
                        let len = u.2.len() + w.len() + v.2.len();
                        if len > d {
                            continue;
                        }
                        let word: Vec<usize> = u.2.iter().chain(w).chain(&v.2).copied().collect();
                        let p = (u.0, v.1, word);
                        let col = index(&p).expect("path enumerated");
                        let k = cols.iter().position(|&x| x == col).expect("within degree");
                        row[k] += c;
                        any = true;
                    }
                    if any {
                        rows.push(row);
                    }
                }
            }
        }
        quotient.push(cols.len() - rank(rows));
    }
    (0..=n)
        .map(|d| quotient[d] - if d == 0 { 0 } else { quotient[d - 1] })
        .collect()
}

/// Coefficients `g_0..=g_deg` of the power-series root `G = t² + …` of
/// `10G³ + (15t − 1)G² + (7t² − t)G + t³ = 0`, from `G = t² + 7tG + 15G² + (10G³ − G²)/t`.
pub fn separation_cubic_root(deg: usize) -> Vec<BigInt> {
    let d = deg + 3;
    let mul = |a: &[BigInt], b: &[BigInt]| -> Vec<BigInt> {
        let mut c = vec![BigInt::zero(); d];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j < d {
                    c[i + j] += x * y;
                }
            }
        }
        c
    };
    let mut g = vec![BigInt::zero(); d];
    for _ in 0..d {
        let g2 = mul(&g, &g);
        let g3 = mul(&g2, &g);
        let mut next = vec![BigInt::zero(); d];
        next[2] += 1;
        for m in 0..d {
            if m + 1 < d {
                next[m + 1] += &g[m] * 7;
            }
            next[m] += &g2[m] * 15;
            if m >= 1 {
                next[m - 1] += &g3[m] * 10 - &g2[m];
            }
        }
        g = next;
    }
    g.truncate(deg + 1);
    g
}

/// Residual of the cubic at a candidate series, through degree `deg`.
pub fn separation_cubic_residual(g: &[BigInt], deg: usize) -> Vec<BigInt> {
    let d = deg + 1;
    let at = |v: &[BigInt], i: usize| v.get(i).cloned().unwrap_or_else(BigInt::zero);
    let mul = |a: &[BigInt], b: &[BigInt]| -> Vec<BigInt> {
        (0..d).map(|k| (0..=k).map(|i| at(a, i) * at(b, k - i)).sum()).collect()
    };
    let g2 = mul(g, g);
    let g3 = mul(&g2, g);
    (0..d)
        .map(|k| {
            let mut r = &g3[k] * 10 - &g2[k];
            if k >= 1 {
                r += &g2[k - 1] * 15 - at(g, k - 1);
            }
            if k >= 2 {
                r += at(g, k - 2) * 7;
            }
            if k == 3 {
                r += 1;
            }
            r
        })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i as i64 + 1))
}

/// Exchange recurrence `x_{m+1} = (1 + x_m)/x_{m−1}` on rational numbers.
pub fn a2_recurrence(x1: BigRational, x2: BigRational, steps: usize) -> Vec<BigRational> {
    let mut xs = vec![x1, x2];
    for m in 1..=steps {
        let next = (BigRational::one() + &xs[m]) / &xs[m - 1];
        xs.push(next);
    }
    xs
}

/// Value of an x-only Laurent polynomial at a rational point.
pub fn eval_laurent(e: &TorusElement, point: &[BigRational]) -> BigRational {
    e.terms()
        .iter()
        .map(|((x, _), c)| {
            x.iter()
                .zip(point)
                .fold(c.clone(), |acc, (&k, p)| if k >= 0 { acc * p.pow(k as i32) } else { acc / p.pow((-k) as i32) })
        })
        .sum()
}

/// Random nilpotent representation: each basis vector gets a level in `0..3` and arrows
/// only raise the level.
pub fn graded_nilpotent(q: &Arc<Quiver>, dims: &DimVector, rng: &mut ChaCha8Rng) -> MatrixRep<Complex64> {
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
