//! Quivers, dimension vectors and Euler forms.
//!
//! Paths compose left to right: `p·q` traverses `p` first and requires `t(p) = s(q)`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An arrow with internal node indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Arrow {
    pub id: String,
    pub src: usize,
    pub tgt: usize,
}

/// Finite quiver. Node and arrow indices follow declaration order.
#[derive(Clone, Debug)]
pub struct Quiver {
    nodes: Vec<String>,
    arrows: Vec<Arrow>,
    node_index: HashMap<String, usize>,
    arrow_index: HashMap<String, usize>,
}

impl PartialEq for Quiver {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.arrows == other.arrows
    }
}

impl Eq for Quiver {}

/// JSON form: `{"nodes":[..], "arrows":[{"id","src","tgt"}, ..]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct QuiverJson {
    pub nodes: Vec<String>,
    pub arrows: Vec<ArrowJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ArrowJson {
    pub id: String,
    pub src: String,
    pub tgt: String,
}

impl Quiver {
    /// Builds a quiver from node ids and `(arrow id, source id, target id)` triples.
    pub fn new<S: AsRef<str>, T: AsRef<str>>(nodes: &[S], arrows: &[(T, T, T)]) -> Result<Self> {
        let mut node_index = HashMap::new();
        let mut node_vec = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            let n = n.as_ref().to_string();
            if n.is_empty() {
                return Err(Error::Input("empty node id".into()));
            }
            if node_index.insert(n.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate node id {n:?}")));
            }
            node_vec.push(n);
        }
        let mut arrow_index = HashMap::new();
        let mut arrow_vec = Vec::with_capacity(arrows.len());
        for (k, (id, s, t)) in arrows.iter().enumerate() {
            let id = id.as_ref().to_string();
            if id.is_empty() {
                return Err(Error::Input("empty arrow id".into()));
            }
            let src = *node_index
                .get(s.as_ref())
                .ok_or_else(|| Error::Input(format!("arrow {id:?}: unknown source {:?}", s.as_ref())))?;
            let tgt = *node_index
                .get(t.as_ref())
                .ok_or_else(|| Error::Input(format!("arrow {id:?}: unknown target {:?}", t.as_ref())))?;
            if arrow_index.insert(id.clone(), k).is_some() {
                return Err(Error::Input(format!("duplicate arrow id {id:?}")));
            }
            arrow_vec.push(Arrow { id, src, tgt });
        }
        Ok(Quiver {
            nodes: node_vec,
            arrows: arrow_vec,
            node_index,
            arrow_index,
        })
    }

    /// Builds from already-indexed arrows.
    pub fn from_indexed(nodes: Vec<String>, arrows: Vec<Arrow>) -> Result<Self> {
        let triples: Vec<(String, String, String)> = arrows
            .iter()
            .map(|a| {
                let s = nodes.get(a.src).cloned().unwrap_or_default();
                let t = nodes.get(a.tgt).cloned().unwrap_or_default();
                (a.id.clone(), s, t)
            })
            .collect();
        Quiver::new(&nodes, &triples)
    }

    pub fn from_json(j: &QuiverJson) -> Result<Self> {
        let triples: Vec<(&str, &str, &str)> = j
            .arrows
            .iter()
            .map(|a| (a.id.as_str(), a.src.as_str(), a.tgt.as_str()))
            .collect();
        Quiver::new(&j.nodes, &triples)
    }

    pub fn to_json(&self) -> QuiverJson {
        QuiverJson {
            nodes: self.nodes.clone(),
            arrows: self
                .arrows
                .iter()
                .map(|a| ArrowJson {
                    id: a.id.clone(),
                    src: self.nodes[a.src].clone(),
                    tgt: self.nodes[a.tgt].clone(),
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arrow_count(&self) -> usize {
        self.arrows.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn arrow(&self, a: usize) -> &Arrow {
        &self.arrows[a]
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown node {id:?}")))
    }

    pub fn arrow_by_id(&self, id: &str) -> Result<usize> {
        self.arrow_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown arrow {id:?}")))
    }

    /// Arrows `i → j` in declaration order.
    pub fn arrows_between(&self, i: usize, j: usize) -> Vec<usize> {
        (0..self.arrows.len())
            .filter(|&a| self.arrows[a].src == i && self.arrows[a].tgt == j)
            .collect()
    }

    /// `(has a loop, has a 2-cycle between distinct nodes)`.
    pub fn has_loops_or_two_cycles(&self) -> (bool, bool) {
        let loops = self.arrows.iter().any(|a| a.src == a.tgt);
        let two = self.arrows.iter().any(|a| {
            a.src != a.tgt && self.arrows.iter().any(|b| b.src == a.tgt && b.tgt == a.src)
        });
        (loops, two)
    }

    pub fn euler_forms(&self) -> EulerForm {
        let n = self.nodes.len();
        let mut chi = vec![vec![0i64; n]; n];
        for a in &self.arrows {
            chi[a.src][a.tgt] += 1;
        }
        EulerForm { chi }
    }

    /// The opposite quiver (every arrow reversed, ids kept).
    pub fn reversed(&self) -> Quiver {
        let arrows = self
            .arrows
            .iter()
            .map(|a| Arrow {
                id: a.id.clone(),
                src: a.tgt,
                tgt: a.src,
            })
            .collect();
        Quiver::from_indexed(self.nodes.clone(), arrows).expect("reversal keeps ids valid")
    }

    /// One node `"1"` with loops named by `names`.
    pub fn loops(names: &[&str]) -> Arc<Quiver> {
        let arrows: Vec<(&str, &str, &str)> = names.iter().map(|n| (*n, "1", "1")).collect();
        Arc::new(Quiver::new(&["1"], &arrows).expect("valid loop quiver"))
    }

    /// The oriented 3-cycle `b:1→2, a:2→3, c:3→1`, arrows declared in order a, b, c.
    pub fn three_cycle() -> Arc<Quiver> {
        Arc::new(
            Quiver::new(
                &["1", "2", "3"],
                &[("a", "2", "3"), ("b", "1", "2"), ("c", "3", "1")],
            )
            .expect("valid 3-cycle"),
        )
    }

    /// `A2`: one arrow `a:1→2`.
    pub fn a2() -> Arc<Quiver> {
        Arc::new(Quiver::new(&["1", "2"], &[("a", "1", "2")]).expect("valid A2"))
    }

    /// Quiver from an integer matrix `b[i][j] = #(i→j) − #(j→i)` with numeric node ids `1..=n`.
    pub fn from_exchange_matrix(b: &[Vec<i64>]) -> Result<Quiver> {
        let n = b.len();
        let nodes: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        let mut arrows = Vec::new();
        for i in 0..n {
            if b[i].len() != n {
                return Err(Error::Input("exchange matrix is not square".into()));
            }
            for j in 0..n {
                if b[i][j] + b[j][i] != 0 {
                    return Err(Error::Input("exchange matrix is not skew-symmetric".into()));
                }
                for m in 0..b[i][j].max(0) {
                    arrows.push(Arrow {
                        id: format!("a{}_{}_{}", i + 1, j + 1, m + 1),
                        src: i,
                        tgt: j,
                    });
                }
            }
        }
        Quiver::from_indexed(nodes, arrows)
    }
}

/// Node-indexed nonnegative integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DimVector(pub Vec<usize>);

impl DimVector {
    pub fn new(q: &Quiver, entries: Vec<usize>) -> Result<Self> {
        if entries.len() != q.node_count() {
            return Err(Error::Input(format!(
                "dimension vector has {} entries, quiver has {} nodes",
                entries.len(),
                q.node_count()
            )));
        }
        Ok(DimVector(entries))
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn zero(n: usize) -> Self {
        DimVector(vec![0; n])
    }

    /// All vectors `w` with `0 ≤ w ≤ self` entrywise, in lexicographic order.
    pub fn below(&self) -> Vec<DimVector> {
        let mut out = vec![Vec::new()];
        for &d in &self.0 {
            let mut next = Vec::new();
            for prefix in &out {
                for k in 0..=d {
                    let mut p = prefix.clone();
                    p.push(k);
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(DimVector).collect()
    }
}

/// Arrow counts `chi(i,j) = #{a : i → j}` and the antisymmetrization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerForm {
    pub chi: Vec<Vec<i64>>,
}

impl EulerForm {
    pub fn n(&self) -> usize {
        self.chi.len()
    }

    pub fn chi(&self, i: usize, j: usize) -> i64 {
        self.chi[i][j]
    }

    /// `chibar(i,j) = chi(i,j) − chi(j,i)`.
    pub fn chibar(&self, i: usize, j: usize) -> i64 {
        self.chi[i][j] - self.chi[j][i]
    }

    /// Bilinear extension `chibar(v,w) = Σ v_i w_j chibar(i,j)`.
    pub fn chibar_vec(&self, v: &[i64], w: &[i64]) -> i64 {
        let mut s = 0;
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0 {
                continue;
            }
            for (j, &wj) in w.iter().enumerate() {
                s += vi * wj * self.chibar(i, j);
            }
        }
        s
    }

    /// The exchange matrix `B = chi − chiᵀ`.
    pub fn exchange_matrix(&self) -> Vec<Vec<i64>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.chibar(i, j)).collect())
            .collect()
    }

    pub fn from_exchange_matrix(b: &[Vec<i64>]) -> EulerForm {
        EulerForm {
            chi: b
                .iter()
                .map(|row| row.iter().map(|&x| x.max(0)).collect())
                .collect(),
        }
    }
}

/// Matrix mutation of a skew-symmetric exchange matrix at `k`.
pub fn mutate_exchange_matrix(b: &[Vec<i64>], k: usize) -> Vec<Vec<i64>> {
    let n = b.len();
    let mut out = b.to_vec();
    for i in 0..n {
        for j in 0..n {
            out[i][j] = if i == k || j == k {
                -b[i][j]
            } else {
                b[i][j] + b[i][k].signum() * (b[i][k] * b[k][j]).max(0)
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_and_two_cycle_flags() {
        assert_eq!(Quiver::three_cycle().has_loops_or_two_cycles(), (false, false));
        assert_eq!(Quiver::loops(&["t"]).has_loops_or_two_cycles(), (true, false));
        let q = Quiver::new(&["1", "3"], &[("e", "1", "3"), ("c", "3", "1")]).unwrap();
        assert_eq!(q.has_loops_or_two_cycles(), (false, true));
    }

    #[test]
    fn euler_forms_examples() {
        let e = Quiver::a2().euler_forms();
        assert_eq!(e.chi(0, 1), 1);
        assert_eq!(e.chibar(0, 1), 1);
        assert_eq!(e.chibar(1, 0), -1);
        let c = Quiver::three_cycle().euler_forms();
        let (n1, n2, n3) = (0, 1, 2);
        assert_eq!(c.chi(n1, n2), 1);
        assert_eq!(c.chi(n2, n3), 1);
        assert_eq!(c.chi(n3, n1), 1);
        assert_eq!(c.chi(n2, n1) + c.chi(n1, n3) + c.chi(n3, n2), 0);
        let empty = Quiver::new(&["1", "2"], &[] as &[(&str, &str, &str)]).unwrap();
        assert!(empty.euler_forms().chi.iter().flatten().all(|&x| x == 0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Quiver::new(&["1", "1"], &[] as &[(&str, &str, &str)]).is_err());
        assert!(Quiver::new(&["1"], &[("a", "1", "2")]).is_err());
        assert!(Quiver::new(&["1"], &[("a", "1", "1"), ("a", "1", "1")]).is_err());
    }

    #[test]
    fn reversal_transposes_chi() {
        let q = Quiver::three_cycle();
        let e = q.euler_forms();
        let r = q.reversed().euler_forms();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(e.chi(i, j), r.chi(j, i));
                assert_eq!(e.chibar(i, j), -e.chibar(j, i));
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let q = Quiver::three_cycle();
        let j = q.to_json();
        let s = serde_json::to_string(&j).unwrap();
        let back: QuiverJson = serde_json::from_str(&s).unwrap();
        assert_eq!(Quiver::from_json(&back).unwrap(), *q);
    }

    #[test]
    fn matrix_mutation_is_involutive() {
        let b = Quiver::three_cycle().euler_forms().exchange_matrix();
        for k in 0..3 {
            assert_eq!(mutate_exchange_matrix(&mutate_exchange_matrix(&b, k), k), b);
        }
    }

    #[test]
    fn dim_vectors_below() {
        let v = DimVector(vec![1, 2]);
        assert_eq!(v.below().len(), 6);
    }
}
