//! Cyclic potentials: series on canonical cyclic words.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quiver::Quiver;
use crate::series::{same_quiver, GrowthReport, Path, SeriesJson, TermJson, TruncSeries};
use crate::scalar::Scalar;

/// Lexicographically minimal rotation of a cyclic arrow word.
pub fn canonical_rotation(word: &[usize]) -> Vec<usize> {
    let n = word.len();
    let mut best = 0;
    for r in 1..n {
        for k in 0..n {
            let x = word[(r + k) % n];
            let y = word[(best + k) % n];
            if x != y {
                if x < y {
                    best = r;
                }
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&word[best..]);
    out.extend_from_slice(&word[..best]);
    out
}

/// Canonical representative of a closed path.
pub fn canonical_cycle(q: &Quiver, p: &Path) -> Path {
    if p.is_empty() {
        return p.clone();
    }
    let w = canonical_rotation(p.arrows());
    let s = q.arrow(w[0]).src;
    Path::raw(s, s, w)
}

/// Potential `Σ a_c c` over canonical cyclic words of length `≤ trunc`.
#[derive(Clone, PartialEq)]
pub struct CyclicPotential<K> {
    quiver: Arc<Quiver>,
    trunc: usize,
    terms: BTreeMap<Path, K>,
}

impl<K: Scalar> fmt::Debug for CyclicPotential<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CyclicPotential(N={}; ", self.trunc)?;
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{:?}·({})", c, p.display(&self.quiver))?;
        }
        write!(f, ")")
    }
}

impl<K: Scalar> CyclicPotential<K> {
    pub fn zero(quiver: Arc<Quiver>, trunc: usize) -> Self {
        CyclicPotential {
            quiver,
            trunc,
            terms: BTreeMap::new(),
        }
    }

    /// Parses cyclic words of arrow ids separated by spaces, e.g. `[("a c b", 1)]`.
    pub fn from_words(quiver: Arc<Quiver>, trunc: usize, words: &[(&str, K)]) -> Result<Self> {
        let mut s = Self::zero(quiver.clone(), trunc);
        for (w, c) in words {
            let ids: Vec<&str> = w.split_whitespace().collect();
            let p = Path::from_ids(&quiver, &ids, None)?;
            if !p.is_closed() {
                return Err(Error::Input(format!("word {w:?} is not a cycle")));
            }
            s.add_cycle(&p, c.clone());
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
        self.terms
            .get(&canonical_cycle(&self.quiver, p))
            .cloned()
            .unwrap_or_else(K::zero)
    }

    /// Adds `c·[p]` for a closed path `p`; open paths and over-long paths are ignored.
    pub fn add_cycle(&mut self, p: &Path, c: K) {
        if !p.is_closed() || p.len() > self.trunc || c.is_zero() {
            return;
        }
        let key = canonical_cycle(&self.quiver, p);
        let v = match self.terms.remove(&key) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(key, v);
        }
    }

    /// The cyclic projection π of a series.
    pub fn cyclic_class(f: &TruncSeries<K>) -> Self {
        let mut s = Self::zero(f.quiver().clone(), f.trunc());
        for (p, c) in f.terms() {
            s.add_cycle(p, c.clone());
        }
        s
    }

    /// The series whose terms are the canonical representatives.
    pub fn representative(&self) -> TruncSeries<K> {
        TruncSeries::from_terms(
            self.quiver.clone(),
            self.trunc,
            self.terms.iter().map(|(p, c)| (p.clone(), c.clone())),
        )
    }

    pub fn ord(&self) -> usize {
        self.terms
            .keys()
            .next()
            .map(|p| p.len())
            .unwrap_or(self.trunc + 1)
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.keys().next_back().map(|p| p.len())
    }

    pub fn degree_part(&self, d: usize) -> Self {
        self.filter(|p| p.len() == d)
    }

    pub fn jet(&self, r: usize) -> Self {
        self.filter(|p| p.len() <= r)
    }

    pub fn with_trunc(&self, m: usize) -> Self {
        let mut s = self.jet(m);
        s.trunc = m;
        s
    }

    pub fn filter<F: Fn(&Path) -> bool>(&self, keep: F) -> Self {
        CyclicPotential {
            quiver: self.quiver.clone(),
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .filter(|(p, _)| keep(p))
                .map(|(p, c)| (p.clone(), c.clone()))
                .collect(),
        }
    }

    /// True when some word contains arrow `a`.
    pub fn contains_arrow(&self, a: usize) -> bool {
        self.terms.keys().any(|p| p.arrows().contains(&a))
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !same_quiver(&self.quiver, &other.quiver) {
            return Err(Error::Mismatch("potentials over different quivers".into()));
        }
        if self.trunc != other.trunc {
            return Err(Error::Mismatch(format!(
                "truncation degrees differ ({} vs {})",
                self.trunc, other.trunc
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut s = self.clone();
        for (p, c) in &other.terms {
            s.add_cycle(p, c.clone());
        }
        Ok(s)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(&-K::one()))
    }

    pub fn scale(&self, c: &K) -> Self {
        let mut s = Self::zero(self.quiver.clone(), self.trunc);
        for (p, x) in &self.terms {
            s.add_cycle(p, x.clone() * c.clone());
        }
        s
    }

    pub fn map_coeffs<K2: Scalar, F: Fn(&K) -> K2>(&self, f: F) -> CyclicPotential<K2> {
        let mut s = CyclicPotential::zero(self.quiver.clone(), self.trunc);
        for (p, c) in &self.terms {
            s.add_cycle(p, f(c));
        }
        s
    }

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

    /// Cyclic derivative `D_a`: each occurrence of `a` rotated to the front and deleted.
    /// The result has truncation `trunc − 1`.
    pub fn cyclic_derivative(&self, a: usize) -> Result<TruncSeries<K>> {
        if a >= self.quiver.arrow_count() {
            return Err(Error::Input(format!("arrow index {a} out of range")));
        }
        let q = &self.quiver;
        let arrow = q.arrow(a);
        let mut out = TruncSeries::zero(q.clone(), self.trunc.saturating_sub(1));
        for (p, c) in &self.terms {
            let w = p.arrows();
            let n = w.len();
            for pos in (0..n).filter(|&i| w[i] == a) {
                let rest: Vec<usize> = (1..n).map(|k| w[(pos + k) % n]).collect();
                out.add_term(Path::raw(arrow.tgt, arrow.src, rest), c.clone());
            }
        }
        Ok(out)
    }

    /// All cyclic derivatives in arrow order.
    pub fn gradient(&self) -> Vec<TruncSeries<K>> {
        (0..self.quiver.arrow_count())
            .map(|a| self.cyclic_derivative(a).expect("arrow in range"))
            .collect()
    }

    pub fn growth_report(&self) -> GrowthReport {
        GrowthReport::from_coeffs(self.trunc, self.terms.iter().map(|(p, c)| (p.len(), c)))
    }

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            trunc: self.trunc,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| {
                    let (re, im) = c.format_parts();
                    TermJson {
                        path: None,
                        cycle: Some(p.ids(&self.quiver)),
                        node: p
                            .is_empty()
                            .then(|| self.quiver.node_id(p.src()).to_string()),
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
                .cycle
                .as_ref()
                .or(t.path.as_ref())
                .ok_or_else(|| Error::Input(format!("terms[{k}]: missing \"cycle\"")))?;
            let p = Path::from_ids(&quiver, ids, t.node.as_deref())
                .map_err(|e| Error::Input(format!("terms[{k}]: {e}")))?;
            if !p.is_closed() {
                return Err(Error::Input(format!("terms[{k}]: word is not a cycle")));
            }
            if p.len() > j.trunc {
                return Err(Error::Input(format!(
                    "terms[{k}]: cycle length {} exceeds truncation {}",
                    p.len(),
                    j.trunc
                )));
            }
            let c = K::parse_parts(&t.re, &t.im).map_err(|e| Error::Input(format!("terms[{k}]: {e}")))?;
            s.add_cycle(&p, c);
        }
        Ok(s)
    }

    /// Human-readable form such as `1·(a·c·b) + 2·(t·t·t)`.
    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|(p, c)| format!("{}·({})", fmt_coeff(c), p.display(&self.quiver)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

pub(crate) fn fmt_coeff<K: Scalar>(c: &K) -> String {
    let (re, im) = c.format_parts();
    if im == "0" {
        re
    } else {
        format!("({re}{}{im}i)", if im.starts_with('-') { "" } else { "+" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;
    use num_rational::BigRational as Q;
    use proptest::prelude::*;

    fn three() -> Arc<Quiver> {
        Quiver::three_cycle()
    }

    #[test]
    fn canonical_rotation_is_minimal() {
        assert_eq!(canonical_rotation(&[2, 1, 0]), vec![0, 2, 1]);
        assert_eq!(canonical_rotation(&[1, 0, 1, 0]), vec![0, 1, 0, 1]);
        assert_eq!(canonical_rotation(&[0, 0, 1, 0, 1]), vec![0, 0, 1, 0, 1]);
        assert_eq!(canonical_rotation(&[1, 0, 0, 1, 0]), vec![0, 0, 1, 0, 1]);
    }

    #[test]
    fn rotations_merge() {
        let q = three();
        let f = TruncSeries::<Q>::from_words(q.clone(), 3, &[("c b a", 1), ("b a c", 1)]).unwrap();
        let pot = CyclicPotential::cyclic_class(&f);
        assert_eq!(pot.len(), 1);
        assert_eq!(pot.terms().values().next().unwrap(), &qi(2));
        assert_eq!(pot.terms().keys().next().unwrap().display(&q), "a·c·b");
        let open = TruncSeries::<Q>::from_words(q, 3, &[("b a", 1)]).unwrap();
        assert!(CyclicPotential::cyclic_class(&open).is_zero());
    }

    #[test]
    fn derivative_examples() {
        let q = three();
        let abc = CyclicPotential::<Q>::from_words(q.clone(), 3, &[("c b a", qi(1))]).unwrap();
        let da = abc.cyclic_derivative(q.arrow_by_id("a").unwrap()).unwrap();
        assert_eq!(da, TruncSeries::from_words(q.clone(), 2, &[("c b", 1)]).unwrap());
        let t = Quiver::loops(&["t"]);
        let t3 = CyclicPotential::<Q>::from_words(t.clone(), 3, &[("t t t", qi(1))]).unwrap();
        assert_eq!(
            t3.cyclic_derivative(0).unwrap(),
            TruncSeries::from_words(t, 2, &[("t t", 3)]).unwrap()
        );
        let q2 = Quiver::loops(&["x", "y"]);
        let only_x = CyclicPotential::<Q>::from_words(q2, 4, &[("x x x", qi(2))]).unwrap();
        assert!(only_x.cyclic_derivative(1).unwrap().is_zero());
        assert!(only_x.cyclic_derivative(7).is_err());
    }

    #[test]
    fn json_round_trip() {
        let q = three();
        let p = CyclicPotential::<Q>::from_words(q.clone(), 6, &[("a c b", qi(1)), ("a c b a c b", qi(-3))]).unwrap();
        let back = CyclicPotential::<Q>::from_json(q, &p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    fn arb_series(n: usize) -> impl Strategy<Value = TruncSeries<Q>> {
        let quiver = Quiver::loops(&["x", "y", "z"]);
        proptest::collection::vec((proptest::collection::vec(0usize..3, 1..=n), -3i64..=3), 0..6)
            .prop_map(move |terms| {
                TruncSeries::from_terms(
                    quiver.clone(),
                    n,
                    terms.into_iter().map(|(w, c)| (Path::raw(0, 0, w), qi(c))),
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn commutators_vanish(f in arb_series(3), g in arb_series(3)) {
            let fg = &f.with_trunc(6) * &g.with_trunc(6);
            let gf = &g.with_trunc(6) * &f.with_trunc(6);
            let c = CyclicPotential::cyclic_class(&(&fg - &gf));
            prop_assert!(c.is_zero());
            for a in 0..3 {
                prop_assert!(c.cyclic_derivative(a).unwrap().is_zero());
            }
        }

        #[test]
        fn derivative_contains_rotated_rest(u in proptest::collection::vec(0usize..3, 0..3),
                                            v in proptest::collection::vec(0usize..3, 0..3),
                                            a in 0usize..3) {
            let q = Quiver::loops(&["x", "y", "z"]);
            let mut w = u.clone();
            w.push(a);
            w.extend(&v);
            let pot = CyclicPotential::<Q>::cyclic_class(&TruncSeries::monomial(q.clone(), 8, Path::raw(0, 0, w), qi(1)));
            let d = pot.cyclic_derivative(a).unwrap();
            let mut vu = v.clone();
            vu.extend(&u);
            let key = if vu.is_empty() { Path::idempotent(0) } else { Path::raw(0, 0, vu) };
            prop_assert!(!d.coeff(&key).is_zero());
        }
    }
}
