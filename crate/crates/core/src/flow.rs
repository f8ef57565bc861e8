//! Flows of time-dependent derivations at truncated order (Moser's trick).
//!
//! A field `F_b(z, t)` generates `u̇_b = F_b(u, t)` with `u(z, 0) = z`; the solution is
//! an endomorphism `H_t: b ↦ u_b(z, t)`. Along a field with `Θ_#(F_t) = −Θ̇_t` the
//! potential `H_t(Θ_t)` stays constant.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::endo::Endomorphism;
use crate::error::{Error, Result};
use crate::jacobi::tangent_solve;
use crate::potential::CyclicPotential;
use crate::quiver::Quiver;
use crate::scalar::Scalar;
use crate::series::{Path, TruncSeries};

/// A time-dependent family of derivations `b ↦ F_b(z, t)` with `ord F_b ≥ 1`.
pub trait VectorField: Sync {
    fn quiver(&self) -> &Arc<Quiver>;
    fn trunc(&self) -> usize;
    fn eval(&self, t: f64) -> Result<Vec<TruncSeries<Complex64>>>;
}

/// `F_b(z, t) = Σ_w λ_{b,w}(t)·w` with polynomial coefficients `λ_{b,w}(t) = Σ_k c_k t^k`.
#[derive(Clone, Debug)]
pub struct DerivationFamily {
    quiver: Arc<Quiver>,
    trunc: usize,
    terms: Vec<Vec<(Path, Vec<Complex64>)>>,
}

/// `{"trunc": N, "arrows": {"z": [{"path": ["z","z"], "re": [1, 0.5], "im": []}]}}`;
/// `re[k]`, `im[k]` are the coefficients of `t^k`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DerivationFamilyJson {
    pub trunc: usize,
    pub arrows: BTreeMap<String, Vec<FieldTermJson>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldTermJson {
    pub path: Vec<String>,
    #[serde(default)]
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl DerivationFamily {
    pub fn zero(quiver: Arc<Quiver>, trunc: usize) -> Self {
        let terms = vec![Vec::new(); quiver.arrow_count()];
        DerivationFamily {
            quiver,
            trunc,
            terms,
        }
    }

    /// Adds `poly(t)·w` to `F_b`; `w` must be parallel to `b` with `1 ≤ |w| ≤ N`.
    pub fn add_term(&mut self, b: usize, w: Path, poly: Vec<Complex64>) -> Result<()> {
        let ar = self.quiver.arrow(b);
        if w.is_empty() || w.len() > self.trunc {
            return Err(Error::Input(format!(
                "field term for {:?} has length {} outside 1..={}",
                ar.id,
                w.len(),
                self.trunc
            )));
        }
        if w.src() != ar.src || w.tgt() != ar.tgt {
            return Err(Error::Input(format!(
                "field term {} is not parallel to {:?}",
                w.display(&self.quiver),
                ar.id
            )));
        }
        self.terms[b].push((w, poly));
        Ok(())
    }

    /// A time-independent field.
    pub fn constant(images: &[TruncSeries<Complex64>]) -> Result<Self> {
        let q = images
            .first()
            .map(|s| s.quiver().clone())
            .ok_or_else(|| Error::Input("empty field".into()))?;
        let mut f = Self::zero(q, images[0].trunc());
        for (b, s) in images.iter().enumerate() {
            for (p, c) in s.terms() {
                f.add_term(b, p.clone(), vec![*c])?;
            }
        }
        Ok(f)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for list in &mut out.terms {
            for (_, poly) in list.iter_mut() {
                for x in poly.iter_mut() {
                    *x *= c;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> DerivationFamilyJson {
        let mut arrows = BTreeMap::new();
        for (b, list) in self.terms.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            arrows.insert(
                self.quiver.arrow(b).id.clone(),
                list.iter()
                    .map(|(w, poly)| FieldTermJson {
                        path: w.ids(&self.quiver),
                        re: poly.iter().map(|c| c.re).collect(),
                        im: poly.iter().map(|c| c.im).collect(),
                    })
                    .collect(),
            );
        }
        DerivationFamilyJson {
            trunc: self.trunc,
            arrows,
        }
    }

    pub fn from_json(quiver: Arc<Quiver>, j: &DerivationFamilyJson) -> Result<Self> {
        let mut f = Self::zero(quiver.clone(), j.trunc);
        for (id, list) in &j.arrows {
            let b = quiver.arrow_by_id(id)?;
            for (k, t) in list.iter().enumerate() {
                let w = Path::from_ids(&quiver, &t.path, None)
                    .map_err(|e| Error::Input(format!("arrows.{id}[{k}]: {e}")))?;
                let len = t.re.len().max(t.im.len());
                let poly = (0..len)
                    .map(|i| {
                        Complex64::new(
                            t.re.get(i).copied().unwrap_or(0.0),
                            t.im.get(i).copied().unwrap_or(0.0),
                        )
                    })
                    .collect();
                f.add_term(b, w, poly)
                    .map_err(|e| Error::Input(format!("arrows.{id}[{k}]: {e}")))?;
            }
        }
        Ok(f)
    }
}

impl VectorField for DerivationFamily {
    fn quiver(&self) -> &Arc<Quiver> {
        &self.quiver
    }

    fn trunc(&self) -> usize {
        self.trunc
    }

    fn eval(&self, t: f64) -> Result<Vec<TruncSeries<Complex64>>> {
        Ok(self
            .terms
            .iter()
            .map(|list| {
                let mut s = TruncSeries::zero(self.quiver.clone(), self.trunc);
                for (w, poly) in list {
                    let v = poly
                        .iter()
                        .rev()
                        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c);
                    s.add_term(w.clone(), v);
                }
                s
            })
            .collect())
    }
}

/// The Moser field of the affine family `Θ_t = θ₀ + t·θ₁`: at each time it solves
/// `π(Σ_a ξ(a)·D_aΘ_t) = −θ₁` exactly, with `t` read as the rational it represents.
#[derive(Clone, Debug)]
pub struct TangentField {
    theta0: CyclicPotential<BigRational>,
    theta1: CyclicPotential<BigRational>,
}

impl TangentField {
    pub fn new(
        theta0: CyclicPotential<BigRational>,
        theta1: CyclicPotential<BigRational>,
    ) -> Result<Self> {
        theta0.check_compatible(&theta1)?;
        Ok(TangentField { theta0, theta1 })
    }

    pub fn theta_at(&self, t: f64) -> Result<CyclicPotential<BigRational>> {
        if !t.is_finite() {
            return Err(Error::Input(format!("time {t} is not finite")));
        }
        let tq = <BigRational as Scalar>::from_f64(t);
        self.theta0.try_add(&self.theta1.scale(&tq))
    }

    /// The exact solution `ξ_t` at time `t`.
    pub fn solve_at(&self, t: f64) -> Result<Vec<TruncSeries<BigRational>>> {
        let theta = self.theta_at(t)?;
        tangent_solve(&theta, &self.theta1.scale(&-<BigRational as Scalar>::one()))
    }
}

impl VectorField for TangentField {
    fn quiver(&self) -> &Arc<Quiver> {
        self.theta0.quiver()
    }

    fn trunc(&self) -> usize {
        self.theta0.trunc()
    }

    fn eval(&self, t: f64) -> Result<Vec<TruncSeries<Complex64>>> {
        Ok(self
            .solve_at(t)?
            .iter()
            .map(|s| s.map_coeffs(|c| c.to_complex64()))
            .collect())
    }
}

/// Time and endomorphism of an integrated flow.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub endo: Endomorphism<Complex64>,
}

fn rhs(field: &dyn VectorField, t: f64, u: &Endomorphism<Complex64>) -> Result<Endomorphism<Complex64>> {
    let images = field
        .eval(t)?
        .iter()
        .map(|f| u.apply_unchecked(f))
        .collect();
    Ok(Endomorphism::from_images_unchecked(
        field.quiver().clone(),
        field.trunc(),
        images,
    ))
}

fn rk4_step(
    field: &dyn VectorField,
    t: f64,
    h: f64,
    u: &Endomorphism<Complex64>,
) -> Result<Endomorphism<Complex64>> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let k1 = rhs(field, t, u)?;
    let k2 = rhs(field, t + h / 2.0, &Endomorphism::linear_combination(&[(c(1.0), u), (c(h / 2.0), &k1)]))?;
    let k3 = rhs(field, t + h / 2.0, &Endomorphism::linear_combination(&[(c(1.0), u), (c(h / 2.0), &k2)]))?;
    let k4 = rhs(field, t + h, &Endomorphism::linear_combination(&[(c(1.0), u), (c(h), &k3)]))?;
    Ok(Endomorphism::linear_combination(&[
        (c(1.0), u),
        (c(h / 6.0), &k1),
        (c(h / 3.0), &k2),
        (c(h / 3.0), &k3),
        (c(h / 6.0), &k4),
    ]))
}

/// Classical RK4 from the identity at `t0` to `t1` in `steps` equal steps.
pub fn integrate(field: &dyn VectorField, t0: f64, t1: f64, steps: usize) -> Result<FlowState> {
    Ok(integrate_recording(field, t0, t1, steps, &[])?
        .pop()
        .expect("final state is always recorded"))
}

/// Like [`integrate`], also returning the states at the grid times (snapped to the
/// nearest step); the final state is last.
pub fn integrate_recording(
    field: &dyn VectorField,
    t0: f64,
    t1: f64,
    steps: usize,
    grid: &[f64],
) -> Result<Vec<FlowState>> {
    if steps == 0 {
        return Err(Error::Input("at least one step is required".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let snap = |t: f64| -> usize {
        if h == 0.0 {
            0
        } else {
            (((t - t0) / h).round().max(0.0) as usize).min(steps)
        }
    };
    let mut wanted: Vec<usize> = grid.iter().map(|&t| snap(t)).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let mut u = Endomorphism::identity(field.quiver().clone(), field.trunc());
    let mut out = Vec::new();
    let mut next = 0;
    for i in 0..=steps {
        while next < wanted.len() && wanted[next] == i {
            out.push(FlowState {
                t: t0 + h * i as f64,
                endo: u.clone(),
            });
            next += 1;
        }
        if i < steps {
            u = rk4_step(field, t0 + h * i as f64, h, &u)?;
        }
    }
    out.push(FlowState { t: t1, endo: u });
    Ok(out)
}

/// Largest coefficient deviation of `H_t(Θ_t)` from its value at `t0`, over the grid.
pub fn conservation_check(
    theta: &dyn Fn(f64) -> Result<CyclicPotential<Complex64>>,
    field: &dyn VectorField,
    t0: f64,
    t1: f64,
    steps: usize,
    grid: &[f64],
) -> Result<f64> {
    let start = theta(t0)?;
    let mut worst: f64 = 0.0;
    for state in integrate_recording(field, t0, t1, steps, grid)? {
        let moved = state.endo.apply_potential(&theta(state.t)?)?;
        worst = worst.max(moved.max_abs_diff(&start));
    }
    Ok(worst)
}

/// Step-halving diagnostic: differences between solutions at `n`, `2n`, `4n` steps and
/// their ratio, which approaches `2⁴ = 16` for a fourth-order method.
#[derive(Clone, Debug, Serialize)]
pub struct HalvingReport {
    pub steps: usize,
    pub coarse_diff: f64,
    pub fine_diff: f64,
    pub ratio: f64,
}

pub fn step_halving(field: &dyn VectorField, t0: f64, t1: f64, steps: usize) -> Result<HalvingReport> {
    let a = integrate(field, t0, t1, steps)?.endo;
    let b = integrate(field, t0, t1, 2 * steps)?.endo;
    let c = integrate(field, t0, t1, 4 * steps)?.endo;
    let coarse = a.max_abs_diff(&b);
    let fine = b.max_abs_diff(&c);
    Ok(HalvingReport {
        steps,
        coarse_diff: coarse,
        fine_diff: fine,
        ratio: coarse / fine,
    })
}

/// Converts an exact potential to complex floats.
pub fn to_complex(phi: &CyclicPotential<BigRational>) -> CyclicPotential<Complex64> {
    phi.map_coeffs(|c| c.to_complex64())
}
