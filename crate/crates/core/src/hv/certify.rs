//! Hidden-variable decision with certificates.
//!
//! Feasible verdicts carry a joint distribution; infeasible verdicts carry an
//! extremal ray with negative expectation. The margin is the smallest
//! expectation over extremal rays normalized to unit mean, skipping
//! single-context indicators whose table entry is exactly zero (these are
//! structural zeros such as `p(-,-) = 0` for orthogonal projectors).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use super::cone::{enumerate_extremal_rays, make_primitive, ray_expectation, RayClass, RayFunction};
use super::model::{rationalize, AnyModel, JointDistribution, MarginalModel};
use super::scalar::{format_rational, rational_approx, Scalar};
use super::simplex::{solve, LpOutcome, StandardLp};
use super::structure::ContextStructure;
use crate::error::{Error, Result};

/// Default float-mode decision tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Structures up to this many observables get their rays enumerated when a
/// [`Certifier`] is built.
pub const RAY_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Exact(JointDistribution<BigRational>),
    Float(JointDistribution<f64>),
}

impl Witness {
    pub fn to_json(&self, s: &ContextStructure) -> Value {
        match self {
            Witness::Exact(j) => j.to_json(s),
            Witness::Float(j) => j.to_json(s),
        }
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        match self {
            Witness::Exact(j) => j.weights().iter().map(|w| w.to_f64_lossy()).collect(),
            Witness::Float(j) => j.weights().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub ray: RayFunction,
    pub expectation: f64,
    /// Present when the expectation was computed in exact arithmetic.
    pub exact: Option<BigRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HvCertificate {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub violated: Option<Violation>,
    /// Smallest normalized ray expectation, when known.
    pub margin: Option<f64>,
    /// Largest table change introduced by rationalizing a float model.
    pub rounding: Option<f64>,
}

impl HvCertificate {
    pub fn to_json(&self, s: &ContextStructure) -> Value {
        let mut v = json!({
            "verdict": self.verdict.as_str(),
            "margin": self.margin,
        });
        if let Some(w) = &self.witness {
            v["witness"] = w.to_json(s);
        }
        if let Some(viol) = &self.violated {
            v["violated"] = json!({
                "ray": viol.ray.to_json(),
                "expectation": viol.expectation,
            });
            if let Some(e) = &viol.exact {
                v["violated"]["expectation_exact"] = json!(format_rational(e));
            }
        }
        if let Some(r) = self.rounding {
            v["rounding"] = json!(r);
        }
        v
    }
}

/// Decision engine for one structure, holding its extremal rays when the
/// structure is small enough to enumerate.
#[derive(Debug, Clone)]
pub struct Certifier {
    structure: ContextStructure,
    rays: Option<Vec<RayFunction>>,
}

impl Certifier {
    pub fn new(structure: ContextStructure) -> Result<Self> {
        structure.check_scale()?;
        let rays = if structure.n() <= RAY_LIMIT {
            Some(enumerate_extremal_rays(&structure)?)
        } else {
            None
        };
        Ok(Certifier { structure, rays })
    }

    /// Uses precomputed rays (they must belong to `structure`).
    pub fn with_rays(structure: ContextStructure, rays: Vec<RayFunction>) -> Result<Self> {
        if rays.iter().any(|r| *r.structure() != structure) {
            return Err(Error::StructureMismatch);
        }
        Ok(Certifier {
            structure,
            rays: Some(rays),
        })
    }

    pub fn structure(&self) -> &ContextStructure {
        &self.structure
    }

    pub fn rays(&self) -> Option<&[RayFunction]> {
        self.rays.as_deref()
    }

    fn check<T: Scalar>(&self, m: &MarginalModel<T>) -> Result<()> {
        if *m.structure() != self.structure {
            Err(Error::StructureMismatch)
        } else {
            Ok(())
        }
    }

    /// Smallest normalized expectation and the ray attaining it.
    fn ray_margin<T: Scalar>(&self, m: &MarginalModel<T>) -> Option<(T, &RayFunction)> {
        let rays = self.rays.as_ref()?;
        let trivial = trivial_zero_mask(&self.structure, m);
        let mut best: Option<(T, &RayFunction)> = None;
        for r in rays {
            if r.class() == RayClass::Trivial && trivial.iter().any(|t| t.as_slice() == r.coefficients()) {
                continue;
            }
            let e = ray_expectation(r, m).expect("same structure") / T::from_bigint(r.constant());
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, r));
            }
        }
        best
    }

    /// Exact decision on a rational model.
    pub fn exact(&self, m: &MarginalModel<BigRational>) -> Result<HvCertificate> {
        self.check(m)?;
        let margin = self.ray_margin(m).map(|(e, _)| e.to_f64_lossy());
        match feasibility_lp(m) {
            Some(w) => {
                let joint = JointDistribution::new(self.structure.n(), w)?;
                if !joint.residual(m)?.is_zero() {
                    return Err(Error::Solver("exact witness fails to reproduce the model".into()));
                }
                Ok(HvCertificate {
                    verdict: Verdict::Feasible,
                    witness: Some(Witness::Exact(joint)),
                    violated: None,
                    margin,
                    rounding: None,
                })
            }
            None => {
                let (ray, value) = violated_ray(m)?;
                let e = ray_expectation(&ray, m)?;
                if !e.is_negative() {
                    return Err(Error::Solver("separating ray has nonnegative expectation".into()));
                }
                debug_assert_eq!(e.clone() / BigRational::from_integer(ray.constant().clone()), value);
                Ok(HvCertificate {
                    verdict: Verdict::Infeasible,
                    margin: Some(value.to_f64_lossy()),
                    witness: None,
                    violated: Some(Violation {
                        expectation: e.to_f64_lossy(),
                        exact: Some(e),
                        ray,
                    }),
                    rounding: None,
                })
            }
        }
    }

    /// Float decision: verdicts within `tol` of the boundary are
    /// indeterminate.
    pub fn float(&self, m: &MarginalModel<f64>, tol: f64) -> Result<HvCertificate> {
        self.check(m)?;
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        if let Some((margin, ray)) = self.ray_margin(m) {
            let mut cert = HvCertificate {
                verdict: Verdict::Indeterminate,
                witness: None,
                violated: None,
                margin: Some(margin),
                rounding: None,
            };
            if margin > tol {
                cert.verdict = Verdict::Feasible;
                cert.witness = float_witness(m, tol)?.map(Witness::Float);
                if cert.witness.is_none() {
                    cert.verdict = Verdict::Indeterminate;
                }
            } else if margin < -tol {
                cert.verdict = Verdict::Infeasible;
                cert.violated = Some(Violation {
                    ray: ray.clone(),
                    expectation: ray_expectation(ray, m)?,
                    exact: None,
                });
            }
            return Ok(cert);
        }

        // no ray list: fall back on the feasibility residual
        match float_witness(m, tol)? {
            Some(w) => Ok(HvCertificate {
                verdict: Verdict::Feasible,
                witness: Some(Witness::Float(w)),
                violated: None,
                margin: None,
                rounding: None,
            }),
            None => {
                let violated = float_violated_ray(m)?;
                let margin = violated
                    .as_ref()
                    .map(|v| v.expectation / v.ray.constant().to_f64().unwrap_or(f64::NAN));
                let verdict = match margin {
                    Some(x) if x < -tol => Verdict::Infeasible,
                    _ => Verdict::Indeterminate,
                };
                Ok(HvCertificate {
                    verdict,
                    witness: None,
                    violated: violated.filter(|_| verdict == Verdict::Infeasible),
                    margin,
                    rounding: None,
                })
            }
        }
    }

    /// Exact decision for a float model whose true entries are only known to
    /// within `radius`.
    ///
    /// The model is rationalized, decided exactly, and the verdict is kept
    /// only if it survives every perturbation of the tables by `radius` plus
    /// the rounding introduced. Exactly zero entries are taken as exact, and
    /// a model whose rationalization converts back to the same floats is
    /// decided exactly.
    pub fn interval(&self, m: &MarginalModel<f64>, radius: f64) -> Result<HvCertificate> {
        self.check(m)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        let (q, dev) = rationalize(m, radius)?;
        let eps = radius + dev;
        let mut cert = self.exact(&q)?;
        cert.rounding = Some(dev);
        if dev == 0.0 {
            return Ok(cert);
        }
        match cert.verdict {
            Verdict::Infeasible => {
                let v = cert.violated.as_ref().expect("infeasible carries a ray");
                if v.expectation + eps * sensitivity(&v.ray) >= 0.0 {
                    cert.verdict = Verdict::Indeterminate;
                }
            }
            Verdict::Feasible => {
                let robust = match &self.rays {
                    Some(rays) => {
                        let trivial = trivial_zero_mask(&self.structure, &q);
                        rays.iter()
                            .filter(|r| {
                                !(r.class() == RayClass::Trivial
                                    && trivial.iter().any(|t| t.as_slice() == r.coefficients()))
                            })
                            .all(|r| {
                                ray_expectation(r, &q).expect("same structure").to_f64_lossy()
                                    - eps * sensitivity(r)
                                    > 0.0
                            })
                    }
                    None => false,
                };
                if !robust {
                    cert.verdict = Verdict::Indeterminate;
                }
            }
            Verdict::Indeterminate => {}
        }
        Ok(cert)
    }

    pub fn certify(&self, m: &AnyModel, mode: Mode, tol: f64) -> Result<HvCertificate> {
        match (mode, m) {
            (Mode::Exact, AnyModel::Exact(q)) => self.exact(q),
            (Mode::Exact, AnyModel::Float(f)) => self.interval(f, tol),
            (Mode::Float, _) => self.float(&m.to_f64(), tol),
        }
    }
}

/// Decides a model, enumerating rays for its structure as needed.
///
/// Exact mode on a float model rationalizes it with `tol` as the interval
/// radius; float mode treats `tol` as the decision tolerance.
pub fn lp_feasible(m: &AnyModel, mode: Mode, tol: f64) -> Result<HvCertificate> {
    Certifier::new(m.structure().clone())?.certify(m, mode, tol)
}

/// Upper bound on `|<F>|` change per unit table perturbation.
fn sensitivity(r: &RayFunction) -> f64 {
    let s = r.structure();
    s.monomials()
        .iter()
        .zip(r.coefficients())
        .skip(1)
        .map(|(mono, c)| {
            let ctx = s.context_of(mono).expect("monomial in a context");
            c.abs().to_f64().unwrap_or(f64::INFINITY) * s.num_outcomes(ctx) as f64
        })
        .sum()
}

/// Coefficient vectors of outcome indicators whose model entry is zero.
fn trivial_zero_mask<T: Scalar>(s: &ContextStructure, m: &MarginalModel<T>) -> Vec<Vec<BigInt>> {
    let indicators = super::cone::trivial_rays(s);
    let mut k = 0;
    let mut out = Vec::new();
    for c in 0..s.contexts().len() {
        for o in 0..s.num_outcomes(c) {
            if m.table(c)[o].is_zero() {
                out.push(indicators[k].clone());
            }
            k += 1;
        }
    }
    out
}

fn feasibility_rows<T: Scalar>(m: &MarginalModel<T>) -> StandardLp<T> {
    let s = m.structure();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for c in 0..s.contexts().len() {
        for o in 0..s.num_outcomes(c) {
            a.push(
                (0..s.num_assignments())
                    .map(|x| if s.outcome_of(c, x) == o { T::one() } else { T::zero() })
                    .collect(),
            );
            b.push(m.table(c)[o].clone());
        }
    }
    StandardLp {
        a,
        b,
        c: vec![T::zero(); s.num_assignments()],
    }
}

/// Joint weights reproducing `m`, if any.
fn feasibility_lp<T: Scalar>(m: &MarginalModel<T>) -> Option<Vec<T>> {
    match solve(&feasibility_rows(m)) {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

fn float_witness(m: &MarginalModel<f64>, tol: f64) -> Result<Option<JointDistribution<f64>>> {
    let Some(mut w) = feasibility_lp(m) else {
        return Ok(None);
    };
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Ok(None);
    }
    for x in w.iter_mut() {
        *x /= sum;
    }
    let joint = JointDistribution::new(m.structure().n(), w)?;
    if joint.residual(m)? > tol {
        return Ok(None);
    }
    Ok(Some(joint))
}

/// LP over function values `F(a) >= 0` with `F` in the monomial span and
/// mean 1, minimizing `<F>`. Basic optima are extremal rays.
fn ray_lp<T: Scalar>(m: &MarginalModel<T>) -> (StandardLp<T>, Vec<usize>) {
    let s = m.structure();
    let n = s.n();
    let size = s.num_assignments();
    let in_span: Vec<usize> = s
        .monomials()
        .iter()
        .map(|mono| mono.iter().map(|i| 1usize << i).sum())
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for t in 0..size {
        if in_span.contains(&t) {
            continue;
        }
        a.push(
            (0..size)
                .map(|x| if (x & t).count_ones() % 2 == 0 { T::one() } else { -T::one() })
                .collect(),
        );
        b.push(T::zero());
    }
    a.push(vec![T::one(); size]);
    b.push(T::from_usize(size).unwrap());
    let moments = m.moments();
    let scale = T::one() / T::from_usize(1 << n).unwrap();
    let c = (0..size)
        .map(|x| {
            in_span
                .iter()
                .zip(&moments)
                .fold(T::zero(), |acc, (&mask, mu)| {
                    if (x & mask).count_ones() % 2 == 0 {
                        acc + mu.clone()
                    } else {
                        acc - mu.clone()
                    }
                })
                * scale.clone()
        })
        .collect();
    (StandardLp { a, b, c }, in_span)
}

fn coefficients_from_values<T: Scalar>(f: &[T], in_span: &[usize]) -> Vec<T> {
    let scale = T::one() / T::from_usize(f.len()).unwrap();
    in_span
        .iter()
        .map(|&mask| {
            f.iter().enumerate().fold(T::zero(), |acc, (x, v)| {
                if (x & mask).count_ones() % 2 == 0 {
                    acc + v.clone()
                } else {
                    acc - v.clone()
                }
            }) * scale.clone()
        })
        .collect()
}

fn integer_ray(s: &ContextStructure, coeffs: &[BigRational]) -> Result<RayFunction> {
    let lcm = coeffs.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let mut v: Vec<BigInt> = coeffs
        .iter()
        .map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    make_primitive(&mut v);
    RayFunction::new(s.clone(), v)
}

/// Extremal ray minimizing the normalized expectation, with that value.
fn violated_ray(m: &MarginalModel<BigRational>) -> Result<(RayFunction, BigRational)> {
    let (lp, in_span) = ray_lp(m);
    match solve(&lp) {
        LpOutcome::Optimal { x, value } => {
            let coeffs = coefficients_from_values(&x, &in_span);
            Ok((integer_ray(m.structure(), &coeffs)?, value))
        }
        other => Err(Error::Solver(format!("separating LP failed: {other:?}"))),
    }
}

/// Float version of [`violated_ray`], rounding the optimal vertex to a
/// rational ray. `None` when the rounding is not a valid cone element.
fn float_violated_ray(m: &MarginalModel<f64>) -> Result<Option<Violation>> {
    let (lp, in_span) = ray_lp(m);
    let LpOutcome::Optimal { x, .. } = solve(&lp) else {
        return Ok(None);
    };
    let coeffs = coefficients_from_values(&x, &in_span);
    let rational: Option<Vec<BigRational>> =
        coeffs.iter().map(|&c| rational_approx(c, 1e-9)).collect();
    let Some(rational) = rational else {
        return Ok(None);
    };
    let Ok(ray) = integer_ray(m.structure(), &rational) else {
        return Ok(None);
    };
    let expectation = ray_expectation(&ray, m)?;
    Ok(Some(Violation {
        ray,
        expectation,
        exact: None,
    }))
}
