//! The cone of nonnegative functions `F(a) = sum_I f_I(a_I)` spanned by
//! context monomials, and exact enumeration of its extremal rays.
//!
//! Rays are stored as primitive integer coefficient vectors on the
//! structure's monomial basis. A ray is trivial when it is (a multiple of)
//! the outcome indicator `prod_{i in I} (1 + o_i a_i)` of a single context.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Map, Value};
use std::cmp::Ordering;

use super::model::MarginalModel;
use super::scalar::Scalar;
use super::structure::ContextStructure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RayClass {
    Trivial,
    Nontrivial,
}

impl RayClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RayClass::Trivial => "trivial",
            RayClass::Nontrivial => "nontrivial",
        }
    }
}

/// An element of the cone with primitive integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RayFunction {
    structure: ContextStructure,
    coefficients: Vec<BigInt>,
    values: Vec<BigInt>,
    class: RayClass,
}

/// Divides by the gcd of the entries (the sign is kept).
pub fn make_primitive(v: &mut [BigInt]) {
    let g = v.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in v.iter_mut() {
            *x = &*x / &g;
        }
    }
}

fn values_of(s: &ContextStructure, coeffs: &[BigInt]) -> Vec<BigInt> {
    (0..s.num_assignments())
        .map(|a| {
            s.monomials()
                .iter()
                .zip(coeffs)
                .fold(BigInt::zero(), |acc, (m, c)| {
                    if ContextStructure::character(a, m) > 0 {
                        acc + c
                    } else {
                        acc - c
                    }
                })
        })
        .collect()
}

/// Coefficients of the outcome indicators `prod (1 + o_i a_i)`, one per
/// (context, outcome), made primitive.
pub fn trivial_rays(s: &ContextStructure) -> Vec<Vec<BigInt>> {
    let mut out = Vec::new();
    for (c, ctx) in s.contexts().iter().enumerate() {
        for o in 0..s.num_outcomes(c) {
            let mut coeffs = vec![BigInt::zero(); s.monomials().len()];
            for mask in 0u32..(1 << ctx.len()) {
                let mut mono: Vec<usize> = (0..ctx.len())
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| ctx[b])
                    .collect();
                let sign = s.outcome_character(c, o, &mono);
                mono.sort_unstable();
                let k = s.monomial_index(&mono).expect("context subset is a monomial");
                coeffs[k] += BigInt::from(sign);
            }
            make_primitive(&mut coeffs);
            out.push(coeffs);
        }
    }
    out
}

impl RayFunction {
    /// Builds a ray from coefficients, checking nonnegativity on every
    /// assignment. Coefficients are made primitive and classified.
    pub fn new(structure: ContextStructure, mut coefficients: Vec<BigInt>) -> Result<Self> {
        if coefficients.len() != structure.monomials().len() {
            return Err(Error::StructureMismatch);
        }
        make_primitive(&mut coefficients);
        let values = values_of(&structure, &coefficients);
        if values.iter().any(|v| v.is_negative()) {
            return Err(Error::InvalidArgument(
                "function is negative on some assignment".into(),
            ));
        }
        if values.iter().all(|v| v.is_zero()) {
            return Err(Error::InvalidArgument("zero function".into()));
        }
        let class = if trivial_rays(&structure).contains(&coefficients) {
            RayClass::Trivial
        } else {
            RayClass::Nontrivial
        };
        Ok(RayFunction {
            structure,
            coefficients,
            values,
            class,
        })
    }

    /// Coefficients given by monomial name, e.g. `[("1", 3), ("a0a1", 1)]`.
    pub fn from_named(structure: ContextStructure, named: &[(&str, i64)]) -> Result<Self> {
        let mut coeffs = vec![BigInt::zero(); structure.monomials().len()];
        for (name, v) in named {
            let k = structure
                .parse_monomial(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown monomial {name}")))?;
            coeffs[k] += BigInt::from(*v);
        }
        Self::new(structure, coeffs)
    }

    pub fn structure(&self) -> &ContextStructure {
        &self.structure
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coefficients
    }

    /// Values on all `2^n` assignments.
    pub fn values(&self) -> &[BigInt] {
        &self.values
    }

    pub fn class(&self) -> RayClass {
        self.class
    }

    pub fn coefficient(&self, name: &str) -> Option<&BigInt> {
        self.structure
            .parse_monomial(name)
            .map(|k| &self.coefficients[k])
    }

    /// Constant coefficient, which is the mean of `F` over assignments.
    pub fn constant(&self) -> &BigInt {
        &self.coefficients[0]
    }

    /// Applies `a_i -> -a_i` for `i` in `set`.
    pub fn flip(&self, set: &[usize]) -> RayFunction {
        let coefficients = self
            .structure
            .monomials()
            .iter()
            .zip(&self.coefficients)
            .map(|(m, c)| {
                let odd = m.iter().filter(|i| set.contains(i)).count() % 2 == 1;
                if odd {
                    -c
                } else {
                    c.clone()
                }
            })
            .collect();
        RayFunction::new(self.structure.clone(), coefficients).expect("flips preserve the cone")
    }

    /// Assignments where the function vanishes.
    pub fn zero_set(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_zero())
            .map(|(a, _)| a)
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let mut coeffs = Map::new();
        for (k, c) in self.coefficients.iter().enumerate() {
            if !c.is_zero() {
                let v = match i64::try_from(c) {
                    Ok(i) => json!(i),
                    Err(_) => json!(c.to_string()),
                };
                coeffs.insert(self.structure.monomial_name(k), v);
            }
        }
        json!({
            "n": self.structure.n(),
            "contexts": self.structure.contexts(),
            "coeffs": coeffs,
            "class": self.class.as_str(),
        })
    }

    /// Parses ray JSON. The structure comes from the document when present,
    /// otherwise from `fallback`.
    pub fn from_json(v: &Value, fallback: Option<&ContextStructure>) -> Result<Self> {
        let structure = match (v.get("n"), v.get("contexts")) {
            (Some(n), Some(c)) => serde_json::from_value(json!({"n": n, "contexts": c}))
                .map_err(|e| Error::InvalidStructure(e.to_string()))?,
            _ => fallback
                .cloned()
                .ok_or_else(|| Error::InvalidArgument("ray JSON without a structure".into()))?,
        };
        if let Some(fb) = fallback {
            if *fb != structure {
                return Err(Error::StructureMismatch);
            }
        }
        let obj = v
            .get("coeffs")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidArgument("ray JSON without \"coeffs\"".into()))?;
        let mut coeffs = vec![BigInt::zero(); structure.monomials().len()];
        for (name, val) in obj {
            let k = structure
                .parse_monomial(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown monomial {name}")))?;
            let c: BigInt = match val {
                Value::Number(n) => n
                    .as_i64()
                    .map(BigInt::from)
                    .ok_or_else(|| Error::InvalidArgument(format!("non-integer coefficient {n}")))?,
                Value::String(s) => s
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad coefficient {s:?}")))?,
                other => return Err(Error::InvalidArgument(format!("bad coefficient {other}"))),
            };
            coeffs[k] = c;
        }
        let ray = RayFunction::new(structure, coeffs)?;
        if let Some(cls) = v.get("class").and_then(Value::as_str) {
            if cls != ray.class.as_str() {
                return Err(Error::InvalidArgument(format!(
                    "declared class {cls} but the ray is {}",
                    ray.class.as_str()
                )));
            }
        }
        Ok(ray)
    }
}

/// `<F> = sum_S c_S <a_S>` under the model.
pub fn ray_expectation<T: Scalar>(r: &RayFunction, m: &MarginalModel<T>) -> Result<T> {
    if r.structure() != m.structure() {
        return Err(Error::StructureMismatch);
    }
    Ok(m.moments()
        .into_iter()
        .zip(r.coefficients())
        .fold(T::zero(), |acc, (mu, c)| acc + T::from_bigint(c) * mu))
}

/// Expectation divided by the constant coefficient (mean value of `F`).
pub fn normalized_expectation<T: Scalar>(r: &RayFunction, m: &MarginalModel<T>) -> Result<T> {
    Ok(ray_expectation(r, m)? / T::from_bigint(r.constant()))
}

fn to_rational_rows(rows: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| BigRational::from_integer(v.into())).collect())
        .collect()
}

/// Rank by exact Gaussian elimination.
pub fn rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in (r + 1)..m.len() {
            if m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone() / pivot.clone();
            for j in c..cols {
                let delta = f.clone() * m[r][j].clone();
                m[i][j] -= delta;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Extremality test: the rows `chi(a)` for `a` in the zero set of `F` have
/// rank `d - 1`, with `d` the dimension of the monomial span.
pub fn is_extremal(r: &RayFunction) -> bool {
    let s = r.structure();
    let all = s.character_rows();
    let zero: Vec<Vec<i64>> = r.zero_set().into_iter().map(|a| all[a].clone()).collect();
    if zero.is_empty() {
        return s.monomials().len() == 1;
    }
    rank(&to_rational_rows(&zero)) == s.monomials().len() - 1
}

/// Bitset over constraint indices.
#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn contains_all(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }
}

struct DdRay {
    v: Vec<BigInt>,
    zeros: Bits,
}

fn dot(row: &[i64], v: &[BigInt]) -> BigInt {
    row.iter()
        .zip(v)
        .fold(BigInt::zero(), |acc, (&a, x)| match a {
            0 => acc,
            1 => acc + x,
            -1 => acc - x,
            _ => acc + x * BigInt::from(a),
        })
}

/// Extremal rays of the pointed cone `{x : A x >= 0}` by the double
/// description method with the combinatorial adjacency test. `A` must have
/// full column rank.
pub fn double_description(rows: &[Vec<i64>]) -> Result<Vec<Vec<BigInt>>> {
    let d = rows.first().map_or(0, Vec::len);
    let m = rows.len();
    if d == 0 {
        return Ok(Vec::new());
    }

    // greedy choice of d independent rows
    let mut basis: Vec<usize> = Vec::with_capacity(d);
    let mut echelon: Vec<Vec<BigRational>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut cand = echelon.clone();
        cand.push(row.iter().map(|&v| BigRational::from_integer(v.into())).collect());
        if rank(&cand) == cand.len() {
            echelon = cand;
            basis.push(i);
            if basis.len() == d {
                break;
            }
        }
    }
    if basis.len() < d {
        return Err(Error::InvalidStructure(
            "constraint matrix is rank deficient; cone is not pointed".into(),
        ));
    }

    // initial rays: columns of the inverse of the basis rows
    let inv = invert(&echelon_rows(rows, &basis))
        .ok_or_else(|| Error::Solver("singular initial basis".into()))?;
    let mut rays: Vec<DdRay> = (0..d)
        .map(|j| {
            let col: Vec<BigRational> = (0..d).map(|i| inv[i][j].clone()).collect();
            let lcm = col.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
            let mut v: Vec<BigInt> = col
                .iter()
                .map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer())
                .collect();
            make_primitive(&mut v);
            let mut zeros = Bits::new(m);
            for (k, &bi) in basis.iter().enumerate() {
                if k != j {
                    zeros.set(bi);
                }
            }
            DdRay { v, zeros }
        })
        .collect();

    let in_basis: Vec<bool> = (0..m).map(|i| basis.contains(&i)).collect();
    for (k, row) in rows.iter().enumerate() {
        if in_basis[k] {
            continue;
        }
        let vals: Vec<BigInt> = rays.iter().map(|r| dot(row, &r.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_negative()).collect();
        if neg.is_empty() {
            for (r, v) in rays.iter_mut().zip(&vals) {
                if v.is_zero() {
                    r.zeros.set(k);
                }
            }
            continue;
        }
        let mut fresh = Vec::new();
        for &p in &pos {
            for &q in &neg {
                let common = rays[p].zeros.and(&rays[q].zeros);
                if common.count() + 2 < d {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(i, r)| i == p || i == q || !r.zeros.contains_all(&common));
                if !adjacent {
                    continue;
                }
                let mut v: Vec<BigInt> = rays[q]
                    .v
                    .iter()
                    .zip(&rays[p].v)
                    .map(|(xq, xp)| &vals[p] * xq - &vals[q] * xp)
                    .collect();
                make_primitive(&mut v);
                let mut zeros = common;
                zeros.set(k);
                fresh.push(DdRay { v, zeros });
            }
        }
        let mut kept: Vec<DdRay> = Vec::with_capacity(rays.len() + fresh.len());
        for (mut r, v) in rays.into_iter().zip(vals) {
            if v.is_negative() {
                continue;
            }
            if v.is_zero() {
                r.zeros.set(k);
            }
            kept.push(r);
        }
        kept.extend(fresh);
        rays = kept;
    }
    Ok(rays.into_iter().map(|r| r.v).collect())
}

fn echelon_rows(rows: &[Vec<i64>], idx: &[usize]) -> Vec<Vec<BigRational>> {
    idx.iter()
        .map(|&i| rows[i].iter().map(|&v| BigRational::from_integer(v.into())).collect())
        .collect()
}

/// Gauss-Jordan inverse; `None` if singular.
pub fn invert(m: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        let pivot = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x = x.clone() / pivot.clone();
        }
        for i in 0..n {
            if i == c || a[i][c].is_zero() {
                continue;
            }
            let f = a[i][c].clone();
            for j in 0..2 * n {
                let delta = f.clone() * a[c][j].clone();
                a[i][j] -= delta;
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn cmp_coeffs(a: &[BigInt], b: &[BigInt]) -> Ordering {
    a.iter().cmp(b.iter())
}

/// Extremal rays of the cone for `s`, sorted lexicographically by
/// coefficient vector and classified.
pub fn enumerate_extremal_rays(s: &ContextStructure) -> Result<Vec<RayFunction>> {
    s.check_scale()?;
    let rows = s.character_rows();
    let mut rays = double_description(&rows)?;
    rays.sort_by(|a, b| cmp_coeffs(a, b));
    rays.dedup();
    rays.into_iter()
        .map(|v| RayFunction::new(s.clone(), v))
        .collect()
}

/// Ray listing with counts by class.
#[derive(Debug, Clone)]
pub struct ConeSummary {
    pub rays: Vec<RayFunction>,
    pub trivial: usize,
    pub nontrivial: usize,
}

impl ConeSummary {
    pub fn new(rays: Vec<RayFunction>) -> Self {
        let trivial = rays.iter().filter(|r| r.class() == RayClass::Trivial).count();
        let nontrivial = rays.len() - trivial;
        ConeSummary {
            rays,
            trivial,
            nontrivial,
        }
    }

    pub fn nontrivial_rays(&self) -> impl Iterator<Item = &RayFunction> {
        self.rays.iter().filter(|r| r.class() == RayClass::Nontrivial)
    }

    pub fn to_json(&self, s: &ContextStructure) -> Value {
        json!({
            "n": s.n(),
            "contexts": s.contexts(),
            "trivial": self.trivial,
            "nontrivial": self.nontrivial,
            "rays": self.rays.iter().map(|r| json!({
                "coeffs": r.to_json()["coeffs"].clone(),
                "class": r.class().as_str(),
            })).collect::<Vec<_>>(),
        })
    }
}
