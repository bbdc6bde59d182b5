use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

use super::scalar::{rational_approx, Scalar};
use super::structure::{monomial_name, ContextStructure};
use crate::error::{Error, Result};
use crate::geom::{leg_rates, Pentagram};
use crate::spin::SpinState;

/// Float-mode slack on table entries and sums.
pub const TABLE_TOL: f64 = 1e-12;
/// Float-mode slack when comparing overlapping marginals.
pub const CONSISTENCY_TOL: f64 = 2e-12;

fn slack<T: Scalar>(tol: f64) -> T {
    if T::EXACT {
        T::zero()
    } else {
        T::from_f64(tol).unwrap()
    }
}

/// One outcome table per context, entries indexed as in [`ContextStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel<T> {
    structure: ContextStructure,
    tables: Vec<Vec<T>>,
}

impl<T: Scalar> MarginalModel<T> {
    /// Validates shape, nonnegativity, normalization and overlap consistency.
    pub fn new(structure: ContextStructure, tables: Vec<Vec<T>>) -> Result<Self> {
        if tables.len() != structure.contexts().len() {
            return Err(Error::InvalidModel(format!(
                "{} tables for {} contexts",
                tables.len(),
                structure.contexts().len()
            )));
        }
        let tol: T = slack(TABLE_TOL);
        for (c, table) in tables.iter().enumerate() {
            if table.len() != structure.num_outcomes(c) {
                return Err(Error::InvalidModel(format!(
                    "context {c} has {} entries, expected {}",
                    table.len(),
                    structure.num_outcomes(c)
                )));
            }
            if let Some((o, v)) = table.iter().enumerate().find(|(_, v)| *v < &-tol.clone()) {
                return Err(Error::InvalidModel(format!(
                    "context {c} outcome {} has negative probability {v:?}",
                    structure.outcome_key(c, o)
                )));
            }
            if table.iter().any(|v| v.to_f64().is_none_or(|f| !f.is_finite())) {
                return Err(Error::InvalidModel(format!("context {c} has a non-finite entry")));
            }
            let sum = table.iter().fold(T::zero(), |a, v| a + v.clone());
            if (sum.clone() - T::one()).abs() > tol {
                return Err(Error::InvalidModel(format!(
                    "context {c} sums to {:?}",
                    sum.to_f64_lossy()
                )));
            }
        }
        let model = MarginalModel { structure, tables };
        model.check_consistency()?;
        Ok(model)
    }

    fn check_consistency(&self) -> Result<()> {
        let tol: T = slack(CONSISTENCY_TOL);
        let s = &self.structure;
        for mono in s.monomials().iter().skip(1) {
            let mut first: Option<(usize, T)> = None;
            for (c, ctx) in s.contexts().iter().enumerate() {
                if !mono.iter().all(|i| ctx.contains(i)) {
                    continue;
                }
                let v = self.context_moment(c, mono);
                match &first {
                    None => first = Some((c, v)),
                    Some((c0, v0)) => {
                        if (v.clone() - v0.clone()).abs() > tol {
                            return Err(Error::InconsistentModel {
                                monomial: monomial_name(mono),
                                context_a: *c0,
                                context_b: c,
                                left: format!("{:?}", v0.to_f64_lossy()),
                                right: format!("{:?}", v.to_f64_lossy()),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn structure(&self) -> &ContextStructure {
        &self.structure
    }

    pub fn tables(&self) -> &[Vec<T>] {
        &self.tables
    }

    pub fn table(&self, c: usize) -> &[T] {
        &self.tables[c]
    }

    /// `<prod_{i in mono} a_i>` computed from context `c`.
    pub fn context_moment(&self, c: usize, mono: &[usize]) -> T {
        self.tables[c]
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (o, p)| {
                let chi = self.structure.outcome_character(c, o, mono);
                if chi > 0 {
                    acc + p.clone()
                } else {
                    acc - p.clone()
                }
            })
    }

    /// Moments aligned with the structure's monomial basis, the empty
    /// product first (always 1).
    pub fn moments(&self) -> Vec<T> {
        let s = &self.structure;
        s.monomials()
            .iter()
            .map(|mono| {
                if mono.is_empty() {
                    T::one()
                } else {
                    let c = s.context_of(mono).expect("monomial lies in a context");
                    self.context_moment(c, mono)
                }
            })
            .collect()
    }

    /// Relabels `-1 <-> +1` for observables in `set`.
    pub fn flip(&self, set: &[usize]) -> Self {
        let s = &self.structure;
        let tables = self
            .tables
            .iter()
            .enumerate()
            .map(|(c, table)| {
                let ctx = s.context(c);
                let len = ctx.len();
                let mask: usize = ctx
                    .iter()
                    .enumerate()
                    .filter(|(_, i)| set.contains(i))
                    .map(|(k, _)| 1 << (len - 1 - k))
                    .sum();
                let mut out = table.clone();
                for (o, p) in table.iter().enumerate() {
                    out[o ^ mask] = p.clone();
                }
                out
            })
            .collect();
        MarginalModel {
            structure: s.clone(),
            tables,
        }
    }

    /// `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: &T) -> Result<Self> {
        if self.structure != other.structure {
            return Err(Error::StructureMismatch);
        }
        let one_minus = T::one() - t.clone();
        let tables = self
            .tables
            .iter()
            .zip(&other.tables)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| one_minus.clone() * x.clone() + t.clone() * y.clone())
                    .collect()
            })
            .collect();
        Self::new(self.structure.clone(), tables)
    }

    pub fn to_f64(&self) -> MarginalModel<f64> {
        MarginalModel {
            structure: self.structure.clone(),
            tables: self
                .tables
                .iter()
                .map(|t| t.iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        let s = &self.structure;
        let mut tables = Map::new();
        for (c, table) in self.tables.iter().enumerate() {
            let mut entries = Map::new();
            for (o, p) in table.iter().enumerate() {
                entries.insert(s.outcome_key(c, o), p.to_json());
            }
            tables.insert(c.to_string(), Value::Object(entries));
        }
        json!({
            "n": s.n(),
            "contexts": s.contexts(),
            "tables": tables,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let structure: ContextStructure = serde_json::from_value(json!({
            "n": v.get("n").cloned().unwrap_or(Value::Null),
            "contexts": v.get("contexts").cloned().unwrap_or(Value::Null),
        }))
        .map_err(|e| Error::InvalidModel(format!("structure: {e}")))?;
        let tables_v = v
            .get("tables")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidModel("missing \"tables\" object".into()))?;
        let mut tables = Vec::new();
        for c in 0..structure.contexts().len() {
            let t = tables_v
                .get(&c.to_string())
                .and_then(Value::as_object)
                .ok_or_else(|| Error::InvalidModel(format!("missing table for context {c}")))?;
            let mut table = vec![None; structure.num_outcomes(c)];
            for (key, val) in t {
                let o = structure.parse_outcome_key(c, key).ok_or_else(|| {
                    Error::InvalidModel(format!("context {c}: bad outcome key {key:?}"))
                })?;
                let p = T::from_json(val).ok_or_else(|| {
                    Error::InvalidModel(format!("context {c}: bad probability {val}"))
                })?;
                table[o] = Some(p);
            }
            let table: Option<Vec<T>> = table.into_iter().collect();
            tables.push(table.ok_or_else(|| {
                Error::InvalidModel(format!("context {c}: missing outcomes"))
            })?);
        }
        if tables_v.len() != tables.len() {
            return Err(Error::InvalidModel("tables for unknown contexts".into()));
        }
        Self::new(structure, tables)
    }
}

/// A model read from JSON: exact when any probability is a `"p/q"` string.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Exact(MarginalModel<BigRational>),
    Float(MarginalModel<f64>),
}

impl AnyModel {
    pub fn from_json(v: &Value) -> Result<Self> {
        let has_string = v
            .get("tables")
            .and_then(Value::as_object)
            .map(|t| {
                t.values()
                    .filter_map(Value::as_object)
                    .flat_map(|e| e.values())
                    .any(Value::is_string)
            })
            .unwrap_or(false);
        if has_string {
            MarginalModel::from_json(v).map(AnyModel::Exact)
        } else {
            MarginalModel::from_json(v).map(AnyModel::Float)
        }
    }

    /// Pushforward of joint-distribution JSON onto `s`; exact when any
    /// weight is a `"p/q"` string.
    pub fn from_joint_json(v: &Value, s: &ContextStructure) -> Result<Self> {
        let exact = v
            .get("weights")
            .and_then(Value::as_object)
            .is_some_and(|w| w.values().any(Value::is_string));
        if exact {
            JointDistribution::<BigRational>::from_json(v, s)?.pushforward(s).map(AnyModel::Exact)
        } else {
            JointDistribution::<f64>::from_json(v, s)?.pushforward(s).map(AnyModel::Float)
        }
    }

    pub fn structure(&self) -> &ContextStructure {
        match self {
            AnyModel::Exact(m) => m.structure(),
            AnyModel::Float(m) => m.structure(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            AnyModel::Exact(m) => m.to_json(),
            AnyModel::Float(m) => m.to_json(),
        }
    }

    pub fn to_f64(&self) -> MarginalModel<f64> {
        match self {
            AnyModel::Exact(m) => m.to_f64(),
            AnyModel::Float(m) => m.clone(),
        }
    }
}

/// Weights over all `2^n` assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution<T> {
    n: usize,
    weights: Vec<T>,
}

impl<T: Scalar> JointDistribution<T> {
    pub fn new(n: usize, weights: Vec<T>) -> Result<Self> {
        if weights.len() != 1usize << n {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {n} observables",
                weights.len()
            )));
        }
        let tol: T = slack(TABLE_TOL);
        if weights.iter().any(|w| *w < -tol.clone()) {
            return Err(Error::InvalidArgument("negative joint weight".into()));
        }
        let sum = weights.iter().fold(T::zero(), |a, w| a + w.clone());
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidArgument("joint weights do not sum to 1".into()));
        }
        Ok(JointDistribution { n, weights })
    }

    /// Unit mass on assignment `a` (bit `i` set means `a_i = -1`).
    pub fn point_mass(n: usize, a: usize) -> Self {
        let mut weights = vec![T::zero(); 1 << n];
        weights[a] = T::one();
        JointDistribution { n, weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Context marginals of this distribution.
    pub fn pushforward(&self, s: &ContextStructure) -> Result<MarginalModel<T>> {
        if s.n() != self.n {
            return Err(Error::StructureMismatch);
        }
        let mut tables: Vec<Vec<T>> = (0..s.contexts().len())
            .map(|c| vec![T::zero(); s.num_outcomes(c)])
            .collect();
        for (a, w) in self.weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for (c, table) in tables.iter_mut().enumerate() {
                let o = s.outcome_of(c, a);
                table[o] = table[o].clone() + w.clone();
            }
        }
        MarginalModel::new(s.clone(), tables)
    }

    /// Largest absolute table deviation between the pushforward and `m`.
    pub fn residual(&self, m: &MarginalModel<T>) -> Result<T> {
        let pf = self.pushforward(m.structure())?;
        let mut worst = T::zero();
        for (a, b) in pf.tables().iter().zip(m.tables()) {
            for (x, y) in a.iter().zip(b) {
                let d = (x.clone() - y.clone()).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        Ok(worst)
    }

    pub fn flip(&self, set: &[usize]) -> Self {
        let mask: usize = set.iter().map(|i| 1usize << i).sum();
        let mut weights = self.weights.clone();
        for (a, w) in self.weights.iter().enumerate() {
            weights[a ^ mask] = w.clone();
        }
        JointDistribution { n: self.n, weights }
    }

    pub fn to_json(&self, s: &ContextStructure) -> Value {
        let mut w = Map::new();
        for (a, p) in self.weights.iter().enumerate() {
            if !p.is_zero() {
                w.insert(s.assignment_key(a), p.to_json());
            }
        }
        json!({ "n": self.n, "weights": w })
    }

    pub fn from_json(v: &Value, s: &ContextStructure) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidArgument("witness without \"n\"".into()))? as usize;
        if n != s.n() {
            return Err(Error::StructureMismatch);
        }
        let w = v
            .get("weights")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::InvalidArgument("witness without \"weights\"".into()))?;
        let mut weights = vec![T::zero(); 1 << n];
        for (key, val) in w {
            let a = s
                .parse_assignment_key(key)
                .ok_or_else(|| Error::InvalidArgument(format!("bad assignment {key:?}")))?;
            weights[a] = T::from_json(val)
                .ok_or_else(|| Error::InvalidArgument(format!("bad weight {val}")))?;
        }
        Self::new(n, weights)
    }
}

/// Context tables of the five commuting pairs `(A_i, A_{i+1})` with
/// `A_l = I - 2|l><l|`.
///
/// The two one-dimensional projectors are orthogonal, so `p(-,-) = 0`,
/// `p(-,+) = |<l_i|psi>|^2` and `p(+,-) = |<l_{i+1}|psi>|^2`.
pub fn marginals_from_state(p: &Pentagram, psi: &SpinState) -> MarginalModel<f64> {
    let rates = leg_rates(p, psi);
    let structure = ContextStructure::pentagram5();
    let tables = (0..5)
        .map(|i| {
            let (r0, r1) = (rates[i], rates[(i + 1) % 5]);
            vec![0.0, r0, r1, (1.0 - r0 - r1).max(0.0)]
        })
        .collect();
    MarginalModel { structure, tables }
}

/// Rational model within `tol` per free parameter of a float model, plus the
/// largest entry deviation actually introduced.
///
/// Single-observable marginals are shared so the result is consistent.
/// For pair contexts, entries that are exactly zero in the input stay zero.
pub fn rationalize(
    m: &MarginalModel<f64>,
    tol: f64,
) -> Result<(MarginalModel<BigRational>, f64)> {
    let s = m.structure();
    let approx = |x: f64| {
        rational_approx(x, tol).ok_or_else(|| Error::InvalidModel(format!("cannot rationalize {x}")))
    };
    // P(a_i = +1)
    let mut plus = Vec::with_capacity(s.n());
    for i in 0..s.n() {
        let c = s.context_of(&[i]).expect("covered");
        let mu = m.context_moment(c, &[i]);
        plus.push(approx((1.0 + mu) / 2.0)?);
    }
    let general = s.contexts().iter().any(|c| c.len() > 2);
    let mut shared: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
    let mut tables = Vec::new();
    for (c, ctx) in s.contexts().iter().enumerate() {
        let float_table = m.table(c);
        let table = if general {
            let k = ctx.len();
            let mut table = vec![BigRational::zero(); 1 << k];
            for mask in 0u32..(1 << k) {
                let mut mono: Vec<usize> = (0..k)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| ctx[b])
                    .collect();
                mono.sort_unstable();
                let mu = match mono.len() {
                    0 => BigRational::one(),
                    1 => plus[mono[0]].clone() * BigRational::from_integer(2.into()) - BigRational::one(),
                    _ => match shared.get(&mono) {
                        Some(v) => v.clone(),
                        None => {
                            let v = approx(m.context_moment(c, &mono))?;
                            shared.insert(mono.clone(), v.clone());
                            v
                        }
                    },
                };
                for (o, entry) in table.iter_mut().enumerate() {
                    let chi = s.outcome_character(c, o, &mono);
                    if chi > 0 {
                        *entry = entry.clone() + mu.clone();
                    } else {
                        *entry = entry.clone() - mu.clone();
                    }
                }
            }
            let scale = BigRational::new(1.into(), (1i64 << k).into());
            table.into_iter().map(|e| e * scale.clone()).collect()
        } else if ctx.len() == 1 {
            let p = plus[ctx[0]].clone();
            vec![BigRational::one() - p.clone(), p]
        } else {
            let (pa, pb) = (plus[ctx[0]].clone(), plus[ctx[1]].clone());
            let q = if float_table[0] == 0.0 {
                pa.clone() + pb.clone() - BigRational::one()
            } else if float_table[2] == 0.0 {
                pa.clone()
            } else if float_table[1] == 0.0 {
                pb.clone()
            } else if float_table[3] == 0.0 {
                BigRational::zero()
            } else {
                approx(float_table[3])?
            };
            vec![
                BigRational::one() - pa.clone() - pb.clone() + q.clone(),
                pb - q.clone(),
                pa - q.clone(),
                q,
            ]
        };
        if let Some(bad) = table.iter().find(|e| *e < &BigRational::zero()) {
            return Err(Error::InvalidModel(format!(
                "rationalized context {c} has negative entry {bad}"
            )));
        }
        tables.push(table);
    }
    let exact = MarginalModel::new(s.clone(), tables)?;
    let mut dev = 0.0f64;
    for (a, b) in exact.tables().iter().zip(m.tables()) {
        for (x, y) in a.iter().zip(b) {
            dev = dev.max((x.to_f64_lossy() - y).abs());
        }
    }
    Ok((exact, dev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::regular_pentagram;
    use crate::spin::Direction;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    #[test]
    fn axis_state_tables() {
        let p = regular_pentagram(&Direction::Z, 0.0);
        let m = marginals_from_state(&p, &SpinState::neutral(&Direction::Z));
        let r = 1.0 / 5f64.sqrt();
        for t in m.tables() {
            assert_eq!(t[0], 0.0);
            assert!((t[1] - r).abs() < 1e-12 && (t[2] - r).abs() < 1e-12);
            assert!((t[3] - (1.0 - 2.0 * r)).abs() < 1e-12);
            assert!((t[3] - 0.10557).abs() < 1e-5);
        }
        assert!(MarginalModel::new(m.structure().clone(), m.tables().to_vec()).is_ok());
    }

    #[test]
    fn state_on_first_leg() {
        let p = regular_pentagram(&Direction::X, 0.3);
        let m = marginals_from_state(&p, &SpinState::neutral(p.leg(0)));
        let t = m.table(0);
        assert!((t[1] - 1.0).abs() < 1e-12);
        assert!(t[2].abs() < 1e-12 && t[3].abs() < 1e-12);
    }

    #[test]
    fn inconsistent_model_names_the_overlap() {
        let s = ContextStructure::chsh();
        let good = vec![q(1, 4); 4];
        let mut tables = vec![good.clone(); 4];
        tables[1] = vec![q(1, 2), q(1, 2), q(0, 1), q(0, 1)];
        match MarginalModel::new(s, tables) {
            Err(Error::InconsistentModel { monomial, .. }) => assert_eq!(monomial, "a0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tables() {
        let s = ContextStructure::single_pair();
        assert!(MarginalModel::new(s.clone(), vec![vec![q(1, 2), q(1, 2), q(0, 1)]]).is_err());
        assert!(MarginalModel::new(s.clone(), vec![vec![q(1, 2), q(1, 2), q(1, 2), q(-1, 2)]]).is_err());
        assert!(MarginalModel::new(s, vec![vec![0.5, 0.5, 0.5, 0.0]]).is_err());
    }

    #[test]
    fn point_mass_pushforward_and_flip() {
        let s = ContextStructure::pentagram5();
        let j = JointDistribution::<BigRational>::point_mass(5, 0);
        let m = j.pushforward(&s).unwrap();
        for t in m.tables() {
            assert_eq!(t[3], q(1, 1));
        }
        let f = m.flip(&[0]);
        assert_eq!(f.table(0)[1], q(1, 1));
        assert_eq!(f.table(4)[2], q(1, 1));
        assert_eq!(f.flip(&[0]), m);
        assert_eq!(j.flip(&[0]).pushforward(&s).unwrap(), f);
        assert!(j.residual(&m).unwrap().is_zero());
    }

    #[test]
    fn json_round_trip_exact_and_float() {
        let s = ContextStructure::pentagram5();
        let j = JointDistribution::<BigRational>::point_mass(5, 3);
        let m = j.pushforward(&s).unwrap();
        let v = m.to_json();
        assert_eq!(v["tables"]["0"]["--"], json!("1"));
        match AnyModel::from_json(&v).unwrap() {
            AnyModel::Exact(back) => assert_eq!(back, m),
            other => panic!("{other:?}"),
        }
        let p = regular_pentagram(&Direction::Z, 0.0);
        let fm = marginals_from_state(&p, &SpinState::neutral(&Direction::Z));
        match AnyModel::from_json(&fm.to_json()).unwrap() {
            AnyModel::Float(back) => assert_eq!(back, fm),
            other => panic!("{other:?}"),
        }
        let wj = j.to_json(&s);
        assert_eq!(wj["weights"]["--+++"], json!("1"));
        assert_eq!(JointDistribution::<BigRational>::from_json(&wj, &s).unwrap(), j);
    }

    #[test]
    fn rationalize_preserves_zeros_and_consistency() {
        let p = regular_pentagram(&Direction::Z, 0.0);
        let fm = marginals_from_state(&p, &SpinState::canonical(0.4));
        let (em, dev) = rationalize(&fm, 1e-12).unwrap();
        assert!(dev < 5e-12);
        for t in em.tables() {
            assert!(t[0].is_zero());
        }
        let general = ContextStructure::new(3, vec![vec![0, 1, 2]]).unwrap();
        let fm = MarginalModel::new(general, vec![vec![0.125; 8]]).unwrap();
        let (em, dev) = rationalize(&fm, 1e-12).unwrap();
        assert_eq!(em.table(0)[5], q(1, 8));
        assert!(dev == 0.0);
    }
}
