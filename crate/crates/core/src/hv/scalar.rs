use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;

/// Number type the marginal solver runs over: exact rationals or `f64`.
pub trait Scalar:
    Clone + Debug + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Pivot and sign threshold; zero in exact arithmetic.
    fn eps() -> Self;

    const EXACT: bool;

    fn is_pos(&self) -> bool {
        *self > Self::eps()
    }

    fn is_neg(&self) -> bool {
        *self < -Self::eps()
    }

    fn is_negligible(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }

    fn from_bigint(v: &BigInt) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).unwrap() / Self::from_i64(den).unwrap()
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `"p/q"` strings for rationals, plain numbers for floats.
    fn to_json(&self) -> serde_json::Value;

    fn from_json(v: &serde_json::Value) -> Option<Self>;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn eps() -> Self {
        1e-11
    }

    fn from_bigint(v: &BigInt) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self)
    }

    fn from_json(v: &serde_json::Value) -> Option<Self> {
        match v {
            serde_json::Value::Number(n) => n.as_f64(),
            serde_json::Value::String(s) => parse_rational(s).and_then(|r| r.to_f64()),
            _ => None,
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn eps() -> Self {
        BigRational::zero()
    }

    fn from_bigint(v: &BigInt) -> Self {
        BigRational::from_integer(v.clone())
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(format_rational(self))
    }

    fn from_json(v: &serde_json::Value) -> Option<Self> {
        match v {
            serde_json::Value::String(s) => parse_rational(s),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(BigRational::from_integer(i.into()))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// `p/q` in lowest terms, or `p` for integers.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(BigRational::new(p, q))
            }
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

/// Simplest rational within `tol` of `x` (continued-fraction convergents and
/// semiconvergents).
pub fn rational_approx(x: f64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    if tol <= 0.0 {
        return BigRational::from_float(x);
    }
    let floor = x.floor();
    let mut frac = x - floor;
    let base = BigInt::from_f64(floor)?;
    // previous and current convergents of frac, starting at 0/1
    let (mut h0, mut k0) = (BigInt::one(), BigInt::zero());
    let (mut h1, mut k1) = (BigInt::zero(), BigInt::one());
    let target = BigRational::from_float(x)?;
    let tol_r = BigRational::from_float(tol)?;
    let close = |h: &BigInt, k: &BigInt| {
        let r = BigRational::new(base.clone() * k + h, k.clone());
        ((r.clone() - &target).abs() <= tol_r).then_some(r)
    };
    if let Some(r) = close(&BigInt::zero(), &BigInt::one()) {
        return Some(r);
    }
    for _ in 0..64 {
        if frac == 0.0 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a_big = BigInt::from_f64(a)?;
        // semiconvergents between the previous and next convergent
        let mut lo = BigInt::one();
        let mut hi = a_big.clone();
        let mut best = None;
        while lo <= hi {
            let mid: BigInt = (&lo + &hi) / 2;
            let h = &mid * &h1 + &h0;
            let k = &mid * &k1 + &k0;
            if let Some(r) = close(&h, &k) {
                best = Some(r);
                hi = mid - 1;
            } else {
                lo = mid + 1;
            }
        }
        if best.is_some() {
            return best;
        }
        let h2 = &a_big * &h1 + &h0;
        let k2 = &a_big * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        if let Some(r) = close(&h1, &k1) {
            return Some(r);
        }
    }
    Some(target)
}
