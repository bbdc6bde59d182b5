//! Spin-1 states in the complexified Euclidean picture.
//!
//! A spin-1 state is a complex 3-vector `psi = u + i v` over a fixed real
//! orthonormal basis. A real unit vector `l` doubles as a measurement axis
//! and as the neutrally polarized state `|0>_l`. The spin projection acts as
//! `S_l psi = i (l x psi)`, so `<S_l^2> = 1 - |<l|psi>|^2`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use crate::error::{Error, Result};

/// Constructors reject inputs whose norm is further than this from 1.
pub const NORM_GUARD: f64 = 1e-9;

/// Whether two directions that differ only in sign compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Exact,
    UpToSign,
}

/// A real unit vector. `l` and `-l` describe the same measurement.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Direction([f64; 3]);

impl fmt::Debug for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Direction({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Direction {
    pub const X: Direction = Direction([1.0, 0.0, 0.0]);
    pub const Y: Direction = Direction([0.0, 1.0, 0.0]);
    pub const Z: Direction = Direction([0.0, 0.0, 1.0]);

    /// Checked constructor: the input must already be unit within
    /// [`NORM_GUARD`]. The stored value is renormalized.
    pub fn new(v: [f64; 3]) -> Result<Self> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = norm3(&v);
        if (norm - 1.0).abs() > NORM_GUARD {
            return Err(Error::NotUnit {
                norm,
                tol: NORM_GUARD,
            });
        }
        Ok(Self::scale(v, norm))
    }

    /// Normalizes any nonzero finite vector.
    pub fn normalize(v: [f64; 3]) -> Result<Self> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = norm3(&v);
        if norm < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(Self::scale(v, norm))
    }

    /// Builds from `v` honoring the normalize flag used by the command line.
    pub fn parse(v: [f64; 3], normalize: bool) -> Result<Self> {
        if normalize {
            Self::normalize(v)
        } else {
            Self::new(v)
        }
    }

    fn scale(v: [f64; 3], norm: f64) -> Self {
        Direction([v[0] / norm, v[1] / norm, v[2] / norm])
    }

    /// Unit vector from polar angle `theta` (from +z) and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::scale([st * cp, st * sp, ct], 1.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        dot3(&self.0, &other.0)
    }

    pub fn cross(&self, other: &Direction) -> [f64; 3] {
        cross3(&self.0, &other.0)
    }

    pub fn neg(&self) -> Direction {
        Direction([-self.0[0], -self.0[1], -self.0[2]])
    }

    /// Representative of `{l, -l}` in the hemisphere z > 0, ties broken by
    /// y > 0 and then x > 0.
    pub fn canonical_sign(&self) -> Direction {
        let [x, y, z] = self.0;
        let flip = if z != 0.0 {
            z < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            x < 0.0
        };
        if flip {
            self.neg()
        } else {
            *self
        }
    }

    pub fn approx_eq(&self, other: &Direction, tol: f64, mode: SignMode) -> bool {
        let close = |s: f64| (0..3).all(|k| (self.0[k] - s * other.0[k]).abs() <= tol);
        match mode {
            SignMode::Exact => close(1.0),
            SignMode::UpToSign => close(1.0) || close(-1.0),
        }
    }

    /// Deterministic orthonormal completion `{l, m, n}` with `n = l x m`.
    ///
    /// `m` is Gram-Schmidt of the basis axis along which `l` has the
    /// smallest absolute component.
    pub fn completion(&self) -> (Direction, Direction) {
        let abs = self.0.map(f64::abs);
        let k = if abs[0] <= abs[1] && abs[0] <= abs[2] {
            0
        } else if abs[1] <= abs[2] {
            1
        } else {
            2
        };
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let proj = self.0[k];
        let m = [e[0] - proj * self.0[0], e[1] - proj * self.0[1], e[2] - proj * self.0[2]];
        let m = Self::scale(m, norm3(&m));
        let n = cross3(&self.0, &m.0);
        let n = Self::scale(n, norm3(&n));
        (m, n)
    }
}

impl TryFrom<[f64; 3]> for Direction {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for [f64; 3] {
    fn from(d: Direction) -> Self {
        d.0
    }
}

/// A pure spin-1 state: three complex amplitudes over a real orthonormal
/// basis, unit norm. Global phase is unphysical.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateJson", into = "StateJson")]
pub struct SpinState([Complex64; 3]);

#[derive(Serialize, Deserialize)]
struct StateJson {
    re: [f64; 3],
    im: [f64; 3],
}

impl TryFrom<StateJson> for SpinState {
    type Error = Error;

    fn try_from(j: StateJson) -> Result<Self> {
        SpinState::new(std::array::from_fn(|k| Complex64::new(j.re[k], j.im[k])))
    }
}

impl From<SpinState> for StateJson {
    fn from(s: SpinState) -> Self {
        StateJson {
            re: s.re(),
            im: s.im(),
        }
    }
}

impl fmt::Debug for SpinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpinState").field(&self.0).finish()
    }
}

fn cnorm(v: &[Complex64; 3]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

impl SpinState {
    /// Checked constructor; the norm must be 1 within [`NORM_GUARD`].
    pub fn new(amps: [Complex64; 3]) -> Result<Self> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = cnorm(&amps);
        if (norm - 1.0).abs() > NORM_GUARD {
            return Err(Error::NotUnit {
                norm,
                tol: NORM_GUARD,
            });
        }
        Ok(SpinState(amps.map(|a| a / norm)))
    }

    pub fn normalize(amps: [Complex64; 3]) -> Result<Self> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = cnorm(&amps);
        if norm < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(SpinState(amps.map(|a| a / norm)))
    }

    pub fn parse(amps: [Complex64; 3], normalize: bool) -> Result<Self> {
        if normalize {
            Self::normalize(amps)
        } else {
            Self::new(amps)
        }
    }

    /// `u + i v` from real and imaginary parts.
    pub fn from_parts(re: [f64; 3], im: [f64; 3]) -> Result<Self> {
        Self::new(std::array::from_fn(|k| Complex64::new(re[k], im[k])))
    }

    /// The neutrally polarized state `|0>_l`, i.e. the real vector `l`.
    pub fn neutral(l: &Direction) -> Self {
        SpinState(l.0.map(|x| Complex64::new(x, 0.0)))
    }

    /// The coherent state `(m + i n)/sqrt 2` for orthonormal `m`, `n`.
    pub fn coherent(m: &Direction, n: &Direction) -> Result<Self> {
        if m.dot(n).abs() > NORM_GUARD {
            return Err(Error::InvalidArgument(format!(
                "coherent state needs orthogonal m, n (m.n = {:e})",
                m.dot(n)
            )));
        }
        Self::normalize(std::array::from_fn(|k| Complex64::new(m.0[k], n.0[k])))
    }

    /// `cos(phi) m + i sin(phi) n` with `m = e1`, `n = e2`.
    pub fn canonical(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        SpinState([
            Complex64::new(c, 0.0),
            Complex64::new(0.0, s),
            Complex64::new(0.0, 0.0),
        ])
    }

    /// Canonical state whose concurrence `cos 2 phi` equals `c`.
    pub fn with_concurrence(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "concurrence {c} outside [0, 1]"
            )));
        }
        Ok(Self::canonical(0.5 * c.acos()))
    }

    pub fn amplitudes(&self) -> [Complex64; 3] {
        self.0
    }

    pub fn re(&self) -> [f64; 3] {
        self.0.map(|a| a.re)
    }

    pub fn im(&self) -> [f64; 3] {
        self.0.map(|a| a.im)
    }

    pub fn with_phase(&self, alpha: f64) -> Self {
        let p = Complex64::from_polar(1.0, alpha);
        SpinState(self.0.map(|a| a * p))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &SpinState) -> Complex64 {
        (0..3).map(|k| self.0[k].conj() * other.0[k]).sum()
    }

    /// Distance to `other` after aligning `other`'s global phase optimally.
    pub fn phase_distance(&self, other: &SpinState) -> f64 {
        let ip = other.inner(self);
        let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
        (0..3)
            .map(|k| (self.0[k] - other.0[k] * phase).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Proper rotation of R^3, checked orthogonal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub const TOL: f64 = 1e-12;

    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let defect = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !defect.is_finite() || defect > Self::TOL || (det - 1.0).abs() > Self::TOL {
            return Err(Error::NotRotation { defect, det });
        }
        Ok(Rotation(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Right-handed rotation by `angle` about `axis` (Rodrigues).
    pub fn about_axis(axis: &Direction, angle: f64) -> Self {
        let k = axis.as_vector();
        let kx = k.cross_matrix();
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    /// Rotation taking `from` onto `to`.
    pub fn aligning(from: &Direction, to: &Direction) -> Self {
        let c = from.dot(to);
        let axis = from.cross(to);
        match Direction::normalize(axis) {
            Ok(a) if norm3(&axis) > 1e-12 => Self::about_axis(&a, norm3(&axis).atan2(c)),
            _ if c > 0.0 => Self::identity(),
            _ => Self::about_axis(&from.completion().0, std::f64::consts::PI),
        }
    }

    /// Rotation from a unit quaternion `(w, x, y, z)`; the input is normalized.
    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-300 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        let [w, x, y, z] = q.map(|c| c / n);
        Ok(Rotation(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let r = self.0 * Vector3::new(v[0], v[1], v[2]);
        [r[0], r[1], r[2]]
    }

    pub fn rotate_direction(&self, l: &Direction) -> Direction {
        let v = self.apply(&l.0);
        Direction::scale(v, norm3(&v))
    }
}

/// `<l|psi>`; `l` is real so this is `sum_j l_j psi_j`.
pub fn overlap(l: &Direction, psi: &SpinState) -> Complex64 {
    (0..3).map(|k| psi.0[k] * l.0[k]).sum()
}

/// `S_l psi = i (l x psi)`, extended complex-linearly. Not normalized.
pub fn spin_apply(l: &Direction, psi: &SpinState) -> [Complex64; 3] {
    let a = psi.0;
    let l = l.0;
    let cross = [
        a[2] * l[1] - a[1] * l[2],
        a[0] * l[2] - a[2] * l[0],
        a[1] * l[0] - a[0] * l[1],
    ];
    cross.map(|c| Complex64::i() * c)
}

/// `<psi|S_l^2|psi> = 1 - |<l|psi>|^2`.
pub fn s_squared_expectation(l: &Direction, psi: &SpinState) -> f64 {
    (1.0 - overlap(l, psi).norm_sqr()).clamp(0.0, 1.0)
}

/// Eigenstates `|0>_l = l` and `|+-1>_l = (m +- i n)/sqrt 2` of `S_l`,
/// with `{l, m, n}` the deterministic completion.
pub fn eigenbasis(l: &Direction) -> [SpinState; 3] {
    let (m, n) = l.completion();
    let plus = std::array::from_fn(|k| Complex64::new(m.0[k], n.0[k]) * FRAC_1_SQRT_2);
    let minus = std::array::from_fn(|k| Complex64::new(m.0[k], -n.0[k]) * FRAC_1_SQRT_2);
    [SpinState::neutral(l), SpinState(plus), SpinState(minus)]
}

/// `psi = phase * (m cos phi + i n sin phi)` with `phi` in `[0, pi/4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub phi: f64,
    pub m: Direction,
    pub n: Direction,
    /// Unit complex number as `[re, im]`.
    pub phase: [f64; 2],
}

impl CanonicalForm {
    pub fn phase(&self) -> Complex64 {
        Complex64::new(self.phase[0], self.phase[1])
    }

    pub fn reconstruct(&self) -> SpinState {
        let (s, c) = self.phi.sin_cos();
        let p = self.phase();
        SpinState(std::array::from_fn(|k| {
            p * Complex64::new(c * self.m.0[k], s * self.n.0[k])
        }))
    }

    pub fn concurrence(&self) -> f64 {
        (2.0 * self.phi).cos()
    }
}

/// Closed-form canonical decomposition.
///
/// The phase `alpha = arg(sum a_j^2) / 2` makes `e^{-i alpha} psi = u + i v`
/// with `u . v = 0` and `|u| >= |v|`. For coherent states `sum a_j^2 = 0`
/// and `alpha = 0`.
pub fn to_canonical(psi: &SpinState) -> CanonicalForm {
    let s: Complex64 = psi.0.iter().map(|a| a * a).sum();
    let alpha = if s.norm() > 1e-15 { 0.5 * s.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, -alpha);
    let aligned = psi.0.map(|a| a * rot);
    let u = aligned.map(|a| a.re);
    let v = aligned.map(|a| a.im);
    let (nu, nv) = (norm3(&u), norm3(&v));
    let phi = nv.atan2(nu).min(FRAC_PI_4);

    let m = if nu > 1e-12 {
        Direction::scale(u, nu)
    } else {
        // unreachable for unit psi since |u| >= 1/sqrt 2
        Direction::X
    };
    let n = if nv > 1e-9 {
        let w = dot3(&v, &m.0);
        let v = [v[0] - w * m.0[0], v[1] - w * m.0[1], v[2] - w * m.0[2]];
        Direction::scale(v, norm3(&v))
    } else {
        m.completion().0
    };
    let mut phase = Complex64::from_polar(1.0, alpha);
    let (m, n) = if m.canonical_sign() != m {
        phase = -phase;
        (m.neg(), n.neg())
    } else {
        (m, n)
    };
    CanonicalForm {
        phi,
        m,
        n,
        phase: [phase.re, phase.im],
    }
}

/// `|a1^2 + a2^2 + a3^2|`, which equals `cos 2 phi` in canonical form.
pub fn concurrence(psi: &SpinState) -> f64 {
    psi.0.iter().map(|a| a * a).sum::<Complex64>().norm().min(1.0)
}

/// `sqrt(1 - c^2)`.
pub fn degree_of_polarization(psi: &SpinState) -> f64 {
    let c = concurrence(psi);
    (1.0 - c * c).max(0.0).sqrt()
}

/// Applies `r` to real and imaginary parts.
pub fn rotate(psi: &SpinState, r: &Rotation) -> SpinState {
    let re = r.apply(&psi.re());
    let im = r.apply(&psi.im());
    SpinState(std::array::from_fn(|k| Complex64::new(re[k], im[k])))
}

/// Symmetric two-qubit state on the triplet
/// `{|uu>, (|ud> + |du>)/sqrt 2, |dd>}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitSymmetricState {
    pub c_plus: Complex64,
    pub c_zero: Complex64,
    pub c_minus: Complex64,
}

impl TwoQubitSymmetricState {
    pub fn new(c_plus: Complex64, c_zero: Complex64, c_minus: Complex64) -> Result<Self> {
        let norm = (c_plus.norm_sqr() + c_zero.norm_sqr() + c_minus.norm_sqr()).sqrt();
        if (norm - 1.0).abs() > NORM_GUARD {
            return Err(Error::NotUnit {
                norm,
                tol: NORM_GUARD,
            });
        }
        Ok(Self {
            c_plus: c_plus / norm,
            c_zero: c_zero / norm,
            c_minus: c_minus / norm,
        })
    }

    /// Amplitudes on `|uu>, |ud>, |du>, |dd>`.
    pub fn amplitudes(&self) -> [Complex64; 4] {
        let z = self.c_zero * FRAC_1_SQRT_2;
        [self.c_plus, z, z, self.c_minus]
    }
}

/// Maps `psi` to the symmetric two-qubit triplet using the spherical basis
/// of the z axis with the Condon-Shortley sign, `|+1> = -(e1 + i e2)/sqrt 2`,
/// `|0> = e3`, `|-1> = (e1 - i e2)/sqrt 2`.
pub fn two_qubit(psi: &SpinState) -> TwoQubitSymmetricState {
    let [a1, a2, a3] = psi.0;
    let i = Complex64::i();
    TwoQubitSymmetricState {
        c_plus: -(a1 - i * a2) * FRAC_1_SQRT_2,
        c_zero: a3,
        c_minus: (a1 + i * a2) * FRAC_1_SQRT_2,
    }
}

/// Wootters concurrence of a pure two-qubit state, `|<s|sy (x) sy|s*>|`.
pub fn wootters_concurrence(s: &TwoQubitSymmetricState) -> f64 {
    let a = s.amplitudes();
    // sy (x) sy maps (a00, a01, a10, a11) to (-a11, a10, a01, -a00)
    let flipped = [-a[3].conj(), a[2].conj(), a[1].conj(), -a[0].conj()];
    a.iter()
        .zip(flipped.iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(rng: &mut impl Rng) -> SpinState {
        SpinState::normalize(std::array::from_fn(|_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
        .unwrap()
    }

    fn random_direction(rng: &mut impl Rng) -> Direction {
        Direction::normalize(std::array::from_fn(|_| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let z = Direction::Z;
        assert!((overlap(&z, &SpinState::neutral(&z)) - c(1.0, 0.0)).norm() < 1e-15);
        let coh = SpinState::coherent(&Direction::X, &Direction::Y).unwrap();
        assert!(overlap(&z, &coh).norm() < 1e-15);
    }

    #[test]
    fn constructors_reject_non_unit() {
        assert!(matches!(
            Direction::new([1.0, 1.0, 0.0]),
            Err(Error::NotUnit { .. })
        ));
        assert!(Direction::parse([1.0, 1.0, 0.0], true).is_ok());
        assert_eq!(Direction::normalize([0.0; 3]), Err(Error::ZeroVector));
        assert!(SpinState::new([c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]).is_err());
        assert!(Direction::new([f64::NAN, 0.0, 1.0]).is_err());
    }

    #[test]
    fn spin_apply_examples() {
        let z = Direction::Z;
        let zero = spin_apply(&z, &SpinState::neutral(&z));
        assert!(zero.iter().all(|a| a.norm() < 1e-15));

        let coh = SpinState::coherent(&Direction::X, &Direction::Y).unwrap();
        let out = spin_apply(&z, &coh);
        for k in 0..3 {
            assert!((out[k] - coh.amplitudes()[k]).norm() < 1e-15);
        }

        let out = spin_apply(&Direction::X, &SpinState::neutral(&Direction::Y));
        assert!((out[2] - c(0.0, 1.0)).norm() < 1e-15);
        assert!(out[0].norm() + out[1].norm() < 1e-15);
    }

    #[test]
    fn eigenbasis_standard_frame() {
        let [zero, plus, minus] = eigenbasis(&Direction::Z);
        let s = FRAC_1_SQRT_2;
        let expect = [
            [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            [c(s, 0.0), c(0.0, s), c(0.0, 0.0)],
            [c(s, 0.0), c(0.0, -s), c(0.0, 0.0)],
        ];
        for (st, e) in [zero, plus, minus].iter().zip(expect.iter()) {
            for k in 0..3 {
                assert!((st.amplitudes()[k] - e[k]).norm() < 1e-15, "{st:?}");
            }
        }
    }

    #[test]
    fn eigenbasis_random_orthonormal_and_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let l = random_direction(&mut rng);
            let basis = eigenbasis(&l);
            for i in 0..3 {
                for j in 0..3 {
                    let g = basis[i].inner(&basis[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - c(want, 0.0)).norm() < 1e-12);
                }
            }
            for (state, ev) in basis.iter().zip([0.0, 1.0, -1.0]) {
                let out = spin_apply(&l, state);
                let res: f64 = (0..3)
                    .map(|k| (out[k] - state.amplitudes()[k] * ev).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_examples() {
        let f = to_canonical(&SpinState::neutral(&Direction::X));
        assert!(f.phi.abs() < 1e-15);
        assert!(f.m.approx_eq(&Direction::X, 1e-15, SignMode::UpToSign));

        let coh = SpinState::coherent(&Direction::X, &Direction::Y).unwrap();
        assert!((to_canonical(&coh).phi - FRAC_PI_4).abs() < 1e-12);

        let t: f64 = 0.3;
        let psi = SpinState::new([c(t.cos(), 0.0), c(0.0, t.sin()), c(0.0, 0.0)]).unwrap();
        let f = to_canonical(&psi);
        assert!((f.phi - t).abs() < 1e-12);
        assert!(f.reconstruct().phase_distance(&psi) < 1e-12);
    }

    #[test]
    fn canonical_output_uses_upper_hemisphere() {
        let psi = SpinState::neutral(&Direction::new([0.0, 0.6, -0.8]).unwrap());
        let f = to_canonical(&psi);
        assert!(f.m.z() > 0.0);
        assert!(f.reconstruct().phase_distance(&psi) < 1e-12);
    }

    #[test]
    fn concurrence_and_polarization_examples() {
        assert!((concurrence(&SpinState::neutral(&Direction::Y)) - 1.0).abs() < 1e-15);
        let coh = SpinState::coherent(&Direction::X, &Direction::Z).unwrap();
        assert!(concurrence(&coh).abs() < 1e-15);
        let psi = SpinState::canonical(std::f64::consts::PI / 8.0);
        assert!((concurrence(&psi) - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((degree_of_polarization(&psi) - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(degree_of_polarization(&SpinState::neutral(&Direction::Y)) < 1e-7);
        assert!((degree_of_polarization(&coh) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotate_examples() {
        let psi = SpinState::neutral(&Direction::X);
        assert_eq!(rotate(&psi, &Rotation::identity()), psi);
        let r = Rotation::about_axis(&Direction::Z, std::f64::consts::FRAC_PI_2);
        let out = rotate(&psi, &r);
        assert!(out.phase_distance(&SpinState::neutral(&Direction::Y)) < 1e-12);
        assert!(Rotation::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
        assert!(Rotation::from_rows([[1.1, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn two_qubit_examples() {
        let bell = two_qubit(&SpinState::neutral(&Direction::Z));
        assert!((bell.c_zero - c(1.0, 0.0)).norm() < 1e-15);
        assert!((wootters_concurrence(&bell) - 1.0).abs() < 1e-15);

        let up = eigenbasis(&Direction::Z)[1];
        let s = two_qubit(&up);
        assert!((s.c_plus.norm() - 1.0).abs() < 1e-12);
        assert!(wootters_concurrence(&s) < 1e-12);

        let psi = SpinState::canonical(std::f64::consts::PI / 8.0);
        assert!((wootters_concurrence(&two_qubit(&psi)) - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn json_shapes() {
        let psi = SpinState::canonical(0.2);
        let j = serde_json::to_value(psi).unwrap();
        assert!(j.get("re").is_some() && j.get("im").is_some());
        let back: SpinState = serde_json::from_value(j).unwrap();
        assert_eq!(back, psi);
        let d: Direction = serde_json::from_str("[0, 0, 1]").unwrap();
        assert_eq!(d, Direction::Z);
        assert!(serde_json::from_str::<Direction>("[0, 2, 1]").is_err());
    }

    #[test]
    fn aligning_rotation_maps_source_to_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random_direction(&mut rng);
            let b = random_direction(&mut rng);
            let r = Rotation::aligning(&a, &b);
            assert!(r.rotate_direction(&a).approx_eq(&b, 1e-12, SignMode::Exact));
        }
        let r = Rotation::aligning(&Direction::Z, &Direction::Z.neg());
        assert!(r.rotate_direction(&Direction::Z).approx_eq(&Direction::Z.neg(), 1e-12, SignMode::Exact));
        let _ = random_state(&mut rng);
    }
}
