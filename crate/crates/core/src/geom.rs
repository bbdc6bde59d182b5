//! Pentagrams: cyclic quintuplets of unit vectors with `l_i . l_{i+1} = 0`,
//! and the three equivalent forms of the pentagram inequality.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spin::{overlap, s_squared_expectation, Direction, Rotation, SpinState};

/// Validation tolerance for externally supplied legs.
pub const ORTHO_TOL: f64 = 1e-10;

/// Closure singularity threshold for [`from_chain`].
pub const CLOSURE_TOL: f64 = 1e-8;

/// Classical bound on [`kcbs_sum`].
pub const CLASSICAL_BOUND: f64 = 2.0;

/// `cos^2` of the polar angle of a regular pentagram leg, `1/sqrt 5`.
pub fn regular_cos2() -> f64 {
    1.0 / 5f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PentagramJson", into = "PentagramJson")]
pub struct Pentagram {
    legs: [Direction; 5],
}

#[derive(Serialize, Deserialize)]
struct PentagramJson {
    legs: [Direction; 5],
}

impl TryFrom<PentagramJson> for Pentagram {
    type Error = Error;

    fn try_from(j: PentagramJson) -> Result<Self> {
        Pentagram::new(j.legs)
    }
}

impl From<Pentagram> for PentagramJson {
    fn from(p: Pentagram) -> Self {
        PentagramJson { legs: p.legs }
    }
}

impl Pentagram {
    /// Validates cyclic orthogonality and that no two legs are parallel.
    pub fn new(legs: [Direction; 5]) -> Result<Self> {
        for i in 0..5 {
            let j = (i + 1) % 5;
            let d = legs[i].dot(&legs[j]);
            if d.abs() > ORTHO_TOL {
                return Err(Error::InvalidPentagram(format!(
                    "legs {i} and {j} are not orthogonal (dot {d:e})"
                )));
            }
        }
        for i in 0..5 {
            for j in (i + 1)..5 {
                if legs[i].dot(&legs[j]).abs() >= 1.0 - ORTHO_TOL {
                    return Err(Error::InvalidPentagram(format!(
                        "legs {i} and {j} are parallel"
                    )));
                }
            }
        }
        Ok(Pentagram { legs })
    }

    pub fn legs(&self) -> &[Direction; 5] {
        &self.legs
    }

    pub fn leg(&self, k: usize) -> &Direction {
        &self.legs[k % 5]
    }

    pub fn rotate(&self, r: &Rotation) -> Pentagram {
        Pentagram {
            legs: self.legs.map(|l| r.rotate_direction(&l)),
        }
    }

    /// Replaces leg `k` by its negation. Physically the same pentagram.
    pub fn flip_leg(&self, k: usize) -> Pentagram {
        let mut legs = self.legs;
        legs[k % 5] = legs[k % 5].neg();
        Pentagram { legs }
    }

    /// Largest `|l_i . l_{i+1}|`.
    pub fn orthogonality_defect(&self) -> f64 {
        (0..5)
            .map(|i| self.legs[i].dot(&self.legs[(i + 1) % 5]).abs())
            .fold(0.0, f64::max)
    }

    /// `sum_k l_k l_k^T`.
    pub fn gram_operator(&self) -> Matrix3<f64> {
        self.legs.iter().fold(Matrix3::zeros(), |acc, l| {
            let v = l.as_vector();
            acc + v * v.transpose()
        })
    }
}

/// Regular pentagram about `axis`: legs at `cos^2 theta = 1/sqrt 5` from the
/// axis with azimuths `4 pi k / 5 + chi` in the completion frame of `axis`.
pub fn regular_pentagram(axis: &Direction, chi: f64) -> Pentagram {
    let (m, n) = axis.completion();
    let ct = regular_cos2().sqrt();
    let st = (1.0 - ct * ct).sqrt();
    let (a, m, n) = (axis.as_array(), m.as_array(), n.as_array());
    let legs = std::array::from_fn(|k| {
        let az = 4.0 * PI * k as f64 / 5.0 + chi;
        let (s, c) = az.sin_cos();
        let v = std::array::from_fn(|j| ct * a[j] + st * (c * m[j] + s * n[j]));
        Direction::normalize(v).expect("regular legs are unit")
    });
    Pentagram { legs }
}

/// First leg plus three in-plane angles. Each angle places the next leg in
/// the plane orthogonal to its predecessor, measured in that plane's
/// completion frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub l1: Direction,
    pub t: [f64; 3],
}

fn next_leg(prev: &Direction, t: f64) -> Direction {
    let (e1, e2) = prev.completion();
    let (s, c) = t.sin_cos();
    let (e1, e2) = (e1.as_array(), e2.as_array());
    Direction::normalize(std::array::from_fn(|j| c * e1[j] + s * e2[j])).expect("unit in-plane vector")
}

/// First four legs of the chain before closure.
pub fn chain_legs(p: &ChainParams) -> [Direction; 4] {
    let l2 = next_leg(&p.l1, p.t[0]);
    let l3 = next_leg(&l2, p.t[1]);
    let l4 = next_leg(&l3, p.t[2]);
    [p.l1, l2, l3, l4]
}

/// Closes the chain with `l5 = unit(l4 x l1)`.
pub fn from_chain(p: &ChainParams) -> Result<Pentagram> {
    let [l1, l2, l3, l4] = chain_legs(p);
    let c = l4.cross(&l1);
    let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    if norm < CLOSURE_TOL {
        return Err(Error::DegenerateClosure { norm });
    }
    let l5 = Direction::normalize(c)?;
    Pentagram::new([l1, l2, l3, l4, l5])
}

/// Recovers chain angles reproducing the first four legs of `p`.
pub fn to_chain(p: &Pentagram) -> ChainParams {
    let legs = p.legs();
    let angle = |prev: &Direction, next: &Direction| {
        let (e1, e2) = prev.completion();
        next.dot(&e2).atan2(next.dot(&e1))
    };
    ChainParams {
        l1: legs[0],
        t: [
            angle(&legs[0], &legs[1]),
            angle(&legs[1], &legs[2]),
            angle(&legs[2], &legs[3]),
        ],
    }
}

/// Per-leg `|<l_k|psi>|^2`.
pub fn leg_rates(p: &Pentagram, psi: &SpinState) -> [f64; 5] {
    p.legs.map(|l| overlap(&l, psi).norm_sqr())
}

/// `K = sum_k |<l_k|psi>|^2`; `K > 2` certifies nonclassicality.
pub fn kcbs_sum(p: &Pentagram, psi: &SpinState) -> f64 {
    leg_rates(p, psi).iter().sum()
}

/// `sum_k <S_{l_k}^2>`; classical values are `>= 3`.
pub fn kcbs_spin_form(p: &Pentagram, psi: &SpinState) -> f64 {
    5.0 - kcbs_sum(p, psi)
}

/// `sum_i <A_i A_{i+1}>` with `A = I - 2|l><l|`; classical values are `>= -3`.
pub fn correlation_form(p: &Pentagram, psi: &SpinState) -> f64 {
    4.0 * kcbs_spin_form(p, psi) - 15.0
}

/// Per-leg `<S_{l_k}^2>`.
pub fn spin_squares(p: &Pentagram, psi: &SpinState) -> [f64; 5] {
    p.legs.map(|l| s_squared_expectation(&l, psi))
}

/// Largest eigenvalue of `sum_k l_k l_k^T` and its eigenvector: the maximum
/// of `kcbs_sum` over all states for this pentagram.
pub fn gram_max(p: &Pentagram) -> (f64, Direction) {
    let eig = SymmetricEigen::new(p.gram_operator());
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let v = eig.eigenvectors.column(idx);
    let dir = Direction::normalize([v[0], v[1], v[2]]).expect("eigenvector is nonzero");
    (val, dir.canonical_sign())
}
