use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

use pentagram_core::hv::cone::{
    double_description, enumerate_extremal_rays, invert, is_extremal, rank, RayClass,
    RayFunction,
};
use pentagram_core::hv::simplex::{solve, LpOutcome, StandardLp};
use pentagram_core::geom::regular_pentagram;
use pentagram_core::hv::{marginals_from_state, ContextStructure};
use pentagram_core::spin::{Direction, SpinState};

fn coeff_set(rays: &[RayFunction]) -> BTreeSet<Vec<BigInt>> {
    rays.iter().map(|r| r.coefficients().to_vec()).collect()
}

fn rational(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Brute force: every (d-1)-subset of constraint rows with rank d-1 fixes a
/// line; keep the direction that is nonnegative on all rows.
fn brute_force_rays(rows: &[Vec<i64>]) -> BTreeSet<Vec<BigInt>> {
    let d = rows[0].len();
    let m = rows.len();
    let mut out = BTreeSet::new();
    let mut idx: Vec<usize> = (0..d - 1).collect();
    loop {
        let sub: Vec<Vec<BigRational>> = idx
            .iter()
            .map(|&i| rows[i].iter().map(|&v| rational(v)).collect())
            .collect();
        if rank(&sub) == d - 1 {
            // complete with a unit row to find the kernel direction
            for e in 0..d {
                let mut sq = sub.clone();
                sq.push((0..d).map(|j| rational(i64::from(j == e))).collect());
                if let Some(inv) = invert(&sq) {
                    let col: Vec<BigRational> = (0..d).map(|i| inv[i][d - 1].clone()).collect();
                    let vals: Vec<BigRational> = rows
                        .iter()
                        .map(|r| {
                            r.iter()
                                .zip(&col)
                                .fold(BigRational::zero(), |a, (&x, c)| a + rational(x) * c)
                        })
                        .collect();
                    let sign = if vals.iter().all(|v| !v.is_negative()) {
                        1
                    } else if vals.iter().all(|v| !v.is_positive()) {
                        -1
                    } else {
                        0
                    };
                    if sign != 0 {
                        let lcm = col
                            .iter()
                            .fold(BigInt::from(1), |l, x| num_integer::Integer::lcm(&l, x.denom()));
                        let mut v: Vec<BigInt> = col
                            .iter()
                            .map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer() * sign)
                            .collect();
                        pentagram_core::hv::cone::make_primitive(&mut v);
                        out.insert(v);
                    }
                    break;
                }
            }
        }
        // next combination
        let mut k = d - 1;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] < m - (d - 1 - k) {
                idx[k] += 1;
                for j in k + 1..d - 1 {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn chsh_matches_brute_force() {
    let s = ContextStructure::chsh();
    let rays = enumerate_extremal_rays(&s).unwrap();
    assert_eq!(coeff_set(&rays), brute_force_rays(&s.character_rows()));
    let nontrivial: Vec<_> = rays.iter().filter(|r| r.class() == RayClass::Nontrivial).collect();
    assert_eq!(nontrivial.len(), 8);
    assert_eq!(rays.len() - nontrivial.len(), 16);
}

#[test]
fn chsh_rays_are_flip_images() {
    let s = ContextStructure::chsh();
    // 2 - <A1B1> - <A1B2> - <A2B1> + <A2B2> >= 0 as a cone element
    let base = RayFunction::from_named(
        s.clone(),
        &[("1", 2), ("a0a2", -1), ("a0a3", -1), ("a1a2", -1), ("a1a3", 1)],
    )
    .unwrap();
    let mut orbit = BTreeSet::new();
    for mask in 0..16usize {
        let set: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        orbit.insert(base.flip(&set).coefficients().to_vec());
    }
    let rays = enumerate_extremal_rays(&s).unwrap();
    let nontrivial: BTreeSet<_> = rays
        .iter()
        .filter(|r| r.class() == RayClass::Nontrivial)
        .map(|r| r.coefficients().to_vec())
        .collect();
    assert_eq!(orbit, nontrivial);
}

#[test]
fn pentagram_counts_and_extremality() {
    let s = ContextStructure::pentagram5();
    let rays = enumerate_extremal_rays(&s).unwrap();
    let trivial = rays.iter().filter(|r| r.class() == RayClass::Trivial).count();
    assert_eq!(trivial, 20);
    assert_eq!(rays.len() - trivial, 16);
    for r in &rays {
        assert!(is_extremal(r), "{:?}", r.to_json());
        assert!(r.values().iter().any(|v| v.is_zero()));
    }
    let base = RayFunction::from_named(
        s,
        &[("1", 3), ("a0a1", 1), ("a1a2", 1), ("a2a3", 1), ("a3a4", 1), ("a0a4", 1)],
    )
    .unwrap();
    let mut orbit = BTreeSet::new();
    for mask in 0..32usize {
        let set: Vec<usize> = (0..5).filter(|i| mask & (1 << i) != 0).collect();
        orbit.insert(base.flip(&set).coefficients().to_vec());
    }
    let nontrivial: BTreeSet<_> = rays
        .iter()
        .filter(|r| r.class() == RayClass::Nontrivial)
        .map(|r| r.coefficients().to_vec())
        .collect();
    assert_eq!(orbit, nontrivial);
}

/// Minimizes `g.c` over the mean-one cross-section `{c : rows.c >= 0, c0 = 1}`
/// in slack form; the optimum is a vertex, i.e. an extremal ray.
fn lp_vertex(rows: &[Vec<i64>], g: &[i64]) -> Option<Vec<BigInt>> {
    let d = rows[0].len();
    let m = rows.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        let mut row: Vec<BigRational> = Vec::with_capacity(2 * d + m);
        row.extend(r.iter().map(|&v| rational(v)));
        row.extend(r.iter().map(|&v| rational(-v)));
        row.extend((0..m).map(|j| rational(-i64::from(j == k))));
        a.push(row);
        b.push(rational(0));
    }
    let mut norm = vec![rational(0); 2 * d + m];
    norm[0] = rational(1);
    norm[d] = rational(-1);
    a.push(norm);
    b.push(rational(1));
    let mut c = vec![rational(0); 2 * d + m];
    for j in 1..d {
        c[j] = rational(g[j]);
        c[d + j] = rational(-g[j]);
    }
    let LpOutcome::Optimal { x, .. } = solve(&StandardLp { a, b, c }) else {
        return None;
    };
    let coeffs: Vec<BigRational> = (0..d).map(|j| x[j].clone() - x[d + j].clone()).collect();
    let lcm = coeffs
        .iter()
        .fold(BigInt::from(1), |l, x| num_integer::Integer::lcm(&l, x.denom()));
    let mut v: Vec<BigInt> = coeffs
        .iter()
        .map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    pentagram_core::hv::cone::make_primitive(&mut v);
    Some(v)
}

/// LP vertices for random objectives and for the moments of flipped
/// axis-state models all appear in the enumeration, and cover it.
#[test]
fn pentagram_lp_vertex_oracle() {
    let s = ContextStructure::pentagram5();
    let enumerated = coeff_set(&enumerate_extremal_rays(&s).unwrap());
    let rows = s.character_rows();
    let d = rows[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut objectives: Vec<Vec<i64>> = (0..60)
        .map(|_| (0..d).map(|_| rng.random_range(-50i64..=50)).collect())
        .collect();
    let p = regular_pentagram(&Direction::Z, 0.0);
    let axis = marginals_from_state(&p, &SpinState::neutral(&Direction::Z));
    for mask in 0..32usize {
        let set: Vec<usize> = (0..5).filter(|i| mask & (1 << i) != 0).collect();
        let mu = axis.flip(&set).moments();
        objectives.push(mu.iter().map(|x| (x * 1e6).round() as i64).collect());
    }
    let found: BTreeSet<_> = objectives.iter().filter_map(|g| lp_vertex(&rows, g)).collect();
    assert!(found.is_subset(&enumerated));
    let nontrivial = found
        .iter()
        .filter(|v| RayFunction::new(s.clone(), (*v).clone()).unwrap().class() == RayClass::Nontrivial)
        .count();
    assert_eq!(nontrivial, 16);
}

#[test]
fn single_pair_is_the_orthant() {
    let s = ContextStructure::single_pair();
    let rays = enumerate_extremal_rays(&s).unwrap();
    assert_eq!(rays.len(), 4);
    assert!(rays.iter().all(|r| r.class() == RayClass::Trivial));
}

#[test]
fn dd_on_a_square_cone() {
    // x >= 0, y >= 0, x + y >= 0, x - y + 2y >= 0 : the orthant again
    let rows = vec![vec![1, 0], vec![0, 1], vec![1, 1]];
    let mut rays = double_description(&rows).unwrap();
    rays.sort();
    assert_eq!(
        rays,
        vec![vec![BigInt::from(0), BigInt::from(1)], vec![BigInt::from(1), BigInt::from(0)]]
    );
}

#[test]
fn enumeration_is_deterministic_and_sorted() {
    let s = ContextStructure::pentagram5();
    let a = enumerate_extremal_rays(&s).unwrap();
    let b = enumerate_extremal_rays(&s).unwrap();
    assert_eq!(a, b);
    let coeffs: Vec<_> = a.iter().map(|r| r.coefficients().to_vec()).collect();
    let mut sorted = coeffs.clone();
    sorted.sort();
    assert_eq!(coeffs, sorted);
}

#[test]
fn cycle6_rays_are_extremal() {
    let s = ContextStructure::cycle(6).unwrap();
    let rays = enumerate_extremal_rays(&s).unwrap();
    assert_eq!(rays.iter().filter(|r| r.class() == RayClass::Trivial).count(), 24);
    assert!(rays.iter().all(is_extremal));
}
