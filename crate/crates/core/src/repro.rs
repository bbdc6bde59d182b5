//! Reproduction suite: every headline number and decision the library is
//! built to reproduce, plus randomized invariant checks, as a pass/fail table.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_4, PI};
use std::time::Instant;

use crate::biphoton::{
    coincidence_rate, plan_trials, simulate_counts, symmetric_test_angle, tilted, CLASSICAL_RATE,
};
use crate::geom::{
    correlation_form, from_chain, gram_max, kcbs_spin_form, kcbs_sum, regular_pentagram,
    ChainParams, Pentagram, CLASSICAL_BOUND,
};
use crate::hv::certify::{Certifier, Verdict, DEFAULT_TOL};
use crate::hv::cone::{enumerate_extremal_rays, is_extremal, ray_expectation, RayClass, RayFunction};
use crate::hv::model::{marginals_from_state, rationalize, JointDistribution, MarginalModel};
use crate::hv::structure::ContextStructure;
use crate::search::{optimize_pentagram, phi_for_concurrence, regular_k, SearchConfig};
use crate::spin::{
    concurrence, overlap, rotate, s_squared_expectation, spin_apply, to_canonical, two_qubit,
    wootters_concurrence, Direction, Rotation, SpinState,
};

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const TITLES: [&str; 11] = [
    "regular-pentagram violation",
    "hidden-variable decision",
    "cone enumeration, chsh",
    "cone enumeration, pentagram5",
    "duality",
    "concurrence",
    "threshold",
    "skew detection",
    "biphoton numbers",
    "statistics",
    "property suites",
];

/// Runs criterion `id` (1 to 11).
pub fn criterion(id: u8) -> Option<Outcome> {
    let start = Instant::now();
    let (passed, detail) = match id {
        1 => violation(),
        2 => decision(),
        3 => cone_chsh(),
        4 => cone_pentagram(),
        5 => duality(),
        6 => concurrence_grid(),
        7 => threshold(),
        8 => skew_detection(),
        9 => biphoton_numbers(),
        10 => statistics(),
        11 => {
            let props = properties(1000, 2024);
            let failed: Vec<&str> = props.iter().filter(|p| !p.passed()).map(|p| p.name).collect();
            (
                failed.is_empty(),
                if failed.is_empty() {
                    format!("{} suites x >= 1000 cases", props.len())
                } else {
                    format!("failing: {}", failed.join(", "))
                },
            )
        }
        _ => return None,
    };
    Some(Outcome {
        id,
        title: TITLES[id as usize - 1],
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all() -> Vec<Outcome> {
    (1..=11).filter_map(criterion).collect()
}

fn sqrt5() -> f64 {
    5f64.sqrt()
}

/// The pentagram function `3 + sum of cycle-edge products`.
pub fn pentagram_ray() -> RayFunction {
    RayFunction::from_named(
        ContextStructure::pentagram5(),
        &[("1", 3), ("a0a1", 1), ("a1a2", 1), ("a2a3", 1), ("a3a4", 1), ("a0a4", 1)],
    )
    .expect("nonnegative on all assignments")
}

/// `2 - A1B1 - A1B2 - A2B1 + A2B2`.
pub fn chsh_ray() -> RayFunction {
    RayFunction::from_named(
        ContextStructure::chsh(),
        &[("1", 2), ("a0a2", -1), ("a0a3", -1), ("a1a2", -1), ("a1a3", 1)],
    )
    .expect("nonnegative on all assignments")
}

fn axis_setup() -> (Pentagram, SpinState) {
    (regular_pentagram(&Direction::Z, 0.0), SpinState::neutral(&Direction::Z))
}

fn violation() -> (bool, String) {
    let (p, psi) = axis_setup();
    let k = kcbs_sum(&p, &psi);
    let s = kcbs_spin_form(&p, &psi);
    let c = correlation_form(&p, &psi);
    let ok = (k - sqrt5()).abs() < 1e-9
        && (s - (5.0 - sqrt5())).abs() < 1e-9
        && s < 3.0
        && (c - (5.0 - 4.0 * sqrt5())).abs() < 1e-9
        && c < -3.0;
    (ok, format!("K = {k:.12}, spin form = {s:.12}, correlation form = {c:.12}"))
}

fn flip_orbit(base: &RayFunction) -> Vec<Vec<BigInt>> {
    let n = base.structure().n();
    let mut out: Vec<Vec<BigInt>> = (0..1usize << n)
        .map(|mask| {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            base.flip(&set).coefficients().to_vec()
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn decision() -> (bool, String) {
    let s = ContextStructure::pentagram5();
    let cert = match Certifier::new(s.clone()) {
        Ok(c) => c,
        Err(e) => return (false, e.to_string()),
    };
    let (p, psi) = axis_setup();
    let axis = marginals_from_state(&p, &psi);
    let base = pentagram_ray();
    let float = cert.float(&axis, DEFAULT_TOL);
    let exact = cert.interval(&axis, 1e-9);
    let ray_ok = |c: &crate::hv::HvCertificate| {
        c.verdict == Verdict::Infeasible
            && c.violated.as_ref().is_some_and(|v| v.ray == base && v.expectation < 0.0)
    };
    let axis_ok = float.as_ref().is_ok_and(ray_ok) && exact.as_ref().is_ok_and(ray_ok);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut feasible = 0;
    for _ in 0..100 {
        let pg = random_pentagram(&mut rng);
        let psi = random_coherent(&mut rng);
        let m = marginals_from_state(&pg, &psi);
        let Ok(c) = cert.float(&m, DEFAULT_TOL) else { continue };
        let witness_ok = c.witness.as_ref().is_some_and(|w| {
            let j = JointDistribution::new(5, w.weights_f64()).expect("valid weights");
            j.residual(&m).is_ok_and(|r| r < 1e-9)
        });
        let exact_ok = cert.interval(&m, 1e-9).is_ok_and(|c| {
            c.verdict == Verdict::Feasible
                && matches!(&c.witness, Some(crate::hv::certify::Witness::Exact(_)))
        });
        if c.verdict == Verdict::Feasible && witness_ok && exact_ok {
            feasible += 1;
        }
    }
    (
        axis_ok && feasible == 100,
        format!("axis state infeasible via the pentagram ray: {axis_ok}; coherent feasible with witness: {feasible}/100"),
    )
}

fn cone_chsh() -> (bool, String) {
    let start = Instant::now();
    let rays = match enumerate_extremal_rays(&ContextStructure::chsh()) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let nontrivial: Vec<Vec<BigInt>> = rays
        .iter()
        .filter(|r| r.class() == RayClass::Nontrivial)
        .map(|r| r.coefficients().to_vec())
        .collect();
    let orbit = flip_orbit(&chsh_ray());
    let ok = nontrivial.len() == 8 && nontrivial == orbit && secs < 10.0;
    (ok, format!("{} nontrivial, flip orbit match: {}, {secs:.3} s", nontrivial.len(), nontrivial == orbit))
}

fn cone_pentagram() -> (bool, String) {
    let start = Instant::now();
    let rays = match enumerate_extremal_rays(&ContextStructure::pentagram5()) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let trivial = rays.iter().filter(|r| r.class() == RayClass::Trivial).count();
    let nontrivial = rays.len() - trivial;
    let extremal = rays.iter().all(is_extremal);
    let includes = rays.contains(&pentagram_ray());
    let ok = trivial == 20 && nontrivial == 16 && extremal && includes && secs < 60.0;
    (
        ok,
        format!("{trivial} trivial, {nontrivial} nontrivial, rank-checked: {extremal}, includes pentagram ray: {includes}, {secs:.3} s"),
    )
}

/// Random models for the duality check: mixtures of point masses, and
/// quantum (or PR-box) models mixed toward them.
pub fn duality_model(
    s: &ContextStructure,
    violating: &MarginalModel<BigRational>,
    rng: &mut impl Rng,
) -> MarginalModel<BigRational> {
    let n = s.n();
    let k = rng.random_range(1..=4);
    let mut weights = vec![BigRational::zero(); 1 << n];
    let mut total = 0i64;
    let picks: Vec<(usize, i64)> = (0..k)
        .map(|_| (rng.random_range(0..1usize << n), rng.random_range(1..=9i64)))
        .collect();
    for (_, w) in &picks {
        total += w;
    }
    for (a, w) in picks {
        weights[a] += BigRational::new(w.into(), total.into());
    }
    let classical = JointDistribution::new(n, weights)
        .and_then(|j| j.pushforward(s))
        .expect("valid joint");
    if rng.random_bool(0.25) {
        return classical;
    }
    let mask: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    let t = BigRational::new(rng.random_range(0..=40i64).into(), 40.into());
    violating.flip(&mask).mix(&classical, &t).expect("same structure")
}

fn pr_box() -> MarginalModel<BigRational> {
    let h = BigRational::new(1.into(), 2.into());
    let z = BigRational::zero();
    let corr = vec![h.clone(), z.clone(), z.clone(), h.clone()];
    let anti = vec![z.clone(), h.clone(), h, z];
    MarginalModel::new(ContextStructure::chsh(), vec![corr.clone(), corr.clone(), corr, anti])
        .expect("valid box")
}

/// Exact verdicts against the ray test; returns (cases, disagreements).
pub fn duality_check(cases: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pent = ContextStructure::pentagram5();
    let chsh = ContextStructure::chsh();
    let cp = Certifier::new(pent.clone()).expect("enumerable");
    let cc = Certifier::new(chsh.clone()).expect("enumerable");
    let (p, psi) = axis_setup();
    let axis = rationalize(&marginals_from_state(&p, &psi), 1e-6).expect("rational").0;
    let pr = pr_box();
    let mut bad = 0;
    for i in 0..cases {
        let (cert, s, v) = if i % 2 == 0 { (&cp, &pent, &axis) } else { (&cc, &chsh, &pr) };
        let m = duality_model(s, v, &mut rng);
        let ray_ok = cert
            .rays()
            .expect("enumerated")
            .iter()
            .filter(|r| r.class() == RayClass::Nontrivial)
            .all(|r| !ray_expectation(r, &m).expect("same structure").is_negative());
        let verdict = cert.exact(&m).map(|c| c.verdict);
        let agree = match verdict {
            Ok(Verdict::Feasible) => ray_ok,
            Ok(Verdict::Infeasible) => !ray_ok,
            _ => false,
        };
        if !agree {
            bad += 1;
        }
    }
    (cases, bad)
}

fn duality() -> (bool, String) {
    let (cases, bad) = duality_check(1000, 5);
    (bad == 0, format!("{cases} exact models, {bad} disagreements"))
}

fn concurrence_grid() -> (bool, String) {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let phi = FRAC_PI_4 * i as f64 / 99.0;
        let psi = SpinState::canonical(phi);
        let w = wootters_concurrence(&two_qubit(&psi));
        let sum_sq = concurrence(&psi);
        let c = (2.0 * phi).cos();
        worst = worst.max((w - c).abs()).max((sum_sq - c).abs());
    }
    (worst < 1e-9, format!("max deviation {worst:.3e} over 100 angles"))
}

fn threshold() -> (bool, String) {
    let at = regular_k(phi_for_concurrence(1.0 / sqrt5()));
    let k0 = regular_k(0.0);
    let kq = regular_k(FRAC_PI_4);
    let target = (5.0 - sqrt5()) / 2.0;
    let checks = [
        (at - 2.0).abs() < 1e-12,
        (k0 - sqrt5()).abs() < 1e-12,
        (kq - target).abs() < 1e-12,
    ];
    (
        checks.iter().all(|&c| c),
        format!(
            "K(threshold) = {at:.15} [{}], K(0) = {k0:.15} [{}], K(pi/4) = {kq:.15} vs {target:.15} [{}]",
            pass(checks[0]),
            pass(checks[1]),
            pass(checks[2])
        ),
    )
}

fn pass(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn skew_detection() -> (bool, String) {
    let cfg = SearchConfig {
        restarts: 64,
        seed: 11,
        ..SearchConfig::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [0.1, 0.2, 0.3] {
        let start = Instant::now();
        let r = optimize_pentagram(&SpinState::canonical(phi_for_concurrence(c)), &cfg);
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(r) => {
                ok &= r.k > CLASSICAL_BOUND && secs < 60.0;
                parts.push(format!("c={c}: K={:.9}", r.k));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("c={c}: {e}"));
            }
        }
    }
    match optimize_pentagram(&SpinState::canonical(FRAC_PI_4), &cfg) {
        Ok(r) => {
            let worst = r.restarts.iter().map(|x| x.k).fold(f64::NEG_INFINITY, f64::max);
            ok &= worst <= CLASSICAL_BOUND + 1e-6 && r.restarts.len() == 64;
            parts.push(format!("c=0: max K over 64 restarts {worst:.12}"));
        }
        Err(e) => {
            ok = false;
            parts.push(format!("c=0: {e}"));
        }
    }
    (ok, parts.join("; "))
}

fn biphoton_numbers() -> (bool, String) {
    let d = symmetric_test_angle();
    let psi = SpinState::neutral(&Direction::Z);
    let rate = coincidence_rate(&tilted(&Direction::Z, d), &psi);
    let ok = (d - 0.8383).abs() <= 5e-4
        && (rate - 0.4472).abs() <= 1e-4
        && CLASSICAL_RATE == 0.4
        && 5.0 * CLASSICAL_RATE == CLASSICAL_BOUND
        && rate > CLASSICAL_RATE;
    (ok, format!("angle {d:.6} rad, rate {rate:.6}, classical threshold {CLASSICAL_RATE}"))
}

/// `P(X/n <= t)` for `X ~ Bin(n, p)` by direct log-space pmf summation.
pub fn wrong_side_oracle(p: f64, t: f64, n: u64) -> f64 {
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0f64;
    let mut total = 0.0;
    for x in 0..=n {
        if x > 0 {
            log_choose += ((n - x + 1) as f64).ln() - (x as f64).ln();
        }
        if x as f64 / n as f64 > t {
            break;
        }
        total += (log_choose + x as f64 * lp + (n - x) as f64 * lq).exp();
    }
    total
}

fn statistics() -> (bool, String) {
    let plan = match plan_trials(0.44721, 0.4, 0.95) {
        Ok(p) => p,
        Err(e) => return (false, e.to_string()),
    };
    let oracle = (1..).find(|&n| wrong_side_oracle(0.44721, 0.4, n) <= 0.05).expect("finite");
    let wrong = (0..1000u64)
        .filter(|&seed| {
            simulate_counts(0.44721, plan.trials, seed, 0.95).is_ok_and(|r| r.estimate <= 0.4)
        })
        .count();
    let ok = plan.trials == oracle && wrong <= 70;
    (
        ok,
        format!("n = {} (oracle {oracle}), wrong side in {wrong}/1000 runs", plan.trials),
    )
}

pub fn random_direction(rng: &mut impl Rng) -> Direction {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Ok(d) = Direction::normalize(v) {
            return d;
        }
    }
}

pub fn random_state(rng: &mut impl Rng) -> SpinState {
    loop {
        let re: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let im: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let amps = std::array::from_fn(|k| num_complex::Complex64::new(re[k], im[k]));
        if let Ok(s) = SpinState::normalize(amps) {
            return s;
        }
    }
}

pub fn random_real_state(rng: &mut impl Rng) -> SpinState {
    SpinState::neutral(&random_direction(rng))
}

/// Spin +1 along a random axis.
pub fn random_coherent(rng: &mut impl Rng) -> SpinState {
    let l = random_direction(rng);
    let (m, n) = l.completion();
    SpinState::coherent(&m, &n).expect("orthonormal completion")
}

pub fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    Rotation::from_quaternion(q).unwrap_or_else(|_| Rotation::identity())
}

pub fn random_pentagram(rng: &mut impl Rng) -> Pentagram {
    loop {
        let params = ChainParams {
            l1: random_direction(rng),
            t: std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI)),
        };
        if let Ok(p) = from_chain(&params) {
            return p;
        }
    }
}

/// One randomized invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct Property {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
}

impl Property {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn check(name: &'static str, cases: usize, mut f: impl FnMut(usize) -> (bool, f64)) -> Property {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (ok, dev) = f(i);
        if !ok {
            failures += 1;
        }
        worst = worst.max(dev);
    }
    Property {
        name,
        cases,
        failures,
        worst,
    }
}

fn norm3c(v: &[num_complex::Complex64; 3]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Randomized invariants of every module, `cases` each.
pub fn properties(cases: usize, seed: u64) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let mut out = Vec::new();

    out.push(check("spin: <S^2> + |overlap|^2 = 1", cases, |_| {
        let (l, psi) = (random_direction(r), random_state(r));
        let d = (s_squared_expectation(&l, &psi) + overlap(&l, &psi).norm_sqr() - 1.0).abs();
        (d < 1e-12, d)
    }));
    out.push(check("spin: triad completeness", cases, |_| {
        let rot = random_rotation(r);
        let psi = random_state(r);
        let m = rot.matrix();
        let sum: f64 = (0..3)
            .map(|k| {
                let col = Direction::normalize([m[(0, k)], m[(1, k)], m[(2, k)]]).expect("unit");
                overlap(&col, &psi).norm_sqr()
            })
            .sum();
        let d = (sum - 1.0).abs();
        (d < 1e-12, d)
    }));
    out.push(check("spin: S_l^2 psi = psi - l<l|psi>", cases, |_| {
        let (l, psi) = (random_direction(r), random_state(r));
        // S_l psi is not normalized, so the second application is done by hand
        let a = spin_apply(&l, &psi);
        let lv = l.as_array();
        let i = num_complex::Complex64::i();
        let twice = [
            i * (a[2] * lv[1] - a[1] * lv[2]),
            i * (a[0] * lv[2] - a[2] * lv[0]),
            i * (a[1] * lv[0] - a[0] * lv[1]),
        ];
        let ov = overlap(&l, &psi);
        let amps = psi.amplitudes();
        let want: [num_complex::Complex64; 3] = std::array::from_fn(|k| amps[k] - ov * lv[k]);
        let diff: [num_complex::Complex64; 3] = std::array::from_fn(|k| twice[k] - want[k]);
        let d = norm3c(&diff);
        (d < 1e-12, d)
    }));
    out.push(check("spin: concurrence rotation and phase invariance", cases, |_| {
        let psi = random_state(r);
        let rot = random_rotation(r);
        let alpha = r.random_range(0.0..2.0 * PI);
        let c = concurrence(&psi);
        let d = (concurrence(&rotate(&psi, &rot)) - c).abs();
        let dp = (concurrence(&psi.with_phase(alpha)) - c).abs();
        (d < 1e-12 && dp < 1e-12, d.max(dp))
    }));
    out.push(check("spin: wootters = concurrence", cases, |_| {
        let psi = random_state(r);
        let d = (wootters_concurrence(&two_qubit(&psi)) - concurrence(&psi)).abs();
        (d < 1e-9, d)
    }));
    out.push(check("spin: canonical round trip", cases, |_| {
        let psi = random_state(r);
        let cf = to_canonical(&psi);
        let d = cf.reconstruct().phase_distance(&psi);
        let ortho = cf.m.dot(&cf.n).abs();
        (d < 1e-9 && ortho < 1e-12, d)
    }));

    out.push(check("geom: 0 <= K <= gram_max <= 5, attained", cases, |_| {
        let p = random_pentagram(r);
        let psi = random_state(r);
        let k = kcbs_sum(&p, &psi);
        let (g, v) = gram_max(&p);
        let d = (kcbs_sum(&p, &SpinState::neutral(&v)) - g).abs();
        (k >= -1e-12 && k <= g + 1e-9 && g <= 5.0 + 1e-12 && d < 1e-9, d)
    }));
    out.push(check("geom: rotation equivariance", cases, |_| {
        let p = random_pentagram(r);
        let psi = random_state(r);
        let rot = random_rotation(r);
        let d = (kcbs_sum(&p.rotate(&rot), &rotate(&psi, &rot)) - kcbs_sum(&p, &psi)).abs();
        (d < 1e-12, d)
    }));
    out.push(check("geom: leg-sign invariance", cases, |_| {
        let p = random_pentagram(r);
        let psi = random_state(r);
        let q = p.flip_leg(r.random_range(0..5));
        let d = (kcbs_sum(&q, &psi) - kcbs_sum(&p, &psi))
            .abs()
            .max((kcbs_spin_form(&q, &psi) - kcbs_spin_form(&p, &psi)).abs())
            .max((correlation_form(&q, &psi) - correlation_form(&p, &psi)).abs());
        (d < 1e-12, d)
    }));
    out.push(check("geom: form identities", cases, |_| {
        let p = random_pentagram(r);
        let psi = random_state(r);
        let k = kcbs_sum(&p, &psi);
        let s = kcbs_spin_form(&p, &psi);
        let d = (k + s - 5.0).abs().max((correlation_form(&p, &psi) - (4.0 * s - 15.0)).abs());
        (d < 1e-12, d)
    }));
    out.push(check("geom: single-flip inequality", cases, |_| {
        let p = regular_pentagram(&random_direction(r), r.random_range(0.0..2.0 * PI));
        let psi = random_state(r);
        let s = |k: usize| s_squared_expectation(p.leg(k), &psi);
        let i = r.random_range(0..5);
        let slack = s(i + 3) + s(i + 2) - s(i);
        (slack >= -1e-12, (-slack).max(0.0))
    }));

    let pent = ContextStructure::pentagram5();
    let cert = Certifier::new(pent.clone()).expect("enumerable");
    out.push(check("hv: quantum models are consistent", cases, |_| {
        let m = marginals_from_state(&random_pentagram(r), &random_state(r));
        let ok = MarginalModel::new(pent.clone(), m.tables().to_vec()).is_ok();
        (ok, 0.0)
    }));
    let (ap, apsi) = axis_setup();
    let axis = rationalize(&marginals_from_state(&ap, &apsi), 1e-6).expect("rational").0;
    out.push(check("hv: exact witnesses reproduce the model", cases, |_| {
        let m = duality_model(&pent, &axis, r);
        match cert.exact(&m) {
            Ok(c) => match (&c.verdict, &c.witness) {
                (Verdict::Feasible, Some(crate::hv::certify::Witness::Exact(j))) => {
                    (j.pushforward(&pent).is_ok_and(|pf| pf == m), 0.0)
                }
                (Verdict::Infeasible, None) => (true, 0.0),
                _ => (false, 0.0),
            },
            Err(_) => (false, 0.0),
        }
    }));
    out.push(check("hv: infeasible rays are negative", cases, |_| {
        let m = duality_model(&pent, &axis, r);
        match cert.exact(&m) {
            Ok(c) if c.verdict == Verdict::Infeasible => {
                let ray = &c.violated.as_ref().expect("ray").ray;
                let e = independent_expectation(ray, &m);
                (e.is_negative(), 0.0)
            }
            Ok(_) => (true, 0.0),
            Err(_) => (false, 0.0),
        }
    }));
    out.push(check("hv: flip invariance of the verdict", cases, |_| {
        let m = duality_model(&pent, &axis, r);
        let set: Vec<usize> = (0..5).filter(|_| r.random_bool(0.5)).collect();
        let a = cert.exact(&m).map(|c| c.verdict);
        let b = cert.exact(&m.flip(&set)).map(|c| c.verdict);
        (a.is_ok() && a == b && m.flip(&set).flip(&set) == m, 0.0)
    }));
    let (dc, dbad) = duality_check(cases, seed ^ 0x5eed);
    out.push(Property {
        name: "hv: lp verdict <=> nontrivial ray test",
        cases: dc,
        failures: dbad,
        worst: 0.0,
    });
    let rays = cert.rays().expect("enumerated").to_vec();
    out.push(check("hv: rays and their flips are extremal", rays.len() * 32, |i| {
        let ray = &rays[i / 32];
        let mask = i % 32;
        let set: Vec<usize> = (0..5).filter(|k| mask & (1 << k) != 0).collect();
        (is_extremal(&ray.flip(&set)), 0.0)
    }));

    out.push(check("search: regular_K matches direct evaluation", cases, |_| {
        let phi = r.random_range(0.0..FRAC_PI_4);
        let psi = SpinState::canonical(phi);
        let m = to_canonical(&psi).m;
        let d = (kcbs_sum(&regular_pentagram(&m, r.random_range(0.0..2.0 * PI)), &psi)
            - regular_k(phi))
        .abs();
        (d < 1e-12, d)
    }));
    let small = SearchConfig {
        restarts: 1,
        max_iterations: 200,
        ..SearchConfig::default()
    };
    out.push(check("search: results are valid and replayable", cases, |i| {
        let psi = random_state(r);
        let cfg = SearchConfig {
            seed: i as u64,
            ..small.clone()
        };
        match optimize_pentagram(&psi, &cfg) {
            Ok(res) => {
                let d = (kcbs_sum(&res.pentagram, &psi) - res.k).abs();
                let valid = Pentagram::new(*res.pentagram.legs()).is_ok();
                let replay = from_chain(&res.params).is_ok_and(|p| p == res.pentagram);
                (d < 1e-9 && valid && replay, d)
            }
            Err(_) => (false, f64::INFINITY),
        }
    }));

    out.push(check("biphoton: rate + <S^2> = 1", cases, |_| {
        let (l, psi) = (random_direction(r), random_state(r));
        let d = (coincidence_rate(&l, &psi) + s_squared_expectation(&l, &psi) - 1.0).abs();
        (d < 1e-12, d)
    }));
    out.push(check("biphoton: rotational covariance", cases, |_| {
        let (l, psi) = (random_direction(r), random_real_state(r));
        let rot = random_rotation(r);
        let d = (coincidence_rate(&rot.rotate_direction(&l), &rotate(&psi, &rot))
            - coincidence_rate(&l, &psi))
        .abs();
        (d < 1e-12, d)
    }));
    out.push(check("biphoton: 5 x rate at the test angle = K", cases, |_| {
        let axis = random_direction(r);
        let psi = SpinState::neutral(&axis);
        let p = regular_pentagram(&axis, r.random_range(0.0..2.0 * PI));
        let rate = coincidence_rate(&tilted(&axis, symmetric_test_angle()), &psi);
        let d = (5.0 * rate - kcbs_sum(&p, &psi)).abs();
        (d < 1e-12, d)
    }));
    let plan = plan_trials(0.44721, 0.4, 0.95).expect("feasible plan");
    // one case per seed; the suite fails when the aggregate rate exceeds 7%
    let wrong = (0..cases as u64)
        .filter(|&s| {
            simulate_counts(0.44721, plan.trials, seed.wrapping_add(s), 0.95)
                .map_or(true, |c| c.estimate <= 0.4)
        })
        .count();
    let rate = wrong as f64 / cases as f64;
    out.push(Property {
        name: "biphoton: planned trials keep the error rate",
        cases,
        failures: if rate <= 0.07 { 0 } else { wrong },
        worst: rate,
    });
    out
}

/// `<F>` from the tables, without the moment vector: each monomial's
/// expectation is summed from its first context's table.
fn independent_expectation(ray: &RayFunction, m: &MarginalModel<BigRational>) -> BigRational {
    let s = m.structure();
    let mut total = BigRational::zero();
    for (mono, c) in s.monomials().iter().zip(ray.coefficients()) {
        if c.is_zero() {
            continue;
        }
        let mut mu = BigRational::zero();
        if mono.is_empty() {
            mu = BigRational::from_integer(1.into());
        } else {
            let ctx = s.contexts().iter().position(|ctx| mono.iter().all(|i| ctx.contains(i))).expect("covered");
            for (o, p) in m.table(ctx).iter().enumerate() {
                let sign: i64 = mono
                    .iter()
                    .map(|i| {
                        let k = s.context(ctx).iter().position(|x| x == i).expect("member");
                        s.outcome_value(ctx, o, k)
                    })
                    .product();
                mu += p * BigRational::from_integer(sign.into());
            }
        }
        total += mu * BigRational::from_integer(c.clone());
    }
    total
}
