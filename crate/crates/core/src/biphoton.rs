//! Biphoton polarization states in Stokes space and the coincidence-rate
//! test built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use std::io::Write;

use crate::error::{Error, Result};
use crate::report::sig17;
use crate::spin::{overlap, Direction, SpinState};

/// A point on the Poincare sphere.
pub type StokesDirection = Direction;

/// Largest trial count [`plan_trials`] will search.
pub const MAX_TRIALS: u64 = 1 << 32;

/// Classical bound on the single coincidence rate of the symmetric test.
pub const CLASSICAL_RATE: f64 = 0.4;

/// Neutrally polarized biphoton `(|PQ> + |QP>)/sqrt2` for orthogonal
/// polarizations `P`, `Q` at `+-p` on the Poincare sphere: the real state `p`.
pub fn biphoton_state(p: &StokesDirection) -> SpinState {
    SpinState::neutral(p)
}

/// `|<l|psi>|^2`, the coincidence probability behind the analyzer pair `l`.
pub fn coincidence_rate(l: &StokesDirection, psi: &SpinState) -> f64 {
    overlap(l, psi).norm_sqr()
}

/// Rate seen with visibility `v`: `v r + (1 - v)/4`.
pub fn coincidence_rate_with_visibility(l: &StokesDirection, psi: &SpinState, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("visibility {v} outside [0, 1]")));
    }
    Ok(v * coincidence_rate(l, psi) + (1.0 - v) / 4.0)
}

/// Angle between `l` and a real state at which the rate is `1/sqrt5`:
/// `arccos(5^(-1/4))`.
pub fn symmetric_test_angle() -> f64 {
    5f64.powf(-0.25).acos()
}

/// `cos(delta) p + sin(delta) e` with `e` the first completion vector of `p`.
pub fn tilted(p: &StokesDirection, delta: f64) -> StokesDirection {
    let (e, _) = p.completion();
    let (s, c) = delta.sin_cos();
    let (p, e) = (p.as_array(), e.as_array());
    Direction::normalize(std::array::from_fn(|j| c * p[j] + s * e[j])).expect("unit combination")
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} {r} outside [0, 1]")))
    }
}

fn check_confidence(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence {c} outside (0, 1)")))
    }
}

/// Exact (Clopper-Pearson) interval for `x` successes in `n` trials.
pub fn clopper_pearson(x: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    check_confidence(confidence)?;
    if n == 0 || x > n {
        return Err(Error::InvalidArgument(format!("{x} successes in {n} trials")));
    }
    let alpha = 1.0 - confidence;
    let (xf, nf) = (x as f64, n as f64);
    // P(X >= x | p) = I_p(x, n - x + 1) is increasing in p
    let lower = if x == 0 {
        0.0
    } else {
        bisect(|p| beta_reg(xf, nf - xf + 1.0, p) - alpha / 2.0)
    };
    // P(X <= x | p) = 1 - I_p(x + 1, n - x) is decreasing in p
    let upper = if x == n {
        1.0
    } else {
        bisect(|p| alpha / 2.0 - (1.0 - beta_reg(xf + 1.0, nf - xf, p)))
    };
    Ok((lower, upper))
}

/// Root of an increasing function on `[0, 1]`.
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub coincidences: u64,
    pub estimate: f64,
    pub confidence: f64,
    pub ci: [f64; 2],
}

/// Bernoulli sampling of `trials` events at `rate`, deterministic per seed,
/// with an exact binomial interval.
pub fn simulate_counts(rate: f64, trials: u64, seed: u64, confidence: f64) -> Result<CountReport> {
    check_rate("rate", rate)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coincidences = (0..trials).filter(|_| rng.random::<f64>() < rate).count() as u64;
    let (lo, hi) = clopper_pearson(coincidences, trials, confidence)?;
    Ok(CountReport {
        rate,
        trials,
        seed,
        coincidences,
        estimate: coincidences as f64 / trials as f64,
        confidence,
        ci: [lo, hi],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidencePlan {
    pub true_rate: f64,
    pub threshold: f64,
    pub confidence: f64,
    pub trials: u64,
    /// Probability that the estimate lands on the wrong side at `trials`.
    pub wrong_side: f64,
    /// Smallest `n` such that every trial count from `n` on meets the
    /// confidence (the tail is a sawtooth in `n`, so this can exceed
    /// `trials`).
    pub stable_trials: u64,
}

/// Largest `x` with `x / n <= t` as computed in `f64`.
fn last_at_or_below(t: f64, n: u64) -> Option<u64> {
    let nf = n as f64;
    let mut k = (t * nf).floor().clamp(-1.0, nf) as i64;
    while k >= 0 && k as f64 / nf > t {
        k -= 1;
    }
    while k < n as i64 && (k + 1) as f64 / nf <= t {
        k += 1;
    }
    (k >= 0).then_some(k as u64)
}

/// `P(X <= k)` for `X ~ Bin(n, p)`.
fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    beta_reg((n - k) as f64, k as f64 + 1.0, 1.0 - p)
}

/// Probability that `X / n` falls on the wrong side of `threshold` (ties
/// count as wrong).
pub fn wrong_side_probability(true_rate: f64, threshold: f64, n: u64) -> f64 {
    if true_rate > threshold {
        last_at_or_below(threshold, n).map_or(0.0, |k| binomial_cdf(k, n, true_rate))
    } else {
        // X / n >= threshold  <=>  X > last value strictly below threshold
        let below = last_strictly_below(threshold, n);
        match below {
            Some(k) => 1.0 - binomial_cdf(k, n, true_rate),
            None => 1.0,
        }
    }
}

fn last_strictly_below(t: f64, n: u64) -> Option<u64> {
    let nf = n as f64;
    let mut k = (t * nf).ceil().clamp(0.0, nf) as i64;
    while k >= 0 && k as f64 / nf >= t {
        k -= 1;
    }
    while k < n as i64 && ((k + 1) as f64 / nf) < t {
        k += 1;
    }
    (k >= 0).then_some(k as u64)
}

/// Smallest `n` for which the estimate lands on the wrong side of
/// `threshold` with probability at most `1 - confidence`.
pub fn plan_trials(true_rate: f64, threshold: f64, confidence: f64) -> Result<CoincidencePlan> {
    check_rate("true rate", true_rate)?;
    check_rate("threshold", threshold)?;
    check_confidence(confidence)?;
    if true_rate == threshold {
        return Err(Error::InfeasiblePlan(threshold));
    }
    let budget = 1.0 - confidence;
    // Hoeffding: the wrong-side probability is below exp(-2 n gap^2), so
    // every n past this bound qualifies
    let gap = (true_rate - threshold).abs();
    let bound = ((-budget.ln()) / (2.0 * gap * gap)).ceil();
    if !(bound < MAX_TRIALS as f64) {
        return Err(Error::InfeasiblePlan(threshold));
    }
    let bound = (bound as u64).max(1);
    let mut first: Option<(u64, f64)> = None;
    let mut last_failure = 0;
    for n in 1..=bound {
        let w = wrong_side_probability(true_rate, threshold, n);
        if w <= budget {
            first.get_or_insert((n, w));
        } else {
            last_failure = n;
        }
    }
    let (trials, wrong_side) = first.expect("the Hoeffding bound qualifies");
    Ok(CoincidencePlan {
        true_rate,
        threshold,
        confidence,
        trials,
        wrong_side,
        stable_trials: last_failure + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub angle: f64,
    pub predicted: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Predicted and simulated rates at analyzer angles `delta` from the real
/// state `p`. Row `i` samples with seed stream `i` of `seed`.
pub fn sweep(
    p: &StokesDirection,
    angles: &[f64],
    trials: u64,
    seed: u64,
    confidence: f64,
    visibility: f64,
) -> Result<Vec<SweepRow>> {
    let psi = biphoton_state(p);
    angles
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let predicted = coincidence_rate_with_visibility(&tilted(p, delta), &psi, visibility)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let report = simulate_counts(predicted, trials, rng.random(), confidence)?;
            Ok(SweepRow {
                angle: delta,
                predicted,
                estimate: report.estimate,
                ci_low: report.ci[0],
                ci_high: report.ci[1],
            })
        })
        .collect()
}

/// Writes sweep rows as CSV with a header line and 17-digit floats.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["angle", "predicted", "estimate", "ci_low", "ci_high"]).map_err(err)?;
    for r in rows {
        w.write_record([r.angle, r.predicted, r.estimate, r.ci_low, r.ci_high].map(sig17))
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}
