//! Multistart search for pentagrams maximizing `K = sum |<l_k|psi>|^2`.

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::geom::{chain_legs, from_chain, kcbs_sum, ChainParams, Pentagram, CLASSICAL_BOUND};
use crate::spin::{to_canonical, Direction, SpinState};

/// Closure guard band: chains with `|l4 x l1|` below this are rejected.
pub const CLOSURE_GUARD: f64 = 1e-6;

/// `K` must exceed the classical bound by this much to count as detected.
pub const DETECTION_TOL: f64 = 1e-9;

/// Cost assigned outside the valid chart (a `K` no pentagram reaches).
const PENALTY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iterations: u64,
    pub seed: u64,
    /// Stop when the standard deviation of simplex costs drops below this.
    pub tol: f64,
    /// Initial simplex edge in radians.
    pub step: f64,
    /// Edge of the second, polishing simplex around each local optimum.
    pub polish_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 64,
            max_iterations: 3000,
            seed: 0,
            tol: 1e-13,
            step: 0.4,
            polish_step: 0.02,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if !(self.step > 0.0) || !(self.polish_step > 0.0) {
            return Err(Error::InvalidArgument("simplex steps must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub k: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub pentagram: Pentagram,
    pub params: ChainParams,
    pub k: f64,
    pub violation: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

/// Search coordinates: polar and azimuth of `l1` in the state's canonical
/// frame `(m, n, m x n)`, then the three chain angles.
struct Objective<'a> {
    psi: &'a SpinState,
    frame: [Direction; 3],
}

impl Objective<'_> {
    fn new(psi: &SpinState) -> Objective<'_> {
        let cf = to_canonical(psi);
        let third = Direction::normalize(cf.m.cross(&cf.n)).expect("m and n are orthonormal");
        Objective {
            psi,
            frame: [cf.m, cf.n, third],
        }
    }

    fn params(&self, x: &[f64]) -> ChainParams {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        let w = [st * cp, st * sp, ct];
        let f = self.frame.map(|d| d.as_array());
        let v = std::array::from_fn(|j| w[0] * f[0][j] + w[1] * f[1][j] + w[2] * f[2][j]);
        ChainParams {
            l1: Direction::normalize(v).expect("unit combination of a frame"),
            t: [x[2], x[3], x[4]],
        }
    }

    fn pentagram(&self, x: &[f64]) -> Option<(Pentagram, ChainParams)> {
        let p = self.params(x);
        let [l1, _, _, l4] = chain_legs(&p);
        let c = l4.cross(&l1);
        if (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() < CLOSURE_GUARD {
            return None;
        }
        from_chain(&p).ok().map(|pg| (pg, p))
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, ArgminError> {
        Ok(match self.pentagram(x) {
            Some((p, _)) => -kcbs_sum(&p, self.psi),
            None => PENALTY,
        })
    }
}

fn simplex(x: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut out = vec![x.to_vec()];
    for i in 0..x.len() {
        let mut v = x.to_vec();
        v[i] += step;
        out.push(v);
    }
    out
}

fn nelder_mead(obj: &Objective, x: &[f64], cfg: &SearchConfig, step: f64) -> (Vec<f64>, f64, u64) {
    let solver = NelderMead::new(simplex(x, step))
        .with_sd_tolerance(cfg.tol)
        .expect("positive tolerance");
    let start = obj.cost(&x.to_vec()).unwrap_or(PENALTY);
    let run = Executor::new(Objective { psi: obj.psi, frame: obj.frame }, solver)
        .configure(|s| s.max_iters(cfg.max_iterations))
        .run();
    match run {
        Ok(res) => {
            let state = res.state();
            match (&state.best_param, state.best_cost) {
                (Some(p), c) if c < start => (p.clone(), c, state.iter),
                _ => (x.to_vec(), start, state.iter),
            }
        }
        Err(_) => (x.to_vec(), start, 0),
    }
}

/// RNG for restart `index`: the root seed with the restart index as stream.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_restart(obj: &Objective, cfg: &SearchConfig, index: usize) -> (Vec<f64>, f64, u64) {
    let mut rng = restart_rng(cfg.seed, index);
    let x0 = loop {
        let x = vec![
            rng.random_range(-1.0f64..1.0).acos(),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ];
        if obj.pentagram(&x).is_some() {
            break x;
        }
    };
    let (x1, _, it1) = nelder_mead(obj, &x0, cfg, cfg.step);
    let (x2, c2, it2) = nelder_mead(obj, &x1, cfg, cfg.polish_step);
    (x2, -c2, it1 + it2)
}

/// Maximizes `K` over pentagrams by multistart Nelder-Mead.
///
/// Restarts run in parallel; the best `K` wins with ties going to the lowest
/// restart index, so results depend only on `psi` and `cfg`.
pub fn optimize_pentagram(psi: &SpinState, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let obj = Objective::new(psi);
    let runs: Vec<(Vec<f64>, f64, u64)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run_restart(&obj, cfg, i))
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 > runs[best].1 {
            best = i;
        }
    }
    let (pentagram, params) = obj
        .pentagram(&runs[best].0)
        .ok_or_else(|| Error::Solver("no restart reached a valid pentagram".into()))?;
    let k = kcbs_sum(&pentagram, psi);
    Ok(SearchResult {
        pentagram,
        params,
        k,
        violation: k - CLASSICAL_BOUND,
        best_restart: best,
        restarts: runs
            .iter()
            .enumerate()
            .map(|(index, r)| RestartSummary {
                index,
                k: r.1,
                iterations: r.2,
            })
            .collect(),
    })
}

/// Best regular-pentagram `K` for the canonical state at `phi`, axis along
/// `m`: `sqrt5 cos^2 phi + (5/2)(1 - 1/sqrt5) sin^2 phi`.
pub fn regular_k(phi: f64) -> f64 {
    let s5 = 5f64.sqrt();
    let (s, c) = phi.sin_cos();
    s5 * c * c + 2.5 * (1.0 - 1.0 / s5) * s * s
}

/// Canonical angle with `cos 2 phi = c`.
pub fn phi_for_concurrence(c: f64) -> f64 {
    0.5 * c.clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub c: f64,
    pub k: f64,
    pub violated: bool,
    /// `c > 0` but no violating pentagram was found.
    pub flagged: bool,
    pub pentagram: Pentagram,
}

/// Runs [`optimize_pentagram`] on the canonical state for each concurrence.
pub fn detection_scan(c_values: &[f64], cfg: &SearchConfig) -> Result<Vec<ScanRow>> {
    c_values
        .iter()
        .map(|&c| {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!("concurrence {c} outside [0, 1]")));
            }
            let psi = SpinState::canonical(phi_for_concurrence(c));
            let r = optimize_pentagram(&psi, cfg)?;
            let violated = r.k > CLASSICAL_BOUND + DETECTION_TOL;
            Ok(ScanRow {
                c,
                k: r.k,
                violated,
                flagged: c > 0.0 && !violated,
                pentagram: r.pentagram,
            })
        })
        .collect()
}

/// `phi` range accepted by [`regular_k`].
pub const PHI_MAX: f64 = FRAC_PI_4;
