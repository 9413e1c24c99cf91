//! Euler–Maruyama integration of the drifted Loewner driving process
//! `da_1 = √3 dB - 3 ∂_{a_1} log R dt`, `dx = 2 dt / (x - a_1)`, with
//! swallowing detection, Monte Carlo harnesses and zipper traces.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cont_obs::{drift, drift_five_point, drift_pmpf, drift_three_point, ContinuumBC};
use crate::crossing::GFunction;
use crate::{IflError, Result};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_DRIFT_CAP: f64 = 1e3;
pub const DEFAULT_SWALLOW_EPS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    /// Index into `tracked` of the point that met the driving value.
    Swallowed(usize),
}

/// `tracked` lists `a_2..a_m` and then the finite `b`'s, in the order of
/// the boundary data they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftState {
    pub t: f64,
    pub a1: f64,
    pub tracked: Vec<f64>,
    pub m: usize,
    pub zeta: Vec<i8>,
    pub last_at_infinity: bool,
    pub status: Status,
    /// `∫ D dt` accumulated so far.
    pub drift_integral: f64,
}

impl DriftState {
    pub fn new(bc: &ContinuumBC) -> Result<Self> {
        bc.validate()?;
        if bc.m() == 0 {
            return Err(IflError::InvalidBc("the driving point a_1 is missing".into()));
        }
        Ok(DriftState {
            t: 0.0,
            a1: bc.a[0],
            tracked: bc.a[1..].iter().chain(&bc.b).copied().collect(),
            m: bc.m(),
            zeta: bc.zeta.clone(),
            last_at_infinity: bc.last_at_infinity,
            status: Status::Running,
            drift_integral: 0.0,
        })
    }

    pub fn b(&self) -> &[f64] {
        &self.tracked[self.m - 1..]
    }

    pub fn others(&self) -> &[f64] {
        &self.tracked[..self.m - 1]
    }

    pub fn bc(&self) -> Result<ContinuumBC> {
        let a: Vec<f64> = std::iter::once(self.a1).chain(self.others().iter().copied()).collect();
        if self.last_at_infinity {
            ContinuumBC::with_infinite_end(a, self.b().to_vec(), self.zeta.clone())
        } else {
            ContinuumBC::new(a, self.b().to_vec(), self.zeta.clone())
        }
    }

    pub fn running(&self) -> bool {
        self.status == Status::Running
    }

    /// Smallest distance from `a_1` to a tracked point.
    pub fn min_gap(&self) -> f64 {
        self.tracked
            .iter()
            .map(|x| (x - self.a1).abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn nearest(&self) -> usize {
        (0..self.tracked.len())
            .min_by(|&i, &j| {
                (self.tracked[i] - self.a1)
                    .abs()
                    .total_cmp(&(self.tracked[j] - self.a1).abs())
            })
            .unwrap_or(0)
    }
}

/// How the drift is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftModel {
    /// Numerical derivative of the solved residue.
    Solved,
    /// Explicit formulas for the three-, four- and five-point shapes.
    ClosedForm,
    /// Plain Loewner evolution driven by `√3 B`.
    Zero,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepConfig {
    pub model: DriftModel,
    /// Bound on `|D|`, applied to the nominal step: a step of length `h`
    /// moves the driving value by at most `drift_cap * dt` through drift.
    pub drift_cap: f64,
    pub swallow_eps: f64,
    /// With `Some(k)`, paths take steps `min(dt max(1, (s/s0)^2), s^2/k)`
    /// where `s` is the smallest gap to `a_1` and `s0` its initial value.
    pub refine: Option<f64>,
}

pub const DEFAULT_REFINE: f64 = 100.0;

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            model: DriftModel::ClosedForm,
            drift_cap: DEFAULT_DRIFT_CAP,
            swallow_eps: DEFAULT_SWALLOW_EPS,
            refine: Some(DEFAULT_REFINE),
        }
    }
}

impl StepConfig {
    pub fn fixed_step(model: DriftModel) -> Self {
        StepConfig {
            model,
            refine: None,
            ..Default::default()
        }
    }
}

pub fn drift_at(state: &DriftState, model: DriftModel) -> Result<f64> {
    match model {
        DriftModel::Zero => Ok(0.0),
        DriftModel::Solved => drift(&state.bc()?),
        DriftModel::ClosedForm => {
            let (a1, o, b) = (state.a1, state.others(), state.b());
            match (state.m, b.len(), state.last_at_infinity, state.zeta.as_slice()) {
                (1, 2, false, []) => Ok(drift_three_point(a1, b[0], b[1])),
                (1, 1, true, []) => Ok(-1.5 / (a1 - b[0])),
                (2, 1, true, []) => Ok(drift_pmpf(a1, o[0], b[0])),
                (1, 3, true, [-1]) => Ok(drift_five_point(a1, b[0], b[1], b[2])),
                _ => Err(IflError::InvalidBc(
                    "no explicit drift for this configuration; use the solved model".into(),
                )),
            }
        }
    }
}

/// One Euler–Maruyama step with Brownian increment `dw ~ N(0, dt)`.
pub fn step(state: &DriftState, dt: f64, dw: f64, cfg: &StepConfig) -> DriftState {
    let mut next = state.clone();
    if !state.running() {
        return next;
    }
    let near = state.nearest();
    if state.tracked.get(near).is_some_and(|x| (x - state.a1).abs() < cfg.swallow_eps) {
        next.status = Status::Swallowed(near);
        return next;
    }
    let d = match drift_at(state, cfg.model) {
        Ok(d) if d.is_finite() => d.clamp(-cfg.drift_cap, cfg.drift_cap),
        _ => {
            next.status = Status::Swallowed(state.nearest());
            return next;
        }
    };
    next.a1 = state.a1 + 3f64.sqrt() * dw + d * dt;
    next.t = state.t + dt;
    next.drift_integral = state.drift_integral + d * dt;
    for (x, &x0) in next.tracked.iter_mut().zip(&state.tracked) {
        *x = x0 + 2.0 * dt / (x0 - state.a1);
    }
    // a point is swallowed once the driving value reaches it or jumps past it
    let hit = (0..next.tracked.len())
        .filter(|&i| {
            let before = state.tracked[i] - state.a1;
            let after = next.tracked[i] - next.a1;
            after.abs() < cfg.swallow_eps || before.signum() != after.signum()
        })
        .min_by(|&i, &j| {
            (state.tracked[i] - state.a1)
                .abs()
                .total_cmp(&(state.tracked[j] - state.a1).abs())
        });
    if let Some(i) = hit {
        next.status = Status::Swallowed(i);
    }
    next
}

/// Independent noise stream of path `path` under the master `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Runs until swallowing or `t_max`, calling `observe` after every step.
pub fn run_path(
    start: &DriftState,
    dt: f64,
    t_max: f64,
    cfg: &StepConfig,
    rng: &mut ChaCha8Rng,
    mut observe: impl FnMut(&DriftState),
) -> DriftState {
    let mut s = start.clone();
    let s0 = start.min_gap();
    while s.running() && s.t < t_max - 0.5 * dt {
        let mut h = dt;
        let mut local = *cfg;
        if let Some(k) = cfg.refine {
            let gap = s.min_gap();
            h = (dt * (gap / s0).powi(2).max(1.0)).min(gap * gap / k);
            local.drift_cap = cfg.drift_cap * dt / h;
        }
        h = h.min(t_max - s.t).max(1e-300);
        let z: f64 = StandardNormal.sample(rng);
        s = step(&s, h, h.sqrt() * z, &local);
        observe(&s);
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub driving: Vec<f64>,
    pub tracked: Vec<Vec<f64>>,
    pub status: Status,
    pub drift_integral: f64,
    /// Tips of the reconstructed curve at the recorded times.
    pub curve: Option<Vec<Complex64>>,
}

fn check_steps(dt: f64, t_max: f64) -> Result<()> {
    if !(dt > 0.0 && t_max > 0.0 && dt.is_finite() && t_max.is_finite()) {
        return Err(IflError::InvalidArgument(format!(
            "need positive finite dt and horizon, got dt = {dt}, T = {t_max}"
        )));
    }
    Ok(())
}

/// Ensemble of traces recorded every `record_every` steps.
pub fn simulate(
    bc: &ContinuumBC,
    t_max: f64,
    dt: f64,
    seed: u64,
    n_paths: usize,
    record_every: usize,
    cfg: &StepConfig,
) -> Result<Vec<Trace>> {
    check_steps(dt, t_max)?;
    let start = DriftState::new(bc)?;
    drift_at(&start, cfg.model)?;
    let every = record_every.max(1);
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut tr = Trace {
                times: vec![0.0],
                driving: vec![start.a1],
                tracked: vec![start.tracked.clone()],
                status: Status::Running,
                drift_integral: 0.0,
                curve: None,
            };
            let mut n = 0usize;
            let end = run_path(&start, dt, t_max, cfg, &mut rng, |s| {
                n += 1;
                if n % every == 0 || !s.running() {
                    tr.times.push(s.t);
                    tr.driving.push(s.a1);
                    tr.tracked.push(s.tracked.clone());
                }
            });
            if tr.times.last() != Some(&end.t) {
                tr.times.push(end.t);
                tr.driving.push(end.a1);
                tr.tracked.push(end.tracked.clone());
            }
            tr.status = end.status;
            tr.drift_integral = end.drift_integral;
            tr
        })
        .collect())
}

/// Four-point `+/-/+/free` data `a_2 < a_1 < b_1`, `b_2 = ∞`.
pub fn pmpf_bc(a2: f64, a1: f64, b1: f64) -> Result<ContinuumBC> {
    if !(a2 < a1 && a1 < b1) {
        return Err(IflError::InvalidBc(format!(
            "need a2 < a1 < b1, got ({a2}, {a1}, {b1})"
        )));
    }
    ContinuumBC::with_infinite_end(vec![a1, a2], vec![b1], vec![])
}

fn pmpf_lambda(s: &DriftState) -> f64 {
    match s.status {
        Status::Swallowed(1) => 1.0,
        Status::Swallowed(_) => 0.0,
        Status::Running => ((s.a1 - s.tracked[0]) / (s.tracked[1] - s.tracked[0])).clamp(0.0, 1.0),
    }
}

/// Final states of a four-point ensemble.
pub fn pmpf_ensemble(
    bc: &ContinuumBC,
    n_paths: usize,
    dt: f64,
    t_max: f64,
    seed: u64,
    cfg: &StepConfig,
) -> Result<Vec<DriftState>> {
    check_steps(dt, t_max)?;
    if bc.m() != 2 || bc.k() != 1 || !bc.last_at_infinity {
        return Err(IflError::InvalidBc("expected +/-/+/free data with b_2 at infinity".into()));
    }
    let start = DriftState::new(bc)?;
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| run_path(&start, dt, t_max, cfg, &mut path_rng(seed, p as u64), |_| {}))
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct HitEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: usize,
    pub hit_b1: usize,
    pub hit_a2: usize,
    /// Paths still running at the horizon.
    pub censored: usize,
}

/// Fraction of paths that swallow `b_1` before `a_2`.
pub fn hitting_from(finals: &[DriftState]) -> Result<HitEstimate> {
    if finals.is_empty() {
        return Err(IflError::InvalidArgument("empty ensemble".into()));
    }
    let hit_b1 = finals.iter().filter(|s| s.status == Status::Swallowed(1)).count();
    let hit_a2 = finals.iter().filter(|s| s.status == Status::Swallowed(0)).count();
    let n = finals.len();
    let p = hit_b1 as f64 / n as f64;
    Ok(HitEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        paths: n,
        hit_b1,
        hit_a2,
        censored: n - hit_b1 - hit_a2,
    })
}

pub fn hitting_probability(
    bc: &ContinuumBC,
    n_paths: usize,
    dt: f64,
    t_max: f64,
    seed: u64,
    cfg: &StepConfig,
) -> Result<HitEstimate> {
    hitting_from(&pmpf_ensemble(bc, n_paths, dt, t_max, seed, cfg)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleStat {
    pub expected: f64,
    pub mean: f64,
    pub stderr: f64,
    pub z: f64,
    pub paths: usize,
}

/// Compares the ensemble mean of `G(λ(τ ∧ T))` with `G(λ(0))`.
pub fn martingale_from(start: &ContinuumBC, finals: &[DriftState], g: &GFunction) -> Result<MartingaleStat> {
    if finals.len() < 2 {
        return Err(IflError::InvalidArgument("need at least two surviving paths".into()));
    }
    let s0 = DriftState::new(start)?;
    let expected = g.eval(pmpf_lambda(&s0))?;
    let vals = finals
        .iter()
        .map(|s| g.eval(pmpf_lambda(s)))
        .collect::<Result<Vec<_>>>()?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let z = if stderr > 0.0 { (mean - expected) / stderr } else if mean == expected { 0.0 } else { f64::INFINITY };
    Ok(MartingaleStat {
        expected,
        mean,
        stderr,
        z,
        paths: vals.len(),
    })
}

pub fn martingale_check(
    bc: &ContinuumBC,
    g: &GFunction,
    n_paths: usize,
    dt: f64,
    t_max: f64,
    seed: u64,
    cfg: &StepConfig,
) -> Result<MartingaleStat> {
    martingale_from(bc, &pmpf_ensemble(bc, n_paths, dt, t_max, seed, cfg)?, g)
}

/// Square root with non-negative imaginary part; on the real axis the sign
/// follows `side`.
fn sqrt_upper(w: Complex64, side: f64) -> Complex64 {
    let s = w.sqrt();
    if s.im.abs() > 1e-300 {
        if s.im < 0.0 {
            -s
        } else {
            s
        }
    } else if (s.re < 0.0) == (side < 0.0) {
        s
    } else {
        -s
    }
}

/// Inverse of the vertical-slit map for driving value `u` and time `dt`.
fn unslit(w: Complex64, u: f64, dt: f64) -> Complex64 {
    let v = w - u;
    u + sqrt_upper(v * v - 4.0 * dt, v.re)
}

fn slit(z: Complex64, u: f64, dt: f64) -> Complex64 {
    let v = z - u;
    u + sqrt_upper(v * v + 4.0 * dt, v.re)
}

/// Curve tips `γ(t_n)` for a driving path sampled at `times`, with the
/// driving held at its right-end value on each step.
pub fn trace_curve(times: &[f64], driving: &[f64]) -> Result<Vec<Complex64>> {
    if times.len() != driving.len() || times.is_empty() {
        return Err(IflError::InvalidArgument("times and driving values must pair up".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(IflError::InvalidArgument("times must increase".into()));
    }
    let mut tips = vec![Complex64::new(driving[0], 0.0)];
    for n in 1..times.len() {
        let mut w = Complex64::new(driving[n], 0.0);
        for j in (1..=n).rev() {
            w = unslit(w, driving[j], times[j] - times[j - 1]);
        }
        tips.push(w);
    }
    Ok(tips)
}

/// Recovers `(times, driving)` from curve tips by unzipping one vertical
/// slit at a time.
pub fn zipper_driving(tips: &[Complex64], t0: f64, u0: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rest: Vec<Complex64> = tips.iter().skip(1).copied().collect();
    let (mut times, mut driving) = (vec![t0], vec![u0]);
    let mut t = t0;
    for n in 0..rest.len() {
        let p = rest[n];
        let (u, dt) = (p.re, 0.25 * p.im * p.im);
        t += dt;
        times.push(t);
        driving.push(u);
        for q in rest.iter_mut().skip(n + 1) {
            *q = slit(*q, u, dt);
        }
    }
    (times, driving)
}
