//! Minimization of the truncated functional.
//!
//! Iterates live in lattice coordinates `x_i = α̂_{k_i}`, `k_i ∈ r·ℤ_odd ∩ [1, N]`,
//! in which `∇J = 2g`. The optimizer runs Armijo gradient descent until the
//! gradient is below `1e−4`, then BFGS. If a line search stalls above the
//! tolerance a damped Newton polish with the exact Hessian takes over.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functional::{self, FunctionalError, FunctionalSpec};
use crate::media::Medium;
use crate::seqspace::{self, OddSequence};

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const QUASI_NEWTON_SWITCH: f64 = 1e-4;
const ESCAPE_SCALE: f64 = 1e-3;
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Error, Clone)]
pub enum SolverError {
    #[error("seed harmonic k0 = {k0} has Φ'_k0(0)/γ ≥ 0")]
    WrongSign { k0: u64 },
    #[error("seed harmonic k0 = {k0} is not a lattice harmonic ≤ N")]
    BadSeed { k0: u64 },
    #[error("no convergence after {} iterations (grad norm {:e})", .0.iterations, .0.grad_norm)]
    MaxItersExceeded(Box<BreatherResult>),
    #[error("N schedule must be a nonempty strictly increasing list of odd integers")]
    BadSchedule,
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub n: u64,
    pub r: u64,
    pub k0: Option<u64>,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub n_schedule: Vec<u64>,
    pub rng_seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { n: 41, r: 1, k0: None, grad_tol: 1e-10, max_iters: 100_000, n_schedule: Vec::new(), rng_seed: 0 }
    }
}

/// One optimizer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreatherResult {
    pub alpha: OddSequence,
    pub j_value: f64,
    /// `(Σ_{k>0} g_k²)^{1/2}` over lattice harmonics.
    pub grad_norm: f64,
    pub el_sup: f64,
    /// Largest `|(α̂*α̂*α̂)_k|` over odd `k ≤ N` off the lattice.
    pub el_off_sup: f64,
    pub r: u64,
    pub n: u64,
    pub k0: u64,
    pub t_star: f64,
    pub seed_j: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    #[serde(skip)]
    pub history: Vec<IterRecord>,
}

/// `t* = √(−c₂/(2c₁))`, `α̂₀ = t*·ŷ^{(k₀)}` with `c₁ = ¼⦀ŷ⦀⁴ = 3/2`, `c₂ = η_{k₀}`.
pub fn seed_point(spec: &FunctionalSpec, k0: u64) -> Result<(f64, OddSequence), SolverError> {
    let c2 = spec.eta(k0).ok_or(SolverError::BadSeed { k0 })?;
    if c2 >= 0.0 {
        return Err(SolverError::WrongSign { k0 });
    }
    let c1 = 0.25 * seqspace::quad_norm4(&OddSequence::pair(1, 1, 1.0));
    let t = (-c2 / (2.0 * c1)).sqrt();
    Ok((t, OddSequence::pair(spec.n, k0, t)))
}

struct Problem<'a> {
    spec: &'a FunctionalSpec,
}

impl Problem<'_> {
    fn to_seq(&self, x: &DVector<f64>) -> OddSequence {
        let mut z = self.spec.zeros();
        for (&k, &v) in self.spec.lattice.iter().zip(x.iter()) {
            z.set(k, v);
        }
        z
    }

    fn coords_of(&self, z: &OddSequence) -> DVector<f64> {
        DVector::from_iterator(self.spec.lattice.len(), self.spec.lattice.iter().map(|&k| z.get(k)))
    }

    /// `J` and the Euclidean gradient `2g` in lattice coordinates.
    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (j, g) = self.spec.value_and_gradient(&self.to_seq(x));
        (j, 2.0 * self.coords_of(&g))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = x.len();
        let z = self.to_seq(x);
        let mut h = DMatrix::zeros(m, m);
        for (i, &k) in self.spec.lattice.iter().enumerate() {
            let col = self.spec.hessian_vec(&z, &OddSequence::pair(self.spec.n, k, 1.0));
            for (row, &kk) in self.spec.lattice.iter().enumerate() {
                h[(row, i)] = col.get(kk);
            }
        }
        h
    }

    /// Backtracking from `step0`; the sufficient-decrease test allows for
    /// rounding of `J` itself.
    fn armijo(
        &self,
        x: &DVector<f64>,
        f: f64,
        grad: &DVector<f64>,
        dir: &DVector<f64>,
        step0: f64,
    ) -> Option<(DVector<f64>, f64, DVector<f64>)> {
        let slope = grad.dot(dir);
        if slope >= 0.0 {
            return None;
        }
        let slack = 10.0 * f64::EPSILON * f.abs();
        let mut step = step0;
        for _ in 0..80 {
            let xn = x + step * dir;
            let (fnew, gnew) = self.eval(&xn);
            if fnew <= f + ARMIJO_C * step * slope + slack {
                return Some((xn, fnew, gnew));
            }
            step *= SHRINK;
        }
        None
    }
}

struct RunState {
    x: DVector<f64>,
    f: f64,
    grad: DVector<f64>,
    iters: usize,
    history: Vec<IterRecord>,
}

impl RunState {
    fn grad_norm(&self) -> f64 {
        0.5 * self.grad.norm()
    }

    fn record(&mut self) {
        let g = self.grad_norm();
        self.history.push(IterRecord { iter: self.iters, j: self.f, grad_norm: g });
    }
}

fn descend(problem: &Problem, state: &mut RunState, tol: f64, max_iters: usize) {
    // gradient descent
    while state.grad_norm() > tol.max(QUASI_NEWTON_SWITCH) && state.iters < max_iters {
        let dir = -&state.grad;
        match problem.armijo(&state.x, state.f, &state.grad, &dir, 1.0) {
            Some((x, f, g)) => {
                state.x = x;
                state.f = f;
                state.grad = g;
                state.iters += 1;
                state.record();
            }
            None => break,
        }
    }
    // BFGS on the inverse Hessian
    let m = state.x.len();
    let mut hinv = DMatrix::<f64>::identity(m, m);
    let mut fresh = true;
    while state.grad_norm() > tol && state.iters < max_iters {
        let mut dir = -(&hinv * &state.grad);
        if dir.dot(&state.grad) >= 0.0 {
            hinv = DMatrix::identity(m, m);
            fresh = true;
            dir = -&state.grad;
        }
        let Some((x, f, g)) = problem.armijo(&state.x, state.f, &state.grad, &dir, 1.0) else {
            if fresh {
                break;
            }
            hinv = DMatrix::identity(m, m);
            fresh = true;
            continue;
        };
        let s = &x - &state.x;
        let y = &g - &state.grad;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if fresh {
                hinv *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        state.x = x;
        state.f = f;
        state.grad = g;
        state.iters += 1;
        state.record();
    }
    // Newton polish
    while state.grad_norm() > tol && state.iters < max_iters {
        let h = problem.hessian(&state.x);
        let Some(step) = h.lu().solve(&(-&state.grad)) else { break };
        let xn = &state.x + &step;
        let (fnew, gnew) = problem.eval(&xn);
        if gnew.norm() >= state.grad.norm() || fnew > state.f + 1e3 * f64::EPSILON * state.f.abs() {
            break;
        }
        state.x = xn;
        state.f = fnew;
        state.grad = gnew;
        state.iters += 1;
        state.record();
    }
}

/// Minimize from the analytic seed.
pub fn minimize(spec: &FunctionalSpec, config: &SolveConfig) -> Result<BreatherResult, SolverError> {
    let k0 = match config.k0 {
        Some(k) => k,
        None => spec.seed_harmonic().ok_or(FunctionalError::SignConditionFailed {
            gamma: spec.gamma,
            n: spec.n,
            r: spec.r,
        })?,
    };
    let (t_star, seed) = seed_point(spec, k0)?;
    minimize_from(spec, config, k0, t_star, &seed)
}

/// Minimize from an arbitrary lattice-supported start.
pub fn minimize_from(
    spec: &FunctionalSpec,
    config: &SolveConfig,
    k0: u64,
    t_star: f64,
    start: &OddSequence,
) -> Result<BreatherResult, SolverError> {
    let start = start.resized(spec.n);
    spec.check_support(&start)?;
    let problem = Problem { spec };
    let x = problem.coords_of(&start);
    let (f, grad) = problem.eval(&x);
    let seed_j = f;
    let mut state = RunState { x, f, grad, iters: 0, history: Vec::new() };
    state.record();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut restarts = 0;
    loop {
        descend(&problem, &mut state, config.grad_tol, config.max_iters);
        if state.grad_norm() > config.grad_tol || restarts >= MAX_RESTARTS {
            break;
        }
        // saddle escape test
        let z = problem.to_seq(&state.x);
        let size = ESCAPE_SCALE * seqspace::quad_norm4(&z).powf(0.25);
        let raw = DVector::from_fn(state.x.len(), |_, _| rng.gen_range(-1.0..1.0));
        let delta = problem.to_seq(&raw);
        let delta_norm = seqspace::quad_norm4(&delta).powf(0.25);
        if delta_norm == 0.0 {
            break;
        }
        let trial = &state.x + raw * (size / delta_norm);
        let (ft, gt) = problem.eval(&trial);
        if ft >= state.f {
            break;
        }
        debug!("perturbation lowered J from {} to {}; resuming", state.f, ft);
        restarts += 1;
        state.x = trial;
        state.f = ft;
        state.grad = gt;
    }
    let alpha = problem.to_seq(&state.x);
    let el = functional::el_residual(spec, &alpha);
    let converged = state.grad_norm() <= config.grad_tol;
    let result = BreatherResult {
        j_value: state.f,
        grad_norm: state.grad_norm(),
        el_sup: el.sup,
        el_off_sup: el.off_sup,
        r: spec.r,
        n: spec.n,
        k0,
        t_star,
        seed_j,
        iterations: state.iters,
        restarts,
        converged,
        history: state.history,
        alpha,
    };
    info!(
        "N = {}, r = {}: J = {:.15e}, |g| = {:.3e} after {} iterations",
        result.n, result.r, result.j_value, result.grad_norm, result.iterations
    );
    if converged {
        Ok(result)
    } else {
        Err(SolverError::MaxItersExceeded(Box::new(result)))
    }
}

/// Stages of a continuation in `N`.
#[derive(Debug, Clone, Serialize)]
pub struct Continuation {
    pub stages: Vec<BreatherResult>,
    /// `|J^{(N_{i+1})} − J^{(N_i)}|`
    pub increments: Vec<f64>,
}

/// Solve along `config.n_schedule`, warm-starting each stage from the
/// zero-padded previous minimizer. `spec` must be built for the largest `N`.
pub fn continue_in_n(spec: &FunctionalSpec, config: &SolveConfig) -> Result<Continuation, SolverError> {
    let schedule = &config.n_schedule;
    if schedule.is_empty()
        || schedule.windows(2).any(|w| w[1] <= w[0])
        || schedule.iter().any(|&n| n % 2 == 0)
        || *schedule.last().unwrap() > spec.n
    {
        return Err(SolverError::BadSchedule);
    }
    let mut stages: Vec<BreatherResult> = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let stage_spec = if n == spec.n { spec.clone() } else { spec.truncate(n)? };
        let result = match stages.last() {
            None => minimize(&stage_spec, config)?,
            Some(prev) => minimize_from(&stage_spec, config, prev.k0, prev.t_star, &prev.alpha.resized(n))?,
        };
        stages.push(result);
    }
    let increments = stages.windows(2).map(|w| (w[1].j_value - w[0].j_value).abs()).collect();
    Ok(Continuation { stages, increments })
}

/// Outcome of one symmetry class in a multiplicity scan.
#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub j: u32,
    pub r: u64,
    pub outcome: Result<BreatherResult, SolverError>,
}

/// One solve per `r = r0^j`, `j = 1..=j_max`, on `jobs` worker threads.
pub fn multiplicity_scan(
    medium: &Medium,
    gamma: f64,
    j_max: u32,
    r0: u64,
    config: &SolveConfig,
    jobs: usize,
) -> Vec<ScanEntry> {
    let run = |j: u32| -> ScanEntry {
        let r = r0.pow(j);
        let outcome = functional::eta_table(medium, gamma, config.n, r).map_err(SolverError::from).and_then(|spec| {
            let cfg = SolveConfig { r, k0: None, ..config.clone() };
            minimize(&spec, &cfg)
        });
        ScanEntry { j, r, outcome }
    };
    let js: Vec<u32> = (1..=j_max).collect();
    let jobs = jobs.max(1);
    if jobs == 1 {
        return js.into_iter().map(run).collect();
    }
    let mut out: Vec<ScanEntry> = std::thread::scope(|scope| {
        let handles: Vec<_> = js
            .chunks(js.len().div_ceil(jobs))
            .map(|chunk| scope.spawn(move || chunk.iter().map(|&j| run(j)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scan worker panicked")).collect()
    });
    out.sort_by_key(|e| e.j);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{PeriodicStepMedium, StepMedium};
    use crate::param::Param;
    use std::f64::consts::PI;

    fn step() -> Medium {
        let one = Param::int(1);
        Medium::Step(StepMedium::new(&one, &one, &"pi/2".parse().unwrap(), &one).unwrap())
    }

    fn periodic() -> Medium {
        Medium::Periodic(
            PeriodicStepMedium::new(&Param::int(1), &Param::int(9), &Param::ratio(1, 2), &Param::ratio(1, 2)).unwrap(),
        )
    }

    #[test]
    fn seed_values() {
        let spec = functional::eta_table(&step(), -1.0, 41, 1).unwrap();
        let (t, z) = seed_point(&spec, 1).unwrap();
        assert!((t - (4.0 * PI / 3.0).sqrt()).abs() < 1e-14);
        assert!((spec.value(&z) + 8.0 * PI * PI / 3.0).abs() < 1e-12);
        let (_, z3) = seed_point(&spec, 3).unwrap();
        let c2 = -4.0 * PI / 3.0;
        assert!((spec.value(&z3) + c2 * c2 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_sign_seed() {
        let spec = functional::eta_table(&periodic(), 1.0, 21, 1).unwrap();
        assert!(matches!(seed_point(&spec, 3), Err(SolverError::WrongSign { k0: 3 })));
        assert!(matches!(seed_point(&spec, 2), Err(SolverError::BadSeed { .. })));
    }

    #[test]
    fn canonical_step_minimum() {
        let spec = functional::eta_table(&step(), -1.0, 41, 1).unwrap();
        let res = minimize(&spec, &SolveConfig::default()).unwrap();
        assert!(res.j_value <= -8.0 * PI * PI / 3.0);
        assert!(res.grad_norm <= 1e-10);
        assert!(res.el_sup <= 1e-9);
    }

    #[test]
    fn deterministic() {
        let spec = functional::eta_table(&periodic(), 1.0, 21, 1).unwrap();
        let a = minimize(&spec, &SolveConfig::default()).unwrap();
        let b = minimize(&spec, &SolveConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn max_iters_reports_best_iterate() {
        let spec = functional::eta_table(&step(), -1.0, 21, 1).unwrap();
        let cfg = SolveConfig { max_iters: 1, ..SolveConfig::default() };
        match minimize(&spec, &cfg) {
            Err(SolverError::MaxItersExceeded(best)) => assert!(best.j_value <= best.seed_j),
            other => panic!("expected MaxItersExceeded, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_runs_are_critical_off_lattice() {
        let spec = functional::eta_table(&periodic(), -1.0, 45, 3).unwrap();
        let cfg = SolveConfig { r: 3, ..SolveConfig::default() };
        let res = minimize(&spec, &cfg).unwrap();
        assert!(res.alpha.support().iter().all(|k| k % 3 == 0));
        assert!(res.el_off_sup <= 1e-12);
    }

    #[test]
    fn single_stage_continuation_equals_minimize() {
        let spec = functional::eta_table(&step(), -1.0, 11, 1).unwrap();
        let cfg = SolveConfig { n_schedule: vec![11], ..SolveConfig::default() };
        let cont = continue_in_n(&spec, &cfg).unwrap();
        assert_eq!(cont.stages.len(), 1);
        assert_eq!(cont.stages[0], minimize(&spec, &cfg).unwrap());
        let bad = SolveConfig { n_schedule: vec![11, 5], ..SolveConfig::default() };
        assert!(matches!(continue_in_n(&spec, &bad), Err(SolverError::BadSchedule)));
    }
}
