//! Gradient-based pulse synthesis: GRAPE over piecewise-constant controls,
//! Chebyshev-coefficient optimization, Bell-state preparation, and
//! critical-time scanning.
//!
//! All entry points run a fixed number of independent restarts in parallel
//! and return the best result; the reduction is deterministic (lowest cost,
//! ties broken by restart order), so a fixed seed and config reproduce the
//! same `OptimizationResult` bit for bit.

pub(crate) mod bfgs;
mod engine;

use std::cell::Cell;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::config::numerics;
use crate::error::{Error, Result};
use crate::hamiltonians::{ControlLayout, LayoutKind};
use crate::objectives::{iswap_target, CostBreakdown};
use crate::operators::{kron_ket, Ket, Operator, C64};
use crate::pulses::{read_pulse, Pulse, PulseMetadata};

use engine::{ControlBasis, Engine, TargetSpec};

/// How the optimizer seeds its parameter vector.
#[derive(Debug, Clone)]
pub enum ParameterInit {
    /// Independent uniform draws in [−0.5, 0.5]·scale; amplitude-like
    /// parameters are scaled in units of J, angle-like parameters in units
    /// of π.
    UniformRandom { scale: f64 },
    /// Warm start from a stored pulse file. The pulse must match the
    /// problem's layout kind and duration; piecewise problems resample any
    /// basis onto their grid, Chebyshev problems require equal order. A warm
    /// start is deterministic, so only a single restart runs.
    FromPulse { path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct OptimizationConfig {
    pub max_iterations: usize,
    /// Stop when the gradient 2-norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the cost falls below this; also the convergence criterion.
    pub cost_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Amplitude bound in units of J. Overrides the bound carried by the
    /// problem's layout for the duration of the optimization.
    pub omega_max: f64,
    pub parameter_init: ParameterInit,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            max_iterations: 3000,
            gradient_tolerance: 1e-9,
            cost_tolerance: 1e-10,
            restarts: 10,
            seed: 1,
            omega_max: 50.0,
            parameter_init: ParameterInit::UniformRandom { scale: 1.0 },
        }
    }
}

impl OptimizationConfig {
    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("cost_tolerance", self.cost_tolerance),
            ("omega_max", self.omega_max),
        ] {
            if !(value > 0.0) {
                return Err(Error::NotPositive { name, value });
            }
        }
        if self.restarts == 0 {
            return Err(Error::Schema("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub pulse: Pulse,
    /// Breakdown at the initial point and after every accepted step of the
    /// winning restart.
    pub cost_trace: Vec<CostBreakdown>,
    /// Final cost at or below `cost_tolerance`.
    pub converged: bool,
    /// Iterations taken by the winning restart.
    pub iterations: usize,
}

/// Piecewise-constant gate-synthesis problem.
#[derive(Debug, Clone)]
pub struct GrapeProblem {
    pub layout: ControlLayout,
    pub target: Operator,
    /// Gate duration in units of 1/J.
    pub duration: f64,
    pub steps: usize,
}

/// Smooth gate-synthesis problem over Chebyshev coefficients.
#[derive(Debug, Clone)]
pub struct ChebyshevProblem {
    pub layout: ControlLayout,
    pub target: Operator,
    pub duration: f64,
    /// Highest polynomial order M; each channel carries M+1 coefficients.
    pub order: usize,
}

impl GrapeProblem {
    fn engine(&self) -> Result<Engine> {
        Engine::new(
            self.layout,
            self.duration,
            ControlBasis::Piecewise { steps: self.steps },
            TargetSpec::Gate {
                target: self.target.clone(),
            },
        )
    }

    /// Length of the raw parameter vector: per-step (amplitude, phase) pairs
    /// for every drive group, then the frame angles.
    pub fn parameter_count(&self) -> usize {
        let groups = self.layout.kind.channels() / 2;
        let frames = if self.layout.kind == LayoutKind::FullLocal { 6 } else { 3 };
        self.steps * 2 * groups + frames
    }

    /// Cost breakdown at a raw parameter vector.
    pub fn cost(&self, params: &[f64]) -> Result<CostBreakdown> {
        let engine = self.engine()?;
        check_len(&engine, params)?;
        Ok(engine.eval(params, None))
    }

    /// Materializes a raw parameter vector as a pulse.
    pub fn pulse(&self, params: &[f64]) -> Result<Pulse> {
        let engine = self.engine()?;
        check_len(&engine, params)?;
        engine.params_to_pulse(params, None)
    }
}

impl ChebyshevProblem {
    fn engine(&self) -> Result<Engine> {
        Engine::new(
            self.layout,
            self.duration,
            ControlBasis::Chebyshev {
                order: self.order,
                samples: numerics().smooth_pulse_steps,
            },
            TargetSpec::Gate {
                target: self.target.clone(),
            },
        )
    }

    /// Length of the raw parameter vector: amplitude coefficient blocks,
    /// phase coefficient blocks, then the frame angles.
    pub fn parameter_count(&self) -> usize {
        let groups = self.layout.kind.channels() / 2;
        let frames = if self.layout.kind == LayoutKind::FullLocal { 6 } else { 3 };
        2 * groups * (self.order + 1) + frames
    }

    /// Cost breakdown at a raw coefficient vector.
    pub fn cost(&self, params: &[f64]) -> Result<CostBreakdown> {
        let engine = self.engine()?;
        check_len(&engine, params)?;
        Ok(engine.eval(params, None))
    }

    /// Materializes a raw coefficient vector as a pulse.
    pub fn pulse(&self, params: &[f64]) -> Result<Pulse> {
        let engine = self.engine()?;
        check_len(&engine, params)?;
        engine.params_to_pulse(params, None)
    }
}

fn check_len(engine: &Engine, params: &[f64]) -> Result<()> {
    if params.len() != engine.param_count() {
        return Err(Error::DimensionMismatch {
            expected: engine.param_count(),
            got: params.len(),
        });
    }
    Ok(())
}

/// Analytic gradient of the cost at a raw parameter vector.
pub fn gradient(problem: &GrapeProblem, params: &[f64]) -> Result<Vec<f64>> {
    let engine = problem.engine()?;
    check_len(&engine, params)?;
    let mut grad = vec![0.0; params.len()];
    engine.eval(params, Some(&mut grad));
    Ok(grad)
}

/// Analytic gradient of the robustness term alone.
pub fn robustness_gradient(problem: &GrapeProblem, params: &[f64]) -> Result<Vec<f64>> {
    let engine = problem.engine()?;
    check_len(&engine, params)?;
    let mut grad = vec![0.0; params.len()];
    engine.robustness_gradient(params, &mut grad);
    Ok(grad)
}

/// Analytic gradient for a Chebyshev problem.
pub fn chebyshev_gradient(problem: &ChebyshevProblem, params: &[f64]) -> Result<Vec<f64>> {
    let engine = problem.engine()?;
    check_len(&engine, params)?;
    let mut grad = vec![0.0; params.len()];
    engine.eval(params, Some(&mut grad));
    Ok(grad)
}

/// Synthesizes a piecewise-constant pulse for the problem's target gate.
pub fn grape_optimize(
    problem: &GrapeProblem,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let engine = Engine::new(
        problem.layout.with_omega_max(cfg.omega_max),
        problem.duration,
        ControlBasis::Piecewise {
            steps: problem.steps,
        },
        TargetSpec::Gate {
            target: problem.target.clone(),
        },
    )?;
    run_problem(&engine, cfg, "gate", false)
}

/// Synthesizes a smooth pulse over Chebyshev coefficients.
pub fn chebyshev_optimize(
    problem: &ChebyshevProblem,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let engine = Engine::new(
        problem.layout.with_omega_max(cfg.omega_max),
        problem.duration,
        ControlBasis::Chebyshev {
            order: problem.order,
            samples: numerics().smooth_pulse_steps,
        },
        TargetSpec::Gate {
            target: problem.target.clone(),
        },
    )?;
    run_problem(&engine, cfg, "gate", false)
}

/// Optimizes a global-drive pulse that prepares the Bell state reached by
/// the native gate from |++⟩, robust to first order in the coupling error
/// up to a global phase on the prepared state.
pub fn bell_state_optimize(
    duration: f64,
    steps: usize,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let initial = plus_plus();
    let target = iswap_target().apply(&initial);
    let engine = Engine::new(
        ControlLayout::global().with_omega_max(cfg.omega_max),
        duration,
        ControlBasis::Piecewise { steps },
        TargetSpec::State { initial, target },
    )?;
    run_problem(&engine, cfg, "bell-state", false)
}

/// Minimizes the robustness term alone, ignoring fidelity entirely: measures
/// the floor a drive layout can reach, corroborating numerically that a
/// symmetric global drive cannot zero the first-order response.
pub fn minimize_robustness(
    layout: &ControlLayout,
    duration: f64,
    steps: usize,
    cfg: &OptimizationConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let engine = Engine::new(
        layout.with_omega_max(cfg.omega_max),
        duration,
        ControlBasis::Piecewise { steps },
        TargetSpec::Gate {
            target: iswap_target(),
        },
    )?;
    run_problem(&engine, cfg, "robustness-floor", true)
}

/// |++⟩, the Bell-preparation input state.
pub fn plus_plus() -> Ket {
    let plus = Ket::from_vec(vec![
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
    ]);
    kron_ket(&plus, &plus)
}

/// Best achievable cost per duration, and the smallest duration whose cost
/// reaches the tolerance.
#[derive(Debug, Clone)]
pub struct ScanResult {
    /// (duration, best-of-restarts cost) per grid point.
    pub points: Vec<(f64, f64)>,
    /// Smallest grid duration with cost ≤ cost_tolerance, if any.
    pub critical_time: Option<f64>,
}

/// Runs best-of-restarts GRAPE at every duration of an ascending grid.
/// Each (duration, restart) pair is an independent parallel task with its
/// own derived seed.
pub fn critical_time_scan(
    layout: &ControlLayout,
    t_grid: &[f64],
    steps: usize,
    cfg: &OptimizationConfig,
) -> Result<ScanResult> {
    cfg.validate()?;
    if t_grid.is_empty() {
        return Err(Error::Schema("duration grid is empty".into()));
    }
    if !t_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::Schema("duration grid must be strictly ascending".into()));
    }
    if matches!(cfg.parameter_init, ParameterInit::FromPulse { .. }) {
        return Err(Error::Schema(
            "a duration scan cannot warm start from a fixed pulse".into(),
        ));
    }
    let effective = layout.with_omega_max(cfg.omega_max);
    let target = iswap_target();
    let tasks: Vec<(usize, u64)> = (0..t_grid.len())
        .flat_map(|ti| (0..cfg.restarts).map(move |ri| (ti, mix_seed(mix_seed(cfg.seed, ti as u64), ri as u64))))
        .collect();
    let costs: Result<Vec<f64>> = tasks
        .par_iter()
        .map(|&(ti, seed)| {
            let engine = Engine::new(
                effective,
                t_grid[ti],
                ControlBasis::Piecewise { steps },
                TargetSpec::Gate {
                    target: target.clone(),
                },
            )?;
            Ok(run_restart(&engine, cfg, seed, None, false).breakdown.cost)
        })
        .collect();
    let costs = costs?;
    let points: Vec<(f64, f64)> = t_grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let best = costs[ti * cfg.restarts..(ti + 1) * cfg.restarts]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            (t, best)
        })
        .collect();
    let critical_time = points
        .iter()
        .find(|(_, c)| *c <= cfg.cost_tolerance)
        .map(|(t, _)| *t);
    Ok(ScanResult {
        points,
        critical_time,
    })
}

struct RestartOutcome {
    params: Vec<f64>,
    breakdown: CostBreakdown,
    trace: Vec<CostBreakdown>,
    iterations: usize,
    seed: u64,
}

fn run_restart(
    engine: &Engine,
    cfg: &OptimizationConfig,
    seed: u64,
    warm: Option<&[f64]>,
    robust_only: bool,
) -> RestartOutcome {
    let x0 = match warm {
        Some(w) => w.to_vec(),
        None => {
            let scale = match &cfg.parameter_init {
                ParameterInit::UniformRandom { scale } => *scale,
                ParameterInit::FromPulse { .. } => 1.0,
            };
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            engine.random_params(scale, &mut rng)
        }
    };
    let opts = bfgs::BfgsOptions {
        max_iterations: cfg.max_iterations,
        gradient_tolerance: cfg.gradient_tolerance,
        cost_tolerance: cfg.cost_tolerance,
    };
    // The line search only ever reports the objective value, so the last
    // breakdown is smuggled out through a cell; minimize guarantees the
    // final evaluation happened at every point it reports accepted.
    let last = Cell::new(CostBreakdown::new(0.0, 0.0));
    let mut trace: Vec<CostBreakdown> = Vec::new();
    let outcome = bfgs::minimize(
        |x, g| {
            let bd = if robust_only {
                engine.robustness_gradient(x, g)
            } else {
                engine.eval(x, Some(g))
            };
            last.set(bd);
            if robust_only {
                bd.robustness
            } else {
                bd.cost
            }
        },
        &x0,
        &opts,
        |_, _| trace.push(last.get()),
    );
    let mut params = outcome.x;
    let mut breakdown = *trace.last().expect("minimize reports at least the initial point");
    if engine.clamp_into_bound(&mut params) {
        breakdown = engine.eval(&params, None);
        trace.push(breakdown);
    }
    RestartOutcome {
        params,
        breakdown,
        trace,
        iterations: outcome.iterations,
        seed,
    }
}

fn run_problem(
    engine: &Engine,
    cfg: &OptimizationConfig,
    objective: &str,
    robust_only: bool,
) -> Result<OptimizationResult> {
    let warm: Option<Vec<f64>> = match &cfg.parameter_init {
        ParameterInit::FromPulse { path } => {
            Some(engine.params_from_pulse(&read_pulse(path)?)?)
        }
        ParameterInit::UniformRandom { .. } => None,
    };
    let restarts = if warm.is_some() { 1 } else { cfg.restarts };
    let score = |bd: &CostBreakdown| if robust_only { bd.robustness } else { bd.cost };
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            run_restart(engine, cfg, mix_seed(cfg.seed, r as u64), warm.as_deref(), robust_only)
        })
        .collect();
    let (_, best) = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            score(&a.breakdown)
                .total_cmp(&score(&b.breakdown))
                .then(ia.cmp(ib))
        })
        .expect("restarts >= 1");
    let metadata = PulseMetadata {
        cost: Some(best.breakdown),
        seed: Some(best.seed),
        iterations: Some(best.iterations),
        sample_steps: None,
        objective: Some(objective.to_string()),
    };
    let pulse = engine.params_to_pulse(&best.params, Some(metadata))?;
    Ok(OptimizationResult {
        converged: score(&best.breakdown) <= cfg.cost_tolerance,
        iterations: best.iterations,
        cost_trace: best.trace,
        pulse,
    })
}

/// SplitMix64 finalizer over seed and salt, so restart and grid indices
/// yield well-separated RNG streams.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{write_pulse, PulseBasis};

    fn quick_cfg(restarts: usize, seed: u64) -> OptimizationConfig {
        OptimizationConfig {
            restarts,
            seed,
            ..OptimizationConfig::default()
        }
    }

    #[test]
    fn full_local_reaches_numerical_zero() {
        let problem = GrapeProblem {
            layout: ControlLayout::full_local(),
            target: iswap_target(),
            duration: 4.5,
            steps: 40,
        };
        let result = grape_optimize(&problem, &quick_cfg(4, 7)).unwrap();
        assert!(
            result.converged,
            "best cost {:.3e}",
            result.pulse.metadata.as_ref().unwrap().cost.unwrap().cost
        );
        let meta = result.pulse.metadata.as_ref().unwrap();
        assert_eq!(meta.objective.as_deref(), Some("gate"));
        assert!(meta.cost.unwrap().cost <= 1e-8);
    }

    #[test]
    fn native_duration_cannot_converge() {
        let problem = GrapeProblem {
            layout: ControlLayout::full_local(),
            target: iswap_target(),
            duration: std::f64::consts::FRAC_PI_2,
            steps: 20,
        };
        let result = grape_optimize(&problem, &quick_cfg(4, 3)).unwrap();
        assert!(!result.converged);
        let cost = result.pulse.metadata.as_ref().unwrap().cost.unwrap().cost;
        assert!(cost > 1e-3, "cost {cost:.3e} suspiciously low at the native duration");
    }

    #[test]
    fn results_are_bitwise_deterministic() {
        let problem = GrapeProblem {
            layout: ControlLayout::global(),
            target: iswap_target(),
            duration: 3.0,
            steps: 12,
        };
        let mut cfg = quick_cfg(3, 99);
        cfg.max_iterations = 60;
        let a = grape_optimize(&problem, &cfg).unwrap();
        let b = grape_optimize(&problem, &cfg).unwrap();
        assert_eq!(a.pulse, b.pulse);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.cost_trace.len(), b.cost_trace.len());
        for (x, y) in a.cost_trace.iter().zip(&b.cost_trace) {
            assert_eq!(x.cost.to_bits(), y.cost.to_bits());
        }
    }

    #[test]
    fn best_so_far_is_monotone() {
        let problem = GrapeProblem {
            layout: ControlLayout::global(),
            target: iswap_target(),
            duration: 3.0,
            steps: 10,
        };
        let mut cfg = quick_cfg(2, 5);
        cfg.max_iterations = 80;
        let result = grape_optimize(&problem, &cfg).unwrap();
        let mut best = f64::INFINITY;
        for bd in &result.cost_trace {
            let running = best.min(bd.cost);
            assert!(running <= best + 1e-15);
            best = running;
        }
    }

    #[test]
    fn emitted_amplitudes_respect_the_bound() {
        let problem = GrapeProblem {
            layout: ControlLayout::global(),
            target: iswap_target(),
            duration: 2.0,
            steps: 8,
        };
        let mut cfg = quick_cfg(2, 17);
        cfg.omega_max = 1.5;
        cfg.max_iterations = 120;
        let result = grape_optimize(&problem, &cfg).unwrap();
        let PulseBasis::PiecewiseConstant { values, .. } = &result.pulse.basis else {
            panic!("grape emits piecewise pulses");
        };
        assert_eq!(result.pulse.layout.omega_max, 1.5);
        for &v in &values[0] {
            assert!(v.abs() <= 1.5 + 1e-9);
        }
    }

    #[test]
    fn chebyshev_constant_controls_cannot_converge() {
        let problem = ChebyshevProblem {
            layout: ControlLayout::full_local(),
            target: iswap_target(),
            duration: 4.5,
            order: 0,
        };
        let mut cfg = quick_cfg(3, 2);
        cfg.max_iterations = 200;
        let result = chebyshev_optimize(&problem, &cfg).unwrap();
        assert!(!result.converged);
    }

    #[test]
    fn global_drive_robustness_floor_stays_high() {
        let mut cfg = quick_cfg(2, 9);
        cfg.max_iterations = 200;
        cfg.cost_tolerance = 1e-12;
        let result =
            minimize_robustness(&ControlLayout::global(), 3.0, 24, &cfg).unwrap();
        let meta = result.pulse.metadata.as_ref().unwrap();
        assert_eq!(meta.objective.as_deref(), Some("robustness-floor"));
        assert!(!result.converged);
        assert!(
            meta.cost.unwrap().robustness > 1e-3,
            "global floor {:.3e}",
            meta.cost.unwrap().robustness
        );
    }

    #[test]
    fn bell_state_native_duration_keeps_fidelity_but_not_robustness() {
        let mut cfg = quick_cfg(2, 4);
        cfg.max_iterations = 150;
        let result =
            bell_state_optimize(std::f64::consts::FRAC_PI_2, 12, &cfg).unwrap();
        let meta = result.pulse.metadata.as_ref().unwrap();
        assert_eq!(meta.objective.as_deref(), Some("bell-state"));
        assert!(!result.converged);
    }

    #[test]
    fn scan_finds_plateau_once_cost_reaches_tolerance() {
        let grid = [2.0, 4.6];
        let mut cfg = quick_cfg(3, 11);
        cfg.cost_tolerance = 1e-9;
        let scan =
            critical_time_scan(&ControlLayout::full_local(), &grid, 30, &cfg).unwrap();
        assert_eq!(scan.points.len(), 2);
        assert!(scan.points[0].1 > 1e-4, "JT=2 should be infeasible");
        assert!(scan.points[1].1 <= 1e-9, "JT=4.6 should reach numerical zero");
        assert_eq!(scan.critical_time, Some(4.6));
    }

    #[test]
    fn scan_rejects_unsorted_grid() {
        let err = critical_time_scan(
            &ControlLayout::global(),
            &[3.0, 2.0],
            10,
            &quick_cfg(1, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn warm_start_reproduces_stored_pulse() {
        let problem = GrapeProblem {
            layout: ControlLayout::global(),
            target: iswap_target(),
            duration: 3.0,
            steps: 10,
        };
        let mut cfg = quick_cfg(2, 8);
        cfg.max_iterations = 60;
        let first = grape_optimize(&problem, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("warm.pulse.json");
        write_pulse(&first.pulse, &path).unwrap();

        let mut warm_cfg = quick_cfg(5, 999);
        warm_cfg.parameter_init = ParameterInit::FromPulse { path };
        let resumed = grape_optimize(&problem, &warm_cfg).unwrap();
        let resumed_cost = resumed.pulse.metadata.as_ref().unwrap().cost.unwrap().cost;
        let first_cost = first.pulse.metadata.as_ref().unwrap().cost.unwrap().cost;
        assert!(resumed_cost <= first_cost + 1e-12);
    }

    #[test]
    fn robustness_gradient_vanishes_at_a_converged_pulse() {
        let problem = GrapeProblem {
            layout: ControlLayout::full_local(),
            target: iswap_target(),
            duration: 4.5,
            steps: 40,
        };
        let mut cfg = quick_cfg(4, 7);
        // Polish past the plain convergence threshold so first-order
        // optimality is sharp.
        cfg.cost_tolerance = 1e-14;
        cfg.max_iterations = 6000;
        let result = grape_optimize(&problem, &cfg).unwrap();
        let meta_cost = result.pulse.metadata.as_ref().unwrap().cost.unwrap().cost;
        assert!(meta_cost <= 1e-10, "polish run stalled at {meta_cost:.3e}");
        let params = params_of(&problem, &result.pulse);
        let grad = robustness_gradient(&problem, &params).unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 1e-6, "robustness gradient norm {norm:.3e}");
    }

    fn params_of(problem: &GrapeProblem, pulse: &Pulse) -> Vec<f64> {
        problem
            .engine()
            .unwrap()
            .params_from_pulse(pulse)
            .unwrap()
    }
    #[test]
    fn config_validation_rejects_bad_values() {
        let problem = GrapeProblem {
            layout: ControlLayout::global(),
            target: iswap_target(),
            duration: 1.0,
            steps: 2,
        };
        let mut cfg = OptimizationConfig::default();
        cfg.restarts = 0;
        assert!(grape_optimize(&problem, &cfg).is_err());
        let mut cfg = OptimizationConfig::default();
        cfg.cost_tolerance = 0.0;
        assert!(grape_optimize(&problem, &cfg).is_err());
    }
}
