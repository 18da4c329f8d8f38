//! Command-line driver: pulse synthesis, critical-time scans, noise sweeps,
//! motional validation, Ramsey simulation, the robustness-impossibility
//! checker, and the analytic coupling-noise estimators.
//!
//! Exit codes: 0 success, 2 optimization finished without converging,
//! 64 usage error, 65 malformed pulse file, 66 file I/O failure.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use robust_iswap::hamiltonians::{
    first_order_hamiltonian, single_excitation_projector, swap_operator,
};
use robust_iswap::noise::{
    self, default_dj_grid, simulate_with_motion, simulate_with_motion_best_frames,
    sweep_infidelity, sweep_state_infidelity,
};
use robust_iswap::objectives::{check_criteria, iswap_target};
use robust_iswap::optimize::{
    bell_state_optimize, chebyshev_optimize, critical_time_scan, grape_optimize, plus_plus,
};
use robust_iswap::propagation::step_hamiltonian;
use robust_iswap::pulses::{read_pulse, write_pulse};
use robust_iswap::{
    ChebyshevProblem, ControlLayout, Error, GrapeProblem, MotionalModel, MotionalSimSpec,
    OptimizationConfig, OptimizationResult, ParameterInit, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "robust-iswap",
    version,
    about = "Synthesize and analyze entangling pulses robust to coupling-strength noise"
)]
struct Cli {
    /// RNG seed for restarts, sampling, and Monte-Carlo draws.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads (falls back to ROBUST_ISWAP_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file: pulse JSON for synthesis commands, curve data otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Curve and report encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Suppress summaries and progress notes.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    /// One shared drive on both qubits.
    Global,
    /// Independent drives per qubit.
    FullLocal,
    /// Shared drive plus a constant detuning on qubit 2.
    Detuned,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BasisArg {
    Piecewise,
    Chebyshev,
}

#[derive(Args)]
struct SolverFlags {
    /// Independent random restarts; the best result is kept.
    #[arg(long, default_value_t = 10)]
    restarts: usize,

    /// Quasi-Newton iteration cap per restart.
    #[arg(long, default_value_t = 3000)]
    max_iterations: usize,

    /// Cost at or below this counts as converged.
    #[arg(long, default_value_t = 1e-10)]
    cost_tolerance: f64,

    /// Drive amplitude bound in units of J.
    #[arg(long, default_value_t = 50.0)]
    omega_max: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a pulse realizing the iSWAP gate, robust to coupling noise.
    OptimizeGate {
        #[arg(long, value_enum)]
        layout: LayoutArg,
        /// Gate duration in units of 1/J.
        #[arg(long)]
        duration: f64,
        /// Detuning in units of J (detuned layout only).
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        #[arg(long, value_enum, default_value_t = BasisArg::Piecewise)]
        basis: BasisArg,
        /// Time steps (piecewise basis only; default 90).
        #[arg(long)]
        steps: Option<usize>,
        /// Chebyshev order (chebyshev basis only; default 20).
        #[arg(long)]
        order: Option<usize>,
        /// Resume from a stored pulse instead of random restarts.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },

    /// Best cost as a function of gate duration; reports the critical time.
    ScanCriticalTime {
        #[arg(long, value_enum)]
        layout: LayoutArg,
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        /// Smallest duration in units of 1/J.
        #[arg(long)]
        t_min: f64,
        /// Largest duration in units of 1/J.
        #[arg(long)]
        t_max: f64,
        /// Grid spacing.
        #[arg(long)]
        t_step: f64,
        /// Time steps of each trial pulse.
        #[arg(long, default_value_t = 90)]
        steps: usize,
        #[command(flatten)]
        solver: SolverFlags,
    },

    /// Gate infidelity of a stored pulse under quasi-static coupling offsets.
    Sweep {
        /// Pulse file to analyze.
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long, default_value_t = -0.2, allow_negative_numbers = true)]
        dj_min: f64,
        #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
        dj_max: f64,
        #[arg(long, default_value_t = 81)]
        points: usize,
    },

    /// Native vs stored-pulse infidelity under quantized molecular motion.
    SimulateMotion {
        /// Pulse file for the robust column.
        #[arg(long)]
        pulse: PathBuf,
        /// Trap frequencies ω/J to simulate.
        #[arg(long, value_delimiter = ',', default_value = "5,7,10,14")]
        omega_values: Vec<f64>,
        /// Oscillator levels per molecule.
        #[arg(long, default_value_t = 7)]
        n_max: usize,
        /// ω/(k_B T) of the motional thermal state.
        #[arg(long, default_value_t = 0.42)]
        beta_ratio: f64,
        /// Harmonic length over molecule separation.
        #[arg(long, default_value_t = 80e-9 / 1.9e-6)]
        length_ratio: f64,
        /// Re-optimize the native gate's frame angles under motion.
        #[arg(long)]
        optimize_native_frames: bool,
    },

    /// Monte-Carlo Ramsey dephasing curve against the analytic model.
    Ramsey {
        /// Standard deviation of the quasi-static coupling noise, units of J.
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Latest sequence time in units of 1/J.
        #[arg(long, default_value_t = 60.0)]
        t_max: f64,
        /// Grid points over [0, t_max].
        #[arg(long, default_value_t = 241)]
        points: usize,
        /// Coupling strength of the carrier oscillation.
        #[arg(long, default_value_t = 1.0)]
        j: f64,
    },

    /// Decide whether first-order robustness is structurally impossible.
    CheckCriteria {
        #[arg(long, value_enum)]
        layout: LayoutArg,
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        /// Random control samples for the commutator evidence.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },

    /// Optimize a global-drive pulse preparing the native Bell state robustly.
    PrepareBell {
        /// Preparation duration in units of 1/J.
        #[arg(long)]
        duration: f64,
        /// Time steps of the pulse.
        #[arg(long, default_value_t = 90)]
        steps: usize,
        #[arg(long)]
        warm_start: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },

    /// Analytic coupling-noise magnitudes from motional and rotational coth formulas.
    EstimateNoise {
        /// Harmonic length over molecule separation (dimensionless).
        #[arg(long, conflicts_with_all = ["harmonic_length_nm", "separation_um"])]
        length_ratio: Option<f64>,
        /// Harmonic oscillator length in nanometers.
        #[arg(long, requires = "separation_um")]
        harmonic_length_nm: Option<f64>,
        /// Molecule separation in micrometers.
        #[arg(long, requires = "harmonic_length_nm")]
        separation_um: Option<f64>,
        /// ω/(k_B T) of the motional thermal state.
        #[arg(long, default_value_t = 0.42)]
        omega_over_kt: f64,
        /// State-dependent trap displacement in harmonic-length units.
        #[arg(long, default_value_t = 0.062)]
        zeta: f64,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 64,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Io(_) => 66,
            Error::Json(_) | Error::Schema(_) | Error::Version { .. } | Error::NonFinite(_) => 65,
            _ => 64,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    init_threads(cli.threads);
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let from_env = std::env::var("ROBUST_ISWAP_THREADS")
        .ok()
        .and_then(|v| v.parse().ok());
    if let Some(n) = flag.or(from_env) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is initialized once, before any parallel work");
    }
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::OptimizeGate {
            layout,
            duration,
            delta,
            basis,
            steps,
            order,
            warm_start,
            solver,
        } => {
            let layout = layout_of(*layout, *delta)?;
            let cfg = config_of(solver, cli.seed, warm_start.clone());
            let result = match basis {
                BasisArg::Piecewise => {
                    if order.is_some() {
                        return Err(Failure::usage("--order applies to the chebyshev basis"));
                    }
                    grape_optimize(
                        &GrapeProblem {
                            layout,
                            target: iswap_target(),
                            duration: *duration,
                            steps: steps.unwrap_or(90),
                        },
                        &cfg,
                    )?
                }
                BasisArg::Chebyshev => {
                    if steps.is_some() {
                        return Err(Failure::usage("--steps applies to the piecewise basis"));
                    }
                    chebyshev_optimize(
                        &ChebyshevProblem {
                            layout,
                            target: iswap_target(),
                            duration: *duration,
                            order: order.unwrap_or(20),
                        },
                        &cfg,
                    )?
                }
            };
            finish_synthesis(cli, &result)
        }

        Command::ScanCriticalTime {
            layout,
            delta,
            t_min,
            t_max,
            t_step,
            steps,
            solver,
        } => {
            let layout = layout_of(*layout, *delta)?;
            let grid = duration_grid(*t_min, *t_max, *t_step)?;
            let cfg = config_of(solver, cli.seed, None);
            let scan = critical_time_scan(&layout, &grid, *steps, &cfg)?;
            let rows: Vec<Vec<f64>> = scan.points.iter().map(|&(t, c)| vec![t, c]).collect();
            emit_rows(cli, &["t", "best_cost"], &rows)?;
            if !cli.quiet {
                match scan.critical_time {
                    Some(t) => eprintln!("critical time T* = {t}"),
                    None => eprintln!("no duration on the grid reached the cost tolerance"),
                }
            }
            Ok(0)
        }

        Command::Sweep {
            pulse,
            dj_min,
            dj_max,
            points,
        } => {
            let pulse = read_pulse(pulse)?;
            let dj_values = if (*dj_min, *dj_max, *points) == (-0.2, 0.2, 81) {
                default_dj_grid()
            } else {
                linspace(*dj_min, *dj_max, *points)?
            };
            let prepares_state = pulse
                .metadata
                .as_ref()
                .and_then(|m| m.objective.as_deref())
                == Some("bell-state");
            let swept = if prepares_state {
                let initial = plus_plus();
                let target = iswap_target().apply(&initial);
                sweep_state_infidelity(&SweepSpec { dj_values, pulse }, &initial, &target)?
            } else {
                sweep_infidelity(&SweepSpec { dj_values, pulse }, &iswap_target())?
            };
            let rows: Vec<Vec<f64>> = swept.iter().map(|&(dj, i)| vec![dj, i]).collect();
            emit_rows(cli, &["dj_over_j", "infidelity"], &rows)?;
            Ok(0)
        }

        Command::SimulateMotion {
            pulse,
            omega_values,
            n_max,
            beta_ratio,
            length_ratio,
            optimize_native_frames,
        } => {
            let robust = read_pulse(pulse)?;
            if omega_values.is_empty() {
                return Err(Failure::usage("--omega-values must name at least one ω/J"));
            }
            let target = iswap_target();
            let mut rows = Vec::new();
            for &omega in omega_values {
                let model = MotionalModel {
                    omega_over_j: omega,
                    length_ratio: *length_ratio,
                    beta_ratio: *beta_ratio,
                    n_max: *n_max,
                    ..MotionalModel::default()
                };
                let native_spec = MotionalSimSpec {
                    model,
                    pulse: robust_iswap::Pulse::native(),
                };
                let native = if *optimize_native_frames {
                    simulate_with_motion_best_frames(&native_spec, &target)?.0
                } else {
                    simulate_with_motion(&native_spec, &target)?
                };
                let robust_infid = simulate_with_motion(
                    &MotionalSimSpec {
                        model,
                        pulse: robust.clone(),
                    },
                    &target,
                )?;
                if !cli.quiet {
                    eprintln!(
                        "omega/J = {omega}: native {native:.3e}, robust {robust_infid:.3e}"
                    );
                }
                rows.push(vec![omega, native, robust_infid]);
            }
            emit_rows(
                cli,
                &["omega_over_j", "infidelity_native", "infidelity_robust"],
                &rows,
            )?;
            Ok(0)
        }

        Command::Ramsey {
            sigma,
            samples,
            t_max,
            points,
            j,
        } => {
            if *t_max <= 0.0 {
                return Err(Failure::usage("--t-max must be positive"));
            }
            let grid = linspace(0.0, *t_max, *points)?;
            let mc = noise::ramsey_monte_carlo(*j, *sigma, &grid, *samples, cli.seed)?;
            let rows: Vec<Vec<f64>> = mc
                .iter()
                .map(|&(t, p)| vec![t, p, noise::ramsey_analytic(*j, *sigma, t)])
                .collect();
            emit_rows(cli, &["t", "p11_mc", "p11_analytic"], &rows)?;
            if !cli.quiet && *sigma > 0.0 {
                match noise::fit_t2(&mc, *j) {
                    Some(t2) => eprintln!(
                        "fitted T2 = {t2:.4} (analytic {:.4})",
                        noise::t2_time(*sigma)
                    ),
                    None => eprintln!("envelope fit failed: too few usable points"),
                }
            }
            Ok(0)
        }

        Command::CheckCriteria {
            layout,
            delta,
            samples,
        } => {
            let layout = layout_of(*layout, *delta)?;
            if *samples == 0 {
                return Err(Failure::usage("--samples must be at least 1"));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(cli.seed);
            let h0_samples: Vec<_> = (0..*samples)
                .map(|_| {
                    let controls: Vec<f64> = (0..layout.kind.channels())
                        .map(|c| {
                            if c % 2 == 0 {
                                rng.random_range(-10.0..10.0)
                            } else {
                                rng.random_range(-PI..PI)
                            }
                        })
                        .collect();
                    step_hamiltonian(&layout, &controls, 1.0)
                })
                .collect::<Result<_, _>>()?;
            let projector = single_excitation_projector();
            let swap = swap_operator();
            let report = check_criteria(
                &h0_samples,
                &first_order_hamiltonian(),
                Some((&projector, &swap)),
            )?;
            let text = match cli.format {
                Format::Csv => report.to_string(),
                Format::Json => serde_json::to_string_pretty(&report).expect("report serializes"),
            };
            write_text(cli.out.as_deref(), &text)?;
            Ok(0)
        }

        Command::PrepareBell {
            duration,
            steps,
            warm_start,
            solver,
        } => {
            let cfg = config_of(solver, cli.seed, warm_start.clone());
            let result = bell_state_optimize(*duration, *steps, &cfg)?;
            finish_synthesis(cli, &result)
        }

        Command::EstimateNoise {
            length_ratio,
            harmonic_length_nm,
            separation_um,
            omega_over_kt,
            zeta,
        } => {
            let length_ratio = match (length_ratio, harmonic_length_nm, separation_um) {
                (Some(r), None, None) => *r,
                (None, Some(l), Some(d)) => (l * 1e-9) / (d * 1e-6),
                _ => {
                    return Err(Failure::usage(
                        "pass --length-ratio, or --harmonic-length-nm with --separation-um",
                    ))
                }
            };
            if !(length_ratio >= 0.0) {
                return Err(Failure::usage("the length ratio must be nonnegative"));
            }
            if !(*omega_over_kt > 0.0) {
                return Err(Failure::usage("--omega-over-kt must be positive"));
            }
            if !(*zeta >= 0.0) {
                return Err(Failure::usage("--zeta must be nonnegative"));
            }
            let model = MotionalModel {
                length_ratio,
                beta_ratio: *omega_over_kt,
                zeta: *zeta,
                ..MotionalModel::default()
            };
            let motion = robust_iswap::hamiltonians::delta_j_motion_estimate(&model);
            let motrot = robust_iswap::hamiltonians::delta_j_motrot_estimate(&model);
            let text = match cli.format {
                Format::Csv => format!(
                    "inputs: length_ratio = {length_ratio:.16e}, omega_over_kt = {omega_over_kt:.16e}, zeta = {zeta:.16e}\n\
                     delta_j_motion over J = {motion:.16e}\n\
                     delta_j_motrot over J = {motrot:.16e}\n"
                ),
                Format::Json => serde_json::to_string_pretty(&serde_json::json!({
                    "inputs": {
                        "length_ratio": length_ratio,
                        "omega_over_kt": omega_over_kt,
                        "zeta": zeta,
                    },
                    "delta_j_motion_over_j": motion,
                    "delta_j_motrot_over_j": motrot,
                }))
                .expect("report serializes"),
            };
            write_text(cli.out.as_deref(), &text)?;
            Ok(0)
        }
    }
}

fn layout_of(arg: LayoutArg, delta: Option<f64>) -> Result<ControlLayout, Failure> {
    match (arg, delta) {
        (LayoutArg::Global, None) => Ok(ControlLayout::global()),
        (LayoutArg::FullLocal, None) => Ok(ControlLayout::full_local()),
        (LayoutArg::Detuned, Some(delta)) => Ok(ControlLayout::detuned(delta)),
        (LayoutArg::Detuned, None) => {
            Err(Failure::usage("--delta is required with --layout detuned"))
        }
        _ => Err(Failure::usage("--delta applies only to --layout detuned")),
    }
}

fn config_of(solver: &SolverFlags, seed: u64, warm_start: Option<PathBuf>) -> OptimizationConfig {
    OptimizationConfig {
        max_iterations: solver.max_iterations,
        cost_tolerance: solver.cost_tolerance,
        restarts: solver.restarts,
        seed,
        omega_max: solver.omega_max,
        parameter_init: match warm_start {
            Some(path) => ParameterInit::FromPulse { path },
            None => ParameterInit::UniformRandom { scale: 1.0 },
        },
        ..OptimizationConfig::default()
    }
}

/// Writes the optimized pulse and a one-line summary; exit 0 only on
/// convergence.
fn finish_synthesis(cli: &Cli, result: &OptimizationResult) -> Result<i32, Failure> {
    let path = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("pulse.json"));
    write_pulse(&result.pulse, &path)?;
    if !cli.quiet {
        let last = result.cost_trace.last().expect("trace is never empty");
        let summary = match cli.format {
            Format::Csv => format!(
                "cost = {:.16e} (fidelity {:.16e}, robustness {:.16e}), converged = {}, iterations = {}\nwrote {}",
                last.cost,
                last.fidelity,
                last.robustness,
                result.converged,
                result.iterations,
                path.display()
            ),
            Format::Json => serde_json::to_string_pretty(&serde_json::json!({
                "cost": last.cost,
                "fidelity": last.fidelity,
                "robustness": last.robustness,
                "converged": result.converged,
                "iterations": result.iterations,
                "pulse_path": path.display().to_string(),
            }))
            .expect("summary serializes"),
        };
        println!("{summary}");
    }
    Ok(if result.converged { 0 } else { 2 })
}

fn duration_grid(t_min: f64, t_max: f64, t_step: f64) -> Result<Vec<f64>, Failure> {
    if !(t_step > 0.0) {
        return Err(Failure::usage("--t-step must be positive"));
    }
    if t_min > t_max {
        return Err(Failure::usage("--t-min must not exceed --t-max"));
    }
    let count = ((t_max - t_min) / t_step).round() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|k| t_min + k as f64 * t_step)
        .filter(|&t| t <= t_max + 1e-9 * t_step)
        .collect();
    if grid.is_empty() {
        return Err(Failure::usage("the duration grid is empty"));
    }
    Ok(grid)
}

fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if points < 2 {
        return Err(Failure::usage("--points must be at least 2"));
    }
    if !(hi > lo) {
        return Err(Failure::usage("the grid maximum must exceed its minimum"));
    }
    Ok((0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect())
}

/// Emits a table as CSV (17-significant-digit floats) or a JSON row array,
/// to --out or stdout.
fn emit_rows(cli: &Cli, headers: &[&str], rows: &[Vec<f64>]) -> Result<(), Failure> {
    let text = match cli.format {
        Format::Csv => {
            let mut text = headers.join(",");
            text.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            text
        }
        Format::Json => {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    headers
                        .iter()
                        .zip(row)
                        .map(|(&h, &v)| (h.to_string(), serde_json::json!(v)))
                        .collect::<serde_json::Map<_, _>>()
                        .into()
                })
                .collect();
            serde_json::to_string_pretty(&objects).expect("rows serialize")
        }
    };
    write_text(cli.out.as_deref(), &text)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, text.as_bytes()).map_err(|e| Failure::from(Error::Io(e)))?
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| if text.ends_with('\n') { Ok(()) } else { lock.write_all(b"\n") })
                .map_err(|e| Failure::from(Error::Io(e)))?;
        }
    }
    Ok(())
}
