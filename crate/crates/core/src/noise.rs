//! Noise validation: quasi-static coupling sweeps, analytic native-protocol
//! oracles, full simulation against quantized motion, and the Ramsey
//! dephasing model that motivates the quasi-static noise assumption.
//!
//! The motional simulation evolves the four computational basis states
//! (tensored with every retained oscillator pair state) under the
//! position-modulated exchange plus the pulse's drive, then scores a fidelity
//! that is coherent over the qubit label and incoherent over the thermal
//! occupation: F = Σ_p b_p · ‖Σ_q ⟨target_q| ψ_{q,p}⟩‖² / 16, with the
//! environment's final state traced out. At zero qubit-motion coupling this
//! reduces exactly to the gate fidelity.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::config::numerics;
use crate::error::{Error, Result};
use crate::hamiltonians::{
    control_hamiltonian, motion_modulated_exchange, ExchangeParams, MotionalModel,
};
use crate::objectives::{frame_unitary, FrameAngles};
use crate::operators::{hermitian_eigen, kron, thermal_state, Ket, Operator, C64};
use crate::optimize::bfgs;
use crate::propagation::{dd, step_controls};
use crate::pulses::Pulse;

/// Quasi-static coupling-error sweep of a stored pulse.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Relative coupling offsets ΔJ/J to evaluate.
    pub dj_values: Vec<f64>,
    pub pulse: Pulse,
}

/// Default sweep grid: 81 points covering ΔJ/J ∈ [−0.2, 0.2].
pub fn default_dj_grid() -> Vec<f64> {
    (0..81).map(|i| -0.2 + 0.4 * i as f64 / 80.0).collect()
}

/// Gate infidelity 1 − F per coupling offset, propagating the pulse under
/// J(1 + ΔJ/J) with its stored frame angles held fixed.
pub fn sweep_infidelity(spec: &SweepSpec, target: &Operator) -> Result<Vec<(f64, f64)>> {
    for &dj in &spec.dj_values {
        if !dj.is_finite() {
            return Err(Error::NonFinite("sweep coupling offset".into()));
        }
    }
    let framed = frame_unitary(&spec.pulse.frames) * target.clone();
    spec.dj_values
        .par_iter()
        .map(|&dj| {
            let u0 = crate::propagation::evolve_unitary(&spec.pulse, 1.0 + dj)?;
            let z = (framed.adjoint() * u0).trace();
            Ok((dj, 1.0 - z.norm_sqr() / 16.0))
        })
        .collect()
}

/// Preparation infidelity 1 − |⟨target|R·U(1+δ)|initial⟩|² across relative
/// coupling offsets, for pulses whose objective is a single state rather
/// than a gate.
pub fn sweep_state_infidelity(
    spec: &SweepSpec,
    initial: &Ket,
    target: &Ket,
) -> Result<Vec<(f64, f64)>> {
    for &dj in &spec.dj_values {
        if !dj.is_finite() {
            return Err(Error::NonFinite("sweep coupling offset".into()));
        }
    }
    let rr = frame_unitary(&spec.pulse.frames);
    spec.dj_values
        .par_iter()
        .map(|&dj| {
            let u0 = crate::propagation::evolve_unitary(&spec.pulse, 1.0 + dj)?;
            let z = target.dot(&rr.apply(&u0.apply(initial)));
            Ok((dj, 1.0 - z.norm_sqr()))
        })
        .collect()
}

/// Infidelity of the undriven exchange gate at relative coupling error ε:
/// the native protocol accumulates the wrong hopping angle, giving
/// 1 − (2 + 2cos(πε/2))²/16.
pub fn native_infidelity_oracle(epsilon: f64) -> f64 {
    let c = (std::f64::consts::FRAC_PI_2 * epsilon).cos();
    let overlap = (2.0 + 2.0 * c) / 4.0;
    1.0 - overlap * overlap
}

/// Infidelity of native Bell-state preparation from |++⟩ at relative
/// coupling error ε: only the triplet component dephases, giving
/// 1 − cos²(πε/4).
pub fn bell_prep_infidelity_oracle(epsilon: f64) -> f64 {
    let c = (std::f64::consts::FRAC_PI_4 * epsilon).cos();
    1.0 - c * c
}

/// Full qubit⊗motion simulation of a stored pulse.
#[derive(Debug, Clone)]
pub struct MotionalSimSpec {
    pub model: MotionalModel,
    pub pulse: Pulse,
}

/// Gate infidelity under quantized motion, scored with the pulse's stored
/// frame angles.
pub fn simulate_with_motion(spec: &MotionalSimSpec, target: &Operator) -> Result<f64> {
    let (tensor, weights) = motional_tensor(spec)?;
    let framed = frame_unitary(&spec.pulse.frames) * target.clone();
    Ok(1.0 - motional_fidelity(&tensor, &weights, framed.matrix()))
}

/// Gate infidelity under quantized motion with the terminal frame angles
/// re-optimized against the motional dynamics (the propagation runs once;
/// only the cheap overlap contraction is re-evaluated per candidate).
pub fn simulate_with_motion_best_frames(
    spec: &MotionalSimSpec,
    target: &Operator,
) -> Result<(f64, FrameAngles)> {
    let (tensor, weights) = motional_tensor(spec)?;
    let x0: Vec<f64> = match spec.pulse.frames {
        FrameAngles::Shared(a) => a.to_vec(),
        FrameAngles::PerQubit { q1, q2 } => q1.iter().chain(q2.iter()).copied().collect(),
    };
    let per_qubit = matches!(spec.pulse.frames, FrameAngles::PerQubit { .. });
    let frames_of = |x: &[f64]| {
        if per_qubit {
            FrameAngles::PerQubit {
                q1: [x[0], x[1], x[2]],
                q2: [x[3], x[4], x[5]],
            }
        } else {
            FrameAngles::Shared([x[0], x[1], x[2]])
        }
    };
    let infidelity = |x: &[f64]| {
        let framed = frame_unitary(&frames_of(x)) * target.clone();
        1.0 - motional_fidelity(&tensor, &weights, framed.matrix())
    };
    let opts = bfgs::BfgsOptions {
        max_iterations: 300,
        gradient_tolerance: 1e-12,
        cost_tolerance: f64::NEG_INFINITY,
    };
    let h = 1e-6;
    let out = bfgs::minimize(
        |x, g| {
            let mut probe = x.to_vec();
            for j in 0..x.len() {
                probe[j] = x[j] + h;
                let up = infidelity(&probe);
                probe[j] = x[j] - h;
                let down = infidelity(&probe);
                probe[j] = x[j];
                g[j] = (up - down) / (2.0 * h);
            }
            infidelity(x)
        },
        &x0,
        &opts,
        |_, _| {},
    );
    Ok((out.cost, frames_of(&out.x)))
}

/// Propagates every |q⟩⊗|p⟩ column and reshapes the result for overlap
/// contraction; also returns the renormalized joint thermal weights.
fn motional_tensor(spec: &MotionalSimSpec) -> Result<(DMatrix<C64>, Vec<f64>)> {
    let n = spec.model.n_max;
    let dim = 4 * n * n;
    let cap = numerics().motional_dim_cap;
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let (controls, dt) = step_controls(&spec.pulse)?;
    let h_mot = motion_modulated_exchange(&ExchangeParams { j: 1.0 }, &spec.model);
    let mot_identity = Operator::identity(n * n);

    let mut u = DMatrix::<C64>::identity(dim, dim);
    for step in &controls {
        let hc = control_hamiltonian(&spec.pulse.layout, step)?;
        let h = &h_mot + &kron(&hc, &mot_identity);
        let (vals, vecs) = hermitian_eigen(h.matrix());
        let mut phased = vecs.clone();
        for (k, &lam) in vals.iter().enumerate() {
            let phase = dd::phase(lam, dt);
            for r in 0..dim {
                phased[(r, k)] *= phase;
            }
        }
        u = phased * vecs.adjoint() * u;
    }

    // Row (s·4 + q), column (m·n² + p): amplitude ⟨s, m | U | q, p⟩.
    let nn = n * n;
    let mut tensor = DMatrix::<C64>::zeros(16, nn * nn);
    for s in 0..4 {
        for q in 0..4 {
            for m in 0..nn {
                for p in 0..nn {
                    tensor[(s * 4 + q, m * nn + p)] = u[(s * nn + m, q * nn + p)];
                }
            }
        }
    }

    let per_mode = thermal_state(spec.model.beta_ratio, n);
    let mut weights = vec![0.0; nn];
    for p1 in 0..n {
        for p2 in 0..n {
            weights[p1 * n + p2] = per_mode.entry(p1, p1).re * per_mode.entry(p2, p2).re;
        }
    }
    Ok((tensor, weights))
}

/// F = Σ_p b_p ‖Σ_q ⟨framed-target column q | ψ_{q,p}⟩‖² / 16.
fn motional_fidelity(tensor: &DMatrix<C64>, weights: &[f64], framed: &DMatrix<C64>) -> f64 {
    let nn = weights.len();
    let mut fidelity = 0.0;
    for p in 0..nn {
        for m in 0..nn {
            let mut v = C64::new(0.0, 0.0);
            for s in 0..4 {
                for q in 0..4 {
                    v += framed[(s, q)].conj() * tensor[(s * 4 + q, m * nn + p)];
                }
            }
            fidelity += weights[p] * v.norm_sqr();
        }
    }
    fidelity / 16.0
}

/// Expected |11⟩ population of the Ramsey sequence under Gaussian
/// quasi-static coupling noise: ½(1 − e^{−t²σ²/2} cos Jt). The envelope
/// reaches 1/e at the dephasing time T₂ = √2/σ.
pub fn ramsey_analytic(j: f64, sigma_j: f64, t: f64) -> f64 {
    0.5 * (1.0 - (-0.5 * t * t * sigma_j * sigma_j).exp() * (j * t).cos())
}

/// Dephasing time of the Gaussian quasi-static model.
pub fn t2_time(sigma_j: f64) -> f64 {
    std::f64::consts::SQRT_2 / sigma_j
}

/// Monte-Carlo Ramsey curve: each shot draws one constant coupling offset,
/// the sequence is evaluated analytically per shot, and shots are averaged
/// per time point. The draws happen once, sequentially, so the output is
/// bitwise-reproducible regardless of how the time grid is parallelized.
pub fn ramsey_monte_carlo(
    j: f64,
    sigma_j: f64,
    t_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if samples == 0 {
        return Err(Error::NotPositive {
            name: "samples",
            value: 0.0,
        });
    }
    if sigma_j < 0.0 {
        return Err(Error::NotPositive {
            name: "sigma_j",
            value: sigma_j,
        });
    }
    let normal = Normal::new(0.0, sigma_j).expect("nonnegative standard deviation");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..samples).map(|_| normal.sample(&mut rng)).collect();
    Ok(t_grid
        .par_iter()
        .map(|&t| {
            let sum: f64 = draws.iter().map(|&dj| 0.5 * (1.0 - ((j + dj) * t).cos())).sum();
            (t, sum / samples as f64)
        })
        .collect())
}

/// Recovers T₂ from a Ramsey curve by regressing the log envelope against
/// t². Returns None when too few usable envelope points exist.
pub fn fit_t2(points: &[(f64, f64)], j: f64) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, p11) in points {
        let carrier = (j * t).cos();
        if t <= 0.0 || carrier.abs() < 0.9 {
            continue;
        }
        let envelope = (1.0 - 2.0 * p11).abs() / carrier.abs();
        if envelope <= 1e-12 {
            continue;
        }
        xs.push(t * t);
        ys.push(envelope.ln());
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return None;
    }
    let sigma = (-2.0 * slope).sqrt();
    Some(t2_time(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::ControlLayout;
    use crate::objectives::iswap_target;
    use crate::optimize::{grape_optimize, GrapeProblem, OptimizationConfig};
    use crate::pulses::Pulse;
    use std::sync::OnceLock;

    /// One converged robust FullLocal pulse, shared across tests.
    fn robust_pulse() -> &'static Pulse {
        static PULSE: OnceLock<Pulse> = OnceLock::new();
        PULSE.get_or_init(|| {
            let problem = GrapeProblem {
                layout: ControlLayout::full_local(),
                target: iswap_target(),
                duration: 4.5,
                steps: 40,
            };
            let cfg = OptimizationConfig {
                restarts: 6,
                seed: 7,
                ..OptimizationConfig::default()
            };
            let result = grape_optimize(&problem, &cfg).unwrap();
            assert!(result.converged, "robust reference pulse failed to converge");
            result.pulse
        })
    }

    #[test]
    fn native_oracle_matches_closed_form_and_parity() {
        assert_eq!(native_infidelity_oracle(0.0), 0.0);
        let at_ten_percent = native_infidelity_oracle(0.1);
        let expect = 1.0 - (2.0 + 2.0 * (0.05 * std::f64::consts::PI).cos()).powi(2) / 16.0;
        assert!((at_ten_percent - expect).abs() < 1e-15);
        assert!((at_ten_percent - 1.23e-2).abs() < 2e-4);
        for eps in [0.03, 0.1, 0.17] {
            assert_eq!(
                native_infidelity_oracle(eps),
                native_infidelity_oracle(-eps)
            );
        }
    }

    #[test]
    fn native_oracle_agrees_with_swept_native_pulse() {
        let spec = SweepSpec {
            dj_values: vec![-0.1, 0.0, 0.05, 0.1],
            pulse: Pulse::native(),
        };
        let swept = sweep_infidelity(&spec, &iswap_target()).unwrap();
        for (dj, infid) in swept {
            assert!(
                (infid - native_infidelity_oracle(dj)).abs() < 1e-12,
                "dj {dj}: sweep {infid:.6e} vs oracle {:.6e}",
                native_infidelity_oracle(dj)
            );
        }
    }

    #[test]
    fn bell_oracle_values_and_small_angle_limit() {
        assert_eq!(bell_prep_infidelity_oracle(0.0), 0.0);
        let at_ten_percent = bell_prep_infidelity_oracle(0.1);
        let sin = (std::f64::consts::PI * 0.1 / 4.0).sin();
        assert!((at_ten_percent - sin * sin).abs() < 1e-15);
        assert!((at_ten_percent - 6.15e-3).abs() < 2e-5);
        let eps = 1e-4;
        let quadratic = (std::f64::consts::PI * eps / 4.0).powi(2);
        assert!((bell_prep_infidelity_oracle(eps) / quadratic - 1.0).abs() < 1e-6);
    }

    #[test]
    fn state_sweep_of_the_native_pulse_matches_the_bell_oracle() {
        let initial = crate::optimize::plus_plus();
        let target = iswap_target().apply(&initial);
        let spec = SweepSpec {
            dj_values: vec![-0.2, -0.1, 0.0, 0.07, 0.2],
            pulse: Pulse::native(),
        };
        let swept = sweep_state_infidelity(&spec, &initial, &target).unwrap();
        for &(dj, infid) in &swept {
            let oracle = bell_prep_infidelity_oracle(dj);
            assert!(
                (infid - oracle).abs() < 1e-12,
                "dj {dj}: {infid:.3e} vs oracle {oracle:.3e}"
            );
        }
    }

    #[test]
    fn sweep_at_zero_offset_reproduces_stored_fidelity() {
        let pulse = robust_pulse().clone();
        let stored = pulse.metadata.as_ref().unwrap().cost.unwrap().fidelity;
        let spec = SweepSpec {
            dj_values: vec![0.0],
            pulse,
        };
        let swept = sweep_infidelity(&spec, &iswap_target()).unwrap();
        assert!((swept[0].1 - (1.0 - stored)).abs() < 1e-10);
    }

    #[test]
    fn robust_pulse_stays_accurate_at_ten_percent_offset() {
        let spec = SweepSpec {
            dj_values: vec![0.1],
            pulse: robust_pulse().clone(),
        };
        let swept = sweep_infidelity(&spec, &iswap_target()).unwrap();
        assert!(
            swept[0].1 <= 5e-4,
            "robust pulse infidelity {:.3e} at 10% coupling error",
            swept[0].1
        );
    }

    #[test]
    fn robust_pulse_suppresses_the_quadratic_response_coefficient() {
        let eps = [1e-3, 2e-3, 4e-3];
        // The native response is exactly quadratic at these offsets:
        // successive doublings quadruple the infidelity.
        for e in eps {
            let r = native_infidelity_oracle(2.0 * e) / native_infidelity_oracle(e);
            assert!((r - 4.0).abs() < 0.8, "native ratio {r} at {e}");
        }
        // A converged robust pulse does better than a tenfold-smaller
        // quadratic coefficient: first-order insensitivity removes the
        // quadratic term entirely, leaving only the convergence residual
        // and a quartic tail.
        let spec = SweepSpec {
            dj_values: eps.to_vec(),
            pulse: robust_pulse().clone(),
        };
        let swept = sweep_infidelity(&spec, &iswap_target()).unwrap();
        let native_coeff = native_infidelity_oracle(eps[0]) / (eps[0] * eps[0]);
        for (e, infid) in swept {
            let coeff = infid / (e * e);
            assert!(
                coeff <= native_coeff / 10.0,
                "effective coefficient {coeff:.3e} at {e} vs native {native_coeff:.3e}"
            );
        }
    }

    #[test]
    fn sweep_rejects_non_finite_offsets() {
        let spec = SweepSpec {
            dj_values: vec![0.0, f64::NAN],
            pulse: Pulse::native(),
        };
        assert!(matches!(
            sweep_infidelity(&spec, &iswap_target()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn motion_decouples_at_zero_length_ratio() {
        let pulse = robust_pulse().clone();
        let mut model = MotionalModel::default();
        model.length_ratio = 0.0;
        model.n_max = 3;
        let with_motion = simulate_with_motion(
            &MotionalSimSpec {
                model,
                pulse: pulse.clone(),
            },
            &iswap_target(),
        )
        .unwrap();
        let bare = sweep_infidelity(
            &SweepSpec {
                dj_values: vec![0.0],
                pulse,
            },
            &iswap_target(),
        )
        .unwrap()[0]
            .1;
        assert!(
            (with_motion - bare).abs() < 1e-10,
            "motional {with_motion:.6e} vs bare {bare:.6e}"
        );
    }

    #[test]
    fn native_gate_degrades_under_motion() {
        let mut model = MotionalModel::default();
        model.n_max = 4;
        let infid = simulate_with_motion(
            &MotionalSimSpec {
                model,
                pulse: Pulse::native(),
            },
            &iswap_target(),
        )
        .unwrap();
        assert!(infid > 1e-4, "native infidelity under motion {infid:.3e}");
        assert!(infid < 0.5);
    }

    #[test]
    fn truncation_error_decays_geometrically_with_the_thermal_tail() {
        let make = |n_max: usize, beta_ratio: f64| {
            let mut model = MotionalModel::default();
            model.n_max = n_max;
            model.beta_ratio = beta_ratio;
            simulate_with_motion(
                &MotionalSimSpec {
                    model,
                    pulse: Pulse::native(),
                },
                &iswap_target(),
            )
            .unwrap()
        };
        // At the default temperature (mean occupation ≈ 1.9) the retained
        // levels gain weight slowly, so successive cutoff increments must
        // shrink the correction but need several steps to settle.
        let beta = MotionalModel::default().beta_ratio;
        let seq: Vec<f64> = [7, 9, 11, 13].iter().map(|&n| make(n, beta)).collect();
        let d1 = (seq[1] - seq[0]).abs();
        let d2 = (seq[2] - seq[1]).abs();
        let d3 = (seq[3] - seq[2]).abs();
        assert!(d2 < d1 && d3 < d2, "corrections {d1:.2e}, {d2:.2e}, {d3:.2e}");
        assert!(
            d3 / seq[3] < 0.1,
            "cutoff 11 → 13 still moves the infidelity by {:.1}%",
            100.0 * d3 / seq[3]
        );
        // A colder state leaves negligible weight above the cutoff, and the
        // usual two-level headroom check is already tight.
        let cold_seven = make(7, 1.2);
        let cold_nine = make(9, 1.2);
        assert!(
            (cold_seven - cold_nine).abs() / cold_nine < 0.1,
            "cold n_max=7 {cold_seven:.4e} vs n_max=9 {cold_nine:.4e}"
        );
    }

    #[test]
    fn oversized_motional_space_is_rejected() {
        let mut model = MotionalModel::default();
        model.n_max = 40;
        let err = simulate_with_motion(
            &MotionalSimSpec {
                model,
                pulse: Pulse::native(),
            },
            &iswap_target(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionCap { .. }));
    }

    #[test]
    fn optimized_frames_never_lose_to_stored_frames() {
        let mut model = MotionalModel::default();
        model.n_max = 3;
        let spec = MotionalSimSpec {
            model,
            pulse: Pulse::native(),
        };
        let fixed = simulate_with_motion(&spec, &iswap_target()).unwrap();
        let (best, _frames) = simulate_with_motion_best_frames(&spec, &iswap_target()).unwrap();
        assert!(best <= fixed + 1e-12, "optimized {best:.6e} vs fixed {fixed:.6e}");
    }

    #[test]
    fn ramsey_analytic_limits() {
        assert_eq!(ramsey_analytic(1.0, 0.05, 0.0), 0.0);
        let t = 1.7_f64;
        let coherent = 0.5 * (1.0 - t.cos());
        assert!((ramsey_analytic(1.0, 0.0, t) - coherent).abs() < 1e-15);
        // At T₂ the envelope has decayed to 1/e.
        let sigma: f64 = 0.05;
        let t2 = t2_time(sigma);
        let envelope = (-0.5 * t2 * t2 * sigma * sigma).exp();
        assert!((envelope - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_matches_coherent_limit() {
        let grid: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
        let a = ramsey_monte_carlo(1.0, 0.05, &grid, 2000, 11).unwrap();
        let b = ramsey_monte_carlo(1.0, 0.05, &grid, 2000, 11).unwrap();
        for ((ta, pa), (tb, pb)) in a.iter().zip(&b) {
            assert_eq!(ta.to_bits(), tb.to_bits());
            assert_eq!(pa.to_bits(), pb.to_bits());
        }
        let coherent = ramsey_monte_carlo(1.0, 0.0, &grid, 50, 3).unwrap();
        for (t, p) in coherent {
            assert!((p - ramsey_analytic(1.0, 0.0, t)).abs() < 1e-14);
        }
    }

    #[test]
    fn monte_carlo_error_is_within_clt_bound_at_t2() {
        let sigma = 0.05;
        let t = t2_time(sigma);
        let samples = 100_000;
        let mc = ramsey_monte_carlo(1.0, sigma, &[t], samples, 42).unwrap()[0].1;
        let analytic = ramsey_analytic(1.0, sigma, t);
        let bound = 4.0 / (samples as f64).sqrt();
        assert!(
            (mc - analytic).abs() < bound,
            "|{mc:.6} - {analytic:.6}| vs bound {bound:.6}"
        );
    }

    #[test]
    fn monte_carlo_converges_at_square_root_rate() {
        let sigma = 0.08;
        let grid: Vec<f64> = (1..40).map(|i| 0.5 * i as f64).collect();
        let analytic: Vec<f64> = grid
            .iter()
            .map(|&t| ramsey_analytic(1.0, sigma, t))
            .collect();
        let mut log_n = Vec::new();
        let mut log_err = Vec::new();
        for &samples in &[400usize, 1600, 6400, 25_600, 102_400] {
            let mut err_sq = 0.0;
            // Average over independent seeds to tame the noise in the
            // measured rate.
            for rep in 0..8u64 {
                let mc = ramsey_monte_carlo(1.0, sigma, &grid, samples, 1000 + 17 * rep).unwrap();
                err_sq += mc
                    .iter()
                    .zip(&analytic)
                    .map(|((_, p), a)| (p - a) * (p - a))
                    .sum::<f64>()
                    / grid.len() as f64;
            }
            let rms = (err_sq / 8.0).sqrt();
            log_n.push((samples as f64).ln());
            log_err.push(rms.ln());
        }
        let n = log_n.len() as f64;
        let mx = log_n.iter().sum::<f64>() / n;
        let my = log_err.iter().sum::<f64>() / n;
        let sxx: f64 = log_n.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = log_n.iter().zip(&log_err).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        assert!(
            (-0.6..=-0.4).contains(&slope),
            "measured convergence rate {slope:.3}"
        );
    }

    #[test]
    fn t2_fit_recovers_the_dephasing_time() {
        let sigma = 0.06;
        let t2 = t2_time(sigma);
        let grid: Vec<f64> = (1..200).map(|i| 0.02 * t2 * i as f64).collect();
        let curve: Vec<(f64, f64)> = grid
            .iter()
            .map(|&t| (t, ramsey_analytic(1.0, sigma, t)))
            .collect();
        let fitted = fit_t2(&curve, 1.0).unwrap();
        assert!(
            (fitted - t2).abs() / t2 < 0.03,
            "fitted {fitted:.4} vs true {t2:.4}"
        );
    }

    #[test]
    fn monte_carlo_rejects_invalid_arguments() {
        assert!(ramsey_monte_carlo(1.0, 0.05, &[1.0], 0, 1).is_err());
        assert!(ramsey_monte_carlo(1.0, -0.05, &[1.0], 10, 1).is_err());
    }
}
