//! Fidelity, robustness, total cost, and the a-priori robustness criteria.
//!
//! The gate figure of merit is the basis-averaged overlap with the target up
//! to free single-qubit frame rotations; robustness is the summed squared
//! norm of the first-order perturbative corrections at the final time. A
//! control problem is provably unable to reach zero robustness when one of
//! three structural criteria on the noise operator holds along the whole
//! pulse; [`check_criteria`] evaluates them with numeric evidence.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::first_order_hamiltonian;
use crate::operators::{expm_skew_hermitian, hermitian_eigen, kron, Ket, Operator, C64, ZERO};
use crate::propagation::{computational_basis, first_order_states, step_controls, step_hamiltonian};
use crate::pulses::Pulse;

/// Free single-qubit frame rotation angles (theta, varphi, lambda) per qubit.
///
/// Global-drive layouts share one triple across both qubits; full local
/// control gives each qubit its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameAngles {
    /// One triple applied to both qubits (R⊗R).
    Shared([f64; 3]),
    /// Independent triples (R₁⊗R₂).
    PerQubit { q1: [f64; 3], q2: [f64; 3] },
}

impl FrameAngles {
    /// Identity rotation in shared form.
    pub fn identity_shared() -> Self {
        FrameAngles::Shared([0.0; 3])
    }

    /// Identity rotation in per-qubit form.
    pub fn identity_per_qubit() -> Self {
        FrameAngles::PerQubit {
            q1: [0.0; 3],
            q2: [0.0; 3],
        }
    }

    /// The (theta, varphi, lambda) triple for the given qubit (0 or 1).
    pub fn angles(&self, qubit: usize) -> [f64; 3] {
        match self {
            FrameAngles::Shared(a) => *a,
            FrameAngles::PerQubit { q1, q2 } => {
                if qubit == 0 {
                    *q1
                } else {
                    *q2
                }
            }
        }
    }

    /// Number of free angles (3 shared, 6 per-qubit).
    pub fn param_count(&self) -> usize {
        match self {
            FrameAngles::Shared(_) => 3,
            FrameAngles::PerQubit { .. } => 6,
        }
    }
}

/// Cost functional value and its two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fidelity: f64,
    pub robustness: f64,
    /// 1 − fidelity + robustness.
    pub cost: f64,
}

impl CostBreakdown {
    /// Assembles the breakdown, keeping the cost identity exact.
    pub fn new(fidelity: f64, robustness: f64) -> Self {
        CostBreakdown {
            fidelity,
            robustness,
            cost: 1.0 - fidelity + robustness,
        }
    }
}

/// The iSWAP gate: free exchange evolution at time π/2 (J = 1).
pub fn iswap_target() -> Operator {
    expm_skew_hermitian(&first_order_hamiltonian(), std::f64::consts::FRAC_PI_2)
        .expect("exchange operator is Hermitian")
}

/// Frame rotation R(θ,φ,λ) = e^{i(φ+λ)/2} R_z(φ) R_y(θ) R_z(λ):
/// [[cos(θ/2), −e^{iλ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(φ+λ)} cos(θ/2)]].
pub fn single_qubit_rotation(frames: &FrameAngles, qubit: usize) -> Operator {
    let [theta, varphi, lambda] = frames.angles(qubit);
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    Operator::from_rows(
        2,
        &[
            C64::new(c, 0.0),
            -C64::from_polar(s, lambda),
            C64::from_polar(s, varphi),
            C64::from_polar(c, varphi + lambda),
        ],
    )
    .unwrap()
}

/// Two-qubit frame unitary: R₁⊗R₂ (shared frames give R⊗R).
pub fn frame_unitary(frames: &FrameAngles) -> Operator {
    kron(
        &single_qubit_rotation(frames, 0),
        &single_qubit_rotation(frames, 1),
    )
}

/// Basis-averaged gate fidelity up to frame rotations:
/// F = (1/16)|Σ_q ⟨ψ_q(T)| (R₁⊗R₂) U_target |q⟩|².
pub fn bell_fidelity(final_states: &[Ket], frames: &FrameAngles, target: &Operator) -> Result<f64> {
    if final_states.len() != 4 {
        return Err(Error::WrongStateCount {
            expected: 4,
            got: final_states.len(),
        });
    }
    let a = frame_unitary(frames) * target.clone();
    let mut z = ZERO;
    for (q, psi) in final_states.iter().enumerate() {
        if psi.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: psi.dim(),
            });
        }
        z += psi.dot(&a.apply(&Ket::basis(4, q)));
    }
    Ok(z.norm_sqr() / 16.0)
}

/// Robustness R = Σ_q ⟨ψ_q⁽¹⁾|ψ_q⁽¹⁾⟩ over the first-order states.
pub fn robustness(first_states: &[Ket]) -> f64 {
    first_states.iter().map(Ket::norm_squared).sum()
}

/// Extended robustness Σ_q ‖ψ_q⁽¹⁾ − iα·ψ_q⁽⁰⁾‖², which tolerates a
/// first-order correction parallel to the intended state.
pub fn extended_robustness(zeroth: &[Ket], first: &[Ket], alpha: f64) -> f64 {
    assert_eq!(zeroth.len(), first.len(), "state lists must match");
    zeroth
        .iter()
        .zip(first)
        .map(|(z, f)| (f - &z.scale(C64::new(0.0, alpha))).norm_squared())
        .sum()
}

/// Full cost C = 1 − F + R for a pulse against a target gate.
pub fn cost(pulse: &Pulse, target: &Operator) -> Result<CostBreakdown> {
    let states = first_order_states(pulse, &computational_basis(4))?;
    let zeroth: Vec<Ket> = states.iter().map(|s| s.zeroth.clone()).collect();
    let first: Vec<Ket> = states.iter().map(|s| s.first.clone()).collect();
    let f = bell_fidelity(&zeroth, &pulse.frames, target)?;
    Ok(CostBreakdown::new(f, robustness(&first)))
}

/// Evidence for the product criterion (iii): H⁽¹⁾ = P·C with P ⪰ 0 and C
/// commuting with every sampled H⁽⁰⁾(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductCriterion {
    /// ‖P·C − H⁽¹⁾‖_max.
    pub factorization_residual: f64,
    /// Smallest eigenvalue of P.
    pub p_min_eigenvalue: f64,
    /// ‖C − C†‖_max.
    pub c_hermiticity_residual: f64,
    /// max over samples of ‖[C, H⁽⁰⁾(t)]‖_max.
    pub max_commutator: f64,
    pub fires: bool,
}

/// Numeric verdicts for the three robustness-impossibility criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    /// Firing threshold on all evidence norms.
    pub tolerance: f64,
    /// Criterion (i): max over samples of ‖[H⁽¹⁾, H⁽⁰⁾(t)]‖_max.
    pub commuting_max_norm: f64,
    pub commuting_fires: bool,
    /// Criterion (ii): smallest eigenvalue of H⁽¹⁾.
    pub h1_min_eigenvalue: f64,
    pub psd_fires: bool,
    /// Criterion (iii), present when a candidate (P, C) was supplied.
    pub product: Option<ProductCriterion>,
}

impl CriteriaReport {
    /// True when any criterion fires, i.e. zero robustness is unreachable.
    pub fn any_fires(&self) -> bool {
        self.commuting_fires || self.psd_fires || self.product.map(|p| p.fires).unwrap_or(false)
    }
}

impl std::fmt::Display for CriteriaReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "robustness-impossibility criteria (tolerance {:.1e})", self.tolerance)?;
        writeln!(
            f,
            "  (i)   commuting: max ‖[H1,H0(t)]‖ = {:.3e}  fires: {}",
            self.commuting_max_norm, self.commuting_fires
        )?;
        writeln!(
            f,
            "  (ii)  positive semi-definite: min eig H1 = {:.3e}  fires: {}",
            self.h1_min_eigenvalue, self.psd_fires
        )?;
        match &self.product {
            Some(p) => writeln!(
                f,
                "  (iii) product P·C: ‖PC−H1‖ = {:.3e}, min eig P = {:.3e}, ‖C−C†‖ = {:.3e}, max ‖[C,H0(t)]‖ = {:.3e}  fires: {}",
                p.factorization_residual,
                p.p_min_eigenvalue,
                p.c_hermiticity_residual,
                p.max_commutator,
                p.fires
            ),
            None => writeln!(f, "  (iii) product P·C: no candidate supplied"),
        }
    }
}

/// Checks the three structural criteria of the noise operator against sampled
/// zeroth-order Hamiltonians. Criterion (iii) needs a caller-supplied
/// candidate decomposition (P, C); no search is attempted.
pub fn check_criteria(
    h0_samples: &[Operator],
    h1: &Operator,
    candidate: Option<(&Operator, &Operator)>,
) -> Result<CriteriaReport> {
    let tol = 1e-10;
    let residual = h1.hermiticity_residual();
    if residual >= tol {
        return Err(Error::NotHermitian { residual, tol });
    }
    let commuting_max_norm = h0_samples
        .iter()
        .map(|h0| h1.commutator(h0).max_norm())
        .fold(0.0, f64::max);
    let (h1_vals, _) = h1.eigendecompose_hermitian()?;
    let h1_min_eigenvalue = h1_vals.first().copied().unwrap_or(0.0);
    let product = match candidate {
        Some((p, c)) => {
            let factorization_residual = (p.clone() * c.clone() - h1.clone()).max_norm();
            let (p_vals, _) = p.eigendecompose_hermitian()?;
            let p_min_eigenvalue = p_vals.first().copied().unwrap_or(0.0);
            let c_hermiticity_residual = c.hermiticity_residual();
            let max_commutator = h0_samples
                .iter()
                .map(|h0| c.commutator(h0).max_norm())
                .fold(0.0, f64::max);
            let fires = factorization_residual < tol
                && p_min_eigenvalue > -tol
                && c_hermiticity_residual < tol
                && max_commutator < tol;
            Some(ProductCriterion {
                factorization_residual,
                p_min_eigenvalue,
                c_hermiticity_residual,
                max_commutator,
                fires,
            })
        }
        None => None,
    };
    Ok(CriteriaReport {
        tolerance: tol,
        commuting_max_norm,
        commuting_fires: commuting_max_norm < tol,
        h1_min_eigenvalue,
        psd_fires: h1_min_eigenvalue > -tol,
        product,
    })
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

/// Robustness via the trace form R = ∫∫ Tr{H̃⁽¹⁾(t′) H̃⁽¹⁾(t)} dt dt′ with
/// H̃⁽¹⁾(t) = U⁰(t)†H⁽¹⁾U⁰(t), evaluated as Tr{M²} for M = ∫ H̃⁽¹⁾ dt.
///
/// The time integral runs per pulse step with Gauss–Legendre nodes, using the
/// exact in-step propagator at each node. Independent of state propagation,
/// it cross-checks [`robustness`].
pub fn robustness_trace_integral(pulse: &Pulse, h1: &Operator) -> Result<f64> {
    let (controls, dt) = step_controls(pulse)?;
    let dim = h1.dim();
    let mut prefix = DMatrix::<C64>::identity(dim, dim);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for step in &controls {
        let h0 = step_hamiltonian(&pulse.layout, step, 1.0)?;
        let (vals, vecs) = hermitian_eigen(h0.matrix());
        let partial = |tau: f64| -> DMatrix<C64> {
            let mut phased = vecs.clone();
            for (k, &lam) in vals.iter().enumerate() {
                let phase = C64::from_polar(1.0, -lam * tau);
                for i in 0..dim {
                    phased[(i, k)] *= phase;
                }
            }
            phased * vecs.adjoint()
        };
        for (node, weight) in GAUSS_LEGENDRE_8 {
            let tau = dt * (node + 1.0) / 2.0;
            let u = partial(tau) * &prefix;
            m += (u.adjoint() * h1.matrix() * &u).scale(weight * dt / 2.0);
        }
        prefix = partial(dt) * prefix;
    }
    Ok((&m * &m).trace().re)
}
