//! Hamiltonian builders in dimensionless units (J = 1, ħ = 1).
//!
//! Covers the exchange-coupled qubit pair, the three control layouts, the
//! first-order noise operator, and the motional models: exchange modulated
//! by harmonic position fluctuations, the Holstein state-dependent trap
//! displacement, and the polaron frame that removes it.
//!
//! Conventions: σ_z|0⟩ = +|0⟩; two-qubit basis {|00⟩,|01⟩,|10⟩,|11⟩};
//! composite spaces ordered (qubit 1, qubit 2, oscillator 1, oscillator 2).
//! The qubit splitting is dropped from gate-level control Hamiltonians
//! (resonant drive); it appears only in the Holstein builders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{expm_general, kron, Operator, C64, I, ONE, ZERO};

/// Exchange coupling strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeParams {
    /// Coupling J in radians per time unit; must be positive for physical runs.
    pub j: f64,
}

impl Default for ExchangeParams {
    fn default() -> Self {
        ExchangeParams { j: 1.0 }
    }
}

/// Which control fields the hardware offers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    /// One field driving both qubits identically: channels (omega, phi).
    Global,
    /// Independent fields per qubit: channels (omega1, phi1, omega2, phi2).
    FullLocal,
    /// Global drive plus a constant detuning on qubit 2: channels (omega, phi).
    GlobalPlusDetuning,
}

impl LayoutKind {
    /// Stable name used in errors and file formats.
    pub fn name(&self) -> &'static str {
        match self {
            LayoutKind::Global => "global",
            LayoutKind::FullLocal => "full-local",
            LayoutKind::GlobalPlusDetuning => "global-plus-detuning",
        }
    }

    /// Number of time-dependent control channels.
    pub fn channels(&self) -> usize {
        match self {
            LayoutKind::Global | LayoutKind::GlobalPlusDetuning => 2,
            LayoutKind::FullLocal => 4,
        }
    }

    /// Channel names in control-vector order.
    pub fn channel_names(&self) -> &'static [&'static str] {
        match self {
            LayoutKind::Global | LayoutKind::GlobalPlusDetuning => &["omega", "phi"],
            LayoutKind::FullLocal => &["omega1", "phi1", "omega2", "phi2"],
        }
    }
}

impl std::fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Control layout with its static parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLayout {
    pub kind: LayoutKind,
    /// Constant detuning on qubit 2, units of J (GlobalPlusDetuning only).
    #[serde(default)]
    pub delta: f64,
    /// Amplitude bound |Ω| ≤ omega_max, units of J.
    pub omega_max: f64,
}

impl ControlLayout {
    /// Global drive, default amplitude bound 50 J.
    pub fn global() -> Self {
        ControlLayout {
            kind: LayoutKind::Global,
            delta: 0.0,
            omega_max: 50.0,
        }
    }

    /// Per-qubit drive, default amplitude bound 50 J.
    pub fn full_local() -> Self {
        ControlLayout {
            kind: LayoutKind::FullLocal,
            delta: 0.0,
            omega_max: 50.0,
        }
    }

    /// Global drive plus constant detuning on qubit 2.
    pub fn detuned(delta: f64) -> Self {
        ControlLayout {
            kind: LayoutKind::GlobalPlusDetuning,
            delta,
            omega_max: 50.0,
        }
    }

    /// Same layout with a different amplitude bound.
    pub fn with_omega_max(mut self, omega_max: f64) -> Self {
        self.omega_max = omega_max;
        self
    }
}

/// Truncated-oscillator model of molecular motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalModel {
    /// Trap frequency ω in units of J.
    pub omega_over_j: f64,
    /// Harmonic length over molecule separation, l/R with l = √(1/(2mω)).
    pub length_ratio: f64,
    /// ω/(k_B T) of the thermal motional state.
    pub beta_ratio: f64,
    /// Oscillator levels kept per molecule.
    pub n_max: usize,
    /// State-dependent trap displacement in harmonic-length units.
    pub zeta: f64,
    /// Internal splitting Δ in units of J (Holstein builders only).
    pub delta_split: f64,
}

impl Default for MotionalModel {
    fn default() -> Self {
        MotionalModel {
            omega_over_j: 7.0,
            length_ratio: 80e-9 / 1.9e-6,
            beta_ratio: 0.42,
            n_max: 7,
            zeta: 0.062,
            delta_split: 10.0,
        }
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Pauli σ_x.
pub fn sigma_x() -> Operator {
    Operator::from_rows(2, &[ZERO, ONE, ONE, ZERO]).unwrap()
}

/// Pauli σ_y.
pub fn sigma_y() -> Operator {
    Operator::from_rows(2, &[ZERO, -I, I, ZERO]).unwrap()
}

/// Pauli σ_z with σ_z|0⟩ = +|0⟩.
pub fn sigma_z() -> Operator {
    Operator::from_rows(2, &[ONE, ZERO, ZERO, -ONE]).unwrap()
}

/// Raising operator σ₊ = |0⟩⟨1|.
pub fn sigma_plus() -> Operator {
    Operator::from_rows(2, &[ZERO, ONE, ZERO, ZERO]).unwrap()
}

/// Lowering operator σ₋ = |1⟩⟨0|.
pub fn sigma_minus() -> Operator {
    sigma_plus().adjoint()
}

/// Projector |1⟩⟨1| = (I − σ_z)/2 onto the excited qubit level.
pub fn excited_projector() -> Operator {
    Operator::from_rows(2, &[ZERO, ZERO, ZERO, ONE]).unwrap()
}

/// Truncated annihilation operator, a|n⟩ = √n|n−1⟩.
pub fn annihilation(n_max: usize) -> Operator {
    assert!(n_max >= 1, "need at least one oscillator level");
    Operator::from_fn(n_max, |i, j| {
        if j == i + 1 {
            real((j as f64).sqrt())
        } else {
            ZERO
        }
    })
}

/// Two-qubit SWAP operator.
pub fn swap_operator() -> Operator {
    Operator::from_fn(4, |i, j| {
        let swapped = (i & 1) << 1 | (i >> 1);
        if swapped == j {
            ONE
        } else {
            ZERO
        }
    })
    .with_factorization(vec![2, 2])
    .unwrap()
}

/// Projector onto the single-excitation subspace span{|01⟩, |10⟩}.
pub fn single_excitation_projector() -> Operator {
    Operator::from_fn(4, |i, j| if i == j && (i == 1 || i == 2) { ONE } else { ZERO })
        .with_factorization(vec![2, 2])
        .unwrap()
}

/// Exchange (flip-flop) Hamiltonian J(σ₊σ₋ + σ₋σ₊).
pub fn exchange_hamiltonian(p: &ExchangeParams) -> Operator {
    (kron(&sigma_plus(), &sigma_minus()) + kron(&sigma_minus(), &sigma_plus())).scale(real(p.j))
}

/// First-order coupling-noise operator: the exchange Hamiltonian at J = 1.
pub fn first_order_hamiltonian() -> Operator {
    exchange_hamiltonian(&ExchangeParams { j: 1.0 })
}

fn drive_on_qubit(qubit: usize, omega: f64, phi: f64) -> Operator {
    let single = sigma_x().scale(real(omega * phi.cos())) + sigma_y().scale(real(omega * phi.sin()));
    match qubit {
        0 => kron(&single, &Operator::identity(2)),
        1 => kron(&Operator::identity(2), &single),
        _ => unreachable!(),
    }
}

/// Control Hamiltonian for one time step of a given layout.
///
/// Control values come in channel order: Global and GlobalPlusDetuning take
/// (omega, phi); FullLocal takes (omega1, phi1, omega2, phi2). The detuning
/// term δ·(I⊗σ_z) is taken from the layout, not the controls.
pub fn control_hamiltonian(layout: &ControlLayout, controls: &[f64]) -> Result<Operator> {
    let expected = layout.kind.channels();
    if controls.len() != expected {
        return Err(Error::ChannelMismatch {
            layout: layout.kind.name(),
            expected,
            got: controls.len(),
        });
    }
    match layout.kind {
        LayoutKind::Global => Ok(drive_on_qubit(0, controls[0], controls[1])
            + drive_on_qubit(1, controls[0], controls[1])),
        LayoutKind::FullLocal => Ok(drive_on_qubit(0, controls[0], controls[1])
            + drive_on_qubit(1, controls[2], controls[3])),
        LayoutKind::GlobalPlusDetuning => {
            let global = drive_on_qubit(0, controls[0], controls[1])
                + drive_on_qubit(1, controls[0], controls[1]);
            let detuning = kron(&Operator::identity(2), &sigma_z()).scale(real(layout.delta));
            Ok(global + detuning)
        }
    }
}

fn kron4(a: &Operator, b: &Operator, c: &Operator, d: &Operator) -> Operator {
    kron(&kron(&kron(a, b), c), d)
}

fn trap_pair(omega: f64, n_max: usize) -> Operator {
    let a = annihilation(n_max);
    let number_plus_half = &a.adjoint() * &a + Operator::identity(n_max).scale(real(0.5));
    let trap = number_plus_half.scale(real(omega));
    kron(&trap, &Operator::identity(n_max)) + kron(&Operator::identity(n_max), &trap)
}

fn exchange_pair_operator() -> Operator {
    kron(&sigma_x(), &sigma_x()) + kron(&sigma_y(), &sigma_y())
}

/// Exchange interaction modulated by axial motion, plus the trap energy.
///
/// H = (J/2)[1 − 3·length_ratio²·(X₁−X₂)²](σ_xσ_x + σ_yσ_y)
///   + Σ_j ω(a_j†a_j + ½), with X = a + a† the dimensionless position.
pub fn motion_modulated_exchange(p: &ExchangeParams, m: &MotionalModel) -> Operator {
    assert!(m.n_max >= 2, "need at least two oscillator levels");
    let n = m.n_max;
    let x = annihilation(n) + annihilation(n).adjoint();
    let x2 = &x * &x;
    let id = Operator::identity(n);
    let sep_sq = kron(&x2, &id) + kron(&id, &x2) - kron(&x, &x).scale(real(2.0));
    let modulation = kron(&id, &id) - sep_sq.scale(real(3.0 * m.length_ratio * m.length_ratio));
    let qubit_id = Operator::identity(4).with_factorization(vec![2, 2]).unwrap();
    kron(&exchange_pair_operator(), &modulation).scale(real(p.j / 2.0))
        + kron(&qubit_id, &trap_pair(m.omega_over_j, n))
}

/// Holstein model: trap, internal splitting, state-dependent displacement,
/// and the bare exchange interaction at J = 1.
///
/// H = Σ_j [ω(a_j†a_j + ½) + (Δ/2)σ_z^(j) − (ζω/2)(a_j + a_j†)|e⟩⟨e|_j]
///   + (1/2)(σ_xσ_x + σ_yσ_y).
pub fn holstein_hamiltonian(m: &MotionalModel) -> Operator {
    assert!(m.n_max >= 2, "need at least two oscillator levels");
    let n = m.n_max;
    let omega = m.omega_over_j;
    let x = annihilation(n) + annihilation(n).adjoint();
    let i2 = Operator::identity(2);
    let id = Operator::identity(n);
    let sz = sigma_z();
    let pe = excited_projector();

    let qubit_id = Operator::identity(4).with_factorization(vec![2, 2]).unwrap();
    let mot_id = kron(&id, &id);
    let mut h = kron(&qubit_id, &trap_pair(omega, n));
    h = h + kron4(&sz, &i2, &id, &id).scale(real(m.delta_split / 2.0));
    h = h + kron4(&i2, &sz, &id, &id).scale(real(m.delta_split / 2.0));
    h = h + kron4(&pe, &i2, &x, &id).scale(real(-m.zeta * omega / 2.0));
    h = h + kron4(&i2, &pe, &id, &x).scale(real(-m.zeta * omega / 2.0));
    h + kron(&exchange_pair_operator(), &mot_id).scale(real(0.5))
}

/// Conditional-displacement factor of the polaron transform, acting on one
/// (qubit, oscillator) pair: |0⟩⟨0|⊗I + |e⟩⟨e|⊗exp[(ζ/2)(a − a†)].
pub fn polaron_molecule_factor(m: &MotionalModel) -> Operator {
    let n = m.n_max;
    let g = annihilation(n) - annihilation(n).adjoint();
    let d = expm_general(&g.scale(real(m.zeta / 2.0)));
    let pg = Operator::identity(2) - excited_projector();
    kron(&pg, &Operator::identity(n)) + kron(&excited_projector(), &d)
}

/// Polaron transform U = U₁U₂ on the full (q1, q2, mot1, mot2) space.
///
/// Each factor displaces molecule j's oscillator conditioned on its qubit
/// being excited; the factors commute and assemble block-diagonally over the
/// two-qubit sectors, so no large matrix product is formed.
pub fn polaron_transform(m: &MotionalModel) -> Operator {
    let n = m.n_max;
    let g = annihilation(n) - annihilation(n).adjoint();
    let d = expm_general(&g.scale(real(m.zeta / 2.0)));
    let id = Operator::identity(n);
    let pg = Operator::identity(2) - excited_projector();
    let pe = excited_projector();
    kron4(&pg, &pg, &id, &id)
        + kron4(&pg, &pe, &id, &d)
        + kron4(&pe, &pg, &d, &id)
        + kron4(&pe, &pe, &d, &d)
}

/// Holstein Hamiltonian in the polaron frame, to second order in ζ.
///
/// The displacement removes the linear coupling exactly, binding each excited
/// molecule by −ζ²ω/4, and dresses the exchange with motional ladder factors:
///
/// H̃ = Σ_j [ω(a_j†a_j + ½) + (Δ/2)σ_z^(j) − (ζ²ω/4)|e⟩⟨e|_j]
///   + (1/2)(σ_xσ_x + σ_yσ_y)[1 + (ζ²/8)Q²] + (ζ/4)(σ_xσ_y − σ_yσ_x)·iQ
///
/// with Q = (a₁ − a₁†) − (a₂ − a₂†). The neglected remainder is O(ζ³).
pub fn polaron_frame_hamiltonian(m: &MotionalModel) -> Operator {
    let n = m.n_max;
    let omega = m.omega_over_j;
    let i2 = Operator::identity(2);
    let id = Operator::identity(n);
    let sz = sigma_z();
    let pe = excited_projector();
    let g = annihilation(n) - annihilation(n).adjoint();
    let q = kron(&g, &id) - kron(&id, &g);

    let qubit_id = Operator::identity(4).with_factorization(vec![2, 2]).unwrap();
    let mut h = kron(&qubit_id, &trap_pair(omega, n));
    h = h + kron4(&sz, &i2, &id, &id).scale(real(m.delta_split / 2.0));
    h = h + kron4(&i2, &sz, &id, &id).scale(real(m.delta_split / 2.0));
    let binding = -m.zeta * m.zeta * omega / 4.0;
    h = h + kron4(&pe, &i2, &id, &id).scale(real(binding));
    h = h + kron4(&i2, &pe, &id, &id).scale(real(binding));

    let dressed = kron(&id, &id) + (&q * &q).scale(real(m.zeta * m.zeta / 8.0));
    h = h + kron(&exchange_pair_operator(), &dressed).scale(real(0.5));

    let cross = kron(&sigma_x(), &sigma_y()) - kron(&sigma_y(), &sigma_x());
    h + kron(&cross, &q.scale(I)).scale(real(m.zeta / 4.0))
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Fractional exchange shift ΔJ/J from thermal axial motion:
/// 6√2·(l/R)²·coth(ω/2k_BT).
pub fn delta_j_motion_estimate(m: &MotionalModel) -> f64 {
    assert!(m.beta_ratio > 0.0, "beta_ratio must be positive");
    6.0 * 2.0_f64.sqrt() * m.length_ratio * m.length_ratio * coth(m.beta_ratio / 2.0)
}

/// Fractional exchange shift ΔJ/J from motion-rotation coupling:
/// (√2/4)·ζ²·coth(ω/2k_BT).
pub fn delta_j_motrot_estimate(m: &MotionalModel) -> f64 {
    assert!(m.beta_ratio > 0.0, "beta_ratio must be positive");
    2.0_f64.sqrt() / 4.0 * m.zeta * m.zeta * coth(m.beta_ratio / 2.0)
}
