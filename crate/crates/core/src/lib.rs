//! Synthesis and verification of entangling pulses on exchange-coupled qubit
//! pairs, robust to quasi-static fluctuations of the coupling strength.
//!
//! The library covers the full workflow: dense operator algebra
//! ([`operators`]), Hamiltonian builders for the bare and motion-coupled
//! systems ([`hamiltonians`]), augmented first-order propagation
//! ([`propagation`]), cost functions and robustness diagnostics
//! ([`objectives`]), pulse representations with file I/O ([`pulses`]),
//! gradient-based pulse optimization ([`optimize`]), and noise and motional
//! validation sweeps ([`noise`]).
//!
//! Throughout, the exchange strength J sets the unit system: energies are in
//! units of J and times in units of 1/J (with ħ = 1). The computational basis
//! is ordered {|00⟩, |01⟩, |10⟩, |11⟩} with σ_z|0⟩ = +|0⟩, and composite
//! spaces are ordered (qubit 1, qubit 2, oscillator 1, oscillator 2).

pub mod config;
pub mod error;
pub mod hamiltonians;
pub mod noise;
pub mod objectives;
pub mod operators;
pub mod optimize;
pub mod propagation;
pub mod pulses;

pub use config::{numerics, set_numerics, Numerics};
pub use error::{Error, Result};
pub use hamiltonians::{ControlLayout, ExchangeParams, LayoutKind, MotionalModel};
pub use noise::{MotionalSimSpec, SweepSpec};
pub use objectives::{CostBreakdown, CriteriaReport, FrameAngles};
pub use operators::{Ket, Operator};
pub use optimize::{
    ChebyshevProblem, GrapeProblem, OptimizationConfig, OptimizationResult, ParameterInit,
    ScanResult,
};
pub use propagation::{AugmentedState, TimeGrid};
pub use pulses::{Pulse, PulseBasis, PulseMetadata};
