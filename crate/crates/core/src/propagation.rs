//! Time-ordered evolution of states and their first-order noise corrections.
//!
//! Controls are piecewise constant on a uniform grid (smooth pulses are
//! sampled onto one first). Each step applies the exact exponential of the
//! block generator
//!
//! ```text
//!   [ −iH⁽⁰⁾      0    ]            [ E  0 ]
//!   [ −iH⁽¹⁾   −iH⁽⁰⁾  ] · dt  →    [ D  E ]
//! ```
//!
//! so the first-order component accumulates D·ψ⁽⁰⁾ + E·ψ⁽¹⁾ with no
//! quadrature error beyond the eigendecomposition itself. E and D come from
//! one Hermitian eigendecomposition of H⁽⁰⁾ per step: E = V f(Λ) V† and
//! D = V (W ∘ F₁) V† with f(λ) = e^{−iλ·dt}, W = V†H⁽¹⁾V, and F₁ the matrix
//! of first divided differences of f over the eigenvalues.

use nalgebra::{DMatrix, DVector};

use crate::config::numerics;
use crate::error::{Error, Result};
use crate::hamiltonians::{control_hamiltonian, exchange_hamiltonian, ControlLayout, ExchangeParams};
use crate::operators::{hermitian_eigen, Ket, Operator, C64};
use crate::pulses::{sampled_controls, Pulse, PulseBasis};

/// Uniform time discretization of a pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    total_time: f64,
    steps: usize,
}

impl TimeGrid {
    /// Builds a grid, requiring positive total time and at least one step.
    pub fn new(total_time: f64, steps: usize) -> Result<Self> {
        if !(total_time > 0.0) {
            return Err(Error::NotPositive {
                name: "total_time",
                value: total_time,
            });
        }
        if steps == 0 {
            return Err(Error::Schema("time grid needs at least one step".into()));
        }
        Ok(TimeGrid { total_time, steps })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }
}

/// A zeroth-order state paired with its first-order noise correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub zeroth: Ket,
    pub first: Ket,
}

/// Divided differences of the step phase function f(λ) = e^{−iλ·dt}.
///
/// These are the eigenbasis kernels of the step propagator's first and
/// second directional derivatives; both use cancellation-free forms near
/// coincident eigenvalues.
pub(crate) mod dd {
    use crate::operators::{C64, ZERO};

    /// f(λ) = e^{−iλ·dt}.
    pub(crate) fn phase(lambda: f64, dt: f64) -> C64 {
        C64::from_polar(1.0, -lambda * dt)
    }

    fn sinc(x: f64) -> f64 {
        if x.abs() < 1e-4 {
            1.0 - x * x / 6.0
        } else {
            x.sin() / x
        }
    }

    /// First divided difference f[a,b] = (f(a)−f(b))/(a−b), evaluated as
    /// −i·dt·e^{−i(a+b)dt/2}·sinc((a−b)dt/2) which is exact at a = b.
    pub(crate) fn first(a: f64, b: f64, dt: f64) -> C64 {
        let half = (a - b) * dt / 2.0;
        C64::new(0.0, -dt) * C64::from_polar(1.0, -(a + b) * dt / 2.0) * sinc(half)
    }

    /// Second divided difference f[a,b,c], symmetric in its arguments.
    ///
    /// Well-separated eigenvalues use the recursive quotient on sorted
    /// arguments; clustered ones switch to a Taylor series around the
    /// centroid, where the quotient would cancel catastrophically.
    pub(crate) fn second(a: f64, b: f64, c: f64, dt: f64) -> C64 {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let [x, y, z] = v;
        if (z - x) * dt.abs() >= 1e-3 {
            second_quotient(x, y, z, dt)
        } else {
            second_series(x, y, z, dt)
        }
    }

    /// Quotient form f[x,y,z] = (f[x,y] − f[y,z])/(x − z); accurate when
    /// the outer pair is well separated on the dt scale.
    pub(crate) fn second_quotient(x: f64, y: f64, z: f64, dt: f64) -> C64 {
        (first(x, y, dt) - first(y, z, dt)) / C64::new(x - z, 0.0)
    }

    /// Series form around the centroid μ: with shifted arguments the k-th
    /// Taylor term of f contributes (−i·dt)^k/k! · h_{k−2}, where h_m is the
    /// complete homogeneous symmetric polynomial of degree m.
    pub(crate) fn second_series(a: f64, b: f64, c: f64, dt: f64) -> C64 {
        let mu = (a + b + c) / 3.0;
        let (x, y, z) = (a - mu, b - mu, c - mu);
        let it = C64::new(0.0, -dt);
        let mut coef = it * it / 2.0;
        let mut sum = ZERO;
        let mut small_run = 0;
        let mut k = 2usize;
        loop {
            let term = coef * h_complete(k - 2, x, y, z);
            sum += term;
            // Centering zeroes the k = 3 term identically, so a single
            // negligible term is not yet convergence; two in a row are.
            if term.norm() < 1e-18 * (1.0 + sum.norm()) {
                small_run += 1;
                if small_run == 2 {
                    break;
                }
            } else {
                small_run = 0;
            }
            if k > 60 {
                break;
            }
            k += 1;
            coef *= it / k as f64;
        }
        C64::from_polar(1.0, -mu * dt) * sum
    }

    /// h_m(x,y,z) = Σ_{i+j+k=m} xⁱ yʲ zᵏ.
    fn h_complete(m: usize, x: f64, y: f64, z: f64) -> f64 {
        let mut total = 0.0;
        let mut xi = 1.0;
        for i in 0..=m {
            let mut yj = 1.0;
            for j in 0..=(m - i) {
                total += xi * yj * z.powi((m - i - j) as i32);
                yj *= y;
            }
            xi *= x;
        }
        total
    }
}

/// Per-step control values (step-major) and the step length of a pulse.
///
/// Piecewise pulses use their own grid; smooth pulses are sampled at the
/// configured density.
pub(crate) fn step_controls(p: &Pulse) -> Result<(Vec<Vec<f64>>, f64)> {
    p.validate()?;
    let steps = match &p.basis {
        PulseBasis::PiecewiseConstant { steps, .. } => *steps,
        PulseBasis::Chebyshev { .. } => numerics().smooth_pulse_steps,
    };
    let channel_major = sampled_controls(p, steps)?;
    let channels = p.channels();
    let mut step_major = vec![vec![0.0; channels]; steps];
    for (c, column) in channel_major.iter().enumerate() {
        for (k, &v) in column.iter().enumerate() {
            step_major[k][c] = v;
        }
    }
    Ok((step_major, p.duration / steps as f64))
}

/// Total Hamiltonian for one step: J_eff·(exchange at unit J) + drive.
pub fn step_hamiltonian(
    layout: &ControlLayout,
    controls: &[f64],
    j_effective: f64,
) -> Result<Operator> {
    Ok(exchange_hamiltonian(&ExchangeParams { j: j_effective })
        + control_hamiltonian(layout, controls)?)
}

/// Diagonal and lower-left blocks (E, D) of the step exponential.
pub(crate) fn step_blocks(h0: &Operator, h1: &Operator, dt: f64) -> (DMatrix<C64>, DMatrix<C64>) {
    let dim = h0.dim();
    let (vals, vecs) = hermitian_eigen(h0.matrix());
    let mut e_inner = vecs.clone();
    for (k, &lam) in vals.iter().enumerate() {
        let phase = dd::phase(lam, dt);
        for i in 0..dim {
            e_inner[(i, k)] *= phase;
        }
    }
    let e = &e_inner * vecs.adjoint();
    let w = vecs.adjoint() * h1.matrix() * &vecs;
    let mut d_inner = DMatrix::<C64>::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            d_inner[(a, b)] = w[(a, b)] * dd::first(vals[a], vals[b], dt);
        }
    }
    let d = &vecs * d_inner * vecs.adjoint();
    (e, d)
}

/// Zeroth-order propagator of the whole pulse at an effective coupling.
pub fn evolve_unitary(pulse: &Pulse, j_effective: f64) -> Result<Operator> {
    let (controls, dt) = step_controls(pulse)?;
    let dim = 4;
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for step in &controls {
        let h0 = step_hamiltonian(&pulse.layout, step, j_effective)?;
        let (vals, vecs) = hermitian_eigen(h0.matrix());
        let mut e_inner = vecs.clone();
        for (k, &lam) in vals.iter().enumerate() {
            let phase = dd::phase(lam, dt);
            for i in 0..dim {
                e_inner[(i, k)] *= phase;
            }
        }
        u = e_inner * vecs.adjoint() * u;
    }
    Operator::from_matrix(u)
}

fn ket_from_column(v: DVector<C64>) -> Ket {
    Ket::from_vec(v.as_slice().to_vec())
}

/// Propagates one initial state with the default exchange noise operator.
pub fn propagate_augmented(pulse: &Pulse, initial: &Ket) -> Result<AugmentedState> {
    propagate_augmented_with(
        pulse,
        initial,
        &crate::hamiltonians::first_order_hamiltonian(),
        1.0,
    )
}

/// Propagates one initial state with a caller-supplied noise operator and
/// effective coupling.
pub fn propagate_augmented_with(
    pulse: &Pulse,
    initial: &Ket,
    h1: &Operator,
    j_effective: f64,
) -> Result<AugmentedState> {
    if initial.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: initial.dim(),
        });
    }
    if h1.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: h1.dim(),
        });
    }
    let (controls, dt) = step_controls(pulse)?;
    let mut zeroth = initial.vector().clone();
    let mut first = DVector::<C64>::zeros(4);
    for step in &controls {
        let h0 = step_hamiltonian(&pulse.layout, step, j_effective)?;
        let (e, d) = step_blocks(&h0, h1, dt);
        first = &d * &zeroth + &e * &first;
        zeroth = &e * &zeroth;
    }
    Ok(AugmentedState {
        zeroth: ket_from_column(zeroth),
        first: ket_from_column(first),
    })
}

/// Orthonormal computational basis kets of the given dimension.
pub fn computational_basis(dim: usize) -> Vec<Ket> {
    (0..dim).map(|q| Ket::basis(dim, q)).collect()
}

/// Augmented final states for a list of initial kets under exchange noise.
///
/// One pass builds the zeroth-order propagator U and its first-order
/// companion U⁽¹⁾ by the same step recursion, then applies both to every
/// initial ket; this is exactly the per-state propagation, shared.
pub fn first_order_states(pulse: &Pulse, basis: &[Ket]) -> Result<Vec<AugmentedState>> {
    let h1 = crate::hamiltonians::first_order_hamiltonian();
    for b in basis {
        if b.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: b.dim(),
            });
        }
    }
    let (controls, dt) = step_controls(pulse)?;
    let mut u = DMatrix::<C64>::identity(4, 4);
    let mut u1 = DMatrix::<C64>::zeros(4, 4);
    for step in &controls {
        let h0 = step_hamiltonian(&pulse.layout, step, 1.0)?;
        let (e, d) = step_blocks(&h0, &h1, dt);
        u1 = &d * &u + &e * &u1;
        u = &e * &u;
    }
    Ok(basis
        .iter()
        .map(|b| AugmentedState {
            zeroth: ket_from_column(&u * b.vector()),
            first: ket_from_column(&u1 * b.vector()),
        })
        .collect())
}
