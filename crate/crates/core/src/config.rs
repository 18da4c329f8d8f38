//! Global numerical tolerances and grid defaults.
//!
//! All structural checks (Hermiticity, unitarity) and the default sampling
//! densities read from one process-wide configuration so that a tolerance is
//! never hard-coded twice. The defaults are suitable for dimensions up to a
//! few hundred; override with [`set_numerics`] when experimenting.

use std::sync::RwLock;

/// Process-wide numerical tolerances and grid defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Max-norm tolerance for accepting a matrix as Hermitian.
    pub hermiticity_tol: f64,
    /// Max-norm tolerance on U†U − I for accepting a matrix as unitary.
    pub unitarity_tol: f64,
    /// Dense time steps used when sampling a smooth pulse for propagation.
    pub smooth_pulse_steps: usize,
    /// Largest Hilbert-space dimension the motional simulator will build.
    pub motional_dim_cap: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            hermiticity_tol: 1e-10,
            unitarity_tol: 1e-10,
            smooth_pulse_steps: 1000,
            motional_dim_cap: 4096,
        }
    }
}

static NUMERICS: RwLock<Numerics> = RwLock::new(Numerics {
    hermiticity_tol: 1e-10,
    unitarity_tol: 1e-10,
    smooth_pulse_steps: 1000,
    motional_dim_cap: 4096,
});

/// Returns the current numerics configuration.
pub fn numerics() -> Numerics {
    *NUMERICS.read().expect("numerics lock poisoned")
}

/// Replaces the process-wide numerics configuration.
pub fn set_numerics(n: Numerics) {
    *NUMERICS.write().expect("numerics lock poisoned") = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let n = Numerics::default();
        assert_eq!(n.hermiticity_tol, 1e-10);
        assert_eq!(n.unitarity_tol, 1e-10);
        assert_eq!(n.smooth_pulse_steps, 1000);
        assert_eq!(n.motional_dim_cap, 4096);
        assert_eq!(numerics(), n);
    }
}
