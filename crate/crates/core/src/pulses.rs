//! Pulse parameterizations, evaluation, conversion, and the pulse file format.
//!
//! Two bases are supported: piecewise-constant control values (the optimizer's
//! native representation) and Chebyshev polynomial coefficients for smooth
//! waveforms. Chebyshev pulses are bridged to propagation by midpoint
//! sampling onto a dense piecewise grid.
//!
//! Channel order is fixed per layout: Global and GlobalPlusDetuning use
//! (omega, phi); FullLocal uses (omega1, phi1, omega2, phi2). In the
//! Chebyshev basis, `coeffs_a` holds amplitude-channel coefficient lists and
//! `coeffs_b` phase-channel lists, in qubit order.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::numerics;
use crate::error::{Error, Result};
use crate::hamiltonians::{ControlLayout, LayoutKind};
use crate::objectives::{CostBreakdown, FrameAngles};

/// Supported pulse file format version.
pub const PULSE_FORMAT_VERSION: u32 = 1;

/// Provenance and bookkeeping attached to an optimized pulse.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseMetadata {
    /// Cost achieved at the stored parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBreakdown>,
    /// Seed of the winning restart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Solver iterations of the winning restart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Dense grid density used when sampling a smooth pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_steps: Option<usize>,
    /// Which objective produced this pulse (e.g. "gate", "bell-state-prep").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
}

/// How the control waveforms are parameterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PulseBasis {
    /// Channel-major step values: `values[channel][step]`.
    PiecewiseConstant { steps: usize, values: Vec<Vec<f64>> },
    /// Chebyshev coefficients, one list of length `order + 1` per amplitude
    /// channel in `coeffs_a` and per phase channel in `coeffs_b`.
    Chebyshev {
        order: usize,
        coeffs_a: Vec<Vec<f64>>,
        coeffs_b: Vec<Vec<f64>>,
    },
}

/// A complete control pulse: layout, duration, waveforms, and frame angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub layout: ControlLayout,
    /// Total duration in units of 1/J.
    pub duration: f64,
    pub basis: PulseBasis,
    pub frames: FrameAngles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PulseMetadata>,
}

impl Pulse {
    /// Piecewise-constant pulse; `values` is channel-major.
    pub fn piecewise(
        layout: ControlLayout,
        duration: f64,
        values: Vec<Vec<f64>>,
        frames: FrameAngles,
    ) -> Result<Self> {
        let steps = values.first().map(Vec::len).unwrap_or(0);
        let p = Pulse {
            layout,
            duration,
            basis: PulseBasis::PiecewiseConstant { steps, values },
            frames,
            metadata: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Chebyshev pulse from amplitude and phase coefficient lists.
    pub fn chebyshev(
        layout: ControlLayout,
        duration: f64,
        coeffs_a: Vec<Vec<f64>>,
        coeffs_b: Vec<Vec<f64>>,
        frames: FrameAngles,
    ) -> Result<Self> {
        let order = coeffs_a
            .first()
            .map(|c| c.len().saturating_sub(1))
            .unwrap_or(0);
        let p = Pulse {
            layout,
            duration,
            basis: PulseBasis::Chebyshev {
                order,
                coeffs_a,
                coeffs_b,
            },
            frames,
            metadata: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// The native protocol: free exchange evolution for T = π/2, no drive.
    pub fn native() -> Self {
        Pulse {
            layout: ControlLayout::global(),
            duration: std::f64::consts::FRAC_PI_2,
            basis: PulseBasis::PiecewiseConstant {
                steps: 1,
                values: vec![vec![0.0], vec![0.0]],
            },
            frames: FrameAngles::identity_shared(),
            metadata: None,
        }
    }

    /// Number of time-dependent channels for this pulse's layout.
    pub fn channels(&self) -> usize {
        self.layout.kind.channels()
    }

    /// Structural validation: channel counts, array lengths, finiteness.
    ///
    /// In-memory pulses may have duration zero (useful as a degenerate case);
    /// the file reader additionally requires duration > 0.
    pub fn validate(&self) -> Result<()> {
        if !self.duration.is_finite() {
            return Err(Error::NonFinite("duration".into()));
        }
        if self.duration < 0.0 {
            return Err(Error::Schema(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        if !self.layout.omega_max.is_finite() || !self.layout.delta.is_finite() {
            return Err(Error::NonFinite("layout parameters".into()));
        }
        if self.layout.omega_max <= 0.0 {
            return Err(Error::NotPositive {
                name: "omega_max",
                value: self.layout.omega_max,
            });
        }
        let channels = self.channels();
        match &self.basis {
            PulseBasis::PiecewiseConstant { steps, values } => {
                if *steps == 0 {
                    return Err(Error::Schema("piecewise pulse needs at least one step".into()));
                }
                if values.len() != channels {
                    return Err(Error::Schema(format!(
                        "layout {} needs {} channel arrays, got {}",
                        self.layout.kind,
                        channels,
                        values.len()
                    )));
                }
                for (c, column) in values.iter().enumerate() {
                    if column.len() != *steps {
                        return Err(Error::Schema(format!(
                            "channel {c} has {} steps, expected {steps}",
                            column.len()
                        )));
                    }
                    if column.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite(format!("channel {c} values")));
                    }
                }
            }
            PulseBasis::Chebyshev {
                order,
                coeffs_a,
                coeffs_b,
            } => {
                let amp_channels = channels / 2;
                if coeffs_a.len() != amp_channels || coeffs_b.len() != amp_channels {
                    return Err(Error::Schema(format!(
                        "layout {} needs {amp_channels} amplitude and phase coefficient lists, got {} and {}",
                        self.layout.kind,
                        coeffs_a.len(),
                        coeffs_b.len()
                    )));
                }
                for (label, lists) in [("coeffs_a", coeffs_a), ("coeffs_b", coeffs_b)] {
                    for (c, list) in lists.iter().enumerate() {
                        if list.len() != order + 1 {
                            return Err(Error::Schema(format!(
                                "{label}[{c}] has {} coefficients, expected order+1 = {}",
                                list.len(),
                                order + 1
                            )));
                        }
                        if list.iter().any(|v| !v.is_finite()) {
                            return Err(Error::NonFinite(format!("{label}[{c}]")));
                        }
                    }
                }
            }
        }
        let frames_ok = match (self.layout.kind, &self.frames) {
            (LayoutKind::FullLocal, FrameAngles::PerQubit { .. }) => true,
            (LayoutKind::Global | LayoutKind::GlobalPlusDetuning, FrameAngles::Shared(_)) => true,
            _ => false,
        };
        if !frames_ok {
            return Err(Error::Schema(format!(
                "frame angles variant does not match layout {}",
                self.layout.kind
            )));
        }
        for (q, angles) in [self.frames.angles(0), self.frames.angles(1)].iter().enumerate() {
            if angles.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite(format!("frame angles for qubit {q}")));
            }
        }
        Ok(())
    }
}

/// Evaluates Σ_n c_n T_n(x) at x = 2t/duration − 1 by Clenshaw recurrence.
pub fn chebyshev_eval(coeffs: &[f64], t: f64, duration: f64) -> Result<f64> {
    if duration <= 0.0 {
        return Err(Error::NotPositive {
            name: "duration",
            value: duration,
        });
    }
    if !(0.0..=duration).contains(&t) {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    let x = 2.0 * t / duration - 1.0;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let next = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = next;
    }
    Ok(coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2)
}

/// Channel waveforms sampled at the midpoints of a uniform step grid.
pub(crate) fn sampled_controls(p: &Pulse, steps: usize) -> Result<Vec<Vec<f64>>> {
    let channels = p.channels();
    match &p.basis {
        PulseBasis::PiecewiseConstant {
            steps: have,
            values,
        } => {
            if *have == steps {
                return Ok(values.clone());
            }
            // Midpoint lookup into the existing step function.
            let mut out = vec![vec![0.0; steps]; channels];
            for k in 0..steps {
                let frac = (k as f64 + 0.5) / steps as f64;
                let src = ((frac * *have as f64) as usize).min(*have - 1);
                for c in 0..channels {
                    out[c][k] = values[c][src];
                }
            }
            Ok(out)
        }
        PulseBasis::Chebyshev {
            coeffs_a, coeffs_b, ..
        } => {
            let mut out = vec![vec![0.0; steps]; channels];
            let dt = p.duration / steps as f64;
            for k in 0..steps {
                let t = (k as f64 + 0.5) * dt;
                for (i, (ca, cb)) in coeffs_a.iter().zip(coeffs_b).enumerate() {
                    out[2 * i][k] = chebyshev_eval(ca, t, p.duration)?;
                    out[2 * i + 1][k] = chebyshev_eval(cb, t, p.duration)?;
                }
            }
            Ok(out)
        }
    }
}

/// Converts a pulse to the piecewise-constant basis by midpoint sampling.
///
/// Piecewise input with the same step count is returned unchanged; the
/// sampling density is recorded in the result's metadata.
pub fn sample_to_piecewise(p: &Pulse, steps: usize) -> Result<Pulse> {
    if steps == 0 {
        return Err(Error::Schema("cannot sample onto zero steps".into()));
    }
    if let PulseBasis::PiecewiseConstant { steps: have, .. } = &p.basis {
        if *have == steps {
            return Ok(p.clone());
        }
    }
    let values = sampled_controls(p, steps)?;
    let mut metadata = p.metadata.clone().unwrap_or_default();
    metadata.sample_steps = Some(steps);
    Ok(Pulse {
        layout: p.layout,
        duration: p.duration,
        basis: PulseBasis::PiecewiseConstant { steps, values },
        frames: p.frames,
        metadata: Some(metadata),
    })
}

/// Rewrites negative amplitudes as positive with a π phase shift.
///
/// Works on the piecewise representation (smooth pulses are sampled at the
/// configured density first); the propagated unitary is preserved because
/// −|Ω|(cos φ σ_x + sin φ σ_y) = |Ω|(cos(φ+π) σ_x + sin(φ+π) σ_y) exactly.
pub fn canonicalize_amplitudes(p: &Pulse) -> Result<Pulse> {
    let mut pw = match &p.basis {
        PulseBasis::PiecewiseConstant { .. } => p.clone(),
        PulseBasis::Chebyshev { .. } => sample_to_piecewise(p, numerics().smooth_pulse_steps)?,
    };
    if let PulseBasis::PiecewiseConstant { steps, values } = &mut pw.basis {
        let pairs = values.len() / 2;
        for i in 0..pairs {
            for k in 0..*steps {
                if values[2 * i][k] < 0.0 {
                    values[2 * i][k] = -values[2 * i][k];
                    values[2 * i + 1][k] += std::f64::consts::PI;
                }
            }
        }
    }
    Ok(pw)
}

#[derive(Serialize, Deserialize)]
struct PulseFile {
    version: u32,
    layout: ControlLayout,
    duration: f64,
    basis: PulseBasis,
    frames: FrameAngles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<PulseMetadata>,
}

/// JSON formatter printing every float with 17 significant digits, enough to
/// reproduce any f64 bitwise on read-back.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn reduce_mod_2pi(angles: [f64; 3]) -> [f64; 3] {
    angles.map(|a| a.rem_euclid(2.0 * std::f64::consts::PI))
}

/// Writes a pulse as versioned JSON; frame angles are reduced mod 2π.
pub fn write_pulse(p: &Pulse, path: &Path) -> Result<()> {
    p.validate()?;
    let frames = match p.frames {
        FrameAngles::Shared(a) => FrameAngles::Shared(reduce_mod_2pi(a)),
        FrameAngles::PerQubit { q1, q2 } => FrameAngles::PerQubit {
            q1: reduce_mod_2pi(q1),
            q2: reduce_mod_2pi(q2),
        },
    };
    let file = PulseFile {
        version: PULSE_FORMAT_VERSION,
        layout: p.layout,
        duration: p.duration,
        basis: p.basis.clone(),
        frames,
        metadata: p.metadata.clone(),
    };
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    file.serialize(&mut ser)?;
    buf.push(b'\n');
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a versioned pulse file, rejecting schema violations, unsupported
/// versions, and non-finite fields as distinct error kinds.
pub fn read_pulse(path: &Path) -> Result<Pulse> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Schema("missing integer 'version' field".into()))?;
    if version != PULSE_FORMAT_VERSION as u64 {
        return Err(Error::Version {
            found: version as u32,
            supported: PULSE_FORMAT_VERSION,
        });
    }
    let file: PulseFile =
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    let pulse = Pulse {
        layout: file.layout,
        duration: file.duration,
        basis: file.basis,
        frames: file.frames,
        metadata: file.metadata,
    };
    if pulse.duration <= 0.0 && pulse.duration.is_finite() {
        return Err(Error::Schema(format!(
            "pulse file duration must be positive, got {}",
            pulse.duration
        )));
    }
    pulse.validate()?;
    Ok(pulse)
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders the sampled waveforms as CSV with header
/// `t,omega1,phi1[,omega2,phi2][,delta]`; times are step midpoints.
pub fn export_csv(p: &Pulse, steps: Option<usize>) -> Result<String> {
    let steps = steps.unwrap_or_else(|| match &p.basis {
        PulseBasis::PiecewiseConstant { steps, .. } => *steps,
        PulseBasis::Chebyshev { .. } => numerics().smooth_pulse_steps,
    });
    let values = sampled_controls(p, steps)?;
    let dt = p.duration / steps as f64;
    let mut out = String::new();
    match p.layout.kind {
        LayoutKind::Global => out.push_str("t,omega1,phi1\n"),
        LayoutKind::FullLocal => out.push_str("t,omega1,phi1,omega2,phi2\n"),
        LayoutKind::GlobalPlusDetuning => out.push_str("t,omega1,phi1,delta\n"),
    }
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        write!(out, "{}", fmt_float(t)).unwrap();
        for column in &values {
            write!(out, ",{}", fmt_float(column[k])).unwrap();
        }
        if p.layout.kind == LayoutKind::GlobalPlusDetuning {
            write!(out, ",{}", fmt_float(p.layout.delta)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frames_for(kind: LayoutKind) -> FrameAngles {
        match kind {
            LayoutKind::FullLocal => FrameAngles::identity_per_qubit(),
            _ => FrameAngles::identity_shared(),
        }
    }

    #[test]
    fn chebyshev_eval_t1_at_midpoint() {
        assert_abs_diff_eq!(chebyshev_eval(&[0.0, 1.0], 1.0, 2.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn chebyshev_eval_t2_at_midpoint() {
        assert_abs_diff_eq!(
            chebyshev_eval(&[0.0, 0.0, 1.0], 1.0, 2.0).unwrap(),
            -1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn chebyshev_eval_all_ones_at_right_edge() {
        assert_abs_diff_eq!(
            chebyshev_eval(&[1.0, 1.0, 1.0], 2.0, 2.0).unwrap(),
            3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn chebyshev_eval_rejects_out_of_range() {
        match chebyshev_eval(&[1.0], 2.5, 2.0) {
            Err(Error::TimeOutOfRange { .. }) => {}
            other => panic!("expected TimeOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn chebyshev_eval_matches_direct_recurrence() {
        // T_{n+1} = 2xT_n − T_{n−1} summation, the independent oracle.
        let coeffs: Vec<f64> = (0..=64).map(|n| 1.0 / (1.0 + n as f64)).collect();
        let duration = 3.0;
        for k in 0..33 {
            let t = duration * k as f64 / 32.0;
            let x = 2.0 * t / duration - 1.0;
            let mut tn_minus = 1.0;
            let mut tn = x;
            let mut direct = coeffs[0] + coeffs[1] * x;
            for c in coeffs.iter().skip(2) {
                let next = 2.0 * x * tn - tn_minus;
                direct += c * next;
                tn_minus = tn;
                tn = next;
            }
            let clenshaw = chebyshev_eval(&coeffs, t, duration).unwrap();
            assert_abs_diff_eq!(clenshaw, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_constant_coefficient() {
        let p = Pulse::chebyshev(
            ControlLayout::global(),
            2.0,
            vec![vec![0.7]],
            vec![vec![0.3]],
            FrameAngles::identity_shared(),
        )
        .unwrap();
        let pw = sample_to_piecewise(&p, 5).unwrap();
        if let PulseBasis::PiecewiseConstant { values, .. } = &pw.basis {
            assert!(values[0].iter().all(|&v| (v - 0.7).abs() < 1e-15));
            assert!(values[1].iter().all(|&v| (v - 0.3).abs() < 1e-15));
        } else {
            panic!("expected piecewise result");
        }
        assert_eq!(pw.metadata.unwrap().sample_steps, Some(5));
    }

    #[test]
    fn sample_linear_chebyshev_midpoints() {
        let scale = 2.5;
        let p = Pulse::chebyshev(
            ControlLayout::global(),
            4.0,
            vec![vec![0.0, scale]],
            vec![vec![0.0, 0.0]],
            FrameAngles::identity_shared(),
        )
        .unwrap();
        let pw = sample_to_piecewise(&p, 4).unwrap();
        if let PulseBasis::PiecewiseConstant { values, .. } = &pw.basis {
            let expect = [-0.75, -0.25, 0.25, 0.75];
            for (got, want) in values[0].iter().zip(expect) {
                assert_abs_diff_eq!(*got, want * scale, epsilon = 1e-14);
            }
        } else {
            panic!("expected piecewise result");
        }
    }

    #[test]
    fn sample_is_identity_on_matching_piecewise() {
        let p = Pulse::piecewise(
            ControlLayout::global(),
            1.0,
            vec![vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3]],
            FrameAngles::identity_shared(),
        )
        .unwrap();
        let same = sample_to_piecewise(&p, 3).unwrap();
        assert_eq!(p, same);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pulse.json");
        let p = Pulse {
            layout: ControlLayout::detuned(2.0),
            duration: 9.3,
            basis: PulseBasis::Chebyshev {
                order: 2,
                coeffs_a: vec![vec![0.1234567890123456, -7.77e-13, 3.0]],
                coeffs_b: vec![vec![1.0 / 3.0, 2.0f64.sqrt(), -0.0]],
            },
            frames: FrameAngles::Shared([0.1, 1.0e-17, 6.0]),
            metadata: Some(PulseMetadata {
                cost: Some(CostBreakdown::new(0.999999, 1e-11)),
                seed: Some(42),
                iterations: Some(137),
                sample_steps: None,
                objective: Some("gate".into()),
            }),
        };
        write_pulse(&p, &path).unwrap();
        let back = read_pulse(&path).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn read_rejects_nonpositive_duration() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut p = Pulse::native();
        write_pulse(&p, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        p.duration = 0.0;
        let zeroed = text.replace(
            &format!("{:.16e}", std::f64::consts::FRAC_PI_2),
            "0.0e0",
        );
        std::fs::write(&path, zeroed).unwrap();
        match read_pulse(&path) {
            Err(Error::Schema(_)) => {}
            other => panic!("expected Schema error, got {other:?}"),
        }
    }

    #[test]
    fn read_rejects_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v2.json");
        write_pulse(&Pulse::native(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"version\":1", "\"version\":2")).unwrap();
        match read_pulse(&path) {
            Err(Error::Version {
                found: 2,
                supported: 1,
            }) => {}
            other => panic!("expected Version error, got {other:?}"),
        }
    }

    #[test]
    fn read_rejects_malformed_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.json");
        std::fs::write(&path, "{\"version\":1,\"duration\":true}").unwrap();
        match read_pulse(&path) {
            Err(Error::Schema(_)) => {}
            other => panic!("expected Schema error, got {other:?}"),
        }
    }

    #[test]
    fn write_rejects_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.json");
        let mut p = Pulse::native();
        if let PulseBasis::PiecewiseConstant { values, .. } = &mut p.basis {
            values[0][0] = f64::NAN;
        }
        match write_pulse(&p, &path) {
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected NonFinite error, got {other:?}"),
        }
    }

    #[test]
    fn constructor_rejects_channel_mismatch() {
        match Pulse::piecewise(
            ControlLayout::full_local(),
            1.0,
            vec![vec![0.0], vec![0.0]],
            FrameAngles::identity_per_qubit(),
        ) {
            Err(Error::Schema(_)) => {}
            other => panic!("expected Schema error, got {other:?}"),
        }
    }

    #[test]
    fn constructor_rejects_mismatched_frames() {
        match Pulse::piecewise(
            ControlLayout::global(),
            1.0,
            vec![vec![0.0], vec![0.0]],
            FrameAngles::identity_per_qubit(),
        ) {
            Err(Error::Schema(_)) => {}
            other => panic!("expected Schema error, got {other:?}"),
        }
    }

    #[test]
    fn csv_headers_per_layout() {
        for (kind, header) in [
            (LayoutKind::Global, "t,omega1,phi1"),
            (LayoutKind::FullLocal, "t,omega1,phi1,omega2,phi2"),
            (LayoutKind::GlobalPlusDetuning, "t,omega1,phi1,delta"),
        ] {
            let layout = ControlLayout {
                kind,
                delta: 2.0,
                omega_max: 50.0,
            };
            let channels = kind.channels();
            let p = Pulse::piecewise(
                layout,
                1.0,
                vec![vec![0.5, -0.5]; channels],
                frames_for(kind),
            )
            .unwrap();
            let csv = export_csv(&p, None).unwrap();
            let mut lines = csv.lines();
            assert_eq!(lines.next().unwrap(), header);
            assert_eq!(lines.count(), 2);
        }
    }

    #[test]
    fn csv_detuned_column_carries_layout_delta() {
        let p = Pulse::piecewise(
            ControlLayout::detuned(2.0),
            1.0,
            vec![vec![1.0], vec![0.5]],
            FrameAngles::identity_shared(),
        )
        .unwrap();
        let csv = export_csv(&p, None).unwrap();
        let row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_abs_diff_eq!(fields[3].parse::<f64>().unwrap(), 2.0, epsilon = 0.0);
    }

    #[test]
    fn canonicalization_flips_negative_amplitudes() {
        let p = Pulse::piecewise(
            ControlLayout::global(),
            1.0,
            vec![vec![-0.8, 0.8], vec![0.4, 0.4]],
            FrameAngles::identity_shared(),
        )
        .unwrap();
        let canon = canonicalize_amplitudes(&p).unwrap();
        if let PulseBasis::PiecewiseConstant { values, .. } = &canon.basis {
            assert_abs_diff_eq!(values[0][0], 0.8, epsilon = 0.0);
            assert_abs_diff_eq!(values[1][0], 0.4 + std::f64::consts::PI, epsilon = 0.0);
            assert_abs_diff_eq!(values[0][1], 0.8, epsilon = 0.0);
            assert_abs_diff_eq!(values[1][1], 0.4, epsilon = 0.0);
        } else {
            panic!("expected piecewise result");
        }
    }
}
