//! Dense quasi-Newton minimizer with a strong-Wolfe line search.
//!
//! Maintains the inverse Hessian approximation explicitly (parameter counts
//! here stay in the low thousands) with the standard rank-two update, scaled
//! initialization after the first accepted step, and cubic-interpolation
//! zooming. Trial points with non-finite objective values are treated as
//! overshoots and the step is shrunk back toward the last good point.

use nalgebra::{DMatrix, DVector};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const ALPHA_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when the gradient two-norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the objective value falls to or below this.
    pub cost_tolerance: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    /// Accepted quasi-Newton steps (excludes the initial evaluation).
    pub iterations: usize,
    pub reached_cost_tolerance: bool,
    pub small_gradient: bool,
    pub line_search_failed: bool,
}

struct Probe {
    alpha: f64,
    f: f64,
    dphi: f64,
    x: DVector<f64>,
    g: DVector<f64>,
}

fn probe_at(
    eval: &mut impl FnMut(&[f64], &mut [f64]) -> f64,
    x: &DVector<f64>,
    p: &DVector<f64>,
    alpha: f64,
    buf: &mut Vec<f64>,
) -> Probe {
    let xt = x + p * alpha;
    let f = eval(xt.as_slice(), buf);
    let g = DVector::from_column_slice(buf);
    Probe {
        alpha,
        f,
        dphi: g.dot(p),
        x: xt,
        g,
    }
}

/// Minimizes `eval` (which returns the value and fills the gradient) from
/// `x0`. `on_accept` fires at the initial point and after every accepted
/// step, always immediately after `eval` ran at that same point.
pub(crate) fn minimize(
    mut eval: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: &[f64],
    opts: &BfgsOptions,
    mut on_accept: impl FnMut(&[f64], f64),
) -> BfgsOutcome {
    let n = x0.len();
    let mut gbuf = vec![0.0; n];
    let mut x = DVector::from_column_slice(x0);
    let f0 = eval(x.as_slice(), &mut gbuf);
    let mut g = DVector::from_column_slice(&gbuf);
    let mut f = f0;
    on_accept(x.as_slice(), f);

    let mut h: Option<DMatrix<f64>> = None;
    let mut outcome = BfgsOutcome {
        x: x.as_slice().to_vec(),
        cost: f,
        iterations: 0,
        reached_cost_tolerance: f <= opts.cost_tolerance,
        small_gradient: false,
        line_search_failed: false,
    };
    if outcome.reached_cost_tolerance {
        return outcome;
    }

    for iter in 1..=opts.max_iterations {
        if g.norm() <= opts.gradient_tolerance {
            outcome.small_gradient = true;
            break;
        }
        let p = match &h {
            Some(h) => -(h * &g),
            None => -g.clone(),
        };
        let alpha_init = if h.is_none() { 1.0 / g.norm().max(1.0) } else { 1.0 };
        let accepted = wolfe_search(
            |pr: &DVector<f64>, alpha: f64, buf: &mut Vec<f64>| {
                probe_at(&mut eval, &x, pr, alpha, buf)
            },
            &p,
            f,
            &g,
            alpha_init,
            &mut gbuf,
        );
        let probe = match accepted {
            Some(pr) => pr,
            None => {
                outcome.line_search_failed = true;
                break;
            }
        };

        let s = &probe.x - &x;
        let y = &probe.g - &g;
        let sy = s.dot(&y);
        if h.is_none() {
            let yy = y.dot(&y);
            let gamma = if sy > 0.0 && yy > 0.0 && (sy / yy).is_finite() {
                sy / yy
            } else {
                1.0
            };
            h = Some(DMatrix::identity(n, n) * gamma);
        }
        if sy > 1e-12 * s.norm() * y.norm() {
            let hm = h.as_mut().unwrap();
            let rho = 1.0 / sy;
            let hy = &*hm * &y;
            let yhy = y.dot(&hy);
            hm.ger(-rho, &s, &hy, 1.0);
            hm.ger(-rho, &hy, &s, 1.0);
            hm.ger(rho * rho * yhy + rho, &s, &s, 1.0);
        }

        x = probe.x;
        f = probe.f;
        g = probe.g;
        outcome.iterations = iter;
        on_accept(x.as_slice(), f);
        if f <= opts.cost_tolerance {
            outcome.reached_cost_tolerance = true;
            break;
        }
    }

    outcome.x = x.as_slice().to_vec();
    outcome.cost = f;
    outcome
}

/// Strong-Wolfe line search: bracketing phase with step doubling, then
/// cubic-interpolation zoom. Returns the accepted probe, whose fields were
/// produced by the final objective evaluation.
fn wolfe_search(
    mut probe: impl FnMut(&DVector<f64>, f64, &mut Vec<f64>) -> Probe,
    p: &DVector<f64>,
    phi0: f64,
    g0: &DVector<f64>,
    alpha_init: f64,
    gbuf: &mut Vec<f64>,
) -> Option<Probe> {
    let dphi0 = g0.dot(p);
    if !(dphi0 < 0.0) {
        return None;
    }
    let armijo = |alpha: f64, f: f64| f <= phi0 + C1 * alpha * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -C2 * dphi0;

    // Bracket endpoints as (alpha, f, dphi); the starting point alpha = 0
    // serves as an endpoint until a trial replaces it.
    let mut bracket: Option<((f64, f64, f64), (f64, f64, f64))> = None;
    let mut lo_probe: Option<Probe> = None;
    let mut prev_alpha = 0.0;
    let mut prev_f = phi0;
    let mut prev: Option<Probe> = None;
    let mut alpha = alpha_init.min(ALPHA_MAX);

    for _ in 0..60 {
        let trial = probe(p, alpha, gbuf);
        if !trial.f.is_finite() || !trial.dphi.is_finite() {
            // Overshot into a non-finite region; pull back toward the last
            // good point.
            let next = 0.5 * (prev_alpha + alpha);
            if next <= prev_alpha || (alpha - prev_alpha) < 1e-18 * alpha.max(1.0) {
                return None;
            }
            alpha = next;
            continue;
        }
        if !armijo(alpha, trial.f) || (prev.is_some() && trial.f >= prev_f) {
            // Minimum lies between the previous point and here.
            let lo = match prev {
                Some(pr) => {
                    let end = (pr.alpha, pr.f, pr.dphi);
                    lo_probe = Some(pr);
                    end
                }
                None => (0.0, phi0, dphi0),
            };
            bracket = Some((lo, (trial.alpha, trial.f, trial.dphi)));
            break;
        }
        if curvature(trial.dphi) {
            return Some(trial);
        }
        if trial.dphi >= 0.0 {
            // Walked past the minimum; the previous point (or the start)
            // closes the bracket from the far side.
            let hi = match &prev {
                Some(pr) => (pr.alpha, pr.f, pr.dphi),
                None => (0.0, phi0, dphi0),
            };
            bracket = Some(((trial.alpha, trial.f, trial.dphi), hi));
            lo_probe = Some(trial);
            break;
        }
        if alpha >= ALPHA_MAX {
            return None;
        }
        prev_alpha = trial.alpha;
        prev_f = trial.f;
        prev = Some(trial);
        alpha = (alpha * 2.0).min(ALPHA_MAX);
    }

    // Zoom between lo (satisfies Armijo) and hi.
    let Some(((mut lo_a, mut lo_f, mut lo_d), (mut hi_a, mut hi_f, mut hi_d))) = bracket else {
        return None;
    };

    for _ in 0..40 {
        let span = hi_a - lo_a;
        if span.abs() < 1e-16 * lo_a.abs().max(1.0) {
            break;
        }
        let inset = 0.1 * span.abs();
        let aj = cubic_minimizer(lo_a, lo_f, lo_d, hi_a, hi_f, hi_d)
            .filter(|a| {
                let (low, high) = if span > 0.0 { (lo_a, hi_a) } else { (hi_a, lo_a) };
                *a > low + inset && *a < high - inset
            })
            .unwrap_or(lo_a + 0.5 * span);
        let trial = probe(p, aj, gbuf);
        if !trial.f.is_finite() || !trial.dphi.is_finite() {
            hi_a = aj;
            hi_f = f64::INFINITY;
            hi_d = f64::NAN;
            continue;
        }
        if !armijo(aj, trial.f) || trial.f >= lo_f {
            hi_a = trial.alpha;
            hi_f = trial.f;
            hi_d = trial.dphi;
        } else {
            if curvature(trial.dphi) {
                return Some(trial);
            }
            if trial.dphi * (hi_a - lo_a) >= 0.0 {
                hi_a = lo_a;
                hi_f = lo_f;
                hi_d = lo_d;
            }
            lo_a = trial.alpha;
            lo_f = trial.f;
            lo_d = trial.dphi;
            lo_probe = Some(trial);
        }
    }

    // Zoom exhausted: fall back to the best sufficient-decrease point,
    // re-probing so the final evaluation happened at the returned point.
    match lo_probe {
        Some(pr) if pr.alpha > 0.0 && armijo(pr.alpha, pr.f) => {
            let again = probe(p, pr.alpha, gbuf);
            if again.f.is_finite() {
                Some(again)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Minimizer of the cubic interpolant through two points with derivatives.
fn cubic_minimizer(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    if !(fa.is_finite() && fb.is_finite() && da.is_finite() && db.is_finite()) {
        return None;
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let cand = b - (b - a) * (db + d2 - d1) / denom;
    cand.is_finite().then_some(cand)
}
