//! Adaptive Simpson quadrature with an interval-halving error estimate.

use crate::error::{Error, Result};

/// Default cap on the number of interval subdivisions.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Levels every interval is split through before the error test may accept it.
const MIN_DEPTH: u32 = 3;
const MAX_DEPTH: u32 = 60;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// `∫ₐᵇ f` to an estimated absolute error of `tol`.
///
/// Panels are processed from an explicit stack; each split counts against
/// `budget`. `a > b` flips the sign, `a == b` returns zero.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, budget: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return adaptive_simpson(f, b, a, tol, budget).map(|v| -v);
    }

    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let mut stack = vec![Panel { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb), tol, depth: 0 }];
    let mut total = 0.0;
    let mut compensation = 0.0;
    let mut splits = 0usize;

    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;

        if p.depth >= MIN_DEPTH && (delta.abs() <= 15.0 * p.tol || p.depth >= MAX_DEPTH) {
            // Kahan summation keeps the accumulated panels below the tolerance
            let term = left + right + delta / 15.0;
            let y = term - compensation;
            let t = total + y;
            compensation = (t - total) - y;
            total = t;
            continue;
        }

        splits += 1;
        if splits > budget {
            return Err(Error::QuadratureBudget { budget });
        }
        let tol = 0.5 * p.tol;
        let depth = p.depth + 1;
        stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, tol, depth });
        stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, tol, depth });
    }
    Ok(total)
}
