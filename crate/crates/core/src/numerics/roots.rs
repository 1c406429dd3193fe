use super::{NumericsError, Result};

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lower: f64,
    pub upper: f64,
    /// Target for `|f(root)|`.
    pub tolerance: f64,
}

impl RootBracket {
    pub fn new(lower: f64, upper: f64, tolerance: f64) -> Self {
        Self { lower, upper, tolerance }
    }
}

/// Bracketed root finder: secant steps, falling back to bisection whenever
/// the secant point leaves the bracket or the bracket fails to halve.
///
/// The bracket is never escaped, so poles of `f` outside it are harmless.
/// Returns once `|f(x)| <= tolerance` or the bracket has collapsed to
/// adjacent floating-point numbers.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: RootBracket) -> Result<f64> {
    let RootBracket { lower, upper, tolerance } = bracket;
    if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
        return Err(NumericsError::Domain(format!("invalid bracket [{lower}, {upper}]")));
    }
    let (mut a, mut b) = (lower, upper);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() {
        return Err(NumericsError::Domain("non-finite function value at bracket end".into()));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::Bracket { lower, upper });
    }

    let mut width_before = b - a;
    for iter in 0..MAX_ITER {
        // secant through the bracket ends; bisect every third step unless
        // the bracket shrank by half since the last check
        let secant = b - fb * (b - a) / (fb - fa);
        let force_bisect = iter % 3 == 2 && (b - a) > 0.5 * width_before;
        let x = if force_bisect || !(secant > a && secant < b) {
            0.5 * (a + b)
        } else {
            secant
        };
        if iter % 3 == 2 {
            width_before = b - a;
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(NumericsError::Domain(format!("non-finite function value at {x}")));
        }
        if fx.abs() <= tolerance {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
    }
    Err(NumericsError::Convergence { iterations: MAX_ITER })
}
