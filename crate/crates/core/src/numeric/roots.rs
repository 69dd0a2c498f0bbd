//! Bracketing scalar root finders.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootTol {
    pub abs: f64,
    pub rel: f64,
    pub max_iter: usize,
}

impl Default for RootTol {
    fn default() -> Self {
        Self { abs: 1e-15, rel: 4.0 * f64::EPSILON, max_iter: 200 }
    }
}

impl RootTol {
    fn width(&self, x: f64) -> f64 {
        self.abs + self.rel * x.abs()
    }
}

/// Brent's method on `[lo, hi]`. The endpoints must bracket a sign change
/// (a zero at an endpoint is returned directly).
pub fn brent<F>(mut f: F, lo: f64, hi: f64, tol: RootTol) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) || fa.is_nan() || fb.is_nan() {
        return Err(Error::BracketFailure { lo, hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 0.5 * tol.width(b);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::NoConvergence { iterations: tol.max_iter })
}

/// Newton iteration safeguarded by a maintained sign-change bracket.
///
/// `fdf` returns `(f(x), f'(x))`. A Newton step is taken only if it stays
/// inside the bracket and the previous step at least halved `|f|`;
/// otherwise the bracket is bisected.
pub fn newton_bracketed<F>(mut fdf: F, lo: f64, hi: f64, guess: Option<f64>, tol: RootTol) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let f_lo = fdf(lo).0;
    let f_hi = fdf(hi).0;
    newton_bracketed_with(fdf, (lo, f_lo), (hi, f_hi), guess, tol)
}

/// As [`newton_bracketed`] with the endpoint values already known.
pub fn newton_bracketed_with<F>(mut fdf: F, lo: (f64, f64), hi: (f64, f64), guess: Option<f64>, tol: RootTol) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let ((lo, f_lo), (hi, f_hi)) = (lo, hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
    }
    // orient so that f(neg) < 0 < f(pos)
    let (mut neg, mut pos) = if f_lo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = guess.filter(|g| g.is_finite() && between(*g, lo, hi)).unwrap_or(0.5 * (lo + hi));
    let mut f_prev = f64::INFINITY;
    for _ in 0..tol.max_iter {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && between(newton, neg, pos) && fx.abs() <= 0.5 * f_prev {
            newton
        } else {
            0.5 * (neg + pos)
        };
        f_prev = fx.abs();
        if (next - x).abs() <= tol.width(next) || (pos - neg).abs() <= tol.width(next) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence { iterations: tol.max_iter })
}

fn between(x: f64, a: f64, b: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    x > lo && x < hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cube_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, RootTol::default()).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_missing_bracket() {
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, RootTol::default()).unwrap_err();
        assert!(matches!(err, Error::BracketFailure { .. }));
    }

    #[test]
    fn newton_with_bad_guess_still_converges() {
        let f = |x: f64| (x.atan(), 1.0 / (1.0 + x * x));
        let r = newton_bracketed(f, -10.0, 30.0, Some(25.0), RootTol::default()).unwrap();
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn newton_matches_brent() {
        let g = |x: f64| x.exp() - 3.0 * x;
        let a = brent(g, 0.0, 1.0, RootTol::default()).unwrap();
        let b = newton_bracketed(|x| (g(x), x.exp() - 3.0), 0.0, 1.0, None, RootTol::default()).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
