//! Scalar root finding and bracket scanning.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, xtol: T) -> Result<T> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::NotBracketed { a: to_f64(a), b: to_f64(b) });
    }
    let two = lit::<T>(2.0);
    let eps = T::epsilon();
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > T::zero()) == (fc > T::zero()) {
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
        let tol = two * eps * b.abs() + xtol / two;
        let m = (c - b) / two;
        if m.abs() <= tol || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (lit::<T>(3.0) * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol { b + d } else if m > T::zero() { b + tol } else { b - tol };
        fb = f(b);
    }
    Ok(b)
}

/// Sign-change brackets of `f` between consecutive grid points.
pub fn scan_brackets<T: Real, F: FnMut(T) -> T>(mut f: F, grid: &[T]) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let mut prev: Option<(T, T)> = None;
    for &x in grid {
        let y = f(x);
        if !y.is_finite() {
            prev = None;
            continue;
        }
        if let Some((xp, yp)) = prev {
            if (yp < T::zero() && y >= T::zero()) || (yp > T::zero() && y <= T::zero()) {
                out.push((xp, x));
            }
        }
        prev = Some((x, y));
    }
    out
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn logspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * lit::<T>(i as f64) / lit((n - 1) as f64)).exp()).collect()
}

pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    (0..n).map(|i| lo + (hi - lo) * lit::<T>(i as f64) / lit((n - 1) as f64)).collect()
}

/// All roots of `f` on the grid, each refined by Brent to `xtol`.
pub fn all_roots<T: Real, F: FnMut(T) -> T>(mut f: F, grid: &[T], xtol: T) -> Vec<T> {
    scan_brackets(&mut f, grid)
        .into_iter()
        .filter_map(|(a, b)| brent(&mut f, a, b, xtol).ok())
        .collect()
}

/// Newton's method for `N` equations with a forward-difference Jacobian.
pub fn newton_fd<T: Real, const N: usize, F: FnMut(&[T; N]) -> Option<[T; N]>>(
    mut f: F,
    x0: [T; N],
    tol: T,
    max_iter: usize,
) -> Result<[T; N]> {
    let mut x = x0;
    for _ in 0..max_iter {
        let fx = f(&x).ok_or_else(|| Error::NewtonFailure("residual undefined".into()))?;
        let norm = fx.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if norm <= tol {
            return Ok(x);
        }
        let mut jac = [[T::zero(); N]; N];
        for j in 0..N {
            let h = lit::<T>(1e-7) * x[j].abs().max(lit(1e-3));
            let mut xp = x;
            xp[j] = xp[j] + h;
            let fp = f(&xp).ok_or_else(|| Error::NewtonFailure("residual undefined".into()))?;
            for i in 0..N {
                jac[i][j] = (fp[i] - fx[i]) / h;
            }
        }
        let dx = crate::linalg::solve(jac, &fx).ok_or_else(|| Error::NewtonFailure("singular Jacobian".into()))?;
        for i in 0..N {
            x[i] = x[i] - dx[i];
        }
    }
    let fx = f(&x).ok_or_else(|| Error::NewtonFailure("residual undefined".into()))?;
    if fx.iter().all(|v| v.abs() <= tol) {
        Ok(x)
    } else {
        Err(Error::NewtonFailure(format!("no convergence in {max_iter} iterations")))
    }
}
