//! Hill-type switching functions and their slopes.

use crate::scalar::{lit, Real};

/// Increasing Hill function `x^n / (x^n + K^n)`.
#[inline]
pub fn hill_plus<T: Real>(x: T, k: T, n: i32) -> T {
    let xn = x.powi(n);
    xn / (xn + k.powi(n))
}

/// Decreasing Hill function `K^n / (x^n + K^n)`.
#[inline]
pub fn hill_minus<T: Real>(x: T, k: T, n: i32) -> T {
    let kn = k.powi(n);
    kn / (x.powi(n) + kn)
}

/// d/dx of [`hill_plus`]; the slope of [`hill_minus`] is its negative.
#[inline]
pub fn hill_plus_slope<T: Real>(x: T, k: T, n: i32) -> T {
    if n == 0 {
        return T::zero();
    }
    let xn = x.powi(n);
    let kn = k.powi(n);
    let d = xn + kn;
    let xn1 = if n == 1 { T::one() } else { x.powi(n - 1) };
    lit::<T>(n as f64) * xn1 * kn / (d * d)
}

/// Slope of a Hill function at its half-value point `x = K`, i.e. `n / (4K)`.
///
/// This is the steepness score used to classify switches. For `n > 1` the
/// global maximum of the slope sits slightly left of `K`; see
/// [`hill_peak_slope`].
pub fn hill_max_slope<T: Real>(k: T, n: T) -> T {
    n / (lit::<T>(4.0) * k)
}

/// Location of the true slope maximum, `K ((n-1)/(n+1))^(1/n)` (0 for `n <= 1`).
pub fn hill_peak_location<T: Real>(k: T, n: T) -> T {
    if n <= T::one() {
        return T::zero();
    }
    k * ((n - T::one()) / (n + T::one())).powf(n.recip())
}

/// Global maximum of the slope of `x^n/(x^n+K^n)` over `x >= 0`, real `n >= 1`.
pub fn hill_peak_slope<T: Real>(k: T, n: T) -> T {
    let one = T::one();
    if n == one {
        return k.recip();
    }
    // slope(x) = n x^(n-1) K^n / (x^n + K^n)^2 evaluated at the peak
    let x = hill_peak_location(k, n);
    let xn = x.powf(n);
    let kn = k.powf(n);
    n * x.powf(n - one) * kn / ((xn + kn) * (xn + kn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_value() {
        assert_eq!(hill_plus(2.0, 2.0, 4), 0.5);
        assert_eq!(hill_minus(0.0, 0.3, 2), 1.0);
    }

    #[test]
    fn slope_matches_difference_quotient() {
        for &(x, k, n) in &[(0.1f64, 0.2, 4), (0.5, 0.3, 2), (3.0, 14.0, 4), (0.7, 1.0, 1)] {
            let h = 1e-6;
            let fd = (hill_plus(x + h, k, n) - hill_plus(x - h, k, n)) / (2.0 * h);
            assert!((hill_plus_slope(x, k, n) - fd).abs() < 1e-7 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn max_slope_is_slope_at_k() {
        for &(k, n) in &[(0.04f64, 4), (0.2, 2), (1.0, 1), (0.3, 2)] {
            let a = hill_max_slope(k, n as f64);
            assert!((a - hill_plus_slope(k, k, n)).abs() < 1e-12 * a);
        }
    }
}
