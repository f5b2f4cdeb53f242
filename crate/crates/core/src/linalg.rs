//! Small dense linear algebra on fixed-size arrays.

use num_complex::Complex;

use crate::scalar::{lit, Real};

/// LU factorization with partial pivoting of an `N×N` matrix.
#[derive(Clone, Debug)]
pub struct Lu<T, const N: usize> {
    lu: [[T; N]; N],
    piv: [usize; N],
}

impl<T: Real, const N: usize> Lu<T, N> {
    /// Returns `None` for a (numerically) singular matrix.
    pub fn new(mut a: [[T; N]; N]) -> Option<Self> {
        let mut piv = [0usize; N];
        for (i, p) in piv.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let mut best = k;
            for i in k + 1..N {
                if a[i][k].abs() > a[best][k].abs() {
                    best = i;
                }
            }
            if !(a[best][k].abs() > T::zero()) || !a[best][k].is_finite() {
                return None;
            }
            a.swap(k, best);
            piv.swap(k, best);
            for i in k + 1..N {
                let m = a[i][k] / a[k][k];
                a[i][k] = m;
                for j in k + 1..N {
                    a[i][j] = a[i][j] - m * a[k][j];
                }
            }
        }
        Some(Self { lu: a, piv })
    }

    pub fn solve(&self, b: &[T; N]) -> [T; N] {
        let mut x = [T::zero(); N];
        for i in 0..N {
            x[i] = b[self.piv[i]];
        }
        for i in 0..N {
            for j in 0..i {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
        }
        for i in (0..N).rev() {
            for j in i + 1..N {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
            x[i] = x[i] / self.lu[i][i];
        }
        x
    }
}

pub fn solve<T: Real, const N: usize>(a: [[T; N]; N], b: &[T; N]) -> Option<[T; N]> {
    Lu::new(a).map(|lu| lu.solve(b))
}

pub fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Eigenvalues of a 2×2 matrix given its trace and determinant.
pub fn eig2<T: Real>(trace: T, det: T) -> [Complex<T>; 2] {
    let half = lit::<T>(0.5);
    let disc = trace * trace - lit::<T>(4.0) * det;
    if disc >= T::zero() {
        // avoid cancellation in the smaller root
        let s = disc.sqrt();
        let big = if trace >= T::zero() { half * (trace + s) } else { half * (trace - s) };
        let small = if big != T::zero() { det / big } else { T::zero() };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex::new(hi, T::zero()), Complex::new(lo, T::zero())]
    } else {
        let im = half * (-disc).sqrt();
        [Complex::new(half * trace, im), Complex::new(half * trace, -im)]
    }
}

/// Eigenvalues of a 3×3 matrix from its characteristic cubic.
///
/// The largest real root is computed first (trigonometric / Cardano form,
/// Newton-polished) and the remaining pair from the deflated quadratic, which
/// keeps small eigenvalues accurate when the spectrum spans many decades.
/// Sorted by decreasing real part.
pub fn eig3<T: Real>(m: &[[T; 3]; 3]) -> [Complex<T>; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = det3(m);
    let mut roots = cubic_roots(-tr, m2, -det);
    roots.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal));
    roots
}

/// Roots of `x³ + a x² + b x + c`.
pub fn cubic_roots<T: Real>(a: T, b: T, c: T) -> [Complex<T>; 3] {
    let r1 = largest_real_root(a, b, c);
    // x³ + a x² + b x + c = (x − r1)(x² + s x + q)
    let s = a + r1;
    let q = if r1.abs() > T::zero() { -c / r1 } else { b + s * r1 };
    let [z2, z3] = eig2(-s, q);
    [Complex::new(r1, T::zero()), z2, z3]
}

fn largest_real_root<T: Real>(a: T, b: T, c: T) -> T {
    let three = lit::<T>(3.0);
    let p = b - a * a / three;
    let q = lit::<T>(2.0) * a * a * a / lit(27.0) - a * b / three + c;
    let disc = (q / lit(2.0)).powi(2) + (p / three).powi(3);
    let shift = a / three;
    let mut x = if disc > T::zero() {
        let sd = disc.sqrt();
        (-q / lit(2.0) + sd).cbrt() + (-q / lit(2.0) - sd).cbrt() - shift
    } else if p == T::zero() {
        -shift
    } else {
        let r = (-p / three).sqrt();
        let arg = (lit::<T>(3.0) * q / (lit::<T>(2.0) * p * r)).max(-T::one()).min(T::one());
        let theta = arg.acos() / three;
        // the three real roots; pick the one of largest magnitude
        let two_pi_3 = lit::<T>(2.0) * T::PI() / three;
        let cands = [0, 1, 2].map(|k| lit::<T>(2.0) * r * (theta - two_pi_3 * lit(k as f64)).cos() - shift);
        cands.into_iter().fold(cands[0], |acc, v| if v.abs() > acc.abs() { v } else { acc })
    };
    for _ in 0..4 {
        let f = ((x + a) * x + b) * x + c;
        let df = (three * x + lit::<T>(2.0) * a) * x + b;
        if df == T::zero() {
            break;
        }
        let dx = f / df;
        if !dx.is_finite() {
            break;
        }
        x = x - dx;
    }
    x
}
