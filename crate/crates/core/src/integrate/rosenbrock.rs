//! Rosenbrock 4(3) step with Shampine's coefficients.

use crate::linalg::Lu;
use crate::scalar::{lit, Real};

use super::OdeSystem;

struct Tableau<T> {
    gam: T,
    a21: T,
    a31: T,
    a32: T,
    c21: T,
    c31: T,
    c32: T,
    c41: T,
    c42: T,
    c43: T,
    b: [T; 4],
    e: [T; 4],
    c1x: T,
    c2x: T,
    c3x: T,
    c4x: T,
    a2x: T,
    a3x: T,
}

fn tableau<T: Real>() -> Tableau<T> {
    Tableau {
        gam: lit(0.5),
        a21: lit(2.0),
        a31: lit(48.0 / 25.0),
        a32: lit(6.0 / 25.0),
        c21: lit(-8.0),
        c31: lit(372.0 / 25.0),
        c32: lit(12.0 / 5.0),
        c41: lit(-112.0 / 125.0),
        c42: lit(-54.0 / 125.0),
        c43: lit(-2.0 / 5.0),
        b: [lit(19.0 / 9.0), lit(0.5), lit(25.0 / 108.0), lit(125.0 / 108.0)],
        e: [lit(17.0 / 54.0), lit(7.0 / 36.0), T::zero(), lit(125.0 / 108.0)],
        c1x: lit(0.5),
        c2x: lit(-1.5),
        c3x: lit(121.0 / 50.0),
        c4x: lit(29.0 / 250.0),
        a2x: T::one(),
        a3x: lit(3.0 / 5.0),
    }
}

/// One step; `None` if `I/(γh) − J` is singular.
pub(super) fn step<T: Real, S: OdeSystem<T, N>, const N: usize>(
    sys: &S,
    t: T,
    y: &[T; N],
    f: &[T; N],
    h: T,
) -> Option<([T; N], [T; N])> {
    let tb = tableau::<T>();
    let jac = sys.jacobian(t, y);
    let dfdt = sys.dfdt(t, y);
    let mut a = jac;
    let diag = (tb.gam * h).recip();
    for i in 0..N {
        for j in 0..N {
            a[i][j] = -a[i][j];
        }
        a[i][i] = a[i][i] + diag;
    }
    let lu = Lu::new(a)?;
    let mut rhs = [T::zero(); N];

    for i in 0..N {
        rhs[i] = f[i] + h * tb.c1x * dfdt[i];
    }
    let g1 = lu.solve(&rhs);

    let mut yt = [T::zero(); N];
    for i in 0..N {
        yt[i] = y[i] + tb.a21 * g1[i];
    }
    let d2 = sys.rhs(t + tb.a2x * h, &yt);
    for i in 0..N {
        rhs[i] = d2[i] + h * tb.c2x * dfdt[i] + tb.c21 * g1[i] / h;
    }
    let g2 = lu.solve(&rhs);

    for i in 0..N {
        yt[i] = y[i] + tb.a31 * g1[i] + tb.a32 * g2[i];
    }
    let d3 = sys.rhs(t + tb.a3x * h, &yt);
    for i in 0..N {
        rhs[i] = d3[i] + h * tb.c3x * dfdt[i] + (tb.c31 * g1[i] + tb.c32 * g2[i]) / h;
    }
    let g3 = lu.solve(&rhs);

    for i in 0..N {
        rhs[i] = d3[i] + h * tb.c4x * dfdt[i] + (tb.c41 * g1[i] + tb.c42 * g2[i] + tb.c43 * g3[i]) / h;
    }
    let g4 = lu.solve(&rhs);

    let mut y1 = [T::zero(); N];
    let mut err = [T::zero(); N];
    for i in 0..N {
        y1[i] = y[i] + tb.b[0] * g1[i] + tb.b[1] * g2[i] + tb.b[2] * g3[i] + tb.b[3] * g4[i];
        err[i] = tb.e[0] * g1[i] + tb.e[1] * g2[i] + tb.e[2] * g3[i] + tb.e[3] * g4[i];
    }
    Some((y1, err))
}
