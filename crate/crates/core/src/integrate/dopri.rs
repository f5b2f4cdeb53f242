//! Dormand–Prince 5(4) explicit step.

use crate::scalar::{lit, Real};

use super::OdeSystem;

pub(super) fn step<T: Real, S: OdeSystem<T, N>, const N: usize>(
    sys: &S,
    t: T,
    y: &[T; N],
    f: &[T; N],
    h: T,
) -> ([T; N], [T; N]) {
    let c: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    let a: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // 5th-order weights minus 4th-order weights
    let e: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut k = [[T::zero(); N]; 7];
    k[0] = *f;
    let mut yt = [T::zero(); N];
    for s in 0..6 {
        for i in 0..N {
            let mut acc = y[i];
            for (j, aij) in a[s].iter().enumerate() {
                acc = acc + h * lit::<T>(*aij) * k[j][i];
            }
            yt[i] = acc;
        }
        k[s + 1] = sys.rhs(t + h * lit::<T>(c[s]), &yt);
    }
    // the last stage was evaluated at the 5th-order solution itself
    let mut err = [T::zero(); N];
    for i in 0..N {
        let mut acc = T::zero();
        for (j, ej) in e.iter().enumerate() {
            acc = acc + lit::<T>(*ej) * k[j][i];
        }
        err[i] = h * acc;
    }
    (yt, err)
}
