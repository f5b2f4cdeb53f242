//! Independent recomputations of derived quantities: finite differences,
//! a general-purpose eigen-solver and closed forms worked out by hand.

use approx::assert_relative_eq;
use calcium_gspt::integrate::fd_jacobian;
use calcium_gspt::linalg::eig3;
use calcium_gspt::model::{jacobian_full, rhs_dimensionless, rhs_r1, Formulation, LeadingOrder};
use calcium_gspt::r1::{layer_jacobian, layer_jacobian_s1, psi, psi_slope, reduced_g, reduced_g_slope, s1_state};
use calcium_gspt::r2::{fold_curve, R2Model};
use calcium_gspt::hill::hill_max_slope;
use calcium_gspt::scaling::scale_factors;
use calcium_gspt::state::State;
use calcium_gspt::DimensionlessParameterSet;
use nalgebra::Matrix3;

fn table2() -> DimensionlessParameterSet {
    DimensionlessParameterSet::table2()
}

fn nu_tilde(d: &DimensionlessParameterSet) -> f64 {
    d.scaled.v_s / d.scaled.k_tau.powi(2)
}

#[test]
fn full_jacobian_matches_finite_differences() {
    let d = table2();
    for &(c, ct, h) in &[(0.05, 0.4, 0.8), (0.2, 0.6, 0.3), (0.4, 0.9, 0.05)] {
        let s = State::new(c, ct, h);
        let j = jacobian_full(&s, &d, Formulation::Dimensionless);
        let fd = fd_jacobian(|y: &[f64; 3]| rhs_dimensionless(&State::from_array(*y), &d).to_array(), &s.to_array());
        for i in 0..3 {
            for k in 0..3 {
                assert_relative_eq!(j[i][k], fd[i][k], epsilon = 1e-9, max_relative = 1e-5);
            }
        }
    }
}

#[test]
fn r1_jacobian_matches_finite_differences() {
    let d = table2();
    let (eps, nu) = (d.scaled.k_tau.powi(4), d.scaled.v_s);
    let s = State::new(0.15, 0.5, 0.2);
    let j = jacobian_full(&s, &d, Formulation::R1 { epsilon: eps, nu });
    let fd = fd_jacobian(|y: &[f64; 3]| rhs_r1(&State::from_array(*y), &d, eps, nu).to_array(), &s.to_array());
    for i in 0..3 {
        for k in 0..3 {
            assert_relative_eq!(j[i][k], fd[i][k], epsilon = 1e-12, max_relative = 1e-5);
        }
    }
}

#[test]
fn eigenvalues_agree_with_nalgebra() {
    let d = table2();
    for &(c, ct, h) in &[(0.05, 0.4, 0.8), (0.15, 0.34, 0.2), (0.3, 0.9, 0.5)] {
        let j = jacobian_full(&State::new(c, ct, h), &d, Formulation::Dimensionless);
        let ours = eig3(&j);
        let m = Matrix3::from_fn(|i, k| j[i][k]);
        let theirs = m.complex_eigenvalues();
        let scale = theirs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for z in theirs.iter() {
            let best = ours.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8 * scale, "eigenvalue {z} unmatched: {ours:?}");
        }
    }
}

#[test]
fn layer_eigenvalues_agree_with_nalgebra() {
    let d = table2();
    let nu = d.scaled.v_s;
    for c in [0.05, 0.1, 0.157, 0.3] {
        let lj = layer_jacobian_s1(c, &d, nu).unwrap();
        let m = nalgebra::Matrix2::from_fn(|i, k| lj.matrix[i][k]);
        let ev = m.complex_eigenvalues();
        let mut want: Vec<(f64, f64)> = ev.iter().map(|z| (z.re, z.im)).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut got = vec![lj.lambda_plus, lj.lambda_minus];
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = want.iter().map(|z| z.0.hypot(z.1)).fold(1e-300, f64::max);
        for (g, w) in got.iter().zip(&want) {
            assert!((g.0 - w.0).abs() <= 1e-9 * scale && (g.1.abs() - w.1.abs()).abs() <= 1e-9 * scale, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn layer_jacobian_matches_difference_of_layer_field() {
    let d = table2();
    let nu = d.scaled.v_s;
    let s = State::new(0.12, 0.36, 0.25);
    let lj = layer_jacobian(&s, &d, nu);
    // layer field: the R1 system with ϵ = 0, restricted to (c, h)
    let f = |y: &[f64; 2]| {
        let r = rhs_r1(&State::new(y[0], s.c_t, y[1]), &d, 0.0, nu);
        [r.c, r.h]
    };
    let fd = fd_jacobian(f, &[s.c, s.h]);
    for i in 0..2 {
        for k in 0..2 {
            assert_relative_eq!(lj.matrix[i][k], fd[i][k], epsilon = 1e-12, max_relative = 1e-5);
        }
    }
}

#[test]
fn s1_is_the_zero_set_of_the_layer_field() {
    let d = table2();
    let nu = d.scaled.v_s;
    for c in [0.02, 0.08, 0.2, 0.6] {
        let s = s1_state(c, &d, nu).unwrap();
        let r = rhs_r1(&s, &d, 0.0, nu);
        assert!(r.c.abs() < 1e-14 && r.h.abs() < 1e-14, "{r:?}");
    }
}

#[test]
fn psi_slope_and_reduced_slope_by_differences() {
    let d = table2();
    let nu = d.scaled.v_s;
    for c in [0.05, 0.0866, 0.14, 0.3] {
        let h = 1e-6;
        let fd = (psi(c + h, &d, nu).unwrap() - psi(c - h, &d, nu).unwrap()) / (2.0 * h);
        assert_relative_eq!(psi_slope(c, &d, nu).unwrap(), fd, epsilon = 1e-8, max_relative = 1e-6);
        let gd = (reduced_g(c + h, &d, nu).unwrap() - reduced_g(c - h, &d, nu).unwrap()) / (2.0 * h);
        assert_relative_eq!(reduced_g_slope(c, &d, nu).unwrap(), gd, epsilon = 1e-10, max_relative = 1e-6);
    }
}

#[test]
fn fold_eigenvalue_and_derivatives_by_differences() {
    let d = table2();
    let nt = nu_tilde(&d);
    let m = R2Model::new(&d, nt);
    let lo = LeadingOrder::new(&d.scaled, nt);
    for f in fold_curve((0.1, 2.0), 20, &d, nt).unwrap() {
        // λ = ∂f/∂C along the sheet vanishes at the fold
        assert!(m.lambda(f.c_fold, f.c_t).abs() < 1e-10);
        let e = 1e-6;
        let dfdc = (lo.f(f.c_fold + e, f.c_t, f.h_fold) - lo.f(f.c_fold - e, f.c_t, f.h_fold)) / (2.0 * e);
        assert!(dfdc.abs() < 1e-6 * (1.0 + lo.serca_plus(f.c_fold)), "{dfdc}");
        let dfdh = (lo.f(f.c_fold, f.c_t, f.h_fold + e) - lo.f(f.c_fold, f.c_t, f.h_fold - e)) / (2.0 * e);
        assert_relative_eq!(f.transversality, dfdh, max_relative = 1e-6);
        let d2 = (lo.f(f.c_fold + e, f.c_t, f.h_fold) - 2.0 * lo.f(f.c_fold, f.c_t, f.h_fold) + lo.f(f.c_fold - e, f.c_t, f.h_fold)) / (e * e);
        assert_relative_eq!(f.nondegeneracy, d2, max_relative = 1e-3);
        let dct = (lo.f(f.c_fold, f.c_t + e, f.h_fold) - lo.f(f.c_fold, f.c_t - e, f.h_fold)) / (2.0 * e);
        assert_relative_eq!(f.dfdct, dct, epsilon = 1e-8, max_relative = 1e-5);
    }
}

#[test]
fn nondegeneracy_is_constant_along_the_fold() {
    let d = table2();
    let nt = nu_tilde(&d);
    let want = 4.0 * nt / (d.scaled.k_s * d.scaled.k_s);
    for f in fold_curve((0.05, 3.0), 30, &d, nt).unwrap() {
        assert_relative_eq!(f.nondegeneracy, want, max_relative = 1e-10);
    }
    assert_relative_eq!(want, 256.25, max_relative = 1e-12);
}

#[test]
fn switch_scores_from_hill_slope_at_half_point() {
    // n/(4K) is the slope of x^n/(x^n + K^n) at x = K
    for &(k, n) in &[(0.04f64, 4.0f64), (0.2, 2.0), (3.5, 4.0)] {
        let hill = |x: f64| x.powf(n) / (x.powf(n) + k.powf(n));
        let e = 1e-7 * k;
        let fd = (hill(k + e) - hill(k - e)) / (2.0 * e);
        assert_relative_eq!(hill_max_slope(k, n), fd, max_relative = 1e-6);
    }
}

#[test]
fn scale_factors_reproduce_candidate_definitions() {
    let d = table2();
    let p = &d.scaled;
    let s = scale_factors(&d);
    assert_relative_eq!(s.inv_tau_max, 1.0 / p.tau_max, max_relative = 1e-15);
    assert_relative_eq!(s.v_s, p.v_s, max_relative = 1e-15);
    assert_relative_eq!(s.delta_alpha_0, p.delta * p.alpha_0, max_relative = 1e-15);
    assert_relative_eq!(s.delta_v_pm, p.delta * p.v_pm, max_relative = 1e-15);
}
