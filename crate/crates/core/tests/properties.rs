use calcium_gspt::hill::hill_max_slope;
use calcium_gspt::integrate::{fmt17, integrate, FnSystem, IntegratorConfig};
use calcium_gspt::model::{rhs_dimensionless, rhs_r1, rhs_r2};
use calcium_gspt::params::ParameterSet;
use calcium_gspt::r1::{psi, s1_state};
use calcium_gspt::r2::R2Model;
use calcium_gspt::scaling::{classify_switches, scaling_relation, EXPONENTS};
use calcium_gspt::state::{RescaledState, State};
use calcium_gspt::{DimensionlessParameterSet, Error};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn valid_state() -> impl Strategy<Value = State<f64>> {
    (1e-3..3.0f64, 1e-4..1.0f64, 0.0..=1.0f64).prop_map(|(ct, frac, h)| State::new(ct * frac, ct, h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn formulations_agree_at_distinguished_values(s in valid_state(), p in 0.01..0.2f64) {
        let d = DimensionlessParameterSet::table2().with_p(p);
        let (ve, nu) = (d.scaled.k_tau, d.scaled.v_s);
        let base = rhs_dimensionless(&s, &d).to_array();
        let r1 = rhs_r1(&s, &d, ve.powi(4), nu).to_array();
        let r2 = rhs_r2(&s.rescale(ve), &d, ve, nu / (ve * ve)).unwrap();
        let e3 = ve.powi(3);
        let back = [r2.big_c * e3 * ve, r2.c_t * e3, r2.h * e3];
        for k in 0..3 {
            prop_assert!(rel(base[k], r1[k]) <= 1e-10, "{k}: {} vs {}", base[k], r1[k]);
            prop_assert!(rel(base[k], back[k]) <= 1e-10, "{k}: {} vs {}", base[k], back[k]);
        }
    }

    #[test]
    fn total_calcium_moves_only_through_the_membrane(s in valid_state()) {
        // with no membrane transport c_t is conserved
        let d = DimensionlessParameterSet::table2();
        let mut closed = d;
        closed.scaled.delta = 1e-300;
        prop_assert!(rhs_dimensionless(&s, &closed).c_t.abs() < 1e-290);
    }

    #[test]
    fn rescaling_round_trips(c in 1e-6..1.0f64, ct in 0.0..2.0f64, h in 0.0..1.0f64, ve in 1e-3..0.5f64) {
        let s = State::new(c, ct, h);
        let back = s.rescale(ve).unscale(ve);
        prop_assert!(rel(back.c, c) <= 4.0 * f64::EPSILON);
        prop_assert_eq!((back.c_t, back.h), (ct, h));
    }

    #[test]
    fn s1_is_an_equilibrium_set_of_the_layer(c in 1e-3..1.0f64) {
        let d = DimensionlessParameterSet::table2();
        let nu = d.scaled.v_s;
        let s = s1_state(c, &d, nu).unwrap();
        let r = rhs_r1(&s, &d, 0.0, nu);
        prop_assert!(r.c.abs() <= 1e-12 && r.h.abs() <= 1e-12);
        // c_t ≥ (1 + 1/γ) c: the ER content is never negative
        prop_assert!(psi(c, &d, nu).unwrap() >= (1.0 + 1.0 / d.scaled.gamma) * c);
    }

    #[test]
    fn varphi_parametrises_s3(cc in 0.05..8.0f64, ct in 0.05..3.0f64) {
        let d = DimensionlessParameterSet::table2();
        let nt = d.scaled.v_s / d.scaled.k_tau.powi(2);
        let m = R2Model::new(&d, nt);
        let h = m.varphi(cc, ct).unwrap();
        let scale = 1.0 + m.lo.serca_plus(cc) + m.lo.serca_minus(ct);
        prop_assert!(m.lo.f(cc, ct, h).abs() <= 1e-10 * scale);
    }

    #[test]
    fn fold_separates_sheets(ct in 0.05..3.0f64) {
        let d = DimensionlessParameterSet::table2();
        let nt = d.scaled.v_s / d.scaled.k_tau.powi(2);
        let m = R2Model::new(&d, nt);
        let cf = m.fold_c(ct);
        prop_assert!(m.lambda(0.9 * cf, ct) < 0.0);
        prop_assert!(m.lambda(1.1 * cf, ct) > 0.0);
        prop_assert!(m.lambda(cf, ct).abs() <= 1e-10 * (1.0 + m.lambda(0.9 * cf, ct).abs()));
    }

    #[test]
    fn scaling_relation_closes_for_any_parameters(k_tau in 0.01..0.1f64, tau_max in 1e3..1e5f64, v_s in 1e-4..1e-2f64) {
        let mut d = DimensionlessParameterSet::table2();
        d.scaled.k_tau = k_tau;
        d.scaled.tau_max = tau_max;
        d.scaled.v_s = v_s;
        let r = scaling_relation(&d);
        prop_assert!(rel(r.epsilon, k_tau.powi(4)) <= 1e-15);
        for &(i, a) in &r.a {
            prop_assert!(rel(a * r.eps[i - 1].powi(EXPONENTS[i - 1] as i32), r.epsilon) <= 1e-12);
        }
        prop_assert!(rel(r.nu_tilde, v_s / (k_tau * k_tau)) <= 1e-12);
    }

    #[test]
    fn switch_iff_above_threshold(k_c in 0.01..2.0f64, threshold in 0.5..50.0f64) {
        let d = DimensionlessParameterSet::table2().with_override("k_c", k_c).unwrap();
        for s in classify_switches(&d, threshold) {
            prop_assert_eq!(s.is_switch, s.score > threshold && !s.borderline);
        }
        prop_assert!(rel(hill_max_slope(k_c, 4.0), 1.0 / k_c) <= 1e-15);
    }

    #[test]
    fn unknown_override_keys_are_rejected(key in "[a-z_]{1,12}") {
        let d = DimensionlessParameterSet::table2();
        let known = ParameterSet::<f64>::FIELD_NAMES.contains(&key.as_str());
        match d.with_override(&key, 0.5) {
            Err(Error::UnknownKey(k)) => prop_assert!(!known && k == key),
            _ => prop_assert!(known),
        }
    }

    #[test]
    fn parameter_json_round_trips(p in 1e-3..1.0f64, k_s in 0.05..1.0f64) {
        let q = ParameterSet::<f64>::table1().with_override("p", p).unwrap().with_override("k_s", k_s).unwrap();
        prop_assert_eq!(ParameterSet::from_json_str(&q.to_json()).unwrap(), q);
    }

    #[test]
    fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn integration_error_tracks_tolerance(rate in 0.1..50.0f64, rtol_exp in 5..10i32) {
        let rtol = 10f64.powi(-rtol_exp);
        let sys = FnSystem(move |_t: f64, y: &[f64; 1]| [-rate * y[0]]);
        let cfg = IntegratorConfig::default().with_tolerances(rtol, rtol * 1e-3).with_t_max(1.0).with_max_step(0.1);
        let y = integrate(&sys, 0.0, [1.0], &cfg).unwrap().last_state().unwrap()[0];
        let exact = (-rate).exp();
        prop_assert!((y - exact).abs() <= 100.0 * rtol * (1.0 + exact), "{y} vs {exact}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let d64 = DimensionlessParameterSet::table2();
    let d32: calcium_gspt::params::DimensionlessParameterSet<f32> = d64.cast();
    let s = State::new(0.15, 0.5, 0.3);
    let s32 = State::new(0.15f32, 0.5, 0.3);
    let a = rhs_dimensionless(&s, &d64).to_array();
    let b = rhs_dimensionless(&s32, &d32).to_array();
    for k in 0..3 {
        assert!(rel(a[k], b[k] as f64) < 1e-4, "{k}: {} vs {}", a[k], b[k]);
    }
    let nt = d32.scaled.v_s / d32.scaled.k_tau.powi(2);
    let m = R2Model::new(&d32, nt);
    assert!(m.lambda(m.fold_c(0.5), 0.5).abs() < 1e-3);
    let _ = RescaledState::new(1.0f32, 0.5, 0.5);
}
