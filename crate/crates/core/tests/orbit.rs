use calcium_gspt::integrate::{find_periodic_attractor, AttractorOptions, OdeSystem};
use calcium_gspt::orbit::{
    decompose_spike, equilibrium_branch, equilibrium_from_scratch, transition_map_r1, transition_map_r2, ConcentrationCurve,
    Phase, SpikeClass,
};
use calcium_gspt::r1::locate_landmarks;
use calcium_gspt::r2::{fold_curve, R2Model};
use calcium_gspt::model::rhs_dimensionless;
use calcium_gspt::system::RescaledSystem;
use calcium_gspt::DimensionlessParameterSet;

fn table2() -> DimensionlessParameterSet {
    DimensionlessParameterSet::table2()
}

#[test]
fn r1_map_concentrates_near_the_reduced_equilibrium_level() {
    let d = table2();
    let nu = d.scaled.v_s;
    let lm = locate_landmarks(&d, nu).unwrap();
    let grid = [(0.4, 0.15), (0.6, 0.05), (0.8, 0.3)];
    let r = transition_map_r1(&grid, 0.05, &d, d.scaled.k_tau.powi(4), nu).unwrap();
    // an entry below the homoclinic band is flagged and kept out of the spread
    assert!(r.images[0].out_of_contract);
    assert!(!r.images[1].out_of_contract && !r.images[2].out_of_contract);
    match r.concentration_curve {
        ConcentrationCurve::Gamma1 { c_t_level } => assert!((c_t_level - lm.ct_star).abs() < 1e-12),
        _ => panic!("R1 map concentrates on a level of c_t"),
    }
    assert!(r.spread < 0.03, "{}", r.spread);
    for img in &r.images[1..] {
        let exit = img.exit.expect("exit");
        assert!((exit[0] - 0.05).abs() < 1e-8);
        assert!(img.plateau_fraction.unwrap() > 0.5);
    }
}

#[test]
fn r2_map_exits_near_the_fold_projection() {
    let d = table2();
    let nt = d.scaled.v_s / d.scaled.k_tau.powi(2);
    let m = R2Model::new(&d, nt);
    let grid = [(0.30, 0.02), (0.35, 0.05), (0.40, 0.1)];
    let r = transition_map_r2(&grid, 0.5, &d, 0.02, nt).unwrap();
    for img in &r.images {
        assert!(!img.out_of_contract);
        let y = img.exit.expect("exit");
        let h_fold = m.varphi(m.fold_c(y[1]), y[1]).unwrap();
        assert!((y[2] - h_fold).abs() <= r.spread + 1e-15);
    }
    assert!(r.spread < 0.1, "{}", r.spread);
    // entries where C rises through the section are out of contract
    let sys = RescaledSystem::new(&d, 0.02, nt);
    let rising = (1..=30)
        .flat_map(|i| (1..=10).map(move |j| (0.05 * i as f64, 0.1 * j as f64)))
        .find(|&(ct, h)| sys.rhs(0.0, &[2.0, ct, h])[0] > 0.0)
        .expect("some entry with C rising");
    let up = transition_map_r2(&[rising], 0.5, &d, 0.02, nt).unwrap();
    assert!(up.images[0].out_of_contract, "{rising:?}");
}

#[test]
fn maps_are_deterministic_under_parallel_evaluation() {
    let d = table2();
    let nt = d.scaled.v_s / d.scaled.k_tau.powi(2);
    let grid = [(0.30, 0.02), (0.35, 0.05), (0.40, 0.1), (0.33, 0.07)];
    let a = transition_map_r2(&grid, 0.5, &d, 0.04, nt).unwrap();
    let b = transition_map_r2(&grid, 0.5, &d, 0.04, nt).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn narrow_and_broad_spikes() {
    let base = table2();
    let nu = base.scaled.v_s;
    let nt = nu / base.scaled.k_tau.powi(2);
    let fold = fold_curve((0.05, 3.0), 600, &base, nt).unwrap();

    let d = base.with_p(0.02);
    let o = find_periodic_attractor(&d, 0.02, None, &AttractorOptions::default()).unwrap();
    let s = decompose_spike(&o, &d, None, Some(&fold));
    assert_eq!(s.class, Some(SpikeClass::Narrow));
    assert!(s.plateau_fraction < 0.05);

    let d = base.with_p(0.09);
    let o = find_periodic_attractor(&d, 0.09, None, &AttractorOptions::default()).unwrap();
    let lm = locate_landmarks(&d, nu).unwrap();
    let s = decompose_spike(&o, &d, Some(&lm), Some(&fold));
    assert_eq!(s.class, Some(SpikeClass::Broad));
    let phases: Vec<Phase> = s.phase_intervals.iter().map(|i| i.phase).collect();
    assert_eq!(phases, vec![Phase::Inactive, Phase::Rise, Phase::Plateau, Phase::Fall]);
    assert!((0.4..=0.6).contains(&s.max_c));
    assert!(s.rise_fold_offset.unwrap().abs() < 0.05);
    assert!(s.fall_offset.unwrap().abs() < 0.05);
    // intervals tile one period
    let total: f64 = s.phase_intervals.iter().map(|i| i.t_end - i.t_start).sum();
    assert!((total - s.period).abs() < 1e-6 * s.period, "{total} vs {}", s.period);
}

#[test]
fn equilibrium_branch_has_a_hopf_window() {
    let d = table2();
    let b = equilibrium_branch((0.001, 0.2), &d).unwrap();
    assert!(b.gaps.is_empty());
    assert_eq!(b.hopf_points.len(), 2);
    assert!(b.hopf_points[0].destabilising && !b.hopf_points[1].destabilising);
    assert!(b.hopf_points.iter().all(|h| h.bracket < 1e-5 && h.frequency > 0.0));
    for x in &b.branch {
        let r = rhs_dimensionless(&x.state, &d.with_p(x.p));
        assert!(r.to_array().iter().all(|v| v.abs() < 1e-10), "{r:?}");
    }
    // a cold start lands on the same branch
    let mid = &b.branch[b.branch.len() / 2];
    let fresh = equilibrium_from_scratch(&d, mid.p).unwrap();
    assert!((fresh.c - mid.state.c).abs() < 1e-8);
}
