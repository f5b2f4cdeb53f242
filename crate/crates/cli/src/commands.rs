use std::path::Path;

use anyhow::{Context, Result};
use calcium_gspt::integrate::{find_periodic_attractor, integrate, AttractorOptions};
use calcium_gspt::layer::{layer_phase_portrait, unstable_cycle};
use calcium_gspt::orbit::{
    amplitude_scan, decompose_spike, default_scan_grid, equilibrium_branch, fold_passage_scaling, transition_map_r1_with,
    transition_map_r2, BifurcationDiagram, MapOptions, Phase, ScanPoint, TransitionMapResult,
};
use calcium_gspt::r1::{locate_landmarks, s1_point, R1Landmarks};
use calcium_gspt::r2::{fold_curve, folded_singularity_root, reduced_flow_r2, sheet_fan, FoldPoint, R2Model};
use calcium_gspt::roots::{linspace, logspace};
use calcium_gspt::scaling::scaling_relation;
use calcium_gspt::system::ModelSystem;
use calcium_gspt::OrbitSummary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{write_json, Csv};
use crate::{row, Command, RunConfig};

const STATE_NAMES: [&str; 3] = ["c", "c_t", "h"];

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    let out = cfg.out.as_path();
    match cmd {
        Command::Simulate { t_end } => simulate(cfg, *t_end, out, "trajectory.csv", "simulate.json"),
        Command::ScaleReport => scale_report(cfg, out),
        Command::AnalyzeR1 => analyze_r1(cfg, out, "").map(|_| ()),
        Command::AnalyzeR2 => analyze_r2(cfg, out, ""),
        Command::Maps => maps(cfg, out, ""),
        Command::Bifurcate { p_min, p_max } => bifurcate(cfg, (*p_min, *p_max), out, "").map(|_| ()),
        Command::Scan { grid } => {
            let g = match grid {
                Some(s) => parse_grid(s)?,
                None => default_scan_grid(),
            };
            scan(cfg, &g, out, "").map(|_| ())
        }
        Command::ExportFigs => export_figs(cfg, &out.join("figs")),
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    anyhow::ensure!(parts.len() == 3, "--grid expects lo,hi,n");
    let lo: f64 = parts[0].parse()?;
    let hi: f64 = parts[1].parse()?;
    let n: usize = parts[2].parse()?;
    anyhow::ensure!(n >= 2 && lo > 0.0 && hi > lo, "--grid needs 0 < lo < hi and n >= 2");
    Ok(linspace(lo, hi, n))
}

fn attractor_options(cfg: &RunConfig) -> AttractorOptions<f64> {
    AttractorOptions { integrator: cfg.integrator, ..AttractorOptions::default() }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateSummary {
    p: f64,
    t_end: f64,
    steps: usize,
    max_c: f64,
    min_c: f64,
    /// Over the second half only, after most of the transient.
    late_max_c: f64,
    late_min_c: f64,
    rtol: f64,
    atol: f64,
}

fn simulate(cfg: &RunConfig, t_end: f64, out: &Path, csv_name: &str, json_name: &str) -> Result<()> {
    anyhow::ensure!(t_end > 0.0, "--t-end must be > 0");
    let sys = ModelSystem::dimensionless(&cfg.params);
    let y0 = AttractorOptions::<f64>::default().initial.to_array();
    let tr = integrate(&sys, 0.0, y0, &cfg.integrator.with_t_max(t_end))?;
    let (mut max_c, mut min_c, mut late_max, mut late_min) = (f64::MIN, f64::MAX, f64::MIN, f64::MAX);
    for (t, y) in tr.times.iter().zip(&tr.states) {
        max_c = max_c.max(y[0]);
        min_c = min_c.min(y[0]);
        if *t >= 0.5 * t_end {
            late_max = late_max.max(y[0]);
            late_min = late_min.min(y[0]);
        }
    }
    crate::output::write_atomic(out, csv_name, tr.to_csv(&STATE_NAMES).as_bytes())?;
    let summary = SimulateSummary {
        p: cfg.params.p(),
        t_end,
        steps: tr.len(),
        max_c,
        min_c,
        late_max_c: late_max,
        late_min_c: late_min,
        rtol: cfg.integrator.rtol,
        atol: cfg.integrator.atol,
    };
    write_json(out, json_name, &summary)?;
    Ok(())
}

// ---------------------------------------------------------------- scaling

fn scale_report(cfg: &RunConfig, out: &Path) -> Result<()> {
    let r = scaling_relation(&cfg.params);
    let mut v = serde_json::to_value(&r)?;
    // a₁ … a₇ also by name, for readers that don't want to index pairs
    let named: serde_json::Map<String, serde_json::Value> =
        r.a.iter().map(|(i, a)| (format!("a{i}"), serde_json::json!(a))).collect();
    v["a_named"] = serde_json::Value::Object(named);
    write_json(out, "scaling_report.json", &v)?;
    Ok(())
}

// ---------------------------------------------------------------- R1

fn analyze_r1(cfg: &RunConfig, out: &Path, prefix: &str) -> Result<R1Landmarks<f64>> {
    let d = &cfg.params;
    let nu = cfg.nu;
    let lm = locate_landmarks(d, nu).context("R1 landmarks")?;
    write_json(out, &format!("{prefix}r1_landmarks.json"), &lm)?;

    let mut s1 = Csv::new(&["c", "c_t", "h", "branch"]);
    for c in logspace(1e-3, 1.0, 400) {
        if let Ok(pt) = s1_point(c, d, nu) {
            let branch = serde_json::to_value(pt.branch)?.as_str().unwrap_or("").to_string();
            row!(s1, pt.c, pt.c_t, pt.h, branch);
        }
    }
    s1.write(out, &format!("{prefix}s1.csv"))?;

    // unstable cycles between the Hopf and homoclinic values of c_t
    let mut cyc = Csv::new(&["c_t", "period", "c_min", "c_max", "anchor_c", "anchor_h"]);
    let lo = lm.ct_h + 5e-3;
    let hi = lm.ct_hom - 5e-3;
    if hi > lo {
        for ct in linspace(lo, hi, 10) {
            if let Some(lc) = unstable_cycle(d, nu, ct, 16)? {
                row!(cyc, ct, lc.period, lc.c_range.0, lc.c_range.1, lc.anchor[0], lc.anchor[1]);
            }
        }
    }
    cyc.write(out, &format!("{prefix}cycle_branch.csv"))?;
    Ok(lm)
}

// ---------------------------------------------------------------- R2

#[derive(Serialize)]
struct R2Summary {
    nu_tilde: f64,
    varepsilon: f64,
    nondegeneracy: f64,
    min_transversality: f64,
    folded_singularity: Option<f64>,
    folded_singularity_note: Option<String>,
    reduced_trajectories: usize,
    reached_fold: usize,
}

fn analyze_r2(cfg: &RunConfig, out: &Path, prefix: &str) -> Result<()> {
    let d = &cfg.params;
    let nt = cfg.nu_tilde();
    let fold = fold_curve((0.05, 2.0), 200, d, nt)?;
    fold_csv(&fold).write(out, &format!("{prefix}fold_curve.csv"))?;

    let mut flows = Csv::new(&["id", "tau", "C", "c_t", "h"]);
    let m = R2Model::new(d, nt);
    let starts = sheet_fan(d, nt, 5, 4);
    let mut reached = 0;
    for (id, &start) in starts.iter().enumerate() {
        let f = reduced_flow_r2(start, d, nt, 1e3)?;
        reached += f.reached_fold as usize;
        for &(tau, cc, ct) in &f.points {
            row!(flows, id, tau, cc, ct, m.varphi(cc, ct).ok());
        }
    }
    flows.write(out, &format!("{prefix}reduced_flow.csv"))?;

    let root = folded_singularity_root(d, nt);
    let summary = R2Summary {
        nu_tilde: nt,
        varepsilon: cfg.eps,
        nondegeneracy: fold.first().map_or(f64::NAN, |f| f.nondegeneracy),
        min_transversality: fold.iter().map(|f| f.transversality).fold(f64::INFINITY, f64::min),
        folded_singularity: root.as_ref().ok().copied(),
        folded_singularity_note: root.err().map(|e| e.to_string()),
        reduced_trajectories: starts.len(),
        reached_fold: reached,
    };
    write_json(out, &format!("{prefix}r2_summary.json"), &summary)?;
    Ok(())
}

fn fold_csv(fold: &[FoldPoint<f64>]) -> Csv {
    let mut csv = Csv::new(&["c_t", "C_fold", "h_fold", "transversality", "nondegeneracy", "dfdct"]);
    for f in fold {
        row!(csv, f.c_t, f.c_fold, f.h_fold, f.transversality, f.nondegeneracy, f.dfdct);
    }
    csv
}

// ---------------------------------------------------------------- maps

fn jittered(cfg: &RunConfig, grid: Vec<(f64, f64)>, stream: u64) -> Vec<(f64, f64)> {
    if cfg.jitter == 0.0 {
        return grid;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    grid.into_iter()
        .map(|(ct, h)| {
            let a = cfg.jitter;
            (ct + rng.gen_range(-a..=a), (h + rng.gen_range(-a..=a)).max(1e-6))
        })
        .collect()
}

pub fn r1_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for ct in [0.5, 0.6, 0.7, 0.8, 0.9] {
        for h in [0.05, 0.15, 0.3] {
            g.push((ct, h));
        }
    }
    g
}

pub fn r2_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for ct in [0.30, 0.35, 0.40] {
        for h in [0.02, 0.05, 0.1] {
            g.push((ct, h));
        }
    }
    g
}

fn map_csv(m: &TransitionMapResult<f64>) -> Csv {
    let mut csv = Csv::new(&[
        "entry_0", "entry_c_t", "entry_h", "exit_0", "exit_c_t", "exit_h", "flight_time", "out_of_contract", "plateau_fraction",
        "fold_distance", "error",
    ]);
    for i in &m.images {
        let ex = i.exit;
        row!(
            csv,
            i.entry[0],
            i.entry[1],
            i.entry[2],
            ex.map(|y| y[0]),
            ex.map(|y| y[1]),
            ex.map(|y| y[2]),
            i.flight_time,
            i.out_of_contract,
            i.plateau_fraction,
            i.fold_distance,
            i.error.clone().unwrap_or_default().replace(',', ";"),
        );
    }
    csv
}

fn maps(cfg: &RunConfig, out: &Path, prefix: &str) -> Result<()> {
    let d = &cfg.params;
    let opts = MapOptions { integrator: cfg.integrator.with_t_max(2e7) };
    let r1 = transition_map_r1_with(&jittered(cfg, r1_grid(), 1), cfg.chi, d, cfg.epsilon_r1(), cfg.nu, &opts)?;
    write_json(out, &format!("{prefix}map_r1.json"), &r1)?;
    map_csv(&r1).write(out, &format!("{prefix}map_r1.csv"))?;

    let grid2 = jittered(cfg, r2_grid(), 2);
    let r2 = transition_map_r2(&grid2, cfg.chi_r2, d, cfg.eps, cfg.nu_tilde())?;
    write_json(out, &format!("{prefix}map_r2.json"), &r2)?;
    map_csv(&r2).write(out, &format!("{prefix}map_r2.csv"))?;

    let eps = [cfg.eps, cfg.eps / 2.0, cfg.eps / 4.0];
    let scaling = fold_passage_scaling(&grid2, cfg.chi_r2, d, cfg.nu_tilde(), &eps)?;
    write_json(out, &format!("{prefix}fold_passage.json"), &scaling)?;
    Ok(())
}

// ---------------------------------------------------------------- branch and scan

fn bifurcate(cfg: &RunConfig, range: (f64, f64), out: &Path, prefix: &str) -> Result<BifurcationDiagram<f64>> {
    anyhow::ensure!(range.0 > 0.0 && range.1 > range.0, "need 0 < p_min < p_max");
    let b = equilibrium_branch(range, &cfg.params)?;
    let mut csv = Csv::new(&["p", "c", "c_t", "h", "stable", "re_0", "im_0", "re_1", "im_1", "re_2", "im_2"]);
    for x in &b.branch {
        let e = x.eigenvalues;
        row!(csv, x.p, x.state.c, x.state.c_t, x.state.h, x.stable, e[0].0, e[0].1, e[1].0, e[1].1, e[2].0, e[2].1);
    }
    csv.write(out, &format!("{prefix}branch.csv"))?;
    write_json(out, &format!("{prefix}bifurcation.json"), &serde_json::json!({ "hopf_points": b.hopf_points, "gaps": b.gaps, "points": b.branch.len() }))?;
    Ok(b)
}

fn scan(cfg: &RunConfig, grid: &[f64], out: &Path, prefix: &str) -> Result<Vec<ScanPoint<f64>>> {
    let s = amplitude_scan(grid, &cfg.params, &attractor_options(cfg));
    let mut csv = Csv::new(&["p", "max_c", "min_c", "period", "class", "error"]);
    for x in &s {
        let class = x.class.map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default();
        row!(csv, x.p, x.max_c, x.min_c, x.period, class, x.error.clone().unwrap_or_default().replace(',', ";"));
    }
    csv.write(out, &format!("{prefix}scan.csv"))?;
    write_json(out, &format!("{prefix}scan.json"), &s)?;
    Ok(s)
}

// ---------------------------------------------------------------- figures

fn orbit_csv(o: &OrbitSummary, phases: Option<&[calcium_gspt::orbit::PhaseInterval<f64>]>, n: usize) -> Csv {
    let mut csv = Csv::new(&["t", "c", "c_t", "h", "phase"]);
    let rise = phases.and_then(|ph| ph.iter().find(|i| i.phase == Phase::Rise)).map(|i| i.t_start);
    for (t, x) in o.samples(n) {
        let label = match (phases, rise) {
            (Some(ph), Some(t0)) => {
                // phase times run from the rise onset and wrap at the period
                let mut u = t - t0;
                if u < 0.0 {
                    u += o.period;
                }
                ph.iter()
                    .find(|i| (i.t_start <= u && u < i.t_end) || (i.t_start <= u + o.period && u + o.period < i.t_end))
                    .map(|i| format!("{:?}", i.phase).to_lowercase())
                    .unwrap_or_default()
            }
            _ => String::new(),
        };
        row!(csv, t, x.c, x.c_t, x.h, label);
    }
    csv
}

fn export_figs(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let d = &cfg.params;
    let nt = cfg.nu_tilde();
    let opts = attractor_options(cfg);

    // time series of the two oscillation classes
    let fold = fold_curve((0.05, 3.0), 600, d, nt)?;
    let lm = analyze_r1(cfg, dir, "fig3a_")?;
    for (p, name) in [(0.02, "fig2_timeseries_p0.02.csv"), (0.09, "fig6_broad_spike_p0.09.csv")] {
        let dp = d.with_p(p);
        let o = find_periodic_attractor(&dp, p, None, &opts).with_context(|| format!("attractor at p = {p}"))?;
        let lm_p = locate_landmarks(&dp, cfg.nu).ok();
        let dec = decompose_spike(&o, &dp, lm_p.as_ref(), Some(&fold));
        orbit_csv(&o, Some(&dec.phase_intervals), 4000).write(dir, name)?;
        write_json(dir, &name.replace(".csv", ".json"), &serde_json::json!({ "orbit": o, "decomposition": dec }))?;
    }

    // layer phase portraits either side of the homoclinic value
    for ct in [0.40, lm.ct_hom + 0.04] {
        let pp = layer_phase_portrait(ct, d, cfg.nu, 400, 5e6)?;
        let mut csv = Csv::new(&["curve", "c", "h"]);
        row!(csv, "q_f", pp.q_f[0], pp.q_f[1]);
        row!(csv, "q_s", pp.q_s[0], pp.q_s[1]);
        for m in &pp.manifolds {
            for pt in &m.points {
                row!(csv, m.label, pt[0], pt[1]);
            }
        }
        if let Some(c) = &pp.cycle {
            for pt in &c.points {
                row!(csv, "cycle", pt[0], pt[1]);
            }
        }
        csv.write(dir, &format!("fig4_portrait_ct{ct:.2}.csv"))?;
    }

    analyze_r2(cfg, dir, "fig5_")?;
    maps(cfg, dir, "fig7_")?;
    bifurcate(cfg, (0.001, 0.2), dir, "fig8b_")?;
    scan(cfg, &default_scan_grid(), dir, "fig8b_")?;
    Ok(())
}
