//! Experiments on the full system: the transition maps of the two regimes,
//! the four-phase decomposition of a spike, and the equilibrium branch and
//! amplitude scan in `p`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{
    find_periodic_attractor, integrate_with_events, AttractorOptions, Coordinate, Direction, IntegratorConfig, OdeSystem,
    OrbitSummary, SectionSpec,
};
use crate::layer::homoclinic_locator;
use crate::linalg::{eig3, Lu};
use crate::model::fluxes;
use crate::params::DimensionlessParameterSet;
use crate::r1::{h_inf, psi, reduced_equilibrium, R1Landmarks};
use crate::r2::{FoldPoint, R2Model};
use crate::roots::{brent, linspace, logspace, scan_brackets};
use crate::scalar::{lit, to_f64, Real};
use crate::state::State;
use crate::system::{ModelSystem, RescaledSystem};

/// Worker count: `CALCIUM_GSPT_THREADS` if set to a positive integer, else
/// the machine's available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("CALCIUM_GSPT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` over `items` on a private pool; results keep input order.
fn par_map<I: Sync, O: Send, F: Fn(&I) -> O + Sync + Send>(items: &[I], f: F) -> Vec<O> {
    match rayon::ThreadPoolBuilder::new().num_threads(worker_threads()).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

// ---------------------------------------------------------------- maps

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapImage<T> {
    pub entry: [T; 3],
    pub exit: Option<[T; 3]>,
    pub flight_time: Option<T>,
    /// Entry outside the map's domain (below the homoclinic band in R1, not
    /// falling onto the attracting sheet in R2); excluded from the spread.
    pub out_of_contract: bool,
    /// R1: fraction of the flight with `|c_t − ψ(c)| < 0.02`.
    pub plateau_fraction: Option<T>,
    /// R2: smallest `|C − φ(c_t)|` along the flight.
    pub fold_distance: Option<T>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConcentrationCurve<T> {
    /// `c_t = ψ(c_*)` on the exit section.
    Gamma1 { c_t_level: T },
    /// `(c_t, h)` samples of the fold curve projected onto the exit section.
    Gamma2 { polyline: Vec<[T; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionMapResult<T> {
    pub section_in: SectionSpec<T>,
    pub section_out: SectionSpec<T>,
    pub images: Vec<MapImage<T>>,
    pub concentration_curve: ConcentrationCurve<T>,
    /// Largest distance of an in-contract exit point from the curve
    /// (`c_t` distance for Γ1, `h` distance for Γ2).
    pub spread: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapOptions<T> {
    pub integrator: IntegratorConfig<T>,
}

impl<T: Real> Default for MapOptions<T> {
    fn default() -> Self {
        Self { integrator: IntegratorConfig::default().with_t_max(lit(2e7)) }
    }
}

/// `π_R1` from `{c = χ}` (upwards) back to `{c = χ}` (downwards) for entry
/// points `(c_t, h)`.
pub fn transition_map_r1<T: Real>(
    grid: &[(T, T)],
    chi: T,
    params: &DimensionlessParameterSet<T>,
    eps: T,
    nu: T,
) -> Result<TransitionMapResult<T>> {
    transition_map_r1_with(grid, chi, params, eps, nu, &MapOptions::default())
}

pub fn transition_map_r1_with<T: Real>(
    grid: &[(T, T)],
    chi: T,
    params: &DimensionlessParameterSet<T>,
    eps: T,
    nu: T,
    opts: &MapOptions<T>,
) -> Result<TransitionMapResult<T>> {
    let level = psi(reduced_equilibrium(params, nu)?, params, nu)?;
    let ct_hom = homoclinic_locator(params, nu)?.c_t_hom;
    let sys = ModelSystem::r1(params, eps, nu);
    let section_in = SectionSpec::new(Coordinate::C, chi, Direction::Up);
    let section_out = SectionSpec::new(Coordinate::C, chi, Direction::Down);
    let images = par_map(grid, |&(ct, h)| {
        let entry = [chi, ct, h];
        let mut img = blank_image(entry, ct < ct_hom);
        let mut sec = section_out.section();
        sec.terminal = true;
        match integrate_with_events(&sys, T::zero(), entry, &opts.integrator, &[&sec]) {
            Ok(tr) => match tr.events.first() {
                Some(ev) => {
                    let mut near = T::zero();
                    for k in 1..tr.len() {
                        let y = tr.states[k];
                        if psi(y[0], params, nu).is_ok_and(|v| (y[1] - v).abs() < lit(0.02)) {
                            near = near + tr.times[k] - tr.times[k - 1];
                        }
                    }
                    img.exit = Some(ev.state);
                    img.flight_time = Some(ev.t);
                    img.plateau_fraction = Some(near / ev.t);
                }
                None => img.error = Some(Error::Timeout { t_max: to_f64(opts.integrator.t_max) }.to_string()),
            },
            Err(e) => img.error = Some(e.to_string()),
        }
        img
    });
    let spread = spread_of(&images, |y| (y[1] - level).abs());
    Ok(TransitionMapResult {
        section_in,
        section_out,
        images,
        concentration_curve: ConcentrationCurve::Gamma1 { c_t_level: level },
        spread,
    })
}

fn blank_image<T>(entry: [T; 3], out_of_contract: bool) -> MapImage<T> {
    MapImage {
        entry,
        exit: None,
        flight_time: None,
        out_of_contract,
        plateau_fraction: None,
        fold_distance: None,
        error: None,
    }
}

fn spread_of<T: Real, F: Fn(&[T; 3]) -> T>(images: &[MapImage<T>], dist: F) -> T {
    images
        .iter()
        .filter(|i| !i.out_of_contract)
        .filter_map(|i| i.exit.as_ref())
        .map(dist)
        .fold(T::zero(), |a, b| a.max(b))
}

/// `π_R2` on the exact rescaled system, from `{C = χ⁻¹}` (downwards) to
/// `{C = χ⁻¹}` (upwards). Entry points `(c_t, h)` with `C` moving up at the
/// section are out of contract.
pub fn transition_map_r2<T: Real>(
    grid: &[(T, T)],
    chi: T,
    params: &DimensionlessParameterSet<T>,
    varepsilon: T,
    nu_tilde: T,
) -> Result<TransitionMapResult<T>> {
    let mut opts = MapOptions::default();
    // slow drift on S3 takes O(1/ε) in the R2 fast time
    opts.integrator = opts.integrator.with_t_max(lit::<T>(1e3) / varepsilon).with_max_step(T::one() / varepsilon);
    transition_map_r2_with(grid, chi, params, varepsilon, nu_tilde, &opts)
}

pub fn transition_map_r2_with<T: Real>(
    grid: &[(T, T)],
    chi: T,
    params: &DimensionlessParameterSet<T>,
    varepsilon: T,
    nu_tilde: T,
    opts: &MapOptions<T>,
) -> Result<TransitionMapResult<T>> {
    if !(chi > T::zero() && varepsilon > T::zero()) {
        return Err(Error::Domain("transition_map_r2 needs chi > 0 and varepsilon > 0".into()));
    }
    let m = R2Model::new(params, nu_tilde);
    let level = chi.recip();
    let sys = RescaledSystem::new(params, varepsilon, nu_tilde);
    let section_in = SectionSpec::new(Coordinate::BigC, level, Direction::Down);
    let section_out = SectionSpec::new(Coordinate::BigC, level, Direction::Up);
    let h_fold = |ct: T| m.varphi(m.fold_c(ct), ct).unwrap_or(T::nan());
    let images = par_map(grid, |&(ct, h)| {
        let entry = [level, ct, h];
        let falling = sys.rhs(T::zero(), &entry)[0] < T::zero();
        let mut img = blank_image(entry, !falling);
        let mut sec = section_out.section();
        sec.terminal = true;
        match integrate_with_events(&sys, T::zero(), entry, &opts.integrator, &[&sec]) {
            Ok(tr) => match tr.events.first() {
                Some(ev) => {
                    let d = tr.states.iter().map(|y| (y[0] - m.fold_c(y[1])).abs()).fold(T::infinity(), |a, b| a.min(b));
                    img.exit = Some(ev.state);
                    img.flight_time = Some(ev.t);
                    img.fold_distance = Some(d);
                }
                None => img.error = Some(Error::Timeout { t_max: to_f64(opts.integrator.t_max) }.to_string()),
            },
            Err(e) => img.error = Some(e.to_string()),
        }
        img
    });
    let spread = spread_of(&images, |y| (y[2] - h_fold(y[1])).abs());
    let cts: Vec<T> = images.iter().filter_map(|i| i.exit.map(|y| y[1])).collect();
    let lo = cts.iter().copied().fold(T::infinity(), |a, b| a.min(b));
    let hi = cts.iter().copied().fold(T::neg_infinity(), |a, b| a.max(b));
    let polyline = if lo <= hi {
        let pad = (hi - lo) * lit(0.1) + lit(1e-3);
        linspace((lo - pad).max(lit(1e-3)), hi + pad, 50).into_iter().map(|ct| [ct, h_fold(ct)]).collect()
    } else {
        Vec::new()
    };
    Ok(TransitionMapResult { section_in, section_out, images, concentration_curve: ConcentrationCurve::Gamma2 { polyline }, spread })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldPassageScaling<T> {
    pub varepsilon: Vec<T>,
    pub spread: Vec<T>,
    /// Least-squares slope of `log spread` against `log ε`.
    pub exponent: T,
    pub intercept: T,
}

/// Runs [`transition_map_r2`] at each `ε` and fits `spread ∝ ε^k`.
pub fn fold_passage_scaling<T: Real>(
    grid: &[(T, T)],
    chi: T,
    params: &DimensionlessParameterSet<T>,
    nu_tilde: T,
    varepsilons: &[T],
) -> Result<FoldPassageScaling<T>> {
    if varepsilons.len() < 2 {
        return Err(Error::Domain("need at least two varepsilon values".into()));
    }
    let mut spread = Vec::with_capacity(varepsilons.len());
    for &e in varepsilons {
        let r = transition_map_r2(grid, chi, params, e, nu_tilde)?;
        if !(r.spread > T::zero()) {
            return Err(Error::NotFound(format!("no in-contract exit at varepsilon = {}", to_f64(e))));
        }
        spread.push(r.spread);
    }
    let xs: Vec<T> = varepsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<T> = spread.iter().map(|s| s.ln()).collect();
    let (exponent, intercept) = linear_fit(&xs, &ys);
    Ok(FoldPassageScaling { varepsilon: varepsilons.to_vec(), spread, exponent, intercept })
}

fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T) {
    let n = lit::<T>(x.len() as f64);
    let mx = x.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = y.iter().fold(T::zero(), |a, &b| a + b) / n;
    let sxy = x.iter().zip(y).fold(T::zero(), |a, (&u, &v)| a + (u - mx) * (v - my));
    let sxx = x.iter().fold(T::zero(), |a, &u| a + (u - mx) * (u - mx));
    let k = sxy / sxx;
    (k, my - k * mx)
}

// ---------------------------------------------------------------- spikes

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeClass {
    Narrow,
    Broad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// (1) slow drift on the attracting sheet of S3, `c` small.
    Inactive,
    /// (2) fast jump from the fold.
    Rise,
    /// (3) slow passage along S1.
    Plateau,
    /// (4) fast return to small `c`.
    Fall,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseInterval<T> {
    pub phase: Phase,
    /// Times relative to the start of the rise; `t_end` may exceed the period
    /// only for the inactive phase, which wraps into the next cycle.
    pub t_start: T,
    pub t_end: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpikeDecomposition<T> {
    /// In order (1)–(4), empty when unclassifiable.
    pub phase_intervals: Vec<PhaseInterval<T>>,
    pub period: T,
    pub max_c: T,
    pub class: Option<SpikeClass>,
    /// Plateau duration over the period.
    pub plateau_fraction: T,
    pub threshold: T,
    pub rise_onset: Option<State<T>>,
    pub fall_onset: Option<State<T>>,
    /// `c_t` at rise onset minus the `c_t` of the projected fold curve at
    /// the same `h`.
    pub rise_fold_offset: Option<T>,
    /// `c_t` at fall onset minus `ψ(c_*)`.
    pub fall_offset: Option<T>,
    pub diagnostic: Option<String>,
}

/// Broad iff the plateau lasts more than this fraction of the period.
pub const BROAD_FRACTION: f64 = 0.05;
const SPIKE_SAMPLES: usize = 50_000;

/// Splits one period into the four phases by thresholding `|dc/dt|` at ten
/// times its median over the orbit. The rise is the fast run of increasing
/// `c` with the largest gain, the fall the later fast run of decreasing `c`
/// that ends lowest; the plateau lies between them, the inactive phase after.
pub fn decompose_spike<T: Real>(
    orbit: &OrbitSummary<T>,
    params: &DimensionlessParameterSet<T>,
    landmarks: Option<&R1Landmarks<T>>,
    fold: Option<&[FoldPoint<T>]>,
) -> SpikeDecomposition<T> {
    let sys = ModelSystem::dimensionless(&params.with_p(orbit.p));
    let samples = orbit.samples(SPIKE_SAMPLES);
    let n = samples.len();
    let period = orbit.period;
    let max_c = samples.iter().map(|(_, s)| s.c).fold(T::neg_infinity(), |a, b| a.max(b));
    let mut out = SpikeDecomposition {
        phase_intervals: Vec::new(),
        period,
        max_c,
        class: None,
        plateau_fraction: T::zero(),
        threshold: T::nan(),
        rise_onset: None,
        fall_onset: None,
        rise_fold_offset: None,
        fall_offset: None,
        diagnostic: None,
    };
    if n < 16 {
        out.diagnostic = Some("too few samples".into());
        return out;
    }
    // drop the closing sample (same point as the first)
    let samples = &samples[..n - 1];
    let n = samples.len();
    let dc: Vec<T> = samples.iter().map(|(_, s)| sys.rhs(T::zero(), &s.to_array())[0]).collect();
    let mut mags: Vec<T> = dc.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let thr = lit::<T>(10.0) * mags[n / 2];
    out.threshold = thr;
    let class_of = |k: usize| -> i8 {
        if dc[k] > thr {
            1
        } else if dc[k] < -thr {
            -1
        } else {
            0
        }
    };
    // rotate to start at the global minimum of c (inside the inactive phase)
    let start = (0..n).min_by(|&a, &b| samples[a].1.c.partial_cmp(&samples[b].1.c).unwrap()).unwrap_or(0);
    let idx = |k: usize| (start + k) % n;
    let dt = period / lit(n as f64);

    // runs of constant class along the rotated sequence
    let mut runs: Vec<(i8, usize, usize)> = Vec::new();
    for k in 0..n {
        let c = class_of(idx(k));
        match runs.last_mut() {
            Some(r) if r.0 == c => r.2 = k + 1,
            _ => runs.push((c, k, k + 1)),
        }
    }
    let gain = |r: &(i8, usize, usize)| samples[idx(r.2 - 1)].1.c - samples[idx(r.1)].1.c;
    let rise = runs.iter().filter(|r| r.0 == 1).max_by(|a, b| gain(a).partial_cmp(&gain(b)).unwrap()).copied();
    let Some(rise) = rise else {
        out.diagnostic = Some("no fast increase of c above threshold".into());
        return out;
    };
    // the fall is the fast descent that lands lowest; an overshoot right
    // after the rise can lose more c but lands on the plateau
    let end_c = |r: &(i8, usize, usize)| samples[idx(r.2 - 1)].1.c;
    let fall = runs
        .iter()
        .filter(|r| r.0 == -1 && r.1 >= rise.2)
        .min_by(|a, b| end_c(a).partial_cmp(&end_c(b)).unwrap())
        .copied();
    let Some(fall) = fall else {
        out.diagnostic = Some("no fast decrease of c after the rise".into());
        return out;
    };
    let t = |k: usize| lit::<T>((k as f64) - (rise.1 as f64)) * dt;
    let ph = |phase, a: usize, b: usize| PhaseInterval { phase, t_start: t(a), t_end: t(b) };
    out.phase_intervals = vec![
        PhaseInterval { phase: Phase::Inactive, t_start: t(fall.2), t_end: t(rise.1 + n) },
        ph(Phase::Rise, rise.1, rise.2),
        ph(Phase::Plateau, rise.2, fall.1),
        ph(Phase::Fall, fall.1, fall.2),
    ];
    // phases listed in the order (1)–(4), with (1) wrapping to the next rise
    out.phase_intervals.sort_by_key(|p| p.phase as u8);
    let plateau = lit::<T>((fall.1 - rise.2) as f64) / lit(n as f64);
    out.plateau_fraction = plateau;
    out.class = Some(if plateau > lit(BROAD_FRACTION) { SpikeClass::Broad } else { SpikeClass::Narrow });
    let rise_state = samples[idx(rise.1)].1;
    let fall_state = samples[idx(fall.1)].1;
    out.rise_onset = Some(rise_state);
    out.fall_onset = Some(fall_state);
    if let Some(lm) = landmarks {
        out.fall_offset = Some(fall_state.c_t - lm.ct_star);
    }
    if let Some(f) = fold {
        out.rise_fold_offset = fold_ct_at_h(f, rise_state.h).map(|ct| rise_state.c_t - ct);
    }
    out
}

/// `c_t` on the projected fold curve where `h_fold = h`, by linear
/// interpolation along the sampled curve.
pub fn fold_ct_at_h<T: Real>(fold: &[FoldPoint<T>], h: T) -> Option<T> {
    fold.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (ga, gb) = (a.h_fold - h, b.h_fold - h);
        if ga == T::zero() {
            return Some(a.c_t);
        }
        if (ga < T::zero()) != (gb < T::zero()) {
            Some(a.c_t + (b.c_t - a.c_t) * ga / (ga - gb))
        } else {
            None
        }
    })
}

// ---------------------------------------------------------------- branch

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchPoint<T> {
    pub p: T,
    pub state: State<T>,
    pub stable: bool,
    /// `(re, im)` pairs, sorted by real part.
    pub eigenvalues: [(T, T); 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HopfPoint<T> {
    pub p: T,
    /// Width of the final bisection bracket.
    pub bracket: T,
    /// Imaginary part of the critical pair.
    pub frequency: T,
    /// `true` when the equilibrium loses stability with increasing `p`.
    pub destabilising: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint<T> {
    pub p: T,
    pub max_c: Option<T>,
    pub min_c: Option<T>,
    pub period: Option<T>,
    pub class: Option<SpikeClass>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BifurcationDiagram<T> {
    pub branch: Vec<BranchPoint<T>>,
    pub hopf_points: Vec<HopfPoint<T>>,
    /// `p` intervals the continuation could not bridge.
    pub gaps: Vec<(T, T)>,
    pub amplitude_scan: Vec<ScanPoint<T>>,
}

fn model_at<T: Real>(params: &DimensionlessParameterSet<T>, p: T) -> ModelSystem<T> {
    ModelSystem::dimensionless(&params.with_p(p))
}

fn residual_norm(f: &[f64; 3]) -> f64 {
    f.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Newton on the full right-hand side with the analytic Jacobian.
fn newton_equilibrium<T: Real>(sys: &ModelSystem<T>, guess: [T; 3]) -> Option<([T; 3], usize)> {
    let mut y = guess;
    for it in 0..30 {
        let f = sys.rhs(T::zero(), &y);
        let r = residual_norm(&f.map(to_f64));
        if r <= 1e-13 {
            return Some((y, it));
        }
        let lu = Lu::new(sys.jacobian(T::zero(), &y))?;
        let dx = lu.solve(&f);
        for i in 0..3 {
            y[i] = y[i] - dx[i];
        }
        if !y.iter().all(|v| v.is_finite()) || y[0] < T::zero() {
            return None;
        }
    }
    let r = residual_norm(&sys.rhs(T::zero(), &y).map(to_f64));
    (r <= 1e-11).then_some((y, 30))
}

/// Equilibrium from scratch: for each `c_t` take the `c ∈ (0, c_t)` that
/// balances the membrane fluxes (with `h = h∞(c)`), then root-find the `c`
/// equation in `c_t`. The balance has a root for every `c_t`; in the other
/// direction it only exists on a narrow band of `c`.
pub fn equilibrium_from_scratch<T: Real>(params: &DimensionlessParameterSet<T>, p: T) -> Result<State<T>> {
    let dps = params.with_p(p);
    let sys = ModelSystem::dimensionless(&dps);
    let sp = &dps.scaled;
    let balance = |ct: T| -> Option<T> {
        let g = |c: T| {
            let f = fluxes(&State::new(c, ct, h_inf(c, sp)), sp);
            f.j_in - f.j_pm
        };
        let grid = linspace(ct * lit(1e-6), ct, 200);
        let br = scan_brackets(g, &grid);
        br.first().and_then(|&(a, b)| brent(g, a, b, lit(1e-15)).ok())
    };
    let r = |ct: T| balance(ct).map_or(T::nan(), |c| sys.rhs(T::zero(), &[c, ct, h_inf(c, sp)])[0]);
    let grid = logspace(lit::<T>(1e-3), lit(50.0), 600);
    let (a, b) = *scan_brackets(r, &grid).first().ok_or_else(|| Error::NotFound(format!("no equilibrium at p = {}", to_f64(p))))?;
    let ct = brent(r, a, b, lit(1e-15))?;
    let c = balance(ct).ok_or_else(|| Error::NotFound("flux balance lost".into()))?;
    let (y, _) = newton_equilibrium(&sys, [c, ct, h_inf(c, sp)])
        .ok_or_else(|| Error::NewtonFailure(format!("equilibrium polish at p = {}", to_f64(p))))?;
    Ok(State::from_array(y))
}

fn branch_point<T: Real>(sys: &ModelSystem<T>, p: T, y: [T; 3]) -> BranchPoint<T> {
    let ev = eig3(&sys.jacobian(T::zero(), &y));
    let mut e: Vec<(T, T)> = ev.iter().map(|z| (z.re, z.im)).collect();
    e.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    BranchPoint { p, state: State::from_array(y), stable: e.iter().all(|z| z.0 < T::zero()), eigenvalues: [e[0], e[1], e[2]] }
}

fn leading_re<T: Real>(b: &BranchPoint<T>) -> T {
    b.eigenvalues[2].0
}

/// Natural-parameter continuation in `p` with Newton correction and step
/// halving; Hopf points by bisection on the sign of the leading real part.
pub fn equilibrium_branch<T: Real>(p_range: (T, T), params: &DimensionlessParameterSet<T>) -> Result<BifurcationDiagram<T>> {
    let (p0, p1) = p_range;
    if !(p0 > T::zero() && p1 > p0) {
        return Err(Error::Domain("p range must satisfy 0 < p0 < p1".into()));
    }
    let max_step = (p1 - p0) / lit(200.0);
    let min_step = lit::<T>(1e-9);
    let start = equilibrium_from_scratch(params, p0)?.to_array();
    let mut branch = vec![branch_point(&model_at(params, p0), p0, start)];
    let mut gaps = Vec::new();
    let mut step = max_step / lit(4.0);
    while branch.last().is_some_and(|b| b.p < p1) {
        let last = *branch.last().unwrap();
        let p = (last.p + step).min(p1);
        // secant predictor from the last two points
        let guess = match branch.len() {
            1 => last.state.to_array(),
            k => {
                let prev = branch[k - 2];
                let w = (p - last.p) / (last.p - prev.p);
                let (a, b) = (last.state.to_array(), prev.state.to_array());
                [a[0] + w * (a[0] - b[0]), a[1] + w * (a[1] - b[1]), a[2] + w * (a[2] - b[2])]
            }
        };
        let sys = model_at(params, p);
        match newton_equilibrium(&sys, guess) {
            Some((y, it)) => {
                branch.push(branch_point(&sys, p, y));
                if it <= 3 {
                    step = (step * lit(1.5)).min(max_step);
                }
            }
            None if step > min_step => step = step * lit(0.5),
            None => {
                // restart past the gap from scratch
                let q = (last.p + max_step).min(p1);
                let y = equilibrium_from_scratch(params, q)?.to_array();
                gaps.push((last.p, q));
                branch.push(branch_point(&model_at(params, q), q, y));
                step = max_step / lit(4.0);
            }
        }
    }
    let mut hopf_points = Vec::new();
    for w in branch.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (leading_re(&a) < T::zero()) != (leading_re(&b) < T::zero()) {
            hopf_points.push(bisect_hopf(params, a, b)?);
        }
    }
    Ok(BifurcationDiagram { branch, hopf_points, gaps, amplitude_scan: Vec::new() })
}

fn bisect_hopf<T: Real>(params: &DimensionlessParameterSet<T>, a: BranchPoint<T>, b: BranchPoint<T>) -> Result<HopfPoint<T>> {
    let (mut lo, mut hi) = (a, b);
    let sign_lo = leading_re(&lo) < T::zero();
    let tol = lit::<T>(1e-6);
    while hi.p - lo.p > tol {
        let p = (lo.p + hi.p) * lit(0.5);
        let w = (p - lo.p) / (hi.p - lo.p);
        let (ya, yb) = (lo.state.to_array(), hi.state.to_array());
        let guess = [ya[0] + w * (yb[0] - ya[0]), ya[1] + w * (yb[1] - ya[1]), ya[2] + w * (yb[2] - ya[2])];
        let sys = model_at(params, p);
        let (y, _) = newton_equilibrium(&sys, guess).ok_or_else(|| Error::NewtonFailure(format!("Hopf bisection at p = {}", to_f64(p))))?;
        let m = branch_point(&sys, p, y);
        if (leading_re(&m) < T::zero()) == sign_lo {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(HopfPoint { p: (lo.p + hi.p) * lit(0.5), bracket: hi.p - lo.p, frequency: lo.eigenvalues[2].1.abs(), destabilising: sign_lo })
}

/// Attractor and spike class at every `p`, in parallel; failures are
/// recorded per point.
pub fn amplitude_scan<T: Real>(p_grid: &[T], params: &DimensionlessParameterSet<T>, opts: &AttractorOptions<T>) -> Vec<ScanPoint<T>> {
    par_map(p_grid, |&p| match find_periodic_attractor(params, p, None, opts) {
        Ok(orbit) => {
            let d = decompose_spike(&orbit, params, None, None);
            ScanPoint {
                p,
                max_c: Some(orbit.max.c),
                min_c: Some(orbit.min.c),
                period: Some(orbit.period),
                class: d.class,
                error: d.diagnostic,
            }
        }
        Err(e) => ScanPoint { p, max_c: None, min_c: None, period: None, class: None, error: Some(e.to_string()) },
    })
}

/// The twelve scan values `0.03 … 0.1001`.
pub fn default_scan_grid<T: Real>() -> Vec<T> {
    linspace(lit(0.03), lit(0.1001), 12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0f64, 1.0, 2.0, 3.0];
        let y = x.map(|v| 2.0 / 3.0 * v - 1.0);
        let (k, b) = linear_fit(&x, &y);
        assert!((k - 2.0 / 3.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
    }
}
