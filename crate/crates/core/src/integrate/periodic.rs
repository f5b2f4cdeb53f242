//! Periodic-attractor extraction from return maps of the full model.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{
    crossings, integrate, integrate_with_events, poincare_return_map, Coordinate, Direction, IntegratorConfig, Section, SectionSpec, Trajectory,
};
use crate::linalg::{eig2, solve};
use crate::params::DimensionlessParameterSet;
use crate::scalar::{lit, to_f64, Real};
use crate::state::State;
use crate::system::ModelSystem;

#[derive(Clone, Copy, Debug)]
pub struct AttractorOptions<T> {
    pub integrator: IntegratorConfig<T>,
    pub initial: State<T>,
    /// Length of the exploratory run used for amplitude, section and period estimates.
    pub probe_time: T,
    /// The probe is doubled up to this many times when it holds too few cycles.
    pub probe_doublings: u32,
    /// Budget of return-map evaluations.
    pub max_crossings: usize,
    /// Budget of integrated time spent iterating the return map; slow cycles
    /// hit this before `max_crossings`.
    pub map_time: T,
    /// Successive return points must agree to this (max-norm, section coordinates).
    pub tol: T,
    /// Oscillations with a smaller `c` range count as an equilibrium.
    pub min_amplitude: T,
    /// Use Newton steps on `P(u) − u` when plain iteration contracts slowly.
    pub newton: bool,
    /// Relative spread (of the return points, scaled by the orbit's range) up to
    /// which a non-converging return map still counts as one attractor.
    pub cluster_tol: T,
}

impl<T: Real> Default for AttractorOptions<T> {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            initial: State::new(lit(0.05), lit(0.5), lit(0.8)),
            probe_time: lit(3.0e6),
            probe_doublings: 2,
            max_crossings: 200,
            map_time: lit(6.0e7),
            tol: lit(1e-6),
            min_amplitude: lit(1e-4),
            newton: true,
            cluster_tol: lit(0.05),
        }
    }
}

/// How the return map settled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence<T> {
    /// Successive return points agree to the requested tolerance.
    Periodic { residual: T },
    /// The return points keep scattering in a small cluster. Happens for
    /// broad spikes, whose exit from the slow plateau after the delayed Hopf
    /// passage amplifies round-off; the period is then an average.
    NoiseLimited {
        /// Largest scatter of the section coordinates, relative to the orbit range.
        spread: T,
        /// Standard deviation of the return times.
        period_std: T,
        returns: usize,
    },
}

/// One period of a periodic (or noise-limited periodic) attractor.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitSummary<T> {
    pub p: T,
    /// Return time; the mean return time for a noise-limited attractor.
    pub period: T,
    pub convergence: Convergence<T>,
    pub section: SectionSpec<T>,
    /// Fixed point of the return map.
    pub crossing: State<T>,
    pub min: State<T>,
    pub max: State<T>,
    /// Floquet multipliers of the return map (section coordinates).
    pub multipliers: Option<[(T, T); 2]>,
    /// Return-map evaluations spent after the transient.
    pub crossings_used: usize,
    #[serde(skip)]
    pub orbit: Trajectory<T, 3>,
}

impl<T: Real> OrbitSummary<T> {
    /// `n` uniform samples over one period starting at the crossing.
    pub fn samples(&self, n: usize) -> Vec<(T, State<T>)> {
        let t0 = self.orbit.times[0];
        let t1 = *self.orbit.times.last().unwrap();
        self.orbit.resample(t0, t1, n).into_iter().map(|(t, y)| (t - t0, State::from_array(y))).collect()
    }

    /// Fraction of the period with `c > level`.
    pub fn duty_cycle(&self, level: T, n: usize) -> T {
        let s = self.samples(n);
        let above = s.iter().filter(|(_, x)| x.c > level).count();
        lit::<T>(above as f64) / lit(s.len() as f64)
    }
}

fn others(index: usize) -> [usize; 2] {
    match index {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

struct ReturnMap<'a, T: Real> {
    sys: &'a ModelSystem<T>,
    section: Section<T>,
    cfg: IntegratorConfig<T>,
    evals: usize,
}

impl<'a, T: Real> ReturnMap<'a, T> {
    fn embed(&self, u: [T; 2]) -> [T; 3] {
        let mut y = [T::zero(); 3];
        y[self.section.index] = self.section.level;
        let o = others(self.section.index);
        y[o[0]] = u[0];
        y[o[1]] = u[1];
        y
    }

    fn project(&self, y: &[T; 3]) -> [T; 2] {
        let o = others(self.section.index);
        [y[o[0]], y[o[1]]]
    }

    /// Returns `(P(u), return time)`.
    fn apply(&mut self, u: [T; 2]) -> Result<([T; 2], T)> {
        self.evals += 1;
        let hit = poincare_return_map(self.sys, &self.section, T::zero(), self.embed(u), 1, &self.cfg)?;
        Ok((self.project(&hit[0].state), hit[0].t))
    }

    fn jacobian(&mut self, u: [T; 2], pu: [T; 2]) -> Result<[[T; 2]; 2]> {
        let mut jac = [[T::zero(); 2]; 2];
        for j in 0..2 {
            let h = lit::<T>(1e-5) * u[j].abs().max(lit(0.1));
            let mut up = u;
            up[j] = up[j] + h;
            let (pp, _) = self.apply(up)?;
            for i in 0..2 {
                jac[i][j] = (pp[i] - pu[i]) / h;
            }
        }
        Ok(jac)
    }
}

fn dist<T: Real>(a: &[T; 2], b: &[T; 2]) -> T {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Finds the periodic attractor of the dimensionless model at IP₃ level `p`.
///
/// A probe run estimates the `c` range and period; without an explicit
/// `section` the upward crossing of the mid-range `c` level is used. After
/// discarding `max(10 period estimates, 5 crossings)` the return map is
/// iterated (with optional Newton acceleration) until successive points agree
/// to `opts.tol`.
pub fn find_periodic_attractor<T: Real>(
    params: &DimensionlessParameterSet<T>,
    p: T,
    section: Option<SectionSpec<T>>,
    opts: &AttractorOptions<T>,
) -> Result<OrbitSummary<T>> {
    let dps = params.with_p(p);
    dps.validate()?;
    let sys = ModelSystem::dimensionless(&dps);
    let cfg = opts.integrator;

    let mut probe_time = opts.probe_time;
    let mut doublings = 0;
    let (probe, recent, spec, period_est, max_gap) = loop {
        let probe = integrate(&sys, T::zero(), opts.initial.to_array(), &cfg.with_t_max(probe_time))?;
        let half = probe_time * lit(0.5);
        // amplitude from the last fifth only, so a slowly decaying transient is
        // not mistaken for an oscillation
        let recent: Vec<usize> = (0..probe.len()).filter(|&k| probe.times[k] >= probe_time * lit(0.8)).collect();
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for &k in &recent {
            lo = lo.min(probe.states[k][0]);
            hi = hi.max(probe.states[k][0]);
        }
        if !(hi - lo > opts.min_amplitude) {
            return Err(Error::NoAttractor(format!(
                "oscillation amplitude {:e} below threshold at p = {}; trajectory settles to an equilibrium",
                to_f64(hi - lo),
                to_f64(p)
            )));
        }
        let choice = match section {
            Some(spec) => {
                let t: Vec<T> = crossings(&probe, &spec.section()).into_iter().map(|h| h.0).filter(|&t| t >= half).collect();
                (t.len() >= 2).then(|| {
                    let mean = (t[t.len() - 1] - t[0]) / lit((t.len() - 1) as f64);
                    let max = t.windows(2).fold(T::zero(), |a, w| a.max(w[1] - w[0]));
                    SectionChoice { spec, mean_gap: mean, max_gap: max }
                })
            }
            None => auto_section(&probe, half, &recent),
        };
        match choice {
            Some(ch) => break (probe, recent, ch.spec, ch.mean_gap, ch.max_gap),
            None if doublings < opts.probe_doublings => {
                doublings += 1;
                probe_time = probe_time * lit(2.0);
            }
            None => {
                return Err(Error::NoAttractor(format!(
                    "too few section crossings within t = {:e} at p = {}",
                    to_f64(probe_time),
                    to_f64(p)
                )))
            }
        }
    };
    let sec = spec.section();
    let hits = crossings(&probe, &sec);

    // transient: max(10 period estimates, 5 crossings), measured from t = 0
    let transient = (period_est * lit(10.0)).max(hits.get(4).map_or(T::zero(), |h| h.0));
    let (t_last, y_last) = *hits.last().unwrap();
    let mut map_cfg = cfg;
    map_cfg.record = false;
    map_cfg.t_max = (period_est * lit(10.0)).max(max_gap * lit(3.0));
    let mut rm = ReturnMap { sys: &sys, section: sec, cfg: map_cfg, evals: 0 };
    let mut u = rm.project(&y_last);
    if t_last < transient {
        let extra = ((transient - t_last) / period_est).ceil().to_usize().unwrap_or(1).max(1);
        let h = poincare_return_map(&sys, &sec, t_last, y_last, extra, &map_cfg)?;
        u = rm.project(&h.last().unwrap().state);
    }

    let mut plain_since_newton = 0usize;
    let mut newton_failures = 0usize;
    let mut last_jac = None;
    let mut converged = None;
    let mut agree = 0usize;
    let mut history: Vec<([T; 2], T)> = Vec::new();
    let mut spent = T::zero();
    while rm.evals < opts.max_crossings && spent < opts.map_time {
        let (pu, tau) = rm.apply(u)?;
        spent = spent + tau;
        history.push((pu, tau));
        let d = dist(&pu, &u);
        // two agreements in a row, so a noisy map cannot pass by coincidence
        if d <= opts.tol {
            agree += 1;
            if agree >= 2 {
                converged = Some((pu, Convergence::Periodic { residual: d }));
                break;
            }
            u = pu;
            continue;
        }
        agree = 0;
        plain_since_newton += 1;
        if opts.newton && newton_failures < 2 && plain_since_newton >= 3 && rm.evals + 3 <= opts.max_crossings {
            plain_since_newton = 0;
            let jac = rm.jacobian(u, pu)?;
            last_jac = Some(jac);
            let a = [[jac[0][0] - T::one(), jac[0][1]], [jac[1][0], jac[1][1] - T::one()]];
            let g = [pu[0] - u[0], pu[1] - u[1]];
            if let Some(dx) = solve(a, &g) {
                let cand = [u[0] - dx[0], u[1] - dx[1]];
                if cand.iter().all(|v| v.is_finite()) {
                    if let Ok((pc, tc)) = rm.apply(cand) {
                        if dist(&pc, &cand) < d * lit(0.1) {
                            history.clear();
                            history.push((pc, tc));
                            u = pc;
                            continue;
                        }
                    }
                }
            }
            newton_failures += 1;
        }
        u = pu;
    }
    let (ustar, convergence) = match converged {
        Some(c) => c,
        None => noise_limited(&history, probe_range(&probe, &recent, &rm), opts, p)?,
    };
    let mean_return = match convergence {
        Convergence::NoiseLimited { .. } => {
            Some(history.iter().map(|h| h.1).fold(T::zero(), |a, b| a + b) / lit(history.len() as f64))
        }
        _ => None,
    };

    let mut one = cfg;
    one.t_max = map_cfg.t_max;
    let stop = Section { terminal: true, ..sec };
    let start = rm.embed(ustar);
    let mut orbit = integrate_with_events(&sys, T::zero(), start, &one, &[&stop])?;
    if orbit.events.is_empty() {
        return Err(Error::Timeout { t_max: to_f64(one.t_max) });
    }
    orbit.events.clear();
    let period = mean_return.unwrap_or(*orbit.times.last().unwrap());

    // multipliers of a noise-limited map are dominated by the amplified round-off
    let jac = match (convergence, last_jac) {
        (Convergence::NoiseLimited { .. }, _) => None,
        (_, Some(j)) if opts.newton => Some(j),
        _ => rm.jacobian(ustar, rm.project(orbit.states.last().unwrap())).ok(),
    };
    let multipliers = jac.map(|j| {
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let e: [Complex<T>; 2] = eig2(tr, det);
        [(e[0].re, e[0].im), (e[1].re, e[1].im)]
    });

    let mut summary = OrbitSummary {
        p,
        period,
        convergence,
        section: spec,
        crossing: State::from_array(start),
        min: State::from_array([T::infinity(); 3]),
        max: State::from_array([T::neg_infinity(); 3]),
        multipliers,
        crossings_used: rm.evals,
        orbit,
    };
    let (mut mn, mut mx) = ([T::infinity(); 3], [T::neg_infinity(); 3]);
    for (_, s) in summary.samples(20_000) {
        let a = s.to_array();
        for i in 0..3 {
            mn[i] = mn[i].min(a[i]);
            mx[i] = mx[i].max(a[i]);
        }
    }
    summary.min = State::from_array(mn);
    summary.max = State::from_array(mx);
    Ok(summary)
}

fn probe_range<T: Real>(probe: &Trajectory<T, 3>, tail: &[usize], rm: &ReturnMap<'_, T>) -> [T; 2] {
    let o = others(rm.section.index);
    let mut r = [T::zero(); 2];
    for (k, &i) in o.iter().enumerate() {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for &j in tail {
            lo = lo.min(probe.states[j][i]);
            hi = hi.max(probe.states[j][i]);
        }
        r[k] = hi - lo;
    }
    r
}

/// Accepts a scattering return map as one attractor if its points stay in a
/// cluster small compared with the orbit itself.
fn noise_limited<T: Real>(
    history: &[([T; 2], T)],
    range: [T; 2],
    opts: &AttractorOptions<T>,
    p: T,
) -> Result<([T; 2], Convergence<T>)> {
    let fail = || {
        Error::NoAttractor(format!(
            "return map did not settle within {} crossings at p = {} (budget {} crossings, t = {:e})",
            history.len(),
            to_f64(p),
            opts.max_crossings,
            to_f64(opts.map_time)
        ))
    };
    if history.len() < 20 {
        return Err(fail());
    }
    let mut spread = T::zero();
    for k in 0..2 {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for (u, _) in history {
            lo = lo.min(u[k]);
            hi = hi.max(u[k]);
        }
        spread = spread.max((hi - lo) / range[k].max(T::min_positive_value()));
    }
    let n = lit::<T>(history.len() as f64);
    let mean = history.iter().fold(T::zero(), |a, h| a + h.1) / n;
    let var = history.iter().fold(T::zero(), |a, h| a + (h.1 - mean).powi(2)) / (n - T::one());
    let period_std = var.sqrt();
    if spread > opts.cluster_tol || period_std > mean * opts.cluster_tol {
        return Err(fail());
    }
    let last = history.last().unwrap().0;
    Ok((last, Convergence::NoiseLimited { spread, period_std, returns: history.len() }))
}

struct SectionChoice<T> {
    spec: SectionSpec<T>,
    mean_gap: T,
    max_gap: T,
}

/// Picks the section whose crossings in the probe tail are the most evenly
/// spaced. A level cut by post-spike ripples, or by every spike of a
/// mixed-mode burst, gives a mix of short and long return times and is passed
/// over. Candidates are upward `c` levels (high first: ripples stay low),
/// then downward and upward `c_t` levels; `c_t` tracks a burst's envelope.
/// The first candidate with near-constant return times is taken outright.
fn auto_section<T: Real>(probe: &Trajectory<T, 3>, half: T, recent: &[usize]) -> Option<SectionChoice<T>> {
    let range = |i: usize| {
        recent.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &k| {
            (lo.min(probe.states[k][i]), hi.max(probe.states[k][i]))
        })
    };
    let fracs = [0.8, 0.7, 0.9, 0.6, 0.5, 0.4, 0.3, 0.2];
    let mut cands = Vec::new();
    for (coord, dir) in [(Coordinate::C, Direction::Up), (Coordinate::Ct, Direction::Down), (Coordinate::Ct, Direction::Up)] {
        let (lo, hi) = range(coord.index());
        if !(hi > lo) {
            continue;
        }
        for f in fracs {
            cands.push(SectionSpec::new(coord, lo + (hi - lo) * lit(f), dir));
        }
    }
    let mut best: Option<(T, SectionChoice<T>)> = None;
    for spec in cands {
        let t: Vec<T> = crossings(probe, &spec.section()).into_iter().map(|h| h.0).filter(|&t| t >= half).collect();
        if t.len() < 3 {
            continue;
        }
        let gaps: Vec<T> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let n = lit::<T>(gaps.len() as f64);
        let mean_gap = gaps.iter().fold(T::zero(), |a, &g| a + g) / n;
        let max_gap = gaps.iter().fold(T::zero(), |a, &g| a.max(g));
        // crossings must recur through the whole tail, not bunch in one episode
        let end = *probe.times.last().unwrap();
        if (t[0] - half).max(end - t[t.len() - 1]) > max_gap * lit(1.2) {
            continue;
        }
        let var = gaps.iter().fold(T::zero(), |a, &g| a + (g - mean_gap).powi(2)) / n;
        let cv = var.sqrt() / mean_gap;
        let choice = SectionChoice { spec, mean_gap, max_gap };
        if cv < lit(0.01) {
            return Some(choice);
        }
        if best.as_ref().map_or(true, |b| cv < b.0 * lit(0.5)) {
            best = Some((cv, choice));
        }
    }
    best.map(|b| b.1)
}
