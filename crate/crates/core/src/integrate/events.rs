//! Event functions, section crossings and Poincaré return maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::brent;
use crate::scalar::{lit, to_f64, Real};

use super::{EventHit, IntegratorConfig, OdeSystem, Solver, StepRecord, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Increasing through the level.
    Up,
    /// Decreasing through the level.
    Down,
    Both,
}

impl Direction {
    fn triggers<T: Real>(self, g0: T, g1: T) -> bool {
        let z = T::zero();
        let up = g0 < z && g1 >= z;
        let down = g0 > z && g1 <= z;
        match self {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Both => up || down,
        }
    }
}

/// Scalar event function `g(y)`; an event fires when `g` changes sign.
pub trait EventFunction<T: Real, const N: usize> {
    fn value(&self, y: &[T; N]) -> T;
    fn direction(&self) -> Direction {
        Direction::Both
    }
    fn terminal(&self) -> bool {
        false
    }
}

/// Hyperplane `y[index] = level`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Section<T> {
    pub index: usize,
    pub level: T,
    pub direction: Direction,
    pub terminal: bool,
}

impl<T: Real, const N: usize> EventFunction<T, N> for Section<T> {
    fn value(&self, y: &[T; N]) -> T {
        y[self.index] - self.level
    }
    fn direction(&self) -> Direction {
        self.direction
    }
    fn terminal(&self) -> bool {
        self.terminal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    #[serde(rename = "c")]
    C,
    /// Rescaled calcium `C`; same slot as `c` in a rescaled state.
    #[serde(rename = "C")]
    BigC,
    #[serde(rename = "c_t")]
    Ct,
    #[serde(rename = "h")]
    H,
}

impl Coordinate {
    pub fn index(self) -> usize {
        match self {
            Coordinate::C | Coordinate::BigC => 0,
            Coordinate::Ct => 1,
            Coordinate::H => 2,
        }
    }
}

/// A coordinate section of the model phase space (level `χ` or `χ⁻¹`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec<T> {
    pub coordinate: Coordinate,
    pub level: T,
    pub direction: Direction,
}

impl<T: Real> SectionSpec<T> {
    pub fn new(coordinate: Coordinate, level: T, direction: Direction) -> Self {
        Self { coordinate, level, direction }
    }

    pub fn section(&self) -> Section<T> {
        Section { index: self.coordinate.index(), level: self.level, direction: self.direction, terminal: false }
    }
}

/// Locates an event inside an accepted step.
///
/// The Hermite interpolant gives a first estimate; the crossing is then
/// re-solved on genuine integrator sub-steps from the step's left end until
/// the event residual is below `atol`.
pub(super) fn locate<T: Real, S: OdeSystem<T, N>, const N: usize>(
    solver: &mut Solver<'_, T, S, N>,
    rec: &StepRecord<T, N>,
    ev: &dyn EventFunction<T, N>,
) -> Option<(T, [T; N])> {
    let g0 = ev.value(&rec.y0);
    let g1 = ev.value(&rec.y1);
    if !ev.direction().triggers(g0, g1) {
        return None;
    }
    if g1 == T::zero() {
        return Some((rec.t1, rec.y1));
    }
    let span = rec.t1 - rec.t0;
    let xtol = lit::<T>(4.0) * T::epsilon() * rec.t1.abs().max(span);
    let th = brent(|t| ev.value(&rec.interpolate(t)), rec.t0, rec.t1, xtol).unwrap_or(rec.t1);
    let atol = solver.config().atol;

    let mut substep = |t: T| -> Option<[T; N]> {
        if t <= rec.t0 {
            return Some(rec.y0);
        }
        solver.attempt(rec.t0, &rec.y0, &rec.f0, t - rec.t0).map(|(y, _)| y)
    };
    let yh = substep(th)?;
    let gh = ev.value(&yh);
    if gh.abs() <= atol * lit(0.1) {
        return Some((th, yh));
    }
    let (a, b) = if (gh > T::zero()) == (g0 > T::zero()) { (th, rec.t1) } else { (rec.t0, th) };
    let mut best = (th, yh, gh.abs());
    let t = brent(
        |t| {
            let y = match substep(t) {
                Some(y) => y,
                None => return T::nan(),
            };
            let g = ev.value(&y);
            if g.abs() < best.2 {
                best = (t, y, g.abs());
            }
            g
        },
        a,
        b,
        xtol,
    )
    .ok();
    match t {
        Some(t) if best.0 == t => Some((best.0, best.1)),
        Some(t) => substep(t).map(|y| (t, y)).or(Some((best.0, best.1))),
        None => Some((best.0, best.1)),
    }
}

/// A located section crossing.
pub type Crossing<T, const N: usize> = EventHit<T, N>;

/// Hermite-located crossings of a recorded trajectory (no re-integration).
pub fn crossings<T: Real, const N: usize>(traj: &Trajectory<T, N>, section: &Section<T>) -> Vec<(T, [T; N])> {
    let mut out = Vec::new();
    for k in 1..traj.len() {
        let g0 = traj.states[k - 1][section.index] - section.level;
        let g1 = traj.states[k][section.index] - section.level;
        if !section.direction.triggers(g0, g1) {
            continue;
        }
        let rec = StepRecord {
            t0: traj.times[k - 1],
            y0: traj.states[k - 1],
            f0: traj.derivatives[k - 1],
            t1: traj.times[k],
            y1: traj.states[k],
            f1: traj.derivatives[k],
        };
        let xtol = lit::<T>(4.0) * T::epsilon() * rec.t1.abs().max(T::one());
        if let Ok(t) = brent(|t| rec.interpolate(t)[section.index] - section.level, rec.t0, rec.t1, xtol) {
            out.push((t, rec.interpolate(t)));
        }
    }
    out
}

/// The next `n_crossings` crossings of `section` starting from `start`.
///
/// Each crossing must occur within `cfg.t_max` of the previous one (or of
/// the start), otherwise a timeout error is returned. A crossing at the very
/// start point is ignored.
pub fn poincare_return_map<T: Real, S: OdeSystem<T, N>, const N: usize>(
    sys: &S,
    section: &Section<T>,
    t0: T,
    start: [T; N],
    n_crossings: usize,
    cfg: &IntegratorConfig<T>,
) -> Result<Vec<Crossing<T, N>>> {
    let mut solver = Solver::new(sys, t0, start, *cfg)?;
    let mut out: Vec<Crossing<T, N>> = Vec::with_capacity(n_crossings);
    let mut t_last = t0;
    let min_gap = lit::<T>(1e-9) * t0.abs().max(T::one());
    while out.len() < n_crossings {
        let deadline = t_last + cfg.t_max;
        if solver.t() >= deadline {
            return Err(Error::Timeout { t_max: to_f64(cfg.t_max) });
        }
        let rec = solver.step(deadline)?;
        if let Some((t, y)) = locate(&mut solver, &rec, section) {
            if t - t0 > min_gap {
                // snap onto the section (moves the point by at most atol) so the
                // restarted integration cannot re-detect the same crossing
                let mut y = y;
                y[section.index] = section.level;
                out.push(EventHit { t, id: 0, state: y });
                t_last = t;
                // restart exactly at the polished crossing
                solver.reset(t, y);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate_with_events, FnSystem};

    #[test]
    fn harmonic_oscillator_crossings() {
        let sys = FnSystem(|_t: f64, y: &[f64; 2]| [y[1], -y[0]]);
        let sec = Section { index: 0, level: 0.5, direction: Direction::Up, terminal: false };
        let cfg = IntegratorConfig::default().with_t_max(20.0).with_max_step(0.5);
        let hits = poincare_return_map(&sys, &sec, 0.0, [0.0, 1.0], 3, &cfg).unwrap();
        let t_first = (0.5f64).asin();
        for (k, h) in hits.iter().enumerate() {
            let expect = t_first + 2.0 * std::f64::consts::PI * k as f64;
            assert!((h.t - expect).abs() < 1e-7, "{} vs {}", h.t, expect);
            assert!((h.state[0] - 0.5).abs() <= 1e-10);
        }
    }

    #[test]
    fn unreachable_level_times_out() {
        let sys = FnSystem(|_t: f64, y: &[f64; 2]| [y[1], -y[0]]);
        let sec = Section { index: 0, level: 2.0, direction: Direction::Both, terminal: false };
        let cfg = IntegratorConfig::default().with_t_max(30.0);
        assert!(matches!(poincare_return_map(&sys, &sec, 0.0, [0.0, 1.0], 1, &cfg), Err(Error::Timeout { .. })));
    }

    #[test]
    fn terminal_event_stops() {
        let sys = FnSystem(|_t: f64, _y: &[f64; 1]| [1.0]);
        let sec = Section { index: 0, level: 2.5, direction: Direction::Up, terminal: true };
        let cfg = IntegratorConfig::default().with_t_max(10.0);
        let tr = integrate_with_events(&sys, 0.0, [0.0], &cfg, &[&sec]).unwrap();
        assert!((tr.times.last().unwrap() - 2.5).abs() < 1e-10);
        assert_eq!(tr.events.len(), 1);
    }
}
