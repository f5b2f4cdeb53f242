//! The planar R1 layer problem at frozen `c_t`: equilibria, saddle manifolds,
//! the unstable cycle born at the subcritical Hopf point, and the homoclinic
//! orbit that ends that cycle family.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{
    integrate, integrate_with_events, poincare_return_map, Direction, EventFunction, IntegratorConfig, OdeSystem, Section,
    Trajectory,
};
use crate::params::DimensionlessParameterSet;
use crate::r1::{h_inf, layer_jacobian, layer_rhs_r1, psi};
use crate::roots::{brent, logspace, scan_brackets};
use crate::scalar::{lit, to_f64, Real};
use crate::state::State;

/// `(c, h)` layer flow at fixed `c_t`; `backward` reverses time.
#[derive(Clone, Copy, Debug)]
pub struct LayerSystem<'a, T: Real> {
    pub params: &'a DimensionlessParameterSet<T>,
    pub nu: T,
    pub c_t: T,
    pub backward: bool,
}

impl<'a, T: Real> LayerSystem<'a, T> {
    pub fn new(params: &'a DimensionlessParameterSet<T>, nu: T, c_t: T) -> Self {
        Self { params, nu, c_t, backward: false }
    }

    pub fn reversed(self) -> Self {
        Self { backward: !self.backward, ..self }
    }

    fn sign(&self) -> T {
        if self.backward {
            -T::one()
        } else {
            T::one()
        }
    }
}

impl<T: Real> OdeSystem<T, 2> for LayerSystem<'_, T> {
    const AUTONOMOUS: bool = true;

    fn rhs(&self, _t: T, y: &[T; 2]) -> [T; 2] {
        let d = layer_rhs_r1(&State::new(y[0], self.c_t, y[1]), self.params, self.nu);
        let s = self.sign();
        [s * d.c, s * d.h]
    }

    fn jacobian(&self, _t: T, y: &[T; 2]) -> [[T; 2]; 2] {
        let m = layer_jacobian(&State::new(y[0], self.c_t, y[1]), self.params, self.nu).matrix;
        let s = self.sign();
        [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]]
    }
}

/// All `c` in `(1e-3, 1)` with `ψ(c) = c_t`, ascending.
pub fn slice_equilibria<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, c_t: T) -> Vec<T> {
    let grid = logspace(lit::<T>(1e-3), T::one(), 2000);
    let mut f = |c: T| psi(c, params, nu).map_or(T::nan(), |v| v - c_t);
    scan_brackets(&mut f, &grid)
        .into_iter()
        .filter_map(|(a, b)| brent(&mut f, a, b, lit(1e-14)).ok())
        .collect()
}

/// The saddle `q_s` (lower) and the upper equilibrium `q_f` of a slice.
pub fn slice_pair<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, c_t: T) -> Result<([T; 2], [T; 2])> {
    let eq = slice_equilibria(params, nu, c_t);
    if eq.len() < 2 {
        return Err(Error::SliceEmpty { c_t: to_f64(c_t) });
    }
    let p = &params.scaled;
    let (cs, cf) = (eq[0], eq[1]);
    Ok(([cs, h_inf(cs, p)], [cf, h_inf(cf, p)]))
}

pub(crate) fn default_layer_config<T: Real>() -> IntegratorConfig<T> {
    IntegratorConfig::default().with_tolerances(lit(1e-10), lit(1e-12)).with_max_step(lit(50.0))
}

/// Eigen-directions of the saddle: `(λ_u, v_u, λ_s, v_s)`, unit vectors with
/// `v_u` pointing to larger `c` and `v_s` pointing to smaller `h`.
pub fn saddle_directions<T: Real>(sys: &LayerSystem<'_, T>, q_s: &[T; 2]) -> Result<(T, [T; 2], T, [T; 2])> {
    let j = LayerSystem { backward: false, ..*sys }.jacobian(T::zero(), q_s);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det >= T::zero() {
        return Err(Error::Domain(format!("equilibrium at c = {} is not a saddle", to_f64(q_s[0]))));
    }
    let disc = (tr * tr - lit::<T>(4.0) * det).sqrt();
    let half = lit::<T>(0.5);
    let (lu, ls) = ((tr + disc) * half, (tr - disc) * half);
    let dir = |l: T| {
        // (A − λ) v = 0 from whichever row is better conditioned
        let v = if j[0][1].abs() >= (j[1][0]).abs() { [j[0][1], l - j[0][0]] } else { [l - j[1][1], j[1][0]] };
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / n, v[1] / n]
    };
    let mut vu = dir(lu);
    let mut vs = dir(ls);
    if vu[0] < T::zero() {
        vu = [-vu[0], -vu[1]];
    }
    if vs[1] > T::zero() {
        vs = [-vs[0], -vs[1]];
    }
    Ok((lu, vu, ls, vs))
}

const MANIFOLD_OFFSET: f64 = 1e-6;
const MANIFOLD_TIME: f64 = 5e6;

/// Terminal guards that stop manifold integrations leaving the physical box.
fn box_guards<T: Real>() -> [Section<T>; 3] {
    [
        Section { index: 0, level: T::one(), direction: Direction::Up, terminal: true },
        Section { index: 1, level: lit(-0.5), direction: Direction::Down, terminal: true },
        Section { index: 1, level: lit(2.0), direction: Direction::Up, terminal: true },
    ]
}

fn run_until<T: Real>(sys: &LayerSystem<'_, T>, y0: [T; 2], t_max: T, stop: Option<Section<T>>) -> Trajectory<T, 2> {
    let cfg = default_layer_config::<T>().with_t_max(t_max);
    let guards = box_guards::<T>();
    let mut ev: Vec<&dyn EventFunction<T, 2>> = guards.iter().map(|g| g as &dyn EventFunction<T, 2>).collect();
    if let Some(s) = stop.as_ref() {
        ev.push(s);
    }
    match integrate_with_events(sys, T::zero(), y0, &cfg, &ev) {
        Ok(tr) => tr,
        // backward runs off to infinity in finite time: keep what we have
        Err(Error::IntegrationFailure { .. }) => {
            let mut tr = Trajectory::default();
            tr.push(T::zero(), y0, sys.rhs(T::zero(), &y0));
            tr
        }
        Err(_) => Trajectory::default(),
    }
}

/// Signed separation of the saddle's unstable and stable manifolds on a slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Separation<T> {
    pub c_t: T,
    pub c_s: T,
    /// The transversal `c = section_c`, midway between the saddle and `q_f`.
    pub section_c: T,
    /// `h` where the returning unstable branch crosses the section leftwards;
    /// `None` when the branch is captured by `q_f` without coming back.
    pub h_unstable: Option<T>,
    /// `h` where the lower stable branch (backward time) first reaches the section.
    pub h_stable: Option<T>,
    /// `h_unstable − h_stable`; `+1` when the unstable branch does not return.
    pub value: T,
}

pub fn manifold_separation<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, c_t: T) -> Result<Separation<T>> {
    let (qs, qf) = slice_pair(params, nu, c_t)?;
    let sys = LayerSystem::new(params, nu, c_t);
    let (_, vu, _, vs) = saddle_directions(&sys, &qs)?;
    let d = lit::<T>(MANIFOLD_OFFSET);
    let cv = (qs[0] + qf[0]) * lit(0.5);
    let t_max = lit::<T>(MANIFOLD_TIME);

    let leftwards = Section { index: 0, level: cv, direction: Direction::Down, terminal: true };
    let up = run_until(&sys, [qs[0] + d * vu[0], qs[1] + d * vu[1]], t_max, Some(leftwards));
    let h_unstable = up.events.iter().find(|e| e.id == 3).map(|e| e.state[1]);

    let rightwards = Section { index: 0, level: cv, direction: Direction::Up, terminal: true };
    let back = run_until(&sys.reversed(), [qs[0] + d * vs[0], qs[1] + d * vs[1]], t_max, Some(rightwards));
    let h_stable = back.events.iter().find(|e| e.id == 3).map(|e| e.state[1]);

    let value = match (h_unstable, h_stable) {
        (None, _) => T::one(),
        (Some(hu), Some(hs)) => hu - hs,
        (Some(_), None) => {
            return Err(Error::NotFound(format!("stable manifold misses the section at c_t = {}", to_f64(c_t))));
        }
    };
    Ok(Separation { c_t, c_s: qs[0], section_c: cv, h_unstable, h_stable, value })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Homoclinic<T> {
    pub c_t_hom: T,
    pub c_s: T,
}

/// Bisects the manifold separation over `c_t ∈ [ψ(c_h), 0.6]`.
pub fn homoclinic_locator<T: Real>(params: &DimensionlessParameterSet<T>, nu: T) -> Result<Homoclinic<T>> {
    let c_h = crate::r1::hopf_point(params, nu)?;
    let lo = psi(c_h, params, nu)?;
    homoclinic_in(params, nu, lo, lit(0.6), lit(1e-6))
}

pub fn homoclinic_in<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, lo: T, hi: T, tol: T) -> Result<Homoclinic<T>> {
    let sep = |ct: T| manifold_separation(params, nu, ct).map(|s| s.value);
    // coarse scan for the first sign change; endpoints may fail (no crossing)
    let n = 12;
    let mut prev: Option<(T, T)> = None;
    let mut bracket = None;
    for k in 0..=n {
        let ct = lo + (hi - lo) * lit::<T>(k as f64 / n as f64);
        let Ok(v) = sep(ct) else { continue };
        if let Some((cp, vp)) = prev {
            if vp.signum() != v.signum() {
                bracket = Some((cp, vp, ct));
                break;
            }
        }
        prev = Some((ct, v));
    }
    let (mut a, va, mut b) = bracket.ok_or_else(|| {
        Error::NotFound(format!("homoclinic: no sign change of the separation on [{}, {}]", to_f64(lo), to_f64(hi)))
    })?;
    while b - a > tol {
        let m = (a + b) * lit(0.5);
        let vm = sep(m)?;
        if vm.signum() == va.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let c_t_hom = (a + b) * lit(0.5);
    let (qs, _) = slice_pair(params, nu, c_t_hom)?;
    Ok(Homoclinic { c_t_hom, c_s: qs[0] })
}

/// Periodic orbit of the layer slice surrounding `q_f`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCycle<T> {
    pub period: T,
    /// Crossing of the cycle with the ray `c = c(q_f)`, `h < h(q_f)`.
    pub anchor: [T; 2],
    pub c_range: (T, T),
    pub points: Vec<[T; 2]>,
}

/// Unstable cycle around `q_f`, found as the attracting cycle of the
/// time-reversed slice flow by iterating its return map to the lower half of
/// the line `c = c(q_f)`. `None` if the reversed flow falls back onto `q_f`
/// or leaves the neighbourhood of the saddle/focus pair.
pub fn unstable_cycle<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, c_t: T, samples: usize) -> Result<Option<LayerCycle<T>>> {
    let (qs, qf) = slice_pair(params, nu, c_t)?;
    let back = LayerSystem::new(params, nu, c_t).reversed();
    // start just off the focus; the reversed flow carries it out onto the cycle
    let mut h = qf[1] - lit::<T>(1e-3) * qf[1].max(lit(1e-3));
    let sec = Section { index: 0, level: qf[0], direction: Direction::Both, terminal: false };
    let cfg = default_layer_config::<T>().with_t_max(lit(2e6));
    let mut last_period = T::nan();
    let mut prev_h = T::nan();
    for _ in 0..400 {
        let hits = match poincare_return_map(&back, &sec, T::zero(), [qf[0], h], 2, &cfg) {
            Ok(v) => v,
            Err(_) => return Ok(None),
        };
        // two crossings of the full line per turn, the second back on the lower half
        let hit = hits[1];
        if hit.state[1] >= qf[1] || hits[0].state[1] <= qf[1] {
            return Ok(None);
        }
        let h_new = hit.state[1];
        let period = hit.t;
        if (qf[1] - h_new).abs() < lit::<T>(1e-7) {
            return Ok(None);
        }
        let moved = (h_new - h).abs();
        if moved < lit(1e-10) || (moved < lit(1e-8) && (prev_h - h_new).abs() < lit::<T>(2.0) * moved) {
            last_period = period;
            h = h_new;
            break;
        }
        prev_h = h;
        h = h_new;
    }
    if !last_period.is_finite() {
        return Ok(None);
    }
    let tr = integrate(&back, T::zero(), [qf[0], h], &cfg.with_t_max(last_period))?;
    let pts: Vec<[T; 2]> = tr.resample(T::zero(), last_period, samples.max(2)).into_iter().map(|(_, y)| y).collect();
    // range over every step: the fast right-hand excursion is short in time
    let lo = tr.states.iter().map(|y| y[0]).fold(T::infinity(), |a, b| a.min(b));
    let hi = tr.states.iter().map(|y| y[0]).fold(T::neg_infinity(), |a, b| a.max(b));
    if lo <= qs[0] {
        // swept past the saddle: not a cycle of the focus
        return Ok(None);
    }
    Ok(Some(LayerCycle { period: last_period, anchor: [qf[0], h], c_range: (lo, hi), points: pts }))
}

/// Subcritical iff an unstable cycle surrounds `q_f` just on the stable side
/// of the Hopf point.
pub fn hopf_criticality<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, c_h: T) -> Result<bool> {
    let ct_h = psi(c_h, params, nu)?;
    for off in [2e-3, 5e-3, 1e-2] {
        if unstable_cycle(params, nu, ct_h + lit(off), 8)?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldBranchCurve<T> {
    /// `unstable+`, `unstable-`, `stable+` or `stable-` (sign of the `c`-offset).
    pub label: &'static str,
    pub points: Vec<[T; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePortrait<T> {
    pub c_t: T,
    pub q_f: [T; 2],
    pub q_s: [T; 2],
    pub saddle_eigenvalues: (T, T),
    pub manifolds: Vec<ManifoldBranchCurve<T>>,
    pub cycle: Option<LayerCycle<T>>,
}

/// Equilibria, the four saddle separatrices (each resampled to `samples`
/// points) and the unstable cycle, if any, of the slice at `c_t`.
pub fn layer_phase_portrait<T: Real>(
    c_t: T,
    params: &DimensionlessParameterSet<T>,
    nu: T,
    samples: usize,
    t_span: T,
) -> Result<PhasePortrait<T>> {
    let (qs, qf) = slice_pair(params, nu, c_t)?;
    let (qs, qf) = (polish(params, nu, c_t, qs), polish(params, nu, c_t, qf));
    let sys = LayerSystem::new(params, nu, c_t);
    let (lu, vu, ls, vs) = saddle_directions(&sys, &qs)?;
    let d = lit::<T>(MANIFOLD_OFFSET);
    let mut manifolds = Vec::new();
    for (label, v, s) in [("unstable+", vu, sys), ("stable+", vs, sys.reversed())] {
        for (sign, tag) in [(T::one(), 0), (-T::one(), 1)] {
            let y0 = [qs[0] + sign * d * v[0], qs[1] + sign * d * v[1]];
            let floor = Section { index: 0, level: lit(1e-6), direction: Direction::Down, terminal: true };
            let tr = run_until(&s, y0, t_span, Some(floor));
            let end = *tr.times.last().unwrap_or(&T::zero());
            let points = tr.resample(T::zero(), end, samples.max(2)).into_iter().map(|(_, y)| y).collect();
            let label = match (label, tag) {
                ("unstable+", 0) => "unstable+",
                ("unstable+", _) => "unstable-",
                (_, 0) => if v[0] >= T::zero() { "stable+" } else { "stable-" },
                _ => if v[0] >= T::zero() { "stable-" } else { "stable+" },
            };
            manifolds.push(ManifoldBranchCurve { label, points });
        }
    }
    let cycle = unstable_cycle(params, nu, c_t, samples)?;
    Ok(PhasePortrait { c_t, q_f: qf, q_s: qs, saddle_eigenvalues: (lu, ls), manifolds, cycle })
}

/// One Newton polish of a slice equilibrium on the full `(c, h)` system.
fn polish<T: Real>(params: &DimensionlessParameterSet<T>, nu: T, c_t: T, y: [T; 2]) -> [T; 2] {
    let sys = LayerSystem::new(params, nu, c_t);
    let f = sys.rhs(T::zero(), &y);
    let j = sys.jacobian(T::zero(), &y);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == T::zero() {
        return y;
    }
    let dx = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
    let dy = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
    [y[0] - dx, y[1] - dy]
}
