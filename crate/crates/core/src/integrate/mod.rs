//! Adaptive one-step integrators with dense output and event location.
//!
//! Two methods share one driver: a linearly implicit Rosenbrock 4(3) scheme
//! (Shampine's coefficients) for the stiff model, and Dormand–Prince 5(4) as an
//! explicit reference. Dense output is cubic Hermite on accepted steps.

mod dopri;
mod events;
pub mod periodic;
mod rosenbrock;

use serde::{Deserialize, Serialize};

pub use events::{crossings, poincare_return_map, Crossing, Direction, EventFunction, Section, SectionSpec, Coordinate};
pub use periodic::{find_periodic_attractor, AttractorOptions, OrbitSummary};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// A first-order system `y' = f(t, y)` of fixed dimension `N`.
pub trait OdeSystem<T: Real, const N: usize> {
    /// `true` skips the `∂f/∂t` evaluation in the Rosenbrock stages.
    const AUTONOMOUS: bool = false;

    fn rhs(&self, t: T, y: &[T; N]) -> [T; N];

    /// `∂f/∂y`; defaults to central differences with step `1e-6·max(1, |y_j|)`.
    fn jacobian(&self, t: T, y: &[T; N]) -> [[T; N]; N] {
        fd_jacobian(|yy| self.rhs(t, yy), y)
    }

    /// `∂f/∂t`; central difference by default.
    fn dfdt(&self, t: T, y: &[T; N]) -> [T; N] {
        if Self::AUTONOMOUS {
            return [T::zero(); N];
        }
        let h = lit::<T>(1e-6) * t.abs().max(T::one());
        let a = self.rhs(t + h, y);
        let b = self.rhs(t - h, y);
        let mut out = [T::zero(); N];
        for i in 0..N {
            out[i] = (a[i] - b[i]) / (h + h);
        }
        out
    }
}

impl<T: Real, const N: usize, S: OdeSystem<T, N> + ?Sized> OdeSystem<T, N> for &S {
    const AUTONOMOUS: bool = S::AUTONOMOUS;
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N] {
        (**self).rhs(t, y)
    }
    fn jacobian(&self, t: T, y: &[T; N]) -> [[T; N]; N] {
        (**self).jacobian(t, y)
    }
    fn dfdt(&self, t: T, y: &[T; N]) -> [T; N] {
        (**self).dfdt(t, y)
    }
}

/// Wraps a closure `f(t, &y)` as an [`OdeSystem`].
pub struct FnSystem<F>(pub F);

impl<T: Real, const N: usize, F: Fn(T, &[T; N]) -> [T; N]> OdeSystem<T, N> for FnSystem<F> {
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N] {
        (self.0)(t, y)
    }
}

/// Central-difference Jacobian with step `1e-6·max(1, |x_j|)`.
pub fn fd_jacobian<T: Real, const N: usize, F: Fn(&[T; N]) -> [T; N]>(f: F, y: &[T; N]) -> [[T; N]; N] {
    let mut jac = [[T::zero(); N]; N];
    for j in 0..N {
        let h = lit::<T>(1e-6) * y[j].abs().max(T::one());
        let mut yp = *y;
        let mut ym = *y;
        yp[j] = yp[j] + h;
        ym[j] = ym[j] - h;
        let (fp, fm) = (f(&yp), f(&ym));
        for i in 0..N {
            jac[i][j] = (fp[i] - fm[i]) / (h + h);
        }
    }
    jac
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Rosenbrock 4(3), L-stable enough for the ε-separated model.
    ImplicitStiff,
    /// Dormand–Prince 5(4).
    ExplicitReference,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rtol: T,
    pub atol: T,
    /// Integration horizon measured from the initial time.
    pub t_max: T,
    /// Upper bound on accepted step sizes. Must stay well below the period of
    /// the slow focus of the layer problem, otherwise large damped steps can
    /// settle onto an unstable equilibrium.
    pub max_step: T,
    pub initial_step: Option<T>,
    pub method: Method,
    pub max_steps: usize,
    /// Keep every accepted step in the returned trajectory.
    pub record: bool,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            rtol: lit(1e-8),
            atol: lit(1e-10),
            t_max: lit(1e6),
            max_step: lit(10.0),
            initial_step: None,
            method: Method::ImplicitStiff,
            max_steps: 50_000_000,
            record: true,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_t_max(mut self, t_max: T) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_max_step(mut self, max_step: T) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > T::zero() && self.atol > T::zero() && self.max_step > T::zero() && self.t_max >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter { name: "integrator".into(), reason: "tolerances and max_step must be > 0".into() })
        }
    }
}

/// One accepted step, enough for cubic Hermite interpolation.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord<T, const N: usize> {
    pub t0: T,
    pub y0: [T; N],
    pub f0: [T; N],
    pub t1: T,
    pub y1: [T; N],
    pub f1: [T; N],
}

impl<T: Real, const N: usize> StepRecord<T, N> {
    pub fn interpolate(&self, t: T) -> [T; N] {
        hermite(self.t0, &self.y0, &self.f0, self.t1, &self.y1, &self.f1, t)
    }
}

pub(crate) fn hermite<T: Real, const N: usize>(t0: T, y0: &[T; N], f0: &[T; N], t1: T, y1: &[T; N], f1: &[T; N], t: T) -> [T; N] {
    let h = t1 - t0;
    if h == T::zero() {
        return *y0;
    }
    let s = (t - t0) / h;
    let (two, three) = (lit::<T>(2.0), lit::<T>(3.0));
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    let mut out = [T::zero(); N];
    for i in 0..N {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

/// An event hit during integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventHit<T, const N: usize> {
    pub t: T,
    pub id: usize,
    #[serde(with = "arr")]
    pub state: [T; N],
}

mod arr {
    use serde::Serializer;
    pub fn serialize<T: serde::Serialize, S: Serializer, const N: usize>(v: &[T; N], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }
}

/// Accepted steps of an integration plus located events.
#[derive(Clone, Debug, Default)]
pub struct Trajectory<T, const N: usize> {
    pub times: Vec<T>,
    pub states: Vec<[T; N]>,
    /// Right-hand side at each sample (Hermite dense output).
    pub derivatives: Vec<[T; N]>,
    pub events: Vec<EventHit<T, N>>,
}

impl<T: Real, const N: usize> Trajectory<T, N> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<[T; N]> {
        self.states.last().copied()
    }

    pub(crate) fn push(&mut self, t: T, y: [T; N], f: [T; N]) {
        self.times.push(t);
        self.states.push(y);
        self.derivatives.push(f);
    }

    /// Dense-output evaluation at `t` within the recorded span.
    pub fn interpolate(&self, t: T) -> Option<[T; N]> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let k = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => return Some(self.states[k]),
            Err(k) => k,
        };
        let (a, b) = (k - 1, k);
        Some(hermite(
            self.times[a],
            &self.states[a],
            &self.derivatives[a],
            self.times[b],
            &self.states[b],
            &self.derivatives[b],
            t,
        ))
    }

    /// `n` equally spaced dense-output samples over `[t_start, t_end]`.
    pub fn resample(&self, t_start: T, t_end: T, n: usize) -> Vec<(T, [T; N])> {
        let mut out = Vec::with_capacity(n);
        let mut k = 1usize;
        for i in 0..n {
            let t = t_start + (t_end - t_start) * lit::<T>(i as f64) / lit((n.max(2) - 1) as f64);
            while k + 1 < self.times.len() && self.times[k] < t {
                k += 1;
            }
            let a = k.saturating_sub(1);
            let y = if self.times.len() < 2 {
                self.states[0]
            } else {
                hermite(self.times[a], &self.states[a], &self.derivatives[a], self.times[k], &self.states[k], &self.derivatives[k], t)
            };
            out.push((t, y));
        }
        out
    }

    /// CSV with header `t,<names...>`; numbers with 17 significant digits.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut s = String::from("t");
        for n in names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (t, y) in self.times.iter().zip(&self.states) {
            s.push_str(&fmt17(to_f64(*t)));
            for v in y {
                s.push(',');
                s.push_str(&fmt17(to_f64(*v)));
            }
            s.push('\n');
        }
        s
    }

    /// Events as CSV `t,id,<names...>`.
    pub fn events_csv(&self, names: &[&str]) -> String {
        let mut s = String::from("t,id");
        for n in names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for e in &self.events {
            s.push_str(&format!("{},{}", fmt17(to_f64(e.t)), e.id));
            for v in &e.state {
                s.push(',');
                s.push_str(&fmt17(to_f64(*v)));
            }
            s.push('\n');
        }
        s
    }
}

/// Formats with 17 significant digits (round-trips every `f64`).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Step-by-step driver. Holds the current point, step size and statistics.
pub struct Solver<'a, T: Real, S: OdeSystem<T, N>, const N: usize> {
    sys: &'a S,
    cfg: IntegratorConfig<T>,
    t: T,
    y: [T; N],
    f: [T; N],
    h: T,
    last_rejected: bool,
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl<'a, T: Real, S: OdeSystem<T, N>, const N: usize> Solver<'a, T, S, N> {
    pub fn new(sys: &'a S, t0: T, y0: [T; N], cfg: IntegratorConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let f = sys.rhs(t0, &y0);
        let mut s = Self { sys, cfg, t: t0, y: y0, f, h: T::zero(), last_rejected: false, steps: 0, rejected: 0, rhs_evals: 1 };
        s.h = match cfg.initial_step {
            Some(h) => h.min(cfg.max_step),
            None => s.initial_step(),
        };
        Ok(s)
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn y(&self) -> [T; N] {
        self.y
    }

    pub fn f(&self) -> [T; N] {
        self.f
    }

    pub fn config(&self) -> &IntegratorConfig<T> {
        &self.cfg
    }

    /// Moves the solver to a new point (keeps the current step size).
    pub fn reset(&mut self, t: T, y: [T; N]) {
        self.t = t;
        self.y = y;
        self.f = self.sys.rhs(t, &y);
        self.rhs_evals += 1;
    }

    fn initial_step(&self) -> T {
        let mut d0 = T::zero();
        let mut d1 = T::zero();
        for i in 0..N {
            let sc = self.cfg.atol + self.cfg.rtol * self.y[i].abs();
            d0 = d0.max((self.y[i] / sc).abs());
            d1 = d1.max((self.f[i] / sc).abs());
        }
        let h = if d0 < lit(1e-5) || d1 < lit(1e-5) { lit(1e-6) } else { lit::<T>(0.01) * d0 / d1 };
        h.min(self.cfg.max_step).max(lit(1e-12))
    }

    fn error_norm(&self, y0: &[T; N], y1: &[T; N], err: &[T; N]) -> T {
        let mut m = T::zero();
        for i in 0..N {
            let sc = self.cfg.atol + self.cfg.rtol * y0[i].abs().max(y1[i].abs());
            m = m.max((err[i] / sc).abs());
        }
        m
    }

    /// One trial step of size `h` from `(t, y)` with derivative `f`.
    /// Returns the new state and the embedded error estimate.
    pub(crate) fn attempt(&mut self, t: T, y: &[T; N], f: &[T; N], h: T) -> Option<([T; N], [T; N])> {
        match self.cfg.method {
            Method::ImplicitStiff => {
                self.rhs_evals += 3;
                rosenbrock::step(self.sys, t, y, f, h)
            }
            Method::ExplicitReference => {
                self.rhs_evals += 6;
                Some(dopri::step(self.sys, t, y, f, h))
            }
        }
    }

    fn failure(&self, reason: impl Into<String>) -> Error {
        Error::IntegrationFailure { t: to_f64(self.t), state: self.y.iter().map(|v| to_f64(*v)).collect(), reason: reason.into() }
    }

    /// Takes one accepted step, never passing `t_stop`.
    pub fn step(&mut self, t_stop: T) -> Result<StepRecord<T, N>> {
        let order_exp = match self.cfg.method {
            Method::ImplicitStiff => lit::<T>(0.25),
            Method::ExplicitReference => lit::<T>(0.2),
        };
        let floor = lit::<T>(1e-14) * self.t.abs().max(T::one());
        loop {
            if self.steps + self.rejected >= self.cfg.max_steps {
                return Err(self.failure("maximum number of steps exceeded"));
            }
            let remaining = t_stop - self.t;
            let mut h = self.h.min(self.cfg.max_step);
            let hits_end = h >= remaining;
            if hits_end {
                h = remaining;
            }
            if h < floor && !hits_end {
                return Err(self.failure(format!("step size collapsed to {:e}", to_f64(h))));
            }
            let (t, y, f) = (self.t, self.y, self.f);
            let trial = self.attempt(t, &y, &f, h);
            let (y1, err) = match trial {
                Some((y1, e)) if y1.iter().all(|v| v.is_finite()) => (y1, e),
                _ => {
                    self.rejected += 1;
                    self.h = h * lit(0.25);
                    self.last_rejected = true;
                    continue;
                }
            };
            let en = self.error_norm(&y, &y1, &err);
            if en <= T::one() {
                let t1 = if hits_end { t_stop } else { t + h };
                let f1 = self.sys.rhs(t1, &y1);
                self.rhs_evals += 1;
                let fac = if en == T::zero() { lit(5.0) } else { lit::<T>(0.9) * en.powf(-order_exp) };
                let fac = fac.min(if self.last_rejected { T::one() } else { lit(5.0) }).max(lit(0.2));
                if !hits_end || fac < T::one() {
                    self.h = h * fac;
                }
                self.last_rejected = false;
                self.steps += 1;
                let rec = StepRecord { t0: t, y0: y, f0: f, t1, y1, f1 };
                self.t = t1;
                self.y = y1;
                self.f = f1;
                return Ok(rec);
            }
            self.rejected += 1;
            self.last_rejected = true;
            let fac = (lit::<T>(0.9) * en.powf(-order_exp)).max(lit(0.1)).min(lit(0.9));
            self.h = h * fac;
            if self.h < floor {
                return Err(self.failure(format!("step size collapsed to {:e}", to_f64(self.h))));
            }
        }
    }
}

/// Integrates over `[t0, t0 + cfg.t_max]`, recording accepted steps.
pub fn integrate<T: Real, S: OdeSystem<T, N>, const N: usize>(
    sys: &S,
    t0: T,
    y0: [T; N],
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T, N>> {
    integrate_with_events(sys, t0, y0, cfg, &[])
}

/// As [`integrate`], also locating events; a terminal event ends the run at
/// the event point.
pub fn integrate_with_events<T: Real, S: OdeSystem<T, N>, const N: usize>(
    sys: &S,
    t0: T,
    y0: [T; N],
    cfg: &IntegratorConfig<T>,
    events: &[&dyn EventFunction<T, N>],
) -> Result<Trajectory<T, N>> {
    let mut solver = Solver::new(sys, t0, y0, *cfg)?;
    let t_end = t0 + cfg.t_max;
    let mut traj = Trajectory::default();
    traj.push(t0, y0, solver.f());
    while solver.t() < t_end {
        let rec = solver.step(t_end)?;
        let mut stop = None;
        for (id, ev) in events.iter().enumerate() {
            if let Some((te, ye)) = events::locate(&mut solver, &rec, *ev) {
                traj.events.push(EventHit { t: te, id, state: ye });
                if ev.terminal() && stop.map_or(true, |(ts, _)| te < ts) {
                    stop = Some((te, ye));
                }
            }
        }
        if let Some((te, ye)) = stop {
            traj.events.retain(|e| e.t <= te);
            let fe = sys.rhs(te, &ye);
            traj.push(te, ye, fe);
            return Ok(traj);
        }
        if cfg.record || solver.t() >= t_end {
            traj.push(rec.t1, rec.y1, rec.f1);
        }
    }
    Ok(traj)
}
