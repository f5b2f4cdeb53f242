//! Regime R2 (`c = εC`) in the singular limit: the folded critical manifold
//! S3, its fold curve F and the reduced flow towards F.
//!
//! Everything here uses the leading-order fast equation
//! `f(C, c_t, h, 0) = A C⁴ c_t h − ν̃ C²/K_s² + B c_t² + 𝔍_IN(c_t)`
//! (see [`LeadingOrder`]); partial derivatives are closed forms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate_with_events, Direction, EventFunction, IntegratorConfig, OdeSystem};
use crate::model::{a1, LeadingOrder};
use crate::params::DimensionlessParameterSet;
use crate::roots::{brent, linspace, scan_brackets};
use crate::scalar::{lit, to_f64, Real};

/// Leading-order coefficients plus the `h` time constant `a₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct R2Model<T> {
    pub lo: LeadingOrder<T>,
    pub a1: T,
}

impl<T: Real> R2Model<T> {
    pub fn new(params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Self {
        Self { lo: LeadingOrder::new(&params.scaled, nu_tilde), a1: a1(&params.scaled) }
    }

    /// `𝔍⁻⁽⁰⁾(c_t) + 𝔍_IN⁽⁰⁾(c_t)`.
    fn source(&self, c_t: T) -> T {
        self.lo.serca_minus(c_t) + self.lo.influx(c_t)
    }

    pub fn varphi(&self, big_c: T, c_t: T) -> Result<T> {
        if !(big_c > T::zero() && c_t > T::zero()) {
            return Err(Error::Domain(format!("varphi needs C > 0 and c_t > 0 (C = {}, c_t = {})", to_f64(big_c), to_f64(c_t))));
        }
        Ok((self.lo.serca_plus(big_c) - self.source(c_t)) / (self.lo.a * big_c.powi(4) * c_t))
    }

    /// `λ = ∂f/∂C` on S3.
    pub fn lambda(&self, big_c: T, c_t: T) -> T {
        lit::<T>(2.0) / big_c * (self.lo.serca_plus(big_c) - lit::<T>(2.0) * self.source(c_t))
    }

    /// `C = φ(c_t)`, the fold of S3 over `c_t`.
    pub fn fold_c(&self, c_t: T) -> T {
        (lit::<T>(2.0) * self.lo.k_s * self.lo.k_s / self.lo.nu_tilde * self.source(c_t)).sqrt()
    }

    /// `∂f/∂h = A C⁴ c_t`.
    pub fn df_dh(&self, big_c: T, c_t: T) -> T {
        self.lo.a * big_c.powi(4) * c_t
    }

    /// `∂f/∂c_t = A C⁴ h + 2B c_t + 𝔍_IN'(c_t)`.
    pub fn df_dct(&self, big_c: T, c_t: T, h: T) -> T {
        self.lo.a * big_c.powi(4) * h + lit::<T>(2.0) * self.lo.b * c_t + self.lo.influx_slope(c_t)
    }

    /// `∂²f/∂C² = 12 A C² c_t h − 2ν̃/K_s²`.
    pub fn d2f_dc2(&self, big_c: T, c_t: T, h: T) -> T {
        lit::<T>(12.0) * self.lo.a * big_c * big_c * c_t * h
            - lit::<T>(2.0) * self.lo.nu_tilde / (self.lo.k_s * self.lo.k_s)
    }

    /// `∂f/∂c_t` restricted to F, in the reduced closed form
    /// `(3𝔍⁻ + α̂₀ + α̂₁K_e⁴(K_e⁴ − 3γ⁴c_t⁴)/(K_e⁴ + γ⁴c_t⁴)²)/c_t`.
    pub fn df_dct_on_fold(&self, c_t: T) -> T {
        let lo = &self.lo;
        let ke4 = lo.k_e.powi(4);
        let x = (lo.gamma * c_t).powi(4);
        let three = lit::<T>(3.0);
        (three * lo.serca_minus(c_t) + lo.alpha_hat_0 + lo.alpha_hat_1 * ke4 * (ke4 - three * x) / ((ke4 + x) * (ke4 + x)))
            / c_t
    }

    /// Right-hand side of the desingularised reduced problem.
    pub fn desing_rhs(&self, big_c: T, c_t: T) -> Result<[T; 2]> {
        let h = self.varphi(big_c, c_t)?;
        let j_in = self.lo.influx(c_t);
        let dc = self.df_dct(big_c, c_t, h) * j_in + self.df_dh(big_c, c_t) * (T::one() - h) * big_c.powi(4) / self.a1;
        Ok([dc, -self.lambda(big_c, c_t) * j_in])
    }
}

pub fn varphi<T: Real>(big_c: T, c_t: T, params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Result<T> {
    R2Model::new(params, nu_tilde).varphi(big_c, c_t)
}

pub fn lambda_r2<T: Real>(big_c: T, c_t: T, params: &DimensionlessParameterSet<T>, nu_tilde: T) -> T {
    R2Model::new(params, nu_tilde).lambda(big_c, c_t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    Attracting,
    Repelling,
    Fold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct S3Point<T> {
    pub big_c: T,
    pub c_t: T,
    pub h: T,
    pub sheet: Sheet,
}

pub fn s3_point<T: Real>(big_c: T, c_t: T, params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Result<S3Point<T>> {
    let m = R2Model::new(params, nu_tilde);
    let h = m.varphi(big_c, c_t)?;
    let fold = m.fold_c(c_t);
    let sheet = if (big_c - fold).abs() <= lit::<T>(1e-12) * fold {
        Sheet::Fold
    } else if big_c < fold {
        Sheet::Attracting
    } else {
        Sheet::Repelling
    };
    Ok(S3Point { big_c, c_t, h, sheet })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FoldPoint<T> {
    pub c_t: T,
    pub c_fold: T,
    pub h_fold: T,
    pub transversality: T,
    pub nondegeneracy: T,
    pub dfdct: T,
}

pub fn fold_point_at<T: Real>(c_t: T, params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Result<FoldPoint<T>> {
    fold_point_of(&R2Model::new(params, nu_tilde), c_t)
}

fn fold_point_of<T: Real>(m: &R2Model<T>, c_t: T) -> Result<FoldPoint<T>> {
    let c_fold = m.fold_c(c_t);
    let h_fold = m.varphi(c_fold, c_t)?;
    Ok(FoldPoint {
        c_t,
        c_fold,
        h_fold,
        transversality: m.df_dh(c_fold, c_t),
        nondegeneracy: m.d2f_dc2(c_fold, c_t, h_fold),
        dfdct: m.df_dct_on_fold(c_t),
    })
}

/// `n` evenly spaced fold points over `[lo, hi]`, `lo > 0`.
pub fn fold_curve<T: Real>(range: (T, T), n: usize, params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Result<Vec<FoldPoint<T>>> {
    let (lo, hi) = range;
    if !(lo > T::zero() && hi >= lo) {
        return Err(Error::Domain("fold curve range must lie in c_t > 0".into()));
    }
    let m = R2Model::new(params, nu_tilde);
    linspace(lo, hi, n.max(1)).into_iter().map(|ct| fold_point_of(&m, ct)).collect()
}

/// Smallest positive root of `∂f/∂c_t|_F` on `(0, 5]`.
pub fn folded_singularity_root<T: Real>(params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Result<T> {
    let m = R2Model::new(params, nu_tilde);
    let grid = linspace(lit::<T>(1e-3), lit(5.0), 5000);
    let mut g = |ct: T| m.df_dct_on_fold(ct);
    let (a, b) = *scan_brackets(&mut g, &grid)
        .first()
        .ok_or_else(|| Error::NotFound("no folded singularity in range c_t in (0, 5]".into()))?;
    brent(g, a, b, lit(1e-12))
}

pub fn desing_reduced_rhs_r2<T: Real>(big_c: T, c_t: T, params: &DimensionlessParameterSet<T>, nu_tilde: T) -> Result<(T, T)> {
    let [a, b] = R2Model::new(params, nu_tilde).desing_rhs(big_c, c_t)?;
    Ok((a, b))
}

impl<T: Real> OdeSystem<T, 2> for R2Model<T> {
    const AUTONOMOUS: bool = true;
    fn rhs(&self, _t: T, y: &[T; 2]) -> [T; 2] {
        self.desing_rhs(y[0], y[1]).unwrap_or([T::nan(); 2])
    }
}

/// `C − φ(c_t)` crossing zero upwards.
struct FoldArrival<T>(R2Model<T>);

impl<T: Real> EventFunction<T, 2> for FoldArrival<T> {
    fn value(&self, y: &[T; 2]) -> T {
        y[0] - self.0.fold_c(y[1])
    }
    fn direction(&self) -> Direction {
        Direction::Up
    }
    fn terminal(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedFlow<T> {
    /// `(τ, C, c_t)` in desingularised time.
    pub points: Vec<(T, T, T)>,
    pub reached_fold: bool,
    /// `C − φ(c_t)` at the last point.
    pub fold_residual: T,
}

/// Integrates the desingularised reduced flow (same orbits and direction as
/// the reduced flow on the attracting sheet) until it reaches F or `t_max`.
pub fn reduced_flow_r2<T: Real>(
    initial: (T, T),
    params: &DimensionlessParameterSet<T>,
    nu_tilde: T,
    t_max: T,
) -> Result<ReducedFlow<T>> {
    let m = R2Model::new(params, nu_tilde);
    let (c0, ct0) = initial;
    if !(c0 > T::zero() && ct0 > T::zero() && c0 < m.fold_c(ct0)) {
        return Err(Error::Domain("initial point must lie on the attracting sheet".into()));
    }
    let cfg = IntegratorConfig::default()
        .with_tolerances(lit(1e-10), lit(1e-11))
        .with_t_max(t_max)
        .with_max_step(t_max / lit(50.0));
    let ev = FoldArrival(m);
    let tr = integrate_with_events(&m, T::zero(), [c0, ct0], &cfg, &[&ev])?;
    let last = tr.last_state().unwrap_or([c0, ct0]);
    Ok(ReducedFlow {
        points: tr.times.iter().zip(&tr.states).map(|(t, y)| (*t, y[0], y[1])).collect(),
        reached_fold: !tr.events.is_empty(),
        fold_residual: last[0] - m.fold_c(last[1]),
    })
}

/// Starting points on the attracting sheet: `n_ct` values of `c_t` in
/// `[0.2, 1]`, and at each `n_frac` values of `C` spaced between the
/// `h = 0` point and the fold (exclusive).
pub fn sheet_fan<T: Real>(params: &DimensionlessParameterSet<T>, nu_tilde: T, n_ct: usize, n_frac: usize) -> Vec<(T, T)> {
    let m = R2Model::new(params, nu_tilde);
    let mut out = Vec::with_capacity(n_ct * n_frac);
    for ct in linspace(lit::<T>(0.2), T::one(), n_ct.max(2)) {
        // varphi vanishes where the pump balances SERCA leak and influx
        let c0 = m.lo.k_s * ((m.lo.serca_minus(ct) + m.lo.influx(ct)) / nu_tilde).sqrt();
        let cf = m.fold_c(ct);
        for k in 0..n_frac {
            let fr = lit::<T>((k as f64 + 0.5) / n_frac as f64);
            out.push((c0 + fr * (cf - c0), ct));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (DimensionlessParameterSet<f64>, f64) {
        let d = DimensionlessParameterSet::<f64>::table2();
        let nt = d.scaled.v_s / d.scaled.k_tau.powi(2);
        (d, nt)
    }

    #[test]
    fn varphi_is_on_the_manifold() {
        let (d, nt) = setup();
        let m = R2Model::new(&d, nt);
        for &(cc, ct) in &[(0.5, 0.3), (2.0, 0.8), (4.0, 1.5)] {
            let h = m.varphi(cc, ct).unwrap();
            assert!(m.lo.f(cc, ct, h).abs() < 1e-10 * (1.0 + m.lo.serca_plus(cc)));
        }
    }

    #[test]
    fn fold_has_zero_eigenvalue() {
        let (d, nt) = setup();
        let m = R2Model::new(&d, nt);
        for ct in [0.1, 0.5, 1.0] {
            assert!(m.lambda(m.fold_c(ct), ct).abs() < 1e-10);
        }
    }

    #[test]
    fn origin_is_outside_the_domain() {
        let (d, nt) = setup();
        assert!(varphi(0.0, 0.5, &d, nt).is_err());
        assert!(varphi(1.0, 0.0, &d, nt).is_err());
    }
}
