//! Flux functions and right-hand sides of the three-variable model.
//!
//! All formulations share one vector field
//!
//! ```text
//! c'   = J_IPR − w₊ J⁺ + w_s (J⁻ + δ (J_IN − J_PM))
//! c_t' = w_s δ (J_IN − J_PM)
//! h'   = (h∞ − h)(c⁴ + e) / (K_τ⁴ τ_max)
//! ```
//!
//! with weights `(w₊, w_s, e) = (1, 1, K_τ⁴)` for the original model and
//! `(ν/V_s, ϵ/K_τ⁴, ϵ)` for the R1 form. The R1 scaled fluxes therefore carry
//! the factor δ inside `𝔍_IN = δ J_IN / K_τ⁴` and `𝔍_PM = δ J_PM / K_τ⁴`, which
//! is what makes the R1 form coincide with the original at `ϵ = K_τ⁴, ν = V_s`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hill::{hill_minus, hill_plus, hill_plus_slope};
use crate::params::{DimensionlessParameterSet, ParameterSet};
use crate::scalar::{lit, Real};
use crate::state::{RescaledState, State};

pub type Matrix3<T> = [[T; 3]; 3];

/// Which unit system / scaling a flux or Jacobian refers to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Formulation<T> {
    Dimensional,
    Dimensionless,
    /// R1 scaling with small parameters `ϵ` (epsilon) and `ν` (nu).
    R1 { epsilon: T, nu: T },
}

/// Anything that carries a flat [`ParameterSet`] in the units of its formulation.
pub trait ModelParams<T: Real> {
    fn raw(&self) -> &ParameterSet<T>;
}

impl<T: Real> ModelParams<T> for ParameterSet<T> {
    fn raw(&self) -> &ParameterSet<T> {
        self
    }
}

impl<T: Real> ModelParams<T> for DimensionlessParameterSet<T> {
    fn raw(&self) -> &ParameterSet<T> {
        &self.scaled
    }
}

/// Every flux and auxiliary function at one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxValues<T> {
    pub j_ipr: T,
    pub j_serca_plus: T,
    pub j_serca_minus: T,
    pub j_in: T,
    pub j_pm: T,
    pub tau_h: T,
    pub h_inf: T,
    pub p_o: T,
    pub alpha: T,
    pub beta: T,
    pub phi_c: T,
    pub phi_p: T,
    pub phi_pdown: T,
}

/// Weights of the shared vector field (see module docs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhsWeights<T> {
    pub serca_plus: T,
    pub slow: T,
    pub h_floor: T,
}

impl<T: Real> RhsWeights<T> {
    pub fn original(p: &ParameterSet<T>) -> Self {
        Self { serca_plus: T::one(), slow: T::one(), h_floor: p.k_tau.powi(4) }
    }

    pub fn r1(p: &ParameterSet<T>, epsilon: T, nu: T) -> Self {
        Self { serca_plus: nu / p.v_s, slow: epsilon / p.k_tau.powi(4), h_floor: epsilon }
    }

    pub fn for_formulation(p: &ParameterSet<T>, f: Formulation<T>) -> Self {
        match f {
            Formulation::Dimensional | Formulation::Dimensionless => Self::original(p),
            Formulation::R1 { epsilon, nu } => Self::r1(p, epsilon, nu),
        }
    }
}

/// Open probability `P_o` with its partial derivatives in `c` and `h`.
#[derive(Clone, Copy, Debug)]
pub struct OpenProbability<T> {
    pub value: T,
    pub dc: T,
    pub dh: T,
}

pub fn open_probability<T: Real>(c: T, h: T, p: &ParameterSet<T>) -> OpenProbability<T> {
    let (phi_p, phi_pd) = (p.phi_p(), p.phi_pdown());
    let phi_c = hill_plus(c, p.k_c, 4);
    let dphi_c = hill_plus_slope(c, p.k_c, 4);
    let h_inf = hill_minus(c, p.k_h, 4);
    let dh_inf = -hill_plus_slope(c, p.k_h, 4);
    let beta = phi_c * phi_p * h;
    let alpha = phi_pd * (T::one() - phi_c * h_inf);
    let d = (T::one() + p.k_beta) * beta + p.k_beta * alpha;
    let beta_c = dphi_c * phi_p * h;
    let beta_h = phi_c * phi_p;
    let alpha_c = -phi_pd * (dphi_c * h_inf + phi_c * dh_inf);
    let d2 = d * d;
    OpenProbability {
        value: beta / d,
        dc: p.k_beta * (alpha * beta_c - beta * alpha_c) / d2,
        dh: p.k_beta * alpha * beta_h / d2,
    }
}

/// Raw flux formulas, evaluated in whatever units `p` is expressed in.
pub fn fluxes<T: Real>(s: &State<T>, p: &ParameterSet<T>) -> FluxValues<T> {
    let State { c, c_t, h } = *s;
    let one = T::one();
    let g = p.gamma;
    let phi_c = hill_plus(c, p.k_c, 4);
    let phi_p = p.phi_p();
    let phi_pdown = p.phi_pdown();
    let h_inf = hill_minus(c, p.k_h, 4);
    let beta = phi_c * phi_p * h;
    let alpha = phi_pdown * (one - phi_c * h_inf);
    let p_o = beta / (beta + p.k_beta * (beta + alpha));
    let w = c_t - c;
    let c2ks = c * c + p.k_s * p.k_s;
    FluxValues {
        j_ipr: g * p.k_f * p_o * (c_t - (one + g.recip()) * c),
        j_serca_plus: p.v_s * c * c / c2ks,
        j_serca_minus: p.v_s * p.k * g * g * w * w / c2ks,
        j_in: p.alpha_0 + p.alpha_1 * hill_minus(g * w, p.k_e, 4),
        j_pm: p.v_pm * hill_plus(c, p.k_pm, 2),
        tau_h: p.tau_max * hill_minus(c, p.k_tau, 4),
        h_inf,
        p_o,
        alpha,
        beta,
        phi_c,
        phi_p,
        phi_pdown,
    }
}

/// Fluxes of the chosen formulation. `R1` divides `J⁺` by `V_s` and
/// `J⁻` by `K_τ⁴`; the membrane fluxes become `δ J_IN / K_τ⁴` and `δ J_PM / K_τ⁴`.
pub fn eval_fluxes<T: Real, P: ModelParams<T>>(
    state: &State<T>,
    params: &P,
    formulation: Formulation<T>,
) -> Result<FluxValues<T>> {
    let p = params.raw();
    let c4 = state.c.powi(4);
    let guards = [
        c4 + p.k_c.powi(4),
        c4 + p.k_h.powi(4),
        c4 + p.k_tau.powi(4),
        state.c * state.c + p.k_s * p.k_s,
        state.c * state.c + p.k_pm * p.k_pm,
        p.p * p.p + p.k_p * p.k_p,
    ];
    if guards.iter().any(|d| !(*d > T::zero())) {
        return Err(Error::Domain("vanishing flux denominator".into()));
    }
    let mut f = fluxes(state, p);
    if let Formulation::R1 { .. } = formulation {
        let kt4 = p.k_tau.powi(4);
        f.j_serca_plus = f.j_serca_plus / p.v_s;
        f.j_serca_minus = f.j_serca_minus / kt4;
        f.j_in = p.delta * f.j_in / kt4;
        f.j_pm = p.delta * f.j_pm / kt4;
    }
    Ok(f)
}

/// Shared vector field with explicit weights.
pub fn rhs_weighted<T: Real>(s: &State<T>, p: &ParameterSet<T>, w: &RhsWeights<T>) -> State<T> {
    let f = fluxes(s, p);
    let net = p.delta * (f.j_in - f.j_pm);
    let a1 = p.k_tau.powi(4) * p.tau_max;
    State {
        c: f.j_ipr - w.serca_plus * f.j_serca_plus + w.slow * (f.j_serca_minus + net),
        c_t: w.slow * net,
        h: (f.h_inf - s.h) * (s.c.powi(4) + w.h_floor) / a1,
    }
}

/// Analytic Jacobian of [`rhs_weighted`]; rows `(c, c_t, h)`, columns `(c, c_t, h)`.
pub fn jacobian_weighted<T: Real>(s: &State<T>, p: &ParameterSet<T>, w: &RhsWeights<T>) -> Matrix3<T> {
    let State { c, c_t, h } = *s;
    let one = T::one();
    let two = lit::<T>(2.0);
    let g = p.gamma;
    let po = open_probability(c, h, p);
    let u = c_t - (one + g.recip()) * c;
    let gk = g * p.k_f;
    let ipr_c = gk * (po.dc * u - po.value * (one + g.recip()));
    let ipr_ct = gk * po.value;
    let ipr_h = gk * po.dh * u;

    let ks2 = p.k_s * p.k_s;
    let c2ks = c * c + ks2;
    let plus_c = p.v_s * two * c * ks2 / (c2ks * c2ks);
    let wdiff = c_t - c;
    let vkg = p.v_s * p.k * g * g;
    let minus_ct = vkg * two * wdiff / c2ks;
    let minus_c = -minus_ct - vkg * wdiff * wdiff * two * c / (c2ks * c2ks);

    // d/dw of the influx Hill term at w = γ (c_t − c)
    let din_dw = -p.alpha_1 * hill_plus_slope(g * wdiff, p.k_e, 4) * g;
    let in_c = -din_dw;
    let in_ct = din_dw;
    let pm_c = p.v_pm * hill_plus_slope(c, p.k_pm, 2);

    let net_c = p.delta * (in_c - pm_c);
    let net_ct = p.delta * in_ct;

    let a1 = p.k_tau.powi(4) * p.tau_max;
    let h_inf = hill_minus(c, p.k_h, 4);
    let dh_inf = -hill_plus_slope(c, p.k_h, 4);
    let floor = c.powi(4) + w.h_floor;
    let four_c3 = lit::<T>(4.0) * c.powi(3);

    [
        [
            ipr_c - w.serca_plus * plus_c + w.slow * (minus_c + net_c),
            ipr_ct + w.slow * (minus_ct + net_ct),
            ipr_h,
        ],
        [w.slow * net_c, w.slow * net_ct, T::zero()],
        [(dh_inf * floor + (h_inf - h) * four_c3) / a1, T::zero(), -floor / a1],
    ]
}

/// Dimensional vector field (µM/s, µM/s, 1/s).
pub fn rhs_dimensional<T: Real>(state: &State<T>, params: &ParameterSet<T>) -> State<T> {
    rhs_weighted(state, params, &RhsWeights::original(params))
}

/// Dimensionless vector field in barred units.
pub fn rhs_dimensionless<T: Real>(state: &State<T>, params: &DimensionlessParameterSet<T>) -> State<T> {
    rhs_weighted(state, &params.scaled, &RhsWeights::original(&params.scaled))
}

/// R1 vector field. `epsilon = nu = 0` gives the R1 layer problem.
pub fn rhs_r1<T: Real>(state: &State<T>, params: &DimensionlessParameterSet<T>, epsilon: T, nu: T) -> State<T> {
    rhs_weighted(state, &params.scaled, &RhsWeights::r1(&params.scaled, epsilon, nu))
}

/// `a₁ = K_τ⁴ τ_max`.
pub fn a1<T: Real>(p: &ParameterSet<T>) -> T {
    p.k_tau.powi(4) * p.tau_max
}

/// Jacobian of the selected formulation.
pub fn jacobian_full<T: Real, P: ModelParams<T>>(state: &State<T>, params: &P, formulation: Formulation<T>) -> Matrix3<T> {
    let p = params.raw();
    jacobian_weighted(state, p, &RhsWeights::for_formulation(p, formulation))
}

/// Leading-order (ε → 0) coefficients of the rescaled fast equation
///
/// `f(C, c_t, h, 0) = A C⁴ c_t h − ν̃ C²/K_s² + B c_t² + J₀(c_t)`,
/// `J₀(c_t) = α̂₀ + α̂₁ K_e⁴/(K_e⁴ + γ⁴ c_t⁴)` with `α̂ₖ = δ αₖ / K_τ⁴`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LeadingOrder<T> {
    /// `γ k_f p² / (k_β K_p² K_c⁴)`.
    pub a: T,
    /// `V_s K γ² / (K_s² K_τ⁴)`.
    pub b: T,
    pub alpha_hat_0: T,
    pub alpha_hat_1: T,
    pub k_s: T,
    pub k_e: T,
    pub gamma: T,
    pub nu_tilde: T,
}

impl<T: Real> LeadingOrder<T> {
    pub fn new(p: &ParameterSet<T>, nu_tilde: T) -> Self {
        let kt4 = p.k_tau.powi(4);
        Self {
            a: p.gamma * p.k_f * p.p * p.p / (p.k_beta * p.k_p * p.k_p * p.k_c.powi(4)),
            b: p.v_s * p.k * p.gamma * p.gamma / (p.k_s * p.k_s * kt4),
            alpha_hat_0: p.delta * p.alpha_0 / kt4,
            alpha_hat_1: p.delta * p.alpha_1 / kt4,
            k_s: p.k_s,
            k_e: p.k_e,
            gamma: p.gamma,
            nu_tilde,
        }
    }

    /// `𝔍⁻⁽⁰⁾(c_t) = B c_t²`.
    pub fn serca_minus(&self, c_t: T) -> T {
        self.b * c_t * c_t
    }

    /// `𝔍_IN⁽⁰⁾(c_t)`.
    pub fn influx(&self, c_t: T) -> T {
        self.alpha_hat_0 + self.alpha_hat_1 * hill_minus(self.gamma * c_t, self.k_e, 4)
    }

    pub fn influx_slope(&self, c_t: T) -> T {
        -self.alpha_hat_1 * self.gamma * hill_plus_slope(self.gamma * c_t, self.k_e, 4)
    }

    /// `ν̃ 𝔍⁺⁽⁰⁾(C) = ν̃ C²/K_s²`.
    pub fn serca_plus(&self, big_c: T) -> T {
        self.nu_tilde * big_c * big_c / (self.k_s * self.k_s)
    }

    pub fn f(&self, big_c: T, c_t: T, h: T) -> T {
        self.a * big_c.powi(4) * c_t * h - self.serca_plus(big_c) + self.serca_minus(c_t) + self.influx(c_t)
    }
}

/// Rescaled (R2) vector field in the fast time `t₂ = ε³ t`.
///
/// For `varepsilon > 0` the R1 field is evaluated exactly at
/// `c = εC, ϵ = ε⁴, ν = ν̃ε²` and rescaled as `(ε⁻⁴ c', ε⁻³ c_t', ε⁻³ h')`; no
/// series truncation is involved. `varepsilon = 0` returns the layer problem
/// `(f(C, c_t, h, 0), 0, 0)`.
pub fn rhs_r2<T: Real>(
    state: &RescaledState<T>,
    params: &DimensionlessParameterSet<T>,
    varepsilon: T,
    nu_tilde: T,
) -> Result<RescaledState<T>> {
    if state.big_c < T::zero() {
        return Err(Error::Domain("C < 0".into()));
    }
    if varepsilon < T::zero() {
        return Err(Error::Domain("varepsilon < 0".into()));
    }
    if varepsilon == T::zero() {
        let lo = LeadingOrder::new(&params.scaled, nu_tilde);
        return Ok(RescaledState::new(lo.f(state.big_c, state.c_t, state.h), T::zero(), T::zero()));
    }
    Ok(rhs_r2_exact(state, &params.scaled, varepsilon, nu_tilde))
}

pub(crate) fn r2_weights<T: Real>(p: &ParameterSet<T>, varepsilon: T, nu_tilde: T) -> RhsWeights<T> {
    let e2 = varepsilon * varepsilon;
    RhsWeights::r1(p, e2 * e2, nu_tilde * e2)
}

pub(crate) fn rhs_r2_exact<T: Real>(s: &RescaledState<T>, p: &ParameterSet<T>, varepsilon: T, nu_tilde: T) -> RescaledState<T> {
    let e3 = varepsilon.powi(3);
    let d = rhs_weighted(&s.unscale(varepsilon), p, &r2_weights(p, varepsilon, nu_tilde));
    RescaledState::new(d.c / (e3 * varepsilon), d.c_t / e3, d.h / e3)
}

pub(crate) fn jacobian_r2_exact<T: Real>(s: &RescaledState<T>, p: &ParameterSet<T>, varepsilon: T, nu_tilde: T) -> Matrix3<T> {
    let e3 = varepsilon.powi(3);
    let mut j = jacobian_weighted(&s.unscale(varepsilon), p, &r2_weights(p, varepsilon, nu_tilde));
    let rows = [e3 * varepsilon, e3, e3];
    for (i, row) in j.iter_mut().enumerate() {
        row[0] = row[0] * varepsilon;
        for x in row.iter_mut() {
            *x = *x / rows[i];
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dps() -> DimensionlessParameterSet<f64> {
        DimensionlessParameterSet::table2()
    }

    #[test]
    fn tau_h_half_value_and_h_inf_origin() {
        let p = ParameterSet::<f64>::table1();
        let f = fluxes(&State::new(p.k_tau, 1.0, 0.5), &p);
        assert!((f.tau_h - p.tau_max / 2.0).abs() < 1e-12);
        let f0 = fluxes(&State::new(0.0, 1.0, 0.5), &p);
        assert_eq!(f0.h_inf, 1.0);
        assert_eq!(f0.p_o, 0.0);
    }

    #[test]
    fn h_equation_at_zero_calcium() {
        let d = dps();
        let r = rhs_dimensionless(&State::new(0.0, 0.4, 0.3), &d);
        assert!((r.h - 0.7 / d.scaled.tau_max).abs() < 1e-18);
    }

    #[test]
    fn c_t_equation_is_membrane_flux_only() {
        let p = ParameterSet::<f64>::table1();
        for &(c, ct, h) in &[(0.1, 0.5, 0.2), (0.4, 0.6, 0.9)] {
            let s = State::new(c, ct, h);
            let f = fluxes(&s, &p);
            assert_eq!(rhs_dimensional(&s, &p).c_t, p.delta * (f.j_in - f.j_pm));
        }
    }

    #[test]
    fn r1_layer_limit() {
        let d = dps();
        let s = State::new(0.2, 0.5, 0.4);
        let r = rhs_r1(&s, &d, 0.0, d.scaled.v_s);
        assert_eq!(r.c_t, 0.0);
        let f = fluxes(&s, &d.scaled);
        let a1 = a1(&d.scaled);
        assert!((r.h - (f.h_inf - s.h) * s.c.powi(4) / a1).abs() < 1e-15);
    }

    #[test]
    fn r2_leading_order_is_layer_problem() {
        let d = dps();
        let r = rhs_r2(&RescaledState::new(3.0, 0.5, 0.4), &d, 0.0, 2.56).unwrap();
        assert_eq!((r.c_t, r.h), (0.0, 0.0));
        assert!(rhs_r2(&RescaledState::new(-1.0, 0.5, 0.4), &d, 0.0, 2.56).is_err());
    }

    #[test]
    fn r2_approaches_leading_order() {
        let d = dps();
        let s = RescaledState::new(2.0, 0.5, 0.6);
        let f0 = rhs_r2(&s, &d, 0.0, 2.56).unwrap().big_c;
        let e1 = (rhs_r2(&s, &d, 1e-3, 2.56).unwrap().big_c - f0).abs();
        let e2 = (rhs_r2(&s, &d, 5e-4, 2.56).unwrap().big_c - f0).abs();
        assert!(e2 < 0.6 * e1, "{e1} {e2}");
    }
}
