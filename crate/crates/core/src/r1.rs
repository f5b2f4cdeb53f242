//! Regime R1 (`c = O(1)`): critical manifold S1, its layer stability and
//! landmarks, and the reduced flow along it.
//!
//! Everything here works in the R1 scaling of the dimensionless model with
//! `ϵ → 0` and `ν` kept as a parameter.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hill::{hill_minus, hill_plus, hill_plus_slope};
use crate::linalg::eig2;
use crate::model::{a1, jacobian_weighted, open_probability, rhs_weighted, RhsWeights};
use crate::params::{DimensionlessParameterSet, ParameterSet};
use crate::roots::{brent, logspace, scan_brackets};
use crate::scalar::{lit, to_f64, Real};
use crate::state::State;

fn layer_weights<T: Real>(p: &ParameterSet<T>, nu: T) -> RhsWeights<T> {
    RhsWeights::r1(p, T::zero(), nu)
}

pub fn h_inf<T: Real>(c: T, p: &ParameterSet<T>) -> T {
    hill_minus(c, p.k_h, 4)
}

/// Graph of S1 over `c`: `ψ(c) = (1 + γ⁻¹)c + ν 𝔍⁺(c) / (γ k_f P_o(c, h∞(c)))`.
pub fn psi<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    let p = &params.scaled;
    if !(c > T::zero()) {
        return Err(Error::Domain(format!("psi needs c > 0, got {}", to_f64(c))));
    }
    let po = open_probability(c, h_inf(c, p), p).value;
    let serca = hill_plus(c, p.k_s, 2);
    Ok((T::one() + p.gamma.recip()) * c + nu * serca / (p.gamma * p.k_f * po))
}

/// `dψ/dc`, analytic.
pub fn psi_slope<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    let p = &params.scaled;
    if !(c > T::zero()) {
        return Err(Error::Domain("psi needs c > 0".into()));
    }
    let hi = h_inf(c, p);
    let po = open_probability(c, hi, p);
    let dpo = po.dc + po.dh * (-hill_plus_slope(c, p.k_h, 4));
    let s = hill_plus(c, p.k_s, 2);
    let ds = hill_plus_slope(c, p.k_s, 2);
    let gk = p.gamma * p.k_f;
    Ok(T::one() + p.gamma.recip() + nu * (ds * po.value - s * dpo) / (gk * po.value * po.value))
}

/// The R1 layer problem `(J_IPR − ν𝔍⁺, 0, a₁⁻¹(h∞ − h)c⁴)`.
pub fn layer_rhs_r1<T: Real>(state: &State<T>, params: &DimensionlessParameterSet<T>, nu: T) -> State<T> {
    rhs_weighted(state, &params.scaled, &layer_weights(&params.scaled, nu))
}

/// Linearisation of the `(c, h)` layer subsystem at a point of S1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LayerJacobian<T> {
    /// Rows/columns `(c, h)`.
    pub matrix: [[T; 2]; 2],
    pub sigma: T,
    pub delta: T,
    pub lambda_plus: (T, T),
    pub lambda_minus: (T, T),
}

impl<T: Real> LayerJacobian<T> {
    pub fn lambda_plus(&self) -> Complex<T> {
        Complex::new(self.lambda_plus.0, self.lambda_plus.1)
    }

    pub fn lambda_minus(&self) -> Complex<T> {
        Complex::new(self.lambda_minus.0, self.lambda_minus.1)
    }
}

/// 2×2 layer Jacobian of the `(c, h)` subsystem at an arbitrary state.
pub fn layer_jacobian<T: Real>(state: &State<T>, params: &DimensionlessParameterSet<T>, nu: T) -> LayerJacobian<T> {
    let j = jacobian_weighted(state, &params.scaled, &layer_weights(&params.scaled, nu));
    let m = [[j[0][0], j[0][2]], [j[2][0], j[2][2]]];
    let sigma = m[0][0] + m[1][1];
    let delta = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let [lp, lm] = eig2(sigma, delta);
    LayerJacobian { matrix: m, sigma, delta, lambda_plus: (lp.re, lp.im), lambda_minus: (lm.re, lm.im) }
}

pub fn s1_state<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<State<T>> {
    Ok(State::new(c, psi(c, params, nu)?, h_inf(c, &params.scaled)))
}

/// Layer Jacobian on S1 at `c`; `σ` and `Δ` are the trace and determinant.
pub fn layer_jacobian_s1<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<LayerJacobian<T>> {
    Ok(layer_jacobian(&s1_state(c, params, nu)?, params, nu))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Attracting,
    Repelling,
    Saddle,
    Fold,
    Hopf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct S1Point<T> {
    pub c: T,
    pub c_t: T,
    pub h: T,
    pub branch: Branch,
}

/// Classifies a point of S1 from the signs of `Δ` and `σ`.
pub fn s1_point<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<S1Point<T>> {
    let s = s1_state(c, params, nu)?;
    let j = layer_jacobian(&s, params, nu);
    let branch = if j.delta < T::zero() {
        Branch::Saddle
    } else if j.delta == T::zero() {
        Branch::Fold
    } else if j.sigma > T::zero() {
        Branch::Repelling
    } else if j.sigma < T::zero() {
        Branch::Attracting
    } else {
        Branch::Hopf
    };
    Ok(S1Point { c, c_t: s.c_t, h: s.h, branch })
}

/// `G(c) = (𝔍_IN − 𝔍_PM)` on S1, i.e. the desingularised reduced flow.
pub fn reduced_g<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    let p = &params.scaled;
    let ct = psi(c, params, nu)?;
    let kt4 = p.k_tau.powi(4);
    let j_in = p.alpha_0 + p.alpha_1 * hill_minus(p.gamma * (ct - c), p.k_e, 4);
    let j_pm = p.v_pm * hill_plus(c, p.k_pm, 2);
    Ok(p.delta * (j_in - j_pm) / kt4)
}

/// `dG/dc` along S1 (chain rule through `ψ`).
pub fn reduced_g_slope<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    let p = &params.scaled;
    let ct = psi(c, params, nu)?;
    let dct = psi_slope(c, params, nu)?;
    let w = p.gamma * (ct - c);
    let d_in = -p.alpha_1 * hill_plus_slope(w, p.k_e, 4) * p.gamma * (dct - T::one());
    let d_pm = p.v_pm * hill_plus_slope(c, p.k_pm, 2);
    Ok(p.delta * (d_in - d_pm) / p.k_tau.powi(4))
}

/// Reduced flow on S1: `ċ = a₁⁻¹ γ k_f c⁴ P_o G / Δ`. Singular at the fold.
pub fn reduced_rhs_r1<T: Real>(c: T, params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    let p = &params.scaled;
    let j = layer_jacobian_s1(c, params, nu)?;
    if j.delta == T::zero() || !j.delta.is_finite() {
        return Err(Error::Singularity(format!("Δ = 0 at c = {}", to_f64(c))));
    }
    let po = open_probability(c, h_inf(c, p), p).value;
    let g = reduced_g(c, params, nu)?;
    Ok(p.gamma * p.k_f * c.powi(4) * po * g / (a1(p) * j.delta))
}

/// Upper bound `c₀` for the reduced equilibrium: `𝔍_PM(c₀) = α̂₀ + α̂₁`, i.e.
/// `c₀ = K_PM √((α̂₀+α̂₁)/(V̂_PM − α̂₀ − α̂₁))` with all hats `/K_τ⁴`.
pub fn c0_upper_bound<T: Real>(params: &DimensionlessParameterSet<T>) -> Result<T> {
    let p = &params.scaled;
    let kt4 = p.k_tau.powi(4);
    let s = (p.alpha_0 + p.alpha_1) / kt4;
    let v = p.v_pm / kt4;
    if !(v > s) {
        return Err(Error::NoBound(format!("V_PM/K_tau^4 = {} does not exceed alpha_0 + alpha_1 = {}", to_f64(v), to_f64(s))));
    }
    Ok(p.k_pm * (s / (v - s)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct R1Landmarks<T> {
    pub c_f: T,
    pub c_h: T,
    pub c_s: T,
    pub c_star: T,
    pub ct_f: T,
    pub ct_h: T,
    pub ct_hom: T,
    pub ct_star: T,
    /// `dG/dc(c_*)` in R1 units.
    pub g_prime_at_star: T,
    /// The same slope as `d(J_IN − J_PM)/dc` in dimensional units (1/s).
    pub g_prime_per_second: T,
    pub hopf_subcritical: bool,
}

const SCAN_LO: f64 = 1e-3;
const SCAN_N: usize = 2000;

fn scan_root<T: Real, F: FnMut(T) -> T>(mut f: F, what: &str) -> Result<T> {
    let grid = logspace(lit::<T>(SCAN_LO), T::one(), SCAN_N);
    let br = scan_brackets(&mut f, &grid);
    let (a, b) = *br.first().ok_or_else(|| Error::LandmarkMissing(format!("{what}: no sign change on c in (1e-3, 1)")))?;
    brent(f, a, b, lit(1e-12))
}

/// Hopf point: root of `σ` on S1.
pub fn hopf_point<T: Real>(params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    scan_root(|c| layer_jacobian_s1(c, params, nu).map_or(T::nan(), |j| j.sigma), "Hopf (sigma)")
}

/// Fold point: root of `Δ` on S1, equivalently of `ψ'`. `Δ` carries a factor
/// `c⁴`, so the scan uses `Δ/c⁴`.
pub fn fold_point<T: Real>(params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    scan_root(|c| layer_jacobian_s1(c, params, nu).map_or(T::nan(), |j| j.delta / c.powi(4)), "fold (Delta)")
}

/// Equilibrium of the desingularised reduced flow: root of `G` on `(0, c₀]`.
pub fn reduced_equilibrium<T: Real>(params: &DimensionlessParameterSet<T>, nu: T) -> Result<T> {
    let c0 = c0_upper_bound(params)?;
    let grid = logspace(lit::<T>(SCAN_LO), c0, SCAN_N);
    let mut g = |c: T| reduced_g(c, params, nu).unwrap_or(T::nan());
    let br = scan_brackets(&mut g, &grid);
    let (a, b) = *br.first().ok_or_else(|| Error::LandmarkMissing("c_*: G has no sign change on (1e-3, c0]".into()))?;
    brent(g, a, b, lit(1e-12))
}

/// Fold, Hopf and reduced-equilibrium landmarks, plus the homoclinic point of
/// the saddle.
pub fn locate_landmarks<T: Real>(params: &DimensionlessParameterSet<T>, nu: T) -> Result<R1Landmarks<T>> {
    let c_h = hopf_point(params, nu)?;
    let c_f = fold_point(params, nu)?;
    let c_star = reduced_equilibrium(params, nu)?;
    let hom = crate::layer::homoclinic_locator(params, nu).map_err(|e| match e {
        Error::NotFound(m) => Error::LandmarkMissing(m),
        e => e,
    })?;
    let p = &params.scaled;
    let g1 = reduced_g_slope(c_star, params, nu)?;
    let criticality = crate::layer::hopf_criticality(params, nu, c_h)?;
    Ok(R1Landmarks {
        c_f,
        c_h,
        c_s: hom.c_s,
        c_star,
        ct_f: psi(c_f, params, nu)?,
        ct_h: psi(c_h, params, nu)?,
        ct_hom: hom.c_t_hom,
        ct_star: psi(c_star, params, nu)?,
        g_prime_at_star: g1,
        g_prime_per_second: g1 * p.k_tau.powi(4) / (p.delta * params.t_scale),
        hopf_subcritical: criticality,
    })
}

/// Slow-time vector field `(ċ, ċ_t, ḣ)` of the R1 reduced problem on S2.
///
/// Both algebraic constraints hold identically at `c = 0`, so they pin
/// neither `ċ` nor `ḣ`; `c = 0` and `h` stay put. The `c_t` equation, however,
/// evaluates to `𝔍_IN(0, c_t) ≥ α̂₀ > 0`: total calcium keeps rising on S2.
pub fn reduced_on_s2<T: Real>(c_t: T, h: T, params: &DimensionlessParameterSet<T>) -> State<T> {
    let p = &params.scaled;
    let _ = h;
    let j_in = p.alpha_0 + p.alpha_1 * hill_minus(p.gamma * c_t, p.k_e, 4);
    State::new(T::zero(), p.delta * j_in / p.k_tau.powi(4), T::zero())
}
