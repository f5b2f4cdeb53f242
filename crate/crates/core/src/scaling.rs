//! Scale factors, switch-steepness scores and the polynomial scaling relation
//! that reduces the candidate small parameters to `ϵ` (and an independent `ν`).

use serde::Serialize;

use crate::hill::hill_max_slope;
use crate::params::{DimensionlessParameterSet, ParameterSet};
use crate::scalar::{lit, Real};

/// The seven magnitudes pulled out of the dimensionless right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleFactors<T> {
    pub inv_tau_max: T,
    pub gamma_k_f: T,
    pub v_s: T,
    /// `V_s K γ² / K_s²`, the prefactor of `J⁻_SERCA`.
    pub serca_minus: T,
    pub delta_alpha_0: T,
    pub delta_alpha_1: T,
    pub delta_v_pm: T,
}

impl<T: Real> ScaleFactors<T> {
    pub fn as_pairs(&self) -> [(&'static str, T); 7] {
        [
            ("1/tau_max", self.inv_tau_max),
            ("gamma*k_f", self.gamma_k_f),
            ("V_s", self.v_s),
            ("V_s*K*gamma^2/K_s^2", self.serca_minus),
            ("delta*alpha_0", self.delta_alpha_0),
            ("delta*alpha_1", self.delta_alpha_1),
            ("delta*V_PM", self.delta_v_pm),
        ]
    }
}

pub fn scale_factors<T: Real>(params: &DimensionlessParameterSet<T>) -> ScaleFactors<T> {
    let p = &params.scaled;
    ScaleFactors {
        inv_tau_max: p.tau_max.recip(),
        gamma_k_f: p.gamma * p.k_f,
        v_s: p.v_s,
        serca_minus: serca_minus_factor(p),
        delta_alpha_0: p.delta * p.alpha_0,
        delta_alpha_1: p.delta * p.alpha_1,
        delta_v_pm: p.delta * p.v_pm,
    }
}

fn serca_minus_factor<T: Real>(p: &ParameterSet<T>) -> T {
    p.v_s * p.k * p.gamma * p.gamma / (p.k_s * p.k_s)
}

/// `ε₁ … ε₇`; index `i − 1` holds `εᵢ`.
pub fn candidate_small_parameters<T: Real>(params: &DimensionlessParameterSet<T>) -> [T; 7] {
    let s = scale_factors(params);
    [s.inv_tau_max, s.v_s, s.serca_minus, s.delta_alpha_0, s.delta_alpha_1, s.delta_v_pm, params.scaled.k_tau]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchScore<T> {
    pub name: &'static str,
    pub score: T,
    pub is_switch: bool,
    /// Score equal to the threshold (within 1e-12 relative): reported, not a switch.
    pub borderline: bool,
}

/// Steepness of every Hill term, measured by [`hill_max_slope`]. A term is a
/// switch iff its score strictly exceeds `threshold`; a score equal to the
/// threshold is flagged borderline and resolves to "not a switch".
pub fn classify_switches<T: Real>(params: &DimensionlessParameterSet<T>, threshold: T) -> Vec<SwitchScore<T>> {
    let p = &params.scaled;
    let four = lit::<T>(4.0);
    let two = lit::<T>(2.0);
    let terms = [
        ("tau_h", hill_max_slope(p.k_tau, four)),
        ("phi_c", hill_max_slope(p.k_c, four)),
        ("h_inf", hill_max_slope(p.k_h, four)),
        ("J_SERCA+", hill_max_slope(p.k_s, two)),
        ("J_PM", hill_max_slope(p.k_pm, two)),
        ("J_IN", hill_max_slope(p.k_e, four)),
    ];
    terms
        .into_iter()
        .map(|(name, score)| {
            let borderline = (score - threshold).abs() <= lit::<T>(1e-12) * threshold;
            SwitchScore { name, score, is_switch: score > threshold && !borderline, borderline }
        })
        .collect()
}

/// `|∇J̃⁻(c, c_t)|` for the normalised `J̃⁻ = K_s² (c_t − c)² / (K_s² + c²)`.
pub fn serca_minus_gradient<T: Real>(c: T, c_t: T, k_s: T) -> T {
    let ks2 = k_s * k_s;
    let d = ks2 + c * c;
    let r = (c * c_t + ks2) / d;
    lit::<T>(2.0) * ks2 * (c_t - c) / d * (T::one() + r * r).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientMax<T> {
    pub max_value: T,
    pub c: T,
    pub c_t: T,
}

/// Maximises [`serca_minus_gradient`] over the triangle `0 ≤ c ≤ c_t ≤ 1`:
/// a 201×201 grid, then coordinate refinement around the best node.
pub fn serca_minus_gradient_max<T: Real>(params: &DimensionlessParameterSet<T>) -> GradientMax<T> {
    let k_s = params.scaled.k_s;
    let n = 200;
    let mut best = GradientMax { max_value: T::neg_infinity(), c: T::zero(), c_t: T::zero() };
    for j in 0..=n {
        let ct = lit::<T>(j as f64 / n as f64);
        for i in 0..=j {
            let c = lit::<T>(i as f64 / n as f64);
            let v = serca_minus_gradient(c, ct, k_s);
            if v > best.max_value {
                best = GradientMax { max_value: v, c, c_t: ct };
            }
        }
    }
    // pattern search, clamped to the triangle
    let mut step = lit::<T>(1.0 / n as f64);
    let tiny = lit::<T>(1e-12);
    while step > tiny {
        let mut moved = false;
        for (dc, dct) in [(step, T::zero()), (-step, T::zero()), (T::zero(), step), (T::zero(), -step)] {
            let ct = (best.c_t + dct).max(T::zero()).min(T::one());
            let c = (best.c + dc).max(T::zero()).min(ct);
            let v = serca_minus_gradient(c, ct, k_s);
            if v > best.max_value {
                best = GradientMax { max_value: v, c, c_t: ct };
                moved = true;
            }
        }
        if !moved {
            step = step * lit(0.5);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport<T> {
    pub scale_factors: ScaleFactors<T>,
    /// `ε₁ … ε₇`.
    pub eps: [T; 7],
    /// `a₁, a₃, …, a₇`, as `(i, aᵢ)`.
    pub a: Vec<(usize, T)>,
    /// `b₁ … b₇`.
    pub b: [u32; 7],
    /// Coupling `a₂ = K_τ⁴/V_s²`, `b₂ = 2` that was considered and not used.
    pub a2_informational: T,
    pub epsilon: T,
    pub nu: T,
    pub nu_tilde: T,
    pub switch_scores: Vec<SwitchScore<T>>,
    pub serca_minus_gradient: GradientMax<T>,
    /// `ϵ < ν < ϵ^{1/4} < 1`.
    pub ordering_holds: bool,
    pub warnings: Vec<String>,
}

/// Exponents of `ϵ = aᵢ εᵢ^{bᵢ}`: linear in every candidate except `ε₇ = K_τ`.
pub const EXPONENTS: [u32; 7] = [1, 2, 1, 1, 1, 1, 4];

pub fn scaling_relation<T: Real>(params: &DimensionlessParameterSet<T>) -> ScalingReport<T> {
    let eps = candidate_small_parameters(params);
    let epsilon = params.scaled.k_tau.powi(4);
    let nu = eps[1];
    let a: Vec<(usize, T)> = [0usize, 2, 3, 4, 5, 6]
        .iter()
        .map(|&i| (i + 1, epsilon / eps[i].powi(EXPONENTS[i] as i32)))
        .collect();
    let mut warnings = Vec::new();
    for &(i, ai) in &a {
        if !(ai >= lit(0.01) && ai <= lit(100.0)) {
            warnings.push(format!("a{i} = {:e} is not of order one", ai.to_f64().unwrap_or(f64::NAN)));
        }
    }
    let quarter = epsilon.sqrt().sqrt();
    ScalingReport {
        scale_factors: scale_factors(params),
        eps,
        a,
        b: EXPONENTS,
        a2_informational: epsilon / (nu * nu),
        epsilon,
        nu,
        nu_tilde: nu / epsilon.sqrt(),
        switch_scores: classify_switches(params, lit(10.0)),
        serca_minus_gradient: serca_minus_gradient_max(params),
        ordering_holds: epsilon < nu && nu < quarter && quarter < T::one(),
        warnings,
    }
}
