//! Model formulations packaged as [`OdeSystem`]s.

use crate::integrate::OdeSystem;
use crate::model::{jacobian_r2_exact, jacobian_weighted, rhs_r2_exact, rhs_weighted, RhsWeights};
use crate::params::{DimensionlessParameterSet, ParameterSet};
use crate::scalar::Real;
use crate::state::{RescaledState, State};

/// Original or R1-scaled model with analytic Jacobian.
#[derive(Clone, Copy, Debug)]
pub struct ModelSystem<T> {
    pub params: ParameterSet<T>,
    pub weights: RhsWeights<T>,
}

impl<T: Real> ModelSystem<T> {
    pub fn dimensional(params: &ParameterSet<T>) -> Self {
        Self { params: *params, weights: RhsWeights::original(params) }
    }

    pub fn dimensionless(params: &DimensionlessParameterSet<T>) -> Self {
        Self::dimensional(&params.scaled)
    }

    pub fn r1(params: &DimensionlessParameterSet<T>, epsilon: T, nu: T) -> Self {
        Self { params: params.scaled, weights: RhsWeights::r1(&params.scaled, epsilon, nu) }
    }
}

impl<T: Real> OdeSystem<T, 3> for ModelSystem<T> {
    const AUTONOMOUS: bool = true;

    fn rhs(&self, _t: T, y: &[T; 3]) -> [T; 3] {
        rhs_weighted(&State::from_array(*y), &self.params, &self.weights).to_array()
    }

    fn jacobian(&self, _t: T, y: &[T; 3]) -> [[T; 3]; 3] {
        jacobian_weighted(&State::from_array(*y), &self.params, &self.weights)
    }
}

/// Exact rescaled (R2) system in `(C, c_t, h)` and fast time `t₂`; requires `varepsilon > 0`.
#[derive(Clone, Copy, Debug)]
pub struct RescaledSystem<T> {
    pub params: ParameterSet<T>,
    pub varepsilon: T,
    pub nu_tilde: T,
}

impl<T: Real> RescaledSystem<T> {
    pub fn new(params: &DimensionlessParameterSet<T>, varepsilon: T, nu_tilde: T) -> Self {
        assert!(varepsilon > T::zero(), "exact rescaled system needs varepsilon > 0");
        Self { params: params.scaled, varepsilon, nu_tilde }
    }
}

impl<T: Real> OdeSystem<T, 3> for RescaledSystem<T> {
    const AUTONOMOUS: bool = true;

    fn rhs(&self, _t: T, y: &[T; 3]) -> [T; 3] {
        rhs_r2_exact(&RescaledState::from_array(*y), &self.params, self.varepsilon, self.nu_tilde).to_array()
    }

    fn jacobian(&self, _t: T, y: &[T; 3]) -> [[T; 3]; 3] {
        jacobian_r2_exact(&RescaledState::from_array(*y), &self.params, self.varepsilon, self.nu_tilde)
    }
}
