use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Phase point `(c, c_t, h)`: cytosolic Ca²⁺, total Ca²⁺, IPR activation.
///
/// Also used for time derivatives of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State<T> {
    pub c: T,
    pub c_t: T,
    pub h: T,
}

/// Phase point in the rescaled calcium coordinate `C = c / ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RescaledState<T> {
    #[serde(rename = "C")]
    pub big_c: T,
    pub c_t: T,
    pub h: T,
}

impl<T: Real> State<T> {
    pub fn new(c: T, c_t: T, h: T) -> Self {
        Self { c, c_t, h }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.c, self.c_t, self.h]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self { c: a[0], c_t: a[1], h: a[2] }
    }

    /// `c >= 0`, `c_t >= c` (non-negative ER content), `h ∈ [0, 1]`.
    pub fn is_valid(&self) -> bool {
        let z = T::zero();
        self.c >= z && self.c_t >= z && self.c_t >= self.c && self.h >= z && self.h <= T::one()
    }

    pub fn check(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "invalid state (c={}, c_t={}, h={})",
                to_f64(self.c),
                to_f64(self.c_t),
                to_f64(self.h)
            )))
        }
    }

    /// `C = c / ε`.
    pub fn rescale(&self, varepsilon: T) -> RescaledState<T> {
        RescaledState { big_c: self.c / varepsilon, c_t: self.c_t, h: self.h }
    }
}

impl<T: Real> RescaledState<T> {
    pub fn new(big_c: T, c_t: T, h: T) -> Self {
        Self { big_c, c_t, h }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.big_c, self.c_t, self.h]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self { big_c: a[0], c_t: a[1], h: a[2] }
    }

    /// `c = ε C`.
    pub fn unscale(&self, varepsilon: T) -> State<T> {
        State { c: self.big_c * varepsilon, c_t: self.c_t, h: self.h }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_round_trip_with_power_of_two() {
        let s = State::new(0.3, 0.5, 0.25);
        assert_eq!(s.rescale(0.125).unscale(0.125), s);
        assert!(s.is_valid());
        assert!(!State::new(0.6, 0.5, 0.2).is_valid());
        assert!(State::new(0.0, 0.0, 0.0).is_valid());
    }
}
