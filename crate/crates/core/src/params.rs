//! Model constants in dimensional and dimensionless form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

macro_rules! parameter_set {
    ($( $(#[$m:meta])* $field:ident ),* $(,)?) => {
        /// Named model constants.
        ///
        /// The same container holds either the dimensional values (µM, s) or their
        /// barred, dimensionless counterparts; the flux formulas are identical in
        /// both unit systems.
        #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default, bound(deserialize = "T: Real + Deserialize<'de>"))]
        pub struct ParameterSet<T> {
            $( $(#[$m])* pub $field: T, )*
        }

        impl<T: Real> ParameterSet<T> {
            /// JSON / override key of every field, in declaration order.
            pub const FIELD_NAMES: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn get(&self, key: &str) -> Option<T> {
                match key {
                    $( stringify!($field) => Some(self.$field), )*
                    _ => None,
                }
            }

            fn slot(&mut self, key: &str) -> Option<&mut T> {
                match key {
                    $( stringify!($field) => Some(&mut self.$field), )*
                    _ => None,
                }
            }

            fn values(&self) -> Vec<(&'static str, T)> {
                vec![$( (stringify!($field), self.$field) ),*]
            }
        }
    };
}

parameter_set! {
    /// Ca²⁺ activation constant of the IPR.
    k_c,
    /// Half-point of h∞.
    k_h,
    /// IP₃ binding constant.
    k_p,
    /// Half-point of τ_h.
    k_tau,
    /// SERCA constant.
    k_s,
    /// Plasma membrane pump constant.
    k_pm,
    /// ER Ca²⁺ inhibition constant of the influx.
    k_e,
    /// Maximal time constant of h.
    tau_max,
    /// IPR flux rate.
    k_f,
    /// SERCA maximal rate.
    v_s,
    /// Plasma membrane pump maximal rate.
    v_pm,
    alpha_0,
    alpha_1,
    /// SERCA leak ratio.
    k,
    /// Plasma membrane flux scale factor.
    delta,
    /// Cytoplasm / ER volume ratio.
    gamma,
    k_beta,
    /// IP₃ concentration (bifurcation parameter).
    p,
}

impl<T: Real> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::table1()
    }
}

impl<T: Real> ParameterSet<T> {
    /// Dimensional default values (concentrations in µM, time in s).
    ///
    /// `p = 0.09` is the broad-spike operating point.
    pub fn table1() -> Self {
        Self {
            k_c: lit(0.2),
            k_h: lit(0.1),
            k_p: lit(0.3),
            k_tau: lit(0.04),
            k_s: lit(0.2),
            k_pm: lit(0.3),
            k_e: lit(14.0),
            tau_max: lit(200.0),
            k_f: lit(40.0),
            v_s: lit(0.9),
            v_pm: lit(0.07),
            alpha_0: lit(0.003),
            alpha_1: lit(0.01),
            k: lit(1.5e-5),
            delta: lit(0.1),
            gamma: lit(5.5),
            k_beta: lit(0.4),
            p: lit(0.09),
        }
    }

    pub fn with_p(mut self, p: T) -> Self {
        self.p = p;
        self
    }

    /// Checks the value-object invariants: every constant finite and strictly
    /// positive, and `gamma > 1`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.values() {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("must be finite and > 0, got {}", to_f64(v)),
                });
            }
        }
        if self.gamma <= T::one() {
            return Err(Error::InvalidParameter {
                name: "gamma".into(),
                reason: format!("must exceed 1, got {}", to_f64(self.gamma)),
            });
        }
        Ok(())
    }

    /// Returns a copy with `key` replaced; unknown keys are rejected.
    pub fn with_override(&self, key: &str, value: T) -> Result<Self> {
        let mut out = *self;
        *out.slot(key).ok_or_else(|| Error::UnknownKey(key.to_string()))? = value;
        out.validate()?;
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        let mut out = ParameterSet::<U>::table1();
        for (name, v) in self.values() {
            *out.slot(name).unwrap() = lit(to_f64(v));
        }
        out
    }

    /// `φ_p = p²/(p² + K_p²)`.
    pub fn phi_p(&self) -> T {
        let p2 = self.p * self.p;
        p2 / (p2 + self.k_p * self.k_p)
    }

    /// `φ_pdown = K_p²/(p² + K_p²)`.
    pub fn phi_pdown(&self) -> T {
        let kp2 = self.k_p * self.k_p;
        kp2 / (self.p * self.p + kp2)
    }
}

impl ParameterSet<f64> {
    /// Parses a flat JSON object. Missing keys keep their defaults; unknown keys
    /// and non-positive values are errors.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s).map_err(|e| {
            let msg = e.to_string();
            match msg.strip_prefix("unknown field `") {
                Some(rest) => Error::UnknownKey(rest.split('`').next().unwrap_or("").to_string()),
                None => Error::Parse(msg),
            }
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

/// Barred parameters together with the scales that produced them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct DimensionlessParameterSet<T> {
    /// Barred values; concentrations in units of `q_c`, times in units of `t_scale`.
    pub scaled: ParameterSet<T>,
    /// Time scale `T` in seconds.
    pub t_scale: T,
    /// Calcium concentration scale in µM.
    pub q_c: T,
    /// IP₃ concentration scale in µM.
    pub q_p: T,
}

impl<T: Real> Default for DimensionlessParameterSet<T> {
    fn default() -> Self {
        Self::reference()
    }
}

impl<T: Real> DimensionlessParameterSet<T> {
    /// Exact rescaling of [`ParameterSet::table1`] on the IPR time scale
    /// `T = 1/(γ k_f)`, `Q_c = Q_p = 1 µM`.
    pub fn reference() -> Self {
        Self::reference_from(&ParameterSet::table1())
    }

    /// IPR-time-scale rescaling of arbitrary dimensional parameters.
    pub fn reference_from(params: &ParameterSet<T>) -> Self {
        let t = (params.gamma * params.k_f).recip();
        nondimensionalize(params, t, T::one(), T::one())
    }

    /// The rounded values as commonly tabulated (τ̄_max = 44000, k̄_f = 0.18,
    /// V̄_s = 0.0041, …). Slightly off the exact rescaling; used where printed
    /// reference numbers were derived from the rounded table.
    pub fn table2() -> Self {
        let mut s = ParameterSet::<T>::table1();
        s.tau_max = lit(44000.0);
        s.k_f = lit(0.18);
        s.v_s = lit(0.0041);
        s.v_pm = lit(3.18e-4);
        s.alpha_0 = lit(1.36e-5);
        s.alpha_1 = lit(4.54e-5);
        Self { scaled: s, t_scale: lit(1.0 / 220.0), q_c: T::one(), q_p: T::one() }
    }

    pub fn with_p(mut self, p: T) -> Self {
        self.scaled.p = p;
        self
    }

    pub fn p(&self) -> T {
        self.scaled.p
    }

    pub fn validate(&self) -> Result<()> {
        self.scaled.validate()?;
        for (name, v) in [("t_scale", self.t_scale), ("q_c", self.q_c), ("q_p", self.q_p)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidParameter { name: name.into(), reason: "must be > 0".into() });
            }
        }
        Ok(())
    }

    pub fn with_override(&self, key: &str, value: T) -> Result<Self> {
        Ok(Self { scaled: self.scaled.with_override(key, value)?, ..*self })
    }

    pub fn cast<U: Real>(&self) -> DimensionlessParameterSet<U> {
        DimensionlessParameterSet {
            scaled: self.scaled.cast(),
            t_scale: lit(to_f64(self.t_scale)),
            q_c: lit(to_f64(self.q_c)),
            q_p: lit(to_f64(self.q_p)),
        }
    }
}

/// Rescales dimensional constants by time `t` (s) and concentrations `q_c`,
/// `q_p` (µM).
///
/// Concentrations divide by `q_c` (IP₃ by `q_p`), rates multiply by `t`,
/// fluxes by `t/q_c`; `K`, `δ`, `γ`, `k_β` are already dimensionless.
pub fn nondimensionalize<T: Real>(params: &ParameterSet<T>, t: T, q_c: T, q_p: T) -> DimensionlessParameterSet<T> {
    let p = params;
    let scaled = ParameterSet {
        k_c: p.k_c / q_c,
        k_h: p.k_h / q_c,
        k_p: p.k_p / q_p,
        k_tau: p.k_tau / q_c,
        k_s: p.k_s / q_c,
        k_pm: p.k_pm / q_c,
        k_e: p.k_e / q_c,
        tau_max: p.tau_max / t,
        k_f: t * p.k_f,
        v_s: t * p.v_s / q_c,
        v_pm: t * p.v_pm / q_c,
        alpha_0: t * p.alpha_0 / q_c,
        alpha_1: t * p.alpha_1 / q_c,
        k: p.k,
        delta: p.delta,
        gamma: p.gamma,
        k_beta: p.k_beta,
        p: p.p / q_p,
    };
    DimensionlessParameterSet { scaled, t_scale: t, q_c, q_p }
}
