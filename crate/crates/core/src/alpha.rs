use crate::error::{Error, Result};

/// Largest order accepted by default. All closed forms in the crate are
/// finite up to this value.
pub const DEFAULT_BETA_MAX: f64 = 2.0;

/// Order α ≥ 0 of the pseudodistance. `α = 0` selects the log-likelihood
/// branch everywhere.
///
/// The value is bounded above by `beta_max`, the exponent for which
/// `p^β`, `q^β` and `ln p` are assumed integrable. Checking that assumption
/// for a user model is the caller's responsibility.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha {
    value: f64,
    beta_max: f64,
}

impl Alpha {
    pub const ZERO: Alpha = Alpha { value: 0.0, beta_max: DEFAULT_BETA_MAX };

    pub fn new(value: f64) -> Result<Self> {
        Self::with_beta_max(value, DEFAULT_BETA_MAX)
    }

    pub fn with_beta_max(value: f64, beta_max: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidAlpha(value));
        }
        if !(beta_max > 0.0) || value > beta_max {
            return Err(Error::UnsupportedAlpha { alpha: value, beta_max });
        }
        Ok(Alpha { value, beta_max })
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.value
    }

    #[inline]
    pub fn beta_max(self) -> f64 {
        self.beta_max
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.value == 0.0
    }

    /// Fails with `InvalidInput` on `α = 0` for operations defined only for
    /// positive orders.
    pub(crate) fn require_positive(self) -> Result<f64> {
        if self.value > 0.0 {
            Ok(self.value)
        } else {
            Err(Error::InvalidInput("operation requires alpha > 0"))
        }
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}
