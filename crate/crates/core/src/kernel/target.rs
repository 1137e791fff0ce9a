use serde::{Deserialize, Serialize};

use super::{sinc, Kernel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetFamily {
    /// `exp(-t²)`
    SquaredExponential,
    /// `exp(-|t|)`
    OrnsteinUhlenbeck,
    /// `exp(-√5|t|)(1 + √5|t| + 5t²/3)`
    Matern52,
    /// `sin(πt)/(πt)`
    Sinc,
    /// Wendland `(1-|t|)_+`
    Wendland1,
    /// Wendland `(1-|t|)_+^4 (4|t|+1)`
    Wendland2,
    /// Wendland `(1-|t|)_+^6 (35t² + 18|t| + 3)/3`
    Wendland3,
    /// Wendland `(1-|t|)_+^8 (32|t|³ + 25t² + 8|t| + 1)`
    Wendland4,
}

impl TargetFamily {
    pub const ALL: [TargetFamily; 8] = [
        TargetFamily::SquaredExponential,
        TargetFamily::OrnsteinUhlenbeck,
        TargetFamily::Matern52,
        TargetFamily::Sinc,
        TargetFamily::Wendland1,
        TargetFamily::Wendland2,
        TargetFamily::Wendland3,
        TargetFamily::Wendland4,
    ];

    pub fn is_compact(self) -> bool {
        matches!(
            self,
            TargetFamily::Wendland1
                | TargetFamily::Wendland2
                | TargetFamily::Wendland3
                | TargetFamily::Wendland4
        )
    }

    /// Unit-scale profile at `r = |t| / ℓ`.
    pub fn profile(self, r: f64) -> f64 {
        let r = r.abs();
        let relu = |v: f64| v.max(0.0);
        match self {
            TargetFamily::SquaredExponential => (-r * r).exp(),
            TargetFamily::OrnsteinUhlenbeck => (-r).exp(),
            TargetFamily::Matern52 => {
                let s5 = 5f64.sqrt() * r;
                (-s5).exp() * (1.0 + s5 + 5.0 * r * r / 3.0)
            }
            TargetFamily::Sinc => sinc(r),
            TargetFamily::Wendland1 => relu(1.0 - r),
            TargetFamily::Wendland2 => relu(1.0 - r).powi(4) * (4.0 * r + 1.0),
            TargetFamily::Wendland3 => {
                relu(1.0 - r).powi(6) * (35.0 * r * r + 18.0 * r + 3.0) / 3.0
            }
            TargetFamily::Wendland4 => {
                relu(1.0 - r).powi(8) * (32.0 * r * r * r + 25.0 * r * r + 8.0 * r + 1.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetFamily::SquaredExponential => "se",
            TargetFamily::OrnsteinUhlenbeck => "ou",
            TargetFamily::Matern52 => "matern52",
            TargetFamily::Sinc => "sinc",
            TargetFamily::Wendland1 => "wendland1",
            TargetFamily::Wendland2 => "wendland2",
            TargetFamily::Wendland3 => "wendland3",
            TargetFamily::Wendland4 => "wendland4",
        }
    }
}

impl std::str::FromStr for TargetFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "se" | "rbf" | "squaredexponential" => Ok(TargetFamily::SquaredExponential),
            "ou" | "exponential" | "ornsteinuhlenbeck" => Ok(TargetFamily::OrnsteinUhlenbeck),
            "matern" | "matern52" => Ok(TargetFamily::Matern52),
            "sinc" => Ok(TargetFamily::Sinc),
            "wendland1" | "w1" => Ok(TargetFamily::Wendland1),
            "wendland2" | "w2" => Ok(TargetFamily::Wendland2),
            "wendland3" | "w3" => Ok(TargetFamily::Wendland3),
            "wendland4" | "w4" => Ok(TargetFamily::Wendland4),
            _ => Err(Error::InvalidParameter(format!(
                "unknown target kernel '{s}'"
            ))),
        }
    }
}

/// A fixed classical kernel `σ² f(|t|/ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetKernel {
    family: TargetFamily,
    amplitude: f64,
    lengthscale: f64,
}

impl TargetKernel {
    pub fn new(family: TargetFamily, amplitude: f64, lengthscale: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        Ok(Self {
            family,
            amplitude,
            lengthscale,
        })
    }

    pub fn family(&self) -> TargetFamily {
        self.family
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Self::new(self.family, amplitude, self.lengthscale)
    }
}

impl Kernel for TargetKernel {
    fn eval(&self, t: f64) -> f64 {
        self.amplitude * self.family.profile(t / self.lengthscale)
    }

    fn support(&self) -> Option<f64> {
        self.family.is_compact().then_some(self.lengthscale)
    }
}
