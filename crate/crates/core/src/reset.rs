//! First-order reset elements: GFORE and the proportional Clegg integrator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::RationalTf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResetError {
    #[error("omega_r must be finite and positive, got {0}")]
    InvalidCornerFrequency(f64),
    #[error("gamma must satisfy -1 < gamma <= 1, got {0}")]
    InvalidResetValue(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetKind {
    /// Generalized first-order reset element, `1/(s/ω_r + 1)`.
    Gfore,
    /// Proportional Clegg integrator, `1 + ω_r/s`.
    Pci,
}

#[derive(Deserialize)]
struct RawElement {
    kind: ResetKind,
    omega_r: f64,
    gamma: f64,
}

impl TryFrom<RawElement> for ResetElement {
    type Error = ResetError;
    fn try_from(raw: RawElement) -> Result<Self, ResetError> {
        ResetElement::new(raw.kind, raw.omega_r, raw.gamma)
    }
}

/// A reset element: its base linear dynamics plus the jump `x_r ← γ·x_r`.
///
/// `γ = 1` is accepted and makes the jump the identity; such an element is
/// only meaningful for simulation against the linear loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawElement")]
pub struct ResetElement {
    kind: ResetKind,
    omega_r: f64,
    gamma: f64,
}

/// Scalar realization `(A_r, B_r, C_r, D_r)` of the reset element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetMatrices {
    pub a_r: f64,
    pub b_r: f64,
    pub c_r: f64,
    pub d_r: f64,
}

impl ResetMatrices {
    pub fn transfer_at(&self, s: Complex64) -> Complex64 {
        self.c_r * self.b_r / (s - self.a_r) + self.d_r
    }
}

impl ResetElement {
    pub fn new(kind: ResetKind, omega_r: f64, gamma: f64) -> Result<Self, ResetError> {
        if !(omega_r.is_finite() && omega_r > 0.0) {
            return Err(ResetError::InvalidCornerFrequency(omega_r));
        }
        if !(gamma > -1.0 && gamma <= 1.0) {
            return Err(ResetError::InvalidResetValue(gamma));
        }
        Ok(Self {
            kind,
            omega_r,
            gamma,
        })
    }

    pub fn gfore(omega_r: f64, gamma: f64) -> Result<Self, ResetError> {
        Self::new(ResetKind::Gfore, omega_r, gamma)
    }

    pub fn pci(omega_r: f64, gamma: f64) -> Result<Self, ResetError> {
        Self::new(ResetKind::Pci, omega_r, gamma)
    }

    /// GFORE written as `1/(d·s/ω_c + 1)`: corner at `ω_c/d`.
    pub fn gfore_from_ratio(d: f64, omega_c: f64, gamma: f64) -> Result<Self, ResetError> {
        Self::gfore(omega_c / d, gamma)
    }

    pub fn kind(&self) -> ResetKind {
        self.kind
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ResetError> {
        Self::new(self.kind, self.omega_r, gamma)
    }

    /// True when the jump is the identity and the element is purely linear.
    pub fn is_linear_equivalent(&self) -> bool {
        self.gamma == 1.0
    }

    /// Base linear transfer function `C_R(s)`.
    pub fn base_tf(&self) -> RationalTf {
        let w = self.omega_r;
        let (num, den) = match self.kind {
            ResetKind::Gfore => (vec![1.0], vec![1.0, 1.0 / w]),
            ResetKind::Pci => (vec![w, 1.0], vec![0.0, 1.0]),
        };
        RationalTf::new(num, den).expect("reset element coefficients are finite")
    }

    pub fn matrices(&self) -> ResetMatrices {
        let w = self.omega_r;
        match self.kind {
            ResetKind::Gfore => ResetMatrices {
                a_r: -w,
                b_r: 1.0,
                c_r: w,
                d_r: 0.0,
            },
            ResetKind::Pci => ResetMatrices {
                a_r: 0.0,
                b_r: 1.0,
                c_r: w,
                d_r: 1.0,
            },
        }
    }
}
