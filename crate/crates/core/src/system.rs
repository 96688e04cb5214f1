//! Reset control loop descriptions: plant `G`, linear controller `C_L` and
//! reset element `C_R` in the loop `r → e → C_R → C_L → G → y`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::RationalTf;
use crate::reset::ResetElement;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("plant: transfer function must be strictly proper")]
    PlantNotStrictlyProper,
    #[error("linear_controller: transfer function must be proper")]
    ControllerImproper,
    #[error("disturbance_input: expected {expected} entries (order of C_L·G), got {got}")]
    DisturbanceDimension { expected: usize, got: usize },
}

#[derive(Deserialize)]
struct RawSystem {
    #[serde(default)]
    label: String,
    plant: RationalTf,
    linear_controller: RationalTf,
    reset: ResetElement,
    #[serde(default)]
    disturbance_input: Option<Vec<f64>>,
}

impl TryFrom<RawSystem> for SystemDescription {
    type Error = SystemError;
    fn try_from(raw: RawSystem) -> Result<Self, SystemError> {
        let mut sys = SystemDescription::new(raw.label, raw.plant, raw.linear_controller, raw.reset)?;
        if let Some(bd) = raw.disturbance_input {
            sys = sys.with_disturbance_input(bd)?;
        }
        Ok(sys)
    }
}

/// A SISO reset control system.
///
/// `disturbance_input` overrides `B_d` in the realization of `C_L·G`; when
/// absent the disturbance enters through the same input vector as `u_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem")]
pub struct SystemDescription {
    pub label: String,
    plant: RationalTf,
    linear_controller: RationalTf,
    reset: ResetElement,
    #[serde(skip_serializing_if = "Option::is_none")]
    disturbance_input: Option<Vec<f64>>,
}

impl SystemDescription {
    pub fn new(
        label: impl Into<String>,
        plant: RationalTf,
        linear_controller: RationalTf,
        reset: ResetElement,
    ) -> Result<Self, SystemError> {
        if !plant.is_strictly_proper() {
            return Err(SystemError::PlantNotStrictlyProper);
        }
        if !linear_controller.is_proper() {
            return Err(SystemError::ControllerImproper);
        }
        Ok(Self {
            label: label.into(),
            plant,
            linear_controller,
            reset,
            disturbance_input: None,
        })
    }

    pub fn with_disturbance_input(mut self, bd: Vec<f64>) -> Result<Self, SystemError> {
        let expected = self.open_loop_linear().den_degree();
        if bd.len() != expected {
            return Err(SystemError::DisturbanceDimension {
                expected,
                got: bd.len(),
            });
        }
        self.disturbance_input = Some(bd);
        Ok(self)
    }

    pub fn with_reset(mut self, reset: ResetElement) -> Self {
        self.reset = reset;
        self
    }

    pub fn plant(&self) -> &RationalTf {
        &self.plant
    }

    pub fn linear_controller(&self) -> &RationalTf {
        &self.linear_controller
    }

    pub fn reset(&self) -> &ResetElement {
        &self.reset
    }

    pub fn disturbance_input(&self) -> Option<&[f64]> {
        self.disturbance_input.as_deref()
    }

    /// `𝓛(s) = C_L(s)·G(s)`, the linear part seen by the reset element.
    pub fn open_loop_linear(&self) -> RationalTf {
        self.linear_controller.series(&self.plant)
    }

    /// `C_R(s)`.
    pub fn reset_base_tf(&self) -> RationalTf {
        self.reset.base_tf()
    }

    /// `L(s) = 𝓛(s)·C_R(s)`, the base linear open loop.
    pub fn loop_tf(&self) -> RationalTf {
        self.open_loop_linear().series(&self.reset_base_tf())
    }
}
