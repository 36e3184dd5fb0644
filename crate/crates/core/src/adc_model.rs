//! Frequency response of the converter front end.
//!
//! Frequencies are normalized digital frequencies `x = ωT_s` in `[0, π]`. For the
//! first-order RC model the sampling period cancels, so the response only depends
//! on the ratio `x / x_c`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Analog front-end model of the converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdcModel {
    /// Single-pole RC lowpass with −3 dB cutoff `cutoff` (radians, normalized).
    FirstOrderRc { cutoff: f64 },
    /// Flat unity response. Turns the equalizer design into a plain lowpass design.
    Ideal,
}

impl AdcModel {
    pub fn first_order_rc(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < PI) {
            return Err(Error::Config(format!(
                "RC cutoff must lie in (0, π), got {cutoff}"
            )));
        }
        Ok(AdcModel::FirstOrderRc { cutoff })
    }

    /// Cutoff frequency, if the model has one.
    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            AdcModel::FirstOrderRc { cutoff } => Some(cutoff),
            AdcModel::Ideal => None,
        }
    }

    /// Evaluates `Q_c` at normalized frequency `x ∈ [0, π]`.
    pub fn response(&self, x: f64) -> Result<Complex64> {
        if !(0.0..=PI).contains(&x) {
            return Err(Error::Domain(format!(
                "frequency {x} outside [0, π]"
            )));
        }
        Ok(self.response_at(x))
    }

    /// Same as [`AdcModel::response`] without the range check.
    pub(crate) fn response_at(&self, x: f64) -> Complex64 {
        match *self {
            AdcModel::FirstOrderRc { cutoff } => {
                Complex64::new(1.0, 0.0) / Complex64::new(1.0, x / cutoff)
            }
            AdcModel::Ideal => Complex64::new(1.0, 0.0),
        }
    }
}
