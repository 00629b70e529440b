//! Containers for measured or simulated spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converted-light power spectra of one pumped dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdlerSpectrum {
    pub wavelength_nm: Vec<f64>,
    /// Detected power at the upper idler [W].
    pub p_iplus_w: Vec<f64>,
    /// Detected power at the lower idler [W].
    pub p_iminus_w: Vec<f64>,
}

impl IdlerSpectrum {
    pub fn validate(&self) -> Result<()> {
        let n = self.wavelength_nm.len();
        if n == 0 || self.p_iplus_w.len() != n || self.p_iminus_w.len() != n {
            return Err(Error::Data(format!(
                "idler spectrum lengths disagree: {} wavelengths, {} i+ samples, {} i- samples",
                n,
                self.p_iplus_w.len(),
                self.p_iminus_w.len()
            )));
        }
        if self.p_iplus_w.iter().chain(&self.p_iminus_w).any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Data("idler powers must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Transmission map `transmission[iv][iλ]` on a wavelength × voltage grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredMap {
    pub dataset_id: String,
    pub wavelength_nm: Vec<f64>,
    pub voltage: Vec<f64>,
    pub transmission: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler: Option<IdlerSpectrum>,
}

impl MeasuredMap {
    pub fn new(id: &str, wavelength_nm: Vec<f64>, voltage: Vec<f64>, transmission: Vec<Vec<f64>>) -> Self {
        Self { dataset_id: id.to_string(), wavelength_nm, voltage, transmission, idler: None }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.wavelength_nm.len();
        if n < 2 {
            return Err(Error::Data(format!("{}: need at least two wavelengths", self.dataset_id)));
        }
        if self.voltage.is_empty() || self.transmission.len() != self.voltage.len() {
            return Err(Error::Data(format!(
                "{}: {} voltages but {} transmission rows",
                self.dataset_id,
                self.voltage.len(),
                self.transmission.len()
            )));
        }
        if let Some(row) = self.transmission.iter().position(|r| r.len() != n) {
            return Err(Error::Data(format!("{}: row {row} does not have {n} samples", self.dataset_id)));
        }
        if !self.wavelength_nm.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Data(format!("{}: wavelengths must increase strictly", self.dataset_id)));
        }
        if self.transmission.iter().flatten().any(|t| !t.is_finite()) {
            return Err(Error::Data(format!("{}: non-finite transmission", self.dataset_id)));
        }
        if let Some(idler) = &self.idler {
            idler.validate()?;
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.transmission.iter().map(Vec::len).sum()
    }
}
