//! Conversions between atomic units and laboratory units.
//!
//! All internal quantities are atomic units; eV, fs and W/cm² appear only at
//! API boundaries.

use crate::error::{Error, Result};

/// Hartree energy in eV (CODATA 2018).
pub const HARTREE_EV: f64 = 27.211_386_245_988;
/// Atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 2.418_884_326_585_7e-2;
/// Intensity corresponding to a unit atomic field amplitude, W/cm².
pub const AU_INTENSITY_W_CM2: f64 = 3.509_447_58e16;

pub fn ev_to_au(energy_ev: f64) -> f64 {
    energy_ev / HARTREE_EV
}

pub fn au_to_ev(energy_au: f64) -> f64 {
    energy_au * HARTREE_EV
}

pub fn fs_to_au(time_fs: f64) -> f64 {
    time_fs / AU_TIME_FS
}

pub fn au_to_fs(time_au: f64) -> f64 {
    time_au * AU_TIME_FS
}

/// Peak field amplitude (a.u.) of a linearly polarized wave of the given
/// cycle-averaged intensity.
pub fn intensity_to_amplitude(intensity_w_cm2: f64) -> Result<f64> {
    if !(intensity_w_cm2 > 0.0) || !intensity_w_cm2.is_finite() {
        return Err(Error::Domain(format!(
            "intensity must be positive and finite, got {intensity_w_cm2}"
        )));
    }
    Ok((intensity_w_cm2 / AU_INTENSITY_W_CM2).sqrt())
}
