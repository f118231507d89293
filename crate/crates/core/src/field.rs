//! Polychromatic harmonic-comb fields with a cosine-squared envelope.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// How harmonic phases are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseScheme {
    /// `φ_q = β q ω_L + ζ`.
    Locked {
        beta: f64,
        zeta: f64,
    },
    Explicit {
        phases: Vec<f64>,
    },
    /// Independent uniform phases drawn from a seeded generator.
    Random {
        seed: u64,
    },
}

impl PhaseScheme {
    pub fn zero() -> Self {
        PhaseScheme::Locked { beta: 0.0, zeta: 0.0 }
    }
}

/// Expands a phase scheme into one phase per order, each in `[0, 2π)`.
///
/// `fundamental` is the fundamental angular frequency in atomic units; it
/// only enters the locked scheme.
pub fn make_phases(scheme: &PhaseScheme, orders: &[u32], fundamental: f64) -> Result<Vec<f64>> {
    validate_orders(orders)?;
    match scheme {
        PhaseScheme::Locked { beta, zeta } => Ok(orders
            .iter()
            .map(|&q| wrap_phase(beta * q as f64 * fundamental + zeta))
            .collect()),
        PhaseScheme::Explicit { phases } => {
            if phases.len() != orders.len() {
                return Err(Error::InvalidComb(format!(
                    "{} explicit phases for {} orders",
                    phases.len(),
                    orders.len()
                )));
            }
            if phases.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidComb("non-finite phase".into()));
            }
            Ok(phases.iter().map(|&p| wrap_phase(p)).collect())
        }
        PhaseScheme::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(orders.iter().map(|_| wrap_phase(rng.random_range(0.0..TAU))).collect())
        }
    }
}

fn validate_orders(orders: &[u32]) -> Result<()> {
    if orders.is_empty() {
        return Err(Error::InvalidComb("no harmonic orders".into()));
    }
    if let Some(q) = orders.iter().find(|&&q| q % 2 == 0) {
        return Err(Error::InvalidComb(format!("order {q} is even")));
    }
    if let Some(w) = orders.windows(2).find(|w| w[1] != w[0] + 2) {
        return Err(Error::InvalidComb(format!(
            "orders must be consecutive odd integers, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Consecutive odd orders `q_o, q_o + 2, ...`.
pub fn consecutive_orders(lowest: u32, count: usize) -> Vec<u32> {
    (0..count as u32).map(|n| lowest + 2 * n).collect()
}

/// Orders grown around `center`, adding below first: `{c}`, `{c-2, c}`,
/// `{c-2, c, c+2}`, `{c-4, .., c+2}`, ...
pub fn centered_orders(center: u32, count: usize) -> Result<Vec<u32>> {
    if center % 2 == 0 {
        return Err(Error::InvalidComb(format!("center order {center} is not odd")));
    }
    let below = count / 2;
    let lowest = center
        .checked_sub(2 * below as u32)
        .filter(|&q| q >= 1)
        .ok_or_else(|| Error::InvalidComb(format!("cannot center {count} harmonics on order {center}")))?;
    Ok(consecutive_orders(lowest, count))
}

/// Equal-strength comb of consecutive odd harmonics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicComb {
    /// Fundamental photon energy, atomic units.
    fundamental: f64,
    orders: Vec<u32>,
    /// Per-order peak field amplitude, atomic units.
    amplitude: f64,
    phases: Vec<f64>,
}

impl HarmonicComb {
    pub fn new(fundamental: f64, orders: Vec<u32>, amplitude: f64, phases: Vec<f64>) -> Result<Self> {
        validate_orders(&orders)?;
        if !(fundamental > 0.0) {
            return Err(Error::InvalidComb(format!(
                "fundamental frequency must be positive, got {fundamental}"
            )));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidComb(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        if phases.len() != orders.len() {
            return Err(Error::InvalidComb(format!(
                "{} phases for {} orders",
                phases.len(),
                orders.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidComb("non-finite phase".into()));
        }
        let phases = phases.into_iter().map(wrap_phase).collect();
        Ok(Self {
            fundamental,
            orders,
            amplitude,
            phases,
        })
    }

    /// Builds a comb from laboratory units, expanding the phase scheme.
    pub fn from_lab(
        photon_energy_ev: f64,
        orders: Vec<u32>,
        intensity_w_cm2: f64,
        scheme: &PhaseScheme,
    ) -> Result<Self> {
        let fundamental = units::ev_to_au(photon_energy_ev);
        let phases = make_phases(scheme, &orders, fundamental)?;
        Self::new(
            fundamental,
            orders,
            units::intensity_to_amplitude(intensity_w_cm2)?,
            phases,
        )
    }

    pub fn fundamental(&self) -> f64 {
        self.fundamental
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Self::new(self.fundamental, self.orders.clone(), amplitude, self.phases.clone())
    }

    /// Photon energy of harmonic `q`, atomic units.
    pub fn photon_energy(&self, q: u32) -> f64 {
        q as f64 * self.fundamental
    }

    pub fn highest_frequency(&self) -> f64 {
        self.photon_energy(*self.orders.last().expect("non-empty comb"))
    }

    /// `Σ_q cos(q ω_L t + φ_q)` without amplitude or envelope.
    pub fn carrier(&self, t: f64) -> f64 {
        self.orders
            .iter()
            .zip(&self.phases)
            .map(|(&q, &phi)| (q as f64 * self.fundamental * t + phi).cos())
            .sum()
    }
}

/// Cosine-squared field envelope.
///
/// `fwhm` is the full width at half maximum of the field envelope itself; the
/// envelope spans `[0, 2 fwhm]` and peaks at `fwhm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    fwhm: f64,
}

impl PulseEnvelope {
    /// `fwhm` in atomic units of time.
    pub fn new(fwhm: f64) -> Result<Self> {
        if !(fwhm > 0.0) || !fwhm.is_finite() {
            return Err(Error::Domain(format!("envelope FWHM must be positive, got {fwhm}")));
        }
        Ok(Self { fwhm })
    }

    pub fn from_fs(fwhm_fs: f64) -> Result<Self> {
        Self::new(units::fs_to_au(fwhm_fs))
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn total_duration(&self) -> f64 {
        2.0 * self.fwhm
    }

    pub fn center(&self) -> f64 {
        self.fwhm
    }

    pub fn value(&self, t: f64) -> f64 {
        let total = self.total_duration();
        if !(0.0..=total).contains(&t) {
            return 0.0;
        }
        let c = (PI * (t - self.center()) / total).cos();
        c * c
    }
}

/// `E(t) = E_o f(t) Σ_q cos(q ω_L t + φ_q)`, zero outside the envelope.
pub fn sample_field(comb: &HarmonicComb, env: &PulseEnvelope, t: f64) -> f64 {
    let f = env.value(t);
    if f == 0.0 {
        return 0.0;
    }
    comb.amplitude * f * comb.carrier(t)
}
