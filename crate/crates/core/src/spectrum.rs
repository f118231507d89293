//! Photoelectron spectra from box-state projection.
//!
//! The final wavefunction is projected on the field-free eigenstates of each
//! partial wave. Positive-energy amplitudes are density-of-states normalized,
//! dressed with Coulomb phases and summed coherently along the polarization
//! axis. Peaks are then assigned to photon orders by energy conservation.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::ChannelEigensystem;
use crate::error::{Error, Result};
use crate::field::HarmonicComb;
use crate::linalg::SymBand;
use crate::propagator::WavefunctionState;
use crate::units::{au_to_ev, HARTREE_EV};

/// Positive-energy amplitudes of one partial wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumChannel {
    pub l: usize,
    /// Box-state energies, eV.
    pub energies: Vec<f64>,
    /// Projections `⟨n|S|ψ_l⟩`.
    pub raw: Vec<Complex64>,
    /// `raw · sqrt(ρ)`, with `ρ` in states per eV.
    pub amplitudes: Vec<Complex64>,
}

impl ContinuumChannel {
    pub fn population(&self) -> f64 {
        self.raw.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Density-normalized amplitude at `energy_ev`, linear in energy.
    /// Constant below the first box state, zero above the last.
    pub fn interpolate(&self, energy_ev: f64) -> Complex64 {
        let e = &self.energies;
        if energy_ev <= e[0] {
            return self.amplitudes[0];
        }
        if energy_ev > e[e.len() - 1] {
            return Complex64::new(0.0, 0.0);
        }
        let j = e.partition_point(|&x| x < energy_ev);
        let w = (energy_ev - e[j - 1]) / (e[j] - e[j - 1]);
        self.amplitudes[j - 1] * (1.0 - w) + self.amplitudes[j] * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPopulation {
    pub l: usize,
    /// Eigenvalue, a.u.
    pub energy: f64,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAmplitudes {
    pub continuum: Vec<ContinuumChannel>,
    pub bound: Vec<BoundPopulation>,
    /// Time (a.u.) at which the amplitudes are phase-referenced.
    pub reference_time: f64,
}

impl ChannelAmplitudes {
    pub fn bound_population(&self) -> f64 {
        self.bound.iter().map(|b| b.population).sum()
    }

    pub fn continuum_population(&self) -> f64 {
        self.continuum.iter().map(ContinuumChannel::population).sum()
    }

    /// Population of the bound state of channel `l` closest to `energy` (a.u.).
    pub fn bound_state_population(&self, l: usize, energy: f64) -> Option<f64> {
        self.bound
            .iter()
            .filter(|b| b.l == l)
            .min_by(|a, b| (a.energy - energy).abs().total_cmp(&(b.energy - energy).abs()))
            .map(|b| b.population)
    }
}

/// Projects `state` on the eigenstates of every channel.
///
/// Amplitudes are rotated to `reference_time` with the field-free phase
/// `exp(i E_n (t - t_ref))`, so that for a pulse centred on `t_ref` they vary
/// smoothly with energy and can be interpolated.
pub fn project_continuum(
    state: &WavefunctionState,
    eigensystems: &[ChannelEigensystem],
    overlap: &SymBand,
    reference_time: f64,
) -> Result<ChannelAmplitudes> {
    if eigensystems.len() < state.channels.len() {
        return Err(Error::Domain(format!(
            "state has {} channels but only {} eigensystems were given",
            state.channels.len(),
            eigensystems.len()
        )));
    }
    let mut continuum = Vec::with_capacity(state.channels.len());
    let mut bound = Vec::new();
    let mut s_psi = vec![Complex64::new(0.0, 0.0); overlap.dim()];
    for (l, psi) in state.channels.iter().enumerate() {
        let eig = &eigensystems[l];
        if eig.l() != l {
            return Err(Error::Domain(format!("eigensystem {l} is for l={}", eig.l())));
        }
        overlap.mul_complex_into(psi, &mut s_psi);
        let energies = eig.energies();
        let first = energies.partition_point(|&e| e <= 0.0);
        if energies.len() - first < 3 {
            return Err(Error::BasisTooSmall(format!(
                "channel l={l} has {} positive-energy states, need at least 3",
                energies.len() - first
            )));
        }
        let project = |n: usize| -> Complex64 {
            let v = eig.vector(n);
            let a: Complex64 = v.iter().zip(&s_psi).map(|(c, p)| p * *c).sum();
            a * Complex64::from_polar(1.0, energies[n] * (state.time - reference_time))
        };
        for n in 0..first {
            bound.push(BoundPopulation {
                l,
                energy: energies[n],
                population: project(n).norm_sqr(),
            });
        }
        let e_ev: Vec<f64> = energies[first..].iter().map(|&e| au_to_ev(e)).collect();
        let raw: Vec<Complex64> = (first..energies.len()).map(project).collect();
        let m = e_ev.len();
        let amplitudes = (0..m)
            .map(|i| {
                let width = match i {
                    0 => e_ev[1] - e_ev[0],
                    _ if i == m - 1 => e_ev[m - 1] - e_ev[m - 2],
                    _ => 0.5 * (e_ev[i + 1] - e_ev[i - 1]),
                };
                raw[i] / width.sqrt()
            })
            .collect();
        continuum.push(ContinuumChannel {
            l,
            energies: e_ev,
            raw,
            amplitudes,
        });
    }
    Ok(ChannelAmplitudes {
        continuum,
        bound,
        reference_time,
    })
}

/// Imaginary part of `ln Γ(z)`, continuous along vertical lines.
fn ln_gamma_imag(z: Complex64) -> f64 {
    // Shift into the Stirling regime, then undo with the recurrence.
    let shift = 12.0;
    let mut correction = 0.0;
    let mut w = z;
    while w.re < shift {
        correction += w.arg();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    let stirling = (w - 0.5) * w.ln() - w + series;
    stirling.im - correction
}

/// Coulomb phase `σ_l = arg Γ(l + 1 - i Z/k)` for a photoelectron of momentum `k` (a.u.).
pub fn coulomb_phase(l: usize, charge: f64, k: f64) -> f64 {
    if charge == 0.0 {
        return 0.0;
    }
    ln_gamma_imag(Complex64::new(l as f64 + 1.0, -charge / k))
}

/// `Y_l0(θ = 0)`.
fn ylm0_forward(l: usize) -> f64 {
    ((2 * l + 1) as f64 / (4.0 * PI)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    /// Along the polarization axis, per eV per steradian.
    Directional,
    /// Summed over emission angles, per eV.
    AngleIntegrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoelectronSpectrum {
    /// Ascending, eV, starting at 0.
    pub energy_grid: Vec<f64>,
    /// Directional `dP/dE dΩ` at `θ = 0`.
    pub density: Vec<f64>,
    pub angle_integrated: Vec<f64>,
    /// Interpolated `ã_l(E)` on the grid, indexed `[l][i]`.
    pub channel_amplitudes: Vec<Vec<Complex64>>,
}

impl PhotoelectronSpectrum {
    pub fn values(&self, which: Density) -> &[f64] {
        match which {
            Density::Directional => &self.density,
            Density::AngleIntegrated => &self.angle_integrated,
        }
    }

    /// Probability carried by channel `l`, integrated over the whole grid.
    pub fn channel_probability(&self, l: usize) -> f64 {
        let y: Vec<f64> = self.channel_amplitudes[l].iter().map(|a| a.norm_sqr()).collect();
        integrate(&self.energy_grid, &y, 0.0, f64::INFINITY)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy_ev,density,angle_integrated\n");
        for i in 0..self.energy_grid.len() {
            let _ = writeln!(
                out,
                "{:.6},{:.9e},{:.9e}",
                self.energy_grid[i], self.density[i], self.angle_integrated[i]
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Builds the spectrum on a uniform grid `0, step, …, ≥ e_max` (eV).
pub fn directional_spectrum(
    amplitudes: &ChannelAmplitudes,
    charge: f64,
    e_max_ev: f64,
    step_ev: f64,
) -> Result<PhotoelectronSpectrum> {
    if !(step_ev > 0.0) || !(e_max_ev > step_ev) {
        return Err(Error::Domain(format!(
            "energy grid needs 0 < step < e_max, got step {step_ev}, e_max {e_max_ev}"
        )));
    }
    let points = (e_max_ev / step_ev).ceil() as usize + 1;
    let energy_grid: Vec<f64> = (0..points).map(|i| i as f64 * step_ev).collect();
    let mut density = Vec::with_capacity(points);
    let mut angle_integrated = Vec::with_capacity(points);
    let mut channel_amplitudes = vec![Vec::with_capacity(points); amplitudes.continuum.len()];
    for &e in &energy_grid {
        // k -> 0 makes σ_l ill-defined but the sum's modulus is unaffected by
        // a common phase, so a tiny floor is harmless.
        let k = (2.0 * (e / HARTREE_EV).max(1e-12)).sqrt();
        let mut coherent = Complex64::new(0.0, 0.0);
        let mut incoherent = 0.0;
        for ch in &amplitudes.continuum {
            let a = ch.interpolate(e);
            let phase =
                Complex64::i().powu(ch.l as u32).conj() * Complex64::from_polar(1.0, coulomb_phase(ch.l, charge, k));
            coherent += phase * a * ylm0_forward(ch.l);
            incoherent += a.norm_sqr();
            channel_amplitudes[ch.l].push(a);
        }
        density.push(coherent.norm_sqr());
        angle_integrated.push(incoherent);
    }
    Ok(PhotoelectronSpectrum {
        energy_grid,
        density,
        angle_integrated,
        channel_amplitudes,
    })
}

/// Trapezoidal integral of the piecewise-linear `(x, y)` over `[lo, hi]`.
pub fn integrate(x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let lo = lo.max(x[0]);
    let hi = hi.min(x[x.len() - 1]);
    if hi <= lo {
        return 0.0;
    }
    let at = |t: f64| -> f64 {
        let j = x.partition_point(|&v| v < t).clamp(1, x.len() - 1);
        let w = (t - x[j - 1]) / (x[j] - x[j - 1]);
        y[j - 1] * (1.0 - w) + y[j] * w
    };
    let mut total = 0.0;
    let mut prev = (lo, at(lo));
    let start = x.partition_point(|&v| v <= lo);
    for j in start..x.len() {
        if x[j] >= hi {
            break;
        }
        total += 0.5 * (x[j] - prev.0) * (y[j] + prev.1);
        prev = (x[j], y[j]);
    }
    total + 0.5 * (hi - prev.0) * (at(hi) + prev.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    /// Number of absorbed harmonic photons.
    pub photon_order: u32,
    /// 1-based position within the order, counted from the lowest photon sum.
    pub peak_index: u32,
    /// Sum of the absorbed harmonic orders.
    pub harmonic_sum: u32,
    pub expected_energy_ev: f64,
    pub window_ev: (f64, f64),
    /// `None` when the window holds no probability.
    pub centroid_ev: Option<f64>,
    /// Directional probability in the window.
    pub probability: f64,
    /// Angle-integrated probability in the window.
    pub angle_integrated: f64,
    /// The window intersects the energy span of another photon order.
    pub overlaps_other_order: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTable {
    pub harmonics: u32,
    pub photon_energy_ev: f64,
    pub ionization_potential_ev: f64,
    pub peaks: Vec<PeakRecord>,
}

impl PeakTable {
    pub fn order(&self, photon_order: u32) -> impl Iterator<Item = &PeakRecord> {
        self.peaks.iter().filter(move |p| p.photon_order == photon_order)
    }

    pub fn get(&self, photon_order: u32, peak_index: u32) -> Option<&PeakRecord> {
        self.order(photon_order).find(|p| p.peak_index == peak_index)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Highest photon order assigned by [`locate_peaks`].
pub const MAX_PHOTON_ORDER: u32 = 3;

/// Expected peak energies (eV) of one photon order, with their photon sums.
/// Sub-threshold combinations are dropped.
fn expected_peaks(comb: &HarmonicComb, ionization_potential_ev: f64, order: u32) -> Vec<(u32, u32, f64)> {
    let orders = comb.orders();
    let lo = order * orders[0];
    let hi = order * orders[orders.len() - 1];
    let w_ev = au_to_ev(comb.fundamental());
    (lo..=hi)
        .step_by(2)
        .enumerate()
        .filter_map(|(i, sum)| {
            let e = sum as f64 * w_ev - ionization_potential_ev;
            (e > 0.0).then_some((i as u32 + 1, sum, e))
        })
        .collect()
}

fn check_spacing(energies: &[f64], photon_energy_ev: f64) -> Result<()> {
    for pair in energies.windows(2) {
        let gap = pair[1] - pair[0];
        if gap < 2.0 * photon_energy_ev * (1.0 - 1e-9) {
            return Err(Error::PeakStructure(format!(
                "peaks at {:.3} and {:.3} eV are closer than two photon energies; windows collide",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

/// Assigns windows of `±ħω_L` around every energy-conserving combination of
/// 1, 2 and 3 harmonic photons and integrates the spectrum in each.
pub fn locate_peaks(
    spectrum: &PhotoelectronSpectrum,
    comb: &HarmonicComb,
    ionization_potential_ev: f64,
) -> Result<PeakTable> {
    let w_ev = au_to_ev(comb.fundamental());
    let per_order: Vec<Vec<(u32, u32, f64)>> = (1..=MAX_PHOTON_ORDER)
        .map(|n| expected_peaks(comb, ionization_potential_ev, n))
        .collect();
    let spans: Vec<Option<(f64, f64)>> = per_order
        .iter()
        .map(|p| {
            let first = p.first()?;
            let last = p.last()?;
            Some((first.2 - w_ev, last.2 + w_ev))
        })
        .collect();
    let x = &spectrum.energy_grid;
    let weighted: Vec<f64> = x.iter().zip(&spectrum.density).map(|(e, d)| e * d).collect();
    let mut peaks = Vec::new();
    for (oi, list) in per_order.iter().enumerate() {
        let energies: Vec<f64> = list.iter().map(|p| p.2).collect();
        check_spacing(&energies, w_ev)?;
        for &(peak_index, harmonic_sum, e) in list {
            let window = ((e - w_ev).max(0.0), e + w_ev);
            let overlaps_other_order = spans
                .iter()
                .enumerate()
                .any(|(oj, s)| oj != oi && s.is_some_and(|(a, b)| window.0 < b && window.1 > a));
            let probability = integrate(x, &spectrum.density, window.0, window.1);
            let angle_integrated = integrate(x, &spectrum.angle_integrated, window.0, window.1);
            let moment = integrate(x, &weighted, window.0, window.1);
            let centroid_ev = (probability > 0.0).then(|| moment / probability);
            peaks.push(PeakRecord {
                photon_order: oi as u32 + 1,
                peak_index,
                harmonic_sum,
                expected_energy_ev: e,
                window_ev: window,
                centroid_ev,
                probability,
                angle_integrated,
                overlaps_other_order,
            });
        }
    }
    Ok(PeakTable {
        harmonics: comb.len() as u32,
        photon_energy_ev: w_ev,
        ionization_potential_ev,
        peaks,
    })
}

/// Probability in the union of the windows of one photon order.
pub fn integrate_order_subset(table: &PeakTable, photon_order: u32, which: Density) -> Result<f64> {
    let mut any = false;
    let total = table
        .order(photon_order)
        .inspect(|_| any = true)
        .map(|p| match which {
            Density::Directional => p.probability,
            Density::AngleIntegrated => p.angle_integrated,
        })
        .sum();
    if any {
        Ok(total)
    } else {
        Err(Error::Empty(format!("no {photon_order}-photon peaks above threshold")))
    }
}

/// Probability of the 2-photon peak fed by `N` ordered photon pairs.
pub fn central_peak_probability(table: &PeakTable, which: Density) -> Result<f64> {
    table
        .get(2, table.harmonics)
        .map(|p| match which {
            Density::Directional => p.probability,
            Density::AngleIntegrated => p.angle_integrated,
        })
        .ok_or_else(|| Error::Empty("central 2-photon peak lies below threshold".into()))
}

/// File stem for per-run spectrum exports.
pub fn spectrum_file_stem(harmonics: usize, seed: u64) -> String {
    format!("spectrum_n{harmonics}_seed{seed:016x}")
}
