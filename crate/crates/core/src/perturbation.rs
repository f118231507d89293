//! Lowest-order two-photon amplitudes on the discretized spectrum.
//!
//! The second-order amplitude from `|g⟩` (an s state) through the p channel
//! to a final s or d continuum state is the spectral sum
//!
//! ```text
//! M = Σ_n ⟨f|z|n⟩⟨n|z|g⟩ / (E_g + ω₁ − E_n)
//! ```
//!
//! over every p eigenstate of the box, bound and continuum alike. The same
//! number is obtained from one inhomogeneous solve
//! `(E_g + ω₁ − H₁)|λ⟩ = z|g⟩`, which is used as an independent check.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{angular_factor, initial_state, solve_channel, ChannelEigensystem, HydrogenicSpec, RadialBasis};
use crate::error::{Error, Result};
use crate::field::{sample_field, HarmonicComb, PulseEnvelope};
use crate::linalg::SymBand;
use crate::units::au_to_ev;

/// Distance (a.u.) from an intermediate eigenvalue below which a
/// denominator is considered resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pathway {
    /// `s → p → s`
    Sps,
    /// `s → p → d`
    Spd,
}

impl Pathway {
    pub fn final_l(self) -> usize {
        match self {
            Pathway::Sps => 0,
            Pathway::Spd => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pathway::Sps => "s->p->s",
            Pathway::Spd => "s->p->d",
        }
    }
}

/// Bound p state closest to the one-photon intermediate energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// e.g. `"2p"`, or `"continuum"` above threshold.
    pub label: String,
    /// `E_g + ω₁ − E_n`, eV. Positive means detuned from above.
    pub detuning_ev: f64,
}

impl Resonance {
    pub fn post_resonance(&self) -> bool {
        self.label != "continuum" && self.detuning_ev > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonElement {
    pub first_order: Option<u32>,
    pub second_order: Option<u32>,
    pub pathway: Pathway,
    /// First and second photon energies, a.u.
    pub omega: (f64, f64),
    /// `E_g + ω₁ + ω₂`, a.u.
    pub final_energy: f64,
    /// Spectral sum, final state density-of-states normalized (per a.u.).
    pub value: f64,
    /// The same amplitude from the inhomogeneous solve.
    pub dalgarno_lewis: f64,
    pub resonant: bool,
    pub nearest_resonance: Resonance,
}

impl TwoPhotonElement {
    /// `|spectral − DL| / |DL|`.
    pub fn cross_check_error(&self) -> f64 {
        (self.value - self.dalgarno_lewis).abs() / self.dalgarno_lewis.abs().max(f64::MIN_POSITIVE)
    }
}

/// Precomputed eigensystems and dipole data for one ion and basis.
#[derive(Debug, Clone)]
pub struct TwoPhotonSolver {
    overlap: SymBand,
    radial_r: SymBand,
    h_p: SymBand,
    ground_energy: f64,
    ground: Vec<f64>,
    p: ChannelEigensystem,
    finals: [ChannelEigensystem; 2],
    /// `⟨n p| z |g⟩` for every p eigenstate.
    first_step: Vec<f64>,
}

impl TwoPhotonSolver {
    pub fn new(basis: &RadialBasis, spec: &HydrogenicSpec) -> Result<Self> {
        if spec.l != 0 {
            return Err(Error::Domain("two-photon amplitudes need an s initial state".into()));
        }
        let s_eig = solve_channel(basis, spec, 0)?;
        let (ground_energy, ground) = initial_state(&s_eig, spec)?;
        let p = solve_channel(basis, spec, 1)?;
        let d_eig = solve_channel(basis, spec, 2)?;
        let radial_r = basis.r().clone();
        let r_g = DVector::from_vec(radial_r.mul_real(&ground));
        let first_step = (p.vectors().transpose() * r_g * angular_factor(0)).as_slice().to_vec();
        for eig in [&s_eig, &d_eig] {
            if eig.energies().iter().filter(|&&e| e > 0.0).count() < 2 {
                return Err(Error::BasisTooSmall(format!(
                    "channel l={} needs at least two continuum states",
                    eig.l()
                )));
            }
        }
        Ok(Self {
            overlap: basis.overlap().clone(),
            h_p: basis.hamiltonian(spec.charge(), 1),
            radial_r,
            ground_energy,
            ground,
            p,
            finals: [s_eig, d_eig],
            first_step,
        })
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn intermediate(&self) -> &ChannelEigensystem {
        &self.p
    }

    fn final_channel(&self, pathway: Pathway) -> &ChannelEigensystem {
        match pathway {
            Pathway::Sps => &self.finals[0],
            Pathway::Spd => &self.finals[1],
        }
    }

    fn second_factor(pathway: Pathway) -> f64 {
        match pathway {
            Pathway::Sps => angular_factor(0),
            Pathway::Spd => angular_factor(1),
        }
    }

    /// Final box states bracketing `energy`, with linear weights.
    fn bracket(eig: &ChannelEigensystem, energy: f64) -> Vec<(usize, f64, f64)> {
        let e = eig.energies();
        let first = e.partition_point(|&x| x <= 0.0);
        let last = e.len() - 1;
        let rho = |i: usize| -> f64 {
            let width = if i == first {
                e[i + 1] - e[i]
            } else if i == last {
                e[i] - e[i - 1]
            } else {
                0.5 * (e[i + 1] - e[i - 1])
            };
            1.0 / width
        };
        if energy <= e[first] {
            return vec![(first, 1.0, rho(first))];
        }
        if energy >= e[last] {
            return vec![(last, 1.0, rho(last))];
        }
        let j = e.partition_point(|&x| x < energy);
        let w = (energy - e[j - 1]) / (e[j] - e[j - 1]);
        vec![(j - 1, 1.0 - w, rho(j - 1)), (j, w, rho(j))]
    }

    fn nearest_resonance(&self, intermediate: f64) -> Resonance {
        if intermediate > 0.0 {
            return Resonance {
                label: "continuum".into(),
                detuning_ev: au_to_ev(intermediate),
            };
        }
        let e = self.p.energies();
        let bound = e.partition_point(|&x| x < 0.0);
        let (idx, en) = e[..bound]
            .iter()
            .enumerate()
            .min_by(|a, b| (intermediate - a.1).abs().total_cmp(&(intermediate - b.1).abs()))
            .expect("p channel has bound states");
        Resonance {
            label: format!("{}p", idx + 2),
            detuning_ev: au_to_ev(intermediate - en),
        }
    }

    /// Amplitude for absorbing `omega1` then `omega2` (a.u.).
    pub fn element(&self, omega1: f64, omega2: f64, pathway: Pathway) -> Result<TwoPhotonElement> {
        let final_energy = self.ground_energy + omega1 + omega2;
        if final_energy <= 0.0 {
            return Err(Error::Domain(format!(
                "final energy {final_energy:.5} a.u. lies below threshold"
            )));
        }
        let intermediate = self.ground_energy + omega1;
        let p_e = self.p.energies();
        let resonant = p_e.iter().any(|&e| (intermediate - e).abs() < RESONANCE_TOLERANCE);

        // Dalgarno–Lewis: ((E_g + ω₁) S − H₁) λ = z g, dense LU.
        let a = self.overlap.combine(intermediate, &self.h_p, -1.0).to_dense();
        let rhs = DVector::from_vec(self.radial_r.mul_real(&self.ground)) * angular_factor(0);
        let lambda = a.lu().solve(&rhs).ok_or_else(|| Error::LinearSolve {
            time: 0.0,
            reason: format!("Dalgarno-Lewis system singular at ω₁ = {omega1}"),
        })?;

        let f_eig = self.final_channel(pathway);
        let c2 = Self::second_factor(pathway);
        let mut value = 0.0;
        let mut dl = 0.0;
        for (idx, w, rho) in Self::bracket(f_eig, final_energy) {
            let r_f = DVector::from_vec(self.radial_r.mul_real(f_eig.vector(idx))) * c2;
            let to_p = self.p.vectors().transpose() * &r_f;
            let sum: f64 = (0..p_e.len())
                .map(|n| to_p[n] * self.first_step[n] / (intermediate - p_e[n]))
                .sum();
            value += w * rho.sqrt() * sum;
            dl += w * rho.sqrt() * r_f.dot(&lambda);
        }
        Ok(TwoPhotonElement {
            first_order: None,
            second_order: None,
            pathway,
            omega: (omega1, omega2),
            final_energy,
            value,
            dalgarno_lewis: dl,
            resonant,
            nearest_resonance: self.nearest_resonance(intermediate),
        })
    }

    /// Element for harmonic orders `q1`, `q2` of `fundamental` (a.u.).
    pub fn harmonic_element(&self, fundamental: f64, q1: u32, q2: u32, pathway: Pathway) -> Result<TwoPhotonElement> {
        let mut el = self.element(q1 as f64 * fundamental, q2 as f64 * fundamental, pathway)?;
        el.first_order = Some(q1);
        el.second_order = Some(q2);
        Ok(el)
    }

    /// First-order ionization probability `Σ_f |∫ E(t) ⟨f|z|g⟩ e^{i(E_f−E_g)t} dt|²`
    /// over positive-energy p states.
    pub fn first_order_ionization(&self, comb: &HarmonicComb, envelope: &PulseEnvelope, dt: f64) -> f64 {
        let steps = (envelope.total_duration() / dt).ceil() as usize;
        let h = envelope.total_duration() / steps as f64;
        let field: Vec<f64> = (0..=steps)
            .map(|i| sample_field(comb, envelope, i as f64 * h))
            .collect();
        let e = self.p.energies();
        let first = e.partition_point(|&x| x <= 0.0);
        (first..e.len())
            .map(|n| {
                let omega = e[n] - self.ground_energy;
                let step = Complex64::from_polar(1.0, omega * h);
                let mut phase = Complex64::new(1.0, 0.0);
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &f) in field.iter().enumerate() {
                    let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                    acc += phase * (w * f);
                    phase *= step;
                }
                (acc * h * self.first_step[n]).norm_sqr()
            })
            .sum()
    }
}

/// Builds a solver and evaluates one element, checking the requested final
/// energy against `E_g + ω₁ + ω₂` (1e-6 a.u.).
pub fn two_photon_element(
    spec: &HydrogenicSpec,
    basis: &RadialBasis,
    omega1: f64,
    omega2: f64,
    final_energy: f64,
    pathway: Pathway,
) -> Result<TwoPhotonElement> {
    let solver = TwoPhotonSolver::new(basis, spec)?;
    let expected = solver.ground_energy() + omega1 + omega2;
    if (expected - final_energy).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "final energy {final_energy} does not match E_g + ω₁ + ω₂ = {expected}"
        )));
    }
    solver.element(omega1, omega2, pathway)
}

/// Rows are the first absorbed photon, columns the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub orders: Vec<u32>,
    pub photon_energy_ev: f64,
    pub pathway: Pathway,
    pub cells: Vec<Vec<TwoPhotonElement>>,
}

impl TableGrid {
    pub fn value(&self, q1: u32, q2: u32) -> Option<f64> {
        let i = self.orders.iter().position(|&q| q == q1)?;
        let j = self.orders.iter().position(|&q| q == q2)?;
        Some(self.cells[i][j].value)
    }

    /// Whether `|M|` strictly decreases along each row.
    pub fn row_monotone(&self) -> Vec<bool> {
        self.cells
            .iter()
            .map(|row| row.windows(2).all(|w| w[1].value.abs() < w[0].value.abs()))
            .collect()
    }

    /// Largest spectral-sum vs Dalgarno–Lewis relative deviation.
    pub fn max_cross_check_error(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(TwoPhotonElement::cross_check_error)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("first\\second");
        for q in &self.orders {
            let _ = write!(out, ",{q}");
        }
        out.push_str(",monotone,resonance,detuning_ev,status\n");
        let mono = self.row_monotone();
        for (i, row) in self.cells.iter().enumerate() {
            let _ = write!(out, "{}", self.orders[i]);
            for cell in row {
                let _ = write!(out, ",{:.9e}", cell.value);
            }
            let res = &row[0].nearest_resonance;
            let status = if res.post_resonance() {
                "post-resonance"
            } else if row.iter().any(|c| c.resonant) {
                "resonant"
            } else {
                "off-resonance"
            };
            let _ = writeln!(out, ",{},{},{:.4},{status}", mono[i], res.label, res.detuning_ev);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// All `(q₁, q₂)` elements for the given harmonic orders.
pub fn table_grid(solver: &TwoPhotonSolver, fundamental: f64, orders: &[u32], pathway: Pathway) -> Result<TableGrid> {
    let cells = orders
        .iter()
        .map(|&q1| {
            orders
                .iter()
                .map(|&q2| solver.harmonic_element(fundamental, q1, q2, pathway))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableGrid {
        orders: orders.to_vec(),
        photon_energy_ev: au_to_ev(fundamental),
        pathway,
        cells,
    })
}

/// One ordered photon pair feeding a peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathContribution {
    pub element: f64,
    pub field_i: f64,
    pub field_j: f64,
    pub phase_i: f64,
    pub phase_j: f64,
}

/// `|Σ M_ij E_i E_j e^{i(φ_i + φ_j)}|²`, every ordered pair listed explicitly.
pub fn predict_peak(paths: &[PathContribution]) -> f64 {
    paths
        .iter()
        .map(|p| Complex64::from_polar(p.element * p.field_i * p.field_j, p.phase_i + p.phase_j))
        .sum::<Complex64>()
        .norm_sqr()
}

/// Three consecutive harmonic phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceQuery {
    pub phases: (f64, f64, f64),
}

impl InterferenceQuery {
    /// `Δ = φ₁ + φ₃ − 2φ₂`, reduced to `(−π, π]`.
    pub fn delta(&self) -> f64 {
        let (a, b, c) = self.phases;
        let d = (a + c - 2.0 * b).rem_euclid(2.0 * PI);
        if d > PI {
            d - 2.0 * PI
        } else {
            d
        }
    }
}
