//! Length-gauge time propagation on the B-spline × partial-wave basis.
//!
//! One step is a Strang splitting `A(dt/2) D(dt) A(dt/2)`: `A` is the
//! field-free Hamiltonian (block diagonal in `l`), `D` the dipole coupling
//! `E(t) z` (tridiagonal in `l`). Both factors are Crank–Nicolson (Cayley)
//! maps, which are unitary in the overlap metric. The angular part of `z` is
//! diagonalized once, so `D` reduces to `l_max + 1` independent banded solves
//! in the rotated channel basis.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{angular_factor, RadialBasis};
use crate::error::{Error, Result};
use crate::field::{sample_field, HarmonicComb, PulseEnvelope};
use crate::linalg::{apply_pencil, ComplexSymBandLdl, SymBand};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Wavefunction coefficients, one complex B-spline vector per `l` channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionState {
    pub channels: Vec<Vec<Complex64>>,
    pub time: f64,
}

impl WavefunctionState {
    /// Places real radial coefficients `coeffs` in channel `l` at `t = 0`.
    pub fn from_channel(l_max: usize, n_basis: usize, l: usize, coeffs: &[f64]) -> Self {
        let mut channels = vec![vec![ZERO; n_basis]; l_max + 1];
        for (c, &v) in channels[l].iter_mut().zip(coeffs) {
            *c = Complex64::new(v, 0.0);
        }
        Self { channels, time: 0.0 }
    }

    pub fn l_max(&self) -> usize {
        self.channels.len() - 1
    }

    /// `Σ_l ⟨c_l|S|c_l⟩`.
    pub fn norm_sqr(&self, overlap: &SymBand) -> f64 {
        self.channels.iter().map(|c| metric(overlap, c, c).re).sum()
    }

    /// Checkpoint: one JSON header line, then little-endian `(re, im)` pairs.
    pub fn write_checkpoint(&self, path: impl AsRef<Path>, basis_hash: &str) -> Result<()> {
        let path = path.as_ref();
        let header = CheckpointHeader {
            basis_hash: basis_hash.to_string(),
            time: self.time,
            l_max: self.l_max(),
            n_basis: self.channels[0].len(),
        };
        let mut buf = serde_json::to_vec(&header)?;
        buf.push(b'\n');
        for c in self.channels.iter().flatten() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint, rejecting one written for a different basis.
    pub fn read_checkpoint(path: impl AsRef<Path>, basis_hash: &str) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(f);
        let mut line = String::new();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
        if header.basis_hash != basis_hash {
            return Err(Error::Config(format!(
                "checkpoint {} was written for basis {}, expected {basis_hash}",
                path.display(),
                header.basis_hash
            )));
        }
        let mut raw = Vec::new();
        reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
        let expected = (header.l_max + 1) * header.n_basis * 16;
        if raw.len() != expected {
            return Err(Error::Config(format!(
                "checkpoint {} truncated: {} of {expected} bytes",
                path.display(),
                raw.len()
            )));
        }
        let values: Vec<Complex64> = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self {
            channels: values.chunks(header.n_basis).map(<[_]>::to_vec).collect(),
            time: header.time,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    basis_hash: String,
    time: f64,
    l_max: usize,
    n_basis: usize,
}

/// `x^† S y`.
pub fn metric(overlap: &SymBand, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let mut sy = vec![ZERO; y.len()];
    overlap.mul_complex_into(y, &mut sy);
    x.iter().zip(&sy).map(|(a, b)| a.conj() * b).sum()
}

/// Precomputed operators for a fixed basis, charge, `l_max` and time step.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt: f64,
    overlap: SymBand,
    radial_r: SymBand,
    hamiltonians: Vec<SymBand>,
    /// `S + i dt/4 H_l`, factorized.
    atomic: Vec<ComplexSymBandLdl>,
    /// Orthogonal eigenvectors (columns) of the `cos θ` matrix in the `l` basis.
    angular_vectors: DMatrix<f64>,
    angular_values: Vec<f64>,
    dipole: Vec<ComplexSymBandLdl>,
    scratch: Vec<Vec<Complex64>>,
    rhs: Vec<Complex64>,
}

impl Propagator {
    pub fn new(basis: &RadialBasis, charge: f64, l_max: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let overlap = basis.overlap().clone();
        let hamiltonians: Vec<SymBand> = (0..=l_max).map(|l| basis.hamiltonian(charge, l)).collect();
        let atomic = hamiltonians
            .iter()
            .enumerate()
            .map(|(l, h)| {
                ComplexSymBandLdl::factor(&overlap, h, 0.25 * dt).ok_or_else(|| Error::LinearSolve {
                    time: 0.0,
                    reason: format!("atomic factorization failed for l={l}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let dim = l_max + 1;
        let mut cos_theta = DMatrix::zeros(dim, dim);
        for l in 0..l_max {
            cos_theta[(l, l + 1)] = angular_factor(l);
            cos_theta[(l + 1, l)] = angular_factor(l);
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(cos_theta);
        let radial_r = basis.r().clone();
        let dipole = (0..dim)
            .map(|_| ComplexSymBandLdl::factor(&overlap, &radial_r, 0.0).expect("overlap is positive definite"))
            .collect();
        let n = basis.n_basis();
        Ok(Self {
            dt,
            overlap,
            radial_r,
            hamiltonians,
            atomic,
            angular_vectors: eig.eigenvectors,
            angular_values: eig.eigenvalues.iter().copied().collect(),
            dipole,
            scratch: vec![vec![ZERO; n]; dim],
            rhs: vec![ZERO; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn l_max(&self) -> usize {
        self.hamiltonians.len() - 1
    }

    pub fn overlap(&self) -> &SymBand {
        &self.overlap
    }

    fn atomic_half_step(&mut self, state: &mut WavefunctionState) {
        let tau = 0.25 * self.dt;
        for (l, c) in state.channels.iter_mut().enumerate() {
            apply_pencil(&self.overlap, &self.hamiltonians[l], -tau, c, &mut self.rhs);
            self.atomic[l].solve_in_place(&mut self.rhs);
            c.copy_from_slice(&self.rhs);
        }
    }

    fn dipole_step(&mut self, state: &mut WavefunctionState, field: f64) -> Result<()> {
        if field == 0.0 {
            return Ok(());
        }
        let dim = self.angular_values.len();
        let u = &self.angular_vectors;
        // χ_k = Σ_l U_lk ψ_l
        for k in 0..dim {
            let out = &mut self.scratch[k];
            out.iter_mut().for_each(|v| *v = ZERO);
            for l in 0..dim {
                let w = u[(l, k)];
                if w != 0.0 {
                    for (o, p) in out.iter_mut().zip(&state.channels[l]) {
                        *o += p * w;
                    }
                }
            }
        }
        for k in 0..dim {
            let a = 0.5 * self.dt * field * self.angular_values[k];
            if !self.dipole[k].refactor(&self.overlap, &self.radial_r, a) {
                return Err(Error::LinearSolve {
                    time: state.time,
                    reason: format!("zero pivot in dipole factorization, angular mode {k}"),
                });
            }
            apply_pencil(&self.overlap, &self.radial_r, -a, &self.scratch[k], &mut self.rhs);
            self.dipole[k].solve_in_place(&mut self.rhs);
            self.scratch[k].copy_from_slice(&self.rhs);
        }
        // ψ_l = Σ_k U_lk χ_k
        for l in 0..dim {
            let out = &mut state.channels[l];
            out.iter_mut().for_each(|v| *v = ZERO);
            for k in 0..dim {
                let w = u[(l, k)];
                if w != 0.0 {
                    for (o, x) in out.iter_mut().zip(&self.scratch[k]) {
                        *o += x * w;
                    }
                }
            }
        }
        Ok(())
    }

    /// Advances one step with the field value taken at the step midpoint.
    pub fn step(&mut self, state: &mut WavefunctionState, field_value: f64) -> Result<()> {
        if state.channels.len() != self.hamiltonians.len() {
            return Err(Error::Domain(format!(
                "state has {} channels, propagator {}",
                state.channels.len(),
                self.hamiltonians.len()
            )));
        }
        self.atomic_half_step(state);
        self.dipole_step(state, field_value)?;
        self.atomic_half_step(state);
        state.time += self.dt;
        if state.channels.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::LinearSolve {
                time: state.time,
                reason: "non-finite coefficients".into(),
            });
        }
        Ok(())
    }

    /// Propagates over the whole envelope, `t ∈ [0, 2 fwhm]`.
    pub fn propagate_pulse(
        &mut self,
        initial: &WavefunctionState,
        comb: &HarmonicComb,
        envelope: &PulseEnvelope,
        monitor: &BoundaryMonitor,
    ) -> Result<(WavefunctionState, PulseDiagnostics)> {
        self.propagate_with(
            initial,
            envelope.total_duration(),
            comb.highest_frequency(),
            monitor,
            |t| sample_field(comb, envelope, t),
        )
    }

    /// Propagates from `initial.time` for `duration` under an arbitrary field.
    ///
    /// `highest_frequency` is used only to check that the step resolves the
    /// field (`dt <= T/40`).
    pub fn propagate_with(
        &mut self,
        initial: &WavefunctionState,
        duration: f64,
        highest_frequency: f64,
        monitor: &BoundaryMonitor,
        field: impl Fn(f64) -> f64,
    ) -> Result<(WavefunctionState, PulseDiagnostics)> {
        if highest_frequency > 0.0 {
            let period = std::f64::consts::TAU / highest_frequency;
            if self.dt > period / 40.0 {
                return Err(Error::Domain(format!(
                    "time step {} does not resolve the highest harmonic (period {period:.4}, need dt <= {:.4})",
                    self.dt,
                    period / 40.0
                )));
            }
        }
        let steps = (duration / self.dt - 1e-9).ceil().max(0.0) as usize;
        let mut state = initial.clone();
        let t0 = state.time;
        let initial_norm = state.norm_sqr(&self.overlap);
        let mut norm_history = vec![(t0, initial_norm)];
        let mut last_norm = initial_norm;
        for i in 0..steps {
            let mid = t0 + (i as f64 + 0.5) * self.dt;
            self.step(&mut state, field(mid))?;
            if (i + 1) % NORM_CHECK_INTERVAL == 0 || i + 1 == steps {
                let norm = state.norm_sqr(&self.overlap);
                let drift = (norm - last_norm).abs();
                if drift > 1e-6 {
                    return Err(Error::NormDrift {
                        drift,
                        steps: NORM_CHECK_INTERVAL,
                        time: state.time,
                    });
                }
                last_norm = norm;
                norm_history.push((state.time, norm));
            }
        }
        let final_norm = state.norm_sqr(&self.overlap);
        let boundary_population = monitor.population(&state);
        Ok((
            state,
            PulseDiagnostics {
                steps,
                initial_norm,
                final_norm,
                norm_drift: (final_norm - initial_norm).abs(),
                norm_history,
                boundary_population,
                boundary_contaminated: boundary_population > 1e-6,
            },
        ))
    }
}

const NORM_CHECK_INTERVAL: usize = 100;

/// Population within the outer 10% of the box.
#[derive(Debug, Clone)]
pub struct BoundaryMonitor {
    outer_overlap: SymBand,
}

impl BoundaryMonitor {
    pub fn new(basis: &RadialBasis) -> Self {
        Self {
            outer_overlap: basis.overlap_beyond(0.9 * basis.box_radius()),
        }
    }

    pub fn population(&self, state: &WavefunctionState) -> f64 {
        state
            .channels
            .iter()
            .map(|c| metric(&self.outer_overlap, c, c).re)
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseDiagnostics {
    pub steps: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub norm_drift: f64,
    /// `(time, norm)` sampled every 100 steps.
    pub norm_history: Vec<(f64, f64)>,
    pub boundary_population: f64,
    pub boundary_contaminated: bool,
}
