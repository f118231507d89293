use nalgebra::{DMatrix, DVector};

use super::{HydrogenicSpec, RadialBasis};
use crate::error::{Error, Result};

/// Field-free eigenpairs of one angular-momentum channel.
///
/// Eigenvectors are overlap-orthonormal and sign-fixed so that the radial
/// function's innermost lobe is positive.
#[derive(Debug, Clone)]
pub struct ChannelEigensystem {
    l: usize,
    charge: f64,
    energies: Vec<f64>,
    /// Column `j` holds the B-spline coefficients of state `j`.
    vectors: DMatrix<f64>,
}

impl ChannelEigensystem {
    pub(crate) fn from_parts(l: usize, charge: f64, energies: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        Self {
            l,
            charge,
            energies,
            vectors,
        }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    /// Ascending eigenvalues, atomic units.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        let n = self.vectors.nrows();
        &self.vectors.as_slice()[i * n..(i + 1) * n]
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Index of the first state with positive energy.
    pub fn first_continuum(&self) -> usize {
        self.energies.partition_point(|&e| e <= 0.0)
    }

    /// `max_j ||H c_j - E_j S c_j||` over states with `E_j < energy_cap`.
    pub fn max_residual(&self, basis: &RadialBasis, energy_cap: f64) -> f64 {
        let h = basis.hamiltonian(self.charge, self.l);
        let s = basis.overlap();
        let mut worst = 0.0_f64;
        for (j, &e) in self.energies.iter().enumerate() {
            if e >= energy_cap {
                break;
            }
            let c = self.vector(j);
            let hc = h.mul_real(c);
            let sc = s.mul_real(c);
            let r = hc.iter().zip(&sc).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        worst
    }
}

/// Solves `H_l c = E S c` for channel `l` of a hydrogenic ion.
pub fn solve_channel(basis: &RadialBasis, spec: &HydrogenicSpec, l: usize) -> Result<ChannelEigensystem> {
    solve_for_charge(basis, spec.charge(), l)
}

pub(crate) fn solve_for_charge(basis: &RadialBasis, charge: f64, l: usize) -> Result<ChannelEigensystem> {
    let s = basis.overlap().to_dense();
    let h = basis.hamiltonian(charge, l).to_dense();
    let chol = s.cholesky().ok_or_else(|| Error::Eigen {
        channel: l,
        reason: "overlap matrix is not positive definite".into(),
    })?;
    let lower = chol.l();
    // A = L^{-1} H L^{-T}
    let x = lower.solve_lower_triangular(&h).ok_or_else(|| Error::Eigen {
        channel: l,
        reason: "triangular solve failed".into(),
    })?;
    let a = lower
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Eigen {
            channel: l,
            reason: "triangular solve failed".into(),
        })?;
    let a = 0.5 * (&a + a.transpose());
    let eig = nalgebra::linalg::SymmetricEigen::try_new(a, 1e-15, 0).ok_or_else(|| Error::Eigen {
        channel: l,
        reason: "symmetric eigensolver did not converge".into(),
    })?;
    let coeffs = lower
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| Error::Eigen {
            channel: l,
            reason: "back transformation failed".into(),
        })?;

    let n = basis.n_basis();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v: DVector<f64> = coeffs.column(i).into_owned();
        if innermost_lobe_sign(basis, v.as_slice()) < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Eigen {
            channel: l,
            reason: "non-finite eigenvalue".into(),
        });
    }
    Ok(ChannelEigensystem {
        l,
        charge,
        energies,
        vectors,
    })
}

/// Sign of the radial function at the first sample exceeding 1e-3 of its
/// maximum magnitude, scanning outward from the origin.
fn innermost_lobe_sign(basis: &RadialBasis, c: &[f64]) -> f64 {
    let samples = basis.sample(c);
    let peak = samples.iter().map(|s| s.2.abs()).fold(0.0, f64::max);
    samples
        .iter()
        .find(|s| s.2.abs() > 1e-3 * peak)
        .map_or(1.0, |s| s.2.signum())
}

/// Overlap-normalized eigenvector of the requested initial state.
///
/// Selects the eigenvalue nearest `-Z²/(2n²)`; fails if none lies within 1e-6 a.u.
pub fn initial_state(eig: &ChannelEigensystem, spec: &HydrogenicSpec) -> Result<(f64, Vec<f64>)> {
    if eig.l() != spec.l as usize {
        return Err(Error::Domain(format!(
            "initial state has l={}, eigensystem is for l={}",
            spec.l,
            eig.l()
        )));
    }
    let target = spec.exact_energy();
    let (idx, e) = eig
        .energies()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .ok_or_else(|| Error::BasisTooSmall("empty eigensystem".into()))?;
    if (e - target).abs() > 1e-6 {
        return Err(Error::BasisTooSmall(format!(
            "no eigenvalue within 1e-6 a.u. of {target} (nearest {e})"
        )));
    }
    Ok((*e, eig.vector(idx).to_vec()))
}
