use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::eigen::{solve_for_charge, ChannelEigensystem};
use super::RadialBasis;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ATIEIG01";

/// On-disk cache of channel eigensystems keyed by `(Z, basis hash, l)`.
#[derive(Debug, Clone)]
pub struct EigenCache {
    dir: PathBuf,
}

impl EigenCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, charge: f64, basis: &RadialBasis, l: usize) -> PathBuf {
        self.dir.join(format!("eig_Z{}_{}_l{l}.bin", charge, basis.hash()))
    }

    /// Loads a cached eigensystem, or solves and stores it.
    pub fn get_or_solve(&self, basis: &RadialBasis, charge: f64, l: usize) -> Result<ChannelEigensystem> {
        let path = self.path(charge, basis, l);
        if path.exists() {
            match read(&path, basis.n_basis()) {
                Ok((energies, vectors)) => return Ok(ChannelEigensystem::from_parts(l, charge, energies, vectors)),
                Err(e) => log::warn!("ignoring unreadable eigen cache {}: {e}", path.display()),
            }
        }
        let eig = solve_for_charge(basis, charge, l)?;
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        write(&path, &eig)?;
        Ok(eig)
    }
}

fn write(path: &Path, eig: &ChannelEigensystem) -> Result<()> {
    let n = eig.len();
    let mut buf = Vec::with_capacity(16 + 8 * n * (n + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for e in eig.energies() {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    for v in eig.vectors().as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read(path: &Path, expected_n: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let corrupt = || Error::Basis(format!("corrupt eigen cache {}", path.display()));
    if buf.len() < 16 || &buf[..8] != MAGIC {
        return Err(corrupt());
    }
    let n = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    if n != expected_n || buf.len() != 16 + 8 * n * (n + 1) {
        return Err(corrupt());
    }
    let mut vals = buf[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let energies: Vec<f64> = vals.by_ref().take(n).collect();
    let vectors = DMatrix::from_iterator(n, n, vals);
    Ok((energies, vectors))
}
