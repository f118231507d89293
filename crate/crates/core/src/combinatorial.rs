//! Path-counting model of two-photon absorption from an `N`-harmonic comb
//! with equal field strengths and equal, real transition amplitudes.
//!
//! Probabilities are returned in units of `α² = (M E²)²`, so every closed
//! form is an exact integer.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Locked,
    Random,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Locked => "locked",
            Scheme::Random => "random",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "locked" => Ok(Scheme::Locked),
            "random" => Ok(Scheme::Random),
            other => Err(Error::Config(format!(
                "unknown phase scheme '{other}', expected 'locked' or 'random'"
            ))),
        }
    }
}

/// Model parameters: `α = M E²` and the number of harmonics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinatorialParams {
    alpha: f64,
    harmonics: u32,
}

impl CombinatorialParams {
    pub fn new(alpha: f64, harmonics: u32) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        if harmonics == 0 {
            return Err(Error::Domain("need at least one harmonic".into()));
        }
        Ok(Self { alpha, harmonics })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn harmonics(&self) -> u32 {
        self.harmonics
    }
}

/// All ordered harmonic-index pairs reaching one two-photon peak.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakPathSet {
    /// 1-based, ordered by final energy.
    pub peak_index: u32,
    /// 1-based harmonic indices `(first, second)`.
    pub ordered_pairs: Vec<(u32, u32)>,
}

impl PeakPathSet {
    pub fn path_count(&self) -> u32 {
        self.ordered_pairs.len() as u32
    }
}

/// Ordered pairs `(i, j)`, `1 <= i, j <= n`, with `i + j = k + 1`.
pub fn enumerate_paths(n: u32, k: u32) -> Result<PeakPathSet> {
    if n == 0 || k == 0 || k > 2 * n - 1 {
        return Err(Error::Domain(format!(
            "peak index {k} outside [1, {}] for N = {n}",
            2 * n.max(1) - 1
        )));
    }
    let ordered_pairs = (1..=n)
        .filter_map(|i| {
            let j = (k + 1).checked_sub(i)?;
            (1..=n).contains(&j).then_some((i, j))
        })
        .collect();
    Ok(PeakPathSet {
        peak_index: k,
        ordered_pairs,
    })
}

/// Number of ordered paths into peak `k` of an `n`-harmonic comb.
pub fn path_count(n: u32, k: u32) -> u32 {
    if k <= n {
        k
    } else {
        2 * n - k
    }
}

/// Peak probability in units of α².
///
/// Locked phases add all `m` paths coherently (`m²`). Random phases keep only
/// the phase-independent terms: each unordered off-diagonal pair contributes
/// `|2|²` and a diagonal path `|1|²`, giving `2m - 1` for odd `m` and `2m`
/// for even `m`.
pub fn peak_units(n: u32, k: u32, scheme: Scheme) -> Result<u64> {
    let m = enumerate_paths(n, k)?.path_count() as u64;
    Ok(match scheme {
        Scheme::Locked => m * m,
        Scheme::Random if m % 2 == 1 => 2 * m - 1,
        Scheme::Random => 2 * m,
    })
}

pub fn peak_probability(params: &CombinatorialParams, k: u32, scheme: Scheme) -> Result<f64> {
    Ok(params.alpha.powi(2) * peak_units(params.harmonics, k, scheme)? as f64)
}

/// Central-peak probability in α² units: `N²` locked; `2N - 1` (odd N) or
/// `2N` (even N) random.
pub fn central_units(n: u32, scheme: Scheme) -> u64 {
    peak_units(n, n, scheme).expect("central peak always exists")
}

/// Total two-photon probability in α² units: `(2N³ + N)/3` locked,
/// `2N² - N` random.
pub fn total_units(n: u32, scheme: Scheme) -> u64 {
    let n = n as u64;
    match scheme {
        Scheme::Locked => (2 * n * n * n + n) / 3,
        Scheme::Random => 2 * n * n - n,
    }
}

pub fn total_probability(params: &CombinatorialParams, scheme: Scheme) -> f64 {
    params.alpha.powi(2) * total_units(params.harmonics, scheme) as f64
}

/// Monte-Carlo estimate of the random-phase peak probability (α² units) with
/// unit amplitudes: the mean of `|Σ_(i,j) e^{i(φ_i + φ_j)}|²` over uniformly
/// drawn phase vectors.
///
/// Returns `(mean, standard error)`.
pub fn rp_average_oracle(n: u32, k: u32, runs: usize, seed: u64) -> Result<(f64, f64)> {
    if runs == 0 {
        return Err(Error::Domain("oracle needs at least one run".into()));
    }
    let paths = enumerate_paths(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases = vec![0.0; n as usize];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..runs {
        phases.iter_mut().for_each(|p| *p = rng.random_range(0.0..TAU));
        let amp: Complex64 = paths
            .ordered_pairs
            .iter()
            .map(|&(i, j)| Complex64::from_polar(1.0, phases[i as usize - 1] + phases[j as usize - 1]))
            .sum();
        let p = amp.norm_sqr();
        sum += p;
        sum_sq += p * p;
    }
    let mean = sum / runs as f64;
    let var = (sum_sq / runs as f64 - mean * mean).max(0.0);
    Ok((mean, (var / runs as f64).sqrt()))
}

/// Monte-Carlo estimate of the random-phase total (α² units), summing every
/// peak with a shared phase draw per run. Returns `(mean, standard error)`.
pub fn rp_total_oracle(n: u32, runs: usize, seed: u64) -> Result<(f64, f64)> {
    if runs == 0 || n == 0 {
        return Err(Error::Domain("oracle needs N >= 1 and at least one run".into()));
    }
    let sets: Vec<PeakPathSet> = (1..2 * n).map(|k| enumerate_paths(n, k)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases = vec![0.0; n as usize];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..runs {
        phases.iter_mut().for_each(|p| *p = rng.random_range(0.0..TAU));
        let p: f64 = sets
            .iter()
            .map(|s| {
                s.ordered_pairs
                    .iter()
                    .map(|&(i, j)| Complex64::from_polar(1.0, phases[i as usize - 1] + phases[j as usize - 1]))
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        sum += p;
        sum_sq += p * p;
    }
    let mean = sum / runs as f64;
    let var = (sum_sq / runs as f64 - mean * mean).max(0.0);
    Ok((mean, (var / runs as f64).sqrt()))
}

/// One row of the model table emitted by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub harmonics: u32,
    pub scheme: Scheme,
    pub total: u64,
    pub central: u64,
}

pub fn model_table(n_max: u32, schemes: &[Scheme]) -> Vec<ModelRow> {
    let mut rows = Vec::new();
    for n in 1..=n_max {
        for &scheme in schemes {
            rows.push(ModelRow {
                harmonics: n,
                scheme,
                total: total_units(n, scheme),
                central: central_units(n, scheme),
            });
        }
    }
    rows
}
