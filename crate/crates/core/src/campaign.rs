//! Ensembles of pulse simulations over harmonic count and phase scheme.
//!
//! A campaign is fully described by a [`CampaignSpec`]; its canonical JSON
//! hash names the output directory. Each run appends one JSON line to
//! `records.jsonl`, so an interrupted campaign resumes by skipping the
//! `(N, run_index)` pairs already on disk. Statistics are folded in a fixed
//! order and are therefore independent of scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{
    initial_state, solve_channel, BasisParams, ChannelEigensystem, EigenCache, HydrogenicSpec, RadialBasis,
};
use crate::combinatorial::Scheme;
use crate::error::{Error, Result};
use crate::field::{centered_orders, consecutive_orders, make_phases, HarmonicComb, PhaseScheme, PulseEnvelope};
use crate::propagator::{BoundaryMonitor, Propagator, PulseDiagnostics, WavefunctionState};
use crate::spectrum::{
    central_peak_probability, directional_spectrum, integrate_order_subset, locate_peaks, project_continuum, Density,
    PeakTable, PhotoelectronSpectrum, MAX_PHOTON_ORDER,
};
use crate::units::{au_to_ev, ev_to_au};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where the `N` harmonics sit on the odd-order ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum OrderPlacement {
    /// `q_o, q_o + 2, …`
    Lowest(u32),
    /// Grows around a centre order, filling below first.
    Centered(u32),
}

impl OrderPlacement {
    pub fn orders(&self, n: usize) -> Result<Vec<u32>> {
        match *self {
            OrderPlacement::Lowest(q) => {
                if q % 2 == 0 {
                    return Err(Error::InvalidComb(format!("lowest order {q} is not odd")));
                }
                Ok(consecutive_orders(q, n))
            }
            OrderPlacement::Centered(q) => centered_orders(q, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombTemplate {
    pub photon_energy_ev: f64,
    pub intensity_w_cm2: f64,
    pub fwhm_fs: f64,
    pub placement: OrderPlacement,
}

impl CombTemplate {
    pub fn fundamental(&self) -> f64 {
        ev_to_au(self.photon_energy_ev)
    }

    pub fn envelope(&self) -> Result<PulseEnvelope> {
        PulseEnvelope::from_fs(self.fwhm_fs)
    }

    /// Comb with `n` harmonics and the phases of `scheme`.
    pub fn comb(&self, n: usize, scheme: &PhaseScheme) -> Result<HarmonicComb> {
        HarmonicComb::from_lab(
            self.photon_energy_ev,
            self.placement.orders(n)?,
            self.intensity_w_cm2,
            scheme,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericsSpec {
    pub basis: BasisParams,
    pub l_max: usize,
    pub dt: f64,
    pub spectrum_step_ev: f64,
    pub density: Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    Locked { beta: f64, zeta: f64 },
    Random { runs_per_n: usize, master_seed: u64 },
}

impl SchemeSpec {
    pub fn scheme(&self) -> Scheme {
        match self {
            SchemeSpec::Locked { .. } => Scheme::Locked,
            SchemeSpec::Random { .. } => Scheme::Random,
        }
    }

    pub fn runs_per_n(&self) -> usize {
        match *self {
            SchemeSpec::Locked { .. } => 1,
            SchemeSpec::Random { runs_per_n, .. } => runs_per_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub atom: HydrogenicSpec,
    pub comb: CombTemplate,
    pub n_values: Vec<u32>,
    pub scheme: SchemeSpec,
    pub numerics: NumericsSpec,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Config("n_values must list positive harmonic counts".into()));
        }
        if self.scheme.runs_per_n() == 0 {
            return Err(Error::Config("runs_per_n must be at least 1".into()));
        }
        for &n in &self.n_values {
            self.comb
                .placement
                .orders(n as usize)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.numerics.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.numerics.dt)));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex16(&Sha256::digest(json))
    }

    /// Phases of run `run_index` at `n` harmonics, with the seed that drew them
    /// (0 for locked runs).
    pub fn phases(&self, n: u32, run_index: usize) -> Result<(u64, Vec<f64>)> {
        let orders = self.comb.placement.orders(n as usize)?;
        let (seed, scheme) = match self.scheme {
            SchemeSpec::Locked { beta, zeta } => (0, PhaseScheme::Locked { beta, zeta }),
            SchemeSpec::Random { master_seed, .. } => {
                let seed = run_seed(master_seed, n, run_index);
                (seed, PhaseScheme::Random { seed })
            }
        };
        Ok((seed, make_phases(&scheme, &orders, self.comb.fundamental())?))
    }
}

fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Stable per-run seed from `(master_seed, N, run_index)`.
pub fn run_seed(master_seed: u64, n: u32, run_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(u64::from(n).to_le_bytes());
    h.update((run_index as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Observables of one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub total_two_photon: f64,
    pub central_peak: f64,
    /// 2-photon peak integrals, indexed by `peak_index - 1`.
    pub per_peak: Vec<f64>,
    /// Sum of all order subsets, `[1-photon, 2-photon, 3-photon]`; `None`
    /// for orders entirely below threshold.
    pub order_totals: Vec<Option<f64>>,
    /// Angle-integrated 2-photon probability per final partial wave.
    pub two_photon_by_l: Vec<f64>,
    pub bound_population: f64,
    pub continuum_population: f64,
    pub diagnostics: PulseDiagnostics,
}

impl Observables {
    /// Named scalar observable, as used in summaries and fits.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "total_two_photon" => Some(self.total_two_photon),
            "central_peak" => Some(self.central_peak),
            _ => {
                let k: usize = name.strip_prefix("peak_")?.parse().ok()?;
                self.per_peak.get(k.checked_sub(1)?).copied()
            }
        }
    }
}

/// Full output of one pulse simulation.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub observables: Observables,
    pub spectrum: PhotoelectronSpectrum,
    pub peaks: PeakTable,
}

/// Basis, eigensystems and initial state shared by every run of a campaign.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: CampaignSpec,
    basis: RadialBasis,
    eigensystems: Vec<ChannelEigensystem>,
    initial: WavefunctionState,
    propagator: Propagator,
    monitor: BoundaryMonitor,
}

impl Simulator {
    pub fn new(spec: &CampaignSpec, cache: Option<&EigenCache>) -> Result<Self> {
        let basis = RadialBasis::build(spec.numerics.basis)?;
        let l_max = spec.numerics.l_max;
        let channels = l_max.max(spec.atom.l as usize);
        let charge = spec.atom.charge();
        let eigensystems = (0..=channels)
            .map(|l| match cache {
                Some(c) => c.get_or_solve(&basis, charge, l),
                None => solve_channel(&basis, &spec.atom, l),
            })
            .collect::<Result<Vec<_>>>()?;
        let (_, coeffs) = initial_state(&eigensystems[spec.atom.l as usize], &spec.atom)?;
        let initial = WavefunctionState::from_channel(l_max, basis.n_basis(), spec.atom.l as usize, &coeffs);
        let propagator = Propagator::new(&basis, charge, l_max, spec.numerics.dt)?;
        let monitor = BoundaryMonitor::new(&basis);
        Ok(Self {
            spec: spec.clone(),
            basis,
            eigensystems,
            initial,
            propagator,
            monitor,
        })
    }

    pub fn spec(&self) -> &CampaignSpec {
        &self.spec
    }

    pub fn basis(&self) -> &RadialBasis {
        &self.basis
    }

    pub fn eigensystems(&self) -> &[ChannelEigensystem] {
        &self.eigensystems
    }

    /// Propagates one pulse with `n` harmonics and the given phases.
    pub fn run_single(&self, n: u32, phases: &[f64]) -> Result<RunOutput> {
        let orders = self.spec.comb.placement.orders(n as usize)?;
        if phases.len() != orders.len() {
            return Err(Error::InvalidComb(format!(
                "{} phases for {} harmonics",
                phases.len(),
                orders.len()
            )));
        }
        let amplitude = crate::units::intensity_to_amplitude(self.spec.comb.intensity_w_cm2)?;
        let comb = HarmonicComb::new(self.spec.comb.fundamental(), orders, amplitude, phases.to_vec())?;
        let envelope = self.spec.comb.envelope()?;
        self.run_comb(&comb, &envelope)
    }

    /// Propagates one pulse for an arbitrary comb.
    pub fn run_comb(&self, comb: &HarmonicComb, envelope: &PulseEnvelope) -> Result<RunOutput> {
        let mut propagator = self.propagator.clone();
        let (state, diagnostics) = propagator.propagate_pulse(&self.initial, comb, envelope, &self.monitor)?;
        if diagnostics.boundary_contaminated {
            warn!(
                "outer-box population {:.2e} exceeds 1e-6 (N = {})",
                diagnostics.boundary_population,
                comb.len()
            );
        }
        let amps = project_continuum(&state, &self.eigensystems, self.basis.overlap(), envelope.center())?;
        let ip_ev = au_to_ev(self.spec.atom.ionization_potential());
        let w_ev = au_to_ev(comb.fundamental());
        let q_max = *comb.orders().last().expect("non-empty comb") as f64;
        let e_max = MAX_PHOTON_ORDER as f64 * q_max * w_ev - ip_ev + 2.0 * w_ev;
        let spectrum = directional_spectrum(
            &amps,
            self.spec.atom.charge(),
            e_max,
            self.spec.numerics.spectrum_step_ev,
        )?;
        let peaks = locate_peaks(&spectrum, comb, ip_ev)?;
        let density = self.spec.numerics.density;
        let per_peak = peaks
            .order(2)
            .map(|p| match density {
                Density::Directional => p.probability,
                Density::AngleIntegrated => p.angle_integrated,
            })
            .collect();
        let two_photon_by_l = (0..spectrum.channel_amplitudes.len())
            .map(|l| {
                let y: Vec<f64> = spectrum.channel_amplitudes[l].iter().map(|a| a.norm_sqr()).collect();
                peaks
                    .order(2)
                    .map(|p| crate::spectrum::integrate(&spectrum.energy_grid, &y, p.window_ev.0, p.window_ev.1))
                    .sum()
            })
            .collect();
        let observables = Observables {
            total_two_photon: integrate_order_subset(&peaks, 2, density)?,
            central_peak: central_peak_probability(&peaks, density)?,
            per_peak,
            order_totals: (1..=MAX_PHOTON_ORDER)
                .map(|o| integrate_order_subset(&peaks, o, density).ok())
                .collect(),
            two_photon_by_l,
            bound_population: amps.bound_population(),
            continuum_population: amps.continuum_population(),
            diagnostics,
        };
        Ok(RunOutput {
            observables,
            spectrum,
            peaks,
        })
    }
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: u32,
    pub run_index: usize,
    pub seed: u64,
    pub phases: Vec<f64>,
    pub observables: Option<Observables>,
    pub error: Option<String>,
    pub config_hash: String,
    pub version: String,
}

/// Mean, extremes and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub runs: usize,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std: var.sqrt(),
            runs: values.len(),
        })
    }

    pub fn stderr(&self) -> f64 {
        self.std / (self.runs as f64).sqrt()
    }

    pub fn statistic(&self, which: Statistic) -> f64 {
        match which {
            Statistic::Mean => self.mean,
            Statistic::Min => self.min,
            Statistic::Max => self.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStats {
    pub n: u32,
    pub attempted: usize,
    pub failed: usize,
    /// Keyed by observable name.
    pub observables: BTreeMap<String, Summary>,
}

impl NStats {
    pub fn success_rate(&self) -> f64 {
        if self.attempted == 0 {
            return 0.0;
        }
        (self.attempted - self.failed) as f64 / self.attempted as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub n: u32,
    pub run_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub scheme: Scheme,
    pub per_n: Vec<NStats>,
    pub manifest: Vec<ManifestEntry>,
}

impl EnsembleStats {
    pub fn get(&self, n: u32, observable: &str) -> Option<&Summary> {
        self.per_n.iter().find(|s| s.n == n)?.observables.get(observable)
    }

    /// Summary CSV for one observable: `N,scheme,mean,min,max,std,runs`.
    pub fn summary_csv(&self, observable: &str) -> String {
        let mut out = String::from("N,scheme,mean,min,max,std,runs\n");
        for s in &self.per_n {
            if let Some(v) = s.observables.get(observable) {
                let _ = writeln!(
                    out,
                    "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                    s.n,
                    self.scheme.as_str(),
                    v.mean,
                    v.min,
                    v.max,
                    v.std,
                    v.runs
                );
            }
        }
        out
    }

    /// `(N, statistic)` points of an observable.
    pub fn points(&self, observable: &str, which: Statistic) -> Vec<(f64, f64)> {
        self.per_n
            .iter()
            .filter_map(|s| Some((s.n as f64, s.observables.get(observable)?.statistic(which))))
            .collect()
    }
}

/// Folds records in `(N, run_index)` order. Later duplicates are ignored.
pub fn aggregate(scheme: Scheme, records: &[RunRecord]) -> EnsembleStats {
    let mut sorted: BTreeMap<(u32, usize), &RunRecord> = BTreeMap::new();
    for r in records {
        sorted.entry((r.n, r.run_index)).or_insert(r);
    }
    let mut per_n: Vec<NStats> = Vec::new();
    let mut manifest = Vec::with_capacity(sorted.len());
    let mut values: BTreeMap<u32, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&(n, run_index), r) in &sorted {
        manifest.push(ManifestEntry {
            n,
            run_index,
            seed: r.seed,
        });
        let c = counts.entry(n).or_default();
        c.0 += 1;
        let Some(obs) = &r.observables else {
            c.1 += 1;
            continue;
        };
        let v = values.entry(n).or_default();
        v.entry("total_two_photon".into())
            .or_default()
            .push(obs.total_two_photon);
        v.entry("central_peak".into()).or_default().push(obs.central_peak);
        for (k, p) in obs.per_peak.iter().enumerate() {
            v.entry(format!("peak_{}", k + 1)).or_default().push(*p);
        }
    }
    for (n, (attempted, failed)) in counts {
        let observables = values
            .remove(&n)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|(k, v)| Some((k, Summary::from_values(&v)?)))
            .collect();
        per_n.push(NStats {
            n,
            attempted,
            failed,
            observables,
        });
    }
    EnsembleStats {
        scheme,
        per_n,
        manifest,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_range: (f64, f64),
    /// Points dropped for being non-positive.
    pub excluded: Vec<f64>,
}

/// Least-squares line through `(ln N, ln P)`; `P = prefactor · N^exponent`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let (good, bad): (Vec<&(f64, f64)>, Vec<_>) = points.iter().partition(|p| p.1 > 0.0 && p.0 > 0.0);
    let excluded: Vec<f64> = bad.iter().map(|p| p.0).collect();
    for n in &excluded {
        warn!("power-law fit: dropping non-positive point at N = {n}");
    }
    let distinct: BTreeSet<u64> = good.iter().map(|p| p.0.to_bits()).collect();
    if distinct.len() < 3 {
        return Err(Error::Domain(format!(
            "power-law fit needs at least 3 distinct positive points, got {}",
            distinct.len()
        )));
    }
    let xs: Vec<f64> = good.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = good.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    let lo = good.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = good.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerLawFit {
        exponent,
        prefactor: intercept.exp(),
        r_squared,
        n_range: (lo, hi),
        excluded,
    })
}

/// Fit of one statistic of one observable across `N`.
pub fn fit_observable(stats: &EnsembleStats, observable: &str, which: Statistic) -> Result<PowerLawFit> {
    fit_power_law(&stats.points(observable, which))
}

/// Content-addressed campaign directory.
#[derive(Debug, Clone)]
pub struct CampaignStore {
    dir: PathBuf,
    hash: String,
}

const RECORDS: &str = "records.jsonl";

impl CampaignStore {
    /// Opens (creating if needed) `root/<scheme>_<hash>` and writes the spec.
    pub fn open(root: impl AsRef<Path>, spec: &CampaignSpec) -> Result<Self> {
        let hash = spec.hash();
        let dir = root.as_ref().join(format!("{}_{hash}", spec.scheme.scheme().as_str()));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let spec_path = dir.join("campaign.json");
        if !spec_path.exists() {
            let doc = serde_json::json!({ "config_hash": hash, "version": VERSION, "spec": spec });
            fs::write(&spec_path, serde_json::to_string_pretty(&doc)?).map_err(|e| Error::io(&spec_path, e))?;
        }
        Ok(Self { dir, hash })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join(RECORDS)
    }

    /// Reads every parseable record; malformed lines are skipped with a warning.
    pub fn load(&self) -> Result<Vec<RunRecord>> {
        let path = self.records_path();
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<RunRecord>(&line) {
                Ok(r) if r.config_hash == self.hash => out.push(r),
                Ok(_) => warn!("{}:{}: record from another campaign, skipped", path.display(), i + 1),
                Err(e) => warn!("{}:{}: corrupt record skipped ({e})", path.display(), i + 1),
            }
        }
        Ok(out)
    }

    fn append(&self, record: &RunRecord) -> Result<()> {
        let path = self.records_path();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))
    }

    /// Rewrites `summary_<observable>.csv` and `stats.json`.
    pub fn write_summaries(&self, stats: &EnsembleStats) -> Result<()> {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for s in &stats.per_n {
            names.extend(s.observables.keys().map(String::as_str));
        }
        for name in names {
            let path = self.dir.join(format!("summary_{name}.csv"));
            let body = format!("# ati {VERSION} config {}\n{}", self.hash, stats.summary_csv(name));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        let path = self.dir.join("stats.json");
        let doc = serde_json::json!({ "config_hash": self.hash, "version": VERSION, "stats": stats });
        fs::write(&path, serde_json::to_string_pretty(&doc)?).map_err(|e| Error::io(&path, e))
    }
}

/// Options controlling a campaign run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Skip `(N, run_index)` pairs already on disk.
    pub resume: bool,
    /// Stop after this many new runs (for staged execution).
    pub max_new_runs: Option<usize>,
    /// Write per-run spectrum CSV and peak JSON under `spectra/`.
    pub write_spectra: bool,
}

/// Runs every pending `(N, run_index)` of `spec` on the current rayon pool,
/// persisting each record as it completes, and returns the statistics of
/// everything on disk.
pub fn run_campaign(
    spec: &CampaignSpec,
    simulator: &Simulator,
    store: &CampaignStore,
    options: &RunOptions,
) -> Result<EnsembleStats> {
    spec.validate()?;
    if simulator.spec() != spec {
        return Err(Error::Config("simulator was built for a different campaign".into()));
    }
    let existing = store.load()?;
    if !options.resume && !existing.is_empty() {
        return Err(Error::Config(format!(
            "{} already holds {} runs of this campaign; resume it instead",
            store.dir().display(),
            existing.len()
        )));
    }
    let done: BTreeSet<(u32, usize)> = existing.iter().map(|r| (r.n, r.run_index)).collect();
    let mut tasks: Vec<(u32, usize)> = spec
        .n_values
        .iter()
        .flat_map(|&n| (0..spec.scheme.runs_per_n()).map(move |i| (n, i)))
        .filter(|t| !done.contains(t))
        .collect();
    if let Some(max) = options.max_new_runs {
        tasks.truncate(max);
    }
    info!(
        "campaign {}: {} runs on disk, {} to go",
        store.hash(),
        done.len(),
        tasks.len()
    );
    if options.write_spectra {
        let d = store.dir().join("spectra");
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let (tx, rx) = mpsc::channel::<RunRecord>();
    let writer = {
        let store = store.clone();
        std::thread::spawn(move || -> Result<Vec<RunRecord>> {
            let mut written = Vec::new();
            for r in rx {
                store.append(&r)?;
                written.push(r);
            }
            Ok(written)
        })
    };
    let hash = store.hash().to_string();
    tasks.par_iter().for_each_with(tx, |tx, &(n, run_index)| {
        let record = execute(spec, simulator, store, options, &hash, n, run_index);
        let _ = tx.send(record);
    });
    let new = writer.join().expect("writer thread panicked")?;
    let mut all = existing;
    all.extend(new);
    let stats = aggregate(spec.scheme.scheme(), &all);
    store.write_summaries(&stats)?;
    Ok(stats)
}

fn execute(
    spec: &CampaignSpec,
    simulator: &Simulator,
    store: &CampaignStore,
    options: &RunOptions,
    hash: &str,
    n: u32,
    run_index: usize,
) -> RunRecord {
    let mut record = RunRecord {
        n,
        run_index,
        seed: 0,
        phases: vec![],
        observables: None,
        error: None,
        config_hash: hash.to_string(),
        version: VERSION.to_string(),
    };
    let (seed, phases) = match spec.phases(n, run_index) {
        Ok(p) => p,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.seed = seed;
    record.phases = phases.clone();
    match simulator.run_single(n, &phases) {
        Ok(out) => {
            if options.write_spectra {
                let stem = crate::spectrum::spectrum_file_stem(n as usize, seed);
                let dir = store.dir().join("spectra");
                let res = out
                    .spectrum
                    .write_csv(dir.join(format!("{stem}_r{run_index}.csv")))
                    .and_then(|_| {
                        out.peaks
                            .write_json(dir.join(format!("{stem}_r{run_index}_peaks.json")))
                    });
                if let Err(e) = res {
                    warn!("could not write spectrum for N={n}, run {run_index}: {e}");
                }
            }
            record.observables = Some(out.observables);
        }
        Err(e) => {
            warn!("run N={n} #{run_index} failed: {e}");
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Convenience for a random-phase campaign: the spec must use
/// [`SchemeSpec::Random`].
pub fn run_ensemble(
    spec: &CampaignSpec,
    simulator: &Simulator,
    store: &CampaignStore,
    options: &RunOptions,
) -> Result<EnsembleStats> {
    if !matches!(spec.scheme, SchemeSpec::Random { .. }) {
        return Err(Error::Config("run_ensemble requires a random-phase scheme".into()));
    }
    run_campaign(spec, simulator, store, options)
}
