//! `ati`: configuration-driven front end to the ati-core engines.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use ati_core::basis::{EigenCache, RadialBasis};
use ati_core::campaign::{run_campaign, CampaignSpec, CampaignStore, RunOptions, SchemeSpec, Simulator, VERSION};
use ati_core::combinatorial::{model_table, Scheme};
use ati_core::config::RunConfig;
use ati_core::perturbation::{table_grid, Pathway, TwoPhotonSolver};
use ati_core::units::ev_to_au;
use ati_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ati", version, about = "Multi-harmonic above-threshold ionization simulator")]
struct Cli {
    /// Worker threads for campaigns (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the path-counting model predictions as CSV.
    Combinatorial {
        #[arg(long)]
        n_max: u32,
        #[arg(long, value_enum, default_value_t = SchemeArg::Both)]
        scheme: SchemeArg,
    },
    /// Two-photon matrix-element grid with the Dalgarno–Lewis cross-check.
    Matelem(Common),
    /// One pulse: photoelectron spectrum, peak table and observables.
    Spectrum(Common),
    /// Ensemble of pulses over harmonic count.
    Campaign {
        #[command(flatten)]
        common: Common,
        /// Continue an interrupted campaign, skipping completed runs.
        #[arg(long)]
        resume: bool,
        /// Stop after this many new runs.
        #[arg(long)]
        max_runs: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output root; defaults to `[output] dir` of the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replaces the random-phase seed of the config.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Locked,
    Random,
    Both,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Locked => vec![Scheme::Locked],
            SchemeArg::Random => vec![Scheme::Random],
            SchemeArg::Both => vec![Scheme::Locked, Scheme::Random],
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Combinatorial { n_max, scheme } => combinatorial(n_max, scheme),
        Command::Matelem(c) => matelem(&c),
        Command::Spectrum(c) => spectrum(&c),
        Command::Campaign {
            common,
            resume,
            max_runs,
        } => campaign(&common, resume, max_runs),
    }
}

fn combinatorial(n_max: u32, scheme: SchemeArg) -> Result<()> {
    if n_max == 0 {
        return Err(Error::Config("--n-max must be at least 1".into()));
    }
    println!("N,scheme,total_alpha2,central_alpha2");
    for row in model_table(n_max, &scheme.schemes()) {
        println!(
            "{},{},{},{}",
            row.harmonics,
            row.scheme.as_str(),
            row.total,
            row.central
        );
    }
    Ok(())
}

struct Loaded {
    config: RunConfig,
    text: String,
    root: PathBuf,
}

fn load(c: &Common) -> Result<Loaded> {
    let config = RunConfig::from_path(&c.config)?;
    let text = fs::read_to_string(&c.config).map_err(|e| Error::Config(format!("{}: {e}", c.config.display())))?;
    let root = c.out_dir.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok(Loaded { config, text, root })
}

fn header(hash: &str) -> String {
    format!("# ati {VERSION} config {hash}\n")
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Creates `root/<kind>_<hash>` unless it already holds `marker`.
fn fresh_dir(root: &Path, kind: &str, hash: &str, marker: &str) -> Result<Option<PathBuf>> {
    let dir = root.join(format!("{kind}_{hash}"));
    if dir.join(marker).exists() {
        println!("{} already holds this result; nothing to do", dir.display());
        return Ok(None);
    }
    create_dir(&dir)?;
    Ok(Some(dir))
}

fn eigen_cache(config: &RunConfig, root: &Path) -> Option<EigenCache> {
    config
        .output
        .eigen_cache
        .then(|| EigenCache::new(root.join("eigen_cache")))
}

fn matelem(c: &Common) -> Result<()> {
    let Loaded { config, text, root } = load(c)?;
    let section = config
        .perturbation
        .clone()
        .ok_or_else(|| Error::Config("matelem needs a [perturbation] section".into()))?;
    let hash = config.hash();
    let Some(dir) = fresh_dir(&root, "matelem", &hash, "report.txt")? else {
        return Ok(());
    };
    write(&dir.join("config.toml"), &text)?;
    let basis = RadialBasis::build(config.perturbation_basis()?)?;
    let solver = TwoPhotonSolver::new(&basis, &config.atom())?;
    let fundamental = ev_to_au(config.field.photon_energy_ev);
    let mut report = header(&hash);
    let mut worst: f64 = 0.0;
    for pathway in [section.pathway, other(section.pathway)] {
        let grid = table_grid(&solver, fundamental, &section.orders, pathway)?;
        let slug = match pathway {
            Pathway::Spd => "spd",
            Pathway::Sps => "sps",
        };
        let path = dir.join(format!("table_{slug}.csv"));
        write(&path, &(header(&hash) + &grid.to_csv()))?;
        let err = grid.max_cross_check_error();
        worst = worst.max(err);
        report.push_str(&format!(
            "pathway {}: max Dalgarno-Lewis deviation {err:.3e}\n",
            pathway.label()
        ));
        for (i, row) in grid.cells.iter().enumerate() {
            let signs: String = row.iter().map(|m| if m.value < 0.0 { '-' } else { '+' }).collect();
            let res = &row[0].nearest_resonance;
            let flag = if res.post_resonance() { " post-resonance" } else { "" };
            report.push_str(&format!(
                "  row {:>3}: signs {signs} monotone {}{flag}\n",
                grid.orders[i],
                grid.row_monotone()[i]
            ));
        }
    }
    print!("{report}");
    if worst > section.cross_check_tolerance {
        return Err(Error::Domain(format!(
            "spectral sum and Dalgarno-Lewis disagree by {worst:.3e} (tolerance {:.1e})",
            section.cross_check_tolerance
        )));
    }
    write(&dir.join("report.txt"), &report)?;
    info!("wrote {}", dir.display());
    Ok(())
}

fn other(p: Pathway) -> Pathway {
    match p {
        Pathway::Spd => Pathway::Sps,
        Pathway::Sps => Pathway::Spd,
    }
}

fn spectrum(c: &Common) -> Result<()> {
    let Loaded { mut config, text, root } = load(c)?;
    let n = config
        .field
        .harmonics
        .ok_or_else(|| Error::Config("spectrum needs [field] harmonics".into()))?;
    if let Some(seed) = c.seed_override {
        config.field.phases.seed = Some(seed);
    }
    let hash = config.hash();
    let Some(dir) = fresh_dir(&root, "spectrum", &hash, "observables.json")? else {
        return Ok(());
    };
    write(&dir.join("config.toml"), &text)?;
    let spec = CampaignSpec {
        atom: config.atom(),
        comb: config.comb_template(),
        n_values: vec![n],
        scheme: SchemeSpec::Locked { beta: 0.0, zeta: 0.0 },
        numerics: config.numerics_spec(),
    };
    spec.validate()?;
    let cache = eigen_cache(&config, &root);
    let sim = Simulator::new(&spec, cache.as_ref())?;
    let comb = spec.comb.comb(n as usize, &config.phase_scheme(None))?;
    info!("propagating harmonics {:?}", comb.orders());
    let out = sim.run_comb(&comb, &spec.comb.envelope()?)?;
    write(&dir.join("spectrum.csv"), &(header(&hash) + &out.spectrum.to_csv()))?;
    let peaks = serde_json::json!({ "config_hash": hash, "version": VERSION, "peaks": out.peaks });
    write(&dir.join("peaks.json"), &serde_json::to_string_pretty(&peaks)?)?;
    let obs = serde_json::json!({
        "config_hash": hash,
        "version": VERSION,
        "orders": comb.orders(),
        "phases": comb.phases(),
        "observables": out.observables,
    });
    write(&dir.join("observables.json"), &serde_json::to_string_pretty(&obs)?)?;
    for order in 1..=3 {
        let peaks: Vec<_> = out.peaks.order(order).collect();
        if peaks.is_empty() {
            continue;
        }
        println!("{order}-photon subset:");
        for p in peaks {
            println!(
                "  peak {:>2}  {:>8.3} eV  {:.4e}",
                p.peak_index, p.expected_energy_ev, p.probability
            );
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn campaign(c: &Common, resume: bool, max_runs: Option<usize>) -> Result<()> {
    let Loaded { config, text, root } = load(c)?;
    let spec = config.campaign_spec(c.seed_override)?;
    let cache = eigen_cache(&config, &root);
    let store = CampaignStore::open(&root, &spec)?;
    let copy = store.dir().join("config.toml");
    if !copy.exists() {
        write(&copy, &text)?;
    }
    let sim = Simulator::new(&spec, cache.as_ref())?;
    let options = RunOptions {
        resume,
        max_new_runs: max_runs,
        write_spectra: config.output.write_spectra,
    };
    let stats = run_campaign(&spec, &sim, &store, &options)?;
    for s in &stats.per_n {
        let total = s.observables.get("total_two_photon");
        println!(
            "N={:>2} runs {:>4}/{:<4} total mean {}",
            s.n,
            s.attempted - s.failed,
            s.attempted,
            total.map_or("-".into(), |t| format!("{:.4e}", t.mean))
        );
    }
    let expected = spec.scheme.runs_per_n() * spec.n_values.len();
    if stats.manifest.len() == expected {
        for obs in ["total_two_photon", "central_peak"] {
            match ati_core::campaign::fit_observable(&stats, obs, ati_core::campaign::Statistic::Mean) {
                Ok(fit) => println!("{obs}: exponent {:.3} (R² {:.4})", fit.exponent, fit.r_squared),
                Err(e) => println!("{obs}: no fit ({e})"),
            }
        }
    }
    let failed: usize = stats.per_n.iter().map(|s| s.failed).sum();
    if failed > 0 {
        warn!("{failed} runs failed; see records.jsonl");
    }
    println!("wrote {}", store.dir().display());
    Ok(())
}
