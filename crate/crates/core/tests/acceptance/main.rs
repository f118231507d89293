//! End-to-end acceptance checks. Each `criterion_*` test prints one
//! `criterion N: PASS|FAIL ...` line straight to stdout (visible without
//! `--nocapture`) and then asserts.
//!
//! Campaigns are cached under the cargo target tmp dir and resumed, so a
//! rerun only aggregates records already on disk. A cold run of the three
//! random-phase ensembles takes a few hours on one core.

mod hygiene;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use ati_core::basis::{EigenCache, RadialBasis};
use ati_core::campaign::{
    aggregate, fit_observable, run_campaign, CampaignSpec, CampaignStore, EnsembleStats, RunOptions, Simulator,
    Statistic,
};
use ati_core::combinatorial::{peak_probability, total_probability, total_units, CombinatorialParams, Scheme};
use ati_core::config::RunConfig;
use ati_core::perturbation::{predict_peak, table_grid, PathContribution, Pathway, TwoPhotonSolver};
use ati_core::units::ev_to_au;

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {verdict}  {detail}");
    let _ = out.flush();
    assert!(pass, "criterion {n}: {detail}");
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_path(path).unwrap()
}

fn cache_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

/// One campaign at a time: tests share cached stores and the worker pool.
static CAMPAIGNS: Mutex<BTreeMap<String, EnsembleStats>> = Mutex::new(BTreeMap::new());

/// Statistics of the `[campaign]` of a shipped config, running whatever is
/// not yet on disk.
fn campaign(name: &str) -> (CampaignSpec, EnsembleStats) {
    let spec = config(name).campaign_spec(None).unwrap();
    let mut memo = CAMPAIGNS.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(stats) = memo.get(name) {
        return (spec, stats.clone());
    }
    let root = cache_root();
    let store = CampaignStore::open(&root, &spec).unwrap();
    let expected = spec.scheme.runs_per_n() * spec.n_values.len();
    let stats = aggregate(spec.scheme.scheme(), &store.load().unwrap());
    let stats = if stats.manifest.len() == expected {
        stats
    } else {
        let cache = EigenCache::new(root.join("eigen_cache"));
        let sim = Simulator::new(&spec, Some(&cache)).unwrap();
        let options = RunOptions {
            resume: true,
            ..Default::default()
        };
        run_campaign(&spec, &sim, &store, &options).unwrap()
    };
    assert_eq!(stats.manifest.len(), expected);
    memo.insert(name.to_string(), stats.clone());
    (spec, stats)
}

fn exponent(stats: &EnsembleStats, observable: &str, which: Statistic) -> f64 {
    fit_observable(stats, observable, which).unwrap().exponent
}

fn mean(stats: &EnsembleStats, n: u32, observable: &str) -> f64 {
    stats.get(n, observable).unwrap().mean
}

// ---------------------------------------------------------------- criterion 1

/// Expected `|Σ_paths e^{i(φ_i + φ_j)}|²` in α² units, by enumerating every
/// ordered pair of harmonics and, for random phases, every pair of paths
/// whose phase sums cancel identically (same multiset of harmonics).
fn brute_force_units(n: u32, k: u32, scheme: Scheme) -> u64 {
    let paths: Vec<(u32, u32)> = (1..=n)
        .flat_map(|i| (1..=n).map(move |j| (i, j)))
        .filter(|&(i, j)| i + j - 1 == k)
        .collect();
    match scheme {
        Scheme::Locked => (paths.len() * paths.len()) as u64,
        Scheme::Random => {
            let key = |(i, j): (u32, u32)| (i.min(j), i.max(j));
            let mut same = 0;
            for &p in &paths {
                for &q in &paths {
                    if key(p) == key(q) {
                        same += 1;
                    }
                }
            }
            same
        }
    }
}

#[test]
fn criterion_1_path_counting_matches_brute_force() {
    let clock = Instant::now();
    let mut mismatches = Vec::new();
    for n in 1..=10u32 {
        let params = CombinatorialParams::new(0.5, n).unwrap();
        for scheme in [Scheme::Locked, Scheme::Random] {
            let mut sum = 0;
            for k in 1..=2 * n - 1 {
                let units = brute_force_units(n, k, scheme);
                sum += units;
                if peak_probability(&params, k, scheme).unwrap() != 0.25 * units as f64 {
                    mismatches.push(format!("N={n} k={k} {}", scheme.as_str()));
                }
            }
            if total_units(n, scheme) != sum || total_probability(&params, scheme) != 0.25 * sum as f64 {
                mismatches.push(format!("N={n} total {}", scheme.as_str()));
            }
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    report(
        1,
        mismatches.is_empty() && elapsed < 1.0,
        &format!("N=1..10 both schemes, mismatches {mismatches:?}, {elapsed:.3} s"),
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_three_harmonic_interference_law() {
    let (m, e) = (1.3, 0.7);
    let mut worst: f64 = 0.0;
    for delta in [0.0, PI / 2.0, PI, 2.0 * PI / 3.0] {
        // φ₁ + φ₃ − 2φ₂ = Δ with arbitrary offsets.
        let (p1, p2) = (0.4, 1.1);
        let p3 = delta + 2.0 * p2 - p1;
        let path = |a: f64, b: f64| PathContribution {
            element: m,
            field_i: e,
            field_j: e,
            phase_i: a,
            phase_j: b,
        };
        let central = predict_peak(&[path(p1, p3), path(p3, p1), path(p2, p2)]);
        let law = m * m * e.powi(4) * (5.0 + 4.0 * delta.cos());
        worst = worst.max((central - law).abs() / law);
    }
    report(2, worst < 1e-12, &format!("max relative deviation {worst:.2e}"));
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_hydrogen_ground_state_locked_exponents() {
    // Computed from scratch each time: this is also the runtime budget.
    let spec = config("run_a.toml").campaign_spec(None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let clock = Instant::now();
    let store = CampaignStore::open(dir.path(), &spec).unwrap();
    let sim = Simulator::new(&spec, None).unwrap();
    let stats = run_campaign(&spec, &sim, &store, &RunOptions::default()).unwrap();
    let minutes = clock.elapsed().as_secs_f64() / 60.0;
    let total = exponent(&stats, "total_two_photon", Statistic::Mean);
    let central = exponent(&stats, "central_peak", Statistic::Mean);
    let pass = within(total, 3.0, 0.2) && within(central, 2.1, 0.2) && minutes <= 30.0;
    report(
        3,
        pass,
        &format!("total {total:.3} (3.0±0.2), central {central:.3} (2.1±0.2), {minutes:.1} min (≤30)"),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_hydrogen_ground_state_random_statistics() {
    let (_, stats) = campaign("run_a_random.toml");
    let mean = exponent(&stats, "total_two_photon", Statistic::Mean);
    let max = exponent(&stats, "total_two_photon", Statistic::Max);
    let min = exponent(&stats, "total_two_photon", Statistic::Min);
    let central = exponent(&stats, "central_peak", Statistic::Mean);
    let pass = within(mean, 2.4, 0.3) && within(max, 2.9, 0.3) && within(min, 1.9, 0.4) && within(central, 0.7, 0.4);
    report(
        4,
        pass,
        &format!(
            "mean {mean:.3} (2.4±0.3), max {max:.3} (2.9±0.3), min {min:.3} (1.9±0.4), central mean {central:.3} (0.7±0.4)"
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_hydrogen_excited_state_exponents() {
    let (_, locked) = campaign("run_b.toml");
    let (_, random) = campaign("run_b_random.toml");
    let total = exponent(&locked, "total_two_photon", Statistic::Mean);
    let central = exponent(&locked, "central_peak", Statistic::Mean);
    let r_total = exponent(&random, "total_two_photon", Statistic::Mean);
    let r_central = exponent(&random, "central_peak", Statistic::Mean);
    let pass = within(total, 2.98, 0.2)
        && within(central, 2.04, 0.2)
        && within(r_total, 2.5, 0.3)
        && within(r_central, 1.3, 0.4);
    report(
        5,
        pass,
        &format!(
            "locked total {total:.3} (2.98±0.2), central {central:.3} (2.04±0.2); random total {r_total:.3} (2.5±0.3), central {r_central:.3} (1.3±0.4)"
        ),
    );
}

// ---------------------------------------------------------------- criterion 6

/// Reference He⁺ s→p→d elements for H19..H31, rows the first photon.
/// Units are unspecified, so only signs and within-row ratios are used.
const HE_TABLE: [[f64; 7]; 7] = [
    [-84.1, -66.1, -58.2, -49.1, -41.8, -35.8, -30.9],
    [-90.5, -74.4, -61.9, -52.0, -44.2, -37.9, -32.7],
    [-105.4, -86.2, -71.4, -59.9, -50.8, -42.7, -37.5],
    [-168.1, -136.4, -112.4, -94.0, -79.5, -68.0, -58.6],
    [132.1, 105.1, 85.3, 70.5, 59.1, 50.2, 43.1],
    [-20.6, -19.9, -16.9, -14.5, -12.5, -10.9, -9.5],
    [-183.0, -151.7, -125.3, -105.2, -89.5, -76.8, -66.6],
];

#[test]
fn criterion_6_helium_two_photon_table() {
    let cfg = config("matelem_he.toml");
    let section = cfg.perturbation.clone().unwrap();
    let basis = RadialBasis::build(cfg.perturbation_basis().unwrap()).unwrap();
    let solver = TwoPhotonSolver::new(&basis, &cfg.atom()).unwrap();
    let grid = table_grid(
        &solver,
        ev_to_au(cfg.field.photon_energy_ev),
        &section.orders,
        Pathway::Spd,
    )
    .unwrap();
    assert_eq!(grid.orders, [19, 21, 23, 25, 27, 29, 31]);
    let m: Vec<Vec<f64>> = grid.cells.iter().map(|r| r.iter().map(|c| c.value).collect()).collect();

    let mut sign_errors = 0;
    let mut worst_ratio: f64 = 0.0;
    for (row, reference) in m.iter().zip(&HE_TABLE) {
        for (&v, &p) in row.iter().zip(reference) {
            if v.signum() != p.signum() {
                sign_errors += 1;
            }
            let ours = v / row[0];
            let theirs = p / reference[0];
            worst_ratio = worst_ratio.max((ours / theirs - 1.0).abs());
        }
    }
    // H29 first: every cell below half of every other row's cell in its column.
    let small_row = 5;
    let mut row29: f64 = 0.0;
    for j in 0..7 {
        let others = (0..7)
            .filter(|&i| i != small_row)
            .map(|i| m[i][j].abs())
            .fold(f64::INFINITY, f64::min);
        row29 = row29.max(m[small_row][j].abs() / others);
    }
    let dl = grid.max_cross_check_error();
    let pass = sign_errors == 0 && worst_ratio < 0.15 && dl < 5e-3 && row29 < 0.5;
    report(
        6,
        pass,
        &format!(
            "sign mismatches {sign_errors}, worst within-row ratio deviation {:.1}% (<15%), row 29 / column minimum {row29:.2} (<0.5), Dalgarno-Lewis {dl:.1e} (<5e-3)",
            100.0 * worst_ratio
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_helium_central_peak_suppression() {
    let (_, stats) = campaign("run_c.toml");
    let peaks = |n: u32| -> Vec<f64> { (1..2 * n).map(|k| mean(&stats, n, &format!("peak_{k}"))).collect() };
    let four = peaks(4);
    let central4 = four[3];
    let is_max = four.iter().all(|&p| p <= central4);
    let six = peaks(6);
    let central6 = six[5];
    let above = six[..5].iter().filter(|&&p| p > central6).count();
    report(
        7,
        is_max && above >= 2,
        &format!("N=4 central is subset maximum: {is_max}; N=6 lower peaks above central: {above} (≥2)"),
    );
}

// ---------------------------------------------------------------- criterion 8

/// `exp(mean(ln(y/u)))`: the single least-squares constant in log space.
fn log_constant(points: &[(f64, f64)]) -> f64 {
    (points.iter().map(|(y, u)| (y / u).ln()).sum::<f64>() / points.len() as f64).exp()
}

#[test]
fn criterion_8_helium_ionization_versus_harmonic_count() {
    let (spec, random) = campaign("run_c_random.toml");
    let (_, locked) = campaign("run_c.toml");
    let random_pts: Vec<(f64, f64)> = spec
        .n_values
        .iter()
        .map(|&n| {
            (
                mean(&random, n, "total_two_photon"),
                total_units(n, Scheme::Random) as f64,
            )
        })
        .collect();
    let c = log_constant(&random_pts);
    let worst_random = random_pts
        .iter()
        .map(|(y, u)| (y / (c * u) - 1.0).abs())
        .fold(0.0, f64::max);

    // Locked: normalize on N = 2..4, where H27 is absent, and look at N ≥ 5.
    let locked_pts: Vec<(u32, f64, f64)> = spec
        .n_values
        .iter()
        .map(|&n| {
            (
                n,
                mean(&locked, n, "total_two_photon"),
                total_units(n, Scheme::Locked) as f64,
            )
        })
        .collect();
    let c_locked = log_constant(
        &locked_pts
            .iter()
            .filter(|p| p.0 <= 4)
            .map(|p| (p.1, p.2))
            .collect::<Vec<_>>(),
    );
    let deficits: Vec<f64> = locked_pts
        .iter()
        .filter(|p| p.0 >= 5)
        .map(|p| p.1 / (c_locked * p.2))
        .collect();
    let deficit = deficits.iter().all(|&r| r < 0.75);
    report(
        8,
        worst_random < 0.25 && deficit,
        &format!(
            "random vs 2N²-N worst deviation {:.1}% (<25%); locked / model for N=5..7 {:?} (<0.75)",
            100.0 * worst_random,
            deficits.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_numerical_hygiene() {
    let (drift, closure) = hygiene::pulse_norm_and_closure();
    let (stationary_norm, stationary_phase) = hygiene::ground_state_phase();
    let dt = hygiene::dt_convergence();
    let l_max = hygiene::l_max_convergence();
    let scaling = hygiene::intensity_scaling();
    let checks = [
        ("norm drift", drift, 1e-8),
        ("stationary norm", stationary_norm, 1e-10),
        ("stationary phase/step", stationary_phase, 1e-8),
        ("dt halving", dt, 0.01),
        ("l_max 8->10", l_max, 0.005),
        ("projection closure", closure, 1e-6),
        ("I² scaling", scaling, 0.05),
    ];
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, v, tol)| format!("{name} {v:.1e} (<{tol:.0e})"))
        .collect();
    report(9, checks.iter().all(|(_, v, tol)| v < tol), &detail.join(", "));
}

// ------------------------------------------------------- ensemble invariants

/// Random mean sits below the locked total wherever three or more photons
/// can interfere; at N = 2 every peak is phase-independent and they agree.
fn check_random_below_locked(locked: &str, random: &str) {
    let (spec, locked) = campaign(locked);
    let (_, random) = campaign(random);
    for &n in &spec.n_values {
        let l = mean(&locked, n, "total_two_photon");
        let r = random.get(n, "total_two_photon").unwrap();
        if n == 2 {
            assert!(
                (r.mean / l - 1.0).abs() < 0.02 && r.max <= l * 1.02,
                "N=2 {} vs {l}",
                r.mean
            );
        } else {
            assert!(
                r.mean + 2.0 * r.stderr() < l,
                "N={n}: {} ± {} vs {l}",
                r.mean,
                r.stderr()
            );
        }
    }
}

#[test]
fn random_mean_stays_below_locked_hydrogen_ground_state() {
    check_random_below_locked("run_a.toml", "run_a_random.toml");
}

#[test]
fn random_mean_stays_below_locked_hydrogen_excited_state() {
    check_random_below_locked("run_b.toml", "run_b_random.toml");
}

fn check_edge_peaks(locked: &str, random: &str) {
    let (spec, locked) = campaign(locked);
    let (_, random) = campaign(random);
    let mut failures = Vec::new();
    for &n in &spec.n_values {
        let last = 2 * n - 1;
        for k in [1, last] {
            let s = random.get(n, &format!("peak_{k}")).unwrap();
            if s.std / s.mean >= 0.02 {
                failures.push(format!("N={n} peak {k} std/mean {:.3}", s.std / s.mean));
            }
        }
        for k in [1, 2, last - 1, last] {
            let name = format!("peak_{k}");
            let (r, l) = (random.get(n, &name).unwrap(), mean(&locked, n, &name));
            if (r.mean / l - 1.0).abs() >= 2.0 * r.stderr() / l + 0.02 {
                failures.push(format!("N={n} peak {k} random {:.3e} vs locked {l:.3e}", r.mean));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn edge_peaks_ignore_phases_hydrogen_ground_state() {
    check_edge_peaks("run_a.toml", "run_a_random.toml");
}

#[test]
fn edge_peaks_ignore_phases_hydrogen_excited_state() {
    check_edge_peaks("run_b.toml", "run_b_random.toml");
}

#[test]
fn random_central_peak_can_vanish() {
    let mut failures = Vec::new();
    for name in ["run_a_random.toml", "run_b_random.toml"] {
        let (spec, stats) = campaign(name);
        for &n in spec.n_values.iter().filter(|&&n| n >= 3) {
            let s = stats.get(n, "central_peak").unwrap();
            if s.min / s.mean >= 0.05 {
                failures.push(format!("{name} N={n} min/mean {:.3}", s.min / s.mean));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn campaigns_succeed() {
    for name in ["run_a_random.toml", "run_b_random.toml", "run_c_random.toml"] {
        let (_, stats) = campaign(name);
        for s in &stats.per_n {
            assert!(s.success_rate() >= 0.95, "{name} N={}: {}", s.n, s.success_rate());
        }
    }
}

#[test]
fn random_maximum_approaches_locked_from_below() {
    let (_, locked) = campaign("run_a.toml");
    let (_, random) = campaign("run_a_random.toml");
    let l = mean(&locked, 4, "total_two_photon");
    let max = random.get(4, "total_two_photon").unwrap().max;
    assert!(max <= l && max > 0.9 * l, "{max} vs {l}");
}

#[test]
fn two_harmonic_central_peak_is_four_edges() {
    let (_, locked) = campaign("run_a.toml");
    let edges = 0.5 * (mean(&locked, 2, "peak_1") + mean(&locked, 2, "peak_3"));
    let ratio = mean(&locked, 2, "peak_2") / edges;
    assert!((ratio / 4.0 - 1.0).abs() < 0.3, "{ratio}");
}

/// With random phases only `|M_ij + M_ji|²` survives the ensemble average,
/// so the mean He⁺ curve is fixed by element magnitudes. The TDSE ensemble
/// should follow that second-order sum over both final channels.
#[test]
fn helium_random_mean_follows_second_order_elements() {
    let cfg = config("matelem_he.toml");
    let basis = RadialBasis::build(cfg.perturbation_basis().unwrap()).unwrap();
    let solver = TwoPhotonSolver::new(&basis, &cfg.atom()).unwrap();
    let orders = cfg.perturbation.clone().unwrap().orders;
    let w = ev_to_au(cfg.field.photon_energy_ev);
    let grids: Vec<_> = [Pathway::Spd, Pathway::Sps]
        .into_iter()
        .map(|p| table_grid(&solver, w, &orders, p).unwrap())
        .collect();
    let predicted = |n: usize| -> f64 {
        let mut sum = 0.0;
        for g in &grids {
            let m = |i: usize, j: usize| g.cells[i][j].value;
            for i in 0..n {
                sum += m(i, i).powi(2);
                for j in i + 1..n {
                    sum += (m(i, j) + m(j, i)).powi(2);
                }
            }
        }
        sum
    };
    let (spec, random) = campaign("run_c_random.toml");
    let pts: Vec<(f64, f64)> = spec
        .n_values
        .iter()
        .map(|&n| (mean(&random, n, "total_two_photon"), predicted(n as usize)))
        .collect();
    let c = log_constant(&pts);
    let ratios: Vec<f64> = pts.iter().map(|(y, u)| y / (c * u)).collect();
    assert!(ratios.iter().all(|r| (r - 1.0).abs() < 0.15), "{ratios:?}");
}
