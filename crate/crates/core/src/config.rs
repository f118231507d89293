//! TOML run files.
//!
//! Every physical quantity carries its unit in the key name. Unknown keys
//! are rejected so that a typo never silently falls back to a default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{BasisParams, GridLaw, HydrogenicSpec};
use crate::campaign::{CampaignSpec, CombTemplate, NumericsSpec, OrderPlacement, SchemeSpec};
use crate::error::{Error, Result};
use crate::field::PhaseScheme;
use crate::perturbation::Pathway;
use crate::spectrum::Density;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub field: FieldSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    pub campaign: Option<CampaignSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub perturbation: Option<PerturbationSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub nuclear_charge: u32,
    #[serde(default = "one")]
    pub initial_n: u32,
    #[serde(default)]
    pub initial_l: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub photon_energy_ev: f64,
    pub intensity_w_cm2: f64,
    pub fwhm_fs: f64,
    /// Exactly one of `lowest_order` and `center_order`.
    pub lowest_order: Option<u32>,
    pub center_order: Option<u32>,
    /// Harmonic count for single-pulse runs.
    pub harmonics: Option<u32>,
    #[serde(default)]
    pub phases: PhaseSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    #[default]
    Locked,
    Random,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    #[serde(default)]
    pub scheme: PhaseKind,
    #[serde(default)]
    pub beta_au: f64,
    #[serde(default)]
    pub zeta_rad: f64,
    pub seed: Option<u64>,
    pub values_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Linear,
    #[default]
    QuadraticLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub box_radius_au: f64,
    pub breakpoints: usize,
    pub spline_order: usize,
    pub grid: GridKind,
    pub inner_radius_au: f64,
    pub l_max: usize,
    pub dt_au: f64,
    pub spectrum_step_ev: f64,
    pub density: Density,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            box_radius_au: 400.0,
            breakpoints: 300,
            spline_order: 7,
            grid: GridKind::QuadraticLinear,
            inner_radius_au: 30.0,
            l_max: 8,
            dt_au: 0.02,
            spectrum_step_ev: 0.01,
            density: Density::Directional,
        }
    }
}

impl NumericsSection {
    pub fn basis_params(&self) -> BasisParams {
        BasisParams {
            box_radius: self.box_radius_au,
            breakpoints: self.breakpoints,
            spline_order: self.spline_order,
            grid: match self.grid {
                GridKind::Linear => GridLaw::Linear,
                GridKind::QuadraticLinear => GridLaw::QuadraticLinear {
                    inner_radius: self.inner_radius_au,
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub n_values: Vec<u32>,
    pub scheme: crate::combinatorial::Scheme,
    #[serde(default = "default_runs")]
    pub runs_per_n: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub beta_au: f64,
    #[serde(default)]
    pub zeta_rad: f64,
}

fn default_runs() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub write_spectra: bool,
    pub eigen_cache: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "results".into(),
            write_spectra: false,
            eigen_cache: true,
        }
    }
}

/// Two-photon matrix-element grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub orders: Vec<u32>,
    #[serde(default = "default_pathway")]
    pub pathway: Pathway,
    /// Overrides of `[numerics]` for the stationary basis.
    pub box_radius_au: Option<f64>,
    pub breakpoints: Option<usize>,
    pub inner_radius_au: Option<f64>,
    /// Allowed relative spectral-sum vs Dalgarno–Lewis deviation.
    #[serde(default = "default_tolerance")]
    pub cross_check_tolerance: f64,
}

fn default_pathway() -> Pathway {
    Pathway::Spd
}

fn default_tolerance() -> f64 {
    5e-3
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Parses and validates; syntax and schema errors carry line numbers.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        HydrogenicSpec::new(self.atom.nuclear_charge, self.atom.initial_n, self.atom.initial_l)
            .map_err(|e| Error::Config(format!("[atom] {e}")))?;
        let f = &self.field;
        positive("field.photon_energy_ev", f.photon_energy_ev)?;
        positive("field.intensity_w_cm2", f.intensity_w_cm2)?;
        positive("field.fwhm_fs", f.fwhm_fs)?;
        match (f.lowest_order, f.center_order) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "[field] needs exactly one of lowest_order and center_order".into(),
                ))
            }
        }
        if f.phases.scheme == PhaseKind::Random && f.phases.seed.is_none() {
            return Err(Error::Config("[field.phases] random scheme needs a seed".into()));
        }
        if f.phases.scheme == PhaseKind::Explicit && f.phases.values_rad.is_none() {
            return Err(Error::Config("[field.phases] explicit scheme needs values_rad".into()));
        }
        let n = &self.numerics;
        positive("numerics.box_radius_au", n.box_radius_au)?;
        positive("numerics.dt_au", n.dt_au)?;
        positive("numerics.spectrum_step_ev", n.spectrum_step_ev)?;
        positive("numerics.inner_radius_au", n.inner_radius_au)?;
        if n.spline_order < 4 || n.breakpoints < n.spline_order + 2 {
            return Err(Error::Config(format!(
                "[numerics] need spline_order >= 4 and breakpoints >= spline_order + 2, got {} and {}",
                n.spline_order, n.breakpoints
            )));
        }
        if let Some(c) = &self.campaign {
            if c.n_values.is_empty() || c.n_values.contains(&0) {
                return Err(Error::Config("[campaign] n_values must list positive counts".into()));
            }
            if c.runs_per_n == 0 {
                return Err(Error::Config("[campaign] runs_per_n must be at least 1".into()));
            }
        }
        if let Some(p) = &self.perturbation {
            if p.orders.is_empty() {
                return Err(Error::Config("[perturbation] orders must not be empty".into()));
            }
            positive("perturbation.cross_check_tolerance", p.cross_check_tolerance)?;
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the parsed document.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json)[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn atom(&self) -> HydrogenicSpec {
        HydrogenicSpec::new(self.atom.nuclear_charge, self.atom.initial_n, self.atom.initial_l).expect("validated")
    }

    pub fn placement(&self) -> OrderPlacement {
        match (self.field.lowest_order, self.field.center_order) {
            (Some(q), _) => OrderPlacement::Lowest(q),
            (None, Some(q)) => OrderPlacement::Centered(q),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn comb_template(&self) -> CombTemplate {
        CombTemplate {
            photon_energy_ev: self.field.photon_energy_ev,
            intensity_w_cm2: self.field.intensity_w_cm2,
            fwhm_fs: self.field.fwhm_fs,
            placement: self.placement(),
        }
    }

    pub fn numerics_spec(&self) -> NumericsSpec {
        NumericsSpec {
            basis: self.numerics.basis_params(),
            l_max: self.numerics.l_max,
            dt: self.numerics.dt_au,
            spectrum_step_ev: self.numerics.spectrum_step_ev,
            density: self.numerics.density,
        }
    }

    /// Campaign described by `[campaign]`; `seed_override` replaces the master seed.
    pub fn campaign_spec(&self, seed_override: Option<u64>) -> Result<CampaignSpec> {
        let c = self
            .campaign
            .as_ref()
            .ok_or_else(|| Error::Config("missing [campaign] section".into()))?;
        let scheme = match c.scheme {
            crate::combinatorial::Scheme::Locked => SchemeSpec::Locked {
                beta: c.beta_au,
                zeta: c.zeta_rad,
            },
            crate::combinatorial::Scheme::Random => SchemeSpec::Random {
                runs_per_n: c.runs_per_n,
                master_seed: seed_override.unwrap_or(c.master_seed),
            },
        };
        let spec = CampaignSpec {
            atom: self.atom(),
            comb: self.comb_template(),
            n_values: c.n_values.clone(),
            scheme,
            numerics: self.numerics_spec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Phase scheme of `[field.phases]`; `seed_override` replaces a random seed.
    pub fn phase_scheme(&self, seed_override: Option<u64>) -> PhaseScheme {
        let p = &self.field.phases;
        match p.scheme {
            PhaseKind::Locked => PhaseScheme::Locked {
                beta: p.beta_au,
                zeta: p.zeta_rad,
            },
            PhaseKind::Random => PhaseScheme::Random {
                seed: seed_override.or(p.seed).expect("validated"),
            },
            PhaseKind::Explicit => PhaseScheme::Explicit {
                phases: p.values_rad.clone().expect("validated"),
            },
        }
    }

    /// Basis for the stationary two-photon calculation.
    pub fn perturbation_basis(&self) -> Result<BasisParams> {
        let p = self
            .perturbation
            .as_ref()
            .ok_or_else(|| Error::Config("missing [perturbation] section".into()))?;
        let mut n = self.numerics.clone();
        if let Some(v) = p.box_radius_au {
            n.box_radius_au = v;
        }
        if let Some(v) = p.breakpoints {
            n.breakpoints = v;
        }
        if let Some(v) = p.inner_radius_au {
            n.inner_radius_au = v;
        }
        Ok(n.basis_params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[atom]
nuclear_charge = 1

[field]
photon_energy_ev = 1.5
intensity_w_cm2 = 1e13
fwhm_fs = 5.0
center_order = 15
harmonics = 5

[campaign]
n_values = [2, 3, 4, 5]
scheme = "random"
runs_per_n = 10
master_seed = 7
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.numerics, NumericsSection::default());
        assert_eq!(cfg.output, OutputSection::default());
        let spec = cfg.campaign_spec(None).unwrap();
        assert_eq!(
            spec.scheme,
            SchemeSpec::Random {
                runs_per_n: 10,
                master_seed: 7
            }
        );
        assert_eq!(spec.comb.placement.orders(4).unwrap(), vec![11, 13, 15, 17]);
        let over = cfg.campaign_spec(Some(99)).unwrap();
        assert_ne!(over.hash(), spec.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let bad = MINIMAL.replace("fwhm_fs = 5.0", "fwhm_fs = 5.0\nfwhm = 3.0");
        let err = RunConfig::from_toml_str(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(err.is_config());
        assert!(msg.contains("line 9"), "{msg}");
        assert!(msg.contains("fwhm"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let bad = MINIMAL.replace("intensity_w_cm2 = 1e13", "intensity_w_cm2 = ");
        let msg = RunConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 7"), "{msg}");
    }

    #[test]
    fn semantic_validation() {
        let cases = [
            ("intensity_w_cm2 = 1e13", "intensity_w_cm2 = -1.0"),
            ("center_order = 15", "center_order = 15\nlowest_order = 11"),
            ("nuclear_charge = 1", "nuclear_charge = 1\ninitial_n = 3"),
            ("runs_per_n = 10", "runs_per_n = 0"),
            ("center_order = 15", "center_order = 14"),
        ];
        for (from, to) in cases {
            let text = MINIMAL.replace(from, to);
            let res = RunConfig::from_toml_str(&text).and_then(|c| c.campaign_spec(None));
            assert!(matches!(res, Err(Error::Config(_))), "{to}: {res:?}");
        }
    }

    #[test]
    fn phase_sections() {
        let text = MINIMAL.replace(
            "harmonics = 5",
            "harmonics = 5\n[field.phases]\nscheme = \"random\"\nseed = 42",
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.phase_scheme(None), PhaseScheme::Random { seed: 42 });
        assert_eq!(cfg.phase_scheme(Some(1)), PhaseScheme::Random { seed: 1 });
        let missing = MINIMAL.replace("harmonics = 5", "harmonics = 5\n[field.phases]\nscheme = \"random\"");
        assert!(RunConfig::from_toml_str(&missing).is_err());
    }
}
