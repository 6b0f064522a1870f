//! TOML experiment configuration: one file, flat sections per subcommand,
//! shared sections for the drives, the pair potential, and the noise model.

use serde::{Deserialize, Serialize};
use spinflip::{units, LaserDrive, PairPotentialModel};

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// RNG seed; mandatory for any stochastic run.
    pub seed: Option<u64>,
    pub drive: Option<DriveConfig>,
    pub potential: Option<PotentialConfig>,
    pub microwave: Option<MicrowaveConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub jcurve: Option<JcurveConfig>,
    pub scan: Option<ScanConfig>,
    pub rabi: Option<RabiConfig>,
    pub bell: Option<BellConfig>,
    pub lifetime: Option<LifetimeConfig>,
    pub recapture: Option<RecaptureConfig>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::de::Deserializer::parse(text)
            .map_err(|e| CliError::Config(format!("TOML syntax: {e}")))?;
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))
    }

    pub fn drive(&self) -> Result<LaserDrive, CliError> {
        self.drive
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [drive] section".into()))?
            .to_drive()
    }

    pub fn potential(&self) -> Result<PairPotentialModel, CliError> {
        self.potential
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [potential] section".into()))?
            .to_model()
    }

    pub fn microwave_rabi(&self) -> Result<f64, CliError> {
        let mw = self
            .microwave
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [microwave] section".into()))?;
        if !(mw.rabi_freq_mhz >= 0.0) {
            return Err(CliError::Config(
                "microwave.rabi_freq_mhz must be ≥ 0".into(),
            ));
        }
        Ok(mw.rabi_freq_mhz)
    }

    /// The seed, which stochastic runs must set explicitly.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config("a stochastic run needs `seed` in the config or --seed".into())
        })
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub rabi_freq_mhz: f64,
    pub detuning_mhz: f64,
    #[serde(default = "default_dressing_wavelength")]
    pub wavelength_nm: f64,
}

fn default_dressing_wavelength() -> f64 {
    units::DRESSING_WAVELENGTH_NM
}

impl DriveConfig {
    pub fn to_drive(&self) -> Result<LaserDrive, CliError> {
        LaserDrive::new(self.rabi_freq_mhz, self.detuning_mhz)
            .and_then(|d| d.with_wavelength(self.wavelength_nm))
            .map_err(|e| CliError::Config(format!("[drive]: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum PotentialKind {
    PerfectBlockade,
    VanDerWaals,
    Forster,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub model: PotentialKind,
    pub c6_mhz_um6: Option<f64>,
    pub c3_mhz_um3: Option<f64>,
    pub forster_defect_mhz: Option<f64>,
}

impl PotentialConfig {
    pub fn to_model(&self) -> Result<PairPotentialModel, CliError> {
        let model = match self.model {
            PotentialKind::PerfectBlockade => PairPotentialModel::PerfectBlockade,
            PotentialKind::VanDerWaals => PairPotentialModel::VanDerWaals {
                c6: self.c6_mhz_um6.ok_or_else(|| {
                    CliError::Config("van der Waals model needs potential.c6_mhz_um6".into())
                })?,
            },
            PotentialKind::Forster => PairPotentialModel::ForsterTwoChannel {
                c3: self.c3_mhz_um3.ok_or_else(|| {
                    CliError::Config("Förster model needs potential.c3_mhz_um3".into())
                })?,
                forster_defect: self.forster_defect_mhz.ok_or_else(|| {
                    CliError::Config("Förster model needs potential.forster_defect_mhz".into())
                })?,
            },
        };
        model
            .validate()
            .map_err(|e| CliError::Config(format!("[potential]: {e}")))?;
        Ok(model)
    }

    /// Finite pair shift at a separation; the perfect-blockade sentinel is
    /// rejected because dynamics needs a number.
    pub fn finite_u_dd(&self, separation_um: f64) -> Result<f64, CliError> {
        let model = self.to_model()?;
        match model
            .u_dd(separation_um)
            .map_err(|e| CliError::Config(format!("[potential]: {e}")))?
        {
            spinflip::PairShift::Finite(u) => Ok(u),
            spinflip::PairShift::Blockaded => Err(CliError::Config(
                "dynamics needs a finite pair shift; perfect-blockade applies only to jcurve"
                    .into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MicrowaveConfig {
    pub rabi_freq_mhz: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub rydberg_decay_rate_per_us: f64,
    #[serde(default)]
    pub doppler: bool,
    #[serde(default = "default_temperature")]
    pub temperature_uk: f64,
    #[serde(default = "default_mass")]
    pub atom_mass_amu: f64,
    #[serde(default = "default_pump")]
    pub pump_efficiency: f64,
}

fn default_temperature() -> f64 {
    20.0
}
fn default_mass() -> f64 {
    units::CS_MASS_AMU
}
fn default_pump() -> f64 {
    1.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            rydberg_decay_rate_per_us: 0.0,
            doppler: false,
            temperature_uk: default_temperature(),
            atom_mass_amu: default_mass(),
            pump_efficiency: default_pump(),
        }
    }
}

impl NoiseConfig {
    /// Doppler detuning width implied by the noise settings, 0 when off.
    pub fn doppler_sigma(&self, drive: &LaserDrive) -> Result<f64, CliError> {
        if !self.doppler {
            return Ok(0.0);
        }
        spinflip::dressing::doppler_detuning_sigma(
            self.temperature_uk,
            drive.wavelength,
            self.atom_mass_amu,
        )
        .map_err(|e| CliError::Config(format!("[noise]: {e}")))
    }
}

/// A numeric grid: either an explicit list or a linspace.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn materialize(&self, what: &str) -> Result<Vec<f64>, CliError> {
        let values = match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace {
                start,
                stop,
                points,
            } => {
                if *points < 2 || stop <= start {
                    return Err(CliError::Config(format!(
                        "{what}: a linspace grid needs points ≥ 2 and stop > start"
                    )));
                }
                (0..*points)
                    .map(|k| start + (stop - start) * k as f64 / (*points as f64 - 1.0))
                    .collect()
            }
        };
        if values.is_empty() {
            return Err(CliError::Config(format!("{what}: the grid is empty")));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct JcurveConfig {
    pub drives: Vec<DriveConfig>,
    pub r_grid_um: Grid,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub separation_um: f64,
    /// Pulse duration; defaults to the single-flip π time.
    pub pulse_time_us: Option<f64>,
    /// Detuning grid; defaults to a window bracketing both predicted lines.
    pub detuning_grid_mhz: Option<Grid>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RabiConfig {
    pub separation_um: f64,
    pub times_us: Grid,
    #[serde(default = "default_shots")]
    pub shots: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BellConfig {
    pub separation_um: f64,
    pub targets: Vec<BellTargetConfig>,
    #[serde(default)]
    pub phi_method: PhiMethodConfig,
    pub phase_grid_rad: Grid,
    #[serde(default = "default_shots")]
    pub shots: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BellTargetConfig {
    PsiPlus,
    PhiPlus,
}

impl BellTargetConfig {
    pub fn to_target(self) -> spinflip::BellTarget {
        match self {
            BellTargetConfig::PsiPlus => spinflip::BellTarget::PsiPlus,
            BellTargetConfig::PhiPlus => spinflip::BellTarget::PhiPlus,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PhiMethodConfig {
    #[default]
    GlobalHalfPi,
    TwoPhoton,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeConfig {
    /// Rydberg lifetime τ in µs; the decay rate is 1/τ.
    pub tau_us: f64,
    pub delays_us: Grid,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RecaptureConfig {
    #[serde(default = "default_waist")]
    pub waist_um: f64,
    #[serde(default = "default_depth")]
    pub depth_mk: f64,
    #[serde(default = "default_temperature")]
    pub temperature_uk: f64,
    #[serde(default = "default_trap_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "default_mass")]
    pub atom_mass_amu: f64,
    pub release_times_us: Grid,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_shots() -> usize {
    1
}
fn default_waist() -> f64 {
    1.29
}
fn default_depth() -> f64 {
    1.0
}
fn default_trap_wavelength() -> f64 {
    units::TRAP_WAVELENGTH_NM
}
fn default_samples() -> usize {
    20_000
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_fields_with_a_path() {
        let err = Config::parse("[drive]\nrabi_freq_mhz = 1.0\ndetuning_mhz = 1.0\ntypo = 3\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("drive"), "{msg}");
        assert!(msg.contains("typo"), "{msg}");
    }

    #[test]
    fn grids_materialize() {
        let g = Grid::Linspace {
            start: 0.0,
            stop: 1.0,
            points: 5,
        };
        assert_eq!(g.materialize("t").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = Grid::Values(vec![3.0, 1.0]);
        assert_eq!(g.materialize("t").unwrap(), vec![3.0, 1.0]);
        assert!(Grid::Values(vec![])
            .materialize("t")
            .unwrap_err()
            .to_string()
            .contains("empty"));
    }

    #[test]
    fn potential_round_trip() {
        let cfg = Config::parse(
            "[potential]\nmodel = \"van-der-waals\"\nc6_mhz_um6 = 1.0e5\n",
        )
        .unwrap();
        assert_eq!(
            cfg.potential().unwrap(),
            PairPotentialModel::VanDerWaals { c6: 1.0e5 }
        );
        let cfg = Config::parse("[potential]\nmodel = \"perfect-blockade\"\n").unwrap();
        assert!(cfg
            .potential
            .as_ref()
            .unwrap()
            .finite_u_dd(2.9)
            .is_err());
    }
}
