use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersion::AxisPlane;
use crate::entanglement::{EventWeighting, PhaseModel};
use crate::error::{Error, Result};
use crate::raytrace::TimingMode;
use crate::spdc::PumpConfig;

/// A length that is either fixed, solved for, or swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthSpec {
    Fixed(f64),
    Keyword(LengthKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthKeyword {
    Auto,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Fixed(f64),
    Auto(LengthKeyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSettings {
    /// Centre wavelengths used for phase matching and on-axis references.
    pub signal_nm: f64,
    /// Defaults to the energy-conserving partner of `signal_nm`.
    #[serde(default)]
    pub idler_nm: Option<f64>,
    /// Signal wavelengths the sampler draws from.
    pub signal_band_nm: [f64; 2],
    /// Internal signal emission angles the sampler draws from.
    pub angle_deg: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSettings {
    pub material: String,
    pub length_mm: f64,
    #[serde(default = "auto_angle")]
    pub cut_angle_deg: AngleSpec,
    /// Include the two half-length walk-off overlap crystals.
    #[serde(default = "yes")]
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompensatorSettings {
    pub material: String,
    pub length_mm: LengthSpec,
    #[serde(default = "ninety")]
    pub cut_angle_deg: f64,
    pub axis_plane: AxisPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub start_mm: f64,
    pub stop_mm: f64,
    pub step_mm: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            start_mm: 2.5,
            stop_mm: 3.7,
            step_mm: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensSettings {
    /// "asphere", "doublet", "none", or a path to a prescription file
    /// (relative paths resolve against the config file's directory).
    pub prescription: String,
    /// Vacuum gap from the last crystal facet to the first lens vertex.
    pub distance_mm: f64,
    /// Wavelength at which the collection plane is put at the paraxial
    /// focus for parallel input.
    #[serde(default = "focus_nm")]
    pub focus_wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSettings {
    pub wavelength_nm: [f64; 3],
    pub angle_deg: [f64; 3],
    pub bands_nm: Vec<[f64; 2]>,
    pub max_external_deg: f64,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self {
            wavelength_nm: [740.0, 900.0, 0.5],
            angle_deg: [-1.0, 1.0, 0.005],
            bands_nm: vec![[770.0, 790.0], [832.4, 852.4]],
            max_external_deg: 0.36,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rays: usize,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default)]
    pub weighting: EventWeighting,
    #[serde(default)]
    pub phase_model: PhaseModel,
    #[serde(default = "resamples")]
    pub resamples: usize,
    /// Down-converted bandwidth setting the pair coherence time.
    pub linewidth_nm: f64,
    #[serde(default = "bin_fs")]
    pub histogram_bin_fs: f64,
    #[serde(default = "out_dir")]
    pub out: PathBuf,
    /// Optional material database replacing the bundled one.
    #[serde(default)]
    pub materials: Option<PathBuf>,
    pub pump: PumpConfig,
    pub pairs: PairSettings,
    pub crystals: CrystalSettings,
    pub pre_compensator: Option<CompensatorSettings>,
    pub post_compensator: Option<CompensatorSettings>,
    #[serde(default)]
    pub sweep: SweepSettings,
    pub lens: LensSettings,
    #[serde(default)]
    pub emission_map: MapSettings,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn auto_angle() -> AngleSpec {
    AngleSpec::Auto(LengthKeyword::Auto)
}
fn yes() -> bool {
    true
}
fn ninety() -> f64 {
    90.0
}
fn focus_nm() -> f64 {
    810.0
}
fn resamples() -> usize {
    200
}
fn bin_fs() -> f64 {
    0.05
}
fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ScenarioConfig {
    pub fn default_scenario() -> Self {
        Self::from_toml(include_str!("../../data/default_scenario.toml")).expect("bundled scenario")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Loads JSON or TOML, chosen by extension (TOML unless `.json`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut c = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rays < 1 {
            return bad("rays must be at least 1".into());
        }
        if !(self.linewidth_nm > 0.0) {
            return bad(format!(
                "linewidth {} nm must be positive",
                self.linewidth_nm
            ));
        }
        if !(self.histogram_bin_fs > 0.0) {
            return bad("histogram bin width must be positive".into());
        }
        self.pump.validate()?;
        let p = &self.pairs;
        if p.signal_band_nm[0] > p.signal_band_nm[1] || p.angle_deg[0] > p.angle_deg[1] {
            return bad("sampling ranges must be increasing".into());
        }
        if !(self.crystals.length_mm >= 0.0) {
            return bad("crystal length must be non-negative".into());
        }
        let swept = [&self.pre_compensator, &self.post_compensator]
            .iter()
            .filter(|c| {
                c.as_ref()
                    .is_some_and(|c| c.length_mm == LengthSpec::Keyword(LengthKeyword::Sweep))
            })
            .count();
        if swept > 1 {
            return bad("at most one swept parameter per scenario".into());
        }
        if let Some(c) = &self.pre_compensator {
            if c.length_mm == LengthSpec::Keyword(LengthKeyword::Sweep) {
                return bad("only the post-compensator can be swept".into());
            }
        }
        if let Some(LengthSpec::Keyword(LengthKeyword::Auto)) =
            self.post_compensator.as_ref().map(|c| c.length_mm)
        {
            return bad("post-compensator length must be a number or \"sweep\"".into());
        }
        for c in [&self.pre_compensator, &self.post_compensator]
            .into_iter()
            .flatten()
        {
            if let LengthSpec::Fixed(l) = c.length_mm {
                if !(l >= 0.0) {
                    return bad(format!("compensator length {l} mm must be non-negative"));
                }
            }
        }
        let s = &self.sweep;
        if !(s.step_mm > 0.0) || s.stop_mm < s.start_mm {
            return bad("empty compensator sweep grid".into());
        }
        let m = &self.emission_map;
        if !(m.wavelength_nm[2] > 0.0 && m.angle_deg[2] > 0.0) {
            return bad("emission-map steps must be positive".into());
        }
        if !(self.lens.distance_mm >= 0.0) {
            return bad("lens distance must be non-negative".into());
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    /// The output directory does not affect results and is left out.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serialises");
        if let Some(map) = value.as_object_mut() {
            map.remove("out");
        }
        let canonical = value.to_string();
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn idler_nm(&self) -> f64 {
        self.pairs
            .idler_nm
            .unwrap_or_else(|| 1.0 / (1.0 / self.pump.wavelength_nm - 1.0 / self.pairs.signal_nm))
    }
}
