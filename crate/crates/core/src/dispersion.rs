//! Refractive indices of uniaxial crystals and isotropic glasses.
//!
//! Every material is described by the four-term Sellmeier form
//! `n^2 = A + B / (lambda^2 - C) + E * lambda^2` with `lambda` in micrometres.
//! Uniaxial crystals carry one coefficient set per principal index; glasses
//! carry only the ordinary set.
//!
//! Walk-off sign convention: displacements are measured in the plane that
//! contains the optic axis and count positive toward the side of the beam on
//! which the optic axis is tilted. Negative-uniaxial crystals such as BBO walk
//! the extraordinary beam away from the axis, so their displacement is
//! negative.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consts::SPEED_OF_LIGHT_UM_PER_FS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierCoefficients {
    #[serde(rename = "A")]
    pub a: f64,
    /// um^2
    #[serde(rename = "B")]
    pub b: f64,
    /// um^2
    #[serde(rename = "C")]
    pub c: f64,
    /// um^-2, signed: handbook `- D lambda^2` fits are stored as `E = -D`.
    #[serde(rename = "E")]
    pub e: f64,
}

impl SellmeierCoefficients {
    pub const fn new(a: f64, b: f64, c: f64, e: f64) -> Self {
        Self { a, b, c, e }
    }

    /// A constant index `n`, useful for idealised media.
    pub fn constant(n: f64) -> Self {
        Self::new(n * n, 0.0, 0.0, 0.0)
    }

    pub fn n_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.a + self.b / (l2 - self.c) + self.e * l2
    }

    pub fn index(&self, lambda_um: f64) -> f64 {
        self.n_squared(lambda_um).sqrt()
    }

    /// Analytic `dn/dlambda` in um^-1.
    pub fn dn_dlambda(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        let denom = l2 - self.c;
        let dn2 = -2.0 * self.b * lambda_um / (denom * denom) + 2.0 * self.e * lambda_um;
        dn2 / (2.0 * self.index(lambda_um))
    }

    pub fn group_index(&self, lambda_um: f64) -> f64 {
        self.index(lambda_um) - lambda_um * self.dn_dlambda(lambda_um)
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: &str| Error::InvalidMaterial {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if ![self.a, self.b, self.c, self.e]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(bad("non-finite coefficient"));
        }
        if self.b < 0.0 {
            return Err(bad("B must be non-negative"));
        }
        if self.c < 0.0 {
            return Err(bad("C must be non-negative"));
        }
        Ok(())
    }
}

/// Which principal index of a uniaxial medium a field samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Ordinary,
    Extraordinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub ordinary: SellmeierCoefficients,
    #[serde(default)]
    pub extraordinary: Option<SellmeierCoefficients>,
    /// Validity window `[lo, hi]` in um.
    pub window_um: [f64; 2],
    #[serde(default)]
    pub source: String,
}

impl Material {
    pub fn isotropic(name: &str, coeffs: SellmeierCoefficients, window_um: [f64; 2]) -> Self {
        Self {
            name: name.to_string(),
            ordinary: coeffs,
            extraordinary: None,
            window_um,
            source: String::new(),
        }
    }

    pub fn uniaxial(
        name: &str,
        ordinary: SellmeierCoefficients,
        extraordinary: SellmeierCoefficients,
        window_um: [f64; 2],
    ) -> Self {
        Self {
            name: name.to_string(),
            ordinary,
            extraordinary: Some(extraordinary),
            window_um,
            source: String::new(),
        }
    }

    pub fn is_uniaxial(&self) -> bool {
        self.extraordinary.is_some()
    }

    /// Checks the coefficient invariants and that `n^2 > 1` across the window.
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.window_um;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidMaterial {
                name: self.name.clone(),
                reason: format!("bad window [{lo}, {hi}]"),
            });
        }
        let sets = std::iter::once(&self.ordinary).chain(self.extraordinary.as_ref());
        for coeffs in sets {
            coeffs.validate(&self.name)?;
            if lo * lo <= coeffs.c {
                return Err(Error::InvalidMaterial {
                    name: self.name.clone(),
                    reason: "window reaches the Sellmeier pole".into(),
                });
            }
            for i in 0..=64 {
                let l = lo + (hi - lo) * i as f64 / 64.0;
                if coeffs.n_squared(l) <= 1.0 {
                    return Err(Error::InvalidMaterial {
                        name: self.name.clone(),
                        reason: format!("n^2 <= 1 at {l} um"),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_window(&self, lambda_um: f64) -> Result<()> {
        let [lo, hi] = self.window_um;
        if lambda_um.is_finite() && lambda_um >= lo && lambda_um <= hi {
            Ok(())
        } else {
            Err(Error::WavelengthOutOfWindow {
                material: self.name.clone(),
                lambda_um,
                lo,
                hi,
            })
        }
    }

    fn coefficients(&self, branch: Branch) -> Result<&SellmeierCoefficients> {
        match branch {
            Branch::Ordinary => Ok(&self.ordinary),
            Branch::Extraordinary => self
                .extraordinary
                .as_ref()
                .ok_or_else(|| Error::NotUniaxial(self.name.clone())),
        }
    }

    pub fn refractive_index(&self, branch: Branch, lambda_um: f64) -> Result<f64> {
        self.check_window(lambda_um)?;
        Ok(self.coefficients(branch)?.index(lambda_um))
    }

    /// Group index `n - lambda dn/dlambda` from the analytic derivative.
    pub fn group_index(&self, branch: Branch, lambda_um: f64) -> Result<f64> {
        self.check_window(lambda_um)?;
        Ok(self.coefficients(branch)?.group_index(lambda_um))
    }

    /// Index seen by an extraordinary wave whose normal makes angle `theta`
    /// (radians) with the optic axis. Isotropic media return the ordinary
    /// index.
    pub fn extraordinary_index(&self, lambda_um: f64, theta: f64) -> Result<f64> {
        self.check_window(lambda_um)?;
        match &self.extraordinary {
            None => Ok(self.ordinary.index(lambda_um)),
            Some(e) => Ok(effective_index(
                self.ordinary.index(lambda_um),
                e.index(lambda_um),
                theta,
            )),
        }
    }

    /// Group index of the extraordinary wave at angle `theta` from the axis,
    /// differentiating the effective index with respect to wavelength.
    pub fn extraordinary_group_index(&self, lambda_um: f64, theta: f64) -> Result<f64> {
        self.check_window(lambda_um)?;
        let Some(e) = &self.extraordinary else {
            return Ok(self.ordinary.group_index(lambda_um));
        };
        let no = self.ordinary.index(lambda_um);
        let ne = e.index(lambda_um);
        let neff = effective_index(no, ne, theta);
        let (s, c) = theta.sin_cos();
        let dneff = neff.powi(3)
            * (c * c * self.ordinary.dn_dlambda(lambda_um) / no.powi(3)
                + s * s * e.dn_dlambda(lambda_um) / ne.powi(3));
        Ok(neff - lambda_um * dneff)
    }

    /// Transverse walk-off (mm) of an extraordinary beam after `length_mm`
    /// of propagation at angle `theta` (radians) from the optic axis.
    pub fn walkoff_displacement(&self, lambda_um: f64, theta: f64, length_mm: f64) -> Result<f64> {
        let e = self
            .extraordinary
            .as_ref()
            .ok_or_else(|| Error::NotUniaxial(self.name.clone()))?;
        self.check_window(lambda_um)?;
        let no = self.ordinary.index(lambda_um);
        let ne = e.index(lambda_um);
        let neff = effective_index(no, ne, theta);
        Ok(length_mm * neff * neff / 2.0
            * (1.0 / (no * no) - 1.0 / (ne * ne))
            * (2.0 * theta).sin())
    }
}

/// Effective index of an extraordinary wave at angle `theta` (radians) from
/// the optic axis: `1/n^2 = (cos/n_o)^2 + (sin/n_e)^2`.
pub fn effective_index(n_o: f64, n_e: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let inv = (c / n_o).powi(2) + (s / n_e).powi(2);
    1.0 / inv.sqrt()
}

pub fn refractive_index(material: &Material, branch: Branch, lambda_um: f64) -> Result<f64> {
    material.refractive_index(branch, lambda_um)
}

pub fn group_index(material: &Material, branch: Branch, lambda_um: f64) -> Result<f64> {
    material.group_index(branch, lambda_um)
}

pub fn walkoff_displacement(
    material: &Material,
    lambda_um: f64,
    theta: f64,
    length_mm: f64,
) -> Result<f64> {
    material.walkoff_displacement(lambda_um, theta, length_mm)
}

/// Coherence time in fs of a rectangular spectrum of width `delta_lambda_um`
/// centred on `lambda_um`: `lambda^2 / (c * delta_lambda)`.
pub fn coherence_time(lambda_um: f64, delta_lambda_um: f64) -> Result<f64> {
    if !(delta_lambda_um > 0.0) || !(lambda_um > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coherence time needs positive wavelength and linewidth, got {lambda_um}, {delta_lambda_um}"
        )));
    }
    Ok(lambda_um * lambda_um / (SPEED_OF_LIGHT_UM_PER_FS * delta_lambda_um))
}

/// Inclination of a crystal's optic axis relative to the facet normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalOrientation {
    pub cut_angle_deg: f64,
    pub axis_plane: AxisPlane,
    /// Mirror the axis tilt to the negative transverse side (overlap crystals).
    #[serde(default)]
    pub flipped: bool,
}

/// Plane containing the optic axis. `Horizontal` is the meridional
/// (tracing) plane, so horizontally polarised light is extraordinary there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisPlane {
    Horizontal,
    Vertical,
}

impl CrystalOrientation {
    pub fn new(cut_angle_deg: f64, axis_plane: AxisPlane) -> Result<Self> {
        if !(0.0..=90.0).contains(&cut_angle_deg) {
            return Err(Error::InvalidArgument(format!(
                "cut angle {cut_angle_deg} deg outside [0, 90]"
            )));
        }
        Ok(Self {
            cut_angle_deg,
            axis_plane,
            flipped: false,
        })
    }

    pub fn flipped(mut self) -> Self {
        self.flipped = !self.flipped;
        self
    }

    /// Signed tilt of the optic axis toward +x in the meridional plane.
    pub fn signed_tilt(&self) -> f64 {
        let t = self.cut_angle_deg.to_radians();
        if self.flipped {
            -t
        } else {
            t
        }
    }
}

/// Collection of named materials, loaded from the JSON database.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaterialDb {
    entries: Vec<Material>,
}

impl MaterialDb {
    pub fn from_entries(entries: Vec<Material>) -> Result<Self> {
        for m in &entries {
            m.validate()?;
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<Material> = serde_json::from_str(text)?;
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    /// The database shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/materials.json"))
            .expect("shipped materials.json is valid")
    }

    pub fn get(&self, name: &str) -> Result<&Material> {
        self.entries
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.entries.iter()
    }
}
