use std::path::Path;

use serde::{Deserialize, Serialize};

use super::surface::{Surface, SurfaceShape};
use super::Medium;
use crate::dispersion::MaterialDb;
use crate::error::{Error, Result};

/// One refracting surface of a lens prescription. `material` names the glass
/// behind the surface; `None` (or "air") means vacuum. `thickness_mm` is the
/// vertex distance to the next surface. A zero or absent radius is a plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescriptionSurface {
    #[serde(default)]
    pub radius_mm: Option<f64>,
    #[serde(default)]
    pub conic: f64,
    #[serde(default)]
    pub asphere_coeffs: Vec<f64>,
    #[serde(default)]
    pub thickness_mm: f64,
    #[serde(default)]
    pub material: Option<String>,
    pub aperture_mm: f64,
}

impl PrescriptionSurface {
    fn shape(&self) -> SurfaceShape {
        let r = self.radius_mm.filter(|r| *r != 0.0 && r.is_finite());
        match r {
            None if self.asphere_coeffs.is_empty() => SurfaceShape::Plane,
            Some(r) if self.conic == 0.0 && self.asphere_coeffs.is_empty() => {
                SurfaceShape::Sphere { radius_mm: r }
            }
            r => SurfaceShape::Asphere {
                radius_mm: r.unwrap_or(0.0),
                conic: self.conic,
                coeffs: self.asphere_coeffs.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LensPrescription {
    pub surfaces: Vec<PrescriptionSurface>,
}

impl LensPrescription {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if p.surfaces.is_empty() {
            return Err(Error::Config("lens prescription has no surfaces".into()));
        }
        for s in &p.surfaces {
            if !(s.aperture_mm > 0.0) || s.thickness_mm < 0.0 {
                return Err(Error::Config(
                    "lens surface needs a positive aperture and non-negative thickness".into(),
                ));
            }
        }
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    /// Single N-SK16 asphere, f = 7.5 mm at 810 nm.
    pub fn builtin_asphere() -> Self {
        Self::from_json(include_str!("../../data/lens_asphere.json")).expect("bundled lens")
    }

    /// Cemented N-LAK22 / N-SF6 achromat, f = 16 mm at 810 nm.
    pub fn builtin_doublet() -> Self {
        Self::from_json(include_str!("../../data/lens_doublet.json")).expect("bundled lens")
    }

    /// Axial extent from first to last vertex.
    pub fn length_mm(&self) -> f64 {
        let n = self.surfaces.len();
        self.surfaces[..n - 1].iter().map(|s| s.thickness_mm).sum()
    }

    /// Surfaces placed with the first vertex at `z_front_mm`.
    pub fn surfaces(&self, z_front_mm: f64, db: &MaterialDb) -> Result<Vec<Surface>> {
        let mut z = z_front_mm;
        let mut out = Vec::with_capacity(self.surfaces.len());
        for s in &self.surfaces {
            let medium = match s.material.as_deref() {
                None => Medium::Vacuum,
                Some(m) if m.eq_ignore_ascii_case("air") || m.eq_ignore_ascii_case("vacuum") => {
                    Medium::Vacuum
                }
                Some(m) => Medium::Glass(db.get(m)?.clone()),
            };
            out.push(Surface {
                vertex_z_mm: z,
                shape: s.shape(),
                aperture_mm: s.aperture_mm,
                medium_after: medium,
            });
            z += s.thickness_mm;
        }
        Ok(out)
    }
}
