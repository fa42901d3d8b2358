use serde::{Deserialize, Serialize};

use super::vec2::Vec2;
use super::Medium;
use crate::error::{Error, Result};

/// Newton tolerance on the sag equation, mm.
pub const INTERSECT_TOL_MM: f64 = 1e-10;
pub const INTERSECT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurfaceShape {
    Plane,
    Sphere {
        radius_mm: f64,
    },
    /// Even asphere: conic sag plus `A4 h^4 + A6 h^6 + ...`.
    Asphere {
        radius_mm: f64,
        conic: f64,
        coeffs: Vec<f64>,
    },
}

impl SurfaceShape {
    fn curvature_conic(&self) -> (f64, f64) {
        match self {
            SurfaceShape::Plane => (0.0, 0.0),
            SurfaceShape::Sphere { radius_mm } => (1.0 / radius_mm, 0.0),
            SurfaceShape::Asphere {
                radius_mm, conic, ..
            } => {
                let c = if *radius_mm == 0.0 {
                    0.0
                } else {
                    1.0 / radius_mm
                };
                (c, *conic)
            }
        }
    }

    fn coeffs(&self) -> &[f64] {
        match self {
            SurfaceShape::Asphere { coeffs, .. } => coeffs,
            _ => &[],
        }
    }

    /// Sag `z(h)` relative to the vertex; `None` outside the conic's domain.
    pub fn sag(&self, h: f64) -> Option<f64> {
        let (c, k) = self.curvature_conic();
        let arg = 1.0 - (1.0 + k) * c * c * h * h;
        if arg < 0.0 {
            return None;
        }
        let mut s = c * h * h / (1.0 + arg.sqrt());
        let h2 = h * h;
        let mut p = h2 * h2;
        for a in self.coeffs() {
            s += a * p;
            p *= h2;
        }
        Some(s)
    }

    pub fn sag_slope(&self, h: f64) -> Option<f64> {
        let (c, k) = self.curvature_conic();
        let arg = 1.0 - (1.0 + k) * c * c * h * h;
        if arg <= 0.0 && c != 0.0 {
            return None;
        }
        let mut d = if c == 0.0 { 0.0 } else { c * h / arg.sqrt() };
        let h2 = h * h;
        let mut p = h2 * h;
        for (i, a) in self.coeffs().iter().enumerate() {
            d += (4 + 2 * i) as f64 * a * p;
            p *= h2;
        }
        Some(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub vertex_z_mm: f64,
    pub shape: SurfaceShape,
    pub aperture_mm: f64,
    /// Medium the ray enters after refraction.
    pub medium_after: Medium,
}

impl Surface {
    /// Unit normal at transverse height `h`, facing back toward -z.
    pub fn normal_at(&self, h: f64) -> Option<Vec2> {
        let slope = self.shape.sag_slope(h)?;
        Some(Vec2::new(-1.0, slope).normalized())
    }
}

/// Intersection point and unit normal (facing the incoming side).
pub fn intersect(pos: Vec2, dir: Vec2, surface: &Surface) -> Result<(Vec2, Vec2)> {
    if dir.z <= 0.0 {
        return Err(Error::Miss("ray travels away from the surface".into()));
    }
    let zv = surface.vertex_z_mm;
    let point = match &surface.shape {
        SurfaceShape::Plane => {
            let t = (zv - pos.z) / dir.z;
            if t < -INTERSECT_TOL_MM {
                return Err(Error::Miss("plane lies behind the ray".into()));
            }
            pos + dir * t
        }
        SurfaceShape::Sphere { radius_mm } => {
            let r = *radius_mm;
            let centre = Vec2::new(zv + r, 0.0);
            let oc = pos - centre;
            let b = oc.dot(dir);
            let cc = oc.dot(oc) - r * r;
            let disc = b * b - cc;
            if disc < 0.0 {
                return Err(Error::Miss("sphere not hit".into()));
            }
            let sq = disc.sqrt();
            // The vertex-side cap: its points satisfy (z - z_centre) * R < 0.
            let hit = [-b - sq, -b + sq]
                .into_iter()
                .map(|t| (t, pos + dir * t))
                .find(|(t, p)| *t >= -INTERSECT_TOL_MM && (p.z - centre.z) * r < 0.0);
            match hit {
                Some((_, p)) => p,
                None => return Err(Error::Miss("sphere cap not hit".into())),
            }
        }
        SurfaceShape::Asphere { .. } => {
            let mut t = (zv - pos.z) / dir.z;
            let mut converged = false;
            for _ in 0..INTERSECT_MAX_ITER {
                let p = pos + dir * t;
                let sag = surface
                    .shape
                    .sag(p.x)
                    .ok_or_else(|| Error::Miss("outside the conic domain".into()))?;
                let slope = surface
                    .shape
                    .sag_slope(p.x)
                    .ok_or_else(|| Error::Miss("outside the conic domain".into()))?;
                let g = p.z - zv - sag;
                let dg = dir.z - slope * dir.x;
                if dg.abs() < 1e-300 {
                    break;
                }
                let step = g / dg;
                t -= step;
                if step.abs() < INTERSECT_TOL_MM * 1e-2 {
                    converged = true;
                    break;
                }
            }
            if !converged || t < -INTERSECT_TOL_MM {
                return Err(Error::Miss("asphere intersection did not converge".into()));
            }
            pos + dir * t
        }
    };
    if point.x.abs() > surface.aperture_mm {
        return Err(Error::Miss(format!(
            "height {:.4} mm outside aperture {:.4} mm",
            point.x, surface.aperture_mm
        )));
    }
    let normal = surface
        .normal_at(point.x)
        .ok_or_else(|| Error::Miss("normal undefined".into()))?;
    Ok((point, normal))
}
