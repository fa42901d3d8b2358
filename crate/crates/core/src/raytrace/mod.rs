//! Sequential 2D meridional ray tracing through birefringent slabs and lens
//! surfaces, accumulating per-ray propagation time.
//!
//! Rays carry two clocks: the phase-index optical path (`t_phase_fs`) and the
//! group-index delay (`t_group_fs`). [`TimingMode`] selects which one the
//! downstream statistics read.
//!
//! Inside a slab the wave normal is refracted with the index of its resolved
//! branch (ordinary, or extraordinary at the wave-normal angle), and the
//! extraordinary energy walk-off is added afterwards as a lateral
//! displacement pro-rated over the traversed length. Walk-off in a slab whose
//! optic axis lies in the vertical plane leaves the tracing plane and is
//! accumulated in `y_offset_mm` only.

mod lens;
mod surface;
mod vec2;

pub use lens::{LensPrescription, PrescriptionSurface};
pub use surface::{intersect, Surface, SurfaceShape, INTERSECT_MAX_ITER, INTERSECT_TOL_MM};
pub use vec2::Vec2;

use serde::{Deserialize, Serialize};

use crate::consts::SPEED_OF_LIGHT_MM_PER_FS;
use crate::dispersion::{AxisPlane, Branch, CrystalOrientation, Material};
use crate::error::{Error, Result};
use crate::spdc::{Origin, PairEvent, Polarization, PumpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingMode {
    #[default]
    Phase,
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Medium {
    Vacuum,
    Glass(Material),
}

impl Medium {
    /// Phase and group index at `lambda_nm`.
    pub fn indices(&self, lambda_nm: f64) -> Result<(f64, f64)> {
        match self {
            Medium::Vacuum => Ok((1.0, 1.0)),
            Medium::Glass(m) => Ok((
                m.refractive_index(Branch::Ordinary, lambda_nm * 1e-3)?,
                m.group_index(Branch::Ordinary, lambda_nm * 1e-3)?,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeathReason {
    TotalInternalReflection,
    Miss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub pos: Vec2,
    pub dir: Vec2,
    pub wavelength_nm: f64,
    pub pol: Polarization,
    pub t_phase_fs: f64,
    pub t_group_fs: f64,
    /// Out-of-plane walk-off accumulated in vertically oriented slabs.
    pub y_offset_mm: f64,
    pub alive: bool,
    pub death: Option<DeathReason>,
    /// Polyline vertices, recorded only when enabled.
    pub path: Option<Vec<Vec2>>,
}

impl Ray {
    pub fn new(pos: Vec2, dir: Vec2, wavelength_nm: f64, pol: Polarization) -> Self {
        Self {
            pos,
            dir: dir.normalized(),
            wavelength_nm,
            pol,
            t_phase_fs: 0.0,
            t_group_fs: 0.0,
            y_offset_mm: 0.0,
            alive: true,
            death: None,
            path: None,
        }
    }

    pub fn recording(mut self) -> Self {
        self.path = Some(vec![self.pos]);
        self
    }

    pub fn time(&self, mode: TimingMode) -> f64 {
        match mode {
            TimingMode::Phase => self.t_phase_fs,
            TimingMode::Group => self.t_group_fs,
        }
    }

    fn mark(&mut self) {
        if let Some(p) = &mut self.path {
            p.push(self.pos);
        }
    }

    /// Moves the ray to `pos` through a medium of the given indices.
    fn move_to(&mut self, pos: Vec2, n_phase: f64, n_group: f64) {
        let len = (pos - self.pos).norm();
        self.t_phase_fs += n_phase * len / SPEED_OF_LIGHT_MM_PER_FS;
        self.t_group_fs += n_group * len / SPEED_OF_LIGHT_MM_PER_FS;
        self.pos = pos;
        self.mark();
    }

    fn kill(&mut self, err: &Error) {
        self.alive = false;
        self.death = Some(match err {
            Error::TotalInternalReflection => DeathReason::TotalInternalReflection,
            _ => DeathReason::Miss,
        });
    }
}

/// Mirror reflection `a - 2 (a.n)/(n.n) n`.
pub fn reflect(a: Vec2, n: Vec2) -> Result<Vec2> {
    let nn = n.dot(n);
    if nn == 0.0 || !nn.is_finite() {
        return Err(Error::ZeroNormal);
    }
    Ok(a - n * (2.0 * a.dot(n) / nn))
}

/// Vector Snell refraction of unit direction `a` at a surface with normal
/// `n` (either orientation), where `u = n_dest / n_src`.
pub fn refract(a: Vec2, n: Vec2, u: f64) -> Result<Vec2> {
    let n0 = n.norm();
    if n0 == 0.0 || !n0.is_finite() {
        return Err(Error::ZeroNormal);
    }
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!("index ratio {u}")));
    }
    let nh = n / n0;
    let c = a.dot(nh);
    let aa = a.dot(a);
    let disc = c * c + aa * (u * u - 1.0);
    if disc < 0.0 {
        return Err(Error::TotalInternalReflection);
    }
    Ok((a + nh * (c.signum() * disc.sqrt() - c)) / u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlabRole {
    SpdcI,
    SpdcII,
    OverlapIII,
    OverlapIV,
    PreCompensator,
    PostCompensator,
}

/// Plane-parallel crystal with facets normal to z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalSlab {
    pub material: Material,
    pub orientation: CrystalOrientation,
    pub length_mm: f64,
    pub entry_z_mm: f64,
    pub role: SlabRole,
}

/// Index state of a wave inside a slab.
#[derive(Debug, Clone, Copy)]
struct SlabWave {
    angle: f64,
    n_phase: f64,
    n_group: f64,
    /// Angle between wave normal and optic axis (extraordinary only).
    theta: Option<f64>,
}

impl CrystalSlab {
    pub fn exit_z_mm(&self) -> f64 {
        self.entry_z_mm + self.length_mm
    }

    pub fn branch(&self, pol: Polarization) -> Branch {
        if !self.material.is_uniaxial() {
            return Branch::Ordinary;
        }
        match (self.orientation.axis_plane, pol) {
            (AxisPlane::Horizontal, Polarization::H) | (AxisPlane::Vertical, Polarization::V) => {
                Branch::Extraordinary
            }
            _ => Branch::Ordinary,
        }
    }

    fn axis_angle(&self, alpha: f64) -> f64 {
        let tilt = self.orientation.signed_tilt();
        match self.orientation.axis_plane {
            AxisPlane::Horizontal => (tilt - alpha).abs(),
            AxisPlane::Vertical => (tilt.cos() * alpha.cos()).clamp(-1.0, 1.0).acos(),
        }
    }

    fn wave_at(&self, pol: Polarization, lambda_nm: f64, alpha: f64) -> Result<SlabWave> {
        let l = lambda_nm * 1e-3;
        match self.branch(pol) {
            Branch::Ordinary => Ok(SlabWave {
                angle: alpha,
                n_phase: self.material.refractive_index(Branch::Ordinary, l)?,
                n_group: self.material.group_index(Branch::Ordinary, l)?,
                theta: None,
            }),
            Branch::Extraordinary => {
                let theta = self.axis_angle(alpha);
                Ok(SlabWave {
                    angle: alpha,
                    n_phase: self.material.extraordinary_index(l, theta)?,
                    n_group: self.material.extraordinary_group_index(l, theta)?,
                    theta: Some(theta),
                })
            }
        }
    }

    /// Wave inside the slab whose tangential invariant `n sin(alpha)` is `s`.
    fn wave_for_invariant(&self, pol: Polarization, lambda_nm: f64, s: f64) -> Result<SlabWave> {
        let mut wave = self.wave_at(pol, lambda_nm, 0.0)?;
        for _ in 0..50 {
            let sin_a = s / wave.n_phase;
            if sin_a.abs() >= 1.0 {
                return Err(Error::TotalInternalReflection);
            }
            let alpha = sin_a.asin();
            let prev = wave.angle;
            wave = self.wave_at(pol, lambda_nm, alpha)?;
            if (alpha - prev).abs() < 1e-15 {
                break;
            }
        }
        Ok(wave)
    }

    /// Propagates a ray already inside the slab from depth `from` to depth
    /// `to` along wave normal `wave`.
    fn propagate(&self, ray: &mut Ray, wave: &SlabWave, from: f64, to: f64) -> Result<()> {
        let dz = to - from;
        if dz <= 0.0 {
            return Ok(());
        }
        let l = ray.wavelength_nm * 1e-3;
        let (s, c) = wave.angle.sin_cos();
        let path = dz / c;
        ray.t_phase_fs += wave.n_phase * path / SPEED_OF_LIGHT_MM_PER_FS;
        ray.t_group_fs += wave.n_group * path / SPEED_OF_LIGHT_MM_PER_FS;
        let mut pos = ray.pos + Vec2::new(dz, dz * s / c);
        if let Some(theta) = wave.theta {
            let rho = self.material.walkoff_displacement(l, theta, path)?;
            match self.orientation.axis_plane {
                AxisPlane::Horizontal => {
                    let side = (self.orientation.signed_tilt() - wave.angle).signum();
                    pos.x += rho * side;
                }
                AxisPlane::Vertical => {
                    ray.y_offset_mm += rho * self.orientation.signed_tilt().signum();
                }
            }
        }
        ray.pos = pos;
        ray.dir = Vec2::from_angle(wave.angle);
        ray.mark();
        Ok(())
    }

    /// Leaves through the exit facet into vacuum.
    fn exit(&self, ray: &mut Ray, wave: &SlabWave) -> Result<()> {
        let s = wave.n_phase * wave.angle.sin();
        if s.abs() >= 1.0 {
            return Err(Error::TotalInternalReflection);
        }
        ray.dir = Vec2::new((1.0 - s * s).sqrt(), s);
        Ok(())
    }
}

/// Carries a vacuum ray through `slab`: refraction at the entry facet,
/// propagation with the resolved index and walk-off, refraction out.
pub fn traverse_slab(ray: &mut Ray, slab: &CrystalSlab) -> Result<()> {
    traverse_slab_partial(ray, slab, slab.length_mm)
}

/// As [`traverse_slab`] but stops at `depth` inside the slab (no exit
/// refraction unless `depth` reaches the exit facet).
pub fn traverse_slab_partial(ray: &mut Ray, slab: &CrystalSlab, depth: f64) -> Result<()> {
    if ray.dir.z <= 0.0 {
        return Err(Error::Miss("ray travels away from the slab".into()));
    }
    let t = (slab.entry_z_mm - ray.pos.z) / ray.dir.z;
    if t < -INTERSECT_TOL_MM {
        return Err(Error::Miss("ray starts past the slab entry".into()));
    }
    let entry = ray.pos + ray.dir * t.max(0.0);
    ray.move_to(entry, 1.0, 1.0);
    let wave = slab.wave_for_invariant(ray.pol, ray.wavelength_nm, ray.dir.x)?;
    let depth = depth.clamp(0.0, slab.length_mm);
    slab.propagate(ray, &wave, 0.0, depth)?;
    if depth >= slab.length_mm {
        slab.exit(ray, &wave)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Element {
    Slab(CrystalSlab),
    Surface(Surface),
}

impl Element {
    fn span(&self) -> (f64, f64) {
        match self {
            Element::Slab(s) => (s.entry_z_mm, s.exit_z_mm()),
            Element::Surface(s) => {
                let sag_edge = s.shape.sag(s.aperture_mm).unwrap_or(0.0);
                let z = s.vertex_z_mm;
                (z + sag_edge.min(0.0), z + sag_edge.max(0.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalSystem {
    pub elements: Vec<Element>,
    pub plane_z_mm: f64,
}

impl OpticalSystem {
    pub fn new(elements: Vec<Element>, plane_z_mm: f64) -> Result<Self> {
        let mut last_vertex = f64::NEG_INFINITY;
        let mut last_slab_exit = f64::NEG_INFINITY;
        let mut in_glass = false;
        for e in &elements {
            match e {
                Element::Slab(s) => {
                    if in_glass {
                        return Err(Error::Config(
                            "crystal slab placed inside lens glass".into(),
                        ));
                    }
                    if !(s.length_mm >= 0.0) || s.entry_z_mm < last_slab_exit - 1e-12 {
                        return Err(Error::Config(format!(
                            "slab {:?} overlaps its predecessor or has negative length",
                            s.role
                        )));
                    }
                    if s.entry_z_mm < last_vertex {
                        return Err(Error::Config("elements out of order".into()));
                    }
                    last_slab_exit = s.exit_z_mm();
                    last_vertex = s.entry_z_mm;
                }
                Element::Surface(s) => {
                    if s.vertex_z_mm < last_slab_exit || s.vertex_z_mm <= last_vertex {
                        return Err(Error::Config("elements out of order".into()));
                    }
                    last_vertex = s.vertex_z_mm;
                    in_glass = !matches!(s.medium_after, Medium::Vacuum);
                }
            }
        }
        if in_glass {
            return Err(Error::Config("system ends inside glass".into()));
        }
        let end = elements
            .iter()
            .map(|e| e.span().1)
            .fold(f64::NEG_INFINITY, f64::max);
        if plane_z_mm < end {
            return Err(Error::Config(format!(
                "collection plane {plane_z_mm} mm lies before the last element ({end} mm)"
            )));
        }
        let sys = Self {
            elements,
            plane_z_mm,
        };
        sys.check_overlap_lengths()?;
        Ok(sys)
    }

    fn check_overlap_lengths(&self) -> Result<()> {
        let spdc = self
            .slabs()
            .find(|s| s.role == SlabRole::SpdcI)
            .map(|s| s.length_mm);
        if let Some(l) = spdc {
            for s in self
                .slabs()
                .filter(|s| matches!(s.role, SlabRole::OverlapIII | SlabRole::OverlapIV))
            {
                if (s.length_mm - 0.5 * l).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "overlap crystal length {} mm is not half the SPDC length {l} mm",
                        s.length_mm
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn slabs(&self) -> impl Iterator<Item = &CrystalSlab> {
        self.elements.iter().filter_map(|e| match e {
            Element::Slab(s) => Some(s),
            Element::Surface(_) => None,
        })
    }

    pub fn slab_index(&self, role: SlabRole) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| matches!(e, Element::Slab(s) if s.role == role))
    }

    pub fn start_z_mm(&self) -> f64 {
        self.elements
            .first()
            .map(|e| e.span().0)
            .unwrap_or(self.plane_z_mm)
            .min(self.plane_z_mm)
    }
}

/// Traces a ray that starts before the first element to the collection plane.
/// Failures mark the ray dead and are returned.
pub fn trace(ray: &mut Ray, system: &OpticalSystem) -> Result<()> {
    trace_from(ray, system, 0)
}

/// Continues a vacuum ray from element `start` onward.
pub fn trace_from(ray: &mut Ray, system: &OpticalSystem, start: usize) -> Result<()> {
    let result = trace_inner(ray, system, start);
    if let Err(e) = &result {
        ray.kill(e);
    }
    result
}

fn trace_inner(ray: &mut Ray, system: &OpticalSystem, start: usize) -> Result<()> {
    if !ray.alive {
        return Err(Error::Miss("ray already dead".into()));
    }
    let mut medium = Medium::Vacuum;
    for element in &system.elements[start.min(system.elements.len())..] {
        match element {
            Element::Slab(slab) => traverse_slab(ray, slab)?,
            Element::Surface(surf) => {
                let (point, normal) = intersect(ray.pos, ray.dir, surf)?;
                let (n1, g1) = medium.indices(ray.wavelength_nm)?;
                ray.move_to(point, n1, g1);
                let (n2, _) = surf.medium_after.indices(ray.wavelength_nm)?;
                ray.dir = refract(ray.dir, normal, n2 / n1)?.normalized();
                medium = surf.medium_after.clone();
            }
        }
    }
    if ray.dir.z <= 0.0 {
        return Err(Error::Miss(
            "ray turned away from the collection plane".into(),
        ));
    }
    let t = (system.plane_z_mm - ray.pos.z) / ray.dir.z;
    if t < -INTERSECT_TOL_MM {
        return Err(Error::Miss("ray is past the collection plane".into()));
    }
    let end = ray.pos + ray.dir * t.max(0.0);
    ray.move_to(end, 1.0, 1.0);
    Ok(())
}

/// Arrival of one photon at the collection plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonArrival {
    pub t_phase_fs: f64,
    pub t_group_fs: f64,
    pub x_mm: f64,
    pub y_offset_mm: f64,
}

impl PhotonArrival {
    pub fn time(&self, mode: TimingMode) -> f64 {
        match mode {
            TimingMode::Phase => self.t_phase_fs,
            TimingMode::Group => self.t_group_fs,
        }
    }

    fn relative_to(self, reference: &PhotonArrival) -> Self {
        Self {
            t_phase_fs: self.t_phase_fs - reference.t_phase_fs,
            t_group_fs: self.t_group_fs - reference.t_group_fs,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairArrival {
    pub signal: PhotonArrival,
    pub idler: PhotonArrival,
}

/// Traces pair events through a source stack (which must contain the
/// `SpdcI` and `SpdcII` slabs) under either origin hypothesis.
#[derive(Debug, Clone)]
pub struct PairTracer {
    system: OpticalSystem,
    pump: PumpConfig,
    spdc: [usize; 2],
    reference: PhotonArrival,
}

impl PairTracer {
    pub fn new(system: OpticalSystem, pump: PumpConfig) -> Result<Self> {
        let idx = |role| {
            system
                .slab_index(role)
                .ok_or_else(|| Error::Config(format!("system lacks a {role:?} slab")))
        };
        let spdc = [idx(SlabRole::SpdcI)?, idx(SlabRole::SpdcII)?];
        let mut tracer = Self {
            system,
            pump,
            spdc,
            reference: PhotonArrival {
                t_phase_fs: 0.0,
                t_group_fs: 0.0,
                x_mm: 0.0,
                y_offset_mm: 0.0,
            },
        };
        for origin in [Origin::CrystalI, Origin::CrystalII] {
            let slab = tracer.origin_slab(origin);
            if slab.branch(origin.pair_polarization()) != Branch::Ordinary {
                return Err(Error::Config(format!(
                    "{:?} pairs are not ordinary in their birth crystal (type-I requires it)",
                    origin.pair_polarization()
                )));
            }
        }
        let degenerate = 2.0 * pump.wavelength_nm;
        let chief = tracer.trace_photon(
            Origin::CrystalI,
            0.5 * tracer.origin_slab(Origin::CrystalI).length_mm,
            0.0,
            degenerate,
            0.0,
            false,
        )?;
        tracer.reference = chief.0;
        Ok(tracer)
    }

    pub fn system(&self) -> &OpticalSystem {
        &self.system
    }

    pub fn pump(&self) -> &PumpConfig {
        &self.pump
    }

    /// Axial chief ray at the mean (degenerate) wavelength, born at the
    /// centre of crystal I; all reported times are relative to it.
    pub fn reference(&self) -> &PhotonArrival {
        &self.reference
    }

    fn slab_at(&self, idx: usize) -> &CrystalSlab {
        match &self.system.elements[idx] {
            Element::Slab(s) => s,
            Element::Surface(_) => unreachable!("spdc index points at a slab"),
        }
    }

    pub fn origin_slab(&self, origin: Origin) -> &CrystalSlab {
        self.slab_at(self.origin_index(origin))
    }

    fn origin_index(&self, origin: Origin) -> usize {
        match origin {
            Origin::CrystalI => self.spdc[0],
            Origin::CrystalII => self.spdc[1],
        }
    }

    /// Pump ray (polarised so that it is extraordinary in the origin
    /// crystal) traced from the stack entrance to the birth point.
    fn pump_to_birth(&self, origin: Origin, depth: f64, x0_mm: f64) -> Result<Ray> {
        let pol = origin.pair_polarization().orthogonal();
        let start = Vec2::new(self.system.start_z_mm(), x0_mm);
        let mut ray = Ray::new(start, Vec2::AXIS, self.pump.wavelength_nm, pol);
        let target = self.origin_index(origin);
        for element in &self.system.elements[..target] {
            match element {
                Element::Slab(slab) => traverse_slab(&mut ray, slab)?,
                Element::Surface(_) => {
                    return Err(Error::Config(
                        "lens surface placed before an SPDC crystal".into(),
                    ))
                }
            }
        }
        traverse_slab_partial(&mut ray, self.slab_at(target), depth)?;
        Ok(ray)
    }

    #[allow(clippy::too_many_arguments)]
    fn photon_ray(
        &self,
        origin: Origin,
        depth: f64,
        x0_mm: f64,
        lambda_nm: f64,
        internal_angle_deg: f64,
        record: bool,
    ) -> (Result<()>, Ray) {
        let pol = origin.pair_polarization();
        let pump = match self.pump_to_birth(origin, depth, x0_mm) {
            Ok(p) => p,
            Err(e) => {
                let start = Vec2::new(self.system.start_z_mm(), x0_mm);
                let mut ray = Ray::new(start, Vec2::AXIS, lambda_nm, pol);
                ray.kill(&e);
                return (Err(e), ray);
            }
        };
        let idx = self.origin_index(origin);
        let slab = self.slab_at(idx);
        let mut ray = Ray::new(
            pump.pos,
            Vec2::from_angle(internal_angle_deg.to_radians()),
            lambda_nm,
            pol,
        );
        if record {
            ray = ray.recording();
        }
        ray.t_phase_fs = pump.t_phase_fs;
        ray.t_group_fs = pump.t_group_fs;
        ray.y_offset_mm = pump.y_offset_mm;
        let run = |ray: &mut Ray| -> Result<()> {
            let wave = slab.wave_at(pol, lambda_nm, internal_angle_deg.to_radians())?;
            slab.propagate(ray, &wave, depth, slab.length_mm)?;
            slab.exit(ray, &wave)?;
            Ok(())
        };
        if let Err(e) = run(&mut ray) {
            ray.kill(&e);
            return (Err(e), ray);
        }
        let result = trace_from(&mut ray, &self.system, idx + 1);
        (result, ray)
    }

    fn trace_photon(
        &self,
        origin: Origin,
        depth: f64,
        x0_mm: f64,
        lambda_nm: f64,
        internal_angle_deg: f64,
        record: bool,
    ) -> Result<(PhotonArrival, Ray)> {
        let (result, ray) =
            self.photon_ray(origin, depth, x0_mm, lambda_nm, internal_angle_deg, record);
        result?;
        let arrival = PhotonArrival {
            t_phase_fs: ray.t_phase_fs,
            t_group_fs: ray.t_group_fs,
            x_mm: ray.pos.x,
            y_offset_mm: ray.y_offset_mm,
        };
        Ok((arrival.relative_to(&self.reference), ray))
    }

    /// Recorded signal (or idler) ray of `event` under its own origin. The
    /// ray is returned even when it dies; check `alive` and `death`.
    pub fn event_ray(&self, event: &PairEvent, signal: bool) -> Ray {
        let (lambda, angle) = if signal {
            (event.signal_nm, event.signal_angle_deg)
        } else {
            (event.idler_nm, event.idler_angle_deg)
        };
        self.photon_ray(
            event.origin,
            event.birth_z_mm,
            event.transverse_x_um * 1e-3,
            lambda,
            angle,
            true,
        )
        .1
    }

    /// Traces signal and idler of `event` as if born in `hypothesis`. The
    /// birth depth keeps its fractional position when mirrored into the
    /// other crystal.
    pub fn trace_event(&self, event: &PairEvent, hypothesis: Origin) -> Result<PairArrival> {
        let (s, i) = self.trace_event_rays(event, hypothesis, false)?;
        Ok(PairArrival {
            signal: s.0,
            idler: i.0,
        })
    }

    #[allow(clippy::type_complexity)]
    pub fn trace_event_rays(
        &self,
        event: &PairEvent,
        hypothesis: Origin,
        record: bool,
    ) -> Result<((PhotonArrival, Ray), (PhotonArrival, Ray))> {
        let from = self.origin_slab(event.origin).length_mm;
        let to = self.origin_slab(hypothesis).length_mm;
        let depth = if from > 0.0 {
            event.birth_z_mm / from * to
        } else {
            0.0
        };
        let x0 = event.transverse_x_um * 1e-3;
        let s = self.trace_photon(
            hypothesis,
            depth,
            x0,
            event.signal_nm,
            event.signal_angle_deg,
            record,
        )?;
        let i = self.trace_photon(
            hypothesis,
            depth,
            x0,
            event.idler_nm,
            event.idler_angle_deg,
            record,
        )?;
        Ok((s, i))
    }
}

/// Paraxial focus (axis crossing of a near-axial parallel ray) behind the
/// last element of `system` at `lambda_nm`.
pub fn paraxial_focus_z(system: &OpticalSystem, lambda_nm: f64) -> Result<f64> {
    let h = 1e-4;
    let mut ray = Ray::new(
        Vec2::new(system.start_z_mm() - 1.0, h),
        Vec2::AXIS,
        lambda_nm,
        Polarization::H,
    );
    let mut medium = Medium::Vacuum;
    for element in &system.elements {
        match element {
            Element::Slab(slab) => traverse_slab(&mut ray, slab)?,
            Element::Surface(surf) => {
                let (point, normal) = intersect(ray.pos, ray.dir, surf)?;
                let (n1, _) = medium.indices(lambda_nm)?;
                let (n2, _) = surf.medium_after.indices(lambda_nm)?;
                ray.pos = point;
                ray.dir = refract(ray.dir, normal, n2 / n1)?.normalized();
                medium = surf.medium_after.clone();
            }
        }
    }
    if ray.dir.x >= 0.0 {
        return Err(Error::Config(
            "system does not focus a parallel beam".into(),
        ));
    }
    Ok(ray.pos.z - ray.pos.x * ray.dir.z / ray.dir.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{MaterialDb, SellmeierCoefficients};

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn reflect_examples() {
        let n = Vec2::new(0.0, 1.0);
        let r = reflect(Vec2::new(S, -S), n).unwrap();
        assert!((r - Vec2::new(S, S)).norm() < 1e-15);
        assert_eq!(
            reflect(Vec2::new(0.0, -1.0), n).unwrap(),
            Vec2::new(0.0, 1.0)
        );
        assert_eq!(
            reflect(Vec2::new(1.0, 0.0), n).unwrap(),
            Vec2::new(1.0, 0.0)
        );
        assert!(matches!(
            reflect(Vec2::new(1.0, 0.0), Vec2::default()),
            Err(Error::ZeroNormal)
        ));
    }

    #[test]
    fn refract_examples() {
        let n = Vec2::new(0.0, 1.0);
        let r = refract(Vec2::new(S, -S), n, 1.5).unwrap();
        assert!(
            (r.z - 0.47140).abs() < 1e-5 && (r.x + 0.88192).abs() < 1e-5,
            "{r:?}"
        );
        assert!(((r.z).asin().to_degrees() - 28.1255).abs() < 1e-4);
        let r = refract(Vec2::new(0.0, -1.0), n, 1.7).unwrap();
        assert!((r - Vec2::new(0.0, -1.0)).norm() < 1e-15);
        assert!(matches!(
            refract(Vec2::new(S, -S), n, 1.0 / 1.5),
            Err(Error::TotalInternalReflection)
        ));
    }

    fn glass_slab(role: SlabRole, z: f64, len: f64, n: f64) -> CrystalSlab {
        CrystalSlab {
            material: Material::isotropic("flat", SellmeierCoefficients::constant(n), [0.2, 2.0]),
            orientation: CrystalOrientation::new(0.0, AxisPlane::Horizontal).unwrap(),
            length_mm: len,
            entry_z_mm: z,
            role,
        }
    }

    fn bbo_slab(plane: AxisPlane, cut: f64) -> CrystalSlab {
        CrystalSlab {
            material: MaterialDb::builtin().get("BBO").unwrap().clone(),
            orientation: CrystalOrientation::new(cut, plane).unwrap(),
            length_mm: 6.0,
            entry_z_mm: 1.0,
            role: SlabRole::SpdcII,
        }
    }

    #[test]
    fn ordinary_slab_delay_and_no_walkoff() {
        let slab = bbo_slab(AxisPlane::Vertical, 28.8);
        let mut ray = Ray::new(Vec2::new(1.0, 0.0), Vec2::AXIS, 780.0, Polarization::H);
        traverse_slab(&mut ray, &slab).unwrap();
        let n = 1.6611691859752775;
        let expected = n * 6.0 / SPEED_OF_LIGHT_MM_PER_FS;
        assert!(
            (ray.t_phase_fs - expected).abs() < 1e-6,
            "{}",
            ray.t_phase_fs
        );
        assert!((ray.t_phase_fs / 1000.0 - 33.25).abs() < 0.01);
        assert_eq!(ray.pos.x, 0.0);
        assert_eq!(ray.y_offset_mm, 0.0);
        assert!((ray.pos.z - 7.0).abs() < 1e-12);
    }

    #[test]
    fn extraordinary_walkoff_in_plane() {
        let slab = bbo_slab(AxisPlane::Horizontal, 28.8);
        let mut ray = Ray::new(Vec2::new(1.0, 0.0), Vec2::AXIS, 405.0, Polarization::H);
        traverse_slab(&mut ray, &slab).unwrap();
        assert!((ray.pos.x + 0.404).abs() < 0.005, "{}", ray.pos.x);
        assert!((ray.dir - Vec2::AXIS).norm() < 1e-15);
        let flipped = CrystalSlab {
            orientation: slab.orientation.flipped(),
            ..slab.clone()
        };
        let mut ray2 = Ray::new(Vec2::new(1.0, 0.0), Vec2::AXIS, 405.0, Polarization::H);
        traverse_slab(&mut ray2, &flipped).unwrap();
        assert!((ray2.pos.x + ray.pos.x).abs() < 1e-12);
        // Axis along z: no walk-off.
        let axial = bbo_slab(AxisPlane::Horizontal, 0.0);
        let mut ray3 = Ray::new(Vec2::new(1.0, 0.0), Vec2::AXIS, 405.0, Polarization::H);
        traverse_slab(&mut ray3, &axial).unwrap();
        assert_eq!(ray3.pos.x, 0.0);
    }

    #[test]
    fn vertical_axis_walkoff_leaves_plane() {
        let slab = bbo_slab(AxisPlane::Vertical, 28.8);
        let mut ray = Ray::new(Vec2::new(0.0, 0.0), Vec2::AXIS, 405.0, Polarization::V);
        traverse_slab(&mut ray, &slab).unwrap();
        assert_eq!(ray.pos.x, 0.0);
        assert!((ray.y_offset_mm + 0.404).abs() < 0.005);
    }

    #[test]
    fn slab_preserves_external_direction() {
        let slab = bbo_slab(AxisPlane::Horizontal, 28.8);
        let dir = Vec2::from_angle(0.01);
        let mut ray = Ray::new(Vec2::new(0.0, 0.0), dir, 800.0, Polarization::H);
        traverse_slab(&mut ray, &slab).unwrap();
        assert!((ray.dir - dir).norm() < 1e-14);
        assert!((ray.dir.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_system_vacuum_time() {
        let sys = OpticalSystem::new(vec![], 25.0).unwrap();
        let mut ray = Ray::new(Vec2::new(0.0, 0.0), Vec2::AXIS, 800.0, Polarization::H);
        trace(&mut ray, &sys).unwrap();
        assert!((ray.t_phase_fs - 25.0 / SPEED_OF_LIGHT_MM_PER_FS).abs() < 1e-9);
        assert_eq!(ray.t_phase_fs, ray.t_group_fs);
    }

    #[test]
    fn system_ordering_validated() {
        let a = glass_slab(SlabRole::PreCompensator, 0.0, 2.0, 1.5);
        let b = glass_slab(SlabRole::PostCompensator, 1.0, 2.0, 1.5);
        assert!(
            OpticalSystem::new(vec![Element::Slab(a.clone()), Element::Slab(b)], 10.0).is_err()
        );
        assert!(OpticalSystem::new(vec![Element::Slab(a)], 1.0).is_err());
    }

    #[test]
    fn overlap_length_invariant() {
        let mut i = glass_slab(SlabRole::SpdcI, 0.0, 6.0, 1.5);
        i.material = MaterialDb::builtin().get("BBO").unwrap().clone();
        let iii = glass_slab(SlabRole::OverlapIII, 7.0, 2.0, 1.5);
        assert!(OpticalSystem::new(vec![Element::Slab(i), Element::Slab(iii)], 20.0).is_err());
    }

    #[test]
    fn dead_ray_reports_reason() {
        let surf = Surface {
            vertex_z_mm: 5.0,
            shape: SurfaceShape::Plane,
            aperture_mm: 1.0,
            medium_after: Medium::Vacuum,
        };
        let sys = OpticalSystem::new(vec![Element::Surface(surf)], 10.0).unwrap();
        let mut ray = Ray::new(Vec2::new(0.0, 2.0), Vec2::AXIS, 800.0, Polarization::H);
        assert!(trace(&mut ray, &sys).is_err());
        assert!(!ray.alive);
        assert_eq!(ray.death, Some(DeathReason::Miss));
    }
}
