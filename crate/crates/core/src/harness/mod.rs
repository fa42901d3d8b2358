//! Scenario configuration, optical-stack assembly and the command runners
//! behind the CLI.

mod commands;
mod config;

pub use commands::*;
pub use config::*;

use crate::dispersion::{coherence_time, AxisPlane, CrystalOrientation, MaterialDb};
use crate::entanglement::{pair_timing, OverlapParams, PairTiming};
use crate::error::{Error, Result};
use crate::raytrace::{
    paraxial_focus_z, CrystalSlab, Element, LensPrescription, OpticalSystem, PairTracer, SlabRole,
    TimingMode,
};
use crate::spdc::{phase_matching_angle, Origin, PairEvent, SamplingWindow, SpdcCrystal};

/// A configuration with its materials, cut angle and lens resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub db: MaterialDb,
    pub cut_angle_deg: f64,
    pub lens: Option<LensPrescription>,
}

/// Pre-compensator geometry after resolving "auto".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreCompensator {
    pub length_mm: f64,
    pub axis_plane: AxisPlane,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let db = match &config.materials {
            Some(p) => MaterialDb::load(&config.resolve(p))?,
            None => MaterialDb::builtin(),
        };
        let material = db.get(&config.crystals.material)?;
        let cut_angle_deg = match config.crystals.cut_angle_deg {
            AngleSpec::Fixed(a) => a,
            AngleSpec::Auto(LengthKeyword::Auto) => phase_matching_angle(
                config.pump.wavelength_nm,
                config.pairs.signal_nm,
                config.idler_nm(),
                material,
            )?,
            AngleSpec::Auto(LengthKeyword::Sweep) => {
                return Err(Error::Config("the cut angle cannot be swept".into()))
            }
        };
        let lens = match config.lens.prescription.to_ascii_lowercase().as_str() {
            "none" => None,
            "asphere" => Some(LensPrescription::builtin_asphere()),
            "doublet" => Some(LensPrescription::builtin_doublet()),
            _ => Some(LensPrescription::load(
                config.resolve(config.lens.prescription.as_ref()),
            )?),
        };
        Ok(Self {
            config,
            db,
            cut_angle_deg,
            lens,
        })
    }

    fn bbo_slab(
        &self,
        role: SlabRole,
        orientation: CrystalOrientation,
        length: f64,
    ) -> Result<CrystalSlab> {
        Ok(CrystalSlab {
            material: self.db.get(&self.config.crystals.material)?.clone(),
            orientation,
            length_mm: length,
            entry_z_mm: 0.0,
            role,
        })
    }

    /// Orientation of crystal I (axis vertical, emits H pairs) and crystal II
    /// (axis horizontal, emits V pairs).
    pub fn crystal_orientations(&self) -> Result<[CrystalOrientation; 2]> {
        Ok([
            CrystalOrientation::new(self.cut_angle_deg, AxisPlane::Vertical)?,
            CrystalOrientation::new(self.cut_angle_deg, AxisPlane::Horizontal)?,
        ])
    }

    pub fn spdc_crystals(&self) -> Result<[SpdcCrystal; 2]> {
        let m = self.db.get(&self.config.crystals.material)?;
        let [o1, o2] = self.crystal_orientations()?;
        let l = self.config.crystals.length_mm;
        Ok([
            SpdcCrystal::new(m.clone(), o1, l)?,
            SpdcCrystal::new(m.clone(), o2, l)?,
        ])
    }

    pub fn sampling_window(&self) -> SamplingWindow {
        let p = &self.config.pairs;
        SamplingWindow {
            signal_nm: (p.signal_band_nm[0], p.signal_band_nm[1]),
            angle_deg: (p.angle_deg[0], p.angle_deg[1]),
        }
    }

    /// Pair coherence time from the configured linewidth at the longer of
    /// the two centre wavelengths.
    pub fn tau_c_fs(&self) -> Result<f64> {
        let lambda = self.config.pairs.signal_nm.max(self.idler_nm());
        coherence_time(lambda * 1e-3, self.config.linewidth_nm * 1e-3)
    }

    pub fn idler_nm(&self) -> f64 {
        self.config.idler_nm()
    }

    pub fn overlap_params(&self) -> Result<OverlapParams> {
        Ok(OverlapParams {
            omega_p: self.config.pump.angular_frequency(),
            tau_p_fs: self.config.pump.coherence_time_fs(),
            tau_c_fs: self.tau_c_fs()?,
            phase_model: self.config.phase_model,
        })
    }

    /// Crystal stack from the pre-compensator through the post-compensator,
    /// laid out contiguously from z = 0.
    pub fn stack(&self, pre: Option<PreCompensator>, post_mm: Option<f64>) -> Result<Vec<Element>> {
        let mut slabs = Vec::new();
        if let Some(p) = pre {
            let c = self
                .config
                .pre_compensator
                .as_ref()
                .ok_or_else(|| Error::Config("no pre-compensator configured".into()))?;
            slabs.push(CrystalSlab {
                material: self.db.get(&c.material)?.clone(),
                orientation: CrystalOrientation::new(c.cut_angle_deg, p.axis_plane)?,
                length_mm: p.length_mm,
                entry_z_mm: 0.0,
                role: SlabRole::PreCompensator,
            });
        }
        let [o1, o2] = self.crystal_orientations()?;
        let l = self.config.crystals.length_mm;
        slabs.push(self.bbo_slab(SlabRole::SpdcI, o1, l)?);
        slabs.push(self.bbo_slab(SlabRole::SpdcII, o2, l)?);
        if self.config.crystals.overlap {
            slabs.push(self.bbo_slab(SlabRole::OverlapIII, o2.flipped(), 0.5 * l)?);
            slabs.push(self.bbo_slab(SlabRole::OverlapIV, o1.flipped(), 0.5 * l)?);
        }
        if let Some(len) = post_mm {
            let c = self
                .config
                .post_compensator
                .as_ref()
                .ok_or_else(|| Error::Config("no post-compensator configured".into()))?;
            slabs.push(CrystalSlab {
                material: self.db.get(&c.material)?.clone(),
                orientation: CrystalOrientation::new(c.cut_angle_deg, c.axis_plane)?,
                length_mm: len,
                entry_z_mm: 0.0,
                role: SlabRole::PostCompensator,
            });
        }
        let mut z = 0.0;
        Ok(slabs
            .into_iter()
            .map(|mut s| {
                s.entry_z_mm = z;
                z += s.length_mm;
                Element::Slab(s)
            })
            .collect())
    }

    /// Stack plus collection optics. Without a lens the collection plane
    /// sits `distance_mm` behind the stack.
    pub fn system(
        &self,
        pre: Option<PreCompensator>,
        post_mm: Option<f64>,
        with_lens: bool,
    ) -> Result<OpticalSystem> {
        let mut elements = self.stack(pre, post_mm)?;
        let end = stack_end(&elements);
        let front = end + self.config.lens.distance_mm;
        match (&self.lens, with_lens) {
            (Some(lens), true) => {
                let surfaces = lens.surfaces(front, &self.db)?;
                let lens_only = OpticalSystem::new(
                    surfaces.iter().cloned().map(Element::Surface).collect(),
                    front + lens.length_mm() + 1e4,
                )?;
                let plane = paraxial_focus_z(&lens_only, self.config.lens.focus_wavelength_nm)?;
                elements.extend(surfaces.into_iter().map(Element::Surface));
                OpticalSystem::new(elements, plane)
            }
            _ => OpticalSystem::new(elements, front),
        }
    }

    /// Post-compensator length when fixed in the configuration.
    pub fn post_length(&self) -> Result<Option<f64>> {
        match self.config.post_compensator.as_ref().map(|c| c.length_mm) {
            None => Ok(None),
            Some(LengthSpec::Fixed(l)) => Ok(Some(l)),
            Some(_) => Err(Error::Config(
                "post-compensator length is swept; give a number for this command".into(),
            )),
        }
    }

    /// On-axis reference event at the centre wavelengths, born mid-crystal.
    pub fn axial_event(&self, origin: Origin) -> PairEvent {
        PairEvent {
            origin,
            birth_z_mm: 0.5 * self.config.crystals.length_mm,
            transverse_x_um: 0.0,
            signal_nm: self.config.pairs.signal_nm,
            idler_nm: self.idler_nm(),
            signal_angle_deg: 0.0,
            idler_angle_deg: 0.0,
            polarization: origin.pair_polarization(),
            efficiency: 1.0,
        }
    }

    /// On-axis timing of the stack, lens excluded.
    pub fn axial_timing(
        &self,
        pre: Option<PreCompensator>,
        post_mm: Option<f64>,
        mode: TimingMode,
    ) -> Result<PairTiming> {
        let sys = self.system(pre, post_mm, false)?;
        let tracer = PairTracer::new(sys, self.config.pump)?;
        pair_timing(&self.axial_event(Origin::CrystalI), &tracer, mode, 1.0)
    }

    /// On-axis `(tau+, tau-)` of the stack, lens excluded.
    pub fn axial_taus(
        &self,
        pre: Option<PreCompensator>,
        post_mm: Option<f64>,
        mode: TimingMode,
    ) -> Result<(f64, f64)> {
        let t = self.axial_timing(pre, post_mm, mode)?;
        Ok((t.tau_plus(), t.tau_minus()))
    }

    /// Resolves the pre-compensator. "auto" solves for the length that
    /// zeroes the on-axis overlap phase (tau+ for the pump phase model). The
    /// phase is linear in the length; a negative solution means the other
    /// axis orientation is needed.
    pub fn pre_compensator(&self, mode: TimingMode) -> Result<Option<PreCompensator>> {
        let Some(c) = &self.config.pre_compensator else {
            return Ok(None);
        };
        match c.length_mm {
            LengthSpec::Fixed(l) => Ok(Some(PreCompensator {
                length_mm: l,
                axis_plane: c.axis_plane,
            })),
            LengthSpec::Keyword(LengthKeyword::Sweep) => {
                Err(Error::Config("the pre-compensator cannot be swept".into()))
            }
            LengthSpec::Keyword(LengthKeyword::Auto) => {
                let post = self.post_length().unwrap_or(None);
                let params = self.overlap_params()?;
                let probe = |l: f64| -> Result<f64> {
                    let p = PreCompensator {
                        length_mm: l,
                        axis_plane: c.axis_plane,
                    };
                    Ok(self.axial_timing(Some(p), post, mode)?.phase_delay(&params))
                };
                let t0 = probe(0.0)?;
                let t1 = probe(1.0)?;
                let slope = t1 - t0;
                if slope == 0.0 {
                    return Err(Error::Config("pre-compensator has no birefringence".into()));
                }
                let l = -t0 / slope;
                let axis_plane = if l >= 0.0 {
                    c.axis_plane
                } else {
                    match c.axis_plane {
                        AxisPlane::Horizontal => AxisPlane::Vertical,
                        AxisPlane::Vertical => AxisPlane::Horizontal,
                    }
                };
                Ok(Some(PreCompensator {
                    length_mm: l.abs(),
                    axis_plane,
                }))
            }
        }
    }

    /// Pair tracer for the fully resolved system.
    pub fn tracer(&self, mode: TimingMode) -> Result<PairTracer> {
        let pre = self.pre_compensator(mode)?;
        let sys = self.system(pre, self.post_length()?, true)?;
        PairTracer::new(sys, self.config.pump)
    }
}

fn stack_end(elements: &[Element]) -> f64 {
    elements
        .iter()
        .filter_map(|e| match e {
            Element::Slab(s) => Some(s.exit_z_mm()),
            Element::Surface(_) => None,
        })
        .fold(0.0, f64::max)
}
