//! Type-I phase matching, the sinc^2 conversion density, and sampling of
//! down-conversion pair events.
//!
//! Kinematics are meridional: the pump propagates along +z, signal and idler
//! leave the birth point at internal angles `alpha_s`, `alpha_i` in the x-z
//! plane, and transverse momentum is closed by `k_s sin(alpha_s) +
//! k_i sin(alpha_i) = 0`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consts::SPEED_OF_LIGHT_UM_PER_FS;
use crate::dispersion::{Branch, CrystalOrientation, Material};
use crate::error::{Error, Result};

/// Events drawn per RNG substream. Fixed so that results do not depend on
/// how many workers share the work.
pub const SAMPLE_CHUNK: usize = 2048;

/// Iteration cap for the rejection sampler, per event.
pub const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub wavelength_nm: f64,
    /// 1/e^2 intensity radius.
    pub waist_um: f64,
    /// Spectral width in rad/fs; zero means continuous-wave.
    #[serde(default)]
    pub linewidth_rad_per_fs: f64,
    /// Linear polarization angle from horizontal.
    #[serde(default = "default_pump_polarization")]
    pub polarization_deg: f64,
}

fn default_pump_polarization() -> f64 {
    45.0
}

impl PumpConfig {
    pub fn cw(wavelength_nm: f64, waist_um: f64) -> Self {
        Self {
            wavelength_nm,
            waist_um,
            linewidth_rad_per_fs: 0.0,
            polarization_deg: 45.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_nm > 0.0)
            || !(self.waist_um > 0.0)
            || !(self.linewidth_rad_per_fs >= 0.0)
        {
            return Err(Error::Config(format!("invalid pump parameters {self:?}")));
        }
        Ok(())
    }

    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_nm * 1e-3
    }

    /// Central angular frequency in rad/fs.
    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT_UM_PER_FS / self.wavelength_um()
    }

    /// Pump coherence time `1/linewidth` in fs; infinite for a CW pump.
    pub fn coherence_time_fs(&self) -> f64 {
        if self.linewidth_rad_per_fs > 0.0 {
            1.0 / self.linewidth_rad_per_fs
        } else {
            f64::INFINITY
        }
    }

    /// Probability that a pair is born in crystal I (vertical pump component).
    pub fn crystal_one_probability(&self) -> f64 {
        self.polarization_deg.to_radians().sin().powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdcCrystal {
    pub material: Material,
    pub orientation: CrystalOrientation,
    pub length_mm: f64,
}

impl SpdcCrystal {
    pub fn new(
        material: Material,
        orientation: CrystalOrientation,
        length_mm: f64,
    ) -> Result<Self> {
        if !material.is_uniaxial() {
            return Err(Error::NotUniaxial(material.name.clone()));
        }
        if !(length_mm >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "crystal length {length_mm} mm"
            )));
        }
        Ok(Self {
            material,
            orientation,
            length_mm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    CrystalI,
    CrystalII,
}

/// Pair polarization. Crystal I emits H pairs, crystal II emits V pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Origin {
    pub fn pair_polarization(self) -> Polarization {
        match self {
            Origin::CrystalI => Polarization::H,
            Origin::CrystalII => Polarization::V,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Origin::CrystalI => Origin::CrystalII,
            Origin::CrystalII => Origin::CrystalI,
        }
    }
}

impl Polarization {
    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEvent {
    pub origin: Origin,
    /// Depth of the birth point inside the origin crystal, mm.
    pub birth_z_mm: f64,
    /// Pump-ray transverse coordinate at the entrance of the stack.
    pub transverse_x_um: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
    /// Internal emission angles, signed, degrees.
    pub signal_angle_deg: f64,
    pub idler_angle_deg: f64,
    pub polarization: Polarization,
    /// Conversion probability of the sampled kinematics.
    pub efficiency: f64,
}

fn wavenumber_per_mm(index: f64, lambda_nm: f64) -> f64 {
    2.0 * PI * index / (lambda_nm * 1e-6)
}

/// `lambda_i` fixed by energy conservation for a CW pump.
pub fn idler_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if !(signal_nm > pump_nm) {
        return Err(Error::NoPhaseMatching(format!(
            "signal {signal_nm} nm must be longer than pump {pump_nm} nm"
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / signal_nm))
}

/// Internal idler angle (deg) closing transverse momentum for a given signal.
pub fn idler_angle(
    crystal: &SpdcCrystal,
    signal_nm: f64,
    idler_nm: f64,
    signal_angle_deg: f64,
) -> Result<f64> {
    let m = &crystal.material;
    let ks = wavenumber_per_mm(
        m.refractive_index(Branch::Ordinary, signal_nm * 1e-3)?,
        signal_nm,
    );
    let ki = wavenumber_per_mm(
        m.refractive_index(Branch::Ordinary, idler_nm * 1e-3)?,
        idler_nm,
    );
    let s = -ks * signal_angle_deg.to_radians().sin() / ki;
    if s.abs() > 1.0 {
        return Err(Error::UnphysicalAngle(format!(
            "no idler direction balances signal at {signal_angle_deg} deg"
        )));
    }
    Ok(s.asin().to_degrees())
}

/// Longitudinal phase mismatch `k_p - k_s,z - k_i,z` in rad/mm.
pub fn phase_mismatch(
    pump: &PumpConfig,
    crystal: &SpdcCrystal,
    signal_nm: f64,
    idler_nm: f64,
    signal_angle_deg: f64,
    idler_angle_deg: f64,
) -> Result<f64> {
    for a in [signal_angle_deg, idler_angle_deg] {
        if !(a.abs() < 90.0) {
            return Err(Error::UnphysicalAngle(format!("internal angle {a} deg")));
        }
    }
    let m = &crystal.material;
    let theta = crystal.orientation.cut_angle_deg.to_radians();
    let np = m.extraordinary_index(pump.wavelength_um(), theta)?;
    let ns = m.refractive_index(Branch::Ordinary, signal_nm * 1e-3)?;
    let ni = m.refractive_index(Branch::Ordinary, idler_nm * 1e-3)?;
    let kp = wavenumber_per_mm(np, pump.wavelength_nm);
    let ks = wavenumber_per_mm(ns, signal_nm) * signal_angle_deg.to_radians().cos();
    let ki = wavenumber_per_mm(ni, idler_nm) * idler_angle_deg.to_radians().cos();
    Ok(kp - ks - ki)
}

/// Conversion probability `(sin(x)/x)^2` with `x = dk L / 2`.
pub fn pm_efficiency(delta_k: f64, length_mm: f64) -> f64 {
    let x = 0.5 * delta_k * length_mm;
    if x.abs() < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// Collinear type-I cut angle (deg) solving
/// `n_eff(lambda_p, theta)/lambda_p = n_o(lambda_s)/lambda_s + n_o(lambda_i)/lambda_i`.
pub fn phase_matching_angle(
    pump_nm: f64,
    signal_nm: f64,
    idler_nm: f64,
    material: &Material,
) -> Result<f64> {
    if !material.is_uniaxial() {
        return Err(Error::NotUniaxial(material.name.clone()));
    }
    if !(signal_nm > pump_nm && idler_nm > pump_nm) {
        return Err(Error::NoPhaseMatching(format!(
            "daughters ({signal_nm}, {idler_nm}) nm must be longer than the pump {pump_nm} nm"
        )));
    }
    let energy = 1.0 / signal_nm + 1.0 / idler_nm - 1.0 / pump_nm;
    if energy.abs() * pump_nm > 1e-6 {
        return Err(Error::NoPhaseMatching(format!(
            "energy not conserved: 1/ls + 1/li - 1/lp = {energy:e} nm^-1"
        )));
    }
    let ns = material.refractive_index(Branch::Ordinary, signal_nm * 1e-3)?;
    let ni = material.refractive_index(Branch::Ordinary, idler_nm * 1e-3)?;
    let target = ns / signal_nm + ni / idler_nm;
    let lp = pump_nm * 1e-3;
    let mismatch = |theta: f64| -> Result<f64> {
        Ok(material.extraordinary_index(lp, theta)? / pump_nm - target)
    };
    let mut lo = 0.0_f64;
    let mut hi = PI / 2.0;
    let f_lo = mismatch(lo)?;
    let f_hi = mismatch(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoPhaseMatching(format!(
            "mismatch keeps its sign over [0, 90] deg ({f_lo:e}, {f_hi:e})"
        )));
    }
    // Bisect to the floating-point limit; the bracket is only ~1.6 rad wide.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = mismatch(mid)?;
        if f_mid == 0.0 {
            return Ok(mid.to_degrees());
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).to_degrees())
}

/// Conversion probability over a signal-wavelength by internal-angle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMap {
    pub wavelengths_nm: Vec<f64>,
    pub angles_deg: Vec<f64>,
    /// Row-major: `values[i * angles.len() + j]` is (wavelength i, angle j).
    pub values: Vec<f64>,
}

impl EfficiencyMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.angles_deg.len() + j]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Internal angle of the brightest cell for each wavelength row.
    pub fn ridge(&self) -> Vec<(f64, f64, f64)> {
        let na = self.angles_deg.len();
        self.wavelengths_nm
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let row = &self.values[i * na..(i + 1) * na];
                let (j, v) = row.iter().enumerate().fold((0, f64::MIN), |acc, (j, &v)| {
                    if v > acc.1 {
                        (j, v)
                    } else {
                        acc
                    }
                });
                (l, self.angles_deg[j], v)
            })
            .collect()
    }

    /// Efficiency-weighted fraction of the cells inside `bands_nm` whose
    /// external emission angle is at most `max_external_deg`.
    pub fn captured_fraction(
        &self,
        crystal: &SpdcCrystal,
        bands_nm: &[(f64, f64)],
        max_external_deg: f64,
    ) -> Result<f64> {
        let na = self.angles_deg.len();
        let mut total = 0.0;
        let mut inside = 0.0;
        for (i, &l) in self.wavelengths_nm.iter().enumerate() {
            if !bands_nm.iter().any(|&(lo, hi)| l >= lo && l <= hi) {
                continue;
            }
            let n = crystal
                .material
                .refractive_index(Branch::Ordinary, l * 1e-3)?;
            for (j, &a) in self.angles_deg.iter().enumerate() {
                let v = self.values[i * na + j];
                total += v;
                if external_angle_deg(n, a).abs() <= max_external_deg {
                    inside += v;
                }
            }
        }
        if total == 0.0 {
            return Err(Error::InvalidArgument(
                "no map cells inside the bands".into(),
            ));
        }
        Ok(inside / total)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda_nm,alpha_deg,efficiency")?;
        let na = self.angles_deg.len();
        for (i, l) in self.wavelengths_nm.iter().enumerate() {
            for (j, a) in self.angles_deg.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt17(*l),
                    fmt17(*a),
                    fmt17(self.values[i * na + j])
                )?;
            }
        }
        Ok(())
    }
}

/// Float formatted with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Angle in air after refraction at a facet normal to z.
pub fn external_angle_deg(internal_index: f64, internal_deg: f64) -> f64 {
    let s = (internal_index * internal_deg.to_radians().sin()).clamp(-1.0, 1.0);
    s.asin().to_degrees()
}

/// Conversion probability for one signal wavelength/angle, with the idler
/// fixed by energy and transverse momentum. Unreachable kinematics give 0.
pub fn signal_efficiency(
    pump: &PumpConfig,
    crystal: &SpdcCrystal,
    signal_nm: f64,
    signal_angle_deg: f64,
) -> Result<f64> {
    let idler_nm = idler_wavelength(pump.wavelength_nm, signal_nm)?;
    let idler_deg = match idler_angle(crystal, signal_nm, idler_nm, signal_angle_deg) {
        Ok(a) => a,
        Err(Error::UnphysicalAngle(_)) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let dk = phase_mismatch(
        pump,
        crystal,
        signal_nm,
        idler_nm,
        signal_angle_deg,
        idler_deg,
    )?;
    Ok(pm_efficiency(dk, crystal.length_mm))
}

pub fn emission_map(
    pump: &PumpConfig,
    crystal: &SpdcCrystal,
    wavelengths_nm: &[f64],
    angles_deg: &[f64],
) -> Result<EfficiencyMap> {
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    if wavelengths_nm.is_empty() || angles_deg.is_empty() {
        return Err(Error::InvalidArgument("empty emission-map grid".into()));
    }
    if !monotone(wavelengths_nm) || !monotone(angles_deg) {
        return Err(Error::InvalidArgument(
            "emission-map grids must increase".into(),
        ));
    }
    let rows: Result<Vec<Vec<f64>>> = wavelengths_nm
        .par_iter()
        .map(|&l| {
            angles_deg
                .iter()
                .map(|&a| signal_efficiency(pump, crystal, l, a))
                .collect()
        })
        .collect();
    Ok(EfficiencyMap {
        wavelengths_nm: wavelengths_nm.to_vec(),
        angles_deg: angles_deg.to_vec(),
        values: rows?.into_iter().flatten().collect(),
    })
}

/// Inclusive grid `start, start + step, ...` up to `stop` (with a half-step
/// allowance against rounding).
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 0.5).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

/// Region of signal kinematics the sampler draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingWindow {
    pub signal_nm: (f64, f64),
    /// Internal signal angle range, degrees.
    pub angle_deg: (f64, f64),
}

impl SamplingWindow {
    pub fn collinear(signal_nm: (f64, f64)) -> Self {
        Self {
            signal_nm,
            angle_deg: (0.0, 0.0),
        }
    }
}

/// Draws `n` pair events. Crystal index 0 is crystal I, index 1 crystal II.
///
/// Signal kinematics come from rejection sampling of the conversion
/// probability under a unit envelope (the sinc^2 maximum); the idler is
/// then fixed by energy and transverse momentum conservation. Chunks of
/// [`SAMPLE_CHUNK`] events each own a ChaCha stream derived from `seed`, so
/// the output is identical for any worker count.
pub fn sample_pairs(
    n: usize,
    pump: &PumpConfig,
    crystals: &[SpdcCrystal; 2],
    window: &SamplingWindow,
    seed: u64,
) -> Result<Vec<PairEvent>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    pump.validate()?;
    let (l_lo, l_hi) = window.signal_nm;
    let (a_lo, a_hi) = window.angle_deg;
    if !(l_hi >= l_lo && a_hi >= a_lo && l_lo > pump.wavelength_nm) {
        return Err(Error::InvalidArgument(format!(
            "bad sampling window {window:?}"
        )));
    }
    let sigma = pump.waist_um / 2.0;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p_one = pump.crystal_one_probability();
    let chunks = n.div_ceil(SAMPLE_CHUNK);

    let parts: Result<Vec<Vec<PairEvent>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let origin = if rng.gen::<f64>() < p_one {
                    Origin::CrystalI
                } else {
                    Origin::CrystalII
                };
                let crystal = &crystals[match origin {
                    Origin::CrystalI => 0,
                    Origin::CrystalII => 1,
                }];
                let birth_z_mm = rng.gen::<f64>() * crystal.length_mm;
                let transverse_x_um = normal.sample(&mut rng);
                let mut accepted = None;
                for _ in 0..REJECTION_CAP {
                    let l = l_lo + (l_hi - l_lo) * rng.gen::<f64>();
                    let a = a_lo + (a_hi - a_lo) * rng.gen::<f64>();
                    let eff = signal_efficiency(pump, crystal, l, a)?;
                    if rng.gen::<f64>() < eff {
                        accepted = Some((l, a, eff));
                        break;
                    }
                }
                let (signal_nm, signal_angle_deg, efficiency) =
                    accepted.ok_or(Error::RejectionCap(REJECTION_CAP))?;
                let idler_nm = idler_wavelength(pump.wavelength_nm, signal_nm)?;
                let idler_angle_deg = idler_angle(crystal, signal_nm, idler_nm, signal_angle_deg)?;
                out.push(PairEvent {
                    origin,
                    birth_z_mm,
                    transverse_x_um,
                    signal_nm,
                    idler_nm,
                    signal_angle_deg,
                    idler_angle_deg,
                    polarization: origin.pair_polarization(),
                    efficiency,
                });
            }
            Ok(out)
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{AxisPlane, MaterialDb};

    fn bbo_crystal(cut_deg: f64, length: f64) -> SpdcCrystal {
        let bbo = MaterialDb::builtin().get("BBO").unwrap().clone();
        SpdcCrystal::new(
            bbo,
            CrystalOrientation::new(cut_deg, AxisPlane::Vertical).unwrap(),
            length,
        )
        .unwrap()
    }

    fn matched() -> (PumpConfig, SpdcCrystal) {
        let bbo = MaterialDb::builtin().get("BBO").unwrap().clone();
        let theta = phase_matching_angle(405.0, 780.0, 842.4, &bbo).unwrap();
        (PumpConfig::cw(405.0, 100.0), bbo_crystal(theta, 6.0))
    }

    #[test]
    fn efficiency_special_values() {
        assert_eq!(pm_efficiency(0.0, 6.0), 1.0);
        let dk_pi = 2.0 * PI / 6.0;
        assert!(pm_efficiency(dk_pi, 6.0) < 1e-30);
        let dk_half = PI / 6.0;
        assert!((pm_efficiency(dk_half, 6.0) - (2.0 / PI).powi(2)).abs() < 1e-15);
        assert!((pm_efficiency(1e-12, 6.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matched_angle_gives_zero_mismatch() {
        let (pump, crystal) = matched();
        let dk = phase_mismatch(&pump, &crystal, 780.0, 842.4, 0.0, 0.0).unwrap();
        assert!(dk.abs() < 1e-9, "{dk}");
        let theta = crystal.orientation.cut_angle_deg;
        assert!((theta - 28.82).abs() < 0.3, "{theta}");
    }

    #[test]
    fn detuned_signal_has_positive_mismatch() {
        let (pump, crystal) = matched();
        let li = idler_wavelength(405.0, 781.0).unwrap();
        let dk = phase_mismatch(&pump, &crystal, 781.0, li, 0.0, 0.0).unwrap();
        assert!(dk > 0.01, "{dk}");
    }

    #[test]
    fn mismatch_symmetric_under_swap() {
        let (pump, crystal) = matched();
        let a = phase_mismatch(&pump, &crystal, 775.0, 848.4, 0.2, -0.18).unwrap();
        let b = phase_mismatch(&pump, &crystal, 848.4, 775.0, -0.18, 0.2).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unphysical_angles_rejected() {
        let (pump, crystal) = matched();
        assert!(matches!(
            phase_mismatch(&pump, &crystal, 780.0, 842.4, 95.0, 0.0),
            Err(Error::UnphysicalAngle(_))
        ));
    }

    #[test]
    fn swapped_daughters_same_angle() {
        let bbo = MaterialDb::builtin().get("BBO").unwrap().clone();
        let a = phase_matching_angle(405.0, 780.0, 842.4, &bbo).unwrap();
        let b = phase_matching_angle(405.0, 842.4, 780.0, &bbo).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn impossible_matching_errors() {
        let bbo = MaterialDb::builtin().get("BBO").unwrap().clone();
        assert!(matches!(
            phase_matching_angle(405.0, 400.0, 842.4, &bbo),
            Err(Error::NoPhaseMatching(_))
        ));
        // Energy conservation violated.
        assert!(phase_matching_angle(405.0, 780.0, 800.0, &bbo).is_err());
    }

    #[test]
    fn map_values_bounded_and_collinear_cell_is_one() {
        let (pump, crystal) = matched();
        let map = emission_map(&pump, &crystal, &[770.0, 780.0, 790.0], &[-0.1, 0.0, 0.1]).unwrap();
        assert!(map.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((map.get(1, 1) - 1.0).abs() < 1e-12);
        assert!(emission_map(&pump, &crystal, &[], &[0.0]).is_err());
        assert!(emission_map(&pump, &crystal, &[790.0, 780.0], &[0.0]).is_err());
    }

    #[test]
    fn single_event_satisfies_invariants() {
        let (pump, crystal) = matched();
        let crystals = [crystal.clone(), crystal];
        let window = SamplingWindow {
            signal_nm: (770.0, 790.0),
            angle_deg: (-0.5, 0.5),
        };
        let ev = sample_pairs(1, &pump, &crystals, &window, 7).unwrap();
        assert_eq!(ev.len(), 1);
        let e = ev[0];
        assert!(e.birth_z_mm >= 0.0 && e.birth_z_mm <= 6.0);
        let residual = 1.0 / e.signal_nm + 1.0 / e.idler_nm - 1.0 / 405.0;
        assert!(residual.abs() < 1e-15);
        assert_eq!(e.polarization, e.origin.pair_polarization());
        assert!(sample_pairs(0, &pump, &crystals, &window, 7).is_err());
    }

    #[test]
    fn rejection_cap_on_dead_window() {
        // Far from any phase-matched kinematics the acceptance probability vanishes.
        let pump = PumpConfig::cw(405.0, 100.0);
        let crystal = bbo_crystal(45.0, 30.0);
        let crystals = [crystal.clone(), crystal];
        let window = SamplingWindow::collinear((810.0, 810.0));
        assert!(matches!(
            sample_pairs(1, &pump, &crystals, &window, 1),
            Err(Error::RejectionCap(_))
        ));
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid(740.0, 900.0, 0.5);
        assert_eq!(g.len(), 321);
        assert!((g[320] - 900.0).abs() < 1e-9);
    }
}
