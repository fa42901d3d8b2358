//! H-versus-V arrival-time statistics, the two-photon overlap factor, the
//! effective two-qubit density matrix and the fidelity to the Bell state.
//!
//! Every sampled event is traced twice, once as an H pair born in crystal I
//! and once as a V pair born in crystal II, so that the per-photon delays
//! `dt = t_H - t_V` compare histories with identical kinematics.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consts::SPEED_OF_LIGHT_UM_PER_FS;
use crate::error::{Error, Result};
use crate::raytrace::{PairTracer, TimingMode};
use crate::spdc::{Origin, PairEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTiming {
    /// `t_{s,H} - t_{s,V}`, fs.
    pub dt_signal_fs: f64,
    /// `t_{i,H} - t_{i,V}`, fs.
    pub dt_idler_fs: f64,
    pub weight: f64,
    /// Signal and idler angular frequencies (rad/fs), when known.
    #[serde(default)]
    pub frequencies: Option<(f64, f64)>,
}

impl PairTiming {
    pub fn new(dt_signal_fs: f64, dt_idler_fs: f64, weight: f64) -> Result<Self> {
        if !dt_signal_fs.is_finite() || !dt_idler_fs.is_finite() {
            return Err(Error::InvalidArgument("non-finite delay".into()));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::InvalidArgument(format!("event weight {weight}")));
        }
        Ok(Self {
            dt_signal_fs,
            dt_idler_fs,
            weight,
            frequencies: None,
        })
    }

    pub fn with_frequencies(mut self, omega_s: f64, omega_i: f64) -> Self {
        self.frequencies = Some((omega_s, omega_i));
        self
    }

    /// Pair-averaged H-vs-V delay.
    pub fn tau_plus(&self) -> f64 {
        0.5 * (self.dt_signal_fs + self.dt_idler_fs)
    }

    /// Signal-idler asymmetry difference.
    pub fn tau_minus(&self) -> f64 {
        self.dt_signal_fs - self.dt_idler_fs
    }
}

/// Traces `event` under both origin hypotheses and differences the arrival
/// times photon by photon.
pub fn pair_timing(
    event: &PairEvent,
    tracer: &PairTracer,
    mode: TimingMode,
    weight: f64,
) -> Result<PairTiming> {
    let h = tracer.trace_event(event, Origin::CrystalI)?;
    let v = tracer.trace_event(event, Origin::CrystalII)?;
    Ok(PairTiming::new(
        h.signal.time(mode) - v.signal.time(mode),
        h.idler.time(mode) - v.idler.time(mode),
        weight,
    )?
    .with_frequencies(
        angular_frequency(event.signal_nm),
        angular_frequency(event.idler_nm),
    ))
}

/// Angular frequency in rad/fs of light with vacuum wavelength `lambda_nm`.
pub fn angular_frequency(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_UM_PER_FS / (lambda_nm * 1e-3)
}

/// How accepted events are weighted in the mean overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventWeighting {
    /// Unit weight. Events drawn by rejection sampling are already
    /// distributed according to the conversion probability.
    #[default]
    Uniform,
    /// Weight by the phase-matching efficiency of the sampled kinematics.
    Efficiency,
}

/// Timings of all events that survive tracing, in input order, plus the
/// number of events lost to dead rays.
pub fn pair_timings(
    events: &[PairEvent],
    tracer: &PairTracer,
    mode: TimingMode,
    weighting: EventWeighting,
) -> (Vec<PairTiming>, usize) {
    let results: Vec<Option<PairTiming>> = events
        .par_iter()
        .map(|e| {
            let w = match weighting {
                EventWeighting::Uniform => 1.0,
                EventWeighting::Efficiency => e.efficiency,
            };
            pair_timing(e, tracer, mode, w).ok()
        })
        .collect();
    let lost = results.iter().filter(|r| r.is_none()).count();
    (results.into_iter().flatten().collect(), lost)
}

/// Phase carried by the H-V overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseModel {
    /// `w_p (dt_s + dt_i) / 2`: both photons at half the pump frequency.
    #[default]
    Pump,
    /// `w_s dt_s + w_i dt_i` with the event's own frequencies. Equals the
    /// pump model plus `(w_s - w_i)(dt_s - dt_i)/2`.
    Exact,
}

/// Parameters of the Gaussian-envelope overlap model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    /// Pump angular frequency, rad/fs.
    pub omega_p: f64,
    /// Pump coherence time, fs (infinite for CW).
    pub tau_p_fs: f64,
    /// Down-converted pair coherence time, fs.
    pub tau_c_fs: f64,
    #[serde(default)]
    pub phase_model: PhaseModel,
}

/// Overlap of the H and V two-photon amplitudes:
/// `exp(-i w_p S/2) exp(-S^2/(8 tau_p^2)) exp(-D^2/(8 tau_c^2))` with
/// `S = dt_s + dt_i` and `D = dt_s - dt_i`.
pub fn jtpa_overlap(dt_s: f64, dt_i: f64, tau_p: f64, tau_c: f64, omega_p: f64) -> Complex64 {
    let sum = dt_s + dt_i;
    let diff = dt_s - dt_i;
    let pump_env = if tau_p.is_infinite() {
        1.0
    } else {
        (-sum * sum / (8.0 * tau_p * tau_p)).exp()
    };
    let pair_env = (-diff * diff / (8.0 * tau_c * tau_c)).exp();
    Complex64::from_polar(pump_env * pair_env, -0.5 * omega_p * sum)
}

impl PairTiming {
    /// Overlap phase divided by the pump frequency, i.e. the delay the pump
    /// phase term sees. Reduces to tau+ for the pump model.
    pub fn phase_delay(&self, p: &OverlapParams) -> f64 {
        match (p.phase_model, self.frequencies) {
            (PhaseModel::Exact, Some((ws, wi))) => {
                (ws * self.dt_signal_fs + wi * self.dt_idler_fs) / p.omega_p
            }
            _ => self.tau_plus(),
        }
    }

    pub fn overlap(&self, p: &OverlapParams) -> Complex64 {
        let f = jtpa_overlap(
            self.dt_signal_fs,
            self.dt_idler_fs,
            p.tau_p_fs,
            p.tau_c_fs,
            p.omega_p,
        );
        match p.phase_model {
            PhaseModel::Pump => f,
            PhaseModel::Exact => Complex64::from_polar(f.norm(), -p.omega_p * self.phase_delay(p)),
        }
    }
}

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (tree) summation; the result depends only on the input order.
pub fn pairwise_sum<T>(v: &[T]) -> T
where
    T: Copy + Default + std::ops::Add<Output = T>,
{
    if v.len() <= PAIRWISE_BLOCK {
        return v.iter().fold(T::default(), |a, &b| a + b);
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Weighted mean of `values` with deterministic summation.
fn weighted_mean(values: &[Complex64], weights: &[f64]) -> Result<Complex64> {
    let w = pairwise_sum(weights);
    if !(w > 0.0) {
        return Err(Error::TooFewEvents(0));
    }
    let terms: Vec<Complex64> = values.iter().zip(weights).map(|(f, w)| f * w).collect();
    Ok(pairwise_sum(&terms) / w)
}

pub fn mean_overlap(timings: &[PairTiming], params: &OverlapParams) -> Result<Complex64> {
    let f: Vec<Complex64> = timings.par_iter().map(|t| t.overlap(params)).collect();
    let w: Vec<f64> = timings.iter().map(|t| t.weight).collect();
    weighted_mean(&f, &w)
}

/// Monte Carlo noise allowed above `|f| = 1` before it counts as an error.
pub const OVERLAP_CLIP_TOL: f64 = 1e-9;

/// Two-qubit density matrix in the basis HH, HV, VH, VV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub m: [[Complex64; 4]; 4],
}

impl DensityMatrix {
    /// `(|HH><HH| + |VV><VV| + f|HH><VV| + f*|VV><HH|) / 2`. Overlaps that
    /// exceed unit modulus by less than [`OVERLAP_CLIP_TOL`] are clipped.
    pub fn from_overlap(f: Complex64) -> Result<Self> {
        let mag = f.norm();
        let f = if mag > 1.0 {
            if mag - 1.0 > OVERLAP_CLIP_TOL {
                return Err(Error::OverlapOutOfRange(mag));
            }
            eprintln!("warning: mean overlap modulus {mag} clipped to 1");
            f / mag
        } else {
            f
        };
        let z = Complex64::new(0.0, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let mut m = [[z; 4]; 4];
        m[0][0] = half;
        m[3][3] = half;
        m[0][3] = f * 0.5;
        m[3][0] = f.conj() * 0.5;
        Ok(Self { m })
    }

    pub fn trace(&self) -> Complex64 {
        (0..4).map(|i| self.m[i][i]).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..4).all(|i| (0..4).all(|j| (self.m[i][j] - self.m[j][i].conj()).norm() <= tol))
    }

    /// Eigenvalues in ascending order. Only the HH/VV block can be
    /// populated, so the spectrum is that of the 2x2 block plus two zeros.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let a = self.m[0][0].re;
        let d = self.m[3][3].re;
        let b = self.m[0][3].norm();
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let mut ev = [mean - r, 0.0, 0.0, mean + r];
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.eigenvalues()[0] >= -tol
    }
}

/// `<Phi+|rho|Phi+>` with `Phi+ = (|HH> + |VV>)/sqrt(2)`.
pub fn fidelity(rho: &DensityMatrix) -> f64 {
    let m = &rho.m;
    (0.5 * (m[0][0] + m[3][3] + m[0][3] + m[3][0]).re).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(rename = "sigma_F")]
    pub sigma: f64,
    pub mean_f_re: f64,
    pub mean_f_im: f64,
    pub n_accepted: usize,
    pub loss_fraction: f64,
}

/// Point estimate from the full event list and bootstrap standard deviation
/// over `resamples` resamples with replacement. Resample `r` draws from its
/// own ChaCha stream, so the result is independent of the worker count.
pub fn bootstrap_fidelity(
    timings: &[PairTiming],
    params: &OverlapParams,
    resamples: usize,
    seed: u64,
) -> Result<FidelityEstimate> {
    let n = timings.len();
    if n < 2 {
        return Err(Error::TooFewEvents(n));
    }
    if resamples < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 bootstrap resamples required, got {resamples}"
        )));
    }
    let f: Vec<Complex64> = timings.par_iter().map(|t| t.overlap(params)).collect();
    let w: Vec<f64> = timings.iter().map(|t| t.weight).collect();
    let mean = weighted_mean(&f, &w)?;
    let point = fidelity(&DensityMatrix::from_overlap(mean)?);

    let fs: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut fr = Vec::with_capacity(n);
            let mut wr = Vec::with_capacity(n);
            for _ in 0..n {
                let k = rng.gen_range(0..n);
                fr.push(f[k]);
                wr.push(w[k]);
            }
            let m = weighted_mean(&fr, &wr)?;
            Ok(fidelity(&DensityMatrix::from_overlap(m)?))
        })
        .collect::<Result<_>>()?;
    let mu = pairwise_sum(&fs) / resamples as f64;
    let dev: Vec<f64> = fs.iter().map(|x| (x - mu) * (x - mu)).collect();
    let sigma = (pairwise_sum(&dev) / (resamples - 1) as f64).sqrt();
    Ok(FidelityEstimate {
        fidelity: point,
        sigma,
        mean_f_re: mean.re,
        mean_f_im: mean.im,
        n_accepted: n,
        loss_fraction: 0.0,
    })
}

/// Fixed-width histogram with bin edges on integer multiples of the width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Index `k` of the first bin `[k w, (k+1) w)`.
    pub first_bin: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let k = self.first_bin + i as i64;
            (
                k as f64 * self.bin_width,
                (k + 1) as f64 * self.bin_width,
                c,
            )
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_left_fs,bin_right_fs,count")?;
        for (l, r, c) in self.bins() {
            writeln!(
                out,
                "{},{},{}",
                crate::spdc::fmt17(l),
                crate::spdc::fmt17(r),
                c
            )?;
        }
        Ok(())
    }
}

pub fn tau_histogram(samples: &[f64], bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidArgument(format!("bin width {bin_width}")));
    }
    let idx: Vec<i64> = samples
        .iter()
        .map(|s| (s / bin_width).floor() as i64)
        .collect();
    let (Some(&lo), Some(&hi)) = (idx.iter().min(), idx.iter().max()) else {
        return Ok(Histogram {
            bin_width,
            first_bin: 0,
            counts: vec![],
        });
    };
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for k in idx {
        counts[(k - lo) as usize] += 1;
    }
    Ok(Histogram {
        bin_width,
        first_bin: lo,
        counts,
    })
}

/// tau+ and tau- samples of all accepted events with their histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct TauStatistics {
    pub tau_plus_fs: Vec<f64>,
    pub tau_minus_fs: Vec<f64>,
    pub tau_plus_hist: Histogram,
    pub tau_minus_hist: Histogram,
}

impl TauStatistics {
    pub fn from_timings(timings: &[PairTiming], bin_width_fs: f64) -> Result<Self> {
        let tau_plus_fs: Vec<f64> = timings.iter().map(PairTiming::tau_plus).collect();
        let tau_minus_fs: Vec<f64> = timings.iter().map(PairTiming::tau_minus).collect();
        Ok(Self {
            tau_plus_hist: tau_histogram(&tau_plus_fs, bin_width_fs)?,
            tau_minus_hist: tau_histogram(&tau_minus_fs, bin_width_fs)?,
            tau_plus_fs,
            tau_minus_fs,
        })
    }
}
