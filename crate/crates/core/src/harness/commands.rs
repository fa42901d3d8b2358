use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::entanglement::{
    bootstrap_fidelity, pair_timings, FidelityEstimate, Histogram, TauStatistics,
};
use crate::error::{Error, Result};
use crate::raytrace::TimingMode;
use crate::spdc::{emission_map, fmt17, grid, phase_matching_angle, sample_pairs, EfficiencyMap};

use super::{LengthSpec, PreCompensator, Scenario};

/// Largest ray count accepted by the trace dump.
pub const TRACE_DUMP_MAX: usize = 10_000;

/// Loss fraction above which fidelity statistics are flagged unreliable.
pub const LOSS_WARNING: f64 = 0.5;

/// Flat JSON object writer with fixed float formatting.
struct JsonOut {
    fields: Vec<(String, String)>,
}

impl JsonOut {
    fn new() -> Self {
        Self { fields: Vec::new() }
    }

    fn num(mut self, key: &str, v: f64) -> Self {
        let text = if v.is_finite() {
            fmt17(v)
        } else {
            "null".into()
        };
        self.fields.push((key.into(), text));
        self
    }

    fn int(mut self, key: &str, v: u64) -> Self {
        self.fields.push((key.into(), v.to_string()));
        self
    }

    fn boolean(mut self, key: &str, v: bool) -> Self {
        self.fields.push((key.into(), v.to_string()));
        self
    }

    fn text(mut self, key: &str, v: &str) -> Self {
        let quoted = serde_json::to_string(v).expect("string serialises");
        self.fields.push((key.into(), quoted));
        self
    }

    fn render(&self) -> String {
        let body: Vec<String> = self
            .fields
            .iter()
            .map(|(k, v)| format!("  \"{k}\": {v}"))
            .collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }

    fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let io = |e| Error::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn run_pm_angle(scn: &Scenario) -> Result<f64> {
    let c = &scn.config;
    phase_matching_angle(
        c.pump.wavelength_nm,
        c.pairs.signal_nm,
        scn.idler_nm(),
        scn.db.get(&c.crystals.material)?,
    )
}

pub fn cmd_pm_angle(scn: &Scenario, out: &Path) -> Result<PathBuf> {
    let theta = run_pm_angle(scn)?;
    let c = &scn.config;
    prepare_dir(out)?;
    let path = out.join("pm_angle.json");
    JsonOut::new()
        .num("theta_deg", theta)
        .num("pump_nm", c.pump.wavelength_nm)
        .num("signal_nm", c.pairs.signal_nm)
        .num("idler_nm", scn.idler_nm())
        .text("material", &c.crystals.material)
        .text("config_hash", &c.config_hash())
        .write(&path)?;
    println!("phase-matching angle: {theta:.4} deg");
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct EmissionMapRun {
    /// Map for crystal I (both crystals share the cut and length).
    pub map: EfficiencyMap,
    pub captured_external: f64,
    pub captured_internal: f64,
}

pub fn run_emission_map(scn: &Scenario) -> Result<EmissionMapRun> {
    let m = &scn.config.emission_map;
    let [crystal, _] = scn.spdc_crystals()?;
    let lambdas = grid(m.wavelength_nm[0], m.wavelength_nm[1], m.wavelength_nm[2]);
    let angles = grid(m.angle_deg[0], m.angle_deg[1], m.angle_deg[2]);
    let map = emission_map(&scn.config.pump, &crystal, &lambdas, &angles)?;
    let bands: Vec<(f64, f64)> = m.bands_nm.iter().map(|b| (b[0], b[1])).collect();
    let captured_external = map.captured_fraction(&crystal, &bands, m.max_external_deg)?;
    // Same fraction with the limit read as an internal angle.
    let mut total = 0.0;
    let mut inside = 0.0;
    let na = map.angles_deg.len();
    for (i, &l) in map.wavelengths_nm.iter().enumerate() {
        if !bands.iter().any(|&(lo, hi)| l >= lo && l <= hi) {
            continue;
        }
        for (j, &a) in map.angles_deg.iter().enumerate() {
            let v = map.values[i * na + j];
            total += v;
            if a.abs() <= m.max_external_deg {
                inside += v;
            }
        }
    }
    Ok(EmissionMapRun {
        map,
        captured_external,
        captured_internal: inside / total,
    })
}

pub fn cmd_emission_map(scn: &Scenario, out: &Path) -> Result<PathBuf> {
    let run = run_emission_map(scn)?;
    prepare_dir(out)?;
    let path = out.join("emission_map.csv");
    write_with(&path, |w| run.map.write_csv(w))?;
    let m = &scn.config.emission_map;
    JsonOut::new()
        .num("max_efficiency", run.map.max())
        .num("max_external_deg", m.max_external_deg)
        .num("captured_fraction_external", run.captured_external)
        .num("captured_fraction_internal", run.captured_internal)
        .text("config_hash", &scn.config.config_hash())
        .write(&out.join("emission_map.json"))?;
    println!(
        "emission map: {} cells, captured fraction within {} deg external: {:.4}",
        run.map.values.len(),
        m.max_external_deg,
        run.captured_external
    );
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub lengths_mm: Vec<f64>,
    pub tau_minus_fs: Vec<f64>,
    /// Monte Carlo fidelity per length, when requested.
    pub fidelity: Option<Vec<FidelityEstimate>>,
    pub optimum_mm: f64,
    pub tau_c_fs: f64,
    /// Contiguous interval around the optimum where `|tau-| < tau_c`.
    pub band_mm: (f64, f64),
    /// The band reaches the edge of the grid.
    pub band_truncated: bool,
}

impl SweepResult {
    pub fn band_half_width_mm(&self) -> f64 {
        0.5 * (self.band_mm.1 - self.band_mm.0)
    }
}

/// On-axis tau- of the nondegenerate centre pair versus post-compensator
/// length, from group delays. Both hypotheses see the same pump path ahead
/// of their birth crystals up to the pre-compensator, which shifts both
/// photons equally and so drops out of tau-.
pub fn sweep_tau_minus(scn: &Scenario, lengths_mm: &[f64]) -> Result<Vec<f64>> {
    if scn.config.post_compensator.is_none() {
        return Err(Error::Config(
            "compensator sweep needs a post-compensator".into(),
        ));
    }
    lengths_mm
        .iter()
        .map(|&l| Ok(scn.axial_taus(None, Some(l), TimingMode::Group)?.1))
        .collect()
}

pub fn run_compensator_sweep(scn: &Scenario, with_fidelity: bool) -> Result<SweepResult> {
    let s = &scn.config.sweep;
    let lengths_mm = grid(s.start_mm, s.stop_mm, s.step_mm);
    if lengths_mm.is_empty() {
        return Err(Error::Config("empty compensator sweep grid".into()));
    }
    let tau_minus_fs = sweep_tau_minus(scn, &lengths_mm)?;
    let tau_c_fs = scn.tau_c_fs()?;
    let (opt, _) = tau_minus_fs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, t)| {
            if t.abs() < acc.1 {
                (i, t.abs())
            } else {
                acc
            }
        });
    let inside = |i: usize| tau_minus_fs[i].abs() < tau_c_fs;
    let mut lo = opt;
    while lo > 0 && inside(lo - 1) {
        lo -= 1;
    }
    let mut hi = opt;
    while hi + 1 < lengths_mm.len() && inside(hi + 1) {
        hi += 1;
    }
    let band_truncated = inside(opt) && (lo == 0 || hi + 1 == lengths_mm.len());
    let fidelity = if with_fidelity {
        let mut out = Vec::with_capacity(lengths_mm.len());
        for &l in &lengths_mm {
            let mut cfg = scn.config.clone();
            if let Some(p) = cfg.post_compensator.as_mut() {
                p.length_mm = LengthSpec::Fixed(l);
            }
            let sub = Scenario::new(cfg)?;
            out.push(run_fidelity(&sub)?.estimate);
        }
        Some(out)
    } else {
        None
    };
    Ok(SweepResult {
        optimum_mm: lengths_mm[opt],
        band_mm: (lengths_mm[lo], lengths_mm[hi]),
        band_truncated,
        lengths_mm,
        tau_minus_fs,
        fidelity,
        tau_c_fs,
    })
}

pub fn cmd_compensator_sweep(scn: &Scenario, out: &Path, with_fidelity: bool) -> Result<PathBuf> {
    let r = run_compensator_sweep(scn, with_fidelity)?;
    prepare_dir(out)?;
    let path = out.join("compensator_sweep.csv");
    write_with(&path, |w| {
        match &r.fidelity {
            Some(_) => writeln!(w, "length_mm,tau_minus_fs,F,sigma_F")?,
            None => writeln!(w, "length_mm,tau_minus_fs")?,
        }
        for (i, (l, t)) in r.lengths_mm.iter().zip(&r.tau_minus_fs).enumerate() {
            match &r.fidelity {
                Some(f) => writeln!(
                    w,
                    "{},{},{},{}",
                    fmt17(*l),
                    fmt17(*t),
                    fmt17(f[i].fidelity),
                    fmt17(f[i].sigma)
                )?,
                None => writeln!(w, "{},{}", fmt17(*l), fmt17(*t))?,
            }
        }
        Ok(())
    })?;
    JsonOut::new()
        .num("optimum_mm", r.optimum_mm)
        .num("tau_c_fs", r.tau_c_fs)
        .num("band_lo_mm", r.band_mm.0)
        .num("band_hi_mm", r.band_mm.1)
        .num("band_half_width_mm", r.band_half_width_mm())
        .boolean("band_truncated", r.band_truncated)
        .text("config_hash", &scn.config.config_hash())
        .write(&out.join("compensator_sweep.json"))?;
    println!(
        "post-compensator optimum {:.4} mm; |tau-| < {:.1} fs for {:.4}..{:.4} mm{}",
        r.optimum_mm,
        r.tau_c_fs,
        r.band_mm.0,
        r.band_mm.1,
        if r.band_truncated {
            " (band reaches the grid edge)"
        } else {
            ""
        }
    );
    Ok(path)
}

/// Result of a Monte Carlo fidelity run.
#[derive(Debug, Clone)]
pub struct FidelityRun {
    pub estimate: FidelityEstimate,
    pub tau: TauStatistics,
    pub pre_compensator: Option<PreCompensator>,
    pub n_sampled: usize,
}

pub fn run_fidelity(scn: &Scenario) -> Result<FidelityRun> {
    let c = &scn.config;
    let tracer = scn.tracer(c.timing)?;
    let events = sample_pairs(
        c.rays,
        &c.pump,
        &scn.spdc_crystals()?,
        &scn.sampling_window(),
        c.seed,
    )?;
    let (timings, lost) = pair_timings(&events, &tracer, c.timing, c.weighting);
    if timings.len() < 2 {
        return Err(Error::TooFewEvents(timings.len()));
    }
    let mut estimate = bootstrap_fidelity(&timings, &scn.overlap_params()?, c.resamples, c.seed)?;
    estimate.loss_fraction = lost as f64 / events.len() as f64;
    Ok(FidelityRun {
        estimate,
        tau: TauStatistics::from_timings(&timings, c.histogram_bin_fs)?,
        pre_compensator: scn.pre_compensator(c.timing)?,
        n_sampled: events.len(),
    })
}

fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    write_with(path, |w| h.write_csv(w))
}

pub fn cmd_fidelity(scn: &Scenario, out: &Path) -> Result<PathBuf> {
    let r = run_fidelity(scn)?;
    let e = &r.estimate;
    if e.loss_fraction > LOSS_WARNING {
        eprintln!(
            "WARNING: {:.1}% of sampled pairs were lost in tracing; fidelity statistics are unreliable",
            100.0 * e.loss_fraction
        );
    }
    prepare_dir(out)?;
    let path = out.join("fidelity.json");
    JsonOut::new()
        .num("F", e.fidelity)
        .num("sigma_F", e.sigma)
        .num("mean_f_re", e.mean_f_re)
        .num("mean_f_im", e.mean_f_im)
        .int("n_accepted", e.n_accepted as u64)
        .num("loss_fraction", e.loss_fraction)
        .int("seed", scn.config.seed)
        .text("config_hash", &scn.config.config_hash())
        .write(&path)?;
    write_histogram(&out.join("tau_plus_hist.csv"), &r.tau.tau_plus_hist)?;
    write_histogram(&out.join("tau_minus_hist.csv"), &r.tau.tau_minus_hist)?;
    println!(
        "fidelity {:.4} +/- {:.4} from {} of {} pairs",
        e.fidelity, e.sigma, e.n_accepted, r.n_sampled
    );
    Ok(path)
}

/// Writes one polyline per sampled event: the signal photon traced under
/// its own origin from the birth point to the collection plane.
pub fn cmd_trace_dump(scn: &Scenario, out: &Path) -> Result<PathBuf> {
    let c = &scn.config;
    if c.rays > TRACE_DUMP_MAX {
        return Err(Error::Config(format!(
            "trace dump is limited to {TRACE_DUMP_MAX} rays, got {}",
            c.rays
        )));
    }
    let tracer = scn.tracer(c.timing)?;
    let events = sample_pairs(
        c.rays,
        &c.pump,
        &scn.spdc_crystals()?,
        &scn.sampling_window(),
        c.seed,
    )?;
    prepare_dir(out)?;
    let path = out.join("trace_dump.csv");
    let mut dead = 0usize;
    write_with(&path, |w| {
        writeln!(w, "ray,origin,vertex,z_mm,x_mm,status")?;
        for (k, e) in events.iter().enumerate() {
            let ray = tracer.event_ray(e, true);
            let status = match ray.death {
                None => "collected".to_string(),
                Some(d) => {
                    dead += 1;
                    format!("{d:?}")
                }
            };
            for (v, p) in ray.path.iter().flatten().enumerate() {
                writeln!(
                    w,
                    "{k},{:?},{v},{},{},{status}",
                    e.origin,
                    fmt17(p.z),
                    fmt17(p.x)
                )?;
            }
        }
        Ok(())
    })?;
    println!("traced {} rays, {} dead", events.len(), dead);
    Ok(path)
}
