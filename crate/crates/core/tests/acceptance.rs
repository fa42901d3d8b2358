//! Acceptance report: one PASS/FAIL line per criterion with the measured
//! values, the pinned tolerances and the wall-clock runtime.
//!
//! The target exits 0 so that a failing criterion is reported rather than
//! aborting the test run. Set `ACCEPTANCE_STRICT=1` to exit non-zero when any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spdc_fidelity::dispersion::{Branch, MaterialDb};
use spdc_fidelity::entanglement::{fidelity, DensityMatrix};
use spdc_fidelity::harness::{
    run_compensator_sweep, run_emission_map, run_fidelity, run_pm_angle, Scenario, ScenarioConfig,
    SweepSettings,
};
use spdc_fidelity::raytrace::{reflect, refract, Vec2};
use spdc_fidelity::Error;

// Criterion 1
const PM_ANGLE_DEG: f64 = 28.82;
const PM_ANGLE_TOL_DEG: f64 = 0.3;
const PM_RUNTIME: Duration = Duration::from_secs(1);
// Criterion 2
const TAU_C_RANGE_FS: (f64, f64) = (200.0, 245.0);
const TAU_C_RUNTIME: Duration = Duration::from_secs(1);
// Criterion 3
const OPTIMUM_MM: f64 = 3.12;
const OPTIMUM_TOL_MM: f64 = 0.15;
const BAND_HALF_WIDTH_MM: f64 = 0.050;
const BAND_TOL_MM: f64 = 0.020;
const SWEEP_RUNTIME: Duration = Duration::from_secs(10);
/// Grid wide enough to contain the |tau-| < tau_c band on the upper side.
const WIDE_SWEEP: (f64, f64, f64) = (0.0, 25.0, 0.005);
// Criterion 4
const CAPTURE_MIN: f64 = 0.9;
/// Rows probed for the branch structure: outside the signal, outside the
/// idler, and the degenerate wavelength between them.
const BRANCH_ROWS_NM: [f64; 3] = [760.0, 870.0, 810.0];
const MAP_RUNTIME: Duration = Duration::from_secs(30);
// Criterion 5
const LENS_RAYS: usize = 100_000;
const LENS_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const ASPHERE_BAND: (f64, f64) = (0.93, 1.0);
const DOUBLET_BAND: (f64, f64) = (0.78, 0.95);
const LENS_RUNTIME: Duration = Duration::from_secs(300);
// Criterion 6
const SNELL_CASES: usize = 10_000;
const SNELL_TOL: f64 = 1e-12;
const GROUP_INDEX_REL_TOL: f64 = 1e-8;
const PROPERTY_RUNTIME: Duration = Duration::from_secs(60);
// Criterion 7
const WORKERS: [&str; 3] = ["1", "2", "8"];
const DETERMINISM_RAYS: &str = "20000";

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String, elapsed: Duration) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} [{id}] {name}: {detail}; runtime {:.2} s",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn default_scenario() -> Scenario {
    Scenario::new(ScenarioConfig::default_scenario()).expect("bundled scenario")
}

fn pm_angle(r: &mut Report) {
    let t = Instant::now();
    let theta = run_pm_angle(&default_scenario()).expect("pm angle");
    let e = t.elapsed();
    let ok = (theta - PM_ANGLE_DEG).abs() <= PM_ANGLE_TOL_DEG && e < PM_RUNTIME;
    r.line(
        1,
        "phase-matching angle",
        ok,
        format!(
            "{theta:.4} deg, expected {PM_ANGLE_DEG} +/- {PM_ANGLE_TOL_DEG} deg in < {} s",
            PM_RUNTIME.as_secs()
        ),
        e,
    );
}

fn coherence(r: &mut Report) {
    let t = Instant::now();
    let tau = default_scenario().tau_c_fs().expect("tau_c");
    let e = t.elapsed();
    let ok = tau >= TAU_C_RANGE_FS.0 && tau <= TAU_C_RANGE_FS.1 && e < TAU_C_RUNTIME;
    r.line(
        2,
        "coherence time",
        ok,
        format!(
            "{tau:.1} fs for 10 nm at 842.4 nm, expected within [{}, {}] fs",
            TAU_C_RANGE_FS.0, TAU_C_RANGE_FS.1
        ),
        e,
    );
}

fn sweep(r: &mut Report) {
    let t = Instant::now();
    let scn = default_scenario();
    let grid = run_compensator_sweep(&scn, false).expect("sweep");
    let mut wide_cfg = scn.config.clone();
    wide_cfg.sweep = SweepSettings {
        start_mm: WIDE_SWEEP.0,
        stop_mm: WIDE_SWEEP.1,
        step_mm: WIDE_SWEEP.2,
    };
    let wide =
        run_compensator_sweep(&Scenario::new(wide_cfg).expect("scenario"), false).expect("sweep");
    let e = t.elapsed();
    // The lower edge may be cut off at zero length; the upper side is the
    // clean measurement of the half-width.
    let half = wide.band_mm.1 - wide.optimum_mm;
    let opt_ok = (grid.optimum_mm - OPTIMUM_MM).abs() <= OPTIMUM_TOL_MM;
    let band_ok = (half - BAND_HALF_WIDTH_MM).abs() <= BAND_TOL_MM && wide.band_mm.1 < WIDE_SWEEP.1;
    r.line(
        3,
        "compensator sweep",
        opt_ok && band_ok && e < SWEEP_RUNTIME,
        format!(
            "optimum {:.4} mm (expected {OPTIMUM_MM} +/- {OPTIMUM_TOL_MM} mm: {}); |tau-| < {:.1} fs band half-width {:.4} mm \
             (band {:.3}..{:.3} mm, expected {BAND_HALF_WIDTH_MM} +/- {BAND_TOL_MM} mm: {})",
            grid.optimum_mm,
            if opt_ok { "ok" } else { "off" },
            wide.tau_c_fs,
            half,
            wide.band_mm.0,
            wide.band_mm.1,
            if band_ok { "ok" } else { "off" },
        ),
        e,
    );
}

/// Angle of the symmetric off-axis maxima of one wavelength row, if the
/// row peaks away from the axis with a dip on axis.
fn off_axis_peak(map: &spdc_fidelity::spdc::EfficiencyMap, lambda_nm: f64) -> Option<f64> {
    let i = map
        .wavelengths_nm
        .iter()
        .position(|&l| (l - lambda_nm).abs() < 1e-9)?;
    let na = map.angles_deg.len();
    let row: Vec<f64> = (0..na).map(|j| map.get(i, j)).collect();
    let centre = map.angles_deg.iter().position(|a| a.abs() < 1e-9)?;
    let (jl, vl) = row[..centre]
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |a, (j, &v)| if v > a.1 { (j, v) } else { a });
    let (jr, vr) = row[centre + 1..]
        .iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |a, (j, &v)| if v > a.1 { (j + centre + 1, v) } else { a },
        );
    let (al, ar) = (map.angles_deg[jl], map.angles_deg[jr]);
    // The grid is symmetric only to rounding, so allow half a step.
    let step = map.angles_deg[1] - map.angles_deg[0];
    let symmetric = (al + ar).abs() < 0.5 * step && (vl - vr).abs() <= 1e-3 * vl;
    (symmetric && vl > 0.5 && row[centre] < 0.5 * vl).then_some(ar)
}

/// Collinear efficiency of a wavelength row.
fn on_axis(map: &spdc_fidelity::spdc::EfficiencyMap, lambda_nm: f64) -> f64 {
    let i = map
        .wavelengths_nm
        .iter()
        .position(|&l| (l - lambda_nm).abs() < 1e-9)
        .unwrap();
    let j = map.angles_deg.iter().position(|a| a.abs() < 1e-9).unwrap();
    map.get(i, j)
}

fn emission(r: &mut Report) {
    let t = Instant::now();
    let run = run_emission_map(&default_scenario()).expect("emission map");
    let e = t.elapsed();
    // One branch opens on the short-wavelength side of the signal and one on
    // the long-wavelength side of the idler, with a collinear gap between.
    let signal_side = off_axis_peak(&run.map, BRANCH_ROWS_NM[0]);
    let idler_side = off_axis_peak(&run.map, BRANCH_ROWS_NM[1]);
    let gap = on_axis(&run.map, BRANCH_ROWS_NM[2]);
    let branches = signal_side.is_some() && idler_side.is_some() && gap < 0.5;
    let ok = branches && run.captured_external >= CAPTURE_MIN && e < MAP_RUNTIME;
    r.line(
        4,
        "emission map",
        ok,
        format!(
            "two-branch structure {} ({} nm peaks at +/-{:.3} deg, {} nm at +/-{:.3} deg internal, collinear {} nm {gap:.3}); \
             captured fraction within 0.36 deg external {:.4} (internal reading {:.4}), expected >= {CAPTURE_MIN}",
            if branches { "present" } else { "absent" },
            BRANCH_ROWS_NM[0],
            signal_side.unwrap_or(f64::NAN),
            BRANCH_ROWS_NM[1],
            idler_side.unwrap_or(f64::NAN),
            BRANCH_ROWS_NM[2],
            run.captured_external,
            run.captured_internal,
        ),
        e,
    );
}

fn lens_fidelity(lens: &str, seed: u64) -> f64 {
    let mut c = ScenarioConfig::default_scenario();
    c.lens.prescription = lens.into();
    c.rays = LENS_RAYS;
    c.seed = seed;
    run_fidelity(&Scenario::new(c).expect("scenario"))
        .expect("fidelity")
        .estimate
        .fidelity
}

fn lenses(r: &mut Report) {
    let t = Instant::now();
    let mut rows = Vec::new();
    for &seed in &LENS_SEEDS {
        rows.push((
            seed,
            lens_fidelity("asphere", seed),
            lens_fidelity("doublet", seed),
        ));
    }
    let e = t.elapsed();
    let in_band = |v: f64, b: (f64, f64)| v >= b.0 && v <= b.1;
    let (s0, a0, d0) = rows[0];
    let ordered = rows.iter().filter(|(_, a, d)| a > d).count();
    let ok = in_band(a0, ASPHERE_BAND)
        && in_band(d0, DOUBLET_BAND)
        && ordered == rows.len()
        && e < LENS_RUNTIME;
    let range = |k: usize| {
        let v: Vec<f64> = rows
            .iter()
            .map(|row| if k == 0 { row.1 } else { row.2 })
            .collect();
        (
            v.iter().copied().fold(f64::MAX, f64::min),
            v.iter().copied().fold(f64::MIN, f64::max),
        )
    };
    let (amin, amax) = range(0);
    let (dmin, dmax) = range(1);
    r.line(
        5,
        "lens comparison",
        ok,
        format!(
            "seed {s0}: F_asphere {a0:.4} (expected [{}, {}]), F_doublet {d0:.4} (expected [{}, {}]); \
             over {} seeds F_asphere {amin:.4}..{amax:.4}, F_doublet {dmin:.4}..{dmax:.4}, asphere > doublet in {ordered}/{}",
            ASPHERE_BAND.0,
            ASPHERE_BAND.1,
            DOUBLET_BAND.0,
            DOUBLET_BAND.1,
            rows.len(),
            rows.len(),
        ),
        e,
    );
}

fn properties(r: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failed: Vec<&str> = Vec::new();

    let mut ok = true;
    for _ in 0..SNELL_CASES {
        let v = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let n = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        if n.norm() < 1e-3 {
            continue;
        }
        let once = reflect(v, n).unwrap();
        let twice = reflect(once, n).unwrap();
        ok &= (twice - v).norm() <= 1e-12 * (1.0 + v.norm())
            && (once.norm() - v.norm()).abs() <= 1e-12 * (1.0 + v.norm());
    }
    if !ok {
        failed.push("reflect");
    }

    let (mut snell_ok, mut rev_ok, mut worst) = (true, true, 0.0_f64);
    let mut done = 0;
    while done < SNELL_CASES {
        let (n1, n2) = (rng.gen_range(1.0..2.5), rng.gen_range(1.0..2.5));
        let tilt: f64 = rng.gen_range(-3.1..3.1);
        let theta: f64 = rng.gen_range(-1.55..1.55);
        let normal = Vec2::new(tilt.cos(), tilt.sin());
        let a = Vec2::new((tilt + theta).cos(), (tilt + theta).sin());
        match refract(a, normal, n2 / n1) {
            Ok(b) => {
                let sin = |d: Vec2| d.z * normal.x - d.x * normal.z;
                let res = (n1 * sin(a) - n2 * sin(b)).abs();
                worst = worst.max(res);
                snell_ok &= res < SNELL_TOL;
                let back = refract(-b, normal, n1 / n2).unwrap();
                rev_ok &= (back + a).norm() < 1e-12;
                done += 1;
            }
            Err(Error::TotalInternalReflection) => {
                snell_ok &= n1 * theta.sin().abs() > n2 * (1.0 - 1e-12)
            }
            Err(_) => snell_ok = false,
        }
    }
    if !snell_ok {
        failed.push("snell");
    }
    if !rev_ok {
        failed.push("reversibility");
    }

    let u: f64 = 1.0 / 1.5;
    let normal = Vec2::new(-1.0, 0.0);
    let at = refract(Vec2::new((1.0 - u * u).sqrt(), u), normal, u);
    let over = u * (1.0 + 1e-9);
    let beyond = refract(Vec2::new((1.0 - over * over).sqrt(), over), normal, u);
    if !(at.is_ok() && matches!(beyond, Err(Error::TotalInternalReflection))) {
        failed.push("tir");
    }

    let db = MaterialDb::builtin();
    let h = 1e-5;
    let mut gi_worst = 0.0_f64;
    for m in db.iter() {
        let branches: &[Branch] = if m.is_uniaxial() {
            &[Branch::Ordinary, Branch::Extraordinary]
        } else {
            &[Branch::Ordinary]
        };
        for &b in branches {
            for l in [0.45, 0.6, 0.81, 1.0] {
                let n = |x: f64| m.refractive_index(b, x).unwrap();
                let fd = n(l) - l * (n(l + h) - n(l - h)) / (2.0 * h);
                gi_worst = gi_worst.max(((m.group_index(b, l).unwrap() - fd) / fd).abs());
            }
        }
    }
    if gi_worst >= GROUP_INDEX_REL_TOL {
        failed.push("group index");
    }

    let mut rho_ok = true;
    for _ in 0..1000 {
        let f = Complex64::from_polar(rng.gen_range(0.0..=1.0), rng.gen_range(-4.0..4.0));
        let rho = DensityMatrix::from_overlap(f).unwrap();
        rho_ok &= (rho.trace() - 1.0).norm() < 1e-15
            && rho.is_hermitian(0.0)
            && rho.is_positive_semidefinite(1e-15);
    }
    if !rho_ok {
        failed.push("density matrix");
    }
    let f1 = fidelity(&DensityMatrix::from_overlap(Complex64::new(1.0, 0.0)).unwrap());
    let f0 = fidelity(&DensityMatrix::from_overlap(Complex64::new(0.0, 0.0)).unwrap());
    if f1 != 1.0 || f0 != 0.5 {
        failed.push("fidelity limits");
    }

    let small = |f: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = ScenarioConfig::default_scenario();
        c.rays = 4000;
        c.lens.prescription = "none".into();
        f(&mut c);
        run_fidelity(&Scenario::new(c).unwrap())
            .unwrap()
            .estimate
            .fidelity
    };
    let null = small(&|c| {
        c.crystals.length_mm = 0.0;
        c.pre_compensator = None;
        c.post_compensator = None;
    });
    if (null - 1.0).abs() > 1e-12 {
        failed.push("null test");
    }
    let ladder: Vec<f64> = [10.0, 50.0, 100.0, 200.0, 400.0]
        .iter()
        .map(|&w| {
            small(&|c| {
                c.linewidth_nm = w;
                c.post_compensator = None;
            })
        })
        .collect();
    if !(ladder.windows(2).all(|w| w[1] < w[0]) && (ladder[4] - 0.5).abs() < 0.02) {
        failed.push("decoherence ladder");
    }
    let e = t.elapsed();
    r.line(
        6,
        "property suites",
        failed.is_empty() && e < PROPERTY_RUNTIME,
        format!(
            "{} failing ({}); worst Snell residual {worst:.1e} (< {SNELL_TOL:e}), worst group-index error {gi_worst:.1e} \
             (< {GROUP_INDEX_REL_TOL:e}), null F {null:.12}, ladder F {}",
            failed.len(),
            if failed.is_empty() { "none".to_string() } else { failed.join(", ") },
            ladder.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(" > "),
        ),
        e,
    );
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn determinism(r: &mut Report) {
    let t = Instant::now();
    let tmp = tempfile::tempdir().expect("temp dir");
    let commands: [&[&str]; 5] = [
        &["pm-angle"],
        &["emission-map"],
        &["compensator-sweep"],
        &["fidelity", "--rays", DETERMINISM_RAYS, "--seed", "11"],
        &["trace-dump", "--rays", "200"],
    ];
    let mut differing = Vec::new();
    for (k, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for w in WORKERS {
            let dir = tmp.path().join(format!("{k}-{w}"));
            let status = Command::new(env!("CARGO_BIN_EXE_spdc-fidelity"))
                .args(cmd.iter().copied())
                .args(["--workers", w, "--out", dir.to_str().unwrap()])
                .output()
                .expect("binary runs");
            outputs.push(status.status.success().then(|| read_dir(&dir)));
        }
        if outputs[0].is_none() || outputs.iter().any(|o| o != &outputs[0]) {
            differing.push(cmd[0]);
        }
    }
    let e = t.elapsed();
    r.line(
        7,
        "determinism",
        differing.is_empty(),
        format!(
            "{} commands byte-identical across {} workers{}",
            commands.len() - differing.len(),
            WORKERS.join("/"),
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {}", differing.join(", "))
            }
        ),
        e,
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    // Criterion runtimes are single-core figures.
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(|| {
            pm_angle(&mut r);
            coherence(&mut r);
            sweep(&mut r);
            emission(&mut r);
            lenses(&mut r);
            properties(&mut r);
        });
    determinism(&mut r);
    println!("acceptance: {} of 7 criteria failed", r.failures);
    if r.failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
