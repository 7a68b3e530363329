//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64 as C64;
use tempfile::TempDir;

use bohmlab::bohm::{decompose, q_form_agreement, residuals, DecomposeOptions};
use bohmlab::complexified::{
    circulation, epsilon_dot_check, epsilon_radius, gradient_square_identity, reverse_velocity_in_units,
    taylor_probe_b1, taylor_probe_b2, universal_constants, Direction, RectLoop, ATOMIC_TIME, BOHR_RADIUS,
};
use bohmlab::config::{parse_config, ExperimentConfig};
use bohmlab::constants::{PhysicalConstants, ELECTRON_MASS, PROTON_MASS};
use bohmlab::evolve::{evolve, EvolutionPlan};
use bohmlab::field::{gaussian_packet, harmonic_ground_state, plane_wave, vortex, WaveField};
use bohmlab::grid::{Grid, Point};
use bohmlab::interference::{pattern, pattern_table, SlitModel};
use bohmlab::io::{load_field, snapshot_name};
use bohmlab::potential::{build_potential, Potential, PotentialSpec};
use bohmlab::propagator::{
    convergence_study, cross_check, exact_kernel, lattice_propagator, semigroup_check, LatticeSpec, Rule,
};
use bohmlab::run::{run, RunReport, Stages};
use bohmlab::trajectories::{crossing_check, integrate, sample_initial, Flag};
use bohmlab::Result;

const P0_ORACLE: f64 = 0.704_130_653_528_599;

struct Check {
    ok: bool,
    text: String,
}

fn check(ok: bool, text: impl Into<String>) -> Check {
    Check { ok, text: text.into() }
}

struct Reference {
    _dir: TempDir,
    out: PathBuf,
    config: ExperimentConfig,
    report: RunReport,
}

fn references() -> &'static Mutex<HashMap<&'static str, &'static Reference>> {
    static CACHE: OnceLock<Mutex<HashMap<&'static str, &'static Reference>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

fn load_config(name: &str) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(config_path(name))?)
}

/// Full pipeline run of a shipped config, cached for later criteria.
fn reference(name: &'static str) -> Result<&'static Reference> {
    if let Some(r) = references().lock().unwrap().get(name) {
        return Ok(r);
    }
    let config = load_config(name)?;
    let dir = tempfile::tempdir()?;
    let out = dir.path().to_path_buf();
    let report = run(&config, Stages::all(), &out)?;
    let r: &'static Reference = Box::leak(Box::new(Reference {
        _dir: dir,
        out,
        config,
        report,
    }));
    references().lock().unwrap().insert(name, r);
    Ok(r)
}

fn summary(report: &RunReport, key: &str) -> Option<f64> {
    report.summaries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
}

fn assertion(report: &RunReport, name: &str) -> Option<bool> {
    report.assertions.iter().find(|a| a.name == name).map(|a| a.passed)
}

fn two_slit_midflight() -> Result<&'static (WaveField, Potential)> {
    static FIELD: OnceLock<(WaveField, Potential)> = OnceLock::new();
    if let Some(f) = FIELD.get() {
        return Ok(f);
    }
    let cfg = load_config("two_slit")?;
    let grid = cfg.build_grid()?;
    let psi = cfg.initial_field(&grid)?;
    let u = build_potential(&grid, &cfg.potential_spec()?)?;
    let dt = cfg.evolution.as_ref().unwrap().dt;
    let ev = evolve(&psi, &u, &EvolutionPlan::new(dt, 200, 200)?)?;
    let mid = ev.snapshots.last().unwrap().clone();
    Ok(FIELD.get_or_init(|| (mid, u)))
}

fn harmonic(omega: f64) -> PotentialSpec {
    PotentialSpec::Harmonic {
        omega,
        mass: 1.0,
        center: vec![0.0],
    }
}

fn line(w: f64, h: f64) -> Grid {
    let n = (2.0 * w / h).round() as usize + 1;
    Grid::uniform_1d(-w, w, n).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn constants() -> Result<Vec<Check>> {
    let c = PhysicalConstants::default();
    let u = universal_constants(&c);
    let re = epsilon_radius(&c, ELECTRON_MASS)?;
    let rp = epsilon_radius(&c, PROTON_MASS)?;
    let atomic = reverse_velocity_in_units(&c, BOHR_RADIUS, ATOMIC_TIME);
    Ok(vec![
        check(rel(u.s, 4.57e-7) < 5e-3, format!("s={:.5e} s/m", u.s)),
        check(rel(re, 2.6e-11) < 0.05, format!("electron radius={re:.4e} m")),
        check(rel(rp, 1.4e-14) < 0.05, format!("nucleon radius={rp:.4e} m")),
        check((u.s_c_alpha - 1.0).abs() < 1e-4, format!("s*c*alpha={:.10}", u.s_c_alpha)),
        check((atomic - 1.0).abs() < 1e-4, format!("s atomic={atomic:.10}")),
    ])
}

fn decomposition_identity() -> Result<Vec<Check>> {
    let opts = DecomposeOptions::default();
    let g2 = Grid::uniform_2d((-8.0, 8.0), (-8.0, 8.0), (128, 128))?;
    let gauss = gaussian_packet(&g2, &[0.5, -0.3], 1.1, &[1.5, -0.7])?;
    let line = Grid::uniform_1d(-10.0, 10.0, 512)?;
    let ground = harmonic_ground_state(&line, 1.0, &[0.0], 1.0, 1.0)?;
    let (slit, _) = two_slit_midflight()?;
    let mut out = Vec::new();
    for (name, f) in [("gaussian", &gauss), ("harmonic", &ground), ("two-slit t=0.4", slit)] {
        let a = q_form_agreement(&decompose(f, &opts)?);
        out.push(check(a.relative < 1e-6, format!("{name} {:.2e}", a.relative)));
    }
    Ok(out)
}

fn hj_balance() -> Result<Vec<Check>> {
    let r = reference("harmonic_ground")?;
    let spread = summary(&r.report, "u_plus_q_spread").unwrap_or(f64::NAN);
    let mean = summary(&r.report, "u_plus_q_mean").unwrap_or(f64::NAN);
    let mut out = vec![
        check(spread <= 1e-4, format!("U+Q spread {spread:.2e}")),
        check((mean - 0.5).abs() <= 1e-4, format!("U+Q mean {mean:.8}")),
        check(assertion(&r.report, "u_plus_q_constant") == Some(true), "report assertion"),
    ];
    let opts = DecomposeOptions::default();
    let mut levels = Vec::new();
    for lvl in 0..3u32 {
        let n = 128usize << lvl;
        let dt = 0.02 / f64::from(1u32 << lvl);
        let g = Grid::uniform_1d(-20.0, 20.0, n)?;
        let f = gaussian_packet(&g, &[-1.0], 1.0, &[1.0])?;
        let u = build_potential(&g, &PotentialSpec::Free)?;
        let steps = (1.0 / dt).round() as usize;
        let ev = evolve(&f, &u, &EvolutionPlan::new(dt, steps + 1, 1)?)?;
        let set = residuals(&ev.snapshots, &u, steps, &opts)?;
        levels.push([set.hj.summary, set.continuity.summary, set.entropy.summary]);
    }
    for (k, name) in ["hj", "continuity", "entropy"].iter().enumerate() {
        let orders: Vec<f64> = levels.windows(2).map(|w| (w[0][k] / w[1][k]).log2()).collect();
        let worst = orders.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(check(worst >= 1.8, format!("{name} order {worst:.3}")));
    }
    Ok(out)
}

fn gradient_identity() -> Result<Vec<Check>> {
    let opts = DecomposeOptions::default();
    let l1 = Grid::uniform_1d(-15.0, 15.0, 512)?;
    let ring = Grid::periodic_1d(-PI, TAU, 64)?;
    let g2 = Grid::uniform_2d((-8.0, 8.0), (-8.0, 8.0), (128, 128))?;
    let (slit, _) = two_slit_midflight()?;
    let fields = vec![
        ("gaussian-1d", gaussian_packet(&l1, &[1.0], 0.8, &[2.0])?),
        ("gaussian-2d", gaussian_packet(&g2, &[0.5, -0.3], 1.1, &[1.5, -0.7])?),
        ("harmonic", harmonic_ground_state(&l1, 1.0, &[0.0], 1.0, 1.0)?),
        ("plane-wave", plane_wave(&ring, &[3.0])?),
        ("vortex", vortex(&g2, &[0.0, 0.0], 2.0)?),
        ("two-slit", slit.clone()),
    ];
    let mut out = Vec::new();
    for (name, f) in &fields {
        let d = gradient_square_identity(&decompose(f, &opts)?);
        let ratio = d.max_defect / d.scale;
        out.push(check(d.max_defect <= 1e-12 * d.scale, format!("{name} {ratio:.1e}")));
    }
    Ok(out)
}

fn kinematics() -> Result<Vec<Check>> {
    let opts = DecomposeOptions::default();
    let mut out = Vec::new();

    let g = Grid::uniform_1d(-40.0, 40.0, 2048)?;
    let f = gaussian_packet(&g, &[0.0], 1.0, &[0.0])?;
    let u = build_potential(&g, &PotentialSpec::Free)?;
    let snaps = evolve(&f, &u, &EvolutionPlan::new(0.005, 400, 2)?)?.snapshots;
    let starts: Vec<Point> = [-2.5, -1.0, 0.3, 1.0, 2.0].iter().map(|&x| [x, 0.0]).collect();
    let ens = integrate(&snaps, &starts, &opts)?;
    let mut worst: f64 = 0.0;
    for (t, time) in ens.times.iter().enumerate() {
        let width = (1.0 + (0.5 * time).powi(2)).sqrt();
        for (p, x0) in ens.positions[t].iter().zip(&starts) {
            worst = worst.max(rel(p[0], x0[0] * width));
        }
    }
    out.push(check(worst < 5e-3, format!("free scaling {worst:.1e}")));

    // breathing, displaced packet in a well
    let g = Grid::uniform_1d(-10.0, 10.0, 512)?;
    let f = gaussian_packet(&g, &[2.0], 0.5, &[0.5])?;
    let u = build_potential(&g, &harmonic(1.0))?;
    let snaps = evolve(&f, &u, &EvolutionPlan::new(0.005, 1000, 1)?)?.snapshots;
    let start = sample_initial(&snaps[0], 1000, 17)?;
    let ens = integrate(&snaps, &start, &opts)?;
    let c = crossing_check(&ens)?;
    let active = ens.flags.last().unwrap().iter().filter(|f| **f == Flag::Active).count();
    out.push(check(
        c.is_clean() && ens.times.len() == 1001,
        format!("{} crossings over {}x{} ({active} active)", c.violations.len(), ens.particles(), ens.times.len() - 1),
    ));

    let r = reference("free_gaussian")?;
    let tv = summary(&r.report, "equivariance_tv").unwrap_or(f64::NAN);
    out.push(check(
        tv < 0.03 && r.config.trajectories.particles >= 100_000,
        format!("TV {tv:.4} at {} particles", r.config.trajectories.particles),
    ));
    Ok(out)
}

fn circulation_checks() -> Result<Vec<Check>> {
    let opts = DecomposeOptions::default();
    let mut out = Vec::new();

    let g = Grid::uniform_2d((-10.0, 10.0), (-10.0, 10.0), (192, 192))?;
    let f = gaussian_packet(&g, &[1.0, -0.5], 1.2, &[1.0, 0.6])?;
    let u = build_potential(
        &g,
        &PotentialSpec::Harmonic {
            omega: 0.6,
            mass: 1.0,
            center: vec![0.0, 0.0],
        },
    )?;
    let snaps = evolve(&f, &u, &EvolutionPlan::new(0.005, 400, 40)?)?.snapshots;
    let loops = [
        RectLoop {
            lower: [-1.0, -1.0],
            upper: [1.5, 1.0],
        },
        RectLoop {
            lower: [-2.0, -2.5],
            upper: [2.5, 2.0],
        },
    ];
    let mut worst: f64 = 0.0;
    for s in &snaps {
        for lp in &loops {
            worst = worst.max(circulation(s, lp, &opts)?.winding.abs());
        }
    }
    out.push(check(worst <= 1e-4, format!("vortex-free max |winding| {worst:.1e}")));

    let r = reference("vortex")?;
    let n = r.config.plan()?.snapshot_count();
    let vortex_loop = RectLoop {
        lower: [-1.5, -1.5],
        upper: [1.5, 1.5],
    };
    let (mut exact, mut quad): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let s = load_field(&r.out.join("snapshots").join(snapshot_name(i)))?;
        let c = circulation(&s, &vortex_loop, &opts)?;
        exact = exact.max((c.winding - 1.0).abs());
        quad = quad.max((c.gamma_quadrature / (TAU * s.hbar()) - 1.0).abs());
    }
    out.push(check(exact <= 1e-6, format!("vortex |winding-1| {exact:.1e}")));
    out.push(check(quad <= 1e-2, format!("quadrature route {quad:.1e}")));
    out.push(check(assertion(&r.report, "loop0_circulation") == Some(true), "report assertion"));
    Ok(out)
}

fn interference() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let m = SlitModel::new(0.5, -0.5, 1.0, TAU)?;
    let p0 = pattern(&m, 0.0).p;
    out.push(check((p0 - P0_ORACLE).abs() < 1e-14, format!("P(0)={p0:.6}")));
    out.push(check((p0 - 0.70414).abs() < 5e-5, "P(0) ~ 0.70414"));
    let mut inside = true;
    for k in [1.0, TAU, 9.0] {
        let m = SlitModel::new(0.5, -0.5, 1.0, k)?;
        for p in pattern_table(&m, -6.0, 6.0, 2001)? {
            let (lo, hi) = p.envelope();
            inside &= p.p >= lo - 1e-15 && p.p <= hi + 1e-15;
        }
    }
    out.push(check(inside, "envelope bounds"));

    let r = reference("two_slit")?;
    let spacing = summary(&r.report, "fringe_spacing").unwrap_or(f64::NAN);
    let predicted = summary(&r.report, "fringe_predicted").unwrap_or(f64::NAN);
    let grid = r.config.build_grid()?;
    out.push(check(
        rel(spacing, predicted) <= 0.05,
        format!("spacing {spacing:.4} vs {predicted:.4} on {}x{}", grid.shape()[0], grid.shape()[1]),
    ));
    out.push(check(assertion(&r.report, "central_maximum") == Some(true), "central maximum"));
    out.push(check(r.report.passed(), format!("run exit {}", r.report.exit_code())));
    Ok(out)
}

fn path_integral() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let base = LatticeSpec::new(2, 1.0, line(30.0, 0.02), 0.02)?;
    let mut worst: f64 = 0.0;
    for m in [2, 4, 16] {
        let g = lattice_propagator(&base.with_slices(m, 1.0)?, &PotentialSpec::Free, 0.3, -0.2)?;
        let e = exact_kernel(&PotentialSpec::Free, -0.2, 0.3, C64::from_polar(1.0, -0.02), 1.0, 1.0)?;
        worst = worst.max((g - e).norm() / e.norm());
    }
    out.push(check(worst < 1e-6, format!("free {worst:.1e}")));

    let t = PI / 2.0;
    let base = LatticeSpec::new(8, t, line(30.0, 0.01), 0.02)?;
    let table = convergence_study(&base, &harmonic(1.0), 0.3, -0.2, t, &[8, 16, 32, 64])?;
    let e64 = table.rows.last().unwrap().error;
    let order = table.fitted_order.unwrap_or(f64::NAN);
    out.push(check(e64 < 0.01, format!("mehler M=64 {e64:.2e}")));
    out.push(check((0.7..=1.5).contains(&order), format!("order {order:.2}")));

    let spec = LatticeSpec::new(64, t, line(30.0, 0.01), 0.02)?;
    // split points whose slice widths differ from T/64 on both sides
    for frac in [0.37, 0.61] {
        let d = semigroup_check(&spec, &harmonic(1.0), 0.3, -0.2, frac * t)?;
        out.push(check(
            d.defect < 1e-3 && d.defect > 0.0,
            format!("semigroup at {frac}T {:.1e}", d.defect),
        ));
    }
    let free = LatticeSpec::new(16, 1.0, line(30.0, 0.02), 0.02)?;
    let d = semigroup_check(&free, &PotentialSpec::Free, 0.3, -0.2, 0.37)?;
    out.push(check(d.defect < 1e-6, format!("free semigroup {:.1e}", d.defect)));

    let grid = line(10.0, 0.005);
    let psi = gaussian_packet(&grid, &[1.0], 1.0, &[1.0])?;
    let free = cross_check(&LatticeSpec::new(4, 1.0, grid.clone(), 0.0)?, &PotentialSpec::Free, &psi)?;
    let h = LatticeSpec::new(16, 1.0, grid, 0.0)?.with_rule(Rule::Midpoint);
    let osc = cross_check(&h, &harmonic(1.0), &psi)?;
    out.push(check(free.l2 < 1e-3, format!("cross free {:.1e}", free.l2)));
    out.push(check(osc.l2 < 1e-3, format!("cross harmonic {:.1e}", osc.l2)));
    Ok(out)
}

fn probes() -> Result<Vec<Check>> {
    let opts = DecomposeOptions::default();
    let s = reverse_velocity_in_units(&PhysicalConstants::default(), BOHR_RADIUS, ATOMIC_TIME);
    let mut out = Vec::new();
    for name in ["harmonic_ground", "free_gaussian", "vortex", "two_slit"] {
        let r = reference(name)?;
        let grid = r.config.build_grid()?;
        let u = build_potential(&grid, &r.config.potential_spec()?)?;
        let n = r.config.plan()?.snapshot_count();
        let i = n / 2;
        let snaps: Vec<WaveField> = (i - 1..=i + 1)
            .map(|k| load_field(&r.out.join("snapshots").join(snapshot_name(k))))
            .collect::<Result<_>>()?;
        let b = decompose(&snaps[1], &opts)?;
        let b1 = taylor_probe_b1(&b, &u, s, &Direction::Auto)?;
        let b2 = taylor_probe_b2(&b, &u, s)?;
        let e = epsilon_dot_check(&snaps, 1, s, &opts)?;
        let finite = b1.is_finite() && b2.is_finite() && e.is_finite();
        let zero_lhs = !u.is_free() || (b1.lhs_max_abs() == 0.0 && b2.lhs_max_abs() == 0.0);
        let gated = r
            .report
            .assertions
            .iter()
            .any(|a| a.name.contains("probe") || a.name.contains("epsilon"));
        out.push(check(
            finite && zero_lhs && !gated,
            format!("{name} finite={finite} lhs0={zero_lhs} gated={gated}"),
        ));
    }
    Ok(out)
}

type Criterion = (u32, &'static str, f64, fn() -> Result<Vec<Check>>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "constants", 1.0, constants),
        (2, "decomposition identity", 10.0, decomposition_identity),
        (3, "modified HJ balance", 60.0, hj_balance),
        (4, "complexified gradient identity", 60.0, gradient_identity),
        (5, "bohmian kinematics", 120.0, kinematics),
        (6, "circulation", 30.0, circulation_checks),
        (7, "interference", 300.0, interference),
        (8, "path integral", 60.0, path_integral),
        (9, "probes never gate", 60.0, probes),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        let t = Instant::now();
        let result = f();
        let secs = t.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok(checks) => {
                let ok = checks.iter().all(|c| c.ok) && secs <= budget;
                let text: Vec<String> = checks
                    .iter()
                    .map(|c| if c.ok { c.text.clone() } else { format!("[x] {}", c.text) })
                    .collect();
                (ok, text.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {n} {name}: {verdict} ({secs:.1} s of {budget} s) {detail}");
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
