//! Experiment orchestration: evolve, decompose, diagnose, advect, analyse
//! the screen, and write every output with a checksum.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use crate::bohm::{decompose_with_action, q_form_agreement, residuals, BohmFields, DecomposeOptions};
use crate::complexified::{
    circulation, complexified_hj_residual, epsilon_dot_check, gradient_square_identity, reverse_velocity_in_units,
    taylor_probe_b1, taylor_probe_b2, universal_constants, Direction, ATOMIC_TIME, BOHR_RADIUS,
};
use crate::config::{ConstantsConfig, ExperimentConfig, UnitSystem};
use crate::constants::{PhysicalConstants, FINE_STRUCTURE};
use crate::error::{Error, Result};
use crate::evolve::evolve;
use crate::field::WaveField;
use crate::interference::{compare_simulated, pattern, SlitModel};
use crate::io::{
    fmt_float, save_field, sha256_file, snapshot_name, write_columns_csv, write_field_csv, write_pattern_csv,
    write_trajectory_csv,
};
use crate::potential::{build_potential, Potential};
use crate::trajectories::{crossing_check, equivariance_tv, integrate, sample_initial, Flag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub diagnostics: bool,
    pub trajectories: bool,
    pub interference: bool,
}

impl Stages {
    pub fn all() -> Self {
        Self {
            diagnostics: true,
            trajectories: true,
            interference: true,
        }
    }

    pub fn evolve_only() -> Self {
        Self {
            diagnostics: false,
            trajectories: false,
            interference: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub timings: Vec<(String, f64)>,
    pub summaries: Vec<(String, f64)>,
    /// Informational lines that never affect the exit code.
    pub notes: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub errors: Vec<(String, String)>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.assertions.iter().all(|a| a.passed)
    }

    /// 0 when every enabled assertion passes, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    fn assert(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn record(&mut self, rel: &Path) -> Result<()> {
        let sha256 = sha256_file(&self.out_dir.join(rel))?;
        self.files.push(FileEntry {
            path: rel.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("bohmlab run report\n\n[files]\n");
        for f in &self.files {
            let _ = writeln!(s, "{}  {}", f.sha256, f.path.display());
        }
        s.push_str("\n[timing_seconds]\n");
        for (k, v) in &self.timings {
            let _ = writeln!(s, "{k} = {v:.3}");
        }
        s.push_str("\n[summaries]\n");
        for (k, v) in &self.summaries {
            let _ = writeln!(s, "{k} = {}", fmt_float(*v));
        }
        s.push_str("\n[notes]\n");
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        s.push_str("\n[assertions]\n");
        for a in &self.assertions {
            let _ = writeln!(s, "{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
        }
        if !self.errors.is_empty() {
            s.push_str("\n[errors]\n");
            for (stage, e) in &self.errors {
                let _ = writeln!(s, "{stage}: {e}");
            }
        }
        let _ = writeln!(s, "\nexit_code = {}", self.exit_code());
        s
    }
}

/// s, s·c, s·c·α and ε-radii in SI.
pub fn constants_report(cfg: &ConstantsConfig) -> Result<String> {
    let c = PhysicalConstants::default();
    let u = universal_constants(&c);
    let mut s = String::new();
    let _ = writeln!(s, "s          = {:.6e} s/m", u.s);
    let _ = writeln!(s, "s*c        = {:.6e}", u.s_times_c);
    let _ = writeln!(s, "1/alpha    = {:.6e}", 1.0 / FINE_STRUCTURE);
    let _ = writeln!(s, "s*c*alpha  = {:.12}", u.s_c_alpha);
    let _ = writeln!(s, "s (atomic) = {:.12}", reverse_velocity_in_units(&c, BOHR_RADIUS, ATOMIC_TIME));
    for m in &cfg.masses {
        let r = crate::complexified::epsilon_radius(&c, m.kg)?;
        let _ = writeln!(s, "epsilon_radius[{}] = {:.6e} m (mass {:.6e} kg)", m.name, r, m.kg);
    }
    Ok(s)
}

/// Runs the configured experiment, writing outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, stages: Stages, out_dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(out_dir)?;
    let mut report = RunReport {
        out_dir: out_dir.to_path_buf(),
        ..Default::default()
    };
    let eff = PathBuf::from("effective_config.toml");
    fs::write(out_dir.join(&eff), crate::config::emit_config(cfg)?)?;
    report.record(&eff)?;

    if cfg.constants.is_some() || cfg.units.system == UnitSystem::Si {
        let text = constants_report(&cfg.constants.clone().unwrap_or_default())?;
        let p = PathBuf::from("constants.txt");
        fs::write(out_dir.join(&p), &text)?;
        report.record(&p)?;
        report.notes.extend(text.lines().map(str::to_string));
    }

    if cfg.grid.is_some() {
        if let Err(e) = run_dynamics(cfg, stages, &mut report) {
            report.errors.push(("run".into(), e.to_string()));
        }
    }

    let text = report.render();
    fs::write(out_dir.join("report.txt"), text)?;
    Ok(report)
}

fn timed<T>(report: &mut RunReport, stage: &str, f: impl FnOnce(&mut RunReport) -> Result<T>) -> Option<T> {
    let t = Instant::now();
    let out = f(report);
    report.timings.push((stage.into(), t.elapsed().as_secs_f64()));
    match out {
        Ok(v) => Some(v),
        Err(e) => {
            report.errors.push((stage.into(), e.to_string()));
            None
        }
    }
}

fn run_dynamics(cfg: &ExperimentConfig, stages: Stages, report: &mut RunReport) -> Result<()> {
    let grid = cfg.build_grid()?;
    let initial = cfg.initial_field(&grid)?;
    let potential = build_potential(&grid, &cfg.potential_spec()?)?;
    let plan = cfg.plan()?;
    let opts = cfg.decompose_options()?;
    let out = report.out_dir.clone();

    let Some(snapshots) = timed(report, "evolve", |r| {
        info!("evolving {} steps on {} points", plan.steps, grid.len());
        let ev = evolve(&initial, &potential, &plan)?;
        r.summaries.push(("norm_drift".into(), ev.norm_drift));
        let tol = cfg.diagnostics.norm_tolerance;
        r.assert("norm_conservation", ev.norm_drift <= tol, format!("drift {:.3e} <= {tol:.1e}", ev.norm_drift));
        if cfg.evolution.as_ref().is_some_and(|e| e.write_snapshots) {
            fs::create_dir_all(out.join("snapshots"))?;
            for (i, s) in ev.snapshots.iter().enumerate() {
                let rel = Path::new("snapshots").join(snapshot_name(i));
                save_field(&out.join(&rel), s)?;
                r.record(&rel)?;
            }
        }
        if cfg.output.field_csv {
            let rel = PathBuf::from("final_field.csv");
            write_field_csv(BufWriter::new(File::create(out.join(&rel))?), ev.snapshots.last().unwrap())?;
            r.record(&rel)?;
        }
        Ok(ev.snapshots)
    }) else {
        return Ok(());
    };

    if stages.diagnostics {
        timed(report, "diagnostics", |r| diagnostics(cfg, &snapshots, &potential, &opts, r));
    }
    if stages.trajectories && cfg.trajectories.particles > 0 {
        timed(report, "trajectories", |r| trajectories(cfg, &snapshots, &opts, r));
    }
    if stages.interference && cfg.interference.is_some() {
        timed(report, "interference", |r| interference(cfg, &snapshots, r));
    }
    Ok(())
}

fn write_bohm_csv(report: &mut RunReport, b: &BohmFields) -> Result<()> {
    let mask: Vec<f64> = b.mask.iter().map(|&m| f64::from(u8::from(m))).collect();
    let qe = b.q_entropy();
    let j = b.action_values().map(<[f64]>::to_vec).unwrap_or_else(|_| vec![0.0; b.rho.len()]);
    let mut cols: Vec<(&str, &[f64])> = vec![
        ("mask", &mask),
        ("rho", &b.rho),
        ("j", &j),
        ("s_q", &b.s_q),
        ("q_curvature", &b.q),
        ("q_entropy", &qe),
        ("v_x", &b.v[0]),
    ];
    if b.v.len() > 1 {
        cols.push(("v_y", &b.v[1]));
    }
    let rel = PathBuf::from("bohm_fields.csv");
    write_columns_csv(BufWriter::new(File::create(report.out_dir.join(&rel))?), &b.grid, &cols)?;
    report.record(&rel)
}

fn diagnostics(
    cfg: &ExperimentConfig,
    snapshots: &[WaveField],
    potential: &Potential,
    opts: &DecomposeOptions,
    r: &mut RunReport,
) -> Result<()> {
    let d = &cfg.diagnostics;
    let n = snapshots.len();
    let index = d.residual_index.unwrap_or(n / 2);
    if index >= n {
        return Err(Error::Config {
            key: "diagnostics.residual_index".into(),
            message: format!("{index} is past the last snapshot ({})", n - 1),
        });
    }
    let field = &snapshots[index];
    let b = decompose_with_action(field, opts, None)?;
    write_bohm_csv(r, &b)?;
    r.summaries.push(("diagnostics_time".into(), field.time()));
    if b.action.as_ref().is_some_and(|a| a.is_multivalued()) {
        r.notes.push("action is multivalued on the masked region (phase defects present)".into());
    }

    if d.q_forms {
        let a = q_form_agreement(&b);
        r.summaries.push(("q_form_relative".into(), a.relative));
        r.assert(
            "q_forms_agree",
            a.relative <= d.q_form_tolerance,
            format!("relative {:.3e} <= {:.1e}", a.relative, d.q_form_tolerance),
        );
    }
    if d.gradient_identity {
        let g = gradient_square_identity(&b);
        let bound = 1e-12 * g.scale.max(f64::MIN_POSITIVE);
        r.summaries.push(("gradient_identity_defect".into(), g.max_defect));
        r.assert(
            "gradient_identity",
            g.max_defect <= bound,
            format!("defect {:.3e} <= 1e-12 x scale {:.3e}", g.max_defect, g.scale),
        );
    }
    if d.u_plus_q {
        let max_rho = b.rho.iter().cloned().fold(0.0, f64::max);
        let vals: Vec<f64> = (0..b.rho.len())
            .filter(|&k| b.mask[k] && b.rho[k] > 1e-6 * max_rho)
            .map(|k| potential.values()[k] + b.q[k])
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
        let spread = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        r.summaries.push(("u_plus_q_mean".into(), mean));
        r.summaries.push(("u_plus_q_spread".into(), spread));
        r.assert(
            "u_plus_q_constant",
            spread <= d.u_plus_q_tolerance,
            format!("max |U+Q-mean| {:.3e} <= {:.1e} (mean {mean:.12})", spread, d.u_plus_q_tolerance),
        );
    }

    let interior = n >= 3 && index > 0 && index + 1 < n;
    if d.residuals && interior {
        let set = residuals(snapshots, potential, index, opts)?;
        for (name, res) in [("hj", &set.hj), ("continuity", &set.continuity), ("entropy", &set.entropy)] {
            r.summaries.push((format!("residual_{name}"), res.summary));
            if let Some(tol) = d.residual_tolerance {
                r.assert(
                    &format!("residual_{name}"),
                    res.summary <= tol,
                    format!("summary {:.3e} <= {tol:.1e}", res.summary),
                );
            }
        }
    } else if d.residuals {
        r.notes.push("residuals skipped: need an interior snapshot with neighbours on both sides".into());
    }

    if d.probes {
        let s = reverse_velocity_in_units(&PhysicalConstants::default(), BOHR_RADIUS, ATOMIC_TIME);
        let b1 = taylor_probe_b1(&b, potential, s, &Direction::Auto)?;
        let b2 = taylor_probe_b2(&b, potential, s)?;
        r.notes.push(format!(
            "probe_b1: finite={} max|lhs|={:.3e} max|rhs|={:.3e}",
            b1.is_finite(),
            b1.lhs_max_abs(),
            b1.rhs_max_abs()
        ));
        r.notes.push(format!(
            "probe_b2: finite={} max|lhs|={:.3e} max|rhs|={:.3e}",
            b2.is_finite(),
            b2.lhs_max_abs(),
            b2.rhs_max_abs()
        ));
        if interior {
            let e = epsilon_dot_check(snapshots, index, s, opts)?;
            let max = e.magnitude.iter().cloned().fold(0.0, f64::max);
            r.notes.push(format!(
                "epsilon_dot: finite={} max|n_dot|={max:.3e} temporal_variation={:.3e}",
                e.is_finite(),
                e.temporal_variation
            ));
            let c = complexified_hj_residual(snapshots, potential, index, &Direction::Auto, s, opts)?;
            r.summaries.push(("complex_hj_identified".into(), c.identified.summary));
            r.summaries.push(("complex_hj_expanded".into(), c.expanded.summary));
        }
    }

    for (i, (lp, expected)) in cfg.loops().into_iter().enumerate() {
        let picks = [0, index, n - 1];
        let mut windings = Vec::new();
        for &t in &picks {
            let c = circulation(&snapshots[t], &lp, opts)?;
            r.summaries.push((format!("loop{i}_winding_t{t}"), c.winding));
            windings.push(c.winding);
        }
        if let Some(w) = expected {
            let tol = d.circulation_tolerance;
            let worst = windings.iter().map(|x| (x - w as f64).abs()).fold(0.0, f64::max);
            r.assert(
                &format!("loop{i}_circulation"),
                worst <= tol,
                format!("max |winding - {w}| {worst:.3e} <= {tol:.1e}"),
            );
        }
    }
    Ok(())
}

fn trajectories(cfg: &ExperimentConfig, snapshots: &[WaveField], opts: &DecomposeOptions, r: &mut RunReport) -> Result<()> {
    let t = &cfg.trajectories;
    let start = sample_initial(&snapshots[0], t.particles, t.seed)?;
    let mut ens = integrate(snapshots, &start, opts)?;
    ens.seed = Some(t.seed);
    let rel = PathBuf::from("trajectories.csv");
    write_trajectory_csv(BufWriter::new(File::create(r.out_dir.join(&rel))?), &ens)?;
    r.record(&rel)?;
    r.notes.push(format!(
        "trajectories: {} particles, {} frozen, {} exited",
        ens.particles(),
        ens.count(Flag::Frozen),
        ens.count(Flag::Exited)
    ));
    if ens.dims == 1 {
        let c = crossing_check(&ens)?;
        r.assert("non_crossing", c.is_clean(), format!("{} violations", c.violations.len()));
        if let Some(tol) = t.equivariance_tolerance {
            let tv = equivariance_tv(&ens, snapshots.last().unwrap(), t.equivariance_bins)?;
            r.summaries.push(("equivariance_tv".into(), tv));
            r.assert("equivariance", tv < tol, format!("TV {tv:.4} < {tol}"));
        }
    }
    Ok(())
}

fn interference(cfg: &ExperimentConfig, snapshots: &[WaveField], r: &mut RunReport) -> Result<()> {
    let geo = cfg.screen_geometry()?;
    let tol = cfg.interference.as_ref().map_or(0.05, |i| i.tolerance);
    let last = snapshots.last().unwrap();
    let rep = compare_simulated(last, &geo)?;
    let fit = rep.fit;
    let model_fit: Vec<f64> = rep
        .coords
        .iter()
        .map(|&y| {
            let u = y - fit.center;
            let g = (-0.5 * (u / fit.width).powi(2)).exp();
            g * (fit.amplitude + fit.cos_amplitude * (fit.kappa * u).cos() + fit.sin_amplitude * (fit.kappa * u).sin())
        })
        .collect();
    let rel = PathBuf::from("screen.csv");
    {
        use std::io::Write;
        let mut w = BufWriter::new(File::create(r.out_dir.join(&rel))?);
        writeln!(w, "y,rho,fit")?;
        for ((y, p), f) in rep.coords.iter().zip(&rep.profile).zip(&model_fit) {
            writeln!(w, "{},{},{}", fmt_float(*y), fmt_float(*p), fmt_float(*f))?;
        }
        w.flush()?;
    }
    r.record(&rel)?;

    let half = 0.5 * geo.slit_separation;
    // abscissa measured from the midline
    let model = SlitModel::new(half, -half, fit.width, geo.model_wavenumber())?;
    let rows: Vec<_> = rep.coords.iter().map(|&y| pattern(&model, y - geo.midline)).collect();
    let rel = PathBuf::from("pattern.csv");
    write_pattern_csv(BufWriter::new(File::create(r.out_dir.join(&rel))?), &rows)?;
    r.record(&rel)?;

    r.summaries.push(("fringe_spacing".into(), rep.spacing));
    r.summaries.push(("fringe_predicted".into(), rep.predicted_spacing));
    r.summaries.push(("fringe_contrast".into(), fit.contrast));
    r.assert(
        "fringe_spacing",
        rep.relative_error.abs() <= tol,
        format!(
            "spacing {:.4} vs lambda L/d {:.4} (relative {:+.4})",
            rep.spacing, rep.predicted_spacing, rep.relative_error
        ),
    );
    r.assert(
        "central_maximum",
        rep.midline_offset.abs() <= rep.spacing,
        format!("offset {:.4} within one fringe {:.4}", rep.midline_offset, rep.spacing),
    );
    Ok(())
}
