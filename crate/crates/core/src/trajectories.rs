//! Bohmian trajectories: sampling from |Ψ|², RK4 advection through the
//! snapshot velocity field v = ∇J/m, and ensemble checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bohm::{decompose, DecomposeOptions};
use crate::error::{invalid, Error, Result};
use crate::field::WaveField;
use crate::grid::{Grid, Point};

pub const MAX_SUBSTEPS: usize = 64;
/// Fraction of the finest spacing a particle may cross in one substep.
pub const CFL_FRACTION: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    Active,
    /// Velocity undefined (node region); position held.
    Frozen,
    /// Left the grid; last inside position held.
    Exited,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Active => "active",
            Self::Frozen => "frozen",
            Self::Exited => "exited",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub dims: usize,
    pub times: Vec<f64>,
    /// `positions[t][p]`
    pub positions: Vec<Vec<Point>>,
    pub flags: Vec<Vec<Flag>>,
    pub seed: Option<u64>,
}

impl TrajectoryEnsemble {
    pub fn particles(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn final_positions(&self) -> &[Point] {
        self.positions.last().map_or(&[], Vec::as_slice)
    }

    pub fn count(&self, flag: Flag) -> usize {
        self.flags.last().map_or(0, |f| f.iter().filter(|&&x| x == flag).count())
    }
}

/// Velocity samples of one snapshot.
#[derive(Clone, Debug)]
pub struct VelocityFrame {
    pub time: f64,
    pub v: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
}

impl VelocityFrame {
    pub fn from_field(field: &WaveField, opts: &DecomposeOptions) -> Result<Self> {
        let b = decompose(field, opts)?;
        Ok(Self {
            time: field.time(),
            v: b.v,
            mask: b.mask,
        })
    }

    fn max_speed(&self) -> f64 {
        (0..self.mask.len())
            .filter(|&k| self.mask[k])
            .map(|k| self.v.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Corner indices and bilinear weights of the cell containing `p`.
fn cell(grid: &Grid, p: &Point) -> Option<([usize; 4], [f64; 4])> {
    if !grid.contains(&p[..grid.dims()]) {
        return None;
    }
    let mut idx = [0usize; 2];
    let mut frac = [0.0; 2];
    for (a, ax) in grid.axes().iter().enumerate() {
        let f = (p[a] - ax.min) / ax.spacing();
        let i = (f.floor() as usize).min(ax.points - 2);
        idx[a] = i;
        frac[a] = (f - i as f64).clamp(0.0, 1.0);
    }
    if grid.dims() == 1 {
        let (i, t) = (idx[0], frac[0]);
        Some(([i, i + 1, i, i], [1.0 - t, t, 0.0, 0.0]))
    } else {
        let ([i, j], [s, t]) = (idx, frac);
        Some((
            [
                grid.ravel([i, j]),
                grid.ravel([i + 1, j]),
                grid.ravel([i, j + 1]),
                grid.ravel([i + 1, j + 1]),
            ],
            [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t],
        ))
    }
}

enum Sample {
    Velocity(Point),
    Undefined,
    Outside,
}

fn interpolate(grid: &Grid, frame: &VelocityFrame, p: &Point) -> Sample {
    let Some((corners, w)) = cell(grid, p) else {
        return Sample::Outside;
    };
    let mut v = [0.0; 2];
    for c in 0..4 {
        if w[c] == 0.0 {
            continue;
        }
        if !frame.mask[corners[c]] {
            return Sample::Undefined;
        }
        for (a, va) in v.iter_mut().enumerate().take(grid.dims()) {
            *va += w[c] * frame.v[a][corners[c]];
        }
    }
    Sample::Velocity(v)
}

fn interpolate_in_time(grid: &Grid, f0: &VelocityFrame, f1: &VelocityFrame, p: &Point, t: f64) -> Sample {
    let s = ((t - f0.time) / (f1.time - f0.time)).clamp(0.0, 1.0);
    match (interpolate(grid, f0, p), interpolate(grid, f1, p)) {
        (Sample::Velocity(a), Sample::Velocity(b)) => {
            Sample::Velocity([(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]])
        }
        (Sample::Outside, _) | (_, Sample::Outside) => Sample::Outside,
        _ => Sample::Undefined,
    }
}

/// Velocity at `position` and `time`, linear in space and time between snapshots.
pub fn velocity_at(
    snapshots: &[WaveField],
    position: &[f64],
    time: f64,
    opts: &DecomposeOptions,
) -> Result<Vec<f64>> {
    let first = snapshots.first().ok_or_else(|| invalid("snapshots", "empty series"))?;
    let dims = first.grid().dims();
    if position.len() != dims {
        return Err(invalid("position", format!("expected {dims} components")));
    }
    let last = snapshots.last().unwrap();
    if time < first.time() || time > last.time() {
        return Err(invalid("time", "outside the snapshot span"));
    }
    let n = snapshots
        .windows(2)
        .position(|w| time <= w[1].time())
        .unwrap_or(0);
    let f0 = VelocityFrame::from_field(&snapshots[n], opts)?;
    let f1 = if snapshots.len() > 1 {
        VelocityFrame::from_field(&snapshots[n + 1], opts)?
    } else {
        f0.clone()
    };
    let mut p = [0.0; 2];
    p[..dims].copy_from_slice(position);
    let sample = if snapshots.len() > 1 {
        interpolate_in_time(first.grid(), &f0, &f1, &p, time)
    } else {
        interpolate(first.grid(), &f0, &p)
    };
    match sample {
        Sample::Velocity(v) => Ok(v[..dims].to_vec()),
        Sample::Undefined => Err(Error::UndefinedVelocity),
        Sample::Outside => Err(invalid("position", "outside the grid")),
    }
}

/// Draw `count` positions from |Ψ|² (piecewise linear between grid points).
pub fn sample_initial(field: &WaveField, count: usize, seed: u64) -> Result<Vec<Point>> {
    if count == 0 {
        return Err(invalid("particles", "must be at least 1"));
    }
    let rho: Vec<f64> = field.amplitude().iter().map(|z| z.norm_sqr()).collect();
    let max = rho.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::DegenerateDensity("density vanishes everywhere".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = field.grid();
    match grid.dims() {
        1 => Ok(sample_1d(grid, &rho, count, &mut rng)),
        _ => sample_2d(grid, &rho, max, count, &mut rng),
    }
}

fn sample_1d(grid: &Grid, rho: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let ax = grid.axis(0);
    let h = ax.spacing();
    let mut cdf = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in rho.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cdf.push(acc);
    }
    (0..count)
        .map(|_| {
            let target = rng.gen::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= target).clamp(1, cdf.len() - 1) - 1;
            let m = target - cdf[i];
            let (a, b) = (rho[i], rho[i + 1]);
            // solve a·t·h + (b − a)·t²·h/2 = m for t ∈ [0, 1]
            let slope = b - a;
            let t = if slope.abs() < 1e-14 * a.max(b) {
                if a > 0.0 {
                    m / (a * h)
                } else {
                    0.5
                }
            } else {
                let disc = (a * a + 2.0 * slope * m / h).max(0.0);
                2.0 * m / h / (a + disc.sqrt())
            };
            [ax.coord(i) + t.clamp(0.0, 1.0) * h, 0.0]
        })
        .collect()
}

fn sample_2d(grid: &Grid, rho: &[f64], max: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    // proposals come from the bounding box of points above 1e-12·max
    let floor = 1e-12 * max;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for (k, &r) in rho.iter().enumerate() {
        if r >= floor {
            let p = grid.point(k);
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
    }
    for a in 0..2 {
        let h = grid.spacing(a);
        lo[a] = (lo[a] - h).max(grid.axis(a).min);
        hi[a] = (hi[a] + h).min(grid.axis(a).max);
    }
    let mut out = Vec::with_capacity(count);
    let mut tries: u64 = 0;
    let limit = 10_000_u64.saturating_mul(count as u64).max(1_000_000);
    while out.len() < count {
        tries += 1;
        if tries > limit {
            return Err(Error::DegenerateDensity("rejection sampler made no progress".into()));
        }
        let p = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
        let Some((corners, w)) = cell(grid, &p) else {
            continue;
        };
        let value: f64 = (0..4).map(|c| w[c] * rho[corners[c]]).sum();
        if rng.gen::<f64>() * max < value {
            out.push(p);
        }
    }
    Ok(out)
}

/// Substeps for one snapshot interval.
pub fn substeps(grid: &Grid, f0: &VelocityFrame, f1: &VelocityFrame) -> usize {
    let vmax = f0.max_speed().max(f1.max_speed());
    let dt = f1.time - f0.time;
    if !(vmax > 0.0) {
        return 1;
    }
    let limit = CFL_FRACTION * grid.min_spacing() / vmax;
    ((dt / limit).ceil() as usize).clamp(1, MAX_SUBSTEPS)
}

fn advance(grid: &Grid, f0: &VelocityFrame, f1: &VelocityFrame, p: &mut Point, flag: &mut Flag, nsub: usize) {
    if *flag != Flag::Active {
        return;
    }
    let h = (f1.time - f0.time) / nsub as f64;
    let dims = grid.dims();
    for s in 0..nsub {
        let t = f0.time + s as f64 * h;
        let vel = |q: &Point, t: f64| interpolate_in_time(grid, f0, f1, q, t);
        let shift = |q: &Point, v: &Point, c: f64| {
            let mut r = *q;
            for a in 0..dims {
                r[a] += c * v[a];
            }
            r
        };
        let mut stages = [[0.0; 2]; 4];
        let probes = [(0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)];
        for (i, &(cx, ct)) in probes.iter().enumerate() {
            let q = if i == 0 { *p } else { shift(p, &stages[i - 1], cx * h) };
            match vel(&q, t + ct * h) {
                Sample::Velocity(v) => stages[i] = v,
                Sample::Undefined => {
                    *flag = Flag::Frozen;
                    return;
                }
                Sample::Outside => {
                    *flag = Flag::Exited;
                    return;
                }
            }
        }
        let mut next = *p;
        for a in 0..dims {
            next[a] += h / 6.0 * (stages[0][a] + 2.0 * stages[1][a] + 2.0 * stages[2][a] + stages[3][a]);
        }
        if !grid.contains(&next[..dims]) {
            *flag = Flag::Exited;
            return;
        }
        *p = next;
    }
}

/// RK4 advection of `initial` through the snapshot series.
pub fn integrate(
    snapshots: &[WaveField],
    initial: &[Point],
    opts: &DecomposeOptions,
) -> Result<TrajectoryEnsemble> {
    if snapshots.len() < 2 {
        return Err(invalid("snapshots", "need at least two snapshots"));
    }
    if initial.is_empty() {
        return Err(invalid("particles", "must be at least 1"));
    }
    let grid = snapshots[0].grid().clone();
    for w in snapshots.windows(2) {
        grid.check_same(w[1].grid())?;
        if !(w[1].time() > w[0].time()) {
            return Err(invalid("snapshots", "time stamps must increase"));
        }
    }
    let dims = grid.dims();
    let mut pos: Vec<Point> = initial.to_vec();
    let mut flags: Vec<Flag> = pos
        .iter()
        .map(|p| if grid.contains(&p[..dims]) { Flag::Active } else { Flag::Exited })
        .collect();
    let mut out = TrajectoryEnsemble {
        dims,
        times: vec![snapshots[0].time()],
        positions: vec![pos.clone()],
        flags: vec![flags.clone()],
        seed: None,
    };
    let mut f0 = VelocityFrame::from_field(&snapshots[0], opts)?;
    // a particle starting in a node region is frozen from the outset
    for (p, f) in pos.iter().zip(flags.iter_mut()) {
        if *f == Flag::Active && matches!(interpolate(&grid, &f0, p), Sample::Undefined) {
            *f = Flag::Frozen;
        }
    }
    out.flags[0] = flags.clone();
    for snap in &snapshots[1..] {
        let f1 = VelocityFrame::from_field(snap, opts)?;
        let nsub = substeps(&grid, &f0, &f1);
        pos.par_iter_mut()
            .zip(flags.par_iter_mut())
            .for_each(|(p, f)| advance(&grid, &f0, &f1, p, f, nsub));
        out.times.push(f1.time);
        out.positions.push(pos.clone());
        out.flags.push(flags.clone());
        f0 = f1;
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossingReport {
    /// (time index, earlier-ordered particle, later-ordered particle)
    pub violations: Vec<(usize, usize, usize)>,
}

impl CrossingReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the initial left-to-right order is kept at every stored time.
pub fn crossing_check(ensemble: &TrajectoryEnsemble) -> Result<CrossingReport> {
    if ensemble.dims != 1 {
        return Err(Error::InvalidGrid("crossing check needs a 1D ensemble".into()));
    }
    let Some(first) = ensemble.positions.first() else {
        return Ok(CrossingReport::default());
    };
    let mut order: Vec<usize> = (0..first.len()).collect();
    order.sort_by(|&a, &b| first[a][0].total_cmp(&first[b][0]).then(a.cmp(&b)));
    let mut report = CrossingReport::default();
    for (t, row) in ensemble.positions.iter().enumerate() {
        for w in order.windows(2) {
            if row[w[0]][0] > row[w[1]][0] {
                report.violations.push((t, w[0], w[1]));
            }
        }
    }
    Ok(report)
}

/// Total-variation distance between the histogram of final positions and
/// the density of `field` over `bins` equal bins spanning the populated range.
pub fn equivariance_tv(ensemble: &TrajectoryEnsemble, field: &WaveField, bins: usize) -> Result<f64> {
    let grid = field.grid();
    if grid.dims() != 1 || ensemble.dims != 1 {
        return Err(Error::InvalidGrid("equivariance check needs a 1D ensemble".into()));
    }
    if bins == 0 {
        return Err(invalid("bins", "must be at least 1"));
    }
    let xs: Vec<f64> = ensemble.final_positions().iter().map(|p| p[0]).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateDensity("all particles at one point".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0.0; bins];
    for &x in &xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        hist[b] += 1.0 / xs.len() as f64;
    }
    // exact integral of the piecewise-linear density over each bin
    let rho: Vec<f64> = field.amplitude().iter().map(|z| z.norm_sqr()).collect();
    let ax = grid.axis(0);
    let h = ax.spacing();
    let cumulative = |x: f64| -> f64 {
        let f = ((x - ax.min) / h).clamp(0.0, (ax.points - 1) as f64);
        let i = (f.floor() as usize).min(ax.points - 2);
        let t = f - i as f64;
        let full: f64 = (0..i).map(|k| 0.5 * h * (rho[k] + rho[k + 1])).sum();
        full + h * (rho[i] * t + 0.5 * (rho[i + 1] - rho[i]) * t * t)
    };
    let total = cumulative(ax.max);
    let mut tv = 0.0;
    let mut prev = cumulative(lo);
    let outside = 1.0 - (cumulative(hi) - prev) / total;
    for (b, hv) in hist.iter().enumerate() {
        let next = cumulative(lo + (b + 1) as f64 * width);
        tv += (hv - (next - prev) / total).abs();
        prev = next;
    }
    Ok(0.5 * (tv + outside))
}
