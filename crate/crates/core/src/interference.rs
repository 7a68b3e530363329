//! Two-slit superposition formulas and far-field fringe analysis of
//! simulated screens.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::field::{normal_density, WaveField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitModel {
    pub x1: f64,
    pub x2: f64,
    pub sigma: f64,
    pub k: f64,
}

impl SlitModel {
    pub fn new(x1: f64, x2: f64, sigma: f64, k: f64) -> Result<Self> {
        let m = Self { x1, x2, sigma, k };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(invalid("k", "must be positive"));
        }
        if !(self.x1.is_finite() && self.x2.is_finite()) || self.x1 == self.x2 {
            return Err(invalid("x2", "slit images must be distinct"));
        }
        Ok(())
    }
}

/// Density of slit `l` (1 or 2) at `x`.
pub fn slit_density(model: &SlitModel, l: u8, x: f64) -> Result<f64> {
    let center = match l {
        1 => model.x1,
        2 => model.x2,
        _ => return Err(invalid("l", "slit index must be 1 or 2")),
    };
    Ok(normal_density(x, center, model.sigma))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternPoint {
    pub x: f64,
    pub p: f64,
    /// ½(ρ₁ + ρ₂)
    pub midline: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl PatternPoint {
    /// ½(√ρ₁ − √ρ₂)² and ½(√ρ₁ + √ρ₂)².
    pub fn envelope(&self) -> (f64, f64) {
        let (a, b) = (self.rho1.sqrt(), self.rho2.sqrt());
        (0.5 * (a - b).powi(2), 0.5 * (a + b).powi(2))
    }
}

pub fn pattern(model: &SlitModel, x: f64) -> PatternPoint {
    let rho1 = normal_density(x, model.x1, model.sigma);
    let rho2 = normal_density(x, model.x2, model.sigma);
    let p = 0.5 * (rho1 + rho2 + 2.0 * (rho1 * rho2).sqrt() * (model.k * x).cos());
    PatternPoint {
        x,
        p,
        midline: 0.5 * (rho1 + rho2),
        rho1,
        rho2,
    }
}

/// Pattern sampled on `points` equally spaced abscissae in `[lo, hi]`.
pub fn pattern_table(model: &SlitModel, lo: f64, hi: f64, points: usize) -> Result<Vec<PatternPoint>> {
    if points < 2 || !(hi > lo) {
        return Err(invalid("points", "need at least two points on a non-empty range"));
    }
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| pattern(model, lo + i as f64 * h)).collect())
}

/// Trapezoid integral of the pattern over ±12σ beyond the slit images.
pub fn pattern_integral(model: &SlitModel) -> f64 {
    let lo = model.x1.min(model.x2) - 12.0 * model.sigma;
    let hi = model.x1.max(model.x2) + 12.0 * model.sigma;
    let h = (model.sigma / 40.0).min(TAU / model.k / 64.0);
    let n = ((hi - lo) / h).ceil() as usize;
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| pattern(model, lo + i as f64 * h).p).sum();
    h * (inner + 0.5 * (pattern(model, lo).p + pattern(model, hi).p))
}

/// Upper and lower limits ¼(e^{−S₁} ± e^{−S₂})².
pub fn superposition_limits(s1: f64, s2: f64) -> (f64, f64) {
    let (a, b) = ((-s1).exp(), (-s2).exp());
    (0.25 * (a + b).powi(2), 0.25 * (a - b).powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenGeometry {
    pub screen_x: f64,
    pub wall_x: f64,
    pub slit_separation: f64,
    /// Transverse coordinate halfway between the slits.
    pub midline: f64,
    /// Packet wave number along the propagation axis.
    pub wavenumber: f64,
}

impl ScreenGeometry {
    pub fn distance(&self) -> f64 {
        self.screen_x - self.wall_x
    }

    /// λL/d
    pub fn predicted_spacing(&self) -> f64 {
        TAU / self.wavenumber * self.distance() / self.slit_separation
    }

    /// Wave number of the 1D model across the screen, k·d/L.
    pub fn model_wavenumber(&self) -> f64 {
        self.wavenumber * self.slit_separation / self.distance()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavenumber > 0.0) {
            return Err(invalid("wavenumber", "must be positive"));
        }
        if !(self.slit_separation > 0.0) {
            return Err(invalid("slit_separation", "must be positive"));
        }
        if !(self.distance() > 0.0) {
            return Err(invalid("screen_x", "screen must lie beyond the wall"));
        }
        Ok(())
    }
}

/// Transverse density profile at `screen_x`, interpolated linearly between columns.
pub fn screen_profile(snapshot: &WaveField, screen_x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = snapshot.grid();
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid("screen extraction needs a 2D snapshot".into()));
    }
    let ax = grid.axis(0);
    if !(screen_x >= ax.min && screen_x <= ax.max) {
        return Err(invalid("screen_x", "screen line lies outside the grid"));
    }
    let f = (screen_x - ax.min) / ax.spacing();
    let i = (f.floor() as usize).min(ax.points - 2);
    let t = f - i as f64;
    let ay = grid.axis(1);
    let psi = snapshot.amplitude();
    let profile = (0..ay.points)
        .map(|j| {
            (1.0 - t) * psi[grid.ravel([i, j])].norm_sqr() + t * psi[grid.ravel([i + 1, j])].norm_sqr()
        })
        .collect();
    Ok((ay.coords(), profile))
}

/// Local maxima above `threshold`·max, refined by a parabola through three samples.
pub fn find_peaks(coords: &[f64], values: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) || values.len() < 3 {
        return Vec::new();
    }
    let h = coords[1] - coords[0];
    (1..values.len() - 1)
        .filter(|&j| values[j] > values[j - 1] && values[j] >= values[j + 1] && values[j] >= threshold * max)
        .map(|j| {
            let (a, b, c) = (values[j - 1], values[j], values[j + 1]);
            let curv = a - 2.0 * b + c;
            let off = if curv < 0.0 { (0.5 * (a - c) / curv).clamp(-0.5, 0.5) } else { 0.0 };
            (coords[j] + off * h, b - 0.25 * (a - c) * off)
        })
        .collect()
}

/// Least-squares fit of g(y)·(A + B cos κ(y−μ) + C sin κ(y−μ)), g a Gaussian
/// envelope of centre μ and width w.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeFit {
    pub center: f64,
    pub width: f64,
    pub kappa: f64,
    pub amplitude: f64,
    pub cos_amplitude: f64,
    pub sin_amplitude: f64,
    /// √(B² + C²)/|A|
    pub contrast: f64,
    pub rms_residual: f64,
}

/// Allowed relative excursion of κ from its starting value.
pub const KAPPA_RANGE: f64 = 0.3;

fn linear_part(y: &[f64], p: &[f64], center: f64, width: f64, kappa: f64) -> (DVector<f64>, f64) {
    let n = y.len();
    let design = DMatrix::from_fn(n, 3, |i, c| {
        let u = y[i] - center;
        let g = (-0.5 * (u / width).powi(2)).exp();
        match c {
            0 => g,
            1 => g * (kappa * u).cos(),
            _ => g * (kappa * u).sin(),
        }
    });
    let rhs = DVector::from_column_slice(p);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(3));
    let ssr = (design * &coef - rhs).norm_squared();
    (coef, ssr)
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: F, start: [f64; 3], step: [f64; 3], iters: usize) -> [f64; 3] {
    let mut simplex: Vec<([f64; 3], f64)> = (0..4)
        .map(|i| {
            let mut x = start;
            if i > 0 {
                x[i - 1] += step[i - 1];
            }
            (x, f(&x))
        })
        .collect();
    let along = |a: &[f64; 3], b: &[f64; 3], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[3].1 - simplex[0].1).abs() <= 1e-14 * simplex[0].1.abs().max(1e-300) {
            break;
        }
        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for d in 0..3 {
                centroid[d] += x[d] / 3.0;
            }
        }
        let worst = simplex[3];
        let reflected = along(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                along(&centroid, &reflected, 0.5)
            } else {
                along(&centroid, &worst.0, 0.5)
            };
            let fc = f(&contracted);
            if fc < worst.1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = along(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0
}

/// Fits the fringe model with κ starting at `kappa0` and kept within ±30% of it.
pub fn fit_fringes(coords: &[f64], profile: &[f64], kappa0: f64) -> Result<FringeFit> {
    if coords.len() != profile.len() || coords.len() < 8 {
        return Err(invalid("profile", "need at least 8 matching samples"));
    }
    if !(kappa0 > 0.0 && kappa0.is_finite()) {
        return Err(invalid("kappa", "must be positive"));
    }
    let total: f64 = profile.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoFringes);
    }
    let mean = coords.iter().zip(profile).map(|(y, p)| y * p).sum::<f64>() / total;
    let var = coords.iter().zip(profile).map(|(y, p)| (y - mean).powi(2) * p).sum::<f64>() / total;
    let w0 = var.sqrt().max(coords[1] - coords[0]);
    let unpack = |q: &[f64; 3]| (q[0], q[1].exp(), kappa0 * (1.0 + KAPPA_RANGE * q[2].tanh()));
    let cost = |q: &[f64; 3]| {
        let (c, w, k) = unpack(q);
        linear_part(coords, profile, c, w, k).1
    };
    let best = nelder_mead(cost, [mean, w0.ln(), 0.0], [0.25 * PI / kappa0, 0.2, 0.2], 4000);
    let (center, width, kappa) = unpack(&best);
    let (coef, ssr) = linear_part(coords, profile, center, width, kappa);
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    Ok(FringeFit {
        center,
        width,
        kappa,
        amplitude: a,
        cos_amplitude: b,
        sin_amplitude: c,
        contrast: b.hypot(c) / a.abs(),
        rms_residual: (ssr / profile.len() as f64).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringeReport {
    pub coords: Vec<f64>,
    pub profile: Vec<f64>,
    /// Refined maxima (position, value).
    pub peaks: Vec<(f64, f64)>,
    pub central_peak: f64,
    /// Mean distance from the central maximum to its neighbours.
    pub spacing: f64,
    pub predicted_spacing: f64,
    pub relative_error: f64,
    pub midline_offset: f64,
    pub fit: FringeFit,
}

/// Minimum peak height relative to the profile maximum.
pub const PEAK_THRESHOLD: f64 = 0.05;

/// Fringe analysis of the screen line of a two-slit snapshot.
pub fn compare_simulated(snapshot: &WaveField, geometry: &ScreenGeometry) -> Result<FringeReport> {
    geometry.validate()?;
    let (coords, profile) = screen_profile(snapshot, geometry.screen_x)?;
    let peaks = find_peaks(&coords, &profile, PEAK_THRESHOLD);
    if peaks.len() < 2 {
        return Err(Error::NoFringes);
    }
    let c = (0..peaks.len())
        .max_by(|&a, &b| peaks[a].1.total_cmp(&peaks[b].1))
        .unwrap();
    let neighbours: Vec<f64> = [c.checked_sub(1), Some(c + 1)]
        .into_iter()
        .flatten()
        .filter(|&j| j < peaks.len())
        .map(|j| (peaks[j].0 - peaks[c].0).abs())
        .collect();
    let spacing = neighbours.iter().sum::<f64>() / neighbours.len() as f64;
    let predicted = geometry.predicted_spacing();
    let fit = fit_fringes(&coords, &profile, geometry.model_wavenumber())?;
    Ok(FringeReport {
        central_peak: peaks[c].0,
        midline_offset: peaks[c].0 - geometry.midline,
        spacing,
        predicted_spacing: predicted,
        relative_error: spacing / predicted - 1.0,
        peaks,
        coords,
        profile,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig() -> SlitModel {
        SlitModel::new(0.5, -0.5, 1.0, TAU).unwrap()
    }

    #[test]
    fn slit_density_values() {
        let m = fig();
        assert_relative_eq!(slit_density(&m, 1, 0.5).unwrap(), 0.398_942_280_401_432_7, max_relative = 1e-14);
        assert_relative_eq!(slit_density(&m, 1, 0.0).unwrap(), 0.352_065_326_764_299_5, max_relative = 1e-14);
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert_eq!(slit_density(&m, 1, x).unwrap(), slit_density(&m, 2, -x).unwrap());
        }
        assert!(slit_density(&m, 3, 0.0).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(SlitModel::new(0.5, 0.5, 1.0, 1.0).is_err());
        assert!(SlitModel::new(0.5, -0.5, 0.0, 1.0).is_err());
        assert!(SlitModel::new(0.5, -0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn pattern_values() {
        for k in [0.5, TAU, 17.0] {
            let m = SlitModel { k, ..fig() };
            assert_relative_eq!(pattern(&m, 0.0).p, 0.704_130_653_528_599, max_relative = 1e-14);
        }
        // cos kx = −1 with equal densities gives a zero
        let m = SlitModel { k: PI, ..fig() };
        let at = pattern(&m, 1.0);
        assert_relative_eq!(at.p, 0.5 * (at.rho1.sqrt() - at.rho2.sqrt()).powi(2), epsilon = 1e-16);
        let tiny = SlitModel { k: 1e-12, ..fig() };
        for x in [-1.0, 0.3, 2.0] {
            let a = pattern(&tiny, x);
            assert_relative_eq!(a.p, a.envelope().1, max_relative = 1e-12);
        }
    }

    #[test]
    fn envelope_bounds_hold() {
        let m = SlitModel::new(0.7, -0.2, 0.8, 9.0).unwrap();
        for p in pattern_table(&m, -6.0, 6.0, 2001).unwrap() {
            let (lo, hi) = p.envelope();
            assert!(p.p >= lo - 1e-16 && p.p <= hi + 1e-16);
        }
    }

    #[test]
    fn phase_periodicity() {
        let m = fig();
        let a = pattern(&m, 0.37);
        let (r1, r2) = (a.rho1, a.rho2);
        let at = |phase: f64| 0.5 * (r1 + r2 + 2.0 * (r1 * r2).sqrt() * phase.cos());
        assert_relative_eq!(at(m.k * 0.37), a.p, max_relative = 1e-14);
        assert_relative_eq!(at(m.k * 0.37 + TAU), a.p, max_relative = 1e-12);
    }

    #[test]
    fn integral_regression() {
        // 1 + e^{−1/8} e^{−k²/2}
        let m = SlitModel { k: 1.0, ..fig() };
        assert_relative_eq!(pattern_integral(&m), 1.535_261_428_518_99, max_relative = 1e-10);
        assert_relative_eq!(pattern_integral(&fig()), 1.000_000_002_360_933_4, max_relative = 1e-10);
    }

    #[test]
    fn limits() {
        let (u, l) = superposition_limits(0.3, 0.3);
        assert_relative_eq!(u, (-0.6f64).exp(), max_relative = 1e-15);
        assert_eq!(l, 0.0);
        let (u, l) = superposition_limits(0.0, 2f64.ln());
        assert_relative_eq!(u, 9.0 / 16.0, max_relative = 1e-15);
        assert_relative_eq!(l, 1.0 / 16.0, max_relative = 1e-15);
        let (u, l) = superposition_limits(0.4, 800.0);
        assert_relative_eq!(u, 0.25 * (-0.8f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(l, u, max_relative = 1e-15);
    }

    fn synthetic(kappa: f64, contrast: f64) -> (Vec<f64>, Vec<f64>) {
        let y: Vec<f64> = (0..400).map(|i| -10.0 + 0.05 * i as f64).collect();
        let p = y
            .iter()
            .map(|&v| (-0.5 * ((v - 0.3) / 3.0).powi(2)).exp() * (1.0 + contrast * (kappa * (v - 0.3)).cos()))
            .collect();
        (y, p)
    }

    #[test]
    fn fit_recovers_synthetic_fringes() {
        let (y, p) = synthetic(4.0, 0.8);
        let fit = fit_fringes(&y, &p, 3.6).unwrap();
        assert!((fit.kappa - 4.0).abs() < 1e-5, "{fit:?}");
        assert!((fit.contrast - 0.8).abs() < 1e-5);
        assert!((fit.center - 0.3).abs() < 1e-5);
        let peaks = find_peaks(&y, &p, 0.05);
        let central = peaks.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((central.0 - 0.3).abs() < 2e-3);
    }

    #[test]
    fn fit_flat_envelope_has_low_contrast() {
        let (y, p) = synthetic(4.0, 0.0);
        let fit = fit_fringes(&y, &p, 4.0).unwrap();
        assert!(fit.contrast < 1e-6);
        assert!(fit.kappa >= 4.0 * 0.7 - 1e-12 && fit.kappa <= 4.0 * 1.3 + 1e-12);
    }

    #[test]
    fn geometry_prediction() {
        let g = ScreenGeometry {
            screen_x: 8.0,
            wall_x: -2.0,
            slit_separation: 2.0,
            midline: 0.0,
            wavenumber: 20.0,
        };
        assert_relative_eq!(g.predicted_spacing(), PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(TAU / g.model_wavenumber(), g.predicted_spacing(), max_relative = 1e-15);
        assert!(ScreenGeometry { screen_x: -3.0, ..g }.validate().is_err());
    }
}
