//! Complex wavefunctions sampled on a [`Grid`], canonical initial states,
//! norms and superposition.
//!
//! Simulation units default to ħ = m = 1.

use std::f64::consts::{PI, TAU};

use log::warn;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// Initial states should decay below this density fraction at the boundary.
pub const BOUNDARY_DECAY: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct WaveField {
    grid: Grid,
    amplitude: Vec<C64>,
    time: f64,
    hbar: f64,
    mass: f64,
}

impl WaveField {
    pub fn new(grid: Grid, amplitude: Vec<C64>, time: f64) -> Result<Self> {
        if amplitude.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for {} grid points",
                amplitude.len(),
                grid.len()
            )));
        }
        if amplitude.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("amplitude", "non-finite value"));
        }
        Ok(Self {
            grid,
            amplitude,
            time,
            hbar: 1.0,
            mass: 1.0,
        })
    }

    pub fn with_units(mut self, hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid("hbar", "must be positive"));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("mass", "must be positive"));
        }
        self.hbar = hbar;
        self.mass = mass;
        Ok(self)
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub(crate) fn replace_amplitude(&self, amplitude: Vec<C64>, time: f64) -> Self {
        debug_assert_eq!(amplitude.len(), self.amplitude.len());
        Self {
            grid: self.grid.clone(),
            amplitude,
            time,
            hbar: self.hbar,
            mass: self.mass,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[C64] {
        &self.amplitude
    }

    pub fn into_amplitude(self) -> Vec<C64> {
        self.amplitude
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    /// Rescale to unit norm.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroField);
        }
        let amplitude = self.amplitude.iter().map(|z| z / n).collect();
        Ok(self.replace_amplitude(amplitude, self.time))
    }

    /// Largest boundary density relative to the peak density.
    pub fn boundary_fraction(&self) -> f64 {
        let peak = self.amplitude.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = (0..self.grid.len())
            .filter(|&k| self.grid.is_boundary(k))
            .map(|k| self.amplitude[k].norm_sqr())
            .fold(0.0, f64::max);
        edge / peak
    }

    /// Multiply by a global phase `e^{iα}`.
    pub fn with_global_phase(&self, alpha: f64) -> Self {
        let f = C64::from_polar(1.0, alpha);
        self.replace_amplitude(self.amplitude.iter().map(|z| z * f).collect(), self.time)
    }

    fn warn_if_leaking(&self, what: &str) {
        let frac = self.boundary_fraction();
        if frac > BOUNDARY_DECAY {
            warn!("{what}: boundary density fraction {frac:.2e} exceeds {BOUNDARY_DECAY:e}");
        }
    }
}

pub fn norm(field: &WaveField) -> f64 {
    let rho: Vec<f64> = field.amplitude.iter().map(|z| z.norm_sqr()).collect();
    field.grid.integrate(&rho).sqrt()
}

/// Trapezoid-rule ⟨a|b⟩.
pub fn inner_product(a: &WaveField, b: &WaveField) -> Result<C64> {
    a.grid.check_same(&b.grid)?;
    let w = a.grid.weights();
    Ok(a.amplitude
        .iter()
        .zip(&b.amplitude)
        .zip(&w)
        .map(|((x, y), w)| x.conj() * y * w)
        .sum())
}

/// |⟨a|b⟩|² / (‖a‖² ‖b‖²).
pub fn fidelity(a: &WaveField, b: &WaveField) -> Result<f64> {
    let ip = inner_product(a, b)?;
    Ok(ip.norm_sqr() / (norm(a).powi(2) * norm(b).powi(2)))
}

fn check_vector(name: &'static str, v: &[f64], dims: usize) -> Result<()> {
    if v.len() != dims {
        return Err(invalid(name, format!("expected {dims} components, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(name, "non-finite component"));
    }
    Ok(())
}

/// Normalised Gaussian packet whose density is the isotropic normal density
/// with standard deviation `sigma`, carrying the plane-wave phase
/// `k·(x − center)`.
pub fn gaussian_packet(
    grid: &Grid,
    center: &[f64],
    sigma: f64,
    wavevector: &[f64],
) -> Result<WaveField> {
    gaussian_packet_axes(grid, center, &vec![sigma; grid.dims()], wavevector)
}

/// As [`gaussian_packet`] with one standard deviation per axis.
pub fn gaussian_packet_axes(
    grid: &Grid,
    center: &[f64],
    sigmas: &[f64],
    wavevector: &[f64],
) -> Result<WaveField> {
    let dims = grid.dims();
    check_vector("sigma", sigmas, dims)?;
    if !sigmas.iter().all(|s| *s > 0.0 && s.is_finite()) {
        return Err(invalid("sigma", "must be positive"));
    }
    check_vector("center", center, dims)?;
    check_vector("wavevector", wavevector, dims)?;
    for (k, a) in grid.axes().iter().enumerate() {
        if center[k] - 4.0 * sigmas[k] < a.min || center[k] + 4.0 * sigmas[k] > a.max {
            warn!("gaussian packet lies within 4 sigma of the boundary on axis {k}");
        }
    }
    let amp0: f64 = sigmas.iter().map(|s| (TAU * s * s).powf(-0.25)).product();
    let amplitude = grid
        .points()
        .map(|p| {
            let (mut e, mut phase) = (0.0, 0.0);
            for k in 0..dims {
                let d = p[k] - center[k];
                e += d * d / (4.0 * sigmas[k] * sigmas[k]);
                phase += wavevector[k] * d;
            }
            C64::from_polar(amp0 * (-e).exp(), phase)
        })
        .collect();
    let field = WaveField::new(grid.clone(), amplitude, 0.0)?.normalized()?;
    field.warn_if_leaking("gaussian_packet");
    Ok(field)
}

/// Harmonic-oscillator ground state (a Gaussian with σ² = ħ/(2mω)).
pub fn harmonic_ground_state(
    grid: &Grid,
    omega: f64,
    center: &[f64],
    hbar: f64,
    mass: f64,
) -> Result<WaveField> {
    if !(omega > 0.0) {
        return Err(invalid("omega", "must be positive"));
    }
    let sigma = (hbar / (2.0 * mass * omega)).sqrt();
    gaussian_packet(grid, center, sigma, &vec![0.0; grid.dims()])?.with_units(hbar, mass)
}

/// Unit-norm plane wave with phase `k·x`.
pub fn plane_wave(grid: &Grid, wavevector: &[f64]) -> Result<WaveField> {
    check_vector("wavevector", wavevector, grid.dims())?;
    for (k, a) in grid.axes().iter().enumerate() {
        let cycles = wavevector[k] * a.period() / TAU;
        if (cycles - cycles.round()).abs() > 1e-9 {
            warn!("plane wave is not commensurate with the grid period on axis {k}");
        }
    }
    let amp = 1.0 / grid.volume().sqrt();
    let amplitude = grid
        .points()
        .map(|p| {
            let phase: f64 = (0..grid.dims()).map(|k| wavevector[k] * p[k]).sum();
            C64::from_polar(amp, phase)
        })
        .collect();
    WaveField::new(grid.clone(), amplitude, 0.0)?.normalized()
}

/// Unit-norm winding-one vortex `(x + iy) e^{−r²/(2w²)}` about `center`.
pub fn vortex(grid: &Grid, center: &[f64], width: f64) -> Result<WaveField> {
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid("vortex states need a 2D grid".into()));
    }
    check_vector("center", center, 2)?;
    if !(width > 0.0) {
        return Err(invalid("width", "must be positive"));
    }
    let amplitude = grid
        .points()
        .map(|p| {
            let (x, y) = (p[0] - center[0], p[1] - center[1]);
            C64::new(x, y) * (-(x * x + y * y) / (2.0 * width * width)).exp()
        })
        .collect();
    let field = WaveField::new(grid.clone(), amplitude, 0.0)?.normalized()?;
    field.warn_if_leaking("vortex");
    Ok(field)
}

/// Pointwise weighted sum, renormalised to unit norm.
pub fn superpose(fields: &[WaveField], weights: &[C64]) -> Result<WaveField> {
    let first = fields.first().ok_or(Error::ZeroField)?;
    if fields.len() != weights.len() {
        return Err(invalid(
            "weights",
            format!("{} weights for {} fields", weights.len(), fields.len()),
        ));
    }
    for f in &fields[1..] {
        first.grid.check_same(&f.grid)?;
        if f.time != first.time {
            return Err(Error::GridMismatch(format!(
                "time stamps differ: {} vs {}",
                first.time, f.time
            )));
        }
    }
    let mut sum = vec![C64::default(); first.grid.len()];
    for (f, w) in fields.iter().zip(weights) {
        for (s, a) in sum.iter_mut().zip(&f.amplitude) {
            *s += w * a;
        }
    }
    if sum.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroField);
    }
    first.replace_amplitude(sum, first.time).normalized()
}

/// Normal density of mean `center` and standard deviation `sigma`.
pub fn normal_density(x: f64, center: f64, sigma: f64) -> f64 {
    (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}
