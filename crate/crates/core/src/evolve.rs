//! Split-operator propagation of the time-dependent Schrödinger equation.
//!
//! One step is the Strang product
//! `e^{−iU dt/2ħ} · F⁻¹ e^{−iħk² dt/2m} F · e^{−iU dt/2ħ}`.

use log::warn;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::field::WaveField;
use crate::grid::Grid;
use crate::potential::Potential;
use crate::spectral::{wavenumbers, Backend, Differentiator, FftGrid};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    #[default]
    Strang,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("strang")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionPlan {
    pub dt: f64,
    pub steps: usize,
    pub snapshot_stride: usize,
    pub method: Method,
}

impl EvolutionPlan {
    pub fn new(dt: f64, steps: usize, snapshot_stride: usize) -> Result<Self> {
        let plan = Self {
            dt,
            steps,
            snapshot_stride,
            method: Method::Strang,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Advisory bound dt ≤ h²m/(ħπ) on the finest axis.
    pub fn stability_limit(grid: &Grid, hbar: f64, mass: f64) -> f64 {
        grid.min_spacing().powi(2) * mass / (hbar * std::f64::consts::PI)
    }

    pub fn within_stability_limit(&self, grid: &Grid, hbar: f64, mass: f64) -> bool {
        self.dt <= Self::stability_limit(grid, hbar, mass)
    }

    pub fn final_time(&self, t0: f64) -> f64 {
        t0 + self.steps as f64 * self.dt
    }

    /// Number of snapshots [`evolve`] returns, the initial state included.
    pub fn snapshot_count(&self) -> usize {
        1 + self.steps.div_ceil(self.snapshot_stride)
    }
}

/// Precomputed phase factors for repeated steps of one size.
pub struct SplitStepper {
    grid: Grid,
    fft: FftGrid,
    kinetic: Vec<C64>,
    half_potential: Vec<C64>,
    dt: f64,
}

impl SplitStepper {
    pub fn new(potential: &Potential, dt: f64, hbar: f64, mass: f64) -> Self {
        let grid = potential.grid().clone();
        let [n0, n1] = grid.shape();
        let k0 = wavenumbers(n0, grid.spacing(0));
        let k1 = if grid.dims() == 2 {
            wavenumbers(n1, grid.spacing(1))
        } else {
            vec![0.0]
        };
        let a = -hbar * dt / (2.0 * mass);
        let mut kinetic = Vec::with_capacity(grid.len());
        for &ka in &k0 {
            for &kb in &k1 {
                kinetic.push(C64::from_polar(1.0, a * (ka * ka + kb * kb)));
            }
        }
        let half_potential = potential
            .values()
            .iter()
            .map(|u| C64::from_polar(1.0, -u * dt / (2.0 * hbar)))
            .collect();
        Self {
            fft: FftGrid::new(&grid),
            grid,
            kinetic,
            half_potential,
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `psi` in place by one step.
    pub fn advance(&self, psi: &mut [C64]) {
        for (z, h) in psi.iter_mut().zip(&self.half_potential) {
            *z *= h;
        }
        self.fft.forward(psi);
        for (z, k) in psi.iter_mut().zip(&self.kinetic) {
            *z *= k;
        }
        self.fft.inverse(psi);
        for (z, h) in psi.iter_mut().zip(&self.half_potential) {
            *z *= h;
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// One Strang step of size `dt` (negative `dt` steps backwards).
pub fn step(field: &WaveField, potential: &Potential, dt: f64) -> Result<WaveField> {
    field.grid().check_same(potential.grid())?;
    if !dt.is_finite() || dt == 0.0 {
        return Err(invalid("dt", "must be finite and non-zero"));
    }
    let stepper = SplitStepper::new(potential, dt, field.hbar(), field.mass());
    let mut psi = field.amplitude().to_vec();
    stepper.advance(&mut psi);
    Ok(field.replace_amplitude(psi, field.time() + dt))
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub snapshots: Vec<WaveField>,
    /// Largest |‖ψ‖ − ‖ψ₀‖| seen at any snapshot.
    pub norm_drift: f64,
    pub plan: EvolutionPlan,
}

impl Evolution {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(WaveField::time).collect()
    }
}

/// Propagate and keep every `snapshot_stride`-th step plus the first and last.
pub fn evolve(field: &WaveField, potential: &Potential, plan: &EvolutionPlan) -> Result<Evolution> {
    plan.validate()?;
    field.grid().check_same(potential.grid())?;
    if !plan.within_stability_limit(field.grid(), field.hbar(), field.mass()) {
        warn!(
            "dt = {} exceeds the advisory limit {:.3e}",
            plan.dt,
            EvolutionPlan::stability_limit(field.grid(), field.hbar(), field.mass())
        );
    }
    let stepper = SplitStepper::new(potential, plan.dt, field.hbar(), field.mass());
    let n0 = field.norm();
    let t0 = field.time();
    let mut psi = field.amplitude().to_vec();
    let mut snapshots = vec![field.clone()];
    let mut drift: f64 = 0.0;
    for n in 1..=plan.steps {
        stepper.advance(&mut psi);
        if n % plan.snapshot_stride == 0 || n == plan.steps {
            // t₀ + n·dt rather than accumulated sums keeps time stamps exact
            let snap = field.replace_amplitude(psi.clone(), t0 + n as f64 * plan.dt);
            drift = drift.max((snap.norm() - n0).abs());
            snapshots.push(snap);
        }
    }
    Ok(Evolution {
        snapshots,
        norm_drift: drift,
        plan: plan.clone(),
    })
}

/// ⟨Ψ|H|Ψ⟩/⟨Ψ|Ψ⟩ with a spectral kinetic term.
pub fn energy(field: &WaveField, potential: &Potential) -> Result<f64> {
    field.grid().check_same(potential.grid())?;
    let d = Differentiator::new(field.grid(), Backend::Spectral);
    let psi = field.amplitude();
    let lap = d.laplacian(psi);
    let c = field.hbar() * field.hbar() / (2.0 * field.mass());
    let (mut num, mut den) = (0.0, 0.0);
    for ((z, l), u) in psi.iter().zip(&lap).zip(potential.values()) {
        num += (z.conj() * (-c * l)).re + u * z.norm_sqr();
        den += z.norm_sqr();
    }
    Ok(num / den)
}
