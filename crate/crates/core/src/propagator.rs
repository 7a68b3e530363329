//! Lattice path integrals: M short-time kernels composed by quadrature on a
//! uniform grid, with the slice duration optionally rotated δt → δt·e^{−iθ}.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::evolve::{evolve, EvolutionPlan};
use crate::field::WaveField;
use crate::grid::Grid;
use crate::potential::{build_potential, PotentialSpec};

pub const MAX_THETA: f64 = 0.2;
/// Edge-to-peak density ratio above which the quadrature grid is rejected.
pub const BOUNDARY_LIMIT: f64 = 1e-6;
/// Kernel magnitude at the aliasing distance above which the grid is rejected.
pub const ALIAS_LIMIT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Rule {
    /// U sampled at the earlier point of each slice.
    #[default]
    Endpoint,
    /// Mean of the two endpoint samples of each slice.
    Midpoint,
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "endpoint" => Ok(Self::Endpoint),
            "midpoint" => Ok(Self::Midpoint),
            _ => Err(invalid("rule", format!("unknown rule '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    /// Number of slices M; M − 1 intermediate integrations.
    pub slices: usize,
    pub total_time: f64,
    pub grid: Grid,
    pub theta: f64,
    pub rule: Rule,
    pub hbar: f64,
    pub mass: f64,
}

impl LatticeSpec {
    pub fn new(slices: usize, total_time: f64, grid: Grid, theta: f64) -> Result<Self> {
        let s = Self {
            slices,
            total_time,
            grid,
            theta,
            rule: Rule::Endpoint,
            hbar: 1.0,
            mass: 1.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_units(mut self, hbar: f64, mass: f64) -> Result<Self> {
        self.hbar = hbar;
        self.mass = mass;
        self.validate()?;
        Ok(self)
    }

    pub fn with_slices(&self, slices: usize, total_time: f64) -> Result<Self> {
        let s = Self {
            slices,
            total_time,
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices == 0 {
            return Err(invalid("M", "must be at least 1"));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(invalid("T", "must be positive"));
        }
        if !(0.0..=MAX_THETA).contains(&self.theta) {
            return Err(invalid("theta", format!("must lie in [0, {MAX_THETA}]")));
        }
        if self.grid.dims() != 1 {
            return Err(Error::InvalidGrid("lattice propagator needs a 1D grid".into()));
        }
        if !(self.hbar > 0.0 && self.mass > 0.0) {
            return Err(invalid("mass", "hbar and mass must be positive"));
        }
        Ok(())
    }

    pub fn delta_t(&self) -> f64 {
        self.total_time / self.slices as f64
    }

    /// δt·e^{−iθ}
    pub fn tau(&self) -> C64 {
        C64::from_polar(self.delta_t(), -self.theta)
    }
}

/// Value of a lattice-compatible potential at `x`.
pub fn potential_at(potential: &PotentialSpec, x: f64) -> Result<f64> {
    match potential {
        PotentialSpec::Free => Ok(0.0),
        PotentialSpec::Constant(c) => Ok(*c),
        PotentialSpec::Harmonic { omega, mass, center } => {
            if center.len() != 1 {
                return Err(invalid("center", "expected 1 component"));
            }
            Ok(0.5 * mass * omega * omega * (x - center[0]).powi(2))
        }
        other => Err(invalid(
            "potential",
            format!("'{}' is not supported by the lattice propagator", other.name()),
        )),
    }
}

fn prefactor(tau: C64, hbar: f64, mass: f64) -> C64 {
    (C64::new(0.0, 2.0 * PI * hbar) * tau / mass).sqrt().inv()
}

/// (2πiħτ/m)^{−1/2} exp{(i/ħ)[m(Δx)²/2τ − U τ]}
pub fn short_time_kernel(x_next: f64, x_prev: f64, u: f64, tau: C64, hbar: f64, mass: f64) -> C64 {
    let dx = x_next - x_prev;
    let action = mass * dx * dx / (2.0 * tau) - u * tau;
    prefactor(tau, hbar, mass) * (C64::i() * action / hbar).exp()
}

/// Exact propagator at complex time `tau` where one is known.
pub fn exact_kernel(potential: &PotentialSpec, x_end: f64, x_start: f64, tau: C64, hbar: f64, mass: f64) -> Result<C64> {
    match potential {
        PotentialSpec::Free => Ok(short_time_kernel(x_end, x_start, 0.0, tau, hbar, mass)),
        PotentialSpec::Constant(c) => Ok(short_time_kernel(x_end, x_start, *c, tau, hbar, mass)),
        PotentialSpec::Harmonic {
            omega,
            mass: m_pot,
            center,
        } if center.len() == 1 => {
            let w = omega * (m_pot / mass).sqrt();
            if !(w * tau.re < PI) {
                return Err(Error::NoOracle);
            }
            let (a, b) = (x_start - center[0], x_end - center[0]);
            let (s, c) = ((w * tau).sin(), (w * tau).cos());
            let pref = (mass * w / (C64::new(0.0, 2.0 * PI * hbar) * s)).sqrt();
            let phase = C64::i() * mass * w * ((a * a + b * b) * c - 2.0 * a * b) / (2.0 * hbar * s);
            Ok(pref * phase.exp())
        }
        _ => Err(Error::NoOracle),
    }
}

struct Lattice {
    n: usize,
    weights: Vec<f64>,
    coords: Vec<f64>,
    kernel_hat: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    nfft: usize,
    /// Per-point factor before each quadrature (and after it for the midpoint rule).
    before: Vec<C64>,
    after: Option<Vec<C64>>,
    tau: C64,
}

impl Lattice {
    fn new(spec: &LatticeSpec, potential: &PotentialSpec) -> Result<Self> {
        spec.validate()?;
        let grid = &spec.grid;
        let ax = grid.axis(0);
        let n = ax.points;
        let h = ax.spacing();
        let tau = spec.tau();
        let (hbar, mass) = (spec.hbar, spec.mass);
        // kernel phase must be resolved wherever its magnitude matters
        let d_alias = PI * hbar * tau.norm() / (mass * h);
        let damping = (-mass * spec.theta.sin() * d_alias * d_alias / (2.0 * hbar * tau.norm())).exp();
        if ax.span() > d_alias && damping > ALIAS_LIMIT {
            return Err(invalid(
                "dx",
                format!(
                    "kernel phase under-resolved beyond {d_alias:.3e}; refine the grid, raise M or theta"
                ),
            ));
        }
        let coords = ax.coords();
        let weights = grid.weights();
        let nfft = (3 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nfft);
        let inverse = planner.plan_fft_inverse(nfft);
        let mut kernel_hat = vec![C64::new(0.0, 0.0); nfft];
        for (i, d) in (-(n as i64 - 1)..n as i64).enumerate() {
            kernel_hat[i] = short_time_kernel(d as f64 * h, 0.0, 0.0, tau, hbar, mass);
        }
        forward.process(&mut kernel_hat);
        let u: Vec<f64> = coords.iter().map(|&x| potential_at(potential, x)).collect::<Result<_>>()?;
        let phase = |u: f64, share: f64| (-C64::i() * u * share * tau / hbar).exp();
        let (before, after) = match spec.rule {
            Rule::Endpoint => (u.iter().map(|&v| phase(v, 1.0)).collect(), None),
            Rule::Midpoint => {
                let half: Vec<C64> = u.iter().map(|&v| phase(v, 0.5)).collect();
                (half.clone(), Some(half))
            }
        };
        Ok(Self {
            n,
            weights,
            coords,
            kernel_hat,
            forward,
            inverse,
            nfft,
            before,
            after,
            tau,
        })
    }

    /// ψ(x) ← Σ_j w_j K(x − x_j) f(x_j) ψ(x_j)
    fn slice(&self, psi: &mut [C64]) {
        let mut buf = vec![C64::new(0.0, 0.0); self.nfft];
        for j in 0..self.n {
            buf[j] = psi[j] * self.before[j] * self.weights[j];
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.nfft as f64;
        for i in 0..self.n {
            psi[i] = buf[i + self.n - 1] * scale;
            if let Some(a) = &self.after {
                psi[i] *= a[i];
            }
        }
    }

    /// Σ_j w_j K(x − x_j) f(x_j) ψ(x_j) at one off-grid point.
    fn evaluate(&self, psi: &[C64], x: f64, u_x: f64, spec: &LatticeSpec) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..self.n {
            let k = short_time_kernel(x, self.coords[j], 0.0, self.tau, spec.hbar, spec.mass);
            acc += self.weights[j] * k * self.before[j] * psi[j];
        }
        if self.after.is_some() {
            acc *= (-C64::i() * 0.5 * u_x * self.tau / spec.hbar).exp();
        }
        acc
    }

    /// First slice from a point source at `x0`.
    fn point_source(&self, x0: f64, u0: f64, spec: &LatticeSpec) -> Vec<C64> {
        let (share_src, midpoint) = match spec.rule {
            Rule::Endpoint => (1.0, false),
            Rule::Midpoint => (0.5, true),
        };
        let src = (-C64::i() * u0 * share_src * self.tau / spec.hbar).exp();
        (0..self.n)
            .map(|i| {
                let k = short_time_kernel(self.coords[i], x0, 0.0, self.tau, spec.hbar, spec.mass) * src;
                if midpoint {
                    k * self.after.as_ref().unwrap()[i]
                } else {
                    k
                }
            })
            .collect()
    }
}

fn boundary_ratio(psi: &[C64]) -> f64 {
    let peak = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let edge = psi[0].norm_sqr().max(psi[psi.len() - 1].norm_sqr());
    if peak > 0.0 {
        edge / peak
    } else {
        0.0
    }
}

fn check_boundary(psi: &[C64]) -> Result<()> {
    let r = boundary_ratio(psi);
    if r > BOUNDARY_LIMIT {
        return Err(Error::QuadratureTooSmall(r));
    }
    Ok(())
}

fn point_row(lat: &Lattice, spec: &LatticeSpec, potential: &PotentialSpec, x_start: f64, slices: usize) -> Result<Vec<C64>> {
    let mut psi = lat.point_source(x_start, potential_at(potential, x_start)?, spec);
    check_boundary(&psi)?;
    for _ in 1..slices {
        lat.slice(&mut psi);
        check_boundary(&psi)?;
    }
    Ok(psi)
}

/// G(x_end, x_start; T) on the lattice.
pub fn lattice_propagator(spec: &LatticeSpec, potential: &PotentialSpec, x_start: f64, x_end: f64) -> Result<C64> {
    spec.validate()?;
    let u0 = potential_at(potential, x_start)?;
    let u1 = potential_at(potential, x_end)?;
    if spec.slices == 1 {
        let tau = spec.tau();
        let u = match spec.rule {
            Rule::Endpoint => u0,
            Rule::Midpoint => 0.5 * (u0 + u1),
        };
        return Ok(short_time_kernel(x_end, x_start, u, tau, spec.hbar, spec.mass));
    }
    let lat = Lattice::new(spec, potential)?;
    let psi = point_row(&lat, spec, potential, x_start, spec.slices - 1)?;
    Ok(lat.evaluate(&psi, x_end, u1, spec))
}

/// Applies the M-slice lattice kernel to a wavefunction on the lattice grid.
pub fn apply_lattice(spec: &LatticeSpec, potential: &PotentialSpec, initial: &WaveField) -> Result<WaveField> {
    spec.validate()?;
    spec.grid.check_same(initial.grid())?;
    let lat = Lattice::new(spec, potential)?;
    let mut psi = initial.amplitude().to_vec();
    for _ in 0..spec.slices {
        lat.slice(&mut psi);
        check_boundary(&psi)?;
    }
    WaveField::new(spec.grid.clone(), psi, initial.time() + spec.total_time)?.with_units(spec.hbar, spec.mass)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub slices: usize,
    pub value: C64,
    pub exact: C64,
    pub error: f64,
    /// log(e_{i−1}/e_i)/log(M_i/M_{i−1}); none on the first row.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log δt.
    pub fitted_order: Option<f64>,
}

impl ConvergenceTable {
    /// e(M)/e(2M) for consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].error / w[1].error).collect()
    }
}

/// Relative error against the exact kernel for each M in `slices`.
pub fn convergence_study(
    base: &LatticeSpec,
    potential: &PotentialSpec,
    x_start: f64,
    x_end: f64,
    total_time: f64,
    slices: &[usize],
) -> Result<ConvergenceTable> {
    if slices.is_empty() {
        return Err(invalid("M", "empty list"));
    }
    if slices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("M", "list must be strictly increasing"));
    }
    let rotated = C64::from_polar(total_time, -base.theta);
    let exact = exact_kernel(potential, x_end, x_start, rotated, base.hbar, base.mass)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(slices.len());
    for &m in slices {
        let spec = base.with_slices(m, total_time)?;
        let value = lattice_propagator(&spec, potential, x_start, x_end)?;
        let error = (value - exact).norm() / exact.norm();
        let order = rows
            .last()
            .map(|p| (p.error / error).ln() / (m as f64 / p.slices as f64).ln());
        rows.push(ConvergenceRow {
            slices: m,
            value,
            exact,
            error,
            order,
        });
    }
    let fitted_order = (rows.len() >= 2).then(|| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| ((total_time / r.slices as f64).ln(), r.error.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ConvergenceTable { rows, fitted_order })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemigroupDefect {
    pub direct: C64,
    pub composed: C64,
    pub first_slices: usize,
    pub defect: f64,
}

/// Compares G(T) with the quadrature composition of G(T − t_mid) and G(t_mid),
/// each on its own slice count.
pub fn semigroup_check(
    spec: &LatticeSpec,
    potential: &PotentialSpec,
    x_start: f64,
    x_end: f64,
    t_mid: f64,
) -> Result<SemigroupDefect> {
    spec.validate()?;
    let total = spec.total_time;
    if !(t_mid > 0.0 && t_mid < total) {
        return Err(invalid("t_mid", "must lie strictly inside (0, T)"));
    }
    if spec.slices < 2 {
        return Err(invalid("M", "composition needs at least 2 slices"));
    }
    let m1 = ((spec.slices as f64 * t_mid / total).round() as usize).clamp(1, spec.slices - 1);
    let m2 = spec.slices - m1;
    let direct = lattice_propagator(spec, potential, x_start, x_end)?;
    let first = spec.with_slices(m1, t_mid)?;
    let second = spec.with_slices(m2, total - t_mid)?;
    let lat1 = Lattice::new(&first, potential)?;
    let lat2 = Lattice::new(&second, potential)?;
    // G(t_mid; ·, x_start) on the grid, then m2 further slices
    let mut psi = point_row(&lat1, &first, potential, x_start, m1)?;
    for _ in 1..m2 {
        lat2.slice(&mut psi);
        check_boundary(&psi)?;
    }
    let composed = lat2.evaluate(&psi, x_end, potential_at(potential, x_end)?, &second);
    Ok(SemigroupDefect {
        direct,
        composed,
        first_slices: m1,
        defect: (direct - composed).norm() / direct.norm(),
    })
}

#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub lattice: WaveField,
    pub spectral: WaveField,
    pub l2: f64,
}

/// Split-operator steps used for the spectral side of [`cross_check`].
pub const CROSS_CHECK_STEPS: usize = 2000;

/// L² distance between the lattice-applied and split-operator evolutions of `initial`.
pub fn cross_check(spec: &LatticeSpec, potential: &PotentialSpec, initial: &WaveField) -> Result<CrossCheck> {
    let lattice = apply_lattice(spec, potential, initial)?;
    let u = build_potential(&spec.grid, potential)?;
    let start = initial.clone().with_units(spec.hbar, spec.mass)?;
    let plan = EvolutionPlan::new(spec.total_time / CROSS_CHECK_STEPS as f64, CROSS_CHECK_STEPS, CROSS_CHECK_STEPS)?;
    let spectral = evolve(&start, &u, &plan)?.snapshots.pop().ok_or(Error::ZeroField)?;
    let diff: Vec<f64> = lattice
        .amplitude()
        .iter()
        .zip(spectral.amplitude())
        .map(|(a, b)| (a - b).norm_sqr())
        .collect();
    let l2 = spec.grid.integrate(&diff).sqrt();
    Ok(CrossCheck { lattice, spectral, l2 })
}
