//! Complex action 𝒥 = J + iħS_Q, the reverse-velocity constant s, the
//! imaginary broadening radius, the complexified Hamilton–Jacobi residual,
//! circulation, and the Taylor-expansion probes.
//!
//! The probes and the ṅ check are diagnostics: they return paired fields
//! and never decide pass or fail.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;

use crate::bohm::{log_time_derivative, residuals, BohmFields, DecomposeOptions};
use crate::constants::{PhysicalConstants, FINE_STRUCTURE};
use crate::error::{invalid, Error, Result};
use crate::field::WaveField;
use crate::grid::Grid;
use crate::potential::Potential;

/// Bohr radius and atomic unit of time, for converting s to simulation units.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const ATOMIC_TIME: f64 = 2.418_884_326_585_7e-17;

/// s = 4πε₀ħ/e² in s/m.
pub fn reverse_velocity_constant(c: &PhysicalConstants) -> f64 {
    4.0 * PI * c.vacuum_permittivity * c.hbar / c.elementary_charge.powi(2)
}

/// Radius sħ/(2m) of the imaginary broadening, in metres.
pub fn epsilon_radius(c: &PhysicalConstants, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(invalid("mass", "must be positive"));
    }
    Ok(reverse_velocity_constant(c) * c.hbar / (2.0 * mass))
}

/// s expressed in a unit system with the given length and time units.
pub fn reverse_velocity_in_units(c: &PhysicalConstants, length_unit: f64, time_unit: f64) -> f64 {
    reverse_velocity_constant(c) * length_unit / time_unit
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniversalConstants {
    pub s: f64,
    pub s_times_c: f64,
    /// s·c·α with the tabulated α; 1 for consistent inputs.
    pub s_c_alpha: f64,
}

pub fn universal_constants(c: &PhysicalConstants) -> UniversalConstants {
    let s = reverse_velocity_constant(c);
    UniversalConstants {
        s,
        s_times_c: s * c.speed_of_light,
        s_c_alpha: s * c.speed_of_light * FINE_STRUCTURE,
    }
}

#[derive(Clone, Debug)]
pub struct ComplexifiedState {
    pub grid: Grid,
    pub hbar: f64,
    pub mask: Vec<bool>,
    pub j: Vec<f64>,
    pub s_q: Vec<f64>,
    /// 𝒥 = J + iħS_Q
    pub complex_action: Vec<C64>,
    /// 𝒫 = ∇J + iħ∇S_Q
    pub complex_momentum: Vec<Vec<C64>>,
}

impl ComplexifiedState {
    /// Ψ = exp(i𝒥/ħ) on masked points.
    pub fn wavefunction(&self, time: f64, mass: f64) -> Result<WaveField> {
        let amp = self
            .complex_action
            .iter()
            .zip(&self.mask)
            .map(|(a, &m)| {
                if m {
                    (C64::i() * a / self.hbar).exp()
                } else {
                    C64::default()
                }
            })
            .collect();
        WaveField::new(self.grid.clone(), amp, time)?.with_units(self.hbar, mass)
    }

    /// max |e^{−Im𝒥/ħ} − |Ψ|| over masked points.
    pub fn amplitude_consistency(&self, field: &WaveField) -> f64 {
        self.complex_action
            .iter()
            .zip(field.amplitude())
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((a, z), _)| ((-a.im / self.hbar).exp() - z.norm()).abs())
            .fold(0.0, f64::max)
    }
}

pub fn complex_action(b: &BohmFields) -> Result<ComplexifiedState> {
    let j = b.action_values()?.to_vec();
    let hbar = b.hbar;
    let complex_action = j
        .iter()
        .zip(&b.s_q)
        .map(|(&j, &s)| C64::new(j, hbar * s))
        .collect();
    let complex_momentum = b
        .grad_j
        .iter()
        .zip(&b.grad_s_q)
        .map(|(p, s)| p.iter().zip(s).map(|(&p, &s)| C64::new(p, hbar * s)).collect())
        .collect();
    Ok(ComplexifiedState {
        grid: b.grid.clone(),
        hbar,
        mask: b.mask.clone(),
        j,
        s_q: b.s_q.clone(),
        complex_action,
        complex_momentum,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityDefect {
    pub max_defect: f64,
    /// Largest |RHS| over masked points.
    pub scale: f64,
}

/// Compares (∇𝒥)²/2m, squared as complex numbers, with the expanded
/// (∇J)²/2m + iħ(∇J·∇S_Q)/m − ħ²(∇S_Q)²/2m.
pub fn gradient_square_identity(b: &BohmFields) -> IdentityDefect {
    let (hbar, m) = (b.hbar, b.mass);
    let mut out = IdentityDefect {
        max_defect: 0.0,
        scale: 0.0,
    };
    for k in 0..b.rho.len() {
        if !b.mask[k] {
            continue;
        }
        let mut lhs = C64::default();
        let (mut pj2, mut cross, mut ps2) = (0.0, 0.0, 0.0);
        for a in 0..b.grad_j.len() {
            let (p, s) = (b.grad_j[a][k], b.grad_s_q[a][k]);
            let big_p = C64::new(p, hbar * s);
            lhs += big_p * big_p;
            pj2 += p * p;
            cross += p * s;
            ps2 += s * s;
        }
        lhs /= 2.0 * m;
        let rhs = C64::new(pj2 / (2.0 * m) - hbar * hbar * ps2 / (2.0 * m), hbar * cross / m);
        out.max_defect = out.max_defect.max((lhs - rhs).norm());
        out.scale = out.scale.max(rhs.norm());
    }
    out
}

/// Direction of the imaginary broadening.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Direction {
    /// ∇U/|∇U| where ∇U ≠ 0, undefined elsewhere.
    #[default]
    Auto,
    Fixed(Vec<f64>),
}

/// Unit vector field n and the mask of points where it is defined.
pub fn direction_field(potential: &Potential, direction: &Direction) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let grid = potential.grid();
    let dims = grid.dims();
    let n = grid.len();
    match direction {
        Direction::Fixed(v) => {
            if v.len() != dims {
                return Err(invalid("probe_direction", format!("expected {dims} components")));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(invalid("probe_direction", "must be a non-zero vector"));
            }
            Ok((v.iter().map(|x| vec![x / norm; n]).collect(), vec![true; n]))
        }
        Direction::Auto => {
            let g = potential.gradient();
            let mut dir = vec![vec![0.0; n]; dims];
            let mut defined = vec![false; n];
            for k in 0..n {
                let norm = (0..dims).map(|a| g[a][k] * g[a][k]).sum::<f64>().sqrt();
                if norm > 0.0 {
                    defined[k] = true;
                    for a in 0..dims {
                        dir[a][k] = g[a][k] / norm;
                    }
                }
            }
            Ok((dir, defined))
        }
    }
}

/// Complex residual field with masked L² summaries of each part.
#[derive(Clone, Debug)]
pub struct ComplexResidual {
    pub values: Vec<C64>,
    pub real_summary: f64,
    pub imag_summary: f64,
    pub summary: f64,
}

impl ComplexResidual {
    fn new(grid: &Grid, values: Vec<C64>, mask: &[bool]) -> Self {
        let w = grid.weights();
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..values.len() {
            if mask[k] {
                re += w[k] * values[k].re.powi(2);
                im += w[k] * values[k].im.powi(2);
            }
        }
        Self {
            values,
            real_summary: re.sqrt(),
            imag_summary: im.sqrt(),
            summary: (re + im).sqrt(),
        }
    }
}

/// The complexified HJ residual r = ∂𝒥/∂t + (∇𝒥)²/2m + U(𝒬) in two readings
/// of U(𝒬).
///
/// `identified` uses the brace-(b) terms U − iħ½∇·v + (ħ²/2m)∇²S_Q, so its
/// real part is the HJ residual with the entropy form of Q and its imaginary
/// part is ħ times the entropy-balance residual. `expanded` uses the
/// truncated Taylor series U + iħ(s/2m)(n·∇U) − (ħ²/2m)(s²/2m)∇²U.
#[derive(Clone, Debug)]
pub struct ComplexHjResidual {
    pub mask: Vec<bool>,
    pub identified: ComplexResidual,
    pub expanded: ComplexResidual,
    pub direction_defined: Vec<bool>,
}

pub fn complexified_hj_residual(
    snapshots: &[WaveField],
    potential: &Potential,
    index: usize,
    direction: &Direction,
    s: f64,
    opts: &DecomposeOptions,
) -> Result<ComplexHjResidual> {
    let set = residuals(snapshots, potential, index, opts)?;
    let dlog = log_time_derivative(snapshots, index)?;
    let b = &set.fields;
    let (hbar, m) = (b.hbar, b.mass);
    let (dir, defined) = direction_field(potential, direction)?;
    let grad_u = potential.gradient();
    let lap_u = potential.laplacian();
    let u = potential.values();
    let dims = b.grid.dims();
    let c = hbar * hbar / (2.0 * m);

    let n = b.rho.len();
    let mut ident = vec![C64::default(); n];
    let mut expanded = vec![C64::default(); n];
    for k in 0..n {
        if !b.mask[k] {
            continue;
        }
        // ∂𝒥/∂t = ħ ∂(arg Ψ)/∂t + iħ ∂S_Q/∂t
        let dj_dt = C64::new(hbar * dlog[k].im, -hbar * dlog[k].re);
        let mut grad_sq = C64::default();
        for a in 0..dims {
            let p = C64::new(b.grad_j[a][k], hbar * b.grad_s_q[a][k]);
            grad_sq += p * p;
        }
        let kinetic = grad_sq / (2.0 * m);
        let u_ident = C64::new(u[k] + c * b.lap_s_q[k], -0.5 * hbar * b.div_v[k]);
        ident[k] = dj_dt + kinetic + u_ident;

        let n_grad_u: f64 = if defined[k] {
            (0..dims).map(|a| dir[a][k] * grad_u[a][k]).sum()
        } else {
            0.0
        };
        let u_exp = C64::new(
            u[k] - c * (s * s / (2.0 * m)) * lap_u[k],
            hbar * (s / (2.0 * m)) * n_grad_u,
        );
        expanded[k] = dj_dt + kinetic + u_exp;
    }
    let grid = &b.grid;
    Ok(ComplexHjResidual {
        identified: ComplexResidual::new(grid, ident, &b.mask),
        expanded: ComplexResidual::new(grid, expanded, &b.mask),
        mask: b.mask.clone(),
        direction_defined: defined,
    })
}

/// Both sides of a proposed identity on masked points.
#[derive(Clone, Debug)]
pub struct Probe {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub mask: Vec<bool>,
    /// lhs − rhs on masked points.
    pub discrepancy: Vec<f64>,
    pub max_discrepancy: f64,
    /// Pearson correlation of the two sides, if both vary.
    pub correlation: Option<f64>,
}

impl Probe {
    fn new(lhs: Vec<f64>, rhs: Vec<f64>, mask: Vec<bool>) -> Self {
        let discrepancy: Vec<f64> = (0..lhs.len())
            .map(|k| if mask[k] { lhs[k] - rhs[k] } else { 0.0 })
            .collect();
        let max_discrepancy = discrepancy.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let correlation = pearson(&lhs, &rhs, &mask);
        Self {
            lhs,
            rhs,
            mask,
            discrepancy,
            max_discrepancy,
            correlation,
        }
    }

    pub fn lhs_max_abs(&self) -> f64 {
        masked_max_abs(&self.lhs, &self.mask)
    }

    pub fn rhs_max_abs(&self) -> f64 {
        masked_max_abs(&self.rhs, &self.mask)
    }

    pub fn is_finite(&self) -> bool {
        self.lhs.iter().chain(&self.rhs).all(|x| x.is_finite())
    }
}

fn masked_max_abs(v: &[f64], mask: &[bool]) -> f64 {
    v.iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max)
}

fn pearson(a: &[f64], b: &[f64], mask: &[bool]) -> Option<f64> {
    let idx: Vec<usize> = (0..a.len()).filter(|&k| mask[k]).collect();
    if idx.len() < 2 {
        return None;
    }
    let n = idx.len() as f64;
    let ma = idx.iter().map(|&k| a[k]).sum::<f64>() / n;
    let mb = idx.iter().map(|&k| b[k]).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &k in &idx {
        let (x, y) = (a[k] - ma, b[k] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// (s/2m)(n·∇U) against −½∇·v.
pub fn taylor_probe_b1(b: &BohmFields, potential: &Potential, s: f64, direction: &Direction) -> Result<Probe> {
    b.grid.check_same(potential.grid())?;
    let (dir, defined) = direction_field(potential, direction)?;
    let grad_u = potential.gradient();
    let dims = b.grid.dims();
    let lhs = (0..b.rho.len())
        .map(|k| {
            if !(b.mask[k] && defined[k]) {
                return 0.0;
            }
            s / (2.0 * b.mass) * (0..dims).map(|a| dir[a][k] * grad_u[a][k]).sum::<f64>()
        })
        .collect();
    let rhs = b.div_v.iter().map(|d| -0.5 * d).collect();
    Ok(Probe::new(lhs, rhs, b.mask.clone()))
}

/// −(s²/2m)∇²U against ∇²S_Q.
pub fn taylor_probe_b2(b: &BohmFields, potential: &Potential, s: f64) -> Result<Probe> {
    b.grid.check_same(potential.grid())?;
    let lap_u = potential.laplacian();
    let lhs = (0..b.rho.len())
        .map(|k| if b.mask[k] { -s * s / (2.0 * b.mass) * lap_u[k] } else { 0.0 })
        .collect();
    Ok(Probe::new(lhs, b.lap_s_q.clone(), b.mask.clone()))
}

/// Closed axis-aligned rectangle with corners snapped to grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct RectLoop {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circulation {
    pub gamma: f64,
    /// Γ/(2πħ)
    pub winding: f64,
    /// Trapezoid quadrature of the sampled ∇J field around the same loop.
    pub gamma_quadrature: f64,
}

fn loop_indices(grid: &Grid, lp: &RectLoop) -> Result<Vec<usize>> {
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid("circulation loops need a 2D grid".into()));
    }
    let lo = grid
        .nearest(&lp.lower)
        .ok_or_else(|| invalid("loop", "lower corner outside the grid"))?;
    let hi = grid
        .nearest(&lp.upper)
        .ok_or_else(|| invalid("loop", "upper corner outside the grid"))?;
    let ([i0, j0], [i1, j1]) = (grid.unravel(lo), grid.unravel(hi));
    if i1 <= i0 || j1 <= j0 {
        return Err(invalid("loop", "rectangle must enclose at least one cell"));
    }
    // counter-clockwise in the (axis 0, axis 1) plane
    let mut path = Vec::new();
    path.extend((i0..i1).map(|i| grid.ravel([i, j0])));
    path.extend((j0..j1).map(|j| grid.ravel([i1, j])));
    path.extend((i0 + 1..=i1).rev().map(|i| grid.ravel([i, j1])));
    path.extend((j0 + 1..=j1).rev().map(|j| grid.ravel([i0, j])));
    Ok(path)
}

/// Γ = ∮∇J·dl summed from the exact phase increments ħ·arg(Ψ_{k+1}Ψ_k*).
pub fn circulation(field: &WaveField, lp: &RectLoop, opts: &DecomposeOptions) -> Result<Circulation> {
    let grid = field.grid();
    let path = loop_indices(grid, lp)?;
    let b = crate::bohm::decompose(field, opts)?;
    if path.iter().any(|&k| !b.mask[k]) {
        return Err(Error::NodeRegion);
    }
    let psi = field.amplitude();
    let hbar = field.hbar();
    let mut gamma = 0.0;
    let mut quad = 0.0;
    for e in 0..path.len() {
        let (a, c) = (path[e], path[(e + 1) % path.len()]);
        gamma += hbar * (psi[c] * psi[a].conj()).arg();
        let (pa, pc) = (grid.point(a), grid.point(c));
        for ax in 0..2 {
            let d = pc[ax] - pa[ax];
            if d != 0.0 {
                quad += 0.5 * d * (b.grad_j[ax][a] + b.grad_j[ax][c]);
            }
        }
    }
    Ok(Circulation {
        gamma,
        winding: gamma / (TAU * hbar),
        gamma_quadrature: quad,
    })
}

/// ∇S_Q and the implied ṅ = (2/s)∇S_Q at one interior snapshot.
#[derive(Clone, Debug)]
pub struct EpsilonDot {
    pub mask: Vec<bool>,
    pub grad_s_q: Vec<Vec<f64>>,
    pub n_dot: Vec<Vec<f64>>,
    pub magnitude: Vec<f64>,
    /// max |ṅ(t₊) − ṅ(t₋)| over points masked at both neighbours.
    pub temporal_variation: f64,
}

impl EpsilonDot {
    pub fn is_finite(&self) -> bool {
        self.n_dot.iter().flatten().chain(&self.magnitude).all(|x| x.is_finite())
    }
}

pub fn epsilon_dot_check(
    snapshots: &[WaveField],
    index: usize,
    s: f64,
    opts: &DecomposeOptions,
) -> Result<EpsilonDot> {
    if index == 0 || index + 1 >= snapshots.len() {
        return Err(Error::EdgeIndex {
            index,
            len: snapshots.len(),
        });
    }
    if !(s > 0.0) {
        return Err(invalid("s", "must be positive"));
    }
    let decompose = |i: usize| crate::bohm::decompose(&snapshots[i], opts);
    let (prev, cur, next) = (decompose(index - 1)?, decompose(index)?, decompose(index + 1)?);
    let scale = 2.0 / s;
    let n_dot: Vec<Vec<f64>> = cur
        .grad_s_q
        .iter()
        .map(|g| g.iter().map(|x| scale * x).collect())
        .collect();
    let magnitude = (0..cur.rho.len())
        .map(|k| n_dot.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
        .collect();
    let mut temporal_variation: f64 = 0.0;
    for k in 0..cur.rho.len() {
        if prev.mask[k] && next.mask[k] {
            for a in 0..n_dot.len() {
                let d = scale * (next.grad_s_q[a][k] - prev.grad_s_q[a][k]);
                temporal_variation = temporal_variation.max(d.abs());
            }
        }
    }
    Ok(EpsilonDot {
        mask: cur.mask.clone(),
        grad_s_q: cur.grad_s_q.clone(),
        n_dot,
        magnitude,
        temporal_variation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohm::{decompose, decompose_with_action};
    use crate::constants::{ELECTRON_MASS, PROTON_MASS};
    use crate::evolve::{evolve, EvolutionPlan};
    use crate::field::{gaussian_packet, harmonic_ground_state, plane_wave, vortex};
    use crate::potential::{build_potential, PotentialSpec};

    fn si() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn reverse_velocity_values() {
        let s = reverse_velocity_constant(&si());
        assert!((s / 4.57e-7 - 1.0).abs() < 5e-3);
        let u = universal_constants(&si());
        assert!((u.s_times_c - 137.036).abs() < 0.1);
        assert!((u.s_c_alpha - 1.0).abs() < 1e-4);
        let doubled = PhysicalConstants {
            elementary_charge: 2.0 * si().elementary_charge,
            ..si()
        };
        assert!((reverse_velocity_constant(&doubled) * 4.0 / s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_radii() {
        let re = epsilon_radius(&si(), ELECTRON_MASS).unwrap();
        assert!((re / 2.6e-11 - 1.0).abs() < 0.05);
        let rp = epsilon_radius(&si(), PROTON_MASS).unwrap();
        assert!((rp / 1.4e-14 - 1.0).abs() < 0.05);
        let r6 = epsilon_radius(&si(), 1e-6).unwrap();
        assert!(r6 > 1e-35 && r6 < 1e-34);
        // homogeneous of degree −1
        let r12 = epsilon_radius(&si(), 2e-6).unwrap();
        assert_eq!(r6, 2.0 * r12);
        assert!(epsilon_radius(&si(), 0.0).is_err());
    }

    #[test]
    fn atomic_units_give_unit_s() {
        let s = reverse_velocity_in_units(&si(), BOHR_RADIUS, ATOMIC_TIME);
        assert!((s - 1.0).abs() < 1e-8);
    }

    fn line() -> Grid {
        Grid::uniform_1d(-10.0, 10.0, 201).unwrap()
    }

    #[test]
    fn complex_action_of_gaussian() {
        let f = gaussian_packet(&line(), &[0.0], 1.0, &[0.0]).unwrap();
        let b = decompose_with_action(&f, &DecomposeOptions::default(), None).unwrap();
        let st = complex_action(&b).unwrap();
        let k = line().nearest(&[1.0]).unwrap();
        assert!((st.complex_action[k].im - 0.709_469_266_602_336_3).abs() < 1e-9, "{}", st.complex_action[k]);
        let back = st.wavefunction(0.0, 1.0).unwrap();
        for ((x, y), &m) in back.amplitude().iter().zip(f.amplitude()).zip(&st.mask) {
            if m {
                assert!((x - y).norm() < 1e-10);
            }
        }
        assert!(st.amplitude_consistency(&f) < 1e-12);
        assert!(complex_action(&decompose(&f, &DecomposeOptions::default()).unwrap()).is_err());
    }

    #[test]
    fn gradient_identity_is_rounding_level() {
        let g = Grid::periodic_1d(-PI, TAU, 64).unwrap();
        let fields = [
            gaussian_packet(&line(), &[0.5], 0.9, &[1.7]).unwrap(),
            plane_wave(&g, &[3.0]).unwrap(),
        ];
        for f in fields {
            let b = decompose(&f, &DecomposeOptions::default()).unwrap();
            let d = gradient_square_identity(&b);
            assert!(d.max_defect <= 1e-12 * d.scale.max(1.0), "{d:?}");
        }
    }

    #[test]
    fn circulation_of_vortex() {
        let g = Grid::uniform_2d((-6.0, 6.0), (-6.0, 6.0), (128, 128)).unwrap();
        let f = vortex(&g, &[0.0, 0.0], 1.0).unwrap();
        let opts = DecomposeOptions::default();
        let around = RectLoop {
            lower: [-2.0, -2.0],
            upper: [2.0, 2.0],
        };
        let c = circulation(&f, &around, &opts).unwrap();
        assert!((c.winding - 1.0).abs() < 1e-6);
        assert!((c.gamma_quadrature / TAU - 1.0).abs() < 1e-2);
        let aside = RectLoop {
            lower: [1.0, 1.0],
            upper: [3.0, 2.5],
        };
        assert!(circulation(&f, &aside, &opts).unwrap().winding.abs() < 1e-6);

        let gauss = gaussian_packet(&g, &[0.3, -0.2], 1.0, &[1.0, 0.5]).unwrap();
        assert!(circulation(&gauss, &around, &opts).unwrap().winding.abs() < 1e-6);

        let far = RectLoop {
            lower: [-5.9, -5.9],
            upper: [5.9, 5.9],
        };
        let tight = gaussian_packet(&g, &[0.0, 0.0], 0.4, &[0.0, 0.0]).unwrap();
        assert!(matches!(circulation(&tight, &far, &opts), Err(Error::NodeRegion)));
    }

    fn harmonic_run(g: &Grid) -> (Vec<WaveField>, Potential) {
        let u = build_potential(
            g,
            &PotentialSpec::Harmonic {
                omega: 1.0,
                mass: 1.0,
                center: vec![0.0],
            },
        )
        .unwrap();
        let f = harmonic_ground_state(g, 1.0, &[0.0], 1.0, 1.0).unwrap();
        (evolve(&f, &u, &EvolutionPlan::new(0.001, 4, 1).unwrap()).unwrap().snapshots, u)
    }

    #[test]
    fn real_part_is_hj_residual() {
        let g = Grid::uniform_1d(-10.0, 10.0, 256).unwrap();
        let (snaps, u) = harmonic_run(&g);
        let opts = DecomposeOptions::default();
        let r = complexified_hj_residual(&snaps, &u, 2, &Direction::Auto, 1.0, &opts).unwrap();
        let set = residuals(&snaps, &u, 2, &opts).unwrap();
        for k in 0..g.len() {
            if r.mask[k] {
                let scale = 1.0 + set.fields.q[k].abs();
                assert!((r.identified.values[k].re - set.hj.field[k]).abs() < 1e-10 * scale);
                assert!((r.identified.values[k].im - set.entropy.field[k]).abs() < 1e-10 * scale);
            }
        }
        assert!(r.identified.real_summary < 1e-4);
    }

    #[test]
    fn plane_wave_total_residual() {
        let g = Grid::periodic_1d(-PI, TAU, 64).unwrap();
        let f = plane_wave(&g, &[2.0]).unwrap();
        let u = build_potential(&g, &PotentialSpec::Free).unwrap();
        let snaps = evolve(&f, &u, &EvolutionPlan::new(0.01, 2, 1).unwrap()).unwrap().snapshots;
        let r = complexified_hj_residual(&snaps, &u, 1, &Direction::Auto, 1.0, &DecomposeOptions::default())
            .unwrap();
        assert!(r.identified.summary < 1e-8);
        assert!(r.expanded.summary < 1e-8);
    }

    #[test]
    fn probes_vanish_on_the_left_for_free_motion() {
        let g = line();
        let f = gaussian_packet(&g, &[0.0], 1.0, &[1.0]).unwrap();
        let u = build_potential(&g, &PotentialSpec::Free).unwrap();
        let b = decompose(&f, &DecomposeOptions::default()).unwrap();
        let p1 = taylor_probe_b1(&b, &u, 1.0, &Direction::Auto).unwrap();
        let p2 = taylor_probe_b2(&b, &u, 1.0).unwrap();
        assert_eq!(p1.lhs_max_abs(), 0.0);
        assert_eq!(p2.lhs_max_abs(), 0.0);
        assert!(p1.is_finite() && p2.is_finite());
        assert!(p2.rhs_max_abs() > 0.0);
    }

    #[test]
    fn harmonic_probes_report_discrepancy() {
        let g = line();
        let (snaps, u) = harmonic_run(&g);
        let b = decompose(&snaps[2], &DecomposeOptions::default()).unwrap();
        let p1 = taylor_probe_b1(&b, &u, 1.0, &Direction::Auto).unwrap();
        assert!(p1.rhs_max_abs() < 1e-6);
        assert!(p1.lhs_max_abs() > 0.1);
        let p2 = taylor_probe_b2(&b, &u, 1.0).unwrap();
        // ∇²S_Q = 1/(2σ²) = ω for the ground state; the left side is −1/2
        let k = g.nearest(&[0.0]).unwrap();
        assert!((p2.rhs[k] - 1.0).abs() < 1e-6);
        assert!((p2.lhs[k] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn epsilon_dot_on_static_and_free_states() {
        let g = line();
        let (snaps, _) = harmonic_run(&g);
        let e = epsilon_dot_check(&snaps, 2, 1.0, &DecomposeOptions::default().with_floor(1e-8)).unwrap();
        assert!(e.is_finite());
        assert!(e.temporal_variation < 1e-6, "{}", e.temporal_variation);
        let k = g.nearest(&[1.0]).unwrap();
        // ∇S_Q = x/(2σ²) with σ² = ½
        assert!((e.grad_s_q[0][k] - 1.0).abs() < 1e-8);
        assert!((e.n_dot[0][k] - 2.0).abs() < 1e-8);
        assert!(epsilon_dot_check(&snaps, 0, 1.0, &DecomposeOptions::default()).is_err());

        let ring = Grid::periodic_1d(-PI, TAU, 64).unwrap();
        let f = plane_wave(&ring, &[1.0]).unwrap();
        let u = build_potential(&ring, &PotentialSpec::Free).unwrap();
        let s = evolve(&f, &u, &EvolutionPlan::new(0.01, 2, 1).unwrap()).unwrap().snapshots;
        let e = epsilon_dot_check(&s, 1, 1.0, &DecomposeOptions::default()).unwrap();
        assert!(e.magnitude.iter().all(|m| *m < 1e-10));
    }
}
