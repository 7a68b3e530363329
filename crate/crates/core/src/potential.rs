//! Potential energy fields sampled on a grid.

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::spectral::{open_gradient, open_laplacian};

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec {
    Free,
    Constant(f64),
    /// ½ m ω² |x − center|²
    Harmonic {
        omega: f64,
        mass: f64,
        center: Vec<f64>,
    },
    /// Wall strip of `thickness` centred on `x_wall` along axis 0, open
    /// within two gaps of `slit_width` centred on `slit_centers` along axis 1.
    TwoSlit {
        x_wall: f64,
        thickness: f64,
        height: f64,
        slit_centers: [f64; 2],
        slit_width: f64,
    },
    Custom(Vec<f64>),
}

impl PotentialSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Constant(_) => "constant",
            Self::Harmonic { .. } => "harmonic",
            Self::TwoSlit { .. } => "two_slit",
            Self::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    grid: Grid,
    spec: PotentialSpec,
    values: Vec<f64>,
}

impl Potential {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_free(&self) -> bool {
        self.values.iter().all(|&u| u == 0.0)
    }

    /// ∇U; exact for harmonic wells, one-sided second-order differences otherwise.
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        match &self.spec {
            PotentialSpec::Free | PotentialSpec::Constant(_) => {
                vec![vec![0.0; self.values.len()]; self.grid.dims()]
            }
            PotentialSpec::Harmonic { omega, mass, center } => {
                let k = mass * omega * omega;
                (0..self.grid.dims())
                    .map(|a| self.grid.points().map(|p| k * (p[a] - center[a])).collect())
                    .collect()
            }
            _ => open_gradient(&self.grid, &self.values),
        }
    }

    /// ∇²U with the same conventions as [`Potential::gradient`].
    pub fn laplacian(&self) -> Vec<f64> {
        match &self.spec {
            PotentialSpec::Free | PotentialSpec::Constant(_) => vec![0.0; self.values.len()],
            PotentialSpec::Harmonic { omega, mass, .. } => {
                vec![mass * omega * omega * self.grid.dims() as f64; self.values.len()]
            }
            _ => open_laplacian(&self.grid, &self.values),
        }
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Indicator of `[lo, hi]` with C¹ edges ramped over `ramp`, centred on the edges.
fn smooth_box(z: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    smoothstep((z - lo) / ramp + 0.5) * smoothstep((hi - z) / ramp + 0.5)
}

pub fn build_potential(grid: &Grid, spec: &PotentialSpec) -> Result<Potential> {
    let values = match spec {
        PotentialSpec::Free => vec![0.0; grid.len()],
        PotentialSpec::Constant(c) => {
            if !c.is_finite() {
                return Err(invalid("value", "must be finite"));
            }
            vec![*c; grid.len()]
        }
        PotentialSpec::Harmonic { omega, mass, center } => {
            if !(*omega > 0.0 && omega.is_finite()) {
                return Err(invalid("omega", "must be positive"));
            }
            if !(*mass > 0.0 && mass.is_finite()) {
                return Err(invalid("mass", "must be positive"));
            }
            if center.len() != grid.dims() {
                return Err(invalid("center", format!("expected {} components", grid.dims())));
            }
            let k = 0.5 * mass * omega * omega;
            grid.points()
                .map(|p| k * (0..grid.dims()).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>())
                .collect()
        }
        PotentialSpec::TwoSlit {
            x_wall,
            thickness,
            height,
            slit_centers,
            slit_width,
        } => two_slit(grid, *x_wall, *thickness, *height, *slit_centers, *slit_width)?,
        PotentialSpec::Custom(v) => {
            if v.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "custom potential has {} samples for {} grid points",
                    v.len(),
                    grid.len()
                )));
            }
            if v.iter().any(|u| !u.is_finite()) {
                return Err(invalid("custom", "non-finite sample"));
            }
            v.clone()
        }
    };
    Ok(Potential {
        grid: grid.clone(),
        spec: spec.clone(),
        values,
    })
}

fn two_slit(
    grid: &Grid,
    x_wall: f64,
    thickness: f64,
    height: f64,
    centers: [f64; 2],
    width: f64,
) -> Result<Vec<f64>> {
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid("two-slit barrier needs a 2D grid".into()));
    }
    if !(height >= 0.0 && height.is_finite()) {
        return Err(invalid("height", "must be non-negative"));
    }
    if !(thickness > 0.0) {
        return Err(invalid("thickness", "must be positive"));
    }
    if !(width > 0.0) {
        return Err(invalid("slit_width", "must be positive"));
    }
    let (ax, ay) = (grid.axis(0), grid.axis(1));
    if x_wall - 0.5 * thickness <= ax.min || x_wall + 0.5 * thickness >= ax.max {
        return Err(invalid("x_wall", "wall strip lies outside the grid"));
    }
    for c in centers {
        if c - 0.5 * width <= ay.min || c + 0.5 * width >= ay.max {
            return Err(invalid("slit_centers", "slit lies outside the wall"));
        }
    }
    let ramp_x = 2.0 * ax.spacing();
    let ramp_y = 2.0 * ay.spacing();
    if (centers[0] - centers[1]).abs() < width + ramp_y {
        return Err(invalid("slit_centers", "slits overlap"));
    }
    let lo = x_wall - 0.5 * thickness;
    let hi = x_wall + 0.5 * thickness;
    Ok(grid
        .points()
        .map(|p| {
            let wall = smooth_box(p[0], lo, hi, ramp_x);
            let gaps: f64 = centers
                .iter()
                .map(|c| smooth_box(p[1], c - 0.5 * width, c + 0.5 * width, ramp_y))
                .sum();
            height * wall * (1.0 - gaps)
        })
        .collect())
}
