//! FFT plans and derivative operators on periodic grids.
//!
//! Two derivative backends are available. `Spectral` multiplies by `ik` in
//! Fourier space; `CentralFd2` uses second-order central differences with
//! periodic wrap-around. Both treat the grid as periodic with period
//! `points × spacing` along each axis.
//!
//! Potentials are generally not periodic, so [`open_gradient`] and
//! [`open_laplacian`] provide second-order differences with one-sided
//! stencils at the boundary instead.

use std::f64::consts::TAU;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Spectral,
    CentralFd2,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "fd2" | "central_fd2" => Ok(Self::CentralFd2),
            other => Err(format!("unknown derivative backend `{other}`")),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Spectral => "spectral",
            Self::CentralFd2 => "fd2",
        })
    }
}

/// Angular wavenumbers in FFT order for `n` points at spacing `h`.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = TAU / (n as f64 * h);
    (0..n)
        .map(|j| {
            if j <= (n - 1) / 2 {
                j as f64 * dk
            } else {
                (j as f64 - n as f64) * dk
            }
        })
        .collect()
}

/// Forward/inverse FFT over all axes of a 1D or 2D row-major array.
#[derive(Clone)]
pub struct FftGrid {
    shape: [usize; 2],
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl FftGrid {
    pub fn new(grid: &Grid) -> Self {
        let shape = grid.shape();
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(shape[0]),
            planner.plan_fft_forward(shape[1]),
        ];
        let inv = [
            planner.plan_fft_inverse(shape[0]),
            planner.plan_fft_inverse(shape[1]),
        ];
        Self { shape, fwd, inv }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the 1/N normalisation.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [n0, n1] = self.shape;
        debug_assert_eq!(data.len(), n0 * n1);
        if n1 == 1 {
            plans[0].process(data);
            return;
        }
        // rows are contiguous; columns go through a transpose
        plans[1].process(data);
        let mut t = vec![C64::default(); data.len()];
        transpose(data, &mut t, n0, n1);
        plans[0].process(&mut t);
        transpose(&t, data, n1, n0);
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 32;
    for ib in (0..rows).step_by(B) {
        for jb in (0..cols).step_by(B) {
            for i in ib..(ib + B).min(rows) {
                for j in jb..(jb + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Gradient and Laplacian of complex fields on a periodic grid.
#[derive(Clone)]
pub struct Differentiator {
    grid: Grid,
    backend: Backend,
    fft: Option<FftGrid>,
    k: [Vec<f64>; 2],
}

impl Differentiator {
    pub fn new(grid: &Grid, backend: Backend) -> Self {
        let shape = grid.shape();
        let k0 = wavenumbers(shape[0], grid.spacing(0));
        let k1 = if grid.dims() == 2 {
            wavenumbers(shape[1], grid.spacing(1))
        } else {
            vec![0.0]
        };
        let fft = (backend == Backend::Spectral).then(|| FftGrid::new(grid));
        Self {
            grid: grid.clone(),
            backend,
            fft,
            k: [k0, k1],
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Gradient components (one per axis) and Laplacian.
    pub fn gradient_and_laplacian(&self, f: &[C64]) -> (Vec<Vec<C64>>, Vec<C64>) {
        match self.backend {
            Backend::Spectral => self.spectral(f),
            Backend::CentralFd2 => self.fd2(f),
        }
    }

    pub fn gradient(&self, f: &[C64]) -> Vec<Vec<C64>> {
        self.gradient_and_laplacian(f).0
    }

    pub fn laplacian(&self, f: &[C64]) -> Vec<C64> {
        self.gradient_and_laplacian(f).1
    }

    pub fn gradient_real(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let z: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.gradient(&z)
            .into_iter()
            .map(|c| c.into_iter().map(|z| z.re).collect())
            .collect()
    }

    pub fn laplacian_real(&self, f: &[f64]) -> Vec<f64> {
        let z: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.laplacian(&z).into_iter().map(|z| z.re).collect()
    }

    fn spectral(&self, f: &[C64]) -> (Vec<Vec<C64>>, Vec<C64>) {
        let fft = self.fft.as_ref().expect("spectral backend has a plan");
        let [n0, n1] = self.grid.shape();
        let dims = self.grid.dims();
        let mut hat = f.to_vec();
        fft.forward(&mut hat);

        // first derivatives drop the unpaired Nyquist mode
        let nyq = |n: usize, j: usize| n.is_multiple_of(2) && j == n / 2;
        let mut grads = Vec::with_capacity(dims);
        for axis in 0..dims {
            let mut g = hat.clone();
            for i in 0..n0 {
                for j in 0..n1 {
                    let (kk, drop) = if axis == 0 {
                        (self.k[0][i], nyq(n0, i))
                    } else {
                        (self.k[1][j], nyq(n1, j))
                    };
                    let z = &mut g[i * n1 + j];
                    *z = if drop { C64::default() } else { *z * C64::new(0.0, kk) };
                }
            }
            fft.inverse(&mut g);
            grads.push(g);
        }
        let mut lap = hat;
        for i in 0..n0 {
            for j in 0..n1 {
                let k2 = self.k[0][i].powi(2) + self.k[1][j].powi(2);
                lap[i * n1 + j] *= -k2;
            }
        }
        fft.inverse(&mut lap);
        (grads, lap)
    }

    fn fd2(&self, f: &[C64]) -> (Vec<Vec<C64>>, Vec<C64>) {
        let [n0, n1] = self.grid.shape();
        let dims = self.grid.dims();
        let mut grads = vec![vec![C64::default(); f.len()]; dims];
        let mut lap = vec![C64::default(); f.len()];
        for axis in 0..dims {
            let h = self.grid.spacing(axis);
            let (n, stride) = if axis == 0 { (n0, n1) } else { (n1, 1) };
            for flat in 0..f.len() {
                let idx = if axis == 0 { flat / n1 } else { flat % n1 };
                let up = if idx + 1 == n { flat + stride - n * stride } else { flat + stride };
                let dn = if idx == 0 { flat + (n - 1) * stride } else { flat - stride };
                grads[axis][flat] = (f[up] - f[dn]) / (2.0 * h);
                lap[flat] += (f[up] - 2.0 * f[flat] + f[dn]) / (h * h);
            }
        }
        (grads, lap)
    }
}

/// Second-order gradient with one-sided end stencils (no periodic wrap).
pub fn open_gradient(grid: &Grid, f: &[f64]) -> Vec<Vec<f64>> {
    let [n0, n1] = grid.shape();
    (0..grid.dims())
        .map(|axis| {
            let h = grid.spacing(axis);
            let (n, stride) = if axis == 0 { (n0, n1) } else { (n1, 1) };
            (0..f.len())
                .map(|flat| {
                    let idx = if axis == 0 { flat / n1 } else { flat % n1 };
                    if idx == 0 {
                        (-3.0 * f[flat] + 4.0 * f[flat + stride] - f[flat + 2 * stride]) / (2.0 * h)
                    } else if idx + 1 == n {
                        (3.0 * f[flat] - 4.0 * f[flat - stride] + f[flat - 2 * stride]) / (2.0 * h)
                    } else {
                        (f[flat + stride] - f[flat - stride]) / (2.0 * h)
                    }
                })
                .collect()
        })
        .collect()
}

/// Second-order Laplacian with one-sided end stencils (no periodic wrap).
pub fn open_laplacian(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let [n0, n1] = grid.shape();
    let mut out = vec![0.0; f.len()];
    for axis in 0..grid.dims() {
        let h2 = grid.spacing(axis).powi(2);
        let (n, stride) = if axis == 0 { (n0, n1) } else { (n1, 1) };
        for (flat, o) in out.iter_mut().enumerate() {
            let idx = if axis == 0 { flat / n1 } else { flat % n1 };
            let c = if idx == 0 {
                flat + stride
            } else if idx + 1 == n {
                flat - stride
            } else {
                flat
            };
            *o += (f[c + stride] - 2.0 * f[c] + f[c - stride]) / h2;
        }
    }
    out
}
