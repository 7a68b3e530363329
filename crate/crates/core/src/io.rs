//! Binary field files and CSV exports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::{Axis, Grid};
use crate::interference::PatternPoint;
use crate::propagator::ConvergenceTable;
use crate::trajectories::TrajectoryEnsemble;

pub const MAGIC: &[u8; 5] = b"BOHM1";

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:05}.bohm")
}

pub fn write_field<W: Write>(mut w: W, field: &WaveField) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dims() as u32).to_le_bytes())?;
    for ax in grid.axes() {
        w.write_all(&(ax.points as u64).to_le_bytes())?;
        w.write_all(&ax.min.to_le_bytes())?;
        w.write_all(&ax.max.to_le_bytes())?;
    }
    w.write_all(&field.time().to_le_bytes())?;
    for z in field.amplitude() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated field file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

pub fn read_field<R: Read>(mut r: R) -> Result<WaveField> {
    let magic: [u8; 5] = take(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a BOHM1 file".into()));
    }
    let dims = u32::from_le_bytes(take(&mut r)?) as usize;
    if !(1..=2).contains(&dims) {
        return Err(Error::Format(format!("unsupported dimension {dims}")));
    }
    let mut axes = Vec::with_capacity(dims);
    for _ in 0..dims {
        let points = u64::from_le_bytes(take(&mut r)?) as usize;
        let min = f64::from_le_bytes(take(&mut r)?);
        let max = f64::from_le_bytes(take(&mut r)?);
        axes.push(Axis { min, max, points });
    }
    let grid = Grid::new(axes).map_err(|e| Error::Format(e.to_string()))?;
    let time = f64::from_le_bytes(take(&mut r)?);
    let mut amp = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = f64::from_le_bytes(take(&mut r)?);
        let im = f64::from_le_bytes(take(&mut r)?);
        amp.push(C64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    WaveField::new(grid, amp, time)
}

pub fn save_field(path: &Path, field: &WaveField) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field)
}

pub fn load_field(path: &Path) -> Result<WaveField> {
    read_field(BufReader::new(File::open(path)?))
}

fn coord_header(dims: usize) -> &'static str {
    if dims == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn coords(p: &[f64; 2], dims: usize) -> String {
    p[..dims].iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(",")
}

/// Columns x[,y],re,im.
pub fn write_field_csv<W: Write>(mut w: W, field: &WaveField) -> Result<()> {
    let grid = field.grid();
    writeln!(w, "{},re,im", coord_header(grid.dims()))?;
    for (p, z) in grid.points().zip(field.amplitude()) {
        writeln!(w, "{},{},{}", coords(&p, grid.dims()), fmt_float(z.re), fmt_float(z.im))?;
    }
    w.flush()?;
    Ok(())
}

/// Named real columns over the grid points.
pub fn write_columns_csv<W: Write>(mut w: W, grid: &Grid, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, c) in columns {
        if c.len() != grid.len() {
            return Err(Error::GridMismatch(format!("column '{name}' has {} samples", c.len())));
        }
    }
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(w, "{},{}", coord_header(grid.dims()), names.join(","))?;
    for (k, p) in grid.points().enumerate() {
        let vals: Vec<String> = columns.iter().map(|c| fmt_float(c.1[k])).collect();
        writeln!(w, "{},{}", coords(&p, grid.dims()), vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns particle_id,t,x[,y],flag; one block per particle.
pub fn write_trajectory_csv<W: Write>(mut w: W, ens: &TrajectoryEnsemble) -> Result<()> {
    writeln!(w, "particle_id,t,{},flag", coord_header(ens.dims))?;
    for p in 0..ens.particles() {
        for (t, time) in ens.times.iter().enumerate() {
            writeln!(
                w,
                "{p},{},{},{}",
                fmt_float(*time),
                coords(&ens.positions[t][p], ens.dims),
                ens.flags[t][p].as_str()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns x,P,midline,rho1,rho2.
pub fn write_pattern_csv<W: Write>(mut w: W, rows: &[PatternPoint]) -> Result<()> {
    writeln!(w, "x,P,midline,rho1,rho2")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_float(r.x),
            fmt_float(r.p),
            fmt_float(r.midline),
            fmt_float(r.rho1),
            fmt_float(r.rho2)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Columns M,error,order; order empty on the first row.
pub fn write_convergence_csv<W: Write>(mut w: W, table: &ConvergenceTable) -> Result<()> {
    writeln!(w, "M,error,order")?;
    for r in &table.rows {
        let order = r.order.map(fmt_float).unwrap_or_default();
        writeln!(w, "{},{},{}", r.slices, fmt_float(r.error), order)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
