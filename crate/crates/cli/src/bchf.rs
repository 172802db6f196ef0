//! Binary field snapshot format.
//!
//! Layout (all integers little-endian): magic `BCHF`, `u32` version = 1,
//! `u32` dim, `u32` cell count per axis, `u8` boundary mode (0 periodic,
//! 1 box-neumann), then the cell data as little-endian `f64`, row-major by
//! axis order. Vector fields are stored as one file per component with
//! suffixes `_c0`, `_c1`. The header carries no physical extents; readers
//! supply the grid from context and the shape is validated against it.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use bch_core::field::{BcMode, Grid, ScalarField, VectorField};

use crate::error::CliError;

pub const MAGIC: &[u8; 4] = b"BCHF";
pub const VERSION: u32 = 1;

fn bc_byte(bc: BcMode) -> u8 {
    match bc {
        BcMode::Periodic => 0,
        BcMode::BoxNeumann => 1,
    }
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let grid = field.grid();
    let mut buf =
        Vec::with_capacity(4 + 4 + 4 + 4 * grid.dim() + 1 + 8 * field.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for a in 0..grid.dim() {
        buf.extend_from_slice(&(grid.n(a) as u32).to_le_bytes());
    }
    buf.push(bc_byte(grid.bc()));
    for x in field.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Raw header + payload of a snapshot file.
pub struct RawField {
    pub dim: usize,
    pub n: Vec<usize>,
    pub bc: BcMode,
    pub data: Vec<f64>,
}

pub fn read_field_raw(path: &Path) -> Result<RawField, CliError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |msg: &str| {
        CliError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{}: {msg}", path.display()),
        ))
    };
    if bytes.len() < 13 || &bytes[0..4] != MAGIC {
        return Err(fail("not a BCHF file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 || dim > 2 {
        return Err(fail("bad dimension"));
    }
    let mut off = 12;
    let mut n = Vec::with_capacity(dim);
    for _ in 0..dim {
        if bytes.len() < off + 4 {
            return Err(fail("truncated header"));
        }
        n.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
        off += 4;
    }
    if bytes.len() < off + 1 {
        return Err(fail("truncated header"));
    }
    let bc = match bytes[off] {
        0 => BcMode::Periodic,
        1 => BcMode::BoxNeumann,
        other => return Err(fail(&format!("bad bc byte {other}"))),
    };
    off += 1;
    let cells: usize = n.iter().product();
    if bytes.len() != off + 8 * cells {
        return Err(fail("payload size does not match header"));
    }
    let mut data = Vec::with_capacity(cells);
    for i in 0..cells {
        let start = off + 8 * i;
        data.push(f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap()));
    }
    Ok(RawField { dim, n, bc, data })
}

/// Read a snapshot and bind it to `grid`, validating the stored shape.
pub fn read_field(path: &Path, grid: Grid) -> Result<ScalarField, CliError> {
    let raw = read_field_raw(path)?;
    let shape_ok = raw.dim == grid.dim()
        && raw.bc == grid.bc()
        && (0..grid.dim()).all(|a| raw.n[a] == grid.n(a));
    if !shape_ok {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{}: field shape does not match the grid", path.display()),
        )));
    }
    Ok(ScalarField::from_data(grid, raw.data)?)
}

/// Write one file per component: `<stem>_c0.bchf`, `<stem>_c1.bchf`.
pub fn write_vector(dir: &Path, stem: &str, field: &VectorField) -> Result<(), CliError> {
    for c in 0..field.dim() {
        write_field(&dir.join(format!("{stem}_c{c}.bchf")), field.comp(c))?;
    }
    Ok(())
}

pub fn read_vector(dir: &Path, stem: &str, grid: Grid) -> Result<VectorField, CliError> {
    let comps = (0..grid.dim())
        .map(|c| read_field(&dir.join(format!("{stem}_c{c}.bchf")), grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VectorField::from_components(comps)?)
}
