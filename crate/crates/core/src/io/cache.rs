use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::eigen::{select_index_pairs, Basis3D, BasisSpec, Grid2D, HexEigenbasis2D};
use crate::error::{Error, Result};
use crate::geom::Hexagon;

const MAGIC: &[u8; 8] = b"MAGSLAMB";

/// Major version of the binary basis cache layout.
pub const CACHE_VERSION: u32 = 1;

/// Where a basis for `spec` lives: `location` itself when it names a
/// `.bin` file, otherwise a file inside that directory named by the key.
pub fn basis_cache_path(location: &Path, spec: &BasisSpec) -> PathBuf {
    if location.extension().is_some_and(|e| e == "bin") {
        return location.to_path_buf();
    }
    location.join(format!(
        "basis-r{}-lz{}-ext{}-h{}-m{}-n{}.bin",
        spec.radius, spec.half_height, spec.extension, spec.step, spec.m, spec.hex_modes
    ))
}

fn key_values(spec: &BasisSpec) -> [f64; 4] {
    [spec.radius, spec.half_height, spec.extension, spec.step]
}

/// Writes `basis` (built from `spec`) atomically to `path`.
///
/// Layout, little-endian: magic, version `u32`, key (`r`, `L_z`, extension,
/// `h` as `f64`; `m`, hexagon modes as `u64`), lattice (`i0`, `j0` as
/// `i64`; `nx`, `ny` as `u64`), hexagon eigenvalues, interior mask bytes and
/// node-major eigenfunction samples.
pub fn save_basis(path: &Path, spec: &BasisSpec, basis: &Basis3D) -> Result<()> {
    let hex = basis.hex();
    let grid = hex.grid();
    let mut buf = Vec::with_capacity(64 + hex.samples().len() * 8 + grid.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for v in key_values(spec) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [spec.m as u64, spec.hex_modes as u64] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&grid.i0.to_le_bytes());
    buf.extend_from_slice(&grid.j0.to_le_bytes());
    buf.extend_from_slice(&(grid.nx as u64).to_le_bytes());
    buf.extend_from_slice(&(grid.ny as u64).to_le_bytes());
    for v in hex.eigenvalues() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(hex.interior_mask().iter().map(|&b| b as u8));
    for v in hex.samples() {
        buf.extend_from_slice(&v.to_le_bytes());
    }

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("bin.tmp");
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format {
                path: self.path.display().to_string(),
                line: 0,
                message: "basis cache is truncated".into(),
            });
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn i64(&mut self) -> Result<i64> {
        self.array().map(i64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.corrupt(format!("size {v} out of range")))
    }

    fn corrupt(&self, message: String) -> Error {
        Error::Format {
            path: self.path.display().to_string(),
            line: 0,
            message,
        }
    }
}

/// Reads a cached basis and checks that it was built for `spec`.
pub fn load_basis(path: &Path, spec: &BasisSpec) -> Result<Basis3D> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, path };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(c.corrupt("not a basis cache file".into()));
    }
    let version = c.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Version {
            path: path.display().to_string(),
            found: version.to_string(),
            supported: CACHE_VERSION,
        });
    }
    let stored = [c.f64()?, c.f64()?, c.f64()?, c.f64()?];
    let (m, hex_modes) = (c.usize()?, c.usize()?);
    let wanted = key_values(spec);
    if stored != wanted || m != spec.m || hex_modes != spec.hex_modes {
        return Err(Error::CacheMismatch {
            path: path.to_path_buf(),
            detail: format!(
                "cache has r = {}, L_z = {}, extension = {}, h = {}, m = {m}, hexagon modes = {hex_modes}; \
                 the run needs r = {}, L_z = {}, extension = {}, h = {}, m = {}, hexagon modes = {}",
                stored[0], stored[1], stored[2], stored[3], wanted[0], wanted[1], wanted[2], wanted[3], spec.m,
                spec.hex_modes
            ),
        });
    }
    let grid = Grid2D {
        step: spec.step,
        i0: c.i64()?,
        j0: c.i64()?,
        nx: c.usize()?,
        ny: c.usize()?,
    };
    let nodes = grid
        .nx
        .checked_mul(grid.ny)
        .filter(|n| n.checked_mul(hex_modes * 8).is_some())
        .ok_or_else(|| c.corrupt("lattice size overflows".into()))?;
    let eigenvalues = (0..hex_modes).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let interior = c.take(nodes)?.iter().map(|&b| b != 0).collect();
    let values = c
        .take(nodes * hex_modes * 8)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    if !c.bytes.is_empty() {
        return Err(c.corrupt(format!("{} trailing bytes", c.bytes.len())));
    }
    let hexagon = Hexagon::new(spec.extended_radius())?;
    let hex = HexEigenbasis2D::from_parts(hexagon, grid, interior, eigenvalues, values)
        .map_err(|e| c.corrupt(e.to_string()))?;
    select_index_pairs(Arc::new(hex), spec.extended_half_height(), spec.m)
}

/// Loads the basis for `spec` from the cache at `location`, solving and
/// storing it first on a miss. The flag reports a cache hit.
pub fn load_or_build_basis(location: &Path, spec: &BasisSpec) -> Result<(Basis3D, bool)> {
    let path = basis_cache_path(location, spec);
    if path.exists() {
        return Ok((load_basis(&path, spec)?, true));
    }
    let basis = spec.build()?;
    save_basis(&path, spec, &basis)?;
    Ok((basis, false))
}
