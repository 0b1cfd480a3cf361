//! Binary field snapshots: magic `HSL1`, little-endian `i64` dimension and
//! size, `f64` box length, then `(re, im)` pairs in row-major order.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{Grid, PhaseField, ProfileField};

const MAGIC: &[u8; 4] = b"HSL1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}")]
    Magic([u8; 4]),
    #[error("header mismatch: file has n={n}, N={size}, L={length}; grid has n={gn}, N={gsize}, L={glength}")]
    Header { n: i64, size: i64, length: f64, gn: usize, gsize: usize, glength: f64 },
    #[error("imaginary part {0:e} in a real field")]
    NotReal(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub size: usize,
    pub length: f64,
    pub values: Vec<Complex64>,
}

impl Snapshot {
    pub fn from_profile(grid: &Grid, w: &ProfileField) -> Self {
        Self { n: grid.n(), size: grid.size(), length: grid.length(), values: w.values.clone() }
    }

    pub fn from_phase(grid: &Grid, phi: &PhaseField) -> Self {
        Self::from_profile(grid, &ProfileField::from_phase(phi))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.n as i64).to_le_bytes())?;
        out.write_all(&(self.size as i64).to_le_bytes())?;
        out.write_all(&self.length.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, SnapshotError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SnapshotError::Magic(magic));
        }
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        let n = i64::from_le_bytes(b);
        input.read_exact(&mut b)?;
        let size = i64::from_le_bytes(b);
        input.read_exact(&mut b)?;
        let length = f64::from_le_bytes(b);
        if !(1..=8).contains(&n) || !(1..=4096).contains(&size) {
            return Err(SnapshotError::Header { n, size, length, gn: 0, gsize: 0, glength: 0.0 });
        }
        let count = (size as usize).pow(n as u32);
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut b)?;
            let re = f64::from_le_bytes(b);
            input.read_exact(&mut b)?;
            values.push(Complex64::new(re, f64::from_le_bytes(b)));
        }
        Ok(Self { n: n as usize, size: size as usize, length, values })
    }

    fn check(&self, grid: &Grid) -> Result<(), SnapshotError> {
        if self.n != grid.n() || self.size != grid.size() || self.length != grid.length() {
            return Err(SnapshotError::Header {
                n: self.n as i64,
                size: self.size as i64,
                length: self.length,
                gn: grid.n(),
                gsize: grid.size(),
                glength: grid.length(),
            });
        }
        Ok(())
    }

    pub fn into_profile(self, grid: &Grid) -> Result<ProfileField, SnapshotError> {
        self.check(grid)?;
        Ok(ProfileField { values: self.values })
    }

    pub fn into_phase(self, grid: &Grid) -> Result<PhaseField, SnapshotError> {
        self.check(grid)?;
        if let Some(v) = self.values.iter().find(|v| v.im != 0.0) {
            return Err(SnapshotError::NotReal(v.im));
        }
        Ok(PhaseField { values: self.values.iter().map(|v| v.re).collect() })
    }
}
