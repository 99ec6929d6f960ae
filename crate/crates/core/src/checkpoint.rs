//! Binary density-matrix checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! magic     8 bytes  "QCARHO\0\0"
//! version   u32      1
//! rows      u64
//! cols      u64
//! n_sites   u32
//! local_dim u32      2 (qubit) or 3 (g, r, e)
//! basis     u32      tag, see `Basis`
//! data      rows·cols pairs of f64 (re, im), row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

const MAGIC: &[u8; 8] = b"QCARHO\0\0";
const VERSION: u32 = 1;

/// Basis-ordering convention of a stored matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Qubits, site 1 most significant, `|0⟩` = ground.
    QubitMsbFirst,
    /// Three-level `(g, r, e)` digits, site 1 most significant.
    ThreeLevelMsbFirst,
}

impl Basis {
    fn tag(self) -> u32 {
        match self {
            Basis::QubitMsbFirst => 1,
            Basis::ThreeLevelMsbFirst => 2,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            1 => Ok(Basis::QubitMsbFirst),
            2 => Ok(Basis::ThreeLevelMsbFirst),
            other => Err(Error::Parse(format!("unknown basis tag {other}"))),
        }
    }

    pub fn local_dim(self) -> usize {
        match self {
            Basis::QubitMsbFirst => 2,
            Basis::ThreeLevelMsbFirst => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n_sites: usize,
    pub basis: Basis,
    pub rho: ComplexMatrix,
}

impl Checkpoint {
    pub fn new(rho: ComplexMatrix, n_sites: usize, basis: Basis) -> Result<Self> {
        let expected = basis.local_dim().checked_pow(n_sites as u32);
        if !rho.is_square() || expected != Some(rho.rows()) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix does not describe {n_sites} sites of local dimension {}",
                rho.rows(),
                rho.cols(),
                basis.local_dim()
            )));
        }
        Ok(Self { n_sites, basis, rho })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.rho.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.rho.cols() as u64).to_le_bytes())?;
        w.write_all(&(self.n_sites as u32).to_le_bytes())?;
        w.write_all(&(self.basis.local_dim() as u32).to_le_bytes())?;
        w.write_all(&self.basis.tag().to_le_bytes())?;
        for z in self.rho.as_slice() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a density-matrix checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let n_sites = read_u32(&mut r)? as usize;
        let local_dim = read_u32(&mut r)? as usize;
        let basis = Basis::from_tag(read_u32(&mut r)?)?;
        if local_dim != basis.local_dim() {
            return Err(Error::Parse(format!("local dimension {local_dim} contradicts basis tag")));
        }
        let len = rows.checked_mul(cols).filter(|&l| l <= 1 << 26).ok_or_else(|| Error::Parse("implausible matrix size".into()))?;
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 16];
        for _ in 0..len {
            read_exact(&mut r, &mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            data.push(C64::new(re, im));
        }
        Self::new(ComplexMatrix::from_vec(rows, cols, data)?, n_sites, basis)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Parse(format!("truncated checkpoint: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let rho = ComplexMatrix::from_fn(8, 8, |r, c| C64::new((r * 8 + c) as f64 / 7.0, -(r as f64) * 1e-300));
        let cp = Checkpoint::new(rho, 3, Basis::QubitMsbFirst).unwrap();
        let mut bytes = Vec::new();
        cp.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 8 + 8 + 4 + 4 + 4 + 64 * 16);
        assert_eq!(Checkpoint::read_from(bytes.as_slice()).unwrap(), cp);
    }

    #[test]
    fn rejects_corruption() {
        let cp = Checkpoint::new(ComplexMatrix::identity(9), 2, Basis::ThreeLevelMsbFirst).unwrap();
        let mut bytes = Vec::new();
        cp.write_to(&mut bytes).unwrap();
        assert!(Checkpoint::read_from(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
        assert!(Checkpoint::new(ComplexMatrix::identity(8), 2, Basis::QubitMsbFirst).is_err());
    }
}
