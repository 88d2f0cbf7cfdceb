//! Binary container for kernel tables and correlation matrices.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `DIRACEE\0` |
//! | 4     | format version (1) |
//! | 4     | payload kind (1 = kernel table, 2 = correlation matrix) |
//! | 4     | number of dimensions `r` |
//! | 8 r   | dimensions, `u64` each |
//! | 32    | SHA-256 of the canonical parameter JSON |
//! | 8 n   | payload: `n = prod dims` complex64 values (`f32` re, `f32` im), row-major |
//!
//! A kernel table has dims `[N, N, N, 4, 4]`; a correlation matrix `[d, d]`.

use std::io::{Read, Write};

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::lattice_model::{CorrelationMatrix, LatticeKernel};

pub const MAGIC: &[u8; 8] = b"DIRACEE\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum PayloadKind {
    KernelTable = 1,
    CorrelationMatrix = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: PayloadKind,
    pub dims: Vec<u64>,
    pub params_hash: [u8; 32],
    pub data: Vec<Complex32>,
}

impl Container {
    pub fn new(kind: PayloadKind, dims: Vec<u64>, params_hash: [u8; 32], data: &[Complex64]) -> Result<Self> {
        let n: u64 = dims.iter().product();
        if n as usize != data.len() {
            return Err(Error::InvalidArgument(format!(
                "dims {dims:?} describe {n} values, payload has {}",
                data.len()
            )));
        }
        Ok(Self {
            kind,
            dims,
            params_hash,
            data: data.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect(),
        })
    }

    pub fn kernel_table(kernel: &LatticeKernel, params_hash: [u8; 32]) -> Result<Self> {
        let n = kernel.lattice.points_per_dim as u64;
        let data: Vec<Complex64> = kernel.fields().iter().flat_map(|m| m.transpose().iter().copied().collect::<Vec<_>>()).collect();
        Self::new(PayloadKind::KernelTable, vec![n, n, n, 4, 4], params_hash, &data)
    }

    pub fn correlation_matrix(c: &CorrelationMatrix, params_hash: [u8; 32]) -> Result<Self> {
        let d = c.matrix.dim() as u64;
        Self::new(PayloadKind::CorrelationMatrix, vec![d, d], params_hash, c.matrix.as_slice())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.kind as u32).to_le_bytes())?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.params_hash)?;
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidArgument("not a container file (bad magic)".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::InvalidArgument(format!("unsupported container version {version}")));
        }
        let kind = match read_u32(&mut r)? {
            1 => PayloadKind::KernelTable,
            2 => PayloadKind::CorrelationMatrix,
            k => return Err(Error::InvalidArgument(format!("unknown payload kind {k}"))),
        };
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(Error::InvalidArgument(format!("implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            dims.push(u64::from_le_bytes(b));
        }
        let mut params_hash = [0u8; 32];
        r.read_exact(&mut params_hash)?;
        let n = dims.iter().try_fold(1u64, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument("dimension product overflows".into()))? as usize;
        let mut bytes = vec![0u8; 8 * n];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect();
        Ok(Self {
            kind,
            dims,
            params_hash,
            data,
        })
    }
}

/// Raw 32-byte SHA-256 of `bytes`.
pub fn params_digest(bytes: &[u8]) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).into()
}
