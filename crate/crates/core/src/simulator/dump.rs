//! Binary dumps of sampled configurations.
//!
//! Layout, little-endian: magic `SSKD`, version `u32`, `N` as `u32`, record
//! count as `u64`, then `count * N` values as `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSKD";
pub const VERSION: u32 = 1;

pub fn write_dump<W: Write>(mut w: W, n: usize, configs: &[Vec<f64>]) -> Result<()> {
    let n32 = u32::try_from(n).map_err(|_| Error::Validation(format!("N = {n} does not fit the dump header")))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&n32.to_le_bytes())?;
    w.write_all(&(configs.len() as u64).to_le_bytes())?;
    for c in configs {
        if c.len() != n {
            return Err(Error::Validation(format!("configuration of length {} in a dump with N = {n}", c.len())));
        }
        for x in c {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut head = [0u8; 20];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::Validation("not an SSKD dump".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Validation(format!("unsupported dump version {version}")));
    }
    let n = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes")) as usize;
    let mut buf = [0u8; 8];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            c.push(f64::from_le_bytes(buf));
        }
        out.push(c);
    }
    Ok((n, out))
}
