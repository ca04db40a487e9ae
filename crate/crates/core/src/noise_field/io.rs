//! Flat little-endian binary layout shared by noise and solution files.

use super::grid::GridSpec;
use super::sampler::{NoiseGrid, SeedProvenance};
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub const NOISE_MAGIC: [u8; 8] = *b"SWNOISE\0";
pub const FIELD_MAGIC: [u8; 8] = *b"SWFIELD\0";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub magic: [u8; 8],
    pub grid: GridSpec,
    pub d: usize,
    pub beta: f64,
    pub seed: u64,
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 8);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Header {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.magic)?;
        write_u64(w, FORMAT_VERSION)?;
        for v in [self.grid.k, self.d, self.grid.n_space, self.grid.n_time] {
            write_u64(w, v as u64)?;
        }
        write_f64(w, self.grid.spatial_extent)?;
        write_f64(w, self.grid.dt)?;
        write_f64(w, self.beta)?;
        write_u64(w, self.seed)
    }

    pub fn read<R: Read>(r: &mut R, magic: [u8; 8]) -> Result<Header> {
        let mut m = [0u8; 8];
        r.read_exact(&mut m)?;
        if m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(&m)
            )));
        }
        let version = read_u64(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let k = read_u64(r)? as usize;
        let d = read_u64(r)? as usize;
        let n_space = read_u64(r)? as usize;
        let n_time = read_u64(r)? as usize;
        let spatial_extent = read_f64(r)?;
        let dt = read_f64(r)?;
        let beta = read_f64(r)?;
        let seed = read_u64(r)?;
        let grid = GridSpec {
            spatial_extent,
            n_space,
            dt,
            n_time,
            k,
        };
        grid.validate()
            .map_err(|e| Error::Format(format!("invalid grid in header: {e}")))?;
        Ok(Header {
            magic,
            grid,
            d,
            beta,
            seed,
        })
    }
}

pub fn write_noise<W: Write>(noise: &NoiseGrid, w: &mut W) -> Result<()> {
    Header {
        magic: NOISE_MAGIC,
        grid: noise.grid,
        d: noise.d,
        beta: noise.beta,
        seed: noise.provenance.master_seed,
    }
    .write(w)?;
    write_f64s(w, &noise.increments)
}

pub fn read_noise<R: Read>(r: &mut R) -> Result<NoiseGrid> {
    let h = Header::read(r, NOISE_MAGIC)?;
    let n = h.grid.n_time * h.d * h.grid.points();
    let increments = read_f64s(r, n)?;
    Ok(NoiseGrid {
        grid: h.grid,
        d: h.d,
        beta: h.beta,
        provenance: SeedProvenance {
            master_seed: h.seed,
        },
        increments,
    })
}
