use crate::error::{Error, Result};
use crate::noise_field::io::{read_f64s, read_u64, write_f64s, write_u64, Header, FIELD_MAGIC};
use crate::noise_field::GridSpec;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// u(t_n, x) at the stored time levels, laid out as (time slot, row-major
/// space, component).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: GridSpec,
    pub d: usize,
    pub beta: f64,
    pub times: Vec<usize>,
    pub values: Vec<f64>,
    pub model_hash: u64,
    pub seed: u64,
    /// The backward light cone of the origin from t_final avoids the periodic wrap.
    pub light_cone_contained: bool,
}

impl SolutionField {
    pub fn zeros(
        grid: GridSpec,
        d: usize,
        beta: f64,
        times: Vec<usize>,
        model_hash: u64,
        seed: u64,
    ) -> Self {
        let len = times.len() * grid.points() * d;
        SolutionField {
            grid,
            d,
            beta,
            light_cone_contained: grid.light_cone_contained(
                grid.t_final(),
                &vec![0.0; grid.k],
                &vec![0.0; grid.k],
            ),
            times,
            values: vec![0.0; len],
            model_hash,
            seed,
        }
    }

    pub fn slot(&self, n: usize) -> Option<usize> {
        self.times.binary_search(&n).ok()
    }

    /// The d components at time slot `slot` and flat spatial index `flat`.
    pub fn at_slot(&self, slot: usize, flat: usize) -> &[f64] {
        let start = (slot * self.grid.points() + flat) * self.d;
        &self.values[start..start + self.d]
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut [f64] {
        let len = self.grid.points() * self.d;
        &mut self.values[slot * len..(slot + 1) * len]
    }

    /// u(t_n, x_idx) with bounds checks.
    pub fn get(&self, n: usize, idx: &[usize]) -> Result<&[f64]> {
        if idx.len() != self.grid.k || idx.iter().any(|&i| i >= self.grid.n_space) {
            return Err(Error::Index(format!(
                "spatial index {idx:?} outside the grid"
            )));
        }
        let slot = self
            .slot(n)
            .ok_or_else(|| Error::Index(format!("time index {n} is not stored")))?;
        Ok(self.at_slot(slot, self.grid.flat(idx)))
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        Header {
            magic: FIELD_MAGIC,
            grid: self.grid,
            d: self.d,
            beta: self.beta,
            seed: self.seed,
        }
        .write(w)?;
        write_u64(w, self.model_hash)?;
        write_u64(w, self.light_cone_contained as u64)?;
        write_u64(w, self.times.len() as u64)?;
        for &t in &self.times {
            write_u64(w, t as u64)?;
        }
        write_f64s(w, &self.values)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<SolutionField> {
        let h = Header::read(r, FIELD_MAGIC)?;
        let model_hash = read_u64(r)?;
        let light_cone_contained = read_u64(r)? != 0;
        let nt = read_u64(r)? as usize;
        if nt > h.grid.n_time + 1 {
            return Err(Error::Format(format!("{nt} stored times exceed the grid")));
        }
        let times = (0..nt)
            .map(|_| read_u64(r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let values = read_f64s(r, nt * h.grid.points() * h.d)?;
        Ok(SolutionField {
            grid: h.grid,
            d: h.d,
            beta: h.beta,
            times,
            values,
            model_hash,
            seed: h.seed,
            light_cone_contained,
        })
    }
}

pub fn write_field(field: &SolutionField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    field.write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SolutionField> {
    SolutionField::read(&mut BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub model_hash: u64,
    pub master_seed: u64,
    pub paths: Vec<EnsembleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub file: String,
    pub seed: u64,
}

/// One file per path plus `manifest.json`.
pub fn write_ensemble(
    dir: &Path,
    master_seed: u64,
    fields: &[SolutionField],
) -> Result<EnsembleManifest> {
    std::fs::create_dir_all(dir)?;
    let model_hash = fields.first().map_or(0, |f| f.model_hash);
    let mut paths = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        if f.model_hash != model_hash {
            return Err(Error::Config("ensemble mixes different models".into()));
        }
        let file = format!("path_{i:06}.bin");
        write_field(f, &dir.join(&file))?;
        paths.push(EnsembleEntry { file, seed: f.seed });
    }
    let manifest = EnsembleManifest {
        model_hash,
        master_seed,
        paths,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}

pub fn read_ensemble(dir: &Path) -> Result<(EnsembleManifest, Vec<SolutionField>)> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: EnsembleManifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let fields = manifest
        .paths
        .iter()
        .map(|e| read_field(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, fields))
}
