use super::field::SolutionField;
use crate::error::{Error, Result};
use crate::noise_field::GridSpec;
use crate::rng::substream;
use crate::stats::mean_stderr;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A grid point (time index, spatial multi-index).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub n: usize,
    pub idx: Vec<usize>,
}

impl SpaceTimePoint {
    pub fn new(n: usize, idx: &[usize]) -> Self {
        SpaceTimePoint {
            n,
            idx: idx.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// |t − s| + |x − y|.
    pub separation: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Ê|u(t,x) − u(s,y)|^q per pair, accumulated path by path.
pub struct MomentAccumulator {
    grid: GridSpec,
    q: u32,
    pairs: Vec<(SpaceTimePoint, SpaceTimePoint)>,
    values: Vec<Vec<f64>>,
}

impl MomentAccumulator {
    pub fn new(grid: GridSpec, q: u32, pairs: &[(SpaceTimePoint, SpaceTimePoint)]) -> Result<Self> {
        if q != 2 && q != 4 {
            return Err(Error::Config(format!(
                "moment order q = {q} must be 2 or 4"
            )));
        }
        for (a, b) in pairs {
            for p in [a, b] {
                if p.n > grid.n_time
                    || p.idx.len() != grid.k
                    || p.idx.iter().any(|&i| i >= grid.n_space)
                {
                    return Err(Error::Index(format!("pair point {p:?} outside the grid")));
                }
            }
        }
        Ok(MomentAccumulator {
            grid,
            q,
            pairs: pairs.to_vec(),
            values: vec![Vec::new(); pairs.len()],
        })
    }

    /// Time indices a path must store for this accumulator.
    pub fn required_times(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.pairs.iter().flat_map(|(a, b)| [a.n, b.n]).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// |Δu|^q of one path for every pair.
    pub fn pair_values(&self, field: &SolutionField) -> Result<Vec<f64>> {
        if field.grid != self.grid {
            return Err(Error::Config(
                "field grid differs from the accumulator grid".into(),
            ));
        }
        self.pairs
            .iter()
            .map(|(a, b)| {
                let u = field.get(a.n, &a.idx)?;
                let v = field.get(b.n, &b.idx)?;
                let norm2: f64 = u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum();
                Ok(norm2.powi(self.q as i32 / 2))
            })
            .collect()
    }

    pub fn push(&mut self, values: &[f64]) {
        for (acc, &v) in self.values.iter_mut().zip(values) {
            acc.push(v);
        }
    }

    pub fn add(&mut self, field: &SolutionField) -> Result<()> {
        let v = self.pair_values(field)?;
        self.push(&v);
        Ok(())
    }

    pub fn separation(&self, a: &SpaceTimePoint, b: &SpaceTimePoint) -> f64 {
        let dt = (self.grid.time(a.n) - self.grid.time(b.n)).abs();
        let dx = self.grid.dx();
        let dist = a
            .idx
            .iter()
            .zip(&b.idx)
            .map(|(&i, &j)| ((i as f64 - j as f64) * dx).powi(2))
            .sum::<f64>()
            .sqrt();
        dt + dist
    }

    pub fn finish(&self) -> Vec<MomentRow> {
        self.pairs
            .iter()
            .zip(&self.values)
            .map(|((a, b), v)| {
                let (m, se) = mean_stderr(v);
                MomentRow {
                    separation: self.separation(a, b),
                    estimate: m,
                    stderr: if v.len() > 1 { se } else { f64::NAN },
                    samples: v.len(),
                }
            })
            .collect()
    }
}

/// Moment table over an ensemble of paths.
pub fn increment_moments(
    ensemble: &[SolutionField],
    q: u32,
    pairs: &[(SpaceTimePoint, SpaceTimePoint)],
) -> Result<Vec<MomentRow>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::Config("empty ensemble".into()))?;
    let mut acc = MomentAccumulator::new(first.grid, q, pairs)?;
    for f in ensemble {
        acc.add(f)?;
    }
    Ok(acc.finish())
}

/// Pairs (t, x) and (t − s·dt, x + s·dx e₁) at the last time level and the
/// centre node, with s = stride·2^j for j < scales.
pub fn dyadic_pairs(
    grid: &GridSpec,
    scales: usize,
    stride: usize,
) -> Result<Vec<(SpaceTimePoint, SpaceTimePoint)>> {
    if scales == 0 || stride == 0 {
        return Err(Error::Config("scales and stride must be positive".into()));
    }
    let n0 = grid.n_time;
    let centre = vec![grid.n_space / 2; grid.k];
    let top = stride << (scales - 1);
    if top > n0 || centre[0] + top >= grid.n_space {
        return Err(Error::Config(format!(
            "largest offset {top} does not fit a grid with n_time = {n0}, n_space = {}",
            grid.n_space
        )));
    }
    Ok((0..scales)
        .map(|j| {
            let s = stride << j;
            let mut other = centre.clone();
            other[0] += s;
            (SpaceTimePoint::new(n0, &centre), SpaceTimePoint::new(n0 - s, &other))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub delta: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub used: usize,
    /// Rows left out because the estimate or separation was not positive.
    pub excluded: Vec<usize>,
}

fn slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}

const BOOTSTRAP: usize = 200;

/// Least-squares slope of log Ê|Δu|^q against log separation, divided by q,
/// with a parametric bootstrap standard error.
pub fn fit_holder_exponent(table: &[MomentRow], q: u32) -> Result<HolderFit> {
    if q == 0 {
        return Err(Error::Config("q must be positive".into()));
    }
    let mut excluded = Vec::new();
    let mut rows = Vec::new();
    for (i, r) in table.iter().enumerate() {
        if r.estimate > 0.0 && r.separation > 0.0 && r.estimate.is_finite() {
            rows.push(r);
        } else {
            excluded.push(i);
        }
    }
    if rows.len() < 3 {
        return Err(Error::Fit(format!(
            "{} usable rows, need at least 3",
            rows.len()
        )));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.separation.ln()).collect();
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::Fit("all separations coincide".into()));
    }
    let y: Vec<f64> = rows.iter().map(|r| r.estimate.ln()).collect();
    let (s, c) = slope(&x, &y);
    let qf = q as f64;
    let mut rng = substream(&[0x484F_4C44, q as u64, rows.len() as u64]);
    let mut boot = Vec::with_capacity(BOOTSTRAP);
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for _ in 0..BOOTSTRAP {
        xs.clear();
        ys.clear();
        for (r, &lx) in rows.iter().zip(&x) {
            let se = if r.stderr.is_finite() { r.stderr } else { 0.0 };
            let z: f64 = rng.sample(StandardNormal);
            let m = r.estimate + se * z;
            if m > 0.0 {
                xs.push(lx);
                ys.push(m.ln());
            }
        }
        if xs.len() >= 3 {
            boot.push(slope(&xs, &ys).0 / qf);
        }
    }
    let (_, se_mean) = mean_stderr(&boot);
    let stderr = se_mean * (boot.len() as f64).sqrt();
    Ok(HolderFit {
        delta: s / qf,
        stderr: if stderr.is_finite() { stderr } else { f64::NAN },
        intercept: c,
        used: rows.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let rows: Vec<MomentRow> = (0..6)
            .map(|i| {
                let h = 0.5f64.powi(i);
                MomentRow {
                    separation: h,
                    estimate: 3.0 * h.powf(4.0 * 0.75),
                    stderr: 0.0,
                    samples: 1000,
                }
            })
            .collect();
        let f = fit_holder_exponent(&rows, 4).unwrap();
        assert!((f.delta - 0.75).abs() < 1e-12);
        assert!(f.stderr.abs() < 1e-12);
    }

    #[test]
    fn non_positive_rows_are_excluded() {
        let mut rows: Vec<MomentRow> = (1..5)
            .map(|i| MomentRow {
                separation: i as f64,
                estimate: i as f64,
                stderr: 0.01,
                samples: 10,
            })
            .collect();
        rows.push(MomentRow {
            separation: 0.1,
            estimate: -1e-9,
            stderr: 0.01,
            samples: 10,
        });
        let f = fit_holder_exponent(&rows, 2).unwrap();
        assert_eq!(f.excluded, vec![4]);
        assert!((f.delta - 0.5).abs() < 1e-12);
        assert!(fit_holder_exponent(&rows[..2], 2).is_err());
    }
}
