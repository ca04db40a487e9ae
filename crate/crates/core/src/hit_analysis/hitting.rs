use crate::error::{Error, Result};
use crate::noise_field::GridSpec;
use crate::potential_theory::TargetSet;
use crate::rng::path_seed;
use crate::spde_sim::{ModelSpec, Simulator};
use crate::stats::{wilson_interval, Z95};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Parameter set I × K: times in [t_min, t_max] and a box of R^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub space_lo: Vec<f64>,
    pub space_hi: Vec<f64>,
}

impl SpaceTimeWindow {
    pub fn new(t_min: f64, t_max: f64, space_lo: &[f64], space_hi: &[f64]) -> Result<Self> {
        let w = SpaceTimeWindow { t_min, t_max, space_lo: space_lo.to_vec(), space_hi: space_hi.to_vec() };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "window times need 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.space_lo.is_empty()
            || self.space_lo.len() != self.space_hi.len()
            || self.space_lo.iter().zip(&self.space_hi).any(|(a, b)| !(a <= b))
        {
            return Err(Error::Config("window space box needs lo <= hi in every axis".into()));
        }
        Ok(())
    }

    /// Stored time levels and flat spatial indices of the grid inside the
    /// window.
    pub fn grid_points(&self, grid: &GridSpec) -> Result<(Vec<usize>, Vec<usize>)> {
        self.validate()?;
        if self.space_lo.len() != grid.k {
            return Err(Error::Config(format!(
                "window has {} space axes, grid has k = {}",
                self.space_lo.len(),
                grid.k
            )));
        }
        let l = grid.spatial_extent;
        if self.space_lo.iter().chain(&self.space_hi).any(|&v| v < -l || v >= l) {
            return Err(Error::Config(format!("window space box leaves the domain [-{l}, {l})")));
        }
        let slack = 1e-9 * grid.dt;
        if self.t_max > grid.t_final() + slack {
            return Err(Error::Config(format!(
                "window ends at {} after the grid horizon {}",
                self.t_max,
                grid.t_final()
            )));
        }
        let times: Vec<usize> = (0..=grid.n_time)
            .filter(|&n| {
                let t = grid.time(n);
                t >= self.t_min - slack && t <= self.t_max + slack
            })
            .collect();
        let axis: Vec<Vec<usize>> = (0..grid.k)
            .map(|a| {
                (0..grid.n_space)
                    .filter(|&i| {
                        let x = grid.coord(i);
                        x >= self.space_lo[a] - 1e-12 && x <= self.space_hi[a] + 1e-12
                    })
                    .collect()
            })
            .collect();
        if times.is_empty() || axis.iter().any(|v| v.is_empty()) {
            return Err(Error::Config("window contains no grid point".into()));
        }
        let mut flats = Vec::new();
        let mut idx = vec![0usize; grid.k];
        let mut pos = vec![0usize; grid.k];
        'outer: loop {
            for a in 0..grid.k {
                idx[a] = axis[a][pos[a]];
            }
            flats.push(grid.flat(&idx));
            for a in (0..grid.k).rev() {
                pos[a] += 1;
                if pos[a] < axis[a].len() {
                    continue 'outer;
                }
                pos[a] = 0;
            }
            break;
        }
        Ok((times, flats))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: usize,
    pub n_paths: usize,
    pub eps_snap: f64,
}

/// Closest approach of every path to every target, plus the increment
/// statistics behind the default snap tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct PathScan {
    /// distances[target][path]
    pub distances: Vec<Vec<f64>>,
    /// Ĉ with E|Δu|² ≈ Ĉ² h^{2δ} for one-step increments.
    pub snap_constant: f64,
    pub holder_exponent: f64,
    pub dt: f64,
    pub dx: f64,
}

impl PathScan {
    /// Ĉ (dt^δ + dx^δ).
    pub fn default_eps(&self) -> f64 {
        let d = self.holder_exponent;
        self.snap_constant * (self.dt.powf(d) + self.dx.powf(d))
    }

    pub fn estimate(&self, target: usize, eps: f64) -> HitEstimate {
        let dist = &self.distances[target];
        let hits = dist.iter().filter(|&&r| r <= eps).count();
        let n = dist.len();
        let (lo, hi) = wilson_interval(hits, n, Z95);
        HitEstimate { p_hat: hits as f64 / n as f64, ci_low: lo, ci_high: hi, hits, n_paths: n, eps_snap: eps }
    }
}

struct PathSummary {
    dist: Vec<f64>,
    inc_t: (f64, usize),
    inc_x: (f64, usize),
}

/// Simulates `n_paths` paths (path i uses the substream seed of
/// (master_seed, i)) and records, for each target, the smallest distance
/// between the target and u(t, x) over the window's grid points.
pub fn scan_paths(
    model: &ModelSpec,
    window: &SpaceTimeWindow,
    targets: &[TargetSet],
    grid: GridSpec,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathScan> {
    if n_paths < 100 {
        return Err(Error::Config(format!("n_paths = {n_paths} must be at least 100")));
    }
    for t in targets {
        t.validate()?;
        if t.dim != model.d {
            return Err(Error::Config(format!(
                "target dimension {} differs from the model dimension d = {}",
                t.dim, model.d
            )));
        }
    }
    let (times, flats) = window.grid_points(&grid)?;
    let sim = Simulator::new(model, grid)?;
    let d = model.d;
    let n = grid.n_space;
    let stride0 = n.pow(grid.k as u32 - 1);
    let in_window: std::collections::HashSet<usize> = flats.iter().copied().collect();
    let summaries: Vec<PathSummary> = (0..n_paths)
        .into_par_iter()
        .map(|p| -> Result<PathSummary> {
            let field = sim.run(path_seed(master_seed, p as u64), &times)?;
            let mut dist = vec![f64::INFINITY; targets.len()];
            let mut inc_t = (0.0, 0);
            let mut inc_x = (0.0, 0);
            for (slot, &tn) in times.iter().enumerate() {
                for &f in &flats {
                    let u = field.at_slot(slot, f);
                    for (best, t) in dist.iter_mut().zip(targets) {
                        let r = t.distance(u);
                        if r < *best {
                            *best = r;
                        }
                    }
                    if slot + 1 < times.len() && times[slot + 1] == tn + 1 {
                        let v = field.at_slot(slot + 1, f);
                        inc_t.0 += (0..d).map(|c| (v[c] - u[c]).powi(2)).sum::<f64>();
                        inc_t.1 += 1;
                    }
                    let next = f + stride0;
                    if (f / stride0) % n + 1 < n && in_window.contains(&next) {
                        let v = field.at_slot(slot, next);
                        inc_x.0 += (0..d).map(|c| (v[c] - u[c]).powi(2)).sum::<f64>();
                        inc_x.1 += 1;
                    }
                }
            }
            Ok(PathSummary { dist, inc_t, inc_x })
        })
        .collect::<Result<_>>()?;
    let delta = model.params.holder_exponent();
    let mut st = (0.0, 0usize);
    let mut sx = (0.0, 0usize);
    let mut distances = vec![Vec::with_capacity(n_paths); targets.len()];
    for s in &summaries {
        st.0 += s.inc_t.0;
        st.1 += s.inc_t.1;
        sx.0 += s.inc_x.0;
        sx.1 += s.inc_x.1;
        for (col, &r) in distances.iter_mut().zip(&s.dist) {
            col.push(r);
        }
    }
    let rate = |(sum, cnt): (f64, usize), h: f64| {
        if cnt == 0 {
            0.0
        } else {
            (sum / cnt as f64).sqrt() / h.powf(delta)
        }
    };
    let dx = grid.dx();
    Ok(PathScan {
        distances,
        snap_constant: rate(st, grid.dt).max(rate(sx, dx)),
        holder_exponent: delta,
        dt: grid.dt,
        dx,
    })
}

/// Fraction of paths that come within ε_snap of the target somewhere in the
/// window, with a Wilson 95% interval. ε_snap defaults to Ĉ(dt^δ + dx^δ).
pub fn mc_hitting_probability(
    model: &ModelSpec,
    window: &SpaceTimeWindow,
    target: &TargetSet,
    grid: GridSpec,
    n_paths: usize,
    master_seed: u64,
    eps_snap: Option<f64>,
) -> Result<HitEstimate> {
    let scan = scan_paths(model, window, std::slice::from_ref(target), grid, n_paths, master_seed)?;
    let eps = eps_snap.unwrap_or_else(|| scan.default_eps());
    if !(eps >= 0.0) {
        return Err(Error::Config(format!("eps_snap = {eps} must be nonnegative")));
    }
    Ok(scan.estimate(0, eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_points() {
        let g = GridSpec::lockstep(1, 2.0, 64, 1.0).unwrap();
        let w = SpaceTimeWindow::new(0.5, 1.0, &[-0.25], &[0.25]).unwrap();
        let (t, x) = w.grid_points(&g).unwrap();
        assert_eq!(t.first(), Some(&8));
        assert_eq!(t.last(), Some(&16));
        assert_eq!(x.len(), 9);
        assert!(SpaceTimeWindow::new(0.0, 1.0, &[0.0], &[0.0]).is_err());
        let far = SpaceTimeWindow::new(0.5, 1.0, &[1.0], &[3.0]).unwrap();
        assert!(far.grid_points(&g).is_err());
        let late = SpaceTimeWindow::new(0.5, 2.0, &[0.0], &[0.0]).unwrap();
        assert!(late.grid_points(&g).is_err());
    }
}
