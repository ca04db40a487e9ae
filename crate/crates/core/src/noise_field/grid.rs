use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Space-time grid on the periodic domain [−L, L)^k. Node i sits at
/// x_i = −L + i·dx and is the centre of the cell [x_i − dx/2, x_i + dx/2);
/// time levels are t_n = n·dt for n = 0..=n_time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spatial_extent: f64,
    pub n_space: usize,
    pub dt: f64,
    pub n_time: usize,
    pub k: usize,
}

const MAX_POINTS: usize = 1 << 24;

impl GridSpec {
    pub fn new(
        k: usize,
        spatial_extent: f64,
        n_space: usize,
        dt: f64,
        n_time: usize,
    ) -> Result<Self> {
        let g = GridSpec {
            spatial_extent,
            n_space,
            dt,
            n_time,
            k,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with dt = dx and enough steps to reach `t_final`.
    pub fn lockstep(k: usize, spatial_extent: f64, n_space: usize, t_final: f64) -> Result<Self> {
        let dx = 2.0 * spatial_extent / n_space as f64;
        let n_time = (t_final / dx).round() as usize;
        GridSpec::new(k, spatial_extent, n_space, dx, n_time.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(Error::Config(format!(
                "grid.k = {} must be 1, 2 or 3",
                self.k
            )));
        }
        if self.n_space < 8 || !self.n_space.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid.n_space = {} must be a power of two >= 8",
                self.n_space
            )));
        }
        if self
            .n_space
            .checked_pow(self.k as u32)
            .is_none_or(|p| p > MAX_POINTS)
        {
            return Err(Error::Config(format!(
                "grid.n_space = {} gives more than {MAX_POINTS} points in dimension {}",
                self.n_space, self.k
            )));
        }
        if !(self.spatial_extent > 0.0 && self.spatial_extent.is_finite()) {
            return Err(Error::Config(format!(
                "grid.spatial_extent = {} must be positive",
                self.spatial_extent
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "grid.dt = {} must be positive",
                self.dt
            )));
        }
        if self.n_time < 1 {
            return Err(Error::Config("grid.n_time must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.spatial_extent / self.n_space as f64
    }

    pub fn points(&self) -> usize {
        self.n_space.pow(self.k as u32)
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.n_space; self.k]
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.spatial_extent + i as f64 * self.dx()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.n_time)
    }

    /// Nearest node index along one axis, if x lies in the domain.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let i = ((x + self.spatial_extent) / self.dx()).round();
        if i >= 0.0 && (i as usize) < self.n_space {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Nearest time level, if t lies in [0, t_final].
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let n = (t / self.dt).round();
        if n >= 0.0 && n as usize <= self.n_time {
            Some(n as usize)
        } else {
            None
        }
    }

    /// Flat row-major index of a spatial multi-index.
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n_space + i)
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for a in (0..self.k).rev() {
            out[a] = flat % self.n_space;
            flat /= self.n_space;
        }
        out
    }

    /// Whether the backward light cone of the box [lo, hi] up to time t
    /// stays inside [−L/2, L/2]^k, so periodic wrap never reaches it.
    pub fn light_cone_contained(&self, t: f64, lo: &[f64], hi: &[f64]) -> bool {
        let half = 0.5 * self.spatial_extent + 1e-12;
        lo.iter()
            .zip(hi)
            .all(|(&a, &b)| a - t >= -half && b + t <= half)
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(1, 1.0, 6, 0.1, 4).is_err());
        assert!(GridSpec::new(1, 1.0, 12, 0.1, 4).is_err());
        assert!(GridSpec::new(1, 1.0, 16, 0.0, 4).is_err());
        assert!(GridSpec::new(1, 1.0, 16, 0.1, 0).is_err());
        assert!(GridSpec::new(3, 1.0, 512, 0.1, 1).is_err());
    }

    #[test]
    fn origin_is_a_node() {
        let g = GridSpec::new(1, 2.0, 128, 1.0 / 32.0, 32).unwrap();
        assert_eq!(g.node_index(0.0), Some(64));
        assert_eq!(g.coord(64), 0.0);
        assert_eq!(g.time_index(1.0), Some(32));
        assert!(g.light_cone_contained(1.0, &[0.0], &[0.0]));
        assert!(!g.light_cone_contained(1.0, &[0.0], &[0.5]));
    }

    #[test]
    fn lockstep_matches_dx() {
        let g = GridSpec::lockstep(1, 2.0, 64, 1.0).unwrap();
        assert_eq!(g.dt, g.dx());
        assert_eq!(g.n_time, 16);
    }
}
