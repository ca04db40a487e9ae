//! Bessel-Riesz kernels, energies, capacities and Hausdorff measures on
//! finite unions of balls, boxes and points.

mod capacity;
mod hausdorff;
mod target;

pub use capacity::{capacity, capacity_with, CapacityOptions, CapacityProblem, CapacityResult};
pub use hausdorff::{hausdorff_measure, HausdorffResult};
pub use target::{Primitive, TargetSet};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Order γ of K_γ, with the constant c of the logarithmic kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOrder {
    pub gamma: f64,
    /// Only read at γ = 0. `None` means twice the diameter of the set.
    pub log_constant: Option<f64>,
}

impl KernelOrder {
    pub fn new(gamma: f64) -> Self {
        KernelOrder { gamma, log_constant: None }
    }

    pub fn log(c: f64) -> Self {
        KernelOrder { gamma: 0.0, log_constant: Some(c) }
    }

    /// c to use on a set of the given diameter.
    pub fn constant_for(&self, diameter: f64) -> Result<f64> {
        let c = self.log_constant.unwrap_or(2.0 * diameter);
        if self.gamma == 0.0 && diameter > 0.0 && !(c > diameter) {
            return Err(Error::Config(format!(
                "log kernel constant c = {c} must exceed the set diameter {diameter}"
            )));
        }
        Ok(c)
    }
}

/// K_γ(r): r^{−γ} for γ > 0, log(c/r) for γ = 0, 1 for γ < 0.
pub fn bessel_riesz_kernel(r: f64, order: KernelOrder) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("kernel distance must be positive, got {r}")));
    }
    let g = order.gamma;
    Ok(if g > 0.0 {
        r.powf(-g)
    } else if g == 0.0 {
        let c = order.log_constant.unwrap_or(1.0);
        (c / r).ln()
    } else {
        1.0
    })
}

/// Finitely supported probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub support: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

pub const SNAP_TOLERANCE: f64 = 1e-9;

impl DiscreteMeasure {
    pub fn new(support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = DiscreteMeasure { support, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn point_mass(x: &[f64]) -> Self {
        DiscreteMeasure { support: vec![x.to_vec()], weights: vec![1.0] }
    }

    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.weights.len() {
            return Err(Error::Config("measure needs one weight per support point".into()));
        }
        let dim = self.support[0].len();
        if self.support.iter().any(|p| p.len() != dim) {
            return Err(Error::Config("support points differ in dimension".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("measure weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("measure weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Checks that the support lies in `set` up to the snap tolerance.
    pub fn validate_in(&self, set: &TargetSet) -> Result<()> {
        self.validate()?;
        for p in &self.support {
            if p.len() != set.dim || !set.contains(p, SNAP_TOLERANCE) {
                return Err(Error::Config(format!("support point {p:?} is outside the target set")));
            }
        }
        Ok(())
    }
}

/// Σ_i Σ_j w_i w_j K_γ(|x_i − x_j|). For γ ≥ 0 the diagonal pairs are
/// coincident, so any atom makes the energy +∞.
pub fn energy(mu: &DiscreteMeasure, order: KernelOrder) -> f64 {
    debug_assert!(mu.validate().is_ok());
    if order.gamma < 0.0 {
        return 1.0;
    }
    f64::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(bessel_riesz_kernel(2.0, KernelOrder::new(1.0)).unwrap(), 0.5);
        let v = bessel_riesz_kernel(0.5, KernelOrder::log(1.0)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert_eq!(bessel_riesz_kernel(7.0, KernelOrder::new(-3.0)).unwrap(), 1.0);
        assert!(matches!(bessel_riesz_kernel(0.0, KernelOrder::new(1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn energy_examples() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(energy(&mu, KernelOrder::new(-0.5)), 1.0);
        assert_eq!(energy(&mu, KernelOrder::new(1.0)), f64::INFINITY);
        assert_eq!(energy(&DiscreteMeasure::point_mass(&[0.0]), KernelOrder::new(1.0)), f64::INFINITY);
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![0.5]).is_err());
        let seg = TargetSet::cube(&[0.0], &[1.0]);
        assert!(mu.validate_in(&seg).is_ok());
        assert!(DiscreteMeasure::point_mass(&[1.1]).validate_in(&seg).is_err());
    }

    #[test]
    fn log_constant_must_exceed_diameter() {
        assert!(KernelOrder::log(0.5).constant_for(1.0).is_err());
        assert_eq!(KernelOrder::new(0.0).constant_for(1.5).unwrap(), 3.0);
    }
}
