//! Gaussian noise white in time and Riesz-correlated in space, sampled
//! on a periodic space-time grid as cell masses.

mod grid;
pub mod io;
mod sampler;
mod test_fn;

pub use grid::GridSpec;
pub use sampler::{
    sample_noise, sample_with, spectral_eigenvalues, NoiseGrid, NoiseSpectrum, SeedProvenance,
};
pub use test_fn::{
    covariance_functional, fourier_energy, h_norm_realspace, spatial_covariance, Lattice,
    SpatialProfile, TestFunction,
};

use crate::error::{Error, Result};
use crate::wave_kernel::{calibrated_ckbeta, store_calibration, WaveParams};

/// Bump widths used to calibrate c_{k,β}.
pub const CALIBRATION_WIDTHS: [f64; 5] = [0.2, 0.35, 0.5, 0.75, 1.0];

/// Largest accepted coefficient of variation of the calibration ratios.
pub const CALIBRATION_CV_LIMIT: f64 = 1e-3;

/// ∫ |Fφ(ξ)|² μ(dξ) with the calibrated spectral measure.
pub fn h_norm_fourier(phi: &TestFunction, beta: f64, k: usize) -> Result<f64> {
    let params = WaveParams::new(k, beta)?;
    let ck = calibrated_ckbeta(params).ok_or_else(|| {
        Error::State(format!(
            "c_(k,beta) not calibrated for k = {k}, beta = {beta}"
        ))
    })?;
    Ok(ck * fourier_energy(phi, beta, k)?)
}

/// Ratios of the real-space norm to the bare Fourier energy over the bump battery.
pub fn calibration_ratios(beta: f64, k: usize) -> Result<Vec<f64>> {
    WaveParams::new(k, beta)?;
    CALIBRATION_WIDTHS
        .iter()
        .map(|&w| {
            let phi = TestFunction::bump(k, w);
            Ok(h_norm_realspace(&phi, beta, k)? / fourier_energy(&phi, beta, k)?)
        })
        .collect()
}

/// c_{k,β}: the constant relating ∫∫ φφ|x − y|^(−β) to ∫ |Fφ|² |ξ|^(β−k) dξ,
/// cached after the first call.
pub fn calibrate_ckbeta(beta: f64, k: usize) -> Result<f64> {
    let params = WaveParams::new(k, beta)?;
    if let Some(c) = calibrated_ckbeta(params) {
        return Ok(c);
    }
    let r = calibration_ratios(beta, k)?;
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let cv = sd / mean;
    if !(cv < CALIBRATION_CV_LIMIT) || !(mean > 0.0) {
        return Err(Error::Calibration {
            cv,
            limit: CALIBRATION_CV_LIMIT,
        });
    }
    Ok(store_calibration(params, mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_matches_gamma_constant() {
        use statrs::function::gamma::gamma;
        use std::f64::consts::PI;
        for (k, b) in [(1usize, 0.5), (2, 0.8), (3, 1.2), (1, 0.3), (2, 1.5)] {
            let c = calibrate_ckbeta(b, k).unwrap();
            let kf = k as f64;
            let e = PI.powf(kf / 2.0) * 2f64.powf(kf - b) * gamma((kf - b) / 2.0)
                / (gamma(b / 2.0) * (2.0 * PI).powf(kf));
            assert!((c / e - 1.0).abs() < 1e-9, "k={k} b={b}: {c} vs {e}");
            assert_eq!(calibrate_ckbeta(b, k).unwrap(), c);
        }
    }

    #[test]
    fn fourier_norm_needs_calibration_then_matches_realspace() {
        let phi = TestFunction::unit_box(&[0.0], 0.0, 1.0);
        calibrate_ckbeta(0.5, 1).unwrap();
        let f = h_norm_fourier(&phi, 0.5, 1).unwrap();
        let r = h_norm_realspace(&phi, 0.5, 1).unwrap();
        assert!((f / r - 1.0).abs() < 1e-8, "{f} vs {r}");
        assert!((r - 8.0 / 3.0).abs() < 1e-12);
    }
}
