use super::field::SolutionField;
use super::ModelSpec;
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::noise_field::{GridSpec, NoiseGrid, NoiseSpectrum};
use num_complex::Complex64;

/// Explicit mild-form stepping at k = 1 with dt = dx. The window sum
/// u_n(i) = Σ_{m<n} Σ_{|j−i|≤n−m−1} ½ A_m(j), where
/// A_m = σ(u_m) ΔM_m + b(u_m) dt dx, is advanced with the discrete
/// d'Alembert identity
/// u_{n+1}(i) = u_n(i+1) + u_n(i−1) − u_{n−1}(i) + ½(A_n(i) + A_{n−1}(i)),
/// indices taken on the ring.
pub struct Stepper {
    model: ModelSpec,
    grid: GridSpec,
    spec: NoiseSpectrum,
    hash: u64,
}

impl Stepper {
    pub fn new(model: &ModelSpec, grid: GridSpec) -> Result<Self> {
        model.validate()?;
        grid.validate()?;
        if model.params.k != 1 || grid.k != 1 {
            return Err(Error::Unsupported(
                "state-dependent sigma is only simulated for k = 1".into(),
            ));
        }
        let dx = grid.dx();
        if (grid.dt - dx).abs() > 1e-12 * dx {
            return Err(Error::Config(format!(
                "the k = 1 stepper needs dt = dx, got dt = {} and dx = {dx}",
                grid.dt
            )));
        }
        Ok(Stepper {
            spec: NoiseSpectrum::new(grid, model.params)?,
            hash: model.hash(),
            model: model.clone(),
            grid,
        })
    }

    pub fn run(&self, seed: u64, times: &[usize]) -> Result<SolutionField> {
        let np = self.grid.n_space;
        let fft = FftNd::new(&[np]);
        let mut buf = vec![Complex64::new(0.0, 0.0); np];
        self.run_source(seed, times, |m, j, out| {
            self.spec.slice_real(seed, m, j, &fft, &mut buf, out)
        })
    }

    pub fn run_with_noise(&self, noise: &NoiseGrid, times: &[usize]) -> Result<SolutionField> {
        if noise.grid != self.grid || noise.d != self.model.d {
            return Err(Error::Config(
                "noise grid does not match the model grid".into(),
            ));
        }
        self.run_source(noise.provenance.master_seed, times, |m, j, out| {
            out.copy_from_slice(noise.slice(m, j))
        })
    }

    fn run_source<F>(&self, seed: u64, times: &[usize], mut fill: F) -> Result<SolutionField>
    where
        F: FnMut(usize, usize, &mut [f64]),
    {
        let g = &self.grid;
        let d = self.model.d;
        let n = g.n_space;
        let mut times = times.to_vec();
        times.sort_unstable();
        times.dedup();
        if times.last().is_some_and(|&t| t > g.n_time) {
            return Err(Error::Index(format!(
                "stored time beyond n_time = {}",
                g.n_time
            )));
        }
        let mut field = SolutionField::zeros(
            *g,
            d,
            self.model.params.beta,
            times.clone(),
            self.hash,
            seed,
        );
        let last = times.last().copied().unwrap_or(0);
        let coeffs = &self.model.coeffs;
        let drift = coeffs.has_drift();
        let mass = g.dt * g.dx();
        // layout (space, component)
        let mut prev = vec![0.0; n * d];
        let mut cur = vec![0.0; n * d];
        let mut a_prev = vec![0.0; n * d];
        let mut a_cur = vec![0.0; n * d];
        let mut noise = vec![vec![0.0; n]; d];
        let mut sig = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for step in 0..last {
            for (j, w) in noise.iter_mut().enumerate() {
                fill(step, j, w);
            }
            for i in 0..n {
                let u = &cur[i * d..(i + 1) * d];
                coeffs.sigma_into(u, &mut sig);
                if drift {
                    coeffs.drift_into(u, &mut b);
                }
                for c in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += sig[c * d + l] * noise[l][i];
                    }
                    if drift {
                        s += b[c] * mass;
                    }
                    a_cur[i * d + c] = s;
                }
            }
            for i in 0..n {
                let left = (i + n - 1) % n;
                let right = (i + 1) % n;
                for c in 0..d {
                    prev[i * d + c] = cur[right * d + c] + cur[left * d + c] - prev[i * d + c]
                        + 0.5 * (a_cur[i * d + c] + a_prev[i * d + c]);
                }
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut a_prev, &mut a_cur);
            if let Some(slot) = field.slot(step + 1) {
                field.slot_mut(slot).copy_from_slice(&cur);
            }
        }
        Ok(field)
    }
}

pub fn simulate_nonlinear_k1(
    model: &ModelSpec,
    grid: GridSpec,
    master_seed: u64,
) -> Result<SolutionField> {
    let times: Vec<usize> = (0..=grid.n_time).collect();
    Stepper::new(model, grid)?.run(master_seed, &times)
}
