use super::field::SolutionField;
use super::ModelSpec;
use crate::error::{Error, Result};
use crate::fft::{signed_index, unravel, FftNd};
use crate::noise_field::{GridSpec, NoiseGrid, NoiseSpectrum};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Per-mode leapfrog U_{n+1} = 2cos θ U_n − U_{n−1} + c (S_n + S_{n−1}),
/// which sums the light-cone kernel against the cell masses S exactly.
/// At k = 1 the kernel is the discrete window ½·1{|i − j| ≤ n − m − 1};
/// at k ≥ 2 it is sin((t − r)|ξ|)/|ξ| integrated over each step.
pub struct Synthesizer {
    model: ModelSpec,
    grid: GridSpec,
    spec: NoiseSpectrum,
    fft: FftNd,
    two_cos: Vec<f64>,
    c1: Vec<f64>,
    sigma: Vec<f64>,
    hash: u64,
}

fn mode_coefficients(grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n_space;
    let k = grid.k;
    let dx = grid.dx();
    let dt = grid.dt;
    let dims = grid.dims();
    let mut idx = [0usize; 3];
    let mut two_cos = Vec::with_capacity(grid.points());
    let mut c1 = Vec::with_capacity(grid.points());
    for f in 0..grid.points() {
        unravel(f, &dims, &mut idx[..k]);
        if k == 1 {
            let theta = 2.0 * PI * signed_index(idx[0], n) as f64 / n as f64;
            two_cos.push(2.0 * theta.cos());
            c1.push(0.5);
        } else {
            let xi2: f64 = idx[..k]
                .iter()
                .map(|&i| (2.0 * PI * signed_index(i, n) as f64 / (n as f64 * dx)).powi(2))
                .sum();
            let theta = xi2.sqrt() * dt;
            two_cos.push(2.0 * theta.cos());
            // (1 − cos θ)/(dt |ξ|²) = 2 sin²(θ/2)/(dt |ξ|²)
            let c = if xi2 == 0.0 {
                0.5 * dt
            } else {
                2.0 * (0.5 * theta).sin().powi(2) / (dt * xi2)
            };
            c1.push(c / dx.powi(k as i32));
        }
    }
    (two_cos, c1)
}

impl Synthesizer {
    pub fn new(model: &ModelSpec, grid: GridSpec) -> Result<Self> {
        model.validate()?;
        grid.validate()?;
        if grid.k != model.params.k {
            return Err(Error::Config(format!(
                "grid dimension {} differs from model dimension {}",
                grid.k, model.params.k
            )));
        }
        if !model.coeffs.is_additive() {
            return Err(Error::Unsupported(
                "additive synthesis needs a constant sigma".into(),
            ));
        }
        if model.coeffs.has_drift() && !model.drift_stepping {
            return Err(Error::Unsupported(
                "nonzero drift needs drift_stepping enabled".into(),
            ));
        }
        let spec = NoiseSpectrum::new(grid, model.params)?;
        let (two_cos, c1) = mode_coefficients(&grid);
        Ok(Synthesizer {
            sigma: model.coeffs.constant_sigma()?,
            hash: model.hash(),
            model: model.clone(),
            grid,
            spec,
            fft: FftNd::new(&grid.dims()),
            two_cos,
            c1,
        })
    }

    pub fn spectrum(&self) -> &NoiseSpectrum {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Path driven by the spectral noise of `seed`, stored at `times`.
    pub fn run(&self, seed: u64, times: &[usize]) -> Result<SolutionField> {
        self.run_source(seed, times, |m, j, out| {
            self.spec.slice_spectrum(seed, m, j, out)
        })
    }

    /// Path driven by a given noise grid.
    pub fn run_with_noise(&self, noise: &NoiseGrid, times: &[usize]) -> Result<SolutionField> {
        if noise.grid != self.grid || noise.d != self.model.d {
            return Err(Error::Config(
                "noise grid does not match the model grid".into(),
            ));
        }
        self.run_source(noise.provenance.master_seed, times, |m, j, out| {
            for (o, &v) in out.iter_mut().zip(noise.slice(m, j)) {
                *o = Complex64::new(v, 0.0);
            }
            self.fft.forward(out);
        })
    }

    fn run_source<F>(&self, seed: u64, times: &[usize], mut fill: F) -> Result<SolutionField>
    where
        F: FnMut(usize, usize, &mut [Complex64]),
    {
        let g = &self.grid;
        let d = self.model.d;
        let np = g.points();
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
        let zero = Complex64::new(0.0, 0.0);
        let mut prev = vec![vec![zero; np]; d];
        let mut cur = vec![vec![zero; np]; d];
        let mut s_prev = vec![vec![zero; np]; d];
        let mut s_cur = vec![vec![zero; np]; d];
        let mut raw = vec![vec![zero; np]; d];
        let mut buf = vec![zero; np];
        let drift = self.model.coeffs.has_drift();
        let mut state = vec![0.0; np * d];
        let inv = 1.0 / np as f64;
        let mass = g.dt * g.dx().powi(g.k as i32);
        for n in 0..last {
            for (j, r) in raw.iter_mut().enumerate() {
                fill(n, j, r);
            }
            for i in 0..d {
                let s = &mut s_cur[i];
                s.iter_mut().for_each(|v| *v = zero);
                for (j, r) in raw.iter().enumerate() {
                    let w = self.sigma[i * d + j];
                    if w != 0.0 {
                        for (o, &v) in s.iter_mut().zip(r) {
                            *o += w * v;
                        }
                    }
                }
            }
            if drift && n > 0 {
                for i in 0..d {
                    buf.copy_from_slice(&cur[i]);
                    self.fft.inverse(&mut buf);
                    for (p, v) in buf.iter().enumerate() {
                        state[p * d + i] = v.re * inv;
                    }
                }
                let mut b = vec![0.0; d];
                let mut bf = vec![vec![zero; np]; d];
                for p in 0..np {
                    self.model
                        .coeffs
                        .drift_into(&state[p * d..(p + 1) * d], &mut b);
                    for i in 0..d {
                        bf[i][p] = Complex64::new(b[i] * mass, 0.0);
                    }
                }
                for i in 0..d {
                    self.fft.forward(&mut bf[i]);
                    for (o, v) in s_cur[i].iter_mut().zip(&bf[i]) {
                        *o += v;
                    }
                }
            } else if drift {
                let b = self.model.coeffs.drift_at(&vec![0.0; d]);
                for i in 0..d {
                    // constant field: only the zero mode
                    s_cur[i][0] += b[i] * mass * np as f64;
                }
            }
            for i in 0..d {
                let (p, c, sc, sp) = (&mut prev[i], &cur[i], &s_cur[i], &s_prev[i]);
                for q in 0..np {
                    p[q] = self.two_cos[q] * c[q] - p[q] + self.c1[q] * (sc[q] + sp[q]);
                }
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut s_prev, &mut s_cur);
            if let Some(slot) = field.slot(n + 1) {
                let out = field.slot_mut(slot);
                for i in 0..d {
                    buf.copy_from_slice(&cur[i]);
                    self.fft.inverse(&mut buf);
                    for (p, v) in buf.iter().enumerate() {
                        out[p * d + i] = v.re * inv;
                    }
                }
            }
        }
        Ok(field)
    }

    /// Exact variance of each component of u(t_n, x) under this scheme.
    pub fn marginal_variance(&self, n: usize) -> Result<Vec<f64>> {
        if self.model.coeffs.has_drift() {
            return Err(Error::Unsupported("marginal variance with drift".into()));
        }
        if n > self.grid.n_time {
            return Err(Error::Index(format!("time index {n} beyond n_time")));
        }
        let np = self.grid.points();
        let eig = self.spec.eigenvalues();
        let mut total = 0.0;
        for q in 0..np {
            // impulse response g_h of the recurrence
            let (mut a, mut b) = (0.0, 0.0);
            let mut s2 = 0.0;
            for h in 0..n {
                let src = if h <= 1 { self.c1[q] } else { 0.0 };
                let next = self.two_cos[q] * b - a + src;
                a = b;
                b = next;
                s2 += b * b;
            }
            total += self.grid.dt * eig[q] * s2;
        }
        total /= np as f64;
        let d = self.model.d;
        Ok((0..d)
            .map(|i| total * (0..d).map(|j| self.sigma[i * d + j].powi(2)).sum::<f64>())
            .collect())
    }
}

pub fn simulate_additive(
    model: &ModelSpec,
    grid: GridSpec,
    master_seed: u64,
) -> Result<SolutionField> {
    let s = Synthesizer::new(model, grid)?;
    let times: Vec<usize> = (0..=grid.n_time).collect();
    s.run(master_seed, &times)
}

pub fn simulate_additive_with_noise(model: &ModelSpec, noise: &NoiseGrid) -> Result<SolutionField> {
    let s = Synthesizer::new(model, noise.grid)?;
    let times: Vec<usize> = (0..=noise.grid.n_time).collect();
    s.run_with_noise(noise, &times)
}

pub fn marginal_variance(model: &ModelSpec, grid: GridSpec, n: usize) -> Result<Vec<f64>> {
    Synthesizer::new(model, grid)?.marginal_variance(n)
}
