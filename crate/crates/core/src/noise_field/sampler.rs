use super::grid::GridSpec;
use crate::cells::{box_integral, interval_pair_mean, Affine, RadialKernel};
use crate::error::{Error, Result};
use crate::fft::{signed_index, unravel, FftNd};
use crate::rng::{substream, substream_id};
use crate::wave_kernel::WaveParams;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const NOISE_TAG: u64 = 0x4E4F_4953_45;

/// Eigenvalues of the per-unit-time covariance of cell masses on the
/// periodic lattice, with the sampling scales derived from them.
pub struct NoiseSpectrum {
    grid: GridSpec,
    params: WaveParams,
    eig: Vec<f64>,
    scale: Vec<f64>,
    conj: Vec<usize>,
    min_raw: f64,
}

/// Circulant eigenvalues for k = 1 from the exact cell covariance
/// dx^(2−β)·w(j), wrapped at N/2.
fn circulant_eigenvalues(n: usize, dx: f64, beta: f64) -> Vec<f64> {
    let scale = dx.powf(2.0 - beta);
    let mut c: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(scale * interval_pair_mean(beta, j.min(n - j) as i64), 0.0))
        .collect();
    FftNd::new(&[n]).forward(&mut c);
    c.iter().map(|v| v.re).collect()
}

/// Eigenvalues from the aliased spectral sum (2π)^k dx^k Σ_q g(ξ + 2πq/dx) Π sinc²,
/// where g = ck·|ξ|^(β−k) and the q = 0 term uses the average of g over the
/// frequency cell around ξ_p.
pub fn spectral_eigenvalues(n: usize, k: usize, dx: f64, beta: f64, ck: f64) -> Vec<f64> {
    let a = k as f64 - beta;
    let dxi = 2.0 * PI / (n as f64 * dx);
    let near_w = 5usize;
    let mut near = vec![0.0; near_w.pow(k as u32)];
    let mut idx = [0usize; 3];
    for (f, v) in near.iter_mut().enumerate() {
        unravel(f, &vec![near_w; k], &mut idx[..k]);
        let lo: Vec<f64> = idx[..k].iter().map(|&i| i as f64 - 2.0 - 0.5).collect();
        let hi: Vec<f64> = lo.iter().map(|x| x + 1.0).collect();
        *v = box_integral(&lo, &hi, &vec![Affine::ONE; k], RadialKernel::Power(a));
    }
    let cell_mean = |p: &[i64]| -> f64 {
        if p.iter().all(|&x| x.abs() <= 2) {
            let f = p.iter().fold(0, |acc, &x| acc * near_w + (x + 2) as usize);
            near[f]
        } else {
            let r2: f64 = p.iter().map(|&x| (x * x) as f64).sum();
            r2.powf(-0.5 * a) * (1.0 + a * (a + 2.0 - k as f64) / (24.0 * r2))
        }
    };
    let q_range: i64 = if k == 3 { 2 } else { 4 };
    let dims = vec![n; k];
    let pref = (2.0 * PI * dx).powi(k as i32) * ck * dxi.powf(-a);
    let nn = n as i64;
    (0..n.pow(k as u32))
        .into_par_iter()
        .map(|flat| {
            let mut pi = [0usize; 3];
            unravel(flat, &dims, &mut pi[..k]);
            let p: Vec<i64> = pi[..k].iter().map(|&x| signed_index(x, n)).collect();
            let sinc2 = |m: i64| {
                if m == 0 {
                    1.0
                } else {
                    let u = PI * m as f64 / n as f64;
                    (u.sin() / u).powi(2)
                }
            };
            let mut total = 0.0;
            let span = (2 * q_range + 1) as usize;
            let mut qi = [0usize; 3];
            for qf in 0..span.pow(k as u32) {
                unravel(qf, &vec![span; k], &mut qi[..k]);
                let mut m = [0i64; 3];
                let mut zero = true;
                let mut s2 = 1.0;
                for ax in 0..k {
                    let q = qi[ax] as i64 - q_range;
                    zero &= q == 0;
                    m[ax] = p[ax] + nn * q;
                    s2 *= sinc2(m[ax]);
                }
                let g = if zero {
                    cell_mean(&p)
                } else {
                    let r2: f64 = m[..k].iter().map(|&x| (x * x) as f64).sum();
                    r2.powf(-0.5 * a)
                };
                total += g * s2;
            }
            pref * total
        })
        .collect()
}

impl NoiseSpectrum {
    pub fn new(grid: GridSpec, params: WaveParams) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        if grid.k != params.k {
            return Err(Error::Config(format!(
                "grid dimension {} differs from model dimension {}",
                grid.k, params.k
            )));
        }
        let n = grid.n_space;
        let k = grid.k;
        let eig_raw = if k == 1 {
            circulant_eigenvalues(n, grid.dx(), params.beta)
        } else {
            let ck = super::calibrate_ckbeta(params.beta, k)?;
            spectral_eigenvalues(n, k, grid.dx(), params.beta, ck)
        };
        let min_raw = eig_raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let eig: Vec<f64> = eig_raw.iter().map(|&v| v.max(0.0)).collect();
        let total = grid.points() as f64;
        let scale = eig.iter().map(|&l| (total * grid.dt * l).sqrt()).collect();
        let dims = grid.dims();
        let conj = (0..grid.points())
            .map(|f| {
                let mut idx = [0usize; 3];
                unravel(f, &dims, &mut idx[..k]);
                idx[..k].iter().fold(0, |acc, &i| acc * n + (n - i) % n)
            })
            .collect();
        Ok(NoiseSpectrum {
            grid,
            params,
            eig,
            scale,
            conj,
            min_raw,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> WaveParams {
        self.params
    }

    /// Per-unit-time eigenvalues, clamped at zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    /// Smallest eigenvalue before clamping.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_raw
    }

    /// Index of the frequency −p.
    pub fn conjugate_index(&self, p: usize) -> usize {
        self.conj[p]
    }

    /// DFT of the cell-mass slice (m, j) for the given seed.
    pub fn slice_spectrum(&self, seed: u64, m: usize, j: usize, out: &mut [Complex64]) {
        let mut rng = substream(&[seed, NOISE_TAG, m as u64, j as u64]);
        let len = out.len();
        for v in out.iter_mut() {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            *v = Complex64::new(a, b);
        }
        // ½ s_p (W_p + conj W_{−p}) is Hermitian: DFT of a real field
        for p in 0..len {
            let q = self.conj[p];
            if q < p {
                continue;
            }
            let (wp, wq) = (out[p], out[q]);
            let vp = 0.5 * self.scale[p] * (wp + wq.conj());
            out[p] = vp;
            out[q] = vp.conj();
        }
    }

    /// Real-space cell masses of slice (m, j).
    pub fn slice_real(
        &self,
        seed: u64,
        m: usize,
        j: usize,
        fft: &FftNd,
        buf: &mut [Complex64],
        out: &mut [f64],
    ) {
        self.slice_spectrum(seed, m, j, buf);
        fft.inverse(buf);
        let inv = 1.0 / buf.len() as f64;
        for (o, v) in out.iter_mut().zip(buf.iter()) {
            *o = v.re * inv;
        }
    }

    /// Per-unit-time covariance of two cells at lattice offset `lag` (periodic).
    pub fn cell_covariance(&self, lag: &[i64]) -> f64 {
        let n = self.grid.n_space;
        let k = self.grid.k;
        let dims = self.grid.dims();
        let mut idx = [0usize; 3];
        let mut total = 0.0;
        for (f, &l) in self.eig.iter().enumerate() {
            unravel(f, &dims, &mut idx[..k]);
            let phase: f64 = (0..k)
                .map(|a| 2.0 * PI * idx[a] as f64 * lag[a] as f64 / n as f64)
                .sum();
            total += l * phase.cos();
        }
        total / self.grid.points() as f64
    }
}

/// Master seed and the rule mapping (time index, component) to a substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
}

impl SeedProvenance {
    pub fn substream_id(&self, m: usize, j: usize) -> u64 {
        substream_id(&[self.master_seed, NOISE_TAG, m as u64, j as u64])
    }
}

/// Cell masses ΔM^j(t_m, cell) laid out as (time, component, row-major space).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    pub grid: GridSpec,
    pub d: usize,
    pub beta: f64,
    pub provenance: SeedProvenance,
    pub increments: Vec<f64>,
}

impl NoiseGrid {
    pub fn zeros(grid: GridSpec, d: usize, beta: f64, master_seed: u64) -> Self {
        NoiseGrid {
            grid,
            d,
            beta,
            provenance: SeedProvenance { master_seed },
            increments: vec![0.0; grid.n_time * d * grid.points()],
        }
    }

    pub fn slice(&self, m: usize, j: usize) -> &[f64] {
        let np = self.grid.points();
        let start = (m * self.d + j) * np;
        &self.increments[start..start + np]
    }

    pub fn slice_mut(&mut self, m: usize, j: usize) -> &mut [f64] {
        let np = self.grid.points();
        let start = (m * self.d + j) * np;
        &mut self.increments[start..start + np]
    }

    /// Sets every increment from time index `m` on to zero.
    pub fn zero_from(&mut self, m: usize) {
        let np = self.grid.points();
        let start = (m * self.d * np).min(self.increments.len());
        self.increments[start..].iter_mut().for_each(|v| *v = 0.0);
    }

    /// M^j(φ): the cell masses weighted by the cell averages of φ.
    pub fn apply(&self, phi: &super::TestFunction, j: usize) -> Result<f64> {
        let weights = phi.profile.cell_weights(&self.grid)?;
        let mut total = 0.0;
        for m in 0..self.grid.n_time {
            let (t0, t1) = (self.grid.time(m), self.grid.time(m + 1));
            let overlap = (t1.min(phi.time.1) - t0.max(phi.time.0)).max(0.0) / self.grid.dt;
            if overlap == 0.0 {
                continue;
            }
            let s: f64 = weights.iter().map(|&(c, w)| w * self.slice(m, j)[c]).sum();
            total += overlap * s;
        }
        Ok(total)
    }
}

pub(crate) fn validate_beta(k: usize, beta: f64) -> Result<WaveParams> {
    WaveParams::new(k, beta)
}

/// Independent stationary Gaussian slices for every (time step, component).
pub fn sample_noise(grid: GridSpec, d: usize, beta: f64, master_seed: u64) -> Result<NoiseGrid> {
    grid.validate()?;
    let params = validate_beta(grid.k, beta)?;
    if d == 0 {
        return Err(Error::Config("d must be at least 1".into()));
    }
    let spec = NoiseSpectrum::new(grid, params)?;
    Ok(sample_with(&spec, d, master_seed))
}

pub fn sample_with(spec: &NoiseSpectrum, d: usize, master_seed: u64) -> NoiseGrid {
    let grid = *spec.grid();
    let mut noise = NoiseGrid::zeros(grid, d, spec.params().beta, master_seed);
    let np = grid.points();
    let fft = FftNd::new(&grid.dims());
    noise
        .increments
        .par_chunks_mut(np)
        .enumerate()
        .for_each_init(
            || vec![Complex64::new(0.0, 0.0); np],
            |buf, (slot, out)| {
                let (m, j) = (slot / d, slot % d);
                spec.slice_real(master_seed, m, j, &fft, buf, out);
            },
        );
    noise
}
