use super::grid::GridSpec;
use super::sampler::spectral_eigenvalues;
use crate::cells::{box_integral, Affine, PairTable, RadialKernel};
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::quadrature::{adaptive, singular_at_zero};
use crate::wave_kernel::{sin2_power_integral, sphere_area};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Cubic lattice of cells; cell i along an axis is [origin + i·dx, origin + (i+1)·dx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: Vec<f64>,
    pub dx: f64,
    pub n: usize,
}

impl Lattice {
    /// The cells of a simulation grid.
    pub fn of_grid(grid: &GridSpec) -> Self {
        let dx = grid.dx();
        Lattice {
            origin: vec![-grid.spatial_extent - 0.5 * dx; grid.k],
            dx,
            n: grid.n_space,
        }
    }

    pub fn k(&self) -> usize {
        self.origin.len()
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.k() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpatialProfile {
    IndicatorBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
    },
    GridFunction {
        lattice: Lattice,
        values: Vec<f64>,
    },
}

/// Product-form test function 1_[t0, t1)(s)·φ(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub time: (f64, f64),
    pub profile: SpatialProfile,
}

impl TestFunction {
    pub fn spatial(profile: SpatialProfile) -> Self {
        TestFunction {
            time: (0.0, 1.0),
            profile,
        }
    }

    pub fn unit_box(lo: &[f64], t0: f64, t1: f64) -> Self {
        TestFunction {
            time: (t0, t1),
            profile: SpatialProfile::IndicatorBox {
                lo: lo.to_vec(),
                hi: lo.iter().map(|x| x + 1.0).collect(),
            },
        }
    }

    pub fn bump(k: usize, width: f64) -> Self {
        TestFunction::spatial(SpatialProfile::GaussianBump {
            center: vec![0.0; k],
            width,
            amplitude: 1.0,
        })
    }
}

fn coverage(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

impl SpatialProfile {
    pub fn dim(&self) -> usize {
        match self {
            SpatialProfile::IndicatorBox { lo, .. } => lo.len(),
            SpatialProfile::GaussianBump { center, .. } => center.len(),
            SpatialProfile::GridFunction { lattice, .. } => lattice.k(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpatialProfile::IndicatorBox { lo, hi } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                    return Err(Error::domain("indicator box needs lo <= hi in every axis"));
                }
            }
            SpatialProfile::GaussianBump { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::domain("bump width must be positive"));
                }
            }
            SpatialProfile::GridFunction { lattice, values } => {
                if values.len() != lattice.cells() {
                    return Err(Error::domain(
                        "grid function size does not match its lattice",
                    ));
                }
            }
        }
        Ok(())
    }

    /// (cell, average of φ over the cell · cell volume / dx^k) pairs on the grid's cells.
    pub fn cell_weights(&self, grid: &GridSpec) -> Result<Vec<(usize, f64)>> {
        let lat = Lattice::of_grid(grid);
        let vals = self.rasterize(&lat)?;
        Ok(vals
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect())
    }

    /// Cell averages of φ on a lattice: exact coverage fractions for boxes,
    /// centre values for bumps.
    pub fn rasterize(&self, lat: &Lattice) -> Result<Vec<f64>> {
        let k = lat.k();
        if self.dim() != k {
            return Err(Error::domain(
                "test function dimension differs from lattice",
            ));
        }
        let n = lat.n;
        let mut out = vec![0.0; lat.cells()];
        match self {
            SpatialProfile::IndicatorBox { lo, hi } => {
                let axis: Vec<Vec<f64>> = (0..k)
                    .map(|a| {
                        (0..n)
                            .map(|i| {
                                let c0 = lat.origin[a] + i as f64 * lat.dx;
                                coverage(c0, c0 + lat.dx, lo[a], hi[a]) / lat.dx
                            })
                            .collect()
                    })
                    .collect();
                for (f, v) in out.iter_mut().enumerate() {
                    let mut rem = f;
                    let mut w = 1.0;
                    for a in (0..k).rev() {
                        w *= axis[a][rem % n];
                        rem /= n;
                    }
                    *v = w;
                }
            }
            SpatialProfile::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                for (f, v) in out.iter_mut().enumerate() {
                    let mut rem = f;
                    let mut r2 = 0.0;
                    for a in (0..k).rev() {
                        let x = lat.origin[a] + ((rem % n) as f64 + 0.5) * lat.dx;
                        r2 += (x - center[a]).powi(2);
                        rem /= n;
                    }
                    *v = amplitude * (-r2 / (2.0 * width * width)).exp();
                }
            }
            SpatialProfile::GridFunction { lattice, values } => {
                if lattice != lat {
                    return Err(Error::Unsupported(
                        "grid functions on different lattices".into(),
                    ));
                }
                out.copy_from_slice(values);
            }
        }
        Ok(out)
    }
}

/// ∫_0^∞ y^(p−1) e^(−y²) dy by quadrature.
fn gauss_moment(p: f64) -> Result<f64> {
    let near = singular_at_zero(|y: f64| y.powf(p - 1.0) * (-y * y).exp(), p, 1e-16, 1e-14)?;
    let far = adaptive(
        |y: f64| y.powf(p - 1.0) * (-y * y).exp(),
        1.0,
        9.0,
        1e-16,
        1e-14,
        500,
    )?;
    Ok(near.value + far.value)
}

/// ∫_{R^k} exp(−|s − Δ|²/(2v)) |s|^(−β) ds with |Δ| = dist.
fn gauss_riesz(v: f64, dist: f64, k: usize, beta: f64) -> Result<f64> {
    let p = k as f64 - beta;
    if dist == 0.0 {
        return Ok(sphere_area(k) * (2.0 * v).powf(0.5 * p) * gauss_moment(p)?);
    }
    let g = |rho: f64, sign: f64| (-(rho - sign * dist).powi(2) / (2.0 * v)).exp();
    let angular = |rho: f64| -> f64 {
        let x = rho * dist / v;
        match k {
            1 => g(rho, 1.0) + g(rho, -1.0),
            2 => {
                let ring = adaptive(
                    |t: f64| (-x * (1.0 - t.cos())).exp(),
                    0.0,
                    PI,
                    1e-16,
                    1e-13,
                    500,
                )
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
                2.0 * g(rho, 1.0) * ring
            }
            _ => {
                if x == 0.0 {
                    4.0 * PI * (-(rho * rho + dist * dist) / (2.0 * v)).exp()
                } else {
                    2.0 * PI / x * g(rho, 1.0) * -(-2.0 * x).exp_m1()
                }
            }
        }
    };
    let upper = dist + 12.0 * v.sqrt();
    // ∫_0^U ρ^(p−1) f(ρ) dρ = U^p/p ∫_0^1 f(U y^(1/p)) dy, split where the peak sits
    let pk = (dist / upper).powf(p).clamp(0.0, 1.0);
    let f = |y: f64| angular(upper * y.powf(1.0 / p));
    let mut total = 0.0;
    let knots = [0.0, pk, 1.0];
    for w in knots.windows(2) {
        if w[1] > w[0] {
            total += adaptive(f, w[0], w[1], 1e-15, 1e-12, 4000)?.value;
        }
    }
    if !total.is_finite() {
        return Err(Error::Convergence {
            what: "angular integral",
            estimate: total,
            error: f64::INFINITY,
        });
    }
    Ok(total * upper.powf(p) / p)
}

/// Axis overlap function s ↦ |[a,b] ∩ [c − s, d − s]| as affine pieces.
fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Vec<(f64, f64, Affine)> {
    let t = |s: f64| (b.min(d - s) - a.max(c - s)).max(0.0);
    let mut br = [c - b, c - a, d - b, d - a];
    br.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for w in br.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 - s0 <= 0.0 {
            continue;
        }
        let (t0, t1) = (t(s0), t(s1));
        let beta = (t1 - t0) / (s1 - s0);
        out.push((
            s0,
            s1,
            Affine {
                alpha: t0 - beta * s0,
                beta,
            },
        ));
    }
    out
}

fn box_box(lo1: &[f64], hi1: &[f64], lo2: &[f64], hi2: &[f64], beta: f64) -> f64 {
    let k = lo1.len();
    let pieces: Vec<Vec<(f64, f64, Affine)>> = (0..k)
        .map(|a| trapezoid(lo1[a], hi1[a], lo2[a], hi2[a]))
        .collect();
    if pieces.iter().any(|p| p.is_empty()) {
        return 0.0;
    }
    let mut total = 0.0;
    let mut idx = vec![0usize; k];
    loop {
        let lo: Vec<f64> = (0..k).map(|a| pieces[a][idx[a]].0).collect();
        let hi: Vec<f64> = (0..k).map(|a| pieces[a][idx[a]].1).collect();
        let w: Vec<Affine> = (0..k).map(|a| pieces[a][idx[a]].2).collect();
        total += box_integral(&lo, &hi, &w, RadialKernel::Power(beta));
        let mut a = 0;
        loop {
            if a == k {
                return total;
            }
            idx[a] += 1;
            if idx[a] < pieces[a].len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

fn grid_grid(lat: &Lattice, f: &[f64], g: &[f64], beta: f64) -> f64 {
    let k = lat.k();
    let table = PairTable::new(k, beta);
    let fs: Vec<(Vec<i64>, f64)> = nonzero_cells(lat, f);
    let gs: Vec<(Vec<i64>, f64)> = nonzero_cells(lat, g);
    let mut total = 0.0;
    let mut m = [0i64; 3];
    for (i, a) in &fs {
        for (j, b) in &gs {
            for ax in 0..k {
                m[ax] = j[ax] - i[ax];
            }
            total += a * b * table.get(&m[..k]);
        }
    }
    total * lat.dx.powf(2.0 * k as f64 - beta)
}

fn nonzero_cells(lat: &Lattice, v: &[f64]) -> Vec<(Vec<i64>, f64)> {
    let k = lat.k();
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(f, &x)| {
            let mut idx = vec![0i64; k];
            let mut rem = f;
            for a in (0..k).rev() {
                idx[a] = (rem % lat.n) as i64;
                rem /= lat.n;
            }
            (idx, x)
        })
        .collect()
}

fn order_key(p: &SpatialProfile) -> Vec<f64> {
    match p {
        SpatialProfile::IndicatorBox { lo, hi } => [&[0.0][..], lo, hi].concat(),
        SpatialProfile::GaussianBump {
            center,
            width,
            amplitude,
        } => [&[1.0][..], center, &[*width, *amplitude]].concat(),
        SpatialProfile::GridFunction { values, .. } => [&[2.0][..], values].concat(),
    }
}

/// ∫∫ φ(x) ψ(y) |x − y|^(−β) dx dy.
pub fn spatial_covariance(
    phi: &SpatialProfile,
    psi: &SpatialProfile,
    beta: f64,
    k: usize,
) -> Result<f64> {
    phi.validate()?;
    psi.validate()?;
    if phi.dim() != k || psi.dim() != k {
        return Err(Error::domain("test function dimension differs from k"));
    }
    if !(beta > 0.0 && beta < k as f64) {
        return Err(Error::domain(format!("beta = {beta} must lie in (0, k)")));
    }
    // evaluate in a canonical order so swapping the arguments is exact
    let (phi, psi) = if order_key(psi)
        .iter()
        .zip(order_key(phi).iter())
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        == Some(std::cmp::Ordering::Less)
    {
        (psi, phi)
    } else {
        (phi, psi)
    };
    use SpatialProfile::*;
    match (phi, psi) {
        (IndicatorBox { lo: l1, hi: h1 }, IndicatorBox { lo: l2, hi: h2 }) => {
            Ok(box_box(l1, h1, l2, h2, beta))
        }
        (
            GaussianBump {
                center: c1,
                width: s1,
                amplitude: a1,
            },
            GaussianBump {
                center: c2,
                width: s2,
                amplitude: a2,
            },
        ) => {
            if *a1 == 0.0 || *a2 == 0.0 {
                return Ok(0.0);
            }
            let (v1, v2) = (s1 * s1, s2 * s2);
            let v = v1 + v2;
            let dist = c1
                .iter()
                .zip(c2)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let pref = a1 * a2 * (2.0 * PI * v1 * v2 / v).powf(0.5 * k as f64);
            Ok(pref * gauss_riesz(v, dist, k, beta)?)
        }
        (GridFunction { lattice, values }, other) | (other, GridFunction { lattice, values }) => {
            let g = other.rasterize(lattice)?;
            Ok(grid_grid(lattice, values, &g, beta))
        }
        _ => Err(Error::Unsupported(
            "covariance between a bump and a box; rasterize to a grid function first".into(),
        )),
    }
}

/// ∫_{R+} ds ∫∫ φ(s,x) ψ(s,y) |x − y|^(−β) dx dy for product-form test functions.
pub fn covariance_functional(
    phi: &TestFunction,
    psi: &TestFunction,
    beta: f64,
    k: usize,
) -> Result<f64> {
    let t = (phi.time.1.min(psi.time.1) - phi.time.0.max(psi.time.0)).max(0.0);
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(t * spatial_covariance(&phi.profile, &psi.profile, beta, k)?)
}

/// ∫∫ φ(x) φ(y) |x − y|^(−β) dx dy.
pub fn h_norm_realspace(phi: &TestFunction, beta: f64, k: usize) -> Result<f64> {
    spatial_covariance(&phi.profile, &phi.profile, beta, k)
}

/// ∫ |Fφ(ξ)|² |ξ|^(β−k) dξ with the bare density.
pub fn fourier_energy(phi: &TestFunction, beta: f64, k: usize) -> Result<f64> {
    phi.profile.validate()?;
    if phi.profile.dim() != k {
        return Err(Error::domain("test function dimension differs from k"));
    }
    match &phi.profile {
        SpatialProfile::GaussianBump {
            width, amplitude, ..
        } => {
            let s2 = width * width;
            Ok(amplitude
                * amplitude
                * (2.0 * PI * s2).powi(k as i32)
                * sphere_area(k)
                * width.powf(-beta)
                * gauss_moment(beta)?)
        }
        SpatialProfile::IndicatorBox { lo, hi } if k == 1 => {
            let len = hi[0] - lo[0];
            if len == 0.0 {
                return Ok(0.0);
            }
            Ok(8.0 * sin2_power_integral(0.5 * len, 3.0 - beta)?.value)
        }
        SpatialProfile::IndicatorBox { lo, hi } => {
            let side = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| b - a)
                .fold(f64::INFINITY, f64::min);
            if side == 0.0 {
                return Ok(0.0);
            }
            let dx = side / 16.0;
            let extent = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            let n = ((extent / dx).ceil() as usize).next_power_of_two();
            let lat = Lattice {
                origin: lo.clone(),
                dx,
                n,
            };
            let values = phi.profile.rasterize(&lat)?;
            grid_fourier_energy(&lat, &values, beta)
        }
        SpatialProfile::GridFunction { lattice, values } => {
            grid_fourier_energy(lattice, values, beta)
        }
    }
}

/// Discrete Fourier quadrature of a piecewise-constant function, zero padded ×4.
fn grid_fourier_energy(lat: &Lattice, values: &[f64], beta: f64) -> Result<f64> {
    let k = lat.k();
    let p = 4 * lat.n.next_power_of_two();
    let total = p.pow(k as u32);
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for (f, &v) in values.iter().enumerate() {
        let mut rem = f;
        let mut flat = 0;
        let mut mul = 1;
        for _ in 0..k {
            flat += (rem % lat.n) * mul;
            rem /= lat.n;
            mul *= p;
        }
        // axis order is irrelevant for |DFT|² against a radial weight
        buf[flat] = Complex64::new(v, 0.0);
    }
    FftNd::cubic(p, k).forward(&mut buf);
    let eig = spectral_eigenvalues(p, k, lat.dx, beta, 1.0);
    let s: f64 = buf.iter().zip(&eig).map(|(c, l)| c.norm_sqr() * l).sum();
    Ok(s / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_closed_form() {
        for b in [0.3, 0.5, 0.8] {
            let phi = TestFunction::unit_box(&[0.0], 0.0, 1.0);
            let v = covariance_functional(&phi, &phi, b, 1).unwrap();
            let e = 2.0 / ((1.0 - b) * (2.0 - b));
            assert!((v - e).abs() < 1e-12 * e, "{v} vs {e}");
        }
    }

    #[test]
    fn separated_intervals_closed_form() {
        let f = |u: f64| u.abs().powf(1.5) / 0.75;
        let phi = TestFunction::spatial(SpatialProfile::IndicatorBox {
            lo: vec![0.0],
            hi: vec![1.0],
        });
        let psi = TestFunction::spatial(SpatialProfile::IndicatorBox {
            lo: vec![2.5],
            hi: vec![3.0],
        });
        let v = covariance_functional(&phi, &psi, 0.5, 1).unwrap();
        let e = f(1.0 - 2.5) - f(0.0 - 2.5) - f(1.0 - 3.0) + f(0.0 - 3.0);
        assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        let w = covariance_functional(&psi, &phi, 0.5, 1).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn zero_function_gives_zero() {
        let zero = TestFunction::spatial(SpatialProfile::GaussianBump {
            center: vec![0.0],
            width: 0.3,
            amplitude: 0.0,
        });
        let b = TestFunction::bump(1, 0.4);
        assert_eq!(covariance_functional(&zero, &b, 0.5, 1).unwrap(), 0.0);
        assert_eq!(fourier_energy(&zero, 0.5, 1).unwrap(), 0.0);
    }

    #[test]
    fn bump_self_norm_matches_gamma_form() {
        use statrs::function::gamma::gamma;
        for (k, b, s) in [(1usize, 0.5, 0.3), (2, 0.8, 0.5), (3, 1.2, 0.7)] {
            let phi = TestFunction::bump(k, s);
            let v = h_norm_realspace(&phi, b, k).unwrap();
            let kf = k as f64;
            let e = (PI * s * s).powf(kf / 2.0)
                * sphere_area(k)
                * (2.0 * s).powf(kf - b)
                * gamma((kf - b) / 2.0)
                / 2.0;
            assert!((v / e - 1.0).abs() < 1e-11, "k={k}: {v} vs {e}");
        }
    }

    #[test]
    fn offset_bumps_match_rasterized_sum() {
        // two bumps at distance 0.6 in k = 2 against a fine-lattice sum
        let a = SpatialProfile::GaussianBump {
            center: vec![0.0, 0.0],
            width: 0.2,
            amplitude: 1.0,
        };
        let b = SpatialProfile::GaussianBump {
            center: vec![0.6, 0.0],
            width: 0.25,
            amplitude: 1.0,
        };
        let v = spatial_covariance(&a, &b, 0.8, 2).unwrap();
        let lat = Lattice {
            origin: vec![-0.8, -1.1],
            dx: 2.2 / 64.0,
            n: 64,
        };
        let ra = a.rasterize(&lat).unwrap();
        let rb = b.rasterize(&lat).unwrap();
        let g = grid_grid(&lat, &ra, &rb, 0.8);
        assert!((v / g - 1.0).abs() < 3e-3, "{v} vs {g}");
        for k in [1usize, 3] {
            let a = SpatialProfile::GaussianBump {
                center: vec![0.0; k],
                width: 0.3,
                amplitude: 1.0,
            };
            let mut c = vec![0.0; k];
            c[0] = 1e-7;
            let b = SpatialProfile::GaussianBump {
                center: c,
                width: 0.3,
                amplitude: 1.0,
            };
            let near = spatial_covariance(&a, &b, 0.5, k).unwrap();
            let same = spatial_covariance(&a, &a, 0.5, k).unwrap();
            assert!((near / same - 1.0).abs() < 1e-6, "k={k}: {near} vs {same}");
        }
    }

    #[test]
    fn square_box_pair_in_two_dimensions() {
        let phi = SpatialProfile::IndicatorBox {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let v = spatial_covariance(&phi, &phi, 1.0, 2).unwrap();
        let s2 = 2f64.sqrt();
        let e = 4.0 * ((1.0 + s2).ln() - (s2 - 1.0) / 3.0);
        assert!((v - e).abs() < 1e-10);
    }

    #[test]
    fn box_fourier_energy_in_one_dimension() {
        // ∫ |F1_[0,1]|² |ξ|^(−1/2) dξ = 8/3 · √(2π)
        let phi = TestFunction::unit_box(&[0.0], 0.0, 1.0);
        let v = fourier_energy(&phi, 0.5, 1).unwrap();
        let e = 8.0 / 3.0 * (2.0 * PI).sqrt();
        assert!((v / e - 1.0).abs() < 1e-9, "{v} vs {e}");
    }

    #[test]
    fn grid_fourier_quadrature_is_close_to_exact() {
        let lat = Lattice {
            origin: vec![0.0],
            dx: 1.0 / 32.0,
            n: 64,
        };
        let phi = SpatialProfile::IndicatorBox {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let values = phi.rasterize(&lat).unwrap();
        let v = grid_fourier_energy(&lat, &values, 0.5).unwrap();
        let e = 8.0 / 3.0 * (2.0 * PI).sqrt();
        assert!((v / e - 1.0).abs() < 5e-3, "{v} vs {e}");
    }
}
