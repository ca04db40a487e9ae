//! Exact averages of radial kernels over axis-aligned boxes and cell pairs.
//!
//! Boxes whose closure contains the singular point are split so that the
//! origin becomes a vertex, then handled by a Duffy (pyramid) transform with
//! the radial integral done in closed form. Other boxes use tensor
//! Gauss-Legendre with subdivision near the origin.

use crate::quadrature::gauss_legendre;
use std::sync::OnceLock;

/// Kernel of the distance |s|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialKernel {
    /// |s|^(-a)
    Power(f64),
    /// log |s|
    Log,
}

impl RadialKernel {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            RadialKernel::Power(a) => r.powf(-a),
            RadialKernel::Log => r.ln(),
        }
    }
}

fn rule16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| {
        let (x, w) = gauss_legendre(16);
        (
            x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            w.iter().map(|w| 0.5 * w).collect(),
        )
    })
}

fn rule10() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| {
        let (x, w) = gauss_legendre(10);
        (
            x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            w.iter().map(|w| 0.5 * w).collect(),
        )
    })
}

/// Affine weight α + β·s along one axis.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub alpha: f64,
    pub beta: f64,
}

impl Affine {
    pub const ONE: Affine = Affine {
        alpha: 1.0,
        beta: 0.0,
    };

    fn at(self, s: f64) -> f64 {
        self.alpha + self.beta * s
    }
}

/// ∫_box Π_i w_i(s_i) K(|s|) ds over the box [lo, hi] ⊂ R^D, D ∈ {1,2,3}.
pub fn box_integral(lo: &[f64], hi: &[f64], weights: &[Affine], kernel: RadialKernel) -> f64 {
    let dim = lo.len();
    let mut pieces: Vec<Vec<(f64, f64)>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let (a, b) = (lo[i], hi[i]);
        if a < 0.0 && b > 0.0 {
            pieces.push(vec![(a, 0.0), (0.0, b)]);
        } else {
            pieces.push(vec![(a, b)]);
        }
    }
    let mut total = 0.0;
    let mut idx = vec![0usize; dim];
    loop {
        let sub: Vec<(f64, f64)> = (0..dim).map(|i| pieces[i][idx[i]]).collect();
        total += piece_integral(&sub, weights, kernel);
        let mut i = 0;
        loop {
            if i == dim {
                return total;
            }
            idx[i] += 1;
            if idx[i] < pieces[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn piece_integral(sub: &[(f64, f64)], weights: &[Affine], kernel: RadialKernel) -> f64 {
    let vertex_at_origin = sub.iter().all(|&(a, b)| a == 0.0 || b == 0.0);
    if vertex_at_origin {
        duffy(sub, weights, kernel)
    } else {
        tensor(sub, weights, kernel, 0)
    }
}

fn duffy(sub: &[(f64, f64)], weights: &[Affine], kernel: RadialKernel) -> f64 {
    let dim = sub.len();
    // s_i = sign_i · len_i · σ_i with σ ∈ [0,1]^dim
    let mut len = [0.0; 3];
    let mut wa = [0.0; 3];
    let mut wb = [0.0; 3];
    let mut jac = 1.0;
    for i in 0..dim {
        let (a, b) = sub[i];
        let (sign, l) = if b > 0.0 { (1.0, b) } else { (-1.0, -a) };
        len[i] = l;
        wa[i] = weights[i].at(0.0);
        wb[i] = weights[i].beta * sign * l;
        jac *= l;
    }
    if jac == 0.0 {
        return 0.0;
    }
    let (gx, gw) = rule16();
    let mut total = 0.0;
    for j in 0..dim {
        let others: Vec<usize> = (0..dim).filter(|&i| i != j).collect();
        let mut acc = 0.0;
        let nq = if others.is_empty() {
            1
        } else {
            gx.len().pow(others.len() as u32)
        };
        for q in 0..nq {
            let mut c = [1.0; 3];
            let mut wq = 1.0;
            let mut rem = q;
            for &i in &others {
                let t = rem % gx.len();
                rem /= gx.len();
                c[i] = gx[t];
                wq *= gw[t];
            }
            // polynomial in v: Π (wa_i + wb_i c_i v)
            let mut poly = [0.0; 4];
            poly[0] = 1.0;
            let mut deg = 0;
            let mut r2 = 0.0;
            for i in 0..dim {
                let (p0, p1) = (wa[i], wb[i] * c[i]);
                for n in (0..=deg + 1).rev() {
                    let lower = if n > 0 { poly[n - 1] } else { 0.0 };
                    poly[n] = poly[n] * p0 + lower * p1;
                }
                deg += 1;
                r2 += (len[i] * c[i]).powi(2);
            }
            let r = r2.sqrt();
            let d = dim as f64;
            let radial = match kernel {
                RadialKernel::Power(a) => {
                    let s: f64 = (0..=deg).map(|n| poly[n] / (d - a + n as f64)).sum();
                    s * r.powf(-a)
                }
                RadialKernel::Log => {
                    let lr = r.ln();
                    (0..=deg)
                        .map(|n| {
                            let e = d + n as f64;
                            poly[n] * (lr / e - 1.0 / (e * e))
                        })
                        .sum()
                }
            };
            acc += wq * radial;
        }
        total += acc;
    }
    total * jac
}

fn tensor(sub: &[(f64, f64)], weights: &[Affine], kernel: RadialKernel, depth: u32) -> f64 {
    let dim = sub.len();
    let mut dist2 = 0.0;
    let mut diag2 = 0.0;
    for &(a, b) in sub {
        let near = if a > 0.0 {
            a
        } else if b < 0.0 {
            -b
        } else {
            0.0
        };
        dist2 += near * near;
        diag2 += (b - a) * (b - a);
    }
    if depth < 8 && dist2 < 0.25 * diag2 {
        let mut total = 0.0;
        for mask in 0..(1usize << dim) {
            let child: Vec<(f64, f64)> = (0..dim)
                .map(|i| {
                    let (a, b) = sub[i];
                    let m = 0.5 * (a + b);
                    if mask >> i & 1 == 0 {
                        (a, m)
                    } else {
                        (m, b)
                    }
                })
                .collect();
            total += tensor(&child, weights, kernel, depth + 1);
        }
        return total;
    }
    let (gx, gw) = rule10();
    let n = gx.len();
    let mut total = 0.0;
    for q in 0..n.pow(dim as u32) {
        let mut rem = q;
        let mut w = 1.0;
        let mut r2 = 0.0;
        for i in 0..dim {
            let t = rem % n;
            rem /= n;
            let (a, b) = sub[i];
            let s = a + (b - a) * gx[t];
            w *= gw[t] * (b - a) * weights[i].at(s);
            r2 += s * s;
        }
        total += w * kernel.eval(r2.sqrt());
    }
    total
}

/// Mean of K(|x − y|) for x uniform on the unit cube at the origin and y
/// uniform on the unit cube at integer offset `m`.
pub fn cell_pair_mean(m: &[i64], kernel: RadialKernel) -> f64 {
    let dim = m.len();
    let mut total = 0.0;
    for mask in 0..(1usize << dim) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        let mut w = [Affine::ONE; 3];
        for i in 0..dim {
            let c = m[i] as f64;
            if mask >> i & 1 == 0 {
                lo[i] = c - 1.0;
                hi[i] = c;
                w[i] = Affine {
                    alpha: 1.0 - c,
                    beta: 1.0,
                };
            } else {
                lo[i] = c;
                hi[i] = c + 1.0;
                w[i] = Affine {
                    alpha: 1.0 + c,
                    beta: -1.0,
                };
            }
        }
        total += box_integral(&lo[..dim], &hi[..dim], &w[..dim], kernel);
    }
    total
}

/// Mean of |x − y|^(-g) over two unit intervals at integer offset m, g < 1.
pub fn interval_pair_mean(g: f64, m: i64) -> f64 {
    let m = m.unsigned_abs() as f64;
    if m >= 100.0 {
        let a = g * (g + 1.0);
        let b = a * (g + 2.0) * (g + 3.0);
        let m2 = m * m;
        return m.powf(-g) * (1.0 + a / (12.0 * m2) + b / (360.0 * m2 * m2));
    }
    let f = |u: f64| u.abs().powf(2.0 - g) / ((1.0 - g) * (2.0 - g));
    f(m + 1.0) - 2.0 * f(m) + f(m - 1.0)
}

/// Mean of log|x − y| over two unit intervals at integer offset m.
pub fn interval_pair_mean_log(m: i64) -> f64 {
    let m = m.unsigned_abs() as f64;
    let f = |u: f64| {
        if u == 0.0 {
            0.0
        } else {
            0.5 * u * u * u.abs().ln() - 0.75 * u * u
        }
    };
    f(m + 1.0) - 2.0 * f(m) + f(m - 1.0)
}

/// Cell-pair means of |x − y|^(−a) on a cubic lattice of unit cells: exact
/// for |m|_∞ ≤ 2 (closed form along every offset when D = 1), curvature
/// corrected midpoint beyond.
pub struct PairTable {
    dim: usize,
    a: f64,
    near: Vec<f64>,
}

impl PairTable {
    pub fn new(dim: usize, a: f64) -> Self {
        let mut near = Vec::new();
        if dim > 1 {
            let total = 5usize.pow(dim as u32);
            near = (0..total)
                .map(|f| {
                    let mut m = [0i64; 3];
                    let mut rem = f;
                    for ax in (0..dim).rev() {
                        m[ax] = (rem % 5) as i64 - 2;
                        rem /= 5;
                    }
                    cell_pair_mean(&m[..dim], RadialKernel::Power(a))
                })
                .collect();
        }
        PairTable { dim, a, near }
    }

    pub fn get(&self, m: &[i64]) -> f64 {
        if self.dim == 1 {
            return interval_pair_mean(self.a, m[0]);
        }
        if m.iter().all(|x| x.abs() <= 2) {
            let f = m.iter().fold(0usize, |acc, &x| acc * 5 + (x + 2) as usize);
            return self.near[f];
        }
        let r2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
        let a = self.a;
        r2.powf(-0.5 * a) * (1.0 + a * (a + 2.0 - self.dim as f64) / (12.0 * r2))
    }
}
