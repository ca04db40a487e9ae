use super::{DiscreteMeasure, KernelOrder, Primitive, TargetSet};
use crate::cells::{cell_pair_mean, interval_pair_mean_log, PairTable, RadialKernel};
use crate::error::{Error, Result};
use crate::fft::{ravel, signed_index, unravel, FftNd};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityOptions {
    pub n_grid: usize,
    /// Relative duality gap at which the minimization stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions { n_grid: 2000, tol: 1e-4, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub estimate: f64,
    pub energy: f64,
    /// Duality gap 2(E − min_i (Kw)_i) at the returned weights.
    pub gap: f64,
    pub iterations: usize,
    pub n_cells: usize,
    pub cell_side: f64,
    /// γ at or above the dimension of the set: the discrete energy grows
    /// without bound under refinement and the estimate is 0.
    pub diverged: bool,
    pub converged: bool,
    /// No primitive spans the full dimension of the union; the estimate is
    /// the largest capacity of a single primitive.
    pub lower_bound: bool,
    #[serde(skip)]
    pub optimizer: Option<DiscreteMeasure>,
}

impl CapacityResult {
    fn exact(estimate: f64, diverged: bool) -> Self {
        CapacityResult {
            estimate,
            energy: if estimate > 0.0 { 1.0 / estimate } else { f64::INFINITY },
            gap: 0.0,
            iterations: 0,
            n_cells: 0,
            cell_side: 0.0,
            diverged,
            converged: true,
            lower_bound: false,
            optimizer: None,
        }
    }
}

pub fn capacity(set: &TargetSet, order: KernelOrder, n_grid: usize, tol: f64) -> Result<CapacityResult> {
    capacity_with(set, order, &CapacityOptions { n_grid, tol, ..CapacityOptions::default() })
}

pub fn capacity_with(set: &TargetSet, order: KernelOrder, opts: &CapacityOptions) -> Result<CapacityResult> {
    set.validate()?;
    if !(50..=100_000).contains(&opts.n_grid) {
        return Err(Error::Config(format!("n_grid = {} must lie in [50, 100000]", opts.n_grid)));
    }
    if !(opts.tol > 0.0) || !order.gamma.is_finite() {
        return Err(Error::Config("tolerance must be positive and gamma finite".into()));
    }
    if order.gamma < 0.0 {
        return Ok(CapacityResult::exact(1.0, false));
    }
    if set.is_empty() {
        return Ok(CapacityResult::exact(0.0, false));
    }
    let axes = union_axes(set);
    if axes.is_empty() {
        return Ok(CapacityResult::exact(0.0, false));
    }
    let full: Vec<Primitive> = set
        .primitives
        .iter()
        .filter(|p| p.active_axes(set.dim).len() == axes.len())
        .cloned()
        .collect();
    if full.is_empty() {
        let mut best: Option<CapacityResult> = None;
        for p in &set.primitives {
            let part = TargetSet { dim: set.dim, primitives: vec![p.clone()] };
            let r = capacity_with(&part, order, opts)?;
            if best.as_ref().is_none_or(|b| r.estimate > b.estimate) {
                best = Some(r);
            }
        }
        let mut best = best.expect("nonempty set");
        best.lower_bound = true;
        return Ok(best);
    }
    if order.gamma >= axes.len() as f64 {
        return Ok(CapacityResult::exact(0.0, true));
    }
    let core = TargetSet { dim: set.dim, primitives: full };
    let c = order.constant_for(set.diameter())?;
    let problem = CapacityProblem::new(&core, order.gamma, c, opts.n_grid)?;
    let sol = problem.solve(opts.tol, opts.max_iter);
    let optimizer = DiscreteMeasure { support: problem.centers(), weights: sol.weights };
    Ok(CapacityResult {
        estimate: 1.0 / sol.energy,
        energy: sol.energy,
        gap: sol.gap,
        iterations: sol.iterations,
        n_cells: problem.n_cells(),
        cell_side: problem.h,
        diverged: false,
        converged: sol.converged,
        lower_bound: false,
        optimizer: Some(optimizer),
    })
}

fn union_axes(set: &TargetSet) -> Vec<usize> {
    let mut on = vec![false; set.dim];
    for p in &set.primitives {
        for a in p.active_axes(set.dim) {
            on[a] = true;
        }
    }
    (0..set.dim).filter(|&a| on[a]).collect()
}

/// Minimizer of w'Kw over the simplex, with K the cell-pair averaged kernel
/// on a cubic lattice covering the set.
pub struct CapacityProblem {
    axes: Vec<usize>,
    dims: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    cells: Vec<usize>,
    fft: FftNd,
    kernel_hat: Vec<Complex64>,
    row_max: f64,
}

pub struct Solution {
    pub weights: Vec<f64>,
    pub energy: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CapacityProblem {
    /// Kernel K_γ with constant `c` (read only at γ = 0), about `n_grid`
    /// cells of the lattice whose centers lie in the set.
    pub fn new(set: &TargetSet, gamma: f64, c: f64, n_grid: usize) -> Result<Self> {
        let axes = union_axes(set);
        let dl = axes.len();
        if dl == 0 {
            return Err(Error::Config("capacity lattice needs a set of positive dimension".into()));
        }
        if dl > 3 {
            return Err(Error::Unsupported(format!("capacity lattices of dimension {dl} > 3")));
        }
        if gamma < 0.0 || gamma >= dl as f64 {
            return Err(Error::Config(format!("gamma = {gamma} outside [0, {dl})")));
        }
        let (lo, hi) = set.bbox().expect("nonempty set");
        let vol: f64 = axes.iter().map(|&a| hi[a] - lo[a]).product();
        let mut h = (vol / n_grid as f64).powf(1.0 / dl as f64);
        let mut layout = Layout::new(set, &axes, &lo, &hi, h);
        for _ in 0..6 {
            let count = layout.cells.len();
            if count > 0 && (count as f64 / n_grid as f64 - 1.0).abs() < 0.05 {
                break;
            }
            let ratio = if count == 0 { 0.25 } else { count as f64 / n_grid as f64 };
            h *= ratio.powf(1.0 / dl as f64);
            layout = Layout::new(set, &axes, &lo, &hi, h);
        }
        if layout.cells.is_empty() {
            return Err(Error::Config("no lattice cell center falls inside the set".into()));
        }
        let padded: Vec<usize> = layout.dims.iter().map(|n| 2 * n).collect();
        let fft = FftNd::new(&padded);
        let table = kernel_table(&padded, gamma, c, h);
        let mut kernel_hat: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut kernel_hat);
        let mut abs_hat: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v.abs(), 0.0)).collect();
        fft.forward(&mut abs_hat);
        let mut p = CapacityProblem {
            axes,
            dims: layout.dims,
            origin: layout.origin,
            h,
            cells: layout.cells,
            fft,
            kernel_hat,
            row_max: 0.0,
        };
        let ones = vec![1.0; p.n_cells()];
        p.row_max = p.convolve(&ones, &abs_hat).into_iter().fold(0.0, f64::max);
        Ok(p)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_side(&self) -> f64 {
        self.h
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut idx = vec![0; self.dims.len()];
        self.cells
            .iter()
            .map(|&f| {
                unravel(f, &self.dims, &mut idx);
                let mut x = self.origin.clone();
                for (j, &a) in self.axes.iter().enumerate() {
                    x[a] += (idx[j] as f64 + 0.5) * self.h;
                }
                x
            })
            .collect()
    }

    fn convolve(&self, w: &[f64], hat: &[Complex64]) -> Vec<f64> {
        let padded = self.fft.dims();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        let mut idx = vec![0; self.dims.len()];
        let pos: Vec<usize> = self
            .cells
            .iter()
            .map(|&f| {
                unravel(f, &self.dims, &mut idx);
                ravel(&idx, padded)
            })
            .collect();
        for (&p, &v) in pos.iter().zip(w) {
            buf[p] = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(hat) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        let scale = 1.0 / self.fft.len() as f64;
        pos.iter().map(|&p| buf[p].re * scale).collect()
    }

    /// K w restricted to the cells of the set.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n_cells());
        self.convolve(w, &self.kernel_hat)
    }

    pub fn energy(&self, w: &[f64]) -> f64 {
        self.apply(w).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    /// Accelerated projected gradient with step 1/(2 L_max) and adaptive
    /// restart, stopped once the duality gap falls below tol·E.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Solution {
        let n = self.n_cells();
        let step = 0.5 / self.row_max;
        let mut w = vec![1.0 / n as f64; n];
        let mut y = w.clone();
        let mut t = 1.0f64;
        let mut kw = self.apply(&w);
        let mut e = dot(&kw, &w);
        let mut gap = 2.0 * (e - min(&kw));
        let mut iterations = 0;
        let mut z = vec![0.0; n];
        while gap > tol * e && iterations < max_iter {
            iterations += 1;
            let ky = self.apply(&y);
            for i in 0..n {
                z[i] = y[i] - 2.0 * step * ky[i];
            }
            project_simplex(&mut z);
            let kz = self.apply(&z);
            let ez = dot(&kz, &z);
            if ez > e {
                // restart from the last iterate with a plain step
                t = 1.0;
                y.copy_from_slice(&w);
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            for i in 0..n {
                y[i] = z[i] + mom * (z[i] - w[i]);
            }
            t = t_next;
            std::mem::swap(&mut w, &mut z);
            kw = kz;
            e = ez;
            gap = 2.0 * (e - min(&kw));
        }
        Solution { converged: gap <= tol * e, weights: w, energy: e, gap, iterations }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn min(a: &[f64]) -> f64 {
    a.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut s = v.to_vec();
    s.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in s.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Layout {
    dims: Vec<usize>,
    origin: Vec<f64>,
    cells: Vec<usize>,
}

impl Layout {
    fn new(set: &TargetSet, axes: &[usize], lo: &[f64], hi: &[f64], h: f64) -> Self {
        let mut origin = lo.to_vec();
        let dims: Vec<usize> = axes
            .iter()
            .map(|&a| {
                let ext = hi[a] - lo[a];
                let n = ((ext / h).ceil() as usize).max(1);
                origin[a] = lo[a] + 0.5 * (ext - n as f64 * h);
                n
            })
            .collect();
        let total: usize = dims.iter().product();
        let cells = (0..total)
            .into_par_iter()
            .filter(|&f| {
                let mut idx = [0usize; 3];
                unravel(f, &dims, &mut idx[..dims.len()]);
                let mut x = origin.clone();
                for (j, &a) in axes.iter().enumerate() {
                    x[a] += (idx[j] as f64 + 0.5) * h;
                }
                set.contains(&x, 0.0)
            })
            .collect();
        Layout { dims, origin, cells }
    }
}

/// Cell-pair means of log|x − y| over unit cells at offset m.
struct LogTable {
    dim: usize,
    near: Vec<f64>,
}

impl LogTable {
    fn new(dim: usize) -> Self {
        let near = if dim == 1 {
            Vec::new()
        } else {
            (0..5usize.pow(dim as u32))
                .map(|f| {
                    let mut m = [0i64; 3];
                    let mut rem = f;
                    for ax in (0..dim).rev() {
                        m[ax] = (rem % 5) as i64 - 2;
                        rem /= 5;
                    }
                    cell_pair_mean(&m[..dim], RadialKernel::Log)
                })
                .collect()
        };
        LogTable { dim, near }
    }

    fn get(&self, m: &[i64]) -> f64 {
        if self.dim == 1 {
            return interval_pair_mean_log(m[0]);
        }
        if m.iter().all(|x| x.abs() <= 2) {
            return self.near[m.iter().fold(0usize, |acc, &x| acc * 5 + (x + 2) as usize)];
        }
        let r2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
        0.5 * r2.ln() + (self.dim as f64 - 2.0) / (12.0 * r2)
    }
}

/// Kernel values laid out for circular convolution on the padded lattice.
fn kernel_table(padded: &[usize], gamma: f64, c: f64, h: f64) -> Vec<f64> {
    let dim = padded.len();
    let total: usize = padded.iter().product();
    let value: Box<dyn Fn(&[i64]) -> f64 + Sync> = if gamma > 0.0 {
        let t = PairTable::new(dim, gamma);
        let s = h.powf(-gamma);
        Box::new(move |m| s * t.get(m))
    } else {
        let t = LogTable::new(dim);
        let base = c.ln() - h.ln();
        Box::new(move |m| base - t.get(m))
    };
    (0..total)
        .into_par_iter()
        .map(|f| {
            let mut idx = [0usize; 3];
            unravel(f, padded, &mut idx[..dim]);
            let mut m = [0i64; 3];
            for a in 0..dim {
                m[a] = signed_index(idx[a], padded[a]);
            }
            value(&m[..dim])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 0.5];
        project_simplex(&mut v);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let mut v = vec![2.0, 0.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn far_log_means_match_exact_cell_pairs() {
        for m in [vec![3i64, 1], vec![4, 0], vec![3, 0, 2], vec![0, 5, 1]] {
            let exact = cell_pair_mean(&m, RadialKernel::Log);
            let t = LogTable::new(m.len());
            let r2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
            let far = 0.5 * r2.ln() + (m.len() as f64 - 2.0) / (12.0 * r2);
            assert!((far - exact).abs() < 2e-4, "{m:?}: {far} vs {exact}");
            assert!(t.get(&m[..]) == far);
        }
    }

    #[test]
    fn matvec_matches_direct_sum() {
        let set = TargetSet::ball(&[0.0, 0.0], 1.0);
        let p = CapacityProblem::new(&set, 0.7, 1.0, 60).unwrap();
        let n = p.n_cells();
        let w: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64).collect();
        let kw = p.apply(&w);
        let t = PairTable::new(2, 0.7);
        let mut idx_i = vec![0; 2];
        let mut idx_j = vec![0; 2];
        for i in [0, n / 2, n - 1] {
            unravel(p.cells[i], &p.dims, &mut idx_i);
            let mut s = 0.0;
            for j in 0..n {
                unravel(p.cells[j], &p.dims, &mut idx_j);
                let m = [idx_j[0] as i64 - idx_i[0] as i64, idx_j[1] as i64 - idx_i[1] as i64];
                s += p.h.powf(-0.7) * t.get(&m) * w[j];
            }
            assert!((kw[i] - s).abs() < 1e-10 * s, "{} vs {s}", kw[i]);
        }
    }
}
