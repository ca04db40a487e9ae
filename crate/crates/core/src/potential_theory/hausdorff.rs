use super::{Primitive, TargetSet};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Cells kept per level before the tree refinement stops and counts are
/// extrapolated.
const CELL_BUDGET: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausdorffResult {
    pub estimate: f64,
    /// The covering score still went down at the last depth.
    pub still_decreasing: bool,
    pub depth_of_min: usize,
    /// Covering score Σ (cell diameter)^γ at depths 0..=max_depth.
    pub scores: Vec<f64>,
    /// First depth whose count was extrapolated instead of enumerated.
    pub saturated_from: Option<usize>,
}

/// Min over depths of the dyadic covering score N_h (√d 2^{−h})^γ, where
/// N_h counts the half-open dyadic cells of side 2^{−h} meeting the set.
pub fn hausdorff_measure(set: &TargetSet, gamma: f64, max_depth: usize) -> Result<HausdorffResult> {
    set.validate()?;
    if !(2..=24).contains(&max_depth) {
        return Err(Error::Config(format!("max_depth = {max_depth} must lie in [2, 24]")));
    }
    if gamma.is_nan() {
        return Err(Error::Config("gamma is NaN".into()));
    }
    if gamma < 0.0 {
        return Ok(HausdorffResult {
            estimate: f64::INFINITY,
            still_decreasing: false,
            depth_of_min: 0,
            scores: Vec::new(),
            saturated_from: None,
        });
    }
    let (counts, saturated_from) = cover_counts(set, max_depth);
    let d = set.dim as f64;
    let scores: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(h, &n)| {
            if n == 0.0 {
                0.0
            } else {
                n * (d.sqrt() * 0.5f64.powi(h as i32)).powf(gamma)
            }
        })
        .collect();
    let (depth_of_min, estimate) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (h, s)| if s < b.1 { (h, s) } else { b });
    Ok(HausdorffResult {
        estimate,
        still_decreasing: scores[max_depth] < scores[max_depth - 1],
        depth_of_min,
        scores,
        saturated_from,
    })
}

fn cover_counts(set: &TargetSet, max_depth: usize) -> (Vec<f64>, Option<usize>) {
    if set.is_empty() {
        return (vec![0.0; max_depth + 1], None);
    }
    if let [Primitive::Box { min, max }] = set.primitives.as_slice() {
        let counts = (0..=max_depth)
            .map(|h| {
                let s = 0.5f64.powi(h as i32);
                min.iter()
                    .zip(max)
                    .map(|(a, b)| (b / s).floor() - (a / s).floor() + 1.0)
                    .product()
            })
            .collect();
        return (counts, None);
    }
    if set.primitives.iter().all(|p| matches!(p, Primitive::Points { .. })) {
        let counts = (0..=max_depth)
            .map(|h| {
                let s = 0.5f64.powi(h as i32);
                let mut cells = BTreeSet::new();
                for p in &set.primitives {
                    if let Primitive::Points { points } = p {
                        for q in points {
                            cells.insert(q.iter().map(|v| (v / s).floor() as i64).collect::<Vec<_>>());
                        }
                    }
                }
                cells.len() as f64
            })
            .collect();
        return (counts, None);
    }
    tree_counts(set, max_depth)
}

fn meets_cell(p: &Primitive, lo: &[f64], hi: &[f64]) -> bool {
    match p {
        Primitive::Box { min, max } => (0..lo.len()).all(|i| min[i] < hi[i] && max[i] >= lo[i]),
        Primitive::Points { points } => points
            .iter()
            .any(|q| q.iter().zip(lo.iter().zip(hi)).all(|(&v, (&a, &b))| a <= v && v < b)),
        Primitive::Ball { .. } => p.meets_box(lo, hi),
    }
}

/// Refines the dyadic cells meeting the set level by level; once a level
/// exceeds the budget, later counts grow by 2^D per level with D the largest
/// primitive dimension.
fn tree_counts(set: &TargetSet, max_depth: usize) -> (Vec<f64>, Option<usize>) {
    let dim = set.dim;
    let (lo, hi) = set.bbox().expect("nonempty set");
    let mut level: Vec<Vec<i64>> = Vec::new();
    let mut idx: Vec<i64> = lo.iter().map(|v| v.floor() as i64).collect();
    let last: Vec<i64> = hi.iter().map(|v| v.floor() as i64).collect();
    'outer: loop {
        level.push(idx.clone());
        for a in (0..dim).rev() {
            if idx[a] < last[a] {
                idx[a] += 1;
                for b in a + 1..dim {
                    idx[b] = lo[b].floor() as i64;
                }
                continue 'outer;
            }
        }
        break;
    }
    let keep = |cell: &[i64], s: f64| {
        let a: Vec<f64> = cell.iter().map(|&j| j as f64 * s).collect();
        let b: Vec<f64> = cell.iter().map(|&j| (j + 1) as f64 * s).collect();
        set.primitives.iter().any(|p| meets_cell(p, &a, &b))
    };
    level.retain(|c| keep(c, 1.0));
    let mut counts = vec![level.len() as f64];
    let growth = 2f64.powi(set.dimension() as i32);
    let mut saturated_from = None;
    for h in 1..=max_depth {
        if saturated_from.is_some() || level.len().saturating_mul(1 << dim) > CELL_BUDGET {
            saturated_from.get_or_insert(h);
            let prev = *counts.last().unwrap();
            counts.push(prev * growth);
            continue;
        }
        let s = 0.5f64.powi(h as i32);
        let mut next = Vec::with_capacity(level.len() << dim);
        for c in &level {
            for child in 0..(1usize << dim) {
                let cell: Vec<i64> = c.iter().enumerate().map(|(a, &j)| 2 * j + ((child >> a) & 1) as i64).collect();
                if keep(&cell, s) {
                    next.push(cell);
                }
            }
        }
        level = next;
        counts.push(level.len() as f64);
    }
    (counts, saturated_from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_scores_are_one_plus_cell_side() {
        let seg = TargetSet::cube(&[0.0], &[1.0]);
        let r = hausdorff_measure(&seg, 1.0, 12).unwrap();
        for (h, s) in r.scores.iter().enumerate() {
            assert!((s - (1.0 + 0.5f64.powi(h as i32))).abs() < 1e-12);
        }
        assert!(r.still_decreasing);
        assert_eq!(r.depth_of_min, 12);
    }

    #[test]
    fn tree_agrees_with_closed_form_on_boxes() {
        let one = TargetSet::cube(&[0.1, -0.3], &[0.9, 0.6]);
        let mut two = one.clone();
        two.primitives.push(Primitive::Box { min: vec![0.2, 0.0], max: vec![0.3, 0.1] });
        let a = hausdorff_measure(&one, 1.5, 8).unwrap();
        let b = hausdorff_measure(&two, 1.5, 8).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(b.saturated_from, None);
    }

    #[test]
    fn points_and_negative_order() {
        let pts = TargetSet::points(vec![vec![0.0, 0.0], vec![0.3, 0.7]]);
        assert!(hausdorff_measure(&pts, 0.5, 24).unwrap().estimate < 1e-3);
        assert_eq!(hausdorff_measure(&pts, -1.0, 5).unwrap().estimate, f64::INFINITY);
        assert_eq!(hausdorff_measure(&TargetSet::empty(2), 1.0, 5).unwrap().estimate, 0.0);
    }
}
