use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
    Points { points: Vec<Vec<f64>> },
}

/// Finite union of balls, boxes and point lists in R^dim. An empty
/// primitive list is the empty set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    pub dim: usize,
    pub primitives: Vec<Primitive>,
}

fn dist2_to_box(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&a, &b))| {
            let e = if v < a {
                a - v
            } else if v > b {
                v - b
            } else {
                0.0
            };
            e * e
        })
        .sum()
}

impl Primitive {
    /// Axes along which the primitive has positive extent.
    pub fn active_axes(&self, dim: usize) -> Vec<usize> {
        match self {
            Primitive::Ball { radius, .. } if *radius > 0.0 => (0..dim).collect(),
            Primitive::Ball { .. } | Primitive::Points { .. } => Vec::new(),
            Primitive::Box { min, max } => (0..dim).filter(|&i| max[i] > min[i]).collect(),
        }
    }

    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Primitive::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Primitive::Box { min, max } => (min.clone(), max.clone()),
            Primitive::Points { points } => {
                let d = points[0].len();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in points {
                    for i in 0..d {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Primitive::Ball { center, radius } => {
                let r = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                (r - radius).max(0.0)
            }
            Primitive::Box { min, max } => dist2_to_box(x, min, max).sqrt(),
            Primitive::Points { points } => points
                .iter()
                .map(|p| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
        }
    }

    /// Whether the primitive meets the closed box [lo, hi].
    pub fn meets_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Primitive::Ball { center, radius } => dist2_to_box(center, lo, hi) <= radius * radius,
            Primitive::Box { min, max } => (0..lo.len()).all(|i| min[i] <= hi[i] && max[i] >= lo[i]),
            Primitive::Points { points } => points
                .iter()
                .any(|p| p.iter().zip(lo.iter().zip(hi)).all(|(&v, (&a, &b))| a <= v && v <= b)),
        }
    }
}

impl TargetSet {
    pub fn new(dim: usize, primitives: Vec<Primitive>) -> Result<Self> {
        let s = TargetSet { dim, primitives };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(dim: usize) -> Self {
        TargetSet { dim, primitives: Vec::new() }
    }

    pub fn ball(center: &[f64], radius: f64) -> Self {
        TargetSet {
            dim: center.len(),
            primitives: vec![Primitive::Ball { center: center.to_vec(), radius }],
        }
    }

    pub fn cube(min: &[f64], max: &[f64]) -> Self {
        TargetSet {
            dim: min.len(),
            primitives: vec![Primitive::Box { min: min.to_vec(), max: max.to_vec() }],
        }
    }

    pub fn points(points: Vec<Vec<f64>>) -> Self {
        TargetSet {
            dim: points.first().map_or(0, |p| p.len()),
            primitives: vec![Primitive::Points { points }],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: TargetSet =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("target set: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("target sets serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("target set dimension must be positive".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        for p in &self.primitives {
            let ok = match p {
                Primitive::Ball { center, radius } => {
                    center.len() == self.dim && finite(center) && *radius >= 0.0 && radius.is_finite()
                }
                Primitive::Box { min, max } => {
                    min.len() == self.dim
                        && max.len() == self.dim
                        && finite(min)
                        && finite(max)
                        && min.iter().zip(max).all(|(a, b)| a <= b)
                }
                Primitive::Points { points } => {
                    !points.is_empty() && points.iter().all(|q| q.len() == self.dim && finite(q))
                }
            };
            if !ok {
                return Err(Error::Config(format!("invalid primitive {p:?} in dimension {}", self.dim)));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn bbox(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut it = self.primitives.iter().map(Primitive::bbox);
        let (mut lo, mut hi) = it.next()?;
        for (a, b) in it {
            for i in 0..self.dim {
                lo[i] = lo[i].min(a[i]);
                hi[i] = hi[i].max(b[i]);
            }
        }
        Some((lo, hi))
    }

    /// Diameter of the enclosing box.
    pub fn diameter(&self) -> f64 {
        self.bbox()
            .map_or(0.0, |(lo, hi)| lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt())
    }

    /// Euclidean distance from x to the set (+∞ for the empty set).
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.primitives.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Largest number of active axes over the primitives.
    pub fn dimension(&self) -> usize {
        self.primitives.iter().map(|p| p.active_axes(self.dim).len()).max().unwrap_or(0)
    }

    /// Same set with every ball radius and box half-width grown by `by`
    /// (points become balls).
    pub fn inflate(&self, by: f64) -> TargetSet {
        let primitives = self
            .primitives
            .iter()
            .flat_map(|p| match p {
                Primitive::Ball { center, radius } => {
                    vec![Primitive::Ball { center: center.clone(), radius: radius + by }]
                }
                Primitive::Box { min, max } => vec![Primitive::Box {
                    min: min.iter().map(|v| v - by).collect(),
                    max: max.iter().map(|v| v + by).collect(),
                }],
                Primitive::Points { points } => points
                    .iter()
                    .map(|c| Primitive::Ball { center: c.clone(), radius: by })
                    .collect(),
            })
            .collect();
        TargetSet { dim: self.dim, primitives }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_distances() {
        let text = r#"{"dim": 2, "primitives": [
            {"type": "ball", "center": [0, 0], "radius": 1},
            {"type": "box", "min": [2, 0], "max": [3, 0]},
            {"type": "points", "points": [[5, 5]]}]}"#;
        let s = TargetSet::from_json(text).unwrap();
        assert_eq!(TargetSet::from_json(&s.to_json()).unwrap(), s);
        assert_eq!(s.distance(&[0.5, 0.0]), 0.0);
        assert!((s.distance(&[2.5, 1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(s.distance(&[5.0, 6.0]), 1.0);
        assert_eq!(s.dimension(), 2);
        assert!(TargetSet::from_json(r#"{"dim": 2, "primitives": [{"type": "ball", "center": [0], "radius": 1}]}"#).is_err());
        assert!(TargetSet::from_json(r#"{"dim": 1, "primitives": [], "extra": 1}"#).is_err());
        assert!(TargetSet::empty(3).distance(&[0.0; 3]).is_infinite());
    }
}
