use crate::error::{Error, Result};
use crate::wave_kernel::WaveParams;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Polar,
    NonPolar,
    Open,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Polar => "Polar",
            Polarity::NonPolar => "NonPolar",
            Polarity::Open => "Open",
        })
    }
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::domain("d must be at least 1"));
    }
    Ok(())
}

/// The exponent formulas only need 0 < β < 2; whether β also lies below k
/// is reported separately by `within_c1`.
fn check_kb(k: usize, beta: f64) -> Result<()> {
    if !(1..=3).contains(&k) {
        return Err(Error::domain(format!("k = {k} must be 1, 2 or 3")));
    }
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::domain(format!(
            "beta = {beta} outside the (C1) range 0 < beta < min(2, k)"
        )));
    }
    Ok(())
}

/// Whether (k, β) satisfies 0 < β < min(2, k).
pub fn within_c1(k: usize, beta: f64) -> bool {
    WaveParams::new(k, beta).is_ok()
}

/// 2(k+1)/(2−β).
pub fn critical_dimension(k: usize, beta: f64) -> f64 {
    2.0 * (k as f64 + 1.0) / (2.0 - beta)
}

/// d − 2(k+1)/(2−β), the order in the two-sided Gaussian bounds.
pub fn gaussian_order(d: usize, k: usize, beta: f64) -> Result<f64> {
    check_d(d)?;
    check_kb(k, beta)?;
    Ok(d as f64 - critical_dimension(k, beta))
}

/// Points are polar when d > 2(k+1)/(2−β) and non-polar when
/// d(1 + 4d/(2−β)) < 2(k+1)/(2−β).
pub fn polarity_classify(d: usize, k: usize, beta: f64) -> Result<Polarity> {
    check_d(d)?;
    check_kb(k, beta)?;
    let e = critical_dimension(k, beta);
    let df = d as f64;
    let polar = df > e;
    let non_polar = df * (1.0 + 4.0 * df / (2.0 - beta)) < e;
    assert!(!(polar && non_polar), "polarity conditions overlap at d={d}, k={k}, beta={beta}");
    Ok(if polar {
        Polarity::Polar
    } else if non_polar {
        Polarity::NonPolar
    } else {
        Polarity::Open
    })
}

/// Noise hypothesis and regularity parameter behind the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum BoundCase {
    /// Additive noise, Riesz covariance with exponent β.
    AdditiveC1 { beta: f64 },
    /// Additive noise, spectral measure integrable against (1+|ξ|²)^{−α}.
    AdditiveC1Prime { alpha: f64 },
    /// Multiplicative noise at k = 1, covariance φ(x)|x|^{−β}.
    MultK1 { beta: f64 },
    /// Multiplicative noise at k = 2, ∫ r^{1−η} f(r) dr < ∞ near 0.
    MultK2 { eta: f64 },
    /// Multiplicative noise at k = 3, φ(x)|x|^{−β} with ∇φ μ-Hölder.
    MultK3 { beta: f64, mu: f64 },
}

impl BoundCase {
    pub fn tag(&self) -> &'static str {
        match self {
            BoundCase::AdditiveC1 { .. } => "additive-C1",
            BoundCase::AdditiveC1Prime { .. } => "additive-C1'",
            BoundCase::MultK1 { .. } => "mult-k1",
            BoundCase::MultK2 { .. } => "mult-k2",
            BoundCase::MultK3 { .. } => "mult-k3",
        }
    }

    /// Hölder exponent δ of the case, after checking its hypothesis.
    pub fn delta(&self, k: usize) -> Result<f64> {
        let in_beta = |beta: f64, hyp: &str| {
            let upper = (k as f64).min(2.0);
            if beta > 0.0 && beta < upper {
                Ok(())
            } else {
                Err(Error::domain(format!("{hyp} needs 0 < beta < min(2, k) = {upper}, got {beta}")))
            }
        };
        let need_k = |want: usize, hyp: &str| {
            if k == want {
                Ok(())
            } else {
                Err(Error::domain(format!("{hyp} case applies to k = {want}, got k = {k}")))
            }
        };
        match *self {
            BoundCase::AdditiveC1 { beta } => {
                check_kb(k, beta)?;
                Ok((2.0 - beta) / 2.0)
            }
            BoundCase::AdditiveC1Prime { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::domain(format!("(C1') needs 0 < alpha < 1, got {alpha}")));
                }
                Ok(1.0 - alpha)
            }
            BoundCase::MultK1 { beta } => {
                need_k(1, "(C3)")?;
                in_beta(beta, "(C3)")?;
                Ok((2.0 - beta) / 2.0)
            }
            BoundCase::MultK2 { eta } => {
                need_k(2, "(C2)")?;
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(Error::domain(format!("(C2) needs 0 < eta < 1, got {eta}")));
                }
                Ok(eta / 2.0)
            }
            BoundCase::MultK3 { beta, mu } => {
                need_k(3, "(C3)")?;
                in_beta(beta, "(C3)")?;
                if !(mu > 0.0 && mu <= 1.0) {
                    return Err(Error::domain(format!("(C3) needs 0 < mu <= 1, got {mu}")));
                }
                Ok(((2.0 - beta) / 2.0).min((1.0 + mu) / 2.0))
            }
        }
    }
}

/// Hausdorff order d − ζ − (k+1)/δ of the upper bound.
pub fn upper_bound_order(d: usize, k: usize, case: BoundCase, zeta: f64) -> Result<f64> {
    check_d(d)?;
    if !(1..=3).contains(&k) {
        return Err(Error::domain(format!("k = {k} must be 1, 2 or 3")));
    }
    if !(zeta > 0.0 && zeta < d as f64) {
        return Err(Error::domain(format!("zeta = {zeta} must lie in (0, d = {d})")));
    }
    let delta = case.delta(k)?;
    Ok(d as f64 - zeta - (k as f64 + 1.0) / delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Spacetime,
    FixedX,
    FixedT,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Spacetime, Variant::FixedX, Variant::FixedT];

    fn numerator(self, k: usize) -> f64 {
        match self {
            Variant::Spacetime => 2.0 * (k as f64 + 1.0),
            Variant::FixedX => 2.0,
            Variant::FixedT => 2.0 * k as f64,
        }
    }
}

/// Eigenvalue degeneracy rate used when none is given.
pub fn default_rho(beta: f64) -> f64 {
    3.0 - beta
}

/// Capacity order d(1 + 4d(ρ−(2−β))/(2−β)) + δ − E of the lower bound, with
/// E = 2(k+1), 2 or 2k over (2−β) for the three variants.
pub fn lower_bound_capacity_order(
    d: usize,
    k: usize,
    beta: f64,
    delta: f64,
    rho: Option<f64>,
    variant: Variant,
) -> Result<f64> {
    check_d(d)?;
    check_kb(k, beta)?;
    if !(delta > 0.0) {
        return Err(Error::domain(format!("delta = {delta} must be positive")));
    }
    let rho = rho.unwrap_or_else(|| default_rho(beta));
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be positive")));
    }
    let df = d as f64;
    let a = 2.0 - beta;
    Ok(df * (1.0 + 4.0 * df * (rho - a) / a) + delta - variant.numerator(k) / a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub d: usize,
    pub k: usize,
    pub beta: f64,
    pub zeta: f64,
    pub delta: f64,
    pub rho: f64,
    pub case: String,
    /// 0 < β < min(2, k); outside it the orders are formal.
    pub within_c1: bool,
    pub upper_hausdorff_order: f64,
    /// Spacetime, fixed-x and fixed-t capacity orders.
    pub lower_capacity_orders: [f64; 3],
    pub gaussian_order: f64,
    pub polarity: Polarity,
}

pub fn exponent_report(
    d: usize,
    case: BoundCase,
    k: usize,
    beta: f64,
    zeta: f64,
    delta: f64,
    rho: Option<f64>,
) -> Result<ExponentReport> {
    let mut lower = [0.0; 3];
    for (v, slot) in Variant::ALL.iter().zip(lower.iter_mut()) {
        *slot = lower_bound_capacity_order(d, k, beta, delta, rho, *v)?;
    }
    Ok(ExponentReport {
        d,
        k,
        beta,
        zeta,
        delta,
        rho: rho.unwrap_or_else(|| default_rho(beta)),
        case: case.tag().to_string(),
        within_c1: within_c1(k, beta),
        upper_hausdorff_order: upper_bound_order(d, k, case, zeta)?,
        lower_capacity_orders: lower,
        gaussian_order: gaussian_order(d, k, beta)?,
        polarity: polarity_classify(d, k, beta)?,
    })
}
