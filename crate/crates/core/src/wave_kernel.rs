//! The wave fundamental solution, its Fourier symbol, and the H-norm
//! identities that the rest of the crate is checked against.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, wynn_epsilon, Estimate};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, OnceLock, RwLock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub k: usize,
    pub beta: f64,
}

impl WaveParams {
    pub fn new(k: usize, beta: f64) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::domain(format!("k = {k} must be 1, 2 or 3")));
        }
        let upper = (k as f64).min(2.0);
        if !(beta > 0.0 && beta < upper) {
            return Err(Error::domain(format!(
                "beta = {beta} outside the (C1) range 0 < beta < min(2, k) = {upper}"
            )));
        }
        Ok(WaveParams { k, beta })
    }

    pub fn validate(&self) -> Result<()> {
        WaveParams::new(self.k, self.beta).map(|_| ())
    }

    /// Cache key: (k, beta rounded to 12 decimals).
    pub fn key(&self) -> (usize, i64) {
        (self.k, (self.beta * 1e12).round() as i64)
    }

    /// Hölder exponent (2 − β)/2 of the additive solution.
    pub fn holder_exponent(&self) -> f64 {
        (2.0 - self.beta) / 2.0
    }
}

/// Surface area of the unit sphere in R^k.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("sphere_area: k = {k}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszConstant {
    pub value: f64,
    pub params: WaveParams,
    pub quadrature_error: f64,
}

/// sin(t ξ)/ξ.
pub fn fourier_symbol(t: f64, xi_norm: f64) -> Result<f64> {
    if !(xi_norm > 0.0) {
        return Err(Error::domain(format!(
            "xi_norm = {xi_norm} must be positive"
        )));
    }
    if t < 0.0 {
        return Err(Error::domain(format!("t = {t} must be nonnegative")));
    }
    Ok((t * xi_norm).sin() / xi_norm)
}

/// ∫_0^∞ sin²(aρ) ρ^(-p) dρ for 1 < p < 3, evaluated in ρ directly: a
/// substitution removes the ρ^(2-p) behaviour on [0, 1/a], the tail splits
/// sin² = (1 − cos 2aρ)/2 with the smooth half done exactly and the cosine
/// half summed over half-periods with Wynn acceleration.
pub fn sin2_power_integral(a: f64, p: f64) -> Result<Estimate> {
    let knot = 1.0 / a;
    let e = 3.0 - p;
    // ∫_0^knot sin²(aρ) ρ^-p dρ with ρ = knot · y^(1/e)
    let near = adaptive(
        |y: f64| {
            if y <= 0.0 {
                return knot.powf(e) * a * a / e;
            }
            let rho = knot * y.powf(1.0 / e);
            let s = (a * rho).sin() / rho;
            s * s * knot.powf(e) / e
        },
        0.0,
        1.0,
        1e-15,
        1e-14,
        4000,
    )?;
    let smooth = 0.5 * knot.powf(1.0 - p) / (p - 1.0);
    // −½ ∫_knot^∞ cos(2aρ) ρ^-p dρ, zeros of cos(2aρ) at ρ = (π/4 + nπ/2)/a
    let period = PI / (2.0 * a);
    let mut first_zero = PI / (4.0 * a);
    while first_zero <= knot {
        first_zero += period;
    }
    let piece = |lo: f64, hi: f64| -> Result<f64> {
        adaptive(
            |r: f64| (2.0 * a * r).cos() * r.powf(-p),
            lo,
            hi,
            1e-17,
            1e-14,
            200,
        )
        .map(|e| e.value)
    };
    let mut partial = piece(knot, first_zero)?;
    let mut partials = vec![partial];
    let mut lo = first_zero;
    let mut last = f64::NAN;
    let mut err = f64::INFINITY;
    for n in 0..400 {
        partial += piece(lo, lo + period)?;
        lo += period;
        partials.push(partial);
        if n >= 8 && n % 2 == 0 {
            let start = partials.len().saturating_sub(40);
            let (acc, _) = wynn_epsilon(&partials[start..]);
            let diff = (acc - last).abs();
            last = acc;
            let scale = (near.value + smooth).abs();
            if diff < 1e-12 * scale {
                err = diff;
                break;
            }
        }
    }
    if !err.is_finite() {
        return Err(Error::Convergence {
            what: "oscillatory tail",
            estimate: near.value + smooth - 0.5 * last,
            error: f64::INFINITY,
        });
    }
    Ok(Estimate {
        value: near.value + smooth - 0.5 * last,
        error: near.error + 0.5 * err + 1e-14 * smooth.abs(),
    })
}

fn riesz_cache() -> &'static Mutex<HashMap<(usize, i64), RieszConstant>> {
    static C: OnceLock<Mutex<HashMap<(usize, i64), RieszConstant>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// c = ∫_{R^k} sin²|w| / |w|^(k−β+2) dw.
pub fn riesz_constant(params: WaveParams) -> Result<RieszConstant> {
    params.validate()?;
    if let Some(c) = riesz_cache().lock().unwrap().get(&params.key()) {
        return Ok(*c);
    }
    let est = sin2_power_integral(1.0, 3.0 - params.beta)?;
    let area = sphere_area(params.k);
    let c = RieszConstant {
        value: area * est.value,
        params,
        quadrature_error: area * est.error,
    };
    riesz_cache().lock().unwrap().insert(params.key(), c);
    Ok(c)
}

/// ‖G(r, x − ·)‖²_H = c r^(2−β) with the bare spectral density |ξ|^(β−k).
pub fn kernel_h_norm_sq(r: f64, params: WaveParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("r = {r} must be positive")));
    }
    Ok(riesz_constant(params)?.value * r.powf(2.0 - params.beta))
}

/// ∫_0^ε ‖G(s + r, ·)‖²_H dr = c((s+ε)^(3−β) − s^(3−β))/(3−β).
pub fn time_integrated_norm(s: f64, eps: f64, params: WaveParams) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps = {eps} must be positive")));
    }
    if !(s >= 0.0) {
        return Err(Error::domain(format!("s = {s} must be nonnegative")));
    }
    let p = 3.0 - params.beta;
    let c = riesz_constant(params)?.value;
    let diff = if s == 0.0 {
        eps.powf(p)
    } else {
        s.powf(p) * (p * (eps / s).ln_1p()).exp_m1()
    };
    Ok(c * diff / p)
}

/// ∫ μ(dξ)|F G(r)(ξ)|² by radial quadrature in frequency, with the
/// calibrated spectral measure.
pub fn spectral_h_norm_sq(r: f64, params: WaveParams) -> Result<Estimate> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("r = {r} must be positive")));
    }
    let ck = require_calibration(params)?;
    let est = sin2_power_integral(r, 3.0 - params.beta)?;
    let f = ck * sphere_area(params.k);
    Ok(Estimate {
        value: f * est.value,
        error: f * est.error,
    })
}

fn calibration_cache() -> &'static RwLock<HashMap<(usize, i64), f64>> {
    static C: OnceLock<RwLock<HashMap<(usize, i64), f64>>> = OnceLock::new();
    C.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached c_{k,β}, if calibrated.
pub fn calibrated_ckbeta(params: WaveParams) -> Option<f64> {
    calibration_cache()
        .read()
        .unwrap()
        .get(&params.key())
        .copied()
}

/// Stores c_{k,β}; the first stored value wins and is returned.
pub fn store_calibration(params: WaveParams, value: f64) -> f64 {
    let mut map = calibration_cache().write().unwrap();
    *map.entry(params.key()).or_insert(value)
}

fn require_calibration(params: WaveParams) -> Result<f64> {
    calibrated_ckbeta(params).ok_or_else(|| {
        Error::State(format!(
            "c_(k,beta) not calibrated for k = {}, beta = {}",
            params.k, params.beta
        ))
    })
}

/// c_{k,β} |ξ|^(β−k).
pub fn spectral_density(xi_norm: f64, params: WaveParams) -> Result<f64> {
    if !(xi_norm > 0.0) {
        return Err(Error::domain(format!(
            "xi_norm = {xi_norm} must be positive"
        )));
    }
    Ok(require_calibration(params)? * xi_norm.powf(params.beta - params.k as f64))
}

/// ∫_{R^k} |ξ|^(β−k)/(1+|ξ|²) dξ, finite exactly when the spectral measure is admissible.
pub fn integrability_check(params: WaveParams) -> Result<Estimate> {
    let b = params.beta;
    let near =
        crate::quadrature::singular_at_zero(|r| r.powf(b - 1.0) / (1.0 + r * r), b, 1e-14, 1e-12)?;
    // ∫_1^∞ r^(β−1)/(1+r²) dr = ∫_0^1 u^(1−β)/(1+u²) du
    let far = adaptive(
        |u: f64| u.powf(1.0 - b) / (1.0 + u * u),
        0.0,
        1.0,
        1e-14,
        1e-12,
        2000,
    )?;
    let area = sphere_area(params.k);
    Ok(Estimate {
        value: area * (near.value + far.value),
        error: area * (near.error + far.error),
    })
}

/// φ(z, λ) = ∫_0^1 dr ∫_{−r}^{r} du ∫_{−λ−r}^{λ+r} dv |z + u − v|^(−β), k = 1.
pub fn phi_k1(z: f64, lambda: f64, beta: f64) -> Result<Estimate> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!(
            "beta = {beta} outside 0 < beta < 1 required for k = 1"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!(
            "lambda = {lambda} must be nonnegative"
        )));
    }
    let e = 1.0 - beta;
    let anti = |s: f64| s.signum() * s.abs().powf(e) / e;
    let inner = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let w = lambda + r;
        let g = |u: f64| anti(z + u + w) - anti(z + u - w);
        let mut knots = vec![-r, r];
        for k in [-z - w, -z + w] {
            if k > -r && k < r {
                knots.push(k);
            }
        }
        knots.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for pair in knots.windows(2) {
            match adaptive(g, pair[0], pair[1], 1e-13, 1e-12, 500) {
                Ok(est) => total += est.value,
                Err(Error::Convergence { estimate, .. }) => total += estimate,
                Err(other) => panic!("{other}"),
            }
        }
        total
    };
    let mut knots = vec![0.0, 1.0];
    // kinks in r where z ± (λ + r) crosses ±r
    for k in [(-z - lambda) / 2.0, (z - lambda) / 2.0] {
        if k > 0.0 && k < 1.0 {
            knots.push(k);
        }
    }
    knots.sort_by(f64::total_cmp);
    let mut value = 0.0;
    let mut error = 0.0;
    for pair in knots.windows(2) {
        let est = adaptive(inner, pair[0], pair[1], 1e-11, 1e-10, 2000)?;
        value += est.value;
        error += est.error;
    }
    Ok(Estimate { value, error })
}

/// ∫_0^ε dr ∫_{y−r}^{y+r} dξ ∫_{x−(h+r)}^{x+h+r} dη |ξ − η|^(−β), with offset = x − y.
pub fn cross_inner_product_k1(eps: f64, h: f64, offset: f64, beta: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps = {eps} must be positive")));
    }
    if !(0.0..=eps).contains(&h) {
        return Err(Error::domain(format!("h = {h} must lie in [0, eps]")));
    }
    let phi = phi_k1(offset / eps, h / eps, beta)?;
    Ok(eps.powf(3.0 - beta) * phi.value)
}

/// Fourier form of φ(z, λ) for k = 3 with the bare density:
/// ∫ |ξ|^(β−k−2) e^{i⟨ξ,z⟩} [cos(λ|ξ|) − sin|ξ| cos((λ+1)|ξ|)/|ξ|] dξ.
/// Truncated radial quadrature; not validated against an independent oracle.
pub fn phi_fourier_k3(z: f64, lambda: f64, beta: f64) -> Result<Estimate> {
    let params = WaveParams::new(3, beta)?;
    let zn = z.abs();
    let l = lambda;
    let c2 = ((l + 2.0).powi(3) - l.powi(3)) / 12.0 - 0.5 * l * l;
    let c4 = l.powi(4) / 24.0 - ((l + 2.0).powi(5) - l.powi(5)) / 240.0;
    let bracket = |r: f64| {
        if r < 1e-2 {
            r * r * (c2 + c4 * r * r)
        } else {
            (l * r).cos() - 0.5 * (((l + 2.0) * r).sin() - (l * r).sin()) / r
        }
    };
    let angular = |r: f64| {
        if zn == 0.0 {
            1.0
        } else {
            let x = r * zn;
            if x < 1e-8 {
                1.0
            } else {
                x.sin() / x
            }
        }
    };
    let b = params.beta;
    let f = |r: f64| 4.0 * PI * r.powf(b - 3.0) * bracket(r) * angular(r);
    let cut = 1e4;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while lo < cut {
        let est = adaptive(f, lo, hi, 1e-12, 1e-10, 4000)?;
        value += est.value;
        error += est.error;
        lo = hi;
        hi *= 2.0;
    }
    Ok(Estimate {
        value,
        error: error + 4.0 * PI * cut.powf(b - 3.0) / (3.0 - b),
    })
}

/// One oracle row: op, params, value, error estimate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OracleRow {
    pub op: String,
    pub params: String,
    pub value: f64,
    pub error_estimate: f64,
}

/// Oracle values for the given parameter sets.
pub fn oracle_table(sets: &[WaveParams]) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    for &p in sets {
        let tag = format!("k={};beta={}", p.k, p.beta);
        let c = riesz_constant(p)?;
        rows.push(OracleRow {
            op: "riesz_constant".into(),
            params: tag.clone(),
            value: c.value,
            error_estimate: c.quadrature_error,
        });
        for r in [0.25, 0.5, 1.0, 2.0] {
            rows.push(OracleRow {
                op: "kernel_h_norm_sq".into(),
                params: format!("{tag};r={r}"),
                value: kernel_h_norm_sq(r, p)?,
                error_estimate: c.quadrature_error * r.powf(2.0 - p.beta),
            });
        }
        rows.push(OracleRow {
            op: "time_integrated_norm".into(),
            params: format!("{tag};s=0;eps=1"),
            value: time_integrated_norm(0.0, 1.0, p)?,
            error_estimate: c.quadrature_error / (3.0 - p.beta),
        });
        if p.k == 1 && p.beta < 1.0 {
            for (z, l) in [(0.0, 0.0), (5.0, 0.5), (10.0, 0.5)] {
                let e = phi_k1(z, l, p.beta)?;
                rows.push(OracleRow {
                    op: "phi_k1".into(),
                    params: format!("{tag};z={z};lambda={l}"),
                    value: e.value,
                    error_estimate: e.error,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_oracle_csv<W: Write>(rows: &[OracleRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
