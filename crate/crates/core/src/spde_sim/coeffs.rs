use crate::error::{Error, Result};
use crate::rng::substream;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Scalar expression in the coordinates x1..xd.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Tanh(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Tanh(a) => a.eval(x).tanh(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Tanh(a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Tanh(a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Parses `+ - *`, parentheses, numbers, `sin`, `cos`, `tanh` and the
    /// variables `x1`, `x2`, ... (1-based).
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            s: src.as_bytes(),
            pos: 0,
        };
        let e = p.sum()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Tanh(a) => write!(f, "tanh({a})"),
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Config(format!(
            "expression {:?}: {msg} at offset {}",
            String::from_utf8_lossy(self.s),
            self.pos
        ))
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign = (c == b'+' || c == b'-')
                        && self.pos > start
                        && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                text.parse::<f64>()
                    .map(Expr::Const)
                    .map_err(|_| self.err("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.s[start..self.pos])
                    .unwrap()
                    .to_string();
                if let Some(num) = word.strip_prefix('x') {
                    let i: usize = num.parse().map_err(|_| self.err("bad variable"))?;
                    if i == 0 {
                        return Err(self.err("variables are 1-based"));
                    }
                    return Ok(Expr::Var(i - 1));
                }
                let wrap: fn(Box<Expr>) -> Expr = match word.as_str() {
                    "sin" => Expr::Sin,
                    "cos" => Expr::Cos,
                    "tanh" => Expr::Tanh,
                    _ => return Err(self.err(&format!("unknown name {word:?}"))),
                };
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(wrap(Box::new(arg)))
            }
            _ => Err(self.err("expected a number, variable, function or '('")),
        }
    }
}

/// Coefficients σ: R^d → R^(d×d) and b: R^d → R^d with declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    d: usize,
    sigma: Vec<Expr>,
    drift: Vec<Expr>,
    pub lipschitz: f64,
    pub rho0: f64,
}

/// Textual form of the coefficients, as found in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSource {
    pub sigma: Vec<Vec<String>>,
    #[serde(default)]
    pub b: Vec<String>,
    pub lipschitz: f64,
    pub rho0: f64,
}

impl Coefficients {
    pub fn new(
        d: usize,
        sigma: Vec<Expr>,
        drift: Vec<Expr>,
        lipschitz: f64,
        rho0: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if sigma.len() != d * d || drift.len() != d {
            return Err(Error::Config(format!(
                "sigma needs {} entries and b needs {d}, got {} and {}",
                d * d,
                sigma.len(),
                drift.len()
            )));
        }
        if sigma
            .iter()
            .chain(&drift)
            .any(|e| e.max_var().is_some_and(|i| i >= d))
        {
            return Err(Error::Config(format!(
                "coefficients refer to a variable beyond x{d}"
            )));
        }
        if !(lipschitz > 0.0 && rho0 > 0.0) {
            return Err(Error::Config(
                "declared lipschitz and rho0 must be positive".into(),
            ));
        }
        Ok(Coefficients {
            d,
            sigma,
            drift,
            lipschitz,
            rho0,
        })
    }

    pub fn from_source(src: &CoefficientSource) -> Result<Self> {
        let d = src.sigma.len();
        if src.sigma.iter().any(|r| r.len() != d) {
            return Err(Error::Config("sigma must be a square matrix".into()));
        }
        let sigma = src
            .sigma
            .iter()
            .flatten()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let drift = if src.b.is_empty() {
            vec![Expr::Const(0.0); d]
        } else {
            src.b
                .iter()
                .map(|s| Expr::parse(s))
                .collect::<Result<Vec<_>>>()?
        };
        Coefficients::new(d, sigma, drift, src.lipschitz, src.rho0)
    }

    pub fn to_source(&self) -> CoefficientSource {
        CoefficientSource {
            sigma: self
                .sigma
                .chunks(self.d)
                .map(|r| r.iter().map(|e| e.to_string()).collect())
                .collect(),
            b: self.drift.iter().map(|e| e.to_string()).collect(),
            lipschitz: self.lipschitz,
            rho0: self.rho0,
        }
    }

    /// Constant σ given as a row-major matrix, b = 0.
    pub fn constant(d: usize, sigma: &[f64]) -> Result<Self> {
        let m = DMatrix::from_row_slice(d, d, sigma);
        let svd = m.clone().svd(false, false);
        let smin = svd.singular_values.min();
        let smax = svd.singular_values.max();
        Coefficients::new(
            d,
            sigma.iter().map(|&c| Expr::Const(c)).collect(),
            vec![Expr::Const(0.0); d],
            smax.max(f64::MIN_POSITIVE),
            smin.max(f64::MIN_POSITIVE),
        )
    }

    pub fn identity(d: usize) -> Self {
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            s[i * d + i] = 1.0;
        }
        Coefficients::constant(d, &s).unwrap()
    }

    /// Named coefficient families: `identity-additive`, `diag-trig`
    /// (σ = diag(2 + sin x_i)) and `tanh-bounded` (σ = diag(1.5 + tanh(x_i)/2)).
    pub fn preset(name: &str, d: usize) -> Result<Self> {
        let diag = |f: &dyn Fn(usize) -> Expr, lip: f64, rho0: f64| -> Result<Self> {
            let mut s = vec![Expr::Const(0.0); d * d];
            for i in 0..d {
                s[i * d + i] = f(i);
            }
            Coefficients::new(d, s, vec![Expr::Const(0.0); d], lip, rho0)
        };
        match name {
            "identity-additive" => Ok(Coefficients::identity(d)),
            "diag-trig" => diag(
                &|i| {
                    Expr::Add(
                        Box::new(Expr::Const(2.0)),
                        Box::new(Expr::Sin(Box::new(Expr::Var(i)))),
                    )
                },
                1.0,
                1.0,
            ),
            "tanh-bounded" => diag(
                &|i| {
                    Expr::Add(
                        Box::new(Expr::Const(1.5)),
                        Box::new(Expr::Mul(
                            Box::new(Expr::Const(0.5)),
                            Box::new(Expr::Tanh(Box::new(Expr::Var(i)))),
                        )),
                    )
                },
                0.5,
                1.0,
            ),
            _ => Err(Error::Config(format!(
                "unknown coefficient preset {name:?} (identity-additive, diag-trig, tanh-bounded)"
            ))),
        }
    }

    pub fn with_drift(mut self, drift: Vec<Expr>) -> Result<Self> {
        if drift.len() != self.d {
            return Err(Error::Config(format!("b needs {} entries", self.d)));
        }
        self.drift = drift;
        Coefficients::new(self.d, self.sigma, self.drift, self.lipschitz, self.rho0)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// σ is the same matrix everywhere.
    pub fn is_additive(&self) -> bool {
        self.sigma.iter().all(Expr::is_constant)
    }

    pub fn has_drift(&self) -> bool {
        self.drift
            .iter()
            .any(|e| !(e.is_constant() && e.eval(&[]) == 0.0))
    }

    /// σ(x) row-major into `out`.
    pub fn sigma_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.sigma) {
            *o = e.eval(x);
        }
    }

    pub fn sigma_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d * self.d];
        self.sigma_into(x, &mut out);
        out
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.drift) {
            *o = e.eval(x);
        }
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.drift_into(x, &mut out);
        out
    }

    /// The constant matrix of an additive model.
    pub fn constant_sigma(&self) -> Result<Vec<f64>> {
        if !self.is_additive() {
            return Err(Error::Unsupported("sigma depends on the state".into()));
        }
        Ok(self.sigma_at(&vec![0.0; self.d]))
    }

    pub fn describe(&self) -> String {
        let s: Vec<String> = self.sigma.iter().map(|e| e.to_string()).collect();
        let b: Vec<String> = self.drift.iter().map(|e| e.to_string()).collect();
        format!(
            "d={};sigma=[{}];b=[{}];lip={:?};rho0={:?}",
            self.d,
            s.join(","),
            b.join(","),
            self.lipschitz,
            self.rho0
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub probes: usize,
    /// Smallest ‖vᵀσ(x)‖ over probe points and unit v.
    pub min_ellipticity: f64,
    pub declared_rho0: f64,
    pub lipschitz_sigma: f64,
    pub lipschitz_b: f64,
    pub declared_lipschitz: f64,
    pub sigma_sup: f64,
    /// |det σ| for additive coefficients.
    pub det_sigma: Option<f64>,
    pub additive: bool,
    pub passed: bool,
    pub violations: Vec<String>,
}

fn smallest_singular(m: &[f64], d: usize) -> (f64, f64) {
    let svd = DMatrix::from_row_slice(d, d, m).svd(false, false);
    (svd.singular_values.min(), svd.singular_values.max())
}

/// Probes σ and b at random points of the ball of radius 10: empirical
/// ellipticity, Lipschitz quotients and the sup of σ, against declared bounds.
pub fn check_hypotheses(
    coeffs: &Coefficients,
    probe_budget: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if probe_budget < 100 {
        return Err(Error::Config(format!(
            "probe_budget = {probe_budget} must be at least 100"
        )));
    }
    let d = coeffs.d;
    let mut rng = substream(&[seed, 0x5052_4F42_45]);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let r = 10.0 * rng.random::<f64>().powf(1.0 / d as f64);
        g.iter().map(|v| v * r / n).collect()
    };
    let mut min_ell = f64::INFINITY;
    let mut sup = 0.0f64;
    let mut lip_s = 0.0f64;
    let mut lip_b = 0.0f64;
    let mut sx = vec![0.0; d * d];
    let mut sy = vec![0.0; d * d];
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    for i in 0..probe_budget {
        let x = if i == 0 {
            vec![0.0; d]
        } else {
            point(&mut rng)
        };
        coeffs.sigma_into(&x, &mut sx);
        let (lo, hi) = smallest_singular(&sx, d);
        min_ell = min_ell.min(lo);
        sup = sup.max(hi);
        // neighbour at a random scale between 1e-4 and 1
        let scale = 10f64.powf(-4.0 * rng.random::<f64>());
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let y: Vec<f64> = x
            .iter()
            .zip(&dir)
            .map(|(a, v)| a + scale * v / dn)
            .collect();
        coeffs.sigma_into(&y, &mut sy);
        let dist = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist > 0.0 {
            let ds = DMatrix::from_row_slice(d, d, &sx) - DMatrix::from_row_slice(d, d, &sy);
            let op = ds.svd(false, false).singular_values.max();
            lip_s = lip_s.max(op / dist);
            coeffs.drift_into(&x, &mut bx);
            coeffs.drift_into(&y, &mut by);
            let db = bx
                .iter()
                .zip(&by)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            lip_b = lip_b.max(db / dist);
        }
    }
    let additive = coeffs.is_additive();
    let det_sigma = additive.then(|| {
        DMatrix::from_row_slice(d, d, &coeffs.sigma_at(&vec![0.0; d]))
            .determinant()
            .abs()
    });
    let slack = 1e-9;
    let mut violations = Vec::new();
    if min_ell < coeffs.rho0 * (1.0 - slack) {
        violations.push(format!(
            "ellipticity {min_ell} below declared rho0 {}",
            coeffs.rho0
        ));
    }
    if lip_s > coeffs.lipschitz * (1.0 + 1e-6) {
        violations.push(format!(
            "sigma Lipschitz quotient {lip_s} above declared {}",
            coeffs.lipschitz
        ));
    }
    if lip_b > coeffs.lipschitz * (1.0 + 1e-6) {
        violations.push(format!(
            "b Lipschitz quotient {lip_b} above declared {}",
            coeffs.lipschitz
        ));
    }
    if !sup.is_finite() {
        violations.push("sigma is not bounded on the probe set".into());
    }
    if det_sigma == Some(0.0) {
        violations.push("constant sigma is singular".into());
    }
    Ok(HypothesisReport {
        probes: probe_budget,
        min_ellipticity: min_ell,
        declared_rho0: coeffs.rho0,
        lipschitz_sigma: lip_s,
        lipschitz_b: lip_b,
        declared_lipschitz: coeffs.lipschitz,
        sigma_sup: sup,
        det_sigma,
        additive,
        passed: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_handles_precedence_and_functions() {
        let e = Expr::parse("2 + sin(x1) * -3 - x2*x2").unwrap();
        let x = [0.5, 2.0];
        assert_eq!(e.eval(&x), 2.0 + 0.5f64.sin() * -3.0 - 4.0);
        assert_eq!(Expr::parse("1.5e-1").unwrap().eval(&[]), 0.15);
        assert_eq!(
            Expr::parse("tanh(cos((x1)))").unwrap().eval(&[0.0]),
            1f64.tanh()
        );
        for bad in ["", "x0", "2 +", "sinx1", "foo(1)", "(1", "1)"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
        let back = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(back.eval(&x), e.eval(&x));
    }

    #[test]
    fn identity_is_exactly_elliptic() {
        let r = check_hypotheses(&Coefficients::identity(2), 200, 1).unwrap();
        assert_eq!(r.min_ellipticity, 1.0);
        assert!(r.passed && r.additive);
        assert_eq!(r.det_sigma, Some(1.0));
    }

    #[test]
    fn trig_diagonal_passes_declared_bounds() {
        let c = Coefficients::new(
            2,
            vec![
                Expr::parse("2 + sin(x1)").unwrap(),
                Expr::Const(0.0),
                Expr::Const(0.0),
                Expr::parse("2 + cos(x2)").unwrap(),
            ],
            vec![Expr::Const(0.0); 2],
            1.0,
            1.0,
        )
        .unwrap();
        let r = check_hypotheses(&c, 500, 3).unwrap();
        assert!(r.min_ellipticity >= 1.0);
        assert!(r.passed, "{:?}", r.violations);
        assert!(!r.additive);
    }

    #[test]
    fn linear_drift_has_unit_quotient() {
        let c = Coefficients::identity(2)
            .with_drift(vec![Expr::Var(0), Expr::Var(1)])
            .unwrap();
        let r = check_hypotheses(&c, 300, 5).unwrap();
        assert!((r.lipschitz_b - 1.0).abs() < 1e-9);
        assert!(r.passed);
    }

    #[test]
    fn declared_bounds_violations_are_reported() {
        let mut c = Coefficients::preset("diag-trig", 1).unwrap();
        c.rho0 = 1.5;
        c.lipschitz = 0.5;
        let r = check_hypotheses(&c, 400, 2).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn presets_and_sources_roundtrip() {
        for name in ["identity-additive", "diag-trig", "tanh-bounded"] {
            let c = Coefficients::preset(name, 3).unwrap();
            let back = Coefficients::from_source(&c.to_source()).unwrap();
            let x = [0.3, -1.2, 2.0];
            assert_eq!(back.sigma_at(&x), c.sigma_at(&x));
            assert!(check_hypotheses(&c, 200, 9).unwrap().passed, "{name}");
        }
        assert!(Coefficients::preset("nope", 1).is_err());
    }
}
