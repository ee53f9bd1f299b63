//! Power-law coefficient family
//!
//! ```text
//! q_ij^k(t,x) = ω_ij^k(t) (1+|x|²)^{h_ij^k}
//! b_i^k(t,x)  = -γ_i^k(t) x_i (1+|x|²)^{ℓ_i^k}
//! c_hk(t,x)   = d_hk(t) (1+|x|²)^{σ_hk}
//! ```
//!
//! Exponents are rationals so growth-order comparisons are exact.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::model::CoefficientModel;
use super::timefn::{Decision, TimeFn};
use crate::error::{Error, Result};

/// A nonnegative rational growth exponent. Accepts integers, floats with a
/// small exact rational form, or strings such as `"3/2"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(pub Ratio<i64>);

impl Exponent {
    pub fn new(num: i64, den: i64) -> Self {
        Exponent(Ratio::new(num, den))
    }
    pub fn int(n: i64) -> Self {
        Exponent(Ratio::from_integer(n))
    }
    pub fn zero() -> Self {
        Self::int(0)
    }
    pub fn value(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(*self.0.numer())
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Str(String),
        }
        use serde::de::Error as _;
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Exponent::int(n)),
            Raw::Float(x) => {
                for den in 1..=1000i64 {
                    let num = (x * den as f64).round();
                    if (num / den as f64 - x).abs() < 1e-12 {
                        return Ok(Exponent::new(num as i64, den));
                    }
                }
                Err(D::Error::custom(format!("exponent {x} has no small rational form; write it as \"p/q\"")))
            }
            Raw::Str(s) => {
                let s = s.trim();
                let r = match s.split_once('/') {
                    Some((a, b)) => {
                        let a: i64 = a.trim().parse().map_err(D::Error::custom)?;
                        let b: i64 = b.trim().parse().map_err(D::Error::custom)?;
                        if b == 0 {
                            return Err(D::Error::custom("zero denominator in exponent"));
                        }
                        Ratio::new(a, b)
                    }
                    None => Ratio::from_integer(s.parse::<i64>().map_err(D::Error::custom)?),
                };
                Ok(Exponent(r))
            }
        }
    }
}

/// Tables of time functions and exponents defining a power-law model.
/// Indexing: `omega[k][i][j]`, `gamma[k][i]`, `dmat[h][k]`, `h_exp[k][i][j]`,
/// `ell_exp[k][i]`, `sigma_exp[h][k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    pub d: usize,
    pub m: usize,
    pub omega: Vec<Vec<Vec<TimeFn>>>,
    pub gamma: Vec<Vec<TimeFn>>,
    pub dmat: Vec<Vec<TimeFn>>,
    pub h_exp: Vec<Vec<Vec<Exponent>>>,
    pub ell_exp: Vec<Vec<Exponent>>,
    pub sigma_exp: Vec<Vec<Exponent>>,
    /// Working time interval `[a, b]` over which time functions are bounded.
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
}

fn default_interval() -> [f64; 2] {
    [0.0, 1.0]
}

impl PolynomialSpec {
    /// All exponents zero, `ω = I`, `γ = 1`, `d = 0`.
    pub fn uncoupled_ou(d: usize, m: usize) -> Self {
        let eye = |i: usize, j: usize| TimeFn::constant(if i == j { 1.0 } else { 0.0 });
        PolynomialSpec {
            d,
            m,
            omega: (0..m).map(|_| (0..d).map(|i| (0..d).map(|j| eye(i, j)).collect()).collect()).collect(),
            gamma: vec![vec![TimeFn::constant(1.0); d]; m],
            dmat: vec![vec![TimeFn::zero(); m]; m],
            h_exp: vec![vec![vec![Exponent::zero(); d]; d]; m],
            ell_exp: vec![vec![Exponent::zero(); d]; m],
            sigma_exp: vec![vec![Exponent::zero(); m]; m],
            interval: default_interval(),
        }
    }

    pub fn with_ell(mut self, ell: Exponent) -> Self {
        self.ell_exp = vec![vec![ell; self.d]; self.m];
        self
    }

    pub fn with_sigma(mut self, sigma: Vec<Vec<Exponent>>) -> Self {
        self.sigma_exp = sigma;
        self
    }

    pub fn with_dmat(mut self, dmat: Vec<Vec<f64>>) -> Self {
        self.dmat = dmat.into_iter().map(|r| r.into_iter().map(TimeFn::constant).collect()).collect();
        self
    }

    /// `τ_k = max_i {σ_kk, ℓ_i^k}`.
    pub fn tau(&self, k: usize) -> Exponent {
        self.ell_exp[k].iter().copied().fold(self.sigma_exp[k][k], Exponent::max)
    }

    fn check_shapes(&self) -> Result<()> {
        let (d, m) = (self.d, self.m);
        let bad = |what: &str| Err(Error::Config(format!("polynomial model: `{what}` has the wrong shape for d={d}, m={m}")));
        if d == 0 || m == 0 {
            return Err(Error::Config("polynomial model needs d >= 1 and m >= 1".into()));
        }
        if self.omega.len() != m || self.omega.iter().any(|t| t.len() != d || t.iter().any(|r| r.len() != d)) {
            return bad("omega");
        }
        if self.h_exp.len() != m || self.h_exp.iter().any(|t| t.len() != d || t.iter().any(|r| r.len() != d)) {
            return bad("h_exp");
        }
        if self.gamma.len() != m || self.gamma.iter().any(|r| r.len() != d) {
            return bad("gamma");
        }
        if self.ell_exp.len() != m || self.ell_exp.iter().any(|r| r.len() != d) {
            return bad("ell_exp");
        }
        if self.dmat.len() != m || self.dmat.iter().any(|r| r.len() != m) {
            return bad("dmat");
        }
        if self.sigma_exp.len() != m || self.sigma_exp.iter().any(|r| r.len() != m) {
            return bad("sigma_exp");
        }
        if !(self.interval[0] <= self.interval[1]) {
            return Err(Error::Config("polynomial model: interval must satisfy a <= b".into()));
        }
        Ok(())
    }
}

/// An immutable power-law model built from a validated [`PolynomialSpec`].
#[derive(Clone, Debug)]
pub struct PolynomialModel {
    spec: PolynomialSpec,
    autonomous: bool,
    // Exponents as floats, cached for evaluation.
    h: Vec<f64>,
    ell: Vec<f64>,
    sigma: Vec<f64>,
}

/// Validates the spec (shapes, symmetry of ω and h, nonnegative exponents,
/// positive drift rates) and builds the model.
pub fn build_polynomial_model(spec: PolynomialSpec) -> Result<PolynomialModel> {
    spec.check_shapes()?;
    let (d, m) = (spec.d, spec.m);
    let [a, b] = spec.interval;
    for k in 0..m {
        for i in 0..d {
            for j in 0..d {
                if spec.omega[k][i][j] != spec.omega[k][j][i] {
                    return Err(Error::Invalid(format!("omega[{k}] is not symmetric at ({i},{j})")));
                }
                if spec.h_exp[k][i][j] != spec.h_exp[k][j][i] {
                    return Err(Error::Invalid(format!("h_exp[{k}] is not symmetric at ({i},{j})")));
                }
            }
            match spec.gamma[k][i].decide_inf_above(a, b, 0.0, true) {
                Decision::Certified => {}
                Decision::Refuted(t) => {
                    return Err(Error::Invalid(format!(
                        "gamma[{k}][{i}] is not positive on the interval (value {} at t = {t})",
                        spec.gamma[k][i].eval(t)
                    )))
                }
                Decision::Undecided => {
                    return Err(Error::Invalid(format!("cannot certify inf gamma[{k}][{i}] > 0")))
                }
            }
        }
    }
    let all_exps = spec
        .h_exp
        .iter()
        .flatten()
        .flatten()
        .chain(spec.ell_exp.iter().flatten())
        .chain(spec.sigma_exp.iter().flatten());
    for e in all_exps {
        if e.0 < Ratio::from_integer(0) {
            return Err(Error::Invalid(format!("negative exponent {e}")));
        }
    }
    let autonomous = spec
        .omega
        .iter()
        .flatten()
        .flatten()
        .chain(spec.gamma.iter().flatten())
        .chain(spec.dmat.iter().flatten())
        .all(TimeFn::is_constant);
    let h = spec.h_exp.iter().flatten().flatten().map(Exponent::value).collect();
    let ell = spec.ell_exp.iter().flatten().map(Exponent::value).collect();
    let sigma = spec.sigma_exp.iter().flatten().map(Exponent::value).collect();
    Ok(PolynomialModel { spec, autonomous, h, ell, sigma })
}

fn weight(x: &[f64]) -> f64 {
    1.0 + x.iter().map(|v| v * v).sum::<f64>()
}

impl PolynomialModel {
    pub fn spec(&self) -> &PolynomialSpec {
        &self.spec
    }

    fn h(&self, k: usize, i: usize, j: usize) -> f64 {
        self.h[(k * self.spec.d + i) * self.spec.d + j]
    }
    fn ell(&self, k: usize, i: usize) -> f64 {
        self.ell[k * self.spec.d + i]
    }
    fn sigma(&self, h: usize, k: usize) -> f64 {
        self.sigma[h * self.spec.m + k]
    }

    /// Exact `div_x γ^k` with `γ^k_i = b^k_i - Σ_j D_j q^k_ij`.
    pub fn div_gamma(&self, k: usize, t: f64, x: &[f64]) -> f64 {
        let d = self.spec.d;
        let r = weight(x);
        let mut s = 0.0;
        for i in 0..d {
            let g = self.spec.gamma[k][i].eval(t);
            let l = self.ell(k, i);
            s -= g * r.powf(l) + 2.0 * l * g * x[i] * x[i] * r.powf(l - 1.0);
            let hii = self.h(k, i, i);
            s -= 2.0 * hii * self.spec.omega[k][i][i].eval(t) * r.powf(hii - 1.0);
            for j in 0..d {
                let hij = self.h(k, i, j);
                s -= 4.0 * hij * (hij - 1.0) * self.spec.omega[k][i][j].eval(t) * x[i] * x[j] * r.powf(hij - 2.0);
            }
        }
        s
    }

    /// Exact `γ^k(t,x)`.
    pub fn gamma_field(&self, k: usize, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.spec.d;
        let r = weight(x);
        for i in 0..d {
            let l = self.ell(k, i);
            let mut v = -self.spec.gamma[k][i].eval(t) * x[i] * r.powf(l);
            for j in 0..d {
                let hij = self.h(k, i, j);
                v -= self.spec.omega[k][i][j].eval(t) * hij * r.powf(hij - 1.0) * 2.0 * x[j];
            }
            out[i] = v;
        }
    }

    /// Upper bound `κ_C(t,x)` of the coupling quadratic form built from the
    /// diagonal decay and the largest off-diagonal eigenvalue. Valid when the
    /// diagonal of `d` is negative and the off-diagonal part nonnegative.
    pub fn kappa_c_recipe(&self, t: f64, x: &[f64]) -> f64 {
        let m = self.spec.m;
        let r = weight(x);
        let min_abs_diag = (0..m).map(|i| self.spec.dmat[i][i].eval(t).abs()).fold(f64::INFINITY, f64::min);
        let min_sigma_diag = (0..m).map(|i| self.sigma(i, i)).fold(f64::INFINITY, f64::min);
        let mut kappa = -min_abs_diag * r.powf(min_sigma_diag);
        if m > 1 {
            let mut off = nalgebra::DMatrix::<f64>::zeros(m, m);
            let mut max_sigma_off = f64::NEG_INFINITY;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        off[(i, j)] = 0.5 * (self.spec.dmat[i][j].eval(t) + self.spec.dmat[j][i].eval(t));
                        max_sigma_off = max_sigma_off.max(self.sigma(i, j));
                    }
                }
            }
            let lambda = off.symmetric_eigen().eigenvalues.max().max(0.0);
            kappa += lambda * r.powf(max_sigma_off);
        }
        kappa
    }
}

impl CoefficientModel for PolynomialModel {
    fn dim(&self) -> usize {
        self.spec.d
    }
    fn components(&self) -> usize {
        self.spec.m
    }
    fn diffusion(&self, k: usize, t: f64, x: &[f64], q: &mut [f64]) {
        let d = self.spec.d;
        let r = weight(x);
        for i in 0..d {
            for j in 0..d {
                q[i * d + j] = self.spec.omega[k][i][j].eval(t) * r.powf(self.h(k, i, j));
            }
        }
    }
    fn drift(&self, k: usize, t: f64, x: &[f64], b: &mut [f64]) {
        let r = weight(x);
        for i in 0..self.spec.d {
            b[i] = -self.spec.gamma[k][i].eval(t) * x[i] * r.powf(self.ell(k, i));
        }
    }
    fn coupling(&self, t: f64, x: &[f64], c: &mut [f64]) {
        let m = self.spec.m;
        let r = weight(x);
        for h in 0..m {
            for k in 0..m {
                let dhk = &self.spec.dmat[h][k];
                c[h * m + k] = if dhk.is_zero() { 0.0 } else { dhk.eval(t) * r.powf(self.sigma(h, k)) };
            }
        }
    }
    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
    fn as_polynomial(&self) -> Option<&PolynomialModel> {
        Some(self)
    }
}
