use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::polynomial::PolynomialModel;
use super::profile::ScalarField;
use crate::error::{Error, Result};

/// Evaluators for the coefficients `Q^k(t,x)`, `b^k(t,x)` and `C(t,x)`.
///
/// Outputs are written into caller buffers: `q` is d×d row-major, `b` has
/// length d, `c` is m×m row-major. Evaluators must be deterministic.
pub trait CoefficientModel: Send + Sync {
    fn dim(&self) -> usize;
    fn components(&self) -> usize;
    fn diffusion(&self, k: usize, t: f64, x: &[f64], q: &mut [f64]);
    fn drift(&self, k: usize, t: f64, x: &[f64], b: &mut [f64]);
    fn coupling(&self, t: f64, x: &[f64], c: &mut [f64]);
    /// Whether all coefficients are independent of `t`.
    fn is_autonomous(&self) -> bool;
    fn as_polynomial(&self) -> Option<&PolynomialModel> {
        None
    }
}

/// Spatial profile multiplying a constant coupling matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingGrowth {
    /// `C(x) = C⁰`
    Constant,
    /// `C(x) = (|x|+1)·C⁰`
    AbsPlusOne,
}

/// `Q^k = q·I`, `b^k(x) = -γ·x`, `C(x) = g(x)·C⁰`: heat (γ = 0) and
/// Ornstein–Uhlenbeck components with a shared, possibly growing, coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineModel {
    pub d: usize,
    pub m: usize,
    pub q: f64,
    #[serde(default)]
    pub gamma: f64,
    /// m×m matrix `C⁰`; omitted means zero coupling.
    #[serde(default)]
    pub coupling: Vec<Vec<f64>>,
    #[serde(default = "default_growth")]
    pub growth: CouplingGrowth,
}

fn default_growth() -> CouplingGrowth {
    CouplingGrowth::Constant
}

impl AffineModel {
    pub fn new(d: usize, m: usize, q: f64, gamma: f64) -> Self {
        AffineModel { d, m, q, gamma, coupling: vec![vec![0.0; m]; m], growth: CouplingGrowth::Constant }
    }

    /// Scalar Ornstein–Uhlenbeck operator `q·Δ - γ x·∇` in dimension d.
    pub fn ornstein_uhlenbeck(d: usize, q: f64, gamma: f64) -> Self {
        Self::new(d, 1, q, gamma)
    }

    pub fn with_coupling(mut self, c: Vec<Vec<f64>>, growth: CouplingGrowth) -> Self {
        self.coupling = c;
        self.growth = growth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::Config("model needs d >= 1 and m >= 1".into()));
        }
        if !(self.q > 0.0) {
            return Err(Error::Config(format!("diffusion q must be positive, got {}", self.q)));
        }
        if !self.coupling.is_empty()
            && (self.coupling.len() != self.m || self.coupling.iter().any(|r| r.len() != self.m))
        {
            return Err(Error::Config(format!("coupling must be {0}x{0}", self.m)));
        }
        Ok(())
    }

    fn growth_factor(&self, x: &[f64]) -> f64 {
        match self.growth {
            CouplingGrowth::Constant => 1.0,
            CouplingGrowth::AbsPlusOne => x.iter().map(|v| v * v).sum::<f64>().sqrt() + 1.0,
        }
    }
}

impl CoefficientModel for AffineModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn components(&self) -> usize {
        self.m
    }
    fn diffusion(&self, _k: usize, _t: f64, _x: &[f64], q: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                q[i * d + j] = if i == j { self.q } else { 0.0 };
            }
        }
    }
    fn drift(&self, _k: usize, _t: f64, x: &[f64], b: &mut [f64]) {
        for (bi, xi) in b.iter_mut().zip(x) {
            *bi = -self.gamma * xi;
        }
    }
    fn coupling(&self, _t: f64, x: &[f64], c: &mut [f64]) {
        let m = self.m;
        if self.coupling.is_empty() {
            c[..m * m].iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let g = self.growth_factor(x);
        for i in 0..m {
            for j in 0..m {
                c[i * m + j] = g * self.coupling[i][j];
            }
        }
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

type DiffFn = dyn Fn(usize, f64, &[f64], &mut [f64]) + Send + Sync;
type CoupFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A model assembled from closures, for coefficients outside the built-in
/// families.
#[derive(Clone)]
pub struct FnModel {
    d: usize,
    m: usize,
    autonomous: bool,
    diffusion: Arc<DiffFn>,
    drift: Arc<DiffFn>,
    coupling: Arc<CoupFn>,
}

impl FnModel {
    /// Starts from `Q = I`, `b = 0`, `C = 0`.
    pub fn new(d: usize, m: usize) -> Self {
        FnModel {
            d,
            m,
            autonomous: true,
            diffusion: Arc::new(move |_, _, _, q: &mut [f64]| {
                for i in 0..d {
                    for j in 0..d {
                        q[i * d + j] = if i == j { 1.0 } else { 0.0 };
                    }
                }
            }),
            drift: Arc::new(|_, _, _, b: &mut [f64]| b.iter_mut().for_each(|v| *v = 0.0)),
            coupling: Arc::new(|_, _, c: &mut [f64]| c.iter_mut().for_each(|v| *v = 0.0)),
        }
    }

    pub fn diffusion(mut self, f: impl Fn(usize, f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Arc::new(f);
        self
    }

    pub fn drift(mut self, f: impl Fn(usize, f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn coupling(mut self, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.coupling = Arc::new(f);
        self
    }

    /// Declares time dependence; the solver then reassembles every step.
    pub fn nonautonomous(mut self) -> Self {
        self.autonomous = false;
        self
    }
}

impl CoefficientModel for FnModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn components(&self) -> usize {
        self.m
    }
    fn diffusion(&self, k: usize, t: f64, x: &[f64], q: &mut [f64]) {
        (self.diffusion)(k, t, x, q)
    }
    fn drift(&self, k: usize, t: f64, x: &[f64], b: &mut [f64]) {
        (self.drift)(k, t, x, b)
    }
    fn coupling(&self, t: f64, x: &[f64], c: &mut [f64]) {
        (self.coupling)(t, x, c)
    }
    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

/// The scalar operator `𝒜_k + c_kk` of one component, as a 1-component model.
pub struct ScalarPart<'a> {
    model: &'a dyn CoefficientModel,
    k: usize,
}

impl<'a> ScalarPart<'a> {
    pub fn new(model: &'a dyn CoefficientModel, k: usize) -> Self {
        ScalarPart { model, k }
    }
}

impl CoefficientModel for ScalarPart<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn components(&self) -> usize {
        1
    }
    fn diffusion(&self, _k: usize, t: f64, x: &[f64], q: &mut [f64]) {
        self.model.diffusion(self.k, t, x, q)
    }
    fn drift(&self, _k: usize, t: f64, x: &[f64], b: &mut [f64]) {
        self.model.drift(self.k, t, x, b)
    }
    fn coupling(&self, t: f64, x: &[f64], c: &mut [f64]) {
        let m = self.model.components();
        let mut full = vec![0.0; m * m];
        self.model.coupling(t, x, &mut full);
        c[0] = full[self.k * m + self.k];
    }
    fn is_autonomous(&self) -> bool {
        self.model.is_autonomous()
    }
}

/// Scratch buffers for repeated coefficient evaluation at one point.
pub(crate) struct Coeffs {
    pub q: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Coeffs {
    pub fn new(d: usize, m: usize) -> Self {
        Coeffs { q: vec![0.0; d * d], b: vec![0.0; d], c: vec![0.0; m * m] }
    }
}

/// `(A(t)ψ)(x)` for a vector function given componentwise by exact jets.
pub fn eval_operator(
    model: &dyn CoefficientModel,
    psi: &[&dyn ScalarField],
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let (d, m) = (model.dim(), model.components());
    if x.len() != d {
        return Err(Error::Dimension(format!("point has {} coordinates, model dimension is {d}", x.len())));
    }
    if psi.len() != m {
        return Err(Error::Dimension(format!("ψ has {} components, model has {m}", psi.len())));
    }
    let mut cf = Coeffs::new(d, m);
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    model.coupling(t, x, &mut cf.c);
    let vals: Vec<f64> = psi.iter().map(|p| p.value(x)).collect();
    let mut out = vec![0.0; m];
    for k in 0..m {
        model.diffusion(k, t, x, &mut cf.q);
        model.drift(k, t, x, &mut cf.b);
        psi[k].gradient(x, &mut g);
        psi[k].hessian(x, &mut h);
        let trace: f64 = cf.q.iter().zip(&h).map(|(a, b)| a * b).sum();
        let drift: f64 = cf.b.iter().zip(&g).map(|(a, b)| a * b).sum();
        let coup: f64 = (0..m).map(|j| cf.c[k * m + j] * vals[j]).sum();
        out[k] = trace + drift + coup;
    }
    Ok(out)
}

/// `(A(t)(φ𝟙))(x)`: the operator applied to the same scalar in every component.
pub fn eval_on_diagonal(model: &dyn CoefficientModel, phi: &dyn ScalarField, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let psi: Vec<&dyn ScalarField> = vec![phi; model.components()];
    eval_operator(model, &psi, t, x)
}

/// `(𝒜_k(t) f)(x)` without the coupling term.
pub fn eval_scalar_part(model: &dyn CoefficientModel, k: usize, f: &dyn ScalarField, t: f64, x: &[f64]) -> f64 {
    let d = model.dim();
    let mut q = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    model.diffusion(k, t, x, &mut q);
    model.drift(k, t, x, &mut b);
    f.gradient(x, &mut g);
    f.hessian(x, &mut h);
    q.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + b.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
}

/// The first matrix of the standard positive 4×4 example: off-diagonal entries
/// nonnegative, row sums (0,-1,0,0); used with [`CouplingGrowth::AbsPlusOne`].
pub fn growing_coupling_admissible() -> Vec<Vec<f64>> {
    vec![
        vec![-4.0, 1.0, 2.0, 1.0],
        vec![1.0, -3.0, 1.0, 0.0],
        vec![0.0, 1.0, -1.0, 0.0],
        vec![0.0, 2.0, 0.0, -2.0],
    ]
}

/// Companion of [`growing_coupling_admissible`] whose last row sums to +1.
pub fn growing_coupling_inadmissible() -> Vec<Vec<f64>> {
    vec![
        vec![-4.0, 0.0, 2.0, 1.0],
        vec![0.0, -3.0, 1.0, 0.0],
        vec![0.0, 1.0, -1.0, 0.0],
        vec![1.0, 2.0, 0.0, -2.0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::profile::Profile;

    #[test]
    fn constant_psi_without_coupling_vanishes() {
        let m = AffineModel::new(2, 3, 1.5, 0.7);
        let v = [Profile::constant(2.0), Profile::constant(-1.0), Profile::constant(4.0)];
        let psi: Vec<&dyn ScalarField> = v.iter().map(|p| p as &dyn ScalarField).collect();
        let out = eval_operator(&m, &psi, 0.0, &[0.3, -1.2]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn growing_coupling_row_sums() {
        let model = AffineModel::new(1, 4, 1.0, 0.0)
            .with_coupling(growing_coupling_admissible(), CouplingGrowth::AbsPlusOne);
        let one = Profile::constant(1.0);
        for &x in &[0.0, 0.5, -2.0, 7.0] {
            let out = eval_on_diagonal(&model, &one, 0.0, &[x]).unwrap();
            let g = x.abs() + 1.0;
            let expect = [0.0, -g, 0.0, 0.0];
            for k in 0..4 {
                assert!((out[k] - expect[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn ou_on_quadratic() {
        let model = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let psi = Profile::Power { exponent: 1.0, scale: 1.0, shift: -1.0 };
        for &x in &[0.0, 1.0, -3.5] {
            let out = eval_operator(&model, &[&psi], 0.0, &[x]).unwrap();
            assert!((out[0] - (2.0 - 2.0 * x * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = AffineModel::ornstein_uhlenbeck(2, 1.0, 1.0);
        let psi = Profile::constant(1.0);
        assert!(matches!(eval_operator(&model, &[&psi], 0.0, &[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(eval_operator(&model, &[&psi, &psi], 0.0, &[1.0, 0.0]), Err(Error::Dimension(_))));
    }
}
