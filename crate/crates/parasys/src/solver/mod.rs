//! Time stepping of the discretised Cauchy problem, the exhaustion ladder
//! `L → ∞`, and the constant matrix `C̄` bounding the coupling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{analyse_row_sum, CoefficientModel, Decision, Samples, Witness};
use crate::discretization::{assemble_generator, build_grid, Boundary, DiscreteDomain};
use crate::error::{Error, Result};
use crate::linalg::{Csr, Factored};

pub use crate::discretization::StateField;

/// Unknown count above which the iterative solver replaces sparse LU.
pub const LU_LIMIT: usize = 200_000;

/// Columns advanced together by block solves.
const BLOCK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEuler,
    /// Crank–Nicolson, θ = 1/2.
    Theta,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::Theta => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub s: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Times at which the field is recorded; must lie on the step grid.
    #[serde(default)]
    pub record: Vec<f64>,
}

fn default_scheme() -> Scheme {
    Scheme::ImplicitEuler
}

impl EvolveConfig {
    pub fn new(s: f64, t_end: f64, dt: f64, scheme: Scheme) -> Self {
        EvolveConfig { s, t_end, dt, scheme, record: vec![t_end] }
    }

    pub fn recording(mut self, record: Vec<f64>) -> Self {
        self.record = record;
        self
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.s < self.t_end) {
            return Err(Error::Invalid(format!("need s < t_end, got s = {}, t_end = {}", self.s, self.t_end)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        step_index(self.s, self.dt, self.t_end).ok_or_else(|| {
            Error::Invalid(format!("t_end - s = {} is not a multiple of dt = {}", self.t_end - self.s, self.dt))
        })
    }

    /// Step indices of the record times, ascending.
    pub fn record_steps(&self) -> Result<Vec<usize>> {
        let n = self.steps()?;
        let mut out = Vec::with_capacity(self.record.len());
        for &r in &self.record {
            match step_index(self.s, self.dt, r) {
                Some(j) if j <= n => out.push(j),
                _ => return Err(Error::Invalid(format!("record time {r} is not on the step grid of [{}, {}]", self.s, self.t_end))),
            }
        }
        if out.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invalid("record times must be sorted".into()));
        }
        Ok(out)
    }
}

/// `j` with `s + j·dt = t`, if `t` is on the grid.
pub fn step_index(s: f64, dt: f64, t: f64) -> Option<usize> {
    let j = ((t - s) / dt).round();
    (j >= 0.0 && (s + j * dt - t).abs() <= 1e-9 * dt.max(1e-300) + 1e-12 * t.abs()).then_some(j as usize)
}

struct Stage {
    lhs: Factored,
    /// `I + (1-θ)dt·L(t)`; absent for implicit Euler.
    rhs: Option<Csr>,
}

/// One-step map `u(t) ↦ u(t+dt)` on a fixed grid. Autonomous models factor
/// the system once; nonautonomous ones reassemble every step.
pub struct Propagator<'a> {
    model: &'a dyn CoefficientModel,
    dom: DiscreteDomain,
    dt: f64,
    scheme: Scheme,
    upwind: bool,
    lu_limit: usize,
    cached: Option<Stage>,
}

impl<'a> Propagator<'a> {
    pub fn new(model: &'a dyn CoefficientModel, dom: DiscreteDomain, dt: f64, scheme: Scheme, upwind: bool) -> Self {
        Propagator { model, dom, dt, scheme, upwind, lu_limit: LU_LIMIT, cached: None }
    }

    pub fn with_lu_limit(mut self, limit: usize) -> Self {
        self.lu_limit = limit;
        self
    }

    pub fn dom(&self) -> &DiscreteDomain {
        &self.dom
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn build(&self, t: f64) -> Result<Stage> {
        let th = self.scheme.theta();
        let next = assemble_generator(self.model, &self.dom, t + self.dt, self.upwind)?;
        let lhs = Factored::new(next.mat.shifted(1.0, -th * self.dt), self.lu_limit, t + self.dt)?;
        let rhs = if th < 1.0 {
            let now = if self.model.is_autonomous() { next } else { assemble_generator(self.model, &self.dom, t, self.upwind)? };
            Some(now.mat.shifted(1.0, (1.0 - th) * self.dt))
        } else {
            None
        };
        Ok(Stage { lhs, rhs })
    }

    fn with_stage<T>(&mut self, t: f64, f: impl FnOnce(&Stage) -> Result<T>) -> Result<T> {
        if self.model.is_autonomous() {
            if self.cached.is_none() {
                self.cached = Some(self.build(t)?);
            }
            f(self.cached.as_ref().unwrap())
        } else {
            let st = self.build(t)?;
            f(&st)
        }
    }

    /// Advances every column from `t` to `t + dt`.
    pub fn advance(&mut self, cols: &mut [Vec<f64>], t: f64) -> Result<()> {
        let dt = self.dt;
        self.with_stage(t, |st| {
            cols.par_chunks_mut(BLOCK).try_for_each(|chunk| {
                if let Some(b) = &st.rhs {
                    let mut tmp = vec![0.0; b.n];
                    for c in chunk.iter_mut() {
                        b.matvec(c, &mut tmp);
                        c.copy_from_slice(&tmp);
                    }
                }
                st.lhs.solve_block(chunk, false, t + dt)?;
                check_finite(chunk, t + dt)
            })
        })
    }

    /// The transpose of the step from `t` to `t + dt`, applied to row
    /// vectors: `v ↦ Bᵀ A⁻ᵀ v`.
    pub fn advance_adjoint(&mut self, cols: &mut [Vec<f64>], t: f64) -> Result<()> {
        let dt = self.dt;
        self.with_stage(t, |st| {
            cols.par_chunks_mut(BLOCK).try_for_each(|chunk| {
                st.lhs.solve_block(chunk, true, t + dt)?;
                if let Some(b) = &st.rhs {
                    let mut tmp = vec![0.0; b.n];
                    for c in chunk.iter_mut() {
                        b.matvec_transpose(c, &mut tmp);
                        c.copy_from_slice(&tmp);
                    }
                }
                check_finite(chunk, t)
            })
        })
    }
}

fn check_finite(cols: &[Vec<f64>], t: f64) -> Result<()> {
    if cols.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    Ok(())
}

/// A single step of the scheme from `u.t` to `u.t + dt`.
pub fn step(model: &dyn CoefficientModel, u: &StateField, dt: f64, scheme: Scheme, upwind: bool) -> Result<StateField> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    let mut p = Propagator::new(model, u.dom, dt, scheme, upwind);
    let mut cols = vec![u.values.clone()];
    p.advance(&mut cols, u.t)?;
    StateField::new(u.dom, u.m, u.t + dt, cols.pop().unwrap())
}

/// Evolves several initial fields at once; returns `records[column][record]`.
pub fn evolve_many(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    cfg: &EvolveConfig,
    fields: Vec<Vec<f64>>,
    upwind: bool,
) -> Result<Vec<Vec<StateField>>> {
    let m = model.components();
    let n = cfg.steps()?;
    let rec = cfg.record_steps()?;
    let mut cols = Vec::with_capacity(fields.len());
    for f in fields {
        let mut sf = StateField::new(*dom, m, cfg.s, f)?;
        sf.zero_dirichlet_boundary();
        cols.push(sf.values);
    }
    let mut out: Vec<Vec<StateField>> = vec![Vec::with_capacity(rec.len()); cols.len()];
    let mut prop = Propagator::new(model, *dom, cfg.dt, cfg.scheme, upwind);
    let mut next = 0;
    let push = |out: &mut Vec<Vec<StateField>>, cols: &[Vec<f64>], t: f64| {
        for (o, c) in out.iter_mut().zip(cols) {
            o.push(StateField { dom: *dom, m, t, values: c.clone() });
        }
    };
    while next < rec.len() && rec[next] == 0 {
        push(&mut out, &cols, cfg.s);
        next += 1;
    }
    for j in 0..n {
        let t = cfg.s + j as f64 * cfg.dt;
        prop.advance(&mut cols, t)?;
        while next < rec.len() && rec[next] == j + 1 {
            let tr = if j + 1 == n { cfg.t_end } else { cfg.s + (j + 1) as f64 * cfg.dt };
            push(&mut out, &cols, tr);
            next += 1;
        }
        if next == rec.len() {
            break;
        }
    }
    Ok(out)
}

pub fn evolve(model: &dyn CoefficientModel, dom: &DiscreteDomain, cfg: &EvolveConfig, f: &StateField, upwind: bool) -> Result<Vec<StateField>> {
    if (f.t - cfg.s).abs() > 1e-12 * (1.0 + cfg.s.abs()) {
        return Err(Error::Invalid(format!("initial field is stamped t = {}, evolution starts at s = {}", f.t, cfg.s)));
    }
    if f.dom != *dom || f.m != model.components() {
        return Err(Error::Dimension("initial field does not match the grid or component count".into()));
    }
    Ok(evolve_many(model, dom, cfg, vec![f.values.clone()], upwind)?.pop().unwrap())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub ladder: Vec<f64>,
    /// `δ_r = ‖u_{L_r} − u_{L_{r+1}}‖∞` on the inner window.
    pub deltas: Vec<f64>,
    pub converged: bool,
    pub tol: f64,
    /// Solution on the largest box.
    pub final_field: StateField,
    /// Inner-window coordinates and per-rung values (`m` per point).
    pub inner_points: Vec<Vec<f64>>,
    pub inner_values: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn exhaustion_solve(
    model: &dyn CoefficientModel,
    f: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
    cfg: &EvolveConfig,
    ladder: &[(f64, usize)],
    inner_l: f64,
    tol: f64,
    bc: Boundary,
    upwind: bool,
) -> Result<ExhaustionReport> {
    if ladder.is_empty() {
        return Err(Error::Invalid("empty exhaustion ladder".into()));
    }
    let d = model.dim();
    let m = model.components();
    let doms: Vec<DiscreteDomain> = ladder.iter().map(|&(l, n)| build_grid(d, l, n, bc)).collect::<Result<_>>()?;
    let dx = doms[0].dx;
    for (w, dm) in doms.windows(2).zip(1..) {
        if !(w[1].l > w[0].l) {
            return Err(Error::Invalid(format!("ladder half-widths must increase (rung {dm})")));
        }
        let shift = (w[1].l - w[0].l) / dx;
        if (w[1].dx - dx).abs() > 1e-12 * dx || (shift - shift.round()).abs() > 1e-9 {
            return Err(Error::Invalid(format!("ladder grids are not nested: rung {dm} has Δx = {}, first rung Δx = {dx}", w[1].dx)));
        }
    }
    if !(inner_l < doms[0].l) {
        return Err(Error::Invalid(format!("inner half-width {inner_l} must be below the smallest L = {}", doms[0].l)));
    }
    let cfg = EvolveConfig { record: vec![cfg.t_end], ..cfg.clone() };
    let runs: Vec<Result<StateField>> = doms
        .par_iter()
        .map(|dom| {
            let f0 = StateField::from_fn(*dom, m, cfg.s, f)?;
            Ok(evolve(model, dom, &cfg, &f0, upwind)?.pop().unwrap())
        })
        .collect();
    let runs: Vec<StateField> = runs.into_iter().collect::<Result<_>>()?;
    let windows: Vec<Vec<usize>> = doms.iter().map(|dm| dm.window(inner_l)).collect();
    if windows.iter().any(|w| w.len() != windows[0].len()) {
        return Err(Error::Invalid("inner windows differ across rungs".into()));
    }
    let inner_points = windows[0].iter().map(|&p| doms[0].point(p)).collect();
    let inner_values: Vec<Vec<f64>> = runs
        .iter()
        .zip(&windows)
        .map(|(u, w)| w.iter().flat_map(|&p| (0..m).map(move |k| u.get(k, p))).collect())
        .collect();
    let deltas: Vec<f64> = inner_values
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let converged = deltas.last().is_some_and(|d| *d <= tol);
    Ok(ExhaustionReport {
        ladder: doms.iter().map(|dm| dm.l).collect(),
        deltas,
        converged,
        tol,
        final_field: runs.into_iter().last().unwrap(),
        inner_points,
        inner_values,
    })
}

/// `C̄` with `K = ‖C̄‖₂` and, when its off-diagonal part is nonnegative and
/// its row sums nonpositive, the certificate that `G(t,s)` is a contraction
/// for the componentwise max norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KBar {
    pub cbar: Vec<Vec<f64>>,
    pub k: f64,
    pub contractive: bool,
}

impl KBar {
    /// Bound on `‖u(t)‖∞ / ‖f‖∞` with pointwise Euclidean norms.
    pub fn growth_bound(&self, elapsed: f64) -> f64 {
        (self.k * elapsed).exp()
    }
}

pub fn compute_kbar(model: &dyn CoefficientModel, samples: &Samples) -> Result<KBar> {
    let m = model.components();
    if samples.points.is_empty() || samples.times.is_empty() {
        return Err(Error::Invalid("empty sample set".into()));
    }
    let mut off = vec![vec![f64::INFINITY; m]; m];
    let mut rows = vec![f64::NEG_INFINITY; m];
    if let Some(p) = model.as_polynomial() {
        let spec = p.spec();
        let [a, b] = spec.interval;
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                let e = spec.dmat[i][j].enclose(a, b);
                if spec.sigma_exp[i][j].value() > 0.0 && e.sampled_min < 0.0 {
                    return Err(Error::Refused(format!(
                        "c_{i}{j} is unbounded below: d_{i}{j}({}) = {} < 0 with positive growth exponent",
                        e.argmin, e.sampled_min
                    )));
                }
                // d·r^σ with d >= 0 or σ = 0 is smallest at r = 1
                off[i][j] = e.sampled_min;
            }
            let an = analyse_row_sum(p, i);
            if let Decision::Refuted(t) = an.bounded_above {
                return Err(Error::Refused(format!("row sum {i} is unbounded above at t = {t}")));
            }
            rows[i] = an.sup;
        }
    } else {
        let mut c = vec![0.0; m * m];
        let np = samples.points.len();
        let mut by_point = vec![vec![f64::INFINITY; np]; samples.times.len()];
        for (ti, &t) in samples.times.iter().enumerate() {
            for (pi, x) in samples.points.iter().enumerate() {
                model.coupling(t, x, &mut c);
                for i in 0..m {
                    let row: f64 = (0..m).map(|j| c[i * m + j]).sum();
                    let mag: f64 = (0..m).map(|j| c[i * m + j].abs()).sum();
                    rows[i] = rows[i].max(if row.abs() <= 1e-12 * mag { 0.0 } else { row });
                    for j in (0..m).filter(|&j| j != i) {
                        off[i][j] = off[i][j].min(c[i * m + j]);
                        by_point[ti][pi] = by_point[ti][pi].min(c[i * m + j]);
                    }
                }
            }
        }
        for (ti, v) in by_point.iter().enumerate() {
            for ray in &samples.rays {
                let dec = ray.windows(2).all(|w| v[w[1]] < v[w[0]] - 1e-12 * (1.0 + v[w[0]].abs()));
                let last = *ray.last().unwrap();
                if dec && v[last] < 0.0 {
                    let w = Witness::at(samples.times[ti], &samples.points[last], &[], v[last]);
                    return Err(Error::Refused(format!(
                        "off-diagonal coupling decreases without bound along a ray; witness {}",
                        serde_json::to_string(&w).unwrap_or_default()
                    )));
                }
            }
        }
    }
    let mut cbar = vec![vec![0.0; m]; m];
    for i in 0..m {
        let mut s = 0.0;
        for j in (0..m).filter(|&j| j != i) {
            cbar[i][j] = off[i][j];
            s += off[i][j];
        }
        cbar[i][i] = rows[i] - s;
    }
    let k = spectral_norm(&cbar);
    let contractive = (0..m).all(|i| rows[i] <= 0.0 && (0..m).all(|j| j == i || off[i][j] >= 0.0));
    Ok(KBar { cbar, k, contractive })
}

pub(crate) fn spectral_norm(a: &[Vec<f64>]) -> f64 {
    let m = a.len();
    if m == 0 {
        return 0.0;
    }
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| a[i][j]);
    mat.singular_values().max()
}
