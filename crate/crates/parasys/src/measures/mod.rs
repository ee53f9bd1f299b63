//! Evolution systems of invariant measures by Cesàro averaging of kernel
//! rows, the invariance identity and `L^p(μ)` checks.
//!
//! Masses are stored point-major like [`StateField`] values: the mass of
//! component `i` at grid point `p` is `masses[p·m + i]`, so
//! `Σ_i ∫ f_i dμ_i` is a dot product with the grid samples of `f`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coefficients::{eval_scalar_part, CoefficientModel, Profile, Samples, ScalarField, Status, Verdict, Witness};
use crate::discretization::{Boundary, DiscreteDomain, StateField};
use crate::error::{Error, Result};
use crate::kernels::inner_window;
use crate::solver::{evolve_many, step_index, EvolveConfig, Propagator, Scheme};
use crate::verify::{PropertyVerdict, TolKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub upwind: bool,
    /// Quadrature nodes every `tau_stride` time steps.
    #[serde(default = "default_stride")]
    pub tau_stride: usize,
    /// Cauchy tolerance between the full and half averaging windows.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Lattice time `ℓ` sits at `origin + ℓ·unit`.
    #[serde(default)]
    pub origin: f64,
    #[serde(default = "default_unit")]
    pub unit: f64,
}

fn default_scheme() -> Scheme {
    Scheme::ImplicitEuler
}
fn default_stride() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-2
}
fn default_unit() -> f64 {
    1.0
}

impl MeasureConfig {
    pub fn new(dt: f64) -> Self {
        MeasureConfig { dt, scheme: default_scheme(), upwind: false, tau_stride: 4, tol: 1e-2, origin: 0.0, unit: 1.0 }
    }

    fn steps_between(&self, a: f64, b: f64) -> Result<usize> {
        step_index(a, self.dt, b).ok_or_else(|| Error::Invalid(format!("[{a}, {b}] is not a whole number of steps dt = {}", self.dt)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSystem {
    pub dom: DiscreteDomain,
    pub m: usize,
    pub times: Vec<f64>,
    /// One mass vector per entry of `times`.
    pub masses: Vec<Vec<f64>>,
    pub anchor: Vec<f64>,
    /// Grid point actually used for the anchor.
    pub anchor_point: usize,
    pub component: usize,
    /// Absolute end of the averaging window.
    pub horizon: f64,
    /// `(t, ‖μ^r_t − μ^{r/2}_t‖_TV)` per lattice time.
    pub tv_ladder: Vec<(f64, f64)>,
    pub converged: bool,
    /// All masses vanish: the limit is trivial and needs a nontriviality certificate.
    pub trivial: bool,
    pub cfg: MeasureConfig,
}

/// `½ Σ |a − b|`.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Cesàro measures `μ^j_{i,ℓ} ≈ (r−ℓ)⁻¹ ∫_ℓ^r p_{ji}(τ,ℓ,x₀,·) dτ` for the
/// lattice times `ℓ = 0..=n`. One backward adjoint sweep from the horizon
/// evaluates every average at once: a row of `G(τ,ℓ)` is `S_1ᵀ⋯S_kᵀ e`, so
/// the weighted sum over τ nests Horner-style.
pub fn cesaro_measures(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    x0: &[f64],
    j: usize,
    n: usize,
    r: f64,
    cfg: &MeasureConfig,
) -> Result<MeasureSystem> {
    let m = model.components();
    if j >= m || x0.len() != dom.d {
        return Err(Error::Dimension(format!("anchor component {j} / point {x0:?} do not fit the model")));
    }
    if cfg.tau_stride == 0 || !(cfg.unit > 0.0) {
        return Err(Error::Invalid("tau_stride and unit must be positive".into()));
    }
    if !(r > n as f64) {
        return Err(Error::Invalid(format!("horizon {r} must exceed the last lattice time {n}")));
    }
    let times: Vec<f64> = (0..=n).map(|l| cfg.origin + l as f64 * cfg.unit).collect();
    let horizon = cfg.origin + r * cfg.unit;
    let h = cfg.tau_stride as f64 * cfg.dt;
    let top = cfg.steps_between(times[0], horizon)?;
    // per lattice time: (start step, window length in nodes)
    let mut plan = Vec::with_capacity(times.len());
    for &t in &times {
        let k = cfg.steps_between(times[0], t)?;
        let len = top - k;
        if len % cfg.tau_stride != 0 || len < 2 * cfg.tau_stride {
            return Err(Error::Invalid(format!(
                "window [{t}, {horizon}] must hold at least two whole quadrature intervals of length {h}"
            )));
        }
        plan.push((k, len / cfg.tau_stride));
    }
    let ap = dom.nearest(x0);
    let e = dom.flat(m, j, ap);
    let size = dom.unknowns(m);
    let mut prop = Propagator::new(model, *dom, cfg.dt, cfg.scheme, cfg.upwind);
    // two columns per lattice time: the full window and its first ⌊nodes/2⌋ intervals
    let mut cols = vec![vec![0.0; size]; 2 * times.len()];
    let mut done: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; times.len()];
    let trap = |q: usize, nodes: usize| if q == 0 || q == nodes { 0.5 * h } else { h };
    let mut step = top;
    loop {
        for (l, &(k0, nodes)) in plan.iter().enumerate() {
            if step < k0 || done[l].is_some() {
                continue;
            }
            let local = step - k0;
            if local % cfg.tau_stride == 0 {
                let q = local / cfg.tau_stride;
                cols[2 * l][e] += trap(q, nodes);
                if q <= nodes / 2 {
                    cols[2 * l + 1][e] += trap(q, nodes / 2);
                }
            }
            if step == k0 {
                let len = nodes as f64 * h;
                let full: Vec<f64> = cols[2 * l].iter().map(|v| v / len).collect();
                let half_len = (nodes / 2) as f64 * h;
                let half: Vec<f64> = cols[2 * l + 1].iter().map(|v| v / half_len).collect();
                done[l] = Some((full, half));
            }
        }
        if step == 0 {
            break;
        }
        let active: Vec<usize> = (0..times.len()).filter(|&l| done[l].is_none()).collect();
        let mut work: Vec<Vec<f64>> = active.iter().flat_map(|&l| [std::mem::take(&mut cols[2 * l]), std::mem::take(&mut cols[2 * l + 1])]).collect();
        prop.advance_adjoint(&mut work, times[0] + (step - 1) as f64 * cfg.dt)?;
        for &l in active.iter().rev() {
            cols[2 * l + 1] = work.pop().unwrap_or_default();
            cols[2 * l] = work.pop().unwrap_or_default();
        }
        step -= 1;
    }
    let mut masses = Vec::with_capacity(times.len());
    let mut tv_ladder = Vec::with_capacity(times.len());
    for (l, d) in done.into_iter().enumerate() {
        let (mut full, mut half) = d.expect("every window closes");
        if dom.bc == Boundary::Dirichlet {
            for p in (0..dom.points()).filter(|&p| dom.is_boundary(p)) {
                for i in 0..m {
                    full[p * m + i] = 0.0;
                    half[p * m + i] = 0.0;
                }
            }
        }
        clamp_roundoff(&mut full);
        clamp_roundoff(&mut half);
        tv_ladder.push((times[l], tv_distance(&full, &half)));
        masses.push(full);
    }
    let converged = tv_ladder.iter().all(|(_, tv)| *tv <= cfg.tol);
    let trivial = masses.iter().all(|v| v.iter().sum::<f64>() <= 1e-12);
    Ok(MeasureSystem {
        dom: *dom,
        m,
        times,
        masses,
        anchor: x0.to_vec(),
        anchor_point: ap,
        component: j,
        horizon,
        tv_ladder,
        converged,
        trivial,
        cfg: cfg.clone(),
    })
}

/// Solver round-off can leave tiny negative masses.
fn clamp_roundoff(v: &mut [f64]) {
    let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    for x in v.iter_mut() {
        if *x < 0.0 && *x >= -1e-9 * scale {
            *x = 0.0;
        }
    }
}

impl MeasureSystem {
    fn lattice_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * self.cfg.dt)
    }

    /// `μ_t`: stored on the lattice, otherwise extended backwards from the
    /// next lattice time `n ≥ t` by `μ_t(A) = Σ_k ∫ (G(n,t)(χ_A e_i))_k dμ_{k,n}`.
    pub fn measure_at(&self, model: &dyn CoefficientModel, t: f64) -> Result<Vec<f64>> {
        if let Some(l) = self.lattice_index(t) {
            return Ok(self.masses[l].clone());
        }
        let l = self
            .times
            .iter()
            .position(|&s| s > t)
            .ok_or_else(|| Error::Invalid(format!("t = {t} lies beyond the last lattice time")))?;
        if l == 0 && t < self.times[0] {
            return Err(Error::Invalid(format!("t = {t} lies before the first lattice time")));
        }
        let k = self.cfg.steps_between(t, self.times[l])?;
        let mut prop = Propagator::new(model, self.dom, self.cfg.dt, self.cfg.scheme, self.cfg.upwind);
        let mut cols = vec![self.masses[l].clone()];
        for s in (0..k).rev() {
            prop.advance_adjoint(&mut cols, t + s as f64 * self.cfg.dt)?;
        }
        let mut v = cols.pop().unwrap();
        clamp_roundoff(&mut v);
        Ok(v)
    }

    pub fn total_mass(&self, l: usize) -> f64 {
        self.masses[l].iter().sum()
    }

    /// Per-component masses `μ_{i,t}(ℝ^d)` at lattice index `l`.
    pub fn component_mass(&self, l: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (idx, v) in self.masses[l].iter().enumerate() {
            out[idx % self.m] += v;
        }
        out
    }

    /// Smallest normalised density `μ_{i}(cell)/(μ_i(ℝ^d)·|cell|)` over the inner window.
    pub fn min_density(&self, l: usize) -> f64 {
        let tot = self.component_mass(l);
        let cell = self.dom.cell();
        let mut best = f64::INFINITY;
        for p in inner_window(&self.dom) {
            for i in 0..self.m {
                if tot[i] > 0.0 {
                    best = best.min(self.masses[l][p * self.m + i] / (tot[i] * cell));
                }
            }
        }
        best
    }

    /// CSV rows `t,i,x0[,x1],mass`.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        let coords = if self.dom.d == 1 { "x0" } else { "x0,x1" };
        writeln!(w, "t,i,{coords},mass")?;
        for (t, mass) in self.times.iter().zip(&self.masses) {
            for p in 0..self.dom.points() {
                let x = self.dom.point(p);
                let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                for i in 0..self.m {
                    writeln!(w, "{t},{i},{},{}", xs.join(","), mass[p * self.m + i])?;
                }
            }
        }
        Ok(())
    }
}

/// `Σ_i ∫ f_i dμ_i` with grid samples.
pub fn integrate(mu: &[f64], f: &[f64]) -> f64 {
    mu.iter().zip(f).map(|(a, b)| a * b).sum()
}

/// `(Σ_i ∫ |f_i|^p dμ_i)^{1/p}`.
pub fn lp_mu_norm(mu: &[f64], f: &[f64], p: f64) -> f64 {
    mu.iter().zip(f).map(|(a, b)| a * b.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `‖f‖_{L^∞(μ)}`: sup of `|f|` over cells of positive mass.
pub fn linf_mu_norm(mu: &[f64], f: &[f64]) -> f64 {
    mu.iter().zip(f).filter(|(a, _)| **a > 0.0).map(|(_, b)| b.abs()).fold(0.0, f64::max)
}

fn evolve_fields(model: &dyn CoefficientModel, ms: &MeasureSystem, fs: &[StateField], s: f64, t: f64) -> Result<Vec<StateField>> {
    if !(s < t) {
        return Err(Error::Invalid(format!("need s < t, got s = {s}, t = {t}")));
    }
    for f in fs {
        if f.dom != ms.dom || f.m != ms.m {
            return Err(Error::Dimension("test function does not match the measure grid".into()));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: s });
        }
    }
    let cfg = EvolveConfig::new(s, t, ms.cfg.dt, ms.cfg.scheme);
    let recs = evolve_many(model, &ms.dom, &cfg, fs.iter().map(|f| f.values.clone()).collect(), ms.cfg.upwind)?;
    Ok(recs.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

/// `|Σ_i ∫ (G(t,s)f)_i dμ_{i,t} − Σ_i ∫ f_i dμ_{i,s}|`.
pub fn invariance_residual(ms: &MeasureSystem, model: &dyn CoefficientModel, f: &StateField, s: f64, t: f64) -> Result<f64> {
    let u = evolve_fields(model, ms, std::slice::from_ref(f), s, t)?.pop().unwrap();
    let (mu_s, mu_t) = (ms.measure_at(model, s)?, ms.measure_at(model, t)?);
    Ok((integrate(&mu_t, &u.values) - integrate(&mu_s, &f.values)).abs())
}

/// `(2e^{K(t−s)})^{(p−1)/p}`.
pub fn lp_mu_growth_bound(p: f64, k: f64, elapsed: f64) -> f64 {
    (2.0 * (k * elapsed).exp()).powf((p - 1.0) / p)
}

/// `max_f ‖G(t,s)f‖_{L^p(μ_t)} / ‖f‖_{L^p(μ_s)}` against `(2e^{K(t−s)})^{(p−1)/p}`.
pub fn check_lp_mu_bound(
    ms: &MeasureSystem,
    model: &dyn CoefficientModel,
    p: f64,
    fs: &[StateField],
    s: f64,
    t: f64,
    k: f64,
) -> Result<PropertyVerdict> {
    if !(p >= 1.0) {
        return Err(Error::Invalid(format!("need p >= 1, got {p}")));
    }
    let (mu_s, mu_t) = (ms.measure_at(model, s)?, ms.measure_at(model, t)?);
    let us = evolve_fields(model, ms, fs, s, t)?;
    let mut worst = 0.0f64;
    let mut at = 0;
    for (i, (f, u)) in fs.iter().zip(&us).enumerate() {
        let den = lp_mu_norm(&mu_s, &f.values, p);
        if den == 0.0 {
            return Err(Error::Invalid(format!("test function {i} has zero L^p(μ_s) norm")));
        }
        let q = lp_mu_norm(&mu_t, &u.values, p) / den;
        if q > worst {
            worst = q;
            at = i;
        }
    }
    Ok(PropertyVerdict::at_most("lp_mu_growth_bound", worst, lp_mu_growth_bound(p, k, t - s), 5e-2, TolKind::Relative)
        .with_witness(Witness::indices(&[at], worst))
        .with_extra("p", p)
        .with_extra("K", k))
}

/// Disjoint cells (lists of grid points) covering the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub cells: Vec<Vec<usize>>,
}

impl Partition {
    /// `per_axis` equal slabs along every axis.
    pub fn uniform(dom: &DiscreteDomain, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(Error::Invalid("partition needs at least one cell per axis".into()));
        }
        let per_axis = per_axis.min(dom.n);
        let slab = |i: usize| (i * per_axis / dom.n).min(per_axis - 1);
        let count = per_axis.pow(dom.d as u32);
        let mut cells = vec![Vec::new(); count];
        for p in 0..dom.points() {
            let mi = dom.multi(p);
            let c = if dom.d == 1 { slab(mi[0]) } else { slab(mi[0]) + per_axis * slab(mi[1]) };
            cells[c].push(p);
        }
        Ok(Partition { cells })
    }

    pub fn validate(&self, points: usize) -> Result<()> {
        let mut seen = vec![false; points];
        for p in self.cells.iter().flatten() {
            if *p >= points || std::mem::replace(&mut seen[*p], true) {
                return Err(Error::Invalid(format!("partition cells overlap or leave the grid at point {p}")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Invalid("partition does not cover the grid".into()));
        }
        Ok(())
    }
}

/// `(P f)_ℓ = Σ_A μ_ℓ(A)⁻¹ ∫_A f_ℓ dμ_ℓ · χ_A`.
pub fn finite_rank_projection(mu: &[f64], partition: &Partition, f: &StateField) -> Result<StateField> {
    let m = f.m;
    partition.validate(f.dom.points())?;
    let mut out = vec![0.0; f.values.len()];
    for (ci, cell) in partition.cells.iter().enumerate() {
        for l in 0..m {
            let mass: f64 = cell.iter().map(|&p| mu[p * m + l]).sum();
            if !(mass > 0.0) {
                return Err(Error::Invalid(format!("partition cell {ci} has zero μ-mass in component {l}")));
            }
            let avg = cell.iter().map(|&p| mu[p * m + l] * f.values[p * m + l]).sum::<f64>() / mass;
            for &p in cell {
                out[p * m + l] = avg;
            }
        }
    }
    StateField::new(f.dom, m, f.t, out)
}

/// Coarsest uniform partition (doubling from one cell) with
/// `‖P g − g‖_{L^∞(μ)} ≤ ε` for every `g`: an ε-net of the images.
pub fn partition_for(mu: &[f64], gs: &[StateField], eps: f64) -> Result<Partition> {
    let dom = gs.first().ok_or_else(|| Error::Invalid("no fields".into()))?.dom;
    let mut per_axis = 1;
    loop {
        let part = Partition::uniform(&dom, per_axis)?;
        let ok = match gs.iter().map(|g| finite_rank_projection(mu, &part, g)).collect::<Result<Vec<_>>>() {
            Ok(ps) => ps.iter().zip(gs).all(|(pg, g)| {
                let diff: Vec<f64> = pg.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
                linf_mu_norm(mu, &diff) <= eps
            }),
            Err(_) => false,
        };
        if ok {
            return Ok(part);
        }
        if per_axis >= dom.n {
            return Err(Error::Invalid(format!("no uniform partition reaches ε = {eps}")));
        }
        per_axis *= 2;
    }
}

/// `‖P G(t,s) − G(t,s)‖` on the sampled `fs` in `L^p(μ_s) → L^p(μ_t)` against `2ε^{1−1/p}`.
pub fn check_projection_bound(
    ms: &MeasureSystem,
    model: &dyn CoefficientModel,
    fs: &[StateField],
    s: f64,
    t: f64,
    eps: f64,
    p: f64,
) -> Result<PropertyVerdict> {
    let (mu_s, mu_t) = (ms.measure_at(model, s)?, ms.measure_at(model, t)?);
    let gs = evolve_fields(model, ms, fs, s, t)?;
    let part = partition_for(&mu_t, &gs, eps)?;
    let mut worst = 0.0f64;
    for (f, g) in fs.iter().zip(&gs) {
        let pg = finite_rank_projection(&mu_t, &part, g)?;
        let diff: Vec<f64> = pg.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
        let den = lp_mu_norm(&mu_s, &f.values, p);
        if den > 0.0 {
            worst = worst.max(lp_mu_norm(&mu_t, &diff, p) / den);
        }
    }
    Ok(PropertyVerdict::at_most("projection_bound", worst, 2.0 * eps.powf(1.0 - 1.0 / p), 5e-2, TolKind::Absolute)
        .with_extra("eps", eps)
        .with_extra("p", p)
        .with_extra("cells", part.cells.len() as f64))
}

/// Sampled check of `(𝒜_j + c_jj) g ≥ 0`, the certificate that rules out a
/// trivial Cesàro limit.
pub fn check_nontriviality(model: &dyn CoefficientModel, g: &Profile, j: usize, samples: &Samples) -> Result<Verdict> {
    let m = model.components();
    if j >= m {
        return Err(Error::Dimension(format!("component {j} out of range")));
    }
    let mut c = vec![0.0; m * m];
    let mut worst = f64::INFINITY;
    let mut at = None;
    for (t, x) in samples.pairs() {
        if !(g.value(x) > 0.0) {
            return Err(Error::Invalid(format!("g must be positive, fails at x = {x:?}")));
        }
        model.coupling(t, x, &mut c);
        let v = eval_scalar_part(model, j, g, t, x) + c[j * m + j] * g.value(x);
        if v < worst {
            worst = v;
            at = Some(Witness::at(t, x, &[j], v));
        }
    }
    let ok = worst >= -1e-12;
    let status = if ok { Status::SampledPass } else { Status::Refuted };
    let mut v = Verdict::new(status, Some(worst), "(A_j + c_jj) g >= 0 on samples");
    v.witnesses.extend(at);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{AffineModel, CouplingGrowth};
    use crate::discretization::build_grid;

    fn ou_system(r: f64) -> (AffineModel, MeasureSystem) {
        let ou = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let dom = build_grid(1, 5.0, 101, Boundary::Neumann).unwrap();
        let ms = cesaro_measures(&ou, &dom, &[0.0], 0, 2, r, &MeasureConfig::new(0.05)).unwrap();
        (ou, ms)
    }

    #[test]
    fn zero_row_sum_conserves_mass() {
        let c = vec![vec![-1.0, 1.0], vec![2.0, -2.0]];
        let model = AffineModel::new(1, 2, 1.0, 1.0).with_coupling(c, CouplingGrowth::Constant);
        let dom = build_grid(1, 4.0, 61, Boundary::Neumann).unwrap();
        let ms = cesaro_measures(&model, &dom, &[0.5], 1, 1, 6.0, &MeasureConfig::new(0.05)).unwrap();
        for l in 0..ms.times.len() {
            assert!((ms.total_mass(l) - 1.0).abs() < 1e-8, "{}", ms.total_mass(l));
            assert!(ms.masses[l].iter().all(|v| *v >= 0.0));
        }
        let one = StateField::from_fn(dom, 2, 0.0, |_, _| 1.0).unwrap();
        assert!(invariance_residual(&ms, &model, &one, 0.0, 1.0).unwrap() < 1e-8);
    }

    #[test]
    fn ou_mean_and_variance() {
        let (_, ms) = ou_system(24.0);
        let mu = &ms.masses[0];
        let mean = (0..ms.dom.points()).map(|p| mu[p] * ms.dom.point(p)[0]).sum::<f64>();
        let var = (0..ms.dom.points()).map(|p| mu[p] * ms.dom.point(p)[0].powi(2)).sum::<f64>();
        assert!(mean.abs() < 1e-8);
        // Tr(qD²) − γx·∇ has invariant variance q/γ = 1; averaging the transient
        // variance 1 − e^{−2τ} over [0, r] gives 1 − (1 − e^{−2r})/(2r)
        assert!((var - (1.0 - 1.0 / 48.0)).abs() < 2e-3, "{var}");
        assert!(ms.min_density(0) > 1e-8);
    }

    #[test]
    fn extension_matches_invariance_exactly() {
        let (ou, ms) = ou_system(12.0);
        let f = StateField::from_fn(ms.dom, 1, 0.5, |_, x| x[0].sin() + 0.3).unwrap();
        // μ_{0.5} is the backward extension of μ_1, so the identity holds to solver precision
        assert!(invariance_residual(&ms, &ou, &f, 0.5, 1.0).unwrap() < 1e-9);
    }

    #[test]
    fn projection_trivial_cases() {
        let (_, ms) = ou_system(8.0);
        let f = StateField::from_fn(ms.dom, 1, 0.0, |_, x| x[0].cos()).unwrap();
        let one = Partition::uniform(&ms.dom, 1).unwrap();
        let pf = finite_rank_projection(&ms.masses[0], &one, &f).unwrap();
        let avg = integrate(&ms.masses[0], &f.values) / ms.total_mass(0);
        assert!(pf.values.iter().all(|v| (v - avg).abs() < 1e-12));
        let four = Partition::uniform(&ms.dom, 4).unwrap();
        let step = finite_rank_projection(&ms.masses[0], &four, &pf).unwrap();
        assert!(step.values.iter().zip(&pf.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn lp_mu_bound_at_p_one_is_a_contraction() {
        assert_eq!(lp_mu_growth_bound(1.0, 3.0, 2.0), 1.0);
        assert!((lp_mu_growth_bound(2.0, 0.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn odd_window_is_rejected() {
        let ou = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let dom = build_grid(1, 5.0, 41, Boundary::Neumann).unwrap();
        assert!(cesaro_measures(&ou, &dom, &[0.0], 0, 1, 1.1, &MeasureConfig::new(0.05)).is_err());
        assert!(cesaro_measures(&ou, &dom, &[0.0], 0, 1, 3.05, &MeasureConfig::new(0.05)).is_err());
    }
}
