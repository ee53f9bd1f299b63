//! Executable versions of the a-priori estimates for `G(t,s)`: each check
//! measures a quantity on solver output and compares it with a bound whose
//! constants are computed from the model.

mod gradient;
mod ode;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coefficients::{
    eval_operator, max_sym_eigenvalue, CoefficientModel, HypothesisReport, Profile, Samples, ScalarField, ScalarPart, Witness,
};
use crate::discretization::{build_grid, Boundary, DiscreteDomain, StateField};
use crate::error::{Error, Result};
use crate::kernels::{inner_window, smooth_indicator, Region};
use crate::solver::{evolve, EvolveConfig, KBar};

pub use gradient::{check_gradient_bound, gradient_constants, sup_gradient, GradientConstants, GradientOptions, GradientReport};
pub use ode::{ode_comparison_envelope, ODE_RTOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// pass ⇔ measured ≤ bound (within tolerance)
    AtMost,
    /// pass ⇔ measured > bound
    Above,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TolKind {
    Relative,
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: String,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub tol: f64,
    pub tol_kind: TolKind,
    pub sense: Sense,
    pub witnesses: Vec<Witness>,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

impl PropertyVerdict {
    /// `measured ≤ bound·(1+tol)` or `measured ≤ bound + tol`.
    pub fn at_most(property: &str, measured: f64, bound: f64, tol: f64, kind: TolKind) -> Self {
        let limit = match kind {
            TolKind::Relative => bound * (1.0 + tol),
            TolKind::Absolute => bound + tol,
        };
        PropertyVerdict {
            property: property.into(),
            pass: measured <= limit,
            measured,
            bound,
            margin: bound - measured,
            tol,
            tol_kind: kind,
            sense: Sense::AtMost,
            witnesses: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn above(property: &str, measured: f64, bound: f64) -> Self {
        PropertyVerdict {
            property: property.into(),
            pass: measured > bound,
            measured,
            bound,
            margin: measured - bound,
            tol: 0.0,
            tol_kind: TolKind::Absolute,
            sense: Sense::Above,
            witnesses: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witnesses.push(w);
        self
    }

    pub fn with_extra(mut self, key: &str, v: f64) -> Self {
        self.extra.insert(key.into(), v);
        self
    }

    /// One JSON object per line.
    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("verdicts serialise")
    }
}

fn require(report: &HypothesisReport, keys: &[&str], what: &str) -> Result<()> {
    let missing = report.failures(keys.iter().copied());
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingCertificate(format!("{what} needs passing certificates for {}", missing.join(", "))))
    }
}

/// Largest value on the trajectory; requires nonnegative off-diagonal
/// coupling and nonpositive row sums.
pub fn check_max_principle(records: &[StateField], report: &HypothesisReport) -> Result<PropertyVerdict> {
    require(report, &["coupling_offdiag_nonnegative", "row_sums_nonpositive"], "the maximum principle")?;
    let mut best = f64::NEG_INFINITY;
    let mut at = None;
    for r in records {
        for p in 0..r.dom.points() {
            for k in 0..r.m {
                let v = r.get(k, p);
                if v > best {
                    best = v;
                    at = Some(Witness::at(r.t, &r.dom.point(p), &[k], v));
                }
            }
        }
    }
    let mut v = PropertyVerdict::at_most("max_principle", best, 0.0, 1e-8, TolKind::Absolute);
    v.witnesses.extend(at);
    Ok(v)
}

/// `max_t ‖u(t)‖∞ e^{-K(t-s)} / ‖f‖∞`. With the contraction certificate the
/// componentwise max norm and `K = 0` are used; otherwise pointwise Euclidean
/// norms and `K = ‖C̄‖₂`.
pub fn check_sup_estimate(records: &[StateField], f: &StateField, kbar: &KBar) -> Result<PropertyVerdict> {
    let (norm, rate): (fn(&StateField) -> f64, f64) =
        if kbar.contractive { (StateField::sup_norm, 0.0) } else { (StateField::sup_euclidean, kbar.k) };
    let f0 = norm(f);
    if f0 == 0.0 {
        return Err(Error::Invalid("sup estimate needs nonzero initial data".into()));
    }
    let mut worst = 0.0f64;
    let mut at = f.t;
    for r in records {
        let q = norm(r) * (-rate * (r.t - f.t)).exp() / f0;
        if q > worst {
            worst = q;
            at = r.t;
        }
    }
    Ok(PropertyVerdict::at_most("sup_estimate", worst, 1.0, 5e-3, TolKind::Relative)
        .with_witness(Witness { t: Some(at), x: None, indices: vec![], value: worst })
        .with_extra("K", rate)
        .with_extra("spectral_K", kbar.k))
}

/// `G(t,s)(φ𝟙) ≤ φ + a/c` on a Dirichlet box.
pub fn check_lyapunov_bound(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    cfg: &EvolveConfig,
    phi: &dyn ScalarField,
    report: &HypothesisReport,
    upwind: bool,
) -> Result<PropertyVerdict> {
    require(report, &["lyapunov_dissipative"], "the Lyapunov bound")?;
    let (a, c) = match (report.constants.a, report.constants.c) {
        (Some(a), Some(c)) if c > 0.0 => (a, c),
        _ => return Err(Error::MissingCertificate("dissipative constants (a, c) are missing".into())),
    };
    let dom = build_grid(dom.d, dom.l, dom.n, Boundary::Dirichlet)?;
    let m = model.components();
    let f = StateField::from_fn(dom, m, cfg.s, |_, x| phi.value(x))?;
    let recs = evolve(model, &dom, cfg, &f, upwind)?;
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for r in &recs {
        for p in 0..dom.points() {
            let x = dom.point(p);
            let ph = phi.value(&x);
            for k in 0..m {
                let v = r.get(k, p) - ph - a / c;
                if v > worst {
                    worst = v;
                    at = Some(Witness::at(r.t, &x, &[k], v));
                }
            }
        }
    }
    let mut v = PropertyVerdict::at_most("lyapunov_bound", worst, 0.0, 1e-3 * a / c, TolKind::Absolute)
        .with_extra("a", a)
        .with_extra("c", c);
    v.witnesses.extend(at);
    Ok(v)
}

/// `c₀ = min (G(t,s)𝟙)_k` over the records and the inner window, plus the
/// comparison `(G𝟙)_k ≥ G_k 1` with the scalar parts `𝒜_k + c_kk`.
pub fn check_lower_bound_c0(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    cfg: &EvolveConfig,
    report: &HypothesisReport,
    upwind: bool,
) -> Result<PropertyVerdict> {
    require(report, &["compactness_lower_weight"], "the lower bound c0")?;
    let m = model.components();
    let one = StateField::from_fn(*dom, m, cfg.s, |_, _| 1.0)?;
    let recs = evolve(model, dom, cfg, &one, upwind)?;
    let window = inner_window(dom);
    let mut c0 = f64::INFINITY;
    let mut at = None;
    for r in &recs {
        for &p in &window {
            for k in 0..m {
                if r.get(k, p) < c0 {
                    c0 = r.get(k, p);
                    at = Some(Witness::at(r.t, &dom.point(p), &[k], c0));
                }
            }
        }
    }
    let mut gap = f64::INFINITY;
    for k in 0..m {
        let part = ScalarPart::new(model, k);
        let one_k = StateField::from_fn(*dom, 1, cfg.s, |_, _| 1.0)?;
        let scalar = evolve(&part, dom, cfg, &one_k, upwind)?;
        for (r, q) in recs.iter().zip(&scalar) {
            for &p in &window {
                gap = gap.min(r.get(k, p) - q.get(0, p));
            }
        }
    }
    let mut v = PropertyVerdict::above("lower_bound_c0", c0, 0.0).with_extra("c0", c0).with_extra("scalar_comparison_gap", gap);
    v.witnesses.extend(at);
    Ok(v)
}

/// Pointwise envelope `(G(s+δ,s)φ𝟙)_i(x) ≤ y(δ; φ(x))` from
/// `y' = -c₀ h(y)`, measured as the worst ratio over the inner window.
pub fn check_ode_envelope(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    cfg: &EvolveConfig,
    phi: &dyn ScalarField,
    h: &[crate::coefficients::PowerLaw],
    c0: f64,
    upwind: bool,
) -> Result<PropertyVerdict> {
    let m = model.components();
    if h.len() != m {
        return Err(Error::Dimension(format!("need {m} decay profiles")));
    }
    let f = StateField::from_fn(*dom, m, cfg.s, |_, x| phi.value(x))?;
    let recs = evolve(model, dom, cfg, &f, upwind)?;
    let window = inner_window(dom);
    let mut worst = 0.0f64;
    let mut at = None;
    for r in &recs {
        let delta = r.t - cfg.s;
        if delta <= 0.0 {
            continue;
        }
        for &p in &window {
            let x = dom.point(p);
            let y0 = phi.value(&x);
            for (k, hk) in h.iter().enumerate() {
                let y = ode_comparison_envelope(&|v| hk.eval(v), c0, y0, delta)?;
                let q = r.get(k, p) / y;
                if q > worst {
                    worst = q;
                    at = Some(Witness::at(r.t, &x, &[k], q));
                }
            }
        }
    }
    let mut v = PropertyVerdict::at_most("ode_envelope", worst, 1.0, 5e-2, TolKind::Relative).with_extra("c0", c0);
    v.witnesses.extend(at);
    Ok(v)
}

/// `Γ = sup (2κ_C − min_k div γ^k)` over the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub witness: Witness,
    /// Exact exponent certificate of finiteness (power-law models).
    pub certified: bool,
}

/// Upper bound of the quadratic form of `C(t,x)`: the power-law recipe when
/// its sign pattern holds, otherwise `λ_max((C + Cᵀ)/2)`.
pub fn kappa_c(model: &dyn CoefficientModel, t: f64, x: &[f64]) -> f64 {
    if let Some(p) = model.as_polynomial() {
        let rep = crate::coefficients::check_power_law_conditions(p.spec());
        if rep.passed("coupling_sign_pattern") {
            return p.kappa_c_recipe(t, x);
        }
    }
    let m = model.components();
    let mut c = vec![0.0; m * m];
    model.coupling(t, x, &mut c);
    max_sym_eigenvalue(&c, m)
}

/// `γ^k_i = b^k_i − Σ_j D_j q^k_ij`; exact for power-law models, central
/// differences otherwise.
pub fn gamma_field(model: &dyn CoefficientModel, k: usize, t: f64, x: &[f64]) -> Vec<f64> {
    let d = model.dim();
    let mut out = vec![0.0; d];
    if let Some(p) = model.as_polynomial() {
        p.gamma_field(k, t, x, &mut out);
        return out;
    }
    model.drift(k, t, x, &mut out);
    let mut q = vec![0.0; d * d];
    let mut y = x.to_vec();
    for j in 0..d {
        let h = 1e-5 * (1.0 + x[j].abs());
        y[j] = x[j] + h;
        model.diffusion(k, t, &y, &mut q);
        let plus: Vec<f64> = (0..d).map(|i| q[i * d + j]).collect();
        y[j] = x[j] - h;
        model.diffusion(k, t, &y, &mut q);
        for i in 0..d {
            out[i] -= (plus[i] - q[i * d + j]) / (2.0 * h);
        }
        y[j] = x[j];
    }
    out
}

/// `div_x γ^k`; exact for power-law models, nested central differences otherwise.
pub fn div_gamma(model: &dyn CoefficientModel, k: usize, t: f64, x: &[f64]) -> f64 {
    if let Some(p) = model.as_polynomial() {
        return p.div_gamma(k, t, x);
    }
    let mut y = x.to_vec();
    let mut s = 0.0;
    for i in 0..x.len() {
        let h = 1e-4 * (1.0 + x[i].abs());
        y[i] = x[i] + h;
        let gp = gamma_field(model, k, t, &y)[i];
        y[i] = x[i] - h;
        let gm = gamma_field(model, k, t, &y)[i];
        y[i] = x[i];
        s += (gp - gm) / (2.0 * h);
    }
    s
}

pub fn compute_gamma(model: &dyn CoefficientModel, interval: [f64; 2], samples: &Samples) -> Result<GammaReport> {
    let m = model.components();
    let times: Vec<f64> = samples.times.iter().copied().filter(|t| *t >= interval[0] && *t <= interval[1]).collect();
    if times.is_empty() {
        return Err(Error::Invalid(format!("no sample times inside [{}, {}]", interval[0], interval[1])));
    }
    let mut best = f64::NEG_INFINITY;
    let mut witness = Witness::indices(&[], 0.0);
    let certified = model
        .as_polynomial()
        .is_some_and(|p| crate::coefficients::check_power_law_conditions(p.spec()).passed("lp_invariance"));
    for &t in &times {
        let vals: Vec<f64> = samples
            .points
            .iter()
            .map(|x| {
                let min_div = (0..m).map(|k| div_gamma(model, k, t, x)).fold(f64::INFINITY, f64::min);
                2.0 * kappa_c(model, t, x) - min_div
            })
            .collect();
        for (pi, v) in vals.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { t });
            }
            if *v > best {
                best = *v;
                witness = Witness::at(t, &samples.points[pi], &[], *v);
            }
        }
        if !certified {
            for ray in &samples.rays {
                let grows = ray.windows(2).all(|w| vals[w[1]] > vals[w[0]] + 1e-9 * (1.0 + vals[w[0]].abs()));
                let last = *ray.last().unwrap();
                if grows && vals[last] > 0.0 {
                    return Err(Error::Refused(format!(
                        "2κ_C − min_k div γ^k grows along a ray (value {} at x = {:?}, t = {t}); L^p invariance is not certified",
                        vals[last], samples.points[last]
                    )));
                }
            }
        }
    }
    Ok(GammaReport { gamma: best, witness, certified })
}

/// `‖u‖_{L^p}` with pointwise Euclidean norms and cell quadrature.
pub fn lp_norm(u: &StateField, p: f64) -> f64 {
    let cell = u.dom.cell();
    let s: f64 = u
        .values
        .chunks(u.m)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
        .sum();
    (s * cell).powf(1.0 / p)
}

/// `c_p(r) = exp([K(1 − 2/p) + Γ/p] r)`.
pub fn lp_growth_constant(p: f64, k: f64, gamma: f64, r: f64) -> f64 {
    ((k * (1.0 - 2.0 / p) + gamma / p) * r).exp()
}

/// `max_t ‖u(t)‖²_{L²} e^{-Γ(t-s)} / ‖f‖²_{L²}` on a Dirichlet box.
pub fn check_l2_estimate(records: &[StateField], f: &StateField, gamma: f64) -> Result<PropertyVerdict> {
    let f2 = lp_norm(f, 2.0).powi(2);
    if f2 == 0.0 {
        return Err(Error::Invalid("L² estimate needs nonzero initial data".into()));
    }
    let mut worst = 0.0f64;
    let mut at = f.t;
    for r in records {
        let q = lp_norm(r, 2.0).powi(2) * (-gamma * (r.t - f.t)).exp() / f2;
        if q > worst {
            worst = q;
            at = r.t;
        }
    }
    Ok(PropertyVerdict::at_most("l2_estimate", worst, 1.0, 1e-2, TolKind::Relative)
        .with_witness(Witness { t: Some(at), x: None, indices: vec![], value: worst })
        .with_extra("gamma", gamma))
}

/// `max_t ‖u(t)‖_{L^p} / (c_p(t−s)‖f‖_{L^p})`, `p ≥ 2`.
pub fn check_lp_estimate(records: &[StateField], f: &StateField, p: f64, k: f64, gamma: f64) -> Result<PropertyVerdict> {
    if !(p >= 2.0) {
        return Err(Error::Invalid(format!("the L^p growth bound needs p >= 2, got {p}")));
    }
    let fp = lp_norm(f, p);
    if fp == 0.0 {
        return Err(Error::Invalid("L^p estimate needs nonzero initial data".into()));
    }
    let mut worst = 0.0f64;
    for r in records {
        worst = worst.max(lp_norm(r, p) / (lp_growth_constant(p, k, gamma, r.t - f.t) * fp));
    }
    Ok(PropertyVerdict::at_most("lp_estimate", worst, 1.0, 1e-2, TolKind::Relative)
        .with_extra("p", p)
        .with_extra("K", k)
        .with_extra("gamma", gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum C0Mode {
    /// `λ₀v − A(t)v ≥ 0` with `v` vanishing at infinity: `C₀` is preserved.
    Preserve { v: Vec<Profile>, lambda0: f64, radius: f64 },
    /// Compact evolution with `(G𝟙)_k ≥ c₀`: `G(t,s)χ_{B_R}𝟙 ≥ c₀/2`
    /// far outside `B_R`, so `C₀` is not preserved.
    NotPreserve { radius: f64, c0: f64 },
}

/// Decay or persistence at infinity of solutions with compactly supported data.
pub fn check_c0_behavior(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    cfg: &EvolveConfig,
    mode: &C0Mode,
    samples: &Samples,
    report: &HypothesisReport,
    upwind: bool,
) -> Result<PropertyVerdict> {
    let m = model.components();
    let window = inner_window(dom);
    match mode {
        C0Mode::Preserve { v, lambda0, radius } => {
            if v.len() != m {
                return Err(Error::Dimension(format!("need {m} weight functions")));
            }
            let vs: Vec<&dyn ScalarField> = v.iter().map(|p| p as &dyn ScalarField).collect();
            for (t, x) in samples.pairs() {
                let av = eval_operator(model, &vs, t, x)?;
                for k in 0..m {
                    let vk = v[k].value(x);
                    if !(vk > 0.0) || lambda0 * vk - av[k] < -1e-10 * (1.0 + av[k].abs()) {
                        return Err(Error::Refused(format!(
                            "λ₀v − A v ≥ 0 fails for component {k} at t = {t}, x = {x:?}"
                        )));
                    }
                }
            }
            let centre = Region::Ball { center: vec![0.0; dom.d], radius: 0.5 * radius };
            let bump = smooth_indicator(dom, &centre, (4.0 / radius).ceil() as u32)?;
            let f = StateField::new(*dom, m, cfg.s, bump.iter().flat_map(|b| std::iter::repeat_n(*b, m)).collect())?;
            let fmax = f.sup_norm();
            // |f_k| ≤ ‖f‖∞ v_k / δ on B_r with δ = min_k inf_{B_r} v_k
            let ball: Vec<usize> = (0..dom.points()).filter(|&p| norm(&dom.point(p)) <= *radius).collect();
            let delta = (0..m)
                .map(|k| ball.iter().map(|&p| v[k].value(&dom.point(p))).fold(f64::INFINITY, f64::min))
                .fold(f64::INFINITY, f64::min);
            let recs = evolve(model, dom, cfg, &f, upwind)?;
            let mut worst = 0.0f64;
            let mut at = None;
            for r in &recs {
                let grow = (lambda0 * (r.t - cfg.s)).exp() * fmax / delta;
                for &p in window.iter().filter(|&&p| norm(&dom.point(p)) >= *radius) {
                    let x = dom.point(p);
                    for k in 0..m {
                        let q = r.get(k, p).abs() / (grow * v[k].value(&x));
                        if q > worst {
                            worst = q;
                            at = Some(Witness::at(r.t, &x, &[k], q));
                        }
                    }
                }
            }
            let mut out = PropertyVerdict::at_most("c0_preserve", worst, 1.0, 1e-2, TolKind::Relative).with_extra("delta", delta);
            out.witnesses.extend(at);
            Ok(out)
        }
        C0Mode::NotPreserve { radius, c0 } => {
            require(report, &["compactness_decay", "compactness_lower_weight", "compactness_integrability"], "C0 non-preservation")?;
            let ball = Region::Ball { center: vec![0.0; dom.d], radius: *radius };
            let ind = smooth_indicator(dom, &ball, (8.0 / radius).ceil() as u32)?;
            let f = StateField::new(*dom, m, cfg.s, ind.iter().flat_map(|b| std::iter::repeat_n(*b, m)).collect())?;
            let recs = evolve(model, dom, cfg, &f, upwind)?;
            let last = recs.last().ok_or_else(|| Error::Invalid("no records".into()))?;
            let mut low = f64::INFINITY;
            let mut at = None;
            for &p in &window {
                for k in 0..m {
                    if last.get(k, p) < low {
                        low = last.get(k, p);
                        at = Some(Witness::at(last.t, &dom.point(p), &[k], low));
                    }
                }
            }
            let mut out = PropertyVerdict::above("c0_not_preserved", low, 0.5 * c0).with_extra("c0", *c0);
            out.witnesses.extend(at);
            Ok(out)
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{AffineModel, CouplingGrowth, SampleBox};
    use crate::solver::{compute_kbar, Scheme};

    fn samples(d: usize, half: f64) -> Samples {
        Samples::new(&SampleBox::cube(d, half), &[0.0, 0.5, 1.0], 300, 2).unwrap()
    }

    #[test]
    fn verdict_tolerance_semantics() {
        assert!(PropertyVerdict::at_most("x", 1.004, 1.0, 5e-3, TolKind::Relative).pass);
        assert!(!PropertyVerdict::at_most("x", 1.006, 1.0, 5e-3, TolKind::Relative).pass);
        assert!(PropertyVerdict::at_most("x", 1e-9, 0.0, 1e-8, TolKind::Absolute).pass);
        assert!(!PropertyVerdict::above("x", 0.0, 0.0).pass);
        let line = PropertyVerdict::at_most("x", 0.5, 1.0, 0.0, TolKind::Relative).json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in ["property", "pass", "measured", "bound", "margin", "witnesses"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn constant_negative_data_under_neumann_heat() {
        let model = AffineModel::new(1, 2, 1.0, 0.0);
        let g = build_grid(1, 2.0, 21, Boundary::Neumann).unwrap();
        let f = StateField::from_fn(g, 2, 0.0, |_, _| -1.0).unwrap();
        let recs = evolve(&model, &g, &EvolveConfig::new(0.0, 0.5, 0.05, Scheme::ImplicitEuler), &f, false).unwrap();
        let rep = crate::coefficients::check_structural_hypotheses(&model, &samples(1, 2.0)).unwrap();
        let v = check_max_principle(&recs, &rep).unwrap();
        assert!(v.pass);
        assert!((v.margin - 1.0).abs() < 1e-10);
        assert!(check_max_principle(&recs, &HypothesisReport::default()).is_err());
    }

    #[test]
    fn unit_data_sup_ratio_is_one() {
        let model = AffineModel::new(1, 2, 1.0, 0.0);
        let g = build_grid(1, 2.0, 21, Boundary::Neumann).unwrap();
        let f = StateField::from_fn(g, 2, 0.0, |_, _| 1.0).unwrap();
        let recs = evolve(&model, &g, &EvolveConfig::new(0.0, 0.5, 0.05, Scheme::Theta), &f, false).unwrap();
        let kb = compute_kbar(&model, &samples(1, 2.0)).unwrap();
        let v = check_sup_estimate(&recs, &f, &kb).unwrap();
        assert!(v.pass && (v.measured - 1.0).abs() < 1e-12);
        assert!(check_sup_estimate(&recs, &StateField::zeros(g, 2, 0.0), &kb).is_err());
    }

    #[test]
    fn gamma_of_ou_and_heat() {
        let ou = compute_gamma(&AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0), [0.0, 1.0], &samples(1, 3.0)).unwrap();
        assert!((ou.gamma - 1.0).abs() < 1e-6, "{}", ou.gamma);
        let c = vec![vec![-2.0, 1.0], vec![1.0, -2.0]];
        let heat = AffineModel::new(1, 2, 1.0, 0.0).with_coupling(c, CouplingGrowth::Constant);
        let g = compute_gamma(&heat, [0.0, 1.0], &samples(1, 3.0)).unwrap();
        assert!((g.gamma - 2.0 * -1.0).abs() < 1e-6);
    }

    #[test]
    fn growing_gamma_is_refused() {
        // κ_C grows like |x| for this coupling
        let c = vec![vec![-1.0, 3.0], vec![3.0, -1.0]];
        let model = AffineModel::new(1, 2, 1.0, 0.0).with_coupling(c, CouplingGrowth::AbsPlusOne);
        assert!(matches!(compute_gamma(&model, [0.0, 1.0], &samples(1, 5.0)), Err(Error::Refused(_))));
    }

    #[test]
    fn lp_constant_reduces_to_l2() {
        assert!((lp_growth_constant(2.0, 3.0, 1.0, 1.0) - 0.5f64.exp()).abs() < 1e-15);
        assert!((lp_growth_constant(4.0, 1.0, 1.0, 2.0) - (2.0f64 * (0.5 + 0.25)).exp()).abs() < 1e-12);
    }
}
