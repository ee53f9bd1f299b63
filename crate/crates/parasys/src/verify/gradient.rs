//! Uniform gradient bound: the constants `σ_{k,J}` of the coefficient
//! conditions, the Gronwall constant `c̃`, and the two-grid measurement.

use serde::{Deserialize, Serialize};

use super::{PropertyVerdict, TolKind};
use crate::coefficients::{check_power_law_conditions, min_eigenvalue, max_sym_eigenvalue, CoefficientModel, Profile, Samples, ScalarField, Witness};
use crate::discretization::{build_grid, DiscreteDomain, StateField};
use crate::error::{Error, Result};
use crate::kernels::inner_window;
use crate::solver::{evolve, EvolveConfig};

/// Free parameters of the Gronwall chain. `alpha = None` picks
/// `d²c²/4 + 1`, so the diffusion term contributes `-μ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientOptions {
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub omega0: f64,
    #[serde(default = "one")]
    pub omega1: f64,
    /// User-certified `σ_{k,J}`, used instead of the sampled supremum.
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl Default for GradientOptions {
    fn default() -> Self {
        GradientOptions { alpha: None, gamma: 1.0, omega0: 1.0, omega1: 1.0, sigma: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientConstants {
    /// `sup |∇q_ij^k| / μ_k`
    pub c: f64,
    pub alpha: f64,
    pub sigma: Vec<f64>,
    pub c0: f64,
    pub c1: f64,
}

impl GradientConstants {
    /// `sup_{t∈(s,T)} |J_x u|_F ≤ sqrt(A e^{B(T-s)})` with
    /// `A = e^{c₀⁺τ}(mα‖f‖² + ‖Jf‖² + m² c₁ τ e^{2Kτ}‖f‖²)`, `B = e^{c₀⁺τ} m² c₁`.
    pub fn bound(&self, m: usize, k: f64, tau: f64, f_sup: f64, jf_sup: f64) -> f64 {
        let m = m as f64;
        let g = (self.c0.max(0.0) * tau).exp();
        let a = g * (m * self.alpha * f_sup * f_sup + jf_sup * jf_sup + m * m * self.c1 * tau * (2.0 * k * tau).exp() * f_sup * f_sup);
        let b = g * m * m * self.c1;
        (a * (b * tau).exp()).sqrt()
    }
}

fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// Per-sample ingredients `(μ_k, max_ij |∇q_ij^k|, r_k, c_kk, ρ0, ρ1)`.
fn local_terms(model: &dyn CoefficientModel, k: usize, t: f64, x: &[f64]) -> (f64, f64, f64, f64, f64, f64) {
    let (d, m) = (model.dim(), model.components());
    let mut q = vec![0.0; d * d];
    model.diffusion(k, t, x, &mut q);
    let mu = min_eigenvalue(&q, d);
    let mut c = vec![0.0; m * m];
    model.coupling(t, x, &mut c);
    let ckk = c[k * m + k];
    let rho0 = (0..m).filter(|&h| h != k).map(|h| c[h * m + k].abs()).fold(0.0, f64::max);

    let mut y = x.to_vec();
    let mut dq = vec![0.0; d * d * d];
    let mut jb = vec![0.0; d * d];
    let mut dc = vec![0.0; m * m * d];
    let (mut qp, mut qm) = (vec![0.0; d * d], vec![0.0; d * d]);
    let (mut bp, mut bm) = (vec![0.0; d], vec![0.0; d]);
    let (mut cp, mut cm) = (vec![0.0; m * m], vec![0.0; m * m]);
    for l in 0..d {
        let h = step(x[l]);
        y[l] = x[l] + h;
        model.diffusion(k, t, &y, &mut qp);
        model.drift(k, t, &y, &mut bp);
        model.coupling(t, &y, &mut cp);
        y[l] = x[l] - h;
        model.diffusion(k, t, &y, &mut qm);
        model.drift(k, t, &y, &mut bm);
        model.coupling(t, &y, &mut cm);
        y[l] = x[l];
        for e in 0..d * d {
            dq[e * d + l] = (qp[e] - qm[e]) / (2.0 * h);
        }
        for i in 0..d {
            jb[i * d + l] = (bp[i] - bm[i]) / (2.0 * h);
        }
        for e in 0..m * m {
            dc[e * d + l] = (cp[e] - cm[e]) / (2.0 * h);
        }
    }
    let grad_norm = |v: &[f64], e: usize| v[e * d..(e + 1) * d].iter().map(|a| a * a).sum::<f64>().sqrt();
    let dqmax = (0..d * d).map(|e| grad_norm(&dq, e)).fold(0.0, f64::max);
    let rho1 = (0..m * m).map(|e| grad_norm(&dc, e)).fold(0.0, f64::max);
    let r = max_sym_eigenvalue(&jb, d);
    (mu, dqmax, r, ckk, rho0, rho1)
}

/// `σ_{k,J}`, `c₀ = max_k σ_{k,J}` and `c₁ = (ω₀² ∨ ω₁²)/(4γ)` from the
/// samples (whose times span J). Power-law models need the exponent
/// certificate; other models are refused when a `σ` integrand grows along a
/// sample ray, unless `σ` is supplied.
pub fn gradient_constants(model: &dyn CoefficientModel, samples: &Samples, opts: &GradientOptions) -> Result<GradientConstants> {
    let (d, m) = (model.dim() as f64, model.components());
    if !(opts.gamma > 0.0 && opts.omega0 > 0.0 && opts.omega1 > 0.0) {
        return Err(Error::Invalid("γ, ω₀, ω₁ must be positive".into()));
    }
    let certified = match model.as_polynomial() {
        Some(p) => {
            if !check_power_law_conditions(p.spec()).passed("gradient_growth") {
                return Err(Error::MissingCertificate("the exponent condition for gradient bounds fails".into()));
            }
            true
        }
        None => opts.sigma.is_some(),
    };
    let np = samples.points.len();
    let mut terms = Vec::with_capacity(samples.times.len() * np * m);
    let mut c = 0.0f64;
    for (t, x) in samples.pairs() {
        for k in 0..m {
            let tr = local_terms(model, k, t, x);
            if !(tr.0 > 0.0) {
                return Err(Error::Invalid(format!("diffusion of component {k} is not elliptic at x = {x:?}")));
            }
            c = c.max(tr.1 / tr.0);
            terms.push(tr);
        }
    }
    let alpha = opts.alpha.unwrap_or(d * d * c * c / 4.0 + 1.0);
    let integrand = |tr: &(f64, f64, f64, f64, f64, f64)| {
        (d * d * c * c / 4.0 - alpha) * tr.0 + tr.2 + tr.3 + opts.gamma * (opts.omega0 * tr.4 * tr.4 + opts.omega1 * tr.5 * tr.5)
    };
    let sigma = match &opts.sigma {
        Some(s) if s.len() == m => s.clone(),
        Some(_) => return Err(Error::Dimension(format!("need {m} values of σ"))),
        None => {
            let mut sigma = vec![f64::NEG_INFINITY; m];
            for (ti, _) in samples.times.iter().enumerate() {
                let at = |pi: usize, k: usize| integrand(&terms[(ti * np + pi) * m + k]);
                for k in 0..m {
                    for pi in 0..np {
                        sigma[k] = sigma[k].max(at(pi, k));
                    }
                    if certified {
                        continue;
                    }
                    for ray in &samples.rays {
                        let v: Vec<f64> = ray.iter().map(|&pi| at(pi, k)).collect();
                        let grows = v.windows(2).all(|w| w[1] > w[0] + 1e-9 * (1.0 + w[0].abs()));
                        if grows && v[v.len() - 1] > 0.0 {
                            return Err(Error::MissingCertificate(format!(
                                "σ integrand of component {k} grows along a ray (value {}); supply σ",
                                v[v.len() - 1]
                            )));
                        }
                    }
                }
            }
            sigma
        }
    };
    let c0 = sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c1 = opts.omega0.powi(2).max(opts.omega1.powi(2)) / (4.0 * opts.gamma);
    Ok(GradientConstants { c, alpha, sigma, c0, c1 })
}

/// `max |J u|_F` over the inner window, central differences.
pub fn sup_gradient(u: &StateField) -> f64 {
    let dom = &u.dom;
    let mut best = 0.0f64;
    for p in inner_window(dom) {
        let mi = dom.multi(p);
        let mut s = 0.0;
        for axis in 0..dom.d {
            let mut lo = mi;
            let mut hi = mi;
            lo[axis] -= 1;
            hi[axis] += 1;
            let (pl, ph) = (dom.point_index(lo), dom.point_index(hi));
            for k in 0..u.m {
                let g = (u.get(k, ph) - u.get(k, pl)) / (2.0 * dom.dx);
                s += g * g;
            }
        }
        best = best.max(s.sqrt());
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub verdict: PropertyVerdict,
    pub constants: GradientConstants,
    /// `(t, coarse, fine)` sup-gradients per record time.
    pub trace: Vec<(f64, f64, f64)>,
}

/// Evolves `f` on `dom` and on the grid with `2N − 1` points per axis; passes
/// when the fine/coarse ratio of the sup-gradient is at most 1.1 and the
/// measurement stays below the Gronwall bound.
pub fn check_gradient_bound(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    cfg: &EvolveConfig,
    f: &[Profile],
    samples: &Samples,
    k_sup: f64,
    opts: &GradientOptions,
    upwind: bool,
) -> Result<GradientReport> {
    let m = model.components();
    if f.len() != m {
        return Err(Error::Dimension(format!("need {m} initial profiles")));
    }
    let consts = gradient_constants(model, samples, opts)?;
    let fine_dom = build_grid(dom.d, dom.l, 2 * dom.n - 1, dom.bc)?;
    let run = |g: &DiscreteDomain| -> Result<Vec<StateField>> {
        let u0 = StateField::from_fn(*g, m, cfg.s, |k, x| f[k].value(x))?;
        evolve(model, g, cfg, &u0, upwind)
    };
    let coarse = run(dom)?;
    let fine = run(&fine_dom)?;
    let (mut f_sup, mut jf_sup) = (0.0f64, 0.0f64);
    let mut g = vec![0.0; dom.d];
    for p in 0..fine_dom.points() {
        let x = fine_dom.point(p);
        let (mut v2, mut j2) = (0.0, 0.0);
        for fk in f {
            v2 += fk.value(&x).powi(2);
            fk.gradient(&x, &mut g);
            j2 += g.iter().map(|a| a * a).sum::<f64>();
        }
        f_sup = f_sup.max(v2.sqrt());
        jf_sup = jf_sup.max(j2.sqrt());
    }
    let trace: Vec<(f64, f64, f64)> = coarse.iter().zip(&fine).map(|(a, b)| (a.t, sup_gradient(a), sup_gradient(b))).collect();
    let (mut measured, mut at) = (0.0f64, cfg.s);
    for &(t, _, b) in &trace {
        if b > measured {
            measured = b;
            at = t;
        }
    }
    let coarse_max = trace.iter().map(|r| r.1).fold(0.0, f64::max);
    // gradients at solver-tolerance level carry no refinement signal
    let floor = 1e-7 * (f_sup + jf_sup).max(f64::MIN_POSITIVE);
    let ratio = measured.max(floor) / coarse_max.max(floor);
    let tau = cfg.t_end - cfg.s;
    let bound = consts.bound(m, k_sup, tau, f_sup, jf_sup);
    let mut verdict = PropertyVerdict::at_most("gradient_bound", measured, bound, 1e-2, TolKind::Relative)
        .with_witness(Witness { t: Some(at), x: None, indices: vec![], value: measured })
        .with_extra("two_grid_ratio", ratio)
        .with_extra("c0", consts.c0)
        .with_extra("c1", consts.c1);
    verdict.pass &= ratio <= 1.1;
    Ok(GradientReport { verdict, constants: consts, trace })
}
