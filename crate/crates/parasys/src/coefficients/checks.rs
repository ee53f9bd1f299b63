//! Sampled and exact checks of the structural, Lyapunov and compactness
//! hypotheses on a coefficient model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::{eval_on_diagonal, eval_scalar_part, CoefficientModel};
use super::polynomial::{Exponent, PolynomialModel};
use super::profile::{Profile, ScalarField};
use super::report::{Constants, HypothesisReport, Status, Verdict, Witness};
use super::sampling::Samples;
use super::exponents;
use super::timefn::{Decision, TimeFn};
use crate::error::{Error, Result};

/// Max |c_jk| below which a sampled coupling entry counts as identically zero.
pub const VANISHING: f64 = 1e-14;

/// Smallest eigenvalue of a symmetric d×d row-major matrix.
pub(crate) fn min_eigenvalue(q: &[f64], d: usize) -> f64 {
    if d == 1 {
        return q[0];
    }
    let m = DMatrix::from_row_slice(d, d, q);
    m.symmetric_eigen().eigenvalues.min()
}

/// Largest eigenvalue of the symmetric part of a square row-major matrix.
pub(crate) fn max_sym_eigenvalue(a: &[f64], n: usize) -> f64 {
    if n == 1 {
        return a[0];
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let s = (&m + m.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.max()
}

/// Whether `values` (indexed like `samples.points`) increase strictly along
/// some ray; returns the outermost point of the first such ray.
fn grows_along_ray(samples: &Samples, values: &[f64]) -> Option<usize> {
    samples.rays.iter().find_map(|ray| {
        let inc = ray.windows(2).all(|w| {
            let (a, b) = (values[w[0]], values[w[1]]);
            b - a > 1e-12 * (1.0 + a.abs())
        });
        inc.then(|| *ray.last().unwrap())
    })
}

/// Exact analysis of `S(t,r) = Σ_j d_kj(t) r^{σ_kj}` on `r >= 1`.
pub(crate) struct RowSumAnalysis {
    pub nonpositive: Decision,
    /// Refutation carries the (t, r) where the sum is positive.
    pub nonpositive_witness: Option<(f64, f64, f64)>,
    pub bounded_above: Decision,
    pub unbounded_witness: Option<(f64, f64, f64)>,
    pub sup: f64,
}

fn row_sum_value(groups: &[(f64, TimeFn)], t: f64, r: f64) -> f64 {
    groups.iter().map(|(e, f)| f.eval(t) * r.powf(*e)).sum()
}

pub(crate) fn analyse_row_sum(model: &PolynomialModel, k: usize) -> RowSumAnalysis {
    let spec = model.spec();
    let [a, b] = spec.interval;
    // Group coefficients by exponent, descending.
    let mut groups: Vec<(Exponent, TimeFn)> = Vec::new();
    for j in 0..spec.m {
        let e = spec.sigma_exp[k][j];
        match groups.iter_mut().find(|(g, _)| *g == e) {
            Some((_, f)) => *f = f.add(&spec.dmat[k][j]),
            None => groups.push((e, spec.dmat[k][j].clone())),
        }
    }
    groups.retain(|(_, f)| !f.is_zero());
    groups.sort_by(|x, y| y.0.cmp(&x.0));
    let fgroups: Vec<(f64, TimeFn)> = groups.iter().map(|(e, f)| (e.value(), f.clone())).collect();
    let mut prefixes = Vec::new();
    let mut acc = TimeFn::zero();
    for (e, f) in &groups {
        acc = acc.add(f);
        prefixes.push((*e, acc.clone()));
    }
    let times = Samples::times_on(a, b, 257);
    let radii: Vec<f64> = std::iter::once(1.0).chain((1..=400).map(|i| (i as f64 * 0.1).exp())).collect();
    let mut sup = f64::NEG_INFINITY;
    let mut first_positive = None;
    for &t in &times {
        for &r in &radii {
            let v = row_sum_value(&fgroups, t, r);
            if v > sup {
                sup = v;
            }
            if v > 0.0 && first_positive.is_none() {
                first_positive = Some((t, r, v));
            }
        }
    }
    if groups.is_empty() {
        sup = 0.0;
    }
    let all_nonpos = prefixes.iter().all(|(_, p)| p.decide_sup_below(a, b, 0.0, false) == Decision::Certified);
    let nonpositive = if all_nonpos {
        Decision::Certified
    } else if let Some((t, _, _)) = first_positive {
        Decision::Refuted(t)
    } else {
        Decision::Undecided
    };
    let zero = Exponent::zero();
    let bounded = prefixes
        .iter()
        .filter(|(e, _)| *e > zero)
        .all(|(_, p)| p.decide_sup_below(a, b, 0.0, false) == Decision::Certified);
    // Unbounded: at some time the leading nonvanishing group has a positive
    // exponent and a positive coefficient.
    let mut unbounded_witness = None;
    for &t in &times {
        if let Some((e, f)) = fgroups.iter().find(|(_, f)| f.eval(t) != 0.0) {
            if *e > 0.0 && f.eval(t) > 0.0 {
                let mut r = 2.0f64;
                while row_sum_value(&fgroups, t, r) <= 0.0 && r < 1e300 {
                    r *= r;
                }
                unbounded_witness = Some((t, r, row_sum_value(&fgroups, t, r)));
                break;
            }
        }
    }
    let bounded_above = if bounded {
        Decision::Certified
    } else if let Some((t, _, _)) = unbounded_witness {
        Decision::Refuted(t)
    } else {
        Decision::Undecided
    };
    if !bounded {
        sup = f64::INFINITY;
    }
    RowSumAnalysis { nonpositive, nonpositive_witness: first_positive, bounded_above, unbounded_witness, sup }
}

/// A point whose squared norm is `r - 1` along the first axis.
fn point_with_weight(d: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = (r - 1.0).max(0.0).sqrt();
    x
}

/// Ellipticity, coupling sign/lower bounds and row-sum bounds.
pub fn check_structural_hypotheses(model: &dyn CoefficientModel, samples: &Samples) -> Result<HypothesisReport> {
    let (d, m) = (model.dim(), model.components());
    if samples.bx.dim() != d {
        return Err(Error::Dimension(format!("sample box has dimension {}, model {d}", samples.bx.dim())));
    }
    let np = samples.points.len();
    let mut q = vec![0.0; d * d];
    let mut c = vec![0.0; m * m];
    let mut mu0 = vec![f64::INFINITY; m];
    let mut mu0_at = vec![(0.0, 0usize); m];
    let mut offmin = f64::INFINITY;
    let mut offmin_at = (0.0, 0usize, 0usize, 0usize);
    let mut rowmax = f64::NEG_INFINITY;
    let mut rowmax_at = (0.0, 0usize, 0usize);
    // Per-time per-point statistics for ray trends.
    let mut off_by_point = vec![vec![f64::INFINITY; np]; samples.times.len()];
    let mut row_by_point = vec![vec![vec![0.0; np]; m]; samples.times.len()];
    let mut asym = 0.0f64;
    for (ti, &t) in samples.times.iter().enumerate() {
        for (pi, x) in samples.points.iter().enumerate() {
            for k in 0..m {
                model.diffusion(k, t, x, &mut q);
                for i in 0..d {
                    for j in 0..i {
                        asym = asym.max((q[i * d + j] - q[j * d + i]).abs());
                    }
                }
                let e = min_eigenvalue(&q, d);
                if e < mu0[k] {
                    mu0[k] = e;
                    mu0_at[k] = (t, pi);
                }
            }
            model.coupling(t, x, &mut c);
            for i in 0..m {
                let mut row = 0.0;
                let mut mag = 0.0;
                for j in 0..m {
                    let v = c[i * m + j];
                    row += v;
                    mag += v.abs();
                    if i != j {
                        off_by_point[ti][pi] = off_by_point[ti][pi].min(v);
                        if v < offmin {
                            offmin = v;
                            offmin_at = (t, pi, i, j);
                        }
                    }
                }
                // cancellation noise is not a sign
                if row.abs() <= 1e-12 * mag {
                    row = 0.0;
                }
                row_by_point[ti][i][pi] = row;
                if row > rowmax {
                    rowmax = row;
                    rowmax_at = (t, pi, i);
                }
            }
        }
    }
    if m == 1 {
        offmin = 0.0;
    }
    let mut rep = HypothesisReport::default();
    let poly = model.as_polynomial();
    let exact_report = poly.map(|p| exponents::check_power_law_conditions(p.spec()));

    if asym > 1e-12 {
        rep.insert("diffusion_symmetric", Verdict::new(Status::Refuted, Some(asym), "max |q_ij - q_ji| over samples")
            .with_witness(Witness::indices(&[], asym)));
    } else {
        rep.insert("diffusion_symmetric", Verdict::new(Status::SampledPass, Some(asym), "max |q_ij - q_ji| over samples"));
    }

    // Ellipticity.
    let worst = mu0.iter().cloned().fold(f64::INFINITY, f64::min);
    let k_worst = mu0.iter().position(|v| *v == worst).unwrap_or(0);
    let ell = if worst <= 0.0 {
        let (t, pi) = mu0_at[k_worst];
        Verdict::new(Status::Refuted, Some(worst), "smallest diffusion eigenvalue is not positive")
            .with_witness(Witness::at(t, &samples.points[pi], &[k_worst], worst))
    } else {
        let certified = exact_report.as_ref().is_some_and(|r| r.passed("diffusion_exponent_order") && r.passed("ellipticity_margin"));
        let st = if certified { Status::Certified } else { Status::SampledPass };
        Verdict::new(st, Some(worst), "min over samples of the smallest eigenvalue of Q^k")
    };
    rep.insert("ellipticity", ell);
    rep.constants = Constants { mu0: Some(mu0), ..Constants::default() };

    // Off-diagonal coupling.
    if let Some(p) = poly {
        let spec = p.spec();
        let [a, b] = spec.interval;
        let mut nonneg = Verdict::new(Status::Certified, Some(offmin), "d_ij >= 0 on the interval for i != j");
        let mut lower = Verdict::new(Status::Certified, Some(offmin), "off-diagonal entries bounded below");
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                match spec.dmat[i][j].decide_inf_above(a, b, 0.0, false) {
                    Decision::Certified => {}
                    Decision::Refuted(t) => {
                        let v = spec.dmat[i][j].eval(t);
                        nonneg.status = Status::Refuted;
                        nonneg.witnesses.push(Witness::at(t, &vec![0.0; d], &[i, j], v));
                        if spec.sigma_exp[i][j] > Exponent::zero() {
                            let x = point_with_weight(d, 1e6);
                            lower.status = Status::Refuted;
                            lower.witnesses.push(Witness::at(t, &x, &[i, j], v * 1e6f64.powf(spec.sigma_exp[i][j].value())));
                        }
                    }
                    Decision::Undecided => {
                        if nonneg.status == Status::Certified {
                            nonneg.status = Status::SampledPass;
                        }
                    }
                }
            }
        }
        rep.insert("coupling_offdiag_nonnegative", nonneg);
        rep.insert("coupling_offdiag_lower_bound", lower);

        let mut nonpos = Verdict::new(Status::Certified, Some(rowmax), "row sums of C are <= 0");
        let mut upper = Verdict::new(Status::Certified, Some(rowmax), "row sums of C are bounded above");
        for k in 0..m {
            let an = analyse_row_sum(p, k);
            match an.nonpositive {
                Decision::Certified => {}
                Decision::Refuted(_) => {
                    let (t, r, v) = an.nonpositive_witness.unwrap();
                    nonpos.status = Status::Refuted;
                    nonpos.witnesses.push(Witness::at(t, &point_with_weight(d, r), &[k], v));
                }
                Decision::Undecided => {
                    if nonpos.status == Status::Certified {
                        nonpos.status = if rowmax <= 0.0 { Status::SampledPass } else { Status::Refuted };
                    }
                }
            }
            match an.bounded_above {
                Decision::Certified => {}
                Decision::Refuted(_) => {
                    let (t, r, v) = an.unbounded_witness.unwrap();
                    upper.status = Status::Refuted;
                    upper.witnesses.push(Witness::at(t, &point_with_weight(d, r), &[k], v));
                }
                Decision::Undecided => {
                    if upper.status == Status::Certified {
                        upper.status = Status::SampledPass;
                    }
                }
            }
        }
        if nonpos.status == Status::Refuted && nonpos.witnesses.is_empty() {
            let (t, pi, k) = rowmax_at;
            nonpos.witnesses.push(Witness::at(t, &samples.points[pi], &[k], rowmax));
        }
        rep.insert("row_sums_nonpositive", nonpos);
        rep.insert("row_sums_upper_bound", upper);
    } else {
        let nonneg = if offmin < 0.0 {
            let (t, pi, i, j) = offmin_at;
            Verdict::new(Status::Refuted, Some(offmin), "negative off-diagonal coupling entry")
                .with_witness(Witness::at(t, &samples.points[pi], &[i, j], offmin))
        } else {
            Verdict::new(Status::SampledPass, Some(offmin), "min over samples of off-diagonal c_ij")
        };
        rep.insert("coupling_offdiag_nonnegative", nonneg);
        let neg_off: Vec<Vec<f64>> = off_by_point.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        let lower = match neg_off.iter().enumerate().find_map(|(ti, v)| grows_along_ray(samples, v).map(|p| (ti, p))) {
            Some((ti, pi)) if off_by_point[ti][pi] < 0.0 => {
                Verdict::new(Status::SampledFail, Some(offmin), "off-diagonal entries decrease without bound along a ray")
                    .with_witness(Witness::at(samples.times[ti], &samples.points[pi], &[], off_by_point[ti][pi]))
            }
            _ => Verdict::new(Status::SampledPass, Some(offmin), "off-diagonal entries bounded below on samples"),
        };
        rep.insert("coupling_offdiag_lower_bound", lower);

        let nonpos = if rowmax > 0.0 {
            let (t, pi, k) = rowmax_at;
            Verdict::new(Status::Refuted, Some(rowmax), "positive row sum")
                .with_witness(Witness::at(t, &samples.points[pi], &[k], rowmax))
        } else {
            Verdict::new(Status::SampledPass, Some(rowmax), "max over samples of row sums")
        };
        rep.insert("row_sums_nonpositive", nonpos);
        let mut upper = Verdict::new(Status::SampledPass, Some(rowmax), "row sums bounded above on samples");
        'outer: for (ti, rows) in row_by_point.iter().enumerate() {
            for (k, v) in rows.iter().enumerate() {
                if let Some(pi) = grows_along_ray(samples, v) {
                    if v[pi] > 0.0 {
                        upper = Verdict::new(Status::SampledFail, Some(rowmax), "row sum grows without bound along a ray")
                            .with_witness(Witness::at(samples.times[ti], &samples.points[pi], &[k], v[pi]));
                        break 'outer;
                    }
                }
            }
        }
        rep.insert("row_sums_upper_bound", upper);
    }
    Ok(rep)
}

/// Irreducibility of the coupling and the chain sets `H_k^i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Irreducibility {
    pub irreducible: bool,
    /// `chains[k][i]` is the i-th chain set grown from component k.
    pub chains: Vec<Vec<Vec<usize>>>,
}

/// `nonzero[j][k]`: whether `c_jk` is not identically zero.
pub(crate) fn coupling_support(model: &dyn CoefficientModel, samples: &Samples) -> Vec<Vec<bool>> {
    let m = model.components();
    if let Some(p) = model.as_polynomial() {
        return (0..m).map(|j| (0..m).map(|k| !p.spec().dmat[j][k].is_zero()).collect()).collect();
    }
    let mut mx = vec![vec![0.0f64; m]; m];
    let mut c = vec![0.0; m * m];
    for (t, x) in samples.pairs() {
        model.coupling(t, x, &mut c);
        for j in 0..m {
            for k in 0..m {
                mx[j][k] = mx[j][k].max(c[j * m + k].abs());
            }
        }
    }
    mx.into_iter().map(|r| r.into_iter().map(|v| v > VANISHING).collect()).collect()
}

pub fn check_irreducibility(model: &dyn CoefficientModel, samples: &Samples) -> Irreducibility {
    let m = model.components();
    if m == 1 {
        return Irreducibility { irreducible: true, chains: vec![Vec::new()] };
    }
    let nz = coupling_support(model, samples);
    let mut chains = Vec::with_capacity(m);
    let mut irreducible = true;
    for k in 0..m {
        let mut seen = vec![false; m];
        seen[k] = true;
        let mut layer: Vec<usize> = (0..m).filter(|&j| j != k && nz[j][k]).collect();
        let mut ks = Vec::new();
        while !layer.is_empty() {
            for &j in &layer {
                seen[j] = true;
            }
            ks.push(layer.clone());
            layer = (0..m).filter(|&j| !seen[j] && layer.iter().any(|&l| nz[j][l])).collect();
        }
        if seen.iter().any(|s| !s) {
            irreducible = false;
        }
        chains.push(ks);
    }
    Irreducibility { irreducible, chains }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMode {
    /// `(Aφ𝟙)_k <= λ φ`
    General,
    /// `(Aφ𝟙)_k <= a - cφ`
    Dissipative,
}

/// Log-spaced `c` candidates for the dissipative fit.
pub const C_GRID: (f64, f64, usize) = (1e-3, 1e3, 50);

/// Checks a Lyapunov function on the samples (times of `samples` span the
/// interval J).
pub fn check_lyapunov(
    model: &dyn CoefficientModel,
    phi: &dyn ScalarField,
    mode: LyapunovMode,
    samples: &Samples,
) -> Result<HypothesisReport> {
    let m = model.components();
    let np = samples.points.len();
    let mut vals = Vec::with_capacity(samples.times.len() * np);
    let mut phis = vec![0.0; np];
    for (pi, x) in samples.points.iter().enumerate() {
        let p = phi.value(x);
        if !(p > 0.0) {
            return Err(Error::Invalid(format!("Lyapunov function is not positive at x = {x:?}")));
        }
        phis[pi] = p;
    }
    let mut delta = vec![f64::NEG_INFINITY; m];
    for (ti, &t) in samples.times.iter().enumerate() {
        for (pi, x) in samples.points.iter().enumerate() {
            let v = eval_on_diagonal(model, phi, t, x)?;
            for (k, dk) in delta.iter_mut().enumerate() {
                *dk = dk.max(eval_scalar_part(model, k, phi, t, x) / phis[pi]);
            }
            vals.push((ti, pi, v));
        }
    }
    let mut rep = HypothesisReport::default();
    let exact_report = model.as_polynomial().map(|p| exponents::check_power_law_conditions(p.spec()));
    let exact = exact_report.as_ref().is_some_and(|r| r.passed("dissipative_growth") && r.passed("diffusion_exponent_order"));

    let growth = match samples.rays.iter().all(|ray| ray.windows(2).all(|w| phis[w[1]] > phis[w[0]])) {
        true => Verdict::new(Status::SampledPass, None, "φ increases along every sampled ray (blow-up is not decidable numerically)"),
        false => Verdict::new(Status::SampledFail, None, "φ does not increase along some sampled ray"),
    };
    rep.insert("lyapunov_growth", growth);
    rep.insert(
        "scalar_lyapunov",
        Verdict::new(Status::SampledPass, delta.iter().cloned().reduce(f64::max), "max over samples of (𝒜_k φ)/φ"),
    );
    rep.constants.delta_j = Some(delta);

    match mode {
        LyapunovMode::General => {
            let mut lam = f64::NEG_INFINITY;
            for (_, pi, v) in &vals {
                for vk in v {
                    lam = lam.max(vk / phis[*pi]);
                }
            }
            let st = if exact { Status::Certified } else { Status::SampledPass };
            rep.insert("lyapunov_general", Verdict::new(st, Some(lam), "smallest λ with (Aφ𝟙)_k <= λφ on samples"));
            rep.constants.lambda_j = Some(lam);
        }
        LyapunovMode::Dissipative => {
            let mut shell = f64::NEG_INFINITY;
            let mut shell_at = (0, 0, 0);
            for (ti, pi, v) in &vals {
                if samples.is_outer(&samples.points[*pi]) {
                    for (k, vk) in v.iter().enumerate() {
                        let r = vk / phis[*pi];
                        if r > shell {
                            shell = r;
                            shell_at = (*ti, *pi, k);
                        }
                    }
                }
            }
            if shell >= 0.0 {
                let (ti, pi, k) = shell_at;
                rep.insert(
                    "lyapunov_dissipative",
                    Verdict::new(Status::Refuted, Some(shell), "no c > 0: (Aφ𝟙)_k/φ is nonnegative on the outer shell")
                        .with_witness(Witness::at(samples.times[ti], &samples.points[pi], &[k], shell)),
                );
            } else {
                let phis = &phis;
                let a_of = |c: f64| {
                    vals.iter()
                        .flat_map(|(_, pi, v)| v.iter().map(move |vk| vk + c * phis[*pi]))
                        .fold(f64::NEG_INFINITY, f64::max)
                        .max(0.0)
                };
                let (a, c) = fit_dissipative(a_of);
                let st = if exact { Status::Certified } else { Status::SampledPass };
                rep.insert(
                    "lyapunov_dissipative",
                    Verdict::new(st, Some(a / c), "(Aφ𝟙)_k <= a - cφ on samples; value is a/c"),
                );
                rep.constants.a = Some(a);
                rep.constants.c = Some(c);
            }
        }
    }
    Ok(rep)
}

/// Picks `c` minimising `a(c)/c` where `a(c)` is the least admissible `a`:
/// first on the log grid, then by golden section in `u = 1/c`, where the
/// objective `max(v·u + φ)` is convex.
fn fit_dissipative(a_of: impl Fn(f64) -> f64) -> (f64, f64) {
    let (lo, hi, n) = C_GRID;
    let grid: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    let obj = |c: f64| a_of(c) / c;
    let best = (0..n).min_by(|&i, &j| obj(grid[i]).total_cmp(&obj(grid[j]))).unwrap();
    let c_lo = grid[best.saturating_sub(1)];
    let c_hi = grid[(best + 1).min(n - 1)];
    let f = |u: f64| obj(1.0 / u);
    let (mut ua, mut ub) = (1.0 / c_hi, 1.0 / c_lo);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = ub - g * (ub - ua);
    let mut x2 = ua + g * (ub - ua);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (ub - ua) <= 1e-13 * ub {
            break;
        }
        if f1 <= f2 {
            ub = x2;
            x2 = x1;
            f2 = f1;
            x1 = ub - g * (ub - ua);
            f1 = f(x1);
        } else {
            ua = x1;
            x1 = x2;
            f1 = f2;
            x2 = ua + g * (ub - ua);
            f2 = f(x2);
        }
    }
    let mut c = 2.0 / (ua + ub);
    if obj(grid[best]) < obj(c) {
        c = grid[best];
    }
    (a_of(c), c)
}

/// `h(y) = c1·y^exponent - c2`, the decay profile of a compactness certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub c1: f64,
    pub c2: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn eval(&self, y: f64) -> f64 {
        self.c1 * y.powf(self.exponent) - self.c2
    }
    /// The zero `y*` with `h(y*) = 0`.
    pub fn equilibrium(&self) -> f64 {
        (self.c2 / self.c1).powf(1.0 / self.exponent)
    }
}

/// Fits `h(y) = c1 y^p - c2` with `(Aφ𝟙)_k <= -h(φ)` on all samples: `c1` is
/// half the smallest outer-shell ratio `-(Aφ𝟙)_k/φ^p`, `c2` the least
/// admissible offset.
pub fn fit_decay_profile(model: &dyn CoefficientModel, phi: &dyn ScalarField, p: f64, samples: &Samples) -> Result<PowerLaw> {
    let mut vals = Vec::new();
    let mut ratio = f64::INFINITY;
    for (t, x) in samples.pairs() {
        let v = eval_on_diagonal(model, phi, t, x)?;
        let ph = phi.value(x);
        if samples.is_outer(x) {
            for vk in &v {
                ratio = ratio.min(-vk / ph.powf(p));
            }
        }
        vals.push((v, ph));
    }
    if !(ratio > 0.0) {
        return Err(Error::Refused(format!("(Aφ𝟙)_k is not eventually below -c·φ^{p} on the outer shell")));
    }
    let c1 = 0.5 * ratio;
    let c2 = vals
        .iter()
        .flat_map(|(v, ph)| v.iter().map(move |vk| vk + c1 * ph.powf(p)))
        .fold(0.0f64, f64::max);
    Ok(PowerLaw { c1, c2, exponent: p })
}

/// Checks the decay `(Aφ𝟙)_i <= -h_i(φ)` and the lower-weight inequality
/// `(𝒜_k + c_kk)w_k - μ w_k >= 0` outside `B_R`, plus tail integrability of
/// `1/h_i`.
pub fn check_compactness_conditions(
    model: &dyn CoefficientModel,
    phi: &dyn ScalarField,
    h: &[PowerLaw],
    w: &[Profile],
    radius: f64,
    mu: f64,
    samples: &Samples,
) -> Result<HypothesisReport> {
    let (d, m) = (model.dim(), model.components());
    if h.len() != m || w.len() != m {
        return Err(Error::Dimension(format!("need {m} decay profiles and weights")));
    }
    let ymax = samples.points.iter().map(|x| phi.value(x)).fold(1.0, f64::max).max(2.0);
    for (i, hi) in h.iter().enumerate() {
        for s in 0..64 {
            let a = 1.0 + (ymax - 1.0) * s as f64 / 64.0;
            let b = a + (ymax - 1.0) / 8.0;
            if hi.eval(0.5 * (a + b)) > 0.5 * (hi.eval(a) + hi.eval(b)) + 1e-12 * (1.0 + hi.eval(b).abs()) {
                return Err(Error::Invalid(format!("decay profile {i} fails the midpoint convexity test on [{a}, {b}]")));
            }
        }
    }
    let mut c = vec![0.0; m * m];
    let mut decay_max = f64::NEG_INFINITY;
    let mut decay_at = None;
    let mut weight_min = f64::INFINITY;
    let mut weight_at = None;
    let mut any = false;
    for (t, x) in samples.pairs() {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= radius {
            continue;
        }
        any = true;
        let v = eval_on_diagonal(model, phi, t, x)?;
        let ph = phi.value(x);
        model.coupling(t, x, &mut c);
        for k in 0..m {
            let dv = v[k] + h[k].eval(ph);
            if dv > decay_max {
                decay_max = dv;
                decay_at = Some(Witness::at(t, x, &[k], dv));
            }
            let wk = w[k].value(x);
            if !(wk > 0.0) {
                return Err(Error::Invalid(format!("weight {k} is not positive at {x:?}")));
            }
            let lw = eval_scalar_part(model, k, &w[k], t, x) + c[k * m + k] * wk - mu * wk;
            if lw < weight_min {
                weight_min = lw;
                weight_at = Some(Witness::at(t, x, &[k], lw));
            }
        }
    }
    if !any {
        return Err(Error::Invalid(format!("no samples outside the ball of radius {radius}")));
    }
    let _ = d;
    let mut rep = HypothesisReport::default();
    rep.insert(
        "compactness_decay",
        if decay_max <= 0.0 {
            Verdict::new(Status::SampledPass, Some(decay_max), "max of (Aφ𝟙)_i + h_i(φ) outside B_R")
        } else {
            Verdict::new(Status::Refuted, Some(decay_max), "(Aφ𝟙)_i + h_i(φ) > 0 outside B_R").with_witness(decay_at.unwrap())
        },
    );
    rep.insert(
        "compactness_lower_weight",
        if weight_min >= 0.0 {
            Verdict::new(Status::SampledPass, Some(weight_min), "min of (𝒜_k + c_kk - μ)w_k outside B_R")
        } else {
            Verdict::new(Status::Refuted, Some(weight_min), "(𝒜_k + c_kk - μ)w_k < 0 outside B_R").with_witness(weight_at.unwrap())
        },
    );
    let mut integ = Verdict::new(Status::Certified, None, "1/h_i integrable at infinity (declared exponent > 1)");
    let mut worst = 0.0f64;
    for (i, hi) in h.iter().enumerate() {
        let y0 = ((hi.c2 + hi.c1) / hi.c1).powf(1.0 / hi.exponent);
        let q = tail_quadrature(hi, y0, ymax.max(2.0 * y0));
        worst = worst.max(q);
        if !(hi.exponent > 1.0) {
            integ.status = Status::Refuted;
            integ.detail = "1/h_i is not integrable at infinity (declared exponent <= 1)".into();
            integ.witnesses.push(Witness::indices(&[i], q));
        }
    }
    integ.value = Some(worst);
    rep.insert("compactness_integrability", integ);

    if let Some(p) = model.as_polynomial() {
        let exact_report = exponents::check_power_law_conditions(p.spec());
        for key in ["decay_exponent_positive", "lower_weight_growth"] {
            if let Some(v) = exact_report.get(key) {
                rep.insert(key, v.clone());
            }
        }
    }
    Ok(rep)
}

/// `∫_{y0}^{y1} dy / h(y)` by composite Simpson in `log y`.
fn tail_quadrature(h: &PowerLaw, y0: f64, y1: f64) -> f64 {
    let n = 2000;
    let (a, b) = (y0.ln(), y1.ln());
    let dx = (b - a) / n as f64;
    let f = |u: f64| {
        let y = u.exp();
        y / h.eval(y)
    };
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * dx / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::model::{growing_coupling_admissible, growing_coupling_inadmissible, AffineModel, CouplingGrowth};
    use crate::coefficients::polynomial::{build_polynomial_model, PolynomialSpec};
    use crate::coefficients::sampling::SampleBox;

    fn samples(d: usize, half: f64) -> Samples {
        Samples::new(&SampleBox::cube(d, half), &[0.0], 400, 11).unwrap()
    }

    #[test]
    fn admissible_growing_coupling_passes() {
        let model = AffineModel::new(1, 4, 1.0, 1.0).with_coupling(growing_coupling_admissible(), CouplingGrowth::AbsPlusOne);
        let rep = check_structural_hypotheses(&model, &samples(1, 5.0)).unwrap();
        for key in ["ellipticity", "coupling_offdiag_nonnegative", "row_sums_nonpositive", "row_sums_upper_bound", "coupling_offdiag_lower_bound"] {
            assert!(rep.passed(key), "{key}: {:?}", rep.get(key));
        }
        assert!(check_irreducibility(&model, &samples(1, 5.0)).irreducible);
    }

    #[test]
    fn inadmissible_growing_coupling_is_refuted_with_witness() {
        let model = AffineModel::new(1, 4, 1.0, 1.0).with_coupling(growing_coupling_inadmissible(), CouplingGrowth::AbsPlusOne);
        let rep = check_structural_hypotheses(&model, &samples(1, 5.0)).unwrap();
        let v = rep.get("row_sums_nonpositive").unwrap();
        assert_eq!(v.status, Status::Refuted);
        let w = &v.witnesses[0];
        assert_eq!(w.indices, vec![3]);
        let x = w.x.as_ref().unwrap()[0];
        assert!((w.value - (x.abs() + 1.0)).abs() < 1e-12);
        assert_eq!(rep.get("row_sums_upper_bound").unwrap().status, Status::SampledFail);
    }

    #[test]
    fn zero_coupling_passes_structure_but_is_reducible() {
        let model = AffineModel::new(1, 3, 1.0, 1.0);
        let s = samples(1, 3.0);
        let rep = check_structural_hypotheses(&model, &s).unwrap();
        assert!(rep.passed("row_sums_nonpositive") && rep.passed("coupling_offdiag_nonnegative"));
        let irr = check_irreducibility(&model, &s);
        assert!(!irr.irreducible);
        assert!(irr.chains.iter().all(|c| c.is_empty()));
    }

    #[test]
    fn fully_coupled_pair_chains() {
        let model = AffineModel::new(1, 2, 1.0, 1.0).with_coupling(vec![vec![-1.0, 1.0], vec![2.0, -2.0]], CouplingGrowth::Constant);
        let irr = check_irreducibility(&model, &samples(1, 1.0));
        assert!(irr.irreducible);
        assert_eq!(irr.chains, vec![vec![vec![1]], vec![vec![0]]]);
    }

    #[test]
    fn ou_dissipative_constants() {
        let model = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let phi = Profile::lyapunov();
        let rep = check_lyapunov(&model, &phi, LyapunovMode::Dissipative, &samples(1, 6.0)).unwrap();
        assert!(rep.passed("lyapunov_dissipative"));
        let (a, c) = (rep.constants.a.unwrap(), rep.constants.c.unwrap());
        assert!((a - 4.0).abs() < 1e-6 && (c - 2.0).abs() < 1e-6, "a = {a}, c = {c}");
    }

    #[test]
    fn heat_is_general_but_not_dissipative() {
        let model = AffineModel::new(1, 1, 1.0, 0.0);
        let phi = Profile::lyapunov();
        let s = samples(1, 6.0);
        let g = check_lyapunov(&model, &phi, LyapunovMode::General, &s).unwrap();
        assert!((g.constants.lambda_j.unwrap() - 2.0).abs() < 1e-12);
        let dis = check_lyapunov(&model, &phi, LyapunovMode::Dissipative, &s).unwrap();
        let v = dis.get("lyapunov_dissipative").unwrap();
        assert_eq!(v.status, Status::Refuted);
        assert!(!v.witnesses.is_empty());
    }

    #[test]
    fn nonpositive_lyapunov_is_an_error() {
        let model = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let phi = Profile::Coordinate { axis: 0 };
        assert!(check_lyapunov(&model, &phi, LyapunovMode::General, &samples(1, 1.0)).is_err());
    }

    fn compact_model() -> PolynomialModel {
        let spec = PolynomialSpec::uncoupled_ou(1, 2)
            .with_ell(Exponent::int(2))
            .with_sigma(vec![vec![Exponent::new(1, 2), Exponent::zero()], vec![Exponent::zero(), Exponent::new(1, 2)]])
            .with_dmat(vec![vec![-2.0, 1.0], vec![1.0, -2.0]]);
        build_polynomial_model(spec).unwrap()
    }

    #[test]
    fn polynomial_structure_is_certified() {
        let model = compact_model();
        let rep = check_structural_hypotheses(&model, &samples(1, 4.0)).unwrap();
        for key in ["ellipticity", "coupling_offdiag_nonnegative", "row_sums_nonpositive", "row_sums_upper_bound"] {
            assert_eq!(rep.get(key).unwrap().status, Status::Certified, "{key}");
        }
    }

    #[test]
    fn polynomial_growing_row_sum_is_refuted() {
        let spec = PolynomialSpec::uncoupled_ou(1, 2)
            .with_sigma(vec![vec![Exponent::zero(), Exponent::int(1)], vec![Exponent::int(1), Exponent::zero()]])
            .with_dmat(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        let model = build_polynomial_model(spec).unwrap();
        let rep = check_structural_hypotheses(&model, &samples(1, 4.0)).unwrap();
        assert_eq!(rep.get("row_sums_nonpositive").unwrap().status, Status::Refuted);
        assert_eq!(rep.get("row_sums_upper_bound").unwrap().status, Status::Refuted);
    }

    #[test]
    fn compactness_on_superlinear_model() {
        let model = compact_model();
        let phi = Profile::lyapunov();
        let s = samples(1, 6.0);
        let tau = model.spec().tau(0).value();
        let h = fit_decay_profile(&model, &phi, 1.0 + tau, &s).unwrap();
        let w = vec![Profile::Power { exponent: -1.0, scale: 1.0, shift: 1.0 }; 2];
        let rep = check_compactness_conditions(&model, &phi, &[h, h], &w, 3.0, 5.0, &s).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
    }

    #[test]
    fn linear_decay_is_not_integrable() {
        let model = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let phi = Profile::lyapunov();
        let h = PowerLaw { c1: 1.0, c2: 3.0, exponent: 1.0 };
        let w = vec![Profile::constant(1.0)];
        let rep = check_compactness_conditions(&model, &phi, &[h], &w, 1.0, -1.0, &samples(1, 5.0)).unwrap();
        assert_eq!(rep.get("compactness_integrability").unwrap().status, Status::Refuted);
    }

    #[test]
    fn concave_decay_profile_is_rejected() {
        let model = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let phi = Profile::lyapunov();
        let h = PowerLaw { c1: 1.0, c2: 0.0, exponent: 0.5 };
        let w = vec![Profile::constant(1.0)];
        assert!(check_compactness_conditions(&model, &phi, &[h], &w, 1.0, 0.0, &samples(1, 5.0)).is_err());
    }
}
