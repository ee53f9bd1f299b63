//! Exact verdicts on the exponent inequalities of power-law models, decided by
//! rational comparison; time-function signs are decided by enclosure.

use num_rational::Ratio;

use super::polynomial::PolynomialSpec;
use super::report::{HypothesisReport, Status, Verdict, Witness};
use super::timefn::{Decision, TimeFn};

type Q = Ratio<i64>;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

fn maxq(it: impl IntoIterator<Item = Q>) -> Option<Q> {
    it.into_iter().max()
}

fn minq(it: impl IntoIterator<Item = Q>) -> Option<Q> {
    it.into_iter().min()
}

fn cmp_verdict(holds: bool, lhs: Q, rhs: Q, detail: &str, witness: &[usize]) -> Verdict {
    let gap = (lhs - rhs).to_string();
    if holds {
        Verdict::new(Status::Certified, Some(ratio_f64(lhs - rhs)), format!("{detail} (margin {gap})"))
    } else {
        Verdict::new(Status::Refuted, Some(ratio_f64(lhs - rhs)), format!("{detail} (margin {gap})"))
            .with_witness(Witness::indices(witness, ratio_f64(lhs - rhs)))
    }
}

fn ratio_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Folds per-index decisions into a single verdict.
struct SignCheck {
    verdict: Verdict,
}

impl SignCheck {
    fn new(detail: &str) -> Self {
        SignCheck { verdict: Verdict::new(Status::Certified, None, detail) }
    }

    fn record(&mut self, dec: Decision, f: &TimeFn, idx: &[usize]) {
        match dec {
            Decision::Certified => {}
            Decision::Refuted(t) => {
                self.verdict.status = Status::Refuted;
                self.verdict.witnesses.push(Witness { t: Some(t), x: None, indices: idx.to_vec(), value: f.eval(t) });
            }
            Decision::Undecided => {
                if self.verdict.status == Status::Certified {
                    self.verdict.status = Status::SampledPass;
                }
            }
        }
    }
}

/// `min_i ω_ii(t) - max_i (Σ_{j≠i} ω_ij(t)²)^{1/2}`
fn ellipticity_gap(omega: &[Vec<TimeFn>], t: f64) -> f64 {
    let d = omega.len();
    let diag = (0..d).map(|i| omega[i][i].eval(t)).fold(f64::INFINITY, f64::min);
    let off = (0..d)
        .map(|i| (0..d).filter(|&j| j != i).map(|j| omega[i][j].eval(t).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    diag - off
}

/// `ν_k` with a certified lower bound: the gap is Lipschitz with constant at
/// most the sum of the constants of its entries.
fn ellipticity_margin(omega: &[Vec<TimeFn>], a: f64, b: f64) -> (f64, f64, f64) {
    let lip: f64 = omega.iter().flatten().map(|f| f.lipschitz(a, b)).sum();
    let n = if b > a && lip > 0.0 { 4097 } else { 1 };
    let h = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    let (mut mn, mut at) = (f64::INFINITY, a);
    for s in 0..n {
        let t = a + s as f64 * h;
        let g = ellipticity_gap(omega, t);
        if g < mn {
            mn = g;
            at = t;
        }
    }
    (mn, mn - lip * h / 2.0, at)
}

pub fn check_power_law_conditions(spec: &PolynomialSpec) -> HypothesisReport {
    let (d, m) = (spec.d, spec.m);
    let [a, b] = spec.interval;
    let h = |k: usize, i: usize, j: usize| spec.h_exp[k][i][j].ratio();
    let ell = |k: usize, i: usize| spec.ell_exp[k][i].ratio();
    let sig = |i: usize, j: usize| spec.sigma_exp[i][j].ratio();
    let mut rep = HypothesisReport::default();

    // Table symmetry and signs.
    let mut sym = Verdict::new(Status::Certified, None, "ω^k and h^k tables are symmetric");
    for k in 0..m {
        for i in 0..d {
            for j in 0..i {
                if spec.omega[k][i][j] != spec.omega[k][j][i] || h(k, i, j) != h(k, j, i) {
                    sym.status = Status::Refuted;
                    sym.witnesses.push(Witness::indices(&[k, i, j], 0.0));
                }
            }
        }
    }
    rep.insert("symmetry", sym);

    let mut nonneg = Verdict::new(Status::Certified, None, "all exponents h, ℓ, σ are nonnegative");
    let zero = q(0);
    for k in 0..m {
        for i in 0..d {
            if ell(k, i) < zero {
                nonneg.status = Status::Refuted;
                nonneg.witnesses.push(Witness::indices(&[k, i], ratio_f64(ell(k, i))));
            }
            for j in 0..d {
                if h(k, i, j) < zero {
                    nonneg.status = Status::Refuted;
                    nonneg.witnesses.push(Witness::indices(&[k, i, j], ratio_f64(h(k, i, j))));
                }
            }
        }
        for j in 0..m {
            if sig(k, j) < zero {
                nonneg.status = Status::Refuted;
                nonneg.witnesses.push(Witness::indices(&[k, j], ratio_f64(sig(k, j))));
            }
        }
    }
    rep.insert("exponents_nonnegative", nonneg);

    let mut rates = SignCheck::new("inf over the interval of every γ_i^k is positive");
    for k in 0..m {
        for i in 0..d {
            let g = &spec.gamma[k][i];
            rates.record(g.decide_inf_above(a, b, 0.0, true), g, &[k, i]);
        }
    }
    rep.insert("drift_rates_positive", rates.verdict);

    let mut signs = SignCheck::new("d_ij > 0 for i != j and d_ii < 0 on the interval");
    for i in 0..m {
        for j in 0..m {
            let f = &spec.dmat[i][j];
            let dec = if i == j { f.decide_sup_below(a, b, 0.0, true) } else { f.decide_inf_above(a, b, 0.0, true) };
            signs.record(dec, f, &[i, j]);
        }
    }
    rep.insert("coupling_sign_pattern", signs.verdict);

    // σ_ij < σ_ii for i != j
    let mut order = Verdict::new(Status::Certified, None, "σ_ij < σ_ii for every i != j");
    let mut margin = None::<Q>;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let gap = sig(i, i) - sig(i, j);
                margin = Some(margin.map_or(gap, |g| g.min(gap)));
                if gap <= zero {
                    order.status = Status::Refuted;
                    order.witnesses.push(Witness::indices(&[i, j], ratio_f64(gap)));
                }
            }
        }
    }
    order.value = margin.map(ratio_f64);
    rep.insert("coupling_exponent_order", order);

    // min_i h_ii >= max_{i != j} h_ij
    let mut dorder = Verdict::new(Status::Certified, None, "min_i h_ii^k >= max_{i != j} h_ij^k");
    for k in 0..m {
        let mn = minq((0..d).map(|i| h(k, i, i))).unwrap();
        if let Some(mx) = maxq((0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| h(k, i, j))) {
            if mn < mx {
                dorder.status = Status::Refuted;
                dorder.witnesses.push(Witness::indices(&[k], ratio_f64(mn - mx)));
            }
        }
    }
    rep.insert("diffusion_exponent_order", dorder);

    let mut nu = Vec::with_capacity(m);
    let mut ell_v = Verdict::new(Status::Certified, None, "ν_k > 0 for every k");
    for k in 0..m {
        let (mn, lo, at) = ellipticity_margin(&spec.omega[k], a, b);
        nu.push(mn);
        if mn <= 0.0 {
            ell_v.status = Status::Refuted;
            ell_v.witnesses.push(Witness { t: Some(at), x: None, indices: vec![k], value: mn });
        } else if lo <= 0.0 && ell_v.status == Status::Certified {
            ell_v.status = Status::SampledPass;
        }
    }
    ell_v.value = nu.iter().cloned().reduce(f64::min);
    rep.insert("ellipticity_margin", ell_v);
    rep.constants.nu = Some(nu);

    // Per-component growth comparisons; the worst k is reported.
    let mut per_k = |key: &str, detail: &str, f: &dyn Fn(usize) -> (Q, Q)| {
        let mut worst: Option<(Q, usize, Q, Q)> = None;
        for k in 0..m {
            let (l, r) = f(k);
            if worst.is_none_or(|w| l - r < w.0) {
                worst = Some((l - r, k, l, r));
            }
        }
        let (_, k, l, r) = worst.unwrap();
        rep.insert(key, cmp_verdict(l > r, l, r, detail, &[k]));
    };
    let max_hii = |k: usize| maxq((0..d).map(|i| h(k, i, i))).unwrap();
    let min_hii = |k: usize| minq((0..d).map(|i| h(k, i, i))).unwrap();
    let max_ell = |k: usize| maxq((0..d).map(|i| ell(k, i))).unwrap();
    let min_ell = |k: usize| minq((0..d).map(|i| ell(k, i))).unwrap();
    let max_hij = |k: usize| maxq((0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| h(k, i, j))).unwrap();

    per_k("dissipative_growth", "1 + max{σ_kk, ℓ_i^k} > max_i h_ii^k", &|k| {
        (q(1) + max_ell(k).max(sig(k, k)), max_hii(k))
    });
    per_k("compactness_growth", "1 + max_i ℓ_i^k > max_i h_ii^k", &|k| (q(1) + max_ell(k), max_hii(k)));
    per_k("decay_exponent_positive", "τ_k = max{σ_kk, ℓ_i^k} > 0", &|k| (spec.tau(k).ratio(), q(0)));
    per_k("lower_weight_growth", "max_i ℓ_i^k > 1 + max{σ_kk, h_ij^k - 2}", &|k| {
        (max_ell(k), q(1) + sig(k, k).max(max_hij(k) - q(2)))
    });
    per_k("c0_preservation", "max{h_ii^k - 1, σ_kk} > max{h_ij^k - 1, ℓ_i^k, σ_kj (j != k)}", &|k| {
        let lhs = (max_hii(k) - q(1)).max(sig(k, k));
        let mut rhs = (max_hij(k) - q(1)).max(max_ell(k));
        for j in (0..m).filter(|&j| j != k) {
            rhs = rhs.max(sig(k, j));
        }
        (lhs, rhs)
    });
    let lp_rhs = (0..m)
        .flat_map(|k| (0..d).map(move |s| (k, s)))
        .map(|(k, s)| ell(k, s).max(maxq((0..d).map(|j| h(k, s, j))).unwrap() - q(1)))
        .max()
        .unwrap();
    per_k("lp_invariance", "σ_ii > max_{s,j,k} {ℓ_s^k, h_sj^k - 1}", &|i| (sig(i, i), lp_rhs));
    per_k("gradient_growth", "max{min ℓ_i^k, σ_kk} > max{2 max_{i != k} σ_ki, 2σ_kk - 1, min h_ii^k}", &|k| {
        let lhs = min_ell(k).max(sig(k, k));
        let mut rhs = (q(2) * sig(k, k) - q(1)).max(min_hii(k));
        for i in (0..m).filter(|&i| i != k) {
            rhs = rhs.max(q(2) * sig(k, i));
        }
        (lhs, rhs)
    });

    let mut rows = SignCheck::new("Σ_i d_ki(t) <= 0 on the interval");
    let row_sum = |k: usize| spec.dmat[k].iter().fold(TimeFn::zero(), |acc, f| acc.add(f));
    for k in 0..m {
        let s = row_sum(k);
        rows.record(s.decide_sup_below(a, b, 0.0, false), &s, &[k]);
    }
    rep.insert("compactness_row_sums", rows.verdict);

    // ∃ j: max_i ℓ_i^j > max_{i != k} {σ_jj, h_ik^j - 1}
    let mut best: Option<(Q, usize)> = None;
    for j in 0..m {
        let mut rhs = sig(j, j);
        for i in 0..d {
            for k in (0..d).filter(|&k| k != i) {
                rhs = rhs.max(h(j, i, k) - q(1));
            }
        }
        let gap = max_ell(j) - rhs;
        if best.is_none_or(|b| gap > b.0) {
            best = Some((gap, j));
        }
    }
    let (gap, j) = best.unwrap();
    rep.insert(
        "measure_lower_bound",
        cmp_verdict(gap > zero, gap, zero, "some j has max_i ℓ_i^j > max_{i != k} {σ_jj, h_ik^j - 1}", &[j]),
    );

    let mut cst = Verdict::new(Status::Certified, None, "equal σ, positive off-diagonal d and zero row sums: A𝟙 = 0");
    let s0 = sig(0, 0);
    if let Some((i, j)) = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).find(|&(i, j)| sig(i, j) != s0) {
        cst.status = Status::Refuted;
        cst.witnesses.push(Witness::indices(&[i, j], ratio_f64(sig(i, j) - s0)));
    }
    for i in 0..m {
        if !row_sum(i).is_zero() {
            cst.status = Status::Refuted;
            cst.witnesses.push(Witness::indices(&[i], row_sum(i).eval(a)));
        }
        for j in (0..m).filter(|&j| j != i) {
            if spec.dmat[i][j].decide_inf_above(a, b, 0.0, true) != Decision::Certified {
                cst.status = Status::Refuted;
                cst.witnesses.push(Witness::indices(&[i, j], spec.dmat[i][j].enclose(a, b).sampled_min));
            }
        }
    }
    if !rep.passed("compactness_growth") {
        cst.status = Status::Refuted;
    }
    rep.insert("measure_constant_solution", cst);
    rep
}
