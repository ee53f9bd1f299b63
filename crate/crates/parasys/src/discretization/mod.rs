//! Truncated box grids `[-L, L]^d` and the sparse finite-difference generator.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, Coeffs};
use crate::error::{Error, Result};
use crate::linalg::Csr;

/// Tolerance on `|q_ij - q_ji|` during assembly.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Boundary values are held at zero.
    Dirichlet,
    /// Zero normal derivative via mirrored ghost points.
    Neumann,
}

/// Grid `x_i = -L + i·Δx`, `i = 0..N`, in each of `d ∈ {1, 2}` directions.
///
/// Unknowns are stored point-major: the flat index of component `k` at grid
/// point `p` is `p·m + k`, with `p = i0 + N·i1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDomain {
    pub d: usize,
    pub l: f64,
    pub n: usize,
    pub dx: f64,
    pub bc: Boundary,
}

pub fn build_grid(d: usize, l: f64, n: usize, bc: Boundary) -> Result<DiscreteDomain> {
    if !(1..=2).contains(&d) {
        return Err(Error::Invalid(format!("grid dimension must be 1 or 2, got {d}")));
    }
    if n < 3 {
        return Err(Error::Invalid(format!("need at least 3 points per dimension, got {n}")));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Invalid(format!("half-width must be positive, got {l}")));
    }
    Ok(DiscreteDomain { d, l, n, dx: 2.0 * l / (n - 1) as f64, bc })
}

impl DiscreteDomain {
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn unknowns(&self, m: usize) -> usize {
        m * self.points()
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.dx
    }

    pub fn multi(&self, p: usize) -> [usize; 2] {
        [p % self.n, p / self.n]
    }

    pub fn point_index(&self, mi: [usize; 2]) -> usize {
        mi[0] + if self.d == 2 { self.n * mi[1] } else { 0 }
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let mi = self.multi(p);
        (0..self.d).map(|a| self.coord(mi[a])).collect()
    }

    pub fn flat(&self, m: usize, k: usize, p: usize) -> usize {
        p * m + k
    }

    pub fn unflat(&self, m: usize, idx: usize) -> (usize, usize) {
        (idx % m, idx / m)
    }

    pub fn is_boundary(&self, p: usize) -> bool {
        let mi = self.multi(p);
        (0..self.d).any(|a| mi[a] == 0 || mi[a] == self.n - 1)
    }

    /// Index of the grid point nearest to `x` (clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut mi = [0usize; 2];
        for a in 0..self.d {
            let i = ((x[a] + self.l) / self.dx).round();
            mi[a] = i.clamp(0.0, (self.n - 1) as f64) as usize;
        }
        self.point_index(mi)
    }

    /// Points with every coordinate in `[-r, r]` (up to rounding).
    pub fn window(&self, r: f64) -> Vec<usize> {
        let eps = 1e-9 * self.dx;
        (0..self.points())
            .filter(|&p| self.point(p).iter().all(|v| v.abs() <= r + eps))
            .collect()
    }

    /// Points at least `margin` grid steps away from the boundary.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        (0..self.points())
            .filter(|&p| {
                let mi = self.multi(p);
                (0..self.d).all(|a| mi[a] >= margin && mi[a] + margin < self.n)
            })
            .collect()
    }

    /// Volume element `Δx^d`.
    pub fn cell(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    /// Grid samples of `f(k, x)` in point-major layout.
    pub fn sample(&self, m: usize, f: impl Fn(usize, &[f64]) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; self.unknowns(m)];
        for p in 0..self.points() {
            let x = self.point(p);
            for k in 0..m {
                v[p * m + k] = f(k, &x);
            }
        }
        v
    }

    /// Neighbor index along axis `a` at offset `o`, after boundary handling.
    /// `None` means the neighbor is a Dirichlet boundary value (zero).
    fn neighbor(&self, mi: [usize; 2], a: usize, o: isize) -> Option<usize> {
        let mut mj = mi;
        let j = mi[a] as isize + o;
        let last = self.n as isize - 1;
        let j = if (0..=last).contains(&j) {
            j
        } else {
            match self.bc {
                Boundary::Dirichlet => return None,
                Boundary::Neumann => if j < 0 { -j } else { 2 * last - j },
            }
        };
        mj[a] = j as usize;
        if self.bc == Boundary::Dirichlet && (mj[a] == 0 || mj[a] == self.n - 1) {
            return None;
        }
        Some(self.point_index(mj))
    }

    fn neighbor2(&self, mi: [usize; 2], o0: isize, o1: isize) -> Option<usize> {
        let p = self.neighbor(mi, 0, o0)?;
        self.neighbor(self.multi(p), 1, o1)
    }
}

/// The discretised `A(t)` on a domain, as a sparse matrix over `m·N^d` unknowns.
#[derive(Clone, Debug)]
pub struct DiscreteGenerator {
    pub t: f64,
    pub dom: DiscreteDomain,
    pub m: usize,
    pub upwind: bool,
    pub(crate) mat: Csr,
}

impl DiscreteGenerator {
    pub fn size(&self) -> usize {
        self.mat.n
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat.row(i).filter(|e| e.0 == j).map(|e| e.1).sum()
    }

    /// Smallest off-diagonal entry; `+∞` when there is none.
    pub fn min_offdiag(&self) -> f64 {
        (0..self.mat.n)
            .flat_map(|i| self.mat.row(i).filter(move |e| e.0 != i).map(|e| e.1))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.mat.row(i).map(|e| e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.mat.to_dense()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.mat.matvec(u, out);
    }
}

/// Upwinding default: on for power-law models with superlinear drift.
pub fn default_upwind(model: &dyn CoefficientModel) -> bool {
    model
        .as_polynomial()
        .is_some_and(|p| p.spec().ell_exp.iter().flatten().any(|e| e.value() > 0.0))
}

pub fn assemble_generator(model: &dyn CoefficientModel, dom: &DiscreteDomain, t: f64, upwind: bool) -> Result<DiscreteGenerator> {
    let (d, m) = (model.dim(), model.components());
    if d != dom.d {
        return Err(Error::Dimension(format!("model dimension {d} does not match grid dimension {}", dom.d)));
    }
    let np = dom.points();
    let rows: Vec<Result<Vec<Vec<(usize, f64)>>>> = (0..np)
        .into_par_iter()
        .map(|p| point_rows(model, dom, t, upwind, p))
        .collect();
    let mut all = Vec::with_capacity(np * m);
    for r in rows {
        all.extend(r?);
    }
    Ok(DiscreteGenerator { t, dom: *dom, m, upwind, mat: Csr::from_rows(np * m, all) })
}

fn point_rows(model: &dyn CoefficientModel, dom: &DiscreteDomain, t: f64, upwind: bool, p: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let (d, m) = (dom.d, model.components());
    if dom.bc == Boundary::Dirichlet && dom.is_boundary(p) {
        return Ok(vec![Vec::new(); m]);
    }
    let x = dom.point(p);
    let mi = dom.multi(p);
    let mut cf = Coeffs::new(d, m);
    model.coupling(t, &x, &mut cf.c);
    let (h, h2) = (dom.dx, dom.dx * dom.dx);
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        model.diffusion(k, t, &x, &mut cf.q);
        model.drift(k, t, &x, &mut cf.b);
        if d == 2 && (cf.q[1] - cf.q[2]).abs() > SYMMETRY_TOL {
            return Err(Error::Invalid(format!("diffusion matrix {k} is not symmetric at t = {t}, x = {x:?}")));
        }
        let vals = [&cf.q, &cf.b, &cf.c];
        if vals.iter().any(|v| v.iter().any(|z| !z.is_finite())) {
            return Err(Error::NonFinite { t });
        }
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(8 + m);
        let mut push = |q: Option<usize>, v: f64| {
            if let Some(q) = q {
                row.push((q * m + k, v));
            }
        };
        let mut diag = 0.0;
        for a in 0..d {
            let qa = cf.q[a * d + a];
            let ba = cf.b[a];
            diag -= 2.0 * qa / h2;
            let (mut lo, mut hi) = (qa / h2, qa / h2);
            if upwind {
                if ba > 0.0 {
                    hi += ba / h;
                    diag -= ba / h;
                } else {
                    lo -= ba / h;
                    diag += ba / h;
                }
            } else {
                hi += ba / (2.0 * h);
                lo -= ba / (2.0 * h);
            }
            push(dom.neighbor(mi, a, 1), hi);
            push(dom.neighbor(mi, a, -1), lo);
        }
        if d == 2 {
            let w = 2.0 * cf.q[1] / (4.0 * h2);
            if w != 0.0 {
                push(dom.neighbor2(mi, 1, 1), w);
                push(dom.neighbor2(mi, -1, -1), w);
                push(dom.neighbor2(mi, 1, -1), -w);
                push(dom.neighbor2(mi, -1, 1), -w);
            }
        }
        row.push((p * m + k, diag));
        for j in 0..m {
            let c = cf.c[k * m + j];
            if c != 0.0 {
                row.push((p * m + j, c));
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Grid values of an m-component field at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateField {
    pub dom: DiscreteDomain,
    pub m: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

impl StateField {
    pub fn new(dom: DiscreteDomain, m: usize, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != dom.unknowns(m) {
            return Err(Error::Dimension(format!("field has {} values, grid needs {}", values.len(), dom.unknowns(m))));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        Ok(StateField { dom, m, t, values })
    }

    pub fn zeros(dom: DiscreteDomain, m: usize, t: f64) -> Self {
        StateField { dom, m, t, values: vec![0.0; dom.unknowns(m)] }
    }

    /// Grid samples of `f(k, x)`.
    pub fn from_fn(dom: DiscreteDomain, m: usize, t: f64, f: impl Fn(usize, &[f64]) -> f64) -> Result<Self> {
        Self::new(dom, m, t, dom.sample(m, f))
    }

    pub fn get(&self, k: usize, p: usize) -> f64 {
        self.values[p * self.m + k]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Max over points of the Euclidean norm of the m-vector.
    pub fn sup_euclidean(&self) -> f64 {
        self.values
            .chunks(self.m)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Sup norm over the points in `[-r, r]^d`.
    pub fn sup_on_window(&self, r: f64) -> f64 {
        self.dom
            .window(r)
            .into_iter()
            .flat_map(|p| (0..self.m).map(move |k| (p, k)))
            .fold(0.0, |a, (p, k)| a.max(self.get(k, p).abs()))
    }

    /// Zeroes the boundary values of a Dirichlet field.
    pub fn zero_dirichlet_boundary(&mut self) {
        if self.dom.bc == Boundary::Dirichlet {
            for p in 0..self.dom.points() {
                if self.dom.is_boundary(p) {
                    for k in 0..self.m {
                        self.values[p * self.m + k] = 0.0;
                    }
                }
            }
        }
    }

    /// CSV rows `t, k, x0[, x1], value`.
    pub fn write_csv(&self, w: &mut impl Write, header: bool) -> std::io::Result<()> {
        if header {
            let xs: Vec<String> = (0..self.dom.d).map(|a| format!("x{a}")).collect();
            writeln!(w, "t,k,{},value", xs.join(","))?;
        }
        for p in 0..self.dom.points() {
            let x = self.dom.point(p);
            let xs: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            for k in 0..self.m {
                writeln!(w, "{},{},{},{}", self.t, k, xs.join(","), self.get(k, p))?;
            }
        }
        Ok(())
    }
}

pub fn apply_generator(gen: &DiscreteGenerator, u: &StateField) -> Result<StateField> {
    if u.m != gen.m || u.dom != gen.dom {
        return Err(Error::Dimension("field and generator live on different grids".into()));
    }
    let mut out = vec![0.0; u.values.len()];
    gen.apply(&u.values, &mut out);
    StateField::new(gen.dom, gen.m, gen.t, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{growing_coupling_admissible, AffineModel, CouplingGrowth, FnModel};

    #[test]
    fn small_grids() {
        let g = build_grid(1, 1.0, 3, Boundary::Dirichlet).unwrap();
        assert_eq!(g.dx, 1.0);
        assert_eq!((0..3).map(|p| g.point(p)[0]).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        let g = build_grid(2, 2.0, 5, Boundary::Neumann).unwrap();
        assert_eq!(g.points(), 25);
        assert_eq!(g.dx, 1.0);
        assert!(build_grid(1, 1.0, 2, Boundary::Dirichlet).is_err());
        assert!(build_grid(1, 0.0, 5, Boundary::Dirichlet).is_err());
        assert!(build_grid(3, 1.0, 5, Boundary::Dirichlet).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        let g = build_grid(2, 1.0, 7, Boundary::Dirichlet).unwrap();
        let m = 3;
        let mut seen = vec![false; g.unknowns(m)];
        for p in 0..g.points() {
            assert_eq!(g.point_index(g.multi(p)), p);
            for k in 0..m {
                let i = g.flat(m, k, p);
                assert_eq!(g.unflat(m, i), (k, p));
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn laplacian_stencil() {
        let g = build_grid(1, 1.0, 5, Boundary::Dirichlet).unwrap();
        let model = AffineModel::new(1, 2, 1.0, 0.0);
        let gen = assemble_generator(&model, &g, 0.0, false).unwrap();
        let h2 = g.dx * g.dx;
        for k in 0..2 {
            let r = g.flat(2, k, 2);
            assert_eq!(gen.entry(r, g.flat(2, k, 1)), 1.0 / h2);
            assert_eq!(gen.entry(r, r), -2.0 / h2);
            assert_eq!(gen.entry(r, g.flat(2, k, 3)), 1.0 / h2);
            assert_eq!(gen.row_sum(r), 0.0);
            // rows next to the boundary lose the boundary column
            assert_eq!(gen.entry(g.flat(2, k, 1), g.flat(2, k, 0)), 0.0);
        }
        assert!(gen.mat.row(0).next().is_none());
    }

    #[test]
    fn ou_on_square_is_second_order() {
        let model = AffineModel::ornstein_uhlenbeck(1, 1.0, 1.0);
        let mut errs = Vec::new();
        for n in [41, 81, 161] {
            let g = build_grid(1, 2.0, n, Boundary::Dirichlet).unwrap();
            let gen = assemble_generator(&model, &g, 0.0, false).unwrap();
            let u = StateField::from_fn(g, 1, 0.0, |_, x| x[0] * x[0]).unwrap();
            let au = apply_generator(&gen, &u).unwrap();
            let e = g.interior(2).iter().map(|&p| (au.values[p] - (2.0 - 2.0 * g.point(p)[0].powi(2))).abs()).fold(0.0, f64::max);
            assert!(e < 1e-9, "{e}");
            let u = StateField::from_fn(g, 1, 0.0, |_, x| x[0].sin()).unwrap();
            let au = apply_generator(&gen, &u).unwrap();
            let e = g.interior(2).iter().map(|&p| {
                let x = g.point(p)[0];
                (au.values[p] - (-x.sin() - x * x.cos())).abs()
            }).fold(0.0, f64::max);
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn neumann_mirrors_and_kills_constants() {
        let g = build_grid(2, 1.0, 9, Boundary::Neumann).unwrap();
        let model = AffineModel::new(2, 1, 1.0, 0.0);
        let gen = assemble_generator(&model, &g, 0.0, false).unwrap();
        let u = StateField::from_fn(g, 1, 0.0, |_, _| 1.0).unwrap();
        let au = apply_generator(&gen, &u).unwrap();
        assert!(au.sup_norm() < 1e-10);
        // corner row: ghost at -1 mirrors to 1, so neighbor 1 gets twice the weight
        assert_eq!(gen.entry(0, 1), 2.0 / (g.dx * g.dx));
    }

    #[test]
    fn upwinded_growing_coupling_has_m_matrix_pattern() {
        let g = build_grid(1, 4.0, 41, Boundary::Dirichlet).unwrap();
        let model = AffineModel::new(1, 4, 1.0, 3.0).with_coupling(growing_coupling_admissible(), CouplingGrowth::AbsPlusOne);
        let gen = assemble_generator(&model, &g, 0.0, true).unwrap();
        assert!(gen.min_offdiag() >= -1e-14);
    }

    #[test]
    fn asymmetric_diffusion_is_rejected() {
        let model = FnModel::new(2, 1).diffusion(|_, _, _, q| {
            q.copy_from_slice(&[1.0, 0.1, 0.0, 1.0]);
        });
        let g = build_grid(2, 1.0, 5, Boundary::Neumann).unwrap();
        assert!(matches!(assemble_generator(&model, &g, 0.0, false), Err(Error::Invalid(_))));
    }

    #[test]
    fn matches_dense_product() {
        use rand::{Rng, SeedableRng};
        let g = build_grid(1, 1.0, 9, Boundary::Dirichlet).unwrap();
        let model = AffineModel::new(1, 2, 1.0, 1.0).with_coupling(vec![vec![-1.0, 0.5], vec![2.0, -3.0]], CouplingGrowth::AbsPlusOne);
        let gen = assemble_generator(&model, &g, 0.0, false).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = gen.to_dense();
        let mut got = vec![0.0; 18];
        gen.apply(&u, &mut got);
        for i in 0..18 {
            let want: f64 = (0..18).map(|j| dense[i][j] * u[j]).sum();
            assert!((got[i] - want).abs() < 1e-13);
        }
    }
}
