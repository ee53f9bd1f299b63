//! Compressed sparse rows, a sparse LU wrapper and the ILU(0)/BiCGSTAB
//! fallback for large systems.

use faer::sparse::{SparseColMat, Triplet};
use std::sync::OnceLock;


use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from per-row entry lists; duplicates within a row are summed
    /// and columns sorted.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = indices.len();
            for (c, v) in row {
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { n, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
    }

    /// `α·I + β·self`
    pub fn shifted(&self, alpha: f64, beta: f64) -> Csr {
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).map(|(j, v)| (j, beta * v)).collect();
                r.push((i, alpha));
                r
            })
            .collect();
        Csr::from_rows(self.n, rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.row(i).filter(|e| e.0 == i).map(|e| e.1).sum()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| Error::Invalid(format!("sparse assembly failed: {e:?}")))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative residual target of every linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

enum Backend {
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Iterative(Ilu0),
}

/// A factorised system matrix reusable across steps.
pub struct Factored {
    mat: Csr,
    mat_t: OnceLock<Csr>,
    backend: Backend,
}

impl Factored {
    /// Sparse LU when `n <= lu_limit`, ILU(0)-preconditioned BiCGSTAB otherwise.
    pub fn new(mat: Csr, lu_limit: usize, t: f64) -> Result<Self> {
        faer::set_global_parallelism(faer::Par::Seq);
        let backend = if mat.n <= lu_limit {
            let a = mat.to_faer()?;
            let lu = a.sp_lu().map_err(|e| Error::Solve { t, msg: format!("sparse LU failed: {e:?}") })?;
            Backend::Lu(lu)
        } else {
            Backend::Iterative(Ilu0::new(&mat).map_err(|msg| Error::Solve { t, msg })?)
        };
        Ok(Factored { mat, mat_t: OnceLock::new(), backend })
    }

    /// Solves every column; LU back-substitution runs on the whole block.
    pub fn solve_block(&self, cols: &mut [Vec<f64>], transpose: bool, t: f64) -> Result<()> {
        if let (Backend::Lu(lu), true) = (&self.backend, cols.len() > 1) {
            use faer::prelude::*;
            let n = self.mat.n;
            let rhs: Vec<Vec<f64>> = cols.to_vec();
            let mut block = Mat::<f64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
            if transpose {
                lu.solve_transpose_in_place(block.as_mut());
            } else {
                lu.solve_in_place(block.as_mut());
            }
            let mut r = vec![0.0; n];
            for (j, col) in cols.iter_mut().enumerate() {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = block[(i, j)];
                }
                let bn = norm(&rhs[j]);
                self.residual(col, &rhs[j], transpose, &mut r);
                if norm(&r) > SOLVE_TOL * bn {
                    col.copy_from_slice(&rhs[j]);
                    self.solve(col, transpose, t)?;
                }
            }
            return Ok(());
        }
        for col in cols.iter_mut() {
            self.solve(col, transpose, t)?;
        }
        Ok(())
    }

    /// Solves `A x = b` (or `Aᵀ x = b`) in place with residual refinement.
    pub fn solve(&self, b: &mut [f64], transpose: bool, t: f64) -> Result<()> {
        let rhs = b.to_vec();
        let bn = norm(&rhs);
        if bn == 0.0 {
            b.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let mut r = vec![0.0; b.len()];
        match &self.backend {
            Backend::Lu(lu) => {
                self.lu_solve(lu, b, transpose);
                for _ in 0..3 {
                    self.residual(b, &rhs, transpose, &mut r);
                    if norm(&r) <= SOLVE_TOL * bn {
                        break;
                    }
                    self.lu_solve(lu, &mut r, transpose);
                    b.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
                }
            }
            Backend::Iterative(ilu) => {
                let m = if transpose { self.mat_t.get_or_init(|| transpose_csr(&self.mat)) } else { &self.mat };
                bicgstab(m, ilu, &rhs, b, transpose).map_err(|msg| Error::Solve { t, msg })?;
            }
        }
        self.residual(b, &rhs, transpose, &mut r);
        let rel = norm(&r) / bn;
        if !rel.is_finite() || rel > SOLVE_TOL {
            return Err(Error::Solve { t, msg: format!("relative residual {rel:.3e} exceeds {SOLVE_TOL:.0e}") });
        }
        Ok(())
    }

    fn lu_solve(&self, lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, b: &mut [f64], transpose: bool) {
        use faer::prelude::*;
        let mut col = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        if transpose {
            lu.solve_transpose_in_place(col.as_mut());
        } else {
            lu.solve_in_place(col.as_mut());
        }
        for (i, v) in b.iter_mut().enumerate() {
            *v = col[(i, 0)];
        }
    }

    fn residual(&self, x: &[f64], rhs: &[f64], transpose: bool, r: &mut [f64]) {
        if transpose {
            self.mat.matvec_transpose(x, r);
        } else {
            self.mat.matvec(x, r);
        }
        r.iter_mut().zip(rhs).for_each(|(ri, bi)| *ri = bi - *ri);
    }
}

fn transpose_csr(a: &Csr) -> Csr {
    let mut rows = vec![Vec::new(); a.n];
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            rows[j].push((i, v));
        }
    }
    Csr::from_rows(a.n, rows)
}

/// Incomplete LU with zero fill, stored on the pattern of `A`.
struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &Csr) -> std::result::Result<Self, String> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in lu.indptr[i]..lu.indptr[i + 1] {
                if lu.indices[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(format!("ILU(0): row {i} has no diagonal entry"));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.indptr[i], lu.indptr[i + 1]);
            for p in s..e {
                pos[lu.indices[p]] = p;
            }
            for p in s..e {
                let k = lu.indices[p];
                if k >= i {
                    break;
                }
                let piv = lu.values[diag[k]];
                if piv == 0.0 {
                    return Err(format!("ILU(0): zero pivot in row {k}"));
                }
                let f = lu.values[p] / piv;
                lu.values[p] = f;
                for q in diag[k] + 1..lu.indptr[k + 1] {
                    let j = lu.indices[q];
                    if pos[j] != usize::MAX {
                        lu.values[pos[j]] -= f * lu.values[q];
                    }
                }
            }
            for p in s..e {
                pos[lu.indices[p]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n;
        for i in 0..n {
            let mut s = r[i];
            for p in self.lu.indptr[i]..self.diag[i] {
                s -= self.lu.values[p] * z[self.lu.indices[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.lu.indptr[i + 1] {
                s -= self.lu.values[p] * z[self.lu.indices[p]];
            }
            z[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

/// Right-preconditioned BiCGSTAB. The ILU factors of `A` precondition `Aᵀ`
/// poorly, so the transposed case uses Jacobi scaling instead.
fn bicgstab(a: &Csr, ilu: &Ilu0, b: &[f64], x: &mut [f64], transpose: bool) -> std::result::Result<(), String> {
    let n = a.n;
    let diag: Vec<f64> = (0..n).map(|i| a.diagonal(i)).collect();
    let prec = |r: &[f64], z: &mut [f64]| {
        if transpose {
            z.iter_mut().zip(r).zip(&diag).for_each(|((zi, ri), di)| *zi = ri / di);
        } else {
            ilu.apply(r, z);
        }
    };
    let bn = norm(b);
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut tv = vec![0.0; n];
    for _ in 0..5000 {
        if norm(&r) <= 0.1 * SOLVE_TOL * bn {
            return Ok(());
        }
        let rho1 = dot(&r0, &r);
        if rho1 == 0.0 {
            return Err("BiCGSTAB breakdown (rho = 0)".into());
        }
        let beta = (rho1 / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        prec(&p, &mut ph);
        a.matvec(&ph, &mut v);
        alpha = rho1 / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        prec(&s, &mut sh);
        a.matvec(&sh, &mut tv);
        let tt = dot(&tv, &tv);
        omega = if tt > 0.0 { dot(&tv, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * tv[i];
        }
        rho = rho1;
        if omega == 0.0 {
            return if norm(&r) <= SOLVE_TOL * bn { Ok(()) } else { Err("BiCGSTAB breakdown (omega = 0)".into()) };
        }
    }
    Err("BiCGSTAB did not converge in 5000 iterations".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> Csr {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 4.0 + i as f64 * 0.01)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.5));
                }
                r
            })
            .collect();
        Csr::from_rows(n, rows)
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = Csr::from_rows(2, vec![vec![(1, 1.0), (0, 2.0), (1, 3.0)], vec![]]);
        assert_eq!(a.indices, vec![0, 1]);
        assert_eq!(a.values, vec![2.0, 4.0]);
        assert_eq!(a.indptr, vec![0, 2, 2]);
    }

    #[test]
    fn lu_and_iterative_agree() {
        let a = tridiag(200);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin()).collect();
        for transpose in [false, true] {
            let mut x1 = b.clone();
            Factored::new(a.clone(), usize::MAX, 0.0).unwrap().solve(&mut x1, transpose, 0.0).unwrap();
            let mut x2 = b.clone();
            Factored::new(a.clone(), 0, 0.0).unwrap().solve(&mut x2, transpose, 0.0).unwrap();
            let err = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "transpose={transpose}: {err}");
        }
    }

    #[test]
    fn transpose_product_matches_dense() {
        let a = tridiag(7);
        let x: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let mut y = vec![0.0; 7];
        a.matvec_transpose(&x, &mut y);
        let d = a.to_dense();
        for j in 0..7 {
            let want: f64 = (0..7).map(|i| d[i][j] * x[i]).sum();
            assert!((y[j] - want).abs() < 1e-14);
        }
    }
}
