//! Transition kernels `p_ij(t,s,x,cell(y))` as cell masses on the grid, tail
//! masses and tightness profiles.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, ScalarField};
use crate::discretization::DiscreteDomain;
use crate::error::{Error, Result};
use crate::solver::{step_index, Propagator, Scheme};

/// Clipped negative mass above this fraction of the total flags a run.
pub const CLIP_FLAG: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub upwind: bool,
}

fn default_scheme() -> Scheme {
    Scheme::ImplicitEuler
}

/// `P[i][j][x][y]`, stored as the evolution matrix `E[(x,i),(y,j)]`
/// (row-major over the point-major unknown ordering).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEstimate {
    pub dom: DiscreteDomain,
    pub m: usize,
    pub s: f64,
    pub t: f64,
    pub dt: f64,
    data: Vec<f64>,
    /// Total negative mass removed by clipping.
    pub clip_mass: f64,
    pub total_mass: f64,
    pub flagged: bool,
}

impl KernelEstimate {
    fn size(&self) -> usize {
        self.dom.unknowns(self.m)
    }

    pub fn get(&self, i: usize, j: usize, x: usize, y: usize) -> f64 {
        let n = self.size();
        self.data[(x * self.m + i) * n + (y * self.m + j)]
    }

    /// Evolution matrix row for unknown `(x, i)`.
    pub fn row(&self, x: usize, i: usize) -> &[f64] {
        let n = self.size();
        let r = x * self.m + i;
        &self.data[r * n..(r + 1) * n]
    }

    /// `Σ_j Σ_y P[i][j][x][y] f_j(y)`: the discrete representation formula.
    pub fn contract(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if f.len() != n {
            return Err(Error::Dimension(format!("field has {} values, kernel expects {n}", f.len())));
        }
        Ok((0..n).map(|r| self.data[r * n..(r + 1) * n].iter().zip(f).map(|(a, b)| a * b).sum()).collect())
    }

    /// Block-matrix product `self · earlier` (kernel composition).
    pub fn compose(&self, earlier: &KernelEstimate) -> Result<KernelEstimate> {
        if self.dom != earlier.dom || self.m != earlier.m {
            return Err(Error::Dimension("kernels live on different grids".into()));
        }
        let n = self.size();
        let a = nalgebra::DMatrix::from_row_slice(n, n, &self.data);
        let b = nalgebra::DMatrix::from_row_slice(n, n, &earlier.data);
        let c = a * b;
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for q in 0..n {
                data[r * n + q] = c[(r, q)];
            }
        }
        Ok(KernelEstimate { s: earlier.s, data, clip_mass: 0.0, total_mass: 0.0, flagged: false, ..self.clone() })
    }

    pub fn max_abs_diff(&self, other: &KernelEstimate) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Header `d, m, N` (u64) then `L, s, t, dt` (f64), little-endian,
    /// followed by the array in `[i][j][x][y]` order.
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        for v in [self.dom.d as u64, self.m as u64, self.dom.n as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.dom.l, self.s, self.t, self.dt] {
            w.write_all(&v.to_le_bytes())?;
        }
        let np = self.dom.points();
        let mut buf = Vec::with_capacity(np * 8);
        for i in 0..self.m {
            for j in 0..self.m {
                for x in 0..np {
                    buf.clear();
                    for y in 0..np {
                        buf.extend_from_slice(&self.get(i, j, x, y).to_le_bytes());
                    }
                    w.write_all(&buf)?;
                }
            }
        }
        Ok(())
    }

    /// Reads the layout of [`write_binary`](Self::write_binary); the boundary
    /// condition is not stored and must be supplied.
    pub fn read_binary(r: &mut impl Read, bc: crate::discretization::Boundary) -> Result<KernelEstimate> {
        let mut u = [0u8; 8];
        let mut next_u64 = |r: &mut dyn Read| -> Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let d = next_u64(r)? as usize;
        let m = next_u64(r)? as usize;
        let n = next_u64(r)? as usize;
        let mut f = [0.0f64; 4];
        for v in f.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let dom = crate::discretization::build_grid(d, f[0], n, bc)?;
        let np = dom.points();
        let size = m * np;
        let mut data = vec![0.0; size * size];
        let mut b = [0u8; 8];
        for i in 0..m {
            for j in 0..m {
                for x in 0..np {
                    for y in 0..np {
                        r.read_exact(&mut b)?;
                        data[(x * m + i) * size + (y * m + j)] = f64::from_le_bytes(b);
                    }
                }
            }
        }
        let total_mass = data.iter().sum();
        Ok(KernelEstimate { dom, m, s: f[1], t: f[2], dt: f[3], data, clip_mass: 0.0, total_mass, flagged: false })
    }
}

/// Kernels at each time of `t_list` (ascending, on the step grid from `s`).
pub fn estimate_kernels_at(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    s: f64,
    t_list: &[f64],
    cfg: &KernelConfig,
) -> Result<Vec<KernelEstimate>> {
    if model.dim() != dom.d {
        return Err(Error::Dimension(format!("model dimension {} does not match grid dimension {}", model.dim(), dom.d)));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::Invalid(format!("dt must be positive, got {}", cfg.dt)));
    }
    let m = model.components();
    let n = dom.unknowns(m);
    let mut targets = Vec::with_capacity(t_list.len());
    for &t in t_list {
        match step_index(s, cfg.dt, t) {
            Some(j) if t > s => targets.push(j),
            _ => return Err(Error::Invalid(format!("kernel time {t} is not on the step grid after s = {s}"))),
        }
    }
    if targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("kernel times must be sorted".into()));
    }
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut v = vec![0.0; n];
            let (_, p) = dom.unflat(m, c);
            if !(dom.bc == crate::discretization::Boundary::Dirichlet && dom.is_boundary(p)) {
                v[c] = 1.0;
            }
            v
        })
        .collect();
    let mut prop = Propagator::new(model, *dom, cfg.dt, cfg.scheme, cfg.upwind);
    let mut out = Vec::with_capacity(targets.len());
    let mut done = 0;
    for (ti, &target) in targets.iter().enumerate() {
        while done < target {
            prop.advance(&mut cols, s + done as f64 * cfg.dt)?;
            done += 1;
        }
        let mut data = vec![0.0; n * n];
        let (mut clip, mut total) = (0.0, 0.0);
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                if v < 0.0 {
                    clip -= v;
                } else {
                    data[r * n + c] = v;
                    total += v;
                }
            }
        }
        out.push(KernelEstimate {
            dom: *dom,
            m,
            s,
            t: t_list[ti],
            dt: cfg.dt,
            data,
            clip_mass: clip,
            total_mass: total,
            flagged: clip > CLIP_FLAG * total,
        });
    }
    Ok(out)
}

pub fn estimate_kernels(model: &dyn CoefficientModel, dom: &DiscreteDomain, s: f64, t: f64, cfg: &KernelConfig) -> Result<KernelEstimate> {
    Ok(estimate_kernels_at(model, dom, s, &[t], cfg)?.pop().unwrap())
}

/// Points at least `max(4Δx, 0.1L)` inside the box, where truncation does not
/// pollute the kernel rows.
pub fn inner_window(dom: &DiscreteDomain) -> Vec<usize> {
    let collar = (4.0 * dom.dx).max(0.1 * dom.l);
    dom.window(dom.l - collar)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `Σ_{|y|>r} P[i][j][x][y]` for one source point `x`.
pub fn tail_at(p: &KernelEstimate, r: f64, x: usize) -> Vec<Vec<f64>> {
    let m = p.m;
    // strict, with grid rounding absorbed
    let cut = r + 1e-9 * p.dom.dx;
    let tail: Vec<usize> = (0..p.dom.points()).filter(|&y| norm(&p.dom.point(y)) > cut).collect();
    let mut out = vec![vec![0.0; m]; m];
    for (i, row) in out.iter_mut().enumerate() {
        let data = p.row(x, i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = tail.iter().map(|&y| data[y * m + j]).sum();
        }
    }
    out
}

/// `sup_x Σ_{|y|>r} P[i][j][x][y]` over the inner window.
pub fn tail_mass(p: &KernelEstimate, r: f64) -> Result<Vec<Vec<f64>>> {
    if r >= p.dom.l {
        return Err(Error::Invalid(format!("tail radius {r} is not inside the box of half-width {}", p.dom.l)));
    }
    let m = p.m;
    let mut out = vec![vec![0.0f64; m]; m];
    for x in inner_window(&p.dom) {
        let t = tail_at(p, r, x);
        for i in 0..m {
            for j in 0..m {
                out[i][j] = out[i][j].max(t[i][j]);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub r: f64,
    pub i: usize,
    pub j: usize,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessProfile {
    pub rows: Vec<TailRow>,
}

impl TightnessProfile {
    /// `max_{ij}` tail at `(t, r)`.
    pub fn max_tail(&self, t: f64, r: f64) -> f64 {
        self.rows.iter().filter(|w| w.t == t && w.r == r).map(|w| w.tail).fold(0.0, f64::max)
    }

    /// Largest increase of `max_{ij}` tail between consecutive radii.
    pub fn monotonicity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut ts: Vec<f64> = self.rows.iter().map(|w| w.t).collect();
        ts.dedup();
        for t in ts {
            let mut rs: Vec<f64> = self.rows.iter().filter(|w| w.t == t).map(|w| w.r).collect();
            rs.sort_by(f64::total_cmp);
            rs.dedup();
            for w in rs.windows(2) {
                worst = worst.max(self.max_tail(t, w[1]) - self.max_tail(t, w[0]));
            }
        }
        worst
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "t,r,i,j,tail")?;
        for row in &self.rows {
            writeln!(w, "{},{},{},{},{}", row.t, row.r, row.i, row.j, row.tail)?;
        }
        Ok(())
    }
}

pub fn tightness_profile(
    model: &dyn CoefficientModel,
    dom: &DiscreteDomain,
    s: f64,
    t_list: &[f64],
    r_list: &[f64],
    cfg: &KernelConfig,
) -> Result<(TightnessProfile, Vec<KernelEstimate>)> {
    let kernels = estimate_kernels_at(model, dom, s, t_list, cfg)?;
    let mut rows = Vec::new();
    for p in &kernels {
        for &r in r_list {
            let tm = tail_mass(p, r)?;
            for (i, row) in tm.iter().enumerate() {
                for (j, &tail) in row.iter().enumerate() {
                    rows.push(TailRow { t: p.t, r, i, j, tail });
                }
            }
        }
    }
    Ok((TightnessProfile { rows }, kernels))
}

/// `inf_{|y|>r} φ`, taken over the grid tail and the sphere `|y| = r`.
pub fn tail_infimum(dom: &DiscreteDomain, phi: &dyn ScalarField, r: f64) -> f64 {
    let mut inf = (0..dom.points())
        .map(|p| dom.point(p))
        .filter(|y| norm(y) > r)
        .map(|y| phi.value(&y))
        .fold(f64::INFINITY, f64::min);
    let dirs: Vec<Vec<f64>> = match dom.d {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..720).map(|k| {
            let a = k as f64 * std::f64::consts::PI / 360.0;
            vec![a.cos(), a.sin()]
        }).collect(),
    };
    for u in dirs {
        let y: Vec<f64> = u.iter().map(|v| v * r).collect();
        inf = inf.min(phi.value(&y));
    }
    inf
}

/// The a-priori envelope `(φ(x) + a/c) / inf_{|y|>r} φ` at each grid point.
pub fn lyapunov_envelope(dom: &DiscreteDomain, phi: &dyn ScalarField, a: f64, c: f64, r: f64) -> Vec<f64> {
    let inf = tail_infimum(dom, phi, r);
    (0..dom.points()).map(|p| (phi.value(&dom.point(p)) + a / c) / inf).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    /// Distance from `x` to the complement (0 outside).
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Region::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                (radius - d).max(0.0)
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Region::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::Dimension(format!("box corners must have {dim} coordinates")));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Invalid("empty box".into()));
                }
            }
            Region::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::Dimension(format!("ball center must have {dim} coordinates")));
                }
                if !(*radius > 0.0) {
                    return Err(Error::Invalid("empty ball".into()));
                }
            }
        }
        Ok(())
    }
}

/// `θ_n = clamp(n · dist(x, complement), 0, 1)` on the grid.
pub fn smooth_indicator(dom: &DiscreteDomain, region: &Region, n: u32) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Invalid("smooth indicator needs n >= 1".into()));
    }
    region.validate(dom.d)?;
    Ok((0..dom.points()).map(|p| (n as f64 * region.depth(&dom.point(p))).clamp(0.0, 1.0)).collect())
}
