//! Growth of `G(t,s)` in L^p of the evolving invariant measures, and the
//! finite-rank projection error.

use parasys::coefficients::{AffineModel, SampleBox, Samples, ScalarField};
use parasys::discretization::{build_grid, Boundary, StateField};
use parasys::measures::{cesaro_measures, check_lp_mu_bound, check_projection_bound, MeasureConfig};
use parasys::solver::compute_kbar;

fn main() -> parasys::error::Result<()> {
    let mut model = AffineModel::new(1, 2, 1.0, 1.0);
    model.coupling = vec![vec![-1.0, 1.0], vec![0.5, -0.5]];
    let dom = build_grid(1, 6.0, 161, Boundary::Neumann)?;
    let ms = cesaro_measures(&model, &dom, &[0.0], 0, 2, 40.0, &MeasureConfig::new(1e-2))?;
    let k = compute_kbar(&model, &Samples::new(&SampleBox::cube(1, 6.0), &[0.0], 200, 0)?)?.k;
    let fs: Vec<StateField> = parasys::cli::default_battery(1)
        .iter()
        .map(|b| StateField::from_fn(dom, 2, 0.0, |kk, x| if kk == 0 { b.value(x) } else { -b.value(x) }))
        .collect::<Result<_, _>>()?;
    for p in [1.0, 2.0, 4.0] {
        let v = check_lp_mu_bound(&ms, &model, p, &fs, 0.0, 1.0, k)?;
        println!("p = {p}: ratio {:.3} ≤ {:.3}", v.measured, v.bound);
    }
    for eps in [0.2, 0.1, 0.05] {
        let v = check_projection_bound(&ms, &model, &fs, 0.0, 1.0, eps, 2.0)?;
        println!("ε = {eps}: projection deviation {:.3} ≤ {:.3}", v.measured, v.bound);
    }
    Ok(())
}
