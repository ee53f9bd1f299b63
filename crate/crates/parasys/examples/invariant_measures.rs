//! Cesàro averages of the transition kernels of an Ornstein–Uhlenbeck
//! operator converge to its Gaussian invariant law.

use parasys::coefficients::AffineModel;
use parasys::discretization::{build_grid, Boundary};
use parasys::measures::{cesaro_measures, MeasureConfig};

fn main() -> parasys::error::Result<()> {
    // (1/2) u'' - x u' has invariant law N(0, 1/2)
    let model = AffineModel::ornstein_uhlenbeck(1, 0.5, 1.0);
    let dom = build_grid(1, 5.0, 201, Boundary::Neumann)?;
    for r in [5.0, 10.0, 20.0, 40.0] {
        let ms = cesaro_measures(&model, &dom, &[0.0], 0, 1, r, &MeasureConfig::new(5e-3))?;
        let mu = &ms.masses[0];
        let mean: f64 = (0..dom.points()).map(|p| mu[p] * dom.coord(p)).sum();
        let var: f64 = (0..dom.points()).map(|p| mu[p] * (dom.coord(p) - mean).powi(2)).sum();
        println!(
            "r = {r:>4}: mass {:.6}, mean {mean:+.2e}, variance {var:.4}, half-window TV {:.2e}, converged {}",
            ms.total_mass(0),
            ms.tv_ladder[0].1,
            ms.converged
        );
    }
    Ok(())
}
