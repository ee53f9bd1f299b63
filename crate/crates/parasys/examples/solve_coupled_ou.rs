//! Two coupled Ornstein–Uhlenbeck components against the closed form
//! `u(t) = e^{tC} (T(t)f₁, T(t)f₂)`.
//!
//! ```text
//! cargo run --release --example solve_coupled_ou
//! ```

use parasys::coefficients::{AffineModel, CouplingGrowth};
use parasys::discretization::{build_grid, Boundary, StateField};
use parasys::kernels::inner_window;
use parasys::solver::{evolve, EvolveConfig, Scheme};

fn main() -> parasys::error::Result<()> {
    let model = AffineModel {
        d: 1,
        m: 2,
        q: 1.0,
        gamma: 1.0,
        coupling: vec![vec![-1.0, 1.0], vec![0.5, -0.5]],
        growth: CouplingGrowth::Constant,
    };
    let dom = build_grid(1, 8.0, 201, Boundary::Neumann)?;
    let f = StateField::from_fn(dom, 2, 0.0, |k, x| if k == 0 { (-x[0] * x[0] / 2.0).exp() } else { x[0].sin() })?;

    for scheme in [Scheme::ImplicitEuler, Scheme::Theta] {
        let cfg = EvolveConfig::new(0.0, 1.0, 5e-3, scheme).recording(vec![0.25, 0.5, 1.0]);
        for u in evolve(&model, &dom, &cfg, &f, false)? {
            let (mut err, mut scale) = (0.0f64, 0.0f64);
            for p in inner_window(&dom) {
                let want = oracle(u.t, dom.coord(p));
                for k in 0..2 {
                    err = err.max((u.get(k, p) - want[k]).abs());
                    scale = scale.max(want[k].abs());
                }
            }
            println!("{scheme:?} t = {:.2}: relative error {:.2e}", u.t, err / scale);
        }
    }
    Ok(())
}

fn oracle(t: f64, x: f64) -> [f64; 2] {
    let (mean, var) = ((-t).exp() * x, 1.0 - (-2.0 * t).exp());
    let g = (1.0 / (1.0 + var)).sqrt() * (-mean * mean / (2.0 * (1.0 + var))).exp();
    let s = mean.sin() * (-var / 2.0).exp();
    let d = (-1.5 * t).exp();
    [((1.0 + 2.0 * d) * g + (2.0 - 2.0 * d) * s) / 3.0, ((1.0 - d) * g + (2.0 + d) * s) / 3.0]
}
