//! Transition kernels of a confining power-law system: Chapman–Kolmogorov,
//! tail masses and the Lyapunov envelope.

use parasys::coefficients::{build_polynomial_model, Exponent, PolynomialSpec, Profile};
use parasys::discretization::{build_grid, Boundary};
use parasys::kernels::{estimate_kernels, estimate_kernels_at, tail_mass, tightness_profile, KernelConfig};
use parasys::solver::Scheme;

fn main() -> parasys::error::Result<()> {
    let spec = PolynomialSpec::uncoupled_ou(1, 2)
        .with_ell(Exponent::int(2))
        .with_sigma(vec![vec![Exponent::new(1, 2), Exponent::new(1, 4)], vec![Exponent::new(1, 4), Exponent::new(1, 2)]])
        .with_dmat(vec![vec![-2.0, 1.0], vec![1.0, -2.0]]);
    let model = build_polynomial_model(spec)?;
    let dom = build_grid(1, 3.0, 121, Boundary::Neumann)?;
    let cfg = KernelConfig { dt: 1e-2, scheme: Scheme::ImplicitEuler, upwind: true };

    let ps = estimate_kernels_at(&model, &dom, 0.0, &[0.3, 0.6], &cfg)?;
    let second = estimate_kernels(&model, &dom, 0.3, 0.6, &cfg)?;
    println!("Chapman–Kolmogorov defect: {:.2e}", ps[1].max_abs_diff(&second.compose(&ps[0])?));
    println!("smallest kernel entry: {:.2e}", ps[1].min_entry());

    let radii = [0.5, 1.0, 1.5, 2.0, 2.5];
    let (prof, _) = tightness_profile(&model, &dom, 0.0, &[0.3, 0.6], &radii, &cfg)?;
    for r in radii {
        println!("r = {r}: max tail {:.3e}", prof.max_tail(0.6, r));
    }
    println!("tail matrix at r = 1: {:?}", tail_mass(&ps[1], 1.0)?);
    let phi = Profile::lyapunov();
    let env = parasys::kernels::lyapunov_envelope(&dom, &phi, 4.0, 2.0, 1.0);
    println!("Lyapunov envelope at x = 0, r = 1 (a/c = 2): {:.3}", env[dom.nearest(&[0.0])]);
    Ok(())
}
