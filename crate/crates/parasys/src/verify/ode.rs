//! Scalar comparison ODE `y' = -c₀ h(y)` integrated with an adaptive
//! Dormand–Prince 5(4) pair.

use crate::error::{Error, Result};

pub const ODE_RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-14;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// `y(b)` for `y' = -c₀ h(y)`, `y(0) = y0`. The state is kept nonnegative.
pub fn ode_comparison_envelope(h: &dyn Fn(f64) -> f64, c0: f64, y0: f64, b: f64) -> Result<f64> {
    if !(b >= 0.0) || !y0.is_finite() {
        return Err(Error::Invalid(format!("bad comparison ODE input y0 = {y0}, b = {b}")));
    }
    let f = |y: f64| -c0 * h(y.max(0.0));
    let mut t = 0.0;
    let mut y = y0;
    let mut dt = (b / 100.0).max(1e-12);
    let mut steps = 0usize;
    while t < b {
        if steps > 1_000_000 {
            return Err(Error::Solve { t, msg: "comparison ODE needs too many steps".into() });
        }
        steps += 1;
        dt = dt.min(b - t);
        let mut k = [0.0; 7];
        for s in 0..7 {
            let ys = y + dt * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            k[s] = f(ys);
        }
        let y5 = y + dt * (0..7).map(|s| B5[s] * k[s]).sum::<f64>();
        let y4 = y + dt * (0..7).map(|s| B4[s] * k[s]).sum::<f64>();
        if !y5.is_finite() {
            return Err(Error::NonFinite { t });
        }
        let scale = ATOL + ODE_RTOL * y.abs().max(y5.abs());
        let err = (y5 - y4).abs() / scale;
        if err <= 1.0 {
            t += dt;
            y = y5.max(0.0);
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        dt *= fac;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay_is_exponential() {
        let y = ode_comparison_envelope(&|y| y, 1.0, 1.0, 1.0).unwrap();
        assert!((y - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn quadratic_decay_matches_closed_form() {
        for (c0, y0, b) in [(1.0, 1.0, 1.0), (0.3, 50.0, 2.0), (2.0, 0.1, 5.0)] {
            let y = ode_comparison_envelope(&|y| y * y, c0, y0, b).unwrap();
            let exact = 1.0 / (1.0 / y0 + c0 * b);
            assert!((y - exact).abs() <= 1e-8 * exact, "{y} vs {exact}");
        }
    }

    #[test]
    fn zero_horizon_is_identity() {
        assert_eq!(ode_comparison_envelope(&|y| y, 1.0, 3.0, 0.0).unwrap(), 3.0);
    }
}
