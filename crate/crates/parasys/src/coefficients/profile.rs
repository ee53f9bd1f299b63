//! Scalar test functions with exact first and second derivatives.

use serde::{Deserialize, Serialize};

/// A C² scalar function on ℝ^d with exact derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes ∇f(x) into `g` (length d).
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Writes D²f(x) row-major into `h` (length d·d).
    fn hessian(&self, x: &[f64], h: &mut [f64]);
}

fn one() -> f64 {
    1.0
}

/// Closed-form profiles used as Lyapunov functions, initial data and test
/// functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `shift + scale·(1+|x|²)^exponent`
    Power {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `amplitude·sin(freq·x[axis] + phase)`
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default)]
        phase: f64,
    },
    /// `height·exp(-|x-center|²/(2 width²))`
    Gaussian {
        #[serde(default = "one")]
        height: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `x[axis]`
    Coordinate {
        #[serde(default)]
        axis: usize,
    },
}

impl Profile {
    /// `1 + |x|²`, the standard Lyapunov function.
    pub fn lyapunov() -> Self {
        Profile::Power { exponent: 1.0, scale: 1.0, shift: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn gaussian(center: &[f64], width: f64, height: f64) -> Self {
        Profile::Gaussian { height, center: center.to_vec(), width }
    }

    pub fn sine(freq: f64) -> Self {
        Profile::Sine { amplitude: 1.0, freq, axis: 0, phase: 0.0 }
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl ScalarField for Profile {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Power { exponent, scale, shift } => {
                shift + scale * (1.0 + norm_sq(x)).powf(*exponent)
            }
            Profile::Sine { amplitude, freq, axis, phase } => {
                amplitude * (freq * x[*axis] + phase).sin()
            }
            Profile::Gaussian { height, center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                height * (-r2 / (2.0 * width * width)).exp()
            }
            Profile::Coordinate { axis } => x[*axis],
        }
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Profile::Constant { .. } => {}
            Profile::Power { exponent: p, scale, .. } => {
                let r = 1.0 + norm_sq(x);
                let f = scale * 2.0 * p * r.powf(p - 1.0);
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = f * xi;
                }
            }
            Profile::Sine { amplitude, freq, axis, phase } => {
                g[*axis] = amplitude * freq * (freq * x[*axis] + phase).cos();
            }
            Profile::Gaussian { width, center, .. } => {
                let v = self.value(x);
                for i in 0..x.len() {
                    g[i] = -v * (x[i] - center[i]) / (width * width);
                }
            }
            Profile::Coordinate { axis } => g[*axis] = 1.0,
        }
    }

    fn hessian(&self, x: &[f64], h: &mut [f64]) {
        let d = x.len();
        h.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Profile::Constant { .. } | Profile::Coordinate { .. } => {}
            Profile::Power { exponent: p, scale, .. } => {
                let r = 1.0 + norm_sq(x);
                let a = scale * 2.0 * p * r.powf(p - 1.0);
                let b = scale * 4.0 * p * (p - 1.0) * r.powf(p - 2.0);
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = b * x[i] * x[j] + if i == j { a } else { 0.0 };
                    }
                }
            }
            Profile::Sine { amplitude, freq, axis, phase } => {
                h[axis * d + axis] = -amplitude * freq * freq * (freq * x[*axis] + phase).sin();
            }
            Profile::Gaussian { width, center, .. } => {
                let v = self.value(x);
                let w2 = width * width;
                for i in 0..d {
                    for j in 0..d {
                        let yi = x[i] - center[i];
                        let yj = x[j] - center[j];
                        h[i * d + j] = v * (yi * yj / (w2 * w2) - if i == j { 1.0 / w2 } else { 0.0 });
                    }
                }
            }
        }
    }
}

/// A vector-valued function, one scalar profile per component.
pub type VectorField = Vec<Profile>;

/// `profile` in every one of `m` components.
pub fn replicate(profile: Profile, m: usize) -> VectorField {
    vec![profile; m]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(p: &Profile, x: &[f64]) {
        let d = x.len();
        let h = 1e-5;
        let mut g = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        p.gradient(x, &mut g);
        p.hessian(x, &mut hess);
        for i in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{p:?} grad {i}");
            let mut gp = vec![0.0; d];
            let mut gm = vec![0.0; d];
            p.gradient(&xp, &mut gp);
            p.gradient(&xm, &mut gm);
            for j in 0..d {
                let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                assert!((fd2 - hess[j * d + i]).abs() < 1e-5 * (1.0 + fd2.abs()), "{p:?} hess {i}{j}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let profiles = [
            Profile::lyapunov(),
            Profile::Power { exponent: -1.0, scale: 2.0, shift: 1.0 },
            Profile::Power { exponent: 0.5, scale: 1.0, shift: 0.0 },
            Profile::Sine { amplitude: 0.7, freq: 1.3, axis: 1, phase: 0.2 },
            Profile::gaussian(&[0.3, -0.2], 0.8, 1.5),
            Profile::Coordinate { axis: 0 },
        ];
        for p in &profiles {
            check_derivatives(p, &[0.4, -1.1]);
            check_derivatives(p, &[-2.0, 0.5]);
        }
    }

    #[test]
    fn config_round_trip() {
        let p: Profile = toml::from_str("kind = \"power\"\nexponent = 1.0").unwrap();
        assert_eq!(p, Profile::lyapunov());
        assert!(toml::from_str::<Profile>("kind = \"power\"\nexponent = 1.0\nbogus = 2").is_err());
    }
}
