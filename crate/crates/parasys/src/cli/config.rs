//! Run configuration: one TOML (or JSON) file, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::{
    build_polynomial_model, AffineModel, CoefficientModel, LyapunovMode, PolynomialSpec, Profile, SampleBox, Samples,
};
use crate::discretization::{build_grid, default_upwind, Boundary, DiscreteDomain};
use crate::error::{Error, Result};
use crate::measures::MeasureConfig;
use crate::solver::{EvolveConfig, Scheme};
use crate::verify::{C0Mode, GradientOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Affine(AffineModel),
    Polynomial(PolynomialSpec),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn CoefficientModel>> {
        match self {
            ModelSpec::Affine(a) => {
                a.validate()?;
                Ok(Box::new(a.clone()))
            }
            ModelSpec::Polynomial(p) => Ok(Box::new(build_polynomial_model(p.clone())?)),
        }
    }

    pub fn summary(&self) -> String {
        match self {
            ModelSpec::Affine(a) => format!("affine d={} m={} q={} gamma={} growth={:?}", a.d, a.m, a.q, a.gamma, a.growth),
            ModelSpec::Polynomial(p) => format!("polynomial d={} m={} interval={:?}", p.d, p.m, p.interval),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "neumann")]
    pub bc: Boundary,
    /// Defaults to upwinding for superlinear power-law drifts.
    #[serde(default)]
    pub upwind: Option<bool>,
}

fn neumann() -> Boundary {
    Boundary::Neumann
}

impl GridSection {
    pub fn domain(&self) -> Result<DiscreteDomain> {
        build_grid(self.d, self.l, self.n, self.bc).map_err(config_error)
    }
    pub fn upwind(&self, model: &dyn CoefficientModel) -> bool {
        self.upwind.unwrap_or_else(|| default_upwind(model))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub s: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "euler")]
    pub scheme: Scheme,
    /// Record times; defaults to `t_end` only.
    #[serde(default)]
    pub record: Vec<f64>,
    /// One profile per component, or a single profile used for all.
    #[serde(default)]
    pub initial: Vec<Profile>,
}

fn euler() -> Scheme {
    Scheme::ImplicitEuler
}

impl EvolveSection {
    pub fn config(&self) -> EvolveConfig {
        let cfg = EvolveConfig::new(self.s, self.t_end, self.dt, self.scheme);
        if self.record.is_empty() {
            cfg
        } else {
            cfg.recording(self.record.clone())
        }
    }

    pub fn initial(&self, m: usize, d: usize) -> Result<Vec<Profile>> {
        match self.initial.len() {
            0 => Ok(vec![Profile::gaussian(&vec![0.0; d], 1.0, 1.0); m]),
            1 => Ok(vec![self.initial[0].clone(); m]),
            n if n == m => Ok(self.initial.clone()),
            n => Err(Error::Config(format!("evolve.initial has {n} profiles, model has {m} components"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionSection {
    /// `[L, N]` rungs with a common spacing.
    pub ladder: Vec<(f64, usize)>,
    pub inner_l: f64,
    #[serde(default = "exhaustion_tol")]
    pub tol: f64,
    #[serde(default = "dirichlet")]
    pub bc: Boundary,
}

fn exhaustion_tol() -> f64 {
    1e-4
}
fn dirichlet() -> Boundary {
    Boundary::Dirichlet
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsSection {
    pub s: f64,
    pub times: Vec<f64>,
    pub dt: f64,
    #[serde(default = "euler")]
    pub scheme: Scheme,
    /// Radii for the tightness table.
    #[serde(default)]
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuresSection {
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default)]
    pub j: usize,
    /// Last lattice time.
    #[serde(default = "one_usize")]
    pub n: usize,
    /// Horizon in lattice units.
    pub r: f64,
    pub dt: f64,
    #[serde(default = "euler")]
    pub scheme: Scheme,
    #[serde(default = "four")]
    pub tau_stride: usize,
    #[serde(default = "measure_tol")]
    pub tol: f64,
    #[serde(default)]
    pub origin: f64,
    #[serde(default = "unit")]
    pub unit: f64,
    /// Test functions for the invariance residual; a default battery otherwise.
    #[serde(default)]
    pub battery: Vec<Profile>,
}

fn one_usize() -> usize {
    1
}
fn four() -> usize {
    4
}
fn measure_tol() -> f64 {
    1e-2
}
fn unit() -> f64 {
    1.0
}

impl MeasuresSection {
    pub fn config(&self, upwind: bool) -> MeasureConfig {
        MeasureConfig {
            dt: self.dt,
            scheme: self.scheme,
            upwind,
            tau_stride: self.tau_stride,
            tol: self.tol,
            origin: self.origin,
            unit: self.unit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    #[serde(default = "Profile::lyapunov")]
    pub phi: Profile,
    #[serde(default = "dissipative")]
    pub mode: LyapunovMode,
}

fn dissipative() -> LyapunovMode {
    LyapunovMode::Dissipative
}

impl Default for LyapunovSection {
    fn default() -> Self {
        LyapunovSection { phi: Profile::lyapunov(), mode: LyapunovMode::Dissipative }
    }
}

/// Data for the compactness certificate: decay profile `h(y) = c1 y^exponent − c2`
/// fitted per run, lower weights `w_k`, radius and `μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactnessSection {
    pub exponent: f64,
    pub weights: Vec<Profile>,
    pub radius: f64,
    #[serde(default)]
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Half-width of the sample box; defaults to the grid half-width, else 5.
    #[serde(default)]
    pub half: Option<f64>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub lyapunov: Option<LyapunovSection>,
    #[serde(default)]
    pub compactness: Option<CompactnessSection>,
    /// Verdict names that decide the exit code; all computed verdicts when empty.
    #[serde(default)]
    pub require: Vec<String>,
}

fn n_samples() -> usize {
    400
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { half: None, times: Vec::new(), n_samples: n_samples(), lyapunov: None, compactness: None, require: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Checks to run; all applicable ones when empty.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_ps")]
    pub p: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub ode_deltas: Vec<f64>,
    #[serde(default)]
    pub gradient: GradientOptions,
    #[serde(default)]
    pub c0: Option<C0Mode>,
}

fn default_ps() -> Vec<f64> {
    vec![2.0, 4.0]
}
fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { checks: Vec::new(), p: default_ps(), ode_deltas: default_deltas(), gradient: GradientOptions::default(), c0: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub check: Option<CheckSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub evolve: Option<EvolveSection>,
    #[serde(default)]
    pub exhaustion: Option<ExhaustionSection>,
    #[serde(default)]
    pub kernels: Option<KernelsSection>,
    #[serde(default)]
    pub measures: Option<MeasuresSection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Invalid(s) | Error::Dimension(s) => Error::Config(s),
        other => other,
    }
}

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, hash(&text)))
    }

    pub fn grid(&self) -> Result<&GridSection> {
        self.grid.as_ref().ok_or_else(|| Error::Config("missing [grid] section".into()))
    }

    pub fn evolve(&self) -> Result<&EvolveSection> {
        self.evolve.as_ref().ok_or_else(|| Error::Config("missing [evolve] section".into()))
    }

    pub fn check_section(&self) -> CheckSection {
        self.check.clone().unwrap_or_default()
    }

    /// Sample set used by every certificate of the run.
    pub fn samples(&self, seed: u64) -> Result<Samples> {
        let chk = self.check_section();
        let d = match &self.model {
            ModelSpec::Affine(a) => a.d,
            ModelSpec::Polynomial(p) => p.d,
        };
        let half = chk.half.or(self.grid.as_ref().map(|g| g.l)).unwrap_or(5.0);
        let times = if !chk.times.is_empty() {
            chk.times.clone()
        } else if let ModelSpec::Polynomial(p) = &self.model {
            Samples::times_on(p.interval[0], p.interval[1], 5)
        } else if let Some(e) = &self.evolve {
            Samples::times_on(e.s, e.t_end, 3)
        } else {
            vec![0.0]
        };
        Samples::new(&SampleBox::cube(d, half), &times, chk.n_samples, seed).map_err(config_error)
    }
}

/// Hex SHA-256 of the config text.
pub fn hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok = "[model]\nkind = \"affine\"\nd = 1\nm = 1\nq = 1.0\n";
        assert!(RunConfig::parse(ok).is_ok());
        assert!(RunConfig::parse(&format!("{ok}bogus = 2\n")).is_err());
        assert!(RunConfig::parse(&format!("{ok}[grid]\nd = 1\nL = 2.0\nN = 11\nextra = 1\n")).is_err());
        assert!(RunConfig::parse("[model]\n").is_err());
    }

    #[test]
    fn json_is_accepted() {
        let c = RunConfig::parse(r#"{"model": {"kind": "affine", "d": 1, "m": 2, "q": 1.0}}"#).unwrap();
        assert_eq!(c.model.build().unwrap().components(), 2);
    }
}
