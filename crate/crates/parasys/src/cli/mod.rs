//! Config-driven runner behind the `parasys` binary.
//!
//! Exit codes: 0 all requested properties hold, 1 a property or certificate
//! failed, 2 bad configuration, 3 numerical failure.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

pub use config::{
    hash, CheckSection, CompactnessSection, EvolveSection, ExhaustionSection, GridSection, KernelsSection, LyapunovSection,
    MeasuresSection, ModelSpec, RunConfig, VerifySection,
};

use crate::coefficients::{
    check_compactness_conditions, check_irreducibility, check_lyapunov, check_power_law_conditions, check_structural_hypotheses,
    fit_decay_profile, CoefficientModel, LyapunovMode, HypothesisReport, PowerLaw, Profile, Samples, ScalarField,
};
use crate::discretization::{build_grid, Boundary, DiscreteDomain, StateField};
use crate::error::{Error, Result};
use crate::kernels::{estimate_kernels_at, tightness_profile, KernelConfig};
use crate::measures::{cesaro_measures, integrate, invariance_residual};
use crate::solver::{compute_kbar, evolve, exhaustion_solve, EvolveConfig};
use crate::verify::{
    check_c0_behavior, check_gradient_bound, check_l2_estimate, check_lower_bound_c0, check_lp_estimate, check_lyapunov_bound,
    check_max_principle, check_ode_envelope, check_sup_estimate, compute_gamma, PropertyVerdict,
};

#[derive(Debug, Parser)]
#[command(name = "parasys", version, about = "Evolution operators of weakly coupled parabolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML or JSON).
    #[arg(long, global = true, default_value = "parasys.toml")]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed of the hypothesis sample set.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the coefficient hypotheses.
    Check,
    /// Solve the Cauchy problem (and the exhaustion ladder if configured).
    Solve,
    /// Estimate transition kernels.
    Kernels,
    /// Tail-mass table of the kernels.
    Tightness,
    /// Cesàro systems of invariant measures.
    Measures,
    /// Run estimate checks: `all` or a list of names.
    Verify {
        #[arg(default_value = "all")]
        checks: Vec<String>,
    },
}

pub const CHECKS: [&str; 9] = [
    "max_principle",
    "sup_estimate",
    "lyapunov_bound",
    "lower_bound_c0",
    "ode_envelope",
    "l2_estimate",
    "lp_estimate",
    "gradient_bound",
    "c0_behavior",
];

#[derive(Clone, Debug, Default, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub model: String,
    pub seed: u64,
    pub grid: Option<GridSection>,
    pub upwind: Option<bool>,
    pub operations: Vec<(String, f64)>,
    pub outputs: Vec<String>,
    pub notes: BTreeMap<String, serde_json::Value>,
    pub pass: bool,
}

/// One configured run: parsed config, built model and the output inventory.
pub struct Runner {
    pub cfg: RunConfig,
    pub model: Box<dyn CoefficientModel>,
    pub out: PathBuf,
    pub seed: u64,
    pub manifest: Manifest,
    certificates: Option<HypothesisReport>,
}

impl Runner {
    pub fn new(cfg: RunConfig, config_hash: String, out: &Path, seed: u64) -> Result<Self> {
        let model = cfg.model.build()?;
        if let Some(g) = &cfg.grid {
            if g.d != model.dim() {
                return Err(Error::Config(format!("grid dimension {} does not match model dimension {}", g.d, model.dim())));
            }
        }
        std::fs::create_dir_all(out)?;
        let manifest = Manifest {
            config_hash,
            model: cfg.model.summary(),
            seed,
            grid: cfg.grid.clone(),
            upwind: cfg.grid.as_ref().map(|g| g.upwind(model.as_ref())),
            ..Default::default()
        };
        Ok(Runner { cfg, model, out: out.to_path_buf(), seed, manifest, certificates: None })
    }

    pub fn from_path(path: &Path, out: &Path, seed: u64) -> Result<Self> {
        let (cfg, h) = RunConfig::load(path)?;
        Self::new(cfg, h, out, seed)
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let r = f(self);
        self.manifest.operations.push((name.to_string(), t0.elapsed().as_secs_f64()));
        r
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.manifest.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, v).map_err(|e| Error::Io(e.into()))?;
        w.flush()?;
        Ok(())
    }

    fn note(&mut self, key: &str, v: serde_json::Value) {
        self.manifest.notes.insert(key.to_string(), v);
    }

    pub fn samples(&self) -> Result<Samples> {
        self.cfg.samples(self.seed)
    }

    fn domain(&self) -> Result<DiscreteDomain> {
        self.cfg.grid()?.domain()
    }

    fn upwind(&self) -> Result<bool> {
        Ok(self.cfg.grid()?.upwind(self.model.as_ref()))
    }

    fn lyapunov_section(&self) -> LyapunovSection {
        self.cfg.check_section().lyapunov.unwrap_or_default()
    }

    fn decay_profiles(&self, comp: &CompactnessSection, samples: &Samples) -> Result<Vec<PowerLaw>> {
        let phi = self.lyapunov_section().phi;
        let h = fit_decay_profile(self.model.as_ref(), &phi, comp.exponent, samples)?;
        Ok(vec![h; self.model.components()])
    }

    /// Every certificate the configuration asks for; computed once per run.
    pub fn certificates(&mut self) -> Result<HypothesisReport> {
        if let Some(r) = &self.certificates {
            return Ok(r.clone());
        }
        let samples = self.samples()?;
        let model = self.model.as_ref();
        let chk = self.cfg.check_section();
        let mut rep = check_structural_hypotheses(model, &samples)?;
        if let Some(p) = model.as_polynomial() {
            rep.merge(&check_power_law_conditions(p.spec()));
        }
        // without a [check.lyapunov] section only the base hypothesis is checked
        let lyap = chk.lyapunov.clone().unwrap_or(LyapunovSection { mode: LyapunovMode::General, ..Default::default() });
        match check_lyapunov(model, &lyap.phi, lyap.mode, &samples) {
            Ok(r) => rep.merge(&r),
            Err(Error::Refused(_)) if chk.lyapunov.is_none() => {}
            Err(e) => return Err(e),
        }
        if let Some(comp) = &chk.compactness {
            let h = self.decay_profiles(comp, &samples)?;
            rep.merge(&check_compactness_conditions(model, &lyap.phi, &h, &comp.weights, comp.radius, comp.mu, &samples)?);
        }
        self.certificates = Some(rep.clone());
        Ok(rep)
    }

    fn require(&mut self, keys: &[&str], what: &str) -> Result<()> {
        let rep = self.certificates()?;
        let missing = rep.failures(keys.iter().copied());
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingCertificate(format!("{what} needs {}", missing.join(", "))))
        }
    }

    fn initial(&self) -> Result<Vec<Profile>> {
        self.cfg.evolve()?.initial(self.model.components(), self.model.dim())
    }

    fn initial_field(&self, dom: &DiscreteDomain, s: f64, sign: f64) -> Result<StateField> {
        let f = self.initial()?;
        StateField::from_fn(*dom, self.model.components(), s, |k, x| if sign < 0.0 { -f[k].value(x).abs() } else { f[k].value(x) })
    }

    pub fn run(&mut self, cmd: &Command) -> Result<bool> {
        self.manifest.command = match cmd {
            Command::Verify { checks } => format!("verify {}", checks.join(" ")),
            c => format!("{c:?}").to_lowercase(),
        };
        let pass = match cmd {
            Command::Check => self.timed("check", Self::cmd_check)?,
            Command::Solve => self.timed("solve", Self::cmd_solve)?,
            Command::Kernels => self.timed("kernels", Self::cmd_kernels)?,
            Command::Tightness => self.timed("tightness", Self::cmd_tightness)?,
            Command::Measures => self.timed("measures", Self::cmd_measures)?,
            Command::Verify { checks } => {
                let checks = checks.clone();
                self.timed("verify", |r| r.cmd_verify(&checks))?
            }
        };
        self.manifest.pass = pass;
        let m = self.manifest.clone();
        self.manifest.outputs.push("manifest.json".into());
        let mut all = m;
        all.outputs.push("manifest.json".into());
        let mut w = BufWriter::new(File::create(self.out.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &all).map_err(|e| Error::Io(e.into()))?;
        w.flush()?;
        Ok(pass)
    }

    pub fn cmd_check(&mut self) -> Result<bool> {
        let rep = self.certificates()?;
        let samples = self.samples()?;
        let irr = check_irreducibility(self.model.as_ref(), &samples);
        self.write_json("hypotheses.json", &json!({ "report": rep, "irreducibility": irr }))?;
        let require = self.cfg.check_section().require;
        let failures: Vec<String> = if require.is_empty() {
            rep.verdicts.iter().filter(|(_, v)| !v.status.passed()).map(|(k, _)| k.clone()).collect()
        } else {
            rep.failures(require.iter().map(String::as_str))
        };
        for name in &failures {
            let wit = rep.get(name).and_then(|v| v.witnesses.first().cloned());
            eprintln!("FAIL {name}: witness {}", serde_json::to_string(&wit).unwrap_or_default());
        }
        Ok(failures.is_empty())
    }

    pub fn cmd_solve(&mut self) -> Result<bool> {
        self.require(&["diffusion_symmetric", "ellipticity"], "solve")?;
        let dom = self.domain()?;
        let upwind = self.upwind()?;
        let ev = self.cfg.evolve()?.clone();
        let cfg = ev.config();
        let f = self.initial_field(&dom, cfg.s, 1.0)?;
        let recs = evolve(self.model.as_ref(), &dom, &cfg, &f, upwind)?;
        let mut w = self.create("trajectory.csv")?;
        for (i, r) in recs.iter().enumerate() {
            r.write_csv(&mut w, i == 0)?;
        }
        w.flush()?;
        let mut pass = true;
        if let Some(ex) = self.cfg.exhaustion.clone() {
            let profiles = self.initial()?;
            let fun = |k: usize, x: &[f64]| profiles[k].value(x);
            let rep = exhaustion_solve(self.model.as_ref(), &fun, &cfg, &ex.ladder, ex.inner_l, ex.tol, ex.bc, upwind)?;
            pass = rep.converged;
            self.write_json(
                "exhaustion.json",
                &json!({ "ladder": rep.ladder, "deltas": rep.deltas, "converged": rep.converged, "tol": rep.tol }),
            )?;
        }
        Ok(pass)
    }

    fn kernel_run(&mut self) -> Result<(KernelsSection, DiscreteDomain, KernelConfig)> {
        self.require(&["diffusion_symmetric", "ellipticity"], "kernel estimation")?;
        let ks = self.cfg.kernels.clone().ok_or_else(|| Error::Config("missing [kernels] section".into()))?;
        let dom = self.domain()?;
        let kc = KernelConfig { dt: ks.dt, scheme: ks.scheme, upwind: self.upwind()? };
        Ok((ks, dom, kc))
    }

    pub fn cmd_kernels(&mut self) -> Result<bool> {
        let (ks, dom, kc) = self.kernel_run()?;
        let ps = estimate_kernels_at(self.model.as_ref(), &dom, ks.s, &ks.times, &kc)?;
        let mut summary = Vec::new();
        for (i, p) in ps.iter().enumerate() {
            let name = format!("kernel_{i}.bin");
            let mut w = self.create(&name)?;
            p.write_binary(&mut w)?;
            w.flush()?;
            summary.push(json!({ "file": name, "s": p.s, "t": p.t, "clip_mass": p.clip_mass, "total_mass": p.total_mass,
                                 "flagged": p.flagged, "min_entry": p.min_entry() }));
        }
        self.write_json("kernels.json", &summary)?;
        Ok(ps.iter().all(|p| !p.flagged))
    }

    pub fn cmd_tightness(&mut self) -> Result<bool> {
        let (ks, dom, kc) = self.kernel_run()?;
        let radii = if ks.radii.is_empty() { vec![0.25 * dom.l, 0.5 * dom.l, 0.75 * dom.l] } else { ks.radii.clone() };
        let (prof, _) = tightness_profile(self.model.as_ref(), &dom, ks.s, &ks.times, &radii, &kc)?;
        let mut w = self.create("tightness.csv")?;
        prof.write_csv(&mut w)?;
        w.flush()?;
        let violation = prof.monotonicity_violation();
        self.note("monotonicity_violation", json!(violation));
        self.note("collar", json!(inner_collar(&dom)));
        Ok(violation <= 1e-12)
    }

    pub fn cmd_measures(&mut self) -> Result<bool> {
        self.require(&["lyapunov_dissipative"], "invariant measures")?;
        let ms_cfg = self.cfg.measures.clone().ok_or_else(|| Error::Config("missing [measures] section".into()))?;
        let dom = self.domain()?;
        let mc = ms_cfg.config(self.upwind()?);
        let x0 = if ms_cfg.x0.is_empty() { vec![0.0; dom.d] } else { ms_cfg.x0.clone() };
        let model = self.model.as_ref();
        let ms = cesaro_measures(model, &dom, &x0, ms_cfg.j, ms_cfg.n, ms_cfg.r, &mc)?;
        let battery = if ms_cfg.battery.is_empty() { default_battery(dom.d) } else { ms_cfg.battery.clone() };
        let mut residuals = Vec::new();
        let mut pass = ms.converged && !ms.trivial;
        if ms.times.len() >= 2 {
            let (s, t) = (ms.times[0], ms.times[1]);
            let mass = ms.total_mass(0);
            for (i, prof) in battery.iter().enumerate() {
                let f = StateField::from_fn(dom, ms.m, s, |_, x| prof.value(x))?;
                let res = invariance_residual(&ms, model, &f, s, t)?;
                let scale = integrate(&ms.masses[0], &vec![1.0; f.values.len()]).max(mass);
                pass &= res <= ms_cfg.tol * scale;
                residuals.push(json!({ "function": i, "residual": res, "mass": scale }));
            }
        }
        let mut w = self.create("measures.csv")?;
        ms.write_csv(&mut w)?;
        w.flush()?;
        self.write_json(
            "measures.json",
            &json!({ "anchor": ms.anchor, "component": ms.component, "horizon": ms.horizon, "tv_ladder": ms.tv_ladder,
                     "converged": ms.converged, "trivial": ms.trivial, "residuals": residuals,
                     "lattice": { "origin": mc.origin, "unit": mc.unit }, "tau_step": mc.dt * mc.tau_stride as f64 }),
        )?;
        if ms.trivial {
            eprintln!("Cesàro limit vanishes: supply a nontriviality certificate (A_j + c_jj) g >= 0");
        }
        Ok(pass)
    }

    pub fn cmd_verify(&mut self, names: &[String]) -> Result<bool> {
        let all = names.is_empty() || names.iter().any(|n| n == "all");
        let wanted: Vec<&str> = if all { CHECKS.to_vec() } else { names.iter().map(String::as_str).collect() };
        for n in &wanted {
            if !CHECKS.contains(n) {
                return Err(Error::Config(format!("unknown check `{n}`; known: {}", CHECKS.join(", "))));
            }
        }
        let mut verdicts = Vec::new();
        let mut skipped = BTreeMap::new();
        let mut c0_measured = None;
        for name in wanted {
            match self.run_check(name, &mut c0_measured) {
                Ok(vs) => verdicts.extend(vs),
                Err(e @ (Error::MissingCertificate(_) | Error::Refused(_))) if all => {
                    skipped.insert(name.to_string(), e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
        let mut w = self.create("verdicts.jsonl")?;
        for v in &verdicts {
            writeln!(w, "{}", v.json_line())?;
            println!("{}", v.json_line());
        }
        w.flush()?;
        for (k, why) in &skipped {
            eprintln!("skipped {k}: {why}");
        }
        self.note("skipped", json!(skipped));
        Ok(verdicts.iter().all(|v| v.pass))
    }

    fn run_check(&mut self, name: &str, c0_measured: &mut Option<f64>) -> Result<Vec<PropertyVerdict>> {
        let rep = self.certificates()?;
        let samples = self.samples()?;
        let dom = self.domain()?;
        let upwind = self.upwind()?;
        let cfg = self.cfg.evolve()?.config();
        let vs = self.cfg.verify.clone().unwrap_or_default();
        let model = self.model.as_ref();
        let m = model.components();
        let out = match name {
            "max_principle" => {
                let f = self.initial_field(&dom, cfg.s, -1.0)?;
                vec![check_max_principle(&evolve(model, &dom, &cfg, &f, upwind)?, &rep)?]
            }
            "sup_estimate" => {
                let kb = compute_kbar(model, &samples)?;
                let f = self.initial_field(&dom, cfg.s, 1.0)?;
                vec![check_sup_estimate(&evolve(model, &dom, &cfg, &f, upwind)?, &f, &kb)?]
            }
            "lyapunov_bound" => {
                let phi = self.lyapunov_section().phi;
                vec![check_lyapunov_bound(model, &dom, &cfg, &phi, &rep, upwind)?]
            }
            "lower_bound_c0" => {
                let v = check_lower_bound_c0(model, &dom, &cfg, &rep, upwind)?;
                *c0_measured = Some(v.measured);
                vec![v]
            }
            "ode_envelope" => {
                let comp = self.cfg.check_section().compactness.ok_or_else(|| {
                    Error::MissingCertificate("the ODE envelope needs a [check.compactness] section".into())
                })?;
                let c0 = match c0_measured {
                    Some(c) => *c,
                    None => check_lower_bound_c0(model, &dom, &cfg, &rep, upwind)?.measured,
                };
                let h = self.decay_profiles(&comp, &samples)?;
                let phi = self.lyapunov_section().phi;
                let mut out = Vec::new();
                for &delta in &vs.ode_deltas {
                    let c = EvolveConfig::new(cfg.s, cfg.s + delta, cfg.dt, cfg.scheme);
                    out.push(check_ode_envelope(self.model.as_ref(), &dom, &c, &phi, &h, c0, upwind)?.with_extra("delta", delta));
                }
                out
            }
            "l2_estimate" | "lp_estimate" => {
                let g = compute_gamma(model, [cfg.s, cfg.t_end], &samples)?;
                let dir = build_grid(dom.d, dom.l, dom.n, Boundary::Dirichlet)?;
                let mut f = self.initial_field(&dir, cfg.s, 1.0)?;
                f.zero_dirichlet_boundary();
                let recs = evolve(model, &dir, &cfg, &f, upwind)?;
                if name == "l2_estimate" {
                    vec![check_l2_estimate(&recs, &f, g.gamma)?]
                } else {
                    let kb = compute_kbar(model, &samples)?;
                    vs.p.iter().map(|&p| check_lp_estimate(&recs, &f, p, kb.k, g.gamma)).collect::<Result<_>>()?
                }
            }
            "gradient_bound" => {
                let kb = compute_kbar(model, &samples)?;
                let f = self.initial()?;
                let r = check_gradient_bound(model, &dom, &cfg, &f, &samples, kb.k, &vs.gradient, upwind)?;
                vec![r.verdict]
            }
            "c0_behavior" => {
                let mode = vs.c0.ok_or_else(|| Error::MissingCertificate("c0_behavior needs [verify.c0]".into()))?;
                vec![check_c0_behavior(model, &dom, &cfg, &mode, &samples, &rep, upwind)?]
            }
            other => return Err(Error::Config(format!("unknown check `{other}`"))),
        };
        let _ = m;
        Ok(out)
    }
}

fn inner_collar(dom: &DiscreteDomain) -> f64 {
    (4.0 * dom.dx).max(0.1 * dom.l)
}

/// Ten bounded test functions for the invariance residual.
pub fn default_battery(d: usize) -> Vec<Profile> {
    let z = vec![0.0; d];
    let mut one = vec![0.0; d];
    one[0] = 1.0;
    vec![
        Profile::constant(1.0),
        Profile::sine(0.5),
        Profile::sine(1.0),
        Profile::sine(2.0),
        Profile::Sine { amplitude: 1.0, freq: 1.0, axis: 0, phase: std::f64::consts::FRAC_PI_2 },
        Profile::gaussian(&z, 0.5, 1.0),
        Profile::gaussian(&z, 1.0, 1.0),
        Profile::gaussian(&one, 0.7, 1.0),
        Profile::Power { exponent: -1.0, scale: 1.0, shift: 0.0 },
        Profile::Power { exponent: -0.5, scale: 1.0, shift: 0.0 },
    ]
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(j) = cli.jobs {
        // a second build in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let result = Runner::from_path(&cli.config, &cli.out, cli.seed).and_then(|mut r| r.run(&cli.command));
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_has_ten_bounded_functions() {
        let b = default_battery(1);
        assert_eq!(b.len(), 10);
        for f in &b {
            for x in [-50.0, 0.0, 3.0, 1e6] {
                assert!(f.value(&[x]).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn unknown_check_is_a_config_error() {
        let cfg = RunConfig::parse("[model]\nkind = \"affine\"\nd = 1\nm = 1\nq = 1.0\n[grid]\nd = 1\nL = 3.0\nN = 31\n").unwrap();
        let dir = std::env::temp_dir().join(format!("parasys-cli-{}", std::process::id()));
        let mut r = Runner::new(cfg, "x".into(), &dir, 0).unwrap();
        assert!(matches!(r.cmd_verify(&["nope".into()]), Err(Error::Config(_))));
        let _ = std::fs::remove_dir_all(dir);
    }
}
