//! Run configuration: an INI-like text format with sections
//! `[grid] [time] [model] [cost] [bounds] [optimizer] [run]`, `key = value`
//! pairs, `#` comments, UTF-8. Parsing validates everything and reports the
//! complete list of violations with key paths and line numbers, not just the
//! first. `parse(serialize(config))` reproduces the config exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bch_core::field::{BcMode, Grid, TimeGrid};
use bch_core::model::{BoxBounds, LambdaProfile, ModelParams, Potential, SourceProfile};
use bch_core::optim::OptimizerConfig;

use crate::error::{CliError, Violation};

/// Named analytic profile or a file reference for fields.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Constant(f64),
    /// `amp * prod_a cos(2 pi k x_a / L_a)`
    Cosine { amp: f64, k: f64 },
    /// two opposite Gaussian bumps at 1/4 and 3/4 of the domain
    TwoBump { amp: f64, width: f64 },
    File(PathBuf),
}

impl TargetSpec {
    fn parse(s: &str) -> Result<TargetSpec, String> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (s.trim(), ""),
        };
        let nums = |rest: &str, n: usize| -> Result<Vec<f64>, String> {
            let parts: Vec<&str> = rest.split(',').map(|p| p.trim()).collect();
            if parts.len() != n {
                return Err(format!("expected {n} numeric parameter(s)"));
            }
            parts
                .iter()
                .map(|p| p.parse::<f64>().map_err(|_| format!("bad number '{p}'")))
                .collect()
        };
        match kind {
            "constant" => Ok(TargetSpec::Constant(nums(rest, 1)?[0])),
            "cosine" => {
                let v = nums(rest, 2)?;
                Ok(TargetSpec::Cosine { amp: v[0], k: v[1] })
            }
            "two-bump" => {
                let v = nums(rest, 2)?;
                Ok(TargetSpec::TwoBump {
                    amp: v[0],
                    width: v[1],
                })
            }
            "file" => {
                if rest.is_empty() {
                    Err("file target needs a path".into())
                } else {
                    Ok(TargetSpec::File(PathBuf::from(rest)))
                }
            }
            other => Err(format!(
                "unknown profile '{other}' (expected constant, cosine, two-bump, or file)"
            )),
        }
    }

    fn serialize(&self) -> String {
        match self {
            TargetSpec::Constant(c) => format!("constant:{c}"),
            TargetSpec::Cosine { amp, k } => format!("cosine:{amp},{k}"),
            TargetSpec::TwoBump { amp, width } => format!("two-bump:{amp},{width}"),
            TargetSpec::File(p) => format!("file:{}", p.display()),
        }
    }
}

/// Execution mode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Optimize,
    GradCheck,
    TaylorTest,
    SparsitySweep,
    VerifyAll,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode, String> {
        match s {
            "forward" => Ok(Mode::Forward),
            "optimize" => Ok(Mode::Optimize),
            "grad-check" => Ok(Mode::GradCheck),
            "taylor-test" => Ok(Mode::TaylorTest),
            "sparsity-sweep" => Ok(Mode::SparsitySweep),
            "verify-all" => Ok(Mode::VerifyAll),
            other => Err(format!("unknown mode '{other}'")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Optimize => "optimize",
            Mode::GradCheck => "grad-check",
            Mode::TaylorTest => "taylor-test",
            Mode::SparsitySweep => "sparsity-sweep",
            Mode::VerifyAll => "verify-all",
        }
    }
}

/// Sparsity-sweep grid: explicit values or `auto:<count>` calibrated from
/// the adjoint at zero control.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaGrid {
    Auto(usize),
    Explicit(Vec<f64>),
}

/// Cost weights and targets as configured (targets unrealized).
#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub kappa: Vec<f64>,
    pub phi_q: TargetSpec,
    pub phi_omega: TargetSpec,
}

/// Run-section settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub mode: Mode,
    pub phi0: TargetSpec,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub directions: usize,
    pub fd_step: f64,
    pub taylor_scales: Vec<f64>,
    pub kappa_grid: KappaGrid,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub time: TimeGrid,
    pub params: ModelParams,
    pub potential: Potential,
    pub cost: CostConfig,
    pub bounds: BoxBounds,
    pub optimizer: OptimizerConfig,
    pub run: RunSection,
}

const SECTIONS: &[&str] = &["grid", "time", "model", "cost", "bounds", "optimizer", "run"];

struct Raw {
    entries: BTreeMap<(String, String), (String, usize)>,
}

fn parse_raw(text: &str, violations: &mut Vec<Violation>) -> Raw {
    let mut entries = BTreeMap::new();
    let mut section = String::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if let Some(name) = stripped.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                violations.push(Violation {
                    section: name.clone(),
                    key: String::new(),
                    line: Some(line_no),
                    message: "unknown section".into(),
                });
            }
            section = name;
            continue;
        }
        match stripped.split_once('=') {
            Some((k, v)) => {
                if section.is_empty() {
                    violations.push(Violation {
                        section: String::new(),
                        key: k.trim().into(),
                        line: Some(line_no),
                        message: "key before any [section]".into(),
                    });
                    continue;
                }
                entries.insert(
                    (section.clone(), k.trim().to_string()),
                    (v.trim().to_string(), line_no),
                );
            }
            None => violations.push(Violation {
                section: section.clone(),
                key: String::new(),
                line: Some(line_no),
                message: format!("expected 'key = value', got '{stripped}'"),
            }),
        }
    }
    Raw { entries }
}

struct Extract<'a> {
    raw: &'a Raw,
    violations: Vec<Violation>,
    consumed: BTreeSet<(String, String)>,
}

impl<'a> Extract<'a> {
    fn get(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let k = (section.to_string(), key.to_string());
        self.consumed.insert(k.clone());
        self.raw.entries.get(&k).cloned()
    }

    fn violation(&mut self, section: &str, key: &str, line: Option<usize>, message: String) {
        self.violations.push(Violation {
            section: section.into(),
            key: key.into(),
            line,
            message,
        });
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> (f64, Option<usize>) {
        match self.get(section, key) {
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) => (x, Some(line)),
                Err(_) => {
                    self.violation(section, key, Some(line), format!("not a number: '{v}'"));
                    (default, Some(line))
                }
            },
            None => (default, None),
        }
    }

    fn usize_or(&mut self, section: &str, key: &str, default: usize) -> (usize, Option<usize>) {
        match self.get(section, key) {
            Some((v, line)) => match v.parse::<usize>() {
                Ok(x) => (x, Some(line)),
                Err(_) => {
                    self.violation(section, key, Some(line), format!("not an integer: '{v}'"));
                    (default, Some(line))
                }
            },
            None => (default, None),
        }
    }

    fn u64_or(&mut self, section: &str, key: &str, default: u64) -> u64 {
        match self.get(section, key) {
            Some((v, line)) => match v.parse::<u64>() {
                Ok(x) => x,
                Err(_) => {
                    self.violation(section, key, Some(line), format!("not an integer: '{v}'"));
                    default
                }
            },
            None => default,
        }
    }

    fn list_f64(&mut self, section: &str, key: &str, default: Vec<f64>) -> (Vec<f64>, Option<usize>) {
        match self.get(section, key) {
            Some((v, line)) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    match part.trim().parse::<f64>() {
                        Ok(x) => out.push(x),
                        Err(_) => {
                            self.violation(
                                section,
                                key,
                                Some(line),
                                format!("not a number: '{}'", part.trim()),
                            );
                            return (default, Some(line));
                        }
                    }
                }
                (out, Some(line))
            }
            None => (default, None),
        }
    }

    fn list_usize(&mut self, section: &str, key: &str) -> Option<(Vec<usize>, usize)> {
        match self.get(section, key) {
            Some((v, line)) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    match part.trim().parse::<usize>() {
                        Ok(x) => out.push(x),
                        Err(_) => {
                            self.violation(
                                section,
                                key,
                                Some(line),
                                format!("not an integer: '{}'", part.trim()),
                            );
                            return None;
                        }
                    }
                }
                Some((out, line))
            }
            None => None,
        }
    }

    fn string_or(&mut self, section: &str, key: &str, default: &str) -> (String, Option<usize>) {
        match self.get(section, key) {
            Some((v, line)) => (v, Some(line)),
            None => (default.to_string(), None),
        }
    }

    fn target_or(&mut self, section: &str, key: &str, default: TargetSpec) -> TargetSpec {
        match self.get(section, key) {
            Some((v, line)) => match TargetSpec::parse(&v) {
                Ok(t) => t,
                Err(msg) => {
                    self.violation(section, key, Some(line), msg);
                    default
                }
            },
            None => default,
        }
    }
}

/// Parse and fully validate a configuration from text. Collects every
/// violation instead of stopping at the first.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, CliError> {
    let mut violations = Vec::new();
    let raw = parse_raw(text, &mut violations);
    let mut ex = Extract {
        raw: &raw,
        violations,
        consumed: BTreeSet::new(),
    };

    // [grid]
    let (dim, dim_line) = ex.usize_or("grid", "dim", 2);
    if dim != 1 && dim != 2 {
        ex.violation("grid", "dim", dim_line, "dim must be 1 or 2".into());
    }
    let d = if dim == 1 { 1 } else { 2 };
    let (n, n_line) = match ex.list_usize("grid", "n") {
        Some((n, line)) => (n, Some(line)),
        None => (vec![16; d], None),
    };
    let n = if n.len() == 1 && d == 2 {
        vec![n[0], n[0]]
    } else {
        n
    };
    if n.len() != d {
        ex.violation(
            "grid",
            "n",
            n_line,
            format!("expected {d} entries, got {}", n.len()),
        );
    }
    for (i, &na) in n.iter().enumerate() {
        if na < 4 {
            ex.violation("grid", "n", n_line, format!("axis {i} needs at least 4 cells"));
        }
    }
    let (length, len_line) = ex.list_f64("grid", "length", vec![1.0; d]);
    let length = if length.len() == 1 && d == 2 {
        vec![length[0], length[0]]
    } else {
        length
    };
    if length.len() != d {
        ex.violation(
            "grid",
            "length",
            len_line,
            format!("expected {d} entries, got {}", length.len()),
        );
    }
    for &l in &length {
        if !(l > 0.0) {
            ex.violation("grid", "length", len_line, "extents must be positive".into());
        }
    }
    let (bc_str, bc_line) = ex.string_or("grid", "bc", "box-neumann");
    let bc = match bc_str.as_str() {
        "periodic" => BcMode::Periodic,
        "box-neumann" => BcMode::BoxNeumann,
        other => {
            ex.violation(
                "grid",
                "bc",
                bc_line,
                format!("unknown bc '{other}' (periodic or box-neumann)"),
            );
            BcMode::BoxNeumann
        }
    };

    // [time]
    let (t_final, t_line) = ex.f64_or("time", "t_final", 0.1);
    if !(t_final > 0.0) {
        ex.violation("time", "t_final", t_line, "t_final must be positive".into());
    }
    let (steps, steps_line) = ex.usize_or("time", "steps", 10);
    if steps == 0 {
        ex.violation("time", "steps", steps_line, "steps must be at least 1".into());
    }

    // [model]
    let (eps, eps_line) = ex.f64_or("model", "eps", 1.0);
    if !(eps > 0.0) {
        ex.violation("model", "eps", eps_line, "eps must be positive".into());
    }
    let (mobility, mob_line) = ex.f64_or("model", "mobility", 1.0);
    if !(mobility > 0.0) {
        ex.violation("model", "mobility", mob_line, "mobility must be positive".into());
    }
    let (eta0, eta_line) = ex.f64_or("model", "eta0", 1.0);
    if !(eta0 > 0.0) {
        ex.violation("model", "eta0", eta_line, "eta0 must be positive".into());
    }
    let (nu, _) = ex.f64_or("model", "nu", 0.0);
    let (sigma, _) = ex.f64_or("model", "sigma", 0.0);
    let (lambda_lo, llo_line) = ex.f64_or("model", "lambda_lo", 1.0);
    let (lambda_hi, lhi_line) = ex.f64_or("model", "lambda_hi", 1.0);
    if !(lambda_lo > 0.0) {
        ex.violation(
            "model",
            "lambda_lo",
            llo_line,
            "drag bounds must satisfy 0 < lambda_lo".into(),
        );
    }
    if lambda_lo > lambda_hi {
        ex.violation(
            "model",
            "lambda_hi",
            lhi_line,
            "need lambda_lo <= lambda_hi".into(),
        );
    }
    let (profile_str, prof_line) = ex.string_or("model", "lambda_profile", "constant");
    let lambda_profile = match profile_str.as_str() {
        "constant" => LambdaProfile::Constant,
        "smooth-bounded" => LambdaProfile::SmoothBounded,
        other => {
            ex.violation(
                "model",
                "lambda_profile",
                prof_line,
                format!("unknown profile '{other}' (constant or smooth-bounded)"),
            );
            LambdaProfile::Constant
        }
    };
    let (h_str, h_line) = ex.string_or("model", "h_source", "zero");
    let (h_amp, _) = ex.f64_or("model", "h_amplitude", 1.0);
    let h_source = match h_str.as_str() {
        "zero" => SourceProfile::Zero,
        "tanh" => SourceProfile::Tanh { amplitude: h_amp },
        other => {
            ex.violation(
                "model",
                "h_source",
                h_line,
                format!("unknown source '{other}' (zero or tanh)"),
            );
            SourceProfile::Zero
        }
    };
    let (potential_str, pot_line) = ex.string_or("model", "potential", "quartic");
    let potential = match potential_str.as_str() {
        "quartic" => Potential::Quartic,
        other => {
            ex.violation(
                "model",
                "potential",
                pot_line,
                format!("unknown potential '{other}' (only quartic is provided)"),
            );
            Potential::Quartic
        }
    };

    // [cost]
    let (b1, b1_line) = ex.f64_or("cost", "b1", 0.0);
    let (b2, b2_line) = ex.f64_or("cost", "b2", 0.0);
    let (b3, b3_line) = ex.f64_or("cost", "b3", 1.0);
    if b1 < 0.0 {
        ex.violation("cost", "b1", b1_line, "b1 must be nonnegative".into());
    }
    if b2 < 0.0 {
        ex.violation("cost", "b2", b2_line, "b2 must be nonnegative".into());
    }
    if !(b3 > 0.0) {
        ex.violation(
            "cost",
            "b3",
            b3_line,
            "b3 must be strictly positive (b3 in (0, +inf))".into(),
        );
    }
    let (kappa, kappa_line) = ex.list_f64("cost", "kappa", vec![0.0; d]);
    let kappa = if kappa.len() == 1 && d == 2 {
        vec![kappa[0], kappa[0]]
    } else {
        kappa
    };
    if kappa.len() != d {
        ex.violation(
            "cost",
            "kappa",
            kappa_line,
            format!("expected {d} entries, got {}", kappa.len()),
        );
    }
    for &k in &kappa {
        if k < 0.0 {
            ex.violation("cost", "kappa", kappa_line, "kappa must be nonnegative".into());
        }
    }
    let phi_q = ex.target_or("cost", "phi_q", TargetSpec::Constant(0.0));
    let phi_omega = ex.target_or("cost", "phi_omega", TargetSpec::Constant(0.0));

    // [bounds]
    let (lo, lo_line) = ex.list_f64("bounds", "lo", vec![-1.0; d]);
    let lo = if lo.len() == 1 && d == 2 { vec![lo[0], lo[0]] } else { lo };
    let (hi, hi_line) = ex.list_f64("bounds", "hi", vec![1.0; d]);
    let hi = if hi.len() == 1 && d == 2 { vec![hi[0], hi[0]] } else { hi };
    if lo.len() != d {
        ex.violation("bounds", "lo", lo_line, format!("expected {d} entries", ));
    }
    if hi.len() != d {
        ex.violation("bounds", "hi", hi_line, format!("expected {d} entries", ));
    }
    if lo.len() == hi.len() {
        for (l, h) in lo.iter().zip(hi.iter()) {
            if l > h {
                ex.violation("bounds", "hi", hi_line, "need lo <= hi per component".into());
            }
        }
    }

    // [optimizer]
    let (step_tau, st_line) = ex.f64_or("optimizer", "step", 1.0);
    if !(step_tau > 0.0) {
        ex.violation("optimizer", "step", st_line, "step must be positive".into());
    }
    let (backtrack_factor, bf_line) = ex.f64_or("optimizer", "backtrack_factor", 0.5);
    if !(backtrack_factor > 0.0 && backtrack_factor < 1.0) {
        ex.violation(
            "optimizer",
            "backtrack_factor",
            bf_line,
            "backtrack_factor must lie in (0, 1)".into(),
        );
    }
    let (backtrack_max, bm_line) = ex.usize_or("optimizer", "backtrack_max", 40);
    if backtrack_max == 0 {
        ex.violation(
            "optimizer",
            "backtrack_max",
            bm_line,
            "backtrack_max must be at least 1".into(),
        );
    }
    let (stop_tol, tol_line) = ex.f64_or("optimizer", "stop_tol", 1e-6);
    if !(stop_tol > 0.0) {
        ex.violation("optimizer", "stop_tol", tol_line, "stop_tol must be positive".into());
    }
    let (max_outer, mo_line) = ex.usize_or("optimizer", "max_outer", 200);
    if max_outer == 0 {
        ex.violation("optimizer", "max_outer", mo_line, "max_outer must be at least 1".into());
    }

    // [run]
    let (mode_str, mode_line) = ex.string_or("run", "mode", "forward");
    let mode = match Mode::parse(&mode_str) {
        Ok(m) => m,
        Err(msg) => {
            ex.violation("run", "mode", mode_line, msg);
            Mode::Forward
        }
    };
    let phi0 = ex.target_or("run", "phi0", TargetSpec::Constant(0.0));
    let (out_str, _) = ex.string_or("run", "out", "out");
    let seed = ex.u64_or("run", "seed", 0);
    let (threads, th_line) = ex.usize_or("run", "threads", 1);
    if threads == 0 {
        ex.violation("run", "threads", th_line, "threads must be at least 1".into());
    }
    let (directions, dir_line) = ex.usize_or("run", "directions", 5);
    if directions == 0 {
        ex.violation("run", "directions", dir_line, "directions must be at least 1".into());
    }
    let (fd_step, fd_line) = ex.f64_or("run", "fd_step", 1e-5);
    if !(fd_step > 0.0) {
        ex.violation("run", "fd_step", fd_line, "fd_step must be positive".into());
    }
    let (taylor_scales, ts_line) = ex.list_f64("run", "taylor_scales", vec![1e-1, 1e-2, 1e-3]);
    if taylor_scales.iter().any(|t| !(*t > 0.0)) {
        ex.violation(
            "run",
            "taylor_scales",
            ts_line,
            "scales must be positive".into(),
        );
    }
    let kappa_grid = match ex.get("run", "kappa_grid") {
        Some((v, line)) => {
            if let Some(count) = v.strip_prefix("auto:") {
                match count.trim().parse::<usize>() {
                    Ok(c) if c >= 2 => KappaGrid::Auto(c),
                    _ => {
                        ex.violation(
                            "run",
                            "kappa_grid",
                            Some(line),
                            "auto grid needs a count >= 2".into(),
                        );
                        KappaGrid::Auto(5)
                    }
                }
            } else {
                let mut vals = Vec::new();
                let mut ok = true;
                for part in v.split(',') {
                    match part.trim().parse::<f64>() {
                        Ok(x) => vals.push(x),
                        Err(_) => {
                            ex.violation(
                                "run",
                                "kappa_grid",
                                Some(line),
                                format!("not a number: '{}'", part.trim()),
                            );
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && vals.windows(2).any(|w| w[0] > w[1]) {
                    ex.violation(
                        "run",
                        "kappa_grid",
                        Some(line),
                        "kappa grid must be ascending".into(),
                    );
                }
                if ok {
                    KappaGrid::Explicit(vals)
                } else {
                    KappaGrid::Auto(5)
                }
            }
        }
        None => KappaGrid::Auto(5),
    };

    // referenced files must exist
    for (section, key, target) in [
        ("cost", "phi_q", &phi_q),
        ("cost", "phi_omega", &phi_omega),
        ("run", "phi0", &phi0),
    ] {
        if let TargetSpec::File(p) = target {
            let resolved = if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            };
            if !resolved.exists() {
                ex.violation(
                    section,
                    key,
                    None,
                    format!("referenced file does not exist: {}", resolved.display()),
                );
            }
        }
    }

    // unknown keys
    for (section, key) in raw.entries.keys() {
        if !ex.consumed.contains(&(section.clone(), key.clone())) {
            let line = raw.entries[&(section.clone(), key.clone())].1;
            ex.violations.push(Violation {
                section: section.clone(),
                key: key.clone(),
                line: Some(line),
                message: "unknown key".into(),
            });
        }
    }

    let mut violations = ex.violations;

    // assemble typed pieces; constructors re-check the same invariants
    let grid = Grid::new(d, &n, &length, bc);
    let time = TimeGrid::new(t_final, steps);
    let bounds_built = if lo.len() == d && hi.len() == d {
        BoxBounds::constant(lo.clone(), hi.clone())
    } else {
        BoxBounds::symmetric(d, -1.0, 1.0)
    };
    let params = ModelParams {
        eps,
        mobility,
        eta0,
        nu,
        sigma,
        lambda_lo,
        lambda_hi,
        lambda_profile,
        h_source,
    };
    if violations.is_empty() {
        if let Err(e) = params.validate() {
            violations.push(Violation {
                section: "model".into(),
                key: String::new(),
                line: None,
                message: e.to_string(),
            });
        }
    }

    match (grid, time, bounds_built) {
        (Ok(grid), Ok(time), Ok(bounds)) if violations.is_empty() => Ok(RunConfig {
            grid,
            time,
            params,
            potential,
            cost: CostConfig {
                b1,
                b2,
                b3,
                kappa,
                phi_q,
                phi_omega,
            },
            bounds,
            optimizer: OptimizerConfig {
                step_tau,
                backtrack_factor,
                backtrack_max,
                stop_tol,
                max_outer,
            },
            run: RunSection {
                mode,
                phi0,
                out: PathBuf::from(out_str),
                seed,
                threads,
                directions,
                fd_step,
                taylor_scales,
                kappa_grid,
            },
        }),
        (g, t, b) => {
            for e in [
                g.err().map(|e| ("grid", e)),
                t.err().map(|e| ("time", e)),
                b.err().map(|e| ("bounds", e)),
            ]
            .into_iter()
            .flatten()
            {
                violations.push(Violation {
                    section: e.0.into(),
                    key: String::new(),
                    line: None,
                    message: e.1.to_string(),
                });
            }
            violations.sort_by_key(|v| v.line.unwrap_or(usize::MAX));
            violations.dedup();
            Err(CliError::Config(violations))
        }
    }
}

/// Parse a configuration file from disk.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical text form; `parse(serialize(c)) == c` for every valid config.
pub fn serialize_config(c: &RunConfig) -> String {
    let mut s = String::new();
    let d = c.grid.dim();
    writeln!(s, "[grid]").unwrap();
    writeln!(s, "dim = {}", d).unwrap();
    let ns: Vec<String> = (0..d).map(|a| c.grid.n(a).to_string()).collect();
    writeln!(s, "n = {}", ns.join(", ")).unwrap();
    let ls: Vec<String> = (0..d).map(|a| c.grid.length(a).to_string()).collect();
    writeln!(s, "length = {}", ls.join(", ")).unwrap();
    writeln!(
        s,
        "bc = {}",
        match c.grid.bc() {
            BcMode::Periodic => "periodic",
            BcMode::BoxNeumann => "box-neumann",
        }
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[time]").unwrap();
    writeln!(s, "t_final = {}", c.time.t_final).unwrap();
    writeln!(s, "steps = {}", c.time.steps).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[model]").unwrap();
    writeln!(s, "eps = {}", c.params.eps).unwrap();
    writeln!(s, "mobility = {}", c.params.mobility).unwrap();
    writeln!(s, "eta0 = {}", c.params.eta0).unwrap();
    writeln!(s, "nu = {}", c.params.nu).unwrap();
    writeln!(s, "sigma = {}", c.params.sigma).unwrap();
    writeln!(s, "lambda_lo = {}", c.params.lambda_lo).unwrap();
    writeln!(s, "lambda_hi = {}", c.params.lambda_hi).unwrap();
    writeln!(
        s,
        "lambda_profile = {}",
        match c.params.lambda_profile {
            LambdaProfile::Constant => "constant",
            LambdaProfile::SmoothBounded => "smooth-bounded",
        }
    )
    .unwrap();
    match c.params.h_source {
        SourceProfile::Zero => writeln!(s, "h_source = zero").unwrap(),
        SourceProfile::Tanh { amplitude } => {
            writeln!(s, "h_source = tanh").unwrap();
            writeln!(s, "h_amplitude = {amplitude}").unwrap();
        }
    }
    writeln!(s, "potential = quartic").unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[cost]").unwrap();
    writeln!(s, "b1 = {}", c.cost.b1).unwrap();
    writeln!(s, "b2 = {}", c.cost.b2).unwrap();
    writeln!(s, "b3 = {}", c.cost.b3).unwrap();
    writeln!(s, "kappa = {}", join_f64(&c.cost.kappa)).unwrap();
    writeln!(s, "phi_q = {}", c.cost.phi_q.serialize()).unwrap();
    writeln!(s, "phi_omega = {}", c.cost.phi_omega.serialize()).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[bounds]").unwrap();
    let lo: Vec<f64> = (0..d).map(|i| c.bounds.lo(i)).collect();
    let hi: Vec<f64> = (0..d).map(|i| c.bounds.hi(i)).collect();
    writeln!(s, "lo = {}", join_f64(&lo)).unwrap();
    writeln!(s, "hi = {}", join_f64(&hi)).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[optimizer]").unwrap();
    writeln!(s, "step = {}", c.optimizer.step_tau).unwrap();
    writeln!(s, "backtrack_factor = {}", c.optimizer.backtrack_factor).unwrap();
    writeln!(s, "backtrack_max = {}", c.optimizer.backtrack_max).unwrap();
    writeln!(s, "stop_tol = {}", c.optimizer.stop_tol).unwrap();
    writeln!(s, "max_outer = {}", c.optimizer.max_outer).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[run]").unwrap();
    writeln!(s, "mode = {}", c.run.mode.name()).unwrap();
    writeln!(s, "phi0 = {}", c.run.phi0.serialize()).unwrap();
    writeln!(s, "out = {}", c.run.out.display()).unwrap();
    writeln!(s, "seed = {}", c.run.seed).unwrap();
    writeln!(s, "threads = {}", c.run.threads).unwrap();
    writeln!(s, "directions = {}", c.run.directions).unwrap();
    writeln!(s, "fd_step = {}", c.run.fd_step).unwrap();
    writeln!(s, "taylor_scales = {}", join_f64(&c.run.taylor_scales)).unwrap();
    match &c.run.kappa_grid {
        KappaGrid::Auto(count) => writeln!(s, "kappa_grid = auto:{count}").unwrap(),
        KappaGrid::Explicit(vals) => writeln!(s, "kappa_grid = {}", join_f64(vals)).unwrap(),
    }
    s
}
