//! JSON scenario files and the pipeline that runs them end to end:
//! mesh, eigenpairs, multi-start flow, constants, Lions verdict, candidate
//! extraction and solution verification.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    check_lions, check_theorem12, coercivity_on_trace, default_starts, estimate_l_parallel, save_sweep_csv,
    ue_sweep, verify_solution, BranchFlow, Example1Params, LionsCheck, SolutionReport, SweepPoint, Theorem12Report,
};
use crate::error::{Error, Result};
use crate::flow::{beta_bounds, extract_ps, BetaBounds, FlowConfig, FlowTrace, PsCandidate, Terminal, TraceSummary};
use crate::functionals::{compute_constants, ConstantsReport, ProblemData};
use crate::mesh::{save_field, Coefficient, DomainMesh, Field, Point};
use crate::spectral::{compute_eigenbasis, EigenBasis, EigenReport};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_EIGENPAIRS: usize = 8;

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("bn-ball-supercritical-mu", include_str!("../scenarios/bn-ball-supercritical-mu.json")),
    ("bn-ball-subcritical-mu", include_str!("../scenarios/bn-ball-subcritical-mu.json")),
    ("example1-theorem12", include_str!("../scenarios/example1-theorem12.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Radial ball; `nodes` is the number of radial intervals.
    Ball {
        dimension: usize,
        #[serde(default = "unit")]
        radius: f64,
        nodes: usize,
    },
    Box { edges: [f64; 3], nodes: [usize; 3] },
}

fn unit() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn build(&self) -> Result<DomainMesh<f64>> {
        match *self {
            DomainSpec::Ball { dimension, radius, nodes } => DomainMesh::radial(dimension, radius, nodes),
            DomainSpec::Box { edges, nodes } => DomainMesh::cuboid(edges, nodes),
        }
    }
}

/// K as written in a scenario or on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        value: f64,
    },
    /// Sign-changing coefficient with a positive plateau around `y0`.
    /// `y0` defaults to the domain centre and `d0` to half its distance to
    /// the boundary.
    Example1 {
        #[serde(default)]
        y0: Option<[f64; 3]>,
        #[serde(default)]
        d0: Option<f64>,
        eps0: f64,
        eta: f64,
        beta: f64,
    },
}

impl CoefficientSpec {
    pub fn example1_params(&self, mesh: &DomainMesh<f64>) -> Result<Option<Example1Params<f64>>> {
        let CoefficientSpec::Example1 { y0, d0, eps0, eta, beta } = *self else {
            return Ok(None);
        };
        let y0 = y0.unwrap_or_else(|| mesh.center());
        let mut params = Example1Params::for_mesh(mesh, y0, eps0, eta, beta)?;
        if let Some(d0) = d0 {
            params.d0 = d0;
            params.validate(mesh)?;
        }
        Ok(Some(params))
    }

    pub fn build(&self, mesh: &Arc<DomainMesh<f64>>) -> Result<Coefficient<f64>> {
        match self {
            CoefficientSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Parameter(format!("constant K must be finite, got {value}")));
                }
                Ok(Coefficient::Constant(*value))
            }
            CoefficientSpec::Example1 { .. } => {
                let params = self.example1_params(mesh)?.expect("example1 variant");
                Ok(Coefficient::Nodal(crate::analysis::build_example1_k(mesh, &params)?))
            }
        }
    }
}

/// `const:<v>`, `example1:<eps0,eta,beta>`, `example1:<d0,eps0,eta,beta>` or
/// `example1:<x,y,z,d0,eps0,eta,beta>`.
impl FromStr for CoefficientSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("coefficient {s:?} must look like const:<v> or example1:<...>")))?;
        let numbers = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("coefficient {s:?}: {e}")))?;
        match (kind, numbers.as_slice()) {
            ("const", [v]) => Ok(CoefficientSpec::Constant { value: *v }),
            ("example1", [eps0, eta, beta]) => {
                Ok(CoefficientSpec::Example1 { y0: None, d0: None, eps0: *eps0, eta: *eta, beta: *beta })
            }
            ("example1", [d0, eps0, eta, beta]) => {
                Ok(CoefficientSpec::Example1 { y0: None, d0: Some(*d0), eps0: *eps0, eta: *eta, beta: *beta })
            }
            ("example1", [x, y, z, d0, eps0, eta, beta]) => Ok(CoefficientSpec::Example1 {
                y0: Some([*x, *y, *z]),
                d0: Some(*d0),
                eps0: *eps0,
                eta: *eta,
                beta: *beta,
            }),
            _ => Err(Error::Config(format!(
                "coefficient {s:?}: expected const:<v> or example1 with 3, 4 or 7 numbers"
            ))),
        }
    }
}

/// File names, relative to the output directory, of the artifacts a run
/// writes. Unset entries are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: DomainSpec,
    /// Absolute μ. Exactly one of `mu` and `mu_fraction` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// μ as a fraction of the computed μ₁.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_fraction: Option<f64>,
    pub coefficient: CoefficientSpec,
    /// Allows μ = μ₁.
    #[serde(default)]
    pub first_eigenvalue_branch: bool,
    #[serde(default = "default_eigenpairs")]
    pub eigenpairs: usize,
    #[serde(default)]
    pub flow: FlowConfig<f64>,
    /// Scales ε at which the quotient of u_ε is tabulated (n = 3 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_eigenpairs() -> usize {
    DEFAULT_EIGENPAIRS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ScenarioConfig {
    /// Checks that need no mesh. Errors name the offending key.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        match (self.mu, self.mu_fraction) {
            (Some(_), Some(_)) => return Err(("mu_fraction", "set either mu or mu_fraction, not both".into())),
            (None, None) => return Err(("mu", "one of mu or mu_fraction is required".into())),
            (Some(mu), None) if !(mu > 0.0 && mu.is_finite()) => {
                return Err(("mu", format!("mu must be positive, got {mu}")))
            }
            (None, Some(f)) if !(f > 0.0 && f <= 1.0) => {
                return Err(("mu_fraction", format!("mu_fraction must lie in (0, 1], got {f}")))
            }
            (None, Some(f)) if f == 1.0 && !self.first_eigenvalue_branch => {
                return Err((
                    "mu_fraction",
                    "mu_fraction = 1 needs first_eigenvalue_branch = true".into(),
                ))
            }
            _ => {}
        }
        if self.eigenpairs == 0 {
            return Err(("eigenpairs", "at least one eigenpair is needed".into()));
        }
        if self.first_eigenvalue_branch && self.eigenpairs < 2 {
            return Err(("eigenpairs", "the first-eigenvalue branch needs at least two eigenpairs".into()));
        }
        self.flow.validate().map_err(|e| ("flow", e.to_string()))?;
        if let Some(eps) = &self.sweep {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(("sweep", "sweep scales must be positive and finite".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical))
    }
}

/// A parsed, statically checked scenario together with its source text,
/// which is kept so later errors can point at a line.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    source: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let scenario = Scenario { config, source: Some(text.to_string()) };
        scenario.config.check().map_err(|(key, msg)| scenario.located(key, msg))?;
        Ok(scenario)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        config.check().map_err(|(key, msg)| Error::Config(format!("{key}: {msg}")))?;
        Ok(Scenario { config, source: None })
    }

    /// Bundled name or path to a JSON file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(text) = bundled(name_or_path) {
            return Self::from_json(text);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!(
                "{name_or_path}: {e} (bundled scenarios: {})",
                BUNDLED.map(|(n, _)| n).join(", ")
            ))
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.seed = seed;
        self
    }

    fn located(&self, key: &str, msg: String) -> Error {
        match self.source.as_deref().and_then(|src| key_line(src, key)) {
            Some(line) => Error::Config(format!("line {line}: {key}: {msg}")),
            None => Error::Config(format!("{key}: {msg}")),
        }
    }

    /// Builds mesh, eigenpairs and problem data.
    pub fn prepare(&self) -> Result<Prepared> {
        let cfg = &self.config;
        let as_config = |key: &str, e: Error| match e {
            Error::Config(m) | Error::Parameter(m) | Error::Precondition(m) => self.located(key, m),
            Error::UnsupportedDimension(n) => self.located(key, format!("unsupported dimension {n}")),
            other => other,
        };
        let mesh = Arc::new(cfg.domain.build().map_err(|e| as_config("domain", e))?);
        if cfg.sweep.is_some() && mesh.dimension() != 3 {
            return Err(self.located("sweep", "the u_eps sweep needs n = 3".into()));
        }
        let example1 = cfg.coefficient.example1_params(&mesh).map_err(|e| as_config("coefficient", e))?;
        let k = cfg.coefficient.build(&mesh).map_err(|e| as_config("coefficient", e))?;
        let basis = compute_eigenbasis(&mesh, cfg.eigenpairs)?;
        let branch = cfg.first_eigenvalue_branch;
        let data = match (cfg.mu, cfg.mu_fraction) {
            (Some(mu), _) if branch => ProblemData::with_mu_fraction(k, mu / basis.mu1(), &basis, true),
            (Some(mu), _) => ProblemData::new(k, mu, &basis),
            (None, Some(f)) => ProblemData::with_mu_fraction(k, f, &basis, branch),
            (None, None) => unreachable!("checked at parse time"),
        }
        .map_err(|e| as_config(if cfg.mu.is_some() { "mu" } else { "mu_fraction" }, e))?;
        if !(data.k_inf() > 0.0) {
            return Err(self.located("coefficient", format!("sup K = {} must be positive", data.k_inf())));
        }
        Ok(Prepared { mesh, basis, data, example1 })
    }
}

/// 1-based line of the first occurrence of `"key"` in `src`.
fn key_line(src: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    src.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

pub struct Prepared {
    pub mesh: Arc<DomainMesh<f64>>,
    pub basis: EigenBasis<f64>,
    pub data: ProblemData<f64>,
    pub example1: Option<Example1Params<f64>>,
}

/// Process exit codes of a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitStatus {
    Verified,
    ConfigError,
    Concentrated,
    Stalled,
    /// Iteration cap, or a converged run whose solution did not verify.
    Unverified,
    /// Solver or I/O failure.
    Failure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Verified => 0,
            ExitStatus::ConfigError => 1,
            ExitStatus::Concentrated => 2,
            ExitStatus::Stalled => 3,
            ExitStatus::Unverified => 4,
            ExitStatus::Failure => 5,
        }
    }

    pub fn classify(terminal: Terminal, verified: bool) -> Self {
        match terminal {
            _ if verified => ExitStatus::Verified,
            Terminal::Concentrated => ExitStatus::Concentrated,
            Terminal::Stalled => ExitStatus::Stalled,
            Terminal::PsConverged | Terminal::Cap => ExitStatus::Unverified,
        }
    }

    /// Exit status for an error that aborted a run.
    pub fn for_error(err: &Error) -> Self {
        match err {
            Error::Config(_)
            | Error::Parameter(_)
            | Error::Precondition(_)
            | Error::Usage(_)
            | Error::UnsupportedDimension(_)
            | Error::Admissibility(_)
            | Error::Domain(_)
            | Error::MeshMismatch
            | Error::Length { .. }
            | Error::NonFinite(_)
            | Error::Format(_)
            | Error::Json(_) => ExitStatus::ConfigError,
            _ => ExitStatus::Failure,
        }
    }
}

impl fmt::Display for ExitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_value(self).expect("enum serializes").as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    /// Mesh description as in field dump headers.
    pub resolution: String,
    pub unknowns: usize,
    pub version: String,
}

/// One multi-start entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub label: String,
    pub terminal: Option<Terminal>,
    pub iterations: Option<usize>,
    pub min_j: Option<f64>,
    /// Why the start was skipped.
    pub rejected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSection {
    pub best_start: String,
    pub diagnostic: String,
    #[serde(flatten)]
    pub summary: TraceSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    /// Gradient threshold exponent j of a snapshot, None for the final iterate.
    pub exponent: Option<u32>,
    pub iter: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub quotient: f64,
    pub i_value: f64,
    pub grad_i_norm: f64,
    pub gradient_identity_error: f64,
    pub energy_identity_error: f64,
}

impl CandidateSummary {
    fn new(exponent: Option<u32>, iter: usize, c: &PsCandidate<f64>) -> Self {
        Self {
            exponent,
            iter,
            beta1: c.beta1,
            beta2: c.beta2,
            quotient: c.quotient,
            i_value: c.i_value,
            grad_i_norm: c.grad_i_norm,
            gradient_identity_error: c.gradient_identity_error,
            energy_identity_error: c.energy_identity_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub provenance: Provenance,
    pub spectrum: EigenReport,
    pub constants: ConstantsReport<f64>,
    pub lions: LionsCheck,
    pub starts: Vec<StartSummary>,
    pub flow: FlowSection,
    pub candidates: Vec<CandidateSummary>,
    pub beta_bounds: Option<BetaBounds>,
    pub solution: SolutionReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem12: Option<Theorem12Report>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPoint<f64>>>,
    pub status: ExitStatus,
    pub exit_code: i32,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    /// Trace of the start that reached the lowest quotient.
    pub trace: FlowTrace<f64>,
    /// Final candidate u = β₁η.
    pub solution: Field<f64>,
}

impl ScenarioOutcome {
    pub fn status(&self) -> ExitStatus {
        self.report.status
    }

    /// Writes the artifacts named in `outputs` below `dir`.
    pub fn write_outputs(&self, outputs: &Outputs, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if let Some(p) = &outputs.report {
            let path = dir.join(p);
            std::fs::write(&path, emit_report(&self.report)?).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        if let Some(p) = &outputs.trace {
            let path = dir.join(p);
            self.trace.save_csv(&path)?;
            written.push(path);
        }
        if let Some(p) = &outputs.field {
            let path = dir.join(p);
            save_field(&self.solution, &path)?;
            written.push(path);
        }
        if let (Some(p), Some(points)) = (&outputs.sweep, &self.report.sweep) {
            let path = dir.join(p);
            save_sweep_csv(points, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Pretty JSON form of a report.
pub fn emit_report(report: &ScenarioReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn parse_report(text: &str) -> Result<ScenarioReport> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Flows run concurrently; results do not depend on it.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1 }
    }
}

pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<ScenarioOutcome> {
    let prepared = scenario.prepare()?;
    run_prepared(scenario, &prepared, options)
}

pub fn run_prepared(scenario: &Scenario, prepared: &Prepared, options: &RunOptions) -> Result<ScenarioOutcome> {
    let cfg = &scenario.config;
    let Prepared { mesh, basis, data, example1 } = prepared;

    let start_set = default_starts(data, cfg.seed);
    let estimate = estimate_l_parallel(data, &cfg.flow, &start_set.accepted, options.jobs.max(1))?;
    let constants = compute_constants(data, estimate.l_est)?;
    let lions = check_lions(&constants);

    let mut starts: Vec<StartSummary> = start_set
        .rejected
        .iter()
        .map(|(label, why)| StartSummary {
            label: label.clone(),
            terminal: None,
            iterations: None,
            min_j: None,
            rejected: Some(why.clone()),
        })
        .collect();
    starts.extend(estimate.runs.iter().map(|run| match &run.outcome {
        Ok(out) => StartSummary {
            label: run.label.clone(),
            terminal: Some(out.terminal()),
            iterations: Some(out.trace.iterations()),
            min_j: Some(out.trace.min_j()),
            rejected: None,
        },
        Err(why) => StartSummary {
            label: run.label.clone(),
            terminal: None,
            iterations: None,
            min_j: None,
            rejected: Some(why.clone()),
        },
    }));

    let best = estimate.best_outcome();
    let mut candidates = Vec::new();
    let mut extracted = Vec::new();
    for snap in &best.trace.snapshots {
        let c = extract_ps(data, &snap.field)?;
        candidates.push(CandidateSummary::new(Some(snap.exponent), snap.iter, &c));
        extracted.push(c);
    }
    let last = extract_ps(data, &best.field)?;
    candidates.push(CandidateSummary::new(None, best.trace.last().iter, &last));
    extracted.push(last);
    let final_candidate = extracted.last().expect("final candidate");
    let solution = verify_solution(data, &constants, &final_candidate.u)?;

    let theorem12 = if data.first_eigenvalue_branch() && data.mu() == data.mu1() {
        let mut rep = check_theorem12(data, basis, None)?;
        if rep.applicable {
            rep.flow = Some(BranchFlow {
                terminal: best.terminal(),
                iterations: best.trace.iterations(),
                final_j: best.trace.last().j,
                coercivity: coercivity_on_trace(&best.trace),
            });
        }
        Some(rep)
    } else {
        None
    };

    let sweep = match &cfg.sweep {
        Some(eps) => {
            let (center, d0): (Point<f64>, f64) = match example1 {
                Some(p) => (p.y0, p.d0),
                None => (mesh.center(), mesh.boundary_distance(&mesh.center()) / 2.0),
            };
            Some(ue_sweep(data, &center, d0, eps)?)
        }
        None => None,
    };

    let status = ExitStatus::classify(best.terminal(), solution.verified);
    let resolution = mesh.header().trim_start_matches("mesh ").to_string();
    let report = ScenarioReport {
        scenario: cfg.name.clone(),
        provenance: Provenance {
            config_sha256: cfg.digest(),
            seed: cfg.seed,
            resolution,
            unknowns: mesh.len(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        spectrum: basis.report(),
        constants: constants.to_f64(),
        lions,
        starts,
        flow: FlowSection {
            best_start: estimate.runs[estimate.best_run].label.clone(),
            diagnostic: best.trace.diagnostic.clone(),
            summary: best.trace.summary(),
        },
        candidates,
        beta_bounds: beta_bounds(&extracted),
        solution,
        theorem12,
        sweep,
        status,
        exit_code: status.code(),
    };
    Ok(ScenarioOutcome { report, trace: best.trace.clone(), solution: final_candidate.u.clone() })
}
