use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use critflow::analysis::{check_lions, default_starts, estimate_l_parallel, verify_solution};
use critflow::error::{Error, Result};
use critflow::flow::{initial_data, run_flow, FlowConfig, InitialStrategy, Terminal};
use critflow::functionals::{compute_constants, ConstantsReport};
use critflow::mesh::{load_field, save_field, Field};
use critflow::scenario::{
    emit_report, run_prepared, DomainSpec, ExitStatus, Outputs, Prepared, RunOptions, Scenario, ScenarioConfig,
    DEFAULT_SEED,
};
use critflow::spectral::compute_eigenbasis;
use serde::Serialize;

use crate::{Cli, Command, DomainKind, FlowArgs, MeshArgs, OutputArgs, ProblemArgs};

pub fn run(cli: Cli) -> Result<ExitStatus> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let options = RunOptions { jobs: cli.jobs.max(1) };
    match cli.command {
        Command::Eigen { mesh, count } => {
            let mesh = Arc::new(domain_spec(&mesh)?.build()?);
            let basis = compute_eigenbasis(&mesh, count)?;
            print_json(&basis.report())?;
            Ok(ExitStatus::Verified)
        }
        Command::Constants { problem, l_est } => {
            let (_, prepared) = prepare("constants", &problem, None, seed)?;
            let consts = constants(&prepared, &FlowConfig::default(), l_est, seed, options)?;
            print_json(&consts.to_f64())?;
            Ok(ExitStatus::Verified)
        }
        Command::CheckLions { problem, flow, l_est } => {
            let (scenario, prepared) = prepare("check-lions", &problem, Some(&flow), seed)?;
            let consts = constants(&prepared, &scenario.config.flow, l_est, seed, options)?;
            #[derive(Serialize)]
            struct Out {
                constants: ConstantsReport<f64>,
                lions: critflow::analysis::LionsCheck,
            }
            print_json(&Out { constants: consts.to_f64(), lions: check_lions(&consts) })?;
            Ok(ExitStatus::Verified)
        }
        Command::Verify { problem, flow, load, l_est } => {
            let (scenario, prepared) = prepare("verify", &problem, Some(&flow), seed)?;
            let u = field_on_mesh(&load, &prepared)?;
            let consts = constants(&prepared, &scenario.config.flow, l_est, seed, options)?;
            let report = verify_solution(&prepared.data, &consts, &u)?;
            print_json(&report)?;
            Ok(if report.verified { ExitStatus::Verified } else { ExitStatus::Unverified })
        }
        Command::Flow { problem, flow, init, out } => {
            let (scenario, prepared) = prepare("flow", &problem, Some(&flow), seed)?;
            let strategy = match init.as_str() {
                "eig" => InitialStrategy::Eigenfunction,
                "bump" => InitialStrategy::Bump,
                other => match other.strip_prefix("file:") {
                    Some(path) => InitialStrategy::UserField(field_on_mesh(Path::new(path), &prepared)?),
                    None => return Err(Error::Config(format!("--init must be eig, bump or file:<path>, got {other:?}"))),
                },
            };
            let start = initial_data(&prepared.data, &strategy)?;
            let outcome = run_flow(&prepared.data, &scenario.config.flow, &start)?;
            write_artifacts(&out, &outcome.trace, &outcome.field)?;
            #[derive(Serialize)]
            struct Out {
                diagnostic: String,
                #[serde(flatten)]
                summary: critflow::flow::TraceSummary,
            }
            print_json(&Out { diagnostic: outcome.trace.diagnostic.clone(), summary: outcome.trace.summary() })?;
            Ok(match outcome.terminal() {
                Terminal::PsConverged => ExitStatus::Verified,
                Terminal::Concentrated => ExitStatus::Concentrated,
                Terminal::Stalled => ExitStatus::Stalled,
                Terminal::Cap => ExitStatus::Unverified,
            })
        }
        Command::Solve { problem, flow, out, report } => {
            let (scenario, prepared) = prepare("solve", &problem, Some(&flow), seed)?;
            let outcome = run_prepared(&scenario, &prepared, &options)?;
            write_artifacts(&out, &outcome.trace, &outcome.solution)?;
            let text = emit_report(&outcome.report)?;
            match report {
                Some(path) => std::fs::write(&path, text).map_err(|e| io_error(&path, e))?,
                None => print_text(&text)?,
            }
            Ok(outcome.status())
        }
        Command::Scenario { name, out_dir } => {
            let mut scenario = Scenario::load(&name)?;
            if let Some(seed) = cli.seed {
                scenario = scenario.with_seed(seed);
            }
            let outcome = critflow::scenario::run_scenario(&scenario, &options)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
            let written = outcome.write_outputs(&scenario.config.outputs, &out_dir)?;
            let r = &outcome.report;
            eprintln!(
                "{}: {} after {} iterations (J = {}, lions {:?}, verified {}), exit {}",
                r.scenario,
                r.flow.summary.terminal,
                r.flow.summary.iterations,
                r.flow.summary.final_j,
                r.lions.verdict,
                r.solution.verified,
                r.exit_code
            );
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            if scenario.config.outputs.report.is_none() {
                print_text(&emit_report(r)?)?;
            }
            Ok(outcome.status())
        }
    }
}

fn parse_triple<T: std::str::FromStr + Copy>(s: &str, what: &str) -> Result<[T; 3]>
where
    T::Err: std::fmt::Display,
{
    let parts = s
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| Error::Config(format!("--{what} {s:?}: {e}"))))
        .collect::<Result<Vec<T>>>()?;
    match parts.as_slice() {
        [v] => Ok([*v; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::Config(format!("--{what} takes one or three values, got {s:?}"))),
    }
}

fn domain_spec(args: &MeshArgs) -> Result<DomainSpec> {
    Ok(match args.domain {
        DomainKind::Ball => {
            let nodes = match &args.nodes {
                Some(s) => s.trim().parse::<usize>().map_err(|e| Error::Config(format!("--nodes {s:?}: {e}")))?,
                None => 2000,
            };
            DomainSpec::Ball { dimension: args.n, radius: args.radius, nodes }
        }
        DomainKind::Box => {
            if args.n != 3 {
                return Err(Error::Config(format!("box meshes are three dimensional, got --n {}", args.n)));
            }
            let nodes = match &args.nodes {
                Some(s) => parse_triple::<usize>(s, "nodes")?,
                None => [32; 3],
            };
            DomainSpec::Box { edges: parse_triple::<f64>(&args.edges, "edges")?, nodes }
        }
    })
}

fn flow_config(args: Option<&FlowArgs>) -> FlowConfig<f64> {
    let mut config = FlowConfig::default();
    if let Some(args) = args {
        if let Some(tol) = args.tol {
            config.grad_tol = tol;
        }
        if let Some(cap) = args.max_iter {
            config.max_iter = cap;
        }
        config.positivity = !args.no_positivity;
    }
    config
}

fn prepare(name: &str, args: &ProblemArgs, flow: Option<&FlowArgs>, seed: u64) -> Result<(Scenario, Prepared)> {
    let mu_fraction = match (args.mu, args.mu_fraction) {
        (None, None) => Some(0.5),
        (_, f) => f,
    };
    let config = ScenarioConfig {
        name: name.to_string(),
        domain: domain_spec(&args.mesh)?,
        mu: args.mu,
        mu_fraction,
        coefficient: args.k.clone(),
        first_eigenvalue_branch: args.first_eigenvalue_branch,
        eigenpairs: args.eigenpairs,
        flow: flow_config(flow),
        sweep: None,
        outputs: Outputs::default(),
        seed,
    };
    let scenario = Scenario::from_config(config)?;
    let prepared = scenario.prepare()?;
    Ok((scenario, prepared))
}

fn constants(
    prepared: &Prepared,
    config: &FlowConfig<f64>,
    l_est: Option<f64>,
    seed: u64,
    options: RunOptions,
) -> Result<ConstantsReport<f64>> {
    let l = match l_est {
        Some(l) => l,
        None => {
            let starts = default_starts(&prepared.data, seed);
            estimate_l_parallel(&prepared.data, config, &starts.accepted, options.jobs)?.l_est
        }
    };
    compute_constants(&prepared.data, l)
}

/// Loads a dump and checks it was written on the same mesh.
fn field_on_mesh(path: &Path, prepared: &Prepared) -> Result<Field<f64>> {
    let loaded: Field<f64> = load_field(path)?;
    let (want, got) = (prepared.mesh.header(), loaded.mesh().header());
    if want != got {
        return Err(Error::Config(format!("{}: dump is for `{got}`, the problem uses `{want}`", path.display())));
    }
    Field::from_values(&prepared.mesh, loaded.into_values())
}

fn write_artifacts(out: &OutputArgs, trace: &critflow::flow::FlowTrace<f64>, field: &Field<f64>) -> Result<()> {
    if let Some(path) = &out.trace {
        trace.save_csv(path)?;
    }
    if let Some(path) = &out.dump {
        save_field(field, path)?;
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn print_text(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    print_text(&text)
}
