use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{initial_data, run_flow, FlowConfig, FlowOutcome, InitialStrategy};
use crate::functionals::{ConstantsReport, ProblemData};
use crate::mesh::Field;
use crate::scalar::{lit, to_f64, Real};

/// Relative band around c_∞ inside which the strict Lions inequality is
/// reported as undecided.
pub const LIONS_GUARD_BAND: f64 = 1e-9;

/// Named flow start.
#[derive(Debug, Clone)]
pub struct Start<T: Real> {
    pub label: String,
    pub field: Field<T>,
}

/// Starts that passed admissibility, and the reasons the others did not.
#[derive(Debug, Clone)]
pub struct StartSet<T: Real> {
    pub accepted: Vec<Start<T>>,
    pub rejected: Vec<(String, String)>,
}

/// Eigenfunction, bump at argmax K, and bump at a random node where K > 0.
pub fn default_starts<T: Real>(data: &ProblemData<T>, seed: u64) -> StartSet<T> {
    let mesh = data.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = mesh.spacing() * lit(4.0);
    let candidates: Vec<usize> = (0..mesh.len())
        .filter(|&i| data.coefficient().at(i) > T::zero() && mesh.node_boundary_distance(i) > margin)
        .collect();
    let random_node = (!candidates.is_empty()).then(|| candidates[rng.gen_range(0..candidates.len())]);

    let mut strategies = vec![
        ("eigenfunction".to_string(), Some(InitialStrategy::Eigenfunction)),
        ("bump-argmax".to_string(), Some(InitialStrategy::Bump)),
    ];
    strategies.push(match random_node {
        Some(node) => (format!("bump-node-{node}"), Some(InitialStrategy::BumpAt(node))),
        None => ("bump-random".to_string(), None),
    });

    let mut set = StartSet { accepted: Vec::new(), rejected: Vec::new() };
    for (label, strategy) in strategies {
        match strategy.map(|s| initial_data(data, &s)) {
            Some(Ok(field)) => set.accepted.push(Start { label, field }),
            Some(Err(e)) => set.rejected.push((label, e.to_string())),
            None => set.rejected.push((label, "no node with K > 0 away from the boundary".into())),
        }
    }
    set
}

#[derive(Debug, Clone)]
pub struct StartRun<T: Real> {
    pub label: String,
    pub outcome: std::result::Result<FlowOutcome<T>, String>,
}

#[derive(Debug, Clone)]
pub struct LEstimate<T: Real> {
    /// Smallest quotient seen on any flow line.
    pub l_est: T,
    /// Minimizing iterate rescaled to ∫K|u|^{q+1} = 1.
    pub best: Field<T>,
    /// Index into `runs` of the run that produced `best`.
    pub best_run: usize,
    pub runs: Vec<StartRun<T>>,
}

impl<T: Real> LEstimate<T> {
    pub fn best_outcome(&self) -> &FlowOutcome<T> {
        self.runs[self.best_run].outcome.as_ref().expect("best run succeeded")
    }
}

/// Runs the flow from every start; starts the flow rejects are skipped.
pub fn estimate_l<T: Real>(data: &ProblemData<T>, config: &FlowConfig<T>, starts: &[Start<T>]) -> Result<LEstimate<T>> {
    estimate_l_parallel(data, config, starts, 1)
}

/// As [`estimate_l`], running up to `jobs` flows at once. Results do not
/// depend on `jobs`.
pub fn estimate_l_parallel<T: Real>(
    data: &ProblemData<T>,
    config: &FlowConfig<T>,
    starts: &[Start<T>],
    jobs: usize,
) -> Result<LEstimate<T>> {
    config.validate()?;
    if starts.is_empty() {
        return Err(Error::Admissibility("no starts given".into()));
    }
    let run_one = |s: &Start<T>| -> Result<StartRun<T>> {
        let outcome = match run_flow(data, config, &s.field) {
            Ok(out) => Ok(out),
            Err(e @ (Error::Admissibility(_) | Error::Domain(_))) => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        Ok(StartRun { label: s.label.clone(), outcome })
    };
    let runs: Vec<StartRun<T>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| starts.par_iter().map(run_one).collect::<Result<Vec<_>>>())?
    } else {
        starts.iter().map(run_one).collect::<Result<Vec<_>>>()?
    };

    let mut best: Option<(usize, T)> = None;
    for (i, run) in runs.iter().enumerate() {
        if let Ok(out) = &run.outcome {
            let j = out.trace.min_j();
            if best.is_none_or(|(_, b)| j < b) {
                best = Some((i, j));
            }
        }
    }
    let (best_run, l_est) = best.ok_or_else(|| {
        let reasons: Vec<String> = runs
            .iter()
            .map(|r| format!("{}: {}", r.label, r.outcome.as_ref().err().cloned().unwrap_or_default()))
            .collect();
        Error::Admissibility(format!("every start was rejected ({})", reasons.join("; ")))
    })?;
    let field = &runs[best_run].outcome.as_ref().expect("best run succeeded").field;
    let d = data.parts(field)?.nonlinear;
    let best = field.scaled(T::one() / d.powf(T::one() / data.critical_power()));
    Ok(LEstimate { l_est, best, best_run, runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LionsVerdict {
    Holds,
    Fails,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LionsCheck {
    pub verdict: LionsVerdict,
    pub l_est: f64,
    pub threshold: f64,
    /// (c_∞ − L) / c_∞.
    pub relative_margin: f64,
}

impl LionsCheck {
    pub fn holds(&self) -> bool {
        self.verdict == LionsVerdict::Holds
    }
}

/// L < c_∞, undecided when the two agree to within the guard band.
pub fn check_lions<T: Real>(report: &ConstantsReport<T>) -> LionsCheck {
    let l = to_f64(report.l_est);
    let c = to_f64(report.c_low);
    let margin = (c - l) / c;
    let verdict = if margin.abs() <= LIONS_GUARD_BAND {
        LionsVerdict::Indeterminate
    } else if l < c {
        LionsVerdict::Holds
    } else {
        LionsVerdict::Fails
    };
    LionsCheck { verdict, l_est: l, threshold: c, relative_margin: margin }
}
