//! Discrete flow line of the quotient J on the unit sphere of H¹₀.
//!
//! Each step moves along −∂J, optionally takes the nodewise absolute value,
//! and renormalizes to ‖η‖ = 1. The step length comes from Armijo
//! backtracking on the quotient increment, which is evaluated from the
//! nodewise differences of the two iterates so that decreases far below the
//! rounding level of J itself remain visible.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::concentration::half_energy_radius;
use crate::analysis::ConcentrationConfig;
use crate::error::{Error, Result};
use crate::functionals::{grad_i, mp_member_from, Parts, ProblemData};
use crate::mesh::operators::{h1_raw, power_integral_diff, weighted_dot};
use crate::mesh::{norm_h1, DomainMesh, Field};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Candidates are recorded when the gradient first drops below 10^{-j}
/// for j in this range.
pub const SNAPSHOT_EXPONENTS: std::ops::RangeInclusive<u32> = 2..=8;

/// Relative error above which the rescaling identities signal a bug.
pub const IDENTITY_FAILURE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct FlowConfig<T> {
    pub initial_step: T,
    pub backtrack: T,
    pub sufficient_decrease: T,
    /// Convergence tolerance on ‖∂J(η)‖.
    pub grad_tol: T,
    pub max_iter: usize,
    /// Backtracking gives up below this step.
    pub min_step: T,
    /// Replace each iterate by its absolute value.
    pub positivity: bool,
    /// Index p of the set M_p the iterates must stay in.
    pub monitor_level: u32,
    pub concentration: ConcentrationConfig<T>,
}

impl<T: Real> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            initial_step: T::one(),
            backtrack: lit(0.5),
            sufficient_decrease: lit(1e-4),
            grad_tol: lit(1e-8),
            max_iter: 100_000,
            min_step: lit(1e-14),
            positivity: true,
            monitor_level: 2,
            concentration: ConcentrationConfig::default(),
        }
    }
}

impl<T: Real> FlowConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_step", self.initial_step),
            ("sufficient_decrease", self.sufficient_decrease),
            ("grad_tol", self.grad_tol),
            ("min_step", self.min_step),
            ("concentration.radius_factor", self.concentration.radius_factor),
            ("concentration.level_band", self.concentration.level_band),
            ("concentration.approach_band", self.concentration.approach_band),
            ("concentration.min_grad", self.concentration.min_grad),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(Error::Config(format!("backtrack must lie in (0, 1), got {}", self.backtrack)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.monitor_level == 0 {
            return Err(Error::Config("monitor_level must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    PsConverged,
    Concentrated,
    Stalled,
    Cap,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Terminal::PsConverged => "ps-converged",
            Terminal::Concentrated => "concentrated",
            Terminal::Stalled => "stalled",
            Terminal::Cap => "cap",
        })
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord<T> {
    pub iter: usize,
    /// Cumulative pseudo-time Σ h_k.
    pub s: T,
    /// Quotient value, carried forward by the accepted increments.
    pub j: T,
    pub grad_norm: T,
    pub max_u: T,
    pub min_u: T,
    pub half_energy_radius: T,
    pub in_m1: bool,
    /// |‖η‖ − 1|.
    pub norm_error: T,
    /// |⟨∂J(η), η⟩|.
    pub tangency: T,
    pub quadratic: T,
    pub nonlinear: T,
    /// Step that produced this iterate (0 for the start).
    pub step: T,
}

/// Iterate kept when the gradient first crosses 10^{-exponent}.
#[derive(Debug, Clone)]
pub struct Snapshot<T: Real> {
    pub exponent: u32,
    pub iter: usize,
    pub field: Field<T>,
}

#[derive(Debug, Clone)]
pub struct FlowTrace<T: Real> {
    pub records: Vec<FlowRecord<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub terminal: Terminal,
    /// Why the run ended, in words.
    pub diagnostic: String,
    /// Σ h_k g_k².
    pub dissipation: T,
}

/// Aggregate view of a trace used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub terminal: Terminal,
    pub iterations: usize,
    pub pseudo_time: f64,
    pub initial_j: f64,
    pub final_j: f64,
    pub final_grad_norm: f64,
    pub final_half_energy_radius: f64,
    pub max_norm_error: f64,
    pub max_tangency: f64,
    pub monotone: bool,
    pub nonnegative: bool,
    pub dissipation: f64,
}

impl<T: Real> FlowTrace<T> {
    pub fn last(&self) -> &FlowRecord<T> {
        self.records.last().expect("trace always holds the initial record")
    }

    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn min_j(&self) -> T {
        self.records.iter().map(|r| r.j).fold(T::infinity(), T::min)
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].j <= w[0].j)
    }

    pub fn summary(&self) -> TraceSummary {
        let last = self.last();
        TraceSummary {
            terminal: self.terminal,
            iterations: self.iterations(),
            pseudo_time: to_f64(last.s),
            initial_j: to_f64(self.records[0].j),
            final_j: to_f64(last.j),
            final_grad_norm: to_f64(last.grad_norm),
            final_half_energy_radius: to_f64(last.half_energy_radius),
            max_norm_error: self.records.iter().map(|r| to_f64(r.norm_error)).fold(0.0, f64::max),
            max_tangency: self.records.iter().map(|r| to_f64(r.tangency)).fold(0.0, f64::max),
            monotone: self.is_monotone(),
            nonnegative: self.records.iter().all(|r| r.min_u >= T::zero()),
            dissipation: to_f64(self.dissipation),
        }
    }

    /// CSV with columns iter,s,J,grad_norm,max_u,half_energy_radius,in_M1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,s,J,grad_norm,max_u,half_energy_radius,in_M1")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.s,
                r.j,
                r.grad_norm,
                r.max_u,
                r.half_energy_radius,
                u8::from(r.in_m1)
            )?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutcome<T: Real> {
    pub trace: FlowTrace<T>,
    /// Final iterate (the minimum of J along the run).
    pub field: Field<T>,
}

impl<T: Real> FlowOutcome<T> {
    pub fn terminal(&self) -> Terminal {
        self.trace.terminal
    }
}

/// Starting point of a flow line.
#[derive(Debug, Clone)]
pub enum InitialStrategy<T: Real> {
    /// |e₁|.
    Eigenfunction,
    /// Compactly supported bump at the node where K is largest.
    Bump,
    /// Compactly supported bump at the given node.
    BumpAt(usize),
    UserField(Field<T>),
}

/// A nonnegative (when requested) unit-norm field with ∫K|u|^{q+1} > 0.
pub fn initial_data<T: Real>(data: &ProblemData<T>, strategy: &InitialStrategy<T>) -> Result<Field<T>> {
    let mesh = data.mesh();
    let raw = match strategy {
        InitialStrategy::Eigenfunction => data.e1().abs(),
        InitialStrategy::Bump => best_bump(data, data.coefficient().argmax())?,
        InitialStrategy::BumpAt(node) => {
            if *node >= mesh.len() {
                return Err(Error::Parameter(format!("node {node} out of range")));
            }
            best_bump(data, *node)?
        }
        InitialStrategy::UserField(u) => {
            data.check(u)?;
            u.abs()
        }
    };
    admissible_unit(data, raw)
}

fn admissible_unit<T: Real>(data: &ProblemData<T>, u: Field<T>) -> Result<Field<T>> {
    let norm = norm_h1(&u);
    if !(norm > T::zero()) {
        return Err(Error::Admissibility("initial field is zero".into()));
    }
    let u = u.scaled(T::one() / norm);
    let parts = data.parts(&u)?;
    if !(parts.nonlinear > T::zero()) {
        return Err(Error::Admissibility(format!(
            "integral of K|u|^(q+1) is {} for the initial field",
            parts.nonlinear
        )));
    }
    Ok(u)
}

/// Distance between nodes used to shape bumps; radial meshes measure along r.
fn node_gap<T: Real>(mesh: &DomainMesh<T>, i: usize, center: usize) -> T {
    match mesh {
        DomainMesh::RadialBall(b) => (b.radii()[i] - b.radii()[center]).abs(),
        DomainMesh::Box3(_) => mesh.node_distance(i, &mesh.node_point(center)),
    }
}

/// Among bumps (1 − (d/ρ)²)² of several widths centred at `node`, the
/// admissible one with the smallest quotient.
fn best_bump<T: Real>(data: &ProblemData<T>, node: usize) -> Result<Field<T>> {
    let mesh = data.mesh();
    let reach = mesh.node_boundary_distance(node);
    let floor = mesh.spacing() * lit(4.0);
    let mut best: Option<(T, Field<T>)> = None;
    for frac in [1.0, 0.7, 0.5, 0.35, 0.25, 0.18, 0.12, 0.08] {
        let rho = reach * lit(frac);
        if rho < floor && best.is_some() {
            break;
        }
        let rho = rho.max(floor);
        let values = (0..mesh.len())
            .map(|i| {
                let t = node_gap(mesh, i, node) / rho;
                if t < T::one() {
                    (T::one() - t * t).powi(2)
                } else {
                    T::zero()
                }
            })
            .collect();
        let u = Field::from_raw(mesh, values);
        let parts = data.parts(&u)?;
        if parts.nonlinear > T::zero() {
            let j = data.quotient_from(&parts)?;
            if best.as_ref().is_none_or(|(bj, _)| j < *bj) {
                best = Some((j, u));
            }
        }
    }
    best.map(|(_, u)| u).ok_or_else(|| {
        Error::Admissibility(format!("no bump at node {node} has a positive integral of K|u|^(q+1)"))
    })
}

/// Result of a single descent step.
#[derive(Debug, Clone)]
pub struct StepOutcome<T: Real> {
    pub field: Field<T>,
    pub step: T,
    /// The gradient was already below tolerance; `field` is the input.
    pub converged: bool,
}

struct State<T> {
    eta: Vec<T>,
    parts: Parts<T>,
    j: T,
    grad: Vec<T>,
    grad_norm: T,
}

fn evaluate<T: Real>(data: &ProblemData<T>, eta: Vec<T>) -> Result<State<T>> {
    let parts = data.parts_raw(&eta);
    let j = data.quotient_from(&parts)?;
    let grad = data.grad_quotient_raw(&eta, &parts)?;
    let grad_norm = h1_raw(data.mesh(), &grad, &grad).max(T::zero()).sqrt();
    Ok(State { eta, parts, j, grad, grad_norm })
}

/// J(b) − J(a) from nodewise differences.
fn quotient_increment<T: Real>(data: &ProblemData<T>, a: &[T], pa: &Parts<T>, b: &[T], pb: &Parts<T>) -> T {
    let mesh = data.mesh();
    let diff: Vec<T> = b.iter().zip(a).map(|(x, y)| *x - *y).collect();
    let sum: Vec<T> = b.iter().zip(a).map(|(x, y)| *x + *y).collect();
    let d_quad = h1_raw(mesh, &diff, &sum) - data.mu() * weighted_dot(mesh.weights(), &diff, &sum);
    let d_nl = power_integral_diff(mesh.weights(), data.coefficient(), b, a, data.critical_power());
    let e = data.quotient_exponent();
    let inv_a = pa.nonlinear.powf(-e);
    let inv_b = pb.nonlinear.powf(-e);
    let d_inv = inv_a * (-e * (d_nl / pa.nonlinear).ln_1p()).exp_m1();
    d_quad * inv_b + pa.quadratic * d_inv
}

struct Accepted<T> {
    eta: Vec<T>,
    parts: Parts<T>,
    step: T,
    increment: T,
}

fn line_search<T: Real>(data: &ProblemData<T>, config: &FlowConfig<T>, state: &State<T>, trial: T) -> Result<Accepted<T>> {
    let mesh = data.mesh();
    let g2 = state.grad_norm * state.grad_norm;
    let mut h = trial;
    loop {
        let mut cand: Vec<T> = state.eta.iter().zip(&state.grad).map(|(e, g)| *e - h * *g).collect();
        if config.positivity {
            cand.iter_mut().for_each(|v| *v = v.abs());
        }
        let norm = h1_raw(mesh, &cand, &cand).max(T::zero()).sqrt();
        if norm > T::zero() && norm.is_finite() {
            cand.iter_mut().for_each(|v| *v = *v / norm);
            let parts = data.parts_raw(&cand);
            if parts.nonlinear > T::zero() {
                let increment = quotient_increment(data, &state.eta, &state.parts, &cand, &parts);
                if increment <= -config.sufficient_decrease * h * g2 {
                    return Ok(Accepted { eta: cand, parts, step: h, increment });
                }
            }
        }
        h = h * config.backtrack;
        if h < config.min_step {
            return Err(Error::Stagnation { step: to_f64(h) });
        }
    }
}

/// One projected descent step with Armijo backtracking from `initial_step`.
pub fn flow_step<T: Real>(data: &ProblemData<T>, config: &FlowConfig<T>, eta: &Field<T>) -> Result<StepOutcome<T>> {
    config.validate()?;
    data.check(eta)?;
    let state = evaluate(data, eta.values().to_vec())?;
    if state.grad_norm <= config.grad_tol {
        return Ok(StepOutcome { field: eta.clone(), step: T::zero(), converged: true });
    }
    let acc = line_search(data, config, &state, config.initial_step)?;
    Ok(StepOutcome { field: Field::from_raw(data.mesh(), acc.eta), step: acc.step, converged: false })
}

/// Runs the flow from `start` until one of the terminal conditions holds.
pub fn run_flow<T: Real>(data: &ProblemData<T>, config: &FlowConfig<T>, start: &Field<T>) -> Result<FlowOutcome<T>> {
    config.validate()?;
    data.check(start)?;
    let mesh = Arc::clone(data.mesh());
    let c_low = data.quotient_threshold()?;
    let mut first = if config.positivity { start.abs() } else { start.clone() };
    let norm = norm_h1(&first);
    if !(norm > T::zero()) {
        return Err(Error::Admissibility("flow start is zero".into()));
    }
    first = first.scaled(T::one() / norm);
    let mut state = evaluate(data, first.into_values())?;
    if !mp_member_from(data, c_low, &state.parts, config.monitor_level) {
        return Err(Error::Admissibility(format!(
            "flow start (J = {}) lies outside M_{}",
            state.j, config.monitor_level
        )));
    }

    let conc = &config.concentration;
    let h_mesh = mesh.spacing();
    let level_top = c_low * (T::one() + conc.level_band);
    let approach_top = c_low * (T::one() + conc.approach_band);

    let mut records: Vec<FlowRecord<T>> = Vec::new();
    let mut snapshots = Vec::new();
    let mut next_exponent = *SNAPSHOT_EXPONENTS.start();
    let mut s = T::zero();
    let mut dissipation = T::zero();
    let mut j = state.j;
    let mut last_step = T::zero();

    let (terminal, diagnostic) = loop {
        let k = records.len();
        let (radius, _) = half_energy_radius(&mesh, &state.eta);
        let norm = h1_raw(&mesh, &state.eta, &state.eta).max(T::zero()).sqrt();
        let record = FlowRecord {
            iter: k,
            s,
            j,
            grad_norm: state.grad_norm,
            max_u: state.eta.iter().fold(T::zero(), |m, v| m.max(v.abs())),
            min_u: state.eta.iter().copied().fold(T::infinity(), T::min),
            half_energy_radius: radius,
            in_m1: mp_member_from(data, c_low, &state.parts, 1),
            norm_error: (norm - T::one()).abs(),
            tangency: h1_raw(&mesh, &state.grad, &state.eta).abs(),
            quadratic: state.parts.quadratic,
            nonlinear: state.parts.nonlinear,
            step: last_step,
        };
        records.push(record);

        while next_exponent <= *SNAPSHOT_EXPONENTS.end()
            && state.grad_norm < lit::<T>(10f64.powi(-(next_exponent as i32)))
        {
            snapshots.push(Snapshot {
                exponent: next_exponent,
                iter: k,
                field: Field::from_raw(&mesh, state.eta.clone()),
            });
            next_exponent += 1;
        }

        if state.grad_norm <= config.grad_tol {
            break (
                Terminal::PsConverged,
                format!("gradient norm {:e} at or below {:e}", to_f64(state.grad_norm), to_f64(config.grad_tol)),
            );
        }
        if radius < conc.radius_factor * h_mesh {
            break (
                Terminal::Concentrated,
                format!("half-energy radius {:e} below {} mesh spacings", to_f64(radius), conc.radius_factor),
            );
        }
        let near_level = |r: &FlowRecord<T>, top: T| r.j >= c_low && r.j <= top && r.grad_norm >= conc.min_grad;
        if k >= conc.approach_len
            && near_level(&record, level_top)
            && records[k - conc.approach_len..k].iter().all(|r| near_level(r, approach_top))
        {
            break (
                Terminal::Concentrated,
                format!(
                    "quotient {j} within {} of the threshold {c_low} while the gradient stays at {:e}",
                    conc.level_band,
                    to_f64(state.grad_norm)
                ),
            );
        }
        if !mp_member_from(data, c_low, &state.parts, config.monitor_level) {
            break (Terminal::Stalled, format!("iterate left M_{}", config.monitor_level));
        }
        if k >= config.max_iter {
            break (Terminal::Cap, format!("iteration cap {} reached", config.max_iter));
        }

        let trial = if k == 0 {
            config.initial_step
        } else {
            config.initial_step.min(last_step * lit(2.0))
        };
        let acc = match line_search(data, config, &state, trial) {
            Ok(acc) => acc,
            Err(Error::Stagnation { step }) => {
                break (Terminal::Stalled, format!("backtracking underflow at step {step:e}"))
            }
            Err(e) => return Err(e),
        };
        s = s + acc.step;
        dissipation = dissipation + acc.step * state.grad_norm * state.grad_norm;
        j = j + acc.increment;
        last_step = acc.step;
        let parts = acc.parts;
        let grad = data.grad_quotient_raw(&acc.eta, &parts)?;
        let grad_norm = h1_raw(&mesh, &grad, &grad).max(T::zero()).sqrt();
        state = State { eta: acc.eta, parts, j: data.quotient_from(&parts)?, grad, grad_norm };
    };

    Ok(FlowOutcome {
        trace: FlowTrace { records, snapshots, terminal, diagnostic, dissipation },
        field: Field::from_raw(&mesh, state.eta),
    })
}

/// Rescaled Palais–Smale candidate u = β₁η.
#[derive(Debug, Clone)]
pub struct PsCandidate<T: Real> {
    pub u: Field<T>,
    pub beta1: T,
    pub beta2: T,
    pub quotient: T,
    pub i_value: T,
    pub grad_i_norm: T,
    /// ‖∂J(η) − β₂∂I(u)‖ / (‖∂J(η)‖ + β₂‖u‖).
    pub gradient_identity_error: T,
    /// |I(u) − J^{n/2}/n| / (J^{n/2}/n).
    pub energy_identity_error: T,
}

/// β₁ = J^{n/4}/N^{1/2}, β₂ = 2J^{(4−n)/4}/N^{1/2}, u = β₁η, with both
/// rescaling identities checked.
pub fn extract_ps<T: Real>(data: &ProblemData<T>, eta: &Field<T>) -> Result<PsCandidate<T>> {
    let parts = data.parts(eta)?;
    let j = data.quotient_from(&parts)?;
    if !(parts.quadratic > T::zero()) {
        return Err(Error::Domain(format!("quadratic part {} is not positive", parts.quadratic)));
    }
    let n: T = from_usize(data.dimension());
    let four: T = lit(4.0);
    let root_n = parts.quadratic.sqrt();
    let beta1 = j.powf(n / four) / root_n;
    let beta2 = lit::<T>(2.0) * j.powf((four - n) / four) / root_n;
    let u = eta.scaled(beta1);

    let grad_j = data.grad_quotient_raw(eta.values(), &parts)?;
    let grad_u = grad_i(data, &u)?;
    let mesh = data.mesh();
    let diff: Vec<T> = grad_j.iter().zip(grad_u.values()).map(|(a, b)| *a - beta2 * *b).collect();
    let scale = h1_raw(mesh, &grad_j, &grad_j).sqrt() + beta2 * norm_h1(&u);
    let gradient_identity_error = h1_raw(mesh, &diff, &diff).sqrt() / scale;

    let level = j.powf(n / lit(2.0)) / n;
    let i_value = data.energy_from(&data.parts(&u)?);
    let energy_identity_error = (i_value - level).abs() / level;

    let fail: T = lit(IDENTITY_FAILURE);
    if !(gradient_identity_error <= fail && energy_identity_error <= fail) {
        return Err(Error::Consistency(format!(
            "rescaling identities violated: gradient {:e}, energy {:e}",
            to_f64(gradient_identity_error),
            to_f64(energy_identity_error)
        )));
    }
    Ok(PsCandidate {
        grad_i_norm: norm_h1(&grad_u),
        u,
        beta1,
        beta2,
        quotient: j,
        i_value,
        gradient_identity_error,
        energy_identity_error,
    })
}

/// Positive bounds [c̃₂, c̃₃] covering every β₁ and β₂ of a set of candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn beta_bounds<T: Real>(candidates: &[PsCandidate<T>]) -> Option<BetaBounds> {
    if candidates.is_empty() {
        return None;
    }
    let all = candidates.iter().flat_map(|c| [to_f64(c.beta1), to_f64(c.beta2)]);
    let (lower, upper) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b), hi.max(b)));
    Some(BetaBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::eval_quotient;
    use crate::mesh::{inner_h1, Coefficient};
    use crate::spectral::compute_eigenbasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(m: usize, fraction: f64) -> ProblemData<f64> {
        let mesh = Arc::new(DomainMesh::unit_ball(3, m).unwrap());
        let basis = compute_eigenbasis(&mesh, 1).unwrap();
        ProblemData::with_mu_fraction(Coefficient::Constant(1.0), fraction, &basis, false).unwrap()
    }

    fn random_start(data: &ProblemData<f64>, rng: &mut ChaCha8Rng) -> Field<f64> {
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
        let u = Field::radial_profile(data.mesh(), &[0.0; 3], |r| {
            (1.0 - r * r) * (c[0] + c[1] * (5.0 * r * c[2]).cos().powi(2))
        });
        initial_data(data, &InitialStrategy::UserField(u)).unwrap()
    }

    #[test]
    fn steps_descend_and_stay_nonnegative() {
        let data = problem(300, 0.5);
        let config = FlowConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let eta = random_start(&data, &mut rng);
            let out = flow_step(&data, &config, &eta).unwrap();
            assert!(!out.converged);
            assert!(eval_quotient(&data, &out.field).unwrap() < eval_quotient(&data, &eta).unwrap());
            assert!(out.field.min_value() >= 0.0);
            assert!((norm_h1(&out.field) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn converged_start_is_a_fixed_point() {
        let data = problem(300, 0.5);
        let config = FlowConfig::default();
        let first = run_flow(&data, &config, &initial_data(&data, &InitialStrategy::Eigenfunction).unwrap()).unwrap();
        assert_eq!(first.terminal(), Terminal::PsConverged);
        let again = run_flow(&data, &config, &first.field).unwrap();
        assert_eq!(again.terminal(), Terminal::PsConverged);
        assert_eq!(again.trace.iterations(), 0);
        let step = flow_step(&data, &config, &first.field).unwrap();
        assert!(step.converged);
        assert_eq!(step.field.values(), first.field.values());
    }

    #[test]
    fn trace_invariants_on_a_converging_run() {
        let data = problem(500, 0.5);
        let config = FlowConfig::default();
        let start = initial_data(&data, &InitialStrategy::Bump).unwrap();
        let out = run_flow(&data, &config, &start).unwrap();
        assert_eq!(out.terminal(), Terminal::PsConverged, "{}", out.trace.diagnostic);
        let sum = out.trace.summary();
        assert!(sum.monotone && sum.nonnegative);
        assert!(sum.max_norm_error <= 1e-12);
        assert!(sum.max_tangency <= 1e-9);
        assert!(sum.dissipation.is_finite());
        let exps: Vec<u32> = out.trace.snapshots.iter().map(|s| s.exponent).collect();
        assert_eq!(exps, (2..=8).collect::<Vec<_>>());
        let g = data.grad_quotient_raw(out.field.values(), &data.parts(&out.field).unwrap()).unwrap();
        assert!(h1_raw(data.mesh(), &g, &g).sqrt() <= 1e-8);
    }

    #[test]
    fn rescaling_identities_at_random_fields() {
        let data = problem(400, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let eta = random_start(&data, &mut rng);
            let c = extract_ps(&data, &eta).unwrap();
            assert!(c.gradient_identity_error <= 1e-10, "{}", c.gradient_identity_error);
            assert!(c.energy_identity_error <= 1e-10, "{}", c.energy_identity_error);
            let j = eval_quotient(&data, &eta).unwrap();
            assert!((c.i_value - j.powf(1.5) / 3.0).abs() <= 1e-10 * c.i_value);
        }
    }

    #[test]
    fn inadmissible_starts() {
        let mesh = Arc::new(DomainMesh::<f64>::unit_ball(3, 100).unwrap());
        let basis = compute_eigenbasis(&mesh, 1).unwrap();
        let data = ProblemData::with_mu_fraction(Coefficient::Constant(-1.0), 0.5, &basis, false).unwrap();
        for s in [InitialStrategy::Eigenfunction, InitialStrategy::Bump] {
            assert!(matches!(initial_data(&data, &s), Err(Error::Admissibility(_))));
        }
        let good = problem(100, 0.5);
        let zero = Field::zeros(good.mesh());
        assert!(matches!(
            initial_data(&good, &InitialStrategy::UserField(zero)),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn positivity_projection_preserves_smooth_quotients() {
        let data = problem(400, 0.5);
        let u = Field::radial_profile(data.mesh(), &[0.0; 3], |r| (std::f64::consts::PI * r).sin() / r.max(1e-12));
        let u = u.map(|v| v.max(0.0));
        let neg = u.scaled(-1.0);
        assert!((eval_quotient(&data, &u).unwrap() - eval_quotient(&data, &neg.abs()).unwrap()).abs() <= 1e-12);
        let g = data.grad_quotient_raw(u.values(), &data.parts(&u).unwrap()).unwrap();
        let t = inner_h1(&Field::from_raw(data.mesh(), g), &u).unwrap();
        assert!(t.abs() < 1e-9);
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let data = problem(100, 0.5);
        let config = FlowConfig { max_iter: 3, ..FlowConfig::default() };
        let out = run_flow(&data, &config, &initial_data(&data, &InitialStrategy::Bump).unwrap()).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,s,J,grad_norm,max_u,half_energy_radius,in_M1"));
        assert_eq!(lines.count(), out.trace.records.len());
    }

    #[test]
    fn config_validation() {
        let bad = FlowConfig::<f64> { backtrack: 1.0, ..FlowConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = FlowConfig::<f64> { grad_tol: 0.0, ..FlowConfig::default() };
        assert!(bad.validate().is_err());
        assert!(FlowConfig::<f64>::default().validate().is_ok());
    }
}
