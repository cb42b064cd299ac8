//! The μ = μ₁ branch: when ∫K e₁^{q+1} < 0 the quadratic part stays
//! coercive on the cone where ∫K|u|^{q+1} ≥ 0, with constant tied to the
//! spectral gap (μ₂ − μ₁)/μ₂.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{initial_data, run_flow, FlowConfig, FlowTrace, InitialStrategy, Terminal};
use crate::functionals::{ProblemData, FIRST_EIGENVALUE_TOL};
use crate::mesh::operators::{power_integral_raw, weighted_dot};
use crate::mesh::{norm_h1, Field};
use crate::scalar::{to_f64, Real};
use crate::spectral::{spectral_gap_constant, EigenBasis};

/// Smallest quadratic part N(η) over the iterates of a flow line. All
/// iterates have ∫K|η|^{q+1} > 0, so all of them are eligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coercivity {
    pub iterates_checked: usize,
    /// None when no iterate was eligible.
    pub min_quadratic: Option<f64>,
    pub holds: bool,
}

pub fn coercivity_on_trace<T: Real>(trace: &FlowTrace<T>) -> Coercivity {
    let eligible = trace.records.iter().filter(|r| r.nonlinear >= T::zero());
    let (count, min) = eligible.fold((0usize, f64::INFINITY), |(c, m), r| (c + 1, m.min(to_f64(r.quadratic))));
    let min_quadratic = (count > 0).then_some(min);
    Coercivity { iterates_checked: count, min_quadratic, holds: min_quadratic.is_some_and(|m| m > 0.0) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub terminal: Terminal,
    pub iterations: usize,
    pub final_j: f64,
    pub coercivity: Coercivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem12Report {
    /// ∫K e₁^{q+1} with e₁ normalized in L².
    pub integral: f64,
    pub applicable: bool,
    pub gap: f64,
    pub flow: Option<BranchFlow>,
}

/// Evaluates the branch hypothesis; when it holds and `flow` is given, runs
/// the flow from a bump at argmax K and checks coercivity along it.
pub fn check_theorem12<T: Real>(
    data: &ProblemData<T>,
    basis: &EigenBasis<T>,
    flow: Option<&FlowConfig<T>>,
) -> Result<Theorem12Report> {
    let mu1 = basis.mu1();
    if !data.first_eigenvalue_branch() || ((data.mu() - mu1) / mu1).abs() > T::from(FIRST_EIGENVALUE_TOL).unwrap() {
        return Err(Error::Usage(format!(
            "the first-eigenvalue check needs mu = mu1 = {mu1} with the branch enabled (mu = {})",
            data.mu()
        )));
    }
    if basis.len() < 2 {
        return Err(Error::Precondition("the spectral gap needs at least two eigenpairs".into()));
    }
    let e1 = basis.l2_normalized(0);
    data.check(&e1)?;
    let integral = to_f64(power_integral_raw(
        data.mesh().weights(),
        data.coefficient(),
        e1.values(),
        data.critical_power(),
    ));
    let gap = to_f64(spectral_gap_constant(basis)?);
    let applicable = integral < 0.0;
    let flow = match (applicable, flow) {
        (true, Some(config)) => {
            let start = initial_data(data, &InitialStrategy::Bump)?;
            let out = run_flow(data, config, &start)?;
            Some(BranchFlow {
                terminal: out.terminal(),
                iterations: out.trace.iterations(),
                final_j: to_f64(out.trace.last().j),
                coercivity: coercivity_on_trace(&out.trace),
            })
        }
        _ => None,
    };
    Ok(Theorem12Report { integral, applicable, gap, flow })
}

/// ‖v‖² − μ₁‖v‖₂² − gap·‖v‖², which is nonnegative for v ⊥ e₁ in L².
pub fn spectral_gap_slack<T: Real>(basis: &EigenBasis<T>, v: &Field<T>) -> Result<T> {
    let gap = spectral_gap_constant(basis)?;
    v.ensure_same_mesh(basis.e1())?;
    let h1 = norm_h1(v).powi(2);
    let l2 = weighted_dot(v.mesh().weights(), v.values(), v.values());
    Ok(h1 - basis.mu1() * l2 - gap * h1)
}
