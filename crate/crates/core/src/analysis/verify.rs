use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{grad_i, ConstantsReport, ProblemData};
use crate::mesh::operators::{neg_laplacian_raw, signed_power, weighted_dot};
use crate::mesh::{norm_h1, Field};
use crate::scalar::{to_f64, Real};

/// ‖∂I(u)‖ at or below this counts as a critical point.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Relative tolerance of the identity I(u) = N(u)/n at critical points.
pub const CRITICAL_IDENTITY_TOL: f64 = 1e-8;
/// Relative slack on the lower window bound, which an exact minimizer
/// attains up to rounding.
pub const WINDOW_SLACK: f64 = 1e-10;
/// Relative tolerance for I(u) = ϖ.
pub const LEAST_LEVEL_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    /// ‖∂I(u)‖ in H¹₀.
    pub residual: f64,
    /// Weighted L² norm of −Δu − K|u|^{q−1}u − μu.
    pub pde_residual: f64,
    pub min_u: f64,
    pub i_value: f64,
    /// N(u) = ‖u‖² − μ‖u‖₂².
    pub quadratic: f64,
    /// D(u) = ∫K|u|^{q+1}.
    pub nonlinear: f64,
    /// D^{(n−2)/n} · L.
    pub window_low: f64,
    /// S · D^{(n−2)/n} / K_∞^{(n−2)/n}.
    pub window_high: f64,
    /// (N − low)/(high − low); in [0, 1) inside the window.
    pub window_position: f64,
    pub in_window: bool,
    /// |I − N/n| / |I|, evaluated only when the residual is small.
    pub critical_identity_error: Option<f64>,
    /// ϖ ≤ I(u) < c^∞.
    pub energy_in_window: bool,
    /// |I(u) − ϖ| ≤ 1e-2 ϖ.
    pub least_level: bool,
    pub verified: bool,
}

pub fn verify_solution<T: Real>(data: &ProblemData<T>, consts: &ConstantsReport<T>, u: &Field<T>) -> Result<SolutionReport> {
    data.check(u)?;
    if u.is_zero() {
        return Err(Error::Precondition("cannot verify the zero field".into()));
    }
    let n = data.dimension() as f64;
    let mesh = data.mesh();
    let residual = to_f64(norm_h1(&grad_i(data, u)?));

    let lap = neg_laplacian_raw(mesh, u.values());
    let nl = signed_power(data.coefficient(), u.values(), data.q());
    let pde: Vec<T> = lap
        .iter()
        .zip(&nl)
        .zip(u.values())
        .map(|((l, g), v)| *l - *g - data.mu() * *v)
        .collect();
    let pde_residual = to_f64(weighted_dot(mesh.weights(), &pde, &pde).sqrt());

    let parts = data.parts(u)?;
    let quadratic = to_f64(parts.quadratic);
    let nonlinear = to_f64(parts.nonlinear);
    let i_value = to_f64(data.energy_from(&parts));
    let e = to_f64(data.quotient_exponent());
    let scale = if nonlinear > 0.0 { nonlinear.powf(e) } else { f64::NAN };
    let window_low = scale * to_f64(consts.l_est);
    let window_high = scale * to_f64(consts.c_low);
    let in_window = nonlinear > 0.0 && quadratic >= window_low * (1.0 - WINDOW_SLACK) && quadratic < window_high;
    let window_position = (quadratic - window_low) / (window_high - window_low);

    let critical_identity_error =
        (residual <= RESIDUAL_TOL).then(|| (i_value - quadratic / n).abs() / i_value.abs());
    let varpi = to_f64(consts.varpi);
    let energy_in_window = i_value >= varpi * (1.0 - WINDOW_SLACK) && i_value < to_f64(consts.c_sup);
    let least_level = (i_value - varpi).abs() <= LEAST_LEVEL_TOL * varpi;

    let min_u = to_f64(u.min_value());
    let verified = residual <= RESIDUAL_TOL
        && min_u > 0.0
        && in_window
        && critical_identity_error.is_none_or(|err| err <= CRITICAL_IDENTITY_TOL);
    Ok(SolutionReport {
        residual,
        pde_residual,
        min_u,
        i_value,
        quadratic,
        nonlinear,
        window_low,
        window_high,
        window_position,
        in_window,
        critical_identity_error,
        energy_in_window,
        least_level,
        verified,
    })
}
