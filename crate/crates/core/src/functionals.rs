//! Energy functional, Rayleigh-type quotient and their H¹₀ gradients for
//!
//! ```text
//!   −Δu = K(x)|u|^{q−1}u + μu in Ω,   u = 0 on ∂Ω,   q + 1 = 2n/(n−2).
//! ```
//!
//! With N(u) = ‖u‖² − μ‖u‖₂² and D(u) = ∫K|u|^{q+1}:
//!
//! * I(u) = ½‖u‖² − D(u)/(q+1) − (μ/2)‖u‖₂²
//! * J(u) = N(u) / D(u)^{(n−2)/n}, defined where D(u) > 0.
//!
//! Gradients are Riesz representatives in H¹₀, each costing one Poisson solve.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::operators::{h1_raw, poisson_raw, power_integral_raw, signed_power, weighted_dot};
use crate::mesh::{Coefficient, DomainMesh, Field, PoissonOptions};
use crate::scalar::{critical_power, from_usize, lit, sobolev_constant, to_f64, Real};
use crate::spectral::EigenBasis;

/// Relative tolerance used to accept μ = μ₁ on the first-eigenvalue branch.
pub const FIRST_EIGENVALUE_TOL: f64 = 1e-9;

/// Coefficient, spectral parameter and mesh of one problem instance.
#[derive(Debug, Clone)]
pub struct ProblemData<T: Real> {
    mesh: Arc<DomainMesh<T>>,
    k: Coefficient<T>,
    mu: T,
    mu1: T,
    e1: Field<T>,
    first_eigenvalue: bool,
    poisson: PoissonOptions<T>,
}

/// The pieces every functional is assembled from.
#[derive(Debug, Clone, Copy)]
pub struct Parts<T> {
    /// ‖u‖² = ∫|∇u|².
    pub h1: T,
    /// ‖u‖₂².
    pub l2: T,
    /// N(u) = ‖u‖² − μ‖u‖₂².
    pub quadratic: T,
    /// D(u) = ∫K|u|^{q+1}.
    pub nonlinear: T,
}

impl<T: Real> ProblemData<T> {
    /// Problem with 0 < μ < μ₁, where μ₁ is the first value of `basis`.
    pub fn new(k: Coefficient<T>, mu: T, basis: &EigenBasis<T>) -> Result<Self> {
        Self::build(k, mu, basis, false)
    }

    /// Problem at μ = μ₁ (the branch where the quadratic part degenerates).
    pub fn at_first_eigenvalue(k: Coefficient<T>, basis: &EigenBasis<T>) -> Result<Self> {
        Self::build(k, basis.mu1(), basis, true)
    }

    /// Problem with μ = fraction · μ₁; `fraction` = 1 requires `allow_first`.
    pub fn with_mu_fraction(
        k: Coefficient<T>,
        fraction: T,
        basis: &EigenBasis<T>,
        allow_first: bool,
    ) -> Result<Self> {
        Self::build(k, fraction * basis.mu1(), basis, allow_first)
    }

    fn build(k: Coefficient<T>, mu: T, basis: &EigenBasis<T>, allow_first: bool) -> Result<Self> {
        let e1 = basis.e1().clone();
        let mesh = Arc::clone(e1.mesh());
        k.check_mesh(&mesh)?;
        let mu1 = basis.mu1();
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::Precondition(format!("mu must be positive, got {mu}")));
        }
        let at_first = ((mu - mu1) / mu1).abs() <= lit(FIRST_EIGENVALUE_TOL);
        if allow_first {
            if !(mu < mu1 || at_first) {
                return Err(Error::Precondition(format!(
                    "mu = {mu} exceeds the first eigenvalue {mu1}"
                )));
            }
        } else if !(mu < mu1) || at_first {
            return Err(Error::Precondition(format!(
                "mu = {mu} must lie strictly below the first eigenvalue {mu1} \
                 unless the first-eigenvalue branch is enabled"
            )));
        }
        Ok(Self {
            mesh,
            k,
            mu: if allow_first && at_first { mu1 } else { mu },
            mu1,
            e1,
            first_eigenvalue: allow_first,
            poisson: PoissonOptions::default(),
        })
    }

    pub fn mesh(&self) -> &Arc<DomainMesh<T>> {
        &self.mesh
    }

    pub fn coefficient(&self) -> &Coefficient<T> {
        &self.k
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn mu1(&self) -> T {
        self.mu1
    }

    /// First eigenfunction with ‖e₁‖ = 1.
    pub fn e1(&self) -> &Field<T> {
        &self.e1
    }

    pub fn first_eigenvalue_branch(&self) -> bool {
        self.first_eigenvalue
    }

    pub fn dimension(&self) -> usize {
        self.mesh.dimension()
    }

    /// q = (n+2)/(n−2).
    pub fn q(&self) -> T {
        self.critical_power() - T::one()
    }

    /// q + 1 = 2n/(n−2).
    pub fn critical_power(&self) -> T {
        critical_power(self.dimension())
    }

    /// (n−2)/n, the exponent of D in the quotient.
    pub fn quotient_exponent(&self) -> T {
        let n = self.dimension();
        from_usize::<T>(n - 2) / from_usize(n)
    }

    /// K_∞ = sup K over the nodes.
    pub fn k_inf(&self) -> T {
        self.k.sup()
    }

    /// c_∞ = S / K_∞^{(n−2)/n}.
    pub fn quotient_threshold(&self) -> Result<T> {
        let k_inf = self.k_inf();
        if !(k_inf > T::zero()) {
            return Err(Error::Precondition(format!(
                "sup K = {k_inf} must be positive"
            )));
        }
        Ok(sobolev_constant::<T>(self.dimension()) / k_inf.powf(self.quotient_exponent()))
    }

    pub(crate) fn check(&self, u: &Field<T>) -> Result<()> {
        if Arc::ptr_eq(u.mesh(), &self.mesh) || **u.mesh() == *self.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn parts(&self, u: &Field<T>) -> Result<Parts<T>> {
        self.check(u)?;
        Ok(self.parts_raw(u.values()))
    }

    pub(crate) fn parts_raw(&self, u: &[T]) -> Parts<T> {
        let h1 = h1_raw(&self.mesh, u, u);
        let l2 = weighted_dot(self.mesh.weights(), u, u);
        Parts {
            h1,
            l2,
            quadratic: h1 - self.mu * l2,
            nonlinear: power_integral_raw(self.mesh.weights(), &self.k, u, self.critical_power()),
        }
    }

    pub(crate) fn energy_from(&self, p: &Parts<T>) -> T {
        let half: T = lit(0.5);
        half * p.quadratic - p.nonlinear / self.critical_power()
    }

    pub(crate) fn quotient_from(&self, p: &Parts<T>) -> Result<T> {
        if !(p.nonlinear > T::zero()) {
            return Err(Error::Domain(format!(
                "integral of K|u|^(q+1) is {} (must be positive)",
                p.nonlinear
            )));
        }
        Ok(p.quadratic / p.nonlinear.powf(self.quotient_exponent()))
    }

    /// Solves −Δg = f with the configured Poisson tolerance.
    pub(crate) fn riesz(&self, f: &[T]) -> Result<Vec<T>> {
        poisson_raw(&self.mesh, f, &self.poisson, None)
    }

    pub(crate) fn grad_quotient_raw(&self, u: &[T], p: &Parts<T>) -> Result<Vec<T>> {
        self.quotient_from(p)?;
        // ∂J = 2[u − P(μu + (N/D)K|u|^{q−1}u)] / D^{(n−2)/n}, which is
        // [∂N − ((n−2)/n)(N/D) ∂D] / D^{(n−2)/n} with the solves merged.
        let ratio = p.quadratic / p.nonlinear;
        let nl = signed_power(&self.k, u, self.q());
        let rhs: Vec<T> = u
            .iter()
            .zip(&nl)
            .map(|(v, g)| self.mu * *v + ratio * *g)
            .collect();
        let solved = self.riesz(&rhs)?;
        let scale = lit::<T>(2.0) / p.nonlinear.powf(self.quotient_exponent());
        Ok(u.iter().zip(&solved).map(|(v, s)| scale * (*v - *s)).collect())
    }

    pub(crate) fn grad_energy_raw(&self, u: &[T]) -> Result<Vec<T>> {
        let nl = signed_power(&self.k, u, self.q());
        let rhs: Vec<T> = u.iter().zip(&nl).map(|(v, g)| *g + self.mu * *v).collect();
        let solved = self.riesz(&rhs)?;
        Ok(u.iter().zip(&solved).map(|(v, s)| *v - *s).collect())
    }
}

/// I(u) = ½‖u‖² − (1/(q+1))∫K|u|^{q+1} − (μ/2)‖u‖₂².
pub fn eval_i<T: Real>(data: &ProblemData<T>, u: &Field<T>) -> Result<T> {
    let p = data.parts(u)?;
    Ok(data.energy_from(&p))
}

/// J(u) = N(u)/D(u)^{(n−2)/n}; errors when D(u) ≤ 0.
pub fn eval_quotient<T: Real>(data: &ProblemData<T>, u: &Field<T>) -> Result<T> {
    let p = data.parts(u)?;
    data.quotient_from(&p)
}

/// Riesz representative of I′(u): u − (−Δ)⁻¹(K|u|^{q−1}u + μu).
pub fn grad_i<T: Real>(data: &ProblemData<T>, u: &Field<T>) -> Result<Field<T>> {
    data.check(u)?;
    let g = data.grad_energy_raw(u.values())?;
    Ok(Field::from_raw(data.mesh(), g))
}

/// Riesz representative of J′(u).
pub fn grad_quotient<T: Real>(data: &ProblemData<T>, u: &Field<T>) -> Result<Field<T>> {
    let p = data.parts(u)?;
    let g = data.grad_quotient_raw(u.values(), &p)?;
    Ok(Field::from_raw(data.mesh(), g))
}

/// Membership in M_p:
/// ‖u‖ > 1/(p+1) and D(u) > (p·c_∞)^{n/(2−n)} · N(u)^{n/(n−2)}.
pub fn mp_member<T: Real>(
    data: &ProblemData<T>,
    report: &ConstantsReport<T>,
    u: &Field<T>,
    p: u32,
) -> Result<bool> {
    let parts = data.parts(u)?;
    Ok(mp_member_from(data, report.c_low, &parts, p))
}

pub(crate) fn mp_member_from<T: Real>(data: &ProblemData<T>, c_low: T, parts: &Parts<T>, p: u32) -> bool {
    let n = data.dimension();
    let pf: T = from_usize(p as usize);
    if !(parts.h1.max(T::zero()).sqrt() > T::one() / (pf + T::one())) {
        return false;
    }
    let nf: T = from_usize(n);
    let two: T = lit(2.0);
    let bound = (pf * c_low).powf(nf / (two - nf))
        * parts.quadratic.max(T::zero()).powf(nf / (nf - two));
    parts.nonlinear > bound
}

/// The scalar thresholds of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport<T> {
    pub dimension: usize,
    /// K_∞ = sup K.
    pub k_inf: T,
    /// Best Sobolev constant.
    pub s: T,
    /// Estimate of L_{K,μ} = inf{N(u) : D(u) = 1}.
    pub l_est: T,
    /// c^∞ = S^{n/2} / (n K_∞^{(n−2)/2}), the energy threshold.
    pub c_sup: T,
    /// c_∞ = (n c^∞)^{2/n} = S / K_∞^{(n−2)/n}, the quotient threshold.
    pub c_low: T,
    /// ϖ = (1/n) L^{n/2}, the least energy level.
    pub varpi: T,
    pub mu: T,
    pub mu1: T,
    /// L < c_∞ (strict, no guard band).
    pub lions_holds: bool,
}

pub fn compute_constants<T: Real>(data: &ProblemData<T>, l_est: T) -> Result<ConstantsReport<T>> {
    let k_inf = data.k_inf();
    if !(k_inf > T::zero()) {
        return Err(Error::Precondition(format!(
            "sup K = {k_inf} must be positive"
        )));
    }
    if !(l_est >= T::zero()) {
        return Err(Error::Precondition(format!("L estimate {l_est} must be non-negative")));
    }
    let n = data.dimension();
    let nf: T = from_usize(n);
    let two: T = lit(2.0);
    let s = sobolev_constant::<T>(n);
    let c_sup = s.powf(nf / two) / (nf * k_inf.powf((nf - two) / two));
    let c_low = (nf * c_sup).powf(two / nf);
    let varpi = l_est.powf(nf / two) / nf;
    Ok(ConstantsReport {
        dimension: n,
        k_inf,
        s,
        l_est,
        c_sup,
        c_low,
        varpi,
        mu: data.mu(),
        mu1: data.mu1(),
        lions_holds: l_est < c_low,
    })
}

impl<T: Real> ConstantsReport<T> {
    pub fn to_f64(&self) -> ConstantsReport<f64> {
        ConstantsReport {
            dimension: self.dimension,
            k_inf: to_f64(self.k_inf),
            s: to_f64(self.s),
            l_est: to_f64(self.l_est),
            c_sup: to_f64(self.c_sup),
            c_low: to_f64(self.c_low),
            varpi: to_f64(self.varpi),
            mu: to_f64(self.mu),
            mu1: to_f64(self.mu1),
            lions_holds: self.lions_holds,
        }
    }
}
