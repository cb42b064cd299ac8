use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::operators::energy_shares;
use crate::mesh::{DomainMesh, Field, Point};
use crate::scalar::{from_usize, lit, Real};

/// Thresholds that classify a flow run as concentrating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ConcentrationConfig<T> {
    /// The monitor fires when the half-energy radius drops below this many
    /// mesh spacings.
    pub radius_factor: T,
    /// Relative band above c_∞ that counts as having reached the level.
    pub level_band: T,
    /// Wider band the preceding iterates must all lie in.
    pub approach_band: T,
    /// Number of preceding iterates checked against `approach_band`.
    pub approach_len: usize,
    /// The level rule only applies while the quotient gradient is at least this.
    pub min_grad: T,
}

impl<T: Real> Default for ConcentrationConfig<T> {
    fn default() -> Self {
        Self {
            radius_factor: lit(4.0),
            level_band: lit(1e-3),
            approach_band: lit(1e-2),
            approach_len: 10,
            min_grad: lit(1e-2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport<T> {
    /// Radius of the smallest ball around `center_node` holding half of ∫|∇u|².
    pub half_energy_radius: T,
    /// max |u|.
    pub peak: T,
    /// Node with the largest Dirichlet energy density (always 0 on radial meshes).
    pub center_node: usize,
    pub flag: bool,
}

/// Half-energy radius with the default 4h threshold.
pub fn concentration_monitor<T: Real>(u: &Field<T>) -> Result<ConcentrationReport<T>> {
    concentration_monitor_with(u, lit(4.0))
}

pub fn concentration_monitor_with<T: Real>(u: &Field<T>, radius_factor: T) -> Result<ConcentrationReport<T>> {
    if u.is_zero() {
        return Err(Error::Precondition("concentration monitor needs a nonzero field".into()));
    }
    let mesh = u.mesh();
    let (radius, center_node) = half_energy_radius(mesh, u.values());
    Ok(ConcentrationReport {
        half_energy_radius: radius,
        peak: u.max_abs(),
        center_node,
        flag: radius < radius_factor * mesh.spacing(),
    })
}

pub(crate) fn half_energy_radius<T: Real>(mesh: &DomainMesh<T>, u: &[T]) -> (T, usize) {
    let shares = energy_shares(mesh, u);
    let total: T = shares.iter().copied().sum();
    let half = total * lit(0.5);
    match mesh {
        DomainMesh::RadialBall(b) => {
            // Cumulative energy over the faces r_{k+1/2}, interpolated inside
            // the crossing cell.
            let a = b.conductance();
            let h = mesh.spacing();
            let mut acc = T::zero();
            for k in 0..u.len() {
                let next = if k + 1 < u.len() { u[k + 1] } else { T::zero() };
                let e = a[k] * (u[k] - next).powi(2);
                if acc + e >= half && e > T::zero() {
                    let inner = if k == 0 { T::zero() } else { (from_usize::<T>(k) - lit(0.5)) * h };
                    let outer = (from_usize::<T>(k) + lit(0.5)) * h;
                    return (inner + (half - acc) / e * (outer - inner), 0);
                }
                acc = acc + e;
            }
            (b.radius(), 0)
        }
        DomainMesh::Box3(_) => {
            let w = mesh.weights();
            let center = (0..u.len())
                .max_by(|&i, &j| {
                    let di = shares[i] / w[i];
                    let dj = shares[j] / w[j];
                    di.partial_cmp(&dj).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i))
                })
                .unwrap_or(0);
            let c = mesh.node_point(center);
            let mut order: Vec<(T, usize)> = (0..u.len()).map(|i| (mesh.node_distance(i, &c), i)).collect();
            order.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)));
            let mut acc = T::zero();
            let mut prev = T::zero();
            for (d, i) in order {
                let e = shares[i];
                if acc + e >= half && e > T::zero() {
                    return (prev + (half - acc) / e * (d - prev), center);
                }
                acc = acc + e;
                prev = d;
            }
            (prev, center)
        }
    }
}

/// Aubin–Talenti profile c_n (ε/(ε² + d²))^{(n−2)/2} times a cut-off that
/// is 1 for d ≤ ρ/2 and falls to 0 at ρ = dist(center, ∂Ω) along a cubic
/// smoothstep.
pub fn talenti_bubble<T: Real>(mesh: &Arc<DomainMesh<T>>, center: &Point<T>, eps: T) -> Result<Field<T>> {
    mesh.validate_center(center)?;
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::Parameter(format!("bubble scale must be positive, got {eps}")));
    }
    let n = mesh.dimension();
    let nf: T = from_usize(n);
    let two: T = lit(2.0);
    let amplitude = (nf * (nf - two)).powf((nf - two) / lit(4.0));
    let rho = mesh.boundary_distance(center);
    Ok(Field::radial_profile(mesh, center, |d| {
        let s = (two * (rho - d) / rho).max(T::zero()).min(T::one());
        let cut = s * s * (lit::<T>(3.0) - two * s);
        amplitude * (eps / (eps * eps + d * d)).powf((nf - two) / two) * cut
    }))
}
