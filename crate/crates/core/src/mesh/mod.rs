//! Structured meshes of the domain: a radial discretization of a ball in
//! any dimension n ≥ 3 and a uniform grid on a three dimensional box.
//!
//! Both meshes carry only interior unknowns; Dirichlet values are zero and
//! never stored. The negative Laplacian is written as `L = W⁻¹ A` with `W`
//! the diagonal quadrature weights and `A` a symmetric positive definite
//! stiffness matrix, so `L` is self-adjoint in the weighted node product.

mod dump;
mod field;
pub(crate) mod operators;

pub use dump::{load_field, read_field, save_field, write_field};
pub use field::{Coefficient, Field};
pub use operators::{
    apply_neg_laplacian, inner_h1, inner_l2, integrate_power, norm_h1, norm_l2, poisson_residual,
    poisson_solve, poisson_solve_with, PoissonOptions,
};

use crate::error::{Error, Result};
use crate::scalar::{ball_volume, from_usize, lit, unit_sphere_area, Real};

/// Minimum number of radial intervals.
pub const MIN_RADIAL_NODES: usize = 16;
/// Minimum number of intervals along each box edge.
pub const MIN_BOX_NODES: usize = 8;

/// A point of R³. Radial meshes accept only the origin.
pub type Point<T> = [T; 3];

#[derive(Debug, Clone, PartialEq)]
pub enum DomainMesh<T: Real> {
    RadialBall(RadialBall<T>),
    Box3(BoxMesh<T>),
}

/// Radial finite-volume mesh of the ball B(0, R) ⊂ Rⁿ.
///
/// Unknowns sit at r_i = i·h for i = 0..m-1; r = R carries the Dirichlet
/// value. Node 0 is the centre, where the flux stencil reduces to the
/// reflected ghost-node form Δu(0) = n·u''(0).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBall<T: Real> {
    dimension: usize,
    radius: T,
    intervals: usize,
    spacing: T,
    radii: Vec<T>,
    weights: Vec<T>,
    /// a_{i+1/2} = |S^{n-1}| r_{i+1/2}^{n-1} / h for i = 0..m-1; the last
    /// entry couples node m-1 to the boundary.
    conductance: Vec<T>,
    boundary_weight: T,
}

/// Uniform grid on (0, Lx) × (0, Ly) × (0, Lz) with nx, ny, nz intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMesh<T: Real> {
    lengths: [T; 3],
    intervals: [usize; 3],
    spacing: [T; 3],
    interior: [usize; 3],
    cell_volume: T,
    weights: Vec<T>,
}

impl<T: Real> RadialBall<T> {
    pub fn new(dimension: usize, radius: T, intervals: usize) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::Config(format!(
                "radial mesh needs dimension >= 3, got {dimension}"
            )));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        if intervals < MIN_RADIAL_NODES {
            return Err(Error::Config(format!(
                "radial mesh needs at least {MIN_RADIAL_NODES} nodes, got {intervals}"
            )));
        }
        let h = radius / from_usize(intervals);
        let omega = unit_sphere_area::<T>(dimension);
        let nf: T = from_usize(dimension);
        let half: T = lit(0.5);
        let shell = |r: T| omega * r.powi(dimension as i32) / nf;

        let radii = (0..intervals).map(|i| from_usize::<T>(i) * h).collect();
        let mut weights = Vec::with_capacity(intervals);
        let mut conductance = Vec::with_capacity(intervals);
        for i in 0..intervals {
            let outer = (from_usize::<T>(i) + half) * h;
            let inner = if i == 0 {
                T::zero()
            } else {
                (from_usize::<T>(i) - half) * h
            };
            weights.push(shell(outer) - shell(inner));
            conductance.push(omega * outer.powi(dimension as i32 - 1) / h);
        }
        let last_face = (from_usize::<T>(intervals) - half) * h;
        let boundary_weight = shell(radius) - shell(last_face);
        Ok(Self {
            dimension,
            radius,
            intervals,
            spacing: h,
            radii,
            weights,
            conductance,
            boundary_weight,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub(crate) fn conductance(&self) -> &[T] {
        &self.conductance
    }
}

impl<T: Real> BoxMesh<T> {
    pub fn new(lengths: [T; 3], intervals: [usize; 3]) -> Result<Self> {
        for (axis, (&l, &n)) in lengths.iter().zip(&intervals).enumerate() {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::Config(format!(
                    "box edge {axis} must be positive, got {l}"
                )));
            }
            if n < MIN_BOX_NODES {
                return Err(Error::Config(format!(
                    "box axis {axis} needs at least {MIN_BOX_NODES} nodes, got {n}"
                )));
            }
        }
        let spacing = [
            lengths[0] / from_usize(intervals[0]),
            lengths[1] / from_usize(intervals[1]),
            lengths[2] / from_usize(intervals[2]),
        ];
        let interior = [intervals[0] - 1, intervals[1] - 1, intervals[2] - 1];
        let cell_volume = spacing[0] * spacing[1] * spacing[2];
        let count = interior.iter().product();
        Ok(Self {
            lengths,
            intervals,
            spacing,
            interior,
            cell_volume,
            weights: vec![cell_volume; count],
        })
    }

    pub fn lengths(&self) -> [T; 3] {
        self.lengths
    }

    pub fn intervals(&self) -> [usize; 3] {
        self.intervals
    }

    pub fn spacings(&self) -> [T; 3] {
        self.spacing
    }

    pub(crate) fn interior(&self) -> [usize; 3] {
        self.interior
    }

    #[cfg(test)]
    pub(crate) fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.interior[0] * (j + self.interior[1] * k)
    }

    #[inline]
    pub(crate) fn unindex(&self, p: usize) -> (usize, usize, usize) {
        let i = p % self.interior[0];
        let rest = p / self.interior[0];
        (i, rest % self.interior[1], rest / self.interior[1])
    }

    pub(crate) fn point(&self, p: usize) -> Point<T> {
        let (i, j, k) = self.unindex(p);
        [
            from_usize::<T>(i + 1) * self.spacing[0],
            from_usize::<T>(j + 1) * self.spacing[1],
            from_usize::<T>(k + 1) * self.spacing[2],
        ]
    }
}

impl<T: Real> DomainMesh<T> {
    pub fn radial(dimension: usize, radius: T, intervals: usize) -> Result<Self> {
        RadialBall::new(dimension, radius, intervals).map(DomainMesh::RadialBall)
    }

    pub fn unit_ball(dimension: usize, intervals: usize) -> Result<Self> {
        Self::radial(dimension, T::one(), intervals)
    }

    pub fn cuboid(lengths: [T; 3], intervals: [usize; 3]) -> Result<Self> {
        BoxMesh::new(lengths, intervals).map(DomainMesh::Box3)
    }

    pub fn unit_cube(intervals: usize) -> Result<Self> {
        Self::cuboid([T::one(); 3], [intervals; 3])
    }

    /// Spatial dimension n of the domain.
    pub fn dimension(&self) -> usize {
        match self {
            DomainMesh::RadialBall(b) => b.dimension,
            DomainMesh::Box3(_) => 3,
        }
    }

    /// Number of unknowns (interior nodes).
    pub fn len(&self) -> usize {
        self.weights().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weights of the interior nodes.
    pub fn weights(&self) -> &[T] {
        match self {
            DomainMesh::RadialBall(b) => &b.weights,
            DomainMesh::Box3(b) => &b.weights,
        }
    }

    /// Characteristic spacing h (the largest spacing on a box).
    pub fn spacing(&self) -> T {
        match self {
            DomainMesh::RadialBall(b) => b.spacing,
            DomainMesh::Box3(b) => b.spacing[0].max(b.spacing[1]).max(b.spacing[2]),
        }
    }

    /// |Ω| from the full node set, boundary cells included.
    pub fn total_volume(&self) -> T {
        match self {
            DomainMesh::RadialBall(b) => b.weights.iter().copied().sum::<T>() + b.boundary_weight,
            DomainMesh::Box3(b) => {
                let full: usize = b.intervals.iter().product();
                from_usize::<T>(full) * b.cell_volume
            }
        }
    }

    /// Exact |Ω| of the continuous domain.
    pub fn domain_volume(&self) -> T {
        match self {
            DomainMesh::RadialBall(b) => ball_volume(b.dimension, b.radius),
            DomainMesh::Box3(b) => b.lengths[0] * b.lengths[1] * b.lengths[2],
        }
    }

    /// Cartesian position of interior node `i`. On a radial mesh the node
    /// stands for the sphere of radius r_i and is reported as (r_i, 0, 0).
    pub fn node_point(&self, i: usize) -> Point<T> {
        match self {
            DomainMesh::RadialBall(b) => [b.radii[i], T::zero(), T::zero()],
            DomainMesh::Box3(b) => b.point(i),
        }
    }

    /// Distance from node `i` to `center`. Radial meshes measure from the
    /// origin (the only centre compatible with radial symmetry).
    pub fn node_distance(&self, i: usize, center: &Point<T>) -> T {
        match self {
            DomainMesh::RadialBall(b) => b.radii[i],
            DomainMesh::Box3(b) => {
                let p = b.point(i);
                ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2))
                    .sqrt()
            }
        }
    }

    /// Checks that `center` is a legal centre for radial profiles.
    pub fn validate_center(&self, center: &Point<T>) -> Result<()> {
        match self {
            DomainMesh::RadialBall(_) => {
                if center.iter().any(|c| *c != T::zero()) {
                    return Err(Error::Parameter(
                        "radial meshes only support profiles centred at the origin".into(),
                    ));
                }
            }
            DomainMesh::Box3(b) => {
                for axis in 0..3 {
                    if !(center[axis] > T::zero() && center[axis] < b.lengths[axis]) {
                        return Err(Error::Parameter(format!(
                            "centre coordinate {axis} = {} lies outside the box",
                            center[axis]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Origin of a ball, midpoint of a box.
    pub fn center(&self) -> Point<T> {
        match self {
            DomainMesh::RadialBall(_) => [T::zero(); 3],
            DomainMesh::Box3(b) => b.lengths.map(|l| l * lit(0.5)),
        }
    }

    /// dist(center, ∂Ω).
    pub fn boundary_distance(&self, center: &Point<T>) -> T {
        match self {
            DomainMesh::RadialBall(b) => {
                let r = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
                b.radius - r
            }
            DomainMesh::Box3(b) => (0..3)
                .map(|a| center[a].min(b.lengths[a] - center[a]))
                .fold(T::infinity(), T::min),
        }
    }

    /// Distance from node `i` to the boundary.
    pub fn node_boundary_distance(&self, i: usize) -> T {
        self.boundary_distance(&self.node_point(i))
    }

    /// Header line of the text field dump, without the trailing newline.
    pub fn header(&self) -> String {
        match self {
            DomainMesh::RadialBall(b) => {
                format!("mesh radial {} {} {}", b.dimension, b.radius, b.intervals)
            }
            DomainMesh::Box3(b) => format!(
                "mesh box {} {} {} {} {} {}",
                b.lengths[0], b.lengths[1], b.lengths[2], b.intervals[0], b.intervals[1], b.intervals[2]
            ),
        }
    }

    /// Short label of the spectrum the mesh can resolve.
    pub fn spectrum_label(&self) -> &'static str {
        match self {
            DomainMesh::RadialBall(_) => "radial",
            DomainMesh::Box3(_) => "full-3d",
        }
    }
}
