//! Leading Dirichlet eigenpairs of −Δ on a mesh.
//!
//! Pairs are found one at a time by inverse iteration: each sweep applies
//! the Poisson solve and removes the components along the pairs already
//! found (weighted-L² deflation). An iterate is accepted once the inverse
//! residual ‖μ P x − x‖_w falls below the tolerance, where P = (−Δ)⁻¹ and
//! μ is the Rayleigh quotient of x.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::operators::{h1_raw, neg_laplacian_raw, poisson_raw, weighted_dot};
use crate::mesh::{DomainMesh, Field, PoissonOptions};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions<T: Real> {
    pub tol: T,
    pub max_iter: usize,
    /// Relative residual of the inner Poisson solves (box meshes).
    pub poisson_tol: T,
}

impl<T: Real> Default for EigenOptions<T> {
    fn default() -> Self {
        let floor = T::epsilon() * lit(100.0);
        Self {
            tol: floor.max(lit(1e-10)),
            max_iter: 10_000,
            poisson_tol: floor.max(lit(1e-12)),
        }
    }
}

/// Which part of the Dirichlet spectrum the mesh resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// Radially symmetric modes of a ball only.
    Radial,
    /// The full spectrum of a three dimensional box.
    #[serde(rename = "full-3d")]
    Full3d,
}

#[derive(Debug, Clone)]
pub struct EigenPair<T: Real> {
    pub value: T,
    /// Eigenfunction normalised in H¹₀ (‖e‖ = 1).
    pub vector: Field<T>,
    /// ‖L e − μ e‖_w / (μ ‖e‖_w).
    pub residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct EigenBasis<T: Real> {
    kind: SpectrumKind,
    pairs: Vec<EigenPair<T>>,
}

impl<T: Real> EigenBasis<T> {
    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[EigenPair<T>] {
        &self.pairs
    }

    /// μ_{s+1} for zero-based `s`.
    pub fn value(&self, s: usize) -> T {
        self.pairs[s].value
    }

    pub fn values(&self) -> Vec<T> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn mu1(&self) -> T {
        self.pairs[0].value
    }

    /// First eigenfunction, positive with ‖e₁‖ = 1.
    pub fn e1(&self) -> &Field<T> {
        &self.pairs[0].vector
    }

    /// Eigenfunction `s` rescaled to unit weighted-L² norm.
    pub fn l2_normalized(&self, s: usize) -> Field<T> {
        let pair = &self.pairs[s];
        pair.vector.scaled(pair.value.sqrt())
    }

    /// Splits `u = α e₁ + v` with v L²-orthogonal to e₁.
    pub fn split_first_mode(&self, u: &Field<T>) -> Result<(T, Field<T>)> {
        let e1 = self.e1();
        u.ensure_same_mesh(e1)?;
        let w = u.mesh().weights();
        let alpha = weighted_dot(w, u.values(), e1.values()) / weighted_dot(w, e1.values(), e1.values());
        Ok((alpha, u.add_scaled(-alpha, e1)?))
    }

    pub fn report(&self) -> EigenReport {
        EigenReport {
            spectrum: self.kind,
            mu: self.pairs.iter().map(|p| to_f64(p.value)).collect(),
            gap: spectral_gap_constant(self).ok().map(to_f64),
            residuals: self.pairs.iter().map(|p| to_f64(p.residual)).collect(),
        }
    }
}

/// JSON shape of the `eigen` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub spectrum: SpectrumKind,
    pub mu: Vec<f64>,
    pub gap: Option<f64>,
    pub residuals: Vec<f64>,
}

pub fn compute_eigenbasis<T: Real>(mesh: &Arc<DomainMesh<T>>, count: usize) -> Result<EigenBasis<T>> {
    compute_eigenbasis_with(mesh, count, &EigenOptions::default())
}

pub fn compute_eigenbasis_with<T: Real>(
    mesh: &Arc<DomainMesh<T>>,
    count: usize,
    options: &EigenOptions<T>,
) -> Result<EigenBasis<T>> {
    if count == 0 {
        return Err(Error::Parameter("eigenbasis needs at least one pair".into()));
    }
    if count * 4 > mesh.len() {
        return Err(Error::Parameter(format!(
            "{count} eigenpairs requested on a mesh with {} unknowns",
            mesh.len()
        )));
    }
    let kind = match **mesh {
        DomainMesh::RadialBall(_) => SpectrumKind::Radial,
        DomainMesh::Box3(_) => SpectrumKind::Full3d,
    };
    let weights = mesh.weights();
    let poisson = PoissonOptions {
        tol: options.poisson_tol,
        max_iter: 0,
    };
    // L²-normalised eigenvectors found so far, used for deflation.
    let mut found: Vec<Vec<T>> = Vec::with_capacity(count);
    let mut pairs = Vec::with_capacity(count);

    for s in 0..count {
        let mut x = start_vector(mesh, s);
        deflate(weights, &found, &mut x);
        normalize_l2(weights, &mut x)?;
        let mut lambda = h1_raw(mesh, &x, &x);
        let mut converged = None;
        let mut best = T::infinity();
        let mut stalled = 0usize;
        for iter in 1..=options.max_iter {
            let guess: Vec<T> = x.iter().map(|v| *v / lambda).collect();
            let mut z = poisson_raw(mesh, &x, &poisson, Some(&guess))?;
            deflate(weights, &found, &mut z);
            let inv_res: Vec<T> = z.iter().zip(&x).map(|(z, x)| lambda * *z - *x).collect();
            let inv_res = weighted_dot(weights, &inv_res, &inv_res).sqrt();
            if inv_res <= options.tol {
                converged = Some(iter);
                break;
            }
            // A stalled residual at rounding level is as good as the arithmetic allows.
            if inv_res < best {
                best = inv_res;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 20 && best <= T::epsilon().sqrt() {
                    converged = Some(iter);
                    break;
                }
            }
            normalize_l2(weights, &mut z)?;
            x = z;
            lambda = h1_raw(mesh, &x, &x);
        }
        let Some(iterations) = converged else {
            return Err(Error::SolverFailure {
                iterations: options.max_iter,
                residual: to_f64(best),
            });
        };
        fix_sign(&mut x, s == 0);
        let lx = neg_laplacian_raw(mesh, &x);
        let diff: Vec<T> = lx.iter().zip(&x).map(|(l, x)| *l - lambda * *x).collect();
        let residual = weighted_dot(weights, &diff, &diff).sqrt() / lambda;
        if s == 0 {
            if let Some(i) = x.iter().position(|v| !(*v > T::zero())) {
                return Err(Error::Invariant(format!(
                    "first eigenfunction is not positive at node {i}"
                )));
            }
        }
        let h1 = lambda.sqrt();
        let vector = Field::from_raw(mesh, x.iter().map(|v| *v / h1).collect());
        found.push(x);
        pairs.push(EigenPair {
            value: lambda,
            vector,
            residual,
            iterations,
        });
    }
    Ok(EigenBasis { kind, pairs })
}

fn start_vector<T: Real>(mesh: &DomainMesh<T>, s: usize) -> Vec<T> {
    if s == 0 {
        // Positive everywhere, so it has a component along e₁.
        (0..mesh.len()).map(|i| mesh.node_boundary_distance(i)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + s as u64);
        (0..mesh.len()).map(|_| lit(rng.gen_range(-1.0..1.0))).collect()
    }
}

fn deflate<T: Real>(weights: &[T], basis: &[Vec<T>], x: &mut [T]) {
    // Two Gram–Schmidt passes.
    for _ in 0..2 {
        for e in basis {
            let c = weighted_dot(weights, x, e);
            for (xi, ei) in x.iter_mut().zip(e) {
                *xi = *xi - c * *ei;
            }
        }
    }
}

fn normalize_l2<T: Real>(weights: &[T], x: &mut [T]) -> Result<()> {
    let norm = weighted_dot(weights, x, x).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::Invariant("inverse iteration collapsed to zero".into()));
    }
    for v in x.iter_mut() {
        *v = *v / norm;
    }
    Ok(())
}

fn fix_sign<T: Real>(x: &mut [T], by_sum: bool) {
    let flip = if by_sum {
        x.iter().copied().sum::<T>() < T::zero()
    } else {
        let big = x
            .iter()
            .copied()
            .fold(T::zero(), |m, v| if v.abs() > m.abs() { v } else { m });
        big < T::zero()
    };
    if flip {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

/// inf_{s≥2} (μ_s − μ₁)/μ_s, attained at s = 2 since t ↦ (t − μ₁)/t increases.
pub fn spectral_gap_constant<T: Real>(basis: &EigenBasis<T>) -> Result<T> {
    gap_from_values(&basis.values())
}

pub fn gap_from_values<T: Real>(values: &[T]) -> Result<T> {
    if values.len() < 2 {
        return Err(Error::Precondition(
            "spectral gap needs at least two eigenvalues".into(),
        ));
    }
    let (mu1, mu2) = (values[0], values[1]);
    if !(mu2 > mu1) {
        return Err(Error::Invariant(format!(
            "degenerate basis: mu2 = {mu2} does not exceed mu1 = {mu1}"
        )));
    }
    Ok((mu2 - mu1) / mu2)
}
