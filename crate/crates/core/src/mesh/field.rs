use std::sync::Arc;

use super::{DomainMesh, Point};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Values at the interior nodes of a mesh; the boundary trace is zero.
#[derive(Debug, Clone)]
pub struct Field<T: Real> {
    mesh: Arc<DomainMesh<T>>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(mesh: &Arc<DomainMesh<T>>) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![T::zero(); mesh.len()],
        }
    }

    pub fn constant(mesh: &Arc<DomainMesh<T>>, value: T) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![value; mesh.len()],
        }
    }

    /// Wraps `values`, checking the length and finiteness invariants.
    pub fn from_values(mesh: &Arc<DomainMesh<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::Length {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    /// Samples `f` at every interior node.
    pub fn from_fn(mesh: &Arc<DomainMesh<T>>, mut f: impl FnMut(Point<T>) -> T) -> Self {
        let values = (0..mesh.len()).map(|i| f(mesh.node_point(i))).collect();
        Self {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    /// Samples a profile of the distance to `center`.
    pub fn radial_profile(
        mesh: &Arc<DomainMesh<T>>,
        center: &Point<T>,
        mut profile: impl FnMut(T) -> T,
    ) -> Self {
        let values = (0..mesh.len())
            .map(|i| profile(mesh.node_distance(i, center)))
            .collect();
        Self {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    pub(crate) fn from_raw(mesh: &Arc<DomainMesh<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), mesh.len());
        Self {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    pub fn mesh(&self) -> &Arc<DomainMesh<T>> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_mesh(&self, other: &Field<T>) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    pub fn ensure_same_mesh(&self, other: &Field<T>) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(&self.mesh, self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn scaled(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn abs(&self) -> Self {
        self.map(T::abs)
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, factor: T, other: &Field<T>) -> Result<Self> {
        self.ensure_same_mesh(other)?;
        Ok(Self::from_raw(
            &self.mesh,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a + factor * *b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        self.add_scaled(-T::one(), other)
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        self.add_scaled(T::one(), other)
    }

    /// Nodewise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Field<T>) -> Result<T> {
        self.ensure_same_mesh(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }
}

/// A coefficient such as K(x): either a constant or sampled at the nodes.
#[derive(Debug, Clone)]
pub enum Coefficient<T: Real> {
    Constant(T),
    Nodal(Field<T>),
}

impl<T: Real> Coefficient<T> {
    #[inline]
    pub fn at(&self, i: usize) -> T {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Nodal(f) => f.values[i],
        }
    }

    /// Supremum over the nodes.
    pub fn sup(&self) -> T {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Nodal(f) => f.values.iter().copied().fold(T::neg_infinity(), T::max),
        }
    }

    /// Index of the node maximising the coefficient (lowest index on ties).
    pub fn argmax(&self) -> usize {
        match self {
            Coefficient::Constant(_) => 0,
            Coefficient::Nodal(f) => {
                let mut best = 0;
                for (i, v) in f.values.iter().enumerate() {
                    if *v > f.values[best] {
                        best = i;
                    }
                }
                best
            }
        }
    }

    pub fn check_mesh(&self, mesh: &Arc<DomainMesh<T>>) -> Result<()> {
        match self {
            Coefficient::Constant(_) => Ok(()),
            Coefficient::Nodal(f) if Arc::ptr_eq(f.mesh(), mesh) || **f.mesh() == **mesh => Ok(()),
            Coefficient::Nodal(_) => Err(Error::MeshMismatch),
        }
    }
}

impl<T: Real> From<T> for Coefficient<T> {
    fn from(value: T) -> Self {
        Coefficient::Constant(value)
    }
}

impl<T: Real> From<Field<T>> for Coefficient<T> {
    fn from(field: Field<T>) -> Self {
        Coefficient::Nodal(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_values() {
        let mesh = Arc::new(DomainMesh::<f64>::unit_ball(3, 16).unwrap());
        assert!(matches!(
            Field::from_values(&mesh, vec![0.0; 3]),
            Err(Error::Length { expected: 16, got: 3 })
        ));
        let mut v = vec![1.0; 16];
        v[4] = f64::NAN;
        assert!(matches!(Field::from_values(&mesh, v), Err(Error::NonFinite(4))));
    }

    #[test]
    fn mesh_identity_is_structural() {
        let a = Arc::new(DomainMesh::<f64>::unit_ball(3, 16).unwrap());
        let b = Arc::new(DomainMesh::<f64>::unit_ball(3, 16).unwrap());
        let c = Arc::new(DomainMesh::<f64>::unit_ball(3, 17).unwrap());
        assert!(Field::zeros(&a).same_mesh(&Field::zeros(&b)));
        assert!(Field::zeros(&a).add(&Field::zeros(&c)).is_err());
    }

    #[test]
    fn coefficient_sup_and_argmax() {
        let mesh = Arc::new(DomainMesh::<f64>::unit_ball(3, 16).unwrap());
        let k = Coefficient::Nodal(Field::radial_profile(&mesh, &[0.0; 3], |r| -(r - 0.5).powi(2)));
        assert_eq!(k.argmax(), 8);
        assert_eq!(k.sup(), 0.0);
        assert_eq!(Coefficient::Constant(2.0).sup(), 2.0);
    }
}
