pub mod analysis;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod mesh;
pub mod scalar;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh = mesh::DomainMesh<f64>;
pub type Field = mesh::Field<f64>;
pub type Problem = functionals::ProblemData<f64>;
pub type Basis = spectral::EigenBasis<f64>;

pub type MeshF32 = mesh::DomainMesh<f32>;
pub type FieldF32 = mesh::Field<f32>;
pub type ProblemF32 = functionals::ProblemData<f32>;
pub type BasisF32 = spectral::EigenBasis<f32>;
