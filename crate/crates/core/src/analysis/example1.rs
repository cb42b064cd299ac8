use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{eval_quotient, ProblemData};
use crate::mesh::{DomainMesh, Field, Point};
use crate::scalar::{lit, Real};

/// Geometry and shape constants of the sign-changing coefficient
///
/// ```text
///   K(x) = −(1 − θ(t)) + ε₀ θ(t)(d₀^β − η t^β),   t = |x − y₀|,
/// ```
///
/// where θ is 1 on [0, d₀ − ε₀], 0 on [d₀, ∞) and a cubic smoothstep between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Example1Params<T> {
    pub y0: Point<T>,
    /// Half of dist(y0, ∂Ω).
    pub d0: T,
    pub eps0: T,
    pub eta: T,
    pub beta: T,
}

impl<T: Real> Example1Params<T> {
    /// Parameters with d0 = dist(y0, ∂Ω)/2.
    pub fn for_mesh(mesh: &DomainMesh<T>, y0: Point<T>, eps0: T, eta: T, beta: T) -> Result<Self> {
        mesh.validate_center(&y0)?;
        let params = Self { y0, d0: mesh.boundary_distance(&y0) * lit(0.5), eps0, eta, beta };
        params.validate(mesh)?;
        Ok(params)
    }

    pub fn validate(&self, mesh: &DomainMesh<T>) -> Result<()> {
        mesh.validate_center(&self.y0)?;
        let dist = mesh.boundary_distance(&self.y0);
        if !(self.d0 > T::zero()) || (lit::<T>(2.0) * self.d0 - dist).abs() > lit::<T>(1e-9) * dist {
            return Err(Error::Parameter(format!(
                "d0 = {} must be half of dist(y0, boundary) = {dist}",
                self.d0
            )));
        }
        if !(self.eps0 > T::zero() && self.eps0 < self.d0) {
            return Err(Error::Parameter(format!("eps0 = {} must lie in (0, d0)", self.eps0)));
        }
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(Error::Parameter(format!("eta = {} must lie in (0, 1]", self.eta)));
        }
        if !(self.beta >= lit(2.0)) || !self.beta.is_finite() {
            return Err(Error::Parameter(format!("beta = {} must be at least 2", self.beta)));
        }
        Ok(())
    }

    /// Cut-off θ(t).
    pub fn cutoff(&self, t: T) -> T {
        let s = ((self.d0 - t) / self.eps0).max(T::zero()).min(T::one());
        s * s * (lit::<T>(3.0) - lit::<T>(2.0) * s)
    }

    pub fn coefficient_at(&self, t: T) -> T {
        let theta = self.cutoff(t);
        -(T::one() - theta) + self.eps0 * theta * (self.d0.powf(self.beta) - self.eta * t.powf(self.beta))
    }
}

pub fn build_example1_k<T: Real>(mesh: &Arc<DomainMesh<T>>, params: &Example1Params<T>) -> Result<Field<T>> {
    params.validate(mesh)?;
    Ok(Field::radial_profile(mesh, &params.y0, |t| params.coefficient_at(t)))
}

/// cos(π t/(4d₀)) / (ε + (t/(2d₀))²)^{1/2} on B(center, 2d₀), zero outside.
pub fn test_function_ue<T: Real>(mesh: &Arc<DomainMesh<T>>, center: &Point<T>, d0: T, eps: T) -> Result<Field<T>> {
    if mesh.dimension() != 3 {
        return Err(Error::UnsupportedDimension(mesh.dimension()));
    }
    mesh.validate_center(center)?;
    if !(d0 > T::zero()) || !(eps > T::zero()) {
        return Err(Error::Parameter(format!("d0 = {d0} and eps = {eps} must be positive")));
    }
    let support = lit::<T>(2.0) * d0;
    if mesh.boundary_distance(center) < support * (T::one() - lit(1e-12)) {
        return Err(Error::Parameter(format!("ball of radius {support} around the centre leaves the domain")));
    }
    let quarter = T::PI() / (lit::<T>(4.0) * d0);
    Ok(Field::radial_profile(mesh, center, |t| {
        if t >= support {
            T::zero()
        } else {
            (quarter * t).cos() / (eps + (t / support).powi(2)).sqrt()
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    pub eps: T,
    /// None where ∫K|u_ε|^{q+1} ≤ 0.
    pub quotient: Option<T>,
}

/// Quotient of u_ε for each ε.
pub fn ue_sweep<T: Real>(data: &ProblemData<T>, center: &Point<T>, d0: T, eps: &[T]) -> Result<Vec<SweepPoint<T>>> {
    eps.iter()
        .map(|&e| {
            let u = test_function_ue(data.mesh(), center, d0, e)?;
            let quotient = match eval_quotient(data, &u) {
                Ok(j) => Some(j),
                Err(Error::Domain(_)) => None,
                Err(other) => return Err(other),
            };
            Ok(SweepPoint { eps: e, quotient })
        })
        .collect()
}

/// Smallest defined quotient of a sweep.
pub fn sweep_minimum<T: Real>(points: &[SweepPoint<T>]) -> Option<T> {
    points.iter().filter_map(|p| p.quotient).reduce(T::min)
}

/// CSV with columns eps,quotient; undefined quotients are left empty.
pub fn write_sweep_csv<T: Real, W: Write>(points: &[SweepPoint<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "eps,quotient")?;
    for p in points {
        match p.quotient {
            Some(j) => writeln!(out, "{},{j}", p.eps)?,
            None => writeln!(out, "{},", p.eps)?,
        }
    }
    out.flush()
}

pub fn save_sweep_csv<T: Real>(points: &[SweepPoint<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep_csv(points, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Coefficient;

    fn ball(m: usize) -> Arc<DomainMesh<f64>> {
        Arc::new(DomainMesh::unit_ball(3, m).unwrap())
    }

    #[test]
    fn coefficient_plateaus() {
        let mesh = ball(400);
        let p = Example1Params::for_mesh(&mesh, [0.0; 3], 0.1, 1.0, 2.0).unwrap();
        assert_eq!(p.d0, 0.5);
        let k = build_example1_k(&mesh, &p).unwrap();
        assert!((k.values()[0] - 0.1 * 0.25).abs() <= 1e-12 * 0.025);
        let coef = Coefficient::Nodal(k.clone());
        assert_eq!(coef.sup(), k.values()[0]);
        for (i, r) in (0..mesh.len()).map(|i| (i, i as f64 / 400.0)) {
            if r >= 0.5 {
                assert_eq!(k.values()[i], -1.0);
            }
        }
    }

    #[test]
    fn parameter_bounds() {
        let mesh = ball(64);
        assert!(Example1Params::for_mesh(&mesh, [0.0; 3], 0.6, 1.0, 2.0).is_err());
        assert!(Example1Params::for_mesh(&mesh, [0.0; 3], 0.1, 1.5, 2.0).is_err());
        assert!(Example1Params::for_mesh(&mesh, [0.0; 3], 0.1, 1.0, 1.5).is_err());
        assert!(Example1Params::for_mesh(&mesh, [0.1, 0.0, 0.0], 0.1, 1.0, 2.0).is_err());
        let bad = Example1Params { y0: [0.0; 3], d0: 0.4, eps0: 0.1, eta: 1.0, beta: 2.0 };
        assert!(matches!(bad.validate(&mesh), Err(Error::Parameter(_))));
    }

    #[test]
    fn test_function_values() {
        let mesh = ball(200);
        let u = test_function_ue(&mesh, &[0.0; 3], 0.5, 1e-2).unwrap();
        assert!((u.values()[0] - 10.0).abs() < 1e-12);
        // With d0 = 1/4 the support ends at r = 1/2, which is node 100.
        let v = test_function_ue(&mesh, &[0.0; 3], 0.25, 0.1).unwrap();
        assert!(v.min_value() >= 0.0);
        assert!(v.values()[100].abs() < 1e-15);
        assert!(v.values()[101..].iter().all(|x| *x == 0.0));
        let cube = Arc::new(DomainMesh::<f64>::unit_cube(8).unwrap());
        let c = test_function_ue(&cube, &[0.5; 3], 0.25, 0.1).unwrap();
        assert!((c.max_abs() - 0.1f64.powf(-0.5)).abs() < 1e-12);
        let four = Arc::new(DomainMesh::<f64>::unit_ball(4, 32).unwrap());
        assert!(matches!(test_function_ue(&four, &[0.0; 3], 0.5, 0.1), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn sweep_marks_undefined_quotients() {
        let mesh = ball(400);
        let basis = crate::spectral::compute_eigenbasis(&mesh, 1).unwrap();
        let p = Example1Params::for_mesh(&mesh, [0.0; 3], 0.1, 1.0, 2.0).unwrap();
        let k = build_example1_k(&mesh, &p).unwrap();
        let data = ProblemData::at_first_eigenvalue(Coefficient::Nodal(k), &basis).unwrap();
        let pts = ue_sweep(&data, &[0.0; 3], p.d0, &[0.1, 1e-3]).unwrap();
        assert!(pts[0].quotient.is_none());
        assert!(pts[1].quotient.unwrap() > 0.0);
        assert_eq!(sweep_minimum(&pts), pts[1].quotient);
        let mut buf = Vec::new();
        write_sweep_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eps,quotient\n0.1,\n0.001,"), "{text}");
    }
}
