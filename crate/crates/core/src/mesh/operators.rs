use super::{BoxMesh, Coefficient, DomainMesh, Field, RadialBall};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Stopping rule for the Poisson solve.
#[derive(Debug, Clone, Copy)]
pub struct PoissonOptions<T: Real> {
    /// Relative residual in the weighted L² norm.
    pub tol: T,
    /// Iteration cap for the conjugate gradient path; 0 picks a default
    /// proportional to the grid size.
    pub max_iter: usize,
}

impl<T: Real> Default for PoissonOptions<T> {
    fn default() -> Self {
        Self {
            tol: (T::epsilon() * lit(100.0)).max(lit(1e-10)),
            max_iter: 0,
        }
    }
}

/// `out = A u` where `A = W L` is the symmetric stiffness matrix.
pub(crate) fn stiffness<T: Real>(mesh: &DomainMesh<T>, u: &[T], out: &mut [T]) {
    match mesh {
        DomainMesh::RadialBall(b) => radial_stiffness(b, u, out),
        DomainMesh::Box3(b) => box_stiffness(b, u, out),
    }
}

fn radial_stiffness<T: Real>(b: &RadialBall<T>, u: &[T], out: &mut [T]) {
    let a = b.conductance();
    let m = u.len();
    let mut inward = T::zero();
    for i in 0..m {
        let next = if i + 1 < m { u[i + 1] } else { T::zero() };
        let flux = a[i] * (u[i] - next);
        out[i] = flux - inward;
        inward = flux;
    }
}

fn box_stiffness<T: Real>(b: &BoxMesh<T>, u: &[T], out: &mut [T]) {
    let [nx, ny, nz] = b.interior();
    let [hx, hy, hz] = b.spacings();
    let cx = hy * hz / hx;
    let cy = hx * hz / hy;
    let cz = hx * hy / hz;
    let two: T = lit(2.0);
    let sx = 1;
    let sy = nx;
    let sz = nx * ny;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = i + nx * (j + ny * k);
                let c = u[p];
                let west = if i > 0 { u[p - sx] } else { T::zero() };
                let east = if i + 1 < nx { u[p + sx] } else { T::zero() };
                let south = if j > 0 { u[p - sy] } else { T::zero() };
                let north = if j + 1 < ny { u[p + sy] } else { T::zero() };
                let down = if k > 0 { u[p - sz] } else { T::zero() };
                let up = if k + 1 < nz { u[p + sz] } else { T::zero() };
                out[p] = cx * (two * c - west - east)
                    + cy * (two * c - south - north)
                    + cz * (two * c - down - up);
            }
        }
    }
}

pub(crate) fn neg_laplacian_raw<T: Real>(mesh: &DomainMesh<T>, u: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); u.len()];
    stiffness(mesh, u, &mut out);
    for (o, w) in out.iter_mut().zip(mesh.weights()) {
        *o = *o / *w;
    }
    out
}

#[inline]
pub(crate) fn weighted_dot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a.iter().zip(b))
        .fold(T::zero(), |acc, (w, (x, y))| acc + *w * *x * *y)
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// ⟨u, v⟩ = ∫∇u·∇v in operator form, Σ (A u)_i v_i.
pub(crate) fn h1_raw<T: Real>(mesh: &DomainMesh<T>, u: &[T], v: &[T]) -> T {
    let mut au = vec![T::zero(); u.len()];
    stiffness(mesh, u, &mut au);
    dot(&au, v)
}

/// Second order negative Laplacian with zero Dirichlet data.
pub fn apply_neg_laplacian<T: Real>(u: &Field<T>) -> Field<T> {
    Field::from_raw(u.mesh(), neg_laplacian_raw(u.mesh(), u.values()))
}

/// Solves `-Δg = f` with zero Dirichlet data.
pub fn poisson_solve<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    poisson_solve_with(f, &PoissonOptions::default(), None)
}

/// Poisson solve with explicit tolerance and an optional initial guess
/// (used only by the iterative path).
pub fn poisson_solve_with<T: Real>(
    f: &Field<T>,
    options: &PoissonOptions<T>,
    guess: Option<&Field<T>>,
) -> Result<Field<T>> {
    if let Some(g) = guess {
        f.ensure_same_mesh(g)?;
    }
    let values = poisson_raw(f.mesh(), f.values(), options, guess.map(|g| g.values()))?;
    Ok(Field::from_raw(f.mesh(), values))
}

pub(crate) fn poisson_raw<T: Real>(
    mesh: &DomainMesh<T>,
    f: &[T],
    options: &PoissonOptions<T>,
    guess: Option<&[T]>,
) -> Result<Vec<T>> {
    match mesh {
        DomainMesh::RadialBall(b) => Ok(radial_solve(b, f)),
        DomainMesh::Box3(_) => conjugate_gradient(mesh, f, options, guess),
    }
}

/// Thomas algorithm on the tridiagonal system `A g = W f`.
fn radial_solve<T: Real>(b: &RadialBall<T>, f: &[T]) -> Vec<T> {
    let a = b.conductance();
    let w = &b.weights;
    let m = f.len();
    let mut upper = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    let mut inward = T::zero();
    let mut prev_upper = T::zero();
    let mut prev_rhs = T::zero();
    for i in 0..m {
        let diag = inward + a[i];
        let lower = -inward;
        let denom = diag - lower * prev_upper;
        upper[i] = if i + 1 < m { -a[i] / denom } else { T::zero() };
        rhs[i] = (w[i] * f[i] - lower * prev_rhs) / denom;
        prev_upper = upper[i];
        prev_rhs = rhs[i];
        inward = a[i];
    }
    let mut g = vec![T::zero(); m];
    g[m - 1] = rhs[m - 1];
    for i in (0..m - 1).rev() {
        g[i] = rhs[i] - upper[i] * g[i + 1];
    }
    g
}

fn conjugate_gradient<T: Real>(
    mesh: &DomainMesh<T>,
    f: &[T],
    options: &PoissonOptions<T>,
    guess: Option<&[T]>,
) -> Result<Vec<T>> {
    // Box weights are uniform, so L itself is symmetric in the plain dot
    // product and CG runs directly on L g = f.
    let n = f.len();
    let f_norm = dot(f, f).sqrt();
    if f_norm == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let cap = if options.max_iter == 0 {
        (10 * n).max(1000)
    } else {
        options.max_iter
    };
    let apply = |x: &[T], out: &mut [T]| {
        stiffness(mesh, x, out);
        for (o, w) in out.iter_mut().zip(mesh.weights()) {
            *o = *o / *w;
        }
    };
    let mut x = guess.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); n]);
    let mut ax = vec![T::zero(); n];
    apply(&x, &mut ax);
    let mut r: Vec<T> = f.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = options.tol * f_norm;
    let mut ap = vec![T::zero(); n];
    for iter in 0..cap {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::SolverFailure {
                iterations: iter,
                residual: to_f64(rr.sqrt() / f_norm),
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    // Recompute the true residual before declaring failure.
    apply(&x, &mut ax);
    let true_res = f
        .iter()
        .zip(&ax)
        .fold(T::zero(), |acc, (b, a)| acc + (*b - *a) * (*b - *a))
        .sqrt();
    if true_res <= target {
        return Ok(x);
    }
    Err(Error::SolverFailure {
        iterations: cap,
        residual: to_f64(true_res / f_norm),
    })
}

/// ‖L g − f‖_w / ‖f‖_w.
pub fn poisson_residual<T: Real>(g: &Field<T>, f: &Field<T>) -> Result<T> {
    g.ensure_same_mesh(f)?;
    let lg = neg_laplacian_raw(g.mesh(), g.values());
    let w = g.mesh().weights();
    let diff: Vec<T> = lg.iter().zip(f.values()).map(|(a, b)| *a - *b).collect();
    let den = weighted_dot(w, f.values(), f.values()).sqrt();
    let num = weighted_dot(w, &diff, &diff).sqrt();
    Ok(if den == T::zero() { num } else { num / den })
}

/// H¹₀ scalar product ∫∇u·∇v, evaluated as ⟨L u, v⟩_w.
pub fn inner_h1<T: Real>(u: &Field<T>, v: &Field<T>) -> Result<T> {
    u.ensure_same_mesh(v)?;
    Ok(h1_raw(u.mesh(), u.values(), v.values()))
}

pub fn norm_h1<T: Real>(u: &Field<T>) -> T {
    h1_raw(u.mesh(), u.values(), u.values()).max(T::zero()).sqrt()
}

/// Weighted L² product Σ w_i u_i v_i.
pub fn inner_l2<T: Real>(u: &Field<T>, v: &Field<T>) -> Result<T> {
    u.ensure_same_mesh(v)?;
    Ok(weighted_dot(u.mesh().weights(), u.values(), v.values()))
}

pub fn norm_l2<T: Real>(u: &Field<T>) -> T {
    weighted_dot(u.mesh().weights(), u.values(), u.values()).sqrt()
}

/// Magnitude span above which powers are taken in log space.
const LOG_SPACE_SPAN: f64 = 1e12;

/// Σ w_i · coef_i · |u_i|^p.
///
/// Values are scaled by max|u| before exponentiation; the scale is applied
/// once at the end.
pub fn integrate_power<T: Real>(coef: &Coefficient<T>, u: &Field<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::Parameter(format!("power must be >= 1, got {p}")));
    }
    coef.check_mesh(u.mesh())?;
    Ok(power_integral_raw(u.mesh().weights(), coef, u.values(), p))
}

pub(crate) fn power_integral_raw<T: Real>(w: &[T], coef: &Coefficient<T>, u: &[T], p: T) -> T {
    let peak = u.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if peak == T::zero() {
        return T::zero();
    }
    let floor = u
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > T::zero())
        .fold(T::infinity(), T::min);
    let log_space = to_f64(peak / floor) > LOG_SPACE_SPAN;
    let integer = p == p.round() && p <= lit(64.0);
    let log_peak = peak.ln();
    let mut sum = T::zero();
    for (i, (w, v)) in w.iter().zip(u).enumerate() {
        let a = v.abs();
        if a == T::zero() {
            continue;
        }
        let scaled = if log_space {
            (p * (a.ln() - log_peak)).exp()
        } else if integer {
            (a / peak).powi(to_f64(p) as i32)
        } else {
            (a / peak).powf(p)
        };
        sum = sum + *w * coef.at(i) * scaled;
    }
    sum * peak.powf(p)
}

/// Nodewise coef · |u|^{power-1} u.
pub(crate) fn signed_power<T: Real>(coef: &Coefficient<T>, u: &[T], power: T) -> Vec<T> {
    let integer = power == power.round() && power <= lit(64.0);
    u.iter()
        .enumerate()
        .map(|(i, v)| {
            let a = v.abs();
            let mag = if a == T::zero() {
                T::zero()
            } else if integer {
                a.powi(to_f64(power) as i32)
            } else {
                a.powf(power)
            };
            coef.at(i) * mag * v.signum()
        })
        .collect()
}

/// Σ w_i coef_i (|a_i|^p − |b_i|^p), evaluated without cancellation when
/// a and b are close.
pub(crate) fn power_integral_diff<T: Real>(w: &[T], coef: &Coefficient<T>, a: &[T], b: &[T], p: T) -> T {
    let mut sum = T::zero();
    for (i, w) in w.iter().enumerate() {
        let x = a[i].abs();
        let y = b[i].abs();
        let d = if y == T::zero() {
            x.powf(p)
        } else if x == T::zero() {
            -y.powf(p)
        } else {
            y.powf(p) * (p * ((x - y) / y).ln_1p()).exp_m1()
        };
        sum = sum + *w * coef.at(i) * d;
    }
    sum
}

/// Per-node share of the discrete Dirichlet energy. Each edge term
/// c·(u_i − u_j)² is split evenly between its endpoints and edges to the
/// boundary go to the interior node, so the shares sum to ⟨Au, u⟩.
pub(crate) fn energy_shares<T: Real>(mesh: &DomainMesh<T>, u: &[T]) -> Vec<T> {
    let half: T = lit(0.5);
    let mut out = vec![T::zero(); u.len()];
    match mesh {
        DomainMesh::RadialBall(b) => {
            let a = b.conductance();
            for k in 0..u.len() {
                let next = if k + 1 < u.len() { u[k + 1] } else { T::zero() };
                let e = a[k] * (u[k] - next).powi(2);
                if k + 1 < u.len() {
                    out[k] = out[k] + half * e;
                    out[k + 1] = out[k + 1] + half * e;
                } else {
                    out[k] = out[k] + e;
                }
            }
        }
        DomainMesh::Box3(b) => {
            let [nx, ny, nz] = b.interior();
            let [hx, hy, hz] = b.spacings();
            let c = [hy * hz / hx, hx * hz / hy, hx * hy / hz];
            let strides = [1, nx, nx * ny];
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let p = i + nx * (j + ny * k);
                        let pos = [i, j, k];
                        let dims = [nx, ny, nz];
                        for axis in 0..3 {
                            // Interior edges are visited from their lower endpoint.
                            if pos[axis] == 0 {
                                out[p] = out[p] + c[axis] * u[p] * u[p];
                            }
                            if pos[axis] + 1 < dims[axis] {
                                let q = p + strides[axis];
                                let e = c[axis] * (u[p] - u[q]).powi(2);
                                out[p] = out[p] + half * e;
                                out[q] = out[q] + half * e;
                            } else {
                                out[p] = out[p] + c[axis] * u[p] * u[p];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
