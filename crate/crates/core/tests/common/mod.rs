//! Reference solutions computed without the library: the continuous radial
//! ODE by shooting, the discrete radial equation by forward recurrence, and
//! the box Poisson problem by separable sine transforms.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Profile of the positive radial solution of
/// −u″ − ((n−1)/r)u′ = u^q + μu on (0, R) with u′(0) = 0 and u(R) = 0.
pub struct ShootingSolution {
    pub dimension: usize,
    pub mu: f64,
    pub radius: f64,
    pub peak: f64,
    steps: usize,
}

impl ShootingSolution {
    /// Scans u(0) upward until u(R) changes sign, then bisects.
    pub fn solve(dimension: usize, mu: f64, radius: f64, steps: usize) -> Self {
        let mut s = Self { dimension, mu, radius, peak: 0.0, steps };
        let mut lo = 1e-3;
        assert!(s.end_value(lo) > 0.0, "small data must stay positive up to the boundary");
        let mut hi = lo;
        loop {
            hi *= 1.05;
            assert!(hi < 1e6, "no sign change found");
            if s.end_value(hi) < 0.0 {
                break;
            }
            lo = hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if s.end_value(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        s.peak = 0.5 * (lo + hi);
        s
    }

    fn q(&self) -> f64 {
        let n = self.dimension as f64;
        (n + 2.0) / (n - 2.0)
    }

    fn rhs(&self, r: f64, u: f64, v: f64) -> (f64, f64) {
        let n = self.dimension as f64;
        let f = u.abs().powf(self.q() - 1.0) * u + self.mu * u;
        (v, -(n - 1.0) / r * v - f)
    }

    /// u at r = k·R/steps for k = 0..=steps.
    pub fn profile_for(&self, peak: f64) -> Vec<f64> {
        let h = self.radius / self.steps as f64;
        let n = self.dimension as f64;
        let f0 = peak.powf(self.q()) + self.mu * peak;
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(peak);
        // Series start u ≈ a − f(a) r²/(2n) avoids the singular coefficient at r = 0.
        let (mut u, mut v) = (peak - f0 * h * h / (2.0 * n), -f0 * h / n);
        out.push(u);
        for k in 1..self.steps {
            let r = k as f64 * h;
            let (a1, b1) = self.rhs(r, u, v);
            let (a2, b2) = self.rhs(r + 0.5 * h, u + 0.5 * h * a1, v + 0.5 * h * b1);
            let (a3, b3) = self.rhs(r + 0.5 * h, u + 0.5 * h * a2, v + 0.5 * h * b2);
            let (a4, b4) = self.rhs(r + h, u + h * a3, v + h * b3);
            u += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            if !u.is_finite() {
                u = f64::NEG_INFINITY;
            }
            out.push(u);
        }
        out
    }

    fn end_value(&self, peak: f64) -> f64 {
        let p = self.profile_for(peak);
        // A zero crossed before R counts as negative.
        if p.iter().any(|v| *v < 0.0) {
            -1.0
        } else {
            *p.last().unwrap()
        }
    }

    /// The converged profile on the integration grid.
    pub fn profile(&self) -> Vec<f64> {
        self.profile_for(self.peak)
    }

    /// Value at r by linear interpolation on the integration grid.
    pub fn at(&self, profile: &[f64], r: f64) -> f64 {
        let x = r / self.radius * self.steps as f64;
        let k = (x.floor() as usize).min(self.steps - 1);
        let t = x - k as f64;
        profile[k] * (1.0 - t) + profile[k + 1] * t
    }
}

fn sphere_area(n: usize) -> f64 {
    // |S^{n−1}| = 2π^{n/2}/Γ(n/2), with Γ at half integers by recursion.
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

/// Shell volumes and face conductances of the finite-volume radial mesh
/// with nodes r_i = i·h, i = 0..m−1.
pub fn radial_stencil(n: usize, radius: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = radius / m as f64;
    let omega = sphere_area(n);
    let shell = |r: f64| omega * r.powi(n as i32) / n as f64;
    let weights = (0..m)
        .map(|i| {
            let outer = (i as f64 + 0.5) * h;
            let inner = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
            shell(outer) - shell(inner)
        })
        .collect();
    let faces = (0..m).map(|i| omega * ((i as f64 + 0.5) * h).powi(n as i32 - 1) / h).collect();
    (weights, faces)
}

/// Discrete radial solution from u₀: the flux through face i+½ equals the
/// source collected by the nodes inside it.
pub fn radial_recurrence(n: usize, radius: f64, m: usize, mu: f64, u0: f64) -> Vec<f64> {
    let (w, a) = radial_stencil(n, radius, m);
    let q = (n as f64 + 2.0) / (n as f64 - 2.0);
    let mut u = vec![0.0; m + 1];
    u[0] = u0;
    let mut flux = 0.0;
    for i in 0..m {
        let ui = u[i];
        flux += w[i] * (ui.abs().powf(q - 1.0) * ui + mu * ui);
        u[i + 1] = ui - flux / a[i];
        if !u[i + 1].is_finite() {
            u[i + 1] = f64::NEG_INFINITY;
        }
    }
    u
}

/// Positive discrete radial solution: first u₀ with u_m = 0 found by
/// scanning upward and bisecting.
pub fn radial_discrete_solution(n: usize, radius: f64, m: usize, mu: f64) -> Vec<f64> {
    let end = |u0: f64| {
        let u = radial_recurrence(n, radius, m, mu, u0);
        if u[..m].iter().any(|v| *v <= 0.0) {
            -1.0
        } else {
            u[m]
        }
    };
    let mut lo = 1e-3;
    assert!(end(lo) > 0.0);
    let mut hi = lo;
    loop {
        hi *= 1.05;
        assert!(hi < 1e6, "no sign change found");
        if end(hi) < 0.0 {
            break;
        }
        lo = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if end(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = radial_recurrence(n, radius, m, mu, 0.5 * (lo + hi));
    u.truncate(m);
    u
}

/// Solves the 7-point Dirichlet problem −Δ_h u = f on a box grid exactly by
/// expanding in the discrete sine modes along each axis. `f` is indexed
/// x fastest, as the library stores box fields.
pub fn box_sine_solve(lengths: [f64; 3], intervals: [usize; 3], f: &[f64]) -> Vec<f64> {
    let dims = intervals.map(|n| n - 1);
    let h = [0, 1, 2].map(|a| lengths[a] / intervals[a] as f64);
    let modes = |a: usize| -> Vec<Vec<f64>> {
        let n = intervals[a];
        (1..n)
            .map(|k| (1..n).map(|i| (PI * (k * i) as f64 / n as f64).sin()).collect())
            .collect()
    };
    let s = [modes(0), modes(1), modes(2)];
    let lam = |a: usize, k: usize| {
        let t = (PI * (k + 1) as f64 / (2.0 * intervals[a] as f64)).sin();
        4.0 * t * t / (h[a] * h[a])
    };
    let idx = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
    let transform = |input: &[f64], axis: usize| -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let (p, pos) = match axis {
                        0 => (i, [0, j, k]),
                        1 => (j, [i, 0, k]),
                        _ => (k, [i, j, 0]),
                    };
                    let mut acc = 0.0;
                    for t in 0..dims[axis] {
                        let mut at = pos;
                        at[axis] = t;
                        acc += s[axis][p][t] * input[idx(at[0], at[1], at[2])];
                    }
                    out[idx(i, j, k)] = acc;
                }
            }
        }
        out
    };
    let mut c = transform(&transform(&transform(f, 0), 1), 2);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                c[idx(i, j, k)] /= lam(0, i) + lam(1, j) + lam(2, k);
            }
        }
    }
    let mut u = transform(&transform(&transform(&c, 0), 1), 2);
    // The sine matrix squared is n/2 times the identity along each axis.
    let norm: f64 = intervals.iter().map(|&n| 2.0 / n as f64).product();
    u.iter_mut().for_each(|v| *v *= norm);
    u
}

/// 7-point −Δ_h u with zero boundary values, written out node by node.
pub fn box_neg_laplacian(lengths: [f64; 3], intervals: [usize; 3], u: &[f64]) -> Vec<f64> {
    let d = intervals.map(|n| n as isize - 1);
    let h = [0, 1, 2].map(|a| lengths[a] / intervals[a] as f64);
    let at = |i: isize, j: isize, k: isize| {
        if i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2] {
            0.0
        } else {
            u[(i + d[0] * (j + d[1] * k)) as usize]
        }
    };
    let mut out = Vec::with_capacity(u.len());
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                let c = at(i, j, k);
                out.push(
                    (2.0 * c - at(i - 1, j, k) - at(i + 1, j, k)) / (h[0] * h[0])
                        + (2.0 * c - at(i, j - 1, k) - at(i, j + 1, k)) / (h[1] * h[1])
                        + (2.0 * c - at(i, j, k - 1) - at(i, j, k + 1)) / (h[2] * h[2]),
                );
            }
        }
    }
    out
}
