//! Independent oracles for the integration tests: brute-force quadrature
//! assembly, dense finite-difference Newton for single steps, and matrix
//! exponentials for linear problems. Everything here recomputes from the
//! mesh geometry alone and never calls the production assembly paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rlxa::mesh::{Connectivity, Mesh};
use rlxa::nonlin::NonlinearitySpec;

/// 10-point Gauss-Legendre rule on [-1, 1].
pub const GAUSS10: [(f64, f64); 10] = [
    (-0.9739065285171717, 0.0666713443086881),
    (-0.8650633666889845, 0.1494513491505806),
    (-0.6794095682990244, 0.2190863625159820),
    (-0.4333953941292472, 0.2692667193099963),
    (-0.1488743389816312, 0.2955242247147529),
    (0.1488743389816312, 0.2955242247147529),
    (0.4333953941292472, 0.2692667193099963),
    (0.6794095682990244, 0.2190863625159820),
    (0.8650633666889845, 0.1494513491505806),
    (0.9739065285171717, 0.0666713443086881),
];

/// Matrices assembled by quadrature over explicit basis-function closures.
pub struct DenseOracle {
    pub m: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub mg: DMatrix<f64>,
    pub lumped: DVector<f64>,
    pub lumped_b: DVector<f64>,
}

/// Barycentric coordinates of (x, y) in the triangle (p0, p1, p2), by
/// solving the 3x3 interpolation system.
fn barycentric(p: [[f64; 2]; 3], x: f64, y: f64) -> [f64; 3] {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[p[0][0], p[1][0], p[2][0], p[0][1], p[1][1], p[2][1], 1.0, 1.0, 1.0],
    );
    let rhs = DVector::from_column_slice(&[x, y, 1.0]);
    let sol = a.lu().solve(&rhs).expect("degenerate triangle");
    [sol[0], sol[1], sol[2]]
}

fn triangle_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        .abs()
}

/// Gradient of a barycentric coordinate by central differences; exact for
/// affine functions up to roundoff.
fn bary_gradient(p: [[f64; 2]; 3], which: usize) -> [f64; 2] {
    let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
    let d = 0.1 * triangle_area(p).sqrt();
    let gx = (barycentric(p, c[0] + d, c[1])[which] - barycentric(p, c[0] - d, c[1])[which])
        / (2.0 * d);
    let gy = (barycentric(p, c[0], c[1] + d)[which] - barycentric(p, c[0], c[1] - d)[which])
        / (2.0 * d);
    [gx, gy]
}

pub fn brute_assemble(mesh: &Mesh<f64>) -> DenseOracle {
    let n = mesh.n_nodes();
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let mut mg = DMatrix::zeros(n, n);
    match &mesh.elements {
        Connectivity::Segments(segs) => {
            for &[i, j] in segs {
                let (xa, xb) = (mesh.coords[i][0], mesh.coords[j][0]);
                let h = xb - xa;
                // Hat functions on the segment, evaluated pointwise.
                let phi = |which: usize, x: f64| -> f64 {
                    if which == 0 {
                        (xb - x) / h
                    } else {
                        (x - xa) / h
                    }
                };
                // The closures are globally affine, so a wide central
                // difference is exact up to roundoff.
                let dphi = |which: usize, x: f64| -> f64 {
                    let d = 0.1 * h;
                    (phi(which, x + d) - phi(which, x - d)) / (2.0 * d)
                };
                for a in 0..2 {
                    for b in 0..2 {
                        let (mut mm, mut kk) = (0.0, 0.0);
                        for &(xi, wi) in GAUSS10.iter() {
                            let x = xa + 0.5 * h * (xi + 1.0);
                            let w = 0.5 * h * wi;
                            mm += w * phi(a, x) * phi(b, x);
                            kk += w * dphi(a, x) * dphi(b, x);
                        }
                        let (ia, ib) = ([i, j][a], [i, j][b]);
                        m[(ia, ib)] += mm;
                        k[(ia, ib)] += kk;
                    }
                }
            }
            // The boundary of an interval is two points; L2(Gamma) is the
            // counting measure there.
            for &b in &mesh.boundary_nodes {
                mg[(b, b)] += 1.0;
            }
        }
        Connectivity::Triangles(tris) => {
            for &[i, j, l] in tris {
                let idx = [i, j, l];
                let p = [mesh.coords[i], mesh.coords[j], mesh.coords[l]];
                let area = triangle_area(p);
                // Edge-midpoint rule: exact for quadratics.
                let mids = [
                    [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0],
                    [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0],
                    [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0],
                ];
                for a in 0..3 {
                    let ga = bary_gradient(p, a);
                    for b in 0..3 {
                        let gb = bary_gradient(p, b);
                        let mut mm = 0.0;
                        for q in &mids {
                            let lam = barycentric(p, q[0], q[1]);
                            mm += area / 3.0 * lam[a] * lam[b];
                        }
                        m[(idx[a], idx[b])] += mm;
                        k[(idx[a], idx[b])] += area * (ga[0] * gb[0] + ga[1] * gb[1]);
                    }
                }
            }
            for &[i, j] in &mesh.boundary_edges {
                let (pa, pb) = (mesh.coords[i], mesh.coords[j]);
                let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                // Hats are linear in arclength along the edge.
                for &(xi, wi) in GAUSS10.iter() {
                    let s = 0.5 * (xi + 1.0);
                    let w = 0.5 * len * wi;
                    let phi = [1.0 - s, s];
                    for a in 0..2 {
                        for b in 0..2 {
                            mg[([i, j][a], [i, j][b])] += w * phi[a] * phi[b];
                        }
                    }
                }
            }
        }
    }
    let ones = DVector::from_element(n, 1.0);
    let lumped = &m * &ones;
    let lumped_b = &mg * &ones;
    DenseOracle { m, k, mg, lumped, lumped_b }
}

impl DenseOracle {
    pub fn quad(&self, a: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (a * y).dot(x)
    }

    pub fn norm_h1_sq(&self, u: &DVector<f64>) -> f64 {
        self.quad(&self.k, u, u) + self.quad(&self.mg, u, u)
    }

    pub fn norm_heps_sq(&self, u: &DVector<f64>, v: &DVector<f64>, eps: f64) -> f64 {
        self.norm_h1_sq(u) + eps * self.quad(&self.m, v, v)
    }

    pub fn lumped_integral(&self, g: &DVector<f64>) -> f64 {
        self.lumped.dot(g)
    }
}

/// Brute-force counterparts of the instrumented functionals, computed from
/// the quadrature-assembled matrices with explicit loops.
pub mod functionals_oracle {
    use super::*;

    pub struct Params {
        pub eps: f64,
        pub alpha: f64,
        pub beta: f64,
    }

    pub fn e_eps(
        o: &DenseOracle,
        spec: &NonlinearitySpec<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
        p: &Params,
    ) -> f64 {
        let big_f = u.map(|s| spec.big_f(s));
        o.norm_heps_sq(u, v, p.eps)
            + p.alpha * p.eps * o.quad(&o.m, v, u)
            + 2.0 * o.lumped_integral(&big_f)
    }

    pub fn v_eps(
        o: &DenseOracle,
        spec: &NonlinearitySpec<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        v: &DVector<f64>,
        v_t: &DVector<f64>,
        p: &Params,
    ) -> f64 {
        let mut cross = 0.0;
        let mut curv = 0.0;
        for i in 0..u.len() {
            cross += o.lumped[i] * (spec.psi(u[i]) - spec.psi(w[i])) * v[i];
            curv += o.lumped[i] * spec.psi_prime(u[i]) * v[i] * v[i];
        }
        p.eps * o.quad(&o.m, v_t, v_t)
            + p.alpha * p.eps * o.quad(&o.m, v_t, v)
            + o.norm_h1_sq(v)
            + 2.0 * cross
            - curv
    }

    pub fn psi_eps(
        o: &DenseOracle,
        spec: &NonlinearitySpec<f64>,
        h: &DVector<f64>,
        h_t: &DVector<f64>,
        w: &DVector<f64>,
        p: &Params,
    ) -> f64 {
        let mut curv = 0.0;
        for i in 0..h.len() {
            curv += o.lumped[i] * spec.psi_prime(w[i]) * h[i] * h[i];
        }
        p.eps * o.quad(&o.m, h_t, h_t)
            + p.alpha * p.eps * o.quad(&o.m, h_t, h)
            + o.norm_h1_sq(h)
            + curv
    }

    pub fn w_eps(
        o: &DenseOracle,
        spec: &NonlinearitySpec<f64>,
        w: &DVector<f64>,
        w_t: &DVector<f64>,
        u: &DVector<f64>,
        p: &Params,
    ) -> f64 {
        let big_psi = w.map(|s| spec.big_psi(s));
        o.norm_heps_sq(w, w_t, p.eps) + 2.0 * o.lumped_integral(&big_psi)
            - 2.0 * p.beta * o.quad(&o.m, u, w)
    }

    pub fn n_eps(o: &DenseOracle, u: &DVector<f64>, u_t: &DVector<f64>, p: &Params) -> f64 {
        p.eps * o.quad(&o.m, u_t, u_t)
            + p.eps * o.quad(&o.m, u_t, u)
            + o.quad(&o.k, u, u)
            + o.quad(&o.mg, u, u)
    }
}

/// Newton with a finite-difference Jacobian on the full 2n midpoint system
/// in (u+, v+):
///   (u+ - u)/dt - (v + v+)/2 = 0
///   eps M (v+ - v)/dt + (M + Mg)(v + v+)/2 + (K + Mg)(u + u+)/2 + G = 0
/// where G_i = m_i (F(u+_i) - F(u_i)) / (u+_i - u_i).
pub fn dense_midpoint_step(
    o: &DenseOracle,
    spec: &NonlinearitySpec<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    eps: f64,
    dt: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = u.len();
    let gload = |up: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            let d: f64 = up[i] - u[i];
            let g = if d.abs() < 1e-10 {
                spec.f(0.5 * (u[i] + up[i]))
            } else {
                (spec.big_f(up[i]) - spec.big_f(u[i])) / d
            };
            o.lumped[i] * g
        })
    };
    let res = |x: &DVector<f64>| -> DVector<f64> {
        let up = x.rows(0, n).into_owned();
        let vp = x.rows(n, n).into_owned();
        let mut r = DVector::zeros(2 * n);
        let r1 = (&up - u) / dt - (v + &vp) * 0.5;
        let vm = (v + &vp) * 0.5;
        let um = (u + &up) * 0.5;
        let r2 = (&o.m * &(&vp - v)) * (eps / dt)
            + (&o.m + &o.mg) * &vm
            + (&o.k + &o.mg) * &um
            + gload(&up);
        r.rows_mut(0, n).copy_from(&r1);
        r.rows_mut(n, n).copy_from(&r2);
        r
    };
    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(u);
    x.rows_mut(n, n).copy_from(v);
    for _ in 0..60 {
        let r = res(&x);
        if r.norm() < 1e-13 {
            break;
        }
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for c in 0..2 * n {
            let step = 1e-7 * (1.0 + x[c].abs());
            let mut xp = x.clone();
            xp[c] += step;
            let mut xm = x.clone();
            xm[c] -= step;
            let col = (res(&xp) - res(&xm)) / (2.0 * step);
            jac.set_column(c, &col);
        }
        let delta = jac.lu().solve(&r).expect("singular FD Jacobian");
        x -= delta;
    }
    (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
}

/// Exact-in-time solution of the space-discrete parabolic system with
/// linear reaction f(s) = c1 s (lumped):
/// (M + Mg) u' = -(K + Mg + c1 diag(lumped)) u.
pub fn expm_parabolic(o: &DenseOracle, c1: f64, u0: &DVector<f64>, t: f64) -> DVector<f64> {
    let n = u0.len();
    let m_full = &o.m + &o.mg;
    let mut a = &o.k + &o.mg;
    for i in 0..n {
        a[(i, i)] += c1 * o.lumped[i];
    }
    let gen = -(m_full.lu().solve(&a).expect("singular mass"));
    (gen * t).exp() * u0
}

/// Exact-in-time solution of the space-discrete damped wave system with
/// linear reaction, in block form d/dt (u, v) = A (u, v).
pub fn expm_hyperbolic(
    o: &DenseOracle,
    c1: f64,
    eps: f64,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    t: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = u0.len();
    let minv = o.m.clone().lu();
    let mut stiff = &o.k + &o.mg;
    for i in 0..n {
        stiff[(i, i)] += c1 * o.lumped[i];
    }
    let damp = &o.m + &o.mg;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    let low_u = minv.solve(&stiff).expect("singular mass") * (-1.0 / eps);
    let low_v = minv.solve(&damp).expect("singular mass") * (-1.0 / eps);
    a.view_mut((n, 0), (n, n)).copy_from(&low_u);
    a.view_mut((n, n), (n, n)).copy_from(&low_v);
    let phi = (a * t).exp();
    let mut x0 = DVector::zeros(2 * n);
    x0.rows_mut(0, n).copy_from(u0);
    x0.rows_mut(n, n).copy_from(v0);
    let xt = phi * x0;
    (xt.rows(0, n).into_owned(), xt.rows(n, n).into_owned())
}

/// Deterministic pseudo-random vector without pulling in an RNG.
pub fn wiggle(n: usize, seed: u64, amp: f64) -> DVector<f64> {
    DVector::from_fn(n, |i, _| {
        let x = ((i as f64 + 1.3) * 12.9898 + seed as f64 * 78.233).sin() * 43758.5453;
        amp * (x - x.floor() - 0.5) * 2.0
    })
}
