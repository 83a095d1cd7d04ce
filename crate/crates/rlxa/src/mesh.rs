//! Simplicial meshes on intervals and rectangles, and the P1 operators
//! realizing the weak formulations with dynamic boundary terms.

use nalgebra::DVector;

use crate::linalg::{Csr, SpdFactor};
use crate::{Error, Real, Result};

/// Domain of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Interval { a: T, b: T },
    Rectangle { ax: T, bx: T, ay: T, by: T },
}

/// Element connectivity (segments in 1D, triangles in 2D).
#[derive(Debug, Clone)]
pub enum Connectivity {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// Uniform simplicial mesh with boundary markers.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    pub dim: usize,
    /// Node coordinates; the second component is zero in 1D.
    pub coords: Vec<[T; 2]>,
    pub elements: Connectivity,
    /// Edges of the boundary Gamma (2D only).
    pub boundary_edges: Vec<[usize; 2]>,
    /// Indices of nodes on Gamma.
    pub boundary_nodes: Vec<usize>,
    pub h_max: T,
}

impl<T: Real> Mesh<T> {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        match &self.elements {
            Connectivity::Segments(s) => s.len(),
            Connectivity::Triangles(t) => t.len(),
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_nodes.contains(&node)
    }

    /// Domain measure |Omega|.
    pub fn measure(&self) -> T {
        match &self.elements {
            Connectivity::Segments(segs) => {
                let mut acc = T::zero();
                for s in segs {
                    acc += (self.coords[s[1]][0] - self.coords[s[0]][0]).abs();
                }
                acc
            }
            Connectivity::Triangles(tris) => {
                let mut acc = T::zero();
                for t in tris {
                    acc += self.tri_area(t);
                }
                acc
            }
        }
    }

    fn tri_area(&self, t: &[usize; 3]) -> T {
        let p = |i: usize| self.coords[t[i]];
        let (a, b, c) = (p(0), p(1), p(2));
        ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() * T::of(0.5)
    }

    /// Restrict a nodal field to the boundary nodes (in `boundary_nodes` order).
    pub fn trace(&self, u: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(self.boundary_nodes.len(), self.boundary_nodes.iter().map(|&i| u[i]))
    }
}

/// Build a uniform mesh with `n` elements per axis.
pub fn build_mesh<T: Real>(domain: Domain<T>, n: usize) -> Result<Mesh<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("resolution n must be at least 1".into()));
    }
    match domain {
        Domain::Interval { a, b } => {
            if b <= a {
                return Err(Error::InvalidInput("degenerate interval: b <= a".into()));
            }
            let h = (b - a) / T::of(n as f64);
            let coords: Vec<[T; 2]> =
                (0..=n).map(|i| [a + h * T::of(i as f64), T::zero()]).collect();
            let segs: Vec<[usize; 2]> = (0..n).map(|i| [i, i + 1]).collect();
            Ok(Mesh {
                dim: 1,
                coords,
                elements: Connectivity::Segments(segs),
                boundary_edges: Vec::new(),
                boundary_nodes: vec![0, n],
                h_max: h,
            })
        }
        Domain::Rectangle { ax, bx, ay, by } => {
            if bx <= ax || by <= ay {
                return Err(Error::InvalidInput("degenerate rectangle".into()));
            }
            let hx = (bx - ax) / T::of(n as f64);
            let hy = (by - ay) / T::of(n as f64);
            let np = n + 1;
            let id = |i: usize, j: usize| j * np + i;
            let mut coords = Vec::with_capacity(np * np);
            for j in 0..np {
                for i in 0..np {
                    coords.push([ax + hx * T::of(i as f64), ay + hy * T::of(j as f64)]);
                }
            }
            let mut tris = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                    tris.push([p00, p10, p11]);
                    tris.push([p00, p11, p01]);
                }
            }
            let mut boundary_nodes = Vec::new();
            for j in 0..np {
                for i in 0..np {
                    if i == 0 || j == 0 || i == n || j == n {
                        boundary_nodes.push(id(i, j));
                    }
                }
            }
            let mut boundary_edges = Vec::new();
            for i in 0..n {
                boundary_edges.push([id(i, 0), id(i + 1, 0)]);
                boundary_edges.push([id(i, n), id(i + 1, n)]);
                boundary_edges.push([id(0, i), id(0, i + 1)]);
                boundary_edges.push([id(n, i), id(n, i + 1)]);
            }
            Ok(Mesh {
                dim: 2,
                coords,
                elements: Connectivity::Triangles(tris),
                boundary_edges,
                boundary_nodes,
                h_max: (hx * hx + hy * hy).sqrt(),
            })
        }
    }
}

/// Assembled P1 operators: interior mass, stiffness, boundary mass, their
/// lumped diagonals, and a cached factorization of the interior mass for
/// the discrete elliptic recovery.
#[derive(Debug, Clone)]
pub struct Operators<T: Real> {
    pub mesh: Mesh<T>,
    /// Interior mass matrix, int_Omega chi_i chi_j.
    pub m_omega: Csr<T>,
    /// Stiffness matrix, int_Omega grad chi_i . grad chi_j.
    pub stiffness: Csr<T>,
    /// Boundary mass matrix, int_Gamma chi_i chi_j (supported on Gamma).
    pub m_gamma: Csr<T>,
    /// Lumped interior mass (row sums of m_omega).
    pub lumped_mass: DVector<T>,
    /// Lumped boundary mass (row sums of m_gamma; zero off Gamma).
    pub lumped_boundary_mass: DVector<T>,
    mass_factor: SpdFactor<T>,
}

/// Assemble the P1 operators with exact quadrature for the linear terms.
pub fn assemble<T: Real>(mesh: &Mesh<T>) -> Result<Operators<T>> {
    let n = mesh.n_nodes();
    let mut tm = Vec::new();
    let mut tk = Vec::new();
    let mut tg = Vec::new();
    match &mesh.elements {
        Connectivity::Segments(segs) => {
            for s in segs {
                let h = (mesh.coords[s[1]][0] - mesh.coords[s[0]][0]).abs();
                if h <= T::zero() {
                    return Err(Error::InvalidInput("zero-length element".into()));
                }
                let m_diag = h / T::of(3.0);
                let m_off = h / T::of(6.0);
                let k = T::one() / h;
                for (a, b) in [(0, 0), (1, 1)] {
                    tm.push((s[a], s[b], m_diag));
                    tk.push((s[a], s[b], k));
                }
                for (a, b) in [(0, 1), (1, 0)] {
                    tm.push((s[a], s[b], m_off));
                    tk.push((s[a], s[b], -k));
                }
            }
            // Gamma is the two endpoints; L2(Gamma) is point evaluation.
            for &b in &mesh.boundary_nodes {
                tg.push((b, b, T::one()));
            }
        }
        Connectivity::Triangles(tris) => {
            for t in tris {
                let area = mesh.tri_area(t);
                if area <= T::zero() {
                    return Err(Error::InvalidInput("degenerate triangle".into()));
                }
                // P1 gradients from edge vectors.
                let p = |i: usize| mesh.coords[t[i]];
                let grads = {
                    let (a, b, c) = (p(0), p(1), p(2));
                    let two_a = T::of(2.0) * area;
                    [
                        [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a],
                        [(c[1] - a[1]) / two_a, (a[0] - c[0]) / two_a],
                        [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a],
                    ]
                };
                for i in 0..3 {
                    for j in 0..3 {
                        let m = if i == j { area / T::of(6.0) } else { area / T::of(12.0) };
                        tm.push((t[i], t[j], m));
                        let k = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                        tk.push((t[i], t[j], k));
                    }
                }
            }
            for e in &mesh.boundary_edges {
                let d0 = mesh.coords[e[1]][0] - mesh.coords[e[0]][0];
                let d1 = mesh.coords[e[1]][1] - mesh.coords[e[0]][1];
                let len = (d0 * d0 + d1 * d1).sqrt();
                for (a, b, w) in [
                    (0, 0, len / T::of(3.0)),
                    (1, 1, len / T::of(3.0)),
                    (0, 1, len / T::of(6.0)),
                    (1, 0, len / T::of(6.0)),
                ] {
                    tg.push((e[a], e[b], w));
                }
            }
        }
    }
    let m_omega = Csr::from_triplets(n, n, &tm, T::zero());
    let stiffness = Csr::from_triplets(n, n, &tk, T::of(1e-300));
    let m_gamma = Csr::from_triplets(n, n, &tg, T::zero());
    let lumped_mass = m_omega.row_sums();
    let lumped_boundary_mass = m_gamma.row_sums();
    let mass_factor = SpdFactor::new(m_omega.to_dense())?;
    Ok(Operators {
        mesh: mesh.clone(),
        m_omega,
        stiffness,
        m_gamma,
        lumped_mass,
        lumped_boundary_mass,
        mass_factor,
    })
}

impl<T: Real> Operators<T> {
    pub fn n(&self) -> usize {
        self.mesh.n_nodes()
    }

    fn check_dim(&self, u: &DVector<T>) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: u.len() });
        }
        Ok(())
    }

    /// ||u||^2 in L2(Omega).
    pub fn norm_l2_sq(&self, u: &DVector<T>) -> T {
        self.m_omega.quad_form(u, u)
    }

    /// ||u||^2 in L2(Gamma).
    pub fn norm_gamma_sq(&self, u: &DVector<T>) -> T {
        self.m_gamma.quad_form(u, u)
    }

    /// ||grad u||^2 in L2(Omega).
    pub fn seminorm_grad_sq(&self, u: &DVector<T>) -> T {
        self.stiffness.quad_form(u, u)
    }

    /// ||u||_1^2 = ||grad u||^2 + ||u||^2_{L2(Gamma)}.
    pub fn norm_h1_sq(&self, u: &DVector<T>) -> T {
        self.seminorm_grad_sq(u) + self.norm_gamma_sq(u)
    }

    pub fn norm_h1(&self, u: &DVector<T>) -> Result<T> {
        self.check_dim(u)?;
        Ok(self.norm_h1_sq(u).sqrt())
    }

    /// ||(u, v)||^2 in H_eps = ||u||_1^2 + eps ||v||^2.
    pub fn norm_heps_sq(&self, u: &DVector<T>, v: &DVector<T>, eps: T) -> T {
        self.norm_h1_sq(u) + eps * self.norm_l2_sq(v)
    }

    /// ||(u, gamma)||^2 in Y = ||u||^2 + ||gamma||^2_{L2(Gamma)}.
    /// `gamma` is a full nodal field supported on the boundary nodes.
    pub fn norm_y_sq(&self, u: &DVector<T>, gamma_full: &DVector<T>) -> T {
        self.norm_l2_sq(u) + self.norm_gamma_sq(gamma_full)
    }

    /// L2(Omega) inner product <u, w>.
    pub fn inner_l2(&self, u: &DVector<T>, w: &DVector<T>) -> T {
        self.m_omega.quad_form(u, w)
    }

    /// L2(Gamma) inner product.
    pub fn inner_gamma(&self, u: &DVector<T>, w: &DVector<T>) -> T {
        self.m_gamma.quad_form(u, w)
    }

    /// Lumped integral of a nodal sampling, sum_i m_i g_i; the quadrature
    /// rule used for every nonlinear term.
    pub fn lumped_integral(&self, g: &DVector<T>) -> T {
        self.lumped_mass.dot(g)
    }

    /// Discrete Laplacian via elliptic recovery: solve
    /// M (lap_h u) = -(K u + M_gamma (u + u_t)), the boundary condition
    /// supplying the flux.
    pub fn discrete_laplacian(&self, u: &DVector<T>, u_t: &DVector<T>) -> DVector<T> {
        let rhs = -(self.stiffness.matvec(u) + self.m_gamma.matvec(&(u + u_t)));
        self.mass_factor.solve(&rhs)
    }

    /// Discrete H2 norm squared: ||u||_1^2 + ||lap_h u||^2.
    pub fn norm_h2_sq(&self, u: &DVector<T>, u_t: &DVector<T>) -> T {
        let lap = self.discrete_laplacian(u, u_t);
        self.norm_h1_sq(u) + self.norm_l2_sq(&lap)
    }

    /// Discrete D_eps norm of a pair (w, w_t): ||w||_{2,h} + ||w_t||_1.
    /// Carries no eps weight.
    pub fn norm_deps(&self, w: &DVector<T>, w_t: &DVector<T>) -> T {
        self.norm_h2_sq(w, w_t).sqrt() + self.norm_h1_sq(w_t).sqrt()
    }

    /// Variationally consistent boundary flux dn(u): lumped-boundary-mass
    /// inverse of the boundary residual of K plus the nonlinear load.
    /// Returns a full nodal field supported on the boundary.
    pub fn boundary_flux(&self, u: &DVector<T>, f_load: &DVector<T>) -> DVector<T> {
        let r = self.stiffness.matvec(u) + f_load;
        let mut g = DVector::zeros(self.n());
        for &b in &self.mesh.boundary_nodes {
            g[b] = r[b] / self.lumped_boundary_mass[b];
        }
        g
    }

    /// Solve M x = b with the cached mass factorization.
    pub fn mass_solve(&self, b: &DVector<T>) -> DVector<T> {
        self.mass_factor.solve(b)
    }
}
