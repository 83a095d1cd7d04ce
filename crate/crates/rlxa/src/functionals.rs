//! Energy and Lyapunov functionals, their admissible parameter windows and
//! predicted decay rates, and the Poincare-type constant.

use nalgebra::DVector;

use crate::linalg::{dense_smallest_generalized_eig, inverse_power_smallest, Csr};
use crate::mesh::Operators;
use crate::nonlin::NonlinearitySpec;
use crate::{Error, Real, Result};

/// Parameters entering the Lyapunov functionals, validated against the
/// admissibility window of the estimate they serve.
#[derive(Debug, Clone, Copy)]
pub struct FunctionalParams<T> {
    pub eps: T,
    pub lambda: T,
    pub mu: T,
    pub eta: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> FunctionalParams<T> {
    /// Window for the dissipativity functional E_eps: eta > lambda/(4 mu),
    /// 0 < alpha < min{2, 2/eta, 2 mu}. Defaults: mu = lambda/2,
    /// eta = max(lambda/(4 mu), 1/4) + 0.01, alpha at 0.9 of its cap.
    pub fn energy(eps: T, lambda: T, beta: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        let mu = lambda / T::of(2.0);
        let eta = (lambda / (T::of(4.0) * mu)).max(T::of(0.25)) + T::of(0.01);
        let alpha = T::of(0.9) * T::of(2.0).min(T::of(2.0) / eta).min(T::of(2.0) * mu);
        let p = Self { eps, lambda, mu, eta, alpha, beta };
        p.validate_energy()?;
        Ok(p)
    }

    /// Window for the Z-decay functional V_eps: 0 < alpha < min{2, lambda}.
    pub fn decay(eps: T, lambda: T, beta: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        let mu = lambda / T::of(2.0);
        let eta = (lambda / (T::of(4.0) * mu)).max(T::of(0.25)) + T::of(0.01);
        let alpha = T::of(0.9) * T::of(2.0).min(lambda);
        let p = Self { eps, lambda, mu, eta, alpha, beta };
        p.validate_decay()?;
        Ok(p)
    }

    pub fn validate_energy(&self) -> Result<()> {
        let ok = self.mu > T::zero()
            && self.mu <= self.lambda
            && self.eta > self.lambda / (T::of(4.0) * self.mu)
            && self.alpha > T::zero()
            && self.alpha < T::of(2.0).min(T::of(2.0) / self.eta).min(T::of(2.0) * self.mu);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("parameters outside the energy admissibility window".into()))
        }
    }

    pub fn validate_decay(&self) -> Result<()> {
        if self.alpha > T::zero() && self.alpha < T::of(2.0).min(self.lambda) {
            Ok(())
        } else {
            Err(Error::InvalidInput("alpha outside (0, min{2, lambda})".into()))
        }
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_eps(mut self, eps: T) -> Self {
        self.eps = eps;
        self
    }

    /// Predicted decay rates from the parameter choices. `q_r` is the
    /// instrumented Lipschitz-level constant entering omega4/omega5; pass 0
    /// when it is not needed. omega7 has no closed form here and is always
    /// fitted from data instead.
    pub fn rates(&self, q_r: T) -> DecayRates<T> {
        let (a, l, m, e) = (self.alpha, self.lambda, self.mu, self.eta);
        let two = T::of(2.0);
        let half = T::of(0.5);
        DecayRates {
            omega0: (two - a).min(a * (m / l - T::one() / (T::of(4.0) * e))),
            omega1: (T::one() - a * half).min(T::one() - a / (two * l) - (l - m) / l),
            omega2: (T::one() - a * half).min(half - a / (two * l)),
            omega3: (two - a).min(T::one()).min(a * half),
            omega4: (T::one() - a * half).min(T::one() - a / (two * l) - a * q_r),
            omega5: (T::one() + a * half).max(T::one() + a / (two * l) + a * q_r),
            omega6: T::one() - T::one() / (T::of(4.0) * e),
        }
    }
}

/// Rates predicted by the parameter window; reported for comparison against
/// fitted decay slopes, never asserted.
#[derive(Debug, Clone, Copy)]
pub struct DecayRates<T> {
    pub omega0: T,
    pub omega1: T,
    pub omega2: T,
    pub omega3: T,
    pub omega4: T,
    pub omega5: T,
    pub omega6: T,
}

/// Best constant in lambda ||u||^2 <= ||grad u||^2 + ||u||^2_Gamma, the
/// smallest generalized eigenvalue of (K + M_gamma) x = lambda M x.
/// Inverse power iteration with a dense fallback.
pub fn poincare_constant<T: Real>(ops: &Operators<T>) -> Result<(T, DVector<T>)> {
    let n = ops.n();
    let mut triplets: Vec<(usize, usize, T)> = ops.stiffness.triplets().collect();
    triplets.extend(ops.m_gamma.triplets());
    let a = Csr::from_triplets(n, n, &triplets, T::zero());
    match inverse_power_smallest(&a, &ops.m_omega, T::zero(), T::of(1e-13), 500) {
        Ok(pair) => Ok(pair),
        Err(_) => dense_smallest_generalized_eig(&a.to_dense(), &ops.m_omega.to_dense()),
    }
}

/// E_eps(u, v) = ||(u,v)||^2_{H_eps} + alpha eps <v, u> + 2 int F(u).
pub fn e_eps<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
    v: &DVector<T>,
    p: &FunctionalParams<T>,
) -> T {
    let big_f = u.map(|s| spec.big_f(s));
    ops.norm_heps_sq(u, v, p.eps)
        + p.alpha * p.eps * ops.inner_l2(v, u)
        + T::of(2.0) * ops.lumped_integral(&big_f)
}

/// V_eps = eps ||v_t||^2 + alpha eps <v_t, v> + ||v||_1^2
///       + 2 <psi(u) - psi(w), v> - <psi'(u) v, v>,
/// nonlinear pairings by nodal quadrature.
pub fn v_eps<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
    w: &DVector<T>,
    v: &DVector<T>,
    v_t: &DVector<T>,
    p: &FunctionalParams<T>,
) -> T {
    let n = ops.n();
    let mut cross = T::zero();
    let mut curv = T::zero();
    for i in 0..n {
        let m = ops.lumped_mass[i];
        cross += m * (spec.psi(u[i]) - spec.psi(w[i])) * v[i];
        curv += m * spec.psi_prime(u[i]) * v[i] * v[i];
    }
    p.eps * ops.norm_l2_sq(v_t)
        + p.alpha * p.eps * ops.inner_l2(v_t, v)
        + ops.norm_h1_sq(v)
        + T::of(2.0) * cross
        - curv
}

/// Psi_eps = eps ||h_t||^2 + alpha eps <h_t, h> + ||h||_1^2 + <psi'(w) h, h>.
pub fn psi_eps<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    h: &DVector<T>,
    h_t: &DVector<T>,
    w: &DVector<T>,
    p: &FunctionalParams<T>,
) -> T {
    let mut curv = T::zero();
    for i in 0..ops.n() {
        curv += ops.lumped_mass[i] * spec.psi_prime(w[i]) * h[i] * h[i];
    }
    p.eps * ops.norm_l2_sq(h_t) + p.alpha * p.eps * ops.inner_l2(h_t, h) + ops.norm_h1_sq(h) + curv
}

/// W_eps = ||(w, w_t)||^2_{H_eps} + 2 int Psi(w) - 2 beta <u, w>.
pub fn w_eps<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    w: &DVector<T>,
    w_t: &DVector<T>,
    u: &DVector<T>,
    p: &FunctionalParams<T>,
) -> T {
    let big_psi = w.map(|s| spec.big_psi(s));
    ops.norm_heps_sq(w, w_t, p.eps) + T::of(2.0) * ops.lumped_integral(&big_psi)
        - T::of(2.0) * p.beta * ops.inner_l2(u, w)
}

/// N_eps = eps ||u_t||^2 + eps <u_t, u> + ||grad u||^2 + ||u||^2_Gamma,
/// the square of a norm equivalent to H_eps.
pub fn n_eps<T: Real>(
    ops: &Operators<T>,
    u: &DVector<T>,
    u_t: &DVector<T>,
    p: &FunctionalParams<T>,
) -> T {
    p.eps * ops.norm_l2_sq(u_t)
        + p.eps * ops.inner_l2(u_t, u)
        + ops.seminorm_grad_sq(u)
        + ops.norm_gamma_sq(u)
}

/// Time-indexed table of instrumented quantities from a solve.
#[derive(Debug, Clone)]
pub struct EnergyLedger<T> {
    pub t: Vec<T>,
    pub columns: Vec<(String, Vec<T>)>,
}

impl<T: Real> EnergyLedger<T> {
    pub fn new(column_names: &[&str]) -> Self {
        Self {
            t: Vec::new(),
            columns: column_names.iter().map(|n| (n.to_string(), Vec::new())).collect(),
        }
    }

    pub fn push(&mut self, t: T, values: &[T]) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: values.len(),
            });
        }
        if let Some(&last) = self.t.last() {
            if t <= last {
                return Err(Error::InvalidInput("ledger time grid must strictly increase".into()));
            }
        }
        if !t.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite ledger entry".into()));
        }
        self.t.push(t);
        for (col, &v) in self.columns.iter_mut().zip(values) {
            col.1.push(v);
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[T]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}
