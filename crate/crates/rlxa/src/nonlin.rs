//! The nonlinear reaction term f, its antiderivative F, the shifted map
//! psi(s) = f(s) + beta*s, and structural assumption checks.

use crate::{Error, Real, Result};

/// Cubic-or-lower polynomial nonlinearity. Coefficients are for 1, s, s^2, s^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec<T> {
    pub coeffs: [T; 4],
    /// Growth constant: |f''(s)| <= ell (1 + |s|).
    pub ell: T,
    /// Monotonicity defect: f'(s) >= -theta everywhere. Infinite when f' is
    /// unbounded below (quadratic f).
    pub theta: T,
    /// Shift making psi'(s) = f'(s) + beta nonnegative.
    pub beta: T,
}

impl<T: Real> NonlinearitySpec<T> {
    /// Polynomial of degree at most 3; higher coefficients are rejected.
    pub fn poly(coeffs: &[T]) -> Result<Self> {
        if coeffs.len() > 4 && coeffs[4..].iter().any(|c| *c != T::zero()) {
            return Err(Error::InvalidInput(
                "polynomial nonlinearity limited to degree 3".into(),
            ));
        }
        let mut c = [T::zero(); 4];
        for (i, &v) in coeffs.iter().take(4).enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
            c[i] = v;
        }
        let ell = (T::of(2.0) * c[2].abs()).max(T::of(6.0) * c[3].abs());
        let theta = Self::defect(&c);
        // Default shift: the smallest admissible one.
        let beta = theta;
        Ok(Self { coeffs: c, ell, theta, beta })
    }

    /// f(s) = s^3 - 2ks, the derivative of the double-well F(s) = s^4/4 - k s^2.
    pub fn double_well(k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(Error::InvalidInput("double-well parameter k must be positive".into()));
        }
        Self::poly(&[T::zero(), -T::of(2.0) * k, T::zero(), T::one()])
    }

    pub fn zero() -> Self {
        Self::poly(&[]).unwrap()
    }

    /// Smallest theta with f'(s) >= -theta for all s: closed-form minimum of
    /// the (quadratic or lower) derivative.
    fn defect(c: &[T; 4]) -> T {
        let (c1, c2, c3) = (c[1], c[2], c[3]);
        let min_fprime = if c3 > T::zero() {
            // f' = c1 + 2 c2 s + 3 c3 s^2, vertex at s = -c2 / (3 c3).
            c1 - c2 * c2 / (T::of(3.0) * c3)
        } else if c3 < T::zero() {
            return T::of(f64::INFINITY);
        } else if c2 != T::zero() {
            return T::of(f64::INFINITY);
        } else {
            c1
        };
        (-min_fprime).max(T::zero())
    }

    pub fn with_beta(mut self, beta: T) -> Result<Self> {
        if beta < self.theta {
            return Err(Error::InvalidInput("beta below the monotonicity defect".into()));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn f(&self, s: T) -> T {
        let c = &self.coeffs;
        ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
    }

    /// Antiderivative with F(0) = 0.
    pub fn big_f(&self, s: T) -> T {
        let c = &self.coeffs;
        (((c[3] / T::of(4.0) * s + c[2] / T::of(3.0)) * s + c[1] / T::of(2.0)) * s + c[0]) * s
    }

    pub fn fprime(&self, s: T) -> T {
        let c = &self.coeffs;
        (T::of(3.0) * c[3] * s + T::of(2.0) * c[2]) * s + c[1]
    }

    pub fn fsecond(&self, s: T) -> T {
        T::of(6.0) * self.coeffs[3] * s + T::of(2.0) * self.coeffs[2]
    }

    pub fn psi(&self, s: T) -> T {
        self.f(s) + self.beta * s
    }

    /// Antiderivative of psi with Psi(0) = 0.
    pub fn big_psi(&self, s: T) -> T {
        self.big_f(s) + self.beta * s * s / T::of(2.0)
    }

    pub fn psi_prime(&self, s: T) -> T {
        self.fprime(s) + self.beta
    }

    pub fn f_at_zero(&self) -> T {
        self.coeffs[0]
    }
}

/// Outcome of checking the structural assumptions against a Poincare
/// constant, with the consequence constants extracted by grid minimization.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport<T> {
    pub lambda: T,
    pub mu: T,
    pub c1: T,
    pub c2: T,
    /// |f''(s)| <= ell (1 + |s|) on the sample grid.
    pub growth_ok: bool,
    /// f'(s) >= -theta on the sample grid, theta finite.
    pub monotone_ok: bool,
    /// f(s)/s > -lambda + delta for |s| >= s0.
    pub sign_ok: bool,
    pub s0: T,
    pub delta: T,
    pub sample_range: T,
}

impl<T: Real> AssumptionReport<T> {
    pub fn all_pass(&self) -> bool {
        self.growth_ok && self.monotone_ok && self.sign_ok
    }
}

/// Check growth, monotonicity, and sign conditions on [-range, range] with
/// `n_samples` grid points, and extract mu, c1, c2 for the given lambda.
/// `measure` is the domain volume entering c1, c2.
pub fn check_assumptions<T: Real>(
    spec: &NonlinearitySpec<T>,
    lambda: T,
    range: T,
    n_samples: usize,
    measure: T,
) -> Result<AssumptionReport<T>> {
    if !(lambda > T::zero()) || !(range > T::zero()) || n_samples < 3 {
        return Err(Error::InvalidInput("need lambda > 0, range > 0, n_samples >= 3".into()));
    }
    let n = n_samples;
    let grid = |i: usize| -range + T::of(2.0) * range * T::of(i as f64) / T::of((n - 1) as f64);

    let mut growth_ok = true;
    let mut monotone_ok = spec.theta.is_finite();
    for i in 0..n {
        let s = grid(i);
        if spec.fsecond(s).abs() > spec.ell * (T::one() + s.abs()) + T::of(1e-12) {
            growth_ok = false;
        }
        if spec.fprime(s) < -spec.theta - T::of(1e-12) {
            monotone_ok = false;
        }
    }

    // Sign condition: find the smallest s0 on the grid with
    // f(s)/s + lambda > 0 for all sampled |s| in [s0, range].
    let mut sign_ok = false;
    let mut s0 = T::zero();
    let mut delta = T::zero();
    let half = n / 2;
    for j in 0..half {
        let lo = grid(half + j + (n % 2));
        if lo <= T::zero() {
            continue;
        }
        let mut worst = T::of(f64::INFINITY);
        for i in 0..n {
            let s = grid(i);
            if s.abs() >= lo {
                worst = worst.min(spec.f(s) / s + lambda);
            }
        }
        if worst > T::zero() && worst.is_finite() {
            sign_ok = true;
            s0 = lo;
            delta = worst;
            break;
        }
    }

    // Consequence constants for mu = lambda/2: pointwise surpluses of the
    // sign condition, maximized over the grid and clipped at zero.
    let mu = lambda / T::of(2.0);
    let gap = lambda - mu;
    let mut c1 = T::zero();
    let mut c2 = T::zero();
    for i in 0..n {
        let s = grid(i);
        c1 = c1.max(-spec.f(s) * s - gap * s * s);
        c2 = c2.max(-spec.big_f(s) - gap / T::of(2.0) * s * s);
    }
    c1 *= measure;
    c2 *= measure;

    Ok(AssumptionReport {
        lambda,
        mu,
        c1,
        c2,
        growth_ok,
        monotone_ok,
        sign_ok,
        s0,
        delta,
        sample_range: range,
    })
}
