//! The two trajectory decompositions behind the compactness and smoothing
//! arguments: the v/w splitting with shifted nonlinearity, and the
//! linear/forced splitting of the difference of two trajectories.

use nalgebra::DVector;

use crate::evolution::{
    discrete_gradient_load, step_hyperbolic_general, ReactionTerm,
};
use crate::functionals::{n_eps, FunctionalParams};
use crate::mesh::Operators;
use crate::nonlin::NonlinearitySpec;
use crate::{Error, Real, Result};

/// How the v-part is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VMode {
    /// Integrate the v system directly; u = v + w becomes a cross-check.
    Direct,
    /// Define v := u - w (hides scheme inconsistencies; for comparison).
    FromIdentity,
}

/// Synchronized records of the base trajectory and its v/w split.
#[derive(Debug, Clone)]
pub struct SplitTrajectory<T> {
    pub eps: T,
    pub times: Vec<T>,
    pub u: Vec<DVector<T>>,
    pub u_t: Vec<DVector<T>>,
    pub v: Vec<DVector<T>>,
    pub v_t: Vec<DVector<T>>,
    pub w: Vec<DVector<T>>,
    pub w_t: Vec<DVector<T>>,
    /// ||u - (v + w)||_1 per sample.
    pub recon_defect: Vec<T>,
    /// ||(v, v_t)||_{H_eps} per sample.
    pub z_norm: Vec<T>,
    /// ||(w, w_t)|| in the regularity norm per sample.
    pub k_norm: Vec<T>,
}

impl<T: Real> SplitTrajectory<T> {
    pub fn max_recon_defect(&self) -> T {
        self.recon_defect.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }
}

/// Integrate the coupled split: u with its own reaction term, w driven by
/// beta*u with the shifted monotone term, v as the decaying remainder.
/// Initial data: v(0) = u0, v_t(0) = u1 + f(0) - beta u0; w(0) = 0,
/// w_t(0) = -f(0) + beta u0.
#[allow(clippy::too_many_arguments)]
pub fn solve_split<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    eps: T,
    u0: DVector<T>,
    u1: DVector<T>,
    t_end: T,
    dt: T,
    tol: T,
    mode: VMode,
) -> Result<SplitTrajectory<T>> {
    if !spec.theta.is_finite() {
        return Err(Error::InvalidInput(
            "splitting requires a finite monotonicity defect".into(),
        ));
    }
    let n = ops.n();
    if u0.len() != n || u1.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u0.len() });
    }
    let beta = spec.beta;
    let f0 = spec.f_at_zero();
    let mut u = u0.clone();
    let mut ut = u1.clone();
    let mut v = u0.clone();
    let mut vt = DVector::from_fn(n, |i, _| u1[i] + f0 - beta * u0[i]);
    let mut w = DVector::zeros(n);
    let mut wt = DVector::from_fn(n, |i, _| -f0 + beta * u0[i]);

    let n_steps = (t_end / dt).to_f64().round() as usize;
    let mut out = SplitTrajectory {
        eps,
        times: Vec::with_capacity(n_steps + 1),
        u: Vec::new(),
        u_t: Vec::new(),
        v: Vec::new(),
        v_t: Vec::new(),
        w: Vec::new(),
        w_t: Vec::new(),
        recon_defect: Vec::new(),
        z_norm: Vec::new(),
        k_norm: Vec::new(),
    };
    let record = |t: T,
                      u: &DVector<T>,
                      ut: &DVector<T>,
                      v: &DVector<T>,
                      vt: &DVector<T>,
                      w: &DVector<T>,
                      wt: &DVector<T>,
                      out: &mut SplitTrajectory<T>|
     -> Result<()> {
        out.times.push(t);
        out.recon_defect.push(ops.norm_h1(&(u - (v + w)))?);
        out.z_norm.push(ops.norm_heps_sq(v, vt, eps).sqrt());
        out.k_norm.push(ops.norm_deps(w, wt));
        out.u.push(u.clone());
        out.u_t.push(ut.clone());
        out.v.push(v.clone());
        out.v_t.push(vt.clone());
        out.w.push(w.clone());
        out.w_t.push(wt.clone());
        Ok(())
    };
    record(T::zero(), &u, &ut, &v, &vt, &w, &wt, &mut out)?;

    let psi_term = ReactionTerm::Psi(spec);
    for k in 0..n_steps {
        let (u_next, ut_next, _, _) =
            step_hyperbolic_general(ops, &u, &ut, eps, dt, &ReactionTerm::F(spec), None, tol)?;
        let u_mid = (&u + &u_next) * T::of(0.5);
        // w is forced by beta*u, lumped like every other reaction-term load.
        let w_load =
            DVector::from_fn(n, |i, _| -beta * ops.lumped_mass[i] * u_mid[i]);
        let (w_next, wt_next, _, _) =
            step_hyperbolic_general(ops, &w, &wt, eps, dt, &psi_term, Some(&w_load), tol)?;
        let (v_next, vt_next) = match mode {
            VMode::Direct => {
                let g_u = discrete_gradient_load(ops, &psi_term, &u, &u_next);
                let g_w = discrete_gradient_load(ops, &psi_term, &w, &w_next);
                let v_load = &g_u - &g_w;
                let (vn, vtn, _, _) = step_hyperbolic_general(
                    ops,
                    &v,
                    &vt,
                    eps,
                    dt,
                    &ReactionTerm::None,
                    Some(&v_load),
                    tol,
                )?;
                (vn, vtn)
            }
            VMode::FromIdentity => (&u_next - &w_next, &ut_next - &wt_next),
        };
        u = u_next;
        ut = ut_next;
        w = w_next;
        wt = wt_next;
        v = v_next;
        vt = vt_next;
        record(dt * T::of((k + 1) as f64), &u, &ut, &v, &vt, &w, &wt, &mut out)?;
    }
    Ok(out)
}

/// sup over samples of the regularity norm of (w, w_t).
pub fn measure_k_regularity<T: Real>(split: &SplitTrajectory<T>) -> T {
    split.k_norm.iter().copied().fold(T::zero(), |a, b| a.max(b))
}

/// Least-squares slope of log z^2 over t in [t_skip, end]; returns
/// (omega_hat, r_squared) with omega_hat = -slope. None when too few
/// positive samples remain.
pub fn fit_z_decay<T: Real>(split: &SplitTrajectory<T>, t_skip: T) -> Option<(T, T)> {
    let pts: Vec<(T, T)> = split
        .times
        .iter()
        .zip(&split.z_norm)
        .filter(|&(&t, &z)| t >= t_skip && z > T::zero())
        .map(|(&t, &z)| (t, T::of(2.0) * z.ln()))
        .collect();
    linear_fit(&pts).map(|(slope, r2)| (-slope, r2))
}

/// Ordinary least squares y = a + b t; returns (b, R^2).
pub fn linear_fit<T: Real>(pts: &[(T, T)]) -> Option<(T, T)> {
    if pts.len() < 3 {
        return None;
    }
    let n = T::of(pts.len() as f64);
    let (mut sx, mut sy) = (T::zero(), T::zero());
    for &(x, y) in pts {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= T::zero() {
        return None;
    }
    let b = sxy / sxx;
    let r2 = if syy > T::zero() { (sxy * sxy) / (sxx * syy) } else { T::one() };
    Some((b, r2))
}

/// Records of the linear/forced splitting of a trajectory difference.
#[derive(Debug, Clone)]
pub struct DifferenceSplit<T> {
    pub eps: T,
    pub times: Vec<T>,
    /// ||(ubar, ubar_t)||_{H_eps} per sample.
    pub ubar_norm: Vec<T>,
    /// Regularity norm of (vbar, vbar_t) per sample.
    pub vbar_dnorm: Vec<T>,
    /// ||difference - (ubar + vbar)||_1 per sample.
    pub recon_defect: Vec<T>,
    /// First grid time (multiple of 0.5) where the contraction factor
    /// drops below 1/2.
    pub t_star: Option<T>,
    /// Contraction factor at t_star (or at the final time if none found).
    pub alpha_hat: T,
    /// Smoothing constant at the same time.
    pub lambda_hat: T,
    /// Exact per-step monotonicity of the equivalent-norm functional held
    /// for the linear part.
    pub n_eps_monotone: bool,
}

/// Split the difference of the trajectories from phi0 and theta0 into a
/// homogeneous linear part (carrying the initial difference) and a forced
/// part started from zero. Scans contraction at multiples of 0.5 up to
/// t_end; not finding alpha_hat < 1/2 is a reported negative, not an error.
#[allow(clippy::too_many_arguments)]
pub fn difference_split<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    eps: T,
    phi0: (DVector<T>, DVector<T>),
    theta0: (DVector<T>, DVector<T>),
    t_end: T,
    dt: T,
    tol: T,
) -> Result<DifferenceSplit<T>> {
    let n = ops.n();
    let params = FunctionalParams {
        eps,
        lambda: T::one(),
        mu: T::of(0.5),
        eta: T::of(0.5),
        alpha: T::one(),
        beta: spec.beta,
    };
    let (mut ua, mut uat) = phi0.clone();
    let (mut ub, mut ubt) = theta0.clone();
    let mut ubar = &phi0.0 - &theta0.0;
    let mut ubart = &phi0.1 - &theta0.1;
    let mut vbar = DVector::zeros(n);
    let mut vbart = DVector::zeros(n);
    let d0 = ops.norm_heps_sq(&ubar, &ubart, eps).sqrt();

    let n_steps = (t_end / dt).to_f64().round() as usize;
    let mut times = vec![T::zero()];
    let mut ubar_norm = vec![d0];
    let mut vbar_dnorm = vec![T::zero()];
    let mut recon_defect = vec![T::zero()];
    let mut n_eps_monotone = true;
    let mut n_prev = n_eps(ops, &ubar, &ubart, &params);
    let f_term = ReactionTerm::F(spec);

    for k in 0..n_steps {
        let (ua_n, uat_n, _, _) =
            step_hyperbolic_general(ops, &ua, &uat, eps, dt, &f_term, None, tol)?;
        let (ub_n, ubt_n, _, _) =
            step_hyperbolic_general(ops, &ub, &ubt, eps, dt, &f_term, None, tol)?;
        let (ubar_n, ubart_n, _, _) = step_hyperbolic_general(
            ops,
            &ubar,
            &ubart,
            eps,
            dt,
            &ReactionTerm::None,
            None,
            tol,
        )?;
        let g_a = discrete_gradient_load(ops, &f_term, &ua, &ua_n);
        let g_b = discrete_gradient_load(ops, &f_term, &ub, &ub_n);
        let v_load = &g_a - &g_b;
        let (vbar_n, vbart_n, _, _) = step_hyperbolic_general(
            ops,
            &vbar,
            &vbart,
            eps,
            dt,
            &ReactionTerm::None,
            Some(&v_load),
            tol,
        )?;
        ua = ua_n;
        uat = uat_n;
        ub = ub_n;
        ubt = ubt_n;
        ubar = ubar_n;
        ubart = ubart_n;
        vbar = vbar_n;
        vbart = vbart_n;

        let n_now = n_eps(ops, &ubar, &ubart, &params);
        if n_now > n_prev * (T::one() + T::of(1e-12)) + T::of(1e-14) {
            n_eps_monotone = false;
        }
        n_prev = n_now;

        times.push(dt * T::of((k + 1) as f64));
        ubar_norm.push(ops.norm_heps_sq(&ubar, &ubart, eps).sqrt());
        vbar_dnorm.push(ops.norm_deps(&vbar, &vbart));
        let du = &ua - &ub;
        let dut = &uat - &ubt;
        let defect_u = &du - &(&ubar + &vbar);
        let defect_v = &dut - &(&ubart + &vbart);
        recon_defect.push(ops.norm_h1(&defect_u)? + ops.norm_l2_sq(&defect_v).sqrt());
    }

    // Contraction scan on the 0.5-multiples grid.
    let mut t_star = None;
    let mut alpha_hat = if d0 > T::zero() {
        ubar_norm[times.len() - 1] / d0
    } else {
        T::zero()
    };
    let mut lambda_hat = if d0 > T::zero() {
        vbar_dnorm[times.len() - 1] / d0
    } else {
        T::zero()
    };
    if d0 > T::zero() {
        let grid_stride = (T::of(0.5) / dt).to_f64().round() as usize;
        if grid_stride > 0 {
            let mut k = grid_stride;
            while k < times.len() {
                let a = ubar_norm[k] / d0;
                if a < T::of(0.5) {
                    t_star = Some(times[k]);
                    alpha_hat = a;
                    lambda_hat = vbar_dnorm[k] / d0;
                    break;
                }
                k += grid_stride;
            }
        }
    } else {
        t_star = Some(T::zero());
    }

    Ok(DifferenceSplit {
        eps,
        times,
        ubar_norm,
        vbar_dnorm,
        recon_defect,
        t_star,
        alpha_hat,
        lambda_hat,
        n_eps_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, build_mesh, Domain};

    fn interval(n: usize) -> Operators<f64> {
        assemble(&build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, n).unwrap()).unwrap()
    }

    fn bump(ops: &Operators<f64>, amp: f64) -> DVector<f64> {
        DVector::from_fn(ops.n(), |i, _| {
            let x = ops.mesh.coords[i][0];
            amp * (std::f64::consts::PI * x).sin() + 0.2 * amp * (1.0 - x)
        })
    }

    fn dw_spec() -> NonlinearitySpec<f64> {
        NonlinearitySpec::double_well(1.0).unwrap().with_beta(3.0).unwrap()
    }

    #[test]
    fn zero_data_splits_to_zero() {
        let ops = interval(8);
        let spec = dw_spec();
        let z = DVector::zeros(ops.n());
        let split = solve_split(
            &ops,
            &spec,
            1.0,
            z.clone(),
            z,
            0.2,
            0.02,
            1e-11,
            VMode::Direct,
        )
        .unwrap();
        assert!(split.max_recon_defect() < 1e-12);
        assert!(split.z_norm.iter().all(|&z| z < 1e-10));
        assert!(split.k_norm.iter().all(|&k| k < 1e-10));
    }

    #[test]
    fn direct_v_reconstructs_u() {
        let ops = interval(24);
        let spec = dw_spec();
        let split = solve_split(
            &ops,
            &spec,
            0.5,
            bump(&ops, 1.0),
            bump(&ops, -0.4),
            1.0,
            0.01,
            1e-11,
            VMode::Direct,
        )
        .unwrap();
        assert!(split.max_recon_defect() < 1e-8, "{}", split.max_recon_defect());
    }

    #[test]
    fn identity_mode_matches_direct() {
        let ops = interval(16);
        let spec = dw_spec();
        let a = solve_split(
            &ops,
            &spec,
            1.0,
            bump(&ops, 0.8),
            DVector::zeros(ops.n()),
            0.5,
            0.01,
            1e-11,
            VMode::Direct,
        )
        .unwrap();
        let b = solve_split(
            &ops,
            &spec,
            1.0,
            bump(&ops, 0.8),
            DVector::zeros(ops.n()),
            0.5,
            0.01,
            1e-11,
            VMode::FromIdentity,
        )
        .unwrap();
        let last = a.v.len() - 1;
        let dv = (&a.v[last] - &b.v[last]).abs().max();
        assert!(dv < 1e-7, "{dv}");
    }

    #[test]
    fn infinite_defect_rejected() {
        let ops = interval(8);
        let quad = NonlinearitySpec::poly(&[0.0, 0.0, 1.0]).unwrap();
        let z = DVector::zeros(ops.n());
        assert!(solve_split(&ops, &quad, 1.0, z.clone(), z, 0.1, 0.01, 1e-10, VMode::Direct)
            .is_err());
    }

    #[test]
    fn z_part_decays() {
        let ops = interval(24);
        let spec = dw_spec();
        let split = solve_split(
            &ops,
            &spec,
            0.5,
            bump(&ops, 1.0),
            DVector::zeros(ops.n()),
            6.0,
            0.02,
            1e-11,
            VMode::Direct,
        )
        .unwrap();
        let (omega, r2) = fit_z_decay(&split, 1.0).unwrap();
        assert!(omega > 0.0, "omega {omega}");
        assert!(r2 > 0.9, "r2 {r2}");
        assert!(measure_k_regularity(&split).is_finite());
    }

    #[test]
    fn identical_trajectories_split_to_zero() {
        let ops = interval(12);
        let spec = dw_spec();
        let phi = (bump(&ops, 1.0), DVector::zeros(ops.n()));
        let ds =
            difference_split(&ops, &spec, 1.0, phi.clone(), phi, 1.0, 0.02, 1e-11).unwrap();
        assert!(ds.ubar_norm.iter().all(|&x| x < 1e-12));
        assert!(ds.vbar_dnorm.iter().all(|&x| x < 1e-10));
        assert_eq!(ds.t_star, Some(0.0));
    }

    #[test]
    fn linear_difference_is_pure_ubar() {
        let ops = interval(16);
        let spec = NonlinearitySpec::zero();
        let phi = (bump(&ops, 1.0), DVector::zeros(ops.n()));
        let mut th = phi.clone();
        th.0[4] += 0.3;
        let ds = difference_split(&ops, &spec, 1.0, phi, th, 2.0, 0.02, 1e-11).unwrap();
        assert!(ds.vbar_dnorm.iter().all(|&x| x < 1e-10));
        assert!(ds.n_eps_monotone);
        let last = *ds.recon_defect.last().unwrap();
        assert!(last < 1e-9, "{last}");
    }

    #[test]
    fn difference_split_reconstructs() {
        let ops = interval(24);
        let spec = dw_spec();
        let phi = (bump(&ops, 1.2), bump(&ops, 0.2));
        let mut th = phi.clone();
        th.0 *= 0.9;
        let ds = difference_split(&ops, &spec, 0.5, phi, th, 3.0, 0.02, 1e-11).unwrap();
        let worst = ds.recon_defect.iter().copied().fold(0.0f64, f64::max);
        assert!(worst < 1e-8, "{worst}");
        assert!(ds.n_eps_monotone);
    }
}
