//! Implicit-midpoint time marching for the damped wave problem and its
//! parabolic limit, with a discrete-gradient treatment of the reaction term
//! so the energy balance is an exact algebraic identity of the scheme.

use nalgebra::{DMatrix, DVector};

use crate::functionals::EnergyLedger;
use crate::mesh::Operators;
use crate::nonlin::NonlinearitySpec;
use crate::{Error, Real, Result};

/// State (u, u_t) of the damped wave problem.
#[derive(Debug, Clone)]
pub struct HypState<T> {
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub t: T,
    pub eps: T,
}

impl<T: Real> HypState<T> {
    pub fn new(u: DVector<T>, v: DVector<T>, eps: T) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
        }
        if !(eps > T::zero()) {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        Ok(Self { u, v, t: T::zero(), eps })
    }
}

/// State of the parabolic problem. The boundary trace is carried by the
/// nodal values themselves; a mismatched initial trace is representable by
/// overwriting the boundary nodes of u0.
#[derive(Debug, Clone)]
pub struct ParState<T> {
    pub u: DVector<T>,
    pub t: T,
}

impl<T: Real> ParState<T> {
    /// `gamma0`, when given, holds values for the boundary nodes in the
    /// mesh's `boundary_nodes` order, replacing the trace of u0.
    pub fn new(ops: &Operators<T>, u0: DVector<T>, gamma0: Option<&[T]>) -> Result<Self> {
        if u0.len() != ops.n() {
            return Err(Error::DimensionMismatch { expected: ops.n(), got: u0.len() });
        }
        let mut u = u0;
        if let Some(g) = gamma0 {
            if g.len() != ops.mesh.boundary_nodes.len() {
                return Err(Error::DimensionMismatch {
                    expected: ops.mesh.boundary_nodes.len(),
                    got: g.len(),
                });
            }
            for (k, &b) in ops.mesh.boundary_nodes.iter().enumerate() {
                u[b] = g[k];
            }
        }
        Ok(Self { u, t: T::zero() })
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<T> {
    pub t: T,
    pub energy: T,
    pub diss_increment: T,
    pub residual: T,
    pub newton_iters: usize,
}

/// Which potential the discrete gradient differentiates.
#[derive(Debug, Clone, Copy)]
pub enum ReactionTerm<'a, T> {
    None,
    /// f = F', the problem's own reaction term.
    F(&'a NonlinearitySpec<T>),
    /// psi = f + beta s, the shifted monotone term of the splitting.
    Psi(&'a NonlinearitySpec<T>),
}

impl<T: Real> ReactionTerm<'_, T> {
    /// Divided difference of the potential between a and b, and its
    /// derivative in b; collapses to the midpoint value of the derivative
    /// when a and b nearly coincide.
    fn dgrad(&self, a: T, b: T) -> (T, T) {
        let (p, pp, ppp): (&dyn Fn(T) -> T, &dyn Fn(T) -> T, &dyn Fn(T) -> T) = match self {
            ReactionTerm::None => return (T::zero(), T::zero()),
            ReactionTerm::F(s) => (&|x| s.big_f(x), &|x| s.f(x), &|x| s.fprime(x)),
            ReactionTerm::Psi(s) => (&|x| s.big_psi(x), &|x| s.psi(x), &|x| s.psi_prime(x)),
        };
        let d = b - a;
        if d.abs() < T::of(1e-10) {
            let mid = (a + b) * T::of(0.5);
            (pp(mid), ppp(mid) * T::of(0.5))
        } else {
            let val = (p(b) - p(a)) / d;
            (val, (pp(b) * d - (p(b) - p(a))) / (d * d))
        }
    }

    pub fn potential(&self, s: T) -> T {
        match self {
            ReactionTerm::None => T::zero(),
            ReactionTerm::F(sp) => sp.big_f(s),
            ReactionTerm::Psi(sp) => sp.big_psi(s),
        }
    }
}

/// Lumped discrete-gradient load of a completed step: component i is
/// m_i (P(b_i) - P(a_i)) / (b_i - a_i).
pub fn discrete_gradient_load<T: Real>(
    ops: &Operators<T>,
    term: &ReactionTerm<'_, T>,
    a: &DVector<T>,
    b: &DVector<T>,
) -> DVector<T> {
    DVector::from_fn(ops.n(), |i, _| ops.lumped_mass[i] * term.dgrad(a[i], b[i]).0)
}

/// Residual norm: the lumped L2 norm sqrt(sum r_i^2 / m_i) of the residual
/// of the dt-scaled step equation, so the tolerance is on the per-step
/// increment rather than on terms carrying 1/dt^2 factors.
fn weighted_residual_norm<T: Real>(ops: &Operators<T>, r: &DVector<T>, dt: T) -> T {
    let mut acc = T::zero();
    for i in 0..r.len() {
        acc += r[i] * r[i] / ops.lumped_mass[i];
    }
    acc.sqrt() * dt
}

const NEWTON_MAX_ITERS: usize = 30;

fn a_h_dense<T: Real>(ops: &Operators<T>) -> DMatrix<T> {
    ops.stiffness.to_dense() + ops.m_gamma.to_dense()
}

/// Discrete energy of the damped wave problem:
/// ||u||_1^2 + eps ||v||^2 + 2 sum_i m_i F(u_i).
pub fn hyp_energy<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
    v: &DVector<T>,
    eps: T,
) -> T {
    let big_f = u.map(|s| spec.big_f(s));
    ops.norm_h1_sq(u) + eps * ops.norm_l2_sq(v) + T::of(2.0) * ops.lumped_integral(&big_f)
}

/// Parabolic Lyapunov functional (||grad u||^2 + ||u||^2_Gamma)/2 + int F(u).
pub fn par_lyapunov<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
) -> T {
    let big_f = u.map(|s| spec.big_f(s));
    ops.norm_h1_sq(u) * T::of(0.5) + ops.lumped_integral(&big_f)
}

/// One implicit-midpoint step of
/// eps M v' + (M + M_gamma) v + (K + M_gamma) u + G + load = 0, u' = v,
/// with G the discrete gradient of the chosen reaction term. Newton runs on
/// the end-of-step displacement with the velocity eliminated.
pub fn step_hyperbolic_general<T: Real>(
    ops: &Operators<T>,
    u: &DVector<T>,
    v: &DVector<T>,
    eps: T,
    dt: T,
    term: &ReactionTerm<'_, T>,
    load: Option<&DVector<T>>,
    tol: T,
) -> Result<(DVector<T>, DVector<T>, T, usize)> {
    let n = ops.n();
    let two = T::of(2.0);
    let half = T::of(0.5);
    let a_h = a_h_dense(ops);
    // Residual in the end displacement up: with vp = 2(up - u)/dt - v,
    // eps M (vp - v)/dt + (M + M_gamma)(up - u)/dt + A_h (u + up)/2 + G + load.
    let m_d = ops.m_omega.to_dense();
    let mg_d = ops.m_gamma.to_dense();
    let base = &m_d * (two * eps / (dt * dt))
        + (&m_d + &mg_d) * (T::one() / dt)
        + &a_h * half;
    let mut up = u + v * dt;
    let residual = |up: &DVector<T>| -> DVector<T> {
        let dv = (up - u) * (two / (dt * dt)) - v * (two / dt);
        let mut r = ops.m_omega.matvec(&dv) * eps
            + (ops.m_omega.matvec(&((up - u) / dt)) + ops.m_gamma.matvec(&((up - u) / dt)))
            + (ops.stiffness.matvec(&((u + up) * half))
                + ops.m_gamma.matvec(&((u + up) * half)));
        for i in 0..n {
            r[i] += ops.lumped_mass[i] * term.dgrad(u[i], up[i]).0;
        }
        if let Some(l) = load {
            r += l;
        }
        r
    };
    let mut res = residual(&up);
    let mut rnorm = weighted_residual_norm(ops, &res, dt);
    let mut iters = 0;
    while rnorm > tol {
        if iters >= NEWTON_MAX_ITERS {
            return Err(Error::NewtonFailure { iters, residual: rnorm.to_f64() });
        }
        let mut jac = base.clone();
        for i in 0..n {
            jac[(i, i)] += ops.lumped_mass[i] * term.dgrad(u[i], up[i]).1;
        }
        let lu = jac.lu();
        let delta = lu
            .solve(&res)
            .ok_or(Error::NewtonFailure { iters, residual: rnorm.to_f64() })?;
        up -= delta;
        res = residual(&up);
        rnorm = weighted_residual_norm(ops, &res, dt);
        iters += 1;
    }
    let vp = (&up - u) * (two / dt) - v;
    Ok((up, vp, rnorm, iters))
}

/// One implicit-midpoint step of
/// (M + M_gamma) u' + (K + M_gamma) u + G + load = 0.
pub fn step_parabolic_general<T: Real>(
    ops: &Operators<T>,
    u: &DVector<T>,
    dt: T,
    term: &ReactionTerm<'_, T>,
    load: Option<&DVector<T>>,
    tol: T,
) -> Result<(DVector<T>, T, usize)> {
    let n = ops.n();
    let half = T::of(0.5);
    let a_h = a_h_dense(ops);
    let m_full = ops.m_omega.to_dense() + ops.m_gamma.to_dense();
    let base = &m_full * (T::one() / dt) + &a_h * half;
    let mut up = u.clone();
    let residual = |up: &DVector<T>| -> DVector<T> {
        let ud = (up - u) / dt;
        let mut r = ops.m_omega.matvec(&ud)
            + ops.m_gamma.matvec(&ud)
            + ops.stiffness.matvec(&((u + up) * half))
            + ops.m_gamma.matvec(&((u + up) * half));
        for i in 0..n {
            r[i] += ops.lumped_mass[i] * term.dgrad(u[i], up[i]).0;
        }
        if let Some(l) = load {
            r += l;
        }
        r
    };
    let mut res = residual(&up);
    let mut rnorm = weighted_residual_norm(ops, &res, dt);
    let mut iters = 0;
    while rnorm > tol {
        if iters >= NEWTON_MAX_ITERS {
            return Err(Error::NewtonFailure { iters, residual: rnorm.to_f64() });
        }
        let mut jac = base.clone();
        for i in 0..n {
            jac[(i, i)] += ops.lumped_mass[i] * term.dgrad(u[i], up[i]).1;
        }
        let delta = jac
            .lu()
            .solve(&res)
            .ok_or(Error::NewtonFailure { iters, residual: rnorm.to_f64() })?;
        up -= delta;
        res = residual(&up);
        rnorm = weighted_residual_norm(ops, &res, dt);
        iters += 1;
    }
    Ok((up, rnorm, iters))
}

/// Default Newton tolerance on the weighted residual.
pub fn default_tol<T: Real>() -> T {
    T::of(1e-10)
}

/// One step of the damped wave problem with the problem's own reaction term.
pub fn step_hyperbolic<T: Real>(
    state: &HypState<T>,
    dt: T,
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    tol: T,
) -> Result<(HypState<T>, StepReport<T>)> {
    let (up, vp, residual, newton_iters) = step_hyperbolic_general(
        ops,
        &state.u,
        &state.v,
        state.eps,
        dt,
        &ReactionTerm::F(spec),
        None,
        tol,
    )?;
    let vh = (&state.v + &vp) * T::of(0.5);
    let diss_increment =
        T::of(2.0) * dt * (ops.norm_l2_sq(&vh) + ops.norm_gamma_sq(&vh));
    let t = state.t + dt;
    let energy = hyp_energy(ops, spec, &up, &vp, state.eps);
    Ok((
        HypState { u: up, v: vp, t, eps: state.eps },
        StepReport { t, energy, diss_increment, residual, newton_iters },
    ))
}

/// One step of the parabolic limit problem.
pub fn step_parabolic<T: Real>(
    state: &ParState<T>,
    dt: T,
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    tol: T,
) -> Result<(ParState<T>, StepReport<T>)> {
    let (up, residual, newton_iters) =
        step_parabolic_general(ops, &state.u, dt, &ReactionTerm::F(spec), None, tol)?;
    let ud = (&up - &state.u) / dt;
    let diss_increment = dt * (ops.norm_l2_sq(&ud) + ops.norm_gamma_sq(&ud));
    let t = state.t + dt;
    let energy = par_lyapunov(ops, spec, &up);
    Ok((
        ParState { u: up, t },
        StepReport { t, energy, diss_increment, residual, newton_iters },
    ))
}

/// Which problem a trajectory solve marches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem<T> {
    Hyperbolic { eps: T },
    Parabolic,
}

#[derive(Debug, Clone)]
pub enum InitialData<T> {
    Hyperbolic { u0: DVector<T>, u1: DVector<T> },
    Parabolic { u0: DVector<T>, gamma0: Option<Vec<T>> },
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    pub t_end: T,
    pub dt: T,
    pub tol: T,
    /// Keep every k-th state in the sample record (the ledger keeps all).
    pub sample_stride: usize,
}

impl<T: Real> SolveOptions<T> {
    pub fn new(t_end: T, dt: T) -> Self {
        Self { t_end, dt, tol: default_tol(), sample_stride: 1 }
    }
}

/// Sampled trajectory with the instrumented ledger. For parabolic solves
/// the `v` record holds per-step difference quotients of u.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T> {
    pub problem: Problem<T>,
    pub times: Vec<T>,
    pub u: Vec<DVector<T>>,
    pub v: Vec<DVector<T>>,
    pub ledger: EnergyLedger<T>,
    /// |E(T) + total dissipation - E(0)|.
    pub cumulative_defect: T,
    /// Largest single-step balance defect.
    pub max_step_defect: T,
}

pub const LEDGER_COLUMNS: [&str; 8] = [
    "heps_sq",
    "energy",
    "diss_increment",
    "diss_integral",
    "ut_sq",
    "ut_gamma_sq",
    "residual",
    "newton_iters",
];

struct MacroStepOutcome<T> {
    u: DVector<T>,
    v: DVector<T>,
    residual: T,
    newton_iters: usize,
    diss_increment: T,
}

/// Advance by dt; on Newton failure recurse on two half steps, up to 5
/// levels deep.
fn macro_step<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    problem: Problem<T>,
    u: &DVector<T>,
    v: &DVector<T>,
    dt: T,
    tol: T,
    depth: usize,
) -> Result<MacroStepOutcome<T>> {
    let attempt = match problem {
        Problem::Hyperbolic { eps } => {
            step_hyperbolic_general(ops, u, v, eps, dt, &ReactionTerm::F(spec), None, tol).map(
                |(up, vp, residual, newton_iters)| {
                    let vh = (v + &vp) * T::of(0.5);
                    let diss =
                        T::of(2.0) * dt * (ops.norm_l2_sq(&vh) + ops.norm_gamma_sq(&vh));
                    MacroStepOutcome {
                        u: up,
                        v: vp,
                        residual,
                        newton_iters,
                        diss_increment: diss,
                    }
                },
            )
        }
        Problem::Parabolic => {
            step_parabolic_general(ops, u, dt, &ReactionTerm::F(spec), None, tol).map(
                |(up, residual, newton_iters)| {
                    let ud = (&up - u) / dt;
                    let diss = dt * (ops.norm_l2_sq(&ud) + ops.norm_gamma_sq(&ud));
                    MacroStepOutcome {
                        u: up.clone(),
                        v: ud,
                        residual,
                        newton_iters,
                        diss_increment: diss,
                    }
                },
            )
        }
    };
    match attempt {
        Ok(out) => Ok(out),
        Err(e) if depth < 5 => {
            log::warn!("step failed at dt={}, halving: {e}", dt.to_f64());
            let half = dt * T::of(0.5);
            let first = macro_step(ops, spec, problem, u, v, half, tol, depth + 1)?;
            let second =
                macro_step(ops, spec, problem, &first.u, &first.v, half, tol, depth + 1)?;
            Ok(MacroStepOutcome {
                u: second.u,
                v: second.v,
                residual: first.residual.max(second.residual),
                newton_iters: first.newton_iters + second.newton_iters,
                diss_increment: first.diss_increment + second.diss_increment,
            })
        }
        Err(e) => Err(e),
    }
}

/// March from t = 0 to t_end, recording states and the energy ledger.
pub fn solve_trajectory<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    problem: Problem<T>,
    init: InitialData<T>,
    opts: &SolveOptions<T>,
) -> Result<TrajectoryRecord<T>> {
    if !(opts.dt > T::zero()) || opts.t_end < T::zero() {
        return Err(Error::InvalidInput("need dt > 0 and t_end >= 0".into()));
    }
    let (mut u, mut v) = match (&problem, init) {
        (Problem::Hyperbolic { eps: _ }, InitialData::Hyperbolic { u0, u1 }) => (u0, u1),
        (Problem::Parabolic, InitialData::Parabolic { u0, gamma0 }) => {
            let st = ParState::new(ops, u0, gamma0.as_deref())?;
            (st.u, DVector::zeros(ops.n()))
        }
        _ => return Err(Error::InvalidInput("initial data does not match problem kind".into())),
    };
    if u.len() != ops.n() || v.len() != ops.n() {
        return Err(Error::DimensionMismatch { expected: ops.n(), got: u.len() });
    }
    let energy_of = |u: &DVector<T>, v: &DVector<T>| match problem {
        Problem::Hyperbolic { eps } => hyp_energy(ops, spec, u, v, eps),
        Problem::Parabolic => par_lyapunov(ops, spec, u),
    };
    let heps_of = |u: &DVector<T>, v: &DVector<T>| match problem {
        Problem::Hyperbolic { eps } => ops.norm_heps_sq(u, v, eps),
        Problem::Parabolic => ops.norm_y_sq(u, u),
    };

    let mut ledger = EnergyLedger::new(&LEDGER_COLUMNS);
    let e0 = energy_of(&u, &v);
    let mut diss_integral = T::zero();
    ledger.push(
        T::zero(),
        &[heps_of(&u, &v), e0, T::zero(), T::zero(), ops.norm_l2_sq(&v), ops.norm_gamma_sq(&v), T::zero(), T::zero()],
    )?;

    let n_steps = (opts.t_end / opts.dt).to_f64().round() as usize;
    let stride = opts.sample_stride.max(1);
    let mut times = vec![T::zero()];
    let mut us = vec![u.clone()];
    let mut vs = vec![v.clone()];
    let mut e_prev = e0;
    let mut max_step_defect = T::zero();

    for k in 0..n_steps {
        let out = macro_step(ops, spec, problem, &u, &v, opts.dt, opts.tol, 0)?;
        u = out.u;
        v = out.v;
        let t = opts.dt * T::of((k + 1) as f64);
        let e = energy_of(&u, &v);
        diss_integral += out.diss_increment;
        let step_defect = (e - e_prev + out.diss_increment).abs();
        max_step_defect = max_step_defect.max(step_defect);
        e_prev = e;
        ledger.push(
            t,
            &[
                heps_of(&u, &v),
                e,
                out.diss_increment,
                diss_integral,
                ops.norm_l2_sq(&v),
                ops.norm_gamma_sq(&v),
                out.residual,
                T::of(out.newton_iters as f64),
            ],
        )?;
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            times.push(t);
            us.push(u.clone());
            vs.push(v.clone());
        }
    }
    let cumulative_defect = (e_prev + diss_integral - e0).abs();
    Ok(TrajectoryRecord {
        problem,
        times,
        u: us,
        v: vs,
        ledger,
        cumulative_defect,
        max_step_defect,
    })
}

/// Well-prepared velocity u1 = lap_h(u0) - f(u0) for singular-limit studies;
/// the flux in lap_h is taken with u_t = 0.
pub fn prepared_velocity<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    u0: &DVector<T>,
) -> DVector<T> {
    let lap = ops.discrete_laplacian(u0, &DVector::zeros(ops.n()));
    DVector::from_fn(ops.n(), |i, _| lap[i] - spec.f(u0[i]))
}

/// Right-hand side of the discrete parabolic system solved for u':
/// u' = -(M + M_gamma)^-1 ((K + M_gamma) u + f-load).
pub fn parabolic_velocity<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let mut rhs = ops.stiffness.matvec(u) + ops.m_gamma.matvec(u);
    for i in 0..ops.n() {
        rhs[i] += ops.lumped_mass[i] * spec.f(u[i]);
    }
    let m_full = ops.m_omega.to_dense() + ops.m_gamma.to_dense();
    let factor = crate::linalg::SpdFactor::new(m_full)?;
    Ok(-factor.solve(&rhs))
}

/// Measured pairwise separation of two trajectories from nearby data.
#[derive(Debug, Clone)]
pub struct DependenceReport<T> {
    /// sup_t log(d(t)/d(0)) / t over sampled t > 0; None when the
    /// initial difference vanishes.
    pub nu_hat: Option<T>,
    /// (t, squared H_eps distance) samples.
    pub curve: Vec<(T, T)>,
    /// Accumulated 2 int (||d_t||^2 + ||d_t||^2_Gamma).
    pub diss_integral: T,
    /// Local Lipschitz-level estimate from the visited solution range.
    pub q_r: T,
}

pub fn continuous_dependence_experiment<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    eps: T,
    init_a: (DVector<T>, DVector<T>),
    init_b: (DVector<T>, DVector<T>),
    t_end: T,
    dt: T,
) -> Result<DependenceReport<T>> {
    let opts = SolveOptions::new(t_end, dt);
    let ta = solve_trajectory(
        ops,
        spec,
        Problem::Hyperbolic { eps },
        InitialData::Hyperbolic { u0: init_a.0, u1: init_a.1 },
        &opts,
    )?;
    let tb = solve_trajectory(
        ops,
        spec,
        Problem::Hyperbolic { eps },
        InitialData::Hyperbolic { u0: init_b.0, u1: init_b.1 },
        &opts,
    )?;
    let mut curve = Vec::with_capacity(ta.times.len());
    let mut sup_rate: Option<T> = None;
    let mut srange = T::zero();
    let mut diss_integral = T::zero();
    let d0 = {
        let du = &ta.u[0] - &tb.u[0];
        let dv = &ta.v[0] - &tb.v[0];
        ops.norm_heps_sq(&du, &dv, eps)
    };
    for k in 0..ta.times.len() {
        let du = &ta.u[k] - &tb.u[k];
        let dv = &ta.v[k] - &tb.v[k];
        let dsq = ops.norm_heps_sq(&du, &dv, eps);
        curve.push((ta.times[k], dsq));
        srange = srange.max(ta.u[k].abs().max()).max(tb.u[k].abs().max());
        if k > 0 {
            if d0 > T::zero() && dsq > T::zero() {
                let rate = (dsq / d0).ln() / ta.times[k];
                sup_rate = Some(sup_rate.map_or(rate, |r: T| r.max(rate)));
            }
            let dvh = (&(&ta.v[k] - &tb.v[k]) + (&ta.v[k - 1] - &tb.v[k - 1])) * T::of(0.5);
            diss_integral +=
                T::of(2.0) * dt * (ops.norm_l2_sq(&dvh) + ops.norm_gamma_sq(&dvh));
        }
    }
    let lip = spec.fprime(srange).abs().max(spec.fprime(-srange).abs()).max(spec.fprime(T::zero()).abs());
    let q_r = T::of(2.0) * (T::one() + lip + lip * lip);
    let nu_hat = if d0 > T::zero() { sup_rate } else { None };
    Ok(DependenceReport { nu_hat, curve, diss_integral, q_r })
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
            amp * (std::f64::consts::PI * x).sin() + 0.3 * amp * x * x
        })
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let ops = interval(8);
        let spec = NonlinearitySpec::double_well(1.0).unwrap();
        let z = DVector::zeros(ops.n());
        let st = HypState::new(z.clone(), z.clone(), 1.0).unwrap();
        let (next, rep) = step_hyperbolic(&st, 0.01, &ops, &spec, 1e-12).unwrap();
        assert_eq!(next.u.abs().max(), 0.0);
        assert_eq!(next.v.abs().max(), 0.0);
        assert_eq!(rep.energy, 0.0);
        let ps = ParState::new(&ops, z.clone(), None).unwrap();
        let (pn, _) = step_parabolic(&ps, 0.01, &ops, &spec, 1e-12).unwrap();
        assert_eq!(pn.u.abs().max(), 0.0);
    }

    #[test]
    fn hyperbolic_energy_identity_per_step() {
        let ops = interval(32);
        let spec = NonlinearitySpec::double_well(1.0).unwrap();
        let u0 = bump(&ops, 1.0);
        let v0 = bump(&ops, -0.5);
        let mut st = HypState::new(u0, v0, 0.7).unwrap();
        let mut e = hyp_energy(&ops, &spec, &st.u, &st.v, st.eps);
        for _ in 0..50 {
            let (next, rep) = step_hyperbolic(&st, 0.01, &ops, &spec, 1e-12).unwrap();
            let defect = (rep.energy - e + rep.diss_increment).abs();
            assert!(defect < 1e-10, "defect {defect}");
            assert!(rep.diss_increment >= 0.0);
            e = rep.energy;
            st = next;
        }
    }

    #[test]
    fn linear_energy_strictly_decreases() {
        let ops = interval(16);
        let spec = NonlinearitySpec::zero();
        let z = DVector::zeros(ops.n());
        let v0 = bump(&ops, 1.0);
        let mut st = HypState::new(z, v0, 1.0).unwrap();
        let mut e = hyp_energy(&ops, &spec, &st.u, &st.v, 1.0);
        for _ in 0..20 {
            let (next, rep) = step_hyperbolic(&st, 0.05, &ops, &spec, 1e-12).unwrap();
            assert!(rep.energy < e);
            e = rep.energy;
            st = next;
        }
    }

    #[test]
    fn parabolic_lyapunov_monotone_and_y_decay() {
        let ops = interval(24);
        let spec = NonlinearitySpec::zero();
        let one = DVector::from_element(ops.n(), 1.0);
        let mut st = ParState::new(&ops, one, None).unwrap();
        let mut lyap = par_lyapunov(&ops, &spec, &st.u);
        let mut ynorm = ops.norm_y_sq(&st.u, &st.u);
        for _ in 0..40 {
            let (next, rep) = step_parabolic(&st, 0.05, &ops, &spec, 1e-12).unwrap();
            assert!(rep.energy <= lyap + 1e-13);
            let y = ops.norm_y_sq(&next.u, &next.u);
            assert!(y < ynorm);
            lyap = rep.energy;
            ynorm = y;
            st = next;
        }
    }

    #[test]
    fn mismatched_trace_honored() {
        let ops = interval(6);
        let u0 = DVector::from_element(ops.n(), 2.0);
        let st = ParState::new(&ops, u0, Some(&[-1.0, 3.0])).unwrap();
        assert_eq!(st.u[0], -1.0);
        assert_eq!(st.u[ops.n() - 1], 3.0);
        assert_eq!(st.u[1], 2.0);
    }

    #[test]
    fn trajectory_t0_is_init_only() {
        let ops = interval(8);
        let spec = NonlinearitySpec::double_well(1.0).unwrap();
        let rec = solve_trajectory(
            &ops,
            &spec,
            Problem::Hyperbolic { eps: 1.0 },
            InitialData::Hyperbolic { u0: bump(&ops, 1.0), u1: DVector::zeros(ops.n()) },
            &SolveOptions::new(0.0, 0.01),
        )
        .unwrap();
        assert_eq!(rec.times.len(), 1);
        assert_eq!(rec.ledger.len(), 1);
        assert_eq!(rec.cumulative_defect, 0.0);
    }

    #[test]
    fn trajectory_cumulative_balance() {
        let ops = interval(32);
        let spec = NonlinearitySpec::double_well(1.0).unwrap();
        let rec = solve_trajectory(
            &ops,
            &spec,
            Problem::Hyperbolic { eps: 1.0 },
            InitialData::Hyperbolic { u0: bump(&ops, 1.5), u1: bump(&ops, -1.0) },
            &SolveOptions::new(1.0, 0.01),
        )
        .unwrap();
        assert!(rec.max_step_defect < 1e-9, "{}", rec.max_step_defect);
        assert!(rec.cumulative_defect < 1e-8, "{}", rec.cumulative_defect);
    }

    #[test]
    fn general_step_with_zero_term_matches_linear_solve() {
        let ops = interval(10);
        let u = bump(&ops, 1.0);
        let v = bump(&ops, 0.5);
        let (up, vp, _, iters) = step_hyperbolic_general(
            &ops,
            &u,
            &v,
            0.5,
            0.02,
            &ReactionTerm::None,
            None,
            1e-12,
        )
        .unwrap();
        // Linear problem: Newton converges in one iteration.
        assert!(iters <= 2);
        assert_eq!(vp.len(), up.len());
        // Midpoint consistency: vp = 2(up - u)/dt - v.
        let check = (&up - &u) * (2.0 / 0.02) - &v;
        assert!((check - vp).abs().max() < 1e-9);
    }

    #[test]
    fn identical_inits_have_undefined_rate() {
        let ops = interval(12);
        let spec = NonlinearitySpec::double_well(1.0).unwrap();
        let u0 = bump(&ops, 1.0);
        let v0 = DVector::zeros(ops.n());
        let rep = continuous_dependence_experiment(
            &ops,
            &spec,
            1.0,
            (u0.clone(), v0.clone()),
            (u0, v0),
            0.2,
            0.02,
        )
        .unwrap();
        assert!(rep.nu_hat.is_none());
        assert!(rep.curve.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn linear_dependence_nonincreasing() {
        let ops = interval(16);
        let spec = NonlinearitySpec::zero();
        let u0 = bump(&ops, 1.0);
        let v0 = DVector::zeros(ops.n());
        let mut u0b = u0.clone();
        u0b[3] += 0.1;
        let rep = continuous_dependence_experiment(
            &ops,
            &spec,
            1.0,
            (u0, v0.clone()),
            (u0b, v0),
            1.0,
            0.02,
        )
        .unwrap();
        assert!(rep.nu_hat.unwrap() <= 0.0);
        let d0 = rep.curve[0].1;
        assert!(rep.curve.iter().all(|&(_, d)| d <= d0 * (1.0 + 1e-12)));
    }
}
