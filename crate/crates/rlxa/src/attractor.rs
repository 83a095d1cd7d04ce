//! Absorbing-set estimation, lifting of parabolic states into the extended
//! phase space, long-time sample clouds, and Hausdorff semidistances.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::evolution::{
    parabolic_velocity, prepared_velocity, solve_trajectory, InitialData, ParState, Problem,
    SolveOptions,
};
use crate::mesh::Operators;
use crate::nonlin::NonlinearitySpec;
use crate::{Error, Real, Result};

/// Point of the extended phase space: displacement, boundary trace,
/// velocity, boundary velocity. The boundary fields are full nodal vectors
/// supported on the boundary nodes.
#[derive(Debug, Clone)]
pub struct ExtState<T> {
    pub u: DVector<T>,
    pub gamma: DVector<T>,
    pub v: DVector<T>,
    pub delta: DVector<T>,
}

impl<T: Real> ExtState<T> {
    /// ||u||_1^2 + ||gamma||^2_Gamma + eps ||v||^2 + eps ||delta||^2_Gamma.
    pub fn norm_sq(&self, ops: &Operators<T>, eps: T) -> T {
        ops.norm_h1_sq(&self.u)
            + ops.norm_gamma_sq(&self.gamma)
            + eps * ops.norm_l2_sq(&self.v)
            + eps * ops.norm_gamma_sq(&self.delta)
    }

    fn diff_norm_sq(&self, other: &Self, ops: &Operators<T>, eps: T) -> T {
        let d = Self {
            u: &self.u - &other.u,
            gamma: &self.gamma - &other.gamma,
            v: &self.v - &other.v,
            delta: &self.delta - &other.delta,
        };
        d.norm_sq(ops, eps)
    }
}

/// Restrict a field to its boundary values, zero elsewhere.
fn boundary_mask<T: Real>(ops: &Operators<T>, u: &DVector<T>) -> DVector<T> {
    let mut g = DVector::zeros(ops.n());
    for &b in &ops.mesh.boundary_nodes {
        g[b] = u[b];
    }
    g
}

/// Finite sample of long-time dynamics in the extended space.
#[derive(Debug, Clone)]
pub struct Cloud<T> {
    pub points: Vec<ExtState<T>>,
    /// eps of the generating problem; zero for parabolic (lifted) clouds.
    pub eps_label: T,
    pub sample_times: Vec<T>,
    pub seeds: Vec<u64>,
}

/// Random low-mode smooth state scaled to a given H_eps norm.
pub fn random_smooth_state<T: Real>(
    ops: &Operators<T>,
    eps: T,
    norm_level: T,
    rng: &mut impl Rng,
) -> (DVector<T>, DVector<T>) {
    let n = ops.n();
    let mut u = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    for k in 1..=4usize {
        let (au, bu, av, bv): (f64, f64, f64, f64) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        for i in 0..n {
            let x = ops.mesh.coords[i][0].to_f64();
            let y = ops.mesh.coords[i][1].to_f64();
            let ph = k as f64 * std::f64::consts::PI * (x + 0.5 * y);
            u[i] += T::of(au * ph.sin() + bu * ph.cos());
            v[i] += T::of(av * (ph + 0.3).sin() + bv * (ph + 0.7).cos());
        }
    }
    let norm = ops.norm_heps_sq(&u, &v, eps).sqrt();
    if norm > T::zero() {
        let s = norm_level / norm;
        u *= s;
        v *= s;
    }
    (u, v)
}

/// Estimated absorbing radius.
#[derive(Debug, Clone)]
pub struct AbsorbingEstimate<T> {
    /// Smallest squared-norm level containing every trajectory tail.
    pub p0_hat: T,
    /// Per-trajectory first time after which the curve stays inside.
    pub entry_times: Vec<T>,
    /// Initial norm level per trajectory.
    pub init_norms: Vec<T>,
    /// Full squared-norm curves (shared time grid).
    pub time_grid: Vec<T>,
    pub curves: Vec<Vec<T>>,
}

/// Run `n_seeds` random initial states per norm level in {1, 5, 10} and
/// measure the smallest level the squared H_eps norm settles under
/// (tail = last 20% of samples). Errors when some trajectory has not
/// settled by 0.8 T.
#[allow(clippy::too_many_arguments)]
pub fn absorbing_radius<T: Real + Send + Sync>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    eps: T,
    n_seeds: usize,
    t_end: T,
    dt: T,
    seed: u64,
) -> Result<AbsorbingEstimate<T>> {
    let levels = [T::one(), T::of(5.0), T::of(10.0)];
    let mut jobs = Vec::new();
    for (li, &level) in levels.iter().enumerate() {
        for s in 0..n_seeds {
            jobs.push((seed ^ ((li * n_seeds + s) as u64).wrapping_mul(0x9e3779b97f4a7c15), level));
        }
    }
    let results: Vec<Result<(Vec<T>, Vec<T>, T)>> = jobs
        .par_iter()
        .map(|&(s, level)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (u0, u1) = random_smooth_state(ops, eps, level, &mut rng);
            let rec = solve_trajectory(
                ops,
                spec,
                Problem::Hyperbolic { eps },
                InitialData::Hyperbolic { u0, u1 },
                &SolveOptions::new(t_end, dt),
            )?;
            let curve = rec.ledger.column("heps_sq").unwrap().to_vec();
            Ok((rec.ledger.t.clone(), curve, level))
        })
        .collect();
    let mut time_grid = Vec::new();
    let mut curves = Vec::new();
    let mut init_norms = Vec::new();
    for r in results {
        let (t, c, level) = r?;
        time_grid = t;
        init_norms.push(level);
        curves.push(c);
    }
    // Radius: worst tail value over all trajectories.
    let mut p0_hat = T::zero();
    for c in &curves {
        let tail_start = c.len() - (c.len() / 5).max(1);
        for &x in &c[tail_start..] {
            p0_hat = p0_hat.max(x);
        }
    }
    // Entry time: last exit from the band, slack 1% for flat tails.
    let band = p0_hat * (T::one() + T::of(0.01));
    let mut entry_times = Vec::with_capacity(curves.len());
    for c in &curves {
        let mut enter = 0usize;
        for (k, &x) in c.iter().enumerate() {
            if x > band {
                enter = k + 1;
            }
        }
        if enter >= c.len() {
            return Err(Error::InvalidInput(
                "trajectory still outside the candidate absorbing set at final time".into(),
            ));
        }
        entry_times.push(time_grid[enter]);
    }
    let t80 = time_grid[time_grid.len() - 1] * T::of(0.8);
    if entry_times.iter().any(|&t| t > t80) {
        return Err(Error::InvalidInput(
            "absorption not settled within 80% of the horizon; increase T".into(),
        ));
    }
    Ok(AbsorbingEstimate { p0_hat, entry_times, init_norms, time_grid, curves })
}

/// Lift of a parabolic state into the extended space:
/// (u, tr u) -> (u, tr u, lap_h u - f(u), -flux - tr u), with the time
/// derivative entering the elliptic recovery taken from the discrete
/// parabolic vector field.
pub fn lift<T: Real>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    zeta: &ParState<T>,
) -> Result<ExtState<T>> {
    let u = &zeta.u;
    let ut = parabolic_velocity(ops, spec, u)?;
    let lap = ops.discrete_laplacian(u, &ut);
    let v = DVector::from_fn(ops.n(), |i, _| lap[i] - spec.f(u[i]));
    let f_load = DVector::from_fn(ops.n(), |i, _| ops.lumped_mass[i] * spec.f(u[i]));
    let flux = ops.boundary_flux(u, &f_load);
    let gamma = boundary_mask(ops, u);
    let delta = -(flux + &gamma);
    Ok(ExtState { u: u.clone(), gamma, v, delta })
}

/// Sample the post-transient dynamics into a cloud: hyperbolic states are
/// extended by their traces, parabolic states go through the lift.
#[allow(clippy::too_many_arguments)]
pub fn omega_cloud<T: Real + Send + Sync>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    problem: Problem<T>,
    n_seeds: usize,
    t_transient: T,
    t_sample: T,
    stride: usize,
    dt: T,
    seed: u64,
    well_prepared: bool,
) -> Result<Cloud<T>> {
    if n_seeds == 0 {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    let seeds: Vec<u64> =
        (0..n_seeds).map(|s| seed ^ (s as u64).wrapping_mul(0x9e3779b97f4a7c15)).collect();
    let per_seed: Vec<Result<(Vec<ExtState<T>>, Vec<T>)>> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let eps_for_draw = match problem {
                Problem::Hyperbolic { eps } => eps,
                Problem::Parabolic => T::one(),
            };
            let (u0, u1) = random_smooth_state(ops, eps_for_draw, T::of(3.0), &mut rng);
            let t_end = t_transient + t_sample;
            let opts = SolveOptions { sample_stride: stride.max(1), ..SolveOptions::new(t_end, dt) };
            let init = match problem {
                Problem::Hyperbolic { .. } => {
                    let u1 = if well_prepared { prepared_velocity(ops, spec, &u0) } else { u1 };
                    InitialData::Hyperbolic { u0, u1 }
                }
                Problem::Parabolic => InitialData::Parabolic { u0, gamma0: None },
            };
            let rec = solve_trajectory(ops, spec, problem, init, &opts)?;
            let mut pts = Vec::new();
            let mut times = Vec::new();
            for k in 0..rec.times.len() {
                if rec.times[k] < t_transient {
                    continue;
                }
                let st = match problem {
                    Problem::Hyperbolic { .. } => ExtState {
                        u: rec.u[k].clone(),
                        gamma: boundary_mask(ops, &rec.u[k]),
                        v: rec.v[k].clone(),
                        delta: boundary_mask(ops, &rec.v[k]),
                    },
                    Problem::Parabolic => {
                        lift(ops, spec, &ParState { u: rec.u[k].clone(), t: rec.times[k] })?
                    }
                };
                pts.push(st);
                times.push(rec.times[k]);
            }
            Ok((pts, times))
        })
        .collect();
    let mut points = Vec::new();
    let mut sample_times = Vec::new();
    for r in per_seed {
        let (p, t) = r?;
        points.extend(p);
        sample_times.extend(t);
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("sampling window produced no cloud points".into()));
    }
    let eps_label = match problem {
        Problem::Hyperbolic { eps } => eps,
        Problem::Parabolic => T::zero(),
    };
    Ok(Cloud { points, eps_label, sample_times, seeds })
}

/// One-sided Hausdorff semidistance sup_a inf_b ||a - b|| in the extended
/// norm with unit velocity weights.
pub fn semidistance<T: Real + Send + Sync>(
    a: &Cloud<T>,
    b: &Cloud<T>,
    ops: &Operators<T>,
) -> Result<T> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(Error::InvalidInput("semidistance of an empty cloud".into()));
    }
    let sup = a
        .points
        .par_iter()
        .map(|p| {
            b.points
                .iter()
                .map(|q| p.diff_norm_sq(q, ops, T::one()))
                .fold(T::of(f64::INFINITY), |m, d| m.min(d))
        })
        .reduce(|| T::zero(), |x, y| x.max(y));
    Ok(sup.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow<T> {
    pub eps: T,
    pub distance: T,
    pub n_points_a: usize,
    pub n_points_b: usize,
}

/// Distances from hyperbolic clouds to the lifted parabolic cloud over an
/// eps grid, with well-prepared hyperbolic initial data.
#[allow(clippy::too_many_arguments)]
pub fn semicontinuity_sweep<T: Real + Send + Sync>(
    ops: &Operators<T>,
    spec: &NonlinearitySpec<T>,
    eps_grid: &[T],
    n_seeds: usize,
    t_transient: T,
    t_sample: T,
    stride: usize,
    dt: T,
    seed: u64,
) -> Result<Vec<SweepRow<T>>> {
    let parabolic = omega_cloud(
        ops,
        spec,
        Problem::Parabolic,
        n_seeds,
        t_transient,
        t_sample,
        stride,
        dt,
        seed,
        false,
    )?;
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let hyp = omega_cloud(
            ops,
            spec,
            Problem::Hyperbolic { eps },
            n_seeds,
            t_transient,
            t_sample,
            stride,
            dt,
            seed,
            true,
        )?;
        let distance = semidistance(&hyp, &parabolic, ops)?;
        rows.push(SweepRow {
            eps,
            distance,
            n_points_a: hyp.points.len(),
            n_points_b: parabolic.points.len(),
        });
    }
    Ok(rows)
}
