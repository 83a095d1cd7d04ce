use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rlxa::attractor::{random_smooth_state, semicontinuity_sweep};
use rlxa::config::Config;
use rlxa::decomposition::{fit_z_decay, measure_k_regularity, solve_split, VMode};
use rlxa::evolution::{prepared_velocity, solve_trajectory, InitialData, Problem, SolveOptions};
use rlxa::functionals::poincare_constant;
use rlxa::mesh::{assemble, build_mesh, Operators};
use rlxa::nonlin::NonlinearitySpec;
use rlxa::snapshot::Snapshot;
use rlxa::store::{
    fmt_float, ledger_snapshot, write_csv, write_ledger_csv, write_report_csv, write_report_text,
};
use rlxa::verify::{certify_run, CheckStatus, CheckTarget, EnvelopeForm};
use rlxa::{Error, Result};

#[derive(Parser)]
#[command(name = "rlxa", about = "Solver suite for a hyperbolic relaxation of a \
reaction-diffusion equation with dynamic boundary conditions", version)]
struct Cli {
    /// Experiment configuration file (key = value grammar).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `out` key in config, else current dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count for seed/eps parallel loops.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-march one trajectory and write its energy ledger.
    Solve,
    /// Compute the Poincare-type constant of the mesh.
    Eigen,
    /// Run the v/w trajectory splitting and fit the decay of the v-part.
    Split,
    /// Sweep eps and measure cloud semidistances to the parabolic limit.
    Limit,
    /// Certify ledger snapshots: energy balance and decay envelopes.
    Verify {
        /// Snapshot files produced by `solve`.
        paths: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RLXA_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Solve => cmd_solve(cli).map(|()| ExitCode::SUCCESS),
        Command::Eigen => cmd_eigen(cli).map(|()| ExitCode::SUCCESS),
        Command::Split => cmd_split(cli).map(|()| ExitCode::SUCCESS),
        Command::Limit => cmd_limit(cli).map(|()| ExitCode::SUCCESS),
        Command::Verify { paths } => cmd_verify(cli, paths),
    }
}

struct Setup {
    cfg: Config,
    ops: Operators<f64>,
    spec: NonlinearitySpec<f64>,
    out: PathBuf,
    seed: u64,
}

fn load(cli: &Cli) -> Result<Setup> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)?;
    let cfg = Config::parse(&text)?;
    if cfg.is_empty() {
        return Err(Error::InvalidInput(format!("config {} is empty", path.display())));
    }
    let domain = cfg.domain()?;
    let n = cfg.usize_or("n", 64)?;
    let mesh = build_mesh(domain, n)?;
    let ops = assemble(&mesh)?;
    let spec = cfg.nonlinearity()?;
    let out = match &cli.out {
        Some(p) => p.clone(),
        None => PathBuf::from(cfg.text_or("out", ".")?),
    };
    std::fs::create_dir_all(&out)?;
    let seed = cli.seed.unwrap_or(cfg.u64_or("seed", 0)?);
    Ok(Setup { cfg, ops, spec, out, seed })
}

fn solve_options(cfg: &Config) -> Result<SolveOptions<f64>> {
    let mut opts = SolveOptions::new(cfg.number("t_end")?, cfg.number_or("dt", 1e-2)?);
    opts.tol = cfg.number_or("tol", opts.tol)?;
    opts.sample_stride = cfg.usize_or("stride", 1)?;
    Ok(opts)
}

fn initial_state(setup: &Setup, eps: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let level = setup.cfg.number_or("init_norm", 1.0)?;
    Ok(random_smooth_state(&setup.ops, eps, level, &mut rng))
}

fn cmd_solve(cli: &Cli) -> Result<()> {
    let setup = load(cli)?;
    let opts = solve_options(&setup.cfg)?;
    let problem_kind = setup.cfg.text_or("problem", "hyperbolic")?;
    let (problem, init) = match problem_kind.as_str() {
        "hyperbolic" => {
            let eps = setup.cfg.number("eps")?;
            if !(eps > 0.0) {
                return Err(Error::InvalidInput("hyperbolic solve needs eps > 0".into()));
            }
            let (u0, u1) = initial_state(&setup, eps)?;
            let u1 = if setup.cfg.number_or("well_prepared", 0.0)? != 0.0 {
                prepared_velocity(&setup.ops, &setup.spec, &u0)
            } else {
                u1
            };
            (Problem::Hyperbolic { eps }, InitialData::Hyperbolic { u0, u1 })
        }
        "parabolic" => {
            let (u0, _) = initial_state(&setup, 1.0)?;
            (Problem::Parabolic, InitialData::Parabolic { u0, gamma0: None })
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "problem must be hyperbolic or parabolic, got `{other}`"
            )))
        }
    };
    let record = solve_trajectory(&setup.ops, &setup.spec, problem, init, &opts)?;
    let csv_path = setup.out.join("ledger.csv");
    write_ledger_csv(&csv_path, &record.ledger)?;
    let snap = ledger_snapshot(
        &record.ledger,
        setup.ops.mesh.dim as u64,
        setup.ops.n() as u64,
        setup.ops.mesh.boundary_nodes.len() as u64,
    )?;
    let snap_path = setup.out.join("ledger.rlxa");
    snap.write_file(&snap_path)?;
    println!(
        "solve: {} samples to t = {}, cumulative balance defect {}, wrote {} and {}",
        record.ledger.len(),
        fmt_float(*record.times.last().unwrap_or(&0.0)),
        fmt_float(record.cumulative_defect),
        csv_path.display(),
        snap_path.display()
    );
    Ok(())
}

fn cmd_eigen(cli: &Cli) -> Result<()> {
    let setup = load(cli)?;
    let (lambda, _) = poincare_constant(&setup.ops)?;
    println!(
        "eigen: lambda = {} (n_nodes = {}, h_max = {})",
        fmt_float(lambda),
        setup.ops.n(),
        fmt_float(setup.ops.mesh.h_max)
    );
    Ok(())
}

fn eps_grid(cfg: &Config) -> Result<Vec<f64>> {
    if cfg.get("eps_grid").is_some() {
        cfg.list("eps_grid")
    } else {
        Ok(vec![cfg.number("eps")?])
    }
}

fn cmd_split(cli: &Cli) -> Result<()> {
    let setup = load(cli)?;
    let t_end = setup.cfg.number("t_end")?;
    let dt = setup.cfg.number_or("dt", 1e-2)?;
    let tol = setup.cfg.number_or("tol", 1e-10)?;
    let mut rows = Vec::new();
    for eps in eps_grid(&setup.cfg)? {
        let (u0, u1) = initial_state(&setup, eps)?;
        let split = solve_split(
            &setup.ops,
            &setup.spec,
            eps,
            u0,
            u1,
            t_end,
            dt,
            tol,
            VMode::Direct,
        )?;
        let (omega, r2) = fit_z_decay(&split, t_end * 0.2).unwrap_or((f64::NAN, f64::NAN));
        let k_sup = measure_k_regularity(&split);
        println!(
            "split: eps = {:.3e}  recon defect {:.3e}  z-rate {:.4}  (r2 {:.3})  sup K-norm {:.4}",
            eps,
            split.max_recon_defect(),
            omega,
            r2,
            k_sup
        );
        rows.push(vec![eps, split.max_recon_defect(), omega, r2, k_sup]);
    }
    let path = setup.out.join("split.csv");
    write_csv(&path, &["eps", "recon_defect", "z_rate", "z_fit_r2", "k_sup"], &rows)?;
    println!("split: wrote {}", path.display());
    Ok(())
}

fn cmd_limit(cli: &Cli) -> Result<()> {
    let setup = load(cli)?;
    let grid = eps_grid(&setup.cfg)?;
    let rows = semicontinuity_sweep(
        &setup.ops,
        &setup.spec,
        &grid,
        setup.cfg.usize_or("n_seeds", 4)?,
        setup.cfg.number_or("t_transient", 5.0)?,
        setup.cfg.number_or("t_sample", 5.0)?,
        setup.cfg.usize_or("stride", 10)?,
        setup.cfg.number_or("dt", 1e-2)?,
        setup.seed,
    )?;
    let mut csv = Vec::new();
    for row in &rows {
        println!(
            "limit: eps = {:.3e}  dist to parabolic cloud = {:.6e}  ({} vs {} points)",
            row.eps, row.distance, row.n_points_a, row.n_points_b
        );
        csv.push(vec![row.eps, row.distance, row.n_points_a as f64, row.n_points_b as f64]);
    }
    let path = setup.out.join("sweep.csv");
    write_csv(&path, &["eps", "distance", "n_points", "n_points_limit"], &csv)?;
    println!("limit: wrote {}", path.display());
    Ok(())
}

/// Checks derivable from a ledger snapshot: exact energy balance and a
/// decay-plus-floor envelope on the squared phase-space norm.
fn ledger_checks(stem: &str, snap: &Snapshot) -> Result<Vec<(String, CheckTarget<f64>)>> {
    let need = |name: &str| {
        snap.column(name)
            .ok_or_else(|| Error::Snapshot(format!("missing ledger column `{name}`")))
    };
    let t = need("t")?;
    let energy = need("energy")?;
    let diss = need("diss_increment")?;
    let mut defect: f64 = 0.0;
    for k in 1..energy.len() {
        defect = defect.max((energy[k] - energy[k - 1] + diss[k]).abs());
    }
    let scale = energy.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
    let mut checks = vec![(
        format!("{stem}.energy-balance"),
        CheckTarget::Identity { defect, tol: 1e-8 * scale },
    )];
    if t.len() >= 10 {
        checks.push((
            format!("{stem}.norm-envelope"),
            CheckTarget::Envelope {
                t,
                y: need("heps_sq")?,
                form: EnvelopeForm::DecayPlusFloor,
                require_positive_rate: false,
            },
        ));
    }
    Ok(checks)
}

fn cmd_verify(cli: &Cli, paths: &[PathBuf]) -> Result<ExitCode> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("verify needs at least one snapshot path".into()));
    }
    let mut checks = Vec::new();
    for path in paths {
        let snap = Snapshot::read_file(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        checks.extend(ledger_checks(&stem, &snap)?);
    }
    let entries = certify_run(&checks)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    write_report_text(&out.join("report.txt"), &entries)?;
    write_report_csv(&out.join("report.csv"), &entries)?;
    let mut violated = false;
    for e in &entries {
        println!("verify: {} = {} ({})", e.name, e.status.as_str(), e.detail);
        violated |= e.status == CheckStatus::Violated;
    }
    println!("verify: wrote {}", out.join("report.txt").display());
    Ok(if violated { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}
