//! `pimlab` batch driver.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use pimlab::circle::{fourier_coeffs, FourierDensity, GridDensity, NoiseSpec};
use pimlab::diagnostics::{compare_flow, summarize};
use pimlab::invariant::{gamma_from_noise, heat_kernel_family, limit_profile, pair_correlation_closed};
use pimlab::io::{self as pio, EventRecord, SnapshotRecord, VERSION};
use pimlab::kinetic::{bdg_evolve_checkpoints, cl_evolve_checkpoints};
use pimlab::models::{
    kac_initial_state, CircleState, EnsembleRun, ModelKind, ModelSpec, ReplicaRng, State,
    Trajectory,
};
use pimlab::oracle::{build_transition, marginal, stationary};
use pimlab::verify;

use config::{ExperimentConfig, NoiseFamily};

#[derive(Parser)]
#[command(name = "pimlab", version, about = "Pair-interaction master equations on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicas of the particle system; write snapshots and a summary.
    Simulate(Common),
    /// Solve the one-particle kinetic equation.
    Kinetic(Common),
    /// Invariant pair-correlation profile of the CL dynamics.
    Invariant(Common),
    /// Exact stationary density of the grid chain and its marginals.
    Oracle(Common),
    /// Run acceptance scenarios and write a JSON report.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "PIMLAB_THREADS")]
    threads: Option<usize>,
}

struct Ctx {
    out: PathBuf,
    provenance: String,
    sha: String,
}

impl Ctx {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns `false` when a verification report contains failures.
fn dispatch(cmd: Command) -> Result<bool> {
    let (common, run): (&Common, fn(&ExperimentConfig, &Ctx) -> Result<bool>) = match &cmd {
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Kinetic(c) => (c, cmd_kinetic),
        Command::Invariant(c) => (c, cmd_invariant),
        Command::Oracle(c) => (c, cmd_oracle),
        Command::Verify(c) => (c, cmd_verify),
    };
    let text = fs::read(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    let cfg = ExperimentConfig::parse(std::str::from_utf8(&text).context("config is not UTF-8")?)?;
    let threads = match common.threads {
        Some(0) => anyhow::bail!("--threads must be >= 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("starting the worker pool")?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    let sha = hex::encode(Sha256::digest(&text));
    let ctx = Ctx {
        out: common.out.clone(),
        provenance: pio::provenance_line(&sha),
        sha,
    };
    run(&cfg, &ctx)
}

fn initial_sampler_state(
    kind: ModelKind,
    n: usize,
    initial: &NoiseSpec,
) -> Result<impl Fn(&mut ReplicaRng) -> pimlab::Result<State> + Sync> {
    let sampler = initial.sampler()?;
    Ok(move |rng: &mut ReplicaRng| match kind {
        ModelKind::Kac => Ok(State::Kac(kac_initial_state(n, rng)?)),
        _ => Ok(State::Circle(CircleState::new(
            (0..n).map(|_| sampler.sample(rng)).collect(),
        )?)),
    })
}

fn kinetic_reference(
    p: &config::SimulateParams,
) -> Result<Option<Vec<FourierDensity>>> {
    Ok(match p.model {
        ModelKind::Cl => Some(cl_evolve_checkpoints(
            &p.initial.fourier(p.kinetic.cutoff),
            &p.noise,
            &p.checkpoints,
            &p.kinetic,
        )?),
        ModelKind::Bdg => {
            let f0 = p.initial.grid_density(p.m)?;
            let sols = bdg_evolve_checkpoints(&f0, &p.noise, &p.checkpoints, &p.kinetic)?;
            Some(
                sols.iter()
                    .map(|f| fourier_coeffs(f, p.k))
                    .collect::<pimlab::Result<_>>()?,
            )
        }
        ModelKind::Kac => None,
    })
}

fn write_streams(ctx: &Ctx, trajs: &[Trajectory], log_cap: usize) -> Result<()> {
    let width = trajs.len().to_string().len().max(4);
    for (r, tr) in trajs.iter().enumerate() {
        let snaps = tr.snapshots.iter().map(|s| SnapshotRecord {
            replica: r,
            t: s.t,
            state: s.state.clone(),
        });
        pio::write_jsonl(ctx.create(&format!("snapshots_{r:0width$}.jsonl"))?, &ctx.provenance, snaps)?;
        if log_cap > 0 {
            let events = tr.events.iter().map(|e| EventRecord {
                replica: r,
                event: *e,
            });
            pio::write_jsonl(ctx.create(&format!("events_{r:0width$}.jsonl"))?, &ctx.provenance, events)?;
        }
    }
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<bool> {
    let p = cfg.simulate()?;
    let model = ModelSpec {
        kind: p.model,
        noise: p.noise.clone(),
    };
    let run = EnsembleRun {
        model: &model,
        replicas: p.replicas,
        seed: p.seed,
        t_end: p.t_end,
        checkpoints: &p.checkpoints,
        log_cap: p.log_cap,
    };
    let trajs = run.run(initial_sampler_state(p.model, p.n, &p.initial)?)?;
    write_streams(ctx, &trajs, p.log_cap)?;
    if p.model == ModelKind::Kac {
        let mut w = pio::CsvWriter::new(ctx.create("energy.csv")?, &ctx.provenance, &["replica", "t", "energy"])?;
        for (r, tr) in trajs.iter().enumerate() {
            for s in &tr.snapshots {
                let e = s.state.as_kac().map_or(f64::NAN, |k| k.energy());
                w.row(&[r.into(), s.t.into(), e.into()])?;
            }
        }
        w.finish()?;
        return Ok(true);
    }
    let summary = summarize(&trajs, p.k)?;
    // the z column is left empty when the kinetic solver cannot resolve the data
    let reference = kinetic_reference(&p).unwrap_or_else(|e| {
        eprintln!("warning: no kinetic reference: {e:#}");
        None
    });
    let z = match &reference {
        Some(sol) if p.replicas >= 2 => Some(compare_flow(&summary, sol, p.k)?),
        _ => None,
    };
    pio::write_summary_csv(ctx.create("summary.csv")?, &ctx.provenance, &summary, z.as_deref())?;
    Ok(true)
}

fn cmd_kinetic(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<bool> {
    let p = cfg.kinetic()?;
    match p.model {
        ModelKind::Cl => {
            let f0 = p.initial.fourier(p.cfg.cutoff);
            let sols = cl_evolve_checkpoints(&f0, &p.noise, &p.times, &p.cfg)?;
            pio::write_fourier_solution_csv(ctx.create("solution.csv")?, &ctx.provenance, &p.times, &sols)?;
        }
        _ => {
            let f0: GridDensity = p.initial.grid_density(p.cfg.grid)?;
            let sols = bdg_evolve_checkpoints(&f0, &p.noise, &p.times, &p.cfg)?;
            pio::write_grid_solution_csv(ctx.create("solution.csv")?, &ctx.provenance, &p.times, &sols)?;
            let coeffs: Vec<FourierDensity> = sols
                .iter()
                .map(|f| fourier_coeffs(f, p.cfg.cutoff))
                .collect::<pimlab::Result<_>>()?;
            pio::write_fourier_solution_csv(
                ctx.create("solution_fourier.csv")?,
                &ctx.provenance,
                &p.times,
                &coeffs,
            )?;
        }
    }
    Ok(true)
}

fn cmd_invariant(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<bool> {
    let p = cfg.invariant()?;
    let noise = match p.family {
        NoiseFamily::Fixed => p.noise.clone(),
        NoiseFamily::HeatKernel => heat_kernel_family(p.n)?,
    };
    let finite = pair_correlation_closed(&noise, p.n, p.k)?;
    let gamma = gamma_from_noise(|_| Ok(noise.clone()), p.n, p.k)?;
    let limit = limit_profile(&gamma)?;
    pio::write_correlation_csv(ctx.create("correlation.csv")?, &ctx.provenance, &finite, &limit, &gamma)?;
    Ok(true)
}

fn cmd_oracle(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<bool> {
    let p = cfg.oracle()?;
    let model = ModelSpec {
        kind: p.model,
        noise: p.noise.clone(),
    };
    let tm = build_transition(&model, p.n, p.m, p.state_cap)?;
    let st = stationary(&tm, p.tol, p.max_iter)?;
    pio::write_joint_csv(ctx.create("stationary.csv")?, &ctx.provenance, &st.density)?;
    for coords in &p.marginals {
        let marg = marginal(&st.density, coords)?;
        let tag: Vec<String> = coords.iter().map(usize::to_string).collect();
        pio::write_marginal_csv(
            ctx.create(&format!("marginal_{}.csv", tag.join("_")))?,
            &ctx.provenance,
            &marg,
        )?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct VerifyReport {
    config_sha256: String,
    version: &'static str,
    passed: bool,
    scenarios: Vec<verify::ScenarioReport>,
}

fn cmd_verify(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<bool> {
    let p = cfg.verify()?;
    let scenarios = p
        .scenarios
        .iter()
        .map(|&sc| verify::run(sc, p.seed))
        .collect::<pimlab::Result<Vec<_>>>()?;
    let report = VerifyReport {
        config_sha256: ctx.sha.clone(),
        version: VERSION,
        passed: scenarios.iter().all(|s| s.passed),
        scenarios,
    };
    for s in &report.scenarios {
        eprintln!("{} {}  {}", s.scenario, if s.passed { "PASS" } else { "FAIL" }, s.title);
    }
    let path: &Path = &ctx.out.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(report.passed)
}
