mod config;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectracube::cheb::{eval_cheb_3d, l2_norm_3d};
use spectracube::drivers::{presets, sample_points, solve_stationary, ProblemSpec, SolverOptions};
use spectracube::tensolve::Backend;
use spectracube::tensor3::format_e17;
use spectracube::Error;

use config::{ConfigFile, Problem, RunConfig, SolverTweaks};

const SEED_ENV: &str = "SPECTRACUBE_SEED";

pub const SOLVE_HEADER: &str = "n,backend,wall_seconds,sampled_max_error_or_residual,iterations,cp_error";
pub const EVOLVE_HEADER: &str = "step,time,l2_norm,sampled_max_error";
pub const EIG_HEADER: &str = "iteration,lambda";

#[derive(Parser)]
#[command(
    name = "spectracube",
    version,
    about = "Spectral solver for linear PDEs on the unit cube [-1,1]^3"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a stationary problem at one or more degrees.
    Solve(Common),
    /// Solve with both the reshape and recursive backends at each degree.
    Bench(Common),
    /// Solve over a list of degrees; same CSV as `solve`.
    Convergence(Common),
    /// Implicit Euler for the heat equation.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Time step.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// Inverse iteration for the smallest eigenvalue.
    Eig {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        iters: usize,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Named problem: poisson, helmholtz-const, helmholtz-gamma, diffusion-sep,
    /// diffusion-rank2, helmholtz-sqrt, helmholtz-mixed, heat, eig-potential,
    /// eig-laplacian.
    #[arg(long)]
    preset: Option<String>,
    /// Degree per mode, or a comma-separated list of degrees.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// reshape, recursive, gmres or auto.
    #[arg(long)]
    backend: Option<String>,
    /// Write the final coefficient tensor here.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for error sampling and CP initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sample points for the error estimate.
    #[arg(long)]
    samples: Option<usize>,
    /// Problem and solver settings file.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::Config(_) | Error::Syntax { .. } | Error::Eval { .. } | Error::Input(_) => Failure::Config(msg),
            _ => Failure::Solver(msg),
        }
    }
}

/// Resolved problem source plus settings shared by all subcommands.
struct Setup {
    problem: Problem,
    degrees: Vec<[usize; 3]>,
    backend: Option<Backend>,
    seed: Option<u64>,
    samples: Option<usize>,
    tweaks: SolverTweaks,
}

fn parse_backend(s: &str) -> Result<Option<Backend>, Failure> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse::<Backend>()
        .map(Some)
        .map_err(|e| Failure::Config(e.to_string()))
}

fn setup(c: &Common, default_preset: &str) -> Result<Setup, Failure> {
    let file = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let rc = RunConfig::from_file(&ConfigFile::parse(&text)?)?;
            Some(rc)
        }
        None => None,
    };
    let (mut problem, file_degrees, mut backend, mut seed, mut samples, tweaks) = match file {
        Some(rc) => (Some(rc.problem), rc.degrees, rc.backend, rc.seed, rc.samples, rc.solver),
        None => (None, None, None, None, None, SolverTweaks::default()),
    };
    if let Some(p) = &c.preset {
        if matches!(problem, Some(Problem::Inline(_))) {
            return Err(Failure::Config(
                "--preset conflicts with the inline problem in --config".into(),
            ));
        }
        problem = Some(Problem::Preset(p.clone()));
    }
    let problem = problem.unwrap_or_else(|| Problem::Preset(default_preset.to_string()));
    let degrees = if !c.n.is_empty() {
        c.n.iter().map(|&n| [n; 3]).collect()
    } else if let Some(d) = file_degrees {
        vec![d]
    } else {
        vec![[10; 3]]
    };
    if degrees.iter().flatten().any(|&d| d == 0) {
        return Err(Failure::Config("degrees must be positive".into()));
    }
    if let Some(b) = &c.backend {
        backend = parse_backend(b)?;
    }
    if c.seed.is_some() {
        seed = c.seed;
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        seed = Some(
            v.trim()
                .parse()
                .map_err(|e| Failure::Config(format!("{SEED_ENV}={v:?}: {e}")))?,
        );
    }
    if c.samples.is_some() {
        samples = c.samples;
    }
    Ok(Setup {
        problem,
        degrees,
        backend,
        seed,
        samples,
        tweaks,
    })
}

impl Setup {
    fn apply(&self, s: &mut SolverOptions) {
        self.tweaks.apply(s);
        if let Some(seed) = self.seed {
            s.sample_seed = seed;
            s.disc.cp.seed = seed;
        }
        if let Some(n) = self.samples {
            s.samples = n;
        }
        if self.backend.is_some() {
            s.backend = self.backend;
        }
    }

    fn stationary(&self, degrees: [usize; 3]) -> Result<ProblemSpec, Failure> {
        let mut p = match &self.problem {
            Problem::Preset(name) => presets::stationary_by_name(name, degrees[0])?,
            Problem::Inline(p) => (**p).clone(),
        };
        p.degrees = degrees;
        self.apply(&mut p.solver);
        Ok(p)
    }

    fn preset_name(&self) -> Result<&str, Failure> {
        match &self.problem {
            Problem::Preset(name) => Ok(name),
            Problem::Inline(_) => Err(Failure::Config("this subcommand only runs presets".into())),
        }
    }
}

fn degree_label(d: [usize; 3]) -> String {
    if d[0] == d[1] && d[1] == d[2] {
        d[0].to_string()
    } else {
        format!("{}x{}x{}", d[0], d[1], d[2])
    }
}

fn solve_row(out: &mut String, p: &ProblemSpec, forced: Option<Backend>) -> Result<spectracube::CoeffTensor3, Failure> {
    let mut p = p.clone();
    if forced.is_some() {
        p.solver.backend = forced;
    }
    let s = solve_stationary(&p)?;
    let err = s.sampled_error.unwrap_or(s.combined_residual);
    let cp = s.report.cp_error.map(format_e17).unwrap_or_default();
    writeln!(
        out,
        "{},{},{},{},{},{}",
        degree_label(p.degrees),
        s.report.backend,
        format_e17(s.wall_seconds),
        format_e17(err),
        s.report.iterations,
        cp
    )
    .expect("write to string");
    for w in &s.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(s.u)
}

fn emit(csv: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn dump(u: &spectracube::CoeffTensor3, path: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(path) = path {
        std::fs::write(path, u.to_text())
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::Solve(c) | Command::Convergence(c) => {
            let s = setup(&c, "poisson")?;
            let mut csv = format!("{SOLVE_HEADER}\n");
            let mut last = None;
            for &d in &s.degrees {
                last = Some(solve_row(&mut csv, &s.stationary(d)?, None)?);
            }
            emit(&csv, &c.out)?;
            dump(&last.expect("at least one degree"), &c.dump)
        }
        Command::Bench(c) => {
            let s = setup(&c, "poisson")?;
            let mut csv = format!("{SOLVE_HEADER}\n");
            let mut last = None;
            for &d in &s.degrees {
                let p = s.stationary(d)?;
                solve_row(&mut csv, &p, Some(Backend::Reshape))?;
                last = Some(solve_row(&mut csv, &p, Some(Backend::Recursive))?);
            }
            emit(&csv, &c.out)?;
            dump(&last.expect("at least one degree"), &c.dump)
        }
        Command::Evolve { common, h, steps } => {
            let s = setup(&common, "heat")?;
            if s.preset_name()? != "heat" {
                return Err(Failure::Config(format!(
                    "evolve supports the heat preset, got {:?}",
                    s.preset_name()?
                )));
            }
            let d = *s.degrees.last().expect("at least one degree");
            let mut hp = presets::heat(d[0], h, steps);
            hp.degrees = d;
            s.apply(&mut hp.solver);
            let us = hp.run()?;
            let pts = sample_points(hp.solver.sample_seed, hp.solver.samples);
            let mut csv = format!("{EVOLVE_HEADER}\n");
            for (k, u) in us.iter().enumerate() {
                let err = pts
                    .iter()
                    .map(|&[x, y, z]| (eval_cheb_3d(u, x, y, z) - hp.oracle(k, x, y, z)).abs())
                    .fold(0.0, f64::max);
                writeln!(
                    csv,
                    "{k},{},{},{}",
                    format_e17(k as f64 * h),
                    format_e17(l2_norm_3d(u)?),
                    format_e17(err)
                )
                .expect("write to string");
            }
            emit(&csv, &common.out)?;
            dump(us.last().expect("initial state"), &common.dump)
        }
        Command::Eig { common, iters } => {
            let s = setup(&common, "eig-potential")?;
            let d = *s.degrees.last().expect("at least one degree");
            let mut ep = match s.preset_name()? {
                "eig-potential" => presets::eig_potential(d[0], iters),
                "eig-laplacian" => presets::eig_laplacian(d[0], iters),
                other => {
                    return Err(Failure::Config(format!(
                        "eig supports eig-potential and eig-laplacian, got {other:?}"
                    )))
                }
            };
            ep.degrees = d;
            s.apply(&mut ep.solver);
            let r = ep.run()?;
            let mut csv = format!("{EIG_HEADER}\n");
            for (i, l) in r.history.iter().enumerate() {
                writeln!(csv, "{},{}", i + 1, format_e17(*l)).expect("write to string");
            }
            emit(&csv, &common.out)?;
            dump(&r.u, &common.dump)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(2)
        }
    }
}
