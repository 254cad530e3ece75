//! Command-line driver for the glwedge solvers.

pub mod cache;
pub mod commands;
pub mod config;
pub mod exit;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{AssembleArgs, ConjectureArgs, CornerArgs, FileConfig, GlobalArgs, Profile1DArgs, StripArgs};

#[derive(Parser, Debug)]
#[command(name = "glwedge", version, about = "Boundary, strip and wedge Ginzburg-Landau solvers")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Half-line profile, phase, energy and cost functions.
    #[command(allow_negative_numbers = true)]
    Profile1d(Profile1DArgs),
    /// Strip minimization with Dirichlet, Neumann or phase-shifted sides.
    #[command(allow_negative_numbers = true)]
    Strip(StripArgs),
    /// Corner energy of a wedge.
    #[command(allow_negative_numbers = true)]
    Corner(CornerArgs),
    /// Corner energies against -(π - β) E_corr over several angles.
    #[command(allow_negative_numbers = true)]
    Conjecture(ConjectureArgs),
    /// Three-term energy expansion of a piecewise-smooth domain.
    #[command(allow_negative_numbers = true)]
    Assemble(AssembleArgs),
    /// Acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SelftestArgs {
    /// Skip the wedge-structure and conjecture criteria.
    #[arg(long)]
    pub quick: bool,
    /// Output directory.
    #[arg(long, default_value = "selftest")]
    pub out: PathBuf,
}

fn stdout_line(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}");
    let _ = out.flush();
}

fn execute(cli: Cli) -> Result<i32> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let global = cli.global.resolve(&file.global)?;
    if !global.in_surface_regime() {
        eprintln!(
            "warning: b outside surface regime: b = {} is not in (1, 1/theta0 = {:.4})",
            global.b,
            1.0 / global.theta0
        );
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(global.threads).build().context("building thread pool")?;
    let ctx = Context::new(global);
    pool.install(|| -> Result<i32> {
        match cli.command {
            Command::Profile1d(a) => {
                let s = commands::profile1d(&ctx, &a.overlay(&file.profile1d))?;
                stdout_line(&format!("alpha = {:.12}  energy = {:.12e}  e_corr = {:.10}", s.alpha, s.energy, s.e_corr_integral));
            }
            Command::Strip(a) => {
                let s = commands::strip(&ctx, &a.overlay(&file.strip))?;
                stdout_line(&format!("{}: energy = {:.12e}  per length = {:.10}  E1D_0 = {:.10}", s.variant, s.energy, s.e_per_length, s.e1d));
            }
            Command::Corner(a) => {
                let out = commands::corner(&ctx, &a.overlay(&file.corner))?;
                let line = match &out {
                    commands::CornerOutput::Default { estimate, .. } => format!(
                        "beta = {:.6}: e_corner = {:.8e}  conjecture = {:.8e}  plateau = {}",
                        estimate.beta,
                        estimate.e_corner,
                        estimate.conjecture.unwrap_or(f64::NAN),
                        estimate.plateau
                    ),
                    commands::CornerOutput::Single { row, conjecture, .. } => {
                        format!("L = {}, ell = {}: e = {:.8e}  conjecture = {conjecture:.8e}", row.l, row.ell, row.e)
                    }
                };
                stdout_line(&line);
            }
            Command::Conjecture(a) => {
                let t = commands::conjecture(&ctx, &a.overlay(&file.conjecture))?;
                for r in &t.rows {
                    stdout_line(&format!("beta = {:.6}  e_corner = {:.8e}  conjecture = {:.8e}", r.beta, r.e_corner, r.conjecture));
                }
            }
            Command::Assemble(a) => {
                let o = commands::assemble(&ctx, &a.overlay(&file.assemble))?;
                let r = &o.report;
                stdout_line(&format!(
                    "leading = {:.10e}  curvature = {:.10e}  corners = {:.10e}  total = {:.10e}  smooth = {:.10e}",
                    r.leading, r.curvature_term, r.corner_term, r.total, r.smooth_equivalent
                ));
            }
            Command::Selftest(a) => {
                let report = selftest::run_suite(&ctx, a.quick, &a.out, &mut |c| {
                    stdout_line(&c.line());
                    for n in &c.notes {
                        stdout_line(&format!("criterion {} info: {n}", c.id));
                    }
                })?;
                if a.quick {
                    stdout_line("criterion 9 SKIP determinism (compare two --quick runs at --threads 1)");
                } else {
                    let r = selftest::criterion_9(&ctx.global, &a.out.join("determinism"))?;
                    stdout_line(&r.line());
                    if !r.ok() {
                        return Ok(exit::VALIDATION_FAILURE);
                    }
                }
                if !report.all_passed() {
                    return Ok(exit::VALIDATION_FAILURE);
                }
            }
        }
        Ok(exit::OK)
    })
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::exit_code(&e)
        }
    }
}
