//! Subcommand bodies: resolve parameters, call the solvers, write outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use glwedge_core::assembler::{conjecture_energies, expand_energy, CornerEnergy, CornerSource, DomainSpec, ExpansionReport};
use glwedge_core::corner::{
    build_wedge, conjecture_check, corner_energy_estimate, corner_row, CornerEstimate, CornerLadder, CornerRow,
    CornerVariant, PhaseConvention, Schedule, ScheduleEntry,
};
use glwedge_core::fieldmin::write_field_csv;
use glwedge_core::profile1d::{
    cost_tables_with, e_corr_closed, e_corr_integral, e_corr_moment, CostTables, HalfLineSummary, Params1D, Profile1D,
};
use glwedge_core::strip::{
    agmon_check, boundary_winding, default_window, field_diagnostics, reduced_energy_split, solve_strip,
    solve_strip_refined, FieldDiagnostics, ReducedSplit, StripResult, StripSpec, StripVariant,
};
use serde::Serialize;

use crate::cache::ProfileCache;
use crate::config::{positive, AssembleArgs, ConjectureArgs, CornerArgs, Global, Profile1DArgs, StripArgs};
use crate::exit::ValidationFailure;

/// Resolved globals, the 1D cache and the worker pool.
pub struct Context {
    pub global: Global,
    pub cache: ProfileCache,
}

impl Context {
    pub fn new(global: Global) -> Self {
        let cache = ProfileCache::new(global.cache_dir.clone(), global.profile_h);
        Self { global, cache }
    }

    /// Half-line limit at the configured `b`.
    pub fn half_line(&self) -> Result<HalfLineSummary> {
        Ok(self.cache.half_line(self.global.b, &self.global.half_line_ells, glwedge_core::profile1d::DEFAULT_H)?)
    }

    /// Interval profile for strip and corner problems at depth `ell`.
    pub fn interval_profile(&self, ell: f64) -> Result<Profile1D> {
        let mut p = Params1D::with_spacing(self.global.b, 0.0, 0.0, ell, self.global.profile_h)?;
        p.theta0 = self.global.theta0;
        Ok(self.cache.solve(&p)?)
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// `path` with its file stem extended by `suffix` and a new extension.
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
pub struct Profile1DSummary {
    pub b: f64,
    pub k: f64,
    pub eps: f64,
    pub ell: f64,
    pub n: usize,
    pub alpha: f64,
    pub energy: f64,
    pub residual: f64,
    pub stationarity: f64,
    pub e_corr_integral: f64,
    pub e_corr_closed: f64,
    pub e_corr_moment: f64,
    pub ell_bar: f64,
    pub t_m: f64,
    #[serde(rename = "K_min")]
    pub k_min: f64,
    pub d_ell: f64,
    pub degenerate: bool,
    pub surface_regime: bool,
}

/// Writes the `t,f,F,K` table.
pub fn write_profile_csv(path: &Path, prof: &Profile1D, ct: &CostTables) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["t", "f", "F", "K"])?;
    for i in 0..ct.t.len() {
        w.write_record([ct.t[i], prof.values[i], ct.f_pot[i], ct.k_cost[i]].map(sig17))?;
    }
    w.flush()?;
    Ok(())
}

pub fn profile1d(ctx: &Context, a: &Profile1DArgs) -> Result<Profile1DSummary> {
    let g = &ctx.global;
    let mut p = Params1D::new(g.b, a.k.unwrap_or(0.0), a.eps.unwrap_or(0.0), a.ell.unwrap_or(12.0), a.n.unwrap_or(2401))?;
    p.theta0 = g.theta0;
    let c = a.d_ell_constant.unwrap_or(1.0);
    if !(c >= 0.0) {
        bail!(ValidationFailure(format!("d_ell_constant = {c} must be nonnegative")));
    }
    let prof = ctx.cache.solve(&p)?;
    let d_ell = c * p.ell.powi(-4);
    let ct = cost_tables_with(&prof, d_ell);
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("profile.csv"));
    write_profile_csv(&out, &prof, &ct)?;
    let summary = Profile1DSummary {
        b: p.b,
        k: p.k,
        eps: p.eps,
        ell: p.ell,
        n: p.n,
        alpha: prof.alpha,
        energy: prof.energy,
        residual: prof.residual,
        stationarity: prof.stationarity,
        e_corr_integral: e_corr_integral(&prof),
        e_corr_closed: e_corr_closed(&prof),
        e_corr_moment: e_corr_moment(&prof),
        ell_bar: ct.ell_bar,
        t_m: ct.t_m,
        k_min: ct.k_min,
        d_ell,
        degenerate: prof.degenerate,
        surface_regime: g.in_surface_regime(),
    };
    write_json(&a.summary.clone().unwrap_or_else(|| out.with_extension("json")), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
pub struct StripLevel {
    pub result: StripResult,
    pub mesh_hash: String,
    pub nodes: usize,
    pub split: ReducedSplit,
    pub agmon_rate: Option<f64>,
    pub agmon_passed: bool,
    pub diagnostics: Option<FieldDiagnostics>,
    pub boundary_winding: f64,
}

#[derive(Serialize)]
pub struct StripOutput {
    pub variant: String,
    pub levels: Vec<StripLevel>,
    /// Richardson value over the two levels when refined.
    pub energy: f64,
    pub e_per_length: f64,
    pub e1d: f64,
}

fn strip_level(r: StripResult) -> Result<StripLevel> {
    let agmon = agmon_check(&r)?;
    let diagnostics = field_diagnostics(&r, default_window(&r.spec.profile)).ok();
    Ok(StripLevel {
        mesh_hash: r.mesh.hash(),
        nodes: r.mesh.nodes.len(),
        split: reduced_energy_split(&r),
        agmon_rate: agmon.rate,
        agmon_passed: agmon.passes(glwedge_core::corner::AGMON_THRESHOLD),
        diagnostics,
        boundary_winding: boundary_winding(&r),
        result: r,
    })
}

pub fn parse_strip_variant(name: &str, kappa: Option<&[f64]>) -> Result<StripVariant> {
    Ok(match name {
        "dirichlet" => StripVariant::Dirichlet,
        "neumann" => StripVariant::NeumannModified,
        "dirichlet-phase" => StripVariant::DirichletPhase(kappa.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0])),
        other => bail!(ValidationFailure(format!("unknown strip variant {other:?} (dirichlet, neumann, dirichlet-phase)"))),
    })
}

pub fn strip(ctx: &Context, a: &StripArgs) -> Result<StripOutput> {
    let ell = a.ell.unwrap_or(10.0);
    let variant = parse_strip_variant(a.variant.as_deref().unwrap_or("dirichlet"), a.kappa.as_deref())?;
    let prof = ctx.interval_profile(ell)?;
    let mut spec = StripSpec::new(a.l.unwrap_or(4.0), ell, variant, a.h.unwrap_or(0.125), prof)?;
    spec.tol = positive("tol", a.tol.unwrap_or(spec.tol))?;
    let (results, energy) = if a.refine.unwrap_or(false) {
        let lad = solve_strip_refined(&spec)?;
        (vec![lad.coarse, lad.fine], lad.energy)
    } else {
        let r = solve_strip(&spec)?;
        let e = r.energy;
        (vec![r], e)
    };
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("strip.json"));
    let finest = results.last().expect("at least one level");
    let field = a.field.clone().unwrap_or_else(|| sibling(&out, "_field", "csv"));
    create_parent(&field)?;
    write_field_csv(&field, &finest.mesh, &finest.field)?;
    let e1d = finest.e1d;
    let levels = results.into_iter().map(strip_level).collect::<Result<Vec<_>>>()?;
    let output =
        StripOutput { variant: spec.variant.name().into(), levels, energy, e_per_length: energy / spec.l, e1d };
    write_json(&out, &output)?;
    Ok(output)
}

fn parse_corner_variant(name: &str) -> Result<CornerVariant> {
    Ok(match name {
        "dirichlet" => CornerVariant::DirichletStar,
        "neumann" => CornerVariant::NeumannModified,
        other => bail!(ValidationFailure(format!("unknown corner variant {other:?} (dirichlet, neumann)"))),
    })
}

fn parse_convention(name: &str) -> Result<PhaseConvention> {
    Ok(match name {
        "strip" => PhaseConvention::Strip,
        "literal" => PhaseConvention::Literal,
        other => bail!(ValidationFailure(format!("unknown phase convention {other:?} (strip, literal)"))),
    })
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CornerOutput {
    Default { e_corr: f64, schedule: Schedule, estimate: CornerEstimate },
    Single { row: CornerRow, ladder: CornerLadder, mesh_hash: String, conjecture: f64, e_corr: f64 },
}

pub fn corner(ctx: &Context, a: &CornerArgs) -> Result<CornerOutput> {
    let Some(beta) = a.beta else { bail!(ValidationFailure("corner needs --beta".into())) };
    let variant = parse_corner_variant(a.variant.as_deref().unwrap_or("dirichlet"))?;
    let conv = parse_convention(a.convention.as_deref().unwrap_or("strip"))?;
    let schedule = a.grid.schedule()?;
    let e_corr = ctx.half_line()?.e_corr();
    let b = ctx.global.b;
    let output = match a.schedule.as_deref().unwrap_or("default") {
        "default" => {
            if conv != PhaseConvention::Strip {
                bail!(ValidationFailure("the extrapolation schedule uses the strip convention; use --schedule single".into()));
            }
            let entries = schedule.entries(beta);
            let estimate = corner_energy_estimate(beta, b, &entries, variant, ctx, Some(e_corr))?;
            CornerOutput::Default { e_corr, schedule, estimate }
        }
        "single" => {
            let (Some(l), Some(ell)) = (a.l, a.ell) else {
                bail!(ValidationFailure("--schedule single needs --L and --ell".into()))
            };
            let entry = ScheduleEntry { l, ell, h: schedule.h };
            build_wedge(beta, l, ell, schedule.h)?;
            let (row, ladder) = corner_row(beta, b, &entry, variant, conv, ctx)?;
            CornerOutput::Single {
                mesh_hash: ladder.coarse.mesh.hash(),
                conjecture: glwedge_core::corner::conjecture_value(beta, e_corr),
                e_corr,
                row,
                ladder,
            }
        }
        other => bail!(ValidationFailure(format!("unknown schedule {other:?} (default, single)"))),
    };
    write_json(&a.out.clone().unwrap_or_else(|| PathBuf::from("corner.json")), &output)?;
    Ok(output)
}

impl glwedge_core::corner::ProfileProvider for Context {
    fn profile(&self, b: f64, ell: f64) -> glwedge_core::Result<Profile1D> {
        let mut p = Params1D::with_spacing(b, 0.0, 0.0, ell, self.global.profile_h)?;
        p.theta0 = self.global.theta0;
        self.cache.solve(&p)
    }
}

/// Default angles of the conjecture table.
pub const DEFAULT_BETAS: [f64; 5] = [0.79, 1.57, 2.36, 2.94, 3.34];

pub fn conjecture(ctx: &Context, a: &ConjectureArgs) -> Result<glwedge_core::corner::ConjectureTable> {
    let betas = a.betas.clone().unwrap_or_else(|| DEFAULT_BETAS.to_vec());
    if betas.is_empty() {
        bail!(ValidationFailure("no angles given".into()));
    }
    let schedule = a.grid.schedule()?;
    let e_corr = ctx.half_line()?.e_corr();
    let table = conjecture_check(ctx.global.b, &betas, e_corr, &schedule, ctx)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("conjecture.csv"));
    create_parent(&out)?;
    table.write_csv(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
    write_json(&out.with_extension("json"), &table)?;
    Ok(table)
}

#[derive(Serialize)]
pub struct AssembleOutput {
    pub domain: DomainSpec,
    pub e1d_star: f64,
    pub e_corr: f64,
    pub report: ExpansionReport,
}

pub fn domain_from_args(a: &AssembleArgs) -> Result<DomainSpec> {
    match (&a.domain, a.shape.as_deref()) {
        (Some(_), Some(_)) => bail!(ValidationFailure("give either --domain or --shape, not both".into())),
        (Some(path), None) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(DomainSpec::from_json(&text)?)
        }
        (None, shape) => {
            let size = positive("size", a.size.unwrap_or(1.0))?;
            Ok(match shape.unwrap_or("square") {
                "square" => DomainSpec::square(size),
                "disk" => DomainSpec::disk(size),
                "half-disk" => DomainSpec::half_disk(size),
                other => bail!(ValidationFailure(format!("unknown shape {other:?} (square, disk, half-disk)"))),
            })
        }
    }
}

pub fn assemble(ctx: &Context, a: &AssembleArgs) -> Result<AssembleOutput> {
    let domain = domain_from_args(a)?;
    let eps = positive("eps", a.eps.unwrap_or(0.02))?;
    let summary = ctx.half_line()?;
    let e_corr = summary.e_corr();
    let corners = match a.corners.as_deref().unwrap_or("conjecture") {
        "conjecture" => conjecture_energies(&domain, e_corr),
        "computed" => {
            domain.validate()?;
            let schedule = a.grid.schedule()?;
            let mut distinct: Vec<f64> = Vec::new();
            for &beta in &domain.corners {
                if !distinct.iter().any(|d| (d - beta).abs() <= 1e-9) {
                    distinct.push(beta);
                }
            }
            distinct
                .iter()
                .map(|&beta| {
                    let est = corner_energy_estimate(
                        beta,
                        ctx.global.b,
                        &schedule.entries(beta),
                        CornerVariant::DirichletStar,
                        ctx,
                        Some(e_corr),
                    )?;
                    Ok(CornerEnergy { beta, value: est.e_corner, source: CornerSource::Computed })
                })
                .collect::<Result<Vec<_>>>()?
        }
        other => bail!(ValidationFailure(format!("unknown corner source {other:?} (conjecture, computed)"))),
    };
    let report = expand_energy(&domain, eps, &summary, &corners)?;
    let output = AssembleOutput { domain, e1d_star: summary.e1d_star, e_corr, report };
    write_json(&a.out.clone().unwrap_or_else(|| PathBuf::from("expansion.json")), &output)?;
    Ok(output)
}
