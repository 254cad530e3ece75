//! Run configuration: a TOML file whose tables mirror the command-line
//! flags. Every flag overrides the file value of the same name.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use glwedge_core::profile1d::{DEFAULT_H, THETA0};
use serde::{Deserialize, Serialize};

use crate::cache::CACHE_ENV;
use crate::exit::ValidationFailure;

/// Fills every `None` field of `$a` from `$b`.
macro_rules! overlay {
    ($a:expr, $b:expr; $($f:ident),+ $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )+
    };
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// Config file (TOML); flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Field ratio b.
    #[arg(long, global = true)]
    pub b: Option<f64>,
    /// Θ₀, used only for the regime warning.
    #[arg(long, global = true)]
    pub theta0: Option<f64>,
    /// Worker threads for parameter sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Cache directory for 1D results (overrides GLWEDGE_CACHE).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Grid spacing of the 1D profiles feeding strip and corner solves.
    #[arg(long, global = true)]
    pub profile_h: Option<f64>,
    /// Interval lengths used for the half-line limit.
    #[arg(long, global = true, value_delimiter = ',')]
    pub half_line_ells: Option<Vec<f64>>,
}

/// Resolved global settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Global {
    pub b: f64,
    pub theta0: f64,
    pub threads: usize,
    pub cache_dir: Option<PathBuf>,
    pub profile_h: f64,
    pub half_line_ells: Vec<f64>,
}

impl Global {
    /// `1 < b < 1/Θ₀`.
    pub fn in_surface_regime(&self) -> bool {
        self.b > 1.0 && self.b < 1.0 / self.theta0
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile1DArgs {
    /// Curvature.
    #[arg(long)]
    pub k: Option<f64>,
    /// Scale parameter ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Interval length ℓ.
    #[arg(long)]
    pub ell: Option<f64>,
    /// Grid points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Constant c in the safety factor d_ℓ = c ℓ⁻⁴.
    #[arg(long)]
    pub d_ell_constant: Option<f64>,
    /// CSV output `t,f,F,K`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON (default: the CSV path with a `.json` extension).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripArgs {
    /// Strip length.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Strip depth ℓ.
    #[arg(long)]
    pub ell: Option<f64>,
    /// dirichlet, neumann or dirichlet-phase.
    #[arg(long)]
    pub variant: Option<String>,
    /// Coefficients of κ(t) = Σ c_k t^k for dirichlet-phase.
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<f64>>,
    /// Mesh spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Gradient-norm tolerance of the minimizer.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also solve on the refined mesh and extrapolate.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refine: Option<bool>,
    /// Result JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Field CSV (default: `<out stem>_field.csv`).
    #[arg(long)]
    pub field: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleArgs {
    /// Depths ℓ of the extrapolation schedule.
    #[arg(long, value_delimiter = ',')]
    pub ells: Option<Vec<f64>>,
    /// c in L = max(c ℓ^a, ℓ / tan(β/2) + 2).
    #[arg(long)]
    pub l_factor: Option<f64>,
    /// a in L = max(c ℓ^a, ℓ / tan(β/2) + 2).
    #[arg(long)]
    pub l_exponent: Option<f64>,
    /// Coarse mesh spacing (the ladder adds h/2).
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerArgs {
    /// Opening angle β in radians.
    #[arg(long)]
    pub beta: Option<f64>,
    /// `default` (extrapolation schedule) or `single` (one ladder at --L, --ell).
    #[arg(long)]
    pub schedule: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: ScheduleArgs,
    /// Arm length for `--schedule single`.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Depth for `--schedule single`.
    #[arg(long)]
    pub ell: Option<f64>,
    /// dirichlet or neumann.
    #[arg(long)]
    pub variant: Option<String>,
    /// Phase sign of the boundary data: strip or literal.
    #[arg(long)]
    pub convention: Option<String>,
    /// Result JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConjectureArgs {
    /// Opening angles in radians.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: ScheduleArgs,
    /// CSV `beta,e_corner,conjecture,abs_dev,rel_dev`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleArgs {
    /// Domain JSON `{arcs: [...], corners: [...]}`.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Built-in domain instead of a file: square, disk or half-disk.
    #[arg(long)]
    pub shape: Option<String>,
    /// Side length or radius of the built-in domain.
    #[arg(long)]
    pub size: Option<f64>,
    /// Scale parameter ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Corner energies: conjecture or computed.
    #[arg(long)]
    pub corners: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: ScheduleArgs,
    /// Report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub global: GlobalArgs,
    pub profile1d: Profile1DArgs,
    pub strip: StripArgs,
    pub corner: CornerArgs,
    pub conjecture: ConjectureArgs,
    pub assemble: AssembleArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| ValidationFailure(format!("config {}: {e}", path.display())))
            .map_err(Into::into)
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ValidationFailure(format!("{name} = {v} must be positive")).into())
    }
}

impl GlobalArgs {
    /// Flags over `GLWEDGE_CACHE` over the file for the cache directory;
    /// flags over the file for everything else.
    pub fn resolve(&self, file: &GlobalArgs) -> Result<Global> {
        let env_cache = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let cache_dir = self.cache_dir.clone().or(env_cache).or_else(|| file.cache_dir.clone());
        let mut a = self.clone();
        overlay!(a, file; b, theta0, threads, profile_h, half_line_ells);
        let theta0 = a.theta0.unwrap_or(THETA0);
        if !(theta0 > 0.0 && theta0 < 1.0) {
            return Err(ValidationFailure(format!("theta0 = {theta0} must lie in (0, 1)")).into());
        }
        let threads = a.threads.unwrap_or(1);
        if threads == 0 {
            return Err(ValidationFailure("threads must be at least 1".into()).into());
        }
        let half_line_ells = a.half_line_ells.unwrap_or_else(|| vec![8.0, 10.0, 12.0, 15.0]);
        if half_line_ells.len() < 3 || half_line_ells.windows(2).any(|w| w[1] <= w[0]) || half_line_ells[0] < 6.0 {
            return Err(ValidationFailure(
                "half_line_ells needs at least 3 strictly increasing lengths starting at 6 or more".into(),
            )
            .into());
        }
        Ok(Global {
            b: positive("b", a.b.unwrap_or(1.5))?,
            theta0,
            threads,
            cache_dir,
            profile_h: positive("profile_h", a.profile_h.unwrap_or(DEFAULT_H))?,
            half_line_ells,
        })
    }
}

impl Profile1DArgs {
    pub fn overlay(mut self, file: &Self) -> Self {
        overlay!(self, file; k, eps, ell, n, d_ell_constant, out, summary);
        self
    }
}

impl StripArgs {
    pub fn overlay(mut self, file: &Self) -> Self {
        overlay!(self, file; l, ell, variant, kappa, h, tol, refine, out, field);
        self
    }
}

impl ScheduleArgs {
    pub fn overlay(mut self, file: &Self) -> Self {
        overlay!(self, file; ells, l_factor, l_exponent, h);
        self
    }

    /// Schedule with defaults for unset fields.
    pub fn schedule(&self) -> Result<glwedge_core::corner::Schedule> {
        let d = glwedge_core::corner::Schedule::default();
        let s = glwedge_core::corner::Schedule {
            ells: self.ells.clone().unwrap_or(d.ells),
            l_factor: positive("l_factor", self.l_factor.unwrap_or(d.l_factor))?,
            l_exponent: positive("l_exponent", self.l_exponent.unwrap_or(d.l_exponent))?,
            h: positive("h", self.h.unwrap_or(d.h))?,
        };
        if s.ells.is_empty() || s.ells.iter().any(|&e| !(e > 0.0)) {
            return Err(ValidationFailure("schedule depths must be positive and nonempty".into()).into());
        }
        Ok(s)
    }
}

impl CornerArgs {
    pub fn overlay(mut self, file: &Self) -> Self {
        overlay!(self, file; beta, schedule, l, ell, variant, convention, out);
        self.grid = self.grid.overlay(&file.grid);
        self
    }
}

impl ConjectureArgs {
    pub fn overlay(mut self, file: &Self) -> Self {
        overlay!(self, file; betas, out);
        self.grid = self.grid.overlay(&file.grid);
        self
    }
}

impl AssembleArgs {
    pub fn overlay(mut self, file: &Self) -> Self {
        overlay!(self, file; domain, shape, size, eps, corners, out);
        self.grid = self.grid.overlay(&file.grid);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_tables_parse() {
        let cfg: FileConfig = toml::from_str(
            r#"
            [global]
            b = 1.2
            threads = 2
            [strip]
            L = 6.0
            variant = "neumann"
            [corner]
            beta = 1.5707963267948966
            ells = [6.0, 8.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.global.b, Some(1.2));
        assert_eq!(cfg.strip.l, Some(6.0));
        assert_eq!(cfg.corner.grid.ells, Some(vec![6.0, 8.0]));
        assert!(toml::from_str::<FileConfig>("[global]\nbogus = 1\n").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = StripArgs { l: Some(6.0), ell: Some(12.0), ..Default::default() };
        let flags = StripArgs { l: Some(4.0), ..Default::default() };
        let m = flags.overlay(&file);
        assert_eq!((m.l, m.ell), (Some(4.0), Some(12.0)));
    }

    #[test]
    fn global_defaults_and_validation() {
        let g = GlobalArgs::default().resolve(&GlobalArgs::default()).unwrap();
        assert_eq!((g.b, g.threads), (1.5, 1));
        assert!(g.in_surface_regime());
        let bad = GlobalArgs { threads: Some(0), ..Default::default() };
        assert!(bad.resolve(&GlobalArgs::default()).is_err());
        let file = GlobalArgs { b: Some(1.2), ..Default::default() };
        assert_eq!(GlobalArgs::default().resolve(&file).unwrap().b, 1.2);
        let low = GlobalArgs { b: Some(0.5), ..Default::default() }.resolve(&file).unwrap();
        assert!(!low.in_surface_regime());
    }
}
