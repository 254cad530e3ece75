//! Finite-strip problems on `[0, L] x [0, ell]` with the potential
//! `A = -t e_s`: Dirichlet, modified Neumann and phase-shifted Dirichlet
//! energies, the reduced-energy splitting and order-parameter diagnostics.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldmin::{
    agmon_decay_profile, prolongate, BoundarySpec, BoundaryTag, ComplexField, Condition, CurrentTerm, DecayTable,
    Functional, Mesh2D, MinimizeOptions, MinimizeReport, PotentialField,
};
use crate::profile1d::{cost_tables_with, interp, optimize_alpha, Params1D, Profile1D, DEFAULT_H};

/// Profiles below this value are treated as zero when dividing by them.
const PROFILE_FLOOR: f64 = 1e-14;

/// Boundary conditions on the sides `s = 0` and `s = L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripVariant {
    /// `ψ = f₀(t)` at `s = 0` and `f₀(t) e^{-i α₀ L}` at `s = L`.
    Dirichlet,
    /// Free sides with the current term `-∫ F₀/f₀² j_t |_{s=0}^{s=L}`.
    NeumannModified,
    /// Dirichlet data multiplied by `e^{i κ(t)}`, with `κ(t) = Σ c_k t^k`.
    DirichletPhase(Vec<f64>),
}

impl StripVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Dirichlet => "dirichlet",
            Self::NeumannModified => "neumann",
            Self::DirichletPhase(_) => "dirichlet_phase",
        }
    }
}

fn polynomial(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

/// Tabulated side weight `w = F₀ / f₀²` and potential function `F₀` of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideWeight {
    pub h: f64,
    pub f_pot: Vec<f64>,
    /// `F₀ / f₀²`; NaN where `f₀` underflows.
    pub w: Vec<f64>,
}

impl SideWeight {
    pub fn from_profile(prof: &Profile1D) -> Self {
        let ct = cost_tables_with(prof, 0.0);
        let w = ct
            .f_pot
            .iter()
            .zip(&prof.values)
            .map(|(f, v)| if v * v > 0.0 { f / (v * v) } else { f64::NAN })
            .collect();
        Self { h: prof.params.h(), f_pot: ct.f_pot, w }
    }

    pub fn weight(&self, t: f64) -> f64 {
        interp(&self.w, self.h, t)
    }

    pub fn potential(&self, t: f64) -> f64 {
        interp(&self.f_pot, self.h, t)
    }

    /// Current term with depth `t = y`.
    pub fn current_term(&self) -> CurrentTerm {
        let me = self.clone();
        CurrentTerm { weight: Arc::new(move |t| me.weight(t)), depth: Arc::new(|p| p[1]) }
    }
}

/// A strip problem.
#[derive(Clone, Debug, Serialize)]
pub struct StripSpec {
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    pub b: f64,
    pub variant: StripVariant,
    pub h: f64,
    pub tol: f64,
    /// Interval profile `(f₀, α₀)` at this `(b, ell)`.
    #[serde(skip)]
    pub profile: Profile1D,
}

impl StripSpec {
    pub fn new(l: f64, ell: f64, variant: StripVariant, h: f64, profile: Profile1D) -> Result<Self> {
        if !(l > 0.0 && ell > 0.0 && h > 0.0) {
            return Err(Error::InvalidParameter(format!("L = {l}, ell = {ell}, h = {h} must be positive")));
        }
        let p = &profile.params;
        if p.k * p.eps != 0.0 {
            return Err(Error::InvalidParameter("strip profile must be flat (k eps = 0)".into()));
        }
        if (p.ell - ell).abs() > 1e-12 * ell {
            return Err(Error::InvalidParameter(format!("profile solved on ell = {}, strip has ell = {ell}", p.ell)));
        }
        if profile.degenerate {
            return Err(Error::InvalidParameter(format!("profile is trivial at b = {}", p.b)));
        }
        Ok(Self { l, ell, b: p.b, variant, h, tol: MinimizeOptions::default().tol, profile })
    }

    /// Solves the interval profile at spacing [`DEFAULT_H`] and builds the spec.
    pub fn with_profile(b: f64, l: f64, ell: f64, variant: StripVariant, h: f64) -> Result<Self> {
        let prof = optimize_alpha(&Params1D::with_spacing(b, 0.0, 0.0, ell, DEFAULT_H)?)?;
        Self::new(l, ell, variant, h, prof)
    }

    pub fn mesh(&self) -> Result<Mesh2D> {
        Mesh2D::rectangle(0.0, self.l, 0.0, self.ell, self.h)
    }

    fn kappa(&self, t: f64) -> f64 {
        match &self.variant {
            StripVariant::DirichletPhase(c) => polynomial(c, t),
            _ => 0.0,
        }
    }

    /// `f₀(t) e^{-i α₀ s}` (times `e^{i κ(t)}` for the phase variant).
    pub fn reference(&self, p: [f64; 2]) -> Complex64 {
        let phase = -self.profile.alpha * p[0] + self.kappa(p[1]);
        Complex64::from_polar(self.profile.eval(p[1]), phase)
    }

    pub fn boundary_spec(&self) -> BoundarySpec {
        let me = self.clone();
        let data = Condition::Dirichlet(Arc::new(move |p| me.reference(p)));
        let bc = BoundarySpec::free().with(BoundaryTag::Inner, data.clone());
        match self.variant {
            StripVariant::NeumannModified => bc.with_current(SideWeight::from_profile(&self.profile).current_term()),
            _ => bc.with(BoundaryTag::SideMinus, data.clone()).with(BoundaryTag::SidePlus, data),
        }
    }

    pub fn functional(&self, mesh: &Mesh2D) -> Result<Functional> {
        Functional::new(mesh, &PotentialField::TangentialMinusT, self.b, &self.boundary_spec())
    }
}

/// A minimized strip field.
#[derive(Clone, Debug, Serialize)]
pub struct StripResult {
    pub spec: StripSpec,
    pub energy: f64,
    /// `energy / L`.
    pub e_per_length: f64,
    /// Interval ground-state energy `E¹ᴰ₀(ell)` of the profile.
    pub e1d: f64,
    pub report: MinimizeReport,
    #[serde(skip)]
    pub mesh: Mesh2D,
    #[serde(skip)]
    pub field: ComplexField,
}

/// Minimizes on the spec's mesh starting from the reference field.
pub fn solve_strip(spec: &StripSpec) -> Result<StripResult> {
    let mesh = spec.mesh()?;
    let init: ComplexField = mesh.nodes.iter().map(|&p| spec.reference(p)).collect();
    solve_strip_on(spec, mesh, &init)
}

/// Minimizes on a given mesh from a given initial field.
pub fn solve_strip_on(spec: &StripSpec, mesh: Mesh2D, initial: &[Complex64]) -> Result<StripResult> {
    let f = spec.functional(&mesh)?;
    let opts = MinimizeOptions { tol: spec.tol, ..MinimizeOptions::default() };
    let (field, energy, report) = f.minimize(initial, &opts)?;
    Ok(StripResult { report, ..StripResult::from_field(spec.clone(), mesh, field, energy) })
}

impl StripResult {
    /// Wraps a field that was not produced by the minimizer.
    pub fn from_field(spec: StripSpec, mesh: Mesh2D, field: ComplexField, energy: f64) -> Self {
        Self {
            energy,
            e_per_length: energy / spec.l,
            e1d: spec.profile.energy,
            report: MinimizeReport::default(),
            spec,
            mesh,
            field,
        }
    }
}

/// Solutions at spacing `h` and `h/2` and their Richardson extrapolation.
#[derive(Clone, Debug, Serialize)]
pub struct StripLadder {
    pub coarse: StripResult,
    pub fine: StripResult,
    pub energy: f64,
    pub e_per_length: f64,
}

/// Solves at `h`, then on the red-refined mesh warm-started by interpolation.
pub fn solve_strip_refined(spec: &StripSpec) -> Result<StripLadder> {
    let coarse = solve_strip(spec)?;
    let (mesh, parents) = coarse.mesh.refine_red();
    let init = prolongate(&coarse.field, &parents);
    let fine_spec = StripSpec { h: 0.5 * spec.h, ..spec.clone() };
    let fine = solve_strip_on(&fine_spec, mesh, &init)?;
    let energy = (4.0 * fine.energy - coarse.energy) / 3.0;
    Ok(StripLadder { e_per_length: energy / spec.l, energy, coarse, fine })
}

/// Reduced-energy splitting `E = L E¹ᴰ₀ + E₀[u]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSplit {
    /// `L E¹ᴰ₀(ell)`.
    pub l_e1d: f64,
    /// `E₀[u]`, or `Ẽ₀[u]` for the modified Neumann problem.
    pub e0: f64,
    /// Side current contribution included in `e0` (zero for Dirichlet data).
    pub boundary_term: f64,
    /// `E - L E¹ᴰ₀ - e0`.
    pub mismatch: f64,
    /// Nodes where `f₀ < 1e-14` (u undefined).
    pub excluded_nodes: usize,
    /// Cells skipped because a vertex was excluded.
    pub excluded_cells: usize,
}

/// `u = ψ / (f₀ e^{-i α₀ s})`, `None` where `f₀` is below the floor.
pub fn reduced_field(spec: &StripSpec, mesh: &Mesh2D, psi: &[Complex64]) -> Vec<Option<Complex64>> {
    mesh.nodes
        .iter()
        .zip(psi)
        .map(|(&p, z)| {
            let f = spec.profile.eval(p[1]);
            (f >= PROFILE_FLOOR).then(|| z / Complex64::from_polar(f, -spec.profile.alpha * p[0]))
        })
        .collect()
}

/// Discrete `E₀[u]` with P1 gradients and edge-midpoint quadrature.
fn reduced_energy(spec: &StripSpec, mesh: &Mesh2D, u: &[Option<Complex64>]) -> (f64, usize) {
    let (alpha, b) = (spec.profile.alpha, spec.b);
    let mut e = 0.0;
    let mut skipped = 0;
    for c in &mesh.cells {
        let (Some(u0), Some(u1), Some(u2)) = (u[c[0]], u[c[1]], u[c[2]]) else {
            skipped += 1;
            continue;
        };
        let uv = [u0, u1, u2];
        let p = [mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]]];
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut us = Complex64::new(0.0, 0.0);
        let mut ut = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            us += uv[k] * ((q[1] - r[1]) / two_a);
            ut += uv[k] * ((r[0] - q[0]) / two_a);
        }
        let grad2 = us.norm_sqr() + ut.norm_sqr();
        let w = 0.5 * two_a / 3.0;
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            let t = 0.5 * (p[i][1] + p[j][1]);
            let um = 0.5 * (uv[i] + uv[j]);
            let f2 = spec.profile.eval(t).powi(2);
            let js = (um.conj() * us).im;
            e += w * (f2 * (grad2 - 2.0 * (t + alpha) * js) + f2 * f2 / (2.0 * b) * (1.0 - um.norm_sqr()).powi(2));
        }
    }
    (e, skipped)
}

/// Splits the energy of a strip field into the 1D part and the reduced energy.
pub fn reduced_energy_split(res: &StripResult) -> ReducedSplit {
    let spec = &res.spec;
    let u = reduced_field(spec, &res.mesh, &res.field);
    let (mut e0, excluded_cells) = reduced_energy(spec, &res.mesh, &u);
    let mut boundary_term = 0.0;
    if spec.variant == StripVariant::NeumannModified {
        let sw = SideWeight::from_profile(&spec.profile);
        for e in &res.mesh.boundary {
            let sign = match e.tag {
                BoundaryTag::SidePlus => -1.0,
                BoundaryTag::SideMinus => 1.0,
                _ => continue,
            };
            let (a, c) = if res.mesh.nodes[e.a][1] <= res.mesh.nodes[e.b][1] { (e.a, e.b) } else { (e.b, e.a) };
            if let (Some(ua), Some(uc)) = (u[a], u[c]) {
                let t = 0.5 * (res.mesh.nodes[a][1] + res.mesh.nodes[c][1]);
                boundary_term += sign * sw.potential(t) * (ua.conj() * uc).im;
            }
        }
        e0 += boundary_term;
    }
    let l_e1d = spec.l * res.e1d;
    ReducedSplit {
        l_e1d,
        e0,
        boundary_term,
        mismatch: res.energy - l_e1d - e0,
        excluded_nodes: u.iter().filter(|x| x.is_none()).count(),
        excluded_cells,
    }
}

/// Order-parameter diagnostics of a strip field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDiagnostics {
    /// Window `[0, T]` of the pointwise estimate.
    pub t_window: f64,
    /// `‖∂_s |ψ|‖²` over the strip.
    pub ds_modulus_sq: f64,
    /// `‖(∇ - i t e_s) ψ‖²` over the strip.
    pub covariant_sq: f64,
    /// Value of `covariant_sq` for the reference field, `L ∫ (f₀'^2 + (t + α₀)^2 f₀^2)`.
    pub covariant_reference: f64,
    /// `covariant_sq - covariant_reference`.
    pub covariant_excess: f64,
    /// `∂_s ∫ |ψ|^2 dt` at `s = L` (one-sided difference).
    pub flux_derivative: f64,
    /// `sup_{[0,L]x[0,T]} ||ψ| - f₀|`.
    pub sup_deviation: f64,
}

/// Default diagnostics window `min(ell_bar, 3)`.
pub fn default_window(prof: &Profile1D) -> f64 {
    crate::profile1d::cost_tables(prof).ell_bar.min(3.0)
}

fn column_mass(mesh: &Mesh2D, psi: &[Complex64], x: f64) -> f64 {
    let tol = 1e-9 * (1.0 + x.abs());
    let mut col: Vec<(f64, f64)> =
        mesh.nodes.iter().zip(psi).filter(|(p, _)| (p[0] - x).abs() <= tol).map(|(p, z)| (p[1], z.norm_sqr())).collect();
    col.sort_by(|a, b| a.0.total_cmp(&b.0));
    col.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// Computes the diagnostics on `[0, L] x [0, T]`.
pub fn field_diagnostics(res: &StripResult, t_window: f64) -> Result<FieldDiagnostics> {
    let spec = &res.spec;
    let mesh = &res.mesh;
    if !(t_window > 0.0 && t_window <= spec.ell) {
        return Err(Error::InvalidParameter(format!("window T = {t_window} must lie in (0, ell]")));
    }
    let modulus: Vec<f64> = res.field.iter().map(|z| z.norm()).collect();
    let mut ds = 0.0;
    for c in &mesh.cells {
        let p = [mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]]];
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let g: f64 = (0..3).map(|k| modulus[c[k]] * (p[(k + 1) % 3][1] - p[(k + 2) % 3][1]) / two_a).sum();
        ds += 0.5 * two_a * g * g;
    }
    let covariant_sq = spec.functional(mesh)?.kinetic(&res.field);
    let prof = &spec.profile;
    let h1 = prof.params.h();
    let a = prof.alpha;
    let v = &prof.values;
    let mut per_len = 0.0;
    for i in 0..v.len() - 1 {
        per_len += (v[i + 1] - v[i]).powi(2) / h1;
    }
    for (i, f) in v.iter().enumerate() {
        let c = if i == 0 || i == v.len() - 1 { 0.5 * h1 } else { h1 };
        per_len += c * (prof.params.t(i) + a).powi(2) * f * f;
    }
    let covariant_reference = spec.l * per_len;
    let x_prev = mesh.nodes.iter().map(|p| p[0]).filter(|&x| x < spec.l * (1.0 - 1e-9)).fold(f64::NEG_INFINITY, f64::max);
    let flux_derivative = (column_mass(mesh, &res.field, spec.l) - column_mass(mesh, &res.field, x_prev)) / (spec.l - x_prev);
    let sup_deviation = mesh
        .nodes
        .iter()
        .zip(&modulus)
        .filter(|(p, _)| p[1] <= t_window + 1e-12)
        .map(|(p, m)| (m - prof.eval(p[1])).abs())
        .fold(0.0, f64::max);
    Ok(FieldDiagnostics {
        t_window,
        ds_modulus_sq: ds,
        covariant_sq,
        covariant_reference,
        covariant_excess: covariant_sq - covariant_reference,
        flux_derivative,
        sup_deviation,
    })
}

/// Sup-deviation on `[0, L] x [0, T]` of the Dirichlet minimizer for each `ell`.
pub fn deviation_trend(b: f64, l: f64, h: f64, t_window: f64, ells: &[f64]) -> Result<Vec<(f64, f64)>> {
    ells.iter()
        .map(|&ell| {
            let spec = StripSpec::with_profile(b, l, ell, StripVariant::Dirichlet, h)?;
            let res = solve_strip(&spec)?;
            Ok((ell, field_diagnostics(&res, t_window)?.sup_deviation))
        })
        .collect()
}

/// Exponential decay of `|ψ|` away from `t = 0`.
pub fn agmon_check(res: &StripResult) -> Result<DecayTable> {
    agmon_decay_profile(&res.field, &res.mesh)
}

/// Total phase increment of `ψ` along `t = 0`, in turns.
pub fn boundary_winding(res: &StripResult) -> f64 {
    let mut bottom: Vec<(f64, Complex64)> =
        res.mesh.nodes.iter().zip(&res.field).filter(|(p, _)| p[1] == 0.0).map(|(p, z)| (p[0], *z)).collect();
    bottom.sort_by(|a, b| a.0.total_cmp(&b.0));
    let turn: f64 = bottom.windows(2).map(|w| (w[1].1 * w[0].1.conj()).arg()).sum();
    turn / (2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variant: StripVariant) -> StripSpec {
        let prof = optimize_alpha(&Params1D::with_spacing(1.5, 0.0, 0.0, 6.0, 0.01).unwrap()).unwrap();
        StripSpec::new(2.0, 6.0, variant, 0.25, prof).unwrap()
    }

    #[test]
    fn reference_field_has_zero_reduced_energy() {
        let s = spec(StripVariant::Dirichlet);
        let mesh = s.mesh().unwrap();
        let psi: ComplexField = mesh.nodes.iter().map(|&p| s.reference(p)).collect();
        let u = reduced_field(&s, &mesh, &psi);
        let (e0, skipped) = reduced_energy(&s, &mesh, &u);
        assert_eq!(skipped, 0);
        assert!(e0.abs() < 1e-14, "{e0}");
    }

    #[test]
    fn reduced_energy_is_invariant_under_constant_phase() {
        let s = spec(StripVariant::Dirichlet);
        let mesh = s.mesh().unwrap();
        let psi: ComplexField =
            mesh.nodes.iter().map(|&p| s.reference(p) * Complex64::from_polar(1.0 + 0.1 * p[0] * p[1], p[1] * 0.3)).collect();
        let rot: ComplexField = psi.iter().map(|z| z * Complex64::from_polar(1.0, 0.7)).collect();
        let e1 = reduced_energy(&s, &mesh, &reduced_field(&s, &mesh, &psi)).0;
        let e2 = reduced_energy(&s, &mesh, &reduced_field(&s, &mesh, &rot)).0;
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_profile() {
        let prof = optimize_alpha(&Params1D::with_spacing(1.5, 0.0, 0.0, 6.0, 0.01).unwrap()).unwrap();
        assert!(StripSpec::new(2.0, 8.0, StripVariant::Dirichlet, 0.25, prof.clone()).is_err());
        assert!(StripSpec::new(-2.0, 6.0, StripVariant::Dirichlet, 0.25, prof).is_err());
    }

    #[test]
    fn polynomial_phase() {
        assert_eq!(polynomial(&[1.0, 2.0, 3.0], 2.0), 17.0);
        assert_eq!(polynomial(&[], 2.0), 0.0);
    }

    #[test]
    fn side_weight_vanishes_at_both_ends() {
        let s = spec(StripVariant::NeumannModified);
        let sw = SideWeight::from_profile(&s.profile);
        assert_eq!(sw.weight(0.0), 0.0);
        assert_eq!(sw.weight(6.0), 0.0);
        assert!(sw.w.iter().all(|w| w.is_finite() && *w <= 0.0));
    }
}
