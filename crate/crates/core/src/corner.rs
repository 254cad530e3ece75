//! Wedge domains `Γ_β(L, ell)`: geometry, the `ψ⋆` boundary data, the
//! tangential gauge, Dirichlet and modified-Neumann corner energies, their
//! extrapolation in `(L, ell, h)` and the comparison with `-(π - β) E_corr`.
//!
//! The vertex `V` sits at the origin and the bisector is the positive
//! `y`-axis. The plus arm runs from `V` to `B` at angle `π/2 - β/2`, the
//! minus arm from `A` to `V`; each arm has a frame `r = s u + t n` with
//! `n` the inward normal, `s ∈ [0, L]` on the plus arm and `s ∈ [-L, 0]` on
//! the minus arm.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldmin::{
    agmon_decay_profile, prolongate, triangulate_polygon, BoundarySpec, BoundaryTag, ComplexField, Condition,
    CurrentTerm, DataFn, Functional, Mesh2D, MinimizeOptions, MinimizeReport, PotentialField, TaggedPolygon,
};
use crate::profile1d::{optimize_alpha, Params1D, Profile1D, DEFAULT_H};
use crate::strip::SideWeight;

/// Minimum angle of wedge meshes, in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;
/// Tolerance on `|Γ| / (2π |∂Γ|)` being an integer.
pub const INTEGER_TOL: f64 = 1e-9;
/// Two consecutive schedule rows closer than this form a plateau.
pub const PLATEAU_TOL: f64 = 5e-3;

const FLAT_TOL: f64 = 1e-12;

fn is_flat(beta: f64) -> bool {
    (beta - PI).abs() < FLAT_TOL
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// One of the two arms of the wedge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Minus,
    Plus,
}

/// The wedge `Γ_β(L, ell) = {dist(r, ∂Γ_out) <= ell}` on the inner side of
/// the outer boundary `AVB`.
///
/// For `β <= π` the inner boundary is `C D E` with `D` on the bisector; for
/// `β > π` it is the circular arc of radius `ell` around `V` joining the two
/// inner lines, discretized by chords of length close to `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeGeometry {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    /// Counterclockwise boundary polygon starting at `A`.
    pub polygon: Vec<[f64; 2]>,
    /// Tag of polygon segment `k` (vertex `k` to vertex `k + 1`).
    pub tags: Vec<BoundaryTag>,
}

impl WedgeGeometry {
    /// Validates `β ∈ (0, 2π)`, positive lengths and, for `β < π`,
    /// `ell <= tan(β/2) L`.
    pub fn new(beta: f64, l: f64, ell: f64, h: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 2.0 * PI) {
            return Err(Error::Geometry(format!("opening angle {beta} outside (0, 2π)")));
        }
        if !(l > 0.0 && ell > 0.0 && h > 0.0) {
            return Err(Error::Geometry(format!("L = {l}, ell = {ell}, h = {h} must be positive")));
        }
        if beta < PI && !is_flat(beta) && ell > (0.5 * beta).tan() * l * (1.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "ell = {ell} exceeds tan(β/2) L = {} for β = {beta}",
                (0.5 * beta).tan() * l
            )));
        }
        let mut g = Self { beta, l, ell, polygon: Vec::new(), tags: Vec::new() };
        let (a, b, c, e) = (g.point_a(), g.point_b(), g.point_c(), g.point_e());
        let mut poly = vec![a, [0.0, 0.0], b, e];
        let mut tags = vec![BoundaryTag::Outer, BoundaryTag::Outer, BoundaryTag::SidePlus];
        if beta <= PI || is_flat(beta) {
            poly.push(g.point_d());
            tags.push(BoundaryTag::Inner);
        } else {
            let (th0, th1) = (0.5 * PI - 0.5 * beta + 0.5 * PI, 0.5 * PI + 0.5 * beta - 0.5 * PI);
            let m = ((ell * (th1 - th0)) / h).ceil().max(1.0) as usize;
            for k in 0..=m {
                let th = th0 + (th1 - th0) * k as f64 / m as f64;
                poly.push([ell * th.cos(), ell * th.sin()]);
                tags.push(BoundaryTag::Inner);
            }
        }
        poly.push(c);
        tags.extend([BoundaryTag::Inner, BoundaryTag::SideMinus]);
        debug_assert_eq!(poly.len(), tags.len());
        g.polygon = poly;
        g.tags = tags;
        Ok(g)
    }

    /// Unit tangent `e_s` of an arm (direction of increasing `s`).
    pub fn tangent(&self, arm: Arm) -> [f64; 2] {
        let (sn, cs) = (0.5 * self.beta).sin_cos();
        match arm {
            Arm::Plus => [sn, cs],
            Arm::Minus => [sn, -cs],
        }
    }

    /// Inward unit normal `e_t` of an arm.
    pub fn normal(&self, arm: Arm) -> [f64; 2] {
        let u = self.tangent(arm);
        [-u[1], u[0]]
    }

    pub fn point_a(&self) -> [f64; 2] {
        let u = self.tangent(Arm::Minus);
        [-self.l * u[0], -self.l * u[1]]
    }

    pub fn point_b(&self) -> [f64; 2] {
        let u = self.tangent(Arm::Plus);
        [self.l * u[0], self.l * u[1]]
    }

    pub fn point_c(&self) -> [f64; 2] {
        let (a, n) = (self.point_a(), self.normal(Arm::Minus));
        [a[0] + self.ell * n[0], a[1] + self.ell * n[1]]
    }

    pub fn point_e(&self) -> [f64; 2] {
        let (b, n) = (self.point_b(), self.normal(Arm::Plus));
        [b[0] + self.ell * n[0], b[1] + self.ell * n[1]]
    }

    /// Intersection of the two inner lines, on the bisector.
    pub fn point_d(&self) -> [f64; 2] {
        [0.0, self.ell / (0.5 * self.beta).sin()]
    }

    /// The arm whose half of the wedge contains `p` (plus for `x >= 0`).
    pub fn arm_of(&self, p: [f64; 2]) -> Arm {
        if p[0] >= 0.0 {
            Arm::Plus
        } else {
            Arm::Minus
        }
    }

    /// Linear frame coordinates `(s, t) = (p·e_s, p·e_t)` of an arm.
    pub fn linear(&self, arm: Arm, p: [f64; 2]) -> (f64, f64) {
        (dot(p, self.tangent(arm)), dot(p, self.normal(arm)))
    }

    /// Tubular coordinates: the arm frame of the half containing `p`, or
    /// `(0, |p|)` where the nearest boundary point is the vertex (`β > π`).
    pub fn tubular(&self, p: [f64; 2]) -> (Arm, f64, f64) {
        let arm = self.arm_of(p);
        let (s, t) = self.linear(arm, p);
        let behind = match arm {
            Arm::Plus => s < 0.0,
            Arm::Minus => s > 0.0,
        };
        if behind && self.beta > PI && !is_flat(self.beta) {
            (arm, 0.0, p[0].hypot(p[1]))
        } else {
            (arm, s, t)
        }
    }

    /// Polar angle measured from the plus arm, in `[β/2 - π, β/2 + π)`.
    pub fn angle(&self, p: [f64; 2]) -> f64 {
        let (s, t) = self.linear(Arm::Plus, p);
        let th = t.atan2(s);
        if th < 0.5 * self.beta - PI {
            th + 2.0 * PI
        } else {
            th
        }
    }

    /// Closed-form area of the exact domain.
    pub fn area(&self) -> f64 {
        let (l, ell, beta) = (self.l, self.ell, self.beta);
        if beta <= PI || is_flat(beta) {
            2.0 * l * ell - ell * ell / (0.5 * beta).tan()
        } else {
            2.0 * l * ell + 0.5 * (beta - PI) * ell * ell
        }
    }

    /// Closed-form perimeter `|∂Γ|` of the exact domain.
    pub fn perimeter(&self) -> f64 {
        let (l, ell, beta) = (self.l, self.ell, self.beta);
        if beta <= PI || is_flat(beta) {
            4.0 * l + 2.0 * ell - 2.0 * ell / (0.5 * beta).tan()
        } else {
            4.0 * l + 2.0 * ell + (beta - PI) * ell
        }
    }

    /// Shoelace area of the boundary polygon.
    pub fn polygon_area(&self) -> f64 {
        let n = self.polygon.len();
        0.5 * (0..n)
            .map(|k| {
                let (p, q) = (self.polygon[k], self.polygon[(k + 1) % n]);
                p[0] * q[1] - p[1] * q[0]
            })
            .sum::<f64>()
    }

    /// `|Γ| / (2π |∂Γ|)`.
    pub fn integer_ratio(&self) -> f64 {
        self.area() / (2.0 * PI * self.perimeter())
    }

    /// Whether the ratio is an integer to [`INTEGER_TOL`].
    pub fn integer_condition(&self) -> bool {
        let r = self.integer_ratio();
        (r - r.round()).abs() <= INTEGER_TOL
    }
}

fn lattice_seeds(poly: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let dy = 0.5 * 3f64.sqrt() * h;
    let ny = ((hi[1] - lo[1]) / dy).ceil() as usize;
    let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 1;
    let mut seeds = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let off = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        for i in 0..=nx {
            seeds.push([lo[0] + off + i as f64 * h, lo[1] + j as f64 * dy]);
        }
    }
    seeds
}

/// Geometry and mesh of `Γ_β(L, ell)`. The flat angle gives the structured
/// strip mesh of `[-L, L] x [0, ell]`; other angles a constrained Delaunay
/// mesh with minimum angle [`MIN_ANGLE_DEG`].
pub fn build_wedge(beta: f64, l: f64, ell: f64, h: f64) -> Result<(WedgeGeometry, Mesh2D)> {
    let geom = WedgeGeometry::new(beta, l, ell, h)?;
    let mesh = if is_flat(beta) {
        Mesh2D::rectangle(-l, l, 0.0, ell, h)?
    } else {
        let poly = TaggedPolygon { vertices: geom.polygon.clone(), tags: geom.tags.clone() };
        let mesh = triangulate_polygon(&poly, &lattice_seeds(&geom.polygon, h), h, MIN_ANGLE_DEG)?;
        mesh.check_quality(MIN_ANGLE_DEG)?;
        mesh
    };
    Ok((geom, mesh))
}

/// Sign of `α₀ s` in the phase of `ψ⋆`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `exp{-i α₀ s - i s t / 2}`, the gauge image of `f₀ e^{-i α₀ s}`.
    #[default]
    Strip,
    /// `exp{+i α₀ s - i s t / 2}`.
    Literal,
}

/// `ψ⋆` at a point, in tubular coordinates.
pub fn psi_star(geom: &WedgeGeometry, prof: &Profile1D, conv: PhaseConvention, p: [f64; 2]) -> Complex64 {
    let (_, s, t) = geom.tubular(p);
    let sign = match conv {
        PhaseConvention::Strip => -1.0,
        PhaseConvention::Literal => 1.0,
    };
    Complex64::from_polar(prof.eval(t), sign * prof.alpha * s - 0.5 * s * t)
}

/// `ψ₀ = f₀(t) e^{-i α₀ s}` at a point, in tubular coordinates.
pub fn psi_zero(geom: &WedgeGeometry, prof: &Profile1D, p: [f64; 2]) -> Complex64 {
    let (_, s, t) = geom.tubular(p);
    Complex64::from_polar(prof.eval(t), -prof.alpha * s)
}

/// Dirichlet data `ψ⋆` for the SIDE and INNER boundaries.
pub fn boundary_data_star(geom: &WedgeGeometry, prof: &Profile1D, conv: PhaseConvention) -> DataFn {
    let (g, p) = (geom.clone(), prof.clone());
    Arc::new(move |x| psi_star(&g, &p, conv, x))
}

fn check_profile(geom: &WedgeGeometry, prof: &Profile1D) -> Result<()> {
    let p = &prof.params;
    if p.k * p.eps != 0.0 || (p.ell - geom.ell).abs() > 1e-12 * geom.ell {
        return Err(Error::InvalidParameter(format!(
            "profile must be flat and solved on ell = {}, got ell = {}",
            geom.ell, p.ell
        )));
    }
    if prof.degenerate {
        return Err(Error::InvalidParameter(format!("profile is trivial at b = {}", p.b)));
    }
    Ok(())
}

/// Boundary conditions of the corner problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerVariant {
    /// `ψ = ψ⋆` on SIDE and INNER.
    DirichletStar,
    /// `ψ = ψ⋆` on INNER, free sides with the side current term.
    NeumannModified,
}

impl CornerVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::DirichletStar => "dirichlet_star",
            Self::NeumannModified => "neumann",
        }
    }
}

/// Boundary specification of a corner problem in the `F` gauge.
pub fn corner_boundary_spec(
    geom: &WedgeGeometry,
    prof: &Profile1D,
    variant: CornerVariant,
    conv: PhaseConvention,
) -> BoundarySpec {
    let data = Condition::Dirichlet(boundary_data_star(geom, prof, conv));
    let bc = BoundarySpec::free().with(BoundaryTag::Inner, data.clone());
    match variant {
        CornerVariant::DirichletStar => bc.with(BoundaryTag::SideMinus, data.clone()).with(BoundaryTag::SidePlus, data),
        CornerVariant::NeumannModified => {
            let sw = SideWeight::from_profile(prof);
            let g = geom.clone();
            bc.with_current(CurrentTerm {
                weight: Arc::new(move |t| sw.weight(t)),
                depth: Arc::new(move |p| g.tubular(p).2),
            })
        }
    }
}

/// A minimized corner field.
#[derive(Clone, Debug, Serialize)]
pub struct CornerSolution {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    pub h: f64,
    pub b: f64,
    pub variant: CornerVariant,
    pub convention: PhaseConvention,
    /// `E_β(L, ell)`.
    pub energy: f64,
    /// `E¹ᴰ₀(ell)`.
    pub e1d: f64,
    /// `E_β(L, ell) - 2 L E¹ᴰ₀(ell)`.
    pub e: f64,
    pub report: MinimizeReport,
    pub agmon_rate: Option<f64>,
    pub agmon_passed: bool,
    #[serde(skip)]
    pub mesh: Mesh2D,
    #[serde(skip)]
    pub field: ComplexField,
}

/// Agmon rate threshold for corner and strip fields.
pub const AGMON_THRESHOLD: f64 = 0.2;

/// Minimizes `GL₁[ψ, F; Γ]` starting from `initial` (or from `ψ⋆`).
pub fn solve_corner_from(
    geom: &WedgeGeometry,
    mesh: Mesh2D,
    prof: &Profile1D,
    variant: CornerVariant,
    conv: PhaseConvention,
    initial: Option<&[Complex64]>,
) -> Result<CornerSolution> {
    check_profile(geom, prof)?;
    let bc = corner_boundary_spec(geom, prof, variant, conv);
    let f = Functional::new(&mesh, &PotentialField::FHalfPerp, prof.params.b, &bc)?;
    let init: ComplexField = match initial {
        Some(x) => x.to_vec(),
        None => mesh.nodes.iter().map(|&p| psi_star(geom, prof, conv, p)).collect(),
    };
    let (field, energy, report) = f.minimize(&init, &MinimizeOptions::default())?;
    let decay = agmon_decay_profile(&field, &mesh)?;
    Ok(CornerSolution {
        beta: geom.beta,
        l: geom.l,
        ell: geom.ell,
        h: mesh.h,
        b: prof.params.b,
        variant,
        convention: conv,
        energy,
        e1d: prof.energy,
        e: energy - 2.0 * geom.l * prof.energy,
        report,
        agmon_rate: decay.rate,
        agmon_passed: decay.passes(AGMON_THRESHOLD),
        mesh,
        field,
    })
}

/// Minimizes from `ψ⋆`.
pub fn solve_corner(
    geom: &WedgeGeometry,
    mesh: Mesh2D,
    prof: &Profile1D,
    variant: CornerVariant,
    conv: PhaseConvention,
) -> Result<CornerSolution> {
    solve_corner_from(geom, mesh, prof, variant, conv, None)
}

/// Solutions on a mesh and its red refinement, and the Richardson value.
#[derive(Clone, Debug, Serialize)]
pub struct CornerLadder {
    pub coarse: CornerSolution,
    pub fine: CornerSolution,
    /// `(4 E_fine - E_coarse) / 3`.
    pub energy: f64,
    /// `energy - 2 L E¹ᴰ₀(ell)`.
    pub e: f64,
}

/// Solves on `mesh`, then on its red refinement warm-started by interpolation.
pub fn solve_corner_refined(
    geom: &WedgeGeometry,
    mesh: Mesh2D,
    prof: &Profile1D,
    variant: CornerVariant,
    conv: PhaseConvention,
) -> Result<CornerLadder> {
    let coarse = solve_corner(geom, mesh, prof, variant, conv)?;
    let (fine_mesh, parents) = coarse.mesh.refine_red();
    let init = prolongate(&coarse.field, &parents);
    let fine = solve_corner_from(geom, fine_mesh, prof, variant, conv, Some(&init))?;
    let energy = (4.0 * fine.energy - coarse.energy) / 3.0;
    Ok(CornerLadder { e: energy - 2.0 * geom.l * prof.energy, energy, coarse, fine })
}

/// Gauge phase `φ_F`: `-s t / 2` in the linear frame of each half, linearly
/// interpolated in the polar angle to zero on the bisector across the
/// strip `|θ - β/2| <= ell⁻³`.
pub fn gauge_phase(geom: &WedgeGeometry, p: [f64; 2]) -> f64 {
    let rho2 = p[0] * p[0] + p[1] * p[1];
    if rho2 == 0.0 {
        return 0.0;
    }
    let half = 0.5 * geom.beta;
    let delta = geom.ell.powi(-3);
    let th = geom.angle(p);
    let plus = |th: f64| -0.25 * rho2 * (2.0 * th).sin();
    let minus = |th: f64| 0.25 * rho2 * (2.0 * (geom.beta - th)).sin();
    if th <= half - delta {
        plus(th)
    } else if th >= half + delta {
        minus(th)
    } else if th <= half {
        plus(half - delta) * (half - th) / delta
    } else {
        minus(half + delta) * (th - half) / delta
    }
}

/// The tangential gauge of a wedge mesh.
#[derive(Clone, Debug, Serialize)]
pub struct WedgeGauge {
    /// Angular half-width `ell⁻³` of the bisector strip.
    pub half_width: f64,
    /// Nodal `φ_F`.
    #[serde(skip)]
    pub phase: Vec<f64>,
    /// Nodal `a_β = F + ∇φ_F` (area-weighted average of the P1 gradients).
    #[serde(skip)]
    pub a_beta: Vec<[f64; 2]>,
    pub ratio: f64,
    pub integer_condition: bool,
    pub warning: Option<String>,
}

impl WedgeGauge {
    /// `F + ∇φ_F` as link variables; `GL[ψ, a_β] = GL[ψ e^{iφ_F}, F]` exactly.
    pub fn potential(&self) -> PotentialField {
        PotentialField::Gauged { base: Box::new(PotentialField::FHalfPerp), phase: self.phase.clone() }
    }
}

fn p1_gradient(mesh: &Mesh2D, c: &[usize; 3], v: &[f64]) -> [f64; 2] {
    let p = [mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]]];
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [0.0; 2];
    for k in 0..3 {
        let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[0] += v[c[k]] * (q[1] - r[1]) / two_a;
        g[1] += v[c[k]] * (r[0] - q[0]) / two_a;
    }
    g
}

/// Builds `φ_F` and `a_β`; flags a violated integer condition.
pub fn build_wedge_gauge(geom: &WedgeGeometry, mesh: &Mesh2D) -> WedgeGauge {
    let phase: Vec<f64> = mesh.nodes.iter().map(|&p| gauge_phase(geom, p)).collect();
    let mut acc = vec![[0.0; 2]; mesh.nodes.len()];
    let mut wsum = vec![0.0; mesh.nodes.len()];
    for c in &mesh.cells {
        let g = p1_gradient(mesh, c, &phase);
        let a = mesh.cell_area(c);
        for &i in c {
            acc[i][0] += a * g[0];
            acc[i][1] += a * g[1];
            wsum[i] += a;
        }
    }
    let a_beta = mesh
        .nodes
        .iter()
        .zip(acc.iter().zip(&wsum))
        .map(|(p, (g, w))| [-0.5 * p[1] + g[0] / w, 0.5 * p[0] + g[1] / w])
        .collect();
    let ratio = geom.integer_ratio();
    let integer_condition = geom.integer_condition();
    let warning = (!integer_condition).then(|| {
        format!("|Γ|/(2π|∂Γ|) = {ratio:.12} is not an integer; gauge equivalence is not asserted")
    });
    WedgeGauge { half_width: geom.ell.powi(-3), phase, a_beta, ratio, integer_condition, warning }
}

/// Checks of the gauge invariants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeChecks {
    /// `max |a_β - (-t e_s)|` over nodes farther than `2h` from the bisector.
    pub tangential_deviation: f64,
    /// `max |a_β|` over nodes within `2h` of the bisector.
    pub strip_sup: f64,
    /// The bound `2 ell⁴`.
    pub strip_bound: f64,
    /// `max |curl a_β - 1|` over cells.
    pub curl_deviation: f64,
}

pub fn gauge_checks(geom: &WedgeGeometry, mesh: &Mesh2D, gauge: &WedgeGauge) -> GaugeChecks {
    let mut tangential_deviation: f64 = 0.0;
    let mut strip_sup: f64 = 0.0;
    for (p, a) in mesh.nodes.iter().zip(&gauge.a_beta) {
        let near = p[0].abs() < 2.0 * mesh.h && p[1] > -2.0 * mesh.h;
        if near {
            strip_sup = strip_sup.max(a[0].hypot(a[1]));
        } else {
            let arm = geom.arm_of(*p);
            let (_, t) = geom.linear(arm, *p);
            let u = geom.tangent(arm);
            tangential_deviation = tangential_deviation.max((a[0] + t * u[0]).hypot(a[1] + t * u[1]));
        }
    }
    let curl_deviation = gauge.potential().discrete_curl(mesh).iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
    GaugeChecks { tangential_deviation, strip_sup, strip_bound: 2.0 * geom.ell.powi(4), curl_deviation }
}

/// Smallest `L >= L_target` with `|Γ| / (2π |∂Γ|)` an integer, searched on
/// `[L_target, 1.2 L_target]`.
pub fn adjust_for_integer_condition(beta: f64, l_target: f64, ell: f64) -> Result<f64> {
    let ratio = |l: f64| -> Result<f64> { Ok(WedgeGeometry::new(beta, l, ell, 1.0)?.integer_ratio()) };
    let r0 = ratio(l_target)?;
    if (r0 - r0.round()).abs() <= INTEGER_TOL {
        return Ok(l_target);
    }
    let steps = 2000;
    let hi = 1.2 * l_target;
    let mut prev = (l_target, r0);
    for k in 1..=steps {
        let l = l_target + (hi - l_target) * k as f64 / steps as f64;
        let r = ratio(l)?;
        if r.floor() != prev.1.floor() {
            let target = if r > prev.1 { r.floor() } else { prev.1.floor() };
            let (mut a, mut b) = (prev.0, l);
            let fa = prev.1 - target;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = ratio(m)? - target;
                if fm == 0.0 || (b - a) < 1e-14 * b {
                    a = m;
                    b = m;
                    break;
                }
                if (fm > 0.0) == (fa > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            let root = if (ratio(a)? - target).abs() <= (ratio(b)? - target).abs() { a } else { b };
            let root = root.max(l_target);
            if (ratio(root)? - target).abs() > INTEGER_TOL {
                return Err(Error::Geometry(format!("integer condition root at L = {root} not resolved")));
            }
            return Ok(root);
        }
        prev = (l, r);
    }
    Err(Error::Geometry(format!(
        "no L in [{l_target}, {hi}] makes |Γ|/(2π|∂Γ|) an integer (β = {beta}, ell = {ell}, ratio {r0:.6} .. {:.6})",
        prev.1
    )))
}

/// Energies of the paired formulations `(F, ψ⋆)` and `(a_β, ψ₀)`.
#[derive(Clone, Debug, Serialize)]
pub struct GaugePair {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    pub h: f64,
    pub ratio: f64,
    pub integer_condition: bool,
    pub energy_f: f64,
    pub energy_a: f64,
    pub difference: f64,
    /// `50 h ell`.
    pub budget: f64,
    /// `None` when the integer condition fails and the comparison is skipped.
    pub passed: Option<bool>,
    pub checks: GaugeChecks,
}

/// Minimizes both formulations on the same mesh.
pub fn gauge_pair_check(geom: &WedgeGeometry, mesh: &Mesh2D, prof: &Profile1D) -> Result<GaugePair> {
    let gauge = build_wedge_gauge(geom, mesh);
    let checks = gauge_checks(geom, mesh, &gauge);
    let sf = solve_corner(geom, mesh.clone(), prof, CornerVariant::DirichletStar, PhaseConvention::Strip)?;
    let (g, p) = (geom.clone(), prof.clone());
    let data = Condition::Dirichlet(Arc::new(move |x| psi_zero(&g, &p, x)));
    let bc = BoundarySpec::free()
        .with(BoundaryTag::Inner, data.clone())
        .with(BoundaryTag::SideMinus, data.clone())
        .with(BoundaryTag::SidePlus, data);
    let f = Functional::new(mesh, &gauge.potential(), prof.params.b, &bc)?;
    let init: ComplexField = mesh.nodes.iter().map(|&x| psi_zero(geom, prof, x)).collect();
    let (_, energy_a, _) = f.minimize(&init, &MinimizeOptions::default())?;
    let difference = sf.energy - energy_a;
    let budget = 50.0 * mesh.h * geom.ell;
    Ok(GaugePair {
        beta: geom.beta,
        l: geom.l,
        ell: geom.ell,
        h: mesh.h,
        ratio: gauge.ratio,
        integer_condition: gauge.integer_condition,
        energy_f: sf.energy,
        energy_a,
        difference,
        budget,
        passed: gauge.integer_condition.then_some(difference.abs() <= budget),
        checks,
    })
}

/// Source of interval profiles `(f₀, α₀)` at given `(b, ell)`.
pub trait ProfileProvider: Sync {
    fn profile(&self, b: f64, ell: f64) -> Result<Profile1D>;
}

/// Solves profiles at a fixed grid spacing and memoizes them.
#[derive(Debug)]
pub struct SolvedProfiles {
    pub h: f64,
    memo: Mutex<BTreeMap<(u64, u64), Profile1D>>,
}

impl SolvedProfiles {
    pub fn new(h: f64) -> Self {
        Self { h, memo: Mutex::new(BTreeMap::new()) }
    }
}

impl Default for SolvedProfiles {
    fn default() -> Self {
        Self::new(DEFAULT_H)
    }
}

impl ProfileProvider for SolvedProfiles {
    fn profile(&self, b: f64, ell: f64) -> Result<Profile1D> {
        let key = (b.to_bits(), ell.to_bits());
        if let Some(p) = self.memo.lock().expect("profile memo poisoned").get(&key) {
            return Ok(p.clone());
        }
        let p = optimize_alpha(&Params1D::with_spacing(b, 0.0, 0.0, ell, self.h)?)?;
        self.memo.lock().expect("profile memo poisoned").insert(key, p.clone());
        Ok(p)
    }
}

/// One `(L, ell, h)` cell of an extrapolation schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    /// Coarse spacing; the ladder adds `h / 2`.
    pub h: f64,
}

/// Diagonal schedule `L = max(c ell^a, ell / tan(β/2) + 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub ells: Vec<f64>,
    pub l_factor: f64,
    pub l_exponent: f64,
    pub h: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { ells: vec![6.0, 8.0, 10.0], l_factor: 1.5, l_exponent: 1.0, h: 0.25 }
    }
}

impl Schedule {
    pub fn entries(&self, beta: f64) -> Vec<ScheduleEntry> {
        self.ells
            .iter()
            .map(|&ell| {
                let mut l = self.l_factor * ell.powf(self.l_exponent);
                if beta < PI && !is_flat(beta) {
                    l = l.max(ell / (0.5 * beta).tan() + 2.0);
                }
                ScheduleEntry { l, ell, h: self.h }
            })
            .collect()
    }
}

/// One extrapolated row `e(L, ell)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    pub h: f64,
    pub energy_coarse: f64,
    pub energy_fine: f64,
    /// Richardson value of `E_β(L, ell)`.
    pub energy: f64,
    pub e1d: f64,
    /// `energy - 2 L E¹ᴰ₀(ell)`.
    pub e: f64,
    pub iterations: (usize, usize),
    pub converged: bool,
    pub agmon_passed: bool,
}

impl CornerRow {
    fn from_ladder(entry: &ScheduleEntry, lad: &CornerLadder) -> Self {
        Self {
            l: entry.l,
            ell: entry.ell,
            h: entry.h,
            energy_coarse: lad.coarse.energy,
            energy_fine: lad.fine.energy,
            energy: lad.energy,
            e1d: lad.coarse.e1d,
            e: lad.e,
            iterations: (lad.coarse.report.iterations, lad.fine.report.iterations),
            converged: lad.coarse.report.converged && lad.fine.report.converged,
            agmon_passed: lad.coarse.agmon_passed && lad.fine.agmon_passed,
        }
    }
}

/// Solves one schedule cell with the Richardson ladder.
pub fn corner_row(
    beta: f64,
    b: f64,
    entry: &ScheduleEntry,
    variant: CornerVariant,
    conv: PhaseConvention,
    profiles: &dyn ProfileProvider,
) -> Result<(CornerRow, CornerLadder)> {
    let prof = profiles.profile(b, entry.ell)?;
    let (geom, mesh) = build_wedge(beta, entry.l, entry.ell, entry.h)?;
    let lad = solve_corner_refined(&geom, mesh, &prof, variant, conv)?;
    Ok((CornerRow::from_ladder(entry, &lad), lad))
}

/// Extrapolated corner energy along a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerEstimate {
    pub beta: f64,
    pub b: f64,
    pub variant: CornerVariant,
    pub rows: Vec<CornerRow>,
    /// `e` of the last row.
    pub e_corner: f64,
    /// `|e_last - e_previous|`; `None` with fewer than two rows.
    pub spread: Option<f64>,
    pub plateau: bool,
    /// `-(π - β) E_corr` when `E_corr` is supplied.
    pub conjecture: Option<f64>,
}

/// Conjectured corner energy `-(π - β) E_corr`.
pub fn conjecture_value(beta: f64, e_corr: f64) -> f64 {
    -(PI - beta) * e_corr
}

/// Solves every schedule row (in parallel) and extrapolates.
pub fn corner_energy_estimate(
    beta: f64,
    b: f64,
    entries: &[ScheduleEntry],
    variant: CornerVariant,
    profiles: &dyn ProfileProvider,
    e_corr: Option<f64>,
) -> Result<CornerEstimate> {
    if entries.is_empty() {
        return Err(Error::InvalidParameter("empty schedule".into()));
    }
    for e in entries {
        WedgeGeometry::new(beta, e.l, e.ell, e.h)?;
    }
    let rows = entries
        .par_iter()
        .map(|e| corner_row(beta, b, e, variant, PhaseConvention::Strip, profiles).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let spread = (n >= 2).then(|| (rows[n - 1].e - rows[n - 2].e).abs());
    Ok(CornerEstimate {
        beta,
        b,
        variant,
        e_corner: rows[n - 1].e,
        plateau: spread.is_some_and(|s| s < PLATEAU_TOL),
        spread,
        conjecture: e_corr.map(|c| conjecture_value(beta, c)),
        rows,
    })
}

/// `E_D - E_N` at one `(L, ell)`, both Richardson-extrapolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub ell: f64,
    pub h: f64,
    pub energy_dirichlet: f64,
    pub energy_neumann: f64,
    pub gap: f64,
    /// Gap at the fine level alone.
    pub gap_fine: f64,
}

pub fn dirichlet_neumann_gap(
    beta: f64,
    b: f64,
    l: f64,
    ell: f64,
    h: f64,
    profiles: &dyn ProfileProvider,
) -> Result<GapResult> {
    let entry = ScheduleEntry { l, ell, h };
    let (d, n) = rayon::join(
        || corner_row(beta, b, &entry, CornerVariant::DirichletStar, PhaseConvention::Strip, profiles),
        || corner_row(beta, b, &entry, CornerVariant::NeumannModified, PhaseConvention::Strip, profiles),
    );
    let (d, n) = (d?.0, n?.0);
    Ok(GapResult {
        beta,
        l,
        ell,
        h,
        energy_dirichlet: d.energy,
        energy_neumann: n.energy,
        gap: d.energy - n.energy,
        gap_fine: d.energy_fine - n.energy_fine,
    })
}

/// `e(L, ell)` for several `L` at fixed `ell` (Richardson in `h`).
pub fn monotonicity_sweep(
    beta: f64,
    b: f64,
    ell: f64,
    ls: &[f64],
    h: f64,
    profiles: &dyn ProfileProvider,
) -> Result<Vec<CornerRow>> {
    ls.par_iter()
        .map(|&l| {
            let entry = ScheduleEntry { l, ell, h };
            corner_row(beta, b, &entry, CornerVariant::DirichletStar, PhaseConvention::Strip, profiles).map(|r| r.0)
        })
        .collect()
}

/// Largest increase `e(L_{k+1}) - e(L_k)` along a sweep ordered by `L`.
pub fn max_increase(rows: &[CornerRow]) -> f64 {
    rows.windows(2).map(|w| w[1].e - w[0].e).fold(f64::NEG_INFINITY, f64::max)
}

/// One row of the conjecture table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureRow {
    pub beta: f64,
    pub e_corner: f64,
    pub conjecture: f64,
    pub abs_dev: f64,
    /// `abs_dev / |conjecture|`; empty when the conjecture vanishes.
    pub rel_dev: Option<f64>,
}

impl ConjectureRow {
    pub fn new(beta: f64, e_corner: f64, e_corr: f64) -> Self {
        let conjecture = conjecture_value(beta, e_corr);
        let abs_dev = (e_corner - conjecture).abs();
        let rel_dev = (conjecture.abs() > 1e-14).then(|| abs_dev / conjecture.abs());
        Self { beta, e_corner, conjecture, abs_dev, rel_dev }
    }

    /// Within `max(30 % relative, 2 |π - β|^{4/3} absolute)`.
    pub fn within_near_pi_band(&self) -> bool {
        let delta = (PI - self.beta).abs();
        self.abs_dev <= (0.3 * self.conjecture.abs()).max(2.0 * delta.powf(4.0 / 3.0))
    }
}

/// Conjecture comparison over several angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureTable {
    pub b: f64,
    pub e_corr: f64,
    pub rows: Vec<ConjectureRow>,
    pub estimates: Vec<CornerEstimate>,
    /// For `|β - π| >= 0.3`: `e_corner` has the sign of `-(π - β) E_corr`.
    pub sign_pattern: Option<bool>,
}

impl ConjectureTable {
    /// `|e(π - δ) + e(π + δ)| / max |e(π ± δ)|` when both angles are present.
    pub fn antisymmetry_defect(&self, delta: f64) -> Option<f64> {
        let find = |beta: f64| self.rows.iter().find(|r| (r.beta - beta).abs() < 1e-9).map(|r| r.e_corner);
        let (lo, hi) = (find(PI - delta)?, find(PI + delta)?);
        Some((lo + hi).abs() / lo.abs().max(hi.abs()))
    }

    /// CSV with header `beta,e_corner,conjecture,abs_dev,rel_dev`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["beta", "e_corner", "conjecture", "abs_dev", "rel_dev"])?;
        for r in &self.rows {
            let rel = r.rel_dev.map(|v| format!("{v:.17e}")).unwrap_or_default();
            wr.write_record([
                format!("{:.17e}", r.beta),
                format!("{:.17e}", r.e_corner),
                format!("{:.17e}", r.conjecture),
                format!("{:.17e}", r.abs_dev),
                rel,
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Estimates `E_corner,β` for each angle and compares with `-(π - β) E_corr`.
pub fn conjecture_check(
    b: f64,
    betas: &[f64],
    e_corr: f64,
    schedule: &Schedule,
    profiles: &dyn ProfileProvider,
) -> Result<ConjectureTable> {
    let estimates = betas
        .iter()
        .map(|&beta| {
            corner_energy_estimate(
                beta,
                b,
                &schedule.entries(beta),
                CornerVariant::DirichletStar,
                profiles,
                Some(e_corr),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ConjectureRow> = estimates.iter().map(|e| ConjectureRow::new(e.beta, e.e_corner, e_corr)).collect();
    let far: Vec<&ConjectureRow> = rows.iter().filter(|r| (r.beta - PI).abs() >= 0.3).collect();
    let sign_pattern = (!far.is_empty()).then(|| far.iter().all(|r| r.e_corner.signum() == r.conjecture.signum()));
    Ok(ConjectureTable { b, e_corr, rows, estimates, sign_pattern })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_points_for_right_angle() {
        let g = WedgeGeometry::new(0.5 * PI, 8.0, 6.0, 0.5).unwrap();
        let s = 0.5f64.sqrt();
        let b = g.point_b();
        assert!((b[0] - 8.0 * s).abs() < 1e-12 && (b[1] - 8.0 * s).abs() < 1e-12);
        let d = g.point_d();
        assert!((d[1] - 6.0 / s).abs() < 1e-12);
        assert_eq!(g.polygon.len(), 6);
        assert!((g.polygon_area() - g.area()).abs() < 1e-12);
        assert!((g.perimeter() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_condition_is_enforced() {
        assert!(WedgeGeometry::new(0.5 * PI, 8.0, 6.0, 0.5).is_ok());
        assert!(WedgeGeometry::new(0.5 * PI, 5.0, 6.0, 0.5).is_err());
        assert!(WedgeGeometry::new(0.0, 5.0, 6.0, 0.5).is_err());
        assert!(WedgeGeometry::new(2.0 * PI, 5.0, 6.0, 0.5).is_err());
        assert!(WedgeGeometry::new(1.5 * PI, 2.0, 6.0, 0.5).is_ok());
    }

    #[test]
    fn tubular_coordinates_on_the_arms() {
        let g = WedgeGeometry::new(0.7 * PI, 10.0, 4.0, 0.5).unwrap();
        let (arm, s, t) = g.tubular(g.point_e());
        assert_eq!(arm, Arm::Plus);
        assert!((s - 10.0).abs() < 1e-12 && (t - 4.0).abs() < 1e-12);
        let (arm, s, t) = g.tubular(g.point_a());
        assert_eq!(arm, Arm::Minus);
        assert!((s + 10.0).abs() < 1e-12 && t.abs() < 1e-12);
        let r = WedgeGeometry::new(1.4 * PI, 10.0, 4.0, 0.5).unwrap();
        let (_, s, t) = r.tubular([0.0, 3.0]);
        assert!(s == 0.0 && (t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_phase_is_continuous_and_vanishes_on_the_bisector() {
        let g = WedgeGeometry::new(0.5 * PI, 8.0, 3.0, 0.5).unwrap();
        assert_eq!(gauge_phase(&g, [0.0, 2.0]), 0.0);
        let d = g.ell.powi(-3);
        for th in [0.5 * g.beta - d, 0.5 * g.beta + d] {
            let rot = 0.5 * PI - 0.5 * g.beta + th;
            let p = [3.0 * rot.cos(), 3.0 * rot.sin()];
            let q = [3.0 * (rot + 1e-12).cos(), 3.0 * (rot + 1e-12).sin()];
            assert!((gauge_phase(&g, p) - gauge_phase(&g, q)).abs() < 1e-9);
        }
        let p = [2.0, 5.0];
        let (s, t) = g.linear(Arm::Plus, p);
        assert!((gauge_phase(&g, p) + 0.5 * s * t).abs() < 1e-12);
    }

    #[test]
    fn conjecture_row_band() {
        let r = ConjectureRow::new(PI - 0.2, -0.01, 0.0432);
        assert!((r.conjecture + 0.2 * 0.0432).abs() < 1e-15);
        assert!(r.within_near_pi_band());
        assert!(ConjectureRow::new(PI, 0.0, 0.0432).rel_dev.is_none());
    }
}
