//! Discrete Ginzburg-Landau energy with a fixed magnetic potential.
//!
//! The magnetic term uses link variables: on each edge `i -> j` the factor
//! `U_ij = exp(i A_ij)` carries the line integral `A_ij` of the potential,
//! and the kinetic energy is `Σ_e W_e |ψ_i - U_ij ψ_j|^2` with cotangent
//! weights `W_e`. The potential term is evaluated at edge midpoints,
//! `Σ_e M_e g(|ψ_i + U_ij ψ_j|^2 / 4)` with `g(ρ) = -ρ/b + ρ^2/(2b)` and
//! `M_e` one third of the adjacent cell areas. The discrete energy is
//! exactly invariant under `ψ -> ψ e^{-iφ}`, `A_ij -> A_ij + φ_j - φ_i`.

use std::sync::Arc;

use num_complex::Complex64;

use super::mesh::{BoundaryTag, Mesh2D};
use crate::error::{Error, Result};

/// Complex nodal field.
pub type ComplexField = Vec<Complex64>;

/// Fixed magnetic potential.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialField {
    /// `F(x, y) = (-y, x) / 2`; line integrals are exact.
    FHalfPerp,
    /// `A = -t e_s` with `s = x`, `t = y`, i.e. `(-y, 0)`; exact line integrals.
    TangentialMinusT,
    /// Nodal vector values; edge integrals by the midpoint rule.
    CustomNodal(Vec<[f64; 2]>),
    /// `base + ∇φ` with nodal phase `φ`: `A_ij = base_ij + φ_j - φ_i`.
    Gauged { base: Box<PotentialField>, phase: Vec<f64> },
}

impl PotentialField {
    /// Line integral of the potential along the segment from node `i` to node `j`.
    pub fn link(&self, mesh: &Mesh2D, i: usize, j: usize) -> f64 {
        let (p, q) = (mesh.nodes[i], mesh.nodes[j]);
        match self {
            Self::FHalfPerp => 0.5 * (p[0] * q[1] - p[1] * q[0]),
            Self::TangentialMinusT => -0.5 * (p[1] + q[1]) * (q[0] - p[0]),
            Self::CustomNodal(v) => {
                let a = [0.5 * (v[i][0] + v[j][0]), 0.5 * (v[i][1] + v[j][1])];
                a[0] * (q[0] - p[0]) + a[1] * (q[1] - p[1])
            }
            Self::Gauged { base, phase } => base.link(mesh, i, j) + phase[j] - phase[i],
        }
    }

    /// Pointwise value where it is defined analytically.
    pub fn value(&self, r: [f64; 2]) -> Option<[f64; 2]> {
        match self {
            Self::FHalfPerp => Some([-0.5 * r[1], 0.5 * r[0]]),
            Self::TangentialMinusT => Some([-r[1], 0.0]),
            _ => None,
        }
    }

    /// Circulation around each cell divided by its area.
    pub fn discrete_curl(&self, mesh: &Mesh2D) -> Vec<f64> {
        mesh.cells
            .iter()
            .map(|c| {
                let circ = self.link(mesh, c[0], c[1]) + self.link(mesh, c[1], c[2]) + self.link(mesh, c[2], c[0]);
                circ / mesh.cell_area(c)
            })
            .collect()
    }

    fn check(&self, mesh: &Mesh2D) -> Result<()> {
        let n = mesh.nodes.len();
        match self {
            Self::CustomNodal(v) if v.len() != n => Err(Error::DimensionMismatch { expected: n, got: v.len() }),
            Self::Gauged { base, phase } => {
                if phase.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: phase.len() });
                }
                base.check(mesh)
            }
            _ => Ok(()),
        }
    }
}

/// Boundary data as a function of position.
pub type DataFn = Arc<dyn Fn([f64; 2]) -> Complex64 + Send + Sync>;

/// Condition on one tagged part of the boundary.
#[derive(Clone)]
pub enum Condition {
    Dirichlet(DataFn),
    Free,
}

impl std::fmt::Debug for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Dirichlet(_) => write!(f, "Dirichlet"),
            Self::Free => write!(f, "Free"),
        }
    }
}

/// Side-boundary current term `∓ ∫ w(t) j_t dt` on SIDE_PLUS / SIDE_MINUS.
#[derive(Clone)]
pub struct CurrentTerm {
    /// Weight `w(t)`; NaN marks points where it is undefined.
    pub weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Depth coordinate `t` of a boundary point.
    pub depth: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

/// Conditions per boundary tag and optional side current term.
#[derive(Clone, Debug)]
pub struct BoundarySpec {
    pub outer: Condition,
    pub inner: Condition,
    pub side_minus: Condition,
    pub side_plus: Condition,
    pub current: Option<CurrentTerm>,
}

impl std::fmt::Debug for CurrentTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CurrentTerm")
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::free()
    }
}

impl BoundarySpec {
    /// Natural conditions everywhere, no current term.
    pub fn free() -> Self {
        Self {
            outer: Condition::Free,
            inner: Condition::Free,
            side_minus: Condition::Free,
            side_plus: Condition::Free,
            current: None,
        }
    }

    pub fn condition(&self, tag: BoundaryTag) -> &Condition {
        match tag {
            BoundaryTag::Outer => &self.outer,
            BoundaryTag::Inner => &self.inner,
            BoundaryTag::SideMinus => &self.side_minus,
            BoundaryTag::SidePlus => &self.side_plus,
        }
    }

    /// Replaces the condition on one tag.
    pub fn with(mut self, tag: BoundaryTag, c: Condition) -> Self {
        match tag {
            BoundaryTag::Outer => self.outer = c,
            BoundaryTag::Inner => self.inner = c,
            BoundaryTag::SideMinus => self.side_minus = c,
            BoundaryTag::SidePlus => self.side_plus = c,
        }
        self
    }

    pub fn with_current(mut self, term: CurrentTerm) -> Self {
        self.current = Some(term);
        self
    }
}

#[derive(Clone, Copy, Debug)]
struct Link {
    i: usize,
    j: usize,
    w: f64,
    m: f64,
    u: Complex64,
}

#[derive(Clone, Copy, Debug)]
struct SideLink {
    a: usize,
    b: usize,
    u: Complex64,
    coef: f64,
}

/// Coefficients `c0 + c1 τ + ... + c4 τ^4` of the energy along a line.
pub type Quartic = [f64; 5];

/// Assembled discrete functional on a mesh.
#[derive(Clone, Debug)]
pub struct Functional {
    links: Vec<Link>,
    side: Vec<SideLink>,
    b: f64,
    /// Dirichlet value per node, `None` for free nodes.
    pub dirichlet: Vec<Option<Complex64>>,
    /// Diagonal preconditioner.
    pub(crate) precond: Vec<f64>,
}

impl Functional {
    pub fn new(mesh: &Mesh2D, a: &PotentialField, b: f64, bc: &BoundarySpec) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!("b = {b} must be positive")));
        }
        a.check(mesh)?;
        let n = mesh.nodes.len();
        let links: Vec<Link> = mesh
            .edges()
            .into_iter()
            .map(|e| Link {
                i: e.i,
                j: e.j,
                w: e.stiffness,
                m: e.mass,
                u: Complex64::from_polar(1.0, a.link(mesh, e.i, e.j)),
            })
            .collect();
        let mut dirichlet = vec![None; n];
        for e in &mesh.boundary {
            if let Condition::Dirichlet(data) = bc.condition(e.tag) {
                for v in [e.a, e.b] {
                    if dirichlet[v].is_none() {
                        dirichlet[v] = Some(data(mesh.nodes[v]));
                    }
                }
            }
        }
        let mut side = Vec::new();
        if let Some(term) = &bc.current {
            for e in &mesh.boundary {
                let sign = match e.tag {
                    BoundaryTag::SidePlus => -1.0,
                    BoundaryTag::SideMinus => 1.0,
                    _ => continue,
                };
                let (ta, tb) = ((term.depth)(mesh.nodes[e.a]), (term.depth)(mesh.nodes[e.b]));
                let (a0, b0) = if ta <= tb { (e.a, e.b) } else { (e.b, e.a) };
                let (pa, pb) = (mesh.nodes[a0], mesh.nodes[b0]);
                let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                let tm = 0.5 * (ta + tb);
                let w = (term.weight)(tm);
                if !w.is_finite() {
                    return Err(Error::Underflow { t: tm, x: mid[0], y: mid[1] });
                }
                side.push(SideLink { a: a0, b: b0, u: Complex64::from_polar(1.0, a.link(mesh, a0, b0)), coef: sign * w });
            }
        }
        let mut precond = vec![0.0; n];
        for l in &links {
            let d = 2.0 * l.w.abs() + l.m / b;
            precond[l.i] += d;
            precond[l.j] += d;
        }
        Ok(Self { links, side, b, dirichlet, precond })
    }

    pub fn num_nodes(&self) -> usize {
        self.dirichlet.len()
    }

    /// Overwrites Dirichlet nodes with their data.
    pub fn impose(&self, psi: &mut [Complex64]) {
        for (v, d) in psi.iter_mut().zip(&self.dirichlet) {
            if let Some(x) = d {
                *v = *x;
            }
        }
    }

    fn g(&self, rho: f64) -> f64 {
        (-rho + 0.5 * rho * rho) / self.b
    }

    /// Discrete energy.
    pub fn energy(&self, psi: &[Complex64]) -> f64 {
        let mut kin = 0.0;
        let mut pot = 0.0;
        for l in &self.links {
            let uj = l.u * psi[l.j];
            kin += l.w * (psi[l.i] - uj).norm_sqr();
            pot += l.m * self.g(0.25 * (psi[l.i] + uj).norm_sqr());
        }
        let mut cur = 0.0;
        for s in &self.side {
            cur += s.coef * (psi[s.a].conj() * s.u * psi[s.b]).im;
        }
        kin + pot + cur
    }

    /// Magnetic kinetic energy `Σ_e W_e |ψ_i - U_ij ψ_j|^2`.
    pub fn kinetic(&self, psi: &[Complex64]) -> f64 {
        self.links.iter().map(|l| l.w * (psi[l.i] - l.u * psi[l.j]).norm_sqr()).sum()
    }

    /// Gradient `2 ∂E/∂ψ̄` (so that `dE = Re Σ conj(G_i) δψ_i`), zero at Dirichlet nodes.
    pub fn gradient(&self, psi: &[Complex64]) -> ComplexField {
        let mut g = vec![Complex64::new(0.0, 0.0); psi.len()];
        for l in &self.links {
            let uj = l.u * psi[l.j];
            let d = psi[l.i] - uj;
            let m = 0.5 * (psi[l.i] + uj);
            let gp = l.m * (-1.0 + m.norm_sqr()) / self.b;
            g[l.i] += 2.0 * l.w * d + gp * m;
            g[l.j] += l.u.conj() * (-2.0 * l.w * d + gp * m);
        }
        for s in &self.side {
            let i = Complex64::new(0.0, 1.0);
            g[s.a] += -i * s.coef * s.u * psi[s.b];
            g[s.b] += i * s.coef * s.u.conj() * psi[s.a];
        }
        for (gi, d) in g.iter_mut().zip(&self.dirichlet) {
            if d.is_some() {
                *gi = Complex64::new(0.0, 0.0);
            }
        }
        g
    }

    /// Energy along `ψ + τ d` as a quartic polynomial in `τ`.
    pub fn line_quartic(&self, psi: &[Complex64], dir: &[Complex64]) -> Quartic {
        let mut c = [0.0; 5];
        let ib = 1.0 / self.b;
        for l in &self.links {
            let d0 = psi[l.i] - l.u * psi[l.j];
            let d1 = dir[l.i] - l.u * dir[l.j];
            c[0] += l.w * d0.norm_sqr();
            c[1] += l.w * 2.0 * (d0.conj() * d1).re;
            c[2] += l.w * d1.norm_sqr();
            let m0 = 0.5 * (psi[l.i] + l.u * psi[l.j]);
            let m1 = 0.5 * (dir[l.i] + l.u * dir[l.j]);
            let r0 = m0.norm_sqr();
            let r1 = 2.0 * (m0.conj() * m1).re;
            let r2 = m1.norm_sqr();
            let k = l.m * ib;
            c[0] += k * (-r0 + 0.5 * r0 * r0);
            c[1] += k * (-r1 + r0 * r1);
            c[2] += k * (-r2 + 0.5 * (r1 * r1 + 2.0 * r0 * r2));
            c[3] += k * r1 * r2;
            c[4] += k * 0.5 * r2 * r2;
        }
        for s in &self.side {
            let (a0, a1, b0, b1) = (psi[s.a], dir[s.a], psi[s.b], dir[s.b]);
            c[0] += s.coef * (a0.conj() * s.u * b0).im;
            c[1] += s.coef * ((a0.conj() * s.u * b1).im + (a1.conj() * s.u * b0).im);
            c[2] += s.coef * (a1.conj() * s.u * b1).im;
        }
        c
    }
}

/// Energy of `psi` (Dirichlet data is assumed already imposed).
pub fn assemble_energy(mesh: &Mesh2D, psi: &[Complex64], a: &PotentialField, b: f64, bc: &BoundarySpec) -> Result<f64> {
    check_len(mesh, psi)?;
    Ok(Functional::new(mesh, a, b, bc)?.energy(psi))
}

/// Exact gradient of [`assemble_energy`] with zero rows at Dirichlet nodes.
pub fn assemble_gradient(
    mesh: &Mesh2D,
    psi: &[Complex64],
    a: &PotentialField,
    b: f64,
    bc: &BoundarySpec,
) -> Result<ComplexField> {
    check_len(mesh, psi)?;
    Ok(Functional::new(mesh, a, b, bc)?.gradient(psi))
}

fn check_len(mesh: &Mesh2D, psi: &[Complex64]) -> Result<()> {
    if psi.len() != mesh.nodes.len() {
        return Err(Error::DimensionMismatch { expected: mesh.nodes.len(), got: psi.len() });
    }
    Ok(())
}

/// Real inner product `Re Σ conj(x_i) y_i`.
pub fn real_dot(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let m = Mesh2D::rectangle(0.0, 1.0, 0.0, 1.0, 0.25).unwrap();
        let psi = vec![c(0.0, 0.0); m.nodes.len()];
        let e = assemble_energy(&m, &psi, &PotentialField::FHalfPerp, 1.5, &BoundarySpec::free()).unwrap();
        assert_eq!(e, 0.0);
        let g = assemble_gradient(&m, &psi, &PotentialField::FHalfPerp, 1.5, &BoundarySpec::free()).unwrap();
        assert!(g.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn constant_field_unit_square() {
        let m = Mesh2D::rectangle(0.0, 1.0, 0.0, 1.0, 0.125).unwrap();
        let psi = vec![c(1.0, 0.0); m.nodes.len()];
        let zero = PotentialField::CustomNodal(vec![[0.0, 0.0]; m.nodes.len()]);
        let e = assemble_energy(&m, &psi, &zero, 1.5, &BoundarySpec::free()).unwrap();
        assert!((e + 1.0 / 3.0).abs() < 1e-14, "{e}");
    }

    #[test]
    fn curl_is_one_for_both_fixed_potentials() {
        let m = Mesh2D::rectangle(-1.0, 2.0, 0.0, 1.5, 0.25).unwrap();
        for a in [PotentialField::FHalfPerp, PotentialField::TangentialMinusT] {
            for curl in a.discrete_curl(&m) {
                assert!((curl - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauge_transform_is_exact() {
        let m = Mesh2D::rectangle(0.0, 2.0, 0.0, 1.0, 0.25).unwrap();
        let psi: ComplexField = m.nodes.iter().map(|p| c(p[0].cos() * (1.0 - p[1]), 0.3 * p[0] * p[1])).collect();
        let phase: Vec<f64> = m.nodes.iter().map(|p| -0.5 * p[0] * p[1] + p[0].sin()).collect();
        let gauged = PotentialField::Gauged { base: Box::new(PotentialField::TangentialMinusT), phase: phase.clone() };
        let psi2: ComplexField = psi.iter().zip(&phase).map(|(z, f)| z * Complex64::from_polar(1.0, -f)).collect();
        let bc = BoundarySpec::free();
        let e1 = assemble_energy(&m, &psi, &PotentialField::TangentialMinusT, 1.5, &bc).unwrap();
        let e2 = assemble_energy(&m, &psi2, &gauged, 1.5, &bc).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn quartic_reproduces_energy_along_a_line() {
        let m = Mesh2D::rectangle(0.0, 1.0, 0.0, 1.0, 0.25).unwrap();
        let psi: ComplexField = m.nodes.iter().map(|p| c(0.5 + p[0], p[1] - 0.2)).collect();
        let dir: ComplexField = m.nodes.iter().map(|p| c(p[1] * p[0], 0.7 - p[0])).collect();
        let term = CurrentTerm { weight: Arc::new(|t| 1.0 + t), depth: Arc::new(|p| p[1]) };
        let bc = BoundarySpec::free().with_current(term);
        let f = Functional::new(&m, &PotentialField::FHalfPerp, 1.5, &bc).unwrap();
        let q = f.line_quartic(&psi, &dir);
        for tau in [-0.7, 0.0, 0.3, 1.1] {
            let x: ComplexField = psi.iter().zip(&dir).map(|(a, d)| a + d * tau).collect();
            let poly = q[0] + tau * (q[1] + tau * (q[2] + tau * (q[3] + tau * q[4])));
            assert!((f.energy(&x) - poly).abs() < 1e-12);
        }
    }
}
