//! One-dimensional boundary-profile problems on `[0, ell]`.
//!
//! The functional is
//! `E[f] = ∫ (1 - eps k t) { f'^2 + V(t) f^2 - (2 f^2 - f^4) / (2b) } dt`
//! with `V(t) = (t + alpha - eps k t^2 / 2)^2 / (1 - eps k t)^2`.
//! The derivative term is discretized by cell differences with the weight
//! taken at cell midpoints, all other terms by the trapezoidal rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default value of the universal constant `Θ₀`.
pub const THETA0: f64 = 0.5901;

/// Default grid spacing for half-line and reference computations.
pub const DEFAULT_H: f64 = 0.005;

/// Target sup-norm of the Euler-Lagrange residual.
const RESIDUAL_TARGET: f64 = 1e-11;

/// Largest residual accepted as converged.
const RESIDUAL_ACCEPT: f64 = 1e-9;

/// Parameters of a 1D problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params1D {
    pub b: f64,
    pub k: f64,
    pub eps: f64,
    pub ell: f64,
    pub n: usize,
    pub theta0: f64,
}

impl Params1D {
    /// Validated parameters.
    pub fn new(b: f64, k: f64, eps: f64, ell: f64, n: usize) -> Result<Self> {
        let p = Self { b, k, eps, ell, n, theta0: THETA0 };
        p.validate()?;
        Ok(p)
    }

    /// Flat boundary (`k = 0`, `eps = 0`).
    pub fn flat(b: f64, ell: f64, n: usize) -> Result<Self> {
        Self::new(b, 0.0, 0.0, ell, n)
    }

    /// Parameters whose grid spacing is as close as possible to `h`.
    pub fn with_spacing(b: f64, k: f64, eps: f64, ell: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(ell > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing {h} and length {ell} must be positive")));
        }
        let n = (ell / h).round() as usize + 1;
        Self::new(b, k, eps, ell, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::InvalidParameter(format!("n = {} must be at least 16", self.n)));
        }
        if !(self.ell > 0.0) || !self.ell.is_finite() {
            return Err(Error::InvalidParameter(format!("ell = {} must be positive", self.ell)));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::InvalidParameter(format!("b = {} must be positive", self.b)));
        }
        if !(self.eps >= 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidParameter(format!("eps = {}, k = {} invalid", self.eps, self.k)));
        }
        let deg = self.eps * self.k.abs() * self.ell;
        if deg >= 1.0 {
            return Err(Error::DegenerateWeight(deg));
        }
        Ok(())
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        self.ell / (self.n - 1) as f64
    }

    /// Grid point `i`.
    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Whether `1 < b < 1/Θ₀`.
    pub fn in_surface_regime(&self) -> bool {
        self.b > 1.0 && self.b < 1.0 / self.theta0
    }

    /// Same problem with half the grid spacing.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..self.clone() }
    }

    fn weight(&self, t: f64) -> f64 {
        1.0 - self.eps * self.k * t
    }

    fn potential(&self, alpha: f64, t: f64) -> f64 {
        let ek = self.eps * self.k;
        let w = 1.0 - ek * t;
        let a = t + alpha - 0.5 * ek * t * t;
        a * a / (w * w)
    }
}

/// A discrete profile with its phase, energy and certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub params: Params1D,
    pub alpha: f64,
    pub values: Vec<f64>,
    pub energy: f64,
    /// Sup norm of the discrete Euler-Lagrange residual.
    pub residual: f64,
    /// Stationarity integral `∫ (t + alpha - eps k t^2/2) f^2 / (1 - eps k t)`.
    pub stationarity: f64,
    /// True when the minimizer is `f ≡ 0`.
    pub degenerate: bool,
}

impl Profile1D {
    /// Grid points.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.params.n).map(|i| self.params.t(i)).collect()
    }

    /// Linear interpolation of the profile, constant beyond the ends.
    pub fn eval(&self, t: f64) -> f64 {
        interp(&self.values, self.params.h(), t)
    }

    /// Largest one-sided difference quotient at either end of the interval.
    pub fn one_sided_slopes(&self) -> (f64, f64) {
        let f = &self.values;
        let h = self.params.h();
        let n = f.len();
        ((f[1] - f[0]) / h, (f[n - 1] - f[n - 2]) / h)
    }

    /// Neumann residuals at `t = 0` and `t = ell`: the centred difference
    /// `(f[1] - f[-1]) / 2h` with the ghost value `f[-1]` (resp. `f[n]`)
    /// obtained by extending the interior Euler-Lagrange stencil to the end node.
    pub fn neumann_residuals(&self) -> (f64, f64) {
        let p = &self.params;
        let h = p.h();
        let f = &self.values;
        let n = f.len();
        let ghost = |i: usize, inner: usize| -> f64 {
            // Interior stencil at node i with the missing neighbour eliminated:
            // -(w+ (f_in - f_i) - w- (f_i - f_g)) / h^2 + w_i (V f_i - N(f_i)) = 0.
            let t = p.t(i);
            let wi = p.weight(t);
            let wm = p.weight(t + 0.5 * h * if inner > i { 1.0 } else { -1.0 });
            let wg = p.weight(t - 0.5 * h * if inner > i { 1.0 } else { -1.0 });
            let fi = f[i];
            let src = wi * (p.potential(self.alpha, t) * fi - (1.0 - fi * fi) * fi / p.b) * h * h;
            fi - (wm * (f[inner] - fi) - src) / wg
        };
        let g0 = ghost(0, 1);
        let gl = ghost(n - 1, n - 2);
        ((f[1] - g0) / (2.0 * h), (gl - f[n - 2]) / (2.0 * h))
    }
}

pub(crate) fn interp(values: &[f64], h: f64, t: f64) -> f64 {
    let n = values.len();
    if t <= 0.0 {
        return values[0];
    }
    let x = t / h;
    let i = x.floor() as usize;
    if i + 1 >= n {
        return values[n - 1];
    }
    let r = x - i as f64;
    values[i] * (1.0 - r) + values[i + 1] * r
}

/// Precomputed weights of the discretization.
struct Disc {
    /// Trapezoid weight times the curvature weight at nodes.
    cw: Vec<f64>,
    /// Curvature weight at cell midpoints divided by h.
    wm: Vec<f64>,
    /// Potential at nodes.
    v: Vec<f64>,
    b: f64,
}

impl Disc {
    fn new(p: &Params1D, alpha: f64) -> Result<Self> {
        p.validate()?;
        let n = p.n;
        let h = p.h();
        let cw = (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                c * p.weight(p.t(i))
            })
            .collect();
        let wm = (0..n - 1).map(|i| p.weight(p.t(i) + 0.5 * h) / h).collect();
        let v = (0..n).map(|i| p.potential(alpha, p.t(i))).collect();
        Ok(Self { cw, wm, v, b: p.b })
    }

    fn energy(&self, f: &[f64]) -> f64 {
        let mut kin = 0.0;
        for (i, w) in self.wm.iter().enumerate() {
            let d = f[i + 1] - f[i];
            kin += w * d * d;
        }
        let mut pot = 0.0;
        for (i, &fi) in f.iter().enumerate() {
            let f2 = fi * fi;
            pot += self.cw[i] * (self.v[i] * f2 - (2.0 * f2 - f2 * f2) / (2.0 * self.b));
        }
        kin + pot
    }

    fn gradient(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut g = vec![0.0; n];
        for (i, w) in self.wm.iter().enumerate() {
            let d = 2.0 * w * (f[i + 1] - f[i]);
            g[i] -= d;
            g[i + 1] += d;
        }
        for (i, &fi) in f.iter().enumerate() {
            g[i] += 2.0 * self.cw[i] * (self.v[i] * fi - (1.0 - fi * fi) * fi / self.b);
        }
        g
    }

    /// Residual in ODE units: gradient divided by twice the nodal weight.
    fn residual(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.cw).map(|(gi, c)| (gi / (2.0 * c)).abs()).fold(0.0, f64::max)
    }

    /// Tridiagonal Hessian (diagonal, off-diagonal).
    fn hessian(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = f.len();
        let mut d = vec![0.0; n];
        let off: Vec<f64> = self.wm.iter().map(|w| -2.0 * w).collect();
        for (i, w) in self.wm.iter().enumerate() {
            d[i] += 2.0 * w;
            d[i + 1] += 2.0 * w;
        }
        for (i, &fi) in f.iter().enumerate() {
            d[i] += 2.0 * self.cw[i] * (self.v[i] - 1.0 / self.b + 3.0 * fi * fi / self.b);
        }
        (d, off)
    }
}

/// LDLᵀ solve of a symmetric tridiagonal system. Returns `None` when a
/// pivot is not strictly positive.
fn solve_spd_tridiag(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut piv = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    piv[0] = diag[0];
    if !(piv[0] > 0.0) {
        return None;
    }
    for i in 1..n {
        l[i - 1] = off[i - 1] / piv[i - 1];
        piv[i] = diag[i] - l[i - 1] * off[i - 1];
        if !(piv[i] > 0.0) {
            return None;
        }
    }
    let mut y = rhs.to_vec();
    for i in 1..n {
        y[i] -= l[i - 1] * y[i - 1];
    }
    for i in 0..n {
        y[i] /= piv[i];
    }
    for i in (0..n - 1).rev() {
        y[i] -= l[i] * y[i + 1];
    }
    Some(y)
}

fn positive_definite(diag: &[f64], off: &[f64]) -> bool {
    let mut p = diag[0];
    if !(p > 0.0) {
        return false;
    }
    for i in 1..diag.len() {
        p = diag[i] - off[i - 1] * off[i - 1] / p;
        if !(p > 0.0) {
            return false;
        }
    }
    true
}

/// Discrete energy of the profile `f` at phase `alpha`.
pub fn energy_1d(f: &[f64], alpha: f64, p: &Params1D) -> Result<f64> {
    if f.len() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: f.len() });
    }
    Ok(Disc::new(p, alpha)?.energy(f))
}

/// Exact gradient of [`energy_1d`] with respect to the nodal values.
pub fn gradient_1d(f: &[f64], alpha: f64, p: &Params1D) -> Result<Vec<f64>> {
    if f.len() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: f.len() });
    }
    Ok(Disc::new(p, alpha)?.gradient(f))
}

/// `∫ (t + alpha - eps k t^2/2) f^2 / (1 - eps k t) dt` by the trapezoidal
/// rule; half the derivative of the discrete energy in `alpha`.
pub fn stationarity_integral(f: &[f64], alpha: f64, p: &Params1D) -> f64 {
    let n = p.n;
    let h = p.h();
    let ek = p.eps * p.k;
    let mut s = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        let t = p.t(i);
        let c = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        s += c * (t + alpha - 0.5 * ek * t * t) / (1.0 - ek * t) * fi * fi;
    }
    s
}

/// Minimizes the energy at fixed `alpha`.
pub fn solve_profile_fixed_alpha(alpha: f64, p: &Params1D) -> Result<Profile1D> {
    solve_with_guess(alpha, p, None)
}

/// Minimizes the energy at fixed `alpha`, starting Newton from `guess` when given.
pub fn solve_with_guess(alpha: f64, p: &Params1D, guess: Option<&[f64]>) -> Result<Profile1D> {
    let disc = Disc::new(p, alpha)?;
    let n = p.n;
    let zero = vec![0.0; n];
    let (d0, o0) = disc.hessian(&zero);
    if positive_definite(&d0, &o0) {
        return Ok(zero_profile(p, alpha));
    }
    let start: Vec<f64> = match guess {
        Some(g) if g.len() == n && g.iter().any(|&x| x > 0.05) => g.to_vec(),
        _ => (0..n).map(|i| 0.9 * (-0.5 * (p.t(i) + alpha).powi(2)).exp().max(1e-3)).collect(),
    };
    let (f, residual) = newton(&disc, start)?;
    let energy = disc.energy(&f);
    if energy >= -1e-12 {
        return Ok(zero_profile(p, alpha));
    }
    Ok(Profile1D {
        params: p.clone(),
        alpha,
        stationarity: stationarity_integral(&f, alpha, p),
        values: f,
        energy,
        residual,
        degenerate: false,
    })
}

fn zero_profile(p: &Params1D, alpha: f64) -> Profile1D {
    Profile1D {
        params: p.clone(),
        alpha,
        values: vec![0.0; p.n],
        energy: 0.0,
        residual: 0.0,
        stationarity: 0.0,
        degenerate: true,
    }
}

/// Projected damped Newton with a diagonal shift when the Hessian is not
/// positive definite.
fn newton(disc: &Disc, mut f: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    const MAX_IT: usize = 400;
    let mut e = disc.energy(&f);
    let mut g = disc.gradient(&f);
    let mut res = disc.residual(&g);
    let mut best = res;
    let mut stall = 0;
    for _ in 0..MAX_IT {
        if res < RESIDUAL_TARGET {
            break;
        }
        let (mut diag, off) = disc.hessian(&f);
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let scale = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut shift = 0.0;
        let mut delta = None;
        for _ in 0..30 {
            if let Some(d) = solve_spd_tridiag(&diag, &off, &rhs) {
                delta = Some(d);
                break;
            }
            let add = if shift == 0.0 { 1e-6 * scale } else { shift * 9.0 };
            shift += add;
            diag.iter_mut().for_each(|x| *x += add);
        }
        let delta = delta.ok_or(Error::NoConvergence { iterations: 0, residual: res })?;
        let slope: f64 = g.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let local = shift == 0.0 && res < 1e-6;
        let mut tau = 1.0;
        let mut accepted = false;
        let e_old = e;
        for _ in 0..60 {
            let trial: Vec<f64> = f.iter().zip(&delta).map(|(x, d)| (x + tau * d).max(0.0)).collect();
            let et = disc.energy(&trial);
            if local || et <= e + 1e-4 * tau * slope {
                f = trial;
                e = et;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        g = disc.gradient(&f);
        res = disc.residual(&g);
        let progress = e_old - e > 1e-14 * (1.0 + e.abs());
        if !accepted || (!progress && res >= 0.999 * best) {
            stall += 1;
            if stall >= 6 {
                break;
            }
        } else {
            stall = 0;
        }
        best = best.min(res);
    }
    if res > RESIDUAL_ACCEPT {
        return Err(Error::NoConvergence { iterations: MAX_IT, residual: res });
    }
    Ok((f, res))
}

/// Minimizes over the phase `alpha` as well.
///
/// The search runs over `alpha ∈ [-ell/2, 1]`: for `k = 0` the energy is
/// symmetric under `alpha -> -ell - alpha`, and this half contains the
/// branch concentrated at `t = 0`.
pub fn optimize_alpha(p: &Params1D) -> Result<Profile1D> {
    p.validate()?;
    let lo = -0.5 * p.ell;
    let hi = 1.0;
    let step = 0.05;
    let m = ((hi - lo) / step).round() as usize;
    let mut table = Vec::with_capacity(m + 1);
    let mut profiles: Vec<Profile1D> = Vec::with_capacity(m + 1);
    let mut guess: Option<Vec<f64>> = None;
    for j in 0..=m {
        let a = hi - j as f64 * step;
        let prof = solve_with_guess(a, p, guess.as_deref())?;
        if !prof.degenerate {
            guess = Some(prof.values.clone());
        }
        table.push((a, prof.energy));
        profiles.push(prof);
    }
    let (jmin, emin) = table
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &(_, e))| if e < acc.1 { (j, e) } else { acc });
    if emin >= 0.0 {
        let mut prof = profiles.swap_remove(jmin);
        prof.degenerate = true;
        return Ok(prof);
    }
    if jmin == 0 || jmin == m {
        return Err(Error::Bracketing { table });
    }
    // Golden section on [a_lo, a_hi] (alpha decreases with j).
    let mut a = table[jmin + 1].0;
    let mut bnd = table[jmin - 1].0;
    let mut warm = profiles[jmin].values.clone();
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = bnd - gr * (bnd - a);
    let mut x2 = a + gr * (bnd - a);
    let mut p1 = solve_with_guess(x1, p, Some(&warm))?;
    let mut p2 = solve_with_guess(x2, p, Some(&warm))?;
    while bnd - a > 1e-5 {
        if p1.energy < p2.energy {
            bnd = x2;
            x2 = x1;
            p2 = p1;
            x1 = bnd - gr * (bnd - a);
            p1 = solve_with_guess(x1, p, Some(&p2.values))?;
        } else {
            a = x1;
            x1 = x2;
            p1 = p2;
            x2 = a + gr * (bnd - a);
            p2 = solve_with_guess(x2, p, Some(&p1.values))?;
        }
    }
    let mut best = if p1.energy < p2.energy { p1 } else { p2 };
    warm.clone_from(&best.values);
    // Secant iteration on the stationarity integral.
    let (lo_b, hi_b) = (table[jmin + 1].0, table[jmin - 1].0);
    let mut xa = best.alpha;
    let mut ra = best.stationarity;
    let mut xb = xa + 1e-4;
    let mut pb = solve_with_guess(xb, p, Some(&warm))?;
    let mut rb = pb.stationarity;
    for _ in 0..30 {
        if pb.stationarity.abs() < best.stationarity.abs() && !pb.degenerate {
            best = pb.clone();
        }
        if best.stationarity.abs() < 1e-13 || rb == ra {
            break;
        }
        let xn = (xb - rb * (xb - xa) / (rb - ra)).clamp(lo_b, hi_b);
        if (xn - xb).abs() < 1e-15 {
            break;
        }
        xa = xb;
        ra = rb;
        xb = xn;
        pb = solve_with_guess(xb, p, Some(&best.values))?;
        rb = pb.stationarity;
    }
    Ok(best)
}

/// Converged half-line quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfLineSummary {
    pub b: f64,
    /// Ground-state energy (Richardson-extrapolated in the grid spacing).
    pub e1d_star: f64,
    pub alpha_star: f64,
    pub f0_at_0: f64,
    /// Curvature correction from the weighted integral.
    pub e_corr_integral: f64,
    /// Curvature correction from `f(0)^2 alpha / 3 - E`.
    pub e_corr_closed: f64,
    /// `|e_corr_integral - e_corr_closed|`.
    pub e_corr_diff: f64,
    /// Curvature correction from `f(0)^2 / 3 - alpha E`.
    pub e_corr_moment: f64,
    /// `|e_corr_integral - e_corr_moment|`.
    pub e_corr_moment_diff: f64,
    pub ell_used: f64,
    pub h: f64,
    pub converged: bool,
    /// `(ell, energy)` for each schedule entry that was solved.
    pub energies: Vec<(f64, f64)>,
}

impl HalfLineSummary {
    /// The curvature correction (the integral evaluation, which equals
    /// `-dE_k/d(eps k)` at `eps = 0`).
    pub fn e_corr(&self) -> f64 {
        self.e_corr_integral
    }
}

/// Curvature correction `∫ t { f'^2 + f^2 (-alpha (t + alpha) - 1/b + f^2 / 2b) } dt`.
pub fn e_corr_integral(prof: &Profile1D) -> f64 {
    let p = &prof.params;
    let h = p.h();
    let f = &prof.values;
    let a = prof.alpha;
    let n = f.len();
    let mut s = 0.0;
    for i in 0..n - 1 {
        let d = (f[i + 1] - f[i]) / h;
        s += h * (p.t(i) + 0.5 * h) * d * d;
    }
    for (i, &fi) in f.iter().enumerate() {
        let t = p.t(i);
        let c = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        let f2 = fi * fi;
        s += c * t * f2 * (-a * (t + a) - 1.0 / p.b + f2 / (2.0 * p.b));
    }
    s
}

/// Curvature correction `f(0)^2 alpha / 3 - E`.
pub fn e_corr_closed(prof: &Profile1D) -> f64 {
    prof.values[0].powi(2) * prof.alpha / 3.0 - prof.energy
}

/// Curvature correction `f(0)^2 / 3 - alpha E`, obtained from the weighted
/// integral with the moment identities of the Euler-Lagrange equation.
pub fn e_corr_moment(prof: &Profile1D) -> f64 {
    prof.values[0].powi(2) / 3.0 - prof.alpha * prof.energy
}

/// Solves on increasing intervals until the energy stabilizes, then
/// evaluates the half-line quantities at grid spacings `h` and `h/2` and
/// extrapolates.
pub fn half_line_limit(b: f64, schedule: &[f64], h: f64) -> Result<HalfLineSummary> {
    if schedule.len() < 3 {
        return Err(Error::InvalidParameter("schedule needs at least 3 lengths".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule[0] < 6.0 {
        return Err(Error::InvalidParameter("schedule must increase strictly and start at 6 or more".into()));
    }
    let mut energies = Vec::new();
    let mut used = None;
    let mut last: Option<Profile1D> = None;
    for &ell in schedule {
        let p = Params1D::with_spacing(b, 0.0, 0.0, ell, h)?;
        let prof = optimize_alpha(&p)?;
        if let Some(prev) = &last {
            let diff = prof.energy - prev.energy;
            if diff > 1e-8 {
                return Err(Error::Validation(format!(
                    "energy increased from {} to {} between ell = {} and {}; grid too coarse",
                    prev.energy, prof.energy, prev.params.ell, ell
                )));
            }
            if diff.abs() < 1e-10 {
                energies.push((ell, prof.energy));
                used = Some(prof);
                break;
            }
        }
        energies.push((ell, prof.energy));
        last = Some(prof);
    }
    let converged = used.is_some();
    let coarse = match used {
        Some(p) => p,
        None => last.expect("schedule is non-empty"),
    };
    let fine = optimize_alpha(&coarse.params.refined())?;
    let rich = |x: f64, y: f64| (4.0 * y - x) / 3.0;
    let ci = rich(e_corr_integral(&coarse), e_corr_integral(&fine));
    let cc = rich(e_corr_closed(&coarse), e_corr_closed(&fine));
    let cm = rich(e_corr_moment(&coarse), e_corr_moment(&fine));
    Ok(HalfLineSummary {
        b,
        e1d_star: rich(coarse.energy, fine.energy),
        alpha_star: rich(coarse.alpha, fine.alpha),
        f0_at_0: rich(coarse.values[0], fine.values[0]),
        e_corr_integral: ci,
        e_corr_closed: cc,
        e_corr_diff: (ci - cc).abs(),
        e_corr_moment: cm,
        e_corr_moment_diff: (ci - cm).abs(),
        ell_used: coarse.params.ell,
        h,
        converged,
        energies,
    })
}

/// Potential and cost functions of a converged profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTables {
    pub t: Vec<f64>,
    #[serde(rename = "F")]
    pub f_pot: Vec<f64>,
    #[serde(rename = "K")]
    pub k_cost: Vec<f64>,
    pub d_ell: f64,
    pub ell_bar: f64,
    pub t_m: f64,
    pub k_min: f64,
    /// Total integral of the potential density; zero at a stationary phase.
    pub closure: f64,
}

/// Builds `F` and `K = (1 - d_ell) f^2 + F` with `d_ell = ell^-4`.
pub fn cost_tables(prof: &Profile1D) -> CostTables {
    cost_tables_with(prof, prof.params.ell.powi(-4))
}

/// Half-line surrogate: `K = f^2 + F` (no safety factor).
pub fn cost_tables_half_line(prof: &Profile1D) -> CostTables {
    cost_tables_with(prof, 0.0)
}

/// Builds the tables with an explicit safety factor `d_ell`.
///
/// `F` is accumulated forward from `t = 0` up to its minimum and backward
/// from `t = ell` beyond it, so both endpoint values vanish exactly and the
/// exponentially small tail keeps its relative accuracy.
pub fn cost_tables_with(prof: &Profile1D, d_ell: f64) -> CostTables {
    let p = &prof.params;
    let n = p.n;
    let h = p.h();
    let ek = p.eps * p.k;
    let t: Vec<f64> = (0..n).map(|i| p.t(i)).collect();
    let q: Vec<f64> = (0..n)
        .map(|i| {
            let ti = t[i];
            2.0 * (ti + prof.alpha - 0.5 * ek * ti * ti) / (1.0 - ek * ti) * prof.values[i].powi(2)
        })
        .collect();
    let mut fwd = vec![0.0; n];
    for i in 1..n {
        fwd[i] = fwd[i - 1] + 0.5 * h * (q[i - 1] + q[i]);
    }
    let closure = fwd[n - 1];
    let mut bwd = vec![0.0; n];
    for i in (0..n - 1).rev() {
        bwd[i] = bwd[i + 1] - 0.5 * h * (q[i] + q[i + 1]);
    }
    let m = (0..n).fold(0, |m, i| if fwd[i] < fwd[m] { i } else { m });
    let f_pot: Vec<f64> = (0..n).map(|i| if i <= m { fwd[i] } else { bwd[i] }).collect();
    let k_cost: Vec<f64> = (0..n).map(|i| (1.0 - d_ell) * prof.values[i].powi(2) + f_pot[i]).collect();
    let thr = p.ell.powi(3) * prof.values[n - 1];
    let ell_bar = (0..n).rev().find(|&i| prof.values[i] >= thr).map_or(0.0, |i| t[i]);
    let im = (0..n).fold(0, |m, i| if k_cost[i] < k_cost[m] { i } else { m });
    CostTables { t_m: t[im], k_min: k_cost[im], t, f_pot, k_cost, d_ell, ell_bar, closure }
}

/// A failed pointwise check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub t: f64,
    pub value: f64,
}

/// Outcome of [`check_cost_positivity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub min_k_on_window: f64,
    pub min_second_difference: f64,
    pub k_min: f64,
    pub t_m: f64,
    pub ell_bar: f64,
    pub violations: Vec<Violation>,
}

impl CostReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Positivity window, convexity and tail negativity of `K`.
///
/// With `interval = true` the tables are those of [`cost_tables`] and `K`
/// must dip below zero in `(ell_bar, ell]`; otherwise they are the
/// half-line surrogate and `K` must be nonnegative everywhere.
pub fn check_cost_positivity(ct: &CostTables, prof: &Profile1D, interval: bool) -> CostReport {
    let n = ct.t.len();
    let mut violations = Vec::new();
    let mut min_win = f64::INFINITY;
    for i in 0..n {
        let in_window = !interval || ct.t[i] <= ct.ell_bar;
        if in_window {
            min_win = min_win.min(ct.k_cost[i]);
            if ct.k_cost[i] < -1e-10 {
                violations.push(Violation { check: "K >= 0".into(), t: ct.t[i], value: ct.k_cost[i] });
            }
        }
    }
    let mut min_d2 = f64::INFINITY;
    for i in 1..n - 1 {
        let d2 = ct.k_cost[i + 1] - 2.0 * ct.k_cost[i] + ct.k_cost[i - 1];
        min_d2 = min_d2.min(d2);
        if d2 < -1e-8 {
            violations.push(Violation { check: "K convex".into(), t: ct.t[i], value: d2 });
        }
    }
    if interval {
        if !(ct.k_min < 0.0) {
            violations.push(Violation { check: "K has a negative minimum".into(), t: ct.t_m, value: ct.k_min });
        }
        if !(ct.t_m > ct.ell_bar && ct.t_m <= prof.params.ell) {
            violations.push(Violation { check: "t_m in (ell_bar, ell]".into(), t: ct.t_m, value: ct.k_min });
        }
    } else if !(ct.k_cost[0] > 0.0) {
        violations.push(Violation { check: "K(0) > 0".into(), t: 0.0, value: ct.k_cost[0] });
    }
    CostReport {
        min_k_on_window: min_win,
        min_second_difference: min_d2,
        k_min: ct.k_min,
        t_m: ct.t_m,
        ell_bar: ct.ell_bar,
        violations,
    }
}

/// One row of [`curvature_expansion_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRow {
    pub eps: f64,
    pub ell: f64,
    pub e1d_k: f64,
    pub predicted: f64,
    pub difference: f64,
}

/// Table and fitted convergence exponent of the curvature expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTable {
    pub b: f64,
    pub k: f64,
    pub e_corr: f64,
    pub rows: Vec<CurvatureRow>,
    /// Least-squares slope of `log|difference|` against `log eps`.
    pub exponent: Option<f64>,
}

/// Compares `E_k` with `E_0 - eps k E_corr` at `ell = c1 |log eps|`.
///
/// `E_0` is computed on the same interval and grid as `E_k`, so the
/// truncation and discretization errors cancel in the difference.
pub fn curvature_expansion_check(
    b: f64,
    k: f64,
    eps_list: &[f64],
    c1: f64,
    e_corr: f64,
    h: f64,
) -> Result<CurvatureTable> {
    if eps_list.iter().any(|&e| !(e > 0.0 && e <= 0.1)) {
        return Err(Error::InvalidParameter("eps values must lie in (0, 0.1]".into()));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let ell = c1 * eps.ln().abs();
        let pk = Params1D::with_spacing(b, k, eps, ell, h)?;
        let p0 = Params1D::with_spacing(b, 0.0, 0.0, ell, h)?;
        let ek = optimize_alpha(&pk)?.energy;
        let e0 = optimize_alpha(&p0)?.energy;
        let predicted = e0 - eps * k * e_corr;
        rows.push(CurvatureRow { eps, ell, e1d_k: ek, predicted, difference: ek - predicted });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.difference != 0.0)
        .map(|r| (r.eps.ln(), r.difference.abs().ln()))
        .collect();
    let exponent = if pts.len() >= 2 { Some(fit_line(&pts).0) } else { None };
    Ok(CurvatureTable { b, k, e_corr, rows, exponent })
}

/// Least-squares line `y = a x + c`; returns `(a, c)`.
pub(crate) fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// Fitted decay envelopes of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub skipped: bool,
    pub message: String,
    /// Largest `c` with `c exp(-(t + 1/2)^2 / 2) <= f(t)` on the grid.
    pub c_lower: f64,
    /// Smallest `c'` with `f(t) <= c' exp(-(t + alpha)^2 / 2)` on the grid.
    pub c_upper: f64,
    /// Smallest `C` with `|f'(t)| <= C exp(-t^2 / 4)` at cell midpoints.
    pub c_derivative: f64,
    pub passed: bool,
}

/// Fits the Gaussian decay envelopes and checks the constants lie in `(0, 100]`.
pub fn decay_check(prof: &Profile1D) -> DecayReport {
    if prof.degenerate || prof.values.iter().all(|&v| v == 0.0) {
        return DecayReport {
            skipped: true,
            message: "trivial profile, decay check skipped".into(),
            c_lower: 0.0,
            c_upper: 0.0,
            c_derivative: 0.0,
            passed: true,
        };
    }
    let p = &prof.params;
    let h = p.h();
    let f = &prof.values;
    let mut c_lower = f64::INFINITY;
    let mut c_upper = 0.0f64;
    for (i, &fi) in f.iter().enumerate() {
        let t = p.t(i);
        // Ratios taken in log space so that the deep tail does not overflow.
        c_lower = c_lower.min((fi.ln() + 0.5 * (t + 0.5).powi(2)).exp());
        c_upper = c_upper.max((fi.ln() + 0.5 * (t + prof.alpha).powi(2)).exp());
    }
    let mut c_der = 0.0f64;
    for i in 0..f.len() - 1 {
        let tm = p.t(i) + 0.5 * h;
        let d = ((f[i + 1] - f[i]) / h).abs();
        if d > 0.0 {
            c_der = c_der.max((d.ln() + 0.25 * tm * tm).exp());
        }
    }
    let ok = |c: f64| c > 0.0 && c <= 100.0;
    let passed = ok(c_lower) && ok(c_upper) && ok(c_der);
    DecayReport {
        skipped: false,
        message: if passed { "envelopes fitted".into() } else { "envelope constant out of range".into() },
        c_lower,
        c_upper,
        c_derivative: c_der,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_profile_has_zero_energy() {
        let p = Params1D::flat(1.5, 12.0, 241).unwrap();
        for a in [-3.0, -0.5, 2.0] {
            assert_eq!(energy_1d(&vec![0.0; 241], a, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_profile_matches_hand_integral() {
        let (b, ell, c, a) = (1.5, 3.0, 0.7, -0.4);
        let p = Params1D::flat(b, ell, 3001).unwrap();
        let e = energy_1d(&vec![c; 3001], a, &p).unwrap();
        let poly = ((ell + a).powi(3) - a.powi(3)) / 3.0;
        let exact = c * c * poly - (2.0 * c * c - c.powi(4)) / (2.0 * b) * ell;
        // Trapezoid error for the quadratic (t+a)^2 is h^2 ell / 6 times c^2.
        let h = p.h();
        assert!((e - exact - c * c * h * h * ell / 6.0).abs() < 1e-12, "{e} vs {exact}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Params1D::flat(1.5, 12.0, 8).is_err());
        assert!(Params1D::flat(1.5, -1.0, 100).is_err());
        assert!(matches!(Params1D::new(1.5, 1.0, 0.1, 12.0, 100), Err(Error::DegenerateWeight(_))));
        let p = Params1D::flat(1.5, 12.0, 100).unwrap();
        assert!(matches!(energy_1d(&[0.0; 10], 0.0, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tridiagonal_solver_matches_direct_product() {
        let d = vec![4.0, 5.0, 6.0, 3.0];
        let o = vec![-1.0, -2.0, 0.5];
        let x = vec![1.0, -2.0, 0.25, 3.0];
        let mut rhs = vec![0.0; 4];
        for i in 0..4 {
            rhs[i] = d[i] * x[i];
            if i > 0 {
                rhs[i] += o[i - 1] * x[i - 1];
            }
            if i < 3 {
                rhs[i] += o[i] * x[i + 1];
            }
        }
        let y = solve_spd_tridiag(&d, &o, &rhs).unwrap();
        for i in 0..4 {
            assert!((y[i] - x[i]).abs() < 1e-14);
        }
        assert!(solve_spd_tridiag(&[1.0, -1.0], &[0.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn large_alpha_gives_zero_branch() {
        let p = Params1D::flat(1.2, 12.0, 601).unwrap();
        let prof = solve_profile_fixed_alpha(10.0, &p).unwrap();
        assert!(prof.degenerate);
        assert_eq!(prof.energy, 0.0);
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let v = vec![1.0, 3.0, 2.0];
        assert_eq!(interp(&v, 0.5, 0.5), 3.0);
        assert_eq!(interp(&v, 0.5, 0.25), 2.0);
        assert_eq!(interp(&v, 0.5, 5.0), 2.0);
    }
}
