//! Preconditioned nonlinear conjugate gradient (Polak-Ribière with restarts).

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::energy::{real_dot, BoundarySpec, ComplexField, Functional, PotentialField, Quartic};
use super::mesh::Mesh2D;
use crate::error::{Error, Result};

/// Stopping rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Target Euclidean norm of the free-node gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Forced steepest-descent restart period.
    pub restart: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50_000, restart: 500 }
    }
}

/// Summary of a minimization run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub iterations: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub line_search_failures: usize,
    pub converged: bool,
    /// Wall time in seconds (informational; excluded from deterministic outputs).
    #[serde(skip)]
    pub wall_time: f64,
}

/// Minimizer of the quartic on `τ > 0`, or `None` if it is unbounded or
/// nonincreasing.
fn quartic_step(c: &Quartic) -> Option<f64> {
    let value = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])));
    // Stationary points: roots of 4 c4 t^3 + 3 c3 t^2 + 2 c2 t + c1.
    let roots = cubic_roots(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]);
    let mut best: Option<(f64, f64)> = None;
    for t in roots.into_iter().filter(|&t| t > 0.0 && t.is_finite()) {
        let v = value(t);
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((t, v));
        }
    }
    best.map(|(t, _)| t)
}

/// Real roots of `a x^3 + b x^2 + c x + d`, polished by Newton steps.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = Vec::new();
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            if c != 0.0 {
                roots.push(-d / c);
            }
        } else {
            let disc = c * c - 4.0 * b * d;
            if disc >= 0.0 {
                let q = -0.5 * (c + c.signum() * disc.sqrt());
                if q != 0.0 {
                    roots.push(q / b);
                    roots.push(d / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
    } else {
        let (p1, p2, p3) = (b / a, c / a, d / a);
        let q = (p1 * p1 - 3.0 * p2) / 9.0;
        let r = (2.0 * p1.powi(3) - 9.0 * p1 * p2 + 27.0 * p3) / 54.0;
        if r * r < q.powi(3) {
            let th = (r / q.powi(3).sqrt()).clamp(-1.0, 1.0).acos();
            let sq = -2.0 * q.sqrt();
            for k in 0..3 {
                roots.push(sq * ((th + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - p1 / 3.0);
            }
        } else {
            let aa = -r.signum() * (r.abs() + (r * r - q.powi(3)).sqrt()).cbrt();
            let bb = if aa != 0.0 { q / aa } else { 0.0 };
            roots.push(aa + bb - p1 / 3.0);
        }
    }
    roots
        .into_iter()
        .map(|mut x| {
            for _ in 0..3 {
                let f = ((a * x + b) * x + c) * x + d;
                let df = (3.0 * a * x + 2.0 * b) * x + c;
                if df != 0.0 {
                    x -= f / df;
                }
            }
            x
        })
        .collect()
}

impl Functional {
    /// Minimizes from `initial` (Dirichlet data is imposed first).
    pub fn minimize(&self, initial: &[Complex64], opts: &MinimizeOptions) -> Result<(ComplexField, f64, MinimizeReport)> {
        if initial.len() != self.num_nodes() {
            return Err(Error::DimensionMismatch { expected: self.num_nodes(), got: initial.len() });
        }
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
        }
        let start = Instant::now();
        let mut psi = initial.to_vec();
        self.impose(&mut psi);
        let pinv: Vec<f64> = self.precond.iter().map(|&p| if p > 0.0 { 1.0 / p } else { 1.0 }).collect();
        let precondition = |g: &[Complex64]| -> ComplexField { g.iter().zip(&pinv).map(|(x, p)| x * *p).collect() };
        let mut energy = self.energy(&psi);
        let mut g = self.gradient(&psi);
        let mut z = precondition(&g);
        let mut gz = real_dot(&g, &z);
        let mut dir: ComplexField = z.iter().map(|x| -x).collect();
        let mut gnorm = real_dot(&g, &g).sqrt();
        let mut failures = 0;
        let mut consecutive = 0;
        let mut since_restart = 0;
        let mut it = 0;
        while it < opts.max_iter && gnorm >= opts.tol {
            it += 1;
            let mut q = self.line_quartic(&psi, &dir);
            if q[1] >= 0.0 {
                dir = z.iter().map(|x| -x).collect();
                q = self.line_quartic(&psi, &dir);
                since_restart = 0;
            }
            // Exact quartic minimizer as the trial step, Armijo backtracking as safeguard.
            let value = |t: f64| q[0] + t * (q[1] + t * (q[2] + t * (q[3] + t * q[4])));
            let step = quartic_step(&q).and_then(|t0| {
                let mut t = t0;
                for _ in 0..40 {
                    if value(t) <= q[0] + 1e-4 * t * q[1] {
                        return Some(t);
                    }
                    t *= 0.5;
                }
                None
            });
            let Some(tau) = step else {
                failures += 1;
                consecutive += 1;
                if consecutive >= 3 {
                    break;
                }
                dir = z.iter().map(|x| -x).collect();
                since_restart = 0;
                continue;
            };
            consecutive = 0;
            for (p, d) in psi.iter_mut().zip(&dir) {
                *p += d * tau;
            }
            energy = q[0] + tau * (q[1] + tau * (q[2] + tau * (q[3] + tau * q[4])));
            let g_new = self.gradient(&psi);
            let z_new = precondition(&g_new);
            let gz_new = real_dot(&g_new, &z_new);
            let beta = if since_restart + 1 >= opts.restart {
                since_restart = 0;
                0.0
            } else {
                since_restart += 1;
                let diff: ComplexField = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
                (real_dot(&g_new, &diff) / gz).max(0.0)
            };
            for (d, zn) in dir.iter_mut().zip(&z_new) {
                *d = -zn + *d * beta;
            }
            g = g_new;
            z = z_new;
            gz = gz_new;
            gnorm = real_dot(&g, &g).sqrt();
        }
        let final_energy = self.energy(&psi);
        debug_assert!((final_energy - energy).abs() <= 1e-8 * (1.0 + energy.abs()));
        let report = MinimizeReport {
            iterations: it,
            energy: final_energy,
            grad_norm: gnorm,
            line_search_failures: failures,
            converged: gnorm < opts.tol,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((psi, final_energy, report))
    }
}

/// Minimizes the energy on `mesh` from `initial`.
pub fn minimize(
    mesh: &Mesh2D,
    initial: &[Complex64],
    a: &PotentialField,
    b: f64,
    bc: &BoundarySpec,
    tol: f64,
) -> Result<(ComplexField, f64, MinimizeReport)> {
    let f = Functional::new(mesh, a, b, bc)?;
    f.minimize(initial, &MinimizeOptions { tol, ..MinimizeOptions::default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_roots_recover_known_roots() {
        let mut r = cubic_roots(2.0, -4.0, -22.0, 24.0);
        r.sort_by(f64::total_cmp);
        for (x, e) in r.iter().zip([-3.0, 1.0, 4.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        let r = cubic_roots(1.0, 0.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_step_finds_global_minimum() {
        // (t - 2)^2 (t + 1)^2 = t^4 - 2t^3 - 3t^2 + 4t + 4; minima at t = -1 and 2.
        let q = [4.0, 4.0, -3.0, -2.0, 1.0];
        assert!((quartic_step(&q).unwrap() - 2.0).abs() < 1e-12);
        let q = [4.0, -4.0, -3.0, 2.0, 1.0]; // reflected: minima at t = 1 and -2
        assert!((quartic_step(&q).unwrap() - 1.0).abs() < 1e-12);
    }
}
