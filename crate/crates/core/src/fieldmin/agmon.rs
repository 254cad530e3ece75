//! Exponential decay of `|ψ|` away from the OUTER boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mesh::{BoundaryTag, Mesh2D};
use crate::error::{Error, Result};
use crate::profile1d::fit_line;

/// Binned maxima of `|ψ|` and the fitted exponential rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    /// Bin centres (distance to the OUTER boundary).
    pub distance: Vec<f64>,
    /// Largest `|ψ|` in each bin.
    pub max_abs: Vec<f64>,
    /// Fitted rate `c` in `max|ψ| ≈ C e^{-c d}`; `None` when undefined.
    pub rate: Option<f64>,
    /// Smallest `C` with `max|ψ| <= C e^{-c d}` over the fit window.
    pub envelope: Option<f64>,
    /// Fit window `[2, depth - 2]`.
    pub window: (f64, f64),
    pub flagged: bool,
    pub message: String,
}

impl DecayTable {
    /// Rate above `threshold`.
    pub fn passes(&self, threshold: f64) -> bool {
        self.rate.is_some_and(|r| r > threshold)
    }
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let s = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
    (p[0] - a[0] - s * d[0]).hypot(p[1] - a[1] - s * d[1])
}

/// Distance of every node to the union of OUTER edges.
pub fn outer_distance(mesh: &Mesh2D) -> Vec<f64> {
    let segs: Vec<([f64; 2], [f64; 2])> = mesh
        .boundary
        .iter()
        .filter(|e| e.tag == BoundaryTag::Outer)
        .map(|e| (mesh.nodes[e.a], mesh.nodes[e.b]))
        .collect();
    mesh.nodes
        .iter()
        .map(|&p| segs.iter().map(|&(a, b)| dist_to_segment(p, a, b)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Bins `max|ψ|` by distance to the OUTER boundary (bin width 0.5) and fits
/// `log max|ψ|` linearly on `[2, depth - 2]`, `depth` being the largest distance.
pub fn agmon_decay_profile(psi: &[Complex64], mesh: &Mesh2D) -> Result<DecayTable> {
    if psi.len() != mesh.nodes.len() {
        return Err(Error::DimensionMismatch { expected: mesh.nodes.len(), got: psi.len() });
    }
    let dist = outer_distance(mesh);
    let depth = dist.iter().copied().fold(0.0, f64::max);
    let window = (2.0, depth - 2.0);
    let width = 0.5;
    let nb = (depth / width).ceil().max(1.0) as usize;
    let mut max_abs = vec![0.0f64; nb];
    for (d, z) in dist.iter().zip(psi) {
        let k = ((d / width) as usize).min(nb - 1);
        max_abs[k] = max_abs[k].max(z.norm());
    }
    let distance: Vec<f64> = (0..nb).map(|k| (k as f64 + 0.5) * width).collect();
    let pts: Vec<(f64, f64)> = distance
        .iter()
        .zip(&max_abs)
        .filter(|(d, m)| **d >= window.0 && **d <= window.1 && **m > 0.0)
        .map(|(d, m)| (*d, m.ln()))
        .collect();
    if window.1 <= window.0 {
        return Err(Error::Validation(format!("decay fit window [2, {:.3}] is empty", window.1)));
    }
    if max_abs.iter().all(|&m| m == 0.0) || pts.len() < 2 {
        return Ok(DecayTable {
            distance,
            max_abs,
            rate: None,
            envelope: None,
            window,
            flagged: true,
            message: "field vanishes in the fit window; rate undefined".into(),
        });
    }
    let (slope, _) = fit_line(&pts);
    let rate = -slope;
    let envelope = pts.iter().map(|(d, l)| (l + rate * d).exp()).fold(0.0, f64::max);
    Ok(DecayTable {
        distance,
        max_abs,
        rate: Some(rate),
        envelope: Some(envelope),
        window,
        flagged: false,
        message: format!("fitted rate {rate:.4}"),
    })
}
