//! Three-term energy expansion for piecewise-smooth domains and the
//! Gauss-Bonnet check with corner defects.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile1d::HalfLineSummary;

/// Largest Gauss-Bonnet residual accepted by [`expand_energy`].
pub const GAUSS_BONNET_GATE: f64 = 1e-6;

/// Curvature along a smooth arc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curvature {
    /// Constant curvature (a segment for 0, a circular arc otherwise).
    Const { value: f64 },
    /// Values at equally spaced arclength points, both ends included.
    Samples { values: Vec<f64> },
}

/// A smooth boundary arc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub length: f64,
    pub curvature: Curvature,
}

impl Arc {
    pub fn segment(length: f64) -> Self {
        Self { length, curvature: Curvature::Const { value: 0.0 } }
    }

    pub fn circular(length: f64, curvature: f64) -> Self {
        Self { length, curvature: Curvature::Const { value: curvature } }
    }

    /// `∫ 𝔎 dσ`: exact for constant curvature, Simpson for samples.
    pub fn total_curvature(&self) -> Result<f64> {
        match &self.curvature {
            Curvature::Const { value } => Ok(value * self.length),
            Curvature::Samples { values } => simpson(values, self.length),
        }
    }
}

/// Composite Simpson rule on equally spaced samples over `[0, length]`;
/// an even number of intervals is required past two samples, otherwise the
/// last three intervals use the 3/8 rule.
fn simpson(v: &[f64], length: f64) -> Result<f64> {
    let n = v.len();
    if n < 2 {
        return Err(Error::Validation("curvature samples need at least two values".into()));
    }
    let m = n - 1;
    let h = length / m as f64;
    if m == 1 {
        return Ok(0.5 * h * (v[0] + v[1]));
    }
    let simpson_on = |a: usize, b: usize| -> f64 {
        let mut s = v[a] + v[b];
        for i in a + 1..b {
            s += if (i - a) % 2 == 1 { 4.0 * v[i] } else { 2.0 * v[i] };
        }
        s * h / 3.0
    };
    if m % 2 == 0 {
        Ok(simpson_on(0, m))
    } else {
        let head = if m > 3 { simpson_on(0, m - 3) } else { 0.0 };
        let k = m - 3;
        Ok(head + 3.0 * h / 8.0 * (v[k] + 3.0 * v[k + 1] + 3.0 * v[k + 2] + v[k + 3]))
    }
}

/// A piecewise-smooth boundary: arcs in order, with `corners[j]` the
/// opening angle at the junction after `arcs[j]`. No corners means every
/// junction is smooth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub arcs: Vec<Arc>,
    #[serde(default)]
    pub corners: Vec<f64>,
}

impl DomainSpec {
    /// Square of side `a`.
    pub fn square(a: f64) -> Self {
        Self { arcs: vec![Arc::segment(a); 4], corners: vec![0.5 * PI; 4] }
    }

    /// Disk of radius `r`.
    pub fn disk(r: f64) -> Self {
        Self { arcs: vec![Arc::circular(2.0 * PI * r, 1.0 / r)], corners: Vec::new() }
    }

    /// Half-disk of radius `r`.
    pub fn half_disk(r: f64) -> Self {
        Self { arcs: vec![Arc::segment(2.0 * r), Arc::circular(PI * r, 1.0 / r)], corners: vec![0.5 * PI; 2] }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Structural checks: arcs present, positive lengths, one corner per
    /// junction (or none), angles in `(0, 2π)`.
    pub fn validate(&self) -> Result<()> {
        if self.arcs.is_empty() {
            return Err(Error::Validation("domain has no boundary arcs".into()));
        }
        if let Some(a) = self.arcs.iter().find(|a| !(a.length > 0.0 && a.length.is_finite())) {
            return Err(Error::Validation(format!("arc length {} must be positive", a.length)));
        }
        if !self.corners.is_empty() && self.corners.len() != self.arcs.len() {
            return Err(Error::Validation(format!(
                "open boundary chain: {} arcs but {} corners",
                self.arcs.len(),
                self.corners.len()
            )));
        }
        if let Some(b) = self.corners.iter().find(|&&b| !(b > 0.0 && b < 2.0 * PI)) {
            return Err(Error::Validation(format!("corner angle {b} outside (0, 2π)")));
        }
        Ok(())
    }

    pub fn perimeter(&self) -> f64 {
        self.arcs.iter().map(|a| a.length).sum()
    }

    /// `∫ 𝔎 dσ` over all arcs.
    pub fn total_curvature(&self) -> Result<f64> {
        self.arcs.iter().map(Arc::total_curvature).sum()
    }
}

/// `|∫ 𝔎 dσ + Σ (π - β_j) - 2π|`.
pub fn gauss_bonnet_check(spec: &DomainSpec) -> Result<f64> {
    spec.validate()?;
    let defects: f64 = spec.corners.iter().map(|b| PI - b).sum();
    Ok((spec.total_curvature()? + defects - 2.0 * PI).abs())
}

/// Where a corner energy comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerSource {
    Computed,
    Conjecture,
}

/// `E_corner,β` for one angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerEnergy {
    pub beta: f64,
    pub value: f64,
    pub source: CornerSource,
}

/// Conjectured values `-(π - β) E_corr` for every corner of a spec.
pub fn conjecture_energies(spec: &DomainSpec, e_corr: f64) -> Vec<CornerEnergy> {
    spec.corners
        .iter()
        .map(|&beta| CornerEnergy { beta, value: -(PI - beta) * e_corr, source: CornerSource::Conjecture })
        .collect()
}

/// The expansion `|∂Ω| E¹ᴰ⋆ / ε - E_corr ∫𝔎 + Σ E_corner,β_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub eps: f64,
    pub b: f64,
    pub perimeter: f64,
    pub leading: f64,
    pub curvature_term: f64,
    pub corner_term: f64,
    pub corners: Vec<CornerEnergy>,
    /// `curvature_term + corner_term`.
    pub order_one: f64,
    pub total: f64,
    /// `-2π E_corr`, the order-one term of a smooth domain.
    pub smooth_equivalent: f64,
    /// `Σ [(π - β_j) E_corr + E_corner,β_j]`; zero for conjectured values.
    pub conjecture_excess: f64,
    /// `|order_one - (smooth_equivalent + conjecture_excess)|`.
    pub substitution_residual: f64,
    pub gauss_bonnet_residual: f64,
}

/// Assembles the expansion; refuses specs failing the Gauss-Bonnet gate
/// and corners without a supplied energy (matched to `1e-9` in `β`).
pub fn expand_energy(
    spec: &DomainSpec,
    eps: f64,
    summary: &HalfLineSummary,
    corner_energies: &[CornerEnergy],
) -> Result<ExpansionReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    let residual = gauss_bonnet_check(spec)?;
    if residual > GAUSS_BONNET_GATE {
        return Err(Error::Validation(format!(
            "boundary does not close up: Gauss-Bonnet residual {residual:.3e} > {GAUSS_BONNET_GATE:e}"
        )));
    }
    let e_corr = summary.e_corr();
    let corners = spec
        .corners
        .iter()
        .map(|&beta| {
            corner_energies
                .iter()
                .find(|c| (c.beta - beta).abs() <= 1e-9)
                .copied()
                .ok_or_else(|| Error::Validation(format!("no corner energy supplied for β = {beta}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let perimeter = spec.perimeter();
    let leading = perimeter * summary.e1d_star / eps;
    let curvature_term = -e_corr * spec.total_curvature()? + 0.0;
    let corner_term: f64 = corners.iter().map(|c| c.value).sum();
    let order_one = curvature_term + corner_term;
    let smooth_equivalent = -2.0 * PI * e_corr;
    let conjecture_excess: f64 = corners.iter().map(|c| (PI - c.beta) * e_corr + c.value).sum();
    Ok(ExpansionReport {
        eps,
        b: summary.b,
        perimeter,
        leading,
        curvature_term,
        corner_term,
        corners,
        order_one,
        total: leading + order_one,
        smooth_equivalent,
        conjecture_excess,
        substitution_residual: (order_one - smooth_equivalent - conjecture_excess).abs(),
        gauss_bonnet_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let exact = 2.0 + 2.0 - 16.0 / 3.0 + 2.0;
        for n in [3, 4, 5, 8, 11] {
            let v: Vec<f64> = (0..n).map(|i| f(2.0 * i as f64 / (n - 1) as f64)).collect();
            assert!((simpson(&v, 2.0).unwrap() - exact).abs() < 1e-12, "n = {n}");
        }
        assert!(simpson(&[1.0], 1.0).is_err());
    }

    #[test]
    fn structural_validation() {
        let mut s = DomainSpec::square(1.0);
        s.corners.pop();
        assert!(s.validate().is_err());
        assert!(DomainSpec { arcs: vec![], corners: vec![] }.validate().is_err());
        assert!(DomainSpec { arcs: vec![Arc::segment(-1.0)], corners: vec![] }.validate().is_err());
        assert!(DomainSpec { arcs: vec![Arc::segment(1.0)], corners: vec![7.0] }.validate().is_err());
    }

    #[test]
    fn json_schema() {
        let s = DomainSpec::from_json(
            r#"{"arcs": [{"length": 6.283185307179586, "curvature": {"kind": "samples", "values": [1, 1, 1]}}]}"#,
        )
        .unwrap();
        assert!(gauss_bonnet_check(&s).unwrap() < 1e-12);
        let v = serde_json::to_value(DomainSpec::half_disk(1.0)).unwrap();
        assert_eq!(v["arcs"][1]["curvature"]["kind"], "const");
        assert_eq!(v["corners"].as_array().unwrap().len(), 2);
    }
}
