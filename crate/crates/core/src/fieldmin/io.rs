//! Field dumps: CSV `x,y,re,im,abs` plus JSON metadata.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use super::mesh::Mesh2D;
use crate::error::{Error, Result};

/// Writes the nodal field as CSV with 17 significant digits.
pub fn write_field_csv(path: &Path, mesh: &Mesh2D, psi: &[Complex64]) -> Result<()> {
    if psi.len() != mesh.nodes.len() {
        return Err(Error::DimensionMismatch { expected: mesh.nodes.len(), got: psi.len() });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "re", "im", "abs"])?;
    for (p, z) in mesh.nodes.iter().zip(psi) {
        w.write_record([p[0], p[1], z.re, z.im, z.norm()].map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata written next to a field dump.
#[derive(Serialize)]
struct FieldMeta<'a, P: Serialize> {
    mesh_hash: String,
    nodes: usize,
    cells: usize,
    h: f64,
    params: &'a P,
}

/// Writes `{mesh_hash, nodes, cells, h, params}` as pretty JSON.
pub fn write_field_meta<P: Serialize>(path: &Path, mesh: &Mesh2D, params: &P) -> Result<()> {
    let meta = FieldMeta { mesh_hash: mesh.hash(), nodes: mesh.nodes.len(), cells: mesh.cells.len(), h: mesh.h, params };
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    writeln!(f)?;
    Ok(())
}
