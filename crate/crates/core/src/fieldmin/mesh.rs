//! Triangle meshes with tagged boundary edges.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::error::{Error, Result};

/// Boundary segment labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryTag {
    Outer,
    Inner,
    SideMinus,
    SidePlus,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [Self::Outer, Self::Inner, Self::SideMinus, Self::SidePlus];

    pub fn name(self) -> &'static str {
        match self {
            Self::Outer => "OUTER",
            Self::Inner => "INNER",
            Self::SideMinus => "SIDE_MINUS",
            Self::SidePlus => "SIDE_PLUS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// A boundary edge with its tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Triangulation with positively oriented cells and tagged boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Nominal spacing.
    pub h: f64,
}

/// Interior or boundary edge with its P1 weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshEdge {
    pub i: usize,
    pub j: usize,
    /// Sum of `cot(opposite angle) / 2` over adjacent cells.
    pub stiffness: f64,
    /// Sum of `area / 3` over adjacent cells.
    pub mass: f64,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Signed area of the triangle `p, q, r`.
pub fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

impl Mesh2D {
    /// Builds a mesh and checks orientation and the boundary partition.
    pub fn new(nodes: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>, h: f64) -> Result<Self> {
        let mesh = Self { nodes, cells, boundary, h };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Checks cell orientation and that tagged edges are exactly the boundary edges.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= n) {
                return Err(Error::Geometry(format!("cell {c} references a missing node")));
            }
            let a = signed_area(self.nodes[cell[0]], self.nodes[cell[1]], self.nodes[cell[2]]);
            if !(a > 0.0) {
                return Err(Error::MeshQuality(format!("cell {c} is not positively oriented")));
            }
        }
        let free = self.free_boundary_edges();
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary {
            *tagged.entry(key(e.a, e.b)).or_default() += 1;
        }
        if tagged.values().any(|&c| c != 1) {
            return Err(Error::Geometry("a boundary edge carries more than one tag".into()));
        }
        if free.len() != tagged.len() || free.iter().any(|e| !tagged.contains_key(e)) {
            return Err(Error::Geometry(format!(
                "tagged edges ({}) do not partition the boundary ({} edges)",
                tagged.len(),
                free.len()
            )));
        }
        Ok(())
    }

    /// Edges that belong to exactly one cell, in first-seen order.
    fn free_boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        let mut order = Vec::new();
        for c in &self.cells {
            for k in 0..3 {
                let e = key(c[k], c[(k + 1) % 3]);
                let cnt = count.entry(e).or_insert(0);
                if *cnt == 0 {
                    order.push(e);
                }
                *cnt += 1;
            }
        }
        order.into_iter().filter(|e| count[e] == 1).collect()
    }

    /// Total area.
    pub fn area(&self) -> f64 {
        self.cells.iter().map(|c| self.cell_area(c)).sum()
    }

    pub fn cell_area(&self, c: &[usize; 3]) -> f64 {
        signed_area(self.nodes[c[0]], self.nodes[c[1]], self.nodes[c[2]])
    }

    /// Smallest interior angle over all cells, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut m = f64::INFINITY;
        for c in &self.cells {
            for k in 0..3 {
                let p = self.nodes[c[k]];
                let q = self.nodes[c[(k + 1) % 3]];
                let r = self.nodes[c[(k + 2) % 3]];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
                m = m.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        m
    }

    /// Fails when the minimum angle is below `min_deg`.
    pub fn check_quality(&self, min_deg: f64) -> Result<()> {
        let m = self.min_angle_deg();
        if m < min_deg {
            return Err(Error::MeshQuality(format!("minimum angle {m:.2} deg below {min_deg} deg")));
        }
        Ok(())
    }

    /// Unique edges with cotangent stiffness and lumped edge mass.
    pub fn edges(&self) -> Vec<MeshEdge> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<MeshEdge> = Vec::new();
        for c in &self.cells {
            let area = self.cell_area(c);
            for k in 0..3 {
                let i = c[k];
                let j = c[(k + 1) % 3];
                let o = c[(k + 2) % 3];
                let (pi, pj, po) = (self.nodes[i], self.nodes[j], self.nodes[o]);
                let u = [pi[0] - po[0], pi[1] - po[1]];
                let v = [pj[0] - po[0], pj[1] - po[1]];
                let cot = (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]);
                let idx = *index.entry(key(i, j)).or_insert_with(|| {
                    edges.push(MeshEdge { i, j, stiffness: 0.0, mass: 0.0 });
                    edges.len() - 1
                });
                edges[idx].stiffness += 0.5 * cot;
                edges[idx].mass += area / 3.0;
            }
        }
        edges
    }

    /// Per-node tag list (a node may touch two tags at a corner).
    pub fn node_tags(&self) -> Vec<Vec<BoundaryTag>> {
        let mut tags = vec![Vec::new(); self.nodes.len()];
        for e in &self.boundary {
            for v in [e.a, e.b] {
                if !tags[v].contains(&e.tag) {
                    tags[v].push(e.tag);
                }
            }
        }
        tags.iter_mut().for_each(|t| t.sort());
        tags
    }

    /// Content hash of nodes, cells and tags.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.nodes {
            hasher.update(p[0].to_bits().to_le_bytes());
            hasher.update(p[1].to_bits().to_le_bytes());
        }
        for c in &self.cells {
            for v in c {
                hasher.update((*v as u64).to_le_bytes());
            }
        }
        for e in &self.boundary {
            hasher.update((e.a as u64).to_le_bytes());
            hasher.update((e.b as u64).to_le_bytes());
            hasher.update(e.tag.name().as_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Structured triangulation of `[x0, x1] x [y0, y1]`; the bottom edge is
    /// OUTER, the top INNER, left SIDE_MINUS and right SIDE_PLUS.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0 && h > 0.0) {
            return Err(Error::Geometry(format!("invalid rectangle [{x0},{x1}]x[{y0},{y1}] with h = {h}")));
        }
        let nx = ((x1 - x0) / h).round().max(1.0) as usize;
        let ny = ((y1 - y0) / h).round().max(1.0) as usize;
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { x1 } else { x0 + i as f64 * hx };
                let y = if j == ny { y1 } else { y0 + j as f64 * hy };
                nodes.push([x, y]);
            }
        }
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut boundary = Vec::new();
        for i in 0..nx {
            boundary.push(BoundaryEdge { a: id(i, 0), b: id(i + 1, 0), tag: BoundaryTag::Outer });
            boundary.push(BoundaryEdge { a: id(i, ny), b: id(i + 1, ny), tag: BoundaryTag::Inner });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge { a: id(0, j), b: id(0, j + 1), tag: BoundaryTag::SideMinus });
            boundary.push(BoundaryEdge { a: id(nx, j), b: id(nx, j + 1), tag: BoundaryTag::SidePlus });
        }
        Self::new(nodes, cells, boundary, hx.max(hy))
    }

    /// Uniform red refinement: every triangle is split into four.
    /// Returns the refined mesh and, for each new node, its two parents.
    pub fn refine_red(&self) -> (Mesh2D, Vec<(usize, usize)>) {
        let mut nodes = self.nodes.clone();
        let mut parents = Vec::new();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            *mid.entry(key(a, b)).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                parents.push(key(a, b));
                nodes.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for c in &self.cells {
            let m01 = midpoint(c[0], c[1], &mut nodes);
            let m12 = midpoint(c[1], c[2], &mut nodes);
            let m20 = midpoint(c[2], c[0], &mut nodes);
            cells.push([c[0], m01, m20]);
            cells.push([m01, c[1], m12]);
            cells.push([m20, m12, c[2]]);
            cells.push([m01, m12, m20]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let m = midpoint(e.a, e.b, &mut nodes);
            boundary.push(BoundaryEdge { a: e.a, b: m, tag: e.tag });
            boundary.push(BoundaryEdge { a: m, b: e.b, tag: e.tag });
        }
        let mesh = Mesh2D { nodes, cells, boundary, h: 0.5 * self.h };
        (mesh, parents)
    }

    /// Writes `<prefix>_nodes.csv`, `<prefix>_cells.csv`, `<prefix>_boundary.csv`.
    pub fn write_csv(&self, dir: &Path, prefix: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(format!("{prefix}_nodes.csv")))?;
        w.write_record(["id", "x", "y"])?;
        for (i, p) in self.nodes.iter().enumerate() {
            w.write_record([i.to_string(), format!("{:.16e}", p[0]), format!("{:.16e}", p[1])])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join(format!("{prefix}_cells.csv")))?;
        w.write_record(["id", "a", "b", "c"])?;
        for (i, c) in self.cells.iter().enumerate() {
            w.write_record([i.to_string(), c[0].to_string(), c[1].to_string(), c[2].to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join(format!("{prefix}_boundary.csv")))?;
        w.write_record(["a", "b", "tag"])?;
        for e in &self.boundary {
            w.write_record([e.a.to_string(), e.b.to_string(), e.tag.name().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV triple written by [`Mesh2D::write_csv`].
    pub fn read_csv(dir: &Path, prefix: &str, h: f64) -> Result<Self> {
        let bad = |what: &str| Error::Geometry(format!("malformed {what} record"));
        let mut nodes = Vec::new();
        for rec in csv::Reader::from_path(dir.join(format!("{prefix}_nodes.csv")))?.records() {
            let rec = rec?;
            let x: f64 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("node"))?;
            let y: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("node"))?;
            nodes.push([x, y]);
        }
        let mut cells = Vec::new();
        for rec in csv::Reader::from_path(dir.join(format!("{prefix}_cells.csv")))?.records() {
            let rec = rec?;
            let mut c = [0usize; 3];
            for (k, v) in c.iter_mut().enumerate() {
                *v = rec.get(k + 1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("cell"))?;
            }
            cells.push(c);
        }
        let mut boundary = Vec::new();
        for rec in csv::Reader::from_path(dir.join(format!("{prefix}_boundary.csv")))?.records() {
            let rec = rec?;
            let a = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("boundary"))?;
            let b = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("boundary"))?;
            let tag = rec.get(2).and_then(BoundaryTag::parse).ok_or_else(|| bad("boundary"))?;
            boundary.push(BoundaryEdge { a, b, tag });
        }
        Self::new(nodes, cells, boundary, h)
    }
}

/// Interpolates nodal values onto a red-refined mesh.
pub fn prolongate<T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>>(
    coarse: &[T],
    parents: &[(usize, usize)],
) -> Vec<T> {
    let mut out = coarse.to_vec();
    out.extend(parents.iter().map(|&(a, b)| (coarse[a] + coarse[b]) * 0.5));
    out
}

/// A closed polygonal boundary: vertices in counterclockwise order and one
/// tag per segment (segment `k` joins vertex `k` to vertex `k + 1`).
#[derive(Clone, Debug)]
pub struct TaggedPolygon {
    pub vertices: Vec<[f64; 2]>,
    pub tags: Vec<BoundaryTag>,
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let s = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
    (p[0] - a[0] - s * d[0]).hypot(p[1] - a[1] - s * d[1])
}

/// Constrained Delaunay triangulation of a polygon with interior seed
/// points, refined to the given minimum angle.
///
/// Each polygon segment is subdivided at spacing close to `h`; seeds closer
/// than `h / 2` to the boundary are dropped. Boundary edges are tagged by
/// the polygon segment containing their midpoint.
pub fn triangulate_polygon(poly: &TaggedPolygon, seeds: &[[f64; 2]], h: f64, min_angle_deg: f64) -> Result<Mesh2D> {
    let nv = poly.vertices.len();
    if nv < 3 || poly.tags.len() != nv {
        return Err(Error::Geometry("polygon needs at least 3 vertices and one tag per segment".into()));
    }
    let mut bpts: Vec<[f64; 2]> = Vec::new();
    for k in 0..nv {
        let a = poly.vertices[k];
        let b = poly.vertices[(k + 1) % nv];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let m = (len / h).round().max(1.0) as usize;
        for i in 0..m {
            let s = i as f64 / m as f64;
            bpts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    let near_boundary = |p: [f64; 2]| {
        (0..nv).any(|k| dist_to_segment(p, poly.vertices[k], poly.vertices[(k + 1) % nv]) < 0.5 * h)
    };
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(bpts.len());
    for p in &bpts {
        handles.push(cdt.insert(Point2::new(p[0], p[1])).map_err(|e| Error::Geometry(format!("{e:?}")))?);
    }
    for k in 0..handles.len() {
        cdt.add_constraint(handles[k], handles[(k + 1) % handles.len()]);
    }
    for p in seeds.iter().copied().filter(|&p| !near_boundary(p) && point_in_polygon(p, &poly.vertices)) {
        cdt.insert(Point2::new(p[0], p[1])).map_err(|e| Error::Geometry(format!("{e:?}")))?;
    }
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(min_angle_deg + 1.0))
        .with_max_allowed_area(0.75 * h * h)
        .exclude_outer_faces(true)
        .with_max_additional_vertices(50 * (bpts.len() + seeds.len()) + 10_000);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::MeshQuality("Delaunay refinement did not complete".into()));
    }
    let excluded: std::collections::HashSet<_> = result.excluded_faces.iter().copied().collect();
    let nodes: Vec<[f64; 2]> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let mut cells = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let [a, b, c] = face.vertices().map(|v| v.fix().index());
        let mut cell = [a, b, c];
        if signed_area(nodes[a], nodes[b], nodes[c]) < 0.0 {
            cell.swap(1, 2);
        }
        cells.push(cell);
    }
    let proto = Mesh2D { nodes, cells, boundary: Vec::new(), h };
    let mut boundary = Vec::new();
    for (a, b) in proto.free_boundary_edges() {
        let (pa, pb) = (proto.nodes[a], proto.nodes[b]);
        let m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let seg = (0..nv)
            .min_by(|&i, &j| {
                let di = dist_to_segment(m, poly.vertices[i], poly.vertices[(i + 1) % nv]);
                let dj = dist_to_segment(m, poly.vertices[j], poly.vertices[(j + 1) % nv]);
                di.total_cmp(&dj)
            })
            .expect("polygon has segments");
        boundary.push(BoundaryEdge { a, b, tag: poly.tags[seg] });
    }
    let mesh = Mesh2D { boundary, ..proto };
    mesh.validate()?;
    Ok(mesh)
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_mesh_is_valid_and_tagged() {
        let m = Mesh2D::rectangle(0.0, 2.0, 0.0, 1.0, 0.25).unwrap();
        assert_eq!(m.nodes.len(), 9 * 5);
        assert!((m.area() - 2.0).abs() < 1e-14);
        assert!((m.min_angle_deg() - 45.0).abs() < 1e-9);
        let count = |t| m.boundary.iter().filter(|e| e.tag == t).count();
        assert_eq!(count(BoundaryTag::Outer), 8);
        assert_eq!(count(BoundaryTag::SidePlus), 4);
    }

    #[test]
    fn edge_weights_sum_to_area_and_cancel_on_diagonals() {
        let m = Mesh2D::rectangle(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        let edges = m.edges();
        let mass: f64 = edges.iter().map(|e| e.mass).sum();
        assert!((mass - 1.0).abs() < 1e-14);
        for e in &edges {
            let (p, q) = (m.nodes[e.i], m.nodes[e.j]);
            let diagonal = p[0] != q[0] && p[1] != q[1];
            if diagonal {
                assert!(e.stiffness.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn red_refinement_preserves_area_and_angles() {
        let m = Mesh2D::rectangle(0.0, 1.0, 0.0, 0.5, 0.25).unwrap();
        let (r, parents) = m.refine_red();
        r.validate().unwrap();
        assert_eq!(r.nodes.len(), m.nodes.len() + parents.len());
        assert!((r.area() - m.area()).abs() < 1e-14);
        assert!((r.min_angle_deg() - m.min_angle_deg()).abs() < 1e-9);
        let v: Vec<f64> = m.nodes.iter().map(|p| p[0] + 2.0 * p[1]).collect();
        let w = prolongate(&v, &parents);
        for (p, x) in r.nodes.iter().zip(&w) {
            assert!((p[0] + 2.0 * p[1] - x).abs() < 1e-14);
        }
    }

    #[test]
    fn tag_mismatch_is_rejected() {
        let mut m = Mesh2D::rectangle(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        m.boundary.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn polygon_triangulation_meets_quality_gate() {
        let poly = TaggedPolygon {
            vertices: vec![[0.0, 0.0], [3.0, 0.0], [3.0, 1.0], [1.0, 1.0], [0.0, 2.0]],
            tags: vec![
                BoundaryTag::Outer,
                BoundaryTag::SidePlus,
                BoundaryTag::Inner,
                BoundaryTag::Inner,
                BoundaryTag::SideMinus,
            ],
        };
        let m = triangulate_polygon(&poly, &[], 0.25, 20.0).unwrap();
        m.check_quality(20.0).unwrap();
        assert!((m.area() - 3.5).abs() < 1e-12);
        let outer: f64 = m
            .boundary
            .iter()
            .filter(|e| e.tag == BoundaryTag::Outer)
            .map(|e| (m.nodes[e.a][0] - m.nodes[e.b][0]).hypot(m.nodes[e.a][1] - m.nodes[e.b][1]))
            .sum();
        assert!((outer - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mesh_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mesh2D::rectangle(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        m.write_csv(dir.path(), "m").unwrap();
        let r = Mesh2D::read_csv(dir.path(), "m", 0.5).unwrap();
        assert_eq!(m, r);
        assert_eq!(m.hash(), r.hash());
    }
}
