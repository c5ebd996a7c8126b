//! Manifold triangle meshes and surface points.
//!
//! A [`SurfaceMesh`] is immutable once built. Construction validates the face
//! list (index range, edge incidence, winding, degenerate faces) and builds the
//! edge adjacency used by every geodesic routine. Spatial acceleration (the
//! face BVH) and the geodesic search graph are built lazily on first use, so
//! reposed copies that only need vertex positions stay cheap.

mod bvh;
mod triangle;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bvh::Bvh;
pub use triangle::closest_point_on_triangle;

pub type Vec3 = Vector3<f64>;

/// Minimum face area accepted by [`SurfaceMesh::new`], in square meters.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh has no faces")]
    NoFaces,
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("non-manifold mesh at edge ({0}, {1}): {2}")]
    NonManifold(usize, usize, &'static str),
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("vertex count mismatch: expected {expected}, got {got}")]
    VertexCountMismatch { expected: usize, got: usize },
    #[error("invalid surface point: {0}")]
    InvalidPoint(String),
}

/// A point on the surface: a face and barycentric coordinates within it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub face: usize,
    pub bary: [f64; 3],
}

impl SurfacePoint {
    pub fn new(face: usize, bary: [f64; 3]) -> Self {
        Self { face, bary }
    }

    /// The point at local corner `corner` of `face`.
    pub fn corner(face: usize, corner: usize) -> Self {
        let mut bary = [0.0; 3];
        bary[corner] = 1.0;
        Self { face, bary }
    }

    pub fn centroid(face: usize) -> Self {
        Self {
            face,
            bary: [1.0 / 3.0; 3],
        }
    }

    /// Clamps tiny negative coordinates and renormalizes to sum 1.
    pub fn normalized(mut self) -> Self {
        for b in &mut self.bary {
            if *b < 0.0 {
                *b = 0.0;
            }
        }
        let s: f64 = self.bary.iter().sum();
        if s > 0.0 {
            for b in &mut self.bary {
                *b /= s;
            }
        } else {
            self.bary = [1.0 / 3.0; 3];
        }
        self
    }
}

/// Face-to-face adjacency and vertex incidence, shared between meshes with
/// identical connectivity.
#[derive(Debug)]
pub(crate) struct Topology {
    pub faces: Vec<[usize; 3]>,
    /// Neighbor across local edge `k` (from corner `k` to corner `k+1`):
    /// `(neighbor face, local edge index in the neighbor)`.
    pub adjacency: Vec<[Option<(usize, usize)>; 3]>,
    /// Undirected edges as `(min, max)` vertex pairs.
    pub edges: Vec<[usize; 2]>,
    pub face_edges: Vec<[usize; 3]>,
    pub vertex_faces: Vec<Vec<usize>>,
}

impl Topology {
    fn build(n_vertices: usize, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::NoFaces);
        }
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n_vertices {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: v,
                        count: n_vertices,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::NonManifold(f[0], f[1], "face repeats a vertex"));
            }
        }

        // Two faces over the same vertex triple fold back onto each other.
        let mut seen_triples = HashMap::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            let mut key = *f;
            key.sort_unstable();
            if seen_triples.insert(key, fi).is_some() {
                return Err(MeshError::NonManifold(f[0], f[1], "duplicated face"));
            }
        }

        let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                if directed.insert((a, b), (fi, k)).is_some() {
                    return Err(MeshError::NonManifold(
                        a,
                        b,
                        "edge traversed twice in the same direction (inconsistent winding or >2 faces)",
                    ));
                }
            }
        }

        let mut adjacency = vec![[None; 3]; faces.len()];
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
        let mut edges = Vec::new();
        let mut face_edges = vec![[0usize; 3]; faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                if let Some(&(g, kg)) = directed.get(&(b, a)) {
                    adjacency[fi][k] = Some((g, kg));
                }
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                face_edges[fi][k] = id;
            }
        }
        // An undirected edge seen by more than two faces would need a third
        // directed copy, which the directed map already rejected.

        let mut vertex_faces = vec![Vec::new(); n_vertices];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }

        Ok(Self {
            faces,
            adjacency,
            edges,
            face_edges,
            vertex_faces,
        })
    }
}

/// An immutable, validated manifold triangle mesh.
#[derive(Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    pub(crate) topo: Arc<Topology>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    bvh: OnceLock<Bvh>,
    pub(crate) steiner: OnceLock<crate::geodesic::SteinerGraph>,
}

impl Clone for SurfaceMesh {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            topo: Arc::clone(&self.topo),
            normals: self.normals.clone(),
            areas: self.areas.clone(),
            bvh: OnceLock::new(),
            steiner: OnceLock::new(),
        }
    }
}

impl SurfaceMesh {
    /// Builds and validates a mesh.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let topo = Topology::build(vertices.len(), faces)?;
        let mesh = Self::assemble(vertices, Arc::new(topo));
        for (fi, &a) in mesh.areas.iter().enumerate() {
            if !(a >= MIN_FACE_AREA) {
                return Err(MeshError::DegenerateFace { face: fi, area: a });
            }
        }
        Ok(mesh)
    }

    fn assemble(vertices: Vec<Vec3>, topo: Arc<Topology>) -> Self {
        let mut normals = Vec::with_capacity(topo.faces.len());
        let mut areas = Vec::with_capacity(topo.faces.len());
        for f in &topo.faces {
            let n = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
            let len = n.norm();
            areas.push(0.5 * len);
            normals.push(if len > 0.0 { n / len } else { Vec3::zeros() });
        }
        Self {
            vertices,
            topo,
            normals,
            areas,
            bvh: OnceLock::new(),
            steiner: OnceLock::new(),
        }
    }

    /// Same connectivity, new vertex positions. Skips validation: callers
    /// deform an already-valid mesh (skinning, rigid motion).
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::VertexCountMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        Ok(Self::assemble(vertices, Arc::clone(&self.topo)))
    }

    /// Applies `f` to every vertex, keeping connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self::assemble(self.vertices.iter().map(f).collect(), Arc::clone(&self.topo))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.topo.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.topo.faces.len()
    }

    pub fn normal(&self, face: usize) -> Vec3 {
        self.normals[face]
    }

    pub fn area(&self, face: usize) -> f64 {
        self.areas[face]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn face_positions(&self, face: usize) -> [Vec3; 3] {
        let f = self.topo.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Neighbor across local edge `k` of `face`, with the edge's local index
    /// in the neighbor.
    pub fn neighbor(&self, face: usize, k: usize) -> Option<(usize, usize)> {
        self.topo.adjacency[face][k]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.topo.vertex_faces[v]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.topo.edges
    }

    pub fn shares_topology(&self, other: &SurfaceMesh) -> bool {
        Arc::ptr_eq(&self.topo, &other.topo) || self.topo.faces == other.topo.faces
    }

    /// True when every edge has exactly two incident faces.
    pub fn is_closed(&self) -> bool {
        self.topo.adjacency.iter().all(|adj| adj.iter().all(Option::is_some))
    }

    /// Local corner index of vertex `v` in `face`.
    pub fn corner_of(&self, face: usize, v: usize) -> Option<usize> {
        self.topo.faces[face].iter().position(|&x| x == v)
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = &self.topo.edges;
        edges
            .iter()
            .map(|e| (self.vertices[e[0]] - self.vertices[e[1]]).norm())
            .sum::<f64>()
            / edges.len() as f64
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// 3D position of a surface point.
    pub fn position(&self, p: &SurfacePoint) -> Vec3 {
        let [a, b, c] = self.face_positions(p.face);
        a * p.bary[0] + b * p.bary[1] + c * p.bary[2]
    }

    /// A surface point located at vertex `v`, expressed on its first face.
    pub fn vertex_point(&self, v: usize) -> Option<SurfacePoint> {
        let face = *self.topo.vertex_faces.get(v)?.first()?;
        let corner = self.corner_of(face, v)?;
        Some(SurfacePoint::corner(face, corner))
    }

    /// Barycentric coordinates of `x` (assumed to lie in the face plane)
    /// with respect to `face`, clamped onto the triangle.
    pub fn locate_in_face(&self, face: usize, x: &Vec3) -> SurfacePoint {
        let [a, b, c] = self.face_positions(face);
        let v0 = b - a;
        let v1 = c - a;
        let v2 = x - a;
        let d00 = v0.dot(&v0);
        let d01 = v0.dot(&v1);
        let d11 = v1.dot(&v1);
        let d20 = v2.dot(&v0);
        let d21 = v2.dot(&v1);
        let denom = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / denom;
        let w = (d00 * d21 - d01 * d20) / denom;
        SurfacePoint::new(face, [1.0 - v - w, v, w]).normalized()
    }

    /// Re-expresses a surface point on another face that contains it (a
    /// shared vertex or edge). Returns `None` if the point is not on `face`.
    pub fn reexpress(&self, p: &SurfacePoint, face: usize) -> Option<SurfacePoint> {
        if p.face == face {
            return Some(*p);
        }
        let src = self.topo.faces[p.face];
        let dst = self.topo.faces[face];
        let mut bary = [0.0; 3];
        for (k, &v) in src.iter().enumerate() {
            if p.bary[k] <= 1e-12 {
                continue;
            }
            let j = dst.iter().position(|&x| x == v)?;
            bary[j] += p.bary[k];
        }
        Some(SurfacePoint::new(face, bary).normalized())
    }

    /// Checks face range and barycentric invariants.
    pub fn validate_point(&self, p: &SurfacePoint) -> Result<(), MeshError> {
        if p.face >= self.num_faces() {
            return Err(MeshError::InvalidPoint(format!("face {} out of range", p.face)));
        }
        let sum: f64 = p.bary.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || p.bary.iter().any(|&b| b < -1e-12 || !b.is_finite()) {
            return Err(MeshError::InvalidPoint(format!(
                "barycentrics {:?} do not form a convex combination",
                p.bary
            )));
        }
        Ok(())
    }

    pub fn bvh(&self) -> &Bvh {
        self.bvh.get_or_init(|| Bvh::build(self))
    }

    /// Closest point on the surface to `query` and its Euclidean distance.
    ///
    /// Ties between faces resolve to the lowest face index, so the result is
    /// identical to an exhaustive scan.
    pub fn closest_point(&self, query: &Vec3) -> (SurfacePoint, f64) {
        self.bvh().closest_point(self, query)
    }

    /// Nearest mesh vertex to `query`: seeded from the closest surface
    /// point, then refined by descending over vertex neighborhoods.
    pub fn nearest_vertex(&self, query: &Vec3) -> usize {
        let (sp, _) = self.closest_point(query);
        let f = self.topo.faces[sp.face];
        let mut best = f[0];
        let mut best_d = (self.vertices[best] - query).norm_squared();
        for &v in &f[1..] {
            let d = (self.vertices[v] - query).norm_squared();
            if d < best_d || (d == best_d && v < best) {
                best = v;
                best_d = d;
            }
        }
        loop {
            let mut improved = false;
            for &face in &self.topo.vertex_faces[best] {
                for &v in &self.topo.faces[face] {
                    let d = (self.vertices[v] - query).norm_squared();
                    if d < best_d || (d == best_d && v < best) {
                        best = v;
                        best_d = d;
                        improved = true;
                    }
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Vertex indices adjacent to `v` through an edge, ascending.
    pub fn vertex_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.topo.vertex_faces[v]
            .iter()
            .flat_map(|&f| self.topo.faces[f])
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn unit_square() -> SurfaceMesh {
        SurfaceMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn unit_square_has_one_interior_edge() {
        let m = unit_square();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.edges().len(), 5);
        let interior = (0..m.num_faces())
            .flat_map(|f| (0..3).map(move |k| (f, k)))
            .filter(|&(f, k)| m.neighbor(f, k).is_some())
            .count();
        // counted once from each side
        assert_eq!(interior, 2);
        assert!(!m.is_closed());
    }

    #[test]
    fn folded_pair_is_rejected() {
        let err = SurfaceMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2], [0, 2, 1]]).unwrap_err();
        assert!(matches!(err, MeshError::NonManifold(..)));
    }

    #[test]
    fn flipped_neighbor_is_rejected() {
        let err = SurfaceMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::y()],
            vec![[0, 1, 2], [0, 3, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::NonManifold(..)));
    }

    #[test]
    fn three_faces_on_one_edge_rejected() {
        let err = SurfaceMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::x(),
                Vec3::y(),
                Vec3::new(0.5, -1.0, 0.0),
                Vec3::new(0.5, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [1, 0, 3], [1, 0, 4]],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::NonManifold(..)));
    }

    #[test]
    fn degenerate_and_out_of_range() {
        let err = SurfaceMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, MeshError::DegenerateFace { face: 0, .. }));
        let err = SurfaceMesh::new(vec![Vec3::zeros()], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { .. }));
        assert_eq!(SurfaceMesh::new(vec![], vec![]).unwrap_err(), MeshError::NoFaces);
    }

    #[test]
    fn icosphere_edge_census() {
        let m = synth::icosphere(2, 1.0);
        assert_eq!(m.num_faces(), 320);
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in m.faces() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(count.values().all(|&c| c == 2));
        assert!(m.is_closed());
    }

    #[test]
    fn closest_point_simple_cases() {
        let m = unit_square();
        let (p, d) = m.closest_point(&Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(d, 0.0);
        assert!((m.position(&p) - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
        let (p, d) = m.closest_point(&Vec3::new(0.5, 0.5, 1.0));
        assert!((d - 1.0).abs() < 1e-12);
        assert!((m.position(&p) - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reexpress_shared_vertex() {
        let m = unit_square();
        let p = SurfacePoint::corner(0, 2); // vertex 2
        let q = m.reexpress(&p, 1).unwrap();
        assert!((m.position(&q) - m.position(&p)).norm() < 1e-15);
        assert!(m.reexpress(&SurfacePoint::corner(0, 1), 1).is_none());
    }

    #[test]
    fn nearest_vertex_matches_scan() {
        let m = synth::icosphere(3, 1.0);
        for i in 0..50 {
            let t = i as f64 * 0.37;
            let q = Vec3::new(t.sin() * 1.3, (t * 1.7).cos(), (t * 0.3).sin() - 0.2);
            let brute = (0..m.num_vertices())
                .min_by(|&a, &b| (m.vertices()[a] - q).norm().total_cmp(&(m.vertices()[b] - q).norm()))
                .unwrap();
            assert_eq!(m.nearest_vertex(&q), brute);
        }
    }
}
