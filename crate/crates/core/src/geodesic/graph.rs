//! Steiner-point graph used to seed exact shortest paths.
//!
//! Nodes are the mesh vertices plus [`STEINER_PER_EDGE`] evenly spaced points
//! on every edge. Nodes sharing a face are connected by straight segments
//! through that face, so graph paths are valid surface polylines whose face
//! sequence is then straightened by the funnel pass.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::mesh::{SurfaceMesh, SurfacePoint, Vec3};

pub const STEINER_PER_EDGE: usize = 3;
const NODES_PER_FACE: usize = 3 + 3 * STEINER_PER_EDGE;

#[derive(Debug)]
pub struct SteinerGraph {
    n_vertices: usize,
    positions: Vec<Vec3>,
    /// Faces on each side of an edge; `usize::MAX` on a boundary.
    edge_faces: Vec<[usize; 2]>,
}

impl SteinerGraph {
    pub fn build(mesh: &SurfaceMesh) -> Self {
        let n_vertices = mesh.num_vertices();
        let mut positions = mesh.vertices().to_vec();
        for e in mesh.edges() {
            let a = mesh.vertices()[e[0]];
            let b = mesh.vertices()[e[1]];
            for j in 0..STEINER_PER_EDGE {
                let s = (j + 1) as f64 / (STEINER_PER_EDGE + 1) as f64;
                positions.push(a + (b - a) * s);
            }
        }
        let mut edge_faces = vec![[usize::MAX; 2]; mesh.edges().len()];
        for (f, fe) in mesh.topo.face_edges.iter().enumerate() {
            for &e in fe {
                let slot = &mut edge_faces[e];
                if slot[0] == usize::MAX {
                    slot[0] = f;
                } else {
                    slot[1] = f;
                }
            }
        }
        Self {
            n_vertices,
            positions,
            edge_faces,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, node: usize) -> Vec3 {
        self.positions[node]
    }

    fn face_nodes(&self, mesh: &SurfaceMesh, face: usize) -> [usize; NODES_PER_FACE] {
        let mut out = [0usize; NODES_PER_FACE];
        let f = mesh.faces()[face];
        out[..3].copy_from_slice(&f);
        for (k, &e) in mesh.topo.face_edges[face].iter().enumerate() {
            for j in 0..STEINER_PER_EDGE {
                out[3 + k * STEINER_PER_EDGE + j] = self.n_vertices + e * STEINER_PER_EDGE + j;
            }
        }
        out
    }

    fn node_faces<'a>(&'a self, mesh: &'a SurfaceMesh, node: usize) -> &'a [usize] {
        if node < self.n_vertices {
            mesh.vertex_faces(node)
        } else {
            let e = (node - self.n_vertices) / STEINER_PER_EDGE;
            let pair = &self.edge_faces[e];
            if pair[1] == usize::MAX {
                &pair[..1]
            } else {
                &pair[..]
            }
        }
    }

    /// Faces touching a surface point (one, two on an edge, a fan at a vertex).
    pub(crate) fn point_faces(&self, mesh: &SurfaceMesh, p: &SurfacePoint) -> Vec<usize> {
        let nz: Vec<usize> = (0..3).filter(|&k| p.bary[k] > 1e-12).collect();
        let f = mesh.faces()[p.face];
        match nz.len() {
            1 => mesh.vertex_faces(f[nz[0]]).to_vec(),
            2 => {
                let zero = (0..3).find(|k| !nz.contains(k)).unwrap_or(0);
                let mut out = vec![p.face];
                if let Some((g, _)) = mesh.neighbor(p.face, (zero + 1) % 3) {
                    out.push(g);
                }
                out
            }
            _ => vec![p.face],
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One hop of a graph path: the node reached and the face crossed to get
/// there.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hop {
    pub node: usize,
    pub face: usize,
}

const NONE: usize = usize::MAX;

/// Point-to-point search. Returns the face sequence of the graph path from
/// `a` to `b` (first face contains `a`, last contains `b`), or `None` if
/// `b` is unreachable.
pub(crate) fn face_sequence(
    mesh: &SurfaceMesh,
    graph: &SteinerGraph,
    a: &SurfacePoint,
    b: &SurfacePoint,
) -> Option<Vec<usize>> {
    let n = graph.num_nodes();
    let target = n;
    let xa = mesh.position(a);
    let xb = mesh.position(b);
    let b_faces = graph.point_faces(mesh, b);
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut prev = vec![Hop { node: NONE, face: NONE }; n + 1];
    let mut done = vec![false; n + 1];
    let mut heap = BinaryHeap::new();

    for f in graph.point_faces(mesh, a) {
        for node in graph.face_nodes(mesh, f) {
            let d = (graph.position(node) - xa).norm();
            if d < dist[node] {
                dist[node] = d;
                prev[node] = Hop { node: NONE, face: f };
                heap.push(Item(d, node));
            }
        }
    }

    while let Some(Item(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == target {
            break;
        }
        let pu = graph.position(u);
        for &f in graph.node_faces(mesh, u) {
            if b_faces.contains(&f) {
                let nd = d + (xb - pu).norm();
                if nd < dist[target] {
                    dist[target] = nd;
                    prev[target] = Hop { node: u, face: f };
                    heap.push(Item(nd, target));
                }
            }
            for v in graph.face_nodes(mesh, f) {
                if done[v] {
                    continue;
                }
                let nd = d + (graph.position(v) - pu).norm();
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = Hop { node: u, face: f };
                    heap.push(Item(nd, v));
                }
            }
        }
    }
    if !done[target] {
        return None;
    }
    let mut faces = Vec::new();
    let mut cur = target;
    loop {
        let hop = prev[cur];
        faces.push(hop.face);
        if hop.node == NONE {
            break;
        }
        cur = hop.node;
    }
    faces.reverse();
    Some(faces)
}

/// Multi-source search: for every mesh vertex in `targets`, the graph
/// distance to the nearest source and that source's index. Unreachable
/// targets get `(INFINITY, usize::MAX)`.
pub(crate) fn nearest_source(
    mesh: &SurfaceMesh,
    graph: &SteinerGraph,
    sources: &[SurfacePoint],
    targets: &[usize],
) -> Vec<(f64, usize)> {
    let n = graph.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut label = vec![NONE; n];
    let mut done = vec![false; n];
    let mut wanted = vec![false; n];
    for &t in targets {
        wanted[t] = true;
    }
    let mut remaining = targets.len();
    let mut heap = BinaryHeap::new();
    for (si, s) in sources.iter().enumerate() {
        let xs = mesh.position(s);
        for f in graph.point_faces(mesh, s) {
            for node in graph.face_nodes(mesh, f) {
                let d = (graph.position(node) - xs).norm();
                if d < dist[node] {
                    dist[node] = d;
                    label[node] = si;
                    heap.push(Item(d, node));
                }
            }
        }
    }
    while let Some(Item(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if wanted[u] {
            wanted[u] = false;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        let pu = graph.position(u);
        for &f in graph.node_faces(mesh, u) {
            for v in graph.face_nodes(mesh, f) {
                if done[v] {
                    continue;
                }
                let nd = d + (graph.position(v) - pu).norm();
                if nd < dist[v] {
                    dist[v] = nd;
                    label[v] = label[u];
                    heap.push(Item(nd, v));
                }
            }
        }
    }
    targets.iter().map(|&t| (dist[t], label[t])).collect()
}
