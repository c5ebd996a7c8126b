//! Bounding-volume hierarchy over mesh faces.

use super::{closest_point_on_triangle, SurfaceMesh, SurfacePoint, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&self, o: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.inf(&o.lo),
            hi: self.hi.sup(&o.hi),
        }
    }

    fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.lo[k] {
                self.lo[k] - p[k]
            } else if p[k] > self.hi[k] {
                p[k] - self.hi[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split BVH over triangle faces.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &SurfaceMesh) -> Self {
        let n = mesh.num_faces();
        let mut boxes = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        for f in 0..n {
            let mut b = Aabb::empty();
            let tri = mesh.face_positions(f);
            for p in &tri {
                b.grow(p);
            }
            boxes.push(b);
            centroids.push((tri[0] + tri[1] + tri[2]) / 3.0);
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        Self::build_range(&mut nodes, &mut order, &boxes, &centroids, 0, n);
        Bvh { nodes, order }
    }

    fn build_range(
        nodes: &mut Vec<Node>,
        order: &mut [usize],
        boxes: &[Aabb],
        centroids: &[Vec3],
        start: usize,
        end: usize,
    ) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbox = Aabb::empty();
        for &f in &order[start..end] {
            bounds = bounds.merge(&boxes[f]);
            cbox.grow(&centroids[f]);
        }
        let idx = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { bounds, start, end });
            return idx;
        }
        let extent = cbox.hi - cbox.lo;
        let axis = extent.imax();
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        nodes.push(Node::Leaf {
            bounds,
            start: 0,
            end: 0,
        });
        let left = Self::build_range(nodes, order, boxes, centroids, start, mid);
        let right = Self::build_range(nodes, order, boxes, centroids, mid, end);
        nodes[idx] = Node::Inner { bounds, left, right };
        idx
    }

    /// Closest point, ties broken by lowest face index.
    pub fn closest_point(&self, mesh: &SurfaceMesh, q: &Vec3) -> (SurfacePoint, f64) {
        let mut best_d2 = f64::INFINITY;
        let mut best_face = usize::MAX;
        let mut best_bary = [0.0; 3];
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().distance_squared(q) > best_d2 * (1.0 + 1e-12) {
                continue;
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[*start..*end] {
                        let [a, b, c] = mesh.face_positions(f);
                        let bc = closest_point_on_triangle(q, &a, &b, &c);
                        let x = a * bc[0] + b * bc[1] + c * bc[2];
                        let d2 = (x - q).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && f < best_face) {
                            best_d2 = d2;
                            best_face = f;
                            best_bary = bc;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().distance_squared(q);
                    let dr = self.nodes[*right].bounds().distance_squared(q);
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        (SurfacePoint::new(best_face, best_bary), best_d2.sqrt())
    }
}
