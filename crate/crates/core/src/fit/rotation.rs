use nalgebra::{Matrix3, Rotation3};

use crate::mesh::Vec3;

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rotation_matrix(r: &Vec3) -> Matrix3<f64> {
    *Rotation3::from_scaled_axis(*r).matrix()
}

/// Partial derivatives `∂R/∂r_i` of the axis-angle map, using
/// `((r_i [r]× + [r × (I − R) e_i]×) / ‖r‖²) R`.
pub fn rotation_jacobian(r: &Vec3) -> [Matrix3<f64>; 3] {
    let th2 = r.norm_squared();
    let e = [Vec3::x(), Vec3::y(), Vec3::z()];
    if th2 < 1e-16 {
        return e.map(|ei| skew(&ei));
    }
    let rm = rotation_matrix(r);
    let ir = Matrix3::identity() - rm;
    let rx = skew(r);
    std::array::from_fn(|i| (rx * r[i] + skew(&r.cross(&(ir * e[i])))) / th2 * rm)
}

/// Axis-angle vector of a rotation matrix, with the angle in [0, π].
/// Tolerates rounding that pushes the trace slightly past 3.
pub fn axis_angle(m: &Matrix3<f64>) -> Vec3 {
    let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) / 2.0;
    let c = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let s = w.norm();
    let angle = s.atan2(c);
    if s < 1e-12 && c > 0.0 {
        return w;
    }
    if angle < std::f64::consts::PI - 1e-6 {
        return w * (angle / s);
    }
    // near π the skew part vanishes; read the axis off the symmetric part
    let b = (m + m.transpose()) / 2.0 - Matrix3::identity() * c;
    let k = (0..3).max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)])).unwrap_or(0);
    let mut axis = b.column(k).into_owned();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis.normalize() * angle
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_angle_round_trips() {
        for r in [
            Vec3::new(0.3, -0.2, 0.9),
            Vec3::new(1e-9, 0.0, 0.0),
            Vec3::zeros(),
            Vec3::new(0.0, std::f64::consts::PI - 3e-6, 0.0),
            Vec3::new(1.0, 1.0, 1.0).normalize() * std::f64::consts::PI,
        ] {
            let back = axis_angle(&rotation_matrix(&r));
            let same =
                (back - r).norm() < 1e-9 || (r.norm() - std::f64::consts::PI).abs() < 1e-9 && (back + r).norm() < 1e-9;
            assert!(same, "{r:?} {back:?}");
        }
        let mut m = Matrix3::identity();
        m[(0, 0)] += 1e-15;
        m[(1, 1)] += 1e-15;
        assert!(axis_angle(&m).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn jacobian_matches_differences() {
        for r in [
            Vec3::new(0.3, -0.2, 0.9),
            Vec3::new(1e-9, 0.0, 0.0),
            Vec3::new(-2.0, 1.0, 0.5),
        ] {
            let j = rotation_jacobian(&r);
            for i in 0..3 {
                let mut d = Vec3::zeros();
                d[i] = 1e-6;
                let fd = (rotation_matrix(&(r + d)) - rotation_matrix(&(r - d))) / 2e-6;
                assert!((fd - j[i]).norm() < 1e-6, "{i} {r:?}");
            }
        }
    }
}
