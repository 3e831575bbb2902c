use crate::assets::GaussianPoint;

/// Normalized per-point feature width: 3 centered position, 3 color,
/// 1 opacity, 3 scale, 9 rotation matrix entries.
pub const FEATURE_DIM: usize = 19;

/// Leading features fed to the position/color point MLP.
pub const POINT_FEATURES: usize = 6;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Rotation matrix (row-major) of a unit quaternion `(w, x, y, z)`.
pub fn quaternion_to_matrix(q: [f64; 4]) -> [f64; 9] {
    let [w, x, y, z] = q;
    [
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Normalize one patch. Returns the feature rows and the number of zero-norm
/// quaternions that were replaced by the identity rotation.
pub fn normalize_attributes(
    points: &[GaussianPoint],
    center: [f64; 3],
) -> (Vec<[f64; FEATURE_DIM]>, usize) {
    let mut degenerate = 0;
    let rows = points
        .iter()
        .map(|p| {
            let mut f = [0.0; FEATURE_DIM];
            for a in 0..3 {
                f[a] = p.position[a] as f64 - center[a];
                f[3 + a] = p.color[a] as f64;
                f[7 + a] = sigmoid(p.scale[a] as f64);
            }
            f[6] = sigmoid(p.opacity as f64);
            let q = p.rotation.map(|v| v as f64);
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            let unit = if norm > 0.0 {
                q.map(|v| v / norm)
            } else {
                degenerate += 1;
                [1.0, 0.0, 0.0, 0.0]
            };
            f[10..19].copy_from_slice(&quaternion_to_matrix(unit));
            f
        })
        .collect();
    (rows, degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(opacity: f32, rotation: [f32; 4]) -> GaussianPoint {
        GaussianPoint {
            position: [1.0, 2.0, 3.0],
            color: [0.5, -0.5, 2.0],
            opacity,
            scale: [0.0, -100.0, 3.0],
            rotation,
        }
    }

    #[test]
    fn opacity_scale_and_position() {
        let (rows, bad) =
            normalize_attributes(&[point(0.0, [1.0, 0.0, 0.0, 0.0])], [1.0, 1.0, 1.0]);
        let f = rows[0];
        assert_eq!(bad, 0);
        assert_eq!(&f[0..3], &[0.0, 1.0, 2.0]);
        assert_eq!(&f[3..6], &[0.5, -0.5, 2.0]);
        assert_eq!(f[6], 0.5);
        assert_eq!(f[7], 0.5);
        assert!(f[8] > 0.0 && f[8] < 1e-40);
        assert!(f[9] < 1.0);
        assert_eq!(&f[10..19], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn half_turn_about_z() {
        let (rows, _) = normalize_attributes(&[point(0.0, [0.0, 0.0, 0.0, 1.0])], [0.0; 3]);
        assert_eq!(
            &rows[0][10..19],
            &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn zero_quaternion_becomes_identity() {
        let (rows, bad) = normalize_attributes(
            &[point(0.0, [0.0; 4]), point(0.0, [2.0, 0.0, 0.0, 0.0])],
            [0.0; 3],
        );
        assert_eq!(bad, 1);
        assert_eq!(rows[0][10..19], rows[1][10..19]);
    }
}
