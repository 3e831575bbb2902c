use super::AssetError;

/// Number of scalar attributes per gaussian at SH degree 0.
pub const ATTRIBUTE_COUNT: usize = 14;

/// Attribute names in vector order; these are also the PLY property names.
pub const ATTRIBUTE_NAMES: [&str; ATTRIBUTE_COUNT] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
];

/// One gaussian primitive as stored by standard 3DGS assets.
///
/// `opacity` is a pre-sigmoid logit and `scale` holds log-scales. The rotation
/// quaternion is `(w, x, y, z)` and need not be unit length.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianPoint {
    pub position: [f32; 3],
    pub color: [f32; 3],
    pub opacity: f32,
    pub scale: [f32; 3],
    pub rotation: [f32; 4],
}

impl GaussianPoint {
    pub fn to_array(&self) -> [f32; ATTRIBUTE_COUNT] {
        let mut out = [0.0; ATTRIBUTE_COUNT];
        out[0..3].copy_from_slice(&self.position);
        out[3..6].copy_from_slice(&self.color);
        out[6] = self.opacity;
        out[7..10].copy_from_slice(&self.scale);
        out[10..14].copy_from_slice(&self.rotation);
        out
    }

    pub fn from_array(v: &[f32; ATTRIBUTE_COUNT]) -> Self {
        GaussianPoint {
            position: [v[0], v[1], v[2]],
            color: [v[3], v[4], v[5]],
            opacity: v[6],
            scale: [v[7], v[8], v[9]],
            rotation: [v[10], v[11], v[12], v[13]],
        }
    }

    /// Name of the first non-finite attribute, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.to_array()
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| ATTRIBUTE_NAMES[i])
    }
}

/// A non-empty, finite set of gaussians from one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    source_id: String,
    points: Vec<GaussianPoint>,
}

impl GaussianCloud {
    pub fn new(
        source_id: impl Into<String>,
        points: Vec<GaussianPoint>,
    ) -> Result<Self, AssetError> {
        if points.is_empty() {
            return Err(AssetError::EmptyCloud);
        }
        for (index, p) in points.iter().enumerate() {
            if let Some(attribute) = p.first_non_finite() {
                return Err(AssetError::NonFinite { index, attribute });
            }
        }
        Ok(GaussianCloud {
            source_id: source_id.into(),
            points,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn points(&self) -> &[GaussianPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| p.position.map(|v| v as f64))
            .collect()
    }

    /// Row-major `len × 14` attribute matrix.
    pub fn to_rows(&self) -> Vec<[f32; ATTRIBUTE_COUNT]> {
        self.points.iter().map(GaussianPoint::to_array).collect()
    }

    /// Copy with every position shifted by `offset`.
    pub fn translated(&self, offset: [f32; 3]) -> GaussianCloud {
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut q = *p;
                for (c, o) in q.position.iter_mut().zip(offset) {
                    *c += o;
                }
                q
            })
            .collect();
        GaussianCloud {
            source_id: self.source_id.clone(),
            points,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_round_trip_is_14_wide() {
        let p = GaussianPoint {
            position: [1.0, 2.0, 3.0],
            color: [0.1, 0.2, 0.3],
            opacity: -0.5,
            scale: [-3.0, -2.0, -1.0],
            rotation: [1.0, 0.0, 0.0, 0.0],
        };
        let v = p.to_array();
        assert_eq!(v.len(), 14);
        assert_eq!(GaussianPoint::from_array(&v), p);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            GaussianCloud::new("a", vec![]),
            Err(AssetError::EmptyCloud)
        ));
        let mut p = GaussianPoint::default();
        p.scale[1] = f32::NAN;
        match GaussianCloud::new("a", vec![GaussianPoint::default(), p]) {
            Err(AssetError::NonFinite { index, attribute }) => {
                assert_eq!(index, 1);
                assert_eq!(attribute, "scale_1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
