use rand::seq::index;
use rand::Rng as _;

use super::point::GaussianCloud;
use super::AssetError;
use crate::rng;

/// Resample `cloud` to exactly `target` points.
///
/// Larger clouds are sampled uniformly without replacement (kept in source
/// order). Smaller clouds keep every original point once and fill the rest
/// with draws with replacement.
pub fn subsample_points(
    cloud: &GaussianCloud,
    target: usize,
    seed: u64,
) -> Result<GaussianCloud, AssetError> {
    if target == 0 {
        return Err(AssetError::Argument(
            "subsample target must be at least 1".into(),
        ));
    }
    let m = cloud.len();
    let mut r = rng::stream(seed, "subsample");
    let picks: Vec<usize> = if m >= target {
        let mut v = index::sample(&mut r, m, target).into_vec();
        v.sort_unstable();
        v
    } else {
        let mut v: Vec<usize> = (0..m).collect();
        v.extend((m..target).map(|_| r.random_range(0..m)));
        v
    };
    let points = picks.iter().map(|&i| cloud.points()[i]).collect();
    GaussianCloud::new(cloud.source_id(), points)
}
