use super::TokenizerError;
use crate::par;

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Farthest point sampling.
///
/// Starts at the point with the largest norm, then repeatedly takes the
/// unselected point whose distance to the selected set is largest. All ties
/// go to the lowest index.
pub fn farthest_point_sampling(
    positions: &[[f64; 3]],
    g: usize,
) -> Result<Vec<usize>, TokenizerError> {
    let m = positions.len();
    if g == 0 || g > m {
        return Err(TokenizerError::Argument(format!(
            "cannot sample {g} centers from {m} points"
        )));
    }
    let origin = [0.0; 3];
    let mut start = 0;
    let mut best = dist2(&positions[0], &origin);
    for (i, p) in positions.iter().enumerate().skip(1) {
        let d = dist2(p, &origin);
        if d > best {
            best = d;
            start = i;
        }
    }

    let mut selected = vec![false; m];
    let mut min_d: Vec<f64> = positions
        .iter()
        .map(|p| dist2(p, &positions[start]))
        .collect();
    selected[start] = true;
    let mut out = Vec::with_capacity(g);
    out.push(start);
    while out.len() < g {
        let mut next = usize::MAX;
        let mut next_d = f64::NEG_INFINITY;
        for i in 0..m {
            if !selected[i] && min_d[i] > next_d {
                next_d = min_d[i];
                next = i;
            }
        }
        selected[next] = true;
        out.push(next);
        let c = positions[next];
        for (d, p) in min_d.iter_mut().zip(positions) {
            let nd = dist2(p, &c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(out)
}

/// The `n` nearest points to each center, ascending by distance then index.
pub fn knn_group(
    positions: &[[f64; 3]],
    centers: &[usize],
    n: usize,
) -> Result<Vec<Vec<usize>>, TokenizerError> {
    let m = positions.len();
    if n == 0 || n > m {
        return Err(TokenizerError::Argument(format!(
            "cannot take {n} neighbors from {m} points"
        )));
    }
    if let Some(&bad) = centers.iter().find(|&&c| c >= m) {
        return Err(TokenizerError::Argument(format!(
            "center index {bad} out of range for {m} points"
        )));
    }
    Ok(par::map_slice(centers, |&c| {
        let center = positions[c];
        let mut cand: Vec<(f64, usize)> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| (dist2(p, &center), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if n < m {
            cand.select_nth_unstable_by(n - 1, cmp);
            cand.truncate(n);
        }
        cand.sort_unstable_by(cmp);
        cand.into_iter().map(|(_, i)| i).collect()
    }))
}
