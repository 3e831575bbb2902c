use super::curves::{hilbert_encode, morton_encode};
use super::OrderingStrategy;

const DEGENERATE_SPAN: f64 = 1e-12;

/// Per-axis min-max quantization to integer cells `0..=2^b - 1`.
fn quantize(centers: &[[f64; 3]], bits: u32) -> Vec<[u64; 3]> {
    let top = ((1u64 << bits) - 1) as f64;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in centers {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    centers
        .iter()
        .map(|c| {
            std::array::from_fn(|a| {
                let span = hi[a] - lo[a];
                if span < DEGENERATE_SPAN {
                    0
                } else {
                    ((c[a] - lo[a]) / span * top).round().clamp(0.0, top) as u64
                }
            })
        })
        .collect()
}

/// Sort permutation of patch centers under `strategy`; entry `j` is the
/// original index placed at position `j`. Ties keep the lower original index.
pub fn order_patches(centers: &[[f64; 3]], strategy: OrderingStrategy, bits: u32) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..centers.len()).collect();
    match strategy {
        OrderingStrategy::Xyz => perm.sort_by(|&a, &b| {
            let (p, q) = (centers[a], centers[b]);
            p[0].total_cmp(&q[0])
                .then(p[1].total_cmp(&q[1]))
                .then(p[2].total_cmp(&q[2]))
        }),
        OrderingStrategy::Hilbert | OrderingStrategy::ZOrder => {
            let keys: Vec<u64> = quantize(centers, bits)
                .into_iter()
                .map(|cell| {
                    let key = match strategy {
                        OrderingStrategy::Hilbert => hilbert_encode(cell, bits),
                        _ => morton_encode(cell, bits),
                    };
                    key.expect("quantized cells are in range")
                })
                .collect();
            perm.sort_by_key(|&i| keys[i]);
        }
    }
    perm
}
