//! Contrastive and voting objectives against hand-derived values.

use gsalign::alignment::{
    contra, loss_img, loss_text, raw_view_scores, total_loss, voting_scores, Batch, ImageLoss,
    Temperature,
};
use gsalign::rng;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// `−ln(1 + e⁻¹)`: log-probability of the match in a 2-way softmax over logits (1, 0).
fn two_way() -> f64 {
    -(1.0 + (-1.0f64).exp()).ln()
}

fn unit_rows(n: usize, d: usize, r: &mut impl rand::Rng) -> Array2<f64> {
    let mut m: Array2<f64> = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(r));
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt();
        row /= norm;
    }
    m
}

/// Symmetric contrastive loss written out from its definition, one softmax at a time.
fn reference_pair_loss(a: &Array2<f64>, b: &Array2<f64>, tau: f64, w: &[f64]) -> f64 {
    let n = a.nrows();
    let s = a.dot(&b.t()) / tau;
    let mut acc = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| s[[i, j]].exp()).sum();
        let col: f64 = (0..n).map(|j| s[[j, i]].exp()).sum();
        acc += w[i] * ((s[[i, i]].exp() / row).ln() + (s[[i, i]].exp() / col).ln());
    }
    -acc / (2.0 * n as f64)
}

#[test]
fn orthonormal_pair_values() {
    let e = array![[1.0, 0.0], [0.0, 1.0]];
    let c = contra(&e.view(), &e.view(), 1.0).unwrap();
    for v in c.iter() {
        assert!((v - two_way()).abs() < 1e-12);
        assert!((v + 0.31326).abs() < 1e-5);
    }
    let lt = loss_text(&e.view(), &e.view(), 1.0).unwrap();
    assert!((lt - 0.31326).abs() < 1e-5);
    assert!((lt + two_way()).abs() < 1e-12);

    let batch = Batch {
        gaussian: e.clone(),
        text: e.clone(),
        views: vec![e.clone(), e.clone()],
    };
    let li = loss_img(&batch, 1.0).unwrap();
    assert!((li - 0.31326).abs() < 1e-5);
    let (b, _) = total_loss(&batch, Temperature::new(1.0), ImageLoss::Voting).unwrap();
    assert!((b.total - 0.62652).abs() < 1e-5);
    assert_eq!(b.total, b.l_text + b.l_img);
}

#[test]
fn single_pair_is_zero() {
    let e = array![[0.6, 0.8]];
    assert_eq!(contra(&e.view(), &e.view(), 0.07).unwrap(), array![0.0]);
    assert_eq!(loss_text(&e.view(), &e.view(), 0.07).unwrap(), 0.0);
    let batch = Batch {
        gaussian: e.clone(),
        text: e.clone(),
        views: vec![e.clone(), array![[0.0, 1.0]], array![[1.0, 0.0]]],
    };
    let (b, _) = total_loss(&batch, Temperature::new(0.07), ImageLoss::Voting).unwrap();
    assert_eq!(b.total, 0.0);
}

#[test]
fn swapping_objects_keeps_the_text_loss() {
    let mut r = rng::stream(3, "swap");
    let g = unit_rows(2, 5, &mut r);
    let t = unit_rows(2, 5, &mut r);
    let flip = |m: &Array2<f64>| ndarray::stack![ndarray::Axis(0), m.row(1), m.row(0)];
    let a = loss_text(&g.view(), &t.view(), 0.2).unwrap();
    let b = loss_text(&flip(&g).view(), &flip(&t).view(), 0.2).unwrap();
    assert!((a - b).abs() < 1e-15);
}

#[test]
fn two_view_softmax_example() {
    let text = array![1.0, 0.0];
    let views = array![[1.0, 0.0], [-1.0, 0.0]];
    let w = voting_scores(&text.view(), &views.view());
    let e = 1f64.exp();
    assert!((w[0] - e / (e + 1.0 / e)).abs() < 1e-12);
    assert!((w[0] - 0.8808).abs() < 1e-4 && (w[1] - 0.1192).abs() < 1e-4);
    let same = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
    assert_eq!(
        voting_scores(&text.view(), &same.view()),
        Array1::from_elem(3, 1.0 / 3.0)
    );
}

#[test]
fn ablation_switch_gives_text_loss_exactly() {
    let mut r = rng::stream(4, "ablation");
    let batch = Batch {
        gaussian: unit_rows(6, 8, &mut r),
        text: unit_rows(6, 8, &mut r),
        views: (0..3).map(|_| unit_rows(6, 8, &mut r)).collect(),
    };
    let (b, g) = total_loss(&batch, Temperature::new(0.1), ImageLoss::Off).unwrap();
    assert_eq!(b.l_img, 0.0);
    assert_eq!(b.total, b.l_text);
    assert_eq!(
        b.l_text,
        loss_text(&batch.gaussian.view(), &batch.text.view(), b_tau(0.1)).unwrap()
    );
    assert!(g.d_gaussian.iter().all(|v| v.is_finite()));
}

fn b_tau(tau: f64) -> f64 {
    Temperature::<f64>::new(tau).tau()
}

#[test]
fn scaling_similarities_keeps_contra_ranking() {
    // Diagonal similarity matrices: off-diagonal logits are 0, so Contra_i is
    // monotone in S_ii and must rank objects like the diagonal does at any τ.
    let mut r = rng::stream(5, "ranking");
    for _ in 0..50 {
        let diag: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let a = Array2::from_diag(&Array1::from(diag.clone()));
        let b = Array2::<f64>::eye(4);
        let scale = r.random_range(0.2..5.0);
        for tau in [1.0, 1.0 / scale] {
            let c = contra(&a.view(), &b.view(), tau).unwrap();
            for i in 0..4 {
                let expected = diag[i] / tau - ((diag[i] / tau).exp() + 3.0).ln();
                assert!((c[i] - expected).abs() < 1e-12);
                for j in 0..4 {
                    assert_eq!(diag[i] < diag[j], c[i] < c[j]);
                }
            }
            assert!(c.iter().all(|v| *v <= 0.0));
        }
    }
}

#[test]
fn voted_image_loss_matches_reference_sum() {
    let mut r = rng::stream(6, "reference");
    let (n, d, k) = (7, 6, 3);
    let batch = Batch {
        gaussian: unit_rows(n, d, &mut r),
        text: unit_rows(n, d, &mut r),
        views: (0..k).map(|_| unit_rows(n, d, &mut r)).collect(),
    };
    let tau = 0.3;
    let (b, _) = total_loss(&batch, Temperature::new(tau), ImageLoss::Voting).unwrap();
    let tau = b_tau(tau);
    let mut expected = 0.0;
    for (kk, view) in batch.views.iter().enumerate() {
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let raw: Vec<f64> = (0..k)
                    .map(|v| batch.text.row(i).dot(&batch.views[v].row(i)))
                    .collect();
                let z: f64 = raw.iter().map(|x| x.exp()).sum();
                raw[kk].exp() / z
            })
            .collect();
        expected += reference_pair_loss(&batch.gaussian, view, tau, &w);
    }
    assert!(
        (b.l_img - expected).abs() < 1e-12,
        "{} vs {}",
        b.l_img,
        expected
    );
    let ones = vec![1.0; n];
    assert!(
        (b.l_text - reference_pair_loss(&batch.gaussian, &batch.text, tau, &ones)).abs() < 1e-12
    );

    let (lit, _) = total_loss(&batch, Temperature::new(0.3), ImageLoss::Literal).unwrap();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            raw_view_scores(&batch.text.row(i), &batch.object_views(i).view())
                .mean()
                .unwrap()
        })
        .collect();
    assert!((lit.l_img - reference_pair_loss(&batch.gaussian, &batch.text, tau, &s)).abs() < 1e-12);
}

#[test]
fn log_tau_gradient_matches_finite_difference() {
    let mut r = rng::stream(7, "tau");
    let batch = Batch {
        gaussian: unit_rows(5, 8, &mut r),
        text: unit_rows(5, 8, &mut r),
        views: (0..5).map(|_| unit_rows(5, 8, &mut r)).collect(),
    };
    for image in [ImageLoss::Voting, ImageLoss::Literal, ImageLoss::Off] {
        let lt = 0.1f64.ln();
        let h = 1e-5;
        let (_, g) = total_loss(&batch, Temperature { log_tau: lt }, image).unwrap();
        let f = |x: f64| {
            total_loss(&batch, Temperature { log_tau: x }, image)
                .unwrap()
                .0
                .total
        };
        let numeric = (f(lt + h) - f(lt - h)) / (2.0 * h);
        assert!(
            (g.d_log_tau - numeric).abs() <= 1e-6 * numeric.abs().max(1e-12),
            "{image:?}"
        );
    }
}

#[test]
fn rejects_bad_inputs() {
    let e = array![[1.0, 0.0], [0.0, 1.0]];
    assert!(contra(&e.view(), &e.view(), 0.0).is_err());
    assert!(contra(&e.view(), &array![[f64::NAN, 0.0], [0.0, 1.0]].view(), 1.0).is_err());
    assert!(contra(&e.view(), &array![[1.0, 0.0]].view(), 1.0).is_err());
    let batch = Batch {
        gaussian: e.clone(),
        text: e.clone(),
        views: vec![],
    };
    assert!(total_loss(&batch, Temperature::new(0.1), ImageLoss::Voting).is_err());
}

#[test]
fn the_matching_view_wins_the_vote() {
    let d = 64;
    let k = 5;
    let mut r = rng::stream(8, "votes");
    let mut wins = 0;
    for _ in 0..1000 {
        let text = unit_rows(1, d, &mut r).row(0).to_owned();
        let mut views = unit_rows(k, d, &mut r);
        let slot = r.random_range(0..k);
        views.row_mut(slot).assign(&text);
        let w = voting_scores(&text.view(), &views.view());
        let best = (0..k).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        wins += usize::from(best == slot);
    }
    assert!(wins >= 990, "{wins}/1000");
}

fn batch_strategy() -> impl Strategy<Value = (Batch<f64>, f64)> {
    (1usize..7, 1usize..5, 2usize..9, any::<u64>(), 0.02f64..3.0).prop_map(
        |(n, k, d, seed, tau)| {
            let mut r = rng::stream(seed, "prop");
            let batch = Batch {
                gaussian: unit_rows(n, d, &mut r),
                text: unit_rows(n, d, &mut r),
                views: (0..k).map(|_| unit_rows(n, d, &mut r)).collect(),
            };
            (batch, tau)
        },
    )
}

proptest! {
    #[test]
    fn loss_invariants((batch, tau) in batch_strategy()) {
        let c = contra(&batch.gaussian.view(), &batch.text.view(), tau).unwrap();
        prop_assert!(c.iter().all(|v| *v <= 0.0));
        for image in [ImageLoss::Voting, ImageLoss::Literal, ImageLoss::Off] {
            let (b, _) = total_loss(&batch, Temperature::new(tau), image).unwrap();
            prop_assert!(b.l_text >= 0.0);
            prop_assert!(b.total.to_bits() == (b.l_text + b.l_img).to_bits());
            if image == ImageLoss::Voting {
                prop_assert!(b.l_img >= 0.0);
                for row in b.votes.rows() {
                    prop_assert!(row.iter().all(|w| *w > 0.0));
                    prop_assert!((row.sum() - 1.0).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn single_view_collapses_to_symmetric_loss((batch, tau) in batch_strategy()) {
        let one = Batch { views: vec![batch.views[0].clone()], ..batch.clone() };
        let li = loss_img(&one, tau).unwrap();
        let direct = loss_text(&one.gaussian.view(), &one.views[0].view(), tau).unwrap();
        prop_assert!((li - direct).abs() <= 1e-12, "{} vs {}", li, direct);
        let as_text = Batch { views: vec![batch.text.clone()], ..batch.clone() };
        let li = loss_img(&as_text, tau).unwrap();
        let lt = loss_text(&as_text.gaussian.view(), &as_text.text.view(), tau).unwrap();
        prop_assert!((li - lt).abs() <= 1e-12);
    }
}
