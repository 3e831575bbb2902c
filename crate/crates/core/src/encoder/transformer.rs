//! Pre-norm transformer over serialized patch tokens.
//!
//! Per ordering: `x_0 = [cls; tokens[perm]] + pos_o`, then `depth` blocks of
//! `x += attn(LN(x))`, `x += mlp(LN(x))`. The final-normed class rows are
//! averaged over orderings, projected to the teacher width and L2-normalized.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD, Axis, Zip};

use super::{Embedding, EncoderConfig, EncoderError};
use crate::nn::{self, LayerNormCache};
use crate::params::{
    trunc_normal_matrix, trunc_normal_vector, ParamGroup, ParamKind, ParamMut, ParamRef, ParamSet,
    INIT_STD,
};
use crate::rng::Rng;
use crate::tokenizer::{OrderingStrategy, TokenSequence};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    pub ln1_gamma: Array1<T>,
    pub ln1_beta: Array1<T>,
    /// `d × 3d`, column blocks `[q | k | v]`, each split into heads.
    pub qkv_w: Array2<T>,
    pub qkv_b: Array1<T>,
    pub out_w: Array2<T>,
    pub out_b: Array1<T>,
    pub ln2_gamma: Array1<T>,
    pub ln2_beta: Array1<T>,
    pub fc1_w: Array2<T>,
    pub fc1_b: Array1<T>,
    pub fc2_w: Array2<T>,
    pub fc2_b: Array1<T>,
}

impl<T: Real> BlockParams<T> {
    fn init(d: usize, hidden: usize, rng: &mut Rng) -> Self {
        BlockParams {
            ln1_gamma: Array1::ones(d),
            ln1_beta: Array1::zeros(d),
            qkv_w: trunc_normal_matrix(rng, d, 3 * d, INIT_STD),
            qkv_b: Array1::zeros(3 * d),
            out_w: trunc_normal_matrix(rng, d, d, INIT_STD),
            out_b: Array1::zeros(d),
            ln2_gamma: Array1::ones(d),
            ln2_beta: Array1::zeros(d),
            fc1_w: trunc_normal_matrix(rng, d, hidden, INIT_STD),
            fc1_b: Array1::zeros(hidden),
            fc2_w: trunc_normal_matrix(rng, hidden, d, INIT_STD),
            fc2_b: Array1::zeros(d),
        }
    }

    fn views(&self) -> [(&'static str, ParamKind, ArrayViewD<'_, T>); 12] {
        use ParamKind::*;
        [
            ("ln1.gamma", Norm, self.ln1_gamma.view().into_dyn()),
            ("ln1.beta", Norm, self.ln1_beta.view().into_dyn()),
            ("attn.qkv.w", Weight, self.qkv_w.view().into_dyn()),
            ("attn.qkv.b", Bias, self.qkv_b.view().into_dyn()),
            ("attn.out.w", Weight, self.out_w.view().into_dyn()),
            ("attn.out.b", Bias, self.out_b.view().into_dyn()),
            ("ln2.gamma", Norm, self.ln2_gamma.view().into_dyn()),
            ("ln2.beta", Norm, self.ln2_beta.view().into_dyn()),
            ("mlp.fc1.w", Weight, self.fc1_w.view().into_dyn()),
            ("mlp.fc1.b", Bias, self.fc1_b.view().into_dyn()),
            ("mlp.fc2.w", Weight, self.fc2_w.view().into_dyn()),
            ("mlp.fc2.b", Bias, self.fc2_b.view().into_dyn()),
        ]
    }

    fn views_mut(&mut self) -> [(&'static str, ParamKind, ArrayViewMutD<'_, T>); 12] {
        use ParamKind::*;
        [
            ("ln1.gamma", Norm, self.ln1_gamma.view_mut().into_dyn()),
            ("ln1.beta", Norm, self.ln1_beta.view_mut().into_dyn()),
            ("attn.qkv.w", Weight, self.qkv_w.view_mut().into_dyn()),
            ("attn.qkv.b", Bias, self.qkv_b.view_mut().into_dyn()),
            ("attn.out.w", Weight, self.out_w.view_mut().into_dyn()),
            ("attn.out.b", Bias, self.out_b.view_mut().into_dyn()),
            ("ln2.gamma", Norm, self.ln2_gamma.view_mut().into_dyn()),
            ("ln2.beta", Norm, self.ln2_beta.view_mut().into_dyn()),
            ("mlp.fc1.w", Weight, self.fc1_w.view_mut().into_dyn()),
            ("mlp.fc1.b", Bias, self.fc1_b.view_mut().into_dyn()),
            ("mlp.fc2.w", Weight, self.fc2_w.view_mut().into_dyn()),
            ("mlp.fc2.b", Bias, self.fc2_b.view_mut().into_dyn()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    /// One positional table per entry, in the same order as `pos`.
    pub orderings: Vec<OrderingStrategy>,
    pub cls: Array1<T>,
    /// `(g + 1) × d` each.
    pub pos: Vec<Array2<T>>,
    pub blocks: Vec<BlockParams<T>>,
    pub norm_gamma: Array1<T>,
    pub norm_beta: Array1<T>,
    /// `d × clip_dim`, no bias.
    pub proj: Array2<T>,
}

impl<T: Real> EncoderParams<T> {
    pub fn init(
        config: &EncoderConfig,
        orderings: &[OrderingStrategy],
        num_patches: usize,
        rng: &mut Rng,
    ) -> Self {
        let d = config.width;
        let cls = trunc_normal_vector(rng, d, INIT_STD);
        let pos = orderings
            .iter()
            .map(|_| trunc_normal_matrix(rng, num_patches + 1, d, INIT_STD))
            .collect();
        let blocks = (0..config.depth)
            .map(|_| BlockParams::init(d, config.mlp_dim(), rng))
            .collect();
        EncoderParams {
            orderings: orderings.to_vec(),
            cls,
            pos,
            blocks,
            norm_gamma: Array1::ones(d),
            norm_beta: Array1::zeros(d),
            proj: trunc_normal_matrix(rng, d, config.clip_dim, INIT_STD),
        }
    }

    pub fn width(&self) -> usize {
        self.cls.len()
    }

    pub fn num_patches(&self) -> usize {
        self.pos.first().map_or(0, |p| p.nrows().saturating_sub(1))
    }
}

impl<T: Real> ParamSet<T> for EncoderParams<T> {
    fn params(&self) -> Vec<ParamRef<'_, T>> {
        let r = |name: String, kind, value| ParamRef {
            name,
            kind,
            group: ParamGroup::Encoder,
            value,
        };
        let mut out = vec![r(
            "cls".into(),
            ParamKind::ClassToken,
            self.cls.view().into_dyn(),
        )];
        for (o, p) in self.orderings.iter().zip(&self.pos) {
            out.push(r(
                format!("pos.{}", o.name()),
                ParamKind::Position,
                p.view().into_dyn(),
            ));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, kind, v) in b.views() {
                out.push(r(format!("blocks.{i}.{name}"), kind, v));
            }
        }
        out.push(r(
            "norm.gamma".into(),
            ParamKind::Norm,
            self.norm_gamma.view().into_dyn(),
        ));
        out.push(r(
            "norm.beta".into(),
            ParamKind::Norm,
            self.norm_beta.view().into_dyn(),
        ));
        out.push(r(
            "proj.w".into(),
            ParamKind::Weight,
            self.proj.view().into_dyn(),
        ));
        out
    }

    fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let r = |name: String, kind, value| ParamMut {
            name,
            kind,
            group: ParamGroup::Encoder,
            value,
        };
        let mut out = vec![r(
            "cls".into(),
            ParamKind::ClassToken,
            self.cls.view_mut().into_dyn(),
        )];
        for (o, p) in self.orderings.iter().zip(&mut self.pos) {
            out.push(r(
                format!("pos.{}", o.name()),
                ParamKind::Position,
                p.view_mut().into_dyn(),
            ));
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (name, kind, v) in b.views_mut() {
                out.push(r(format!("blocks.{i}.{name}"), kind, v));
            }
        }
        out.push(r(
            "norm.gamma".into(),
            ParamKind::Norm,
            self.norm_gamma.view_mut().into_dyn(),
        ));
        out.push(r(
            "norm.beta".into(),
            ParamKind::Norm,
            self.norm_beta.view_mut().into_dyn(),
        ));
        out.push(r(
            "proj.w".into(),
            ParamKind::Weight,
            self.proj.view_mut().into_dyn(),
        ));
        out
    }
}

struct BlockCache<T> {
    a: Array2<T>,
    ln1: LayerNormCache<T>,
    qkv: Array2<T>,
    probs: Vec<Array2<T>>,
    o: Array2<T>,
    b: Array2<T>,
    ln2: LayerNormCache<T>,
    u: Array2<T>,
    gu: Array2<T>,
}

struct OrderingTrace<T> {
    perm: Vec<usize>,
    blocks: Vec<BlockCache<T>>,
    final_ln: LayerNormCache<T>,
}

/// Intermediates needed by [`encode_backward`].
pub struct EncoderTrace<T> {
    orderings: Vec<OrderingTrace<T>>,
    heads: usize,
    pooled: Array1<T>,
    norm: T,
    output: Array1<T>,
}

fn block_forward<T: Real>(
    x: &Array2<T>,
    p: &BlockParams<T>,
    heads: usize,
) -> (Array2<T>, BlockCache<T>) {
    let (len, d) = x.dim();
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (a, ln1) = nn::layer_norm(&x.view(), &p.ln1_gamma, &p.ln1_beta);
    let qkv = nn::linear(&a.view(), &p.qkv_w, Some(&p.qkv_b));
    let mut o = Array2::zeros((len, d));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let q = qkv.slice(s![.., lo..hi]);
        let k = qkv.slice(s![.., d + lo..d + hi]);
        let v = qkv.slice(s![.., 2 * d + lo..2 * d + hi]);
        let mut sc = q.dot(&k.t());
        sc.mapv_inplace(|z| z * scale);
        nn::softmax_rows(&mut sc);
        o.slice_mut(s![.., lo..hi]).assign(&sc.dot(&v));
        probs.push(sc);
    }
    let x1 = x + &nn::linear(&o.view(), &p.out_w, Some(&p.out_b));
    let (b, ln2) = nn::layer_norm(&x1.view(), &p.ln2_gamma, &p.ln2_beta);
    let u = nn::linear(&b.view(), &p.fc1_w, Some(&p.fc1_b));
    let gu = u.mapv(nn::gelu);
    let x2 = x1 + nn::linear(&gu.view(), &p.fc2_w, Some(&p.fc2_b));
    let cache = BlockCache {
        a,
        ln1,
        qkv,
        probs,
        o,
        b,
        ln2,
        u,
        gu,
    };
    (x2, cache)
}

fn block_backward<T: Real>(
    dx2: &Array2<T>,
    c: &BlockCache<T>,
    p: &BlockParams<T>,
    g: &mut BlockParams<T>,
) -> Array2<T> {
    let (len, d) = dx2.dim();
    let heads = c.probs.len();
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();

    let mut du = nn::linear_backward(
        &c.gu.view(),
        &p.fc2_w,
        &dx2.view(),
        &mut g.fc2_w,
        Some(&mut g.fc2_b),
    );
    Zip::from(&mut du)
        .and(&c.u)
        .for_each(|d, &u| *d *= nn::gelu_grad(u));
    let db = nn::linear_backward(
        &c.b.view(),
        &p.fc1_w,
        &du.view(),
        &mut g.fc1_w,
        Some(&mut g.fc1_b),
    );
    let dx1 = dx2
        + &nn::layer_norm_backward(
            &db.view(),
            &c.ln2,
            &p.ln2_gamma,
            &mut g.ln2_gamma,
            &mut g.ln2_beta,
        );

    let d_o = nn::linear_backward(
        &c.o.view(),
        &p.out_w,
        &dx1.view(),
        &mut g.out_w,
        Some(&mut g.out_b),
    );
    let mut dqkv = Array2::zeros((len, 3 * d));
    for (h, pr) in c.probs.iter().enumerate() {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let q = c.qkv.slice(s![.., lo..hi]);
        let k = c.qkv.slice(s![.., d + lo..d + hi]);
        let v = c.qkv.slice(s![.., 2 * d + lo..2 * d + hi]);
        let d_oh = d_o.slice(s![.., lo..hi]);
        let dp = d_oh.dot(&v.t());
        dqkv.slice_mut(s![.., 2 * d + lo..2 * d + hi])
            .assign(&pr.t().dot(&d_oh));
        let mut ds = pr * &dp;
        let row_dot = ds.sum_axis(Axis(1));
        Zip::from(ds.rows_mut())
            .and(pr.rows())
            .and(&row_dot)
            .for_each(|mut dsr, pr_row, &rd| {
                Zip::from(&mut dsr)
                    .and(pr_row)
                    .for_each(|z, &pv| *z = (*z - pv * rd) * scale);
            });
        dqkv.slice_mut(s![.., lo..hi]).assign(&ds.dot(&k));
        dqkv.slice_mut(s![.., d + lo..d + hi])
            .assign(&ds.t().dot(&q));
    }
    let da = nn::linear_backward(
        &c.a.view(),
        &p.qkv_w,
        &dqkv.view(),
        &mut g.qkv_w,
        Some(&mut g.qkv_b),
    );
    dx1 + nn::layer_norm_backward(
        &da.view(),
        &c.ln1,
        &p.ln1_gamma,
        &mut g.ln1_gamma,
        &mut g.ln1_beta,
    )
}

fn all_finite<T: Real>(x: &Array2<T>) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn check_inputs<T: Real>(
    tokens: &TokenSequence<T>,
    params: &EncoderParams<T>,
    config: &EncoderConfig,
) -> Result<(), EncoderError> {
    let arg = |m: String| Err(EncoderError::Argument(m));
    let (g, d) = tokens.tokens.dim();
    if d != config.width || params.width() != config.width {
        return arg(format!(
            "token width {d} does not match encoder width {}",
            config.width
        ));
    }
    if params.blocks.len() != config.depth || params.proj.dim() != (config.width, config.clip_dim) {
        return arg("encoder parameters do not match the configuration".into());
    }
    if tokens.orderings != params.orderings || tokens.permutations.len() != tokens.orderings.len() {
        return arg(format!(
            "token orderings {:?} do not match positional tables {:?}",
            tokens.orderings, params.orderings
        ));
    }
    if params.pos.iter().any(|p| p.dim() != (g + 1, d)) {
        return arg(format!(
            "{g} tokens do not fit positional tables of {} rows",
            params.num_patches() + 1
        ));
    }
    for perm in &tokens.permutations {
        let mut seen = vec![false; g];
        if perm.len() != g
            || !perm
                .iter()
                .all(|&i| i < g && !std::mem::replace(&mut seen[i], true))
        {
            return arg("ordering permutation is not a permutation of the tokens".into());
        }
    }
    Ok(())
}

/// Forward pass from tokens to a unit-norm embedding.
pub fn encode_tokens<T: Real>(
    tokens: &TokenSequence<T>,
    params: &EncoderParams<T>,
    config: &EncoderConfig,
) -> Result<(Embedding<T>, EncoderTrace<T>), EncoderError> {
    check_inputs(tokens, params, config)?;
    if !all_finite(&tokens.tokens) {
        return Err(EncoderError::NumericFault { layer: 0 });
    }
    let (g, d) = tokens.tokens.dim();
    let mut pooled = Array1::zeros(d);
    let mut traces = Vec::with_capacity(tokens.orderings.len());
    for (perm, pos) in tokens.permutations.iter().zip(&params.pos) {
        let mut x = pos.clone();
        x.row_mut(0).zip_mut_with(&params.cls, |a, &b| *a += b);
        for (j, &src) in perm.iter().enumerate() {
            x.row_mut(j + 1)
                .zip_mut_with(&tokens.tokens.row(src), |a, &b| *a += b);
        }
        debug_assert_eq!(x.nrows(), g + 1);
        let mut blocks = Vec::with_capacity(params.blocks.len());
        for (layer, bp) in params.blocks.iter().enumerate() {
            let (next, cache) = block_forward(&x, bp, config.heads);
            if !all_finite(&next) {
                return Err(EncoderError::NumericFault { layer: layer + 1 });
            }
            x = next;
            blocks.push(cache);
        }
        let (f, final_ln) = nn::layer_norm(
            &x.slice(s![0..1, ..]),
            &params.norm_gamma,
            &params.norm_beta,
        );
        pooled += &f.row(0);
        traces.push(OrderingTrace {
            perm: perm.clone(),
            blocks,
            final_ln,
        });
    }
    pooled.mapv_inplace(|v| v / T::of(traces.len() as f64));
    let e = pooled.dot(&params.proj);
    let norm = e.dot(&e).sqrt();
    if !norm.is_finite() || norm <= T::zero() {
        return Err(EncoderError::NumericFault {
            layer: config.depth + 1,
        });
    }
    let output = e.mapv(|v| v / norm);
    let embedding = Embedding {
        vector: output.clone(),
        normalized: true,
    };
    let trace = EncoderTrace {
        orderings: traces,
        heads: config.heads,
        pooled,
        norm,
        output,
    };
    Ok((embedding, trace))
}

/// Accumulates parameter gradients for upstream `d_output` and returns the
/// gradient with respect to the `g × d` input tokens.
pub fn encode_backward<T: Real>(
    trace: &EncoderTrace<T>,
    d_output: &ArrayView1<T>,
    params: &EncoderParams<T>,
    grads: &mut EncoderParams<T>,
) -> Array2<T> {
    debug_assert!(trace.heads > 0);
    let y = &trace.output;
    let along = y.dot(d_output);
    let de = (d_output - &(y * along)).mapv(|v| v / trace.norm);
    ndarray::linalg::general_mat_mul(
        T::one(),
        &trace.pooled.view().insert_axis(Axis(1)),
        &de.view().insert_axis(Axis(0)),
        T::one(),
        &mut grads.proj,
    );
    let count = T::of(trace.orderings.len() as f64);
    let dpooled = params.proj.dot(&de).mapv(|v| v / count);
    let dcls = dpooled.insert_axis(Axis(0));

    let g = params.num_patches();
    let mut dtokens = Array2::zeros((g, params.width()));
    for (o, ot) in trace.orderings.iter().enumerate() {
        let drow = nn::layer_norm_backward(
            &dcls.view(),
            &ot.final_ln,
            &params.norm_gamma,
            &mut grads.norm_gamma,
            &mut grads.norm_beta,
        );
        let mut dx = Array2::zeros((g + 1, params.width()));
        dx.row_mut(0).assign(&drow.row(0));
        for (layer, cache) in ot.blocks.iter().enumerate().rev() {
            dx = block_backward(&dx, cache, &params.blocks[layer], &mut grads.blocks[layer]);
        }
        grads.pos[o] += &dx;
        grads.cls += &dx.row(0);
        for (j, &src) in ot.perm.iter().enumerate() {
            let mut t = dtokens.row_mut(src);
            t += &dx.row(j + 1);
        }
    }
    dtokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn setup(
        orderings: &[OrderingStrategy],
        g: usize,
    ) -> (EncoderConfig, EncoderParams<f64>, TokenSequence<f64>) {
        let config = EncoderConfig {
            depth: 2,
            width: 8,
            heads: 2,
            clip_dim: 5,
        };
        let mut r = rng::stream(7, "test");
        let params = EncoderParams::init(&config, orderings, g, &mut r);
        let tokens = trunc_normal_matrix(&mut r, g, 8, 1.0);
        let permutations = orderings
            .iter()
            .enumerate()
            .map(|(k, _)| (0..g).map(|j| (j + k) % g).collect())
            .collect();
        let seq = TokenSequence {
            tokens,
            orderings: orderings.to_vec(),
            permutations,
        };
        (config, params, seq)
    }

    #[test]
    fn output_is_unit_norm() {
        let (config, params, seq) = setup(&OrderingStrategy::ALL, 4);
        let (e, _) = encode_tokens(&seq, &params, &config).unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-6);
        assert!(e.normalized);
    }

    #[test]
    fn zero_weights_ignore_tokens() {
        let (config, mut params, mut seq) = setup(&[OrderingStrategy::Xyz], 4);
        for b in &mut params.blocks {
            for (_, _, mut v) in b.views_mut() {
                v.fill(0.0);
            }
            b.ln1_gamma.fill(1.0);
            b.ln2_gamma.fill(1.0);
        }
        params.pos[0].fill(0.0);
        let (a, _) = encode_tokens(&seq, &params, &config).unwrap();
        seq.tokens.mapv_inplace(|v| v * 3.0 + 1.0);
        let (b, _) = encode_tokens(&seq, &params, &config).unwrap();
        assert_eq!(a, b);
        let (f, _) = nn::layer_norm(
            &params.cls.view().insert_axis(Axis(0)),
            &params.norm_gamma,
            &params.norm_beta,
        );
        let e = f.row(0).dot(&params.proj);
        let expected = &e / e.dot(&e).sqrt();
        assert!(a
            .vector
            .iter()
            .zip(&expected)
            .all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn positions_bind_to_sequence_slots() {
        let (config, params, seq) = setup(&[OrderingStrategy::Hilbert], 5);
        let (a, _) = encode_tokens(&seq, &params, &config).unwrap();
        // permute the token rows and compose the permutation so every slot sees the same token
        let shuffle = [3usize, 0, 4, 1, 2];
        let mut tokens = seq.tokens.clone();
        for (new, &old) in shuffle.iter().enumerate() {
            tokens.row_mut(new).assign(&seq.tokens.row(old));
        }
        let perm = seq.permutations[0]
            .iter()
            .map(|&old| shuffle.iter().position(|&s| s == old).unwrap())
            .collect();
        let moved = TokenSequence {
            tokens,
            orderings: seq.orderings.clone(),
            permutations: vec![perm],
        };
        let (b, _) = encode_tokens(&moved, &params, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (config, params, mut seq) = setup(&[OrderingStrategy::Xyz], 4);
        seq.permutations[0] = vec![0, 0, 1, 2];
        assert!(matches!(
            encode_tokens(&seq, &params, &config),
            Err(EncoderError::Argument(_))
        ));
        seq.permutations[0] = vec![0, 1, 2, 3];
        seq.tokens[[1, 1]] = f64::NAN;
        assert!(matches!(
            encode_tokens(&seq, &params, &config),
            Err(EncoderError::NumericFault { layer: 0 })
        ));
        seq.tokens[[1, 1]] = 0.0;
        seq.orderings = vec![OrderingStrategy::ZOrder];
        assert!(encode_tokens(&seq, &params, &config).is_err());
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let (config, params, seq) = setup(&OrderingStrategy::ALL, 4);
        let (e, trace) = encode_tokens(&seq, &params, &config).unwrap();
        let up = e.vector.mapv(|v| v.sin() + 0.3);
        let mut g1 = params.zeros_like();
        let t1 = encode_backward(&trace, &up.view(), &params, &mut g1);
        let mut g2 = params.zeros_like();
        let t2 = encode_backward(&trace, &(&up * 2.0).view(), &params, &mut g2);
        for (a, b) in g1.params().iter().zip(g2.params()) {
            assert!(a
                .value
                .iter()
                .zip(b.value.iter())
                .all(|(x, y)| (2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs())));
        }
        assert!(t1
            .iter()
            .zip(&t2)
            .all(|(x, y)| (2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs())));
        let mut g0 = params.zeros_like();
        let t0 = encode_backward(&trace, &Array1::zeros(5).view(), &params, &mut g0);
        assert!(g0
            .params()
            .iter()
            .all(|p| p.value.iter().all(|&v| v == 0.0)));
        assert!(t0.iter().all(|&v| v == 0.0));
    }
}
