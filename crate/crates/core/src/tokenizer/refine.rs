//! Patch refinement block.
//!
//! Path A: shared MLP over the 6 position+color features of every point,
//! max-pooled over the patch. Path B: two rounds of 1×3 convolution along the
//! neighbor axis, batch norm and ReLU over all 19 features, then max-pooled.
//! A linear layer fuses the concatenated pooled vectors into the token.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::normalize::{FEATURE_DIM, POINT_FEATURES};
use super::{PatchSet, TokenizerConfig, TokenizerError};
use crate::nn::{self, BatchNormCache, BranchSignature};
use crate::par;
use crate::params::{
    trunc_normal_matrix, ParamGroup, ParamKind, ParamMut, ParamRef, ParamSet, INIT_STD,
};
use crate::rng::Rng;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerParams<T> {
    /// `6 × h`
    pub point_w1: Array2<T>,
    pub point_b1: Array1<T>,
    /// `h × d`
    pub point_w2: Array2<T>,
    pub point_b2: Array1<T>,
    /// `3·19 × c`, taps ordered (t-1, t, t+1).
    pub conv1_w: Array2<T>,
    pub bn1_gamma: Array1<T>,
    pub bn1_beta: Array1<T>,
    /// `3·c × c`
    pub conv2_w: Array2<T>,
    pub bn2_gamma: Array1<T>,
    pub bn2_beta: Array1<T>,
    /// `(d + c) × d`
    pub fuse_w: Array2<T>,
    pub fuse_b: Array1<T>,
}

impl<T: Real> TokenizerParams<T> {
    pub fn zeros(config: &TokenizerConfig) -> Self {
        let (h, d, c) = (config.point_hidden, config.token_dim, config.conv_channels);
        TokenizerParams {
            point_w1: Array2::zeros((POINT_FEATURES, h)),
            point_b1: Array1::zeros(h),
            point_w2: Array2::zeros((h, d)),
            point_b2: Array1::zeros(d),
            conv1_w: Array2::zeros((3 * FEATURE_DIM, c)),
            bn1_gamma: Array1::zeros(c),
            bn1_beta: Array1::zeros(c),
            conv2_w: Array2::zeros((3 * c, c)),
            bn2_gamma: Array1::zeros(c),
            bn2_beta: Array1::zeros(c),
            fuse_w: Array2::zeros((d + c, d)),
            fuse_b: Array1::zeros(d),
        }
    }

    pub fn init(config: &TokenizerConfig, rng: &mut Rng) -> Self {
        let (h, d, c) = (config.point_hidden, config.token_dim, config.conv_channels);
        let mut p = Self::zeros(config);
        p.point_w1 = trunc_normal_matrix(rng, POINT_FEATURES, h, INIT_STD);
        p.point_w2 = trunc_normal_matrix(rng, h, d, INIT_STD);
        p.conv1_w = trunc_normal_matrix(rng, 3 * FEATURE_DIM, c, INIT_STD);
        p.conv2_w = trunc_normal_matrix(rng, 3 * c, c, INIT_STD);
        p.fuse_w = trunc_normal_matrix(rng, d + c, d, INIT_STD);
        p.bn1_gamma.fill(T::one());
        p.bn2_gamma.fill(T::one());
        p
    }

    pub fn token_dim(&self) -> usize {
        self.fuse_b.len()
    }
}

impl<T: Real> ParamSet<T> for TokenizerParams<T> {
    fn params(&self) -> Vec<ParamRef<'_, T>> {
        use ParamKind::*;
        let r = |name, kind, value| ParamRef::new(name, kind, ParamGroup::Tokenizer, value);
        vec![
            r("point.w1", Weight, self.point_w1.view().into_dyn()),
            r("point.b1", Bias, self.point_b1.view().into_dyn()),
            r("point.w2", Weight, self.point_w2.view().into_dyn()),
            r("point.b2", Bias, self.point_b2.view().into_dyn()),
            r("conv1.w", Weight, self.conv1_w.view().into_dyn()),
            r("bn1.gamma", Norm, self.bn1_gamma.view().into_dyn()),
            r("bn1.beta", Norm, self.bn1_beta.view().into_dyn()),
            r("conv2.w", Weight, self.conv2_w.view().into_dyn()),
            r("bn2.gamma", Norm, self.bn2_gamma.view().into_dyn()),
            r("bn2.beta", Norm, self.bn2_beta.view().into_dyn()),
            r("fuse.w", Weight, self.fuse_w.view().into_dyn()),
            r("fuse.b", Bias, self.fuse_b.view().into_dyn()),
        ]
    }

    fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        use ParamKind::*;
        let r = |name, kind, value| ParamMut::new(name, kind, ParamGroup::Tokenizer, value);
        vec![
            r("point.w1", Weight, self.point_w1.view_mut().into_dyn()),
            r("point.b1", Bias, self.point_b1.view_mut().into_dyn()),
            r("point.w2", Weight, self.point_w2.view_mut().into_dyn()),
            r("point.b2", Bias, self.point_b2.view_mut().into_dyn()),
            r("conv1.w", Weight, self.conv1_w.view_mut().into_dyn()),
            r("bn1.gamma", Norm, self.bn1_gamma.view_mut().into_dyn()),
            r("bn1.beta", Norm, self.bn1_beta.view_mut().into_dyn()),
            r("conv2.w", Weight, self.conv2_w.view_mut().into_dyn()),
            r("bn2.gamma", Norm, self.bn2_gamma.view_mut().into_dyn()),
            r("bn2.beta", Norm, self.bn2_beta.view_mut().into_dyn()),
            r("fuse.w", Weight, self.fuse_w.view_mut().into_dyn()),
            r("fuse.b", Bias, self.fuse_b.view_mut().into_dyn()),
        ]
    }
}

/// Batch-norm running statistics of both convolution stages.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats<T> {
    pub mean1: Array1<T>,
    pub var1: Array1<T>,
    pub mean2: Array1<T>,
    pub var2: Array1<T>,
}

impl<T: Real> BnStats<T> {
    /// Fresh statistics: mean 0, variance 1.
    pub fn new(channels: usize) -> Self {
        BnStats {
            mean1: Array1::zeros(channels),
            var1: Array1::ones(channels),
            mean2: Array1::zeros(channels),
            var2: Array1::ones(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.mean1.len()
    }

    /// `running = (1 - momentum)·running + momentum·batch`.
    pub fn update(&mut self, batch: &BnStats<T>, momentum: f64) {
        let m = T::of(momentum);
        let keep = T::one() - m;
        for (r, b) in [
            (&mut self.mean1, &batch.mean1),
            (&mut self.var1, &batch.var1),
            (&mut self.mean2, &batch.mean2),
            (&mut self.var2, &batch.var2),
        ] {
            r.zip_mut_with(b, |x, &y| *x = keep * *x + m * y);
        }
    }

    pub fn named(&self) -> [(&'static str, &Array1<T>); 4] {
        [
            ("bn1.running_mean", &self.mean1),
            ("bn1.running_var", &self.var1),
            ("bn2.running_mean", &self.mean2),
            ("bn2.running_var", &self.var2),
        ]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Array1<T>); 4] {
        [
            ("bn1.running_mean", &mut self.mean1),
            ("bn1.running_var", &mut self.var1),
            ("bn2.running_mean", &mut self.mean2),
            ("bn2.running_var", &mut self.var2),
        ]
    }
}

/// Which statistics batch norm uses.
#[derive(Debug, Clone, Copy)]
pub enum BnMode<'a, T> {
    /// Statistics over every position of every cloud in the batch.
    Train,
    /// Running statistics.
    Eval(&'a BnStats<T>),
}

/// One cloud's share of a refinement batch: `(g·n) × 19` features and `n`.
#[derive(Debug, Clone, Copy)]
pub struct RefineInput<'a> {
    pub features: &'a Array2<f64>,
    pub neighbors: usize,
}

impl<'a> RefineInput<'a> {
    pub fn of(patches: &'a PatchSet) -> Self {
        RefineInput {
            features: &patches.features,
            neighbors: patches.neighbors,
        }
    }
}

/// Intermediates of one cloud's refinement pass.
pub struct RefineTrace<T> {
    n: usize,
    rows: usize,
    pc: Array2<T>,
    h1: Array2<T>,
    r1: Array2<T>,
    arg_a: Vec<usize>,
    col1: Array2<T>,
    bn1: BatchNormCache<T>,
    z1: Array2<T>,
    col2: Array2<T>,
    bn2: BatchNormCache<T>,
    z2: Array2<T>,
    arg_b: Vec<usize>,
    cat: Array2<T>,
    pub signature: BranchSignature,
}

/// A refinement pass over several clouds that share batch-norm statistics.
pub struct RefineBatch<T> {
    pub tokens: Vec<Array2<T>>,
    pub traces: Vec<RefineTrace<T>>,
    /// Batch statistics with unbiased variance, for the running update.
    /// Equal to the running statistics in evaluation mode.
    pub stats: BnStats<T>,
    /// Total positions the statistics were taken over; 0 in evaluation mode.
    bn_rows: usize,
}

impl<T> RefineBatch<T> {
    pub fn train_mode(&self) -> bool {
        self.bn_rows > 0
    }
}

fn check_shapes<T: Real>(
    input: &RefineInput<'_>,
    params: &TokenizerParams<T>,
) -> Result<(), TokenizerError> {
    let (features, n) = (input.features, input.neighbors);
    let rows = features.nrows();
    if n == 0 || rows == 0 || rows % n != 0 {
        return Err(TokenizerError::Shape(format!(
            "{rows} feature rows do not split into patches of {n}"
        )));
    }
    if features.ncols() != FEATURE_DIM {
        return Err(TokenizerError::Shape(format!(
            "expected {FEATURE_DIM} features, got {}",
            features.ncols()
        )));
    }
    let (h, c) = (params.point_b1.len(), params.bn1_gamma.len());
    let d = params.token_dim();
    let ok = params.point_w1.dim() == (POINT_FEATURES, h)
        && params.point_w2.dim() == (h, d)
        && params.point_b2.len() == d
        && params.conv1_w.dim() == (3 * FEATURE_DIM, c)
        && params.bn1_beta.len() == c
        && params.conv2_w.dim() == (3 * c, c)
        && params.bn2_gamma.len() == c
        && params.bn2_beta.len() == c
        && params.fuse_w.dim() == (d + c, d);
    if !ok {
        return Err(TokenizerError::Shape(
            "tokenizer parameter shapes are inconsistent".into(),
        ));
    }
    Ok(())
}

/// Biased mean and variance per channel over the rows of all `ys`, two-pass,
/// reduced in input order.
fn pooled_stats<T: Real>(ys: &[&Array2<T>]) -> (Array1<T>, Array1<T>, usize) {
    let rows: usize = ys.iter().map(|y| y.nrows()).sum();
    let total = T::of(rows as f64);
    let sums = par::map_slice(ys, |y| y.sum_axis(Axis(0)));
    let mean = sums
        .into_iter()
        .reduce(|a, b| a + b)
        .expect("non-empty batch")
        / total;
    let sq = par::map_slice(ys, |y| {
        let c = *y - &mean;
        (&c * &c).sum_axis(Axis(0))
    });
    let var = sq
        .into_iter()
        .reduce(|a, b| a + b)
        .expect("non-empty batch")
        / total;
    (mean, var, rows)
}

fn unbiased<T: Real>(var: &Array1<T>, rows: usize) -> Array1<T> {
    if rows > 1 {
        let k = T::of(rows as f64 / (rows as f64 - 1.0));
        var.mapv(|v| v * k)
    } else {
        var.clone()
    }
}

struct StageA<T> {
    x: Array2<T>,
    pc: Array2<T>,
    h1: Array2<T>,
    r1: Array2<T>,
    pooled_a: Array2<T>,
    arg_a: Vec<usize>,
    col1: Array2<T>,
    y1: Array2<T>,
}

struct StageB<T> {
    bn1: BatchNormCache<T>,
    z1: Array2<T>,
    col2: Array2<T>,
    y2: Array2<T>,
}

/// Forward pass over a batch of clouds; one `g × d` token matrix per input.
pub fn refine_forward_batch<T: Real>(
    inputs: &[RefineInput<'_>],
    params: &TokenizerParams<T>,
    mode: BnMode<'_, T>,
) -> Result<RefineBatch<T>, TokenizerError> {
    if inputs.is_empty() {
        return Err(TokenizerError::Shape("empty refinement batch".into()));
    }
    for input in inputs {
        check_shapes(input, params)?;
    }

    let a: Vec<StageA<T>> = par::map_slice(inputs, |input| {
        let x: Array2<T> = input.features.mapv(T::of);
        let pc = x.slice(s![.., 0..POINT_FEATURES]).to_owned();
        let h1 = nn::linear(&pc.view(), &params.point_w1, Some(&params.point_b1));
        let r1 = nn::relu(&h1);
        let h2 = nn::linear(&r1.view(), &params.point_w2, Some(&params.point_b2));
        let (pooled_a, arg_a) = nn::max_pool_groups(&h2.view(), input.neighbors);
        let col1 = nn::im2col3(&x.view(), input.neighbors);
        let y1 = col1.dot(&params.conv1_w);
        StageA {
            x,
            pc,
            h1,
            r1,
            pooled_a,
            arg_a,
            col1,
            y1,
        }
    });

    let (mean1, var1, bn_rows) = match mode {
        BnMode::Train => pooled_stats(&a.iter().map(|s| &s.y1).collect::<Vec<_>>()),
        BnMode::Eval(r) => (r.mean1.clone(), r.var1.clone(), 0),
    };
    let b: Vec<StageB<T>> = par::map_range(inputs.len(), |i| {
        let (z1, bn1) = nn::batch_norm_apply(
            &a[i].y1.view(),
            &mean1,
            &var1,
            &params.bn1_gamma,
            &params.bn1_beta,
        );
        let col2 = nn::im2col3(&nn::relu(&z1).view(), inputs[i].neighbors);
        let y2 = col2.dot(&params.conv2_w);
        StageB { bn1, z1, col2, y2 }
    });

    let (mean2, var2) = match mode {
        BnMode::Train => {
            let (m, v, _) = pooled_stats(&b.iter().map(|s| &s.y2).collect::<Vec<_>>());
            (m, v)
        }
        BnMode::Eval(r) => (r.mean2.clone(), r.var2.clone()),
    };
    let stats = match mode {
        BnMode::Train => BnStats {
            mean1: mean1.clone(),
            var1: unbiased(&var1, bn_rows),
            mean2: mean2.clone(),
            var2: unbiased(&var2, bn_rows),
        },
        BnMode::Eval(r) => r.clone(),
    };

    let finished: Vec<(Array2<T>, RefineTrace<T>)> =
        par::map_vec(a.into_iter().zip(b).collect(), |i, (a, b)| {
            let n = inputs[i].neighbors;
            let (z2, bn2) = nn::batch_norm_apply(
                &b.y2.view(),
                &mean2,
                &var2,
                &params.bn2_gamma,
                &params.bn2_beta,
            );
            let (pooled_b, arg_b) = nn::max_pool_groups(&nn::relu(&z2).view(), n);
            let mut signature = BranchSignature::default();
            signature.mix_mask(&a.h1);
            signature.mix_indices(&a.arg_a);
            signature.mix_mask(&b.z1);
            signature.mix_mask(&z2);
            signature.mix_indices(&arg_b);
            let cat = concatenate(Axis(1), &[a.pooled_a.view(), pooled_b.view()])
                .expect("pooled widths agree on rows");
            let tokens = nn::linear(&cat.view(), &params.fuse_w, Some(&params.fuse_b));
            let trace = RefineTrace {
                n,
                rows: a.x.nrows(),
                pc: a.pc,
                h1: a.h1,
                r1: a.r1,
                arg_a: a.arg_a,
                col1: a.col1,
                bn1: b.bn1,
                z1: b.z1,
                col2: b.col2,
                bn2,
                z2,
                arg_b,
                cat,
                signature,
            };
            (tokens, trace)
        });
    let (tokens, traces) = finished.into_iter().unzip();
    Ok(RefineBatch {
        tokens,
        traces,
        stats,
        bn_rows,
    })
}

/// Single-cloud forward pass; in training mode the cloud is its own batch.
pub fn refine_forward<T: Real>(
    features: &Array2<f64>,
    n: usize,
    params: &TokenizerParams<T>,
    mode: BnMode<'_, T>,
) -> Result<(Array2<T>, RefineTrace<T>, BnStats<T>), TokenizerError> {
    let mut batch = refine_forward_batch(
        &[RefineInput {
            features,
            neighbors: n,
        }],
        params,
        mode,
    )?;
    let trace = batch.traces.pop().expect("one input");
    let tokens = batch.tokens.pop().expect("one input");
    Ok((tokens, trace, batch.stats))
}

fn accumulate_weight_grad<T: Real>(x: &Array2<T>, dy: &Array2<T>, dw: &mut Array2<T>) {
    ndarray::linalg::general_mat_mul(T::one(), &x.t(), dy, T::one(), dw);
}

/// Per-cloud state carried between the backward stages.
struct Back<T> {
    grads: TokenizerParams<T>,
    /// Upstream gradient at the current batch-norm output times gamma.
    dxhat: Array2<T>,
}

/// `Σ dxhat` and `Σ dxhat ⊙ xhat` per channel over the whole batch.
fn bn_sums<T: Real>(back: &[Back<T>], caches: &[&BatchNormCache<T>]) -> (Array1<T>, Array1<T>) {
    let parts = par::map_range(back.len(), |i| {
        (
            back[i].dxhat.sum_axis(Axis(0)),
            (&back[i].dxhat * &caches[i].xhat).sum_axis(Axis(0)),
        )
    });
    parts
        .into_iter()
        .reduce(|(a, b), (c, d)| (a + c, b + d))
        .expect("non-empty batch")
}

/// Gradient at the batch-norm input. Training mode differentiates through the
/// shared statistics; evaluation mode treats them as constants.
fn bn_input_grad<T: Real>(
    dxhat: &Array2<T>,
    cache: &BatchNormCache<T>,
    sums: Option<&(Array1<T>, Array1<T>)>,
    rows: usize,
) -> Array2<T> {
    match sums {
        Some((sum_d, sum_dx)) => {
            let n = T::of(rows as f64);
            let mut dx = dxhat * n - sum_d - &(&cache.xhat * sum_dx);
            dx *= &(&cache.rstd / n);
            dx
        }
        None => dxhat * &cache.rstd,
    }
}

/// Accumulates into `grads` the parameter gradients for per-cloud upstream
/// `d_tokens` (`g × d` each). Per-cloud contributions are summed in input order.
pub fn refine_backward_batch<T: Real>(
    batch: &RefineBatch<T>,
    d_tokens: &[Array2<T>],
    params: &TokenizerParams<T>,
    grads: &mut TokenizerParams<T>,
) {
    assert_eq!(
        d_tokens.len(),
        batch.traces.len(),
        "one upstream gradient per cloud"
    );
    let traces = &batch.traces;
    let d = params.token_dim();
    let train = batch.train_mode();

    let mut back: Vec<Back<T>> = par::map_range(traces.len(), |i| {
        let trace = &traces[i];
        let mut g = grads.zeros_like();
        let dcat = nn::linear_backward(
            &trace.cat.view(),
            &params.fuse_w,
            &d_tokens[i].view(),
            &mut g.fuse_w,
            Some(&mut g.fuse_b),
        );

        let dh2 = nn::max_pool_backward(&dcat.slice(s![.., 0..d]), &trace.arg_a, trace.rows);
        let mut dr1 = nn::linear_backward(
            &trace.r1.view(),
            &params.point_w2,
            &dh2.view(),
            &mut g.point_w2,
            Some(&mut g.point_b2),
        );
        nn::relu_backward(&mut dr1, &trace.h1);
        accumulate_weight_grad(&trace.pc, &dr1, &mut g.point_w1);
        g.point_b1 += &dr1.sum_axis(Axis(0));

        let mut dz2 = nn::max_pool_backward(&dcat.slice(s![.., d..]), &trace.arg_b, trace.rows);
        nn::relu_backward(&mut dz2, &trace.z2);
        g.bn2_gamma += &(&dz2 * &trace.bn2.xhat).sum_axis(Axis(0));
        g.bn2_beta += &dz2.sum_axis(Axis(0));
        Back {
            grads: g,
            dxhat: dz2 * &params.bn2_gamma,
        }
    });

    let sums2 = train.then(|| bn_sums(&back, &traces.iter().map(|t| &t.bn2).collect::<Vec<_>>()));
    par::for_each_mut(&mut back, |i, b| {
        let trace = &traces[i];
        let dy2 = bn_input_grad(&b.dxhat, &trace.bn2, sums2.as_ref(), batch.bn_rows);
        accumulate_weight_grad(&trace.col2, &dy2, &mut b.grads.conv2_w);
        let dcol2 = dy2.dot(&params.conv2_w.t());
        let mut dz1 = nn::col2im3(&dcol2.view(), trace.n);
        nn::relu_backward(&mut dz1, &trace.z1);
        b.grads.bn1_gamma += &(&dz1 * &trace.bn1.xhat).sum_axis(Axis(0));
        b.grads.bn1_beta += &dz1.sum_axis(Axis(0));
        b.dxhat = dz1 * &params.bn1_gamma;
    });

    let sums1 = train.then(|| bn_sums(&back, &traces.iter().map(|t| &t.bn1).collect::<Vec<_>>()));
    par::for_each_mut(&mut back, |i, b| {
        let trace = &traces[i];
        let dy1 = bn_input_grad(&b.dxhat, &trace.bn1, sums1.as_ref(), batch.bn_rows);
        accumulate_weight_grad(&trace.col1, &dy1, &mut b.grads.conv1_w);
    });

    for b in &back {
        grads.add_assign(&b.grads);
    }
}

/// Evaluation-mode refinement of a patch set into `g × d` tokens.
pub fn refine_patches<T: Real>(
    patches: &PatchSet,
    params: &TokenizerParams<T>,
    bn: &BnStats<T>,
) -> Result<Array2<T>, TokenizerError> {
    if bn.channels() != params.bn1_gamma.len() {
        return Err(TokenizerError::Shape(
            "batch-norm statistics do not match conv channels".into(),
        ));
    }
    Ok(refine_forward(
        &patches.features,
        patches.neighbors,
        params,
        BnMode::Eval(bn),
    )?
    .0)
}

/// Path A alone: pooled point-MLP features, `g × d`.
#[cfg(test)]
fn point_path<T: Real>(features: &Array2<f64>, n: usize, params: &TokenizerParams<T>) -> Array2<T> {
    let x: Array2<T> = features.slice(s![.., 0..POINT_FEATURES]).mapv(T::of);
    let h1 = nn::linear(&x.view(), &params.point_w1, Some(&params.point_b1));
    let h2 = nn::linear(
        &nn::relu(&h1).view(),
        &params.point_w2,
        Some(&params.point_b2),
    );
    nn::max_pool_groups(&h2.view(), n).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn config() -> TokenizerConfig {
        TokenizerConfig {
            num_patches: 3,
            neighbors: 4,
            token_dim: 8,
            point_hidden: 5,
            conv_channels: 6,
            points: 12,
            ..Default::default()
        }
    }

    fn features(seed: u64) -> Array2<f64> {
        use rand::Rng as _;
        let mut r = rng::stream(seed, "features");
        Array2::from_shape_simple_fn((12, FEATURE_DIM), || r.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_params_give_zero_tokens() {
        let p = TokenizerParams::<f64>::zeros(&config());
        let (t, _, _) = refine_forward(&features(1), 4, &p, BnMode::Train).unwrap();
        assert!(t.iter().all(|&v| v == 0.0));
        assert_eq!(t.dim(), (3, 8));
    }

    #[test]
    fn point_path_ignores_neighbor_order() {
        let p = TokenizerParams::<f64>::init(&config(), &mut rng::stream(3, "init"));
        let f = features(2);
        let mut shuffled = f.clone();
        // reverse the neighbors of every patch
        for patch in 0..3 {
            for t in 0..4 {
                shuffled
                    .row_mut(patch * 4 + t)
                    .assign(&f.row(patch * 4 + 3 - t));
            }
        }
        let a = point_path(&f, 4, &p);
        let b = point_path(&shuffled, 4, &p);
        assert_eq!(a, b);
        let (_, ta, _) = refine_forward(&f, 4, &p, BnMode::Train).unwrap();
        let (_, tb, _) = refine_forward(&shuffled, 4, &p, BnMode::Train).unwrap();
        assert_ne!(ta.z1, tb.z1);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let p = TokenizerParams::<f32>::init(&config(), &mut rng::stream(3, "init"));
        let f = features(4);
        let a = refine_forward(&f, 4, &p, BnMode::Train).unwrap().0;
        let b = refine_forward(&f, 4, &p, BnMode::Train).unwrap().0;
        assert_eq!(a, b);
        assert!(refine_forward(&f, 5, &p, BnMode::Train).is_err());
        let mut bad = p.clone();
        bad.fuse_w = Array2::zeros((3, 3));
        assert!(matches!(
            refine_forward(&f, 4, &bad, BnMode::Train),
            Err(TokenizerError::Shape(_))
        ));
    }
}
