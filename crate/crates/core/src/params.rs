//! Named parameter tensors shared by the optimizer, checkpoints and gradient checks.

use ndarray::{ArrayViewD, ArrayViewMutD, Zip};

use crate::Real;

/// How a tensor is treated by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Matrix weights; the only kind that receives weight decay.
    Weight,
    Bias,
    /// Layer/batch norm scale and shift.
    Norm,
    ClassToken,
    Position,
    /// Log temperature of the contrastive objective.
    Temperature,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        self == ParamKind::Weight
    }
}

/// Learning-rate group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Tokenizer,
    Encoder,
    Alignment,
}

pub struct ParamRef<'a, T> {
    pub name: String,
    pub kind: ParamKind,
    pub group: ParamGroup,
    pub value: ArrayViewD<'a, T>,
}

pub struct ParamMut<'a, T> {
    pub name: String,
    pub kind: ParamKind,
    pub group: ParamGroup,
    pub value: ArrayViewMutD<'a, T>,
}

/// A fixed, ordered collection of named tensors.
pub trait ParamSet<T: Real>: Clone {
    fn params(&self) -> Vec<ParamRef<'_, T>>;
    fn params_mut(&mut self) -> Vec<ParamMut<'_, T>>;

    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for mut p in out.params_mut() {
            p.value.fill(T::zero());
        }
        out
    }

    /// `self += other`, tensor by tensor.
    fn add_assign(&mut self, other: &Self) {
        for (mut a, b) in self.params_mut().into_iter().zip(other.params()) {
            Zip::from(&mut a.value)
                .and(&b.value)
                .for_each(|x, &y| *x += y);
        }
    }

    fn scale(&mut self, k: T) {
        for mut p in self.params_mut() {
            p.value.mapv_inplace(|v| v * k);
        }
    }

    fn num_scalars(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.value.iter().all(|v| v.is_finite()))
    }
}

/// Truncated normal draw (resampled outside ±2σ), mean 0.
pub fn trunc_normal<T: Real>(rng: &mut crate::rng::Rng, std: f64) -> T {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return T::of(z * std);
        }
    }
}

pub fn trunc_normal_matrix<T: Real>(
    rng: &mut crate::rng::Rng,
    rows: usize,
    cols: usize,
    std: f64,
) -> ndarray::Array2<T> {
    ndarray::Array2::from_shape_simple_fn((rows, cols), || trunc_normal(rng, std))
}

pub fn trunc_normal_vector<T: Real>(
    rng: &mut crate::rng::Rng,
    len: usize,
    std: f64,
) -> ndarray::Array1<T> {
    ndarray::Array1::from_shape_simple_fn(len, || trunc_normal(rng, std))
}

/// Standard weight initialization scale.
pub const INIT_STD: f64 = 0.02;

impl<'a, T> ParamRef<'a, T> {
    pub fn new(
        name: impl Into<String>,
        kind: ParamKind,
        group: ParamGroup,
        value: ArrayViewD<'a, T>,
    ) -> Self {
        ParamRef {
            name: name.into(),
            kind,
            group,
            value,
        }
    }
}

impl<'a, T> ParamMut<'a, T> {
    pub fn new(
        name: impl Into<String>,
        kind: ParamKind,
        group: ParamGroup,
        value: ArrayViewMutD<'a, T>,
    ) -> Self {
        ParamMut {
            name: name.into(),
            kind,
            group,
            value,
        }
    }
}
