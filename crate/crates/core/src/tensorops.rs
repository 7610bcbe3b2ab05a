//! Reference tensor kernels: matmul, grouped convolution, the group-level
//! cyclic permutation, the cyclic shuffle module, channel shuffle, and the
//! group-level information-flow analysis.
//!
//! Feature maps are NCHW with contiguous channel groups, so moving a group
//! is a block copy. Kernels are generic over [`Scalar`] and run the same
//! loop order for integer codes and reals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{Matrix, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("{channels} channels not divisible into {groups} groups")]
    Divisibility { channels: usize, groups: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid convolution: {0}")]
    InvalidConv(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// `X W^T` for `X` (N x S) and `W` (T x S).
pub fn matmul_ref<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>) -> Result<Matrix<T>> {
    if x.cols() != w.cols() {
        return Err(TensorError::Shape(format!(
            "inner dimensions differ: {} vs {}",
            x.cols(),
            w.cols()
        )));
    }
    let mut y = Matrix::zeros(x.rows(), w.rows());
    for r in 0..x.rows() {
        let xr = x.row(r);
        for c in 0..w.rows() {
            let mut acc = T::zero();
            for (&a, &b) in xr.iter().zip(w.row(c)) {
                acc += a * b;
            }
            y.set(r, c, acc);
        }
    }
    Ok(y)
}

/// NCHW feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor<T> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![T::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(TensorError::Shape(format!(
                "{} values for shape {n}x{c}x{h}x{w}",
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn from_fn(
        n: usize,
        c: usize,
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(b, ch, y, x));
                    }
                }
            }
        }
        Self { n, c, h, w, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    fn offset(&self, b: usize, ch: usize, y: usize, x: usize) -> usize {
        ((b * self.c + ch) * self.h + y) * self.w + x
    }

    pub fn get(&self, b: usize, ch: usize, y: usize, x: usize) -> T {
        self.data[self.offset(b, ch, y, x)]
    }

    pub fn set(&mut self, b: usize, ch: usize, y: usize, x: usize, v: T) {
        let o = self.offset(b, ch, y, x);
        self.data[o] = v;
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> FeatureTensor<U> {
        FeatureTensor {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Channel count of one group, checking divisibility.
    pub fn group_width(&self, groups: usize) -> Result<usize> {
        group_width(self.c, groups)
    }

    /// Output channel `k` takes input channel `perm[k]`.
    pub fn gather_channels(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.c || perm.iter().any(|&p| p >= self.c) {
            return Err(TensorError::Shape("channel map does not fit tensor".into()));
        }
        let plane = self.h * self.w;
        let mut data = Vec::with_capacity(self.data.len());
        for b in 0..self.n {
            for &src in perm {
                let start = (b * self.c + src) * plane;
                data.extend_from_slice(&self.data[start..start + plane]);
            }
        }
        Ok(Self { data, ..*self })
    }

    /// Channels `[start, start + count)`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.c {
            return Err(TensorError::Shape("channel slice out of range".into()));
        }
        let plane = self.h * self.w;
        let mut data = Vec::with_capacity(self.n * count * plane);
        for b in 0..self.n {
            let base = (b * self.c + start) * plane;
            data.extend_from_slice(&self.data[base..base + count * plane]);
        }
        Ok(Self {
            c: count,
            data,
            ..*self
        })
    }

    /// Stack tensors along the channel axis.
    pub fn concat_channels(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Shape("nothing to concatenate".into()))?;
        if parts
            .iter()
            .any(|p| p.n != first.n || p.h != first.h || p.w != first.w)
        {
            return Err(TensorError::Shape("concat parts differ in N/H/W".into()));
        }
        let c: usize = parts.iter().map(|p| p.c).sum();
        let plane = first.h * first.w;
        let mut data = Vec::with_capacity(first.n * c * plane);
        for b in 0..first.n {
            for p in parts {
                let base = b * p.c * plane;
                data.extend_from_slice(&p.data[base..base + p.c * plane]);
            }
        }
        Ok(Self {
            c,
            data,
            ..*first
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(TensorError::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self { data, ..*self })
    }
}

fn group_width(channels: usize, groups: usize) -> Result<usize> {
    if groups == 0 || !channels.is_multiple_of(groups) {
        return Err(TensorError::Divisibility { channels, groups });
    }
    Ok(channels / groups)
}

/// Convolution hyper-parameters. Serialized with the short names used in
/// network description files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    #[serde(rename = "c")]
    pub in_channels: usize,
    #[serde(rename = "t")]
    pub out_channels: usize,
    #[serde(rename = "k")]
    pub kernel: usize,
    pub stride: usize,
    #[serde(rename = "pad")]
    pub padding: usize,
    pub groups: usize,
    #[serde(rename = "b_w")]
    pub weight_bits: u32,
    #[serde(rename = "b_a")]
    pub act_bits: u32,
}

impl ConvSpec {
    /// Full-precision-annotated (32/32) convolution.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            groups: 1,
            weight_bits: 32,
            act_bits: 32,
        }
    }

    pub fn with_groups(self, groups: usize) -> Self {
        Self { groups, ..self }
    }

    pub fn with_bits(self, weight_bits: u32, act_bits: u32) -> Self {
        Self {
            weight_bits,
            act_bits,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(TensorError::InvalidConv("kernel and stride must be >= 1".into()));
        }
        group_width(self.in_channels, self.groups)?;
        group_width(self.out_channels, self.groups)?;
        Ok(())
    }

    pub fn in_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    pub fn out_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    /// Output extent for an input extent.
    pub fn out_extent(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        (padded >= self.kernel).then(|| (padded - self.kernel) / self.stride + 1)
    }

    /// Weight element count: `t * (c / groups) * k * k`.
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_per_group() * self.kernel * self.kernel
    }

    /// Multiply-accumulates for an `h x w` output map.
    pub fn macs(&self, out_h: usize, out_w: usize) -> u64 {
        (self.out_channels * self.in_per_group() * self.kernel * self.kernel) as u64
            * (out_h * out_w) as u64
    }
}

/// Convolution weights laid out `[t][c / groups][k][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvWeights<T> {
    pub spec: ConvSpec,
    pub data: Vec<T>,
}

impl<T: Scalar> ConvWeights<T> {
    pub fn new(spec: ConvSpec, data: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.weight_len() {
            return Err(TensorError::Shape(format!(
                "{} weights for a spec needing {}",
                data.len(),
                spec.weight_len()
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn zeros(spec: ConvSpec) -> Result<Self> {
        Self::new(spec, vec![T::zero(); spec.weight_len()])
    }

    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> T {
        let k = self.spec.kernel;
        self.data[((o * self.spec.in_per_group() + i) * k + ky) * k + kx]
    }

    /// Weights of group `g` as a standalone ungrouped convolution.
    pub fn group_slice(&self, g: usize) -> Result<Self> {
        let per = self.spec.out_per_group() * self.spec.in_per_group() * self.spec.kernel * self.spec.kernel;
        if g >= self.spec.groups {
            return Err(TensorError::Shape(format!("group {g} out of range")));
        }
        let spec = ConvSpec {
            in_channels: self.spec.in_per_group(),
            out_channels: self.spec.out_per_group(),
            groups: 1,
            ..self.spec
        };
        Self::new(spec, self.data[g * per..(g + 1) * per].to_vec())
    }

    /// Equivalent ungrouped weights with zero cross-group blocks.
    pub fn to_dense(&self) -> Result<Self> {
        let s = self.spec;
        let dense_spec = ConvSpec { groups: 1, ..s };
        let (og, ig, k) = (s.out_per_group(), s.in_per_group(), s.kernel);
        let mut data = vec![T::zero(); dense_spec.weight_len()];
        for o in 0..s.out_channels {
            let g = o / og;
            for i in 0..ig {
                for ky in 0..k {
                    for kx in 0..k {
                        let dst = ((o * s.in_channels + g * ig + i) * k + ky) * k + kx;
                        data[dst] = self.get(o, i, ky, kx);
                    }
                }
            }
        }
        Self::new(dense_spec, data)
    }
}

/// Grouped 2-d cross-correlation with zero padding.
pub fn conv2d_grouped<T: Scalar>(x: &FeatureTensor<T>, w: &ConvWeights<T>) -> Result<FeatureTensor<T>> {
    let s = w.spec;
    s.validate()?;
    if x.c != s.in_channels {
        return Err(TensorError::Shape(format!(
            "input has {} channels, conv expects {}",
            x.c, s.in_channels
        )));
    }
    let (oh, ow) = match (s.out_extent(x.h), s.out_extent(x.w)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(TensorError::Shape(format!(
                "{}x{} input too small for kernel {}",
                x.h, x.w, s.kernel
            )))
        }
    };
    let (og, ig, k) = (s.out_per_group(), s.in_per_group(), s.kernel);
    let mut out = FeatureTensor::zeros(x.n, s.out_channels, oh, ow);
    for b in 0..x.n {
        for o in 0..s.out_channels {
            let in_base = (o / og) * ig;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = T::zero();
                    for i in 0..ig {
                        for ky in 0..k {
                            let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            for kx in 0..k {
                                let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                                if ix < 0 || ix >= x.w as isize {
                                    continue;
                                }
                                acc += x.get(b, in_base + i, iy as usize, ix as usize) * w.get(o, i, ky, kx);
                            }
                        }
                    }
                    out.set(b, o, oy, ox, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Source channel for every output channel of the group-level cyclic
/// permutation: output group `(i + 1) mod G` receives input group `i`.
pub fn cyclic_permutation_map(channels: usize, groups: usize) -> Result<Vec<usize>> {
    let width = group_width(channels, groups)?;
    Ok((0..channels)
        .map(|k| {
            let (g, j) = (k / width, k % width);
            let src_group = (g + groups - 1) % groups;
            src_group * width + j
        })
        .collect())
}

/// Source channel for every output channel of channel shuffle: output
/// channel `j * G + g` takes input channel `g * C_hat + j`.
pub fn channel_shuffle_map(channels: usize, groups: usize) -> Result<Vec<usize>> {
    let width = group_width(channels, groups)?;
    Ok((0..channels)
        .map(|k| {
            let (j, g) = (k / groups, k % groups);
            g * width + j
        })
        .collect())
}

pub fn invert_map(map: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; map.len()];
    for (dst, &src) in map.iter().enumerate() {
        inv[src] = dst;
    }
    inv
}

pub fn cyclic_permute<T: Scalar>(x: &FeatureTensor<T>, groups: usize) -> Result<FeatureTensor<T>> {
    x.gather_channels(&cyclic_permutation_map(x.c, groups)?)
}

pub fn channel_shuffle<T: Scalar>(x: &FeatureTensor<T>, groups: usize) -> Result<FeatureTensor<T>> {
    x.gather_channels(&channel_shuffle_map(x.c, groups)?)
}

pub fn channel_unshuffle<T: Scalar>(x: &FeatureTensor<T>, groups: usize) -> Result<FeatureTensor<T>> {
    x.gather_channels(&invert_map(&channel_shuffle_map(x.c, groups)?))
}

fn check_shuffle_conv(spec: &ConvSpec, channels: usize, groups: usize) -> Result<()> {
    if spec.kernel != 1
        || spec.stride != 1
        || spec.padding != 0
        || spec.groups != groups
        || spec.in_channels != channels
        || spec.out_channels != channels
    {
        return Err(TensorError::InvalidConv(format!(
            "cyclic shuffle needs a 1x1 stride-1 conv with {channels} -> {channels} channels in {groups} groups, got {spec:?}"
        )));
    }
    Ok(())
}

/// `Z = X + Conv1x1_grouped(CyclicPermute(X))`.
pub fn cyclic_shuffle<T: Scalar>(
    x: &FeatureTensor<T>,
    conv: &ConvWeights<T>,
    groups: usize,
) -> Result<FeatureTensor<T>> {
    check_shuffle_conv(&conv.spec, x.c, groups)?;
    let permuted = cyclic_permute(x, groups)?;
    x.add(&conv2d_grouped(&permuted, conv)?)
}

/// Ablation variant that keeps the grouped 1x1 conv and residual but
/// drops the permutation: `Z = X + Conv1x1_grouped(X)`.
pub fn cyclic_shuffle_unpermuted<T: Scalar>(
    x: &FeatureTensor<T>,
    conv: &ConvWeights<T>,
    groups: usize,
) -> Result<FeatureTensor<T>> {
    check_shuffle_conv(&conv.spec, x.c, groups)?;
    x.add(&conv2d_grouped(x, conv)?)
}

/// Stage kinds for group-level information-flow analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixStage {
    GroupedConv,
    CyclicShuffle,
    /// Cyclic shuffle module without its permutation.
    UnpermutedShuffle,
    /// Assumes each group is at least `G` channels wide, so every output
    /// group receives a channel from every input group.
    ChannelShuffle,
}

/// `reach[a][b]` is true when output group `a` can see input group `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupMixing {
    groups: usize,
    reach: Vec<bool>,
}

impl GroupMixing {
    pub fn identity(groups: usize) -> Self {
        let reach = (0..groups * groups).map(|k| k / groups == k % groups).collect();
        Self { groups, reach }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn reaches(&self, out_group: usize, in_group: usize) -> bool {
        self.reach[out_group * self.groups + in_group]
    }

    pub fn is_full(&self) -> bool {
        self.reach.iter().all(|&r| r)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.groups)
    }

    pub fn count(&self) -> usize {
        self.reach.iter().filter(|&&r| r).count()
    }

    fn apply(&self, stage: MixStage) -> Self {
        let g = self.groups;
        let reach = match stage {
            MixStage::GroupedConv | MixStage::UnpermutedShuffle => self.reach.clone(),
            MixStage::CyclicShuffle => (0..g * g)
                .map(|k| {
                    let (a, b) = (k / g, k % g);
                    // group a keeps itself and gains its cyclic predecessor
                    let pred = (a + g - 1) % g;
                    self.reach[a * g + b] || self.reach[pred * g + b]
                })
                .collect(),
            MixStage::ChannelShuffle => {
                let any: Vec<bool> = (0..g).map(|b| (0..g).any(|a| self.reach[a * g + b])).collect();
                (0..g * g).map(|k| any[k % g]).collect()
            }
        };
        Self { groups: g, reach }
    }
}

/// Symbolic taint propagation of group membership through a pipeline.
pub fn group_mixing_matrix(pipeline: &[MixStage], groups: usize) -> GroupMixing {
    pipeline
        .iter()
        .fold(GroupMixing::identity(groups), |m, &stage| m.apply(stage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(c: usize) -> FeatureTensor<i64> {
        FeatureTensor::from_fn(1, c, 1, 1, |_, ch, _, _| ch as i64)
    }

    #[test]
    fn matmul_identity_and_zero() {
        let x = Matrix::from_fn(3, 4, |r, c| (r * 4 + c) as i64 - 5);
        let eye = Matrix::from_fn(4, 4, |r, c| i64::from(r == c));
        assert_eq!(matmul_ref(&x, &eye).unwrap(), x);
        let z = Matrix::<i64>::zeros(3, 4);
        assert!(matmul_ref(&z, &eye).unwrap().data().iter().all(|&v| v == 0));
        assert!(matmul_ref(&x, &Matrix::<i64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn cyclic_permute_three_groups() {
        // groups [A, B, C] -> [C, A, B]
        let x = FeatureTensor::from_fn(1, 6, 1, 1, |_, ch, _, _| (ch / 2) as i64);
        let y = cyclic_permute(&x, 3).unwrap();
        assert_eq!(y.data(), &[2, 2, 0, 0, 1, 1]);
        assert_eq!(cyclic_permute(&x, 1).unwrap(), x);
        assert!(matches!(
            cyclic_permute(&x, 4),
            Err(TensorError::Divisibility { .. })
        ));
    }

    #[test]
    fn channel_shuffle_two_groups() {
        let x = labelled(4);
        let y = channel_shuffle(&x, 2).unwrap();
        assert_eq!(y.data(), &[0, 2, 1, 3]);
        assert_eq!(channel_unshuffle(&y, 2).unwrap(), x);
        assert_eq!(channel_shuffle(&x, 1).unwrap(), x);
    }

    #[test]
    fn cyclic_shuffle_with_identity_conv() {
        // 1x4x1x1, G = 2, per-group identity: each group gains its predecessor
        let x = FeatureTensor::from_vec(1, 4, 1, 1, vec![1i64, 2, 30, 40]).unwrap();
        let spec = ConvSpec::new(4, 4, 1, 1, 0).with_groups(2);
        let eye = ConvWeights::new(spec, vec![1, 0, 0, 1, 1, 0, 0, 1]).unwrap();
        let z = cyclic_shuffle(&x, &eye, 2).unwrap();
        assert_eq!(z.data(), &[31, 42, 31, 42]);

        let zero = ConvWeights::zeros(spec).unwrap();
        assert_eq!(cyclic_shuffle(&x, &zero, 2).unwrap(), x);
        let x0 = FeatureTensor::<i64>::zeros(1, 4, 1, 1);
        assert_eq!(cyclic_shuffle(&x0, &eye, 2).unwrap(), x0);
        assert_eq!(cyclic_shuffle_unpermuted(&x, &eye, 2).unwrap().data(), &[2, 4, 60, 80]);
    }

    #[test]
    fn cyclic_shuffle_rejects_bad_conv() {
        let x = labelled(4);
        let spec = ConvSpec::new(4, 4, 3, 1, 1).with_groups(2);
        let w = ConvWeights::zeros(spec).unwrap();
        assert!(matches!(
            cyclic_shuffle(&x, &w, 2),
            Err(TensorError::InvalidConv(_))
        ));
    }

    #[test]
    fn grouped_conv_permutation_weights() {
        // 1x1 ungrouped conv whose weights pick channels in reverse order
        let x = FeatureTensor::from_fn(1, 3, 2, 2, |_, ch, y, xx| (ch * 10 + y * 2 + xx) as i64);
        let spec = ConvSpec::new(3, 3, 1, 1, 0);
        let w = ConvWeights::new(spec, vec![0, 0, 1, 0, 1, 0, 1, 0, 0]).unwrap();
        let y = conv2d_grouped(&x, &w).unwrap();
        assert_eq!(y, x.gather_channels(&[2, 1, 0]).unwrap());
    }

    #[test]
    fn zero_group_weights_isolate() {
        let x = FeatureTensor::from_fn(1, 4, 3, 3, |_, ch, y, xx| (ch + y * xx) as i64 + 1);
        let spec = ConvSpec::new(4, 4, 3, 1, 1).with_groups(2);
        let mut data: Vec<i64> = (0..spec.weight_len() as i64).collect();
        let per = data.len() / 2;
        data[per..].iter_mut().for_each(|v| *v = 0);
        let y = conv2d_grouped(&x, &ConvWeights::new(spec, data).unwrap()).unwrap();
        let g1 = y.slice_channels(2, 2).unwrap();
        assert!(g1.data().iter().all(|&v| v == 0));
        assert!(y.slice_channels(0, 2).unwrap().data().iter().any(|&v| v != 0));
    }

    #[test]
    fn conv_shape_errors() {
        let x = FeatureTensor::<i64>::zeros(1, 4, 2, 2);
        let spec = ConvSpec::new(3, 3, 1, 1, 0);
        assert!(conv2d_grouped(&x, &ConvWeights::zeros(spec).unwrap()).is_err());
        assert!(ConvWeights::<i64>::zeros(ConvSpec::new(4, 6, 1, 1, 0).with_groups(4)).is_err());
        let big = ConvSpec::new(4, 4, 5, 1, 0);
        assert!(conv2d_grouped(&x, &ConvWeights::zeros(big).unwrap()).is_err());
    }

    #[test]
    fn mixing_examples() {
        let single = group_mixing_matrix(&[MixStage::CyclicShuffle], 3);
        // each group sees itself and its predecessor
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(single.reaches(a, b), a == b || b == (a + 2) % 3);
            }
        }
        let convs = group_mixing_matrix(&[MixStage::GroupedConv; 4], 5);
        assert!(convs.is_identity());
        let unpermuted = group_mixing_matrix(&[MixStage::UnpermutedShuffle; 4], 5);
        assert!(unpermuted.is_identity());
        assert!(group_mixing_matrix(&[MixStage::ChannelShuffle], 6).is_full());
    }

    #[test]
    fn shuffle_composition_differs_from_parts() {
        for g in 2..=4 {
            for width in 2..=4 {
                let c = g * width;
                let cyc = cyclic_permutation_map(c, g).unwrap();
                let shuf = channel_shuffle_map(c, g).unwrap();
                // out[k] = in[cyc[shuf[k]]]: shuffle applied after permute
                let composed: Vec<usize> = shuf.iter().map(|&k| cyc[k]).collect();
                assert_ne!(composed, cyc);
                assert_ne!(composed, shuf);
            }
        }
    }
}
