use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LayerKind, LayerSpec, NetError, NetworkSpec, PoolKind, PoolSpec, Result};
use crate::quantizer::{fake_quantize, QuantParams, TensorRole, MAX_BITS};
use crate::tensorops::{self, conv2d_grouped, ConvWeights, FeatureTensor};

/// Per-channel `scale * x + shift`, standing in for folded batch norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAffine {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `[t][c / groups][k][k]`.
    pub weights: Vec<f64>,
    pub weight_quant: Option<QuantParams>,
    pub act_quant: Option<QuantParams>,
    /// Output scale applied to the layer's conv result.
    pub alpha: f64,
    pub affine: Option<ChannelAffine>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: BTreeMap<String, LayerParams>,
}

fn quantizes(layer: &LayerSpec) -> bool {
    layer.quantized
        && layer
            .conv
            .is_some_and(|c| c.weight_bits <= MAX_BITS && c.act_bits <= MAX_BITS)
}

impl NetworkParams {
    /// Seeded random weights for every conv-carrying layer. Weight bounds
    /// are fit to the drawn weights; activation bounds are `[0, 4]`.
    pub fn random(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = BTreeMap::new();
        for l in spec.layers.iter().filter(|l| l.has_conv()) {
            let conv = l.conv.ok_or_else(|| NetError::MissingParams(l.name.clone()))?;
            let weights: Vec<f64> = (0..conv.weight_len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let fan_in = (conv.in_per_group() * conv.kernel * conv.kernel) as f64;
            let (weight_quant, act_quant) = if quantizes(l) {
                (
                    Some(QuantParams::fit(conv.weight_bits, &weights)?),
                    Some(QuantParams::new(conv.act_bits, 0.0, 4.0, 1.0)?),
                )
            } else {
                (None, None)
            };
            layers.insert(
                l.name.clone(),
                LayerParams {
                    weights,
                    weight_quant,
                    act_quant,
                    alpha: 1.0 / fan_in.sqrt(),
                    affine: None,
                },
            );
        }
        Ok(Self { layers })
    }
}

fn layer_err(layer: &LayerSpec, msg: impl Into<String>) -> NetError {
    NetError::Layer {
        layer: layer.name.clone(),
        msg: msg.into(),
    }
}

fn quantized_conv(
    layer: &LayerSpec,
    params: &LayerParams,
    x: &FeatureTensor<f64>,
) -> Result<FeatureTensor<f64>> {
    let conv = layer.conv.ok_or_else(|| layer_err(layer, "missing conv spec"))?;
    let (x, w) = if quantizes(layer) {
        let wq = params
            .weight_quant
            .ok_or_else(|| NetError::MissingParams(layer.name.clone()))?;
        let aq = params
            .act_quant
            .ok_or_else(|| NetError::MissingParams(layer.name.clone()))?;
        if wq.bits() != conv.weight_bits || aq.bits() != conv.act_bits {
            return Err(layer_err(
                layer,
                format!(
                    "quantizer bits {}/{} differ from annotation {}/{}",
                    aq.bits(),
                    wq.bits(),
                    conv.act_bits,
                    conv.weight_bits
                ),
            ));
        }
        let [n, c, h, w] = x.shape();
        let xq = fake_quantize(x.data(), &aq, TensorRole::Activation)?;
        (
            FeatureTensor::from_vec(n, c, h, w, xq)?,
            fake_quantize(&params.weights, &wq, TensorRole::Weight)?,
        )
    } else {
        (x.clone(), params.weights.clone())
    };
    let y = conv2d_grouped(&x, &ConvWeights::new(conv, w)?)?;
    let alpha = params.alpha;
    let mut y = y.map(|v| v * alpha);
    if let Some(affine) = &params.affine {
        let [n, c, h, w] = y.shape();
        if affine.scale.len() != c || affine.shift.len() != c {
            return Err(layer_err(layer, "affine size differs from channel count"));
        }
        y = FeatureTensor::from_fn(n, c, h, w, |b, ch, yy, xx| {
            y.get(b, ch, yy, xx) * affine.scale[ch] + affine.shift[ch]
        });
    }
    Ok(y)
}

fn pool(layer: &LayerSpec, p: &PoolSpec, x: &FeatureTensor<f64>) -> Result<FeatureTensor<f64>> {
    let [n, c, h, w] = x.shape();
    if p.global {
        let area = (h * w) as f64;
        return Ok(FeatureTensor::from_fn(n, c, 1, 1, |b, ch, _, _| {
            let mut s = 0.0;
            for y in 0..h {
                for xx in 0..w {
                    s += x.get(b, ch, y, xx);
                }
            }
            match p.kind {
                PoolKind::Avg => s / area,
                PoolKind::Max => (0..h * w)
                    .map(|i| x.get(b, ch, i / w, i % w))
                    .fold(f64::NEG_INFINITY, f64::max),
            }
        }));
    }
    let (oh, ow) = match (p.out_extent(h), p.out_extent(w)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(layer_err(layer, "input too small for pooling window")),
    };
    Ok(FeatureTensor::from_fn(n, c, oh, ow, |b, ch, oy, ox| {
        let mut acc = match p.kind {
            PoolKind::Max => f64::NEG_INFINITY,
            PoolKind::Avg => 0.0,
        };
        let mut count = 0usize;
        for ky in 0..p.k {
            for kx in 0..p.k {
                let iy = (oy * p.stride + ky) as isize - p.pad as isize;
                let ix = (ox * p.stride + kx) as isize - p.pad as isize;
                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                    continue;
                }
                let v = x.get(b, ch, iy as usize, ix as usize);
                count += 1;
                acc = match p.kind {
                    PoolKind::Max => acc.max(v),
                    PoolKind::Avg => acc + v,
                };
            }
        }
        match p.kind {
            PoolKind::Max => acc,
            PoolKind::Avg => acc / count.max(1) as f64,
        }
    }))
}

fn relu(x: FeatureTensor<f64>) -> FeatureTensor<f64> {
    x.map(|v| v.max(0.0))
}

/// Execute one layer on already computed inputs.
pub fn forward_layer(
    layer: &LayerSpec,
    params: Option<&LayerParams>,
    inputs: &[&FeatureTensor<f64>],
) -> Result<FeatureTensor<f64>> {
    let first = inputs
        .first()
        .copied()
        .ok_or_else(|| layer_err(layer, "no input tensor"))?;
    let needs = || params.ok_or_else(|| NetError::MissingParams(layer.name.clone()));
    let out = match layer.kind {
        LayerKind::Input | LayerKind::Output => first.clone(),
        LayerKind::Conv | LayerKind::Fc => quantized_conv(layer, needs()?, first)?,
        LayerKind::CyclicShuffle => {
            let conv = layer.conv.ok_or_else(|| layer_err(layer, "missing conv spec"))?;
            let mixed = if layer.permute {
                tensorops::cyclic_permute(first, conv.groups)?
            } else {
                first.clone()
            };
            first.add(&quantized_conv(layer, needs()?, &mixed)?)?
        }
        LayerKind::ChannelShuffle => {
            let g = layer.groups.ok_or_else(|| layer_err(layer, "missing shuffle groups"))?;
            tensorops::channel_shuffle(first, g)?
        }
        LayerKind::Add => {
            let mut acc = first.clone();
            for x in &inputs[1..] {
                acc = acc.add(x)?;
            }
            acc
        }
        LayerKind::Pool => {
            let p = layer.pool.ok_or_else(|| layer_err(layer, "missing pool spec"))?;
            pool(layer, &p, first)?
        }
    };
    Ok(if layer.relu { relu(out) } else { out })
}

/// Deterministic forward pass through the whole graph. Any input
/// resolution large enough for the strided layers is accepted.
pub fn forward_reference(
    spec: &NetworkSpec,
    params: &NetworkParams,
    input: &FeatureTensor<f64>,
) -> Result<FeatureTensor<f64>> {
    let first = spec
        .layers
        .first()
        .ok_or_else(|| NetError::Invalid(vec!["network has no layers".into()]))?;
    if input.channels() != first.channels {
        return Err(layer_err(
            first,
            format!("input has {} channels, network expects {}", input.channels(), first.channels),
        ));
    }
    let mut values: Vec<Option<FeatureTensor<f64>>> = vec![None; spec.layers.len()];
    let consumers = spec.consumers();
    let mut remaining: Vec<usize> = consumers.iter().map(Vec::len).collect();
    for l in &spec.layers {
        let out = if l.kind == LayerKind::Input {
            input.clone()
        } else {
            let ins: Vec<&FeatureTensor<f64>> = l
                .inputs
                .iter()
                .map(|&i| {
                    values
                        .get(i)
                        .and_then(Option::as_ref)
                        .ok_or_else(|| layer_err(l, format!("input {i} not available")))
                })
                .collect::<Result<_>>()?;
            forward_layer(l, params.layers.get(&l.name), &ins)?
        };
        for &i in &l.inputs {
            remaining[i] -= 1;
            if remaining[i] == 0 {
                values[i] = None;
            }
        }
        values[l.id] = Some(out);
    }
    values
        .pop()
        .flatten()
        .ok_or_else(|| NetError::Invalid(vec!["network produced no output".into()]))
}
