//! Network descriptions: ResNet/Plain builders, quantization annotations,
//! the parallel-group transform, validation, BitOps accounting and a small
//! reference executor.
//!
//! A [`NetworkSpec`] is a topologically ordered list of layers. Every
//! layer's `id` equals its position and refers to its producers through
//! `inputs`, so residual shortcuts are explicit edges.

mod arch;
mod bitops;
mod forward;
mod io;
mod transform;
mod validate;

pub use arch::{build_network, Arch};
pub use bitops::{bitops, BitOpsReport, LayerBitOps};
pub use forward::{forward_layer, forward_reference, ChannelAffine, LayerParams, NetworkParams};
pub use io::{load_spec, save_spec};
pub use transform::{
    annotate_uniform, palquant_transform, palquant_transform_with, ChannelShufflePlacement,
    CyclicShufflePlacement, PalQuantOptions,
};
pub use validate::validate_spec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantizer::QuantError;
use crate::tensorops::{ConvSpec, TensorError};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("unknown architecture {0:?} (expected resnet18, resnet34 or plain18)")]
    UnknownArch(String),
    #[error("PalQuant requires G >= 2, got {0}")]
    GroupCount(usize),
    #[error("invalid bit-width {0}")]
    Bits(u32),
    #[error("layer {layer}: {msg}")]
    Layer { layer: String, msg: String },
    #[error("missing parameters for layer {0}")]
    MissingParams(String),
    #[error("invalid network: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("network file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Input,
    Conv,
    #[serde(rename = "FC")]
    Fc,
    CyclicShuffle,
    ChannelShuffle,
    Add,
    Pool,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kind: PoolKind,
    /// Pool over the whole map; kernel/stride/pad are ignored.
    #[serde(default)]
    pub global: bool,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub stride: usize,
    #[serde(default)]
    pub pad: usize,
}

impl PoolSpec {
    pub fn out_extent(&self, input: usize) -> Option<usize> {
        if self.global {
            return Some(1);
        }
        let padded = input + 2 * self.pad;
        (self.k >= 1 && self.stride >= 1 && padded >= self.k)
            .then(|| (padded - self.k) / self.stride + 1)
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_true(b: &bool) -> bool {
    *b
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: usize,
    pub name: String,
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolSpec>,
    /// Group count of a channel shuffle layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(default)]
    pub inputs: Vec<usize>,
    /// Output channel count.
    pub channels: usize,
    /// Output height and width.
    pub out_spatial: [usize; 2],
    pub stage: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub quantized: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub relu: bool,
    /// Cyclic shuffle only: `false` drops the permutation (ablation).
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub permute: bool,
}

impl LayerSpec {
    pub(crate) fn new(kind: LayerKind, name: impl Into<String>, channels: usize, out_spatial: [usize; 2], stage: usize) -> Self {
        Self {
            id: 0,
            name: name.into(),
            kind,
            conv: None,
            pool: None,
            groups: None,
            inputs: Vec::new(),
            channels,
            out_spatial,
            stage,
            block: None,
            quantized: false,
            relu: false,
            permute: true,
        }
    }

    /// Layers that carry a convolution (including the cyclic shuffle's
    /// internal 1x1 grouped conv).
    pub fn has_conv(&self) -> bool {
        matches!(self.kind, LayerKind::Conv | LayerKind::Fc | LayerKind::CyclicShuffle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Scheme {
    FullPrecision,
    Uniform {
        b_a: u32,
        b_w: u32,
    },
    PalQuant {
        #[serde(rename = "B")]
        limb_bits: u32,
        #[serde(rename = "G")]
        groups: usize,
    },
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::FullPrecision => write!(f, "full precision"),
            Scheme::Uniform { b_a, b_w } => write!(f, "{b_a}b A,{b_w}b W"),
            Scheme::PalQuant { limb_bits, groups } => write!(f, "B={limb_bits},G={groups}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub input_resolution: [usize; 2],
    pub scheme: Scheme,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn layer(&self, id: usize) -> &LayerSpec {
        &self.layers[id]
    }

    pub fn layer_by_name(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Consumers of every layer, by id.
    pub fn consumers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.layers.len()];
        for l in &self.layers {
            for &i in &l.inputs {
                if i < out.len() {
                    out[i].push(l.id);
                }
            }
        }
        out
    }

    /// Total multiply-accumulates of all conv-carrying layers.
    pub fn macs(&self) -> u64 {
        self.layers
            .iter()
            .filter_map(|l| l.conv.map(|c| c.macs(l.out_spatial[0], l.out_spatial[1])))
            .sum()
    }
}
