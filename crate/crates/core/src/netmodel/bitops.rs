use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LayerKind, NetError, NetworkSpec, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerBitOps {
    pub id: usize,
    pub name: String,
    pub kind: LayerKind,
    /// `t x c/groups x k x k -> h x w`, empty for layers without a conv.
    pub shape: String,
    pub groups: usize,
    pub b_a: u32,
    pub b_w: u32,
    pub macs: u64,
    pub bitops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitOpsReport {
    pub network: String,
    pub scheme: String,
    pub per_layer: Vec<LayerBitOps>,
    pub total: u64,
    pub total_giga: f64,
}

/// `b_w * b_a * t * (c / groups) * k * k * h * w` for every conv-carrying
/// layer; shuffles, adds and pools cost nothing.
pub fn bitops(spec: &NetworkSpec) -> Result<BitOpsReport> {
    let mut per_layer = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        let entry = if l.has_conv() {
            let conv = l.conv.ok_or_else(|| NetError::Layer {
                layer: l.name.clone(),
                msg: "unannotated conv layer".into(),
            })?;
            if conv.weight_bits == 0 || conv.act_bits == 0 {
                return Err(NetError::Layer {
                    layer: l.name.clone(),
                    msg: "missing bit-width annotation".into(),
                });
            }
            let [h, w] = l.out_spatial;
            let macs = conv.macs(h, w);
            LayerBitOps {
                id: l.id,
                name: l.name.clone(),
                kind: l.kind,
                shape: format!(
                    "{}x{}x{}x{} -> {h}x{w}",
                    conv.out_channels,
                    conv.in_per_group(),
                    conv.kernel,
                    conv.kernel
                ),
                groups: conv.groups,
                b_a: conv.act_bits,
                b_w: conv.weight_bits,
                macs,
                bitops: macs * u64::from(conv.weight_bits) * u64::from(conv.act_bits),
            }
        } else {
            LayerBitOps {
                id: l.id,
                name: l.name.clone(),
                kind: l.kind,
                shape: String::new(),
                groups: l.groups.unwrap_or(1),
                b_a: 0,
                b_w: 0,
                macs: 0,
                bitops: 0,
            }
        };
        per_layer.push(entry);
    }
    let total = per_layer.iter().map(|l| l.bitops).sum();
    Ok(BitOpsReport {
        network: spec.name.clone(),
        scheme: spec.scheme.to_string(),
        per_layer,
        total,
        total_giga: total as f64 / 1e9,
    })
}

impl BitOpsReport {
    /// Bitops of a subset of layers.
    pub fn sum_where(&self, pred: impl Fn(&LayerBitOps) -> bool) -> u64 {
        self.per_layer.iter().filter(|l| pred(l)).map(|l| l.bitops).sum()
    }

    /// Text table of conv-carrying layers plus the total in G, two decimals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({})", self.network, self.scheme);
        let _ = writeln!(
            s,
            "{:<18} {:<14} {:<28} {:>6} {:>6} {:>16}",
            "layer", "kind", "shape", "groups", "bits", "bitops"
        );
        for l in self.per_layer.iter().filter(|l| l.macs > 0) {
            let _ = writeln!(
                s,
                "{:<18} {:<14} {:<28} {:>6} {:>6} {:>16}",
                l.name,
                format!("{:?}", l.kind),
                l.shape,
                l.groups,
                format!("{}/{}", l.b_a, l.b_w),
                l.bitops
            );
        }
        let _ = writeln!(s, "total: {:.2}G BitOps", self.total_giga);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{LayerSpec, Scheme};
    use crate::tensorops::ConvSpec;

    fn single_conv(conv: ConvSpec, out: [usize; 2]) -> NetworkSpec {
        let input = LayerSpec::new(LayerKind::Input, "input", conv.in_channels, [56, 56], 0);
        let mut c = LayerSpec::new(LayerKind::Conv, "conv", conv.out_channels, out, 1);
        c.id = 1;
        c.inputs = vec![0];
        c.conv = Some(conv);
        NetworkSpec {
            name: "one".into(),
            input_resolution: [56, 56],
            scheme: Scheme::Uniform { b_a: 4, b_w: 4 },
            layers: vec![input, c],
        }
    }

    #[test]
    fn single_conv_formula() {
        let net = single_conv(ConvSpec::new(64, 64, 3, 1, 1).with_bits(4, 4), [56, 56]);
        // 4 * 4 * 64 * 64 * 3 * 3 * 56 * 56
        assert_eq!(bitops(&net).unwrap().total, 1_849_688_064);
    }

    #[test]
    fn grouped_conv_counts_per_group_inputs() {
        let net = single_conv(
            ConvSpec::new(128, 128, 3, 1, 1).with_groups(2).with_bits(2, 2),
            [56, 56],
        );
        assert_eq!(bitops(&net).unwrap().total, 2 * 2 * 128 * 64 * 9 * 56 * 56);
    }

    #[test]
    fn empty_network_is_zero() {
        let net = NetworkSpec {
            name: "empty".into(),
            input_resolution: [1, 1],
            scheme: Scheme::FullPrecision,
            layers: vec![],
        };
        let r = bitops(&net).unwrap();
        assert_eq!((r.total, r.per_layer.len()), (0, 0));
    }

    #[test]
    fn unannotated_conv_errors() {
        let mut net = single_conv(ConvSpec::new(8, 8, 1, 1, 0), [56, 56]);
        net.layers[1].conv = None;
        assert!(bitops(&net).is_err());
    }
}
