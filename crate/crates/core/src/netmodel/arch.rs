use std::str::FromStr;

use super::{LayerKind, LayerSpec, NetError, NetworkSpec, PoolKind, PoolSpec, Scheme};
use crate::tensorops::ConvSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    ResNet18,
    ResNet34,
    /// ResNet-18 without shortcut connections.
    Plain18,
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::ResNet18 => "resnet18",
            Arch::ResNet34 => "resnet34",
            Arch::Plain18 => "plain18",
        }
    }

    fn blocks(&self) -> [usize; 4] {
        match self {
            Arch::ResNet18 | Arch::Plain18 => [2, 2, 2, 2],
            Arch::ResNet34 => [3, 4, 6, 3],
        }
    }
}

impl FromStr for Arch {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "resnet18" => Ok(Arch::ResNet18),
            "resnet34" => Ok(Arch::ResNet34),
            "plain18" => Ok(Arch::Plain18),
            _ => Err(NetError::UnknownArch(s.to_string())),
        }
    }
}

struct Builder {
    layers: Vec<LayerSpec>,
}

impl Builder {
    fn push(&mut self, mut layer: LayerSpec, inputs: &[usize]) -> usize {
        layer.id = self.layers.len();
        layer.inputs = inputs.to_vec();
        self.layers.push(layer);
        self.layers.len() - 1
    }

    fn spatial(&self, id: usize) -> [usize; 2] {
        self.layers[id].out_spatial
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        name: String,
        input: usize,
        spec: ConvSpec,
        stage: usize,
        block: Option<usize>,
        quantized: bool,
        relu: bool,
    ) -> usize {
        let [h, w] = self.spatial(input);
        let out = [spec.out_extent(h).unwrap(), spec.out_extent(w).unwrap()];
        let mut l = LayerSpec::new(LayerKind::Conv, name, spec.out_channels, out, stage);
        l.conv = Some(spec);
        l.block = block;
        l.quantized = quantized;
        l.relu = relu;
        self.push(l, &[input])
    }
}

/// Standard 224x224 ImageNet graph, annotated full precision (32/32).
///
/// Stem and classifier are marked unquantized; block convolutions and
/// projection shortcuts are marked quantized. Stages are numbered 1..=4,
/// the stem is stage 0 and the classifier head stage 5.
pub fn build_network(arch: Arch) -> NetworkSpec {
    let res = [224, 224];
    let mut b = Builder { layers: Vec::new() };

    let input = b.push(LayerSpec::new(LayerKind::Input, "input", 3, res, 0), &[]);
    let stem = b.conv("stem".into(), input, ConvSpec::new(3, 64, 7, 2, 3), 0, None, false, true);
    let pool_spec = PoolSpec {
        kind: PoolKind::Max,
        global: false,
        k: 3,
        stride: 2,
        pad: 1,
    };
    let [h, w] = b.spatial(stem);
    let pooled = [pool_spec.out_extent(h).unwrap(), pool_spec.out_extent(w).unwrap()];
    let mut pool = LayerSpec::new(LayerKind::Pool, "maxpool", 64, pooled, 0);
    pool.pool = Some(pool_spec);
    let mut x = b.push(pool, &[stem]);

    let residual = arch != Arch::Plain18;
    let mut channels = 64;
    for (si, &nblocks) in arch.blocks().iter().enumerate() {
        let stage = si + 1;
        let width = 64 << si;
        for bi in 0..nblocks {
            let stride = if si > 0 && bi == 0 { 2 } else { 1 };
            let prefix = format!("s{stage}.b{bi}");
            let c1 = b.conv(
                format!("{prefix}.conv1"),
                x,
                ConvSpec::new(channels, width, 3, stride, 1),
                stage,
                Some(bi),
                true,
                true,
            );
            let c2 = b.conv(
                format!("{prefix}.conv2"),
                c1,
                ConvSpec::new(width, width, 3, 1, 1),
                stage,
                Some(bi),
                true,
                !residual,
            );
            x = if residual {
                let shortcut = if stride != 1 || channels != width {
                    b.conv(
                        format!("{prefix}.downsample"),
                        x,
                        ConvSpec::new(channels, width, 1, stride, 0),
                        stage,
                        Some(bi),
                        true,
                        false,
                    )
                } else {
                    x
                };
                let mut add = LayerSpec::new(LayerKind::Add, format!("{prefix}.add"), width, b.spatial(c2), stage);
                add.block = Some(bi);
                add.relu = true;
                b.push(add, &[c2, shortcut])
            } else {
                c2
            };
            channels = width;
        }
    }

    let head = 5;
    let mut gap = LayerSpec::new(LayerKind::Pool, "avgpool", channels, [1, 1], head);
    gap.pool = Some(PoolSpec {
        kind: PoolKind::Avg,
        global: true,
        k: 0,
        stride: 0,
        pad: 0,
    });
    let gap = b.push(gap, &[x]);
    let mut fc = LayerSpec::new(LayerKind::Fc, "fc", 1000, [1, 1], head);
    fc.conv = Some(ConvSpec::new(channels, 1000, 1, 1, 0));
    let fc = b.push(fc, &[gap]);
    b.push(LayerSpec::new(LayerKind::Output, "output", 1000, [1, 1], head), &[fc]);

    NetworkSpec {
        name: arch.name().to_string(),
        input_resolution: res,
        scheme: Scheme::FullPrecision,
        layers: b.layers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_arch_names() {
        assert_eq!("ResNet-18".parse::<Arch>().unwrap(), Arch::ResNet18);
        assert_eq!("resnet34".parse::<Arch>().unwrap(), Arch::ResNet34);
        assert_eq!("plain_18".parse::<Arch>().unwrap(), Arch::Plain18);
        assert!(matches!("vgg16".parse::<Arch>(), Err(NetError::UnknownArch(_))));
    }

    #[test]
    fn resnet18_layer_census() {
        let net = build_network(Arch::ResNet18);
        let count = |k: LayerKind| net.layers.iter().filter(|l| l.kind == k).count();
        // stem + 16 block convs + 3 projections
        assert_eq!(count(LayerKind::Conv), 20);
        assert_eq!(count(LayerKind::Add), 8);
        assert_eq!(count(LayerKind::Fc), 1);
        let fc = net.layer_by_name("fc").unwrap();
        assert_eq!(fc.conv.unwrap().in_channels, 512);
        assert_eq!(net.layer_by_name("s4.b1.conv2").unwrap().out_spatial, [7, 7]);
        assert_eq!(net.layer_by_name("maxpool").unwrap().out_spatial, [56, 56]);
    }

    #[test]
    fn macs_match_dimension_walk() {
        // stem, 4 stage-1 convs, per later stage: strided conv1, 3 convs, projection, fc
        let stem = 64 * 3 * 49 * 112 * 112;
        let stage1 = 4 * 64 * 64 * 9 * 56 * 56;
        let later = 3 * (57_802_752 + 3 * 115_605_504 + 6_422_528);
        let fc = 512 * 1000;
        assert_eq!(build_network(Arch::ResNet18).macs(), (stem + stage1 + later + fc) as u64);
        assert_eq!(
            build_network(Arch::Plain18).macs(),
            (stem + stage1 + later + fc - 3 * 6_422_528) as u64
        );
    }
}
