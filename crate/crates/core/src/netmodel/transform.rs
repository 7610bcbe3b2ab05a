use std::collections::BTreeSet;

use super::{LayerKind, LayerSpec, NetError, NetworkSpec, Result, Scheme};
use crate::quantizer::MAX_BITS;
use crate::tensorops::ConvSpec;

/// Where cyclic shuffle modules go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CyclicShufflePlacement {
    None,
    /// Start of every residual stage except the first.
    #[default]
    StageStarts,
    /// Same positions, permutation removed (1x1 conv + residual only).
    StageStartsUnpermuted,
}

/// Where channel shuffles go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelShufflePlacement {
    None,
    /// After the last block of every stage.
    #[default]
    PerStage,
    /// After every block.
    PerBlock,
    /// Between the two convolutions of every block.
    MidBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PalQuantOptions {
    pub cyclic_shuffle: CyclicShufflePlacement,
    pub channel_shuffle: ChannelShufflePlacement,
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(NetError::Bits(bits));
    }
    Ok(())
}

/// Annotate every conv and FC layer with uniform activation/weight
/// bit-widths. First and last layers are annotated too; they stay marked
/// unquantized.
pub fn annotate_uniform(spec: &NetworkSpec, b_a: u32, b_w: u32) -> Result<NetworkSpec> {
    check_bits(b_a)?;
    check_bits(b_w)?;
    if let Scheme::PalQuant { .. } = spec.scheme {
        return Err(NetError::Invalid(vec![
            "uniform annotation expects an untransformed network".into(),
        ]));
    }
    let mut out = spec.clone();
    for l in &mut out.layers {
        if let Some(conv) = &mut l.conv {
            *conv = conv.with_bits(b_w, b_a);
        }
    }
    out.scheme = Scheme::Uniform { b_a, b_w };
    Ok(out)
}

/// Parallel-group transform with the default shuffle placement.
pub fn palquant_transform(spec: &NetworkSpec, limb_bits: u32, groups: usize) -> Result<NetworkSpec> {
    palquant_transform_with(spec, limb_bits, groups, PalQuantOptions::default())
}

/// Expand every feature map `G`x, turn every inner convolution into a
/// B-bit `G`-group convolution, and insert the shuffle modules.
///
/// Convolutions that read the network input keep their input width and
/// stay ungrouped; FC layers read the expanded features and keep their
/// output width.
pub fn palquant_transform_with(
    spec: &NetworkSpec,
    limb_bits: u32,
    groups: usize,
    options: PalQuantOptions,
) -> Result<NetworkSpec> {
    if groups < 2 {
        return Err(NetError::GroupCount(groups));
    }
    check_bits(limb_bits)?;
    if let Scheme::PalQuant { .. } = spec.scheme {
        return Err(NetError::Invalid(vec!["network is already transformed".into()]));
    }
    if spec.layers.iter().any(|l| l.kind == LayerKind::CyclicShuffle) {
        return Err(NetError::Invalid(vec!["network already has cyclic shuffle modules".into()]));
    }

    let expanded = expand(spec, limb_bits, groups)?;
    let layers = insert_shuffles(&expanded, limb_bits, groups, options);
    Ok(NetworkSpec {
        name: spec.name.clone(),
        input_resolution: spec.input_resolution,
        scheme: Scheme::PalQuant { limb_bits, groups },
        layers,
    })
}

fn expand(spec: &NetworkSpec, bits: u32, groups: usize) -> Result<Vec<LayerSpec>> {
    let mut out: Vec<LayerSpec> = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        let mut n = l.clone();
        let in_channels = l.inputs.first().map(|&i| out[i].channels);
        let reads_input = l
            .inputs
            .first()
            .is_some_and(|&i| spec.layers[i].kind == LayerKind::Input);
        let missing_conv = || NetError::Layer {
            layer: l.name.clone(),
            msg: "conv layer without conv spec".into(),
        };
        match l.kind {
            LayerKind::Input => {}
            LayerKind::Conv => {
                let c = l.conv.ok_or_else(missing_conv)?;
                let cin = in_channels.unwrap_or(c.in_channels);
                let conv = if reads_input {
                    ConvSpec {
                        in_channels: cin,
                        out_channels: c.out_channels * groups,
                        ..c
                    }
                } else {
                    ConvSpec {
                        in_channels: cin,
                        out_channels: c.out_channels * groups,
                        groups: c.groups * groups,
                        ..c
                    }
                };
                n.conv = Some(conv.with_bits(bits, bits));
                n.channels = conv.out_channels;
            }
            LayerKind::Fc => {
                let c = l.conv.ok_or_else(missing_conv)?;
                let conv = ConvSpec {
                    in_channels: in_channels.unwrap_or(c.in_channels),
                    ..c
                };
                n.conv = Some(conv.with_bits(bits, bits));
                n.channels = conv.out_channels;
            }
            _ => {
                n.channels = in_channels.unwrap_or(l.channels);
            }
        }
        out.push(n);
    }
    Ok(out)
}

fn insert_shuffles(
    layers: &[LayerSpec],
    bits: u32,
    groups: usize,
    options: PalQuantOptions,
) -> Vec<LayerSpec> {
    let consumers = {
        let mut c = vec![Vec::new(); layers.len()];
        for l in layers {
            for &i in &l.inputs {
                c[i].push(l.id);
            }
        }
        c
    };
    let main_stages: BTreeSet<usize> = layers
        .iter()
        .filter(|l| l.block.is_some())
        .map(|l| l.stage)
        .collect();
    let first_stage = main_stages.iter().next().copied();
    let in_main = |l: &LayerSpec| main_stages.contains(&l.stage);

    let stage_output = |l: &LayerSpec| {
        in_main(l) && consumers[l.id].iter().any(|&c| layers[c].stage != l.stage)
    };
    let block_output = |l: &LayerSpec| {
        l.block.is_some()
            && consumers[l.id]
                .iter()
                .any(|&c| (layers[c].stage, layers[c].block) != (l.stage, l.block))
    };
    let mid_block = |l: &LayerSpec| {
        l.kind == LayerKind::Conv
            && l.block.is_some()
            && !consumers[l.id].is_empty()
            && consumers[l.id].iter().all(|&c| {
                let c = &layers[c];
                c.kind == LayerKind::Conv && (c.stage, c.block) == (l.stage, l.block)
            })
    };
    // stage whose first block this layer feeds, if it is a later stage
    let feeds_stage = |l: &LayerSpec| {
        consumers[l.id]
            .iter()
            .map(|&c| layers[c].stage)
            .find(|&s| main_stages.contains(&s) && s != l.stage && Some(s) != first_stage)
    };

    let mut out: Vec<LayerSpec> = Vec::with_capacity(layers.len() + 16);
    let mut redirect = vec![0usize; layers.len()];
    for l in layers {
        let mut n = l.clone();
        n.id = out.len();
        n.inputs = l.inputs.iter().map(|&i| redirect[i]).collect();
        out.push(n);
        let mut tail = out.len() - 1;

        let shuffle_here = match options.channel_shuffle {
            ChannelShufflePlacement::None => false,
            ChannelShufflePlacement::PerStage => stage_output(l),
            ChannelShufflePlacement::PerBlock => block_output(l),
            ChannelShufflePlacement::MidBlock => mid_block(l),
        };
        if shuffle_here {
            let name = match options.channel_shuffle {
                ChannelShufflePlacement::PerStage => format!("s{}.shuffle", l.stage),
                _ => format!("{}.shuffle", block_prefix(l)),
            };
            let mut s = LayerSpec::new(LayerKind::ChannelShuffle, name, l.channels, l.out_spatial, l.stage);
            s.id = out.len();
            s.inputs = vec![tail];
            s.groups = Some(groups);
            if options.channel_shuffle == ChannelShufflePlacement::MidBlock {
                s.block = l.block;
            }
            out.push(s);
            tail = out.len() - 1;
        }

        if options.cyclic_shuffle != CyclicShufflePlacement::None {
            if let Some(stage) = feeds_stage(l) {
                let conv = ConvSpec::new(l.channels, l.channels, 1, 1, 0)
                    .with_groups(groups)
                    .with_bits(bits, bits);
                let mut c = LayerSpec::new(
                    LayerKind::CyclicShuffle,
                    format!("s{stage}.cyclic"),
                    l.channels,
                    l.out_spatial,
                    stage,
                );
                c.id = out.len();
                c.inputs = vec![tail];
                c.conv = Some(conv);
                c.quantized = true;
                c.permute = options.cyclic_shuffle == CyclicShufflePlacement::StageStarts;
                out.push(c);
                tail = out.len() - 1;
            }
        }
        redirect[l.id] = tail;
    }
    out
}

fn block_prefix(l: &LayerSpec) -> String {
    match l.block {
        Some(b) => format!("s{}.b{b}", l.stage),
        None => format!("s{}", l.stage),
    }
}
