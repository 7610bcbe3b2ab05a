//! Output-stationary tiling of one convolution onto the on-chip buffers.
//!
//! Loop order is output-channel tile, then spatial (output-row) tile, then
//! input-channel tile. Every buffer is split in two for double buffering.
//! A grouped convolution is scheduled one group at a time; groups share
//! nothing, so a tile never holds more than one group's working set.

use serde::{Deserialize, Serialize};

use super::{AccelStyle, AcceleratorConfig, ExecutionMode, Result, SimError};
use crate::netmodel::{LayerKind, LayerSpec, NetworkSpec};

/// The per-group convolution problem of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerWork {
    pub id: usize,
    pub name: String,
    pub groups: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub kernel: u64,
    pub stride: u64,
    pub pad: u64,
    pub in_h: u64,
    pub in_w: u64,
    pub out_h: u64,
    pub out_w: u64,
    pub act_bits: u64,
    pub wgt_bits: u64,
    /// Native-width multiplications per multiply-accumulate.
    pub passes: u64,
    /// How often an activation / weight limb is re-read from SRAM.
    pub act_repeat: u64,
    pub wgt_repeat: u64,
    /// The whole per-group input is already on chip (fused producer).
    pub input_resident: bool,
    /// The output stays on chip for a fused consumer.
    pub output_on_chip: bool,
}

impl LayerWork {
    pub fn from_layer(spec: &NetworkSpec, layer: &LayerSpec, mode: ExecutionMode, native_bits: u32) -> Result<Self> {
        let conv = layer.conv.ok_or_else(|| SimError::Layer {
            layer: layer.name.clone(),
            msg: "layer has no convolution".into(),
        })?;
        let src = layer
            .inputs
            .first()
            .map(|&i| spec.layer(i))
            .ok_or_else(|| SimError::Layer {
                layer: layer.name.clone(),
                msg: "layer has no input".into(),
            })?;
        let limb = u64::from(mode.limb_bits());
        let (a, w) = (u64::from(conv.act_bits), u64::from(conv.weight_bits));
        let nb = u64::from(native_bits);
        let per_limb = limb.div_ceil(nb).pow(2);
        let (passes, act_repeat, wgt_repeat) = match mode {
            ExecutionMode::NibbleIteration { .. } => (
                a.div_ceil(limb) * w.div_ceil(limb) * per_limb,
                w.div_ceil(limb),
                a.div_ceil(limb),
            ),
            ExecutionMode::PalQuantGroups { .. } => (a.div_ceil(nb) * w.div_ceil(nb), 1, 1),
        };
        Ok(Self {
            id: layer.id,
            name: layer.name.clone(),
            groups: conv.groups as u64,
            in_channels: conv.in_per_group() as u64,
            out_channels: conv.out_per_group() as u64,
            kernel: conv.kernel as u64,
            stride: conv.stride as u64,
            pad: conv.padding as u64,
            in_h: src.out_spatial[0] as u64,
            in_w: src.out_spatial[1] as u64,
            out_h: layer.out_spatial[0] as u64,
            out_w: layer.out_spatial[1] as u64,
            act_bits: a,
            wgt_bits: w,
            passes,
            act_repeat,
            wgt_repeat,
            input_resident: false,
            output_on_chip: false,
        })
    }

    /// Input rows touched by output rows `[r0, r1)`, clipped to the map.
    pub fn input_rows(&self, r0: u64, r1: u64) -> u64 {
        let lo = (r0 * self.stride).saturating_sub(self.pad);
        let hi = ((r1 - 1) * self.stride + self.kernel).saturating_sub(self.pad).min(self.in_h);
        hi.saturating_sub(lo)
    }

    /// One group's input bits restricted to rows the conv reads.
    pub fn input_footprint_bits(&self) -> u64 {
        self.in_channels * self.input_rows(0, self.out_h) * self.in_w * self.act_bits
    }

    pub fn weight_bits_per_group(&self) -> u64 {
        self.out_channels * self.in_channels * self.kernel * self.kernel * self.wgt_bits
    }

    pub fn output_bits_per_group(&self) -> u64 {
        self.out_channels * self.out_h * self.out_w * self.act_bits
    }

    pub fn macs(&self) -> u64 {
        self.groups * self.out_channels * self.in_channels * self.kernel * self.kernel * self.out_h * self.out_w
    }
}

/// Chosen tile sizes plus the traffic they imply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSchedule {
    pub out_channel_tile: u64,
    pub row_tile: u64,
    pub in_channel_tile: u64,
    pub out_channel_tiles: u64,
    pub row_tiles: u64,
    pub in_channel_tiles: u64,
    pub groups: u64,
    /// Tiles over all groups.
    pub tiles: u64,
    pub dram_weight_bits: u64,
    pub dram_input_bits: u64,
    pub dram_output_bits: u64,
}

impl TileSchedule {
    pub fn dram_bits(&self) -> u64 {
        self.dram_weight_bits + self.dram_input_bits + self.dram_output_bits
    }
}

#[derive(Debug, Clone, Copy)]
struct Capacity {
    act: u64,
    wgt: u64,
    out: u64,
    acc_bits: u64,
}

impl Capacity {
    fn of(accel: &AcceleratorConfig) -> Self {
        Self {
            act: accel.act_buffer_bytes * 8 / 2,
            wgt: accel.wgt_buffer_bytes * 8 / 2,
            out: accel.out_buffer_bytes * 8 / 2,
            acc_bits: accel.acc_bits,
        }
    }
}

/// Usable half of the activation buffer, in bits.
pub fn activation_capacity_bits(accel: &AcceleratorConfig) -> u64 {
    Capacity::of(accel).act
}

/// Distinct tile sizes `ceil(n / k)`, largest first.
fn tile_candidates(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 1;
    while k <= n {
        let size = n.div_ceil(k);
        if out.last() != Some(&size) {
            out.push(size);
        }
        // jump to the next k that changes ceil(n / k)
        k = if size > 1 { n.div_ceil(size - 1) } else { n + 1 };
    }
    out
}

fn analytic(work: &LayerWork, t_tile: u64, r_tile: u64, c_tile: u64) -> TileSchedule {
    let n_t = work.out_channels.div_ceil(t_tile);
    let n_s = work.out_h.div_ceil(r_tile);
    let n_c = work.in_channels.div_ceil(c_tile);
    let rows: u64 = (0..n_s)
        .map(|s| work.input_rows(s * r_tile, ((s + 1) * r_tile).min(work.out_h)))
        .sum();
    let in_pass = work.in_channels * rows * work.in_w * work.act_bits;
    let input = if work.input_resident {
        0
    } else if n_s == 1 && n_c == 1 {
        in_pass
    } else {
        in_pass * n_t
    };
    let weights = work.weight_bits_per_group() * if n_c == 1 { 1 } else { n_s };
    let output = if work.output_on_chip {
        0
    } else {
        work.output_bits_per_group()
    };
    TileSchedule {
        out_channel_tile: t_tile,
        row_tile: r_tile,
        in_channel_tile: c_tile,
        out_channel_tiles: n_t,
        row_tiles: n_s,
        in_channel_tiles: n_c,
        groups: work.groups,
        tiles: n_t * n_s * n_c * work.groups,
        dram_weight_bits: weights * work.groups,
        dram_input_bits: input * work.groups,
        dram_output_bits: output * work.groups,
    }
}

fn fits(work: &LayerWork, cap: Capacity, t_tile: u64, r_tile: u64, c_tile: u64) -> bool {
    let k2 = work.kernel * work.kernel;
    let w_ok = t_tile * c_tile * k2 * work.wgt_bits <= cap.wgt;
    let rows = work.input_rows(0, r_tile).max(work.input_rows(work.out_h - r_tile, work.out_h));
    let a_ok = work.input_resident || c_tile * rows * work.in_w * work.act_bits <= cap.act;
    let o_ok = t_tile * r_tile * work.out_w * cap.acc_bits <= cap.out;
    w_ok && a_ok && o_ok
}

/// Pick the feasible tiling with the least DRAM traffic; ties go to fewer
/// tiles, then larger channel tiles.
pub fn schedule(work: &LayerWork, accel: &AcceleratorConfig) -> Result<TileSchedule> {
    let cap = Capacity::of(accel);
    let mut best: Option<TileSchedule> = None;
    for &t_tile in &tile_candidates(work.out_channels) {
        for &c_tile in &tile_candidates(work.in_channels) {
            if !fits(work, cap, t_tile, 1, c_tile) {
                continue;
            }
            // largest feasible row tile; feasibility is monotone in rows
            let (mut lo, mut hi) = (1, work.out_h);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if fits(work, cap, t_tile, mid, c_tile) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            let cand = analytic(work, t_tile, lo, c_tile);
            let better = match &best {
                None => true,
                Some(b) => {
                    (cand.dram_bits(), cand.tiles, std::cmp::Reverse(t_tile), std::cmp::Reverse(c_tile))
                        < (b.dram_bits(), b.tiles, std::cmp::Reverse(b.out_channel_tile), std::cmp::Reverse(b.in_channel_tile))
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best.ok_or_else(|| SimError::BufferTooSmall {
        layer: work.name.clone(),
        detail: format!(
            "1 output channel, 1 row and 1 input channel need {} weight bits, {} activation bits and {} accumulator bits; buffers hold {}/{}/{}",
            work.kernel * work.kernel * work.wgt_bits,
            work.input_rows(0, 1) * work.in_w * work.act_bits,
            work.out_w * cap.acc_bits,
            cap.wgt,
            cap.act,
            cap.out
        ),
    })
}

/// Which conv pairs keep their intermediate map on chip: a block-internal
/// conv feeding exactly one conv of the same block, with matching groups,
/// whose per-group output fits the activation buffer. A shuffle between
/// the two breaks the pair.
pub fn fused_pairs(spec: &NetworkSpec, accel: &AcceleratorConfig) -> Vec<(usize, usize)> {
    let consumers = spec.consumers();
    let cap = activation_capacity_bits(accel);
    let mut pairs = Vec::new();
    for q in spec.layers.iter().filter(|l| l.kind == LayerKind::Conv) {
        let [p_id] = q.inputs[..] else { continue };
        let p = spec.layer(p_id);
        if p.kind != LayerKind::Conv || consumers[p_id] != [q.id] {
            continue;
        }
        if p.block.is_none() || (p.stage, p.block) != (q.stage, q.block) {
            continue;
        }
        let (Some(pc), Some(qc)) = (p.conv, q.conv) else { continue };
        if pc.groups != qc.groups {
            continue;
        }
        let per_group = (pc.out_per_group() * p.out_spatial[0] * p.out_spatial[1]) as u64 * u64::from(qc.act_bits);
        if per_group <= cap {
            pairs.push((p_id, q.id));
        }
    }
    pairs
}

/// Build the per-group problems of every conv-carrying layer, with fusion
/// applied.
pub fn layer_works(spec: &NetworkSpec, accel: &AcceleratorConfig, mode: ExecutionMode) -> Result<Vec<LayerWork>> {
    let pairs = fused_pairs(spec, accel);
    spec.layers
        .iter()
        .filter(|l| l.has_conv())
        .map(|l| {
            let mut w = LayerWork::from_layer(spec, l, mode, accel.native_bits)?;
            w.output_on_chip = pairs.iter().any(|&(p, _)| p == l.id);
            w.input_resident = pairs.iter().any(|&(_, q)| q == l.id);
            Ok(w)
        })
        .collect()
}

/// Tile schedule of one layer in the context of its network.
pub fn schedule_layer(
    spec: &NetworkSpec,
    layer_id: usize,
    accel: &AcceleratorConfig,
    mode: ExecutionMode,
) -> Result<TileSchedule> {
    let works = layer_works(spec, accel, mode)?;
    let work = works
        .iter()
        .find(|w| w.id == layer_id)
        .ok_or_else(|| SimError::Layer {
            layer: format!("#{layer_id}"),
            msg: "not a convolution layer".into(),
        })?;
    schedule(work, accel)
}

/// SRAM reads of the operands of one tile, given array reuse.
pub(crate) fn operand_reads(
    style: AccelStyle,
    dims: [u64; 2],
    in_tile_bits: u64,
    w_tile_bits: u64,
    out_channels: u64,
    pixels: u64,
) -> (u64, u64) {
    match style {
        // inputs flow along columns, weights along rows
        AccelStyle::FusedSystolic => (
            in_tile_bits * out_channels.div_ceil(dims[1]),
            w_tile_bits * pixels.div_ceil(dims[0]),
        ),
        // inputs broadcast to all lanes, weights fetched per output pixel
        AccelStyle::VectorEngine => (
            in_tile_bits * out_channels.div_ceil(dims[0]),
            w_tile_bits * pixels,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_cover_all_tile_counts() {
        for n in 1..200u64 {
            let c = tile_candidates(n);
            let mut expect: Vec<u64> = (1..=n).map(|k| n.div_ceil(k)).collect();
            expect.dedup();
            assert_eq!(c, expect, "n={n}");
        }
    }

    #[test]
    fn input_rows_clip_padding() {
        let w = LayerWork {
            id: 0,
            name: "x".into(),
            groups: 1,
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
            stride: 1,
            pad: 1,
            in_h: 8,
            in_w: 8,
            out_h: 8,
            out_w: 8,
            act_bits: 4,
            wgt_bits: 4,
            passes: 4,
            act_repeat: 1,
            wgt_repeat: 1,
            input_resident: false,
            output_on_chip: false,
        };
        assert_eq!(w.input_rows(0, 8), 8);
        assert_eq!(w.input_rows(0, 1), 2);
        assert_eq!(w.input_rows(3, 5), 4);
        let ds = LayerWork {
            kernel: 1,
            stride: 2,
            pad: 0,
            out_h: 4,
            ..w
        };
        // rows 0, 2, 4, 6 are read: the span covers 7 rows
        assert_eq!(ds.input_rows(0, 4), 7);
    }
}
