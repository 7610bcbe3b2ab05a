use serde::{Deserialize, Serialize};

use super::schedule::{layer_works, operand_reads, schedule, LayerWork, TileSchedule};
use super::{AcceleratorConfig, ExecutionMode, Result, SimError};
use crate::netmodel::NetworkSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compute: f64,
    pub sram: f64,
    pub dram: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.compute + self.sram + self.dram
    }

    fn add(&mut self, other: &Self) {
        self.compute += other.compute;
        self.sram += other.sram;
        self.dram += other.dram;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub id: usize,
    pub name: String,
    pub macs: u64,
    /// Native-width (2-bit) multiply-accumulates.
    pub native_macs: u64,
    pub compute_cycles: u64,
    pub stall_cycles: u64,
    pub sram_bits_read: u64,
    pub sram_bits_written: u64,
    pub dram_bits: u64,
    pub output_fused: bool,
    pub input_resident: bool,
    pub schedule: TileSchedule,
    pub energy_pj: EnergyBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub macs: u64,
    pub native_macs: u64,
    pub compute_cycles: u64,
    pub stall_cycles: u64,
    pub sram_bits_read: u64,
    pub sram_bits_written: u64,
    pub dram_bits: u64,
    pub energy_pj: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub network: String,
    pub scheme: String,
    pub mode: ExecutionMode,
    pub accelerator: AcceleratorConfig,
    pub per_layer: Vec<LayerStats>,
    pub totals: Totals,
    pub wall_cycles: u64,
    /// Bits every run must move at least once: weights, unfused inputs and
    /// unfused outputs.
    pub footprint_bits: u64,
}

impl SimReport {
    pub fn total_energy(&self) -> f64 {
        self.totals.energy_pj.total()
    }

    pub fn dram_energy_share(&self) -> f64 {
        let total = self.total_energy();
        if total > 0.0 {
            self.totals.energy_pj.dram / total
        } else {
            0.0
        }
    }

    pub fn layer(&self, name: &str) -> Option<&LayerStats> {
        self.per_layer.iter().find(|l| l.name == name)
    }
}

/// Walk the tiles of one group in loop order and charge every counter.
/// Groups are identical, so one group is walked and scaled.
fn run_layer(work: &LayerWork, sched: TileSchedule, accel: &AcceleratorConfig) -> LayerStats {
    let k2 = work.kernel * work.kernel;
    let (n_t, n_s, n_c) = (sched.out_channel_tiles, sched.row_tiles, sched.in_channel_tiles);
    let (tt, rt, ct) = (sched.out_channel_tile, sched.row_tile, sched.in_channel_tile);
    let bw = accel.dram_bandwidth_bits_per_cycle;
    let mut g = LayerStats {
        id: work.id,
        name: work.name.clone(),
        macs: work.macs(),
        native_macs: 0,
        compute_cycles: 0,
        stall_cycles: 0,
        sram_bits_read: 0,
        sram_bits_written: 0,
        dram_bits: 0,
        output_fused: work.output_on_chip,
        input_resident: work.input_resident,
        schedule: sched.clone(),
        energy_pj: EnergyBreakdown::default(),
    };
    for ot in 0..n_t {
        let t_act = tt.min(work.out_channels - ot * tt);
        for sp in 0..n_s {
            let r0 = sp * rt;
            let r_act = rt.min(work.out_h - r0);
            let in_rows = work.input_rows(r0, r0 + r_act);
            let pixels = r_act * work.out_w;
            for cc in 0..n_c {
                let c_act = ct.min(work.in_channels - cc * ct);
                let native = t_act * c_act * k2 * pixels * work.passes;
                let compute = native.div_ceil(accel.mult_count);

                let w_tile = t_act * c_act * k2 * work.wgt_bits;
                let in_tile = c_act * in_rows * work.in_w * work.act_bits;
                let w_load = if n_c > 1 || sp == 0 { w_tile } else { 0 };
                let in_load = if work.input_resident || (n_s == 1 && n_c == 1 && ot > 0) {
                    0
                } else {
                    in_tile
                };
                let last = cc + 1 == n_c;
                let out_bits = if last { t_act * pixels * work.act_bits } else { 0 };
                let store = if work.output_on_chip { 0 } else { out_bits };
                let dram = w_load + in_load + store;
                let transfer = dram.div_ceil(bw);

                let (in_reads, w_reads) =
                    operand_reads(accel.style, accel.array_dims, in_tile, w_tile, t_act, pixels);
                // partial sums are read back and rewritten for every input-channel tile after the first
                let psum = if cc > 0 { t_act * pixels * accel.acc_bits } else { 0 };

                g.native_macs += native;
                g.compute_cycles += compute;
                g.stall_cycles += transfer.saturating_sub(compute);
                g.dram_bits += dram;
                g.sram_bits_written += w_load + in_load + out_bits + psum;
                g.sram_bits_read +=
                    in_reads * work.act_repeat + w_reads * work.wgt_repeat + psum + store;
            }
        }
    }
    let groups = work.groups;
    for v in [
        &mut g.native_macs,
        &mut g.compute_cycles,
        &mut g.stall_cycles,
        &mut g.dram_bits,
        &mut g.sram_bits_written,
        &mut g.sram_bits_read,
    ] {
        *v *= groups;
    }
    let e = accel.energy;
    g.energy_pj = EnergyBreakdown {
        compute: g.native_macs as f64 * e.e_mac_pj,
        sram: (g.sram_bits_read + g.sram_bits_written) as f64 * e.e_sram_pj_per_bit,
        dram: g.dram_bits as f64 * e.e_dram_pj_per_bit,
    };
    g
}

/// Run every conv-carrying layer of `spec` on `accel`. Shuffles, adds and
/// pools are treated as free data movement inside the buffers.
pub fn simulate(spec: &NetworkSpec, accel: &AcceleratorConfig, mode: ExecutionMode) -> Result<SimReport> {
    mode.check(spec)?;
    let works = layer_works(spec, accel, mode)?;
    let mut per_layer = Vec::with_capacity(works.len());
    let mut footprint = 0;
    for work in &works {
        let sched = schedule(work, accel)?;
        footprint += work.groups
            * (work.weight_bits_per_group()
                + if work.input_resident { 0 } else { work.input_footprint_bits() }
                + if work.output_on_chip { 0 } else { work.output_bits_per_group() });
        per_layer.push(run_layer(work, sched, accel));
    }
    let mut totals = Totals::default();
    for l in &per_layer {
        totals.macs += l.macs;
        totals.native_macs += l.native_macs;
        totals.compute_cycles += l.compute_cycles;
        totals.stall_cycles += l.stall_cycles;
        totals.sram_bits_read += l.sram_bits_read;
        totals.sram_bits_written += l.sram_bits_written;
        totals.dram_bits += l.dram_bits;
        totals.energy_pj.add(&l.energy_pj);
    }
    Ok(SimReport {
        network: spec.name.clone(),
        scheme: spec.scheme.to_string(),
        mode,
        accelerator: accel.clone(),
        wall_cycles: totals.compute_cycles + totals.stall_cycles,
        per_layer,
        totals,
        footprint_bits: footprint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub speedup: f64,
    pub energy_efficiency: f64,
    pub baseline_dram_share: f64,
    pub proposed_dram_share: f64,
}

/// Speedup and energy efficiency of `proposed` over `baseline`.
pub fn compare(baseline: &SimReport, proposed: &SimReport) -> Result<Comparison> {
    if baseline.accelerator != proposed.accelerator {
        return Err(SimError::ConfigMismatch(
            baseline.accelerator.name.clone(),
            proposed.accelerator.name.clone(),
        ));
    }
    Ok(Comparison {
        speedup: baseline.wall_cycles as f64 / proposed.wall_cycles as f64,
        energy_efficiency: baseline.total_energy() / proposed.total_energy(),
        baseline_dram_share: baseline.dram_energy_share(),
        proposed_dram_share: proposed.dram_energy_share(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{LayerKind, LayerSpec, Scheme};
    use crate::tensorops::ConvSpec;

    fn one_layer(conv: ConvSpec, spatial: usize) -> NetworkSpec {
        let mut input: LayerSpec =
            serde_json::from_str(r#"{"id":0,"name":"input","kind":"Input","channels":1,"out_spatial":[1,1],"stage":0}"#)
                .unwrap();
        input.channels = conv.in_channels;
        input.out_spatial = [spatial, spatial];
        let mut c = input.clone();
        c.id = 1;
        c.name = "conv".into();
        c.kind = LayerKind::Conv;
        c.inputs = vec![0];
        c.channels = conv.out_channels;
        c.conv = Some(conv);
        NetworkSpec {
            name: "one".into(),
            input_resolution: [spatial, spatial],
            scheme: Scheme::Uniform { b_a: 2, b_w: 2 },
            layers: vec![input, c],
        }
    }

    fn nib2() -> ExecutionMode {
        ExecutionMode::NibbleIteration { total_bits: 2, limb_bits: 2 }
    }

    #[test]
    fn ceiling_compute_cycles() {
        // 16 * 16 * 1 * 1 * 2 * 2 = 1024 two-bit MACs
        let net = one_layer(ConvSpec::new(16, 16, 1, 1, 0).with_bits(2, 2), 2);
        let mut accel = AcceleratorConfig::preset("bitfusion-like").unwrap().unbounded();
        accel.mult_count = 256;
        let r = simulate(&net, &accel, nib2()).unwrap();
        assert_eq!(r.totals.native_macs, 1024);
        assert_eq!(r.totals.compute_cycles, 4);
        accel.mult_count = 1000;
        assert_eq!(simulate(&net, &accel, nib2()).unwrap().totals.compute_cycles, 2);
    }

    #[test]
    fn fitting_layer_is_one_tile_and_meets_footprint() {
        let net = one_layer(ConvSpec::new(8, 8, 3, 1, 1).with_bits(2, 2), 8);
        let accel = AcceleratorConfig::preset("bitfusion-like").unwrap();
        let r = simulate(&net, &accel, nib2()).unwrap();
        let l = &r.per_layer[0];
        assert_eq!(l.schedule.tiles, 1);
        assert_eq!(l.schedule.dram_weight_bits, 8 * 8 * 9 * 2);
        assert_eq!(r.totals.dram_bits, r.footprint_bits);
    }

    #[test]
    fn totals_are_sums_and_wall_bounds_hold() {
        let net = one_layer(ConvSpec::new(64, 64, 3, 1, 1).with_bits(2, 2), 28);
        let accel = AcceleratorConfig::preset("bitfusion-like").unwrap().with_buffers(1024, 1024, 1024);
        let r = simulate(&net, &accel, nib2()).unwrap();
        let l = &r.per_layer[0];
        assert!(l.schedule.tiles > 1);
        assert_eq!(l.dram_bits, l.schedule.dram_bits());
        assert_eq!(r.totals.dram_bits, l.dram_bits);
        assert!(r.wall_cycles >= r.totals.compute_cycles);
        assert!(r.wall_cycles >= r.totals.dram_bits / accel.dram_bandwidth_bits_per_cycle);
        assert!(r.totals.dram_bits >= r.footprint_bits);
    }

    #[test]
    fn tiny_buffer_names_the_layer() {
        let net = one_layer(ConvSpec::new(8, 8, 3, 1, 1).with_bits(2, 2), 8);
        let accel = AcceleratorConfig::preset("bitfusion-like").unwrap().with_buffers(1, 1, 1);
        let err = simulate(&net, &accel, nib2()).unwrap_err().to_string();
        assert!(err.contains("conv") && err.contains("buffer too small for minimum tile"), "{err}");
    }

    #[test]
    fn identical_reports_compare_to_one() {
        let net = one_layer(ConvSpec::new(8, 8, 3, 1, 1).with_bits(2, 2), 8);
        let accel = AcceleratorConfig::preset("bpvec-like").unwrap();
        let r = simulate(&net, &accel, nib2()).unwrap();
        let c = compare(&r, &r).unwrap();
        assert_eq!((c.speedup, c.energy_efficiency), (1.0, 1.0));
        let other = simulate(&net, &AcceleratorConfig::preset("bitfusion-like").unwrap(), nib2()).unwrap();
        assert!(matches!(compare(&r, &other), Err(SimError::ConfigMismatch(..))));
    }
}
