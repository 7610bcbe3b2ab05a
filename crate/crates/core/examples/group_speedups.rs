//! Speedup and energy efficiency of 2-bit parallel-group ResNets over
//! 4/6/8-bit nibble iteration on both accelerator presets.
//!
//! Run with `cargo run --release --example group_speedups`.

use palquant::hwsim::{comparison_grid, sweep, AcceleratorConfig, PRESET_NAMES};
use palquant::netmodel::{build_network, Arch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rows = Vec::new();
    for arch in [Arch::ResNet18, Arch::ResNet34] {
        let net = build_network(arch);
        for preset in PRESET_NAMES {
            let accel = AcceleratorConfig::preset(preset)?;
            for p in sweep(&net, &accel, 2, &[2, 3, 4])? {
                let (b, q) = (&p.baseline, &p.proposed);
                println!(
                    "{:<9} {:<15} G={}  stall share {:.2} -> {:.2}  dram energy share {:.2} -> {:.2}  dram Mbit {:.1} -> {:.1}",
                    net.name,
                    preset,
                    p.groups,
                    b.totals.stall_cycles as f64 / b.wall_cycles as f64,
                    q.totals.stall_cycles as f64 / q.wall_cycles as f64,
                    b.dram_energy_share(),
                    q.dram_energy_share(),
                    b.totals.dram_bits as f64 / 1e6,
                    q.totals.dram_bits as f64 / 1e6,
                );
                rows.push(p.row);
            }
        }
    }
    println!();
    print!("{}", comparison_grid(&rows, 0.25));
    Ok(())
}
