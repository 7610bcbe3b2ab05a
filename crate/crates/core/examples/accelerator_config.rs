//! Simulate one network on a hand-written accelerator config and see how
//! on-chip buffer size moves the parallel-group advantage.
//!
//! `cargo run --release --example accelerator_config`

use palquant::hwsim::{load_config, sweep, AcceleratorConfig};
use palquant::netmodel::{build_network, Arch};

const CONFIG: &str = r#"{
  "name": "tiny-vector",
  "style": "VectorEngine",
  "native_bits": 2,
  "mult_count": 2048,
  "array_dims": [64, 32],
  "act_buffer_bytes": 16384,
  "wgt_buffer_bytes": 16384,
  "out_buffer_bytes": 8192,
  "dram_bandwidth_bits_per_cycle": 128,
  "acc_bits": 32,
  "energy": { "e_mac_pj": 2.0, "e_sram_pj_per_bit": 0.1, "e_dram_pj_per_bit": 15.0 }
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let accel = load_config(CONFIG)?;
    let net = build_network(Arch::ResNet18);

    let points = sweep(&net, &accel, 2, &[2])?;
    print!("{}", points[0].proposed.to_table());

    println!("\nbuffer KiB   G=2 speedup  G=4 speedup  G=4 efficiency");
    for kib in [4u64, 16, 64, 256] {
        let sized: AcceleratorConfig = accel.with_buffers(kib * 1024, kib * 1024, kib * 512);
        let pts = sweep(&net, &sized, 2, &[2, 4])?;
        println!(
            "{kib:>10} {:>12.2}x {:>11.2}x {:>14.2}x",
            pts[0].row.result.speedup, pts[1].row.result.speedup, pts[1].row.result.energy_efficiency
        );
    }
    Ok(())
}
