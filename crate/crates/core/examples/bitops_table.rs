//! BitOps of ResNet-18/34 under uniform and parallel-group quantization,
//! next to the published totals.
//!
//! `cargo run --example bitops_table`

use palquant::netmodel::{bitops, build_network, palquant_transform, Arch};
use palquant::verify::{apply_scheme, PUBLISHED_BITOPS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<9} {:<13} {:>10} {:>10} {:>8}", "network", "scheme", "BitOps", "published", "delta");
    for (arch, scheme, want) in PUBLISHED_BITOPS {
        let net = apply_scheme(&build_network(arch.parse()?), scheme)?;
        let got = bitops(&net)?.total_giga;
        println!(
            "{arch:<9} {scheme:<13} {:>9.2}G {:>9.2}G {:>7.2}%",
            got,
            want,
            (got / want - 1.0) * 100.0
        );
    }

    // where the operations go: the per-layer breakdown of one network
    let net = palquant_transform(&build_network(Arch::ResNet18), 2, 2)?;
    println!();
    print!("{}", bitops(&net)?.to_table());
    Ok(())
}
