//! Describe a network as JSON, transform it into a parallel-group network
//! and inspect the result.
//!
//! `cargo run --example custom_network`

use palquant::netmodel::{
    annotate_uniform, bitops, build_network, load_spec, palquant_transform, palquant_transform_with, save_spec, validate_spec,
    Arch, ChannelShufflePlacement, NetworkSpec, PalQuantOptions,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir();
    let path = dir.join("palquant-plain18.json");
    save_spec(&build_network(Arch::Plain18), &path)?;
    let base = load_spec(&path)?;
    println!("{} from {}: {} layers, {} MACs", base.name, path.display(), base.layers.len(), base.macs());

    let pal = palquant_transform(&base, 2, 3)?;
    let problems = validate_spec(&pal);
    println!("{} -> {} layers, validation: {}", pal.scheme, pal.layers.len(), if problems.is_empty() { "ok".into() } else { problems.join("; ") });
    let uniform = annotate_uniform(&base, 6, 6)?;
    println!("BitOps {:.2}G at 6/6 bits -> {:.2}G", bitops(&uniform)?.total_giga, bitops(&pal)?.total_giga);

    // shuffles between the two convs of every block instead of per stage
    let opts = PalQuantOptions { channel_shuffle: ChannelShufflePlacement::MidBlock, ..Default::default() };
    let mid = palquant_transform_with(&base, 2, 3, opts)?;
    println!("mid-block shuffles: {} layers", mid.layers.len());

    let text = pal.to_json();
    assert_eq!(NetworkSpec::from_json(&text)?, pal);
    println!("JSON round trip ok ({} bytes)", text.len());
    std::fs::remove_file(path)?;
    Ok(())
}
