//! How many cyclic shuffle modules it takes before every group has seen
//! every other group, and what one module does to real channels.
//!
//! `cargo run --example cyclic_shuffle`

use palquant::tensorops::{
    cyclic_permutation_map, cyclic_shuffle, group_mixing_matrix, ConvSpec, ConvWeights, FeatureTensor,
    MixStage,
};

fn pipeline(modules: usize, stage: MixStage) -> Vec<MixStage> {
    let mut p = vec![MixStage::GroupedConv];
    for _ in 0..modules {
        p.extend([stage, MixStage::GroupedConv]);
    }
    p
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for g in 2..=8 {
        let needed = (0..g).find(|&k| group_mixing_matrix(&pipeline(k, MixStage::CyclicShuffle), g).is_full());
        let without_perm = group_mixing_matrix(&pipeline(g, MixStage::UnpermutedShuffle), g);
        println!(
            "G={g}: full mixing after {} modules; without the permutation {} of {} pairs connected",
            needed.map_or("-".into(), |k| k.to_string()),
            without_perm.count(),
            g * g
        );
    }

    let g = 3;
    let m = group_mixing_matrix(&pipeline(1, MixStage::CyclicShuffle), g);
    println!("\nG={g}, one module (row = output group):");
    for a in 0..g {
        let row: String = (0..g).map(|b| if m.reaches(a, b) { '#' } else { '.' }).collect();
        println!("  {row}");
    }

    // six channels in three groups; the 1x1 conv copies each permuted
    // channel so the residual sum exposes the permutation
    println!("\npermutation map {:?}", cyclic_permutation_map(6, g)?);
    let x = FeatureTensor::from_fn(1, 6, 1, 1, |_, c, _, _| 10 * c as i64);
    let spec = ConvSpec::new(6, 6, 1, 1, 0).with_groups(g);
    let eye = ConvWeights::new(spec, (0..6).flat_map(|o| (0..2).map(move |i| i64::from(o % 2 == i))).collect())?;
    let z = cyclic_shuffle(&x, &eye, g)?;
    println!("x {:?}\nz {:?}", x.data(), z.data());
    Ok(())
}
