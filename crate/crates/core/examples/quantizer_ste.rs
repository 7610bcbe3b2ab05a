//! Quantize a tensor to b-bit codes and check the straight-through
//! gradients against finite differences.
//!
//! `cargo run --example quantizer_ste`

use palquant::quantizer::{
    fake_quantize, quantize_codes, ste_gradients, ste_surrogate, QuantParams, TensorRole,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xs = [-1.3, -0.4, 0.0, 0.25, 0.9, 2.2];
    for bits in [1, 2, 4] {
        let p = QuantParams::fit(bits, &xs)?;
        println!(
            "b={bits} codes {:?} weights {:.3?} activations {:.3?}",
            quantize_codes(&xs, &p)?,
            fake_quantize(&xs, &p, TensorRole::Weight)?,
            fake_quantize(&xs, &p, TensorRole::Activation)?,
        );
    }

    // learned clipping bounds: gradients flow to x, l and u inside the
    // range and vanish once x saturates
    let p = QuantParams::new(4, -1.0, 1.5, 1.0)?;
    let h = 1e-6;
    println!("\n{:>6} {:>10} {:>10} {:>10} {:>10}", "x", "d/dx", "fd", "d/dl", "d/du");
    for x in [-1.5, -0.5, 0.3, 1.2, 2.0] {
        let g = ste_gradients(x, &p, TensorRole::Weight);
        let fd = (ste_surrogate(x + h, &p, TensorRole::Weight) - ste_surrogate(x - h, &p, TensorRole::Weight)) / (2.0 * h);
        println!("{x:>6.2} {:>10.5} {fd:>10.5} {:>10.5} {:>10.5}", g.d_x, g.d_lower, g.d_upper);
    }
    Ok(())
}
