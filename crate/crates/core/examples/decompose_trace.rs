//! Split M-bit codes into B-bit limbs and rebuild a product from limb
//! products alone.
//!
//! `cargo run --example decompose_trace`

use palquant::bitdecomp::{decomposed_matmul, group_count, recompose, split_limbs};
use palquant::quantizer::CodeTensor;
use palquant::tensorops::matmul_ref;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, b) = (6, 2);
    let (x, w) = (45u64, 27u64);
    let xl = split_limbs(x, m, b)?;
    let wl = split_limbs(w, m, b)?;
    println!("M={m} B={b}: {} limbs per operand, least significant first", group_count(m, b));
    println!("x = {x} -> {xl:?} (recomposes to {})", recompose(&xl, b));
    println!("w = {w} -> {wl:?} (recomposes to {})", recompose(&wl, b));

    let mut sum = 0;
    for (i, xi) in xl.iter().enumerate() {
        for (j, wj) in wl.iter().enumerate() {
            let term = (xi * wj) << ((i + j) as u32 * b);
            println!("  x{i}*w{j} << {:>2} = {term}", (i + j) as u32 * b);
            sum += term;
        }
    }
    println!("sum {sum}, direct {}", x * w);

    // the same on a small matrix product
    let xs = CodeTensor::new(vec![2, 3], vec![63, 0, 17, 5, 44, 30], m)?;
    let ws = CodeTensor::new(vec![2, 3], vec![1, 62, 9, 33, 33, 33], m)?;
    let got = decomposed_matmul(&xs, &ws, b)?;
    let to_matrix = |t: &CodeTensor| palquant::matrix::Matrix::from_vec(2, 3, t.codes().to_vec());
    let direct = matmul_ref(&to_matrix(&xs), &to_matrix(&ws))?;
    println!();
    println!("decomposed {:?}", got.product.data());
    println!("direct     {:?}", direct.data());
    println!("{} {b}-bit multiplies, largest shifted partial {}", got.limb_mults, got.max_partial);
    Ok(())
}
