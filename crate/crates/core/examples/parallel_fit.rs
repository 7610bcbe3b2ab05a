//! Fit per-limb weights so that G low-bit paths approximate a target
//! layer output, and compare against a single path.
//!
//! `cargo run --example parallel_fit`

use palquant::bitdecomp::{best_single_group_residual, fit_parallel_weights, solution_similarity, LimbSet};
use palquant::matrix::Matrix;
use palquant::quantizer::CodeTensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, s, t) = (128, 6, 3);
    let x = CodeTensor::new(vec![n, s], (0..n * s).map(|_| rng.random_range(0..16)).collect(), 4)?;
    let limbs = LimbSet::split(&x, 2)?;
    let xl: Vec<Matrix<f64>> = (0..limbs.group_count()).map(|i| limbs.limb_matrix(i)).collect::<Result<_, _>>()?;
    let xf = Matrix::from_fn(n, s, |r, c| x.codes()[r * s + c] as f64);

    // a full-precision layer, and the same layer with a nonlinearity the
    // linear paths cannot express
    let w = Matrix::from_fn(t, s, |_, _| rng.random_range(-1.0..1.0));
    let linear = palquant::tensorops::matmul_ref(&xf, &w)?;
    let bent = linear.map(|v| v.max(0.0));

    for (name, target) in [("linear", &linear), ("relu", &bent)] {
        let fit = fit_parallel_weights(&xl, target, 2)?;
        let single = best_single_group_residual(&xl, target, 2)?;
        println!(
            "{name:<6} G=2 residual {:.3e} (relative {:.3e}); best single path {:.3e}",
            fit.residual, fit.relative_residual, single
        );
        let sim = solution_similarity(&fit);
        println!("       path similarity {:.4}", sim.matrix.get(0, 1));
    }
    Ok(())
}
