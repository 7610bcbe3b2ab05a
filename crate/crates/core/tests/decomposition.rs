use palquant::bitdecomp::*;
use palquant::matrix::Matrix;
use palquant::quantizer::{max_code, CodeTensor};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn codes(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bits: u32) -> CodeTensor {
    CodeTensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(0..=max_code(bits))).collect(), bits).unwrap()
}

/// Schoolbook product in u128 so it cannot share an overflow bug with
/// the decomposed path.
fn schoolbook(x: &CodeTensor, w: &CodeTensor) -> Vec<u128> {
    let (n, s, t) = (x.shape()[0], x.shape()[1], w.shape()[0]);
    let mut out = vec![0u128; n * t];
    for r in 0..n {
        for c in 0..t {
            for k in 0..s {
                out[r * t + c] += u128::from(x.codes()[r * s + k]) * u128::from(w.codes()[c * s + k]);
            }
        }
    }
    out
}

#[test]
fn every_scalar_pair_up_to_eight_bits() {
    for m in 1..=8u32 {
        for b in [2u32, 3, 4] {
            for x in 0..=max_code(m) {
                let xl = split_limbs(x, m, b).unwrap();
                assert_eq!(recompose(&xl, b), x);
                for w in 0..=max_code(m) {
                    let wl = split_limbs(w, m, b).unwrap();
                    let mut sum = 0u64;
                    for (i, xi) in xl.iter().enumerate() {
                        for (j, wj) in wl.iter().enumerate() {
                            sum += (xi * wj) << ((i + j) as u32 * b);
                        }
                    }
                    assert_eq!(sum, x * w, "M={m} B={b} x={x} w={w}");
                }
            }
        }
    }
}

#[test]
fn random_matrices_match_schoolbook() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..1000 {
        let x = codes(&mut rng, 8, 8, 8);
        let w = codes(&mut rng, 8, 8, 8);
        let d = decomposed_matmul(&x, &w, 2).unwrap();
        let got: Vec<u128> = d.product.data().iter().map(|&v| u128::from(v)).collect();
        assert_eq!(got, schoolbook(&x, &w), "trial {trial}");
        // G^2 limb products per scalar product
        assert_eq!(d.limb_mults, 16 * 8 * 8 * 8);
    }
}

#[test]
fn wide_operands_do_not_overflow() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = codes(&mut rng, 4, 64, 16);
    let w = codes(&mut rng, 3, 64, 16);
    for b in [2u32, 3, 5, 8, 16] {
        let d = decomposed_matmul(&x, &w, b).unwrap();
        let got: Vec<u128> = d.product.data().iter().map(|&v| u128::from(v)).collect();
        assert_eq!(got, schoolbook(&x, &w), "B={b}");
    }
}

proptest! {
    #[test]
    fn limbs_round_trip(m in 1u32..=16, b in 1u32..=8, seed in any::<u64>()) {
        let x = seed & max_code(m);
        let limbs = split_limbs(x, m, b).unwrap();
        prop_assert_eq!(limbs.len() as u32, group_count(m, b));
        prop_assert!(limbs.iter().all(|&l| l <= max_code(b)));
        prop_assert_eq!(recompose(&limbs, b), x);
    }
}

fn limb_mats(x: &CodeTensor, b: u32) -> Vec<Matrix<f64>> {
    let set = LimbSet::split(x, b).unwrap();
    (0..set.group_count()).map(|i| set.limb_matrix(i).unwrap()).collect()
}

#[test]
fn parallel_fit_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let (n, s, t) = (20, 3, 2);
        // one limb: the exact product is realizable
        let x = codes(&mut rng, n, s, 2);
        let w = codes(&mut rng, t, s, 2);
        let target = Matrix::from_fn(n, t, |r, c| {
            (0..s).map(|k| (x.codes()[r * s + k] * w.codes()[c * s + k]) as f64).sum()
        });
        assert!(fit_parallel_weights(&limb_mats(&x, 2), &target, 2).unwrap().relative_residual <= 1e-9);

        // the exact M-bit product is realized by Wbar_i = W for every limb
        let x4 = codes(&mut rng, n, s, 4);
        let w4 = codes(&mut rng, t, s, 4);
        let exact = Matrix::from_fn(n, t, |r, c| {
            (0..s).map(|k| (x4.codes()[r * s + k] * w4.codes()[c * s + k]) as f64).sum()
        });
        let xl = limb_mats(&x4, 2);
        let fit = fit_parallel_weights(&xl, &exact, 2).unwrap();
        assert!(fit.relative_residual <= 1e-8, "{}", fit.relative_residual);

        let noise = Matrix::from_fn(n, t, |_, _| rng.random_range(-30.0..30.0));
        let g = fit_parallel_weights(&xl, &noise, 2).unwrap().residual;
        assert!(g <= best_single_group_residual(&xl, &noise, 2).unwrap() * (1.0 + 1e-9));
    }
}

#[test]
fn exact_target_degenerates_to_one_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = codes(&mut rng, 64, 4, 4);
    let w = codes(&mut rng, 3, 4, 4);
    let exact = Matrix::from_fn(64, 3, |r, c| {
        (0..4).map(|k| (x.codes()[r * 4 + k] * w.codes()[c * 4 + k]) as f64).sum()
    });
    let fit = fit_parallel_weights(&limb_mats(&x, 2), &exact, 2).unwrap();
    for m in &fit.per_group {
        for (a, b) in m.data().iter().zip(w.codes()) {
            assert!((a - *b as f64).abs() < 1e-6);
        }
    }
    let sim = solution_similarity(&fit);
    assert!((sim.matrix.get(0, 1) - 1.0).abs() < 1e-9);
}
