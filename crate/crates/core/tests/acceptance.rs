//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the report.

use std::time::{Duration, Instant};

use palquant::bitdecomp::{fit_parallel_weights, solution_similarity, LimbSet};
use palquant::hwsim::{self, comparison_grid, AcceleratorConfig};
use palquant::matrix::Matrix;
use palquant::netmodel::{bitops, build_network, Arch};
use palquant::quantizer::CodeTensor;
use palquant::verify::{apply_scheme, render, run_suite, PropertyResult, Suite, PUBLISHED_BITOPS};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;

struct Outcome {
    name: &'static str,
    gating: bool,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(name: &'static str, gating: bool, budget: Duration, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let detail = if in_time { detail } else { format!("{detail}; over the {budget:?} budget") };
    Outcome { name, gating, passed: ok && in_time, detail, elapsed }
}

/// Properties from a suite, picked by name.
fn properties(suite: Suite, names: &[&str]) -> (bool, String) {
    let picked: Vec<PropertyResult> = run_suite(suite, SEED)
        .into_iter()
        .filter(|p| names.iter().any(|n| p.property.starts_with(n)))
        .collect();
    for n in names {
        assert!(picked.iter().any(|p| p.property.starts_with(n)), "no {n:?} property in {}", suite.name());
    }
    let ok = picked.iter().all(PropertyResult::passed);
    let cases: u64 = picked.iter().map(|p| p.cases).sum();
    let text = if ok { format!("{} properties, {cases} cases", picked.len()) } else { render(&picked) };
    (ok, text)
}

fn bitops_table() -> (bool, String) {
    let mut worst: (f64, String) = (0.0, String::new());
    for (arch, scheme, want) in PUBLISHED_BITOPS {
        let net = apply_scheme(&build_network(arch.parse().unwrap()), scheme).unwrap();
        let got = bitops(&net).unwrap().total_giga;
        let dev = (got / want - 1.0).abs();
        if dev >= worst.0 {
            worst = (dev, format!("{arch} {scheme}: {got:.2}G vs {want}G"));
        }
    }
    (worst.0 <= 0.01, format!("16 totals, worst {:.2}% ({})", worst.0 * 100.0, worst.1))
}

fn codes(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bits: u32) -> CodeTensor {
    let v = (0..rows * cols).map(|_| rng.random_range(0..1u64 << bits)).collect();
    CodeTensor::new(vec![rows, cols], v, bits).unwrap()
}

fn limb_mats(x: &CodeTensor, b: u32) -> Vec<Matrix<f64>> {
    let set = LimbSet::split(x, b).unwrap();
    (0..set.group_count()).map(|i| set.limb_matrix(i).unwrap()).collect()
}

/// The three fit oracles plus the similarity matrix of an exact target,
/// which is reported but not judged.
fn fit_oracles() -> (bool, String) {
    let (ok, text) = properties(Suite::Decomp, &["parallel fit"]);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let x = codes(&mut rng, 64, 8, 4);
    let w = codes(&mut rng, 4, 8, 4);
    let exact = Matrix::from_fn(64, 4, |r, c| {
        (0..8).map(|k| (x.codes()[r * 8 + k] * w.codes()[c * 8 + k]) as f64).sum()
    });
    let fit = fit_parallel_weights(&limb_mats(&x, 2), &exact, 2).unwrap();
    let sim = solution_similarity(&fit);
    let rows: Vec<String> = (0..sim.matrix.rows())
        .map(|r| {
            let cells: Vec<String> = (0..sim.matrix.cols()).map(|c| format!("{:.3}", sim.matrix.get(r, c))).collect();
            format!("[{}]", cells.join(" "))
        })
        .collect();
    (ok, format!("{text}; exact-target similarity {}", rows.join(" ")))
}

fn ratio_calibration() -> (bool, String) {
    let accel = AcceleratorConfig::preset("bitfusion-like").unwrap();
    let points = hwsim::sweep(&build_network(Arch::ResNet18), &accel, 2, &[2, 3, 4]).unwrap();
    let rows: Vec<_> = points.into_iter().map(|p| p.row).collect();
    println!("{}", comparison_grid(&rows, 0.25).trim_end());
    let worst = rows
        .iter()
        .filter_map(|r| r.deviation())
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let ratios: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.2}x/{:.2}x", r.result.speedup, r.result.energy_efficiency))
        .collect();
    (worst <= 0.25, format!("G=2,3,4 {}; worst deviation {:.1}%", ratios.join(" "), worst * 100.0))
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let outcomes = vec![
        timed("BitOps table reproduction", true, s(1), bitops_table),
        timed("decomposed matmul exactness", true, s(30), || {
            properties(Suite::Decomp, &["exhaustive scalar", "random 8x8"])
        }),
        timed("cyclic shuffle mixing check", true, s(1), || {
            properties(Suite::Shuffle, &["G-1 cyclic shuffles"])
        }),
        timed("quantizer properties and STE", true, s(30), || {
            properties(
                Suite::Quantizer,
                &["code range", "idempotence", "monotonicity", "codebook cardinality", "STE gradients"],
            )
        }),
        timed("parallel-weight fit oracles", true, s(30), fit_oracles),
        timed("structural equivalences", true, s(30), || {
            properties(
                Suite::Shuffle,
                &["cyclic permute applied", "cyclic shuffle with zero", "grouped conv equals G", "grouped conv equals block"],
            )
        }),
        timed("simulator properties", true, s(60), || {
            properties(
                Suite::Hwsim,
                &["determinism", "compute-bound", "1 <= speedup", "speedup and efficiency", "grouped DRAM traffic"],
            )
        }),
        timed("accelerator ratio calibration (soft)", false, s(60), ratio_calibration),
    ];

    println!();
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else if o.gating { "FAIL" } else { "FAIL (soft, not gating)" };
        println!("{tag} {}: {} [{:.2?}]", o.name, o.detail, o.elapsed);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| o.gating && !o.passed).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
