//! Seeded property suites behind `palquant verify`.
//!
//! Every property reports how many cases it ran and how many failed, so a
//! run is a reproducible table rather than a single bit.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitdecomp::{
    best_single_group_residual, decomposed_matmul, fit_parallel_weights, LimbSet,
};
use crate::hwsim::{self, AcceleratorConfig, PRESET_NAMES};
use crate::matrix::Matrix;
use crate::netmodel::{
    annotate_uniform, bitops, build_network, palquant_transform, validate_spec, Arch, NetworkSpec,
};
use crate::quantizer::{
    fake_quantize, max_code, normalize, quantize_code, reconstruct, ste_gradients, ste_surrogate,
    CodeTensor, QuantParams, TensorRole,
};
use crate::tensorops::{
    channel_shuffle, channel_unshuffle, conv2d_grouped, cyclic_permute, cyclic_shuffle,
    group_mixing_matrix, matmul_ref, ConvSpec, ConvWeights, FeatureTensor, MixStage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Quantizer,
    Decomp,
    Shuffle,
    Netmodel,
    Hwsim,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Quantizer, Suite::Decomp, Suite::Shuffle, Suite::Netmodel, Suite::Hwsim];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Quantizer => "quantizer",
            Suite::Decomp => "decomp",
            Suite::Shuffle => "shuffle",
            Suite::Netmodel => "netmodel",
            Suite::Hwsim => "hwsim",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub suite: Suite,
    pub property: String,
    pub cases: u64,
    pub failures: u64,
    /// First failing case, if any.
    pub example: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Counter for one property.
struct Check {
    result: PropertyResult,
}

impl Check {
    fn new(suite: Suite, property: &str) -> Self {
        Self {
            result: PropertyResult {
                suite,
                property: property.into(),
                cases: 0,
                failures: 0,
                example: None,
            },
        }
    }

    fn case(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.result.cases += 1;
        if !ok {
            self.result.failures += 1;
            if self.result.example.is_none() {
                self.result.example = Some(describe());
            }
        }
    }

    fn done(self) -> PropertyResult {
        self.result
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<PropertyResult> {
    match suite {
        Suite::Quantizer => quantizer_suite(seed),
        Suite::Decomp => decomp_suite(seed),
        Suite::Shuffle => shuffle_suite(seed),
        Suite::Netmodel => netmodel_suite(),
        Suite::Hwsim => hwsim_suite(),
    }
}

pub fn run_all(seed: u64) -> Vec<PropertyResult> {
    Suite::ALL.into_iter().flat_map(|s| run_suite(s, seed)).collect()
}

/// One line per property plus a summary line.
pub fn render(results: &[PropertyResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(
            s,
            "{:<4} {}/{}: {} cases, {} failures{}",
            if r.passed() { "ok" } else { "FAIL" },
            r.suite.name(),
            r.property,
            r.cases,
            r.failures,
            r.example.as_deref().map(|e| format!(" (first: {e})")).unwrap_or_default()
        );
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    let _ = writeln!(s, "{} properties, {} failed", results.len(), failed);
    s
}

fn random_params(rng: &mut ChaCha8Rng, bits: u32) -> QuantParams {
    let l = rng.random_range(-8.0..4.0);
    let u = l + rng.random_range(0.5..8.0);
    QuantParams::new(bits, l, u, 1.0).expect("valid random params")
}

fn quantizer_suite(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = Suite::Quantizer;
    let mut range = Check::new(q, "code range");
    let mut idem = Check::new(q, "idempotence");
    let mut mono = Check::new(q, "monotonicity");
    let mut card = Check::new(q, "codebook cardinality");
    for bits in [1u32, 2, 4, 8] {
        for _ in 0..10_000 {
            let p = random_params(&mut rng, bits);
            let span = p.upper() - p.lower();
            let x1 = rng.random_range(p.lower() - span..p.upper() + span);
            let x2 = rng.random_range(p.lower() - span..p.upper() + span);
            let code = |x: f64| quantize_code(normalize(x, &p).unwrap(), bits).unwrap();
            let (c1, c2) = (code(x1), code(x2));
            range.case(c1 <= max_code(bits), || format!("b={bits} x={x1} code={c1}"));

            let r = reconstruct(x1, &p).unwrap();
            idem.case(code(r) == c1 && reconstruct(r, &p).unwrap() == r, || {
                format!("b={bits} x={x1} r={r}")
            });

            let (lo, hi) = if x1 <= x2 { (c1, c2) } else { (c2, c1) };
            mono.case(lo <= hi, || format!("b={bits} x1={x1} x2={x2}"));

            // a grid four times finer than the codebook hits every level
            let n = 4 * p.levels() + 1;
            let grid: Vec<f64> = (0..=n).map(|i| p.lower() + span * i as f64 / n as f64).collect();
            let mut vals = fake_quantize(&grid, &p, TensorRole::Weight).unwrap();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            card.case(vals.len() as u64 == p.levels() + 1, || {
                format!("b={bits} distinct={}", vals.len())
            });
        }
    }

    let mut ste = Check::new(q, "STE gradients vs finite differences");
    let h = 1e-5;
    for i in 0..1000 {
        let bits = [1u32, 2, 4, 8][i % 4];
        let role = if i % 2 == 0 { TensorRole::Weight } else { TensorRole::Activation };
        let p = random_params(&mut rng, bits);
        let span = p.upper() - p.lower();
        // stay clear of the kinks at l and u
        let x = p.lower() + span * rng.random_range(0.01..0.99);
        let at = |x: f64, l: f64, u: f64| {
            ste_surrogate(x, &QuantParams::new(bits, l, u, 1.0).unwrap(), role)
        };
        let (l, u) = (p.lower(), p.upper());
        let fd = [
            (at(x + h, l, u) - at(x - h, l, u)) / (2.0 * h),
            (at(x, l + h, u) - at(x, l - h, u)) / (2.0 * h),
            (at(x, l, u + h) - at(x, l, u - h)) / (2.0 * h),
        ];
        let g = ste_gradients(x, &p, role);
        let an = [g.d_x, g.d_lower, g.d_upper];
        let ok = fd
            .iter()
            .zip(&an)
            .all(|(f, a)| (f - a).abs() <= 1e-4 * a.abs().max(1e-3));
        ste.case(ok, || format!("x={x} l={l} u={u} fd={fd:?} analytic={an:?}"));
    }
    vec![range.done(), idem.done(), mono.done(), card.done(), ste.done()]
}

fn code_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bits: u32) -> CodeTensor {
    let codes = (0..rows * cols).map(|_| rng.random_range(0..=max_code(bits))).collect();
    CodeTensor::new(vec![rows, cols], codes, bits).expect("codes in range")
}

fn direct_product(x: &CodeTensor, w: &CodeTensor) -> Matrix<u64> {
    let (n, s) = (x.shape()[0], x.shape()[1]);
    let t = w.shape()[0];
    let xm = Matrix::from_vec(n, s, x.codes().to_vec());
    let wm = Matrix::from_vec(t, s, w.codes().to_vec());
    matmul_ref(&xm, &wm).expect("shapes agree")
}

fn decomp_suite(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Suite::Decomp;

    let mut scalar = Check::new(d, "exhaustive scalar products, M <= 8");
    for m in 1..=8u32 {
        for b in [2u32, 3, 4] {
            // one column per value: the product holds every pair at once
            let all: Vec<u64> = (0..=max_code(m)).collect();
            let x = CodeTensor::new(vec![all.len(), 1], all.clone(), m).unwrap();
            let got = decomposed_matmul(&x, &x, b).unwrap().product;
            for a in 0..all.len() {
                for c in 0..all.len() {
                    let want = (a * c) as u64;
                    scalar.case(got.get(a, c) == want, || format!("M={m} B={b} {a}*{c}"));
                }
            }
        }
    }

    let mut matrices = Check::new(d, "random 8x8 matrices, M=8 B=2");
    for _ in 0..1000 {
        let x = code_matrix(&mut rng, 8, 8, 8);
        let w = code_matrix(&mut rng, 8, 8, 8);
        let got = decomposed_matmul(&x, &w, 2).unwrap();
        matrices.case(got.product == direct_product(&x, &w) && got.limb_mults == 16 * 8 * 8 * 8, || {
            format!("{:?} x {:?}", x.codes(), w.codes())
        });
    }

    let mut single = Check::new(d, "parallel fit, G=1 residual <= 1e-9");
    let mut recover = Check::new(d, "parallel fit, realizable target <= 1e-8");
    let mut better = Check::new(d, "parallel fit, residual(G) <= residual(1)");
    for _ in 0..100 {
        let (n, s, t) = (24, 3, 2);
        let limbs = |x: &CodeTensor, b: u32| -> Vec<Matrix<f64>> {
            let set = LimbSet::split(x, b).unwrap();
            (0..set.group_count()).map(|i| set.limb_matrix(i).unwrap()).collect()
        };
        let x2 = code_matrix(&mut rng, n, s, 2);
        let w2 = code_matrix(&mut rng, t, s, 2);
        let target = direct_product(&x2, &w2).map(|v| v as f64);
        let fit = fit_parallel_weights(&limbs(&x2, 2), &target, 2).unwrap();
        single.case(fit.relative_residual <= 1e-9, || format!("relative residual {}", fit.relative_residual));

        let x4 = code_matrix(&mut rng, n, s, 4);
        let xl = limbs(&x4, 2);
        let truth: Vec<Matrix<f64>> =
            (0..xl.len()).map(|_| Matrix::from_fn(t, s, |_, _| rng.random_range(-1.0..1.0))).collect();
        let realizable = Matrix::from_fn(n, t, |r, c| {
            (0..xl.len())
                .map(|i| {
                    let dot: f64 = (0..s).map(|k| xl[i].get(r, k) * truth[i].get(c, k)).sum();
                    dot * f64::powi(4.0, i as i32)
                })
                .sum()
        });
        let fit = fit_parallel_weights(&xl, &realizable, 2).unwrap();
        recover.case(fit.relative_residual <= 1e-8, || format!("relative residual {}", fit.relative_residual));

        let noise = Matrix::from_fn(n, t, |_, _| rng.random_range(-50.0..50.0));
        let g = fit_parallel_weights(&xl, &noise, 2).unwrap().residual;
        let one = best_single_group_residual(&xl, &noise, 2).unwrap();
        better.case(g <= one * (1.0 + 1e-9), || format!("G fit {g} vs single {one}"));
    }
    vec![scalar.done(), matrices.done(), single.done(), recover.done(), better.done()]
}

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureTensor<i64> {
    FeatureTensor::from_fn(1, c, h, w, |_, _, _, _| rng.random_range(-9..10))
}

fn random_weights(rng: &mut ChaCha8Rng, spec: ConvSpec) -> ConvWeights<i64> {
    let data = (0..spec.weight_len()).map(|_| rng.random_range(-5..6)).collect();
    ConvWeights::new(spec, data).expect("weights match spec")
}

fn shuffle_suite(seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Suite::Shuffle;

    let mut prop = Check::new(s, "G-1 cyclic shuffles mix all groups, G-2 do not (G in 2..=8)");
    for g in 2..=8 {
        let pipeline = |modules: usize| {
            let mut p = vec![MixStage::GroupedConv];
            for _ in 0..modules {
                p.extend([MixStage::CyclicShuffle, MixStage::GroupedConv]);
            }
            group_mixing_matrix(&p, g)
        };
        prop.case(pipeline(g - 1).is_full(), || format!("G={g}: G-1 modules not full"));
        prop.case(!pipeline(g - 2).is_full(), || format!("G={g}: G-2 modules already full"));
    }

    let mut cycle = Check::new(s, "cyclic permute applied G times is the identity");
    let mut unshuffle = Check::new(s, "channel unshuffle inverts channel shuffle");
    let mut zero = Check::new(s, "cyclic shuffle with zero conv is the identity");
    let mut split = Check::new(s, "grouped conv equals G independent convs");
    let mut dense = Check::new(s, "grouped conv equals block-diagonal dense conv");
    for _ in 0..50 {
        let g = rng.random_range(1..=4usize);
        let cpg = rng.random_range(1..=3usize);
        let tpg = rng.random_range(1..=3usize);
        let (h, w) = (rng.random_range(1..=5usize), rng.random_range(1..=5usize));
        let x = random_tensor(&mut rng, g * cpg, h, w);

        let mut y = x.clone();
        for _ in 0..g {
            y = cyclic_permute(&y, g).unwrap();
        }
        cycle.case(y == x, || format!("G={g} C={}", g * cpg));
        unshuffle.case(channel_unshuffle(&channel_shuffle(&x, g).unwrap(), g).unwrap() == x, || {
            format!("G={g} C={}", g * cpg)
        });
        let zconv = ConvWeights::zeros(ConvSpec::new(g * cpg, g * cpg, 1, 1, 0).with_groups(g)).unwrap();
        zero.case(cyclic_shuffle(&x, &zconv, g).unwrap() == x, || format!("G={g}"));

        let k = [1usize, 3][rng.random_range(0..2usize)];
        let stride = rng.random_range(1..=2usize);
        let spec = ConvSpec::new(g * cpg, g * tpg, k, stride, k / 2).with_groups(g);
        let wts = random_weights(&mut rng, spec);
        let grouped = conv2d_grouped(&x, &wts).unwrap();
        let parts: Vec<FeatureTensor<i64>> = (0..g)
            .map(|gi| {
                let xi = x.slice_channels(gi * cpg, cpg).unwrap();
                conv2d_grouped(&xi, &wts.group_slice(gi).unwrap()).unwrap()
            })
            .collect();
        split.case(FeatureTensor::concat_channels(&parts).unwrap() == grouped, || format!("{spec:?}"));
        dense.case(conv2d_grouped(&x, &wts.to_dense().unwrap()).unwrap() == grouped, || format!("{spec:?}"));
    }
    vec![prop.done(), cycle.done(), unshuffle.done(), zero.done(), split.done(), dense.done()]
}

/// Published BitOps totals in G: (arch, scheme, value).
pub const PUBLISHED_BITOPS: [(&str, &str, f64); 16] = [
    ("resnet18", "uniform:4,4", 29.10),
    ("resnet18", "uniform:6,6", 65.48),
    ("resnet18", "uniform:8,8", 116.4),
    ("resnet18", "palquant:2,2", 14.87),
    ("resnet18", "palquant:2,3", 22.30),
    ("resnet18", "palquant:2,4", 29.73),
    ("resnet34", "uniform:4,4", 58.74),
    ("resnet34", "uniform:6,6", 132.16),
    ("resnet34", "uniform:8,8", 234.94),
    ("resnet34", "palquant:2,2", 29.68),
    ("resnet34", "palquant:2,3", 44.53),
    ("resnet34", "palquant:2,4", 59.37),
    ("resnet18", "uniform:4,2", 14.55),
    ("resnet18", "uniform:6,2", 21.83),
    ("resnet18", "uniform:6,3", 32.74),
    ("resnet18", "uniform:8,4", 58.20),
];

/// Build a network from `uniform:A,W` or `palquant:B,G`.
pub fn apply_scheme(base: &NetworkSpec, scheme: &str) -> Result<NetworkSpec, String> {
    let (kind, args) = scheme.split_once(':').ok_or_else(|| format!("bad scheme {scheme:?}"))?;
    let nums: Vec<u32> = args
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|e| format!("bad scheme {scheme:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [a, b] = nums[..] else {
        return Err(format!("scheme {scheme:?} needs two numbers"));
    };
    match kind {
        "uniform" => annotate_uniform(base, a, b).map_err(|e| e.to_string()),
        "palquant" => palquant_transform(base, a, b as usize).map_err(|e| e.to_string()),
        _ => Err(format!("unknown scheme kind {kind:?} (expected uniform or palquant)")),
    }
}

fn netmodel_suite() -> Vec<PropertyResult> {
    let n = Suite::Netmodel;
    let mut table = Check::new(n, "BitOps totals within 1% of published");
    for (arch, scheme, want) in PUBLISHED_BITOPS {
        let net = apply_scheme(&build_network(arch.parse().unwrap()), scheme).unwrap();
        let got = bitops(&net).unwrap().total_giga;
        table.case((got / want - 1.0).abs() <= 0.01, || format!("{arch} {scheme}: {got:.3} vs {want}"));
    }
    let mut valid = Check::new(n, "transformed networks validate");
    let mut json = Check::new(n, "JSON round trip");
    for arch in [Arch::ResNet18, Arch::ResNet34, Arch::Plain18] {
        let base = build_network(arch);
        for scheme in ["uniform:4,4", "palquant:2,2", "palquant:2,3", "palquant:3,2", "palquant:2,4"] {
            let net = apply_scheme(&base, scheme).unwrap();
            let v = validate_spec(&net);
            valid.case(v.is_empty(), || format!("{} {scheme}: {v:?}", base.name));
            let back = NetworkSpec::from_json(&net.to_json()).unwrap();
            json.case(back == net, || format!("{} {scheme}", base.name));
        }
    }
    vec![table.done(), valid.done(), json.done()]
}

fn hwsim_suite() -> Vec<PropertyResult> {
    let h = Suite::Hwsim;
    let mut det = Check::new(h, "determinism");
    let mut bound = Check::new(h, "compute-bound speedup within 2% of BitOps ratio");
    let mut range = Check::new(h, "1 <= speedup <= BitOps ratio");
    let mut mono = Check::new(h, "speedup and efficiency non-decreasing in G");
    let mut traffic = Check::new(h, "grouped DRAM traffic <= nibble traffic per layer");
    let mut conserve = Check::new(h, "DRAM traffic covers the footprint");
    for arch in [Arch::ResNet18, Arch::ResNet34] {
        let base = build_network(arch);
        let ratios: Vec<f64> = [2usize, 3, 4]
            .iter()
            .map(|&g| {
                let m = 2 * g as u32;
                let b = bitops(&annotate_uniform(&base, m, m).unwrap()).unwrap().total as f64;
                b / bitops(&palquant_transform(&base, 2, g).unwrap()).unwrap().total as f64
            })
            .collect();
        for preset in PRESET_NAMES {
            let accel = AcceleratorConfig::preset(preset).unwrap();
            let tag = format!("{} {preset}", base.name);
            let points = hwsim::sweep(&base, &accel, 2, &[2, 3, 4]).unwrap();
            let again = hwsim::sweep(&base, &accel, 2, &[2]).unwrap();
            det.case(again[0].proposed.to_json() == points[0].proposed.to_json(), || tag.clone());

            let ideal = hwsim::sweep(&base, &accel.unbounded(), 2, &[2, 3, 4]).unwrap();
            let mut prev = (0.0, 0.0);
            for ((p, q), ratio) in points.iter().zip(&ideal).zip(&ratios) {
                let r = p.row.result;
                let s_ideal = q.row.result.speedup;
                bound.case((s_ideal / ratio - 1.0).abs() <= 0.02, || {
                    format!("{tag} G={}: {s_ideal:.3} vs {ratio:.3}", p.groups)
                });
                range.case(r.speedup >= 1.0 && r.speedup <= *ratio, || {
                    format!("{tag} G={}: {:.3} vs {ratio:.3}", p.groups, r.speedup)
                });
                mono.case(r.speedup >= prev.0 && r.energy_efficiency >= prev.1, || {
                    format!("{tag} G={}", p.groups)
                });
                prev = (r.speedup, r.energy_efficiency);
                for l in &p.proposed.per_layer {
                    if let Some(b) = p.baseline.layer(&l.name) {
                        traffic.case(l.dram_bits <= b.dram_bits, || format!("{tag} G={} {}", p.groups, l.name));
                    }
                }
                for rep in [&p.baseline, &p.proposed] {
                    conserve.case(rep.totals.dram_bits >= rep.footprint_bits, || tag.clone());
                }
            }
        }
    }
    vec![det.done(), bound.done(), range.done(), mono.done(), traffic.done(), conserve.done()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("all".parse::<Suite>().is_err());
    }

    #[test]
    fn shuffle_suite_passes_and_is_deterministic() {
        let a = run_suite(Suite::Shuffle, 3);
        assert!(a.iter().all(PropertyResult::passed), "{}", render(&a));
        assert_eq!(a, run_suite(Suite::Shuffle, 3));
    }

    #[test]
    fn render_flags_failures() {
        let mut c = Check::new(Suite::Decomp, "demo");
        c.case(true, String::new);
        c.case(false, || "x=1".into());
        let text = render(&[c.done()]);
        assert!(text.starts_with("FAIL decomp/demo: 2 cases, 1 failures (first: x=1)"), "{text}");
        assert!(text.ends_with("1 properties, 1 failed\n"));
    }

    #[test]
    fn scheme_strings() {
        let base = build_network(Arch::ResNet18);
        assert!(apply_scheme(&base, "uniform:4,4").is_ok());
        assert!(apply_scheme(&base, "palquant:2,1").is_err());
        assert!(apply_scheme(&base, "ternary:2,2").is_err());
        assert!(apply_scheme(&base, "uniform:4").is_err());
    }
}
