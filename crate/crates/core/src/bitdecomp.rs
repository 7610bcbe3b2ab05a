//! Bit-level decomposition of M-bit integer products into B-bit limbs.
//!
//! An M-bit code `x` is split into `G = ceil(M / B)` limbs, least
//! significant first, with `x = sum_i limb_i * 2^(i*B)`. A matrix product
//! of M-bit operands is then the shifted sum of all `G^2` limb products,
//! which is exact but costs as many bit operations as the original.
//!
//! [`fit_parallel_weights`] solves the cheaper G-path approximation that
//! keeps only one weight matrix per input limb, and
//! [`solution_similarity`] measures how alike the fitted paths are.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::quantizer::{max_code, CodeTensor, QuantError, MAX_BITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("code overflow: {code} does not fit in {bits} bits")]
    CodeOverflow { code: u64, bits: u32 },
    #[error("invalid bit split: total {total_bits} bits, limb {limb_bits} bits")]
    InvalidSplit { total_bits: u32, limb_bits: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

pub type Result<T> = std::result::Result<T, DecompError>;

/// Number of limbs needed to hold `total_bits` in chunks of `limb_bits`.
pub fn group_count(total_bits: u32, limb_bits: u32) -> u32 {
    total_bits.div_ceil(limb_bits)
}

fn check_split(total_bits: u32, limb_bits: u32) -> Result<()> {
    if total_bits == 0 || total_bits > MAX_BITS || limb_bits == 0 || limb_bits > MAX_BITS {
        return Err(DecompError::InvalidSplit {
            total_bits,
            limb_bits,
        });
    }
    Ok(())
}

/// Split one M-bit code into its B-bit limbs, least significant first.
/// `B > M` yields the single-limb identity split.
pub fn split_limbs(code: u64, total_bits: u32, limb_bits: u32) -> Result<Vec<u64>> {
    check_split(total_bits, limb_bits)?;
    if code > max_code(total_bits) {
        return Err(DecompError::CodeOverflow {
            code,
            bits: total_bits,
        });
    }
    let g = group_count(total_bits, limb_bits);
    let mask = max_code(limb_bits);
    Ok((0..g).map(|i| (code >> (i * limb_bits)) & mask).collect())
}

pub fn recompose(limbs: &[u64], limb_bits: u32) -> u64 {
    limbs
        .iter()
        .enumerate()
        .map(|(i, &l)| l << (i as u32 * limb_bits))
        .sum()
}

/// An M-bit code tensor held as G tensors of B-bit limbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimbSet {
    limbs: Vec<CodeTensor>,
    total_bits: u32,
    limb_bits: u32,
}

impl LimbSet {
    pub fn split(tensor: &CodeTensor, limb_bits: u32) -> Result<Self> {
        let total_bits = tensor.bits();
        check_split(total_bits, limb_bits)?;
        let g = group_count(total_bits, limb_bits) as usize;
        let mut per_limb: Vec<Vec<u64>> = vec![Vec::with_capacity(tensor.len()); g];
        for &code in tensor.codes() {
            for (i, limb) in split_limbs(code, total_bits, limb_bits)?.into_iter().enumerate() {
                per_limb[i].push(limb);
            }
        }
        // a limb can never be wider than the whole code
        let stored_bits = limb_bits.min(total_bits);
        let limbs = per_limb
            .into_iter()
            .map(|codes| CodeTensor::new(tensor.shape().to_vec(), codes, stored_bits))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            limbs,
            total_bits,
            limb_bits,
        })
    }

    pub fn recompose(&self) -> Result<CodeTensor> {
        let shape = self.limbs[0].shape().to_vec();
        let n = self.limbs[0].len();
        let codes = (0..n)
            .map(|e| {
                let limbs: Vec<u64> = self.limbs.iter().map(|t| t.codes()[e]).collect();
                recompose(&limbs, self.limb_bits)
            })
            .collect();
        Ok(CodeTensor::new(shape, codes, self.total_bits)?)
    }

    pub fn limbs(&self) -> &[CodeTensor] {
        &self.limbs
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn limb_bits(&self) -> u32 {
        self.limb_bits
    }

    pub fn group_count(&self) -> usize {
        self.limbs.len()
    }

    /// Limb `i` as a real matrix of its (unscaled) limb values.
    pub fn limb_matrix(&self, i: usize) -> Result<Matrix<f64>> {
        let t = &self.limbs[i];
        let (rows, cols) = as_2d(t)?;
        Ok(Matrix::from_vec(
            rows,
            cols,
            t.codes().iter().map(|&c| c as f64).collect(),
        ))
    }
}

fn as_2d(t: &CodeTensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(DecompError::Shape(format!("expected a 2-d tensor, got {s:?}"))),
    }
}

/// Result of a limb-decomposed product.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedProduct {
    pub product: Matrix<u64>,
    /// Number of B-bit by B-bit multiplications performed.
    pub limb_mults: u64,
    /// Largest shifted partial product added to any accumulator.
    pub max_partial: u64,
}

/// `X W^T` for M-bit code matrices `X` (N x S) and `W` (T x S), computed
/// only from B-bit limb products shifted into a 64-bit accumulator.
pub fn decomposed_matmul(x: &CodeTensor, w: &CodeTensor, limb_bits: u32) -> Result<DecomposedProduct> {
    let (n, s) = as_2d(x)?;
    let (t, s_w) = as_2d(w)?;
    if s != s_w {
        return Err(DecompError::Shape(format!(
            "inner dimensions differ: {s} vs {s_w}"
        )));
    }
    if x.bits() != w.bits() {
        return Err(DecompError::Shape(format!(
            "operand widths differ: {} vs {} bits",
            x.bits(),
            w.bits()
        )));
    }
    let xl = LimbSet::split(x, limb_bits)?;
    let wl = LimbSet::split(w, limb_bits)?;
    let g = xl.group_count();

    let mut out = Matrix::<u64>::zeros(n, t);
    let mut limb_mults = 0u64;
    let mut max_partial = 0u64;
    // fixed (i, j, row, col, k) order keeps the reduction reproducible
    for i in 0..g {
        let xi = xl.limbs()[i].codes();
        for j in 0..g {
            let wj = wl.limbs()[j].codes();
            let shift = (i + j) as u32 * limb_bits;
            for r in 0..n {
                for c in 0..t {
                    let mut partial = 0u64;
                    for k in 0..s {
                        partial += xi[r * s + k] * wj[c * s + k];
                    }
                    limb_mults += s as u64;
                    let shifted = partial.checked_shl(shift).filter(|v| v >> shift == partial).ok_or_else(
                        || DecompError::Invariant(format!("partial product overflow at shift {shift}")),
                    )?;
                    max_partial = max_partial.max(shifted);
                    let acc = out.get(r, c).checked_add(shifted).ok_or_else(|| {
                        DecompError::Invariant("accumulator overflow".into())
                    })?;
                    out.set(r, c, acc);
                }
            }
        }
    }
    Ok(DecomposedProduct {
        product: out,
        limb_mults,
        max_partial,
    })
}

/// Fitted per-limb weights of the G-path approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelWeights {
    /// One T x S matrix per input limb.
    pub per_group: Vec<Matrix<f64>>,
    /// Frobenius norm of `target - approximation`.
    pub residual: f64,
    /// `residual / ||target||_F` (0 when the target is zero).
    pub relative_residual: f64,
    /// Ridge term, when the normal equations needed regularizing.
    pub ridge: Option<f64>,
    pub limb_bits: u32,
}

/// Least-squares fit of `target ~ sum_i X_i Wbar_i^T 2^(i*B)`.
///
/// `x_limbs[i]` is the real-valued i-th limb of the input (N x S); the
/// stacked normal equations are solved with Cholesky, falling back to a
/// small ridge term when the system is singular.
pub fn fit_parallel_weights(
    x_limbs: &[Matrix<f64>],
    target: &Matrix<f64>,
    limb_bits: u32,
) -> Result<ParallelWeights> {
    let shifts: Vec<f64> = (0..x_limbs.len())
        .map(|i| f64::powi(2.0, (i as u32 * limb_bits) as i32))
        .collect();
    fit_with_shifts(x_limbs, &shifts, target, limb_bits)
}

/// Best fit that uses a single limb path, over all choices of limb.
pub fn best_single_group_residual(
    x_limbs: &[Matrix<f64>],
    target: &Matrix<f64>,
    limb_bits: u32,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for (i, xi) in x_limbs.iter().enumerate() {
        let shift = f64::powi(2.0, (i as u32 * limb_bits) as i32);
        let fit = fit_with_shifts(std::slice::from_ref(xi), &[shift], target, limb_bits)?;
        best = best.min(fit.residual);
    }
    Ok(best)
}

fn fit_with_shifts(
    x_limbs: &[Matrix<f64>],
    shifts: &[f64],
    target: &Matrix<f64>,
    limb_bits: u32,
) -> Result<ParallelWeights> {
    let g = x_limbs.len();
    if g == 0 {
        return Err(DecompError::Shape("no input limbs".into()));
    }
    let (n, s) = (x_limbs[0].rows(), x_limbs[0].cols());
    if x_limbs.iter().any(|m| m.rows() != n || m.cols() != s) {
        return Err(DecompError::Shape("input limbs differ in shape".into()));
    }
    if target.rows() != n {
        return Err(DecompError::Shape(format!(
            "target has {} rows, inputs have {n}",
            target.rows()
        )));
    }
    let t = target.cols();
    let dim = g * s;

    // A = [X_0 * s_0 | X_1 * s_1 | ...], N x (G*S)
    let design = Matrix::from_fn(n, dim, |r, c| x_limbs[c / s].get(r, c % s) * shifts[c / s]);
    let mut gram = Matrix::<f64>::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let v: f64 = (0..n).map(|r| design.get(r, a) * design.get(r, b)).sum();
            gram.set(a, b, v);
            gram.set(b, a, v);
        }
    }
    let rhs = Matrix::from_fn(dim, t, |a, c| {
        (0..n).map(|r| design.get(r, a) * target.get(r, c)).sum()
    });

    let (theta, ridge) = match cholesky_solve(&gram, &rhs, 0.0) {
        Some(sol) => (sol, None),
        None => {
            let trace: f64 = (0..dim).map(|i| gram.get(i, i)).sum();
            let lambda = 1e-8 * (trace / dim as f64).max(f64::MIN_POSITIVE);
            let sol = cholesky_solve(&gram, &rhs, lambda).ok_or_else(|| {
                DecompError::Invariant("ridge-regularized system still singular".into())
            })?;
            (sol, Some(lambda))
        }
    };

    // theta is (G*S) x T; group i holds rows [i*S, (i+1)*S) of Wbar_i^T
    let per_group: Vec<Matrix<f64>> = (0..g)
        .map(|i| Matrix::from_fn(t, s, |tc, sc| theta.get(i * s + sc, tc)))
        .collect();

    let mut err2 = 0.0;
    for r in 0..n {
        for c in 0..t {
            let approx: f64 = (0..dim).map(|a| design.get(r, a) * theta.get(a, c)).sum();
            let d = target.get(r, c) - approx;
            err2 += d * d;
        }
    }
    let residual = err2.sqrt();
    let norm = target.frobenius();
    Ok(ParallelWeights {
        per_group,
        residual,
        relative_residual: if norm > 0.0 { residual / norm } else { 0.0 },
        ridge,
        limb_bits,
    })
}

/// Solve `(A + lambda I) X = B` for symmetric A. Returns `None` when the
/// factorization meets a non-positive or vanishing pivot.
fn cholesky_solve(a: &Matrix<f64>, b: &Matrix<f64>, lambda: f64) -> Option<Matrix<f64>> {
    let n = a.rows();
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Matrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j) + lambda;
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= tol {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / d);
        }
    }
    let m = b.cols();
    let mut x = Matrix::<f64>::zeros(n, m);
    for c in 0..m {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let v = b.get(i, c) - y[..i].iter().enumerate().map(|(k, yk)| l.get(i, k) * yk).sum::<f64>();
            y[i] = v / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, v / l.get(i, i));
        }
    }
    Some(x)
}

/// Pairwise cosine similarity of the fitted paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub matrix: Matrix<f64>,
    /// Groups whose fitted weights vanished; their rows and columns are 0.
    pub zero_norm_groups: Vec<usize>,
}

pub fn solution_similarity(pw: &ParallelWeights) -> Similarity {
    let g = pw.per_group.len();
    let flat: Vec<Vec<f64>> = pw
        .per_group
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let scale = f64::powi(2.0, (i as u32 * pw.limb_bits) as i32);
            m.data().iter().map(|v| v * scale).collect()
        })
        .collect();
    let norms: Vec<f64> = flat
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let zero_norm_groups: Vec<usize> = (0..g).filter(|&i| norms[i] == 0.0).collect();
    let matrix = Matrix::from_fn(g, g, |a, b| {
        if norms[a] == 0.0 || norms[b] == 0.0 {
            return 0.0;
        }
        let dot: f64 = flat[a].iter().zip(&flat[b]).map(|(x, y)| x * y).sum();
        dot / (norms[a] * norms[b])
    });
    Similarity {
        matrix,
        zero_norm_groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limb_examples() {
        assert_eq!(split_limbs(3, 4, 2).unwrap(), vec![3, 0]);
        assert_eq!(split_limbs(4, 4, 2).unwrap(), vec![0, 1]);
        assert_eq!(split_limbs(0, 8, 2).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(split_limbs(14, 4, 2).unwrap(), vec![2, 3]);
        assert_eq!(recompose(&[3, 0], 2), 3);
        assert_eq!(recompose(&[0, 1], 2), 4);
    }

    #[test]
    fn limb_errors_and_wide_limbs() {
        assert_eq!(
            split_limbs(16, 4, 2),
            Err(DecompError::CodeOverflow { code: 16, bits: 4 })
        );
        assert!(split_limbs(1, 4, 0).is_err());
        // B > M collapses to a single limb
        assert_eq!(split_limbs(5, 3, 4).unwrap(), vec![5]);
        assert_eq!(group_count(3, 4), 1);
        assert_eq!(group_count(8, 3), 3);
    }

    #[test]
    fn exhaustive_round_trip_small_widths() {
        for m in 1..=12u32 {
            for b in 1..=m {
                for x in 0..(1u64 << m) {
                    let limbs = split_limbs(x, m, b).unwrap();
                    assert_eq!(limbs.len() as u32, group_count(m, b));
                    assert!(limbs.iter().all(|&l| l <= max_code(b)));
                    assert_eq!(recompose(&limbs, b), x, "m={m} b={b} x={x}");
                }
            }
        }
    }

    #[test]
    fn scalar_decomposition_trace() {
        let x = CodeTensor::new(vec![1, 1], vec![14], 4).unwrap();
        let w = CodeTensor::new(vec![1, 1], vec![9], 4).unwrap();
        let out = decomposed_matmul(&x, &w, 2).unwrap();
        // 2*1 + 2*2*4 + 3*1*4 + 3*2*16
        assert_eq!(out.product.get(0, 0), 126);
        assert_eq!(out.limb_mults, 4);
    }

    #[test]
    fn zero_operand_gives_zero() {
        let x = CodeTensor::new(vec![2, 3], vec![0; 6], 8).unwrap();
        let w = CodeTensor::new(vec![4, 3], (0..12).map(|v| v * 20).collect(), 8).unwrap();
        let out = decomposed_matmul(&x, &w, 2).unwrap();
        assert!(out.product.data().iter().all(|&v| v == 0));
        assert_eq!(out.limb_mults, 16 * 2 * 3 * 4);
    }

    #[test]
    fn mismatched_operands_rejected() {
        let x = CodeTensor::new(vec![2, 3], vec![0; 6], 8).unwrap();
        let w = CodeTensor::new(vec![2, 2], vec![0; 4], 8).unwrap();
        assert!(matches!(decomposed_matmul(&x, &w, 2), Err(DecompError::Shape(_))));
        let w = CodeTensor::new(vec![2, 3], vec![0; 6], 4).unwrap();
        assert!(matches!(decomposed_matmul(&x, &w, 2), Err(DecompError::Shape(_))));
    }

    #[test]
    fn identical_and_orthogonal_similarity() {
        let a = Matrix::from_vec(1, 2, vec![1.0, 0.0]);
        let b = Matrix::from_vec(1, 2, vec![0.0, 1.0]);
        let pw = ParallelWeights {
            per_group: vec![a.clone(), a.clone()],
            residual: 0.0,
            relative_residual: 0.0,
            ridge: None,
            limb_bits: 2,
        };
        let sim = solution_similarity(&pw);
        assert!(sim.matrix.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let pw = ParallelWeights {
            per_group: vec![a, b, Matrix::zeros(1, 2)],
            ..pw
        };
        let sim = solution_similarity(&pw);
        assert_eq!(sim.matrix.get(0, 1), 0.0);
        assert_eq!(sim.matrix.get(0, 0), 1.0);
        assert_eq!(sim.zero_norm_groups, vec![2]);
        assert_eq!(sim.matrix.get(2, 2), 0.0);
    }

    #[test]
    fn singular_system_uses_ridge() {
        // two identical input limbs make the stacked system rank deficient
        let x = Matrix::from_fn(6, 2, |r, c| (r * 2 + c) as f64 % 4.0);
        let target = Matrix::from_fn(6, 1, |r, _| r as f64);
        let fit = fit_with_shifts(&[x.clone(), x], &[1.0, 1.0], &target, 2).unwrap();
        assert!(fit.ridge.is_some());
        assert!(fit.residual.is_finite());
    }
}
