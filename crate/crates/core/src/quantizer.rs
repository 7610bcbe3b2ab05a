//! Uniform quantizer with learnable clipping bounds.
//!
//! A real value is first clipped into `[l, u]` and normalized to `[0, 1]`,
//! rounded onto a `2^b - 1` step grid, and finally mapped back into the
//! real domain. Weights come back symmetric in `[-1, 1]`, activations
//! non-negative in `[0, 1]`. The per-layer output scale `alpha` is carried
//! here but applied by the network executor on layer outputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("non-finite input")]
    NonFinite,
    #[error("unnormalized input: {0} not in [0, 1]")]
    Unnormalized(f64),
    #[error("code overflow: {code} does not fit in {bits} bits")]
    CodeOverflow { code: u64, bits: u32 },
    #[error("invalid quantizer parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: shape holds {expected} elements, got {actual}")]
    Shape { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, QuantError>;

pub const MAX_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorRole {
    Weight,
    Activation,
}

/// Learnable quantizer state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    bits: u32,
    lower: f64,
    upper: f64,
    out_scale: f64,
}

impl QuantParams {
    pub fn new(bits: u32, lower: f64, upper: f64, out_scale: f64) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(QuantError::InvalidParams(format!(
                "bits must be in [1, {MAX_BITS}], got {bits}"
            )));
        }
        if !lower.is_finite() || !upper.is_finite() || upper <= lower {
            return Err(QuantError::InvalidParams(format!(
                "need finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        if !out_scale.is_finite() || out_scale == 0.0 {
            return Err(QuantError::InvalidParams(format!(
                "out_scale must be finite and nonzero, got {out_scale}"
            )));
        }
        Ok(Self {
            bits,
            lower,
            upper,
            out_scale,
        })
    }

    /// Bounds taken from the data range, `alpha = 1`.
    pub fn fit(bits: u32, data: &[f64]) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in data {
            if !v.is_finite() {
                return Err(QuantError::NonFinite);
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if data.is_empty() || hi <= lo {
            return Err(QuantError::InvalidParams(
                "cannot fit bounds to an empty or constant tensor".into(),
            ));
        }
        Self::new(bits, lo, hi, 1.0)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn out_scale(&self) -> f64 {
        self.out_scale
    }

    pub fn levels(&self) -> u64 {
        max_code(self.bits)
    }
}

/// Largest code representable with `bits` bits.
pub fn max_code(bits: u32) -> u64 {
    (1u64 << bits) - 1
}

pub fn normalize(x: f64, params: &QuantParams) -> Result<f64> {
    if !x.is_finite() {
        return Err(QuantError::NonFinite);
    }
    let n = (x - params.lower) / (params.upper - params.lower);
    Ok(n.clamp(0.0, 1.0))
}

/// Rounds half away from zero, which is what `f64::round` does.
pub fn quantize_code(x_n: f64, bits: u32) -> Result<u64> {
    if !(0.0..=1.0).contains(&x_n) {
        return Err(QuantError::Unnormalized(x_n));
    }
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(QuantError::InvalidParams(format!("bits {bits} out of range")));
    }
    Ok((max_code(bits) as f64 * x_n).round() as u64)
}

pub fn dequantize(code: u64, bits: u32, role: TensorRole) -> Result<f64> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(QuantError::InvalidParams(format!("bits {bits} out of range")));
    }
    let levels = max_code(bits);
    if code > levels {
        return Err(QuantError::CodeOverflow { code, bits });
    }
    let frac = code as f64 / levels as f64;
    Ok(match role {
        TensorRole::Weight => 2.0 * (frac - 0.5),
        TensorRole::Activation => frac,
    })
}

/// Integer codes for every element of a tensor.
pub fn quantize_codes(xs: &[f64], params: &QuantParams) -> Result<Vec<u64>> {
    xs.iter()
        .map(|&x| quantize_code(normalize(x, params)?, params.bits))
        .collect()
}

/// Element-wise `dequantize(quantize_code(normalize(x)))`. Does not apply
/// the output scale.
pub fn fake_quantize(xs: &[f64], params: &QuantParams, role: TensorRole) -> Result<Vec<f64>> {
    xs.iter()
        .map(|&x| {
            let code = quantize_code(normalize(x, params)?, params.bits)?;
            dequantize(code, params.bits, role)
        })
        .collect()
}

/// Quantize and map the code back into the clipping interval `[l, u]`.
pub fn reconstruct(x: f64, params: &QuantParams) -> Result<f64> {
    let code = quantize_code(normalize(x, params)?, params.bits)?;
    let frac = code as f64 / params.levels() as f64;
    Ok(params.lower + frac * (params.upper - params.lower))
}

/// Gradients of the fake-quantized output with respect to the input and
/// both clipping bounds, rounding treated as identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteGrads {
    pub d_x: f64,
    pub d_lower: f64,
    pub d_upper: f64,
}

/// Surrogate forward pass: the fake quantizer with rounding removed.
pub fn ste_surrogate(x: f64, params: &QuantParams, role: TensorRole) -> f64 {
    let n = ((x - params.lower) / (params.upper - params.lower)).clamp(0.0, 1.0);
    match role {
        TensorRole::Weight => 2.0 * (n - 0.5),
        TensorRole::Activation => n,
    }
}

pub fn ste_gradients(x: f64, params: &QuantParams, role: TensorRole) -> SteGrads {
    let (l, u) = (params.lower, params.upper);
    let gain = match role {
        TensorRole::Weight => 2.0,
        TensorRole::Activation => 1.0,
    };
    if x < l || x > u {
        // the normalized output is pinned at 0 or 1 and no longer depends
        // on x, l or u
        return SteGrads {
            d_x: 0.0,
            d_lower: 0.0,
            d_upper: 0.0,
        };
    }
    let range = u - l;
    SteGrads {
        d_x: gain / range,
        d_lower: gain * (x - u) / (range * range),
        d_upper: -gain * (x - l) / (range * range),
    }
}

/// Integer code tensor with its bit-width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeTensor {
    shape: Vec<usize>,
    codes: Vec<u64>,
    bits: u32,
}

impl CodeTensor {
    pub fn new(shape: Vec<usize>, codes: Vec<u64>, bits: u32) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(QuantError::InvalidParams(format!("bits {bits} out of range")));
        }
        let expected: usize = shape.iter().product();
        if expected != codes.len() {
            return Err(QuantError::Shape {
                expected,
                actual: codes.len(),
            });
        }
        let max = max_code(bits);
        if let Some(&code) = codes.iter().find(|&&c| c > max) {
            return Err(QuantError::CodeOverflow { code, bits });
        }
        Ok(Self { shape, codes, bits })
    }

    pub fn from_reals(shape: Vec<usize>, xs: &[f64], params: &QuantParams) -> Result<Self> {
        Self::new(shape, quantize_codes(xs, params)?, params.bits)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn dequantize(&self, role: TensorRole) -> Vec<f64> {
        self.codes
            .iter()
            .map(|&c| dequantize(c, self.bits, role).expect("codes validated on construction"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(bits: u32, l: f64, u: f64) -> QuantParams {
        QuantParams::new(bits, l, u, 1.0).unwrap()
    }

    #[test]
    fn normalize_bounds_and_saturation() {
        let p = params(4, -0.5, 1.5);
        assert_eq!(normalize(-0.5, &p).unwrap(), 0.0);
        assert_eq!(normalize(1.5, &p).unwrap(), 1.0);
        assert_eq!(normalize(6.5, &p).unwrap(), 1.0);
        assert_eq!(normalize(-9.0, &p).unwrap(), 0.0);
        assert_eq!(normalize(f64::NAN, &p), Err(QuantError::NonFinite));
        assert_eq!(normalize(f64::INFINITY, &p), Err(QuantError::NonFinite));
    }

    #[test]
    fn quantize_code_examples() {
        assert_eq!(quantize_code(1.0, 2).unwrap(), 3);
        assert_eq!(quantize_code(0.0, 4).unwrap(), 0);
        // 3 * 0.34 = 1.02
        assert_eq!(quantize_code(0.34, 2).unwrap(), 1);
        // ties round away from zero: 3 * 0.5 = 1.5
        assert_eq!(quantize_code(0.5, 2).unwrap(), 2);
        assert!(matches!(
            quantize_code(1.01, 2),
            Err(QuantError::Unnormalized(_))
        ));
        assert!(matches!(
            quantize_code(-0.1, 2),
            Err(QuantError::Unnormalized(_))
        ));
    }

    #[test]
    fn dequantize_roles() {
        assert_eq!(dequantize(15, 4, TensorRole::Activation).unwrap(), 1.0);
        assert_eq!(dequantize(0, 4, TensorRole::Activation).unwrap(), 0.0);
        assert_eq!(dequantize(0, 2, TensorRole::Weight).unwrap(), -1.0);
        assert_eq!(dequantize(3, 2, TensorRole::Weight).unwrap(), 1.0);
        assert_eq!(
            dequantize(4, 2, TensorRole::Weight),
            Err(QuantError::CodeOverflow { code: 4, bits: 2 })
        );
    }

    #[test]
    fn params_validation() {
        assert!(QuantParams::new(0, 0.0, 1.0, 1.0).is_err());
        assert!(QuantParams::new(17, 0.0, 1.0, 1.0).is_err());
        assert!(QuantParams::new(4, 1.0, 1.0, 1.0).is_err());
        assert!(QuantParams::new(4, 0.0, 1.0, 0.0).is_err());
        assert!(QuantParams::new(4, 0.0, 1.0, f64::NAN).is_err());
        let p = QuantParams::fit(8, &[0.5, -2.0, 3.0]).unwrap();
        assert_eq!((p.lower(), p.upper(), p.out_scale()), (-2.0, 3.0, 1.0));
        assert!(QuantParams::fit(8, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn constant_tensor_at_lower_bound() {
        let p = params(3, -1.0, 2.0);
        let out = fake_quantize(&[-1.0; 5], &p, TensorRole::Weight).unwrap();
        assert!(out.iter().all(|&v| v == -1.0));
        let out = fake_quantize(&[-1.0; 5], &p, TensorRole::Activation).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_bit_codebook() {
        let p = params(1, -1.0, 1.0);
        let xs: Vec<f64> = (0..101).map(|i| -1.5 + 0.03 * i as f64).collect();
        let mut out = fake_quantize(&xs, &p, TensorRole::Weight).unwrap();
        out.sort_by(f64::total_cmp);
        out.dedup();
        assert_eq!(out, vec![-1.0, 1.0]);
    }

    #[test]
    fn saturated_gradients_are_zero() {
        let p = params(4, -1.0, 1.0);
        for role in [TensorRole::Weight, TensorRole::Activation] {
            assert_eq!(ste_gradients(-1.5, &p, role).d_x, 0.0);
            assert_eq!(ste_gradients(1.5, &p, role).d_x, 0.0);
        }
        // boundary points take the interior branch
        assert_eq!(ste_gradients(-1.0, &p, TensorRole::Activation).d_x, 0.5);
        assert_eq!(ste_gradients(1.0, &p, TensorRole::Weight).d_x, 1.0);
    }

    #[test]
    fn code_tensor_rejects_overflow() {
        assert!(CodeTensor::new(vec![2], vec![3, 4], 2).is_err());
        assert!(CodeTensor::new(vec![3], vec![3, 1], 2).is_err());
        let t = CodeTensor::new(vec![2], vec![3, 0], 2).unwrap();
        assert_eq!(t.dequantize(TensorRole::Activation), vec![1.0, 0.0]);
    }
}
