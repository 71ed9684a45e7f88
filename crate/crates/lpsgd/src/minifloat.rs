//! Bit-exact software emulation of reduced-precision floating-point formats
//! and elementwise quantization of real vectors.
//!
//! A [`FloatFormat`] describes a sign/exponent/mantissa encoding of at most
//! 16 bits with full subnormal support. [`quantize`] maps any finite `f64`
//! onto the format's value set using exact `f64` arithmetic: the scaled
//! mantissa is an exact integer ratio, so rounding decisions are never
//! contaminated by double-precision round-off. Out-of-range magnitudes
//! saturate to the largest finite value instead of overflowing to infinity,
//! which keeps downstream norm ratios finite. Negative zero normalizes to +0.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest positive exponent (and largest magnitude of `emin - mantissa_bits`)
/// a custom format may use. Keeps every quantization step — the quantum
/// `2^(e-m)`, the scaled mantissa, and the reconstructed product — inside the
/// normal range of `f64`, so all of them are exact.
const MAX_EXPONENT_MAGNITUDE: i32 = 900;

/// Descriptor of a minifloat encoding: bit-field widths, exponent bias, and
/// the special-value policy of the all-ones exponent range.
///
/// Three policies cover the shipped formats:
/// - infinities and NaNs (IEEE layout, e.g. binary16 and E5M2): the all-ones
///   exponent is reserved for specials;
/// - NaN only (E4M3 layout): the single code with all-ones exponent *and*
///   all-ones mantissa is NaN, every other code is a finite value;
/// - no specials (E2M1 layout): all codes are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatFormat {
    name: String,
    exponent_bits: u32,
    mantissa_bits: u32,
    bias: i32,
    has_infinity: bool,
    has_nan: bool,
    max_finite: f64,
}

impl FloatFormat {
    /// IEEE 754 binary16: 5 exponent bits, 10 mantissa bits, bias 15,
    /// infinities and NaNs. Largest finite value 65504.
    pub fn fp16() -> Self {
        Self::custom("fp16", 5, 10, 15, true, true).expect("fp16 layout is valid")
    }

    /// FP8 E4M3: 4 exponent bits, 3 mantissa bits, bias 7, no infinities,
    /// NaN only at all-ones exponent and mantissa. Largest finite value 448.
    pub fn fp8_e4m3() -> Self {
        Self::custom("fp8e4m3", 4, 3, 7, false, true).expect("fp8e4m3 layout is valid")
    }

    /// FP8 E5M2: 5 exponent bits, 2 mantissa bits, bias 15, infinities and
    /// NaNs. Largest finite value 57344.
    pub fn fp8_e5m2() -> Self {
        Self::custom("fp8e5m2", 5, 2, 15, true, true).expect("fp8e5m2 layout is valid")
    }

    /// FP4 E2M1: 2 exponent bits, 1 mantissa bit, bias 1, no special values.
    /// Largest finite value 6.
    pub fn fp4_e2m1() -> Self {
        Self::custom("fp4e2m1", 2, 1, 1, false, false).expect("fp4e2m1 layout is valid")
    }

    /// Builds a custom format descriptor, validating the layout rules:
    /// at least 2 exponent bits, at least 1 mantissa bit, at most 16 bits
    /// total, a bias that keeps all quantization arithmetic exact in `f64`,
    /// and a coherent special-value policy (reserving infinities without a
    /// NaN code has no IEEE-style layout).
    pub fn custom(
        name: &str,
        exponent_bits: u32,
        mantissa_bits: u32,
        bias: i32,
        has_infinity: bool,
        has_nan: bool,
    ) -> Result<Self> {
        if exponent_bits < 2 {
            return Err(Error::InvalidFormat(format!(
                "need at least 2 exponent bits, got {exponent_bits}"
            )));
        }
        if mantissa_bits < 1 {
            return Err(Error::InvalidFormat("need at least 1 mantissa bit".into()));
        }
        let total = 1 + exponent_bits + mantissa_bits;
        if total > 16 {
            return Err(Error::InvalidFormat(format!(
                "total width {total} exceeds 16 bits"
            )));
        }
        if has_infinity && !has_nan {
            return Err(Error::InvalidFormat(
                "a format with infinities must also reserve a NaN code".into(),
            ));
        }
        let mut fmt = Self {
            name: name.to_owned(),
            exponent_bits,
            mantissa_bits,
            bias,
            has_infinity,
            has_nan,
            max_finite: 0.0,
        };
        let emax = fmt.max_exponent();
        let low = fmt.min_exponent() - mantissa_bits as i32;
        if emax > MAX_EXPONENT_MAGNITUDE || low < -MAX_EXPONENT_MAGNITUDE {
            return Err(Error::InvalidFormat(format!(
                "bias {bias} pushes the exponent range [{low}, {emax}] outside \
                 ±{MAX_EXPONENT_MAGNITUDE}"
            )));
        }
        fmt.max_finite = fmt.derive_max_finite();
        Ok(fmt)
    }

    /// Format identifier (e.g. `"fp8e4m3"`).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Width of the exponent field in bits.
    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    /// Width of the mantissa (fraction) field in bits.
    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    /// Exponent bias: a stored exponent `E` encodes `2^(E - bias)`.
    pub fn bias(&self) -> i32 {
        self.bias
    }

    /// Whether the all-ones exponent with zero mantissa encodes ±infinity.
    pub fn has_infinity(&self) -> bool {
        self.has_infinity
    }

    /// Whether the format reserves at least one NaN code.
    pub fn has_nan(&self) -> bool {
        self.has_nan
    }

    /// Subnormal codes are always decoded as values; no format flushes them.
    pub fn supports_subnormals(&self) -> bool {
        true
    }

    /// Largest finite representable value.
    pub fn max_finite(&self) -> f64 {
        self.max_finite
    }

    /// Smallest positive representable value (the least subnormal),
    /// `2^(min_exponent - mantissa_bits)`.
    pub fn smallest_positive(&self) -> f64 {
        pow2(self.min_exponent() - self.mantissa_bits as i32)
    }

    /// Exponent of the smallest normal binade, `1 - bias`. Subnormals share
    /// this scale with a zero leading bit.
    pub fn min_exponent(&self) -> i32 {
        1 - self.bias
    }

    /// Exponent of the largest finite binade. Formats with infinities give
    /// the whole all-ones exponent row to specials; NaN-only formats keep it
    /// for finite values.
    pub fn max_exponent(&self) -> i32 {
        let top_code = (1i32 << self.exponent_bits) - 1;
        if self.has_infinity {
            top_code - 1 - self.bias
        } else {
            top_code - self.bias
        }
    }

    /// Total encoding width in bits (1 sign bit + exponent + mantissa).
    pub fn total_bits(&self) -> u32 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    fn derive_max_finite(&self) -> f64 {
        let m = self.mantissa_bits;
        // Largest mantissa value in units of 2^-m over the leading 1.
        let frac = if !self.has_infinity && self.has_nan {
            // The all-ones mantissa code at the top exponent is NaN, so the
            // largest finite significand is 2 - 2^(1-m).
            2.0 - pow2(1 - m as i32)
        } else {
            2.0 - pow2(-(m as i32))
        };
        pow2(self.max_exponent()) * frac
    }

    /// Decodes one bit pattern into its value, or `None` for infinity/NaN
    /// codes. Used by [`enumerate_representables`].
    fn decode(&self, code: u32) -> Option<f64> {
        let m = self.mantissa_bits;
        let e = self.exponent_bits;
        let mant = code & ((1 << m) - 1);
        let exp = (code >> m) & ((1 << e) - 1);
        let sign = if (code >> (m + e)) & 1 == 1 { -1.0 } else { 1.0 };
        let top = (1u32 << e) - 1;
        if exp == top {
            if self.has_infinity {
                return None; // infinity (mant == 0) or NaN payloads
            }
            if self.has_nan && mant == (1 << m) - 1 {
                return None; // the single NaN code of the E4M3-style layout
            }
        }
        let value = if exp == 0 {
            // Subnormal: no implicit leading bit, fixed scale 2^min_exponent.
            mant as f64 * pow2(self.min_exponent() - m as i32)
        } else {
            ((1u64 << m) + mant as u64) as f64 * pow2(exp as i32 - self.bias - m as i32)
        };
        Some(sign * value)
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// How `quantize` breaks the gap between two adjacent representable values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundingMode {
    /// Round to the nearest representable; exact midpoints go to the value
    /// whose mantissa code is even. The production default.
    #[default]
    NearestEven,
    /// Round toward zero (magnitude truncation): the largest representable
    /// value not exceeding the input in magnitude. Unlike nearest rounding —
    /// which is value-unbiased and on average *preserves* vector norms —
    /// truncation never increases a magnitude, so it is the mode that
    /// exhibits norm shrinkage. The shrinkage-measurement path defaults
    /// to this mode.
    TowardZero,
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundingMode::NearestEven => write!(f, "nearest-even"),
            RoundingMode::TowardZero => write!(f, "toward-zero"),
        }
    }
}

impl FromStr for RoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest-even" | "nearesteven" | "rne" => Ok(RoundingMode::NearestEven),
            "toward-zero" | "towardzero" | "rtz" | "truncate" => Ok(RoundingMode::TowardZero),
            other => Err(Error::InvalidConfig(format!(
                "unknown rounding mode `{other}` (expected nearest-even or toward-zero)"
            ))),
        }
    }
}

/// What happens to magnitudes beyond the largest finite value. Saturation is
/// the only policy: mapping a gradient to ±infinity would poison every norm
/// downstream, and saturation matches practical gradient-clipping behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverflowPolicy {
    /// Clamp to ±max_finite.
    #[default]
    SaturateToMaxFinite,
}

/// A format plus the rounding and overflow policies that make quantization a
/// deterministic pure function.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationConfig {
    pub format: FloatFormat,
    pub rounding: RoundingMode,
    pub overflow: OverflowPolicy,
}

impl QuantizationConfig {
    /// Default config for a format: round-to-nearest-ties-to-even, saturate.
    pub fn new(format: FloatFormat) -> Self {
        Self {
            format,
            rounding: RoundingMode::default(),
            overflow: OverflowPolicy::default(),
        }
    }

    /// Same format with an explicit rounding mode.
    pub fn with_rounding(format: FloatFormat, rounding: RoundingMode) -> Self {
        Self {
            format,
            rounding,
            overflow: OverflowPolicy::default(),
        }
    }
}

/// Exact power of two as `f64`. Valid for |e| well inside the normal range,
/// which the format validation guarantees.
fn pow2(e: i32) -> f64 {
    debug_assert!((-1020..=1020).contains(&e));
    f64::from_bits(((1023 + e) as u64) << 52)
}

/// Floor of log2(|x|) for positive finite x, read straight from the `f64`
/// exponent field. Subnormal doubles report a placeholder far below any
/// supported format exponent, which the caller clamps to `min_exponent`.
fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    if biased == 0 {
        // Subnormal f64: true exponent < -1022, beneath every format's range.
        -1100
    } else {
        biased - 1023
    }
}

/// Quantizes one finite value onto the config's format.
///
/// The algorithm is exact: with `e = max(floor(log2 |x|), min_exponent)` the
/// grid spacing around `x` is the power of two `quantum = 2^(e - m)`, the
/// ratio `x / quantum` is computed without round-off (a power-of-two scaling
/// of at most `2^(m+1)` in magnitude), the ratio is rounded to an integer by
/// the configured mode, and the product `k * quantum` reconstructs the result
/// exactly. Integer parity of `k` equals the parity of the mantissa code, so
/// `f64::round_ties_even` on the ratio implements ties-to-even on the code.
///
/// Magnitudes above `max_finite` saturate to `±max_finite`; `-0.0` and every
/// value rounding to zero return `+0.0`.
///
/// # Errors
/// [`Error::NonFiniteInput`] if `x` is NaN or infinite.
pub fn quantize(x: f64, cfg: &QuantizationConfig) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFiniteInput(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let fmt = &cfg.format;
    let mag = x.abs();
    let OverflowPolicy::SaturateToMaxFinite = cfg.overflow;
    if mag > fmt.max_finite {
        return Ok(fmt.max_finite.copysign(x));
    }
    let m = fmt.mantissa_bits as i32;
    let e = floor_log2(mag).max(fmt.min_exponent());
    let quantum = pow2(e - m);
    let ratio = x / quantum;
    let k = match cfg.rounding {
        RoundingMode::NearestEven => ratio.round_ties_even(),
        RoundingMode::TowardZero => ratio.trunc(),
    };
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok(k * quantum)
}

/// Elementwise [`quantize`] over a slice, preserving order and length.
///
/// # Errors
/// Propagates [`Error::NonFiniteInput`] from the first offending entry.
pub fn quantize_vector(v: &[f64], cfg: &QuantizationConfig) -> Result<Vec<f64>> {
    v.iter().map(|&x| quantize(x, cfg)).collect()
}

/// Every finite value representable in the format, sorted ascending with no
/// duplicates (the two zero codes collapse to a single +0). The list is
/// symmetric about zero and always contains zero.
pub fn enumerate_representables(format: &FloatFormat) -> Vec<f64> {
    let mut values: Vec<f64> = (0..(1u32 << format.total_bits()))
        .filter_map(|code| format.decode(code))
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare totally"));
    values.dedup();
    values
}

/// The five format identifiers accepted at every interface, parsed
/// case-insensitively. `Fp32` is the identity pass-through: it has no
/// 16-bit-or-narrower descriptor and quantizes every finite value to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    Fp32,
    Fp16,
    #[serde(rename = "fp8e4m3")]
    Fp8E4M3,
    #[serde(rename = "fp8e5m2")]
    Fp8E5M2,
    #[serde(rename = "fp4e2m1")]
    Fp4E2M1,
}

impl FormatName {
    /// All shipped formats, widest first — the order used in reports.
    pub const ALL: [FormatName; 5] = [
        FormatName::Fp32,
        FormatName::Fp16,
        FormatName::Fp8E4M3,
        FormatName::Fp8E5M2,
        FormatName::Fp4E2M1,
    ];

    /// Canonical lowercase identifier.
    pub fn as_str(self) -> &'static str {
        match self {
            FormatName::Fp32 => "fp32",
            FormatName::Fp16 => "fp16",
            FormatName::Fp8E4M3 => "fp8e4m3",
            FormatName::Fp8E5M2 => "fp8e5m2",
            FormatName::Fp4E2M1 => "fp4e2m1",
        }
    }

    /// The format descriptor, or `None` for the fp32 pass-through.
    pub fn descriptor(self) -> Option<FloatFormat> {
        match self {
            FormatName::Fp32 => None,
            FormatName::Fp16 => Some(FloatFormat::fp16()),
            FormatName::Fp8E4M3 => Some(FloatFormat::fp8_e4m3()),
            FormatName::Fp8E5M2 => Some(FloatFormat::fp8_e5m2()),
            FormatName::Fp4E2M1 => Some(FloatFormat::fp4_e2m1()),
        }
    }

    /// A ready-to-use quantizer for this name under the given rounding mode.
    pub fn quantizer(self, rounding: RoundingMode) -> Quantizer {
        match self.descriptor() {
            None => Quantizer::Identity,
            Some(fmt) => Quantizer::Minifloat(QuantizationConfig::with_rounding(fmt, rounding)),
        }
    }
}

impl fmt::Display for FormatName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for FormatName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" => Ok(FormatName::Fp32),
            "fp16" => Ok(FormatName::Fp16),
            "fp8e4m3" => Ok(FormatName::Fp8E4M3),
            "fp8e5m2" => Ok(FormatName::Fp8E5M2),
            "fp4e2m1" => Ok(FormatName::Fp4E2M1),
            other => Err(Error::UnknownFormat(other.to_owned())),
        }
    }
}

/// Either the fp32 identity pass-through or a real minifloat quantizer.
/// Lets callers treat "no quantization" and "quantize to format" uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer {
    /// fp32: every finite value maps to itself.
    Identity,
    /// Quantize onto a minifloat format.
    Minifloat(QuantizationConfig),
}

impl Quantizer {
    /// Quantizes a single finite value.
    ///
    /// # Errors
    /// [`Error::NonFiniteInput`] for NaN or infinite input (both variants).
    pub fn quantize(&self, x: f64) -> Result<f64> {
        match self {
            Quantizer::Identity => {
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::NonFiniteInput(x))
                }
            }
            Quantizer::Minifloat(cfg) => quantize(x, cfg),
        }
    }

    /// Elementwise quantization of a slice.
    pub fn quantize_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        v.iter().map(|&x| self.quantize(x)).collect()
    }

    /// The name this quantizer reports in observations and CSV columns.
    pub fn label(&self) -> &str {
        match self {
            Quantizer::Identity => "fp32",
            Quantizer::Minifloat(cfg) => cfg.format.name(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(fmt: FloatFormat) -> QuantizationConfig {
        QuantizationConfig::new(fmt)
    }

    #[test]
    fn shipped_format_parameters() {
        let f = FloatFormat::fp16();
        assert_eq!(
            (f.exponent_bits(), f.mantissa_bits(), f.bias()),
            (5, 10, 15)
        );
        assert!(f.has_infinity() && f.has_nan());
        assert_eq!(f.max_finite(), 65504.0);

        let f = FloatFormat::fp8_e4m3();
        assert_eq!((f.exponent_bits(), f.mantissa_bits(), f.bias()), (4, 3, 7));
        assert!(!f.has_infinity() && f.has_nan());
        assert_eq!(f.max_finite(), 448.0);

        let f = FloatFormat::fp8_e5m2();
        assert_eq!((f.exponent_bits(), f.mantissa_bits(), f.bias()), (5, 2, 15));
        assert!(f.has_infinity() && f.has_nan());
        assert_eq!(f.max_finite(), 57344.0);

        let f = FloatFormat::fp4_e2m1();
        assert_eq!((f.exponent_bits(), f.mantissa_bits(), f.bias()), (2, 1, 1));
        assert!(!f.has_infinity() && !f.has_nan());
        assert_eq!(f.max_finite(), 6.0);
    }

    #[test]
    fn fp4_value_set_is_exact() {
        let values = enumerate_representables(&FloatFormat::fp4_e2m1());
        let expected = [
            -6.0, -4.0, -3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0,
        ];
        assert_eq!(values, expected);
    }

    #[test]
    fn enumeration_counts_match_special_value_policies() {
        // 2^16 codes minus specials, minus one duplicate zero.
        assert_eq!(
            enumerate_representables(&FloatFormat::fp16()).len(),
            (1 << 16) - 2 * (1 << 10) - 1
        );
        // E4M3: one NaN per sign.
        assert_eq!(
            enumerate_representables(&FloatFormat::fp8_e4m3()).len(),
            256 - 2 - 1
        );
        // E5M2: the whole all-ones exponent row per sign.
        assert_eq!(
            enumerate_representables(&FloatFormat::fp8_e5m2()).len(),
            256 - 2 * 4 - 1
        );
    }

    #[test]
    fn enumeration_is_symmetric_and_contains_zero() {
        for fmt in [
            FloatFormat::fp16(),
            FloatFormat::fp8_e4m3(),
            FloatFormat::fp8_e5m2(),
            FloatFormat::fp4_e2m1(),
        ] {
            let values = enumerate_representables(&fmt);
            assert!(values.contains(&0.0));
            assert!(values.iter().all(|v| v.is_finite()));
            let negated: Vec<f64> = values.iter().rev().map(|v| -v + 0.0).collect();
            assert_eq!(values, negated, "{fmt} not symmetric about zero");
            assert_eq!(*values.last().unwrap(), fmt.max_finite());
        }
    }

    #[test]
    fn nearest_even_examples() {
        let e4m3 = cfg(FloatFormat::fp8_e4m3());
        assert_eq!(quantize(0.0, &e4m3).unwrap(), 0.0);
        assert_eq!(quantize(1.0, &e4m3).unwrap(), 1.0);
        // Neighbors of 0.1 are 0.09375 and 0.1015625; the latter is closer.
        assert_eq!(quantize(0.1, &e4m3).unwrap(), 0.1015625);
        assert_eq!(quantize(1000.0, &e4m3).unwrap(), 448.0);
        assert_eq!(quantize(-1000.0, &e4m3).unwrap(), -448.0);

        let fp4 = cfg(FloatFormat::fp4_e2m1());
        // 2.5 is the exact midpoint of {2, 3}; 2.0 has the even mantissa code.
        assert_eq!(quantize(2.5, &fp4).unwrap(), 2.0);
        // 3.5 is the midpoint of {3, 4}; 4.0 has the even code.
        assert_eq!(quantize(3.5, &fp4).unwrap(), 4.0);
        // Below half the smallest positive value 0.5 everything rounds to 0.
        assert_eq!(quantize(0.2499, &fp4).unwrap(), 0.0);
        assert_eq!(quantize(0.25, &fp4).unwrap(), 0.0); // tie: 0 code is even
        assert_eq!(quantize(0.26, &fp4).unwrap(), 0.5);
    }

    #[test]
    fn toward_zero_examples() {
        let fp4 = QuantizationConfig::with_rounding(
            FloatFormat::fp4_e2m1(),
            RoundingMode::TowardZero,
        );
        assert_eq!(quantize(2.9, &fp4).unwrap(), 2.0);
        assert_eq!(quantize(-2.9, &fp4).unwrap(), -2.0);
        assert_eq!(quantize(0.49, &fp4).unwrap(), 0.0);
        assert_eq!(quantize(0.5, &fp4).unwrap(), 0.5);
        assert_eq!(quantize(7.0, &fp4).unwrap(), 6.0); // still saturates
        let e4m3 = QuantizationConfig::with_rounding(
            FloatFormat::fp8_e4m3(),
            RoundingMode::TowardZero,
        );
        assert_eq!(quantize(0.1, &e4m3).unwrap(), 0.09375);
    }

    #[test]
    fn negative_zero_normalizes() {
        let fp4 = cfg(FloatFormat::fp4_e2m1());
        let q = quantize(-0.0, &fp4).unwrap();
        assert_eq!(q, 0.0);
        assert!(q.is_sign_positive());
        let q = quantize(-0.1, &fp4).unwrap();
        assert_eq!(q, 0.0);
        assert!(q.is_sign_positive(), "values rounding to zero give +0");
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let fp16 = cfg(FloatFormat::fp16());
        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(matches!(
                quantize(bad, &fp16),
                Err(Error::NonFiniteInput(_))
            ));
        }
        assert!(Quantizer::Identity.quantize(f64::NAN).is_err());
    }

    #[test]
    fn quantize_vector_is_elementwise() {
        let fp4 = cfg(FloatFormat::fp4_e2m1());
        let v = [0.0, 1.0, 2.5, -7.0, 0.1];
        assert_eq!(
            quantize_vector(&v, &fp4).unwrap(),
            vec![0.0, 1.0, 2.0, -6.0, 0.0]
        );
    }

    #[test]
    fn binade_boundary_rounds_up_exactly() {
        // Largest fp16 value below 2 is 2 - 2^-10; anything past the midpoint
        // must round up to exactly 2.0, crossing the binade boundary.
        let fp16 = cfg(FloatFormat::fp16());
        let below = 2.0 - 0.25 * pow2(-10);
        assert_eq!(quantize(below, &fp16).unwrap(), 2.0);
        // The exact midpoint ties to the even code, which is 2.0 (code 0).
        let midpoint = 2.0 - 0.5 * pow2(-10);
        assert_eq!(quantize(midpoint, &fp16).unwrap(), 2.0);
    }

    #[test]
    fn format_name_parsing_is_case_insensitive() {
        assert_eq!("FP16".parse::<FormatName>().unwrap(), FormatName::Fp16);
        assert_eq!(
            "Fp8E4M3".parse::<FormatName>().unwrap(),
            FormatName::Fp8E4M3
        );
        assert_eq!("fp32".parse::<FormatName>().unwrap(), FormatName::Fp32);
        assert!(matches!(
            "fp12".parse::<FormatName>(),
            Err(Error::UnknownFormat(_))
        ));
    }

    #[test]
    fn identity_quantizer_passes_values_through() {
        let q = FormatName::Fp32.quantizer(RoundingMode::NearestEven);
        assert_eq!(q.quantize(0.123456789).unwrap(), 0.123456789);
        assert_eq!(q.label(), "fp32");
    }

    #[test]
    fn custom_format_validation() {
        assert!(FloatFormat::custom("e1m1", 1, 1, 0, false, false).is_err());
        assert!(FloatFormat::custom("m0", 2, 0, 1, false, false).is_err());
        assert!(FloatFormat::custom("wide", 8, 8, 127, true, true).is_err());
        assert!(FloatFormat::custom("inf-no-nan", 3, 2, 3, true, false).is_err());
        assert!(FloatFormat::custom("big-bias", 4, 3, 1000, false, true).is_err());
        // A 16-bit custom layout with an unusual bias is fine.
        let f = FloatFormat::custom("e5m10b12", 5, 10, 12, true, true).unwrap();
        assert_eq!(f.max_exponent(), 18);
    }

    #[test]
    fn subnormal_f64_inputs_collapse_to_zero() {
        let fp16 = cfg(FloatFormat::fp16());
        assert_eq!(quantize(f64::MIN_POSITIVE / 8.0, &fp16).unwrap(), 0.0);
    }
}
