//! q-bit fixed-point model of the STBC encoder.
//!
//! Numbers are sign plus `q - 1` fractional bits on the grid
//! `{k / 2^{q-1} : -2^{q-1} <= k <= 2^{q-1} - 1}`. The encoder divides every operand by
//! a global power-of-two scale so all of them fall inside `[-1, 1)`, rounds the
//! dispersion coefficients and symbol coordinates to the grid, runs an exact
//! multiply-accumulate, and rounds each output coordinate once more.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::design::{symbol_coords, Codeword, LinearDesign};
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;

pub const MIN_BITS: u32 = 2;
/// Upper bound on `q`; keeps every product sum of the accumulator exact in `f64`.
pub const MAX_BITS: u32 = 24;

fn check_bits(q: u32) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&q) {
        return invalid(format!("quantizer bits must be in {MIN_BITS}..={MAX_BITS}, got {q}"));
    }
    Ok(())
}

/// Grid step `2^{-(q-1)}`.
pub fn grid_step(q: u32) -> f64 {
    (-(q as i32 - 1) as f64).exp2()
}

/// Rounds `y` to the nearest point of the q-bit grid, ties away from zero.
///
/// Admissible inputs are `-1 <= y <= 1 - 2^{-q}`. The single tie at the upper end
/// rounds to 1, which is off the grid, so it saturates to `1 - 2^{-(q-1)}`.
pub fn quantize(y: f64, q: u32) -> Result<f64> {
    check_bits(q)?;
    let top = 1.0 - (-(q as i32) as f64).exp2();
    if !(-1.0..=top).contains(&y) {
        return Err(Error::OutOfRange { value: y });
    }
    Ok(round_to_grid(y, q))
}

fn round_to_grid(y: f64, q: u32) -> f64 {
    let levels = (q as i32 - 1) as f64;
    let full = levels.exp2();
    let k = (y * full).round().clamp(-full, full - 1.0);
    k / full
}

/// Like [`quantize`] but clamps out-of-range inputs to the grid ends (accumulator
/// overflow saturation).
pub fn quantize_saturating(y: f64, q: u32) -> f64 {
    round_to_grid(y.clamp(-1.0, 1.0), q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub q: u32,
    /// Power of two dividing every operand before quantization.
    pub scale: f64,
}

impl QuantizerConfig {
    pub fn new(q: u32, scale: f64) -> Result<Self> {
        check_bits(q)?;
        if !(scale > 0.0 && scale.is_finite()) || scale.log2().fract() != 0.0 {
            return invalid(format!("scale must be a power of two, got {scale}"));
        }
        Ok(QuantizerConfig { q, scale })
    }

    pub fn step(&self) -> f64 {
        grid_step(self.q)
    }

    pub fn quantize(&self, value: f64) -> Result<f64> {
        quantize(value / self.scale, self.q)
    }
}

/// Bits per real dimension needed to encode the Integer code exactly: `m·n/2 + 1`.
pub fn min_bits_integer_code(n: usize, m: u32) -> Result<u32> {
    crate::design::integer_design(n, m)?;
    Ok(m * n as u32 / 2 + 1)
}

/// Smallest power of two strictly greater than `x` (`x > 0`).
fn power_of_two_above(x: f64) -> f64 {
    (x.log2().floor() + 1.0).exp2()
}

/// Encoder state precomputed for one (design, constellation, q) triple.
#[derive(Debug, Clone)]
pub struct QuantizedEncoder {
    config: QuantizerConfig,
    n: usize,
    num_symbols: usize,
    /// `[d][position]` quantized real and imaginary coefficient parts.
    coef_re: Vec<Vec<f64>>,
    coef_im: Vec<Vec<f64>>,
    constellation: Constellation,
}

impl QuantizedEncoder {
    pub fn new(design: &LinearDesign, constellation: &Constellation, q: u32) -> Result<Self> {
        check_bits(q)?;
        let n = design.n();
        let max_coord = constellation.max_coordinate() as f64;

        let mut largest = max_coord;
        for b in design.basis() {
            for z in b.as_slice() {
                largest = largest.max(z.re.abs()).max(z.im.abs());
            }
        }
        for pos in 0..n * n {
            let (mut re, mut im) = (0.0, 0.0);
            for b in design.basis() {
                let z = b.as_slice()[pos];
                re += z.re.abs();
                im += z.im.abs();
            }
            largest = largest.max(re * max_coord).max(im * max_coord);
        }
        let config = QuantizerConfig::new(q, power_of_two_above(largest))?;

        let quantize_parts = |part: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            design
                .basis()
                .iter()
                .map(|b| {
                    b.as_slice()
                        .iter()
                        .map(|z| round_to_grid(part(z) / config.scale, q))
                        .collect()
                })
                .collect()
        };
        let coef_re = quantize_parts(|z| z.re);
        let coef_im = quantize_parts(|z| z.im);

        let coef_zero = coef_re.iter().chain(&coef_im).flatten().all(|&v| v == 0.0);
        let symbols_zero = round_to_grid(max_coord / config.scale, q) == 0.0;
        if coef_zero || symbols_zero {
            return Err(Error::QuantizerUnderflow { q });
        }
        Ok(QuantizedEncoder {
            config,
            n,
            num_symbols: design.num_symbols(),
            coef_re,
            coef_im,
            constellation: constellation.clone(),
        })
    }

    pub fn config(&self) -> QuantizerConfig {
        self.config
    }

    pub fn encode(&self, symbols: &[Complex64]) -> Result<Codeword> {
        if symbols.len() != self.num_symbols {
            return Err(Error::DimensionMismatch {
                expected: self.num_symbols,
                got: symbols.len(),
            });
        }
        for &s in symbols {
            self.constellation.point_of(s)?;
        }
        let QuantizerConfig { q, scale } = self.config;
        let coords: Vec<f64> = symbol_coords(symbols)
            .into_iter()
            .map(|x| round_to_grid(x / scale, q))
            .collect();
        let positions = self.n * self.n;
        let mut entries = Vec::with_capacity(positions);
        for pos in 0..positions {
            let (mut re, mut im) = (0.0, 0.0);
            for (d, &x) in coords.iter().enumerate() {
                re += self.coef_re[d][pos] * x;
                im += self.coef_im[d][pos] * x;
            }
            // accumulator holds entry / scale², move back to entry / scale
            let re = quantize_saturating(re * scale, q) * scale;
            let im = quantize_saturating(im * scale, q) * scale;
            entries.push(Complex64::new(re, im));
        }
        Ok(Codeword {
            entries: CMatrix::from_rows(self.n, entries),
            norm_scale: 1.0,
        })
    }
}

/// One-shot q-bit encode; see [`QuantizedEncoder`].
pub fn quantized_encode(
    design: &LinearDesign,
    constellation: &Constellation,
    symbols: &[Complex64],
    q: u32,
) -> Result<Codeword> {
    QuantizedEncoder::new(design, constellation, q)?.encode(symbols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::make_qam;
    use crate::design::{encode, golden_design, integer_design};

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.3, 3).unwrap(), 0.25);
        assert_eq!(quantize(-1.0, 2).unwrap(), -1.0);
        for q in 2..=8 {
            let full = (1i64 << (q - 1)) as f64;
            for k in -(1i64 << (q - 1))..(1i64 << (q - 1)) {
                let g = k as f64 / full;
                assert_eq!(quantize(g, q).unwrap(), g);
            }
        }
    }

    #[test]
    fn quantize_ties_round_away_from_zero() {
        assert_eq!(quantize(0.125, 3).unwrap(), 0.25);
        assert_eq!(quantize(-0.125, 3).unwrap(), -0.25);
        // upper tie saturates onto the grid
        assert_eq!(quantize(0.875, 3).unwrap(), 0.75);
    }

    #[test]
    fn quantize_rejects_out_of_range() {
        assert!(quantize(1.0, 4).is_err());
        assert!(quantize(-1.0001, 4).is_err());
        assert!(quantize(0.95, 3).is_err());
        assert!(quantize(f64::NAN, 3).is_err());
        assert!(quantize(0.1, 1).is_err());
    }

    #[test]
    fn config_requires_power_of_two_scale() {
        assert!(QuantizerConfig::new(4, 8.0).is_ok());
        assert!(QuantizerConfig::new(4, 0.25).is_ok());
        assert!(QuantizerConfig::new(4, 6.0).is_err());
        assert!(QuantizerConfig::new(1, 8.0).is_err());
        let c = QuantizerConfig::new(3, 4.0).unwrap();
        assert_eq!(c.quantize(1.3).unwrap(), 0.25);
    }

    #[test]
    fn min_bits_table() {
        assert_eq!(min_bits_integer_code(2, 2).unwrap(), 3);
        assert_eq!(min_bits_integer_code(2, 4).unwrap(), 5);
        assert_eq!(min_bits_integer_code(2, 6).unwrap(), 7);
        assert_eq!(min_bits_integer_code(4, 4).unwrap(), 9);
        assert!(min_bits_integer_code(1, 2).is_err());
        assert!(min_bits_integer_code(2, 5).is_err());
    }

    #[test]
    fn scale_for_small_integer_code() {
        let d = integer_design(2, 2).unwrap();
        let q = make_qam(2).unwrap();
        let enc = QuantizedEncoder::new(&d, &q, 3).unwrap();
        assert_eq!(enc.config().scale, 4.0);
    }

    #[test]
    fn integer_code_exact_at_minimum_bits() {
        let d = integer_design(2, 2).unwrap();
        let q = make_qam(2).unwrap();
        let pts = q.complex_points();
        let enc = QuantizedEncoder::new(&d, &q, 3).unwrap();
        for idx in 0..256usize {
            let syms: Vec<Complex64> = (0..4).map(|t| pts[(idx >> (2 * t)) & 3]).collect();
            let exact = encode(&d, &q, &syms).unwrap();
            assert_eq!(enc.encode(&syms).unwrap(), exact);
        }
    }

    #[test]
    fn golden_code_is_not_exact() {
        let d = golden_design();
        let q = make_qam(2).unwrap();
        let pts = q.complex_points();
        let enc = QuantizedEncoder::new(&d, &q, 7).unwrap();
        let worst = (0..256usize)
            .map(|idx| {
                let syms: Vec<Complex64> = (0..4).map(|t| pts[(idx >> (2 * t)) & 3]).collect();
                let exact = encode(&d, &q, &syms).unwrap();
                enc.encode(&syms).unwrap().entries.max_abs_diff(&exact.entries)
            })
            .fold(0.0, f64::max);
        assert!(worst > 0.0);
    }

    #[test]
    fn underflow_is_reported() {
        // 4x4 code over 4096-QAM: every operand is below half a 2-bit step
        let d = integer_design(4, 12).unwrap();
        let q = make_qam(12).unwrap();
        assert_eq!(
            QuantizedEncoder::new(&d, &q, 2).unwrap_err(),
            Error::QuantizerUnderflow { q: 2 }
        );
    }
}
