//! Space-time block codes as real-linear dispersion designs.
//!
//! A design with `k_real` real information dimensions is a list of `n × n` complex
//! basis matrices; the codeword for the real coordinate vector `s` is `Σ_d s_d B_d`.
//! Complex symbol `t` occupies real dimensions `2t` (in-phase) and `2t + 1`
//! (quadrature). Working over the reals lets conjugating designs such as Alamouti
//! share one encoder and one detector with the full-rate codes.

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, RealMatrix};

/// Largest `m·n/2` accepted by [`integer_design`]; keeps every codeword entry an
/// exactly representable double.
pub const MAX_INTEGER_RANGE_BITS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Integer { m: u32, alpha: u64 },
    Alamouti,
    Golden,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDesign {
    n: usize,
    k_real: usize,
    basis: Vec<CMatrix>,
    name: String,
    kind: DesignKind,
    exact_integer: bool,
}

impl LinearDesign {
    fn new(name: &str, kind: DesignKind, n: usize, basis: Vec<CMatrix>) -> Self {
        let exact_integer = basis.iter().all(|b| b.to_gaussian().is_some());
        LinearDesign {
            n,
            k_real: basis.len(),
            basis,
            name: name.to_string(),
            kind,
            exact_integer,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_real(&self) -> usize {
        self.k_real
    }

    pub fn num_symbols(&self) -> usize {
        self.k_real / 2
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn exact_integer(&self) -> bool {
        self.exact_integer
    }

    /// Basis matrices as Gaussian integers (row-major), for exact arithmetic.
    pub fn integer_basis(&self) -> Option<Vec<Vec<Complex<i64>>>> {
        if !self.exact_integer {
            return None;
        }
        self.basis.iter().map(|b| b.to_gaussian()).collect()
    }

    /// `Σ_d coords[d] · B_d`, with no constellation check.
    pub fn encode_coords(&self, coords: &[f64]) -> Result<CMatrix> {
        if coords.len() != self.k_real {
            return Err(Error::DimensionMismatch {
                expected: self.k_real,
                got: coords.len(),
            });
        }
        let mut x = CMatrix::zeros(self.n);
        for (b, &s) in self.basis.iter().zip(coords) {
            if s != 0.0 {
                x.add_scaled(b, s);
            }
        }
        Ok(x)
    }

    /// Sum over the real dimensions of `|B_d|²_F`.
    pub fn basis_energy(&self) -> f64 {
        self.basis.iter().map(|b| b.frobenius_sq()).sum()
    }
}

/// Splits complex symbols into the real coordinate vector used by the designs.
pub fn symbol_coords(symbols: &[Complex64]) -> Vec<f64> {
    symbols.iter().flat_map(|s| [s.re, s.im]).collect()
}

/// Layer index (0-based) carried by row `row`, column `col` of the Integer design.
pub fn integer_layer(n: usize, row: usize, col: usize) -> usize {
    (col + n - row) % n
}

/// Row `k` of the circulant matrix whose first row is `1, α, …, α^{n-1}`.
pub fn circulant_row(n: usize, alpha: u64, k: usize) -> Vec<u64> {
    (0..n).map(|p| alpha.pow(((p + n - k) % n) as u32)).collect()
}

/// The Integer STBC for `n` antennas and `2^m`-QAM, with `α = 2^{m/2}` and `γ = i`.
///
/// Entry `(k, c)` is `<Φ_k, x_j>` with `j = (c - k) mod n`, multiplied by `i` when
/// `c < k`. Symbol `x_{j,p}` has index `j·n + p`.
#[allow(clippy::needless_range_loop)]
pub fn integer_design(n: usize, m: u32) -> Result<LinearDesign> {
    if n < 2 {
        return invalid(format!("integer design needs n >= 2, got {n}"));
    }
    if m == 0 || !m.is_multiple_of(2) {
        return invalid(format!("integer design needs even positive m, got {m}"));
    }
    let range_bits = (m as usize / 2).saturating_mul(n);
    if range_bits > MAX_INTEGER_RANGE_BITS as usize {
        return invalid(format!(
            "dynamic range overflow: m·n/2 = {range_bits} exceeds {MAX_INTEGER_RANGE_BITS}"
        ));
    }
    let alpha = 1u64 << (m / 2);
    let phi: Vec<Vec<u64>> = (0..n).map(|k| circulant_row(n, alpha, k)).collect();
    let mut basis = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for p in 0..n {
            let mut re = CMatrix::zeros(n);
            for k in 0..n {
                for c in 0..n {
                    if integer_layer(n, k, c) != j {
                        continue;
                    }
                    let coef = phi[k][p] as f64;
                    re[(k, c)] = if c < k {
                        Complex64::new(0.0, coef)
                    } else {
                        Complex64::new(coef, 0.0)
                    };
                }
            }
            let im = re.scale_complex(Complex64::i());
            basis.push(re);
            basis.push(im);
        }
    }
    Ok(LinearDesign::new(
        &format!("integer-n{n}-m{m}"),
        DesignKind::Integer { m, alpha },
        n,
        basis,
    ))
}

/// `[[x1, -x2*], [x2, x1*]]`
pub fn alamouti_design() -> LinearDesign {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    let basis = vec![
        CMatrix::from_rows(2, vec![c(1.0, 0.0), z, z, c(1.0, 0.0)]),
        CMatrix::from_rows(2, vec![c(0.0, 1.0), z, z, c(0.0, -1.0)]),
        CMatrix::from_rows(2, vec![z, c(-1.0, 0.0), c(1.0, 0.0), z]),
        CMatrix::from_rows(2, vec![z, c(0.0, 1.0), c(0.0, 1.0), z]),
    ];
    LinearDesign::new("alamouti", DesignKind::Alamouti, 2, basis)
}

/// Golden code: `(1/√5)[[a(x1+θx2), a(x3+θx4)], [i·ā(x3+θ̄x4), ā(x1+θ̄x2)]]` with
/// `θ = (1+√5)/2`, `θ̄ = 1-θ`, `a = 1+i(1-θ)`, `ā = 1+i(1-θ̄)`.
pub fn golden_design() -> LinearDesign {
    let sqrt5 = 5f64.sqrt();
    let theta = (1.0 + sqrt5) / 2.0;
    let theta_bar = 1.0 - theta;
    let a = Complex64::new(1.0, 1.0 - theta) / sqrt5;
    let a_bar = Complex64::new(1.0, 1.0 - theta_bar) / sqrt5;
    let i = Complex64::i();

    // (diag-or-antidiag, upper coefficient, lower coefficient) for x1..x4
    let layout = [
        (true, a, a_bar),
        (true, a * theta, a_bar * theta_bar),
        (false, a, i * a_bar),
        (false, a * theta, i * a_bar * theta_bar),
    ];
    let mut basis = Vec::with_capacity(8);
    for (diagonal, upper, lower) in layout {
        let mut re = CMatrix::zeros(2);
        if diagonal {
            re[(0, 0)] = upper;
            re[(1, 1)] = lower;
        } else {
            re[(0, 1)] = upper;
            re[(1, 0)] = lower;
        }
        let im = re.scale_complex(i);
        basis.push(re);
        basis.push(im);
    }
    LinearDesign::new("golden", DesignKind::Golden, 2, basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codeword {
    pub entries: CMatrix,
    /// Power-normalization factor already applied to `entries`.
    pub norm_scale: f64,
}

impl Codeword {
    pub fn normalized(&self, c: f64) -> Codeword {
        Codeword {
            entries: self.entries.scale(c),
            norm_scale: self.norm_scale * c,
        }
    }
}

/// Encodes constellation symbols; the result is unnormalized (`norm_scale = 1`).
pub fn encode(
    design: &LinearDesign,
    constellation: &Constellation,
    symbols: &[Complex64],
) -> Result<Codeword> {
    if symbols.len() != design.num_symbols() {
        return Err(Error::DimensionMismatch {
            expected: design.num_symbols(),
            got: symbols.len(),
        });
    }
    for &s in symbols {
        constellation.point_of(s)?;
    }
    Ok(Codeword {
        entries: design.encode_coords(&symbol_coords(symbols))?,
        norm_scale: 1.0,
    })
}

/// Average `|entry|²` over positions and uniformly drawn symbols.
pub fn average_entry_power(design: &LinearDesign, constellation: &Constellation) -> f64 {
    let per_coordinate = constellation.energy() / 2.0;
    per_coordinate * design.basis_energy() / (design.n * design.n) as f64
}

/// Scale `c = 1/√(n·E_entry)` giving unit expected transmit power per channel use.
pub fn normalize(design: &LinearDesign, constellation: &Constellation) -> Result<f64> {
    let e = average_entry_power(design, constellation);
    if e <= 0.0 {
        return invalid("design has zero average entry power");
    }
    Ok(1.0 / (design.n as f64 * e).sqrt())
}

/// Real-stacked effective channel.
///
/// Row `2(r·n + c)` holds the real part and row `2(r·n + c) + 1` the imaginary part
/// of entry `(r, c)` of `√(1/n)·H·B_d`, column `d`.
pub fn effective_channel(design: &LinearDesign, h: &CMatrix) -> Result<RealMatrix> {
    let n = design.n;
    if h.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.dim(),
        });
    }
    let gain = 1.0 / (n as f64).sqrt();
    let mut out = RealMatrix::zeros(2 * n * n, design.k_real);
    for (d, b) in design.basis.iter().enumerate() {
        let hb = h * b;
        for (idx, z) in hb.as_slice().iter().enumerate() {
            out[(2 * idx, d)] = z.re * gain;
            out[(2 * idx + 1, d)] = z.im * gain;
        }
    }
    Ok(out)
}

/// Real-stacked vectorization matching [`effective_channel`]'s row order.
pub fn stack_real(y: &CMatrix) -> Vec<f64> {
    y.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}
