//! Code-level metrics: PAPR of the transmitted alphabet and the spectrum of
//! codeword difference matrices (trace and determinant criteria).
//!
//! Every reported trace and determinant is normalized by the `c` of
//! [`normalize`](crate::design::normalize), i.e. unit average transmit power per
//! channel use: `trace(ΔXᴴΔX)·c²` and `|det ΔX|²·c^{2n}`.

use std::collections::HashSet;

use num_complex::{Complex, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, Papr};
use crate::decoder::zigzag_indices;
use crate::design::{average_entry_power, normalize, DesignKind, LinearDesign};
use crate::error::{invalid, Error, Result};
use crate::linalg::{gaussian_det, CMatrix};

/// Largest per-position entry alphabet enumerated by [`code_papr`].
pub const MAX_ENTRY_ALPHABET: u64 = 1 << 24;
/// Default cap on exhaustive difference enumeration.
pub const DEFAULT_SPECTRUM_CAP: u64 = 1 << 24;
/// Cap on exhaustive difference enumeration with the long-run flag.
pub const LONG_SPECTRUM_CAP: u64 = 1 << 32;
pub const DEFAULT_TRACE_NODE_BUDGET: u64 = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaprMethod {
    /// Integer code: the entry alphabet is a regular `M^n`-QAM.
    QamIdentity,
    /// Per-position entry alphabets enumerated exhaustively.
    Enumerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodePapr {
    pub ratio: f64,
    pub db: f64,
    pub method: PaprMethod,
}

/// `3(√K - 1)/(√K + 1)`, the PAPR of square `K`-QAM with odd coordinates.
pub fn papr_qam_closed_form(k: u64) -> Result<f64> {
    let side = (k as f64).sqrt().round() as u64;
    if k < 4 || side * side != k || !side.is_power_of_two() {
        return invalid(format!("{k} is not the size of a square QAM (power of 4)"));
    }
    let s = side as f64;
    Ok(3.0 * (s - 1.0) / (s + 1.0))
}

/// PAPR of the transmitted entries, `max |X_jk|² / E|X_jk|²`, in dB.
pub fn code_papr(design: &LinearDesign, constellation: &Constellation) -> Result<CodePapr> {
    if let DesignKind::Integer { m, .. } = design.kind() {
        if m == constellation.m() {
            let k = 1u64 << (m as u64 * design.n() as u64);
            let ratio = papr_qam_closed_form(k)?;
            let p = Papr::from_ratio(ratio);
            return Ok(CodePapr {
                ratio,
                db: p.db,
                method: PaprMethod::QamIdentity,
            });
        }
    }
    entry_alphabet_papr(design, constellation)
}

/// PAPR by enumerating, position by position, every value an entry can take.
pub fn entry_alphabet_papr(
    design: &LinearDesign,
    constellation: &Constellation,
) -> Result<CodePapr> {
    let n = design.n();
    let points = constellation.complex_points();
    let basis = design.basis();
    let mut peak = 0.0f64;
    for pos in 0..n * n {
        // (coefficient of Re x_t, coefficient of Im x_t) for every symbol touching pos
        let coefs: Vec<(Complex64, Complex64)> = (0..design.num_symbols())
            .map(|t| (basis[2 * t].as_slice()[pos], basis[2 * t + 1].as_slice()[pos]))
            .filter(|(a, b)| a.norm_sqr() + b.norm_sqr() > 0.0)
            .collect();
        let size = (points.len() as u64).checked_pow(coefs.len() as u32);
        if size.is_none_or(|s| s > MAX_ENTRY_ALPHABET) {
            return Err(Error::BudgetExceeded(format!(
                "entry alphabet at position {pos} has {}^{} values",
                points.len(),
                coefs.len()
            )));
        }
        peak = peak.max(max_entry_power(&coefs, &points, Complex64::new(0.0, 0.0)));
    }
    let mean = average_entry_power(design, constellation);
    if mean <= 0.0 {
        return invalid("design has zero average entry power");
    }
    let ratio = peak / mean;
    Ok(CodePapr {
        ratio,
        db: Papr::from_ratio(ratio).db,
        method: PaprMethod::Enumerated,
    })
}

fn max_entry_power(coefs: &[(Complex64, Complex64)], points: &[Complex64], acc: Complex64) -> f64 {
    match coefs.split_first() {
        None => acc.norm_sqr(),
        Some(((a, b), rest)) => points
            .iter()
            .map(|p| max_entry_power(rest, points, acc + a * p.re + b * p.im))
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpectrumMode {
    /// Every difference vector; `allow_long` raises the size cap to 2^32.
    Exhaustive { allow_long: bool },
    /// `budget` random codeword pairs.
    Sampled { budget: u64, seed: u64 },
}

/// Summary of the codeword difference matrices `ΔX`.
///
/// `distinct_count` includes the all-zero difference; `zero_det_count` counts the
/// nonzero differences with `det ΔX = 0`, and `zero_det_percent` is their share of
/// `distinct_count`. Minima run over nonzero differences (trace) and nonzero
/// determinants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSpectrum {
    pub distinct_count: u64,
    pub zero_det_count: u64,
    pub zero_det_percent: f64,
    pub min_trace: f64,
    pub min_det_sq: f64,
    pub norm_scale: f64,
    pub exhaustive: bool,
}

impl DifferenceSpectrum {
    pub const CSV_HEADER: &'static str =
        "distinct_count,zero_det_count,zero_det_percent,min_trace,min_det_sq,norm_scale,exhaustive";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.distinct_count,
            self.zero_det_count,
            self.zero_det_percent,
            self.min_trace,
            self.min_det_sq,
            self.norm_scale,
            self.exhaustive
        )
    }
}

/// Number of values a difference of two odd coordinates of `2^m`-QAM can take.
pub fn difference_levels(constellation: &Constellation) -> Vec<i64> {
    let span = 2 * constellation.max_coordinate() as i64;
    (-span..=span).step_by(2).collect()
}

pub fn difference_spectrum(
    design: &LinearDesign,
    constellation: &Constellation,
    mode: SpectrumMode,
) -> Result<DifferenceSpectrum> {
    let c = normalize(design, constellation)?;
    match mode {
        SpectrumMode::Exhaustive { allow_long } => {
            exhaustive_spectrum(design, constellation, c, allow_long)
        }
        SpectrumMode::Sampled { budget, seed } => {
            sampled_spectrum(design, constellation, c, budget, seed)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tally {
    zero_det: u64,
    min_trace: i64,
    min_det_sq: i64,
}

impl Tally {
    const EMPTY: Tally = Tally {
        zero_det: 0,
        min_trace: i64::MAX,
        min_det_sq: i64::MAX,
    };

    fn merge(self, o: Tally) -> Tally {
        Tally {
            zero_det: self.zero_det + o.zero_det,
            min_trace: self.min_trace.min(o.min_trace),
            min_det_sq: self.min_det_sq.min(o.min_det_sq),
        }
    }
}

/// `[Re e00, Im e00, Re e01, Im e01, Re e10, Im e10, Re e11, Im e11]`
type Entries2 = [i64; 8];

fn exhaustive_spectrum(
    design: &LinearDesign,
    constellation: &Constellation,
    c: f64,
    allow_long: bool,
) -> Result<DifferenceSpectrum> {
    if design.n() != 2 {
        return invalid(format!(
            "exhaustive determinant enumeration is only offered for n = 2 (got n = {}); use sampled mode",
            design.n()
        ));
    }
    let basis = design
        .integer_basis()
        .ok_or_else(|| Error::InvalidParameter("exhaustive spectrum needs an integer design".into()))?;
    let levels = difference_levels(constellation);
    let total = (levels.len() as u64).checked_pow(design.k_real() as u32);
    let cap = if allow_long {
        LONG_SPECTRUM_CAP
    } else {
        DEFAULT_SPECTRUM_CAP
    };
    let total = match total {
        Some(t) if t <= cap => t,
        _ => {
            return Err(Error::BudgetExceeded(format!(
                "{}^{} difference matrices exceed the cap of {cap}{}",
                levels.len(),
                design.k_real(),
                if allow_long { "" } else { " (long runs need the long-run flag)" }
            )))
        }
    };

    // contrib[d][t]: entries of levels[t]·B_d
    let contrib: Vec<Vec<Entries2>> = basis
        .iter()
        .map(|b| {
            levels
                .iter()
                .map(|&v| {
                    let mut e = [0i64; 8];
                    for (pos, z) in b.iter().enumerate() {
                        e[2 * pos] = v * z.re;
                        e[2 * pos + 1] = v * z.im;
                    }
                    e
                })
                .collect()
        })
        .collect();

    let tally = contrib[0]
        .par_iter()
        .map(|first| {
            let mut t = Tally::EMPTY;
            walk_differences(&contrib[1..], *first, &mut t);
            t
        })
        .reduce(|| Tally::EMPTY, Tally::merge);

    Ok(finish(total, tally.zero_det, tally.min_trace, tally.min_det_sq, c, 2, true))
}

fn walk_differences(rest: &[Vec<Entries2>], acc: Entries2, tally: &mut Tally) {
    if rest.len() == 1 {
        for add in &rest[0] {
            let mut e = acc;
            for (x, a) in e.iter_mut().zip(add) {
                *x += a;
            }
            let trace: i64 = e.iter().map(|v| v * v).sum();
            // det = e00·e11 − e01·e10
            let det_re = e[0] * e[6] - e[1] * e[7] - (e[2] * e[4] - e[3] * e[5]);
            let det_im = e[0] * e[7] + e[1] * e[6] - (e[2] * e[5] + e[3] * e[4]);
            let det_sq = det_re * det_re + det_im * det_im;
            if trace == 0 {
                continue;
            }
            if det_sq == 0 {
                tally.zero_det += 1;
            } else if det_sq < tally.min_det_sq {
                tally.min_det_sq = det_sq;
            }
            if trace < tally.min_trace {
                tally.min_trace = trace;
            }
        }
        return;
    }
    for add in &rest[0] {
        let mut e = acc;
        for (x, a) in e.iter_mut().zip(add) {
            *x += a;
        }
        walk_differences(&rest[1..], e, tally);
    }
}

fn finish(
    distinct: u64,
    zero_det: u64,
    min_trace_raw: i64,
    min_det_sq_raw: i64,
    c: f64,
    n: usize,
    exhaustive: bool,
) -> DifferenceSpectrum {
    let scale = |raw: i64, power: i32| {
        if raw == i64::MAX {
            f64::NAN
        } else {
            raw as f64 * c.powi(power)
        }
    };
    DifferenceSpectrum {
        distinct_count: distinct,
        zero_det_count: zero_det,
        zero_det_percent: 100.0 * zero_det as f64 / distinct as f64,
        min_trace: scale(min_trace_raw, 2),
        min_det_sq: scale(min_det_sq_raw, 2 * n as i32),
        norm_scale: c,
        exhaustive,
    }
}

fn sampled_spectrum(
    design: &LinearDesign,
    constellation: &Constellation,
    c: f64,
    budget: u64,
    seed: u64,
) -> Result<DifferenceSpectrum> {
    if budget == 0 {
        return invalid("sampled spectrum needs a positive budget");
    }
    let n = design.n();
    let points = constellation.points();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<i32>> = HashSet::new();
    seen.insert(vec![0; design.k_real()]);
    for _ in 0..budget {
        let delta: Vec<i32> = (0..design.num_symbols())
            .flat_map(|_| {
                let a = points[rng.random_range(0..points.len())];
                let b = points[rng.random_range(0..points.len())];
                [a.re - b.re, a.im - b.im]
            })
            .collect();
        seen.insert(delta);
    }

    let integer = design.integer_basis();
    let mut zero_det = 0u64;
    let mut min_trace = f64::INFINITY;
    let mut min_det_sq = f64::INFINITY;
    for delta in &seen {
        let coords: Vec<f64> = delta.iter().map(|&v| v as f64).collect();
        let dx = design.encode_coords(&coords)?;
        let det_sq = match &integer {
            Some(_) => {
                let g = dx.to_gaussian().expect("integer design yields integer differences");
                let d = gaussian_det(n, &g);
                (d.re * d.re + d.im * d.im) as f64
            }
            None => float_det_sq(&dx),
        };
        let tr = dx.frobenius_sq();
        if tr == 0.0 {
            continue;
        }
        if det_sq == 0.0 {
            zero_det += 1;
        } else {
            min_det_sq = min_det_sq.min(det_sq);
        }
        min_trace = min_trace.min(tr);
    }
    if matches!(design.kind(), DesignKind::Integer { .. }) {
        min_trace = min_trace_search(design, constellation, DEFAULT_TRACE_NODE_BUDGET)?.raw as f64;
    }
    let distinct = seen.len() as u64;
    Ok(DifferenceSpectrum {
        distinct_count: distinct,
        zero_det_count: zero_det,
        zero_det_percent: 100.0 * zero_det as f64 / distinct as f64,
        min_trace: if min_trace.is_finite() { min_trace * c * c } else { f64::NAN },
        min_det_sq: if min_det_sq.is_finite() {
            min_det_sq * c.powi(2 * n as i32)
        } else {
            f64::NAN
        },
        norm_scale: c,
        exhaustive: false,
    })
}

/// Squared determinant magnitude with round-off below `1e-9` of the entry scale
/// treated as zero.
fn float_det_sq(dx: &CMatrix) -> f64 {
    let n = dx.dim() as i32;
    let d = dx.det();
    let entry_scale = dx.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if d.norm() <= 1e-9 * entry_scale.powi(n) {
        0.0
    } else {
        d.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTraceSearch {
    /// Unnormalized minimum of `Σ_k |<Φ_k, Δx>|²`.
    pub raw: u64,
    pub normalized: f64,
    /// Minimizing single-layer difference: `n` real parts then `n` imaginary parts.
    pub argmin: Vec<i64>,
    pub nodes: u64,
}

/// Normalized minimum trace of the Integer code.
pub fn normalized_min_trace(design: &LinearDesign, constellation: &Constellation) -> Result<f64> {
    Ok(min_trace_search(design, constellation, DEFAULT_TRACE_NODE_BUDGET)?.normalized)
}

/// Depth-first search for the smallest nonzero single-layer difference energy.
///
/// Each layer occupies one position per row and row `k` weights it by `Φ_k`, with
/// `|γ| = 1`, so the trace of a difference matrix is a sum of independent per-layer
/// quadratic forms `Δxᴴ ΦᵀΦ Δx`; the overall minimum is attained with a single
/// nonzero layer. The 2n real coordinates are searched last-to-first over the
/// Cholesky factor of the block-diagonal Gram matrix, pruning on partial sums.
pub fn min_trace_search(
    design: &LinearDesign,
    constellation: &Constellation,
    node_budget: u64,
) -> Result<MinTraceSearch> {
    let DesignKind::Integer { alpha, .. } = design.kind() else {
        return invalid("layer trace search applies to the integer design only");
    };
    let n = design.n();
    let phi: Vec<Vec<i128>> = (0..n)
        .map(|k| {
            crate::design::circulant_row(n, alpha, k)
                .into_iter()
                .map(|v| v as i128)
                .collect()
        })
        .collect();
    let dim = 2 * n;
    let mut gram = vec![vec![0i128; dim]; dim];
    for i in 0..n {
        for j in 0..n {
            let g: i128 = (0..n).map(|k| phi[k][i] * phi[k][j]).sum();
            gram[i][j] = g;
            gram[n + i][n + j] = g;
        }
    }
    let levels = difference_levels(constellation);
    let r = cholesky_upper(&gram);

    let quad = |a: &[i64]| -> i128 {
        let mut s = 0i128;
        for i in 0..dim {
            for j in 0..dim {
                s += a[i] as i128 * gram[i][j] * a[j] as i128;
            }
        }
        s
    };
    // start from the best scaled unit vector
    let step = levels[levels.len() / 2 + 1];
    let mut best_vec = vec![0i64; dim];
    let mut best = i128::MAX;
    for i in 0..dim {
        let mut a = vec![0i64; dim];
        a[i] = step;
        let v = quad(&a);
        if v < best {
            best = v;
            best_vec = a;
        }
    }

    let mut search = TraceSearch {
        r: &r,
        levels: &levels,
        levels_f: &levels.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        dim,
        current: vec![0i64; dim],
        best,
        best_vec,
        nodes: 0,
        budget: node_budget,
        quad: &quad,
    };
    search.descend(dim, 0.0)?;

    let c = normalize(design, constellation)?;
    let raw = u64::try_from(search.best).map_err(|_| Error::InvalidParameter("trace overflow".into()))?;
    Ok(MinTraceSearch {
        raw,
        normalized: raw as f64 * c * c,
        argmin: search.best_vec,
        nodes: search.nodes,
    })
}

struct TraceSearch<'a, F: Fn(&[i64]) -> i128> {
    r: &'a [Vec<f64>],
    levels: &'a [i64],
    levels_f: &'a [f64],
    dim: usize,
    current: Vec<i64>,
    best: i128,
    best_vec: Vec<i64>,
    nodes: u64,
    budget: u64,
    quad: &'a F,
}

impl<F: Fn(&[i64]) -> i128> TraceSearch<'_, F> {
    fn bound(&self) -> f64 {
        self.best as f64 * (1.0 + 1e-9) + 1e-9
    }

    /// Assigns coordinate `level - 1` given coordinates `level..dim` are fixed.
    fn descend(&mut self, level: usize, partial: f64) -> Result<()> {
        if level == 0 {
            if self.current.iter().any(|&v| v != 0) {
                let v = (self.quad)(&self.current);
                if v < self.best {
                    self.best = v;
                    self.best_vec = self.current.clone();
                }
            }
            return Ok(());
        }
        let i = level - 1;
        let rii = self.r[i][i];
        let offset: f64 = (i + 1..self.dim)
            .map(|j| self.r[i][j] * self.current[j] as f64)
            .sum();
        let center = -offset / rii;
        let (levels, levels_f) = (self.levels, self.levels_f);
        for v in zigzag_indices(levels_f, center).map(|t| levels[t]) {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded(format!(
                    "trace search visited more than {} nodes",
                    self.budget
                )));
            }
            let t = rii * v as f64 + offset;
            let p = partial + t * t;
            if p > self.bound() {
                break;
            }
            self.current[i] = v;
            self.descend(i, p)?;
        }
        self.current[i] = 0;
        Ok(())
    }
}

/// Upper-triangular `R` with `RᵀR = A` for a positive definite integer matrix.
#[allow(clippy::needless_range_loop)]
fn cholesky_upper(a: &[Vec<i128>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut r = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let mut s = a[i][j] as f64;
            for p in 0..i {
                s -= r[p][i] * r[p][j];
            }
            if i == j {
                r[i][i] = s.max(0.0).sqrt();
            } else {
                r[i][j] = s / r[i][i];
            }
        }
    }
    r
}

/// Raw Gaussian-integer determinant of an integer-design difference matrix.
pub fn exact_difference_det(design: &LinearDesign, delta: &[i64]) -> Result<Complex<i128>> {
    let coords: Vec<f64> = delta.iter().map(|&v| v as f64).collect();
    let dx = design.encode_coords(&coords)?;
    let g = dx
        .to_gaussian()
        .ok_or_else(|| Error::InvalidParameter("design is not integer valued".into()))?;
    Ok(gaussian_det(design.n(), &g))
}
