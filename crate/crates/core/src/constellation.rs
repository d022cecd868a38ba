//! Square QAM constellations with odd integer coordinates.
//!
//! Points are kept as exact integer pairs. The label of a point is the per-axis
//! reflected Gray code of its level index, with the high `m/2` bits selecting the
//! in-phase level and the low `m/2` bits the quadrature level.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_BITS_PER_SYMBOL: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QamPoint {
    pub re: i32,
    pub im: i32,
}

impl QamPoint {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }

    pub fn norm_sqr(self) -> i64 {
        let (a, b) = (self.re as i64, self.im as i64);
        a * a + b * b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    m: u32,
    /// Levels per axis, `2^{m/2}`.
    side: u32,
    /// Indexed by label.
    points: Vec<QamPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Papr {
    pub ratio: f64,
    pub db: f64,
}

impl Papr {
    pub fn from_ratio(ratio: f64) -> Self {
        Papr {
            ratio,
            db: 10.0 * ratio.log10(),
        }
    }
}

fn gray(t: u32) -> u32 {
    t ^ (t >> 1)
}

fn gray_inverse(mut g: u32) -> u32 {
    let mut t = g;
    while g > 0 {
        g >>= 1;
        t ^= g;
    }
    t
}

/// Builds the square `2^m`-QAM with odd coordinates in `[-(2^{m/2}-1), 2^{m/2}-1]`.
pub fn make_qam(m: u32) -> Result<Constellation> {
    if m == 0 || !m.is_multiple_of(2) {
        return invalid(format!("bits per symbol must be even and positive, got {m}"));
    }
    if m > MAX_BITS_PER_SYMBOL {
        return invalid(format!(
            "bits per symbol {m} beyond supported maximum {MAX_BITS_PER_SYMBOL}"
        ));
    }
    let half = m / 2;
    let side = 1u32 << half;
    let level = |t: u32| 2 * t as i32 - (side as i32 - 1);
    let mut points = vec![QamPoint { re: 0, im: 0 }; 1 << m];
    for t_re in 0..side {
        for t_im in 0..side {
            let label = (gray(t_re) << half) | gray(t_im);
            points[label as usize] = QamPoint {
                re: level(t_re),
                im: level(t_im),
            };
        }
    }
    Ok(Constellation { m, side, points })
}

impl Constellation {
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Levels per axis.
    pub fn side(&self) -> u32 {
        self.side
    }

    /// Largest coordinate magnitude, `2^{m/2} - 1`.
    pub fn max_coordinate(&self) -> i32 {
        self.side as i32 - 1
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[QamPoint] {
        &self.points
    }

    pub fn complex_points(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.to_complex()).collect()
    }

    pub fn point(&self, label: u32) -> Option<QamPoint> {
        self.points.get(label as usize).copied()
    }

    /// Sorted per-axis coordinate alphabet.
    pub fn axis_levels(&self) -> Vec<i32> {
        (0..self.side)
            .map(|t| 2 * t as i32 - (self.side as i32 - 1))
            .collect()
    }

    fn axis_index(&self, coord: i32) -> Option<u32> {
        let shifted = coord + self.side as i32 - 1;
        if shifted < 0 || shifted % 2 != 0 {
            return None;
        }
        let t = (shifted / 2) as u32;
        (t < self.side).then_some(t)
    }

    pub fn label_of(&self, p: QamPoint) -> Option<u32> {
        let t_re = self.axis_index(p.re)?;
        let t_im = self.axis_index(p.im)?;
        Some((gray(t_re) << (self.m / 2)) | gray(t_im))
    }

    /// Exact membership test for a complex value.
    pub fn point_of(&self, z: Complex64) -> Result<QamPoint> {
        let bound = self.side as f64;
        if z.re.fract() != 0.0 || z.im.fract() != 0.0 || z.re.abs() >= bound || z.im.abs() >= bound
        {
            return Err(Error::SymbolNotInConstellation);
        }
        let p = QamPoint {
            re: z.re as i32,
            im: z.im as i32,
        };
        self.label_of(p)
            .map(|_| p)
            .ok_or(Error::SymbolNotInConstellation)
    }

    /// Level index along one axis of a coordinate, if it is a valid level.
    pub fn level_index(&self, coord: i32) -> Option<usize> {
        self.axis_index(coord).map(|t| t as usize)
    }

    /// Inverse of the per-axis Gray code: level index of the label bits on one axis.
    pub fn label_levels(&self, label: u32) -> (u32, u32) {
        let half = self.m / 2;
        let mask = (1 << half) - 1;
        (gray_inverse(label >> half), gray_inverse(label & mask))
    }

    /// Average symbol energy `2(2^m - 1)/3`, an integer for even `m`.
    pub fn energy_exact(&self) -> u64 {
        2 * ((1u64 << self.m) - 1) / 3
    }

    pub fn energy(&self) -> f64 {
        self.energy_exact() as f64
    }

    pub fn peak_energy(&self) -> u64 {
        let c = self.max_coordinate() as u64;
        2 * c * c
    }
}

/// Peak-to-average power ratio of a finite point set.
pub fn set_papr(points: &[Complex64]) -> Result<Papr> {
    if points.is_empty() {
        return invalid("PAPR of an empty point set");
    }
    let (peak, sum) = points.iter().fold((0.0f64, 0.0), |(pk, s), p| {
        let e = p.norm_sqr();
        (pk.max(e), s + e)
    });
    if sum == 0.0 {
        return invalid("PAPR of an all-zero point set");
    }
    Ok(Papr::from_ratio(peak / (sum / points.len() as f64)))
}
