//! Coherent ML detection over the real-valued effective lattice.
//!
//! Both detectors minimize `‖y - G s‖²` over `s` drawn coordinate-wise from one
//! finite real alphabet and break exact ties in favour of the lexicographically
//! smallest coordinate vector. The sphere decoder evaluates candidate leaves with
//! the same residual routine as the exhaustive search, so the two agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::design::{effective_channel, stack_real, LinearDesign};
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, RealMatrix};

/// Largest search space accepted by [`ml_decode_exhaustive`].
pub const MAX_EXHAUSTIVE_HYPOTHESES: u64 = 1 << 24;
/// Diagonal loading applied to a singular Gram matrix.
pub const GRAM_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionProblem {
    effective: RealMatrix,
    received: Vec<f64>,
    alphabet: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Alphabet index per real dimension.
    pub indices: Vec<usize>,
    pub coords: Vec<f64>,
    /// `‖y - G s‖²` at the decision.
    pub metric: f64,
    pub visited_nodes: u64,
    /// True when the Gram matrix needed diagonal loading.
    pub regularized: bool,
}

impl DetectionProblem {
    pub fn new(effective: RealMatrix, received: Vec<f64>, alphabet: Vec<f64>) -> Result<Self> {
        if received.len() != effective.rows() {
            return Err(Error::DimensionMismatch {
                expected: effective.rows(),
                got: received.len(),
            });
        }
        if alphabet.is_empty() {
            return invalid("detection alphabet is empty");
        }
        if alphabet.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("detection alphabet must be strictly increasing");
        }
        Ok(DetectionProblem {
            effective,
            received,
            alphabet,
        })
    }

    /// Problem for a received matrix `y` of a design normalized by `norm_scale`.
    pub fn for_design(
        design: &LinearDesign,
        constellation: &Constellation,
        norm_scale: f64,
        h: &CMatrix,
        y: &CMatrix,
    ) -> Result<Self> {
        let g = effective_channel(design, h)?;
        if y.dim() != design.n() {
            return Err(Error::DimensionMismatch {
                expected: design.n(),
                got: y.dim(),
            });
        }
        let alphabet = constellation
            .axis_levels()
            .into_iter()
            .map(|v| v as f64 * norm_scale)
            .collect();
        DetectionProblem::new(g, stack_real(y), alphabet)
    }

    pub fn effective(&self) -> &RealMatrix {
        &self.effective
    }

    pub fn received(&self) -> &[f64] {
        &self.received
    }

    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    pub fn dims(&self) -> usize {
        self.effective.cols()
    }

    pub fn search_space(&self) -> Option<u64> {
        (self.alphabet.len() as u64).checked_pow(self.dims() as u32)
    }

    /// `‖y - G s‖²` for alphabet indices `idx`.
    pub fn residual(&self, idx: &[usize]) -> f64 {
        let g = &self.effective;
        let k = g.cols();
        let data = g.as_slice();
        let mut total = 0.0;
        for (r, yr) in self.received.iter().enumerate() {
            let row = &data[r * k..(r + 1) * k];
            let mut v = *yr;
            for (a, &i) in row.iter().zip(idx) {
                v -= a * self.alphabet[i];
            }
            total += v * v;
        }
        total
    }

    fn detection(&self, indices: Vec<usize>, metric: f64, visited: u64, regularized: bool) -> Detection {
        let coords = indices.iter().map(|&i| self.alphabet[i]).collect();
        Detection {
            indices,
            coords,
            metric,
            visited_nodes: visited,
            regularized,
        }
    }
}

/// Brute-force ML over every alphabet vector, in lexicographic order.
pub fn ml_decode_exhaustive(p: &DetectionProblem) -> Result<Detection> {
    let k = p.dims();
    let size = p.search_space().filter(|&s| s <= MAX_EXHAUSTIVE_HYPOTHESES).ok_or_else(|| {
        Error::BudgetExceeded(format!(
            "{}^{k} hypotheses exceed the exhaustive limit {MAX_EXHAUSTIVE_HYPOTHESES}",
            p.alphabet.len()
        ))
    })?;
    let q = p.alphabet.len();
    let mut idx = vec![0usize; k];
    let mut best = idx.clone();
    let mut best_metric = f64::INFINITY;
    for _ in 0..size {
        let m = p.residual(&idx);
        if m < best_metric {
            best_metric = m;
            best.copy_from_slice(&idx);
        }
        for d in (0..k).rev() {
            idx[d] += 1;
            if idx[d] < q {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(p.detection(best, best_metric, size, false))
}

/// Sorted-order pivoted Cholesky `PᵀAP = RᵀR`, smallest remaining pivot first so the
/// strongest dimensions sit at the root of the search tree.
fn sorted_cholesky(a: &RealMatrix) -> Option<(Vec<usize>, Vec<Vec<f64>>)> {
    let k = a.rows();
    let mut w: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| a[(i, j)]).collect()).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut r = vec![vec![0.0; k]; k];
    for i in 0..k {
        let p = (i..k).min_by(|&x, &y| w[x][x].total_cmp(&w[y][y]))?;
        if p != i {
            w.swap(i, p);
            for row in w.iter_mut() {
                row.swap(i, p);
            }
            perm.swap(i, p);
            for row in r.iter_mut().take(i) {
                row.swap(i, p);
            }
        }
        let d = w[i][i];
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let rii = d.sqrt();
        r[i][i] = rii;
        for j in i + 1..k {
            r[i][j] = w[i][j] / rii;
        }
        for j in i + 1..k {
            for l in i + 1..k {
                w[j][l] -= r[i][j] * r[i][l];
            }
        }
    }
    Some((perm, r))
}

/// Alphabet indices in order of increasing distance from `center`.
pub(crate) fn zigzag_indices(values: &[f64], center: f64) -> impl Iterator<Item = usize> + '_ {
    let split = values.partition_point(|&v| v < center);
    let mut lo = split as isize - 1;
    let mut hi = split;
    std::iter::from_fn(move || {
        let left = (lo >= 0).then_some(lo as usize);
        let right = (hi < values.len()).then_some(hi);
        let pick = match (left, right) {
            (None, None) => return None,
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (Some(l), Some(r)) => {
                if center - values[l] <= values[r] - center {
                    l
                } else {
                    r
                }
            }
        };
        if Some(pick) == left {
            lo -= 1;
        } else {
            hi += 1;
        }
        Some(pick)
    })
}

struct Sphere<'a> {
    p: &'a DetectionProblem,
    perm: Vec<usize>,
    r: Vec<Vec<f64>>,
    center: Vec<f64>,
    offset_const: f64,
    y_energy: f64,
    current: Vec<usize>,
    best: Option<Vec<usize>>,
    best_metric: f64,
    visited: u64,
}

impl Sphere<'_> {
    fn slack(&self) -> f64 {
        1e-9 * (self.best_metric.abs() + self.y_energy + 1.0)
    }

    /// Bound on the triangular metric implied by the best residual so far.
    fn bound(&self) -> f64 {
        if self.best_metric.is_infinite() {
            f64::INFINITY
        } else {
            self.best_metric - self.offset_const + self.slack()
        }
    }

    fn leaf(&mut self) {
        let k = self.current.len();
        let mut idx = vec![0usize; k];
        for (pos, &orig) in self.perm.iter().enumerate() {
            idx[orig] = self.current[pos];
        }
        let m = self.p.residual(&idx);
        let better = match &self.best {
            None => m <= self.best_metric,
            Some(b) => m < self.best_metric || (m == self.best_metric && idx < *b),
        };
        if better {
            self.best_metric = m;
            self.best = Some(idx);
        }
    }

    fn descend(&mut self, level: usize, partial: f64) {
        if level == 0 {
            self.leaf();
            return;
        }
        let i = level - 1;
        let k = self.current.len();
        let rii = self.r[i][i];
        let mut offset = 0.0;
        for j in i + 1..k {
            offset += self.r[i][j] * (self.p.alphabet[self.current[j]] - self.center[j]);
        }
        let c = self.center[i] - offset / rii;
        let alphabet = &self.p.alphabet;
        for a in zigzag_indices(alphabet, c) {
            self.visited += 1;
            let t = rii * (alphabet[a] - c);
            let next = partial + t * t;
            if next > self.bound() {
                break;
            }
            self.current[i] = a;
            self.descend(i, next);
        }
    }
}

/// Depth-first sphere decoder with sorted Cholesky ordering and Schnorr–Euchner
/// child enumeration.
///
/// `initial_radius` bounds `‖y - G s‖`; if the sphere turns out to be empty the
/// search is repeated without a bound.
pub fn sphere_decode(p: &DetectionProblem, initial_radius: Option<f64>) -> Result<Detection> {
    let k = p.dims();
    let g = &p.effective;
    let mut gram = g.gram();
    let mut regularized = false;
    let (perm, r) = match sorted_cholesky(&gram) {
        Some(f) => f,
        None => {
            regularized = true;
            for i in 0..k {
                gram[(i, i)] += GRAM_REGULARIZATION;
            }
            sorted_cholesky(&gram).ok_or(Error::RankDeficient)?
        }
    };

    // unconstrained least-squares point in permuted coordinates
    let b = g.transpose_mul_vec(&p.received);
    let bp: Vec<f64> = perm.iter().map(|&o| b[o]).collect();
    let mut w = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|j| r[j][i] * w[j]).sum();
        w[i] = (bp[i] - s) / r[i][i];
    }
    let mut center = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[i][j] * center[j]).sum();
        center[i] = (w[i] - s) / r[i][i];
    }
    let y_energy: f64 = p.received.iter().map(|v| v * v).sum();
    let offset_const = y_energy - bp.iter().zip(&center).map(|(a, b)| a * b).sum::<f64>();

    let run = |radius: Option<f64>| {
        let mut s = Sphere {
            p,
            perm: perm.clone(),
            r: r.clone(),
            center: center.clone(),
            offset_const,
            y_energy,
            current: vec![0; k],
            best: None,
            best_metric: radius.map_or(f64::INFINITY, |r| r * r),
            visited: 0,
        };
        s.descend(k, 0.0);
        s
    };
    let mut s = run(initial_radius.filter(|r| r.is_finite()));
    let mut visited = s.visited;
    if s.best.is_none() {
        s = run(None);
        visited += s.visited;
    }
    let best = s.best.ok_or(Error::RankDeficient)?;
    Ok(p.detection(best, s.best_metric, visited, regularized))
}
