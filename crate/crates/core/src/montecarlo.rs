//! Codeword-error-rate measurement over the quasi-static Rayleigh channel.
//!
//! Trial `t` of every grid point uses the stream `trial_rng(seed, t)`: symbols,
//! channel and unit noise are drawn in that order and only the noise scale depends
//! on the operating point. Trials run in fixed-size chunks; a point stops at the
//! first chunk boundary where the error target is met, so results do not depend on
//! how many workers evaluate the chunks.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::channel::{operating_point, sample_channel, transmit, trial_rng};
use crate::constellation::{make_qam, Constellation};
use crate::decoder::{ml_decode_exhaustive, sphere_decode, DetectionProblem};
use crate::design::{alamouti_design, golden_design, integer_design, normalize, Codeword, LinearDesign};
use crate::error::{invalid, Error, Result};
use crate::fixedpoint::QuantizedEncoder;
use crate::metrics::code_papr;

const CHUNK_TRIALS: u64 = 64;
const CHUNKS_PER_BATCH: u64 = 16;
/// Largest per-trial hypothesis count accepted for exhaustive decoding in a simulation.
pub const MAX_SIM_EXHAUSTIVE_HYPOTHESES: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignId {
    Integer,
    Alamouti,
    Golden,
}

impl DesignId {
    pub fn build(self, n: usize, m: u32) -> Result<LinearDesign> {
        match self {
            DesignId::Integer => integer_design(n, m),
            DesignId::Alamouti | DesignId::Golden if n != 2 => {
                invalid(format!("{self} is a 2x2 design, got n = {n}"))
            }
            DesignId::Alamouti => Ok(alamouti_design()),
            DesignId::Golden => Ok(golden_design()),
        }
    }
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignId::Integer => "ic",
            DesignId::Alamouti => "alamouti",
            DesignId::Golden => "golden",
        })
    }
}

impl FromStr for DesignId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ic" | "integer" => Ok(DesignId::Integer),
            "alamouti" => Ok(DesignId::Alamouti),
            "golden" | "gc" => Ok(DesignId::Golden),
            other => invalid(format!("unknown code {other:?} (expected ic, alamouti or golden)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Snr,
    Psnr,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Snr => "snr",
            Axis::Psnr => "psnr",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "snr" => Ok(Axis::Snr),
            "psnr" => Ok(Axis::Psnr),
            other => invalid(format!("unknown axis {other:?} (expected snr or psnr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Exhaustive,
    Sphere,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Exhaustive => "exhaustive",
            DecoderKind::Sphere => "sphere",
        })
    }
}

impl FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exhaustive" | "ml" => Ok(DecoderKind::Exhaustive),
            "sphere" | "sd" => Ok(DecoderKind::Sphere),
            other => invalid(format!("unknown decoder {other:?} (expected exhaustive or sphere)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Exact,
    Quantized { q: u32 },
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderKind::Exact => f.write_str("exact"),
            EncoderKind::Quantized { q } => write!(f, "q={q}"),
        }
    }
}

impl FromStr for EncoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "exact" {
            return Ok(EncoderKind::Exact);
        }
        match s.strip_prefix("q=").map(str::parse::<u32>) {
            Some(Ok(q)) => Ok(EncoderKind::Quantized { q }),
            _ => invalid(format!("unknown encoder {s:?} (expected exact or q=<bits>)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub design: DesignId,
    pub m: u32,
    pub n: usize,
    /// Operating points in dB, strictly increasing.
    pub snr_db: Vec<f64>,
    pub axis: Axis,
    pub decoder: DecoderKind,
    pub encoder: EncoderKind,
    pub seed: u64,
    pub max_trials: u64,
    pub target_errors: u64,
    pub confidence: f64,
}

impl SimConfig {
    pub fn new(design: DesignId, n: usize, m: u32, snr_db: Vec<f64>) -> Self {
        SimConfig {
            design,
            m,
            n,
            snr_db,
            axis: Axis::Snr,
            decoder: DecoderKind::Sphere,
            encoder: EncoderKind::Exact,
            seed: 0,
            max_trials: 1_000_000,
            target_errors: 100,
            confidence: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return invalid("empty SNR grid");
        }
        if self.snr_db.iter().any(|v| !v.is_finite()) {
            return invalid("SNR grid contains a non-finite value");
        }
        if self.snr_db.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("SNR grid must be strictly increasing");
        }
        if self.max_trials == 0 {
            return invalid("max_trials must be positive");
        }
        if self.target_errors == 0 {
            return invalid("target_errors must be positive");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return invalid(format!("confidence must lie in (0, 1), got {}", self.confidence));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub snr_db: f64,
    pub axis: Axis,
    pub trials: u64,
    pub errors: u64,
    pub cer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub noise_sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Code PAPR (linear) used for the PSNR conversion.
    pub eta: f64,
    pub eta_db: f64,
    pub points: Vec<SimPoint>,
}

impl SimResult {
    pub const CSV_HEADER: &'static str = "snr_db,axis,trials,errors,cer,ci_low,ci_high";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e}\n",
                p.snr_db, p.axis, p.trials, p.errors, p.cer, p.ci_low, p.ci_high
            ));
        }
        out
    }
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let nt = trials as f64;
    let p = errors as f64 / nt;
    let z2 = z * z;
    let denom = 1.0 + z2 / nt;
    let center = (p + z2 / (2.0 * nt)) / denom;
    let half = z / denom * (p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Everything a trial needs, built once per run.
struct Link {
    design: LinearDesign,
    constellation: Constellation,
    norm_scale: f64,
    quantizer: Option<QuantizedEncoder>,
    decoder: DecoderKind,
    seed: u64,
}

impl Link {
    fn new(cfg: &SimConfig) -> Result<Link> {
        let design = cfg.design.build(cfg.n, cfg.m)?;
        let constellation = make_qam(cfg.m)?;
        let norm_scale = normalize(&design, &constellation)?;
        if cfg.decoder == DecoderKind::Exhaustive {
            let space = (constellation.side() as u64).checked_pow(design.k_real() as u32);
            if space.is_none_or(|s| s > MAX_SIM_EXHAUSTIVE_HYPOTHESES) {
                return Err(Error::BudgetExceeded(format!(
                    "exhaustive decoding of {} over {}-QAM is infeasible; use the sphere decoder",
                    design.name(),
                    constellation.len()
                )));
            }
        }
        let quantizer = match cfg.encoder {
            EncoderKind::Exact => None,
            EncoderKind::Quantized { q } => Some(QuantizedEncoder::new(&design, &constellation, q)?),
        };
        Ok(Link {
            design,
            constellation,
            norm_scale,
            quantizer,
            decoder: cfg.decoder,
            seed: cfg.seed,
        })
    }

    /// Runs one trial; true on a codeword error.
    fn trial(&self, t: u64, sigma2: f64) -> Result<bool> {
        let mut rng = trial_rng(self.seed, t);
        let points = self.constellation.points();
        let symbols: Vec<Complex64> = (0..self.design.num_symbols())
            .map(|_| points[rng.random_range(0..points.len())].to_complex())
            .collect();
        let sent: Vec<usize> = symbols
            .iter()
            .flat_map(|s| [s.re, s.im])
            .map(|v| self.constellation.level_index(v as i32).expect("constellation level"))
            .collect();
        let codeword = match &self.quantizer {
            None => Codeword {
                entries: self.design.encode_coords(&crate::design::symbol_coords(&symbols))?,
                norm_scale: 1.0,
            },
            Some(enc) => enc.encode(&symbols)?,
        }
        .normalized(self.norm_scale);

        let ch = sample_channel(self.design.n(), sigma2, &mut rng)?;
        let y = transmit(&codeword, &ch, &mut rng)?;
        let problem =
            DetectionProblem::for_design(&self.design, &self.constellation, self.norm_scale, &ch.h, &y)?;
        let detected = match self.decoder {
            DecoderKind::Exhaustive => ml_decode_exhaustive(&problem)?,
            DecoderKind::Sphere => sphere_decode(&problem, None)?,
        };
        Ok(detected.indices != sent)
    }

    fn chunk_errors(&self, start: u64, end: u64, sigma2: f64) -> Result<u64> {
        let mut errors = 0;
        for t in start..end {
            errors += self.trial(t, sigma2)? as u64;
        }
        Ok(errors)
    }
}

fn run_point(link: &Link, cfg: &SimConfig, sigma2: f64) -> Result<(u64, u64)> {
    let mut trials = 0u64;
    let mut errors = 0u64;
    while errors < cfg.target_errors && trials < cfg.max_trials {
        let chunks: Vec<(u64, u64)> = (0..CHUNKS_PER_BATCH)
            .map(|i| trials + i * CHUNK_TRIALS)
            .take_while(|&s| s < cfg.max_trials)
            .map(|s| (s, (s + CHUNK_TRIALS).min(cfg.max_trials)))
            .collect();
        let counts = chunks
            .par_iter()
            .map(|&(s, e)| link.chunk_errors(s, e, sigma2))
            .collect::<Result<Vec<u64>>>()?;
        for (&(_, end), c) in chunks.iter().zip(counts) {
            trials = end;
            errors += c;
            if errors >= cfg.target_errors {
                break;
            }
        }
    }
    Ok((trials, errors))
}

/// Measures CER at every grid point of `cfg` on the current rayon pool.
pub fn run_cer(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let link = Link::new(cfg)?;
    let eta = code_papr(&link.design, &link.constellation)?.ratio;
    let p_s = 1.0 / cfg.n as f64;
    let mut points = Vec::with_capacity(cfg.snr_db.len());
    for &snr in &cfg.snr_db {
        let sigma2 = operating_point(p_s, snr, eta, cfg.axis == Axis::Psnr)?;
        let (trials, errors) = run_point(&link, cfg, sigma2)?;
        let (ci_low, ci_high) = wilson_interval(errors, trials, cfg.confidence);
        points.push(SimPoint {
            snr_db: snr,
            axis: cfg.axis,
            trials,
            errors,
            cer: errors as f64 / trials as f64,
            ci_low,
            ci_high,
            noise_sigma2: sigma2,
        });
    }
    Ok(SimResult {
        config: cfg.clone(),
        eta,
        eta_db: 10.0 * eta.log10(),
        points,
    })
}

/// [`run_cer`] on a dedicated pool of `workers` threads.
pub fn run_cer_with_workers(cfg: &SimConfig, workers: usize) -> Result<SimResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_cer(cfg))
}

/// The exact-encoder curve followed by one quantized curve per entry of `q_list`.
pub fn run_quantization_sweep(base: &SimConfig, q_list: &[u32]) -> Result<Vec<SimResult>> {
    let mut out = Vec::with_capacity(q_list.len() + 1);
    let mut exact = base.clone();
    exact.encoder = EncoderKind::Exact;
    out.push(run_cer(&exact)?);
    for &q in q_list {
        let mut cfg = base.clone();
        cfg.encoder = EncoderKind::Quantized { q };
        out.push(run_cer(&cfg)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(30, 1000, 0.95);
        assert!(lo < 0.03 && 0.03 < hi);
        assert!((lo - 0.02107).abs() < 1e-4, "{lo}");
        assert!((hi - 0.04258).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson_interval(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(DesignId::Integer, 2, 2, vec![0.0, 5.0]);
        assert!(c.validate().is_ok());
        c.snr_db = vec![5.0, 5.0];
        assert!(c.validate().is_err());
        c.snr_db = vec![];
        assert!(c.validate().is_err());
        c.snr_db = vec![1.0];
        c.max_trials = 0;
        assert!(run_cer(&c).is_err());
    }

    #[test]
    fn exhaustive_decoder_infeasible_for_large_codes() {
        let mut c = SimConfig::new(DesignId::Integer, 4, 2, vec![10.0]);
        c.decoder = DecoderKind::Exhaustive;
        assert!(run_cer(&c).unwrap_err().is_budget());
    }

    #[test]
    fn parse_round_trips() {
        for s in ["ic", "alamouti", "golden"] {
            assert_eq!(s.parse::<DesignId>().unwrap().to_string(), s);
        }
        assert_eq!("q=5".parse::<EncoderKind>().unwrap(), EncoderKind::Quantized { q: 5 });
        assert_eq!("exact".parse::<EncoderKind>().unwrap(), EncoderKind::Exact);
        assert!("q=x".parse::<EncoderKind>().is_err());
        assert_eq!("PSNR".parse::<Axis>().unwrap(), Axis::Psnr);
        assert!("golden".parse::<DesignId>().unwrap().build(3, 2).is_err());
    }

    #[test]
    fn noiseless_link_makes_no_errors() {
        let mut c = SimConfig::new(DesignId::Integer, 2, 2, vec![60.0]);
        c.max_trials = 1000;
        c.seed = 11;
        let r = run_cer(&c).unwrap();
        assert_eq!(r.points[0].trials, 1000);
        assert_eq!(r.points[0].errors, 0);
    }

    #[test]
    fn csv_has_expected_columns() {
        let mut c = SimConfig::new(DesignId::Alamouti, 2, 2, vec![0.0]);
        c.max_trials = 64;
        let r = run_cer(&c).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), SimResult::CSV_HEADER);
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
    }
}
