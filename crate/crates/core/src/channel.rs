//! Quasi-static Rayleigh MIMO channel with AWGN.
//!
//! `Y = √(1/n)·H·X + Z`, with `H` and `Z` i.i.d. circularly-symmetric Gaussian
//! (`H_ij ~ CN(0, 1)`, `Z_ij ~ CN(0, σ²)`). One codeword spans one channel
//! realization.
//!
//! Randomness comes from per-trial ChaCha streams: the key is derived from the
//! master seed and the stream id is the trial index, so any trial can be replayed
//! on any worker.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::Codeword;
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;

pub type TrialRng = ChaCha12Rng;

/// Independent, reproducible random stream for one trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Sample of `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h: CMatrix,
    /// Noise variance per complex dimension.
    pub noise_sigma2: f64,
}

pub fn sample_channel<R: Rng + ?Sized>(
    n: usize,
    noise_sigma2: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if n == 0 {
        return invalid("channel needs at least one antenna");
    }
    if !(noise_sigma2 >= 0.0 && noise_sigma2.is_finite()) {
        return invalid(format!("noise variance must be finite and >= 0, got {noise_sigma2}"));
    }
    let h = (0..n * n).map(|_| complex_gaussian(rng, 1.0)).collect();
    Ok(ChannelRealization {
        h: CMatrix::from_rows(n, h),
        noise_sigma2,
    })
}

/// Passes a codeword through the channel. The noise is drawn as unit-variance samples
/// scaled by `σ`, so runs that differ only in `σ²` share their noise shape.
pub fn transmit<R: Rng + ?Sized>(
    x: &Codeword,
    ch: &ChannelRealization,
    rng: &mut R,
) -> Result<CMatrix> {
    let n = ch.h.dim();
    if x.entries.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.entries.dim(),
        });
    }
    let mut y = (&ch.h * &x.entries).scale(1.0 / (n as f64).sqrt());
    let sigma = ch.noise_sigma2.sqrt();
    for r in 0..n {
        for c in 0..n {
            y[(r, c)] += complex_gaussian(rng, 1.0) * sigma;
        }
    }
    Ok(y)
}

/// Noise variance for an operating point.
///
/// SNR axis: `σ² = P_s / SNR`. PSNR axis: `σ² = η·P_s / PSNR`.
pub fn operating_point(p_s: f64, snr_db: f64, eta: f64, use_psnr: bool) -> Result<f64> {
    if !(p_s > 0.0 && p_s.is_finite()) {
        return invalid(format!("signal power must be positive, got {p_s}"));
    }
    if !snr_db.is_finite() {
        return invalid("SNR must be finite");
    }
    if !(eta >= 1.0 && eta.is_finite()) {
        return invalid(format!("PAPR must be >= 1, got {eta}"));
    }
    let linear = 10f64.powf(snr_db / 10.0);
    Ok(if use_psnr {
        eta * p_s / linear
    } else {
        p_s / linear
    })
}
