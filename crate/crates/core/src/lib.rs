//! Integer space-time block codes for MIMO links.
//!
//! The crate builds the Integer STBC family (full-rate codes whose dispersion
//! coefficients are powers of `α = 2^{m/2}` and the unit `i`), plus the Alamouti and
//! Golden reference designs, and provides everything needed to evaluate them:
//!
//! * [`constellation`]: square QAM alphabets with odd integer coordinates and Gray labels.
//! * [`design`]: real-linear dispersion designs, encoding, power normalization and the
//!   effective real channel used by the detectors.
//! * [`fixedpoint`]: a q-bit fixed-point encoder model and minimum bit widths.
//! * [`metrics`]: PAPR, difference-matrix spectra and the normalized minimum trace.
//! * [`channel`]: quasi-static Rayleigh fading with AWGN and reproducible random streams.
//! * [`decoder`]: exhaustive ML and sphere decoding over the real effective lattice.
//! * [`montecarlo`]: codeword-error-rate measurement with Wilson confidence intervals.

pub mod channel;
pub mod constellation;
pub mod decoder;
pub mod design;
mod error;
pub mod fixedpoint;
pub mod linalg;
pub mod metrics;
pub mod montecarlo;

pub use channel::{operating_point, sample_channel, transmit, trial_rng, ChannelRealization};
pub use constellation::{make_qam, set_papr, Constellation, Papr, QamPoint};
pub use decoder::{ml_decode_exhaustive, sphere_decode, Detection, DetectionProblem};
pub use design::{
    alamouti_design, effective_channel, encode, golden_design, integer_design, normalize,
    Codeword, DesignKind, LinearDesign,
};
pub use error::{Error, Result};
pub use fixedpoint::{min_bits_integer_code, quantize, quantized_encode, QuantizedEncoder, QuantizerConfig};
pub use linalg::{CMatrix, RealMatrix};
pub use metrics::{
    code_papr, difference_spectrum, normalized_min_trace, papr_qam_closed_form, CodePapr,
    DifferenceSpectrum, SpectrumMode,
};
pub use montecarlo::{
    run_cer, run_cer_with_workers, run_quantization_sweep, Axis, DecoderKind, DesignId,
    EncoderKind, SimConfig, SimPoint, SimResult,
};
