//! Sub-Nyquist pulse-Doppler radar processing.
//!
//! The toolkit simulates target echoes directly at the Fourier-coefficient
//! level, so a receiver that observes only a small set of spectral samples
//! per pulse can be modeled without ever generating Nyquist-rate data.
//! Recovery runs either through the classic matched-filter pipeline
//! ([`classic`]), through Doppler focusing over compressed samples
//! ([`focusing`]), or through generic sparse solvers ([`cs`]).  Multi-channel
//! (MIMO) scenes with azimuth recovery live in [`mimo`].
//!
//! # Example
//!
//! ```
//! use num_complex::Complex64;
//! use subrad_core::model::{RadarParams, Target, TargetScene};
//! use subrad_core::synth::{fourier_coeffs, BandSelection, PulseSchedule};
//! use subrad_core::waveforms::PulseSpectrum;
//! use subrad_core::focusing::{recover_focused, RecoverOptions};
//!
//! let params = RadarParams::new(1.0, 100.0, 1.0e10, 10).unwrap();
//! let scene = TargetScene::new(vec![
//!     Target::on_grid(42, 3, &params, Complex64::new(1.0, 0.0)),
//! ]).unwrap();
//! let spectrum = PulseSpectrum::flat(params.num_nyquist_bins);
//! let schedule = PulseSchedule::uniform(params.num_pulses);
//! let kappa = BandSelection::random(8, params.num_nyquist_bins, 7);
//! let xamples = fourier_coeffs(&scene, &params, &spectrum, &schedule, &kappa).unwrap();
//! let result = recover_focused(&xamples, &spectrum, 1, &RecoverOptions::default()).unwrap();
//! assert_eq!(result.detections[0].delay_bin, 42);
//! assert_eq!(result.detections[0].doppler_bin, 3);
//! ```

pub mod classic;
pub mod cs;
mod dft;
mod error;
pub mod focusing;
pub mod io;
pub mod mimo;
pub mod model;
pub mod synth;
pub mod waveforms;

pub use error::{Error, Result};
