//! Phase-coherent specular ray tracing for radio-frequency sensing.
//!
//! The crate is `no_std` (with `alloc`) and purely computational:
//!
//! * [`scene`]: materials, meshes, animated frame sequences, radar poses,
//!   antenna patterns.
//! * [`tracer`]: deterministic shoot-and-bounce path search with exact
//!   specular refinement and occlusion queries.
//! * [`coherence`]: path replay across radar poses and vertex-group
//!   expansion across animation frames.
//! * [`channel`]: Fresnel reflection, per-path delay and complex gain,
//!   channel impulse response assembly.
//! * [`waveform`]: FMCW beat-signal synthesis and generic CIR convolution.
//! * [`dsp`]: range/Doppler FFTs, back-projection imaging, phase-based
//!   displacement extraction, RMSE and DTW.
//!
//! Enable the `parallel` feature to spread tracing and synthesis over a
//! rayon thread pool; results do not depend on the thread count.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(any(test, feature = "std"))]
extern crate std;

extern crate alloc;

pub mod geometry;
pub mod scene;
pub mod tracer;
pub mod coherence;
pub mod channel;
pub mod fft;
pub mod waveform;
pub mod dsp;

pub use geometry::{Rotation, Vec3};
pub use num_complex::Complex64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
