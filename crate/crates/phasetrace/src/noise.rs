//! Seeded randomness: receiver noise and the phase-decoherence ablation.
//! Draws are sequential so results do not depend on the thread count.

use std::f64::consts::TAU;

use phasetrace_core::waveform::SignalCube;
use phasetrace_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const NOISE_STREAM: u64 = 1;
const PHASE_STREAM: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Add circular complex white Gaussian noise at `snr_db` relative to the
/// mean sample power of the cube. Returns the noise power per sample
/// (zero for an all-zero cube, which is left untouched).
pub fn add_awgn(cube: &mut SignalCube, snr_db: f64, seed: u64) -> f64 {
    if cube.data.is_empty() {
        return 0.0;
    }
    let power = cube.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / cube.data.len() as f64;
    if power == 0.0 {
        log::warn!("signal cube is all zeros; no noise added");
        return 0.0;
    }
    let noise = power / 10f64.powf(snr_db / 10.0);
    let sigma = (noise / 2.0).sqrt();
    let mut r = rng(seed, NOISE_STREAM);
    for z in cube.data.iter_mut() {
        let re: f64 = r.sample(StandardNormal);
        let im: f64 = r.sample(StandardNormal);
        *z += Complex64::new(re, im) * sigma;
    }
    noise
}

/// One uniform phase in `[0, 2π)` per pose.
pub fn pose_phases(count: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed, PHASE_STREAM);
    (0..count).map(|_| r.random::<f64>() * TAU).collect()
}
