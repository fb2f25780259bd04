//! Received-signal synthesis: dechirped FMCW beat signals and convolution of
//! arbitrary transmit waveforms with a channel impulse response.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;

use crate::channel::{assemble_cir, ChannelError, ChannelImpulseResponse, ChannelModel};
use crate::coherence::FramePaths;
use crate::scene::{AntennaPattern, RadarPose};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq)]
pub enum WaveformError {
    InvalidConfig(&'static str),
    /// A tap arrives after the chirp has ended.
    DelayExceedsChirp { delay: f64, chirp_duration: f64 },
    PoseCount { frames: usize, expected: usize, got: usize },
    Channel(ChannelError),
}

impl fmt::Display for WaveformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveformError::InvalidConfig(m) => write!(f, "invalid FMCW configuration: {m}"),
            WaveformError::DelayExceedsChirp { delay, chirp_duration } => write!(
                f,
                "tap delay {delay:e} s is not shorter than the chirp duration {chirp_duration:e} s"
            ),
            WaveformError::PoseCount { frames, expected, got } => {
                write!(f, "frame {frames} carries {got} pose path sets, expected {expected}")
            }
            WaveformError::Channel(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for WaveformError {}

impl From<ChannelError> for WaveformError {
    fn from(e: ChannelError) -> Self {
        WaveformError::Channel(e)
    }
}

/// Linear FMCW chirp train parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmcwConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub adc_rate_hz: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    pub frame_interval_s: f64,
    /// Start-to-start chirp spacing; `None` means back-to-back chirps.
    pub chirp_interval_s: Option<f64>,
    /// Keep the residual video phase `−πSτ²` in the beat signal.
    pub residual_video_phase: bool,
}

impl Default for FmcwConfig {
    /// 77 GHz, 1 GHz sweep over 50 µs, 256 samples at 5.12 MHz.
    fn default() -> Self {
        FmcwConfig {
            carrier_hz: 77e9,
            bandwidth_hz: 1e9,
            chirp_duration_s: 50e-6,
            adc_rate_hz: 5.12e6,
            samples_per_chirp: 256,
            chirps_per_frame: 1,
            frame_interval_s: 0.05,
            chirp_interval_s: None,
            residual_video_phase: true,
        }
    }
}

impl FmcwConfig {
    /// Sweep slope `S = B/T_c` (Hz/s).
    pub fn slope(&self) -> f64 {
        self.bandwidth_hz / self.chirp_duration_s
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn chirp_interval(&self) -> f64 {
        self.chirp_interval_s.unwrap_or(self.chirp_duration_s)
    }

    /// One-way range resolution `c/(2B)`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.carrier_hz) {
            return Err(WaveformError::InvalidConfig("carrier must be positive"));
        }
        if !positive(self.bandwidth_hz) {
            return Err(WaveformError::InvalidConfig("bandwidth must be positive"));
        }
        if !positive(self.chirp_duration_s) {
            return Err(WaveformError::InvalidConfig("chirp duration must be positive"));
        }
        if !positive(self.adc_rate_hz) {
            return Err(WaveformError::InvalidConfig("ADC rate must be positive"));
        }
        if self.samples_per_chirp == 0 || self.chirps_per_frame == 0 {
            return Err(WaveformError::InvalidConfig("sample and chirp counts must be positive"));
        }
        let window = self.adc_rate_hz * self.chirp_duration_s;
        if self.samples_per_chirp as f64 > window * (1.0 + 1e-12) {
            return Err(WaveformError::InvalidConfig("samples per chirp exceed ADC rate times chirp duration"));
        }
        let ci = self.chirp_interval();
        if !positive(ci) || ci < self.chirp_duration_s {
            return Err(WaveformError::InvalidConfig("chirp interval must be at least the chirp duration"));
        }
        if !positive(self.frame_interval_s) || self.frame_interval_s < ci * self.chirps_per_frame as f64 * (1.0 - 1e-12) {
            return Err(WaveformError::InvalidConfig("frame interval is shorter than its chirps"));
        }
        Ok(())
    }
}

/// Uniformly sampled complex baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    /// Time of the first sample (s).
    pub t0: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        ComplexSignal {
            samples,
            sample_rate,
            t0: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Dechirped beat signal of one chirp.
///
/// `s[n] = Σ_k g_k · exp(j2π(S τ_k t_n − ½ S τ_k²))` with `t_n = n/f_adc`.
/// The tap gain `g_k` already carries the carrier phase `−2π f_c τ_k`
/// (see [`ChannelModel::path_parameters`]); it is used as is and the carrier
/// term is never added here. The `−½Sτ²` term is dropped when
/// `residual_video_phase` is off.
pub fn beat_signal(cir: &ChannelImpulseResponse, cfg: &FmcwConfig) -> Result<ComplexSignal, WaveformError> {
    let mut samples = vec![Complex64::new(0.0, 0.0); cfg.samples_per_chirp];
    beat_into(cir, cfg, &mut samples)?;
    Ok(ComplexSignal::new(samples, cfg.adc_rate_hz))
}

fn beat_into(cir: &ChannelImpulseResponse, cfg: &FmcwConfig, out: &mut [Complex64]) -> Result<(), WaveformError> {
    let s = cfg.slope();
    for tap in &cir.taps {
        if !(tap.delay < cfg.chirp_duration_s) {
            return Err(WaveformError::DelayExceedsChirp {
                delay: tap.delay,
                chirp_duration: cfg.chirp_duration_s,
            });
        }
        let fb = s * tap.delay;
        let rvp = if cfg.residual_video_phase {
            -PI * s * tap.delay * tap.delay
        } else {
            0.0
        };
        let g = tap.gain * Complex64::from_polar(1.0, rvp);
        for (n, o) in out.iter_mut().enumerate() {
            // fb·t_n in cycles, reduced before scaling by 2π
            let cycles = fb * n as f64 / cfg.adc_rate_hz;
            let frac = cycles - libm::floor(cycles);
            *o += g * Complex64::from_polar(1.0, 2.0 * PI * frac);
        }
    }
    Ok(())
}

/// Kaiser-windowed sinc fractional-delay interpolator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincInterpolator {
    /// Kernel half-width in input samples.
    pub half_width: usize,
    pub beta: f64,
}

impl Default for SincInterpolator {
    fn default() -> Self {
        SincInterpolator {
            half_width: 32,
            beta: 12.0,
        }
    }
}

impl SincInterpolator {
    fn kernel(&self, x: f64) -> f64 {
        let h = self.half_width as f64;
        if x.abs() >= h {
            return 0.0;
        }
        let sinc = if x == 0.0 { 1.0 } else { libm::sin(PI * x) / (PI * x) };
        let u = x / h;
        sinc * bessel_i0(self.beta * libm::sqrt(1.0 - u * u)) / bessel_i0(self.beta)
    }

    /// Value of the band-limited reconstruction of `x` at fractional index `pos`.
    pub fn sample(&self, x: &[Complex64], pos: f64) -> Complex64 {
        let base = libm::floor(pos);
        let frac = pos - base;
        let base = base as i64;
        if frac == 0.0 {
            return usize::try_from(base)
                .ok()
                .and_then(|i| x.get(i).copied())
                .unwrap_or_default();
        }
        let h = self.half_width as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in (base - h + 1).max(0)..=(base + h).min(x.len() as i64 - 1) {
            acc += x[i as usize] * self.kernel(pos - i as f64);
        }
        acc
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Pass `tx` through the channel: `rx(t) = Σ_k g_k · tx(t − τ_k)`, sampled at
/// `rx_rate` from `tx.t0`. The output spans the transmit duration plus the
/// largest delay.
pub fn apply_cir(
    tx: &ComplexSignal,
    cir: &ChannelImpulseResponse,
    rx_rate: f64,
    interpolator: &SincInterpolator,
) -> ComplexSignal {
    let span = tx.duration() + cir.max_delay();
    let n = libm::ceil(span * rx_rate - 1e-9).max(0.0) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for tap in &cir.taps {
        for (m, o) in out.iter_mut().enumerate() {
            let pos = (m as f64 / rx_rate - tap.delay) * tx.sample_rate;
            // snap positions within rounding noise of a sample
            let r = libm::round(pos);
            let pos = if (pos - r).abs() < 1e-9 { r } else { pos };
            *o += tap.gain * interpolator.sample(&tx.samples, pos);
        }
    }
    ComplexSignal {
        samples: out,
        sample_rate: rx_rate,
        t0: tx.t0,
    }
}

/// Complex samples indexed `[pose][frame][chirp][sample]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCube {
    pub poses: usize,
    pub frames: usize,
    pub chirps: usize,
    pub samples: usize,
    pub data: Vec<Complex64>,
}

impl SignalCube {
    pub fn zeros(poses: usize, frames: usize, chirps: usize, samples: usize) -> Self {
        SignalCube {
            poses,
            frames,
            chirps,
            samples,
            data: vec![Complex64::new(0.0, 0.0); poses * frames * chirps * samples],
        }
    }

    fn offset(&self, pose: usize, frame: usize, chirp: usize) -> usize {
        ((pose * self.frames + frame) * self.chirps + chirp) * self.samples
    }

    pub fn chirp(&self, pose: usize, frame: usize, chirp: usize) -> &[Complex64] {
        let o = self.offset(pose, frame, chirp);
        &self.data[o..o + self.samples]
    }

    pub fn chirp_mut(&mut self, pose: usize, frame: usize, chirp: usize) -> &mut [Complex64] {
        let o = self.offset(pose, frame, chirp);
        &mut self.data[o..o + self.samples]
    }
}

/// Antenna patterns and channel settings shared by a simulation.
#[derive(Debug, Clone)]
pub struct RadarFrontEnd<'a> {
    pub model: &'a ChannelModel,
    pub tx_pattern: &'a AntennaPattern,
    pub rx_pattern: &'a AntennaPattern,
    pub prune_floor: f64,
}

/// CIRs (frame-major, then pose) and the signal cube of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub cirs: Vec<ChannelImpulseResponse>,
    pub cube: SignalCube,
}

/// CIR of one (frame, pose) pair.
pub fn frame_cir(
    frame: &FramePaths,
    pose_index: usize,
    pose: &RadarPose,
    front: &RadarFrontEnd<'_>,
) -> Result<ChannelImpulseResponse, WaveformError> {
    let taps = frame.poses[pose_index]
        .paths
        .iter()
        .map(|w| front.model.path_parameters(&w.path, w.weight, pose))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_cir(
        taps,
        front.tx_pattern,
        front.rx_pattern,
        front.prune_floor,
        front.model.carrier_hz(),
        frame.frame,
        pose_index,
    ))
}

/// Beat signals for every (pose, frame, chirp). Each frame's scene is frozen
/// for all of its chirps, so chirps within a frame are identical.
pub fn simulate_frame_sequence(
    frames: &[FramePaths],
    poses: &[RadarPose],
    cfg: &FmcwConfig,
    front: &RadarFrontEnd<'_>,
) -> Result<Simulation, WaveformError> {
    cfg.validate()?;
    for f in frames {
        if f.poses.len() != poses.len() {
            return Err(WaveformError::PoseCount {
                frames: f.frame,
                expected: poses.len(),
                got: f.poses.len(),
            });
        }
    }
    let jobs = frames.len() * poses.len();
    let one = |job: usize| -> Result<(ChannelImpulseResponse, ComplexSignal), WaveformError> {
        let (fi, pi) = (job / poses.len(), job % poses.len());
        let cir = frame_cir(&frames[fi], pi, &poses[pi], front)?;
        let sig = beat_signal(&cir, cfg)?;
        Ok((cir, sig))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..jobs).into_par_iter().map(one).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..jobs).map(one).collect::<Result<_, _>>()?;

    let mut cube = SignalCube::zeros(poses.len(), frames.len(), cfg.chirps_per_frame, cfg.samples_per_chirp);
    let mut cirs = Vec::with_capacity(jobs);
    for (job, (cir, sig)) in results.into_iter().enumerate() {
        let (fi, pi) = (job / poses.len(), job % poses.len());
        for c in 0..cfg.chirps_per_frame {
            cube.chirp_mut(pi, fi, c).copy_from_slice(&sig.samples);
        }
        cirs.push(cir);
    }
    Ok(Simulation { cirs, cube })
}
