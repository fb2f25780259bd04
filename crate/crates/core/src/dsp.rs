//! Range/Doppler processing, circular-aperture back-projection imaging,
//! phase-based displacement extraction and series comparison metrics.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;

use crate::fft::{fft, fftshift, ifft, Window};
use crate::geometry::Vec3;
use crate::scene::RadarPose;
use crate::waveform::FmcwConfig;
use crate::SPEED_OF_LIGHT;

/// Wrapped phase steps closer than this to ±π are treated as ambiguous.
pub const UNWRAP_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum DspError {
    Empty,
    LengthMismatch { left: usize, right: usize },
    CountMismatch { signals: usize, poses: usize },
    TooFewChirps(usize),
    EmptyGrid,
    /// The phase step into sample `index` cannot be unwrapped (zero sample
    /// or a jump of π or more).
    UnwrapFailure { index: usize },
}

impl fmt::Display for DspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DspError::Empty => write!(f, "input series is empty"),
            DspError::LengthMismatch { left, right } => {
                write!(f, "series lengths differ ({left} vs {right})")
            }
            DspError::CountMismatch { signals, poses } => {
                write!(f, "{signals} signals supplied for {poses} poses")
            }
            DspError::TooFewChirps(n) => write!(f, "Doppler processing needs at least 2 chirps, got {n}"),
            DspError::EmptyGrid => write!(f, "image grid has no points"),
            DspError::UnwrapFailure { index } => write!(f, "phase unwrap failed at sample {index}"),
        }
    }
}

impl core::error::Error for DspError {}

/// Complex range profile of one chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
    /// One-way range per bin (m).
    pub bin_spacing: f64,
}

impl RangeProfile {
    pub fn range_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_spacing
    }

    pub fn peak_bin(&self) -> usize {
        argmax(self.bins.iter().map(|v| v.norm_sqr()))
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Windowed DFT of one chirp, zero-padded to `samples · zero_pad` points.
///
/// Bin `b` sits at beat frequency `b·f_adc/N_fft`, i.e. one-way range
/// `b · f_adc·c/(2·S·N_fft)`. When the ADC fills the whole chirp
/// (`N = f_adc·T_c`) and `zero_pad = 1` this is `b·c/(2B)`.
pub fn range_fft(chirp: &[Complex64], window: Window, zero_pad: usize, cfg: &FmcwConfig) -> RangeProfile {
    let n_fft = chirp.len() * zero_pad.max(1);
    let w = window.coefficients(chirp.len());
    let mut bins = vec![Complex64::new(0.0, 0.0); n_fft];
    for (i, (&x, &wi)) in chirp.iter().zip(&w).enumerate() {
        bins[i] = x * wi;
    }
    fft(&mut bins);
    RangeProfile {
        bins,
        bin_spacing: cfg.adc_rate_hz * SPEED_OF_LIGHT / (2.0 * cfg.slope() * n_fft.max(1) as f64),
    }
}

/// Power over (range bin, velocity bin).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    /// Row-major `[range][velocity]`.
    pub power: Vec<f64>,
    pub range_bins: usize,
    pub velocity_bins: usize,
    pub range_spacing: f64,
    pub velocity_spacing: f64,
}

impl RangeDopplerMap {
    pub fn at(&self, range_bin: usize, velocity_bin: usize) -> f64 {
        self.power[range_bin * self.velocity_bins + velocity_bin]
    }

    /// Radial velocity of a column (m/s, positive receding).
    pub fn velocity_of(&self, bin: usize) -> f64 {
        (bin as f64 - (self.velocity_bins / 2) as f64) * self.velocity_spacing
    }

    /// Column holding zero velocity.
    pub fn zero_velocity_bin(&self) -> usize {
        self.velocity_bins / 2
    }

    /// Strongest (range bin, velocity bin).
    pub fn peak(&self) -> (usize, usize) {
        let i = argmax(self.power.iter().copied());
        (i / self.velocity_bins, i % self.velocity_bins)
    }
}

/// Slow-time DFT of `profiles` (one per chirp, equally spaced by
/// `chirp_interval`), centred on zero velocity.
///
/// Velocity bin spacing is `λ/(2·T_ci·N)`; positive velocities recede from
/// the radar.
pub fn doppler_fft(
    profiles: &[RangeProfile],
    window: Window,
    wavelength: f64,
    chirp_interval: f64,
) -> Result<RangeDopplerMap, DspError> {
    let n = profiles.len();
    if n < 2 {
        return Err(DspError::TooFewChirps(n));
    }
    let range_bins = profiles[0].bins.len();
    if let Some(p) = profiles.iter().find(|p| p.bins.len() != range_bins) {
        return Err(DspError::LengthMismatch {
            left: range_bins,
            right: p.bins.len(),
        });
    }
    let w = window.coefficients(n);
    let mut power = Vec::with_capacity(range_bins * n);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..range_bins {
        for (m, c) in col.iter_mut().enumerate() {
            *c = profiles[m].bins[r] * w[m];
        }
        // receding targets rotate clockwise; the positive kernel maps them
        // to positive bins
        ifft(&mut col);
        let mut row: Vec<f64> = col.iter().map(|v| v.norm_sqr() * (n * n) as f64).collect();
        fftshift(&mut row);
        power.extend(row);
    }
    Ok(RangeDopplerMap {
        power,
        range_bins,
        velocity_bins: n,
        range_spacing: profiles[0].bin_spacing,
        velocity_spacing: wavelength / (2.0 * chirp_interval * n as f64),
    })
}

/// Regular grid of image points `(x0 + i·dx, y0 + j·dy, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    pub z: f64,
}

impl ImageGrid {
    /// `n × n` grid of side `size` centred on `(cx, cy)`.
    pub fn square(cx: f64, cy: f64, z: f64, size: f64, n: usize) -> Self {
        let step = if n > 1 { size / (n - 1) as f64 } else { 0.0 };
        ImageGrid {
            x0: cx - size / 2.0,
            y0: cy - size / 2.0,
            dx: step,
            dy: step,
            nx: n,
            ny: n,
            z,
        }
    }

    pub fn point(&self, i: usize, j: usize) -> Vec3 {
        Vec3::new(self.x0 + i as f64 * self.dx, self.y0 + j as f64 * self.dy, self.z)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid indices of the point nearest to `p` (clamped to the grid).
    pub fn nearest(&self, p: Vec3) -> (usize, usize) {
        let idx = |v: f64, o: f64, d: f64, n: usize| {
            if d == 0.0 {
                0
            } else {
                (libm::round((v - o) / d).max(0.0) as usize).min(n - 1)
            }
        };
        (idx(p.x, self.x0, self.dx, self.nx), idx(p.y, self.y0, self.dy, self.ny))
    }
}

/// Delay-and-sum image: complex sums on a grid, row-major `[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedImage {
    pub grid: ImageGrid,
    pub values: Vec<Complex64>,
}

impl BeamformedImage {
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Grid indices and intensity of the brightest cell.
    pub fn peak(&self) -> (usize, usize, f64) {
        let k = argmax(self.values.iter().map(|v| v.norm_sqr()));
        (k % self.grid.nx, k / self.grid.nx, self.values.get(k).map_or(0.0, |v| v.norm_sqr()))
    }

    /// Peak intensity over the mean intensity of all cells farther than
    /// `exclusion` grid cells from the peak.
    pub fn peak_to_background(&self, exclusion: f64) -> f64 {
        let (pi, pj, peak) = self.peak();
        let (mut sum, mut count) = (0.0, 0usize);
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let di = i as f64 - pi as f64;
                let dj = j as f64 - pj as f64;
                if di * di + dj * dj > exclusion * exclusion {
                    sum += self.values[j * self.grid.nx + i].norm_sqr();
                    count += 1;
                }
            }
        }
        if count == 0 || sum == 0.0 {
            return f64::INFINITY;
        }
        peak / (sum / count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackprojectionOptions {
    /// Zero-padding factor of the range FFT.
    pub upsample: usize,
    pub window: Window,
}

impl Default for BackprojectionOptions {
    fn default() -> Self {
        BackprojectionOptions {
            upsample: 8,
            window: Window::Rectangular,
        }
    }
}

/// Delay-and-sum back-projection of dechirped chirps (one per pose).
///
/// For each grid point `p` and pose `n` with round-trip delay `τ_n(p)`, the
/// zero-padded range profile is linearly interpolated at beat frequency
/// `S·τ_n(p)` and rotated by `exp(+j2π f_c τ_n(p))` (and `exp(+jπSτ²)` when
/// the residual video phase is present) before summation.
pub fn backprojection_image(
    signals: &[&[Complex64]],
    poses: &[RadarPose],
    grid: &ImageGrid,
    cfg: &FmcwConfig,
    options: &BackprojectionOptions,
) -> Result<BeamformedImage, DspError> {
    if signals.len() != poses.len() {
        return Err(DspError::CountMismatch {
            signals: signals.len(),
            poses: poses.len(),
        });
    }
    if grid.is_empty() {
        return Err(DspError::EmptyGrid);
    }
    let profiles: Vec<Vec<Complex64>> = signals
        .iter()
        .map(|s| {
            let n = s.len().max(1) as f64;
            let mut p = range_fft(s, options.window, options.upsample, cfg).bins;
            p.iter_mut().for_each(|v| *v /= n);
            p
        })
        .collect();
    let lambda = cfg.wavelength();
    let slope = cfg.slope();

    let row = |j: usize| -> Vec<Complex64> {
        (0..grid.nx)
            .map(|i| {
                let p = grid.point(i, j);
                let mut acc = Complex64::new(0.0, 0.0);
                for (pose, prof) in poses.iter().zip(&profiles) {
                    let d = pose.tx_position.distance(p) + p.distance(pose.rx_position);
                    let tau = d / SPEED_OF_LIGHT;
                    let n_fft = prof.len();
                    let pos = slope * tau * n_fft as f64 / cfg.adc_rate_hz;
                    let k = libm::floor(pos);
                    if !(k >= 0.0) || k as usize + 1 >= n_fft {
                        continue;
                    }
                    let (k, t) = (k as usize, pos - k);
                    let v = prof[k] * (1.0 - t) + prof[k + 1] * t;
                    let cycles = d / lambda;
                    let mut phase = 2.0 * PI * (cycles - libm::floor(cycles));
                    if cfg.residual_video_phase {
                        phase += PI * slope * tau * tau;
                    }
                    acc += v * Complex64::from_polar(1.0, phase);
                }
                acc
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<Complex64>> = {
        use rayon::prelude::*;
        (0..grid.ny).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<Complex64>> = (0..grid.ny).map(row).collect();

    Ok(BeamformedImage {
        grid: *grid,
        values: rows.into_iter().flatten().collect(),
    })
}

/// Unwrapped phase of a slow-time series: each step is corrected to the
/// nearest multiple of 2π.
pub fn unwrap_phase(series: &[Complex64]) -> Result<Vec<f64>, DspError> {
    let first = *series.first().ok_or(DspError::Empty)?;
    if first == Complex64::new(0.0, 0.0) || !first.is_finite() {
        return Err(DspError::UnwrapFailure { index: 0 });
    }
    let mut out = Vec::with_capacity(series.len());
    out.push(first.arg());
    for t in 1..series.len() {
        let z = series[t];
        if z == Complex64::new(0.0, 0.0) || !z.is_finite() {
            return Err(DspError::UnwrapFailure { index: t });
        }
        let step = (z * series[t - 1].conj()).arg();
        if step.abs() > PI - UNWRAP_MARGIN {
            return Err(DspError::UnwrapFailure { index: t });
        }
        out.push(out[t - 1] + step);
    }
    Ok(out)
}

/// Monostatic displacement `d[t] = −λ(ψ[t] − ψ[0])/(4π)` from an unwrapped
/// phase; motion toward the radar is negative.
pub fn phase_to_displacement(phase: &[f64], wavelength: f64) -> Vec<f64> {
    let p0 = phase.first().copied().unwrap_or(0.0);
    phase.iter().map(|p| -wavelength * (p - p0) / (4.0 * PI)).collect()
}

/// Displacement series of the reflector seen in `slow_time`.
pub fn extract_displacement(slow_time: &[Complex64], wavelength: f64) -> Result<Vec<f64>, DspError> {
    Ok(phase_to_displacement(&unwrap_phase(slow_time)?, wavelength))
}

/// Root-mean-square difference of two equal-length series.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64, DspError> {
    if a.is_empty() || b.is_empty() {
        return Err(DspError::Empty);
    }
    if a.len() != b.len() {
        return Err(DspError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(ss / a.len() as f64))
}

/// Dynamic time warping cost with `|a_i − b_j|` local cost and the symmetric
/// unit-weight step pattern (insertion, deletion, match).
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64, DspError> {
    dtw_banded(a, b, None)
}

/// [`dtw`] restricted to `|i − j| ≤ band` when a band is given.
pub fn dtw_banded(a: &[f64], b: &[f64], band: Option<usize>) -> Result<f64, DspError> {
    if a.is_empty() || b.is_empty() {
        return Err(DspError::Empty);
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for (i, &x) in a.iter().enumerate() {
        cur.fill(f64::INFINITY);
        let (lo, hi) = match band {
            Some(w) => (i.saturating_sub(w), (i + w).min(m - 1)),
            None => (0, m - 1),
        };
        for j in lo..=hi {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = (x - b[j]).abs() + best;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}
