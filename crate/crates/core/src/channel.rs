//! Fresnel reflection, per-path electromagnetic parameters and channel
//! impulse response assembly.
//!
//! Field amplitudes follow the free-space spreading law `λ/(4πd)` times the
//! product of reflection coefficients. Polarization is tracked as a single
//! fixed scalar component.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use num_complex::Complex64;

use crate::scene::{AntennaPattern, Material, MaterialModel, RadarPose, SceneError};
use crate::tracer::PropagationPath;
use crate::SPEED_OF_LIGHT;

/// Default pruning floor relative to the strongest tap.
pub const DEFAULT_PRUNE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarization {
    /// Electric field perpendicular to the plane of incidence.
    #[default]
    Te,
    /// Electric field in the plane of incidence.
    Tm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    ZeroLengthPath,
    UnknownMaterial(u32),
    Material(SceneError),
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::ZeroLengthPath => write!(f, "path has a zero-length segment"),
            ChannelError::UnknownMaterial(m) => write!(f, "material index {m} is out of range"),
            ChannelError::Material(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ChannelError {}

impl From<SceneError> for ChannelError {
    fn from(e: SceneError) -> Self {
        ChannelError::Material(e)
    }
}

/// Reflection coefficient at a planar interface from vacuum into a medium of
/// complex relative permittivity `eta`.
///
/// `theta` is measured from the normal. Exactly grazing incidence (and
/// anything beyond) returns the limiting value −1.
pub fn fresnel_reflection(theta: f64, eta: Complex64, polarization: Polarization) -> Complex64 {
    if theta >= FRAC_PI_2 {
        return Complex64::new(-1.0, 0.0);
    }
    let theta = theta.max(0.0);
    let cos = libm::cos(theta);
    // η − sin²θ written as (η − 1) + cos²θ: exact for vacuum and free of
    // cancellation near grazing. Principal branch: non-negative real part.
    let root = (eta - 1.0 + cos * cos).sqrt();
    match polarization {
        Polarization::Te => (cos - root) / (cos + root),
        Polarization::Tm => (eta * cos - root) / (eta * cos + root),
    }
}

/// Interface of one material at a fixed carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Dielectric(Complex64),
    PerfectConductor,
}

impl Surface {
    pub fn reflection(&self, theta: f64, polarization: Polarization) -> Complex64 {
        match *self {
            Surface::Dielectric(eta) => fresnel_reflection(theta, eta, polarization),
            Surface::PerfectConductor => Complex64::new(-1.0, 0.0),
        }
    }
}

/// Delay, complex field gain and departure/arrival angles of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParameters {
    /// Seconds.
    pub delay: f64,
    pub gain: Complex64,
    /// (azimuth, elevation) in the transmitter's local frame.
    pub aod: (f64, f64),
    /// (azimuth, elevation) in the receiver's local frame.
    pub aoa: (f64, f64),
}

/// Materials evaluated at one carrier frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    carrier_hz: f64,
    polarization: Polarization,
    surfaces: Vec<Surface>,
}

impl ChannelModel {
    pub fn new(materials: &[Material], carrier_hz: f64, polarization: Polarization) -> Result<Self, ChannelError> {
        if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
            return Err(SceneError::NonPositiveFrequency(carrier_hz).into());
        }
        let surfaces = materials
            .iter()
            .map(|m| match m.model {
                MaterialModel::Dielectric(d) => d.evaluate(carrier_hz).map(Surface::Dielectric),
                MaterialModel::PerfectConductor => Ok(Surface::PerfectConductor),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChannelModel {
            carrier_hz,
            polarization,
            surfaces,
        })
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    /// Parameters of `path` seen from `pose`, with the amplitude scaled by
    /// `weight` (`1/N_valid` for group-expanded paths, 1 otherwise).
    ///
    /// `arg(gain) = −2π f_c τ + Σ arg Γ_k`: the propagation phase is part of
    /// the tap gain, so waveform synthesis must not add `f_c τ` again.
    pub fn path_parameters(
        &self,
        path: &PropagationPath,
        weight: f64,
        pose: &RadarPose,
    ) -> Result<PathParameters, ChannelError> {
        if !path.has_distinct_points() {
            return Err(ChannelError::ZeroLengthPath);
        }
        let d = path.total_length();
        let lambda = self.wavelength();
        let mut gamma = Complex64::new(1.0, 0.0);
        for h in path.hits() {
            let s = self
                .surfaces
                .get(h.material as usize)
                .ok_or(ChannelError::UnknownMaterial(h.material))?;
            gamma *= s.reflection(h.incidence_angle, self.polarization);
        }
        // reduce d/λ before scaling by 2π to keep the phase accurate at long range
        let cycles = d / lambda;
        let phase = -2.0 * PI * (cycles - libm::floor(cycles));
        let spread = lambda / (4.0 * PI * d) * weight;
        let gain = gamma * Complex64::from_polar(spread, phase);
        let pts = path.points();
        let depart = pts[1] - pts[0];
        let arrive = pts[pts.len() - 2] - pts[pts.len() - 1];
        Ok(PathParameters {
            delay: d / SPEED_OF_LIGHT,
            gain,
            aod: pose.tx_orientation.local_angles(depart),
            aoa: pose.rx_orientation.local_angles(arrive),
        })
    }
}

/// Taps of one (frame, pose) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse {
    /// Sorted by delay.
    pub taps: Vec<PathParameters>,
    pub carrier_hz: f64,
    pub frame: usize,
    pub pose: usize,
}

impl ChannelImpulseResponse {
    pub fn empty(carrier_hz: f64, frame: usize, pose: usize) -> Self {
        ChannelImpulseResponse {
            taps: Vec::new(),
            carrier_hz,
            frame,
            pose,
        }
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    /// Frequency response `H(f) = Σ g_k exp(−j2π(f − f_c)τ_k)` at baseband
    /// offset `f − f_c`.
    pub fn frequency_response(&self, offset_hz: f64) -> Complex64 {
        self.taps
            .iter()
            .map(|t| t.gain * Complex64::from_polar(1.0, -2.0 * PI * offset_hz * t.delay))
            .sum()
    }
}

/// Apply antenna gains, sort by delay and drop taps weaker than
/// `prune_floor` times the strongest one.
pub fn assemble_cir(
    mut taps: Vec<PathParameters>,
    tx_pattern: &AntennaPattern,
    rx_pattern: &AntennaPattern,
    prune_floor: f64,
    carrier_hz: f64,
    frame: usize,
    pose: usize,
) -> ChannelImpulseResponse {
    for t in taps.iter_mut() {
        t.gain *= tx_pattern.gain(t.aod.0, t.aod.1) * rx_pattern.gain(t.aoa.0, t.aoa.1);
    }
    // stable: equal delays keep the canonical path order
    taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    let strongest = taps.iter().map(|t| t.gain.norm()).fold(0.0, f64::max);
    let floor = prune_floor * strongest;
    taps.retain(|t| t.gain.norm() >= floor && t.gain.norm() > 0.0);
    ChannelImpulseResponse {
        taps,
        carrier_hz,
        frame,
        pose,
    }
}
