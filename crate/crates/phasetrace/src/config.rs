//! Scenario configuration (TOML).
//!
//! ```toml
//! scene = "scene.toml"            # relative to this file
//! seed = 7
//!
//! [radar]                         # FMCW fields default to 77 GHz / 1 GHz / 50 µs / 256 samples
//! bandwidth_hz = 4e9
//! tx_pattern = { kind = "cosine", exponent = 2.0 }
//!
//! [poses]                         # overrides poses given in the scene manifest
//! kind = "circle"
//! center = [0, 0, 1]
//! radius = 0.5
//! count = 1200
//!
//! [image]                         # at most one of [image], [doppler], [vitals]
//! center = [0, 0]
//! z = 1.0
//! size = 0.4
//! n = 256
//! ```

use std::path::{Path, PathBuf};

use phasetrace_core::channel::{Polarization, DEFAULT_PRUNE_FLOOR};
use phasetrace_core::coherence::{CoherenceOptions, ReplayOptions, RepresentativeRule};
use phasetrace_core::fft::Window;
use phasetrace_core::scene::{AntennaPattern, PatternTable};
use phasetrace_core::tracer::{CaptureRadius, TraceParams};
use phasetrace_core::waveform::FmcwConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poses::PoseSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scene: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radar: RadarSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<PoseSpec>,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub coherence: CoherenceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler: Option<DopplerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vitals: Option<VitalsSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowName {
    #[default]
    Rectangular,
    Hann,
}

impl From<WindowName> for Window {
    fn from(w: WindowName) -> Window {
        match w {
            WindowName::Rectangular => Window::Rectangular,
            WindowName::Hann => Window::Hann,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationName {
    #[default]
    Te,
    Tm,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSpec {
    #[default]
    Isotropic,
    Cosine { exponent: f64 },
    /// Long-form CSV with columns `az,el,gain` (radians, linear field gain)
    /// on a regular grid covering the full sphere.
    Table { file: PathBuf },
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSection {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub adc_rate_hz: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    pub frame_interval_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chirp_interval_s: Option<f64>,
    pub residual_video_phase: bool,
    pub polarization: PolarizationName,
    pub tx_pattern: PatternSpec,
    pub rx_pattern: PatternSpec,
    pub prune_floor: f64,
}

impl Default for RadarSection {
    fn default() -> Self {
        let f = FmcwConfig::default();
        RadarSection {
            carrier_hz: f.carrier_hz,
            bandwidth_hz: f.bandwidth_hz,
            chirp_duration_s: f.chirp_duration_s,
            adc_rate_hz: f.adc_rate_hz,
            samples_per_chirp: f.samples_per_chirp,
            chirps_per_frame: f.chirps_per_frame,
            frame_interval_s: f.frame_interval_s,
            chirp_interval_s: f.chirp_interval_s,
            residual_video_phase: f.residual_video_phase,
            polarization: PolarizationName::Te,
            tx_pattern: PatternSpec::Isotropic,
            rx_pattern: PatternSpec::Isotropic,
            prune_floor: DEFAULT_PRUNE_FLOOR,
        }
    }
}

impl RadarSection {
    pub fn fmcw(&self) -> FmcwConfig {
        FmcwConfig {
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            chirp_duration_s: self.chirp_duration_s,
            adc_rate_hz: self.adc_rate_hz,
            samples_per_chirp: self.samples_per_chirp,
            chirps_per_frame: self.chirps_per_frame,
            frame_interval_s: self.frame_interval_s,
            chirp_interval_s: self.chirp_interval_s,
            residual_video_phase: self.residual_video_phase,
        }
    }

    pub fn polarization(&self) -> Polarization {
        match self.polarization {
            PolarizationName::Te => Polarization::Te,
            PolarizationName::Tm => Polarization::Tm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub ray_count: usize,
    pub max_depth: usize,
    /// Fixed capture radius in metres; adaptive when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capture_radius: Option<f64>,
    pub dedup_tolerance: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        let t = TraceParams::default();
        TraceSection {
            ray_count: t.ray_count,
            max_depth: t.max_depth,
            capture_radius: None,
            dedup_tolerance: t.dedup_tolerance,
        }
    }
}

impl TraceSection {
    pub fn params(&self) -> TraceParams {
        TraceParams {
            ray_count: self.ray_count,
            max_depth: self.max_depth,
            capture_radius: self.capture_radius.map_or(CaptureRadius::Adaptive, CaptureRadius::Fixed),
            dedup_tolerance: self.dedup_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentativeName {
    #[default]
    Lowest,
    /// Ablation: pseudo-random corner per frame and path.
    Scrambled,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceSection {
    pub full_path_occlusion: bool,
    pub representative: RepresentativeName,
    /// Voxel edge for meshes without group labels (default 0.1 m).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voxel_edge: Option<f64>,
}

impl CoherenceSection {
    pub fn options(&self, seed: u64) -> CoherenceOptions {
        CoherenceOptions {
            replay: ReplayOptions {
                full_path_occlusion: self.full_path_occlusion,
            },
            representative: match self.representative {
                RepresentativeName::Lowest => RepresentativeRule::LowestIndex,
                RepresentativeName::Scrambled => RepresentativeRule::Scrambled { seed },
            },
        }
    }
}

/// Half-open range of 0-based scene frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Ratio of mean signal power over the cube to noise power per sample.
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub relative_tolerance: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { relative_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSection {
    /// Grid centre (x, y) in metres.
    pub center: [f64; 2],
    pub z: f64,
    /// Side length of the square grid in metres.
    pub size: f64,
    /// Cells per side.
    pub n: usize,
    #[serde(default = "default_upsample")]
    pub upsample: usize,
    #[serde(default)]
    pub window: WindowName,
    /// Rotate each pose by a seeded random phase (coherence ablation).
    #[serde(default)]
    pub decohere: bool,
    /// Cells around the peak excluded from the background estimate.
    #[serde(default = "default_exclusion")]
    pub exclusion_cells: f64,
    /// Number of intensity peaks reported.
    #[serde(default = "default_peaks")]
    pub peaks: usize,
}

fn default_upsample() -> usize {
    8
}

fn default_exclusion() -> f64 {
    3.0
}

fn default_peaks() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSection {
    /// Frames per range-Doppler map (slow-time length).
    pub window_frames: usize,
    #[serde(default = "one")]
    pub hop: usize,
    #[serde(default = "hann")]
    pub window: WindowName,
    #[serde(default = "hann")]
    pub range_window: WindowName,
    #[serde(default = "one")]
    pub zero_pad: usize,
    /// Ignore range bins closer than this when locating peaks (m).
    #[serde(default)]
    pub min_range: f64,
}

fn one() -> usize {
    1
}

fn hann() -> WindowName {
    WindowName::Hann
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VitalsSection {
    /// Fixed range bin; otherwise the strongest bin of the mean profile
    /// between `min_range` and `max_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_bin: Option<usize>,
    #[serde(default)]
    pub min_range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_range: Option<f64>,
    #[serde(default)]
    pub window: WindowName,
    /// CSV with the reference displacement (m), one row per frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default = "default_truth_column")]
    pub truth_column: String,
}

fn default_truth_column() -> String {
    "displacement".into()
}

/// Application block selected by the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Application {
    Image,
    Doppler,
    Vitals,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| (text[..s.start.min(text.len())].matches('\n').count() + 1).to_string())
                .map_or_else(|| "config".to_string(), |l| format!("line {l}"));
            Error::config(field, e.message())
        })
    }

    /// Read a config; relative paths inside are resolved against its
    /// directory and stored as absolute paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e))?;
        let mut cfg = Self::from_toml(&text)?;
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dir = std::path::absolute(parent)
            .map_err(|e| Error::config(path.display().to_string(), e))?;
        cfg.resolve_paths(&dir);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        abs(&mut self.scene);
        for pat in [&mut self.radar.tx_pattern, &mut self.radar.rx_pattern] {
            if let PatternSpec::Table { file } = pat {
                abs(file);
            }
        }
        if let Some(VitalsSection { truth: Some(t), .. }) = &mut self.vitals {
            abs(t);
        }
    }

    pub fn application(&self) -> Option<Application> {
        if self.image.is_some() {
            Some(Application::Image)
        } else if self.doppler.is_some() {
            Some(Application::Doppler)
        } else if self.vitals.is_some() {
            Some(Application::Vitals)
        } else {
            None
        }
    }

    /// Field-level validation of everything that does not need the scene.
    pub fn validate(&self) -> Result<()> {
        let blocks = [self.image.is_some(), self.doppler.is_some(), self.vitals.is_some()];
        if blocks.iter().filter(|&&b| b).count() > 1 {
            return Err(Error::config("image/doppler/vitals", "at most one application block per config"));
        }
        self.radar.fmcw().validate().map_err(|e| Error::config("radar", e))?;
        if !(self.radar.prune_floor >= 0.0) || self.radar.prune_floor >= 1.0 {
            return Err(Error::config("radar.prune_floor", "must be in [0, 1)"));
        }
        for (name, p) in [("radar.tx_pattern", &self.radar.tx_pattern), ("radar.rx_pattern", &self.radar.rx_pattern)] {
            if let PatternSpec::Cosine { exponent } = p {
                AntennaPattern::cosine_power(*exponent).map_err(|e| Error::config(name, e))?;
            }
        }
        self.trace.params().validate().map_err(|e| Error::config("trace", e))?;
        if let Some(e) = self.coherence.voxel_edge {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::config("coherence.voxel_edge", "must be positive"));
            }
        }
        if let Some(r) = self.frames {
            if r.end <= r.start {
                return Err(Error::config("frames", "end must be greater than start"));
            }
        }
        if let Some(n) = self.noise {
            if !n.snr_db.is_finite() {
                return Err(Error::config("noise.snr_db", "must be finite"));
            }
        }
        if !(self.oracle.relative_tolerance > 0.0) {
            return Err(Error::config("oracle.relative_tolerance", "must be positive"));
        }
        if let Some(i) = &self.image {
            if i.n == 0 {
                return Err(Error::config("image.n", "must be positive"));
            }
            if !(i.size > 0.0) || !i.size.is_finite() {
                return Err(Error::config("image.size", "must be positive"));
            }
            if !i.center.iter().chain([&i.z]).all(|v| v.is_finite()) {
                return Err(Error::config("image.center", "must be finite"));
            }
            if i.upsample == 0 {
                return Err(Error::config("image.upsample", "must be positive"));
            }
            if !(i.exclusion_cells >= 0.0) {
                return Err(Error::config("image.exclusion_cells", "must be non-negative"));
            }
        }
        if let Some(d) = &self.doppler {
            if d.window_frames < 2 {
                return Err(Error::config("doppler.window_frames", "needs at least 2 frames"));
            }
            if d.hop == 0 {
                return Err(Error::config("doppler.hop", "must be positive"));
            }
            if d.zero_pad == 0 {
                return Err(Error::config("doppler.zero_pad", "must be positive"));
            }
        }
        if let Some(v) = &self.vitals {
            if v.max_range.is_some_and(|m| !(m > v.min_range)) {
                return Err(Error::config("vitals.max_range", "must exceed min_range"));
            }
        }
        Ok(())
    }

    /// Canonical TOML with every default spelled out; hashing this text
    /// identifies a run configuration.
    pub fn normalized_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_pattern(spec: &PatternSpec, field: &str) -> Result<AntennaPattern> {
    match spec {
        PatternSpec::Isotropic => Ok(AntennaPattern::Isotropic),
        PatternSpec::Cosine { exponent } => AntennaPattern::cosine_power(*exponent).map_err(|e| Error::config(field, e)),
        PatternSpec::Table { file } => {
            #[derive(Deserialize)]
            struct Row {
                az: f64,
                el: f64,
                gain: f64,
            }
            let mut r = csv::Reader::from_path(file).map_err(|e| Error::asset(file, e))?;
            let rows = r
                .deserialize::<Row>()
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::asset(file, e))?;
            let axis = |f: fn(&Row) -> f64| {
                let mut v: Vec<f64> = rows.iter().map(f).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            };
            let (az, el) = (axis(|r| r.az), axis(|r| r.el));
            if az.len() * el.len() != rows.len() {
                return Err(Error::asset(file, "pattern rows do not form a regular az/el grid"));
            }
            let mut gains = vec![f64::NAN; rows.len()];
            for row in &rows {
                let i = az.binary_search_by(|a| a.total_cmp(&row.az)).unwrap();
                let j = el.binary_search_by(|e| e.total_cmp(&row.el)).unwrap();
                gains[j * az.len() + i] = row.gain;
            }
            if gains.iter().any(|g| g.is_nan()) {
                return Err(Error::asset(file, "duplicate az/el pairs in pattern"));
            }
            PatternTable::new(az, el, gains)
                .map(AntennaPattern::Tabulated)
                .map_err(|e| Error::asset(file, e))
        }
    }
}
