//! Scenario execution: scene → coherent paths → CIRs → beat signals →
//! application, with a run manifest written before and after.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use phasetrace_core::channel::ChannelModel;
use phasetrace_core::coherence::{coherent_paths, FramePaths, VertexGrouping};
use phasetrace_core::dsp::{
    backprojection_image, doppler_fft, dtw, extract_displacement, range_fft, rmse, BackprojectionOptions, DspError,
    ImageGrid, RangeProfile,
};
use phasetrace_core::scene::RadarPose;
use phasetrace_core::tracer::SceneFrame;
use phasetrace_core::waveform::{simulate_frame_sequence, FmcwConfig, RadarFrontEnd, Simulation, WaveformError};
use phasetrace_core::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{load_pattern, Application, ScenarioConfig};
use crate::error::{Error, Result};
use crate::formats::{self, Axis};
use crate::manifest::{load_scene, LoadedScene};
use crate::noise;
use crate::oracle;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Trace,
    Simulate,
    Image,
    Doppler,
    Vitals,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::Simulate => "simulate",
            Command::Image => "image",
            Command::Doppler => "doppler",
            Command::Vitals => "vitals",
            Command::Oracle => "oracle",
        }
    }

    fn application(self) -> Option<Application> {
        match self {
            Command::Image => Some(Application::Image),
            Command::Doppler => Some(Application::Doppler),
            Command::Vitals => Some(Application::Vitals),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: RunStatus,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config_file: String,
    pub config_sha256: String,
    /// Normalized config; re-running it reproduces the artifacts.
    pub config: String,
    pub artifacts: Vec<ArtifactRecord>,
    pub summary: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    fn write(&self, out: &Path) -> Result<()> {
        let path = out.join("run.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::output(&path, e.into()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::output(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

/// Load, validate and normalize a config, applying the seed override.
pub fn prepare_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Execute `command`. The run manifest is written as `incomplete` before any
/// work starts and rewritten as `complete` or `failed` at the end.
pub fn run(command: Command, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = prepare_config(&opts.config, opts.seed)?;
    if let Some(app) = command.application() {
        if cfg.application() != Some(app) {
            return Err(Error::config(command.name(), format!("the `{}` command needs a [{}] block", command.name(), command.name())));
        }
    }
    if opts.threads == Some(0) {
        return Err(Error::config("threads", "must be at least 1"));
    }
    fs::create_dir_all(&opts.out).map_err(|e| Error::output(&opts.out, e))?;
    let text = cfg.normalized_toml();
    let config_path = opts.out.join("config.toml");
    fs::write(&config_path, &text).map_err(|e| Error::output(&config_path, e))?;
    let mut manifest = RunManifest {
        tool: "phasetrace".into(),
        version: VERSION.into(),
        command: command.name().into(),
        status: RunStatus::Incomplete,
        seed: cfg.seed,
        threads: opts.threads,
        config_file: "config.toml".into(),
        config_sha256: sha256_hex(text.as_bytes()),
        config: text,
        artifacts: Vec::new(),
        summary: Value::Null,
        error: None,
    };
    manifest.write(&opts.out)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("threads", e))?;
    let result = pool.install(|| execute(command, &cfg, &opts.out));

    match result {
        Ok((files, summary)) => {
            manifest.artifacts = files
                .iter()
                .map(|(name, p)| record(name, p, &opts.out))
                .collect::<Result<_>>()?;
            manifest.summary = summary;
            manifest.status = RunStatus::Complete;
            manifest.write(&opts.out)?;
            Ok(RunOutcome {
                manifest_path: opts.out.join("run.json"),
                manifest,
            })
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            // keep the original error even if this write fails
            let _ = manifest.write(&opts.out);
            Err(e)
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

fn record(name: &str, path: &Path, out: &Path) -> Result<ArtifactRecord> {
    let bytes = fs::metadata(path).map_err(|e| Error::output(path, e))?.len();
    Ok(ArtifactRecord {
        name: name.into(),
        path: path.strip_prefix(out).unwrap_or(path).display().to_string(),
        sha256: formats::sha256_file(path)?,
        bytes,
    })
}

type Artifacts = Vec<(String, PathBuf)>;

/// Everything derived from the config and scene before any tracing.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub scene: LoadedScene,
    pub poses: Vec<RadarPose>,
    pub fmcw: FmcwConfig,
    pub frames: Range<usize>,
    pub grouping: Option<VertexGrouping>,
}

impl Scenario {
    pub fn load(cfg: &ScenarioConfig) -> Result<Scenario> {
        let scene = load_scene(&cfg.scene)?;
        let poses = match (&cfg.poses, &scene.poses) {
            (Some(spec), _) => spec.generate("poses")?,
            (None, Some(p)) => p.clone(),
            (None, None) => return Err(Error::config("poses", "no poses in the config or the scene manifest")),
        };
        for (i, p) in poses.iter().enumerate() {
            p.validate(i).map_err(|e| Error::config("poses", e))?;
        }
        let fmcw = cfg.radar.fmcw();
        scene
            .scene
            .validate_band(fmcw.carrier_hz, fmcw.carrier_hz + fmcw.bandwidth_hz)
            .map_err(|e| Error::asset(&cfg.scene, e))?;

        let seq = &scene.scene;
        let dynamic = !seq.dynamic_frames().is_empty();
        if dynamic && ((fmcw.frame_interval_s * seq.frame_rate()) - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "radar.frame_interval_s",
                format!("must equal 1/frame_rate of the scene ({} Hz)", seq.frame_rate()),
            ));
        }
        let frames = match cfg.frames {
            Some(r) => r.start..r.end,
            None => 0..seq.frame_count(),
        };
        if dynamic && frames.end > seq.frame_count() {
            return Err(Error::config("frames", format!("scene has only {} frames", seq.frame_count())));
        }
        let grouping = match (cfg.coherence.voxel_edge, seq.dynamic_mesh(0)) {
            (Some(edge), Some(mesh)) if mesh.vertex_group().is_none() => Some(
                VertexGrouping::voxel_clusters(mesh.vertices(), edge).map_err(|e| Error::config("coherence.voxel_edge", e))?,
            ),
            _ => None,
        };
        Ok(Scenario {
            config: cfg.clone(),
            scene,
            poses,
            fmcw,
            frames,
            grouping,
        })
    }

    pub fn trace(&self) -> Result<Vec<FramePaths>> {
        let t = Instant::now();
        let c = &self.config;
        let out = coherent_paths(
            &self.scene.scene,
            &self.poses,
            self.grouping.as_ref(),
            &c.trace.params(),
            &c.coherence.options(c.seed),
            Some(self.frames.clone()),
        )
        .map_err(|e| Error::Numerical(e.to_string()))?;
        log::info!(
            "traced {} frames x {} poses in {:.2?}",
            out.len(),
            self.poses.len(),
            t.elapsed()
        );
        Ok(out)
    }

    pub fn simulate(&self, paths: &[FramePaths]) -> Result<Simulation> {
        let t = Instant::now();
        let c = &self.config;
        let model = ChannelModel::new(self.scene.scene.materials(), self.fmcw.carrier_hz, c.radar.polarization())
            .map_err(|e| Error::asset(&c.scene, e))?;
        let tx = load_pattern(&c.radar.tx_pattern, "radar.tx_pattern")?;
        let rx = load_pattern(&c.radar.rx_pattern, "radar.rx_pattern")?;
        let front = RadarFrontEnd {
            model: &model,
            tx_pattern: &tx,
            rx_pattern: &rx,
            prune_floor: c.radar.prune_floor,
        };
        let mut sim = simulate_frame_sequence(paths, &self.poses, &self.fmcw, &front).map_err(|e| match e {
            WaveformError::DelayExceedsChirp { .. } => Error::config("radar.chirp_duration_s", e),
            e => Error::Numerical(e.to_string()),
        })?;
        if let Some(n) = c.noise {
            let p = noise::add_awgn(&mut sim.cube, n.snr_db, c.seed);
            log::info!("added noise of power {p:e} per sample");
        }
        log::info!("synthesized {} beat signals in {:.2?}", sim.cirs.len(), t.elapsed());
        Ok(sim)
    }
}

fn execute(command: Command, cfg: &ScenarioConfig, out: &Path) -> Result<(Artifacts, Value)> {
    let sc = Scenario::load(cfg)?;
    if command == Command::Oracle {
        return run_oracle(&sc, out);
    }
    let paths = sc.trace()?;
    let mut files = Artifacts::new();
    if command == Command::Trace {
        let (rows, total) = path_rows(&paths);
        let p = out.join("paths.csv");
        formats::write_csv(&p, &rows)?;
        files.push(("paths".into(), p));
        return Ok((files, json!({ "frames": paths.len(), "poses": sc.poses.len(), "paths": total })));
    }

    let sim = sc.simulate(&paths)?;
    let cir = out.join("cir.bin");
    formats::write_cir(&cir, &sim.cirs)?;
    files.push(("cir".into(), cir));
    let (cube_json, cube_bin) = formats::write_cube(out, "cube", &sim.cube, sc.fmcw.adc_rate_hz)?;
    files.push(("cube".into(), cube_json));
    files.push(("cube_data".into(), cube_bin));
    let taps: usize = sim.cirs.iter().map(|c| c.taps.len()).sum();
    let mut summary = json!({
        "frames": sim.cube.frames,
        "poses": sim.cube.poses,
        "chirps": sim.cube.chirps,
        "samples": sim.cube.samples,
        "taps": taps,
    });

    let app = match command {
        Command::Image => run_image(&sc, &sim, out, &mut files)?,
        Command::Doppler => run_doppler(&sc, &sim, out, &mut files)?,
        Command::Vitals => run_vitals(&sc, &sim, out, &mut files)?,
        _ => Value::Null,
    };
    if !app.is_null() {
        summary[command.name()] = app;
    }
    Ok((files, summary))
}

#[derive(Serialize)]
struct PathRow {
    frame: usize,
    pose: usize,
    index: usize,
    depth: usize,
    weight: f64,
    length_m: f64,
    faces: String,
    points: String,
}

fn path_rows(frames: &[FramePaths]) -> (Vec<PathRow>, usize) {
    let mut rows = Vec::new();
    for f in frames {
        for (pose, pp) in f.poses.iter().enumerate() {
            for (index, w) in pp.paths.iter().enumerate() {
                let faces = w.path.face_sequence().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
                let points = w
                    .path
                    .points()
                    .iter()
                    .map(|p| format!("{:?} {:?} {:?}", p.x, p.y, p.z))
                    .collect::<Vec<_>>()
                    .join(";");
                rows.push(PathRow {
                    frame: f.frame,
                    pose,
                    index,
                    depth: w.path.depth(),
                    weight: w.weight,
                    length_m: w.path.total_length(),
                    faces,
                    points,
                });
            }
        }
    }
    let n = rows.len();
    (rows, n)
}

/// Local maxima (8-neighbourhood) of a row-major `nx × ny` grid, strongest first.
fn local_maxima(values: &[f64], nx: usize, ny: usize, count: usize) -> Vec<(usize, usize, f64)> {
    let mut peaks = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = values[j * nx + i];
            if v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'n: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    let w = values[jj as usize * nx + ii as usize];
                    // ties resolve towards the lower flat index
                    if w > v || (w == v && (jj as usize * nx + (ii as usize)) < j * nx + i) {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                peaks.push((i, j, v));
            }
        }
    }
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));
    peaks.truncate(count);
    peaks
}

#[derive(Serialize)]
struct PeakRow {
    rank: usize,
    i: usize,
    j: usize,
    x_m: f64,
    y_m: f64,
    intensity: f64,
}

fn run_image(sc: &Scenario, sim: &Simulation, out: &Path, files: &mut Artifacts) -> Result<Value> {
    let ic = sc.config.image.as_ref().expect("validated image block");
    let t = Instant::now();
    let cube = &sim.cube;
    let mut signals: Vec<Vec<Complex64>> = (0..cube.poses).map(|p| cube.chirp(p, 0, 0).to_vec()).collect();
    if ic.decohere {
        for (s, phi) in signals.iter_mut().zip(noise::pose_phases(cube.poses, sc.config.seed)) {
            let rot = Complex64::from_polar(1.0, phi);
            s.iter_mut().for_each(|z| *z *= rot);
        }
    }
    let refs: Vec<&[Complex64]> = signals.iter().map(Vec::as_slice).collect();
    let grid = ImageGrid::square(ic.center[0], ic.center[1], ic.z, ic.size, ic.n);
    let opts = BackprojectionOptions {
        upsample: ic.upsample,
        window: ic.window.into(),
    };
    let img = backprojection_image(&refs, &sc.poses, &grid, &sc.fmcw, &opts).map_err(|e| Error::Numerical(e.to_string()))?;
    let intensity = img.intensity();
    let axes = vec![
        Axis::new("y", grid.ny, grid.y0, grid.dy, "m"),
        Axis::new("x", grid.nx, grid.x0, grid.dx, "m"),
    ];
    let (json_path, bin) = formats::write_grid(out, "image", "intensity", axes, &intensity)?;
    files.push(("image".into(), json_path));
    files.push(("image_data".into(), bin));

    let peaks: Vec<PeakRow> = local_maxima(&intensity, grid.nx, grid.ny, ic.peaks)
        .into_iter()
        .enumerate()
        .map(|(rank, (i, j, v))| {
            let p = grid.point(i, j);
            log::info!("image peak {rank}: ({:.4}, {:.4}) m, intensity {v:e}", p.x, p.y);
            PeakRow {
                rank,
                i,
                j,
                x_m: p.x,
                y_m: p.y,
                intensity: v,
            }
        })
        .collect();
    let p = out.join("peaks.csv");
    formats::write_csv(&p, &peaks)?;
    files.push(("peaks".into(), p));
    let ptb = img.peak_to_background(ic.exclusion_cells);
    log::info!("image formed in {:.2?}; peak-to-background {:.2} dB", t.elapsed(), 10.0 * ptb.log10());
    let (pi, pj, _) = img.peak();
    let pk = grid.point(pi, pj);
    Ok(json!({
        "peak_x_m": pk.x,
        "peak_y_m": pk.y,
        "peak_to_background_db": 10.0 * ptb.log10(),
    }))
}

/// Range profile of chirp 0 of every frame for pose 0.
fn slow_time_profiles(sc: &Scenario, sim: &Simulation, window: crate::config::WindowName, zero_pad: usize) -> Result<Vec<RangeProfile>> {
    if sim.cube.poses != 1 {
        return Err(Error::config("poses", "Doppler and vitals processing need exactly one pose"));
    }
    Ok((0..sim.cube.frames)
        .map(|f| range_fft(sim.cube.chirp(0, f, 0), window.into(), zero_pad, &sc.fmcw))
        .collect())
}

#[derive(Serialize)]
struct VelocityRow {
    map: usize,
    start_frame: usize,
    time_s: f64,
    velocity_mps: f64,
    range_m: f64,
    power: f64,
}

fn run_doppler(sc: &Scenario, sim: &Simulation, out: &Path, files: &mut Artifacts) -> Result<Value> {
    let dc = sc.config.doppler.expect("validated doppler block");
    let profiles = slow_time_profiles(sc, sim, dc.range_window, dc.zero_pad)?;
    if profiles.len() < dc.window_frames {
        return Err(Error::config(
            "doppler.window_frames",
            format!("only {} frames simulated", profiles.len()),
        ));
    }
    let lambda = sc.fmcw.wavelength();
    let dt = sc.fmcw.frame_interval_s;
    let mut power = Vec::new();
    let mut rows = Vec::new();
    let mut shape = (0, 0, 0.0, 0.0);
    let mut start = 0;
    while start + dc.window_frames <= profiles.len() {
        let map = doppler_fft(&profiles[start..start + dc.window_frames], dc.window.into(), lambda, dt)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        shape = (map.range_bins, map.velocity_bins, map.range_spacing, map.velocity_spacing);
        let first = ((dc.min_range / map.range_spacing).ceil() as usize).min(map.range_bins - 1);
        let (mut best, mut br, mut bv) = (f64::NEG_INFINITY, first, 0);
        for r in first..map.range_bins {
            for v in 0..map.velocity_bins {
                if map.at(r, v) > best {
                    (best, br, bv) = (map.at(r, v), r, v);
                }
            }
        }
        rows.push(VelocityRow {
            map: rows.len(),
            start_frame: sc.frames.start + start,
            time_s: (sc.frames.start as f64 + start as f64 + (dc.window_frames - 1) as f64 / 2.0) * dt,
            velocity_mps: map.velocity_of(bv),
            range_m: br as f64 * map.range_spacing,
            power: best,
        });
        power.extend_from_slice(&map.power);
        start += dc.hop;
    }
    let (nr, nv, dr, dv) = shape;
    let axes = vec![
        Axis::new("map", rows.len(), 0.0, dc.hop as f64 * dt, "s"),
        Axis::new("range", nr, 0.0, dr, "m"),
        Axis::new("velocity", nv, -((nv / 2) as f64) * dv, dv, "m/s"),
    ];
    let (j, b) = formats::write_grid(out, "range_doppler", "power", axes, &power)?;
    files.push(("range_doppler".into(), j));
    files.push(("range_doppler_data".into(), b));
    let p = out.join("velocity_peaks.csv");
    formats::write_csv(&p, &rows)?;
    files.push(("velocity_peaks".into(), p));
    log::info!("{} range-Doppler maps, velocity bin {dv:.4} m/s", rows.len());
    Ok(json!({ "maps": rows.len(), "velocity_spacing_mps": dv, "range_spacing_m": dr }))
}

#[derive(Serialize)]
struct DisplacementRow {
    frame: usize,
    time_s: f64,
    displacement_m: f64,
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    value: f64,
}

fn run_vitals(sc: &Scenario, sim: &Simulation, out: &Path, files: &mut Artifacts) -> Result<Value> {
    let vc = sc.config.vitals.as_ref().expect("validated vitals block");
    let profiles = slow_time_profiles(sc, sim, vc.window, 1)?;
    let nb = profiles[0].bins.len();
    let spacing = profiles[0].bin_spacing;
    let bin = match vc.range_bin {
        Some(b) if b < nb => b,
        Some(b) => return Err(Error::config("vitals.range_bin", format!("bin {b} out of range; only {nb} range bins"))),
        None => {
            let lo = (vc.min_range / spacing).ceil() as usize;
            let hi = vc.max_range.map_or(nb, |m| ((m / spacing).floor() as usize + 1).min(nb));
            (lo..hi)
                .max_by(|&a, &b| {
                    let m = |k: usize| profiles.iter().map(|p| p.bins[k].norm()).sum::<f64>();
                    m(a).total_cmp(&m(b)).then(b.cmp(&a))
                })
                .ok_or_else(|| Error::config("vitals.min_range", "no range bins inside the search interval"))?
        }
    };
    let series: Vec<Complex64> = profiles.iter().map(|p| p.bins[bin]).collect();
    let disp = extract_displacement(&series, sc.fmcw.wavelength()).map_err(|e| match e {
        DspError::UnwrapFailure { index } => Error::Numerical(format!(
            "phase unwrap failed at frame {} (range bin {bin})",
            sc.frames.start + index
        )),
        e => Error::Numerical(e.to_string()),
    })?;
    let dt = sc.fmcw.frame_interval_s;
    let rows: Vec<DisplacementRow> = disp
        .iter()
        .enumerate()
        .map(|(k, &d)| DisplacementRow {
            frame: sc.frames.start + k,
            time_s: (sc.frames.start + k) as f64 * dt,
            displacement_m: d,
        })
        .collect();
    let p = out.join("displacement.csv");
    formats::write_csv(&p, &rows)?;
    files.push(("displacement".into(), p));
    let mut summary = json!({ "range_bin": bin, "range_m": bin as f64 * spacing });

    if let Some(truth_path) = &vc.truth {
        let truth = formats::read_csv_column(truth_path, &vc.truth_column)?;
        if truth.len() < sc.frames.end {
            return Err(Error::asset(
                truth_path,
                format!("{} rows, need {}", truth.len(), sc.frames.end),
            ));
        }
        let t = &truth[sc.frames.clone()];
        let reference: Vec<f64> = t.iter().map(|v| v - t[0]).collect();
        let num = |e: DspError| Error::Numerical(e.to_string());
        let e_rmse = rmse(&disp, &reference).map_err(num)?;
        let e_dtw = dtw(&disp, &reference).map_err(num)?;
        let l1: f64 = disp.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum();
        let metrics = [
            MetricRow { metric: "rmse_m", value: e_rmse },
            MetricRow { metric: "dtw_m", value: e_dtw },
            MetricRow { metric: "lockstep_l1_m", value: l1 },
        ];
        let p = out.join("metrics.csv");
        formats::write_csv(&p, &metrics)?;
        files.push(("metrics".into(), p));
        log::info!("displacement rmse {e_rmse:e} m, dtw {e_dtw:e} m");
        summary["rmse_m"] = json!(e_rmse);
        summary["dtw_m"] = json!(e_dtw);
        summary["lockstep_l1_m"] = json!(l1);
    }
    Ok(summary)
}

fn run_oracle(sc: &Scenario, out: &Path) -> Result<(Artifacts, Value)> {
    if !sc.scene.scene.dynamic_frames().is_empty() {
        return Err(Error::config("scene", "the oracle needs a static scene of planar reflectors"));
    }
    let frame = SceneFrame::from_sequence(&sc.scene.scene, 0);
    let ends: Vec<_> = sc.poses.iter().map(|p| (p.tx_position, p.rx_position)).collect();
    let report = oracle::compare(&frame, &ends, &sc.config.trace.params());
    let p = out.join("oracle.csv");
    formats::write_csv(&p, &report.rows)?;
    let tol = sc.config.oracle.relative_tolerance;
    let passed = report.passed(tol);
    println!(
        "oracle: {} analytic paths, {} missed, {} spurious, max relative error {:e} (tolerance {tol:e}): {}",
        report.rows.len() - report.spurious,
        report.missed,
        report.spurious,
        report.max_relative_error,
        if passed { "PASS" } else { "FAIL" }
    );
    let summary = json!({
        "max_relative_error": report.max_relative_error,
        "missed": report.missed,
        "spurious": report.spurious,
        "passed": passed,
    });
    Ok((vec![("oracle".into(), p)], summary))
}
