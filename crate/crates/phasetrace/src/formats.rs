//! On-disk artifact formats. All binary data is little-endian.
//!
//! * CIR: text header terminated by `end_header\n`, then `records` rows of
//!   nine float64 values `frame pose delay_s gain_re gain_im aod_az aod_el
//!   aoa_az aoa_el`.
//! * Signal cube: JSON manifest plus raw interleaved complex float32
//!   (re, im) in `[pose][frame][chirp][sample]` row-major order.
//! * Grid: JSON manifest with named axes plus raw float32, first axis slowest.
//! * Series: CSV with a header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use phasetrace_core::channel::{ChannelImpulseResponse, PathParameters};
use phasetrace_core::waveform::SignalCube;
use phasetrace_core::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CIR_MAGIC: &str = "phasetrace-cir 1";
const CIR_FIELDS: &str = "frame pose delay_s gain_re gain_im aod_az aod_el aoa_az aoa_el";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::output(path, e))?))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::output(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::output(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::output(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// One tap as stored in a CIR file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirRecord {
    pub frame: usize,
    pub pose: usize,
    pub tap: PathParameters,
}

pub fn write_cir(path: &Path, cirs: &[ChannelImpulseResponse]) -> Result<()> {
    let carrier = cirs.first().map_or(0.0, |c| c.carrier_hz);
    let records: usize = cirs.iter().map(|c| c.taps.len()).sum();
    let mut w = create(path)?;
    let io = |e| Error::output(path, e);
    write!(
        w,
        "{CIR_MAGIC}\ncarrier_hz {carrier:?}\nrecords {records}\nfields {CIR_FIELDS}\nencoding float64-le\nend_header\n"
    )
    .map_err(io)?;
    for c in cirs {
        for t in &c.taps {
            let row = [
                c.frame as f64,
                c.pose as f64,
                t.delay,
                t.gain.re,
                t.gain.im,
                t.aod.0,
                t.aod.1,
                t.aoa.0,
                t.aoa.1,
            ];
            for v in row {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
    }
    finish(path, w)
}

/// Returns the carrier frequency and all taps in file order.
pub fn read_cir(path: &Path) -> Result<(f64, Vec<CirRecord>)> {
    let bad = |r: &str| Error::asset(path, r);
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::asset(path, e))?);
    let (mut carrier, mut records) = (None, None);
    let mut first = true;
    loop {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(|e| Error::asset(path, e))? == 0 {
            return Err(bad("missing end_header"));
        }
        let line = line.trim_end();
        if first {
            if line != CIR_MAGIC {
                return Err(bad("not a CIR file"));
            }
            first = false;
            continue;
        }
        if line == "end_header" {
            break;
        }
        match line.split_once(' ') {
            Some(("carrier_hz", v)) => carrier = v.parse::<f64>().ok(),
            Some(("records", v)) => records = v.parse::<usize>().ok(),
            Some(("fields", v)) if v != CIR_FIELDS => return Err(bad("unexpected field list")),
            Some(("encoding", v)) if v != "float64-le" => return Err(bad("unsupported encoding")),
            _ => {}
        }
    }
    let carrier = carrier.ok_or_else(|| bad("missing carrier_hz"))?;
    let records = records.ok_or_else(|| bad("missing records"))?;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::asset(path, e))?;
    if buf.len() != records * 72 {
        return Err(bad("payload length does not match record count"));
    }
    let vals: Vec<f64> = buf
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let out = vals
        .chunks_exact(9)
        .map(|v| CirRecord {
            frame: v[0] as usize,
            pose: v[1] as usize,
            tap: PathParameters {
                delay: v[2],
                gain: Complex64::new(v[3], v[4]),
                aod: (v[5], v[6]),
                aoa: (v[7], v[8]),
            },
        })
        .collect();
    Ok((carrier, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub layout: Vec<String>,
    pub dims: [usize; 4],
    pub sample_rate_hz: f64,
    pub data: String,
    pub data_sha256: String,
}

fn write_manifest<T: Serialize>(path: &Path, m: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, m).map_err(|e| Error::output(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::output(path, e))?;
    finish(path, w)
}

fn write_f32(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = create(path)?;
    for v in values {
        w.write_all(&(v as f32).to_le_bytes()).map_err(|e| Error::output(path, e))?;
    }
    finish(path, w)
}

fn read_f32(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let buf = std::fs::read(path).map_err(|e| Error::asset(path, e))?;
    if buf.len() != expected * 4 {
        return Err(Error::asset(path, format!("expected {expected} float32 values, found {} bytes", buf.len())));
    }
    Ok(buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`; returns both paths.
pub fn write_cube(dir: &Path, stem: &str, cube: &SignalCube, sample_rate: f64) -> Result<(PathBuf, PathBuf)> {
    let bin = dir.join(format!("{stem}.bin"));
    write_f32(&bin, cube.data.iter().flat_map(|z| [z.re, z.im]))?;
    let manifest = CubeManifest {
        format: "phasetrace-cube".into(),
        version: 1,
        dtype: "complex64-le".into(),
        layout: ["pose", "frame", "chirp", "sample"].map(String::from).to_vec(),
        dims: [cube.poses, cube.frames, cube.chirps, cube.samples],
        sample_rate_hz: sample_rate,
        data: format!("{stem}.bin"),
        data_sha256: sha256_file(&bin)?,
    };
    let json = dir.join(format!("{stem}.json"));
    write_manifest(&json, &manifest)?;
    Ok((json, bin))
}

fn read_manifest<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::asset(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::asset(path, e))
}

fn data_path(manifest: &Path, data: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(data)
}

pub fn read_cube(manifest_path: &Path) -> Result<(CubeManifest, SignalCube)> {
    let m: CubeManifest = read_manifest(manifest_path)?;
    if m.format != "phasetrace-cube" || m.dtype != "complex64-le" {
        return Err(Error::asset(manifest_path, "not a complex64 signal cube"));
    }
    let [p, f, c, s] = m.dims;
    let raw = read_f32(&data_path(manifest_path, &m.data), 2 * p * f * c * s)?;
    let data = raw
        .chunks_exact(2)
        .map(|z| Complex64::new(z[0] as f64, z[1] as f64))
        .collect();
    Ok((
        m,
        SignalCube {
            poses: p,
            frames: f,
            chirps: c,
            samples: s,
            data,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub len: usize,
    pub start: f64,
    pub step: f64,
    pub unit: String,
}

impl Axis {
    pub fn new(name: &str, len: usize, start: f64, step: f64, unit: &str) -> Self {
        Axis {
            name: name.into(),
            len,
            start,
            step,
            unit: unit.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub quantity: String,
    pub axes: Vec<Axis>,
    pub data: String,
    pub data_sha256: String,
}

/// Writes a float32 grid; `values.len()` must equal the product of axis lengths.
pub fn write_grid(dir: &Path, stem: &str, quantity: &str, axes: Vec<Axis>, values: &[f64]) -> Result<(PathBuf, PathBuf)> {
    let n: usize = axes.iter().map(|a| a.len).product();
    assert_eq!(n, values.len(), "grid shape does not match data");
    let bin = dir.join(format!("{stem}.bin"));
    write_f32(&bin, values.iter().copied())?;
    let manifest = GridManifest {
        format: "phasetrace-grid".into(),
        version: 1,
        dtype: "float32-le".into(),
        quantity: quantity.into(),
        axes,
        data: format!("{stem}.bin"),
        data_sha256: sha256_file(&bin)?,
    };
    let json = dir.join(format!("{stem}.json"));
    write_manifest(&json, &manifest)?;
    Ok((json, bin))
}

pub fn read_grid(manifest_path: &Path) -> Result<(GridManifest, Vec<f32>)> {
    let m: GridManifest = read_manifest(manifest_path)?;
    if m.format != "phasetrace-grid" || m.dtype != "float32-le" {
        return Err(Error::asset(manifest_path, "not a float32 grid"));
    }
    let n = m.axes.iter().map(|a| a.len).product();
    let data = read_f32(&data_path(manifest_path, &m.data), n)?;
    Ok((m, data))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let io = |e: csv::Error| Error::output(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::output(path, e))
}

/// Read one named numeric column of a CSV file.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::asset(path, e))?;
    let idx = r
        .headers()
        .map_err(|e| Error::asset(path, e))?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::asset(path, format!("no column `{column}`")))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::asset(path, e))?;
            rec.get(idx)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::asset(path, format!("row {}: bad `{column}` value", i + 1)))
        })
        .collect()
}
