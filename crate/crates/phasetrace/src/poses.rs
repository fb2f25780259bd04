//! Radar pose specifications shared by scene manifests and scenario configs.

use std::f64::consts::TAU;

use phasetrace_core::scene::RadarPose;
use phasetrace_core::{Rotation, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One explicit pose. Orientation comes from at most one of `look_at`,
/// `direction` or `yaw_pitch_roll` (radians); the default faces +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub position: [f64; 3],
    /// Separate receiver position; monostatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look_at: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_pitch_roll: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facing {
    #[default]
    Inward,
    Outward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoseSpec {
    Single(PoseEntry),
    /// `count` monostatic poses evenly spaced on a horizontal circle.
    Circle {
        center: [f64; 3],
        radius: f64,
        count: usize,
        #[serde(default)]
        start_angle: f64,
        #[serde(default)]
        facing: Facing,
    },
    /// `count` monostatic poses from `start` to `end` inclusive, all facing `direction`.
    Line {
        start: [f64; 3],
        end: [f64; 3],
        count: usize,
        #[serde(default = "default_direction")]
        direction: [f64; 3],
    },
    List {
        items: Vec<PoseEntry>,
    },
}

fn default_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn finite3(a: [f64; 3]) -> bool {
    a.iter().all(|v| v.is_finite())
}

fn facing(dir: Vec3, field: &str) -> Result<Rotation> {
    Rotation::looking_at(dir).ok_or_else(|| Error::config(field, "direction must be non-zero and finite"))
}

impl PoseEntry {
    pub fn monostatic(position: [f64; 3]) -> Self {
        PoseEntry {
            position,
            rx_position: None,
            look_at: None,
            direction: None,
            yaw_pitch_roll: None,
        }
    }

    pub fn resolve(&self, field: &str) -> Result<RadarPose> {
        if !finite3(self.position) || !self.rx_position.is_none_or(finite3) {
            return Err(Error::config(field, "positions must be finite"));
        }
        let p = Vec3::from_array(self.position);
        let given = [self.look_at.is_some(), self.direction.is_some(), self.yaw_pitch_roll.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(Error::config(field, "give at most one of look_at, direction, yaw_pitch_roll"));
        }
        let rot = if let Some(t) = self.look_at {
            facing(Vec3::from_array(t) - p, &format!("{field}.look_at"))?
        } else if let Some(d) = self.direction {
            facing(Vec3::from_array(d), &format!("{field}.direction"))?
        } else if let Some([y, pi, r]) = self.yaw_pitch_roll {
            Rotation::from_yaw_pitch_roll(y, pi, r)
        } else {
            Rotation::IDENTITY
        };
        let mut pose = RadarPose::monostatic(p, rot);
        if let Some(rx) = self.rx_position {
            pose.rx_position = Vec3::from_array(rx);
        }
        Ok(pose)
    }
}

impl PoseSpec {
    /// Expand into concrete poses; `field` prefixes error messages.
    pub fn generate(&self, field: &str) -> Result<Vec<RadarPose>> {
        let poses = match self {
            PoseSpec::Single(e) => vec![e.resolve(field)?],
            PoseSpec::Circle {
                center,
                radius,
                count,
                start_angle,
                facing: face,
            } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::config(format!("{field}.radius"), "must be positive"));
                }
                if !finite3(*center) || !start_angle.is_finite() {
                    return Err(Error::config(field, "center and start_angle must be finite"));
                }
                let c = Vec3::from_array(*center);
                (0..*count)
                    .map(|k| {
                        let th = start_angle + TAU * k as f64 / *count as f64;
                        let out = Vec3::new(th.cos(), th.sin(), 0.0);
                        let dir = match face {
                            Facing::Inward => -out,
                            Facing::Outward => out,
                        };
                        Ok(RadarPose::monostatic(c + out * *radius, facing(dir, field)?))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            PoseSpec::Line {
                start,
                end,
                count,
                direction,
            } => {
                if !finite3(*start) || !finite3(*end) {
                    return Err(Error::config(field, "start and end must be finite"));
                }
                let rot = facing(Vec3::from_array(*direction), &format!("{field}.direction"))?;
                let (a, b) = (Vec3::from_array(*start), Vec3::from_array(*end));
                (0..*count)
                    .map(|k| {
                        let t = if *count > 1 { k as f64 / (*count - 1) as f64 } else { 0.0 };
                        RadarPose::monostatic(a + (b - a) * t, rot)
                    })
                    .collect()
            }
            PoseSpec::List { items } => items
                .iter()
                .enumerate()
                .map(|(i, e)| e.resolve(&format!("{field}.items[{i}]")))
                .collect::<Result<Vec<_>>>()?,
        };
        if poses.is_empty() {
            return Err(Error::config(field, "pose specification generates no poses"));
        }
        Ok(poses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_faces_centre() {
        let spec = PoseSpec::Circle {
            center: [1.0, 2.0, 0.5],
            radius: 0.5,
            count: 4,
            start_angle: 0.0,
            facing: Facing::Inward,
        };
        let poses = spec.generate("poses").unwrap();
        assert_eq!(poses.len(), 4);
        let c = Vec3::new(1.0, 2.0, 0.5);
        for p in &poses {
            assert!((p.tx_position.distance(c) - 0.5).abs() < 1e-12);
            let bore = p.tx_orientation.rotate(Vec3::X);
            let to_c = (c - p.tx_position).try_normalize().unwrap();
            assert!((bore.dot(to_c) - 1.0).abs() < 1e-12);
            assert!(p.validate(0).is_ok());
        }
        assert!((poses[1].tx_position - Vec3::new(1.0, 2.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn line_is_inclusive() {
        let spec = PoseSpec::Line {
            start: [0.0; 3],
            end: [1.0, 0.0, 0.0],
            count: 3,
            direction: [0.0, 1.0, 0.0],
        };
        let xs: Vec<f64> = spec.generate("p").unwrap().iter().map(|p| p.tx_position.x).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn zero_count_is_rejected_with_field() {
        let spec = PoseSpec::Circle {
            center: [0.0; 3],
            radius: 1.0,
            count: 0,
            start_angle: 0.0,
            facing: Facing::Inward,
        };
        let err = spec.generate("poses").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`poses`"), "{err}");
    }

    #[test]
    fn conflicting_orientation_rejected() {
        let mut e = PoseEntry::monostatic([0.0; 3]);
        e.direction = Some([1.0, 0.0, 0.0]);
        e.yaw_pitch_roll = Some([0.0; 3]);
        assert!(e.resolve("p").is_err());
        e.yaw_pitch_roll = None;
        e.rx_position = Some([0.0, 1.0, 0.0]);
        let pose = e.resolve("p").unwrap();
        assert_eq!(pose.rx_position, Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: PoseSpec = toml::from_str("kind = \"circle\"\ncenter = [0, 0, 1]\nradius = 0.5\ncount = 12\n").unwrap();
        assert_eq!(spec.generate("p").unwrap().len(), 12);
        let spec: PoseSpec = toml::from_str("kind = \"single\"\nposition = [0, 0, 1]\nlook_at = [3, 0, 1]\n").unwrap();
        assert_eq!(spec.generate("p").unwrap().len(), 1);
    }
}
