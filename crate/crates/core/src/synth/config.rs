//! Flat `key = value` run configuration. Lines starting with `#` are
//! comments. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `seed` | seed for uniform downsampling mode |
//! | `downsample_mode` | `stride` (default) or `uniform` |
//! | `extrinsic` | LiDAR to IMU as `tx ty tz qx qy qz qw` |
//! | `gravity` | world gravity `gx gy gz` |
//! | `voxel_size`, `tau_merge`, `n_max`, `capacity` | map |
//! | `k`, `radius`, `max_iter`, `plane_pt_thresh`, `downsample_res`, `random_rate`, `converge_eps` | estimator |
//! | `estimate_bias_gravity`, `prior_weight`, `bias_prior_weight`, `gravity_prior_weight` | estimator |
//! | `meas_sigma`, `huber`, `early_termination`, `min_correspondences` | estimator |
//! | `imu_init_window`, `init_acc_var_max`, `velocity_gain`, `timing` | pipeline |

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::geom::{Pose, Rotation, Vec3};
use crate::pipeline::OdometryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DownsampleMode {
    #[default]
    Stride,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub odometry: OdometryConfig,
    pub seed: u64,
    pub downsample_mode: DownsampleMode,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{key}: cannot parse '{v}': {e}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(format!("{key}: expected a boolean, got '{v}'")),
    }
}

fn parse_floats(key: &str, v: &str, n: usize) -> Result<Vec<f64>, String> {
    let out: Vec<f64> = v
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse::<f64>(key, s))
        .collect::<Result<_, _>>()?;
    if out.len() != n {
        return Err(format!("{key}: expected {n} numbers, got {}", out.len()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        cfg.odometry.downsample_seed = match cfg.downsample_mode {
            DownsampleMode::Stride => None,
            DownsampleMode::Uniform => Some(cfg.seed),
        };
        cfg.odometry.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let o = &mut self.odometry;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "downsample_mode" => {
                self.downsample_mode = match v {
                    "stride" => DownsampleMode::Stride,
                    "uniform" => DownsampleMode::Uniform,
                    _ => return Err(format!("{key}: expected stride or uniform, got '{v}'")),
                }
            }
            "extrinsic" => {
                let f = parse_floats(key, v, 7)?;
                let q = nalgebra::Quaternion::new(f[6], f[3], f[4], f[5]);
                if (q.norm() - 1.0).abs() > 1e-6 {
                    return Err(format!("{key}: quaternion must be unit length"));
                }
                o.extrinsic = Pose::new(Rotation::from_wxyz(f[6], f[3], f[4], f[5]), Vec3::new(f[0], f[1], f[2]));
            }
            "gravity" => {
                let f = parse_floats(key, v, 3)?;
                o.gravity_init = Vec3::new(f[0], f[1], f[2]);
            }
            "voxel_size" => o.map.voxel_size = parse(key, v)?,
            "tau_merge" => o.map.tau_merge = parse(key, v)?,
            "n_max" => o.map.n_max = parse(key, v)?,
            "capacity" => o.map.capacity = parse(key, v)?,
            "k" => o.est.k = parse(key, v)?,
            "radius" => o.est.radius = parse(key, v)?,
            "max_iter" => o.est.max_iter = parse(key, v)?,
            "plane_pt_thresh" => o.est.plane_pt_thresh = parse(key, v)?,
            "downsample_res" => o.est.downsample_res = parse(key, v)?,
            "random_rate" => o.est.random_rate = parse(key, v)?,
            "converge_eps" => o.est.converge_eps = parse(key, v)?,
            "estimate_bias_gravity" => o.est.estimate_bias_gravity = parse_bool(key, v)?,
            "prior_weight" => o.est.prior_weight = parse(key, v)?,
            "bias_prior_weight" => o.est.bias_prior_weight = parse(key, v)?,
            "gravity_prior_weight" => o.est.gravity_prior_weight = parse(key, v)?,
            "meas_sigma" => o.est.meas_sigma = parse(key, v)?,
            "huber" => {
                o.est.huber = match v {
                    "none" | "off" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "early_termination" => o.est.early_termination = parse_bool(key, v)?,
            "min_correspondences" => o.est.min_correspondences = parse(key, v)?,
            "imu_init_window" => o.imu_init_window = parse(key, v)?,
            "init_acc_var_max" => o.init_acc_var_max = parse(key, v)?,
            "velocity_gain" => o.velocity_gain = parse(key, v)?,
            "timing" => o.timing = parse_bool(key, v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}
