use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{ImuSample, Pose, RawPoint, Scan, Vec3};

use super::scene::SceneSpec;
use super::trajectory::TrajectorySpec;

pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub scan_rate: f64,
    pub imu_rate: f64,
    pub rays: usize,
    pub channels: usize,
    /// Vertical field of view, degrees, split evenly above and below the
    /// horizon.
    pub fov: f64,
    pub max_range: f64,
    pub range_sigma: f64,
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub accel_bias: Vec3,
    pub gyro_bias: Vec3,
    /// LiDAR to IMU transform.
    pub extrinsic: Pose,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            scan_rate: 10.0,
            imu_rate: 200.0,
            rays: 2000,
            channels: 16,
            fov: 60.0,
            max_range: 50.0,
            range_sigma: 0.01,
            accel_sigma: 0.02,
            gyro_sigma: 0.002,
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::new(0.002, -0.001, 0.0015),
            extrinsic: Pose::identity(),
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.scan_rate > 0.0 && self.imu_rate > 0.0) {
            return Err("rates must be positive".into());
        }
        if self.rays == 0 || self.channels == 0 {
            return Err("rays and channels must be positive".into());
        }
        if !(self.fov >= 0.0 && self.fov < 180.0) || !(self.max_range > 0.0) {
            return Err("fov must lie in [0, 180) and max_range be positive".into());
        }
        if !(self.range_sigma >= 0.0 && self.accel_sigma >= 0.0 && self.gyro_sigma >= 0.0) {
            return Err("noise sigmas must be non-negative".into());
        }
        Ok(())
    }

    /// Zero-noise, zero-bias copy.
    pub fn noiseless(&self) -> Self {
        Self {
            range_sigma: 0.0,
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            ..self.clone()
        }
    }

    pub fn scan_period(&self) -> f64 {
        1.0 / self.scan_rate
    }

    /// Unit direction of ray `i` in the LiDAR frame and its offset into the
    /// sweep.
    pub fn ray(&self, i: usize) -> (Vec3, f64) {
        let az = std::f64::consts::TAU * i as f64 / self.rays as f64;
        let c = i % self.channels;
        let half = self.fov.to_radians() * 0.5;
        let el = if self.channels > 1 {
            -half + 2.0 * half * c as f64 / (self.channels - 1) as f64
        } else {
            0.0
        };
        let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let t_off = (i + 1) as f64 / self.rays as f64 * self.scan_period();
        (dir, t_off)
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated non-negative")
}

/// Sweep ending at `t_end`. Each ray is cast from the true pose at its own
/// timestamp, so motion skew is reproduced; rays that miss everything or
/// exceed `max_range` are dropped.
pub fn synthesize_scan(
    scene: &SceneSpec,
    traj: &TrajectorySpec,
    t_end: f64,
    sensor: &SensorSpec,
    seed: u64,
) -> Result<Scan, String> {
    sensor.validate()?;
    let t_begin = t_end - sensor.scan_period();
    if t_begin < -1e-9 || t_end > traj.duration + 1e-9 {
        return Err(format!(
            "scan [{t_begin}, {t_end}] outside trajectory [0, {}]",
            traj.duration
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal(sensor.range_sigma);
    let mut points = Vec::with_capacity(sensor.rays);
    for i in 0..sensor.rays {
        let (dir_l, t_off) = sensor.ray(i);
        let lidar = traj.pose(t_begin + t_off).compose(&sensor.extrinsic);
        let dir_w = lidar.rot.rotate(&dir_l);
        // always draw, so the noise sequence does not depend on hits
        let n = noise.sample(&mut rng);
        let Some(range) = scene.raycast(&lidar.trans, &dir_w) else {
            continue;
        };
        if range > sensor.max_range {
            continue;
        }
        points.push(RawPoint {
            p: dir_l * (range + n),
            t_off,
        });
    }
    Ok(Scan {
        t_begin,
        t_end,
        points,
    })
}

/// IMU stream over `[0, duration]` at `imu_rate`.
pub fn synthesize_imu(traj: &TrajectorySpec, sensor: &SensorSpec, seed: u64) -> Vec<ImuSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = normal(sensor.accel_sigma);
    let ng = normal(sensor.gyro_sigma);
    let n = (traj.duration * sensor.imu_rate + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 / sensor.imu_rate;
            let s = traj.sample(t);
            let rt = s.pose.rot.inverse();
            let noise_a = Vec3::new(na.sample(&mut rng), na.sample(&mut rng), na.sample(&mut rng));
            let noise_g = Vec3::new(ng.sample(&mut rng), ng.sample(&mut rng), ng.sample(&mut rng));
            ImuSample {
                t,
                acc: rt.rotate(&(s.acc - GRAVITY)) + sensor.accel_bias + noise_a,
                gyr: s.omega_body + sensor.gyro_bias + noise_g,
            }
        })
        .collect()
}
