//! LiDAR-inertial odometry loop: IMU propagation, de-skew, downsampling,
//! iterated update and map maintenance, one scan at a time.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::geom::{so3_exp, ImuSample, NavState, Pose, Rotation, Scan, Vec3};
use crate::hknn::TraversalList;
use crate::octvox::{MapConfig, MapError, OctVoxMap};
use crate::registration::{
    center_downsample, deskew_scan, iterated_update, random_downsample, random_downsample_seeded, DeskewError, EstimatorConfig, UpdateError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("frame {index}: {source}")]
    Frame { index: usize, source: UpdateError },
    #[error("frame {index}: {source}")]
    Deskew { index: usize, source: DeskewError },
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryConfig {
    /// LiDAR to IMU transform.
    pub extrinsic: Pose,
    pub map: MapConfig,
    pub est: EstimatorConfig,
    /// Gravity direction in the world frame; its magnitude is re-estimated
    /// from the static window.
    pub gravity_init: Vec3,
    /// Length of the static IMU window used for initialization, seconds.
    pub imu_init_window: f64,
    /// Largest accelerometer variance (summed over axes) accepted as static.
    pub init_acc_var_max: f64,
    /// Fraction of the per-scan position correction fed back into velocity.
    pub velocity_gain: f64,
    /// Measure wall-clock and CPU time per frame. When off, timings are
    /// reported as zero so outputs are byte-reproducible.
    pub timing: bool,
    /// When set, random downsampling keeps points with probability
    /// `1 / random_rate` under this seed instead of taking a fixed stride.
    pub downsample_seed: Option<u64>,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            extrinsic: Pose::identity(),
            map: MapConfig::default(),
            est: EstimatorConfig::default(),
            gravity_init: Vec3::new(0.0, 0.0, -9.81),
            imu_init_window: 1.0,
            init_acc_var_max: 0.05,
            velocity_gain: 0.5,
            timing: true,
            downsample_seed: None,
        }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.map.validate()?;
        self.est
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.gravity_init.norm() > 0.0) {
            return Err(PipelineError::Config("gravity_init must be nonzero".into()));
        }
        if !(self.imu_init_window > 0.0) {
            return Err(PipelineError::Config("imu_init_window must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.velocity_gain) {
            return Err(PipelineError::Config("velocity_gain must lie in [0, 1]".into()));
        }
        if self.est.radius > 3.5 * self.map.subvoxel_size() + 1e-12 {
            return Err(PipelineError::Config(format!(
                "search radius {} exceeds the 7x7x7 subvoxel window for r_s {}",
                self.est.radius,
                self.map.subvoxel_size()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult {
    pub t: f64,
    pub pose: Pose,
    pub elapsed_ms: f64,
    pub n_points: usize,
    pub n_valid_corr: usize,
    pub knn_candidates_evaluated: usize,
    pub iterations_used: usize,
    /// Process CPU time over wall time times worker threads, in (0, 1].
    pub cpu_util: f64,
}

/// Midpoint integration over consecutive samples. Returns the final state and
/// the pose at every sample time.
pub fn propagate_imu(state: &NavState, samples: &[ImuSample]) -> Result<(NavState, Vec<(f64, Pose)>), PipelineError> {
    if samples.len() < 2 {
        return Err(PipelineError::Input("propagation needs at least two IMU samples".into()));
    }
    if let Some(w) = samples.windows(2).find(|w| !(w[1].t > w[0].t)) {
        return Err(PipelineError::Input(format!(
            "IMU timestamps not increasing: {} then {}",
            w[0].t, w[1].t
        )));
    }
    let mut s = *state;
    let mut track = Vec::with_capacity(samples.len());
    track.push((samples[0].t, s.pose()));
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        let omega = (w[0].gyr + w[1].gyr) * 0.5 - s.bias_gyr;
        let acc = (w[0].acc + w[1].acc) * 0.5 - s.bias_acc;
        let r_mid = s.rot.compose(&so3_exp(&(omega * (0.5 * dt))));
        let a_world = r_mid.rotate(&acc) + s.gravity;
        s.rot = s.rot.compose(&so3_exp(&(omega * dt)));
        s.pos += s.vel * dt + a_world * (0.5 * dt * dt);
        s.vel += a_world * dt;
        track.push((w[1].t, s.pose()));
    }
    Ok((s, track))
}

const TIME_EPS: f64 = 1e-9;

/// Samples covering `[t0, t1]`, with interpolated samples at both ends.
/// `imu` must be sorted and contain samples at or beyond both ends.
pub fn imu_window(imu: &[ImuSample], t0: f64, t1: f64) -> Result<Vec<ImuSample>, PipelineError> {
    if !(t1 > t0) {
        return Err(PipelineError::Input(format!("empty IMU interval [{t0}, {t1}]")));
    }
    let (Some(first), Some(last)) = (imu.first(), imu.last()) else {
        return Err(PipelineError::Input("no IMU samples".into()));
    };
    if first.t > t0 + TIME_EPS || last.t < t1 - TIME_EPS {
        return Err(PipelineError::Input(format!(
            "IMU stream [{}, {}] does not cover [{t0}, {t1}]",
            first.t, last.t
        )));
    }
    let at = |t: f64| -> ImuSample {
        let hi = imu.partition_point(|s| s.t < t);
        if hi == 0 {
            ImuSample { t, ..imu[0] }
        } else if hi == imu.len() {
            ImuSample { t, ..imu[imu.len() - 1] }
        } else {
            ImuSample::lerp(&imu[hi - 1], &imu[hi], t)
        }
    };
    let lo = imu.partition_point(|s| s.t <= t0 + TIME_EPS);
    let hi = imu.partition_point(|s| s.t < t1 - TIME_EPS);
    let mut out = Vec::with_capacity(hi.saturating_sub(lo) + 2);
    out.push(at(t0));
    out.extend_from_slice(&imu[lo..hi.max(lo)]);
    out.push(at(t1));
    Ok(out)
}

/// Gravity-aligned initial state from a static window: gyroscope bias is the
/// mean rate, attitude maps the mean specific force onto `-gravity` with no
/// rotation about the gravity axis.
pub fn initialize_from_static(
    imu: &[ImuSample],
    window: f64,
    gravity_dir: &Vec3,
    acc_var_max: f64,
) -> Result<(NavState, f64), PipelineError> {
    let Some(first) = imu.first() else {
        return Err(PipelineError::Init("no IMU samples".into()));
    };
    let t0 = first.t;
    let used: Vec<&ImuSample> = imu.iter().take_while(|s| s.t <= t0 + window + TIME_EPS).collect();
    if used.len() < 10 {
        return Err(PipelineError::Init(format!(
            "{} samples in the static window, need at least 10",
            used.len()
        )));
    }
    let n = used.len() as f64;
    let mean_acc = used.iter().map(|s| s.acc).sum::<Vec3>() / n;
    let mean_gyr = used.iter().map(|s| s.gyr).sum::<Vec3>() / n;
    let var: f64 = used.iter().map(|s| (s.acc - mean_acc).norm_squared()).sum::<f64>() / n;
    if var > acc_var_max {
        return Err(PipelineError::Init(format!(
            "motion detected during initialization (accelerometer variance {var:.4} > {acc_var_max})"
        )));
    }
    let g_mag = mean_acc.norm();
    if !(g_mag > 0.0) {
        return Err(PipelineError::Init("zero specific force in static window".into()));
    }
    let up = -gravity_dir.normalize();
    let rot = nalgebra::UnitQuaternion::rotation_between(&mean_acc, &up)
        .unwrap_or_else(|| nalgebra::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI));
    let state = NavState {
        rot: Rotation::from_wxyz(rot.w, rot.i, rot.j, rot.k),
        bias_gyr: mean_gyr,
        gravity: -up * g_mag,
        ..NavState::default()
    };
    Ok((state, t0))
}

/// Process CPU time in seconds.
fn process_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return f64::NAN;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

pub struct Odometry {
    cfg: OdometryConfig,
    map: OctVoxMap,
    list: TraversalList,
    state: NavState,
    t_state: f64,
    initialized: bool,
    frame: usize,
}

impl Odometry {
    pub fn new(cfg: OdometryConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let map = OctVoxMap::new(cfg.map.clone())?;
        let list = TraversalList::build(cfg.est.radius, map.subvoxel_size());
        Ok(Self {
            state: NavState::with_gravity(cfg.gravity_init),
            cfg,
            map,
            list,
            t_state: 0.0,
            initialized: false,
            frame: 0,
        })
    }

    pub fn config(&self) -> &OdometryConfig {
        &self.cfg
    }

    pub fn map(&self) -> &OctVoxMap {
        &self.map
    }

    pub fn state(&self) -> &NavState {
        &self.state
    }

    pub fn state_time(&self) -> f64 {
        self.t_state
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Estimates gravity and gyroscope bias from the leading static window.
    pub fn initialize(&mut self, imu: &[ImuSample]) -> Result<(), PipelineError> {
        let (state, t0) = initialize_from_static(
            imu,
            self.cfg.imu_init_window,
            &self.cfg.gravity_init,
            self.cfg.init_acc_var_max,
        )?;
        self.state = state;
        self.t_state = t0;
        self.initialized = true;
        Ok(())
    }

    /// Starts from a known state at time `t` instead of a static window.
    pub fn initialize_with(&mut self, state: NavState, t: f64) {
        self.state = state;
        self.t_state = t;
        self.initialized = true;
    }

    /// Runs one scan. `imu` may be the whole stream; only the part covering
    /// `[state time, scan end]` plus one bracketing sample on each side is used.
    pub fn process_scan(&mut self, scan: &Scan, imu: &[ImuSample]) -> Result<FrameResult, PipelineError> {
        if !self.initialized {
            return Err(PipelineError::Init("process_scan called before initialization".into()));
        }
        if !scan.is_valid() {
            return Err(PipelineError::Input(format!("frame {}: malformed scan", self.frame)));
        }
        if scan.t_begin < self.t_state - TIME_EPS {
            return Err(PipelineError::Input(format!(
                "frame {}: scan begins at {} before state time {}",
                self.frame, scan.t_begin, self.t_state
            )));
        }
        let index = self.frame;
        let wall = Instant::now();
        let cpu = process_cpu_seconds();

        let samples = imu_window(imu, self.t_state, scan.t_end)?;
        let dt = scan.t_end - self.t_state;
        let (prior, track) = propagate_imu(&self.state, &samples)?;
        let deskewed =
            deskew_scan(scan, &track, &self.cfg.extrinsic).map_err(|source| PipelineError::Deskew { index, source })?;
        let pts: Vec<Vec3> = deskewed.into_iter().map(|(p, _)| p).collect();
        let thinned = match self.cfg.downsample_seed {
            Some(seed) => random_downsample_seeded(&pts, self.cfg.est.random_rate, seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
            None => random_downsample(&pts, self.cfg.est.random_rate),
        };
        let selected = center_downsample(&thinned, self.cfg.est.downsample_res);

        let (posterior, n_corr, candidates, iters, touches) = if self.map.is_empty() {
            (prior, 0, 0, 0, None)
        } else {
            let (post, st) = iterated_update(&prior, &selected, &self.map, &self.list, &self.cfg.est, dt)
                .map_err(|source| PipelineError::Frame { index, source })?;
            (post, st.n_valid_corr, st.search.candidates, st.iterations, Some(st.touches))
        };

        let mut next = posterior;
        if dt > 0.0 {
            next.vel += (posterior.pos - prior.pos) * (self.cfg.velocity_gain / dt);
        }
        if let Some(t) = touches {
            self.map.flush_touches(std::iter::once(&t));
        }
        let pose = next.pose();
        let world: Vec<Vec3> = selected.iter().map(|p| pose.transform_point(p)).collect();
        self.map.insert_scan(world.iter())?;
        self.map.evict_to_capacity();

        self.state = next;
        self.t_state = scan.t_end;
        self.frame += 1;

        let (elapsed_ms, cpu_util) = if self.cfg.timing {
            let secs = wall.elapsed().as_secs_f64();
            let used = process_cpu_seconds() - cpu;
            let threads = crate::par::thread_count().max(1) as f64;
            let u = if secs > 0.0 && used.is_finite() {
                (used / (secs * threads)).clamp(1e-6, 1.0)
            } else {
                1.0
            };
            (secs * 1e3, u)
        } else {
            (0.0, 1.0)
        };
        Ok(FrameResult {
            t: scan.t_end,
            pose,
            elapsed_ms,
            n_points: selected.len(),
            n_valid_corr: n_corr,
            knn_candidates_evaluated: candidates,
            iterations_used: iters,
            cpu_util,
        })
    }
}

/// Initializes from the IMU stream and processes every scan in order.
pub fn run_sequence(cfg: OdometryConfig, scans: &[Scan], imu: &[ImuSample]) -> Result<Vec<FrameResult>, PipelineError> {
    let mut odo = Odometry::new(cfg)?;
    odo.initialize(imu)?;
    scans.iter().map(|s| odo.process_scan(s, imu)).collect()
}

/// Formats like C's `%.9g`, with negative zero printed as `0`.
pub fn format_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One TUM line: `t tx ty tz qx qy qz qw`.
pub fn tum_line(t: f64, pose: &Pose) -> String {
    let [w, x, y, z] = pose.rot.wxyz();
    let fields = [pose.trans.x, pose.trans.y, pose.trans.z, x, y, z, w];
    let mut line = format!("{t:.9}");
    for f in fields {
        let _ = write!(line, " {}", format_g9(f));
    }
    line
}

pub fn format_trajectory(poses: &[(f64, Pose)]) -> String {
    let mut out = String::new();
    for (t, p) in poses {
        out.push_str(&tum_line(*t, p));
        out.push('\n');
    }
    out
}

pub fn write_trajectory(results: &[FrameResult], path: &Path) -> io::Result<()> {
    let poses: Vec<(f64, Pose)> = results.iter().map(|r| (r.t, r.pose)).collect();
    fs::write(path, format_trajectory(&poses))
}

/// Parses TUM text; blank lines and `#` comments are skipped.
pub fn parse_trajectory(text: &str) -> Result<Vec<(f64, Pose)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?;
        if v.len() != 8 {
            return Err(format!("line {}: expected 8 fields, got {}", i + 1, v.len()));
        }
        let q = nalgebra::Quaternion::new(v[7], v[4], v[5], v[6]);
        if !(q.norm() > 0.5) {
            return Err(format!("line {}: quaternion is not unit length", i + 1));
        }
        let rot = Rotation::from_wxyz(v[7], v[4], v[5], v[6]);
        out.push((v[0], Pose::new(rot, Vec3::new(v[1], v[2], v[3]))));
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(f64, Pose)>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_trajectory(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{so3_log, RawPoint};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn constant(n: usize, rate: f64, acc: Vec3, gyr: Vec3) -> Vec<ImuSample> {
        (0..n).map(|i| ImuSample::new(i as f64 / rate, acc, gyr)).collect()
    }

    #[test]
    fn static_equilibrium() {
        let s = NavState::default();
        let imu = constant(201, 200.0, Vec3::new(0.0, 0.0, 9.81), Vec3::zeros());
        let (out, track) = propagate_imu(&s, &imu).unwrap();
        assert_abs_diff_eq!(out.pos, s.pos, epsilon = 1e-9);
        assert_abs_diff_eq!(out.vel, s.vel, epsilon = 1e-9);
        assert!(so3_log(&out.rot).norm() < 1e-9);
        assert_eq!(track.len(), 201);
    }

    #[test]
    fn constant_acceleration_without_gravity() {
        let s = NavState::with_gravity(Vec3::zeros());
        let imu = constant(101, 100.0, Vec3::new(1.0, 0.0, 0.0), Vec3::zeros());
        let (out, _) = propagate_imu(&s, &imu).unwrap();
        assert_abs_diff_eq!(out.vel, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-6);
        assert_abs_diff_eq!(out.pos, Vec3::new(0.5, 0.0, 0.0), epsilon = 1e-4);
    }

    #[test]
    fn constant_yaw_rate() {
        let s = NavState::with_gravity(Vec3::zeros());
        let imu = constant(101, 100.0, Vec3::zeros(), Vec3::new(0.0, 0.0, FRAC_PI_2));
        let (out, _) = propagate_imu(&s, &imu).unwrap();
        let phi = so3_log(&out.rot);
        assert_abs_diff_eq!(phi, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-6);
    }

    #[test]
    fn propagation_rejects_bad_timestamps() {
        let s = NavState::default();
        let one = constant(1, 100.0, Vec3::zeros(), Vec3::zeros());
        assert!(matches!(propagate_imu(&s, &one), Err(PipelineError::Input(_))));
        let mut imu = constant(5, 100.0, Vec3::zeros(), Vec3::zeros());
        imu[3].t = imu[2].t;
        assert!(matches!(propagate_imu(&s, &imu), Err(PipelineError::Input(_))));
    }

    #[test]
    fn window_interpolates_ends() {
        let imu: Vec<ImuSample> = (0..11)
            .map(|i| ImuSample::new(i as f64 * 0.01, Vec3::new(i as f64, 0.0, 0.0), Vec3::zeros()))
            .collect();
        let w = imu_window(&imu, 0.015, 0.05).unwrap();
        assert_abs_diff_eq!(w[0].t, 0.015);
        assert_abs_diff_eq!(w[0].acc.x, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w.last().unwrap().t, 0.05);
        let ts: Vec<f64> = w.iter().map(|s| s.t).collect();
        assert!(ts.windows(2).all(|p| p[1] > p[0]), "{ts:?}");
        assert_eq!(w.len(), 5);
        assert!(imu_window(&imu, 0.0, 0.2).is_err());
        assert!(imu_window(&imu, 0.05, 0.05).is_err());
    }

    #[test]
    fn initialization_levels_attitude_and_detects_motion() {
        let tilt = so3_exp(&Vec3::new(0.1, -0.05, 0.0));
        let f = tilt.inverse().rotate(&Vec3::new(0.0, 0.0, 9.8));
        let imu = constant(300, 200.0, f, Vec3::new(0.01, 0.0, -0.02));
        let (s, t0) = initialize_from_static(&imu, 1.0, &Vec3::new(0.0, 0.0, -1.0), 0.05).unwrap();
        assert_eq!(t0, 0.0);
        assert_abs_diff_eq!(s.bias_gyr, Vec3::new(0.01, 0.0, -0.02), epsilon = 1e-12);
        assert_abs_diff_eq!(s.rot.rotate(&f), Vec3::new(0.0, 0.0, 9.8), epsilon = 1e-9);
        assert_abs_diff_eq!(s.gravity, Vec3::new(0.0, 0.0, -9.8), epsilon = 1e-9);

        let shaky: Vec<ImuSample> = (0..300)
            .map(|i| ImuSample::new(i as f64 / 200.0, f + Vec3::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0, 0.0), Vec3::zeros()))
            .collect();
        assert!(matches!(
            initialize_from_static(&shaky, 1.0, &Vec3::new(0.0, 0.0, -1.0), 0.05),
            Err(PipelineError::Init(_))
        ));
    }

    #[test]
    fn first_scan_seeds_map_with_prior() {
        let cfg = OdometryConfig {
            timing: false,
            ..Default::default()
        };
        let mut odo = Odometry::new(cfg).unwrap();
        let imu = constant(400, 200.0, Vec3::new(0.0, 0.0, 9.81), Vec3::zeros());
        odo.initialize(&imu).unwrap();
        let points: Vec<RawPoint> = (0..300)
            .map(|i| RawPoint {
                p: Vec3::new((i % 20) as f64 * 0.3, (i / 20) as f64 * 0.3, -1.0),
                t_off: i as f64 / 3000.0,
            })
            .collect();
        let scan = Scan {
            t_begin: 0.0,
            t_end: 0.1,
            points,
        };
        let r = odo.process_scan(&scan, &imu).unwrap();
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.elapsed_ms, 0.0);
        assert_abs_diff_eq!(r.pose.trans, Vec3::zeros(), epsilon = 1e-9);
        assert!(!odo.map().is_empty());
        assert_eq!(odo.state_time(), 0.1);
    }

    #[test]
    fn scan_before_state_time_is_rejected() {
        let mut odo = Odometry::new(OdometryConfig::default()).unwrap();
        let scan = Scan::default();
        assert!(matches!(odo.process_scan(&scan, &[]), Err(PipelineError::Init(_))));
        odo.initialize_with(NavState::default(), 1.0);
        assert!(matches!(odo.process_scan(&scan, &[]), Err(PipelineError::Input(_))));
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(format_g9(0.0), "0");
        assert_eq!(format_g9(-0.0), "0");
        assert_eq!(format_g9(1.0), "1");
        assert_eq!(format_g9(-2.5), "-2.5");
        assert_eq!(format_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g9(123456789.0), "123456789");
        assert_eq!(format_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_g9(1.5e-7), "1.5e-07");
        assert_eq!(format_g9(0.0001), "0.0001");
        assert_eq!(format_g9(0.0000150669434), "1.50669434e-05");
        assert_eq!(format_g9(-0.00099999), "-0.00099999");
    }

    #[test]
    fn tum_identity_line() {
        assert_eq!(tum_line(0.0, &Pose::identity()), "0.000000000 0 0 0 0 0 0 1");
        assert_eq!(format_trajectory(&[]), "");
    }

    #[test]
    fn tum_round_trip() {
        let poses: Vec<(f64, Pose)> = (0..50)
            .map(|i| {
                let f = i as f64;
                (
                    1.0 + f * 0.1,
                    Pose::new(
                        so3_exp(&Vec3::new((f * 0.3).sin(), (f * 0.7).cos(), f * 0.05)),
                        Vec3::new(f * 1.234567, -f * 0.0001, 3.0 - f),
                    ),
                )
            })
            .collect();
        let back = parse_trajectory(&format_trajectory(&poses)).unwrap();
        assert_eq!(back.len(), poses.len());
        for ((ta, a), (tb, b)) in poses.iter().zip(&back) {
            assert!((ta - tb).abs() <= 1e-8 * ta.abs().max(1.0));
            assert!((a.trans - b.trans).norm() <= 1e-8 * a.trans.norm().max(1.0));
            assert!(so3_log(&a.rot.inverse().compose(&b.rot)).norm() <= 1e-8);
        }
        assert!(parse_trajectory("1 2 3").is_err());
        assert!(parse_trajectory("# header\n\n").unwrap().is_empty());
    }

    #[test]
    fn write_trajectory_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.txt");
        write_trajectory(&[], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        let r = FrameResult {
            t: 0.0,
            pose: Pose::identity(),
            elapsed_ms: 0.0,
            n_points: 0,
            n_valid_corr: 0,
            knn_candidates_evaluated: 0,
            iterations_used: 0,
            cpu_util: 1.0,
        };
        write_trajectory(&[r], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "0.000000000 0 0 0 0 0 0 1\n");
        assert_eq!(read_trajectory(&path).unwrap(), vec![(0.0, Pose::identity())]);
    }
}
