//! Rotations, rigid transforms and the navigation state.
//!
//! Rotations are unit quaternions that are re-normalized after every
//! composition. The SO(3) exponential and logarithm are written out here
//! rather than delegated to `nalgebra` so that the small-angle branch is
//! explicit.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle (rad) the exponential and logarithm use a Taylor expansion.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(UnitQuaternion::identity())
    }

    /// Builds a rotation from quaternion components, normalizing them.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self(UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
    }

    pub fn from_matrix(m: &Mat3) -> Self {
        Self(UnitQuaternion::from_matrix(m))
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    /// Components as `(w, x, y, z)`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn matrix(&self) -> Mat3 {
        *self.0.to_rotation_matrix().matrix()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0.transform_vector(v)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// `self * other`, re-normalized.
    pub fn compose(&self, other: &Rotation) -> Self {
        let mut q = *(self.0 * other.0).quaternion();
        q /= q.norm();
        Self(UnitQuaternion::new_unchecked(q))
    }

    /// Right perturbation `self * exp(omega)`.
    pub fn retract(&self, omega: &Vec3) -> Self {
        self.compose(&so3_exp(omega))
    }

    /// Geodesic interpolation: `alpha = 0` gives `self`, `alpha = 1` gives `other`.
    pub fn slerp(&self, other: &Rotation, alpha: f64) -> Self {
        let delta = so3_log(&self.inverse().compose(other));
        self.retract(&(delta * alpha))
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        so3_log(self).norm()
    }

    pub fn norm_error(&self) -> f64 {
        (self.0.quaternion().norm() - 1.0).abs()
    }
}

/// Rodrigues exponential of a rotation vector.
pub fn so3_exp(omega: &Vec3) -> Rotation {
    let theta_sq = omega.norm_squared();
    let theta = theta_sq.sqrt();
    let (w, s) = if theta < SMALL_ANGLE {
        // cos(t/2) and sin(t/2)/t to second order
        (1.0 - theta_sq / 8.0, 0.5 - theta_sq / 48.0)
    } else {
        let half = 0.5 * theta;
        (half.cos(), half.sin() / theta)
    };
    let mut q = Quaternion::new(w, s * omega.x, s * omega.y, s * omega.z);
    q /= q.norm();
    Rotation(UnitQuaternion::new_unchecked(q))
}

/// Inverse of [`so3_exp`] on rotation vectors with norm below pi.
pub fn so3_log(r: &Rotation) -> Vec3 {
    let q = r.0.quaternion();
    // q and -q are the same rotation; pick w >= 0 so the angle lands in [0, pi]
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let n = v.norm();
    if n < SMALL_ANGLE {
        // theta = 2 atan(n / w) ~ 2 n / w (1 - n^2 / (3 w^2))
        let scale = 2.0 / w * (1.0 - n * n / (3.0 * w * w));
        v * scale
    } else {
        let theta = 2.0 * n.atan2(w);
        v * (theta / n)
    }
}

/// Right Jacobian of SO(3): `exp(phi + d) ~ exp(phi) exp(jr(phi) d)`.
pub fn so3_right_jacobian(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    if theta < 1e-6 {
        return Mat3::identity() - 0.5 * k + k * k / 6.0;
    }
    let t2 = theta * theta;
    Mat3::identity() - (1.0 - theta.cos()) / t2 * k + (theta - theta.sin()) / (t2 * theta) * k * k
}

/// Inverse of [`so3_right_jacobian`].
pub fn so3_right_jacobian_inv(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    if theta < 1e-6 {
        return Mat3::identity() + 0.5 * k + k * k / 12.0;
    }
    let coef = 1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Mat3::identity() + 0.5 * k + coef * k * k
}

/// Rigid transform `x -> rot * x + trans`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub rot: Rotation,
    pub trans: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rot: Rotation::identity(),
            trans: Vec3::zeros(),
        }
    }

    pub fn new(rot: Rotation, trans: Vec3) -> Self {
        Self { rot, trans }
    }

    pub fn from_translation(trans: Vec3) -> Self {
        Self {
            rot: Rotation::identity(),
            trans,
        }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        compose(self, other)
    }

    pub fn inverse(&self) -> Pose {
        invert(self)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        transform_point(self, p)
    }

    /// Translation interpolated linearly, rotation along the geodesic.
    pub fn interpolate(&self, other: &Pose, alpha: f64) -> Pose {
        Pose {
            rot: self.rot.slerp(&other.rot, alpha),
            trans: self.trans + (other.trans - self.trans) * alpha,
        }
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rot: a.rot.compose(&b.rot),
        trans: a.rot.rotate(&b.trans) + a.trans,
    }
}

pub fn invert(a: &Pose) -> Pose {
    let rot = a.rot.inverse();
    Pose {
        trans: -rot.rotate(&a.trans),
        rot,
    }
}

pub fn transform_point(a: &Pose, p: &Vec3) -> Vec3 {
    a.rot.rotate(p) + a.trans
}

/// Full navigation state: attitude, position, velocity, IMU biases and gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub rot: Rotation,
    pub pos: Vec3,
    pub vel: Vec3,
    pub bias_acc: Vec3,
    pub bias_gyr: Vec3,
    pub gravity: Vec3,
}

impl Default for NavState {
    fn default() -> Self {
        Self {
            rot: Rotation::identity(),
            pos: Vec3::zeros(),
            vel: Vec3::zeros(),
            bias_acc: Vec3::zeros(),
            bias_gyr: Vec3::zeros(),
            gravity: Vec3::new(0.0, 0.0, -9.81),
        }
    }
}

impl NavState {
    pub fn with_gravity(gravity: Vec3) -> Self {
        Self {
            gravity,
            ..Self::default()
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.rot, self.pos)
    }

    pub fn set_pose(&mut self, pose: &Pose) {
        self.rot = pose.rot;
        self.pos = pose.trans;
    }

    /// True if the gravity magnitude lies within `nominal +- tol`.
    pub fn gravity_ok(&self, nominal: f64, tol: f64) -> bool {
        (self.gravity.norm() - nominal).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub acc: Vec3,
    pub gyr: Vec3,
}

impl ImuSample {
    pub fn new(t: f64, acc: Vec3, gyr: Vec3) -> Self {
        Self { t, acc, gyr }
    }

    /// Linear interpolation between two samples at time `t`.
    pub fn lerp(a: &ImuSample, b: &ImuSample, t: f64) -> ImuSample {
        let span = b.t - a.t;
        let alpha = if span > 0.0 { (t - a.t) / span } else { 0.0 };
        ImuSample {
            t,
            acc: a.acc + (b.acc - a.acc) * alpha,
            gyr: a.gyr + (b.gyr - a.gyr) * alpha,
        }
    }
}

/// A LiDAR return in the sensor frame, `t_off` seconds after the scan began.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub p: Vec3,
    pub t_off: f64,
}

/// One LiDAR sweep covering `[t_begin, t_end]`, anchored at `t_end`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scan {
    pub t_begin: f64,
    pub t_end: f64,
    pub points: Vec<RawPoint>,
}

impl Scan {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_begin
    }

    /// Checks the points are finite and their offsets fall inside the sweep.
    pub fn is_valid(&self) -> bool {
        let dur = self.duration();
        dur >= 0.0
            && self.points.iter().all(|pt| {
                pt.p.iter().all(|c| c.is_finite()) && pt.t_off >= 0.0 && pt.t_off <= dur + 1e-9
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_rotation(rng: &mut impl Rng) -> Rotation {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        so3_exp(&(axis.normalize() * rng.random_range(0.0..PI)))
    }

    fn random_pose(rng: &mut impl Rng) -> Pose {
        Pose::new(
            random_rotation(rng),
            Vec3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            ),
        )
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let r = so3_exp(&Vec3::zeros());
        assert_eq!(r.wxyz(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(so3_log(&Rotation::identity()), Vec3::zeros());
    }

    #[test]
    fn quarter_turn_yaw() {
        let r = so3_exp(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        let x = r.rotate(&Vec3::x());
        assert_abs_diff_eq!(x, Vec3::y(), epsilon = 1e-12);
        let w = so3_log(&r);
        assert_abs_diff_eq!(w, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-12);
    }

    #[test]
    fn log_near_pi_is_stable() {
        let w = Vec3::new(0.0, PI - 1e-7, 0.0);
        let back = so3_log(&so3_exp(&w));
        assert_abs_diff_eq!(back, w, epsilon = 1e-9);
        // exactly pi: either sign is a valid answer
        let half = so3_log(&so3_exp(&Vec3::new(PI, 0.0, 0.0)));
        assert_abs_diff_eq!(half.norm(), PI, epsilon = 1e-12);
    }

    #[test]
    fn small_angle_branch_matches_closed_form() {
        let w = Vec3::new(3e-9, -2e-9, 1e-9);
        let r = so3_exp(&w);
        let back = so3_log(&r);
        assert_abs_diff_eq!(back, w, epsilon = 1e-20);
        // just above the threshold the closed form must agree
        let w2 = Vec3::new(2e-8, 0.0, 0.0);
        assert_abs_diff_eq!(so3_log(&so3_exp(&w2)), w2, epsilon = 1e-20);
    }

    #[test]
    fn exp_log_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let axis = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let w = axis * rng.random_range(1e-6..PI - 1e-3);
            assert_abs_diff_eq!(so3_log(&so3_exp(&w)), w, epsilon = 1e-9);
        }
    }

    #[test]
    fn pose_identity_and_translation() {
        let p = Vec3::new(1.0, -2.0, 3.5);
        assert_eq!(transform_point(&Pose::identity(), &p), p);
        let t = Vec3::new(0.5, 0.25, -1.0);
        assert_eq!(transform_point(&Pose::from_translation(t), &p), p + t);
    }

    #[test]
    fn pose_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = random_pose(&mut rng);
            let p = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let back = transform_point(&invert(&a), &transform_point(&a, &p));
            assert_abs_diff_eq!(back, p, epsilon = 1e-9);
            let id = compose(&a, &invert(&a));
            assert!(id.rot.angle() < 1e-9);
            assert!(id.trans.norm() < 1e-9);
        }
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (a, b, c) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
            let l = compose(&compose(&a, &b), &c);
            let r = compose(&a, &compose(&b, &c));
            assert!(l.rot.inverse().compose(&r.rot).angle() < 1e-9);
            assert_abs_diff_eq!(l.trans, r.trans, epsilon = 1e-9);
        }
    }

    #[test]
    fn long_composition_chain_stays_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = Rotation::identity();
        for _ in 0..100_000 {
            let step = Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            );
            r = r.compose(&so3_exp(&step));
        }
        assert!(r.norm_error() < 1e-9);
        let m = r.matrix();
        assert_abs_diff_eq!(m * m.transpose(), Mat3::identity(), epsilon = 1e-9);
    }

    #[test]
    fn right_jacobian_matches_first_order_expansion() {
        let phi = Vec3::new(0.3, -0.7, 0.4);
        let d = Vec3::new(1e-6, -2e-6, 0.5e-6);
        let lhs = so3_exp(&(phi + d));
        let rhs = so3_exp(&phi).retract(&(so3_right_jacobian(&phi) * d));
        assert!(lhs.inverse().compose(&rhs).angle() < 1e-11);
        let prod = so3_right_jacobian(&phi) * so3_right_jacobian_inv(&phi);
        assert_abs_diff_eq!(prod, Mat3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = Rotation::identity();
        let b = so3_exp(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        assert!(a.slerp(&b, 0.0).inverse().compose(&a).angle() < 1e-12);
        assert!(a.slerp(&b, 1.0).inverse().compose(&b).angle() < 1e-12);
        let mid = so3_log(&a.slerp(&b, 0.5));
        assert_abs_diff_eq!(mid, Vec3::new(0.0, 0.0, FRAC_PI_2 / 2.0), epsilon = 1e-12);
    }

    #[test]
    fn scan_validity() {
        let mut scan = Scan {
            t_begin: 0.0,
            t_end: 0.1,
            points: vec![RawPoint {
                p: Vec3::x(),
                t_off: 0.05,
            }],
        };
        assert!(scan.is_valid());
        scan.points[0].t_off = 0.2;
        assert!(!scan.is_valid());
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, ang in 1e-6f64..(PI - 1e-3)) {
            let axis = Vec3::new(x, y, z);
            prop_assume!(axis.norm() > 1e-3);
            let w = axis.normalize() * ang;
            let back = so3_log(&so3_exp(&w));
            prop_assert!((back - w).norm() < 1e-9);
        }
    }
}
