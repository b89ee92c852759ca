use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use crate::geom::{so3_exp, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Static,
    Line,
    Circle,
    Figure8,
}

impl FromStr for TrajectoryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Self::Static),
            "line" => Ok(Self::Line),
            "circle" => Ok(Self::Circle),
            "figure8" => Ok(Self::Figure8),
            other => Err(format!("unknown trajectory kind '{other}' (static, line, circle, figure8)")),
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Static => "static",
            Self::Line => "line",
            Self::Circle => "circle",
            Self::Figure8 => "figure8",
        })
    }
}

/// Closed-form level trajectory. Motion starts after a static lead-in and a
/// smooth ramp during which speed rises from zero with continuous
/// acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Circle and figure-8 radius, line amplitude; meters.
    pub radius: f64,
    /// Time per revolution (or oscillation) at full speed; seconds.
    pub period: f64,
    pub height: f64,
    pub duration: f64,
    pub lead_in: f64,
    pub ramp: f64,
    pub center: Vec3,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Circle,
            radius: 3.0,
            period: 10.0,
            height: 1.5,
            duration: 20.0,
            lead_in: 1.0,
            ramp: 2.0,
            center: Vec3::zeros(),
        }
    }
}

/// Kinematics at one instant. Velocity and acceleration are in the world
/// frame, angular rate in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajSample {
    pub pose: Pose,
    pub vel: Vec3,
    pub acc: Vec3,
    pub omega_body: Vec3,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration > 0.0) {
            return Err("duration must be positive".into());
        }
        if !(self.period > 0.0) {
            return Err("period must be positive".into());
        }
        if !(self.radius >= 0.0) || !(self.lead_in >= 0.0) || !(self.ramp >= 0.0) {
            return Err("radius, lead-in and ramp must be non-negative".into());
        }
        Ok(())
    }

    /// Warped time and its first two derivatives.
    fn warp(&self, t: f64) -> (f64, f64, f64) {
        let s = t - self.lead_in;
        if s <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if s < self.ramp {
            let u = s / self.ramp;
            let phi = self.ramp * (u * u * u - 0.5 * u * u * u * u);
            let d1 = 3.0 * u * u - 2.0 * u * u * u;
            let d2 = (6.0 * u - 6.0 * u * u) / self.ramp;
            return (phi, d1, d2);
        }
        (0.5 * self.ramp + (s - self.ramp), 1.0, 0.0)
    }

    pub fn sample(&self, t: f64) -> TrajSample {
        let (phi, d1, d2) = self.warp(t);
        let w = TAU / self.period;
        // phase and its derivatives
        let (u, du, ddu) = (w * phi, w * d1, w * d2);
        let r = self.radius;
        let base = self.center + Vec3::new(0.0, 0.0, self.height);
        let (pos, vel, acc, yaw, yaw_rate) = match self.kind {
            TrajectoryKind::Static => (base, Vec3::zeros(), Vec3::zeros(), 0.0, 0.0),
            TrajectoryKind::Line => {
                let (s, c) = u.sin_cos();
                (
                    base + Vec3::new(r * s, 0.0, 0.0),
                    Vec3::new(r * c * du, 0.0, 0.0),
                    Vec3::new(-r * s * du * du + r * c * ddu, 0.0, 0.0),
                    0.0,
                    0.0,
                )
            }
            TrajectoryKind::Circle => {
                let (s, c) = u.sin_cos();
                (
                    base + Vec3::new(r * c, r * s, 0.0),
                    Vec3::new(-r * s * du, r * c * du, 0.0),
                    Vec3::new(
                        -r * s * ddu - r * c * du * du,
                        r * c * ddu - r * s * du * du,
                        0.0,
                    ),
                    u + FRAC_PI_2,
                    du,
                )
            }
            TrajectoryKind::Figure8 => {
                let (s, c) = u.sin_cos();
                let (s2, c2) = (2.0 * u).sin_cos();
                (
                    base + Vec3::new(r * s, 0.5 * r * s2, 0.0),
                    Vec3::new(r * c * du, r * c2 * du, 0.0),
                    Vec3::new(
                        -r * s * du * du + r * c * ddu,
                        -2.0 * r * s2 * du * du + r * c2 * ddu,
                        0.0,
                    ),
                    0.5 * s,
                    0.5 * c * du,
                )
            }
        };
        TrajSample {
            pose: Pose::new(so3_exp(&Vec3::new(0.0, 0.0, yaw)), pos),
            vel,
            acc,
            omega_body: Vec3::new(0.0, 0.0, yaw_rate),
        }
    }

    pub fn pose(&self, t: f64) -> Pose {
        self.sample(t).pose
    }
}
