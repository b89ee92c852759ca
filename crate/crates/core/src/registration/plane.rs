//! Local plane fitting and the point-to-plane residual.

use nalgebra::{Matrix3, RowVector3, SymmetricEigen};

use crate::geom::{hat, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    /// Unit normal; meaningful only when `valid`.
    pub normal: Vec3,
    /// Offset so that `normal . x + d = 0` on the plane.
    pub d: f64,
    pub valid: bool,
    /// Root-mean-square point-to-plane distance of the fitted neighbors.
    pub rms: f64,
}

impl PlaneFit {
    pub fn invalid() -> Self {
        Self {
            normal: Vec3::zeros(),
            d: 0.0,
            valid: false,
            rms: f64::INFINITY,
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.d
    }
}

/// Ratio below which the middle eigenvalue counts as zero (collinear input).
const RANK_TOL: f64 = 1e-10;

/// PCA plane through `points`. Valid when there are at least three
/// non-collinear points and every point lies within `thresh` of the plane.
pub fn fit_plane(points: &[Vec3], thresh: f64) -> PlaneFit {
    if points.len() < 3 {
        return PlaneFit::invalid();
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (small, mid, large) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if large <= 0.0 || mid <= RANK_TOL * large {
        return PlaneFit::invalid();
    }
    let _ = small;
    let normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    let d = -normal.dot(&centroid);
    let mut sq = 0.0;
    let mut valid = true;
    for p in points {
        let r = normal.dot(p) + d;
        sq += r * r;
        if r.abs() > thresh {
            valid = false;
        }
    }
    PlaneFit {
        normal,
        d,
        valid,
        rms: (sq / n).sqrt(),
    }
}

/// Residual `n . (R p + t) + d` of a body-frame point under `pose`.
pub fn point_to_plane_residual(pose: &Pose, p_body: &Vec3, plane: &PlaneFit) -> f64 {
    plane.signed_distance(&pose.transform_point(p_body))
}

/// Jacobian of [`point_to_plane_residual`] with respect to a right rotation
/// perturbation `R exp(dtheta)` followed by an additive translation
/// perturbation: `[d r / d dtheta, d r / d dt]`.
pub fn point_to_plane_jacobian(pose: &Pose, p_body: &Vec3, plane: &PlaneFit) -> (RowVector3<f64>, RowVector3<f64>) {
    let n_t = plane.normal.transpose();
    let j_rot = -(n_t * pose.rot.matrix() * hat(p_body));
    (j_rot, n_t)
}
