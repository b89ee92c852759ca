//! Iterated scan-to-map observation update.
//!
//! The state correction is parameterized as a deviation `d` from the
//! propagated prior: rotation `R_prior * Exp(d_theta)` (right perturbation),
//! additive position, and optionally additive accelerometer bias, gyroscope
//! bias and gravity. The cost is
//!
//! ```text
//! sum_i w_i * r_i(d)^2 / sigma^2  +  sum_b lambda_b * |d_b|^2
//! ```
//!
//! minimized by Gauss-Newton with step halving. Correspondences are rebuilt
//! at the start of every iteration from the current iterate.

use nalgebra::{DMatrix, DVector, Matrix6, RowVector3, SymmetricEigen};
use thiserror::Error;

use crate::geom::{so3_exp, so3_right_jacobian, NavState, Pose, Vec3};
use crate::hknn::{knn_search_with, SearchError, SearchOptions, SearchStats, TraversalList};
use crate::octvox::{OctVoxMap, TouchLog, VoxelKey};
use crate::par;

use super::plane::{fit_plane, point_to_plane_jacobian, PlaneFit};

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("tracking failure: {valid} valid correspondences, need {required}")]
    TrackingFailure { valid: usize, required: usize },
    #[error("degenerate normal equations")]
    Degenerate,
    #[error("invalid estimator config: {0}")]
    Config(String),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub max_iter: usize,
    /// Neighbors per plane fit.
    pub k: usize,
    /// Neighbor search radius in meters.
    pub radius: f64,
    pub plane_pt_thresh: f64,
    pub downsample_res: f64,
    pub random_rate: usize,
    pub converge_eps: f64,
    pub estimate_bias_gravity: bool,
    /// Prior weight on the pose deviation (rotation and position).
    pub prior_weight: f64,
    pub bias_prior_weight: f64,
    pub gravity_prior_weight: f64,
    /// Point-to-plane measurement standard deviation in meters.
    pub meas_sigma: f64,
    /// Huber threshold in meters; `None` keeps uniform weights.
    pub huber: Option<f64>,
    pub early_termination: bool,
    pub min_correspondences: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            max_iter: 4,
            k: 5,
            radius: 0.875,
            plane_pt_thresh: 0.1,
            downsample_res: 0.5,
            random_rate: 3,
            converge_eps: 1e-4,
            estimate_bias_gravity: false,
            prior_weight: 1e3,
            bias_prior_weight: 1e4,
            gravity_prior_weight: 1e4,
            meas_sigma: 0.01,
            huber: None,
            early_termination: true,
            min_correspondences: 10,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), UpdateError> {
        let bad = |m: &str| Err(UpdateError::Config(m.to_string()));
        if self.max_iter < 1 {
            return bad("max_iter must be >= 1");
        }
        if self.k < 3 {
            return bad("k must be >= 3 to fit a plane");
        }
        if !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        if !(self.plane_pt_thresh > 0.0) {
            return bad("plane_pt_thresh must be positive");
        }
        if !(self.downsample_res > 0.0) {
            return bad("downsample_res must be positive");
        }
        if self.random_rate < 1 {
            return bad("random_rate must be >= 1");
        }
        if !(self.converge_eps > 0.0) {
            return bad("converge_eps must be positive");
        }
        if !(self.meas_sigma > 0.0) {
            return bad("meas_sigma must be positive");
        }
        if !(self.prior_weight >= 0.0 && self.bias_prior_weight > 0.0 && self.gravity_prior_weight > 0.0) {
            return bad("prior weights must be non-negative (bias/gravity positive)");
        }
        if let Some(h) = self.huber {
            if !(h > 0.0) {
                return bad("huber threshold must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub p_body: Vec3,
    pub plane: PlaneFit,
    pub weight: f64,
}

#[derive(Debug, Clone, Default)]
pub struct UpdateStats {
    pub iterations: usize,
    pub n_points: usize,
    /// Valid correspondences in the last iteration.
    pub n_valid_corr: usize,
    pub search: SearchStats,
    /// Total cost before and after each accepted step.
    pub costs: Vec<(f64, f64)>,
    pub converged: bool,
    /// Smallest over largest eigenvalue of the data-only pose information
    /// fell below the degeneracy ratio in the last iteration.
    pub degenerate: bool,
    /// Voxels that supplied neighbors in the last iteration.
    pub touches: TouchLog,
}

/// Eigenvalue ratio below which the pose is considered unobservable.
pub const DEGENERACY_RATIO: f64 = 1e-6;

const MAX_HALVINGS: usize = 8;
const GRAVITY_NOMINAL: f64 = 9.81;
const GRAVITY_TOL: f64 = 0.5;

/// Deviation of the state from the prior, in the coordinates described at the
/// top of this module.
#[derive(Debug, Clone)]
struct Deviation(DVector<f64>);

struct Model<'a> {
    prior: &'a NavState,
    dt: f64,
    full: bool,
}

impl Model<'_> {
    fn dim(&self) -> usize {
        if self.full {
            15
        } else {
            6
        }
    }

    fn seg(d: &DVector<f64>, i: usize) -> Vec3 {
        Vec3::new(d[i], d[i + 1], d[i + 2])
    }

    /// Rotation tangent applied to the prior attitude.
    fn phi(&self, d: &DVector<f64>) -> Vec3 {
        let mut phi = Self::seg(d, 0);
        if self.full {
            phi -= self.dt * Self::seg(d, 9);
        }
        phi
    }

    fn pose(&self, d: &DVector<f64>) -> Pose {
        let rot = self.prior.rot.compose(&so3_exp(&self.phi(d)));
        let mut pos = self.prior.pos + Self::seg(d, 3);
        if self.full {
            let h = 0.5 * self.dt * self.dt;
            pos += h * (Self::seg(d, 12) - self.prior.rot.rotate(&Self::seg(d, 6)));
        }
        Pose::new(rot, pos)
    }

    fn state(&self, d: &DVector<f64>) -> NavState {
        let mut s = *self.prior;
        s.set_pose(&self.pose(d));
        if self.full {
            s.bias_acc += Self::seg(d, 6);
            s.bias_gyr += Self::seg(d, 9);
            s.gravity += Self::seg(d, 12);
            let g = s.gravity.norm();
            if g > 0.0 {
                let clamped = g.clamp(GRAVITY_NOMINAL - GRAVITY_TOL, GRAVITY_NOMINAL + GRAVITY_TOL);
                s.gravity *= clamped / g;
            }
        }
        s
    }

    fn prior_weights(&self, cfg: &EstimatorConfig) -> DVector<f64> {
        let mut w = DVector::from_element(self.dim(), cfg.prior_weight);
        if self.full {
            for i in 6..12 {
                w[i] = cfg.bias_prior_weight;
            }
            for i in 12..15 {
                w[i] = cfg.gravity_prior_weight;
            }
        }
        w
    }

    /// Row of d r / d d for one correspondence at deviation `d`.
    fn jacobian_row(&self, d: &DVector<f64>, pose: &Pose, c: &Correspondence) -> DVector<f64> {
        let (j_rot, j_t) = point_to_plane_jacobian(pose, &c.p_body, &c.plane);
        let j_phi: RowVector3<f64> = j_rot * so3_right_jacobian(&self.phi(d));
        let mut row = DVector::zeros(self.dim());
        for a in 0..3 {
            row[a] = j_phi[a];
            row[3 + a] = j_t[a];
        }
        if self.full {
            let h = 0.5 * self.dt * self.dt;
            let j_ba = -h * (j_t * self.prior.rot.matrix());
            for a in 0..3 {
                row[6 + a] = j_ba[a];
                row[9 + a] = -self.dt * j_phi[a];
                row[12 + a] = h * j_t[a];
            }
        }
        row
    }
}

fn total_cost(
    model: &Model,
    d: &DVector<f64>,
    corr: &[Correspondence],
    prior_w: &DVector<f64>,
    inv_var: f64,
) -> f64 {
    let pose = model.pose(d);
    let data: f64 = corr
        .iter()
        .map(|c| {
            let r = c.plane.signed_distance(&pose.transform_point(&c.p_body));
            c.weight * r * r
        })
        .sum();
    let prior: f64 = d.iter().zip(prior_w.iter()).map(|(x, w)| w * x * x).sum();
    data * inv_var + prior
}

/// Builds one correspondence per point that yields a valid plane.
pub fn build_correspondences(
    pose: &Pose,
    points: &[Vec3],
    map: &OctVoxMap,
    list: &TraversalList,
    cfg: &EstimatorConfig,
) -> Result<(Vec<Correspondence>, SearchStats, TouchLog), SearchError> {
    let opts = SearchOptions {
        k: cfg.k,
        radius: cfg.radius,
        early_termination: cfg.early_termination,
    };
    type PointResult = Result<(Option<Correspondence>, SearchStats, Vec<VoxelKey>), SearchError>;
    let per_point = par::map_collect(points, |p| -> PointResult {
        let mut st = SearchStats::default();
        let world = pose.transform_point(p);
        let found = knn_search_with(map, list, &world, &opts, &mut st, None)?;
        if found.len() < cfg.k {
            return Ok((None, st, Vec::new()));
        }
        let mus: Vec<Vec3> = found.iter().map(|n| n.mu).collect();
        let plane = fit_plane(&mus, cfg.plane_pt_thresh);
        if !plane.valid {
            return Ok((None, st, Vec::new()));
        }
        let keys: Vec<VoxelKey> = found.iter().map(|n| n.key).collect();
        let corr = Correspondence {
            p_body: *p,
            plane,
            weight: 1.0,
        };
        Ok((Some(corr), st, keys))
    });
    let mut corr = Vec::new();
    let mut stats = SearchStats::default();
    let mut touches = TouchLog::new();
    for item in per_point {
        let (c, st, keys) = item?;
        stats.merge(&st);
        if let Some(c) = c {
            corr.push(c);
            for k in keys {
                touches.touch(k);
            }
        }
    }
    Ok((corr, stats, touches))
}

fn huber_weight(r: f64, delta: Option<f64>) -> f64 {
    match delta {
        Some(h) if r.abs() > h => h / r.abs(),
        _ => 1.0,
    }
}

/// Refines `prior` against the map using de-skewed body-frame `points`.
///
/// `dt` is the propagation interval leading to this scan; it couples the
/// optional bias and gravity columns to the pose and is ignored otherwise.
pub fn iterated_update(
    prior: &NavState,
    points: &[Vec3],
    map: &OctVoxMap,
    list: &TraversalList,
    cfg: &EstimatorConfig,
    dt: f64,
) -> Result<(NavState, UpdateStats), UpdateError> {
    cfg.validate()?;
    let model = Model {
        prior,
        dt,
        full: cfg.estimate_bias_gravity,
    };
    let n = model.dim();
    let prior_w = model.prior_weights(cfg);
    let inv_var = 1.0 / (cfg.meas_sigma * cfg.meas_sigma);
    let mut d = Deviation(DVector::zeros(n));
    let mut stats = UpdateStats {
        n_points: points.len(),
        ..Default::default()
    };

    for _ in 0..cfg.max_iter {
        let pose = model.pose(&d.0);
        let (mut corr, st, touches) = build_correspondences(&pose, points, map, list, cfg)?;
        stats.search.merge(&st);
        stats.touches = touches;
        stats.n_valid_corr = corr.len();
        if corr.len() < cfg.min_correspondences {
            return Err(UpdateError::TrackingFailure {
                valid: corr.len(),
                required: cfg.min_correspondences,
            });
        }
        stats.iterations += 1;

        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut g = DVector::<f64>::zeros(n);
        for c in corr.iter_mut() {
            let r = c.plane.signed_distance(&pose.transform_point(&c.p_body));
            c.weight = huber_weight(r, cfg.huber);
            let row = model.jacobian_row(&d.0, &pose, c);
            let w = c.weight * inv_var;
            h.ger(w, &row, &row, 1.0);
            g.axpy(w * r, &row, 1.0);
        }
        let data_pose: Matrix6<f64> = h.fixed_view::<6, 6>(0, 0).into_owned();
        stats.degenerate = is_degenerate(&data_pose);
        for i in 0..n {
            h[(i, i)] += prior_w[i];
            g[i] += prior_w[i] * d.0[i];
        }
        let chol = h.cholesky().ok_or(UpdateError::Degenerate)?;
        let step = chol.solve(&(-g));
        if step.iter().any(|x| !x.is_finite()) {
            return Err(UpdateError::Degenerate);
        }

        let before = total_cost(&model, &d.0, &corr, &prior_w, inv_var);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = &d.0 + alpha * &step;
            let after = total_cost(&model, &cand, &corr, &prior_w, inv_var);
            if after <= before {
                accepted = Some((cand, after));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, after)) = accepted else {
            stats.converged = true;
            break;
        };
        stats.costs.push((before, after));
        let applied = alpha * step.norm();
        d.0 = cand;
        if applied < cfg.converge_eps {
            stats.converged = true;
            break;
        }
    }
    Ok((model.state(&d.0), stats))
}

fn is_degenerate(h: &Matrix6<f64>) -> bool {
    let eig = SymmetricEigen::new(*h);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    max <= 0.0 || min / max < DEGENERACY_RATIO
}
