use nalgebra::Matrix3;
use thiserror::Error;

use crate::geom::{Pose, Vec3};
use crate::pipeline::FrameResult;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("only {0} poses associated, need at least 2")]
    TooFewPairs(usize),
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("entry {index} is not positive: {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("empty input")]
    Empty,
}

/// Largest timestamp difference accepted when pairing poses, seconds.
pub const ASSOC_TOL: f64 = 0.01;

/// Pairs each estimate with the ground-truth pose nearest in time.
pub fn associate(est: &[(f64, Pose)], gt: &[(f64, Pose)]) -> Vec<(Vec3, Vec3)> {
    let mut gt_sorted: Vec<&(f64, Pose)> = gt.iter().collect();
    gt_sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for (t, e) in est {
        let i = gt_sorted.partition_point(|g| g.0 < *t);
        let best = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| gt_sorted.get(j))
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()));
        if let Some(g) = best {
            if (g.0 - t).abs() <= ASSOC_TOL {
                out.push((e.trans, g.1.trans));
            }
        }
    }
    out
}

/// Least-squares rigid transform mapping `src` onto `dst`.
pub fn align_rigid(pairs: &[(Vec3, Vec3)]) -> Pose {
    let n = pairs.len() as f64;
    let ce = pairs.iter().map(|p| p.0).sum::<Vec3>() / n;
    let cg = pairs.iter().map(|p| p.1).sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (e, g) in pairs {
        h += (e - ce) * (g - cg).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let v = v_t.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let r = v * fix * u.transpose();
    let rot = crate::geom::Rotation::from_matrix(&r);
    Pose::new(rot, cg - rot.rotate(&ce))
}

/// Root-mean-square translational error after optional rigid alignment.
pub fn ate_rmse(est: &[(f64, Pose)], gt: &[(f64, Pose)], align: bool) -> Result<f64, MetricError> {
    let pairs = associate(est, gt);
    if pairs.len() < 2 {
        return Err(MetricError::TooFewPairs(pairs.len()));
    }
    let t = if align { align_rigid(&pairs) } else { Pose::identity() };
    let sq: f64 = pairs
        .iter()
        .map(|(e, g)| (t.transform_point(e) - g).norm_squared())
        .sum();
    Ok((sq / pairs.len() as f64).sqrt())
}

/// Mean of `1 / (t_i * u_i)` with `t` in milliseconds and `u` a utilization.
pub fn relative_efficiency(t_ms: &[f64], u: &[f64]) -> Result<f64, MetricError> {
    if t_ms.len() != u.len() {
        return Err(MetricError::LengthMismatch(t_ms.len(), u.len()));
    }
    if t_ms.is_empty() {
        return Err(MetricError::Empty);
    }
    for (index, &value) in t_ms.iter().chain(u.iter()).enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(MetricError::NonPositive {
                index: index % t_ms.len(),
                value,
            });
        }
    }
    let sum: f64 = t_ms.iter().zip(u).map(|(t, u)| 1.0 / (t * u)).sum();
    Ok(sum / t_ms.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub ate_rmse: Option<f64>,
    pub elapsed_mean_ms: f64,
    pub elapsed_std_ms: f64,
    pub eta: Option<f64>,
    pub candidates_mean: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Aggregates frame results; ATE needs ground truth and is aligned.
pub fn summarize(results: &[FrameResult], gt: Option<&[(f64, Pose)]>) -> Metrics {
    let elapsed: Vec<f64> = results.iter().map(|r| r.elapsed_ms).collect();
    let (elapsed_mean_ms, elapsed_std_ms) = mean_std(&elapsed);
    let util: Vec<f64> = results.iter().map(|r| r.cpu_util).collect();
    let cand: Vec<f64> = results.iter().map(|r| r.knn_candidates_evaluated as f64).collect();
    let est: Vec<(f64, Pose)> = results.iter().map(|r| (r.t, r.pose)).collect();
    Metrics {
        ate_rmse: gt.and_then(|g| ate_rmse(&est, g, true).ok()),
        elapsed_mean_ms,
        elapsed_std_ms,
        eta: relative_efficiency(&elapsed, &util).ok(),
        candidates_mean: mean_std(&cand).0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::so3_exp;
    use approx::assert_abs_diff_eq;

    fn traj() -> Vec<(f64, Pose)> {
        (0..100)
            .map(|i| {
                let t = i as f64 * 0.1;
                (
                    t,
                    Pose::new(
                        so3_exp(&Vec3::new(0.0, 0.0, t)),
                        Vec3::new(3.0 * t.cos(), 3.0 * t.sin(), 0.1 * t),
                    ),
                )
            })
            .collect()
    }

    fn shifted(tr: &[(f64, Pose)], by: &Pose) -> Vec<(f64, Pose)> {
        tr.iter().map(|(t, p)| (*t, by.compose(p))).collect()
    }

    #[test]
    fn ate_examples() {
        let gt = traj();
        assert_eq!(ate_rmse(&gt, &gt, false).unwrap(), 0.0);
        let off = shifted(&gt, &Pose::from_translation(Vec3::new(1.0, 0.0, 0.0)));
        assert_abs_diff_eq!(ate_rmse(&off, &gt, false).unwrap(), 1.0, epsilon = 1e-12);
        assert!(ate_rmse(&off, &gt, true).unwrap() < 1e-9);
    }

    #[test]
    fn ate_alignment_absorbs_rotation() {
        let gt = traj();
        let t = Pose::new(so3_exp(&Vec3::new(0.3, -0.2, 1.4)), Vec3::new(5.0, -1.0, 2.0));
        assert!(ate_rmse(&shifted(&gt, &t), &gt, true).unwrap() < 1e-9);
    }

    #[test]
    fn ate_invariant_to_common_transform() {
        let gt = traj();
        let est: Vec<(f64, Pose)> = gt
            .iter()
            .enumerate()
            .map(|(i, (t, p))| (*t, Pose::new(p.rot, p.trans + Vec3::new((i as f64).sin() * 0.05, 0.02, 0.0))))
            .collect();
        let t = Pose::new(so3_exp(&Vec3::new(1.0, 0.5, -0.3)), Vec3::new(-3.0, 7.0, 1.0));
        for align in [false, true] {
            let a = ate_rmse(&est, &gt, align).unwrap();
            let b = ate_rmse(&shifted(&est, &t), &shifted(&gt, &t), align).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn association_tolerance() {
        let gt = traj();
        let late: Vec<(f64, Pose)> = gt.iter().map(|(t, p)| (t + 0.005, *p)).collect();
        assert_eq!(associate(&late, &gt).len(), gt.len());
        let too_late: Vec<(f64, Pose)> = gt.iter().map(|(t, p)| (t + 0.05, *p)).collect();
        assert_eq!(ate_rmse(&too_late, &gt, true), Err(MetricError::TooFewPairs(0)));
        assert_eq!(ate_rmse(&gt[..1], &gt, false), Err(MetricError::TooFewPairs(1)));
    }

    #[test]
    fn eta_examples() {
        assert_abs_diff_eq!(relative_efficiency(&[10.0], &[0.5]).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(relative_efficiency(&[10.0, 20.0], &[0.5, 0.5]).unwrap(), 0.15, epsilon = 1e-15);
        assert!(matches!(relative_efficiency(&[0.0], &[0.5]), Err(MetricError::NonPositive { .. })));
        assert!(matches!(relative_efficiency(&[1.0], &[-0.5]), Err(MetricError::NonPositive { .. })));
        assert_eq!(relative_efficiency(&[1.0], &[]), Err(MetricError::LengthMismatch(1, 0)));
        assert_eq!(relative_efficiency(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn eta_halving_times_doubles() {
        let t = [3.0, 7.5, 12.25, 40.0];
        let u = [0.25, 0.5, 1.0, 0.125];
        let half: Vec<f64> = t.iter().map(|x| x / 2.0).collect();
        assert_eq!(relative_efficiency(&half, &u).unwrap(), 2.0 * relative_efficiency(&t, &u).unwrap());
    }
}
