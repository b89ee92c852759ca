//! Motion compensation and downsampling of raw scans.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{Pose, Scan, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum DeskewError {
    #[error("pose track is empty")]
    EmptyTrack,
    #[error("pose track is not sorted by time")]
    UnsortedTrack,
    #[error("time {t} outside pose track [{start}, {end}]")]
    Uncovered { t: f64, start: f64, end: f64 },
}

const TIME_SLACK: f64 = 1e-9;

/// World pose at time `t` from a time-sorted track, interpolating linearly in
/// translation and along the geodesic in rotation.
pub fn interpolate_track(track: &[(f64, Pose)], t: f64) -> Result<Pose, DeskewError> {
    let (first, last) = match (track.first(), track.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(DeskewError::EmptyTrack),
    };
    if t < first.0 - TIME_SLACK || t > last.0 + TIME_SLACK {
        return Err(DeskewError::Uncovered {
            t,
            start: first.0,
            end: last.0,
        });
    }
    // first sample strictly after t
    let hi = track.partition_point(|(ts, _)| *ts <= t);
    if hi == 0 {
        return Ok(first.1);
    }
    if hi == track.len() {
        return Ok(last.1);
    }
    let (t0, a) = &track[hi - 1];
    let (t1, b) = &track[hi];
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(*b);
    }
    Ok(a.interpolate(b, (t - t0) / span))
}

/// Maps every point into the IMU frame at the scan's end time.
///
/// `track` holds world poses of the IMU covering the sweep; `extrinsic` maps
/// LiDAR coordinates into the IMU frame. Returns `(point, timestamp)` pairs.
pub fn deskew_scan(
    scan: &Scan,
    track: &[(f64, Pose)],
    extrinsic: &Pose,
) -> Result<Vec<(Vec3, f64)>, DeskewError> {
    if track.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(DeskewError::UnsortedTrack);
    }
    let end_inv = interpolate_track(track, scan.t_end)?.inverse();
    scan.points
        .iter()
        .map(|pt| {
            let t = scan.t_begin + pt.t_off;
            let rel = end_inv.compose(&interpolate_track(track, t)?);
            Ok((rel.transform_point(&extrinsic.transform_point(&pt.p)), t))
        })
        .collect()
}

/// Keeps one point per cubic cell of edge `res`: the one nearest the cell
/// center, earliest index on ties. Output follows the order in which cells
/// were first seen.
pub fn center_downsample(points: &[Vec3], res: f64) -> Vec<Vec3> {
    assert!(res > 0.0, "downsample resolution must be positive");
    let mut cells: HashMap<[i64; 3], usize> = HashMap::with_capacity(points.len());
    // (chosen point, its squared distance to the cell center)
    let mut chosen: Vec<(Vec3, f64)> = Vec::new();
    for p in points {
        let cell = [
            (p.x / res).floor() as i64,
            (p.y / res).floor() as i64,
            (p.z / res).floor() as i64,
        ];
        let center = Vec3::new(
            (cell[0] as f64 + 0.5) * res,
            (cell[1] as f64 + 0.5) * res,
            (cell[2] as f64 + 0.5) * res,
        );
        let d = (p - center).norm_squared();
        match cells.get(&cell) {
            Some(&i) => {
                if d < chosen[i].1 {
                    chosen[i] = (*p, d);
                }
            }
            None => {
                cells.insert(cell, chosen.len());
                chosen.push((*p, d));
            }
        }
    }
    chosen.into_iter().map(|(p, _)| p).collect()
}

/// Keeps every `rate`-th point starting with the first.
pub fn random_downsample<T: Clone>(points: &[T], rate: usize) -> Vec<T> {
    assert!(rate >= 1, "rate must be >= 1");
    points.iter().step_by(rate).cloned().collect()
}

/// Keeps each point independently with probability `1 / rate`.
pub fn random_downsample_seeded<T: Clone>(points: &[T], rate: usize, seed: u64) -> Vec<T> {
    assert!(rate >= 1, "rate must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points
        .iter()
        .filter(|_| rng.random_range(0..rate) == 0)
        .cloned()
        .collect()
}
