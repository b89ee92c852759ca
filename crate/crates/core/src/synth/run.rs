//! Dataset generation, end-to-end runs and the randomized neighbor-search
//! benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::Vec3;
use crate::hknn::{brute_force_knn, knn_search_with, Neighbor, SearchOptions, SearchStats, TraversalList};
use crate::octvox::{MapConfig, MapError, OctVoxMap};
use crate::pipeline::{run_sequence, FrameResult, OdometryConfig, PipelineError};

use super::io::Dataset;
use super::scene::SceneSpec;
use super::sensor::{synthesize_imu, synthesize_scan, SensorSpec};
use super::trajectory::TrajectorySpec;

/// Independent per-stream seed derived from a base seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scans end at every multiple of the scan period up to the duration; ground
/// truth is sampled at the scan end times, with the first entry at time zero.
pub fn generate_dataset(
    scene: &SceneSpec,
    traj: &TrajectorySpec,
    sensor: &SensorSpec,
    seed: u64,
) -> Result<Dataset, String> {
    scene.validate()?;
    traj.validate()?;
    sensor.validate()?;
    let n_scans = (traj.duration * sensor.scan_rate + 1e-9).floor() as usize;
    let imu = synthesize_imu(traj, sensor, derive_seed(seed, 0));
    let mut scans = Vec::with_capacity(n_scans);
    let mut gt = vec![(0.0, traj.pose(0.0))];
    for k in 1..=n_scans {
        let t_end = k as f64 / sensor.scan_rate;
        scans.push(synthesize_scan(scene, traj, t_end, sensor, derive_seed(seed, k as u64))?);
        gt.push((t_end, traj.pose(t_end)));
    }
    Ok(Dataset { scans, imu, gt })
}

pub fn run_dataset(cfg: &OdometryConfig, ds: &Dataset) -> Result<Vec<FrameResult>, PipelineError> {
    run_sequence(cfg.clone(), &ds.scans, &ds.imu)
}

/// Mixed-density cloud: dense planar patches, Gaussian blobs and a sparse
/// uniform background inside a cube of edge `extent` centered at the origin.
pub fn random_cloud(n: usize, extent: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = extent * 0.5;
    let mut out = Vec::with_capacity(n);
    let n_planar = n / 2;
    let n_blob = n / 4;
    let patches = 12;
    for i in 0..n_planar {
        let p = i % patches;
        let mut prng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + p as u64));
        let c = Vec3::new(prng.random_range(-h..h), prng.random_range(-h..h), prng.random_range(-h..h));
        let nrm = Vec3::new(prng.random_range(-1.0..1.0), prng.random_range(-1.0..1.0), prng.random_range(-1.0..1.0))
            .normalize();
        let u = nrm.cross(&Vec3::new(0.3, 0.5, 0.8)).normalize();
        let v = nrm.cross(&u);
        let size = extent * 0.2;
        let q = c + u * rng.random_range(-size..size) + v * rng.random_range(-size..size);
        out.push(q.map(|x| x.clamp(-h, h)));
    }
    let blob = Normal::new(0.0, extent * 0.03).expect("positive sigma");
    let centers: Vec<Vec3> = (0..8)
        .map(|_| Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h)))
        .collect();
    for i in 0..n_blob {
        let c = centers[i % centers.len()];
        let q = c + Vec3::new(blob.sample(&mut rng), blob.sample(&mut rng), blob.sample(&mut rng));
        out.push(q.map(|x| x.clamp(-h, h)));
    }
    while out.len() < n {
        out.push(Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h)));
    }
    out
}

/// Half the queries jitter around cloud points, half are uniform in the cube.
pub fn random_queries(cloud: &[Vec3], n: usize, extent: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = extent * 0.5;
    (0..n)
        .map(|i| {
            if i % 2 == 0 && !cloud.is_empty() {
                let p = cloud[rng.random_range(0..cloud.len())];
                p + Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
            } else {
                Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h))
            }
        })
        .collect()
}

pub fn build_map(points: &[Vec3], cfg: MapConfig) -> Result<OctVoxMap, MapError> {
    let mut map = OctVoxMap::new(cfg)?;
    map.insert_scan(points.iter())?;
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub points: usize,
    pub queries: usize,
    pub k: usize,
    pub radius: f64,
    pub extent: f64,
    pub seed: u64,
    pub map: MapConfig,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            points: 100_000,
            queries: 1000,
            k: 5,
            radius: 0.875,
            extent: 20.0,
            seed: 1,
            map: MapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub candidates: usize,
    pub candidates_full: usize,
    pub matched: bool,
    pub time_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub representatives: usize,
    pub hknn_total_ms: f64,
    pub brute_total_ms: f64,
}

impl BenchReport {
    pub fn match_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.matched).count() as f64 / self.rows.len() as f64
    }

    pub fn mean_candidates(&self) -> (f64, f64) {
        let n = self.rows.len().max(1) as f64;
        (
            self.rows.iter().map(|r| r.candidates as f64).sum::<f64>() / n,
            self.rows.iter().map(|r| r.candidates_full as f64).sum::<f64>() / n,
        )
    }

    /// `query,candidates,candidates_full,match,time_us`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("query,candidates,candidates_full,match,time_us\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{},{},{},{:.3}",
                r.candidates, r.candidates_full, r.matched as u8, r.time_us
            );
        }
        s
    }
}

fn same_result(a: &[Neighbor], b: &[Neighbor]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.key == y.key && x.s == y.s && x.dist == y.dist)
}

/// Compares the heuristic search against the brute-force oracle on a random
/// map and records per-query candidate counts with and without early
/// termination.
pub fn bench_knn(p: &BenchParams) -> Result<BenchReport, String> {
    let cloud = random_cloud(p.points, p.extent, p.seed);
    let map = build_map(&cloud, p.map.clone()).map_err(|e| e.to_string())?;
    let list = TraversalList::build(p.radius, map.subvoxel_size());
    let queries = random_queries(&cloud, p.queries, p.extent, derive_seed(p.seed, 1));
    let early = SearchOptions::new(p.k, p.radius);
    let full = SearchOptions {
        early_termination: false,
        ..early
    };
    let mut rows = Vec::with_capacity(queries.len());
    let mut hknn_total = 0.0;
    let mut brute_total = 0.0;
    for q in &queries {
        let mut st = SearchStats::default();
        let t0 = Instant::now();
        let got = knn_search_with(&map, &list, q, &early, &mut st, None).map_err(|e| e.to_string())?;
        let dt = t0.elapsed().as_secs_f64();
        hknn_total += dt;
        let mut st_full = SearchStats::default();
        knn_search_with(&map, &list, q, &full, &mut st_full, None).map_err(|e| e.to_string())?;
        let t1 = Instant::now();
        let oracle = brute_force_knn(&map, q, p.k, p.radius);
        brute_total += t1.elapsed().as_secs_f64();
        rows.push(BenchRow {
            candidates: st.candidates,
            candidates_full: st_full.candidates,
            matched: same_result(&got, &oracle),
            time_us: dt * 1e6,
        });
    }
    Ok(BenchReport {
        rows,
        representatives: map.occupied_slots(),
        hknn_total_ms: hknn_total * 1e3,
        brute_total_ms: brute_total * 1e3,
    })
}
