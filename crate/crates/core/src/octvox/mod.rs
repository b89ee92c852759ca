//! Octo-voxel map: a hashed voxel grid where every voxel owns exactly eight
//! subvoxel slots, each holding an incrementally averaged representative.
//!
//! Writes go through `&mut self`; searches borrow the map immutably and
//! collect the voxels they touched in a [`TouchLog`], which the single writer
//! applies with [`OctVoxMap::flush_touches`] before the next write phase.

mod table;

pub use table::{hash_key, RobinHoodTable};

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("point ({0}, {1}, {2}) is not finite")]
    NonFinite(f64, f64, f64),
    #[error("subvoxel coordinate {0} outside world bound {1}")]
    OutOfRange(i64, i64),
    #[error("invalid map config: {0}")]
    Config(String),
}

/// Integer voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn offset(&self, d: [i32; 3]) -> Self {
        Self::new(
            self.x.wrapping_add(d[0]),
            self.y.wrapping_add(d[1]),
            self.z.wrapping_add(d[2]),
        )
    }
}

/// Quantizes a world point to `(voxel key, subvoxel index)`.
///
/// The subvoxel grid coordinate is `floor(p / r_s)`; its arithmetic right
/// shift gives the voxel key and its low bits the octant inside the voxel,
/// so negative coordinates get floor semantics for free.
#[inline]
pub fn subvoxel_index(p: &Vec3, r_s: f64) -> Result<(VoxelKey, u8), MapError> {
    subvoxel_index_bounded(p, r_s, i32::MAX as i64)
}

pub fn subvoxel_index_bounded(p: &Vec3, r_s: f64, bound: i64) -> Result<(VoxelKey, u8), MapError> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(MapError::NonFinite(p.x, p.y, p.z));
    }
    let sub_bound = bound.saturating_mul(2);
    let mut k = [0i32; 3];
    let mut s = 0u8;
    for a in 0..3 {
        let f = (p[a] / r_s).floor();
        if f.abs() > sub_bound as f64 {
            return Err(MapError::OutOfRange(f as i64, bound));
        }
        let ks = f as i64;
        let key = ks >> 1;
        if key > bound || key < -bound - 1 {
            return Err(MapError::OutOfRange(ks, bound));
        }
        k[a] = key as i32;
        s |= ((ks & 1) as u8) << a;
    }
    Ok((VoxelKey::new(k[0], k[1], k[2]), s))
}

/// Octant bits `(b_x, b_y, b_z)` of a subvoxel index.
#[inline]
pub fn octant_bits(s: u8) -> [i32; 3] {
    [(s & 1) as i32, ((s >> 1) & 1) as i32, ((s >> 2) & 1) as i32]
}

/// Lower corner of the subvoxel cube addressed by `(key, s)`.
pub fn subvoxel_min_corner(key: &VoxelKey, s: u8, r_s: f64) -> Vec3 {
    let b = octant_bits(s);
    Vec3::new(
        (2 * key.x as i64 + b[0] as i64) as f64 * r_s,
        (2 * key.y as i64 + b[1] as i64) as f64 * r_s,
        (2 * key.z as i64 + b[2] as i64) as f64 * r_s,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubVoxelRecord {
    pub mu: Vec3,
    /// Number of merged points; zero marks an empty slot.
    pub n: u32,
}

impl SubVoxelRecord {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OctVoxel {
    pub slots: [SubVoxelRecord; 8],
    pub stamp: u64,
}

impl OctVoxel {
    fn new(stamp: u64) -> Self {
        Self {
            slots: [SubVoxelRecord::default(); 8],
            stamp,
        }
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.n > 0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    /// Voxel edge length (m). Subvoxels are half of this.
    pub voxel_size: f64,
    /// Merge gate: a point further than this from the representative is dropped.
    pub tau_merge: f64,
    /// Merging stops once a slot holds more than this many points.
    pub n_max: u32,
    /// Maximum number of live voxels.
    pub capacity: usize,
    /// Largest absolute voxel coordinate accepted.
    pub world_bound: i64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.5,
            tau_merge: 0.1,
            n_max: 100,
            capacity: 2_000_000,
            world_bound: i32::MAX as i64,
        }
    }
}

impl MapConfig {
    pub fn subvoxel_size(&self) -> f64 {
        0.5 * self.voxel_size
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(MapError::Config(format!("voxel_size {} must be > 0", self.voxel_size)));
        }
        if !(self.tau_merge >= 0.0) {
            return Err(MapError::Config(format!("tau_merge {} must be >= 0", self.tau_merge)));
        }
        if self.capacity < 1 {
            return Err(MapError::Config("capacity must be >= 1".into()));
        }
        if self.world_bound < 1 || self.world_bound > i32::MAX as i64 {
            return Err(MapError::Config(format!("world_bound {} out of range", self.world_bound)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Initialized,
    Merged,
    RejectedGate,
    RejectedSaturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchStats {
    pub initialized: usize,
    pub merged: usize,
    pub rejected_gate: usize,
    pub rejected_saturated: usize,
    pub evicted: usize,
}

impl BatchStats {
    pub fn total(&self) -> usize {
        self.initialized + self.merged + self.rejected_gate + self.rejected_saturated
    }

    fn record(&mut self, outcome: InsertOutcome) {
        match outcome {
            InsertOutcome::Initialized => self.initialized += 1,
            InsertOutcome::Merged => self.merged += 1,
            InsertOutcome::RejectedGate => self.rejected_gate += 1,
            InsertOutcome::RejectedSaturated => self.rejected_saturated += 1,
        }
    }
}

/// Voxels accessed during a read phase, applied later by the writer.
#[derive(Debug, Clone, Default)]
pub struct TouchLog {
    keys: Vec<VoxelKey>,
}

impl TouchLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn touch(&mut self, key: VoxelKey) {
        self.keys.push(key);
    }

    pub fn extend(&mut self, other: TouchLog) {
        self.keys.extend(other.keys);
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OctVoxMap {
    table: RobinHoodTable<OctVoxel>,
    config: MapConfig,
    r_s: f64,
    clock: u64,
    /// `(stamp, key)` in ascending order; entries whose stamp no longer
    /// matches the voxel are stale and skipped.
    recency: VecDeque<(u64, VoxelKey)>,
    evicted_total: u64,
}

impl OctVoxMap {
    pub fn new(config: MapConfig) -> Result<Self, MapError> {
        config.validate()?;
        Ok(Self {
            table: RobinHoodTable::new(),
            r_s: config.subvoxel_size(),
            config,
            clock: 0,
            recency: VecDeque::new(),
            evicted_total: 0,
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn subvoxel_size(&self) -> f64 {
        self.r_s
    }

    /// Number of live voxels.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn occupied_slots(&self) -> usize {
        self.table.iter().map(|(_, v)| v.occupied()).sum()
    }

    pub fn index(&self, p: &Vec3) -> Result<(VoxelKey, u8), MapError> {
        subvoxel_index_bounded(p, self.r_s, self.config.world_bound)
    }

    pub fn voxel(&self, key: &VoxelKey) -> Option<&OctVoxel> {
        self.table.get(key)
    }

    /// Representative and count of an occupied slot. Does not refresh recency.
    #[inline]
    pub fn get_representative(&self, key: &VoxelKey, s: u8) -> Option<(Vec3, u32)> {
        let rec = self.table.get(key)?.slots.get(s as usize)?;
        (rec.n > 0).then_some((rec.mu, rec.n))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &OctVoxel)> {
        self.table.iter()
    }

    pub fn table(&self) -> &RobinHoodTable<OctVoxel> {
        &self.table
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn insert_point(&mut self, p: &Vec3) -> Result<InsertOutcome, MapError> {
        let (key, s) = self.index(p)?;
        if !self.table.contains_key(&key) && self.table.len() >= self.config.capacity {
            self.evict_down_to(self.config.capacity - 1);
        }
        let stamp = self.tick();
        let tau = self.config.tau_merge;
        let n_max = self.config.n_max;
        let (voxel, _) = self.table.get_or_insert_with(key, || OctVoxel::new(stamp));
        voxel.stamp = stamp;
        let rec = &mut voxel.slots[s as usize];
        let outcome = if rec.n == 0 {
            *rec = SubVoxelRecord { mu: *p, n: 1 };
            InsertOutcome::Initialized
        } else if (p - rec.mu).norm() > tau {
            InsertOutcome::RejectedGate
        } else if rec.n > n_max {
            InsertOutcome::RejectedSaturated
        } else {
            rec.mu += (p - rec.mu) / (rec.n as f64 + 1.0);
            rec.n += 1;
            InsertOutcome::Merged
        };
        self.recency.push_back((stamp, key));
        self.maybe_compact();
        Ok(outcome)
    }

    /// Sequential [`insert_point`](Self::insert_point) over a batch.
    pub fn insert_scan<'a, I>(&mut self, points: I) -> Result<BatchStats, MapError>
    where
        I: IntoIterator<Item = &'a Vec3>,
    {
        let evicted_before = self.evicted_total;
        let mut stats = BatchStats::default();
        for p in points {
            stats.record(self.insert_point(p)?);
        }
        stats.evicted = (self.evicted_total - evicted_before) as usize;
        Ok(stats)
    }

    /// Stamps every voxel recorded in the logs as accessed now. Voxels evicted
    /// since the read phase are ignored. All touched voxels share one stamp;
    /// ties are broken by key order during eviction.
    pub fn flush_touches<'a, I>(&mut self, logs: I)
    where
        I: IntoIterator<Item = &'a TouchLog>,
    {
        let mut keys: Vec<VoxelKey> = logs.into_iter().flat_map(|l| l.keys.iter().copied()).collect();
        if keys.is_empty() {
            return;
        }
        keys.sort_unstable();
        keys.dedup();
        let stamp = self.tick();
        for key in keys {
            if let Some(v) = self.table.get_mut(&key) {
                v.stamp = stamp;
                self.recency.push_back((stamp, key));
            }
        }
        self.maybe_compact();
    }

    /// Evicts least-recently-accessed voxels until the live count fits the
    /// configured capacity.
    pub fn evict_to_capacity(&mut self) -> usize {
        self.evict_down_to(self.config.capacity)
    }

    /// Changes the capacity; the caller decides when to evict.
    pub fn set_capacity(&mut self, capacity: usize) -> Result<(), MapError> {
        if capacity < 1 {
            return Err(MapError::Config("capacity must be >= 1".into()));
        }
        self.config.capacity = capacity;
        Ok(())
    }

    fn evict_down_to(&mut self, target: usize) -> usize {
        let mut evicted = 0;
        while self.table.len() > target {
            let Some((stamp, key)) = self.recency.pop_front() else {
                break;
            };
            let live = self.table.get(&key).map(|v| v.stamp == stamp).unwrap_or(false);
            if live {
                self.table.remove(&key);
                evicted += 1;
            }
        }
        self.evicted_total += evicted as u64;
        evicted
    }

    /// Rebuilds the recency queue once stale entries dominate it, so its size
    /// stays proportional to the live voxel count.
    fn maybe_compact(&mut self) {
        if self.recency.len() <= 4 * self.table.len() + 1024 {
            return;
        }
        let mut live: Vec<(u64, VoxelKey)> = self.table.iter().map(|(k, v)| (v.stamp, *k)).collect();
        live.sort_unstable();
        self.recency = live.into();
    }

    /// Voxels evicted over the map's lifetime.
    pub fn evicted_total(&self) -> u64 {
        self.evicted_total
    }

    pub fn recency_queue_len(&self) -> usize {
        self.recency.len()
    }

    /// One line per occupied slot: `kx,ky,kz,s,mux,muy,muz,n`, sorted by key
    /// and slot.
    pub fn snapshot(&self) -> String {
        let mut voxels: Vec<(&VoxelKey, &OctVoxel)> = self.table.iter().collect();
        voxels.sort_by_key(|(k, _)| **k);
        let mut out = String::new();
        for (k, v) in voxels {
            for (s, rec) in v.slots.iter().enumerate() {
                if rec.n > 0 {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        k.x, k.y, k.z, s, rec.mu.x, rec.mu.y, rec.mu.z, rec.n
                    );
                }
            }
        }
        out
    }

    pub fn write_snapshot<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.snapshot().as_bytes())
    }
}

/// Parses a snapshot produced by [`OctVoxMap::snapshot`].
pub fn parse_snapshot(text: &str) -> Result<Vec<(VoxelKey, u8, Vec3, u32)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(format!("line {}: expected 8 fields", i + 1));
        }
        let int = |s: &str| s.trim().parse::<i64>().map_err(|e| format!("line {}: {e}", i + 1));
        let real = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        out.push((
            VoxelKey::new(int(f[0])? as i32, int(f[1])? as i32, int(f[2])? as i32),
            int(f[3])? as u8,
            Vec3::new(real(f[4])?, real(f[5])?, real(f[6])?),
            int(f[7])? as u32,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_with(capacity: usize) -> OctVoxMap {
        OctVoxMap::new(MapConfig {
            capacity,
            ..MapConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn index_origin() {
        let (k, s) = subvoxel_index(&Vec3::zeros(), 0.25).unwrap();
        assert_eq!((k, s), (VoxelKey::new(0, 0, 0), 0));
    }

    #[test]
    fn index_mixed_signs() {
        let (k, s) = subvoxel_index(&Vec3::new(0.3, 0.7, -0.2), 0.25).unwrap();
        assert_eq!(k, VoxelKey::new(0, 1, -1));
        assert_eq!(s, 5);
        let (k, s) = subvoxel_index(&Vec3::new(-0.1, -0.1, -0.1), 0.25).unwrap();
        assert_eq!(k, VoxelKey::new(-1, -1, -1));
        assert_eq!(s, 7);
    }

    #[test]
    fn index_rejects_out_of_bound_and_nan() {
        assert!(matches!(
            subvoxel_index_bounded(&Vec3::new(100.0, 0.0, 0.0), 0.25, 10),
            Err(MapError::OutOfRange(..))
        ));
        assert!(matches!(
            subvoxel_index(&Vec3::new(f64::NAN, 0.0, 0.0), 0.25),
            Err(MapError::NonFinite(..))
        ));
        assert!(subvoxel_index(&Vec3::new(1e300, 0.0, 0.0), 0.25).is_err());
    }

    #[test]
    fn initialize_merge_and_gate() {
        let mut m = map_with(10);
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(m.insert_point(&p).unwrap(), InsertOutcome::Initialized);
        let (k, s) = m.index(&p).unwrap();
        assert_eq!(m.get_representative(&k, s), Some((p, 1)));

        let mut m = map_with(10);
        let base = Vec3::new(1.0, 1.0, 1.0);
        m.insert_point(&base).unwrap();
        assert_eq!(m.insert_point(&Vec3::new(1.04, 1.0, 1.0)).unwrap(), InsertOutcome::Merged);
        let (k, s) = m.index(&base).unwrap();
        let (mu, n) = m.get_representative(&k, s).unwrap();
        assert_abs_diff_eq!(mu, Vec3::new(1.02, 1.0, 1.0), epsilon = 1e-12);
        assert_eq!(n, 2);
    }

    #[test]
    fn gate_rejection_leaves_slot_unchanged() {
        // a wide subvoxel so that both points land in the same slot
        let cfg = MapConfig {
            voxel_size: 8.0,
            ..Default::default()
        };
        let mut m = OctVoxMap::new(cfg).unwrap();
        let base = Vec3::new(1.0, 1.0, 1.0);
        m.insert_point(&base).unwrap();
        assert_eq!(m.insert_point(&Vec3::new(3.0, 1.0, 1.0)).unwrap(), InsertOutcome::RejectedGate);
        let (k, s) = m.index(&base).unwrap();
        assert_eq!(m.get_representative(&k, s), Some((base, 1)));
    }

    #[test]
    fn saturation_caps_counter() {
        let mut m = OctVoxMap::new(MapConfig {
            n_max: 3,
            ..MapConfig::default()
        })
        .unwrap();
        let p = Vec3::new(0.1, 0.1, 0.1);
        let outcomes: Vec<_> = (0..6).map(|_| m.insert_point(&p).unwrap()).collect();
        assert_eq!(outcomes[0], InsertOutcome::Initialized);
        assert_eq!(&outcomes[1..4], &[InsertOutcome::Merged; 3]);
        assert_eq!(&outcomes[4..], &[InsertOutcome::RejectedSaturated; 2]);
        let (k, s) = m.index(&p).unwrap();
        assert_eq!(m.get_representative(&k, s), Some((p, 4)));
    }

    #[test]
    fn identical_points_batch() {
        let mut m = map_with(10);
        let p = Vec3::new(-0.3, 0.2, 0.9);
        let pts = vec![p; 250];
        let stats = m.insert_scan(&pts).unwrap();
        assert_eq!(stats.total(), 250);
        assert_eq!(stats.initialized, 1);
        assert_eq!(stats.merged, 100);
        assert_eq!(stats.rejected_saturated, 149);
        let (k, s) = m.index(&p).unwrap();
        let (mu, n) = m.get_representative(&k, s).unwrap();
        assert_eq!(n, 101);
        assert_abs_diff_eq!(mu, p, epsilon = 1e-15);
    }

    #[test]
    fn empty_batch() {
        let mut m = map_with(10);
        let stats = m.insert_scan(std::iter::empty()).unwrap();
        assert_eq!(stats, BatchStats::default());
    }

    #[test]
    fn random_points_in_one_voxel_fill_at_most_eight_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = map_with(10);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| {
                Vec3::new(
                    rng.random_range(0.0..0.5),
                    rng.random_range(0.0..0.5),
                    rng.random_range(0.0..0.5),
                )
            })
            .collect();
        m.insert_scan(&pts).unwrap();
        assert_eq!(m.len(), 1);
        let v = m.voxel(&VoxelKey::new(0, 0, 0)).unwrap();
        assert!(v.occupied() <= 8);
        assert_eq!(v.occupied(), 8);
    }

    #[test]
    fn absent_voxel_reads_empty() {
        let m = map_with(10);
        assert!(m.get_representative(&VoxelKey::new(3, 3, 3), 0).is_none());
        assert!(m.get_representative(&VoxelKey::new(3, 3, 3), 9).is_none());
    }

    fn voxel_point(i: i32) -> Vec3 {
        Vec3::new(i as f64 * 0.5 + 0.1, 0.1, 0.1)
    }

    #[test]
    fn lru_evicts_oldest() {
        let mut m = map_with(2);
        for i in 0..3 {
            m.insert_point(&voxel_point(i)).unwrap();
        }
        assert_eq!(m.len(), 2);
        assert!(m.voxel(&VoxelKey::new(0, 0, 0)).is_none());
        assert!(m.voxel(&VoxelKey::new(1, 0, 0)).is_some());
        assert!(m.voxel(&VoxelKey::new(2, 0, 0)).is_some());
    }

    #[test]
    fn lru_respects_retouch() {
        let mut m = map_with(2);
        m.insert_point(&voxel_point(0)).unwrap();
        m.insert_point(&voxel_point(1)).unwrap();
        m.insert_point(&voxel_point(0)).unwrap();
        m.insert_point(&voxel_point(2)).unwrap();
        assert!(m.voxel(&VoxelKey::new(0, 0, 0)).is_some());
        assert!(m.voxel(&VoxelKey::new(1, 0, 0)).is_none());
        assert!(m.voxel(&VoxelKey::new(2, 0, 0)).is_some());
    }

    #[test]
    fn query_touch_refreshes_recency() {
        let mut m = map_with(2);
        m.insert_point(&voxel_point(0)).unwrap();
        m.insert_point(&voxel_point(1)).unwrap();
        let mut log = TouchLog::new();
        log.touch(VoxelKey::new(0, 0, 0));
        m.flush_touches([&log]);
        m.insert_point(&voxel_point(2)).unwrap();
        assert!(m.voxel(&VoxelKey::new(0, 0, 0)).is_some());
        assert!(m.voxel(&VoxelKey::new(1, 0, 0)).is_none());
    }

    #[test]
    fn equal_stamps_evict_by_key_order() {
        let mut m = map_with(4);
        for i in [3, 1, 2, 0] {
            m.insert_point(&voxel_point(i)).unwrap();
        }
        let mut log = TouchLog::new();
        for i in [2, 0, 3, 1] {
            log.touch(VoxelKey::new(i, 0, 0));
        }
        m.flush_touches([&log]);
        m.set_capacity(2).unwrap();
        assert_eq!(m.evict_to_capacity(), 2);
        assert!(m.voxel(&VoxelKey::new(0, 0, 0)).is_none());
        assert!(m.voxel(&VoxelKey::new(1, 0, 0)).is_none());
        assert!(m.voxel(&VoxelKey::new(2, 0, 0)).is_some());
        assert!(m.voxel(&VoxelKey::new(3, 0, 0)).is_some());
    }

    #[test]
    fn evict_noop_when_within_capacity() {
        let mut m = map_with(5);
        m.insert_point(&voxel_point(0)).unwrap();
        assert_eq!(m.evict_to_capacity(), 0);
    }

    #[test]
    fn batch_stats_count_evictions() {
        let mut m = map_with(3);
        let pts: Vec<Vec3> = (0..10).map(voxel_point).collect();
        let stats = m.insert_scan(&pts).unwrap();
        assert_eq!(stats.evicted, 7);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn recency_queue_stays_bounded() {
        let mut m = map_with(50);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200_000 {
            let p = Vec3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.1);
            m.insert_point(&p).unwrap();
        }
        assert!(m.len() <= 50);
        assert!(m.recency_queue_len() <= 4 * m.len() + 1025);
    }

    #[test]
    fn snapshot_format() {
        let mut m = map_with(10);
        m.insert_point(&Vec3::new(0.3, 0.7, -0.2)).unwrap();
        m.insert_point(&Vec3::new(0.1, 0.1, 0.1)).unwrap();
        let snap = m.snapshot();
        assert_eq!(snap, "0,0,0,0,0.1,0.1,0.1,1\n0,1,-1,5,0.3,0.7,-0.2,1\n");
        let parsed = parse_snapshot(&snap).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[1].0, VoxelKey::new(0, 1, -1));
        assert_eq!(parsed[1].2, Vec3::new(0.3, 0.7, -0.2));
    }

    #[test]
    fn config_validation() {
        assert!(OctVoxMap::new(MapConfig {
            voxel_size: 0.0,
            ..MapConfig::default()
        })
        .is_err());
        assert!(OctVoxMap::new(MapConfig {
            tau_merge: -1.0,
            ..MapConfig::default()
        })
        .is_err());
        assert!(OctVoxMap::new(MapConfig {
            capacity: 0,
            ..MapConfig::default()
        })
        .is_err());
    }

    proptest! {
        #[test]
        fn indexed_cube_contains_point(x in -50.0f64..50.0, y in -50.0f64..50.0, z in -50.0f64..50.0,
                                       r_s in prop::sample::select(vec![0.1f64, 0.25, 0.5, 1.0])) {
            let p = Vec3::new(x, y, z);
            let (k, s) = subvoxel_index(&p, r_s).unwrap();
            let lo = subvoxel_min_corner(&k, s, r_s);
            for a in 0..3 {
                prop_assert!(p[a] >= lo[a] - 1e-9 && p[a] <= lo[a] + r_s + 1e-9);
            }
        }

        #[test]
        fn capacity_never_exceeded(cap in 1usize..20, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = map_with(cap);
            for _ in 0..300 {
                let p = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
                m.insert_point(&p).unwrap();
                prop_assert!(m.len() <= cap);
            }
        }
    }
}
