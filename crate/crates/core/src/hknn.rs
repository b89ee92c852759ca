//! Heuristic-guided exact K-nearest-neighbor search over an [`OctVoxMap`].
//!
//! Candidate subvoxels around the query are visited in groups of equal
//! lower-bound distance, nearest group first. The lower bound of a group is
//! the minimum distance between the query's subvoxel cube and any cube in the
//! group, so once the K-th best distance is strictly below the next group's
//! bound no unvisited representative can improve the result.
//!
//! The group list is built once for a query in the low octant of its voxel
//! and mirrored per query: a query in octant `s_j` flips the voxel offset on
//! every axis whose bit is set in `s_j` and XORs the subvoxel index with it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::Vec3;
use crate::octvox::{octant_bits, MapError, OctVoxMap, TouchLog, VoxelKey};
use crate::par;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("k must be >= 1")]
    ZeroK,
    #[error("radius {radius} must lie in (0, {r_max}]")]
    Radius { radius: f64, r_max: f64 },
    #[error("traversal list built for subvoxel size {list} but map uses {map}")]
    ResolutionMismatch { list: f64, map: f64 },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A candidate subvoxel relative to the query: voxel offset plus slot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OffsetEntry {
    pub dk: [i32; 3],
    pub s: u8,
}

impl OffsetEntry {
    /// Offset of the entry's subvoxel from the canonical query subvoxel, in
    /// subvoxel units.
    pub fn subvoxel_offset(&self) -> [i64; 3] {
        let b = octant_bits(self.s);
        [
            2 * self.dk[0] as i64 + b[0] as i64,
            2 * self.dk[1] as i64 + b[1] as i64,
            2 * self.dk[2] as i64 + b[2] as i64,
        ]
    }
}

/// Entries sharing one lower-bound distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Squared bound in units of `r_s^2`; exact integer.
    pub bound_sq: u32,
    /// Bound in meters, `r_s * sqrt(bound_sq)`.
    pub bound: f64,
    pub entries: Vec<OffsetEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalList {
    groups: Vec<Group>,
    r_s: f64,
    r_max: f64,
    /// Optional per-octant copies, so queries skip the reflection.
    octants: Option<Box<[Vec<Group>; 8]>>,
}

/// Integer squared gap between the canonical subvoxel `[0,1]^3` and the
/// subvoxel whose lower corner is `offset` (both in subvoxel units).
#[inline]
pub fn gap_sq(offset: [i64; 3]) -> u64 {
    offset
        .iter()
        .map(|&d| {
            let g = (d.abs() - 1).max(0) as u64;
            g * g
        })
        .sum()
}

/// Minimum Euclidean distance between the vertex sets of two axis-aligned
/// subvoxel cubes whose lower corners differ by `offset` subvoxels.
pub fn subvoxel_distance(offset: [i64; 3], r_s: f64) -> f64 {
    r_s * (gap_sq(offset) as f64).sqrt()
}

/// Mirrors a canonical entry into the octant `s_j`.
#[inline]
pub fn reflect_entry(entry: &OffsetEntry, s_j: u8) -> OffsetEntry {
    let b = octant_bits(s_j);
    OffsetEntry {
        dk: [
            if b[0] == 1 { -entry.dk[0] } else { entry.dk[0] },
            if b[1] == 1 { -entry.dk[1] } else { entry.dk[1] },
            if b[2] == 1 { -entry.dk[2] } else { entry.dk[2] },
        ],
        s: entry.s ^ s_j,
    }
}

/// Splits a subvoxel coordinate into voxel offset and octant bit.
#[inline]
fn split_subvoxel(c: i64) -> (i32, u8) {
    ((c >> 1) as i32, (c & 1) as u8)
}

/// Every subvoxel whose lower-bound distance to the subvoxel of `query_octant`
/// in voxel 0 is at most `r_max`, grouped by squared bound. Shared by the
/// canonical build and the direct per-octant build.
fn enumerate_groups(r_max: f64, r_s: f64, query_octant: u8) -> Vec<Group> {
    let limit_sq = (r_max / r_s).powi(2) + 1e-9;
    let reach = (r_max / r_s).floor() as i64 + 1;
    let qb = octant_bits(query_octant);
    let mut flat: Vec<(u32, OffsetEntry)> = Vec::new();
    for cx in -reach..=reach {
        for cy in -reach..=reach {
            for cz in -reach..=reach {
                let g = gap_sq([cx, cy, cz]);
                if g as f64 > limit_sq {
                    continue;
                }
                // absolute subvoxel coordinate = query subvoxel + offset
                let abs = [cx + qb[0] as i64, cy + qb[1] as i64, cz + qb[2] as i64];
                let (kx, bx) = split_subvoxel(abs[0]);
                let (ky, by) = split_subvoxel(abs[1]);
                let (kz, bz) = split_subvoxel(abs[2]);
                flat.push((
                    g as u32,
                    OffsetEntry {
                        dk: [kx, ky, kz],
                        s: bx | (by << 1) | (bz << 2),
                    },
                ));
            }
        }
    }
    flat.sort_unstable();
    let mut groups: Vec<Group> = Vec::new();
    for (g, e) in flat {
        match groups.last_mut() {
            Some(last) if last.bound_sq == g => last.entries.push(e),
            _ => groups.push(Group {
                bound_sq: g,
                bound: r_s * (g as f64).sqrt(),
                entries: vec![e],
            }),
        }
    }
    groups
}

impl TraversalList {
    /// Builds the canonical list covering every subvoxel within `r_max` of
    /// the query subvoxel.
    pub fn build(r_max: f64, r_s: f64) -> Self {
        assert!(r_s > 0.0 && r_s.is_finite(), "subvoxel size must be positive");
        assert!(r_max >= 0.0 && r_max.is_finite(), "r_max must be non-negative");
        Self {
            groups: enumerate_groups(r_max, r_s, 0),
            r_s,
            r_max,
            octants: None,
        }
    }

    /// Builds the list as if the query sat in octant `s_j`, without using
    /// reflection. Used to cross-check [`reflect_entry`].
    pub fn build_for_octant(r_max: f64, r_s: f64, s_j: u8) -> Vec<Group> {
        enumerate_groups(r_max, r_s, s_j)
    }

    /// Precomputes the eight mirrored lists.
    pub fn with_materialized_octants(mut self) -> Self {
        let octants: [Vec<Group>; 8] = std::array::from_fn(|s_j| self.reflected(s_j as u8));
        self.octants = Some(Box::new(octants));
        self
    }

    pub fn has_materialized_octants(&self) -> bool {
        self.octants.is_some()
    }

    /// The canonical groups mirrored into octant `s_j`.
    pub fn reflected(&self, s_j: u8) -> Vec<Group> {
        self.groups
            .iter()
            .map(|g| Group {
                bound_sq: g.bound_sq,
                bound: g.bound,
                entries: g.entries.iter().map(|e| reflect_entry(e, s_j)).collect(),
            })
            .collect()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn r_s(&self) -> f64 {
        self.r_s
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Lines `group_index,bound_sq_int,dkx,dky,dkz,s`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.groups.iter().enumerate() {
            for e in &g.entries {
                let _ = writeln!(out, "{},{},{},{},{},{}", i, g.bound_sq, e.dk[0], e.dk[1], e.dk[2], e.s);
            }
        }
        out
    }
}

/// A representative returned by the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub mu: Vec3,
    pub dist: f64,
    pub key: VoxelKey,
    pub s: u8,
}

impl Neighbor {
    /// Total order used everywhere: distance, then voxel key, then slot.
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.key.cmp(&other.key))
            .then_with(|| self.s.cmp(&other.s))
    }
}

struct Ranked(Neighbor);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp_rank(&other.0) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp_rank(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub k: usize,
    pub radius: f64,
    /// When false every group up to the radius is scanned.
    pub early_termination: bool,
}

impl SearchOptions {
    pub fn new(k: usize, radius: f64) -> Self {
        Self {
            k,
            radius,
            early_termination: true,
        }
    }
}

/// Work counters accumulated across searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    pub queries: usize,
    /// Occupied slots whose distance was evaluated.
    pub candidates: usize,
    /// List entries visited, occupied or not.
    pub entries: usize,
    pub groups: usize,
    pub early_exits: usize,
}

impl SearchStats {
    pub fn merge(&mut self, other: &SearchStats) {
        self.queries += other.queries;
        self.candidates += other.candidates;
        self.entries += other.entries;
        self.groups += other.groups;
        self.early_exits += other.early_exits;
    }
}

/// Slack on the termination test so that rounding in the bound can never
/// stop the search before a tied candidate.
const BOUND_SLACK: f64 = 1e-12;

/// Exact top-`k` representatives within `radius` of `p`, ascending.
pub fn knn_search(
    map: &OctVoxMap,
    list: &TraversalList,
    p: &Vec3,
    k: usize,
    radius: f64,
) -> Result<Vec<Neighbor>, SearchError> {
    let mut stats = SearchStats::default();
    knn_search_with(map, list, p, &SearchOptions::new(k, radius), &mut stats, None)
}

fn check_args(map: &OctVoxMap, list: &TraversalList, opts: &SearchOptions) -> Result<(), SearchError> {
    if opts.k == 0 {
        return Err(SearchError::ZeroK);
    }
    if !(opts.radius > 0.0 && opts.radius <= list.r_max + 1e-12) {
        return Err(SearchError::Radius {
            radius: opts.radius,
            r_max: list.r_max,
        });
    }
    if (map.subvoxel_size() - list.r_s).abs() > 1e-12 * list.r_s {
        return Err(SearchError::ResolutionMismatch {
            list: list.r_s,
            map: map.subvoxel_size(),
        });
    }
    Ok(())
}

/// [`knn_search`] with options, work counters and an optional touch log that
/// receives the voxel of every returned neighbor.
pub fn knn_search_with(
    map: &OctVoxMap,
    list: &TraversalList,
    p: &Vec3,
    opts: &SearchOptions,
    stats: &mut SearchStats,
    touches: Option<&mut TouchLog>,
) -> Result<Vec<Neighbor>, SearchError> {
    check_args(map, list, opts)?;
    let (key_p, s_p) = map.index(p)?;
    stats.queries += 1;

    let (groups, reflect): (&[Group], bool) = match &list.octants {
        Some(o) => (&o[s_p as usize], false),
        None => (&list.groups, true),
    };

    let k = opts.k;
    let radius = opts.radius;
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for g in groups {
        if g.bound > radius + BOUND_SLACK {
            break;
        }
        if opts.early_termination && heap.len() == k {
            let worst = heap.peek().map(|r| r.0.dist).unwrap_or(f64::INFINITY);
            if worst + BOUND_SLACK < g.bound {
                stats.early_exits += 1;
                break;
            }
        }
        stats.groups += 1;
        for e in &g.entries {
            stats.entries += 1;
            let e = if reflect { reflect_entry(e, s_p) } else { *e };
            let key = key_p.offset(e.dk);
            let Some(voxel) = map.voxel(&key) else {
                continue;
            };
            let rec = &voxel.slots[e.s as usize];
            if rec.n == 0 {
                continue;
            }
            stats.candidates += 1;
            let dist = (p - rec.mu).norm();
            if dist > radius {
                continue;
            }
            let cand = Ranked(Neighbor {
                mu: rec.mu,
                dist,
                key,
                s: e.s,
            });
            if heap.len() < k {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    let out: Vec<Neighbor> = heap.into_sorted_vec().into_iter().map(|r| r.0).collect();
    if let Some(log) = touches {
        for n in &out {
            log.touch(n.key);
        }
    }
    Ok(out)
}

/// Scans every occupied slot in the map. Test and benchmark oracle.
pub fn brute_force_knn(map: &OctVoxMap, p: &Vec3, k: usize, radius: f64) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = Vec::new();
    for (key, voxel) in map.iter() {
        for (s, rec) in voxel.slots.iter().enumerate() {
            if rec.n == 0 {
                continue;
            }
            let dist = (p - rec.mu).norm();
            if dist <= radius {
                all.push(Neighbor {
                    mu: rec.mu,
                    dist,
                    key: *key,
                    s: s as u8,
                });
            }
        }
    }
    all.sort_by(|a, b| a.cmp_rank(b));
    all.truncate(k);
    all
}

/// Runs independent searches over a batch of queries, in parallel when the
/// `parallel` feature is enabled. Results are in query order.
pub fn knn_batch(
    map: &OctVoxMap,
    list: &TraversalList,
    queries: &[Vec3],
    opts: &SearchOptions,
) -> (Vec<Result<Vec<Neighbor>, SearchError>>, SearchStats) {
    let results = par::map_collect(queries, |q| {
        let mut st = SearchStats::default();
        let r = knn_search_with(map, list, q, opts, &mut st, None);
        (r, st)
    });
    collect_batch(results)
}

/// Sequential counterpart of [`knn_batch`].
pub fn knn_batch_seq(
    map: &OctVoxMap,
    list: &TraversalList,
    queries: &[Vec3],
    opts: &SearchOptions,
) -> (Vec<Result<Vec<Neighbor>, SearchError>>, SearchStats) {
    let results = par::map_collect_seq(queries, |q| {
        let mut st = SearchStats::default();
        let r = knn_search_with(map, list, q, opts, &mut st, None);
        (r, st)
    });
    collect_batch(results)
}

fn collect_batch(
    results: Vec<(Result<Vec<Neighbor>, SearchError>, SearchStats)>,
) -> (Vec<Result<Vec<Neighbor>, SearchError>>, SearchStats) {
    let mut total = SearchStats::default();
    let out = results
        .into_iter()
        .map(|(r, st)| {
            total.merge(&st);
            r
        })
        .collect();
    (out, total)
}
