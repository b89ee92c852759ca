//! Open-addressed hash table with Robin Hood displacement and backward-shift
//! deletion, keyed by voxel coordinates.

use super::VoxelKey;

const MIN_BUCKETS: usize = 16;
/// Grow once `len / buckets` would exceed 7/8.
const MAX_LOAD_NUM: usize = 7;
const MAX_LOAD_DEN: usize = 8;

/// Mixes the three key components with large odd multipliers, then folds the
/// result so that the high bits depend on every input bit.
#[inline]
pub fn hash_key(key: &VoxelKey) -> u64 {
    let h = (key.x as i64 as u64).wrapping_mul(0x9E37_79B1_85EB_CA87)
        ^ (key.y as i64 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (key.z as i64 as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    let h = (h ^ (h >> 31)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^ (h >> 31)
}

#[derive(Debug, Clone)]
pub struct RobinHoodTable<V> {
    /// 0 marks an empty bucket, otherwise probe distance + 1.
    dist: Vec<u32>,
    entries: Vec<Option<(VoxelKey, V)>>,
    len: usize,
    shift: u32,
}

impl<V> Default for RobinHoodTable<V> {
    fn default() -> Self {
        Self::with_buckets(MIN_BUCKETS)
    }
}

impl<V> RobinHoodTable<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Table with at least `buckets` buckets (rounded up to a power of two).
    pub fn with_buckets(buckets: usize) -> Self {
        let n = buckets.max(MIN_BUCKETS).next_power_of_two();
        Self {
            dist: vec![0; n],
            entries: (0..n).map(|_| None).collect(),
            len: 0,
            shift: 64 - n.trailing_zeros(),
        }
    }

    /// Table sized so that `expected` keys fit without growing.
    pub fn with_capacity(expected: usize) -> Self {
        Self::with_buckets(expected * MAX_LOAD_DEN / MAX_LOAD_NUM + 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn buckets(&self) -> usize {
        self.dist.len()
    }

    pub fn load_factor(&self) -> f64 {
        self.len as f64 / self.buckets() as f64
    }

    #[inline]
    fn mask(&self) -> usize {
        self.dist.len() - 1
    }

    #[inline]
    fn home(&self, key: &VoxelKey) -> usize {
        (hash_key(key) >> self.shift) as usize
    }

    fn find(&self, key: &VoxelKey) -> Option<usize> {
        let mask = self.mask();
        let mut idx = self.home(key);
        let mut d = 1u32;
        loop {
            let here = self.dist[idx];
            // an empty bucket or a richer resident ends the probe sequence
            if here < d {
                return None;
            }
            if let Some((k, _)) = &self.entries[idx] {
                if k == key {
                    return Some(idx);
                }
            }
            idx = (idx + 1) & mask;
            d += 1;
        }
    }

    pub fn contains_key(&self, key: &VoxelKey) -> bool {
        self.find(key).is_some()
    }

    pub fn get(&self, key: &VoxelKey) -> Option<&V> {
        self.find(key)
            .and_then(|i| self.entries[i].as_ref().map(|(_, v)| v))
    }

    pub fn get_mut(&mut self, key: &VoxelKey) -> Option<&mut V> {
        let i = self.find(key)?;
        self.entries[i].as_mut().map(|(_, v)| v)
    }

    /// Returns the value for `key`, inserting `make()` first if absent.
    /// The flag is true when a new entry was created.
    pub fn get_or_insert_with(&mut self, key: VoxelKey, make: impl FnOnce() -> V) -> (&mut V, bool) {
        let (idx, fresh) = match self.find(&key) {
            Some(i) => (i, false),
            None => (self.insert_new(key, make()), true),
        };
        (self.entries[idx].as_mut().map(|(_, v)| v).expect("occupied"), fresh)
    }

    /// Inserts or replaces, returning the previous value.
    pub fn insert(&mut self, key: VoxelKey, value: V) -> Option<V> {
        if let Some(i) = self.find(&key) {
            let slot = self.entries[i].as_mut().expect("occupied");
            return Some(std::mem::replace(&mut slot.1, value));
        }
        self.insert_new(key, value);
        None
    }

    /// Places a key known to be absent; returns its final bucket.
    fn insert_new(&mut self, key: VoxelKey, value: V) -> usize {
        if (self.len + 1) * MAX_LOAD_DEN > self.buckets() * MAX_LOAD_NUM {
            self.grow();
        }
        let mask = self.mask();
        let mut idx = self.home(&key);
        let mut d = 1u32;
        let mut carry = (key, value);
        let mut placed = None;
        loop {
            if self.dist[idx] == 0 {
                self.dist[idx] = d;
                self.entries[idx] = Some(carry);
                self.len += 1;
                return placed.unwrap_or(idx);
            }
            if self.dist[idx] < d {
                // steal from the rich: the resident is closer to home than we are
                std::mem::swap(&mut self.dist[idx], &mut d);
                let resident = self.entries[idx].replace(carry).expect("occupied");
                carry = resident;
                placed.get_or_insert(idx);
            }
            idx = (idx + 1) & mask;
            d += 1;
        }
    }

    pub fn remove(&mut self, key: &VoxelKey) -> Option<V> {
        let mut idx = self.find(key)?;
        let mask = self.mask();
        let (_, value) = self.entries[idx].take().expect("occupied");
        self.dist[idx] = 0;
        self.len -= 1;
        // backward shift until an empty bucket or an entry already at home
        loop {
            let next = (idx + 1) & mask;
            if self.dist[next] <= 1 {
                break;
            }
            self.entries[idx] = self.entries[next].take();
            self.dist[idx] = self.dist[next] - 1;
            self.dist[next] = 0;
            idx = next;
        }
        Some(value)
    }

    fn grow(&mut self) {
        let new_buckets = self.buckets() * 2;
        let old = std::mem::replace(self, Self::with_buckets(new_buckets));
        for (k, v) in old.entries.into_iter().flatten() {
            self.insert_new(k, v);
        }
    }

    pub fn clear(&mut self) {
        for d in &mut self.dist {
            *d = 0;
        }
        for e in &mut self.entries {
            *e = None;
        }
        self.len = 0;
    }

    /// Iterates entries in bucket order.
    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &V)> {
        self.entries
            .iter()
            .filter_map(|e| e.as_ref().map(|(k, v)| (k, v)))
    }

    /// Counts of entries by probe length (index 0 holds entries found at
    /// their home bucket, i.e. probe length 1).
    pub fn probe_histogram(&self) -> Vec<usize> {
        let mut hist = Vec::new();
        for &d in &self.dist {
            if d == 0 {
                continue;
            }
            let i = (d - 1) as usize;
            if hist.len() <= i {
                hist.resize(i + 1, 0);
            }
            hist[i] += 1;
        }
        hist
    }
}
