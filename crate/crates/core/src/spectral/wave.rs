use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

/// Integer lattice coordinates of a Fourier mode `e_k(x) = exp(2πi k·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector(pub [i32; 3]);

impl WaveVector {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        WaveVector([x, y, z])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| c as i64 * c as i64).sum()
    }

    /// Euclidean lattice norm `|k|`.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Lexicographic positivity: the first nonzero coordinate is positive.
    ///
    /// This is the partition rule for `ℤ³₊`; `ℤ³₋` is its negative.
    pub fn is_positive(&self) -> bool {
        self.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }

    /// The representative of `{k, -k}` in `ℤ³₊` and whether `self` was negated.
    pub fn representative(self) -> (WaveVector, bool) {
        if self.is_positive() {
            (self, false)
        } else {
            (-self, true)
        }
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    pub fn dot(&self, v: &[f64; 3]) -> f64 {
        self.0[0] as f64 * v[0] + self.0[1] as f64 * v[1] + self.0[2] as f64 * v[2]
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

/// Where a wave vector lives inside a [`ModeSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Stored representative at this index.
    Stored(usize),
    /// Negative of the stored representative at this index; the coefficient
    /// is the complex conjugate.
    Conjugate(usize),
}

/// The lattice ball `1 <= |k| <= cutoff`, stored as one representative per
/// conjugate pair `{k, -k}`.
///
/// Representatives are the lexicographically positive vectors, ordered by
/// `|k|²` and then lexicographically. The order is part of the snapshot
/// format and of every deterministic reduction in the crate.
#[derive(Debug)]
pub struct ModeSet {
    cutoff: u32,
    modes: Vec<WaveVector>,
    // dense cube of side 2m+1: 0 = absent, i+1 = stored, -(i+1) = conjugate
    lookup: Vec<i32>,
}

impl ModeSet {
    /// Shared mode set for `1 <= |k| <= cutoff`; instances are cached.
    pub fn ball(cutoff: u32) -> Arc<ModeSet> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<ModeSet>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("mode set cache poisoned");
        guard
            .entry(cutoff)
            .or_insert_with(|| Arc::new(ModeSet::build(cutoff)))
            .clone()
    }

    fn build(cutoff: u32) -> ModeSet {
        let m = cutoff as i32;
        let r2 = cutoff as i64 * cutoff as i64;
        let mut modes = Vec::new();
        for x in -m..=m {
            for y in -m..=m {
                for z in -m..=m {
                    let k = WaveVector::new(x, y, z);
                    if k.is_positive() && k.norm_sq() <= r2 {
                        modes.push(k);
                    }
                }
            }
        }
        modes.sort_by_key(|k| (k.norm_sq(), k.0));
        let side = (2 * m + 1) as usize;
        let mut lookup = vec![0i32; side * side * side];
        let mut set = ModeSet {
            cutoff,
            modes: Vec::new(),
            lookup: Vec::new(),
        };
        for (i, k) in modes.iter().enumerate() {
            lookup[set.cube_index_unchecked(*k, m)] = i as i32 + 1;
            lookup[set.cube_index_unchecked(-*k, m)] = -(i as i32 + 1);
        }
        set.modes = modes;
        set.lookup = lookup;
        set
    }

    fn cube_index_unchecked(&self, k: WaveVector, m: i32) -> usize {
        let side = (2 * m + 1) as usize;
        let c = |v: i32| (v + m) as usize;
        (c(k.0[0]) * side + c(k.0[1])) * side + c(k.0[2])
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    /// Number of stored representatives (half the number of modes in the ball).
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> WaveVector {
        self.modes[i]
    }

    pub fn slot(&self, k: WaveVector) -> Option<Slot> {
        let m = self.cutoff as i32;
        if k.0.iter().any(|c| c.abs() > m) {
            return None;
        }
        match self.lookup[self.cube_index_unchecked(k, m)] {
            0 => None,
            v if v > 0 => Some(Slot::Stored(v as usize - 1)),
            v => Some(Slot::Conjugate((-v) as usize - 1)),
        }
    }

    pub fn contains(&self, k: WaveVector) -> bool {
        self.slot(k).is_some()
    }

    /// Iterates over every mode of the ball, both signs, as
    /// `(k, stored index, conjugated)`.
    pub fn iter_full(&self) -> impl Iterator<Item = (WaveVector, usize, bool)> + '_ {
        self.modes
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| [(k, i, false), (-k, i, true)])
    }
}

impl PartialEq for ModeSet {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff == other.cutoff
    }
}
