//! Fixed-popcount mask enumeration and load-balanced work partitioning.
//!
//! Masks use the high-to-low convention: for `N` modes, bit `N - j - 1` is set
//! exactly when mode `j` belongs to the subset. Within one popcount class the
//! enumeration order is strictly decreasing numerically, starting at the mask
//! with all ones at the top.

use thiserror::Error;

/// Largest mode count the 64-bit mask and binomial paths support.
pub const MAX_MODES: u32 = 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubsetError {
    #[error("binomial C({n}, {k}) overflows 64 bits")]
    Overflow { n: u32, k: u32 },
    #[error("invalid binomial arguments C({n}, {k})")]
    InvalidBinomial { n: u32, k: u32 },
    #[error("rank {k} out of range for C({n}, {z}) = {count}")]
    RankOutOfRange { n: u32, z: u32, k: u64, count: u64 },
    #[error("mode count {0} outside 1..={MAX_MODES}")]
    TooManyModes(u32),
    #[error("mask {0:#b} is the last of its popcount class")]
    EndOfRange(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask(pub u64);

impl SubsetMask {
    pub fn popcount(self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains_mode(self, n_modes: u32, mode: u32) -> bool {
        self.0 >> (n_modes - mode - 1) & 1 == 1
    }

    /// Selected modes in ascending order.
    pub fn modes(self, n_modes: u32) -> impl Iterator<Item = u32> {
        (0..n_modes).filter(move |&j| self.contains_mode(n_modes, j))
    }

    pub fn from_modes(n_modes: u32, modes: &[u32]) -> Self {
        Self(modes.iter().fold(0, |m, &j| m | 1 << (n_modes - j - 1)))
    }
}

/// Exact binomial coefficient in 64 bits.
pub fn binom(n: u32, k: u32) -> Result<u64, SubsetError> {
    if k > n {
        return Err(SubsetError::InvalidBinomial { n, k });
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(SubsetError::Overflow { n, k });
        }
    }
    Ok(acc as u64)
}

/// The `k`-th (0-based) mask of popcount `z` over `n` bits, in descending
/// numeric order. Bits are placed from high to low: at each candidate
/// position, `C(remaining positions, remaining ones)` masks keep that bit set.
pub fn get_kth_mask(n: u32, z: u32, k: u64) -> Result<SubsetMask, SubsetError> {
    if n == 0 || n > MAX_MODES {
        return Err(SubsetError::TooManyModes(n));
    }
    let count = binom(n, z)?;
    if k >= count {
        return Err(SubsetError::RankOutOfRange { n, z, k, count });
    }
    let mut k = k;
    let mut mask = 0u64;
    let mut ones_left = z;
    for j in 0..n {
        if ones_left == 0 {
            break;
        }
        // masks that set position j (and place the remaining ones below it)
        let with_bit = binom(n - j - 1, ones_left - 1)?;
        if k < with_bit {
            mask |= 1 << (n - j - 1);
            ones_left -= 1;
        } else {
            k -= with_bit;
        }
    }
    Ok(SubsetMask(mask))
}

/// Immediate successor in descending order with the same popcount: the run of
/// trailing ones is cleared, then the lowest remaining one moves down one
/// place and the run is re-attached directly below it.
pub fn get_next_mask(mask: SubsetMask) -> Result<SubsetMask, SubsetError> {
    let m = mask.0;
    let cto = m.trailing_ones();
    let x = m - ((1u64 << cto) - 1);
    if x == 0 {
        return Err(SubsetError::EndOfRange(m));
    }
    let ctz = x.trailing_zeros();
    // x - 2^(ctz - cto - 1) clears bit ctz and sets bits ctz-1 .. ctz-cto-1
    Ok(SubsetMask(x - (1u64 << (ctz - cto - 1))))
}

/// Contiguous slice of one popcount class assigned to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskRange {
    pub popcount: u32,
    /// Rank of the first mask within the class.
    pub start_rank: u64,
    /// Number of masks in the slice.
    pub len: u64,
    /// First mask, `None` when the slice is empty.
    pub start: Option<SubsetMask>,
}

impl MaskRange {
    pub fn iter(&self) -> MaskIter {
        MaskIter { next: self.start, remaining: self.len }
    }
}

pub struct MaskIter {
    next: Option<SubsetMask>,
    remaining: u64,
}

impl Iterator for MaskIter {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        if self.remaining == 0 {
            return None;
        }
        let cur = self.next?;
        self.remaining -= 1;
        self.next = if self.remaining > 0 { get_next_mask(cur).ok() } else { None };
        Some(cur)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

/// Work of one worker: one range per popcount 1..=N, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkAssignment {
    pub n_modes: u32,
    pub rank: u32,
    pub nproc: u32,
    pub ranges: Vec<MaskRange>,
}

impl WorkAssignment {
    /// Total number of masks assigned.
    pub fn len(&self) -> u64 {
        self.ranges.iter().map(|r| r.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether this worker also carries the empty-set term.
    pub fn owns_empty_set(&self) -> bool {
        self.rank == 0
    }

    pub fn masks(&self) -> impl Iterator<Item = SubsetMask> + '_ {
        self.ranges.iter().flat_map(|r| r.iter())
    }
}

/// Splits every popcount class evenly and contiguously over `nproc` workers:
/// worker `rank` gets ranks `floor(C * rank / nproc) .. floor(C * (rank+1) / nproc)`.
pub fn partition(n_modes: u32, rank: u32, nproc: u32) -> Result<WorkAssignment, SubsetError> {
    assert!(nproc >= 1 && rank < nproc, "rank {rank} / nproc {nproc}");
    if n_modes == 0 || n_modes > MAX_MODES {
        return Err(SubsetError::TooManyModes(n_modes));
    }
    let mut ranges = Vec::with_capacity(n_modes as usize);
    for z in 1..=n_modes {
        let count = binom(n_modes, z)?;
        let lo = (count as u128 * rank as u128 / nproc as u128) as u64;
        let hi = (count as u128 * (rank as u128 + 1) / nproc as u128) as u64;
        let start = if hi > lo { Some(get_kth_mask(n_modes, z, lo)?) } else { None };
        ranges.push(MaskRange { popcount: z, start_rank: lo, len: hi - lo, start });
    }
    Ok(WorkAssignment { n_modes, rank, nproc, ranges })
}

/// Outcome of an exhaustive partition audit.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct PartitionAudit {
    pub n_modes: u32,
    pub nproc: u32,
    pub covered: u64,
    pub expected: u64,
    pub duplicates: u64,
    /// Largest per-popcount difference between the busiest and idlest worker.
    pub max_imbalance: u64,
}

impl PartitionAudit {
    pub fn ok(&self) -> bool {
        self.covered == self.expected && self.duplicates == 0 && self.max_imbalance <= 1
    }
}

/// Walks every worker's masks and checks coverage and disjointness against a
/// bitmap of all `2^N - 1` nonempty masks. Feasible for `N <= 26` or so.
pub fn audit_partition(n_modes: u32, nproc: u32) -> Result<PartitionAudit, SubsetError> {
    if n_modes == 0 || n_modes > 30 {
        return Err(SubsetError::TooManyModes(n_modes));
    }
    let total = 1u64 << n_modes;
    let mut seen = vec![false; total as usize];
    let mut duplicates = 0;
    let mut covered = 0;
    let mut min_len = vec![u64::MAX; n_modes as usize];
    let mut max_len = vec![0u64; n_modes as usize];
    for rank in 0..nproc {
        let w = partition(n_modes, rank, nproc)?;
        for r in &w.ranges {
            let zi = (r.popcount - 1) as usize;
            min_len[zi] = min_len[zi].min(r.len);
            max_len[zi] = max_len[zi].max(r.len);
            for m in r.iter() {
                debug_assert_eq!(m.popcount(), r.popcount);
                if std::mem::replace(&mut seen[m.0 as usize], true) {
                    duplicates += 1;
                } else {
                    covered += 1;
                }
            }
        }
    }
    let max_imbalance = min_len.iter().zip(&max_len).map(|(lo, hi)| hi - lo).max().unwrap_or(0);
    Ok(PartitionAudit { n_modes, nproc, covered, expected: total - 1, duplicates, max_imbalance })
}
