//! Deterministic pairwise reductions.
//!
//! The split tree depends only on the index range, never on thread scheduling,
//! so serial and parallel evaluation produce bit-identical sums.

use std::ops::Add;

const LEAF: usize = 64;
const PAR_THRESHOLD: usize = 1 << 14;

/// Pairwise sum of `f(i)` for `i` in `range`, evaluated serially.
pub fn pairwise_sum<T, F>(start: usize, end: usize, f: &F) -> T
where
    T: Add<Output = T> + Default + Copy,
    F: Fn(usize) -> T,
{
    let n = end - start;
    if n <= LEAF {
        let mut acc = T::default();
        for i in start..end {
            acc = acc + f(i);
        }
        return acc;
    }
    let mid = start + split_point(n);
    pairwise_sum(start, mid, f) + pairwise_sum(mid, end, f)
}

/// Same tree as [`pairwise_sum`], with large subtrees evaluated on the rayon pool.
pub fn par_pairwise_sum<T, F>(start: usize, end: usize, f: &F) -> T
where
    T: Add<Output = T> + Default + Copy + Send,
    F: Fn(usize) -> T + Sync,
{
    let n = end - start;
    if n <= PAR_THRESHOLD {
        return pairwise_sum(start, end, f);
    }
    let mid = start + split_point(n);
    let (a, b) = rayon::join(|| par_pairwise_sum(start, mid, f), || par_pairwise_sum(mid, end, f));
    a + b
}

// Leaf-aligned split so the tree below PAR_THRESHOLD matches the serial one.
fn split_point(n: usize) -> usize {
    let leaves = n.div_ceil(LEAF);
    (leaves / 2) * LEAF
}
