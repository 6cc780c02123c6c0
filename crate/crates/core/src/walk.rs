//! The embedding of columns into the lattice and the random walk it drives.
//!
//! Increments are kept as exact integers `V = g·Z(x)`: coordinate `({i,j},a)` of
//! `V(x)` is `g - 1` when `x_i - x_j ≡ a (mod g)` and `-1` otherwise. A walk of
//! `t` columns returns to the origin exactly when the columns form a
//! difference matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};
use crate::params::Params;

/// A column of `k` residues mod `g`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column(pub Vec<u32>);

impl Column {
    pub fn new(p: &Params, entries: Vec<u32>) -> Result<Self> {
        if entries.len() != p.k {
            return Err(Error::domain(format!("column has {} entries, expected k = {}", entries.len(), p.k)));
        }
        if let Some(e) = entries.iter().find(|&&e| e >= p.g) {
            return Err(Error::domain(format!("entry {e} is not a residue mod {}", p.g)));
        }
        Ok(Column(entries))
    }

    /// Decode the `n`-th column in lexicographic order (first entry most significant).
    pub fn from_rank(p: &Params, mut n: u64) -> Self {
        let g = p.g as u64;
        let mut e = vec![0u32; p.k];
        for slot in e.iter_mut().rev() {
            *slot = (n % g) as u32;
            n /= g;
        }
        Column(e)
    }

    /// `x + c·1`.
    pub fn translate(&self, g: u32, c: u32) -> Self {
        Column(self.0.iter().map(|&x| (x + c) % g).collect())
    }

    /// `x_i - x_j mod g` for 1-based rows.
    #[inline]
    pub fn diff(&self, g: u32, i: usize, j: usize) -> u32 {
        (self.0[i - 1] + g - self.0[j - 1]) % g
    }
}

/// One walk step, stored exactly as `V = g·Z(x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Increment {
    pub v: Vec<i64>,
}

impl Increment {
    /// Sum of the coordinates in each pair block.
    pub fn pair_sums(&self, p: &Params) -> Vec<i64> {
        self.v.chunks(p.block_len()).map(|b| b.iter().sum()).collect()
    }
}

/// Position of the integer walk `Σ V` after `steps` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPosition {
    pub v_sum: Vec<i64>,
    pub steps: u64,
}

impl WalkPosition {
    pub fn origin(p: &Params) -> Self {
        WalkPosition { v_sum: vec![0; p.d], steps: 0 }
    }

    pub fn step(&mut self, inc: &Increment) {
        for (s, v) in self.v_sum.iter_mut().zip(&inc.v) {
            *s += v;
        }
        self.steps += 1;
    }

    /// Add `V(x)` without materialising the increment.
    pub fn step_column(&mut self, p: &Params, x: &[u32]) {
        let g = p.g;
        let b = p.block_len();
        for s in self.v_sum.iter_mut() {
            *s -= 1;
        }
        let mut block = 0;
        for i in 0..p.k {
            for j in i + 1..p.k {
                let a = (x[i] + g - x[j]) % g;
                if a != 0 {
                    self.v_sum[block * b + a as usize - 1] += g as i64;
                }
                block += 1;
            }
        }
        self.steps += 1;
    }

    pub fn is_origin(&self) -> bool {
        self.v_sum.iter().all(|&c| c == 0)
    }
}

pub fn z_map(p: &Params, x: &Column) -> Increment {
    let mut pos = WalkPosition::origin(p);
    pos.step_column(p, &x.0);
    Increment { v: pos.v_sum }
}

/// Lexicographic stream of columns.
#[derive(Debug, Clone)]
pub struct Columns {
    params: Params,
    next: u64,
    end: u64,
}

impl Iterator for Columns {
    type Item = Column;

    fn next(&mut self) -> Option<Column> {
        if self.next >= self.end {
            return None;
        }
        let c = Column::from_rank(&self.params, self.next);
        self.next += 1;
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Columns {}

/// All `g^k` columns, or the `g^(k-1)` with first entry 0 when `normalized`.
pub fn enumerate_columns(p: &Params, normalized: bool, budget: &Budget) -> Result<Columns> {
    let n = column_count(p, normalized);
    Budget::check("column enumeration", n, budget.max_columns as u128)?;
    Ok(Columns { params: *p, next: 0, end: n as u64 })
}

pub(crate) fn column_count(p: &Params, normalized: bool) -> u128 {
    let rows = if normalized { p.k - 1 } else { p.k };
    sat_pow(p.g as u128, rows as u64)
}

/// Normalized columns with the data every phase computation needs.
///
/// For column `x`, `hot[x]` lists the flat coordinates where `V(x) = g - 1`
/// (one per pair with a nonzero difference) and `diffs[x]` the per-pair
/// differences in pair order.
#[derive(Debug, Clone)]
pub struct ColumnTable {
    pub columns: Vec<Column>,
    pub hot: Vec<Vec<usize>>,
    pub diffs: Vec<Vec<u32>>,
}

impl ColumnTable {
    pub fn normalized(p: &Params, budget: &Budget) -> Result<Self> {
        // the full table is g times smaller but its users scan g^k terms
        Budget::check("column enumeration", column_count(p, false), budget.max_columns as u128)?;
        let columns: Vec<Column> = enumerate_columns(p, true, budget)?.collect();
        let mut hot = Vec::with_capacity(columns.len());
        let mut diffs = Vec::with_capacity(columns.len());
        for c in &columns {
            let mut h = Vec::with_capacity(p.pairs());
            let mut dv = Vec::with_capacity(p.pairs());
            let mut block = 0;
            for i in 1..=p.k {
                for j in i + 1..=p.k {
                    let a = c.diff(p.g, i, j);
                    dv.push(a);
                    if a != 0 {
                        h.push(p.block_start(block) + a as usize - 1);
                    }
                    block += 1;
                }
            }
            hot.push(h);
            diffs.push(dv);
        }
        Ok(ColumnTable { columns, hot, diffs })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Monte Carlo estimate of `P(X_t = 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

/// Samples per independently seeded substream.
pub const MC_BATCH: u64 = 1 << 14;

/// Seeded generator for substream `stream`: ChaCha8 keyed by `seed`, stream id `stream`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fraction of `samples` independent walks of `t` uniform columns that end at the origin.
///
/// Sample `n` belongs to batch `n / MC_BATCH`; each batch draws from its own
/// ChaCha8 stream, so the hit count does not depend on the worker count.
pub fn mc_return_probability(p: &Params, samples: u64, seed: u64) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::domain("samples must be >= 1"));
    }
    let batches = samples.div_ceil(MC_BATCH);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let n = MC_BATCH.min(samples - b * MC_BATCH);
            let mut x = vec![0u32; p.k];
            let mut pos = WalkPosition::origin(p);
            let mut hits = 0u64;
            for _ in 0..n {
                pos.v_sum.iter_mut().for_each(|c| *c = 0);
                pos.steps = 0;
                for _ in 0..p.t {
                    for e in x.iter_mut() {
                        *e = rng.random_range(0..p.g);
                    }
                    pos.step_column(p, &x);
                }
                if pos.is_origin() {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p_hat = hits as f64 / samples as f64;
    Ok(McEstimate {
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
        hits,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn col(v: &[u32]) -> Column {
        Column(v.to_vec())
    }

    #[test]
    fn z_map_worked_example() {
        let p = make_params(3, 4, 1).unwrap();
        let v = z_map(&p, &col(&[2, 1, 0, 2])).v;
        assert_eq!(v, vec![2, -1, -1, 2, -1, -1, 2, -1, -1, 2, 2, -1]);
    }

    #[test]
    fn z_map_zero_column() {
        for (g, k) in [(2, 3), (3, 4), (5, 3)] {
            let p = make_params(g, k, 1).unwrap();
            let v = z_map(&p, &Column(vec![0; k])).v;
            assert!(v.iter().all(|&c| c == -1));
        }
    }

    #[test]
    fn z_map_hand_evaluated() {
        // diffs: x1-x2 = 1, x1-x3 = 1, x2-x3 = 0
        let p = make_params(2, 3, 1).unwrap();
        assert_eq!(z_map(&p, &col(&[1, 0, 0])).v, vec![1, 1, -1]);
    }

    #[test]
    fn enumeration_sizes_and_order() {
        let p = make_params(2, 3, 1).unwrap();
        let b = Budget::default();
        let cols: Vec<_> = enumerate_columns(&p, true, &b).unwrap().collect();
        assert_eq!(cols, vec![col(&[0, 0, 0]), col(&[0, 0, 1]), col(&[0, 1, 0]), col(&[0, 1, 1])]);
        let p3 = make_params(3, 3, 1).unwrap();
        assert_eq!(enumerate_columns(&p3, false, &b).unwrap().count(), 27);
        for c in enumerate_columns(&p, false, &b).unwrap() {
            for s in z_map(&p, &c).pair_sums(&p) {
                assert!(s == 1 || s == -1);
            }
        }
    }

    #[test]
    fn enumeration_budget() {
        let p = make_params(4, 8, 1).unwrap();
        let b = Budget { max_columns: 1000, ..Budget::default() };
        assert!(matches!(enumerate_columns(&p, false, &b), Err(Error::Budget { .. })));
    }

    #[test]
    fn increment_invariants_exhaustive() {
        let b = Budget::default();
        for g in 2..=4u32 {
            for k in 2..=4usize {
                let p = make_params(g, k, 1).unwrap();
                let mut total = vec![0i64; p.d];
                for x in enumerate_columns(&p, false, &b).unwrap() {
                    let v = z_map(&p, &x);
                    assert!(v.v.iter().all(|&c| c == g as i64 - 1 || c == -1));
                    for s in v.pair_sums(&p) {
                        assert!(s == 1 || s == -(g as i64 - 1));
                    }
                    for c in 0..g {
                        assert_eq!(z_map(&p, &x.translate(g, c)), v);
                    }
                    for (t, c) in total.iter_mut().zip(&v.v) {
                        *t += c;
                    }
                }
                assert!(total.iter().all(|&c| c == 0));
            }
        }
    }

    #[test]
    fn walk_position_bounds() {
        let p = make_params(3, 3, 2).unwrap();
        let mut rng = substream(1, 0);
        let mut pos = WalkPosition::origin(&p);
        for _ in 0..p.t {
            let x: Vec<u32> = (0..p.k).map(|_| rng.random_range(0..p.g)).collect();
            pos.step(&z_map(&p, &Column(x)));
        }
        let t = p.t as i64;
        assert!(pos.v_sum.iter().all(|&c| -t <= c && c <= t * (p.g as i64 - 1)));
    }

    #[test]
    fn mc_drake_case_never_returns() {
        let p = make_params(2, 3, 1).unwrap();
        let est = mc_return_probability(&p, 50_000, 3).unwrap();
        assert_eq!(est.hits, 0);
        assert_eq!(est.p_hat, 0.0);
    }

    #[test]
    fn mc_single_sample_is_bernoulli() {
        let p = make_params(2, 2, 1).unwrap();
        for seed in 0..20 {
            let est = mc_return_probability(&p, 1, seed).unwrap();
            assert!(est.p_hat == 0.0 || est.p_hat == 1.0);
        }
    }

    #[test]
    fn mc_is_deterministic() {
        let p = make_params(2, 3, 2).unwrap();
        let a = mc_return_probability(&p, 40_000, 11).unwrap();
        let b = mc_return_probability(&p, 40_000, 11).unwrap();
        assert_eq!(a, b);
        assert!(mc_return_probability(&p, 0, 1).is_err());
    }
}
