//! Exact counts of `(g, k; λ)`-difference matrices over `Z_g`.
//!
//! Two independent routes:
//!
//! * [`count_brute`] sums multinomials over balanced multiplicity vectors of
//!   normalized columns (first entry 0), with subtree pruning whenever a pair
//!   already realizes some difference more than `λ` times.
//! * [`count_dft`] evaluates the discrete Fourier inversion of the `t`-fold
//!   convolution of the column distribution on a finite torus `Z_N^d` and
//!   rounds.
//!
//! Both count normalized matrices and multiply by `g^t`, the size of each
//! translation fiber.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::budget::{sat_binomial, sat_pow, Budget};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::sum::par_pairwise_sum;
use crate::walk::ColumnTable;

/// Arbitrary-precision count; serializes as a decimal string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigCount(pub BigUint);

impl BigCount {
    pub fn zero() -> Self {
        BigCount(BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `log10` of the count, `-inf` for zero.
    pub fn log10(&self) -> f64 {
        big_log10(&self.0)
    }
}

impl From<u64> for BigCount {
    fn from(v: u64) -> Self {
        BigCount(BigUint::from(v))
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for BigCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

pub(crate) fn big_log10(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap().log10();
    }
    let shift = bits - 64;
    (v >> shift).to_f64().unwrap().log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Which exact method produced a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    Brute,
    Dft,
}

impl fmt::Display for CountMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountMethod::Brute => "brute",
            CountMethod::Dft => "dft",
        })
    }
}

/// `true` iff `g` is even, `λ` odd and `k >= 3`; then no difference matrix exists.
pub fn parity_obstruction(p: &Params) -> bool {
    p.parity_obstructed()
}

fn factorials(n: u64) -> Vec<BigUint> {
    let mut f = Vec::with_capacity(n as usize + 1);
    f.push(BigUint::one());
    for i in 1..=n {
        let next = &f[i as usize - 1] * BigUint::from(i);
        f.push(next);
    }
    f
}

/// Size of the multiplicity-vector space `C(t + n - 1, n - 1)`, `n = g^(k-1)`.
pub fn composition_space(p: &Params) -> u128 {
    let n = sat_pow(p.g as u128, p.k as u64 - 1);
    if n == u128::MAX {
        return u128::MAX;
    }
    sat_binomial(p.t as u128 + n - 1, n - 1)
}

struct BruteSearch<'a> {
    p: Params,
    diffs: &'a [Vec<u32>],
    fact: Vec<BigUint>,
    nodes: &'a AtomicU64,
    node_limit: u64,
}

#[derive(Clone)]
struct BruteState {
    /// `counts[pair * g + a]`: columns so far with difference `a` on `pair`.
    counts: Vec<u64>,
    remaining: u64,
    mult: Vec<u64>,
}

impl BruteSearch<'_> {
    fn capacity(&self, st: &BruteState, col: usize) -> u64 {
        let g = self.p.g as usize;
        self.diffs[col]
            .iter()
            .enumerate()
            .map(|(pair, &a)| self.p.lambda - st.counts[pair * g + a as usize])
            .min()
            .unwrap_or(u64::MAX)
            .min(st.remaining)
    }

    fn apply(&self, st: &mut BruteState, col: usize, m: u64, sign: i64) {
        let g = self.p.g as usize;
        for (pair, &a) in self.diffs[col].iter().enumerate() {
            let c = &mut st.counts[pair * g + a as usize];
            *c = (*c as i64 + sign * m as i64) as u64;
        }
        st.remaining = (st.remaining as i64 - sign * m as i64) as u64;
    }

    fn leaf_weight(&self, st: &BruteState) -> BigUint {
        let mut w = self.fact[self.p.t as usize].clone();
        for &m in st.mult.iter().filter(|&&m| m > 1) {
            w /= &self.fact[m as usize];
        }
        w
    }

    fn tick(&self) -> Result<()> {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.node_limit {
            return Err(Error::Budget { what: "brute-force search nodes", needed: n as u128, limit: self.node_limit as u128 });
        }
        Ok(())
    }

    fn descend(&self, st: &mut BruteState, col: usize) -> Result<BigUint> {
        self.tick()?;
        if st.remaining == 0 {
            // every count <= λ and each pair's counts sum to gλ, so all equal λ
            return Ok(self.leaf_weight(st));
        }
        if col == self.diffs.len() {
            return Ok(BigUint::zero());
        }
        let cap = self.capacity(st, col);
        let mut acc = BigUint::zero();
        for m in (0..=cap).rev() {
            self.apply(st, col, m, 1);
            st.mult.push(m);
            let r = self.descend(st, col + 1);
            st.mult.pop();
            self.apply(st, col, m, -1);
            acc += r?;
        }
        Ok(acc)
    }
}

/// Exact count by summing multinomials over balanced multiplicity vectors.
pub fn count_brute(p: &Params, budget: &Budget) -> Result<BigCount> {
    Budget::check("multiplicity vectors", composition_space(p), budget.max_compositions)?;
    if p.k as u64 > p.t {
        return Ok(BigCount::zero());
    }
    let table = ColumnTable::normalized(p, budget)?;
    let nodes = AtomicU64::new(0);
    let search = BruteSearch {
        p: *p,
        diffs: &table.diffs,
        fact: factorials(p.t),
        nodes: &nodes,
        node_limit: budget.max_compositions.min(u64::MAX as u128) as u64,
    };
    let root = BruteState {
        counts: vec![0; p.pairs() * p.g as usize],
        remaining: p.t,
        mult: Vec::with_capacity(table.len()),
    };

    // split the tree over the choices for the first two columns
    let mut frontier = vec![(root, 0usize)];
    for _ in 0..2 {
        let mut next = Vec::new();
        for (st, col) in frontier {
            if st.remaining == 0 || col == table.len() {
                next.push((st, col));
                continue;
            }
            for m in 0..=search.capacity(&st, col) {
                let mut s = st.clone();
                search.apply(&mut s, col, m, 1);
                s.mult.push(m);
                next.push((s, col + 1));
            }
        }
        frontier = next;
    }
    let parts: Vec<Result<BigUint>> = frontier
        .into_par_iter()
        .map(|(mut st, col)| search.descend(&mut st, col))
        .collect();
    let mut normalized = BigUint::zero();
    for part in parts {
        normalized += part?;
    }
    Ok(BigCount(normalized * BigUint::from(p.g).pow(p.t as u32)))
}

/// Lattice on which the DFT inversion is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DftLattice {
    /// Per-coordinate difference counts, modulus `λ + 1`, target `λ·1`.
    ///
    /// Exact because the `g` counts of a pair are nonnegative and sum to `gλ`:
    /// if the `g - 1` tracked counts are `≡ λ (mod λ+1)`, so is the untracked
    /// one, and nonnegativity then forces all of them to equal `λ`.
    #[default]
    CountResidue,
    /// The integer walk `V = g·Z`, modulus `tg + 1` (exceeds the coordinate span), target 0.
    WalkSpan,
}

impl DftLattice {
    pub fn modulus(&self, p: &Params) -> u64 {
        match self {
            DftLattice::CountResidue => p.lambda + 1,
            DftLattice::WalkSpan => p.t * p.g as u64 + 1,
        }
    }
}

/// Diagnostics from one DFT evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DftReport {
    pub count: BigCount,
    pub modulus: u64,
    pub grid_points: u64,
    /// `|S - round(S)|` for the normalized count `S`.
    pub residual: f64,
    pub lattice: DftLattice,
}

/// Roots of unity `e^{2πij/N}` with the quarter points set exactly.
fn roots_of_unity(n: u64) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            if j == 0 {
                Complex64::new(1.0, 0.0)
            } else if 2 * j == n {
                Complex64::new(-1.0, 0.0)
            } else if 4 * j == n {
                Complex64::new(0.0, 1.0)
            } else if 4 * j == 3 * n {
                Complex64::new(0.0, -1.0)
            } else {
                let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            }
        })
        .collect()
}

/// Exact count by discrete Fourier inversion, default lattice.
pub fn count_dft(p: &Params, budget: &Budget) -> Result<BigCount> {
    Ok(count_dft_with(p, DftLattice::default(), budget)?.count)
}

pub fn count_dft_with(p: &Params, lattice: DftLattice, budget: &Budget) -> Result<DftReport> {
    let table = ColumnTable::normalized(p, budget)?;
    let n = lattice.modulus(p);
    let grid = sat_pow(n as u128, p.d as u64);
    Budget::check("DFT grid work", grid.saturating_mul(table.len() as u128), budget.max_dft_work)?;
    let grid = grid as u64;
    let omega = roots_of_unity(n);
    let g = p.g as u64;
    let t = p.t as u32;
    let d = p.d;

    let term = |idx: usize| -> Complex64 {
        let mut m = vec![0u64; d];
        let mut r = idx as u64;
        for slot in m.iter_mut().rev() {
            *slot = r % n;
            r /= n;
        }
        let msum: u64 = m.iter().sum();
        let f: Complex64 = table
            .hot
            .iter()
            .map(|h| {
                let hs: u64 = h.iter().map(|&c| m[c]).sum();
                let phase = match lattice {
                    DftLattice::CountResidue => hs % n,
                    // g·Σ_hot m - Σ m  (mod N)
                    DftLattice::WalkSpan => (g * hs % n + n - msum % n) % n,
                };
                omega[phase as usize]
            })
            .sum();
        let shift = match lattice {
            DftLattice::CountResidue => (n - (p.lambda % n) * (msum % n) % n) % n,
            DftLattice::WalkSpan => 0,
        };
        f.powu(t) * omega[shift as usize]
    };
    let total: Complex64 = par_pairwise_sum(0, grid as usize, &term);
    let s = total / grid as f64;
    let rounded = s.re.round();
    let residual = (s.re - rounded).abs().max(s.im.abs());
    if !(residual < 0.25) || rounded < 0.0 {
        return Err(Error::Integrity(format!(
            "DFT sum {s} does not round reliably (residual {residual:.3e}); use the brute-force counter"
        )));
    }
    let normalized = BigUint::from(rounded as u128);
    Ok(DftReport {
        count: BigCount(normalized * BigUint::from(p.g).pow(p.t as u32)),
        modulus: n,
        grid_points: grid,
        residual,
        lattice,
    })
}

/// Count with the cheaper admissible method, brute force first.
pub fn count_auto(p: &Params, budget: &Budget) -> Result<(BigCount, CountMethod)> {
    match count_brute(p, budget) {
        Ok(c) => Ok((c, CountMethod::Brute)),
        Err(Error::Budget { .. }) => Ok((count_dft(p, budget)?, CountMethod::Dft)),
        Err(e) => Err(e),
    }
}

/// `P(X_t = 0) = count / g^{kt}` as a reduced fraction.
pub fn exact_return_probability(p: &Params, count: &BigCount) -> BigRational {
    let denom = BigUint::from(p.g).pow((p.k as u64 * p.t) as u32);
    BigRational::new(count.0.clone().into(), denom.into())
}

/// `g^t (λg)! / (λ!)^g`, the count for `k = 2`.
pub fn count_k2_closed_form(g: u32, lambda: u64) -> BigCount {
    let t = lambda * g as u64;
    let f = factorials(t);
    let mut v = &f[t as usize] * BigUint::from(g).pow(t as u32);
    for _ in 0..g {
        v /= &f[lambda as usize];
    }
    BigCount(v)
}

/// `2^{2λ} (2λ)! / ((λ/2)!)^4` for `g = 2, k = 3` (zero for odd `λ`).
pub fn count_g2_k3_closed_form(lambda: u64) -> BigCount {
    if lambda % 2 == 1 {
        return BigCount::zero();
    }
    let t = 2 * lambda;
    let f = factorials(t);
    let mut v = &f[t as usize] * BigUint::from(2u32).pow(t as u32);
    for _ in 0..4 {
        v /= &f[lambda as usize / 2];
    }
    BigCount(v)
}
