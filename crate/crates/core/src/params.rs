//! Parameter validation and the coordinate scheme shared by every module.
//!
//! The ambient space has one coordinate per `({i,j}, a)` with `1 <= i < j <= k`
//! and `a` a nonzero residue mod `g`. Coordinates are ordered lexicographically
//! in `((i, j), a)`; the flat index is 0-based.

use serde::Serialize;

use crate::error::{Error, Result};

/// An unordered pair of rows `{i, j}` stored with `i < j`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub fn new(i: usize, j: usize) -> Self {
        if i < j {
            Pair { i, j }
        } else {
            Pair { i: j, j: i }
        }
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{},{}}}", self.i, self.j)
    }
}

/// A coordinate `({i,j}, a)` together with its flat position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoordIndex {
    pub pair: Pair,
    pub a: u32,
    pub flat: usize,
}

/// Advisory conditions that do not make the parameters invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Advisories {
    /// `k > λg`: no difference matrix can exist (Jungnickel).
    pub jungnickel: bool,
    /// `g` even, `λ` odd and `k >= 3`: no difference matrix can exist (Drake).
    pub drake: bool,
    /// `k < 3`: outside the hypotheses of the asymptotic formula.
    pub below_k3: bool,
}

/// Validated parameters `(g, k, λ)` with derived `t = λg` and `d = C(k,2)(g-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Params {
    pub g: u32,
    pub k: usize,
    pub lambda: u64,
    pub t: u64,
    pub d: usize,
}

impl Params {
    pub fn new(g: u32, k: usize, lambda: u64) -> Result<Self> {
        if g < 2 {
            return Err(Error::domain(format!("group order g must be >= 2, got {g}")));
        }
        if k < 2 {
            return Err(Error::domain(format!("row count k must be >= 2, got {k}")));
        }
        if lambda < 1 {
            return Err(Error::domain("index lambda must be >= 1"));
        }
        let t = lambda
            .checked_mul(g as u64)
            .ok_or_else(|| Error::domain("t = lambda * g overflows"))?;
        let d = num_pairs(k)
            .checked_mul(g as usize - 1)
            .ok_or_else(|| Error::domain("dimension overflows"))?;
        Ok(Params { g, k, lambda, t, d })
    }

    /// Parameters for the geometric objects that do not depend on `λ`.
    pub fn geometry(g: u32, k: usize) -> Result<Self> {
        Self::new(g, k, 1)
    }

    /// Same `(g, k)` with a different column count, `t` a multiple of `g`.
    pub fn with_t(&self, t: u64) -> Result<Self> {
        if t == 0 || t % self.g as u64 != 0 {
            return Err(Error::domain(format!("t = {t} must be a positive multiple of g = {}", self.g)));
        }
        Self::new(self.g, self.k, t / self.g as u64)
    }

    pub fn pairs(&self) -> usize {
        num_pairs(self.k)
    }

    /// Number of pairs `{i,j}` with `j < k`; `|Λ₀| = g^this`.
    pub fn lattice_rank(&self) -> usize {
        num_pairs(self.k - 1)
    }

    pub fn block_len(&self) -> usize {
        self.g as usize - 1
    }

    pub fn advisories(&self) -> Advisories {
        Advisories {
            jungnickel: self.k as u64 > self.t,
            drake: self.parity_obstructed(),
            below_k3: self.k < 3,
        }
    }

    /// `g` even, `λ` odd and `k >= 3`.
    pub fn parity_obstructed(&self) -> bool {
        self.g % 2 == 0 && self.lambda % 2 == 1 && self.k >= 3
    }

    /// Index of pair `{i,j}` in lexicographic pair order (0-based).
    pub fn pair_index(&self, pair: Pair) -> Result<usize> {
        let Pair { i, j } = pair;
        if i < 1 || i >= j || j > self.k {
            return Err(Error::domain(format!("pair {pair} out of range for k = {}", self.k)));
        }
        // pairs with first element < i, then offset within row i
        let before: usize = (1..i).map(|r| self.k - r).sum();
        Ok(before + (j - i - 1))
    }

    pub fn pair_at(&self, index: usize) -> Pair {
        let mut rem = index;
        for i in 1..self.k {
            let row = self.k - i;
            if rem < row {
                return Pair::new(i, i + 1 + rem);
            }
            rem -= row;
        }
        panic!("pair index {index} out of range for k = {}", self.k)
    }

    /// All pairs in lexicographic order.
    pub fn pair_list(&self) -> Vec<Pair> {
        (1..self.k)
            .flat_map(|i| (i + 1..=self.k).map(move |j| Pair::new(i, j)))
            .collect()
    }

    pub fn flat_index(&self, pair: Pair, a: u32) -> Result<usize> {
        if a == 0 || a >= self.g {
            return Err(Error::domain(format!("residue a = {a} must lie in 1..{}", self.g - 1)));
        }
        Ok(self.pair_index(pair)? * self.block_len() + (a as usize - 1))
    }

    pub fn coord_of(&self, flat: usize) -> Result<CoordIndex> {
        if flat >= self.d {
            return Err(Error::domain(format!("flat index {flat} out of range 0..{}", self.d)));
        }
        let b = self.block_len();
        Ok(CoordIndex {
            pair: self.pair_at(flat / b),
            a: (flat % b) as u32 + 1,
            flat,
        })
    }

    /// Flat offset of the first coordinate of a pair's block.
    #[inline]
    pub(crate) fn block_start(&self, pair_index: usize) -> usize {
        pair_index * self.block_len()
    }
}

pub fn make_params(g: u32, k: usize, lambda: u64) -> Result<Params> {
    Params::new(g, k, lambda)
}

pub(crate) fn num_pairs(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}
