use serde::Serialize;

use crate::error::{Error, Result};

/// Work limits for the enumeration-heavy routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budget {
    /// Largest `g^k` column enumeration (characteristic function, membership scans).
    pub max_columns: u64,
    /// Largest multiplicity-vector space (or search-tree size) for the brute counter.
    pub max_compositions: u128,
    /// Largest `grid points × columns` product for the DFT counter.
    pub max_dft_work: u128,
    /// Largest number of quadrature nodes.
    pub max_grid_points: u64,
    /// Largest `|Λ₀|` to enumerate.
    pub max_lattice: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_columns: 1 << 24,
            max_compositions: 10u128.pow(13),
            max_dft_work: 8 * 10u128.pow(9),
            max_grid_points: 200_000_000,
            max_lattice: 1 << 24,
        }
    }
}

impl Budget {
    pub(crate) fn check(what: &'static str, needed: u128, limit: u128) -> Result<()> {
        if needed > limit {
            Err(Error::Budget { what, needed, limit })
        } else {
            Ok(())
        }
    }
}

/// `base^exp`, saturating at `u128::MAX`.
pub(crate) fn sat_pow(base: u128, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

/// `C(n, r)`, saturating at `u128::MAX`.
pub(crate) fn sat_binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n.saturating_sub(r));
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}
