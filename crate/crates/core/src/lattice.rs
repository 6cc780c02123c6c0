//! The set `Λ` of frequencies where `|Φ| = 1`.
//!
//! Inside `[-π, π)^d`, `Λ₀` is the group generated by the building blocks
//! `α^{ij}`, `1 <= i < j < k`, each coefficient taken mod `g`, so
//! `|Λ₀| = g^{C(k-1,2)}`. Every element sits on the grid `(2π/g)Z^d`, which lets
//! the grid points be handled as exact residue vectors `n ∈ Z_g^d` with
//! `θ = 2πn/g`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::budget::{sat_pow, Budget};
use crate::charfn::{dist_2pi, reduce_angle, Theta};
use crate::error::{Error, Result};
use crate::params::{Pair, Params};
use crate::walk::ColumnTable;

/// Default tolerance for distances modulo `2π`.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Coefficients `c_{ij}` for the pairs `1 <= i < j < k`, in lexicographic pair order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LatticeCoeffs {
    pub g: u32,
    pub k: usize,
    pub c: Vec<u32>,
}

impl LatticeCoeffs {
    pub fn zero(p: &Params) -> Self {
        LatticeCoeffs { g: p.g, k: p.k, c: vec![0; p.lattice_rank()] }
    }

    pub fn new(p: &Params, c: Vec<u32>) -> Result<Self> {
        if c.len() != p.lattice_rank() {
            return Err(Error::domain(format!("expected {} coefficients, got {}", p.lattice_rank(), c.len())));
        }
        if c.iter().any(|&v| v >= p.g) {
            return Err(Error::domain("lattice coefficients must be residues mod g"));
        }
        Ok(LatticeCoeffs { g: p.g, k: p.k, c })
    }

    /// Pairs `{i,j}` with `j < k` in the order of `c`.
    pub fn pairs(k: usize) -> Vec<Pair> {
        (1..k.saturating_sub(1))
            .flat_map(|i| (i + 1..k).map(move |j| Pair::new(i, j)))
            .collect()
    }

    /// Decode the `n`-th coefficient vector (first coefficient most significant).
    pub fn from_rank(p: &Params, mut n: u64) -> Self {
        let g = p.g as u64;
        let mut c = vec![0u32; p.lattice_rank()];
        for slot in c.iter_mut().rev() {
            *slot = (n % g) as u32;
            n /= g;
        }
        LatticeCoeffs { g: p.g, k: p.k, c }
    }
}

/// Which piece of the torus decomposition a point belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RegionTag {
    /// Within `δ` of the element of `Λ₀` with these coefficients.
    PrimaryBox(LatticeCoeffs),
    /// Within `δ` of a grid point `(2π/g)Z^d` that is not in `Λ₀`.
    RA,
    /// Everything else.
    RB,
}

/// Grid residues of `α^{ij}`.
fn building_block_residues(p: &Params, i: usize, j: usize) -> Result<Vec<u32>> {
    if !(1 <= i && i < j && j < p.k) {
        return Err(Error::domain(format!(
            "building block needs 1 <= i < j < k, got {{{i},{j}}} with k = {}",
            p.k
        )));
    }
    let g = p.g;
    let mut n = vec![0u32; p.d];
    for a in 1..g {
        n[p.flat_index(Pair::new(i, j), a)?] = a;
        n[p.flat_index(Pair::new(i, p.k), a)?] = g - a;
        n[p.flat_index(Pair::new(j, p.k), a)?] = a;
    }
    Ok(n)
}

/// `α^{ij}` with coordinates in `[0, 2π)`.
pub fn building_block(p: &Params, i: usize, j: usize) -> Result<Theta> {
    let n = building_block_residues(p, i, j)?;
    let g = p.g as f64;
    Ok(Theta(n.iter().map(|&v| 2.0 * PI * v as f64 / g).collect()))
}

/// Grid point `2πn/g` with each coordinate reduced into `[-π, π)`.
pub fn grid_point(g: u32, n: &[u32]) -> Theta {
    Theta(
        n.iter()
            .map(|&v| {
                let v = v % g;
                // 2v >= g  <=>  2πv/g >= π
                let s = if 2 * v >= g { v as i64 - g as i64 } else { v as i64 };
                2.0 * PI * s as f64 / g as f64
            })
            .collect(),
    )
}

fn lattice_residues(p: &Params, c: &LatticeCoeffs) -> Result<Vec<u32>> {
    let g = p.g;
    let mut n = vec![0u32; p.d];
    for (pair, &coef) in LatticeCoeffs::pairs(p.k).iter().zip(&c.c) {
        if coef == 0 {
            continue;
        }
        let blk = building_block_residues(p, pair.i, pair.j)?;
        for (acc, b) in n.iter_mut().zip(blk) {
            *acc = (*acc + coef * b) % g;
        }
    }
    Ok(n)
}

/// `Σ c_{ij} α^{ij}` reduced into `[-π, π)^d`.
pub fn expand_lattice(p: &Params, c: &LatticeCoeffs) -> Result<Theta> {
    if c.g != p.g || c.k != p.k || c.c.len() != p.lattice_rank() {
        return Err(Error::domain("coefficients do not match parameters"));
    }
    Ok(grid_point(p.g, &lattice_residues(p, c)?))
}

/// Recover the coefficients of a point of `Λ₀`.
pub fn decompose_lattice(p: &Params, theta: &Theta, budget: &Budget) -> Result<LatticeCoeffs> {
    if !lambda_membership(p, theta, DEFAULT_TOL, budget)? {
        return Err(Error::domain("theta is not in the lattice"));
    }
    let g = p.g as f64;
    let c = LatticeCoeffs::pairs(p.k)
        .iter()
        .map(|&pair| {
            let x = reduce_angle(theta.0[p.flat_index(pair, 1).expect("valid pair")]);
            let v = (g * x / (2.0 * PI)).round() as i64;
            v.rem_euclid(p.g as i64) as u32
        })
        .collect();
    LatticeCoeffs::new(p, c)
}

/// All of `Λ₀`, in coefficient-rank order.
pub fn enumerate_lambda0(p: &Params, budget: &Budget) -> Result<Vec<Theta>> {
    let n = sat_pow(p.g as u128, p.lattice_rank() as u64);
    Budget::check("lattice enumeration", n, budget.max_lattice as u128)?;
    (0..n as u64)
        .map(|r| expand_lattice(p, &LatticeCoeffs::from_rank(p, r)))
        .collect()
}

/// `θ ∈ Λ` up to `tol`: every `θ·Z(x)` agrees with `θ·Z(0)` modulo `2π`.
pub fn lambda_membership(p: &Params, theta: &Theta, tol: f64, budget: &Budget) -> Result<bool> {
    if tol < 0.0 {
        return Err(Error::domain("tolerance must be >= 0"));
    }
    if theta.dim() != p.d {
        return Err(Error::domain("theta has the wrong dimension"));
    }
    let table = ColumnTable::normalized(p, budget)?;
    Ok(membership_with(&table, theta, tol))
}

// θ·Z(x) - θ·Z(0) = Σ_{hot} θ_c, and translates of x share the same phase.
pub(crate) fn membership_with(table: &ColumnTable, theta: &Theta, tol: f64) -> bool {
    table
        .hot
        .iter()
        .all(|h| dist_2pi(h.iter().map(|&c| theta.0[c]).sum::<f64>()) <= tol)
}

/// Exact membership for a grid point `θ = 2πn/g`.
///
/// `θ·(Z(x) - Z(0)) = (2π/g) Σ_p n_{p, diff_p(x)}`, so the test is
/// `Σ_p n_{p, diff_p(x)} ≡ 0 (mod g)` for every normalized column.
pub fn grid_membership(p: &Params, table: &ColumnTable, n: &[u32]) -> bool {
    table
        .hot
        .iter()
        .all(|h| h.iter().map(|&c| n[c] as u64).sum::<u64>() % p.g as u64 == 0)
}

/// Classify `θ` into a primary box, `R^A` or `R^B` for half-width `δ < π/g`.
pub fn classify_region(p: &Params, theta: &Theta, delta: f64, budget: &Budget) -> Result<RegionTag> {
    let table = ColumnTable::normalized(p, budget)?;
    classify_with(p, &table, theta, delta)
}

pub(crate) fn classify_with(p: &Params, table: &ColumnTable, theta: &Theta, delta: f64) -> Result<RegionTag> {
    if !(delta > 0.0 && delta < PI / p.g as f64) {
        return Err(Error::domain(format!("delta = {delta} must lie in (0, π/g)")));
    }
    if theta.dim() != p.d {
        return Err(Error::domain("theta has the wrong dimension"));
    }
    let Some(n) = nearest_grid(p.g, theta, delta) else {
        return Ok(RegionTag::RB);
    };
    if grid_membership(p, table, &n) {
        Ok(RegionTag::PrimaryBox(coeffs_of_grid(p, &n)))
    } else {
        Ok(RegionTag::RA)
    }
}

/// Residues of the grid point within `δ` of `θ` in every coordinate, if any.
pub fn nearest_grid(g: u32, theta: &Theta, delta: f64) -> Option<Vec<u32>> {
    let step = 2.0 * PI / g as f64;
    theta
        .0
        .iter()
        .map(|&x| {
            let m = (x / step).round();
            if (x - m * step).abs() < delta {
                Some((m as i64).rem_euclid(g as i64) as u32)
            } else {
                None
            }
        })
        .collect()
}

fn coeffs_of_grid(p: &Params, n: &[u32]) -> LatticeCoeffs {
    let c = LatticeCoeffs::pairs(p.k)
        .iter()
        .map(|&pair| n[p.flat_index(pair, 1).expect("valid pair")])
        .collect();
    LatticeCoeffs { g: p.g, k: p.k, c }
}

/// Numerical residue of the homomorphism and row relations that hold exactly on `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureDefects {
    /// `max dist(θ_{p,a} + θ_{p,b} - θ_{p,a+b}, 2πZ)` with `θ_{p,0} = 0`.
    pub hom_defect: f64,
    /// `max dist(Σ_{m<i} θ_{{m,i},-a} + Σ_{m>i} θ_{{i,m},a}, 2πZ)`.
    pub row_defect: f64,
}

pub fn structure_defects(p: &Params, theta: &Theta) -> Result<StructureDefects> {
    if theta.dim() != p.d {
        return Err(Error::domain("theta has the wrong dimension"));
    }
    let g = p.g;
    let coord = |pair: Pair, a: u32| -> f64 {
        let a = a % g;
        if a == 0 {
            0.0
        } else {
            theta.0[p.flat_index(pair, a).expect("valid coordinate")]
        }
    };
    let mut hom: f64 = 0.0;
    for pair in p.pair_list() {
        for a in 1..g {
            for b in 1..g {
                hom = hom.max(dist_2pi(coord(pair, a) + coord(pair, b) - coord(pair, a + b)));
            }
        }
    }
    let mut row: f64 = 0.0;
    for i in 1..=p.k {
        for a in 1..g {
            let lower: f64 = (1..i).map(|m| coord(Pair::new(m, i), g - a)).sum();
            let upper: f64 = (i + 1..=p.k).map(|m| coord(Pair::new(i, m), a)).sum();
            row = row.max(dist_2pi(lower + upper));
        }
    }
    Ok(StructureDefects { hom_defect: hom, row_defect: row })
}

/// Checks `Z(x)·α^{ij} ≡ -3π(g-1)/g (mod 2π)` for every column; returns the worst distance.
pub fn building_block_phase_defect(p: &Params, i: usize, j: usize, budget: &Budget) -> Result<f64> {
    let alpha = building_block(p, i, j)?;
    let table = ColumnTable::normalized(p, budget)?;
    let g = p.g as f64;
    let target = -3.0 * PI * (g - 1.0) / g;
    let sum: f64 = alpha.0.iter().sum();
    Ok(table
        .hot
        .iter()
        .map(|h| dist_2pi(alpha.dot_v(h, sum, p.g) / g - target))
        .fold(0.0, f64::max))
}
