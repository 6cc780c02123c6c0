//! The characteristic function of one walk step and the moment matrix.
//!
//! `Φ(θ) = g^{-k} Σ_x exp(i θ·Z(x))`. The covariance of `Z(x)` is the block
//! diagonal matrix `M` with `C(k,2)` copies of the `(g-1)×(g-1)` block
//! `S = g⁻¹ I - g⁻² 11ᵀ`. `S` has the closed-form symmetric square root
//! `Q = a I + b 11ᵀ`, `a = g^{-1/2}`, `b = (g⁻¹ - g^{-1/2})/(g-1)`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Ratio};
use num_traits::Zero;
use serde::Serialize;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::sum::{pairwise_sum, par_pairwise_sum};
use crate::walk::{enumerate_columns, z_map, ColumnTable};

/// A point of `R^d`, usually read modulo `2π`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn zeros(d: usize) -> Self {
        Theta(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Representative of each coordinate in `[-π, π)`.
    pub fn reduced(&self) -> Theta {
        Theta(self.0.iter().map(|&x| reduce_angle(x)).collect())
    }

    pub fn neg(&self) -> Theta {
        Theta(self.0.iter().map(|x| -x).collect())
    }

    pub fn add(&self, other: &Theta) -> Theta {
        Theta(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `θ · V(x)` for a normalized column given by its hot coordinates, with `sum = Σθ`.
    #[inline]
    pub(crate) fn dot_v(&self, hot: &[usize], sum: f64, g: u32) -> f64 {
        g as f64 * hot.iter().map(|&c| self.0[c]).sum::<f64>() - sum
    }
}

/// `x` reduced into `[-π, π)`.
pub fn reduce_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = x - two_pi * ((x + PI) / two_pi).floor();
    if r >= PI {
        r -= two_pi;
    }
    if r < -PI {
        r += two_pi;
    }
    r
}

/// Distance from `x` to the nearest multiple of `2π`.
pub fn dist_2pi(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    (x - two_pi * (x / two_pi).round()).abs()
}

fn check_dim(p: &Params, theta: &Theta) -> Result<()> {
    if theta.dim() != p.d {
        return Err(Error::domain(format!("theta has {} coordinates, expected d = {}", theta.dim(), p.d)));
    }
    if theta.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("theta has non-finite coordinates"));
    }
    Ok(())
}

/// Reusable evaluator for `Φ` at fixed `(g, k)`.
#[derive(Debug, Clone)]
pub struct CharFn {
    params: Params,
    table: ColumnTable,
}

impl CharFn {
    pub fn new(p: &Params, budget: &Budget) -> Result<Self> {
        Ok(CharFn { params: *p, table: ColumnTable::normalized(p, budget)? })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn table(&self) -> &ColumnTable {
        &self.table
    }

    /// `Φ(θ)`; the sum over columns is reduced pairwise over the normalized columns
    /// (translation invariance makes every normalized term stand for `g` columns).
    pub fn eval(&self, theta: &Theta) -> Complex64 {
        let g = self.params.g;
        let sum: f64 = theta.0.iter().sum();
        let f = |n: usize| {
            let phase = theta.dot_v(&self.table.hot[n], sum, g) / g as f64;
            Complex64::new(phase.cos(), phase.sin())
        };
        let n = self.table.len();
        let total: Complex64 = if n > 4096 { par_pairwise_sum(0, n, &f) } else { pairwise_sum(0, n, &f) };
        total / n as f64
    }

    /// Every phase `θ·Z(x)` over normalized columns.
    pub fn phases(&self, theta: &Theta) -> Vec<f64> {
        let g = self.params.g;
        let sum: f64 = theta.0.iter().sum();
        self.table.hot.iter().map(|h| theta.dot_v(h, sum, g) / g as f64).collect()
    }

    /// `E[(θ·Z)^2]` by exhaustive enumeration.
    pub fn second_moment(&self, theta: &Theta) -> f64 {
        let ph = self.phases(theta);
        let n = ph.len();
        pairwise_sum(0, n, &|i| ph[i] * ph[i]) / n as f64
    }
}

pub fn phi(p: &Params, theta: &Theta, budget: &Budget) -> Result<Complex64> {
    check_dim(p, theta)?;
    Ok(CharFn::new(p, budget)?.eval(theta))
}

/// `θᵀ M θ` evaluated block by block.
pub fn quad_form(p: &Params, theta: &Theta) -> f64 {
    let g = p.g as f64;
    theta
        .0
        .chunks(p.block_len())
        .map(|b| {
            let s: f64 = b.iter().sum();
            let sq: f64 = b.iter().map(|x| x * x).sum();
            sq / g - s * s / (g * g)
        })
        .sum()
}

/// One `(g-1)×(g-1)` block `S` of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBlock {
    pub g: u32,
    pub diagonal: f64,
    pub off_diagonal: f64,
}

impl MomentBlock {
    pub fn new(g: u32) -> Self {
        let gf = g as f64;
        MomentBlock { g, diagonal: (gf - 1.0) / (gf * gf), off_diagonal: -1.0 / (gf * gf) }
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.g as usize - 1;
        (0..n)
            .map(|r| (0..n).map(|c| if r == c { self.diagonal } else { self.off_diagonal }).collect())
            .collect()
    }

    /// Eigenvalues: `1/g²` on the all-ones vector, `1/g` with multiplicity `g-2`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let g = self.g as f64;
        let mut ev = vec![1.0 / (g * g)];
        ev.extend(std::iter::repeat_n(1.0 / g, self.g as usize - 2));
        ev
    }
}

/// Full `d×d` matrix `M`.
pub fn moment_matrix(p: &Params) -> Vec<Vec<f64>> {
    let blk = MomentBlock::new(p.g);
    let b = p.block_len();
    (0..p.d)
        .map(|r| {
            (0..p.d)
                .map(|c| match (r / b == c / b, r == c) {
                    (false, _) => 0.0,
                    (true, true) => blk.diagonal,
                    (true, false) => blk.off_diagonal,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetM {
    /// `-g·C(k,2)·ln g`.
    pub log_closed: f64,
    /// `ln det M` from Gaussian elimination on one dense block.
    pub log_numeric: f64,
    /// `ln det M` from the block eigenvalue product.
    pub log_eigen: f64,
}

impl DetM {
    pub fn value(&self) -> f64 {
        self.log_closed.exp()
    }

    pub fn relative_gap(&self) -> f64 {
        let a = (self.log_numeric - self.log_closed).abs();
        let b = (self.log_eigen - self.log_closed).abs();
        // |e^x - e^y| / e^y ≈ |x - y|
        a.max(b).exp_m1()
    }
}

pub fn det_m(p: &Params) -> DetM {
    let g = p.g as f64;
    let pairs = p.pairs() as f64;
    let blk = MomentBlock::new(p.g);
    let log_eigen = pairs * blk.eigenvalues().iter().map(|e| e.ln()).sum::<f64>();
    let log_numeric = pairs * log_det_dense(blk.dense());
    DetM { log_closed: -g * pairs * g.ln(), log_numeric, log_eigen }
}

// ln|det A| by Gaussian elimination with partial pivoting.
fn log_det_dense(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        acc += d.abs().ln();
        for r in c + 1..n {
            let f = a[r][c] / d;
            for cc in c..n {
                a[r][cc] -= f * a[c][cc];
            }
        }
    }
    acc
}

/// Result of [`exact_moments`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    /// `E[θ·Z]` in exact rational arithmetic.
    pub m1: BigRational,
    /// `|E[(θ·Z)^2] - θᵀMθ|`.
    pub m2_match: f64,
}

/// First moment exactly and the second-moment identity numerically, over all `g^k` columns.
pub fn exact_moments(p: &Params, theta: &[Ratio<i64>], budget: &Budget) -> Result<ExactMoments> {
    if theta.len() != p.d {
        return Err(Error::domain(format!("theta has {} coordinates, expected d = {}", theta.len(), p.d)));
    }
    let big: Vec<BigRational> = theta
        .iter()
        .map(|r| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())))
        .collect();
    let mut total = BigRational::zero();
    let mut count: u64 = 0;
    for x in enumerate_columns(p, false, budget)? {
        let v = z_map(p, &x).v;
        for (c, th) in v.iter().zip(&big) {
            if *c != 0 {
                total += th * BigInt::from(*c);
            }
        }
        count += 1;
    }
    // E[θ·Z] = Σ_x θ·V(x) / (g · g^k)
    let m1 = total / BigRational::from_integer(BigInt::from(count) * BigInt::from(p.g));
    let ft = Theta(theta.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect());
    let cf = CharFn::new(p, budget)?;
    let m2_match = (cf.second_moment(&ft) - quad_form(p, &ft)).abs();
    Ok(ExactMoments { m1, m2_match })
}

/// The closed-form square root `Q = a I + b 11ᵀ` of one block of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtBlock {
    pub g: u32,
    pub a: f64,
    pub b: f64,
}

impl SqrtBlock {
    pub fn new(g: u32) -> Self {
        let gf = g as f64;
        let a = gf.powf(-0.5);
        SqrtBlock { g, a, b: (1.0 / gf - a) / (gf - 1.0) }
    }

    fn dim(&self) -> usize {
        self.g as usize - 1
    }

    /// Coefficients `(a', b')` of `Q⁻¹ = a' I + b' 11ᵀ`.
    pub fn inverse_coeffs(&self) -> (f64, f64) {
        let g = self.g as f64;
        (g.sqrt(), (g - g.sqrt()) / (g - 1.0))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let s: f64 = x.iter().sum();
        x.iter().map(|v| self.a * v + self.b * s).collect()
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        let (ai, bi) = self.inverse_coeffs();
        let s: f64 = y.iter().sum();
        y.iter().map(|v| ai * v + bi * s).collect()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.b + if r == c { self.a } else { 0.0 }).collect())
            .collect()
    }

    /// Max absolute row sum of `Q`.
    pub fn norm_inf(&self) -> f64 {
        (self.a + self.b).abs() + (self.dim() as f64 - 1.0) * self.b.abs()
    }

    /// Max absolute row sum of `Q⁻¹`.
    pub fn inverse_norm_inf(&self) -> f64 {
        let (ai, bi) = self.inverse_coeffs();
        (ai + bi).abs() + (self.dim() as f64 - 1.0) * bi.abs()
    }

    /// `max |(Q·Q - S)_{rc}|`.
    pub fn square_defect(&self) -> f64 {
        let q = self.dense();
        let s = MomentBlock::new(self.g).dense();
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let v: f64 = (0..n).map(|m| q[r][m] * q[m][c]).sum();
                worst = worst.max((v - s[r][c]).abs());
            }
        }
        worst
    }
}

/// `P θ` with `P = diag(Q, …, Q)`.
pub fn apply_sqrt(p: &Params, theta: &Theta) -> Theta {
    let q = SqrtBlock::new(p.g);
    Theta(theta.0.chunks(p.block_len()).flat_map(|b| q.apply(b)).collect())
}

/// `P⁻¹ θ`.
pub fn apply_sqrt_inverse(p: &Params, theta: &Theta) -> Theta {
    let q = SqrtBlock::new(p.g);
    Theta(theta.0.chunks(p.block_len()).flat_map(|b| q.apply_inverse(b)).collect())
}

/// `M θ`.
pub fn apply_moment(p: &Params, theta: &Theta) -> Theta {
    let g = p.g as f64;
    Theta(
        theta
            .0
            .chunks(p.block_len())
            .flat_map(|b| {
                let s: f64 = b.iter().sum();
                b.iter().map(move |x| x / g - s / (g * g)).collect::<Vec<_>>()
            })
            .collect(),
    )
}
