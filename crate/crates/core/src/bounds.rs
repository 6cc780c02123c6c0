//! The asymptotic main term, the rigorous two-sided return-probability bounds
//! and the scalar inequalities they are assembled from.
//!
//! Everything here is closed-form arithmetic. Quantities that overflow for
//! large `λ` (the prefactor) are carried in log space alongside their value.

use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;
use libm::erf;

use crate::charfn::SqrtBlock;
use crate::error::{Error, Result};
use crate::params::Params;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn binom2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// `log10` of `g^{kλg + (3k-4)(k-1)/4} / (2πλ)^{d/2}`.
pub fn asymptotic_count_log(p: &Params) -> f64 {
    let k = p.k as f64;
    let exponent = k * p.t as f64 + (3.0 * k - 4.0) * (k - 1.0) / 4.0;
    exponent * (p.g as f64).log10() - p.d as f64 / 2.0 * (TWO_PI * p.lambda as f64).log10()
}

/// Both sides of `(g/2)C(k,2) + C(k-1,2) - (g-1)C(k,2)/2 = (3k-4)(k-1)/4`.
///
/// The left side is the prefactor exponent of the return-probability bound
/// after absorbing `t^{-d/2}` into `λ^{-d/2}`; `g` cancels, so it is evaluated at
/// the given `g` and compared as exact rationals.
pub fn exponent_identity(g: u32, k: usize) -> (Ratio<i64>, Ratio<i64>) {
    let c2 = binom2(k) as i64;
    let ck1 = binom2(k - 1) as i64;
    let g = g as i64;
    let lhs = Ratio::new(g * c2, 2) + Ratio::from_integer(ck1) - Ratio::new((g - 1) * c2, 2);
    let k = k as i64;
    let rhs = Ratio::new((3 * k - 4) * (k - 1), 4);
    (lhs, rhs)
}

/// Box-sandwich constants: `D₁ = 1/‖Q⁻¹‖∞`, `D₂ = ‖Q‖∞` for the block square root.
pub fn box_constants(g: u32) -> (f64, f64) {
    let q = SqrtBlock::new(g);
    (1.0 / q.inverse_norm_inf(), q.norm_inf())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LuFactors {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
}

/// The correction factors `L(g,k,t,δ)` and `U(g,k,t,δ)`.
pub fn lu_factors(p: &Params, delta: f64) -> Result<LuFactors> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("delta must be positive and finite, got {delta}")));
    }
    let (d1, d2) = box_constants(p.g);
    let t = p.t as f64;
    let half_d = p.d as f64 / 2.0;
    let x = p.d as f64 * delta;
    let x4 = x.powi(4);
    let x6 = x.powi(6);

    // log-space products; a nonpositive middle factor (never admissible) clamps L to 0
    let mass_l = half_d * (-(-(t / 2.0) * (d1 * delta).powi(2)).exp_m1()).ln();
    let l = if x4 / 3.0 >= 1.0 {
        0.0
    } else {
        (-0.5 * (t * t * x6).ln_1p() + t * (-x4 / 3.0).ln_1p() + mass_l).exp()
    };
    let mass_u = half_d * (-(-t * (d2 * delta).powi(2)).exp_m1()).ln();
    let u = ((t / 2.0) * (x6 / 4.0).ln_1p() + t * (x4 / 3.0).ln_1p() + mass_u).exp();
    Ok(LuFactors { l, u, d1, d2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    /// `δ < (8/5) g^{-k-3} k^{-2}` (which also gives `δ < π/g`).
    pub delta_ok: bool,
    /// `t < 2 (dδ)^{-3}`, strict.
    pub t_ok: bool,
    /// The growth hypothesis `k < (1/6 - ε₀) log t / log g` with `ε₀ = 10⁻³`.
    pub growth_ok: bool,
    /// `g` odd or `λ` even, so the main term applies.
    pub parity_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub delta: f64,
    pub admissible: Admissibility,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub prefactor: f64,
    pub log10_prefactor: f64,
    pub remainder: f64,
    pub lower: f64,
    pub upper: f64,
    pub asymptotic_log10: f64,
    /// The hypotheses behind `lower ≤ P ≤ upper` all hold.
    pub rigorous: bool,
}

/// Default growth slack used for the `growth_ok` flag.
pub const GROWTH_EPSILON0: f64 = 1e-3;

pub fn delta_threshold(p: &Params) -> f64 {
    1.6 * (p.g as f64).powi(-(p.k as i32) - 3) / (p.k * p.k) as f64
}

/// `exp(-(11/192) g^{-k} t δ²)`.
pub fn remainder_bound(p: &Params, delta: f64) -> f64 {
    (-(11.0 / 192.0) * (p.g as f64).powi(-(p.k as i32)) * p.t as f64 * delta * delta).exp()
}

/// `log10` of `g^{(g/2)C(k,2) + C(k-1,2)} / (2πt)^{d/2}`.
pub fn log10_prefactor(p: &Params) -> f64 {
    let e = p.g as f64 / 2.0 * binom2(p.k) as f64 + p.lattice_rank() as f64;
    e * (p.g as f64).log10() - p.d as f64 / 2.0 * (TWO_PI * p.t as f64).log10()
}

/// Two-sided bounds on `P(X_t = 0)`; inadmissible inputs are reported, not rejected.
pub fn probability_bounds(p: &Params, delta: f64) -> Result<BoundsReport> {
    let lu = lu_factors(p, delta)?;
    let dd = p.d as f64 * delta;
    let delta_ok = delta < delta_threshold(p) && delta < std::f64::consts::PI / p.g as f64;
    let t_ok = (p.t as f64) < 2.0 / dd.powi(3);
    let growth_ok = growth_check(p, GROWTH_EPSILON0)?.growth_ok;
    let parity_ok = !p.parity_obstructed();
    let remainder = remainder_bound(p, delta);
    let log10_pre = log10_prefactor(p);
    let prefactor = 10f64.powf(log10_pre);
    let (lower, upper, rigorous) = if parity_ok {
        (prefactor * lu.l - remainder, prefactor * lu.u + remainder, delta_ok && t_ok)
    } else {
        // only the remainder integral survives
        (-remainder, remainder, delta_ok)
    };
    Ok(BoundsReport {
        delta,
        admissible: Admissibility { delta_ok, t_ok, growth_ok, parity_ok },
        l: lu.l,
        u: lu.u,
        prefactor,
        log10_prefactor: log10_pre,
        remainder,
        lower,
        upper,
        asymptotic_log10: asymptotic_count_log(p),
        rigorous,
    })
}

/// Largest convenient admissible `δ`: the schedule `t^{-5/12}` capped just under both hypotheses.
pub fn auto_delta(p: &Params) -> f64 {
    let t = p.t as f64;
    let schedule = t.powf(-5.0 / 12.0);
    let t_cap = (2.0 / t).cbrt() / p.d as f64;
    schedule.min(0.999 * delta_threshold(p)).min(0.999 * t_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthParams {
    pub epsilon0: f64,
    /// Solves `k = (1/6 - ε) log t / log g`.
    pub epsilon: f64,
    /// `t^{-5/12}`.
    pub delta: f64,
    pub growth_ok: bool,
    /// Remainder bound divided by the prefactor is below 1 at `δ = t^{-5/12}`.
    pub remainder_ratio_ok: bool,
    pub log10_remainder_ratio: f64,
}

pub fn growth_check(p: &Params, epsilon0: f64) -> Result<GrowthParams> {
    if !(epsilon0 > 0.0) {
        return Err(Error::domain(format!("epsilon0 must be positive, got {epsilon0}")));
    }
    let t = p.t as f64;
    let epsilon = 1.0 / 6.0 - p.k as f64 * (p.g as f64).ln() / t.ln();
    let delta = t.powf(-5.0 / 12.0);
    let log10_rem = -(11.0 / 192.0) * (p.g as f64).powi(-(p.k as i32)) * t * delta * delta / std::f64::consts::LN_10;
    let ratio = log10_rem - log10_prefactor(p);
    Ok(GrowthParams {
        epsilon0,
        epsilon,
        delta,
        growth_ok: epsilon > epsilon0,
        remainder_ratio_ok: ratio < 0.0,
        log10_remainder_ratio: ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerBounds {
    pub lower: f64,
    pub upper: f64,
}

fn power_params(z: Complex64, t: u32) -> Result<(f64, f64)> {
    if t < 2 {
        return Err(Error::domain(format!("t must be at least 2, got {t}")));
    }
    if !(z.re > 0.0) {
        return Err(Error::domain(format!("Re(z) must be positive, got {z}")));
    }
    let beta = z.im / z.re;
    let tt = t as f64;
    let alpha = 1.0 - tt * (tt - 1.0) / 2.0 * beta * beta;
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("1 - C(t,2)β² must be positive, got {alpha}")));
    }
    Ok((beta, alpha))
}

/// `upper = Re(z)^t (1+β²)^{t/2}`, `lower = upper (1 + (t/α)² β²)^{-1/2}` around `Re(z^t)`.
pub fn complex_power_bounds(z: Complex64, t: u32) -> Result<PowerBounds> {
    let (beta, alpha) = power_params(z, t)?;
    let tt = t as f64;
    let upper = z.re.powi(t as i32) * (1.0 + beta * beta).powf(tt / 2.0);
    let lower = upper / (1.0 + (tt / alpha).powi(2) * beta * beta).sqrt();
    Ok(PowerBounds { lower, upper })
}

/// Containment defects `(lower - Re z^t, Re z^t - upper)` scaled by `|z|^{-t}`.
///
/// Both bounds are `|z|^t` times a factor in `(0, 1]`, so after scaling the
/// comparison is between numbers of order one and a fixed absolute slack applies.
pub fn complex_power_defects(z: Complex64, t: u32) -> Result<(f64, f64)> {
    let (beta, alpha) = power_params(z, t)?;
    let tt = t as f64;
    // polar form keeps the unit-modulus power exact up to one rounding of cos
    let re = (tt * z.arg()).cos();
    let lower = 1.0 / (1.0 + (tt / alpha).powi(2) * beta * beta).sqrt();
    Ok((lower - re, re - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSandwich {
    pub lower: f64,
    pub upper: f64,
    pub mid: f64,
}

/// `√(2π(1-e^{-ρ²/2})) ≤ ∫_{-ρ}^{ρ} e^{-x²/2} dx ≤ √(2π(1-e^{-ρ²}))`.
pub fn gaussian_sandwich(rho: f64) -> Result<GaussianSandwich> {
    if !(rho > 0.0) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    let r2 = rho * rho;
    Ok(GaussianSandwich {
        lower: (-TWO_PI * (-r2 / 2.0).exp_m1()).sqrt(),
        upper: (-TWO_PI * (-r2).exp_m1()).sqrt(),
        mid: TWO_PI.sqrt() * erf(rho / std::f64::consts::SQRT_2),
    })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Tail `Σ_{s>j} w^s/s!` of the exponential series, summed directly.
fn series_tail(w: Complex64, j: u32) -> Complex64 {
    let mut term = w.powu(j + 1) / factorial(j + 1);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut s = j + 1;
    while term.norm() > 1e-18 * acc.norm().max(f64::MIN_POSITIVE) && s < 200 {
        acc += term;
        s += 1;
        term = term * w / s as f64;
    }
    acc
}

fn taylor_remainder(w: Complex64, j: u32) -> f64 {
    if w.norm() < 1.0 {
        series_tail(w, j).norm()
    } else {
        let poly: Complex64 = (0..=j).map(|s| w.powu(s) / factorial(s)).sum();
        (w.exp() - poly).norm()
    }
}

/// Defects of `|e^{-a} - T_j(-a)| ≤ min(2a^j/j!, a^{j+1}/(j+1)!)` and the same for `e^{ib}`.
///
/// Nonpositive defects mean the bound holds.
pub fn taylor_bounds_check(a: f64, b: f64, j: u32) -> Result<(f64, f64)> {
    if !(1..=3).contains(&j) {
        return Err(Error::domain(format!("j must be 1, 2 or 3, got {j}")));
    }
    if !(a >= 0.0) {
        return Err(Error::domain(format!("a must be nonnegative, got {a}")));
    }
    let bound = |x: f64| {
        (2.0 * x.powi(j as i32) / factorial(j)).min(x.powi(j as i32 + 1) / factorial(j + 1))
    };
    let ea = taylor_remainder(Complex64::new(-a, 0.0), j) - bound(a);
    let eb = taylor_remainder(Complex64::new(0.0, b), j) - bound(b.abs());
    Ok((ea, eb))
}
