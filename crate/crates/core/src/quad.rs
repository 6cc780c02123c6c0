//! Tensor midpoint quadrature over boxes and the torus, and the numerical checks
//! built on it: the box/remainder decomposition of the return probability, the
//! Gaussian sandwich on the primary box, and pointwise checks of `Φ` near the
//! origin and on the remainder regions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{box_constants, lu_factors};
use crate::budget::{sat_pow, Budget};
use crate::charfn::{quad_form, CharFn, Theta};
use crate::error::{Error, Result};
use crate::exact::DftLattice;
use crate::lattice::{classify_with, grid_membership, grid_point, RegionTag};
use crate::params::Params;
use crate::sum::par_pairwise_sum;
use crate::walk::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Midpoint nodes per axis; odd and at least 3.
    pub grid_per_axis: u32,
    /// Half-width of the box `B_δ(0)`.
    pub delta: f64,
    /// Power of the integrand.
    pub t: u64,
    /// Largest number of nodes.
    pub max_points: u64,
}

impl QuadratureSpec {
    pub fn new(grid_per_axis: u32, delta: f64, t: u64) -> Self {
        QuadratureSpec { grid_per_axis, delta, t, max_points: Budget::default().max_grid_points }
    }

    fn validate(&self, p: &Params) -> Result<u64> {
        if self.grid_per_axis < 3 || self.grid_per_axis % 2 == 0 {
            return Err(Error::domain(format!("grid_per_axis must be odd and >= 3, got {}", self.grid_per_axis)));
        }
        if !(self.delta > 0.0 && self.delta < PI / p.g as f64) {
            return Err(Error::domain(format!("delta = {} must lie in (0, π/g)", self.delta)));
        }
        let points = sat_pow(self.grid_per_axis as u128, p.d as u64);
        Budget::check("quadrature nodes", points, self.max_points as u128)?;
        Ok(points as u64)
    }

    /// The same rule with roughly half the nodes per axis (kept odd, at least 3).
    pub fn coarser(&self) -> Self {
        QuadratureSpec { grid_per_axis: ((self.grid_per_axis / 2) | 1).max(3), ..*self }
    }
}

/// Midpoint node `idx` of an `n^d` tensor grid on `[lo, lo + n·h)^d`.
fn node(idx: u64, n: u64, d: usize, lo: f64, h: f64) -> Theta {
    let mut th = vec![0.0; d];
    let mut r = idx;
    for x in th.iter_mut().rev() {
        *x = lo + ((r % n) as f64 + 0.5) * h;
        r /= n;
    }
    Theta(th)
}

fn box_sum<F>(p: &Params, spec: &QuadratureSpec, f: F) -> Result<(Complex64, f64)>
where
    F: Fn(&Theta) -> Complex64 + Sync,
{
    let points = spec.validate(p)?;
    let n = spec.grid_per_axis as u64;
    let h = 2.0 * spec.delta / n as f64;
    let total = par_pairwise_sum(0, points as usize, &|i| f(&node(i as u64, n, p.d, -spec.delta, h)));
    Ok((total, h.powi(p.d as i32)))
}

/// Midpoint approximation of `∫_{B_δ(0)} Φ(θ)^t dθ`.
pub fn integrate_box_phi(p: &Params, spec: &QuadratureSpec, budget: &Budget) -> Result<Complex64> {
    let cf = CharFn::new(p, budget)?;
    let t = spec.t as u32;
    let (s, vol) = box_sum(p, spec, |th| cf.eval(th).powu(t))?;
    Ok(s * vol)
}

/// Midpoint approximation of `∫_{B_δ(0)} exp(-(t/2) θᵀMθ) dθ`.
pub fn integrate_box_gaussian(p: &Params, spec: &QuadratureSpec) -> Result<f64> {
    let t = spec.t as f64;
    let (s, vol) = box_sum(p, spec, |th| Complex64::new((-0.5 * t * quad_form(p, th)).exp(), 0.0))?;
    Ok(s.re * vol)
}

/// `[1 - e^{-(t/2)(D₁δ)²}]^{d/2} (2π/t)^{d/2} g^{(g/2)C(k,2)}` and the `D₂` analogue.
pub fn gaussian_box_bounds(p: &Params, delta: f64, t: u64) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::domain("t must be positive for the Gaussian box bounds"));
    }
    let (d1, d2) = box_constants(p.g);
    let t = t as f64;
    let half_d = p.d as f64 / 2.0;
    let pairs = p.pairs() as f64;
    let log_scale = half_d * (2.0 * PI / t).ln() + p.g as f64 / 2.0 * pairs * (p.g as f64).ln();
    let lo = (half_d * (-(-(t / 2.0) * (d1 * delta).powi(2)).exp_m1()).ln() + log_scale).exp();
    let hi = (half_d * (-(-t * (d2 * delta).powi(2)).exp_m1()).ln() + log_scale).exp();
    Ok((lo, hi))
}

/// Kinds of pointwise estimate checked on the primary box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `|ε(θ)| ≤ (1/6)(dδ)⁴ e^{(dδ)²/2}` with `Re Φ = e^{-θᵀMθ/2}(1 + ε)`.
    RealPart,
    /// `|Im Φ| ≤ (dδ)³/6`.
    ImagPart,
    /// `Re Φ > 1/3` when `dδ < 1`.
    RealLower,
    /// The box integral misses the `[L, U]` sandwich by more than the quadrature margin.
    Integral,
    /// `|Φ| ≤ 1 - g^{-k-2}/10` on the region near off-lattice grid points.
    RegionA,
    /// `|Φ| ≤ 1 - (11/48) g^{-k} (δ/2)²` away from the grid.
    RegionB,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub theta: Vec<f64>,
    pub value: f64,
    pub bound: f64,
}

/// Absolute slack for floating-point evaluation of `Φ` in the pointwise checks.
pub const POINTWISE_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, Copy)]
struct PrimaryBounds {
    eps: f64,
    imag: f64,
    real_lower: bool,
}

impl PrimaryBounds {
    fn new(p: &Params, delta: f64) -> Self {
        let x = p.d as f64 * delta;
        PrimaryBounds { eps: x.powi(4) / 6.0 * (x * x / 2.0).exp(), imag: x.powi(3) / 6.0, real_lower: x < 1.0 }
    }

    fn check(&self, p: &Params, cf: &CharFn, th: &Theta, out: &mut Vec<Violation>) {
        let v = cf.eval(th);
        let gauss = (-0.5 * quad_form(p, th)).exp();
        let eps = v.re / gauss - 1.0;
        let mut push = |kind, value: f64, bound: f64| out.push(Violation { kind, theta: th.0.clone(), value, bound });
        if eps.abs() > self.eps + POINTWISE_SLACK {
            push(ViolationKind::RealPart, eps.abs(), self.eps);
        }
        if v.im.abs() > self.imag + POINTWISE_SLACK {
            push(ViolationKind::ImagPart, v.im.abs(), self.imag);
        }
        if self.real_lower && !(v.re > 1.0 / 3.0) {
            push(ViolationKind::RealLower, v.re, 1.0 / 3.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `(2π)^{-d} ∫_{B_δ(0)} Φ^t` on the requested grid.
    pub integral: f64,
    pub integral_imag: f64,
    /// Same on the coarser grid; the difference is the quadrature margin.
    pub integral_coarse: f64,
    pub margin: f64,
    /// `L g^{(g/2)C(k,2)} (2πt)^{-d/2}` and the `U` analogue.
    pub target_lower: f64,
    pub target_upper: f64,
    pub integral_ok: bool,
    pub grid_points_checked: u64,
    pub random_points_checked: u64,
    /// `δ` and `t` satisfy the hypotheses of the sandwich.
    pub admissible: bool,
    pub violations: Vec<Violation>,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.integral_ok && self.violations.is_empty()
    }
}

/// Checks the primary-box sandwich and the pointwise estimates for `Φ`.
///
/// Pointwise checks run on every grid node and on `random_samples` uniform
/// points of the box drawn from the seeded generator.
pub fn sandwich_report(
    p: &Params,
    spec: &QuadratureSpec,
    random_samples: u64,
    seed: u64,
    budget: &Budget,
) -> Result<SandwichReport> {
    let points = spec.validate(p)?;
    let cf = CharFn::new(p, budget)?;
    let d = p.d;
    let delta = spec.delta;
    let norm = (2.0 * PI).powi(-(d as i32));

    let fine = integrate_box_phi(p, spec, budget)? * norm;
    let coarse = integrate_box_phi(p, &spec.coarser(), budget)?.re * norm;
    let margin = (fine.re - coarse).abs();

    let tp = p.with_t(spec.t)?;
    let lu = lu_factors(&tp, delta)?;
    let t = spec.t as f64;
    let scale = ((p.g as f64 / 2.0) * p.pairs() as f64 * (p.g as f64).ln() - d as f64 / 2.0 * (2.0 * PI * t).ln()).exp();
    let (target_lower, target_upper) = (lu.l * scale, lu.u * scale);
    let mut violations = Vec::new();
    let integral_ok = fine.re >= target_lower - margin && fine.re <= target_upper + margin;
    if !integral_ok {
        violations.push(Violation {
            kind: ViolationKind::Integral,
            theta: vec![],
            value: fine.re,
            bound: if fine.re < target_lower { target_lower } else { target_upper },
        });
    }

    let pb = PrimaryBounds::new(p, delta);
    let n = spec.grid_per_axis as u64;
    let h = 2.0 * delta / n as f64;
    let mut grid_v: Vec<Violation> = (0..points)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            pb.check(p, &cf, &node(i, n, d, -delta, h), &mut out);
            out
        })
        .collect();
    violations.append(&mut grid_v);

    let mut rand_v: Vec<Violation> = (0..random_samples.div_ceil(RANDOM_BATCH))
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = substream(seed, b);
            let count = RANDOM_BATCH.min(random_samples - b * RANDOM_BATCH);
            let mut out = Vec::new();
            for _ in 0..count {
                let th = Theta((0..d).map(|_| rng.random_range(-delta..delta)).collect());
                pb.check(p, &cf, &th, &mut out);
            }
            out
        })
        .collect();
    violations.append(&mut rand_v);

    let admissible = {
        let dd = d as f64 * delta;
        delta < crate::bounds::delta_threshold(p) && t < 2.0 / dd.powi(3)
    };
    Ok(SandwichReport {
        integral: fine.re,
        integral_imag: fine.im,
        integral_coarse: coarse,
        margin,
        target_lower,
        target_upper,
        integral_ok,
        grid_points_checked: points,
        random_points_checked: random_samples,
        admissible,
        violations,
    })
}

const RANDOM_BATCH: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCheck {
    pub ra_checked: u64,
    pub rb_checked: u64,
    pub ra_bound: f64,
    pub rb_bound: f64,
    /// Largest `|Φ|` seen in each region.
    pub ra_max: f64,
    pub rb_max: f64,
    pub violations: Vec<Violation>,
}

/// Spot-checks the remainder-region bounds on `samples` points per region.
///
/// Region A points are off-lattice grid points plus a uniform offset in
/// `(-δ, δ)^d`. Half the region B points are uniform on the torus; the other
/// half sit just outside the boxes, where the bound is tightest.
pub fn remainder_region_check(p: &Params, delta: f64, samples: u64, seed: u64, budget: &Budget) -> Result<RegionCheck> {
    let cf = CharFn::new(p, budget)?;
    let table = cf.table();
    let g = p.g;
    let d = p.d;
    let gf = g as f64;
    let ra_bound = 1.0 - gf.powi(-(p.k as i32) - 2) / 10.0;
    let rb_bound = 1.0 - (11.0 / 48.0) * gf.powi(-(p.k as i32)) * (delta / 2.0).powi(2);
    // validates delta
    classify_with(p, table, &Theta::zeros(d), delta)?;

    let batches = samples.div_ceil(RANDOM_BATCH);
    let run = |region: ViolationKind, stream_base: u64| -> Vec<(f64, Option<Violation>)> {
        (0..batches)
            .into_par_iter()
            .flat_map_iter(|b| {
                let mut rng = substream(seed, stream_base + b);
                let count = RANDOM_BATCH.min(samples - b * RANDOM_BATCH);
                let mut out = Vec::with_capacity(count as usize);
                let mut drawn = 0;
                while drawn < count {
                    let th = match region {
                        ViolationKind::RegionA => {
                            let n: Vec<u32> = (0..d).map(|_| rng.random_range(0..g)).collect();
                            if grid_membership(p, table, &n) {
                                continue;
                            }
                            let base = grid_point(g, &n);
                            Theta(base.0.iter().map(|x| x + rng.random_range(-delta..delta)).collect())
                        }
                        _ if drawn % 2 == 0 => Theta((0..d).map(|_| rng.random_range(-PI..PI)).collect()),
                        _ => {
                            let n: Vec<u32> = (0..d).map(|_| rng.random_range(0..g)).collect();
                            let base = grid_point(g, &n);
                            Theta(base.0.iter().map(|x| x + rng.random_range(-3.0 * delta..3.0 * delta)).collect())
                        }
                    };
                    let tag = classify_with(p, table, &th, delta).expect("validated delta");
                    let wanted = match region {
                        ViolationKind::RegionA => tag == RegionTag::RA,
                        _ => tag == RegionTag::RB,
                    };
                    if !wanted {
                        continue;
                    }
                    drawn += 1;
                    let m = cf.eval(&th).norm();
                    let bound = if region == ViolationKind::RegionA { ra_bound } else { rb_bound };
                    let v = (m > bound).then(|| Violation { kind: region, theta: th.0.clone(), value: m, bound });
                    out.push((m, v));
                }
                out
            })
            .collect()
    };
    let ra = run(ViolationKind::RegionA, 0);
    let rb = run(ViolationKind::RegionB, 1 << 32);
    let max = |v: &[(f64, Option<Violation>)]| v.iter().map(|x| x.0).fold(0.0, f64::max);
    let ra_max = max(&ra);
    let rb_max = max(&rb);
    let violations = ra.into_iter().chain(rb).filter_map(|x| x.1).collect();
    Ok(RegionCheck {
        ra_checked: samples,
        rb_checked: samples,
        ra_bound,
        rb_bound,
        ra_max,
        rb_max,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorusDecomposition {
    pub nodes_per_axis: u64,
    /// `(2π)^{-d} ∫_{B_δ(0)} Φ^t`.
    pub box0: f64,
    /// Same over the union of all primary boxes.
    pub boxes_total: f64,
    /// Same over the complement of the primary boxes.
    pub remainder: f64,
    /// Same over the whole torus.
    pub full: f64,
    /// `|Λ₀| · box0 + remainder`.
    pub decomposed: f64,
}

/// Splits the torus integral of `Φ^t` into primary boxes and remainder.
///
/// `n` midpoint nodes per axis on `[-π, π)`; `n` must be a multiple of `g` so
/// that the node set is invariant under the lattice translations.
pub fn torus_decomposition(p: &Params, delta: f64, n: u64, budget: &Budget) -> Result<TorusDecomposition> {
    if n == 0 || n % p.g as u64 != 0 {
        return Err(Error::domain(format!("nodes per axis n = {n} must be a positive multiple of g")));
    }
    let cf = CharFn::new(p, budget)?;
    classify_with(p, cf.table(), &Theta::zeros(p.d), delta)?;
    let points = sat_pow(n as u128, p.d as u64);
    Budget::check("quadrature nodes", points, budget.max_grid_points as u128)?;
    let h = 2.0 * PI / n as f64;
    let t = p.t as u32;
    // components: [box0, boxes, remainder]
    let f = |i: usize| -> [f64; 3] {
        let th = node(i as u64, n, p.d, -PI, h);
        let v = cf.eval(&th).powu(t).re;
        match classify_with(p, cf.table(), &th, delta).expect("validated delta") {
            RegionTag::PrimaryBox(c) if c.c.iter().all(|&x| x == 0) => [v, v, 0.0],
            RegionTag::PrimaryBox(_) => [0.0, v, 0.0],
            _ => [0.0, 0.0, v],
        }
    };
    let sums = par_pairwise_sum(0, points as usize, &|i| Sum3(f(i)));
    let scale = 1.0 / points as f64;
    let [box0, boxes_total, remainder] = sums.0.map(|x| x * scale);
    let rank = (p.g as f64).powi(p.lattice_rank() as i32);
    Ok(TorusDecomposition {
        nodes_per_axis: n,
        box0,
        boxes_total,
        remainder,
        full: boxes_total + remainder,
        decomposed: rank * box0 + remainder,
    })
}

/// `(2π)^{-d} ∫ Φ^t` over the torus as a Riemann sum on the DFT grid.
///
/// The walk lives on `Z^d` with coordinate span below the modulus, so the sum
/// is exact up to rounding.
pub fn full_torus_probability(p: &Params, budget: &Budget) -> Result<f64> {
    let n = DftLattice::WalkSpan.modulus(p);
    let cf = CharFn::new(p, budget)?;
    let points = sat_pow(n as u128, p.d as u64);
    Budget::check("quadrature nodes", points, budget.max_grid_points as u128)?;
    let h = 2.0 * PI / n as f64;
    let t = p.t as u32;
    let s = par_pairwise_sum(0, points as usize, &|i| cf.eval(&node(i as u64, n, p.d, 0.0, h)).powu(t).re);
    Ok(s / points as f64)
}

#[derive(Debug, Clone, Copy, Default)]
struct Sum3([f64; 3]);

impl std::ops::Add for Sum3 {
    type Output = Sum3;
    fn add(self, o: Sum3) -> Sum3 {
        Sum3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}
