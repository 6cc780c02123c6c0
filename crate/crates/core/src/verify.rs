//! Self-check suites run by the `verify` command.
//!
//! Each suite returns one [`CheckOutcome`] per named check; sizes are chosen so
//! `all` finishes in well under a minute on a laptop.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use crate::bounds::{auto_delta, complex_power_defects, gaussian_sandwich, taylor_bounds_check};
use crate::budget::Budget;
use crate::charfn::{det_m, exact_moments, CharFn, SqrtBlock, Theta};
use crate::error::{Error, Result};
use crate::exact::{count_brute, count_dft, count_g2_k3_closed_form, count_k2_closed_form};
use crate::lattice::{enumerate_lambda0, lambda_membership, structure_defects, DEFAULT_TOL};
use crate::params::{make_params, Params};
use crate::quad::{remainder_region_check, sandwich_report, QuadratureSpec};
use crate::walk::{mc_return_probability, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Moments,
    Lattice,
    Inequalities,
    Counts,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "moments" => Suite::Moments,
            "lattice" => Suite::Lattice,
            "inequalities" => Suite::Inequalities,
            "counts" => Suite::Counts,
            "all" => Suite::All,
            _ => return Err(Error::domain(format!("unknown suite {s:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Moments => "moments",
            Suite::Lattice => "lattice",
            Suite::Inequalities => "inequalities",
            Suite::Counts => "counts",
            Suite::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.to_string(), passed, detail }
}

/// Runs `suite`; errors from the underlying routines are returned, failed checks are not.
pub fn run_suite(suite: Suite, seed: u64, budget: &Budget) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Moments | Suite::All) {
        out.extend(moments(seed, budget)?);
    }
    if matches!(suite, Suite::Lattice | Suite::All) {
        out.extend(lattice(seed, budget)?);
    }
    if matches!(suite, Suite::Inequalities | Suite::All) {
        out.extend(inequalities(seed, budget)?);
    }
    if matches!(suite, Suite::Counts | Suite::All) {
        out.extend(counts(seed, budget)?);
    }
    Ok(out)
}

fn moments(seed: u64, budget: &Budget) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for g in 2..=5 {
        for k in 2..=5 {
            worst = worst.max(det_m(&Params::geometry(g, k)?).relative_gap());
        }
    }
    out.push(outcome("det_m_closed_form", worst <= 1e-10, format!("max relative gap {worst:.2e}")));

    let mut rng = substream(seed, 0);
    let mut m1_nonzero = 0;
    let mut m2_worst: f64 = 0.0;
    for (g, k) in [(2, 4), (3, 3)] {
        let p = Params::geometry(g, k)?;
        for _ in 0..100 {
            let th: Vec<Ratio<i64>> =
                (0..p.d).map(|_| Ratio::new(rng.random_range(-50..=50), rng.random_range(1..=20))).collect();
            let m = exact_moments(&p, &th, budget)?;
            if !m.m1.is_zero() {
                m1_nonzero += 1;
            }
            m2_worst = m2_worst.max(m.m2_match);
        }
    }
    out.push(outcome("first_moment_zero", m1_nonzero == 0, format!("{m1_nonzero} nonzero of 200")));
    out.push(outcome("second_moment_identity", m2_worst <= 1e-12, format!("max defect {m2_worst:.2e}")));

    let mut sq_worst: f64 = 0.0;
    let mut witness_fail = 0;
    for g in 2..=7 {
        let q = SqrtBlock::new(g);
        sq_worst = sq_worst.max(q.square_defect());
        let (d1, d2) = (1.0 / q.inverse_norm_inf(), q.norm_inf());
        let n = (g - 1) as usize;
        for _ in 0..200 {
            let th: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let y = q.apply(&th);
            let back = q.apply_inverse(&y);
            let round = back.iter().zip(&th).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let ymax = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-d1..=d1)).collect();
            let zmax = q.apply_inverse(&z).iter().map(|v| v.abs()).fold(0.0, f64::max);
            if round > 1e-10 || ymax > d2 + 1e-15 || zmax > 1.0 + 1e-15 {
                witness_fail += 1;
            }
        }
    }
    out.push(outcome("sqrt_block_square", sq_worst <= 1e-12, format!("max |Q² - S| {sq_worst:.2e}")));
    out.push(outcome("box_sandwich_witness", witness_fail == 0, format!("{witness_fail} failures")));
    Ok(out)
}

fn lattice(seed: u64, budget: &Budget) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for (g, k) in [(2, 3), (2, 4), (3, 3), (3, 4), (5, 3)] {
        let p = Params::geometry(g, k)?;
        let elems = enumerate_lambda0(&p, budget)?;
        let expected = (g as usize).pow(p.lattice_rank() as u32);
        let cf = CharFn::new(&p, budget)?;
        let mut members = 0;
        let mut defect: f64 = 0.0;
        for e in &elems {
            if crate::lattice::membership_with(cf.table(), e, DEFAULT_TOL) {
                members += 1;
            }
            let s = structure_defects(&p, e)?;
            defect = defect.max(s.hom_defect).max(s.row_defect);
        }
        out.push(outcome(
            &format!("lambda0_census_g{g}_k{k}"),
            elems.len() == expected && members == expected && defect <= 1e-9,
            format!("size {} (expected {expected}), members {members}, max defect {defect:.2e}", elems.len()),
        ));
    }

    let p = Params::geometry(3, 3)?;
    let cf = CharFn::new(&p, budget)?;
    let mut rng = substream(seed, 1);
    let mut worst: f64 = 0.0;
    for eta in enumerate_lambda0(&p, budget)? {
        let pe = cf.eval(&eta);
        for _ in 0..20 {
            let zeta = Theta((0..p.d).map(|_| rng.random_range(-PI..PI)).collect());
            worst = worst.max((cf.eval(&eta.add(&zeta)) - pe * cf.eval(&zeta)).norm());
        }
    }
    out.push(outcome("multiplicativity_g3_k3", worst <= 1e-12, format!("max defect {worst:.2e}")));

    // off-lattice grid points are rejected
    let p = Params::geometry(2, 3)?;
    let off = Theta(vec![PI, 0.0, 0.0]);
    let rejected = !lambda_membership(&p, &off, DEFAULT_TOL, budget)?;
    out.push(outcome("membership_rejects_off_lattice", rejected, "θ = (π,0,0) at g=2,k=3".into()));
    Ok(out)
}

/// Cases per inequality sweep in the `inequalities` suite.
pub const SWEEP_CASES: u64 = 100_000;
/// Slack allowed on each defect.
pub const SWEEP_SLACK: f64 = 1e-15;

/// Largest defect of the Taylor remainder bounds over `cases` random `(a, b, j)`.
pub fn taylor_sweep(cases: u64, seed: u64) -> Result<f64> {
    let mut rng = substream(seed, 2);
    let mut worst = f64::NEG_INFINITY;
    for n in 0..cases {
        // alternate small and large arguments
        let scale = if n % 2 == 0 { 1.0 } else { 20.0 };
        let a = rng.random_range(0.0..scale);
        let b = rng.random_range(-scale..scale);
        let j = rng.random_range(1..=3);
        let (x, y) = taylor_bounds_check(a, b, j)?;
        worst = worst.max(x).max(y);
    }
    Ok(worst)
}

/// Largest normalized defect of the complex-power bounds over `cases` random `(z, t)`.
pub fn complex_power_sweep(cases: u64, seed: u64) -> Result<f64> {
    let mut rng = substream(seed, 3);
    let mut worst = f64::NEG_INFINITY;
    let mut n = 0;
    while n < cases {
        let t: u32 = rng.random_range(2..=200);
        let re = rng.random_range(0.01..2.0);
        // |β| below the α > 0 limit √(2/(t(t-1)))
        let beta_max = (2.0 / (t as f64 * (t as f64 - 1.0))).sqrt();
        let beta = rng.random_range(-beta_max..beta_max) * rng.random_range(0.0..1.0);
        let z = Complex64::new(re, re * beta);
        match complex_power_defects(z, t) {
            Ok((lo, hi)) => worst = worst.max(lo).max(hi),
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
        n += 1;
    }
    Ok(worst)
}

/// Largest defect of the Gaussian sandwich over `cases` random `ρ`.
pub fn gaussian_sweep(cases: u64, seed: u64) -> Result<f64> {
    let mut rng = substream(seed, 4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let rho = 10f64.powf(rng.random_range(-4.0..1.5));
        let s = gaussian_sandwich(rho)?;
        worst = worst.max(s.lower - s.mid).max(s.mid - s.upper);
    }
    Ok(worst)
}

fn inequalities(seed: u64, budget: &Budget) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for (name, worst) in [
        ("taylor_bounds", taylor_sweep(SWEEP_CASES, seed)?),
        ("complex_power_bounds", complex_power_sweep(SWEEP_CASES, seed)?),
        ("gaussian_sandwich", gaussian_sweep(SWEEP_CASES, seed)?),
    ] {
        out.push(outcome(name, worst <= SWEEP_SLACK, format!("{SWEEP_CASES} cases, max defect {worst:.2e}")));
    }
    for (g, k, l, grid) in [(2, 3, 8, 21), (3, 3, 2, 5)] {
        let p = make_params(g, k, l)?;
        let delta = auto_delta(&p);
        let r = sandwich_report(&p, &QuadratureSpec::new(grid, delta, p.t), 10_000, seed, budget)?;
        out.push(outcome(
            &format!("primary_region_g{g}_k{k}_lambda{l}"),
            r.passed(),
            format!(
                "{} grid + {} random points, {} violations, integral {:.3e} in [{:.3e}, {:.3e}]",
                r.grid_points_checked,
                r.random_points_checked,
                r.violations.len(),
                r.integral,
                r.target_lower,
                r.target_upper
            ),
        ));
        let rc = remainder_region_check(&p, delta, 10_000, seed, budget)?;
        out.push(outcome(
            &format!("remainder_regions_g{g}_k{k}"),
            rc.violations.is_empty(),
            format!(
                "RA max |Φ| {:.6} ≤ {:.6}, RB max |Φ| {:.12} ≤ {:.12}",
                rc.ra_max, rc.ra_bound, rc.rb_max, rc.rb_bound
            ),
        ));
    }
    Ok(out)
}

fn counts(seed: u64, budget: &Budget) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for (g, k, l) in [(2, 2, 1), (2, 2, 2), (2, 3, 2), (2, 3, 4), (3, 3, 1)] {
        let p = make_params(g, k, l)?;
        let a = count_brute(&p, budget)?;
        let b = count_dft(&p, budget)?;
        out.push(outcome(&format!("brute_equals_dft_g{g}_k{k}_lambda{l}"), a == b, format!("brute {a}, dft {b}")));
    }
    let mut drake_ok = true;
    for (g, l) in [(2, 1), (2, 3), (4, 1), (6, 1), (8, 1)] {
        let p = make_params(g, 3, l)?;
        drake_ok &= count_brute(&p, budget)?.is_zero() && count_dft(&p, budget)?.is_zero();
    }
    out.push(outcome("drake_obstruction", drake_ok, "g even, λ odd, k=3, λg ≤ 8".into()));
    let mut closed_ok = true;
    for l in 1..=8 {
        closed_ok &= count_brute(&make_params(2, 3, l)?, budget)? == count_g2_k3_closed_form(l);
    }
    for (g, l) in [(2, 3), (3, 2), (4, 1), (5, 1)] {
        closed_ok &= count_brute(&make_params(g, 2, l)?, budget)? == count_k2_closed_form(g, l);
    }
    out.push(outcome("closed_forms", closed_ok, "g=2,k=3,λ≤8 and k=2 families".into()));
    let p = make_params(2, 3, 2)?;
    let mc = mc_return_probability(&p, 200_000, seed)?;
    let z = (mc.p_hat - 3.0 / 32.0).abs() / mc.stderr;
    out.push(outcome("monte_carlo_g2_k3_lambda2", z <= 5.0, format!("p_hat {:.5}, {z:.2} standard errors", mc.p_hat)));
    Ok(out)
}
