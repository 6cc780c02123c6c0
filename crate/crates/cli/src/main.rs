//! `diffmat` command-line front end.
//!
//! Every command prints one JSON record per line on stdout. Exit codes: 0 on
//! success, 1 on domain or usage errors, 2 when a resource budget is exceeded or
//! a floating-point result cannot be trusted, 3 when a verification fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use diffmat::bounds::{asymptotic_count_log, auto_delta, growth_check, probability_bounds, GROWTH_EPSILON0};
use diffmat::exact::{count_auto, count_brute, count_dft, exact_return_probability, BigCount, CountMethod};
use diffmat::lattice::{enumerate_lambda0, lambda_membership, structure_defects, LatticeCoeffs, DEFAULT_TOL};
use diffmat::quad::{gaussian_box_bounds, integrate_box_gaussian, sandwich_report, QuadratureSpec};
use diffmat::verify::{run_suite, Suite};
use diffmat::walk::mc_return_probability;
use diffmat::{make_params, Budget, Error, Params};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "diffmat", version, about = "Count and bound difference matrices over Z_g")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "DIFFMAT_THREADS", global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    budget: BudgetArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct BudgetArgs {
    /// Largest g^k column enumeration.
    #[arg(long, global = true)]
    max_columns: Option<u64>,
    /// Largest multiplicity-vector space for the brute-force counter.
    #[arg(long, global = true)]
    max_compositions: Option<u128>,
    /// Largest grid-points × columns product for the DFT counter.
    #[arg(long, global = true)]
    max_dft_work: Option<u128>,
    /// Largest number of quadrature nodes.
    #[arg(long, global = true)]
    max_grid_points: Option<u64>,
    /// Largest lattice to enumerate.
    #[arg(long, global = true)]
    max_lattice: Option<u64>,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        let d = Budget::default();
        Budget {
            max_columns: self.max_columns.unwrap_or(d.max_columns),
            max_compositions: self.max_compositions.unwrap_or(d.max_compositions),
            max_dft_work: self.max_dft_work.unwrap_or(d.max_dft_work),
            max_grid_points: self.max_grid_points.unwrap_or(d.max_grid_points),
            max_lattice: self.max_lattice.unwrap_or(d.max_lattice),
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct ParamArgs {
    /// Group order.
    #[arg(long)]
    g: u32,
    /// Number of rows.
    #[arg(long)]
    k: usize,
    /// Index: each difference appears λ times per row pair.
    #[arg(long)]
    lambda: u64,
}

impl ParamArgs {
    fn params(&self) -> Result<Params, Error> {
        make_params(self.g, self.k, self.lambda)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum MethodArg {
    Brute,
    Dft,
    Auto,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact number of difference matrices.
    Count {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
    /// Monte Carlo estimate of the return probability.
    Estimate {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Asymptotic main term for the count.
    Asymptotic {
        #[command(flatten)]
        p: ParamArgs,
    },
    /// Two-sided bounds on the return probability.
    Bounds {
        #[command(flatten)]
        p: ParamArgs,
        /// Box half-width, or `auto`.
        #[arg(long, default_value = "auto")]
        delta: String,
    },
    /// The lattice of unit-modulus frequencies.
    Lattice {
        #[arg(long)]
        g: u32,
        #[arg(long)]
        k: usize,
        /// Print every element.
        #[arg(long)]
        list: bool,
        /// Check membership and structure relations for every element.
        #[arg(long)]
        verify: bool,
    },
    /// Quadrature on the primary box with the pointwise and sandwich checks.
    Integrate {
        #[command(flatten)]
        p: ParamArgs,
        /// Box half-width, or `auto`.
        #[arg(long, default_value = "auto")]
        delta: String,
        /// Odd number of midpoint nodes per axis.
        #[arg(long, default_value_t = 21)]
        grid: u32,
        /// Extra uniformly random points for the pointwise checks.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Built-in verification suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact vs asymptotic table over a λ range, written as CSV.
    Sweep {
        #[arg(long)]
        g: u32,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lambda_min: u64,
        #[arg(long)]
        lambda_max: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
}

/// What went wrong, mapped to an exit code.
enum Failure {
    Lib(Error),
    Verification(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lib(Error::Domain(_)) | Failure::Io(_) => 1,
            Failure::Lib(_) => 2,
            Failure::Verification(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Lib(Error::Domain(_)) => "domain",
            Failure::Lib(Error::Budget { .. }) => "budget",
            Failure::Lib(Error::Integrity(_)) => "integrity",
            Failure::Verification(_) => "verification",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Verification(m) | Failure::Io(m) => m.clone(),
        }
    }
}

fn params_json(p: &Params) -> Value {
    json!({ "g": p.g, "k": p.k, "lambda": p.lambda, "t": p.t, "d": p.d })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// One output record; `wall_time_ms` is filled in when it is emitted.
struct Record {
    command: &'static str,
    params: Value,
    method: &'static str,
    rigor: &'static str,
    seed: Option<u64>,
    body: Map<String, Value>,
}

impl Record {
    fn new(command: &'static str, params: Value, method: &'static str, rigor: &'static str) -> Self {
        Record { command, params, method, rigor, seed: None, body: Map::new() }
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn with(mut self, key: &str, v: impl Serialize) -> Self {
        self.body.insert(key.to_string(), to_value(&v));
        self
    }

    fn emit(self, start: Instant) {
        let mut m = Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("params".into(), self.params);
        m.insert("method".into(), json!(self.method));
        m.insert("rigor".into(), json!(self.rigor));
        m.extend(self.body);
        m.insert("wall_time_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
        m.insert("seed".into(), json!(self.seed));
        println!("{}", Value::Object(m));
    }
}

fn method_name(m: CountMethod) -> &'static str {
    match m {
        CountMethod::Brute => "brute",
        CountMethod::Dft => "dft",
    }
}

fn count_with(p: &Params, method: MethodArg, budget: &Budget) -> Result<(BigCount, CountMethod), Error> {
    match method {
        MethodArg::Brute => Ok((count_brute(p, budget)?, CountMethod::Brute)),
        MethodArg::Dft => Ok((count_dft(p, budget)?, CountMethod::Dft)),
        MethodArg::Auto => count_auto(p, budget),
    }
}

fn parse_delta(s: &str, p: &Params) -> Result<f64, Error> {
    if s == "auto" {
        return Ok(auto_delta(p));
    }
    s.parse::<f64>().map_err(|_| Error::Domain(format!("delta must be a number or `auto`, got {s:?}")))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let budget = cli.budget.budget();
    let start = Instant::now();
    match &cli.command {
        Command::Count { p, method } => {
            let p = p.params()?;
            let (count, used) = count_with(&p, *method, &budget)?;
            let prob = exact_return_probability(&p, &count);
            let adv = p.advisories();
            Record::new("count", params_json(&p), method_name(used), "exact")
                .with("count", &count)
                .with("probability", prob.to_string())
                .with("drake", adv.drake)
                .with("advisories", adv)
                .emit(start);
        }
        Command::Estimate { p, samples, seed } => {
            let p = p.params()?;
            let est = mc_return_probability(&p, *samples, *seed)?;
            Record::new("estimate", params_json(&p), "monte_carlo", "statistical")
                .seed(*seed)
                .with("p_hat", est.p_hat)
                .with("stderr", est.stderr)
                .with("hits", est.hits)
                .with("samples", est.samples)
                .with("count_estimate_log10", est.p_hat.log10() + (p.k as u64 * p.t) as f64 * (p.g as f64).log10())
                .emit(start);
        }
        Command::Asymptotic { p } => {
            let p = p.params()?;
            let log10 = asymptotic_count_log(&p);
            let growth = growth_check(&p, GROWTH_EPSILON0)?;
            if !growth.growth_ok {
                eprintln!("warning: growth hypothesis k < (1/6 - ε₀) log t / log g fails at these parameters");
            }
            let value = (log10 < 300.0).then(|| 10f64.powf(log10));
            Record::new("asymptotic", params_json(&p), "asymptotic_formula", "asymptotic")
                .with("log10", log10)
                .with("value", value)
                .with("growth", growth)
                .emit(start);
        }
        Command::Bounds { p, delta } => {
            let p = p.params()?;
            let delta = parse_delta(delta, &p)?;
            let r = probability_bounds(&p, delta)?;
            let rigor = if r.rigorous { "rigorous" } else { "diagnostic" };
            let mut rec = Record::new("bounds", params_json(&p), "return_probability_bounds", rigor);
            if let Value::Object(m) = to_value(&r) {
                rec.body.extend(m);
            }
            rec.emit(start);
        }
        Command::Lattice { g, k, list, verify } => {
            let p = Params::geometry(*g, *k)?;
            let elems = enumerate_lambda0(&p, &budget)?;
            let mut rec = Record::new("lattice", json!({ "g": g, "k": k, "d": p.d }), "building_blocks", "exact")
                .with("size", elems.len())
                .with("expected_size", (*g as u64).pow(p.lattice_rank() as u32));
            if *list {
                let items: Vec<Value> = elems
                    .iter()
                    .enumerate()
                    .map(|(r, e)| json!({ "coeffs": LatticeCoeffs::from_rank(&p, r as u64).c, "theta": e.0 }))
                    .collect();
                rec = rec.with("elements", items);
            }
            let mut failed = false;
            if *verify {
                let mut members = 0;
                let mut hom: f64 = 0.0;
                let mut row: f64 = 0.0;
                for e in &elems {
                    members += lambda_membership(&p, e, DEFAULT_TOL, &budget)? as usize;
                    let s = structure_defects(&p, e)?;
                    hom = hom.max(s.hom_defect);
                    row = row.max(s.row_defect);
                }
                failed = members != elems.len() || hom > 1e-9 || row > 1e-9;
                rec = rec.with("members", members).with("hom_defect", hom).with("row_defect", row).with("passed", !failed);
            }
            rec.emit(start);
            if failed {
                return Err(Failure::Verification("lattice verification failed".into()));
            }
        }
        Command::Integrate { p, delta, grid, samples, seed } => {
            let p = p.params()?;
            let delta = parse_delta(delta, &p)?;
            let spec = QuadratureSpec { max_points: budget.max_grid_points, ..QuadratureSpec::new(*grid, delta, p.t) };
            let r = sandwich_report(&p, &spec, *samples, *seed, &budget)?;
            let gauss = integrate_box_gaussian(&p, &spec)?;
            let (glo, ghi) = gaussian_box_bounds(&p, delta, p.t)?;
            let passed = r.passed();
            let violations = r.violations.len();
            let shown: Vec<_> = r.violations.iter().take(10).collect();
            Record::new("integrate", params_json(&p), "midpoint_tensor", "numerical")
                .seed(*seed)
                .with("delta", delta)
                .with("grid_per_axis", grid)
                .with("box_integral", r.integral)
                .with("box_integral_imag", r.integral_imag)
                .with("box_integral_coarse", r.integral_coarse)
                .with("margin", r.margin)
                .with("target_lower", r.target_lower)
                .with("target_upper", r.target_upper)
                .with("gaussian_integral", gauss)
                .with("gaussian_bounds", [glo, ghi])
                .with("admissible", r.admissible)
                .with("grid_points_checked", r.grid_points_checked)
                .with("random_points_checked", r.random_points_checked)
                .with("violation_count", violations)
                .with("violations", shown)
                .with("passed", passed)
                .emit(start);
            if !passed {
                return Err(Failure::Verification(format!("{violations} violations")));
            }
        }
        Command::Verify { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite, *seed, &budget)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            Record::new("verify", json!({ "suite": suite.to_string() }), "self_check", "numerical")
                .seed(*seed)
                .with("checks", &checks)
                .with("passed", failed.is_empty())
                .with("failed", &failed)
                .emit(start);
            if !failed.is_empty() {
                return Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))));
            }
        }
        Command::Sweep { g, k, lambda_min, lambda_max, out, method } => {
            if lambda_min > lambda_max || *lambda_min == 0 {
                return Err(Error::Domain("need 1 <= lambda-min <= lambda-max".into()).into());
            }
            let mut rows = Vec::new();
            for lambda in *lambda_min..=*lambda_max {
                let p = make_params(*g, *k, lambda)?;
                let (count, used) = count_with(&p, *method, &budget)?;
                let asym = asymptotic_count_log(&p);
                let exact_log = count.log10();
                let ratio = if count.is_zero() { 0.0 } else { 10f64.powf(exact_log - asym) };
                let delta = auto_delta(&p);
                let b = probability_bounds(&p, delta)?;
                rows.push(SweepRow {
                    lambda,
                    t: p.t,
                    exact: count.to_string(),
                    method: method_name(used),
                    log10_exact: exact_log,
                    log10_asymptotic: asym,
                    ratio,
                    delta,
                    lower: b.lower,
                    upper: b.upper,
                    rigorous: b.rigorous,
                });
            }
            rows.sort_by_key(|r| r.lambda);
            write_csv(out, &rows).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            Record::new(
                "sweep",
                json!({ "g": g, "k": k, "lambda_min": lambda_min, "lambda_max": lambda_max }),
                "exact_vs_asymptotic",
                "exact",
            )
            .with("rows", rows.len())
            .with("out", out.display().to_string())
            .with("ratios", rows.iter().map(|r| (r.lambda, r.ratio)).collect::<Vec<_>>())
            .emit(start);
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    lambda: u64,
    t: u64,
    exact: String,
    method: &'static str,
    log10_exact: f64,
    log10_asymptotic: f64,
    ratio: f64,
    delta: f64,
    lower: f64,
    upper: f64,
    rigorous: bool,
}

fn write_csv(path: &PathBuf, rows: &[SweepRow]) -> Result<(), Box<dyn std::error::Error>> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error ({}): {}", f.kind(), f.message());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_mapping() {
        assert_eq!(Failure::from(Error::Domain("x".into())).code(), 1);
        assert_eq!(Failure::Io("x".into()).code(), 1);
        assert_eq!(Failure::from(Error::Budget { what: "x", needed: 2, limit: 1 }).code(), 2);
        assert_eq!(Failure::from(Error::Integrity("x".into())).code(), 2);
        assert_eq!(Failure::Verification("x".into()).code(), 3);
    }

    #[test]
    fn delta_parsing() {
        let p = make_params(2, 3, 2).unwrap();
        assert_eq!(parse_delta("auto", &p).unwrap(), auto_delta(&p));
        assert_eq!(parse_delta("0.01", &p).unwrap(), 0.01);
        assert!(parse_delta("wide", &p).is_err());
    }
}
