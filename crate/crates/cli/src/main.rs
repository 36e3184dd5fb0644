//! `bwext`: order estimation, minimax design and estimator refitting for
//! ADC bandwidth-extension filters.
//!
//! Exit codes: 0 on success, 1 when a solver, search or fit fails, 2 for invalid input.

mod files;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bwext::curve_fit::{fit_parameters, generate_dataset, FitOptions, FitRecord, SweepConfig, SweepRanges};
use bwext::order_estimation::{select_region, EstimateQuery};
use bwext::response_eval::measure_ripples;
use bwext::{design_filter, estimate_order, find_minimal_order_from, round_order, DesignOutcome, Region};
use clap::{Args, Parser, Subcommand};

use files::SpecFile;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<bwext::Error> for CliError {
    fn from(e: bwext::Error) -> Self {
        use bwext::Error::*;
        let message = match &e {
            // The bare message reads better for the common precondition failures.
            EstimatorDomain(m) | Config(m) | Domain(m) => m.clone(),
            _ => e.to_string(),
        };
        let code = match e {
            Domain(_) | Config(_) | EstimatorDomain(_) => 2,
            Solver { .. } | SearchExhausted { .. } | FitNotConverged { .. } => 1,
        };
        CliError { code, message }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::invalid(format!("csv: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "bwext", version, about = "Design FIR filters that extend the bandwidth of an ADC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the minimal filter order for a spec file.
    Estimate {
        spec: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Design a filter of a given order.
    Design {
        spec: PathBuf,
        #[arg(long)]
        order: usize,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Find the smallest order that meets the spec, starting at the estimate.
    Search {
        spec: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Start at this order instead of the estimate.
        #[arg(long)]
        start: Option<usize>,
        /// Highest order to try.
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Measure the ripples of a coefficient file against a spec file.
    Measure {
        spec: PathBuf,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Design the minimal-order filter at every point of a parameter sweep.
    Dataset(DatasetArgs),
    /// Refit one region's estimator constants to a dataset.
    Fit(FitArgs),
}

#[derive(Args)]
struct EstimatorArgs {
    /// Estimator constants; the published values when omitted.
    #[arg(long)]
    param_file: Option<PathBuf>,
    /// Accept queries outside the box the constants were fitted on.
    #[arg(long)]
    allow_extrapolation: bool,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the coefficients here, one per line.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Write the verification-grid response here as CSV.
    #[arg(long)]
    response: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Weighting region, 1 (W_r ≥ 1) or 2 (W_r ≤ 1).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    region: u8,
    /// Points per input: dw, wr, alpha, p_delta.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 10, 10, 10])]
    counts: Vec<usize>,
    #[arg(long, value_name = "LO,HI", value_delimiter = ',')]
    dw: Option<Vec<f64>>,
    #[arg(long, value_name = "LO,HI", value_delimiter = ',')]
    wr: Option<Vec<f64>>,
    #[arg(long, value_name = "LO,HI", value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_name = "LO,HI", value_delimiter = ',')]
    p_delta: Option<Vec<f64>>,
    /// Passband edge in units of π.
    #[arg(long, default_value_t = 0.8)]
    omega_e: f64,
    #[arg(long)]
    n_grid: Option<usize>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_verify: Option<usize>,
    #[arg(long)]
    min_density: Option<f64>,
    /// Constants used to seed each search.
    #[arg(long)]
    param_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    dataset: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    region: u8,
    /// Starting constants; the other region is copied to the output unchanged.
    #[arg(long)]
    param_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = FitOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = FitOptions::default().starts)]
    starts: usize,
    #[arg(long, default_value_t = FitOptions::default().max_evaluations)]
    max_evaluations: usize,
    /// Fit against the specified rather than the achieved ripple product.
    #[arg(long)]
    use_target_p_delta: bool,
}

fn region_of(n: u8) -> Region {
    if n == 1 {
        Region::One
    } else {
        Region::Two
    }
}

fn query(s: &SpecFile, allow_extrapolation: bool) -> Result<EstimateQuery, CliError> {
    let q = EstimateQuery::from_design(&s.spec, &s.model)?;
    if allow_extrapolation {
        select_region(q.wr)?;
    } else {
        q.check_box()?;
    }
    Ok(q)
}

fn estimate(s: &SpecFile, est: &EstimatorArgs) -> Result<f64, CliError> {
    let params = files::load_params(est.param_file.as_deref())?;
    Ok(estimate_order(&query(s, est.allow_extrapolation)?, &params)?)
}

fn report(o: &DesignOutcome) {
    println!("delta* = {:.6e}", o.delta_star);
    println!("passband ripple = {:.2} dB", o.ripples.passband_db());
    println!("stopband ripple = {:.2} dB", o.ripples.stopband_db());
    println!("meets_spec = {}", o.meets_spec);
}

fn write_outputs(s: &SpecFile, o: &DesignOutcome, out: &OutputArgs) -> Result<(), CliError> {
    if let Some(p) = &out.coeffs {
        files::write(p, files::format_coeffs(&o.filter))?;
    }
    if let Some(p) = &out.response {
        files::write(p, files::response_csv(&o.filter, &s.model, &s.spec, s.grid.n_verify)?)?;
    }
    Ok(())
}

fn range(name: &str, v: &Option<Vec<f64>>, default: (f64, f64)) -> Result<(f64, f64), CliError> {
    match v.as_deref() {
        None => Ok(default),
        Some(&[lo, hi]) => Ok((lo, hi)),
        Some(_) => Err(CliError::invalid(format!("--{name} takes LO,HI"))),
    }
}

fn cmd_dataset(a: &DatasetArgs) -> Result<(), CliError> {
    let region = region_of(a.region);
    let d = SweepRanges::region(region);
    let ranges = SweepRanges {
        dw: range("dw", &a.dw, d.dw)?,
        wr: range("wr", &a.wr, d.wr)?,
        alpha: range("alpha", &a.alpha, d.alpha)?,
        p_delta: range("p-delta", &a.p_delta, d.p_delta)?,
    };
    let counts: [usize; 4] = a
        .counts
        .as_slice()
        .try_into()
        .map_err(|_| CliError::invalid("--counts takes four values"))?;
    let mut cfg = SweepConfig::new(ranges, counts);
    cfg.passband_edge = a.omega_e * std::f64::consts::PI;
    if let Some(n) = a.n_grid {
        cfg.grid.n_omega = n;
        cfg.grid.n_verify = cfg.grid.n_verify.max(4 * n);
    }
    if let Some(n) = a.n_theta {
        cfg.grid.n_theta = n;
    }
    if let Some(n) = a.n_verify {
        cfg.grid.n_verify = n;
    }
    if let Some(d) = a.min_density {
        cfg.grid.min_density = d;
    }
    let params = files::load_params(a.param_file.as_deref())?;
    let records = generate_dataset(&cfg, &params)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &records {
        w.serialize(r)?;
    }
    let data = w.into_inner().map_err(|e| CliError::failure(format!("dataset buffer: {e}")))?;
    files::write(&a.out, data)?;
    println!("{} records written to {}", records.len(), a.out.display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Vec<FitRecord>, CliError> {
    let text = files::read(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<FitRecord>, _>>()?)
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let data = load_dataset(&a.dataset)?;
    let base = files::load_params(a.param_file.as_deref())?;
    let opts = FitOptions {
        seed: a.seed,
        starts: a.starts,
        max_evaluations: a.max_evaluations,
        use_target_p_delta: a.use_target_p_delta,
    };
    let fit = fit_parameters(&data, region_of(a.region), &base, &opts)?;
    println!("epsilon = {:.2}", fit.epsilon);
    let text = files::format_params(&fit.params);
    match &a.out {
        Some(p) => files::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate { spec, est, overrides } => {
            let s = SpecFile::load(&spec, &overrides)?;
            let n = estimate(&s, &est)?;
            println!("N_est = {n:.2}, rounded = {}", round_order(n));
        }
        Command::Design { spec, order, out, overrides } => {
            let s = SpecFile::load(&spec, &overrides)?;
            let o = design_filter(&s.spec, &s.model, order, &s.grid)?;
            println!("N = {order}");
            report(&o);
            write_outputs(&s, &o, &out)?;
        }
        Command::Search { spec, est, start, n_max, out, overrides } => {
            let s = SpecFile::load(&spec, &overrides)?;
            let n_est = match start {
                Some(_) => None,
                None => Some(estimate(&s, &est)?),
            };
            let start = start.unwrap_or_else(|| round_order(n_est.unwrap_or_default()));
            let r = find_minimal_order_from(&s.spec, &s.model, &s.grid, start, n_max)?;
            if let Some(n) = n_est {
                println!("N_est = {n:.2}, rounded = {}", round_order(n));
            }
            println!("n_min = {}", r.n_min);
            println!("orders designed = {}", r.visited.len());
            report(&r.outcome);
            write_outputs(&s, &r.outcome, &out)?;
        }
        Command::Measure { spec, coeffs, overrides } => {
            let s = SpecFile::load(&spec, &overrides)?;
            let f = files::parse_coeffs(&files::read(&coeffs)?, &coeffs.display().to_string())?;
            let r = measure_ripples(&f, &s.model, &s.spec, s.grid.n_verify);
            println!("N = {}", f.order());
            println!("passband ripple = {:.12} dB", r.passband_db());
            println!("stopband ripple = {:.12} dB", r.stopband_db());
            println!("meets_spec = {}", r.passband <= s.spec.delta_p && r.stopband <= s.spec.delta_s);
        }
        Command::Dataset(a) => cmd_dataset(&a)?,
        Command::Fit(a) => cmd_fit(&a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
