//! Command-line driver for the dirac-ee library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use dirac_ee::area_law_harness::{compare_report, run_sweeps, SweepReport};
use dirac_ee::config::ExperimentConfig;
use dirac_ee::container::{params_digest, Container};
use dirac_ee::entropy_functions::{RenyiOrder, SpectralFunction};
use dirac_ee::lattice_model::{
    correlation_matrix, entropies, schatten_commutator_slope, LatticeKernel,
};
use dirac_ee::linalg::use_sequential_kernels;
use dirac_ee::verification::{self, Check};
use dirac_ee::widom_coefficient::{compute_widom, WidomResult};
use dirac_ee::Error;

/// Transverse radii of the line-symbol identity check.
const F0_RADII: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

#[derive(Parser, Debug)]
#[command(name = "dirac-ee", version, about = "Area-law coefficients and lattice entanglement entropies of the regularized Dirac vacuum")]
struct Cli {
    /// Flat `key = value` config file, or JSON if the name ends in .json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Renyi orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Invariant suite for the momentum symbol and the entropy functions.
    SymbolCheck {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 1000)]
        momenta: usize,
        #[arg(long, default_value_t = 100)]
        rotations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Widom area-law coefficients.
    Coeff {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Lattice entropy of the configured region.
    Entropy {
        #[command(flatten)]
        overrides: Overrides,
        /// Also write the kernel table and correlation matrix containers.
        #[arg(long)]
        export: bool,
    },
    /// Area-law sweep with fit and comparison against the Widom coefficient.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long = "L", value_delimiter = ',', num_args = 1..)]
        l_values: Option<Vec<f64>>,
        /// Reuse coefficients written by `coeff` instead of recomputing them.
        #[arg(long)]
        coeff: Option<PathBuf>,
    },
    /// Analytic-oracle checks.
    Verify {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Schatten quasi-norm slope of the region commutator.
    Diagnostics {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long = "alpha", value_delimiter = ',', num_args = 1..)]
        alphas: Option<Vec<f64>>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidRegion(_)
            | Error::Resolution { .. }
            | Error::Size(_)
            | Error::Precondition(_)
            | Error::Comparison(_)
            | Error::UnsupportedOrder { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

struct Context {
    config: ExperimentConfig,
    hash: String,
    output: PathBuf,
}

impl Context {
    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> std::result::Result<PathBuf, Failure> {
        let text = serde_json::to_string_pretty(body).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> std::result::Result<PathBuf, Failure> {
        let io = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", self.output.display()));
        std::fs::create_dir_all(&self.output).map_err(io)?;
        let path = self.output.join(name);
        std::fs::write(&path, text).map_err(io)?;
        if name.ends_with(".json") {
            self.write_metadata(name)?;
        }
        Ok(path)
    }

    // Timestamps live beside the results so the results stay reproducible.
    fn write_metadata(&self, name: &str) -> std::result::Result<(), Failure> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = json!({
            "output": name,
            "config_hash": self.hash,
            "version": env!("CARGO_PKG_VERSION"),
            "created_unix": stamp,
        });
        let path = self.output.join(name.replace(".json", ".meta.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&meta).unwrap_or_default() + "\n")
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }
}

fn load_config(cli: &Cli, overrides: &Overrides) -> std::result::Result<Context, Failure> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_flat_str("")?,
    };
    if let Some(k) = &overrides.kappa {
        config.kappa_list = k.clone();
    }
    if let Some(e) = overrides.epsilon {
        config.epsilon = Some(e);
    }
    if let Some(m) = overrides.mass {
        config.mass = m;
    }
    if let Some(o) = &cli.output {
        config.output_dir = o.clone();
    }
    config.validate()?;
    let hash = config.hash()?;
    let output = config.output_dir.clone();
    Ok(Context { config, hash, output })
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!(
            "[{}] {}: {:.3e} (tolerance {:.1e}) {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.detail
        );
    }
    checks.iter().all(|c| c.pass)
}

fn symbol_check(ctx: &Context, momenta: usize, rotations: usize, seed: u64) -> Outcome {
    let params = ctx.config.dirac_params()?;
    let mut checks = verification::symbol_checks(&params, momenta, rotations, seed)?;
    checks.extend(verification::entropy_fixtures()?);
    let pass = report_checks(&checks);
    ctx.write_json(
        "symbol_check.json",
        &json!({ "config_hash": ctx.hash, "params": params, "checks": checks, "pass": pass }),
    )?;
    Ok(pass)
}

fn widom_results(ctx: &Context) -> std::result::Result<Vec<WidomResult>, Failure> {
    let params = ctx.config.dirac_params()?;
    Ok(compute_widom(&params, &ctx.config.kappa_list, &ctx.config.profile_spec())?)
}

fn coeff(ctx: &Context) -> Outcome {
    let results = widom_results(ctx)?;
    for r in &results {
        println!(
            "kappa {}: M = {:.6e} +- {:.1e}, M(f0) = {:.6e}, positivity_ok = {}",
            r.kappa, r.coefficient, r.coefficient_error, r.f0_coefficient, r.positivity_ok
        );
    }
    let path = ctx.write_json("coeff.json", &json!({ "config_hash": ctx.hash, "results": results }))?;
    println!("wrote {}", path.display());
    Ok(true)
}

fn build_kernel(ctx: &Context) -> std::result::Result<LatticeKernel, Failure> {
    let params = ctx.config.dirac_params()?;
    let (lattice, options) = ctx.config.torus()?;
    let kernel = LatticeKernel::build(&params, &lattice, &options)?;
    for w in &kernel.warnings {
        eprintln!("warning: {w}");
    }
    Ok(kernel)
}

fn orders(ctx: &Context) -> std::result::Result<Vec<RenyiOrder>, Failure> {
    Ok(ctx
        .config
        .kappa_list
        .iter()
        .map(|&k| RenyiOrder::new(k))
        .collect::<dirac_ee::Result<_>>()?)
}

fn entropy(ctx: &Context, export: bool) -> Outcome {
    let kernel = build_kernel(ctx)?;
    let generator = ctx.config.region()?;
    let region = generator.at(&kernel, 1.0)?;
    let c = correlation_matrix(&kernel, &region)?;
    for w in c.warnings.iter().skip(kernel.warnings.len()) {
        eprintln!("warning: {w}");
    }
    let functions: Vec<SpectralFunction> = orders(ctx)?
        .into_iter()
        .map(|kappa| SpectralFunction::Renyi { kappa })
        .collect();
    let report = entropies(&c, &functions, &kernel)?;
    for v in &report.values {
        println!("{}: S = {:.10e}", v.function.label(), v.value);
    }
    let pass = report.values.iter().all(|v| v.value >= -ctx.config.tolerances.nonnegativity);
    let path = ctx.write_json(
        "entropy.json",
        &json!({
            "config_hash": ctx.hash,
            "params": kernel.params,
            "lattice": kernel.lattice,
            "region": generator,
            "sites": region.sites.len(),
            "boundary_area": region.boundary_area,
            "entropies": report,
            "warnings": c.warnings,
            "nonnegative": pass,
        }),
    )?;
    println!("wrote {}", path.display());
    if export {
        let digest = params_digest(ctx.hash.as_bytes());
        for (name, container) in [
            ("kernel.bin", Container::kernel_table(&kernel, digest)?),
            ("correlation.bin", Container::correlation_matrix(&c, digest)?),
        ] {
            let path = ctx.output.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            container.write(std::io::BufWriter::new(file))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(pass)
}

fn load_coefficients(path: &Path) -> std::result::Result<Vec<WidomResult>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    serde_json::from_value(v["results"].clone()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn sweep(ctx: &Context, l_values: Option<Vec<f64>>, coeff_path: Option<&Path>) -> Outcome {
    let kernel = build_kernel(ctx)?;
    let generator = ctx.config.region()?;
    let ls = match l_values {
        Some(l) => l,
        None => ctx.config.l_values()?,
    };
    let widom = match coeff_path {
        Some(p) => load_coefficients(p)?,
        None => widom_results(ctx)?,
    };
    let tolerance = ctx.config.tolerances.area_law;
    let mut all_pass = true;
    let records = run_sweeps(&kernel, &generator, &ls, &orders(ctx)?)?;
    let mut printed = kernel.warnings.clone();
    for record in records {
        let order = record.order;
        for w in &record.warnings {
            if !printed.contains(w) {
                eprintln!("warning: {w}");
                printed.push(w.clone());
            }
        }
        let w = widom
            .iter()
            .find(|w| (w.kappa - order.kappa()).abs() < 1e-12)
            .ok_or_else(|| Failure::Usage(format!("no coefficient for kappa = {}", order.kappa())))?;
        let comparison = compare_report(&record, w, tolerance)?;
        let mut report = SweepReport::new(&record, Some(&comparison), tolerance);
        report.config_hash = Some(ctx.hash.clone());
        let stem = format!("sweep_kappa_{}", order.kappa());
        report.write_all(&ctx.output, &stem)?;
        ctx.write_metadata(&format!("{stem}.json"))?;
        println!(
            "[{}] kappa {}: c2 = {:.6e}, prediction = {:.6e}, relative gap = {:.3} (tolerance {})",
            if comparison.pass { "PASS" } else { "FAIL" },
            order.kappa(),
            record.fit.c2,
            comparison.prediction,
            comparison.relative_gap,
            tolerance
        );
        all_pass &= comparison.pass;
    }
    Ok(all_pass)
}

fn verify(ctx: &Context) -> Outcome {
    let t = &ctx.config.tolerances;
    let params = ctx.config.dirac_params()?;
    let spec = ctx.config.profile_spec();
    let mut checks = verification::symbol_checks(&params, 1000, 100, 0)?;
    checks.extend(verification::entropy_fixtures()?);
    checks.extend(verification::gaussian_fixtures(t.gaussian_kernel, t.gaussian_cross_norm)?);
    checks.push(verification::f0_identity(&params, &F0_RADII, &spec.section, t.f0_identity)?);
    let results = compute_widom(&params, &ctx.config.kappa_list, &spec)?;
    checks.extend(verification::positivity(&results)?);
    let pass = report_checks(&checks);
    ctx.write_json(
        "verify.json",
        &json!({ "config_hash": ctx.hash, "params": params, "checks": checks, "pass": pass }),
    )?;
    Ok(pass)
}

fn diagnostics(ctx: &Context, sigma: Option<f64>, alphas: Option<Vec<f64>>) -> Outcome {
    let kernel = build_kernel(ctx)?;
    let generator = ctx.config.region()?;
    let sigma = sigma.unwrap_or(ctx.config.diagnostics.sigma);
    let alphas = alphas.unwrap_or_else(|| ctx.config.diagnostics.alphas.clone());
    let fit = schatten_commutator_slope(&kernel, sigma, &alphas, |a| generator.at(&kernel, a))?;
    let expected = 2.0;
    let tol = ctx.config.tolerances.schatten_slope;
    let pass = (fit.slope - expected).abs() <= tol;
    println!(
        "[{}] slope = {:.4} (expected {expected} +- {tol}), residual {:.2e}",
        if pass { "PASS" } else { "FAIL" },
        fit.slope,
        fit.residual
    );
    ctx.write_json(
        "diagnostics.json",
        &json!({ "config_hash": ctx.hash, "params": kernel.params, "fit": fit, "expected_slope": expected, "tolerance": tol, "pass": pass }),
    )?;
    Ok(pass)
}

fn run(cli: &Cli) -> Outcome {
    let overrides = match &cli.command {
        Command::SymbolCheck { overrides, .. }
        | Command::Coeff { overrides }
        | Command::Entropy { overrides, .. }
        | Command::Sweep { overrides, .. }
        | Command::Verify { overrides }
        | Command::Diagnostics { overrides, .. } => overrides.clone(),
    };
    let ctx = load_config(cli, &overrides)?;
    match &cli.command {
        Command::SymbolCheck { momenta, rotations, seed, .. } => symbol_check(&ctx, *momenta, *rotations, *seed),
        Command::Coeff { .. } => coeff(&ctx),
        Command::Entropy { export, .. } => entropy(&ctx, *export),
        Command::Sweep { l_values, coeff, .. } => sweep(&ctx, l_values.clone(), coeff.as_deref()),
        Command::Verify { .. } => verify(&ctx),
        Command::Diagnostics { sigma, alphas, .. } => diagnostics(&ctx, *sigma, alphas.clone()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    // dense kernels run single-threaded so results do not depend on --jobs
    use_sequential_kernels();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
