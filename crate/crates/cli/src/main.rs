use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use eotsc::bounds::{corollary_bound, theorem1_bound, BoundInputs, CorollaryKind, CorollaryParams};
use eotsc::covering::greedy_cover;
use eotsc::eot::{solve, SolverConfig};
use eotsc::harness::{
    checks, compare_to_bound, export, reference_supports, run_experiment, write_plot_tsv, ExperimentConfig,
    ExportFormat, PLOT_FILE,
};
use eotsc::measures::{DiscreteMeasure, PointCloud, TailProfile};
use eotsc::CostSpec;

#[derive(Parser)]
#[command(name = "eotsc", version, about = "Entropic optimal transport and sample-complexity bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one EOT instance between two measure files (CSV rows `x0,…,weight`).
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iterations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the main bound, or a corollary with --corollary.
    Bound(BoundArgs),
    /// Greedy covering numbers of a point file (CSV rows of coordinates).
    Cover {
        #[arg(long)]
        points: PathBuf,
        /// Covering radius; repeat for several.
        #[arg(long, required = true)]
        delta: Vec<f64>,
        /// Include the centers in JSON output.
        #[arg(long)]
        centers: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run every randomized verification sweep.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smaller instance counts for a fast smoke run.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Full Monte Carlo run from a JSON experiment config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Replace the cost by |x−y|^p.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    c_global: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BoundArgs {
    /// JSON file with the bound inputs; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_corollary)]
    corollary: Option<CorollaryKind>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    c_global: Option<f64>,
    /// Tail profile `c,alpha` of μ.
    #[arg(long, value_parser = parse_profile)]
    profile_mu: Option<TailProfile>,
    #[arg(long, value_parser = parse_profile)]
    profile_nu: Option<TailProfile>,
    /// Measure files whose atoms are the supports.
    #[arg(long)]
    support_mu: Option<PathBuf>,
    #[arg(long)]
    support_nu: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long)]
    r_nu: Option<f64>,
    #[arg(long)]
    moment_nu: Option<f64>,
    #[arg(long)]
    manifold_dim: Option<f64>,
    #[arg(long)]
    manifold_constant: Option<f64>,
}

fn parse_corollary(s: &str) -> Result<CorollaryKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_profile(s: &str) -> Result<TailProfile, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [c, alpha] = parts.as_slice() else {
        return Err("expected `c,alpha`".into());
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    TailProfile::custom(num(c)?, num(alpha)?).map_err(|e| e.to_string())
}

fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DiscreteMeasure::read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn read_points(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PointCloud::read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn emit(common: &Common, name: &str, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match &common.output {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(f)),
        None => Ok(f()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(mu: &Path, nu: &Path, p: f64, epsilon: f64, tolerance: f64, max_iterations: usize, common: &Common) -> Result<()> {
    let (mu, nu) = (read_measure(mu)?, read_measure(nu)?);
    let cost = CostSpec::power(p)?;
    let cfg = SolverConfig { tolerance, max_iterations, epsilon };
    let sol = with_threads(common.threads, || solve(&mu, &nu, &cost, &cfg))??;
    let summary: serde_json::Value = serde_json::from_str(&sol.to_json()?)?;
    emit(common, "solution.json", &summary)?;
    if let (Format::Csv, Some(dir)) = (common.format, &common.output) {
        let path = dir.join("plan.csv");
        let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        sol.write_plan_csv(file)?;
    }
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let support = |p: &Option<PathBuf>| -> Result<Option<PointCloud>> {
        p.as_deref().map(|p| read_measure(p).map(|m| m.support())).transpose()
    };
    let (support_mu, support_nu) = (support(&args.support_mu)?, support(&args.support_nu)?);
    let common = Common { output: None, format: Format::Json, threads: None };

    if let Some(kind) = args.corollary {
        let (Some(n), Some(epsilon)) = (args.n, args.epsilon) else {
            bail!("--corollary needs --n and --epsilon");
        };
        let mut params = CorollaryParams::new(n, epsilon, args.p.unwrap_or(2.0));
        params.c_global = args.c_global.unwrap_or(1.0);
        params.sigma = args.sigma;
        params.dim = args.dim;
        params.profile_mu = args.profile_mu.clone();
        params.support_mu = support_mu;
        params.support_nu = support_nu;
        params.atoms = args.atoms;
        params.r_nu = args.r_nu;
        params.moment_nu = args.moment_nu;
        params.manifold_dim = args.manifold_dim;
        params.manifold_constant = args.manifold_constant;
        let b = corollary_bound(kind, &params)?;
        return emit(&common, "bound.json", &serde_json::to_value(b)?);
    }

    let mut inputs: BoundInputs = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let (Some(pm), Some(pn), Some(n), Some(eps)) =
                (args.profile_mu.clone(), args.profile_nu.clone(), args.n, args.epsilon)
            else {
                bail!("without --config, need --profile-mu, --profile-nu, --n and --epsilon");
            };
            BoundInputs::new(pm, pn, &CostSpec::power(args.p.unwrap_or(2.0))?, eps, n)
        }
    };
    if let Some(n) = args.n {
        inputs.n = n;
    }
    if let Some(eps) = args.epsilon {
        inputs.epsilon = eps;
    }
    if let Some(p) = args.p {
        inputs.p = p;
        inputs.c_p = p;
    }
    if let Some(c) = args.c_global {
        inputs.c_global = c;
    }
    if let Some(pm) = &args.profile_mu {
        inputs.profile_mu = pm.clone();
    }
    if let Some(pn) = &args.profile_nu {
        inputs.profile_nu = pn.clone();
    }
    let (Some(smu), Some(snu)) = (support_mu, support_nu) else {
        bail!("the main bound needs --support-mu and --support-nu");
    };
    let b = theorem1_bound(&inputs, &smu, &snu)?;
    let mut value = serde_json::to_value(&b)?;
    value["covering_factor"] = json!(b.covering_factor());
    emit(&common, "bound.json", &value)
}

fn cmd_cover(points: &Path, deltas: &[f64], centers: bool, common: &Common) -> Result<()> {
    let cloud = read_points(points)?;
    let mut results = Vec::new();
    for &delta in deltas {
        if delta.is_nan() || delta <= 0.0 {
            bail!("delta must be positive, got {delta}");
        }
        let cover = greedy_cover(&cloud, delta);
        results.push(if centers {
            serde_json::to_value(&cover)?
        } else {
            json!({ "delta": delta, "count": cover.count })
        });
    }
    if let Format::Csv = common.format {
        let mut text = String::from("delta,count\n");
        for r in &results {
            text.push_str(&format!("{},{}\n", r["delta"], r["count"]));
        }
        return match &common.output {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join("cover.csv");
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    emit(common, "cover.json", &serde_json::Value::Array(results))
}

fn cmd_check(seed: u64, quick: bool, common: &Common) -> Result<bool> {
    let sizes = if quick {
        checks::SweepSizes {
            potentials: 4,
            scaling: 5,
            density: 4,
            truncation: 50,
            stability: 50,
        }
    } else {
        checks::SweepSizes::default()
    };
    let outcomes = with_threads(common.threads, || checks::run_all(seed, sizes))??;
    let ok = outcomes.iter().all(|o| o.passed());
    match common.format {
        Format::Json => emit(common, "checks.json", &serde_json::to_value(&outcomes)?)?,
        Format::Csv => {
            let mut text = String::from("name,cases,failures,worst,status\n");
            for o in &outcomes {
                let status = if o.passed() { "pass" } else { "FAIL" };
                text.push_str(&format!("{},{},{},{:e},{status}\n", o.name, o.cases, o.failures, o.worst));
            }
            match &common.output {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("checks.csv"), text)?;
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(ok)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let common = &args.common;
    let config = &args.config;
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.p {
        cfg.cost = CostSpec::power(v)?;
    }
    if let Some(v) = args.replications {
        cfg.replications = v;
    }
    if let Some(v) = args.n_grid.clone() {
        cfg.n_grid = v;
    }
    if let Some(v) = args.c_global {
        cfg.c_global = v;
    }
    cfg.validate()?;

    let result = with_threads(common.threads, || run_experiment(&cfg))??;
    if !result.failures.is_empty() {
        eprintln!(
            "warning: {} of {} cells failed and were excluded",
            result.failures.len(),
            result.failures.len() + result.per_cell.len()
        );
    }
    let dir = common.output.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut written = export(&result, common.format.into(), &dir)?;
    let plot = dir.join(PLOT_FILE);
    write_plot_tsv(&result, &plot)?;
    written.push(plot);

    let (smu, snu) = reference_supports(&cfg)?;
    let comparison = compare_to_bound(&result, &cfg.bound_inputs(cfg.n_grid[0]), &smu, &snu)?;
    let report = json!({
        "rate": result.rate,
        "failures": result.failures.len(),
        "comparison": {
            "min_c_global": comparison.min_c_global,
            "ratio_drift": comparison.ratio_drift,
            "root_n_drift": comparison.root_n_drift,
            "shape_ok": comparison.shape_ok,
        },
        "files": written,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { mu, nu, p, epsilon, tolerance, max_iterations, common } => {
            cmd_solve(&mu, &nu, p, epsilon, tolerance, max_iterations, &common)?
        }
        Command::Bound(args) => cmd_bound(&args)?,
        Command::Cover { points, delta, centers, common } => cmd_cover(&points, &delta, centers, &common)?,
        Command::Check { seed, quick, common } => return cmd_check(seed, quick, &common),
        Command::Experiment(args) => cmd_experiment(args)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
