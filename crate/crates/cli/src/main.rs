//! Command-line front end: single runs, convergence sweeps, the randomized
//! verification suite, and Chebyshev tables.
//!
//! Exit codes: 0 success, 1 check/numerical failure, 2 usage or config error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hypersplit::chebyshev;
use hypersplit::mms::{self, fmt17};
use hypersplit::oracle;
use hypersplit::scheme::{self, OperatorForm, SchemeConfig};
use hypersplit::splitting::Splitting;
use hypersplit::GridFunction;

/// Output directory override when `--out` is not given.
const OUT_ENV: &str = "HYPERSPLIT_OUT";

#[derive(Parser)]
#[command(name = "hypersplit", version, about = "Parallel additive-splitting solver for second-order evolution equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key=value config file; command-line flags win on conflict
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel parts (0 = auto)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (falls back to $HYPERSPLIT_OUT, then the cwd)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case at one resolution and write an error summary
    Run {
        #[command(flatten)]
        common: Common,
        /// Case label: test1, test2 or smooth
        #[arg(long)]
        case: Option<String>,
        /// Number of grid divisions per direction (h = 1/n)
        #[arg(long)]
        n: Option<usize>,
        /// Time step override (default tau = h; must divide the final time)
        #[arg(long)]
        tau: Option<f64>,
        /// Splitting weights, comma-separated (default uniform)
        #[arg(long)]
        eta: Option<String>,
        /// Operator treatment: averaged (second order) or implicit
        #[arg(long)]
        variant: Option<String>,
        /// Taylor-corrected first layer
        #[arg(long)]
        corrected_start: bool,
        /// Write one CSV field snapshot per time level
        #[arg(long)]
        store_trajectory: bool,
    },
    /// Refinement sweep with fitted convergence order
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        case: Option<String>,
        /// Comma-separated divisions list, e.g. 20,40,80,160
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Randomized operator-identity/inequality suite; JSON-lines report
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of randomized workspaces
        #[arg(long)]
        count: Option<usize>,
        /// Max polynomial degree for propagator bounds
        #[arg(long)]
        k_max: Option<usize>,
        /// Test hook: report a deliberately invalid weight vector
        #[arg(long, hide = true)]
        inject_broken_weights: bool,
    },
    /// Chebyshev polynomial table: k, x, value, bound
    Cheb {
        #[command(flatten)]
        common: Common,
        /// Inclusive degree range, e.g. 0..5
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        x: Option<f64>,
        /// Second recurrence argument (1 = classical scaling)
        #[arg(long)]
        y: Option<f64>,
        /// Evaluate through the closed form instead of the recurrence
        #[arg(long)]
        classical: bool,
    },
}

/// Errors that map to exit code 2 (usage/config) vs 1 (run/check failure).
enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
    fn failure(msg: impl Into<String>) -> Self {
        Self::Failure(msg.into())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Flat `key = value` file, one pair per line, '#' comments. Keys must be
/// drawn from `allowed`.
fn parse_config(path: &Path, allowed: &[&str]) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!(
                "{}:{}: expected key = value, got {raw:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(CliError::usage(format!(
                "{}:{}: unknown key {key:?} (allowed: {})",
                path.display(),
                lineno + 1,
                allowed.join(", ")
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(
    cfg: &BTreeMap<String, String>,
    key: &str,
) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| CliError::usage(format!("config key {key} = {raw:?}: {e}"))),
    }
}

fn init_threads(threads: usize) -> CliResult<()> {
    if threads == 0 {
        return Ok(()); // rayon default: one per logical cpu
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

fn out_dir(flag: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn parse_variant(raw: &str) -> CliResult<OperatorForm> {
    match raw {
        "averaged" => Ok(OperatorForm::Averaged),
        "implicit" => Ok(OperatorForm::Implicit),
        other => Err(CliError::usage(format!(
            "unknown variant {other:?} (expected averaged or implicit)"
        ))),
    }
}

fn parse_etas(raw: &str) -> CliResult<Vec<f64>> {
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| CliError::usage(format!("weight {p:?}: {e}")))
        })
        .collect()
}

fn parse_n_list(raw: &str) -> CliResult<Vec<usize>> {
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| CliError::usage(format!("division count {p:?}: {e}")))
        })
        .collect()
}

/// Inclusive `a..b` degree range.
fn parse_k_range(raw: &str) -> CliResult<(usize, usize)> {
    let (lo, hi) = raw
        .split_once("..")
        .ok_or_else(|| CliError::usage(format!("expected a..b degree range, got {raw:?}")))?;
    let lo = lo
        .trim()
        .parse()
        .map_err(|e| CliError::usage(format!("range start {lo:?}: {e}")))?;
    let hi = hi
        .trim()
        .parse()
        .map_err(|e| CliError::usage(format!("range end {hi:?}: {e}")))?;
    if hi < lo {
        return Err(CliError::usage(format!("empty degree range {raw:?}")));
    }
    Ok((lo, hi))
}

const RUN_KEYS: &[&str] = &[
    "case",
    "n",
    "tau",
    "eta",
    "variant",
    "threads",
    "out",
    "corrected_start",
    "store_trajectory",
];

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    common: Common,
    case: Option<String>,
    n: Option<usize>,
    tau: Option<f64>,
    eta: Option<String>,
    variant: Option<String>,
    corrected_start: bool,
    store_trajectory: bool,
) -> CliResult<()> {
    let cfg = match &common.config {
        Some(path) => parse_config(path, RUN_KEYS)?,
        None => BTreeMap::new(),
    };
    let case_label = case
        .or(cfg.get("case").cloned())
        .ok_or_else(|| CliError::usage("missing case label (--case test1|test2|smooth)"))?;
    let n = n.or(config_get(&cfg, "n")?).unwrap_or(20);
    let tau_override = tau.or(config_get(&cfg, "tau")?);
    let eta_raw = eta.or(cfg.get("eta").cloned());
    let variant_raw = variant.or(cfg.get("variant").cloned());
    let corrected_start = corrected_start || config_get(&cfg, "corrected_start")?.unwrap_or(false);
    let store_trajectory =
        store_trajectory || config_get(&cfg, "store_trajectory")?.unwrap_or(false);
    let threads = common.threads.or(config_get(&cfg, "threads")?).unwrap_or(0);
    let out = out_dir(common.out.or(cfg.get("out").map(PathBuf::from)))?;
    init_threads(threads)?;

    let form = match variant_raw {
        Some(raw) => parse_variant(&raw)?,
        None => OperatorForm::default(),
    };
    let case = mms::case_by_label(&case_label)
        .ok_or_else(|| CliError::usage(format!("unknown case {case_label:?}")))?;
    let etas = eta_raw.map(|raw| parse_etas(&raw)).transpose()?;
    let etas_echo = etas.clone();

    let setup = mms::assemble(&case, n, etas)
        .map_err(|e| CliError::usage(format!("invalid splitting: {e}")))?;
    let tau = tau_override.unwrap_or(1.0 / n as f64);
    let n_steps = (case.t_final / tau).round() as usize;
    let scheme_cfg = SchemeConfig::with_final_time(tau, n_steps.max(2), case.t_final)
        .map_err(|e| CliError::usage(format!("time grid: {e}")))?
        .form(form)
        .corrected_start(corrected_start);
    let start = std::time::Instant::now();
    let traj = scheme::run(&setup.splitting, &setup.problem, &scheme_cfg)
        .map_err(|e| CliError::failure(format!("run failed: {e}")))?;
    let runtime_s = start.elapsed().as_secs_f64();
    let (max_error, l2_error) = mms::measure_error(&traj, &case, setup.grid);
    let scale = mms::solution_scale(&case, setup.grid, tau, n_steps);

    let etas_line = etas_echo
        .unwrap_or_else(|| setup.splitting.etas().to_vec())
        .iter()
        .map(|e| fmt17(*e))
        .collect::<Vec<_>>()
        .join(",");
    let summary = out.join("summary.txt");
    let mut f = fs::File::create(&summary)
        .map_err(|e| CliError::failure(format!("{}: {e}", summary.display())))?;
    let body = format!(
        "case = {case_label}\nn = {n}\ntau = {}\nh = {}\neta = {etas_line}\nvariant = {}\n\
         corrected_start = {corrected_start}\nmax_error = {}\nl2_error = {}\nrel_error = {}\nruntime_s = {}\n",
        fmt17(tau),
        fmt17(setup.grid.hx()),
        match form {
            OperatorForm::Averaged => "averaged",
            OperatorForm::Implicit => "implicit",
        },
        fmt17(max_error),
        fmt17(l2_error),
        fmt17(max_error / scale.max(f64::MIN_POSITIVE)),
        fmt17(runtime_s),
    );
    f.write_all(body.as_bytes())
        .map_err(|e| CliError::failure(e.to_string()))?;

    if store_trajectory {
        for (k, layer) in traj.layers.iter().enumerate() {
            write_snapshot(&out, k, setup.grid, layer)?;
        }
    }
    println!("max_error = {}", fmt17(max_error));
    Ok(())
}

fn write_snapshot(
    out: &Path,
    k: usize,
    grid: hypersplit::Grid2D,
    layer: &GridFunction,
) -> CliResult<()> {
    let path = out.join(format!("layer_{k:05}.csv"));
    let mut f =
        fs::File::create(&path).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))?;
    let mut text = String::from("x,y,value\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            text.push_str(&format!(
                "{},{},{}\n",
                fmt17(grid.x(i)),
                fmt17(grid.y(j)),
                fmt17(layer.at(i, j))
            ));
        }
    }
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::failure(e.to_string()))
}

const CONVERGE_KEYS: &[&str] = &["case", "n", "variant", "threads", "out"];

fn cmd_converge(
    common: Common,
    case: Option<String>,
    n: Option<String>,
    variant: Option<String>,
) -> CliResult<()> {
    let cfg = match &common.config {
        Some(path) => parse_config(path, CONVERGE_KEYS)?,
        None => BTreeMap::new(),
    };
    let case_label = case
        .or(cfg.get("case").cloned())
        .ok_or_else(|| CliError::usage("missing case label (--case test1|test2|smooth)"))?;
    let n_raw = n
        .or(cfg.get("n").cloned())
        .ok_or_else(|| CliError::usage("missing divisions list (--n 20,40,80,160)"))?;
    let variant_raw = variant.or(cfg.get("variant").cloned());
    let threads = common.threads.or(config_get(&cfg, "threads")?).unwrap_or(0);
    let out = out_dir(common.out.or(cfg.get("out").map(PathBuf::from)))?;
    init_threads(threads)?;

    let case = mms::case_by_label(&case_label)
        .ok_or_else(|| CliError::usage(format!("unknown case {case_label:?}")))?;
    let n_list = parse_n_list(&n_raw)?;
    let form = match variant_raw {
        Some(raw) => parse_variant(&raw)?,
        None => OperatorForm::default(),
    };
    let report = mms::convergence_study(&case, &n_list, form)
        .map_err(|e| CliError::failure(format!("sweep failed: {e}")))?;

    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> CliResult<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::failure(e.to_string()))?;
        let path = out.join(name);
        fs::write(&path, buf).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
    };
    write("report.csv", &|b| mms::write_csv(b, &report))?;
    write("slope.txt", &|b| mms::write_slope(b, &report))?;
    write("report.dat", &|b| mms::write_gnuplot(b, &report))?;
    match report.slope {
        Some(s) => println!("slope = {}", fmt17(s)),
        None => println!("slope = insufficient data"),
    }
    Ok(())
}

const VERIFY_KEYS: &[&str] = &["seed", "count", "k_max", "threads", "out"];

fn cmd_verify(
    common: Common,
    seed: Option<u64>,
    count: Option<usize>,
    k_max: Option<usize>,
    inject_broken_weights: bool,
) -> CliResult<()> {
    let cfg = match &common.config {
        Some(path) => parse_config(path, VERIFY_KEYS)?,
        None => BTreeMap::new(),
    };
    let seed = seed.or(config_get(&cfg, "seed")?).unwrap_or(1);
    let count = count.or(config_get(&cfg, "count")?).unwrap_or(200);
    let k_max = k_max.or(config_get(&cfg, "k_max")?).unwrap_or(64);
    let threads = common.threads.or(config_get(&cfg, "threads")?).unwrap_or(0);
    init_threads(threads)?;

    let mut any_failed = false;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    if inject_broken_weights {
        // deliberately invalid weight vector: the constructor must reject it
        let parts: Vec<Arc<dyn hypersplit::SubOperator>> = vec![
            Arc::new(hypersplit::dense::DenseOperator::new(nalgebra::DMatrix::identity(2, 2)).unwrap()),
            Arc::new(hypersplit::dense::DenseOperator::new(nalgebra::DMatrix::identity(2, 2)).unwrap()),
        ];
        let detail = match Splitting::new(parts, vec![0.7, 0.4]) {
            Err(e) => e.to_string(),
            Ok(_) => "constructor accepted weights summing to 1.1".into(),
        };
        let rec = serde_json::json!({
            "check": "splitting_validation",
            "seed": seed,
            "dim": 2,
            "m": 2,
            "tau": 0.0,
            "margin": 0.1,
            "pass": false,
            "detail": detail,
        });
        writeln!(w, "{rec}").map_err(|e| CliError::failure(e.to_string()))?;
        any_failed = true;
    }
    for r in oracle::run_suite(seed, count, k_max) {
        let rec = serde_json::json!({
            "check": r.check,
            "seed": r.seed,
            "dim": r.dim,
            "m": r.m,
            "tau": r.tau,
            "margin": r.margin,
            "pass": r.pass,
        });
        writeln!(w, "{rec}").map_err(|e| CliError::failure(e.to_string()))?;
        any_failed |= !r.pass;
    }
    if any_failed {
        Err(CliError::failure("verification suite reported violations"))
    } else {
        Ok(())
    }
}

const CHEB_KEYS: &[&str] = &["k", "x", "y", "threads", "out"];

fn cmd_cheb(
    common: Common,
    k: Option<String>,
    x: Option<f64>,
    y: Option<f64>,
    classical: bool,
) -> CliResult<()> {
    let cfg = match &common.config {
        Some(path) => parse_config(path, CHEB_KEYS)?,
        None => BTreeMap::new(),
    };
    let k_raw = k.or(cfg.get("k").cloned()).unwrap_or_else(|| "0..10".into());
    let x = x.or(config_get(&cfg, "x")?).unwrap_or(0.5);
    let y = y.or(config_get(&cfg, "y")?).unwrap_or(1.0);
    let (k_lo, k_hi) = parse_k_range(&k_raw)?;

    // reduce to the classical polynomial via homogeneity:
    // U~_k(x, y) = y^{k/2} U_k(x / (2 sqrt(y)))
    let arg = if y > 0.0 { x / (2.0 * y.sqrt()) } else { f64::NAN };
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "k,x,value,bound").map_err(|e| CliError::failure(e.to_string()))?;
    for k in k_lo..=k_hi {
        let value = if classical {
            if y <= 0.0 {
                return Err(CliError::usage("--classical needs y > 0"));
            }
            y.powf(k as f64 / 2.0) * chebyshev::u_classical(k, arg)
        } else {
            chebyshev::u2_eval(k, x, y)
        };
        let bound = if y > 0.0 && arg.abs() < 1.0 {
            y.powf(k as f64 / 2.0) * chebyshev::envelope_bound(arg)
        } else {
            f64::INFINITY
        };
        writeln!(w, "{k},{},{},{}", fmt17(x), fmt17(value), fmt17(bound))
            .map_err(|e| CliError::failure(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            common,
            case,
            n,
            tau,
            eta,
            variant,
            corrected_start,
            store_trajectory,
        } => cmd_run(common, case, n, tau, eta, variant, corrected_start, store_trajectory),
        Command::Converge {
            common,
            case,
            n,
            variant,
        } => cmd_converge(common, case, n, variant),
        Command::Verify {
            common,
            seed,
            count,
            k_max,
            inject_broken_weights,
        } => cmd_verify(common, seed, count, k_max, inject_broken_weights),
        Command::Cheb {
            common,
            k,
            x,
            y,
            classical,
        } => cmd_cheb(common, k, x, y, classical),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
