//! Command-line front end: generate synthetic profiles, fit RBCML
//! estimators, validate breaking/weight configurations, run experiment
//! sweeps, and print the Cramer-Rao reference.
//!
//! Exit codes: 0 success (or consistent verdict), 1 inconsistent verdict,
//! 2 usage or parse errors, 3 numerical failures. Statistical output on
//! stdout and in files is byte-deterministic for a fixed seed; timing is
//! diagnostics and goes to stderr (or into the sweep CSV with --timing).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rbcml::adaptive::{adaptive_rbcml, AdaptiveConfig};
use rbcml::breaking::kappa_stats;
use rbcml::cml::{wg_product, FitOptions, FitResult};
use rbcml::consistency::{check_consistency_pl, check_consistency_symmetric_rum};
use rbcml::eval::{
    cramer_rao_trace_pl, parse_breaking_spec, parse_weights_spec, rows_to_csv, run_experiment,
    trials_to_jsonl, ExperimentConfig,
};
use rbcml::sampling::{rng_from_seed, sample_ground_truth, sample_profile};
use rbcml::{Error, Profile, Theta, UtilityFamily};

#[derive(Parser)]
#[command(name = "rbcml", version, about = "Rank-breaking composite marginal likelihood estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    /// Plackett-Luce (Gumbel utilities)
    Pl,
    /// Gaussian utilities (unit scales unless --scales is given)
    Gaussian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyClassArg {
    /// Plackett-Luce consistency conditions
    Pl,
    /// Symmetric-RUM consistency conditions
    SymmetricRum,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a ground truth and a synthetic profile to files.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// RNG seed (stochastic subcommands take no silent entropy).
        #[arg(long)]
        seed: u64,
        /// Profile output path.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth output path (one decimal per line).
        #[arg(long)]
        truth_out: PathBuf,
        /// Fixed ground truth as comma-separated values, overriding the
        /// random draw.
        #[arg(long)]
        theta: Option<String>,
        /// Gaussian scales as comma-separated values.
        #[arg(long)]
        scales: Option<String>,
    },
    /// Fit an RBCML estimator to a profile file and print the result JSON.
    Fit {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Breaking spec: uniform | position:<k> | position-union:<a,b,...>
        /// | path to a breaking file.
        #[arg(long)]
        breaking: String,
        /// Weights spec: uniform | uniform-w | pl-heuristic-w | path to a
        /// weights file.
        #[arg(long)]
        weights: String,
        /// Adaptive iterations T.
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Also write the result JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scales: Option<String>,
    },
    /// Check a breaking/weights pair against the consistency conditions.
    Check {
        #[arg(long, value_enum)]
        family_class: FamilyClassArg,
        #[arg(long)]
        breaking: String,
        #[arg(long)]
        weights: String,
        /// Number of alternatives; may be omitted when a file spec fixes it.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Run an experiment sweep from a JSON config and write the CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV output path (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill the runtime_mean_s column with measured wallclock times.
        /// Off by default so identical seeds give identical bytes.
        #[arg(long)]
        timing: bool,
    },
    /// Print the Cramer-Rao reference for the Plackett-Luce model.
    Crbound {
        #[arg(long)]
        m: usize,
        /// Ground truth as comma-separated values (default all zeros).
        #[arg(long)]
        theta: Option<String>,
        /// Print the raw trace instead of dividing by m-1.
        #[arg(long)]
        no_normalize: bool,
    },
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            Self::Usage(_) => ExitCode::from(2),
            Self::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } | Error::LogDomain { .. } | Error::SingularInformation => {
                Self::Numerical(e.to_string())
            }
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn parse_csv_f64(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| CliError::Usage(format!("could not parse {what} `{s}`")))
}

fn build_family(
    family: FamilyArg,
    m: usize,
    scales: &Option<String>,
) -> Result<UtilityFamily, CliError> {
    match family {
        FamilyArg::Pl => {
            if scales.is_some() {
                return Err(CliError::Usage("--scales only applies to gaussian".into()));
            }
            Ok(UtilityFamily::plackett_luce())
        }
        FamilyArg::Gaussian => match scales {
            None => Ok(UtilityFamily::gaussian_unit(m)),
            Some(s) => {
                let v = parse_csv_f64(s, "--scales")?;
                if v.len() != m {
                    return Err(CliError::Usage(format!(
                        "--scales has {} entries, expected {m}",
                        v.len()
                    )));
                }
                Ok(UtilityFamily::gaussian(v)?)
            }
        },
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Generate { family, m, n, seed, out, truth_out, theta, scales } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be >= 1".into()));
            }
            let fam = build_family(family, m, &scales)?;
            let mut rng = rng_from_seed(seed);
            let truth = match theta {
                Some(s) => {
                    let v = parse_csv_f64(&s, "--theta")?;
                    if v.len() != m {
                        return Err(CliError::Usage(format!(
                            "--theta has {} entries, expected {m}",
                            v.len()
                        )));
                    }
                    Theta::new(v)?
                }
                None => sample_ground_truth(m, &mut rng),
            };
            let profile = sample_profile(&fam, &truth, n, &mut rng)?;
            std::fs::write(&out, profile.to_text())?;
            let truth_text: String =
                truth.values().iter().map(|v| format!("{v}\n")).collect();
            std::fs::write(&truth_out, truth_text)?;
            println!("wrote profile (m={m}, n={n}) to {} and truth to {}", out.display(), truth_out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Fit { profile, family, breaking, weights, t, out, scales } => {
            if t == 0 {
                return Err(CliError::Usage("--t must be >= 1".into()));
            }
            let text = std::fs::read_to_string(&profile)?;
            let profile = Profile::from_text(&text)?;
            let fam = build_family(family, profile.m(), &scales)?;
            let cfg = AdaptiveConfig {
                iterations: t,
                breaking: parse_breaking_spec(&breaking)?,
                weights: parse_weights_spec(&weights)?,
                options: FitOptions::default(),
            };

            // Connectivity diagnostic up front: a disconnected W(x)G(P) has
            // no unique bounded maximizer.
            let theta0 = Theta::zeros(profile.m());
            let g0 = cfg.breaking.build(&theta0)?;
            let w0 = cfg.weights.build(&theta0)?;
            let kappa0 = kappa_stats(&g0, &profile)?;
            let report = wg_product(&w0, &kappa0)?;
            if !report.weakly_connected {
                return Err(CliError::Numerical(format!(
                    "W(x)G(P) is not weakly connected; components: {:?}",
                    report.components
                )));
            }
            if !report.strongly_connected {
                eprintln!(
                    "warning: W(x)G(P) is weakly but not strongly connected; \
                     the maximizer may be unbounded"
                );
            }

            let run = adaptive_rbcml(&fam, &profile, &cfg);
            let n_done = run.iterates.len();
            let fit = run.into_final().map_err(|e| {
                CliError::Numerical(format!("fit failed after {n_done} iteration(s): {e}"))
            })?;
            if !fit.converged {
                return Err(CliError::Numerical(format!(
                    "optimizer did not converge: gradient norm {:e} after {} iterations",
                    fit.gradient_norm, fit.iterations
                )));
            }
            let json = fit_json(&fit, t);
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(&path, format!("{json}\n"))?;
            }
            eprintln!("fit wallclock: {:.6} s", fit.wallclock_s);
            Ok(ExitCode::SUCCESS)
        }

        Command::Check { family_class, breaking, weights, m } => {
            let bh = parse_breaking_spec(&breaking)?;
            let wh = parse_weights_spec(&weights)?;
            let m = resolve_m(&bh, &wh, m)?;
            let probe = Theta::zeros(m);
            let g = bh.build(&probe)?;
            let w = wh.build(&probe)?;
            let verdict = match family_class {
                FamilyClassArg::Pl => check_consistency_pl(&g, &w)?,
                FamilyClassArg::SymmetricRum => check_consistency_symmetric_rum(&g, &w)?,
            };
            println!("{verdict}");
            if verdict.consistent() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }

        Command::Sweep { config, out, timing } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad experiment config: {e}")))?;
            let csv_path = out
                .or_else(|| cfg.output.clone().map(PathBuf::from))
                .ok_or_else(|| {
                    CliError::Usage("no CSV output path (use --out or the config's `output`)".into())
                })?;
            let outcome = run_experiment(&cfg)?;
            std::fs::write(&csv_path, rows_to_csv(&outcome.rows, timing))?;
            if let Some(jsonl) = &cfg.jsonl {
                std::fs::write(jsonl, trials_to_jsonl(&outcome.trials, timing))?;
            }
            for row in &outcome.rows {
                println!(
                    "{} n={} n_mse={} stderr={} failures={}",
                    row.estimator, row.n, row.n_mse_mean, row.n_mse_stderr, row.failures
                );
                eprintln!("  mean fit wallclock at n={}: {:.6} s", row.n, row.runtime_mean_s);
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Crbound { m, theta, no_normalize } => {
            let truth = match theta {
                Some(s) => {
                    let v = parse_csv_f64(&s, "--theta")?;
                    if v.len() != m {
                        return Err(CliError::Usage(format!(
                            "--theta has {} entries, expected {m}",
                            v.len()
                        )));
                    }
                    Theta::new(v)?
                }
                None => Theta::zeros(m),
            };
            let value = cramer_rao_trace_pl(&truth, !no_normalize)?;
            println!("{value}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Deterministic fit output: wallclock is reported on stderr instead, so
/// identical inputs give identical stdout bytes.
fn fit_json(fit: &FitResult, t: usize) -> String {
    #[derive(serde::Serialize)]
    struct FitView<'a> {
        theta: &'a [f64],
        objective: f64,
        gradient_norm: f64,
        iterations: usize,
        converged: bool,
        adaptive_iterations: usize,
    }
    serde_json::to_string(&FitView {
        theta: fit.theta.values(),
        objective: fit.objective,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
        converged: fit.converged,
        adaptive_iterations: t,
    })
    .expect("serializable view")
}

fn resolve_m(
    bh: &rbcml::adaptive::BreakingHeuristic,
    wh: &rbcml::adaptive::WeightHeuristic,
    flag: Option<usize>,
) -> Result<usize, CliError> {
    use rbcml::adaptive::{BreakingHeuristic as B, WeightHeuristic as W};
    let from_b = match bh {
        B::Fixed(g) => Some(g.m()),
        B::PositionUnion(a) => Some(a.len() + 1),
        _ => None,
    };
    let from_w = match wh {
        W::Fixed(w) => Some(w.m()),
        _ => None,
    };
    let mut m = flag;
    for candidate in [from_b, from_w].into_iter().flatten() {
        match m {
            None => m = Some(candidate),
            Some(v) if v != candidate => {
                return Err(CliError::Usage(format!(
                    "conflicting m: {v} vs {candidate} from the provided specs"
                )));
            }
            _ => {}
        }
    }
    m.ok_or_else(|| CliError::Usage("--m is required when no file spec fixes it".into()))
}
