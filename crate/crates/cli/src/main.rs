//! `bundle-pricing`: solve, post, and simulate bundle-pricing menus, and build
//! and check the lower-bound constructions.
//!
//! Failures print one JSON error record on stderr and exit with status 2.
//! Verification verbs exit with status 1 when a check fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bundle_pricing::experiment::{csv_string, run_experiment, write_outputs, ExperimentConfig, ExperimentError};
use bundle_pricing::generate::{generate, GenSpec};
use bundle_pricing::lowerbound::{
    aam_to_qi, build_lb_instance, evaluate_gap, sample_qi_family, verify_qi, CoveringFamily, Policy, QIFamily, QiVerdict,
    DEFAULT_MAX_RESTARTS,
};
use bundle_pricing::model::load_instance;
use bundle_pricing::rng::Stream;
use bundle_pricing::verify::{verify_suite, Scope, VerifyOptions};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bundle-pricing", version, about = "Static anonymous bundle pricing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: LP, menu, Monte Carlo, CSV and JSON sidecar.
    Run(RunArgs),
    /// Run property batteries on generated instances.
    Verify {
        #[arg(long, default_value = "all")]
        scope: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per structural battery.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random instance from a generator spec (JSON file or literal).
    GenInstance {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample and certify a QI family, or convert a covering family.
    GenQi {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        t: Option<u32>,
        #[arg(long)]
        r: Option<usize>,
        /// Number of partitions.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        balanced: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_RESTARTS)]
        max_restarts: usize,
        /// Covering family JSON `{p, ell, vectors}` to map instead of sampling.
        #[arg(long, conflicts_with_all = ["m", "t", "r", "n", "balanced"])]
        covering: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a family is r-way QI (r defaults to the family's own).
    VerifyQi {
        family: PathBuf,
        #[arg(long)]
        r: Option<usize>,
    },
    /// Build the group instance for B copies per item from a family file.
    GenLbInstance {
        #[arg(long)]
        family: PathBuf,
        #[arg(long = "B")]
        b: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure E[OPT] against online policies on a group instance.
    EvalGap {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of greedy-commit, lp-menu, random-commit.
        #[arg(long, default_value = "greedy-commit,lp-menu,random-commit")]
        policies: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance file; overrides the config's.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// CSV path; the sidecar is written next to it as `.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ceil_randomization: bool,
    #[arg(long)]
    skip_normalization: bool,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(i) = args.instance {
        cfg.instance = Some(i);
        cfg.batch = None;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(a) = args.adversary {
        cfg.adversary = a;
    }
    if let Some(m) = args.mechanism {
        cfg.mechanism = m;
    }
    if args.gamma.is_some() {
        cfg.gamma = args.gamma;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    cfg.ceil_randomization |= args.ceil_randomization;
    cfg.skip_normalization |= args.skip_normalization;
    let results = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => write_outputs(path, &results)?,
        None => print!("{}", csv_string(&results)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn read_json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("cannot read {arg}"))
    }
}

fn load_family(path: &Path) -> Result<QIFamily> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(QIFamily::from_json_str(&text)?)
}

fn verdict_json(v: &QiVerdict) -> Value {
    match v {
        QiVerdict::Certified => json!({"certified": true}),
        QiVerdict::Fails(c) => json!({"certified": false, "counterexample": c}),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Verify {
            scope,
            seed,
            instances,
            out,
        } => {
            let Some(scope) = Scope::parse(&scope) else {
                bail!("unknown scope '{scope}'; expected lp_structure, subadditivity, qi, pbd or all");
            };
            let report = verify_suite(
                scope,
                VerifyOptions {
                    seed,
                    instances,
                    ..Default::default()
                },
            );
            write_or_print(out.as_deref(), &pretty(&json!({"passed": report.all_passed(), "checks": report.checks})))?;
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::GenInstance { spec, seed, out } => {
            let spec: GenSpec = serde_json::from_str(&read_json_arg(&spec)?).context("invalid generator spec")?;
            let inst = generate(&spec, &mut Stream::new(seed, 0));
            write_or_print(out.as_deref(), &(inst.to_json_string() + "\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GenQi {
            m,
            t,
            r,
            n,
            balanced,
            max_restarts,
            covering,
            seed,
            out,
        } => {
            let family = match covering {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
                    let cov: CoveringFamily = serde_json::from_str(&text).context("invalid covering family")?;
                    aam_to_qi(&cov)?
                }
                None => {
                    let (Some(m), Some(t), Some(r), Some(n)) = (m, t, r, n) else {
                        bail!("gen-qi needs --m, --t, --r and --n, or --covering");
                    };
                    sample_qi_family(m, t, r, n, balanced, &mut Stream::new(seed, 0), max_restarts)?
                }
            };
            write_or_print(out.as_deref(), &pretty(&family.to_json()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyQi { family, r } => {
            let family = load_family(&family)?;
            let verdict = verify_qi(&family, r.unwrap_or(family.r))?;
            print!("{}", pretty(&verdict_json(&verdict)));
            Ok(if verdict == QiVerdict::Certified { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::GenLbInstance { family, b, out } => {
            let (family, verdict) = load_family(&family)?.certify()?;
            if verdict != QiVerdict::Certified {
                bail!("family is not {}-way QI: {}", family.r, verdict_json(&verdict));
            }
            let inst = build_lb_instance(&family, b)?;
            write_or_print(out.as_deref(), &(inst.to_json_string() + "\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalGap {
            instance,
            trials,
            seed,
            policies,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let policies = policies
                .split(',')
                .map(|p| {
                    Policy::ALL
                        .into_iter()
                        .find(|x| x.tag() == p.trim())
                        .with_context(|| format!("unknown policy '{p}'"))
                })
                .collect::<Result<Vec<_>>>()?;
            let report = evaluate_gap(&inst, &policies, trials, seed)?;
            write_or_print(out.as_deref(), &pretty(&serde_json::to_value(&report)?))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let record = match e.downcast_ref::<ExperimentError>() {
                Some(x) => x.record(),
                None => json!({"error": "failure", "message": format!("{e:#}")}),
            };
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
