//! End-to-end experiments: instance → LP → menu → Monte Carlo → CSV row and
//! JSON sidecar. A config names one instance file or a generator grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::generate::{generate, GenSpec};
use crate::lp::structure::key_json;
use crate::lp::{extend_supports, instance_gamma, solve_pipeline, LpError, DEFAULT_MAX_PATHS};
use crate::menu::{Branch, Mechanism, MenuOptions, PreparedMechanism};
use crate::model::{load_instance, Instance, InstanceKind, ModelError};
use crate::rng::{Purpose, Stream};
use crate::sim::{monte_carlo, Adversary, McConfig, SimError, Stats};

pub const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Model(_) => "instance",
            ExperimentError::Lp(_) => "lp",
            ExperimentError::Sim(_) => "simulation",
            ExperimentError::Io { .. } => "io",
            ExperimentError::Csv(_) => "csv",
        }
    }

    pub fn record(&self) -> Value {
        json!({"error": self.kind(), "message": self.to_string()})
    }
}

/// Parameter grid over a generator template. An empty list leaves the
/// template's field alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchGrid {
    pub generator: Value,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default, rename = "B")]
    pub capacity: Vec<u32>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub trials: Vec<u64>,
    #[serde(default = "one")]
    pub instances_per_cell: usize,
}

fn one() -> usize {
    1
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_mechanism() -> String {
    "lp_menu".into()
}

fn default_adversary() -> String {
    "auto".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub batch: Option<BatchGrid>,
    #[serde(default = "default_mechanism")]
    pub mechanism: String,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_adversary")]
    pub adversary: String,
    #[serde(default)]
    pub seed: u64,
    /// CSV path; the sidecar goes next to it with a `.json` extension.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub ceil_randomization: bool,
    #[serde(default)]
    pub skip_normalization: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instance: None,
            batch: None,
            mechanism: default_mechanism(),
            gamma: None,
            trials: DEFAULT_TRIALS,
            adversary: default_adversary(),
            seed: 0,
            out: None,
            ceil_randomization: false,
            skip_normalization: false,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; a relative instance path is taken relative to
    /// the file.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if let (Some(inst), Some(dir)) = (&cfg.instance, path.parent()) {
            if inst.is_relative() {
                cfg.instance = Some(dir.join(inst));
            }
        }
        Ok(cfg)
    }

    pub fn parsed_mechanism(&self) -> Result<Mechanism, ExperimentError> {
        Mechanism::parse(&self.mechanism).ok_or_else(|| {
            ExperimentError::Config(format!(
                "unknown mechanism '{}'; expected lp_menu, alg2 or combined",
                self.mechanism
            ))
        })
    }

    pub fn parsed_adversary(&self) -> Result<Adversary, ExperimentError> {
        Adversary::parse(&self.adversary).ok_or_else(|| {
            ExperimentError::Config(format!(
                "unknown adversary '{}'; expected random, exhaustive-worst, greedy-heuristic, fixed or auto",
                self.adversary
            ))
        })
    }

    fn check(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.instance.is_some() == self.batch.is_some() {
            return Err(ExperimentError::Config("give exactly one of 'instance' and 'batch'".into()));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g >= 1.0) {
                return Err(ExperimentError::Config(format!("gamma override {g} must be finite and at least 1")));
            }
        }
        self.parsed_mechanism()?;
        self.parsed_adversary()?;
        Ok(())
    }
}

/// The proven bound on `FOPT / E[ALG]` for the instance's setting:
/// `40·γ` for d-single-minded, `120·γ` for general and routing, `800/7` on
/// trees, with `γ` the setting's scaling factor.
pub fn ratio_bound(instance: &Instance) -> f64 {
    let gamma = instance_gamma(instance);
    match instance.kind {
        InstanceKind::DSingleMinded { .. } => 40.0 * gamma,
        InstanceKind::GeneralSingleMinded | InstanceKind::GraphRouting => 120.0 * gamma,
        InstanceKind::Tree => 800.0 / 7.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub instance_id: String,
    pub mechanism: String,
    pub adversary: String,
    pub trials: u64,
    pub mean_alg: f64,
    pub ci_alg: f64,
    pub mean_ualg: f64,
    pub ci_ualg: f64,
    pub mean_blocked_count: f64,
    pub mean_blocked_value: f64,
    pub fopt: f64,
    pub fopt_gamma: f64,
    pub gamma: f64,
    pub ratio_fopt_over_alg: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub row: CsvRow,
    pub stats: Stats,
    pub sidecar: Value,
}

/// One instance through the whole pipeline.
pub fn run_instance(
    instance_id: &str,
    instance: &Instance,
    cfg: &ExperimentConfig,
    trials: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let mechanism = cfg.parsed_mechanism()?;
    let adversary = cfg.parsed_adversary()?;
    if mechanism == Mechanism::Combined && instance.kind != InstanceKind::GeneralSingleMinded {
        return Err(ExperimentError::Config(format!(
            "the combined mechanism needs a general_single_minded instance, got {}",
            instance.kind.tag()
        )));
    }
    let gamma = cfg.gamma.unwrap_or_else(|| instance_gamma(instance));
    let (instance, epsilon) = if instance.has_common_full_support() {
        (instance.clone(), None)
    } else {
        let ext = extend_supports(instance, gamma, ratio_bound(instance))?;
        (ext.instance, ext.epsilon)
    };
    let solved = solve_pipeline(&instance, gamma, !cfg.skip_normalization, DEFAULT_MAX_PATHS)?;
    let opts = MenuOptions {
        ceil_randomization: cfg.ceil_randomization,
    };
    let prepared = PreparedMechanism::new(&instance, mechanism, solved.structures.clone(), solved.fopt_gamma, opts);
    let stats = monte_carlo(
        &instance,
        &prepared,
        McConfig {
            trials,
            adversary,
            master_seed: cfg.seed,
        },
    )?;
    let row = CsvRow {
        instance_id: instance_id.to_string(),
        mechanism: mechanism.tag().to_string(),
        adversary: adversary.tag().to_string(),
        trials,
        mean_alg: stats.alg.mean,
        ci_alg: stats.alg.ci95,
        mean_ualg: stats.ualg.mean,
        ci_ualg: stats.ualg.ci95,
        mean_blocked_count: stats.blocked_count.mean,
        mean_blocked_value: stats.blocked_value.mean,
        fopt: solved.fopt,
        fopt_gamma: solved.fopt_gamma,
        gamma,
        ratio_fopt_over_alg: if stats.alg.mean > 0.0 { solved.fopt / stats.alg.mean } else { f64::INFINITY },
    };
    let provenance: Vec<Value> = prepared
        .randomized
        .provenance
        .iter()
        .map(|p| {
            let branch = match &p.branch {
                Branch::NoCrucial => json!({"branch": "no_crucial"}),
                Branch::TailDominates => json!({"branch": "tail_dominates"}),
                Branch::Floor { copies, extra_coin } => {
                    json!({"branch": "floor", "copies": copies, "extra_coin": extra_coin})
                }
                Branch::Coin { probability } => json!({"branch": "coin", "probability": probability}),
                Branch::Unroutable => json!({"branch": "unroutable"}),
            };
            json!({"bundle": key_json(&instance, &p.key), "important_value": p.important_value, "rule": branch})
        })
        .collect();
    let sidecar = json!({
        "instance_id": instance_id,
        "config": cfg,
        "trials": trials,
        "mechanism": mechanism.tag(),
        "adversary": adversary.tag(),
        "master_seed": cfg.seed,
        "gamma": gamma,
        "fopt": solved.fopt,
        "fopt_gamma": solved.fopt_gamma,
        "ratio_bound": ratio_bound(&instance),
        "support_extension_epsilon": epsilon,
        "solution": solved.solution.to_json(&instance, &solved.structures),
        "menu_provenance": provenance,
        "deterministic_menu": crate::menu::Menu { entries: prepared.randomized.deterministic.clone() }.to_json(&instance),
        "stats": stats,
        "csv_row": row,
    });
    Ok(ExperimentResult { row, stats, sidecar })
}

/// Expands a grid into `(id, instance, trials)` cells, in grid order.
pub fn expand_grid(grid: &BatchGrid, seed: u64, default_trials: u64) -> Result<Vec<(String, Instance, u64)>, ExperimentError> {
    fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().copied().map(Some).collect()
        }
    }
    let mut out = Vec::new();
    let mut cell = 0u64;
    for d in axis(&grid.d) {
        for b in axis(&grid.capacity) {
            for m in axis(&grid.m) {
                for trials in axis(&grid.trials) {
                    let mut spec = grid.generator.clone();
                    let obj = spec
                        .as_object_mut()
                        .ok_or_else(|| ExperimentError::Config("batch generator must be an object".into()))?;
                    let mut id = String::from("batch");
                    if let Some(d) = d {
                        obj.insert("d".into(), json!(d));
                        id += &format!("-d{d}");
                    }
                    if let Some(b) = b {
                        obj.insert("capacity".into(), json!(b));
                        id += &format!("-B{b}");
                    }
                    if let Some(m) = m {
                        obj.insert("m".into(), json!(m));
                        id += &format!("-m{m}");
                    }
                    let spec: GenSpec =
                        serde_json::from_value(spec).map_err(|e| ExperimentError::Config(format!("batch generator: {e}")))?;
                    for k in 0..grid.instances_per_cell {
                        let mut rng = Stream::for_trial(seed, cell, Purpose::Auxiliary);
                        cell += 1;
                        let inst = generate(&spec, &mut rng);
                        let tr = trials.unwrap_or(default_trials);
                        out.push((format!("{id}-t{tr}-k{k}"), inst, tr));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Runs a config: one instance, or every grid cell in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, ExperimentError> {
    cfg.check()?;
    if let Some(path) = &cfg.instance {
        let instance = load_instance(path)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "instance".into());
        return Ok(vec![run_instance(&id, &instance, cfg, cfg.trials)?]);
    }
    let grid = cfg.batch.as_ref().expect("checked");
    expand_grid(grid, cfg.seed, cfg.trials)?
        .into_iter()
        .map(|(id, inst, trials)| run_instance(&id, &inst, cfg, trials))
        .collect()
}

pub fn csv_string(results: &[ExperimentResult]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(&r.row)?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes the CSV and its sidecar (a single object, or an array for batches).
pub fn write_outputs(csv_path: &Path, results: &[ExperimentResult]) -> Result<(), ExperimentError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ExperimentError::Io { path, source }
    };
    std::fs::write(csv_path, csv_string(results)?).map_err(io(csv_path))?;
    let sidecar = match results {
        [one] => one.sidecar.clone(),
        many => Value::Array(many.iter().map(|r| r.sidecar.clone()).collect()),
    };
    let side = sidecar_path(csv_path);
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar).expect("json") + "\n").map_err(io(&side))?;
    Ok(())
}
