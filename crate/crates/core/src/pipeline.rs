//! End-to-end runs and the operations behind the CLI subcommands: the full
//! training pipeline with its manifest, checkpoint restore, inference and
//! histogram exports, the method-comparison study, and the K sweep.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{config_hash, ExperimentConfig, OracleDecl};
use crate::diffcore::ParamStore;
use crate::error::{Error, Result};
use crate::evaluator::{train_evaluator, DominanceRule, EvaluatorModel, EvaluatorTraining};
use crate::frontier::{
    brute_force_optimum, default_reference, hypervolume, independent_search, nondominated,
    true_front, IndependentSearchConfig, RewardSpec, DEFAULT_MULTI_OBJECTIVE_EXPONENT,
};
use crate::generator::{
    build_grid, infer, train_generator, BudgetGrid, GeneratorModel, InferConfig, StepReport,
};
use crate::oracle::{
    collect_records, estimate_cost_range, load_tabular, make_synthetic, CostModel, CostRange,
    QualityOracle, ScoredRecord,
};
use crate::space::{sample_uniform, Architecture, SearchSpace};

// Phase tags for deriving per-phase rng streams from the global seed.
pub const TAG_RECORDS: u64 = 1;
pub const TAG_GRID: u64 = 2;
pub const TAG_EVALUATOR: u64 = 3;
pub const TAG_GEN_INIT: u64 = 4;
pub const TAG_GEN_TRAIN: u64 = 5;
pub const TAG_INFER: u64 = 6;
pub const TAG_HISTOGRAM: u64 = 7;
pub const TAG_INDEPENDENT: u64 = 8;

pub fn phase_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Exact per-architecture cost: the additive model for synthetic runs, a
/// lookup for tabular benchmarks (missing entries count as infeasible).
pub enum CostSource {
    Additive(CostModel),
    Table(HashMap<Architecture, f64>),
}

impl CostSource {
    pub fn cost(&self, arch: &Architecture) -> f64 {
        match self {
            CostSource::Additive(m) => m.cost(arch),
            CostSource::Table(t) => t.get(arch).copied().unwrap_or(f64::INFINITY),
        }
    }

    pub fn min_cost(&self) -> f64 {
        match self {
            CostSource::Additive(m) => m.min_cost(),
            CostSource::Table(t) => t.values().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn as_additive(&self) -> Option<&CostModel> {
        match self {
            CostSource::Additive(m) => Some(m),
            CostSource::Table(_) => None,
        }
    }
}

/// Resolved oracle: space, cost source, quality source, and (for tabular
/// benchmarks) the preloaded records.
pub struct OracleBundle {
    pub space: SearchSpace,
    pub cost: CostSource,
    pub quality: QualityOracle,
    pub preloaded: Option<Vec<ScoredRecord>>,
}

pub fn build_oracle(cfg: &ExperimentConfig) -> Result<OracleBundle> {
    match &cfg.oracle {
        OracleDecl::Synthetic { seed, tradeoff } => {
            let space = cfg.search_space()?;
            let (cost, quality) = make_synthetic(&space, *seed, *tradeoff)?;
            Ok(OracleBundle { space, cost: CostSource::Additive(cost), quality, preloaded: None })
        }
        OracleDecl::Tabular { path } => {
            let (space, records) = load_tabular(Path::new(path))?;
            let cost_table: HashMap<Architecture, f64> =
                records.iter().map(|r| (r.arch.clone(), r.cost)).collect();
            let quality = QualityOracle::Tabular {
                table: records.iter().map(|r| (r.arch.clone(), r.quality)).collect(),
            };
            Ok(OracleBundle {
                space,
                cost: CostSource::Table(cost_table),
                quality,
                preloaded: Some(records),
            })
        }
    }
}

/// The scored-record dataset: sampled from the oracle for synthetic runs,
/// taken verbatim from the benchmark file for tabular runs.
pub fn gather_records(cfg: &ExperimentConfig, bundle: &OracleBundle) -> Result<Vec<ScoredRecord>> {
    match &bundle.preloaded {
        Some(records) => Ok(records.clone()),
        None => {
            let cm = bundle
                .cost
                .as_additive()
                .ok_or_else(|| Error::Config("synthetic runs need an additive cost model".into()))?;
            collect_records(
                &bundle.space,
                cm,
                &bundle.quality,
                cfg.m,
                phase_seed(cfg.seed, TAG_RECORDS),
            )
        }
    }
}

/// Reward closure backed by a trained evaluator; scoring failures surface as
/// NaN so the training step reports a numeric error.
pub fn evaluator_reward(model: &EvaluatorModel) -> impl FnMut(&Architecture, f64) -> f64 + '_ {
    move |arch, budget| model.evaluate(arch, budget).map(|(r, _)| r).unwrap_or(f64::NAN)
}

/// Everything a finished pipeline run produces, in memory.
pub struct PipelineOutcome {
    pub config: ExperimentConfig,
    pub bundle: OracleBundle,
    pub records: Vec<ScoredRecord>,
    pub range: CostRange,
    pub grid: BudgetGrid,
    pub evaluator: EvaluatorTraining,
    pub generator: GeneratorModel,
    pub history: Vec<StepReport>,
    pub timings_ms: BTreeMap<String, f64>,
}

fn timed<T>(
    timings: &mut BTreeMap<String, f64>,
    name: &str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let t0 = Instant::now();
    let out = f();
    timings.insert(name.to_string(), t0.elapsed().as_secs_f64() * 1e3);
    out
}

/// Run every pipeline phase without touching the filesystem.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutcome> {
    let mut timings = BTreeMap::new();
    let bundle = timed(&mut timings, "build_oracle", || build_oracle(cfg))?;
    let records = timed(&mut timings, "collect_records", || gather_records(cfg, &bundle))?;
    let range = timed(&mut timings, "estimate_cost_range", || {
        estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile)
    })?;
    let grid = timed(&mut timings, "build_grid", || {
        build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, TAG_GRID))
    })?;
    let evaluator = timed(&mut timings, "train_evaluator", || {
        train_evaluator(
            &records,
            &grid,
            &bundle.space,
            &cfg.evaluator.to_config(DominanceRule::Full),
            phase_seed(cfg.seed, TAG_EVALUATOR),
        )
    })?;
    let gen_cfg = cfg.generator.to_config();
    let mut generator = GeneratorModel::new(
        bundle.space.clone(),
        Some(&grid),
        &gen_cfg,
        phase_seed(cfg.seed, TAG_GEN_INIT),
    );
    let history = timed(&mut timings, "train_generator", || {
        let mut reward = evaluator_reward(&evaluator.model);
        train_generator(&mut generator, &mut reward, &gen_cfg, phase_seed(cfg.seed, TAG_GEN_TRAIN))
    })?;
    Ok(PipelineOutcome {
        config: cfg.clone(),
        bundle,
        records,
        range,
        grid,
        evaluator,
        generator,
        history,
        timings_ms: timings,
    })
}

/// Post-run state a restored command needs besides the config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub cost_range: CostRange,
    pub budgets: Vec<f64>,
    pub holdout_agreement: f64,
}

/// What a pipeline run wrote, where, and how long each phase took.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifacts: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub failed_phase: Option<String>,
    pub state: Option<RunState>,
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialize: {e}")))?;
    std::fs::write(manifest_path(dir), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(manifest_path(dir))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("manifest parse: {e}"),
    })
}

/// Write records in the tabular benchmark CSV format (fraction qualities).
pub fn write_records(path: &Path, space: &SearchSpace, records: &[ScoredRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let header: Vec<String> =
        space.sites().iter().map(|s| format!("{}:{}", s.name, s.cardinality)).collect();
    writeln!(f, "{}", header.join(","))?;
    for r in records {
        let tokens: Vec<String> = r.arch.tokens.iter().map(|t| t.to_string()).collect();
        writeln!(f, "{},{},{}", tokens.join(","), r.cost, r.quality)?;
    }
    Ok(())
}

fn write_eval_log(path: &Path, log: &[crate::evaluator::EvalLogRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "iter,loss,holdout_agreement")?;
    for row in log {
        let agree = row.holdout_agreement.map(|a| a.to_string()).unwrap_or_default();
        writeln!(f, "{},{},{}", row.iter, row.loss, agree)?;
    }
    Ok(())
}

fn write_gen_log(path: &Path, budgets: &[f64], history: &[StepReport]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "step,budget,mean_reward,mean_entropy")?;
    for report in history {
        for (k, &b) in budgets.iter().enumerate() {
            writeln!(f, "{},{},{},{}", report.step, b, report.mean_reward[k], report.mean_entropy[k])?;
        }
    }
    Ok(())
}

/// Run the full pipeline and write every artifact plus the manifest into
/// `config.out_dir`. A failing phase still writes the partial manifest with
/// the phase named.
pub fn cmd_pipeline(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest {
        config_hash: config_hash(cfg)?,
        artifacts: BTreeMap::new(),
        timings_ms: BTreeMap::new(),
        failed_phase: None,
        state: None,
    };

    macro_rules! phase {
        ($name:expr, $body:expr) => {
            match timed(&mut manifest.timings_ms, $name, || $body) {
                Ok(v) => v,
                Err(e) => {
                    manifest.failed_phase = Some($name.to_string());
                    let _ = write_manifest(&dir, &manifest);
                    return Err(e);
                }
            }
        };
    }

    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml()?)?;
    manifest.artifacts.insert("config".into(), path_str(&config_path));

    let bundle = phase!("build_oracle", build_oracle(cfg));
    let records = phase!("collect_records", {
        let records = gather_records(cfg, &bundle)?;
        let path = dir.join("records.csv");
        write_records(&path, &bundle.space, &records)?;
        manifest.artifacts.insert("records".into(), path_str(&path));
        Ok(records)
    });
    let range = phase!(
        "estimate_cost_range",
        estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile)
    );
    let grid = phase!("build_grid", build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, TAG_GRID)));
    let evaluator = phase!("train_evaluator", {
        let trained = train_evaluator(
            &records,
            &grid,
            &bundle.space,
            &cfg.evaluator.to_config(DominanceRule::Full),
            phase_seed(cfg.seed, TAG_EVALUATOR),
        )?;
        let ck = dir.join("evaluator.ck");
        trained.model.params.save(&ck)?;
        manifest.artifacts.insert("evaluator_checkpoint".into(), path_str(&ck));
        let log = dir.join("evaluator_log.csv");
        write_eval_log(&log, &trained.log)?;
        manifest.artifacts.insert("evaluator_log".into(), path_str(&log));
        Ok(trained)
    });
    let _generator = phase!("train_generator", {
        let gen_cfg = cfg.generator.to_config();
        let mut generator = GeneratorModel::new(
            bundle.space.clone(),
            Some(&grid),
            &gen_cfg,
            phase_seed(cfg.seed, TAG_GEN_INIT),
        );
        let mut reward = evaluator_reward(&evaluator.model);
        let history = train_generator(
            &mut generator,
            &mut reward,
            &gen_cfg,
            phase_seed(cfg.seed, TAG_GEN_TRAIN),
        )?;
        let ck = dir.join("generator.ck");
        generator.params.save(&ck)?;
        manifest.artifacts.insert("generator_checkpoint".into(), path_str(&ck));
        let log = dir.join("generator_log.csv");
        write_gen_log(&log, grid.budgets(), &history)?;
        manifest.artifacts.insert("generator_log".into(), path_str(&log));
        Ok(generator)
    });

    manifest.state = Some(RunState {
        cost_range: range,
        budgets: grid.budgets().to_vec(),
        holdout_agreement: evaluator.holdout_agreement,
    });
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Copy checkpoint data into a freshly constructed model's parameters.
fn copy_params(dst: &mut ParamStore, src: &ParamStore) -> Result<()> {
    let names: Vec<String> = dst.names().map(str::to_string).collect();
    for name in names {
        if !src.contains(&name) {
            return Err(Error::Config(format!("checkpoint is missing tensor '{name}'")));
        }
        let s = src.get(&name);
        let d = dst.get_mut(&name);
        if (s.rows, s.cols) != (d.rows, d.cols) {
            return Err(Error::Config(format!(
                "checkpoint tensor '{name}' has shape {}x{}, expected {}x{}",
                s.rows, s.cols, d.rows, d.cols
            )));
        }
        d.data.copy_from_slice(&s.data);
    }
    Ok(())
}

/// Config, manifest, and state of a completed run directory.
pub fn load_run(dir: &Path) -> Result<(ExperimentConfig, RunManifest, RunState)> {
    let cfg = ExperimentConfig::from_path(&dir.join("config.toml"))?;
    let manifest = read_manifest(dir)?;
    let state = manifest
        .state
        .clone()
        .ok_or_else(|| Error::Config(format!("{} holds an incomplete run", dir.display())))?;
    Ok((cfg, manifest, state))
}

/// Rebuild the trained generator from a run directory.
pub fn load_generator(dir: &Path, cfg: &ExperimentConfig, state: &RunState) -> Result<(GeneratorModel, BudgetGrid)> {
    let bundle = build_oracle(cfg)?;
    let grid = build_grid(&state.cost_range, cfg.k, cfg.d_b, phase_seed(cfg.seed, TAG_GRID))?;
    let mut model = GeneratorModel::new(
        bundle.space,
        Some(&grid),
        &cfg.generator.to_config(),
        phase_seed(cfg.seed, TAG_GEN_INIT),
    );
    let ck = dir.join("generator.ck");
    if !ck.exists() {
        return Err(Error::Config(format!("missing checkpoint {}", ck.display())));
    }
    let loaded = ParamStore::load(&ck, 0)?;
    copy_params(&mut model.params, &loaded)?;
    Ok((model, grid))
}

/// Rebuild the trained evaluator from a run directory.
pub fn load_evaluator(dir: &Path, cfg: &ExperimentConfig, state: &RunState) -> Result<EvaluatorModel> {
    let bundle = build_oracle(cfg)?;
    let grid = build_grid(&state.cost_range, cfg.k, cfg.d_b, phase_seed(cfg.seed, TAG_GRID))?;
    let mut model = EvaluatorModel::new(
        bundle.space,
        &grid,
        &cfg.evaluator.to_config(DominanceRule::Full),
        phase_seed(cfg.seed, TAG_EVALUATOR) ^ 0xABCD_EF01,
    );
    let ck = dir.join("evaluator.ck");
    if !ck.exists() {
        return Err(Error::Config(format!("missing checkpoint {}", ck.display())));
    }
    let loaded = ParamStore::load(&ck, 0)?;
    copy_params(&mut model.params, &loaded)?;
    Ok(model)
}

/// One feasibility-aware generation at a budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateReport {
    pub budget: f64,
    pub tokens: Vec<usize>,
    pub cost: f64,
    pub quality: f64,
    pub feasibility_rate: f64,
    pub rounds: usize,
    pub budget_clamped: bool,
    pub wall_ms: f64,
}

pub fn cmd_generate(dir: &Path, budget: f64, seed_override: Option<u64>) -> Result<GenerateReport> {
    let (cfg, _, state) = load_run(dir)?;
    let bundle = build_oracle(&cfg)?;
    let (model, _) = load_generator(dir, &cfg, &state)?;
    let seed = seed_override.unwrap_or_else(|| phase_seed(cfg.seed, TAG_INFER) ^ budget.to_bits());
    let t0 = Instant::now();
    let report = infer(
        &model,
        budget,
        &|a| bundle.cost.cost(a),
        Some(&bundle.quality),
        None,
        &cfg.inference.to_config(),
        seed,
    )?;
    let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(GenerateReport {
        budget,
        tokens: report.arch.tokens,
        cost: report.cost,
        quality: report.selection_score,
        feasibility_rate: report.feasibility_rate,
        rounds: report.rounds,
        budget_clamped: report.budget_clamped,
        wall_ms,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Cost histogram of raw (unfiltered) samples at one budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramReport {
    pub budget: f64,
    pub n: usize,
    pub feasibility: f64,
    /// Feasible fraction of a same-size uniform sample, for reference.
    pub uniform_feasibility: f64,
    pub bins: Vec<HistBin>,
}

pub const HISTOGRAM_BINS: usize = 20;

/// Histogram data for a frozen generator; also usable in-memory by studies.
pub fn histogram_for_model(
    model: &GeneratorModel,
    cost: &CostSource,
    space: &SearchSpace,
    budget: f64,
    n: usize,
    seed: u64,
) -> (HistogramReport, Vec<f64>) {
    let (traces, _) = model.sample_policy(budget, seed, n);
    let costs: Vec<f64> = traces.iter().map(|t| cost.cost(&t.arch)).collect();
    let feasible = costs.iter().filter(|&&c| c <= budget).count();
    let uniform = sample_uniform(space, seed ^ 0xFACE, n);
    let uniform_feasible = uniform.iter().filter(|a| cost.cost(a) <= budget).count();
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut bins: Vec<HistBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistBin { lo: lo + i as f64 * width, hi: lo + (i + 1) as f64 * width, count: 0 })
        .collect();
    for &c in &costs {
        let idx = (((c - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        bins[idx].count += 1;
    }
    (
        HistogramReport {
            budget,
            n,
            feasibility: feasible as f64 / n as f64,
            uniform_feasibility: uniform_feasible as f64 / n as f64,
            bins,
        },
        costs,
    )
}

/// Sample `n` candidates at `budget`, write per-sample costs as CSV (header
/// plus exactly `n` rows), and return the summary.
pub fn cmd_histogram(dir: &Path, budget: f64, n: usize, csv_out: &Path) -> Result<HistogramReport> {
    let (cfg, _, state) = load_run(dir)?;
    let bundle = build_oracle(&cfg)?;
    let (model, _) = load_generator(dir, &cfg, &state)?;
    let (report, costs) = histogram_for_model(
        &model,
        &bundle.cost,
        &bundle.space,
        budget,
        n,
        phase_seed(cfg.seed, TAG_HISTOGRAM),
    );
    let mut f = std::fs::File::create(csv_out)?;
    writeln!(f, "cost,feasible")?;
    for c in &costs {
        writeln!(f, "{},{}", c, (*c <= budget) as u8)?;
    }
    Ok(report)
}

/// One method's outcome at one budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetRow {
    pub budget: f64,
    /// Oracle quality of the selected architecture.
    pub quality: f64,
    pub cost: f64,
    /// Gap to the brute-force optimum's quality.
    pub regret: f64,
    /// Stats over raw policy samples at this budget.
    pub feasibility: f64,
    pub mean_cost: f64,
    pub mean_quality: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub per_budget: Vec<BudgetRow>,
    pub hypervolume: f64,
}

/// Comparison of budget-conditioned training against independent search and
/// the alternative reward functions, under equal sampled-trace compute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub budgets: Vec<f64>,
    pub ref_cost: f64,
    pub ref_quality: f64,
    pub true_front_hypervolume: f64,
    pub methods: BTreeMap<String, MethodReport>,
}

const COMPARE_SAMPLES: usize = 500;

fn method_report(
    model: &GeneratorModel,
    bundle: &OracleBundle,
    budgets: &[f64],
    optima: &[ScoredRecord],
    infer_cfg: &InferConfig,
    ref_point: (f64, f64),
    seed: u64,
) -> Result<MethodReport> {
    let cm = bundle
        .cost
        .as_additive()
        .ok_or_else(|| Error::Config("comparison study needs an additive cost model".into()))?;
    let mut rows = Vec::with_capacity(budgets.len());
    let mut points = Vec::with_capacity(budgets.len());
    for (k, &b) in budgets.iter().enumerate() {
        let report = infer(
            model,
            b,
            &|a| cm.cost(a),
            Some(&bundle.quality),
            None,
            infer_cfg,
            phase_seed(seed, TAG_INFER + k as u64),
        )?;
        let (traces, _) = model.sample_policy(b, phase_seed(seed, 100 + k as u64), COMPARE_SAMPLES);
        let mut feasible = 0usize;
        let mut cost_sum = 0.0;
        let mut quality_sum = 0.0;
        for t in &traces {
            let c = cm.cost(&t.arch);
            cost_sum += c;
            quality_sum += bundle.quality.quality(&t.arch)?;
            if c <= b {
                feasible += 1;
            }
        }
        let n = traces.len() as f64;
        rows.push(BudgetRow {
            budget: b,
            quality: report.selection_score,
            cost: report.cost,
            regret: optima[k].quality - report.selection_score,
            feasibility: feasible as f64 / n,
            mean_cost: cost_sum / n,
            mean_quality: quality_sum / n,
        });
        points.push((report.cost, report.selection_score, report.arch));
    }
    let hv = hypervolume(&nondominated(&points), ref_point.0, ref_point.1)?;
    Ok(MethodReport { per_budget: rows, hypervolume: hv })
}

/// Train one conditioned generator per reward variant plus per-budget
/// independent searches, all with identical seeds and per-variant trace
/// budgets, and score everything against the brute-force ground truth.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<CompareReport> {
    let bundle = build_oracle(cfg)?;
    let cm = bundle
        .cost
        .as_additive()
        .ok_or_else(|| Error::Config("comparison study needs an additive cost model".into()))?
        .clone();
    let records = gather_records(cfg, &bundle)?;
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile)?;
    let grid = build_grid(&range, cfg.k, cfg.d_b, phase_seed(cfg.seed, TAG_GRID))?;
    let budgets = grid.budgets().to_vec();

    // ground truth
    let front = true_front(&bundle.space, &cm, &bundle.quality)?;
    let max_cost = cm.max_cost();
    let (ref_cost, ref_quality) = default_reference(max_cost);
    let true_hv = hypervolume(&front, ref_cost, ref_quality)?;
    let optima: Vec<ScoredRecord> = budgets
        .iter()
        .map(|&b| brute_force_optimum(&bundle.space, &cm, &bundle.quality, b))
        .collect::<Result<_>>()?;

    let eval_full = train_evaluator(
        &records,
        &grid,
        &bundle.space,
        &cfg.evaluator.to_config(DominanceRule::Full),
        phase_seed(cfg.seed, TAG_EVALUATOR),
    )?;
    let eval_cost_only = train_evaluator(
        &records,
        &grid,
        &bundle.space,
        &cfg.evaluator.to_config(DominanceRule::CostOnly),
        phase_seed(cfg.seed, TAG_EVALUATOR),
    )?;

    let gen_cfg = cfg.generator.to_config();
    let infer_cfg = cfg.inference.to_config();
    let w = DEFAULT_MULTI_OBJECTIVE_EXPONENT;
    let mut methods = BTreeMap::new();

    let variants: Vec<(&str, RewardSpec)> = vec![
        ("pareto_dominance", RewardSpec::ParetoDominance),
        ("pareto_dominance_no_acc", RewardSpec::ParetoDominanceNoAcc),
        ("multi_objective", RewardSpec::MultiObjective { exponent: w }),
        ("multi_objective_absolute", RewardSpec::MultiObjectiveAbsolute { weight: w }),
        ("oracle_quality", RewardSpec::OracleQuality),
    ];
    for (name, spec) in variants {
        let mut model = GeneratorModel::new(
            bundle.space.clone(),
            Some(&grid),
            &gen_cfg,
            phase_seed(cfg.seed, TAG_GEN_INIT),
        );
        {
            let evaluator = match spec {
                RewardSpec::ParetoDominance => Some(&eval_full.model),
                RewardSpec::ParetoDominanceNoAcc => Some(&eval_cost_only.model),
                _ => None,
            };
            let mut reward = |arch: &Architecture, budget: f64| -> f64 {
                match evaluator {
                    Some(model) => model.evaluate(arch, budget).map(|(r, _)| r).unwrap_or(f64::NAN),
                    None => {
                        let record = ScoredRecord {
                            arch: arch.clone(),
                            cost: cm.cost(arch),
                            quality: match bundle.quality.quality(arch) {
                                Ok(q) => q,
                                Err(_) => return f64::NAN,
                            },
                        };
                        crate::frontier::reward_value(&spec, &record, budget, None)
                            .unwrap_or(f64::NAN)
                    }
                }
            };
            train_generator(&mut model, &mut reward, &gen_cfg, phase_seed(cfg.seed, TAG_GEN_TRAIN))?;
        }
        let report = method_report(
            &model,
            &bundle,
            &budgets,
            &optima,
            &infer_cfg,
            (ref_cost, ref_quality),
            cfg.seed,
        )?;
        methods.insert(name.to_string(), report);
    }

    // Independent search: one unconditioned policy per budget. Each training
    // step samples N traces at its single budget, versus K·N for the
    // conditioned run, so equal step counts give equal total traces.
    let indep_cfg = IndependentSearchConfig {
        generator: gen_cfg.clone(),
        final_samples: COMPARE_SAMPLES,
    };
    let mut rows = Vec::with_capacity(budgets.len());
    let mut points = Vec::with_capacity(budgets.len());
    for (k, &b) in budgets.iter().enumerate() {
        let mut reward = evaluator_reward(&eval_full.model);
        let outcome = independent_search(
            &bundle.space,
            &cm,
            &bundle.quality,
            b,
            &mut reward,
            &indep_cfg,
            phase_seed(cfg.seed, TAG_INDEPENDENT + k as u64),
        )?;
        rows.push(BudgetRow {
            budget: b,
            quality: outcome.best.quality,
            cost: outcome.best.cost,
            regret: optima[k].quality - outcome.best.quality,
            feasibility: outcome.feasibility_rate,
            mean_cost: outcome.mean_cost,
            mean_quality: outcome.mean_quality,
        });
        points.push((outcome.best.cost, outcome.best.quality, outcome.best.arch));
    }
    let hv = hypervolume(&nondominated(&points), ref_cost, ref_quality)?;
    methods.insert(
        "independent_search".to_string(),
        MethodReport { per_budget: rows, hypervolume: hv },
    );

    Ok(CompareReport {
        budgets,
        ref_cost,
        ref_quality,
        true_front_hypervolume: true_hv,
        methods,
    })
}

/// One K-sweep row: quality at a shared mid-range budget plus the frontier
/// hypervolume of that K's generated set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub steps: usize,
    pub mid_budget: f64,
    pub mid_quality: f64,
    pub mean_quality: f64,
    pub hypervolume: f64,
}

/// Full pipeline per K with shared seeds; generator steps scale as 1/K so
/// total sampled traces stay constant across the sweep.
pub fn cmd_ksweep(cfg: &ExperimentConfig, k_values: &[usize]) -> Result<Vec<KSweepRow>> {
    if k_values.is_empty() {
        return Err(Error::Config("k sweep needs at least one K value".into()));
    }
    let bundle = build_oracle(cfg)?;
    let cm = bundle
        .cost
        .as_additive()
        .ok_or_else(|| Error::Config("k sweep needs an additive cost model".into()))?
        .clone();
    let records = gather_records(cfg, &bundle)?;
    let range = estimate_cost_range(&records, cfg.lo_percentile, cfg.hi_percentile)?;
    let (ref_cost, ref_quality) = default_reference(cm.max_cost());
    let mid_budget = 0.5 * (range.lo + range.hi);
    let total_steps = cfg.generator.max_steps * cfg.k;
    let infer_cfg = cfg.inference.to_config();

    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        if k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {k}")));
        }
        let grid = build_grid(&range, k, cfg.d_b, phase_seed(cfg.seed, TAG_GRID))?;
        let evaluator = train_evaluator(
            &records,
            &grid,
            &bundle.space,
            &cfg.evaluator.to_config(DominanceRule::Full),
            phase_seed(cfg.seed, TAG_EVALUATOR),
        )?;
        let mut gen_cfg = cfg.generator.to_config();
        gen_cfg.max_steps = (total_steps / k).max(1);
        let mut model = GeneratorModel::new(
            bundle.space.clone(),
            Some(&grid),
            &gen_cfg,
            phase_seed(cfg.seed, TAG_GEN_INIT),
        );
        {
            let mut reward = evaluator_reward(&evaluator.model);
            train_generator(&mut model, &mut reward, &gen_cfg, phase_seed(cfg.seed, TAG_GEN_TRAIN))?;
        }
        let mut points = Vec::with_capacity(k);
        let mut quality_sum = 0.0;
        for (i, &b) in grid.budgets().iter().enumerate() {
            let report = infer(
                &model,
                b,
                &|a| cm.cost(a),
                Some(&bundle.quality),
                None,
                &infer_cfg,
                phase_seed(cfg.seed, TAG_INFER + i as u64),
            )?;
            quality_sum += report.selection_score;
            points.push((report.cost, report.selection_score, report.arch));
        }
        let hv = hypervolume(&nondominated(&points), ref_cost, ref_quality)?;
        let mid = infer(
            &model,
            mid_budget,
            &|a| cm.cost(a),
            Some(&bundle.quality),
            None,
            &infer_cfg,
            phase_seed(cfg.seed, TAG_INFER + 1000),
        )?;
        rows.push(KSweepRow {
            k,
            steps: gen_cfg.max_steps,
            mid_budget,
            mid_quality: mid.selection_score,
            mean_quality: quality_sum / k as f64,
            hypervolume: hv,
        });
    }
    Ok(rows)
}

/// Validate a benchmark CSV and write its normalized (fraction-quality) form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportReport {
    pub sites: usize,
    pub rows: usize,
    pub out_path: String,
}

pub fn cmd_import_bench(input: &Path, output: &Path) -> Result<ImportReport> {
    let (space, records) = load_tabular(input)?;
    write_records(output, &space, &records)?;
    Ok(ImportReport {
        sites: space.num_sites(),
        rows: records.len(),
        out_path: path_str(output),
    })
}
