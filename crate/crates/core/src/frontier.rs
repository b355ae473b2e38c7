//! Pareto analysis and baselines: nondominated filtering, hypervolume,
//! brute-force budget-constrained optima, alternative reward functions, and
//! the equal-compute repeated-independent-search baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::EvaluatorModel;
use crate::generator::{train_unconditioned, GeneratorConfig, GeneratorModel};
use crate::oracle::{CostModel, QualityOracle, ScoredRecord};
use crate::space::{enumerate, Architecture, SearchSpace, ENUMERATION_CAP};

/// A nondominated set of (cost, quality) points sorted by ascending cost;
/// quality strictly increases along the sort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<FrontPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub cost: f64,
    pub quality: f64,
    pub arch: Architecture,
}

/// Maximal nondominated subset. A point dominates another at lower-or-equal
/// cost and higher-or-equal quality with at least one strict; exact
/// coordinate ties keep the lexicographically smallest architecture.
pub fn nondominated(points: &[(f64, f64, Architecture)]) -> ParetoFront {
    let mut sorted: Vec<&(f64, f64, Architecture)> = points.iter().collect();
    // ascending cost, then descending quality, then lexicographic tokens
    sorted.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(b.1.partial_cmp(&a.1).unwrap())
            .then(a.2.cmp(&b.2))
    });
    let mut front: Vec<FrontPoint> = Vec::new();
    for &&(cost, quality, ref arch) in &sorted {
        match front.last() {
            Some(last) if quality <= last.quality => continue,
            Some(last) if cost == last.cost => {
                // same cost, higher quality replaces (sort order makes this
                // only possible via the first entry at a cost)
                let _ = last;
                continue;
            }
            _ => front.push(FrontPoint { cost, quality, arch: arch.clone() }),
        }
    }
    ParetoFront { points: front }
}

/// Dominated area relative to (ref_cost, ref_quality), by sorted sweep.
pub fn hypervolume(front: &ParetoFront, ref_cost: f64, ref_quality: f64) -> Result<f64> {
    if front.points.is_empty() {
        return Ok(0.0);
    }
    let max_cost = front.points.iter().map(|p| p.cost).fold(f64::NEG_INFINITY, f64::max);
    let min_quality = front.points.iter().map(|p| p.quality).fold(f64::INFINITY, f64::min);
    if ref_cost < max_cost || ref_quality > min_quality {
        return Err(Error::Config(format!(
            "hypervolume reference ({ref_cost}, {ref_quality}) must satisfy ref_cost >= {max_cost} and ref_quality <= {min_quality}"
        )));
    }
    let mut hv = 0.0;
    let mut prev_quality = ref_quality;
    for p in &front.points {
        hv += (ref_cost - p.cost) * (p.quality - prev_quality);
        prev_quality = p.quality;
    }
    Ok(hv)
}

/// Standard reference point: (1.05 × max observed cost, 0).
pub fn default_reference(max_cost: f64) -> (f64, f64) {
    (1.05 * max_cost, 0.0)
}

/// Best feasible architecture by exhaustive enumeration; ties break by lower
/// cost, then lexicographic tokens.
pub fn brute_force_optimum(
    space: &SearchSpace,
    cost_model: &CostModel,
    quality_oracle: &QualityOracle,
    budget: f64,
) -> Result<ScoredRecord> {
    let mut best: Option<ScoredRecord> = None;
    for arch in enumerate(space, ENUMERATION_CAP)? {
        let cost = cost_model.cost(&arch);
        if cost > budget {
            continue;
        }
        let quality = quality_oracle.quality(&arch)?;
        let better = match &best {
            None => true,
            Some(b) => {
                quality > b.quality
                    || (quality == b.quality && cost < b.cost)
                    || (quality == b.quality && cost == b.cost && arch < b.arch)
            }
        };
        if better {
            best = Some(ScoredRecord { arch, cost, quality });
        }
    }
    best.ok_or_else(|| Error::InfeasibleBudget {
        budget,
        near_miss_cost: cost_model.min_cost(),
        near_miss_tokens: Vec::new(),
    })
}

/// Ground-truth frontier over the full enumeration.
pub fn true_front(
    space: &SearchSpace,
    cost_model: &CostModel,
    quality_oracle: &QualityOracle,
) -> Result<ParetoFront> {
    let mut points = Vec::new();
    for arch in enumerate(space, ENUMERATION_CAP)? {
        let cost = cost_model.cost(&arch);
        let quality = quality_oracle.quality(&arch)?;
        points.push((cost, quality, arch));
    }
    Ok(nondominated(&points))
}

/// Reward function variants for the ablation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum RewardSpec {
    /// Learned evaluator trained with the full dominance rule.
    ParetoDominance,
    /// Learned evaluator trained with the cost-only dominance rule.
    ParetoDominanceNoAcc,
    /// quality · (cost/T)^w with w < 0 applied only above the target.
    MultiObjective { exponent: f64 },
    /// quality + w·|cost/T − 1|.
    MultiObjectiveAbsolute { weight: f64 },
    /// Raw oracle quality, ignoring cost.
    OracleQuality,
}

impl RewardSpec {
    pub fn needs_evaluator(&self) -> bool {
        matches!(self, RewardSpec::ParetoDominance | RewardSpec::ParetoDominanceNoAcc)
    }
}

/// Default exponent/weight for the multi-objective variants.
pub const DEFAULT_MULTI_OBJECTIVE_EXPONENT: f64 = -0.07;

/// Scalar reward of `record` under `spec` at target budget `budget`.
pub fn reward_value(
    spec: &RewardSpec,
    record: &ScoredRecord,
    budget: f64,
    evaluator: Option<&EvaluatorModel>,
) -> Result<f64> {
    match spec {
        RewardSpec::ParetoDominance | RewardSpec::ParetoDominanceNoAcc => {
            let model = evaluator.ok_or_else(|| {
                Error::Config("learned reward variants need a trained evaluator".into())
            })?;
            Ok(model.evaluate(&record.arch, budget)?.0)
        }
        RewardSpec::MultiObjective { exponent } => {
            if record.cost <= budget {
                Ok(record.quality)
            } else {
                Ok(record.quality * (record.cost / budget).powf(*exponent))
            }
        }
        RewardSpec::MultiObjectiveAbsolute { weight } => {
            Ok(record.quality + weight * (record.cost / budget - 1.0).abs())
        }
        RewardSpec::OracleQuality => Ok(record.quality),
    }
}

/// Configuration for the repeated-independent-search baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependentSearchConfig {
    pub generator: GeneratorConfig,
    /// Candidates drawn from the final policy.
    pub final_samples: usize,
}

/// Result of one repeated-independent-search run at one budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependentSearchOutcome {
    pub best: ScoredRecord,
    /// Stats over the final policy samples.
    pub feasibility_rate: f64,
    pub mean_cost: f64,
    pub mean_quality: f64,
}

/// Train a fresh unconditioned policy for one budget with the same REINFORCE
/// machinery and return its best feasible sample plus final-sample stats.
/// `reward_fn` should be the same dominance-trained evaluator the conditioned
/// run uses; the caller sets `generator.max_steps` so total sampled traces
/// match the conditioned run's per-budget share.
pub fn independent_search(
    space: &SearchSpace,
    cost_model: &CostModel,
    quality_oracle: &QualityOracle,
    budget: f64,
    reward_fn: &mut dyn FnMut(&Architecture, f64) -> f64,
    cfg: &IndependentSearchConfig,
    rng_seed: u64,
) -> Result<IndependentSearchOutcome> {
    let mut model = GeneratorModel::new(space.clone(), None, &cfg.generator, rng_seed);
    train_unconditioned(&mut model, budget, reward_fn, &cfg.generator, rng_seed ^ 0x1234)?;
    let (traces, _) = model.sample_policy(budget, rng_seed ^ 0x5678, cfg.final_samples);
    let mut best: Option<ScoredRecord> = None;
    let mut near_miss_cost = f64::INFINITY;
    let mut near_miss_tokens = Vec::new();
    let mut feasible = 0usize;
    let mut cost_sum = 0.0;
    let mut quality_sum = 0.0;
    for t in &traces {
        let cost = cost_model.cost(&t.arch);
        let quality = quality_oracle.quality(&t.arch)?;
        cost_sum += cost;
        quality_sum += quality;
        if cost > budget {
            if cost < near_miss_cost {
                near_miss_cost = cost;
                near_miss_tokens = t.arch.tokens.clone();
            }
            continue;
        }
        feasible += 1;
        if best.as_ref().map_or(true, |b| quality > b.quality) {
            best = Some(ScoredRecord { arch: t.arch.clone(), cost, quality });
        }
    }
    let n = traces.len() as f64;
    match best {
        Some(best) => Ok(IndependentSearchOutcome {
            best,
            feasibility_rate: feasible as f64 / n,
            mean_cost: cost_sum / n,
            mean_quality: quality_sum / n,
        }),
        None => Err(Error::InfeasibleBudget { budget, near_miss_cost, near_miss_tokens }),
    }
}
