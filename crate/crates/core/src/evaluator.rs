//! The Pareto dominance comparator and the learned architecture evaluator
//! trained with a pairwise ranking hinge loss against dominance verdicts.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::ops::{hinge, hinge_grad, DenseStack};
use crate::diffcore::{Optimizer, ParamStore};
use crate::error::{Error, Result};
use crate::generator::BudgetGrid;
use crate::oracle::ScoredRecord;
use crate::space::{encode_one_hot, Architecture, SearchSpace};

/// Dominance comparison rule. `Full` decides by quality when both records
/// meet the budget and by cost otherwise; `CostOnly` applies the cost branch
/// unconditionally (the ablation that drops the accuracy constraint).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominanceRule {
    Full,
    CostOnly,
}

impl DominanceRule {
    /// {+1, −1, 0}; 0 marks an exact tie, which training excludes so the
    /// comparator stays antisymmetric.
    pub fn verdict(&self, r1: &ScoredRecord, r2: &ScoredRecord, budget: f64) -> i8 {
        match self {
            DominanceRule::Full => dominance(r1, r2, budget),
            DominanceRule::CostOnly => dominance_cost_only(r1, r2),
        }
    }
}

/// Pareto dominance under a budget: when both costs are within the budget the
/// higher quality wins; otherwise the lower cost wins. Exact ties return 0.
pub fn dominance(r1: &ScoredRecord, r2: &ScoredRecord, budget: f64) -> i8 {
    let feasible = r1.cost <= budget && r2.cost <= budget;
    if feasible {
        if r1.quality > r2.quality {
            1
        } else if r1.quality < r2.quality {
            -1
        } else {
            0
        }
    } else if r1.cost < r2.cost {
        1
    } else if r1.cost > r2.cost {
        -1
    } else {
        0
    }
}

/// Cost-only variant: the cost branch applied unconditionally.
pub fn dominance_cost_only(r1: &ScoredRecord, r2: &ScoredRecord) -> i8 {
    if r1.cost < r2.cost {
        1
    } else if r1.cost > r2.cost {
        -1
    } else {
        0
    }
}

/// Evaluator hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatorConfig {
    pub hidden: (usize, usize),
    /// Ordered non-tied pairs per iteration, split across the grid budgets.
    pub batch_size: usize,
    pub max_iters: usize,
    pub lr: f64,
    /// The learning rate decays geometrically from `lr` to `lr_final` over
    /// `max_iters`; the late small steps let the scores settle the ranking
    /// margins near each budget's feasibility boundary instead of orbiting
    /// them at a fixed step size.
    pub lr_final: f64,
    /// Early stop when the windowed moving-average loss has not improved by
    /// `tol` within `patience` iterations.
    pub tol: f64,
    pub patience: usize,
    pub holdout_frac: f64,
    pub agreement_pairs: usize,
    pub rule: DominanceRule,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            hidden: (256, 128),
            batch_size: 256,
            max_iters: 16_000,
            lr: 1e-3,
            lr_final: 1e-4,
            tol: 1e-5,
            patience: 3000,
            holdout_frac: 0.1,
            agreement_pairs: 20_000,
            rule: DominanceRule::Full,
        }
    }
}

/// Learned scorer R(β|B; w): a three-layer dense stack over the one-hot
/// architecture encoding concatenated with the (frozen) budget embedding.
pub struct EvaluatorModel {
    pub params: ParamStore,
    stack: DenseStack,
    space: SearchSpace,
    budgets: Vec<f64>,
    /// Frozen snapshot of the grid embedding table (K × d_b).
    budget_table: Vec<f64>,
    d_b: usize,
}

impl EvaluatorModel {
    pub fn new(space: SearchSpace, grid: &BudgetGrid, cfg: &EvaluatorConfig, rng_seed: u64) -> Self {
        let in_dim = space.one_hot_len() + grid.d_b();
        let mut params = ParamStore::new(rng_seed);
        let stack = DenseStack::init(&mut params, "eval", in_dim, cfg.hidden.0, cfg.hidden.1);
        EvaluatorModel {
            params,
            stack,
            space,
            budgets: grid.budgets().to_vec(),
            budget_table: grid.embeddings_flat().to_vec(),
            d_b: grid.d_b(),
        }
    }

    /// Same model over a different parameter store (finite-difference probes
    /// perturb a store copy and re-evaluate through this view).
    pub fn with_params(&self, params: ParamStore) -> EvaluatorModel {
        EvaluatorModel {
            params,
            stack: self.stack.clone(),
            space: self.space.clone(),
            budgets: self.budgets.clone(),
            budget_table: self.budget_table.clone(),
            d_b: self.d_b,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    fn in_dim(&self) -> usize {
        self.space.one_hot_len() + self.d_b
    }

    /// Budget embedding via grid interpolation over the frozen table.
    fn budget_vec(&self, budget: f64) -> (Vec<f64>, bool) {
        let probe = BudgetGridProbe { budgets: &self.budgets };
        let w = probe.weights(budget);
        (BudgetGrid::interpolate(&w, &self.budget_table, self.d_b), w.clamped)
    }

    fn input_row(&self, one_hot: &[f64], bvec: &[f64], out: &mut [f64]) {
        out[..one_hot.len()].copy_from_slice(one_hot);
        out[one_hot.len()..].copy_from_slice(bvec);
    }

    /// Score one architecture under a budget. The bool flags a budget clamped
    /// to the grid range.
    pub fn evaluate(&self, arch: &Architecture, budget: f64) -> Result<(f64, bool)> {
        let one_hot = encode_one_hot(&self.space, arch)?;
        let (bvec, clamped) = self.budget_vec(budget);
        let mut x = vec![0.0; self.in_dim()];
        self.input_row(&one_hot, &bvec, &mut x);
        let (out, _) = self.stack.forward(&self.params, &x, 1)?;
        Ok((out[0], clamped))
    }

    /// Batched scoring of pre-assembled input rows.
    fn forward_rows(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.stack.forward(&self.params, x, batch)?.0)
    }

    /// Smallest |ReLU preactivation| over all (record, budget) inputs.
    /// Finite-difference probes of the ranking loss are valid only when this
    /// margin comfortably exceeds the probe step (the loss is piecewise
    /// smooth and central differences lie across kinks).
    pub fn relu_kink_margin(&self, records: &[ScoredRecord], budgets: &[f64]) -> Result<f64> {
        let mut margin = f64::INFINITY;
        let mut x = vec![0.0; self.in_dim()];
        for r in records {
            let one_hot = encode_one_hot(&self.space, &r.arch)?;
            for &b in budgets {
                let (bvec, _) = self.budget_vec(b);
                self.input_row(&one_hot, &bvec, &mut x);
                margin = margin.min(self.stack.relu_kink_margin(&self.params, &x, 1));
            }
        }
        Ok(margin)
    }
}

/// Interpolation weights without an embedding table (the evaluator keeps its
/// own frozen copy).
struct BudgetGridProbe<'a> {
    budgets: &'a [f64],
}

impl BudgetGridProbe<'_> {
    fn weights(&self, b: f64) -> crate::generator::BudgetWeights {
        use crate::generator::BudgetWeights;
        let k = self.budgets.len();
        if b <= self.budgets[0] {
            return BudgetWeights { lower: 0, upper: 0, xi: 1.0, clamped: b < self.budgets[0] };
        }
        if b >= self.budgets[k - 1] {
            return BudgetWeights { lower: k - 1, upper: k - 1, xi: 1.0, clamped: b > self.budgets[k - 1] };
        }
        let upper = self.budgets.partition_point(|&x| x < b);
        if self.budgets[upper] == b {
            return BudgetWeights { lower: upper, upper, xi: 1.0, clamped: false };
        }
        let lower = upper - 1;
        let xi = (self.budgets[upper] - b) / (self.budgets[upper] - self.budgets[lower]);
        BudgetWeights { lower, upper, xi, clamped: false }
    }
}

/// One ordered training pair with its precomputed verdict.
#[derive(Debug, Clone)]
pub struct RankedPair {
    pub i: usize,
    pub j: usize,
    pub budget_idx: usize,
    pub verdict: i8,
}

/// Mean hinge loss φ(d·(R_i − R_j)) over a pair batch.
pub fn ranking_loss(
    model: &EvaluatorModel,
    records: &[ScoredRecord],
    pairs: &[RankedPair],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Config("empty pair batch".into()));
    }
    let scores = score_pairs(model, records, pairs)?;
    let mut loss = 0.0;
    for (p, (ri, rj)) in pairs.iter().zip(&scores) {
        loss += hinge(p.verdict as f64 * (ri - rj));
    }
    Ok(loss / pairs.len() as f64)
}

/// `ranking_loss` plus gradient accumulation into the model's parameters.
pub fn ranking_loss_grads(
    model: &mut EvaluatorModel,
    records: &[ScoredRecord],
    pairs: &[RankedPair],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Config("empty pair batch".into()));
    }
    let in_dim = model.in_dim();
    let mut x = vec![0.0; 2 * pairs.len() * in_dim];
    for (p_idx, p) in pairs.iter().enumerate() {
        let one_i = encode_one_hot(&model.space, &records[p.i].arch)?;
        let one_j = encode_one_hot(&model.space, &records[p.j].arch)?;
        let (bvec, _) = model.budget_vec(model.budgets[p.budget_idx]);
        model.input_row(&one_i, &bvec, &mut x[2 * p_idx * in_dim..(2 * p_idx + 1) * in_dim]);
        model.input_row(&one_j, &bvec, &mut x[(2 * p_idx + 1) * in_dim..(2 * p_idx + 2) * in_dim]);
    }
    let (out, cache) = model.stack.forward(&model.params, &x, 2 * pairs.len())?;
    let inv_p = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    let mut dout = vec![0.0; 2 * pairs.len()];
    for (p_idx, p) in pairs.iter().enumerate() {
        let z = p.verdict as f64 * (out[2 * p_idx] - out[2 * p_idx + 1]);
        loss += hinge(z) * inv_p;
        let g = hinge_grad(z) * p.verdict as f64 * inv_p;
        dout[2 * p_idx] += g;
        dout[2 * p_idx + 1] -= g;
    }
    model.stack.backward(&mut model.params, &cache, &dout);
    Ok(loss)
}

fn score_pairs(
    model: &EvaluatorModel,
    records: &[ScoredRecord],
    pairs: &[RankedPair],
) -> Result<Vec<(f64, f64)>> {
    let in_dim = model.in_dim();
    let mut x = vec![0.0; 2 * pairs.len() * in_dim];
    for (p_idx, p) in pairs.iter().enumerate() {
        let one_i = encode_one_hot(&model.space, &records[p.i].arch)?;
        let one_j = encode_one_hot(&model.space, &records[p.j].arch)?;
        let (bvec, _) = model.budget_vec(model.budgets[p.budget_idx]);
        model.input_row(&one_i, &bvec, &mut x[2 * p_idx * in_dim..(2 * p_idx + 1) * in_dim]);
        model.input_row(&one_j, &bvec, &mut x[(2 * p_idx + 1) * in_dim..(2 * p_idx + 2) * in_dim]);
    }
    let out = model.forward_rows(&x, 2 * pairs.len())?;
    Ok(pairs.iter().enumerate().map(|(k, _)| (out[2 * k], out[2 * k + 1])).collect())
}

/// One training-log row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalLogRow {
    pub iter: usize,
    pub loss: f64,
    pub holdout_agreement: Option<f64>,
}

/// Trained evaluator plus its log and final held-out pair agreement.
pub struct EvaluatorTraining {
    pub model: EvaluatorModel,
    pub log: Vec<EvalLogRow>,
    pub holdout_agreement: f64,
}

/// Train the evaluator by mini-batch descent on the pairwise hinge loss.
/// Each iteration sweeps the grid budgets and samples uniform ordered
/// non-tied pairs per budget; 10% of the records are held out for the
/// agreement measurement.
pub fn train_evaluator(
    records: &[ScoredRecord],
    grid: &BudgetGrid,
    space: &SearchSpace,
    cfg: &EvaluatorConfig,
    rng_seed: u64,
) -> Result<EvaluatorTraining> {
    if records.len() < 2 {
        return Err(Error::Config(format!("need at least 2 records, got {}", records.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // deterministic shuffle, then split
    let mut order: Vec<usize> = (0..records.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_holdout = ((records.len() as f64 * cfg.holdout_frac) as usize)
        .min(records.len().saturating_sub(2));
    let holdout: Vec<ScoredRecord> = order[..n_holdout].iter().map(|&i| records[i].clone()).collect();
    let train: Vec<ScoredRecord> = order[n_holdout..].iter().map(|&i| records[i].clone()).collect();

    // budgets with at least one non-tied pair; error if there are none at all
    let usable: Vec<usize> = (0..grid.k())
        .filter(|&k| budget_has_nontied_pair(&train, grid.budgets()[k], cfg.rule, &mut rng))
        .collect();
    if usable.is_empty() {
        return Err(Error::DegenerateData(
            "every sampled architecture pair is tied under every budget".into(),
        ));
    }

    let mut model = EvaluatorModel::new(space.clone(), grid, cfg, rng_seed ^ 0xABCD_EF01);
    let mut opt = Optimizer::adam(cfg.lr);
    let mut log = Vec::new();

    let pairs_per_budget = (cfg.batch_size / usable.len()).max(1);
    let in_dim = model.in_dim();
    // precompute one-hot encodings and per-budget embedding rows
    let one_hots: Vec<Vec<f64>> = train
        .iter()
        .map(|r| encode_one_hot(space, &r.arch))
        .collect::<Result<_>>()?;
    let bvecs: Vec<Vec<f64>> = grid.budgets().iter().map(|&b| model.budget_vec(b).0).collect();

    let window = 50usize;
    let mut recent: Vec<f64> = Vec::with_capacity(window);
    let mut best_ma = f64::INFINITY;
    let mut best_iter = 0usize;

    let lr_ratio = if cfg.lr > 0.0 { (cfg.lr_final / cfg.lr).max(f64::MIN_POSITIVE) } else { 1.0 };
    for iter in 0..cfg.max_iters {
        opt.lr = cfg.lr * lr_ratio.powf(iter as f64 / cfg.max_iters.max(1) as f64);
        // sample the iteration's pair batch
        let mut pairs: Vec<RankedPair> = Vec::with_capacity(pairs_per_budget * usable.len());
        for &k in &usable {
            let budget = grid.budgets()[k];
            let mut got = 0usize;
            let mut attempts = 0usize;
            while got < pairs_per_budget && attempts < pairs_per_budget * 100 {
                attempts += 1;
                let i = rng.gen_range(0..train.len());
                let j = rng.gen_range(0..train.len());
                if i == j {
                    continue;
                }
                let d = cfg.rule.verdict(&train[i], &train[j], budget);
                if d == 0 {
                    continue;
                }
                pairs.push(RankedPair { i, j, budget_idx: k, verdict: d });
                got += 1;
            }
        }
        if pairs.is_empty() {
            return Err(Error::DegenerateData("could not sample any non-tied pair".into()));
        }

        let batch = 2 * pairs.len();
        let mut x = vec![0.0; batch * in_dim];
        for (p_idx, p) in pairs.iter().enumerate() {
            model.input_row(&one_hots[p.i], &bvecs[p.budget_idx], &mut x[2 * p_idx * in_dim..(2 * p_idx + 1) * in_dim]);
            model.input_row(&one_hots[p.j], &bvecs[p.budget_idx], &mut x[(2 * p_idx + 1) * in_dim..(2 * p_idx + 2) * in_dim]);
        }
        let (out, cache) = model.stack.forward(&model.params, &x, batch)?;
        let mut dout = vec![0.0; batch];
        let mut loss = 0.0;
        let inv_p = 1.0 / pairs.len() as f64;
        for (p_idx, p) in pairs.iter().enumerate() {
            let d = p.verdict as f64;
            let z = d * (out[2 * p_idx] - out[2 * p_idx + 1]);
            loss += hinge(z) * inv_p;
            let g = hinge_grad(z) * d * inv_p;
            dout[2 * p_idx] += g;
            dout[2 * p_idx + 1] -= g;
        }
        model.stack.backward(&mut model.params, &cache, &dout);
        opt.step(&mut model.params)?;

        if recent.len() == window {
            recent.remove(0);
        }
        recent.push(loss);
        let ma = recent.iter().sum::<f64>() / recent.len() as f64;
        if iter >= window {
            if ma < best_ma - cfg.tol {
                best_ma = ma;
                best_iter = iter;
            } else if iter - best_iter > cfg.patience {
                log.push(EvalLogRow { iter, loss, holdout_agreement: None });
                break;
            }
        }
        if iter % 50 == 0 {
            log.push(EvalLogRow { iter, loss, holdout_agreement: None });
        }
    }

    let eval_set = if holdout.is_empty() { &train } else { &holdout };
    let agreement = pair_agreement(
        &model,
        eval_set,
        cfg.rule,
        cfg.agreement_pairs,
        rng_seed ^ 0x5151_0000,
    )?;
    if let Some(last) = log.last_mut() {
        last.holdout_agreement = Some(agreement);
    }
    Ok(EvaluatorTraining { model, log, holdout_agreement: agreement })
}

fn budget_has_nontied_pair(
    records: &[ScoredRecord],
    budget: f64,
    rule: DominanceRule,
    rng: &mut ChaCha8Rng,
) -> bool {
    // exhaustive for small sets, sampled probe otherwise
    if records.len() <= 64 {
        for i in 0..records.len() {
            for j in 0..records.len() {
                if i != j && rule.verdict(&records[i], &records[j], budget) != 0 {
                    return true;
                }
            }
        }
        return false;
    }
    for _ in 0..2000 {
        let i = rng.gen_range(0..records.len());
        let j = rng.gen_range(0..records.len());
        if i != j && rule.verdict(&records[i], &records[j], budget) != 0 {
            return true;
        }
    }
    false
}

/// Fraction of random non-tied ordered pairs whose evaluator ordering agrees
/// with the dominance verdict, measured across the grid budgets.
pub fn pair_agreement(
    model: &EvaluatorModel,
    records: &[ScoredRecord],
    rule: DominanceRule,
    n_pairs: usize,
    rng_seed: u64,
) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::EmptyDataset("need at least 2 records for pair agreement".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut attempts = 0usize;
    while pairs.len() < n_pairs && attempts < n_pairs * 100 {
        attempts += 1;
        let i = rng.gen_range(0..records.len());
        let j = rng.gen_range(0..records.len());
        let k = rng.gen_range(0..model.budgets.len());
        if i == j {
            continue;
        }
        let d = rule.verdict(&records[i], &records[j], model.budgets[k]);
        if d == 0 {
            continue;
        }
        pairs.push(RankedPair { i, j, budget_idx: k, verdict: d });
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateData("no non-tied pairs available for agreement".into()));
    }
    let scores = score_pairs(model, records, &pairs)?;
    let agree = pairs
        .iter()
        .zip(&scores)
        .filter(|(p, (ri, rj))| (ri - rj) * p.verdict as f64 > 0.0)
        .count();
    Ok(agree as f64 / pairs.len() as f64)
}
