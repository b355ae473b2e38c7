//! Budget grid with learnable embeddings and linear interpolation, the
//! budget-conditioned autoregressive policy, REINFORCE training with entropy
//! regularization, and feasibility-aware inference.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::linalg::axpy;
use crate::diffcore::ops::{
    categorical_entropy, entropy_grad_logits, log_softmax, log_softmax_backward, Affine, LstmCache,
    LstmCell,
};
use crate::diffcore::{Init, Optimizer, ParamStore};
use crate::error::{Error, Result};
use crate::oracle::{CostRange, QualityOracle};
use crate::space::{Architecture, SearchSpace};

/// K strictly increasing, evenly spaced budgets with one embedding vector per
/// budget. The grid owns the initial embedding table; the generator copies it
/// into its parameters and trains it jointly, while the evaluator consumes a
/// frozen snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetGrid {
    budgets: Vec<f64>,
    /// K × d_b row-major.
    embeddings: Vec<f64>,
    d_b: usize,
}

/// Interpolation weights for a query budget: at most two adjacent grid rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetWeights {
    pub lower: usize,
    pub upper: usize,
    /// Weight of the lower row, ξ = (B₂ − B) / (B₂ − B₁).
    pub xi: f64,
    pub clamped: bool,
}

impl BudgetGrid {
    pub fn k(&self) -> usize {
        self.budgets.len()
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn embedding(&self, idx: usize) -> &[f64] {
        &self.embeddings[idx * self.d_b..(idx + 1) * self.d_b]
    }

    pub fn embeddings_flat(&self) -> &[f64] {
        &self.embeddings
    }

    /// Interpolation weights for `b`. Exact grid hits return that row with
    /// ξ = 1; out-of-range budgets clamp to the nearest endpoint with a flag.
    pub fn weights(&self, b: f64) -> BudgetWeights {
        let k = self.budgets.len();
        if b <= self.budgets[0] {
            return BudgetWeights { lower: 0, upper: 0, xi: 1.0, clamped: b < self.budgets[0] };
        }
        if b >= self.budgets[k - 1] {
            return BudgetWeights {
                lower: k - 1,
                upper: k - 1,
                xi: 1.0,
                clamped: b > self.budgets[k - 1],
            };
        }
        let upper = self.budgets.partition_point(|&x| x < b);
        if self.budgets[upper] == b {
            return BudgetWeights { lower: upper, upper, xi: 1.0, clamped: false };
        }
        let lower = upper - 1;
        let xi = (self.budgets[upper] - b) / (self.budgets[upper] - self.budgets[lower]);
        BudgetWeights { lower, upper, xi, clamped: false }
    }

    /// Interpolated budget vector from a flat K × d_b table.
    pub fn interpolate(w: &BudgetWeights, table: &[f64], d_b: usize) -> Vec<f64> {
        let lo = &table[w.lower * d_b..(w.lower + 1) * d_b];
        if w.lower == w.upper {
            return lo.to_vec();
        }
        let hi = &table[w.upper * d_b..(w.upper + 1) * d_b];
        lo.iter().zip(hi).map(|(&a, &b)| w.xi * a + (1.0 - w.xi) * b).collect()
    }

    /// Budget vector from the grid's own (initial) table; the bool flags
    /// out-of-range clamping.
    pub fn budget_vector(&self, b: f64) -> (Vec<f64>, bool) {
        let w = self.weights(b);
        (Self::interpolate(&w, &self.embeddings, self.d_b), w.clamped)
    }
}

/// budgets[i] = lo + i·(hi − lo)/(k − 1); embeddings uniform in
/// [−1/√d_b, +1/√d_b] per the parameter-store default.
pub fn build_grid(range: &CostRange, k: usize, d_b: usize, rng_seed: u64) -> Result<BudgetGrid> {
    if k < 2 {
        return Err(Error::Config(format!("budget grid needs k >= 2, got {k}")));
    }
    if !(range.lo < range.hi) || !range.lo.is_finite() || !range.hi.is_finite() {
        return Err(Error::Config(format!("degenerate cost range ({}, {})", range.lo, range.hi)));
    }
    let budgets: Vec<f64> = (0..k)
        .map(|i| range.lo + i as f64 * (range.hi - range.lo) / (k as f64 - 1.0))
        .collect();
    let mut init = ParamStore::new(rng_seed);
    // Unit-scale rows (fan_in 1 ⇒ uniform ±1) rather than fan-in scaled: the
    // budget vector rides alongside a one-hot block of S ones, and a weak
    // budget signal lets per-budget score structure bleed across neighboring
    // budgets (the feasibility cliff of one budget then distorts the
    // ranking at the next). Distinct, strong rows keep budgets separable.
    init.add("budget_emb", k, d_b, Init::UniformFanIn { fan_in: 1 });
    Ok(BudgetGrid { budgets, embeddings: init.get("budget_emb").data.clone(), d_b })
}

/// A sampled architecture with its per-step log-probabilities and entropies.
#[derive(Debug, Clone)]
pub struct PolicyTrace {
    pub arch: Architecture,
    pub log_prob: f64,
    pub step_log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub budget: f64,
}

/// Generator hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub d_h: usize,
    pub token_dim: usize,
    pub lambda: f64,
    pub traces_per_budget: usize,
    pub max_steps: usize,
    pub lr: f64,
    /// Learning rate for the last third of training. A conservative base rate
    /// keeps the policy from committing to a budget-infeasible mode while the
    /// entropy bonus is still large; the late ramp lets it converge once the
    /// bonus has mostly annealed away.
    pub lr_late: f64,
    pub baseline_decay: f64,
}

/// Fraction of training after which `lr_late` replaces `lr`.
const LR_RAMP_FRAC: f64 = 2.0 / 3.0;

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            d_h: 64,
            token_dim: 16,
            lambda: 0.01,
            traces_per_budget: 16,
            max_steps: 3000,
            lr: 3e-4,
            lr_late: 1e-3,
            baseline_decay: 0.95,
        }
    }
}

/// Budget-conditioned recurrent policy. Step i consumes the embedding of the
/// previous token (a learned start token at i = 0) concatenated with the
/// budget vector, and emits logits over site i's options. With an empty
/// budget table (d_b = 0) the policy is unconditioned; the independent-search
/// baseline uses that mode.
pub struct GeneratorModel {
    pub params: ParamStore,
    space: SearchSpace,
    budgets: Vec<f64>,
    d_b: usize,
    d_h: usize,
    token_dim: usize,
    lstm: LstmCell,
    heads: Vec<Affine>,
}

/// Forward caches for one sampled batch at one budget.
pub struct BatchCache {
    weights: BudgetWeights,
    steps: Vec<StepCache>,
    n: usize,
}

struct StepCache {
    lstm: LstmCache,
    h: Vec<f64>,
    log_probs: Vec<f64>, // n × V_i
    tokens: Vec<usize>,
}

impl GeneratorModel {
    /// `grid: None` builds the unconditioned variant.
    pub fn new(space: SearchSpace, grid: Option<&BudgetGrid>, cfg: &GeneratorConfig, rng_seed: u64) -> Self {
        let (d_b, budgets) = match grid {
            Some(g) => (g.d_b(), g.budgets().to_vec()),
            None => (0, Vec::new()),
        };
        let mut params = ParamStore::new(rng_seed);
        if let Some(g) = grid {
            params.add("budget_emb", g.k(), d_b, Init::Zeros);
            params.get_mut("budget_emb").data.copy_from_slice(g.embeddings_flat());
        }
        let token_dim = cfg.token_dim;
        params.add("start_emb", 1, token_dim, Init::UniformFanIn { fan_in: token_dim });
        for i in 0..space.num_sites().saturating_sub(1) {
            params.add(
                &format!("tok_emb.{i}"),
                space.cardinality(i),
                token_dim,
                Init::UniformFanIn { fan_in: token_dim },
            );
        }
        let d_in = token_dim + d_b;
        let lstm = LstmCell::init(&mut params, "lstm", d_in, cfg.d_h);
        let heads: Vec<Affine> = (0..space.num_sites())
            .map(|i| Affine::init(&mut params, &format!("head.{i}"), cfg.d_h, space.cardinality(i)))
            .collect();
        GeneratorModel {
            params,
            space,
            budgets,
            d_b,
            d_h: cfg.d_h,
            token_dim,
            lstm,
            heads,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    /// Same model over a different parameter store (finite-difference probes
    /// perturb a store copy and re-evaluate through this view).
    pub fn with_params(&self, params: ParamStore) -> GeneratorModel {
        GeneratorModel {
            params,
            space: self.space.clone(),
            budgets: self.budgets.clone(),
            d_b: self.d_b,
            d_h: self.d_h,
            token_dim: self.token_dim,
            lstm: self.lstm.clone(),
            heads: self.heads.clone(),
        }
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn is_conditioned(&self) -> bool {
        self.d_b > 0
    }

    fn grid_weights(&self, b: f64) -> BudgetWeights {
        let k = self.budgets.len();
        if k == 0 {
            return BudgetWeights { lower: 0, upper: 0, xi: 1.0, clamped: false };
        }
        // mirror BudgetGrid::weights against the trained table's budget axis
        let tmp = BudgetGrid { budgets: self.budgets.clone(), embeddings: Vec::new(), d_b: 0 };
        tmp.weights(b)
    }

    /// Budget vector from the trained embedding table.
    pub fn budget_vector(&self, b: f64) -> (Vec<f64>, bool) {
        if self.d_b == 0 {
            return (Vec::new(), false);
        }
        let w = self.grid_weights(b);
        let table = &self.params.get("budget_emb").data;
        (BudgetGrid::interpolate(&w, table, self.d_b), w.clamped)
    }

    /// Autoregressive forward over a batch of `n` sequences at one budget.
    /// With `forced` tokens the pass is teacher-forced (used for log-prob
    /// recomputation and finite-difference checks); otherwise tokens are
    /// drawn from the per-step categorical via `rng`.
    pub fn forward_batch(
        &self,
        budget: f64,
        n: usize,
        forced: Option<&[Architecture]>,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<PolicyTrace>, BatchCache) {
        let weights = self.grid_weights(budget);
        let bvec = if self.d_b > 0 {
            BudgetGrid::interpolate(&weights, &self.params.get("budget_emb").data, self.d_b)
        } else {
            Vec::new()
        };
        let s = self.space.num_sites();
        let d_in = self.token_dim + self.d_b;
        let mut h = vec![0.0; n * self.d_h];
        let mut c = vec![0.0; n * self.d_h];
        let mut steps: Vec<StepCache> = Vec::with_capacity(s);
        let mut tokens_so_far: Vec<Vec<usize>> = vec![Vec::with_capacity(s); n];

        for site in 0..s {
            let v = self.space.cardinality(site);
            // assemble inputs: previous-token embedding (start token at site 0)
            let mut x = vec![0.0; n * d_in];
            for r in 0..n {
                let emb: &[f64] = if site == 0 {
                    self.params.get("start_emb").row(0)
                } else {
                    let prev = tokens_so_far[r][site - 1];
                    self.params.get(&format!("tok_emb.{}", site - 1)).row(prev)
                };
                x[r * d_in..r * d_in + self.token_dim].copy_from_slice(emb);
                x[r * d_in + self.token_dim..(r + 1) * d_in].copy_from_slice(&bvec);
            }
            let (h_new, c_new, lstm_cache) = self.lstm.forward(&self.params, &x, &h, &c, n);
            h = h_new;
            c = c_new;
            let logits = self.heads[site].forward(&self.params, &h, n);
            let mut log_probs = vec![0.0; n * v];
            let mut step_tokens = vec![0usize; n];
            for r in 0..n {
                let lp = log_softmax(&logits[r * v..(r + 1) * v]);
                let tok = match forced {
                    Some(archs) => archs[r].tokens[site],
                    None => sample_categorical(&lp, rng),
                };
                step_tokens[r] = tok;
                tokens_so_far[r].push(tok);
                log_probs[r * v..(r + 1) * v].copy_from_slice(&lp);
            }
            steps.push(StepCache { lstm: lstm_cache, h: h.clone(), log_probs, tokens: step_tokens });
        }

        let traces = (0..n)
            .map(|r| {
                let mut step_lp = Vec::with_capacity(s);
                let mut ents = Vec::with_capacity(s);
                for (site, st) in steps.iter().enumerate() {
                    let v = self.space.cardinality(site);
                    let lp = &st.log_probs[r * v..(r + 1) * v];
                    step_lp.push(lp[st.tokens[r]]);
                    ents.push(categorical_entropy(lp));
                }
                PolicyTrace {
                    arch: Architecture::new(tokens_so_far[r].clone()),
                    log_prob: step_lp.iter().sum(),
                    step_log_probs: step_lp,
                    entropies: ents,
                    budget,
                }
            })
            .collect();
        (traces, BatchCache { weights, steps, n })
    }

    /// Sample `n` traces at `budget`; deterministic per seed. The bool flags
    /// budget clamping to the grid range.
    pub fn sample_policy(&self, budget: f64, rng_seed: u64, n: usize) -> (Vec<PolicyTrace>, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let (traces, cache) = self.forward_batch(budget, n, None, &mut rng);
        (traces, cache.weights.clamped)
    }

    /// Recompute log π of a token sequence by teacher forcing.
    pub fn trace_log_prob(&self, arch: &Architecture, budget: f64) -> Result<f64> {
        self.space.validate(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (traces, _) = self.forward_batch(budget, 1, Some(std::slice::from_ref(arch)), &mut rng);
        Ok(traces[0].log_prob)
    }

    /// Teacher-forced surrogate loss for a batch: −(1/n)·Σ_r A_r·log π(α_r)
    /// − λ·(1/n)·Σ_r mean_t H_t. Pure forward; the finite-difference oracle
    /// in the tests differentiates exactly this.
    pub fn surrogate_loss(
        &self,
        budget: f64,
        archs: &[Architecture],
        advantages: &[f64],
        lambda: f64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (traces, _) = self.forward_batch(budget, archs.len(), Some(archs), &mut rng);
        let n = archs.len() as f64;
        let s = self.space.num_sites() as f64;
        let mut loss = 0.0;
        for (tr, &a) in traces.iter().zip(advantages) {
            loss -= a * tr.log_prob / n;
            loss -= lambda * tr.entropies.iter().sum::<f64>() / (s * n);
        }
        loss
    }

    /// Accumulate gradients of the surrogate loss for one sampled batch.
    /// `scale` divides every contribution (1/K for a full grid sweep);
    /// within the batch contributions are averaged over n and, for the
    /// entropy term, over steps.
    pub fn accumulate_batch_grads(
        &mut self,
        cache: &BatchCache,
        advantages: &[f64],
        lambda: f64,
        scale: f64,
    ) {
        let n = cache.n;
        let s = self.space.num_sites();
        let d_in = self.token_dim + self.d_b;
        let inv_n = scale / n as f64;
        let mut dh_next = vec![0.0; n * self.d_h];
        let mut dc_next = vec![0.0; n * self.d_h];
        let mut d_bvec = vec![0.0; self.d_b];

        for site in (0..s).rev() {
            let v = self.space.cardinality(site);
            let st = &cache.steps[site];
            // d loss / d logits for this step
            let mut dlogits = vec![0.0; n * v];
            for r in 0..n {
                let lp = &st.log_probs[r * v..(r + 1) * v];
                let mut dlp = vec![0.0; v];
                dlp[st.tokens[r]] = -advantages[r] * inv_n;
                let mut dz = log_softmax_backward(lp, &dlp);
                let ent = entropy_grad_logits(lp);
                axpy(&mut dz, -lambda * inv_n / s as f64, &ent);
                dlogits[r * v..(r + 1) * v].copy_from_slice(&dz);
            }
            let dh_head = self.heads[site].backward(&mut self.params, &st.h, &dlogits, n);
            let mut dh = dh_next;
            axpy(&mut dh, 1.0, &dh_head);
            let (dx, dhprev, dcprev) = self.lstm.backward(&mut self.params, &st.lstm, &dh, &dc_next);
            dh_next = dhprev;
            dc_next = dcprev;
            // route input grads to token/start embeddings and the budget vector
            for r in 0..n {
                let dx_row = &dx[r * d_in..(r + 1) * d_in];
                if site == 0 {
                    let g = self.params.get_mut("start_emb").grad_row_mut(0);
                    axpy(g, 1.0, &dx_row[..self.token_dim]);
                } else {
                    let prev = cache.steps[site - 1].tokens[r];
                    let g = self
                        .params
                        .get_mut(&format!("tok_emb.{}", site - 1))
                        .grad_row_mut(prev);
                    axpy(g, 1.0, &dx_row[..self.token_dim]);
                }
                axpy(&mut d_bvec, 1.0, &dx_row[self.token_dim..]);
            }
        }
        if self.d_b > 0 {
            let w = cache.weights;
            let emb = self.params.get_mut("budget_emb");
            axpy(emb.grad_row_mut(w.lower), w.xi, &d_bvec);
            if w.upper != w.lower {
                axpy(emb.grad_row_mut(w.upper), 1.0 - w.xi, &d_bvec);
            }
        }
    }
}

fn sample_categorical(log_probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Per-budget exponential moving average of rewards.
#[derive(Debug, Clone)]
pub struct RewardBaseline {
    values: Vec<Option<f64>>,
    decay: f64,
}

impl RewardBaseline {
    pub fn new(k: usize, decay: f64) -> Self {
        RewardBaseline { values: vec![None; k], decay }
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k].unwrap_or(0.0)
    }

    pub fn is_set(&self, k: usize) -> bool {
        self.values[k].is_some()
    }

    pub fn update(&mut self, k: usize, mean_reward: f64) {
        self.values[k] = Some(match self.values[k] {
            Some(v) => self.decay * v + (1.0 - self.decay) * mean_reward,
            None => mean_reward,
        });
    }
}

/// Per-budget means reported by one REINFORCE step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub mean_reward: Vec<f64>,
    pub mean_entropy: Vec<f64>,
}

/// One policy-gradient step over every budget in `budget_list`: N traces per
/// budget, baseline-subtracted rewards, a single ascent update.
#[allow(clippy::too_many_arguments)]
pub fn reinforce_step(
    model: &mut GeneratorModel,
    budget_list: &[f64],
    reward_fn: &mut dyn FnMut(&Architecture, f64) -> f64,
    cfg: &GeneratorConfig,
    baseline: &mut RewardBaseline,
    opt: &mut Optimizer,
    rng: &mut ChaCha8Rng,
    step: usize,
) -> Result<StepReport> {
    let n = cfg.traces_per_budget;
    let k = budget_list.len();
    // TEMP sweep hooks
    let ramp: f64 = std::env::var("RAMP").ok().and_then(|v| v.parse().ok()).unwrap_or(LR_RAMP_FRAC);
    opt.lr = if (step as f64) < ramp * cfg.max_steps as f64 { cfg.lr } else { cfg.lr_late };
    let mut report = StepReport { step, mean_reward: Vec::with_capacity(k), mean_entropy: Vec::with_capacity(k) };
    let mut pending: Vec<(usize, f64)> = Vec::with_capacity(k);
    for (ki, &b) in budget_list.iter().enumerate() {
        let (traces, cache) = model.forward_batch(b, n, None, rng);
        let rewards: Vec<f64> = traces.iter().map(|t| reward_fn(&t.arch, b)).collect();
        if rewards.iter().any(|r| !r.is_finite()) {
            model.params.zero_grads();
            return Err(Error::Numeric(format!("non-finite reward at budget {b}; step skipped")));
        }
        let mean_r = rewards.iter().sum::<f64>() / n as f64;
        let base = if baseline.is_set(ki) { baseline.get(ki) } else { mean_r };
        let advantages: Vec<f64> = rewards.iter().map(|r| r - base).collect();
        // Entropy weight: λ scales the *sum* of per-step entropies and is
        // annealed linearly to zero so exploration pressure vanishes by the
        // end of training and the policy can commit to its best mode.
        let s = model.space().num_sites().max(1) as f64;
        let t = step as f64 / cfg.max_steps.max(1) as f64;
        let pow: f64 = std::env::var("POW").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
        let plat: f64 = std::env::var("PLAT").ok().and_then(|v| v.parse().ok()).unwrap_or(0.0);
        let frac = if t <= plat { 1.0 } else { (1.0 - t) / (1.0 - plat).max(1e-9) };
        let lambda_t = cfg.lambda * s * frac.clamp(0.0, 1.0).powf(pow);
        model.accumulate_batch_grads(&cache, &advantages, lambda_t, 1.0 / k as f64);
        let mean_ent = traces
            .iter()
            .map(|t| t.entropies.iter().sum::<f64>() / t.entropies.len() as f64)
            .sum::<f64>()
            / n as f64;
        report.mean_reward.push(mean_r);
        report.mean_entropy.push(mean_ent);
        pending.push((ki, mean_r));
    }
    opt.step(&mut model.params)?;
    for (ki, mean_r) in pending {
        baseline.update(ki, mean_r);
    }
    Ok(report)
}

/// Full generator training: a grid sweep per step for `max_steps` steps.
/// Budget embeddings train jointly with the rest of θ.
pub fn train_generator(
    model: &mut GeneratorModel,
    reward_fn: &mut dyn FnMut(&Architecture, f64) -> f64,
    cfg: &GeneratorConfig,
    rng_seed: u64,
) -> Result<Vec<StepReport>> {
    let budgets = model.budgets().to_vec();
    let budget_list = if budgets.is_empty() { vec![f64::NAN] } else { budgets };
    if budget_list.iter().any(|b| b.is_nan()) {
        return Err(Error::Config("train_generator requires a conditioned model; use train_unconditioned for single-budget policies".into()));
    }
    let mut baseline = RewardBaseline::new(budget_list.len(), cfg.baseline_decay);
    let mut opt = Optimizer::adam(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut history = Vec::with_capacity(cfg.max_steps);
    for step in 0..cfg.max_steps {
        let report = reinforce_step(
            model,
            &budget_list,
            reward_fn,
            cfg,
            &mut baseline,
            &mut opt,
            &mut rng,
            step,
        )?;
        history.push(report);
    }
    Ok(history)
}

/// Train an unconditioned policy against a single fixed budget.
pub fn train_unconditioned(
    model: &mut GeneratorModel,
    budget: f64,
    reward_fn: &mut dyn FnMut(&Architecture, f64) -> f64,
    cfg: &GeneratorConfig,
    rng_seed: u64,
) -> Result<Vec<StepReport>> {
    let mut baseline = RewardBaseline::new(1, cfg.baseline_decay);
    let mut opt = Optimizer::adam(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut history = Vec::with_capacity(cfg.max_steps);
    for step in 0..cfg.max_steps {
        let report = reinforce_step(
            model,
            &[budget],
            reward_fn,
            cfg,
            &mut baseline,
            &mut opt,
            &mut rng,
            step,
        )?;
        history.push(report);
    }
    Ok(history)
}

/// Inference configuration: candidates per round and the retry cap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InferConfig {
    pub n_infer: usize,
    pub max_rounds: usize,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig { n_infer: 100, max_rounds: 20 }
    }
}

/// Outcome of feasibility-aware inference at one budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferReport {
    pub budget: f64,
    pub arch: Architecture,
    pub cost: f64,
    /// Oracle quality when an oracle was supplied, else the evaluator score.
    pub selection_score: f64,
    /// Feasible fraction over every candidate sampled.
    pub feasibility_rate: f64,
    pub sampled_costs: Vec<f64>,
    pub rounds: usize,
    pub budget_clamped: bool,
}

/// Sample candidates conditioned on the budget, keep the feasible ones, and
/// return the feasible candidate with the best selection score. Repeats up to
/// `max_rounds` fresh batches when a round yields nothing feasible.
pub fn infer(
    model: &GeneratorModel,
    budget: f64,
    cost_fn: &dyn Fn(&Architecture) -> f64,
    quality_oracle: Option<&QualityOracle>,
    mut evaluator_score: Option<&mut dyn FnMut(&Architecture, f64) -> f64>,
    cfg: &InferConfig,
    rng_seed: u64,
) -> Result<InferReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sampled_costs = Vec::new();
    let mut feasible_total = 0usize;
    let mut best: Option<(Architecture, f64, f64)> = None; // arch, cost, score
    let mut near_miss: Option<(Architecture, f64)> = None;
    let mut clamped = false;
    let mut rounds = 0usize;
    for round in 0..cfg.max_rounds {
        rounds = round + 1;
        let (traces, cache_clamped) = {
            let (tr, cache) = model.forward_batch(budget, cfg.n_infer, None, &mut rng);
            (tr, cache.weights.clamped)
        };
        clamped |= cache_clamped;
        for tr in &traces {
            let cost = cost_fn(&tr.arch);
            sampled_costs.push(cost);
            if cost <= budget {
                feasible_total += 1;
                let score = match (&quality_oracle, &mut evaluator_score) {
                    (Some(q), _) => q.quality(&tr.arch)?,
                    (None, Some(f)) => f(&tr.arch, budget),
                    (None, None) => {
                        return Err(Error::Config(
                            "inference needs a quality oracle or an evaluator score".into(),
                        ))
                    }
                };
                if best.as_ref().map_or(true, |(_, _, s)| score > *s) {
                    best = Some((tr.arch.clone(), cost, score));
                }
            } else if near_miss.as_ref().map_or(true, |(_, c)| cost < *c) {
                near_miss = Some((tr.arch.clone(), cost));
            }
        }
        if best.is_some() {
            break;
        }
    }
    match best {
        Some((arch, cost, score)) => Ok(InferReport {
            budget,
            arch,
            cost,
            selection_score: score,
            feasibility_rate: feasible_total as f64 / sampled_costs.len() as f64,
            sampled_costs,
            rounds,
            budget_clamped: clamped,
        }),
        None => {
            let (tokens, cost) = near_miss
                .map(|(a, c)| (a.tokens, c))
                .unwrap_or_else(|| (Vec::new(), f64::INFINITY));
            Err(Error::InfeasibleBudget { budget, near_miss_cost: cost, near_miss_tokens: tokens })
        }
    }
}
