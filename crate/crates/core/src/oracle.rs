//! Cost and quality oracles: an additive per-site cost model plus either a
//! tabular lookup or a seeded synthetic quality landscape. Replaces trained
//! weight-sharing evaluation at desk scale with exact, reproducible lookups.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{sample_one, Architecture, SearchSpace, Site};

/// An architecture with its measured cost and quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub arch: Architecture,
    /// Abstract cost units (latency analog); strictly positive.
    pub cost: f64,
    /// Quality as a fraction in [0, 1].
    pub quality: f64,
}

impl ScoredRecord {
    pub fn new(arch: Architecture, cost: f64, quality: f64) -> Result<Self> {
        if !(cost > 0.0) {
            return Err(Error::Config(format!("cost must be positive, got {cost}")));
        }
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::Config(format!("quality must lie in [0,1], got {quality}")));
        }
        Ok(ScoredRecord { arch, cost, quality })
    }
}

/// Additive cost model: c(α) = base + Σ_i table[i][tokens[i]].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostModel {
    pub base_cost: f64,
    pub per_site_cost: Vec<Vec<f64>>,
}

impl CostModel {
    pub fn cost(&self, arch: &Architecture) -> f64 {
        self.base_cost
            + arch
                .tokens
                .iter()
                .enumerate()
                .map(|(i, &t)| self.per_site_cost[i][t])
                .sum::<f64>()
    }

    /// Smallest achievable cost over the whole space.
    pub fn min_cost(&self) -> f64 {
        self.base_cost
            + self
                .per_site_cost
                .iter()
                .map(|site| site.iter().cloned().fold(f64::INFINITY, f64::min))
                .sum::<f64>()
    }

    /// Largest achievable cost over the whole space.
    pub fn max_cost(&self) -> f64 {
        self.base_cost
            + self
                .per_site_cost
                .iter()
                .map(|site| site.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .sum::<f64>()
    }
}

/// Deterministic quality source: a tabular lookup or a seeded synthetic
/// landscape with per-site utilities and adjacent-pair interactions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum QualityOracle {
    Tabular { table: HashMap<Architecture, f64> },
    Synthetic(SyntheticLandscape),
}

/// quality = logistic((Σ_i u[i][t_i] + Σ_i w[i][t_i, t_{i+1}] − center) / scale)
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticLandscape {
    /// Per-site option utilities u[i][v].
    pub utilities: Vec<Vec<f64>>,
    /// Adjacent-pair interaction weights, one row-major V_i × V_{i+1} matrix
    /// per consecutive site pair.
    pub interactions: Vec<Vec<f64>>,
    pub center: f64,
    pub scale: f64,
    cardinalities: Vec<usize>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SyntheticLandscape {
    fn raw_score(&self, arch: &Architecture) -> f64 {
        let mut s: f64 = arch
            .tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| self.utilities[i][t])
            .sum();
        for i in 0..arch.tokens.len().saturating_sub(1) {
            let cols = self.cardinalities[i + 1];
            s += self.interactions[i][arch.tokens[i] * cols + arch.tokens[i + 1]];
        }
        s
    }

    pub fn quality(&self, arch: &Architecture) -> f64 {
        logistic((self.raw_score(arch) - self.center) / self.scale)
    }
}

impl QualityOracle {
    pub fn quality(&self, arch: &Architecture) -> Result<f64> {
        match self {
            QualityOracle::Tabular { table } => table.get(arch).copied().ok_or_else(|| {
                Error::EmptyDataset(format!("architecture {:?} not present in tabular oracle", arch.tokens))
            }),
            QualityOracle::Synthetic(land) => Ok(land.quality(arch)),
        }
    }
}

/// Observed cost percentile bounds over a uniform sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRange {
    pub lo: f64,
    pub hi: f64,
}

/// Build a seeded synthetic (cost model, quality oracle) pair. `tradeoff` in
/// [0,1] couples per-site utility to per-site cost: at 1 the costliest option
/// at a site is also the most useful, producing a nontrivial frontier.
pub fn make_synthetic(
    space: &SearchSpace,
    rng_seed: u64,
    tradeoff: f64,
) -> Result<(CostModel, QualityOracle)> {
    if !(0.0..=1.0).contains(&tradeoff) {
        return Err(Error::Config(format!("tradeoff must lie in [0,1], got {tradeoff}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let per_site_cost: Vec<Vec<f64>> = space
        .sites()
        .iter()
        .map(|s| (0..s.cardinality).map(|_| rng.gen_range(1.0..10.0)).collect())
        .collect();

    let utilities: Vec<Vec<f64>> = per_site_cost
        .iter()
        .map(|costs| {
            let lo = costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            costs
                .iter()
                .map(|&c| {
                    let norm = if hi > lo { (c - lo) / (hi - lo) } else { 0.5 };
                    tradeoff * norm + (1.0 - tradeoff) * rng.gen_range(0.0..1.0)
                })
                .collect()
        })
        .collect();

    let cards: Vec<usize> = space.sites().iter().map(|s| s.cardinality).collect();
    let interactions: Vec<Vec<f64>> = (0..cards.len().saturating_sub(1))
        .map(|i| {
            (0..cards[i] * cards[i + 1])
                .map(|_| rng.gen_range(-0.1..0.1))
                .collect()
        })
        .collect();

    let mut land = SyntheticLandscape {
        utilities,
        interactions,
        center: 0.0,
        scale: 1.0,
        cardinalities: cards,
    };

    // Center and scale from 1024 seeded uniform samples of the raw score.
    let mut calib_rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x9e37_79b9_7f4a_7c15);
    let scores: Vec<f64> = (0..1024)
        .map(|_| land.raw_score(&sample_one(space, &mut calib_rng)))
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
    let sd = var.sqrt();
    land.center = mean;
    land.scale = if sd > 1e-12 { sd } else { 1.0 };

    let cost_model = CostModel { base_cost: 0.0, per_site_cost };
    Ok((cost_model, QualityOracle::Synthetic(land)))
}

/// Sample `m` architectures uniformly, dedup by architecture (resampling up
/// to 10·m extra attempts, then tolerating duplicates with a warning), and
/// score each one. Deterministic per seed.
pub fn collect_records(
    space: &SearchSpace,
    cost_model: &CostModel,
    quality_oracle: &QualityOracle,
    m: usize,
    rng_seed: u64,
) -> Result<Vec<ScoredRecord>> {
    if m < 2 {
        return Err(Error::Config(format!("need at least 2 records, got m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seen: HashSet<Architecture> = HashSet::with_capacity(m);
    let mut archs: Vec<Architecture> = Vec::with_capacity(m);
    let retry_cap = m.saturating_mul(10);
    let mut attempts = 0usize;
    let mut dedup = true;
    while archs.len() < m {
        let a = sample_one(space, &mut rng);
        attempts += 1;
        if dedup && attempts >= retry_cap {
            log::warn!(
                "duplicate retry cap exhausted after {attempts} attempts; allowing duplicate architectures"
            );
            dedup = false;
        }
        if dedup && seen.contains(&a) {
            continue;
        }
        seen.insert(a.clone());
        archs.push(a);
    }
    archs
        .into_iter()
        .map(|a| {
            let cost = cost_model.cost(&a);
            let quality = quality_oracle.quality(&a)?;
            ScoredRecord::new(a, cost, quality)
        })
        .collect()
}

/// Linear-interpolated empirical percentile (rank = p/100·(n−1)).
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n as f64 - 1.0);
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Empirical percentile bounds of record costs.
pub fn estimate_cost_range(records: &[ScoredRecord], lo_pct: f64, hi_pct: f64) -> Result<CostRange> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("no records to estimate a cost range from".into()));
    }
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::Config(format!(
            "percentiles must satisfy 0 <= lo < hi <= 100, got ({lo_pct}, {hi_pct})"
        )));
    }
    let mut costs: Vec<f64> = records.iter().map(|r| r.cost).collect();
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = percentile(&costs, lo_pct);
    let hi = percentile(&costs, hi_pct);
    if lo >= hi {
        return Err(Error::DegenerateRange(lo));
    }
    Ok(CostRange { lo, hi })
}

/// Parse a tabular benchmark file.
///
/// UTF-8 CSV: the first header line declares sites as comma-separated
/// `name:cardinality`; each data row is the token list followed by a positive
/// cost and a quality. Quality values > 1 are interpreted as percentages and
/// divided by 100 (one warning per file).
pub fn load_tabular(path: &Path) -> Result<(SearchSpace, Vec<ScoredRecord>)> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing header line".into() })?;
    let header = header?;
    let mut sites = Vec::new();
    for part in header.split(',') {
        let (name, card) = part.trim().split_once(':').ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("header entry '{part}' is not name:cardinality"),
        })?;
        let cardinality: usize = card.trim().parse().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("cardinality '{card}' is not an integer"),
        })?;
        sites.push(Site { name: name.trim().to_string(), cardinality });
    }
    let space = SearchSpace::new(sites)?;
    let n_sites = space.num_sites();

    // First pass keeps raw qualities: a file is either all fractions (<= 1)
    // or all percentages (> 1); mixed files reject the out-of-range rows.
    let mut rows: Vec<(usize, Architecture, f64, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n_sites + 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, got {}", n_sites + 2, fields.len()),
            });
        }
        let mut tokens = Vec::with_capacity(n_sites);
        for f in &fields[..n_sites] {
            tokens.push(f.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("token '{f}' is not a non-negative integer"),
            })?);
        }
        let arch = Architecture::new(tokens);
        space.validate(&arch).map_err(|e| Error::Parse {
            line: line_no,
            msg: format!("row {}: {e}", rows.len()),
        })?;
        let cost: f64 = fields[n_sites].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cost '{}' is not a number", fields[n_sites]),
        })?;
        let quality: f64 = fields[n_sites + 1].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("quality '{}' is not a number", fields[n_sites + 1]),
        })?;
        if !(cost > 0.0) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("row {}: cost must be positive, got {cost}", rows.len()),
            });
        }
        if quality < 0.0 || quality > 100.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("row {}: quality out of range: {quality}", rows.len()),
            });
        }
        rows.push((line_no, arch, cost, quality));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no data rows", path.display())));
    }

    let percentages = rows.iter().all(|&(_, _, _, q)| q > 1.0);
    if percentages {
        log::warn!("{}: quality values > 1 interpreted as percentages", path.display());
    }
    let mut records = Vec::with_capacity(rows.len());
    for (row_idx, (line_no, arch, cost, quality)) in rows.into_iter().enumerate() {
        let quality = if percentages { quality / 100.0 } else { quality };
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("row {row_idx}: quality out of range: {quality}"),
            });
        }
        records.push(ScoredRecord { arch, cost, quality });
    }
    Ok((space, records))
}

/// Build a tabular oracle and exact additive-equivalent cost lookup from
/// records. Cost queries fall back to the table; used by `import-bench`.
pub fn tabular_oracle(records: &[ScoredRecord]) -> QualityOracle {
    QualityOracle::Tabular {
        table: records.iter().map(|r| (r.arch.clone(), r.quality)).collect(),
    }
}
