//! Sequential categorical search spaces and the canonical token encoding
//! of architectures.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on brute-force enumeration (entries).
pub const ENUMERATION_CAP: u64 = 1 << 21;

/// One decision site: a name plus the number of options at that position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub name: String,
    pub cardinality: usize,
}

/// An ordered list of decision sites. Site order is fixed and shared by
/// encoding, policy sampling and oracle evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    sites: Vec<Site>,
}

/// Saturating size of a space; `overflowed` is set when the true product
/// exceeds `u64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceSize {
    pub count: u64,
    pub overflowed: bool,
}

impl SearchSpace {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Config("search space must have at least one site".into()));
        }
        for site in &sites {
            if site.cardinality < 2 {
                return Err(Error::Config(format!(
                    "site '{}' has cardinality {}; every site needs at least 2 options",
                    site.name, site.cardinality
                )));
            }
        }
        Ok(SearchSpace { sites })
    }

    /// Convenience constructor from bare cardinalities; sites are named s0, s1, ...
    pub fn from_cardinalities(cards: &[usize]) -> Result<Self> {
        SearchSpace::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &c)| Site { name: format!("s{i}"), cardinality: c })
                .collect(),
        )
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn cardinality(&self, site: usize) -> usize {
        self.sites[site].cardinality
    }

    /// Total one-hot vector length, Σ V_i.
    pub fn one_hot_len(&self) -> usize {
        self.sites.iter().map(|s| s.cardinality).sum()
    }

    pub fn total_size(&self) -> SpaceSize {
        let mut count: u64 = 1;
        let mut overflowed = false;
        for site in &self.sites {
            match count.checked_mul(site.cardinality as u64) {
                Some(c) => count = c,
                None => {
                    count = u64::MAX;
                    overflowed = true;
                }
            }
        }
        SpaceSize { count, overflowed }
    }

    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if arch.tokens.len() != self.sites.len() {
            return Err(Error::InvalidArchitecture(format!(
                "token count {} does not match {} sites",
                arch.tokens.len(),
                self.sites.len()
            )));
        }
        for (i, (&t, site)) in arch.tokens.iter().zip(&self.sites).enumerate() {
            if t >= site.cardinality {
                return Err(Error::InvalidArchitecture(format!(
                    "token {t} at site {i} ('{}') exceeds cardinality {}",
                    site.name, site.cardinality
                )));
            }
        }
        Ok(())
    }
}

/// A point in a search space: one categorical token per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Architecture {
    pub tokens: Vec<usize>,
}

impl Architecture {
    pub fn new(tokens: Vec<usize>) -> Self {
        Architecture { tokens }
    }
}

/// One-hot encoding of an architecture: one block per site, a single 1 in
/// each block at the token offset.
pub fn encode_one_hot(space: &SearchSpace, arch: &Architecture) -> Result<Vec<f64>> {
    space.validate(arch)?;
    let mut v = vec![0.0; space.one_hot_len()];
    let mut offset = 0;
    for (site, &t) in space.sites().iter().zip(&arch.tokens) {
        v[offset + t] = 1.0;
        offset += site.cardinality;
    }
    Ok(v)
}

/// Decode a one-hot vector by per-block argmax.
pub fn decode_one_hot(space: &SearchSpace, v: &[f64]) -> Result<Architecture> {
    if v.len() != space.one_hot_len() {
        return Err(Error::InvalidArchitecture(format!(
            "one-hot length {} does not match expected {}",
            v.len(),
            space.one_hot_len()
        )));
    }
    let mut tokens = Vec::with_capacity(space.num_sites());
    let mut offset = 0;
    for site in space.sites() {
        let block = &v[offset..offset + site.cardinality];
        let argmax = block
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        tokens.push(argmax);
        offset += site.cardinality;
    }
    Ok(Architecture::new(tokens))
}

/// Enumerate every architecture exactly once in lexicographic token order,
/// site 0 most significant. Fails if the space exceeds `cap`.
pub fn enumerate(space: &SearchSpace, cap: u64) -> Result<Enumerator<'_>> {
    let size = space.total_size();
    if size.overflowed || size.count > cap {
        return Err(Error::TooLargeToEnumerate {
            size: if size.overflowed {
                space
                    .sites()
                    .iter()
                    .fold(1u128, |acc, s| acc.saturating_mul(s.cardinality as u128))
            } else {
                size.count as u128
            },
            cap,
        });
    }
    Ok(Enumerator { space, current: Some(vec![0; space.num_sites()]) })
}

pub struct Enumerator<'a> {
    space: &'a SearchSpace,
    current: Option<Vec<usize>>,
}

impl Iterator for Enumerator<'_> {
    type Item = Architecture;

    fn next(&mut self) -> Option<Architecture> {
        let tokens = self.current.take()?;
        let out = Architecture::new(tokens.clone());
        // Odometer increment with site 0 most significant.
        let mut next = tokens;
        for i in (0..next.len()).rev() {
            next[i] += 1;
            if next[i] < self.space.cardinality(i) {
                self.current = Some(next);
                return Some(out);
            }
            next[i] = 0;
        }
        Some(out)
    }
}

/// Draw one architecture with each token uniform over its site.
pub fn sample_one(space: &SearchSpace, rng: &mut impl Rng) -> Architecture {
    let tokens = space
        .sites()
        .iter()
        .map(|s| rng.gen_range(0..s.cardinality))
        .collect();
    Architecture::new(tokens)
}

/// Draw `n` architectures independently and uniformly; deterministic per seed.
pub fn sample_uniform(space: &SearchSpace, rng_seed: u64, n: usize) -> Vec<Architecture> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n).map(|_| sample_one(space, &mut rng)).collect()
}
