//! Minimal differentiable-computation substrate: named parameter tensors with
//! gradient accumulators, the closed set of layer computations the evaluator
//! and generator need (affine, LSTM step, embedding row select, log-softmax,
//! entropy, hinge), hand-derived reverse-mode gradients for each, and SGD /
//! Adam updates. 64-bit floats throughout.

pub mod check;
pub mod linalg;
pub mod ops;
pub mod optim;

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub use optim::{Optimizer, OptimizerKind};

/// Dense row-major matrix (vectors are 1 × n) with a same-shape gradient
/// accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols], grad: vec![0.0; rows * cols] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.grad[r * self.cols..(r + 1) * self.cols]
    }
}

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform in [−1/√fan_in, +1/√fan_in].
    UniformFanIn { fan_in: usize },
    Zeros,
    Const(f64),
}

/// Named parameter tensors plus a seeded rng so that construction order fully
/// determines initial values.
#[derive(Debug, Clone)]
pub struct ParamStore {
    tensors: IndexMap<String, Tensor>,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        ParamStore { tensors: IndexMap::new(), rng: ChaCha8Rng::seed_from_u64(rng_seed) }
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init) {
        assert!(
            !self.tensors.contains_key(name),
            "parameter '{name}' registered twice"
        );
        let mut t = Tensor::zeros(rows, cols);
        match init {
            Init::UniformFanIn { fan_in } => {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                for v in &mut t.data {
                    *v = self.rng.gen_range(-bound..bound);
                }
            }
            Init::Zeros => {}
            Init::Const(c) => t.data.fill(c),
        }
        self.tensors.insert(name.to_string(), t);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors.get(name).unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.tensors.get_mut(name).unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_params(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors.values_mut() {
            t.grad.fill(0.0);
        }
    }

    /// Bit-exact binary checkpoint: magic, version, then per tensor its name,
    /// shape and little-endian f64 payload.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"PGCK0001");
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.rows as u32).to_le_bytes());
            buf.extend_from_slice(&(t.cols as u32).to_le_bytes());
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Load a checkpoint saved by [`ParamStore::save`]. Gradient accumulators
    /// come back zeroed; the rng state is fresh from `rng_seed`.
    pub fn load(path: &Path, rng_seed: u64) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::Parse { line: 0, msg: "truncated checkpoint".into() });
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 8)? != b"PGCK0001" {
            return Err(Error::Parse { line: 0, msg: "bad checkpoint magic".into() });
        }
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        let count = read_u32(&mut pos)?;
        let mut store = ParamStore::new(rng_seed);
        for _ in 0..count {
            let name_len = read_u32(&mut pos)? as usize;
            let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
                .map_err(|_| Error::Parse { line: 0, msg: "non-utf8 tensor name".into() })?;
            let rows = read_u32(&mut pos)? as usize;
            let cols = read_u32(&mut pos)? as usize;
            let mut t = Tensor::zeros(rows, cols);
            for v in &mut t.data {
                *v = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
            }
            store.tensors.insert(name, t);
        }
        Ok(store)
    }
}
