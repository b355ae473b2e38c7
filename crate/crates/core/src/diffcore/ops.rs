//! Layer computations and their reverse-mode gradients. Every forward returns
//! whatever cache its backward needs; backwards accumulate into the gradient
//! buffers of the named parameters.

use super::linalg::{axpy, matmul_nn, matmul_nt_acc, matmul_tn_acc};
use super::{Init, ParamStore};
use crate::error::{Error, Result};

/// Affine layer y = x·Wᵀ + b with W stored (out × in).
#[derive(Debug, Clone)]
pub struct Affine {
    pub w: String,
    pub b: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Affine {
    pub fn init(store: &mut ParamStore, prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        let w = format!("{prefix}.w");
        let b = format!("{prefix}.b");
        store.add(&w, out_dim, in_dim, Init::UniformFanIn { fan_in: in_dim });
        store.add(&b, 1, out_dim, Init::Zeros);
        Affine { w, b, in_dim, out_dim }
    }

    pub fn attach(prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        Affine { w: format!("{prefix}.w"), b: format!("{prefix}.b"), in_dim, out_dim }
    }

    /// x: (batch × in) row-major.
    pub fn forward(&self, store: &ParamStore, x: &[f64], batch: usize) -> Vec<f64> {
        let w = store.get(&self.w);
        let b = store.get(&self.b);
        let mut y = Vec::with_capacity(batch * self.out_dim);
        for _ in 0..batch {
            y.extend_from_slice(&b.data);
        }
        matmul_nt_acc(&mut y, x, batch, self.in_dim, &w.data, self.out_dim);
        y
    }

    /// Accumulates dW, db; returns dx.
    pub fn backward(&self, store: &mut ParamStore, x: &[f64], dy: &[f64], batch: usize) -> Vec<f64> {
        {
            let w = store.get_mut(&self.w);
            matmul_tn_acc(&mut w.grad, dy, batch, self.out_dim, x, self.in_dim);
        }
        {
            let b = store.get_mut(&self.b);
            for r in 0..batch {
                axpy(&mut b.grad, 1.0, &dy[r * self.out_dim..(r + 1) * self.out_dim]);
            }
        }
        let w = store.get(&self.w);
        matmul_nn(dy, batch, self.out_dim, &w.data, self.in_dim)
    }
}

pub fn relu_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// `y` is the relu output; gradient passes where y > 0.
pub fn relu_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(&v, &d)| if v > 0.0 { d } else { 0.0 }).collect()
}

/// Three affine layers with ReLU between, final output one scalar per row.
#[derive(Debug, Clone)]
pub struct DenseStack {
    pub l1: Affine,
    pub l2: Affine,
    pub l3: Affine,
}

pub struct DenseCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    batch: usize,
}

impl DenseStack {
    pub fn init(store: &mut ParamStore, prefix: &str, in_dim: usize, h1: usize, h2: usize) -> Self {
        DenseStack {
            l1: Affine::init(store, &format!("{prefix}.fc1"), in_dim, h1),
            l2: Affine::init(store, &format!("{prefix}.fc2"), h1, h2),
            l3: Affine::init(store, &format!("{prefix}.fc3"), h2, 1),
        }
    }

    pub fn attach(prefix: &str, in_dim: usize, h1: usize, h2: usize) -> Self {
        DenseStack {
            l1: Affine::attach(&format!("{prefix}.fc1"), in_dim, h1),
            l2: Affine::attach(&format!("{prefix}.fc2"), h1, h2),
            l3: Affine::attach(&format!("{prefix}.fc3"), h2, 1),
        }
    }

    /// Returns one scalar per batch row.
    pub fn forward(&self, store: &ParamStore, x: &[f64], batch: usize) -> Result<(Vec<f64>, DenseCache)> {
        let a1 = relu_forward(&self.l1.forward(store, x, batch));
        let a2 = relu_forward(&self.l2.forward(store, &a1, batch));
        let out = self.l3.forward(store, &a2, batch);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite output of dense stack '{}'", self.l3.w)));
        }
        Ok((out, DenseCache { x: x.to_vec(), a1, a2, batch }))
    }

    /// Smallest |preactivation| across both ReLU layers for the given rows.
    /// Central-difference gradient probes are only trustworthy when every
    /// unit sits comfortably farther than the probe step from its kink.
    pub fn relu_kink_margin(&self, store: &ParamStore, x: &[f64], batch: usize) -> f64 {
        let z1 = self.l1.forward(store, x, batch);
        let a1 = relu_forward(&z1);
        let z2 = self.l2.forward(store, &a1, batch);
        z1.iter()
            .chain(z2.iter())
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `dout` has one scalar per row; accumulates all six parameter gradients
    /// and returns dx.
    pub fn backward(&self, store: &mut ParamStore, cache: &DenseCache, dout: &[f64]) -> Vec<f64> {
        let da2 = self.l3.backward(store, &cache.a2, dout, cache.batch);
        let dz2 = relu_backward(&cache.a2, &da2);
        let da1 = self.l2.backward(store, &cache.a1, &dz2, cache.batch);
        let dz1 = relu_backward(&cache.a1, &da1);
        self.l1.backward(store, &cache.x, &dz1, cache.batch)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single-layer LSTM cell. Gate blocks in the 4·d_h dimension are ordered
/// input, forget, candidate, output. The forget-gate bias initializes to 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w: String, // (4H × D)
    pub u: String, // (4H × H)
    pub b: String, // (1 × 4H)
    pub d_in: usize,
    pub d_h: usize,
}

pub struct LstmCache {
    x: Vec<f64>,
    hprev: Vec<f64>,
    cprev: Vec<f64>,
    /// Post-activation gate values, (batch × 4H).
    gates: Vec<f64>,
    c: Vec<f64>,
    batch: usize,
}

impl LstmCell {
    pub fn init(store: &mut ParamStore, prefix: &str, d_in: usize, d_h: usize) -> Self {
        let w = format!("{prefix}.w");
        let u = format!("{prefix}.u");
        let b = format!("{prefix}.b");
        store.add(&w, 4 * d_h, d_in, Init::UniformFanIn { fan_in: d_in });
        store.add(&u, 4 * d_h, d_h, Init::UniformFanIn { fan_in: d_h });
        store.add(&b, 1, 4 * d_h, Init::Zeros);
        store.get_mut(&b).data[d_h..2 * d_h].fill(1.0);
        LstmCell { w, u, b, d_in, d_h }
    }

    pub fn attach(prefix: &str, d_in: usize, d_h: usize) -> Self {
        LstmCell {
            w: format!("{prefix}.w"),
            u: format!("{prefix}.u"),
            b: format!("{prefix}.b"),
            d_in,
            d_h,
        }
    }

    /// One step over a batch: x (B×D), hprev/cprev (B×H) → (h, c, cache).
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        hprev: &[f64],
        cprev: &[f64],
        batch: usize,
    ) -> (Vec<f64>, Vec<f64>, LstmCache) {
        let h = self.d_h;
        let wt = store.get(&self.w);
        let ut = store.get(&self.u);
        let bt = store.get(&self.b);

        let mut pre = Vec::with_capacity(batch * 4 * h);
        for _ in 0..batch {
            pre.extend_from_slice(&bt.data);
        }
        matmul_nt_acc(&mut pre, x, batch, self.d_in, &wt.data, 4 * h);
        matmul_nt_acc(&mut pre, hprev, batch, h, &ut.data, 4 * h);

        let mut gates = vec![0.0; batch * 4 * h];
        let mut c = vec![0.0; batch * h];
        let mut hout = vec![0.0; batch * h];
        for r in 0..batch {
            let p = &pre[r * 4 * h..(r + 1) * 4 * h];
            let g = &mut gates[r * 4 * h..(r + 1) * 4 * h];
            for j in 0..h {
                g[j] = sigmoid(p[j]); // input
                g[h + j] = sigmoid(p[h + j]); // forget
                g[2 * h + j] = p[2 * h + j].tanh(); // candidate
                g[3 * h + j] = sigmoid(p[3 * h + j]); // output
            }
            for j in 0..h {
                let cv = g[h + j] * cprev[r * h + j] + g[j] * g[2 * h + j];
                c[r * h + j] = cv;
                hout[r * h + j] = g[3 * h + j] * cv.tanh();
            }
        }
        let cache = LstmCache {
            x: x.to_vec(),
            hprev: hprev.to_vec(),
            cprev: cprev.to_vec(),
            gates,
            c: c.clone(),
            batch,
        };
        (hout, c, cache)
    }

    /// Backward of one step; returns (dx, dhprev, dcprev) and accumulates
    /// dW, dU, db.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &LstmCache,
        dh: &[f64],
        dc_in: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.d_h;
        let batch = cache.batch;
        let mut dpre = vec![0.0; batch * 4 * h];
        let mut dcprev = vec![0.0; batch * h];
        for r in 0..batch {
            let g = &cache.gates[r * 4 * h..(r + 1) * 4 * h];
            let dp = &mut dpre[r * 4 * h..(r + 1) * 4 * h];
            for j in 0..h {
                let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let cv = cache.c[r * h + j];
                let tc = cv.tanh();
                let dhv = dh[r * h + j];
                let dc = dc_in[r * h + j] + dhv * o * (1.0 - tc * tc);
                let do_ = dhv * tc;
                dp[j] = dc * cand * i * (1.0 - i);
                dp[h + j] = dc * cache.cprev[r * h + j] * f * (1.0 - f);
                dp[2 * h + j] = dc * i * (1.0 - cand * cand);
                dp[3 * h + j] = do_ * o * (1.0 - o);
                dcprev[r * h + j] = dc * f;
            }
        }
        {
            let wt = store.get_mut(&self.w);
            matmul_tn_acc(&mut wt.grad, &dpre, batch, 4 * h, &cache.x, self.d_in);
        }
        {
            let ut = store.get_mut(&self.u);
            matmul_tn_acc(&mut ut.grad, &dpre, batch, 4 * h, &cache.hprev, h);
        }
        {
            let bt = store.get_mut(&self.b);
            for r in 0..batch {
                axpy(&mut bt.grad, 1.0, &dpre[r * 4 * h..(r + 1) * 4 * h]);
            }
        }
        let dx = matmul_nn(&dpre, batch, 4 * h, &store.get(&self.w).data, self.d_in);
        let dhprev = matmul_nn(&dpre, batch, 4 * h, &store.get(&self.u).data, h);
        (dx, dhprev, dcprev)
    }
}

/// Numerically stable log-softmax (max subtraction).
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&z| z - log_z).collect()
}

/// dL/dlogits given dL/dlogp: dz_i = dlogp_i − p_i · Σ_j dlogp_j.
pub fn log_softmax_backward(logp: &[f64], dlogp: &[f64]) -> Vec<f64> {
    let total: f64 = dlogp.iter().sum();
    logp.iter()
        .zip(dlogp)
        .map(|(&lp, &d)| d - lp.exp() * total)
        .collect()
}

/// H = −Σ p·log p from log-probabilities; entries with underflowed p
/// contribute zero.
pub fn categorical_entropy(logp: &[f64]) -> f64 {
    logp.iter()
        .map(|&lp| {
            let p = lp.exp();
            if p > 0.0 {
                -p * lp
            } else {
                0.0
            }
        })
        .sum()
}

/// dH/dlogits for H computed from softmax(logits): −p_j·(log p_j + H).
pub fn entropy_grad_logits(logp: &[f64]) -> Vec<f64> {
    let h = categorical_entropy(logp);
    logp.iter()
        .map(|&lp| {
            let p = lp.exp();
            -p * (lp + h)
        })
        .collect()
}

/// Hinge φ(z) = max(0, 1 − z).
pub fn hinge(z: f64) -> f64 {
    (1.0 - z).max(0.0)
}

/// Subgradient of the hinge (0 at the kink).
pub fn hinge_grad(z: f64) -> f64 {
    if z < 1.0 {
        -1.0
    } else {
        0.0
    }
}
