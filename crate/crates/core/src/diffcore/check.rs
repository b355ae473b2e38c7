//! Central finite-difference gradient probes. Test oracles live here so they
//! stay independent of the reverse-mode path they verify.

use super::ParamStore;

pub const FD_STEP: f64 = 1e-4;

/// Central finite-difference gradient of `loss` w.r.t. every component of the
/// named parameter. `loss` must be a pure forward evaluation.
pub fn fd_grad_param<F: FnMut(&ParamStore) -> f64>(
    store: &mut ParamStore,
    name: &str,
    mut loss: F,
) -> Vec<f64> {
    let n = store.get(name).len();
    let mut grad = vec![0.0; n];
    for idx in 0..n {
        let orig = store.get(name).data[idx];
        store.get_mut(name).data[idx] = orig + FD_STEP;
        let up = loss(store);
        store.get_mut(name).data[idx] = orig - FD_STEP;
        let down = loss(store);
        store.get_mut(name).data[idx] = orig;
        grad[idx] = (up - down) / (2.0 * FD_STEP);
    }
    grad
}

/// Norm-based relative error ‖a − b‖ / max(‖b‖, ε).
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm < 1e-10 {
        // both essentially zero counts as agreement
        return if diff < 1e-7 { 0.0 } else { diff };
    }
    diff / norm
}
