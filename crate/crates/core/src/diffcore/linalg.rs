//! Row-major matrix kernels. Loop order keeps the inner loop over contiguous
//! slices so the compiler can vectorize.

/// out += A (m×k) · B (k×n)
pub fn matmul_nn_acc(out: &mut [f64], a: &[f64], m: usize, k: usize, b: &[f64], n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * b_pj;
            }
        }
    }
}

/// A (m×k) · B (k×n)
pub fn matmul_nn(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul_nn_acc(&mut out, a, m, k, b, n);
    out
}

/// out += A (m×k) · Bᵀ where B is (n×k)
pub fn matmul_nt_acc(out: &mut [f64], a: &[f64], m: usize, k: usize, b: &[f64], n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            out_row[j] += dot(a_row, &b[j * k..(j + 1) * k]);
        }
    }
}

/// Dot product over eight independent accumulators: strict left-to-right
/// summation cannot vectorize, whereas this fixed partial-sum split can.
/// The split is part of the numeric contract (results are bit-stable across
/// targets because each partial sum's order is fixed in code).
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let chunks = n / 8;
    let mut s = [0.0f64; 8];
    for c in 0..chunks {
        let i = c * 8;
        for l in 0..8 {
            s[l] += x[i + l] * y[i + l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..n {
        tail += x[i] * y[i];
    }
    (((s[0] + s[4]) + (s[1] + s[5])) + ((s[2] + s[6]) + (s[3] + s[7]))) + tail
}

/// A (m×k) · Bᵀ where B is (n×k)
pub fn matmul_nt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul_nt_acc(&mut out, a, m, k, b, n);
    out
}

/// out += Aᵀ · B where A is (k×m), B is (k×n); result (m×n).
pub fn matmul_tn_acc(out: &mut [f64], a: &[f64], k: usize, m: usize, b: &[f64], n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for (i, &a_pi) in a_row.iter().enumerate() {
            if a_pi == 0.0 {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row) {
                *o += a_pi * b_pj;
            }
        }
    }
}

/// y += α·x
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_agrees_with_naive() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let c = matmul_nn(&a, 2, 3, &b, 2);
        assert_eq!(c, vec![58.0, 64.0, 139.0, 154.0]);

        // A · Bᵀ with B stored as 2x3 equals A · (Bᵀ as 3x2)
        let bt = vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]; // 2x3, rows of b columns
        let c2 = matmul_nt(&a, 2, 3, &bt, 2);
        assert_eq!(c2, c);

        // Aᵀ · B with A 2x3: (3x2)·(2x2)
        let d = vec![1.0, 0.0, 0.0, 1.0];
        let mut out = vec![0.0; 6];
        matmul_tn_acc(&mut out, &a, 2, 3, &d, 2);
        assert_eq!(out, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
