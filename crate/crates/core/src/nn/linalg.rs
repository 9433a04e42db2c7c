//! Row-major matrix kernels.
//!
//! Everything is written in an axpy style (independent accumulation per
//! output element, fixed summation order) so the compiler can vectorize the
//! inner loops without reassociating float sums; results are bit-deterministic.

/// c (m x n) += a (m x k) * b (k x n)
pub fn matmul_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &aip) in arow.iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow.iter()) {
                *cv += aip * bv;
            }
        }
    }
}

/// c = a * b (overwrite)
pub fn matmul(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    c.fill(0.0);
    matmul_acc(c, a, b, m, k, n);
}

/// c (k x n) += a^T * b for a (m x k), b (m x n)
pub fn matmul_at_b_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for r in 0..m {
        let arow = &a[r * k..(r + 1) * k];
        let brow = &b[r * n..(r + 1) * n];
        for (q, &aq) in arow.iter().enumerate() {
            if aq == 0.0 {
                continue;
            }
            let crow = &mut c[q * n..(q + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow.iter()) {
                *cv += aq * bv;
            }
        }
    }
}

/// out (n x m) = a^T for a (m x n)
pub fn transpose_into(out: &mut [f64], a: &[f64], m: usize, n: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
}

/// y (rows x n) += bias (n), broadcast over rows.
pub fn add_bias(y: &mut [f64], bias: &[f64], rows: usize, n: usize) {
    debug_assert_eq!(y.len(), rows * n);
    debug_assert_eq!(bias.len(), n);
    for r in 0..rows {
        for (yv, bv) in y[r * n..(r + 1) * n].iter_mut().zip(bias.iter()) {
            *yv += bv;
        }
    }
}

/// gb (n) += column sums of g (rows x n).
pub fn sum_rows_acc(gb: &mut [f64], g: &[f64], rows: usize, n: usize) {
    debug_assert_eq!(g.len(), rows * n);
    debug_assert_eq!(gb.len(), n);
    for r in 0..rows {
        for (bv, gv) in gb.iter_mut().zip(g[r * n..(r + 1) * n].iter()) {
            *bv += gv;
        }
    }
}

/// Dot product with a fixed 4-way unrolled accumulation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let ai = &a[i * 4..i * 4 + 4];
        let bi = &b[i * 4..i * 4 + 4];
        acc[0] += ai[0] * bi[0];
        acc[1] += ai[1] * bi[1];
        acc[2] += ai[2] * bi[2];
        acc[3] += ai[3] * bi[3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_case() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        matmul(&mut c, &a, &b, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn at_b_matches_explicit_transpose() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 3x2
        let b = [1.0, 0.5, -1.0, 2.0, 0.0, 3.0]; // 3x2
        let mut at = [0.0; 6];
        transpose_into(&mut at, &a, 3, 2);
        let mut want = [0.0; 4];
        matmul(&mut want, &at, &b, 2, 3, 2);
        let mut got = [0.0; 4];
        matmul_at_b_acc(&mut got, &a, &b, 3, 2, 2);
        assert_eq!(got, want);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..13).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
