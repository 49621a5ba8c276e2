//! Matrix kernels over row-major slices.
//!
//! Every kernel accumulates into `c` and visits the reduction index in a fixed
//! ascending order, so results are bit-reproducible.

/// `c[m×n] += a[m×k] · b[k×n]`
pub fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if n == 0 {
        return;
    }
    let mut rows = c.chunks_exact_mut(n);
    let mut i = 0;
    // two output rows per pass halve the reads of `b`
    while i + 1 < m {
        let c0 = rows.next().unwrap();
        let c1 = rows.next().unwrap();
        let a0 = &a[i * k..(i + 1) * k];
        let a1 = &a[(i + 1) * k..(i + 2) * k];
        for p in 0..k {
            let (x0, x1) = (a0[p], a1[p]);
            let brow = &b[p * n..(p + 1) * n];
            for ((y0, y1), &bv) in c0.iter_mut().zip(c1.iter_mut()).zip(brow) {
                *y0 += x0 * bv;
                *y1 += x1 * bv;
            }
        }
        i += 2;
    }
    if i < m {
        let c0 = rows.next().unwrap();
        let a0 = &a[i * k..(i + 1) * k];
        for p in 0..k {
            let x0 = a0[p];
            let brow = &b[p * n..(p + 1) * n];
            for (y0, &bv) in c0.iter_mut().zip(brow) {
                *y0 += x0 * bv;
            }
        }
    }
}

/// `c[k×n] += a[m×k]ᵀ · b[m×n]`
pub fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &x) in arow.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (y, &bv) in c[p * n..(p + 1) * n].iter_mut().zip(brow) {
                *y += x * bv;
            }
        }
    }
}

/// `c[m×n] += a[m×k] · b[n×k]ᵀ`
pub fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(b.len(), n * k);
    let bt = transpose(n, k, b);
    gemm_nn(m, k, n, a, &bt, c);
}

/// Transpose of a row-major `rows×cols` matrix.
pub fn transpose(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn kernels_agree_with_naive_on_integers() {
        for (m, k, n) in [(1, 1, 1), (3, 4, 2), (5, 3, 7), (2, 6, 1)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i % 7) as f64 - 3.0).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i % 5) as f64 - 2.0).collect();
            let want = naive(m, k, n, &a, &b);

            let mut c = vec![0.0; m * n];
            gemm_nn(m, k, n, &a, &b, &mut c);
            assert_eq!(c, want);

            let mut c = vec![0.0; m * n];
            gemm_nt(m, k, n, &a, &transpose(k, n, &b), &mut c);
            assert_eq!(c, want);

            let mut c = vec![0.0; m * n];
            gemm_tn(k, m, n, &transpose(m, k, &a), &b, &mut c);
            assert_eq!(c, want);
        }
    }
}
