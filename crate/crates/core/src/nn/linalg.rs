//! Small row-major matrix kernels. All of them accumulate into `out`.

/// `out[m x n] += a[m x k] * b[k x n]`
pub(crate) fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for (arow, orow) in a.chunks_exact(k.max(1)).zip(out.chunks_exact_mut(n.max(1))) {
        for (&av, brow) in arow.iter().zip(b.chunks_exact(n.max(1))) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[k x n] += a[m x k]^T * b[m x n]`
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for (arow, brow) in a.chunks_exact(k.max(1)).zip(b.chunks_exact(n.max(1))) {
        for (&av, orow) in arow.iter().zip(out.chunks_exact_mut(n.max(1))) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m x k] += a[m x n] * b[k x n]^T`
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for (arow, orow) in a.chunks_exact(n.max(1)).zip(out.chunks_exact_mut(k.max(1))) {
        for (o, brow) in orow.iter_mut().zip(b.chunks_exact(n.max(1))) {
            *o += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// Adds `bias` to every row of `out`.
pub(crate) fn add_bias(out: &mut [f64], bias: &[f64]) {
    for row in out.chunks_exact_mut(bias.len().max(1)) {
        for (o, b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// Column sums of `g` accumulated into `out`.
pub(crate) fn sum_rows(g: &[f64], out: &mut [f64]) {
    for row in g.chunks_exact(out.len().max(1)) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
}
