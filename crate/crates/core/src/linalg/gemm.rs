//! Thin safe wrapper over `matrixmultiply::dgemm`.

/// Strided view of a row- or column-major operand.
#[derive(Clone, Copy, Debug)]
pub struct Strided<'a> {
    pub data: &'a [f64],
    pub row_stride: isize,
    pub col_stride: isize,
}

impl<'a> Strided<'a> {
    /// Row-major `rows x cols` block.
    pub fn row_major(data: &'a [f64], cols: usize) -> Self {
        Strided { data, row_stride: cols as isize, col_stride: 1 }
    }

    /// The transpose of a row-major `rows x cols` block, seen as `cols x rows`.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Strided { data, row_stride: 1, col_stride: cols as isize }
    }
}

fn max_index(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize
}

/// `c = alpha * a * b + beta * c` where `a` is `m x k`, `b` is `k x n` and
/// `c` is a row-major `m x n` buffer.
pub fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: Strided<'_>, b: Strided<'_>, beta: f64, c: &mut [f64]) {
    assert!(c.len() >= m * n, "gemm output buffer too small");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c[..m * n].iter_mut() {
            *v *= beta;
        }
        return;
    }
    assert!(max_index(m, k, a.row_stride, a.col_stride) < a.data.len(), "gemm lhs out of bounds");
    assert!(max_index(k, n, b.row_stride, b.col_stride) < b.data.len(), "gemm rhs out of bounds");
    assert!(a.row_stride >= 0 && a.col_stride >= 0 && b.row_stride >= 0 && b.col_stride >= 0);
    // SAFETY: the asserts above bound every index dgemm touches inside the
    // slices, strides are non-negative, and `c` does not alias `a` or `b`
    // because it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
