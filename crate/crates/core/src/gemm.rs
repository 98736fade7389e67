//! Bounds-checked strided complex GEMM on top of `matrixmultiply`.

use num_complex::Complex64;

/// A `rows x cols` view into a slice: element `(r, c)` is at
/// `off + r * rs + c * cs`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [Complex64],
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

/// Mutable counterpart of [`View`].
pub(crate) struct ViewMut<'a> {
    pub data: &'a mut [Complex64],
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

/// Row-major view with leading dimension `ld`, starting at `(row, col)`.
pub(crate) fn rm(data: &[Complex64], ld: usize, row: usize, col: usize) -> View<'_> {
    View { data, off: row * ld + col, rs: ld, cs: 1 }
}

/// Transposed view of the row-major block starting at `(row, col)`.
pub(crate) fn rm_t(data: &[Complex64], ld: usize, row: usize, col: usize) -> View<'_> {
    View { data, off: row * ld + col, rs: 1, cs: ld }
}

pub(crate) fn rm_mut(data: &mut [Complex64], ld: usize, row: usize, col: usize) -> ViewMut<'_> {
    ViewMut { data, off: row * ld + col, rs: ld, cs: 1 }
}

fn check(len: usize, off: usize, rs: usize, cs: usize, rows: usize, cols: usize) {
    let last = off + (rows - 1) * rs + (cols - 1) * cs;
    assert!(last < len, "gemm view out of bounds: {last} >= {len}");
}

/// `c <- alpha a b + beta c` with `a: m x k`, `b: k x n`, `c: m x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: View, b: View, beta: f64, c: ViewMut) {
    if m == 0 || n == 0 {
        return;
    }
    check(c.data.len(), c.off, c.rs, c.cs, m, n);
    if k == 0 {
        for r in 0..m {
            for col in 0..n {
                c.data[c.off + r * c.rs + col * c.cs] *= beta;
            }
        }
        return;
    }
    check(a.data.len(), a.off, a.rs, a.cs, m, k);
    check(b.data.len(), b.off, b.rs, b.cs, k, n);
    // SAFETY: Complex64 is repr(C) `[re, im]`, the layout zgemm expects; every
    // accessed element lies in its slice (checked above), and `c` is a unique
    // borrow, so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha, 0.0],
            a.data.as_ptr().add(a.off).cast(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.off).cast(),
            b.rs as isize,
            b.cs as isize,
            [beta, 0.0],
            c.data.as_mut_ptr().add(c.off).cast(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}
