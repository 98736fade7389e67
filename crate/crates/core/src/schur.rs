//! Complex Schur decomposition by Householder reduction to Hessenberg form
//! followed by single-shift QR iteration.
//!
//! The QR sweep follows the structure of LAPACK's `zlahqr`: Ahues–Tisseur
//! deflation test, Wilkinson shift, exceptional shifts after 10 and 20
//! stagnant iterations, and a search for two consecutive small subdiagonals
//! to start the bulge chase early. The total number of QR sweeps is capped at
//! `100 * N`; exceeding it returns [`Error::NoConvergence`].
//!
//! Exact zeros are preserved: a Householder step whose column is already zero
//! below the subdiagonal is skipped, and zero subdiagonals deflate at once. So
//! triangular inputs come back untouched (`u = I`, `d` = their diagonal).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gemm::{gemm, rm, rm_mut, rm_t};
use crate::matrix::ComplexMatrix;

/// `m = u (diag(d) + t) u*` with `u` unitary and `t` strictly upper triangular.
#[derive(Clone, Debug)]
pub struct SchurDecomposition {
    pub unitary: ComplexMatrix,
    pub diagonal: Vec<Complex64>,
    pub strict_upper: ComplexMatrix,
}

impl SchurDecomposition {
    /// `u (diag(d) + t) u*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut tri = self.strict_upper.clone();
        for (i, &d) in self.diagonal.iter().enumerate() {
            tri[(i, i)] = d;
        }
        self.unitary.matmul(&tri).matmul(&self.unitary.adjoint())
    }

    /// `|| u (diag(d) + t) u* - m ||_F`.
    pub fn residual(&self, m: &ComplexMatrix) -> f64 {
        (&self.reconstruct() - m).frobenius_norm()
    }
}

#[inline]
fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Elementary reflector `H = I - tau v v*` with `v = [1; tail]` such that
/// `H* [alpha; x] = [beta; 0]`. Scales `x` in place into the tail of `v`.
/// Returns `(tau, beta)`; `tau == 0` means `H = I` and `x` is untouched.
fn make_reflector(alpha: Complex64, x: &mut [Complex64]) -> (Complex64, Complex64) {
    let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if xnorm == 0.0 {
        return (Complex64::new(0.0, 0.0), alpha);
    }
    let mag = alpha.norm().hypot(xnorm);
    let beta = if alpha.re >= 0.0 { -mag } else { mag };
    let tau = Complex64::new((beta - alpha.re) / beta, -alpha.im / beta);
    let scale = Complex64::new(1.0, 0.0) / (alpha - beta);
    for z in x.iter_mut() {
        *z *= scale;
    }
    (tau, Complex64::new(beta, 0.0))
}

/// Panel width of the blocked Hessenberg reduction.
const HESS_BLOCK: usize = 32;
/// The unblocked reduction finishes the last this many columns.
const HESS_CROSSOVER: usize = 128;

/// Reduces row-major `a` to upper Hessenberg form in place, accumulating the
/// transformations into `q` when given (`a_in = q a_out q*`).
///
/// Large matrices are reduced in panels of [`HESS_BLOCK`] columns whose
/// reflectors are aggregated as `I - V T V*` and applied with matrix
/// products; the tail uses the unblocked reduction.
fn reduce_to_hessenberg(a: &mut [Complex64], n: usize, mut q: Option<&mut [Complex64]>) {
    let mut k = 0;
    if n > HESS_CROSSOVER {
        let mut panel = Panel::new(n, HESS_BLOCK);
        while n - k > HESS_CROSSOVER {
            panel.factor(a, k);
            // All reflectors trivial (e.g. triangular input): nothing to apply.
            if panel.t.iter().any(|x| *x != Complex64::new(0.0, 0.0)) {
                panel.update(a, k, q.as_deref_mut());
            }
            k += HESS_BLOCK;
        }
    }
    reduce_unblocked(a, n, q, k);
}

/// Unblocked Householder reduction of columns `start..n-2`.
fn reduce_unblocked(a: &mut [Complex64], n: usize, mut q: Option<&mut [Complex64]>, start: usize) {
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut w = vec![zero; n];
    for k in start..n.saturating_sub(2) {
        let len = n - k - 1;
        let alpha = a[(k + 1) * n + k];
        for i in 1..len {
            v[i] = a[(k + 1 + i) * n + k];
        }
        let (tau, beta) = make_reflector(alpha, &mut v[1..len]);
        if tau == zero {
            continue;
        }
        v[0] = Complex64::new(1.0, 0.0);
        let v = &v[..len];

        a[(k + 1) * n + k] = beta;
        for i in 1..len {
            a[(k + 1 + i) * n + k] = zero;
        }

        // H* (A H) = (H* A) H, so the right update goes first and the same
        // pass accumulates w = v* A[k+1.., k+1..] for the left one.
        let w = &mut w[k + 1..n];
        w.iter_mut().for_each(|x| *x = zero);
        for r in 0..n {
            let row = &mut a[r * n + k + 1..(r + 1) * n];
            reflect_row(row, v, tau);
            if r > k {
                let cv = v[r - k - 1].conj();
                for (wj, &x) in w.iter_mut().zip(row.iter()) {
                    *wj += cv * x;
                }
            }
        }
        let ct = tau.conj();
        for (i, &vi) in v.iter().enumerate() {
            let f = ct * vi;
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 2 + i) * n];
            for (x, &wj) in row.iter_mut().zip(w.iter()) {
                *x -= f * wj;
            }
        }

        if let Some(q) = q.as_deref_mut() {
            for row in q.chunks_exact_mut(n) {
                reflect_row(&mut row[k + 1..], v, tau);
            }
        }
    }
}

/// Work space for one panel of the blocked reduction starting at column `k`.
///
/// With `Q = H_0 ... H_{nb-1} = I - V T V*`, the panel computes `V`, the upper
/// triangular `T` and `Y = A V T` (`A` as it was before the panel), so that
/// the reduced matrix is `Q* (A - Y V*)`. All `n x nb` buffers are row-major.
struct Panel {
    n: usize,
    nb: usize,
    v: Vec<Complex64>,
    y: Vec<Complex64>,
    t: Vec<Complex64>,
    col: Vec<Complex64>,
    u: Vec<Complex64>,
}

impl Panel {
    fn new(n: usize, nb: usize) -> Panel {
        let zero = Complex64::new(0.0, 0.0);
        Panel {
            n,
            nb,
            v: vec![zero; n * nb],
            y: vec![zero; n * nb],
            t: vec![zero; nb * nb],
            col: vec![zero; n],
            u: vec![zero; nb],
        }
    }

    /// Reduces columns `k..k+nb` below their subdiagonal. Rows `k+1..` of
    /// those columns end in their final state; everything else in `a` is left
    /// for [`Panel::update`].
    fn factor(&mut self, a: &mut [Complex64], k: usize) {
        let (n, nb) = (self.n, self.nb);
        let zero = Complex64::new(0.0, 0.0);
        self.v.fill(zero);
        self.y.fill(zero);
        self.t.fill(zero);
        let Panel { v, y, t, col: b, u, .. } = self;
        for j in 0..nb {
            let c = k + j;
            for r in k + 1..n {
                b[r] = a[r * n + c];
            }
            if j > 0 {
                // Right: b -= Y[.., ..j] conj(V[c, ..j]).
                for r in k + 1..n {
                    let s: Complex64 = (0..j).map(|i| y[r * nb + i] * v[c * nb + i].conj()).sum();
                    b[r] -= s;
                }
                // Left: b -= V T* V* b.
                u[..j].fill(zero);
                for r in k + 1..n {
                    for i in 0..j {
                        u[i] += v[r * nb + i].conj() * b[r];
                    }
                }
                for i in (0..j).rev() {
                    u[i] = (0..=i).map(|p| t[p * nb + i].conj() * u[p]).sum();
                }
                for r in k + 1..n {
                    let s: Complex64 = (0..j).map(|i| v[r * nb + i] * u[i]).sum();
                    b[r] -= s;
                }
            }
            for r in k + 1..=c {
                a[r * n + c] = b[r];
            }
            let (head, tail) = b.split_at_mut(c + 2);
            let (tau, beta) = make_reflector(head[c + 1], &mut tail[..n - c - 2]);
            a[(c + 1) * n + c] = beta;
            v[(c + 1) * nb + j] = Complex64::new(1.0, 0.0);
            for r in c + 2..n {
                a[r * n + c] = zero;
                v[r * nb + j] = b[r];
            }

            // u = V[.., ..j]* v_j; v_j lives in rows c+1.., gathered into b.
            b[c + 1] = Complex64::new(1.0, 0.0);
            for i in 0..j {
                u[i] = (c + 1..n).map(|r| v[r * nb + i].conj() * b[r]).sum();
            }
            // Y[k+1.., j] = tau (A v_j - Y u); columns c+1.. are untouched.
            let vj = &b[c + 1..n];
            if tau != zero {
                for r in k + 1..n {
                    let row = &a[r * n + c + 1..(r + 1) * n];
                    let s: Complex64 = row.iter().zip(vj).map(|(&x, &e)| x * e).sum();
                    let s2: Complex64 = (0..j).map(|i| y[r * nb + i] * u[i]).sum();
                    y[r * nb + j] = tau * (s - s2);
                }
            }
            // T[..j, j] = -tau T u.
            for p in 0..j {
                let s: Complex64 = (p..j).map(|i| t[p * nb + i] * u[i]).sum();
                t[p * nb + j] = -tau * s;
            }
            t[j * nb + j] = tau;
        }
    }

    /// Applies the panel's similarity to the rest of `a` and to `q`.
    fn update(&mut self, a: &mut [Complex64], k: usize, q: Option<&mut [Complex64]>) {
        let (n, nb) = (self.n, self.nb);
        let zero = Complex64::new(0.0, 0.0);
        let rest = n - k - nb;
        let below = n - k - 1;
        let vc: Vec<Complex64> = self.v.iter().map(|x| x.conj()).collect();
        let tc: Vec<Complex64> = self.t.iter().map(|x| x.conj()).collect();

        // Y[..=k] = A[..=k, k+1..] V T, from the untouched top rows.
        let mut tmp = vec![zero; (k + 1) * nb];
        gemm(k + 1, below, nb, 1.0, rm(a, n, 0, k + 1), rm(&self.v, nb, k + 1, 0), 0.0, rm_mut(&mut tmp, nb, 0, 0));
        gemm(k + 1, nb, nb, 1.0, rm(&tmp, nb, 0, 0), rm(&self.t, nb, 0, 0), 0.0, rm_mut(&mut self.y, nb, 0, 0));

        // Right: A[.., k+nb..] -= Y V[k+nb..]*, and the top rows of the panel.
        gemm(n, nb, rest, -1.0, rm(&self.y, nb, 0, 0), rm_t(&vc, nb, k + nb, 0), 1.0, rm_mut(a, n, 0, k + nb));
        gemm(k + 1, nb, nb - 1, -1.0, rm(&self.y, nb, 0, 0), rm_t(&vc, nb, k + 1, 0), 1.0, rm_mut(a, n, 0, k + 1));

        // Left: A[k+1.., k+nb..] -= V T* (V* A[k+1.., k+nb..]).
        let mut w = vec![zero; nb * rest];
        gemm(nb, below, rest, 1.0, rm_t(&vc, nb, k + 1, 0), rm(a, n, k + 1, k + nb), 0.0, rm_mut(&mut w, rest, 0, 0));
        let mut w2 = vec![zero; nb * rest];
        gemm(nb, nb, rest, 1.0, rm_t(&tc, nb, 0, 0), rm(&w, rest, 0, 0), 0.0, rm_mut(&mut w2, rest, 0, 0));
        gemm(below, nb, rest, -1.0, rm(&self.v, nb, k + 1, 0), rm(&w2, rest, 0, 0), 1.0, rm_mut(a, n, k + 1, k + nb));

        // q[.., k+1..] -= (q V) T V*.
        if let Some(q) = q {
            let mut p = vec![zero; n * nb];
            gemm(n, below, nb, 1.0, rm(q, n, 0, k + 1), rm(&self.v, nb, k + 1, 0), 0.0, rm_mut(&mut p, nb, 0, 0));
            let mut p2 = vec![zero; n * nb];
            gemm(n, nb, nb, 1.0, rm(&p, nb, 0, 0), rm(&self.t, nb, 0, 0), 0.0, rm_mut(&mut p2, nb, 0, 0));
            gemm(n, nb, below, -1.0, rm(&p2, nb, 0, 0), rm_t(&vc, nb, k + 1, 0), 1.0, rm_mut(q, n, 0, k + 1));
        }
    }
}

/// `row <- row (I - tau v v*)`.
#[inline]
fn reflect_row(row: &mut [Complex64], v: &[Complex64], tau: Complex64) {
    let s: Complex64 = row.iter().zip(v).map(|(&x, &vi)| x * vi).sum();
    let f = tau * s;
    for (x, &vi) in row.iter_mut().zip(v) {
        *x -= f * vi.conj();
    }
}

/// Applies `row <- row (I - tau v v*)` on columns `(k, k+1)`, `v = [1, v2]`,
/// for each `(k, tau, v2)` in order.
#[inline]
fn apply_right_rotations(row: &mut [Complex64], rotations: &[(usize, Complex64, Complex64)]) {
    for &(k, tau, v2) in rotations {
        let a = row[k];
        let b = row[k + 1];
        let sum = tau * (a + b * v2);
        row[k] = a - sum;
        row[k + 1] = b - sum * v2.conj();
    }
}

/// Below this active size the single-shift sweep is used.
const MULTISHIFT_MIN: usize = 64;
/// Bulges of a multishift sweep are introduced this many rows apart.
const BULGE_SPACING: usize = 3;

fn shift_count(active: usize) -> usize {
    (active / 12).clamp(4, 40)
}

/// Index `l <= i` of the top of the lowest unreduced block ending at `i`;
/// sets the negligible subdiagonal `h[l, l-1]` to zero.
fn find_split(h: &mut [Complex64], n: usize, i: usize) -> usize {
    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE * (n as f64 / ulp);
    let at = |r: usize, c: usize| r * n + c;
    let mut k = i;
    while k > 0 {
        let sub = cabs1(h[at(k, k - 1)]);
        if sub <= smlnum {
            break;
        }
        let mut tst = cabs1(h[at(k - 1, k - 1)]) + cabs1(h[at(k, k)]);
        if tst == 0.0 {
            if k >= 2 {
                tst += cabs1(h[at(k - 1, k - 2)]);
            }
            if k + 1 < n {
                tst += cabs1(h[at(k + 1, k)]);
            }
        }
        if sub <= ulp * tst {
            let up = cabs1(h[at(k - 1, k)]);
            let ab = sub.max(up);
            let ba = sub.min(up);
            let d1 = cabs1(h[at(k, k)]);
            let d2 = cabs1(h[at(k - 1, k - 1)] - h[at(k, k)]);
            let aa = d1.max(d2);
            let bb = d1.min(d2);
            let s = aa + ab;
            if ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s))) {
                break;
            }
        }
        k -= 1;
    }
    if k > 0 {
        h[at(k, k - 1)] = Complex64::new(0.0, 0.0);
    }
    k
}

/// Rotations recorded during a sweep: `(k, tau, v2)` acting on `(k, k+1)`.
type Rotation = (usize, Complex64, Complex64);

/// Applies the left half `x <- (I - tau v v*)* x` of each rotation to rows
/// `(k, k+1)` restricted to columns `cols`, in order.
fn replay_left(h: &mut [Complex64], n: usize, ops: &[Rotation], cols: std::ops::RangeInclusive<usize>) {
    const BLOCK: usize = 64;
    let (c_lo, c_hi) = (*cols.start(), *cols.end());
    let mut c0 = c_lo;
    while c0 <= c_hi {
        let c1 = (c0 + BLOCK - 1).min(c_hi);
        for &(k, tau, v2) in ops {
            let (top, bottom) = h.split_at_mut((k + 1) * n);
            let row_k = &mut top[k * n + c0..=k * n + c1];
            let row_k1 = &mut bottom[c0..=c1];
            let ct = tau.conj();
            let v2c = v2.conj();
            for (a, b) in row_k.iter_mut().zip(row_k1.iter_mut()) {
                let sum = ct * (*a + v2c * *b);
                *a -= sum;
                *b -= sum * v2;
            }
        }
        c0 = c1 + 1;
    }
}

/// Wilkinson shift (or an exceptional shift after 10/20 stagnant iterations)
/// for the active block `[l, i]`.
fn single_shift(h: &[Complex64], n: usize, l: usize, i: usize, its: usize) -> Complex64 {
    let at = |r: usize, c: usize| r * n + c;
    if its % 30 == 10 {
        return Complex64::new(0.75 * h[at(l + 1, l)].re.abs(), 0.0) + h[at(l, l)];
    }
    if its % 30 == 20 {
        return Complex64::new(0.75 * h[at(i, i - 1)].re.abs(), 0.0) + h[at(i, i)];
    }
    let mut t = h[at(i, i)];
    let u = h[at(i - 1, i)].sqrt() * h[at(i, i - 1)].sqrt();
    let mut s = cabs1(u);
    if s != 0.0 {
        let x = (h[at(i - 1, i - 1)] - t) * 0.5;
        let sx = cabs1(x);
        s = s.max(cabs1(x));
        let mut y = ((x / s) * (x / s) + (u / s) * (u / s)).sqrt() * s;
        if sx > 0.0 && (x.re / sx) * y.re + (x.im / sx) * y.im < 0.0 {
            y = -y;
        }
        t -= u * (u / (x + y));
    }
    t
}

/// Work area and loop bounds shared by the sweep kernels.
struct Sweep<'a> {
    h: &'a mut [Complex64],
    n: usize,
    z: Option<&'a mut [Complex64]>,
    /// First row kept current by right updates.
    i1: usize,
    /// Last column kept current by left updates.
    i2: usize,
    ops: Vec<Rotation>,
}

impl Sweep<'_> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * self.n + c
    }

    /// Applies reflector `(tau, v2)` at `k` to rows `(k, k+1)` over columns
    /// `k..=c_hi` and to columns `(k, k+1)` over rows `r_lo..=min(k+2, i)`.
    fn apply_local(&mut self, k: usize, tau: Complex64, v2: Complex64, c_hi: usize, r_lo: usize, i: usize) {
        let n = self.n;
        let ct = tau.conj();
        let v2c = v2.conj();
        let (top, bottom) = self.h.split_at_mut((k + 1) * n);
        let row_k = &mut top[k * n + k..=k * n + c_hi];
        let row_k1 = &mut bottom[k..=c_hi];
        for (a, b) in row_k.iter_mut().zip(row_k1.iter_mut()) {
            let sum = ct * (*a + v2c * *b);
            *a -= sum;
            *b -= sum * v2;
        }
        for r in r_lo..=(k + 2).min(i) {
            let pa = self.at(r, k);
            let a = self.h[pa];
            let b = self.h[pa + 1];
            let sum = tau * (a + b * v2);
            self.h[pa] = a - sum;
            self.h[pa + 1] = b - sum * v2c;
        }
    }

    /// Replays the recorded rotations on everything outside the window
    /// `[w_lo, w_hi]`: columns right of it and rows above it, then `z`.
    fn flush(&mut self, w_lo: usize, w_hi: usize) {
        if self.ops.is_empty() {
            return;
        }
        let n = self.n;
        if w_hi < self.i2 {
            replay_left(self.h, n, &self.ops, w_hi + 1..=self.i2);
        }
        for r in self.i1..w_lo {
            apply_right_rotations(&mut self.h[r * n..(r + 1) * n], &self.ops);
        }
        if let Some(z) = self.z.as_deref_mut() {
            for row in z.chunks_exact_mut(n) {
                apply_right_rotations(row, &self.ops);
            }
        }
        self.ops.clear();
    }

    /// Starting vector for a bulge with shift `sigma` at the top of `[l, i]`.
    fn shift_vector(&self, l: usize, sigma: Complex64) -> (Complex64, Complex64) {
        let mut h11s = self.h[self.at(l, l)] - sigma;
        let mut h21 = self.h[self.at(l + 1, l)];
        let s = cabs1(h11s) + cabs1(h21);
        if s > 0.0 {
            h11s /= s;
            h21 /= s;
        }
        (h11s, h21)
    }

    /// One implicit single-shift QR sweep over `[l, i]`.
    fn single(&mut self, l: usize, i: usize, shift: Complex64) {
        let ulp = f64::EPSILON;
        let zero = Complex64::new(0.0, 0.0);

        // Look for two consecutive small subdiagonals to start lower down.
        let mut m = l;
        for mm in (l + 1..i).rev() {
            let h11 = self.h[self.at(mm, mm)];
            let h22 = self.h[self.at(mm + 1, mm + 1)];
            let (h11s, h21) = self.shift_vector(mm, shift);
            let h10 = self.h[self.at(mm, mm - 1)];
            if cabs1(h10) * cabs1(h21) <= ulp * (cabs1(h11s) * (cabs1(h11) + cabs1(h22))) {
                m = mm;
                break;
            }
        }
        let (mut v0, mut v1) = self.shift_vector(m, shift);

        for k in m..i {
            if k > m {
                v0 = self.h[self.at(k, k - 1)];
                v1 = self.h[self.at(k + 1, k - 1)];
            }
            let mut tail = [v1];
            let (tau, beta) = make_reflector(v0, &mut tail);
            if k > m {
                let p = self.at(k, k - 1);
                self.h[p] = beta;
                let p = self.at(k + 1, k - 1);
                self.h[p] = zero;
            }
            if tau == zero {
                continue;
            }
            if k == m && m > l {
                // Column m-1 is outside the sweep but its entry in row m is
                // not negligible; the fill-in below it is.
                let p = self.at(m, m - 1);
                self.h[p] *= Complex64::new(1.0, 0.0) - tau.conj();
            }
            // Rows above k are not read again during this sweep.
            let r_lo = self.i1.max(k);
            let i2 = self.i2;
            self.apply_local(k, tau, tail[0], i2, r_lo, i);
            self.ops.push((k, tau, tail[0]));
        }

        let n = self.n;
        let ops = std::mem::take(&mut self.ops);
        for r in self.i1..i {
            let first = ops.partition_point(|&(k, _, _)| k <= r);
            apply_right_rotations(&mut self.h[r * n..(r + 1) * n], &ops[first..]);
        }
        if let Some(z) = self.z.as_deref_mut() {
            for row in z.chunks_exact_mut(n) {
                apply_right_rotations(row, &ops);
            }
        }
        self.ops = ops;
        self.ops.clear();
    }

    /// Chases one bulge per shift through `[l, i]` as a tightly packed chain.
    ///
    /// Work proceeds in diagonal windows: inside a window every update is
    /// applied at once; the recorded rotations are then replayed on the strips
    /// to the right of and above the window, which keeps those strips in cache.
    fn multishift(&mut self, l: usize, i: usize, shifts: &[Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        let s = shifts.len();
        // Bulge j sits at row l + step - spacing * j while l <= k <= i - 1.
        let steps = (i - l) + BULGE_SPACING * (s - 1);
        let chunk = (BULGE_SPACING * s).max(16);
        let position = |step: usize, j: usize| -> Option<usize> {
            if step < BULGE_SPACING * j {
                return None;
            }
            let k = l + step - BULGE_SPACING * j;
            (k < i).then_some(k)
        };

        let mut t0 = 0;
        while t0 < steps {
            let t1 = (t0 + chunk).min(steps);
            let mut k_top = usize::MAX;
            let mut k_bot = 0;
            for step in t0..t1 {
                for j in 0..s {
                    if let Some(k) = position(step, j) {
                        k_top = k_top.min(k);
                        k_bot = k_bot.max(k);
                    }
                }
            }
            // Bulges entering at row l during the chunk.
            if t0 < BULGE_SPACING * (s - 1) + 1 {
                k_top = l;
            }
            let w_lo = k_top.saturating_sub(1).max(l);
            let w_hi = (k_bot + 2).min(i);

            for step in t0..t1 {
                for (j, &sigma) in shifts.iter().enumerate() {
                    let Some(k) = position(step, j) else { continue };
                    let (v0, v1) = if k == l {
                        self.shift_vector(l, sigma)
                    } else {
                        (self.h[self.at(k, k - 1)], self.h[self.at(k + 1, k - 1)])
                    };
                    let mut tail = [v1];
                    let (tau, beta) = make_reflector(v0, &mut tail);
                    if k > l {
                        let p = self.at(k, k - 1);
                        self.h[p] = beta;
                        let p = self.at(k + 1, k - 1);
                        self.h[p] = zero;
                    }
                    if tau == zero {
                        continue;
                    }
                    self.apply_local(k, tau, tail[0], w_hi, w_lo.max(self.i1), i);
                    self.ops.push((k, tau, tail[0]));
                }
            }
            self.flush(w_lo, w_hi);
            t0 = t1;
        }
    }
}

/// Rotation `[c s; -conj(s) c]` with real `c` mapping `(f, g)` to `(r, 0)`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g == Complex64::new(0.0, 0.0) {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if f == Complex64::new(0.0, 0.0) {
        return (0.0, g.conj() / g.norm());
    }
    let f1 = f.norm();
    let d = f1.hypot(g.norm());
    let phase = f / f1;
    (f1 / d, phase * g.conj() / d)
}

/// Swaps the adjacent diagonal entries `p` and `p + 1` of the upper
/// triangular row-major `t` (`w x w`), accumulating into the columns of `v`.
fn swap_diagonal(t: &mut [Complex64], v: &mut [Complex64], w: usize, p: usize) {
    let at = |r: usize, c: usize| r * w + c;
    let t11 = t[at(p, p)];
    let t22 = t[at(p + 1, p + 1)];
    let (c, s) = givens(t[at(p, p + 1)], t22 - t11);
    for col in p + 2..w {
        let x = t[at(p, col)];
        let y = t[at(p + 1, col)];
        t[at(p, col)] = x * c + s * y;
        t[at(p + 1, col)] = y * c - s.conj() * x;
    }
    let sc = s.conj();
    for row in 0..p {
        let x = t[at(row, p)];
        let y = t[at(row, p + 1)];
        t[at(row, p)] = x * c + sc * y;
        t[at(row, p + 1)] = y * c - s * x;
    }
    t[at(p, p)] = t22;
    t[at(p + 1, p + 1)] = t11;
    for row in 0..w {
        let x = v[at(row, p)];
        let y = v[at(row, p + 1)];
        v[at(row, p)] = x * c + sc * y;
        v[at(row, p + 1)] = y * c - s * x;
    }
}

/// Row-major `(rows x inner) * (inner x cols)`.
fn small_matmul(a: &[Complex64], b: &[Complex64], rows: usize, inner: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        let out_row = &mut out[r * cols..(r + 1) * cols];
        for k in 0..inner {
            let x = a[r * inner + k];
            for (o, &y) in out_row.iter_mut().zip(&b[k * cols..(k + 1) * cols]) {
                *o += x * y;
            }
        }
    }
    out
}

impl Sweep<'_> {
    /// Aggressive early deflation on the trailing `nw x nw` window of `[l, i]`.
    ///
    /// The window is brought to Schur form; eigenvalues whose coupling to the
    /// rest of the block (the "spike") is negligible are deflated in place and
    /// the remaining ones are returned as shifts for the next sweep. Returns
    /// `None` if the window itself fails to converge.
    fn early_deflation(&mut self, l: usize, i: usize, nw: usize) -> Option<(usize, Vec<Complex64>)> {
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        let ulp = f64::EPSILON;
        let smlnum = f64::MIN_POSITIVE * (n as f64 / ulp);
        let kw = i + 1 - nw;
        let spike = if kw > l { self.h[kw * n + kw - 1] } else { zero };

        let mut t = vec![zero; nw * nw];
        for r in 0..nw {
            let src = (kw + r) * n + kw;
            let first = r.saturating_sub(1);
            t[r * nw + first..(r + 1) * nw].copy_from_slice(&self.h[src + first..src + nw]);
        }
        let mut v = vec![zero; nw * nw];
        for r in 0..nw {
            v[r * nw + r] = Complex64::new(1.0, 0.0);
        }
        hessenberg_qr(&mut t, nw, Some(&mut v), true).ok()?;
        for r in 1..nw {
            for c in 0..r {
                t[r * nw + c] = zero;
            }
        }

        // Deflation test from the bottom; survivors move to the top.
        let mut undeflated = nw;
        let mut top = 0;
        while top < undeflated {
            let j = undeflated - 1;
            let mut scale = cabs1(t[j * nw + j]);
            if scale == 0.0 {
                scale = cabs1(spike);
            }
            if cabs1(spike) * cabs1(v[j]) <= smlnum.max(ulp * scale) {
                undeflated -= 1;
            } else {
                for p in (top..j).rev() {
                    swap_diagonal(&mut t, &mut v, nw, p);
                }
                top += 1;
            }
        }
        let deflated = nw - undeflated;
        let ritz: Vec<Complex64> = (0..undeflated).map(|r| t[r * nw + r]).collect();
        if deflated == 0 {
            return Some((0, ritz));
        }

        // Spike entries of the undeflated part; the rest are zero.
        let mut sv: Vec<Complex64> = (0..undeflated).map(|c| spike * v[c].conj()).collect();
        if undeflated > 1 {
            let (tau, beta) = {
                let (head, tail) = sv.split_at_mut(1);
                make_reflector(head[0], tail)
            };
            if tau != zero {
                // w = blockdiag(P, I) with P = I - tau u u*, u = [1, sv[1..]]
                let mut u = sv.clone();
                u[0] = Complex64::new(1.0, 0.0);
                let ns = undeflated;
                // T <- P* T on rows 0..ns
                for c in 0..nw {
                    let s: Complex64 = (0..ns).map(|r| u[r].conj() * t[r * nw + c]).sum();
                    let f = tau.conj() * s;
                    for r in 0..ns {
                        t[r * nw + c] -= f * u[r];
                    }
                }
                // T <- T P and V <- V P on columns 0..ns
                for m in [&mut t, &mut v] {
                    for r in 0..nw {
                        let row = &mut m[r * nw..r * nw + ns];
                        let s: Complex64 = row.iter().zip(&u).map(|(x, y)| x * y).sum();
                        let f = tau * s;
                        for (x, y) in row.iter_mut().zip(&u) {
                            *x -= f * y.conj();
                        }
                    }
                }
            }
            sv.iter_mut().for_each(|x| *x = zero);
            sv[0] = beta;

            // Back to Hessenberg form on the leading block.
            let ns = undeflated;
            let mut lead = vec![zero; ns * ns];
            for r in 0..ns {
                lead[r * ns..(r + 1) * ns].copy_from_slice(&t[r * nw..r * nw + ns]);
            }
            let mut q = vec![zero; ns * ns];
            for r in 0..ns {
                q[r * ns + r] = Complex64::new(1.0, 0.0);
            }
            reduce_to_hessenberg(&mut lead, ns, Some(&mut q));
            for r in 0..ns {
                t[r * nw..r * nw + ns].copy_from_slice(&lead[r * ns..(r + 1) * ns]);
            }
            if ns < nw {
                // rows 0..ns, columns ns..nw: q* T12
                let mut qh = vec![zero; ns * ns];
                for r in 0..ns {
                    for c in 0..ns {
                        qh[r * ns + c] = q[c * ns + r].conj();
                    }
                }
                let cols = nw - ns;
                let mut t12 = vec![zero; ns * cols];
                for r in 0..ns {
                    t12[r * cols..(r + 1) * cols].copy_from_slice(&t[r * nw + ns..(r + 1) * nw]);
                }
                let t12 = small_matmul(&qh, &t12, ns, ns, cols);
                for r in 0..ns {
                    t[r * nw + ns..(r + 1) * nw].copy_from_slice(&t12[r * cols..(r + 1) * cols]);
                }
            }
            // V[:, 0..ns] <- V[:, 0..ns] q
            let mut v1 = vec![zero; nw * ns];
            for r in 0..nw {
                v1[r * ns..(r + 1) * ns].copy_from_slice(&v[r * nw..r * nw + ns]);
            }
            let v1 = small_matmul(&v1, &q, nw, ns, ns);
            for r in 0..nw {
                v[r * nw..r * nw + ns].copy_from_slice(&v1[r * ns..(r + 1) * ns]);
            }
        }

        // Write the window back.
        if kw > l {
            let column = sv.iter().copied().chain(std::iter::repeat(zero));
            for (r, s) in column.take(nw).enumerate() {
                self.h[(kw + r) * n + kw - 1] = s;
            }
        }
        for r in 0..nw {
            let dst = (kw + r) * n + kw;
            self.h[dst..dst + nw].copy_from_slice(&t[r * nw..(r + 1) * nw]);
        }
        for r in 1..nw {
            for c in 0..r.saturating_sub(1) {
                self.h[(kw + r) * n + kw + c] = zero;
            }
        }
        // Off-window: rows above times V, columns to the right by V*.
        let apply_right_v = |m: &mut [Complex64], rows: std::ops::Range<usize>| {
            let mut buf = vec![zero; nw];
            for r in rows {
                let seg = &mut m[r * n + kw..r * n + kw + nw];
                buf.iter_mut().for_each(|x| *x = zero);
                for (k, &x) in seg.iter().enumerate() {
                    for (b, &y) in buf.iter_mut().zip(&v[k * nw..(k + 1) * nw]) {
                        *b += x * y;
                    }
                }
                seg.copy_from_slice(&buf);
            }
        };
        apply_right_v(self.h, self.i1..kw);
        if let Some(z) = self.z.as_deref_mut() {
            apply_right_v(z, 0..n);
        }
        if i < self.i2 {
            let cols = self.i2 - i;
            let mut strip = vec![zero; nw * cols];
            for r in 0..nw {
                let src = (kw + r) * n + i + 1;
                strip[r * cols..(r + 1) * cols].copy_from_slice(&self.h[src..src + cols]);
            }
            let mut vh = vec![zero; nw * nw];
            for r in 0..nw {
                for c in 0..nw {
                    vh[r * nw + c] = v[c * nw + r].conj();
                }
            }
            let strip = small_matmul(&vh, &strip, nw, nw, cols);
            for r in 0..nw {
                let dst = (kw + r) * n + i + 1;
                self.h[dst..dst + cols].copy_from_slice(&strip[r * cols..(r + 1) * cols]);
            }
        }
        Some((deflated, ritz))
    }
}

/// Complex QR iteration on the upper Hessenberg matrix `h`.
///
/// With `full_schur`, the whole matrix is updated and ends upper triangular;
/// otherwise only the active window is kept current and just the diagonal is
/// meaningful on return. `z`, when given, accumulates the transformations.
fn hessenberg_qr(h: &mut [Complex64], n: usize, z: Option<&mut [Complex64]>, full_schur: bool) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    let cap = 100 * n;
    let mut total = 0usize;
    let mut work = Sweep { h, n, z, i1: 0, i2: n - 1, ops: Vec::with_capacity(4 * n) };

    let mut i = n - 1;
    let mut its = 0usize;
    loop {
        let l = find_split(work.h, n, i);
        if l >= i {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            its = 0;
            continue;
        }
        if total >= cap {
            return Err(Error::NoConvergence { iterations: total, cap, remaining: i + 1 });
        }
        its += 1;
        if !full_schur {
            work.i1 = l;
            work.i2 = i;
        }

        let active = i - l + 1;
        if active < MULTISHIFT_MIN || its.is_multiple_of(8) {
            total += 1;
            let shift = single_shift(work.h, n, l, i, its);
            work.single(l, i, shift);
            continue;
        }
        let wanted = shift_count(active);
        let window = (3 * wanted / 2).min(active);
        let Some((deflated, ritz)) = work.early_deflation(l, i, window) else {
            total += 1;
            let shift = single_shift(work.h, n, l, i, its);
            work.single(l, i, shift);
            continue;
        };
        if deflated > 0 {
            its = 0;
        }
        // A productive deflation window goes straight to the next one.
        if deflated * 100 > window * 14 {
            continue;
        }
        let i_now = i - deflated;
        if i_now <= l + 1 {
            continue;
        }
        let shifts = if ritz.len() >= 2 {
            ritz.into_iter().take(wanted).collect()
        } else {
            match trailing_shifts(work.h, n, i_now, wanted.min(i_now - l)) {
                Some(s) => s,
                None => continue,
            }
        };
        total += shifts.len();
        work.multishift(l, i_now, &shifts);
    }
}

/// Eigenvalues of the trailing `count x count` block ending at row `i`, used
/// as shifts. `None` if that small problem does not converge.
fn trailing_shifts(h: &[Complex64], n: usize, i: usize, count: usize) -> Option<Vec<Complex64>> {
    let lo = i + 1 - count;
    let mut block = vec![Complex64::new(0.0, 0.0); count * count];
    for r in 0..count {
        let src = (lo + r) * n + lo;
        block[r * count..(r + 1) * count].copy_from_slice(&h[src..src + count]);
    }
    hessenberg_qr(&mut block, count, None, false).ok()?;
    let mut shifts: Vec<Complex64> = (0..count).map(|r| block[r * count + r]).collect();
    // The first bulge travels lowest; give it the shift nearest the bottom.
    let anchor = h[i * n + i];
    shifts.sort_by(|a, b| (a - anchor).norm().total_cmp(&(b - anchor).norm()));
    Some(shifts)
}

/// Complex Schur decomposition `m = u (diag(d) + t) u*`.
pub fn schur_decompose(m: &ComplexMatrix) -> Result<SchurDecomposition> {
    let n = m.dim();
    let mut h = m.as_slice().to_vec();
    let mut q = ComplexMatrix::identity(n).as_slice().to_vec();
    reduce_to_hessenberg(&mut h, n, Some(&mut q));
    hessenberg_qr(&mut h, n, Some(&mut q), true)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut diagonal = Vec::with_capacity(n);
    for r in 0..n {
        diagonal.push(h[r * n + r]);
        for c in 0..=r {
            h[r * n + c] = zero;
        }
    }
    Ok(SchurDecomposition {
        unitary: ComplexMatrix::from_row_major(n, q)?,
        diagonal,
        strict_upper: ComplexMatrix::from_row_major(n, h)?,
    })
}

/// Eigenvalues with multiplicity, in the order they appear on the Schur diagonal.
pub fn schur_eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = m.dim();
    let mut h = m.as_slice().to_vec();
    reduce_to_hessenberg(&mut h, n, None);
    hessenberg_qr(&mut h, n, None, false)?;
    Ok((0..n).map(|i| h[i * n + i]).collect())
}
