//! Spectral quantities of a single matrix: eigenvalues, operator norm,
//! Fuglede-Kadison determinant and offdiagonality.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::schur::schur_eigenvalues;

/// Eigenvalues of an `N x N` matrix with multiplicity, viewed as the
/// probability measure `(1/N) sum_i delta_{lambda_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmpiricalSpectrum {
    points: Vec<Complex64>,
}

impl EmpiricalSpectrum {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("empirical spectrum has no points".into()));
        }
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMeasure("empirical spectrum has a non-finite point".into()));
        }
        Ok(EmpiricalSpectrum { points })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Complex64> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for the `len`/`is_empty` convention.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(1/N) sum |lambda_i|^2`.
    pub fn mean_abs_sqr(&self) -> f64 {
        self.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn spectral_radius(&self) -> f64 {
        self.points.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Eigenvalues of `m` with multiplicity.
///
/// Upper triangular input is returned exactly; otherwise the QR iteration is
/// capped at `100 N` sweeps and reports [`Error::NoConvergence`] beyond that.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<EmpiricalSpectrum> {
    EmpiricalSpectrum::new(schur_eigenvalues(m)?)
}

/// Largest singular value, by Lanczos on `m* m` with full reorthogonalization.
///
/// The iteration stops once the Ritz residual is below `1e-12` of the Ritz
/// value, which bounds the relative error of the result well below `1e-8`.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let data = m.as_slice();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let mut mv = vec![Complex64::new(0.0, 0.0); n];
        for (i, out) in mv.iter_mut().enumerate() {
            *out = data[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
        }
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        for (i, &x) in mv.iter().enumerate() {
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in w.iter_mut().zip(&data[i * n..(i + 1) * n]) {
                *o += a.conj() * x;
            }
        }
        w
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x006c_616e_637a_6f73);
    let mut v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect();
    let norm = l2(&v);
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut best = 0.0f64;
    loop {
        let mut w = apply(&v);
        let alpha = dot(&v, &w).re;
        basis.push(v);
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = l2(&w);
        let steps = alphas.len();
        let tri = DMatrix::from_fn(steps, steps, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let (top, &theta) =
            eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("at least one Lanczos step");
        best = best.max(theta);
        let residual = beta * eig.eigenvectors[(steps - 1, top)].abs();
        if steps == n || beta <= f64::EPSILON * theta.max(f64::MIN_POSITIVE) || residual <= 1e-12 * theta {
            break;
        }
        betas.push(beta);
        v = w.into_iter().map(|x| x / beta).collect();
    }
    best.max(0.0).sqrt()
}

/// Fuglede-Kadison determinant `(prod sigma_i)^{1/N}`, from singular values.
///
/// Singular values below `N eps sigma_max` count as zero, so numerically
/// singular matrices give exactly 0.
pub fn fk_determinant(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let sv: DVector<f64> = m.to_nalgebra().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let cutoff = n as f64 * f64::EPSILON * smax;
    if smax == 0.0 || sv.iter().any(|&s| s <= cutoff) {
        return 0.0;
    }
    (sv.iter().map(|s| s.ln()).sum::<f64>() / n as f64).exp()
}

/// `od_m = tr(m m*) - (1/N) sum |lambda_i|^2`.
///
/// For upper triangular `m` this is exactly `(1/N) sum_{i<j} |m_ij|^2`.
/// Otherwise small negative rounding (down to `-1e-10`) is clamped to 0.
pub fn offdiag_second_moment(m: &ComplexMatrix) -> Result<f64> {
    let n = m.dim();
    if m.is_upper_triangular() {
        let acc: f64 = (0..n).flat_map(|i| m.row(i)[i + 1..].iter()).map(|z| z.norm_sqr()).sum();
        return Ok(acc / n as f64);
    }
    let spectrum = eigenvalues(m)?;
    Ok(offdiag_from_spectrum(m, &spectrum))
}

/// [`offdiag_second_moment`] with the eigenvalues already at hand.
pub fn offdiag_from_spectrum(m: &ComplexMatrix, spectrum: &EmpiricalSpectrum) -> f64 {
    let od = m.frobenius_norm_sqr() / m.dim() as f64 - spectrum.mean_abs_sqr();
    if (-1e-10..0.0).contains(&od) {
        0.0
    } else {
        od
    }
}

/// Optimal matching (bottleneck) distance between two multisets of equal size:
/// the smallest `r` such that some bijection moves every point by at most `r`.
///
/// Returns infinity when the sizes differ.
pub fn matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = a.len();
    if n != b.len() {
        return f64::INFINITY;
    }
    if n == 0 {
        return 0.0;
    }
    let dist: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| (x - y).norm())).collect();
    let mut levels = dist.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(n, &dist, levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    levels[lo]
}

/// Kuhn's augmenting-path matching on the graph `dist[i][j] <= r`.
fn has_perfect_matching(n: usize, dist: &[f64], r: f64) -> bool {
    fn augment(i: usize, n: usize, dist: &[f64], r: f64, seen: &mut [bool], owner: &mut [usize]) -> bool {
        for j in 0..n {
            if dist[i * n + j] <= r && !seen[j] {
                seen[j] = true;
                if owner[j] == usize::MAX || augment(owner[j], n, dist, r, seen, owner) {
                    owner[j] = i;
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![usize::MAX; n];
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, n, dist, r, &mut seen, &mut owner)
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
