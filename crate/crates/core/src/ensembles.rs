//! Seeded samplers for the random matrix families.
//!
//! Gaussian entries come from the ziggurat sampler of `rand_distr`
//! ([`StandardNormal`]) driven by a per-stream ChaCha8 generator, so a sample
//! is a pure function of its spec and [`Seed`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::measures::MeasureSpec;
use crate::seed::Seed;

/// A random matrix family at a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    /// Entries i.i.d. complex Gaussian with `E|g|^2 = 1/N`.
    Ginibre {
        dim: usize,
    },
    /// Zero on and below the diagonal, i.i.d. complex Gaussian with
    /// `E|g|^2 = 2/N` above.
    StrictUpperGaussian {
        dim: usize,
    },
    /// Diagonal with i.i.d. entries drawn from `measure`.
    DiagonalIid {
        dim: usize,
        measure: MeasureSpec,
    },
    /// `D + sqrt(offdiag) T` with `D` diagonal from `measure` and `T` strictly
    /// upper Gaussian, drawn independently.
    Dt {
        dim: usize,
        measure: MeasureSpec,
        offdiag: f64,
    },
    HaarUnitary {
        dim: usize,
    },
    /// Ones on the superdiagonal (deterministic).
    Shift {
        dim: usize,
    },
    /// A sample of `base` plus `scale` times an independent Ginibre matrix.
    Perturbed {
        base: Box<EnsembleSpec>,
        scale: f64,
    },
}

impl EnsembleSpec {
    pub fn dim(&self) -> usize {
        match self {
            EnsembleSpec::Ginibre { dim }
            | EnsembleSpec::StrictUpperGaussian { dim }
            | EnsembleSpec::DiagonalIid { dim, .. }
            | EnsembleSpec::Dt { dim, .. }
            | EnsembleSpec::HaarUnitary { dim }
            | EnsembleSpec::Shift { dim } => *dim,
            EnsembleSpec::Perturbed { base, .. } => base.dim(),
        }
    }

    /// The same family at another dimension.
    pub fn with_dim(&self, n: usize) -> EnsembleSpec {
        let mut out = self.clone();
        match &mut out {
            EnsembleSpec::Ginibre { dim }
            | EnsembleSpec::StrictUpperGaussian { dim }
            | EnsembleSpec::DiagonalIid { dim, .. }
            | EnsembleSpec::Dt { dim, .. }
            | EnsembleSpec::HaarUnitary { dim }
            | EnsembleSpec::Shift { dim } => *dim = n,
            EnsembleSpec::Perturbed { base, .. } => **base = base.with_dim(n),
        }
        out
    }

    /// Whether two draws with different seeds can differ.
    pub fn is_random(&self) -> bool {
        match self {
            EnsembleSpec::Shift { .. } => false,
            EnsembleSpec::DiagonalIid { measure, .. } => !matches!(measure, MeasureSpec::PointMass { .. }),
            EnsembleSpec::Perturbed { base, scale } => *scale != 0.0 || base.is_random(),
            _ => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::param("ensemble.dim", "must be at least 1"));
        }
        match self {
            EnsembleSpec::DiagonalIid { measure, .. } => measure.validate(),
            EnsembleSpec::Dt { measure, offdiag, .. } => {
                if !(offdiag.is_finite() && *offdiag >= 0.0) {
                    return Err(Error::param("ensemble.offdiag", format!("must be finite and >= 0, got {offdiag}")));
                }
                measure.validate()
            }
            EnsembleSpec::Perturbed { base, scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::param("ensemble.scale", format!("must be finite and >= 0, got {scale}")));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// One draw; sub-draws use the derived streams noted on each sampler.
    pub fn sample(&self, seed: &Seed) -> Result<ComplexMatrix> {
        self.validate()?;
        Ok(match self {
            EnsembleSpec::Ginibre { dim } => sample_standard_gaussian(*dim, seed),
            EnsembleSpec::StrictUpperGaussian { dim } => sample_strict_upper(*dim, seed),
            EnsembleSpec::DiagonalIid { dim, measure } => sample_diagonal(measure, *dim, seed)?,
            EnsembleSpec::Dt { dim, measure, offdiag } => sample_dt(measure, *offdiag, *dim, seed)?,
            EnsembleSpec::HaarUnitary { dim } => sample_haar_unitary(*dim, seed),
            EnsembleSpec::Shift { dim } => nilpotent_shift(*dim),
            EnsembleSpec::Perturbed { base, scale } => sample_perturbed(base, *scale, seed)?,
        })
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// Ginibre matrix: real and imaginary parts i.i.d. `N(0, 1/(2N))`.
pub fn sample_standard_gaussian(n: usize, seed: &Seed) -> ComplexMatrix {
    let mut rng = seed.rng();
    let sd = (0.5 / n as f64).sqrt();
    ComplexMatrix::from_fn(n, |_, _| complex_gaussian(&mut rng, sd))
}

/// Strictly upper triangular; real and imaginary parts above the diagonal
/// i.i.d. `N(0, 1/N)`.
pub fn sample_strict_upper(n: usize, seed: &Seed) -> ComplexMatrix {
    let mut rng = seed.rng();
    let sd = (1.0 / n as f64).sqrt();
    ComplexMatrix::from_fn(n, |i, j| if j > i { complex_gaussian(&mut rng, sd) } else { Complex64::new(0.0, 0.0) })
}

pub fn sample_diagonal(nu: &MeasureSpec, n: usize, seed: &Seed) -> Result<ComplexMatrix> {
    nu.validate()?;
    let mut rng = seed.rng();
    let diag: Vec<Complex64> = (0..n).map(|_| nu.sample(&mut rng)).collect();
    ComplexMatrix::from_diagonal(&diag)
}

/// `D + sqrt(o) T`; `D` uses stream `dt.diagonal` and `T` stream `dt.upper`.
pub fn sample_dt(nu: &MeasureSpec, o: f64, n: usize, seed: &Seed) -> Result<ComplexMatrix> {
    if !(o.is_finite() && o >= 0.0) {
        return Err(Error::param("offdiag", format!("must be finite and >= 0, got {o}")));
    }
    let d = sample_diagonal(nu, n, &seed.derive("dt.diagonal"))?;
    let t = sample_strict_upper(n, &seed.derive("dt.upper"));
    Ok(&d + &t.scale_real(o.sqrt()))
}

/// Haar unitary: QR of a Ginibre matrix with the columns of `Q` multiplied by
/// the phases of `diag(R)`, which removes the bias of the plain QR factor.
pub fn sample_haar_unitary(n: usize, seed: &Seed) -> ComplexMatrix {
    let g = sample_standard_gaussian(n, seed).to_nalgebra();
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::from_nalgebra(&q)
}

/// The `N x N` shift: ones on the superdiagonal.
pub fn nilpotent_shift(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |i, j| Complex64::new(if j == i + 1 { 1.0 } else { 0.0 }, 0.0))
}

/// `base + t G`; the base uses stream `base`, `G` stream `perturbation`.
pub fn sample_perturbed(base: &EnsembleSpec, t: f64, seed: &Seed) -> Result<ComplexMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("scale", format!("must be finite and >= 0, got {t}")));
    }
    let b = base.sample(&seed.derive("base"))?;
    if t == 0.0 {
        return Ok(b);
    }
    let g = sample_standard_gaussian(base.dim(), &seed.derive("perturbation"));
    Ok(&b + &g.scale_real(t))
}
