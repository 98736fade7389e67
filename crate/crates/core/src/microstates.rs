//! Microstate membership predicates, Monte Carlo hit rates, the
//! regularization sweep and the log density of the eigenvalue volume.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::matrix::{trace_all_words, ComplexMatrix, StarWord};
use crate::measures::{moment_distance, MeasureSpec};
use crate::models::StarMomentTable;
use crate::seed::Seed;
use crate::spectral::{eigenvalues, operator_norm, EmpiricalSpectrum};

/// Extra constraint of the improved microstates: the eigenvalue moments up to
/// order `l` must be within `theta` of those of `measure`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownConstraint {
    pub l: usize,
    pub theta: f64,
    pub measure: MeasureSpec,
}

/// Parameters `(R, k, eps)` of a microstate set, optionally `(l, theta, mu)`.
///
/// All bounds on trace deviations are strict (`<`); the norm bound is `<=`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostateSpec {
    pub radius: f64,
    pub k: usize,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improved: Option<BrownConstraint>,
    pub targets: StarMomentTable,
    /// Widen each word's tolerance by three standard errors of its target.
    #[serde(default = "default_true")]
    pub inflate_by_stderr: bool,
}

fn default_true() -> bool {
    true
}

impl MicrostateSpec {
    pub fn new(radius: f64, k: usize, eps: f64, targets: StarMomentTable) -> Self {
        MicrostateSpec { radius, k, eps, improved: None, targets, inflate_by_stderr: true }
    }

    pub fn with_brown(mut self, l: usize, theta: f64, measure: MeasureSpec) -> Self {
        self.improved = Some(BrownConstraint { l, theta, measure });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param("microstate.radius", format!("must be positive, got {}", self.radius)));
        }
        if self.k == 0 {
            return Err(Error::param("microstate.k", "must be at least 1"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::param("microstate.eps", format!("must be positive, got {}", self.eps)));
        }
        if self.targets.max_len < self.k {
            return Err(Error::param(
                "microstate.targets",
                format!("table covers words up to {} letters but k = {}", self.targets.max_len, self.k),
            ));
        }
        if let Some(b) = &self.improved {
            if b.l == 0 {
                return Err(Error::param("microstate.improved.l", "must be at least 1"));
            }
            if !(b.theta.is_finite() && b.theta > 0.0) {
                return Err(Error::param("microstate.improved.theta", format!("must be positive, got {}", b.theta)));
            }
            b.measure.validate()?;
        }
        Ok(())
    }

    /// Tolerance applied to word `w`.
    pub fn tolerance(&self, w: &StarWord) -> f64 {
        if self.inflate_by_stderr {
            self.eps + 3.0 * self.targets.stderr(w)
        } else {
            self.eps
        }
    }
}

/// Outcome of a membership test with the diagnostics behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub norm: f64,
    pub norm_ok: bool,
    /// The word whose deviation is closest to (or furthest past) its tolerance.
    pub worst_word: StarWord,
    pub worst_deviation: f64,
    /// `max_w (|tr - tau| - tol_w)`; negative means every word passes.
    pub worst_margin: f64,
    pub moments_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brown_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brown_ok: Option<bool>,
}

/// Membership in `Gamma_R(x; k, N, eps)`; any Brown constraint is ignored.
pub fn in_gamma(m: &ComplexMatrix, spec: &MicrostateSpec) -> Membership {
    let norm = operator_norm(m);
    let norm_ok = norm <= spec.radius;
    let mut worst: Option<(StarWord, f64, f64)> = None;
    for (w, value) in trace_all_words(m, spec.k) {
        let target = spec.targets.value(&w).expect("validated table covers every word");
        let dev = (value - target).norm();
        let margin = dev - spec.tolerance(&w);
        if worst.as_ref().is_none_or(|(_, _, best)| margin > *best) {
            worst = Some((w, dev, margin));
        }
    }
    let (worst_word, worst_deviation, worst_margin) = worst.expect("k >= 1");
    let moments_ok = worst_margin < 0.0;
    Membership {
        member: norm_ok && moments_ok,
        norm,
        norm_ok,
        worst_word,
        worst_deviation,
        worst_margin,
        moments_ok,
        brown_distance: None,
        brown_ok: None,
    }
}

/// Membership in the improved set: [`in_gamma`] plus the eigenvalue moment
/// constraint.
pub fn in_gamma_tilde(m: &ComplexMatrix, spec: &MicrostateSpec) -> Result<Membership> {
    let spectrum = eigenvalues(m)?;
    in_gamma_tilde_with_spectrum(m, &spectrum, spec)
}

/// [`in_gamma_tilde`] with the eigenvalues of `m` already computed.
pub fn in_gamma_tilde_with_spectrum(
    m: &ComplexMatrix,
    spectrum: &EmpiricalSpectrum,
    spec: &MicrostateSpec,
) -> Result<Membership> {
    let brown = spec
        .improved
        .as_ref()
        .ok_or_else(|| Error::param("microstate.improved", "the improved set needs (l, theta, measure)"))?;
    let mut out = in_gamma(m, spec);
    let distance = moment_distance(&MeasureSpec::from_spectrum(spectrum), &brown.measure, brown.l);
    let ok = distance < brown.theta;
    out.brown_distance = Some(distance);
    out.brown_ok = Some(ok);
    out.member = out.member && ok;
    Ok(out)
}

/// The improved test when `spec` carries a Brown constraint, the plain one
/// otherwise.
pub fn check(m: &ComplexMatrix, spec: &MicrostateSpec) -> Result<Membership> {
    if spec.improved.is_some() {
        in_gamma_tilde(m, spec)
    } else {
        Ok(in_gamma(m, spec))
    }
}

/// Membership of a diagonal matrix in the diagonal microstates: norm at most
/// `radius` and eigenvalue moments up to `l` within `theta` of `mu`.
pub fn in_gamma_diag(d: &ComplexMatrix, radius: f64, mu: &MeasureSpec, l: usize, theta: f64) -> Result<bool> {
    if !d.is_diagonal() {
        return Err(Error::InvalidMatrix("diagonal microstates need a diagonal matrix".into()));
    }
    let diag = d.diagonal();
    let norm = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let distance = moment_distance(&MeasureSpec::Empirical { points: diag }, mu, l);
    Ok(norm <= radius && distance < theta)
}

/// Fraction of hits with its 95% Wilson score interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub hits: usize,
    pub trials: usize,
    pub fraction: f64,
    pub lower: f64,
    pub upper: f64,
}

impl HitRate {
    pub fn new(hits: usize, trials: usize) -> HitRate {
        assert!(trials > 0 && hits <= trials);
        let (lower, upper) = wilson_interval(hits, trials);
        HitRate { hits, trials, fraction: hits as f64 / trials as f64, lower, upper }
    }
}

/// Two-sided 95% Wilson score interval for `hits` out of `trials`.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Fraction of `trials` draws of `ensemble` that pass [`check`].
pub fn hit_rate(ensemble: &EnsembleSpec, spec: &MicrostateSpec, trials: usize, seed: &Seed) -> Result<HitRate> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    ensemble.validate()?;
    spec.validate()?;
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let m = ensemble.sample(&seed.trial(t))?;
            Ok(check(&m, spec)?.member)
        })
        .collect::<Result<_>>()?;
    Ok(HitRate::new(hits.iter().filter(|h| **h).count(), trials))
}

/// Number of radial histogram bins in sweep rows.
pub const RADIAL_BINS: usize = 20;

/// One grid point of a regularization sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub mean_distance: f64,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std: f64,
    pub trials: usize,
    /// Mean over trials of `(1/N) sum |lambda_i|^2`.
    pub mean_abs_sqr: f64,
    /// Fraction of eigenvalues with `|lambda|` in each of [`RADIAL_BINS`]
    /// equal bins of `[0, radial_max]`, pooled over trials; the last bin also
    /// holds everything beyond `radial_max`.
    pub radial_histogram: Vec<f64>,
    pub radial_max: f64,
}

/// For each `t`, eigenvalues of `base + t G` over `trials` draws compared with
/// `mu` by [`moment_distance`] at order `l`.
///
/// Trial `i` uses the same seed at every `t`, so the curves share their base
/// samples and perturbation directions.
pub fn regularization_sweep(
    base: &EnsembleSpec,
    t_grid: &[f64],
    mu: &MeasureSpec,
    l: usize,
    trials: usize,
    seed: &Seed,
) -> Result<Vec<SweepRow>> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must not be empty"));
    }
    if let Some(t) = t_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::param("t_grid", format!("entries must be finite and >= 0, got {t}")));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    base.validate()?;
    mu.validate()?;
    let radial_max = 2.0 * mu.support_radius().max(1.0);
    t_grid
        .iter()
        .map(|&t| {
            let ensemble = EnsembleSpec::Perturbed { base: Box::new(base.clone()), scale: t };
            let per_trial: Vec<(f64, f64, Vec<usize>)> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let m = ensemble.sample(&seed.trial(i))?;
                    let spectrum = eigenvalues(&m)?;
                    let distance = moment_distance(&MeasureSpec::from_spectrum(&spectrum), mu, l);
                    let mut bins = vec![0usize; RADIAL_BINS];
                    for z in spectrum.points() {
                        let b = (z.norm() / radial_max * RADIAL_BINS as f64) as usize;
                        bins[b.min(RADIAL_BINS - 1)] += 1;
                    }
                    Ok((distance, spectrum.mean_abs_sqr(), bins))
                })
                .collect::<Result<_>>()?;
            let n = trials as f64;
            let mean = per_trial.iter().map(|r| r.0).sum::<f64>() / n;
            let std = if trials > 1 {
                (per_trial.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let total = (trials * base.dim()) as f64;
            let mut hist = vec![0.0; RADIAL_BINS];
            for r in &per_trial {
                for (h, c) in hist.iter_mut().zip(&r.2) {
                    *h += *c as f64 / total;
                }
            }
            Ok(SweepRow {
                t,
                mean_distance: mean,
                std,
                trials,
                mean_abs_sqr: per_trial.iter().map(|r| r.1).sum::<f64>() / n,
                radial_histogram: hist,
                radial_max,
            })
        })
        .collect()
}

/// Log of the eigenvalue volume density
/// `pi^{(N^2 - N)/2} / prod_{i=1}^N i! * prod_{i<j} |lambda_i - lambda_j|^2`.
///
/// `-inf` when two eigenvalues coincide.
pub fn vol_d_log_weight(lambdas: &[Complex64]) -> f64 {
    let n = lambdas.len();
    let pairs = (n * n - n) as f64 / 2.0;
    let factorials: f64 = (1..=n).map(|i| ln_gamma(i as f64 + 1.0)).sum();
    let mut vandermonde = 0.0;
    for (i, a) in lambdas.iter().enumerate() {
        for b in &lambdas[i + 1..] {
            let d = (a - b).norm();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            vandermonde += 2.0 * d.ln();
        }
    }
    pairs * std::f64::consts::PI.ln() - factorials + vandermonde
}

/// Bound on how far any normalized trace of a word of length at most `k` can
/// move when a matrix of norm at most `radius` is perturbed by a matrix of
/// norm at most `delta`: `k delta max(1, radius + delta)^{k-1} 2^k`.
///
/// Expanding the product, the change for a word of length `p` is at most
/// `(radius + delta)^p - radius^p <= p delta (radius + delta)^{p-1}`; the
/// `max(1, .)` keeps the bound valid for short words when `radius + delta < 1`.
pub fn word_perturbation_bound(radius: f64, delta: f64, k: usize) -> f64 {
    let k_f = k as f64;
    k_f * delta * (radius + delta).max(1.0).powi(k as i32 - 1) * 2f64.powi(k as i32)
}
