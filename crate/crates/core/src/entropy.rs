//! Closed-form entropy quantities: offdiagonality, diagonal entropy, the
//! upper bound, the selfadjoint and variance comparisons, ball volumes, and
//! the DT equality report that puts them next to Monte Carlo evidence.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::microstates::{hit_rate, MicrostateSpec};
use crate::models::{target_table, McParams, OperatorModel};
use crate::report::ext_f64;
use crate::seed::Seed;

/// `tau(x x*) - int |z|^2 dmu`, flagged when negative (inconsistent inputs).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offdiagonality {
    pub value: f64,
    pub inconsistent: bool,
}

pub fn offdiagonality(second_star_moment: f64, mu: &MeasureSpec) -> Result<Offdiagonality> {
    if !(second_star_moment.is_finite() && second_star_moment >= 0.0) {
        return Err(Error::param("second_star_moment", format!("must be >= 0, got {second_star_moment}")));
    }
    let value = second_star_moment - mu.second_moment_radial();
    Ok(Offdiagonality { value, inconsistent: value < 0.0 })
}

/// `log_energy(mu) + 3/4 + (ln pi)/2`.
pub fn diagonal_entropy(mu: &MeasureSpec) -> f64 {
    mu.log_energy().value + 0.75 + PI.ln() / 2.0
}

/// `log_energy(mu) + 5/4 + ln(pi sqrt(2 od))`; `-inf` at `od = 0`.
pub fn entropy_upper_bound(mu: &MeasureSpec, od: f64) -> Result<f64> {
    if !(od.is_finite() && od >= 0.0) {
        return Err(Error::param("od", format!("must be finite and >= 0, got {od}")));
    }
    if od == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(mu.log_energy().value + 1.25 + (PI * (2.0 * od).sqrt()).ln())
}

/// `log_energy(mu) + 3/4 + (ln 2 pi)/2` for measures on the real line.
pub fn selfadjoint_entropy(mu: &MeasureSpec) -> Result<f64> {
    if !mu.is_real() {
        return Err(Error::InvalidMeasure("selfadjoint entropy needs a measure on the real line".into()));
    }
    Ok(mu.log_energy().value + 0.75 + (2.0 * PI).ln() / 2.0)
}

/// Power of the variance inside the comparison bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum VarianceExponent {
    /// `log(pi e v)`: scales correctly and reproduces the circular element.
    One,
    /// `log(pi e v^2)`, the squared form.
    Two,
}

impl TryFrom<u8> for VarianceExponent {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(VarianceExponent::One),
            2 => Ok(VarianceExponent::Two),
            other => Err(format!("variance exponent must be 1 or 2, got {other}")),
        }
    }
}

impl From<VarianceExponent> for u8 {
    fn from(e: VarianceExponent) -> u8 {
        match e {
            VarianceExponent::One => 1,
            VarianceExponent::Two => 2,
        }
    }
}

/// `log(pi e v^p)` with `v = phi(|x|^2) - |phi(x)|^2`; `-inf` at `v = 0`.
///
/// Rounding that leaves `v` within `1e-12 (1 + phi_xx)` below zero is treated
/// as zero; anything more negative is an input error.
pub fn variance_bound(phi_xx: f64, phi_x: Complex64, exponent: VarianceExponent) -> Result<f64> {
    let v = phi_xx - phi_x.norm_sqr();
    if !v.is_finite() || v < -1e-12 * (1.0 + phi_xx.abs()) {
        return Err(Error::param("phi_xx", format!("variance {v} is negative")));
    }
    if v <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let p = f64::from(u8::from(exponent));
    Ok((PI * std::f64::consts::E).ln() + p * v.ln())
}

/// `(1/N^2) log vol(B) + (log N)/2` for the ball `B` of radius `sqrt(o N)` in
/// `C^{N(N-1)/2}`, computed through `ln Gamma`.
pub fn ball_log_volume(n: usize, o: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("dim", format!("must be at least 2, got {n}")));
    }
    if !(o.is_finite() && o > 0.0) {
        return Err(Error::param("o", format!("must be positive, got {o}")));
    }
    let nf = n as f64;
    let m = nf * (nf - 1.0) / 2.0;
    let log_vol = m * PI.ln() - ln_gamma(m + 1.0) + m * (o * nf).ln();
    Ok(log_vol / (nf * nf) + nf.ln() / 2.0)
}

/// `1/2 + (log 2 pi o)/2`, the large-N limit of [`ball_log_volume`].
pub fn ball_log_volume_limit(o: f64) -> Result<f64> {
    if !(o.is_finite() && o > 0.0) {
        return Err(Error::param("o", format!("must be positive, got {o}")));
    }
    Ok(0.5 + (2.0 * PI * o).ln() / 2.0)
}

/// Closed-form entropy values of an operator with Brown measure `measure`,
/// offdiagonality `od`, and first moments as for DT(measure, od).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub measure: MeasureSpec,
    pub od: f64,
    #[serde(with = "ext_f64")]
    pub log_energy: f64,
    pub log_energy_error: f64,
    #[serde(with = "ext_f64")]
    pub diagonal_entropy: f64,
    #[serde(with = "ext_f64")]
    pub upper_bound: f64,
    /// Variance comparison with exponent 1.
    #[serde(with = "ext_f64")]
    pub variance_bound: f64,
    /// Variance comparison with the squared variance.
    #[serde(with = "ext_f64")]
    pub variance_bound_squared: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<DtDiagnostics>,
}

impl EntropyReport {
    pub fn new(measure: &MeasureSpec, od: f64) -> Result<EntropyReport> {
        measure.validate()?;
        let energy = measure.log_energy();
        let phi_xx = measure.second_moment_radial() + od;
        let phi_x = measure.moment(1, 0);
        Ok(EntropyReport {
            measure: measure.clone(),
            od,
            log_energy: energy.value,
            log_energy_error: energy.error_estimate,
            diagonal_entropy: diagonal_entropy(measure),
            upper_bound: entropy_upper_bound(measure, od)?,
            variance_bound: variance_bound(phi_xx, phi_x, VarianceExponent::One)?,
            variance_bound_squared: variance_bound(phi_xx, phi_x, VarianceExponent::Two)?,
            dt: None,
        })
    }
}

/// Monte Carlo side of the DT equality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtDiagnostics {
    pub k: usize,
    pub eps: f64,
    pub radius: f64,
    pub delta: f64,
    pub trials: usize,
    pub targets: McParams,
    pub max_target_stderr: f64,
    /// `diagonal_entropy + ball_log_volume_limit((1 - delta) o)`.
    #[serde(with = "ext_f64")]
    pub limit_lower_bound: f64,
    pub rows: Vec<DtRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtRow {
    pub dim: usize,
    pub hits: usize,
    pub trials: usize,
    pub hit_rate: f64,
    pub hit_rate_lower: f64,
    pub hit_rate_upper: f64,
    /// `ball_log_volume(N, (1 - delta) o)`.
    pub ball_log_volume: f64,
    /// `diagonal_entropy + ball_log_volume(N, (1 - delta) o)`.
    #[serde(with = "ext_f64")]
    pub lower_bound: f64,
}

/// Parameters of [`dt_equality_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtEqualityParams {
    pub measure: MeasureSpec,
    pub offdiag: f64,
    pub dims: Vec<usize>,
    pub k: usize,
    pub eps: f64,
    /// Norm bound; defaults to `sup |supp nu| + 4 sqrt(o)`.
    #[serde(default)]
    pub radius: Option<f64>,
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Dimension of the Monte Carlo target table; defaults to the largest dim.
    #[serde(default)]
    pub target_dim: Option<usize>,
    #[serde(default = "default_target_trials")]
    pub target_trials: usize,
    pub seed: u64,
}

pub fn default_delta() -> f64 {
    0.05
}

pub fn default_target_trials() -> usize {
    50
}

impl DtEqualityParams {
    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(self.measure.support_radius() + 4.0 * self.offdiag.sqrt())
    }
}

/// Upper bound of DT(nu, o) next to hit rates of DT samples in the microstates
/// of DT(nu, o) and the finite-N lower-bound diagnostics
/// `diagonal_entropy(nu) + ball_log_volume(N, (1 - delta) o)`.
///
/// Targets come from a Monte Carlo table (stream `targets`); the samples at
/// dimension `N` use stream `dim.N`.
pub fn dt_equality_report(p: &DtEqualityParams) -> Result<EntropyReport> {
    if !(p.offdiag.is_finite() && p.offdiag > 0.0) {
        return Err(Error::param("offdiag", format!("must be positive, got {}", p.offdiag)));
    }
    if p.dims.is_empty() || p.dims.iter().any(|&n| n < 2) {
        return Err(Error::param("dims", "need at least one dimension, each >= 2"));
    }
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {}", p.delta)));
    }
    if p.trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut report = EntropyReport::new(&p.measure, p.offdiag)?;
    let seed = Seed::new(p.seed);
    let model = OperatorModel::Dt { measure: p.measure.clone(), offdiag: p.offdiag };
    let mc = McParams {
        dim: p.target_dim.unwrap_or(*p.dims.iter().max().expect("nonempty")),
        trials: p.target_trials,
        seed: seed.derive("targets"),
    };
    let targets = target_table(&model, p.k, Some(&mc))?;
    let max_target_stderr = targets.max_stderr();
    let spec = MicrostateSpec::new(p.radius(), p.k, p.eps, targets);
    spec.validate()?;
    let shrunk = (1.0 - p.delta) * p.offdiag;
    let rows = p
        .dims
        .iter()
        .map(|&n| {
            let ensemble = EnsembleSpec::Dt { dim: n, measure: p.measure.clone(), offdiag: p.offdiag };
            let hr = hit_rate(&ensemble, &spec, p.trials, &seed.derive(format!("dim.{n}")))?;
            let ball = ball_log_volume(n, shrunk)?;
            Ok(DtRow {
                dim: n,
                hits: hr.hits,
                trials: hr.trials,
                hit_rate: hr.fraction,
                hit_rate_lower: hr.lower,
                hit_rate_upper: hr.upper,
                ball_log_volume: ball,
                lower_bound: report.diagonal_entropy + ball,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    report.dt = Some(DtDiagnostics {
        k: p.k,
        eps: p.eps,
        radius: p.radius(),
        delta: p.delta,
        trials: p.trials,
        targets: mc,
        max_target_stderr,
        limit_lower_bound: report.diagonal_entropy + ball_log_volume_limit(shrunk)?,
        rows,
    });
    Ok(report)
}
