//! Reference operators with known *-moments and Brown data: the circular
//! element, the Haar unitary and DT(nu, o).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::sample_dt;
use crate::error::{Error, Result};
use crate::matrix::{trace_all_words, trace_word, StarWord};
use crate::measures::MeasureSpec;
use crate::seed::Seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorModel {
    Circular,
    HaarUnitary,
    Dt { measure: MeasureSpec, offdiag: f64 },
}

impl OperatorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorModel::Dt { measure, offdiag } => {
                if !(offdiag.is_finite() && *offdiag >= 0.0) {
                    return Err(Error::param("model.offdiag", format!("must be finite and >= 0, got {offdiag}")));
                }
                measure.validate()
            }
            _ => Ok(()),
        }
    }

    /// Brown measure and offdiagonality `(mu_x, od_x)`.
    pub fn descriptor(&self) -> (MeasureSpec, f64) {
        match self {
            OperatorModel::Circular => (MeasureSpec::unit_disk(), 0.5),
            OperatorModel::HaarUnitary => (MeasureSpec::unit_circle(), 0.0),
            OperatorModel::Dt { measure, offdiag } => (measure.clone(), *offdiag),
        }
    }

    /// `(tau(x* x), tau(x))`, the inputs of the variance comparison.
    pub fn second_moments(&self) -> (f64, Complex64) {
        let (brown, od) = self.descriptor();
        (brown.second_moment_radial() + od, brown.moment(1, 0))
    }
}

/// See [`OperatorModel::descriptor`].
pub fn model_descriptor(model: &OperatorModel) -> (MeasureSpec, f64) {
    model.descriptor()
}

/// Number of noncrossing pairings of the word's positions in which every pair
/// joins a `1` with a `*`.
///
/// Counted by the interval recursion: the first letter pairs with some
/// opposite letter at position `k`, splitting the word into the independent
/// intervals strictly inside and strictly after that pair.
pub fn circular_moment(w: &StarWord) -> u64 {
    let letters = w.letters();
    let n = letters.len();
    let (ones, stars) = w.letter_counts();
    if ones != stars {
        return 0;
    }
    // count[i][j]: pairings of letters[i..j] (half open); 1 when empty.
    let mut count = vec![vec![0u64; n + 1]; n + 1];
    for (i, row) in count.iter_mut().enumerate() {
        row[i] = 1;
    }
    for len in (2..=n).step_by(2) {
        for i in 0..=n - len {
            let j = i + len;
            let mut total = 0u64;
            for k in (i + 1..j).step_by(2) {
                if letters[k] != letters[i] {
                    total += count[i + 1][k] * count[k + 1][j];
                }
            }
            count[i][j] = total;
        }
    }
    count[0][n]
}

/// 1 when the word has as many `1`s as `*`s, else 0.
pub fn haar_moment(w: &StarWord) -> u64 {
    let (ones, stars) = w.letter_counts();
    u64::from(ones == stars)
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: Complex64,
    pub stderr: f64,
}

impl MomentEstimate {
    /// Mean and standard error `sqrt(sum |x - mean|^2 / (n (n - 1)))`.
    pub fn from_samples(xs: &[Complex64]) -> MomentEstimate {
        let n = xs.len() as f64;
        let mean: Complex64 = xs.iter().sum::<Complex64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - mean).norm_sqr()).sum();
        let stderr = if xs.len() > 1 { (ss / (n * (n - 1.0))).sqrt() } else { f64::INFINITY };
        MomentEstimate { estimate: mean, stderr }
    }
}

/// Monte Carlo sampling parameters for DT moment tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub dim: usize,
    pub trials: usize,
    pub seed: Seed,
}

impl McParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("mc.dim", "must be at least 1"));
        }
        if self.trials < 2 {
            return Err(Error::param("mc.trials", format!("need at least 2 trials, got {}", self.trials)));
        }
        Ok(())
    }
}

/// `E tr(A_N^{s_1} ... A_N^{s_k})` over DT samples, trials run in parallel on
/// the derived per-trial seeds.
pub fn dt_moment_mc(nu: &MeasureSpec, o: f64, w: &StarWord, mc: &McParams) -> Result<MomentEstimate> {
    mc.validate()?;
    let samples: Vec<Complex64> = (0..mc.trials)
        .into_par_iter()
        .map(|t| sample_dt(nu, o, mc.dim, &mc.seed.trial(t)).map(|a| trace_word(&a, w)))
        .collect::<Result<_>>()?;
    Ok(MomentEstimate::from_samples(&samples))
}

/// [`dt_moment_mc`] for every word of length `1..=k` at once, all words
/// evaluated on the same samples. Output order matches [`StarWord::all_up_to`].
pub fn dt_moments_mc(nu: &MeasureSpec, o: f64, k: usize, mc: &McParams) -> Result<Vec<(StarWord, MomentEstimate)>> {
    mc.validate()?;
    let per_trial: Vec<Vec<(StarWord, Complex64)>> = (0..mc.trials)
        .into_par_iter()
        .map(|t| sample_dt(nu, o, mc.dim, &mc.seed.trial(t)).map(|a| trace_all_words(&a, k)))
        .collect::<Result<_>>()?;
    Ok(StarWord::all_up_to(k)
        .into_iter()
        .enumerate()
        .map(|(idx, w)| {
            let xs: Vec<Complex64> = per_trial.iter().map(|row| row[idx].1).collect();
            (w, MomentEstimate::from_samples(&xs))
        })
        .collect())
}

/// Target `*`-moments `tau(x^{s_1} ... x^{s_p})` for all words up to `max_len`,
/// with the Monte Carlo standard error of each (0 for exact values).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarMomentTable {
    pub max_len: usize,
    /// Word -> `[re, im]`.
    pub entries: BTreeMap<StarWord, [f64; 2]>,
    #[serde(default)]
    pub stderr: BTreeMap<StarWord, f64>,
}

impl StarMomentTable {
    pub fn exact(max_len: usize, value: impl Fn(&StarWord) -> Complex64) -> Self {
        let entries = StarWord::all_up_to(max_len)
            .into_iter()
            .map(|w| {
                let v = value(&w);
                (w, [v.re, v.im])
            })
            .collect();
        StarMomentTable { max_len, entries, stderr: BTreeMap::new() }
    }

    pub fn value(&self, w: &StarWord) -> Option<Complex64> {
        self.entries.get(w).map(|[re, im]| Complex64::new(*re, *im))
    }

    pub fn stderr(&self, w: &StarWord) -> f64 {
        self.stderr.get(w).copied().unwrap_or(0.0)
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.values().copied().fold(0.0, f64::max)
    }

    /// Every word up to `max_len` present, and `tau(w*) = conj(tau(w))` up to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for w in StarWord::all_up_to(self.max_len) {
            let v = self.value(&w).ok_or_else(|| Error::param("targets", format!("missing word {w}")))?;
            let a = self.value(&w.adjoint()).expect("adjoint has the same length");
            if (v - a.conj()).norm() > tol {
                return Err(Error::param("targets", format!("value of {w} is not the conjugate of its adjoint")));
            }
        }
        Ok(())
    }
}

/// Moment table of `model` up to words of length `k`.
///
/// Circular and Haar tables are exact; DT tables are Monte Carlo over `mc`,
/// which is then required.
pub fn target_table(model: &OperatorModel, k: usize, mc: Option<&McParams>) -> Result<StarMomentTable> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    model.validate()?;
    match model {
        OperatorModel::Circular => Ok(StarMomentTable::exact(k, |w| Complex64::new(circular_moment(w) as f64, 0.0))),
        OperatorModel::HaarUnitary => Ok(StarMomentTable::exact(k, |w| Complex64::new(haar_moment(w) as f64, 0.0))),
        OperatorModel::Dt { measure, offdiag } => {
            let mc = mc.ok_or_else(|| Error::param("mc", "DT targets need Monte Carlo parameters"))?;
            let mut entries = BTreeMap::new();
            let mut stderr = BTreeMap::new();
            for (w, est) in dt_moments_mc(measure, *offdiag, k, mc)? {
                entries.insert(w.clone(), [est.estimate.re, est.estimate.im]);
                stderr.insert(w, est.stderr);
            }
            Ok(StarMomentTable { max_len: k, entries, stderr })
        }
    }
}
