//! Monte Carlo moment estimates of an ensemble over all words up to a length.

use num_complex::Complex64;

use freeent::ensembles::EnsembleSpec;
use freeent::matrix::{trace_all_words, StarWord};
use freeent::models::MomentEstimate;
use freeent::seed::Seed;

pub fn ensemble_moments(e: &EnsembleSpec, k: usize, trials: usize, seed: &Seed) -> Vec<(StarWord, MomentEstimate)> {
    let samples: Vec<Vec<(StarWord, Complex64)>> =
        (0..trials).map(|t| trace_all_words(&e.sample(&seed.trial(t)).unwrap(), k)).collect();
    let words = StarWord::all_up_to(k);
    words
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let xs: Vec<Complex64> = samples.iter().map(|s| s[i].1).collect();
            (w, MomentEstimate::from_samples(&xs))
        })
        .collect()
}

/// Largest `|estimate - exact| / stderr` over all words, with a floor on the
/// standard error so exactly determined moments compare at 1e-12.
pub fn worst_z(est: &[(StarWord, MomentEstimate)], exact: impl Fn(&StarWord) -> f64) -> (StarWord, f64) {
    est.iter()
        .map(|(w, e)| (w.clone(), (e.estimate - Complex64::new(exact(w), 0.0)).norm() / e.stderr.max(1e-12)))
        .fold((StarWord::all_of_length(1)[0].clone(), 0.0), |a, b| if b.1 > a.1 { b } else { a })
}
