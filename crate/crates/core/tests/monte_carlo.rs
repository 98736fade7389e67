//! Seeded Monte Carlo checks of the sampling, membership and sweep drivers.

mod support;

use num_complex::Complex64;

use freeent::ensembles::{sample_diagonal, EnsembleSpec};
use freeent::entropy::{dt_equality_report, DtEqualityParams};
use freeent::measures::{empirical_log_energy, MeasureSpec};
use freeent::microstates::{hit_rate, in_gamma_diag, regularization_sweep, MicrostateSpec};
use freeent::models::{haar_moment, target_table, McParams, OperatorModel};
use freeent::seed::Seed;

use support::mc::{ensemble_moments, worst_z};

fn point_mass_zero() -> MeasureSpec {
    MeasureSpec::point_mass(Complex64::new(0.0, 0.0))
}

#[test]
fn ginibre_300_lands_in_circular_microstates() {
    let targets = target_table(&OperatorModel::Circular, 3, None).unwrap();
    let spec = MicrostateSpec::new(3.0, 3, 0.2, targets);
    let hr = hit_rate(&EnsembleSpec::Ginibre { dim: 300 }, &spec, 100, &Seed::new(11)).unwrap();
    assert!(hr.hits >= 95, "{} of 100", hr.hits);
}

#[test]
fn ginibre_500_lands_in_improved_circular_microstates() {
    let targets = target_table(&OperatorModel::Circular, 3, None).unwrap();
    let spec = MicrostateSpec::new(3.0, 3, 0.2, targets).with_brown(2, 0.2, MeasureSpec::unit_disk());
    let hr = hit_rate(&EnsembleSpec::Ginibre { dim: 500 }, &spec, 100, &Seed::new(12)).unwrap();
    assert!(hr.hits >= 90, "{} of 100", hr.hits);
}

#[test]
fn perturbed_shift_lands_in_improved_haar_microstates() {
    let targets = target_table(&OperatorModel::HaarUnitary, 2, None).unwrap();
    let spec = MicrostateSpec::new(2.0, 2, 0.1, targets).with_brown(2, 0.2, MeasureSpec::unit_circle());
    let ensemble = EnsembleSpec::Perturbed { base: Box::new(EnsembleSpec::Shift { dim: 500 }), scale: 1e-3 };
    let hr = hit_rate(&ensemble, &spec, 20, &Seed::new(13)).unwrap();
    assert!(hr.fraction >= 0.9, "{} of {}", hr.hits, hr.trials);
}

#[test]
fn diagonal_samples_pass_their_own_brown_constraint() {
    let mu = MeasureSpec::unit_circle();
    let seed = Seed::new(14);
    let hits = (0..100)
        .filter(|&i| {
            let d = sample_diagonal(&mu, 500, &seed.trial(i)).unwrap();
            in_gamma_diag(&d, 1.5, &mu, 2, 0.1).unwrap()
        })
        .count();
    assert!(hits >= 90, "{hits} of 100");
}

#[test]
fn unperturbed_ginibre_matches_the_disk() {
    let rows = regularization_sweep(
        &EnsembleSpec::Ginibre { dim: 500 },
        &[0.0],
        &MeasureSpec::unit_disk(),
        2,
        3,
        &Seed::new(15),
    )
    .unwrap();
    assert!(rows[0].mean_distance <= 0.05, "{}", rows[0].mean_distance);
}

#[test]
fn haar_samples_match_haar_moments() {
    let est = ensemble_moments(&EnsembleSpec::HaarUnitary { dim: 300 }, 4, 50, &Seed::new(16));
    let (w, z) = worst_z(&est, |w| haar_moment(w) as f64);
    assert!(z <= 3.0, "word {w}: {z} stderr");
}

#[test]
fn disk_log_energy_from_samples() {
    let disk = MeasureSpec::unit_disk();
    let mean = (0..10)
        .map(|s| {
            let mut rng = Seed::new(17).trial(s).rng();
            let pts: Vec<Complex64> = (0..2000).map(|_| disk.sample(&mut rng)).collect();
            empirical_log_energy(&pts).unwrap()
        })
        .sum::<f64>()
        / 10.0;
    assert!((mean + 0.25).abs() <= 0.05, "{mean}");
}

#[test]
fn dt_point_mass_first_moments_vanish() {
    let model = OperatorModel::Dt { measure: point_mass_zero(), offdiag: 1.0 };
    let mc = McParams { dim: 500, trials: 50, seed: Seed::new(18) };
    let table = target_table(&model, 1, Some(&mc)).unwrap();
    for w in ["1", "*"] {
        let w = w.parse().unwrap();
        assert!(table.value(&w).unwrap().norm() <= 1e-12);
        assert!(table.stderr(&w) <= 1e-2);
    }
}

#[test]
fn dt_equality_diagnostics() {
    let p = DtEqualityParams {
        measure: point_mass_zero(),
        offdiag: 1.0,
        dims: vec![100, 200, 400],
        k: 2,
        eps: 0.1,
        radius: None,
        trials: 30,
        delta: 1e-3,
        target_dim: None,
        target_trials: 50,
        seed: 19,
    };
    let report = dt_equality_report(&p).unwrap();
    let dt = report.dt.unwrap();
    for pair in dt.rows.windows(2) {
        assert!(pair[1].hit_rate >= pair[0].hit_rate, "{:?}", dt.rows);
    }
    assert!(dt.rows.last().unwrap().hit_rate >= 0.9);

    assert_eq!(dt.rows.last().unwrap().lower_bound, f64::NEG_INFINITY);
}

#[test]
fn dt_lower_bound_approaches_the_equality_value() {
    // Circular element: the disk has log energy -1/4, so its diagonal entropy
    // is -1/4 + 3/4 + (ln pi)/2; with od = 1/2 the volume part tends to
    // 1/2 + (ln pi)/2, giving 1 + ln pi in total.
    let p = DtEqualityParams {
        measure: MeasureSpec::unit_disk(),
        offdiag: 0.5,
        dims: vec![400],
        k: 2,
        eps: 0.1,
        radius: None,
        trials: 5,
        delta: 1e-3,
        target_dim: None,
        target_trials: 20,
        seed: 20,
    };
    let report = dt_equality_report(&p).unwrap();
    let expected = 1.0 + std::f64::consts::PI.ln();
    let got = report.dt.unwrap().rows[0].lower_bound;
    assert!((got - expected).abs() <= 0.1, "{got} vs {expected}");
}
