//! Randomized property suites, shared by the `properties` test target and the
//! acceptance harness. Each suite runs a proptest runner for a fixed number of
//! cases and reports the first minimal failure.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use freeent::ensembles::{sample_diagonal, sample_dt, sample_haar_unitary, sample_strict_upper, EnsembleSpec};
use freeent::entropy::{diagonal_entropy, entropy_upper_bound, offdiagonality};
use freeent::matrix::{trace_all_words, trace_word, ComplexMatrix, StarWord};
use freeent::measures::{empirical_log_energy, MeasureSpec};
use freeent::microstates::{in_gamma, in_gamma_tilde, word_perturbation_bound, MicrostateSpec};
use freeent::models::{target_table, McParams, OperatorModel, StarMomentTable};
use freeent::seed::Seed;
use freeent::spectral::{eigenvalues, fk_determinant, matching_distance, offdiag_second_moment, operator_norm};

pub struct Suite {
    pub name: &'static str,
    pub cases: u32,
    pub run: fn(u32) -> Result<(), String>,
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite { name: "unitary conjugation invariance", cases: 64, run: conjugation_invariance },
        Suite { name: "spectral identities", cases: 128, run: spectral_identities },
        Suite { name: "normality and offdiagonality", cases: 64, run: normality_detects_offdiagonality },
        Suite { name: "offdiagonality consistency", cases: 64, run: offdiagonality_consistency },
        Suite { name: "microstate nesting and monotonicity", cases: 128, run: microstate_nesting_and_monotonicity },
        Suite { name: "microstate conjugation invariance", cases: 32, run: microstate_conjugation_invariance },
        Suite { name: "translation mechanics", cases: 128, run: translation_mechanics },
        Suite { name: "log-energy scaling law", cases: 128, run: log_energy_scaling },
        Suite { name: "log-energy translation invariance", cases: 128, run: log_energy_translation },
        Suite { name: "moment conjugate symmetry", cases: 128, run: moment_conjugate_symmetry },
        Suite { name: "determinism by seed", cases: 64, run: determinism_by_seed },
        Suite { name: "dt stream decomposition", cases: 32, run: dt_decomposition },
        Suite { name: "entropy gap identity", cases: 128, run: entropy_gap_identity },
        Suite { name: "dt target table star symmetry", cases: 16, run: dt_table_star_symmetry },
    ]
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn ginibre(n: usize, seed: u64) -> ComplexMatrix {
    EnsembleSpec::Ginibre { dim: n }.sample(&Seed::new(seed)).unwrap()
}

fn conjugate(u: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    u.matmul(m).matmul(&u.adjoint())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// A random matrix from several families, so that normal, non-normal,
/// triangular and nearly defective inputs all show up.
fn any_matrix() -> impl Strategy<Value = ComplexMatrix> {
    (0usize..5, 2usize..40, any::<u64>()).prop_map(|(family, n, s)| matrix_of(family, n, s))
}

/// Ginibre, Haar and scaled Ginibre samples have well-conditioned
/// eigenvalues; the DT and perturbed-shift families are far from normal.
fn well_conditioned(family: usize) -> bool {
    matches!(family, 0 | 1 | 4)
}

fn matrix_of(family: usize, n: usize, s: u64) -> ComplexMatrix {
    {
        let seed = Seed::new(s);
        match family {
            0 => ginibre(n, s),
            1 => sample_haar_unitary(n, &seed),
            2 => sample_dt(&MeasureSpec::unit_circle(), 0.7, n, &seed).unwrap(),
            3 => EnsembleSpec::Perturbed { base: Box::new(EnsembleSpec::Shift { dim: n }), scale: 1e-2 }
                .sample(&seed)
                .unwrap(),
            _ => ginibre(n, s).scale_real(3.0),
        }
    }
}

fn conjugation_invariance(cases: u32) -> Result<(), String> {
    run(cases, (0usize..5, 2usize..40, any::<u64>()), |(family, n, s)| {
        let m = matrix_of(family, n, s);
        let u = sample_haar_unitary(m.dim(), &Seed::new(s).derive("conjugator"));
        let c = conjugate(&u, &m);
        for w in StarWord::all_up_to(4) {
            let d = (trace_word(&m, &w) - trace_word(&c, &w)).norm();
            prop_assert!(d < 1e-8, "trace of {w} moved by {d}");
        }
        let scale = operator_norm(&m).max(1.0);
        // Far from normal matrices have eigenvalues that rounding alone moves
        // by far more than 1e-8, so only the multiset of the others is compared.
        if well_conditioned(family) {
            let d = matching_distance(eigenvalues(&m).unwrap().points(), eigenvalues(&c).unwrap().points());
            prop_assert!(d < 1e-8 * scale, "eigenvalues moved by {d}");
        }
        prop_assert!(rel(operator_norm(&m), operator_norm(&c)) < 1e-8);
        prop_assert!(rel(fk_determinant(&m), fk_determinant(&c)) < 1e-8);
        let (oa, ob) = (offdiag_second_moment(&m).unwrap(), offdiag_second_moment(&c).unwrap());
        prop_assert!((oa - ob).abs() < 1e-8 * scale * scale, "{oa} vs {ob}");
        Ok(())
    })
}

fn spectral_identities(cases: u32) -> Result<(), String> {
    run(cases, any_matrix(), |m| {
        let n = m.dim() as f64;
        let eig = eigenvalues(&m).unwrap();
        let det = fk_determinant(&m);
        if eig.points().iter().all(|z| z.norm() > 1e-6) {
            let via_eig = (eig.points().iter().map(|z| z.norm().ln()).sum::<f64>() / n).exp();
            prop_assert!(rel(det, via_eig) < 1e-8, "{det} vs {via_eig}");
        }
        let sv = m.to_nalgebra().singular_values();
        let tr = trace_word(&m, &"1*".parse().unwrap()).re;
        prop_assert!((tr - sv.iter().map(|s| s * s).sum::<f64>() / n).abs() < 1e-10 * tr.max(1.0));
        prop_assert!((tr - m.frobenius_norm_sqr() / n).abs() < 1e-10 * tr.max(1.0));
        prop_assert!(operator_norm(&m) >= eig.spectral_radius() - 1e-8);
        prop_assert!(offdiag_second_moment(&m).unwrap() >= -1e-10);
        Ok(())
    })
}

fn normality_detects_offdiagonality(cases: u32) -> Result<(), String> {
    run(cases, (2usize..40, any::<u64>(), 0.1f64..2.0), |(n, s, o)| {
        let seed = Seed::new(s);
        let u = sample_haar_unitary(n, &seed.derive("u"));
        let d = sample_diagonal(&MeasureSpec::unit_disk(), n, &seed.derive("d")).unwrap();
        let normal = conjugate(&u, &d);
        prop_assert!(normal.commutator_norm() <= 1e-8);
        prop_assert!(offdiag_second_moment(&normal).unwrap() <= 1e-6);
        let skew = conjugate(&u, &sample_dt(&MeasureSpec::unit_disk(), o, n, &seed.derive("dt")).unwrap());
        let od = offdiag_second_moment(&skew).unwrap();
        prop_assert!(skew.commutator_norm() > 1e-8);
        prop_assert!(od > 1e-6, "od {od}");
        Ok(())
    })
}

fn offdiagonality_consistency(cases: u32) -> Result<(), String> {
    run(cases, (2usize..40, any::<u64>(), 0.0f64..2.0), |(n, s, o)| {
        let seed = Seed::new(s);
        let t = sample_dt(&MeasureSpec::unit_circle(), o, n, &seed).unwrap();
        let direct: f64 =
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| t[(i, j)].norm_sqr()).sum::<f64>()
                / n as f64;
        prop_assert_eq!(offdiag_second_moment(&t).unwrap(), direct);
        let m = conjugate(&sample_haar_unitary(n, &seed.derive("u")), &t);
        let eig = eigenvalues(&m).unwrap();
        let tr = m.frobenius_norm_sqr() / n as f64;
        let via = offdiagonality(tr, &MeasureSpec::from_spectrum(&eig)).unwrap().value;
        prop_assert!((via - offdiag_second_moment(&m).unwrap()).abs() < 1e-8);
        prop_assert!((via - direct).abs() < 1e-8);
        Ok(())
    })
}

#[derive(Clone, Debug)]
struct Params {
    radius: f64,
    k: usize,
    eps: f64,
    l: usize,
    theta: f64,
}

fn params() -> impl Strategy<Value = Params> {
    (0.5f64..4.0, 1usize..=3, 0.02f64..1.0, 1usize..=3, 0.02f64..1.0).prop_map(|(radius, k, eps, l, theta)| Params {
        radius,
        k,
        eps,
        l,
        theta,
    })
}

fn model() -> impl Strategy<Value = OperatorModel> {
    prop_oneof![Just(OperatorModel::Circular), Just(OperatorModel::HaarUnitary)]
}

fn spec_for(model: &OperatorModel, p: &Params, table: &StarMomentTable) -> MicrostateSpec {
    MicrostateSpec::new(p.radius, p.k, p.eps, table.clone()).with_brown(p.l, p.theta, model.descriptor().0)
}

fn microstate_nesting_and_monotonicity(cases: u32) -> Result<(), String> {
    let strategy = (any_matrix(), model(), params(), 1.0f64..3.0, 0usize..3, 0usize..3);
    run(cases, strategy, |(m, model, p, grow, dk, dl)| {
        let table = target_table(&model, 3, None).unwrap();
        let spec = spec_for(&model, &p, &table);
        let plain = in_gamma(&m, &spec);
        let tilde = in_gamma_tilde(&m, &spec).unwrap();
        prop_assert!(!tilde.member || plain.member, "improved member outside the plain set");
        let looser = Params {
            radius: p.radius * grow,
            k: p.k.saturating_sub(dk).max(1),
            eps: p.eps * grow,
            l: p.l.saturating_sub(dl).max(1),
            theta: p.theta * grow,
        };
        let loose = spec_for(&model, &looser, &table);
        if plain.member {
            prop_assert!(in_gamma(&m, &loose).member, "loosening {p:?} -> {looser:?} lost plain membership");
        }
        if tilde.member {
            prop_assert!(in_gamma_tilde(&m, &loose).unwrap().member, "loosening lost improved membership");
        }
        Ok(())
    })
}

fn microstate_conjugation_invariance(cases: u32) -> Result<(), String> {
    let strategy = (10usize..80, any::<u64>(), model(), params());
    run(cases, strategy, |(n, s, model, p)| {
        let m = ginibre(n, s);
        let c = conjugate(&sample_haar_unitary(n, &Seed::new(s).derive("u")), &m);
        let spec = spec_for(&model, &p, &target_table(&model, 3, None).unwrap());
        let (a, b) = (in_gamma_tilde(&m, &spec).unwrap(), in_gamma_tilde(&c, &spec).unwrap());
        // Decisions may only differ when a statistic sits within rounding of
        // its threshold.
        let near = |x: &freeent::microstates::Membership| {
            x.worst_margin.abs() < 1e-8
                || (x.norm - spec.radius).abs() < 1e-8
                || x.brown_distance.is_some_and(|d| (d - p.theta).abs() < 1e-6)
        };
        prop_assert!(a.member == b.member || near(&a) || near(&b));
        Ok(())
    })
}

fn translation_mechanics(cases: u32) -> Result<(), String> {
    let strategy = (2usize..30, any::<u64>(), 1usize..=4, 0.0f64..0.5, 0.01f64..0.5, 0.5f64..2.0);
    run(cases, strategy, |(n, s, k, delta, eps, scale)| {
        let m = ginibre(n, s).scale_real(scale);
        // m is a microstate of itself; radius leaves room for the Lanczos
        // estimate of the norm of m + b.
        let radius = operator_norm(&m) * (1.0 + 1e-9) + 1e-12;
        let table = StarMomentTable::exact(k, |w| trace_word(&m, w));
        let spec = MicrostateSpec::new(radius, k, eps, table.clone());
        prop_assert!(in_gamma(&m, &spec).member);
        let u = sample_haar_unitary(n, &Seed::new(s).derive("b"));
        let b = u.scale_real(delta);
        let moved = &m + &b;
        let wider = MicrostateSpec::new(radius + delta, k, eps + word_perturbation_bound(radius, delta, k), table);
        let check = in_gamma(&moved, &wider);
        prop_assert!(check.member, "margin {} norm {} radius {}", check.worst_margin, check.norm, radius + delta);
        Ok(())
    })
}

fn parametric_measure() -> impl Strategy<Value = MeasureSpec> {
    let c = (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| Complex64::new(a, b));
    prop_oneof![
        (c.clone(), 0.1f64..3.0).prop_map(|(center, radius)| MeasureSpec::UniformDisk { center, radius }),
        (c, 0.1f64..3.0).prop_map(|(center, radius)| MeasureSpec::UniformCircle { center, radius }),
        (-2.0f64..2.0, 0.1f64..3.0).prop_map(|(center, radius)| MeasureSpec::Semicircle { center, radius }),
    ]
}

fn nonzero_complex() -> impl Strategy<Value = Complex64> {
    (0.05f64..5.0, 0.0f64..(2.0 * PI)).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn empirical_points() -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| Complex64::new(a, b)), 2..40)
}

fn log_energy_scaling(cases: u32) -> Result<(), String> {
    run(cases, (parametric_measure(), nonzero_complex(), empirical_points()), |(mu, a, pts)| {
        let a = if matches!(mu, MeasureSpec::Semicircle { .. }) { Complex64::new(a.norm(), 0.0) } else { a };
        let image = mu.affine_image(a, Complex64::new(0.0, 0.0)).unwrap();
        let expect = mu.log_energy().value + a.norm().ln();
        prop_assert!((image.log_energy().value - expect).abs() < 1e-3);
        let before = empirical_log_energy(&pts).unwrap();
        let scaled: Vec<Complex64> = pts.iter().map(|z| a * z).collect();
        prop_assume!(before.is_finite());
        // The estimator drops the N diagonal pairs, so only N(N-1) of the N^2
        // terms pick up log|a|.
        let n = pts.len() as f64;
        let expect = before + (n - 1.0) / n * a.norm().ln();
        prop_assert!((empirical_log_energy(&scaled).unwrap() - expect).abs() < 1e-3);
        Ok(())
    })
}

fn log_energy_translation(cases: u32) -> Result<(), String> {
    let shift = (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| Complex64::new(a, b));
    run(cases, (parametric_measure(), shift, empirical_points()), |(mu, c, pts)| {
        let c = if matches!(mu, MeasureSpec::Semicircle { .. }) { Complex64::new(c.re, 0.0) } else { c };
        let image = mu.affine_image(Complex64::new(1.0, 0.0), c).unwrap();
        prop_assert!((image.log_energy().value - mu.log_energy().value).abs() < 1e-3);
        let before = empirical_log_energy(&pts).unwrap();
        let moved: Vec<Complex64> = pts.iter().map(|z| z + c).collect();
        prop_assume!(before.is_finite());
        prop_assert!((empirical_log_energy(&moved).unwrap() - before).abs() < 1e-3);
        Ok(())
    })
}

fn moment_conjugate_symmetry(cases: u32) -> Result<(), String> {
    let any_measure = prop_oneof![
        parametric_measure(),
        empirical_points().prop_map(|points| MeasureSpec::Empirical { points }),
        (empirical_points(), any::<u64>()).prop_map(|(points, s)| {
            let raw: Vec<f64> = (0..points.len()).map(|i| ((s >> (i % 64)) & 7) as f64 + 1.0).collect();
            let total: f64 = raw.iter().sum();
            MeasureSpec::FiniteAtomic { points, weights: raw.iter().map(|w| w / total).collect() }
        }),
    ];
    run(cases, (any_measure, 0usize..5, 0usize..5), |(mu, i, j)| {
        let (a, b) = (mu.moment(i, j), mu.moment(j, i).conj());
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0), "{a} vs {b}");
        Ok(())
    })
}

fn any_ensemble() -> impl Strategy<Value = EnsembleSpec> {
    (0usize..7, 1usize..30, 0.0f64..1.0).prop_map(|(kind, dim, x)| match kind {
        0 => EnsembleSpec::Ginibre { dim },
        1 => EnsembleSpec::StrictUpperGaussian { dim },
        2 => EnsembleSpec::DiagonalIid { dim, measure: MeasureSpec::unit_disk() },
        3 => EnsembleSpec::Dt { dim, measure: MeasureSpec::unit_circle(), offdiag: x },
        4 => EnsembleSpec::HaarUnitary { dim },
        5 => EnsembleSpec::Shift { dim },
        _ => EnsembleSpec::Perturbed { base: Box::new(EnsembleSpec::HaarUnitary { dim }), scale: x },
    })
}

fn determinism_by_seed(cases: u32) -> Result<(), String> {
    run(cases, (any_ensemble(), any::<u64>(), "[a-z]{1,8}"), |(e, s, label)| {
        let seed = Seed::new(s).derive(label);
        let a = e.sample(&seed).unwrap();
        prop_assert_eq!(&a, &e.sample(&seed.clone()).unwrap());
        let other = e.sample(&seed.trial(1)).unwrap();
        if e.is_random() && e.dim() > 1 {
            prop_assert_ne!(&a, &other);
        }
        Ok(())
    })
}

fn dt_decomposition(cases: u32) -> Result<(), String> {
    run(cases, (1usize..30, any::<u64>(), 0.0f64..3.0), |(n, s, o)| {
        let seed = Seed::new(s);
        let nu = MeasureSpec::unit_disk();
        let a = sample_dt(&nu, o, n, &seed).unwrap();
        let d = sample_diagonal(&nu, n, &seed.derive("dt.diagonal")).unwrap();
        let t = sample_strict_upper(n, &seed.derive("dt.upper"));
        prop_assert_eq!(a, &d + &t.scale_real(o.sqrt()));
        Ok(())
    })
}

fn entropy_gap_identity(cases: u32) -> Result<(), String> {
    run(cases, (parametric_measure(), 1e-3f64..10.0, 1e-3f64..10.0), |(mu, od, od2)| {
        let gap = entropy_upper_bound(&mu, od).unwrap() - diagonal_entropy(&mu);
        let expect = 0.5 + (2.0 * od).sqrt().ln() + PI.ln() / 2.0;
        prop_assert!((gap - expect).abs() < 1e-10, "{gap} vs {expect}");
        let (lo, hi) = if od < od2 { (od, od2) } else { (od2, od) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        prop_assert!(entropy_upper_bound(&mu, lo).unwrap() < entropy_upper_bound(&mu, hi).unwrap());
        Ok(())
    })
}

fn dt_table_star_symmetry(cases: u32) -> Result<(), String> {
    run(cases, (2usize..20, any::<u64>(), 0.0f64..2.0), |(n, s, o)| {
        let model = OperatorModel::Dt { measure: MeasureSpec::unit_disk(), offdiag: o };
        let mc = McParams { dim: n, trials: 4, seed: Seed::new(s) };
        let table = target_table(&model, 4, Some(&mc)).unwrap();
        for w in StarWord::all_up_to(4) {
            let (a, b) = (table.value(&w).unwrap(), table.value(&w.adjoint()).unwrap());
            prop_assert!((a - b.conj()).norm() < 1e-10, "{w}: {a} vs {b}");
        }
        let m = sample_dt(&MeasureSpec::unit_disk(), o, n, &Seed::new(s)).unwrap();
        for (w, v) in trace_all_words(&m, 4) {
            prop_assert!((v - trace_word(&m, &w.adjoint()).conj()).norm() < 1e-10);
        }
        Ok(())
    })
}
