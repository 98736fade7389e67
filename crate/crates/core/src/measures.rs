//! Compactly supported probability measures on the complex plane.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::EmpiricalSpectrum;

/// A probability measure on `C`, either parametric or a finite point set.
///
/// Disks and circles are uniform (area and arc length); the semicircle lives
/// on a real interval `[center - radius, center + radius]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    PointMass {
        at: Complex64,
    },
    UniformDisk {
        #[serde(default)]
        center: Complex64,
        radius: f64,
    },
    UniformCircle {
        #[serde(default)]
        center: Complex64,
        radius: f64,
    },
    Semicircle {
        #[serde(default)]
        center: f64,
        radius: f64,
    },
    FiniteAtomic {
        points: Vec<Complex64>,
        weights: Vec<f64>,
    },
    Empirical {
        points: Vec<Complex64>,
    },
}

/// Value of a logarithmic energy integral together with how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEnergy {
    /// May be `-inf` (measures with atoms).
    pub value: f64,
    /// Estimated absolute error; 0 for closed forms.
    pub error_estimate: f64,
    /// False when the quadrature budget ran out before the target accuracy.
    pub converged: bool,
}

impl LogEnergy {
    fn exact(value: f64) -> Self {
        LogEnergy { value, error_estimate: 0.0, converged: true }
    }
}

/// Target absolute error for quadrature-based energies.
pub const LOG_ENERGY_TOLERANCE: f64 = 1e-4;

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl MeasureSpec {
    pub fn point_mass(at: Complex64) -> Self {
        MeasureSpec::PointMass { at }
    }

    pub fn unit_disk() -> Self {
        MeasureSpec::UniformDisk { center: Complex64::new(0.0, 0.0), radius: 1.0 }
    }

    pub fn unit_circle() -> Self {
        MeasureSpec::UniformCircle { center: Complex64::new(0.0, 0.0), radius: 1.0 }
    }

    pub fn from_spectrum(spectrum: &EmpiricalSpectrum) -> Self {
        MeasureSpec::Empirical { points: spectrum.points().to_vec() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMeasure(msg));
        match self {
            MeasureSpec::PointMass { at } if !finite(*at) => bad("point mass location must be finite".into()),
            MeasureSpec::UniformDisk { center, radius } | MeasureSpec::UniformCircle { center, radius } => {
                if !finite(*center) {
                    bad("center must be finite".into())
                } else if !(radius.is_finite() && *radius > 0.0) {
                    bad(format!("radius must be positive and finite, got {radius}"))
                } else {
                    Ok(())
                }
            }
            MeasureSpec::Semicircle { center, radius } => {
                if !center.is_finite() {
                    bad("center must be finite".into())
                } else if !(radius.is_finite() && *radius > 0.0) {
                    bad(format!("radius must be positive and finite, got {radius}"))
                } else {
                    Ok(())
                }
            }
            MeasureSpec::FiniteAtomic { points, weights } => {
                if points.is_empty() {
                    return bad("atomic measure needs at least one point".into());
                }
                if points.len() != weights.len() {
                    return bad(format!("{} points but {} weights", points.len(), weights.len()));
                }
                if !points.iter().all(|z| finite(*z)) {
                    return bad("atom locations must be finite".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return bad("weights must be nonnegative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("weights sum to {total}, not 1"));
                }
                Ok(())
            }
            MeasureSpec::Empirical { points } => {
                if points.is_empty() {
                    bad("empirical measure needs at least one point".into())
                } else if !points.iter().all(|z| finite(*z)) {
                    bad("empirical points must be finite".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// `sup { |z| : z in supp mu }`.
    pub fn support_radius(&self) -> f64 {
        match self {
            MeasureSpec::PointMass { at } => at.norm(),
            MeasureSpec::UniformDisk { center, radius } | MeasureSpec::UniformCircle { center, radius } => {
                center.norm() + radius
            }
            MeasureSpec::Semicircle { center, radius } => center.abs() + radius,
            MeasureSpec::FiniteAtomic { points, weights } => {
                points.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(z, _)| z.norm()).fold(0.0, f64::max)
            }
            MeasureSpec::Empirical { points } => points.iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }

    /// Whether the support lies on the real line.
    pub fn is_real(&self) -> bool {
        match self {
            MeasureSpec::PointMass { at } => at.im == 0.0,
            MeasureSpec::UniformDisk { .. } | MeasureSpec::UniformCircle { .. } => false,
            MeasureSpec::Semicircle { .. } => true,
            MeasureSpec::FiniteAtomic { points, weights } => {
                points.iter().zip(weights).all(|(z, w)| *w == 0.0 || z.im == 0.0)
            }
            MeasureSpec::Empirical { points } => points.iter().all(|z| z.im == 0.0),
        }
    }

    /// Image of the measure under `z -> a z + b`.
    pub fn affine_image(&self, a: Complex64, b: Complex64) -> Result<MeasureSpec> {
        let map = |z: &Complex64| a * z + b;
        Ok(match self {
            MeasureSpec::PointMass { at } => MeasureSpec::PointMass { at: map(at) },
            MeasureSpec::UniformDisk { center, radius } => {
                MeasureSpec::UniformDisk { center: map(center), radius: a.norm() * radius }
            }
            MeasureSpec::UniformCircle { center, radius } => {
                MeasureSpec::UniformCircle { center: map(center), radius: a.norm() * radius }
            }
            MeasureSpec::Semicircle { center, radius } => {
                if a.im != 0.0 || b.im != 0.0 {
                    return Err(Error::InvalidMeasure("a semicircle is only closed under real affine maps".into()));
                }
                MeasureSpec::Semicircle { center: a.re * center + b.re, radius: a.re.abs() * radius }
            }
            MeasureSpec::FiniteAtomic { points, weights } => {
                MeasureSpec::FiniteAtomic { points: points.iter().map(map).collect(), weights: weights.clone() }
            }
            MeasureSpec::Empirical { points } => MeasureSpec::Empirical { points: points.iter().map(map).collect() },
        })
    }

    /// One draw from the measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match self {
            MeasureSpec::PointMass { at } => *at,
            MeasureSpec::UniformDisk { center, radius } => center + uniform_disk_point(rng, *radius),
            MeasureSpec::UniformCircle { center, radius } => {
                let theta = 2.0 * PI * rng.random::<f64>();
                center + Complex64::from_polar(*radius, theta)
            }
            // The real part of a uniform point in a disk is semicircular.
            MeasureSpec::Semicircle { center, radius } => {
                Complex64::new(center + uniform_disk_point(rng, *radius).re, 0.0)
            }
            MeasureSpec::FiniteAtomic { points, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (z, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *z;
                    }
                }
                // Rounding left u above the last partial sum.
                let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(points.len() - 1);
                points[last]
            }
            MeasureSpec::Empirical { points } => points[rng.random_range(0..points.len())],
        }
    }

    /// Mixed moment `int z^i conj(z)^j dmu`.
    pub fn moment(&self, i: usize, j: usize) -> Complex64 {
        match self {
            MeasureSpec::PointMass { at } => at.powu(i as u32) * at.conj().powu(j as u32),
            MeasureSpec::UniformDisk { center, radius } => {
                shifted_radial_moment(*center, i, j, |a| radius.powi(2 * a as i32) / (a as f64 + 1.0))
            }
            MeasureSpec::UniformCircle { center, radius } => {
                shifted_radial_moment(*center, i, j, |a| radius.powi(2 * a as i32))
            }
            MeasureSpec::Semicircle { center, radius } => {
                let n = i + j;
                let mut acc = 0.0;
                for q in 0..=n / 2 {
                    let even = catalan(q) * (radius / 2.0).powi(2 * q as i32);
                    acc += binomial(n, 2 * q) * center.powi((n - 2 * q) as i32) * even;
                }
                Complex64::new(acc, 0.0)
            }
            MeasureSpec::FiniteAtomic { points, weights } => {
                points.iter().zip(weights).map(|(z, w)| z.powu(i as u32) * z.conj().powu(j as u32) * w).sum()
            }
            MeasureSpec::Empirical { points } => {
                let total: Complex64 = points.iter().map(|z| z.powu(i as u32) * z.conj().powu(j as u32)).sum();
                total / points.len() as f64
            }
        }
    }

    /// All moments with `0 <= i, j <= l`, row-major in `(i, j)`.
    pub fn moment_table(&self, l: usize) -> Vec<Complex64> {
        let width = l + 1;
        let weighted_points = |points: &[Complex64], weight: &dyn Fn(usize) -> f64| {
            let mut table = vec![Complex64::new(0.0, 0.0); width * width];
            let mut zpow = vec![Complex64::new(0.0, 0.0); width];
            for (idx, z) in points.iter().enumerate() {
                let w = weight(idx);
                if w == 0.0 {
                    continue;
                }
                zpow[0] = Complex64::new(1.0, 0.0);
                for p in 1..width {
                    zpow[p] = zpow[p - 1] * z;
                }
                for i in 0..width {
                    for j in 0..width {
                        table[i * width + j] += zpow[i] * zpow[j].conj() * w;
                    }
                }
            }
            table
        };
        match self {
            MeasureSpec::FiniteAtomic { points, weights } => weighted_points(points, &|k| weights[k]),
            MeasureSpec::Empirical { points } => {
                let w = 1.0 / points.len() as f64;
                weighted_points(points, &|_| w)
            }
            _ => (0..width * width).map(|k| self.moment(k / width, k % width)).collect(),
        }
    }

    /// `int |z|^2 dmu`.
    pub fn second_moment_radial(&self) -> f64 {
        self.moment(1, 1).re
    }

    /// `int int log|z - w| dmu(z) dmu(w)`.
    ///
    /// Closed forms for every kind except the semicircle, which is integrated
    /// numerically with target absolute error [`LOG_ENERGY_TOLERANCE`]. Any
    /// measure with an atom has energy `-inf`.
    pub fn log_energy(&self) -> LogEnergy {
        match self {
            MeasureSpec::PointMass { .. } | MeasureSpec::FiniteAtomic { .. } | MeasureSpec::Empirical { .. } => {
                LogEnergy::exact(f64::NEG_INFINITY)
            }
            MeasureSpec::UniformDisk { radius, .. } => LogEnergy::exact(radius.ln() - 0.25),
            MeasureSpec::UniformCircle { radius, .. } => LogEnergy::exact(radius.ln()),
            MeasureSpec::Semicircle { radius, .. } => {
                let unit = semicircle_unit_energy();
                LogEnergy { value: radius.ln() + unit.value, ..unit }
            }
        }
    }
}

fn uniform_disk_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>())
}

/// `E[(c + w)^i conj(c + w)^j]` for rotation invariant `w` with
/// `E|w|^{2a} = radial(a)`; only the diagonal terms of the double binomial
/// expansion survive.
fn shifted_radial_moment(c: Complex64, i: usize, j: usize, radial: impl Fn(usize) -> f64) -> Complex64 {
    (0..=i.min(j))
        .map(|a| c.powu((i - a) as u32) * c.conj().powu((j - a) as u32) * (binomial(i, a) * binomial(j, a) * radial(a)))
        .sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

fn catalan(q: usize) -> f64 {
    binomial(2 * q, q) / (q as f64 + 1.0)
}

/// Log energy of the semicircle of radius 1, by nested tanh-sinh quadrature.
///
/// With `x = cos(theta)` the density becomes `(2/pi) sin^2(theta)` on
/// `[0, pi]`. The inner integral has a log singularity at `phi = theta`, so it
/// is split there and each piece sees the singularity only at an endpoint.
fn semicircle_unit_energy() -> LogEnergy {
    let weight = |t: f64| 2.0 / PI * t.sin().powi(2);
    let inner_error = std::cell::Cell::new(0.0f64);
    let potential = |theta: f64| {
        let x = theta.cos();
        let f = |phi: f64| (x - phi.cos()).abs().ln() * weight(phi);
        let left = quadrature::double_exponential::integrate(f, 0.0, theta, 1e-10);
        let right = quadrature::double_exponential::integrate(f, theta, PI, 1e-10);
        inner_error.set(inner_error.get().max(left.error_estimate + right.error_estimate));
        left.integral + right.integral
    };
    let outer = quadrature::double_exponential::integrate(|t| potential(t) * weight(t), 0.0, PI, 1e-8);
    // The outer weight integrates to 1, so inner errors add at most their max.
    let error = outer.error_estimate + inner_error.get();
    LogEnergy { value: outer.integral, error_estimate: error, converged: error <= LOG_ENERGY_TOLERANCE }
}

/// `(1/N^2) sum_{i != j} log|z_i - z_j|`, the finite-N log energy estimator.
///
/// Returns `-inf` as soon as two points coincide (distance below `1e-300`).
pub fn empirical_log_energy(points: &[Complex64]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::param("points", format!("need at least two points, got {n}")));
    }
    let mut acc = 0.0;
    for (i, z) in points.iter().enumerate() {
        for w in &points[i + 1..] {
            let d = (z - w).norm();
            if d < 1e-300 {
                return Ok(f64::NEG_INFINITY);
            }
            acc += d.ln();
        }
    }
    Ok(2.0 * acc / (n * n) as f64)
}

/// `max_{0 <= i, j <= l} |int z^i conj(z)^j d(mu - nu)|`.
pub fn moment_distance(mu: &MeasureSpec, nu: &MeasureSpec, l: usize) -> f64 {
    mu.moment_table(l).iter().zip(nu.moment_table(l)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn moment_examples() {
        let disk = MeasureSpec::unit_disk();
        assert_eq!(disk.moment(0, 0), c(1.0, 0.0));
        assert!((disk.moment(1, 1) - c(0.5, 0.0)).norm() < 1e-15);
        let p = MeasureSpec::point_mass(c(0.5, -2.0));
        let z = c(0.5, -2.0);
        assert!((p.moment(3, 2) - z * z * z * z.conj() * z.conj()).norm() < 1e-12);
        assert!((MeasureSpec::unit_circle().second_moment_radial() - 1.0).abs() < 1e-15);
        assert!((p.second_moment_radial() - z.norm_sqr()).abs() < 1e-12);
    }

    /// Moments of the parametric kinds against averages over a fine polar grid.
    #[test]
    fn parametric_moments_match_grid_oracle() {
        let center = c(0.3, -0.7);
        let (nr, nt) = (800, 512);
        for (i, j) in [(0, 0), (1, 0), (2, 1), (2, 2), (3, 1)] {
            let mut disk = c(0.0, 0.0);
            let mut circle = c(0.0, 0.0);
            for a in 0..nt {
                let theta = 2.0 * PI * (a as f64 + 0.5) / nt as f64;
                let z = center + Complex64::from_polar(1.5, theta);
                circle += z.powu(i) * z.conj().powu(j) / nt as f64;
                for b in 0..nr {
                    let r = 1.5 * (b as f64 + 0.5) / nr as f64;
                    let z = center + Complex64::from_polar(r, theta);
                    // Area element r dr dtheta over pi R^2.
                    let w = r * (1.5 / nr as f64) * (2.0 * PI / nt as f64) / (PI * 1.5 * 1.5);
                    disk += z.powu(i) * z.conj().powu(j) * w;
                }
            }
            let d = MeasureSpec::UniformDisk { center, radius: 1.5 }.moment(i as usize, j as usize);
            let o = MeasureSpec::UniformCircle { center, radius: 1.5 }.moment(i as usize, j as usize);
            assert!((d - disk).norm() < 1e-5, "disk ({i},{j}): {d} vs {disk}");
            assert!((o - circle).norm() < 1e-9, "circle ({i},{j}): {o} vs {circle}");
        }
    }

    #[test]
    fn semicircle_moments_match_grid_oracle() {
        let (center, radius) = (0.4, 2.0);
        let m = 200_000;
        for n in 0..6 {
            let mut acc = 0.0;
            for k in 0..m {
                let x = -radius + 2.0 * radius * (k as f64 + 0.5) / m as f64;
                let density = 2.0 / (PI * radius * radius) * (radius * radius - x * x).sqrt();
                acc += (center + x).powi(n) * density * 2.0 * radius / m as f64;
            }
            let got = MeasureSpec::Semicircle { center, radius }.moment(n as usize, 0).re;
            assert!((got - acc).abs() < 1e-5, "n={n}: {got} vs {acc}");
        }
    }

    #[test]
    fn log_energy_closed_forms() {
        assert_eq!(MeasureSpec::point_mass(c(1.0, 0.0)).log_energy().value, f64::NEG_INFINITY);
        assert_eq!(MeasureSpec::unit_circle().log_energy().value, 0.0);
        assert_eq!(MeasureSpec::unit_disk().log_energy().value, -0.25);
    }

    /// Circle: the energy reduces to `(1/2pi) int log|1 - e^{it}| dt`.
    #[test]
    fn unit_circle_energy_matches_midpoint_oracle() {
        let m = 2_000_000;
        let oracle: f64 = (0..m)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                (c(1.0, 0.0) - Complex64::from_polar(1.0, t)).norm().ln()
            })
            .sum::<f64>()
            / m as f64;
        assert!((oracle - MeasureSpec::unit_circle().log_energy().value).abs() < 1e-4);
    }

    /// Disk: averaging over angles (Jensen) leaves `int int 4 r s log max(r, s)`.
    #[test]
    fn unit_disk_energy_matches_radial_oracle() {
        let m = 2000;
        let h = 1.0 / m as f64;
        let mut acc = 0.0;
        for a in 0..m {
            let r = (a as f64 + 0.5) * h;
            for b in 0..m {
                let s = (b as f64 + 0.5) * h;
                acc += 4.0 * r * s * r.max(s).ln() * h * h;
            }
        }
        assert!((acc - MeasureSpec::unit_disk().log_energy().value).abs() < 1e-4);
    }

    /// Semicircle: Chebyshev expansion of `log|cos a - cos b|` with
    /// coefficients taken by midpoint sums.
    #[test]
    fn semicircle_energy_matches_chebyshev_oracle() {
        let m = 20_000;
        let mut energy = -(2.0f64).ln();
        for n in 1..40 {
            let a_n: f64 = (0..m)
                .map(|k| {
                    let t = PI * (k as f64 + 0.5) / m as f64;
                    (n as f64 * t).cos() * t.sin().powi(2)
                })
                .sum::<f64>()
                * (PI / m as f64)
                * 2.0
                / PI;
            energy -= 2.0 / n as f64 * a_n * a_n;
        }
        let got = MeasureSpec::Semicircle { center: 0.0, radius: 1.0 }.log_energy();
        assert!(got.converged);
        assert!((got.value - energy).abs() < 1e-4, "{} vs {energy}", got.value);
        let two = MeasureSpec::Semicircle { center: 3.0, radius: 2.0 }.log_energy();
        assert!((two.value + 0.25).abs() < 1e-4);
    }

    #[test]
    fn empirical_log_energy_examples() {
        let v = empirical_log_energy(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!((v - 2f64.ln() / 2.0).abs() < 1e-15);
        assert_eq!(empirical_log_energy(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap(), f64::NEG_INFINITY);
        assert!(empirical_log_energy(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn moment_distance_examples() {
        let d = MeasureSpec::unit_disk();
        assert_eq!(moment_distance(&d, &d, 3), 0.0);
        let a = MeasureSpec::point_mass(c(0.0, 0.0));
        let b = MeasureSpec::point_mass(c(1.0, 0.0));
        assert!((moment_distance(&a, &b, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_respects_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let circle = MeasureSpec::UniformCircle { center: c(1.0, 1.0), radius: 0.5 };
        let semi = MeasureSpec::Semicircle { center: -1.0, radius: 2.0 };
        let atoms = MeasureSpec::FiniteAtomic { points: vec![c(0.0, 0.0), c(2.0, 0.0)], weights: vec![0.25, 0.75] };
        let n = 20_000;
        let (mut m_circle, mut m_semi, mut m_atoms) = (c(0.0, 0.0), 0.0, 0.0);
        for _ in 0..n {
            let z = circle.sample(&mut rng);
            assert!(((z - c(1.0, 1.0)).norm() - 0.5).abs() < 1e-12);
            m_circle += z / n as f64;
            let x = semi.sample(&mut rng);
            assert!(x.im == 0.0 && (-3.0..=1.0).contains(&x.re));
            m_semi += x.re / n as f64;
            m_atoms += atoms.sample(&mut rng).re / n as f64;
        }
        // Standard errors: 0.0025, 0.007, 0.0061.
        assert!((m_circle - c(1.0, 1.0)).norm() < 0.015);
        assert!((m_semi + 1.0).abs() < 0.03);
        assert!((m_atoms - 1.5).abs() < 0.03);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(MeasureSpec::UniformDisk { center: c(0.0, 0.0), radius: 0.0 }.validate().is_err());
        let bad = MeasureSpec::FiniteAtomic { points: vec![c(0.0, 0.0)], weights: vec![0.9] };
        assert!(bad.validate().is_err());
        let neg = MeasureSpec::FiniteAtomic { points: vec![c(0.0, 0.0), c(1.0, 0.0)], weights: vec![1.5, -0.5] };
        assert!(neg.validate().is_err());
        assert!(MeasureSpec::Empirical { points: vec![] }.validate().is_err());
        assert!(MeasureSpec::unit_disk().validate().is_ok());
    }

    #[test]
    fn json_shape() {
        let m: MeasureSpec = serde_json::from_str(r#"{"kind":"uniform_disk","radius":1.0}"#).unwrap();
        assert_eq!(m, MeasureSpec::unit_disk());
        let p: MeasureSpec = serde_json::from_str(r#"{"kind":"point_mass","at":[0.0,1.0]}"#).unwrap();
        assert_eq!(p, MeasureSpec::point_mass(c(0.0, 1.0)));
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"kind":"uniform_disk","radius":1.0,"x":2}"#).is_err());
    }
}
