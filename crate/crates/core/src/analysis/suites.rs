//! Randomized sweeps over the pointwise identities of the collisional law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gaussian_vec;
use crate::geometry::{
    bobylev_inverse, bobylev_jacobian, bobylev_map, collision_outputs, geometric_bounds, involution, Sign,
    UnitVector,
};
use crate::math::Vec3;
use crate::quadrature::uniform_direction;

const SCALES: [f64; 3] = [0.5, 2.0, 8.0];

/// Angle and round-trip identities involving `R_hat^eps . sigma` are skipped
/// below this value, where normalizing `R^eps` loses the digits the
/// tolerance asks for.
pub const MIN_ANGLE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryTolerances {
    pub conservation: f64,
    pub identity: f64,
    pub involution: f64,
}

impl Default for GeometryTolerances {
    fn default() -> Self {
        GeometryTolerances {
            conservation: 1e-10,
            identity: 1e-10,
            involution: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySuiteReport {
    pub n_samples: usize,
    /// `max |Sigma| / (1 + |k| + |k1|)`
    pub momentum_defect: f64,
    /// `max |Omega| / (1 + E)`
    pub energy_defect: f64,
    /// Decomposition, orthogonality and Pythagoras, relative to `|y|` or `|y|^2`.
    pub bobylev_identity: f64,
    /// Magnitude, angle and complementarity relations.
    pub angle_identity: f64,
    /// `R^eps(inverse(nu)) = nu`, relative to `|nu|`.
    pub inverse_round_trip: f64,
    /// `T(T(k, k1, sigma)) - (k, k1, sigma)`, relative to `1 + |k| + |k1|`.
    pub involution_round_trip: f64,
    /// `|w*_hat . eta - w_hat . sigma|`
    pub angle_invariance: f64,
    pub angle_samples_skipped: usize,
    pub bound_violations: usize,
    pub tolerances: GeometryTolerances,
}

impl GeometrySuiteReport {
    pub fn passed(&self) -> bool {
        let t = &self.tolerances;
        self.momentum_defect <= t.conservation
            && self.energy_defect <= t.conservation
            && self.bobylev_identity <= t.identity
            && self.angle_identity <= t.identity
            && self.inverse_round_trip <= t.identity
            && self.involution_round_trip <= t.involution
            && self.angle_invariance <= t.involution
            && self.bound_violations == 0
    }
}

fn mixture(rng: &mut ChaCha8Rng) -> Vec3 {
    let s = SCALES[rng.random_range(0..SCALES.len())];
    gaussian_vec(rng, s)
}

fn unit(rng: &mut ChaCha8Rng) -> UnitVector {
    UnitVector::new(uniform_direction(rng)).expect("sampled direction is unit")
}

/// Runs every pointwise identity on `n` random configurations.
pub fn geometry_suite(seed: u64, n: usize) -> GeometrySuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = GeometrySuiteReport {
        n_samples: n,
        momentum_defect: 0.0,
        energy_defect: 0.0,
        bobylev_identity: 0.0,
        angle_identity: 0.0,
        inverse_round_trip: 0.0,
        involution_round_trip: 0.0,
        angle_invariance: 0.0,
        angle_samples_skipped: 0,
        bound_violations: 0,
        tolerances: GeometryTolerances::default(),
    };
    let up = |slot: &mut f64, v: f64| {
        if !(v <= *slot) {
            *slot = v;
        }
    };
    for _ in 0..n {
        let k = mixture(&mut rng);
        let k1 = mixture(&mut rng);
        let sigma = unit(&mut rng);
        let s = sigma.get();
        let c = collision_outputs(k, k1, sigma);
        let scale = 1.0 + k.norm() + k1.norm();
        up(&mut r.momentum_defect, c.momentum_defect().norm() / scale);
        up(&mut r.energy_defect, c.energy_defect().abs() / (1.0 + c.energy));

        let y = c.w;
        let yn = y.norm();
        let (rp, rm) = (bobylev_map(y, sigma, Sign::Plus), bobylev_map(y, sigma, Sign::Minus));
        if yn > 0.0 {
            up(&mut r.bobylev_identity, (rp + rm - y).norm() / yn);
            up(&mut r.bobylev_identity, rp.dot(rm).abs() / (yn * yn));
            up(&mut r.bobylev_identity, (rp.norm_sq() + rm.norm_sq() - yn * yn).abs() / (yn * yn));
            up(&mut r.bobylev_identity, (rp - (k - c.kstar)).norm() / yn);
            up(&mut r.bobylev_identity, (rm - (k - c.k1star)).norm() / yn);

            let (cp, cm) = (rp.hat().dot(s), rm.hat().dot(s));
            if cp.abs() >= MIN_ANGLE && cm.abs() >= MIN_ANGLE {
                up(&mut r.angle_identity, (cp * cp + cm * cm - 1.0).abs());
                for (eps, rv, ce) in [(Sign::Plus, rp, cp), (Sign::Minus, rm, cm)] {
                    up(&mut r.angle_identity, (rv.norm() / ce.abs() - yn).abs() / yn);
                    up(&mut r.angle_identity, (y.hat().dot(s) - eps.value() * (2.0 * ce * ce - 1.0)).abs());
                    if let Ok(back) = bobylev_inverse(rv, sigma, eps) {
                        up(&mut r.inverse_round_trip, (bobylev_map(back, sigma, eps) - rv).norm() / rv.norm());
                        up(&mut r.inverse_round_trip, (back - y).norm() / yn);
                    }
                }
            } else {
                r.angle_samples_skipped += 1;
            }
        }

        if let Ok((ks, k1s, eta)) = involution(k, k1, sigma) {
            if let Ok((k2, k12, s2)) = involution(ks, k1s, eta) {
                let d = (k2 - k).norm().max((k12 - k1).norm()) / scale;
                up(&mut r.involution_round_trip, d.max((s2.get() - s).norm()));
                let w_star = (ks - k1s).hat();
                up(&mut r.angle_invariance, (w_star.dot(eta.get()) - c.w_hat_dot_sigma()).abs());
            }
        }

        r.bound_violations += geometric_bounds(k, k1, sigma).violations();
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianSuiteReport {
    pub n_samples: usize,
    pub n_rejected: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl JacobianSuiteReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }
}

/// Samples with `|nu_hat . sigma|` below this are rejected: the inverse map
/// has curvature of order `(nu_hat . sigma)^{-3}` there and a central
/// difference cannot reach the tolerance.
pub const JACOBIAN_MIN_ANGLE: f64 = 0.05;

/// Central-difference determinant of the inverse Bobylev map at `nu`.
pub fn fd_jacobian(nu: Vec3, sigma: UnitVector, eps: Sign) -> Option<f64> {
    let h = 1e-4 * nu.norm();
    let mut cols = [Vec3::ZERO; 3];
    for (i, col) in cols.iter_mut().enumerate() {
        let mut e = Vec3::ZERO;
        e.0[i] = h;
        let a = bobylev_inverse(nu + e, sigma, eps).ok()?;
        let b = bobylev_inverse(nu - e, sigma, eps).ok()?;
        *col = (a - b) / (2.0 * h);
    }
    Some(cols[0].dot(cols[1].cross(cols[2])))
}

/// Compares the analytic Jacobian with [`fd_jacobian`] on `n` accepted samples.
pub fn jacobian_suite(seed: u64, n: usize) -> JacobianSuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = JacobianSuiteReport {
        n_samples: 0,
        n_rejected: 0,
        max_relative_error: 0.0,
        tolerance: 1e-5,
    };
    while report.n_samples < n {
        let nu = mixture(&mut rng);
        let sigma = unit(&mut rng);
        let c = nu.hat().dot(sigma.get());
        if c.abs() < JACOBIAN_MIN_ANGLE {
            report.n_rejected += 1;
            continue;
        }
        let eps = if c > 0.0 { Sign::Plus } else { Sign::Minus };
        let (Ok(exact), Some(fd)) = (bobylev_jacobian(nu, sigma), fd_jacobian(nu, sigma, eps)) else {
            report.n_rejected += 1;
            continue;
        };
        report.n_samples += 1;
        let e = (fd - exact).abs() / exact;
        if !(e <= report.max_relative_error) {
            report.max_relative_error = e;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_suite_passes() {
        let r = geometry_suite(7, 50_000);
        assert!(r.passed(), "{r:?}");
        assert!(r.angle_samples_skipped < 50);
    }

    #[test]
    fn jacobian_suite_passes() {
        let r = jacobian_suite(8, 2000);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn fd_jacobian_aligned_case() {
        let s = UnitVector::new(Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let j = fd_jacobian(Vec3::new(0.0, 0.0, 1.5), s, Sign::Plus).unwrap();
        assert!((j - 4.0).abs() < 1e-7, "{j}");
    }
}
