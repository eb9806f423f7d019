//! Monte Carlo check of `int F(k*, k1*, w_hat . sigma) = int F(k, k1, w_hat . sigma)`
//! over `R^3 x R^3 x S^2`.

use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{collision_outputs, UnitVector};
use crate::math::{exp, sqrt, Vec3, FOUR_PI};
use crate::quadrature::{uniform_direction, Estimate, MCSampler};

type CovFn = dyn Fn(Vec3, Vec3, f64) -> f64 + Send + Sync;

/// Test function `F(k, k1, c)` vanishing for `|k|^2 + |k1|^2 > support^2`.
/// Since the collisional law conserves energy, the same support bounds
/// both sides of the identity.
#[derive(Clone)]
pub struct CovTestFunction {
    name: String,
    support: f64,
    f: Arc<CovFn>,
}

impl fmt::Debug for CovTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovTestFunction")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

/// `exp(1 - 1/(1 - x))` on `x < 1`, zero beyond.
pub fn bump(x: f64) -> f64 {
    if x < 1.0 {
        exp(1.0 - 1.0 / (1.0 - x))
    } else {
        0.0
    }
}

impl CovTestFunction {
    /// The caller guarantees that `f` vanishes outside the energy ball.
    pub fn new(
        name: impl Into<String>,
        support: f64,
        f: impl Fn(Vec3, Vec3, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::domain("test function support must be positive"));
        }
        Ok(CovTestFunction {
            name: name.into(),
            support,
            f: Arc::new(f),
        })
    }

    /// `exp(-|k - a|^2 - 2|k1 - b|^2)(1 + c^2) bump(E / R^2)` with off-center
    /// `a`, `b`, so that neither side is trivially symmetric.
    pub fn gaussian(support: f64) -> Result<Self> {
        let a = Vec3::new(0.5, 0.0, 0.0);
        let b = Vec3::new(0.0, -0.3, 0.2);
        let r2 = support * support;
        Self::new("gaussian_bump", support, move |k, k1, c| {
            let e = k.norm_sq() + k1.norm_sq();
            exp(-(k - a).norm_sq() - 2.0 * (k1 - b).norm_sq()) * (1.0 + c * c) * bump(e / r2)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn eval(&self, k: Vec3, k1: Vec3, c: f64) -> f64 {
        (self.f)(k, k1, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovReport {
    pub test_function: String,
    pub n_samples: usize,
    /// `int F(k*, k1*, w_hat . sigma)`
    pub lhs: Estimate,
    /// `int F(k, k1, w_hat . sigma)`
    pub rhs: Estimate,
    /// Paired estimate of `lhs - rhs`.
    pub difference: Estimate,
    pub relative_discrepancy: f64,
    /// `|difference| / stderr`, zero when both vanish.
    pub sigmas: f64,
    pub passed: bool,
}

/// Shared-sample estimate of both sides. `k` and `k1` are drawn from the
/// sampler's proposal, `sigma` uniformly; antithetic runs pair `sigma` with
/// `-sigma`. Samples outside the ball of radius `rho_max` carry zero weight,
/// so the support must sit at least `2 h` inside it.
pub fn check_change_of_variables(f: &CovTestFunction, sampler: &MCSampler, h: f64) -> Result<CovReport> {
    let rho = sampler.rho_max;
    if f.support() > rho - 2.0 * h {
        return Err(Error::Support {
            support: f.support(),
            rho_max: rho,
        });
    }
    let pairs = if sampler.antithetic { 2 } else { 1 };
    let units = sampler.n_samples / pairs;
    if units < 2 {
        return Err(Error::config("change-of-variables check needs at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut acc = [[0.0_f64; 2]; 3];
    for _ in 0..units {
        let k = sampler.proposal.draw(&mut rng);
        let k1 = sampler.proposal.draw(&mut rng);
        let s = uniform_direction(&mut rng);
        let mut vals = [0.0_f64; 2];
        if k.norm() <= rho && k1.norm() <= rho {
            let weight = FOUR_PI / (sampler.proposal.density(k) * sampler.proposal.density(k1));
            let dirs = [s, -s];
            for d in &dirs[..pairs] {
                let sigma = UnitVector::new(*d)?;
                let cfg = collision_outputs(k, k1, sigma);
                let c = cfg.w_hat_dot_sigma();
                vals[0] += weight * f.eval(cfg.kstar, cfg.k1star, c);
                vals[1] += weight * f.eval(k, k1, c);
            }
            vals[0] /= pairs as f64;
            vals[1] /= pairs as f64;
        }
        for (slot, v) in acc.iter_mut().zip([vals[0], vals[1], vals[0] - vals[1]]) {
            slot[0] += v;
            slot[1] += v * v;
        }
    }
    let n = units as f64;
    let est = |a: [f64; 2]| {
        let mean = a[0] / n;
        let var = (a[1] / n - mean * mean).max(0.0) * n / (n - 1.0);
        Estimate {
            value: mean,
            stderr: sqrt(var / n),
        }
    };
    let (lhs, rhs, diff) = (est(acc[0]), est(acc[1]), est(acc[2]));
    let scale = lhs.value.abs().max(rhs.value.abs());
    let sigmas = if diff.stderr > 0.0 {
        diff.value.abs() / diff.stderr
    } else if diff.value == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CovReport {
        test_function: f.name().into(),
        n_samples: units * pairs,
        lhs,
        rhs,
        difference: diff,
        relative_discrepancy: if scale > 0.0 { diff.value.abs() / scale } else { 0.0 },
        sigmas,
        passed: sigmas <= 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Proposal;

    fn sampler(seed: u64, n: usize) -> MCSampler {
        MCSampler {
            proposal: Proposal::Gaussian { scale: 1.0 },
            ..MCSampler::new(seed, n)
        }
    }

    #[test]
    fn gaussian_test_function_sides_agree() {
        let f = CovTestFunction::gaussian(3.0).unwrap();
        let r = check_change_of_variables(&f, &sampler(1, 200_000), 0.5).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.lhs.value > 0.0);
    }

    #[test]
    fn energy_and_angle_only_integrand_has_zero_difference() {
        let f = CovTestFunction::new("radial", 3.0, |k, k1, c| (1.0 + c) * bump((k.norm_sq() + k1.norm_sq()) / 9.0)).unwrap();
        let r = check_change_of_variables(&f, &sampler(2, 10_000), 0.5).unwrap();
        assert!(r.difference.value.abs() <= 1e-12 * r.rhs.value, "{r:?}");
    }

    #[test]
    fn support_near_boundary_is_rejected() {
        let f = CovTestFunction::gaussian(7.5).unwrap();
        assert!(matches!(
            check_change_of_variables(&f, &sampler(0, 100), 0.5),
            Err(Error::Support { .. })
        ));
    }

    #[test]
    fn stderr_shrinks_like_inverse_sqrt() {
        let f = CovTestFunction::gaussian(3.0).unwrap();
        let a = check_change_of_variables(&f, &sampler(4, 20_000), 0.5).unwrap();
        let b = check_change_of_variables(&f, &sampler(4, 320_000), 0.5).unwrap();
        let ratio = a.difference.stderr / b.difference.stderr;
        assert!((ratio - 4.0).abs() < 1.0, "{ratio}");
    }
}
