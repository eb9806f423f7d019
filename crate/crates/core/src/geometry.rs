//! Pointwise geometry of resonant quartets.
//!
//! With `K = (k + k1)/2` and `w = k - k1`, the post-interaction wavenumbers are
//! `k* = K - |w| sigma / 2` and `k1* = K + |w| sigma / 2`. Everything here is
//! exact arithmetic on that parametrization: Bobylev variables, their inverse
//! and Jacobian, the involution `(k, k1, sigma) -> (k*, k1*, -w_hat)` and the
//! lower bounds relating brackets of the four wavenumbers.

use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{sqrt, Vec3};

/// Radius deviation accepted (and corrected) by [`UnitVector::new`].
pub const UNIT_TOLERANCE: f64 = 1e-8;

/// A direction on `S^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitVector(Vec3);

impl UnitVector {
    /// Renormalizes `v` when `||v| - 1| < 1e-8`, rejects it otherwise.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() >= UNIT_TOLERANCE {
            return Err(Error::domain("direction is not of unit length"));
        }
        Ok(UnitVector(v / n))
    }

    /// Normalizes any nonzero finite vector.
    pub fn from_nonzero(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(UnitVector(v / n))
    }

    #[inline]
    pub fn get(self) -> Vec3 {
        self.0
    }
}

impl core::ops::Neg for UnitVector {
    type Output = UnitVector;
    fn neg(self) -> UnitVector {
        UnitVector(-self.0)
    }
}

/// Branch label of the Bobylev variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `R^eps_sigma(y) = y/2 + eps |y| sigma / 2`.
#[inline]
pub fn bobylev_map(y: Vec3, sigma: UnitVector, eps: Sign) -> Vec3 {
    y * 0.5 + sigma.get() * (eps.value() * 0.5 * y.norm())
}

/// Inverse of [`bobylev_map`] on its half-space `eps (nu . sigma) > 0`.
pub fn bobylev_inverse(nu: Vec3, sigma: UnitVector, eps: Sign) -> Result<Vec3> {
    let s = sigma.get();
    let dot = nu.dot(s);
    if !(eps.value() * dot > 0.0) {
        return Err(Error::domain(
            "nu lies outside the half-space where the Bobylev map is invertible",
        ));
    }
    let n = nu.norm();
    // |nu| / (nu_hat . sigma) = |nu|^2 / (nu . sigma)
    Ok(nu * 2.0 - s * (n * n / dot))
}

/// Jacobian `4 / (nu_hat . sigma)^2` of the inverse Bobylev map.
pub fn bobylev_jacobian(nu: Vec3, sigma: UnitVector) -> Result<f64> {
    let n = nu.norm();
    let dot = nu.dot(sigma.get());
    if n == 0.0 || dot == 0.0 {
        return Err(Error::domain("Jacobian undefined where nu . sigma = 0"));
    }
    let c = dot / n;
    Ok(4.0 / (c * c))
}

/// A pre-collisional pair with its scattering direction and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionConfiguration {
    pub k: Vec3,
    pub k1: Vec3,
    pub sigma: UnitVector,
    /// `K = (k + k1) / 2`
    pub center: Vec3,
    /// `w = k - k1`
    pub w: Vec3,
    /// `E = |k|^2 + |k1|^2`
    pub energy: f64,
    pub kstar: Vec3,
    pub k1star: Vec3,
}

impl CollisionConfiguration {
    /// `Sigma = k + k1 - k* - k1*`.
    pub fn momentum_defect(&self) -> Vec3 {
        (self.k + self.k1) - (self.kstar + self.k1star)
    }

    /// `Omega = |k|^2 + |k1|^2 - |k*|^2 - |k1*|^2`.
    pub fn energy_defect(&self) -> f64 {
        self.energy - (self.kstar.norm_sq() + self.k1star.norm_sq())
    }

    pub fn w_hat_dot_sigma(&self) -> f64 {
        self.w.hat().dot(self.sigma.get())
    }

    /// `R^+_sigma(w)`, equal to `k - k*`.
    pub fn r_plus(&self) -> Vec3 {
        bobylev_map(self.w, self.sigma, Sign::Plus)
    }

    /// `R^-_sigma(w)`, equal to `k - k1*`.
    pub fn r_minus(&self) -> Vec3 {
        bobylev_map(self.w, self.sigma, Sign::Minus)
    }
}

/// Collisional law. `w = 0` gives `k* = k1* = K`.
pub fn collision_outputs(k: Vec3, k1: Vec3, sigma: UnitVector) -> CollisionConfiguration {
    let center = (k + k1) * 0.5;
    let w = k - k1;
    let half = 0.5 * w.norm();
    let s = sigma.get();
    CollisionConfiguration {
        k,
        k1,
        sigma,
        center,
        w,
        energy: k.norm_sq() + k1.norm_sq(),
        kstar: center - s * half,
        k1star: center + s * half,
    }
}

/// `T(k, k1, sigma) = (k*, k1*, -w_hat)`; undefined for `w = 0`.
pub fn involution(k: Vec3, k1: Vec3, sigma: UnitVector) -> Result<(Vec3, Vec3, UnitVector)> {
    let c = collision_outputs(k, k1, sigma);
    if c.w == Vec3::ZERO {
        return Err(Error::domain("involution needs k != k1"));
    }
    let eta = UnitVector::from_nonzero(-c.w)?;
    Ok((c.kstar, c.k1star, eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// `<k*> >= ((1+E)/2)^{1/2} (1 - lambda_E |K_hat . sigma|)^{1/2}`
    EnergyKstar,
    /// Same right-hand side for `<k1*>`.
    EnergyK1star,
    /// `<k*> >= <k1*> (1 - lambda |k1*_hat . sigma|)^{1/2}`
    KstarFromK1star,
    /// `<k1*> >= <k*> (1 - lambda |k*_hat . sigma|)^{1/2}`
    K1starFromKstar,
    /// `<k1> >= <k>/3 (1 - lambda |(k - 2 R^eps(k - k1))_hat . sigma|)^{1/2}`
    K1FromK,
    /// `<k> >= <k1>/3 (1 - lambda |(k1 - 2 R^eps(k1 - k))_hat . sigma|)^{1/2}`
    KFromK1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRecord {
    pub kind: BoundKind,
    pub epsilon: Option<Sign>,
    pub lhs: f64,
    pub rhs: f64,
    pub lambda: f64,
    /// The bound involves the direction of a zero vector and holds vacuously.
    pub vacuous: bool,
}

impl BoundRecord {
    /// Non-strict check with a relative allowance for rounding.
    pub fn holds(&self) -> bool {
        self.vacuous || self.lhs >= self.rhs * (1.0 - 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricBoundReport {
    pub records: Vec<BoundRecord>,
}

impl GeometricBoundReport {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| !r.holds()).count()
    }

    pub fn all_hold(&self) -> bool {
        self.violations() == 0
    }
}

fn weighted_lambda(v: Vec3) -> f64 {
    let n2 = v.norm_sq();
    n2 / (1.0 + n2)
}

fn direction_factor(lambda: f64, dir: Vec3, sigma: Vec3) -> (f64, bool) {
    let h = dir.hat();
    let zero = h == Vec3::ZERO;
    (sqrt((1.0 - lambda * h.dot(sigma).abs()).max(0.0)), zero)
}

/// Evaluates both sides of every pointwise lower bound at `(k, k1, sigma)`,
/// including both Bobylev branches of the last two.
pub fn geometric_bounds(k: Vec3, k1: Vec3, sigma: UnitVector) -> GeometricBoundReport {
    let c = collision_outputs(k, k1, sigma);
    let s = sigma.get();
    let mut records = Vec::with_capacity(8);

    let lambda_e = c.energy / (1.0 + c.energy);
    let (fac, vac) = direction_factor(lambda_e, c.center, s);
    let rhs = sqrt(0.5 * (1.0 + c.energy)) * fac;
    for (kind, v) in [
        (BoundKind::EnergyKstar, c.kstar),
        (BoundKind::EnergyK1star, c.k1star),
    ] {
        records.push(BoundRecord {
            kind,
            epsilon: None,
            lhs: v.bracket(),
            rhs,
            lambda: lambda_e,
            vacuous: vac,
        });
    }

    for (kind, lhs_v, rhs_v) in [
        (BoundKind::KstarFromK1star, c.kstar, c.k1star),
        (BoundKind::K1starFromKstar, c.k1star, c.kstar),
    ] {
        let lambda = weighted_lambda(rhs_v);
        let (fac, vac) = direction_factor(lambda, rhs_v, s);
        records.push(BoundRecord {
            kind,
            epsilon: None,
            lhs: lhs_v.bracket(),
            rhs: rhs_v.bracket() * fac,
            lambda,
            vacuous: vac,
        });
    }

    for eps in Sign::BOTH {
        for (kind, small, large) in [(BoundKind::K1FromK, k1, k), (BoundKind::KFromK1, k, k1)] {
            let nu = bobylev_map(large - small, sigma, eps);
            let lambda = weighted_lambda(large);
            let (fac, vac) = direction_factor(lambda, large - nu * 2.0, s);
            records.push(BoundRecord {
                kind,
                epsilon: Some(eps),
                lhs: small.bracket(),
                rhs: large.bracket() / 3.0 * fac,
                lambda,
                vacuous: vac,
            });
        }
    }

    GeometricBoundReport { records }
}
