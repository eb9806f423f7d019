//! Weighted integrals of `|h|^p` evaluated at pre- or post-collisional
//! momenta, compared against `||h||_p^p`.
//!
//! After the Bobylev substitution each left-hand side is `c ||h||_p^p` on all
//! of `R^3` with an explicit `c`; truncating the `k1` integral to a ball only
//! lowers it, so `c` is the declared constant.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{InequalityReport, SampleConfig};
use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::math::{cos, frame_around, powf, rotate_into, sin, sqrt, CompensatedSum, Vec3, PI};
use crate::quadrature::{graded_legendre, RadialRule, SphereRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecollisionalVariant {
    /// `int |h(k*)|^p chi(w_hat . sigma) |R^-_hat . sigma|^{-2 alpha}`, `alpha < 1`.
    KStar,
    /// `int |h(k1*)|^p |R^-_hat . sigma|^{2 alpha}`, `alpha > 1/2`.
    K1Star,
    /// `int |h(k1)|^p (1 - |K_hat . sigma|)^{-alpha}`, `alpha < 1`.
    V1,
}

impl PrecollisionalVariant {
    pub const ALL: [PrecollisionalVariant; 3] = [Self::KStar, Self::K1Star, Self::V1];

    pub fn name(self) -> &'static str {
        match self {
            Self::KStar => "kstar",
            Self::K1Star => "k1star",
            Self::V1 => "v1",
        }
    }

    fn check_alpha(self, alpha: f64) -> Result<()> {
        let ok = match self {
            Self::KStar | Self::V1 => (0.0..1.0).contains(&alpha),
            Self::K1Star => alpha > 0.5 && alpha.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("alpha outside the admissible range for this variant"))
        }
    }
}

impl fmt::Display for PrecollisionalVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecollisionalVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("unknown pre-collisional variant"))
    }
}

/// Exponents used inside the trilinear estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaPreset {
    /// `alpha = 1/2 + delta/4`
    HalfPlusQuarterDelta,
    /// `alpha = 1 - delta/4`
    OneMinusQuarterDelta,
}

impl AlphaPreset {
    pub fn alpha(self, delta: f64) -> f64 {
        match self {
            Self::HalfPlusQuarterDelta => 0.5 + 0.25 * delta,
            Self::OneMinusQuarterDelta => 1.0 - 0.25 * delta,
        }
    }
}

/// Zonal nodes for `int_{0}^{span} u^beta G(u) du` (`u = 1 - cos(theta)`):
/// `u = span t^{1/(1+beta)}` removes the endpoint singularity and `t` is
/// integrated by a graded rule. Returns `(u_i, weight_i)`.
fn cap_zonal(beta: f64, span: f64, order: usize, levels: usize) -> Vec<(f64, f64)> {
    let (x, w) = graded_legendre(order, levels);
    let m = 1.0 / (1.0 + beta);
    let scale = powf(span, 1.0 + beta) * m;
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| {
            let t = 0.5 * (xi + 1.0);
            (span * powf(t, m), 0.5 * wi * scale)
        })
        .collect()
}

/// Sphere nodes around the pole `(0, 0, 1)` with the singular weight folded in.
#[derive(Debug, Clone)]
struct CapRule {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
}

impl CapRule {
    fn new(beta: f64, span: f64, rule: &PrecollisionalRule, mirrored: bool) -> Self {
        let zonal = cap_zonal(beta, span, rule.cap_order, rule.cap_levels);
        let dphi = 2.0 * PI / rule.n_phi as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for &(u, wu) in &zonal {
            let z = 1.0 - u;
            let rho = sqrt((u * (2.0 - u)).max(0.0));
            for j in 0..rule.n_phi {
                let phi = dphi * (j as f64 + 0.5);
                let n = Vec3::new(rho * cos(phi), rho * sin(phi), z);
                nodes.push(n);
                weights.push(wu * dphi);
                if mirrored {
                    nodes.push(-n);
                    weights.push(wu * dphi);
                }
            }
        }
        CapRule { nodes, weights }
    }

    fn integrate(&self, axis: Vec3, mut g: impl FnMut(Vec3) -> f64) -> f64 {
        let f = frame_around(axis);
        let mut s = CompensatedSum::default();
        for (n, w) in self.nodes.iter().zip(&self.weights) {
            s.add(w * g(rotate_into(&f, *n)));
        }
        s.value()
    }
}

/// Discretization of the pre-collisional integrals. The `k1` integral is
/// truncated to `|w| <= radius` (or `|k1| <= radius` for [`PrecollisionalVariant::V1`]),
/// and the same ball is used for `||h||_p^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecollisionalRule {
    pub radius: f64,
    pub radial_order: usize,
    pub radial_panels: usize,
    pub directions: (usize, usize),
    pub cap_order: usize,
    pub cap_levels: usize,
    pub n_phi: usize,
}

impl Default for PrecollisionalRule {
    fn default() -> Self {
        PrecollisionalRule {
            radius: 8.0,
            radial_order: 8,
            radial_panels: 4,
            directions: (8, 16),
            cap_order: 6,
            cap_levels: 12,
            n_phi: 16,
        }
    }
}

impl PrecollisionalRule {
    fn radial(&self) -> Result<RadialRule> {
        if self.radial_panels == 0 || !(self.radius > 0.0) {
            return Err(Error::config("pre-collisional rule needs a positive radius and panels"));
        }
        let breaks: Vec<f64> = (0..=self.radial_panels)
            .map(|i| self.radius * i as f64 / self.radial_panels as f64)
            .collect();
        RadialRule::composite(self.radial_order, &breaks)
    }

    fn validate(&self) -> Result<()> {
        if self.cap_order == 0 || self.n_phi == 0 {
            return Err(Error::config("pre-collisional rule needs cap order and n_phi >= 1"));
        }
        Ok(())
    }
}

/// Exact constant `c` with `LHS = c ||h||_p^p` on `R^3`.
pub fn precollisional_constant(variant: PrecollisionalVariant, alpha: f64) -> Result<f64> {
    variant.check_alpha(alpha)?;
    Ok(match variant {
        PrecollisionalVariant::KStar => {
            // 2 pi int_{1/sqrt2}^1 4 x^{-2} (1 - x^2)^{-alpha} dx with u = 1 - x.
            let span = 1.0 - core::f64::consts::FRAC_1_SQRT_2;
            let mut s = CompensatedSum::default();
            for (u, w) in cap_zonal(-alpha, span, 16, 40) {
                let x = 1.0 - u;
                s.add(w * 4.0 / (x * x) * powf(1.0 + x, -alpha));
            }
            2.0 * PI * s.value()
        }
        PrecollisionalVariant::K1Star => 8.0 * PI / (2.0 * alpha - 1.0),
        PrecollisionalVariant::V1 => 4.0 * PI / (1.0 - alpha),
    })
}

fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        powf(x.abs(), p)
    }
}

fn ball_nodes(rule: &PrecollisionalRule) -> Result<Vec<(Vec3, f64)>> {
    let radial = rule.radial()?;
    let dirs = SphereRule::product(rule.directions.0, rule.directions.1)?;
    let mut out = Vec::with_capacity(radial.nodes().len() * dirs.len());
    for (r, wr) in radial.nodes().iter().zip(radial.weights()) {
        for (d, wd) in dirs.nodes().iter().zip(dirs.weights()) {
            out.push((*d * *r, wr * wd));
        }
    }
    Ok(out)
}

/// `||h||_p^p` over the ball of the rule.
pub fn lp_power(h: &SpectralField, p: f64, rule: &PrecollisionalRule) -> Result<f64> {
    let mut s = CompensatedSum::default();
    for (x, w) in ball_nodes(rule)? {
        s.add(w * abs_pow(h.eval(x), p));
    }
    Ok(s.value())
}

struct Prepared {
    ball: Vec<(Vec3, f64)>,
    cap: CapRule,
}

fn prepare(variant: PrecollisionalVariant, alpha: f64, rule: &PrecollisionalRule) -> Result<Prepared> {
    variant.check_alpha(alpha)?;
    rule.validate()?;
    let cap = match variant {
        PrecollisionalVariant::KStar => CapRule::new(-alpha, 1.0, rule, false),
        PrecollisionalVariant::K1Star => CapRule::new(alpha, 2.0, rule, false),
        PrecollisionalVariant::V1 => CapRule::new(-alpha, 1.0, rule, true),
    };
    Ok(Prepared {
        ball: ball_nodes(rule)?,
        cap,
    })
}

fn lhs_prepared(variant: PrecollisionalVariant, alpha: f64, h: &SpectralField, p: f64, k: Vec3, prep: &Prepared) -> f64 {
    let mut total = CompensatedSum::default();
    match variant {
        PrecollisionalVariant::KStar | PrecollisionalVariant::K1Star => {
            let (sign, factor) = match variant {
                PrecollisionalVariant::KStar => (-1.0, powf(2.0, alpha)),
                _ => (1.0, powf(2.0, -alpha)),
            };
            for &(w, wt) in &prep.ball {
                let half = 0.5 * w.norm();
                let base = k - w * 0.5;
                let inner = prep.cap.integrate(w, |s| abs_pow(h.eval(base + s * (sign * half)), p));
                total.add(wt * factor * inner);
            }
        }
        PrecollisionalVariant::V1 => {
            for &(k1, wt) in &prep.ball {
                let hv = abs_pow(h.eval(k1), p);
                if hv == 0.0 {
                    continue;
                }
                let center = (k + k1) * 0.5;
                let ang = if center == Vec3::ZERO {
                    4.0 * PI
                } else {
                    prep.cap.integrate(center, |_| 1.0)
                };
                total.add(wt * hv * ang);
            }
        }
    }
    total.value()
}

/// Left-hand side of the chosen variant at `k`.
pub fn precollisional_lhs(
    variant: PrecollisionalVariant,
    alpha: f64,
    h: &SpectralField,
    p: f64,
    k: Vec3,
    rule: &PrecollisionalRule,
) -> Result<f64> {
    let prep = prepare(variant, alpha, rule)?;
    Ok(lhs_prepared(variant, alpha, h, p, k, &prep))
}

/// Evaluates the left-hand side at each probe and reports
/// `LHS / ||h||_p^p` against the exact constant.
pub fn check_precollisional(
    variant: PrecollisionalVariant,
    alpha: f64,
    p: f64,
    h: &SpectralField,
    k_samples: &[Vec3],
    rule: &PrecollisionalRule,
) -> Result<InequalityReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::domain("pre-collisional estimate needs p >= 1"));
    }
    let exact = precollisional_constant(variant, alpha)?;
    let prep = prepare(variant, alpha, rule)?;
    let norm = lp_power(h, p, rule)?;
    let samples: Vec<(f64, SampleConfig)> = k_samples
        .iter()
        .map(|&k| {
            let lhs = lhs_prepared(variant, alpha, h, p, k, &prep);
            let ratio = if norm > 0.0 { lhs / norm } else { 0.0 };
            (ratio, SampleConfig::probe(k))
        })
        .collect();
    let id = alloc::format!("precollisional_{}", variant.name());
    Ok(InequalityReport::build(&id, samples, Some(exact), 1e-3)
        .param("alpha", alpha)
        .param("p", p)
        .param("radius", rule.radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<Vec3> {
        alloc::vec![
            Vec3::ZERO,
            Vec3::new(0.7, -0.2, 0.4),
            Vec3::new(-1.5, 0.3, 0.9),
        ]
    }

    #[test]
    fn cap_zonal_integrates_power() {
        for beta in [-0.999, -0.75, -0.5, 0.0, 0.6] {
            let s: f64 = cap_zonal(beta, 2.0, 6, 12).iter().map(|(u, w)| w * (1.0 + u)).sum();
            let expect = powf(2.0, 1.0 + beta) / (1.0 + beta) + powf(2.0, 2.0 + beta) / (2.0 + beta);
            assert!((s - expect).abs() < 1e-9 * expect, "beta={beta} {s} {expect}");
        }
    }

    #[test]
    fn constants_are_increasing_towards_singularity() {
        let a = precollisional_constant(PrecollisionalVariant::KStar, 0.5).unwrap();
        let b = precollisional_constant(PrecollisionalVariant::KStar, 0.999).unwrap();
        assert!(b > 10.0 * a);
        // alpha = 0: 8 pi (sqrt2 - 1).
        let z = precollisional_constant(PrecollisionalVariant::KStar, 0.0).unwrap();
        assert!((z - 8.0 * PI * (core::f64::consts::SQRT_2 - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn alpha_ranges_are_enforced() {
        assert!(precollisional_constant(PrecollisionalVariant::KStar, 1.0).is_err());
        assert!(precollisional_constant(PrecollisionalVariant::K1Star, 0.5).is_err());
        assert!(precollisional_constant(PrecollisionalVariant::V1, -0.1).is_err());
    }

    #[test]
    fn zero_field_passes_trivially() {
        let r = check_precollisional(
            PrecollisionalVariant::KStar,
            0.75,
            2.0,
            &SpectralField::zero(),
            &probes(),
            &PrecollisionalRule::default(),
        )
        .unwrap();
        assert_eq!(r.worst_ratio, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn gaussian_ratios_approach_exact_constant() {
        let h = SpectralField::gaussian(1.0, 0.8).unwrap();
        let rule = PrecollisionalRule::default();
        for (variant, alpha, floor) in [
            (PrecollisionalVariant::KStar, 0.75, 0.98),
            (PrecollisionalVariant::V1, 0.75, 0.98),
            (PrecollisionalVariant::K1Star, 2.0, 0.9),
        ] {
            let r = check_precollisional(variant, alpha, 2.0, &h, &probes(), &rule).unwrap();
            assert!(r.passed(), "{variant}: {} vs {}", r.worst_ratio, r.declared_constant);
            let min = r.ratios().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > floor * r.declared_constant, "{variant}: {min} vs {}", r.declared_constant);
        }
    }

    #[test]
    fn k1star_truncation_deficit_shrinks_with_radius() {
        // The k1* integrand decays only like |w|^{-2 alpha}.
        let h = SpectralField::gaussian(1.0, 0.8).unwrap();
        let small = PrecollisionalRule {
            radius: 4.0,
            ..PrecollisionalRule::default()
        };
        let large = PrecollisionalRule {
            radius: 16.0,
            radial_panels: 8,
            ..PrecollisionalRule::default()
        };
        let k = Vec3::new(0.3, 0.1, -0.2);
        let v = PrecollisionalVariant::K1Star;
        let a = precollisional_lhs(v, 0.75, &h, 2.0, k, &small).unwrap() / lp_power(&h, 2.0, &small).unwrap();
        let b = precollisional_lhs(v, 0.75, &h, 2.0, k, &large).unwrap() / lp_power(&h, 2.0, &large).unwrap();
        let c = precollisional_constant(v, 0.75).unwrap();
        assert!(a < b && b < c, "{a} {b} {c}");
    }
}
