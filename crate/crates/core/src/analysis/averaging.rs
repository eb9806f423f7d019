//! Angular averages of `<k*>^{-l}` and `<k*>^{-l} <k1*>^{-l}`.

use alloc::vec::Vec;

use super::{envelope_slope, InequalityReport, PairSampler, SampleConfig};
use crate::error::{Error, Result};
use crate::math::{ln, powf, sqrt, Vec3, PI};
use crate::quadrature::{integrate_sphere, SphereRule};

/// Number of log-energy bins used for the envelope slope.
pub const SLOPE_BINS: usize = 12;

/// Sphere rule used by [`check_averaging`]: graded in the polar angle and
/// aligned with `K` per sample, so the zonal integrand is resolved even
/// when `<k*>^{-l}` concentrates near `sigma = K_hat`.
pub fn averaging_rule() -> SphereRule {
    SphereRule::graded(10, 30, 2).expect("static rule")
}

/// `int_{S^2} <k*>^{-l} dsigma`, or the coupled product when `coupled`.
pub fn averaging_lhs(k: Vec3, k1: Vec3, l: f64, coupled: bool, rule: &SphereRule) -> f64 {
    let center = (k + k1) * 0.5;
    let half = 0.5 * (k - k1).norm();
    let aligned = rule.aligned_with(center);
    integrate_sphere(&aligned, |s| {
        let ks = center - s * half;
        let a = powf(1.0 + ks.norm_sq(), -0.5 * l);
        if coupled {
            let k1s = center + s * half;
            a * powf(1.0 + k1s.norm_sq(), -0.5 * l)
        } else {
            a
        }
    })
}

/// Closed form of the uncoupled average. With `A = 1 + E/2` and
/// `B = |K||w|`, `<k*>^2 = A - B (K_hat . sigma)`.
pub fn averaging_closed_form(k: Vec3, k1: Vec3, l: f64) -> f64 {
    let center = (k + k1) * 0.5;
    let w = k - k1;
    let (kn, wn) = (center.norm(), w.norm());
    let a = 1.0 + 0.5 * (k.norm_sq() + k1.norm_sq());
    let b = kn * wn;
    if b == 0.0 {
        return 4.0 * PI * powf(a, -0.5 * l);
    }
    let lo = 1.0 + (kn - 0.5 * wn) * (kn - 0.5 * wn);
    let hi = 1.0 + (kn + 0.5 * wn) * (kn + 0.5 * wn);
    let m = 0.5 * l - 1.0;
    if m == 0.0 {
        return 2.0 * PI * ln(hi / lo) / b;
    }
    2.0 * PI * (powf(lo, -m) - powf(hi, -m)) / (b * m)
}

/// Constant in `LHS <= C / ((l - 2)(1 + E))` (uncoupled) or
/// `LHS <= C / ((l - 2)(1 + E)^{1 + l/2})` (coupled).
///
/// The uncoupled supremum is attained for `k` orthogonal to `k1`, where the
/// ratio equals `8 pi (1 + 1/E)(1 - (1 + E)^{1 - l/2})`; its supremum over
/// `E` is `8 pi max(1, l/2 - 1)`. The coupled constant follows by splitting
/// the sphere along `|k*|^2 > E/2`.
pub fn averaging_constant(l: f64, coupled: bool) -> f64 {
    let ind = 8.0 * PI * (0.5 * l - 1.0).max(1.0);
    if coupled {
        powf(2.0, 1.0 + 0.5 * l) * ind
    } else {
        ind
    }
}

/// Samples pairs, compares the quadrature average with the declared bound
/// and records the log-log slope of the worst ratio against `1 + E`.
pub fn check_averaging(
    l: f64,
    coupled: bool,
    sampler: &PairSampler,
    rule: &SphereRule,
) -> Result<InequalityReport> {
    if !(l > 2.0 && l.is_finite()) {
        return Err(Error::domain("averaging estimate needs l > 2"));
    }
    if sampler.n_samples == 0 {
        return Err(Error::config("averaging check needs samples"));
    }
    let mut samples = Vec::with_capacity(sampler.n_samples);
    let mut by_energy = Vec::with_capacity(sampler.n_samples);
    for (k, k1) in sampler.pairs() {
        let e = k.norm_sq() + k1.norm_sq();
        let lhs = averaging_lhs(k, k1, l, coupled, rule);
        let weight = if coupled {
            (l - 2.0) * powf(1.0 + e, 1.0 + 0.5 * l)
        } else {
            (l - 2.0) * (1.0 + e)
        };
        let ratio = lhs * weight;
        samples.push((ratio, SampleConfig::pair(k, k1)));
        by_energy.push((e, ratio));
    }
    let id = if coupled { "averaging_coupled" } else { "averaging" };
    let mut report = InequalityReport::build(id, samples, Some(averaging_constant(l, coupled)), 1e-8)
        .param("l", l)
        .param("coupled", if coupled { 1.0 } else { 0.0 })
        .param("e_max", sampler.e_max);
    report.slope = envelope_slope(&by_energy, SLOPE_BINS);
    Ok(report)
}

/// Ratio of the orthogonal configuration at energy `E`, the exact envelope
/// of the uncoupled check.
pub fn averaging_envelope(e: f64, l: f64) -> f64 {
    let m = 0.5 * l - 1.0;
    if e == 0.0 {
        return 8.0 * PI * m;
    }
    let half = sqrt(0.5 * e);
    let k = Vec3::new(half, 0.0, 0.0);
    let k1 = Vec3::new(0.0, half, 0.0);
    averaging_closed_form(k, k1, l) * (l - 2.0) * (1.0 + e)
}
