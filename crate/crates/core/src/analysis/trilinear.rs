//! Empirical constants of the trilinear gain and loss operators in the
//! weighted `L^r` norm, and the difference bound built from them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::collision::{eval_bundle, Mask, OperatorKind, Operands};
use crate::error::{Error, Result};
use crate::fields::{weighted_lp_values, GridSpec, SpectralField, WeightRegime};
use crate::math::{exp, powf, Vec3};
use crate::quadrature::{uniform_direction, NodeSet};

/// Descriptor of [`random_family`].
pub const FAMILY_DESCRIPTOR: &str = "gaussian bumps: 1-3 per field, amplitude 0.5-1.5, |center| <= 2, width 0.6-1.5";

/// `n` random positive fields, each a sum of one to three Gaussian bumps.
pub fn random_family(seed: u64, n: usize) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let m = rng.random_range(1..=3);
            let bumps: Vec<(f64, Vec3, f64)> = (0..m)
                .map(|_| {
                    let a = rng.random_range(0.5..1.5);
                    let r = 2.0 * powf(rng.random::<f64>(), 1.0 / 3.0);
                    let c = uniform_direction(&mut rng) * r;
                    let s: f64 = rng.random_range(0.6..1.5);
                    (a, c, 1.0 / (2.0 * s * s))
                })
                .collect();
            SpectralField::analytic(format!("bumps-{seed}-{i}"), move |k| {
                bumps.iter().map(|&(a, c, q)| a * exp(-q * (k - c).norm_sq())).sum()
            })
        })
        .collect()
}

/// The four trilinear operators of one field on the probe grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicImage {
    pub field: Vec<f64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub l0: Vec<f64>,
    pub l1: Vec<f64>,
}

impl CubicImage {
    pub fn of(f: &SpectralField, spec: &GridSpec, nodes: &NodeSet) -> Self {
        let ops = Operands::cubic(f, nodes);
        let mut img = CubicImage {
            field: f.sample_on(spec),
            g0: Vec::with_capacity(spec.len()),
            g1: Vec::with_capacity(spec.len()),
            l0: Vec::with_capacity(spec.len()),
            l1: Vec::with_capacity(spec.len()),
        };
        for k in spec.nodes() {
            let b = eval_bundle(&ops, k, nodes, Mask::All);
            img.g0.push(b.estimate(OperatorKind::G0).value);
            img.g1.push(b.estimate(OperatorKind::G1).value);
            img.l0.push(b.estimate(OperatorKind::L0).value);
            img.l1.push(b.estimate(OperatorKind::L1).value);
        }
        img
    }

    pub fn channel(&self, kind: OperatorKind) -> Result<&[f64]> {
        match kind {
            OperatorKind::G0 => Ok(&self.g0),
            OperatorKind::G1 => Ok(&self.g1),
            OperatorKind::L0 => Ok(&self.l0),
            OperatorKind::L1 => Ok(&self.l1),
            _ => Err(Error::config("trilinear constants exist only for G0, G1, L0, L1")),
        }
    }
}

/// Operator images of a whole family on one grid, reusable across regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyImages {
    pub spec: GridSpec,
    pub images: Vec<CubicImage>,
}

impl FamilyImages {
    pub fn new(family: &[SpectralField], spec: &GridSpec, nodes: &NodeSet) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(FamilyImages {
            spec: *spec,
            images: family.iter().map(|f| CubicImage::of(f, spec, nodes)).collect(),
        })
    }

    /// Restriction to the first `n` fields.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyFamily);
        }
        Ok(FamilyImages {
            spec: self.spec,
            images: self.images.iter().take(n).cloned().collect(),
        })
    }

    pub fn constant(&self, kind: OperatorKind, regime: &WeightRegime) -> Result<TrilinearConstant> {
        check_regime(kind, regime)?;
        let mut ratios = Vec::with_capacity(self.images.len());
        for img in &self.images {
            let den = weighted_lp_values(&img.field, &self.spec, regime.l(), regime.r());
            if !(den > 0.0) {
                return Err(Error::domain("family member has zero weighted norm"));
            }
            let num = weighted_lp_values(img.channel(kind)?, &self.spec, regime.l(), regime.r());
            ratios.push(num / (den * den * den));
        }
        let c_hat = ratios.iter().cloned().fold(0.0_f64, f64::max);
        Ok(TrilinearConstant {
            kind,
            regime: *regime,
            c_hat,
            field_family: FAMILY_DESCRIPTOR.into(),
            n_fields: ratios.len(),
            ratios,
        })
    }
}

fn check_regime(kind: OperatorKind, regime: &WeightRegime) -> Result<()> {
    if regime.delta() >= 1.0 {
        return Err(Error::domain("trilinear estimates need delta < 1"));
    }
    if kind == OperatorKind::G1 && regime.r().is_finite() && regime.delta() >= 1.0 / regime.r() {
        return Err(Error::domain("the G1 estimate needs delta < 1/r"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrilinearConstant {
    pub kind: OperatorKind,
    pub regime: WeightRegime,
    /// `max ||<k>^l T[f,f,f]||_r / ||<k>^l f||_r^3` over the family.
    pub c_hat: f64,
    pub field_family: String,
    pub n_fields: usize,
    pub ratios: Vec<f64>,
}

/// [`TrilinearConstant`] of one operator for `family` on the grid `spec`.
pub fn estimate_trilinear_constant(
    kind: OperatorKind,
    regime: &WeightRegime,
    family: &[SpectralField],
    spec: &GridSpec,
    nodes: &NodeSet,
) -> Result<TrilinearConstant> {
    check_regime(kind, regime)?;
    FamilyImages::new(family, spec, nodes)?.constant(kind, regime)
}

/// All four operators for every regime, computing the images once.
pub fn estimate_trilinear_constants(
    regimes: &[WeightRegime],
    family: &[SpectralField],
    spec: &GridSpec,
    nodes: &NodeSet,
) -> Result<Vec<TrilinearConstant>> {
    let images = FamilyImages::new(family, spec, nodes)?;
    let mut out = Vec::new();
    for regime in regimes {
        for kind in OperatorKind::TRILINEAR {
            out.push(images.constant(kind, regime)?);
        }
    }
    Ok(out)
}

/// Constant `C` of the cubic collision bound `||C[f]|| <= C ||f||^3`,
/// taken as twice the sum of the four trilinear constants of `regime`.
pub fn combined_constant(constants: &[TrilinearConstant], regime: &WeightRegime) -> Result<f64> {
    let mut sum = 0.0;
    for kind in OperatorKind::TRILINEAR {
        let c = constants
            .iter()
            .find(|c| c.kind == kind && c.regime == *regime)
            .ok_or_else(|| Error::config(format!("missing trilinear constant for {kind}")))?;
        sum += c.c_hat;
    }
    Ok(2.0 * sum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxBoundReport {
    pub kind: OperatorKind,
    pub regime: WeightRegime,
    pub constant: f64,
    pub n_pairs: usize,
    /// `max ||T(phi) - T(psi)|| / ((|phi|^2 + |phi||psi| + |psi|^2) |phi - psi|)`
    pub worst_ratio: f64,
    pub violations: usize,
}

impl AuxBoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.worst_ratio.is_finite()
    }
}

/// Checks `||T(phi) - T(psi)|| <= C (|phi|^2 + |phi||psi| + |psi|^2) |phi - psi|`
/// with `C` the matching diagonal constant, for pairs drawn from `left` and
/// `right` in order.
pub fn check_aux_bound(
    constants: &[TrilinearConstant],
    left: &FamilyImages,
    right: &FamilyImages,
) -> Result<Vec<AuxBoundReport>> {
    if left.images.is_empty() || left.images.len() != right.images.len() || left.spec != right.spec {
        return Err(Error::config("aux bound needs equally sized families on one grid"));
    }
    let spec = &left.spec;
    let mut out = Vec::with_capacity(constants.len());
    for tc in constants {
        let (l, r) = (tc.regime.l(), tc.regime.r());
        let mut worst = 0.0_f64;
        let mut violations = 0;
        for (a, b) in left.images.iter().zip(&right.images) {
            let na = weighted_lp_values(&a.field, spec, l, r);
            let nb = weighted_lp_values(&b.field, spec, l, r);
            let df: Vec<f64> = a.field.iter().zip(&b.field).map(|(x, y)| x - y).collect();
            let nd = weighted_lp_values(&df, spec, l, r);
            let dt: Vec<f64> = a
                .channel(tc.kind)?
                .iter()
                .zip(b.channel(tc.kind)?)
                .map(|(x, y)| x - y)
                .collect();
            let lhs = weighted_lp_values(&dt, spec, l, r);
            let factor = (na * na + na * nb + nb * nb) * nd;
            let ratio = if factor > 0.0 { lhs / factor } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
            worst = worst.max(ratio);
            if !(ratio <= tc.c_hat) {
                violations += 1;
            }
        }
        out.push(AuxBoundReport {
            kind: tc.kind,
            regime: tc.regime,
            constant: tc.c_hat,
            n_pairs: left.images.len(),
            worst_ratio: worst,
            violations,
        });
    }
    Ok(out)
}
