//! Gain, loss and collision-frequency operators on the resonant manifold.
//!
//! Every operator is a `(k1, sigma)` integral of `|w|` times products of
//! field values at `k`, `k1`, `k*`, `k1*`, restricted to the half sphere
//! `w_hat . sigma > 0` with prefactor `1/4`. All channels for one probe are
//! accumulated in a single pass over a shared [`NodeSet`], so identities such
//! as `Q+ - Q- = C` and the Rayleigh-Jeans cancellation hold node by node.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridSpec, SpectralField};
use crate::math::Vec3;
use crate::quadrature::{Estimate, NodeKernel, NodeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    G0,
    G1,
    L0,
    L1,
    R0,
    R1,
    Qplus,
    Qminus,
    Rfreq,
    C,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 10] = [
        OperatorKind::G0,
        OperatorKind::G1,
        OperatorKind::L0,
        OperatorKind::L1,
        OperatorKind::R0,
        OperatorKind::R1,
        OperatorKind::Qplus,
        OperatorKind::Qminus,
        OperatorKind::Rfreq,
        OperatorKind::C,
    ];

    /// The trilinear operators of the gain-loss split.
    pub const TRILINEAR: [OperatorKind; 4] = [OperatorKind::G0, OperatorKind::G1, OperatorKind::L0, OperatorKind::L1];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::G0 => "G0",
            OperatorKind::G1 => "G1",
            OperatorKind::L0 => "L0",
            OperatorKind::L1 => "L1",
            OperatorKind::R0 => "R0",
            OperatorKind::R1 => "R1",
            OperatorKind::Qplus => "Qplus",
            OperatorKind::Qminus => "Qminus",
            OperatorKind::Rfreq => "Rfreq",
            OperatorKind::C => "C",
        }
    }

    /// Number of field arguments: `(f, g, h)`, `(g, h)` or the cubic `f`.
    pub fn arity(self) -> usize {
        match self {
            OperatorKind::G0 | OperatorKind::G1 | OperatorKind::L0 | OperatorKind::L1 => 3,
            OperatorKind::R0 | OperatorKind::R1 | OperatorKind::Rfreq => 2,
            OperatorKind::Qplus | OperatorKind::Qminus | OperatorKind::C => 1,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(alloc::format!("unknown operator `{s}`")))
    }
}

/// Indicator inserted into an operator integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mask {
    All,
    /// `|k*|^2 > E/2`.
    KStarAboveHalfEnergy,
    /// Complement of [`Mask::KStarAboveHalfEnergy`], i.e. `|k1*|^2 >= E/2`.
    K1StarAboveHalfEnergy,
    /// `|k1| < |k|`.
    K1BelowK,
    K1AtLeastK,
    /// `|k1| < |w|/2`.
    K1BelowHalfW,
    K1AtLeastHalfW,
}

impl Mask {
    pub fn complement(self) -> Option<Mask> {
        Some(match self {
            Mask::All => return None,
            Mask::KStarAboveHalfEnergy => Mask::K1StarAboveHalfEnergy,
            Mask::K1StarAboveHalfEnergy => Mask::KStarAboveHalfEnergy,
            Mask::K1BelowK => Mask::K1AtLeastK,
            Mask::K1AtLeastK => Mask::K1BelowK,
            Mask::K1BelowHalfW => Mask::K1AtLeastHalfW,
            Mask::K1AtLeastHalfW => Mask::K1BelowHalfW,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Mask::All => "all",
            Mask::KStarAboveHalfEnergy => "kstar_above_half_energy",
            Mask::K1StarAboveHalfEnergy => "k1star_above_half_energy",
            Mask::K1BelowK => "k1_below_k",
            Mask::K1AtLeastK => "k1_at_least_k",
            Mask::K1BelowHalfW => "k1_below_half_w",
            Mask::K1AtLeastHalfW => "k1_at_least_half_w",
        }
    }

    /// Part of the indicator that depends on `(k, k1)` only.
    fn outer(self, k: Vec3, k1: Vec3, wnorm: f64) -> bool {
        match self {
            Mask::K1BelowK => k1.norm() < k.norm(),
            Mask::K1AtLeastK => k1.norm() >= k.norm(),
            Mask::K1BelowHalfW => k1.norm() < 0.5 * wnorm,
            Mask::K1AtLeastHalfW => k1.norm() >= 0.5 * wnorm,
            _ => true,
        }
    }

    fn inner(self, kstar: Vec3, energy: f64) -> bool {
        match self {
            Mask::KStarAboveHalfEnergy => kstar.norm_sq() > 0.5 * energy,
            Mask::K1StarAboveHalfEnergy => !(kstar.norm_sq() > 0.5 * energy),
            _ => true,
        }
    }
}

impl FromStr for Mask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Mask::All,
            Mask::KStarAboveHalfEnergy,
            Mask::K1StarAboveHalfEnergy,
            Mask::K1BelowK,
            Mask::K1AtLeastK,
            Mask::K1BelowHalfW,
            Mask::K1AtLeastHalfW,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::UnknownMask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorEvaluation {
    pub value: f64,
    pub stderr: f64,
    pub n_nodes: usize,
    /// Truncation radius of the `k1` integration.
    pub rho_max: f64,
}

/// All operator channels at one probe for the arguments `(f, g, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorBundle {
    pub k: Vec3,
    /// `f(k)`, the prefactor of `G0`, `L0`, `L1`.
    pub fk: f64,
    pub g0: Estimate,
    pub g1: Estimate,
    pub r0: Estimate,
    pub r1: Estimate,
    pub qplus: Estimate,
    pub rfreq: Estimate,
    /// `Q+ - f(k) Rfreq`, accumulated node by node.
    pub c: Estimate,
    pub n_nodes: usize,
    pub rho_max: f64,
}

fn scale(e: Estimate, a: f64) -> Estimate {
    Estimate {
        value: a * e.value,
        stderr: a.abs() * e.stderr,
    }
}

impl OperatorBundle {
    pub fn estimate(&self, kind: OperatorKind) -> Estimate {
        match kind {
            OperatorKind::G0 => self.g0,
            OperatorKind::G1 => self.g1,
            OperatorKind::L0 => scale(self.r0, self.fk),
            OperatorKind::L1 => scale(self.r1, self.fk),
            OperatorKind::R0 => self.r0,
            OperatorKind::R1 => self.r1,
            OperatorKind::Qplus => self.qplus,
            OperatorKind::Qminus => scale(self.rfreq, self.fk),
            OperatorKind::Rfreq => self.rfreq,
            OperatorKind::C => self.c,
        }
    }

    pub fn evaluation(&self, kind: OperatorKind) -> OperatorEvaluation {
        let e = self.estimate(kind);
        OperatorEvaluation {
            value: e.value,
            stderr: e.stderr,
            n_nodes: self.n_nodes,
            rho_max: self.rho_max,
        }
    }

    /// `|Q+| + |Q-|`, the size against which cancellation in `C` is judged.
    pub fn local_scale(&self) -> f64 {
        self.qplus.value.abs() + self.estimate(OperatorKind::Qminus).value.abs()
    }
}

/// Operator arguments with their `k1`-node values cached, so that repeated
/// probes on one [`NodeSet`] only interpolate at `k*` and `k1*`.
pub struct Operands {
    f: SpectralField,
    g: SpectralField,
    h: SpectralField,
    g_is_h: bool,
    f_k1: Vec<f64>,
    g_k1: Vec<f64>,
}

impl Operands {
    pub fn new(f: &SpectralField, g: &SpectralField, h: &SpectralField, nodes: &NodeSet) -> Self {
        let f_k1: Vec<f64> = nodes.k1_nodes().iter().map(|&p| f.eval(p)).collect();
        let g_k1 = if f.ptr_eq(g) {
            f_k1.clone()
        } else {
            nodes.k1_nodes().iter().map(|&p| g.eval(p)).collect()
        };
        Operands {
            f: f.clone(),
            g: g.clone(),
            h: h.clone(),
            g_is_h: g.ptr_eq(h),
            f_k1,
            g_k1,
        }
    }

    /// Cubic restriction `f = g = h`.
    pub fn cubic(f: &SpectralField, nodes: &NodeSet) -> Self {
        Self::new(f, f, f, nodes)
    }
}

struct BundleKernel<'a> {
    ops: &'a Operands,
    k: Vec3,
    fk: f64,
    mask: Mask,
}

struct Outer {
    center: Vec3,
    w_hat: Vec3,
    half_w: f64,
    energy: f64,
    f1: f64,
    g1: f64,
}

const G0: usize = 0;
const G1: usize = 1;
const R0: usize = 2;
const R1: usize = 3;
const QP: usize = 4;
const RF: usize = 5;
const CC: usize = 6;

impl NodeKernel<7> for BundleKernel<'_> {
    type Outer = Outer;

    fn outer(&mut self, index: usize, k1: Vec3) -> Option<Outer> {
        let w = self.k - k1;
        let wn = w.norm();
        if wn == 0.0 || !self.mask.outer(self.k, k1, wn) {
            return None;
        }
        Some(Outer {
            center: (self.k + k1) * 0.5,
            w_hat: w / wn,
            half_w: 0.5 * wn,
            energy: self.k.norm_sq() + k1.norm_sq(),
            f1: self.ops.f_k1[index],
            g1: self.ops.g_k1[index],
        })
    }

    fn inner(&mut self, o: &Outer, sigma: Vec3, acc: &mut [f64; 7]) {
        if !(o.w_hat.dot(sigma) > 0.0) {
            return;
        }
        let kstar = o.center - sigma * o.half_w;
        if !self.mask.inner(kstar, o.energy) {
            return;
        }
        let k1star = o.center + sigma * o.half_w;
        let g_star = self.ops.g.eval(kstar);
        let h_1star = self.ops.h.eval(k1star);
        let h_star = if self.ops.g_is_h { g_star } else { self.ops.h.eval(kstar) };
        let fk = self.fk;
        let pair = g_star * h_1star;
        let g0 = fk * pair;
        let g1 = o.f1 * pair;
        let r0 = o.g1 * h_star;
        let r1 = o.g1 * h_1star;
        let qp = g0 + g1;
        let rf = r0 + r1;
        // |w| / 4 = half_w / 2
        let q = 0.5 * o.half_w;
        acc[G0] = q * g0;
        acc[G1] = q * g1;
        acc[R0] = q * r0;
        acc[R1] = q * r1;
        acc[QP] = q * qp;
        acc[RF] = q * rf;
        acc[CC] = q * (qp - fk * rf);
    }

    fn hemisphere_axis(&self, o: &Outer) -> Option<Vec3> {
        Some(o.w_hat)
    }
}

/// Every channel at probe `k` with the indicator `mask` inserted.
pub fn eval_bundle(ops: &Operands, k: Vec3, nodes: &NodeSet, mask: Mask) -> OperatorBundle {
    let fk = ops.f.eval(k);
    let mut kernel = BundleKernel { ops, k, fk, mask };
    let e = nodes.integrate(&mut kernel);
    OperatorBundle {
        k,
        fk,
        g0: e[G0],
        g1: e[G1],
        r0: e[R0],
        r1: e[R1],
        qplus: e[QP],
        rfreq: e[RF],
        c: e[CC],
        n_nodes: nodes.len(),
        rho_max: nodes.rho_max(),
    }
}

fn operands_for(kind: OperatorKind, args: &[&SpectralField], nodes: &NodeSet) -> Result<Operands> {
    if args.len() != kind.arity() {
        return Err(Error::Arity {
            kind: kind.name(),
            expected: kind.arity(),
            got: args.len(),
        });
    }
    Ok(match args {
        [f, g, h] => Operands::new(f, g, h, nodes),
        // `f` only enters through `f(k)`, which the R channels never read.
        [g, h] => Operands::new(g, g, h, nodes),
        [f] => Operands::cubic(f, nodes),
        _ => unreachable!("arity checked above"),
    })
}

/// `kind` applied to `args`: `(f, g, h)` for `G0, G1, L0, L1`, `(g, h)` for
/// `R0, R1, Rfreq` and `f` alone for `Qplus, Qminus, C`.
pub fn eval_operator(kind: OperatorKind, args: &[&SpectralField], k: Vec3, nodes: &NodeSet) -> Result<OperatorEvaluation> {
    restricted_eval(kind, Mask::All, args, k, nodes)
}

pub fn restricted_eval(
    kind: OperatorKind,
    mask: Mask,
    args: &[&SpectralField],
    k: Vec3,
    nodes: &NodeSet,
) -> Result<OperatorEvaluation> {
    let ops = operands_for(kind, args, nodes)?;
    Ok(eval_bundle(&ops, k, nodes, mask).evaluation(kind))
}

struct ResonantKernel<F> {
    k: Vec3,
    f: F,
}

impl<F: FnMut(Vec3, Vec3, Vec3, Vec3) -> f64> NodeKernel<1> for ResonantKernel<F> {
    type Outer = (Vec3, Vec3, f64);

    fn outer(&mut self, _: usize, k1: Vec3) -> Option<Self::Outer> {
        let wn = (self.k - k1).norm();
        if wn == 0.0 {
            return None;
        }
        Some((k1, (self.k + k1) * 0.5, wn))
    }

    fn inner(&mut self, &(k1, center, wn): &Self::Outer, sigma: Vec3, acc: &mut [f64; 1]) {
        let kstar = center - sigma * (0.5 * wn);
        let k1star = center + sigma * (0.5 * wn);
        acc[0] = 0.125 * wn * (self.f)(self.k, k1, kstar, k1star);
    }
}

/// `(1/8) int |w| F(k, k1, k*, k1*) d sigma d k1` over the full sphere.
pub fn resonant_integral(
    f: impl FnMut(Vec3, Vec3, Vec3, Vec3) -> f64,
    k: Vec3,
    nodes: &NodeSet,
) -> OperatorEvaluation {
    let [e] = nodes.integrate(&mut ResonantKernel { k, f });
    OperatorEvaluation {
        value: e.value,
        stderr: e.stderr,
        n_nodes: nodes.len(),
        rho_max: nodes.rho_max(),
    }
}

/// Channels needed by the time integrators, computed without the rest of
/// the bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateChannel {
    /// `C[f]`.
    Collision,
    /// `Q+[f]`.
    Gain,
    /// `R[f] = Rfreq[f, f]`.
    Frequency,
}

struct RateKernel<'a> {
    ops: &'a Operands,
    k: Vec3,
    fk: f64,
    channel: RateChannel,
}

impl NodeKernel<1> for RateKernel<'_> {
    type Outer = Outer;

    fn outer(&mut self, index: usize, k1: Vec3) -> Option<Outer> {
        let w = self.k - k1;
        let wn = w.norm();
        if wn == 0.0 {
            return None;
        }
        Some(Outer {
            center: (self.k + k1) * 0.5,
            w_hat: w / wn,
            half_w: 0.5 * wn,
            energy: 0.0,
            f1: self.ops.f_k1[index],
            g1: 0.0,
        })
    }

    #[inline]
    fn inner(&mut self, o: &Outer, sigma: Vec3, acc: &mut [f64; 1]) {
        if !(o.w_hat.dot(sigma) > 0.0) {
            return;
        }
        let d = sigma * o.half_w;
        let fs = self.ops.f.eval(o.center - d);
        let f1s = self.ops.f.eval(o.center + d);
        let q = 0.5 * o.half_w;
        acc[0] = q * match self.channel {
            RateChannel::Collision => fs * f1s * (self.fk + o.f1) - self.fk * o.f1 * (fs + f1s),
            RateChannel::Gain => fs * f1s * (self.fk + o.f1),
            RateChannel::Frequency => o.f1 * (fs + f1s),
        };
    }

    fn hemisphere_axis(&self, o: &Outer) -> Option<Vec3> {
        Some(o.w_hat)
    }
}

/// One cubic channel of `f` at `k`. Node for node this is the matching
/// entry of [`eval_bundle`] up to rounding in the grouping of terms.
pub fn eval_rate(ops: &Operands, k: Vec3, nodes: &NodeSet, channel: RateChannel) -> Estimate {
    let fk = ops.f.eval(k);
    let [e] = nodes.integrate(&mut RateKernel { ops, k, fk, channel });
    e
}

/// [`eval_rate`] at every node of `spec`, in grid order.
pub fn rate_on_grid(f: &SpectralField, spec: &GridSpec, nodes: &NodeSet, channel: RateChannel) -> Vec<f64> {
    let ops = Operands::cubic(f, nodes);
    spec.nodes().map(|k| eval_rate(&ops, k, nodes, channel).value).collect()
}

struct GainFrequencyKernel<'a> {
    ops: &'a Operands,
    k: Vec3,
    fk: f64,
}

impl NodeKernel<2> for GainFrequencyKernel<'_> {
    type Outer = Outer;

    fn outer(&mut self, index: usize, k1: Vec3) -> Option<Outer> {
        RateKernel {
            ops: self.ops,
            k: self.k,
            fk: self.fk,
            channel: RateChannel::Gain,
        }
        .outer(index, k1)
    }

    #[inline]
    fn inner(&mut self, o: &Outer, sigma: Vec3, acc: &mut [f64; 2]) {
        if !(o.w_hat.dot(sigma) > 0.0) {
            return;
        }
        let d = sigma * o.half_w;
        let fs = self.ops.f.eval(o.center - d);
        let f1s = self.ops.f.eval(o.center + d);
        let q = 0.5 * o.half_w;
        acc[0] = q * fs * f1s * (self.fk + o.f1);
        acc[1] = q * o.f1 * (fs + f1s);
    }

    fn hemisphere_axis(&self, o: &Outer) -> Option<Vec3> {
        Some(o.w_hat)
    }
}

/// `(Q+[f], R[f])` at every node of `spec` from one pass over the nodes.
pub fn gain_and_frequency_on_grid(f: &SpectralField, spec: &GridSpec, nodes: &NodeSet) -> (Vec<f64>, Vec<f64>) {
    let ops = Operands::cubic(f, nodes);
    let mut gain = Vec::with_capacity(spec.len());
    let mut freq = Vec::with_capacity(spec.len());
    for k in spec.nodes() {
        let fk = ops.f.eval(k);
        let [g, r] = nodes.integrate(&mut GainFrequencyKernel { ops: &ops, k, fk });
        gain.push(g.value);
        freq.push(r.value);
    }
    (gain, freq)
}

/// Probe set for [`eval_collision_field`].
#[derive(Debug, Clone, PartialEq)]
pub enum Probes {
    Points(Vec<Vec3>),
    Grid(GridSpec),
}

impl Probes {
    pub fn points(&self) -> Vec<Vec3> {
        match self {
            Probes::Points(p) => p.clone(),
            Probes::Grid(s) => s.nodes().collect(),
        }
    }
}

/// All cubic channels of `f` at every probe, on shared nodes.
pub fn eval_collision_field(f: &SpectralField, probes: &Probes, nodes: &NodeSet) -> Vec<OperatorBundle> {
    let ops = Operands::cubic(f, nodes);
    probes
        .points()
        .into_iter()
        .map(|k| eval_bundle(&ops, k, nodes, Mask::All))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::math::{exp, PI};
    use crate::quadrature::{Backend, MCSampler, RadialRule, SphereRule, TensorRule};

    fn tensor(radial: usize, dir: usize, sig: usize) -> NodeSet {
        NodeSet::build(&Backend::Tensor(
            TensorRule::new(
                RadialRule::composite(radial, &[0.0, 2.0, 4.0, 8.0]).unwrap(),
                SphereRule::product(dir, 2 * dir).unwrap(),
                (sig, 2 * sig),
            )
            .unwrap(),
        ))
        .unwrap()
    }

    fn gauss(a: f64, s: f64) -> SpectralField {
        SpectralField::gaussian(a, s).unwrap()
    }

    fn shifted(c: Vec3) -> SpectralField {
        SpectralField::analytic("shifted", move |k| exp(-(k - c).norm_sq()))
    }

    #[test]
    fn zero_arguments_give_zero() {
        let nodes = tensor(4, 3, 4);
        let z = SpectralField::zero();
        let g = gauss(1.0, 1.0);
        let k = Vec3::new(0.4, 0.1, -0.3);
        for kind in OperatorKind::TRILINEAR {
            for args in [[&z, &g, &g], [&g, &z, &g], [&g, &g, &z]] {
                let v = eval_operator(kind, &args, k, &nodes).unwrap().value;
                assert_eq!(v, 0.0, "{kind} nonzero with a zero slot");
            }
        }
        assert_eq!(eval_operator(OperatorKind::C, &[&z], k, &nodes).unwrap().value, 0.0);
    }

    #[test]
    fn rayleigh_jeans_cancels_on_shared_nodes() {
        let nodes = tensor(4, 3, 6);
        for mu in [0.1, 1.0, 10.0] {
            let f = SpectralField::rayleigh_jeans(mu).unwrap();
            let probes = Probes::Points(vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(-2.0, 3.0, 0.5)]);
            for b in eval_collision_field(&f, &probes, &nodes) {
                assert!(b.local_scale() > 0.0);
                assert!(b.c.value.abs() <= 1e-12 * b.local_scale(), "mu={mu} {b:?}");
            }
        }
    }

    #[test]
    fn decomposition_closes() {
        let nodes = tensor(4, 3, 5);
        let f = shifted(Vec3::new(0.5, 0.0, -0.2));
        let ops = Operands::cubic(&f, &nodes);
        let b = eval_bundle(&ops, Vec3::new(0.3, 0.2, 0.1), &nodes, Mask::All);
        let v = |k| b.estimate(k).value;
        let s = b.local_scale();
        assert!((v(OperatorKind::G0) + v(OperatorKind::G1) - v(OperatorKind::Qplus)).abs() <= 1e-12 * s);
        assert!((v(OperatorKind::L0) + v(OperatorKind::L1) - v(OperatorKind::Qminus)).abs() <= 1e-12 * s);
        assert!((v(OperatorKind::R0) + v(OperatorKind::R1) - v(OperatorKind::Rfreq)).abs() <= 1e-12 * v(OperatorKind::Rfreq));
        assert!((v(OperatorKind::Qplus) - v(OperatorKind::Qminus) - v(OperatorKind::C)).abs() <= 1e-12 * s);
    }

    #[test]
    fn complementary_masks_partition() {
        let nodes = tensor(4, 3, 5);
        let f = gauss(1.0, 1.2);
        let g = shifted(Vec3::new(0.3, 0.3, 0.0));
        let k = Vec3::new(0.7, -0.4, 0.2);
        let full = eval_operator(OperatorKind::G0, &[&f, &g, &f], k, &nodes).unwrap().value;
        for mask in [Mask::KStarAboveHalfEnergy, Mask::K1BelowK, Mask::K1BelowHalfW] {
            let a = restricted_eval(OperatorKind::G0, mask, &[&f, &g, &f], k, &nodes).unwrap().value;
            let b = restricted_eval(OperatorKind::G0, mask.complement().unwrap(), &[&f, &g, &f], k, &nodes)
                .unwrap()
                .value;
            assert!((a + b - full).abs() <= 1e-12 * full, "{mask:?}");
        }
        let all = restricted_eval(OperatorKind::G0, Mask::All, &[&f, &g, &f], k, &nodes).unwrap().value;
        assert_eq!(all, full);
        let empty = restricted_eval(OperatorKind::R0, Mask::K1BelowK, &[&f, &f], Vec3::ZERO, &nodes).unwrap();
        assert_eq!(empty.value, 0.0);
    }

    #[test]
    fn arity_and_mask_errors() {
        let nodes = tensor(2, 2, 2);
        let f = gauss(1.0, 1.0);
        assert!(matches!(
            eval_operator(OperatorKind::G0, &[&f], Vec3::ZERO, &nodes),
            Err(Error::Arity { expected: 3, got: 1, .. })
        ));
        assert!(matches!(
            eval_operator(OperatorKind::C, &[&f, &f], Vec3::ZERO, &nodes),
            Err(Error::Arity { .. })
        ));
        assert!(matches!("bogus".parse::<Mask>(), Err(Error::UnknownMask(_))));
        assert_eq!("k1_below_k".parse::<Mask>().unwrap(), Mask::K1BelowK);
        assert_eq!("qplus".parse::<OperatorKind>().unwrap(), OperatorKind::Qplus);
    }

    #[test]
    fn half_sphere_form_matches_full_sphere_form() {
        let nodes = tensor(4, 3, 16);
        let f = gauss(1.0, 1.0);
        let g = shifted(Vec3::new(0.4, -0.3, 0.2));
        let k = Vec3::new(0.5, 0.5, 0.0);
        let half = eval_operator(OperatorKind::G0, &[&f, &g, &g], k, &nodes).unwrap().value;
        let (fc, gc) = (f.clone(), g.clone());
        let full = resonant_integral(move |k, _, ks, k1s| fc.eval(k) * gc.eval(ks) * gc.eval(k1s), k, &nodes).value;
        assert!((half / full - 1.0).abs() < 1e-6, "{half} vs {full}");
    }

    #[test]
    fn resonant_integral_radial_reduction() {
        let nodes = tensor(12, 2, 2);
        let f = gauss(1.0, core::f64::consts::FRAC_1_SQRT_2);
        let e = resonant_integral(|_, k1, _, _| f.eval(k1), Vec3::ZERO, &nodes);
        // (1/8) 4 pi int |k1| exp(-|k1|^2) dk1 = pi^2
        assert!((e.value / (PI * PI) - 1.0).abs() < 1e-3);
        let omega = resonant_integral(
            |k, k1, ks, k1s| (k.norm_sq() + k1.norm_sq() - ks.norm_sq() - k1s.norm_sq()) * 7.0,
            Vec3::new(1.0, 2.0, 3.0),
            &nodes,
        );
        assert!(omega.value.abs() < 1e-9);
    }

    #[test]
    fn multilinear_and_positive() {
        let nodes = tensor(3, 3, 4);
        let f = gauss(1.0, 1.0);
        let f2 = f.scaled(2.5);
        let g = shifted(Vec3::new(0.1, 0.2, 0.3));
        let k = Vec3::new(-0.2, 0.1, 0.6);
        for kind in OperatorKind::TRILINEAR {
            let a = eval_operator(kind, &[&f, &g, &f], k, &nodes).unwrap().value;
            assert!(a >= 0.0);
            for args in [[&f2, &g, &f], [&f, &g, &f2]] {
                let b = eval_operator(kind, &args, k, &nodes).unwrap().value;
                assert!((b - 2.5 * a).abs() <= 1e-13 * b.abs().max(1e-300), "{kind}");
            }
        }
    }

    #[test]
    fn rate_kernels_match_the_bundle() {
        let nodes = tensor(3, 3, 4);
        let f = shifted(Vec3::new(0.2, -0.1, 0.4));
        let ops = Operands::cubic(&f, &nodes);
        let k = Vec3::new(0.3, 0.3, -0.5);
        let b = eval_bundle(&ops, k, &nodes, Mask::All);
        let c = eval_rate(&ops, k, &nodes, RateChannel::Collision).value;
        let g = eval_rate(&ops, k, &nodes, RateChannel::Gain).value;
        let r = eval_rate(&ops, k, &nodes, RateChannel::Frequency).value;
        let s = b.local_scale();
        assert!((c - b.c.value).abs() <= 1e-13 * s);
        assert!((g - b.qplus.value).abs() <= 1e-13 * s);
        assert!((r - b.rfreq.value).abs() <= 1e-13 * b.rfreq.value);
    }

    #[test]
    fn fused_gain_frequency_matches_single_channels() {
        let nodes = tensor(3, 2, 3);
        let f = shifted(Vec3::new(0.1, 0.2, -0.3));
        let spec = GridSpec::new(3, 2.0).unwrap();
        let (g, r) = gain_and_frequency_on_grid(&f, &spec, &nodes);
        let g1 = rate_on_grid(&f, &spec, &nodes, RateChannel::Gain);
        let r1 = rate_on_grid(&f, &spec, &nodes, RateChannel::Frequency);
        for i in 0..spec.len() {
            assert!((g[i] - g1[i]).abs() <= 1e-14 * g1[i].abs());
            assert!((r[i] - r1[i]).abs() <= 1e-14 * r1[i].abs());
        }
    }

    #[test]
    fn monte_carlo_stderr_is_reported() {
        let nodes = NodeSet::build(&Backend::MonteCarlo(MCSampler::new(3, 2000))).unwrap();
        let f = gauss(1.0, 1.0);
        let e = eval_operator(OperatorKind::G1, &[&f, &f, &f], Vec3::ZERO, &nodes).unwrap();
        assert!(e.stderr > 0.0 && e.value > 0.0);
        assert_eq!(e.n_nodes, 2000);
    }
}
