//! Quadrature on `S^2` and on the truncated product `B(rho_max) x S^2`.
//!
//! The tensor backend combines a Gauss-Legendre radial rule, a product
//! direction rule for `k1` and a product rule for `sigma`. The Monte Carlo
//! backend draws `k1` from a proposal density (importance weighted) and
//! `sigma` uniformly, optionally in antithetic pairs `(sigma, -sigma)`.
//! Both are flattened into a [`NodeSet`] so that several integrands can be
//! evaluated on exactly the same nodes.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, cos, frame_around, rotate_into, sin, sqrt, CompensatedSum, Vec3, FOUR_PI, PI};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[-1, 1]` with panels halving in width
/// towards both endpoints, for integrands peaked at `x = +-1`.
pub fn graded_legendre(order: usize, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut breaks = vec![0.0];
    for j in 1..=levels {
        breaks.push(1.0 - math::powf(0.5, j as f64));
    }
    breaks.push(1.0);
    let mut panels = Vec::new();
    for p in breaks.windows(2) {
        panels.push((p[0], p[1]));
        panels.push((-p[1], -p[0]));
    }
    panels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut x = Vec::with_capacity(panels.len() * order);
    let mut w = Vec::with_capacity(panels.len() * order);
    for (a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in gx.iter().zip(&gw) {
            x.push(mid + half * xi);
            w.push(half * wi);
        }
    }
    (x, w)
}

/// Nodes and weights on `S^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereRule {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    degree: usize,
}

impl SphereRule {
    /// Gauss-Legendre in `cos(theta)` times the uniform rule in `phi`.
    /// Antipodally symmetric when `n_phi` is even.
    pub fn product(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::config("sphere rule needs at least one node per axis"));
        }
        let (x, w) = gauss_legendre(n_theta);
        let degree = (2 * n_theta - 1).min(n_phi - 1);
        Ok(Self::from_zonal(&x, &w, n_phi, degree))
    }

    /// Rule on the upper hemisphere `z > 0`: Gauss-Legendre of order
    /// `n_theta` in `cos(theta) in (0, 1)` times the uniform rule in `phi`.
    /// Weights sum to `2 pi`.
    pub fn hemisphere(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::config("sphere rule needs at least one node per axis"));
        }
        let (x, w) = gauss_legendre(n_theta);
        let x: Vec<f64> = x.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let w: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
        Ok(Self::from_zonal(&x, &w, n_phi, (2 * n_theta - 1).min(n_phi - 1)))
    }

    /// Graded composite rule in `cos(theta)`, resolving integrands that
    /// concentrate near the poles.
    pub fn graded(order: usize, levels: usize, n_phi: usize) -> Result<Self> {
        if order == 0 || n_phi == 0 {
            return Err(Error::config("graded sphere rule needs order and n_phi >= 1"));
        }
        let (x, w) = graded_legendre(order, levels);
        Ok(Self::from_zonal(&x, &w, n_phi, (2 * order - 1).min(n_phi - 1)))
    }

    fn from_zonal(x: &[f64], w: &[f64], n_phi: usize, degree: usize) -> Self {
        let mut nodes = Vec::with_capacity(x.len() * n_phi);
        let mut weights = Vec::with_capacity(x.len() * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for (&z, &wz) in x.iter().zip(w) {
            let rho = sqrt((1.0 - z * z).max(0.0));
            for j in 0..n_phi {
                let phi = dphi * (j as f64 + 0.5);
                nodes.push(Vec3::new(rho * cos(phi), rho * sin(phi), z));
                weights.push(wz * dphi);
            }
        }
        SphereRule {
            nodes,
            weights,
            degree,
        }
    }

    pub fn from_parts(nodes: Vec<Vec3>, weights: Vec<f64>, degree: usize) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::config("sphere rule needs matching nonempty nodes and weights"));
        }
        if nodes.iter().any(|n| (n.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::config("sphere nodes must be unit vectors"));
        }
        Ok(SphereRule {
            nodes,
            weights,
            degree,
        })
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest spherical-harmonic degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The same rule with its pole moved onto `axis`.
    pub fn aligned_with(&self, axis: Vec3) -> SphereRule {
        let f = frame_around(axis);
        SphereRule {
            nodes: self.nodes.iter().map(|&n| rotate_into(&f, n)).collect(),
            weights: self.weights.clone(),
            degree: self.degree,
        }
    }
}

/// `sum_i w_i F(sigma_i)`.
pub fn integrate_sphere(rule: &SphereRule, mut f: impl FnMut(Vec3) -> f64) -> f64 {
    let mut s = CompensatedSum::default();
    for (n, w) in rule.nodes.iter().zip(&rule.weights) {
        s.add(w * f(*n));
    }
    s.value()
}

/// Radial rule for `int_0^rho_max g(rho) rho^2 d rho`; the `rho^2` Jacobian
/// is folded into the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rho_max: f64,
}

impl RadialRule {
    pub fn gauss_legendre(n: usize, rho_max: f64) -> Result<Self> {
        Self::composite(n, &[0.0, rho_max])
    }

    /// Gauss-Legendre of the given order on each panel between consecutive
    /// breakpoints; the last breakpoint is the cutoff.
    pub fn composite(order: usize, breakpoints: &[f64]) -> Result<Self> {
        if order == 0 || breakpoints.len() < 2 {
            return Err(Error::config("radial rule needs order >= 1 and one panel"));
        }
        if breakpoints[0] < 0.0 || breakpoints.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::config("radial breakpoints must increase from >= 0"));
        }
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in breakpoints.windows(2) {
            let half = 0.5 * (p[1] - p[0]);
            let mid = 0.5 * (p[1] + p[0]);
            for (x, w) in gx.iter().zip(&gw) {
                let r = mid + half * x;
                nodes.push(r);
                weights.push(half * w * r * r);
            }
        }
        Ok(RadialRule {
            nodes,
            weights,
            rho_max: *breakpoints.last().unwrap(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }
}

/// Proposal density for `k1` in the Monte Carlo backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Proposal {
    /// Isotropic Gaussian with standard deviation `scale` per axis.
    Gaussian { scale: f64 },
    UniformBall { rho_max: f64 },
}

impl Proposal {
    pub(crate) fn density(&self, x: Vec3) -> f64 {
        match *self {
            Proposal::Gaussian { scale } => {
                let s2 = scale * scale;
                math::exp(-0.5 * x.norm_sq() / s2) / math::powf(2.0 * PI * s2, 1.5)
            }
            Proposal::UniformBall { rho_max } => 3.0 / (FOUR_PI * rho_max * rho_max * rho_max),
        }
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match *self {
            Proposal::Gaussian { scale } => Vec3::new(
                rng.sample::<f64, _>(StandardNormal) * scale,
                rng.sample::<f64, _>(StandardNormal) * scale,
                rng.sample::<f64, _>(StandardNormal) * scale,
            ),
            Proposal::UniformBall { rho_max } => {
                let d = uniform_direction(rng);
                let u: f64 = rng.random();
                d * (rho_max * math::powf(u, 1.0 / 3.0))
            }
        }
    }
}

pub(crate) fn uniform_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * PI * rng.random::<f64>();
    let r = sqrt((1.0 - z * z).max(0.0));
    Vec3::new(r * cos(phi), r * sin(phi), z)
}

/// Seeded Monte Carlo configuration. `n_samples` counts integrand
/// evaluations, so an antithetic run uses `n_samples / 2` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCSampler {
    pub seed: u64,
    pub n_samples: usize,
    pub proposal: Proposal,
    pub antithetic: bool,
    /// `k1` samples beyond this radius carry zero weight.
    pub rho_max: f64,
}

impl MCSampler {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        MCSampler {
            seed,
            n_samples,
            proposal: Proposal::Gaussian { scale: 2.0 },
            antithetic: true,
            rho_max: DEFAULT_RHO_MAX,
        }
    }
}

pub const DEFAULT_RHO_MAX: f64 = 8.0;

/// Tensor rule for `B(rho_max) x S^2`: `k1 = rho * omega` with `rho` from the
/// radial rule and `omega` from `directions`. Full-sphere integrands use
/// `sigma`; half-sphere integrands use `hemisphere`, rotated per `k1` node so
/// that its pole lies along the kernel's axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRule {
    pub radial: RadialRule,
    pub directions: SphereRule,
    pub sigma: SphereRule,
    pub hemisphere: SphereRule,
}

impl TensorRule {
    /// `sigma = (n_theta, n_phi)` gives the full product rule and a
    /// hemisphere rule with `ceil(n_theta / 2)` zonal nodes, so both spend
    /// about the same number of nodes on each half sphere.
    pub fn new(radial: RadialRule, directions: SphereRule, sigma: (usize, usize)) -> Result<Self> {
        Ok(TensorRule {
            radial,
            directions,
            sigma: SphereRule::product(sigma.0, sigma.1)?,
            hemisphere: SphereRule::hemisphere(sigma.0.div_ceil(2), sigma.1)?,
        })
    }

    /// Uniform-order rule; `radial` nodes on `(0, rho_max]`, product rules
    /// `theta x phi` for both sphere factors.
    pub fn uniform(radial: usize, dir: (usize, usize), sigma: (usize, usize), rho_max: f64) -> Result<Self> {
        Self::new(
            RadialRule::gauss_legendre(radial, rho_max)?,
            SphereRule::product(dir.0, dir.1)?,
            sigma,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    Tensor(TensorRule),
    MonteCarlo(MCSampler),
}

impl Backend {
    pub fn rho_max(&self) -> f64 {
        match self {
            Backend::Tensor(t) => t.radial.rho_max(),
            Backend::MonteCarlo(m) => m.rho_max,
        }
    }
}

/// Value with its Monte Carlo standard error (zero for deterministic rules).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
enum SigmaNodes {
    Shared {
        dirs: Vec<Vec3>,
        weights: Vec<f64>,
        hemi_dirs: Vec<Vec3>,
        hemi_weights: Vec<f64>,
    },
    PerSample { per: usize, dirs: Vec<Vec3>, weight: f64 },
}

/// Flattened `(k1, sigma)` nodes of a backend.
#[derive(Debug, Clone)]
pub struct NodeSet {
    k1: Vec<Vec3>,
    k1_weight: Vec<f64>,
    sigma: SigmaNodes,
    rho_max: f64,
    stochastic: bool,
}

/// Two-level integrand: `outer` runs once per `k1` node, `inner` once per
/// `sigma` node attached to it.
pub trait NodeKernel<const N: usize> {
    type Outer;
    /// `None` marks a `k1` node whose contribution vanishes identically.
    fn outer(&mut self, index: usize, k1: Vec3) -> Option<Self::Outer>;
    fn inner(&mut self, outer: &Self::Outer, sigma: Vec3, acc: &mut [f64; N]);
    /// For integrands supported on `{axis . sigma > 0}`: the axis. Tensor
    /// node sets then integrate with the aligned hemisphere rule.
    fn hemisphere_axis(&self, _outer: &Self::Outer) -> Option<Vec3> {
        None
    }
}

impl NodeSet {
    pub fn build(backend: &Backend) -> Result<Self> {
        match backend {
            Backend::Tensor(t) => Self::tensor(t),
            Backend::MonteCarlo(m) => Self::monte_carlo(m),
        }
    }

    fn tensor(t: &TensorRule) -> Result<Self> {
        if t.radial.nodes.is_empty() || t.directions.is_empty() || t.sigma.is_empty() || t.hemisphere.is_empty() {
            return Err(Error::config("tensor rule has an empty factor"));
        }
        let mut k1 = Vec::with_capacity(t.radial.nodes.len() * t.directions.len());
        let mut k1_weight = Vec::with_capacity(k1.capacity());
        for (r, wr) in t.radial.nodes.iter().zip(&t.radial.weights) {
            for (d, wd) in t.directions.nodes.iter().zip(&t.directions.weights) {
                k1.push(*d * *r);
                k1_weight.push(wr * wd);
            }
        }
        Ok(NodeSet {
            k1,
            k1_weight,
            sigma: SigmaNodes::Shared {
                dirs: t.sigma.nodes.clone(),
                weights: t.sigma.weights.clone(),
                hemi_dirs: t.hemisphere.nodes.clone(),
                hemi_weights: t.hemisphere.weights.clone(),
            },
            rho_max: t.radial.rho_max,
            stochastic: false,
        })
    }

    fn monte_carlo(m: &MCSampler) -> Result<Self> {
        let units = if m.antithetic { m.n_samples / 2 } else { m.n_samples };
        if units == 0 {
            return Err(Error::config("Monte Carlo backend needs n_samples > 0 (>= 2 if antithetic)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        let per = if m.antithetic { 2 } else { 1 };
        let mut k1 = Vec::with_capacity(units);
        let mut k1_weight = Vec::with_capacity(units);
        let mut dirs = Vec::with_capacity(units * per);
        for _ in 0..units {
            let x = m.proposal.draw(&mut rng);
            let s = uniform_direction(&mut rng);
            let w = if x.norm() <= m.rho_max {
                1.0 / (m.proposal.density(x) * units as f64)
            } else {
                0.0
            };
            k1.push(x);
            k1_weight.push(w);
            dirs.push(s);
            if m.antithetic {
                dirs.push(-s);
            }
        }
        Ok(NodeSet {
            k1,
            k1_weight,
            sigma: SigmaNodes::PerSample {
                per,
                dirs,
                weight: FOUR_PI / per as f64,
            },
            rho_max: m.rho_max,
            stochastic: true,
        })
    }

    pub fn k1_nodes(&self) -> &[Vec3] {
        &self.k1
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    /// Number of `(k1, sigma)` evaluation points of full-sphere integrands.
    pub fn len(&self) -> usize {
        match &self.sigma {
            SigmaNodes::Shared { dirs, .. } => self.k1.len() * dirs.len(),
            SigmaNodes::PerSample { dirs, .. } => dirs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Integrates all `N` channels of `kernel` over the node set in a fixed
    /// order.
    pub fn integrate<const N: usize, K: NodeKernel<N>>(&self, kernel: &mut K) -> [Estimate; N] {
        let mut total = [CompensatedSum::default(); N];
        let mut sumsq = [0.0_f64; N];
        let units = self.k1.len() as f64;
        for (i, (&k1, &w1)) in self.k1.iter().zip(&self.k1_weight).enumerate() {
            if w1 == 0.0 {
                continue;
            }
            let Some(outer) = kernel.outer(i, k1) else {
                continue;
            };
            let mut acc = [0.0_f64; N];
            match &self.sigma {
                SigmaNodes::Shared {
                    dirs,
                    weights,
                    hemi_dirs,
                    hemi_weights,
                } => match kernel.hemisphere_axis(&outer) {
                    Some(axis) => {
                        let frame = frame_around(axis);
                        for (s, ws) in hemi_dirs.iter().zip(hemi_weights) {
                            let mut local = [0.0_f64; N];
                            kernel.inner(&outer, rotate_into(&frame, *s), &mut local);
                            for c in 0..N {
                                acc[c] += ws * local[c];
                            }
                        }
                    }
                    None => {
                        for (s, ws) in dirs.iter().zip(weights) {
                            let mut local = [0.0_f64; N];
                            kernel.inner(&outer, *s, &mut local);
                            for c in 0..N {
                                acc[c] += ws * local[c];
                            }
                        }
                    }
                },
                SigmaNodes::PerSample { per, dirs, weight } => {
                    for s in &dirs[i * per..(i + 1) * per] {
                        let mut local = [0.0_f64; N];
                        kernel.inner(&outer, *s, &mut local);
                        for c in 0..N {
                            acc[c] += weight * local[c];
                        }
                    }
                }
            }
            for c in 0..N {
                let unit = w1 * acc[c];
                total[c].add(unit);
                if self.stochastic {
                    sumsq[c] += (units * unit) * (units * unit);
                }
            }
        }
        let mut out = [Estimate::default(); N];
        for c in 0..N {
            let mean = total[c].value();
            let stderr = if self.stochastic && units > 1.0 {
                let var = ((sumsq[c] - units * mean * mean) / (units - 1.0)).max(0.0);
                sqrt(var / units)
            } else {
                0.0
            };
            out[c] = Estimate { value: mean, stderr };
        }
        out
    }
}

struct ClosureKernel<G>(G);

impl<G: FnMut(Vec3, Vec3) -> f64> NodeKernel<1> for ClosureKernel<G> {
    type Outer = Vec3;
    fn outer(&mut self, _: usize, k1: Vec3) -> Option<Vec3> {
        Some(k1)
    }
    fn inner(&mut self, k1: &Vec3, sigma: Vec3, acc: &mut [f64; 1]) {
        acc[0] = (self.0)(*k1, sigma);
    }
}

/// `int_{|k1| <= rho_max} int_{S^2} G(k1, sigma) d sigma d k1`.
pub fn integrate_r3_sphere(backend: &Backend, g: impl FnMut(Vec3, Vec3) -> f64) -> Result<Estimate> {
    let nodes = NodeSet::build(backend)?;
    Ok(integrate_nodes(&nodes, g))
}

pub fn integrate_nodes(nodes: &NodeSet, g: impl FnMut(Vec3, Vec3) -> f64) -> Estimate {
    let [e] = nodes.integrate(&mut ClosureKernel(g));
    e
}
