//! Spectra `f(k)`, weight regimes and the weighted `L^r` norms built on a
//! cell-centred Cartesian grid.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, bracket, powf, Vec3};

/// Cell-centred grid on `[-rho_max, rho_max]^3` with `n` nodes per axis,
/// `h = 2 rho_max / n` and nodes `-rho_max + (i + 1/2) h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub rho_max: f64,
}

impl GridSpec {
    pub fn new(n: usize, rho_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("grid needs at least 2 nodes per axis"));
        }
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            return Err(Error::config("grid rho_max must be positive and finite"));
        }
        Ok(GridSpec { n, rho_max })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.rho_max / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        h * h * h
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.rho_max + (i as f64 + 0.5) * self.h()
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Row-major index, `x` slowest.
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.n + l
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let n = self.n;
        Vec3::new(
            self.coordinate(idx / (n * n)),
            self.coordinate((idx / n) % n),
            self.coordinate(idx % n),
        )
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }
}

/// Values stored at the nodes of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    inv_h: f64,
    values: Vec<f64>,
}

const SNAP: f64 = 1e-12;

impl GridField {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::config("grid value count does not match n^3"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid values must be finite"));
        }
        Ok(Self::raw(spec, values))
    }

    fn raw(spec: GridSpec, values: Vec<f64>) -> Self {
        GridField {
            spec,
            inv_h: 1.0 / spec.h(),
            values,
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::raw(spec, alloc::vec![0.0; spec.len()])
    }

    pub fn sample(field: &SpectralField, spec: GridSpec) -> Result<Self> {
        Self::from_values(spec, field.sample_on(&spec))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[inline]
    fn axis(&self, x: f64) -> (usize, f64) {
        let top = (self.spec.n - 1) as f64;
        let u = ((x + self.spec.rho_max) * self.inv_h - 0.5).clamp(0.0, top);
        let i = (u as usize).min(self.spec.n - 2);
        let t = u - i as f64;
        let t = if t < SNAP {
            0.0
        } else if t > 1.0 - SNAP {
            1.0
        } else {
            t
        };
        (i, t)
    }

    /// Trilinear interpolation; constant extension between the outer nodes
    /// and the box face, zero outside the box.
    #[inline]
    pub fn eval(&self, k: Vec3) -> f64 {
        let rho = self.spec.rho_max;
        let [x, y, z] = k.0;
        if !(x.abs() <= rho && y.abs() <= rho && z.abs() <= rho) {
            return 0.0;
        }
        let (i, tx) = self.axis(x);
        let (j, ty) = self.axis(y);
        let (l, tz) = self.axis(z);
        let n = self.spec.n;
        let base = (i * n + j) * n + l;
        let v = &self.values[base..];
        let (sx, sy) = (n * n, n);
        // (1 - t) a + t b is exact at both t = 0 and t = 1.
        let lerp = |a: f64, b: f64, t: f64| (1.0 - t) * a + t * b;
        let c00 = lerp(v[0], v[1], tz);
        let c01 = lerp(v[sy], v[sy + 1], tz);
        let c10 = lerp(v[sx], v[sx + 1], tz);
        let c11 = lerp(v[sx + sy], v[sx + sy + 1], tz);
        lerp(lerp(c00, c01, ty), lerp(c10, c11, ty), tx)
    }
}

type AnalyticFn = dyn Fn(Vec3) -> f64 + Send + Sync;

enum Backing {
    Analytic { name: String, f: Box<AnalyticFn> },
    Grid(GridField),
    /// `base + increment`, the representation of solver snapshots.
    Offset { base: SpectralField, increment: GridField },
}

/// An evaluable spectrum. Cloning is cheap; fields are immutable.
#[derive(Clone)]
pub struct SpectralField(Arc<Backing>);

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Backing::Analytic { name, .. } => write!(f, "Analytic({name})"),
            Backing::Grid(g) => write!(f, "Grid(n={}, rho_max={})", g.spec.n, g.spec.rho_max),
            Backing::Offset { base, increment } => {
                write!(f, "Offset({base:?} + grid n={})", increment.spec.n)
            }
        }
    }
}

impl SpectralField {
    pub fn analytic(name: impl Into<String>, f: impl Fn(Vec3) -> f64 + Send + Sync + 'static) -> Self {
        SpectralField(Arc::new(Backing::Analytic {
            name: name.into(),
            f: Box::new(f),
        }))
    }

    pub fn grid(g: GridField) -> Self {
        SpectralField(Arc::new(Backing::Grid(g)))
    }

    pub fn zero() -> Self {
        Self::analytic("zero", |_| 0.0)
    }

    /// `base + increment`. A grid base on the same grid is summed eagerly.
    pub fn offset(base: &SpectralField, increment: GridField) -> Self {
        if let Backing::Grid(g) = &*base.0 {
            if g.spec == increment.spec {
                let values = g.values.iter().zip(&increment.values).map(|(a, b)| a + b).collect();
                return Self::grid(GridField::raw(g.spec, values));
            }
        }
        SpectralField(Arc::new(Backing::Offset {
            base: base.clone(),
            increment,
        }))
    }

    /// Rayleigh-Jeans spectrum `1 / (mu + |k|^2)`.
    pub fn rayleigh_jeans(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain("Rayleigh-Jeans chemical potential must be positive"));
        }
        Ok(Self::analytic(alloc::format!("rj:{mu}"), move |k| 1.0 / (mu + k.norm_sq())))
    }

    /// `a exp(-|k|^2 / (2 s^2))`.
    pub fn gaussian(amplitude: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && amplitude.is_finite()) {
            return Err(Error::domain("Gaussian needs finite amplitude and positive scale"));
        }
        let c = 0.5 / (scale * scale);
        Ok(Self::analytic(alloc::format!("gaussian:{amplitude},{scale}"), move |k| {
            amplitude * math::exp(-c * k.norm_sq())
        }))
    }

    /// `c f`, keeping the backing kind.
    pub fn scaled(&self, c: f64) -> Self {
        match &*self.0 {
            Backing::Grid(g) => Self::grid(GridField::raw(g.spec, g.values.iter().map(|v| c * v).collect())),
            Backing::Offset { base, increment } => SpectralField(Arc::new(Backing::Offset {
                base: base.scaled(c),
                increment: GridField::raw(increment.spec, increment.values.iter().map(|v| c * v).collect()),
            })),
            Backing::Analytic { name, .. } => {
                let inner = self.clone();
                Self::analytic(alloc::format!("{c}*{name}"), move |k| c * inner.eval(k))
            }
        }
    }

    pub fn eval(&self, k: Vec3) -> f64 {
        match &*self.0 {
            Backing::Analytic { f, .. } => f(k),
            Backing::Grid(g) => g.eval(k),
            Backing::Offset { base, increment } => base.eval(k) + increment.eval(k),
        }
    }

    /// Whether both handles share one backing.
    pub fn ptr_eq(&self, other: &SpectralField) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_grid(&self) -> Option<&GridField> {
        match &*self.0 {
            Backing::Grid(g) => Some(g),
            _ => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(&*self.0, Backing::Analytic { .. })
    }

    /// Values at the nodes of `spec`; stored values are copied verbatim when
    /// the backing grid coincides with `spec`.
    pub fn sample_on(&self, spec: &GridSpec) -> Vec<f64> {
        match &*self.0 {
            Backing::Grid(g) if g.spec == *spec => g.values.clone(),
            Backing::Offset { base, increment } if increment.spec == *spec => {
                let mut v = base.sample_on(spec);
                v.iter_mut().zip(&increment.values).for_each(|(a, b)| *a += b);
                v
            }
            _ => spec.nodes().map(|k| self.eval(k)).collect(),
        }
    }
}

/// Exponent bundle `(r, delta, l, l0, l1)` with `l = 2 - 3/r + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRegime {
    #[serde(with = "exponent")]
    r: f64,
    delta: f64,
    l: f64,
    l0: f64,
    l1: f64,
}

impl WeightRegime {
    /// Regime of the well-posedness theorem: `r in [2, inf]`, `0 < delta < 1/r`.
    pub fn new(r: f64, delta: f64) -> Result<Self> {
        let upper = if r.is_infinite() { f64::INFINITY } else { 1.0 / r };
        if !(delta > 0.0 && delta < upper) {
            return Err(Error::domain(alloc::format!(
                "delta = {delta} outside (0, 1/r) for r = {r}"
            )));
        }
        Self::build(r, delta)
    }

    /// Looser regime for the analysis module: `0 <= delta < 1`, which admits
    /// the critical case `delta = 0`.
    pub fn analysis(r: f64, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::domain(alloc::format!("delta = {delta} outside [0, 1)")));
        }
        Self::build(r, delta)
    }

    fn build(r: f64, delta: f64) -> Result<Self> {
        if !(r >= 2.0) {
            return Err(Error::domain(alloc::format!("r = {r} must lie in [2, inf]")));
        }
        let l = if r.is_infinite() { 2.0 + delta } else { 2.0 - 3.0 / r + delta };
        Ok(WeightRegime {
            r,
            delta,
            l,
            l0: 0.5 * (1.0 - delta),
            l1: 0.5 * (1.0 + delta),
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    /// Hoelder conjugate `r'`.
    pub fn r_conjugate(&self) -> f64 {
        if self.r.is_infinite() {
            1.0
        } else {
            self.r / (self.r - 1.0)
        }
    }

    pub fn weight(&self, k: Vec3) -> f64 {
        powf(k.bracket(), self.l)
    }
}

/// Serde adapter writing an infinite exponent as the string `"inf"`.
pub mod exponent {
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_infinite() {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Finite(*r).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(r) => Ok(r),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(alloc::format!("bad exponent `{t}`"))),
        }
    }
}

/// `(sum |<k>^s v|^p h^3)^{1/p}` over node values, or the node maximum for
/// `p = inf`.
pub fn weighted_lp_values(values: &[f64], spec: &GridSpec, s: f64, p: f64) -> f64 {
    let weights = (0..spec.len()).map(|i| powf(spec.node(i).bracket(), s));
    if p.is_infinite() {
        return values
            .iter()
            .zip(weights)
            .fold(0.0_f64, |m, (v, w)| m.max((v * w).abs()));
    }
    let mut acc = math::CompensatedSum::default();
    for (v, w) in values.iter().zip(weights) {
        let a = (v * w).abs();
        if a > 0.0 {
            acc.add(if p == 2.0 { a * a } else { powf(a, p) });
        }
    }
    powf(acc.value() * spec.cell_volume(), 1.0 / p)
}

pub fn weighted_lp_norm(field: &SpectralField, spec: &GridSpec, s: f64, p: f64) -> f64 {
    weighted_lp_values(&field.sample_on(spec), spec, s, p)
}

/// `||<k>^l f||_{L^r}` on the grid.
pub fn weighted_norm(field: &SpectralField, regime: &WeightRegime, spec: &GridSpec) -> f64 {
    weighted_lp_norm(field, spec, regime.l, regime.r)
}

/// Norms appearing in the `L^2 -> L^r` embedding chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub norm_l0: f64,
    pub norm_half: f64,
    pub norm_l1: f64,
    pub norm_lr: f64,
    /// Smallest `C` with `norm_l1 <= C norm_lr` for this field.
    pub constant: f64,
    /// Discrete Hoelder bound `||<k>^{l1 - l}||_{L^q}`, `1/2 = 1/r + 1/q`.
    pub holder_constant: f64,
    pub chain_holds: bool,
    pub holder_holds: bool,
}

pub fn embedding_check(psi: &SpectralField, regime: &WeightRegime, spec: &GridSpec) -> EmbeddingReport {
    let values = psi.sample_on(spec);
    let norm_l0 = weighted_lp_values(&values, spec, regime.l0, 2.0);
    let norm_half = weighted_lp_values(&values, spec, 0.5, 2.0);
    let norm_l1 = weighted_lp_values(&values, spec, regime.l1, 2.0);
    let norm_lr = weighted_lp_values(&values, spec, regime.l, regime.r);
    let q = if regime.r.is_infinite() {
        2.0
    } else if regime.r == 2.0 {
        f64::INFINITY
    } else {
        2.0 * regime.r / (regime.r - 2.0)
    };
    let ones = alloc::vec![1.0; spec.len()];
    let holder_constant = weighted_lp_values(&ones, spec, regime.l1 - regime.l, q);
    let slack = 1.0 + 1e-12;
    EmbeddingReport {
        norm_l0,
        norm_half,
        norm_l1,
        norm_lr,
        constant: if norm_lr > 0.0 { norm_l1 / norm_lr } else { 0.0 },
        holder_constant,
        chain_holds: norm_l0 <= norm_half * slack && norm_half <= norm_l1 * slack,
        holder_holds: norm_l1 <= holder_constant * norm_lr * slack,
    }
}

/// Weight `<k>^s` as a free function, for callers without a regime.
pub fn bracket_power(k: Vec3, s: f64) -> f64 {
    powf(bracket(k.norm()), s)
}
