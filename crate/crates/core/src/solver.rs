//! Local-in-time solutions by Picard iteration on `f0 + int_0^t C[f]`, and
//! the Kaniel-Shinbrot bracket `l_n <= f <= u_n` certifying positivity.
//!
//! Trajectories live on a uniform sub-step grid in time and on a
//! [`GridSpec`] in space. Picard snapshots keep `f0` exactly and store the
//! accumulated increment on the grid, so equilibria stay exact; the bracket
//! works with grid samples of `f0` throughout.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::collision::{gain_and_frequency_on_grid, rate_on_grid, RateChannel};
use crate::error::{Error, Result};
use crate::fields::{weighted_lp_values, GridField, GridSpec, SpectralField, WeightRegime};
use crate::math::exp;
use crate::quadrature::NodeSet;

/// Slack on the `2R` ball and on the horizon, relative.
const BALL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Number of uniform sub-steps on `[0, T]`.
    pub substeps: usize,
    /// Run length when shorter than the horizon.
    pub horizon: Option<f64>,
    /// Picard stops once the sup-in-time distance drops below `tol R`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Tolerance of the gain-only Picard solve seeding the bracket.
    pub gain_tol: f64,
    /// The bracket stops once its gap drops below `ks_tol R`.
    pub ks_tol: f64,
    pub ks_max_steps: usize,
    /// Nesting tolerance relative to the bracket scale `max u_0`.
    pub nesting_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            substeps: 32,
            horizon: None,
            tol: 1e-10,
            max_iterations: 60,
            gain_tol: 1e-14,
            ks_tol: 1e-10,
            ks_max_steps: 60,
            nesting_tol: 1e-10,
        }
    }
}

/// `T = 1 / (96 C R^2)`. For `R = 0` the horizon is unbounded and
/// `1 / (96 C)` is used as the run length.
pub fn horizon(c_hat: f64, r: f64) -> Result<f64> {
    if !(c_hat > 0.0 && c_hat.is_finite()) {
        return Err(Error::domain("the trilinear constant must be positive and finite"));
    }
    Ok(if r > 0.0 { 1.0 / (96.0 * c_hat * r * r) } else { 1.0 / (96.0 * c_hat) })
}

/// Snapshots `f(t_i) = base + increment_i` at `t_i = i dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    base: SpectralField,
    base_is_zero: bool,
    base_values: Vec<f64>,
    spec: GridSpec,
    dt: f64,
    increments: Vec<Vec<f64>>,
}

impl Trajectory {
    /// `f(t) = f0` on `substeps + 1` equally spaced times up to `t_end`.
    pub fn constant(f0: &SpectralField, spec: &GridSpec, t_end: f64, substeps: usize) -> Result<Self> {
        if substeps == 0 || !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::config("trajectory needs substeps >= 1 and a finite end time"));
        }
        let base_values = f0.sample_on(spec);
        if let Some(bad) = base_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(alloc::format!("initial data is not finite on the grid ({bad})")));
        }
        Ok(Trajectory {
            base: f0.clone(),
            base_is_zero: false,
            base_values,
            spec: *spec,
            dt: t_end / substeps as f64,
            increments: vec![vec![0.0; spec.len()]; substeps + 1],
        })
    }

    /// Trajectory of plain grid values.
    pub fn from_values(spec: &GridSpec, dt: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| v.len() != spec.len()) {
            return Err(Error::config("trajectory needs at least two snapshots on the grid"));
        }
        Ok(Trajectory {
            base: SpectralField::zero(),
            base_is_zero: true,
            base_values: vec![0.0; spec.len()],
            spec: *spec,
            dt,
            increments: values,
        })
    }

    fn with_increments(&self, increments: Vec<Vec<f64>>) -> Self {
        Trajectory {
            increments,
            ..self.clone()
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.dt * (self.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.dt * i as f64).collect()
    }

    /// Grid values of snapshot `i`.
    pub fn values(&self, i: usize) -> Vec<f64> {
        self.base_values.iter().zip(&self.increments[i]).map(|(a, b)| a + b).collect()
    }

    pub fn snapshot(&self, i: usize) -> SpectralField {
        let inc = GridField::from_values(self.spec, self.increments[i].clone()).expect("finite increments");
        if self.base_is_zero {
            SpectralField::grid(inc)
        } else {
            SpectralField::offset(&self.base, inc)
        }
    }

    /// Linear interpolation between the neighbouring snapshots.
    pub fn snapshot_at(&self, t: f64) -> Result<SpectralField> {
        let end = self.end_time();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::Horizon { t, horizon: end });
        }
        if self.dt == 0.0 {
            return Ok(self.snapshot(0));
        }
        let u = (t / self.dt).min((self.len() - 1) as f64);
        let i = (u as usize).min(self.len() - 2);
        let s = u - i as f64;
        let inc: Vec<f64> = self.increments[i]
            .iter()
            .zip(&self.increments[i + 1])
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect();
        let inc = GridField::from_values(self.spec, inc)?;
        Ok(if self.base_is_zero {
            SpectralField::grid(inc)
        } else {
            SpectralField::offset(&self.base, inc)
        })
    }

    /// `||<k>^l f(t_i)||_r` for every snapshot.
    pub fn norms(&self, regime: &WeightRegime) -> Vec<f64> {
        (0..self.len())
            .map(|i| weighted_lp_values(&self.values(i), &self.spec, regime.l(), regime.r()))
            .collect()
    }

    /// `sup_i ||<k>^l (f(t_i) - g(t_i))||_r`.
    pub fn sup_distance(&self, other: &Trajectory, regime: &WeightRegime) -> Result<f64> {
        if self.len() != other.len() || self.spec != other.spec {
            return Err(Error::config("trajectories live on different time or space grids"));
        }
        let mut d = 0.0_f64;
        for i in 0..self.len() {
            let diff: Vec<f64> = self
                .values(i)
                .iter()
                .zip(other.values(i))
                .map(|(a, b)| a - b)
                .collect();
            d = d.max(weighted_lp_values(&diff, &self.spec, regime.l(), regime.r()));
        }
        Ok(d)
    }

    pub fn min_value(&self) -> f64 {
        (0..self.len())
            .flat_map(|i| self.values(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.len())
            .flat_map(|i| self.values(i))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Cumulative trapezoid sums `int_0^{t_i}` of the per-snapshot rates.
fn cumulative_trapezoid(rates: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let n = rates[0].len();
    let mut out = Vec::with_capacity(rates.len());
    let mut acc = vec![0.0; n];
    out.push(acc.clone());
    for w in rates.windows(2) {
        for ((a, x), y) in acc.iter_mut().zip(&w[0]).zip(&w[1]) {
            *a += 0.5 * dt * (x + y);
        }
        out.push(acc.clone());
    }
    out
}

fn rates(traj: &Trajectory, nodes: &NodeSet, channel: RateChannel, first: Option<&Vec<f64>>) -> Vec<Vec<f64>> {
    (0..traj.len())
        .map(|i| match (i, first) {
            (0, Some(r)) => r.clone(),
            _ => rate_on_grid(&traj.snapshot(i), &traj.spec, nodes, channel),
        })
        .collect()
}

/// `Phi(f)(t) = f0 + int_0^t C[f(s)] ds` with the trapezoid rule on the
/// sub-step grid of `traj`, whose base must be `f0`.
pub fn picard_map(f0: &SpectralField, traj: &Trajectory, t: f64, nodes: &NodeSet) -> Result<SpectralField> {
    let end = traj.end_time();
    if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
        return Err(Error::Horizon { t, horizon: end });
    }
    let mut inc = vec![0.0; traj.spec.len()];
    if t > 0.0 && traj.dt > 0.0 {
        let u = (t / traj.dt).min((traj.len() - 1) as f64);
        let full = (u as usize).min(traj.len() - 1);
        let c = |i: usize| rate_on_grid(&traj.snapshot(i), &traj.spec, nodes, RateChannel::Collision);
        let mut prev = c(0);
        for i in 1..=full {
            let next = c(i);
            for ((a, x), y) in inc.iter_mut().zip(&prev).zip(&next) {
                *a += 0.5 * traj.dt * (x + y);
            }
            prev = next;
        }
        let s = u - full as f64;
        if s > 0.0 {
            let next = c(full + 1);
            let h = s * traj.dt;
            for ((a, x), y) in inc.iter_mut().zip(&prev).zip(&next) {
                let end_rate = (1.0 - s) * x + s * y;
                *a += 0.5 * h * (x + end_rate);
            }
        }
    }
    Ok(SpectralField::offset(f0, GridField::from_values(traj.spec, inc)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardState {
    pub regime: WeightRegime,
    /// `R = ||<k>^l f0||_r` on the grid.
    pub r: f64,
    pub c_hat: f64,
    /// `1 / (96 C R^2)`.
    pub horizon: f64,
    /// Length of the computed interval, at most the horizon.
    pub run_time: f64,
    pub dt: f64,
    /// `sup_t ||f^{n+1} - f^n||` per iteration.
    pub distances: Vec<f64>,
    /// Ratios of successive distances.
    pub contraction_log: Vec<f64>,
    /// `sup_t ||<k>^l f(t)||` of the returned trajectory.
    pub max_norm: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl PicardState {
    pub fn max_contraction(&self) -> f64 {
        self.contraction_log.iter().cloned().fold(0.0_f64, f64::max)
    }

    pub fn iterations(&self) -> usize {
        self.distances.len()
    }
}

fn check_ball(norms: &[f64], r: f64) -> Result<f64> {
    let max = norms.iter().cloned().fold(0.0_f64, f64::max);
    let radius = 2.0 * r;
    if max > radius * (1.0 + BALL_SLACK) + f64::MIN_POSITIVE {
        return Err(Error::NormBlowup { norm: max, radius });
    }
    Ok(max)
}

fn picard_iterate(
    f0: &SpectralField,
    regime: &WeightRegime,
    c_hat: f64,
    spec: &GridSpec,
    nodes: &NodeSet,
    cfg: &SolverConfig,
    channel: RateChannel,
    tol: f64,
) -> Result<PicardState> {
    let r = weighted_lp_values(&f0.sample_on(spec), spec, regime.l(), regime.r());
    let t_max = horizon(c_hat, r)?;
    let run = cfg.horizon.unwrap_or(t_max);
    if run > t_max * (1.0 + 1e-12) {
        return Err(Error::Horizon { t: run, horizon: t_max });
    }
    let mut traj = Trajectory::constant(f0, spec, run, cfg.substeps)?;
    let first = rate_on_grid(f0, spec, nodes, channel);
    let mut distances = Vec::new();
    let mut log = Vec::new();
    check_ball(&traj.norms(regime), r)?;
    let mut max_norm;
    let threshold = tol * r;
    for _ in 0..cfg.max_iterations {
        let c = rates(&traj, nodes, channel, Some(&first));
        let next = traj.with_increments(cumulative_trapezoid(&c, traj.dt));
        let d = next.sup_distance(&traj, regime)?;
        max_norm = check_ball(&next.norms(regime), r)?;
        if let Some(&prev) = distances.last() {
            let factor = if prev > 0.0 { d / prev } else { 0.0 };
            log.push(factor);
            let n = log.len();
            if n >= 3 && log[n - 3..].iter().all(|&q| q > 0.9) {
                return Err(Error::NonContraction {
                    factors: [log[n - 3], log[n - 2], log[n - 1]],
                });
            }
        }
        distances.push(d);
        traj = next;
        if d <= threshold {
            return Ok(PicardState {
                regime: *regime,
                r,
                c_hat,
                horizon: t_max,
                run_time: run,
                dt: traj.dt,
                distances,
                contraction_log: log,
                max_norm,
                trajectory: traj,
            });
        }
    }
    let n = log.len();
    let tail = |i: usize| if n > i { log[n - 1 - i] } else { f64::NAN };
    Err(Error::NonContraction {
        factors: [tail(2), tail(1), tail(0)],
    })
}

/// Iterates the Picard map from the constant trajectory `f0` until the
/// sup-in-time distance of successive iterates falls below `tol R`,
/// checking the `2R` ball after every sweep.
pub fn solve_picard(
    f0: &SpectralField,
    regime: &WeightRegime,
    c_hat: f64,
    spec: &GridSpec,
    nodes: &NodeSet,
    cfg: &SolverConfig,
) -> Result<PicardState> {
    picard_iterate(f0, regime, c_hat, spec, nodes, cfg, RateChannel::Collision, cfg.tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub run_time: f64,
    /// `||<k>^l (f0 - g0)||_r`
    pub initial_distance: f64,
    /// `sup_t ||<k>^l (f(t) - g(t))||_r`
    pub sup_distance: f64,
    /// `2 ||f0 - g0|| + slack`
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Solves from `f0` and `g0` over the shorter of the two horizons and
/// compares the solutions with twice the initial distance. The slack
/// covers the Picard tolerance of both runs and a second-order time error.
/// Both runs are returned alongside the report.
pub fn continuity_in_data(
    f0: &SpectralField,
    g0: &SpectralField,
    regime: &WeightRegime,
    c_hat: f64,
    spec: &GridSpec,
    nodes: &NodeSet,
    cfg: &SolverConfig,
) -> Result<(ContinuityReport, PicardState, PicardState)> {
    let norm = |f: &SpectralField| weighted_lp_values(&f.sample_on(spec), spec, regime.l(), regime.r());
    let t = horizon(c_hat, norm(f0))?.min(horizon(c_hat, norm(g0))?);
    let run_cfg = SolverConfig {
        horizon: Some(cfg.horizon.map_or(t, |h| h.min(t))),
        ..*cfg
    };
    let a = solve_picard(f0, regime, c_hat, spec, nodes, &run_cfg)?;
    let b = solve_picard(g0, regime, c_hat, spec, nodes, &run_cfg)?;
    let diff: Vec<f64> = f0.sample_on(spec).iter().zip(g0.sample_on(spec)).map(|(x, y)| x - y).collect();
    let initial = weighted_lp_values(&diff, spec, regime.l(), regime.r());
    let sup = a.trajectory.sup_distance(&b.trajectory, regime)?;
    let h = 1.0 / cfg.substeps as f64;
    let slack = cfg.tol * (a.r + b.r) + h * h * initial;
    let bound = 2.0 * initial + slack;
    let report = ContinuityReport {
        run_time: a.run_time,
        initial_distance: initial,
        sup_distance: sup,
        bound,
        slack,
        holds: sup <= bound,
    };
    Ok((report, a, b))
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(Error::NegativeInitialData { min });
    }
    Ok(())
}

/// Grid-sampled initial data used by the bracket.
fn grid_data(f0: &SpectralField, spec: &GridSpec) -> Result<SpectralField> {
    let values = f0.sample_on(spec);
    check_nonnegative(&values)?;
    Ok(SpectralField::grid(GridField::from_values(*spec, values)?))
}

/// Picard solution of the gain-only problem `df/dt = Q+[f]` from the
/// grid samples of `f0`, iterated to `gain_tol`.
pub fn ks_gain_solve(
    f0: &SpectralField,
    regime: &WeightRegime,
    c_hat: f64,
    spec: &GridSpec,
    nodes: &NodeSet,
    cfg: &SolverConfig,
) -> Result<PicardState> {
    let g = grid_data(f0, spec)?;
    picard_iterate(&g, regime, c_hat, spec, nodes, cfg, RateChannel::Gain, cfg.gain_tol)
}

#[derive(Debug, Clone)]
pub struct KSBracket {
    pub lower: Trajectory,
    pub upper: Trajectory,
    pub n: usize,
    /// `sup_t ||<k>^l (u_n - l_n)||_r`
    pub gap: f64,
    /// `max u_0`, the scale of the nesting tolerance.
    pub scale: f64,
}

/// `l_0 = 0`, `u_0 = gain` on the time grid of `gain`.
pub fn ks_init(gain: &Trajectory, regime: &WeightRegime) -> Result<KSBracket> {
    let upper = Trajectory::from_values(gain.spec(), gain.dt(), (0..gain.len()).map(|i| gain.values(i)).collect())?;
    let lower = Trajectory::from_values(gain.spec(), gain.dt(), vec![vec![0.0; gain.spec().len()]; gain.len()])?;
    let gap = upper.sup_distance(&lower, regime)?;
    let scale = upper.max_abs();
    Ok(KSBracket {
        lower,
        upper,
        n: 0,
        gap,
        scale,
    })
}

/// `e^{-A(t_i)} f0 + int_0^{t_i} q(s) e^{-(A(t_i) - A(s))} ds` with
/// `A = int_0^t rate`, every integral by the trapezoid rule.
fn duhamel(f0: &[f64], gain: &[Vec<f64>], rate: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let a = cumulative_trapezoid(rate, dt);
    let n = gain.len();
    (0..n)
        .map(|i| {
            (0..f0.len())
                .map(|x| {
                    let ai = a[i][x];
                    let mut v = exp(-ai) * f0[x];
                    for j in 0..=i {
                        let w = if i == 0 {
                            0.0
                        } else if j == 0 || j == i {
                            0.5 * dt
                        } else {
                            dt
                        };
                        if w > 0.0 {
                            v += w * gain[j][x] * exp(-(ai - a[j][x]));
                        }
                    }
                    v
                })
                .collect()
        })
        .collect()
}

fn channels(traj: &Trajectory, nodes: &NodeSet) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut g = Vec::with_capacity(traj.len());
    let mut r = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let (a, b) = gain_and_frequency_on_grid(&traj.snapshot(i), &traj.spec, nodes);
        g.push(a);
        r.push(b);
    }
    (g, r)
}

fn max_excess(lo: &Trajectory, hi: &Trajectory) -> f64 {
    (0..lo.len())
        .flat_map(|i| lo.increments[i].iter().zip(&hi.increments[i]).map(|(a, b)| a - b))
        .fold(0.0_f64, f64::max)
}

/// One step of the monotone scheme: the new lower solution uses `Q+[l_n]`
/// and `R[u_n]`, the new upper one `Q+[u_n]` and `R[l_n]`.
pub fn ks_step(
    bracket: &KSBracket,
    f0_values: &[f64],
    regime: &WeightRegime,
    nodes: &NodeSet,
    nesting_tol: f64,
) -> Result<KSBracket> {
    let dt = bracket.lower.dt();
    let (gain_l, freq_l) = channels(&bracket.lower, nodes);
    let (gain_u, freq_u) = channels(&bracket.upper, nodes);
    let spec = *bracket.lower.spec();
    let lower = Trajectory::from_values(&spec, dt, duhamel(f0_values, &gain_l, &freq_u, dt))?;
    let upper = Trajectory::from_values(&spec, dt, duhamel(f0_values, &gain_u, &freq_l, dt))?;
    let tolerance = nesting_tol * bracket.scale.max(f64::MIN_POSITIVE);
    let excess = max_excess(&bracket.lower, &lower)
        .max(max_excess(&lower, &upper))
        .max(max_excess(&upper, &bracket.upper));
    if excess > tolerance {
        return Err(Error::NestingViolation {
            step: bracket.n + 1,
            excess,
            tolerance,
        });
    }
    let gap = upper.sup_distance(&lower, regime)?;
    Ok(KSBracket {
        lower,
        upper,
        n: bracket.n + 1,
        gap,
        scale: bracket.scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityCertificate {
    pub min: f64,
    pub scale: f64,
    /// `-1e-12 scale`
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsSolution {
    pub r: f64,
    pub horizon: f64,
    pub run_time: f64,
    pub gain_iterations: usize,
    /// Gap after each step, starting with the initial bracket.
    pub gaps: Vec<f64>,
    /// Largest nesting excess accepted along the way.
    pub certificate: PositivityCertificate,
    #[serde(skip)]
    pub bracket: KSBracket,
    /// `(l_n + u_n) / 2`.
    #[serde(skip)]
    pub limit: Trajectory,
}

impl KsSolution {
    pub fn gap_is_monotone(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Seeds the bracket with the gain-only solution and steps until the gap
/// drops below `ks_tol R`. A gap that shrinks by less than 1% for ten
/// steps in a row is reported as a stall.
pub fn ks_solve(
    f0: &SpectralField,
    regime: &WeightRegime,
    c_hat: f64,
    spec: &GridSpec,
    nodes: &NodeSet,
    cfg: &SolverConfig,
) -> Result<KsSolution> {
    let gain = ks_gain_solve(f0, regime, c_hat, spec, nodes, cfg)?;
    let f0_values = f0.sample_on(spec);
    let mut bracket = ks_init(&gain.trajectory, regime)?;
    let mut gaps = vec![bracket.gap];
    let target = cfg.ks_tol * gain.r;
    let mut slow = 0;
    while bracket.gap > target {
        if bracket.n >= cfg.ks_max_steps {
            return Err(Error::Stall {
                steps: bracket.n,
                gap: bracket.gap,
            });
        }
        let next = ks_step(&bracket, &f0_values, regime, nodes, cfg.nesting_tol)?;
        slow = if next.gap > 0.99 * bracket.gap { slow + 1 } else { 0 };
        gaps.push(next.gap);
        bracket = next;
        if slow >= 10 {
            return Err(Error::Stall {
                steps: bracket.n,
                gap: bracket.gap,
            });
        }
    }
    let mid: Vec<Vec<f64>> = (0..bracket.lower.len())
        .map(|i| {
            bracket
                .lower
                .values(i)
                .iter()
                .zip(bracket.upper.values(i))
                .map(|(a, b)| 0.5 * (a + b))
                .collect()
        })
        .collect();
    let limit = Trajectory::from_values(spec, bracket.lower.dt(), mid)?;
    let min = limit.min_value();
    let scale = bracket.scale;
    let threshold = -1e-12 * scale;
    Ok(KsSolution {
        r: gain.r,
        horizon: gain.horizon,
        run_time: gain.run_time,
        gain_iterations: gain.iterations(),
        gaps,
        certificate: PositivityCertificate {
            min,
            scale,
            threshold,
            holds: min >= threshold,
        },
        bracket,
        limit,
    })
}
