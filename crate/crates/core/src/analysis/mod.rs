//! Numerical certificates for the kinetic toolbox.
//!
//! Each check evaluates both sides of an estimate on sampled inputs and
//! reports the worst ratio. Where the constant can be computed exactly (for
//! instance after a Bobylev change of variables) the report also counts
//! violations against it; otherwise the declared constant is the measured one.

mod averaging;
mod change_of_variables;
mod precollisional;
mod suites;
mod trilinear;

pub use averaging::*;
pub use change_of_variables::*;
pub use precollisional::*;
pub use suites::*;
pub use trilinear::*;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::math::Vec3;

/// The sample at which a report attains its worst ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleConfig {
    pub k: Vec3,
    pub k1: Option<Vec3>,
    pub energy: Option<f64>,
}

impl SampleConfig {
    pub fn probe(k: Vec3) -> Self {
        SampleConfig {
            k,
            k1: None,
            energy: None,
        }
    }

    pub fn pair(k: Vec3, k1: Vec3) -> Self {
        SampleConfig {
            k,
            k1: Some(k1),
            energy: Some(k.norm_sq() + k1.norm_sq()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lemma_id: String,
    pub parameters: BTreeMap<String, f64>,
    pub n_samples: usize,
    /// `max LHS / RHS` over the samples, with the constant stripped from RHS.
    pub worst_ratio: f64,
    /// Samples whose ratio exceeds `declared_constant (1 + tolerance)`.
    pub violation_count: usize,
    pub config_at_worst: Option<SampleConfig>,
    pub declared_constant: f64,
    pub tolerance: f64,
    /// Log-log slope of the per-bin worst ratio against `1 + E`.
    pub slope: Option<f64>,
    #[serde(skip)]
    ratios: Vec<f64>,
}

impl InequalityReport {
    pub(crate) fn build(
        lemma_id: &str,
        samples: Vec<(f64, SampleConfig)>,
        declared_constant: Option<f64>,
        tolerance: f64,
    ) -> Self {
        let mut worst = 0.0_f64;
        let mut at = None;
        for (r, cfg) in &samples {
            if !(r.is_finite()) || *r > worst {
                worst = if r.is_finite() { *r } else { f64::INFINITY };
                at = Some(*cfg);
                if !r.is_finite() {
                    break;
                }
            }
        }
        let ratios: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let declared = declared_constant.unwrap_or(worst);
        let mut report = InequalityReport {
            lemma_id: lemma_id.into(),
            parameters: BTreeMap::new(),
            n_samples: samples.len(),
            worst_ratio: worst,
            violation_count: 0,
            config_at_worst: at,
            declared_constant: declared,
            tolerance,
            slope: None,
            ratios,
        };
        report.violation_count = report.violations_against(declared);
        report
    }

    pub(crate) fn param(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.into(), value);
        self
    }

    /// Violations if the constant were `c`.
    pub fn violations_against(&self, c: f64) -> usize {
        self.ratios
            .iter()
            .filter(|r| !r.is_finite() || **r > c * (1.0 + self.tolerance))
            .count()
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn passed(&self) -> bool {
        self.worst_ratio.is_finite() && self.violation_count == 0
    }
}

pub(crate) fn gaussian_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.sample::<f64, _>(StandardNormal) * scale,
        rng.sample::<f64, _>(StandardNormal) * scale,
        rng.sample::<f64, _>(StandardNormal) * scale,
    )
}

/// Seeded sampler of pairs `(k, k1)`, each vector Gaussian with a scale
/// drawn from `scales`; pairs with `E > e_max` are redrawn.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PairSampler {
    pub seed: u64,
    pub n_samples: usize,
    pub scales: Vec<f64>,
    pub e_max: f64,
}

impl PairSampler {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        PairSampler {
            seed,
            n_samples,
            scales: alloc::vec![0.5, 2.0, 8.0, 32.0],
            e_max: 1e4,
        }
    }

    pub fn pairs(&self) -> Vec<(Vec3, Vec3)> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.n_samples);
        while out.len() < self.n_samples {
            let a = self.scales[rng.random_range(0..self.scales.len())];
            let b = self.scales[rng.random_range(0..self.scales.len())];
            let k = gaussian_vec(&mut rng, a);
            let k1 = gaussian_vec(&mut rng, b);
            if k.norm_sq() + k1.norm_sq() <= self.e_max {
                out.push((k, k1));
            }
        }
        out
    }
}

/// Least-squares slope of `ln(max ratio)` against `ln(1 + E)`, with the
/// maximum taken in `n_bins` equal bins of `ln(1 + E)`.
pub fn envelope_slope(samples: &[(f64, f64)], n_bins: usize) -> Option<f64> {
    let xmax = samples.iter().map(|s| crate::math::ln(1.0 + s.0)).fold(0.0_f64, f64::max);
    if n_bins == 0 || xmax <= 0.0 {
        return None;
    }
    let mut best: Vec<Option<(f64, f64)>> = alloc::vec![None; n_bins];
    for &(e, r) in samples {
        if !(r > 0.0 && r.is_finite()) {
            continue;
        }
        let x = crate::math::ln(1.0 + e);
        let b = (((x / xmax) * n_bins as f64) as usize).min(n_bins - 1);
        if best[b].is_none_or(|(_, rb)| r > rb) {
            best[b] = Some((x, r));
        }
    }
    let pts: Vec<(f64, f64)> = best.into_iter().flatten().map(|(x, r)| (x, crate::math::ln(r))).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law_envelope() {
        let samples: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let e = crate::math::powf(10.0, i as f64 / 50.0);
                (e, 3.0 * crate::math::powf(1.0 + e, 0.2))
            })
            .collect();
        let s = envelope_slope(&samples, 10).unwrap();
        assert!((s - 0.2).abs() < 1e-3, "{s}");
    }

    #[test]
    fn report_counts_violations() {
        let s = alloc::vec![
            (1.0, SampleConfig::probe(Vec3::ZERO)),
            (2.0, SampleConfig::probe(Vec3::new(1.0, 0.0, 0.0))),
        ];
        let r = InequalityReport::build("t", s, Some(1.5), 0.0);
        assert_eq!(r.violation_count, 1);
        assert_eq!(r.worst_ratio, 2.0);
        assert_eq!(r.config_at_worst.unwrap().k, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(r.violations_against(2.0), 0);
    }

    #[test]
    fn pair_sampler_respects_energy_cap() {
        let p = PairSampler::new(5, 500).pairs();
        assert_eq!(p.len(), 500);
        assert!(p.iter().all(|(a, b)| a.norm_sq() + b.norm_sq() <= 1e4));
        assert_eq!(p, PairSampler::new(5, 500).pairs());
    }
}
