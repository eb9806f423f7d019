//! The four subcommands. Each writes its outputs under the configured
//! directory and returns a JSON summary; violations surface as
//! [`CliError::Violations`] after the outputs are written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use wke_core::analysis::{
    averaging_rule, check_averaging, check_change_of_variables, check_precollisional, combined_constant,
    estimate_trilinear_constants, geometry_suite, jacobian_suite, random_family, CovTestFunction, PairSampler,
    PrecollisionalRule, PrecollisionalVariant,
};
use wke_core::collision::{eval_collision_field, Probes};
use wke_core::fields::{embedding_check, GridField, GridSpec, SpectralField, WeightRegime};
use wke_core::math::{cos, sin, sqrt, Vec3, PI};
use wke_core::quadrature::{MCSampler, Proposal};
use wke_core::solver::{ks_solve, solve_picard, Trajectory};

use crate::config::RunConfig;
use crate::error::CliError;

/// Column documentation printed by `--schema`.
pub const SCHEMA: &str = "\
moments.csv (evolve)
  time            time of the snapshot
  mass            sum of f h^3 over the grid
  energy          sum of |k|^2 f h^3 over the grid
  weighted_norm   ||<k>^l f||_{L^r} on the grid
gaps.csv (ks)
  step            bracket index n
  gap             sup_t ||<k>^l (u_n - l_n)||_{L^r}
equilibrium.csv (equilibrium)
  mu              Rayleigh-Jeans parameter of f = 1/(mu + |k|^2)
  kx,ky,kz        probe wavenumber
  abs_c           |C[f](k)|
  local_scale     |Q+[f](k)| + |Q-[f](k)|
  pass            1 if abs_c <= tolerance * local_scale
radial.csv (evolve, ks)
  rho             distance along the first axis
  value           f(rho e1)
";

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.io.out.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    write(path, &serde_json::to_string_pretty(v)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaEntry {
    pub lemma_id: String,
    pub passed: bool,
    pub violations: usize,
    pub report: Value,
}

fn entry(id: &str, violations: usize, report: Value) -> LemmaEntry {
    LemmaEntry {
        lemma_id: id.into(),
        passed: violations == 0,
        violations,
        report,
    }
}

/// Probe wavenumbers on a Fibonacci spiral with radii growing to `radius`.
pub fn spiral_probes(n: usize, radius: f64) -> Vec<Vec3> {
    let golden = PI * (3.0 - sqrt(5.0));
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rxy = sqrt(1.0 - z * z);
            let phi = golden * i as f64;
            let rho = radius * (i as f64 + 1.0) / n as f64;
            Vec3::new(rxy * cos(phi), rxy * sin(phi), z) * rho
        })
        .collect()
}

/// Runs every lemma check and writes `verify.json`.
pub fn run_verify(cfg: &RunConfig) -> Result<Value, CliError> {
    let v = &cfg.verify;
    let seed = cfg.quadrature.seed;
    let regime = cfg.regime()?;
    let mut entries = Vec::new();

    let geo = geometry_suite(seed, v.geometry_samples);
    let t = geo.tolerances;
    let identity_fail = [
        geo.momentum_defect <= t.conservation,
        geo.energy_defect <= t.conservation,
        geo.bobylev_identity <= t.identity,
        geo.angle_identity <= t.identity,
        geo.inverse_round_trip <= t.identity,
    ]
    .iter()
    .filter(|ok| !**ok)
    .count();
    let involution_fail = [geo.involution_round_trip <= t.involution, geo.angle_invariance <= t.involution]
        .iter()
        .filter(|ok| !**ok)
        .count();
    let geo_json = serde_json::to_value(&geo)?;
    entries.push(entry("geometric_bounds", geo.bound_violations, json!({
        "n_samples": geo.n_samples,
        "bound_violations": geo.bound_violations,
    })));
    entries.push(entry("geometric_identities", identity_fail, geo_json.clone()));
    entries.push(entry("involution", involution_fail, json!({
        "involution_round_trip": geo.involution_round_trip,
        "angle_invariance": geo.angle_invariance,
        "tolerance": t.involution,
    })));

    let jac = jacobian_suite(seed.wrapping_add(1), v.jacobian_samples);
    entries.push(entry("jacobian", usize::from(!jac.passed()), serde_json::to_value(&jac)?));

    let sampler = PairSampler::new(seed.wrapping_add(2), v.averaging_samples);
    let rule = averaging_rule();
    for coupled in [false, true] {
        let mut reports = Vec::new();
        let mut violations = 0;
        for &l in &v.averaging_l {
            let r = check_averaging(l, coupled, &sampler, &rule)?;
            violations += r.violation_count;
            reports.push(r);
        }
        let id = if coupled { "averaging_coupled" } else { "averaging" };
        entries.push(entry(id, violations, serde_json::to_value(&reports)?));
    }

    let h = SpectralField::gaussian(1.0, 0.8)?;
    let probes = spiral_probes(v.precollisional_probes, 2.0);
    let prule = PrecollisionalRule::default();
    let mut reports = Vec::new();
    let mut violations = 0;
    for variant in PrecollisionalVariant::ALL {
        let r = check_precollisional(variant, v.precollisional_alpha, v.precollisional_p, &h, &probes, &prule)?;
        violations += r.violation_count;
        reports.push(r);
    }
    entries.push(entry("precollisional", violations, serde_json::to_value(&reports)?));

    let f = CovTestFunction::gaussian(3.0)?;
    let mc = MCSampler {
        proposal: Proposal::Gaussian { scale: 1.0 },
        ..MCSampler::new(seed.wrapping_add(3), v.cov_samples)
    };
    let cov = check_change_of_variables(&f, &mc, cfg.grid()?.h())?;
    entries.push(entry("change_of_variables", usize::from(!cov.passed), serde_json::to_value(&cov)?));

    let spec = cfg.grid()?;
    let mut reports = Vec::new();
    let mut violations = 0;
    for psi in random_family(seed.wrapping_add(4), v.embedding_fields) {
        let r = embedding_check(&psi, &regime, &spec);
        violations += usize::from(!(r.chain_holds && r.holder_holds));
        reports.push(r);
    }
    entries.push(entry("embedding", violations, serde_json::to_value(&reports)?));

    let total: usize = entries.iter().map(|e| e.violations).sum();
    let summary = json!({
        "config": cfg,
        "lemmas": entries,
        "violations": total,
    });
    write_json(&out_dir(cfg)?.join("verify.json"), &summary)?;
    if total > 0 {
        return Err(CliError::Violations(total));
    }
    Ok(summary)
}

/// The configured constant, or twice the summed trilinear estimates over
/// a random family.
pub fn resolve_constant(cfg: &RunConfig, regime: &WeightRegime) -> Result<f64, CliError> {
    if let Some(c) = cfg.solver.c_hat {
        return Ok(c);
    }
    let nodes = cfg.nodes()?;
    let spec = GridSpec::new(cfg.solver.family_grid, 0.75 * cfg.grid.rho_max)?;
    let fam = random_family(cfg.quadrature.seed, cfg.solver.family_size);
    let cs = estimate_trilinear_constants(&[*regime], &fam, &spec, &nodes)?;
    Ok(combined_constant(&cs, regime)?)
}

fn moments(values: &[f64], spec: &GridSpec) -> (f64, f64) {
    let dv = spec.cell_volume();
    spec.nodes()
        .zip(values)
        .fold((0.0, 0.0), |(m, e), (k, v)| (m + v * dv, e + k.norm_sq() * v * dv))
}

fn write_checkpoints(dir: &Path, traj: &Trajectory, label: &str) -> Result<(), CliError> {
    let cdir = dir.join("checkpoints");
    fs::create_dir_all(&cdir).map_err(|e| CliError::io(&cdir, e))?;
    for (i, t) in traj.times().into_iter().enumerate() {
        let g = GridField::from_values(*traj.spec(), traj.values(i))?;
        crate::io::write_field_with_sidecar(&cdir.join(format!("{label}_{i:04}.bin")), &g, Some(t), label)?;
    }
    Ok(())
}

/// Picard evolution from `cfg.initial`.
pub fn run_evolve(cfg: &RunConfig) -> Result<Value, CliError> {
    let regime = cfg.regime()?;
    let spec = cfg.grid()?;
    let nodes = cfg.nodes()?;
    let f0 = cfg.initial.build()?;
    let c_hat = resolve_constant(cfg, &regime)?;
    let state = solve_picard(&f0, &regime, c_hat, &spec, &nodes, &cfg.solver())?;
    let dir = out_dir(cfg)?;
    let traj = &state.trajectory;
    let norms = traj.norms(&regime);
    let mut csv = String::from("time,mass,energy,weighted_norm\n");
    for (i, t) in traj.times().into_iter().enumerate() {
        let (m, e) = moments(&traj.values(i), &spec);
        writeln!(csv, "{t:e},{m:e},{e:e},{:e}", norms[i]).expect("string write");
    }
    write(&dir.join("moments.csv"), &csv)?;
    if cfg.io.checkpoint {
        write_checkpoints(&dir, traj, "f")?;
    }
    let last = traj.snapshot(traj.len() - 1);
    write(&dir.join("radial.csv"), &crate::io::radial_slice_csv(&last, spec.rho_max, 4 * spec.n))?;
    let summary = json!({
        "config": cfg,
        "state": state,
        "radius_bound": 2.0 * state.r,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Kaniel-Shinbrot bracket from `cfg.initial`.
pub fn run_ks(cfg: &RunConfig) -> Result<Value, CliError> {
    let regime = cfg.regime()?;
    let spec = cfg.grid()?;
    let nodes = cfg.nodes()?;
    let f0 = cfg.initial.build()?;
    let c_hat = resolve_constant(cfg, &regime)?;
    let sol = ks_solve(&f0, &regime, c_hat, &spec, &nodes, &cfg.solver())?;
    let dir = out_dir(cfg)?;
    let mut csv = String::from("step,gap\n");
    for (i, g) in sol.gaps.iter().enumerate() {
        writeln!(csv, "{i},{g:e}").expect("string write");
    }
    write(&dir.join("gaps.csv"), &csv)?;
    write_json(&dir.join("certificate.json"), &sol.certificate)?;
    let n = sol.limit.len() - 1;
    let last = GridField::from_values(spec, sol.limit.values(n))?;
    crate::io::write_field_with_sidecar(&dir.join("final.bin"), &last, Some(sol.run_time), "bracket limit")?;
    write(
        &dir.join("radial.csv"),
        &crate::io::radial_slice_csv(&SpectralField::grid(last), spec.rho_max, 4 * spec.n),
    )?;
    let summary = json!({
        "config": cfg,
        "c_hat": c_hat,
        "solution": sol,
        "gap_monotone": sol.gap_is_monotone(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    if !sol.certificate.holds {
        return Err(CliError::Violations(1));
    }
    Ok(summary)
}

/// `|C[f]|` for Rayleigh-Jeans spectra at spiral probes.
pub fn run_equilibrium(cfg: &RunConfig) -> Result<Value, CliError> {
    let eq = &cfg.equilibrium;
    let nodes = cfg.nodes()?;
    let probes = Probes::Points(spiral_probes(eq.probes, 0.5 * cfg.grid.rho_max));
    let mut csv = String::from("mu,kx,ky,kz,abs_c,local_scale,pass\n");
    let mut fails = 0;
    let mut worst = 0.0_f64;
    let mut fields = Vec::new();
    for &mu in &eq.mu {
        fields.push((mu, SpectralField::rayleigh_jeans(mu)?));
    }
    for (mu, f) in fields {
        for b in eval_collision_field(&f, &probes, &nodes) {
            let scale = b.local_scale();
            let c = b.c.value.abs();
            let ok = c <= eq.tolerance * scale;
            fails += usize::from(!ok);
            if scale > 0.0 {
                worst = worst.max(c / scale);
            }
            let [x, y, z] = b.k.0;
            writeln!(csv, "{mu:e},{x:e},{y:e},{z:e},{c:e},{scale:e},{}", u8::from(ok)).expect("string write");
        }
    }
    let dir = out_dir(cfg)?;
    write(&dir.join("equilibrium.csv"), &csv)?;
    let summary = json!({
        "config": cfg,
        "worst_relative_residual": worst,
        "failures": fails,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    if fails > 0 {
        return Err(CliError::Violations(fails));
    }
    Ok(summary)
}
