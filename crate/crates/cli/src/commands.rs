use std::path::Path;

use entropic::dynamics::{evolve_psi, EvolveOptions};
use entropic::frames::{c_of_t, proper_time_residue, transform_state};
use entropic::verify::{
    check_density_equivalence, check_energy_covariance, check_entropy_shift, check_transition_invariance,
    equivalence_ladder, run_equivalence_experiment, EquivalenceOptions, EquivalenceOutcome, VerificationReport,
};
use entropic::walkers::{init_ensemble, run_coupled, CoupledOptions};
use log::info;
use serde::Serialize;

use crate::config::{CheckName, InitialSpec, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::io::{
    create_dir, rel, snapshot_name, write_json, write_snapshot, Manifest, Ndjson, SnapshotEntry, DISTANCE_SCHEMA,
    EVOLVE_LOG_SCHEMA, REPORT_SCHEMA, SHIFT_SCHEMA,
};

fn manifest(command: &str, s: &Scenario) -> Manifest {
    Manifest::new(command, &s.hash, s.config.seed, s.config.canonical())
}

fn evolve_options(s: &Scenario) -> EvolveOptions {
    EvolveOptions::new(s.config.run.dt, s.steps, s.config.run.method).with_snapshots(s.snapshot_stride)
}

fn finite(values: &[f64], what: &'static str) -> Result<(), CliError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::Numerical(entropic::Error::NonFinite(what)))
    }
}

#[derive(Serialize)]
struct StepRecord {
    schema: &'static str,
    step: usize,
    t: f64,
    norm: f64,
    energy: f64,
}

pub fn evolve(s: &Scenario, out: &Path) -> Result<Manifest, CliError> {
    let (_, log) = evolve_psi(&s.psi0, 0.0, &s.potential, &s.constants, &evolve_options(s))?;
    finite(&log.norms, "evolution norms")?;
    finite(&log.energies, "evolution energies")?;
    let mut m = manifest("evolve", s);
    create_dir(&out.join("snapshots"))?;
    for (i, snap) in log.snapshots.iter().enumerate() {
        let file = snapshot_name(i);
        write_snapshot(&out.join(&file), &snap.state()?)?;
        m.snapshots.push(SnapshotEntry {
            step: snap.step,
            time: snap.time,
            file: rel(&file),
        });
    }
    let mut series = Ndjson::create(&out.join("log.ndjson"))?;
    for (n, ((&t, &norm), &energy)) in log.times.iter().zip(&log.norms).zip(&log.energies).enumerate() {
        series.record(&StepRecord {
            schema: EVOLVE_LOG_SCHEMA,
            step: n,
            t,
            norm,
            energy,
        })?;
    }
    series.finish()?;
    m.files.push("log.ndjson".into());
    let e0 = log.energies[0];
    let drift = log.energies.iter().map(|e| (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    m.summary("steps", s.steps);
    m.summary("final_norm", *log.norms.last().expect("log has entries"));
    m.summary("max_relative_energy_drift", drift);
    m.summary("exceeds_accuracy_limit", log.exceeds_accuracy_limit);
    info!("evolved {} steps, {} snapshots", s.steps, log.snapshots.len());
    Ok(m)
}

#[derive(Serialize)]
struct DistanceLine {
    schema: &'static str,
    step: usize,
    t: f64,
    l1: f64,
    held: u64,
}

pub fn sample(s: &Scenario, out: &Path) -> Result<Manifest, CliError> {
    let w = s
        .config
        .walkers
        .ok_or_else(|| CliError::Config("walkers: section missing".into()))?;
    let opts = CoupledOptions {
        evolve: EvolveOptions::new(s.config.run.dt, s.steps, s.config.run.method),
        walkers: w.count,
        seed: s.config.seed,
        record_stride: w.record_stride,
    };
    let initial = init_ensemble(&s.psi0.norm_sqr(), w.count, s.config.seed)?;
    let run = run_coupled(&s.psi0, 0.0, &s.potential, &s.constants, &opts)?;
    finite(&run.distances.iter().map(|d| d.l1).collect::<Vec<_>>(), "histogram distances")?;
    let mut m = manifest("sample", s);
    create_dir(&out.join("walkers"))?;
    for (name, ensemble) in [("walkers/initial.csv", &initial), ("walkers/final.csv", &run.ensemble)] {
        let file = std::fs::File::create(out.join(name))?;
        ensemble.write_csv(std::io::BufWriter::new(file))?;
        m.files.push(name.into());
    }
    let mut series = Ndjson::create(&out.join("distances.ndjson"))?;
    for d in &run.distances {
        series.record(&DistanceLine {
            schema: DISTANCE_SCHEMA,
            step: d.step,
            t: d.time,
            l1: d.l1,
            held: d.held,
        })?;
    }
    series.finish()?;
    m.files.push("distances.ndjson".into());
    m.summary("walkers", w.count);
    m.summary("final_l1", run.final_distance());
    m.summary("held_steps", run.ensemble.held);
    info!("sampled {} walkers, final L1 {:.4}", w.count, run.final_distance());
    Ok(m)
}

#[derive(Serialize)]
struct ShiftLine {
    schema: &'static str,
    step: usize,
    t: f64,
    xi: Vec<f64>,
    xi_dot: Vec<f64>,
    c: f64,
    /// `(m/ħ)ξ̇`, the gradient of the entropy shift.
    linear: Vec<f64>,
    /// `(m/ħ)c`, its constant part.
    constant: f64,
}

/// Transforms the snapshots of an `evolve` run directory into the frame of
/// the configured trajectory.
pub fn transform(s: &Scenario, run_dir: &Path, out: &Path) -> Result<Manifest, CliError> {
    let source = Manifest::load(run_dir)?;
    if source.command != "evolve" {
        return Err(CliError::Config(format!(
            "{} holds a `{}` run, not an evolution",
            run_dir.display(),
            source.command
        )));
    }
    let source_config = ScenarioConfig::from_toml(&source.config)?;
    if source_config.hash() != source.config_hash {
        return Err(CliError::Config(format!("{}: config hash does not match", run_dir.display())));
    }
    let (grid, constants) = source_config.grid_and_constants()?;
    if grid.dim() != s.grid.dim() {
        return Err(CliError::Config(format!(
            "trajectory is {}-dimensional but the run is {}-dimensional",
            s.grid.dim(),
            grid.dim()
        )));
    }
    let dim = grid.dim();
    let mut m = manifest("transform", s);
    m.summary("source_config_hash", source.config_hash.clone());
    create_dir(&out.join("snapshots"))?;
    let mut series = Ndjson::create(&out.join("shifts.ndjson"))?;
    for (i, entry) in source.snapshots.iter().enumerate() {
        let mut state = crate::io::read_snapshot(&run_dir.join(&entry.file), &grid)
            .map_err(|e| CliError::Config(format!("corrupt run directory: {e}")))?;
        state.time = entry.time;
        let moved = transform_state(&state, &s.trajectory, &s.gauge, &constants)?;
        let file = snapshot_name(i);
        write_snapshot(&out.join(&file), &moved)?;
        m.snapshots.push(SnapshotEntry {
            step: entry.step,
            time: entry.time,
            file: rel(&file),
        });
        let t = entry.time;
        let xi_dot = s.trajectory.xi_dot(t);
        let c = c_of_t(&s.trajectory, &s.gauge, t)?;
        let k = constants.phase_scale();
        series.record(&ShiftLine {
            schema: SHIFT_SCHEMA,
            step: entry.step,
            t,
            xi: s.trajectory.xi(t)[..dim].to_vec(),
            xi_dot: xi_dot[..dim].to_vec(),
            c,
            linear: xi_dot[..dim].iter().map(|v| k * v).collect(),
            constant: k * c,
        })?;
    }
    series.finish()?;
    m.files.push("shifts.ndjson".into());
    m.summary("snapshots", source.snapshots.len());
    info!("transformed {} snapshots", source.snapshots.len());
    Ok(m)
}

/// Residue at the configured trajectory and with its displacement halved.
fn proper_time_report(s: &Scenario, base: &Path) -> Result<VerificationReport, CliError> {
    if s.trajectory.is_rest() {
        return Err(CliError::Config("trajectory: the proper-time residue needs a moving frame".into()));
    }
    let pt = s.config.proper_time;
    let duration = pt.duration.unwrap_or(s.config.run.duration);
    let full = proper_time_residue(&s.trajectory, duration, pt.c_light)?;
    let (half_traj, _) = s.config.trajectory.build(s.grid.dim(), base, 0.5)?;
    let half = proper_time_residue(&half_traj, duration, pt.c_light)?;
    let ratio = full.rel_error / half.rel_error;
    Ok(VerificationReport::new("proper_time")
        .metric("first_order", full.first_order, None)
        .metric("exact", full.exact, None)
        .metric("rel_error", full.rel_error, None)
        .metric("halved_rel_error", half.rel_error, None)
        .metric("max_speed_over_c", s.trajectory.max_speed(duration) / pt.c_light, None)
        .metric("halving_ratio", ratio, Some(8.0))
        .metric_at_least("halving_ratio", ratio, 2.0))
}

fn provenance(report: VerificationReport, s: &Scenario) -> VerificationReport {
    report
        .with_provenance("schema", REPORT_SCHEMA)
        .with_provenance("config_hash", s.hash.clone())
        .with_provenance("seed", s.config.seed.to_string())
}

/// Re-holds `metric` to a configured tolerance.
fn retol(report: VerificationReport, metric: &str, tol: f64) -> VerificationReport {
    let value = report.metrics[metric];
    report.metric(metric, value, Some(tol))
}

pub fn proper_time(s: &Scenario, base: &Path, out: &Path) -> Result<Manifest, CliError> {
    let report = provenance(proper_time_report(s, base)?, s);
    let r = &report.metrics;
    println!(
        "first order {:.6e}  exact {:.6e}  relative error {:.4e}  (halved: {:.4e}, ratio {:.3})",
        r["first_order"], r["exact"], r["rel_error"], r["halved_rel_error"], r["halving_ratio"]
    );
    write_json(&out.join("proper_time.json"), &report)?;
    let mut m = manifest("proper-time", s);
    m.files.push("proper_time.json".into());
    m.summary("rel_error", r["rel_error"]);
    m.summary("halving_ratio", r["halving_ratio"]);
    Ok(m)
}

/// Runs the configured checks, writes one report each and prints a summary
/// table. Failed checks are returned alongside the manifest.
pub fn verify(s: &Scenario, base: &Path, out: &Path) -> Result<(Manifest, Vec<String>), CliError> {
    let spec = s
        .config
        .verify
        .clone()
        .ok_or_else(|| CliError::Config("verify.checks: section missing".into()))?;
    let tol = s.config.tolerances;
    let mut checks = spec.checks.clone();
    checks.sort();
    checks.dedup();
    let mut options = EquivalenceOptions::new(evolve_options(s));
    options.gauge = s.gauge;
    options.gravity_sign = if spec.negative_control { -1.0 } else { 1.0 };
    options.tolerance = tol.gravity_equivalence;
    let mut equivalence: Option<EquivalenceOutcome> = None;
    let mut experiment = || -> Result<EquivalenceOutcome, CliError> {
        if equivalence.is_none() {
            equivalence = Some(run_equivalence_experiment(
                &s.psi0,
                &s.potential,
                &s.trajectory,
                &s.constants,
                &options,
            )?);
        }
        Ok(equivalence.clone().expect("just computed"))
    };
    create_dir(&out.join("reports"))?;
    let mut m = manifest("verify", s);
    let mut failed = Vec::new();
    println!("{:<24} {:>6} {:>14}", "check", "result", "worst margin");
    for check in checks {
        let report = match check {
            CheckName::TransitionInvariance => {
                let r = check_transition_invariance(
                    &s.initial_state()?,
                    &s.trajectory,
                    s.config.run.dt,
                    spec.samples,
                    s.config.seed,
                    &s.constants,
                )?;
                retol(r, "max_relative_discrepancy", tol.transition_invariance)
            }
            CheckName::DensityEquivalence => {
                let e = experiment()?;
                check_density_equivalence(
                    &e.inertial.snapshots,
                    &e.transformed.snapshots,
                    &s.trajectory,
                    tol.density_equivalence,
                )?
            }
            CheckName::GravityEquivalence => experiment()?.report,
            CheckName::EntropyShift => {
                let e = experiment()?;
                check_entropy_shift(
                    &e.inertial.snapshots,
                    &e.transformed.snapshots,
                    &s.trajectory,
                    &s.constants,
                    tol.entropy_shift,
                )?
            }
            CheckName::EnergyCovariance => {
                let e = experiment()?;
                let strict = s.potential.is_static() && s.trajectory.is_rest();
                check_energy_covariance(&e.transformed, tol.energy_rate, strict.then_some(tol.energy_drift))?
            }
            CheckName::ProperTime => proper_time_report(s, base)?,
            CheckName::RefinementLadder => {
                if matches!(s.config.initial, InitialSpec::File { .. }) {
                    return Err(CliError::Config(
                        "initial: the refinement ladder needs an analytic initial state".into(),
                    ));
                }
                let make = |g: &entropic::field::Grid| {
                    s.config.initial.psi(g, &s.constants, base).expect("validated initial state")
                };
                let mut opts = options;
                opts.evolve.snapshot_stride = None;
                equivalence_ladder(
                    &s.grid,
                    &make,
                    &s.potential,
                    &s.trajectory,
                    &s.constants,
                    &opts,
                    spec.ladder_levels,
                )?
            }
        };
        let report = provenance(report, s);
        let file = format!("reports/{}.json", check.as_str());
        write_json(&out.join(&file), &report)?;
        m.files.push(file);
        println!(
            "{:<24} {:>6} {:>14.3e}",
            check.as_str(),
            if report.pass { "PASS" } else { "FAIL" },
            report.worst_margin()
        );
        m.summary(check.as_str(), report.pass);
        if !report.pass {
            failed.push(check.as_str().to_string());
        }
    }
    m.summary("negative_control", spec.negative_control);
    Ok((m, failed))
}
