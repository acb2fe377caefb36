//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use gmnse::dynamics::{integrate, EquationMode, SimConfig, SkeletonControl};
use gmnse::experiments::{
    random_control, run_corrector_decay, run_energy_audit, run_quantitative_rate, run_scaling_limit,
    run_skeleton_stability, CorrectorDecayParams, EnergyAuditParams, ExperimentReport,
    InitialCondition, RateParams, ScalingParams, SkeletonStabilityParams,
};
use gmnse::io::{emit_trajectory, load_snapshot, manifest_path, save_snapshot, RunManifest, Settings};
use gmnse::spectral::{SobolevIndex, SpectralVelocity};
use serde::Serialize;

use crate::RunArgs;

/// Largest `|k|` of random skeleton controls.
const CONTROL_KMAX: f64 = 3.0;

/// Runs `name`; `Ok(false)` means some verdict failed.
pub fn run(name: &str, args: &RunArgs) -> Result<bool> {
    let settings = settings(args)?;
    match name {
        "simulate" => trajectory(name, args, &settings, EquationMode::Stochastic),
        "limit" => trajectory(name, args, &settings, EquationMode::Limit),
        "skeleton" => trajectory(name, args, &settings, EquationMode::Skeleton),
        _ => experiment(name, args, &settings),
    }
}

/// Configuration file, then `GMNSE_*` variables, then flags.
fn settings(args: &RunArgs) -> Result<Settings> {
    let mut s = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    s.merge(&Settings::from_env()?);
    let mut flags = Settings::default();
    let pairs: [(&str, Option<String>); 11] = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("replicas", args.replicas.map(|v| v.to_string())),
        ("dt", args.dt.map(|v| v.to_string())),
        ("T", args.t_final.map(|v| v.to_string())),
        ("nu", args.nu.map(|v| v.to_string())),
        ("N", args.threshold.map(|v| v.to_string())),
        ("delta", args.delta.map(|v| v.to_string())),
        ("lambda", args.lambda.map(|v| v.to_string())),
        ("noise_n", args.noise_n.map(|v| v.to_string())),
        ("noise_r", args.noise_r.map(|v| v.to_string())),
        ("galerkin_m", args.galerkin_m.map(|v| v.to_string())),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            flags.set(key, &v)?;
        }
    }
    s.merge(&flags);
    Ok(s)
}

fn output(args: &RunArgs) -> Result<Box<dyn Write>> {
    Ok(match &args.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit_manifest(manifest: &RunManifest, args: &RunArgs) -> Result<()> {
    match &args.out {
        Some(out) => manifest.write(&manifest_path(out))?,
        None => eprintln!("{}", manifest.to_json()),
    }
    Ok(())
}

fn initial_condition(settings: &Settings) -> InitialCondition {
    let mut ic = InitialCondition::default();
    settings.apply_initial(&mut ic);
    ic
}

#[derive(Serialize)]
struct TrajectoryConfig<'a> {
    sim: &'a SimConfig,
    initial: Option<InitialCondition>,
    init_file: Option<&'a str>,
    replica: u64,
    control_amplitude: f64,
    control_kmax: f64,
}

fn trajectory(name: &str, args: &RunArgs, settings: &Settings, mode: EquationMode) -> Result<bool> {
    let mut cfg = match mode {
        EquationMode::Skeleton => SkeletonStabilityParams::default().base,
        _ => SimConfig::default(),
    };
    settings.apply_sim(&mut cfg, mode)?;
    let init_file = settings.text("init_file");
    let (u0, initial): (SpectralVelocity, _) = match init_file {
        Some(path) => (load_snapshot(path.as_ref())?, None),
        None => {
            let ic = initial_condition(settings);
            (ic.build(cfg.galerkin_m), Some(ic))
        }
    };
    let replica = settings.count("replicas").unwrap_or(0);
    let amplitude = settings.real("control_amplitude").unwrap_or(0.0);
    let control = match mode {
        EquationMode::Skeleton if amplitude != 0.0 => {
            Some(random_control(&cfg, CONTROL_KMAX, amplitude, 0)?)
        }
        EquationMode::Skeleton => {
            Some(SkeletonControl::zero(cfg.galerkin_m, cfg.steps(), cfg.dt, SobolevIndex(cfg.noise_r)))
        }
        _ => None,
    };
    let manifest = RunManifest::new(
        name,
        TrajectoryConfig {
            sim: &cfg,
            initial,
            init_file,
            replica,
            control_amplitude: amplitude,
            control_kmax: CONTROL_KMAX,
        },
        cfg.seed,
        Some(cfg.scheme.id()),
    );
    emit_manifest(&manifest, args)?;
    if let Some(g) = &control {
        eprintln!("control cost: {:.16e}", gmnse::dynamics::rate_function_of_control(g));
    }
    let record = integrate(&u0, &cfg, mode, control.as_ref(), replica, |_, _, _| {})?;
    let mut out = output(args)?;
    emit_trajectory(&record, &mut out)?;
    out.flush()?;
    if let (Some(path), Some(u)) = (&args.snapshot, &record.final_state) {
        save_snapshot(u, path)?;
    }
    Ok(true)
}

fn experiment(name: &str, args: &RunArgs, settings: &Settings) -> Result<bool> {
    let replicas = settings.count("replicas").map(|r| r as usize);
    let n_values = settings.list("n_values");
    let report: ExperimentReport = match name {
        "corrector-check" => {
            let mut p = CorrectorDecayParams::default();
            p.n_values = n_values.unwrap_or(p.n_values);
            p.r = settings.real("noise_r").unwrap_or(p.r);
            p.nu = settings.real("nu").unwrap_or(p.nu);
            p.b = settings.real("b").unwrap_or(p.b);
            p.alpha = settings.real("alpha").unwrap_or(p.alpha);
            settings.apply_initial(&mut p.phi);
            start(name, &p, p.phi.seed, None, args)?;
            run_corrector_decay(&p)?
        }
        "scaling-experiment" => {
            let mut p = ScalingParams::default();
            settings.apply_sim(&mut p.base, EquationMode::Stochastic)?;
            p.n_values = n_values.unwrap_or(p.n_values);
            p.replicas = replicas.unwrap_or(p.replicas);
            p.p = settings.real("p").unwrap_or(p.p);
            p.gamma = settings.real("gamma").unwrap_or(p.gamma);
            settings.apply_initial(&mut p.initial);
            start(name, &p, p.base.seed, Some(p.base.scheme.id()), args)?;
            run_scaling_limit(&p)?
        }
        "rate-experiment" => {
            let mut p = RateParams::default();
            settings.apply_sim(&mut p.base, EquationMode::Stochastic)?;
            p.n_values = n_values.unwrap_or(p.n_values);
            p.replicas = replicas.unwrap_or(p.replicas);
            p.dt_check = settings.flag("dt_check").unwrap_or(p.dt_check);
            settings.apply_initial(&mut p.initial);
            start(name, &p, p.base.seed, Some(p.base.scheme.id()), args)?;
            run_quantitative_rate(&p)?
        }
        "energy-audit" => {
            let mut p = EnergyAuditParams::default();
            settings.apply_sim(&mut p.base, EquationMode::Stochastic)?;
            p.replicas = replicas.unwrap_or(p.replicas);
            p.halvings = settings.count("halvings").map(|h| h as u32).unwrap_or(p.halvings);
            settings.apply_initial(&mut p.initial);
            start(name, &p, p.base.seed, Some(p.base.scheme.id()), args)?;
            run_energy_audit(&p)?
        }
        "skeleton-stability" => {
            let mut p = SkeletonStabilityParams::default();
            settings.apply_sim(&mut p.base, EquationMode::Skeleton)?;
            p.pairs = settings.count("pairs").map(|n| n as usize).unwrap_or(p.pairs);
            p.control_amplitude = settings.real("control_amplitude").unwrap_or(p.control_amplitude);
            settings.apply_initial(&mut p.initial);
            start(name, &p, p.base.seed, None, args)?;
            run_skeleton_stability(&p)?
        }
        other => anyhow::bail!("unknown subcommand {other}"),
    };
    let mut out = output(args)?;
    out.write_all(report.to_ndjson().as_bytes())?;
    out.flush()?;
    eprint!("{}", report.summary_table());
    Ok(report.passed())
}

fn start(name: &str, params: &impl Serialize, seed: u64, scheme: Option<&str>, args: &RunArgs) -> Result<()> {
    emit_manifest(&RunManifest::new(name, params, seed, scheme), args)
}
