//! Stability of the skeleton equation under perturbations of the initial
//! field and of the control.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{over_replicas, Cell, ExperimentReport, InitialCondition, Statistic, Verdict};
use crate::dynamics::{
    rate_function_of_control, solve_limit, solve_skeleton, CutoffParams, EquationMode, Integrator,
    SimConfig, SkeletonControl,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::spectral::{SobolevIndex, SpectralVelocity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonStabilityParams {
    pub base: SimConfig,
    pub initial: InitialCondition,
    /// L² norm of the base control samples.
    pub control_amplitude: f64,
    /// Largest `|k|` of the controls and perturbations.
    pub control_kmax: f64,
    /// Number of joint `(u₀, g)` perturbation pairs.
    pub pairs: usize,
    /// Perturbation sizes spread log-uniformly over this range.
    pub scale_range: (f64, f64),
    /// Sizes for the initial-field-only perturbations.
    pub u0_scales: Vec<f64>,
    /// Size of the control-only perturbations.
    pub control_scale: f64,
    /// Bound on max/min of the stability ratios within a set.
    pub spread_bound: f64,
    /// Bound on the relative change of a ratio when dt is halved.
    pub refinement_tolerance: f64,
}

impl Default for SkeletonStabilityParams {
    fn default() -> Self {
        SkeletonStabilityParams {
            base: SimConfig {
                cutoff: CutoffParams { threshold: 10.0, delta: 0.0, lambda: 1.8 },
                noise_r: 0.8,
                ..SimConfig::default()
            },
            initial: InitialCondition::default(),
            control_amplitude: 1.0,
            control_kmax: 3.0,
            pairs: 10,
            scale_range: (1e-1, 1e-3),
            u0_scales: vec![1e-1, 1e-2, 1e-3],
            control_scale: 1e-1,
            spread_bound: 10.0,
            refinement_tolerance: 0.1,
        }
    }
}

/// Control `cos(2πt/T)·g_a + sin(2πt/T)·g_b` with `‖g_a‖ = ‖g_b‖ = amplitude`.
pub fn random_control(
    cfg: &SimConfig,
    kmax: f64,
    amplitude: f64,
    stream_index: u64,
) -> Result<SkeletonControl> {
    let mut rng = stream(cfg.seed, stream_index, Purpose::Control);
    let m = cfg.galerkin_m;
    let ga = SpectralVelocity::random(m, kmax, 1.0, amplitude, &mut rng);
    let gb = SpectralVelocity::random(m, kmax, 1.0, amplitude, &mut rng);
    let steps = cfg.steps();
    let samples = (0..steps)
        .map(|j| {
            let phase = 2.0 * PI * j as f64 * cfg.dt / cfg.t_final;
            let mut g = ga.scaled(phase.cos());
            g.axpy(phase.sin(), &gb);
            g
        })
        .collect();
    SkeletonControl::new(samples, cfg.dt, SobolevIndex(cfg.noise_r))
}

fn perturbation(cfg: &SimConfig, kmax: f64, size: f64, stream_index: u64) -> SpectralVelocity {
    let mut rng = stream(cfg.seed, stream_index, Purpose::Perturbation);
    SpectralVelocity::random(cfg.galerkin_m, kmax, 1.0, size, &mut rng)
}

/// Inputs of one perturbed run.
struct Job {
    u0: SpectralVelocity,
    g: SkeletonControl,
}

/// Both sides of the stability display for one perturbed run.
#[derive(Debug, Clone, Copy)]
struct Sides {
    lhs: f64,
    rhs: f64,
}

impl Sides {
    fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

fn reference_states(
    integ: &mut Integrator,
    u0: &SpectralVelocity,
    g: &SkeletonControl,
) -> Result<Vec<SpectralVelocity>> {
    let mut states = Vec::new();
    integ.run(u0, Some(g), 0, |_, _, u| states.push(u.clone()))?;
    Ok(states)
}

/// Mode weight `w` with `∫₀^dt ‖e^{tL}v‖²_{H^Λ} = Σ w|v̂|²` for the linear
/// skeleton operator `L = −(−Δ)^Λ + (3ν/5)Δ`.
fn dissipation_weight(cfg: &SimConfig) -> impl Fn(i64) -> f64 {
    let (lambda, kappa, dt) = (cfg.cutoff.lambda, 0.6 * cfg.nu, cfg.dt);
    move |norm_sq: i64| {
        let q = 4.0 * PI * PI * norm_sq as f64;
        let h = q.powf(lambda);
        let a = h + kappa * q;
        if a == 0.0 {
            return 0.0;
        }
        (h * (-(-2.0 * a * dt).exp_m1()) / (2.0 * a)).sqrt()
    }
}

fn compare(
    integ: &Integrator,
    reference: &[SpectralVelocity],
    u0: &SpectralVelocity,
    g0: &SkeletonControl,
    jobs: &[Job],
) -> Result<Vec<Sides>> {
    let cfg = integ.config().clone();
    let weight = dissipation_weight(&cfg);
    let steps = cfg.steps();
    over_replicas(jobs.len(), || integ.clone(), |integ, i| {
        let job = &jobs[i as usize];
        let (mut sup, mut l2) = (0.0f64, 0.0);
        integ.run(&job.u0, Some(&job.g), 0, |j, _, u| {
            let d = u - &reference[j];
            sup = sup.max(d.l2_norm());
            if j < steps {
                l2 += d.apply_symbol(&weight).l2_norm_sq();
            }
        })?;
        let rhs = (&job.u0 - u0).l2_norm() + job.u0.l2_norm() * job.g.distance(g0);
        Ok(Sides { lhs: sup + l2.sqrt(), rhs })
    })
}

fn spread(sides: &[Sides]) -> (f64, f64, f64) {
    let ratios: Vec<f64> = sides.iter().map(Sides::ratio).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max, max / min)
}

pub fn run_skeleton_stability(params: &SkeletonStabilityParams) -> Result<ExperimentReport> {
    let cfg = &params.base;
    cfg.validate(EquationMode::Skeleton)?;
    if params.pairs < 2 {
        return Err(Error::InvalidParameter("need at least two perturbation pairs".into()));
    }
    let kmax = params.control_kmax;
    let u0 = params.initial.build(cfg.galerkin_m);
    let g0 = random_control(cfg, kmax, params.control_amplitude, 0)?;
    let mut integ = Integrator::new(cfg, EquationMode::Skeleton)?;
    let reference = reference_states(&mut integ, &u0, &g0)?;
    let mut report = ExperimentReport::new("skeleton-stability", params);

    let (hi, lo) = params.scale_range;
    let scale = |i: usize| hi * (lo / hi).powf(i as f64 / (params.pairs - 1) as f64);
    let joint_job = |i: usize, cfg: &SimConfig, g0: &SkeletonControl| -> Result<Job> {
        let s = scale(i);
        let zeta = random_control(cfg, kmax, s, 1 + i as u64)?;
        let g = SkeletonControl::new(
            g0.samples().iter().zip(zeta.samples()).map(|(a, b)| a + b).collect(),
            cfg.dt,
            g0.r(),
        )?;
        Ok(Job { u0: &u0 + &perturbation(cfg, kmax, s, i as u64), g })
    };

    let joint: Vec<Job> = (0..params.pairs).map(|i| joint_job(i, cfg, &g0)).collect::<Result<_>>()?;
    let joint_sides = compare(&integ, &reference, &u0, &g0, &joint)?;
    let u0_jobs: Vec<Job> = params
        .u0_scales
        .iter()
        .enumerate()
        .map(|(i, &s)| Job {
            u0: &u0 + &perturbation(cfg, kmax, s, (params.pairs + i) as u64),
            g: g0.clone(),
        })
        .collect();
    let u0_sides = compare(&integ, &reference, &u0, &g0, &u0_jobs)?;
    let g_jobs: Vec<Job> = (0..params.pairs)
        .map(|i| {
            let zeta = random_control(cfg, kmax, params.control_scale, (1 + params.pairs + i) as u64)?;
            let g = SkeletonControl::new(
                g0.samples().iter().zip(zeta.samples()).map(|(a, b)| a + b).collect(),
                cfg.dt,
                g0.r(),
            )?;
            Ok(Job { u0: u0.clone(), g })
        })
        .collect::<Result<_>>()?;
    let g_sides = compare(&integ, &reference, &u0, &g0, &g_jobs)?;

    for (set, sides) in [("joint", &joint_sides), ("initial", &u0_sides), ("control", &g_sides)] {
        for (i, s) in sides.iter().enumerate() {
            report.cells.push(
                Cell::new(&[("set", set_code(set)), ("index", i as f64)])
                    .with("lhs", Statistic::exact(s.lhs))
                    .with("rhs", Statistic::exact(s.rhs))
                    .with("ratio", Statistic::exact(s.ratio())),
            );
        }
        let (min, max, spread) = spread(sides);
        report.verdicts.push(Verdict::new(
            &format!("{set}_ratio_spread"),
            spread <= params.spread_bound,
            format!(
                "{} {set} perturbations: LHS/RHS in [{min:.4e}, {max:.4e}], max/min {spread:.3} (bound {})",
                sides.len(),
                params.spread_bound
            ),
        ));
    }

    // The first joint pair again at half the step.
    let fine = SimConfig { dt: cfg.dt / 2.0, t_final: cfg.steps() as f64 * cfg.dt, ..cfg.clone() };
    let g0_fine = random_control(&fine, kmax, params.control_amplitude, 0)?;
    let mut integ_fine = Integrator::new(&fine, EquationMode::Skeleton)?;
    let reference_fine = reference_states(&mut integ_fine, &u0, &g0_fine)?;
    let fine_job = joint_job(0, &fine, &g0_fine)?;
    let fine_sides = compare(&integ_fine, &reference_fine, &u0, &g0_fine, &[fine_job])?;
    let change = (fine_sides[0].ratio() / joint_sides[0].ratio() - 1.0).abs();
    report.verdicts.push(Verdict::new(
        "stable_under_refinement",
        change <= params.refinement_tolerance,
        format!(
            "first pair ratio {:.4e} at dt={}, {:.4e} at dt={}; relative change {change:.3e}",
            joint_sides[0].ratio(),
            cfg.dt,
            fine_sides[0].ratio(),
            fine.dt
        ),
    ));

    let same = compare(&integ, &reference, &u0, &g0, &[Job { u0: u0.clone(), g: g0.clone() }])?;
    report.verdicts.push(Verdict::new(
        "identical_inputs",
        same[0].lhs == 0.0,
        format!("LHS for identical inputs: {:e}", same[0].lhs),
    ));

    let zero = SkeletonControl::zero(cfg.galerkin_m, cfg.steps(), cfg.dt, SobolevIndex(cfg.noise_r));
    let skel = solve_skeleton(&u0, &zero, cfg)?;
    let lim = solve_limit(&u0, cfg)?;
    let identical = skel == lim && skel.final_state == lim.final_state;
    report.verdicts.push(Verdict::new(
        "zero_control_is_limit",
        identical,
        "skeleton run with g ≡ 0 against the limit solver, compared bit for bit".into(),
    ));
    let cost = rate_function_of_control(&zero);
    report.verdicts.push(Verdict::new(
        "zero_control_cost",
        cost == 0.0,
        format!("cost of the zero control: {cost:e}"),
    ));
    Ok(report)
}

fn set_code(set: &str) -> f64 {
    match set {
        "joint" => 0.0,
        "initial" => 1.0,
        _ => 2.0,
    }
}
