//! Energy audit: violation of `‖u(t)‖² + 2∫₀ᵗ‖u‖²_{H^Λ} ≤ ‖u₀‖²` and its
//! behaviour under step halving.

use serde::{Deserialize, Serialize};

use super::{over_replicas, Cell, ExperimentReport, InitialCondition, Statistic, Verdict};
use crate::dynamics::{integrate, solve_limit, CutoffParams, EquationMode, Integrator, SimConfig};
use crate::error::{Error, Result};
use crate::noise::BrownianDriver;
use crate::spectral::SpectralVelocity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyAuditParams {
    /// Configuration at the coarsest step.
    pub base: SimConfig,
    pub halvings: u32,
    pub replicas: usize,
    pub initial: InitialCondition,
    /// Accepted band for the ratio of violations at consecutive steps.
    pub ratio_band: (f64, f64),
    /// Tolerance for runs without noise.
    pub deterministic_tolerance: f64,
}

impl Default for EnergyAuditParams {
    fn default() -> Self {
        EnergyAuditParams {
            base: SimConfig {
                noise_n: 2,
                cutoff: CutoffParams { threshold: 5.0, delta: 0.2, lambda: 1.0 },
                dt: 2e-3,
                t_final: 0.1,
                ..SimConfig::default()
            },
            halvings: 3,
            replicas: 32,
            initial: InitialCondition { kmax: 2.0, ..InitialCondition::default() },
            ratio_band: (1.5, 2.5),
            deterministic_tolerance: 1e-10,
        }
    }
}

/// Per-replica audit curves `‖u‖² + 2∫‖u‖²_{H^Λ} − ‖u₀‖²`, raw and with the
/// transport-energy fluctuation removed.
struct Curves {
    raw: Vec<f64>,
    compensated: Vec<f64>,
}

fn audit_curves(
    cfg: &SimConfig,
    u0: &SpectralVelocity,
    replicas: usize,
    fine_dt: f64,
    substeps: u32,
) -> Result<Vec<Curves>> {
    let integ = Integrator::new(cfg, EquationMode::Stochastic)?.track_noise_energy(true);
    over_replicas(replicas, || integ.clone(), |integ, r| {
        let driver = BrownianDriver::coarsened(cfg.noise_n, fine_dt, substeps, cfg.seed, r)?;
        let rec = integ.run_with_driver(u0, None, Some(driver), |_, _, _| {})?;
        let e0 = rec.energy[0];
        let raw: Vec<f64> =
            rec.energy.iter().zip(&rec.dissipation).map(|(e, d)| e + 2.0 * d - e0).collect();
        let compensated =
            raw.iter().zip(&rec.noise_energy_fluctuation).map(|(a, f)| a - f).collect();
        Ok(Curves { raw, compensated })
    })
}

/// Replica mean of `curve` at its maximizing time, with the batch-means
/// error of the values at that time; clamped below at zero.
fn mean_violation(curves: &[Curves], pick: impl Fn(&Curves) -> &[f64]) -> Statistic {
    let len = pick(&curves[0]).len();
    let r = curves.len() as f64;
    let mean_curve: Vec<f64> =
        (0..len).map(|j| curves.iter().map(|c| pick(c)[j]).sum::<f64>() / r).collect();
    let (jmax, _) = mean_curve
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let at: Vec<f64> = curves.iter().map(|c| pick(c)[jmax]).collect();
    let mut s = Statistic::batch_means(&at);
    s.mean = s.mean.max(0.0);
    s
}

pub fn run_energy_audit(params: &EnergyAuditParams) -> Result<ExperimentReport> {
    if params.halvings == 0 || params.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one halving and one replica".into()));
    }
    let base = &params.base;
    let u0 = params.initial.build(base.galerkin_m);
    let e0 = u0.l2_norm_sq();
    let fine_dt = base.dt / 2f64.powi(params.halvings as i32);
    let mut report = ExperimentReport::new("energy-audit", params);

    let mut violations = Vec::new();
    for h in 0..=params.halvings {
        let dt = base.dt / 2f64.powi(h as i32);
        let cfg = SimConfig { dt, t_final: base.steps() as f64 * base.dt, ..base.clone() };
        let curves = audit_curves(&cfg, &u0, params.replicas, fine_dt, 1 << (params.halvings - h))?;
        let comp = mean_violation(&curves, |c| &c.compensated);
        let raw = mean_violation(&curves, |c| &c.raw);
        let c_audit = comp.mean / (e0 * dt);
        report.cells.push(
            Cell::new(&[("dt", dt)])
                .with("violation", comp)
                .with("violation_uncompensated", raw)
                .with("c_audit", Statistic::exact(c_audit)),
        );
        violations.push((dt, comp));
    }

    let (lo, hi) = params.ratio_band;
    let mut ok = true;
    let mut lines = Vec::new();
    for w in violations.windows(2) {
        let ratio = w[0].1.mean / w[1].1.mean;
        ok &= ratio >= lo && ratio <= hi;
        lines.push(format!(
            "dt={:.3e}: {:.4e} ± {:.2e} → {:.4e} ± {:.2e} (ratio {ratio:.3})",
            w[0].0, w[0].1.mean, w[0].1.std_error, w[1].1.mean, w[1].1.std_error
        ));
    }
    report.verdicts.push(Verdict::new(
        "violation_halves_with_dt",
        ok,
        format!("ratios within [{lo}, {hi}]: {}", lines.join("; ")),
    ));

    // Runs without noise: the limit equation and the stochastic equation at ν = 0.
    let limit = solve_limit(&u0, base)?.energy_excess().max(0.0);
    let quiet = SimConfig { nu: 0.0, ..base.clone() };
    let inviscid = integrate(&u0, &quiet, EquationMode::Stochastic, None, 0, |_, _, _| {})?
        .energy_excess()
        .max(0.0);
    let tol = params.deterministic_tolerance;
    report.cells.push(
        Cell::new(&[("dt", base.dt), ("deterministic", 1.0)])
            .with("violation_limit", Statistic::exact(limit))
            .with("violation_noise_off", Statistic::exact(inviscid)),
    );
    report.verdicts.push(Verdict::new(
        "deterministic_violation",
        limit <= tol && inviscid <= tol,
        format!("limit {limit:.3e}, noise off {inviscid:.3e} (tolerance {tol:.0e})"),
    ));

    let zero = SpectralVelocity::zeros(base.galerkin_m);
    let mut stays_zero = true;
    integrate(&zero, base, EquationMode::Stochastic, None, 0, |_, _, u| stays_zero &= u.is_zero())?;
    report.verdicts.push(Verdict::new(
        "zero_stays_zero",
        stays_zero,
        "u₀ = 0 keeps zero energy at every step".into(),
    ));
    Ok(report)
}
