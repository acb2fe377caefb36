//! Quantitative rate: the time-integrated `H^{1−δ}` error against the
//! predicted envelope `C·[n^{−2δ} + ε_n^{δ/5}]` at large viscosity.

use serde::{Deserialize, Serialize};

use super::{over_replicas, Cell, ExperimentReport, InitialCondition, Statistic, Verdict};
use crate::dynamics::{integrate, CutoffParams, EquationMode, Integrator, Scheme, SimConfig};
use crate::error::{Error, Result};
use crate::noise::{build_theta, BrownianDriver};
use crate::spectral::{SobolevIndex, SpectralVelocity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub base: SimConfig,
    pub n_values: Vec<u32>,
    pub replicas: usize,
    pub initial: InitialCondition,
    /// Upper bound on `ν^{−2}(1+N²)(1+‖u₀‖²_{H¹})`.
    pub viscosity_bound: f64,
    /// Repeat the smallest n at half the step as a discretization check.
    pub dt_check: bool,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams {
            base: SimConfig {
                nu: 8.0,
                cutoff: CutoffParams { threshold: 1.0, delta: 0.2, lambda: 1.0 },
                dt: 6.25e-5,
                t_final: 0.02,
                scheme: Scheme::ExponentialEuler,
                ..SimConfig::default()
            },
            n_values: vec![2, 4, 8, 16],
            replicas: 32,
            initial: InitialCondition { amplitude: 0.1, ..InitialCondition::default() },
            viscosity_bound: 0.1,
            dt_check: true,
        }
    }
}

/// `n^{−2δ} + ε_n^{δ/5}` with `ε_n = ‖θⁿ‖²_{ℓ∞}`.
pub fn rate_envelope(n: u32, r: f64, delta: f64) -> Result<f64> {
    let eps = build_theta(r, n)?.linf_norm().powi(2);
    Ok((n as f64).powf(-2.0 * delta) + eps.powf(delta / 5.0))
}

/// Per-replica `∫₀ᵀ‖uⁿ − ū‖²_{H^{1−δ}}` with the noise path of `BrownianDriver::new(n, dt/2)`
/// summed in pairs, so a run at half the step shares the path.
fn errors(
    cfg: &SimConfig,
    u0: &SpectralVelocity,
    limit: &[SpectralVelocity],
    replicas: usize,
    offset: u64,
    substeps: u32,
) -> Result<Vec<f64>> {
    let integ = Integrator::new(cfg, EquationMode::Stochastic)?;
    let s = SobolevIndex(1.0 - cfg.cutoff.delta);
    let stride = limit.len().saturating_sub(1) / cfg.steps().max(1);
    let fine_dt = cfg.dt / substeps as f64;
    over_replicas(replicas, || integ.clone(), |integ, r| {
        let driver = BrownianDriver::coarsened(cfg.noise_n, fine_dt, substeps, cfg.seed, offset + r)?;
        let mut total = 0.0;
        let steps = cfg.steps();
        integ.run_with_driver(u0, None, Some(driver), |j, _, u| {
            if j < steps {
                total += (u - &limit[j * stride]).sobolev_norm_sq(s) * cfg.dt;
            }
        })?;
        Ok(total)
    })
}

pub fn run_quantitative_rate(params: &RateParams) -> Result<ExperimentReport> {
    let base = &params.base;
    let cut = &base.cutoff;
    if cut.lambda != 1.0 || !(cut.delta > 0.0 && cut.delta < 0.25) {
        return Err(Error::Constraint(format!(
            "the rate experiment needs Λ = 1 and δ ∈ (0, 1/4), got Λ = {} and δ = {}",
            cut.lambda, cut.delta
        )));
    }
    if params.n_values.len() < 2 || params.replicas == 0 {
        return Err(Error::InvalidParameter("need at least two n values and one replica".into()));
    }
    let u0 = params.initial.build(base.galerkin_m);
    let h1 = u0.sobolev_norm_sq(SobolevIndex(1.0));
    let viscosity = base.nu.powi(-2) * (1.0 + cut.threshold.powi(2)) * (1.0 + h1);
    if !(viscosity <= params.viscosity_bound) {
        return Err(Error::Constraint(format!(
            "viscosity condition ν⁻²(1+N²)(1+‖u₀‖²_H¹) = {viscosity:.4} exceeds {}; increase nu",
            params.viscosity_bound
        )));
    }

    // Limit sampled at half the step, so both step sizes can use it.
    let fine = SimConfig { dt: base.dt / 2.0, t_final: base.steps() as f64 * base.dt, ..base.clone() };
    let mut limit = Vec::with_capacity(2 * base.steps() + 1);
    integrate(&u0, &fine, EquationMode::Limit, None, 0, |_, _, u| limit.push(u.clone()))?;

    let mut report = ExperimentReport::new("quantitative-rate", params);
    let mut stats = Vec::new();
    let mut envelopes = Vec::new();
    for (cell, &n) in params.n_values.iter().enumerate() {
        let cfg = SimConfig { noise_n: n, ..base.clone() };
        let offset = (cell * params.replicas) as u64;
        let e = errors(&cfg, &u0, &limit, params.replicas, offset, 2)?;
        let stat = Statistic::batch_means(&e);
        let env = rate_envelope(n, base.noise_r, cut.delta)?;
        stats.push(stat);
        envelopes.push(env);
        report.cells.push(
            Cell::new(&[("n", n as f64), ("dt", base.dt)])
                .with("l2_h1_minus_delta_sq", stat)
                .with("envelope_shape", Statistic::exact(env)),
        );
    }

    let c = stats[0].mean / envelopes[0];
    let mut below = true;
    let mut lines = Vec::new();
    for ((s, env), n) in stats.iter().zip(&envelopes).zip(&params.n_values).skip(1) {
        let bound = c * env;
        below &= s.mean <= bound;
        lines.push(format!("n={n}: {:.4e} ± {:.2e} vs {bound:.4e}", s.mean, s.std_error));
    }
    report.verdicts.push(Verdict::new(
        "below_envelope",
        below,
        format!("C = {c:.4e} fitted at n = {}; {}", params.n_values[0], lines.join(", ")),
    ));
    let listing: Vec<String> =
        stats.iter().map(|s| format!("{:.4e} ± {:.2e}", s.mean, s.std_error)).collect();
    report.verdicts.push(Verdict::new(
        "nonincreasing",
        stats.windows(2).all(|w| w[1].mean <= w[0].mean),
        format!("over n = {:?}: {}", params.n_values, listing.join(", ")),
    ));

    if params.dt_check {
        let n = params.n_values[0];
        let cfg = SimConfig { noise_n: n, ..fine.clone() };
        let e = errors(&cfg, &u0, &limit, params.replicas, 0, 1)?;
        let half = Statistic::batch_means(&e);
        let change = (half.mean - stats[0].mean).abs();
        report.cells.push(
            Cell::new(&[("n", n as f64), ("dt", cfg.dt)]).with("l2_h1_minus_delta_sq", half),
        );
        report.verdicts.push(Verdict::new(
            "step_halving",
            change < stats[0].std_error,
            format!(
                "n={n}: dt={} gives {:.4e}, dt={} gives {:.4e}; change {change:.3e} against standard error {:.3e}",
                base.dt, stats[0].mean, cfg.dt, half.mean, stats[0].std_error
            ),
        ));
    }
    Ok(report)
}
