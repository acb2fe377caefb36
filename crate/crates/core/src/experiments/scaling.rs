//! Scaling limit: distance between the stochastic Galerkin solution and
//! the deterministic limit as the noise spectrum flattens.

use serde::{Deserialize, Serialize};

use super::{loglog_slope, over_replicas, Cell, ExperimentReport, InitialCondition, Statistic, Verdict};
use crate::dynamics::{integrate, CutoffParams, EquationMode, Integrator, SimConfig};
use crate::error::{Error, Result};
use crate::spectral::{SobolevIndex, SpectralVelocity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub base: SimConfig,
    pub n_values: Vec<u32>,
    pub replicas: usize,
    /// Moment of the X-norm.
    pub p: f64,
    /// Negative Sobolev index of the sup-in-time component.
    pub gamma: f64,
    pub initial: InitialCondition,
    /// Required ratio between the largest-n and smallest-n estimates.
    pub reduction: f64,
    /// Flag cells whose standard error exceeds this fraction of the mean.
    pub max_relative_error: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            base: SimConfig {
                cutoff: CutoffParams { threshold: 5.0, delta: 0.2, lambda: 1.0 },
                ..SimConfig::default()
            },
            n_values: vec![2, 4, 8, 16],
            replicas: 64,
            p: 2.0,
            gamma: 0.25,
            initial: InitialCondition::default(),
            reduction: 0.5,
            max_relative_error: 0.25,
        }
    }
}

/// Discretized X-norm of `u − ū`: the larger of the left-endpoint
/// `L²_t H^{1−δ}` norm and the sampled `sup_t H^{−γ}` norm.
struct XNorm {
    l2: f64,
    sup: f64,
}

impl XNorm {
    fn value(&self) -> f64 {
        self.l2.sqrt().max(self.sup.sqrt())
    }
}

pub fn run_scaling_limit(params: &ScalingParams) -> Result<ExperimentReport> {
    if params.p < 1.0 {
        return Err(Error::InvalidParameter(format!("moment p = {} must be at least 1", params.p)));
    }
    if !(params.gamma > 0.0 && params.gamma < 0.5) {
        return Err(Error::Constraint(format!("gamma = {} must lie in (0, 1/2)", params.gamma)));
    }
    if params.n_values.is_empty() || params.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one n value and one replica".into()));
    }
    let base = &params.base;
    let u0 = params.initial.build(base.galerkin_m);
    let mut limit = Vec::with_capacity(base.steps() + 1);
    integrate(&u0, base, EquationMode::Limit, None, 0, |_, _, u| limit.push(u.clone()))?;
    let (s_space, s_neg) = (SobolevIndex(1.0 - base.cutoff.delta), SobolevIndex(-params.gamma));
    let steps = base.steps();

    let mut report = ExperimentReport::new("scaling-limit", params);
    let mut means = Vec::new();
    for (cell, &n) in params.n_values.iter().enumerate() {
        let cfg = SimConfig { noise_n: n, ..base.clone() };
        let integ = Integrator::new(&cfg, EquationMode::Stochastic)?;
        let offset = (cell * params.replicas) as u64;
        let norms = over_replicas(params.replicas, || integ.clone(), |integ, r| {
            let mut x = XNorm { l2: 0.0, sup: 0.0 };
            integ.run(&u0, None, offset + r, |j, _, u: &SpectralVelocity| {
                let d = u - &limit[j];
                if j < steps {
                    x.l2 += d.sobolev_norm_sq(s_space) * cfg.dt;
                }
                x.sup = x.sup.max(d.sobolev_norm_sq(s_neg));
            })?;
            Ok(x)
        })?;
        let xp: Vec<f64> = norms.iter().map(|x| x.value().powf(params.p)).collect();
        let l2: Vec<f64> = norms.iter().map(|x| x.l2).collect();
        let sup: Vec<f64> = norms.iter().map(|x| x.sup).collect();
        let stat = Statistic::batch_means(&xp);
        if !(stat.std_error <= params.max_relative_error * stat.mean) {
            report.flags.push(format!(
                "n = {n}: standard error {:.3e} exceeds {} of the mean {:.3e}; more replicas needed",
                stat.std_error, params.max_relative_error, stat.mean
            ));
        }
        means.push(stat);
        report.cells.push(
            Cell::new(&[("n", n as f64)])
                .with("x_norm_p", stat)
                .with("l2_h1_minus_delta_sq", Statistic::batch_means(&l2))
                .with("sup_h_minus_gamma_sq", Statistic::batch_means(&sup)),
        );
    }

    let ns: Vec<f64> = params.n_values.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = means.iter().map(|s| s.mean).collect();
    if ns.len() >= 2 {
        report.slopes.push(loglog_slope("x_norm_p_vs_n", &ns, &ys));
    }
    let quote = |s: &Statistic| format!("{:.4e} ± {:.2e}", s.mean, s.std_error);
    let listing: Vec<String> = means.iter().map(quote).collect();
    let decreasing = ys.windows(2).all(|w| w[1] < w[0]);
    report.verdicts.push(Verdict::new(
        "strictly_decreasing",
        decreasing,
        format!("E‖uⁿ−ū‖^p_X over n = {:?}: {}", params.n_values, listing.join(", ")),
    ));
    let (first, last) = (means[0], means[means.len() - 1]);
    report.verdicts.push(Verdict::new(
        "reduction_factor",
        last.mean <= params.reduction * first.mean,
        format!(
            "largest-n {} against {} × smallest-n {}",
            quote(&last),
            params.reduction,
            quote(&first)
        ),
    ));

    // With the noise switched off both equations coincide.
    let quiet = SimConfig { nu: 0.0, noise_n: params.n_values[0], ..base.clone() };
    let mut quiet_limit = Vec::with_capacity(steps + 1);
    integrate(&u0, &quiet, EquationMode::Limit, None, 0, |_, _, u| quiet_limit.push(u.clone()))?;
    let mut gap: f64 = 0.0;
    integrate(&u0, &quiet, EquationMode::Stochastic, None, 0, |j, _, u| {
        gap = gap.max((u - &quiet_limit[j]).l2_norm());
    })?;
    report.verdicts.push(Verdict::new(
        "noise_off_matches_limit",
        gap <= 1e-10,
        format!("max_t ‖u − ū‖ at ν = 0: {gap:.3e} (tolerance 1e-10)"),
    ));
    Ok(report)
}
