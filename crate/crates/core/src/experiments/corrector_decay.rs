//! Decay of the corrector deviation `‖S_θⁿφ − (3ν/5)Δφ‖_{H^{b−2−α}}` in n.

use serde::{Deserialize, Serialize};

use super::{loglog_slope, Cell, ExperimentReport, InitialCondition, Statistic, Verdict};
use crate::corrector::corrector_deviation;
use crate::error::{Error, Result};
use crate::noise::{build_basis, build_theta};
use crate::spectral::SobolevIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorDecayParams {
    pub n_values: Vec<u32>,
    pub r: f64,
    pub b: f64,
    pub alpha: f64,
    pub nu: f64,
    /// Band of the test field φ.
    pub phi_cutoff: u32,
    pub phi: InitialCondition,
    /// Allowed excess of the fitted slope over `−α`.
    pub slope_slack: f64,
}

impl Default for CorrectorDecayParams {
    fn default() -> Self {
        CorrectorDecayParams {
            n_values: vec![4, 8, 16, 32],
            r: 1.0,
            b: 1.0,
            alpha: 1.0,
            nu: 1.0,
            phi_cutoff: 3,
            phi: InitialCondition::default(),
            slope_slack: 0.25,
        }
    }
}

pub fn run_corrector_decay(params: &CorrectorDecayParams) -> Result<ExperimentReport> {
    if params.n_values.len() < 2 {
        return Err(Error::InvalidParameter("need at least two n values".into()));
    }
    let phi = params.phi.build(params.phi_cutoff);
    let b = SobolevIndex(params.b);
    let phi_norm = phi.sobolev_norm(b);
    let mut report = ExperimentReport::new("corrector-decay", params);
    let mut devs = Vec::new();
    let mut linear = true;
    let mut worst_linear: f64 = 0.0;
    for &n in &params.n_values {
        let theta = build_theta(params.r, n)?;
        let basis = build_basis(n);
        let d = corrector_deviation(&phi, &theta, &basis, params.nu, b, params.alpha);
        let d2 = corrector_deviation(&phi, &theta, &basis, 2.0 * params.nu, b, params.alpha);
        let rel = (d2 - 2.0 * d).abs() / d.abs().max(f64::MIN_POSITIVE);
        worst_linear = worst_linear.max(rel);
        linear &= rel <= 1e-12;
        let bound_ratio = d * (n as f64).powf(params.alpha) / phi_norm;
        devs.push(d);
        report.cells.push(
            Cell::new(&[("n", n as f64), ("r", params.r), ("b", params.b), ("alpha", params.alpha)])
                .with("deviation", Statistic::exact(d))
                .with("bound_ratio", Statistic::exact(bound_ratio)),
        );
    }
    let ns: Vec<f64> = params.n_values.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope("deviation_vs_n", &ns, &devs);
    let limit = -params.alpha + params.slope_slack;
    report.verdicts.push(Verdict::new(
        "slope",
        slope.value <= limit,
        format!(
            "fitted slope {:.4} (95% CI [{:.4}, {:.4}]) against {limit}",
            slope.value, slope.ci_low, slope.ci_high
        ),
    ));
    report.slopes.push(slope);
    let listing: Vec<String> = devs.iter().map(|d| format!("{d:.4e}")).collect();
    report.verdicts.push(Verdict::new(
        "strictly_decreasing",
        devs.windows(2).all(|w| w[1] < w[0]),
        format!("deviations over n = {:?}: {}", params.n_values, listing.join(", ")),
    ));
    report.verdicts.push(Verdict::new(
        "linear_in_nu",
        linear,
        format!("doubling ν doubles every deviation to relative error {worst_linear:.2e}"),
    ));
    Ok(report)
}
