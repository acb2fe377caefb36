//! Monte Carlo and deterministic verification harnesses.
//!
//! Every experiment is a pure function of its parameters (including the
//! root seed) and returns an [`ExperimentReport`] with per-cell statistics,
//! fitted slopes and pass/fail verdicts.

mod corrector_decay;
mod energy;
mod rate;
mod scaling;
mod skeleton;

pub use corrector_decay::{run_corrector_decay, CorrectorDecayParams};
pub use energy::{run_energy_audit, EnergyAuditParams};
pub use rate::{rate_envelope, run_quantitative_rate, RateParams};
pub use scaling::{run_scaling_limit, ScalingParams};
pub use skeleton::{random_control, run_skeleton_stability, SkeletonStabilityParams};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{stream, Purpose};
use crate::spectral::SpectralVelocity;

/// Random band-limited initial field, reproducible from its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    /// Largest `|k|` carrying energy.
    pub kmax: f64,
    /// Amplitude decay exponent in `|k|`.
    pub decay: f64,
    /// L² norm of the field.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition { kmax: 3.0, decay: 1.0, amplitude: 1.0, seed: 1 }
    }
}

impl InitialCondition {
    pub fn build(&self, cutoff: u32) -> SpectralVelocity {
        let mut rng = stream(self.seed, 0, Purpose::InitialCondition);
        SpectralVelocity::random(cutoff, self.kmax, self.decay, self.amplitude, &mut rng)
    }
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
}

impl Statistic {
    /// Exact value (no sampling).
    pub fn exact(value: f64) -> Self {
        Statistic { mean: value, std_error: 0.0, replicas: 1 }
    }

    /// Batch-means estimate with up to 8 equal batches; with fewer than 16
    /// samples every sample is its own batch.
    pub fn batch_means(values: &[f64]) -> Self {
        let r = values.len();
        if r == 0 {
            return Statistic { mean: f64::NAN, std_error: f64::NAN, replicas: 0 };
        }
        let mean = values.iter().sum::<f64>() / r as f64;
        let batches = if r >= 16 { 8 } else { r };
        let size = r / batches;
        if batches < 2 {
            return Statistic { mean, std_error: f64::NAN, replicas: r };
        }
        let means: Vec<f64> = values
            .chunks(size)
            .take(batches)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let bm = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
        Statistic { mean, std_error: (var / batches as f64).sqrt(), replicas: r }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub params: BTreeMap<String, f64>,
    pub stats: BTreeMap<String, Statistic>,
}

impl Cell {
    pub fn new(params: &[(&str, f64)]) -> Self {
        Cell {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            stats: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, s: Statistic) -> Self {
        self.stats.insert(name.to_string(), s);
        self
    }

    pub fn stat(&self, name: &str) -> Option<&Statistic> {
        self.stats.get(name)
    }
}

/// Least-squares slope of `log y` against `log x` with a 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub name: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Two-sided 97.5% Student quantiles for 1..=10 degrees of freedom.
const T_975: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];

pub fn loglog_slope(name: &str, x: &[f64], y: &[f64]) -> Slope {
    let n = x.len();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
    let value = sxy / sxx;
    let half = if n > 2 {
        let resid: f64 = lx
            .iter()
            .zip(ly.iter())
            .map(|(a, b)| (b - my - value * (a - mx)).powi(2))
            .sum();
        let se = (resid / (n - 2) as f64 / sxx).sqrt();
        let t = T_975.get(n - 3).copied().unwrap_or(1.96);
        t * se
    } else {
        f64::NAN
    };
    Slope { name: name.to_string(), value, ci_low: value - half, ci_high: value + half }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Verdict { name: name.to_string(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: serde_json::Value,
    pub cells: Vec<Cell>,
    pub slopes: Vec<Slope>,
    pub verdicts: Vec<Verdict>,
    /// Non-fatal warnings, e.g. standard errors too wide for the verdicts.
    pub flags: Vec<String>,
}

impl ExperimentReport {
    fn new(experiment: &str, parameters: impl Serialize) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            parameters: serde_json::to_value(parameters).expect("parameters serialize"),
            cells: Vec::new(),
            slopes: Vec::new(),
            verdicts: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Report as NDJSON: a header line, then one line per cell, slope,
    /// verdict and flag.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let line = |v: serde_json::Value| serde_json::to_string(&v).expect("json") + "\n";
        out += &line(serde_json::json!({
            "record": "experiment",
            "experiment": self.experiment,
            "parameters": self.parameters,
            "passed": self.passed(),
        }));
        for c in &self.cells {
            out += &line(serde_json::json!({"record": "cell", "params": c.params, "stats": c.stats}));
        }
        for s in &self.slopes {
            out += &line(serde_json::json!({"record": "slope", "slope": s}));
        }
        for v in &self.verdicts {
            out += &line(serde_json::json!({"record": "verdict", "verdict": v}));
        }
        for f in &self.flags {
            out += &line(serde_json::json!({"record": "flag", "flag": f}));
        }
        out
    }

    /// Human-readable table of cells, slopes and verdicts.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment: {}", self.experiment);
        for c in &self.cells {
            let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = write!(out, "  [{}]", params.join(", "));
            for (name, s) in &c.stats {
                if s.replicas > 1 {
                    let _ = write!(out, "  {name}={:.6e} ± {:.2e} (R={})", s.mean, s.std_error, s.replicas);
                } else {
                    let _ = write!(out, "  {name}={:.6e}", s.mean);
                }
            }
            out.push('\n');
        }
        for s in &self.slopes {
            let _ = writeln!(
                out,
                "  slope {}: {:.4} (95% CI [{:.4}, {:.4}])",
                s.name, s.value, s.ci_low, s.ci_high
            );
        }
        for v in &self.verdicts {
            let _ = writeln!(out, "  {} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
        for f in &self.flags {
            let _ = writeln!(out, "  flag: {f}");
        }
        out
    }
}

/// Runs `task` for every replica index, in parallel, returning results in
/// replica order. `init` builds the per-thread state.
pub(crate) fn over_replicas<S, T, I, F>(replicas: usize, init: I, task: F) -> Result<Vec<T>>
where
    S: Send,
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> Result<T> + Sync + Send,
{
    (0..replicas as u64)
        .into_par_iter()
        .map_init(&init, |state, r| task(state, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_of_constant_has_zero_error() {
        let s = Statistic::batch_means(&[2.0; 64]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.replicas, 64);
    }

    #[test]
    fn batch_means_matches_plain_estimator_for_small_samples() {
        let v = [1.0, 2.0, 4.0, 7.0];
        let s = Statistic::batch_means(&v);
        let mean = 3.5;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        assert!((s.std_error - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [4.0, 8.0, 16.0, 32.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.25)).collect();
        let s = loglog_slope("y", &x, &y);
        assert!((s.value + 1.25).abs() < 1e-12);
        assert!((s.ci_high - s.ci_low).abs() < 1e-6);
    }

    #[test]
    fn replicas_come_back_in_order() {
        let out = over_replicas(10, || 0u64, |calls, r| {
            *calls += 1;
            Ok(r * r)
        })
        .unwrap();
        assert_eq!(out, (0..10u64).map(|r| r * r).collect::<Vec<_>>());
    }
}
