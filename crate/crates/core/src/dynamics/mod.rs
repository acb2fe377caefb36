//! Time integration of the stochastic Galerkin system, the deterministic
//! limit equation and the controlled skeleton equation.

mod propagator;
mod solver;

pub use propagator::LinearPropagator;
pub(crate) use propagator::block_rates;
pub use solver::{
    drift, integrate, rate_function_of_control, simulate, solve_limit, solve_skeleton,
    step_stochastic, Integrator, SkeletonControl, StepInfo,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{fft_friendly, required_grid, SobolevIndex, SpectralVelocity};

/// `F_N(ρ) = min(1, N/ρ)`, with `F_N(0) = 1`.
pub fn cutoff(rho: f64, n: f64) -> f64 {
    if rho <= n {
        1.0
    } else {
        n / rho
    }
}

/// Threshold `N`, cut-off regularity loss `δ` and dissipation order `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffParams {
    #[serde(rename = "N")]
    pub threshold: f64,
    pub delta: f64,
    pub lambda: f64,
}

impl CutoffParams {
    pub fn new(threshold: f64, delta: f64, lambda: f64) -> Result<Self> {
        let p = CutoffParams { threshold, delta, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cut-off threshold N = {} must be positive",
                self.threshold
            )));
        }
        if !(1.0..2.0).contains(&self.lambda) {
            return Err(Error::Constraint(format!(
                "dissipation order lambda = {} must lie in [1, 2)",
                self.lambda
            )));
        }
        if !(0.0..0.25).contains(&self.delta) {
            return Err(Error::Constraint(format!(
                "delta = {} must lie in [0, 1/4)",
                self.delta
            )));
        }
        if self.lambda == 1.0 && self.delta == 0.0 {
            return Err(Error::Constraint(
                "lambda = 1 requires delta in (0, 1/4): the cut-off norm must be H^{1-delta} with delta > 0"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Regularity of the cut-off norm, `1 − δ`.
    pub fn norm_index(&self) -> SobolevIndex {
        SobolevIndex(1.0 - self.delta)
    }

    /// `F_N(‖u‖_{H^{1−δ}})`.
    pub fn value(&self, u: &SpectralVelocity) -> f64 {
        cutoff(u.sobolev_norm(self.norm_index()), self.threshold)
    }
}

/// Which equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationMode {
    Stochastic,
    Limit,
    Skeleton,
}

/// Time-stepping scheme. Both schemes integrate `−(−Δ)^Λ` exactly, treat
/// the cut-off nonlinearity explicitly with an energy projection and the
/// transport noise by Euler-Maruyama. They differ in the corrector `S_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `S_θ` is folded into the exact linear propagator and noise increments
    /// carry the variance of the exact linear flow; unconditionally
    /// mean-square stable.
    ExponentialEuler,
    /// `S_θ` is applied by an explicit Euler step.
    ExplicitCorrector,
}

impl Scheme {
    pub fn id(&self) -> &'static str {
        match self {
            Scheme::ExponentialEuler => "exponential-euler",
            Scheme::ExplicitCorrector => "explicit-corrector",
        }
    }

    pub fn from_id(id: &str) -> Option<Scheme> {
        match id {
            "exponential-euler" => Some(Scheme::ExponentialEuler),
            "explicit-corrector" => Some(Scheme::ExplicitCorrector),
            _ => None,
        }
    }
}

/// Parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nu: f64,
    pub cutoff: CutoffParams,
    pub noise_n: u32,
    pub noise_r: f64,
    pub galerkin_m: u32,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub seed: u64,
    /// Grid points per direction; `None` selects the smallest exact size.
    pub grid: Option<usize>,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nu: 1.0,
            cutoff: CutoffParams { threshold: 10.0, delta: 0.2, lambda: 1.0 },
            noise_n: 4,
            noise_r: 1.0,
            galerkin_m: 8,
            dt: 1e-3,
            t_final: 0.25,
            seed: 1,
            grid: None,
            scheme: Scheme::ExplicitCorrector,
        }
    }
}

impl SimConfig {
    /// Number of steps, `T/dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Smallest grid on which every product used by `mode` is alias-free.
    pub fn required_grid(&self, mode: EquationMode) -> usize {
        let m = self.galerkin_m;
        let base = required_grid(m, m, m);
        match mode {
            EquationMode::Stochastic if self.nu > 0.0 => base.max(required_grid(self.noise_n, m, m)),
            _ => base,
        }
    }

    pub fn grid_size(&self, mode: EquationMode) -> usize {
        self.grid.unwrap_or_else(|| fft_friendly(self.required_grid(mode)))
    }

    /// Checks every constraint relevant to `mode`.
    pub fn validate(&self, mode: EquationMode) -> Result<()> {
        self.cutoff.validate()?;
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu = {} must be nonnegative", self.nu)));
        }
        if self.galerkin_m == 0 || self.noise_n == 0 {
            return Err(Error::InvalidParameter(
                "galerkin_m and noise_n must be at least 1".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "T = {} must be at least dt = {}",
                self.t_final, self.dt
            )));
        }
        if mode != EquationMode::Limit && !(self.noise_r > 0.0 && self.noise_r < 1.5) {
            return Err(Error::Constraint(format!(
                "noise_r = {} must lie in (0, 3/2) for the coefficient family",
                self.noise_r
            )));
        }
        if mode == EquationMode::Skeleton {
            let lambda = self.cutoff.lambda;
            if lambda <= 1.0 {
                return Err(Error::Constraint(
                    "skeleton equation requires lambda in (1, 2): uniqueness fails for lambda = 1"
                        .into(),
                ));
            }
            if self.cutoff.delta != 0.0 {
                return Err(Error::Constraint(
                    "skeleton equation uses the H^1 cut-off norm: delta must be 0".into(),
                ));
            }
            if lambda + self.noise_r <= 2.5 {
                return Err(Error::Constraint(format!(
                    "skeleton equation requires lambda + r > 5/2, got {} + {} = {}",
                    lambda,
                    self.noise_r,
                    lambda + self.noise_r
                )));
            }
        }
        let required = self.required_grid(mode);
        if let Some(g) = self.grid {
            if g < required {
                return Err(Error::GridTooSmall {
                    grid: g,
                    required,
                    reason: "dealiased products of the Galerkin band",
                });
            }
        }
        Ok(())
    }
}

/// Observables of one trajectory, one row per time level including `t = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub h_lambda_sq: Vec<f64>,
    pub h1_sq: Vec<f64>,
    pub cutoff_value: Vec<f64>,
    /// Cumulative `∫₀ᵗ ‖u‖²_{H^Λ}`, integrated exactly through the linear part.
    pub dissipation: Vec<f64>,
    /// Cumulative `∫₀ᵗ ‖∇u‖²_{L²}`.
    pub grad_dissipation: Vec<f64>,
    /// Cumulative transport-energy fluctuation (zero unless tracked).
    pub noise_energy_fluctuation: Vec<f64>,
    #[serde(skip)]
    pub final_state: Option<SpectralVelocity>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t (‖u(t)‖² + 2∫₀ᵗ‖u‖²_{H^Λ} − ‖u₀‖²)`, which is nonpositive when
    /// the energy inequality holds.
    pub fn energy_excess(&self) -> f64 {
        let e0 = match self.energy.first() {
            Some(e) => *e,
            None => return 0.0,
        };
        self.energy
            .iter()
            .zip(self.dissipation.iter())
            .map(|(e, d)| e + 2.0 * d - e0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn push(&mut self, t: f64, u: &SpectralVelocity, params: &CutoffParams, info: &StepInfo) {
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
        let (d, g, f) = (
            last(&self.dissipation),
            last(&self.grad_dissipation),
            last(&self.noise_energy_fluctuation),
        );
        self.times.push(t);
        self.energy.push(u.l2_norm_sq());
        self.h_lambda_sq.push(u.sobolev_norm_sq(SobolevIndex(params.lambda)));
        self.h1_sq.push(u.sobolev_norm_sq(SobolevIndex(1.0)));
        self.cutoff_value.push(params.value(u));
        self.dissipation.push(d + info.dissipation);
        self.grad_dissipation.push(g + info.grad_dissipation);
        self.noise_energy_fluctuation.push(f + info.noise_energy_fluctuation);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff(3.0, 5.0), 1.0);
        assert_eq!(cutoff(10.0, 5.0), 0.5);
        assert_eq!(cutoff(0.0, 5.0), 1.0);
        for rho in [0.1, 4.0, 7.0, 1e6] {
            assert!(cutoff(rho, 5.0) * rho <= 5.0 + 1e-12);
        }
    }

    #[test]
    fn parameter_constraints() {
        assert!(matches!(CutoffParams::new(1.0, 0.0, 1.0), Err(Error::Constraint(_))));
        assert!(CutoffParams::new(1.0, 0.1, 1.0).is_ok());
        assert!(CutoffParams::new(1.0, 0.0, 1.8).is_ok());
        assert!(CutoffParams::new(1.0, 0.3, 1.5).is_err());

        let mut cfg = SimConfig {
            cutoff: CutoffParams { threshold: 1.0, delta: 0.0, lambda: 1.8 },
            noise_r: 0.8,
            ..SimConfig::default()
        };
        cfg.validate(EquationMode::Skeleton).unwrap();
        cfg.noise_r = 0.6;
        assert!(matches!(cfg.validate(EquationMode::Skeleton), Err(Error::Constraint(_))));
        cfg.noise_r = 1.6;
        assert!(matches!(cfg.validate(EquationMode::Stochastic), Err(Error::Constraint(_))));
        cfg.noise_r = 1.0;
        cfg.grid = Some(20);
        assert!(matches!(cfg.validate(EquationMode::Limit), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn grid_selection() {
        let cfg = SimConfig { galerkin_m: 8, noise_n: 16, ..SimConfig::default() };
        assert_eq!(cfg.grid_size(EquationMode::Stochastic), 32);
        assert_eq!(cfg.grid_size(EquationMode::Limit), 24);
        let cfg = SimConfig { galerkin_m: 8, noise_n: 4, ..SimConfig::default() };
        assert_eq!(cfg.grid_size(EquationMode::Stochastic), 24);
    }
}
