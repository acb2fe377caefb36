//! Drifts, the one-step map and trajectory drivers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CutoffParams, EquationMode, LinearPropagator, Scheme, SimConfig, TrajectoryRecord};
use crate::corrector::{CorrectorOperator, Projection};
use crate::error::{Error, Result};
use crate::noise::{
    build_basis, build_theta, expected_transport_energy, BrownianDriver, Increments, NoiseBasis,
    ThetaSpectrum,
};
use crate::spectral::{
    max_speed, nonlinear_term_on, SobolevIndex, SpectralGrid, SpectralVelocity,
};

/// Piecewise-constant control `g(t) = g_j` on `[t_j, t_{j+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonControl {
    samples: Vec<SpectralVelocity>,
    dt: f64,
    r: SobolevIndex,
}

impl SkeletonControl {
    pub fn new(samples: Vec<SpectralVelocity>, dt: f64, r: SobolevIndex) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("control time step must be positive".into()));
        }
        for g in &samples {
            g.check_invariants()?;
        }
        Ok(SkeletonControl { samples, dt, r })
    }

    /// The zero control on `steps` intervals.
    pub fn zero(cutoff: u32, steps: usize, dt: f64, r: SobolevIndex) -> Self {
        SkeletonControl { samples: vec![SpectralVelocity::zeros(cutoff); steps], dt, r }
    }

    pub fn samples(&self) -> &[SpectralVelocity] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn r(&self) -> SobolevIndex {
        self.r
    }

    pub fn scaled(&self, c: f64) -> SkeletonControl {
        SkeletonControl {
            samples: self.samples.iter().map(|g| g.scaled(c)).collect(),
            dt: self.dt,
            r: self.r,
        }
    }

    /// `(∫‖g₁ − g₂‖²_{H^r})^{1/2}` by left-endpoint quadrature.
    pub fn distance(&self, other: &SkeletonControl) -> f64 {
        assert_eq!(self.samples.len(), other.samples.len(), "controls on different time grids");
        self.samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| {
                let d = if a.cutoff() == b.cutoff() {
                    a - b
                } else {
                    let c = a.cutoff().max(b.cutoff());
                    &a.with_cutoff(c) - &b.with_cutoff(c)
                };
                d.sobolev_norm_sq(self.r) * self.dt
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// `½ Σ_j ‖g(t_j)‖²_{H^r} dt`.
pub fn rate_function_of_control(g: &SkeletonControl) -> f64 {
    0.5 * g.samples.iter().map(|s| s.sobolev_norm_sq(g.r) * g.dt).sum::<f64>()
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub cutoff_value: f64,
    /// `∫‖u‖²_{H^Λ}` over the step.
    pub dissipation: f64,
    /// `∫‖∇u‖²` over the step.
    pub grad_dissipation: f64,
    /// `‖T‖² − E[‖T‖² | u]` for the transport increment, when tracked.
    pub noise_energy_fluctuation: f64,
}

/// Rejects steps for which the explicit corrector amplifies some mode in
/// mean square: per eigendirection the step multiplies the expected energy
/// by about `(1 + (s dt)²) e^{−2μ dt}`.
fn check_explicit_stability(op: &CorrectorOperator, lambda: f64, dt: f64) -> Result<()> {
    for (i, &l) in op.modes().modes().iter().enumerate() {
        let mu = (4.0 * PI * PI * l.norm_sq() as f64).powf(lambda);
        for s in super::block_rates(l, op.block(i)) {
            let growth = (1.0 + (s * dt).powi(2)).ln() - 2.0 * mu * dt;
            if growth > 0.0 {
                return Err(Error::StepTooLarge {
                    time: 0.0,
                    detail: format!(
                        "explicit corrector is mean-square unstable at mode {l} (rate {s:.3e}, dt {dt:e}); \
                         reduce dt or use scheme exponential-euler"
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Reusable one-step map for a fixed configuration and equation.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: SimConfig,
    mode: EquationMode,
    grid: SpectralGrid,
    propagator: LinearPropagator,
    noise: Option<(NoiseBasis, ThetaSpectrum)>,
    explicit_corrector: Option<CorrectorOperator>,
    track_noise_energy: bool,
    cut: CutoffParams,
}

impl Integrator {
    pub fn new(cfg: &SimConfig, mode: EquationMode) -> Result<Self> {
        cfg.validate(mode)?;
        let m = cfg.galerkin_m;
        let lambda = cfg.cutoff.lambda;
        let mut explicit_corrector = None;
        let (propagator, noise) = match mode {
            EquationMode::Stochastic if cfg.nu > 0.0 => {
                let basis = build_basis(cfg.noise_n);
                let theta = build_theta(cfg.noise_r, cfg.noise_n)?;
                let op = CorrectorOperator::new(m, &theta, &basis, cfg.nu, Projection::Leray);
                let prop = match cfg.scheme {
                    Scheme::ExponentialEuler => LinearPropagator::with_corrector(lambda, &op, cfg.dt),
                    Scheme::ExplicitCorrector => {
                        check_explicit_stability(&op, lambda, cfg.dt)?;
                        explicit_corrector = Some(op);
                        LinearPropagator::scalar(lambda, 0.0, m, cfg.dt)
                    }
                };
                (prop, Some((basis, theta)))
            }
            EquationMode::Stochastic => (LinearPropagator::scalar(lambda, 0.0, m, cfg.dt), None),
            EquationMode::Limit | EquationMode::Skeleton => {
                (LinearPropagator::scalar(lambda, 0.6 * cfg.nu, m, cfg.dt), None)
            }
        };
        Ok(Integrator {
            cfg: cfg.clone(),
            mode,
            grid: SpectralGrid::new(cfg.grid_size(mode)),
            propagator,
            noise,
            explicit_corrector,
            track_noise_energy: false,
            cut: cfg.cutoff,
        })
    }

    /// Also record `‖T‖² − E[‖T‖² | u]` for the truncated transport
    /// increment `T`, a mean-zero control variate for energy audits.
    pub fn track_noise_energy(mut self, on: bool) -> Self {
        self.track_noise_energy = on;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn mode(&self) -> EquationMode {
        self.mode
    }

    /// Noise basis and coefficients, present for stochastic runs with `ν > 0`.
    pub fn noise(&self) -> Option<&(NoiseBasis, ThetaSpectrum)> {
        self.noise.as_ref()
    }

    /// One step from time `t`. `incr` drives the transport noise of
    /// stochastic runs; `control` is the skeleton control on this step.
    pub fn step(
        &mut self,
        u: &SpectralVelocity,
        t: f64,
        incr: Option<&Increments>,
        control: Option<&SpectralVelocity>,
    ) -> Result<(SpectralVelocity, StepInfo)> {
        let m = self.cfg.galerkin_m;
        if u.cutoff() != m {
            return Err(Error::CutoffMismatch(format!(
                "state has cutoff {} but the Galerkin band is {m}",
                u.cutoff()
            )));
        }
        let dt = self.cfg.dt;
        let f = self.cut.value(u);
        let control = control.filter(|g| !g.is_zero());
        if let Some(g) = control {
            if g.cutoff() > m {
                return Err(Error::CutoffMismatch(format!(
                    "control band {} exceeds the Galerkin band {m}",
                    g.cutoff()
                )));
            }
        }
        let noise_w = match (&self.noise, incr) {
            (Some((basis, theta)), Some(w)) => Some(w.noise_velocity(basis, theta)),
            (Some(_), None) => {
                return Err(Error::InvalidParameter("stochastic step without increments".into()))
            }
            _ => None,
        };

        let mut y = u.clone();
        let mut injected: Option<SpectralVelocity> = None;
        let mut fluctuation = 0.0;
        if !u.is_zero() {
            let (vel, grad) = self.grid.velocity_and_gradient(u);
            let mut advecting: Vec<Vec<Vec<f64>>> = vec![vel];
            let mut speed = f * max_speed(&advecting[0]);
            if let Some(g) = control {
                let gp = self.grid.velocity(g);
                speed += max_speed(&gp);
                advecting.push(gp);
            }
            if let Some(w) = &noise_w {
                advecting.push(self.grid.velocity(w));
            }
            if dt * speed * 2.0 * PI * m as f64 > 1.0 {
                return Err(Error::StepTooLarge {
                    time: t,
                    detail: format!(
                        "advective CFL number {:.3} exceeds 1",
                        dt * speed * 2.0 * PI * m as f64
                    ),
                });
            }
            let refs: Vec<&[Vec<f64>]> = advecting.iter().map(|a| a.as_slice()).collect();
            let mut products = self.grid.advect(&refs, &grad, u.modes()).into_iter();
            let nonlinear = products.next().expect("nonlinear product");
            y.axpy(-dt * f, &nonlinear);
            if control.is_some() {
                y.axpy(dt, &products.next().expect("control product"));
            }
            // the explicit advective updates are orthogonal to u: restore ‖u‖
            let (e0, e1) = (u.l2_norm_sq(), y.l2_norm_sq());
            if e1 > 0.0 && e1 != e0 {
                y.scale_mut((e0 / e1).sqrt());
            }
            if let Some(op) = &self.explicit_corrector {
                y.axpy(dt, &op.apply(u));
            }
            if noise_w.is_some() {
                let transport = products.next().expect("transport product");
                let c = (1.5 * self.cfg.nu).sqrt();
                if self.track_noise_energy {
                    let (basis, theta) = self.noise.as_ref().expect("noise parts");
                    fluctuation = c * c * transport.l2_norm_sq()
                        - expected_transport_energy(u, basis, theta, dt, self.cfg.nu);
                }
                injected = Some(transport.scaled(c));
            }
        }
        let (next, d_lambda, d_grad) = match (&injected, self.cfg.scheme) {
            (None, _) => self.propagator.apply(&y),
            (Some(w), Scheme::ExplicitCorrector) => self.propagator.apply(&(&y + w)),
            (Some(w), Scheme::ExponentialEuler) => {
                // dissipation integrals along the flow of the frozen total
                let (_, d_lambda, d_grad) = self.propagator.apply(&(&y + w));
                let mut next = self.propagator.apply(&y).0;
                next.axpy(1.0, &self.propagator.apply_noise(w));
                (next, d_lambda, d_grad)
            }
        };
        if next.coeffs().iter().any(|v| v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())) {
            return Err(Error::Blowup { time: t + dt, detail: "non-finite coefficient".into() });
        }
        Ok((
            next,
            StepInfo {
                cutoff_value: f,
                dissipation: 0.5 * d_lambda,
                grad_dissipation: 0.5 * d_grad,
                noise_energy_fluctuation: fluctuation,
            },
        ))
    }

    /// Full trajectory from `u0`; see [`integrate`]. Stochastic runs draw
    /// their noise from the stream of `replica`.
    pub fn run(
        &mut self,
        u0: &SpectralVelocity,
        control: Option<&SkeletonControl>,
        replica: u64,
        observe: impl FnMut(usize, f64, &SpectralVelocity),
    ) -> Result<TrajectoryRecord> {
        let driver = match self.noise {
            Some(_) => Some(BrownianDriver::new(self.cfg.noise_n, self.cfg.dt, self.cfg.seed, replica)?),
            None => None,
        };
        self.run_with_driver(u0, control, driver, observe)
    }

    /// Like [`Integrator::run`] with an explicit noise driver, which must
    /// match the configured step and noise band.
    pub fn run_with_driver(
        &mut self,
        u0: &SpectralVelocity,
        control: Option<&SkeletonControl>,
        mut driver: Option<BrownianDriver>,
        mut observe: impl FnMut(usize, f64, &SpectralVelocity),
    ) -> Result<TrajectoryRecord> {
        let cfg = self.cfg.clone();
        if let Some(d) = &driver {
            if (d.dt() - cfg.dt).abs() > 1e-12 * cfg.dt || d.modes().cutoff() != cfg.noise_n {
                return Err(Error::InvalidParameter(format!(
                    "driver with step {} and band {} does not match dt = {} and noise_n = {}",
                    d.dt(),
                    d.modes().cutoff(),
                    cfg.dt,
                    cfg.noise_n
                )));
            }
        }
        if self.noise.is_none() {
            driver = None;
        }
        let steps = cfg.steps();
        if let Some(g) = control {
            if self.mode != EquationMode::Skeleton {
                return Err(Error::InvalidParameter(
                    "a control is only accepted by the skeleton equation".into(),
                ));
            }
            if g.samples.len() < steps || (g.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
                return Err(Error::InvalidParameter(format!(
                    "control has {} samples at dt = {}, the run needs {steps} at dt = {}",
                    g.samples.len(),
                    g.dt,
                    cfg.dt
                )));
            }
        }
        u0.check_invariants()?;
        if u0.cutoff() > cfg.galerkin_m {
            return Err(Error::CutoffMismatch(format!(
                "initial field has cutoff {} above the Galerkin band {}",
                u0.cutoff(),
                cfg.galerkin_m
            )));
        }
        let mut u = u0.with_cutoff(cfg.galerkin_m);
        let mut record = TrajectoryRecord::default();
        record.push(0.0, &u, &cfg.cutoff, &StepInfo::default());
        observe(0, 0.0, &u);
        for j in 0..steps {
            let t = j as f64 * cfg.dt;
            let incr = driver.as_mut().map(|d| d.sample());
            let g = control.map(|c| &c.samples[j]);
            let (next, info) = self.step(&u, t, incr.as_ref(), g)?;
            u = next;
            let t1 = (j + 1) as f64 * cfg.dt;
            record.push(t1, &u, &cfg.cutoff, &info);
            observe(j + 1, t1, &u);
        }
        record.final_state = Some(u);
        Ok(record)
    }
}

/// Right-hand side of the equation selected by `mode` (drift only, without
/// the noise increment).
pub fn drift(
    u: &SpectralVelocity,
    cfg: &SimConfig,
    mode: EquationMode,
    g_t: Option<&SpectralVelocity>,
) -> Result<SpectralVelocity> {
    cfg.validate(mode)?;
    if mode != EquationMode::Skeleton && g_t.is_some() {
        return Err(Error::InvalidParameter("a control is only accepted by the skeleton equation".into()));
    }
    let m = cfg.galerkin_m;
    let u = u.with_cutoff(m);
    let mut grid = SpectralGrid::new(cfg.grid_size(mode));
    let f = cfg.cutoff.value(&u);
    let mut out = nonlinear_term_on(&mut grid, &u).scaled(-f);
    out.axpy(1.0, &u.fractional_laplacian(SobolevIndex(cfg.cutoff.lambda)));
    match mode {
        EquationMode::Stochastic => {
            if cfg.nu > 0.0 {
                let theta = build_theta(cfg.noise_r, cfg.noise_n)?;
                let basis = build_basis(cfg.noise_n);
                let op = CorrectorOperator::new(m, &theta, &basis, cfg.nu, Projection::Leray);
                out.axpy(1.0, &op.apply(&u));
            }
        }
        EquationMode::Limit | EquationMode::Skeleton => {
            out.axpy(0.6 * cfg.nu, &u.laplacian());
        }
    }
    if let Some(g) = g_t.filter(|g| !g.is_zero()) {
        if g.cutoff() > m {
            return Err(Error::CutoffMismatch("control band exceeds the Galerkin band".into()));
        }
        let (_, grad) = grid.velocity_and_gradient(&u);
        let gp = grid.velocity(g);
        out.axpy(1.0, &grid.advect(&[&gp], &grad, u.modes()).pop().expect("one product"));
    }
    Ok(out)
}

/// One stochastic step driven by the next batch of `driver`.
pub fn step_stochastic(
    u: &SpectralVelocity,
    cfg: &SimConfig,
    driver: &mut BrownianDriver,
) -> Result<SpectralVelocity> {
    let mut integ = Integrator::new(cfg, EquationMode::Stochastic)?;
    let incr = driver.sample();
    Ok(integ.step(u, 0.0, Some(&incr), None)?.0)
}

/// Runs `mode` from `u0` over `cfg.steps()` steps. `observe` sees every
/// time level, starting with `(0, 0.0, u0)`.
pub fn integrate(
    u0: &SpectralVelocity,
    cfg: &SimConfig,
    mode: EquationMode,
    control: Option<&SkeletonControl>,
    replica: u64,
    observe: impl FnMut(usize, f64, &SpectralVelocity),
) -> Result<TrajectoryRecord> {
    Integrator::new(cfg, mode)?.run(u0, control, replica, observe)
}

/// Stochastic Galerkin trajectory for Monte Carlo replica `replica`.
pub fn simulate(u0: &SpectralVelocity, cfg: &SimConfig, replica: u64) -> Result<TrajectoryRecord> {
    integrate(u0, cfg, EquationMode::Stochastic, None, replica, |_, _, _| {})
}

/// Deterministic limit equation with extra dissipation `(3ν/5)Δ`.
pub fn solve_limit(u0: &SpectralVelocity, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    integrate(u0, cfg, EquationMode::Limit, None, 0, |_, _, _| {})
}

/// Skeleton equation driven by `g`.
pub fn solve_skeleton(
    u0: &SpectralVelocity,
    g: &SkeletonControl,
    cfg: &SimConfig,
) -> Result<TrajectoryRecord> {
    integrate(u0, cfg, EquationMode::Skeleton, Some(g), 0, |_, _, _| {})
}
