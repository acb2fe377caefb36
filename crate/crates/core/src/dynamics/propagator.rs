//! Exact propagator of the per-mode linear part `−(−Δ)^Λ + L`, where `L` is
//! either the corrector block or the scalar `(3ν/5)Δ`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::corrector::{Block, CorrectorOperator};
use crate::noise::perpendicular_basis;
use crate::spectral::{ModeSet, SpectralVelocity, CZERO3};

#[derive(Debug, Clone)]
struct ModeFactor {
    /// Orthonormal eigendirections in `l^⊥`.
    dirs: [[f64; 3]; 2],
    decay: [f64; 2],
    /// `((1 − e^{−2r dt})/(2r dt))^{1/2}`: the gain for a noise increment
    /// that reproduces the variance of the exact linear flow.
    noise_gain: [f64; 2],
    /// Weights turning `|c_a|²` into `2∫‖u‖²_{H^Λ}` and `2∫‖∇u‖²` over a step.
    weight_lambda: [f64; 2],
    weight_grad: [f64; 2],
}

/// `exp(dt A_l)` for every stored mode `l`, together with the exact
/// dissipation integrals along the flow.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    modes: Arc<ModeSet>,
    dt: f64,
    factors: Vec<ModeFactor>,
}

fn symmetric_eigen(p: f64, q: f64, s: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let phi = 0.5 * (2.0 * q).atan2(p - s);
    let (sn, cs) = phi.sin_cos();
    let v1 = [cs, sn];
    let v2 = [-sn, cs];
    let rq = |v: [f64; 2]| p * v[0] * v[0] + 2.0 * q * v[0] * v[1] + s * v[1] * v[1];
    ([rq(v1), rq(v2)], [v1, v2])
}

fn quad(b: &Block, x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            acc += x[r] * b[r][c] * y[c];
        }
    }
    acc
}

/// Decay rates `−eig` of a corrector block restricted to `l^⊥`.
pub(crate) fn block_rates(l: crate::spectral::WaveVector, b: &Block) -> [f64; 2] {
    let [e1, e2] = perpendicular_basis(l);
    let (eig, _) = symmetric_eigen(quad(b, &e1, &e1), quad(b, &e1, &e2), quad(b, &e2, &e2));
    [-eig[0], -eig[1]]
}

impl LinearPropagator {
    /// Propagator of `−(−Δ)^Λ + S_θ`, with `S_θ` given by its blocks.
    pub fn with_corrector(lambda: f64, corrector: &CorrectorOperator, dt: f64) -> Self {
        let modes = corrector.modes().clone();
        let factors = modes
            .modes()
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let [e1, e2] = perpendicular_basis(l);
                let b = corrector.block(i);
                let (eig, vecs) = symmetric_eigen(quad(b, &e1, &e1), quad(b, &e1, &e2), quad(b, &e2, &e2));
                let dirs = vecs.map(|v| std::array::from_fn(|j| v[0] * e1[j] + v[1] * e2[j]));
                Self::factor(lambda, l.norm_sq(), dirs, [-eig[0], -eig[1]], dt)
            })
            .collect();
        LinearPropagator { modes, dt, factors }
    }

    /// Propagator of `−(−Δ)^Λ + κΔ`.
    pub fn scalar(lambda: f64, kappa: f64, cutoff: u32, dt: f64) -> Self {
        let modes = ModeSet::ball(cutoff);
        let factors = modes
            .modes()
            .iter()
            .map(|&l| {
                let dirs = perpendicular_basis(l);
                let s = kappa * 4.0 * PI * PI * l.norm_sq() as f64;
                Self::factor(lambda, l.norm_sq(), dirs, [s, s], dt)
            })
            .collect();
        LinearPropagator { modes, dt, factors }
    }

    fn factor(lambda: f64, norm_sq: i64, dirs: [[f64; 3]; 2], extra: [f64; 2], dt: f64) -> ModeFactor {
        let lap = 4.0 * PI * PI * norm_sq as f64;
        let mu = lap.powf(lambda);
        let rate = extra.map(|s| mu + s);
        // half storage: each stored mode stands for two lattice modes
        let w = |a: f64| rate.map(|r| 2.0 * a / r * -(-2.0 * r * dt).exp_m1());
        ModeFactor {
            dirs,
            decay: rate.map(|r| (-r * dt).exp()),
            noise_gain: rate.map(|r| {
                let x = 2.0 * r * dt;
                if x.abs() < 1e-12 {
                    1.0
                } else {
                    (-(-x).exp_m1() / x).sqrt()
                }
            }),
            weight_lambda: w(mu),
            weight_grad: w(lap),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// `exp(dt A) y`, projected onto `l^⊥` at every mode, and the step
    /// integrals `(2∫‖u‖²_{H^Λ}, 2∫‖∇u‖²)` along the exact linear flow.
    pub fn apply(&self, y: &SpectralVelocity) -> (SpectralVelocity, f64, f64) {
        assert!(y.cutoff() <= self.modes.cutoff(), "field band exceeds propagator band");
        let mut d_lambda = 0.0;
        let mut d_grad = 0.0;
        let coeffs = y
            .coeffs()
            .iter()
            .zip(self.factors.iter())
            .map(|(v, f)| {
                let mut out = CZERO3;
                for a in 0..2 {
                    let d = &f.dirs[a];
                    let c: Complex64 = v[0] * d[0] + v[1] * d[1] + v[2] * d[2];
                    let c2 = c.norm_sqr();
                    d_lambda += f.weight_lambda[a] * c2;
                    d_grad += f.weight_grad[a] * c2;
                    let ce = c * f.decay[a];
                    for j in 0..3 {
                        out[j] += ce * d[j];
                    }
                }
                out
            })
            .collect();
        (SpectralVelocity::from_raw(y.modes().clone(), coeffs), d_lambda, d_grad)
    }

    /// Maps a noise increment `w` injected over one step to its contribution
    /// at the end of the step, with the variance of `∫ exp((dt−s)A) dW(s)`.
    pub fn apply_noise(&self, w: &SpectralVelocity) -> SpectralVelocity {
        assert!(w.cutoff() <= self.modes.cutoff(), "field band exceeds propagator band");
        let coeffs = w
            .coeffs()
            .iter()
            .zip(self.factors.iter())
            .map(|(v, f)| {
                let mut out = CZERO3;
                for a in 0..2 {
                    let d = &f.dirs[a];
                    let c: Complex64 = (v[0] * d[0] + v[1] * d[1] + v[2] * d[2]) * f.noise_gain[a];
                    for j in 0..3 {
                        out[j] += c * d[j];
                    }
                }
                out
            })
            .collect();
        SpectralVelocity::from_raw(w.modes().clone(), coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::Projection;
    use crate::noise::{build_basis, build_theta};
    use crate::spectral::{SobolevIndex, WaveVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_decomposition_reconstructs() {
        for (p, q, s) in [(1.0, 0.0, 2.0), (-3.0, 0.5, -1.0), (2.0, 2.0, 2.0)] {
            let (eig, v) = symmetric_eigen(p, q, s);
            for a in 0..2 {
                let mv = [p * v[a][0] + q * v[a][1], q * v[a][0] + s * v[a][1]];
                assert!((mv[0] - eig[a] * v[a][0]).abs() < 1e-14);
                assert!((mv[1] - eig[a] * v[a][1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_decay_of_single_mode() {
        let (lambda, kappa, dt) = (1.4, 0.3, 1e-3);
        let k = WaveVector::new(1, 2, 2);
        let u = SpectralVelocity::shear_mode(k, [2.0, -1.0, 0.0]).unwrap();
        let p = LinearPropagator::scalar(lambda, kappa, 3, dt);
        let (out, dl, _) = p.apply(&u.with_cutoff(3));
        let lap = 4.0 * PI * PI * 9.0;
        let rate = lap.powf(lambda) + kappa * lap;
        let expect = (-rate * dt).exp();
        assert!((out.l2_norm() / u.l2_norm() - expect).abs() < 1e-14);
        let integral = u.sobolev_norm_sq(SobolevIndex(lambda)) * (1.0 - (-2.0 * rate * dt).exp()) / rate;
        assert!((dl - integral).abs() < 1e-12 * integral);
    }

    #[test]
    fn noise_gain_matches_flow_variance() {
        let (lambda, dt) = (1.0, 1e-3);
        let k = WaveVector::new(3, 0, 4);
        let w = SpectralVelocity::shear_mode(k, [0.0, 1.0, 0.0]).unwrap();
        let p = LinearPropagator::scalar(lambda, 0.0, 5, dt);
        let out = p.apply_noise(&w.with_cutoff(5));
        let rate = 4.0 * PI * PI * 25.0;
        let variance = (1.0 - (-2.0 * rate * dt).exp()) / (2.0 * rate);
        let gain_sq = out.l2_norm_sq() / w.l2_norm_sq();
        assert!((gain_sq * dt - variance).abs() < 1e-15 * variance.max(1.0));
        assert!((gain_sq * dt / variance - 1.0).abs() < 1e-13);
    }

    #[test]
    fn corrector_flow_matches_series() {
        // exp(dt A) y ≈ y + dt A y + dt²/2 A² y for tiny dt
        let theta = build_theta(1.0, 2).unwrap();
        let basis = build_basis(2);
        let op = CorrectorOperator::new(3, &theta, &basis, 1.0, Projection::Leray);
        let dt = 1e-7;
        let p = LinearPropagator::with_corrector(1.0, &op, dt);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = SpectralVelocity::random(3, 3.0, 0.0, 1.0, &mut rng);
        let a = |v: &SpectralVelocity| &op.apply(v) + &v.laplacian();
        let ay = a(&y);
        let series = &(&y + &ay.scaled(dt)) + &a(&ay).scaled(0.5 * dt * dt);
        let (out, _, _) = p.apply(&y);
        assert!((&out - &series).l2_norm() < 1e-13 * y.l2_norm());
    }
}
