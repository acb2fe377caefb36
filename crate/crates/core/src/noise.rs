//! Transport noise: the divergence-free basis `σ_{k,i} = a_{k,i} e_k`, the
//! radial coefficients `θⁿ`, complex Brownian increments and the transport
//! term `√(3ν/2) Σ θ_k Π(σ_{k,i}·∇u) ΔW^{k,i}`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::spectral::{project_mode, ModeSet, SpectralVelocity, WaveVector, CZERO3};

/// Identifier of the `ℤ³₊` classifier: first nonzero coordinate positive.
pub const PARTITION_RULE: &str = "lexicographic-positive";
/// Identifier of the `k^⊥` basis construction.
pub const BASIS_RULE: &str = "least-aligned-axis-cross";

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Orthonormal basis `(a_{k,1}, a_{k,2})` of `k^⊥`, identical for `k` and
/// `−k`.
pub fn perpendicular_basis(k: WaveVector) -> [[f64; 3]; 2] {
    let (rep, _) = k.representative();
    let kf = rep.as_f64();
    let e = if kf[2].abs() <= kf[1].abs() { [0.0, 0.0, 1.0] } else { [0.0, 1.0, 0.0] };
    let a1 = normalize(cross(e, kf));
    let a2 = normalize(cross(kf, a1));
    [a1, a2]
}

/// The noise basis on `1 <= |k| <= n`.
#[derive(Debug, Clone)]
pub struct NoiseBasis {
    modes: Arc<ModeSet>,
    vectors: Vec<[[f64; 3]; 2]>,
}

pub fn build_basis(n: u32) -> NoiseBasis {
    assert!(n >= 1, "noise cutoff must be positive");
    let modes = ModeSet::ball(n);
    let vectors = modes.modes().iter().map(|&k| perpendicular_basis(k)).collect();
    NoiseBasis { modes, vectors }
}

impl NoiseBasis {
    pub fn cutoff(&self) -> u32 {
        self.modes.cutoff()
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// `(a_{k,1}, a_{k,2})`, or `None` outside the band.
    pub fn vectors(&self, k: WaveVector) -> Option<[[f64; 3]; 2]> {
        let (rep, _) = k.representative();
        self.modes.slot(rep).map(|s| match s {
            crate::spectral::Slot::Stored(i) | crate::spectral::Slot::Conjugate(i) => self.vectors[i],
        })
    }

    /// Basis vectors in stored-mode order.
    pub fn stored(&self) -> &[[[f64; 3]; 2]] {
        &self.vectors
    }
}

/// Radial coefficients `θ_k = √ε_n |k|^{−r}` on `1 <= |k| <= n`.
#[derive(Debug, Clone)]
pub struct ThetaSpectrum {
    r: f64,
    modes: Arc<ModeSet>,
    eps_n: f64,
    values: Vec<f64>,
}

pub fn build_theta(r: f64, n: u32) -> Result<ThetaSpectrum> {
    if !(r > 0.0 && r < 1.5) {
        return Err(Error::Constraint(format!("noise exponent r = {r} must lie in (0, 3/2)")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("noise cutoff n must be at least 1".into()));
    }
    let modes = ModeSet::ball(n);
    let raw: Vec<f64> = modes.modes().iter().map(|k| (k.norm_sq() as f64).powf(-r / 2.0)).collect();
    let total: f64 = 2.0 * raw.iter().map(|t| t * t).sum::<f64>();
    let eps_n = 1.0 / total;
    let values = raw.iter().map(|t| eps_n.sqrt() * t).collect();
    Ok(ThetaSpectrum { r, modes, eps_n, values })
}

impl ThetaSpectrum {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn cutoff(&self) -> u32 {
        self.modes.cutoff()
    }

    pub fn eps_n(&self) -> f64 {
        self.eps_n
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// `θ_k`, zero outside the support.
    pub fn theta(&self, k: WaveVector) -> f64 {
        let (rep, _) = k.representative();
        match self.modes.slot(rep) {
            Some(crate::spectral::Slot::Stored(i)) => self.values[i],
            _ => 0.0,
        }
    }

    /// Values in stored-mode order.
    pub fn stored(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_k θ_k²` over the full lattice.
    pub fn l2_norm_sq(&self) -> f64 {
        2.0 * self.values.iter().map(|t| t * t).sum::<f64>()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// One batch of increments `ΔW^{k,i}` for stored `k`; the `ℤ³₋` values
/// are implied conjugates.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    modes: Arc<ModeSet>,
    values: Vec<[Complex64; 2]>,
}

impl Increments {
    pub fn zeros(modes: Arc<ModeSet>) -> Self {
        let values = vec![[Complex64::new(0.0, 0.0); 2]; modes.len()];
        Increments { modes, values }
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// `ΔW^{k,i}` for any `k` in the band, `i ∈ {0, 1}`.
    pub fn get(&self, k: WaveVector, i: usize) -> Complex64 {
        match self.modes.slot(k) {
            Some(crate::spectral::Slot::Stored(s)) => self.values[s][i],
            Some(crate::spectral::Slot::Conjugate(s)) => self.values[s][i].conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn stored(&self) -> &[[Complex64; 2]] {
        &self.values
    }

    /// Increment over the union of two consecutive steps.
    pub fn add_assign(&mut self, other: &Increments) {
        assert!(Arc::ptr_eq(&self.modes, &other.modes) || *self.modes == *other.modes);
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            a[0] += b[0];
            a[1] += b[1];
        }
    }

    /// The real noise velocity `w = Σ_{k,i} θ_k a_{k,i} e_k ΔW^{k,i}`.
    pub fn noise_velocity(&self, basis: &NoiseBasis, theta: &ThetaSpectrum) -> SpectralVelocity {
        let n = theta.cutoff();
        assert!(basis.cutoff() >= n && self.modes.cutoff() >= n, "incompatible noise bands");
        let modes = theta.modes().clone();
        let coeffs = modes
            .modes()
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                let t = theta.stored()[j];
                let a = basis.vectors(k).expect("mode in band");
                let dw = [self.get(k, 0), self.get(k, 1)];
                let mut v = CZERO3;
                for (c, slot) in v.iter_mut().enumerate() {
                    *slot = (dw[0] * a[0][c] + dw[1] * a[1][c]) * t;
                }
                v
            })
            .collect();
        SpectralVelocity::from_raw(modes, coeffs)
    }
}

/// Seeded generator of complex Brownian increments with
/// `E|ΔW^{k,i}|² = 2 dt`.
#[derive(Debug, Clone)]
pub struct BrownianDriver {
    modes: Arc<ModeSet>,
    dt: f64,
    substeps: u32,
    rng: ChaCha20Rng,
}

impl BrownianDriver {
    pub fn new(n: u32, dt: f64, seed: u64, replica: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
        }
        Ok(BrownianDriver {
            modes: ModeSet::ball(n),
            dt,
            substeps: 1,
            rng: stream(seed, replica, Purpose::Noise),
        })
    }

    /// Driver with step `substeps · fine_dt` whose increments are sums of
    /// the increments of `BrownianDriver::new(n, fine_dt, seed, replica)`,
    /// so runs at different step sizes share one Brownian path.
    pub fn coarsened(n: u32, fine_dt: f64, substeps: u32, seed: u64, replica: u64) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be positive".into()));
        }
        let mut d = BrownianDriver::new(n, fine_dt, seed, replica)?;
        d.substeps = substeps;
        Ok(d)
    }

    /// Step covered by one batch.
    pub fn dt(&self) -> f64 {
        self.dt * self.substeps as f64
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// Next batch: real and imaginary parts are independent `N(0, dt)`.
    pub fn sample(&mut self) -> Increments {
        let mut total = self.sample_fine();
        for _ in 1..self.substeps {
            let next = self.sample_fine();
            total.add_assign(&next);
        }
        total
    }

    fn sample_fine(&mut self) -> Increments {
        let sd = self.dt.sqrt();
        let values = (0..self.modes.len())
            .map(|_| {
                let mut pair = [Complex64::new(0.0, 0.0); 2];
                for p in pair.iter_mut() {
                    let re: f64 = self.rng.sample(StandardNormal);
                    let im: f64 = self.rng.sample(StandardNormal);
                    *p = Complex64::new(sd * re, sd * im);
                }
                pair
            })
            .collect();
        Increments { modes: self.modes.clone(), values }
    }
}

/// `√(3ν/2) Σ_{k,i} θ_k Π(σ_{k,i}·∇u) ΔW^{k,i}` by exact mode shifts. The
/// result lives on the band `|l| <= m + n`; Galerkin truncation is left to
/// the caller.
pub fn transport_increment(
    u: &SpectralVelocity,
    basis: &NoiseBasis,
    theta: &ThetaSpectrum,
    incr: &Increments,
    nu: f64,
) -> Result<SpectralVelocity> {
    let n = theta.cutoff();
    if basis.cutoff() < n || incr.modes().cutoff() < n {
        return Err(Error::CutoffMismatch(format!(
            "noise band {n} exceeds basis band {} or increment band {}",
            basis.cutoff(),
            incr.modes().cutoff()
        )));
    }
    let band = u.cutoff().checked_add(n).filter(|b| *b <= 4096).ok_or_else(|| {
        Error::CutoffMismatch(format!("band {} + {} is not representable", u.cutoff(), n))
    })?;
    let out = ModeSet::ball(band);
    let mut acc = vec![CZERO3; out.len()];
    let c = (1.5 * nu).sqrt();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    for (k, _, _) in theta.modes().iter_full() {
        let t = theta.theta(k);
        let a = basis.vectors(k).expect("mode in band");
        let dw = [incr.get(k, 0), incr.get(k, 1)];
        for (l, _, _) in u.modes().iter_full() {
            if let Some(crate::spectral::Slot::Stored(s)) = out.slot(k + l) {
                let ul = u.get(l);
                for i in 0..2 {
                    let f = two_pi_i * l.dot(&a[i]) * dw[i] * (c * t);
                    for comp in 0..3 {
                        acc[s][comp] += f * ul[comp];
                    }
                }
            }
        }
    }
    for (k, v) in out.modes().iter().zip(acc.iter_mut()) {
        *v = project_mode(*k, v);
    }
    Ok(SpectralVelocity::from_raw(out, acc))
}

/// `E‖√(3ν/2) Π_m Σ θ_k Π(σ_{k,i}·∇u) ΔW^{k,i}‖²` for increments over `dt`,
/// with `m` the cutoff of `u`.
pub fn expected_transport_energy(
    u: &SpectralVelocity,
    basis: &NoiseBasis,
    theta: &ThetaSpectrum,
    dt: f64,
    nu: f64,
) -> f64 {
    let m2 = (u.cutoff() as i64).pow(2);
    let mut total = 0.0;
    for (j, &k) in theta.modes().modes().iter().enumerate() {
        let t2 = theta.stored()[j].powi(2);
        let a = basis.stored()[j];
        let mut acc = 0.0;
        for (l, _, _) in u.modes().iter_full() {
            let target = k + l;
            let n2 = target.norm_sq();
            if n2 == 0 || n2 > m2 {
                continue;
            }
            let ul = project_mode(target, &u.get(l));
            let e: f64 = ul.iter().map(|c| c.norm_sqr()).sum();
            acc += a.iter().map(|ai| l.dot(ai).powi(2)).sum::<f64>() * e;
        }
        total += t2 * acc;
    }
    1.5 * nu * 4.0 * dt * 4.0 * PI * PI * total
}

/// Sum of `θ_k² a_{k,i} ⊗ a_{k,i}` over the full lattice; equals
/// `(2/3) I` by isotropy of the shells.
pub fn noise_covariance(basis: &NoiseBasis, theta: &ThetaSpectrum) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (j, &t) in theta.stored().iter().enumerate() {
        for a in basis.stored()[j].iter() {
            for p in 0..3 {
                for q in 0..3 {
                    m[p][q] += 2.0 * t * t * a[p] * a[q];
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::CVec3;

    fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[test]
    fn canonical_basis_examples() {
        let b = perpendicular_basis(WaveVector::new(1, 0, 0));
        assert_eq!(b, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let b = perpendicular_basis(WaveVector::new(0, 1, 0));
        assert_eq!(b, [[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let b = perpendicular_basis(WaveVector::new(0, 0, 1));
        assert_eq!(b, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn basis_is_orthonormal_and_even() {
        let basis = build_basis(4);
        for (k, _, _) in basis.modes().iter_full() {
            let [a1, a2] = basis.vectors(k).unwrap();
            let kf = k.as_f64();
            assert!(dot(a1, kf).abs() < 1e-14 && dot(a2, kf).abs() < 1e-14);
            assert!((dot(a1, a1) - 1.0).abs() < 1e-14 && (dot(a2, a2) - 1.0).abs() < 1e-14);
            assert!(dot(a1, a2).abs() < 1e-14);
            assert_eq!(basis.vectors(-k), basis.vectors(k));
        }
        assert!(basis.vectors(WaveVector::new(5, 0, 0)).is_none());
    }

    #[test]
    fn theta_normalisation_examples() {
        for r in [0.3, 1.0, 1.4] {
            let t = build_theta(r, 1).unwrap();
            assert!((t.eps_n() - 1.0 / 6.0).abs() < 1e-15);
        }
        // shells |k|² = 1, 2, 3, 4 hold 6, 12, 8, 6 vectors
        let t = build_theta(1.0, 2).unwrap();
        assert!((t.eps_n() - 6.0 / 97.0).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for n in 1..=8 {
            let t = build_theta(0.8, n).unwrap();
            assert!((t.l2_norm_sq() - 1.0).abs() < 1e-14);
            assert!((t.linf_norm() - t.eps_n().sqrt()).abs() < 1e-15);
            assert!(t.eps_n() < prev);
            prev = t.eps_n();
        }
        assert_eq!(t.theta(WaveVector::new(3, 0, 0)), 0.0);
        assert!(build_theta(1.5, 2).is_err() && build_theta(0.0, 2).is_err());
    }

    #[test]
    fn covariance_is_isotropic() {
        let m = noise_covariance(&build_basis(3), &build_theta(1.0, 3).unwrap());
        for p in 0..3 {
            for q in 0..3 {
                let expect = if p == q { 2.0 / 3.0 } else { 0.0 };
                assert!((m[p][q] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn increment_statistics() {
        let dt = 0.01;
        let mut drv = BrownianDriver::new(1, dt, 11, 0).unwrap();
        let samples = 100_000;
        let k = WaveVector::new(0, 1, 0);
        let (mut mean_re, mut mean_im, mut second) = (0.0, 0.0, 0.0);
        let mut cross = Complex64::new(0.0, 0.0);
        for _ in 0..samples {
            let w = drv.sample();
            assert_eq!(w.get(-k, 1), w.get(k, 1).conj());
            let z = w.get(k, 0);
            mean_re += z.re;
            mean_im += z.im;
            second += z.norm_sqr();
            cross += z * w.get(k, 1);
        }
        let s = samples as f64;
        let bound = 4.0 * (2.0 * dt / s).sqrt();
        assert!((mean_re / s).abs() <= bound && (mean_im / s).abs() <= bound);
        assert!((second / s / (2.0 * dt) - 1.0).abs() <= 0.05);
        assert!((cross / s).norm() <= 4.0 * 2.0 * dt / s.sqrt());
    }

    #[test]
    fn coarsened_driver_sums_fine_increments() {
        let mut fine = BrownianDriver::new(2, 0.01, 4, 2).unwrap();
        let mut coarse = BrownianDriver::coarsened(2, 0.01, 4, 4, 2).unwrap();
        assert!((coarse.dt() - 0.04).abs() < 1e-15);
        let mut sum = fine.sample();
        for _ in 0..3 {
            sum.add_assign(&fine.sample());
        }
        assert_eq!(coarse.sample(), sum);
    }

    #[test]
    fn expected_transport_energy_matches_corrector() {
        use crate::corrector::corrector_apply;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let u = SpectralVelocity::random(2, 2.0, 0.0, 1.0, &mut rng);
        let (basis, theta) = (build_basis(2), build_theta(1.0, 2).unwrap());
        let (dt, nu) = (0.01, 0.8);
        // without truncation the noise injects exactly what S_θ removes
        let wide = u.with_cutoff(4);
        let e = expected_transport_energy(&wide, &basis, &theta, dt, nu);
        let s = corrector_apply(&u, &theta, &basis, nu);
        let expect = -2.0 * dt * u.pairing(&s);
        assert!((e - expect).abs() < 1e-12 * expect);
        // truncation to the band of u only removes energy
        assert!(expected_transport_energy(&u, &basis, &theta, dt, nu) < e);
    }

    #[test]
    fn expected_transport_energy_matches_samples() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let u = SpectralVelocity::random(2, 2.0, 0.0, 1.0, &mut rng);
        let (basis, theta) = (build_basis(1), build_theta(1.0, 1).unwrap());
        let (dt, nu) = (0.01, 0.8);
        let expect = expected_transport_energy(&u, &basis, &theta, dt, nu);
        let mut drv = BrownianDriver::new(1, dt, 9, 0).unwrap();
        let samples = 4000;
        let values: Vec<f64> = (0..samples)
            .map(|_| {
                let t = transport_increment(&u, &basis, &theta, &drv.sample(), nu).unwrap();
                t.with_cutoff(2).l2_norm_sq()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / samples as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        assert!((mean - expect).abs() <= 4.0 * (var / samples as f64).sqrt());
    }

    #[test]
    fn drivers_are_reproducible() {
        let mut a = BrownianDriver::new(2, 0.1, 5, 1).unwrap();
        let mut b = BrownianDriver::new(2, 0.1, 5, 1).unwrap();
        assert_eq!(a.sample(), b.sample());
        let first = a.sample();
        assert_ne!(first, a.sample());
    }

    #[test]
    fn single_pair_transport_matches_mode_shift() {
        let nu = 0.7;
        let basis = build_basis(1);
        let theta = build_theta(1.0, 1).unwrap();
        let k = WaveVector::new(0, 1, 0);
        let mut incr = Increments::zeros(basis.modes().clone());
        let slot = match basis.modes().slot(k) {
            Some(crate::spectral::Slot::Stored(s)) => s,
            _ => unreachable!(),
        };
        let dw = Complex64::new(0.3, -0.2);
        incr.values[slot][0] = dw;
        let l = WaveVector::new(0, 0, 1);
        let u = SpectralVelocity::shear_mode(l, [1.0, 1.0, 0.0]).unwrap();
        let out = transport_increment(&u, &basis, &theta, &incr, nu).unwrap();
        // a_{k,1} = (-1,0,0) is orthogonal to l, so every shift vanishes
        assert!(out.l2_norm() < 1e-15);

        let l = WaveVector::new(0, 0, 1);
        let u = SpectralVelocity::shear_mode(l, [1.0, 0.0, 0.0]).unwrap();
        let incr2 = {
            let mut w = Increments::zeros(basis.modes().clone());
            let kz = WaveVector::new(1, 0, 0);
            if let Some(crate::spectral::Slot::Stored(s)) = basis.modes().slot(kz) {
                w.values[s][1] = dw;
            }
            w
        };
        // k = (1,0,0), a_{k,2} = (0,0,1), a·l = 1
        let out = transport_increment(&u, &basis, &theta, &incr2, nu).unwrap();
        let c = (1.5 * nu).sqrt() * theta.theta(WaveVector::new(1, 0, 0));
        let uhat = u.get(l);
        let target = WaveVector::new(1, 0, 1);
        let raw: CVec3 = std::array::from_fn(|j| Complex64::new(0.0, 2.0 * PI) * dw * c * uhat[j]);
        let expect = project_mode(target, &raw);
        let got = out.get(target);
        for j in 0..3 {
            assert!((got[j] - expect[j]).norm() < 1e-12);
        }
        // the -k, -l partner: l - k = (-1,0,1) receives the conjugate-increment term
        let target2 = WaveVector::new(-1, 0, 1);
        let raw2: CVec3 =
            std::array::from_fn(|j| Complex64::new(0.0, 2.0 * PI) * dw.conj() * c * uhat[j]);
        let expect2 = project_mode(target2, &raw2);
        let got2 = out.get(target2);
        for j in 0..3 {
            assert!((got2[j] - expect2[j]).norm() < 1e-12);
        }
        out.check_invariants().unwrap();
    }
}
