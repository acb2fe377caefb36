//! Physical-space evaluation on a uniform periodic grid and the dealiased
//! advection products `Π_m[(a·∇)u]`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{project_mode, CVec3, SpectralVelocity, CZERO3};
use super::wave::{ModeSet, WaveVector};
use crate::error::{Error, Result};

/// Smallest grid that evaluates `Π_target[(a·∇)u]` without aliasing, for a
/// divergence-free velocity `a` with band `velocity_band` and `u` with band
/// `field_band`.
///
/// Aliases of a product mode land inside the target ball only for the
/// collinear extremal pair `k = p e_c`, `l = m e_c`, whose contribution
/// `(â(k)·l) û(l)` vanishes because `â(k) ⊥ k`. The bound is therefore
/// `p + m + m_target` rather than one more.
pub fn required_grid(velocity_band: u32, field_band: u32, target_band: u32) -> usize {
    (velocity_band + field_band + target_band) as usize
}

/// A grid size `>= n` whose prime factors are 2, 3 and 5.
pub fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Uniform `M³` grid on the unit torus with cached FFT plans.
///
/// Not `Sync`: each solver owns its grid.
pub struct SpectralGrid {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    spare: Vec<Complex64>,
}

impl Clone for SpectralGrid {
    fn clone(&self) -> Self {
        SpectralGrid {
            size: self.size,
            forward: self.forward.clone(),
            inverse: self.inverse.clone(),
            scratch: self.scratch.clone(),
            spare: self.spare.clone(),
        }
    }
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("size", &self.size).finish()
    }
}

impl SpectralGrid {
    pub fn new(size: usize) -> Self {
        assert!(size >= 2, "grid size must be at least 2");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        SpectralGrid {
            size,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            spare: vec![Complex64::new(0.0, 0.0); size * size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn points(&self) -> usize {
        self.size * self.size * self.size
    }

    pub fn index(&self, k: WaveVector) -> usize {
        let m = self.size as i32;
        let w = |c: i32| c.rem_euclid(m) as usize;
        (w(k.0[0]) * self.size + w(k.0[1])) * self.size + w(k.0[2])
    }

    /// Grid coordinates of point `p` as `[x, y, z]` in `[0,1)³`.
    pub fn coordinates(&self, p: usize) -> [f64; 3] {
        let n = self.size;
        let h = 1.0 / n as f64;
        [(p / (n * n)) as f64 * h, ((p / n) % n) as f64 * h, (p % n) as f64 * h]
    }

    /// Grid indices of the wave numbers `-band..=band`.
    fn active(&self, band: u32) -> Vec<usize> {
        let n = self.size;
        let b = band as usize;
        if 2 * b + 1 >= n {
            return (0..n).collect();
        }
        (0..=b).chain(n - b..n).collect()
    }

    /// 3D transform by three passes of row FFTs, each followed by the axis
    /// rotation `(a, b, c) -> (b, c, a)`. Only rows that can be nonzero
    /// (inverse) or that feed in-band outputs (forward) are processed, where
    /// the band is `|k_i| <= band` per axis.
    fn fft3(&mut self, buf: &mut Vec<Complex64>, inverse: bool, band: u32) {
        let n = self.size;
        let act = self.active(band);
        let all: Vec<usize> = (0..n).collect();
        let plan = if inverse { self.inverse.clone() } else { self.forward.clone() };
        for pass in 0..3 {
            // (rows a, rows b, columns c) to process and rotate
            let (ra, rb, cols, zero_dst) = match (inverse, pass) {
                (true, 0) => (&act, &act, &all, true),
                (true, 1) => (&act, &all, &all, true),
                (true, _) => (&all, &all, &all, false),
                (false, 0) => (&all, &all, &act, false),
                (false, 1) => (&all, &act, &act, false),
                (false, _) => (&act, &act, &act, false),
            };
            for &a in ra.iter() {
                for &b in rb.iter() {
                    let row = &mut buf[(a * n + b) * n..(a * n + b + 1) * n];
                    plan.process_with_scratch(row, &mut self.scratch);
                }
            }
            if zero_dst {
                self.spare.fill(Complex64::new(0.0, 0.0));
            }
            // b outermost keeps the written cache lines hot
            for &b in rb.iter() {
                for &a in ra.iter() {
                    let src = &buf[(a * n + b) * n..(a * n + b + 1) * n];
                    if cols.len() == n {
                        for (c, v) in src.iter().enumerate() {
                            self.spare[(b * n + c) * n + a] = *v;
                        }
                    } else {
                        for &c in cols.iter() {
                            self.spare[(b * n + c) * n + a] = src[c];
                        }
                    }
                }
            }
            std::mem::swap(buf, &mut self.spare);
        }
    }

    /// Physical values of real scalar fields given by their stored
    /// coefficients on `modes`. Fields are packed two per complex transform.
    pub fn to_physical(&mut self, modes: &ModeSet, fields: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let npts = self.points();
        let mut out = Vec::with_capacity(fields.len());
        let i = Complex64::new(0.0, 1.0);
        for pair in fields.chunks(2) {
            let mut buf = vec![Complex64::new(0.0, 0.0); npts];
            for (j, &k) in modes.modes().iter().enumerate() {
                let a = pair[0][j];
                let b = pair.get(1).map_or(Complex64::new(0.0, 0.0), |f| f[j]);
                buf[self.index(k)] += a + i * b;
                buf[self.index(-k)] += a.conj() + i * b.conj();
            }
            self.fft3(&mut buf, true, modes.cutoff());
            out.push(buf.iter().map(|c| c.re).collect());
            if pair.len() == 2 {
                out.push(buf.iter().map(|c| c.im).collect());
            }
        }
        out
    }

    /// Stored coefficients on `modes` of real physical fields.
    pub fn to_spectral(&mut self, modes: &ModeSet, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let npts = self.points();
        let scale = 1.0 / npts as f64;
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let mut buf: Vec<Complex64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            self.fft3(&mut buf, false, modes.cutoff());
            let mut a_hat = Vec::with_capacity(modes.len());
            let mut b_hat = Vec::with_capacity(modes.len());
            for &k in modes.modes() {
                let cp = buf[self.index(k)] * scale;
                let cm = buf[self.index(-k)].conj() * scale;
                a_hat.push((cp + cm) * 0.5);
                b_hat.push((cp - cm) * Complex64::new(0.0, -0.5));
            }
            out.push(a_hat);
            if pair.len() == 2 {
                out.push(b_hat);
            }
        }
        out
    }

    /// Physical velocity components `u_i` and gradient `∂_j u_i` (stored at
    /// `3 i + j`).
    pub fn velocity_and_gradient(&mut self, u: &SpectralVelocity) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let modes = u.modes().clone();
        let n = modes.len();
        let mut comps: Vec<Vec<Complex64>> = (0..12).map(|_| Vec::with_capacity(n)).collect();
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        for (k, v) in u.iter() {
            let kf = k.as_f64();
            for i in 0..3 {
                comps[i].push(v[i]);
                for j in 0..3 {
                    comps[3 + 3 * i + j].push(two_pi_i * kf[j] * v[i]);
                }
            }
        }
        let refs: Vec<&[Complex64]> = comps.iter().map(|c| c.as_slice()).collect();
        let mut phys = self.to_physical(&modes, &refs);
        let grad = phys.split_off(3);
        (phys, grad)
    }

    /// Physical components of a velocity field.
    pub fn velocity(&mut self, u: &SpectralVelocity) -> Vec<Vec<f64>> {
        let comps: Vec<Vec<Complex64>> =
            (0..3).map(|i| u.coeffs().iter().map(|v| v[i]).collect()).collect();
        let refs: Vec<&[Complex64]> = comps.iter().map(|c| c.as_slice()).collect();
        self.to_physical(u.modes(), &refs)
    }

    /// `Π_target[(a·∇)u]` for each advecting velocity `a` (physical
    /// components), given the physical gradient of `u`. Products of all
    /// velocities share forward transforms.
    pub fn advect(
        &mut self,
        velocities: &[&[Vec<f64>]],
        grad: &[Vec<f64>],
        target: &Arc<ModeSet>,
    ) -> Vec<SpectralVelocity> {
        let npts = self.points();
        let mut products: Vec<Vec<f64>> = Vec::with_capacity(3 * velocities.len());
        for a in velocities {
            for i in 0..3 {
                let mut p = vec![0.0; npts];
                for j in 0..3 {
                    let g = &grad[3 * i + j];
                    for ((pv, av), gv) in p.iter_mut().zip(a[j].iter()).zip(g.iter()) {
                        *pv += av * gv;
                    }
                }
                products.push(p);
            }
        }
        let refs: Vec<&[f64]> = products.iter().map(|p| p.as_slice()).collect();
        let spec = self.to_spectral(target, &refs);
        spec.chunks(3)
            .map(|c| {
                let coeffs: Vec<CVec3> = target
                    .modes()
                    .iter()
                    .enumerate()
                    .map(|(m, &k)| project_mode(k, &[c[0][m], c[1][m], c[2][m]]))
                    .collect();
                SpectralVelocity::from_raw(target.clone(), coeffs)
            })
            .collect()
    }
}

/// Maximum pointwise speed of a physical velocity.
pub fn max_speed(comps: &[Vec<f64>]) -> f64 {
    (0..comps[0].len())
        .map(|p| (comps[0][p].powi(2) + comps[1][p].powi(2) + comps[2][p].powi(2)).sqrt())
        .fold(0.0, f64::max)
}

/// `Π_m(u·∇u)` on the Galerkin band of `u`, evaluated pseudo-spectrally on a
/// `grid³` lattice with 2/3-rule dealiasing (`grid >= 3m`).
pub fn nonlinear_term(u: &SpectralVelocity, grid: usize) -> Result<SpectralVelocity> {
    let m = u.cutoff();
    let required = required_grid(m, m, m);
    if grid < required {
        return Err(Error::GridTooSmall {
            grid,
            required,
            reason: "2/3-rule dealiasing of u·∇u",
        });
    }
    let mut g = SpectralGrid::new(grid);
    Ok(nonlinear_term_on(&mut g, u))
}

pub(crate) fn nonlinear_term_on(g: &mut SpectralGrid, u: &SpectralVelocity) -> SpectralVelocity {
    if u.is_zero() {
        return SpectralVelocity::zeros(u.cutoff());
    }
    let (vel, grad) = g.velocity_and_gradient(u);
    g.advect(&[&vel], &grad, u.modes()).pop().expect("one product")
}

/// `Π_target[(a·∇)u]` by direct summation over mode pairs; reference
/// implementation for small bands.
pub fn advect_direct(a: &SpectralVelocity, u: &SpectralVelocity, target: u32) -> SpectralVelocity {
    let out_modes = ModeSet::ball(target);
    let mut acc = vec![CZERO3; out_modes.len()];
    for (k, _, _) in a.modes().iter_full() {
        let av = a.get(k);
        for (l, _, _) in u.modes().iter_full() {
            let j = k + l;
            if let Some(super::wave::Slot::Stored(s)) = out_modes.slot(j) {
                let uv = u.get(l);
                let lf = l.as_f64();
                let factor = Complex64::new(0.0, 2.0 * PI)
                    * (av[0] * lf[0] + av[1] * lf[1] + av[2] * lf[2]);
                for c in 0..3 {
                    acc[s][c] += factor * uv[c];
                }
            }
        }
    }
    for (k, v) in out_modes.modes().iter().zip(acc.iter_mut()) {
        *v = project_mode(*k, v);
    }
    SpectralVelocity::from_raw(out_modes, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SobolevIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_through_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralVelocity::random(4, 4.0, 0.5, 1.0, &mut rng);
        let mut g = SpectralGrid::new(9);
        let phys = g.velocity(&u);
        let refs: Vec<&[f64]> = phys.iter().map(|p| p.as_slice()).collect();
        let back = g.to_spectral(u.modes(), &refs);
        for (m, v) in u.coeffs().iter().enumerate() {
            for c in 0..3 {
                assert!((back[c][m] - v[c]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn physical_values_match_pointwise_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = SpectralVelocity::random(2, 2.0, 0.0, 1.0, &mut rng);
        let mut g = SpectralGrid::new(6);
        let phys = g.velocity(&u);
        for p in [0usize, 7, 100, 215] {
            let x = g.coordinates(p);
            let mut val = [0.0; 3];
            for (k, v) in u.to_full_map() {
                let phase = 2.0 * PI * (k.0[0] as f64 * x[0] + k.0[1] as f64 * x[1] + k.0[2] as f64 * x[2]);
                let e = Complex64::new(phase.cos(), phase.sin());
                for c in 0..3 {
                    val[c] += (v[c] * e).re;
                }
            }
            for c in 0..3 {
                assert!((phys[c][p] - val[c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn shear_mode_is_a_steady_nonlinear_state() {
        let u = SpectralVelocity::shear_mode(WaveVector::new(1, 2, 0), [2.0, -1.0, 0.5]).unwrap();
        let n = nonlinear_term(&u, 9).unwrap();
        assert!(n.l2_norm() < 1e-13);
        assert!(nonlinear_term(&SpectralVelocity::zeros(3), 9).unwrap().is_zero());
    }

    #[test]
    fn undersized_grid_is_rejected() {
        let u = SpectralVelocity::zeros(4);
        assert!(matches!(nonlinear_term(&u, 11), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn friendly_sizes() {
        assert_eq!(fft_friendly(24), 24);
        assert_eq!(fft_friendly(33), 36);
        assert_eq!(fft_friendly(7), 8);
    }

    #[test]
    fn advection_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = SpectralVelocity::random(4, 4.0, 1.0, 1.0, &mut rng);
        let n = nonlinear_term(&u, 12).unwrap();
        let scale = u.l2_norm().powi(3);
        assert!(u.pairing(&n).abs() <= 1e-10 * scale);
        assert!(n.sobolev_norm(SobolevIndex(-1.0)) > 0.0);
    }

    #[test]
    fn pseudo_spectral_matches_direct_sum_at_minimal_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in [2u32, 3, 4] {
            let u = SpectralVelocity::random(m, m as f64, 0.0, 1.0, &mut rng);
            let fast = nonlinear_term(&u, required_grid(m, m, m)).unwrap();
            let slow = advect_direct(&u, &u, m);
            assert!((&fast - &slow).l2_norm() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn transport_product_exact_at_minimal_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (m, n) in [(3u32, 1u32), (3, 2), (4, 3)] {
            let a = SpectralVelocity::random(n, n as f64, 0.0, 1.0, &mut rng);
            let u = SpectralVelocity::random(m, m as f64, 0.0, 1.0, &mut rng);
            let mut g = SpectralGrid::new(required_grid(n, m, m));
            let (_, grad) = g.velocity_and_gradient(&u);
            let av = g.velocity(&a);
            let fast = g.advect(&[&av], &grad, u.modes()).pop().unwrap();
            let slow = advect_direct(&a, &u, m);
            assert!((&fast - &slow).l2_norm() < 1e-12, "m = {m}, n = {n}");
        }
    }
}
