//! The Stratonovich-Itô corrector
//! `S_θ(u) = (3ν/2) Σ_{k,i} θ_k² Π[σ_{k,i}·∇Π(σ_{−k,i}·∇u)]`.
//!
//! Each term shifts mode `l` to `l − k` and back, so `S_θ` acts
//! mode by mode: `S_θ(u)(l) = −(3ν/2) 4π² Σ_{k,i} θ_k² (a_{k,i}·l)² P_l P_{l−k} û(l)`
//! with `P_j` the Leray projector at `j`. The operator is stored as one
//! symmetric 3×3 block per mode.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::noise::{NoiseBasis, ThetaSpectrum};
use crate::spectral::{ModeSet, SobolevIndex, SpectralVelocity, WaveVector, CZERO3};

/// Whether the two Leray projections inside the corrector are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Leray,
    None,
}

pub type Block = [[f64; 3]; 3];

fn leray_matrix(j: WaveVector) -> Block {
    let mut p = [[0.0; 3]; 3];
    let n2 = j.norm_sq() as f64;
    if n2 == 0.0 {
        return p;
    }
    let jf = j.as_f64();
    for r in 0..3 {
        for c in 0..3 {
            p[r][c] = if r == c { 1.0 } else { 0.0 } - jf[r] * jf[c] / n2;
        }
    }
    p
}


/// `S_θ` restricted to the modes of a band, as per-mode blocks.
#[derive(Debug, Clone)]
pub struct CorrectorOperator {
    modes: Arc<ModeSet>,
    blocks: Vec<Block>,
}

impl CorrectorOperator {
    pub fn new(
        cutoff: u32,
        theta: &ThetaSpectrum,
        basis: &NoiseBasis,
        nu: f64,
        projection: Projection,
    ) -> Self {
        assert!(basis.cutoff() >= theta.cutoff(), "basis does not cover the noise band");
        let modes = ModeSet::ball(cutoff);
        let noise: Vec<(WaveVector, f64, [[f64; 3]; 2])> = theta
            .modes()
            .iter_full()
            .map(|(k, _, _)| (k, theta.theta(k).powi(2), basis.vectors(k).expect("mode in band")))
            .collect();
        let scale = -1.5 * nu * 4.0 * PI * PI;
        let blocks = modes
            .modes()
            .iter()
            .map(|&l| {
                let pl = leray_matrix(l);
                let mut acc = [[0.0; 3]; 3];
                for &(k, t2, a) in &noise {
                    let w: f64 = a.iter().map(|ai| l.dot(ai).powi(2)).sum::<f64>() * t2;
                    if w == 0.0 {
                        continue;
                    }
                    match projection {
                        Projection::None => {
                            for (d, row) in acc.iter_mut().enumerate() {
                                row[d] += w;
                            }
                        }
                        Projection::Leray => {
                            // P_l P_j P_l = P_l − p pᵀ with p = P_l ĵ
                            let j = l - k;
                            let jn = j.norm_sq() as f64;
                            if jn == 0.0 {
                                continue;
                            }
                            let q = j.as_f64().map(|c| c / jn.sqrt());
                            let p: [f64; 3] =
                                std::array::from_fn(|r| (0..3).map(|c| pl[r][c] * q[c]).sum());
                            for r in 0..3 {
                                for c in 0..3 {
                                    acc[r][c] += w * (pl[r][c] - p[r] * p[c]);
                                }
                            }
                        }
                    }
                }
                acc.map(|row| row.map(|x| x * scale))
            })
            .collect();
        CorrectorOperator { modes, blocks }
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// Block for the stored mode with index `i`.
    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// `S_θ(u)` for `u` on a band no wider than the operator's.
    pub fn apply(&self, u: &SpectralVelocity) -> SpectralVelocity {
        assert!(u.cutoff() <= self.modes.cutoff(), "field band exceeds corrector band");
        let coeffs = u
            .iter()
            .enumerate()
            .map(|(i, (_, v))| {
                // stored modes of a smaller ball are a prefix of the larger one
                let b = &self.blocks[i];
                let mut out = CZERO3;
                for r in 0..3 {
                    out[r] = v[0] * b[r][0] + v[1] * b[r][1] + v[2] * b[r][2];
                }
                out
            })
            .collect();
        SpectralVelocity::from_raw(u.modes().clone(), coeffs)
    }
}

/// `S_θ(u)` with both Leray projections.
pub fn corrector_apply(
    u: &SpectralVelocity,
    theta: &ThetaSpectrum,
    basis: &NoiseBasis,
    nu: f64,
) -> SpectralVelocity {
    CorrectorOperator::new(u.cutoff(), theta, basis, nu, Projection::Leray).apply(u)
}

/// `S_θ(u)` with the Leray projections omitted; equals `νΔu`.
pub fn corrector_apply_unprojected(
    u: &SpectralVelocity,
    theta: &ThetaSpectrum,
    basis: &NoiseBasis,
    nu: f64,
) -> SpectralVelocity {
    CorrectorOperator::new(u.cutoff(), theta, basis, nu, Projection::None).apply(u)
}

/// `‖S_θ(φ) − (3ν/5)Δφ‖_{H^{b−2−α}}`.
pub fn corrector_deviation(
    phi: &SpectralVelocity,
    theta: &ThetaSpectrum,
    basis: &NoiseBasis,
    nu: f64,
    b: SobolevIndex,
    alpha: f64,
) -> f64 {
    let s = corrector_apply(phi, theta, basis, nu);
    let target = phi.laplacian().scaled(0.6 * nu);
    (&s - &target).sobolev_norm(SobolevIndex(b.0 - 2.0 - alpha))
}
