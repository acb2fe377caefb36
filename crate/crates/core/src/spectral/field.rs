use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::wave::{ModeSet, Slot, WaveVector};
use crate::error::{Error, Result};

/// Complex amplitude `û(k)` of one Fourier mode of a vector field.
pub type CVec3 = [Complex64; 3];

pub const CZERO3: CVec3 = [Complex64::new(0.0, 0.0); 3];

/// Relative tolerance for the incompressibility check `|k·û| <= tol·|k||û|`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-12;

/// Regularity exponent `s` of the homogeneous Sobolev norm
/// `‖u‖²_{H^s} = Σ_k (2π|k|)^{2s} |û(k)|²`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SobolevIndex(pub f64);

impl SobolevIndex {
    pub const L2: SobolevIndex = SobolevIndex(0.0);

    /// `(2π|k|)^{2s}` for a mode with `|k|² = norm_sq`.
    pub fn weight(self, norm_sq: i64) -> f64 {
        if self.0 == 0.0 {
            1.0
        } else {
            (4.0 * PI * PI * norm_sq as f64).powf(self.0)
        }
    }
}

pub(crate) fn cdot_real(v: &CVec3, a: &[f64; 3]) -> Complex64 {
    v[0] * a[0] + v[1] * a[1] + v[2] * a[2]
}

pub(crate) fn cnorm_sq(v: &CVec3) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

/// `(I - kkᵀ/|k|²) v`.
pub(crate) fn project_mode(k: WaveVector, v: &CVec3) -> CVec3 {
    let kf = k.as_f64();
    let d = cdot_real(v, &kf) / k.norm_sq() as f64;
    [v[0] - d * kf[0], v[1] - d * kf[1], v[2] - d * kf[2]]
}

fn conj3(v: &CVec3) -> CVec3 {
    [v[0].conj(), v[1].conj(), v[2].conj()]
}

/// Truncated Fourier representation of a real, divergence-free, mean-zero
/// velocity field on the unit torus `T³ = [0,1)³`.
///
/// Only the lexicographically positive member of each pair `{k, -k}` is
/// stored; `û(-k)` is the conjugate of `û(k)`, so the physical field is real
/// by construction.
#[derive(Clone, Debug)]
pub struct SpectralVelocity {
    modes: Arc<ModeSet>,
    coeffs: Vec<CVec3>,
}

impl PartialEq for SpectralVelocity {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff() == other.cutoff() && self.coeffs == other.coeffs
    }
}

impl SpectralVelocity {
    pub fn zeros(cutoff: u32) -> Self {
        let modes = ModeSet::ball(cutoff);
        let coeffs = vec![CZERO3; modes.len()];
        SpectralVelocity { modes, coeffs }
    }

    /// Wraps stored coefficients after validating every invariant.
    pub fn from_stored(cutoff: u32, coeffs: Vec<CVec3>) -> Result<Self> {
        let modes = ModeSet::ball(cutoff);
        if coeffs.len() != modes.len() {
            return Err(Error::CutoffMismatch(format!(
                "cutoff {cutoff} stores {} modes, got {}",
                modes.len(),
                coeffs.len()
            )));
        }
        let field = SpectralVelocity { modes, coeffs };
        field.check_invariants()?;
        Ok(field)
    }

    pub(crate) fn from_raw(modes: Arc<ModeSet>, coeffs: Vec<CVec3>) -> Self {
        debug_assert_eq!(modes.len(), coeffs.len());
        SpectralVelocity { modes, coeffs }
    }

    /// Builds a field from a coefficient function on stored representatives,
    /// Leray-projecting every mode.
    pub fn from_fn(cutoff: u32, mut f: impl FnMut(WaveVector) -> CVec3) -> Self {
        let modes = ModeSet::ball(cutoff);
        let coeffs = modes
            .modes()
            .iter()
            .map(|&k| project_mode(k, &f(k)))
            .collect();
        SpectralVelocity { modes, coeffs }
    }

    /// `u(x) = a cos(2π k·x)` with `a` real and orthogonal to `k`.
    pub fn shear_mode(k: WaveVector, a: [f64; 3]) -> Result<Self> {
        if k.is_zero() {
            return Err(Error::ZeroMode(k));
        }
        let cutoff = ceil_sqrt(k.norm_sq());
        let (rep, _) = k.representative();
        let half = a.map(|c| Complex64::new(0.5 * c, 0.0));
        let mut u = SpectralVelocity::zeros(cutoff);
        if let Some(Slot::Stored(i)) = u.modes.slot(rep) {
            u.coeffs[i] = half;
        }
        u.check_invariants()?;
        Ok(u)
    }

    /// Random divergence-free field supported on `|k| <= kmax` with
    /// amplitudes decaying like `|k|^{-decay}`, rescaled to the given L² norm.
    pub fn random<R: Rng + ?Sized>(
        cutoff: u32,
        kmax: f64,
        decay: f64,
        l2_norm: f64,
        rng: &mut R,
    ) -> Self {
        let kmax2 = kmax * kmax;
        let mut u = SpectralVelocity::from_fn(cutoff, |k| {
            let mut v = CZERO3;
            for c in v.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *c = Complex64::new(re, im);
            }
            if (k.norm_sq() as f64) > kmax2 {
                return CZERO3;
            }
            let w = k.norm().powf(-decay);
            v.map(|c| c * w)
        });
        let n = u.l2_norm();
        if n > 0.0 {
            u.scale_mut(l2_norm / n);
        }
        u
    }

    pub fn cutoff(&self) -> u32 {
        self.modes.cutoff()
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn coeffs(&self) -> &[CVec3] {
        &self.coeffs
    }

    /// `û(k)` for any `k`, zero outside the stored band.
    pub fn get(&self, k: WaveVector) -> CVec3 {
        match self.modes.slot(k) {
            Some(Slot::Stored(i)) => self.coeffs[i],
            Some(Slot::Conjugate(i)) => conj3(&self.coeffs[i]),
            None => CZERO3,
        }
    }

    /// Iterates over stored representatives and their coefficients.
    pub fn iter(&self) -> impl Iterator<Item = (WaveVector, &CVec3)> {
        self.modes.modes().iter().copied().zip(self.coeffs.iter())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|v| v.iter().all(|c| c.re == 0.0 && c.im == 0.0))
    }

    /// Checks finiteness and incompressibility; Hermitian symmetry, zero mean
    /// and finite support hold by construction of the storage.
    pub fn check_invariants(&self) -> Result<()> {
        for (k, v) in self.iter() {
            if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NonFinite(k));
            }
            let residual = cdot_real(v, &k.as_f64()).norm();
            if residual > DIVERGENCE_TOLERANCE * k.norm() * cnorm_sq(v).sqrt() {
                return Err(Error::NotDivergenceFree { mode: k, residual });
            }
        }
        Ok(())
    }

    /// Largest relative incompressibility residual `|k·û|/(|k||û|)`.
    pub fn divergence_residual(&self) -> f64 {
        self.iter()
            .filter(|(_, v)| cnorm_sq(v) > 0.0)
            .map(|(k, v)| cdot_real(v, &k.as_f64()).norm() / (k.norm() * cnorm_sq(v).sqrt()))
            .fold(0.0, f64::max)
    }

    pub fn sobolev_norm_sq(&self, s: SobolevIndex) -> f64 {
        2.0 * self
            .iter()
            .map(|(k, v)| s.weight(k.norm_sq()) * cnorm_sq(v))
            .sum::<f64>()
    }

    pub fn sobolev_norm(&self, s: SobolevIndex) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.sobolev_norm_sq(SobolevIndex::L2)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// L² inner product `Σ_k û(k)·conj(v̂(k))` over the whole lattice; real
    /// because both fields are Hermitian.
    pub fn pairing(&self, other: &SpectralVelocity) -> f64 {
        let (small, large) = if self.cutoff() <= other.cutoff() {
            (self, other)
        } else {
            (other, self)
        };
        let same = small.cutoff() == large.cutoff();
        2.0 * small
            .iter()
            .enumerate()
            .map(|(i, (k, a))| {
                let b = if same { large.coeffs[i] } else { large.get(k) };
                (a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()).re
            })
            .sum::<f64>()
    }

    /// Mode-wise multiplication by a real symbol depending on `|k|²`.
    pub fn apply_symbol(&self, symbol: impl Fn(i64) -> f64) -> SpectralVelocity {
        let coeffs = self
            .iter()
            .map(|(k, v)| {
                let s = symbol(k.norm_sq());
                v.map(|c| c * s)
            })
            .collect();
        SpectralVelocity::from_raw(self.modes.clone(), coeffs)
    }

    /// `-(-Δ)^Λ u`, i.e. multiplication by `-(4π²|k|²)^Λ`.
    pub fn fractional_laplacian(&self, exponent: SobolevIndex) -> SpectralVelocity {
        self.apply_symbol(|n2| -(4.0 * PI * PI * n2 as f64).powf(exponent.0))
    }

    /// `Δu`, multiplication by `-4π²|k|²`.
    pub fn laplacian(&self) -> SpectralVelocity {
        self.apply_symbol(|n2| -4.0 * PI * PI * n2 as f64)
    }

    /// Re-applies the Leray projection mode by mode.
    pub fn project_mut(&mut self) {
        let modes = self.modes.clone();
        for (k, v) in modes.modes().iter().zip(self.coeffs.iter_mut()) {
            *v = project_mode(*k, v);
        }
    }

    /// Same field on another cutoff: truncated (`Π_m`) or zero-extended.
    pub fn with_cutoff(&self, cutoff: u32) -> SpectralVelocity {
        if cutoff == self.cutoff() {
            return self.clone();
        }
        let modes = ModeSet::ball(cutoff);
        let coeffs = modes.modes().iter().map(|&k| self.get(k)).collect();
        SpectralVelocity::from_raw(modes, coeffs)
    }

    pub fn scale_mut(&mut self, a: f64) {
        for v in self.coeffs.iter_mut() {
            for c in v.iter_mut() {
                *c *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> SpectralVelocity {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }

    /// `self += a * other`; both fields must share a cutoff.
    pub fn axpy(&mut self, a: f64, other: &SpectralVelocity) {
        assert_eq!(self.cutoff(), other.cutoff(), "axpy on different cutoffs");
        for (v, w) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            for (c, d) in v.iter_mut().zip(w.iter()) {
                *c += a * d;
            }
        }
    }

    /// The field as a map over both members of every conjugate pair.
    pub fn to_full_map(&self) -> BTreeMap<WaveVector, CVec3> {
        self.modes
            .iter_full()
            .map(|(k, i, conj)| {
                let v = if conj { conj3(&self.coeffs[i]) } else { self.coeffs[i] };
                (k, v)
            })
            .collect()
    }
}

/// Smallest integer `r` with `r² >= n`.
pub(crate) fn ceil_sqrt(n: i64) -> u32 {
    let mut r = (n as f64).sqrt().ceil() as i64;
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    while r * r < n {
        r += 1;
    }
    r as u32
}

/// Leray projection of a Hermitian, mean-zero spectral vector field.
///
/// Entries may be given for either or both members of a pair `{k, -k}`; when
/// both are present they must be conjugate. The cutoff of the result is the
/// smallest integer radius containing every entry.
pub fn leray_project(v: &BTreeMap<WaveVector, CVec3>) -> Result<SpectralVelocity> {
    let mut radius = 1u32;
    for k in v.keys() {
        if k.is_zero() {
            return Err(Error::ZeroMode(*k));
        }
        radius = radius.max(ceil_sqrt(k.norm_sq()));
    }
    for (k, a) in v {
        if let Some(b) = v.get(&-*k) {
            let mismatch = a.iter().zip(b.iter()).any(|(x, y)| (*x - y.conj()).norm() > 0.0);
            if mismatch {
                return Err(Error::NotHermitian(*k));
            }
        }
    }
    Ok(SpectralVelocity::from_fn(radius, |k| {
        if let Some(a) = v.get(&k) {
            *a
        } else if let Some(b) = v.get(&-k) {
            conj3(b)
        } else {
            CZERO3
        }
    }))
}

impl Add for &SpectralVelocity {
    type Output = SpectralVelocity;
    fn add(self, rhs: &SpectralVelocity) -> SpectralVelocity {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralVelocity {
    type Output = SpectralVelocity;
    fn sub(self, rhs: &SpectralVelocity) -> SpectralVelocity {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralVelocity {
    type Output = SpectralVelocity;
    fn mul(self, a: f64) -> SpectralVelocity {
        self.scaled(a)
    }
}

impl Neg for &SpectralVelocity {
    type Output = SpectralVelocity;
    fn neg(self) -> SpectralVelocity {
        self.scaled(-1.0)
    }
}
