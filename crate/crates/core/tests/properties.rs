//! Randomized invariants of the spectral, noise and corrector layers.

use gmnse::corrector::{corrector_apply, corrector_apply_unprojected};
use gmnse::dynamics::{cutoff, CutoffParams};
use gmnse::noise::{build_basis, build_theta};
use gmnse::spectral::{advect_direct, leray_project, nonlinear_term, SobolevIndex, SpectralVelocity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field(seed: u64, cutoff: u32, decay: f64) -> SpectralVelocity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralVelocity::random(cutoff, cutoff as f64, decay, 1.0, &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_inequality(seed in any::<u64>(), s1 in -1.5f64..0.5, gap1 in 0.05f64..1.0, gap2 in 0.05f64..1.0) {
        let u = field(seed, 4, 0.5);
        let (s, s2) = (s1 + gap1, s1 + gap1 + gap2);
        let tau = (s2 - s) / (s2 - s1);
        let lhs = u.sobolev_norm(SobolevIndex(s));
        let rhs = u.sobolev_norm(SobolevIndex(s1)).powf(tau) * u.sobolev_norm(SobolevIndex(s2)).powf(1.0 - tau);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn leray_projection_is_idempotent(seed in any::<u64>()) {
        let u = field(seed, 3, 0.0);
        let again = leray_project(&u.to_full_map()).unwrap();
        prop_assert!((&again - &u).l2_norm() <= 1e-15 * u.l2_norm());
        prop_assert!(u.divergence_residual() < 1e-14);
    }

    #[test]
    fn cutoff_is_lipschitz(a in 0.0f64..40.0, b in 0.0f64..40.0, n in 0.5f64..10.0) {
        let (fa, fb) = (cutoff(a, n), cutoff(b, n));
        prop_assert!((fa - fb).abs() <= fa * fb * (a - b).abs() / n * (1.0 + 1e-12) + 1e-15);
        prop_assert!(fa * a <= n * (1.0 + 1e-15));
    }

    #[test]
    fn corrector_is_symmetric_and_dissipative(seed in any::<u64>(), n in 1u32..4, r in 0.1f64..1.4) {
        let theta = build_theta(r, n).unwrap();
        let basis = build_basis(n);
        let u = field(seed, 3, 0.0);
        let v = field(seed.wrapping_add(1), 3, 0.0);
        let su = corrector_apply(&u, &theta, &basis, 1.0);
        let sv = corrector_apply(&v, &theta, &basis, 1.0);
        let (a, b) = (su.pairing(&v), u.pairing(&sv));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        prop_assert!(su.pairing(&u) <= 0.0);
    }

    #[test]
    fn unprojected_corrector_is_laplacian(seed in any::<u64>(), n in 1u32..5, r in 0.1f64..1.4, nu in 0.1f64..5.0) {
        let theta = build_theta(r, n).unwrap();
        let basis = build_basis(n);
        let u = field(seed, 3, 0.0);
        let s = corrector_apply_unprojected(&u, &theta, &basis, nu);
        let lap = u.laplacian().scaled(nu);
        prop_assert!((&s - &lap).l2_norm() <= 1e-12 * lap.l2_norm());
    }

    #[test]
    fn nonlinear_term_matches_direct_sum(seed in any::<u64>()) {
        let u = field(seed, 2, 0.0);
        let fast = nonlinear_term(&u, 8).unwrap();
        let slow = advect_direct(&u, &u, 2);
        prop_assert!((&fast - &slow).l2_norm() < 1e-12);
    }
}

#[test]
fn cutoff_equality_on_collinear_pair() {
    let params = CutoffParams::new(3.0, 0.2, 1.0).unwrap();
    let base = field(5, 3, 0.5);
    let unit = base.scaled(1.0 / base.sobolev_norm(params.norm_index()));
    let (u, v) = (unit.scaled(2.0 * params.threshold), unit.scaled(4.0 * params.threshold));
    let (fu, fv) = (params.value(&u), params.value(&v));
    let lhs = (fu - fv).abs();
    let rhs = fu * fv * (&u - &v).sobolev_norm(params.norm_index()) / params.threshold;
    assert!((lhs - 0.25).abs() < 1e-12 && (rhs - 0.25).abs() < 1e-12, "{lhs} {rhs}");
}
