use ergodic_core::discretize::{godunov_hamiltonian, rouy_tourin};
use ergodic_core::Exponent;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIPLES: usize = 100_000;

fn random_exponent(rng: &mut ChaCha8Rng) -> Exponent {
    // Roughly log-uniform on (2, 200].
    let m = 2.0 + 10f64.powf(rng.gen_range(-3.0..2.3));
    Exponent::finite(m).unwrap()
}

#[test]
fn godunov_flux_is_monotone_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for _ in 0..TRIPLES {
        let e = random_exponent(&mut rng);
        let pm = rng.gen_range(-3.0..3.0);
        let pp = rng.gen_range(-3.0..3.0);
        let dp: f64 = rng.gen_range(0.0..0.5);
        let h = godunov_hamiltonian(&e, pm, pp);
        assert!(h >= 0.0);
        // Nondecreasing in p_-, nonincreasing in p_+.
        assert!(godunov_hamiltonian(&e, pm + dp, pp) >= h, "m = {e}, p- = {pm}, p+ = {pp}");
        assert!(godunov_hamiltonian(&e, pm, pp + dp) <= h, "m = {e}, p- = {pm}, p+ = {pp}");
        // Consistency on the diagonal.
        let d = godunov_hamiltonian(&e, pm, pm);
        assert!((d - e.hamiltonian(pm)).abs() <= 1e-12 * e.hamiltonian(pm).max(1.0));
        checked += 1;
    }
    assert_eq!(checked, TRIPLES);
}

#[test]
fn godunov_examples() {
    let e4 = Exponent::finite(4.0).unwrap();
    assert_eq!(godunov_hamiltonian(&e4, 0.0, 0.0), 0.0);
    assert_eq!(godunov_hamiltonian(&e4, 1.0, -1.0), 0.25);
    assert_eq!(godunov_hamiltonian(&e4, -1.0, 1.0), 0.0);
}

proptest! {
    #[test]
    fn rouy_tourin_is_monotone(pm in -5.0f64..5.0, pp in -5.0f64..5.0, dp in 0.0f64..1.0) {
        let g = rouy_tourin(pm, pp);
        prop_assert!(g >= 0.0);
        prop_assert!(rouy_tourin(pm + dp, pp) >= g);
        prop_assert!(rouy_tourin(pm, pp + dp) <= g);
        prop_assert!((rouy_tourin(pm, pm) - pm.abs()).abs() < 1e-15);
    }

    #[test]
    fn conjugate_exponents_are_dual(m in 2.000_001f64..1e6) {
        let e = Exponent::finite(m).unwrap();
        prop_assert!((1.0 / m + 1.0 / e.m_star() - 1.0).abs() < 1e-12);
        prop_assert!(e.m_star() > 1.0 && e.m_star() < 2.0);
        prop_assert!(e.alpha() > 0.0 && e.alpha() < 1.0);
    }

    #[test]
    fn holder_exponent_increases(m in 2.001f64..1e4, dm in 1e-3f64..100.0) {
        let a = Exponent::finite(m).unwrap().alpha();
        let b = Exponent::finite(m + dm).unwrap().alpha();
        prop_assert!(b > a);
    }

    #[test]
    fn subquadratic_exponents_are_rejected(m in -10.0f64..=2.0) {
        prop_assert!(Exponent::finite(m).is_err());
    }
}

#[test]
fn holder_exponent_tends_to_one() {
    let gaps: Vec<f64> = [4.0, 16.0, 64.0, 256.0, 1024.0, 1e6]
        .iter()
        .map(|&m| 1.0 - Exponent::finite(m).unwrap().alpha())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(gaps[gaps.len() - 1] < 1e-5);
    assert_eq!(Exponent::infinite().alpha(), 1.0);
    assert_eq!(Exponent::infinite().m_star(), 1.0);
}
