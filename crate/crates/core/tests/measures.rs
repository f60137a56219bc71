use npmle::measures::{mixture_log_density, sample_mixture};
use npmle::{AtomicDistribution, Kernel, MixingSpec};
use proptest::prelude::*;

fn distribution() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|k| {
        (prop::collection::vec(-5.0..5.0f64, k), prop::collection::vec(1e-13..1.0f64, k)).prop_map(|(a, w)| {
            let t: f64 = w.iter().sum();
            (a, w.into_iter().map(|v| v / t).collect())
        })
    })
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent((atoms, weights) in distribution()) {
        let pi = AtomicDistribution::from_parts(atoms, weights).unwrap();
        let once = pi.canonicalize(1e-8, 1e-12).unwrap();
        let twice = once.canonicalize(1e-8, 1e-12).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn log_density_ignores_atom_order((atoms, weights) in distribution(), x in -8.0..8.0f64, seed in 0u64..1000) {
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        let mut state = seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let a = AtomicDistribution::from_parts(atoms.clone(), weights.clone()).unwrap();
        let b = AtomicDistribution::from_parts(
            order.iter().map(|&i| atoms[i]).collect(),
            order.iter().map(|&i| weights[i]).collect(),
        )
        .unwrap();
        let la = mixture_log_density(Kernel::Gaussian, &a, x).unwrap();
        let lb = mixture_log_density(Kernel::Gaussian, &b, x).unwrap();
        prop_assert!((la - lb).abs() <= 1e-12 * la.abs().max(1.0));
    }
}

#[test]
fn subgaussian_tail_sanity() {
    // π supported on [−b, b]: |x| ≤ b + 6√(ln n) should fail in at most a few of 100 runs
    let b = 2.0;
    let spec = MixingSpec::Uniform { lo: -b, hi: b };
    let n = 1000;
    let limit = b + 6.0 * (n as f64).ln().sqrt();
    let failures = (0..100u64)
        .filter(|&seed| {
            let s = sample_mixture(Kernel::Gaussian, &spec, n, seed).unwrap();
            s.x_min() < -limit || s.x_max() > limit
        })
        .count();
    assert!(failures <= 1, "{failures}");
}

#[test]
fn distinct_seeds_give_distinct_samples() {
    let spec = MixingSpec::Gaussian { mean: 0.0, sd: 1.0 };
    let a = sample_mixture(Kernel::Gaussian, &spec, 16, 1).unwrap();
    let b = sample_mixture(Kernel::Gaussian, &spec, 16, 2).unwrap();
    let c = sample_mixture(Kernel::Gaussian, &spec, 16, 1).unwrap();
    assert_ne!(a.values(), b.values());
    assert_eq!(a.values(), c.values());
}
